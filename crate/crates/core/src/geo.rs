//! Spatial feature engineering and surfaces: buffer aggregation, prediction
//! grids, inverse distance weighting and kernel density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Coord;
use crate::spatial::SpatialIndex;

/// Distances below this count as an exact hit in [`idw`].
pub const IDW_EXACT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub coord: Coord,
    pub weight: Option<f64>,
    pub category: Option<String>,
}

impl GeoPoint {
    pub fn at(u: f64, v: f64) -> Self {
        GeoPoint {
            coord: Coord::new(u, v),
            weight: None,
            category: None,
        }
    }

    pub fn weighted(u: f64, v: f64, weight: f64) -> Self {
        GeoPoint {
            coord: Coord::new(u, v),
            weight: Some(weight),
            category: None,
        }
    }
}

/// A named point layer (polygon layers enter as centroids carrying an area weight).
#[derive(Debug, Clone, PartialEq)]
pub struct GeoLayer {
    pub name: String,
    pub features: Vec<GeoPoint>,
}

impl GeoLayer {
    pub fn new(name: impl Into<String>, features: Vec<GeoPoint>) -> Result<Self> {
        let name = name.into();
        for (i, f) in features.iter().enumerate() {
            if !f.coord.is_finite() {
                return Err(Error::NonFinite(format!(
                    "layer {name}, feature {i} coordinate"
                )));
            }
            if let Some(w) = f.weight {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::Data(format!(
                        "layer {name}, feature {i}: weight {w} must be finite and ≥ 0"
                    )));
                }
            }
        }
        Ok(GeoLayer { name, features })
    }

    /// Features whose category equals `category`.
    pub fn with_category(&self, category: &str) -> GeoLayer {
        GeoLayer {
            name: format!("{}_{}", self.name, category),
            features: self
                .features
                .iter()
                .filter(|f| f.category.as_deref() == Some(category))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    Count,
    /// Sum of weights; a missing weight counts as 1.
    WeightSum,
    /// Mean of weights; 0 with the empty flag when nothing is in range.
    WeightMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferValue {
    pub value: f64,
    /// No layer feature fell inside the buffer.
    pub empty: bool,
}

/// Aggregates layer features within `radius` (inclusive) of each center.
pub fn buffer_aggregate(
    layer: &GeoLayer,
    centers: &[Coord],
    radius: f64,
    mode: AggregateMode,
) -> Result<Vec<BufferValue>> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "buffer radius {radius} must be > 0"
        )));
    }
    let index = SpatialIndex::new(layer.features.iter().map(|f| f.coord).collect());
    Ok(centers
        .par_iter()
        .map(|&c| {
            let hits = index.within_radius(c, radius);
            let empty = hits.is_empty();
            let weight_sum = || -> f64 {
                hits.iter()
                    .map(|&i| layer.features[i].weight.unwrap_or(1.0))
                    .sum()
            };
            let value = match mode {
                AggregateMode::Count => hits.len() as f64,
                AggregateMode::WeightSum => weight_sum(),
                AggregateMode::WeightMean if empty => 0.0,
                AggregateMode::WeightMean => weight_sum() / hits.len() as f64,
            };
            BufferValue { value, empty }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Coord,
    pub max: Coord,
}

impl BBox {
    pub fn new(min_u: f64, min_v: f64, max_u: f64, max_v: f64) -> Self {
        BBox {
            min: Coord::new(min_u, min_v),
            max: Coord::new(max_u, max_v),
        }
    }

    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Coord>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        Some(it.fold(
            BBox {
                min: first,
                max: first,
            },
            |b, p| BBox {
                min: Coord::new(b.min.u.min(p.u), b.min.v.min(p.v)),
                max: Coord::new(b.max.u.max(p.u), b.max.v.max(p.v)),
            },
        ))
    }

    fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite())
            || self.max.u < self.min.u
            || self.max.v < self.min.v
        {
            return Err(Error::DegenerateBbox);
        }
        Ok(())
    }
}

/// Polygon with an outer ring and optional holes. Rings need not be closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Coord>,
    #[serde(default)]
    pub holes: Vec<Vec<Coord>>,
}

fn winding_number(ring: &[Coord], p: Coord) -> i32 {
    let n = ring.len();
    let mut wn = 0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let cross = (b.u - a.u) * (p.v - a.v) - (p.u - a.u) * (b.v - a.v);
        if a.v <= p.v {
            if b.v > p.v && cross > 0.0 {
                wn += 1;
            }
        } else if b.v <= p.v && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

impl Polygon {
    pub fn new(exterior: Vec<Coord>) -> Self {
        Polygon {
            exterior,
            holes: Vec::new(),
        }
    }

    pub fn contains(&self, p: Coord) -> bool {
        winding_number(&self.exterior, p) != 0
            && self.holes.iter().all(|h| winding_number(h, p) == 0)
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::of_points(&self.exterior)
    }
}

/// Union of polygons.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Boundary {
    pub polygons: Vec<Polygon>,
}

impl Boundary {
    pub fn contains(&self, p: Coord) -> bool {
        self.polygons.iter().any(|poly| poly.contains(p))
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::of_points(self.polygons.iter().flat_map(|p| p.exterior.iter()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub coord: Coord,
    pub col: usize,
    pub row: usize,
    /// Predicted class-1 probability once scored.
    pub risk: Option<f64>,
}

/// Axis-aligned lattice of cells, optionally clipped to a boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskGrid {
    pub origin: Coord,
    pub spacing: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub cells: Vec<GridCell>,
}

impl RiskGrid {
    pub fn coords(&self) -> Vec<Coord> {
        self.cells.iter().map(|c| c.coord).collect()
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }
}

/// Lattice anchored at the bbox minimum corner with `floor(Δ/spacing + 1)`
/// points per axis (endpoints inclusive).
pub fn make_grid(bbox: &BBox, spacing: f64) -> Result<RiskGrid> {
    grid_impl(bbox, spacing, None)
}

/// [`make_grid`] over the boundary's bbox, keeping cells inside the boundary.
pub fn make_grid_clipped(boundary: &Boundary, spacing: f64) -> Result<RiskGrid> {
    let bbox = boundary.bbox().ok_or(Error::DegenerateBbox)?;
    grid_impl(&bbox, spacing, Some(boundary))
}

fn grid_impl(bbox: &BBox, spacing: f64, boundary: Option<&Boundary>) -> Result<RiskGrid> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid spacing {spacing} must be > 0"
        )));
    }
    bbox.validate()?;
    let n_cols = ((bbox.max.u - bbox.min.u) / spacing + 1.0).floor() as usize;
    let n_rows = ((bbox.max.v - bbox.min.v) / spacing + 1.0).floor() as usize;
    let mut cells = Vec::new();
    for row in 0..n_rows {
        for col in 0..n_cols {
            let coord = Coord::new(
                bbox.min.u + col as f64 * spacing,
                bbox.min.v + row as f64 * spacing,
            );
            if boundary.is_none_or(|b| b.contains(coord)) {
                cells.push(GridCell {
                    coord,
                    col,
                    row,
                    risk: None,
                });
            }
        }
    }
    Ok(RiskGrid {
        origin: bbox.min,
        spacing,
        n_cols,
        n_rows,
        cells,
    })
}

/// Inverse distance weighting over a fixed sample set.
#[derive(Debug, Clone)]
pub struct IdwInterpolator {
    index: SpatialIndex,
    values: Vec<f64>,
    power: f64,
    /// `None` uses every sample.
    k: Option<usize>,
}

impl IdwInterpolator {
    pub fn new(samples: &[(Coord, f64)], power: f64, k: Option<usize>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "IDW power {power} must be > 0"
            )));
        }
        if k == Some(0) {
            return Err(Error::InvalidParameter("IDW k must be ≥ 1".into()));
        }
        Ok(IdwInterpolator {
            index: SpatialIndex::new(samples.iter().map(|s| s.0).collect()),
            values: samples.iter().map(|s| s.1).collect(),
            power,
            k,
        })
    }

    /// `Σ w_i v_i / Σ w_i` with `w_i = d_i^-power` over the k nearest samples;
    /// a sample closer than [`IDW_EXACT_EPS`] returns its own value.
    pub fn interpolate(&self, query: Coord) -> Result<f64> {
        let k = self.k.unwrap_or(self.values.len());
        let hits = self.index.knn_with_dist_sq(query, k)?;
        if hits[0].1.sqrt() < IDW_EXACT_EPS {
            return Ok(self.values[hits[0].0]);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (i, d2) in hits {
            let w = d2.sqrt().powf(-self.power);
            num += w * self.values[i];
            den += w;
        }
        Ok(num / den)
    }

    pub fn interpolate_many(&self, queries: &[Coord]) -> Result<Vec<f64>> {
        queries.par_iter().map(|&q| self.interpolate(q)).collect()
    }
}

pub fn idw(samples: &[(Coord, f64)], query: Coord, power: f64, k: Option<usize>) -> Result<f64> {
    IdwInterpolator::new(samples, power, k)?.interpolate(query)
}

/// Kernels are truncated beyond this many bandwidths (weight < 1e-13).
const KDE_CUTOFF: f64 = 8.0;

/// Sum of Gaussian kernels `exp(-d²/2h²) / (2πh²)` at each grid cell (not divided by N).
pub fn kde_sum(points: &[Coord], bandwidth: f64, grid: &RiskGrid) -> Result<Vec<f64>> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "KDE bandwidth {bandwidth} must be > 0"
        )));
    }
    if points.is_empty() {
        return Ok(vec![0.0; grid.cells.len()]);
    }
    let index = SpatialIndex::new(points.to_vec());
    let norm = 1.0 / (2.0 * std::f64::consts::PI * bandwidth * bandwidth);
    let two_h2 = 2.0 * bandwidth * bandwidth;
    Ok(grid
        .cells
        .par_iter()
        .map(|cell| {
            index
                .within_radius(cell.coord, KDE_CUTOFF * bandwidth)
                .into_iter()
                .map(|i| (-cell.coord.dist_sq(&points[i]) / two_h2).exp() * norm)
                .sum()
        })
        .collect())
}

/// Gaussian kernel density per cell, integrating to 1 over the plane.
pub fn kde(points: &[Coord], bandwidth: f64, grid: &RiskGrid) -> Result<Vec<f64>> {
    let n = points.len().max(1) as f64;
    Ok(kde_sum(points, bandwidth, grid)?
        .into_iter()
        .map(|d| d / n)
        .collect())
}

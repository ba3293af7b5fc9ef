//! File formats: events CSV, layer CSV/GeoJSON, boundary GeoJSON, feature
//! tables, manifests and risk-surface exports.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::{Boundary, GeoLayer, GeoPoint, Polygon, RiskGrid};
use crate::sample::{Coord, LabeledSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    NoDamage,
    Minor,
    Moderate,
    Major,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::NoDamage => "no_damage",
            Severity::Minor => "minor",
            Severity::Moderate => "moderate",
            Severity::Major => "major",
        }
    }

    /// Accepts `no_damage`, `No Damage`, `no-damage`, ...
    pub fn parse(s: &str) -> Option<Self> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        match norm.as_str() {
            "no_damage" | "none" => Some(Severity::NoDamage),
            "minor" => Some(Severity::Minor),
            "moderate" => Some(Severity::Moderate),
            "major" => Some(Severity::Major),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub id: String,
    pub coord: Coord,
    pub severity_raw: Severity,
    pub severity_binary: u8,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| {
        malformed(
            path,
            line,
            format!("{what}: cannot parse {field:?} as a number"),
        )
    })?;
    if !v.is_finite() {
        return Err(malformed(
            path,
            line,
            format!("{what}: non-finite value {field:?}"),
        ));
    }
    Ok(v)
}

/// Reads `id,u,v,severity`; the mapping sends the raw severity to 0/1.
pub fn read_events(path: &Path, mapping: &BTreeMap<String, u8>) -> Result<Vec<EventRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let idx = |name: &str| {
        column(&headers, name).ok_or_else(|| malformed(path, 1, format!("missing column {name:?}")))
    };
    let (ci, cu, cv, cs) = (idx("id")?, idx("u")?, idx("v")?, idx("severity")?);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |i: usize| rec.get(i).ok_or_else(|| malformed(path, line, "short row"));
        let u = parse_f64(path, line, get(cu)?, "u")?;
        let v = parse_f64(path, line, get(cv)?, "v")?;
        let raw = get(cs)?;
        let severity = Severity::parse(raw)
            .ok_or_else(|| malformed(path, line, format!("unknown severity {raw:?}")))?;
        let binary = *mapping.get(severity.as_str()).ok_or_else(|| {
            malformed(path, line, format!("severity {raw:?} missing from mapping"))
        })?;
        out.push(EventRecord {
            id: get(ci)?.to_string(),
            coord: Coord::new(u, v),
            severity_raw: severity,
            severity_binary: binary,
        });
    }
    Ok(out)
}

pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["id", "u", "v", "severity"])?;
    for e in events {
        w.write_record([
            e.id.clone(),
            e.coord.u.to_string(),
            e.coord.v.to_string(),
            e.severity_raw.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn is_geojson(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("geojson") | Some("json")
    )
}

/// Reads a point layer from CSV (`u,v[,weight][,category]`) or GeoJSON.
pub fn read_layer(path: &Path, name: &str) -> Result<GeoLayer> {
    let features = if is_geojson(path) {
        read_geojson_points(path)?
    } else {
        read_csv_points(path)?
    };
    GeoLayer::new(name, features)
}

fn read_csv_points(path: &Path) -> Result<Vec<GeoPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let cu = column(&headers, "u").ok_or_else(|| malformed(path, 1, "missing column \"u\""))?;
    let cv = column(&headers, "v").ok_or_else(|| malformed(path, 1, "missing column \"v\""))?;
    let cw = column(&headers, "weight");
    let cc = column(&headers, "category");
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).ok_or_else(|| malformed(path, line, "short row"));
        let u = parse_f64(path, line, field(cu)?, "u")?;
        let v = parse_f64(path, line, field(cv)?, "v")?;
        let weight = match cw {
            Some(i) if !field(i)?.is_empty() => {
                let w = parse_f64(path, line, field(i)?, "weight")?;
                if w < 0.0 {
                    return Err(malformed(path, line, "weight must be ≥ 0"));
                }
                Some(w)
            }
            _ => None,
        };
        let category = match cc {
            Some(i) if !field(i)?.is_empty() => Some(field(i)?.to_string()),
            _ => None,
        };
        out.push(GeoPoint {
            coord: Coord::new(u, v),
            weight,
            category,
        });
    }
    Ok(out)
}

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

fn geojson_features(doc: &Value) -> Vec<&Value> {
    match doc.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => doc
            .get("features")
            .and_then(Value::as_array)
            .map(|a| a.iter().collect())
            .unwrap_or_default(),
        Some("Feature") => vec![doc],
        _ => Vec::new(),
    }
}

fn position(path: &Path, v: &Value) -> Result<Coord> {
    let arr = v.as_array().filter(|a| a.len() >= 2);
    let (u, w) = arr
        .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
        .ok_or_else(|| Error::Data(format!("{}: invalid GeoJSON position {v}", path.display())))?;
    let c = Coord::new(u, w);
    if !c.is_finite() {
        return Err(Error::NonFinite(format!(
            "{}: position {v}",
            path.display()
        )));
    }
    Ok(c)
}

fn read_geojson_points(path: &Path) -> Result<Vec<GeoPoint>> {
    let doc = read_json(path)?;
    let mut out = Vec::new();
    for feature in geojson_features(&doc) {
        let geom = feature.get("geometry").unwrap_or(&Value::Null);
        let props = feature.get("properties");
        let weight = props.and_then(|p| p.get("weight")).and_then(Value::as_f64);
        let category = props.and_then(|p| p.get("category")).and_then(|c| {
            c.as_str()
                .map(str::to_string)
                .or_else(|| c.as_i64().map(|i| i.to_string()))
        });
        let coords = geom.get("coordinates").unwrap_or(&Value::Null);
        let points = match geom.get("type").and_then(Value::as_str) {
            Some("Point") => vec![position(path, coords)?],
            Some("MultiPoint") => coords
                .as_array()
                .map(|a| a.iter().map(|p| position(path, p)).collect::<Result<Vec<_>>>())
                .transpose()?
                .unwrap_or_default(),
            other => {
                return Err(Error::Data(format!(
                    "{}: unsupported layer geometry {other:?}; supply points (polygon layers as centroids with a weight)",
                    path.display()
                )))
            }
        };
        out.extend(points.into_iter().map(|coord| GeoPoint {
            coord,
            weight,
            category: category.clone(),
        }));
    }
    Ok(out)
}

fn ring(path: &Path, v: &Value) -> Result<Vec<Coord>> {
    let mut pts = v
        .as_array()
        .ok_or_else(|| Error::Data(format!("{}: polygon ring is not an array", path.display())))?
        .iter()
        .map(|p| position(path, p))
        .collect::<Result<Vec<_>>>()?;
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(Error::Data(format!(
            "{}: polygon ring has < 3 vertices",
            path.display()
        )));
    }
    Ok(pts)
}

fn polygon(path: &Path, v: &Value) -> Result<Polygon> {
    let rings = v
        .as_array()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| Error::Data(format!("{}: polygon has no rings", path.display())))?;
    Ok(Polygon {
        exterior: ring(path, &rings[0])?,
        holes: rings[1..]
            .iter()
            .map(|r| ring(path, r))
            .collect::<Result<_>>()?,
    })
}

/// Reads Polygon / MultiPolygon geometries (bare, Feature or FeatureCollection).
pub fn read_boundary(path: &Path) -> Result<Boundary> {
    let doc = read_json(path)?;
    let geometries: Vec<&Value> = match doc.get("type").and_then(Value::as_str) {
        Some("Polygon") | Some("MultiPolygon") => vec![&doc],
        _ => geojson_features(&doc)
            .into_iter()
            .filter_map(|f| f.get("geometry"))
            .collect(),
    };
    let mut polygons = Vec::new();
    for g in geometries {
        let coords = g.get("coordinates").unwrap_or(&Value::Null);
        match g.get("type").and_then(Value::as_str) {
            Some("Polygon") => polygons.push(polygon(path, coords)?),
            Some("MultiPolygon") => {
                for p in coords.as_array().into_iter().flatten() {
                    polygons.push(polygon(path, p)?);
                }
            }
            _ => {}
        }
    }
    if polygons.is_empty() {
        return Err(Error::Data(format!(
            "{}: no polygon geometry found",
            path.display()
        )));
    }
    Ok(Boundary { polygons })
}

pub fn write_boundary(path: &Path, boundary: &Boundary) -> Result<()> {
    let ring = |r: &[Coord]| -> Value {
        let mut pts: Vec<Value> = r.iter().map(|c| json!([c.u, c.v])).collect();
        if let Some(first) = pts.first().cloned() {
            pts.push(first);
        }
        Value::Array(pts)
    };
    let features: Vec<Value> = boundary
        .polygons
        .iter()
        .map(|p| {
            let mut rings = vec![ring(&p.exterior)];
            rings.extend(p.holes.iter().map(|h| ring(h)));
            json!({"type": "Feature", "properties": {}, "geometry": {"type": "Polygon", "coordinates": rings}})
        })
        .collect();
    write_json(
        path,
        &json!({"type": "FeatureCollection", "features": features}),
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json_as<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

/// One row per event: id, coordinate, binary label and feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub coords: Vec<Coord>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Data(format!("feature {n:?} not in feature table")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            ids: self.ids.clone(),
            coords: self.coords.clone(),
            labels: self.labels.clone(),
            feature_names: names.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
        })
    }

    pub fn samples(&self) -> Vec<LabeledSample> {
        self.rows
            .iter()
            .zip(&self.coords)
            .zip(&self.labels)
            .map(|((r, &c), &l)| LabeledSample::new(r.clone(), c, l))
            .collect()
    }

    /// CSV header `id,u,v,label,<features...>`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(create(path)?);
        let mut header = vec!["id".to_string(), "u".into(), "v".into(), "label".into()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.ids[i].clone(),
                self.coords[i].u.to_string(),
                self.coords[i].v.to_string(),
                self.labels[i].to_string(),
            ];
            rec.extend(self.rows[i].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<FeatureTable> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(open(path)?);
        let headers = reader.headers()?.clone();
        let expect = ["id", "u", "v", "label"];
        if headers.len() < 4 || headers.iter().zip(expect).any(|(h, e)| h != e) {
            return Err(malformed(path, 1, "header must start with id,u,v,label"));
        }
        let feature_names: Vec<String> = headers.iter().skip(4).map(str::to_string).collect();
        let mut table = FeatureTable {
            ids: Vec::new(),
            coords: Vec::new(),
            labels: Vec::new(),
            feature_names,
            rows: Vec::new(),
        };
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != headers.len() {
                return Err(malformed(
                    path,
                    line,
                    format!("expected {} fields, got {}", headers.len(), rec.len()),
                ));
            }
            let u = parse_f64(path, line, &rec[1], "u")?;
            let v = parse_f64(path, line, &rec[2], "v")?;
            let label = match &rec[3] {
                "0" => 0,
                "1" => 1,
                other => return Err(malformed(path, line, format!("label {other:?} is not 0/1"))),
            };
            let row = (4..rec.len())
                .map(|j| parse_f64(path, line, &rec[j], &headers[j]))
                .collect::<Result<Vec<_>>>()?;
            table.ids.push(rec[0].to_string());
            table.coords.push(Coord::new(u, v));
            table.labels.push(label);
            table.rows.push(row);
        }
        Ok(table)
    }
}

/// Column manifest written next to a feature table, or listing selected features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub schema_version: u32,
    pub features: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_radius_m: Option<f64>,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// GeoJSON FeatureCollection of cell points with a `risk` property (6 decimals).
pub fn write_grid_geojson(path: &Path, grid: &RiskGrid) -> Result<()> {
    let features: Vec<Value> = grid
        .cells
        .iter()
        .map(|c| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [c.coord.u, c.coord.v]},
                "properties": {"col": c.col, "row": c.row, "risk": c.risk.map(round6)},
            })
        })
        .collect();
    write_json(
        path,
        &json!({"type": "FeatureCollection", "features": features}),
    )
}

/// CSV `u,v,risk[,features...]`.
pub fn write_grid_csv(
    path: &Path,
    grid: &RiskGrid,
    feature_names: &[String],
    features: Option<&[Vec<f64>]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["u".to_string(), "v".into(), "risk".into()];
    if features.is_some() {
        header.extend(feature_names.iter().cloned());
    }
    w.write_record(&header)?;
    for (i, c) in grid.cells.iter().enumerate() {
        let mut rec = vec![
            c.coord.u.to_string(),
            c.coord.v.to_string(),
            c.risk.map_or_else(String::new, |r| format!("{r:.6}")),
        ];
        if let Some(f) = features {
            rec.extend(f[i].iter().map(f64::to_string));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Contents of a risk-grid CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub coords: Vec<Coord>,
    pub risks: Vec<f64>,
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_grid_csv(path: &Path) -> Result<GridTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "u" || &headers[1] != "v" || &headers[2] != "risk" {
        return Err(malformed(path, 1, "header must start with u,v,risk"));
    }
    let names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let (mut coords, mut risks, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        coords.push(Coord::new(
            parse_f64(path, line, &rec[0], "u")?,
            parse_f64(path, line, &rec[1], "v")?,
        ));
        risks.push(parse_f64(path, line, &rec[2], "risk")?);
        rows.push(
            (3..rec.len())
                .map(|j| parse_f64(path, line, &rec[j], &headers[j]))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(GridTable {
        coords,
        risks,
        feature_names: names,
        rows,
    })
}

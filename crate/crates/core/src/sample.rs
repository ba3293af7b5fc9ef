use serde::{Deserialize, Serialize};

/// Planar coordinate in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coord {
    pub u: f64,
    pub v: f64,
}

impl Coord {
    pub const fn new(u: f64, v: f64) -> Self {
        Coord { u, v }
    }

    pub fn dist_sq(&self, other: &Coord) -> f64 {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        du * du + dv * dv
    }

    pub fn dist(&self, other: &Coord) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

impl From<(f64, f64)> for Coord {
    fn from((u, v): (f64, f64)) -> Self {
        Coord { u, v }
    }
}

/// One geolocated observation: features, location and binary label
/// (0 = low severity, 1 = high severity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub coord: Coord,
    pub label: u8,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, coord: Coord, label: u8) -> Self {
        LabeledSample {
            features,
            coord,
            label,
        }
    }
}

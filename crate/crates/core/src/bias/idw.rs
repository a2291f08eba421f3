//! Inverse-distance-weighted interpolation of a gridded Weibull field.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::haversine_km;
use crate::model::WeibullParams;
use crate::stats::total_cmp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lon: f64,
    pub lat: f64,
    pub params: WeibullParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParamField {
    points: Vec<GridPoint>,
}

impl GridParamField {
    /// Rejects an empty field, duplicate coordinates and invalid parameters.
    pub fn new(points: Vec<GridPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty);
        }
        for p in &points {
            WeibullParams::new(p.params.shape, p.params.scale)?;
            if !(p.lat.abs() <= 90.0 && p.lon.abs() <= 180.0) {
                return Err(Error::InvalidCoordinates {
                    station: "grid".into(),
                    lat: p.lat,
                    lon: p.lon,
                });
            }
        }
        let mut keys: Vec<(u64, u64)> = points.iter().map(|p| (p.lat.to_bits(), p.lon.to_bits())).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate grid coordinates".into()));
        }
        Ok(GridParamField { points })
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bounding box (lat_min, lat_max, lon_min, lon_max).
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |b, p| (b.0.min(p.lat), b.1.max(p.lat), b.2.min(p.lon), b.3.max(p.lon)),
        )
    }
}

/// Weighted mean of the `k` nearest grid points' shape and scale, weights
/// ∝ distance^(−power). A grid point closer than 1 m is returned as is.
pub fn idw_interpolate(field: &GridParamField, lat: f64, lon: f64, power: f64, k: usize) -> WeibullParams {
    let mut d: Vec<(f64, usize)> = field
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (haversine_km(lat, lon, p.lat, p.lon), i))
        .collect();
    let k = k.clamp(1, d.len());
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, |a, b| total_cmp(&a.0, &b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
    }
    d.sort_by(|a, b| total_cmp(&a.0, &b.0).then(a.1.cmp(&b.1)));
    if d[0].0 < 1e-3 {
        return field.points[d[0].1].params;
    }
    let (mut ws, mut sk, mut sl) = (0.0, 0.0, 0.0);
    for &(dist, i) in &d {
        let w = dist.powf(-power);
        ws += w;
        sk += w * field.points[i].params.shape;
        sl += w * field.points[i].params.scale;
    }
    WeibullParams {
        shape: sk / ws,
        scale: sl / ws,
    }
}

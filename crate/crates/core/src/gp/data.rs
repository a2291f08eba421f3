//! Observations on the model scale plus the fixed-effect design.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::hyper::ModelSpec;
use crate::model::{hour_of_day, Dataset, StationClass, Timestamp, HOUR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub class: StationClass,
    /// Covariate X₁ (mean of √W under the calibrated Weibull).
    pub x1: Option<f64>,
}

/// `y[s][t]` is site `s` at hour `t0 + t`, already on the model scale
/// (square root of wind speed for real data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpData {
    pub sites: Vec<Site>,
    pub t0: Timestamp,
    pub n_times: usize,
    pub y: Vec<Vec<Option<f64>>>,
}

impl GpData {
    /// Square-root transform of a validated wind dataset. `x1` (one value
    /// per station) is optional.
    pub fn from_wind(ds: &Dataset, x1: Option<&[f64]>) -> Result<GpData> {
        if let Some(x) = x1 {
            if x.len() != ds.n_sites() {
                return Err(Error::LengthMismatch(x.len(), ds.n_sites()));
            }
        }
        let sites = ds
            .stations
            .iter()
            .enumerate()
            .map(|(i, s)| Site {
                id: s.id.clone(),
                lat: s.lat,
                lon: s.lon,
                class: s.class,
                x1: x1.map(|x| x[i]),
            })
            .collect();
        let y = ds
            .values
            .iter()
            .map(|row| row.iter().map(|v| v.map(f64::sqrt)).collect())
            .collect();
        Ok(GpData {
            sites,
            t0: ds.t0,
            n_times: ds.n_times,
            y,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_obs(&self) -> usize {
        self.y.iter().flatten().filter(|v| v.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.y.iter().flatten().all(|v| v.is_some())
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.sites.iter().map(|s| (s.lat, s.lon)).collect()
    }

    pub fn timestamp(&self, t: usize) -> Timestamp {
        self.t0 + t as i64 * HOUR
    }

    /// Zero-based diurnal slot of time index `t`.
    pub fn hour_slot(&self, t: usize) -> usize {
        hour_of_day(self.timestamp(t)).map(|h| h.slot()).unwrap_or(23)
    }

    pub fn classes(&self) -> Vec<StationClass> {
        let mut c: Vec<StationClass> = self.sites.iter().map(|s| s.class).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn filter_sites<F: FnMut(usize, &Site) -> bool>(&self, mut keep: F) -> GpData {
        let mut sites = Vec::new();
        let mut y = Vec::new();
        for (i, s) in self.sites.iter().enumerate() {
            if keep(i, s) {
                sites.push(s.clone());
                y.push(self.y[i].clone());
            }
        }
        GpData {
            sites,
            t0: self.t0,
            n_times: self.n_times,
            y,
        }
    }

    pub fn without_site(&self, idx: usize) -> GpData {
        self.filter_sites(|i, _| i != idx)
    }

    pub fn site_index(&self, id: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.id == id)
    }

    /// Observation mask in time-major order (`t * n + s`).
    pub fn mask(&self) -> Vec<bool> {
        let n = self.n_sites();
        let mut m = vec![false; n * self.n_times];
        for s in 0..n {
            for t in 0..self.n_times {
                m[t * n + s] = self.y[s][t].is_some();
            }
        }
        m
    }

    /// Observations in time-major order, zero where missing.
    pub fn y_column(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut v = vec![0.0; n * self.n_times];
        for s in 0..n {
            for t in 0..self.n_times {
                v[t * n + s] = self.y[s][t].unwrap_or(0.0);
            }
        }
        v
    }
}

pub const DIURNAL_DIM: usize = 23;

/// Sum-to-zero basis B (24 × 23): d = B·a, with d₂₄ = −Σ aⱼ.
pub fn diurnal_basis() -> DMatrix<f64> {
    let mut b = DMatrix::zeros(24, DIURNAL_DIM);
    for j in 0..DIURNAL_DIM {
        b[(j, j)] = 1.0;
        b[(23, j)] = -1.0;
    }
    b
}

/// Cyclic first-order random-walk structure matrix (24 × 24, unit scale).
pub fn rw1_cyclic_structure() -> DMatrix<f64> {
    let mut q = DMatrix::zeros(24, 24);
    for t in 0..24 {
        let p = (t + 23) % 24;
        q[(t, t)] += 1.0;
        q[(p, p)] += 1.0;
        q[(t, p)] -= 1.0;
        q[(p, t)] -= 1.0;
    }
    q
}

/// Bᵀ Q B at unit σ_d: the diurnal prior precision is this divided by σ²_d.
pub fn diurnal_precision_unit() -> DMatrix<f64> {
    let b = diurnal_basis();
    b.transpose() * rw1_cyclic_structure() * b
}

/// Fixed-effect design columns in time-major order: intercept, then X₁
/// (if requested), then the 23 diurnal basis columns (if requested).
pub fn design_columns(data: &GpData, spec: &ModelSpec) -> Result<Vec<Vec<f64>>> {
    let n = data.n_sites();
    let nt = data.n_times;
    let mut cols = vec![vec![1.0; n * nt]];
    if spec.covariate {
        let mut x = vec![0.0; n * nt];
        for (s, site) in data.sites.iter().enumerate() {
            let v = site.x1.ok_or_else(|| Error::MissingCovariate(site.id.clone()))?;
            for t in 0..nt {
                x[t * n + s] = v;
            }
        }
        cols.push(x);
    }
    if spec.diurnal {
        let b = diurnal_basis();
        for j in 0..DIURNAL_DIM {
            let mut x = vec![0.0; n * nt];
            for t in 0..nt {
                let v = b[(data.hour_slot(t), j)];
                if v != 0.0 {
                    for s in 0..n {
                        x[t * n + s] = v;
                    }
                }
            }
            cols.push(x);
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diurnal_structure() {
        let q = rw1_cyclic_structure();
        for t in 0..24 {
            assert_eq!(q[(t, t)], 2.0);
            assert_eq!(q.row(t).sum(), 0.0);
        }
        let p = diurnal_precision_unit();
        assert!(p.clone().cholesky().is_some(), "sum-to-zero precision is PD");
        let d = diurnal_basis() * nalgebra::DVector::from_element(DIURNAL_DIM, 0.3);
        assert!(d.sum().abs() < 1e-15);
    }
}

//! Linear algebra for the observation covariance
//! Σ = R ⊗ C + I ⊗ D restricted to the observed (site, time) entries,
//! where C is the spatial Matérn matrix, D the per-site nugget variances and
//! R the AR(1) correlation ρ^|t−t′| (the identity for independent replicates).
//!
//! Four interchangeable implementations:
//!
//! * `Dense`: one Cholesky of the full matrix. Reference implementation.
//! * `Spectral`: complete data only. Whitens by D^{-1/2}, diagonalises
//!   D^{-1/2} C D^{-1/2} once, and reduces each spectral component to a
//!   tridiagonal problem in time.
//! * `Slice`: independent replicates with missing data; one Cholesky per
//!   distinct missingness pattern.
//! * `Kalman`: AR(1) with missing data; filter (likelihood) and RTS
//!   smoother (prediction) over the n-site state.
//!
//! Column vectors are stored time-major: entry `t * n + s`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::matern::covariance_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Backend {
    /// Spectral for complete data, otherwise Slice (IGP) or Kalman (AR1).
    #[default]
    Auto,
    Dense,
    Spectral,
    Slice,
    Kalman,
}

/// Covariance parameters in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct CovParams {
    pub phi: f64,
    pub sigma_z: f64,
    /// Nugget variance per site.
    pub dvar: Vec<f64>,
    /// AR(1) coefficient; 0 for independent replicates.
    pub rho: f64,
}

/// Shape of the observation set.
#[derive(Debug, Clone, Copy)]
pub struct Geometry<'a> {
    pub dist: &'a DMatrix<f64>,
    pub n: usize,
    pub nt: usize,
    pub mask: &'a [bool],
    pub complete: bool,
    pub ar1: bool,
}

/// Prediction request: cross-covariance of the target's latent value with
/// each data site (same time), and the time indices wanted.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigeTarget {
    pub cstar: Vec<f64>,
    pub times: Vec<usize>,
}

/// Conditional mean offset (added to the fixed-effect mean) and latent
/// conditional variance for one (target, time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kriged {
    pub mean_adj: f64,
    pub latent_var: f64,
}

pub fn resolve(backend: Backend, geo: &Geometry<'_>) -> Result<Backend> {
    match backend {
        Backend::Auto => Ok(if geo.complete {
            Backend::Spectral
        } else if geo.ar1 {
            Backend::Kalman
        } else {
            Backend::Slice
        }),
        Backend::Spectral if !geo.complete => Err(Error::InvalidConfig(
            "spectral backend requires complete data".into(),
        )),
        Backend::Slice if geo.ar1 => Err(Error::InvalidConfig(
            "slice backend only handles independent replicates".into(),
        )),
        b => Ok(b),
    }
}

/// log|Σ| and the Gram matrix XᵀΣ⁻¹X of the given columns.
pub fn whiten(
    backend: Backend,
    cp: &CovParams,
    geo: &Geometry<'_>,
    cols: &[&[f64]],
) -> Result<(f64, DMatrix<f64>)> {
    match resolve(backend, geo)? {
        Backend::Dense => dense_whiten(cp, geo, cols),
        Backend::Spectral => Spectral::new(cp, geo)?.whiten(cp, geo, cols),
        Backend::Slice => slice_whiten(cp, geo, cols),
        Backend::Kalman => kalman_whiten(cp, geo, cols),
        Backend::Auto => unreachable!("resolved above"),
    }
}

/// Conditional mean offsets and latent variances at the targets given the
/// residual column.
pub fn krige(
    backend: Backend,
    cp: &CovParams,
    geo: &Geometry<'_>,
    resid: &[f64],
    targets: &[KrigeTarget],
) -> Result<Vec<Vec<Kriged>>> {
    match resolve(backend, geo)? {
        Backend::Dense => dense_krige(cp, geo, resid, targets),
        Backend::Spectral => Spectral::new(cp, geo)?.krige(cp, geo, resid, targets),
        Backend::Slice => slice_krige(cp, geo, resid, targets),
        Backend::Kalman => kalman_krige(cp, geo, resid, targets),
        Backend::Auto => unreachable!("resolved above"),
    }
}

fn cholesky(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or(Error::NotPositiveDefinite)
}

fn log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    let l = ch.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

fn time_corr(rho: f64, a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        rho.powi(a.abs_diff(b) as i32)
    }
}

// ---------------------------------------------------------------- dense

fn observed(geo: &Geometry<'_>) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for t in 0..geo.nt {
        for s in 0..geo.n {
            if geo.mask[t * geo.n + s] {
                v.push((t, s));
            }
        }
    }
    v
}

/// The full observed covariance matrix, in time-major observation order.
pub fn dense_covariance(cp: &CovParams, geo: &Geometry<'_>) -> DMatrix<f64> {
    let c = covariance_matrix(geo.dist, cp.phi, cp.sigma_z);
    let obs = observed(geo);
    let m = obs.len();
    DMatrix::from_fn(m, m, |i, j| {
        let (ti, si) = obs[i];
        let (tj, sj) = obs[j];
        let mut v = time_corr(cp.rho, ti, tj) * c[(si, sj)];
        if i == j {
            v += cp.dvar[si];
        }
        v
    })
}

fn dense_whiten(cp: &CovParams, geo: &Geometry<'_>, cols: &[&[f64]]) -> Result<(f64, DMatrix<f64>)> {
    let obs = observed(geo);
    let ch = cholesky(dense_covariance(cp, geo))?;
    let x = DMatrix::from_fn(obs.len(), cols.len(), |i, b| cols[b][obs[i].0 * geo.n + obs[i].1]);
    let w = ch
        .l_dirty()
        .lower_triangle()
        .solve_lower_triangular(&x)
        .ok_or(Error::NotPositiveDefinite)?;
    Ok((log_det(&ch), w.tr_mul(&w)))
}

fn dense_krige(
    cp: &CovParams,
    geo: &Geometry<'_>,
    resid: &[f64],
    targets: &[KrigeTarget],
) -> Result<Vec<Vec<Kriged>>> {
    let obs = observed(geo);
    let ch = cholesky(dense_covariance(cp, geo))?;
    let r = DVector::from_iterator(obs.len(), obs.iter().map(|&(t, s)| resid[t * geo.n + s]));
    let alpha = ch.solve(&r);
    let s2 = cp.sigma_z * cp.sigma_z;
    let mut out = Vec::with_capacity(targets.len());
    for tg in targets {
        let mut row = Vec::with_capacity(tg.times.len());
        for &t in &tg.times {
            let k = DVector::from_iterator(
                obs.len(),
                obs.iter().map(|&(ti, si)| time_corr(cp.rho, t, ti) * tg.cstar[si]),
            );
            let red = k.dot(&ch.solve(&k));
            row.push(Kriged {
                mean_adj: k.dot(&alpha),
                latent_var: (s2 - red).max(0.0),
            });
        }
        out.push(row);
    }
    Ok(out)
}

// ------------------------------------------------------------- spectral

/// Symmetric tridiagonal matrix with constant off-diagonal, factored as
/// L D Lᵀ.
struct Tridiag {
    diag: Vec<f64>,
    off: f64,
    piv: Vec<f64>,
}

impl Tridiag {
    fn new(diag: Vec<f64>, off: f64) -> Result<Tridiag> {
        let mut piv = Vec::with_capacity(diag.len());
        for (t, &a) in diag.iter().enumerate() {
            let p = if t == 0 { a } else { a - off * off / piv[t - 1] };
            if !(p > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            piv.push(p);
        }
        Ok(Tridiag { diag, off, piv })
    }

    fn log_det(&self) -> f64 {
        self.piv.iter().map(|p| p.ln()).sum()
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        let mut prev = 0.0;
        for t in 0..n {
            let z = if t == 0 { rhs[0] } else { rhs[t] - self.off / self.piv[t - 1] * prev };
            out[t] = z;
            prev = z;
        }
        out[n - 1] /= self.piv[n - 1];
        for t in (0..n - 1).rev() {
            out[t] = (out[t] - self.off * out[t + 1]) / self.piv[t];
        }
    }

    /// Diagonal of the inverse from forward and backward pivots.
    fn inverse_diag(&self) -> Vec<f64> {
        let n = self.diag.len();
        let mut back = vec![0.0; n];
        for t in (0..n).rev() {
            back[t] = if t == n - 1 {
                self.diag[t]
            } else {
                self.diag[t] - self.off * self.off / back[t + 1]
            };
        }
        (0..n).map(|t| 1.0 / (self.piv[t] + back[t] - self.diag[t])).collect()
    }
}

/// R⁻¹ for an AR(1) correlation over `nt` steps: diagonal and off-diagonal.
fn ar1_precision(rho: f64, nt: usize) -> (Vec<f64>, f64) {
    if nt == 1 {
        return (vec![1.0], 0.0);
    }
    let s = 1.0 / (1.0 - rho * rho);
    let mut d = vec![(1.0 + rho * rho) * s; nt];
    d[0] = s;
    d[nt - 1] = s;
    (d, -rho * s)
}

fn tridiag_mul(diag: &[f64], off: f64, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for t in 0..n {
        let mut v = diag[t] * x[t];
        if t > 0 {
            v += off * x[t - 1];
        }
        if t + 1 < n {
            v += off * x[t + 1];
        }
        out[t] = v;
    }
}

struct Spectral {
    lambda: Vec<f64>,
    /// Q = Uᵀ D^{-1/2}
    q: DMatrix<f64>,
    logdet_d: f64,
}

impl Spectral {
    fn new(cp: &CovParams, geo: &Geometry<'_>) -> Result<Spectral> {
        let n = geo.n;
        let c = covariance_matrix(geo.dist, cp.phi, cp.sigma_z);
        let dis: Vec<f64> = cp.dvar.iter().map(|v| 1.0 / v.sqrt()).collect();
        let s = DMatrix::from_fn(n, n, |i, j| dis[i] * c[(i, j)] * dis[j]);
        let eig = s.symmetric_eigen();
        let lambda: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let u = eig.eigenvectors;
        let q = DMatrix::from_fn(n, n, |i, s| u[(s, i)] * dis[s]);
        let logdet_d = cp.dvar.iter().map(|v| v.ln()).sum();
        if !lambda.iter().all(|l| l.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Spectral { lambda, q, logdet_d })
    }

    fn transform(&self, geo: &Geometry<'_>, col: &[f64]) -> DMatrix<f64> {
        &self.q * DMatrix::from_column_slice(geo.n, geo.nt, col)
    }

    fn whiten(&self, cp: &CovParams, geo: &Geometry<'_>, cols: &[&[f64]]) -> Result<(f64, DMatrix<f64>)> {
        let (n, nt, k) = (geo.n, geo.nt, cols.len());
        let xt: Vec<DMatrix<f64>> = cols.iter().map(|c| self.transform(geo, c)).collect();
        let mut gram = DMatrix::zeros(k, k);
        let mut logdet = nt as f64 * self.logdet_d;
        if !geo.ar1 || cp.rho == 0.0 {
            for i in 0..n {
                let w = 1.0 / (1.0 + self.lambda[i]);
                logdet += nt as f64 * (1.0 + self.lambda[i]).ln();
                for a in 0..k {
                    for b in a..k {
                        let mut acc = 0.0;
                        for t in 0..nt {
                            acc += xt[a][(i, t)] * xt[b][(i, t)];
                        }
                        gram[(a, b)] += w * acc;
                    }
                }
            }
        } else {
            let (rd, ro) = ar1_precision(cp.rho, nt);
            let log_r = (nt as f64 - 1.0) * (1.0 - cp.rho * cp.rho).ln();
            let mut rows: Vec<Vec<f64>> = vec![vec![0.0; nt]; k];
            let mut tmp = vec![0.0; nt];
            let mut z = vec![0.0; nt];
            for i in 0..n {
                let a_diag: Vec<f64> = rd.iter().map(|d| d + self.lambda[i]).collect();
                let tri = Tridiag::new(a_diag, ro)?;
                logdet += tri.log_det() + log_r;
                for (b, row) in rows.iter_mut().enumerate() {
                    for t in 0..nt {
                        row[t] = xt[b][(i, t)];
                    }
                }
                for b in 0..k {
                    tridiag_mul(&rd, ro, &rows[b], &mut tmp);
                    tri.solve(&tmp, &mut z);
                    for a in 0..=b {
                        gram[(a, b)] += rows[a].iter().zip(&z).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        Ok((logdet, gram))
    }

    fn krige(
        &self,
        cp: &CovParams,
        geo: &Geometry<'_>,
        resid: &[f64],
        targets: &[KrigeTarget],
    ) -> Result<Vec<Vec<Kriged>>> {
        let (n, nt) = (geo.n, geo.nt);
        let rt = self.transform(geo, resid);
        // u_i = (component system)⁻¹ applied to the residual, q_i(t) the
        // variance-reduction weight of component i at time t
        let mut u = DMatrix::zeros(n, nt);
        let mut q = DMatrix::zeros(n, nt);
        if !geo.ar1 || cp.rho == 0.0 {
            for i in 0..n {
                let w = 1.0 / (1.0 + self.lambda[i]);
                for t in 0..nt {
                    u[(i, t)] = rt[(i, t)] * w;
                    q[(i, t)] = w;
                }
            }
        } else {
            let (rd, ro) = ar1_precision(cp.rho, nt);
            let mut row = vec![0.0; nt];
            let mut sol = vec![0.0; nt];
            for i in 0..n {
                let lam = self.lambda[i];
                let tri = Tridiag::new(rd.iter().map(|d| d + lam).collect(), ro)?;
                for t in 0..nt {
                    row[t] = rt[(i, t)];
                }
                tri.solve(&row, &mut sol);
                for t in 0..nt {
                    u[(i, t)] = sol[t];
                }
                if lam >= 1e-4 {
                    let dinv = tri.inverse_diag();
                    for t in 0..nt {
                        q[(i, t)] = (1.0 - dinv[t]) / lam;
                    }
                } else {
                    // [A⁻¹R]_tt directly, avoiding cancellation for tiny λ
                    for t in 0..nt {
                        for (tt, r) in row.iter_mut().enumerate() {
                            *r = time_corr(cp.rho, t, tt);
                        }
                        tri.solve(&row, &mut sol);
                        q[(i, t)] = sol[t];
                    }
                }
            }
        }
        let s2 = cp.sigma_z * cp.sigma_z;
        let mut out = Vec::with_capacity(targets.len());
        for tg in targets {
            let g = &self.q * DVector::from_column_slice(&tg.cstar);
            let row = tg
                .times
                .iter()
                .map(|&t| {
                    let (mut adj, mut red) = (0.0, 0.0);
                    for i in 0..n {
                        adj += g[i] * u[(i, t)];
                        red += g[i] * g[i] * q[(i, t)];
                    }
                    Kriged {
                        mean_adj: adj,
                        latent_var: (s2 - red).max(0.0),
                    }
                })
                .collect();
            out.push(row);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------- slice

fn patterns(geo: &Geometry<'_>) -> BTreeMap<Vec<bool>, Vec<usize>> {
    let mut map: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for t in 0..geo.nt {
        let key = geo.mask[t * geo.n..(t + 1) * geo.n].to_vec();
        map.entry(key).or_default().push(t);
    }
    map
}

fn slice_factor(cp: &CovParams, c: &DMatrix<f64>, idx: &[usize]) -> Result<Cholesky<f64, Dyn>> {
    let m = idx.len();
    let mut s = DMatrix::from_fn(m, m, |a, b| c[(idx[a], idx[b])]);
    for a in 0..m {
        s[(a, a)] += cp.dvar[idx[a]];
    }
    cholesky(s)
}

fn slice_whiten(cp: &CovParams, geo: &Geometry<'_>, cols: &[&[f64]]) -> Result<(f64, DMatrix<f64>)> {
    let c = covariance_matrix(geo.dist, cp.phi, cp.sigma_z);
    let k = cols.len();
    let mut gram = DMatrix::zeros(k, k);
    let mut logdet = 0.0;
    for (pat, times) in patterns(geo) {
        let idx: Vec<usize> = (0..geo.n).filter(|&s| pat[s]).collect();
        if idx.is_empty() {
            continue;
        }
        let ch = slice_factor(cp, &c, &idx)?;
        logdet += times.len() as f64 * log_det(&ch);
        let l = ch.l_dirty().lower_triangle();
        let w: Vec<DMatrix<f64>> = cols
            .iter()
            .map(|col| {
                let x = DMatrix::from_fn(idx.len(), times.len(), |a, j| col[times[j] * geo.n + idx[a]]);
                l.solve_lower_triangular(&x).ok_or(Error::NotPositiveDefinite)
            })
            .collect::<Result<_>>()?;
        for a in 0..k {
            for b in a..k {
                let v = w[a].dot(&w[b]);
                gram[(a, b)] += v;
                if a != b {
                    gram[(b, a)] += v;
                }
            }
        }
    }
    Ok((logdet, gram))
}

fn slice_krige(
    cp: &CovParams,
    geo: &Geometry<'_>,
    resid: &[f64],
    targets: &[KrigeTarget],
) -> Result<Vec<Vec<Kriged>>> {
    let c = covariance_matrix(geo.dist, cp.phi, cp.sigma_z);
    let s2 = cp.sigma_z * cp.sigma_z;
    let mut slot = vec![0usize; geo.nt];
    let mut facs = Vec::new();
    for (p, (pat, times)) in patterns(geo).into_iter().enumerate() {
        let idx: Vec<usize> = (0..geo.n).filter(|&s| pat[s]).collect();
        let ch = if idx.is_empty() { None } else { Some(slice_factor(cp, &c, &idx)?) };
        for &t in &times {
            slot[t] = p;
        }
        facs.push((idx, ch));
    }
    let mut out = Vec::with_capacity(targets.len());
    for tg in targets {
        // Σ⁻¹ c* per pattern, computed lazily
        let mut cache: BTreeMap<usize, (DVector<f64>, f64)> = BTreeMap::new();
        let mut row = Vec::with_capacity(tg.times.len());
        for &t in &tg.times {
            let p = slot[t];
            let (idx, ch) = &facs[p];
            let Some(ch) = ch else {
                row.push(Kriged {
                    mean_adj: 0.0,
                    latent_var: s2,
                });
                continue;
            };
            let (w, red) = cache.entry(p).or_insert_with(|| {
                let cs = DVector::from_iterator(idx.len(), idx.iter().map(|&s| tg.cstar[s]));
                let w = ch.solve(&cs);
                let red = w.dot(&cs);
                (w, red)
            });
            let adj: f64 = idx.iter().zip(w.iter()).map(|(&s, wi)| wi * resid[t * geo.n + s]).sum();
            row.push(Kriged {
                mean_adj: adj,
                latent_var: (s2 - *red).max(0.0),
            });
        }
        out.push(row);
    }
    Ok(out)
}

// --------------------------------------------------------------- kalman

struct FilterStep {
    m: DMatrix<f64>,
    p: DMatrix<f64>,
}

/// Runs the filter over all columns at once. Returns log|Σ|, the Gram
/// matrix of innovations and (optionally) every filtered state.
fn kalman_filter(
    cp: &CovParams,
    geo: &Geometry<'_>,
    c: &DMatrix<f64>,
    cols: &[&[f64]],
    keep: bool,
) -> Result<(f64, DMatrix<f64>, Vec<FilterStep>)> {
    let (n, k) = (geo.n, cols.len());
    let rho = cp.rho;
    let mut m_pred = DMatrix::zeros(n, k);
    let mut p_pred = c.clone();
    let mut gram = DMatrix::zeros(k, k);
    let mut logdet = 0.0;
    let mut steps = Vec::new();
    for t in 0..geo.nt {
        let obs: Vec<usize> = (0..n).filter(|&s| geo.mask[t * n + s]).collect();
        let (m_f, p_f) = if obs.is_empty() {
            (m_pred, p_pred)
        } else {
            let no = obs.len();
            let mut s_mat = DMatrix::from_fn(no, no, |a, b| p_pred[(obs[a], obs[b])]);
            for a in 0..no {
                s_mat[(a, a)] += cp.dvar[obs[a]];
            }
            let ch = cholesky(s_mat)?;
            let e = DMatrix::from_fn(no, k, |a, b| cols[b][t * n + obs[a]] - m_pred[(obs[a], b)]);
            let w = ch
                .l_dirty()
                .lower_triangle()
                .solve_lower_triangular(&e)
                .ok_or(Error::NotPositiveDefinite)?;
            gram += w.tr_mul(&w);
            logdet += log_det(&ch);
            let p_on = DMatrix::from_fn(no, n, |a, j| p_pred[(obs[a], j)]);
            let kt = ch.solve(&p_on); // S⁻¹ P[O,:]
            let m_f = m_pred + kt.tr_mul(&e);
            let mut p_f = p_pred - p_on.tr_mul(&kt);
            p_f = (&p_f + p_f.transpose()) * 0.5;
            (m_f, p_f)
        };
        m_pred = &m_f * rho;
        p_pred = &p_f * (rho * rho) + c * (1.0 - rho * rho);
        if keep {
            steps.push(FilterStep { m: m_f, p: p_f });
        }
    }
    Ok((logdet, gram, steps))
}

fn kalman_whiten(cp: &CovParams, geo: &Geometry<'_>, cols: &[&[f64]]) -> Result<(f64, DMatrix<f64>)> {
    let c = covariance_matrix(geo.dist, cp.phi, cp.sigma_z);
    let (ld, gram, _) = kalman_filter(cp, geo, &c, cols, false)?;
    Ok((ld, gram))
}

fn kalman_krige(
    cp: &CovParams,
    geo: &Geometry<'_>,
    resid: &[f64],
    targets: &[KrigeTarget],
) -> Result<Vec<Vec<Kriged>>> {
    let c = covariance_matrix(geo.dist, cp.phi, cp.sigma_z);
    let (_, _, steps) = kalman_filter(cp, geo, &c, &[resid], true)?;
    let nt = geo.nt;
    let rho = cp.rho;
    let mut wanted = vec![false; nt];
    for tg in targets {
        for &t in &tg.times {
            wanted[t] = true;
        }
    }
    // RTS smoother, keeping smoothed states at the wanted times
    let mut m_s: Vec<DVector<f64>> = vec![DVector::zeros(0); nt];
    let mut p_s: Vec<Option<DMatrix<f64>>> = vec![None; nt];
    let mut m_next = steps[nt - 1].m.column(0).into_owned();
    let mut p_next = steps[nt - 1].p.clone();
    m_s[nt - 1] = m_next.clone();
    if wanted[nt - 1] {
        p_s[nt - 1] = Some(p_next.clone());
    }
    for t in (0..nt.saturating_sub(1)).rev() {
        let st = &steps[t];
        let p_pred = &st.p * (rho * rho) + &c * (1.0 - rho * rho);
        let ch = cholesky(p_pred.clone())?;
        // J = ρ P_f P_pred⁻¹ = (ρ P_pred⁻¹ P_f)ᵀ
        let j = ch.solve(&st.p).transpose() * rho;
        let mf = st.m.column(0).into_owned();
        let m = &mf + &j * (&m_next - &mf * rho);
        let p = &st.p + &j * (&p_next - &p_pred) * j.transpose();
        let p = (&p + p.transpose()) * 0.5;
        if wanted[t] {
            p_s[t] = Some(p.clone());
        }
        m_s[t] = m.clone();
        m_next = m;
        p_next = p;
    }
    let cch = cholesky(c.clone())?;
    let s2 = cp.sigma_z * cp.sigma_z;
    let mut out = Vec::with_capacity(targets.len());
    for tg in targets {
        let cs = DVector::from_column_slice(&tg.cstar);
        let w = cch.solve(&cs);
        let base = s2 - cs.dot(&w);
        let row = tg
            .times
            .iter()
            .map(|&t| {
                let p = p_s[t].as_ref().expect("smoothed covariance kept for wanted time");
                Kriged {
                    mean_adj: w.dot(&m_s[t]),
                    latent_var: (base.max(0.0) + w.dot(&(p * &w))).max(0.0),
                }
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::matern::distance_matrix;
    use approx::assert_relative_eq;

    fn setup(missing: &[(usize, usize)], nt: usize, ar1: bool) -> (DMatrix<f64>, Vec<bool>, CovParams) {
        let pts = [(53.0, -8.0), (53.4, -7.6), (52.7, -8.5), (53.1, -9.0)];
        let n = pts.len();
        let dist = distance_matrix(&pts);
        let mut mask = vec![true; n * nt];
        for &(t, s) in missing {
            mask[t * n + s] = false;
        }
        let cp = CovParams {
            phi: 120.0,
            sigma_z: 0.8,
            dvar: vec![0.04, 0.25, 0.09, 0.5],
            rho: if ar1 { 0.7 } else { 0.0 },
        };
        (dist, mask, cp)
    }

    fn cols(n: usize, nt: usize) -> Vec<Vec<f64>> {
        vec![
            vec![1.0; n * nt],
            (0..n * nt).map(|i| ((i * 7 % 11) as f64 * 0.37).sin()).collect(),
        ]
    }

    #[test]
    fn backends_agree_with_dense() {
        let nt = 5;
        for ar1 in [false, true] {
            for missing in [vec![], vec![(0, 1), (2, 0), (2, 3), (4, 2)]] {
                let (dist, mask, cp) = setup(&missing, nt, ar1);
                let geo = Geometry {
                    dist: &dist,
                    n: 4,
                    nt,
                    mask: &mask,
                    complete: missing.is_empty(),
                    ar1,
                };
                let cs = cols(4, nt);
                let refs: Vec<&[f64]> = cs.iter().map(|c| c.as_slice()).collect();
                let (ld0, g0) = whiten(Backend::Dense, &cp, &geo, &refs).unwrap();
                let (ld1, g1) = whiten(Backend::Auto, &cp, &geo, &refs).unwrap();
                assert_relative_eq!(ld0, ld1, max_relative = 1e-10);
                assert!((g0 - g1).abs().max() < 1e-9);
                let targets = vec![KrigeTarget {
                    cstar: vec![0.3, 0.1, 0.2, 0.05],
                    times: (0..nt).collect(),
                }];
                let k0 = krige(Backend::Dense, &cp, &geo, &cs[1], &targets).unwrap();
                let k1 = krige(Backend::Auto, &cp, &geo, &cs[1], &targets).unwrap();
                for (a, b) in k0[0].iter().zip(&k1[0]) {
                    assert!((a.mean_adj - b.mean_adj).abs() < 1e-10, "{a:?} {b:?}");
                    assert!((a.latent_var - b.latent_var).abs() < 1e-10, "{a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn tridiagonal_inverse_diagonal() {
        let tri = Tridiag::new(vec![2.0, 3.0, 2.5, 4.0], -0.7).unwrap();
        let m = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                tri.diag[i]
            } else if i.abs_diff(j) == 1 {
                -0.7
            } else {
                0.0
            }
        });
        let inv = m.try_inverse().unwrap();
        for (t, v) in tri.inverse_diag().iter().enumerate() {
            assert_relative_eq!(*v, inv[(t, t)], max_relative = 1e-13);
        }
    }
}

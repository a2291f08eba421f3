//! Box-constrained quasi-Newton minimisation with finite-difference
//! gradients, plus small 1-D helpers.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsConfig {
    /// Stop once the projected gradient norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Central-difference step in the optimisation coordinates.
    pub fd_step: f64,
    /// Largest move of any coordinate in one line-search trial.
    pub max_step: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        BfgsConfig {
            grad_tol: 1e-5,
            max_iter: 500,
            fd_step: 1e-5,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Final BFGS inverse-Hessian approximation (useful as a warm start).
    pub inv_hessian: DMatrix<f64>,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Central differences, falling back to one-sided near a bound.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    h: f64,
    lo: &[f64],
    hi: &[f64],
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xt = x.to_vec();
    for i in 0..x.len() {
        let up = x[i] + h <= hi[i];
        let down = x[i] - h >= lo[i];
        g[i] = if up && down {
            xt[i] = x[i] + h;
            let fp = f(&xt);
            xt[i] = x[i] - h;
            let fm = f(&xt);
            (fp - fm) / (2.0 * h)
        } else if up {
            xt[i] = x[i] + h;
            (f(&xt) - fx) / h
        } else {
            xt[i] = x[i] - h;
            (fx - f(&xt)) / h
        };
        xt[i] = x[i];
    }
    g
}

fn projected_grad(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            if (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0) {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimise `f` over the box `[lo, hi]` by projected BFGS.
///
/// Non-finite objective values are treated as +∞, so the caller can signal
/// failed evaluations (e.g. a non-positive-definite covariance) with NaN.
/// `h0` warm-starts the inverse Hessian.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    cfg: &BfgsConfig,
    h0: Option<&DMatrix<f64>>,
) -> Result<Minimum> {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut fx = eval(&x);
    if !fx.is_finite() {
        return Err(Error::NotConverged {
            iterations: 0,
            grad_norm: f64::NAN,
            best: fx,
        });
    }
    let mut g = fd_gradient(&mut eval, &x, fx, cfg.fd_step, lo, hi);
    let mut pg = projected_grad(&x, &g, lo, hi);
    let mut gnorm = norm(&pg);
    let fresh = |gn: f64| DMatrix::<f64>::identity(n, n) * (1.0 / gn.max(1.0));
    let mut h = match h0 {
        Some(m) if m.nrows() == n => m.clone(),
        _ => fresh(gnorm),
    };
    let mut just_reset = h0.is_none();
    let mut iter = 0;
    while gnorm > cfg.grad_tol && iter < cfg.max_iter {
        iter += 1;
        let gv = DVector::from_column_slice(&pg);
        let mut d: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        // freeze coordinates held at an active bound
        for i in 0..n {
            if pg[i] == 0.0 {
                d[i] = 0.0;
            }
        }
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            h = fresh(gnorm);
            d = pg.iter().map(|v| -v / gnorm.max(1.0)).collect();
            just_reset = true;
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut alpha = if dmax > cfg.max_step { cfg.max_step / dmax } else { 1.0 };
        let mut accepted = None;
        for _ in 0..50 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            project(&mut xn, lo, hi);
            let fxn = eval(&xn);
            let decrease: f64 = xn.iter().zip(&x).zip(&g).map(|((a, b), gi)| (a - b) * gi).sum();
            if fxn <= fx + 1e-4 * decrease.min(0.0) && fxn < fx {
                accepted = Some((xn, fxn));
                break;
            }
            alpha *= 0.5;
            if alpha * dmax < 1e-14 {
                break;
            }
        }
        match accepted {
            Some((xn, fxn)) => {
                let gn = fd_gradient(&mut eval, &xn, fxn, cfg.fd_step, lo, hi);
                let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
                let y = DVector::from_iterator(n, gn.iter().zip(&g).map(|(a, b)| a - b));
                let sy = s.dot(&y);
                if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
                    if just_reset {
                        // Shanno–Phua scaling of the initial matrix
                        h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                    }
                    let rho = 1.0 / sy;
                    let hy = &h * &y;
                    let yhy = y.dot(&hy);
                    h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                        - (&hy * s.transpose() + &s * hy.transpose()) * rho;
                    just_reset = false;
                }
                x = xn;
                fx = fxn;
                g = gn;
                pg = projected_grad(&x, &g, lo, hi);
                gnorm = norm(&pg);
            }
            None => {
                if just_reset {
                    // no descent even along the gradient: we sit on the
                    // finite-difference noise floor
                    if gnorm <= 100.0 * cfg.grad_tol {
                        break;
                    }
                    return Err(Error::NotConverged {
                        iterations: iter,
                        grad_norm: gnorm,
                        best: fx,
                    });
                }
                h = fresh(gnorm);
                just_reset = true;
            }
        }
    }
    if gnorm > 100.0 * cfg.grad_tol {
        return Err(Error::NotConverged {
            iterations: iter,
            grad_norm: gnorm,
            best: fx,
        });
    }
    Ok(Minimum {
        x,
        value: fx,
        grad_norm: gnorm,
        iterations: iter,
        evaluations: evals,
        inv_hessian: h,
    })
}

/// Finite-difference Hessian (central second differences).
pub fn fd_hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut m = DMatrix::zeros(n, n);
    let mut xt = x.to_vec();
    for i in 0..n {
        xt[i] = x[i] + h;
        let fp = f(&xt);
        xt[i] = x[i] - h;
        let fm = f(&xt);
        xt[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut quad = 0.0;
            for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                xt[i] = x[i] + si * h;
                xt[j] = x[j] + sj * h;
                quad += w * f(&xt);
            }
            xt[i] = x[i];
            xt[j] = x[j];
            let v = quad / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Inverse of a symmetric matrix after clipping its eigenvalues to be
/// at least `floor`, so the result is symmetric positive definite.
pub fn clipped_inverse(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Bisection root finder on a bracketing interval.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::InvalidParameter {
            name: "bracket",
            value: lo,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section minimisation of a unimodal function on [a, b].
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

//! Restarted GMRES for complex linear systems given only as a matrix-vector
//! product. Arnoldi uses modified Gram-Schmidt; the Hessenberg least-squares
//! problem is reduced with complex Givens rotations.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Relative residual target `||Ax - b|| / ||b||`.
    pub tol: f64,
    pub restart: usize,
    /// Cap on the total number of Arnoldi steps.
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restart: 50,
            max_iter: 500,
        }
    }
}

impl GmresOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresSolution {
    pub x: Vec<Complex64>,
    /// Arnoldi steps taken.
    pub iterations: usize,
    /// Final relative residual, recomputed from `b - A x`.
    pub residual: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // sum conj(a) b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Rotation `[c, s; -conj(s), c]` zeroing `b` in `(a, b)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), a);
    }
    if an == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0), b);
    }
    let r = an.hypot(bn);
    let c = an / r;
    let phase = a / an;
    let s = phase * b.conj() / r;
    (c, s, phase * r)
}

/// Solves `A x = b` where `apply(x, y)` writes `A x` into `y`.
///
/// `x0` is an optional initial guess. A zero right-hand side returns zero.
pub fn gmres<F>(apply: F, b: &[Complex64], x0: Option<&[Complex64]>, opts: &GmresOptions) -> Result<GmresSolution>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    if !(opts.tol > 0.0 && opts.tol < 1.0) || opts.restart == 0 {
        return Err(Error::InvalidArgument(format!(
            "GMRES needs tol in (0, 1) and restart >= 1, got tol = {}, restart = {}",
            opts.tol, opts.restart
        )));
    }
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(GmresSolution {
            x: vec![zero; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut x = match x0 {
        Some(g) => g.to_vec(),
        None => vec![zero; n],
    };
    let mut ax = vec![zero; n];
    let mut r = vec![zero; n];
    let m = opts.restart;
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![zero; m + 1]; m]; // column-major, hess[col][row]
    let mut cs = vec![0.0; m];
    let mut sn = vec![zero; m];
    let mut g = vec![zero; m + 1];
    let mut w = vec![zero; n];
    let mut total = 0usize;

    loop {
        apply(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= opts.tol {
            return Ok(GmresSolution {
                x,
                iterations: total,
                residual: rel,
            });
        }
        if total >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations: total,
                residual: rel,
            });
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = zero);
        g[0] = Complex64::new(beta, 0.0);
        let mut steps = 0;
        let mut breakdown = false;
        for j in 0..m {
            if total >= opts.max_iter {
                break;
            }
            apply(&basis[j], &mut w);
            total += 1;
            let col = &mut hess[j];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let hnext = norm(&w);
            col[j + 1] = Complex64::new(hnext, 0.0);
            for i in 0..j {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * bb;
                col[i + 1] = -sn[i].conj() * a + cs[i] * bb;
            }
            let (c, s, rr) = givens(col[j], col[j + 1]);
            cs[j] = c;
            sn[j] = s;
            col[j] = rr;
            col[j + 1] = zero;
            let gj = g[j];
            g[j] = c * gj;
            g[j + 1] = -s.conj() * gj;
            steps = j + 1;
            if hnext <= 1e-14 * beta {
                breakdown = true;
                break;
            }
            if g[j + 1].norm() / bnorm <= opts.tol {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // back substitution on the triangular system
        let mut y = vec![zero; steps];
        for i in (0..steps).rev() {
            let mut s = g[i];
            for k in (i + 1)..steps {
                s -= hess[k][i] * y[k];
            }
            y[i] = s / hess[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[k]) {
                *xi += yk * vi;
            }
        }
        if breakdown {
            apply(&x, &mut ax);
            let res = norm(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>()) / bnorm;
            if res <= opts.tol {
                return Ok(GmresSolution {
                    x,
                    iterations: total,
                    residual: res,
                });
            }
        }
    }
}

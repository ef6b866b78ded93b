//! Forward acoustic scattering by Lippmann-Schwinger solves.
//!
//! With the convention `Delta u + k^2 (1 - f) u = 0` the scattered field
//! satisfies `u_s = -k^2 V(f (u_s + u_inc))`, i.e.
//! `(I + k^2 V M_f) u_s = -k^2 V(f u_inc)`.

pub mod gmres;
pub mod hankel;
pub mod kernel;

use num_complex::Complex64;

pub use gmres::{gmres, GmresOptions, GmresSolution};
pub use hankel::hankel0_1;
pub use kernel::{green, GreenKernel, KernelCache};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, SUPPORT_RADIUS};

/// The system operator `u -> u + c V(f u)` on a grid, for a coupling
/// constant `c` (`k^2` for Helmholtz, `-1` for the Schrodinger form).
#[derive(Debug, Clone, Copy)]
pub struct LsOperator<'a> {
    kernel: &'a GreenKernel,
    contrast: &'a [Complex64],
    coupling: Complex64,
}

impl<'a> LsOperator<'a> {
    pub fn new(kernel: &'a GreenKernel, contrast: &'a ComplexField, coupling: Complex64) -> Result<Self> {
        kernel.grid().check_same(&contrast.grid())?;
        Ok(Self {
            kernel,
            contrast: contrast.values(),
            coupling,
        })
    }

    /// Helmholtz operator `I + k^2 V M_f` with `k` the kernel wavenumber.
    pub fn helmholtz(kernel: &'a GreenKernel, contrast: &'a ComplexField) -> Result<Self> {
        let k = kernel.wavenumber();
        Self::new(kernel, contrast, Complex64::new(k * k, 0.0))
    }

    /// `out = u + c V(f u)`.
    pub fn apply(&self, u: &[Complex64], out: &mut [Complex64]) {
        let fu: Vec<Complex64> = self.contrast.iter().zip(u).map(|(f, v)| f * v).collect();
        self.kernel.apply_raw(&fu, out);
        for (o, v) in out.iter_mut().zip(u) {
            *o = v + self.coupling * *o;
        }
    }

    /// Transposed operator `out = u + c f V(u)` (the kernel matrix is
    /// complex symmetric).
    pub fn apply_transpose(&self, u: &[Complex64], out: &mut [Complex64]) {
        self.kernel.apply_raw(u, out);
        for ((o, v), f) in out.iter_mut().zip(u).zip(self.contrast) {
            *o = v + self.coupling * f * *o;
        }
    }

    /// Solves `A x = rhs`, optionally warm-started from `guess`.
    pub fn solve(&self, rhs: &ComplexField, guess: Option<&ComplexField>, opts: &GmresOptions) -> Result<Solved> {
        self.run(rhs, guess, opts, false)
    }

    /// Solves `A^T x = rhs`.
    pub fn solve_transpose(
        &self,
        rhs: &ComplexField,
        guess: Option<&ComplexField>,
        opts: &GmresOptions,
    ) -> Result<Solved> {
        self.run(rhs, guess, opts, true)
    }

    fn run(&self, rhs: &ComplexField, guess: Option<&ComplexField>, opts: &GmresOptions, transpose: bool) -> Result<Solved> {
        let grid = self.kernel.grid();
        grid.check_same(&rhs.grid())?;
        let x0 = guess.map(|g| g.values());
        let sol = if transpose {
            gmres(|x, y| self.apply_transpose(x, y), rhs.values(), x0, opts)?
        } else {
            gmres(|x, y| self.apply(x, y), rhs.values(), x0, opts)?
        };
        Ok(Solved {
            field: ComplexField::from_values(grid, sol.x)?,
            iterations: sol.iterations,
            residual: sol.residual,
        })
    }
}

/// A converged linear solve.
#[derive(Debug, Clone)]
pub struct Solved {
    pub field: ComplexField,
    pub iterations: usize,
    pub residual: f64,
}

/// Scattered field for incident field `u_inc` and contrast `f` at the kernel
/// wavenumber: solves `(I + k^2 V M_f) u_s = -k^2 V(f u_inc)`.
pub fn solve_scattered(
    kernel: &GreenKernel,
    f: &ComplexField,
    u_inc: &ComplexField,
    opts: &GmresOptions,
) -> Result<ComplexField> {
    Ok(solve_scattered_from(kernel, f, u_inc, None, opts)?.field)
}

/// [`solve_scattered`] with an optional initial guess for `u_s`.
pub fn solve_scattered_from(
    kernel: &GreenKernel,
    f: &ComplexField,
    u_inc: &ComplexField,
    guess: Option<&ComplexField>,
    opts: &GmresOptions,
) -> Result<Solved> {
    f.grid().check_same(&u_inc.grid())?;
    let k = kernel.wavenumber();
    let mut rhs = kernel.volume_potential(&f.hadamard(u_inc))?;
    rhs.scale(Complex64::new(-k * k, 0.0));
    LsOperator::helmholtz(kernel, f)?.solve(&rhs, guess, opts)
}

/// Incident field radiated by a point source at `x0`: `y -> G(y, x0)`.
pub fn point_source(kernel: &GreenKernel, x0: [f64; 2]) -> Result<ComplexField> {
    if x0[0].hypot(x0[1]) <= SUPPORT_RADIUS {
        return Err(Error::InvalidArgument(format!(
            "source at ({}, {}) lies inside the scatterer ball of radius {SUPPORT_RADIUS}",
            x0[0], x0[1]
        )));
    }
    let t = kernel.wavenumber();
    Ok(ComplexField::from_fn(kernel.grid(), |x, y| {
        let r = (x - x0[0]).hypot(y - x0[1]);
        if r == 0.0 {
            kernel.self_cell()
        } else {
            green(t, r)
        }
    }))
}

/// Plane wave `exp(i k <x, d>)` for a unit direction `d`.
pub fn plane_wave(grid: crate::grid::Grid2D, k: f64, d: [f64; 2]) -> ComplexField {
    ComplexField::from_fn(grid, |x, y| Complex64::from_polar(1.0, k * (x * d[0] + y * d[1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_phantom, rel_l2_error, Grid2D, PhantomKind};

    fn smooth_bump(grid: Grid2D, amp: f64) -> ComplexField {
        ComplexField::from_real_fn(grid, |x, y| {
            let r2 = (x * x + y * y) / 0.5f64.powi(2);
            if r2 < 1.0 {
                amp * (1.0 - r2).powi(3)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn homogeneous_medium_does_not_scatter() {
        let grid = Grid2D::new(32).unwrap();
        let kernel = GreenKernel::new(grid, 5.0).unwrap();
        let uinc = plane_wave(grid, 5.0, [1.0, 0.0]);
        let us = solve_scattered(&kernel, &ComplexField::zeros(grid), &uinc, &GmresOptions::default()).unwrap();
        assert_eq!(us.max_abs(), 0.0);
    }

    #[test]
    fn residual_contract() {
        let grid = Grid2D::new(64).unwrap();
        let k = 10.0;
        let kernel = GreenKernel::new(grid, k).unwrap();
        let f = make_phantom(&PhantomKind::CenteredSquare, grid, 0.2).unwrap();
        let uinc = point_source(&kernel, [0.9, 0.0]).unwrap();
        let opts = GmresOptions::default();
        let us = solve_scattered(&kernel, &f, &uinc, &opts).unwrap();
        let total = &us + &uinc;
        let mut res = kernel.volume_potential(&f.hadamard(&total)).unwrap();
        res.scale(Complex64::new(k * k, 0.0));
        let res = &us + &res;
        let mut scale = kernel.volume_potential(&f.hadamard(&uinc)).unwrap();
        scale.scale(Complex64::new(k * k, 0.0));
        assert!(res.norm() / scale.norm() <= opts.tol * 1.0001);
    }

    #[test]
    fn weak_scattering_remainder_is_quadratic() {
        let grid = Grid2D::new(64).unwrap();
        let k = 5.0;
        let kernel = GreenKernel::new(grid, k).unwrap();
        let f = smooth_bump(grid, 1.0);
        let uinc = plane_wave(grid, k, [0.6, 0.8]);
        let opts = GmresOptions::with_tol(1e-13);
        let remainder = |s: f64| {
            let fs = f.scaled(Complex64::new(s, 0.0));
            let us = solve_scattered(&kernel, &fs, &uinc, &opts).unwrap();
            let mut born = kernel.volume_potential(&fs.hadamard(&uinc)).unwrap();
            born.scale(Complex64::new(-k * k, 0.0));
            (&us - &born).norm()
        };
        let ratio = remainder(0.02) / remainder(0.01);
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn point_source_values_and_symmetry() {
        let grid = Grid2D::new(32).unwrap();
        let kernel = GreenKernel::new(grid, 1.0).unwrap();
        // a grid point at distance exactly 1 from the source
        let (i, j) = (16, 16);
        let [x, y] = grid.point(i, j);
        let src = [x + 1.0, y];
        let u = point_source(&kernel, src).unwrap();
        let expect = Complex64::new(0.0, 0.25) * hankel0_1(1.0).unwrap();
        assert!((u[(i, j)] - expect).norm() < 1e-15);

        let a = [0.9f64, 0.1];
        let b = [-0.2f64, 0.95];
        let t = kernel.wavenumber();
        let ga = green(t, (b[0] - a[0]).hypot(b[1] - a[1]));
        let gb = green(t, (a[0] - b[0]).hypot(a[1] - b[1]));
        assert_eq!(ga, gb);
        assert!(point_source(&kernel, [0.5, 0.0]).is_err());
    }

    #[test]
    fn plane_wave_has_unit_modulus() {
        let u = plane_wave(Grid2D::new(32).unwrap(), 7.0, [0.6, -0.8]);
        assert!(u.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn refinement_reduces_the_discrepancy() {
        let k = 5.0;
        let solve = |n: usize| {
            let grid = Grid2D::new(n).unwrap();
            let kernel = GreenKernel::new(grid, k).unwrap();
            let f = smooth_bump(grid, 0.3);
            let uinc = plane_wave(grid, k, [1.0, 0.0]);
            solve_scattered(&kernel, &f, &uinc, &GmresOptions::with_tol(1e-12)).unwrap()
        };
        // average fine cells 2x2 onto the coarse grid
        let coarsen = |u: &ComplexField| {
            let n = u.grid().n() / 2;
            let grid = Grid2D::new(n).unwrap();
            let mut out = ComplexField::zeros(grid);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] = 0.25
                        * (u[(2 * i, 2 * j)] + u[(2 * i + 1, 2 * j)] + u[(2 * i, 2 * j + 1)] + u[(2 * i + 1, 2 * j + 1)]);
                }
            }
            out
        };
        let (u32, u64, u128) = (solve(32), solve(64), solve(128));
        let d1 = rel_l2_error(&coarsen(&u64), &u32).unwrap();
        let d2 = rel_l2_error(&coarsen(&u128), &u64).unwrap();
        assert!(d2 < d1, "{d2} vs {d1}");
    }

    #[test]
    fn transpose_solve_inverts_transpose() {
        let grid = Grid2D::new(32).unwrap();
        let kernel = GreenKernel::new(grid, 5.0).unwrap();
        let f = smooth_bump(grid, 0.5);
        let op = LsOperator::helmholtz(&kernel, &f).unwrap();
        let b = ComplexField::random(grid, 3);
        let x = op.solve_transpose(&b, None, &GmresOptions::with_tol(1e-12)).unwrap().field;
        let mut ax = ComplexField::zeros(grid);
        op.apply_transpose(x.values(), ax.values_mut());
        assert!(rel_l2_error(&ax, &b).unwrap() < 1e-11);
    }
}

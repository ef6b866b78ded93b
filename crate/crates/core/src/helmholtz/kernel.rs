//! Outgoing Green's function `G(x, y) = (i/4) H0(t |x - y|)` and the FFT
//! volume potential on a grid.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::hankel::{hankel0_1_unchecked, EULER_GAMMA};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D};

/// `(i/4) H0(t r)` for `r > 0`.
pub fn green(t: f64, r: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel0_1_unchecked(t * r)
}

/// Mean of `(i/4) H0(t r)` over a disk of area `h^2`, using the
/// small-argument form `H0(z) ~ 1 + (2i/pi)(ln(z/2) + gamma)`.
pub fn self_cell_value(t: f64, h: f64) -> Complex64 {
    let rho = h / PI.sqrt();
    let mean_log = (0.5 * t * rho).ln() + EULER_GAMMA - 0.5;
    Complex64::new(0.0, 0.25) * Complex64::new(1.0, 2.0 / PI * mean_log)
}

/// Green's function of the Helmholtz operator at wavenumber `t`, truncated
/// to offsets inside `[-2a, 2a]^2` and stored as the spectrum of its
/// `2n x 2n` zero-padded circulant embedding.
#[derive(Clone)]
pub struct GreenKernel {
    wavenumber: f64,
    grid: Grid2D,
    self_cell: Complex64,
    spectrum: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GreenKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenKernel")
            .field("wavenumber", &self.wavenumber)
            .field("n", &self.grid.n())
            .field("self_cell", &self.self_cell)
            .finish()
    }
}

impl GreenKernel {
    pub fn new(grid: Grid2D, wavenumber: f64) -> Result<Self> {
        if !(wavenumber > 0.0) || !wavenumber.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "wavenumber must be positive, got {wavenumber}"
            )));
        }
        let n = grid.n();
        let m = 2 * n;
        let h = grid.h();
        let self_cell = self_cell_value(wavenumber, h);
        // offsets (a, b) with 0 <= b <= a < n, reflected into all octants
        let mut octant = vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..=a {
                let v = if a == 0 {
                    self_cell
                } else {
                    green(wavenumber, h * (a as f64).hypot(b as f64))
                };
                octant[a * n + b] = v;
                octant[b * n + a] = v;
            }
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
        for di in -(n as i64 - 1)..=(n as i64 - 1) {
            let r = di.rem_euclid(m as i64) as usize;
            for dj in -(n as i64 - 1)..=(n as i64 - 1) {
                let c = dj.rem_euclid(m as i64) as usize;
                buf[r * m + c] = octant[di.unsigned_abs() as usize * n + dj.unsigned_abs() as usize];
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
        fwd.process_with_scratch(&mut buf, &mut scratch);
        transpose_square(&mut buf, m);
        fwd.process_with_scratch(&mut buf, &mut scratch);
        // `buf` now holds the transposed spectrum, which is the layout the
        // convolution below works in
        Ok(Self {
            wavenumber,
            grid,
            self_cell,
            spectrum: buf,
            fwd,
            inv,
        })
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn self_cell(&self) -> Complex64 {
        self.self_cell
    }

    /// Kernel value between two grid cells; the self cell for coincident ones.
    pub fn cell_value(&self, i: usize, j: usize, ip: usize, jp: usize) -> Complex64 {
        let di = i.abs_diff(ip) as f64;
        let dj = j.abs_diff(jp) as f64;
        if di == 0.0 && dj == 0.0 {
            self.self_cell
        } else {
            green(self.wavenumber, self.grid.h() * di.hypot(dj))
        }
    }

    /// `V(g)` on the grid: `h^2 sum G(x_i, x_j) g_j` with the self-cell
    /// value on the diagonal, via an exact aperiodic FFT convolution.
    pub fn volume_potential(&self, g: &ComplexField) -> Result<ComplexField> {
        self.grid.check_same(&g.grid())?;
        let mut out = ComplexField::zeros(self.grid);
        self.apply_raw(g.values(), out.values_mut());
        Ok(out)
    }

    /// Raw-slice form of [`GreenKernel::volume_potential`].
    pub fn apply_raw(&self, g: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.n();
        let m = 2 * n;
        let zero = Complex64::new(0.0, 0.0);
        let mut scratch = vec![zero; self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len())];
        // rows 0..n of the padded input, transformed along rows
        let mut rows = vec![zero; n * m];
        for i in 0..n {
            rows[i * m..i * m + n].copy_from_slice(&g[i * n..(i + 1) * n]);
        }
        self.fwd.process_with_scratch(&mut rows, &mut scratch);
        // transpose into the full buffer; rows n..2n of the input are zero
        let mut full = vec![zero; m * m];
        for i in 0..n {
            for c in 0..m {
                full[c * m + i] = rows[i * m + c];
            }
        }
        self.fwd.process_with_scratch(&mut full, &mut scratch);
        for (v, k) in full.iter_mut().zip(&self.spectrum) {
            *v *= k;
        }
        self.inv.process_with_scratch(&mut full, &mut scratch);
        for i in 0..n {
            for c in 0..m {
                rows[i * m + c] = full[c * m + i];
            }
        }
        self.inv.process_with_scratch(&mut rows, &mut scratch);
        let h = self.grid.h();
        let s = h * h / (m * m) as f64;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = rows[i * m + j] * s;
            }
        }
    }
}

fn transpose_square(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in (i + 1)..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

/// Kernels keyed by wavenumber, built on demand.
#[derive(Debug, Default)]
pub struct KernelCache {
    kernels: HashMap<(usize, u64), Arc<GreenKernel>>,
}

impl KernelCache {
    pub fn get(&mut self, grid: Grid2D, wavenumber: f64) -> Result<Arc<GreenKernel>> {
        let key = (grid.n(), wavenumber.to_bits());
        if let Some(k) = self.kernels.get(&key) {
            return Ok(k.clone());
        }
        let k = Arc::new(GreenKernel::new(grid, wavenumber)?);
        self.kernels.insert(key, k.clone());
        Ok(k)
    }
}

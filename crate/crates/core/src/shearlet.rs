//! Undecimated cone-adapted shearlet frame built from Meyer-type windows in
//! the Fourier domain.
//!
//! Every filter is real and even in frequency. Analysis multiplies the
//! spectrum by each filter; synthesis with the canonical dual divides the
//! summed, refiltered spectra by `dual_weight = sum |filter|^2`, which makes
//! `synthesize_dual(analyze(f)) == f` up to rounding.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{signed_freq, Fft2};
use crate::grid::{rel_l2_error, ComplexField, Grid2D};

static NEXT_SYSTEM_ID: AtomicU64 = AtomicU64::new(1);

/// Which frequency cone a filter lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cone {
    Lowpass,
    /// `|xi_2| <= |xi_1|`
    Horizontal,
    /// `|xi_1| <= |xi_2|`
    Vertical,
}

impl Cone {
    pub fn name(&self) -> &'static str {
        match self {
            Cone::Lowpass => "low",
            Cone::Horizontal => "h",
            Cone::Vertical => "v",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShearletIndex {
    pub cone: Cone,
    pub j: usize,
    pub k: i64,
}

/// Polynomial transition `x^4 (35 - 84x + 70x^2 - 20x^3)` clamped to `[0, 1]`.
pub fn meyer_nu(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x.powi(3))
    }
}

/// Lowpass window: 1 on `[-1, 1]`, smooth roll-off to 0 at `|t| = 2`.
pub fn lowpass_window(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        (FRAC_PI_2 * meyer_nu(a - 1.0)).cos()
    }
}

/// Radial band window supported on `1 < |t| < 4`; its squared dyadic
/// dilates telescope with the lowpass window.
pub fn band_window(t: f64) -> f64 {
    let a = lowpass_window(t / 2.0);
    let b = lowpass_window(t);
    (a * a - b * b).max(0.0).sqrt()
}

/// Angular bump supported on `[-1, 1]` with `sum_k bump(u - k)^2 = 1`.
pub fn angular_window(u: f64) -> f64 {
    if u <= -1.0 || u >= 1.0 {
        0.0
    } else if u <= 0.0 {
        (FRAC_PI_2 * meyer_nu(1.0 + u)).sin()
    } else {
        (FRAC_PI_2 * meyer_nu(u)).cos()
    }
}

/// Base horizontal-cone generator in frequency, `W(xi_1) V(xi_2 / xi_1)`.
pub fn base_generator(xi1: f64, xi2: f64) -> f64 {
    if xi1 == 0.0 {
        return 0.0;
    }
    band_window(xi1) * angular_window(xi2 / xi1)
}

/// Continuous frequency response of the filter for `idx` at `xi`.
///
/// Cone filters are the base generator composed with the dilation
/// `diag(2^-j, 2^-j/2)` followed by the shear `(x, y) -> (x, y - k x)`; the
/// vertical cone swaps the roles of the two coordinates.
pub fn filter_response(idx: ShearletIndex, xi1: f64, xi2: f64) -> f64 {
    let (a, b) = match idx.cone {
        Cone::Lowpass => return lowpass_window(xi1) * lowpass_window(xi2),
        Cone::Horizontal => (xi1, xi2),
        Cone::Vertical => (xi2, xi1),
    };
    let d1 = a / f64::powi(2.0, idx.j as i32);
    let d2 = b / f64::powf(2.0, idx.j as f64 / 2.0);
    base_generator(d1, d2 - idx.k as f64 * d1)
}

/// Largest shear magnitude at scale `j`, `2^ceil(j/2)`.
pub fn max_shear(j: usize) -> i64 {
    1i64 << j.div_ceil(2)
}

/// Number of filters for `scales` levels.
pub fn filter_count(scales: usize) -> usize {
    1 + (0..scales)
        .map(|j| 2 * (2 * max_shear(j) as usize + 1))
        .sum::<usize>()
}

/// Bank of Fourier-domain shearlet filters on a grid, with the dual weight.
#[derive(Debug, Clone)]
pub struct ShearletSystem {
    id: u64,
    grid: Grid2D,
    scales: usize,
    indices: Vec<ShearletIndex>,
    filters: Vec<Vec<f64>>,
    dual_weight: Vec<f64>,
    frame_bounds: (f64, f64),
    fft: Fft2,
}

/// Undecimated coefficient planes produced by a particular system.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    system_id: u64,
    n: usize,
    planes: Vec<Vec<Complex64>>,
}

impl ShearletSystem {
    pub fn new(grid: Grid2D, scales: usize) -> Result<Self> {
        let n = grid.n();
        let max_scales = n.trailing_zeros() as usize - 3;
        if scales < 1 || scales > max_scales {
            return Err(Error::Config(format!(
                "scales must lie in [1, {max_scales}] for n = {n}, got {scales}"
            )));
        }
        let mut indices = vec![ShearletIndex {
            cone: Cone::Lowpass,
            j: 0,
            k: 0,
        }];
        for j in 0..scales {
            let kmax = max_shear(j);
            for cone in [Cone::Horizontal, Cone::Vertical] {
                for k in -kmax..=kmax {
                    indices.push(ShearletIndex { cone, j, k });
                }
            }
        }
        debug_assert_eq!(indices.len(), filter_count(scales));

        // frequency of DFT bin w is w * 2^(J+1) / n, so the grid covers
        // [-2^J, 2^J) in each coordinate
        let step = f64::powi(2.0, scales as i32 + 1) / n as f64;
        let xi: Vec<f64> = (0..n).map(|w| signed_freq(w, n) as f64 * step).collect();
        let filters: Vec<Vec<f64>> = indices
            .par_iter()
            .map(|&idx| build_filter(idx, n, &xi))
            .collect();
        let mut dual_weight = vec![0.0; n * n];
        for f in &filters {
            for (w, v) in dual_weight.iter_mut().zip(f) {
                *w += v * v;
            }
        }
        let lo = dual_weight.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = dual_weight.iter().cloned().fold(0.0, f64::max);
        if lo <= 0.0 {
            return Err(Error::Config(
                "shearlet filters fail to cover the frequency plane".to_string(),
            ));
        }
        Ok(Self {
            id: NEXT_SYSTEM_ID.fetch_add(1, Ordering::Relaxed),
            grid,
            scales,
            indices,
            filters,
            dual_weight,
            frame_bounds: (lo, hi),
            fft: Fft2::new(n),
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    pub fn indices(&self) -> &[ShearletIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Real Fourier-domain filter for plane `p`, in DFT bin order.
    pub fn filter(&self, p: usize) -> &[f64] {
        &self.filters[p]
    }

    pub fn dual_weight(&self) -> &[f64] {
        &self.dual_weight
    }

    /// `(min, max)` of the dual weight: the lower and upper frame bounds.
    pub fn frame_bounds(&self) -> (f64, f64) {
        self.frame_bounds
    }

    /// Total number of scalar coefficients, `planes * n^2`.
    pub fn coefficient_count(&self) -> usize {
        self.len() * self.grid.len()
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn zeros(&self) -> CoefficientSet {
        CoefficientSet {
            system_id: self.id,
            n: self.grid.n(),
            planes: vec![vec![Complex64::new(0.0, 0.0); self.grid.len()]; self.len()],
        }
    }

    fn check(&self, c: &CoefficientSet) -> Result<()> {
        if c.system_id != self.id || c.n != self.grid.n() || c.planes.len() != self.len() {
            return Err(Error::SystemMismatch);
        }
        Ok(())
    }

    /// Analysis operator: plane `p` is `IFFT(FFT(f) * filter_p)`.
    pub fn analyze(&self, f: &ComplexField) -> Result<CoefficientSet> {
        self.grid.check_same(&f.grid())?;
        let mut spec = f.values().to_vec();
        self.fft.forward(&mut spec);
        Ok(self.filter_spectrum(&spec, false))
    }

    /// Planes `IFFT(FFT(g) * filter_p / dual_weight)`: the adjoint of
    /// [`ShearletSystem::synthesize_dual`] for unweighted inner products.
    pub fn synthesize_dual_adjoint(&self, g: &ComplexField) -> Result<CoefficientSet> {
        self.grid.check_same(&g.grid())?;
        let mut spec = g.values().to_vec();
        self.fft.forward(&mut spec);
        Ok(self.filter_spectrum(&spec, true))
    }

    fn filter_spectrum(&self, spec: &[Complex64], divide: bool) -> CoefficientSet {
        let planes = self
            .filters
            .par_iter()
            .map(|filt| {
                let mut plane: Vec<Complex64> = if divide {
                    spec.iter()
                        .zip(filt)
                        .zip(&self.dual_weight)
                        .map(|((s, v), w)| s * (v / w))
                        .collect()
                } else {
                    spec.iter().zip(filt).map(|(s, v)| s * v).collect()
                };
                self.fft.inverse(&mut plane);
                plane
            })
            .collect();
        CoefficientSet {
            system_id: self.id,
            n: self.grid.n(),
            planes,
        }
    }

    /// Canonical dual synthesis: `IFFT(sum_p FFT(c_p) * filter_p / dual_weight)`.
    pub fn synthesize_dual(&self, c: &CoefficientSet) -> Result<ComplexField> {
        self.check(c)?;
        self.synthesize_planes(c, |_| true)
    }

    /// Dual synthesis restricted to planes selected by `keep`.
    pub fn synthesize_selected(
        &self,
        c: &CoefficientSet,
        keep: impl Fn(ShearletIndex) -> bool,
    ) -> Result<ComplexField> {
        self.check(c)?;
        self.synthesize_planes(c, keep)
    }

    fn synthesize_planes(
        &self,
        c: &CoefficientSet,
        keep: impl Fn(ShearletIndex) -> bool,
    ) -> Result<ComplexField> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        // fixed summation order over planes keeps the result independent of
        // any parallelism elsewhere
        for (p, plane) in c.planes.iter().enumerate() {
            if !keep(self.indices[p]) || plane.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
                continue;
            }
            buf.copy_from_slice(plane);
            self.fft.forward(&mut buf);
            for ((a, b), v) in acc.iter_mut().zip(&buf).zip(&self.filters[p]) {
                *a += b * v;
            }
        }
        for (a, w) in acc.iter_mut().zip(&self.dual_weight) {
            *a /= w;
        }
        self.fft.inverse(&mut acc);
        ComplexField::from_values(self.grid, acc)
    }

    /// Keeps the `big_n` largest-magnitude coefficients of `analyze(f)`,
    /// synthesizes with the dual and returns the approximation and its
    /// relative L2 error. Ties are broken by coefficient position.
    pub fn n_term_approx(&self, f: &ComplexField, big_n: usize) -> Result<(ComplexField, f64)> {
        let c = self.analyze(f)?;
        let approx = self.synthesize_dual(&self.keep_largest(&c, big_n)?)?;
        let err = rel_l2_error(&approx, f)?;
        Ok((approx, err))
    }

    /// Zeroes all but the `big_n` largest-magnitude coefficients.
    pub fn keep_largest(&self, c: &CoefficientSet, big_n: usize) -> Result<CoefficientSet> {
        self.check(c)?;
        let total = self.coefficient_count();
        if big_n > total {
            return Err(Error::InvalidArgument(format!(
                "N = {big_n} exceeds the {total} available coefficients"
            )));
        }
        let mut out = self.zeros();
        if big_n == 0 {
            return Ok(out);
        }
        if big_n == total {
            return Ok(c.clone());
        }
        let mut mags: Vec<f64> = c.planes.iter().flatten().map(|v| v.norm()).collect();
        let flat_mags = mags.clone();
        let (_, nth, _) = mags.select_nth_unstable_by(big_n - 1, |a, b| b.total_cmp(a));
        let cutoff = *nth;
        let above = flat_mags.iter().filter(|&&m| m > cutoff).count();
        let mut ties_left = big_n - above;
        let plane_len = self.grid.len();
        for (pos, &m) in flat_mags.iter().enumerate() {
            let take = if m > cutoff {
                true
            } else if m == cutoff && ties_left > 0 {
                ties_left -= 1;
                true
            } else {
                false
            };
            if take {
                let (p, q) = (pos / plane_len, pos % plane_len);
                out.planes[p][q] = c.planes[p][q];
            }
        }
        Ok(out)
    }

    /// Reconstruction from the planes at scale `j` only (both cones).
    pub fn level_restricted_reconstruction(&self, f: &ComplexField, j: usize) -> Result<ComplexField> {
        if j >= self.scales {
            return Err(Error::InvalidArgument(format!(
                "scale {j} out of range for a {}-scale system",
                self.scales
            )));
        }
        let c = self.analyze(f)?;
        self.synthesize_planes(&c, |idx| idx.cone != Cone::Lowpass && idx.j == j)
    }

    /// Reconstruction from the lowpass plane only.
    pub fn lowpass_reconstruction(&self, f: &ComplexField) -> Result<ComplexField> {
        let c = self.analyze(f)?;
        self.synthesize_planes(&c, |idx| idx.cone == Cone::Lowpass)
    }

    /// Writes one field file per plane, named `cone_j_k.ssf`.
    pub fn dump_coefficients(&self, c: &CoefficientSet, dir: impl AsRef<Path>) -> Result<()> {
        self.check(c)?;
        std::fs::create_dir_all(dir.as_ref())?;
        for (idx, plane) in self.indices.iter().zip(&c.planes) {
            let name = format!("{}_{}_{}.ssf", idx.cone.name(), idx.j, idx.k);
            let field = ComplexField::from_values(self.grid, plane.clone())?;
            crate::io::save_field(dir.as_ref().join(name), &field)?;
        }
        Ok(())
    }
}

fn build_filter(idx: ShearletIndex, n: usize, xi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            out[a * n + b] = filter_response(idx, xi[a], xi[b]);
        }
    }
    // On the Nyquist row and column the bin -w aliases onto a different
    // continuous frequency than w; averaging the energies restores the
    // symmetry filter[w] == filter[-w] that keeps real inputs real.
    let h = n / 2;
    for a in 0..n {
        for b in 0..n {
            if a != h && b != h {
                continue;
            }
            let (ma, mb) = ((n - a) % n, (n - b) % n);
            if (ma, mb) < (a, b) {
                continue;
            }
            let u = filter_response(idx, xi[a], xi[b]);
            let v = filter_response(idx, xi[ma], xi[mb]);
            let s = (0.5 * (u * u + v * v)).sqrt();
            out[a * n + b] = s;
            out[ma * n + mb] = s;
        }
    }
    out
}

impl CoefficientSet {
    pub fn planes(&self) -> &[Vec<Complex64>] {
        &self.planes
    }

    pub fn planes_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.planes
    }

    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.planes.iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Complex64> {
        self.planes.iter_mut().flatten()
    }

    /// Unweighted squared Euclidean norm of all coefficients.
    pub fn norm_sqr(&self) -> f64 {
        self.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `sum |c|` over all coefficients.
    pub fn l1_norm(&self) -> f64 {
        self.iter().map(|v| v.norm()).sum()
    }

    /// Unweighted inner product `sum a conj(b)`.
    pub fn inner(&self, other: &CoefficientSet) -> Complex64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: Complex64, x: &CoefficientSet) {
        for (v, xv) in self.iter_mut().zip(x.iter()) {
            *v += a * xv;
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> CoefficientSet {
        CoefficientSet {
            system_id: self.system_id,
            n: self.n,
            planes: self
                .planes
                .iter()
                .map(|p| p.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    /// Elementwise complex soft shrinkage by `theta`.
    pub fn soft_threshold(&self, theta: f64) -> Result<CoefficientSet> {
        if !(theta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be nonnegative, got {theta}"
            )));
        }
        Ok(self.map(|v| soft_shrink(v, theta)))
    }
}

/// Complex soft shrinkage: `0` if `|w| <= theta`, else `w (|w| - theta) / |w|`.
#[inline]
pub fn soft_shrink(w: Complex64, theta: f64) -> Complex64 {
    let m = w.norm();
    if m <= theta {
        Complex64::new(0.0, 0.0)
    } else {
        w * ((m - theta) / m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_phantom, PhantomKind};
    use proptest::prelude::*;

    fn system(n: usize, scales: usize) -> ShearletSystem {
        ShearletSystem::new(Grid2D::new(n).unwrap(), scales).unwrap()
    }

    #[test]
    fn filter_counts() {
        assert_eq!(system(64, 1).len(), 7);
        assert_eq!(filter_count(4), 45);
        assert_eq!(filter_count(5), 63);
        assert_eq!(system(128, 4).len(), 45);
        assert!(ShearletSystem::new(Grid2D::new(64).unwrap(), 4).is_err());
        assert!(ShearletSystem::new(Grid2D::new(64).unwrap(), 0).is_err());
    }

    #[test]
    fn windows_partition_unity() {
        for s in 0..=400 {
            let u = -2.0 + 4.0 * s as f64 / 400.0;
            let total: f64 = (-4..=4).map(|k| angular_window(u - k as f64).powi(2)).sum();
            assert!((total - 1.0).abs() < 1e-12, "u = {u}");
        }
        // telescoping radial partition up to 2^J
        for s in 0..=400 {
            let t = 16.0 * s as f64 / 400.0;
            let total = lowpass_window(t).powi(2)
                + (0..4).map(|j| band_window(t / f64::powi(2.0, j)).powi(2)).sum::<f64>();
            assert!((total - 1.0).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn frame_bounds_are_positive_and_finite() {
        for (n, s) in [(64, 1), (64, 3), (128, 4)] {
            let (lo, hi) = system(n, s).frame_bounds();
            assert!(lo > 0.0 && hi.is_finite() && lo <= hi);
        }
    }

    #[test]
    fn filters_follow_shear_and_dilation() {
        // away from the Nyquist lines each filter equals the base generator
        // evaluated at the sheared, dilated frequency
        let sys = system(128, 4);
        let n = 128;
        let step = f64::powi(2.0, 5) / n as f64;
        for (p, idx) in sys.indices().iter().enumerate() {
            for a in (0..n).step_by(3) {
                for b in (0..n).step_by(5) {
                    if a == n / 2 || b == n / 2 {
                        continue;
                    }
                    let x1 = signed_freq(a, n) as f64 * step;
                    let x2 = signed_freq(b, n) as f64 * step;
                    let expect = match idx.cone {
                        Cone::Lowpass => lowpass_window(x1) * lowpass_window(x2),
                        Cone::Horizontal | Cone::Vertical => {
                            let (u, v) = if idx.cone == Cone::Horizontal { (x1, x2) } else { (x2, x1) };
                            let s = 2f64.powi(idx.j as i32);
                            let r = 2f64.powf(idx.j as f64 / 2.0);
                            // psi(S_k A_j x) has transform psi_hat(S_k^{-T} A_j^{-1} xi)
                            base_generator(u / s, v / r - idx.k as f64 * u / s)
                        }
                    };
                    assert_eq!(sys.filter(p)[a * n + b], expect);
                }
            }
        }
    }

    #[test]
    fn filters_are_even_in_frequency() {
        let sys = system(64, 3);
        let n = 64;
        for p in 0..sys.len() {
            let f = sys.filter(p);
            for a in 0..n {
                for b in 0..n {
                    assert_eq!(f[a * n + b], f[((n - a) % n) * n + (n - b) % n]);
                }
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let sys = system(64, 2);
        let z = ComplexField::zeros(sys.grid());
        let c = sys.analyze(&z).unwrap();
        assert_eq!(c.norm_sqr(), 0.0);
        assert_eq!(sys.synthesize_dual(&sys.zeros()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn perfect_reconstruction() {
        let sys = system(128, 4);
        for seed in 0..3 {
            let f = ComplexField::random(sys.grid(), seed);
            let g = sys.synthesize_dual(&sys.analyze(&f).unwrap()).unwrap();
            assert!(rel_l2_error(&g, &f).unwrap() < 1e-10);
        }
    }

    #[test]
    fn real_input_gives_real_coefficients() {
        let sys = system(64, 3);
        let f = ComplexField::random(sys.grid(), 4).real_part();
        let c = sys.analyze(&f).unwrap();
        let imag: f64 = c.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(imag < 1e-12);
    }

    #[test]
    fn frame_energy_sandwich() {
        let sys = system(64, 3);
        let (lo, hi) = sys.frame_bounds();
        for seed in 0..5 {
            let f = ComplexField::random(sys.grid(), 10 + seed);
            let energy = sys.analyze(&f).unwrap().norm_sqr();
            let fn2 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>();
            assert!(lo * fn2 <= energy * (1.0 + 1e-12));
            assert!(energy <= hi * fn2 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn analysis_is_linear() {
        let sys = system(64, 2);
        let f = ComplexField::random(sys.grid(), 1);
        let g = ComplexField::random(sys.grid(), 2);
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let mut comb = f.scaled(a);
        comb.axpy(b, &g);
        let lhs = sys.analyze(&comb).unwrap();
        let mut rhs = sys.analyze(&f).unwrap().map(|v| v * a);
        rhs.axpy(b, &sys.analyze(&g).unwrap());
        let scale = lhs.norm_sqr().sqrt();
        let diff: f64 = lhs.iter().zip(rhs.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
        assert!(diff.sqrt() < 1e-12 * scale);
    }

    #[test]
    fn single_plane_synthesis_matches_fft_oracle() {
        let sys = system(64, 2);
        let n = 64;
        let p = 5;
        let mut c = sys.zeros();
        let plane = ComplexField::random(sys.grid(), 9);
        c.planes_mut()[p].copy_from_slice(plane.values());
        let got = sys.synthesize_dual(&c).unwrap();
        let fft = Fft2::new(n);
        let mut spec = plane.values().to_vec();
        fft.forward(&mut spec);
        for (q, s) in spec.iter_mut().enumerate() {
            *s *= sys.filter(p)[q] / sys.dual_weight()[q];
        }
        fft.inverse(&mut spec);
        let oracle = ComplexField::from_values(sys.grid(), spec).unwrap();
        assert!(rel_l2_error(&got, &oracle).unwrap() < 1e-13);
    }

    #[test]
    fn dual_adjoint_matches_inner_products() {
        let sys = system(64, 2);
        let g = ComplexField::random(sys.grid(), 21);
        let c = sys.analyze(&ComplexField::random(sys.grid(), 22)).unwrap();
        let lhs: Complex64 = sys
            .synthesize_dual(&c)
            .unwrap()
            .values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| a * b.conj())
            .sum();
        let rhs = c.inner(&sys.synthesize_dual_adjoint(&g).unwrap());
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm());
    }

    #[test]
    fn n_term_extremes_and_monotonicity() {
        let sys = system(64, 2);
        let f = make_phantom(&PhantomKind::CenteredSquare, sys.grid(), 1.0).unwrap();
        let total = sys.coefficient_count();
        assert!(sys.n_term_approx(&f, total).unwrap().1 < 1e-10);
        assert_eq!(sys.n_term_approx(&f, 0).unwrap().1, 1.0);
        assert!(sys.n_term_approx(&f, total + 1).is_err());
        let mut prev = f64::INFINITY;
        for big_n in [16, 64, 256, 1024, 4096, 16384] {
            let e = sys.n_term_approx(&f, big_n).unwrap().1;
            assert!(e <= prev + 1e-12);
            prev = e;
        }
    }

    #[test]
    fn keep_largest_keeps_exactly_n_with_ties() {
        let sys = system(64, 1);
        let mut c = sys.zeros();
        for v in c.iter_mut() {
            *v = Complex64::new(1.0, 0.0);
        }
        let kept = sys.keep_largest(&c, 100).unwrap();
        assert_eq!(kept.iter().filter(|v| v.norm() > 0.0).count(), 100);
        // ties resolve to the earliest positions
        assert!(kept.planes()[0][..100].iter().all(|v| v.re == 1.0));
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_shrink(Complex64::new(0.5, 0.0), 0.2).re, 0.3);
        assert_eq!(soft_shrink(Complex64::new(-0.1, 0.0), 0.2), Complex64::new(0.0, 0.0));
        assert_eq!(soft_shrink(Complex64::new(-0.5, 0.0), 0.2).re, -0.3);
        let v = soft_shrink(Complex64::new(3.0, 4.0), 1.0);
        assert!((v - Complex64::new(2.4, 3.2)).norm() < 1e-15);
        assert!(system(64, 1).zeros().soft_threshold(-1.0).is_err());
    }

    #[test]
    fn level_partition_sums_to_identity() {
        let sys = system(64, 3);
        let f = ComplexField::random(sys.grid(), 5);
        let mut sum = sys.lowpass_reconstruction(&f).unwrap();
        for j in 0..3 {
            sum = &sum + &sys.level_restricted_reconstruction(&f, j).unwrap();
        }
        assert!(rel_l2_error(&sum, &f).unwrap() < 1e-10);
        assert!(sys.level_restricted_reconstruction(&f, 3).is_err());
        let z = ComplexField::zeros(sys.grid());
        assert_eq!(sys.level_restricted_reconstruction(&z, 1).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn coefficient_dump_names() {
        let sys = system(64, 1);
        let dir = tempfile::tempdir().unwrap();
        let c = sys.analyze(&ComplexField::random(sys.grid(), 1)).unwrap();
        sys.dump_coefficients(&c, dir.path()).unwrap();
        assert!(dir.path().join("low_0_0.ssf").exists());
        assert!(dir.path().join("h_0_-1.ssf").exists());
        assert!(dir.path().join("v_0_1.ssf").exists());
        let other = system(64, 1);
        assert!(matches!(
            other.synthesize_dual(&c),
            Err(Error::SystemMismatch)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn soft_threshold_is_nonexpansive(
            xr in -5.0..5.0f64, xi in -5.0..5.0f64,
            yr in -5.0..5.0f64, yi in -5.0..5.0f64,
            t in 0.0..3.0f64,
        ) {
            let x = Complex64::new(xr, xi);
            let y = Complex64::new(yr, yi);
            let d = (soft_shrink(x, t) - soft_shrink(y, t)).norm();
            prop_assert!(d <= (x - y).norm() + 1e-12);
        }

        #[test]
        fn soft_threshold_composes_additively(x in -5.0..5.0f64, t1 in 0.0..2.0f64, t2 in 0.0..2.0f64) {
            let w = Complex64::new(x, 0.0);
            let a = soft_shrink(soft_shrink(w, t1), t2);
            let b = soft_shrink(w, t1 + t2);
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}

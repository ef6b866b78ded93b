//! Multistatic measurements with coincident transmitters and receivers on a
//! circle, the derivative of the measurement map and its exact discrete
//! adjoint.
//!
//! Transmitter `t` radiates the point-source field `g_t = G(., x_t)`. With
//! total field `u_t` solving `(I + k^2 V M_f) u_t = g_t`, the measured value
//! at receiver `r` is
//!
//! `N_rt = -k^2 h^2 sum_j g_r(y_j) f_j u_t(y_j)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{seeded_rng, ComplexField, Grid2D, SUPPORT_RADIUS};
use crate::helmholtz::{point_source, GmresOptions, GreenKernel, LsOperator};

/// Default device-circle radius.
pub const DEFAULT_RADIUS: f64 = 0.9;

/// `T` coincident transmitter/receiver positions equidistributed on a circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    transmitters: usize,
    radius: f64,
}

impl ArrayConfig {
    pub fn new(transmitters: usize, radius: f64) -> Result<Self> {
        if transmitters == 0 {
            return Err(Error::Config("need at least one transmitter".to_string()));
        }
        if !(radius > SUPPORT_RADIUS) || !radius.is_finite() {
            return Err(Error::Config(format!(
                "device radius must exceed {SUPPORT_RADIUS}, got {radius}"
            )));
        }
        Ok(Self {
            transmitters,
            radius,
        })
    }

    pub fn transmitters(&self) -> usize {
        self.transmitters
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Position of device `t`, at angle `2 pi t / T`.
    pub fn position(&self, t: usize) -> [f64; 2] {
        let a = 2.0 * PI * t as f64 / self.transmitters as f64;
        [self.radius * a.cos(), self.radius * a.sin()]
    }

    /// Arc length per device, `2 pi rho / T`.
    pub fn weight(&self) -> f64 {
        2.0 * PI * self.radius / self.transmitters as f64
    }
}

/// `T x T` measurement matrix, row = receiver, column = transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    array: ArrayConfig,
    entries: Vec<Complex64>,
}

impl MeasurementMatrix {
    pub fn zeros(array: ArrayConfig) -> Self {
        let t = array.transmitters();
        Self {
            array,
            entries: vec![Complex64::new(0.0, 0.0); t * t],
        }
    }

    pub fn from_entries(array: ArrayConfig, entries: Vec<Complex64>) -> Result<Self> {
        let t = array.transmitters();
        if entries.len() != t * t {
            return Err(Error::InvalidArgument(format!(
                "measurement matrix needs {} entries, got {}",
                t * t,
                entries.len()
            )));
        }
        Ok(Self { array, entries })
    }

    pub fn array(&self) -> ArrayConfig {
        self.array
    }

    pub fn size(&self) -> usize {
        self.array.transmitters()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, t: usize) -> Complex64 {
        self.entries[r * self.size() + t]
    }

    #[inline]
    pub fn set(&mut self, r: usize, t: usize, v: Complex64) {
        let s = self.size();
        self.entries[r * s + t] = v;
    }

    /// Hilbert-Schmidt norm with arc-length weights, `w sqrt(sum |M|^2)`.
    pub fn hs_norm(&self) -> f64 {
        self.array.weight() * self.entries.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Weighted Hilbert-Schmidt inner product `w^2 sum A conj(B)`.
    pub fn hs_inner(&self, other: &MeasurementMatrix) -> Complex64 {
        let w = self.array.weight();
        let s: Complex64 = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * (w * w)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            array: self.array,
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    pub fn sub(&self, other: &MeasurementMatrix) -> Self {
        Self {
            array: self.array,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &MeasurementMatrix) -> Self {
        Self {
            array: self.array,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    /// Largest `|M_rt - M_tr|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let s = self.size();
        let scale = self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for r in 0..s {
            for t in 0..r {
                worst = worst.max((self.get(r, t) - self.get(t, r)).norm());
            }
        }
        worst / scale
    }

    /// Writes the matrix as CSV: a `# T=.., rho=.., k0=.., eps=..` line, the
    /// column header `receiver,transmitter,re,im`, then one row per entry.
    pub fn save_csv(&self, path: impl AsRef<Path>, k0: f64, eps: f64) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# T={}, rho={}, k0={}, eps={}",
            self.size(),
            self.array.radius(),
            k0,
            eps
        );
        s.push_str("receiver,transmitter,re,im\n");
        for r in 0..self.size() {
            for t in 0..self.size() {
                let v = self.get(r, t);
                let _ = writeln!(s, "{r},{t},{:e},{:e}", v.re, v.im);
            }
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    /// Reads a matrix written by [`MeasurementMatrix::save_csv`]; returns it
    /// with the recorded `k0` and `eps`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<(Self, f64, f64)> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let head = lines
            .next()
            .ok_or_else(|| Error::Format("empty measurement file".to_string()))?;
        let mut t = None;
        let mut rho = None;
        let mut k0 = None;
        let mut eps = None;
        for part in head.trim_start_matches('#').split(',') {
            let (key, val) = part
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header field '{part}'")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad header value '{v}'")))
            };
            match key.trim() {
                "T" => t = Some(parse(val)? as usize),
                "rho" => rho = Some(parse(val)?),
                "k0" => k0 = Some(parse(val)?),
                "eps" => eps = Some(parse(val)?),
                other => return Err(Error::Format(format!("unknown header key '{other}'"))),
            }
        }
        let missing = || Error::Format("incomplete measurement header".to_string());
        let array = ArrayConfig::new(t.ok_or_else(missing)?, rho.ok_or_else(missing)?)?;
        let mut m = Self::zeros(array);
        let mut seen = 0;
        for line in lines.skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Format(format!("bad row '{line}'")));
            }
            let bad = || Error::Format(format!("bad row '{line}'"));
            let r: usize = cols[0].trim().parse().map_err(|_| bad())?;
            let c: usize = cols[1].trim().parse().map_err(|_| bad())?;
            let re: f64 = cols[2].trim().parse().map_err(|_| bad())?;
            let im: f64 = cols[3].trim().parse().map_err(|_| bad())?;
            if r >= m.size() || c >= m.size() {
                return Err(bad());
            }
            m.set(r, c, Complex64::new(re, im));
            seen += 1;
        }
        if seen != m.entries.len() {
            return Err(Error::Format(format!(
                "expected {} rows, found {seen}",
                m.entries.len()
            )));
        }
        Ok((m, k0.ok_or_else(missing)?, eps.ok_or_else(missing)?))
    }
}

/// Adds i.i.d. complex Gaussian noise scaled so that
/// `hs_norm(noise) = rel_level * hs_norm(m)`. Returns the noisy matrix and
/// the absolute noise level `eps`.
pub fn add_noise(m: &MeasurementMatrix, rel_level: f64, seed: u64) -> Result<(MeasurementMatrix, f64)> {
    if !(rel_level >= 0.0) || !rel_level.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise level must be nonnegative, got {rel_level}"
        )));
    }
    let eps = rel_level * m.hs_norm();
    if eps == 0.0 {
        return Ok((m.clone(), 0.0));
    }
    let mut rng = seeded_rng(seed);
    let noise: Vec<Complex64> = (0..m.entries.len())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let noise = MeasurementMatrix::from_entries(m.array, noise)?;
    let noise = noise.scaled(Complex64::new(eps / noise.hs_norm(), 0.0));
    Ok((m.add(&noise), eps))
}

/// Fields computed by a forward solve and reused by the derivative and the
/// adjoint.
#[derive(Debug, Clone)]
pub struct ForwardState {
    pub matrix: MeasurementMatrix,
    /// Total field `u_t` for every transmitter.
    pub total_fields: Vec<ComplexField>,
    /// Scattered part `u_t - g_t`, kept for warm starts.
    pub scattered: Vec<ComplexField>,
    /// GMRES steps spent.
    pub iterations: usize,
}

/// Measurement operator on a fixed grid, wavenumber and device array.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    kernel: Arc<GreenKernel>,
    array: ArrayConfig,
    sources: Vec<ComplexField>,
    opts: GmresOptions,
}

impl ForwardModel {
    pub fn new(grid: Grid2D, wavenumber: f64, array: ArrayConfig, opts: GmresOptions) -> Result<Self> {
        Self::with_kernel(Arc::new(GreenKernel::new(grid, wavenumber)?), array, opts)
    }

    pub fn with_kernel(kernel: Arc<GreenKernel>, array: ArrayConfig, opts: GmresOptions) -> Result<Self> {
        let sources = (0..array.transmitters())
            .map(|t| point_source(&kernel, array.position(t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kernel,
            array,
            sources,
            opts,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.kernel.grid()
    }

    pub fn wavenumber(&self) -> f64 {
        self.kernel.wavenumber()
    }

    pub fn kernel(&self) -> &GreenKernel {
        &self.kernel
    }

    pub fn array(&self) -> ArrayConfig {
        self.array
    }

    pub fn options(&self) -> GmresOptions {
        self.opts
    }

    pub fn set_options(&mut self, opts: GmresOptions) {
        self.opts = opts;
    }

    /// Incident (and receiver) field of device `t`.
    pub fn source(&self, t: usize) -> &ComplexField {
        &self.sources[t]
    }

    fn k2(&self) -> f64 {
        self.wavenumber() * self.wavenumber()
    }

    /// `-k^2 h^2 sum_j g_r f_j w_j` for every receiver `r`, where `w` is the
    /// field radiated into the scatterer.
    fn measure_column(&self, fw: &ComplexField) -> Vec<Complex64> {
        let h = self.grid().h();
        let c = -self.k2() * h * h;
        self.sources
            .iter()
            .map(|g| {
                let s: Complex64 = g.values().iter().zip(fw.values()).map(|(a, b)| a * b).sum();
                s * c
            })
            .collect()
    }

    fn assemble(&self, columns: Vec<Vec<Complex64>>) -> MeasurementMatrix {
        let tt = self.array.transmitters();
        let mut m = MeasurementMatrix::zeros(self.array);
        for (t, col) in columns.into_iter().enumerate() {
            for r in 0..tt {
                m.set(r, t, col[r]);
            }
        }
        m
    }

    /// Solves the scattering problem for every transmitter and measures.
    pub fn forward(&self, f: &ComplexField) -> Result<ForwardState> {
        self.forward_from(f, None)
    }

    /// [`ForwardModel::forward`] warm-started from an earlier state.
    pub fn forward_from(&self, f: &ComplexField, previous: Option<&ForwardState>) -> Result<ForwardState> {
        self.grid().check_same(&f.grid())?;
        let op = LsOperator::helmholtz(&self.kernel, f)?;
        let k2 = Complex64::new(-self.k2(), 0.0);
        let solves: Vec<(ComplexField, usize)> = (0..self.array.transmitters())
            .into_par_iter()
            .map(|t| {
                let g = &self.sources[t];
                if f.max_abs() == 0.0 {
                    return Ok((ComplexField::zeros(self.grid()), 0));
                }
                let mut rhs = self.kernel.volume_potential(&f.hadamard(g))?;
                rhs.scale(k2);
                let guess = previous.map(|p| &p.scattered[t]);
                let s = op.solve(&rhs, guess, &self.opts)?;
                Ok((s.field, s.iterations))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut scattered = Vec::with_capacity(solves.len());
        let mut iterations = 0;
        for (s, it) in solves {
            scattered.push(s);
            iterations += it;
        }
        let total_fields: Vec<ComplexField> = scattered
            .iter()
            .zip(&self.sources)
            .map(|(s, g)| s + g)
            .collect();
        let columns = total_fields
            .iter()
            .map(|u| self.measure_column(&f.hadamard(u)))
            .collect();
        Ok(ForwardState {
            matrix: self.assemble(columns),
            total_fields,
            scattered,
            iterations,
        })
    }

    /// Measurements with the total field replaced by the incident field.
    pub fn born_measure(&self, f: &ComplexField) -> Result<MeasurementMatrix> {
        self.grid().check_same(&f.grid())?;
        let columns = self
            .sources
            .iter()
            .map(|g| self.measure_column(&f.hadamard(g)))
            .collect();
        Ok(self.assemble(columns))
    }

    /// Derivative of the measurement map at `f` in direction `h`: for each
    /// transmitter solve `(I + k^2 V M_f) v = -k^2 V(h u_t)` and measure the
    /// linearized source `h u_t + f v`.
    pub fn derivative_apply(&self, f: &ComplexField, state: &ForwardState, h: &ComplexField) -> Result<MeasurementMatrix> {
        self.grid().check_same(&h.grid())?;
        let op = LsOperator::helmholtz(&self.kernel, f)?;
        let k2 = Complex64::new(-self.k2(), 0.0);
        let columns = state
            .total_fields
            .par_iter()
            .map(|u| {
                let hu = h.hadamard(u);
                if f.max_abs() == 0.0 {
                    return Ok(self.measure_column(&hu));
                }
                let mut rhs = self.kernel.volume_potential(&hu)?;
                rhs.scale(k2);
                let v = op.solve(&rhs, None, &self.opts)?.field;
                Ok(self.measure_column(&(&hu + &f.hadamard(&v))))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.assemble(columns))
    }

    /// Derivative through the reciprocity identity
    /// `N'(f)h_rt = -k^2 h^2 sum_j u_r h_j u_t`, which holds exactly for the
    /// discrete system because the kernel matrix is complex symmetric. Needs
    /// no further solves.
    pub fn derivative_apply_reciprocal(&self, state: &ForwardState, h: &ComplexField) -> Result<MeasurementMatrix> {
        self.grid().check_same(&h.grid())?;
        let hh = self.grid().h();
        let c = Complex64::new(-self.k2() * hh * hh, 0.0);
        let tt = self.array.transmitters();
        let hu: Vec<ComplexField> = state.total_fields.iter().map(|u| h.hadamard(u)).collect();
        let mut m = MeasurementMatrix::zeros(self.array);
        for r in 0..tt {
            for t in 0..tt {
                let s: Complex64 = state.total_fields[r]
                    .values()
                    .iter()
                    .zip(hu[t].values())
                    .map(|(a, b)| a * b)
                    .sum();
                m.set(r, t, s * c);
            }
        }
        Ok(m)
    }

    /// Exact adjoint of the discrete derivative with respect to the weighted
    /// Hilbert-Schmidt product and the `h^2`-weighted field product:
    /// `z = -k^2 w^2 sum_{r,t} G_rt conj(u_r u_t)`.
    ///
    /// The total fields solve the same systems whose transposes appear in the
    /// adjoint of the solve-based derivative, so no further solves are needed.
    pub fn adjoint_apply(&self, state: &ForwardState, g: &MeasurementMatrix) -> Result<ComplexField> {
        if g.size() != self.array.transmitters() {
            return Err(Error::InvalidArgument(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.array.transmitters(),
                self.array.transmitters(),
                g.size(),
                g.size()
            )));
        }
        let tt = self.array.transmitters();
        let w = self.array.weight();
        let scale = -self.k2() * w * w;
        let mut z = ComplexField::zeros(self.grid());
        // fixed order: for each transmitter t accumulate
        // a_t = sum_r conj(G_rt) u_r, then z += conj(a_t u_t)
        let mut a = vec![Complex64::new(0.0, 0.0); self.grid().len()];
        for t in 0..tt {
            a.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for r in 0..tt {
                let grt = g.get(r, t);
                if grt == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (av, ur) in a.iter_mut().zip(state.total_fields[r].values()) {
                    *av += grt.conj() * ur;
                }
            }
            for ((zv, av), ut) in z.values_mut().iter_mut().zip(&a).zip(state.total_fields[t].values()) {
                *zv += (av * ut).conj();
            }
        }
        z.scale(Complex64::new(scale, 0.0));
        Ok(z)
    }

    /// Estimate of `||N'(f)||^2` by power iteration on `N'^* N'`.
    pub fn derivative_norm_sqr(&self, state: &ForwardState, iterations: usize, seed: u64) -> Result<f64> {
        let mut x = ComplexField::random(self.grid(), seed);
        let nx = x.norm();
        x.scale(Complex64::new(1.0 / nx, 0.0));
        let mut lambda = 0.0;
        for _ in 0..iterations.max(1) {
            let y = self.adjoint_apply(state, &self.derivative_apply_reciprocal(state, &x)?)?;
            lambda = y.norm();
            if lambda == 0.0 {
                return Ok(0.0);
            }
            x = y.scaled(Complex64::new(1.0 / lambda, 0.0));
        }
        Ok(lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_phantom, PhantomKind};

    fn array(t: usize) -> ArrayConfig {
        ArrayConfig::new(t, DEFAULT_RADIUS).unwrap()
    }

    fn random_contrast(grid: Grid2D, seed: u64, amp: f64) -> ComplexField {
        let r = ComplexField::random(grid, seed);
        let mut f = ComplexField::zeros(grid);
        for i in 0..grid.n() {
            for j in 0..grid.n() {
                let [x, y] = grid.point(i, j);
                if x.hypot(y) < 0.6 {
                    f[(i, j)] = Complex64::new(amp * r[(i, j)].re.abs(), 0.0);
                }
            }
        }
        f
    }

    #[test]
    fn array_geometry() {
        let a = array(4);
        let p = a.position(1);
        assert!(p[0].abs() < 1e-15 && (p[1] - 0.9).abs() < 1e-15);
        assert!(ArrayConfig::new(4, 0.7).is_err());
        assert!(ArrayConfig::new(0, 0.9).is_err());
    }

    #[test]
    fn hs_norm_examples() {
        let a = array(4);
        assert_eq!(MeasurementMatrix::zeros(a).hs_norm(), 0.0);
        let mut id = MeasurementMatrix::zeros(a);
        for i in 0..4 {
            id.set(i, i, Complex64::new(1.0, 0.0));
        }
        let expect = 2.0 * PI * 0.9 / 2.0;
        assert!((id.hs_norm() - expect).abs() < 1e-14);
        let c = Complex64::new(-3.0, 4.0);
        assert!((id.scaled(c).hs_norm() - 5.0 * expect).abs() < 1e-13);
    }

    #[test]
    fn zero_contrast_measures_nothing() {
        let grid = Grid2D::new(32).unwrap();
        let model = ForwardModel::new(grid, 5.0, array(4), GmresOptions::default()).unwrap();
        let st = model.forward(&ComplexField::zeros(grid)).unwrap();
        assert!(st.matrix.entries().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn measurements_are_reciprocal() {
        let grid = Grid2D::new(32).unwrap();
        let model = ForwardModel::new(grid, 5.0, array(6), GmresOptions::with_tol(1e-13)).unwrap();
        let f = random_contrast(grid, 4, 0.3);
        let st = model.forward(&f).unwrap();
        assert!(st.matrix.asymmetry() < 1e-12, "{}", st.matrix.asymmetry());
    }

    #[test]
    fn derivative_forms_agree() {
        let grid = Grid2D::new(32).unwrap();
        let model = ForwardModel::new(grid, 5.0, array(4), GmresOptions::with_tol(1e-13)).unwrap();
        let f = random_contrast(grid, 1, 0.2);
        let st = model.forward(&f).unwrap();
        let h = ComplexField::random(grid, 2);
        let a = model.derivative_apply(&f, &st, &h).unwrap();
        let b = model.derivative_apply_reciprocal(&st, &h).unwrap();
        assert!(a.sub(&b).hs_norm() < 1e-10 * a.hs_norm());
    }

    #[test]
    fn derivative_is_linear_and_zero_at_zero() {
        let grid = Grid2D::new(32).unwrap();
        let model = ForwardModel::new(grid, 5.0, array(4), GmresOptions::with_tol(1e-12)).unwrap();
        let f = random_contrast(grid, 1, 0.2);
        let st = model.forward(&f).unwrap();
        let z = model.derivative_apply(&f, &st, &ComplexField::zeros(grid)).unwrap();
        assert_eq!(z.hs_norm(), 0.0);
        let h1 = ComplexField::random(grid, 5);
        let h2 = ComplexField::random(grid, 6);
        let c = Complex64::new(0.4, -2.0);
        let mut comb = h1.scaled(c);
        comb.axpy(Complex64::new(1.0, 0.0), &h2);
        let lhs = model.derivative_apply(&f, &st, &comb).unwrap();
        let rhs = model
            .derivative_apply(&f, &st, &h1)
            .unwrap()
            .scaled(c)
            .add(&model.derivative_apply(&f, &st, &h2).unwrap());
        assert!(lhs.sub(&rhs).hs_norm() < 1e-9 * lhs.hs_norm());
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let grid = Grid2D::new(32).unwrap();
        let model = ForwardModel::new(grid, 5.0, array(4), GmresOptions::default()).unwrap();
        let f = random_contrast(grid, 1, 0.2);
        let st = model.forward(&f).unwrap();
        let z = model.adjoint_apply(&st, &MeasurementMatrix::zeros(array(4))).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn adjoint_at_zero_contrast_closed_form() {
        // with f = 0 the total fields are the incident point-source fields
        let grid = Grid2D::new(16).unwrap();
        let k = 5.0;
        let model = ForwardModel::new(grid, k, array(4), GmresOptions::default()).unwrap();
        let st = model.forward(&ComplexField::zeros(grid)).unwrap();
        let mut g = MeasurementMatrix::zeros(array(4));
        let r = ComplexField::random(grid, 3);
        for (e, v) in g.entries_mut().iter_mut().zip(r.values()) {
            *e = *v;
        }
        let z = model.adjoint_apply(&st, &g).unwrap();
        let w = array(4).weight();
        let mut expect = ComplexField::zeros(grid);
        for j in 0..grid.len() {
            let mut s = Complex64::new(0.0, 0.0);
            for rr in 0..4 {
                for t in 0..4 {
                    s += g.get(rr, t) * (model.source(rr).values()[j] * model.source(t).values()[j]).conj();
                }
            }
            expect.values_mut()[j] = s * (-k * k * w * w);
        }
        assert!(crate::grid::rel_l2_error(&z, &expect).unwrap() < 1e-13);
    }

    #[test]
    fn born_measure_agrees_with_weak_limit() {
        let grid = Grid2D::new(32).unwrap();
        let model = ForwardModel::new(grid, 5.0, array(4), GmresOptions::with_tol(1e-13)).unwrap();
        let f = make_phantom(&PhantomKind::CenteredSquare, grid, 1.0).unwrap();
        let rem = |s: f64| {
            let fs = f.scaled(Complex64::new(s, 0.0));
            let n = model.forward(&fs).unwrap().matrix;
            n.sub(&model.born_measure(&fs).unwrap()).hs_norm()
        };
        let ratio = rem(0.02) / rem(0.01);
        assert!((ratio - 4.0).abs() < 0.8, "{ratio}");
    }

    #[test]
    fn noise_levels_and_determinism() {
        let a = array(4);
        let mut m = MeasurementMatrix::zeros(a);
        for (i, e) in m.entries_mut().iter_mut().enumerate() {
            *e = Complex64::new(i as f64, 1.0 - i as f64);
        }
        let (same, eps0) = add_noise(&m, 0.0, 1).unwrap();
        assert_eq!(same, m);
        assert_eq!(eps0, 0.0);
        let (noisy, eps) = add_noise(&m, 0.05, 7).unwrap();
        assert!((noisy.sub(&m).hs_norm() / m.hs_norm() - 0.05).abs() < 1e-14);
        assert!((eps - 0.05 * m.hs_norm()).abs() < 1e-14);
        let (again, _) = add_noise(&m, 0.05, 7).unwrap();
        assert_eq!(noisy, again);
        let (other, _) = add_noise(&m, 0.05, 8).unwrap();
        assert_ne!(noisy, other);
        assert!(add_noise(&m, -0.1, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let a = array(3);
        let mut m = MeasurementMatrix::zeros(a);
        for (i, e) in m.entries_mut().iter_mut().enumerate() {
            *e = Complex64::new(0.1 * i as f64, -1.0 / (1.0 + i as f64));
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        m.save_csv(&p, 10.0, 0.25).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# T=3, rho=0.9, k0=10, eps=0.25\nreceiver,transmitter,re,im\n"));
        let (back, k0, eps) = MeasurementMatrix::load_csv(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!((k0, eps), (10.0, 0.25));
    }
}

//! Schrodinger backscattering, the inverse Born approximation, shearlet
//! sparsity of its reconstructions and sparse recovery from partial data.
//!
//! Frequencies are integer pairs `(l, m)` in `[-q, q]^2`, standing for the
//! points `(l, m) / q` of `[-1, 1]^2`. The pair `(l, m)` is probed with the
//! incident plane wave of wave vector `(pi / 2) (l, m)`, so that the Born
//! term of the backscattering amplitude is the Fourier coefficient of the
//! contrast at `pi (l, m)`, the lattice of Fourier series on `[-1, 1]^2`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{dilate, seeded_rng, ComplexField, Grid2D};
use crate::helmholtz::{GmresOptions, GreenKernel, LsOperator, Solved};
use crate::shearlet::{CoefficientSet, ShearletSystem};

/// Wave vector per unit frequency index.
pub const WAVE_SCALE: f64 = PI / 2.0;

/// Wave vector `(pi / 2) (l, m)` probing the frequency pair `(l, m)`.
pub fn wave_vector(l: i64, m: i64) -> [f64; 2] {
    [WAVE_SCALE * l as f64, WAVE_SCALE * m as f64]
}

/// Total field of `Delta u + (f + k^2) u = 0` for the incident field
/// `u_inc`, with `k` the kernel wavenumber: solves `u - V(f u) = u_inc`.
pub fn schrodinger_scatter(
    kernel: &GreenKernel,
    f: &ComplexField,
    u_inc: &ComplexField,
    opts: &GmresOptions,
) -> Result<Solved> {
    f.grid().check_same(&u_inc.grid())?;
    LsOperator::new(kernel, f, Complex64::new(-1.0, 0.0))?.solve(u_inc, Some(u_inc), opts)
}

/// Plane wave `exp(i <kv, x>)` for a wave vector `kv`.
pub fn plane_wave_vector(grid: Grid2D, kv: [f64; 2]) -> ComplexField {
    ComplexField::from_fn(grid, |x, y| Complex64::from_polar(1.0, kv[0] * x + kv[1] * y))
}

/// Backscattering amplitudes `A(l, m)` on `[-q, q]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackscatterGrid {
    q: usize,
    amplitudes: Vec<Complex64>,
    failures: Vec<(i64, i64)>,
}

impl BackscatterGrid {
    pub fn zeros(q: usize) -> Self {
        let side = 2 * q + 1;
        Self {
            q,
            amplitudes: vec![Complex64::new(0.0, 0.0); side * side],
            failures: Vec::new(),
        }
    }

    /// Amplitudes in row-major order, `l` slowest.
    pub fn from_amplitudes(q: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let side = 2 * q + 1;
        if amplitudes.len() != side * side {
            return Err(Error::SizeMismatch {
                expected: (side * side) as u64,
                found: amplitudes.len() as u64,
            });
        }
        Ok(Self {
            q,
            amplitudes,
            failures: Vec::new(),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn freq_step(&self) -> f64 {
        1.0 / self.q as f64
    }

    /// Number of frequencies per axis, `2q + 1`.
    pub fn side(&self) -> usize {
        2 * self.q + 1
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Frequencies whose solve failed; their amplitude is left at zero.
    pub fn failures(&self) -> &[(i64, i64)] {
        &self.failures
    }

    fn offset(&self, l: i64, m: i64) -> usize {
        let q = self.q as i64;
        assert!(l.abs() <= q && m.abs() <= q, "frequency ({l}, {m}) outside [-{q}, {q}]^2");
        (l + q) as usize * self.side() + (m + q) as usize
    }

    pub fn get(&self, l: i64, m: i64) -> Complex64 {
        self.amplitudes[self.offset(l, m)]
    }

    pub fn set(&mut self, l: i64, m: i64, v: Complex64) {
        let o = self.offset(l, m);
        self.amplitudes[o] = v;
    }

    /// All frequency pairs in storage order.
    pub fn frequencies(&self) -> impl Iterator<Item = (i64, i64)> {
        let q = self.q as i64;
        (-q..=q).flat_map(move |l| (-q..=q).map(move |m| (l, m)))
    }

    /// `max |A(-l, -m) - conj A(l, m)| / max |A|`, zero for real contrasts in
    /// the Born limit.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let max = self.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        let defect = self
            .frequencies()
            .map(|(l, m)| (self.get(-l, -m) - self.get(l, m).conj()).norm())
            .fold(0.0, f64::max);
        defect / max
    }

    /// CSV with columns `l,m,re,im`, frequencies as points of `[-1, 1]^2`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        use std::fmt::Write as _;
        let mut s = String::from("l,m,re,im\n");
        let step = self.freq_step();
        for (l, m) in self.frequencies() {
            let a = self.get(l, m);
            let _ = writeln!(s, "{},{},{},{}", l as f64 * step, m as f64 * step, a.re, a.im);
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

fn check_q(q: usize) -> Result<()> {
    if q < 4 {
        return Err(Error::InvalidArgument(format!("frequency count q must be at least 4, got {q}")));
    }
    Ok(())
}

/// `A(l, m) = h^2 sum exp(i <kv, y>) f(y) u(y)` with `u` the total field for
/// incidence `kv = wave_vector(l, m)`, and `A(0, 0) = h^2 sum f`.
///
/// Frequencies sharing `|kv|` share one kernel. A failed solve is recorded
/// and its amplitude left at zero; more than 1% failures is an error.
pub fn backscatter_amplitude(f: &ComplexField, q: usize, opts: &GmresOptions) -> Result<BackscatterGrid> {
    check_q(q)?;
    let grid = f.grid();
    let h2 = grid.h() * grid.h();
    let mut out = BackscatterGrid::zeros(q);
    let total: Complex64 = f.values().iter().sum();
    out.set(0, 0, total * h2);
    let qi = q as i64;
    let mut shells: std::collections::BTreeMap<i64, Vec<(i64, i64)>> = Default::default();
    for l in -qi..=qi {
        for m in -qi..=qi {
            if (l, m) != (0, 0) {
                shells.entry(l * l + m * m).or_default().push((l, m));
            }
        }
    }
    let count = (2 * q + 1) * (2 * q + 1) - 1;
    let mut failures = Vec::new();
    for (r2, members) in shells {
        let kernel = GreenKernel::new(grid, WAVE_SCALE * (r2 as f64).sqrt())?;
        let results: Vec<((i64, i64), Result<Complex64>)> = members
            .par_iter()
            .map(|&(l, m)| {
                let uinc = plane_wave_vector(grid, wave_vector(l, m));
                let amp = schrodinger_scatter(&kernel, f, &uinc, opts).map(|sol| {
                    sol.field
                        .values()
                        .iter()
                        .zip(uinc.values())
                        .zip(f.values())
                        .map(|((u, e), fv)| e * fv * u)
                        .sum::<Complex64>()
                        * h2
                });
                ((l, m), amp)
            })
            .collect();
        for ((l, m), amp) in results {
            match amp {
                Ok(a) => out.set(l, m, a),
                Err(e) => {
                    log::warn!("backscatter solve at ({l}, {m}) failed: {e}");
                    failures.push((l, m));
                }
            }
        }
        if failures.len() * 100 > count {
            return Err(Error::TooManyFailures {
                failed: failures.len(),
                total: count,
            });
        }
    }
    out.failures = failures;
    Ok(out)
}

/// `e[a][l + q] = exp(i s pi l x_a)` for the cell centres `x_a` of `grid`.
fn phase_table(grid: Grid2D, q: usize, sign: f64) -> Vec<Vec<Complex64>> {
    let qi = q as i64;
    (0..grid.n())
        .map(|a| {
            let x = grid.coord(a);
            (-qi..=qi).map(|l| Complex64::from_polar(1.0, sign * PI * l as f64 * x)).collect()
        })
        .collect()
}

/// Born term of the amplitude, `h^2 sum exp(i pi <(l, m), y>) f(y)`.
pub fn born_linear_amplitude(f: &ComplexField, q: usize) -> Result<BackscatterGrid> {
    check_q(q)?;
    let grid = f.grid();
    let side = 2 * q + 1;
    let amps = forward_fourier(f, q, &phase_table(grid, q, 1.0));
    let h2 = grid.h() * grid.h();
    BackscatterGrid::from_amplitudes(q, amps.into_iter().map(|a| a * h2).collect())
        .map(|b| {
            debug_assert_eq!(b.side(), side);
            b
        })
}

/// `sum_{a,b} e[a][l] e[b][m] g(a, b)` for all `(l, m)`, separably.
fn forward_fourier(g: &ComplexField, q: usize, e: &[Vec<Complex64>]) -> Vec<Complex64> {
    let n = g.grid().n();
    let side = 2 * q + 1;
    let zero = Complex64::new(0.0, 0.0);
    // contract the second index: t[a][m] = sum_b e[b][m] g(a, b)
    let mut t = vec![zero; n * side];
    for a in 0..n {
        let row = &g.values()[a * n..(a + 1) * n];
        let ta = &mut t[a * side..(a + 1) * side];
        for (b, gv) in row.iter().enumerate() {
            if *gv == zero {
                continue;
            }
            for (tm, em) in ta.iter_mut().zip(&e[b]) {
                *tm += em * gv;
            }
        }
    }
    let mut out = vec![zero; side * side];
    for a in 0..n {
        let ta = &t[a * side..(a + 1) * side];
        for l in 0..side {
            let el = e[a][l];
            let ol = &mut out[l * side..(l + 1) * side];
            for (o, tv) in ol.iter_mut().zip(ta) {
                *o += el * tv;
            }
        }
    }
    out
}

/// `g(a, b) = sum_{l,m} e[a][l] e[b][m] c(l, m)` on an `n x n` grid.
fn inverse_fourier(c: &[Complex64], q: usize, e: &[Vec<Complex64>], grid: Grid2D) -> ComplexField {
    let n = grid.n();
    let side = 2 * q + 1;
    let zero = Complex64::new(0.0, 0.0);
    // t[a][m] = sum_l e[a][l] c(l, m)
    let mut t = vec![zero; n * side];
    for a in 0..n {
        let ta = &mut t[a * side..(a + 1) * side];
        for l in 0..side {
            let el = e[a][l];
            for (tm, cv) in ta.iter_mut().zip(&c[l * side..(l + 1) * side]) {
                *tm += el * cv;
            }
        }
    }
    let mut out = ComplexField::zeros(grid);
    let vals = out.values_mut();
    for a in 0..n {
        let ta = &t[a * side..(a + 1) * side];
        for b in 0..n {
            vals[a * n + b] = ta.iter().zip(&e[b]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// Trigonometric polynomial `(1/4) sum A(l, m) exp(-i pi <(l, m), x>)` on
/// `grid`, i.e. the truncated Fourier series whose coefficients are the
/// amplitudes. Any grid size works; finer grids zero-pad in frequency.
pub fn inverse_born_complex(b: &BackscatterGrid, grid: Grid2D) -> ComplexField {
    let mut g = inverse_fourier(b.amplitudes(), b.q(), &phase_table(grid, b.q(), -1.0), grid);
    g.scale(Complex64::new(0.25, 0.0));
    g
}

/// Inverse Born reconstruction `f_B`: real part of [`inverse_born_complex`].
pub fn inverse_born(b: &BackscatterGrid, grid: Grid2D) -> ComplexField {
    inverse_born_complex(b, grid).real_part()
}

/// Orthogonal projection of `f` onto the Fourier modes `exp(i pi <(l, m), x>)`
/// with `|l|, |m| <= q`, valid when `2q < n`.
pub fn band_limited_projection(f: &ComplexField, q: usize) -> Result<ComplexField> {
    if 2 * q >= f.grid().n() {
        return Err(Error::InvalidArgument(format!(
            "band limit q = {q} needs a grid finer than {}",
            2 * q
        )));
    }
    Ok(inverse_born_complex(&born_linear_amplitude(f, q)?, f.grid()))
}

/// One row of an N-term decay table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub n_terms: usize,
    /// `||f - f_N|| / ||f||`.
    pub err_f: f64,
    pub err_fb: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Least-squares slopes of `log err` against `log N`.
    pub slope_f: f64,
    pub slope_fb: f64,
    /// The same slopes for the squared errors.
    pub slope_f_sq: f64,
    pub slope_fb_sq: f64,
}

impl DecayReport {
    /// CSV with the errors and their squares.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("n_terms,err_f,err_fb,err_f_sq,err_fb_sq\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.n_terms,
                r.err_f,
                r.err_fb,
                r.err_f * r.err_f,
                r.err_fb * r.err_fb
            );
        }
        s
    }
}

/// Term counts `2^5, 2^6, ..., 2^(floor(log2 total) - 2)`.
pub fn decay_term_counts(total: usize) -> Vec<usize> {
    let top = (usize::BITS - 1 - total.max(1).leading_zeros()) as usize;
    (5..=top.saturating_sub(2)).map(|e| 1usize << e).collect()
}

/// Relative N-term errors of `f` for each entry of `counts`.
pub fn n_term_errors(system: &ShearletSystem, f: &ComplexField, counts: &[usize]) -> Result<Vec<f64>> {
    let coeffs = system.analyze(f)?;
    let norm = f.norm();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    counts
        .iter()
        .map(|&n| {
            let approx = system.synthesize_dual(&system.keep_largest(&coeffs, n)?)?;
            Ok((f - &approx).norm() / norm)
        })
        .collect()
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// N-term approximation errors of `f` and `f_b` over [`decay_term_counts`]
/// with their fitted log-log slopes.
pub fn sparsity_decay_report(system: &ShearletSystem, f: &ComplexField, f_b: &ComplexField) -> Result<DecayReport> {
    f.grid().check_same(&f_b.grid())?;
    let counts = decay_term_counts(system.coefficient_count());
    if counts.len() < 2 {
        return Err(Error::InvalidArgument("grid too small for a decay report".into()));
    }
    let ef = n_term_errors(system, f, &counts)?;
    let eb = n_term_errors(system, f_b, &counts)?;
    let x: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let sq = |e: &[f64]| e.iter().map(|v| v * v).collect::<Vec<_>>();
    Ok(DecayReport {
        slope_f: log_log_slope(&x, &ef),
        slope_fb: log_log_slope(&x, &eb),
        slope_f_sq: log_log_slope(&x, &sq(&ef)),
        slope_fb_sq: log_log_slope(&x, &sq(&eb)),
        rows: counts
            .iter()
            .zip(ef.iter().zip(&eb))
            .map(|(&n_terms, (&err_f, &err_fb))| DecayRow { n_terms, err_f, err_fb })
            .collect(),
    })
}

/// Fraction of the energy of the finest-scale part of `f` lying within
/// `width` cells of the marked cells of `edges`.
pub fn edge_energy_fraction(system: &ShearletSystem, f: &ComplexField, edges: &[bool], width: usize) -> Result<f64> {
    let grid = system.grid();
    grid.check_same(&f.grid())?;
    if edges.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len() as u64,
            found: edges.len() as u64,
        });
    }
    let fine = system.level_restricted_reconstruction(f, system.scales() - 1)?;
    let band = dilate(edges, grid.n(), width);
    let total: f64 = fine.values().iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::ZeroReference);
    }
    let inside: f64 = fine
        .values()
        .iter()
        .zip(&band)
        .filter(|(_, &b)| b)
        .map(|(v, _)| v.norm_sqr())
        .sum();
    Ok(inside / total)
}

/// A single measured amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSample {
    pub l: i64,
    pub m: i64,
    pub value: Complex64,
}

/// Every amplitude of `b` as a sample.
pub fn all_samples(b: &BackscatterGrid) -> Vec<FourierSample> {
    b.frequencies()
        .map(|(l, m)| FourierSample { l, m, value: b.get(l, m) })
        .collect()
}

/// `round(fraction * total)` distinct amplitudes of `b` chosen uniformly.
pub fn random_samples(b: &BackscatterGrid, fraction: f64, seed: u64) -> Result<Vec<FourierSample>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("sampling fraction must lie in [0, 1], got {fraction}")));
    }
    let all = all_samples(b);
    let count = (fraction * all.len() as f64).round() as usize;
    let mut picked = sample(&mut seeded_rng(seed), all.len(), count).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| all[i]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IstaOptions {
    /// Weight `lambda` of the `l^1` penalty.
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once `||c_{n+1} - c_n|| <= tol ||c_n||`.
    pub tol: f64,
    pub power_iterations: usize,
    /// Step `mu = step_fraction / ||K||^2`.
    pub step_fraction: f64,
    pub seed: u64,
}

impl Default for IstaOptions {
    fn default() -> Self {
        Self {
            lambda: 1e-5,
            max_iter: 1000,
            tol: 1e-10,
            power_iterations: 30,
            step_fraction: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IstaResult {
    pub field: ComplexField,
    pub coefficients: CoefficientSet,
    /// `||K c - A||^2 + 2 lambda ||c||_1` before the first and after every step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub step: f64,
}

/// The map `K` from shearlet coefficients to sampled Born amplitudes and
/// its adjoint, with unweighted inner products on both sides.
struct SampledFourier<'a> {
    system: &'a ShearletSystem,
    q: usize,
    offsets: Vec<usize>,
    fwd: Vec<Vec<Complex64>>,
    bwd: Vec<Vec<Complex64>>,
}

impl<'a> SampledFourier<'a> {
    fn new(system: &'a ShearletSystem, samples: &[FourierSample]) -> Result<Self> {
        let grid = system.grid();
        let q = samples.iter().map(|s| s.l.unsigned_abs().max(s.m.unsigned_abs())).max().unwrap_or(0) as usize;
        let q = q.max(1);
        let side = (2 * q + 1) as i64;
        let offsets = samples
            .iter()
            .map(|s| ((s.l + q as i64) * side + s.m + q as i64) as usize)
            .collect();
        Ok(Self {
            system,
            q,
            offsets,
            fwd: phase_table(grid, q, 1.0),
            bwd: phase_table(grid, q, -1.0),
        })
    }

    fn h2(&self) -> f64 {
        let h = self.system.grid().h();
        h * h
    }

    fn apply(&self, c: &CoefficientSet) -> Result<Vec<Complex64>> {
        let g = self.system.synthesize_dual(c)?;
        let full = forward_fourier(&g, self.q, &self.fwd);
        let h2 = self.h2();
        Ok(self.offsets.iter().map(|&o| full[o] * h2).collect())
    }

    fn adjoint(&self, a: &[Complex64]) -> Result<CoefficientSet> {
        let side = 2 * self.q + 1;
        let mut full = vec![Complex64::new(0.0, 0.0); side * side];
        for (&o, v) in self.offsets.iter().zip(a) {
            full[o] += v;
        }
        let mut g = inverse_fourier(&full, self.q, &self.bwd, self.system.grid());
        g.scale(Complex64::new(self.h2(), 0.0));
        self.system.synthesize_dual_adjoint(&g)
    }
}

fn residual_sqr(kc: &[Complex64], data: &[Complex64]) -> f64 {
    kc.iter().zip(data).map(|(a, b)| (a - b).norm_sqr()).sum()
}

/// Sparse shearlet reconstruction from sampled Born amplitudes by iterative
/// soft thresholding on `||K c - A||^2 + 2 lambda ||c||_1`, where `K` samples
/// the Born amplitude of the dual-frame synthesis of `c`. Returns the
/// synthesized field of the final coefficients.
///
/// Five consecutive increases of the objective abort with
/// [`Error::Diverged`].
pub fn partial_data_reconstruct(
    samples: &[FourierSample],
    system: &ShearletSystem,
    opts: &IstaOptions,
) -> Result<IstaResult> {
    if !(opts.lambda >= 0.0) || !opts.lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {}", opts.lambda)));
    }
    if !(opts.step_fraction > 0.0 && opts.step_fraction <= 1.0) || opts.power_iterations == 0 {
        return Err(Error::InvalidArgument(
            "ISTA needs a step fraction in (0, 1] and at least one power iteration".into(),
        ));
    }
    let zero_result = || IstaResult {
        field: ComplexField::zeros(system.grid()),
        coefficients: system.zeros(),
        objective: vec![0.0],
        iterations: 0,
        step: 0.0,
    };
    if samples.is_empty() {
        return Ok(zero_result());
    }
    let op = SampledFourier::new(system, samples)?;
    let data: Vec<Complex64> = samples.iter().map(|s| s.value).collect();

    // power iteration for ||K||^2
    let mut v = system.analyze(&ComplexField::random(system.grid(), opts.seed))?;
    let mut norm2 = 0.0;
    for _ in 0..opts.power_iterations {
        let nv = v.norm_sqr().sqrt();
        if nv == 0.0 {
            break;
        }
        v = v.map(|x| x / nv);
        v = op.adjoint(&op.apply(&v)?)?;
        norm2 = v.norm_sqr().sqrt();
    }
    if norm2 == 0.0 {
        return Ok(zero_result());
    }
    let mu = opts.step_fraction / norm2;
    let theta = opts.lambda * mu;

    let mut c = system.zeros();
    let mut kc = vec![Complex64::new(0.0, 0.0); data.len()];
    let mut objective = vec![residual_sqr(&kc, &data)];
    let mut increases = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let res: Vec<Complex64> = kc.iter().zip(&data).map(|(a, b)| a - b).collect();
        let grad = op.adjoint(&res)?;
        let mut next = c.clone();
        next.axpy(Complex64::new(-mu, 0.0), &grad);
        let next = next.soft_threshold(theta)?;
        let mut diff = next.clone();
        diff.axpy(Complex64::new(-1.0, 0.0), &c);
        let change = diff.norm_sqr().sqrt();
        let size = c.norm_sqr().sqrt();
        c = next;
        kc = op.apply(&c)?;
        iterations += 1;
        let obj = residual_sqr(&kc, &data) + 2.0 * opts.lambda * c.l1_norm();
        if obj > *objective.last().expect("nonempty") {
            increases += 1;
            if increases >= 5 {
                return Err(Error::Diverged(iterations));
            }
        } else {
            increases = 0;
        }
        objective.push(obj);
        if size > 0.0 && change <= opts.tol * size {
            break;
        }
    }
    Ok(IstaResult {
        field: system.synthesize_dual(&c)?,
        coefficients: c,
        objective,
        iterations,
        step: mu,
    })
}

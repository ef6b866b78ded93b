//! Thresholded Landweber reconstructions with Barzilai-Borwein steps and
//! discrepancy stopping.
//!
//! Each step is a forward-backward update for
//! `1/2 ||N(f) - N_eps||_HS^2 + (alpha/p) P(f)`: a gradient step on the data
//! term followed by the proximal map of the penalty, applied either to the
//! shearlet coefficients of the update (then synthesized with the dual frame)
//! or directly to the field values.

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{rel_l2_error, ComplexField};
use crate::measurement::{ForwardModel, ForwardState, MeasurementMatrix};
use crate::shearlet::{soft_shrink, CoefficientSet, ShearletSystem};

/// Step-size clamp for the Barzilai-Borwein rule.
pub const MU_MIN: f64 = 1e-6;
pub const MU_MAX: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    /// `l^p` penalty on shearlet coefficients.
    Shearlet,
    /// `L^p` penalty on the field values.
    DirectLp,
    /// Plain Landweber iteration.
    None,
}

impl RegularizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegularizerKind::Shearlet => "shearlet",
            RegularizerKind::DirectLp => "l1",
            RegularizerKind::None => "none",
        }
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shearlet" => Ok(RegularizerKind::Shearlet),
            "l1" | "direct" | "direct-lp" => Ok(RegularizerKind::DirectLp),
            "none" => Ok(RegularizerKind::None),
            other => Err(Error::Config(format!("unknown regularizer '{other}'"))),
        }
    }
}

/// A penalty with its weight `alpha` and exponent `p`.
#[derive(Debug, Clone)]
pub enum Regularizer {
    Shearlet {
        system: Arc<ShearletSystem>,
        p: f64,
        alpha: f64,
    },
    Direct {
        p: f64,
        alpha: f64,
    },
    None,
}

impl Regularizer {
    pub fn shearlet(system: Arc<ShearletSystem>, p: f64, alpha: f64) -> Result<Self> {
        check_p(p)?;
        check_alpha(alpha)?;
        Ok(Regularizer::Shearlet { system, p, alpha })
    }

    pub fn direct(p: f64, alpha: f64) -> Result<Self> {
        check_p(p)?;
        check_alpha(alpha)?;
        Ok(Regularizer::Direct { p, alpha })
    }

    pub fn kind(&self) -> RegularizerKind {
        match self {
            Regularizer::Shearlet { .. } => RegularizerKind::Shearlet,
            Regularizer::Direct { .. } => RegularizerKind::DirectLp,
            Regularizer::None => RegularizerKind::None,
        }
    }

    /// `(alpha/p) P(f)` with `P` the `h^2`-weighted sum of `|.|^p` over
    /// shearlet coefficients or field values.
    pub fn penalty(&self, f: &ComplexField) -> Result<f64> {
        let h2 = f.grid().h() * f.grid().h();
        Ok(match self {
            Regularizer::Shearlet { system, p, alpha } => {
                let c = system.analyze(f)?;
                alpha / p * h2 * c.iter().map(|v| v.norm().powf(*p)).sum::<f64>()
            }
            Regularizer::Direct { p, alpha } => {
                alpha / p * h2 * f.values().iter().map(|v| v.norm().powf(*p)).sum::<f64>()
            }
            Regularizer::None => 0.0,
        })
    }

    /// One forward-backward step from `f` along `-grad` with step `mu`.
    pub fn step(&self, f: &ComplexField, grad: &ComplexField, mu: f64) -> Result<ComplexField> {
        match self {
            Regularizer::Shearlet { system, p, alpha } => landweber_step_shearlet(f, grad, mu, *alpha, *p, system),
            Regularizer::Direct { p, alpha } => landweber_step_direct(f, grad, mu, *alpha, *p),
            Regularizer::None => landweber_step_direct(f, grad, mu, 0.0, 1.0),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [1, 2], got {p}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be nonnegative, got {alpha}")));
    }
    Ok(())
}

/// Proximal map of `theta/p |x|^p`: the solution of
/// `x + theta |x|^(p-1) sign(x) = b`, applied to the modulus of complex `b`.
pub fn prox_lp(b: Complex64, theta: f64, p: f64) -> Result<Complex64> {
    check_p(p)?;
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {theta}")));
    }
    Ok(prox_lp_unchecked(b, theta, p))
}

fn prox_lp_unchecked(b: Complex64, theta: f64, p: f64) -> Complex64 {
    if theta == 0.0 {
        return b;
    }
    if p == 1.0 {
        return soft_shrink(b, theta);
    }
    if p == 2.0 {
        return b / (1.0 + theta);
    }
    let m = b.norm();
    if m == 0.0 {
        return b;
    }
    // x + theta x^(p-1) is increasing on [0, m] and exceeds m at x = m;
    // bisect to full precision since the root can sit very close to 0
    let (mut lo, mut hi) = (0.0, m);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid + theta * mid.powf(p - 1.0) > m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    b * (0.5 * (lo + hi) / m)
}

/// Applies [`prox_lp`] to every coefficient.
pub fn prox_coefficients(c: &CoefficientSet, theta: f64, p: f64) -> Result<CoefficientSet> {
    check_p(p)?;
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {theta}")));
    }
    Ok(c.map(|v| prox_lp_unchecked(v, theta, p)))
}

/// `T~* prox_{alpha mu, p} T (f - mu grad)`.
pub fn landweber_step_shearlet(
    f: &ComplexField,
    grad: &ComplexField,
    mu: f64,
    alpha: f64,
    p: f64,
    system: &ShearletSystem,
) -> Result<ComplexField> {
    let mut g = f.clone();
    g.axpy(Complex64::new(-mu, 0.0), grad);
    let c = system.analyze(&g)?;
    let c = prox_coefficients(&c, alpha * mu, p)?;
    system.synthesize_dual(&c)
}

/// `prox_{alpha mu, p} (f - mu grad)` applied to the field values.
pub fn landweber_step_direct(f: &ComplexField, grad: &ComplexField, mu: f64, alpha: f64, p: f64) -> Result<ComplexField> {
    check_p(p)?;
    let theta = alpha * mu;
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {theta}")));
    }
    f.grid().check_same(&grad.grid())?;
    let values = f
        .values()
        .iter()
        .zip(grad.values())
        .map(|(a, g)| prox_lp_unchecked(a - mu * g, theta, p))
        .collect();
    ComplexField::from_values(f.grid(), values)
}

/// Barzilai-Borwein step `<df, df> / Re <df, dg>`, clamped to
/// `[MU_MIN, MU_MAX]`; a nonpositive denominator keeps `previous`.
pub fn bb_stepsize(df: &ComplexField, dg: &ComplexField, previous: f64) -> f64 {
    let num = df.inner(df).re;
    let den = df.inner(dg).re;
    if !(den > 0.0) || !num.is_finite() {
        return previous;
    }
    (num / den).clamp(MU_MIN, MU_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// Discrepancy factor.
    pub tau: f64,
    pub max_iter: usize,
    /// Power iterations for the initial step `1/||N'(0)||^2`.
    pub power_iterations: usize,
    /// Use this step throughout instead of Barzilai-Borwein.
    pub fixed_step: Option<f64>,
    /// Project every iterate onto real nonnegative fields.
    pub real_projection: bool,
    /// Seed for the power-iteration start vector.
    pub seed: u64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            tau: 1.6,
            max_iter: 500,
            power_iterations: 5,
            fixed_step: None,
            real_projection: false,
            seed: 0,
        }
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual_hs: f64,
    /// Relative error against the true contrast, `NaN` when unknown.
    pub rel_error: f64,
    pub mu: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub field: ComplexField,
    pub history: Vec<IterationRecord>,
    /// Number of update steps taken.
    pub iterations: usize,
    pub final_residual: f64,
    /// `true` when the discrepancy rule stopped the iteration.
    pub converged: bool,
    /// Set when the iteration cap was reached; `field` is then the iterate
    /// with the smallest residual.
    pub warning: Option<String>,
}

impl InversionResult {
    /// History as CSV with header `iter,residual_hs,rel_error,mu,objective`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,residual_hs,rel_error,mu,objective\n");
        for r in &self.history {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                r.iter, r.residual_hs, r.rel_error, r.mu, r.objective
            ));
        }
        s
    }
}

/// Runs the regularized Landweber iteration from `f0 = 0` until
/// `||N(f_n) - data||_HS <= tau eps` or the iteration cap.
///
/// The discrepancy is checked before every step, so `eps` large enough gives
/// back the zero field without any step. With `eps = 0` the iteration runs
/// to the cap.
pub fn run_inversion(
    model: &ForwardModel,
    data: &MeasurementMatrix,
    eps: f64,
    reg: &Regularizer,
    opts: &InversionOptions,
    truth: Option<&ComplexField>,
) -> Result<InversionResult> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {eps}")));
    }
    if !(opts.tau >= 1.0) {
        return Err(Error::InvalidArgument(format!("tau must be at least 1, got {}", opts.tau)));
    }
    let grid = model.grid();
    let rel = |f: &ComplexField| match truth {
        Some(t) => rel_l2_error(f, t).unwrap_or(f64::NAN),
        None => f64::NAN,
    };
    let mut f = ComplexField::zeros(grid);
    let mut state = model.forward(&f)?;
    let mut residual = state.matrix.sub(data);
    let mut res_norm = residual.hs_norm();
    let mut mu = match opts.fixed_step {
        Some(m) => m,
        None => initial_step(model, &state, opts)?,
    };
    let mut history = vec![IterationRecord {
        iter: 0,
        residual_hs: res_norm,
        rel_error: rel(&f),
        mu,
        objective: 0.5 * res_norm * res_norm + reg.penalty(&f)?,
    }];
    let mut best = (res_norm, f.clone());
    let mut prev: Option<(ComplexField, ComplexField)> = None;
    let mut iterations = 0;
    let target = opts.tau * eps;
    while res_norm > target {
        if iterations >= opts.max_iter {
            log::warn!(
                "iteration cap {} reached with residual {:.3e} > {:.3e}",
                opts.max_iter,
                res_norm,
                target
            );
            return Ok(InversionResult {
                field: best.1,
                history,
                iterations,
                final_residual: best.0,
                converged: false,
                warning: Some(format!(
                    "discrepancy not reached after {} iterations (residual {:.3e}, target {:.3e})",
                    opts.max_iter, res_norm, target
                )),
            });
        }
        let grad = model.adjoint_apply(&state, &residual)?;
        if let (Some((f_prev, g_prev)), None) = (&prev, opts.fixed_step) {
            mu = bb_stepsize(&(&f - f_prev), &(&grad - g_prev), mu);
        }
        let mut next = reg.step(&f, &grad, mu)?;
        if opts.real_projection {
            for v in next.values_mut() {
                *v = Complex64::new(v.re.max(0.0), 0.0);
            }
        }
        prev = Some((f, grad));
        f = next;
        state = model.forward_from(&f, Some(&state))?;
        residual = state.matrix.sub(data);
        res_norm = residual.hs_norm();
        iterations += 1;
        history.push(IterationRecord {
            iter: iterations,
            residual_hs: res_norm,
            rel_error: rel(&f),
            mu,
            objective: 0.5 * res_norm * res_norm + reg.penalty(&f)?,
        });
        if res_norm < best.0 {
            best = (res_norm, f.clone());
        }
    }
    Ok(InversionResult {
        field: f,
        history,
        iterations,
        final_residual: res_norm,
        converged: true,
        warning: None,
    })
}

fn initial_step(model: &ForwardModel, state: &ForwardState, opts: &InversionOptions) -> Result<f64> {
    let norm2 = model.derivative_norm_sqr(state, opts.power_iterations, opts.seed)?;
    if !(norm2 > 0.0) {
        return Ok(1.0);
    }
    Ok((1.0 / norm2).clamp(MU_MIN, MU_MAX))
}

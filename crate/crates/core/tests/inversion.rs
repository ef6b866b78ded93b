use std::sync::Arc;

use num_complex::Complex64;
use shearscat::experiment::{ExperimentConfig, Problem};
use shearscat::grid::{make_phantom, rel_l2_error, ComplexField, Grid2D, PhantomKind};
use shearscat::helmholtz::GmresOptions;
use shearscat::inversion::{
    landweber_step_direct, landweber_step_shearlet, run_inversion, InversionOptions, Regularizer, RegularizerKind,
};
use shearscat::measurement::{add_noise, ArrayConfig, ForwardModel};
use shearscat::ShearletSystem;

fn small_model() -> (ForwardModel, ComplexField) {
    let grid = Grid2D::new(32).unwrap();
    let model = ForwardModel::new(grid, 5.0, ArrayConfig::new(6, 0.9).unwrap(), GmresOptions::with_tol(1e-10)).unwrap();
    let f = make_phantom(&PhantomKind::CenteredSquare, grid, 0.1).unwrap();
    (model, f)
}

#[test]
fn huge_noise_level_stops_at_iteration_zero() {
    let (model, f) = small_model();
    let data = model.forward(&f).unwrap().matrix;
    let eps = data.hs_norm();
    let res = run_inversion(&model, &data, eps, &Regularizer::None, &InversionOptions::default(), Some(&f)).unwrap();
    assert_eq!(res.iterations, 0);
    assert!(res.converged);
    assert_eq!(res.field.max_abs(), 0.0);
    assert_eq!(res.history.len(), 1);
}

#[test]
fn exact_solution_is_a_fixed_point() {
    let (model, f) = small_model();
    let data = model.forward(&f).unwrap().matrix;
    let state = model.forward(&f).unwrap();
    let grad = model.adjoint_apply(&state, &state.matrix.sub(&data)).unwrap();
    assert_eq!(grad.max_abs(), 0.0);
    let system = ShearletSystem::new(model.grid(), 2).unwrap();
    let next = landweber_step_shearlet(&f, &grad, 0.5, 0.0, 1.0, &system).unwrap();
    assert!(rel_l2_error(&next, &f).unwrap() < 1e-12);
    let next = landweber_step_direct(&f, &grad, 0.5, 0.0, 1.0).unwrap();
    assert_eq!(next, f);
}

#[test]
fn first_step_matches_hand_assembled_composition() {
    let (model, f) = small_model();
    let data = model.forward(&f).unwrap().matrix;
    let zero = ComplexField::zeros(model.grid());
    let state = model.forward(&zero).unwrap();
    let grad = model.adjoint_apply(&state, &state.matrix.sub(&data)).unwrap();
    let system = ShearletSystem::new(model.grid(), 2).unwrap();
    let mu = 0.37;
    let step = landweber_step_shearlet(&zero, &grad, mu, 0.0, 1.0, &system).unwrap();
    // -mu T~* T grad, assembled from the transform primitives
    let coeffs = system.analyze(&grad.scaled(Complex64::new(-mu, 0.0))).unwrap();
    let expect = system.synthesize_dual(&coeffs).unwrap();
    assert!(rel_l2_error(&step, &expect).unwrap() < 1e-12);
    let direct = landweber_step_direct(&zero, &grad, mu, 0.0, 1.0).unwrap();
    assert!(rel_l2_error(&direct, &step).unwrap() < 1e-10);
}

#[test]
fn discrepancy_termination_guarantees_the_residual_bound() {
    let (model, f) = small_model();
    let (data, eps) = add_noise(&model.forward(&f).unwrap().matrix, 0.05, 3).unwrap();
    let system = Arc::new(ShearletSystem::new(model.grid(), 2).unwrap());
    for reg in [
        Regularizer::shearlet(system, 1.0, 1e-3).unwrap(),
        Regularizer::direct(1.5, 1e-3).unwrap(),
        Regularizer::None,
    ] {
        let opts = InversionOptions::default();
        let res = run_inversion(&model, &data, eps, &reg, &opts, Some(&f)).unwrap();
        assert!(res.converged, "{:?}", reg.kind());
        assert!(res.final_residual <= opts.tau * eps);
        let last = res.history.last().unwrap();
        assert_eq!(last.residual_hs, res.final_residual);
        assert_eq!(res.history.len(), res.iterations + 1);
    }
}

#[test]
fn iteration_cap_returns_best_iterate_with_warning() {
    let (model, f) = small_model();
    let data = model.forward(&f).unwrap().matrix;
    let opts = InversionOptions {
        max_iter: 3,
        ..InversionOptions::default()
    };
    let res = run_inversion(&model, &data, 1e-12, &Regularizer::None, &opts, Some(&f)).unwrap();
    assert!(!res.converged);
    assert!(res.warning.is_some());
    assert_eq!(res.iterations, 3);
    let best = res.history.iter().map(|h| h.residual_hs).fold(f64::INFINITY, f64::min);
    assert_eq!(res.final_residual, best);
}

#[test]
fn desk_problem_small_fixed_step_descends() {
    // n = 128, T = 8, k0 = 10, exact data of the desk phantom
    let cfg = ExperimentConfig::default();
    let problem = Problem::new(&cfg).unwrap();
    let system = Arc::new(ShearletSystem::new(problem.model.grid(), cfg.scales).unwrap());
    let state = problem.model.forward(&ComplexField::zeros(problem.model.grid())).unwrap();
    let norm2 = problem.model.derivative_norm_sqr(&state, 10, 0).unwrap();
    let mu = 0.5 / norm2;
    let opts = InversionOptions {
        max_iter: 10,
        fixed_step: Some(mu),
        ..InversionOptions::default()
    };
    let alpha = cfg.alpha0.shearlet * 0.02;
    for reg in [Regularizer::None, Regularizer::shearlet(system, 1.0, alpha).unwrap()] {
        let res = run_inversion(&problem.model, &problem.exact, 0.0, &reg, &opts, Some(&problem.truth)).unwrap();
        assert_eq!(res.history.len(), 11);
        for w in res.history.windows(2) {
            assert!(w[1].objective <= w[0].objective, "{:?}: objective {} -> {}", reg.kind(), w[0].objective, w[1].objective);
        }
        if reg.kind() == RegularizerKind::None {
            for w in res.history[..6].windows(2) {
                assert!(w[1].residual_hs <= w[0].residual_hs);
            }
        }
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let (model, f) = small_model();
    let (data, eps) = add_noise(&model.forward(&f).unwrap().matrix, 0.02, 9).unwrap();
    let reg = Regularizer::direct(1.0, 2e-4).unwrap();
    let a = run_inversion(&model, &data, eps, &reg, &InversionOptions::default(), Some(&f)).unwrap();
    let b = run_inversion(&model, &data, eps, &reg, &InversionOptions::default(), Some(&f)).unwrap();
    assert_eq!(a.field, b.field);
    assert_eq!(a.history_csv(), b.history_csv());
}

use num_complex::Complex64;
use proptest::prelude::*;
use shearscat::experiment::{ExperimentConfig, Problem};
use shearscat::grid::{make_phantom, ComplexField, Grid2D, PhantomKind};
use shearscat::io::{field_file_len, load_field, save_field, sidecar_path};
use shearscat::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn field_files_round_trip_bit_exactly(exp in 4u32..8, re in -1e6f64..1e6, im in -1e-6f64..1e-6, seed in 0u64..1000) {
        let grid = Grid2D::new(1 << exp).unwrap();
        let mut f = ComplexField::random(grid, seed);
        f.values_mut()[0] = Complex64::new(re, im);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ssf");
        save_field(&path, &f).unwrap();
        prop_assert_eq!(std::fs::metadata(&path).unwrap().len(), field_file_len(grid.n()));
        prop_assert_eq!(load_field(&path).unwrap(), f);
    }
}

#[test]
fn sidecar_disagreement_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.ssf");
    save_field(&path, &ComplexField::zeros(Grid2D::new(16).unwrap())).unwrap();
    std::fs::write(sidecar_path(&path), r#"{"n": 32, "domain": [-1.0, 1.0]}"#).unwrap();
    assert!(matches!(load_field(&path), Err(Error::Format(_))));
}

#[test]
fn config_file_with_custom_mask_builds_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid2D::new(32).unwrap();
    let mask = make_phantom(&PhantomKind::CenteredSquare, grid, 1.0).unwrap();
    let mask_path = dir.path().join("mask.ssf");
    save_field(&mask_path, &mask).unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let text = format!(
        r#"{{ "gridN": 32, "scales": 2, "wavenumber": 4, "transmitters": 4,
              "phantom": {{ "kind": "custom-mask", "amplitude": 0.3, "background": 0, "mask": {:?} }} }}"#,
        mask_path.to_str().unwrap()
    );
    std::fs::write(&cfg_path, text).unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.grid_n, 32);
    let problem = Problem::new(&cfg).unwrap();
    assert_eq!(problem.truth, mask.scaled(Complex64::new(0.3, 0.0)));
    assert_eq!(problem.exact.size(), 4);
}

#[test]
fn config_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{ "gridN": 48 }"#).unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err().to_string();
    assert!(err.contains("48"), "{err}");
    assert!(ExperimentConfig::load(dir.path().join("missing.json")).is_err());
}

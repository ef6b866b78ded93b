use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use shearscat::born::{backscatter_amplitude, inverse_born, inverse_born_complex, sparsity_decay_report};
use shearscat::experiment::{run_benchmark, ExperimentConfig, Problem};
use shearscat::grid::ComplexField;
use shearscat::helmholtz::GmresOptions;
use shearscat::inversion::{run_inversion, RegularizerKind};
use shearscat::io::{save_field, save_field_pgm};
use shearscat::measurement::{add_noise, MeasurementMatrix};
use shearscat::{rel_l2_error, Grid2D, ShearletSystem};

#[derive(Parser, Debug)]
#[command(name = "shearscat", version, about = "Shearlet-regularized inverse medium scattering")]
struct Cli {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a phantom to a field file and a PGM image.
    Phantom(PhantomArgs),
    /// Simulate (noisy) multistatic data for a phantom.
    Forward(ForwardArgs),
    /// Reconstruct a contrast from multistatic data.
    Invert(InvertArgs),
    /// Backscattering amplitudes and the inverse Born reconstruction.
    Born(BornArgs),
    /// N-term shearlet approximation errors of a phantom and its Born image.
    Sparsity(BornArgs),
    /// Every regularizer at every noise level of the config.
    Benchmark,
}

#[derive(Args, Debug, Clone)]
struct PhantomArgs {
    /// cartoon-blob, centered-square or custom-mask.
    #[arg(long)]
    phantom: Option<String>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Height of the smooth background bump.
    #[arg(long)]
    background: Option<f64>,
    /// Mask field file for custom-mask.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    grid_n: Option<usize>,
}

#[derive(Args, Debug)]
struct ForwardArgs {
    #[command(flatten)]
    phantom: PhantomArgs,
    #[arg(long)]
    transmitters: Option<usize>,
    #[arg(long)]
    wavenumber: Option<f64>,
    /// Relative noise level of the written data.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

#[derive(Args, Debug)]
struct InvertArgs {
    #[command(flatten)]
    phantom: PhantomArgs,
    /// shearlet, l1 or none.
    #[arg(long, default_value = "shearlet")]
    reg: String,
    #[arg(long)]
    p: Option<f64>,
    /// Penalty weight per unit relative noise; defaults to the config value.
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Relative noise level used to synthesize data.
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    /// Measurement CSV written by `forward`; synthesized from the phantom if absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    scales: Option<usize>,
    #[arg(long)]
    transmitters: Option<usize>,
    #[arg(long)]
    wavenumber: Option<f64>,
    #[arg(long)]
    maxiter: Option<usize>,
    /// Project iterates onto real nonnegative values.
    #[arg(long)]
    real_projection: bool,
}

#[derive(Args, Debug)]
struct BornArgs {
    #[command(flatten)]
    phantom: PhantomArgs,
    /// Frequencies per unit: amplitudes on `[-1, 1]^2` with step `1/q`.
    #[arg(long, default_value_t = 32)]
    freq_q: usize,
    /// Grid of the scattering solves (defaults to the phantom grid).
    #[arg(long)]
    scatter_n: Option<usize>,
    #[arg(long)]
    scales: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

fn apply_phantom_args(cfg: &mut ExperimentConfig, a: &PhantomArgs) {
    if let Some(v) = &a.phantom {
        cfg.phantom.kind = v.clone();
    }
    if let Some(v) = a.amplitude {
        cfg.phantom.amplitude = v;
    }
    if let Some(v) = a.background {
        cfg.phantom.background = v;
    }
    if let Some(v) = &a.mask {
        cfg.phantom.mask = Some(v.clone());
    }
    if let Some(v) = a.grid_n {
        cfg.grid_n = v;
    }
}

fn write_field(dir: &Path, stem: &str, f: &ComplexField) -> Result<()> {
    save_field(dir.join(format!("{stem}.ssf")), f)?;
    save_field_pgm(dir.join(format!("{stem}.pgm")), f)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out_dir {
        cfg.out_dir = o.clone();
    }
    let start = Instant::now();
    match &cli.command {
        Command::Phantom(a) => phantom(&mut cfg, a)?,
        Command::Forward(a) => forward(&mut cfg, a)?,
        Command::Invert(a) => invert(&mut cfg, a)?,
        Command::Born(a) => born(&mut cfg, a, true)?,
        Command::Sparsity(a) => born(&mut cfg, a, false)?,
        Command::Benchmark => {
            cfg.validate()?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            std::fs::write(cfg.out_dir.join("config.json"), cfg.to_json()?)?;
            let table = run_benchmark(&cfg, true)?;
            print!("{}", table.to_csv());
        }
    }
    info!("done in {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn phantom(cfg: &mut ExperimentConfig, a: &PhantomArgs) -> Result<()> {
    apply_phantom_args(cfg, a);
    cfg.validate()?;
    let f = cfg.phantom.phantom()?.render(cfg.grid()?)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_field(&cfg.out_dir, "phantom", &f)?;
    info!("wrote {}", cfg.out_dir.join("phantom.ssf").display());
    Ok(())
}

fn forward(cfg: &mut ExperimentConfig, a: &ForwardArgs) -> Result<()> {
    apply_phantom_args(cfg, &a.phantom);
    if let Some(v) = a.transmitters {
        cfg.transmitters = v;
    }
    if let Some(v) = a.wavenumber {
        cfg.wavenumber = v;
    }
    cfg.validate()?;
    let model = cfg.forward_model()?;
    let f = cfg.phantom.phantom()?.render(model.grid())?;
    let exact = model.forward(&f)?.matrix;
    let (data, eps) = add_noise(&exact, a.noise, cfg.seed)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("measurements.csv");
    data.save_csv(&path, cfg.wavenumber, eps)?;
    info!(
        "wrote {} ({} x {}, asymmetry {:.2e})",
        path.display(),
        data.size(),
        data.size(),
        exact.asymmetry()
    );
    Ok(())
}

fn invert(cfg: &mut ExperimentConfig, a: &InvertArgs) -> Result<()> {
    apply_phantom_args(cfg, &a.phantom);
    let kind: RegularizerKind = a.reg.parse()?;
    if let Some(v) = a.p {
        cfg.p = v;
    }
    if let Some(v) = a.alpha0 {
        cfg.alpha0.set(kind, v);
    }
    if let Some(v) = a.tau {
        cfg.tau = v;
    }
    if let Some(v) = a.scales {
        cfg.scales = v;
    }
    if let Some(v) = a.transmitters {
        cfg.transmitters = v;
    }
    if let Some(v) = a.wavenumber {
        cfg.wavenumber = v;
    }
    if let Some(v) = a.maxiter {
        cfg.max_iter = v;
    }
    cfg.real_projection |= a.real_projection;
    cfg.regularizers = vec![kind.name().into()];
    cfg.noise_levels = vec![a.noise];
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;

    let mut problem = Problem::new(cfg)?;
    let (data, eps, delta, truth) = match &a.data {
        Some(path) => {
            let (m, k0, eps): (MeasurementMatrix, f64, f64) = MeasurementMatrix::load_csv(path)?;
            if m.size() != cfg.transmitters || k0 != cfg.wavenumber {
                bail!(
                    "{} holds {} transmitters at k0 = {k0}, the config has {} at k0 = {}",
                    path.display(),
                    m.size(),
                    cfg.transmitters,
                    cfg.wavenumber
                );
            }
            let delta = if m.hs_norm() > 0.0 { eps / m.hs_norm() } else { 0.0 };
            (m, eps, delta, None)
        }
        None => {
            let (m, eps) = problem.data(a.noise)?;
            (m, eps, a.noise, Some(problem.truth.clone()))
        }
    };
    let reg = problem.regularizer(kind, cfg.alpha0.get(kind), delta)?;
    let res = run_inversion(&problem.model, &data, eps, &reg, &cfg.inversion_options(), truth.as_ref())?;
    if let Some(w) = &res.warning {
        log::warn!("{w}");
    }
    std::fs::write(cfg.out_dir.join("history.csv"), res.history_csv())?;
    write_field(&cfg.out_dir, "reconstruction", &res.field)?;
    match &truth {
        Some(t) => info!(
            "{}: {} iterations, residual {:.3e} (target {:.3e}), relative error {:.4}",
            kind.name(),
            res.iterations,
            res.final_residual,
            cfg.tau * eps,
            rel_l2_error(&res.field, t)?
        ),
        None => info!(
            "{}: {} iterations, residual {:.3e} (target {:.3e})",
            kind.name(),
            res.iterations,
            res.final_residual,
            cfg.tau * eps
        ),
    }
    Ok(())
}

fn born(cfg: &mut ExperimentConfig, a: &BornArgs, full_output: bool) -> Result<()> {
    if a.phantom.phantom.is_none() {
        cfg.phantom.kind = "cartoon-blob".into();
        cfg.phantom.background = 0.0;
        cfg.phantom.amplitude = 1.0;
    }
    apply_phantom_args(cfg, &a.phantom);
    if let Some(v) = a.scales {
        cfg.scales = v;
    }
    cfg.validate()?;
    let grid = cfg.grid()?;
    let phantom = cfg.phantom.phantom()?;
    let scatter_grid = match a.scatter_n {
        Some(n) => Grid2D::new(n)?,
        None => grid,
    };
    let opts = GmresOptions {
        tol: a.tol,
        ..cfg.solver.gmres()
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    let f_scatter = phantom.render(scatter_grid)?;
    let amps = backscatter_amplitude(&f_scatter, a.freq_q, &opts)?;
    if !amps.failures().is_empty() {
        log::warn!("{} frequencies failed to solve", amps.failures().len());
    }
    let f = phantom.render(grid)?;
    let fb = inverse_born(&amps, grid);
    let imag = inverse_born_complex(&amps, grid).values().iter().map(|v| v.im * v.im).sum::<f64>().sqrt() * grid.h();
    info!(
        "f_B relative error {:.4}, imaginary part norm {:.3e}, conjugate symmetry defect {:.3e}",
        rel_l2_error(&fb, &f)?,
        imag,
        amps.conjugate_symmetry_defect()
    );
    if full_output {
        amps.save_csv(cfg.out_dir.join("amplitudes.csv"))?;
        write_field(&cfg.out_dir, "born", &fb)?;
        write_field(&cfg.out_dir, "phantom", &f)?;
    }
    let system = ShearletSystem::new(grid, cfg.scales)?;
    let report = sparsity_decay_report(&system, &f, &fb)?;
    std::fs::write(cfg.out_dir.join("decay.csv"), report.to_csv())?;
    info!(
        "N-term decay slopes: phantom {:.3} (squared {:.3}), Born image {:.3} (squared {:.3})",
        report.slope_f, report.slope_f_sq, report.slope_fb, report.slope_fb_sq
    );
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hermite_pat::forward::{synthesize, DataGrids};
use hermite_pat::galerkin_1d::{assemble_a, oracle_assemble_a};
use hermite_pat::galerkin_2d::{assemble_b, oracle_assemble_b, DetectionDirection};
use hermite_pat::hermite::{eval_hermite_fn, hermite_functions};
use hermite_pat::phantom::{Phantom, PhantomId};
use hermite_pat::pipeline::{pat_coefficients, run_experiment_to_dir, ExperimentConfig, LambdaChoice};
use hermite_pat::quadrature::{Grid1D, Interval};
use hermite_pat::spectral::fourier_kernel;
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "hermite-pat", version, about = "Hermite–Galerkin quantitative PAT/OCT reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run(RunArgs),
    /// Compare fast kernel assembly against direct quadrature.
    Oracle(OracleArgs),
    /// Quick numerical sanity checks; exits nonzero on failure.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Preset experiment (ex1..ex5).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    experiment: Option<PhantomId>,
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, conflicts_with = "lcurve")]
    lambda: Option<f64>,
    /// Select λ by L-curve corner on the default grid.
    #[arg(long)]
    lcurve: bool,
    #[arg(long)]
    noise_p: Option<f64>,
    #[arg(long)]
    noise_m: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Detection angles in degrees (two-axis experiments); repeatable.
    #[arg(long = "angle")]
    angles: Vec<f64>,
    /// Generate OCT data from the truncated kernel with planted coefficients.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    inverse_crime: Option<bool>,
    /// Also write the assembled system to system.bin.
    #[arg(long)]
    save_system: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value = "ex1")]
    experiment: PhantomId,
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Detection angle in degrees (two-axis experiments).
    #[arg(long, default_value_t = 90.0)]
    angle: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(a) => run(a).map(|_| ExitCode::SUCCESS),
        Command::Oracle(a) => oracle(a).map(|_| ExitCode::SUCCESS),
        Command::Selftest => Ok(if selftest() { ExitCode::SUCCESS } else { ExitCode::FAILURE }),
    }
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let mut cfg = match (&a.config, a.experiment) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(id)) => ExperimentConfig::preset(id)?,
        (None, None) => bail!("either --experiment or --config is required"),
    };
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(value) = a.lambda {
        cfg.lambda = LambdaChoice::Fixed { value };
    }
    if a.lcurve {
        cfg.lambda = LambdaChoice::DEFAULT_LCURVE;
    }
    if let Some(v) = a.noise_p {
        cfg.noise_p = v;
    }
    if let Some(v) = a.noise_m {
        cfg.noise_m = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if !a.angles.is_empty() {
        cfg.angles_deg = a.angles;
    }
    if let Some(v) = a.inverse_crime {
        cfg.inverse_crime = v;
    }
    cfg.save_system |= a.save_system;

    let out = run_experiment_to_dir(&cfg, &a.out)?;
    let r = &out.result;
    println!("experiment     {}", cfg.experiment);
    println!("system         {} x {}", out.system.g.nrows(), out.system.g.ncols());
    println!("lambda         {:.3e}", r.lambda);
    println!("residual       {:.6e}", r.residual_norm);
    println!("rel_l2_gamma   {:.6e}", r.metrics.rel_l2_gamma);
    println!("rel_l2_imchi   {:.6e}", r.metrics.rel_l2_imchi);
    if let Some(e) = r.coefficient_error() {
        println!("coef_error     {e:.6e}");
    }
    println!("artifacts      {}", a.out.display());
    Ok(())
}

fn oracle(a: OracleArgs) -> anyhow::Result<()> {
    let phantom = Phantom::preset(a.experiment)?;
    let dir = DetectionDirection::from_angle(a.angle.to_radians())?;
    let dirs = if phantom.dim() == 1 { vec![] } else { vec![dir] };
    let data = synthesize(&phantom, &DataGrids::default_for(&phantom), &dirs)?;
    let (p, pt) = pat_coefficients(&data.pat, &data.pat_grid, phantom.dim(), a.n)?;
    let (fast, slow) = if phantom.dim() == 1 {
        (assemble_a(&p, &pt, a.n)?, oracle_assemble_a(&p, &pt, a.n)?)
    } else {
        (assemble_b(&p, &pt, &dir, a.n)?.to_matrix(), oracle_assemble_b(&p, &pt, &dir, a.n)?.to_matrix())
    };
    let rel = (&fast - &slow).norm() / slow.norm();
    println!("{} N={} max-entry {:.3e} relative-frobenius {rel:.3e}", a.experiment, a.n, max_abs(&fast, &slow));
    Ok(())
}

fn max_abs(a: &nalgebra::DMatrix<Complex64>, b: &nalgebra::DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn selftest() -> bool {
    let mut ok = true;
    let mut report = |name: &str, err: f64, tol: f64| {
        let pass = err < tol;
        ok &= pass;
        println!("{} {name}: {err:.3e} (tol {tol:.0e})", if pass { "PASS" } else { "FAIL" });
    };

    let g = Grid1D::gauss_legendre(Interval::symmetric(12.0), 400);
    let rows: Vec<Vec<f64>> = g.nodes.iter().map(|&x| hermite_functions(20, x)).collect();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        for l in 0..20 {
            let ip: f64 = rows.iter().zip(&g.weights).map(|(h, w)| w * h[k] * h[l]).sum();
            worst = worst.max((ip - f64::from(u8::from(k == l))).abs());
        }
    }
    report("orthonormality k,l < 20", worst, 1e-12);

    let q = Grid1D::composite_gauss_legendre(Interval::symmetric(14.0), 56, 16);
    let mut worst: f64 = 0.0;
    for k in 0..=12 {
        for &w in &[-2.0, 0.0, 1.5] {
            let direct: Complex64 = q
                .nodes
                .iter()
                .zip(&q.weights)
                .map(|(&x, &wt)| wt * (-0.5 * x * x).exp() * eval_hermite_fn(k, x) * Complex64::from_polar(1.0, -w * x))
                .sum();
            let closed = fourier_kernel(k, w).expect("degree in range");
            // odd k vanish exactly at ω = 0; compare absolutely there
            let scale = if closed.norm() == 0.0 { 1.0 } else { closed.norm() };
            worst = worst.max((closed - direct).norm() / scale);
        }
    }
    report("Fourier kernel k <= 12", worst, 1e-8);

    match oracle_gap(PhantomId::Ex1, 3) {
        Ok(gap) => report("fast vs quadrature assembly, N = 3", gap, 1e-6),
        Err(e) => {
            println!("FAIL assembly oracle: {e}");
            ok = false;
        }
    }
    ok
}

fn oracle_gap(id: PhantomId, n: usize) -> anyhow::Result<f64> {
    let phantom = Phantom::preset(id)?;
    let data = synthesize(&phantom, &DataGrids::default_for(&phantom), &[])?;
    let (p, pt) = pat_coefficients(&data.pat, &data.pat_grid, 1, n)?;
    let fast = assemble_a(&p, &pt, n)?;
    let slow = oracle_assemble_a(&p, &pt, n)?;
    Ok(max_abs(&fast, &slow) / slow.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cutfem::study::{
    convergence_table, run_condition_sweep, run_convergence, sweep_summary_line, write_convergence_csv,
    write_sweep_csv, ConvergenceConfig, SweepConfig,
};
use cutfem::{GradientForm, Stabilization};

#[derive(Parser)]
#[command(name = "cutfem", version, about = "Cut finite element studies for the Laplace-Beltrami operator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error norms and convergence orders under uniform refinement.
    Convergence(ConvergenceArgs),
    /// Condition numbers over translated unit spheres.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SurfaceArg {
    Sphere,
    Blob,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradientArg {
    Tangential,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum StabArg {
    None,
    Fullgrad,
    Face,
}

impl From<GradientArg> for GradientForm {
    fn from(g: GradientArg) -> Self {
        match g {
            GradientArg::Tangential => GradientForm::Tangential,
            GradientArg::Full => GradientForm::Full,
        }
    }
}

impl From<StabArg> for Stabilization {
    fn from(s: StabArg) -> Self {
        match s {
            StabArg::None => Stabilization::None,
            StabArg::Fullgrad => Stabilization::FullGradient,
            StabArg::Face => Stabilization::Face,
        }
    }
}

#[derive(Args)]
struct FormArgs {
    #[arg(long, value_enum, default_value = "full")]
    gradient: GradientArg,
    #[arg(long, value_enum, default_value = "none")]
    stab: StabArg,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Exponent of h in the full-gradient stabilization weight.
    #[arg(long, default_value_t = 1)]
    stab_power: i32,
    /// Exponent of h in the face stabilization weight.
    #[arg(long, default_value_t = 0)]
    face_h_power: i32,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long, value_enum, default_value = "sphere")]
    surface: SurfaceArg,
    #[command(flatten)]
    form: FormArgs,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value_t = 5)]
    base_cells: usize,
    /// Half width of the background box (default depends on the surface).
    #[arg(long = "box")]
    box_half_width: Option<f64>,
    /// Measure the H1 error with full instead of tangential gradients.
    #[arg(long)]
    h1_full_gradient: bool,
    #[arg(long, default_value_t = 1e-10)]
    solver_tol: f64,
    /// Write per-level active mesh, surface cells and matrix dumps here.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    form: FormArgs,
    #[arg(long, default_value_t = 2)]
    mesh_level: u32,
    #[arg(long, default_value_t = 101)]
    n_deltas: usize,
    #[arg(long, default_value_t = 5)]
    base_cells: usize,
    #[arg(long = "box", default_value_t = 1.6)]
    box_half_width: f64,
    /// Symmetric Jacobi scaling before the eigenvalue computation.
    #[arg(long)]
    diag_scale: bool,
    #[arg(long, default_value_t = 1e-9)]
    zero_threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| anyhow!("output: cannot create {}: {e}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn convergence(args: ConvergenceArgs) -> Result<()> {
    let surface = match args.surface {
        SurfaceArg::Sphere => "sphere",
        SurfaceArg::Blob => "blob",
    };
    let mut config = ConvergenceConfig::new(surface, args.form.gradient.into(), args.form.stab.into(), args.form.tau);
    config.stab_power = args.form.stab_power;
    config.face_h_power = args.form.face_h_power;
    config.levels = args.levels;
    config.base_cells = args.base_cells;
    if let Some(b) = args.box_half_width {
        config.box_half_width = b;
    }
    config.h1_full_gradient = args.h1_full_gradient;
    config.solver_tol = args.solver_tol;
    config.dump_dir = args.dump_dir;

    let mut out = create(&args.out)?;
    let rows = run_convergence(&config)?;
    write_convergence_csv(&mut out, &config, &rows)
        .and_then(|()| out.flush())
        .map_err(|e| anyhow!("output: {e}"))?;
    print!("{}", convergence_table(&rows));
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut config = SweepConfig::new(args.form.gradient.into(), args.form.stab.into(), args.form.tau);
    config.stab_power = args.form.stab_power;
    config.face_h_power = args.form.face_h_power;
    config.mesh_level = args.mesh_level;
    config.n_deltas = args.n_deltas;
    config.base_cells = args.base_cells;
    config.box_half_width = args.box_half_width;
    config.diag_scale = args.diag_scale;
    config.zero_threshold_rel = args.zero_threshold;

    let mut out = create(&args.out)?;
    let result = run_condition_sweep(&config)?;
    write_sweep_csv(&mut out, &config, &result)
        .and_then(|()| out.flush())
        .map_err(|e| anyhow!("output: {e}"))?;
    println!("{}", sweep_summary_line(&result));
    for row in &result.rows {
        if let Err(e) = &row.outcome {
            eprintln!("delta = {:.4}: {e}", row.delta);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Convergence(a) => convergence(a),
        Command::Sweep(a) => sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

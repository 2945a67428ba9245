//! Convergence and condition-number studies with CSV and table output.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use crate::assembly::{combine, FormRecipe, GradientForm, Stabilization};
use crate::cut::{extract_surface_cells, write_cells};
use crate::error::{Error, Result, StageExt};
use crate::manufactured::{eoc, error_norms, ManufacturedProblem};
use crate::mesh::{ActiveMesh, BoxMesh};
use crate::solve::solve;
use crate::spectrum::{condition_sweep, translated_unit_sphere, SpectrumOptions, SweepResult};

pub const CONVERGENCE_HEADER: &str = "level,h,n_dofs,E_L2,E_H1,EOC_L2,EOC_H1,solve_iters";
pub const SWEEP_HEADER: &str = "delta,n_dofs,lambda_max,lambda_min_nonzero,kappa,h2_kappa";

/// Default half width of the cubic box around each surface.
pub fn default_box_half_width(surface: &str) -> f64 {
    match surface {
        "blob" => 2.4,
        _ => 1.6,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceConfig {
    pub surface: String,
    pub gradient: GradientForm,
    pub stabilization: Stabilization,
    pub tau: f64,
    pub stab_power: i32,
    pub face_h_power: i32,
    pub levels: usize,
    pub base_cells: usize,
    pub box_half_width: f64,
    /// Use the full instead of the tangential gradient in the H1 error.
    pub h1_full_gradient: bool,
    pub solver_tol: f64,
    /// Directory receiving per-level debug dumps.
    pub dump_dir: Option<PathBuf>,
}

impl ConvergenceConfig {
    pub fn new(surface: &str, gradient: GradientForm, stabilization: Stabilization, tau: f64) -> Self {
        Self {
            surface: surface.to_string(),
            gradient,
            stabilization,
            tau,
            stab_power: 1,
            face_h_power: 0,
            levels: 5,
            base_cells: 5,
            box_half_width: default_box_half_width(surface),
            h1_full_gradient: false,
            solver_tol: 1e-10,
            dump_dir: None,
        }
    }

    pub fn recipe(&self) -> FormRecipe<f64> {
        FormRecipe::new(self.gradient, self.stabilization, self.tau)
            .with_mass(true)
            .with_stab_power(self.stab_power)
            .with_face_h_power(self.face_h_power)
    }

    pub fn validate(&self) -> Result<()> {
        if ManufacturedProblem::<f64>::for_surface(&self.surface).is_none() {
            return Err(Error::InvalidConfig(format!("unknown surface '{}'", self.surface)));
        }
        if self.levels < 2 {
            return Err(Error::InvalidConfig("levels must be >= 2".into()));
        }
        if self.base_cells == 0 {
            return Err(Error::InvalidConfig("base_cells must be >= 1".into()));
        }
        if !(self.box_half_width > 0.0) {
            return Err(Error::InvalidConfig("box half width must be positive".into()));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::InvalidConfig("solver tolerance must be positive".into()));
        }
        self.recipe().validate()
    }

    pub fn cells_at(&self, level: usize) -> usize {
        self.base_cells << level
    }

    fn echo(&self) -> Vec<(&'static str, String)> {
        vec![
            ("study", "convergence".into()),
            ("surface", self.surface.clone()),
            ("gradient", self.gradient.to_string()),
            ("stabilization", self.stabilization.to_string()),
            ("tau", format!("{:e}", self.tau)),
            ("stab_power", self.stab_power.to_string()),
            ("face_h_power", self.face_h_power.to_string()),
            ("levels", self.levels.to_string()),
            ("base_cells", self.base_cells.to_string()),
            ("box", format!("[{:e},{:e}]^3", -self.box_half_width, self.box_half_width)),
            ("h1_gradient", if self.h1_full_gradient { "full" } else { "tangential" }.into()),
            ("solver_tol", format!("{:e}", self.solver_tol)),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub n_dofs: usize,
    pub e_l2: f64,
    pub e_h1: f64,
    pub eoc_l2: Option<f64>,
    pub eoc_h1: Option<f64>,
    pub solve_iters: usize,
}

/// Solves `-Δ_Γ u + u = f` on successively refined meshes and records the errors.
pub fn run_convergence(config: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    config.validate()?;
    let problem = ManufacturedProblem::<f64>::for_surface(&config.surface).expect("validated");
    let recipe = config.recipe();
    if let Some(dir) = &config.dump_dir {
        fs::create_dir_all(dir).map_err(Error::from).stage(|| "dump")?;
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(config.levels);
    for level in 0..config.levels {
        let tag = |stage: &str| format!("level {level} / {stage}");
        let mesh = BoxMesh::cube(config.box_half_width, config.cells_at(level)).stage(|| tag("mesh"))?;
        let active = ActiveMesh::from_surface(&mesh, problem.surface()).stage(|| tag("active mesh"))?;
        let cells = extract_surface_cells(&active).stage(|| tag("cut cells"))?;
        let source = |x| problem.rhs(x);
        let system = combine(&recipe, &active, &cells, Some(&source)).stage(|| tag("assembly"))?;
        let report = solve(&system, config.solver_tol, None).stage(|| tag("solve"))?;
        let errors = error_norms(&active, &cells, &report.coefficients, &problem, config.h1_full_gradient)
            .stage(|| tag("errors"))?;
        if let Some(dir) = &config.dump_dir {
            let dump = || -> io::Result<()> {
                active.write_vtk(io::BufWriter::new(fs::File::create(dir.join(format!("level{level}_active.vtk")))?))?;
                write_cells(&cells, io::BufWriter::new(fs::File::create(dir.join(format!("level{level}_cells.txt")))?))?;
                system
                    .matrix
                    .write_coordinate(io::BufWriter::new(fs::File::create(dir.join(format!("level{level}_matrix.txt")))?))
            };
            dump().map_err(Error::from).stage(|| tag("dump"))?;
        }
        let (eoc_l2, eoc_h1) = match rows.last() {
            Some(prev) => (
                Some(eoc(&[prev.e_l2, errors.l2])[0]),
                Some(eoc(&[prev.e_h1, errors.h1])[0]),
            ),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            level,
            h: mesh.h(),
            n_dofs: active.n_dofs(),
            e_l2: errors.l2,
            e_h1: errors.h1,
            eoc_l2,
            eoc_h1,
            solve_iters: report.iterations,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub gradient: GradientForm,
    pub stabilization: Stabilization,
    pub tau: f64,
    pub stab_power: i32,
    pub face_h_power: i32,
    /// Mesh level `k`: `round(base_cells · 2^{k/2})` cells per axis.
    pub mesh_level: u32,
    pub n_deltas: usize,
    pub base_cells: usize,
    pub box_half_width: f64,
    pub diag_scale: bool,
    pub zero_threshold_rel: f64,
}

impl SweepConfig {
    pub fn new(gradient: GradientForm, stabilization: Stabilization, tau: f64) -> Self {
        Self {
            gradient,
            stabilization,
            tau,
            stab_power: 1,
            face_h_power: 0,
            mesh_level: 2,
            n_deltas: 101,
            base_cells: 5,
            box_half_width: 1.6,
            diag_scale: false,
            zero_threshold_rel: 1e-9,
        }
    }

    pub fn recipe(&self) -> FormRecipe<f64> {
        FormRecipe::new(self.gradient, self.stabilization, self.tau)
            .with_stab_power(self.stab_power)
            .with_face_h_power(self.face_h_power)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_deltas < 2 {
            return Err(Error::InvalidConfig("n_deltas must be >= 2".into()));
        }
        if self.base_cells == 0 || !(self.box_half_width > 0.0) {
            return Err(Error::InvalidConfig("mesh parameters must be positive".into()));
        }
        if !(self.zero_threshold_rel > 0.0) {
            return Err(Error::InvalidConfig("zero threshold must be positive".into()));
        }
        self.recipe().validate()
    }

    pub fn cells(&self) -> usize {
        ((self.base_cells as f64) * 2f64.powf(self.mesh_level as f64 / 2.0)).round() as usize
    }

    pub fn deltas(&self) -> Vec<f64> {
        let last = (self.n_deltas - 1) as f64;
        (0..self.n_deltas).map(|i| i as f64 / last).collect()
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            zero_threshold_rel: self.zero_threshold_rel,
            strict: false,
            diagonal_scaling: self.diag_scale,
        }
    }

    fn echo(&self) -> Vec<(&'static str, String)> {
        vec![
            ("study", "condition_sweep".into()),
            ("surface", "translated unit sphere".into()),
            ("gradient", self.gradient.to_string()),
            ("stabilization", self.stabilization.to_string()),
            ("tau", format!("{:e}", self.tau)),
            ("stab_power", self.stab_power.to_string()),
            ("face_h_power", self.face_h_power.to_string()),
            ("mesh_level", self.mesh_level.to_string()),
            ("cells_per_axis", self.cells().to_string()),
            ("n_deltas", self.n_deltas.to_string()),
            ("base_cells", self.base_cells.to_string()),
            ("box", format!("[{:e},{:e}]^3", -self.box_half_width, self.box_half_width)),
            ("diag_scale", self.diag_scale.to_string()),
            ("zero_threshold_rel", format!("{:e}", self.zero_threshold_rel)),
        ]
    }
}

/// Condition numbers of the pure operator for the unit sphere shifted by
/// `δ·(s, s, s)`, `s` the cell width, over `δ ∈ [0, 1]`.
pub fn run_condition_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let mesh = BoxMesh::cube(config.box_half_width, config.cells()).stage(|| "mesh")?;
    let step = mesh.spacing().x;
    let family = move |d: f64| translated_unit_sphere(d, step);
    Ok(condition_sweep(
        &family,
        &mesh,
        &config.recipe(),
        &config.deltas(),
        &config.spectrum_options(),
    ))
}

/// Six significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.5e}")
    } else {
        "nan".into()
    }
}

fn write_echo(w: &mut impl Write, echo: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in echo {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

pub fn write_convergence_csv(mut w: impl Write, config: &ConvergenceConfig, rows: &[ConvergenceRow]) -> io::Result<()> {
    write_echo(&mut w, &config.echo())?;
    writeln!(w, "{CONVERGENCE_HEADER}")?;
    let opt = |v: Option<f64>| v.map(sci).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.level,
            sci(r.h),
            r.n_dofs,
            sci(r.e_l2),
            sci(r.e_h1),
            opt(r.eoc_l2),
            opt(r.eoc_h1),
            r.solve_iters
        )?;
    }
    Ok(())
}

/// A position whose spectrum sits close to the kernel threshold, so its
/// kernel dimension and `κ` depend on the threshold choice.
pub fn is_borderline(report: &crate::spectrum::SpectrumReport, zero_threshold_rel: f64) -> bool {
    let threshold = zero_threshold_rel * report.lambda_max;
    report.kernel_dim_detected != 1 || report.lambda_min_nonzero < 1e3 * threshold
}

pub fn write_sweep_csv(mut w: impl Write, config: &SweepConfig, result: &SweepResult) -> io::Result<()> {
    write_echo(&mut w, &config.echo())?;
    writeln!(w, "# h = {}", sci(result.h))?;
    writeln!(w, "{SWEEP_HEADER}")?;
    let mut notes = Vec::new();
    for r in &result.rows {
        match &r.outcome {
            Ok(s) => {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    sci(r.delta),
                    r.n_dofs,
                    sci(s.lambda_max),
                    sci(s.lambda_min_nonzero),
                    sci(s.kappa),
                    sci(r.h2_kappa)
                )?;
                if is_borderline(s, config.zero_threshold_rel) {
                    notes.push(format!(
                        "# borderline delta = {}: kernel_dim = {}, lambda_min_nonzero/lambda_max = {}",
                        sci(r.delta),
                        s.kernel_dim_detected,
                        sci(s.lambda_min_nonzero / s.lambda_max)
                    ));
                }
            }
            Err(msg) => {
                writeln!(w, "{},{},nan,nan,nan,nan", sci(r.delta), r.n_dofs)?;
                notes.push(format!("# failed delta = {}: {msg}", sci(r.delta)));
            }
        }
    }
    for n in notes {
        writeln!(w, "{n}")?;
    }
    let s = result.summary();
    writeln!(
        w,
        "# summary h2_kappa min = {} max = {} mean = {} (ok = {}, failed = {})",
        sci(s.min),
        sci(s.max),
        sci(s.mean),
        s.n_ok,
        s.n_failed
    )
}

/// Aligned plain-text table with EOCs to two decimals.
pub fn convergence_table(rows: &[ConvergenceRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5} {:>11} {:>8} {:>11} {:>6} {:>11} {:>6} {:>6}",
        "level", "h", "n_dofs", "E_L2", "EOC", "E_H1", "EOC", "iters"
    );
    let eoc = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "--".into());
    for r in rows {
        let _ = writeln!(
            out,
            "{:>5} {:>11.3e} {:>8} {:>11.3e} {:>6} {:>11.3e} {:>6} {:>6}",
            r.level,
            r.h,
            r.n_dofs,
            r.e_l2,
            eoc(r.eoc_l2),
            r.e_h1,
            eoc(r.eoc_h1),
            r.solve_iters
        );
    }
    out
}

pub fn sweep_summary_line(result: &SweepResult) -> String {
    let s = result.summary();
    format!(
        "h = {:.3e}: h^2 kappa min {:.3} max {:.3} mean {:.3}; kappa max {:.3e} ({} ok, {} failed)",
        result.h,
        s.min,
        s.max,
        s.mean,
        result.max_kappa(),
        s.n_ok,
        s.n_failed
    )
}

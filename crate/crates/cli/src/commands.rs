//! Argument definitions and one handler per subcommand. Every handler
//! returns a JSON value that `main` prints on a single stdout line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use invmed_core::fld::{self, FieldData};
use invmed_core::inversion::{lbfgs_minimize, InversionConfig, LbfgsOptions};
use invmed_core::lippmann::{neumann_forward, GreenKernel};
use invmed_core::measurement::{load_msr, make_layout, save_msr, synthesize, SynthesisConfig, DEFAULT_RC};
use invmed_core::metrics::MetricReport;
use invmed_core::pml::{FactoredSystem, PmlConfig, DEFAULT_L_PML};
use invmed_core::{ComplexField, Grid};
use serde_json::{json, Value};

use crate::config::{resolve, ConfigPatch, ExperimentName, LayoutName, RunConfig, SolverKind};
use crate::error::{CliError, CliResult};
use crate::experiment;
use crate::heatmap::{select_part, write_heatmap, Part};

#[derive(Debug, Parser)]
#[command(name = "invmed", version, about = "2-D acoustic inverse medium solver")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scatterer to a .fld file.
    Phantom(PhantomArgs),
    /// Solve one forward scattering problem.
    Forward(ForwardArgs),
    /// Synthesize measurements of a scatterer.
    Measure(MeasureArgs),
    /// Reconstruct a scatterer from measurements.
    Invert(InvertArgs),
    /// Compare a reconstruction with the truth.
    Metrics(MetricsArgs),
    /// Run a preset experiment end to end.
    Experiment(ExperimentArgs),
    /// Export a field as a PGM image.
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// two_gauss, gaussian_mixture, discs, rectangle_robot, austria or small_cluster.
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value_t = 0.1)]
    pub magnitude: f64,
    #[arg(long, default_value_t = 129)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Real contrast field.
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub k: f64,
    /// Propagation angle of the incident plane wave.
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, value_enum, default_value_t = SolverKind::Pml)]
    pub solver: SolverKind,
    /// Neumann truncation order.
    #[arg(long = "L", default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = DEFAULT_L_PML)]
    pub l_pml: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    #[arg(long = "M", default_value_t = 64)]
    pub sources: usize,
    #[arg(long = "N", default_value_t = 64)]
    pub receivers: usize,
    #[arg(long, default_value_t = DEFAULT_RC)]
    pub r_c: f64,
    #[arg(long, value_enum, default_value_t = LayoutName::FullCircle)]
    pub layout: LayoutName,
    #[arg(long, default_value_t = 0.0)]
    pub center_angle: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub aperture: f64,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// True contrast on the fine mesh or on a grid it refines.
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub k: f64,
    #[arg(long, default_value_t = 1025)]
    pub fine_n: usize,
    #[command(flatten)]
    pub layout: LayoutArgs,
    /// Omit for noiseless data.
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_L_PML)]
    pub l_pml: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Defaults to the wavenumber recorded in the data.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 129)]
    pub n: usize,
    #[arg(long)]
    pub q0: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 20)]
    pub max_linesearch: usize,
    #[arg(long, default_value_t = 0.0)]
    pub tikhonov: f64,
    #[arg(long, default_value_t = DEFAULT_L_PML)]
    pub l_pml: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub rec: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: Option<ExperimentName>,
    /// TOML file with any subset of the run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub phantom: Option<String>,
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub fine_n: Option<usize>,
    #[arg(long = "M")]
    pub sources: Option<usize>,
    #[arg(long = "N")]
    pub receivers: Option<usize>,
    #[arg(long)]
    pub r_c: Option<f64>,
    #[arg(long, value_enum)]
    pub layout: Option<LayoutName>,
    #[arg(long)]
    pub center_angle: Option<f64>,
    #[arg(long)]
    pub aperture: Option<f64>,
    /// `inf` for noiseless data.
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tikhonov: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub field: PathBuf,
    /// Required for complex fields.
    #[arg(long, value_enum)]
    pub part: Option<Part>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<Value> {
    match cli.command {
        Command::Phantom(a) => phantom(a),
        Command::Forward(a) => forward(a),
        Command::Measure(a) => measure(a),
        Command::Invert(a) => invert(a),
        Command::Metrics(a) => metrics(a),
        Command::Experiment(a) => run_experiment(a),
        Command::Heatmap(a) => heatmap(a),
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "field".into())
}

fn create_out(dir: &Path) -> CliResult<()> {
    Ok(std::fs::create_dir_all(dir)?)
}

pub fn phantom(a: PhantomArgs) -> CliResult<Value> {
    if a.name == "gaussian_mixture" && a.seed.is_none() {
        return Err(CliError::usage("the gaussian_mixture phantom needs --seed"));
    }
    let p = invmed_core::phantoms::Phantom::from_name(&a.name, a.magnitude, a.seed)?;
    let q = p.render(Grid::unit(a.n)?)?;
    create_out(&a.out)?;
    let path = a.out.join("q.fld");
    fld::save(&path, &FieldData::Real(q), None)?;
    Ok(json!({ "phantom": p.name(), "n": a.n, "file": path }))
}

pub fn forward(a: ForwardArgs) -> CliResult<Value> {
    let q = fld::load(&a.q)?.1.into_real()?;
    let grid = *q.grid();
    let incident = ComplexField::plane_wave(grid, a.k, a.theta);
    let (field, diagnostics) = match a.solver {
        SolverKind::Pml => {
            let solver = FactoredSystem::new(&q, PmlConfig::new(a.k, grid.n(), a.l_pml)?)?;
            let us = solver.solve_source(&incident.zip_with(&q, |u, v| u * v)?)?;
            (us, json!({ "solver": "pml", "pivot_ratio": solver.pivot_ratio() }))
        }
        SolverKind::Neumann => {
            let kernel = GreenKernel::new(a.k, grid)?;
            let (us, d) = neumann_forward(&q, &incident, &kernel, a.order)?;
            let diag = json!({
                "solver": "neumann",
                "order": d.order,
                "term_norms": d.term_norms,
                "converged": d.converged,
                "contraction_estimate": d.contraction_estimate,
            });
            (us, diag)
        }
    };
    create_out(&a.out)?;
    let path = a.out.join("us.fld");
    fld::save(&path, &FieldData::Complex(field), Some(a.k))?;
    Ok(json!({ "file": path, "diagnostics": diagnostics }))
}

pub fn measure(a: MeasureArgs) -> CliResult<Value> {
    let snr_db = a.snr_db.unwrap_or(f64::INFINITY);
    if snr_db.is_finite() && a.seed.is_none() {
        return Err(CliError::usage("noisy measurements need --seed"));
    }
    let q = fld::load(&a.q)?.1.into_real()?;
    let l = &a.layout;
    let kind = RunConfig {
        layout: l.layout,
        center_angle: l.center_angle,
        aperture: l.aperture,
        ..RunConfig::default()
    }
    .layout_kind();
    let layout = make_layout(kind, l.sources, l.receivers, l.r_c)?;
    let cfg = SynthesisConfig {
        k: a.k,
        fine_n: a.fine_n,
        coarse_n: q.grid().n(),
        snr_db,
        seed: a.seed.unwrap_or(0),
        l_pml: a.l_pml,
    };
    let data = synthesize(&q, &layout, &cfg)?;
    create_out(&a.out)?;
    let path = a.out.join("data.msr");
    save_msr(&path, &data)?;
    Ok(json!({ "file": path, "M": data.m(), "N": data.n(), "frobenius": data.frobenius() }))
}

pub fn invert(a: InvertArgs) -> CliResult<Value> {
    let data = load_msr(&a.data)?;
    let k = a.k.unwrap_or(data.k);
    if k != data.k {
        return Err(CliError::validation(format!(
            "--k {k} contradicts the data wavenumber {}",
            data.k
        )));
    }
    let lbfgs = LbfgsOptions { max_iter: a.max_iter, max_linesearch: a.max_linesearch, ..Default::default() };
    let config = InversionConfig { k, n: a.n, l_pml: a.l_pml, lbfgs, tikhonov: a.tikhonov };
    config.validate()?;
    let load_real = |p: &PathBuf| -> CliResult<_> { Ok(fld::load(p)?.1.into_real()?) };
    let q0 = a.q0.as_ref().map(load_real).transpose()?;
    let truth = a.truth.as_ref().map(load_real).transpose()?;
    let state = lbfgs_minimize(&data, config, q0.as_ref(), truth.as_ref())?;
    create_out(&a.out)?;
    let path = a.out.join("q_rec.fld");
    fld::save(&path, &FieldData::Real(state.q.clone()), Some(k))?;
    std::fs::write(a.out.join(experiment::HISTORY_FILE), state.history_csv())?;
    let metrics = truth
        .as_ref()
        .map(|t| MetricReport::compute(&state.q, t, Some(state.final_j())))
        .transpose()?;
    Ok(json!({
        "file": path,
        "iterations": state.history.len() - 1,
        "initial_j": state.initial_j(),
        "final_j": state.final_j(),
        "stop": state.stop,
        "n_fev": state.n_fev,
        "elapsed_s": state.elapsed_s,
        "metrics": metrics,
    }))
}

pub fn metrics(a: MetricsArgs) -> CliResult<Value> {
    let rec = fld::load(&a.rec)?.1.into_real()?;
    let truth = fld::load(&a.truth)?.1.into_real()?;
    Ok(serde_json::to_value(MetricReport::compute(&rec, &truth, None)?)?)
}

impl ExperimentArgs {
    fn patch(&self) -> ConfigPatch {
        let lbfgs = self.max_iter.map(|max_iter| LbfgsOptions { max_iter, ..Default::default() });
        ConfigPatch {
            seed: self.seed,
            phantom: self.phantom.clone(),
            magnitude: self.magnitude,
            k: self.k,
            n: self.n,
            fine_n: self.fine_n,
            sources: self.sources,
            receivers: self.receivers,
            r_c: self.r_c,
            layout: self.layout,
            center_angle: self.center_angle,
            aperture: self.aperture,
            snr_db: self.snr_db,
            tikhonov: self.tikhonov,
            lbfgs,
            ..Default::default()
        }
    }
}

pub fn run_experiment(a: ExperimentArgs) -> CliResult<Value> {
    let file = a.config.as_deref().map(ConfigPatch::load).transpose()?;
    let mut flags = a.patch();
    if let (Some(max_iter), Some(opts)) = (a.max_iter, file.as_ref().and_then(|f| f.lbfgs)) {
        flags.lbfgs = Some(LbfgsOptions { max_iter, ..opts });
    }
    let config = resolve(a.name, file, flags)?;
    let report = experiment::run(&config, &a.out)?;
    Ok(serde_json::to_value(report.summary)?)
}

pub fn heatmap(a: HeatmapArgs) -> CliResult<Value> {
    let (field, part) = select_part(fld::load(&a.field)?.1, a.part)?;
    create_out(&a.out)?;
    let stem = file_stem(&a.field);
    let path = write_heatmap(&field, part, &a.out, &stem)?;
    Ok(json!({ "file": path, "part": part }))
}

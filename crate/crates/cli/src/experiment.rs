//! Synthesize, invert and evaluate in one run, writing every artifact.

use std::path::Path;

use invmed_core::fld::{self, FieldData};
use invmed_core::inversion::{lbfgs_minimize, InversionState};
use invmed_core::measurement::{save_msr, synthesize};
use invmed_core::metrics::MetricReport;
use invmed_core::Grid;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::heatmap::{write_heatmap, Part};

pub const CONFIG_FILE: &str = "config.toml";
pub const TRUTH_FILE: &str = "q_true.fld";
pub const DATA_FILE: &str = "data.msr";
pub const RECON_FILE: &str = "q_rec.fld";
pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub phantom: String,
    pub k: f64,
    /// `None` for noiseless data.
    pub snr_db: Option<f64>,
    pub rel_err: f64,
    pub ssim: f64,
    pub n_fev: usize,
    pub elapsed_s: f64,
    pub iterations: usize,
    pub initial_j: f64,
    pub final_j: f64,
    pub stop: invmed_core::inversion::StopReason,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub state: InversionState,
}

pub fn run(config: &RunConfig, out: &Path) -> CliResult<ExperimentReport> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(CONFIG_FILE), config.to_toml()?)?;

    let phantom = config.phantom()?;
    let fine = phantom.render(Grid::unit(config.fine_n)?)?;
    let truth = fine.restrict(config.n)?;
    let layout = config.receiver_layout()?;
    let data = synthesize(&fine, &layout, &config.synthesis())?;
    fld::save(out.join(TRUTH_FILE), &FieldData::Real(truth.clone()), None)?;
    save_msr(out.join(DATA_FILE), &data)?;

    let state = lbfgs_minimize(&data, config.inversion(), None, Some(&truth))?;
    fld::save(out.join(RECON_FILE), &FieldData::Real(state.q.clone()), Some(config.k))?;
    std::fs::write(out.join(HISTORY_FILE), state.history_csv())?;
    write_heatmap(&truth, Part::Real, out, "q_true")?;
    write_heatmap(&state.q, Part::Real, out, "q_rec")?;

    let metrics = MetricReport::compute(&state.q, &truth, Some(state.final_j()))?;
    let summary = Summary {
        phantom: phantom.name().to_string(),
        k: config.k,
        snr_db: (!config.is_noiseless()).then_some(config.snr_db),
        rel_err: metrics.rel_err,
        ssim: metrics.ssim,
        n_fev: state.n_fev,
        elapsed_s: state.elapsed_s,
        iterations: state.history.len() - 1,
        initial_j: state.initial_j(),
        final_j: state.final_j(),
        stop: state.stop,
    };
    std::fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(ExperimentReport { summary, state })
}

//! Run configuration: experiment presets, TOML files and flag overrides.

use std::f64::consts::PI;
use std::path::Path;

use clap::ValueEnum;
use invmed_core::inversion::{InversionConfig, LbfgsOptions};
use invmed_core::measurement::{make_layout, LayoutKind, ReceiverLayout, SynthesisConfig, DEFAULT_RC};
use invmed_core::phantoms::Phantom;
use invmed_core::pml::DEFAULT_L_PML;
use invmed_core::Grid;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Pml,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum LayoutName {
    FullCircle,
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Simple,
    Magnitude,
    Geometry,
    Noise,
    Layout,
    Wavenumber,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Simple,
        ExperimentName::Magnitude,
        ExperimentName::Geometry,
        ExperimentName::Noise,
        ExperimentName::Layout,
        ExperimentName::Wavenumber,
    ];
}

/// Every setting of a synthesize, invert and evaluate run.
/// `snr_db = inf` means noiseless data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub phantom: String,
    pub magnitude: f64,
    pub k: f64,
    pub n: usize,
    pub fine_n: usize,
    #[serde(rename = "M")]
    pub sources: usize,
    #[serde(rename = "N")]
    pub receivers: usize,
    pub r_c: f64,
    pub layout: LayoutName,
    pub center_angle: f64,
    pub aperture: f64,
    pub snr_db: f64,
    pub solver: SolverKind,
    #[serde(rename = "neumann_L")]
    pub neumann_l: usize,
    pub l_pml: f64,
    pub tikhonov: f64,
    pub lbfgs: LbfgsOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: None,
            phantom: "two_gauss".into(),
            magnitude: 0.1,
            k: 40.0,
            n: 129,
            fine_n: 1025,
            sources: 64,
            receivers: 64,
            r_c: DEFAULT_RC,
            layout: LayoutName::FullCircle,
            center_angle: 0.0,
            aperture: PI,
            snr_db: f64::INFINITY,
            solver: SolverKind::Pml,
            neumann_l: 3,
            l_pml: DEFAULT_L_PML,
            tikhonov: 0.0,
            lbfgs: LbfgsOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn preset(name: ExperimentName) -> Self {
        let base = Self { experiment: Some(name), ..Self::default() };
        match name {
            ExperimentName::Simple => base,
            ExperimentName::Magnitude => Self { magnitude: 0.4, ..base },
            ExperimentName::Geometry => Self { phantom: "discs".into(), magnitude: 0.6, ..base },
            ExperimentName::Noise => Self { phantom: "austria".into(), magnitude: 0.5, snr_db: 5.0, ..base },
            ExperimentName::Layout => Self {
                phantom: "austria".into(),
                magnitude: 0.5,
                snr_db: 5.0,
                layout: LayoutName::Arc,
                ..base
            },
            ExperimentName::Wavenumber => {
                Self { phantom: "small_cluster".into(), magnitude: 0.5, snr_db: 5.0, ..base }
            }
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn phantom(&self) -> CliResult<Phantom> {
        Ok(Phantom::from_name(&self.phantom, self.magnitude, self.seed)?)
    }

    pub fn layout_kind(&self) -> LayoutKind {
        match self.layout {
            LayoutName::FullCircle => LayoutKind::FullCircle,
            LayoutName::Arc => LayoutKind::Arc { center_angle: self.center_angle, aperture: self.aperture },
        }
    }

    pub fn receiver_layout(&self) -> CliResult<ReceiverLayout> {
        Ok(make_layout(self.layout_kind(), self.sources, self.receivers, self.r_c)?)
    }

    pub fn inversion(&self) -> InversionConfig {
        InversionConfig { k: self.k, n: self.n, l_pml: self.l_pml, lbfgs: self.lbfgs, tikhonov: self.tikhonov }
    }

    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig {
            k: self.k,
            fine_n: self.fine_n,
            coarse_n: self.n,
            snr_db: self.snr_db,
            seed: self.seed.unwrap_or(0),
            l_pml: self.l_pml,
        }
    }

    /// Checks every downstream precondition without doing any real work.
    pub fn validate(&self) -> CliResult<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(CliError::validation(format!("wavenumber must be positive, got {}", self.k)));
        }
        if !(self.magnitude > 0.0 && self.magnitude.is_finite()) {
            return Err(CliError::validation(format!("magnitude must be positive, got {}", self.magnitude)));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(CliError::validation(format!("invalid SNR {}", self.snr_db)));
        }
        if !self.is_noiseless() && self.seed.is_none() {
            return Err(CliError::usage("noisy data need --seed"));
        }
        if self.solver != SolverKind::Pml {
            return Err(CliError::validation("experiments synthesize data with the pml solver"));
        }
        Grid::unit(self.n)?;
        Grid::unit(self.fine_n)?;
        if self.fine_n < self.n || !(self.fine_n - 1).is_multiple_of(self.n - 1) {
            return Err(CliError::validation(format!(
                "fine_n = {} is not a refinement of n = {}",
                self.fine_n, self.n
            )));
        }
        self.phantom()?.render(Grid::unit(17)?)?;
        self.receiver_layout()?;
        self.inversion().validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> CliResult<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Partial configuration as read from a file; absent keys keep their value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub experiment: Option<ExperimentName>,
    pub seed: Option<u64>,
    pub phantom: Option<String>,
    pub magnitude: Option<f64>,
    pub k: Option<f64>,
    pub n: Option<usize>,
    pub fine_n: Option<usize>,
    #[serde(rename = "M")]
    pub sources: Option<usize>,
    #[serde(rename = "N")]
    pub receivers: Option<usize>,
    pub r_c: Option<f64>,
    pub layout: Option<LayoutName>,
    pub center_angle: Option<f64>,
    pub aperture: Option<f64>,
    pub snr_db: Option<f64>,
    pub solver: Option<SolverKind>,
    #[serde(rename = "neumann_L")]
    pub neumann_l: Option<usize>,
    pub l_pml: Option<f64>,
    pub tikhonov: Option<f64>,
    pub lbfgs: Option<LbfgsOptions>,
}

impl ConfigPatch {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn apply(self, c: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        if self.experiment.is_some() {
            c.experiment = self.experiment;
        }
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        set!(phantom, magnitude, k, n, fine_n, sources, receivers, r_c, layout, center_angle, aperture);
        set!(snr_db, solver, neumann_l, l_pml, tikhonov, lbfgs);
    }
}

/// Preset for `name` (or the file's own `experiment` key), then the file,
/// then the flags.
pub fn resolve(
    name: Option<ExperimentName>,
    file: Option<ConfigPatch>,
    flags: ConfigPatch,
) -> CliResult<RunConfig> {
    let from_file = file.as_ref().and_then(|f| f.experiment);
    let name = match (name, from_file) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::validation(format!(
                "experiment {a:?} contradicts the config file's {b:?}"
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(CliError::usage("name an experiment or give a config file that does")),
    };
    let mut config = RunConfig::preset(name);
    if let Some(f) = file {
        f.apply(&mut config);
    }
    flags.apply(&mut config);
    config.validate()?;
    Ok(config)
}

//! Run configuration: a flat TOML file merged with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use duration_curve::design::TrialDesign;
use duration_curve::harness::{ExperimentCell, Preset, DEFAULT_N_SIMS};
use duration_curve::metrics::DEFAULT_STEP;
use duration_curve::report::DEFAULT_CURVE_SAMPLE;
use duration_curve::fit::FpSelection;
use duration_curve::{Method, ScenarioCurve};

pub const EXPERIMENTS: [&str; 6] = ["table2", "methods", "nsweep", "arms", "placement", "custom"];

#[derive(Debug, Clone, Args, Default)]
pub struct RunArgs {
    /// Preset experiment, or `custom` for cells described in the config file
    #[arg(long)]
    pub experiment: Option<String>,
    /// Master seed for all simulation streams
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated trials per cell [default: 1000]
    #[arg(long)]
    pub n_sims: Option<usize>,
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write fitted-curve grids for the first K replicates of each cell
    #[arg(long)]
    pub emit_curves: bool,
    /// Number of replicate curves to dump per cell [default: 100]
    #[arg(long)]
    pub curve_sample: Option<usize>,
    /// Integration step in days [default: 0.01]
    #[arg(long)]
    pub step: Option<f64>,
    /// Write SVG plots
    #[arg(long)]
    pub svg: bool,
    /// FP model choice: closed-test or min-deviance [default: closed-test]
    #[arg(long)]
    pub fp_selection: Option<String>,
    /// Worker threads (0 = all cores); does not affect results
    #[arg(long)]
    pub threads: Option<usize>,
    /// TOML file with run settings; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Keys accepted in a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<String>,
    pub master_seed: Option<u64>,
    pub n_sims: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub emit_curves: Option<bool>,
    pub curve_sample: Option<usize>,
    pub step: Option<f64>,
    pub svg: Option<bool>,
    pub threads: Option<usize>,
    pub fp_selection: Option<String>,
    // custom experiments
    pub scenarios: Option<Vec<u8>>,
    pub design: Option<String>,
    pub arms: Option<Vec<f64>>,
    pub total_n: Option<u32>,
    pub methods: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Preset(Preset),
    Custom {
        scenarios: Vec<ScenarioCurve>,
        design: TrialDesign,
        methods: Vec<Method>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub n_sims: usize,
    pub output_dir: PathBuf,
    pub emit_curves: bool,
    pub curve_sample: usize,
    pub step: f64,
    pub svg: bool,
    pub threads: usize,
    pub fp_selection: FpSelection,
}

impl RunConfig {
    pub fn cells(&self) -> Vec<ExperimentCell> {
        match &self.experiment {
            Experiment::Preset(p) => p.cells(self.master_seed, self.n_sims),
            Experiment::Custom {
                scenarios,
                design,
                methods,
            } => methods
                .iter()
                .flat_map(|&method| {
                    scenarios.iter().map(move |&scenario| ExperimentCell {
                        scenario,
                        design: design.clone(),
                        method,
                        n_sims: self.n_sims,
                        master_seed: self.master_seed,
                    })
                })
                .collect(),
        }
    }

    pub fn experiment_name(&self) -> &str {
        match &self.experiment {
            Experiment::Preset(p) => p.name(),
            Experiment::Custom { .. } => "custom",
        }
    }
}

/// Invalid or incomplete configuration (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

pub fn read_config_file(path: &Path) -> Result<FileConfig, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Merges flags over the optional config file and validates the result.
pub fn parse_config(args: &RunArgs) -> Result<RunConfig, UsageError> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => FileConfig::default(),
    };

    let master_seed = args
        .seed
        .or(file.master_seed)
        .ok_or_else(|| usage("a master seed is required (--seed <u64> or master_seed in the config)"))?;
    let n_sims = args.n_sims.or(file.n_sims).unwrap_or(DEFAULT_N_SIMS);
    if n_sims == 0 {
        return Err(usage("n_sims must be at least 1"));
    }
    let step = args.step.or(file.step).unwrap_or(DEFAULT_STEP);
    if !(step > 0.0 && step.is_finite()) {
        return Err(usage(format!("step must be positive, got {step}")));
    }
    duration_curve::metrics::integration_grid(10.0, 20.0, step)
        .map_err(|e| usage(e.to_string()))?;

    let emit_curves = args.emit_curves || file.emit_curves.unwrap_or(false);
    let svg = args.svg || file.svg.unwrap_or(false);
    let curve_sample = match args.curve_sample.or(file.curve_sample) {
        Some(k) if k > n_sims => {
            return Err(usage(format!("curve_sample {k} exceeds n_sims {n_sims}")))
        }
        Some(k) => k,
        None => DEFAULT_CURVE_SAMPLE.min(n_sims),
    };

    let fp_selection = match args.fp_selection.as_ref().or(file.fp_selection.as_ref()) {
        Some(s) => s.parse::<FpSelection>().map_err(|e| usage(e.to_string()))?,
        None => FpSelection::default(),
    };

    let name = args
        .experiment
        .clone()
        .or(file.experiment.clone())
        .ok_or_else(|| usage(format!("an experiment is required: one of {}", EXPERIMENTS.join(", "))))?;
    let experiment = if name == "custom" {
        custom_experiment(&file)?
    } else {
        Experiment::Preset(Preset::from_name(&name).ok_or_else(|| {
            usage(format!(
                "unknown experiment {name:?}; available: {}",
                EXPERIMENTS.join(", ")
            ))
        })?)
    };

    Ok(RunConfig {
        experiment,
        master_seed,
        n_sims,
        output_dir: args
            .out
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        emit_curves,
        curve_sample,
        step,
        svg,
        threads: args.threads.or(file.threads).unwrap_or(0),
        fp_selection,
    })
}

fn custom_experiment(file: &FileConfig) -> Result<Experiment, UsageError> {
    let scenarios = file
        .scenarios
        .clone()
        .unwrap_or_else(|| ScenarioCurve::ALL_IDS.to_vec());
    if scenarios.is_empty() {
        return Err(usage("custom experiment has an empty scenario list"));
    }
    let scenarios = scenarios
        .into_iter()
        .map(|id| ScenarioCurve::new(id).map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let total_n = file
        .total_n
        .ok_or_else(|| usage("custom experiment needs total_n"))?;
    let design = match (&file.design, &file.arms) {
        (Some(_), Some(_)) => return Err(usage("give either design or arms, not both")),
        (Some(label), None) => TrialDesign::from_label(label, total_n),
        (None, Some(arms)) => TrialDesign::new(format!("custom{}", arms.len()), arms.clone(), total_n),
        (None, None) => TrialDesign::from_label("ED7", total_n),
    }
    .map_err(|e| usage(e.to_string()))?;
    let methods = file
        .methods
        .clone()
        .unwrap_or_else(|| vec!["FP".to_string()])
        .iter()
        .map(|m| m.parse::<Method>().map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(usage("custom experiment has an empty method list"));
    }
    Ok(Experiment::Custom {
        scenarios,
        design,
        methods,
    })
}

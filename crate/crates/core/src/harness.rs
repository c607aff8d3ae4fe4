//! Experiment cells, Monte Carlo execution and sweep aggregation.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::design::TrialDesign;
use crate::error::{domain, Error, Result};
use crate::fit::{FittedCurve, FpSelection, Method};
use crate::glm::MAX_ITER;
use crate::metrics::{sabc, summarize, SabcSummary, DEFAULT_STEP};
use crate::scenario::{ScenarioCurve, D_MAX, D_MIN};
use crate::simulate::{derive_stream, simulate_trial};

/// Default number of simulated trials per cell.
pub const DEFAULT_N_SIMS: usize = 1000;
/// Total sample sizes of the sample-size sweep (all divisible by 7).
pub const N_GRID: [u32; 9] = [252, 301, 350, 406, 455, 504, 602, 756, 1001];
pub const BASE_N: u32 = 504;
/// Total sample size used when comparing numbers of arms.
pub const ARMS_N: u32 = 500;
pub const ARM_COUNTS: [usize; 5] = [3, 5, 7, 9, 20];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentCell {
    pub scenario: ScenarioCurve,
    pub design: TrialDesign,
    pub method: Method,
    pub n_sims: usize,
    pub master_seed: u64,
}

impl ExperimentCell {
    /// File-system friendly identifier, e.g. `s5_ED7_n504_FP`.
    pub fn id(&self) -> String {
        format!(
            "s{}_{}_n{}_{}",
            self.scenario.id(),
            self.design.label(),
            self.design.total_n(),
            self.method
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub step: f64,
    /// Number of leading replicates whose fitted curves are kept.
    pub curve_sample: usize,
    pub fp_selection: FpSelection,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            curve_sample: 0,
            fp_selection: FpSelection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitStatus {
    pub converged: bool,
    pub ridged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvergenceCounts {
    pub converged: usize,
    pub ridged: usize,
    pub max_iter: usize,
}

impl ConvergenceCounts {
    fn tally(status: &[FitStatus]) -> Self {
        let mut c = Self::default();
        for s in status {
            c.converged += usize::from(s.converged);
            c.ridged += usize::from(s.ridged);
            c.max_iter += usize::from(s.iterations >= MAX_ITER);
        }
        c
    }

    fn add(&mut self, other: &Self) {
        self.converged += other.converged;
        self.ridged += other.ridged;
        self.max_iter += other.max_iter;
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: ExperimentCell,
    pub per_sim_sabc: Vec<f64>,
    pub per_sim_status: Vec<FitStatus>,
    pub summary: SabcSummary,
    pub convergence: ConvergenceCounts,
    /// Fitted curves of the first `curve_sample` replicates.
    pub sample_curves: Vec<FittedCurve>,
    pub step: f64,
    pub fp_selection: FpSelection,
}

struct SimOutcome {
    sabc: f64,
    status: FitStatus,
    curve: Option<FittedCurve>,
}

/// Runs every replicate of a cell. Replicates are independent (one derived
/// stream each) and results are collected by index, so the output does not
/// depend on the number of worker threads.
pub fn run_cell(cell: &ExperimentCell, opts: &RunOptions) -> Result<CellResult> {
    if cell.n_sims == 0 {
        return Err(domain(format!("cell {} has n_sims = 0", cell.id())));
    }
    let outcomes: Vec<Result<SimOutcome>> = (0..cell.n_sims)
        .into_par_iter()
        .map(|i| {
            let mut stream = derive_stream(
                cell.master_seed,
                cell.scenario.id(),
                cell.design.label(),
                i as u64,
            );
            let data = simulate_trial(&cell.design, &cell.scenario, &mut stream)?;
            let fitted = cell.method.fit_with(&data, opts.fp_selection)?;
            let value = sabc(&cell.scenario, &fitted, D_MIN, D_MAX, opts.step)?;
            Ok(SimOutcome {
                sabc: value,
                status: FitStatus {
                    converged: fitted.glm.converged,
                    ridged: fitted.glm.ridged,
                    iterations: fitted.glm.iterations,
                },
                curve: (i < opts.curve_sample).then_some(fitted),
            })
        })
        .collect();

    let mut per_sim_sabc = Vec::with_capacity(cell.n_sims);
    let mut per_sim_status = Vec::with_capacity(cell.n_sims);
    let mut sample_curves = Vec::new();
    for (sim_index, outcome) in outcomes.into_iter().enumerate() {
        let o = outcome.map_err(|e| Error::Cell {
            cell: cell.id(),
            sim_index,
            source: Box::new(e),
        })?;
        per_sim_sabc.push(o.sabc);
        per_sim_status.push(o.status);
        sample_curves.extend(o.curve);
    }
    Ok(CellResult {
        cell: cell.clone(),
        summary: summarize(&per_sim_sabc)?,
        convergence: ConvergenceCounts::tally(&per_sim_status),
        per_sim_sabc,
        per_sim_status,
        sample_curves,
        step: opts.step,
        fp_selection: opts.fp_selection,
    })
}

/// A cell that could not be completed.
#[derive(Debug)]
pub struct FailedCell {
    pub cell: ExperimentCell,
    pub error: Error,
}

#[derive(Debug)]
pub struct SweepResult {
    pub results: Vec<CellResult>,
    pub failures: Vec<FailedCell>,
}

/// One line of the summary table; `scenario == None` marks a pooled row.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: Option<u8>,
    pub design: String,
    pub method: Method,
    pub total_n: u32,
    pub summary: SabcSummary,
    pub convergence: ConvergenceCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    method: Method,
    design_kind: u8,
    n_arms: usize,
    design: String,
    total_n: u32,
}

impl GroupKey {
    fn of(cell: &ExperimentCell) -> Self {
        let label = cell.design.label();
        let design_kind = if label.starts_with("ED") {
            0
        } else if label.starts_with("NED") {
            1
        } else {
            2
        };
        Self {
            method: cell.method,
            design_kind,
            n_arms: cell.design.n_arms(),
            design: label.to_string(),
            total_n: cell.design.total_n(),
        }
    }
}

impl SweepResult {
    /// Per-cell rows ordered by (method, design, total N, scenario), each
    /// group followed by its pooled "Overall" row.
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<GroupKey, Vec<&CellResult>> = BTreeMap::new();
        for r in &self.results {
            groups.entry(GroupKey::of(&r.cell)).or_default().push(r);
        }
        let mut rows = Vec::new();
        for (key, mut members) in groups {
            members.sort_by_key(|r| r.cell.scenario.id());
            let mut pooled = Vec::new();
            let mut counts = ConvergenceCounts::default();
            for r in &members {
                rows.push(SummaryRow {
                    scenario: Some(r.cell.scenario.id()),
                    design: key.design.clone(),
                    method: key.method,
                    total_n: key.total_n,
                    summary: r.summary,
                    convergence: r.convergence,
                });
                pooled.extend_from_slice(&r.per_sim_sabc);
                counts.add(&r.convergence);
            }
            rows.push(SummaryRow {
                scenario: None,
                design: key.design.clone(),
                method: key.method,
                total_n: key.total_n,
                summary: summarize(&pooled).expect("groups are non-empty"),
                convergence: counts,
            });
        }
        rows
    }

    pub fn find(&self, scenario: u8, design: &str, total_n: u32, method: Method) -> Option<&CellResult> {
        self.results.iter().find(|r| {
            r.cell.scenario.id() == scenario
                && r.cell.design.label() == design
                && r.cell.design.total_n() == total_n
                && r.cell.method == method
        })
    }
}

/// Runs cells in order; a failing cell is recorded and the sweep continues.
pub fn run_sweep(cells: &[ExperimentCell], opts: &RunOptions) -> Result<SweepResult> {
    if cells.is_empty() {
        return Err(domain("sweep has no cells"));
    }
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for cell in cells {
        match run_cell(cell, opts) {
            Ok(r) => results.push(r),
            Err(error) => failures.push(FailedCell {
                cell: cell.clone(),
                error,
            }),
        }
    }
    Ok(SweepResult { results, failures })
}

/// Named preset experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Base case: ED7, N = 504, FP.
    Table2,
    /// All five methods on the base-case design.
    Methods,
    /// FP on ED7 over the total sample-size grid.
    Nsweep,
    /// FP with 3, 5, 7, 9 or 20 equidistant arms and N = 500.
    Arms,
    /// ED7 vs NED5 with FP, LS3, LSNE and MARS at N = 504.
    Placement,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Table2,
        Preset::Methods,
        Preset::Nsweep,
        Preset::Arms,
        Preset::Placement,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Table2 => "table2",
            Preset::Methods => "methods",
            Preset::Nsweep => "nsweep",
            Preset::Arms => "arms",
            Preset::Placement => "placement",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn cells(&self, master_seed: u64, n_sims: usize) -> Vec<ExperimentCell> {
        let mut out = Vec::new();
        let mut push = |label: &str, total_n: u32, method: Method| {
            let design = TrialDesign::from_label(label, total_n).expect("preset design");
            for scenario in ScenarioCurve::all() {
                out.push(ExperimentCell {
                    scenario,
                    design: design.clone(),
                    method,
                    n_sims,
                    master_seed,
                });
            }
        };
        match self {
            Preset::Table2 => push("ED7", BASE_N, Method::Fp),
            Preset::Methods => {
                for m in Method::ALL {
                    push("ED7", BASE_N, m);
                }
            }
            Preset::Nsweep => {
                for n in N_GRID {
                    push("ED7", n, Method::Fp);
                }
            }
            Preset::Arms => {
                for k in ARM_COUNTS {
                    push(&format!("ED{k}"), ARMS_N, Method::Fp);
                }
            }
            Preset::Placement => {
                for m in [Method::Fp, Method::Ls3, Method::Lsne, Method::Mars] {
                    for label in ["ED7", "NED5"] {
                        push(label, BASE_N, m);
                    }
                }
            }
        }
        out
    }
}

/// Every cell needed for the base-case table and the sensitivity figures:
/// method comparison, sample-size grid, number of arms and arm placement.
pub fn preset_experiments(master_seed: u64, n_sims: usize) -> Vec<ExperimentCell> {
    [Preset::Methods, Preset::Nsweep, Preset::Arms, Preset::Placement]
        .iter()
        .flat_map(|p| p.cells(master_seed, n_sims))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_shapes() {
        assert_eq!(Preset::Table2.cells(1, 10).len(), 8);
        assert_eq!(Preset::Methods.cells(1, 10).len(), 40);
        assert_eq!(Preset::Nsweep.cells(1, 10).len(), 72);
        assert_eq!(Preset::Arms.cells(1, 10).len(), 40);
        assert_eq!(Preset::Placement.cells(1, 10).len(), 64);
        assert_eq!(preset_experiments(1, 10).len(), 40 + 72 + 40 + 64);
        assert_eq!(N_GRID.len(), 9);
        assert!(N_GRID.iter().all(|n| n % 7 == 0));
        let ned = Preset::Placement
            .cells(1, 10)
            .into_iter()
            .find(|c| c.design.label() == "NED5")
            .unwrap();
        assert_eq!(ned.design.arms(), &[10.0, 11.0, 13.0, 15.0, 20.0]);
        let arms: Vec<usize> = Preset::Arms
            .cells(1, 10)
            .iter()
            .map(|c| c.design.n_arms())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        assert_eq!(arms, vec![3, 5, 7, 9, 20]);
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()), Some(p));
        }
    }

    #[test]
    fn single_sim_cell() {
        let cell = &Preset::Table2.cells(3, 1)[0];
        let r = run_cell(cell, &RunOptions::default()).unwrap();
        assert_eq!(r.per_sim_sabc.len(), 1);
        let v = r.per_sim_sabc[0];
        let s = r.summary;
        assert_eq!([s.min, s.p5, s.median, s.p95, s.max, s.mean], [v; 6]);
    }

    #[test]
    fn pooled_row_concatenates_scenarios() {
        let cells = Preset::Table2.cells(8, 20);
        let sweep = run_sweep(&cells, &RunOptions::default()).unwrap();
        let rows = sweep.summary_rows();
        assert_eq!(rows.len(), 9);
        let overall = rows.last().unwrap();
        assert_eq!(overall.scenario, None);
        assert_eq!(overall.summary.n_sims, 160);
        let min = rows[..8].iter().map(|r| r.summary.min).fold(f64::INFINITY, f64::min);
        let max = rows[..8].iter().map(|r| r.summary.max).fold(0.0, f64::max);
        assert_eq!(overall.summary.min, min);
        assert_eq!(overall.summary.max, max);
        for r in &sweep.results {
            assert_eq!(summarize(&r.per_sim_sabc).unwrap(), r.summary);
        }
    }

    #[test]
    fn methods_share_simulated_data() {
        // Same scenario/design/seed: identical trials regardless of method,
        // so LS and FP fits see the same counts.
        let mut cell = Preset::Table2.cells(5, 3)[0].clone();
        let opts = RunOptions {
            curve_sample: 3,
            ..RunOptions::default()
        };
        let fp = run_cell(&cell, &opts).unwrap();
        cell.method = Method::Ls3;
        let ls = run_cell(&cell, &opts).unwrap();
        assert_eq!(fp.sample_curves.len(), 3);
        assert_eq!(ls.sample_curves.len(), 3);
        assert_ne!(fp.per_sim_sabc, ls.per_sim_sabc);
    }

    #[test]
    fn empty_sweep_rejected() {
        assert!(run_sweep(&[], &RunOptions::default()).is_err());
    }

    #[test]
    fn bad_step_aborts_cell_with_index() {
        let cell = &Preset::Table2.cells(3, 2)[0];
        let err = run_cell(
            cell,
            &RunOptions {
                step: 0.3,
                ..RunOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cell { sim_index: 0, .. }));
        let sweep = run_sweep(
            std::slice::from_ref(cell),
            &RunOptions {
                step: 0.3,
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(sweep.failures.len(), 1);
        assert!(sweep.results.is_empty());
    }
}

//! Grid sweeps: every cell of `rules x M x N x k_star x dr x k` runs
//! `trials_per_cell` generate/solve/verify pipelines with seeds
//! `base_seed + trial`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ait_core::io::{format_float, read_text, write_text};
use ait_core::theory::{verify_trace, TheoryBounds};
use ait_core::{
    coherence, generate_instance, solve, InstanceSpec, MatrixEnsemble, SolverConfig, ThresholdRule,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{to_json, Timing, SCHEMA_VERSION};
use crate::{CliError, Outcome, Result, SweepArgs};

pub const THREADS_ENV: &str = "AIT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessCriterion {
    /// Final support equals the true support.
    SupportExact,
    /// `||x - x*||_inf < eps` in original coordinates.
    LinfBelow(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub rules: Vec<ThresholdRule>,
    pub k: Vec<usize>,
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub k_star: Vec<usize>,
    pub dr: Vec<f64>,
    pub trials_per_cell: usize,
    pub base_seed: u64,
    pub success_criterion: SuccessCriterion,
    #[serde(default)]
    pub ensemble: MatrixEnsemble,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("rules", self.rules.is_empty()),
            ("k", self.k.is_empty()),
            ("M", self.m.is_empty()),
            ("N", self.n.is_empty()),
            ("k_star", self.k_star.is_empty()),
            ("dr", self.dr.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(CliError::Usage(format!("sweep grid {name:?} is empty")));
        }
        if self.trials_per_cell == 0 {
            return Err(CliError::Usage("trials_per_cell must be positive".into()));
        }
        if let SuccessCriterion::LinfBelow(eps) = self.success_criterion {
            if eps.is_nan() || eps <= 0.0 {
                return Err(CliError::Usage(format!(
                    "linf_below needs eps > 0, got {eps}"
                )));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &rule in &self.rules {
            for &m in &self.m {
                for &n in &self.n {
                    for &k_star in &self.k_star {
                        for &dr in &self.dr {
                            for &k in &self.k {
                                cells.push(Cell {
                                    rule,
                                    m,
                                    n,
                                    k_star,
                                    dr,
                                    k,
                                });
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rule: ThresholdRule,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k_star: usize,
    pub dr: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub support_identified_at: Option<usize>,
    pub hypotheses_hold: bool,
    pub iterations_run: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub cell: Cell,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean over trials where the support was identified.
    pub mean_support_identified_at: Option<f64>,
    pub identified_trials: usize,
    /// Fraction of trials whose realized coherence met the hypotheses.
    pub hypothesis_fraction: f64,
    pub failed_trials: usize,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema: u32,
    pub spec: SweepSpec,
    pub cells: Vec<CellSummary>,
    pub total_trials: usize,
    pub total_successes: usize,
    pub timing: Timing,
}

pub fn run_trial(spec: &SweepSpec, cell: &Cell, trial: usize) -> TrialOutcome {
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let mut out = TrialOutcome {
        trial,
        seed,
        success: false,
        support_identified_at: None,
        hypotheses_hold: false,
        iterations_run: 0,
        error: None,
    };
    let mut attempt = || -> ait_core::Result<()> {
        let inst_spec = InstanceSpec::new(cell.m, cell.n, cell.k_star, cell.dr, seed)
            .with_ensemble(spec.ensemble);
        let inst = generate_instance(&inst_spec)?;
        let truth = inst
            .truth
            .as_ref()
            .expect("generated instances carry a truth");
        let mut config = SolverConfig::new(cell.rule, cell.k);
        if let Some(n) = spec.max_iterations {
            config = config.with_max_iterations(n);
        }
        let res = solve(&inst, &config)?;
        let mu = coherence(&inst.matrix).mu;
        let bounds = TheoryBounds::for_truth(cell.rule, cell.k, mu, truth);
        let verdict = verify_trace(&res.trace, truth, &bounds)?;
        out.iterations_run = res.iterations_run;
        out.hypotheses_hold = bounds.hypotheses.recovery_guaranteed;
        out.support_identified_at = verdict.support_identified_at;
        out.success = !res.diverged
            && match spec.success_criterion {
                SuccessCriterion::SupportExact => {
                    let mut star = truth.support.clone();
                    star.sort_unstable();
                    res.final_support == star
                }
                SuccessCriterion::LinfBelow(eps) => {
                    (&res.final_x - inst.matrix.to_original(&truth.signal)).amax() < eps
                }
            };
        Ok(())
    };
    if let Err(e) = attempt() {
        out.error = Some(e.to_string());
    }
    out
}

fn summarize(cell: Cell, outcomes: &[TrialOutcome]) -> CellSummary {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.success).count();
    let identified: Vec<usize> = outcomes
        .iter()
        .filter_map(|o| o.support_identified_at)
        .collect();
    CellSummary {
        cell,
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        mean_support_identified_at: (!identified.is_empty())
            .then(|| identified.iter().sum::<usize>() as f64 / identified.len() as f64),
        identified_trials: identified.len(),
        hypothesis_fraction: outcomes.iter().filter(|o| o.hypotheses_hold).count() as f64
            / trials as f64,
        failed_trials: outcomes.iter().filter(|o| o.error.is_some()).count(),
        first_error: outcomes.iter().find_map(|o| o.error.clone()),
    }
}

/// Runs every trial; results are ordered by cell, then trial index,
/// independent of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CellSummary>> {
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials_per_cell).map(move |t| (c, t)))
        .collect();
    let work = || -> Vec<TrialOutcome> {
        jobs.par_iter()
            .map(|&(c, t)| run_trial(spec, &cells[c], t))
            .collect()
    };
    let outcomes = match std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(outcomes
        .chunks(spec.trials_per_cell)
        .zip(cells)
        .map(|(chunk, cell)| summarize(cell, chunk))
        .collect())
}

pub const CSV_HEADER: &str = "rule,M,N,k_star,dr,k,trials,successes,success_rate,\
mean_support_identified_at,identified_trials,hypothesis_fraction,failed_trials";

pub fn to_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in cells {
        let c = &s.cell;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.rule,
            c.m,
            c.n,
            c.k_star,
            format_float(c.dr),
            c.k,
            s.trials,
            s.successes,
            format_float(s.success_rate),
            s.mean_support_identified_at
                .map(format_float)
                .unwrap_or_default(),
            s.identified_trials,
            format_float(s.hypothesis_fraction),
            s.failed_trials,
        );
    }
    out
}

pub fn read_spec(path: &Path) -> Result<SweepSpec> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn run(args: &SweepArgs) -> Result<Outcome> {
    let spec = read_spec(&args.spec)?;
    let started = Instant::now();
    let cells = run_sweep(&spec)?;
    let wall_seconds = started.elapsed().as_secs_f64();

    fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.clone(),
        source,
    })?;
    write_text(&args.out.join("sweep.csv"), &to_csv(&cells))?;
    let summary = SweepSummary {
        schema: SCHEMA_VERSION,
        total_trials: cells.iter().map(|c| c.trials).sum(),
        total_successes: cells.iter().map(|c| c.successes).sum(),
        spec,
        cells,
        timing: Timing { wall_seconds },
    };
    write_text(&args.out.join("summary.json"), &to_json(&summary))?;
    for c in summary.cells.iter().filter(|c| c.failed_trials > 0) {
        eprintln!(
            "warning: {} of {} trials failed in cell {:?}: {}",
            c.failed_trials,
            c.trials,
            c.cell,
            c.first_error.as_deref().unwrap_or("")
        );
    }
    println!(
        "{} cells, {} trials, {} successes -> {}",
        summary.cells.len(),
        summary.total_trials,
        summary.total_successes,
        args.out.display()
    );
    Ok(Outcome::Ok)
}

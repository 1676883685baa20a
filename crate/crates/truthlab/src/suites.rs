//! Verification suites over one instance.

use serde::{Deserialize, Serialize};
use truthlab_core::boundary::{
    alpha_bounds_check, bounded_slope_check, lipschitz_check, young_check_edge, AlphaReport,
    BoundaryProbe, LipschitzReport, Side, SlopeReport, YoungReport,
};
use truthlab_core::mechanism::AllocationOracle;
use truthlab_core::truthcheck::{wmon_sweep, Sampler, WmonReport};
use truthlab_core::{ExactValue, Instance, Result, TaskId};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Wmon,
    Young,
    Slope,
    Lipschitz,
    Alphas,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct YoungEntry {
    pub edge: TaskId,
    pub report: YoungReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "lowercase")]
pub enum SuiteReport {
    Wmon(WmonReport),
    Young { entries: Vec<YoungEntry> },
    Slope { entries: Vec<SlopeReport> },
    Lipschitz { entries: Vec<LipschitzReport> },
    Alphas { entries: Vec<AlphaReport> },
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        match self {
            SuiteReport::Wmon(r) => r.passed(),
            SuiteReport::Young { entries } => entries.iter().all(|e| e.report.passed),
            SuiteReport::Slope { entries } => entries.iter().all(|e| e.passed()),
            SuiteReport::Lipschitz { entries } => entries.iter().all(|e| e.passed()),
            SuiteReport::Alphas { entries } => entries.iter().all(|e| e.passed()),
        }
    }

    /// One `(item, passed)` row per checked item, for flat CSV output.
    pub fn rows(&self) -> Vec<(String, bool)> {
        match self {
            SuiteReport::Wmon(r) => {
                let mut rows = vec![(format!("trials={}", r.trials), r.passed())];
                rows.extend(
                    r.violations
                        .iter()
                        .map(|v| (format!("trial={} machine={}", v.trial, v.machine), false)),
                );
                rows
            }
            SuiteReport::Young { entries } => entries
                .iter()
                .map(|e| (format!("edge={} a={}", e.edge, e.report.a), e.report.passed))
                .collect(),
            SuiteReport::Slope { entries } => entries
                .iter()
                .map(|e| (format!("edge={} root={}", e.edge, e.root), e.passed()))
                .collect(),
            SuiteReport::Lipschitz { entries } => entries
                .iter()
                .map(|e| (format!("edge={}", e.edge), e.passed()))
                .collect(),
            SuiteReport::Alphas { entries } => entries
                .iter()
                .flat_map(|r| {
                    r.entries.iter().map(move |e| {
                        (
                            format!("root={} edge={}", r.root, e.edge),
                            e.lower_holds && e.upper_holds,
                        )
                    })
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub trials: u64,
    pub tolerance: ExactValue,
}

fn edges(instance: &Instance) -> Vec<TaskId> {
    instance
        .tasks()
        .iter()
        .filter(|t| !t.is_loop())
        .map(|t| t.id)
        .collect()
}

pub fn run_suite<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    suite: Suite,
    opts: &SuiteOptions,
) -> Result<SuiteReport> {
    let tol = opts.tolerance.clone();
    let probe = |e: TaskId, side: Side| -> Result<BoundaryProbe<'_, O>> {
        Ok(BoundaryProbe::new(oracle, instance, e, side)?.with_tolerance(tol.clone()))
    };
    Ok(match suite {
        Suite::Wmon => SuiteReport::Wmon(wmon_sweep(
            oracle,
            instance,
            &Sampler::random(opts.seed),
            opts.trials,
        )?),
        Suite::Young => {
            let step = ExactValue::pow2_neg(6);
            let mut entries = Vec::new();
            for e in edges(instance) {
                let f = probe(e, Side::TowardA)?;
                let g = probe(e, Side::TowardB)?;
                for a in [ExactValue::ratio(1, 2), ExactValue::one()] {
                    entries.push(YoungEntry {
                        edge: e,
                        report: young_check_edge(&f, &g, &a, &step)?,
                    });
                }
            }
            SuiteReport::Young { entries }
        }
        Suite::Slope => {
            let samples: Vec<ExactValue> = (1..=8).map(|k| ExactValue::ratio(k, 8)).collect();
            let mut entries = Vec::new();
            for e in edges(instance) {
                for side in [Side::TowardA, Side::TowardB] {
                    entries.push(bounded_slope_check(&probe(e, side)?, &samples)?);
                }
            }
            SuiteReport::Slope { entries }
        }
        Suite::Lipschitz => {
            let step = ExactValue::ratio(1, 16);
            let mut entries = Vec::new();
            for e in edges(instance) {
                let p = probe(e, Side::TowardA)?;
                let others: Vec<TaskId> = instance
                    .tasks()
                    .iter()
                    .filter(|t| t.id != e && t.supports(p.root))
                    .map(|t| t.id)
                    .collect();
                let mut deltas: Vec<Vec<(TaskId, ExactValue)>> =
                    others.iter().map(|&o| vec![(o, step.clone())]).collect();
                if others.len() > 1 {
                    deltas.push(others.iter().map(|&o| (o, step.clone())).collect());
                }
                let s = instance.value(e, p.leaf).expect("endpoint").clone();
                entries.push(lipschitz_check(&p, &s, &deltas)?);
            }
            SuiteReport::Lipschitz { entries }
        }
        Suite::Alphas => {
            let mut entries = Vec::new();
            for root in 0..instance.machines() {
                let es: Vec<TaskId> = instance
                    .tasks()
                    .iter()
                    .filter(|t| !t.is_loop() && t.supports(root))
                    .filter(|t| {
                        t.other(root)
                            .and_then(|l| t.value(l))
                            .is_some_and(|v| v.is_positive())
                    })
                    .map(|t| t.id)
                    .collect();
                if !es.is_empty() {
                    entries.push(alpha_bounds_check(oracle, instance, root, &es, &tol)?);
                }
            }
            SuiteReport::Alphas { entries }
        }
    })
}

//! Weak monotonicity and the two tool lemmas built on it.
//!
//! For a machine `i` deviating from `t` to `t'`, WMON requires
//! `sum_j (a'_ij - a_ij)(t'_ij - t_ij) <= 0`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{Allocation, Instance, TaskId};
use crate::mechanism::{same_except, AllocationOracle};
use crate::par;
use crate::value::ExactValue;

/// Log2 of the tie perturbation applied to sampled values.
pub const TIE_NUDGE_LOG2: u32 = 20;

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WmonViolation {
    pub machine: usize,
    pub before: Instance,
    pub after: Instance,
    /// Strictly positive.
    pub sum: ExactValue,
    /// Sweep trial that produced the pair (0 for a direct check).
    pub trial: u64,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum WmonCheck {
    Pass { sum: ExactValue },
    Violation(WmonViolation),
}

impl WmonCheck {
    pub fn sum(&self) -> &ExactValue {
        match self {
            WmonCheck::Pass { sum } => sum,
            WmonCheck::Violation(v) => &v.sum,
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self, WmonCheck::Pass { .. })
    }
}

/// `sum_j (a'_ij - a_ij)(t'_ij - t_ij)` for allocations already computed.
pub fn wmon_sum(
    before: &Instance,
    after: &Instance,
    a: &Allocation,
    a2: &Allocation,
    machine: usize,
) -> ExactValue {
    let mut sum = ExactValue::zero();
    for (idx, (t, t2)) in before.tasks().iter().zip(after.tasks()).enumerate() {
        let (Some(x), Some(x2)) = (t.value(machine), t2.value(machine)) else {
            continue;
        };
        let was = a.machine_at(idx) == machine;
        let is = a2.machine_at(idx) == machine;
        if was != is {
            let d = x2 - x;
            if is {
                sum += d;
            } else {
                sum -= &d;
            }
        }
    }
    sum
}

/// Checks WMON for one deviation of `machine` from `before` to `after`.
pub fn wmon_pair<O: AllocationOracle + ?Sized>(
    oracle: &O,
    before: &Instance,
    after: &Instance,
    machine: usize,
) -> Result<WmonCheck> {
    same_except(before, after, machine)?;
    let a = oracle.allocate(before)?;
    let a2 = oracle.allocate(after)?;
    a.validate(before)?;
    a2.validate(after)?;
    let sum = wmon_sum(before, after, &a, &a2, machine);
    Ok(if sum.is_positive() {
        WmonCheck::Violation(WmonViolation {
            machine,
            before: before.clone(),
            after: after.clone(),
            sum,
            trial: 0,
        })
    } else {
        WmonCheck::Pass { sum }
    })
}

/// How sweep pairs are drawn.
#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sampler {
    /// Every value is an independent dyadic `k / 2^denominator_log2` in
    /// `[0, max_value]`.
    Random {
        seed: u64,
        denominator_log2: u32,
        max_value: u32,
    },
    /// The deviating machine's values before and after run through every
    /// combination of `levels`; other values stay at the base instance.
    Grid { levels: Vec<ExactValue> },
}

impl Sampler {
    pub fn random(seed: u64) -> Self {
        Sampler::Random {
            seed,
            denominator_log2: 12,
            max_value: 4,
        }
    }

    /// Dyadic levels `0, 1/2^d, ..., max` for grid sweeps.
    pub fn dyadic_grid(max_value: i64, denominator_log2: u32) -> Self {
        let steps = max_value << denominator_log2;
        Sampler::Grid {
            levels: (0..=steps)
                .map(|k| ExactValue::dyadic(k, denominator_log2))
                .collect(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WmonReport {
    pub trials: u64,
    pub violations: Vec<WmonViolation>,
}

impl WmonReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn nudge_ties(inst: &mut Instance, machine: usize, free: &[bool]) {
    let nudge = ExactValue::pow2_neg(TIE_NUDGE_LOG2);
    let ids: Vec<(TaskId, ExactValue)> = inst
        .tasks()
        .iter()
        .zip(free)
        .filter(|(t, &f)| f && !t.is_loop() && t.supports(machine) && t.va == t.vb)
        .map(|(t, _)| (t.id, t.value(machine).expect("endpoint") + &nudge))
        .collect();
    for (id, v) in ids {
        inst.set_value(id, machine, v).expect("endpoint");
    }
}

/// Tasks in `free` that `machine` can run.
fn deviating_tasks(base: &Instance, machine: usize, free: &[bool]) -> Vec<TaskId> {
    base.tasks()
        .iter()
        .zip(free)
        .filter(|(t, &f)| f && t.supports(machine))
        .map(|(t, _)| t.id)
        .collect()
}

fn random_value<R: Rng>(rng: &mut R, d: u32, max: u32) -> ExactValue {
    let hi = (max as i64) << d;
    ExactValue::dyadic(rng.gen_range(0..=hi), d)
}

/// Draws the pair for one trial, or `None` when the trial has nothing to vary.
fn draw_pair(
    base: &Instance,
    free: &[bool],
    sampler: &Sampler,
    trial: u64,
) -> Option<(usize, Instance, Instance)> {
    let n = base.machines();
    match sampler {
        Sampler::Random {
            seed,
            denominator_log2,
            max_value,
        } => {
            let mut rng = par::stream_rng(*seed, trial);
            let machine = rng.gen_range(0..n);
            let mut before = base.clone();
            for (t, &f) in base.tasks().iter().zip(free) {
                if !f {
                    continue;
                }
                let (sup, k) = t.support();
                for &m in &sup[..k] {
                    let v = random_value(&mut rng, *denominator_log2, *max_value);
                    before.set_value(t.id, m, v).expect("endpoint");
                }
            }
            let dev = deviating_tasks(base, machine, free);
            if dev.is_empty() {
                return None;
            }
            let mut after = before.clone();
            for &id in &dev {
                let v = random_value(&mut rng, *denominator_log2, *max_value);
                after.set_value(id, machine, v).expect("endpoint");
            }
            nudge_ties(&mut before, machine, free);
            nudge_ties(&mut after, machine, free);
            Some((machine, before, after))
        }
        Sampler::Grid { levels } => {
            // trial index -> (machine, levels for before, levels for after)
            let mut rest = trial;
            let l = levels.len() as u64;
            for machine in 0..n {
                let dev = deviating_tasks(base, machine, free);
                let count = l.checked_pow(2 * dev.len() as u32).unwrap_or(u64::MAX);
                if dev.is_empty() {
                    continue;
                }
                if rest >= count {
                    rest -= count;
                    continue;
                }
                let mut before = base.clone();
                let mut after = base.clone();
                for &id in &dev {
                    before
                        .set_value(id, machine, levels[(rest % l) as usize].clone())
                        .expect("endpoint");
                    rest /= l;
                    after
                        .set_value(id, machine, levels[(rest % l) as usize].clone())
                        .expect("endpoint");
                    rest /= l;
                }
                nudge_ties(&mut before, machine, free);
                nudge_ties(&mut after, machine, free);
                return Some((machine, before, after));
            }
            None
        }
    }
}

/// Number of distinct grid pairs, saturating.
pub fn grid_size(base: &Instance, levels: usize) -> u64 {
    let free = alloc::vec![true; base.len()];
    (0..base.machines())
        .map(|m| {
            let d = deviating_tasks(base, m, &free).len() as u32;
            if d == 0 {
                0
            } else {
                (levels as u64).checked_pow(2 * d).unwrap_or(u64::MAX)
            }
        })
        .fold(0u64, |a, b| a.saturating_add(b))
}

fn sweep_scoped<O: AllocationOracle + ?Sized>(
    oracle: &O,
    base: &Instance,
    free: &[bool],
    sampler: &Sampler,
    trials: u64,
) -> Result<WmonReport> {
    if trials == 0 {
        return Err(Error::PreconditionViolated(
            "a sweep needs at least one trial".into(),
        ));
    }
    if let Sampler::Grid { levels } = sampler {
        if levels.is_empty() {
            return Err(Error::PreconditionViolated(
                "grid sweep needs levels".into(),
            ));
        }
    }
    let results = par::try_map_indices(trials as usize, |k| -> Result<Option<WmonViolation>> {
        let Some((machine, before, after)) = draw_pair(base, free, sampler, k as u64) else {
            return Ok(None);
        };
        match wmon_pair(oracle, &before, &after, machine)? {
            WmonCheck::Pass { .. } => Ok(None),
            WmonCheck::Violation(mut v) => {
                v.trial = k as u64;
                Ok(Some(v))
            }
        }
    })?;
    let mut violations: Vec<WmonViolation> = results.into_iter().flatten().collect();
    violations.sort_by_key(|a| a.trial);
    Ok(WmonReport { trials, violations })
}

/// Runs `trials` WMON checks on pairs drawn around `base`.
///
/// Random sampling redraws every value of `base` for `t`, then redraws the
/// deviating machine's row for `t'`. A value tied with the other endpoint is
/// nudged up by `2^-20` on the deviating side.
pub fn wmon_sweep<O: AllocationOracle + ?Sized>(
    oracle: &O,
    base: &Instance,
    sampler: &Sampler,
    trials: u64,
) -> Result<WmonReport> {
    let free = alloc::vec![true; base.len()];
    sweep_scoped(oracle, base, &free, sampler, trials)
}

/// WMON sweep in which the tasks of `fixed` keep their values from `base`.
pub fn restriction_check<O: AllocationOracle + ?Sized>(
    oracle: &O,
    base: &Instance,
    fixed: &[TaskId],
    sampler: &Sampler,
    trials: u64,
) -> Result<WmonReport> {
    for id in fixed {
        base.task_or_err(*id)?;
    }
    let free: Vec<bool> = base
        .tasks()
        .iter()
        .map(|t| !fixed.contains(&t.id))
        .collect();
    if !free.iter().any(|&f| f) {
        return Ok(WmonReport {
            trials: 0,
            violations: Vec::new(),
        });
    }
    sweep_scoped(oracle, base, &free, sampler, trials)
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgreementReport {
    pub machine: usize,
    pub deviation: Instance,
    /// Tasks of `S` or `S'` whose owner status for `machine` changed.
    pub disagreements: Vec<TaskId>,
    /// WMON sum of the same pair; positive whenever `disagreements` is not empty.
    pub wmon_sum: ExactValue,
}

impl AgreementReport {
    pub fn passed(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Lowers `machine`'s values on won tasks `decrease`, raises them on lost
/// tasks `increase`, and checks that `machine` keeps exactly the same tasks
/// of both sets. `deltas` gives the positive amount per task.
pub fn agreement_check<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    machine: usize,
    decrease: &[TaskId],
    increase: &[TaskId],
    deltas: &[(TaskId, ExactValue)],
) -> Result<AgreementReport> {
    let a = oracle.allocate(instance)?;
    a.validate(instance)?;
    let delta_of = |id: TaskId| -> Result<&ExactValue> {
        let d = deltas
            .iter()
            .find(|(t, _)| *t == id)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::PreconditionViolated(format!("no delta for task {id}")))?;
        if !d.is_positive() {
            return Err(Error::PreconditionViolated(format!(
                "delta for task {id} must be positive"
            )));
        }
        Ok(d)
    };
    let mut after = instance.clone();
    for &id in decrease {
        if a.machine_of(id) != Some(machine) {
            return Err(Error::PreconditionViolated(format!(
                "task {id} is not allocated to machine {machine}"
            )));
        }
        let v = instance
            .value(id, machine)
            .expect("allocated implies endpoint")
            - delta_of(id)?;
        if v.is_negative() {
            return Err(Error::PreconditionViolated(format!(
                "task {id} would go negative"
            )));
        }
        after.set_value(id, machine, v)?;
    }
    for &id in increase {
        let t = instance.task_or_err(id)?;
        if !t.supports(machine) || a.machine_of(id) == Some(machine) {
            return Err(Error::PreconditionViolated(format!(
                "task {id} is not an endpoint task lost by machine {machine}"
            )));
        }
        let v = instance.value(id, machine).expect("endpoint") + delta_of(id)?;
        after.set_value(id, machine, v)?;
    }
    let a2 = oracle.allocate(&after)?;
    a2.validate(&after)?;
    let disagreements = decrease
        .iter()
        .chain(increase)
        .copied()
        .filter(|&id| (a.machine_of(id) == Some(machine)) != (a2.machine_of(id) == Some(machine)))
        .collect();
    let wmon_sum = wmon_sum(instance, &after, &a, &a2, machine);
    Ok(AgreementReport {
        machine,
        deviation: after,
        disagreements,
        wmon_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Task;
    use crate::mechanism::{AffineMinimizer, FnOracle, MechanismSpec};
    use alloc::vec;

    fn v(n: i64) -> ExactValue {
        ExactValue::from_int(n)
    }

    fn r(p: i64, q: i64) -> ExactValue {
        ExactValue::ratio(p, q)
    }

    fn single(va: ExactValue, vb: ExactValue) -> Instance {
        Instance::new(2, vec![Task::new(0, 0, 1, va, vb)]).unwrap()
    }

    /// Machine 0 wins task 0 iff its value lies in [1, 2].
    fn window_oracle() -> FnOracle<impl Fn(&Instance) -> Result<Allocation> + Sync> {
        FnOracle(|inst: &Instance| {
            let ms = inst
                .tasks()
                .iter()
                .map(|t| {
                    if t.id == 0 && t.va >= v(1) && t.va <= v(2) {
                        t.a
                    } else if t.id == 0 {
                        t.b
                    } else {
                        t.support().0[0]
                    }
                })
                .collect();
            Ok(Allocation::from_machines(inst, ms))
        })
    }

    #[test]
    fn identical_pair_sums_to_zero() {
        let t = single(v(1), v(2));
        let c = wmon_pair(&MechanismSpec::Vcg, &t, &t, 0).unwrap();
        assert_eq!(c, WmonCheck::Pass { sum: v(0) });
    }

    #[test]
    fn vcg_losing_deviation() {
        let c = wmon_pair(
            &MechanismSpec::Vcg,
            &single(v(1), v(2)),
            &single(v(3), v(2)),
            0,
        )
        .unwrap();
        assert_eq!(c, WmonCheck::Pass { sum: v(-2) });
    }

    #[test]
    fn window_fixture_violates() {
        let o = window_oracle();
        let c = wmon_pair(&o, &single(r(1, 2), v(5)), &single(r(3, 2), v(5)), 0).unwrap();
        match c {
            WmonCheck::Violation(w) => assert_eq!(w.sum, v(1)),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn other_rows_must_not_move() {
        let err = wmon_pair(
            &MechanismSpec::Vcg,
            &single(v(1), v(2)),
            &single(v(1), v(3)),
            0,
        );
        assert!(matches!(err, Err(Error::BadDeviation(_))));
    }

    #[test]
    fn grid_sweep_finds_window_violation() {
        let o = window_oracle();
        let base = single(v(0), v(5));
        let sampler = Sampler::dyadic_grid(3, 1);
        let rep = wmon_sweep(&o, &base, &sampler, 1000).unwrap();
        assert!(!rep.passed());
        assert!(rep.violations.windows(2).all(|w| w[0].trial < w[1].trial));
    }

    #[test]
    fn random_sweep_vcg_clean() {
        let base = Instance::new(
            3,
            vec![
                Task::new(0, 0, 1, v(0), v(0)),
                Task::new(1, 0, 2, v(0), v(0)),
                Task::new(2, 1, 2, v(0), v(0)),
                Task::new(3, 0, 1, v(0), v(0)),
            ],
        )
        .unwrap();
        let rep = wmon_sweep(&MechanismSpec::Vcg, &base, &Sampler::random(3), 500).unwrap();
        assert!(rep.passed());
        let am = MechanismSpec::AffineMinimizer(AffineMinimizer::weighted(vec![v(1), v(2), v(1)]));
        assert!(wmon_sweep(&am, &base, &Sampler::random(4), 500)
            .unwrap()
            .passed());
    }

    #[test]
    fn sweep_is_reproducible() {
        let o = window_oracle();
        let base = single(v(0), v(1));
        let a = wmon_sweep(&o, &base, &Sampler::random(9), 200).unwrap();
        let b = wmon_sweep(&o, &base, &Sampler::random(9), 200).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn restriction_all_fixed_is_vacuous() {
        let base = single(v(1), v(2));
        let rep =
            restriction_check(&MechanismSpec::Vcg, &base, &[0], &Sampler::random(1), 10).unwrap();
        assert_eq!(rep.trials, 0);
        assert!(rep.passed());
    }

    #[test]
    fn restriction_keeps_bad_task() {
        let o = window_oracle();
        let base = Instance::new(
            2,
            vec![
                Task::new(0, 0, 1, v(0), v(5)),
                Task::new(1, 0, 1, v(1), v(1)),
            ],
        )
        .unwrap();
        let rep = restriction_check(&o, &base, &[1], &Sampler::dyadic_grid(3, 1), 1000).unwrap();
        assert!(!rep.passed());
        for w in &rep.violations {
            assert_eq!(w.before.task(1), base.task(1));
        }
    }

    #[test]
    fn agreement_trivial_and_vcg() {
        let t = single(v(1), v(2));
        let rep = agreement_check(&MechanismSpec::Vcg, &t, 0, &[], &[], &[]).unwrap();
        assert!(rep.passed());
        let rep = agreement_check(&MechanismSpec::Vcg, &t, 0, &[0], &[], &[(0, r(1, 2))]).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.deviation.value(0, 0), Some(&r(1, 2)));
    }

    #[test]
    fn agreement_precondition() {
        let t = single(v(3), v(2));
        let err = agreement_check(&MechanismSpec::Vcg, &t, 0, &[0], &[], &[(0, v(1))]);
        assert!(matches!(err, Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn agreement_failure_is_wmon_failure() {
        let o = window_oracle();
        // machine 0 wins at 3/2, lowering by 1 loses
        let t = single(r(3, 2), v(5));
        let rep = agreement_check(&o, &t, 0, &[0], &[], &[(0, v(1))]).unwrap();
        assert!(!rep.passed());
        assert!(rep.wmon_sum.is_positive());
        let c = wmon_pair(&o, &t, &rep.deviation, 0).unwrap();
        assert!(!c.passed());
    }
}

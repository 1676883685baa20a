//! Deterministic allocation oracles and their payments.
//!
//! Global tie rule: among cost ties, the allocation that is lexicographically
//! smallest in (task id, machine index) wins. Task-independent thresholds send
//! ties to endpoint `b`, and bundled groups send ties to the lower machine.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::{Allocation, Instance, Task, TaskId};
use crate::value::ExactValue;

/// Anything that maps an instance to an allocation.
///
/// Implementations must be pure: the same instance gives the same allocation
/// on every call and from every thread.
pub trait AllocationOracle: Sync {
    fn allocate(&self, instance: &Instance) -> Result<Allocation>;
}

impl<T: AllocationOracle + ?Sized> AllocationOracle for &T {
    fn allocate(&self, instance: &Instance) -> Result<Allocation> {
        (**self).allocate(instance)
    }
}

/// Wraps a closure as an oracle.
pub struct FnOracle<F>(pub F);

impl<F> AllocationOracle for FnOracle<F>
where
    F: Fn(&Instance) -> Result<Allocation> + Sync,
{
    fn allocate(&self, instance: &Instance) -> Result<Allocation> {
        (self.0)(instance)
    }
}

/// Per-machine payments for an allocation.
pub trait PaymentRule {
    fn payments(&self, instance: &Instance, alloc: &Allocation) -> Result<Vec<ExactValue>>;
}

/// Monotone piecewise-linear threshold `g` with `g(0) >= 0`.
///
/// `points` are breakpoints `(x, g(x))` starting at `x = 0` with strictly
/// increasing `x`; past the last one `g` continues with `tail_slope`.
#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Threshold {
    pub points: Vec<(ExactValue, ExactValue)>,
    pub tail_slope: ExactValue,
}

impl Threshold {
    /// `g(x) = slope * x`.
    pub fn linear(slope: ExactValue) -> Self {
        Threshold {
            points: vec![(ExactValue::zero(), ExactValue::zero())],
            tail_slope: slope,
        }
    }

    pub fn identity() -> Self {
        Self::linear(ExactValue::one())
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .points
            .first()
            .ok_or_else(|| Error::InvalidSpec("threshold needs at least one breakpoint".into()))?;
        if !first.0.is_zero() {
            return Err(Error::InvalidSpec(
                "first threshold breakpoint must be at x = 0".into(),
            ));
        }
        if first.1.is_negative() {
            return Err(Error::InvalidSpec(
                "threshold must satisfy g(0) >= 0".into(),
            ));
        }
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidSpec(
                    "threshold breakpoints must increase in x".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidSpec("threshold must be nondecreasing".into()));
            }
        }
        if self.tail_slope.is_negative() {
            return Err(Error::InvalidSpec(
                "threshold tail slope must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, x: &ExactValue) -> ExactValue {
        let pts = &self.points;
        for w in pts.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if x <= x1 {
                return y0 + &((y1 - y0) * (x - x0) / (x1 - x0));
            }
        }
        let (xl, yl) = pts.last().expect("validated");
        yl + &(&self.tail_slope * (x - xl))
    }

    /// `sup { x >= 0 : g(x) <= y }`, `None` when unbounded. Returns 0 when
    /// the set is empty.
    pub fn sup_at_most(&self, y: &ExactValue) -> Option<ExactValue> {
        let pts = &self.points;
        if &pts[0].1 > y {
            return Some(ExactValue::zero());
        }
        for w in pts.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if y1 > y {
                return Some(x0 + &((y - y0) * (x1 - x0) / (y1 - y0)));
            }
        }
        let (xl, yl) = pts.last().expect("validated");
        if self.tail_slope.is_zero() {
            None
        } else {
            Some(xl + &((y - yl) / &self.tail_slope))
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskConstant {
    pub task: TaskId,
    pub machine: usize,
    pub value: ExactValue,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PairKind {
    /// Charged when exactly one of the two tasks is on the pivot machine.
    Split,
    /// Charged when both or neither of the two tasks are on the pivot machine.
    Together,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairConstant {
    pub tasks: (TaskId, TaskId),
    pub machine: usize,
    pub kind: PairKind,
    pub value: ExactValue,
}

/// Constant charged when the allocation equals `assignment` exactly.
#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AllocationConstant {
    pub assignment: Vec<(TaskId, usize)>,
    pub value: ExactValue,
}

/// Largest task count for which whole-allocation constants are accepted.
pub const MAX_ALLOCATION_CONSTANT_TASKS: usize = 4;

/// Minimizes `sum_i lambda_i t_i(A_i) + gamma(A)`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AffineMinimizer {
    pub multipliers: Vec<ExactValue>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub task_constants: Vec<TaskConstant>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub pair_constants: Vec<PairConstant>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub allocation_constants: Vec<AllocationConstant>,
}

impl AffineMinimizer {
    pub fn weighted(multipliers: Vec<ExactValue>) -> Self {
        AffineMinimizer {
            multipliers,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.multipliers.iter().any(|l| !l.is_positive()) {
            return Err(Error::InvalidSpec(
                "multipliers must be strictly positive".into(),
            ));
        }
        let neg = self.task_constants.iter().any(|c| c.value.is_negative())
            || self.pair_constants.iter().any(|c| c.value.is_negative())
            || self
                .allocation_constants
                .iter()
                .any(|c| c.value.is_negative());
        if neg {
            return Err(Error::InvalidSpec("additive constants must be >= 0".into()));
        }
        if self.pair_constants.iter().any(|c| c.tasks.0 == c.tasks.1) {
            return Err(Error::InvalidSpec(
                "pair constant needs two distinct tasks".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskIndependent {
    pub thresholds: Vec<(TaskId, Threshold)>,
    pub default: Threshold,
}

impl TaskIndependent {
    pub fn uniform(g: Threshold) -> Self {
        TaskIndependent {
            thresholds: Vec::new(),
            default: g,
        }
    }

    pub fn threshold(&self, task: TaskId) -> &Threshold {
        self.thresholds
            .iter()
            .find(|(id, _)| *id == task)
            .map(|(_, g)| g)
            .unwrap_or(&self.default)
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate()?;
        for (_, g) in &self.thresholds {
            g.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bundling {
    pub multipliers: Vec<ExactValue>,
    pub groups: Vec<Vec<TaskId>>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConstantRule {
    LowerIndex,
    HigherIndex,
    EndpointA,
    EndpointB,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstantAllocation {
    pub assignment: Vec<(TaskId, usize)>,
    pub fallback: ConstantRule,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "variant"))]
pub enum MechanismSpec {
    Vcg,
    AffineMinimizer(AffineMinimizer),
    TaskIndependent(TaskIndependent),
    Bundling(Bundling),
    Constant(ConstantAllocation),
}

impl MechanismSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MechanismSpec::Vcg => Ok(()),
            MechanismSpec::AffineMinimizer(a) => a.validate(),
            MechanismSpec::TaskIndependent(t) => t.validate(),
            MechanismSpec::Bundling(b) => {
                if b.multipliers.iter().any(|l| !l.is_positive()) {
                    return Err(Error::InvalidSpec(
                        "multipliers must be strictly positive".into(),
                    ));
                }
                Ok(())
            }
            MechanismSpec::Constant(_) => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MechanismSpec::Vcg => "Vcg",
            MechanismSpec::AffineMinimizer(_) => "AffineMinimizer",
            MechanismSpec::TaskIndependent(_) => "TaskIndependent",
            MechanismSpec::Bundling(_) => "Bundling",
            MechanismSpec::Constant(_) => "Constant",
        }
    }
}

fn multiplier(lambda: &[ExactValue], m: usize) -> Result<&ExactValue> {
    lambda
        .get(m)
        .ok_or_else(|| Error::InvalidSpec(format!("no multiplier for machine {m}")))
}

/// Cheapest endpoint under weights, ties to the lower machine index.
fn weighted_min(t: &Task, lambda: Option<&[ExactValue]>) -> Result<usize> {
    let (sup, k) = t.support();
    if k == 1 {
        return Ok(sup[0]);
    }
    let cost = |m: usize| -> Result<ExactValue> {
        let v = t.value(m).expect("endpoint").clone();
        Ok(match lambda {
            Some(l) => multiplier(l, m)? * v,
            None => v,
        })
    };
    let (c0, c1) = (cost(sup[0])?, cost(sup[1])?);
    Ok(if c0 <= c1 { sup[0] } else { sup[1] })
}

/// Cost tables for one affine-minimizer evaluation.
struct AffineModel<'a> {
    instance: &'a Instance,
    /// Per task: (machine, cost) for each allowed machine, ascending.
    options: Vec<Vec<(usize, ExactValue)>>,
    /// (task index, task index, pivot, kind, value).
    pairs: Vec<(usize, usize, usize, PairKind, ExactValue)>,
    /// (machine per task index, value).
    full: Vec<(Vec<usize>, ExactValue)>,
}

impl<'a> AffineModel<'a> {
    /// `skip` removes that machine's own cost term and forbids it except on
    /// tasks it alone supports.
    fn new(spec: &AffineMinimizer, instance: &'a Instance, skip: Option<usize>) -> Result<Self> {
        let n = instance.machines();
        if spec.multipliers.len() < n {
            return Err(Error::InvalidSpec(format!(
                "{} multipliers for {} machines",
                spec.multipliers.len(),
                n
            )));
        }
        let mut options = Vec::with_capacity(instance.len());
        for t in instance.tasks() {
            let (sup, k) = t.support();
            let mut opts = Vec::with_capacity(k);
            for &m in &sup[..k] {
                if Some(m) == skip && k > 1 {
                    continue;
                }
                let mut c = if Some(m) == skip {
                    ExactValue::zero()
                } else {
                    &spec.multipliers[m] * t.value(m).expect("endpoint")
                };
                for tc in &spec.task_constants {
                    if tc.task == t.id && tc.machine == m {
                        c += &tc.value;
                    }
                }
                opts.push((m, c));
            }
            options.push(opts);
        }
        let mut pairs = Vec::new();
        for pc in &spec.pair_constants {
            if let (Some(i), Some(j)) =
                (instance.index_of(pc.tasks.0), instance.index_of(pc.tasks.1))
            {
                pairs.push((i.min(j), i.max(j), pc.machine, pc.kind, pc.value.clone()));
            }
        }
        let mut full = Vec::new();
        if !spec.allocation_constants.is_empty() {
            if instance.len() > MAX_ALLOCATION_CONSTANT_TASKS {
                return Err(Error::InvalidSpec(format!(
                    "whole-allocation constants need at most {} tasks, instance has {}",
                    MAX_ALLOCATION_CONSTANT_TASKS,
                    instance.len()
                )));
            }
            for ac in &spec.allocation_constants {
                let alloc = Allocation::from_pairs(ac.assignment.clone());
                if alloc.validate(instance).is_ok() {
                    let ms = alloc.entries().iter().map(|e| e.1).collect();
                    full.push((ms, ac.value.clone()));
                }
            }
        }
        Ok(AffineModel {
            instance,
            options,
            pairs,
            full,
        })
    }

    /// Connected groups of task indices linked by constants, each ascending.
    fn components(&self) -> Vec<Vec<usize>> {
        let m = self.options.len();
        if !self.full.is_empty() {
            return vec![(0..m).collect()];
        }
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(i, j, ..) in &self.pairs {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
        for i in 0..m {
            let r = find(&mut parent, i);
            groups[r].push(i);
        }
        groups.into_iter().filter(|g| !g.is_empty()).collect()
    }

    fn pair_charge(&self, kind: PairKind, pivot: usize, x: usize, y: usize) -> bool {
        let (px, py) = (x == pivot, y == pivot);
        match kind {
            PairKind::Split => px != py,
            PairKind::Together => px == py,
        }
    }

    /// Lexicographically first minimizer; returns (cost, machine per task).
    fn minimize(&self, cap: u128) -> Result<(ExactValue, Vec<usize>)> {
        let mut choice = vec![usize::MAX; self.options.len()];
        let mut total = ExactValue::zero();
        for comp in self.components() {
            if comp.len() == 1 {
                let i = comp[0];
                let best = self.options[i]
                    .iter()
                    .min_by(|a, b| a.1.cmp(&b.1))
                    .expect("every task has an allowed machine");
                // min_by keeps the first minimum, i.e. the lower machine index
                choice[i] = best.0;
                total += &best.1;
                continue;
            }
            let size: u128 = comp.iter().fold(1u128, |acc, &i| {
                acc.saturating_mul(self.options[i].len() as u128)
            });
            if size > cap {
                return Err(Error::InstanceTooLarge {
                    assignments: size,
                    cap,
                });
            }
            let (c, ms) = self.search(&comp);
            for (&i, m) in comp.iter().zip(ms) {
                choice[i] = m;
            }
            total += c;
        }
        Ok((total, choice))
    }

    fn search(&self, comp: &[usize]) -> (ExactValue, Vec<usize>) {
        let mut assigned = vec![usize::MAX; self.options.len()];
        let mut best: Option<(ExactValue, Vec<usize>)> = None;
        let mut cur = Vec::with_capacity(comp.len());
        self.dfs(
            comp,
            0,
            ExactValue::zero(),
            &mut assigned,
            &mut cur,
            &mut best,
        );
        best.expect("nonempty component")
    }

    fn dfs(
        &self,
        comp: &[usize],
        depth: usize,
        cost: ExactValue,
        assigned: &mut Vec<usize>,
        cur: &mut Vec<usize>,
        best: &mut Option<(ExactValue, Vec<usize>)>,
    ) {
        if let Some((b, _)) = best {
            if &cost >= b {
                return;
            }
        }
        if depth == comp.len() {
            let mut c = cost;
            for (ms, v) in &self.full {
                if ms.as_slice() == assigned.as_slice() {
                    c += v;
                }
            }
            if best.as_ref().is_none_or(|(b, _)| &c < b) {
                *best = Some((c, cur.clone()));
            }
            return;
        }
        let i = comp[depth];
        for (m, c) in &self.options[i] {
            assigned[i] = *m;
            let mut next = &cost + c;
            for (x, y, pivot, kind, v) in &self.pairs {
                if *y == i
                    && assigned[*x] != usize::MAX
                    && self.pair_charge(*kind, *pivot, assigned[*x], *m)
                {
                    next += v;
                }
            }
            cur.push(*m);
            self.dfs(comp, depth + 1, next, assigned, cur, best);
            cur.pop();
            assigned[i] = usize::MAX;
        }
    }

    /// Objective at a given allocation, excluding `skip`'s own cost.
    fn value_at(
        &self,
        spec: &AffineMinimizer,
        machines: &[usize],
        skip: Option<usize>,
    ) -> ExactValue {
        let mut c = ExactValue::zero();
        for (t, &m) in self.instance.tasks().iter().zip(machines) {
            if Some(m) != skip {
                c += &spec.multipliers[m] * t.value(m).expect("endpoint");
            }
            for tc in &spec.task_constants {
                if tc.task == t.id && tc.machine == m {
                    c += &tc.value;
                }
            }
        }
        for (x, y, pivot, kind, v) in &self.pairs {
            if self.pair_charge(*kind, *pivot, machines[*x], machines[*y]) {
                c += v;
            }
        }
        for (ms, v) in &self.full {
            if ms.as_slice() == machines {
                c += v;
            }
        }
        c
    }
}

/// Cap on the per-component enumeration of an affine minimizer.
pub const AFFINE_CAP: u128 = 1 << 26;

fn allocate_affine(spec: &AffineMinimizer, instance: &Instance) -> Result<Allocation> {
    let model = AffineModel::new(spec, instance, None)?;
    let (_, ms) = model.minimize(AFFINE_CAP)?;
    Ok(Allocation::from_machines(instance, ms))
}

fn allocate_task_independent(spec: &TaskIndependent, instance: &Instance) -> Vec<usize> {
    instance
        .tasks()
        .iter()
        .map(|t| {
            if t.is_loop() || t.va < spec.threshold(t.id).eval(&t.vb) {
                t.a
            } else {
                t.b
            }
        })
        .collect()
}

fn allocate_bundling(spec: &Bundling, instance: &Instance) -> Result<Vec<usize>> {
    let n = instance.machines();
    if spec.multipliers.len() < n {
        return Err(Error::InvalidSpec(format!(
            "{} multipliers for {} machines",
            spec.multipliers.len(),
            n
        )));
    }
    let mut out = vec![usize::MAX; instance.len()];
    for group in &spec.groups {
        let idx: Vec<usize> = group
            .iter()
            .filter_map(|&id| instance.index_of(id))
            .collect();
        if idx.is_empty() {
            continue;
        }
        let (sup, k) = instance.tasks()[idx[0]].support();
        for &i in &idx {
            if instance.tasks()[i].support() != (sup, k) {
                return Err(Error::InvalidSpec(format!(
                    "bundled group {:?} mixes supports",
                    group
                )));
            }
        }
        let target = if k == 1 {
            sup[0]
        } else {
            let sum = |m: usize| -> ExactValue {
                idx.iter()
                    .map(|&i| instance.tasks()[i].value(m).expect("endpoint"))
                    .sum::<ExactValue>()
                    * &spec.multipliers[m]
            };
            if sum(sup[0]) <= sum(sup[1]) {
                sup[0]
            } else {
                sup[1]
            }
        };
        for &i in &idx {
            if out[i] != usize::MAX {
                return Err(Error::InvalidSpec(format!(
                    "task {} is in two bundled groups",
                    instance.tasks()[i].id
                )));
            }
            out[i] = target;
        }
    }
    for (i, t) in instance.tasks().iter().enumerate() {
        if out[i] == usize::MAX {
            out[i] = weighted_min(t, Some(&spec.multipliers))?;
        }
    }
    Ok(out)
}

fn allocate_constant(spec: &ConstantAllocation, instance: &Instance) -> Result<Vec<usize>> {
    instance
        .tasks()
        .iter()
        .map(|t| {
            if let Some(&(_, m)) = spec.assignment.iter().find(|(id, _)| *id == t.id) {
                if !t.supports(m) {
                    return Err(Error::InvalidSpec(format!(
                        "constant assignment puts task {} on machine {m} outside its support",
                        t.id
                    )));
                }
                return Ok(m);
            }
            let (sup, k) = t.support();
            Ok(match spec.fallback {
                ConstantRule::LowerIndex => sup[0],
                ConstantRule::HigherIndex => sup[k - 1],
                ConstantRule::EndpointA => t.a,
                ConstantRule::EndpointB => t.b,
            })
        })
        .collect()
}

impl AllocationOracle for MechanismSpec {
    fn allocate(&self, instance: &Instance) -> Result<Allocation> {
        let machines = match self {
            MechanismSpec::Vcg => instance
                .tasks()
                .iter()
                .map(|t| weighted_min(t, None))
                .collect::<Result<Vec<_>>>()?,
            MechanismSpec::AffineMinimizer(a) => return allocate_affine(a, instance),
            MechanismSpec::TaskIndependent(t) => allocate_task_independent(t, instance),
            MechanismSpec::Bundling(b) => allocate_bundling(b, instance)?,
            MechanismSpec::Constant(c) => allocate_constant(c, instance)?,
        };
        Ok(Allocation::from_machines(instance, machines))
    }
}

impl PaymentRule for MechanismSpec {
    fn payments(&self, instance: &Instance, alloc: &Allocation) -> Result<Vec<ExactValue>> {
        alloc.validate(instance)?;
        let n = instance.machines();
        match self {
            MechanismSpec::Vcg => {
                let mut pay = vec![ExactValue::zero(); n];
                for (idx, t) in instance.tasks().iter().enumerate() {
                    let m = alloc.machine_at(idx);
                    if let Some(o) = t.other(m) {
                        pay[m] += t.value(o).expect("endpoint");
                    }
                }
                Ok(pay)
            }
            MechanismSpec::AffineMinimizer(spec) => {
                let machines: Vec<usize> = alloc.entries().iter().map(|e| e.1).collect();
                let mut pay = Vec::with_capacity(n);
                for i in 0..n {
                    let restricted = AffineModel::new(spec, instance, Some(i))?;
                    let (h, _) = restricted.minimize(AFFINE_CAP)?;
                    let others = restricted.value_at(spec, &machines, Some(i));
                    pay.push((h - others) / &spec.multipliers[i]);
                }
                Ok(pay)
            }
            MechanismSpec::TaskIndependent(spec) => {
                let mut pay = vec![ExactValue::zero(); n];
                for (idx, t) in instance.tasks().iter().enumerate() {
                    if t.is_loop() {
                        continue;
                    }
                    let g = spec.threshold(t.id);
                    let m = alloc.machine_at(idx);
                    if m == t.a {
                        pay[m] += g.eval(&t.vb);
                    } else {
                        let x = g
                            .sup_at_most(&t.va)
                            .ok_or(Error::UnboundedPayment { task: t.id })?;
                        pay[m] += x;
                    }
                }
                Ok(pay)
            }
            MechanismSpec::Bundling(_) | MechanismSpec::Constant(_) => Err(
                Error::UnsupportedVariant(format!("{} has no payment rule", self.name())),
            ),
        }
    }
}

/// Utilities of one machine under truth and under a deviation.
#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UtilityComparison {
    pub machine: usize,
    pub truth_utility: ExactValue,
    pub deviation_utility: ExactValue,
    /// `truth_utility >= deviation_utility`.
    pub truthful: bool,
}

/// Checks that `a` and `b` differ at most in `machine`'s values.
pub(crate) fn same_except(a: &Instance, b: &Instance, machine: usize) -> Result<()> {
    if a.machines() != b.machines() || a.len() != b.len() {
        return Err(Error::BadDeviation(
            "instances have different shapes".into(),
        ));
    }
    for (s, t) in a.tasks().iter().zip(b.tasks()) {
        if s.id != t.id || s.a != t.a || s.b != t.b {
            return Err(Error::BadDeviation(format!(
                "task {} changed its support",
                s.id
            )));
        }
        for m in [s.a, s.b] {
            if m != machine && s.value(m) != t.value(m) {
                return Err(Error::BadDeviation(format!(
                    "task {} changed the value of machine {m}",
                    s.id
                )));
            }
        }
    }
    Ok(())
}

/// Utility of `machine` with true values `truth` when the mechanism runs on
/// `reported`.
fn utility<M>(mech: &M, truth: &Instance, reported: &Instance, machine: usize) -> Result<ExactValue>
where
    M: AllocationOracle + PaymentRule + ?Sized,
{
    let alloc = mech.allocate(reported)?;
    let pay = mech.payments(reported, &alloc)?;
    let mut cost = ExactValue::zero();
    for (idx, t) in truth.tasks().iter().enumerate() {
        if alloc.machine_at(idx) == machine {
            cost += t.value(machine).expect("endpoint");
        }
    }
    Ok(&pay[machine] - &cost)
}

/// Compares `machine`'s utility when reporting truthfully and when reporting
/// its row of `deviation`.
pub fn truthfulness_probe<M>(
    mech: &M,
    instance: &Instance,
    machine: usize,
    deviation: &Instance,
) -> Result<UtilityComparison>
where
    M: AllocationOracle + PaymentRule + ?Sized,
{
    same_except(instance, deviation, machine)?;
    let truth_utility = utility(mech, instance, instance, machine)?;
    let deviation_utility = utility(mech, instance, deviation, machine)?;
    Ok(UtilityComparison {
        machine,
        truthful: truth_utility >= deviation_utility,
        truth_utility,
        deviation_utility,
    })
}

/// Two-task gadget between `root` and `leaf` that charges `c` when the pair
/// is split, giving the all-to-root region a bundling facet.
pub fn split_penalty_gadget(
    n: usize,
    tasks: (TaskId, TaskId),
    root: usize,
    c: ExactValue,
) -> MechanismSpec {
    MechanismSpec::AffineMinimizer(AffineMinimizer {
        multipliers: vec![ExactValue::one(); n],
        pair_constants: vec![PairConstant {
            tasks,
            machine: root,
            kind: PairKind::Split,
            value: c,
        }],
        ..Default::default()
    })
}

/// Two-task gadget that charges `c` when the pair stays together, which
/// makes the two tasks flip between root and leaf.
pub fn flip_bonus_gadget(
    n: usize,
    tasks: (TaskId, TaskId),
    root: usize,
    c: ExactValue,
) -> MechanismSpec {
    MechanismSpec::AffineMinimizer(AffineMinimizer {
        multipliers: vec![ExactValue::one(); n],
        pair_constants: vec![PairConstant {
            tasks,
            machine: root,
            kind: PairKind::Together,
            value: c,
        }],
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{makespan, opt_makespan, Task};

    fn v(n: i64) -> ExactValue {
        ExactValue::from_int(n)
    }

    fn r(p: i64, q: i64) -> ExactValue {
        ExactValue::ratio(p, q)
    }

    fn single(va: ExactValue, vb: ExactValue) -> Instance {
        Instance::new(2, vec![Task::new(0, 0, 1, va, vb)]).unwrap()
    }

    fn figure_one() -> Instance {
        Instance::new(
            3,
            vec![
                Task::new(1, 0, 1, v(5), v(1)),
                Task::new(2, 0, 1, v(3), v(2)),
                Task::new(3, 0, 2, v(7), v(9)),
                Task::new(4, 0, 2, v(4), v(6)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn vcg_single_task() {
        let a = MechanismSpec::Vcg.allocate(&single(v(1), v(2))).unwrap();
        assert_eq!(a.machine_at(0), 0);
        let a = MechanismSpec::Vcg.allocate(&single(v(1), v(1))).unwrap();
        assert_eq!(a.machine_at(0), 0);
        let inst = Instance::new(2, vec![Task::new(0, 1, 0, v(1), v(1))]).unwrap();
        assert_eq!(MechanismSpec::Vcg.allocate(&inst).unwrap().machine_at(0), 0);
    }

    #[test]
    fn vcg_figure_one() {
        let inst = figure_one();
        let a = MechanismSpec::Vcg.allocate(&inst).unwrap();
        assert_eq!(a.entries(), &[(1, 1), (2, 1), (3, 0), (4, 0)]);
        assert_eq!(makespan(&inst, &a).unwrap(), v(11));
        assert_eq!(opt_makespan(&inst).unwrap().0, v(7));
    }

    #[test]
    fn vcg_second_price() {
        let inst = single(v(1), v(2));
        let a = MechanismSpec::Vcg.allocate(&inst).unwrap();
        assert_eq!(
            MechanismSpec::Vcg.payments(&inst, &a).unwrap(),
            vec![v(2), v(0)]
        );
    }

    #[test]
    fn unsupported_payments() {
        let spec = MechanismSpec::Constant(ConstantAllocation {
            assignment: vec![],
            fallback: ConstantRule::LowerIndex,
        });
        let inst = single(v(1), v(2));
        let a = spec.allocate(&inst).unwrap();
        assert!(matches!(
            spec.payments(&inst, &a),
            Err(Error::UnsupportedVariant(_))
        ));
    }

    #[test]
    fn weighted_threshold() {
        // lambda_root = 1, lambda_leaf = 2: root wins iff t < 2 s
        let spec = MechanismSpec::AffineMinimizer(AffineMinimizer::weighted(vec![v(1), v(2)]));
        assert_eq!(
            spec.allocate(&single(r(19, 10), v(1)))
                .unwrap()
                .machine_at(0),
            0
        );
        assert_eq!(
            spec.allocate(&single(r(21, 10), v(1)))
                .unwrap()
                .machine_at(0),
            1
        );
        assert_eq!(spec.allocate(&single(v(2), v(1))).unwrap().machine_at(0), 0);
    }

    #[test]
    fn affine_payment_is_weighted_critical_value() {
        // root wins at t = 1 against s = 1 with lambda = (1, 2): pays 2 s = 2
        let spec = MechanismSpec::AffineMinimizer(AffineMinimizer::weighted(vec![v(1), v(2)]));
        let inst = single(v(1), v(1));
        let a = spec.allocate(&inst).unwrap();
        assert_eq!(spec.payments(&inst, &a).unwrap(), vec![v(2), v(0)]);
        // leaf wins at s = 1 against t = 3: pays t / 2
        let inst = single(v(3), v(1));
        let a = spec.allocate(&inst).unwrap();
        assert_eq!(spec.payments(&inst, &a).unwrap(), vec![v(0), r(3, 2)]);
    }

    #[test]
    fn split_gadget_allocations() {
        let spec = split_penalty_gadget(2, (0, 1), 0, r(1, 2));
        let inst = |t1: ExactValue, t2: ExactValue| {
            Instance::new(
                2,
                vec![Task::new(0, 0, 1, t1, v(1)), Task::new(1, 0, 1, t2, v(1))],
            )
            .unwrap()
        };
        // both cheap on root: bundle to root
        let a = spec.allocate(&inst(r(13, 10), r(1, 2))).unwrap();
        assert_eq!(a.entries(), &[(0, 0), (1, 0)]);
        // task 1 expensive: split costs 1/2 so both leave
        let a = spec.allocate(&inst(r(13, 10), r(9, 10))).unwrap();
        assert_eq!(a.entries(), &[(0, 1), (1, 1)]);
        let a = spec.allocate(&inst(r(1, 10), v(5))).unwrap();
        assert_eq!(a.entries(), &[(0, 0), (1, 1)]);
    }

    #[test]
    fn flip_gadget_allocations() {
        let spec = flip_bonus_gadget(2, (0, 1), 0, r(1, 4));
        let inst = Instance::new(
            2,
            vec![
                Task::new(0, 0, 1, r(11, 10), v(1)),
                Task::new(1, 0, 1, v(3), v(1)),
            ],
        )
        .unwrap();
        // alone on the root, task 0 is kept up to s + c
        assert_eq!(spec.allocate(&inst).unwrap().entries(), &[(0, 0), (1, 1)]);
    }

    #[test]
    fn threshold_inverse() {
        let g = Threshold {
            points: vec![(v(0), v(0)), (v(1), v(2)), (v(2), v(2))],
            tail_slope: v(1),
        };
        g.validate().unwrap();
        assert_eq!(g.eval(&r(1, 2)), v(1));
        assert_eq!(g.eval(&v(3)), v(3));
        assert_eq!(g.sup_at_most(&v(1)), Some(r(1, 2)));
        assert_eq!(g.sup_at_most(&v(2)), Some(v(2)));
        let flat = Threshold {
            points: vec![(v(0), v(1))],
            tail_slope: v(0),
        };
        assert_eq!(flat.sup_at_most(&v(2)), None);
        assert_eq!(flat.sup_at_most(&r(1, 2)), Some(v(0)));
        let bad = Threshold {
            points: vec![(v(0), v(1)), (v(1), v(0))],
            tail_slope: v(1),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn task_independent_ties_to_b() {
        let spec = MechanismSpec::TaskIndependent(TaskIndependent::uniform(Threshold::identity()));
        assert_eq!(spec.allocate(&single(v(1), v(1))).unwrap().machine_at(0), 1);
        assert_eq!(spec.allocate(&single(v(1), v(2))).unwrap().machine_at(0), 0);
    }

    #[test]
    fn bundling_groups() {
        let spec = MechanismSpec::Bundling(Bundling {
            multipliers: vec![v(1), v(1)],
            groups: vec![vec![0, 1]],
        });
        let inst = Instance::new(
            2,
            vec![
                Task::new(0, 0, 1, v(1), v(3)),
                Task::new(1, 0, 1, v(3), v(2)),
            ],
        )
        .unwrap();
        assert_eq!(spec.allocate(&inst).unwrap().entries(), &[(0, 0), (1, 0)]);
    }

    #[test]
    fn zero_deviation_equal_utilities() {
        let inst = figure_one();
        for m in 0..3 {
            let u = truthfulness_probe(&MechanismSpec::Vcg, &inst, m, &inst).unwrap();
            assert_eq!(u.truth_utility, u.deviation_utility);
            assert!(u.truthful);
        }
    }

    #[test]
    fn deviation_must_be_own_row() {
        let inst = figure_one();
        let mut dev = inst.clone();
        dev.set_value(1, 1, v(4)).unwrap();
        assert!(matches!(
            truthfulness_probe(&MechanismSpec::Vcg, &inst, 0, &dev),
            Err(Error::BadDeviation(_))
        ));
    }

    struct ZeroPay;
    impl AllocationOracle for ZeroPay {
        fn allocate(&self, instance: &Instance) -> Result<Allocation> {
            MechanismSpec::Vcg.allocate(instance)
        }
    }
    impl PaymentRule for ZeroPay {
        fn payments(&self, instance: &Instance, _: &Allocation) -> Result<Vec<ExactValue>> {
            Ok(vec![ExactValue::zero(); instance.machines()])
        }
    }

    #[test]
    fn zero_payment_fixture_is_not_truthful() {
        // winning costs 1 and pays nothing; overbidding to lose is better
        let inst = single(v(1), v(2));
        let dev = single(v(3), v(2));
        let u = truthfulness_probe(&ZeroPay, &inst, 0, &dev).unwrap();
        assert_eq!(u.truth_utility, v(-1));
        assert_eq!(u.deviation_utility, v(0));
        assert!(!u.truthful);
    }
}

//! Boundary (critical-value) functions.
//!
//! For an edge `e` between `i` and `j`, `psi(s)` is the threshold on `i`'s
//! value below which the oracle gives `e` to `i`, when `j`'s value is `s` and
//! everything else is held fixed. It is extracted by bisection and always
//! reported as an interval.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::{Instance, TaskId};
use crate::mechanism::AllocationOracle;
use crate::par;
use crate::value::ExactValue;

/// Default bisection tolerance, `2^-32`.
pub fn default_tolerance() -> ExactValue {
    ExactValue::pow2_neg(32)
}

/// Offset used by the discontinuity check, `2^-20`.
pub const DISCONTINUITY_STEP_LOG2: u32 = 20;
/// A jump larger than this many offsets is flagged.
pub const DISCONTINUITY_FACTOR: i64 = 64;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Side {
    /// Probe endpoint `a`'s value against endpoint `b`'s.
    TowardA,
    TowardB,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub lo: ExactValue,
    pub hi: ExactValue,
}

impl Interval {
    pub fn mid(&self) -> ExactValue {
        self.lo.midpoint(&self.hi)
    }

    pub fn width(&self) -> ExactValue {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &ExactValue) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

/// One edge of an instance viewed from one endpoint.
pub struct BoundaryProbe<'a, O: ?Sized> {
    pub oracle: &'a O,
    pub context: Instance,
    pub edge: TaskId,
    /// The machine whose value is bisected.
    pub root: usize,
    /// The other endpoint; its value is the argument `s`.
    pub leaf: usize,
    pub tolerance: ExactValue,
}

impl<O: ?Sized> Clone for BoundaryProbe<'_, O> {
    fn clone(&self) -> Self {
        BoundaryProbe {
            oracle: self.oracle,
            context: self.context.clone(),
            edge: self.edge,
            root: self.root,
            leaf: self.leaf,
            tolerance: self.tolerance.clone(),
        }
    }
}

impl<'a, O: AllocationOracle + ?Sized> BoundaryProbe<'a, O> {
    pub fn new(oracle: &'a O, context: &Instance, edge: TaskId, side: Side) -> Result<Self> {
        let t = context.task_or_err(edge)?;
        if t.is_loop() {
            return Err(Error::PreconditionViolated(format!(
                "task {edge} is a loop"
            )));
        }
        let (root, leaf) = match side {
            Side::TowardA => (t.a, t.b),
            Side::TowardB => (t.b, t.a),
        };
        Ok(BoundaryProbe {
            oracle,
            context: context.clone(),
            edge,
            root,
            leaf,
            tolerance: default_tolerance(),
        })
    }

    /// Probe of `edge` from the endpoint `root`.
    pub fn at_root(oracle: &'a O, context: &Instance, edge: TaskId, root: usize) -> Result<Self> {
        let t = context.task_or_err(edge)?;
        let side = if t.a == root && !t.is_loop() {
            Side::TowardA
        } else if t.b == root && !t.is_loop() {
            Side::TowardB
        } else {
            return Err(Error::PreconditionViolated(format!(
                "machine {root} is not an endpoint of edge {edge}"
            )));
        };
        Self::new(oracle, context, edge, side)
    }

    pub fn with_tolerance(mut self, tolerance: ExactValue) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn wins(&self, inst: &mut Instance, x: &ExactValue) -> Result<bool> {
        inst.set_value(self.edge, self.root, x.clone())?;
        let a = self.oracle.allocate(inst)?;
        a.validate(inst)?;
        Ok(a.machine_of(self.edge) == Some(self.root))
    }

    /// Search cap `n * s + 1`.
    pub fn cap(&self, s: &ExactValue) -> ExactValue {
        ExactValue::from_int(self.context.machines() as i64) * s + ExactValue::one()
    }

    /// Bisects the threshold with the leaf value set to `s`.
    ///
    /// At `lo` the root gets the edge and at `hi` it does not, except that a
    /// root that never gets the edge yields `[0, 0]`.
    pub fn critical_value(&self, s: &ExactValue) -> Result<Interval> {
        if s.is_negative() {
            return Err(Error::PreconditionViolated(
                "leaf value must be >= 0".into(),
            ));
        }
        let mut inst = self.context.clone();
        inst.set_value(self.edge, self.leaf, s.clone())?;
        let cap = self.cap(s);
        let half = cap.midpoint(&ExactValue::zero());
        let w0 = self.wins(&mut inst, &ExactValue::zero())?;
        let w1 = self.wins(&mut inst, &half)?;
        let w2 = self.wins(&mut inst, &cap)?;
        if (!w0 && (w1 || w2)) || (!w1 && w2) {
            return Err(Error::NotMonotone(format!(
                "edge {} at root {}: pilots at 0, {}, {} give {}, {}, {}",
                self.edge, self.root, half, cap, w0, w1, w2
            )));
        }
        if w2 {
            return Err(Error::Unbounded {
                task: self.edge,
                cap,
            });
        }
        if !w0 {
            return Ok(Interval {
                lo: ExactValue::zero(),
                hi: ExactValue::zero(),
            });
        }
        let (mut lo, mut hi) = if w1 {
            (half, cap)
        } else {
            (ExactValue::zero(), half)
        };
        while &hi - &lo > self.tolerance {
            let mid = lo.midpoint(&hi);
            if self.wins(&mut inst, &mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Interval { lo, hi })
    }

    /// `critical_value(s)` with `Unbounded` mapped to `None`.
    pub fn critical_value_opt(&self, s: &ExactValue) -> Result<Option<Interval>> {
        match self.critical_value(s) {
            Ok(iv) => Ok(Some(iv)),
            Err(Error::Unbounded { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Same probe in a modified context.
    pub fn in_context(&self, context: Instance) -> Self {
        BoundaryProbe {
            context,
            ..self.clone()
        }
    }
}

/// `D_eps = {eps, 2 eps, ..., 1}`; `eps` must be `1/k`.
pub fn grid(eps: &ExactValue) -> Result<Vec<ExactValue>> {
    let k = grid_size(eps)?;
    Ok((1..=k as i64)
        .map(|i| eps * ExactValue::from_int(i))
        .collect())
}

/// `1/eps`, when it is a positive integer.
pub fn grid_size(eps: &ExactValue) -> Result<u64> {
    if !eps.is_positive() {
        return Err(Error::InvalidConfig(format!(
            "eps must be positive, got {eps}"
        )));
    }
    eps.recip()
        .to_u64()
        .filter(|&k| k > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("1/eps must be an integer, got eps = {eps}")))
}

/// Quantized boundary function of one edge from one endpoint.
#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryTable {
    pub edge: TaskId,
    pub root: usize,
    pub eps: ExactValue,
    /// `(z, eps * floor(psi(z) / eps))`; `None` where the threshold is
    /// unbounded.
    pub values: Vec<(ExactValue, Option<ExactValue>)>,
    /// Some value is unbounded or at least `n z`.
    pub slope_breach: bool,
}

impl BoundaryTable {
    /// Quantized value at grid point index `k` (0-based, `z = (k+1) eps`).
    pub fn at(&self, k: usize) -> Option<&ExactValue> {
        self.values.get(k).and_then(|v| v.1.as_ref())
    }

    /// Value at `z`, if `z` is on the grid and finite.
    pub fn lookup(&self, z: &ExactValue) -> Option<&ExactValue> {
        self.values
            .iter()
            .find(|v| &v.0 == z)
            .and_then(|v| v.1.as_ref())
    }

    /// Step extension to `[0, 1]`: the value at the largest grid point
    /// `<= x`, and 0 below `eps`. A lower bound for the true function.
    pub fn step_eval(&self, x: &ExactValue) -> Option<ExactValue> {
        let mut out = Some(ExactValue::zero());
        for (z, v) in &self.values {
            if z <= x {
                out = v.clone();
            } else {
                break;
            }
        }
        out
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| match (&w[0].1, &w[1].1) {
            (Some(a), Some(b)) => a <= b,
            (None, Some(_)) => false,
            _ => true,
        })
    }

    /// Values as a comparable key (grid order).
    pub fn key(&self) -> Vec<Option<ExactValue>> {
        self.values.iter().map(|v| v.1.clone()).collect()
    }
}

/// Builds the quantized table of `probe` on `D_eps`.
///
/// Each entry floors the upper end of the bisection interval, which is never
/// below the true threshold, so thresholds that sit exactly on the grid keep
/// their grid value.
pub fn quantize<O: AllocationOracle + ?Sized>(
    probe: &BoundaryProbe<'_, O>,
    eps: &ExactValue,
) -> Result<BoundaryTable> {
    let zs = grid(eps)?;
    let n = ExactValue::from_int(probe.context.machines() as i64);
    let vals = par::try_map_indices(zs.len(), |k| probe.critical_value_opt(&zs[k]))?;
    let mut breach = false;
    let mut values = Vec::with_capacity(zs.len());
    for (z, iv) in zs.into_iter().zip(vals) {
        match iv {
            Some(iv) => {
                if iv.lo >= &n * &z {
                    breach = true;
                }
                values.push((z, Some(iv.hi.floor_to(eps))));
            }
            None => {
                breach = true;
                values.push((z, None));
            }
        }
    }
    Ok(BoundaryTable {
        edge: probe.edge,
        root: probe.root,
        eps: eps.clone(),
        values,
        slope_breach: breach,
    })
}

/// Result of a lower-Riemann-sum check of Young's inequality.
#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct YoungReport {
    pub a: ExactValue,
    pub step: ExactValue,
    /// Lower bound on `int_0^a psi + int_0^a psi_inv`.
    pub lhs: ExactValue,
    pub error_bound: ExactValue,
    pub passed: bool,
}

/// Checks `int_0^a f + int_0^a g >= a^2` for nondecreasing `f`, `g` using
/// left-endpoint sums, which never exceed the integrals.
///
/// Passes iff `lhs >= a^2 - step * (f(a) + g(a))`.
pub fn young_check<F, G>(f: F, g: G, a: &ExactValue, step: &ExactValue) -> Result<YoungReport>
where
    F: Fn(&ExactValue) -> Result<ExactValue> + Sync + Send,
    G: Fn(&ExactValue) -> Result<ExactValue> + Sync + Send,
{
    if !a.is_positive() || !step.is_positive() {
        return Err(Error::PreconditionViolated(
            "a and step must be positive".into(),
        ));
    }
    let count = (a / step).floor();
    let count: u64 = ExactValue::from_bigint(count)
        .to_u64()
        .ok_or_else(|| Error::PreconditionViolated("too many quadrature steps".into()))?;
    // nodes 0, step, ..., count*step, plus a if it is not a node
    let mut nodes: Vec<ExactValue> = (0..=count)
        .map(|k| step * ExactValue::from_int(k as i64))
        .collect();
    if nodes.last() != Some(a) {
        nodes.push(a.clone());
    }
    let fv = par::try_map_indices(nodes.len(), |k| f(&nodes[k]))?;
    let gv = par::try_map_indices(nodes.len(), |k| g(&nodes[k]))?;
    for (name, vals) in [("psi", &fv), ("pseudo-inverse", &gv)] {
        if vals.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::NotMonotone(format!("{name} decreases on [0, {a}]")));
        }
    }
    let mut lhs = ExactValue::zero();
    for k in 0..nodes.len() - 1 {
        let h = &nodes[k + 1] - &nodes[k];
        lhs += &h * &(&fv[k] + &gv[k]);
    }
    let last = nodes.len() - 1;
    let error_bound = step * &(&fv[last] + &gv[last]);
    let passed = lhs >= a * a - error_bound.clone();
    Ok(YoungReport {
        a: a.clone(),
        step: step.clone(),
        lhs,
        error_bound,
        passed,
    })
}

/// Young check on the two probes of one edge, using the lower ends of the
/// bisection intervals (again lower bounds). Unbounded thresholds are capped.
pub fn young_check_edge<O: AllocationOracle + ?Sized>(
    forward: &BoundaryProbe<'_, O>,
    backward: &BoundaryProbe<'_, O>,
    a: &ExactValue,
    step: &ExactValue,
) -> Result<YoungReport> {
    let lo = |p: &BoundaryProbe<'_, O>, x: &ExactValue| -> Result<ExactValue> {
        Ok(match p.critical_value_opt(x)? {
            Some(iv) => iv.lo,
            None => p.cap(x),
        })
    };
    young_check(|x| lo(forward, x), |x| lo(backward, x), a, step)
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopeFlag {
    pub x: ExactValue,
    /// `None` when the threshold is unbounded.
    pub lower: Option<ExactValue>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopeReport {
    pub edge: TaskId,
    pub root: usize,
    pub samples: usize,
    pub flags: Vec<SlopeFlag>,
}

impl SlopeReport {
    pub fn passed(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Flags every sample `x` where the threshold is certainly `>= n x`.
pub fn bounded_slope_check<O: AllocationOracle + ?Sized>(
    probe: &BoundaryProbe<'_, O>,
    samples: &[ExactValue],
) -> Result<SlopeReport> {
    let one = ExactValue::one();
    if samples.iter().any(|x| !x.is_positive() || x > &one) {
        return Err(Error::PreconditionViolated(
            "slope samples must lie in (0, 1]".into(),
        ));
    }
    let n = ExactValue::from_int(probe.context.machines() as i64);
    let vals = par::try_map_indices(samples.len(), |k| probe.critical_value_opt(&samples[k]))?;
    let flags = samples
        .iter()
        .zip(vals)
        .filter_map(|(x, iv)| match iv {
            None => Some(SlopeFlag {
                x: x.clone(),
                lower: None,
            }),
            Some(iv) if iv.lo >= &n * x => Some(SlopeFlag {
                x: x.clone(),
                lower: Some(iv.lo),
            }),
            _ => None,
        })
        .collect();
    Ok(SlopeReport {
        edge: probe.edge,
        root: probe.root,
        samples: samples.len(),
        flags,
    })
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SiblingReport {
    pub edge: TaskId,
    pub sibling: TaskId,
    pub intervals: Vec<Option<Interval>>,
    pub passed: bool,
}

/// Re-probes `probe` at leaf value `s` after each replacement of the
/// sibling's `(va, vb)`; passes iff all intervals share a point.
pub fn sibling_independence_check<O: AllocationOracle + ?Sized>(
    probe: &BoundaryProbe<'_, O>,
    s: &ExactValue,
    sibling: TaskId,
    perturbations: &[(ExactValue, ExactValue)],
) -> Result<SiblingReport> {
    let e = probe.context.task_or_err(probe.edge)?;
    let sib = probe.context.task_or_err(sibling)?;
    if sibling == probe.edge || sib.support() != e.support() {
        return Err(Error::PreconditionViolated(format!(
            "tasks {} and {sibling} are not parallel edges",
            probe.edge
        )));
    }
    let (sa, sb) = (sib.a, sib.b);
    let mut contexts = Vec::with_capacity(perturbations.len() + 1);
    contexts.push(probe.context.clone());
    for (va, vb) in perturbations {
        let mut c = probe.context.clone();
        c.set_value(sibling, sa, va.clone())?;
        c.set_value(sibling, sb, vb.clone())?;
        contexts.push(c);
    }
    let intervals = par::try_map_indices(contexts.len(), |k| {
        probe.in_context(contexts[k].clone()).critical_value_opt(s)
    })?;
    let passed = if intervals.iter().all(|i| i.is_none()) {
        true
    } else if intervals.iter().any(|i| i.is_none()) {
        false
    } else {
        let max_lo = intervals
            .iter()
            .flatten()
            .map(|i| &i.lo)
            .max()
            .expect("nonempty");
        let min_hi = intervals
            .iter()
            .flatten()
            .map(|i| &i.hi)
            .min()
            .expect("nonempty");
        max_lo <= min_hi
    };
    Ok(SiblingReport {
        edge: probe.edge,
        sibling,
        intervals,
        passed,
    })
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LipschitzSample {
    pub l1: ExactValue,
    pub difference: ExactValue,
    pub passed: bool,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LipschitzReport {
    pub edge: TaskId,
    pub samples: Vec<LipschitzSample>,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.samples.iter().all(|s| s.passed)
    }
}

/// Compares the threshold of `probe` at leaf value `s` before and after
/// shifting the root's values on other tasks by each delta vector. Passes
/// iff the midpoints move by at most the l1 norm plus twice the tolerance.
pub fn lipschitz_check<O: AllocationOracle + ?Sized>(
    probe: &BoundaryProbe<'_, O>,
    s: &ExactValue,
    deltas: &[Vec<(TaskId, ExactValue)>],
) -> Result<LipschitzReport> {
    let base = probe.critical_value(s)?.mid();
    let two_tol = &probe.tolerance + &probe.tolerance;
    let samples = par::try_map_indices(deltas.len(), |k| -> Result<LipschitzSample> {
        let mut c = probe.context.clone();
        let mut l1 = ExactValue::zero();
        for (id, d) in &deltas[k] {
            if *id == probe.edge {
                return Err(Error::PreconditionViolated(
                    "delta on the probed edge".into(),
                ));
            }
            let cur = c
                .value(*id, probe.root)
                .ok_or_else(|| {
                    Error::PreconditionViolated(format!("root is not an endpoint of task {id}"))
                })?
                .clone();
            let v = cur + d;
            if v.is_negative() {
                return Err(Error::PreconditionViolated(format!(
                    "task {id} would go negative"
                )));
            }
            c.set_value(*id, probe.root, v)?;
            l1 += d.abs();
        }
        let moved = probe.in_context(c).critical_value(s)?.mid();
        let difference = (&moved - &base).abs();
        let passed = difference <= &l1 + &two_tol;
        Ok(LipschitzSample {
            l1,
            difference,
            passed,
        })
    })?;
    Ok(LipschitzReport {
        edge: probe.edge,
        samples,
    })
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaEntry {
    pub edge: TaskId,
    pub s: ExactValue,
    /// Midpoint of the threshold interval; `None` if unbounded.
    pub alpha: Option<ExactValue>,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaReport {
    pub root: usize,
    pub entries: Vec<AlphaEntry>,
}

impl AlphaReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.lower_holds && e.upper_holds)
    }
}

/// Checks `s/n < alpha < n s` for each listed edge at `root`, with `s` the
/// edge's current leaf value and `alpha` the threshold midpoint.
pub fn alpha_bounds_check<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    root: usize,
    edges: &[TaskId],
    tolerance: &ExactValue,
) -> Result<AlphaReport> {
    let n = ExactValue::from_int(instance.machines() as i64);
    let entries = par::try_map_indices(edges.len(), |k| -> Result<AlphaEntry> {
        let probe = BoundaryProbe::at_root(oracle, instance, edges[k], root)?
            .with_tolerance(tolerance.clone());
        let s = instance
            .value(edges[k], probe.leaf)
            .expect("endpoint")
            .clone();
        if !s.is_positive() {
            return Err(Error::PreconditionViolated(format!(
                "leaf value of edge {} must be positive",
                edges[k]
            )));
        }
        let alpha = probe.critical_value_opt(&s)?.map(|iv| iv.mid());
        let (lower_holds, upper_holds) = match &alpha {
            Some(a) => (a > &(&s / &n), a < &(&n * &s)),
            None => (true, false),
        };
        Ok(AlphaEntry {
            edge: edges[k],
            s,
            alpha,
            lower_holds,
            upper_holds,
        })
    })?;
    Ok(AlphaReport { root, entries })
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscontinuityReport {
    pub edge: TaskId,
    pub s: ExactValue,
    pub suspected: bool,
    /// Largest midpoint jump between `s` and `s +- 2^-20`.
    pub jump: Option<ExactValue>,
}

/// Flags a suspected jump of the threshold near leaf value `s`.
pub fn discontinuity_check<O: AllocationOracle + ?Sized>(
    probe: &BoundaryProbe<'_, O>,
    s: &ExactValue,
) -> Result<DiscontinuityReport> {
    let h = ExactValue::pow2_neg(DISCONTINUITY_STEP_LOG2);
    let limit = &h * &ExactValue::from_int(DISCONTINUITY_FACTOR);
    let points = [s - &h, s.clone(), s + &h];
    let mut mids = Vec::with_capacity(3);
    for p in points.iter() {
        if p.is_negative() {
            continue;
        }
        mids.push(probe.critical_value_opt(p)?.map(|iv| iv.mid()));
    }
    if mids.iter().all(|m| m.is_none()) {
        return Ok(DiscontinuityReport {
            edge: probe.edge,
            s: s.clone(),
            suspected: false,
            jump: None,
        });
    }
    if mids.iter().any(|m| m.is_none()) {
        return Ok(DiscontinuityReport {
            edge: probe.edge,
            s: s.clone(),
            suspected: true,
            jump: None,
        });
    }
    let vals: Vec<ExactValue> = mids.into_iter().flatten().collect();
    let max = vals.iter().max().expect("nonempty");
    let min = vals.iter().min().expect("nonempty");
    let jump = max - min;
    Ok(DiscontinuityReport {
        edge: probe.edge,
        s: s.clone(),
        suspected: jump > limit,
        jump: Some(jump),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Allocation, Task};
    use crate::mechanism::{split_penalty_gadget, AffineMinimizer, FnOracle, MechanismSpec};
    use alloc::vec;

    fn v(n: i64) -> ExactValue {
        ExactValue::from_int(n)
    }

    fn r(p: i64, q: i64) -> ExactValue {
        ExactValue::ratio(p, q)
    }

    fn single(n: usize) -> Instance {
        Instance::new(n, vec![Task::new(0, 0, 1, v(0), v(1))]).unwrap()
    }

    #[test]
    fn vcg_threshold_is_leaf_value() {
        let inst = single(3);
        let p = BoundaryProbe::new(&MechanismSpec::Vcg, &inst, 0, Side::TowardA).unwrap();
        let iv = p.critical_value(&v(3)).unwrap();
        assert!(iv.contains(&v(3)));
        assert!(iv.width() <= default_tolerance());
        let iv = p.critical_value(&v(0)).unwrap();
        assert!(iv.contains(&v(0)));
        // from the higher-index side ties go the other way; still brackets s
        let q = BoundaryProbe::new(&MechanismSpec::Vcg, &inst, 0, Side::TowardB).unwrap();
        assert!(q.critical_value(&r(5, 7)).unwrap().contains(&r(5, 7)));
    }

    #[test]
    fn weighted_threshold_scales() {
        let inst = single(2);
        let spec = MechanismSpec::AffineMinimizer(AffineMinimizer::weighted(vec![v(1), v(2)]));
        let p = BoundaryProbe::new(&spec, &inst, 0, Side::TowardA).unwrap();
        assert!(p.critical_value(&v(1)).unwrap().contains(&v(2)));
    }

    #[test]
    fn unbounded_and_non_monotone() {
        let inst = single(2);
        let always = FnOracle(|i: &Instance| Ok(Allocation::from_machines(i, vec![0])));
        let p = BoundaryProbe::new(&always, &inst, 0, Side::TowardA).unwrap();
        assert!(matches!(
            p.critical_value(&v(1)),
            Err(Error::Unbounded { .. })
        ));
        let odd = FnOracle(|i: &Instance| {
            let t = &i.tasks()[0];
            Ok(Allocation::from_machines(
                i,
                vec![if t.va >= v(1) { 0 } else { 1 }],
            ))
        });
        let p = BoundaryProbe::new(&odd, &inst, 0, Side::TowardA).unwrap();
        assert!(matches!(
            p.critical_value(&v(1)),
            Err(Error::NotMonotone(_))
        ));
        let never = FnOracle(|i: &Instance| Ok(Allocation::from_machines(i, vec![1])));
        let p = BoundaryProbe::new(&never, &inst, 0, Side::TowardA).unwrap();
        assert_eq!(
            p.critical_value(&v(1)).unwrap(),
            Interval { lo: v(0), hi: v(0) }
        );
    }

    #[test]
    fn quantize_identity_and_affine() {
        let inst = single(3);
        let eps = r(1, 4);
        let p = BoundaryProbe::new(&MechanismSpec::Vcg, &inst, 0, Side::TowardA).unwrap();
        let t = quantize(&p, &eps).unwrap();
        assert_eq!(
            t.key(),
            vec![Some(r(1, 4)), Some(r(1, 2)), Some(r(3, 4)), Some(v(1))]
        );
        assert!(!t.slope_breach);
        // psi(z) = 2z - 1/10 via a task-independent threshold
        let g = crate::mechanism::Threshold {
            points: vec![(v(0), v(0)), (r(1, 20), v(0))],
            tail_slope: v(2),
        };
        let ti = MechanismSpec::TaskIndependent(crate::mechanism::TaskIndependent::uniform(g));
        let p = BoundaryProbe::new(&ti, &inst, 0, Side::TowardA).unwrap();
        let t = quantize(&p, &eps).unwrap();
        assert_eq!(
            t.key(),
            vec![Some(r(1, 4)), Some(r(3, 4)), Some(r(5, 4)), Some(r(7, 4))]
        );
        assert!(t.is_monotone());
    }

    #[test]
    fn quantize_constant_zero() {
        let inst = single(2);
        let never = FnOracle(|i: &Instance| Ok(Allocation::from_machines(i, vec![1])));
        let p = BoundaryProbe::new(&never, &inst, 0, Side::TowardA).unwrap();
        let t = quantize(&p, &r(1, 2)).unwrap();
        assert_eq!(t.key(), vec![Some(v(0)), Some(v(0))]);
    }

    #[test]
    fn grid_rules() {
        assert_eq!(grid(&r(1, 3)).unwrap().len(), 3);
        assert!(grid(&r(2, 5)).is_err());
        assert!(grid(&v(0)).is_err());
    }

    #[test]
    fn young_closed_forms() {
        let step = ExactValue::pow2_neg(10);
        let id = young_check(|x| Ok(x.clone()), |x| Ok(x.clone()), &v(1), &step).unwrap();
        assert!(id.passed);
        assert!(v(1) - id.lhs.clone() <= &step * &v(10));
        let two = young_check(|x| Ok(x * &v(2)), |x| Ok(x / &v(2)), &v(1), &step).unwrap();
        assert!(two.passed);
        assert!((two.lhs.clone() - r(5, 4)).abs() <= &step * &v(4));
        let stepf = young_check(
            |x| Ok(if x < &r(1, 2) { v(0) } else { v(1) }),
            |x| Ok(if x.is_zero() { v(0) } else { r(1, 2) }),
            &v(1),
            &step,
        )
        .unwrap();
        assert!(stepf.passed);
        let bad = young_check(|x| Ok(v(1) - x.clone()), |x| Ok(x.clone()), &v(1), &step);
        assert!(matches!(bad, Err(Error::NotMonotone(_))));
    }

    #[test]
    fn slope_flags() {
        let inst = single(3);
        let xs: Vec<ExactValue> = (1..=4).map(|k| r(k, 4)).collect();
        let p = BoundaryProbe::new(&MechanismSpec::Vcg, &inst, 0, Side::TowardA).unwrap();
        assert!(bounded_slope_check(&p, &xs).unwrap().passed());
        let spec =
            MechanismSpec::AffineMinimizer(AffineMinimizer::weighted(vec![v(1), v(4), v(1)]));
        let p = BoundaryProbe::new(&spec, &inst, 0, Side::TowardA).unwrap();
        assert_eq!(bounded_slope_check(&p, &xs).unwrap().flags.len(), 4);
        assert!(bounded_slope_check(&p, &[v(0)]).is_err());
    }

    fn pair(t2: ExactValue) -> Instance {
        Instance::new(
            2,
            vec![Task::new(0, 0, 1, v(0), v(1)), Task::new(1, 0, 1, t2, v(1))],
        )
        .unwrap()
    }

    #[test]
    fn sibling_independence() {
        let inst = pair(v(0));
        let perts = vec![(r(1, 4), v(1)), (r(3, 4), v(1)), (v(2), v(1))];
        let p = BoundaryProbe::new(&MechanismSpec::Vcg, &inst, 0, Side::TowardA).unwrap();
        assert!(
            sibling_independence_check(&p, &v(1), 1, &perts)
                .unwrap()
                .passed
        );
        assert!(
            sibling_independence_check(&p, &v(1), 1, &[])
                .unwrap()
                .passed
        );
        let g = split_penalty_gadget(2, (0, 1), 0, r(1, 2));
        let p = BoundaryProbe::new(&g, &inst, 0, Side::TowardA).unwrap();
        assert!(
            !sibling_independence_check(&p, &v(1), 1, &perts)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn lipschitz_vcg_and_tight_gadget() {
        let inst = pair(r(3, 4));
        let p = BoundaryProbe::new(&MechanismSpec::Vcg, &inst, 0, Side::TowardA).unwrap();
        let rep = lipschitz_check(&p, &v(1), &[vec![], vec![(1, r(1, 8))]]).unwrap();
        assert!(rep.passed());
        assert!(rep.samples.iter().all(|s| s.difference.is_zero()));
        // on the bundling facet t1 + t2 = 2, psi_1 = 2 - t2 moves one for one
        let g = split_penalty_gadget(2, (0, 1), 0, r(1, 2));
        let p = BoundaryProbe::new(&g, &inst, 0, Side::TowardA).unwrap();
        let rep = lipschitz_check(&p, &v(1), &[vec![(1, r(1, 8))], vec![(1, r(-1, 8))]]).unwrap();
        assert!(rep.passed());
        for s in &rep.samples {
            let slack = &p.tolerance * &v(2);
            assert!((&s.difference - &s.l1).abs() <= slack);
        }
    }

    #[test]
    fn alpha_bounds() {
        let inst = Instance::new(3, vec![Task::new(0, 0, 1, v(0), v(1))]).unwrap();
        let rep =
            alpha_bounds_check(&MechanismSpec::Vcg, &inst, 0, &[0], &default_tolerance()).unwrap();
        assert!(rep.passed());
        let inst = Instance::new(3, vec![Task::new(0, 0, 1, v(0), r(1, 2))]).unwrap();
        let spec =
            MechanismSpec::AffineMinimizer(AffineMinimizer::weighted(vec![v(1), v(2), v(1)]));
        let rep = alpha_bounds_check(&spec, &inst, 0, &[0], &default_tolerance()).unwrap();
        assert!(rep.passed());
        let never = FnOracle(|i: &Instance| Ok(Allocation::from_machines(i, vec![1])));
        let rep = alpha_bounds_check(&never, &inst, 0, &[0], &default_tolerance()).unwrap();
        assert!(!rep.entries[0].lower_holds);
    }

    #[test]
    fn discontinuity_flags_jumps() {
        let inst = single(2);
        let p = BoundaryProbe::new(&MechanismSpec::Vcg, &inst, 0, Side::TowardA).unwrap();
        assert!(!discontinuity_check(&p, &r(1, 2)).unwrap().suspected);
        let jump = FnOracle(|i: &Instance| {
            let t = &i.tasks()[0];
            let psi = if t.vb < r(1, 2) {
                t.vb.clone()
            } else {
                &t.vb + &v(1)
            };
            Ok(Allocation::from_machines(
                i,
                vec![if t.va < psi { 0 } else { 1 }],
            ))
        });
        let p = BoundaryProbe::new(&jump, &inst, 0, Side::TowardA).unwrap();
        assert!(discontinuity_check(&p, &r(1, 2)).unwrap().suspected);
        assert!(!discontinuity_check(&p, &r(1, 4)).unwrap().suspected);
    }
}

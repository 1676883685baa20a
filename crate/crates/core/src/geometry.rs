//! Geometry of the all-to-root region `R_P` of a star.
//!
//! With the leaf values of a star `P` fixed, `R_P` is the set of root-value
//! vectors for which every edge of `P` goes to the root. For a weakly
//! monotone oracle it is cut out by constraints `sum_{i in I} t_i <= c_I`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::boundary::{default_tolerance, BoundaryProbe, Interval};
use crate::error::{Error, Result};
use crate::instance::{Instance, Star, TaskId};
use crate::mechanism::AllocationOracle;
use crate::par;
use crate::value::ExactValue;

/// Largest star for which facet maps are computed.
pub const MAX_REGION_LEAVES: usize = 4;

/// Default budget for the chopped-off-box grid.
pub const DEFAULT_GRID_BUDGET: u64 = 1 << 16;

fn four_pow(k: usize) -> ExactValue {
    ExactValue::from_int(4).pow(k as i32)
}

/// `4^k * nu`.
pub fn box_delta(k: usize, nu: &ExactValue) -> ExactValue {
    four_pow(k) * nu
}

/// Sets the root values of `edges` and reports whether all of them go to
/// `root`.
fn all_to_root<O: AllocationOracle + ?Sized>(
    oracle: &O,
    inst: &mut Instance,
    root: usize,
    point: &[(TaskId, ExactValue)],
) -> Result<bool> {
    for (id, v) in point {
        inst.set_value(*id, root, v.clone())?;
    }
    let a = oracle.allocate(inst)?;
    a.validate(inst)?;
    Ok(point.iter().all(|(id, _)| a.machine_of(*id) == Some(root)))
}

/// Thresholds of every star edge, each with all other values as in
/// `instance`.
pub fn star_thresholds<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    star: &Star,
    tolerance: &ExactValue,
) -> Result<Vec<Interval>> {
    par::try_map_indices(star.len(), |k| {
        let e = star.edges[k];
        let p = BoundaryProbe::at_root(oracle, instance, e, star.root)?
            .with_tolerance(tolerance.clone());
        let s = instance.value(e, p.leaf).expect("endpoint").clone();
        p.critical_value(&s)
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BoxVerdict {
    Box,
    NotBox,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxReport {
    pub star: Star,
    pub delta: ExactValue,
    /// Root value per edge at the probe point, `psi_j - delta`.
    pub point: Vec<(TaskId, ExactValue)>,
    pub verdict: BoxVerdict,
    /// Where each star edge went at the probe point.
    pub allocation: Vec<(TaskId, usize)>,
}

impl BoxReport {
    pub fn is_box(&self) -> bool {
        self.verdict == BoxVerdict::Box
    }
}

/// Box test with thresholds already known (midpoints are used).
pub fn is_box_with<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    star: &Star,
    delta: &ExactValue,
    thresholds: &[Interval],
) -> Result<BoxReport> {
    let mids: Vec<ExactValue> = thresholds.iter().map(|t| t.mid()).collect();
    if let Some(min) = mids.iter().min() {
        if delta >= min {
            return Err(Error::DeltaTooLarge {
                delta: delta.clone(),
                min_threshold: min.clone(),
            });
        }
    }
    let point: Vec<(TaskId, ExactValue)> = star
        .edges
        .iter()
        .zip(&mids)
        .map(|(&e, m)| (e, m - delta))
        .collect();
    let mut inst = instance.clone();
    for (id, v) in &point {
        inst.set_value(*id, star.root, v.clone())?;
    }
    let a = oracle.allocate(&inst)?;
    a.validate(&inst)?;
    let allocation: Vec<(TaskId, usize)> = star
        .edges
        .iter()
        .map(|&e| (e, a.machine_of(e).expect("validated")))
        .collect();
    let verdict = if allocation.iter().all(|&(_, m)| m == star.root) {
        BoxVerdict::Box
    } else {
        BoxVerdict::NotBox
    };
    Ok(BoxReport {
        star: star.clone(),
        delta: delta.clone(),
        point,
        verdict,
        allocation,
    })
}

/// Whether all star edges go to the root at `t_j = psi_j(s_j) - delta`.
pub fn is_box<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    star: &Star,
    delta: &ExactValue,
) -> Result<BoxReport> {
    let th = star_thresholds(oracle, instance, star, &default_tolerance())?;
    is_box_with(oracle, instance, star, delta, &th)
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NiceReport {
    pub passed: bool,
    pub sum: ExactValue,
    /// `(1 - 3 eps)(n - 1) z`.
    pub threshold: ExactValue,
}

/// `(1 - 3 eps)(n - 1) z`.
pub fn nice_threshold(n: usize, eps: &ExactValue, z: &ExactValue) -> ExactValue {
    (ExactValue::one() - eps * &ExactValue::from_int(3)) * ExactValue::from_int(n as i64 - 1) * z
}

/// Checks `sum_j psi_j >= (1 - 3 eps)(n - 1) z` for a star whose root values
/// are 0 and whose leaf values lie in `(z, (1 + eps) z)`.
pub fn is_nice_star<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    star: &Star,
    eps: &ExactValue,
    z: &ExactValue,
) -> Result<NiceReport> {
    if !eps.is_positive() {
        return Err(Error::PreconditionViolated("eps must be positive".into()));
    }
    let hi = z * &(ExactValue::one() + eps);
    for (&e, &leaf) in star.edges.iter().zip(&star.leaves) {
        let t = instance.task_or_err(e)?;
        if !t.value(star.root).expect("endpoint").is_zero() {
            return Err(Error::PreconditionViolated(format!(
                "edge {e} has a nonzero root value"
            )));
        }
        let s = t.value(leaf).expect("endpoint");
        if !(s > z && s < &hi) {
            return Err(Error::PreconditionViolated(format!(
                "leaf value {s} of edge {e} is outside (z, (1 + eps) z)"
            )));
        }
    }
    let tol = default_tolerance();
    let th = star_thresholds(oracle, instance, star, &tol)?;
    let sum: ExactValue = th.iter().map(|t| t.mid()).sum();
    let threshold = nice_threshold(instance.machines(), eps, z);
    let slack = tol * ExactValue::from_int(star.len() as i64);
    Ok(NiceReport {
        passed: sum >= &threshold - &slack,
        sum,
        threshold,
    })
}

/// Copy of `instance` with each star edge's root value set to
/// `mid(psi_j) - 4^k nu`.
pub fn shift_to_nu<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    star: &Star,
    nu: &ExactValue,
) -> Result<Instance> {
    let th = star_thresholds(oracle, instance, star, &default_tolerance())?;
    let d = box_delta(star.len(), nu);
    let mut out = instance.clone();
    for (&e, t) in star.edges.iter().zip(&th) {
        let v = t.mid() - d.clone();
        if v.is_negative() {
            return Err(Error::NegativeValue { task: e, value: v });
        }
        out.set_value(e, star.root, v)?;
    }
    Ok(out)
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChoppedReport {
    pub star: Star,
    /// Box verdict of each `P_{-i}`.
    pub sub_boxes: Vec<bool>,
    /// Grid steps `q` at which `P_{-k}` stops being a box after lowering the
    /// last edge's leaf value by `q nu / (4n)`.
    pub failing_steps: Vec<u64>,
    pub steps_checked: u64,
    pub chopped_off: bool,
}

/// Tests the chopped-off-box conditions for a star of `k >= 3` edges whose
/// last edge plays the role of `p_k`.
pub fn is_chopped_off_box<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    star: &Star,
    nu: &ExactValue,
    budget: u64,
) -> Result<ChoppedReport> {
    let k = star.len();
    if k < 3 {
        return Err(Error::PreconditionViolated(format!(
            "a chopped-off box needs at least 3 edges, got {k}"
        )));
    }
    let n = instance.machines() as i64;
    let steps = (ExactValue::from_int(4 * n) / nu).floor();
    let steps = ExactValue::from_bigint(steps).to_u64().unwrap_or(u64::MAX);
    if steps > budget {
        return Err(Error::GridTooFine {
            points: steps,
            budget,
        });
    }
    let delta = box_delta(k - 1, nu);
    let sub_boxes = par::try_map_indices(k, |i| {
        Ok::<_, Error>(is_box(oracle, instance, &star.without(i), &delta)?.is_box())
    })?;
    let last = star.edges[k - 1];
    let leaf = star.leaves[k - 1];
    let s_bar = instance.value(last, leaf).expect("endpoint").clone();
    let unit = nu / &ExactValue::from_int(4 * n);
    let rest = star.without(k - 1);
    let outcomes = par::try_map_indices(steps as usize, |j| -> Result<Option<u64>> {
        let q = j as u64 + 1;
        let drop = &unit * &ExactValue::from_int(q as i64);
        if s_bar <= drop {
            return Ok(None);
        }
        let mut inst = instance.clone();
        inst.set_value(last, star.root, ExactValue::zero())?;
        inst.set_value(last, leaf, &s_bar - &drop)?;
        let ok = is_box(oracle, &inst, &rest, &delta)?.is_box();
        Ok(if ok { None } else { Some(q) })
    })?;
    let failing_steps: Vec<u64> = outcomes.into_iter().flatten().collect();
    let chopped_off = sub_boxes.iter().all(|&b| b) && failing_steps.is_empty();
    Ok(ChoppedReport {
        star: star.clone(),
        sub_boxes,
        failing_steps,
        steps_checked: steps,
        chopped_off,
    })
}

/// A 4-cycle `(row1, row2, col1, col2)` in a bipartite adjacency matrix.
pub fn find_c4(adjacency: &[Vec<bool>]) -> Option<(usize, usize, usize, usize)> {
    let width = adjacency.iter().map(|r| r.len()).max().unwrap_or(0);
    let words = width.div_ceil(64);
    let rows: Vec<Vec<u64>> = adjacency
        .iter()
        .map(|r| {
            let mut bits = vec![0u64; words];
            for (j, &b) in r.iter().enumerate() {
                if b {
                    bits[j / 64] |= 1 << (j % 64);
                }
            }
            bits
        })
        .collect();
    for i in 0..rows.len() {
        for k in i + 1..rows.len() {
            let mut shared = Vec::new();
            for (w, (x, y)) in rows[i].iter().zip(&rows[k]).enumerate() {
                let mut x = x & y;
                while x != 0 && shared.len() < 2 {
                    let b = x.trailing_zeros() as usize;
                    shared.push(w * 64 + b);
                    x &= x - 1;
                }
                if shared.len() == 2 {
                    return Some((i, k, shared[0], shared[1]));
                }
            }
        }
    }
    None
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FacetEntry {
    /// Star positions in the constraint.
    pub subset: Vec<usize>,
    /// `|I| * lambda*` where the ray along `1_I` leaves the region; `None`
    /// if it never does below the cap.
    pub exit: Option<ExactValue>,
    /// `c_I` when the facet is nontrivial.
    pub bound: Option<ExactValue>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionFacets {
    pub star: Star,
    pub resolution: ExactValue,
    /// One entry per nonempty subset, by size then lexicographically.
    pub facets: Vec<FacetEntry>,
}

impl RegionFacets {
    pub fn bound(&self, subset: &[usize]) -> Option<&ExactValue> {
        self.facets
            .iter()
            .find(|f| f.subset == subset)
            .and_then(|f| f.bound.as_ref())
    }

    /// `c_I <= sum_{i in I} c_i` whenever all singleton facets exist.
    pub fn is_consistent(&self) -> bool {
        let k = self.star.len();
        let singles: Vec<Option<&ExactValue>> = (0..k).map(|i| self.bound(&[i])).collect();
        if singles.iter().any(|s| s.is_none()) {
            return true;
        }
        self.facets.iter().all(|f| match &f.bound {
            Some(c) => {
                let sum: ExactValue = f.subset.iter().map(|&i| singles[i].expect("checked")).sum();
                c <= &(sum + self.resolution.clone())
            }
            None => true,
        })
    }
}

fn subsets(k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..(1 << k))
        .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    out.sort_by(|a: &Vec<usize>, b: &Vec<usize>| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Probes the facets of `R_P` for a star of at most four edges.
///
/// Single bounds come from bisecting along each axis. A larger subset `I` is
/// probed along the vector of single exits restricted to `I` and claimed as a
/// facet when its exit comes earlier than the facets found so far predict;
/// it is dropped again when a larger facet explains it. Every
/// claimed facet is then checked at `2k` random points of its face, just
/// inside and just outside.
pub fn probe_region<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    star: &Star,
    resolution: &ExactValue,
) -> Result<RegionFacets> {
    let k = star.len();
    if k == 0 || k > MAX_REGION_LEAVES {
        return Err(Error::PreconditionViolated(format!(
            "facet maps need 1..={MAX_REGION_LEAVES} edges, got {k}"
        )));
    }
    if !resolution.is_positive() {
        return Err(Error::PreconditionViolated(
            "resolution must be positive".into(),
        ));
    }
    let tol = resolution / &ExactValue::from_int(64);
    let n = ExactValue::from_int(instance.machines() as i64);
    let mut base = instance.clone();
    for &e in &star.edges {
        base.set_value(e, star.root, ExactValue::zero())?;
    }
    let leaf_vals: Vec<ExactValue> = star
        .edges
        .iter()
        .zip(&star.leaves)
        .map(|(&e, &l)| instance.value(e, l).expect("endpoint").clone())
        .collect();
    let cap = leaf_vals
        .iter()
        .map(|s| &n * s + ExactValue::one())
        .max()
        .expect("nonempty");

    let subs = subsets(k);
    // bisects along `lambda * dir` on the coordinates in `set`; returns the
    // coordinate sum at the exit
    let exit_along =
        |set: &[usize], dir: &[ExactValue], lam_cap: &ExactValue| -> Result<Option<ExactValue>> {
            let total: ExactValue = dir.iter().sum();
            if !total.is_positive() {
                return Ok(Some(ExactValue::zero()));
            }
            let mut inst = base.clone();
            let mut at = |lam: &ExactValue| -> Result<bool> {
                let point: Vec<(TaskId, ExactValue)> = set
                    .iter()
                    .zip(dir)
                    .map(|(&i, w)| (star.edges[i], lam * w))
                    .collect();
                all_to_root(oracle, &mut inst, star.root, &point)
            };
            let half = lam_cap.midpoint(&ExactValue::zero());
            let w0 = at(&ExactValue::zero())?;
            let w1 = at(&half)?;
            let w2 = at(lam_cap)?;
            if (!w0 && (w1 || w2)) || (!w1 && w2) {
                return Err(Error::NotMonotone(format!(
                    "region of star at root {} along {:?}",
                    star.root, set
                )));
            }
            if w2 {
                return Ok(None);
            }
            if !w0 {
                return Ok(Some(ExactValue::zero()));
            }
            let step = &tol / &total;
            let (mut lo, mut hi) = if w1 {
                (half, lam_cap.clone())
            } else {
                (ExactValue::zero(), half)
            };
            while &hi - &lo > step {
                let mid = lo.midpoint(&hi);
                if at(&mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(Some(lo.midpoint(&hi) * total))
        };
    let singles = par::try_map_indices(k, |i| exit_along(&[i], &[ExactValue::one()], &cap))?;
    // larger subsets move along the vector of single exits, so that every
    // single facet is reached at lambda = 1 and a joint cut shows up earlier
    let weights: Vec<ExactValue> = singles
        .iter()
        .map(|e| e.clone().unwrap_or_else(|| cap.clone()))
        .collect();
    let two = ExactValue::from_int(2);
    let exits = par::try_map_indices(subs.len(), |idx| -> Result<Option<ExactValue>> {
        let set = &subs[idx];
        if set.len() == 1 {
            return Ok(singles[set[0]].clone());
        }
        let dir: Vec<ExactValue> = set.iter().map(|&i| weights[i].clone()).collect();
        exit_along(set, &dir, &two)
    })?;

    // claim facets by increasing size
    let mut bounds: Vec<Option<ExactValue>> = vec![None; subs.len()];
    for (idx, set) in subs.iter().enumerate() {
        let Some(exit) = &exits[idx] else { continue };
        if set.len() == 1 {
            bounds[idx] = Some(exit.clone());
            continue;
        }
        let span: ExactValue = set.iter().map(|&i| &weights[i]).sum();
        let mut predicted: Option<ExactValue> = None;
        for (j, other) in subs.iter().enumerate().take(idx) {
            let Some(c) = &bounds[j] else { continue };
            let overlap: ExactValue = other
                .iter()
                .filter(|i| set.contains(i))
                .map(|&i| &weights[i])
                .sum();
            if !overlap.is_positive() {
                continue;
            }
            let p = c * &span / overlap;
            predicted = Some(match predicted {
                Some(q) if q <= p => q,
                _ => p,
            });
        }
        let claim = match &predicted {
            Some(p) => exit < &(p - resolution),
            None => true,
        };
        if claim {
            bounds[idx] = Some(exit.clone());
        }
    }
    // drop constraints explained by a larger facet
    let mut present = vec![true; subs.len()];
    for (i, a) in subs.iter().enumerate() {
        let Some(ca) = &bounds[i] else { continue };
        for (j, b) in subs.iter().enumerate() {
            if b.len() > a.len() && a.iter().all(|x| b.contains(x)) {
                if let Some(cb) = &bounds[j] {
                    if cb <= &(ca + resolution) {
                        present[i] = false;
                    }
                }
            }
        }
    }
    let facets: Vec<FacetEntry> = subs
        .iter()
        .enumerate()
        .map(|(i, s)| FacetEntry {
            subset: s.clone(),
            exit: exits[i].clone(),
            bound: if present[i] { bounds[i].clone() } else { None },
        })
        .collect();
    let region = RegionFacets {
        star: star.clone(),
        resolution: resolution.clone(),
        facets,
    };
    cross_validate(oracle, &base, &region)?;
    Ok(region)
}

/// Checks points just inside and just outside each claimed facet.
fn cross_validate<O: AllocationOracle + ?Sized>(
    oracle: &O,
    base: &Instance,
    region: &RegionFacets,
) -> Result<()> {
    let star = &region.star;
    let k = star.len();
    let res = &region.resolution;
    let claimed: Vec<(&Vec<usize>, &ExactValue)> = region
        .facets
        .iter()
        .filter_map(|f| f.bound.as_ref().map(|c| (&f.subset, c)))
        .collect();
    let inside_all = |t: &[ExactValue], skip: usize, margin: &ExactValue| -> bool {
        claimed.iter().enumerate().all(|(ci, (set, c))| {
            if ci == skip {
                return true;
            }
            let sum: ExactValue = set.iter().map(|&i| &t[i]).sum();
            sum <= *c - margin
        })
    };
    for (ci, (set, c)) in claimed.iter().enumerate() {
        let mut rng = par::stream_rng(0x05ee_d0ff_ace7, ci as u64);
        let mut tested = 0;
        let mut attempts = 0;
        while tested < 2 * k && attempts < 16 * k {
            attempts += 1;
            let raw: Vec<i64> = set.iter().map(|_| rng.gen_range(1..=1024)).collect();
            let total: i64 = raw.iter().sum();
            let mut t = vec![ExactValue::zero(); k];
            for (&i, &w) in set.iter().zip(&raw) {
                t[i] = *c * &ExactValue::ratio(w, total);
            }
            // keep away from other facets by a few resolutions
            let margin = res * &ExactValue::from_int(4);
            if !inside_all(&t, ci, &margin) {
                continue;
            }
            let shift = res / &ExactValue::from_int(set.len() as i64);
            let mut inside = t.clone();
            let mut outside = t.clone();
            for &i in set.iter() {
                inside[i] = &t[i] - &shift;
                outside[i] = &t[i] + &shift;
            }
            if inside.iter().any(|x| x.is_negative()) {
                continue;
            }
            tested += 1;
            let mut inst = base.clone();
            let pin: Vec<(TaskId, ExactValue)> = star
                .edges
                .iter()
                .zip(&inside)
                .map(|(&e, v)| (e, v.clone()))
                .collect();
            let pout: Vec<(TaskId, ExactValue)> = star
                .edges
                .iter()
                .zip(&outside)
                .map(|(&e, v)| (e, v.clone()))
                .collect();
            let a = all_to_root(oracle, &mut inst, star.root, &pin)?;
            let b = all_to_root(oracle, &mut inst, star.root, &pout)?;
            if !a || b {
                return Err(Error::ResolutionTooCoarse(format!(
                    "facet {:?} with c = {} fails at a face point (inside: {}, outside: {})",
                    set, c, a, b
                )));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PairShape {
    Crossing,
    QuasiBundling,
    QuasiFlipping,
    HalfBundlingAtFirst,
    HalfBundlingAtSecond,
    FullyBundling,
    Degenerate,
    Unknown,
}

impl PairShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairShape::Crossing => "Crossing",
            PairShape::QuasiBundling => "QuasiBundling",
            PairShape::QuasiFlipping => "QuasiFlipping",
            PairShape::HalfBundlingAtFirst => "HalfBundlingAtFirst",
            PairShape::HalfBundlingAtSecond => "HalfBundlingAtSecond",
            PairShape::FullyBundling => "FullyBundling",
            PairShape::Degenerate => "Degenerate",
            PairShape::Unknown => "Unknown",
        }
    }

    pub fn is_bundling(&self) -> bool {
        matches!(
            self,
            PairShape::QuasiBundling
                | PairShape::HalfBundlingAtFirst
                | PairShape::HalfBundlingAtSecond
                | PairShape::FullyBundling
        )
    }
}

impl core::fmt::Display for PairShape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairReport {
    pub tasks: (TaskId, TaskId),
    pub root: usize,
    pub shape: PairShape,
    /// Threshold of each task with the other at root value 0.
    pub low: (Option<ExactValue>, Option<ExactValue>),
    /// Threshold of each task with the other pushed to its leaf.
    pub high: (Option<ExactValue>, Option<ExactValue>),
    /// Slope of the slanted part of the boundary of the all-to-root region,
    /// when there is one.
    pub bundling_slope: Option<ExactValue>,
    pub resolution: ExactValue,
}

/// Classifies the two-task slice of `(a, b)` at `root`.
///
/// Compares each task's threshold when the other sits at 0 (`L`) with its
/// threshold when the other is priced out (`H`). Equal values mean the
/// boundaries cross; `L > H` on both is a bundling cut and `L < H` a flip.
/// In the bundling case an `H` of zero marks the missing single facet.
pub fn classify_pair<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    root: usize,
    tasks: (TaskId, TaskId),
    resolution: &ExactValue,
) -> Result<PairReport> {
    let (a, b) = tasks;
    if a == b {
        return Err(Error::PreconditionViolated(
            "classification needs two tasks".into(),
        ));
    }
    let tol = resolution / &ExactValue::from_int(64);
    let pa = BoundaryProbe::at_root(oracle, instance, a, root)?.with_tolerance(tol.clone());
    let pb = BoundaryProbe::at_root(oracle, instance, b, root)?.with_tolerance(tol.clone());
    let sa = instance.value(a, pa.leaf).expect("endpoint").clone();
    let sb = instance.value(b, pb.leaf).expect("endpoint").clone();

    let mut ctx = instance.clone();
    ctx.set_value(a, root, ExactValue::zero())?;
    ctx.set_value(b, root, ExactValue::zero())?;

    let report = |shape, low, high, slope| PairReport {
        tasks,
        root,
        shape,
        low,
        high,
        bundling_slope: slope,
        resolution: resolution.clone(),
    };

    // a value of the other task's root cost that always pushes it to its leaf
    let mut big = ExactValue::max_of(&pa.cap(&sa), &pb.cap(&sb)).clone() * ExactValue::from_int(2);
    let mut found = false;
    for _ in 0..16 {
        let mut ok = true;
        for (other, x) in [(a, b), (b, a)] {
            for probe_val in [ExactValue::zero(), big.clone()] {
                let mut c = ctx.clone();
                c.set_value(x, root, probe_val)?;
                c.set_value(other, root, big.clone())?;
                let alloc = oracle.allocate(&c)?;
                if alloc.machine_of(other) == Some(root) {
                    ok = false;
                }
            }
        }
        if ok {
            found = true;
            break;
        }
        big = big * ExactValue::from_int(2);
    }
    if !found {
        return Ok(report(
            PairShape::Degenerate,
            (None, None),
            (None, None),
            None,
        ));
    }

    let with_other = |p: &BoundaryProbe<'_, O>, other: TaskId, v: ExactValue, s: &ExactValue| {
        let mut c = ctx.clone();
        c.set_value(other, root, v)?;
        p.in_context(c)
            .critical_value_opt(s)
            .map(|o| o.map(|iv| iv.mid()))
    };
    let la = with_other(&pa, b, ExactValue::zero(), &sa)?;
    let lb = with_other(&pb, a, ExactValue::zero(), &sb)?;
    let ha = with_other(&pa, b, big.clone(), &sa)?;
    let hb = with_other(&pb, a, big.clone(), &sb)?;
    let low = (la.clone(), lb.clone());
    let high = (ha.clone(), hb.clone());
    let (Some(la), Some(lb), Some(ha), Some(hb)) = (la, lb, ha, hb) else {
        return Ok(report(PairShape::Degenerate, low, high, None));
    };
    let negligible = resolution / &ExactValue::from_int(8);
    if la <= negligible && lb <= negligible {
        return Ok(report(PairShape::Degenerate, low, high, None));
    }
    let da = &la - &ha;
    let db = &lb - &hb;
    let small = |d: &ExactValue| d.abs() <= resolution / &ExactValue::from_int(2);
    let shape = if small(&da) && small(&db) {
        PairShape::Crossing
    } else if &da > resolution && &db > resolution {
        match (ha <= negligible, hb <= negligible) {
            (true, true) => PairShape::FullyBundling,
            (false, true) => PairShape::HalfBundlingAtFirst,
            (true, false) => PairShape::HalfBundlingAtSecond,
            (false, false) => PairShape::QuasiBundling,
        }
    } else if da < -resolution.clone() && db < -resolution.clone() {
        PairShape::QuasiFlipping
    } else {
        PairShape::Unknown
    };

    let slope = if shape.is_bundling() {
        // the cut runs from (H_a, L_b) to (L_a, H_b); sample it strictly inside
        let y1 = &hb + &((&lb - &hb) * ExactValue::ratio(1, 4));
        let y2 = &hb + &((&lb - &hb) * ExactValue::ratio(3, 4));
        let x1 = region_edge(oracle, &ctx, root, a, b, &y1, &big, &tol)?;
        let x2 = region_edge(oracle, &ctx, root, a, b, &y2, &big, &tol)?;
        if x1 == x2 {
            None
        } else {
            Some((y2 - y1) / (x2 - x1))
        }
    } else {
        None
    };
    Ok(report(shape, low, high, slope))
}

/// Largest `t_a` with both tasks on the root when `t_b = y`.
#[allow(clippy::too_many_arguments)]
fn region_edge<O: AllocationOracle + ?Sized>(
    oracle: &O,
    ctx: &Instance,
    root: usize,
    a: TaskId,
    b: TaskId,
    y: &ExactValue,
    cap: &ExactValue,
    tol: &ExactValue,
) -> Result<ExactValue> {
    let mut inst = ctx.clone();
    let mut at = |x: &ExactValue| -> Result<bool> {
        all_to_root(oracle, &mut inst, root, &[(a, x.clone()), (b, y.clone())])
    };
    if !at(&ExactValue::zero())? {
        return Ok(ExactValue::zero());
    }
    let (mut lo, mut hi) = (ExactValue::zero(), cap.clone());
    while &hi - &lo > *tol {
        let mid = lo.midpoint(&hi);
        if at(&mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.midpoint(&hi))
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaseCaseStar {
    pub edges: (TaskId, TaskId),
    pub is_box: bool,
    /// `alpha_x + alpha_y - c_xy` for a non-box with a bundling facet.
    pub bundle_depth: Option<ExactValue>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaseCaseReport {
    pub delta: ExactValue,
    pub stars: Vec<BaseCaseStar>,
}

impl BaseCaseReport {
    pub fn boxes(&self) -> usize {
        self.stars.iter().filter(|s| s.is_box).count()
    }
}

/// Runs the box test with `delta = 16 nu` (the box offset for two leaves) on
/// the four stars `{x, y}` of a two-leaf, two-edge-per-leaf standard instance.
/// For each non-box it records how deep the bundling cut reaches.
pub fn base_case_check<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    root: usize,
    first_leaf: (TaskId, TaskId),
    second_leaf: (TaskId, TaskId),
    nu: &ExactValue,
) -> Result<BaseCaseReport> {
    let delta = box_delta(2, nu);
    let pairs = [
        (first_leaf.0, second_leaf.0),
        (first_leaf.0, second_leaf.1),
        (first_leaf.1, second_leaf.0),
        (first_leaf.1, second_leaf.1),
    ];
    let resolution = nu.clone();
    let stars = par::try_map_indices(4, |i| -> Result<BaseCaseStar> {
        let (x, y) = pairs[i];
        let star = Star::new(instance, root, vec![x, y])?;
        let th = star_thresholds(oracle, instance, &star, &default_tolerance())?;
        let rep = is_box_with(oracle, instance, &star, &delta, &th)?;
        let bundle_depth = if rep.is_box() {
            None
        } else {
            let region = probe_region(oracle, instance, &star, &resolution)?;
            region
                .bound(&[0, 1])
                .map(|c| th[0].mid() + th[1].mid() - c.clone())
        };
        Ok(BaseCaseStar {
            edges: (x, y),
            is_box: rep.is_box(),
            bundle_depth,
        })
    })?;
    Ok(BaseCaseReport { delta, stars })
}

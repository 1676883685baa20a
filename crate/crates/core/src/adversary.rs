//! Constructive lower-bound pipeline against a fixed allocation oracle.
//!
//! A random multi-clique is sampled, edges are grouped by their quantized
//! boundary tables, a root and grid value `z` with large table sums are
//! chosen, and the resulting nice multi-star is searched for a box. The box
//! is turned into a concrete instance whose makespan ratio is certified.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::One;
use rand::Rng;

use crate::boundary::{
    discontinuity_check, grid, grid_size, quantize, BoundaryProbe, BoundaryTable, Interval,
};
use crate::error::{Error, Result};
use crate::geometry::{
    box_delta, is_box_with, is_nice_star, nice_threshold, star_thresholds, BoxReport, NiceReport,
};
use crate::instance::{
    makespan, opt_makespan, Allocation, Instance, MultiStar, Star, Task, TaskId,
};
use crate::mechanism::AllocationOracle;
use crate::par;
use crate::value::ExactValue;

/// Resamples allowed per edge before a suspected jump becomes an error.
pub const MAX_RESAMPLES: u32 = 8;

/// Random bits in the second sampling step.
pub const SAMPLE_BITS: u32 = 31;

const STREAM_CLIQUE: u64 = 0;
const STREAM_NICE: u64 = 1;
const STREAM_RESAMPLE: u64 = 1 << 32;

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdversaryConfig {
    pub n: usize,
    pub eps: ExactValue,
    pub xi: ExactValue,
    pub nu: ExactValue,
    /// Parallel edges per machine pair.
    pub ell: usize,
    /// Required multiplicity of the nice multi-star.
    pub q: usize,
    pub seed: u64,
    /// Bisection tolerance for every threshold probe.
    pub tolerance: ExactValue,
    /// Box tests allowed in the star search.
    pub box_budget: u64,
}

impl AdversaryConfig {
    /// Defaults for a desk-scale run at `n` machines.
    pub fn desk(n: usize) -> Self {
        AdversaryConfig {
            n,
            eps: ExactValue::ratio(1, 20),
            xi: ExactValue::ratio(1, 2),
            nu: ExactValue::pow2_neg(2 * n as u32 + 6),
            ell: 32,
            q: 1,
            seed: 0,
            tolerance: ExactValue::pow2_neg(24),
            box_budget: 4096,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 2 {
            return bad(format!("need at least 2 machines, got {}", self.n));
        }
        if self.eps > ExactValue::one() {
            return bad(format!("eps must be at most 1, got {}", self.eps));
        }
        grid_size(&self.eps)?;
        if !(self.xi.is_positive() && self.xi < ExactValue::one()) {
            return bad(format!("xi must lie in (0, 1), got {}", self.xi));
        }
        let cap = self.nu_cap();
        if !(self.nu.is_positive() && self.nu < cap) {
            return bad(format!("nu must lie in (0, {cap}), got {}", self.nu));
        }
        if self.ell == 0 || self.q == 0 {
            return bad("ell and q must be positive".into());
        }
        if !self.tolerance.is_positive() {
            return bad("tolerance must be positive".into());
        }
        Ok(())
    }

    /// `xi / (n^2 4^n)`, the exclusive upper end for `nu`.
    pub fn nu_cap(&self) -> ExactValue {
        let n = self.n as i64;
        &self.xi / &(ExactValue::from_int(n * n) * ExactValue::from_int(4).pow(self.n as i32))
    }

    pub fn nu_prime(&self) -> ExactValue {
        &self.nu / &ExactValue::from_int(4)
    }

    /// Box offset for a spanning star, `4^(n-1) nu`.
    pub fn delta(&self) -> ExactValue {
        box_delta(self.n - 1, &self.nu)
    }
}

fn unit_draw<R: Rng>(rng: &mut R) -> ExactValue {
    let k: i64 = rng.gen_range(1..(1i64 << SAMPLE_BITS));
    ExactValue::dyadic(k, SAMPLE_BITS)
}

/// A value in `(z, (1 + eps) z)`.
fn draw_above<R: Rng>(rng: &mut R, z: &ExactValue, eps: &ExactValue) -> ExactValue {
    z + &(z * eps * unit_draw(rng))
}

/// Complete multi-graph with `ell` edges per pair and a zero loop at each
/// machine. Each edge is `0` at one endpoint and lies in `(z, (1 + eps) z)`
/// at the other, for a uniform `z` on the grid.
///
/// Edge ids run over pairs in lexicographic order; loops follow.
pub fn sample_multi_clique(config: &AdversaryConfig) -> Result<Instance> {
    config.validate()?;
    let zs = grid(&config.eps)?;
    let mut rng = par::stream_rng(config.seed, STREAM_CLIQUE);
    let mut tasks = Vec::new();
    let mut id: TaskId = 0;
    for i in 0..config.n {
        for j in i + 1..config.n {
            for _ in 0..config.ell {
                let z = &zs[rng.gen_range(0..zs.len())];
                let on_i = rng.gen_bool(0.5);
                let u = draw_above(&mut rng, z, &config.eps);
                let (vi, vj) = if on_i {
                    (u, ExactValue::zero())
                } else {
                    (ExactValue::zero(), u)
                };
                tasks.push(Task::new(id, i, j, vi, vj));
                id += 1;
            }
        }
    }
    for m in 0..config.n {
        tasks.push(Task::looped(id, m, ExactValue::zero()));
        id += 1;
    }
    Instance::new(config.n, tasks)
}

/// Machine holding the nonzero value of a two-machine edge and its grid
/// value.
fn loaded_side(t: &Task, eps: &ExactValue) -> (usize, ExactValue) {
    if t.va.is_zero() {
        (t.b, t.vb.floor_to(eps))
    } else {
        (t.a, t.va.floor_to(eps))
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResampleRecord {
    pub task: TaskId,
    pub attempts: u32,
}

/// Redraws the loaded value of every edge whose threshold looks
/// discontinuous, at most [`MAX_RESAMPLES`] times each.
pub fn resample_discontinuities<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &mut Instance,
    config: &AdversaryConfig,
) -> Result<Vec<ResampleRecord>> {
    let mut pending: Vec<TaskId> = instance
        .tasks()
        .iter()
        .filter(|t| !t.is_loop())
        .map(|t| t.id)
        .collect();
    let mut attempts: BTreeMap<TaskId, u32> = BTreeMap::new();
    loop {
        let snapshot = instance.clone();
        let flagged = par::try_map_indices(pending.len(), |k| -> Result<bool> {
            let t = snapshot.task(pending[k]).expect("present");
            let (loaded, _) = loaded_side(t, &config.eps);
            let root = t.other(loaded).expect("edge");
            let probe = BoundaryProbe::at_root(oracle, &snapshot, t.id, root)?
                .with_tolerance(config.tolerance.clone());
            Ok(discontinuity_check(&probe, t.value(loaded).expect("endpoint"))?.suspected)
        })?;
        let next: Vec<TaskId> = pending
            .iter()
            .zip(flagged)
            .filter(|p| p.1)
            .map(|p| *p.0)
            .collect();
        if next.is_empty() {
            break;
        }
        for &id in &next {
            let count = attempts.entry(id).or_insert(0);
            if *count >= MAX_RESAMPLES {
                return Err(Error::PersistentDiscontinuity {
                    task: id,
                    attempts: *count,
                });
            }
            let mut rng = par::stream_rng(config.seed, STREAM_RESAMPLE + id * 16 + *count as u64);
            *count += 1;
            let t = instance.task(id).expect("present").clone();
            let (loaded, z) = loaded_side(&t, &config.eps);
            instance.set_value(id, loaded, draw_above(&mut rng, &z, &config.eps))?;
        }
        pending = next;
    }
    Ok(attempts
        .into_iter()
        .map(|(task, attempts)| ResampleRecord { task, attempts })
        .collect())
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DipoleEdge {
    pub id: TaskId,
    /// Endpoint with the nonzero value.
    pub loaded: usize,
    /// Grid value of the loaded side.
    pub z: ExactValue,
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DipoleSet {
    /// `(i, j)` with `i < j`.
    pub pair: (usize, usize),
    pub edges: Vec<DipoleEdge>,
    /// Quantized table from `i` toward `j`.
    pub table_ij: BoundaryTable,
    /// Quantized table from `j` toward `i`.
    pub table_ji: BoundaryTable,
    /// Whether every `(side, z)` slot is covered.
    pub full: bool,
}

impl DipoleSet {
    /// Table seen from `root`.
    pub fn table_from(&self, root: usize) -> &BoundaryTable {
        if root == self.pair.0 {
            &self.table_ij
        } else {
            &self.table_ji
        }
    }

    /// Edges that are 0 at `root` and whose other side sits at grid value
    /// `z`.
    pub fn edges_at(&self, root: usize, z: &ExactValue) -> Vec<TaskId> {
        self.edges
            .iter()
            .filter(|e| e.loaded != root && &e.z == z)
            .map(|e| e.id)
            .collect()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairDipoles {
    pub pair: (usize, usize),
    /// Distinct table pairs seen on this machine pair.
    pub groups: usize,
    pub dipoles: Vec<DipoleSet>,
}

impl PairDipoles {
    pub fn full_count(&self) -> usize {
        self.dipoles.iter().filter(|d| d.full).count()
    }
}

/// Groups the edges of every machine pair by their exact table pair and
/// extracts disjoint full-range covers greedily.
///
/// A pair with no full cover keeps its largest table group as a single
/// partial entry, so later stages still see its tables.
pub fn find_dipoles<O: AllocationOracle + ?Sized>(
    oracle: &O,
    clique: &Instance,
    eps: &ExactValue,
    tolerance: &ExactValue,
) -> Result<Vec<PairDipoles>> {
    let zs = grid(eps)?;
    let edges: Vec<&Task> = clique.tasks().iter().filter(|t| !t.is_loop()).collect();
    let tables =
        par::try_map_indices(edges.len(), |k| -> Result<(BoundaryTable, BoundaryTable)> {
            let t = edges[k];
            let (i, j) = (t.a.min(t.b), t.a.max(t.b));
            let pi =
                BoundaryProbe::at_root(oracle, clique, t.id, i)?.with_tolerance(tolerance.clone());
            let pj =
                BoundaryProbe::at_root(oracle, clique, t.id, j)?.with_tolerance(tolerance.clone());
            Ok((quantize(&pi, eps)?, quantize(&pj, eps)?))
        })?;

    type Key = (Vec<Option<ExactValue>>, Vec<Option<ExactValue>>);
    let mut by_pair: BTreeMap<(usize, usize), BTreeMap<Key, Vec<usize>>> = BTreeMap::new();
    for (k, t) in edges.iter().enumerate() {
        let pair = (t.a.min(t.b), t.a.max(t.b));
        let key = (tables[k].0.key(), tables[k].1.key());
        by_pair
            .entry(pair)
            .or_default()
            .entry(key)
            .or_default()
            .push(k);
    }

    let mut out = Vec::new();
    for (pair, groups) in by_pair {
        let mut dipoles = Vec::new();
        let mut largest: Option<&Vec<usize>> = None;
        for members in groups.values() {
            if largest.is_none_or(|l| members.len() > l.len()) {
                largest = Some(members);
            }
            // slot -> unused members
            let mut slots: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
            for &k in members {
                let (loaded, z) = loaded_side(edges[k], eps);
                let zi = zs
                    .iter()
                    .position(|g| g == &z)
                    .expect("sampled on the grid");
                slots.entry((loaded, zi)).or_default().push(k);
            }
            for list in slots.values_mut() {
                list.reverse();
            }
            let wanted = 2 * zs.len();
            while slots.len() == wanted && slots.values().all(|l| !l.is_empty()) {
                let picked: Vec<usize> = slots
                    .values_mut()
                    .map(|l| l.pop().expect("nonempty"))
                    .collect();
                dipoles.push(make_dipole(pair, &picked, &edges, &tables, eps, true));
            }
        }
        if dipoles.is_empty() {
            if let Some(members) = largest {
                dipoles.push(make_dipole(pair, members, &edges, &tables, eps, false));
            }
        }
        out.push(PairDipoles {
            pair,
            groups: groups.len(),
            dipoles,
        });
    }
    Ok(out)
}

fn make_dipole(
    pair: (usize, usize),
    members: &[usize],
    edges: &[&Task],
    tables: &[(BoundaryTable, BoundaryTable)],
    eps: &ExactValue,
    full: bool,
) -> DipoleSet {
    let mut list: Vec<DipoleEdge> = members
        .iter()
        .map(|&k| {
            let (loaded, z) = loaded_side(edges[k], eps);
            DipoleEdge {
                id: edges[k].id,
                loaded,
                z,
            }
        })
        .collect();
    list.sort_by_key(|e| e.id);
    let (tij, tji) = tables[members[0]].clone();
    DipoleSet {
        pair,
        edges: list,
        table_ij: tij,
        table_ji: tji,
        full,
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Selection {
    pub root: usize,
    pub z: ExactValue,
    /// `(leaf, quantized threshold at z)` for every leaf.
    pub per_leaf: Vec<(usize, ExactValue)>,
    pub sum: ExactValue,
    /// `(1 - 3 eps)(n - 1) z`.
    pub bar: ExactValue,
    /// Fewest usable edges on any leaf at this `(root, z)`.
    pub cover: usize,
    /// `sum_z sum_i sum_{j != i}` of the quantized tables.
    pub counting_total: ExactValue,
    /// `C(n, 2)(1/eps - 2)`.
    pub counting_bound: ExactValue,
    /// Candidates meeting the bar.
    pub passing: usize,
}

/// `C(n, 2)(1/eps - 2)`.
pub fn counting_bound(n: usize, eps: &ExactValue) -> ExactValue {
    let pairs = (n * (n - 1) / 2) as i64;
    ExactValue::from_int(pairs) * (eps.recip() - ExactValue::from_int(2))
}

/// Scans every `(root, z)` for table sums at least `(1 - 3 eps)(n - 1) z`.
///
/// Uses the first entry of each pair. Among passing candidates those with at
/// least `min_cover` usable edges on every leaf come first; then larger
/// `sum / z`, then larger `z`, then smaller root. Unbounded table entries
/// disqualify a candidate.
pub fn select_root_and_z(
    dipoles: &[PairDipoles],
    eps: &ExactValue,
    n: usize,
    min_cover: usize,
) -> Result<Selection> {
    let zs = grid(eps)?;
    let mut first: BTreeMap<(usize, usize), &DipoleSet> = BTreeMap::new();
    for p in dipoles {
        if let Some(d) = p.dipoles.first() {
            first.insert(p.pair, d);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if !first.contains_key(&(i, j)) {
                return Err(Error::PreconditionViolated(format!(
                    "no tables for machine pair ({i}, {j})"
                )));
            }
        }
    }
    let dip = |i: usize, j: usize| first[&(i.min(j), i.max(j))];

    let mut counting_total = ExactValue::zero();
    let mut best: Option<(bool, ExactValue, Selection)> = None;
    let mut passing = 0;
    for (k, z) in zs.iter().enumerate() {
        for i in 0..n {
            let mut per_leaf = Vec::with_capacity(n - 1);
            let mut bounded = true;
            let mut cover = usize::MAX;
            for j in (0..n).filter(|&j| j != i) {
                let d = dip(i, j);
                match d.table_from(i).at(k) {
                    Some(v) => {
                        counting_total += v.clone();
                        per_leaf.push((j, v.clone()));
                    }
                    None => bounded = false,
                }
                cover = cover.min(d.edges_at(i, z).len());
            }
            if !bounded {
                continue;
            }
            let sum: ExactValue = per_leaf.iter().map(|p| &p.1).sum();
            let bar = nice_threshold(n, eps, z);
            if sum < bar {
                continue;
            }
            passing += 1;
            let covered = cover >= min_cover;
            let ratio = &sum / z;
            let better = match &best {
                None => true,
                Some((bc, br, bs)) => {
                    (covered, &ratio, z, core::cmp::Reverse(i))
                        > (*bc, br, &bs.z, core::cmp::Reverse(bs.root))
                }
            };
            if better {
                let sel = Selection {
                    root: i,
                    z: z.clone(),
                    per_leaf,
                    sum,
                    bar,
                    cover,
                    counting_total: ExactValue::zero(),
                    counting_bound: ExactValue::zero(),
                    passing: 0,
                };
                best = Some((covered, ratio, sel));
            }
        }
    }
    let bound = counting_bound(n, eps);
    match best {
        Some((_, _, mut sel)) => {
            sel.counting_total = counting_total;
            sel.counting_bound = bound;
            sel.passing = passing;
            Ok(sel)
        }
        None => Err(Error::NoNiceStar(format!(
            "no root and grid value reach (1 - 3 eps)(n - 1) z; counting total {counting_total}, bound {bound}"
        ))),
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NiceMultiStar {
    pub multi_star: MultiStar,
    pub z: ExactValue,
    /// Nice-star certificates of the sampled stars.
    pub certificates: Vec<NiceReport>,
}

/// Collects, per leaf, the edges of the selected entry that are 0 at the
/// root and sit at grid value `z`, then certifies `q` sampled stars.
pub fn find_nice_multi_star<O: AllocationOracle + ?Sized>(
    oracle: &O,
    clique: &Instance,
    dipoles: &[PairDipoles],
    selection: &Selection,
    config: &AdversaryConfig,
) -> Result<NiceMultiStar> {
    let root = selection.root;
    let z = &selection.z;
    let mut groups: Vec<(usize, Vec<TaskId>)> = Vec::new();
    for j in (0..config.n).filter(|&j| j != root) {
        let pair = (root.min(j), root.max(j));
        let d = dipoles
            .iter()
            .find(|p| p.pair == pair)
            .and_then(|p| p.dipoles.first())
            .ok_or_else(|| {
                Error::PreconditionViolated(format!("no tables for machine pair {pair:?}"))
            })?;
        let edges = d.edges_at(root, z);
        if edges.len() < config.q {
            return Err(Error::InsufficientMultiplicity {
                leaf: j,
                found: edges.len(),
                needed: config.q,
            });
        }
        groups.push((j, edges));
    }
    let all: Vec<TaskId> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
    let multi_star = MultiStar::new(clique, root, &all)?;
    let mut rng = par::stream_rng(config.seed, STREAM_NICE);
    let stars: Vec<Vec<TaskId>> = (0..config.q)
        .map(|_| {
            groups
                .iter()
                .map(|g| g.1[rng.gen_range(0..g.1.len())])
                .collect()
        })
        .collect();
    let certificates = par::try_map_indices(stars.len(), |k| -> Result<NiceReport> {
        let star = Star::new(clique, root, stars[k].clone())?;
        let rep = is_nice_star(oracle, clique, &star, &config.eps, z)?;
        if !rep.passed {
            return Err(Error::CertificateMismatch(format!(
                "star {:?} at root {root} has threshold sum {} below {}",
                stars[k], rep.sum, rep.threshold
            )));
        }
        Ok(rep)
    })?;
    Ok(NiceMultiStar {
        multi_star,
        z: z.clone(),
        certificates,
    })
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxSearch {
    pub report: BoxReport,
    /// Box tests spent, including the successful one.
    pub tested: u64,
}

/// Searches the spanning stars of a multi-star for a `delta`-box.
///
/// Tries the first edge of every leaf, then every single sibling swap, then
/// the remaining stars in lexicographic order, for at most `budget` tests.
/// Thresholds are computed once per edge since they share one context.
pub fn find_box_star<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    multi_star: &MultiStar,
    delta: &ExactValue,
    budget: u64,
    tolerance: &ExactValue,
) -> Result<BoxSearch> {
    let groups = &multi_star.groups;
    if groups.iter().any(|g| g.1.is_empty()) || groups.is_empty() {
        return Err(Error::PreconditionViolated(
            "multi-star has an empty leaf".into(),
        ));
    }
    let all = multi_star.edges();
    let full = Star {
        root: multi_star.root,
        edges: all.clone(),
        leaves: vec![0; all.len()],
    };
    // the probe only needs root and edge ids
    let th = star_thresholds(oracle, instance, &full, tolerance)?;
    let th_of: BTreeMap<TaskId, Interval> = all.iter().copied().zip(th).collect();

    let radix: Vec<usize> = groups.iter().map(|g| g.1.len()).collect();
    let mut order: Vec<Vec<usize>> = vec![vec![0; radix.len()]];
    for (k, &r) in radix.iter().enumerate() {
        for alt in 1..r {
            let mut c = vec![0; radix.len()];
            c[k] = alt;
            order.push(c);
        }
    }
    let mut tested = 0u64;
    let try_choice = |choice: &[usize], tested: &mut u64| -> Result<Option<BoxReport>> {
        if *tested >= budget {
            return Err(Error::BoxNotFound { budget });
        }
        *tested += 1;
        let edges: Vec<TaskId> = groups.iter().zip(choice).map(|(g, &c)| g.1[c]).collect();
        let star = Star::new(instance, multi_star.root, edges.clone())?;
        let ths: Vec<Interval> = edges.iter().map(|e| th_of[e].clone()).collect();
        let rep = is_box_with(oracle, instance, &star, delta, &ths)?;
        Ok(if rep.is_box() { Some(rep) } else { None })
    };
    for c in &order {
        if let Some(report) = try_choice(c, &mut tested)? {
            return Ok(BoxSearch { report, tested });
        }
    }
    let mut c = vec![0usize; radix.len()];
    loop {
        let nonzero = c.iter().filter(|&&x| x != 0).count();
        if nonzero >= 2 {
            if let Some(report) = try_choice(&c, &mut tested)? {
                return Ok(BoxSearch { report, tested });
            }
        }
        // next in mixed radix, last leaf fastest
        let mut k = radix.len();
        loop {
            if k == 0 {
                return Err(Error::BoxNotFound { budget });
            }
            k -= 1;
            c[k] += 1;
            if c[k] < radix[k] {
                break;
            }
            c[k] = 0;
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WitnessReport {
    pub instance: Instance,
    pub allocation: Allocation,
    pub makespan: ExactValue,
    pub opt: ExactValue,
    pub opt_allocation: Allocation,
    /// `makespan / opt`.
    pub ratio: ExactValue,
    /// Decimal rendering of `ratio`, for reading only.
    pub ratio_approx: f64,
    /// `z + (1 - 3 eps)(n - 1) z - 2(n - 1) delta`.
    pub floor: ExactValue,
    pub eps: ExactValue,
    pub delta: ExactValue,
    pub z: ExactValue,
    pub root: usize,
    pub star: Star,
    pub loop_task: TaskId,
}

impl WitnessReport {
    /// Recomputes makespan, optimum and ratio from the emitted instance and
    /// allocation.
    pub fn verify(&self) -> Result<()> {
        self.allocation.validate(&self.instance)?;
        let ms = makespan(&self.instance, &self.allocation)?;
        let (opt, _) = opt_makespan(&self.instance)?;
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::CertificateMismatch(format!(
                    "{what} does not match the instance"
                )))
            }
        };
        check(ms == self.makespan, "makespan")?;
        check(opt == self.opt, "optimum")?;
        check(
            makespan(&self.instance, &self.opt_allocation)? == opt,
            "optimal allocation",
        )?;
        check(opt.is_positive() && &ms / &opt == self.ratio, "ratio")
    }

    /// Also re-queries the oracle on the emitted instance.
    pub fn verify_with<O: AllocationOracle + ?Sized>(&self, oracle: &O) -> Result<()> {
        self.verify()?;
        if oracle.allocate(&self.instance)? != self.allocation {
            return Err(Error::CertificateMismatch(
                "oracle allocation differs".into(),
            ));
        }
        Ok(())
    }
}

/// `z + (1 - 3 eps)(n - 1) z - 2(n - 1) delta`.
pub fn witness_floor(n: usize, eps: &ExactValue, z: &ExactValue, delta: &ExactValue) -> ExactValue {
    z + &nice_threshold(n, eps, z) - ExactValue::from_int(2 * (n as i64 - 1)) * delta
}

/// Lowers every box edge to `psi - 2 delta` at the root, raises the root's
/// loop to `z`, and certifies the resulting ratio.
pub fn build_witness<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    box_report: &BoxReport,
    z: &ExactValue,
    eps: &ExactValue,
    tolerance: &ExactValue,
) -> Result<WitnessReport> {
    let star = &box_report.star;
    let root = star.root;
    let delta = &box_report.delta;
    let n = instance.machines();
    let loop_task = *instance
        .loops_at(root)
        .first()
        .ok_or_else(|| Error::PreconditionViolated(format!("machine {root} has no loop")))?;
    let mut inst = instance.clone();
    for (id, v) in &box_report.point {
        let t = v - delta;
        if t.is_negative() {
            return Err(Error::NegativeValue {
                task: *id,
                value: t,
            });
        }
        inst.set_value(*id, root, t)?;
    }
    inst.set_value(loop_task, root, z.clone())?;
    let allocation = oracle.allocate(&inst)?;
    allocation.validate(&inst)?;
    let ms = makespan(&inst, &allocation)?;
    let (opt, opt_allocation) = opt_makespan(&inst)?;
    let floor = witness_floor(n, eps, z, delta);
    let slack = tolerance * &ExactValue::from_int(n as i64);
    let opt_cap = z * &(ExactValue::one() + eps);
    if ms < &floor - &slack || opt > opt_cap || !opt.is_positive() {
        return Err(Error::AssertionFailed(format!(
            "witness bound broken: makespan {ms}, floor {floor}, optimum {opt}, cap {opt_cap}; instance:\n{inst}"
        )));
    }
    let ratio = &ms / &opt;
    Ok(WitnessReport {
        ratio_approx: ratio.to_f64(),
        instance: inst,
        allocation,
        makespan: ms,
        opt,
        opt_allocation,
        ratio,
        floor,
        eps: eps.clone(),
        delta: delta.clone(),
        z: z.clone(),
        root,
        star: star.clone(),
        loop_task,
    })
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageRecord {
    pub stage: String,
    pub detail: String,
}

/// Stage log plus the outcome of a full pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub stages: Vec<StageRecord>,
    pub outcome: Result<WitnessReport>,
}

/// Runs every stage in order, logging each one.
pub fn run_pipeline<O: AllocationOracle + ?Sized>(
    oracle: &O,
    config: &AdversaryConfig,
) -> PipelineRun {
    let mut stages = Vec::new();
    let outcome = pipeline(oracle, config, &mut stages);
    if let Err(e) = &outcome {
        stages.push(StageRecord {
            stage: "failed".into(),
            detail: format!("{e}"),
        });
    }
    PipelineRun { stages, outcome }
}

fn pipeline<O: AllocationOracle + ?Sized>(
    oracle: &O,
    config: &AdversaryConfig,
    log: &mut Vec<StageRecord>,
) -> Result<WitnessReport> {
    let mut note = |stage: &str, detail: String| {
        log.push(StageRecord {
            stage: stage.into(),
            detail,
        })
    };
    config.validate()?;
    let mut clique = sample_multi_clique(config)?;
    note(
        "sample",
        format!("{} machines, {} tasks", clique.machines(), clique.len()),
    );
    let resampled = resample_discontinuities(oracle, &mut clique, config)?;
    note("resample", format!("{} edges resampled", resampled.len()));
    let dipoles = find_dipoles(oracle, &clique, &config.eps, &config.tolerance)?;
    let full: usize = dipoles.iter().map(|p| p.full_count()).sum();
    let groups: usize = dipoles.iter().map(|p| p.groups).sum();
    note(
        "dipoles",
        format!("{full} full-range dipoles over {groups} table groups"),
    );
    let sel = select_root_and_z(&dipoles, &config.eps, config.n, config.q)?;
    note(
        "select",
        format!(
            "root {} z {} sum {} bar {} cover {}; counting total {} >= {}",
            sel.root, sel.z, sel.sum, sel.bar, sel.cover, sel.counting_total, sel.counting_bound
        ),
    );
    let nice = find_nice_multi_star(oracle, &clique, &dipoles, &sel, config)?;
    note(
        "nice",
        format!(
            "multiplicity {}, {} certified stars",
            nice.multi_star.multiplicity(),
            nice.certificates.len()
        ),
    );
    let found = find_box_star(
        oracle,
        &clique,
        &nice.multi_star,
        &config.delta(),
        config.box_budget,
        &config.tolerance,
    )?;
    note(
        "box",
        format!(
            "edges {:?} after {} tests",
            found.report.star.edges, found.tested
        ),
    );
    let w = build_witness(
        oracle,
        &clique,
        &found.report,
        &nice.z,
        &config.eps,
        &config.tolerance,
    )?;
    note(
        "witness",
        format!("makespan {} opt {} ratio {}", w.makespan, w.opt, w.ratio),
    );
    Ok(w)
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CliqueBound {
    /// `(n / eps)^(4 / eps)`.
    pub k: ExactValue,
    /// `(2 / eps)! (eps / 2)^(2 / eps)`.
    pub p: ExactValue,
    /// `6 K q / (p eps)`.
    pub q_prime: ExactValue,
}

/// Table-pair count, dipole probability and sufficient multiplicity for a
/// clique of dipoles.
pub fn dipole_clique_bound(q: u64, n: usize, eps: &ExactValue) -> Result<CliqueBound> {
    let inv = grid_size(eps)?;
    let exp =
        |m: u64| i32::try_from(m * inv).map_err(|_| Error::InvalidConfig("eps too small".into()));
    let k = (ExactValue::from_int(n as i64) / eps).pow(exp(4)?);
    let two_inv = 2 * inv;
    let mut fact = BigInt::one();
    for i in 2..=two_inv {
        fact *= BigInt::from(i);
    }
    let p = ExactValue::from_bigint(fact) * (eps / &ExactValue::from_int(2)).pow(exp(2)?);
    let q_prime = ExactValue::from_int(6) * &k * ExactValue::from_int(q as i64) / (&p * eps);
    Ok(CliqueBound { k, p, q_prime })
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecurrenceBound {
    /// `2 / sqrt(ell)`.
    pub b2: ExactValue,
    /// `(5n/nu)^(k-2) 2 n^3 / (xi sqrt(ell))`.
    pub bk: ExactValue,
    /// `(5n/nu)^(2n)`.
    pub min_multiplicity: ExactValue,
    /// `sqrt(ell)` was exact; otherwise its floor was used, which only
    /// raises the bounds.
    pub sqrt_exact: bool,
}

fn sqrt_down(ell: u64) -> Result<(ExactValue, bool)> {
    if ell == 0 {
        return Err(Error::PreconditionViolated("ell must be positive".into()));
    }
    let (r, exact) = ExactValue::from_int(ell as i64)
        .isqrt()
        .expect("nonnegative");
    Ok((ExactValue::from_bigint(r), exact))
}

/// One step `(5n/nu - 1) b + 2 n^3 / (xi sqrt(ell))`.
pub fn recurrence_step(
    b: &ExactValue,
    n: usize,
    nu: &ExactValue,
    xi: &ExactValue,
    ell: u64,
) -> Result<ExactValue> {
    let (root, _) = sqrt_down(ell)?;
    let nn = ExactValue::from_int(n as i64);
    let ratio = &nn * &ExactValue::from_int(5) / nu.clone();
    Ok((ratio - ExactValue::one()) * b + ExactValue::from_int(2) * nn.pow(3) / (xi * &root))
}

/// Closed-form bounds on the non-box probability and the multiplicity that
/// makes them small.
pub fn recurrence_bound(
    n: usize,
    nu: &ExactValue,
    xi: &ExactValue,
    ell: u64,
    k: usize,
) -> Result<RecurrenceBound> {
    if k < 2 {
        return Err(Error::PreconditionViolated(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if !nu.is_positive() || !xi.is_positive() {
        return Err(Error::PreconditionViolated(
            "nu and xi must be positive".into(),
        ));
    }
    let (root, sqrt_exact) = sqrt_down(ell)?;
    let nn = ExactValue::from_int(n as i64);
    let ratio = &nn * &ExactValue::from_int(5) / nu.clone();
    let b2 = ExactValue::from_int(2) / root.clone();
    let bk = ratio.pow(k as i32 - 2) * ExactValue::from_int(2) * nn.pow(3) / (xi * &root);
    let min_multiplicity = ratio.pow(2 * n as i32);
    Ok(RecurrenceBound {
        b2,
        bk,
        min_multiplicity,
        sqrt_exact,
    })
}

/// Root 0 with `per_leaf` edges to each of `leaves` leaves; every root value
/// is 0 and every leaf value lies in `(xi, 1)`.
pub fn sample_standard_instance(
    leaves: usize,
    per_leaf: usize,
    xi: &ExactValue,
    seed: u64,
) -> Result<Instance> {
    if !(xi.is_positive() && xi < &ExactValue::one()) {
        return Err(Error::InvalidConfig(format!(
            "xi must lie in (0, 1), got {xi}"
        )));
    }
    let mut rng = par::stream_rng(seed, STREAM_CLIQUE);
    let span = ExactValue::one() - xi.clone();
    let mut tasks = Vec::with_capacity(leaves * per_leaf);
    for leaf in 1..=leaves {
        for _ in 0..per_leaf {
            let s = xi + &(&span * &unit_draw(&mut rng));
            tasks.push(Task::new(
                tasks.len() as TaskId,
                0,
                leaf,
                ExactValue::zero(),
                s,
            ));
        }
    }
    Instance::new(leaves + 1, tasks)
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BkEstimate {
    pub k: usize,
    pub samples: usize,
    pub non_boxes: usize,
    pub delta: ExactValue,
    /// `non_boxes / samples`.
    pub frequency: ExactValue,
    pub with_replacement: bool,
}

/// Fraction of sampled spanning stars of `multi_star` that fail the
/// `4^k nu` box test.
pub fn estimate_bk<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    multi_star: &MultiStar,
    sample_count: usize,
    nu: &ExactValue,
    seed: u64,
) -> Result<BkEstimate> {
    if sample_count == 0 {
        return Err(Error::PreconditionViolated(
            "sample count must be positive".into(),
        ));
    }
    let k = multi_star.groups.len();
    if k == 0 || k + 1 > instance.machines() || multi_star.multiplicity() == 0 {
        return Err(Error::PreconditionViolated(format!(
            "need 1..=n-1 nonempty leaves, got {k}"
        )));
    }
    let delta = box_delta(k, nu);
    let all = multi_star.edges();
    let full = Star {
        root: multi_star.root,
        edges: all.clone(),
        leaves: vec![0; all.len()],
    };
    let th = star_thresholds(
        oracle,
        instance,
        &full,
        &crate::boundary::default_tolerance(),
    )?;
    let th_of: BTreeMap<TaskId, Interval> = all.iter().copied().zip(th).collect();

    let radix: Vec<usize> = multi_star.groups.iter().map(|g| g.1.len()).collect();
    let total: Option<usize> = radix.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
    let mut rng = par::stream_rng(seed, STREAM_NICE);
    let with_replacement = total.is_none_or(|t| sample_count > t);
    let indices: Vec<Vec<usize>> = if with_replacement {
        (0..sample_count)
            .map(|_| radix.iter().map(|&r| rng.gen_range(0..r)).collect())
            .collect()
    } else {
        let total = total.expect("fits");
        rand::seq::index::sample(&mut rng, total, sample_count)
            .into_iter()
            .map(|mut x| {
                let mut c = vec![0; radix.len()];
                for (slot, &r) in c.iter_mut().zip(&radix).rev() {
                    *slot = x % r;
                    x /= r;
                }
                c
            })
            .collect()
    };
    let verdicts = par::try_map_indices(indices.len(), |s| -> Result<bool> {
        let edges: Vec<TaskId> = multi_star
            .groups
            .iter()
            .zip(&indices[s])
            .map(|(g, &c)| g.1[c])
            .collect();
        let star = Star::new(instance, multi_star.root, edges.clone())?;
        let ths: Vec<Interval> = edges.iter().map(|e| th_of[e].clone()).collect();
        Ok(!is_box_with(oracle, instance, &star, &delta, &ths)?.is_box())
    })?;
    let non_boxes = verdicts.iter().filter(|&&b| b).count();
    Ok(BkEstimate {
        k,
        samples: indices.len(),
        non_boxes,
        delta,
        frequency: ExactValue::ratio(non_boxes as i64, indices.len() as i64),
        with_replacement,
    })
}

/// Bipartite graph of non-box two-edge stars `{x, y}` with `delta = 16 nu`.
pub fn non_box_graph<O: AllocationOracle + ?Sized>(
    oracle: &O,
    instance: &Instance,
    root: usize,
    left: &[TaskId],
    right: &[TaskId],
    nu: &ExactValue,
) -> Result<Vec<Vec<bool>>> {
    let delta = box_delta(2, nu);
    let mut all = left.to_vec();
    all.extend_from_slice(right);
    let full = Star {
        root,
        edges: all.clone(),
        leaves: vec![0; all.len()],
    };
    let th = star_thresholds(
        oracle,
        instance,
        &full,
        &crate::boundary::default_tolerance(),
    )?;
    let th_of: BTreeMap<TaskId, Interval> = all.iter().copied().zip(th).collect();
    par::try_map_indices(left.len(), |a| {
        right
            .iter()
            .map(|&y| {
                let x = left[a];
                let star = Star::new(instance, root, vec![x, y])?;
                let rep = is_box_with(
                    oracle,
                    instance,
                    &star,
                    &delta,
                    &[th_of[&x].clone(), th_of[&y].clone()],
                )?;
                Ok(!rep.is_box())
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::find_c4;
    use crate::instance::opt_makespan;
    use crate::mechanism::{
        AffineMinimizer, ConstantAllocation, ConstantRule, MechanismSpec, PairConstant, PairKind,
    };

    fn r(p: i64, q: i64) -> ExactValue {
        ExactValue::ratio(p, q)
    }

    fn small(n: usize, ell: usize, eps: ExactValue, seed: u64) -> AdversaryConfig {
        AdversaryConfig {
            ell,
            eps,
            seed,
            ..AdversaryConfig::desk(n)
        }
    }

    #[test]
    fn config_validation() {
        assert!(AdversaryConfig::desk(3).validate().is_ok());
        assert!(AdversaryConfig::desk(4).validate().is_ok());
        assert!(AdversaryConfig {
            n: 1,
            ..AdversaryConfig::desk(3)
        }
        .validate()
        .is_err());
        assert!(AdversaryConfig {
            eps: r(2, 5),
            ..AdversaryConfig::desk(3)
        }
        .validate()
        .is_err());
        assert!(AdversaryConfig {
            eps: r(1, 3),
            ..AdversaryConfig::desk(3)
        }
        .validate()
        .is_ok());
        // 2^-12 is at the cap for n = 4 whatever xi < 1 is
        let c = AdversaryConfig {
            nu: ExactValue::pow2_neg(12),
            ..AdversaryConfig::desk(4)
        };
        assert!(c.validate().is_err());
        assert_eq!(
            AdversaryConfig::desk(3).nu_prime(),
            ExactValue::pow2_neg(14)
        );
    }

    #[test]
    fn clique_shape() {
        let c = small(2, 1, r(1, 2), 5);
        let inst = sample_multi_clique(&c).unwrap();
        assert_eq!(inst.len(), 3);
        let e = inst.task(0).unwrap();
        let (vi, vj) = (e.va.clone(), e.vb.clone());
        let u = if vi.is_zero() {
            vj
        } else {
            assert!(vj.is_zero());
            vi
        };
        let z = u.floor_to(&r(1, 2));
        assert!(z == r(1, 2) || z == r(1, 1));
        assert!(u > z && u < &z * &r(3, 2));
        let c = small(3, 5, r(1, 4), 9);
        let inst = sample_multi_clique(&c).unwrap();
        assert_eq!(inst.len(), 3 * 5 + 3);
        assert!(opt_makespan(&inst).unwrap().0.is_zero());
        assert_eq!(inst, sample_multi_clique(&c).unwrap());
        assert_ne!(
            inst,
            sample_multi_clique(&small(3, 5, r(1, 4), 10)).unwrap()
        );
    }

    #[test]
    fn clique_bound_values() {
        let b = dipole_clique_bound(1, 2, &r(1, 2)).unwrap();
        assert_eq!(b.k, ExactValue::from_int(65536));
        assert_eq!(b.p, r(3, 32));
        assert_eq!(b.q_prime, ExactValue::from_int(8388608));
    }

    #[test]
    fn recurrence_values() {
        let b = recurrence_bound(3, &r(1, 100), &r(1, 2), 10000, 2).unwrap();
        assert_eq!(b.b2, r(1, 50));
        assert!(b.sqrt_exact);
        assert_eq!(b.min_multiplicity, ExactValue::from_int(1500).pow(6));
        assert_eq!(
            b.bk,
            ExactValue::from_int(2 * 27) / (r(1, 2) * ExactValue::from_int(100))
        );
        assert!(recurrence_bound(3, &r(1, 100), &r(1, 2), 10000, 1).is_err());
        assert!(
            !recurrence_bound(3, &r(1, 100), &r(1, 2), 10, 2)
                .unwrap()
                .sqrt_exact
        );
    }

    #[test]
    fn dipoles_for_vcg() {
        let c = small(3, 16, r(1, 4), 3);
        let inst = sample_multi_clique(&c).unwrap();
        let d = find_dipoles(&MechanismSpec::Vcg, &inst, &c.eps, &c.tolerance).unwrap();
        assert_eq!(d.len(), 3);
        for p in &d {
            assert_eq!(p.groups, 1);
            for dip in p.dipoles.iter().filter(|d| d.full) {
                assert_eq!(dip.edges.len(), 8);
            }
            let z = r(1, 2);
            assert_eq!(p.dipoles[0].table_ij.lookup(&z), Some(&z));
        }
        let sel = select_root_and_z(&d, &c.eps, 3, 1).unwrap();
        assert!(sel.sum >= sel.bar);
        assert_eq!(sel.counting_total, ExactValue::from_int(15));
        assert_eq!(sel.counting_bound, ExactValue::from_int(6));
    }

    #[test]
    fn too_few_edges_no_full_dipole() {
        let c = small(2, 3, r(1, 4), 3);
        let inst = sample_multi_clique(&c).unwrap();
        let d = find_dipoles(&MechanismSpec::Vcg, &inst, &c.eps, &c.tolerance).unwrap();
        assert_eq!(d[0].full_count(), 0);
        assert_eq!(d[0].dipoles.len(), 1);
        assert!(!d[0].dipoles[0].full);
    }

    #[test]
    fn constant_oracle_has_no_nice_star() {
        let c = small(3, 8, r(1, 4), 1);
        let never = MechanismSpec::Constant(ConstantAllocation {
            assignment: vec![],
            fallback: ConstantRule::HigherIndex,
        });
        let run = run_pipeline(&never, &c);
        assert!(
            matches!(run.outcome, Err(Error::NoNiceStar(_))),
            "{:?}",
            run.outcome
        );
        assert_eq!(run.stages.last().unwrap().stage, "failed");
    }

    #[test]
    fn vcg_pipeline_small() {
        let c = AdversaryConfig {
            n: 3,
            eps: r(1, 4),
            ell: 24,
            ..AdversaryConfig::desk(3)
        };
        let run = run_pipeline(&MechanismSpec::Vcg, &c);
        let w = run.outcome.unwrap();
        w.verify().unwrap();
        w.verify_with(&MechanismSpec::Vcg).unwrap();
        assert!(w.makespan >= w.floor.clone() - &c.tolerance * &ExactValue::from_int(3));
        assert!(w.ratio > r(2, 1));
        let mut bad = w.clone();
        bad.ratio += ExactValue::one();
        assert!(bad.verify().is_err());
    }

    fn gadget_multi_star() -> (Instance, MultiStar, MechanismSpec) {
        let inst = sample_standard_instance(2, 2, &r(1, 2), 4).unwrap();
        let ms = MultiStar::new(&inst, 0, &[0, 1, 2, 3]).unwrap();
        // tasks 0, 1 at leaf 1; 2, 3 at leaf 2; only {0, 2} is bundled
        let g = MechanismSpec::AffineMinimizer(AffineMinimizer {
            multipliers: vec![ExactValue::one(); 3],
            pair_constants: vec![PairConstant {
                tasks: (0, 2),
                machine: 0,
                kind: PairKind::Split,
                value: r(1, 8),
            }],
            ..Default::default()
        });
        (inst, ms, g)
    }

    #[test]
    fn box_search_swaps() {
        let (inst, ms, g) = gadget_multi_star();
        let delta = box_delta(2, &ExactValue::pow2_neg(10));
        let tol = crate::boundary::default_tolerance();
        let found = find_box_star(&g, &inst, &ms, &delta, 16, &tol).unwrap();
        assert_eq!(found.tested, 2);
        assert!(found.report.is_box());
        assert!(matches!(
            find_box_star(&g, &inst, &ms, &delta, 0, &tol),
            Err(Error::BoxNotFound { budget: 0 })
        ));
        let found = find_box_star(&MechanismSpec::Vcg, &inst, &ms, &delta, 16, &tol).unwrap();
        assert_eq!(found.tested, 1);
    }

    #[test]
    fn bk_estimates() {
        let inst = sample_standard_instance(2, 3, &r(1, 2), 8).unwrap();
        let ms = MultiStar::new(&inst, 0, &(0..6).collect::<Vec<_>>()).unwrap();
        let nu = ExactValue::pow2_neg(10);
        let e = estimate_bk(&MechanismSpec::Vcg, &inst, &ms, 5, &nu, 1).unwrap();
        assert_eq!(e.non_boxes, 0);
        assert!(!e.with_replacement);
        let e = estimate_bk(&MechanismSpec::Vcg, &inst, &ms, 20, &nu, 1).unwrap();
        assert!(e.with_replacement);
        assert!(estimate_bk(&MechanismSpec::Vcg, &inst, &ms, 0, &nu, 1).is_err());
        let mut pairs = Vec::new();
        for x in 0..3 {
            for y in 3..6 {
                pairs.push(PairConstant {
                    tasks: (x, y),
                    machine: 0,
                    kind: PairKind::Split,
                    value: r(1, 8),
                });
            }
        }
        let g = MechanismSpec::AffineMinimizer(AffineMinimizer {
            multipliers: vec![ExactValue::one(); 3],
            pair_constants: pairs,
            ..Default::default()
        });
        let e = estimate_bk(&g, &inst, &ms, 9, &nu, 1).unwrap();
        assert_eq!(e.frequency, ExactValue::one());
    }

    #[test]
    fn base_graph_vcg_is_empty() {
        let inst = sample_standard_instance(2, 4, &r(1, 2), 2).unwrap();
        let g = non_box_graph(
            &MechanismSpec::Vcg,
            &inst,
            0,
            &[0, 1, 2, 3],
            &[4, 5, 6, 7],
            &ExactValue::pow2_neg(10),
        )
        .unwrap();
        assert!(g.iter().flatten().all(|&b| !b));
        assert_eq!(find_c4(&g), None);
    }
}

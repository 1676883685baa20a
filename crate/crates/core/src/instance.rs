//! Multi-graph scheduling instances, allocations and makespan.
//!
//! A task is an edge between two machines (or a loop on one). Every machine
//! outside a task's endpoints is excluded outright, so OPT stays exact.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::value::ExactValue;

pub type TaskId = u64;

/// Default cap on the number of assignments `opt_makespan` may enumerate.
pub const DEFAULT_OPT_CAP: u128 = 1 << 26;

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Task {
    pub id: TaskId,
    pub a: usize,
    pub b: usize,
    pub va: ExactValue,
    pub vb: ExactValue,
}

impl Task {
    pub fn new(id: TaskId, a: usize, b: usize, va: ExactValue, vb: ExactValue) -> Self {
        Task { id, a, b, va, vb }
    }

    pub fn looped(id: TaskId, machine: usize, v: ExactValue) -> Self {
        Task {
            id,
            a: machine,
            b: machine,
            va: v.clone(),
            vb: v,
        }
    }

    pub fn is_loop(&self) -> bool {
        self.a == self.b
    }

    pub fn supports(&self, machine: usize) -> bool {
        self.a == machine || self.b == machine
    }

    /// Support machines in ascending order, without duplicates.
    pub fn support(&self) -> ([usize; 2], usize) {
        if self.a == self.b {
            ([self.a, self.a], 1)
        } else if self.a < self.b {
            ([self.a, self.b], 2)
        } else {
            ([self.b, self.a], 2)
        }
    }

    pub fn value(&self, machine: usize) -> Option<&ExactValue> {
        if machine == self.a {
            Some(&self.va)
        } else if machine == self.b {
            Some(&self.vb)
        } else {
            None
        }
    }

    /// The other endpoint, if `machine` is an endpoint of a non-loop.
    pub fn other(&self, machine: usize) -> Option<usize> {
        if self.is_loop() {
            None
        } else if machine == self.a {
            Some(self.b)
        } else if machine == self.b {
            Some(self.a)
        } else {
            None
        }
    }

    fn set(&mut self, machine: usize, v: ExactValue) -> bool {
        if self.is_loop() && machine == self.a {
            self.va = v.clone();
            self.vb = v;
            true
        } else if machine == self.a {
            self.va = v;
            true
        } else if machine == self.b {
            self.vb = v;
            true
        } else {
            false
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawInstance"))]
pub struct Instance {
    n: usize,
    tasks: Vec<Task>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawInstance {
    n: usize,
    tasks: Vec<Task>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawInstance> for Instance {
    type Error = Error;
    fn try_from(raw: RawInstance) -> Result<Self> {
        Instance::new(raw.n, raw.tasks)
    }
}

impl Instance {
    /// Validates and sorts tasks by id.
    pub fn new(n: usize, mut tasks: Vec<Task>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance(
                "machine count must be positive".into(),
            ));
        }
        tasks.sort_by_key(|t| t.id);
        for w in tasks.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidInstance(format!(
                    "duplicate task id {}",
                    w[0].id
                )));
            }
        }
        for t in &tasks {
            if t.a >= n || t.b >= n {
                return Err(Error::InvalidInstance(format!(
                    "task {} has endpoint outside 0..{}",
                    t.id, n
                )));
            }
            if t.va.is_negative() || t.vb.is_negative() {
                return Err(Error::InvalidInstance(format!(
                    "task {} has a negative value",
                    t.id
                )));
            }
            if t.is_loop() && t.va != t.vb {
                return Err(Error::InvalidInstance(format!(
                    "loop task {} has two different values",
                    t.id
                )));
            }
        }
        Ok(Instance { n, tasks })
    }

    pub fn machines(&self) -> usize {
        self.n
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn index_of(&self, id: TaskId) -> Option<usize> {
        self.tasks.binary_search_by_key(&id, |t| t.id).ok()
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.index_of(id).map(|i| &self.tasks[i])
    }

    pub(crate) fn task_or_err(&self, id: TaskId) -> Result<&Task> {
        self.task(id)
            .ok_or_else(|| Error::InvalidInstance(format!("unknown task {id}")))
    }

    pub fn value(&self, id: TaskId, machine: usize) -> Option<&ExactValue> {
        self.task(id).and_then(|t| t.value(machine))
    }

    /// Overwrite one endpoint value (both for a loop).
    pub fn set_value(&mut self, id: TaskId, machine: usize, v: ExactValue) -> Result<()> {
        if v.is_negative() {
            return Err(Error::InvalidInstance(format!(
                "negative value for task {id}"
            )));
        }
        let i = self
            .index_of(id)
            .ok_or_else(|| Error::InvalidInstance(format!("unknown task {id}")))?;
        if self.tasks[i].set(machine, v) {
            Ok(())
        } else {
            Err(Error::InvalidInstance(format!(
                "machine {machine} is not an endpoint of task {id}"
            )))
        }
    }

    /// Adds a task, keeping id order.
    pub fn push(&mut self, task: Task) -> Result<()> {
        let mut tasks = core::mem::take(&mut self.tasks);
        tasks.push(task);
        match Instance::new(self.n, tasks) {
            Ok(inst) => {
                *self = inst;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// Values of `machine` across all tasks, `None` where it is off-support.
    pub fn row(&self, machine: usize) -> Vec<Option<ExactValue>> {
        self.tasks
            .iter()
            .map(|t| t.value(machine).cloned())
            .collect()
    }

    /// Tasks whose support is exactly `{i, j}` (`i != j`).
    pub fn edges_between(&self, i: usize, j: usize) -> Vec<TaskId> {
        self.tasks
            .iter()
            .filter(|t| !t.is_loop() && ((t.a == i && t.b == j) || (t.a == j && t.b == i)))
            .map(|t| t.id)
            .collect()
    }

    /// Loop tasks on `machine`.
    pub fn loops_at(&self, machine: usize) -> Vec<TaskId> {
        self.tasks
            .iter()
            .filter(|t| t.is_loop() && t.a == machine)
            .map(|t| t.id)
            .collect()
    }

    pub fn max_id(&self) -> Option<TaskId> {
        self.tasks.last().map(|t| t.id)
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        for t in &self.tasks {
            writeln!(
                f,
                "  task {}: m{} = {}, m{} = {}",
                t.id, t.a, t.va, t.b, t.vb
            )?;
        }
        Ok(())
    }
}

/// Task id to machine, aligned with the instance's task order.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Allocation {
    entries: Vec<(TaskId, usize)>,
}

impl Allocation {
    pub fn from_machines(instance: &Instance, machines: Vec<usize>) -> Self {
        debug_assert_eq!(machines.len(), instance.len());
        Allocation {
            entries: instance.tasks.iter().map(|t| t.id).zip(machines).collect(),
        }
    }

    pub fn from_pairs(mut pairs: Vec<(TaskId, usize)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        Allocation { entries: pairs }
    }

    pub fn entries(&self) -> &[(TaskId, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Machine of the `idx`-th task in instance order.
    pub fn machine_at(&self, idx: usize) -> usize {
        self.entries[idx].1
    }

    pub fn machine_of(&self, id: TaskId) -> Option<usize> {
        self.entries
            .binary_search_by_key(&id, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Ids of the tasks given to `machine`.
    pub fn tasks_of(&self, machine: usize) -> Vec<TaskId> {
        self.entries
            .iter()
            .filter(|e| e.1 == machine)
            .map(|e| e.0)
            .collect()
    }

    /// Checks totality and support against `instance`.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.entries.len() != instance.len() {
            return Err(Error::InvalidAllocation(format!(
                "{} assignments for {} tasks",
                self.entries.len(),
                instance.len()
            )));
        }
        for (t, &(id, m)) in instance.tasks.iter().zip(&self.entries) {
            if t.id != id {
                return Err(Error::InvalidAllocation(format!(
                    "assignment for task {id} where task {} was expected",
                    t.id
                )));
            }
            if !t.supports(m) {
                return Err(Error::InvalidAllocation(format!(
                    "task {id} assigned to machine {m} outside its support"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Allocation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.entries.len()))?;
        for (id, m) in &self.entries {
            map.serialize_entry(id, m)?;
        }
        map.end()
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Allocation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let map = BTreeMap::<TaskId, usize>::deserialize(d)?;
        Ok(Allocation {
            entries: map.into_iter().collect(),
        })
    }
}

/// Per-machine loads of `alloc`.
pub fn loads(instance: &Instance, alloc: &Allocation) -> Result<Vec<ExactValue>> {
    alloc.validate(instance)?;
    let mut load = vec![ExactValue::zero(); instance.n];
    for (t, &(_, m)) in instance.tasks.iter().zip(&alloc.entries) {
        load[m] += t.value(m).expect("validated");
    }
    Ok(load)
}

/// Largest machine load under `alloc`.
pub fn makespan(instance: &Instance, alloc: &Allocation) -> Result<ExactValue> {
    Ok(loads(instance, alloc)?
        .into_iter()
        .max()
        .unwrap_or_else(ExactValue::zero))
}

/// Exact optimum with the default enumeration cap.
pub fn opt_makespan(instance: &Instance) -> Result<(ExactValue, Allocation)> {
    opt_makespan_with_cap(instance, DEFAULT_OPT_CAP)
}

/// Exact optimum by enumeration.
///
/// A task with value 0 on some endpoint is placed there first (the lowest such
/// machine); this never raises any load, so the optimum is unchanged. The rest
/// is enumerated in (task id, machine index) lexicographic order with pruning,
/// and the first strict minimum is kept.
pub fn opt_makespan_with_cap(instance: &Instance, cap: u128) -> Result<(ExactValue, Allocation)> {
    let n = instance.n;
    let mut base = vec![ExactValue::zero(); n];
    let mut assignment = vec![usize::MAX; instance.len()];
    let mut free: Vec<usize> = Vec::new();
    let mut product: u128 = 1;
    for (idx, t) in instance.tasks.iter().enumerate() {
        let (sup, k) = t.support();
        if let Some(&m) = sup[..k]
            .iter()
            .find(|&&m| t.value(m).is_some_and(|v| v.is_zero()))
        {
            assignment[idx] = m;
        } else if k == 1 {
            assignment[idx] = sup[0];
            base[sup[0]] += t.value(sup[0]).expect("endpoint");
        } else {
            free.push(idx);
            product = product.saturating_mul(k as u128);
        }
    }
    if product > cap {
        return Err(Error::InstanceTooLarge {
            assignments: product,
            cap,
        });
    }

    struct Search<'a> {
        instance: &'a Instance,
        free: &'a [usize],
        load: Vec<ExactValue>,
        current: Vec<usize>,
        best: Option<ExactValue>,
        best_choice: Vec<usize>,
    }

    impl Search<'_> {
        fn run(&mut self, depth: usize, cur_max: &ExactValue) {
            if let Some(b) = &self.best {
                if cur_max >= b {
                    return;
                }
            }
            if depth == self.free.len() {
                self.best = Some(cur_max.clone());
                self.best_choice.clone_from(&self.current);
                return;
            }
            let t = &self.instance.tasks[self.free[depth]];
            let (sup, k) = t.support();
            for &m in &sup[..k] {
                let v = t.value(m).expect("endpoint");
                self.load[m] += v;
                let next = ExactValue::max_of(cur_max, &self.load[m]).clone();
                self.current.push(m);
                self.run(depth + 1, &next);
                self.current.pop();
                self.load[m] -= v;
            }
        }
    }

    let start = base.iter().max().cloned().unwrap_or_else(ExactValue::zero);
    let mut s = Search {
        instance,
        free: &free,
        load: base,
        current: Vec::with_capacity(free.len()),
        best: None,
        best_choice: Vec::new(),
    };
    s.run(0, &start);
    for (&idx, &m) in free.iter().zip(&s.best_choice) {
        assignment[idx] = m;
    }
    let best = s.best.expect("at least one allocation exists");
    Ok((best, Allocation::from_machines(instance, assignment)))
}

/// A star: one edge per leaf, all incident to the root.
#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Star {
    pub root: usize,
    pub edges: Vec<TaskId>,
    pub leaves: Vec<usize>,
}

impl Star {
    pub fn new(instance: &Instance, root: usize, edges: Vec<TaskId>) -> Result<Self> {
        let mut leaves = Vec::with_capacity(edges.len());
        for &e in &edges {
            let t = instance.task_or_err(e)?;
            let leaf = t.other(root).ok_or_else(|| {
                Error::InvalidInstance(format!("task {e} is not an edge at root {root}"))
            })?;
            if leaves.contains(&leaf) {
                return Err(Error::InvalidInstance(format!(
                    "star has two edges to leaf {leaf}"
                )));
            }
            leaves.push(leaf);
        }
        Ok(Star {
            root,
            edges,
            leaves,
        })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// The star without its `i`-th edge.
    pub fn without(&self, i: usize) -> Star {
        let mut s = self.clone();
        s.edges.remove(i);
        s.leaves.remove(i);
        s
    }
}

/// A star that may carry several parallel edges per leaf.
#[derive(Clone, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiStar {
    pub root: usize,
    /// Per leaf, its edges in id order. Leaves ascending.
    pub groups: Vec<(usize, Vec<TaskId>)>,
}

impl MultiStar {
    pub fn new(instance: &Instance, root: usize, edges: &[TaskId]) -> Result<Self> {
        let mut by_leaf: BTreeMap<usize, Vec<TaskId>> = BTreeMap::new();
        for &e in edges {
            let t = instance.task_or_err(e)?;
            let leaf = t.other(root).ok_or_else(|| {
                Error::InvalidInstance(format!("task {e} is not an edge at root {root}"))
            })?;
            by_leaf.entry(leaf).or_default().push(e);
        }
        for v in by_leaf.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        Ok(MultiStar {
            root,
            groups: by_leaf.into_iter().collect(),
        })
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.0).collect()
    }

    pub fn edges(&self) -> Vec<TaskId> {
        self.groups
            .iter()
            .flat_map(|g| g.1.iter().copied())
            .collect()
    }

    /// Minimum per-leaf edge count (0 for an empty multi-star).
    pub fn multiplicity(&self) -> usize {
        self.groups.iter().map(|g| g.1.len()).min().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: i64) -> ExactValue {
        ExactValue::from_int(n)
    }

    /// The three-player, four-task example: players 1..3 are machines 0..2.
    pub(crate) fn figure_one() -> Instance {
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
    fn empty_makespan_is_zero() {
        let inst = Instance::new(2, vec![]).unwrap();
        let a = Allocation::from_machines(&inst, vec![]);
        assert_eq!(makespan(&inst, &a).unwrap(), ExactValue::zero());
    }

    #[test]
    fn figure_one_all_to_first() {
        let inst = figure_one();
        let a = Allocation::from_machines(&inst, vec![0; 4]);
        assert_eq!(makespan(&inst, &a).unwrap(), v(19));
    }

    #[test]
    fn figure_one_opt() {
        let inst = figure_one();
        let (opt, w) = opt_makespan(&inst).unwrap();
        assert_eq!(opt, v(7));
        assert_eq!(w.entries(), &[(1, 1), (2, 1), (3, 0), (4, 2)]);
        assert_eq!(makespan(&inst, &w).unwrap(), v(7));
    }

    #[test]
    fn loop_is_forced() {
        let z = ExactValue::ratio(3, 2);
        let inst = Instance::new(2, vec![Task::looped(0, 1, z.clone())]).unwrap();
        let a = Allocation::from_machines(&inst, vec![1]);
        assert_eq!(makespan(&inst, &a).unwrap(), z);
        assert_eq!(opt_makespan(&inst).unwrap().0, z);
    }

    #[test]
    fn single_task_opt_is_min() {
        let inst = Instance::new(2, vec![Task::new(0, 0, 1, v(4), v(3))]).unwrap();
        assert_eq!(opt_makespan(&inst).unwrap().0, v(3));
    }

    #[test]
    fn support_violation_rejected() {
        let inst = figure_one();
        let a = Allocation::from_machines(&inst, vec![0, 0, 1, 0]);
        assert!(matches!(
            makespan(&inst, &a),
            Err(Error::InvalidAllocation(_))
        ));
    }

    #[test]
    fn cap_enforced() {
        let tasks = (0..10).map(|i| Task::new(i, 0, 1, v(1), v(2))).collect();
        let inst = Instance::new(2, tasks).unwrap();
        assert!(matches!(
            opt_makespan_with_cap(&inst, 512),
            Err(Error::InstanceTooLarge {
                assignments: 1024,
                cap: 512
            })
        ));
        assert!(opt_makespan_with_cap(&inst, 1024).is_ok());
    }

    #[test]
    fn invalid_instances() {
        assert!(Instance::new(0, vec![]).is_err());
        assert!(Instance::new(2, vec![Task::new(0, 0, 2, v(1), v(1))]).is_err());
        assert!(Instance::new(2, vec![Task::new(0, 0, 1, v(-1), v(1))]).is_err());
        assert!(Instance::new(2, vec![Task::new(0, 1, 1, v(1), v(2))]).is_err());
        assert!(Instance::new(
            2,
            vec![
                Task::new(0, 0, 1, v(1), v(1)),
                Task::new(0, 0, 1, v(1), v(1))
            ]
        )
        .is_err());
    }

    #[test]
    fn stars() {
        let inst = figure_one();
        let s = Star::new(&inst, 0, vec![1, 3]).unwrap();
        assert_eq!(s.leaves, vec![1, 2]);
        assert!(Star::new(&inst, 0, vec![1, 2]).is_err());
        assert!(Star::new(&inst, 1, vec![3]).is_err());
        let ms = MultiStar::new(&inst, 0, &[1, 2, 3]).unwrap();
        assert_eq!(ms.multiplicity(), 1);
        assert_eq!(ms.groups[0], (1, vec![1, 2]));
    }
}

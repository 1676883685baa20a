use proptest::prelude::*;

use truthlab_core::adversary::{
    recurrence_bound, recurrence_step, sample_multi_clique, AdversaryConfig,
};
use truthlab_core::boundary::{quantize, BoundaryProbe, Side};
use truthlab_core::geometry::find_c4;
use truthlab_core::instance::{makespan, opt_makespan, Allocation};
use truthlab_core::mechanism::{AffineMinimizer, AllocationOracle, TaskConstant};
use truthlab_core::truthcheck::{wmon_pair, WmonCheck};
use truthlab_core::{ExactValue, Instance, MechanismSpec, Task};

fn r(p: i64, q: i64) -> ExactValue {
    ExactValue::ratio(p, q)
}

fn value() -> impl Strategy<Value = ExactValue> {
    (0i64..64).prop_map(|k| r(k, 16))
}

fn positive() -> impl Strategy<Value = ExactValue> {
    (1i64..32).prop_map(|k| r(k, 8))
}

/// Three machines, four tasks on fixed supports with free values.
fn instance() -> impl Strategy<Value = Instance> {
    proptest::collection::vec((value(), value()), 4).prop_map(|vals| {
        let supports = [(0, 1), (0, 2), (1, 2), (0, 1)];
        let tasks = vals
            .into_iter()
            .zip(supports)
            .enumerate()
            .map(|(id, ((x, y), (a, b)))| Task::new(id as u64, a, b, x, y))
            .collect();
        Instance::new(3, tasks).unwrap()
    })
}

fn minimizer() -> impl Strategy<Value = MechanismSpec> {
    (
        proptest::collection::vec(positive(), 3),
        proptest::option::of((0u64..4, 0usize..2, value())),
    )
        .prop_map(|(lambdas, constant)| {
            let task_constants = constant
                .map(|(task, m, value)| {
                    // machine must be an endpoint of the task
                    let machine = [[0, 1], [0, 2], [1, 2], [0, 1]][task as usize][m];
                    vec![TaskConstant {
                        task,
                        machine,
                        value,
                    }]
                })
                .unwrap_or_default();
            MechanismSpec::AffineMinimizer(AffineMinimizer {
                multipliers: lambdas,
                task_constants,
                ..Default::default()
            })
        })
}

/// Brute-force C4 check straight from the definition.
fn has_c4(adj: &[Vec<bool>]) -> bool {
    let cols = adj.iter().map(|r| r.len()).max().unwrap_or(0);
    let at = |i: usize, j: usize| adj[i].get(j).copied().unwrap_or(false);
    for i in 0..adj.len() {
        for k in i + 1..adj.len() {
            for j in 0..cols {
                for l in j + 1..cols {
                    if at(i, j) && at(i, l) && at(k, j) && at(k, l) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_display_parses_back(p in -10_000i64..10_000, q in 1i64..10_000) {
        let v = r(p, q);
        let back: ExactValue = v.to_string().parse().unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn opt_is_below_every_allocation(inst in instance(), picks in proptest::collection::vec(0usize..2, 4)) {
        let machines = inst
            .tasks()
            .iter()
            .zip(&picks)
            .map(|(t, &p)| t.support().0[p])
            .collect();
        let alloc = Allocation::from_machines(&inst, machines);
        let (opt, opt_alloc) = opt_makespan(&inst).unwrap();
        prop_assert!(opt <= makespan(&inst, &alloc).unwrap());
        prop_assert_eq!(makespan(&inst, &opt_alloc).unwrap(), opt);
    }

    #[test]
    fn vcg_never_violates_wmon(inst in instance(), machine in 0usize..3, new_vals in proptest::collection::vec(value(), 4)) {
        let mut after = inst.clone();
        for (t, v) in inst.tasks().iter().zip(new_vals) {
            if t.supports(machine) {
                after.set_value(t.id, machine, v).unwrap();
            }
        }
        let check = wmon_pair(&MechanismSpec::Vcg, &inst, &after, machine).unwrap();
        prop_assert!(check.passed(), "{:?}", check);
    }

    #[test]
    fn affine_minimizers_never_violate_wmon(
        spec in minimizer(),
        inst in instance(),
        machine in 0usize..3,
        new_vals in proptest::collection::vec(value(), 4),
    ) {
        let mut after = inst.clone();
        for (t, v) in inst.tasks().iter().zip(new_vals) {
            if t.supports(machine) {
                after.set_value(t.id, machine, v).unwrap();
            }
        }
        let check = wmon_pair(&spec, &inst, &after, machine).unwrap();
        prop_assert!(matches!(check, WmonCheck::Pass { .. }), "{:?}", check);
    }

    #[test]
    fn closed_form_recurrence_dominates_iteration(
        n in 2usize..5,
        nu_log in 4u32..10,
        ell in 1u64..5000,
        k in 2usize..6,
    ) {
        let nu = ExactValue::pow2_neg(nu_log);
        let xi = r(1, 2);
        let closed = recurrence_bound(n, &nu, &xi, ell, k).unwrap();
        let mut b = closed.b2.clone();
        for _ in 2..k {
            b = recurrence_step(&b, n, &nu, &xi, ell).unwrap();
        }
        prop_assert!(closed.bk >= b);
        let next = recurrence_bound(n, &nu, &xi, ell, k + 1).unwrap();
        prop_assert!(next.bk >= closed.bk);
        let wider = recurrence_bound(n, &nu, &xi, ell * 4, k).unwrap();
        prop_assert!(wider.bk < closed.bk);
        prop_assert!(wider.b2 < closed.b2);
    }

    #[test]
    fn find_c4_matches_brute_force(adj in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 0..9), 0..9)) {
        let found = find_c4(&adj);
        prop_assert_eq!(found.is_some(), has_c4(&adj));
        if let Some((i, k, j, l)) = found {
            prop_assert!(adj[i][j] && adj[i][l] && adj[k][j] && adj[k][l]);
            prop_assert!(i != k && j != l);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn clique_is_deterministic_with_zero_opt(seed in any::<u64>(), n in 2usize..4) {
        let mut config = AdversaryConfig::desk(n);
        config.ell = 3;
        config.seed = seed;
        let a = sample_multi_clique(&config).unwrap();
        let b = sample_multi_clique(&config).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), n * (n - 1) / 2 * 3 + n);
        let (opt, _) = opt_makespan(&a).unwrap();
        prop_assert!(opt.is_zero());
    }

    #[test]
    fn vcg_tables_are_monotone(x in value(), y in value(), other in value()) {
        let inst = Instance::new(
            2,
            vec![Task::new(0, 0, 1, x, y), Task::new(1, 0, 1, other.clone(), other)],
        )
        .unwrap();
        for side in [Side::TowardA, Side::TowardB] {
            let probe = BoundaryProbe::new(&MechanismSpec::Vcg, &inst, 0, side).unwrap();
            let table = quantize(&probe, &r(1, 8)).unwrap();
            prop_assert!(table.is_monotone());
            // VCG's threshold is the opposing value, already on the grid
            for (z, q) in &table.values {
                prop_assert_eq!(q.as_ref(), Some(z));
            }
        }
    }
}

#[test]
fn oracle_is_pure() {
    let inst = Instance::new(
        3,
        vec![
            Task::new(0, 0, 1, r(1, 2), r(1, 3)),
            Task::new(1, 1, 2, r(1, 5), r(1, 5)),
            Task::looped(2, 2, r(1, 7)),
        ],
    )
    .unwrap();
    let spec = MechanismSpec::Vcg;
    assert_eq!(spec.allocate(&inst).unwrap(), spec.allocate(&inst).unwrap());
}

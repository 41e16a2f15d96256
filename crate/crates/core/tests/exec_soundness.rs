mod common;

use flexshuffle::coding::{
    build_fitting_matrix, extract_instance, minrank_gf2, optimal_coded_flexible, DEFAULT_ASSIGNMENT_CAP,
    DEFAULT_FREE_CAP,
};
use flexshuffle::coverage::Assignment;
use flexshuffle::exec::{check_outputs, run_plan, synthetic_payloads, PlannedTransmission, ShufflePlan};
use flexshuffle::instance::Instance;
use flexshuffle::shuffle::{tprime_un, tun_exact, tun_greedy};

use common::tiny_instance;

const INSTANCES: u64 = 200;

fn assert_sound(inst: &Instance, plan: &ShufflePlan, assignment: &Assignment, seed: u64, what: &str) {
    let payloads = synthetic_payloads(inst.m(), 0.5, seed);
    let t = run_plan(inst, &payloads, plan, assignment).unwrap_or_else(|e| panic!("{what} on seed {seed}: {e}"));
    assert_eq!(t.outputs.len(), inst.k());
    check_outputs(inst, &payloads, &t).unwrap_or_else(|e| panic!("{what} on seed {seed}: {e}"));
}

#[test]
fn uncoded_plans_execute() {
    for seed in 0..INSTANCES {
        let inst = tiny_instance(seed);
        let exact = tun_exact(&inst, inst.m()).unwrap();
        assert_sound(&inst, &ShufflePlan::from_uncoded(&exact), &exact.assignment, seed, "exact");
        let greedy = tun_greedy(&inst).unwrap();
        assert_sound(&inst, &ShufflePlan::from_uncoded(&greedy), &greedy.assignment, seed, "greedy");
    }
}

#[test]
fn intermediate_plans_execute() {
    for seed in 0..INSTANCES {
        let inst = tiny_instance(seed);
        let plan = tprime_un(&inst).unwrap();
        let sp = ShufflePlan::from_intermediate(&plan);
        assert_eq!(sp.len(), plan.total);
        assert_sound(&inst, &sp, &plan.assignment, seed, "intermediate");
    }
}

#[test]
fn coded_plans_execute() {
    for seed in 0..INSTANCES {
        let inst = tiny_instance(seed);
        let plan = optimal_coded_flexible(&inst, DEFAULT_ASSIGNMENT_CAP, DEFAULT_FREE_CAP).unwrap();
        assert_sound(&inst, &ShufflePlan::from_coded(&plan), &plan.assignment, seed, "coded");
    }
}

/// Sends the rows of a least-rank completion from an extra node that
/// stores every message; receivers are unchanged.
#[test]
fn minrank_witness_decodes() {
    for seed in 0..INSTANCES {
        let inst = tiny_instance(seed);
        let uncoded = tun_exact(&inst, inst.m()).unwrap();
        let fm = build_fitting_matrix(&extract_instance(&inst, &uncoded.assignment));
        let witness = minrank_gf2(&fm, DEFAULT_FREE_CAP).unwrap().witness;
        let all: Vec<usize> = (0..inst.m()).collect();
        let server = inst.n();
        let wide = inst.with_placement(inst.placement.with_node(&all));
        let assignment = Assignment::new(uncoded.assignment.as_slice().to_vec(), server + 1).unwrap();
        let plan = ShufflePlan {
            transmissions: witness
                .iter()
                .map(|row| PlannedTransmission::coded(server, row.iter().map(|c| fm.columns[c]).collect()))
                .collect(),
        };
        assert_sound(&wide, &plan, &assignment, seed, "witness");
    }
}

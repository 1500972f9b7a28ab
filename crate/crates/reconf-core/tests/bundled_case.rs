//! Structural and behavioral pins for the network case shipped in `cases/`.
//!
//! The expected values here were established two ways before being frozen:
//! block structure and radial-configuration counts by hand from the topology,
//! and the nominal optimum by arithmetic (total load minus full PV, all served
//! by the cheaper substation) cross-checked against exhaustive enumeration.

use approx::assert_abs_diff_eq;
use reconf_core::netcase::{load_blocks, parse_case, NetworkCase, Scenario};
use reconf_core::reconfig::{
    default_ladder, enumerate_reference, relax_and_solve, solve_exact,
};

fn bundled() -> NetworkCase {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../cases/ieee37_mod.case"
    );
    let text = std::fs::read_to_string(path).expect("bundled case file");
    parse_case(&text).expect("bundled case parses")
}

#[test]
fn shape_matches_the_published_description() {
    let case = bundled();
    assert_eq!(case.buses.len(), 40);
    assert_eq!(case.lines.len(), 41);
    assert_eq!(case.switchable_lines().len(), 13);
    assert_eq!(case.loads.len(), 30);
    assert_eq!(case.pv_generators().len(), 5);
    assert_eq!(case.substations().len(), 2);

    // Substation order is by host bus id: 798 first, then 799.
    let sub_buses: Vec<&str> = case
        .substations()
        .iter()
        .map(|&g| case.buses[case.generators[g].bus].id.as_str())
        .collect();
    assert_eq!(sub_buses, ["798", "799"]);

    // Switch bit order is file order: ten sectionalizers then three ties.
    let first = &case.lines[case.switchable_lines()[0]];
    let last = &case.lines[*case.switchable_lines().last().unwrap()];
    assert_eq!(first.id, "sw-702-705");
    assert_eq!(last.id, "sw-725-742");

    // Mixed phase construction: a three-phase trunk with 1-phase laterals.
    let three_phase = case.buses.iter().filter(|b| b.phases.len() == 3).count();
    assert_eq!(three_phase, 12);
    assert_eq!(
        Scenario::nominal(&case).features(&case).len(),
        case.loads.len() + case.pv_generators().len()
    );
}

#[test]
fn block_partition_is_stable() {
    let case = bundled();
    let partition = load_blocks(&case, None).unwrap();
    assert_eq!(partition.n_blocks(), 12);

    let members: Vec<Vec<&str>> = partition
        .blocks
        .iter()
        .map(|b| b.iter().map(|&x| case.buses[x].id.as_str()).collect())
        .collect();
    assert_eq!(members[0], ["701", "702", "799"]);
    assert_eq!(members[1], ["703"]);
    assert_eq!(members[2], ["704", "706", "713", "714", "718", "720", "725"]);
    assert_eq!(members[3], ["705", "712", "742", "786"]);
    assert_eq!(members[4], ["707", "722", "724"]);
    assert_eq!(members[5], ["708", "709", "731", "732", "775"]);
    assert_eq!(members[6], ["710", "733", "734", "735", "736", "737"]);
    assert_eq!(members[7], ["711", "738", "740", "741"]);
    assert_eq!(members[8], ["727"]);
    assert_eq!(members[9], ["728", "729", "744", "785"]);
    assert_eq!(members[10], ["730"]);
    assert_eq!(members[11], ["798"]);

    // One switching group ties the far lateral blocks together; every other
    // block is predicted independently.
    assert_eq!(partition.tie_groups, vec![vec![5, 6, 7]]);
    assert_eq!(partition.label_groups.len(), 10);

    // Substation 0 is 798 (block 11), substation 1 is 799 (block 0).
    assert_eq!(partition.block_of_substation(&case, 0), 11);
    assert_eq!(partition.block_of_substation(&case, 1), 0);
}

#[test]
fn nominal_exact_solve_matches_enumeration_and_hand_arithmetic() {
    let case = bundled();
    let partition = load_blocks(&case, None).unwrap();
    let nominal = Scenario::nominal(&case);

    let exact = solve_exact(&case, &partition, &nominal, None, &[]).unwrap();
    let (reference, radial) = enumerate_reference(&case, &nominal, None, &[]).unwrap();

    // 45 radial configurations, counted by hand on the block graph:
    // 18 with the trunk sectionalizer open plus 27 with it closed.
    assert_eq!(radial, 45);

    let (ref_config, ref_obj) = reference.expect("nominal scenario is feasible");
    assert_eq!(exact.config, ref_config);
    assert_abs_diff_eq!(exact.objective, ref_obj, epsilon = 1e-9);

    // Hand arithmetic: 1.160 pu of load minus 0.500 pu of free PV, all fed
    // from the unit-cost substation.
    assert_abs_diff_eq!(exact.objective, 0.660, epsilon = 1e-6);

    // At nominal everything rides the cheap substation; the other one idles.
    assert_eq!(exact.assignment.labels[11], 0);
    assert!(exact.assignment.labels[..11].iter().all(|&l| l == 1));

    // Deterministic tie-break pins the exact configuration string.
    assert_eq!(exact.config.to_string(), "0111111111001");
}

#[test]
fn nominal_voltages_sit_in_the_operating_band() {
    let case = bundled();
    let partition = load_blocks(&case, None).unwrap();
    let nominal = Scenario::nominal(&case);
    let exact = solve_exact(&case, &partition, &nominal, None, &[]).unwrap();
    assert!(
        exact.dispatch.v_min_pu > 0.88 && exact.dispatch.v_min_pu < 0.92,
        "nominal minimum voltage {} should sit just below the tight window",
        exact.dispatch.v_min_pu
    );
    // Mutual coupling can lift a lightly loaded phase slightly above the
    // reference, but never near the upper limit.
    assert!(exact.dispatch.v_max_pu < 1.01);
}

#[test]
fn capacity_pressure_shifts_blocks_to_the_backup_substation() {
    let case = bundled();
    let partition = load_blocks(&case, None).unwrap();
    // Heavy load, weak PV: the cheap substation's per-phase limits cannot
    // carry everything, so some switchable blocks move to 798.
    let stressed = Scenario {
        load_scale: vec![1.10; case.loads.len()],
        pv_scale: vec![0.2; case.pv_generators().len()],
    };
    let exact = solve_exact(&case, &partition, &stressed, None, &[]).unwrap();

    // The four blocks hard-wired to the main feeder can never move, and the
    // backup substation's own block never leaves it.
    for block in [0, 2, 3, 4] {
        assert_eq!(exact.assignment.labels[block], 1, "block {block}");
    }
    assert_eq!(exact.assignment.labels[11], 0);
    // At this stress level at least one switchable block must offload.
    let moved = [1usize, 5, 6, 7, 8, 9, 10]
        .iter()
        .filter(|&&b| exact.assignment.labels[b] == 0)
        .count();
    assert!(moved >= 1, "labels {:?}", exact.assignment.labels);
    // It is still cheaper than pricing everything at the backup rate.
    let net = 1.160 * 1.10 - 0.500 * 0.2;
    assert!(exact.objective > net - 1e-6);
    assert!(exact.objective < 1.15 * net + 1e-6);
}

#[test]
fn ladder_covers_the_operating_range() {
    let case = bundled();
    let partition = load_blocks(&case, None).unwrap();
    let nominal = Scenario::nominal(&case);
    let exact = solve_exact(&case, &partition, &nominal, None, &[]).unwrap();

    // The exact assignment is always realizable and native-feasible, so the
    // ladder must land on some rung, and a tightened window can never beat
    // the native-window optimum.
    let out = relax_and_solve(
        &case,
        &partition,
        &nominal,
        &exact.assignment,
        &default_ladder(),
    )
    .unwrap();
    assert!(out.rung < default_ladder().len());
    assert!(out.result.objective >= exact.objective - 1e-9);
    // Nominal minimum voltage is ~0.898: below the 0.90 rung, inside 0.875.
    assert_eq!(out.rung, 1);
}

//! Engine-versus-oracle agreement on randomized small two-trait instances.

use homogamy_core::gnm::{self, GnmProblem, Objective, SortOrder};
use homogamy_core::oracle;
use homogamy_core::tables::{ContingencyTable, RaceEduLayout};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn layout2() -> RaceEduLayout {
    RaceEduLayout::new(["B".into(), "W".into()], vec!["L".into(), "H".into()]).unwrap()
}

/// Small random 4x4 table: mostly same-race mass with a sprinkle of mixed
/// couples, grand total at most `max_total`.
pub fn random_instance_table(rng: &mut ChaCha8Rng, max_total: u32) -> ContingencyTable {
    loop {
        let mut cells = [[0u32; 4]; 4];
        let mut budget = max_total;
        // seed every same-race cell, then scatter the rest
        for (hr, wr) in [(0usize, 0usize), (1, 1)] {
            for k in 0..2 {
                for l in 0..2 {
                    let v = rng.gen_range(0..=3.min(budget));
                    cells[hr * 2 + k][wr * 2 + l] += v;
                    budget = budget.saturating_sub(v);
                }
            }
        }
        while budget > 0 {
            let r = rng.gen_range(0..4);
            let c = rng.gen_range(0..4);
            let mixed = (r < 2) != (c < 2);
            // keep mixed mass rare so lattices stay small
            if mixed && !rng.gen_bool(0.25) {
                budget -= 1;
                continue;
            }
            let v = rng.gen_range(1..=budget.min(4));
            cells[r][c] += v;
            budget -= v;
        }
        let total: u32 = cells.iter().flatten().sum();
        if total == 0 {
            continue;
        }
        let lay = layout2();
        let t = ContingencyTable::new(
            cells.iter().flatten().map(|&v| v as f64).collect(),
            lay.axis_labels(),
            lay.axis_labels(),
        )
        .unwrap();
        return t;
    }
}

fn compare_one(p: &GnmProblem, label: &str) {
    let engine = gnm::gnm_interval(p);
    let truth = oracle::enumerate_gnm(p);
    match (engine, truth) {
        (Ok(e), Ok(t)) => {
            assert_eq!(e.min_value, t.min_value, "{label}: min");
            assert_eq!(e.max_value, t.max_value, "{label}: max");
            assert_eq!(e.argmin, t.argmin, "{label}: argmin");
            assert_eq!(e.argmax, t.argmax, "{label}: argmax");
            assert_eq!(e.n_feasible, t.n_feasible, "{label}: feasible count");
            assert_eq!(e.n_excluded_negative, t.n_excluded_negative, "{label}: negative count");
            assert_eq!(e.n_excluded_degenerate, t.n_excluded_degenerate, "{label}: degenerate count");
        }
        (Err(e), Err(t)) => {
            let engine_empty = e.is_empty_feasible_set();
            let truth_empty = matches!(
                t,
                oracle::OracleError::NoFeasiblePoint | oracle::OracleError::Infeasible { .. }
            );
            assert!(
                engine_empty && truth_empty,
                "{label}: engine said {e}, oracle said {t}"
            );
        }
        (Ok(e), Err(t)) => panic!("{label}: engine found [{}, {}] but oracle failed: {t}", e.min_value, e.max_value),
        (Err(e), Ok(t)) => panic!("{label}: oracle found [{}, {}] but engine failed: {e}", t.min_value, t.max_value),
    }
}

#[test]
fn engine_matches_oracle_on_random_toys() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let lay = layout2();
    let mut compared = 0;
    let mut skipped = 0;
    for case in 0..25 {
        let k_tr = random_instance_table(&mut rng, 30);
        let k_ta = random_instance_table(&mut rng, 30);
        let k_te = random_instance_table(&mut rng, 30);
        let Ok(base) = GnmProblem::new(k_tr, k_ta, k_te, lay.clone()) else {
            skipped += 1;
            continue;
        };
        for order in [SortOrder::RaceFirst, SortOrder::EducationFirst, SortOrder::BothOrders] {
            for objective in [Objective::Sehc, Objective::Sirm] {
                let p = base.clone().with_order(order).with_objective(objective);
                compare_one(&p, &format!("case {case} {order:?} {objective:?}"));
                compared += 1;
            }
        }
    }
    assert!(compared >= 60, "only {compared} comparisons ran ({skipped} skipped)");
}

#[test]
fn observed_point_mode_matches_oracle_when_times_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let lay = layout2();
    for _ in 0..10 {
        let k = random_instance_table(&mut rng, 30);
        let Ok(base) = GnmProblem::new(k.clone(), k.clone(), k, lay.clone()) else {
            continue;
        };
        for order in [SortOrder::RaceFirst, SortOrder::EducationFirst] {
            let p = base
                .clone()
                .with_order(order)
                .with_allocation_space(gnm::AllocationSpace::ObservedOnly);
            let engine = gnm::gnm_interval(&p);
            let truth = oracle::enumerate_gnm(&p);
            match (engine, truth) {
                (Ok(e), Ok(t)) => {
                    assert_eq!(e.min_value, t.min_value);
                    assert_eq!(e.max_value, t.max_value);
                    assert_eq!(e.min_value, e.max_value);
                }
                (Err(e), Err(_)) => assert!(e.is_empty_feasible_set()),
                (e, t) => panic!("disagreement: engine {e:?} oracle {t:?}"),
            }
        }
    }
}

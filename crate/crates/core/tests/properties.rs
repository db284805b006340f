use proptest::prelude::*;

use pjtree::add::{self, default_order, AddManager, DiagramOrder};
use pjtree::decomposition::{parse_td, td_from_elimination_order, td_validate};
use pjtree::formula::{gaifman_graph, CnfFormula, LiteralWeight, WeightFunction};
use pjtree::jointree::{read_jt, tree_to_td, validate, write_jt};
use pjtree::oracle::brute_force_wmc;
use pjtree::order::OrderHeuristic;
use pjtree::planner::htb::{build_tree, ClauseRank, Clustering, HtbConfig};
use pjtree::planner::td::td_to_pjt;
use pjtree::tensor::{estimate, valuate_tensor};

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

prop_compose! {
    fn formula(max_vars: usize, max_clauses: usize)
        (m in 1..=max_vars)
        (clauses in prop::collection::vec(
            prop::collection::btree_map(1..=m as i64, any::<bool>(), 1..=m.min(4)),
            1..=max_clauses),
         flips in prop::collection::vec(any::<bool>(), m),
         m in Just(m))
        -> CnfFormula
    {
        let rows: Vec<Vec<i64>> = clauses
            .into_iter()
            .map(|c| c.into_iter().map(|(x, pos)| if pos { x } else { -x }).collect())
            .collect();
        let mut w = WeightFunction::unit(m);
        for (k, &flip) in flips.iter().enumerate() {
            w.set(k + 1, if flip { LiteralWeight::new(0.5, 1.5) } else { LiteralWeight::new(1.5, 0.5) });
        }
        CnfFormula::from_dimacs_clauses(m, &rows).with_weights(w)
    }
}

fn config() -> impl Strategy<Value = HtbConfig> {
    (0..9usize, any::<bool>(), any::<bool>(), any::<u64>()).prop_map(|(o, be, tree, seed)| {
        let order = OrderHeuristic::all(seed)[o];
        let rank = if be { ClauseRank::Be } else { ClauseRank::Bm };
        let cluster = if tree { Clustering::Tree } else { Clustering::List };
        HtbConfig::new(order, rank, cluster)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn heuristic_trees_count_correctly(f in formula(8, 12), cfg in config()) {
        let tree = build_tree(&f, &cfg).unwrap();
        prop_assert!(validate(&tree, &f).is_ok());
        let truth = brute_force_wmc(&f).unwrap();
        let by_add = add::valuate(&tree, &f, &default_order(&f)).unwrap();
        let (by_tensor, stats) = valuate_tensor(&tree, &f).unwrap();
        prop_assert!(close(by_add, truth), "{} vs {}", by_add, truth);
        prop_assert!(close(by_tensor, truth), "{} vs {}", by_tensor, truth);
        prop_assert_eq!(estimate(&tree, &f), stats);
    }

    #[test]
    fn diagram_order_does_not_change_the_count(f in formula(7, 10), cfg in config(), shuffle in any::<u64>()) {
        let tree = build_tree(&f, &cfg).unwrap();
        let identity = add::valuate(&tree, &f, &DiagramOrder::identity(f.var_count)).unwrap();
        let random = OrderHeuristic::Random { seed: shuffle }.order(&gaifman_graph(&f));
        let other = add::valuate(&tree, &f, &DiagramOrder::from_var_order(&random)).unwrap();
        prop_assert!(close(identity, other));
    }

    #[test]
    fn elimination_decompositions_plan_within_width(
        f in formula(9, 14),
        keys in prop::collection::vec(any::<u32>(), 9),
    ) {
        let mut order: Vec<usize> = (1..=f.var_count).collect();
        order.sort_by_key(|&x| keys[x - 1]);
        let td = td_from_elimination_order(&gaifman_graph(&f), &order);
        prop_assert!(td_validate(&td, &gaifman_graph(&f)).is_ok());
        let tree = td_to_pjt(&f, &td).unwrap();
        prop_assert!(validate(&tree, &f).is_ok());
        prop_assert!(tree.width(&f) <= td.width() + 1);
        let back = tree_to_td(&tree, &f).unwrap();
        prop_assert!(td_validate(&back, &gaifman_graph(&f)).is_ok());
        prop_assert_eq!(back.width() + 1, tree.width(&f));
    }

    #[test]
    fn planned_trees_survive_both_formats(f in formula(8, 12), cfg in config()) {
        let tree = build_tree(&f, &cfg).unwrap();
        let text = write_jt(&tree).unwrap();
        prop_assert_eq!(read_jt(&text).unwrap(), tree.clone());
        let td = tree_to_td(&tree, &f).unwrap();
        prop_assert_eq!(parse_td(&td.to_pace()).unwrap(), td);
    }

    #[test]
    fn conjunction_is_canonical(f in formula(8, 10), rotate in 0..10usize) {
        let mut mgr = AddManager::new(default_order(&f));
        let mut ids: Vec<usize> = (0..f.clauses.len()).collect();
        let conj = |mgr: &mut AddManager, ids: &[usize]| {
            let mut acc = mgr.constant(1.0);
            for &k in ids {
                let c = mgr.from_clause(&f.clauses[k]).unwrap();
                acc = mgr.product(c, acc).unwrap();
            }
            acc
        };
        let a = conj(&mut mgr, &ids);
        let len = ids.len();
        ids.rotate_left(rotate % len);
        ids.reverse();
        let b = conj(&mut mgr, &ids);
        prop_assert_eq!(a, b);
        prop_assert!(mgr.is_ordered(a).unwrap());
    }
}

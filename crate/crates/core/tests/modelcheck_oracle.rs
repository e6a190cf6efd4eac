//! Product construction, lasso search and classification against
//! exhaustive search on small random instances.

mod common;

use common::{check_against_brute_force, prop_names, random_ba, random_formula, BruteProduct, CmdpSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retshield::ltl::{negate, to_buchi, BindingTable, BuchiAutomaton, Symbol};
use retshield::modelcheck::{build_complete_product, build_product, classify_unsafe, find_violating_lassos};

#[test]
fn matches_exhaustive_search_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d63);
    let mut nonempty = 0;
    for i in 0..300 {
        let spec = CmdpSpec::random(&mut rng);
        let cmdp = spec.build();
        let ba = random_ba(&mut rng, prop_names(spec.nprops));
        if let Err(e) = check_against_brute_force(&cmdp, &ba) {
            panic!("instance {i}: {e}\n{spec:?}\n{}", ba.to_dot());
        }
        let p = build_product(&cmdp, &ba).unwrap();
        nonempty += usize::from(!find_violating_lassos(&p, 1).is_empty());
    }
    // both verdicts must be exercised
    assert!(nonempty > 30 && nonempty < 270, "nonempty instances: {nonempty}");
}

#[test]
fn figure_eight_nodes_count_as_on_cycle() {
    // 0 <-> 1 <-> 2 and only entering 2 is accepting; 0 and 2 share no simple cycle
    let spec = CmdpSpec {
        nprops: 1,
        labels: vec![Symbol(0), Symbol(0), Symbol(1)],
        counts: vec![
            [vec![(1, 1)], vec![], vec![]],
            [vec![(0, 1)], vec![], vec![(2, 1)]],
            [vec![(1, 1)], vec![], vec![]],
        ],
        initial: vec![0],
    };
    let cmdp = spec.build();
    let props = prop_names(1);
    let ba = BuchiAutomaton::new(props, vec![0], vec![false, true], vec![vec![vec![0], vec![1]]; 2]).unwrap();
    check_against_brute_force(&cmdp, &ba).unwrap();
    let c = classify_unsafe(&build_product(&cmdp, &ba).unwrap(), Vec::new());
    assert_eq!(c.pairs.len(), 3);
    assert!(c.on_accepting_cycle.iter().all(|&b| b));
}

#[test]
fn random_walks_project_to_model_and_automaton_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let spec = CmdpSpec::random(&mut rng);
        let cmdp = spec.build();
        let ba = random_ba(&mut rng, prop_names(spec.nprops));
        let p = build_product(&cmdp, &ba).unwrap();
        if p.initial().is_empty() {
            continue;
        }
        let mut v = p.initial()[rng.gen_range(0..p.initial().len())];
        let (s0, q0) = p.pair(v);
        assert!(ba.initial().iter().any(|&i| ba.successors(i, cmdp.label(s0)).contains(&q0)));
        for _ in 0..30 {
            let edges = p.edges(v);
            if edges.is_empty() {
                break;
            }
            let e = &edges[rng.gen_range(0..edges.len())];
            let ((s, q), (s2, q2)) = (p.pair(v), p.pair(e.target));
            assert!(e.probability > 0.0);
            assert_eq!(e.probability, cmdp.probability(s, e.action, s2));
            assert!(ba.successors(q, cmdp.label(s2)).contains(&q2));
            assert_eq!(p.is_accepting(e.target), ba.is_accepting(q2));
            v = e.target;
        }
    }
}

#[test]
fn adding_transitions_never_clears_a_violation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let spec = CmdpSpec::random(&mut rng);
        let ba = random_ba(&mut rng, prop_names(spec.nprops));
        let mut more = spec.clone();
        for _ in 0..rng.gen_range(1..=3) {
            let (s, a, t) = (rng.gen_range(0..spec.len()), rng.gen_range(0..3), rng.gen_range(0..spec.len()));
            more.counts[s][a].push((t, 1));
        }
        let (small, big) = (spec.build(), more.build());
        let cs = classify_unsafe(&build_complete_product(&small, &ba).unwrap(), Vec::new());
        let pb = build_complete_product(&big, &ba).unwrap();
        let cb = classify_unsafe(&pb, Vec::new());
        let index = pb.index();
        for (i, pair) in cs.pairs.iter().enumerate() {
            if cs.violating[i] {
                assert!(cb.violating[index[pair]], "{pair:?} became safe after adding edges");
            }
        }
    }
}

#[test]
fn formula_or_its_negation_has_a_lasso_whenever_the_model_cycles() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 150 {
        let spec = CmdpSpec::random(&mut rng);
        let cmdp = spec.build();
        let names = prop_names(spec.nprops);
        let table = BindingTable::from_names(&names).unwrap();
        // a reachable model cycle, read off the product with the universal automaton
        let universal = BuchiAutomaton::universal(names.clone());
        if !BruteProduct::new(&cmdp, &universal).has_reachable_accepting_cycle() {
            continue;
        }
        let f = random_formula(&mut rng, 3, spec.nprops);
        let pos = build_product(&cmdp, &to_buchi(&f, &table).unwrap()).unwrap();
        let neg = build_product(&cmdp, &to_buchi(&negate(&f), &table).unwrap()).unwrap();
        assert!(
            !find_violating_lassos(&pos, 1).is_empty() || !find_violating_lassos(&neg, 1).is_empty(),
            "neither {f} nor its negation has a lasso"
        );
        checked += 1;
    }
}

#[test]
fn witnesses_are_distinct_and_capped() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let spec = CmdpSpec::random(&mut rng);
        let cmdp = spec.build();
        let ba = random_ba(&mut rng, prop_names(spec.nprops));
        let p = build_product(&cmdp, &ba).unwrap();
        let all = find_violating_lassos(&p, 100);
        let capped = find_violating_lassos(&p, 2);
        assert!(capped.len() <= 2);
        assert_eq!(&all[..capped.len()], &capped[..]);
        let mut seen = std::collections::BTreeSet::new();
        for w in &all {
            assert!(seen.insert((w.prefix.clone(), w.cycle.clone())), "duplicate witness");
        }
    }
}

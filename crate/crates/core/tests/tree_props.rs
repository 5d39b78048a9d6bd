mod oracle;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treemvc_core::dtree::{best_split, build_tree, NodeKind, TreeConfig};
use treemvc_core::tao::{
    care_set, misclassification, node_objective, optimize_node, optimize_tree,
    prune_and_reallocate, tao_pass, ReachSets, DEFAULT_MAX_ITERATIONS,
};
use treemvc_core::Tensor2;

use oracle::{
    brute_force_care, brute_force_split, random_grid, random_matrix, random_tree,
    worked_example_toy,
};

/// Random labeled dataset; grid values half of the time so ties are common.
fn dataset(seed: u64, max_n: usize, max_d: usize, max_k: usize) -> (Tensor2, Vec<usize>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let d = rng.random_range(1..=max_d);
    let k = rng.random_range(1..=max_k);
    let x = if rng.random_bool(0.5) {
        random_grid(&mut rng, n, d, 4)
    } else {
        random_matrix(&mut rng, n, d, -3.0, 3.0)
    };
    let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
    (x, labels, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn best_split_matches_exhaustive_search(seed in any::<u64>()) {
        let (x, labels, _) = dataset(seed, 50, 8, 4);
        let got = best_split(&x, &labels).unwrap().map(|s| (s.feature, s.threshold));
        prop_assert_eq!(got, brute_force_split(&x, &labels));
    }

    #[test]
    fn built_tree_respects_limits(seed in any::<u64>(), max_depth in 1usize..6, min_num in 1usize..8) {
        let (x, labels, k) = dataset(seed, 60, 4, 4);
        let tree = build_tree(&x, &labels, k, &TreeConfig { max_depth, min_num }).unwrap();
        prop_assert!(tree.depth() <= max_depth);
        let root = tree.node(tree.root());
        prop_assert_eq!(root.samples, x.rows());
        for n in tree.nodes() {
            if let NodeKind::Internal { left, right, .. } = n.kind {
                prop_assert!(n.samples >= min_num);
                prop_assert_eq!(tree.node(left).samples + tree.node(right).samples, n.samples);
            }
        }
        // Leaves hold their majority label.
        let reach = ReachSets::compute(&tree, &x).unwrap();
        for n in tree.nodes() {
            if let NodeKind::Leaf { label } = n.kind {
                let mut counts = vec![0usize; k];
                reach.get(n.id).iter().for_each(|&i| counts[labels[i]] += 1);
                prop_assert!(counts.iter().all(|&c| c <= counts[label]));
            }
        }
    }

    #[test]
    fn care_set_matches_definition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, labels, k) = dataset(seed, 80, 4, 4);
        let tree = random_tree(&mut rng, &x, k, 4);
        let reach = ReachSets::compute(&tree, &x).unwrap();
        for n in tree.nodes() {
            let got: Vec<usize> = care_set(&tree, n.id, reach.get(n.id), &x, &labels).iter().map(|c| c.index).collect();
            prop_assert_eq!(got, brute_force_care(&tree, n.id, reach.get(n.id), &x, &labels));
        }
    }

    #[test]
    fn node_optimization_is_exhaustively_optimal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, labels, k) = dataset(seed, 60, 3, 3);
        let mut tree = random_tree(&mut rng, &x, k, 3);
        let reach = ReachSets::compute(&tree, &x).unwrap();
        let root = tree.root();
        let care = care_set(&tree, root, reach.get(root), &x, &labels);
        let Some(update) = optimize_node(&mut tree, root, reach.get(root), &x, &labels) else {
            return Ok(());
        };
        // Brute force over every feature and every midpoint of reaching values;
        // the current split is the fallback.
        let mut best = update.before;
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = reach.get(root).iter().map(|&i| x[(i, f)]).collect();
            for t in treemvc_core::dtree::candidate_thresholds(&mut vals) {
                let split = treemvc_core::dtree::Split { feature: f, threshold: t };
                best = best.min(node_objective(&care, &x, split));
            }
        }
        prop_assert_eq!(update.after, best);
        prop_assert!(update.after <= update.before);
    }

    #[test]
    fn tao_is_monotone_and_terminates(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, labels, k) = dataset(seed, 200, 5, 4);
        let mut tree = random_tree(&mut rng, &x, k, 5);

        let mut probe = tree.clone();
        let mut last_nodes = probe.node_count();
        let mut last_loss = misclassification(&probe, &x, &labels).unwrap();
        for _ in 0..5 {
            let pass = tao_pass(&mut probe, &x, &labels).unwrap();
            prop_assert_eq!(pass.loss_before, last_loss);
            prop_assert!(pass.loss_after <= pass.loss_before);
            prop_assert!(probe.node_count() <= last_nodes);
            last_loss = pass.loss_after;
            last_nodes = probe.node_count();
        }

        let before = tree.node_count();
        let report = optimize_tree(&mut tree, &x, &labels, DEFAULT_MAX_ITERATIONS).unwrap();
        prop_assert!(report.converged);
        prop_assert!(report.iterations() <= DEFAULT_MAX_ITERATIONS);
        prop_assert!(tree.node_count() <= before);
        for p in &report.passes {
            prop_assert!(p.loss_after <= p.loss_before);
        }
    }

    #[test]
    fn pruning_keeps_a_partition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, _, k) = dataset(seed, 40, 3, 3);
        let mut tree = random_tree(&mut rng, &x, k, 5);
        let predictions = tree.predict_batch(&x).unwrap();
        let (reach, _) = prune_and_reallocate(&mut tree, &x).unwrap();
        // Routing is unchanged and every surviving node is reached.
        prop_assert_eq!(tree.predict_batch(&x).unwrap(), predictions);
        let mut seen = vec![0usize; x.rows()];
        for n in tree.nodes() {
            prop_assert!(n.id == tree.root() || !reach.get(n.id).is_empty());
            prop_assert_eq!(n.samples, reach.get(n.id).len());
            if n.is_leaf() {
                reach.get(n.id).iter().for_each(|&i| seen[i] += 1);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }
}

#[test]
fn worked_example_node_reaches_zero() {
    let mut toy = worked_example_toy();
    let reach = ReachSets::compute(&toy.tree, &toy.x).unwrap();
    assert_eq!(reach.get(toy.node), &[1, 2, 3, 4, 5]);
    let care: Vec<usize> = care_set(
        &toy.tree,
        toy.node,
        reach.get(toy.node),
        &toy.x,
        &toy.labels,
    )
    .iter()
    .map(|c| c.index)
    .collect();
    // x2 is wrong on both sides and does not contribute.
    assert_eq!(care, vec![2, 3, 4, 5]);
    let update = optimize_node(
        &mut toy.tree,
        toy.node,
        reach.get(toy.node),
        &toy.x,
        &toy.labels,
    )
    .unwrap();
    assert_eq!((update.before, update.after), (1, 0));
    assert_eq!((update.split.feature, update.split.threshold), (2, 0.5));
}

#[test]
fn worked_example_full_pass_drops_loss_by_one() {
    let mut toy = worked_example_toy();
    let pass = tao_pass(&mut toy.tree, &toy.x, &toy.labels).unwrap();
    assert_eq!((pass.loss_before, pass.loss_after), (2, 1));
}

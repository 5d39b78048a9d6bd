//! Independent reference implementations shared by the property tests and
//! the acceptance suite. Everything here is deliberately naive.
#![allow(dead_code)]

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treemvc_core::dtree::{DecisionTree, NodeKind, TreeNode};
use treemvc_core::nn::{
    combined_loss, cross_entropy_loss, reconstruction_loss, soft_assignment, Autoencoder,
    ClusterCenters, LossSpec,
};
use treemvc_core::Tensor2;

/// Minimum total cost over all K! permutations (recursive enumeration).
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for c in 0..cost.len() {
            if !used[c] {
                used[c] = true;
                go(cost, row + 1, used, acc + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

/// Every permutation of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Exhaustive (feature, midpoint) search scoring each candidate by
/// `Σ_L c²/n_L + Σ_R c²/n_R` as an exact rational; ties keep the earliest
/// candidate in (feature, threshold) order.
pub fn brute_force_split(x: &Tensor2, labels: &[usize]) -> Option<(usize, f64)> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut best: Option<((u128, u128), (usize, f64))> = None;
    for f in 0..x.cols() {
        let mut vals: Vec<f64> = (0..x.rows()).map(|i| x[(i, f)]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = treemvc_core::dtree::midpoint(w[0], w[1]);
            let (mut lc, mut rc) = (vec![0u128; k], vec![0u128; k]);
            for i in 0..x.rows() {
                if x[(i, f)] <= t {
                    lc[labels[i]] += 1;
                } else {
                    rc[labels[i]] += 1;
                }
            }
            let (nl, nr): (u128, u128) = (lc.iter().sum(), rc.iter().sum());
            let sl: u128 = lc.iter().map(|c| c * c).sum();
            let sr: u128 = rc.iter().map(|c| c * c).sum();
            let score = (sl * nr + sr * nl, nl * nr);
            let better = match &best {
                None => true,
                Some(((bn, bd), _)) => score.0 * bd > bn * score.1,
            };
            if better {
                best = Some((score, (f, t)));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Replays k-means++ seeding with plain loops over the same RNG draws:
/// first index uniform, then one uniform `f64` per subsequent center mapped
/// onto the cumulative D² weights.
pub fn kmeanspp_trace<R: Rng>(rows: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<usize> {
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut chosen = vec![rng.random_range(0..rows.len())];
    while chosen.len() < k {
        let weights: Vec<f64> = rows
            .iter()
            .map(|r| {
                chosen
                    .iter()
                    .map(|&c| d2(r, &rows[c]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0, "oracle expects distinct rows");
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = weights.iter().rposition(|&w| w > 0.0).unwrap();
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if *w > 0.0 && acc > u {
                pick = i;
                break;
            }
        }
        chosen.push(pick);
    }
    chosen
}

/// Within-cluster sum of squares of a labeling around its own means.
pub fn partition_sse(rows: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let d = rows[0].len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for t in 0..d {
            sums[l][t] += r[t];
        }
    }
    rows.iter()
        .zip(labels)
        .map(|(r, &l)| {
            (0..d)
                .map(|t| (r[t] - sums[l][t] / counts[l] as f64).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Care set by the four-outcome definition: route every reaching instance
/// down each child by hand and keep those correct on exactly one side.
pub fn brute_force_care(
    tree: &DecisionTree,
    node: usize,
    reach: &[usize],
    x: &Tensor2,
    labels: &[usize],
) -> Vec<usize> {
    let NodeKind::Internal { left, right, .. } = tree.node(node).kind else {
        return vec![];
    };
    let descend = |mut id: usize, row: &[f64]| loop {
        match tree.node(id).kind {
            NodeKind::Leaf { label } => return label,
            NodeKind::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                id = if row[feature] <= threshold {
                    left
                } else {
                    right
                };
            }
        }
    };
    reach
        .iter()
        .copied()
        .filter(|&i| {
            (descend(left, x.row(i)) == labels[i]) != (descend(right, x.row(i)) == labels[i])
        })
        .collect()
}

/// Random full tree of at most `max_depth` levels whose thresholds are drawn
/// from the data so every branch is plausible.
pub fn random_tree<R: Rng>(rng: &mut R, x: &Tensor2, k: usize, max_depth: usize) -> DecisionTree {
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut queue = std::collections::VecDeque::from([(0usize, 0usize)]);
    nodes.push(TreeNode {
        id: 0,
        depth: 0,
        samples: 0,
        kind: NodeKind::Leaf { label: 0 },
    });
    while let Some((id, depth)) = queue.pop_front() {
        if depth < max_depth && (depth == 0 || rng.random_bool(0.6)) {
            let feature = rng.random_range(0..x.cols());
            let threshold = x[(rng.random_range(0..x.rows()), feature)];
            let (left, right) = (nodes.len(), nodes.len() + 1);
            for c in [left, right] {
                nodes.push(TreeNode {
                    id: c,
                    depth: depth + 1,
                    samples: 0,
                    kind: NodeKind::Leaf { label: 0 },
                });
                queue.push_back((c, depth + 1));
            }
            nodes[id].kind = NodeKind::Internal {
                feature,
                threshold,
                left,
                right,
            };
        } else {
            nodes[id].kind = NodeKind::Leaf {
                label: rng.random_range(0..k),
            };
        }
    }
    DecisionTree::from_nodes(nodes, 0, k, x.cols()).expect("generated tree is valid")
}

pub fn random_matrix<R: RngCore>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor2::new(rows, cols, data).unwrap()
}

/// Same as [`random_matrix`] but values snapped to a small integer grid, so
/// duplicate feature values and ties actually occur.
pub fn random_grid<R: RngCore>(rng: &mut R, rows: usize, cols: usize, levels: i32) -> Tensor2 {
    let data = (0..rows * cols)
        .map(|_| f64::from(rng.random_range(0..levels)))
        .collect();
    Tensor2::new(rows, cols, data).unwrap()
}

/// The six-instance toy from the worked TAO example: three labels, a root on
/// f0 that isolates x1, and a node N on f1 that misroutes x5. x2..x4 are
/// identical, so x2 is wrong on both sides of N and drops out of its care set.
pub struct Toy {
    pub x: Tensor2,
    pub labels: Vec<usize>,
    pub tree: DecisionTree,
    /// The internal node the worked example optimizes.
    pub node: usize,
}

pub fn worked_example_toy() -> Toy {
    let x = Tensor2::from_rows(&[
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, 1.0, 1.0],
    ])
    .unwrap();
    let labels = vec![0, 0, 2, 2, 2, 1];
    let leaf = |id, depth, label| TreeNode {
        id,
        depth,
        samples: 0,
        kind: NodeKind::Leaf { label },
    };
    let nodes = vec![
        TreeNode {
            id: 0,
            depth: 0,
            samples: 0,
            kind: NodeKind::Internal {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2,
            },
        },
        leaf(1, 1, 0),
        TreeNode {
            id: 2,
            depth: 1,
            samples: 0,
            kind: NodeKind::Internal {
                feature: 1,
                threshold: 0.5,
                left: 3,
                right: 4,
            },
        },
        leaf(3, 2, 2),
        leaf(4, 2, 1),
    ];
    Toy {
        x,
        labels,
        tree: DecisionTree::from_nodes(nodes, 0, 3, 3).unwrap(),
        node: 2,
    }
}

/// Loss evaluated through the public forward/loss functions only.
pub fn evaluate_loss(ae: &Autoencoder, x: &Tensor2, spec: &LossSpec<'_>) -> f64 {
    let (z, xhat) = ae.forward(x).unwrap();
    let lr = reconstruction_loss(&xhat, x).unwrap();
    match spec {
        LossSpec::Reconstruction => lr,
        LossSpec::Combined {
            centers,
            target,
            lambda,
        } => {
            let s = soft_assignment(&z, centers).unwrap();
            combined_loss(lr, cross_entropy_loss(target, &s).unwrap(), *lambda).unwrap()
        }
    }
}

/// Relative error with an absolute floor so that gradients that are zero up
/// to rounding do not blow the ratio up.
pub const GRADIENT_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADIENT_FLOOR)
}

/// Max relative error between analytic gradients (network and, when
/// present, centers) and central differences with step `h`.
pub fn gradient_check(
    ae: &Autoencoder,
    x: &Tensor2,
    centers: Option<(&ClusterCenters, &Tensor2, f64)>,
    h: f64,
) -> f64 {
    let spec = match centers {
        Some((c, t, lambda)) => LossSpec::Combined {
            centers: c,
            target: t,
            lambda,
        },
        None => LossSpec::Reconstruction,
    };
    let (_, grads) = ae.loss_and_gradients(x, &spec).unwrap();
    let analytic: Vec<Vec<f64>> = grads.network_slices().iter().map(|s| s.to_vec()).collect();
    let mut worst = 0.0f64;
    let mut probe = ae.clone();
    for (slot, g) in analytic.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let orig = probe.parameters_mut()[slot][j];
            probe.parameters_mut()[slot][j] = orig + h;
            let up = evaluate_loss(&probe, x, &spec);
            probe.parameters_mut()[slot][j] = orig - h;
            let down = evaluate_loss(&probe, x, &spec);
            probe.parameters_mut()[slot][j] = orig;
            worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
        }
    }
    if let Some((c, t, lambda)) = centers {
        let gc = grads
            .centers
            .as_ref()
            .expect("combined loss yields center gradients");
        let base = c.as_tensor().as_slice().to_vec();
        let (k, d) = (c.n_clusters(), c.dim());
        for (j, &a) in gc.as_slice().iter().enumerate() {
            let shifted = |delta: f64| {
                let mut v = base.clone();
                v[j] += delta;
                ClusterCenters::new(Tensor2::new(k, d, v).unwrap())
            };
            let (cu, cd) = (shifted(h), shifted(-h));
            let up = evaluate_loss(
                ae,
                x,
                &LossSpec::Combined {
                    centers: &cu,
                    target: t,
                    lambda,
                },
            );
            let down = evaluate_loss(
                ae,
                x,
                &LossSpec::Combined {
                    centers: &cd,
                    target: t,
                    lambda,
                },
            );
            worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
        }
    }
    worst
}

/// One-hot indicator built by hand.
pub fn one_hot(labels: &[usize], k: usize) -> Tensor2 {
    let mut data = vec![0.0; labels.len() * k];
    for (i, &l) in labels.iter().enumerate() {
        data[i * k + l] = 1.0;
    }
    Tensor2::new(labels.len(), k, data).unwrap()
}

/// A random small autoencoder (well under 500 parameters) with a batch of
/// inputs, cluster centers and a one-hot target.
pub fn small_autoencoder_problem(seed: u64) -> (Autoencoder, Tensor2, ClusterCenters, Tensor2) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.random_range(2..6);
    let hidden = [rng.random_range(2..8), rng.random_range(1..4)];
    let mut ae = Autoencoder::new(0, input, &hidden, 1e-3, &mut rng).unwrap();
    // Glorot leaves biases at zero, which can park ReLU pre-activations
    // exactly on the kink when an upstream layer is dead; finite differences
    // are meaningless there, so nudge every bias off zero.
    for (slot, params) in ae.parameters_mut().into_iter().enumerate() {
        if slot % 2 == 1 {
            params
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
    }
    let rows = rng.random_range(2..7);
    let x = random_matrix(&mut rng, rows, input, -2.0, 2.0);
    let k = rng.random_range(2..4);
    let centers = ClusterCenters::new(random_matrix(&mut rng, k, hidden[1], -1.0, 1.0));
    let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..k)).collect();
    (ae, x, centers, one_hot(&labels, k))
}

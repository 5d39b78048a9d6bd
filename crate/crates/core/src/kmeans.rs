//! Lloyd's k-means with k-means++ seeding and seeded restarts.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::tensor::{sq_dist, Tensor2};

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub n_clusters: usize,
    pub n_restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the largest center displacement.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(n_clusters: usize, seed: u64) -> Self {
        Self {
            n_clusters,
            n_restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Tensor2,
    /// Sum of squared distances of every point to its assigned center.
    pub sse: f64,
    /// Number of update rounds that moved some center by at least `tol`.
    pub iterations: usize,
    /// SSE after each assignment step, in order.
    pub sse_trace: Vec<f64>,
}

/// Random generator for restart `restart` of a run seeded with `seed`.
pub fn restart_rng(seed: u64, restart: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    rng
}

/// k-means++ seeding: the first center is uniform, later ones are drawn with
/// probability proportional to the squared distance to the nearest chosen
/// center. Returns the chosen row indices.
pub fn kmeanspp_indices<R: Rng + ?Sized>(z: &Tensor2, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = z.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut chosen = Vec::with_capacity(k);
    let mut taken = alloc::vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut nearest: Vec<f64> = z.iter_rows().map(|r| sq_dist(r, z.row(first))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` at the very top of the range.
            pick.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            // Only duplicates of chosen rows remain.
            taken.iter().position(|t| !t).unwrap_or(0)
        };
        chosen.push(next);
        taken[next] = true;
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row(i), z.row(next)));
        }
    }
    Ok(chosen)
}

pub fn kmeanspp_init<R: Rng + ?Sized>(z: &Tensor2, k: usize, rng: &mut R) -> Result<Tensor2> {
    z.select_rows(&kmeanspp_indices(z, k, rng)?)
}

/// Index of the nearest center; exact ties go to the lowest index.
fn nearest_center(point: &[f64], centers: &Tensor2) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter_rows().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(z: &Tensor2, centers: &Tensor2, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut sse = 0.0;
    for (i, row) in z.iter_rows().enumerate() {
        let (j, d) = nearest_center(row, centers);
        labels[i] = j;
        dists[i] = d;
        sse += d;
    }
    sse
}

/// Lloyd iterations from the given initial centers.
///
/// An empty cluster has its center moved onto the point farthest from its own
/// assigned center; that point is not reused by another empty cluster in the
/// same round.
pub fn lloyd(z: &Tensor2, init: &Tensor2, max_iter: usize, tol: f64) -> Result<KMeansResult> {
    check_dim("center width", z.cols(), init.cols())?;
    if max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    let (n, d, k) = (z.rows(), z.cols(), init.rows());
    let mut centers = init.clone();
    let mut labels = alloc::vec![0usize; n];
    let mut dists = alloc::vec![0.0; n];
    let mut sse_trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter {
        sse_trace.push(assign(z, &centers, &mut labels, &mut dists));

        let mut sums = alloc::vec![0.0; k * d];
        let mut counts = alloc::vec![0usize; k];
        for (i, row) in z.iter_rows().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i] * d..(labels[i] + 1) * d].iter_mut().zip(row) {
                *s += v;
            }
        }
        let mut used = alloc::vec![false; n];
        let mut shift: f64 = 0.0;
        for j in 0..k {
            let new: Vec<f64> = if counts[j] > 0 {
                sums[j * d..(j + 1) * d]
                    .iter()
                    .map(|s| s / counts[j] as f64)
                    .collect()
            } else {
                let far = (0..n)
                    .filter(|&i| !used[i])
                    .fold(None::<(usize, f64)>, |best, i| match best {
                        Some((_, bd)) if bd >= dists[i] => best,
                        _ => Some((i, dists[i])),
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                used[far] = true;
                z.row(far).to_vec()
            };
            shift = shift.max(libm::sqrt(sq_dist(&new, centers.row(j))));
            centers.row_mut(j).copy_from_slice(&new);
        }
        if shift < tol {
            break;
        }
        iterations += 1;
    }
    let sse = assign(z, &centers, &mut labels, &mut dists);
    Ok(KMeansResult {
        labels,
        centers,
        sse,
        iterations,
        sse_trace,
    })
}

/// Best-of-`n_restarts` k-means; ties on SSE keep the earliest restart.
pub fn kmeans(z: &Tensor2, config: &KMeansConfig) -> Result<KMeansResult> {
    let k = config.n_clusters;
    if k == 0 || k > z.rows() {
        return Err(Error::InvalidK { k, n: z.rows() });
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..config.n_restarts.max(1) {
        let mut rng = restart_rng(config.seed, r as u64);
        let init = kmeanspp_init(z, k, &mut rng)?;
        let result = lloyd(z, &init, config.max_iter, config.tol)?;
        if best.as_ref().is_none_or(|b| result.sse < b.sse) {
            best = Some(result);
        }
    }
    best.ok_or(Error::EmptyInput("no k-means restarts"))
}

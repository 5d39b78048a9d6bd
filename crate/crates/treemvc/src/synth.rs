//! Gaussian-blob multi-view data with a shared cluster assignment.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use treemvc_core::tensor::sq_dist;
use treemvc_core::Tensor2;

use crate::error::{Error, Result};

pub const DEFAULT_VIEW_DIM: usize = 10;
/// Minimum distance between cluster means, in units of the noise level.
pub const SEPARATION: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_per_cluster: usize,
    pub n_clusters: usize,
    /// One entry per view.
    pub dims: Vec<usize>,
    /// Per-coordinate standard deviation around each mean.
    pub noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(
        n_per_cluster: usize,
        n_clusters: usize,
        n_views: usize,
        noise: f64,
        seed: u64,
    ) -> Self {
        Self {
            n_per_cluster,
            n_clusters,
            dims: vec![DEFAULT_VIEW_DIM; n_views],
            noise,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub views: Vec<Tensor2>,
    pub truth: Vec<usize>,
    /// Cluster means per view (`n_clusters × dim`).
    pub means: Vec<Tensor2>,
}

/// Means uniform in a box of half-width `max(5, separation)`, redrawn until
/// every pair is at least `separation` apart; the box doubles after repeated
/// failures.
fn draw_means<R: Rng>(k: usize, dim: usize, separation: f64, rng: &mut R) -> Tensor2 {
    let mut half = separation.max(5.0);
    loop {
        for _ in 0..1000 {
            let data: Vec<f64> = (0..k * dim)
                .map(|_| rng.random_range(-half..=half))
                .collect();
            let m = Tensor2::new(k, dim, data).expect("finite means");
            let ok = (0..k)
                .all(|a| (a + 1..k).all(|b| sq_dist(m.row(a), m.row(b)).sqrt() >= separation));
            if ok {
                return m;
            }
        }
        half *= 2.0;
    }
}

pub fn synth_multiview(config: &SynthConfig) -> Result<SynthDataset> {
    if config.n_clusters < 2 {
        return Err(Error::Dataset(format!(
            "need at least 2 clusters, got {}",
            config.n_clusters
        )));
    }
    if config.dims.is_empty() || config.dims.contains(&0) {
        return Err(Error::Dataset(format!(
            "invalid view dims {:?}",
            config.dims
        )));
    }
    if config.n_per_cluster == 0 {
        return Err(Error::Dataset("n_per_cluster must be at least 1".into()));
    }
    if !(config.noise.is_finite() && config.noise >= 0.0) {
        return Err(Error::Dataset(format!(
            "noise must be non-negative, got {}",
            config.noise
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut truth: Vec<usize> = (0..config.n_clusters)
        .flat_map(|c| std::iter::repeat_n(c, config.n_per_cluster))
        .collect();
    truth.shuffle(&mut rng);

    let separation = SEPARATION * config.noise;
    let mut views = Vec::with_capacity(config.dims.len());
    let mut means = Vec::with_capacity(config.dims.len());
    for &dim in &config.dims {
        let m = draw_means(config.n_clusters, dim, separation, &mut rng);
        let mut data = Vec::with_capacity(truth.len() * dim);
        for &c in &truth {
            for &mu in m.row(c) {
                let eps: f64 = rng.sample(StandardNormal);
                data.push(mu + config.noise * eps);
            }
        }
        views.push(Tensor2::new(truth.len(), dim, data)?);
        means.push(m);
    }
    Ok(SynthDataset {
        views,
        truth,
        means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_clusters_are_points() {
        let ds = synth_multiview(&SynthConfig::new(4, 3, 2, 0.0, 9)).unwrap();
        for (view, means) in ds.views.iter().zip(&ds.means) {
            for (row, &c) in view.iter_rows().zip(&ds.truth) {
                assert_eq!(row, means.row(c));
            }
        }
    }

    #[test]
    fn balanced_truth_and_separated_means() {
        let cfg = SynthConfig {
            dims: vec![3, 7],
            ..SynthConfig::new(25, 4, 2, 1.5, 1)
        };
        let ds = synth_multiview(&cfg).unwrap();
        let mut counts = [0; 4];
        ds.truth.iter().for_each(|&c| counts[c] += 1);
        assert_eq!(counts, [25; 4]);
        assert_eq!(
            ds.views.iter().map(Tensor2::cols).collect::<Vec<_>>(),
            vec![3, 7]
        );
        for m in &ds.means {
            for a in 0..4 {
                for b in a + 1..4 {
                    assert!(sq_dist(m.row(a), m.row(b)).sqrt() >= 6.0 * 1.5);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(synth_multiview(&SynthConfig::new(5, 1, 1, 0.1, 0)).is_err());
        assert!(synth_multiview(&SynthConfig::new(5, 2, 0, 0.1, 0)).is_err());
        assert!(synth_multiview(&SynthConfig::new(5, 2, 1, -1.0, 0)).is_err());
    }

    #[test]
    fn raw_kmeans_recovers_low_noise_clusters() {
        use treemvc_core::kmeans::{kmeans, KMeansConfig};
        use treemvc_core::metrics::clustering_accuracy;
        use treemvc_core::pipeline::concat_features;

        for seed in 0..5 {
            let ds = synth_multiview(&SynthConfig::new(30, 4, 3, 0.1, seed)).unwrap();
            let z = concat_features(&ds.views).unwrap();
            let labels = kmeans(&z, &KMeansConfig::new(4, seed)).unwrap().labels;
            assert_eq!(clustering_accuracy(&labels, &ds.truth).unwrap(), 1.0);
        }
    }
}

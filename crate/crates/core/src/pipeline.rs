//! End-to-end fitting: autoencoder pretraining, pseudo-labels, tree
//! construction and the alternating feature/tree refinement cycles.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dtree::{build_tree, DecisionTree, NodeKind, TreeConfig};
use crate::error::{check_dim, Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::metrics::hungarian;
use crate::nn::{AdamState, Autoencoder, ClusterCenters, LossSpec, DEFAULT_HIDDEN};
use crate::preprocess::Standardizer;
use crate::tao::{optimize_tree, DEFAULT_MAX_ITERATIONS};
use crate::tensor::Tensor2;

pub const DEFAULT_PRETRAIN_EPOCHS: usize = 200;
pub const DEFAULT_FINETUNE_EPOCHS: usize = 400;
pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_OUTER_CYCLES: usize = 5;
/// Jitter added to centers of empty clusters, relative to the embedding std.
pub const EMPTY_CENTER_JITTER: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub n_clusters: usize,
    /// Reconstruction-only epochs before the first tree is built.
    pub pretrain_epochs: usize,
    /// Combined-loss epochs per feature phase.
    pub finetune_epochs: usize,
    pub max_depth: usize,
    pub min_num: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Maximum feature/tree cycles after initialization.
    pub outer_cycles: usize,
    pub standardize: bool,
    /// Encoder hidden widths; the last one is the embedding size.
    pub hidden: Vec<usize>,
    pub kmeans_restarts: usize,
    pub tao_max_iterations: usize,
}

impl PipelineConfig {
    pub fn new(n_clusters: usize) -> Self {
        Self {
            n_clusters,
            pretrain_epochs: DEFAULT_PRETRAIN_EPOCHS,
            finetune_epochs: DEFAULT_FINETUNE_EPOCHS,
            max_depth: crate::dtree::DEFAULT_MAX_DEPTH,
            min_num: crate::dtree::DEFAULT_MIN_NUM,
            lambda: DEFAULT_LAMBDA,
            learning_rate: crate::nn::DEFAULT_LEARNING_RATE,
            seed: 0,
            outer_cycles: DEFAULT_OUTER_CYCLES,
            standardize: false,
            hidden: DEFAULT_HIDDEN.to_vec(),
            kmeans_restarts: crate::kmeans::DEFAULT_RESTARTS,
            tao_max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Config(msg));
        if self.n_clusters < 2 {
            return fail(alloc::format!(
                "need at least 2 clusters, got {}",
                self.n_clusters
            ));
        }
        if self.pretrain_epochs == 0 || self.finetune_epochs == 0 {
            return fail("epoch counts must be at least 1".into());
        }
        if self.max_depth == 0 || self.min_num == 0 {
            return fail("max_depth and min_num must be at least 1".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return fail(alloc::format!(
                "lambda must be non-negative, got {}",
                self.lambda
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(alloc::format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail(alloc::format!("invalid hidden widths {:?}", self.hidden));
        }
        if self.kmeans_restarts == 0 || self.tao_max_iterations == 0 {
            return fail("k-means restarts and TAO iteration cap must be at least 1".into());
        }
        Ok(())
    }

    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_num: self.min_num,
        }
    }
}

/// Hard cluster labels with their one-hot indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    hard: Vec<usize>,
    n_clusters: usize,
}

impl LabelSet {
    pub fn new(hard: Vec<usize>, n_clusters: usize) -> Result<Self> {
        if let Some(&bad) = hard.iter().find(|&&l| l >= n_clusters) {
            return Err(Error::InvalidK {
                k: n_clusters,
                n: bad,
            });
        }
        Ok(Self { hard, n_clusters })
    }

    pub fn hard(&self) -> &[usize] {
        &self.hard
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.hard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty()
    }

    /// `N × K` matrix with a single 1 per row at the hard label.
    pub fn indicator(&self) -> Tensor2 {
        let mut data = alloc::vec![0.0; self.hard.len() * self.n_clusters];
        for (i, &l) in self.hard.iter().enumerate() {
            data[i * self.n_clusters + l] = 1.0;
        }
        Tensor2::from_raw(self.hard.len(), self.n_clusters, data)
    }
}

/// Maps concatenated feature indices back to `(view, local index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl ViewLayout {
    pub fn new(dims: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for &d in dims {
            offsets.push(acc);
            acc += d;
        }
        Self {
            dims: dims.to_vec(),
            offsets,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Starting column of each view.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn total(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Zero-based view and local feature index of global column `feature`.
    pub fn locate(&self, feature: usize) -> Option<(usize, usize)> {
        self.offsets
            .iter()
            .zip(&self.dims)
            .enumerate()
            .find(|(_, (&o, &d))| feature >= o && feature < o + d)
            .map(|(v, (&o, _))| (v, feature - o))
    }
}

/// Training traces of one feature/tree cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTrace {
    /// Combined loss per view per fine-tuning epoch (before each update).
    pub feature_loss: Vec<Vec<f64>>,
    pub tao_passes: usize,
    pub tao_converged: bool,
    /// Tree misclassification against the refreshed k-means labels, before
    /// and after tree optimization.
    pub tree_loss_before: usize,
    pub tree_loss_after: usize,
    pub node_count_before: usize,
    pub node_count_after: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    /// Reconstruction loss per view per pretraining epoch.
    pub pretrain: Vec<Vec<f64>>,
    pub cycles: Vec<CycleTrace>,
}

/// Everything produced by a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: PipelineConfig,
    pub view_dims: Vec<usize>,
    pub standardizers: Option<Vec<Standardizer>>,
    pub autoencoders: Vec<Autoencoder>,
    pub centers: Vec<ClusterCenters>,
    pub tree: DecisionTree,
    /// Tree predictions on the training data; the model's cluster assignment.
    pub labels: LabelSet,
    /// Most recent k-means labels on the concatenated embeddings.
    pub pseudo_labels: Vec<usize>,
    pub history: LossHistory,
    pub cycles_completed: usize,
    /// Set when two consecutive cycles produced identical labels.
    pub converged: bool,
}

impl ModelState {
    pub fn layout(&self) -> ViewLayout {
        ViewLayout::new(&self.view_dims)
    }

    /// Checks cross-field consistency, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let v = self.view_dims.len();
        check_dim("autoencoder count", v, self.autoencoders.len())?;
        check_dim("center sets", v, self.centers.len())?;
        for ((ae, c), &d) in self
            .autoencoders
            .iter()
            .zip(&self.centers)
            .zip(&self.view_dims)
        {
            check_dim("autoencoder input", d, ae.input_dim())?;
            check_dim("center width", ae.embedding_dim(), c.dim())?;
            check_dim("center count", self.config.n_clusters, c.n_clusters())?;
        }
        if let Some(s) = &self.standardizers {
            check_dim("standardizer count", v, s.len())?;
            for (s, &d) in s.iter().zip(&self.view_dims) {
                check_dim("standardizer width", d, s.dim())?;
            }
        }
        check_dim(
            "tree feature dim",
            self.view_dims.iter().sum(),
            self.tree.feature_dim(),
        )?;
        check_dim(
            "tree clusters",
            self.config.n_clusters,
            self.tree.n_clusters(),
        )?;
        check_dim(
            "label clusters",
            self.config.n_clusters,
            self.labels.n_clusters(),
        )?;
        check_dim(
            "pseudo-label count",
            self.labels.len(),
            self.pseudo_labels.len(),
        )?;
        Ok(())
    }

    /// Applies the training-time preprocessing to raw views.
    pub fn prepare_views(&self, views: &[Tensor2]) -> Result<Vec<Tensor2>> {
        check_views(views)?;
        check_dim("view count", self.view_dims.len(), views.len())?;
        for (x, &d) in views.iter().zip(&self.view_dims) {
            check_dim("view width", d, x.cols())?;
        }
        match &self.standardizers {
            Some(s) => views.iter().zip(s).map(|(x, s)| s.transform(x)).collect(),
            None => Ok(views.to_vec()),
        }
    }

    /// Tree assignment for raw (unprepared) views.
    pub fn predict(&self, views: &[Tensor2]) -> Result<Vec<usize>> {
        let prepared = self.prepare_views(views)?;
        self.tree.predict_batch(&concat_features(&prepared)?)
    }

    pub fn embed(&self, prepared: &[Tensor2]) -> Result<Vec<Tensor2>> {
        self.autoencoders
            .iter()
            .zip(prepared)
            .map(|(ae, x)| ae.embed(x))
            .collect()
    }
}

fn check_views(views: &[Tensor2]) -> Result<()> {
    let first = views.first().ok_or(Error::EmptyInput("no views"))?;
    for x in views {
        check_dim("rows across views", first.rows(), x.rows())?;
    }
    Ok(())
}

/// Per-instance concatenation of the view embeddings, in view order.
pub fn concat_embeddings(embeddings: &[Tensor2]) -> Result<Tensor2> {
    let parts: Vec<&Tensor2> = embeddings.iter().collect();
    Tensor2::hconcat(&parts)
}

/// Concatenated original features the tree operates on.
pub fn concat_features(views: &[Tensor2]) -> Result<Tensor2> {
    concat_embeddings(views)
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

const TAG_AUTOENCODER: u64 = 1;
const TAG_KMEANS: u64 = 2;
const TAG_JITTER: u64 = 3;

/// Means of `z` per label; empty labels get the global mean plus jitter
/// scaled by the per-dimension standard deviation.
fn centers_from_labels<R: Rng + ?Sized>(
    z: &Tensor2,
    labels: &[usize],
    k: usize,
    rng: &mut R,
) -> ClusterCenters {
    let d = z.cols();
    let mut sums = alloc::vec![0.0; k * d];
    let mut counts = alloc::vec![0usize; k];
    let mut global = alloc::vec![0.0; d];
    for (row, &l) in z.iter_rows().zip(labels) {
        counts[l] += 1;
        for t in 0..d {
            sums[l * d + t] += row[t];
            global[t] += row[t];
        }
    }
    let n = z.rows() as f64;
    global.iter_mut().for_each(|g| *g /= n);
    let mut std = alloc::vec![0.0; d];
    for row in z.iter_rows() {
        for t in 0..d {
            std[t] += (row[t] - global[t]) * (row[t] - global[t]);
        }
    }
    std.iter_mut().for_each(|s| *s = libm::sqrt(*s / n));
    for j in 0..k {
        let c = &mut sums[j * d..(j + 1) * d];
        if counts[j] > 0 {
            c.iter_mut().for_each(|v| *v /= counts[j] as f64);
        } else {
            for t in 0..d {
                c[t] = global[t] + EMPTY_CENTER_JITTER * std[t] * rng.random_range(-1.0..=1.0);
            }
        }
    }
    ClusterCenters::new(Tensor2::from_raw(k, d, sums))
}

/// Renames `labels` so that they agree with `reference` as much as possible.
fn align_labels(labels: &[usize], reference: &[usize], k: usize) -> Result<Vec<usize>> {
    let mut overlap = alloc::vec![alloc::vec![0.0; k]; k];
    for (&l, &r) in labels.iter().zip(reference) {
        overlap[l][r] -= 1.0;
    }
    let (mapping, _) = hungarian(&overlap)?;
    Ok(labels.iter().map(|&l| mapping[l]).collect())
}

/// Algorithm initialization: pretrain one autoencoder per view on
/// reconstruction, cluster the concatenated embeddings with k-means and grow
/// a Gini tree on the concatenated original features guided by those labels.
pub fn initialize(views: &[Tensor2], config: &PipelineConfig) -> Result<ModelState> {
    config.validate()?;
    check_views(views)?;
    let n = views[0].rows();
    if n < config.n_clusters {
        return Err(Error::InvalidK {
            k: config.n_clusters,
            n,
        });
    }
    let standardizers = config
        .standardize
        .then(|| views.iter().map(Standardizer::fit).collect::<Vec<_>>());
    let prepared: Vec<Tensor2> = match &standardizers {
        Some(s) => views
            .iter()
            .zip(s)
            .map(|(x, s)| s.transform(x))
            .collect::<Result<_>>()?,
        None => views.to_vec(),
    };

    let mut autoencoders = Vec::with_capacity(views.len());
    let mut pretrain = Vec::with_capacity(views.len());
    for (v, x) in prepared.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_AUTOENCODER));
        rng.set_stream(v as u64);
        let mut ae = Autoencoder::new(v, x.cols(), &config.hidden, config.learning_rate, &mut rng)?;
        let trace = (0..config.pretrain_epochs)
            .map(|_| ae.train_step(x, &LossSpec::Reconstruction).map(|l| l.total))
            .collect::<Result<Vec<_>>>()?;
        autoencoders.push(ae);
        pretrain.push(trace);
    }

    let embeddings = autoencoders
        .iter()
        .zip(&prepared)
        .map(|(ae, x)| ae.embed(x))
        .collect::<Result<Vec<_>>>()?;
    let z = concat_embeddings(&embeddings)?;
    let mut km = KMeansConfig::new(config.n_clusters, derive_seed(config.seed, TAG_KMEANS));
    km.n_restarts = config.kmeans_restarts;
    let pseudo = kmeans(&z, &km)?.labels;

    let features = concat_features(&prepared)?;
    let tree = build_tree(&features, &pseudo, config.n_clusters, &config.tree_config())?;
    let labels = LabelSet::new(tree.predict_batch(&features)?, config.n_clusters)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_JITTER));
    let centers = embeddings
        .iter()
        .map(|e| centers_from_labels(e, labels.hard(), config.n_clusters, &mut rng))
        .collect();

    Ok(ModelState {
        config: config.clone(),
        view_dims: views.iter().map(Tensor2::cols).collect(),
        standardizers,
        autoencoders,
        centers,
        tree,
        labels,
        pseudo_labels: pseudo,
        history: LossHistory {
            pretrain,
            cycles: Vec::new(),
        },
        cycles_completed: 0,
        converged: false,
    })
}

/// Refines every autoencoder on reconstruction plus `lambda` times the
/// cross-entropy between the tree's one-hot labels and the view's soft
/// assignment. Centers start at per-label embedding means and are trained
/// alongside the network. Returns the combined loss trace per view.
pub fn feature_phase(state: &mut ModelState, prepared: &[Tensor2]) -> Result<Vec<Vec<f64>>> {
    check_dim("view count", state.autoencoders.len(), prepared.len())?;
    let config = state.config.clone();
    let features = concat_features(prepared)?;
    let tree_labels = LabelSet::new(state.tree.predict_batch(&features)?, config.n_clusters)?;
    let target = tree_labels.indicator();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_JITTER));
    rng.set_stream(state.cycles_completed as u64 + 1);

    let mut traces = Vec::with_capacity(prepared.len());
    for (v, x) in prepared.iter().enumerate() {
        let ae = &mut state.autoencoders[v];
        let mut centers = centers_from_labels(
            &ae.embed(x)?,
            tree_labels.hard(),
            config.n_clusters,
            &mut rng,
        );
        let mut center_opt = AdamState::new(config.learning_rate)?;
        let mut trace = Vec::with_capacity(config.finetune_epochs);
        for _ in 0..config.finetune_epochs {
            let spec = LossSpec::Combined {
                centers: &centers,
                target: &target,
                lambda: config.lambda,
            };
            let (loss, grads) = ae.loss_and_gradients(x, &spec)?;
            ae.apply_gradients(&grads)?;
            if let Some(gc) = &grads.centers {
                center_opt.step(&mut [centers.as_mut_slice()], &[gc.as_slice()])?;
            }
            trace.push(loss.total);
        }
        state.centers[v] = centers;
        traces.push(trace);
    }
    Ok(traces)
}

/// Re-embeds, refreshes the k-means pseudo-labels (renamed to agree with the
/// current tree), runs tree alternating optimization to stability and
/// stores the tree's predictions as the model labels.
pub fn tree_phase(state: &mut ModelState, prepared: &[Tensor2]) -> Result<CycleTrace> {
    let config = state.config.clone();
    let embeddings = state.embed(prepared)?;
    let z = concat_embeddings(&embeddings)?;
    let mut km = KMeansConfig::new(
        config.n_clusters,
        derive_seed(config.seed, TAG_KMEANS).wrapping_add(state.cycles_completed as u64 + 1),
    );
    km.n_restarts = config.kmeans_restarts;
    let features = concat_features(prepared)?;
    let current = state.tree.predict_batch(&features)?;
    let pseudo = align_labels(&kmeans(&z, &km)?.labels, &current, config.n_clusters)?;

    let node_count_before = state.tree.node_count();
    let tree_loss_before = crate::tao::misclassification(&state.tree, &features, &pseudo)?;
    let report = optimize_tree(
        &mut state.tree,
        &features,
        &pseudo,
        config.tao_max_iterations,
    )?;
    let tree_loss_after = crate::tao::misclassification(&state.tree, &features, &pseudo)?;
    state.labels = LabelSet::new(state.tree.predict_batch(&features)?, config.n_clusters)?;
    state.pseudo_labels = pseudo;
    Ok(CycleTrace {
        feature_loss: Vec::new(),
        tao_passes: report.iterations(),
        tao_converged: report.converged,
        tree_loss_before,
        tree_loss_after,
        node_count_before,
        node_count_after: state.tree.node_count(),
    })
}

/// Initialization followed by up to `outer_cycles` feature/tree cycles,
/// stopping early once a cycle leaves the labels unchanged.
pub fn fit(views: &[Tensor2], config: &PipelineConfig) -> Result<ModelState> {
    let mut state = initialize(views, config)?;
    let prepared = state.prepare_views(views)?;
    for _ in 0..config.outer_cycles {
        let previous = state.labels.clone();
        let feature_loss = feature_phase(&mut state, &prepared)?;
        let mut trace = tree_phase(&mut state, &prepared)?;
        trace.feature_loss = feature_loss;
        state.history.cycles.push(trace);
        state.cycles_completed += 1;
        if state.labels == previous {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// One decision on an instance's path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub node: usize,
    /// Column in the concatenated feature space.
    pub feature: usize,
    pub view: usize,
    pub local_feature: usize,
    pub threshold: f64,
    /// The instance's (prepared) value of the feature.
    pub value: f64,
    pub went_left: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub steps: Vec<PathStep>,
    pub label: usize,
}

/// Root-to-leaf decisions for one instance given as one raw row per view.
pub fn explain(state: &ModelState, instance: &[&[f64]]) -> Result<Explanation> {
    check_dim("view count", state.view_dims.len(), instance.len())?;
    let mut row = Vec::with_capacity(state.tree.feature_dim());
    for (v, (x, &d)) in instance.iter().zip(&state.view_dims).enumerate() {
        check_dim("view width", d, x.len())?;
        match &state.standardizers {
            Some(s) => {
                row.extend_from_slice(s[v].transform(&Tensor2::new(1, d, x.to_vec())?)?.as_slice())
            }
            None => row.extend_from_slice(x),
        }
    }
    let layout = state.layout();
    let path = state.tree.decision_path(&row)?;
    let mut steps = Vec::with_capacity(path.len().saturating_sub(1));
    for pair in path.windows(2) {
        if let NodeKind::Internal {
            feature,
            threshold,
            left,
            ..
        } = state.tree.node(pair[0]).kind
        {
            let (view, local_feature) = layout.locate(feature).unwrap_or((0, feature));
            steps.push(PathStep {
                node: pair[0],
                feature,
                view,
                local_feature,
                threshold,
                value: row[feature],
                went_left: pair[1] == left,
            });
        }
    }
    let leaf = path.last().copied().unwrap_or(state.tree.root());
    let NodeKind::Leaf { label } = state.tree.node(leaf).kind else {
        return Err(Error::InvalidTree(
            "decision path does not end at a leaf".into(),
        ));
    };
    Ok(Explanation { steps, label })
}

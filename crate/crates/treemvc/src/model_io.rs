//! Versioned little-endian binary encoding of a fitted [`ModelState`].
//!
//! Layout: the magic `TMVC`, a `u32` format version, then tagged sections,
//! each `u32 tag · u64 byte length · payload`. Integers are `u64`, floats are
//! raw IEEE-754 bits, and sequences carry a `u64` length prefix, so a saved
//! model reloads bit-for-bit.

use std::fs;
use std::path::Path;

use treemvc_core::dtree::{DecisionTree, NodeKind, TreeNode};
use treemvc_core::nn::{Activation, AdamState, Autoencoder, ClusterCenters, DenseLayer};
use treemvc_core::pipeline::{CycleTrace, LabelSet, LossHistory, ModelState, PipelineConfig};
use treemvc_core::preprocess::Standardizer;
use treemvc_core::Tensor2;

use crate::error::{Error, IoContext, Result};

pub const MAGIC: &[u8; 4] = b"TMVC";
pub const FORMAT_VERSION: u32 = 1;

const SEC_CONFIG: u32 = 1;
const SEC_VIEWS: u32 = 2;
const SEC_NETWORKS: u32 = 3;
const SEC_CENTERS: u32 = 4;
const SEC_TREE: u32 = 5;
const SEC_LABELS: u32 = 6;
const SEC_HISTORY: u32 = 7;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn usizes(&mut self, v: &[usize]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.usize(x));
    }
    fn section(&mut self, tag: u32, body: impl FnOnce(&mut Writer)) {
        let mut inner = Writer::default();
        body(&mut inner);
        self.u32(tag);
        self.usize(inner.buf.len());
        self.buf.extend_from_slice(&inner.buf);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format_err(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| format_err("integer overflow"))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(format_err(format!(
                "sequence length {n} exceeds remaining data"
            )));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(format_err(format!("invalid flag byte {b}"))),
        }
    }
    fn section(&mut self, tag: u32) -> Result<Reader<'a>> {
        let found = self.u32()?;
        if found != tag {
            return Err(format_err(format!("expected section {tag}, found {found}")));
        }
        let n = self.usize()?;
        Ok(Reader::new(self.take(n)?))
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(format_err(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_layer(w: &mut Writer, l: &DenseLayer) {
    w.usize(l.inputs());
    w.usize(l.outputs());
    w.u8(match l.activation() {
        Activation::Relu => 0,
        Activation::Linear => 1,
    });
    w.f64s(l.weights());
    w.f64s(l.bias());
}

fn read_layer(r: &mut Reader) -> Result<DenseLayer> {
    let inputs = r.usize()?;
    let outputs = r.usize()?;
    let activation = match r.u8()? {
        0 => Activation::Relu,
        1 => Activation::Linear,
        b => return Err(format_err(format!("unknown activation {b}"))),
    };
    let weights = r.f64s()?;
    let bias = r.f64s()?;
    Ok(DenseLayer::new(inputs, outputs, weights, bias, activation)?)
}

fn write_matrix(w: &mut Writer, m: &Tensor2) {
    w.usize(m.rows());
    w.usize(m.cols());
    w.f64s(m.as_slice());
}

fn read_matrix(r: &mut Reader) -> Result<Tensor2> {
    let rows = r.usize()?;
    let cols = r.usize()?;
    Ok(Tensor2::new(rows, cols, r.f64s()?)?)
}

fn write_tree(w: &mut Writer, t: &DecisionTree) {
    w.usize(t.n_clusters());
    w.usize(t.feature_dim());
    w.usize(t.root());
    w.usize(t.node_count());
    for n in t.nodes() {
        w.usize(n.id);
        w.usize(n.depth);
        w.usize(n.samples);
        match n.kind {
            NodeKind::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                w.u8(0);
                w.usize(feature);
                w.f64(threshold);
                w.usize(left);
                w.usize(right);
            }
            NodeKind::Leaf { label } => {
                w.u8(1);
                w.usize(label);
            }
        }
    }
}

fn read_tree(r: &mut Reader) -> Result<DecisionTree> {
    let n_clusters = r.usize()?;
    let feature_dim = r.usize()?;
    let root = r.usize()?;
    let count = r.len(25)?;
    let mut nodes = Vec::with_capacity(count);
    for _ in 0..count {
        let id = r.usize()?;
        let depth = r.usize()?;
        let samples = r.usize()?;
        let kind = match r.u8()? {
            0 => NodeKind::Internal {
                feature: r.usize()?,
                threshold: r.f64()?,
                left: r.usize()?,
                right: r.usize()?,
            },
            1 => NodeKind::Leaf { label: r.usize()? },
            b => return Err(format_err(format!("unknown node kind {b}"))),
        };
        nodes.push(TreeNode {
            id,
            depth,
            samples,
            kind,
        });
    }
    Ok(DecisionTree::from_nodes(
        nodes,
        root,
        n_clusters,
        feature_dim,
    )?)
}

/// Encodes the complete model state.
pub fn encode_model(state: &ModelState) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);

    let c = &state.config;
    w.section(SEC_CONFIG, |w| {
        w.usize(c.n_clusters);
        w.usize(c.pretrain_epochs);
        w.usize(c.finetune_epochs);
        w.usize(c.max_depth);
        w.usize(c.min_num);
        w.f64(c.lambda);
        w.f64(c.learning_rate);
        w.u64(c.seed);
        w.usize(c.outer_cycles);
        w.u8(c.standardize as u8);
        w.usizes(&c.hidden);
        w.usize(c.kmeans_restarts);
        w.usize(c.tao_max_iterations);
    });
    w.section(SEC_VIEWS, |w| {
        w.usizes(&state.view_dims);
        match &state.standardizers {
            None => w.u8(0),
            Some(s) => {
                w.u8(1);
                for s in s {
                    w.f64s(s.mean());
                    w.f64s(s.std());
                }
            }
        }
    });
    w.section(SEC_NETWORKS, |w| {
        for ae in &state.autoencoders {
            w.usize(ae.view_index());
            for layers in [ae.encoder(), ae.decoder()] {
                w.usize(layers.len());
                layers.iter().for_each(|l| write_layer(w, l));
            }
            let opt = ae.optimizer();
            let (b1, b2) = opt.betas();
            w.f64(opt.learning_rate());
            w.f64(b1);
            w.f64(b2);
            w.f64(opt.epsilon());
            w.u64(opt.step_count());
            w.usize(opt.first_moment().len());
            for (m, v) in opt.first_moment().iter().zip(opt.second_moment()) {
                w.f64s(m);
                w.f64s(v);
            }
        }
    });
    w.section(SEC_CENTERS, |w| {
        state
            .centers
            .iter()
            .for_each(|c| write_matrix(w, c.as_tensor()));
    });
    w.section(SEC_TREE, |w| write_tree(w, &state.tree));
    w.section(SEC_LABELS, |w| {
        w.usizes(state.labels.hard());
        w.usizes(&state.pseudo_labels);
        w.usize(state.cycles_completed);
        w.u8(state.converged as u8);
    });
    w.section(SEC_HISTORY, |w| {
        w.usize(state.history.pretrain.len());
        state.history.pretrain.iter().for_each(|t| w.f64s(t));
        w.usize(state.history.cycles.len());
        for cy in &state.history.cycles {
            w.usize(cy.feature_loss.len());
            cy.feature_loss.iter().for_each(|t| w.f64s(t));
            w.usize(cy.tao_passes);
            w.u8(cy.tao_converged as u8);
            w.usize(cy.tree_loss_before);
            w.usize(cy.tree_loss_after);
            w.usize(cy.node_count_before);
            w.usize(cy.node_count_after);
        }
    });
    w.buf
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelState> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(format_err("not a treemvc model (bad magic)"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported format version {version}")));
    }

    let mut s = r.section(SEC_CONFIG)?;
    let config = PipelineConfig {
        n_clusters: s.usize()?,
        pretrain_epochs: s.usize()?,
        finetune_epochs: s.usize()?,
        max_depth: s.usize()?,
        min_num: s.usize()?,
        lambda: s.f64()?,
        learning_rate: s.f64()?,
        seed: s.u64()?,
        outer_cycles: s.usize()?,
        standardize: s.bool()?,
        hidden: s.usizes()?,
        kmeans_restarts: s.usize()?,
        tao_max_iterations: s.usize()?,
    };
    s.finish()?;

    let mut s = r.section(SEC_VIEWS)?;
    let view_dims = s.usizes()?;
    let standardizers = if s.bool()? {
        let v = view_dims
            .iter()
            .map(|_| Standardizer::from_parts(s.f64s()?, s.f64s()?).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Some(v)
    } else {
        None
    };
    s.finish()?;

    let mut s = r.section(SEC_NETWORKS)?;
    let mut autoencoders = Vec::with_capacity(view_dims.len());
    for _ in 0..view_dims.len() {
        let view_index = s.usize()?;
        let mut stacks = Vec::with_capacity(2);
        for _ in 0..2 {
            let n = s.len(8)?;
            stacks.push(
                (0..n)
                    .map(|_| read_layer(&mut s))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let (lr, b1, b2, eps) = (s.f64()?, s.f64()?, s.f64()?, s.f64()?);
        let step = s.u64()?;
        let slots = s.len(16)?;
        let (mut m1, mut m2) = (Vec::with_capacity(slots), Vec::with_capacity(slots));
        for _ in 0..slots {
            m1.push(s.f64s()?);
            m2.push(s.f64s()?);
        }
        let opt = AdamState::from_parts(lr, b1, b2, eps, step, m1, m2)?;
        let decoder = stacks.pop().unwrap_or_default();
        let encoder = stacks.pop().unwrap_or_default();
        autoencoders.push(Autoencoder::from_layers(view_index, encoder, decoder, opt)?);
    }
    s.finish()?;

    let mut s = r.section(SEC_CENTERS)?;
    let centers = view_dims
        .iter()
        .map(|_| read_matrix(&mut s).map(ClusterCenters::new))
        .collect::<Result<Vec<_>>>()?;
    s.finish()?;

    let mut s = r.section(SEC_TREE)?;
    let tree = read_tree(&mut s)?;
    s.finish()?;

    let mut s = r.section(SEC_LABELS)?;
    let labels = LabelSet::new(s.usizes()?, config.n_clusters)?;
    let pseudo_labels = s.usizes()?;
    let cycles_completed = s.usize()?;
    let converged = s.bool()?;
    s.finish()?;

    let mut s = r.section(SEC_HISTORY)?;
    let n = s.len(8)?;
    let pretrain = (0..n).map(|_| s.f64s()).collect::<Result<Vec<_>>>()?;
    let n = s.len(8)?;
    let mut cycles = Vec::with_capacity(n);
    for _ in 0..n {
        let views = s.len(8)?;
        let feature_loss = (0..views).map(|_| s.f64s()).collect::<Result<Vec<_>>>()?;
        cycles.push(CycleTrace {
            feature_loss,
            tao_passes: s.usize()?,
            tao_converged: s.bool()?,
            tree_loss_before: s.usize()?,
            tree_loss_after: s.usize()?,
            node_count_before: s.usize()?,
            node_count_after: s.usize()?,
        });
    }
    s.finish()?;
    r.finish()?;

    let state = ModelState {
        config,
        view_dims,
        standardizers,
        autoencoders,
        centers,
        tree,
        labels,
        pseudo_labels,
        history: LossHistory { pretrain, cycles },
        cycles_completed,
        converged,
    };
    state.validate()?;
    Ok(state)
}

pub fn save_model(path: &Path, state: &ModelState) -> Result<()> {
    fs::write(path, encode_model(state)).at(path)
}

pub fn load_model(path: &Path) -> Result<ModelState> {
    decode_model(&fs::read(path).at(path)?)
}

//! Binary model files.
//!
//! The format is a single little-endian blob:
//!
//! ```text
//! magic      b"UWPM"
//! version    u32, currently 1
//! core       model core section (see below)
//! ood_flag   u8, 0 or 1
//! ood        detector section, present when ood_flag = 1
//! checksum   u64, FNV-1a over every preceding byte
//! ```
//!
//! The core section fully determines prediction:
//!
//! ```text
//! layout_hash u64            windowed feature layout fingerprint
//! tau         u64
//! config      num_leaves u64, learning_rate f64, feature_fraction f64,
//!             max_rounds u64, early_stop_patience u64,
//!             min_samples_leaf u64, l2_lambda f64, histogram_bins u64,
//!             seed u64
//! n_features  u64
//! bin_edges   per feature: count u32, then count f64 ascending edges
//! n_classes   u32
//! classes     u32 per class, ascending label ids
//! base_scores f64 per class
//! n_trees     u32
//! trees       per tree: n_nodes u32, n_leaves u16, then nodes in
//!             array order (preorder): tag u8, 0 = internal
//!             (feature u32, threshold f64, left u32, right u32),
//!             1 = leaf (leaf_id u16, value f64)
//! ```
//!
//! The detector section is `nu f64, gamma f64, rho f64, model_checksum u64,
//! n_support u64, emb_len u64`, then the alphas (f64 each) and the support
//! embeddings (u16 per element, row-major).
//!
//! [`model_core_checksum`] hashes the core section alone. That value binds
//! an OOD detector to its forest and is stable whether or not a detector
//! is attached. The trailing file checksum covers everything, so any
//! flipped byte fails loudly instead of producing a subtly different model.
//!
//! Trees are stored with explicit child indices in preorder, matching the
//! in-memory layout the trainer emits, so a load reproduces the exact node
//! array and `save(load(x)) == x` byte for byte. The parser validates
//! structure: children must follow their parent, every node must be
//! reachable exactly once, leaf ids must be dense in array order, and all
//! floats must be finite.

use std::path::Path;

use crate::hash::Fnv1a64;
use crate::ood::OodDetector;

use super::{GbdtConfig, GbdtModel, Tree, TreeNode};

const MAGIC: &[u8; 4] = b"UWPM";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    VersionMismatch(u32),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

fn corrupt(msg: impl Into<String>) -> ModelIoError {
    ModelIoError::CorruptModel(msg.into())
}

fn put_u8(buf: &mut Vec<u8>, v: u8) {
    buf.push(v);
}

fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_index(buf: &mut Vec<u8>, v: usize) {
    put_u32(buf, u32::try_from(v).expect("index exceeds u32"));
}

/// Serializes the model core section (everything except the OOD detector).
pub fn model_core_bytes(model: &GbdtModel) -> Vec<u8> {
    let mut buf = Vec::new();
    put_u64(&mut buf, model.layout_hash);
    put_u64(&mut buf, model.tau as u64);

    let c = &model.config;
    put_u64(&mut buf, c.num_leaves as u64);
    put_f64(&mut buf, c.learning_rate);
    put_f64(&mut buf, c.feature_fraction);
    put_u64(&mut buf, c.max_rounds as u64);
    put_u64(&mut buf, c.early_stop_patience as u64);
    put_u64(&mut buf, c.min_samples_leaf as u64);
    put_f64(&mut buf, c.l2_lambda);
    put_u64(&mut buf, c.histogram_bins as u64);
    put_u64(&mut buf, c.seed);

    put_u64(&mut buf, model.n_features as u64);
    for edges in &model.bin_edges {
        put_index(&mut buf, edges.len());
        for &e in edges {
            put_f64(&mut buf, e);
        }
    }

    put_index(&mut buf, model.classes.len());
    for &c in &model.classes {
        put_u32(&mut buf, c);
    }
    for &s in &model.base_scores {
        put_f64(&mut buf, s);
    }

    put_index(&mut buf, model.trees.len());
    for tree in &model.trees {
        put_index(&mut buf, tree.nodes.len());
        put_u16(&mut buf, tree.n_leaves);
        for node in &tree.nodes {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    put_u8(&mut buf, 0);
                    put_index(&mut buf, *feature);
                    put_f64(&mut buf, *threshold);
                    put_index(&mut buf, *left);
                    put_index(&mut buf, *right);
                }
                TreeNode::Leaf { leaf_id, value } => {
                    put_u8(&mut buf, 1);
                    put_u16(&mut buf, *leaf_id);
                    put_f64(&mut buf, *value);
                }
            }
        }
    }
    buf
}

/// FNV-1a checksum of the model core section.
pub fn model_core_checksum(model: &GbdtModel) -> u64 {
    crate::hash::fnv1a64(&model_core_bytes(model))
}

/// Serializes a complete model file, trailing checksum included.
pub fn model_bytes(model: &GbdtModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION);
    buf.extend_from_slice(&model_core_bytes(model));
    match &model.ood {
        None => put_u8(&mut buf, 0),
        Some(det) => {
            put_u8(&mut buf, 1);
            put_f64(&mut buf, det.nu);
            put_f64(&mut buf, det.gamma);
            put_f64(&mut buf, det.rho);
            put_u64(&mut buf, det.model_checksum);
            put_u64(&mut buf, det.support_embeddings.len() as u64);
            put_u64(&mut buf, det.embedding_len() as u64);
            for &a in &det.alphas {
                put_f64(&mut buf, a);
            }
            for emb in &det.support_embeddings {
                for &leaf in emb {
                    put_u16(&mut buf, leaf);
                }
            }
        }
    }
    let mut h = Fnv1a64::new();
    h.update(&buf);
    put_u64(&mut buf, h.finish());
    buf
}

pub fn save_model(model: &GbdtModel, path: &Path) -> Result<(), ModelIoError> {
    std::fs::write(path, model_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<GbdtModel, ModelIoError> {
    let bytes = std::fs::read(path)?;
    parse_model(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelIoError> {
        if self.remaining() < n {
            return Err(corrupt("truncated file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ModelIoError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelIoError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelIoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finite_f64(&mut self, what: &str) -> Result<f64, ModelIoError> {
        let v = self.f64()?;
        if !v.is_finite() {
            return Err(corrupt(format!("non-finite {what}")));
        }
        Ok(v)
    }

    /// Reads an element count and rejects it if the remaining bytes cannot
    /// possibly hold that many items, before anything is allocated.
    fn count_u32(&mut self, item_size: usize) -> Result<usize, ModelIoError> {
        let n = self.u32()? as usize;
        self.check_capacity(n, item_size)?;
        Ok(n)
    }

    fn count_u64(&mut self, item_size: usize) -> Result<usize, ModelIoError> {
        let n = usize::try_from(self.u64()?).map_err(|_| corrupt("count exceeds usize"))?;
        self.check_capacity(n, item_size)?;
        Ok(n)
    }

    fn check_capacity(&self, n: usize, item_size: usize) -> Result<(), ModelIoError> {
        let needed = n
            .checked_mul(item_size)
            .ok_or_else(|| corrupt("count overflow"))?;
        if self.remaining() < needed {
            return Err(corrupt("truncated file"));
        }
        Ok(())
    }
}

fn parse_usize(v: u64, what: &str) -> Result<usize, ModelIoError> {
    usize::try_from(v).map_err(|_| corrupt(format!("{what} exceeds usize")))
}

fn parse_tree(r: &mut Reader, n_features: usize) -> Result<Tree, ModelIoError> {
    // Smallest node record is a leaf: tag + id + value = 11 bytes.
    let n_nodes = r.count_u32(11)?;
    if n_nodes == 0 {
        return Err(corrupt("tree with zero nodes"));
    }
    let n_leaves = r.u16()?;
    if n_nodes != 2 * usize::from(n_leaves) - 1 {
        return Err(corrupt("tree node count does not match leaf count"));
    }

    let mut nodes = Vec::with_capacity(n_nodes);
    let mut next_leaf_id = 0u16;
    for idx in 0..n_nodes {
        match r.u8()? {
            0 => {
                let feature = r.u32()? as usize;
                if feature >= n_features {
                    return Err(corrupt("split feature out of range"));
                }
                let threshold = r.finite_f64("split threshold")?;
                let left = r.u32()? as usize;
                let right = r.u32()? as usize;
                if left <= idx || right <= idx || left >= n_nodes || right >= n_nodes {
                    return Err(corrupt("child index does not follow its parent"));
                }
                if left == right {
                    return Err(corrupt("internal node with identical children"));
                }
                nodes.push(TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                });
            }
            1 => {
                let leaf_id = r.u16()?;
                if leaf_id != next_leaf_id {
                    return Err(corrupt("leaf ids are not dense in node order"));
                }
                next_leaf_id += 1;
                let value = r.finite_f64("leaf value")?;
                nodes.push(TreeNode::Leaf { leaf_id, value });
            }
            tag => return Err(corrupt(format!("unknown node tag {tag}"))),
        }
    }
    if next_leaf_id != n_leaves {
        return Err(corrupt("leaf count does not match header"));
    }

    // Every node must be reached exactly once from the root; child indices
    // increasing along every path already rules out cycles.
    let mut seen = vec![false; n_nodes];
    let mut stack = vec![0usize];
    let mut visited = 0usize;
    while let Some(idx) = stack.pop() {
        if seen[idx] {
            return Err(corrupt("node referenced by two parents"));
        }
        seen[idx] = true;
        visited += 1;
        if let TreeNode::Internal { left, right, .. } = nodes[idx] {
            stack.push(left);
            stack.push(right);
        }
    }
    if visited != n_nodes {
        return Err(corrupt("unreachable tree nodes"));
    }

    Ok(Tree { nodes, n_leaves })
}

/// Parses a complete model file from memory.
pub fn parse_model(bytes: &[u8]) -> Result<GbdtModel, ModelIoError> {
    // Shortest valid file: magic, version, empty-ish core, flag, checksum.
    if bytes.len() < 16 {
        return Err(corrupt("file too short"));
    }
    if &bytes[..4] != MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    let body = &bytes[..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    if crate::hash::fnv1a64(body) != stored {
        return Err(corrupt("checksum mismatch"));
    }

    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(ModelIoError::VersionMismatch(version));
    }

    let core_start = r.pos;
    let layout_hash = r.u64()?;
    let tau = parse_usize(r.u64()?, "tau")?;

    let config = GbdtConfig {
        num_leaves: parse_usize(r.u64()?, "num_leaves")?,
        learning_rate: r.finite_f64("learning_rate")?,
        feature_fraction: r.finite_f64("feature_fraction")?,
        max_rounds: parse_usize(r.u64()?, "max_rounds")?,
        early_stop_patience: parse_usize(r.u64()?, "early_stop_patience")?,
        min_samples_leaf: parse_usize(r.u64()?, "min_samples_leaf")?,
        l2_lambda: r.finite_f64("l2_lambda")?,
        histogram_bins: parse_usize(r.u64()?, "histogram_bins")?,
        seed: r.u64()?,
    };
    config
        .validate()
        .map_err(|e| corrupt(format!("invalid config: {e}")))?;

    let n_features = parse_usize(r.u64()?, "n_features")?;
    r.check_capacity(n_features, 4)?;
    let mut bin_edges = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let n_edges = r.count_u32(8)?;
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            edges.push(r.finite_f64("bin edge")?);
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(corrupt("bin edges not strictly ascending"));
        }
        bin_edges.push(edges);
    }

    let n_classes = r.count_u32(4)?;
    if n_classes == 0 {
        return Err(corrupt("model with zero classes"));
    }
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        classes.push(r.u32()?);
    }
    if classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(corrupt("class ids not strictly ascending"));
    }
    let mut base_scores = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        base_scores.push(r.finite_f64("base score")?);
    }

    let n_trees = r.count_u32(17)?;
    if n_trees % n_classes != 0 {
        return Err(corrupt("tree count is not a whole number of rounds"));
    }
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        trees.push(parse_tree(&mut r, n_features)?);
    }
    let core_checksum = crate::hash::fnv1a64(&body[core_start..r.pos]);

    let ood = match r.u8()? {
        0 => None,
        1 => {
            let nu = r.finite_f64("nu")?;
            if !(nu > 0.0 && nu <= 1.0) {
                return Err(corrupt("nu out of range"));
            }
            let gamma = r.finite_f64("gamma")?;
            if gamma <= 0.0 {
                return Err(corrupt("gamma out of range"));
            }
            let rho = r.finite_f64("rho")?;
            let model_checksum = r.u64()?;
            if model_checksum != core_checksum {
                return Err(corrupt(
                    "detector section is bound to a different model core",
                ));
            }
            let n_support = r.count_u64(8)?;
            if n_support == 0 {
                return Err(corrupt("detector with no support vectors"));
            }
            let emb_len = parse_usize(r.u64()?, "embedding length")?;
            if emb_len != trees.len() {
                return Err(corrupt("embedding length does not match tree count"));
            }
            let mut alphas = Vec::with_capacity(n_support);
            for _ in 0..n_support {
                let a = r.finite_f64("alpha")?;
                if a <= 0.0 {
                    return Err(corrupt("non-positive alpha"));
                }
                alphas.push(a);
            }
            let total: f64 = alphas.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(corrupt("alphas do not sum to 1"));
            }
            r.check_capacity(n_support.saturating_mul(emb_len), 2)?;
            let mut support_embeddings = Vec::with_capacity(n_support);
            for _ in 0..n_support {
                let mut emb = Vec::with_capacity(emb_len);
                for _ in 0..emb_len {
                    emb.push(r.u16()?);
                }
                support_embeddings.push(emb);
            }
            Some(OodDetector {
                support_embeddings,
                alphas,
                rho,
                nu,
                gamma,
                model_checksum,
            })
        }
        tag => return Err(corrupt(format!("unknown detector flag {tag}"))),
    };

    if r.remaining() != 0 {
        return Err(corrupt("trailing bytes after model"));
    }

    Ok(GbdtModel {
        config,
        tau,
        layout_hash,
        n_features,
        classes,
        base_scores,
        bin_edges,
        trees,
        ood,
    })
}

//! Attributed-network data model: schema, graph, label masks, user
//! partitions, one-hot features, adjacency normalization, and label splits.
//!
//! Conventions: attribute labels are 1-based integers, 0 means missing. The
//! feature matrix concatenates one one-hot block per attribute type; a
//! missing or masked cell contributes an all-zero block.

mod io;
pub mod synth;

pub use io::{load_graph, load_schema, write_graph};
pub use synth::{benchmark_schema, generate_synthetic, SyntheticGraph};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Rng, SparseMatrix};

/// One attribute type (e.g. gender) with its ordered label vocabulary.
/// Label value `i + 1` corresponds to `labels[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeType {
    pub name: String,
    pub labels: Vec<String>,
}

/// Ordered attribute types plus the derived one-hot column layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSchema {
    types: Vec<AttributeType>,
    offsets: Vec<usize>,
    total_labels: usize,
}

impl AttributeSchema {
    pub fn new(types: Vec<AttributeType>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::Schema("schema has no attribute types".into()));
        }
        let mut offsets = Vec::with_capacity(types.len());
        let mut total = 0;
        for t in &types {
            if t.labels.len() < 2 {
                return Err(Error::Schema(format!(
                    "attribute '{}' has {} labels; every attribute needs at least 2",
                    t.name,
                    t.labels.len()
                )));
            }
            offsets.push(total);
            total += t.labels.len();
        }
        Ok(AttributeSchema {
            types,
            offsets,
            total_labels: total,
        })
    }

    /// Convenience constructor with synthesized label names.
    pub fn from_counts(counts: &[(&str, usize)]) -> Result<Self> {
        let types = counts
            .iter()
            .map(|&(name, n)| AttributeType {
                name: name.to_string(),
                labels: (1..=n).map(|i| format!("{name}_{i}")).collect(),
            })
            .collect();
        Self::new(types)
    }

    /// Number of attribute types.
    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    /// Total number of attribute labels (one-hot feature width).
    pub fn n_labels(&self) -> usize {
        self.total_labels
    }

    pub fn types(&self) -> &[AttributeType] {
        &self.types
    }

    pub fn label_count(&self, type_idx: usize) -> usize {
        self.types[type_idx].labels.len()
    }

    pub fn offset(&self, type_idx: usize) -> usize {
        self.offsets[type_idx]
    }

    /// Column range `(start, end)` of one attribute type's one-hot block.
    pub fn block(&self, type_idx: usize) -> (usize, usize) {
        let start = self.offsets[type_idx];
        (start, start + self.types[type_idx].labels.len())
    }

    pub fn blocks(&self) -> Vec<(usize, usize)> {
        (0..self.n_types()).map(|j| self.block(j)).collect()
    }

    /// Stable content hash (FNV-1a over a canonical encoding); checkpoints
    /// refuse to load under a different schema.
    pub fn content_hash(&self) -> u64 {
        let mut h = fnv1a_init();
        for t in &self.types {
            h = fnv1a_bytes(h, t.name.as_bytes());
            h = fnv1a_bytes(h, &[0xFF]);
            for l in &t.labels {
                h = fnv1a_bytes(h, l.as_bytes());
                h = fnv1a_bytes(h, &[0xFE]);
            }
        }
        h
    }
}

pub(crate) fn fnv1a_init() -> u64 {
    0xcbf2_9ce4_8422_2325
}

pub(crate) fn fnv1a_bytes(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Undirected attributed graph with per-user integer label assignments
/// (`0` = missing). Edges are stored deduplicated with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    n_users: usize,
    edges: Vec<(usize, usize)>,
    schema: AttributeSchema,
    assignments: Vec<usize>,
}

impl AttributedGraph {
    pub fn new(
        n_users: usize,
        edges: Vec<(usize, usize)>,
        schema: AttributeSchema,
        assignments: Vec<usize>,
    ) -> Result<Self> {
        if assignments.len() != n_users * schema.n_types() {
            return Err(Error::Schema(format!(
                "assignment matrix has {} entries, expected {} users x {} types",
                assignments.len(),
                n_users,
                schema.n_types()
            )));
        }
        for (idx, &a) in assignments.iter().enumerate() {
            let user = idx / schema.n_types();
            let type_idx = idx % schema.n_types();
            if a > schema.label_count(type_idx) {
                return Err(Error::Schema(format!(
                    "user {} has label {} for attribute '{}' which only has {} labels",
                    user,
                    a,
                    schema.types[type_idx].name,
                    schema.label_count(type_idx)
                )));
            }
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(Error::Schema(format!("self-loop edge on user {u}")));
            }
            if u >= n_users || v >= n_users {
                return Err(Error::Schema(format!(
                    "edge ({u}, {v}) has endpoint outside 0..{n_users}"
                )));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        canonical.dedup();
        Ok(AttributedGraph {
            n_users,
            edges: canonical,
            schema,
            assignments,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    /// Label of `user` for attribute `type_idx`; 0 when missing.
    pub fn assignment(&self, user: usize, type_idx: usize) -> usize {
        self.assignments[user * self.schema.n_types() + type_idx]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// All `(user, type)` cells with an observed (nonzero) label, in
    /// user-major order.
    pub fn observed_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for u in 0..self.n_users {
            for j in 0..self.schema.n_types() {
                if self.assignment(u, j) != 0 {
                    cells.push((u, j));
                }
            }
        }
        cells
    }
}

/// Boolean mask over `(user, attribute-type)` cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    n_users: usize,
    n_types: usize,
    bits: Vec<bool>,
}

impl CellMask {
    pub fn empty(n_users: usize, n_types: usize) -> Self {
        CellMask {
            n_users,
            n_types,
            bits: vec![false; n_users * n_types],
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn get(&self, user: usize, type_idx: usize) -> bool {
        self.bits[user * self.n_types + type_idx]
    }

    pub fn set(&mut self, user: usize, type_idx: usize, value: bool) {
        self.bits[user * self.n_types + type_idx] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Set cells in user-major order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n_users {
            for j in 0..self.n_types {
                if self.get(u, j) {
                    out.push((u, j));
                }
            }
        }
        out
    }

    pub fn intersects(&self, other: &CellMask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(&a, &b)| a && b)
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = fnv1a_init();
        for &b in &self.bits {
            h = fnv1a_bytes(h, &[b as u8]);
        }
        h
    }
}

/// Disjoint train/validation/test visibility masks over observed cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    pub train: CellMask,
    pub val: CellMask,
    pub test: CellMask,
}

impl LabelMask {
    pub fn fingerprint(&self) -> u64 {
        let mut h = fnv1a_init();
        for m in [&self.train, &self.val, &self.test] {
            h = fnv1a_bytes(h, &m.fingerprint().to_le_bytes());
        }
        h
    }
}

/// Users whose every attribute type is train-visible (`labeled`) versus the
/// rest. Computed from the training view, never from the raw data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserPartition {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

/// One-hot feature matrix `N x F` from the train-visible cells only.
pub fn build_feature_matrix(g: &AttributedGraph, train: &CellMask) -> Result<DenseMatrix> {
    if train.n_users() != g.n_users() || train.n_types() != g.schema().n_types() {
        return Err(Error::Schema(format!(
            "mask is {}x{} but graph is {}x{}",
            train.n_users(),
            train.n_types(),
            g.n_users(),
            g.schema().n_types()
        )));
    }
    let schema = g.schema();
    let mut x = DenseMatrix::zeros(g.n_users(), schema.n_labels());
    for u in 0..g.n_users() {
        for j in 0..schema.n_types() {
            let a = g.assignment(u, j);
            if a != 0 && train.get(u, j) {
                x.set(u, schema.offset(j) + a - 1, 1.0);
            }
        }
    }
    Ok(x)
}

/// Symmetrically normalized adjacency over `A + I`: entry `(i, j)` is
/// `1/sqrt(d_i * d_j)` with `d` the self-loop-augmented degree. Self-loops
/// keep the normalization defined for isolated users.
pub fn normalize_adjacency(g: &AttributedGraph) -> SparseMatrix {
    let n = g.n_users();
    let mut degree = vec![1.0_f64; n];
    for &(u, v) in g.edges() {
        degree[u] += 1.0;
        degree[v] += 1.0;
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| 1.0 / d.sqrt()).collect();
    let mut entries = Vec::with_capacity(2 * g.edges().len() + n);
    for (i, &w) in inv_sqrt.iter().enumerate() {
        entries.push((i, i, w * w));
    }
    for &(u, v) in g.edges() {
        let w = inv_sqrt[u] * inv_sqrt[v];
        entries.push((u, v, w));
        entries.push((v, u, w));
    }
    SparseMatrix::from_entries(n, n, entries, true)
        .expect("normalized adjacency entries are unique and symmetric by construction")
}

/// Shuffles the observed cells and partitions them by ratio into disjoint
/// train/validation/test masks. Edges are untouched; only attribute labels
/// are split.
pub fn split_labels(
    g: &AttributedGraph,
    ratios: (f64, f64, f64),
    rng: &mut Rng,
) -> Result<LabelMask> {
    let (r_train, r_val, r_test) = ratios;
    if r_train <= 0.0 || r_val <= 0.0 || r_test <= 0.0 {
        return Err(Error::Config(format!(
            "split ratios must all be positive, got ({r_train}, {r_val}, {r_test})"
        )));
    }
    if (r_train + r_val + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must sum to 1, got {}",
            r_train + r_val + r_test
        )));
    }
    let mut cells = g.observed_cells();
    rng.shuffle(&mut cells);
    let n = cells.len();
    let n_train = (r_train * n as f64).floor() as usize;
    let n_val = (r_val * n as f64).floor() as usize;
    let n_test = n - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::Config(format!(
            "split over {n} observed cells leaves an empty subset ({n_train}/{n_val}/{n_test})"
        )));
    }
    let l = g.schema().n_types();
    let mut mask = LabelMask {
        train: CellMask::empty(g.n_users(), l),
        val: CellMask::empty(g.n_users(), l),
        test: CellMask::empty(g.n_users(), l),
    };
    for (idx, &(u, j)) in cells.iter().enumerate() {
        if idx < n_train {
            mask.train.set(u, j, true);
        } else if idx < n_train + n_val {
            mask.val.set(u, j, true);
        } else {
            mask.test.set(u, j, true);
        }
    }
    Ok(mask)
}

/// Thins the training mask down to `floor(keep_fraction * total)` cells,
/// where `total` counts every cell the mask triple covers (the observed
/// cells of an unsparsified split). Validation and test masks are untouched;
/// `keep_fraction = 1` is the identity.
pub fn sparsify_train_labels(
    mask: &LabelMask,
    keep_fraction: f64,
    rng: &mut Rng,
) -> Result<LabelMask> {
    if keep_fraction <= 0.0 || keep_fraction > 1.0 {
        return Err(Error::Config(format!(
            "keep fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    if keep_fraction == 1.0 {
        return Ok(mask.clone());
    }
    let total = mask.train.count() + mask.val.count() + mask.test.count();
    let target = (keep_fraction * total as f64).floor() as usize;
    let mut train_cells = mask.train.cells();
    if target > train_cells.len() {
        return Err(Error::Config(format!(
            "cannot retain {target} of {total} observed cells: only {} are in the training mask",
            train_cells.len()
        )));
    }
    rng.shuffle(&mut train_cells);
    let mut train = CellMask::empty(mask.train.n_users(), mask.train.n_types());
    for &(u, j) in train_cells.iter().take(target) {
        train.set(u, j, true);
    }
    Ok(LabelMask {
        train,
        val: mask.val.clone(),
        test: mask.test.clone(),
    })
}

/// Splits users into `labeled` (every attribute type train-visible and
/// nonzero) and the complement. Errors when no user qualifies, since the
/// adversarial objective needs at least one positive example.
pub fn partition_users(g: &AttributedGraph, train: &CellMask) -> Result<UserPartition> {
    let l = g.schema().n_types();
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for u in 0..g.n_users() {
        let complete = (0..l).all(|j| train.get(u, j) && g.assignment(u, j) != 0);
        if complete {
            labeled.push(u);
        } else {
            unlabeled.push(u);
        }
    }
    if labeled.is_empty() {
        return Err(Error::Config(
            "no fully train-visible users: the adversarial objective has no positive examples"
                .into(),
        ));
    }
    Ok(UserPartition { labeled, unlabeled })
}

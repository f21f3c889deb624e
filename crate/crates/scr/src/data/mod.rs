//! Datasets: click matrices, item embeddings, style labels, the sampling
//! procedures that derive user-level training data from them, holdout
//! splitting, and the planted-style synthetic generator.

pub mod io;
pub mod sample;
pub mod synth;
pub mod text;

use crate::error::{Result, ScrError};
use crate::nncore::Tensor2;
use crate::Real;
use std::collections::HashMap;

/// Sparse binary user×item interaction matrix. Per-user item indices are
/// kept in insertion order so "last k items" inference has a notion of
/// recency; duplicates are rejected at insert.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickMatrix {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    clicks: Vec<Vec<usize>>,
}

impl ClickMatrix {
    pub fn new(user_ids: Vec<String>, item_ids: Vec<String>) -> Self {
        let n = user_ids.len();
        Self {
            user_ids,
            item_ids,
            clicks: vec![Vec::new(); n],
        }
    }

    /// Inserts one interaction; returns false when it was already present.
    pub fn insert(&mut self, user: usize, item: usize) -> bool {
        assert!(user < self.user_ids.len() && item < self.item_ids.len());
        let row = &mut self.clicks[user];
        if row.contains(&item) {
            return false;
        }
        row.push(item);
        true
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn user_id(&self, u: usize) -> &str {
        &self.user_ids[u]
    }

    pub fn item_id(&self, i: usize) -> &str {
        &self.item_ids[i]
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_items(&self, u: usize) -> &[usize] {
        &self.clicks[u]
    }

    pub fn interaction_count(&self) -> usize {
        self.clicks.iter().map(Vec::len).sum()
    }

    /// New matrix over the given user subset; item indexing is unchanged.
    pub fn restrict_users(&self, users: &[usize]) -> Self {
        Self {
            user_ids: users.iter().map(|&u| self.user_ids[u].clone()).collect(),
            item_ids: self.item_ids.clone(),
            clicks: users.iter().map(|&u| self.clicks[u].clone()).collect(),
        }
    }
}

/// Dense item×D content embedding table.
#[derive(Debug, Clone)]
pub struct ItemEmbeddingTable {
    item_ids: Vec<String>,
    vectors: Tensor2<Real>,
    index: HashMap<String, usize>,
}

impl ItemEmbeddingTable {
    pub fn new(item_ids: Vec<String>, vectors: Tensor2<Real>) -> Result<Self> {
        if item_ids.len() != vectors.rows() {
            return Err(ScrError::Shape(format!(
                "{} item ids for {} embedding rows",
                item_ids.len(),
                vectors.rows()
            )));
        }
        vectors.check_finite("item embeddings")?;
        let mut index = HashMap::with_capacity(item_ids.len());
        for (i, id) in item_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(ScrError::Data(format!("duplicate item id '{id}'")));
            }
        }
        Ok(Self {
            item_ids,
            vectors,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn row(&self, r: usize) -> &[Real] {
        self.vectors.row(r)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// Resolves click-matrix item indices to embedding rows once, so the hot
/// sampling paths avoid string lookups.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex<'a> {
    table: &'a ItemEmbeddingTable,
    rows: Vec<usize>,
}

impl<'a> EmbeddingIndex<'a> {
    pub fn build(clicks: &ClickMatrix, table: &'a ItemEmbeddingTable) -> Result<Self> {
        let rows = clicks
            .item_ids()
            .iter()
            .map(|id| {
                table
                    .index_of(id)
                    .ok_or_else(|| ScrError::Data(format!("item '{id}' has no embedding")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { table, rows })
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn vector(&self, item: usize) -> &[Real] {
        self.table.row(self.rows[item])
    }
}

/// Sparse multi-label item×style binary matrix over a labeled subset of the
/// catalog. Items are keyed by id so the matrix survives re-indexing of the
/// click matrix (filtering).
#[derive(Debug, Clone)]
pub struct StyleLabelMatrix {
    item_ids: Vec<String>,
    style_names: Vec<String>,
    labels: Vec<Vec<bool>>,
    index: HashMap<String, usize>,
}

impl StyleLabelMatrix {
    pub fn new(
        item_ids: Vec<String>,
        style_names: Vec<String>,
        labels: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if item_ids.len() != labels.len() {
            return Err(ScrError::Shape(format!(
                "{} label rows for {} items",
                labels.len(),
                item_ids.len()
            )));
        }
        let s = style_names.len();
        let mut index = HashMap::with_capacity(item_ids.len());
        for (i, (id, row)) in item_ids.iter().zip(&labels).enumerate() {
            if row.len() != s {
                return Err(ScrError::Shape(format!(
                    "label row for '{id}' has {} styles, expected {s}",
                    row.len()
                )));
            }
            if !row.iter().any(|&b| b) {
                return Err(ScrError::Data(format!("labeled item '{id}' has no style")));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(ScrError::Data(format!("duplicate labeled item '{id}'")));
            }
        }
        Ok(Self {
            item_ids,
            style_names,
            labels,
            index,
        })
    }

    pub fn empty(style_names: Vec<String>) -> Self {
        Self {
            item_ids: Vec::new(),
            style_names,
            labels: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn n_styles(&self) -> usize {
        self.style_names.len()
    }

    pub fn n_labeled(&self) -> usize {
        self.item_ids.len()
    }

    pub fn style_names(&self) -> &[String] {
        &self.style_names
    }

    pub fn styles_for(&self, item_id: &str) -> Option<&[bool]> {
        self.index.get(item_id).map(|&i| self.labels[i].as_slice())
    }

    /// Per click-matrix item: its label row, if the item is labeled.
    pub fn label_rows_for(&self, clicks: &ClickMatrix) -> Vec<Option<&[bool]>> {
        clicks
            .item_ids()
            .iter()
            .map(|id| self.styles_for(id))
            .collect()
    }
}

/// User content vectors paired with thresholded multi-label style profiles,
/// as produced by the label-propagation sampling procedure.
#[derive(Debug, Clone)]
pub struct LabeledProfileDataset {
    /// N×D content vectors.
    pub vectors: Tensor2<Real>,
    /// N×S binary profiles.
    pub profiles: Tensor2<Real>,
    /// Item indices (into the source click matrix) each sample averaged over,
    /// kept so profiles can be recomputed and audited.
    pub sampled_items: Vec<Vec<usize>>,
    pub style_names: Vec<String>,
}

impl LabeledProfileDataset {
    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 80/20-style holdout: heldout users keep their fold-in interactions in the
/// training matrix; the masked remainder is the recovery target.
#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    /// Full user set; heldout users reduced to their fold-in items.
    pub train: ClickMatrix,
    pub heldout_users: Vec<usize>,
    /// Parallel to `heldout_users`.
    pub foldin: Vec<Vec<usize>>,
    pub masked: Vec<Vec<usize>>,
}

/// Alternating user/item filtering iterated to a fixed point: every surviving
/// user has ≥ `min_items_per_user` interactions among surviving items and
/// every surviving item has ≥ `min_users_per_item` surviving users.
pub fn filter_interactions(
    clicks: &ClickMatrix,
    min_items_per_user: usize,
    min_users_per_item: usize,
) -> Result<ClickMatrix> {
    if min_items_per_user < 1 || min_users_per_item < 1 {
        return Err(ScrError::Config("filter thresholds must be >= 1".into()));
    }
    let mut keep_user = vec![true; clicks.n_users()];
    let mut keep_item = vec![true; clicks.n_items()];
    loop {
        let mut changed = false;
        for u in 0..clicks.n_users() {
            if !keep_user[u] {
                continue;
            }
            let deg = clicks.user_items(u).iter().filter(|&&i| keep_item[i]).count();
            if deg < min_items_per_user {
                keep_user[u] = false;
                changed = true;
            }
        }
        let mut item_deg = vec![0usize; clicks.n_items()];
        for u in 0..clicks.n_users() {
            if !keep_user[u] {
                continue;
            }
            for &i in clicks.user_items(u) {
                item_deg[i] += 1;
            }
        }
        for i in 0..clicks.n_items() {
            if keep_item[i] && item_deg[i] < min_users_per_item {
                keep_item[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let users: Vec<usize> = (0..clicks.n_users()).filter(|&u| keep_user[u]).collect();
    let items: Vec<usize> = (0..clicks.n_items()).filter(|&i| keep_item[i]).collect();
    if users.is_empty() || items.is_empty() {
        return Err(ScrError::Data(format!(
            "filtering ({min_items_per_user}, {min_users_per_item}) removed everything; lower the thresholds"
        )));
    }
    let mut item_map = vec![usize::MAX; clicks.n_items()];
    for (new, &old) in items.iter().enumerate() {
        item_map[old] = new;
    }
    let mut out = ClickMatrix::new(
        users.iter().map(|&u| clicks.user_id(u).to_string()).collect(),
        items.iter().map(|&i| clicks.item_id(i).to_string()).collect(),
    );
    for (new_u, &u) in users.iter().enumerate() {
        for &i in clicks.user_items(u) {
            if keep_item[i] {
                out.insert(new_u, item_map[i]);
            }
        }
    }
    Ok(out)
}

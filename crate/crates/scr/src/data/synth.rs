//! Planted-style synthetic generator: orthonormal style centroids, items with
//! 1–3 styles whose embeddings sit near their centroid mean, users with 1–2
//! dominant style preferences, and clicks drawn by preference–style affinity.
//! Sized so the full pipeline runs at desk scale.

use super::{ClickMatrix, ItemEmbeddingTable, StyleLabelMatrix};
use crate::error::{Result, ScrError};
use crate::nncore::Tensor2;
use crate::Real;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Style vocabulary for generated datasets; extended with numbered names when
/// more than eight styles are requested.
const STYLE_NAMES: &[&str] = &[
    "Modern",
    "Traditional",
    "Rustic",
    "Coastal",
    "Glam",
    "Industrial",
    "Bohemian",
    "MidCentury",
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_styles: usize,
    pub dim: usize,
    /// Expected clicked fraction of the catalog per user.
    pub density: Real,
    /// Per-dimension std of the Gaussian noise added to item embeddings.
    pub noise: Real,
    /// Fraction of items that carry entries in the style label matrix.
    pub label_frac: Real,
    /// Fraction of items associated with two to three styles.
    pub multi_style_rate: Real,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 2000,
            n_items: 500,
            n_styles: 8,
            dim: 32,
            density: 0.06,
            noise: 0.1,
            label_frac: 0.2,
            multi_style_rate: 0.137,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub clicks: ClickMatrix,
    pub embeddings: ItemEmbeddingTable,
    pub labels: StyleLabelMatrix,
    /// Ground-truth user preference over styles (rows sum to 1).
    pub truth: Tensor2<Real>,
    /// Per-item style sets, for generator audits.
    pub item_styles: Vec<Vec<usize>>,
}

pub fn style_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|s| {
            STYLE_NAMES
                .get(s)
                .map(|&name| name.to_string())
                .unwrap_or_else(|| format!("Style{s}"))
        })
        .collect()
}

pub fn synth_generate<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Result<SynthData> {
    if cfg.n_styles > cfg.n_items {
        return Err(ScrError::Config("need at least one item per style".into()));
    }
    if cfg.n_styles > cfg.dim {
        return Err(ScrError::Config(
            "embedding dim must be >= number of styles for orthogonal centroids".into(),
        ));
    }
    let expected_clicks = cfg.density * cfg.n_items as Real;
    if expected_clicks < 2.0 {
        return Err(ScrError::Config(format!(
            "density {} over {} items gives under 2 expected clicks per user",
            cfg.density, cfg.n_items
        )));
    }

    let centroids = orthonormal_centroids(cfg.n_styles, cfg.dim, rng);

    // items: style sets and noisy embeddings around the centroid mean
    let mut item_styles: Vec<Vec<usize>> = Vec::with_capacity(cfg.n_items);
    let mut emb_rows: Vec<Vec<Real>> = Vec::with_capacity(cfg.n_items);
    for _ in 0..cfg.n_items {
        let mut styles = vec![rng.random_range(0..cfg.n_styles)];
        if rng.random::<f64>() < cfg.multi_style_rate {
            let extra = 1 + rng.random_range(0..2usize); // two or three total
            while styles.len() < 1 + extra {
                let s = rng.random_range(0..cfg.n_styles);
                if !styles.contains(&s) {
                    styles.push(s);
                }
            }
        }
        styles.sort_unstable();
        let mut v = vec![0.0; cfg.dim];
        for &s in &styles {
            for (a, b) in v.iter_mut().zip(&centroids[s]) {
                *a += b / styles.len() as Real;
            }
        }
        for a in &mut v {
            let g: Real = StandardNormal.sample(rng);
            *a += cfg.noise * g;
        }
        item_styles.push(styles);
        emb_rows.push(v);
    }

    let item_ids: Vec<String> = (0..cfg.n_items).map(|i| format!("item{i:05}")).collect();
    let user_ids: Vec<String> = (0..cfg.n_users).map(|u| format!("user{u:05}")).collect();

    // users: 1–2 dominant styles, normalized preference vector
    let mut truth_rows: Vec<Vec<Real>> = Vec::with_capacity(cfg.n_users);
    for _ in 0..cfg.n_users {
        let mut pref = vec![0.05; cfg.n_styles];
        let first = rng.random_range(0..cfg.n_styles);
        if rng.random::<f64>() < 0.5 {
            pref[first] += 1.0;
        } else {
            let mut second = rng.random_range(0..cfg.n_styles);
            while second == first {
                second = rng.random_range(0..cfg.n_styles);
            }
            pref[first] += 0.55;
            pref[second] += 0.45;
        }
        let sum: Real = pref.iter().sum();
        for p in &mut pref {
            *p /= sum;
        }
        truth_rows.push(pref);
    }

    // clicks: weighted sampling without replacement by style affinity
    let mut clicks = ClickMatrix::new(user_ids, item_ids.clone());
    let base = expected_clicks.round() as usize;
    let lo = (base * 4) / 5;
    let hi = (base * 6) / 5;
    for u in 0..cfg.n_users {
        let pref = &truth_rows[u];
        let weights: Vec<Real> = item_styles
            .iter()
            .map(|styles| {
                let affinity: Real = styles.iter().map(|&s| pref[s]).sum::<Real>()
                    / styles.len() as Real;
                affinity + 0.01
            })
            .collect();
        let total: Real = weights.iter().sum();
        let n_clicks = rng.random_range(lo..=hi).max(2);
        let mut chosen = 0usize;
        let mut guard = 0usize;
        while chosen < n_clicks {
            guard += 1;
            if guard > n_clicks * 200 {
                break; // pathological weights; keep what we have
            }
            let mut x = rng.random::<f64>() * total;
            let mut pick = cfg.n_items - 1;
            for (i, &w) in weights.iter().enumerate() {
                x -= w;
                if x <= 0.0 {
                    pick = i;
                    break;
                }
            }
            if clicks.insert(u, pick) {
                chosen += 1;
            }
        }
    }

    // labels over a configurable item fraction
    let n_labeled = ((cfg.label_frac * cfg.n_items as Real).floor() as usize).max(1);
    let mut labeled: Vec<usize> = index::sample(rng, cfg.n_items, n_labeled).iter().collect();
    labeled.sort_unstable();
    let names = style_names(cfg.n_styles);
    let labels = StyleLabelMatrix::new(
        labeled.iter().map(|&i| item_ids[i].clone()).collect(),
        names,
        labeled
            .iter()
            .map(|&i| {
                (0..cfg.n_styles)
                    .map(|s| item_styles[i].contains(&s))
                    .collect()
            })
            .collect(),
    )?;

    let embeddings = ItemEmbeddingTable::new(item_ids, Tensor2::from_rows(&emb_rows)?)?;
    Ok(SynthData {
        clicks,
        embeddings,
        labels,
        truth: Tensor2::from_rows(&truth_rows)?,
        item_styles,
    })
}

fn orthonormal_centroids<R: Rng>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<Real>> {
    let mut centroids: Vec<Vec<Real>> = Vec::with_capacity(n);
    while centroids.len() < n {
        let mut v: Vec<Real> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for c in &centroids {
            let dot: Real = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(c) {
                *a -= dot * b;
            }
        }
        let norm: Real = v.iter().map(|x| x * x).sum::<Real>().sqrt();
        if norm < 1e-6 {
            continue; // degenerate draw, redo
        }
        for a in &mut v {
            *a /= norm;
        }
        centroids.push(v);
    }
    centroids
}

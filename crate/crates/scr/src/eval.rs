//! Ranking metrics on the masked holdout, per-style AUC, style distribution
//! and correlation reports, and the content-sample variance study.

use crate::clickvae::{recommend, ClickVaeModel, RecommendMode};
use crate::data::sample::user_content_vector;
use crate::data::{ClickMatrix, EmbeddingIndex, HoldoutSplit, LabeledProfileDataset};
use crate::error::{Result, ScrError};
use crate::nncore::Tensor2;
use crate::textenc::TextEncoderModel;
use crate::Real;
use rand::Rng;
use std::collections::HashSet;

/// Binary-relevance NDCG at `k`. `None` when the relevant set is empty.
pub fn ndcg_at_k(ranked: &[usize], relevant: &HashSet<usize>, k: usize) -> Option<Real> {
    if relevant.is_empty() {
        return None;
    }
    let dcg: Real = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(r, _)| 1.0 / ((r + 2) as Real).log2())
        .sum();
    let idcg: Real = (0..k.min(relevant.len()))
        .map(|r| 1.0 / ((r + 2) as Real).log2())
        .sum();
    Some(dcg / idcg)
}

/// |top-k ∩ relevant| / min(k, |relevant|). `None` when relevant is empty.
pub fn recall_at_k(ranked: &[usize], relevant: &HashSet<usize>, k: usize) -> Option<Real> {
    if relevant.is_empty() {
        return None;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|item| relevant.contains(item))
        .count();
    Some(hits as Real / k.min(relevant.len()) as Real)
}

/// Rank-sum AUC with ties counted 0.5. `None` when only one class is present.
pub fn auc(scores: &[Real], labels: &[bool]) -> Option<Real> {
    assert_eq!(scores.len(), labels.len(), "auc: length mismatch");
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // average ranks over tie groups (1-based)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as Real / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as Real / 2.0;
    Some(u / (n_pos as Real * n_neg as Real))
}

/// Column-pairwise Pearson correlations; entries touching a zero-variance
/// column are NaN (absent).
pub fn pearson_matrix(profiles: &Tensor2<Real>) -> Tensor2<Real> {
    let n = profiles.rows();
    let s = profiles.cols();
    let mut mean = vec![0.0; s];
    for r in 0..n {
        for (m, &v) in mean.iter_mut().zip(profiles.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as Real;
    }
    let mut cov: Tensor2<Real> = Tensor2::zeros(s, s);
    for r in 0..n {
        let row = profiles.row(r);
        for a in 0..s {
            let da = row[a] - mean[a];
            for b in a..s {
                let v = cov.get(a, b) + da * (row[b] - mean[b]);
                cov.set(a, b, v);
            }
        }
    }
    let mut out = Tensor2::zeros(s, s);
    for a in 0..s {
        for b in a..s {
            let va = cov.get(a, a);
            let vb = cov.get(b, b);
            let r = if n < 2 || va <= 0.0 || vb <= 0.0 {
                Real::NAN
            } else {
                cov.get(a, b) / (va * vb).sqrt()
            };
            out.set(a, b, r);
            out.set(b, a, r);
        }
    }
    out
}

/// Fraction of samples with each style positive.
pub fn style_distribution_report(dataset: &LabeledProfileDataset) -> Vec<Real> {
    let n = dataset.len();
    let s = dataset.profiles.cols();
    let mut prevalence = vec![0.0; s];
    for r in 0..n {
        for (p, &v) in prevalence.iter_mut().zip(dataset.profiles.row(r)) {
            if v > 0.5 {
                *p += 1.0;
            }
        }
    }
    for p in &mut prevalence {
        *p /= n as Real;
    }
    prevalence
}

/// Mean per-feature variance of k-item user content vectors, per k.
pub fn variance_vs_k_study<R: Rng>(
    embeddings: &EmbeddingIndex,
    clicks: &ClickMatrix,
    k_values: &[usize],
    rng: &mut R,
) -> Result<Vec<(usize, Real)>> {
    if k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ScrError::Config("k values must be strictly ascending".into()));
    }
    let users: Vec<usize> = (0..clicks.n_users())
        .filter(|&u| !clicks.user_items(u).is_empty())
        .collect();
    if users.len() < 2 {
        return Err(ScrError::Data("variance study needs >= 2 users".into()));
    }
    let d = embeddings.dim();
    let mut out = Vec::with_capacity(k_values.len());
    for &k in k_values {
        if k == 0 {
            return Err(ScrError::Config("k must be >= 1".into()));
        }
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for &u in &users {
            let v = user_content_vector(clicks.user_items(u), embeddings, k, rng)?;
            for ((s, q), &x) in sum.iter_mut().zip(sq.iter_mut()).zip(&v) {
                *s += x;
                *q += x * x;
            }
        }
        let n = users.len() as Real;
        let mean_var = sum
            .iter()
            .zip(&sq)
            .map(|(&s, &q)| (q / n - (s / n) * (s / n)).max(0.0))
            .sum::<Real>()
            / d as Real;
        out.push((k, mean_var));
    }
    Ok(out)
}

/// Holdout ranking metrics averaged over evaluable heldout users.
#[derive(Debug, Clone)]
pub struct RankingReport {
    pub ndcg20: Real,
    pub ndcg50: Real,
    pub recall20: Real,
    pub recall50: Real,
    /// (user index, ndcg@20, ndcg@50, recall@20, recall@50)
    pub per_user: Vec<(usize, Real, Real, Real, Real)>,
    /// Heldout users skipped for lack of masked items or fold-in clicks.
    pub skipped_users: usize,
}

pub fn ranking_report<R: Rng>(
    model: &ClickVaeModel<Real>,
    text_encoder: Option<&TextEncoderModel<Real>>,
    split: &HoldoutSplit,
    embeddings: &EmbeddingIndex,
    k: usize,
    mode: RecommendMode,
    rng: &mut R,
) -> Result<RankingReport> {
    let mut per_user = Vec::new();
    let mut skipped = 0usize;
    let mut sums = [0.0; 4];
    for (pos, &u) in split.heldout_users.iter().enumerate() {
        let foldin = &split.foldin[pos];
        let relevant: HashSet<usize> = split.masked[pos].iter().copied().collect();
        if foldin.is_empty() || relevant.is_empty() {
            skipped += 1;
            continue;
        }
        let ranked = recommend(model, text_encoder, foldin, embeddings, k, 50, mode, rng)?;
        let n20 = ndcg_at_k(&ranked, &relevant, 20).unwrap();
        let n50 = ndcg_at_k(&ranked, &relevant, 50).unwrap();
        let r20 = recall_at_k(&ranked, &relevant, 20).unwrap();
        let r50 = recall_at_k(&ranked, &relevant, 50).unwrap();
        sums[0] += n20;
        sums[1] += n50;
        sums[2] += r20;
        sums[3] += r50;
        per_user.push((u, n20, n50, r20, r50));
    }
    if per_user.is_empty() {
        return Err(ScrError::Data("no evaluable heldout users".into()));
    }
    let n = per_user.len() as Real;
    Ok(RankingReport {
        ndcg20: sums[0] / n,
        ndcg50: sums[1] / n,
        recall20: sums[2] / n,
        recall50: sums[3] / n,
        per_user,
        skipped_users: skipped,
    })
}

/// Style prediction quality: per-style AUC of predicted scores against binary
/// targets, target prevalence, and the Pearson matrix of the scores.
#[derive(Debug, Clone)]
pub struct StyleReport {
    pub style_names: Vec<String>,
    /// `None` where targets are single-class.
    pub auc: Vec<Option<Real>>,
    pub prevalence: Vec<Real>,
    pub pearson: Tensor2<Real>,
}

pub fn style_report(
    scores: &Tensor2<Real>,
    targets: &Tensor2<Real>,
    style_names: &[String],
) -> Result<StyleReport> {
    if scores.rows() != targets.rows() || scores.cols() != targets.cols() {
        return Err(ScrError::Shape(format!(
            "scores {}x{} vs targets {}x{}",
            scores.rows(),
            scores.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    if scores.cols() != style_names.len() {
        return Err(ScrError::Shape(format!(
            "{} styles named, {} columns",
            style_names.len(),
            scores.cols()
        )));
    }
    let n = scores.rows();
    let s = scores.cols();
    let mut aucs = Vec::with_capacity(s);
    let mut prevalence = Vec::with_capacity(s);
    for c in 0..s {
        let col: Vec<Real> = (0..n).map(|r| scores.get(r, c)).collect();
        let labels: Vec<bool> = (0..n).map(|r| targets.get(r, c) > 0.5).collect();
        prevalence.push(labels.iter().filter(|&&l| l).count() as Real / n as Real);
        aucs.push(auc(&col, &labels));
    }
    Ok(StyleReport {
        style_names: style_names.to_vec(),
        auc: aucs,
        prevalence,
        pearson: pearson_matrix(scores),
    })
}

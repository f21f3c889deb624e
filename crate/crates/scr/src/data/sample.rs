//! Sampling procedures: user content vectors, the label-propagation training
//! dataset, and the masked holdout split.

use super::{ClickMatrix, EmbeddingIndex, HoldoutSplit, LabeledProfileDataset, StyleLabelMatrix};
use crate::error::{Result, ScrError};
use crate::nncore::Tensor2;
use crate::Real;
use rand::seq::index;
use rand::Rng;

/// Samples `k` of `items` uniformly: without replacement when enough items
/// are available, with replacement otherwise.
pub fn sample_k<R: Rng>(items: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    if items.len() >= k {
        index::sample(rng, items.len(), k)
            .iter()
            .map(|i| items[i])
            .collect()
    } else {
        (0..k).map(|_| items[rng.random_range(0..items.len())]).collect()
    }
}

/// Mean embedding of `k` sampled clicked items.
pub fn user_content_vector<R: Rng>(
    user_clicks: &[usize],
    embeddings: &EmbeddingIndex,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Real>> {
    if user_clicks.is_empty() {
        return Err(ScrError::Data("user has no embeddable items".into()));
    }
    let sampled = sample_k(user_clicks, k, rng);
    Ok(mean_embedding(&sampled, embeddings))
}

pub(crate) fn mean_embedding(items: &[usize], embeddings: &EmbeddingIndex) -> Vec<Real> {
    let mut acc = vec![0.0; embeddings.dim()];
    for &i in items {
        for (a, b) in acc.iter_mut().zip(embeddings.vector(i)) {
            *a += b;
        }
    }
    let inv = 1.0 / items.len() as Real;
    for a in &mut acc {
        *a *= inv;
    }
    acc
}

/// Builds the text-encoder training set: per repeat, per user, sample `k` of
/// the user's *labeled* clicked items, average their embeddings into a
/// content vector and their binary label rows into a raw profile, then
/// binarize at θ = 1/k. Users without labeled clicks are skipped.
///
/// `strict_threshold` switches the comparison from ≥ θ (default, so a single
/// occurrence among k items counts) to > θ.
#[allow(clippy::too_many_arguments)]
pub fn build_labelprop_dataset<R: Rng>(
    train_clicks: &ClickMatrix,
    labels: &StyleLabelMatrix,
    embeddings: &EmbeddingIndex,
    k: usize,
    repeats: usize,
    strict_threshold: bool,
    rng: &mut R,
) -> Result<LabeledProfileDataset> {
    if k < 1 || repeats < 1 {
        return Err(ScrError::Config("k and repeats must be >= 1".into()));
    }
    let label_rows = labels.label_rows_for(train_clicks);
    let s = labels.n_styles();
    let theta = 1.0 / k as Real;
    let mut vectors: Vec<Vec<Real>> = Vec::new();
    let mut profiles: Vec<Vec<Real>> = Vec::new();
    let mut sampled_items: Vec<Vec<usize>> = Vec::new();

    for _ in 0..repeats {
        for u in 0..train_clicks.n_users() {
            let labeled: Vec<usize> = train_clicks
                .user_items(u)
                .iter()
                .copied()
                .filter(|&i| label_rows[i].is_some())
                .collect();
            if labeled.is_empty() {
                continue;
            }
            let sampled = sample_k(&labeled, k, rng);
            let vector = mean_embedding(&sampled, embeddings);
            let mut mass = vec![0.0; s];
            for &i in &sampled {
                for (m, &b) in mass.iter_mut().zip(label_rows[i].expect("labeled")) {
                    if b {
                        *m += theta; // each of the k items contributes 1/k
                    }
                }
            }
            let profile: Vec<Real> = mass
                .iter()
                .map(|&m| {
                    let on = if strict_threshold {
                        m > theta + 1e-12
                    } else {
                        m >= theta - 1e-12
                    };
                    if on {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            vectors.push(vector);
            profiles.push(profile);
            sampled_items.push(sampled);
        }
    }

    if vectors.is_empty() {
        return Err(ScrError::Data(
            "no labeled-profile samples could be built (no user clicks labeled items)".into(),
        ));
    }
    Ok(LabeledProfileDataset {
        vectors: Tensor2::from_rows(&vectors)?,
        profiles: Tensor2::from_rows(&profiles)?,
        sampled_items,
        style_names: labels.style_names().to_vec(),
    })
}

/// Selects `n_heldout_users` uniformly and masks `mask_fraction` of each of
/// their interactions (floor, at least 1, at least 1 left folded in). The
/// training matrix keeps heldout users with only their fold-in items.
pub fn holdout_split<R: Rng>(
    clicks: &ClickMatrix,
    n_heldout_users: usize,
    mask_fraction: Real,
    rng: &mut R,
) -> Result<HoldoutSplit> {
    if n_heldout_users >= clicks.n_users() {
        return Err(ScrError::Config(format!(
            "cannot hold out {} of {} users",
            n_heldout_users,
            clicks.n_users()
        )));
    }
    if !(0.0..1.0).contains(&mask_fraction) {
        return Err(ScrError::Config(format!(
            "mask fraction must be in [0,1), got {mask_fraction}"
        )));
    }
    let eligible: Vec<usize> = (0..clicks.n_users())
        .filter(|&u| clicks.user_items(u).len() >= 2)
        .collect();
    if eligible.len() < n_heldout_users {
        return Err(ScrError::Data(format!(
            "only {} users have >= 2 interactions, cannot hold out {}",
            eligible.len(),
            n_heldout_users
        )));
    }
    let mut heldout: Vec<usize> = index::sample(rng, eligible.len(), n_heldout_users)
        .iter()
        .map(|i| eligible[i])
        .collect();
    heldout.sort_unstable();

    let mut is_heldout = vec![false; clicks.n_users()];
    for &u in &heldout {
        is_heldout[u] = true;
    }
    let mut train = ClickMatrix::new(
        (0..clicks.n_users())
            .map(|u| clicks.user_id(u).to_string())
            .collect(),
        clicks.item_ids().to_vec(),
    );
    let mut foldin = Vec::with_capacity(heldout.len());
    let mut masked = Vec::with_capacity(heldout.len());

    for u in 0..clicks.n_users() {
        let items = clicks.user_items(u);
        if !is_heldout[u] {
            for &i in items {
                train.insert(u, i);
            }
            continue;
        }
        let n = items.len();
        let n_mask = ((mask_fraction * n as Real).floor() as usize).clamp(1, n - 1);
        let mask_pos: std::collections::BTreeSet<usize> =
            index::sample(rng, n, n_mask).iter().collect();
        let mut f = Vec::with_capacity(n - n_mask);
        let mut m = Vec::with_capacity(n_mask);
        for (pos, &item) in items.iter().enumerate() {
            if mask_pos.contains(&pos) {
                m.push(item);
            } else {
                f.push(item);
                train.insert(u, item);
            }
        }
        foldin.push(f);
        masked.push(m);
    }

    Ok(HoldoutSplit {
        train,
        heldout_users: heldout,
        foldin,
        masked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ItemEmbeddingTable;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(vectors: Vec<Vec<Real>>) -> ItemEmbeddingTable {
        let ids = (0..vectors.len()).map(|i| format!("i{i}")).collect();
        ItemEmbeddingTable::new(ids, Tensor2::from_rows(&vectors).unwrap()).unwrap()
    }

    fn toy_clicks(rows: &[&[usize]], n_items: usize) -> ClickMatrix {
        let mut m = ClickMatrix::new(
            (0..rows.len()).map(|u| format!("u{u}")).collect(),
            (0..n_items).map(|i| format!("i{i}")).collect(),
        );
        for (u, items) in rows.iter().enumerate() {
            for &i in *items {
                m.insert(u, i);
            }
        }
        m
    }

    #[test]
    fn identical_vectors_average_exactly() {
        let tab = table(vec![vec![0.5, -1.5]; 4]);
        let clicks = toy_clicks(&[&[0, 1, 2, 3]], 4);
        let emb = EmbeddingIndex::build(&clicks, &tab).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = user_content_vector(clicks.user_items(0), &emb, 3, &mut rng).unwrap();
        assert_eq!(v, vec![0.5, -1.5]);
    }

    #[test]
    fn seeded_sampling_replays() {
        let tab = table(vec![vec![1.0], vec![2.0], vec![4.0]]);
        let clicks = toy_clicks(&[&[0, 1, 2]], 3);
        let emb = EmbeddingIndex::build(&clicks, &tab).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let v1 = user_content_vector(clicks.user_items(0), &emb, 2, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let v2 = user_content_vector(clicks.user_items(0), &emb, 2, &mut r2).unwrap();
        assert_eq!(v1, v2);
        // the value is a mean of exactly 2 of the 3 item vectors
        let valid = [1.5, 2.5, 3.0, 1.0, 2.0, 4.0];
        assert!(valid.iter().any(|&x| (x - v1[0]).abs() < 1e-12));
    }

    #[test]
    fn fewer_than_k_samples_with_replacement() {
        let items = [7usize, 9];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_k(&items, 5, &mut rng);
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|i| items.contains(i)));
    }

    #[test]
    fn empty_clicks_is_an_error() {
        let tab = table(vec![vec![1.0]]);
        let clicks = toy_clicks(&[&[0]], 1);
        let emb = EmbeddingIndex::build(&clicks, &tab).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(user_content_vector(&[], &emb, 2, &mut rng).is_err());
    }

    fn toy_labels(n_styles: usize, rows: &[(usize, &[usize])]) -> StyleLabelMatrix {
        let names = (0..n_styles).map(|s| format!("s{s}")).collect();
        let ids = rows.iter().map(|(i, _)| format!("i{i}")).collect();
        let labels = rows
            .iter()
            .map(|(_, on)| (0..n_styles).map(|s| on.contains(&s)).collect())
            .collect();
        StyleLabelMatrix::new(ids, names, labels).unwrap()
    }

    #[test]
    fn threshold_one_of_k_counts_with_geq() {
        // 5 labeled items: one carries style 1, four carry style 0. With k=5
        // drawn without replacement the raw mass of style 1 is exactly 1/5=θ.
        let tab = table(vec![vec![0.0]; 5]);
        let clicks = toy_clicks(&[&[0, 1, 2, 3, 4]], 5);
        let emb = EmbeddingIndex::build(&clicks, &tab).unwrap();
        let labels = toy_labels(
            2,
            &[(0, &[0]), (1, &[0]), (2, &[0]), (3, &[0]), (4, &[1])],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = build_labelprop_dataset(&clicks, &labels, &emb, 5, 1, false, &mut rng).unwrap();
        assert_eq!(ds.profiles.row(0), &[1.0, 1.0]);
        // strict ">" drops the 1-of-k style
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ds = build_labelprop_dataset(&clicks, &labels, &emb, 5, 1, true, &mut rng).unwrap();
        assert_eq!(ds.profiles.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn identical_single_style_items_give_one_hot() {
        let tab = table(vec![vec![0.0]; 3]);
        let clicks = toy_clicks(&[&[0, 1, 2]], 3);
        let emb = EmbeddingIndex::build(&clicks, &tab).unwrap();
        let labels = toy_labels(3, &[(0, &[2]), (1, &[2]), (2, &[2])]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = build_labelprop_dataset(&clicks, &labels, &emb, 5, 1, false, &mut rng).unwrap();
        assert_eq!(ds.profiles.row(0), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn direct_threshold_masses() {
        // k=5 drawn without replacement from 5 items gives style masses
        // (0.4, 0.2, 0.4, 0.0), which θ=0.2 binarizes to (1, 1, 1, 0).
        let tab = table(vec![vec![0.0]; 5]);
        let clicks = toy_clicks(&[&[0, 1, 2, 3, 4]], 5);
        let emb = EmbeddingIndex::build(&clicks, &tab).unwrap();
        let labels = toy_labels(
            4,
            &[(0, &[0]), (1, &[0]), (2, &[1]), (3, &[2]), (4, &[2])],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = build_labelprop_dataset(&clicks, &labels, &emb, 5, 1, false, &mut rng).unwrap();
        assert_eq!(ds.profiles.row(0), &[1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn profiles_recomputable_from_sampled_items() {
        let tab = table((0..6).map(|i| vec![i as Real]).collect());
        let clicks = toy_clicks(&[&[0, 1, 2], &[2, 3, 4, 5], &[1, 5]], 6);
        let emb = EmbeddingIndex::build(&clicks, &tab).unwrap();
        let labels = toy_labels(2, &[(0, &[0]), (2, &[0, 1]), (4, &[1]), (5, &[0])]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ds = build_labelprop_dataset(&clicks, &labels, &emb, 3, 4, false, &mut rng).unwrap();
        let rows = labels.label_rows_for(&clicks);
        for (n, sampled) in ds.sampled_items.iter().enumerate() {
            assert_eq!(sampled.len(), 3);
            let mut mass = [0.0; 2];
            for &i in sampled {
                for (m, &b) in mass.iter_mut().zip(rows[i].unwrap()) {
                    if b {
                        *m += 1.0 / 3.0;
                    }
                }
            }
            for s in 0..2 {
                let want = if mass[s] >= 1.0 / 3.0 - 1e-12 { 1.0 } else { 0.0 };
                assert_eq!(ds.profiles.get(n, s), want);
            }
            // every profile has at least one positive style
            assert!(ds.profiles.row(n).iter().any(|&v| v == 1.0));
        }
    }

    #[test]
    fn no_labeled_clicks_is_an_error() {
        let tab = table(vec![vec![0.0]; 2]);
        let clicks = toy_clicks(&[&[0], &[1]], 2);
        let emb = EmbeddingIndex::build(&clicks, &tab).unwrap();
        let labels = StyleLabelMatrix::empty(vec!["a".into()]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(
            build_labelprop_dataset(&clicks, &labels, &emb, 2, 1, false, &mut rng).is_err()
        );
    }

    #[test]
    fn holdout_masks_floor_of_fraction() {
        let items: Vec<usize> = (0..15).collect();
        let clicks = toy_clicks(&[&items, &items, &items], 15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let split = holdout_split(&clicks, 1, 0.2, &mut rng).unwrap();
        assert_eq!(split.heldout_users.len(), 1);
        assert_eq!(split.masked[0].len(), 3);
        assert_eq!(split.foldin[0].len(), 12);
        let u = split.heldout_users[0];
        // disjoint and complete
        for &m in &split.masked[0] {
            assert!(!split.foldin[0].contains(&m));
            assert!(!split.train.user_items(u).contains(&m));
        }
        assert_eq!(split.foldin[0].len() + split.masked[0].len(), 15);
        // non-heldout users untouched
        for v in 0..3 {
            if v != u {
                assert_eq!(split.train.user_items(v).len(), 15);
            }
        }
    }

    #[test]
    fn tiny_fraction_still_masks_one() {
        let clicks = toy_clicks(&[&[0, 1], &[0, 1], &[1, 2]], 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let split = holdout_split(&clicks, 2, 0.0001, &mut rng).unwrap();
        for m in &split.masked {
            assert_eq!(m.len(), 1);
        }
        for f in &split.foldin {
            assert_eq!(f.len(), 1);
        }
    }

    #[test]
    fn same_seed_same_split() {
        let items: Vec<usize> = (0..10).collect();
        let rows: Vec<&[usize]> = (0..8).map(|_| items.as_slice()).collect();
        let clicks = toy_clicks(&rows, 10);
        let a = holdout_split(&clicks, 3, 0.2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = holdout_split(&clicks, 3, 0.2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.heldout_users, b.heldout_users);
        assert_eq!(a.masked, b.masked);
        assert_eq!(a.foldin, b.foldin);
        assert_eq!(a.train, b.train);
    }
}

//! Style injection: keep the learned encoder condition, swap the decoder
//! condition for a target profile, and measure how one-hot injections shift
//! the style of the resulting recommendations via re-encoding.

use crate::clickvae::{recommend_profile, ClickVaeModel, RecommendMode};
use crate::data::sample::{mean_embedding, sample_k};
use crate::data::EmbeddingIndex;
use crate::error::{Result, ScrError};
use crate::nncore::Tensor2;
use crate::textenc::TextEncoderModel;
use crate::Real;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct InjectionRequest {
    pub target_profile: Vec<Real>,
    pub top_n: usize,
}

impl InjectionRequest {
    pub fn new(target_profile: Vec<Real>, top_n: usize) -> Result<Self> {
        if top_n == 0 {
            return Err(ScrError::Config("top-n must be >= 1".into()));
        }
        if target_profile.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(ScrError::Config(
                "target profile values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            target_profile,
            top_n,
        })
    }
}

/// S×S mean profile shifts; row = injected style, column = measured style.
#[derive(Debug, Clone)]
pub struct InjectionShiftMatrix {
    pub style_names: Vec<String>,
    pub deltas: Tensor2<Real>,
    /// Users contributing to each row (same for all rows).
    pub n_users: usize,
}

impl InjectionShiftMatrix {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("injected");
        for name in &self.style_names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for (s, name) in self.style_names.iter().enumerate() {
            out.push_str(name);
            for &v in self.deltas.row(s) {
                out.push('\t');
                out.push_str(&format!("{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Recommends with the learned profile at the encoder and the target profile
/// at the decoder. With `target = learned profile` this is exactly
/// [`crate::clickvae::recommend`].
pub fn inject_style<R: Rng>(
    model: &ClickVaeModel<Real>,
    text_encoder: &TextEncoderModel<Real>,
    foldin: &[usize],
    embeddings: &EmbeddingIndex,
    k: usize,
    request: &InjectionRequest,
    mode: RecommendMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if request.target_profile.len() != model.cond_dim() {
        return Err(ScrError::Shape(format!(
            "target profile width {} != condition width {}",
            request.target_profile.len(),
            model.cond_dim()
        )));
    }
    let learned = recommend_profile(model, Some(text_encoder), foldin, embeddings, k, mode, rng)?;
    model.recommend_with_profiles(&learned, &request.target_profile, foldin, request.top_n)
}

const INJECT_TOP_N: usize = 20;
const REENCODE_SAMPLE: usize = 5;
const REENCODE_REPEATS: usize = 3;

/// For each style and user: inject one-hot(style), take the top 20, re-encode
/// three 5-item samples of them, and average the measured profile minus the
/// user's original learned profile.
pub fn measure_injection_shift<R: Rng>(
    model: &ClickVaeModel<Real>,
    text_encoder: &TextEncoderModel<Real>,
    users_foldin: &[Vec<usize>],
    embeddings: &EmbeddingIndex,
    k: usize,
    style_names: &[String],
    rng: &mut R,
) -> Result<InjectionShiftMatrix> {
    let s = model.cond_dim();
    if style_names.len() != s {
        return Err(ScrError::Shape(format!(
            "{} style names for a {}-wide condition",
            style_names.len(),
            s
        )));
    }
    if s == 0 {
        return Err(ScrError::Config(
            "injection needs a conditioned model".into(),
        ));
    }
    let usable: Vec<&Vec<usize>> = users_foldin.iter().filter(|f| !f.is_empty()).collect();
    if usable.is_empty() {
        return Err(ScrError::Data("no users with fold-in clicks".into()));
    }

    let mut deltas = Tensor2::zeros(s, s);
    for foldin in &usable {
        let learned = recommend_profile(
            model,
            Some(text_encoder),
            foldin,
            embeddings,
            k,
            RecommendMode::SampleK,
            rng,
        )?;
        for inj in 0..s {
            let mut target = vec![0.0; s];
            target[inj] = 1.0;
            let top =
                model.recommend_with_profiles(&learned, &target, foldin, INJECT_TOP_N)?;
            let measured = reencode_profile(text_encoder, &top, embeddings, rng)?;
            for (c, (&m, &orig)) in measured.iter().zip(&learned).enumerate() {
                let v = deltas.get(inj, c) + (m - orig);
                deltas.set(inj, c, v);
            }
        }
    }
    let n = usable.len() as Real;
    for v in deltas.data_mut() {
        *v /= n;
    }
    Ok(InjectionShiftMatrix {
        style_names: style_names.to_vec(),
        deltas,
        n_users: usable.len(),
    })
}

/// Mean style profile of several small content samples from a ranked list.
pub fn reencode_profile<R: Rng>(
    text_encoder: &TextEncoderModel<Real>,
    items: &[usize],
    embeddings: &EmbeddingIndex,
    rng: &mut R,
) -> Result<Vec<Real>> {
    if items.is_empty() {
        return Err(ScrError::Data("cannot re-encode an empty list".into()));
    }
    let s = text_encoder.n_styles();
    let mut acc = vec![0.0; s];
    for _ in 0..REENCODE_REPEATS {
        let sample = sample_k(items, REENCODE_SAMPLE, rng);
        let content = mean_embedding(&sample, embeddings);
        let profile = text_encoder.encode(&content)?;
        for (a, p) in acc.iter_mut().zip(profile) {
            *a += p;
        }
    }
    for a in &mut acc {
        *a /= REENCODE_REPEATS as Real;
    }
    Ok(acc)
}

/// Mean per-style presence (measured-profile coordinate of the injected
/// style) under one-hot injection versus identity injection, for the relative
/// presence-gain report.
pub fn presence_gain<R: Rng>(
    model: &ClickVaeModel<Real>,
    text_encoder: &TextEncoderModel<Real>,
    users_foldin: &[Vec<usize>],
    embeddings: &EmbeddingIndex,
    k: usize,
    rng: &mut R,
) -> Result<Vec<(Real, Real)>> {
    let s = model.cond_dim();
    let usable: Vec<&Vec<usize>> = users_foldin.iter().filter(|f| !f.is_empty()).collect();
    if usable.is_empty() {
        return Err(ScrError::Data("no users with fold-in clicks".into()));
    }
    let mut out = Vec::with_capacity(s);
    for inj in 0..s {
        let mut injected_sum = 0.0;
        let mut identity_sum = 0.0;
        for foldin in &usable {
            let learned = recommend_profile(
                model,
                Some(text_encoder),
                foldin,
                embeddings,
                k,
                RecommendMode::SampleK,
                rng,
            )?;
            let mut target = vec![0.0; s];
            target[inj] = 1.0;
            let top_inj =
                model.recommend_with_profiles(&learned, &target, foldin, INJECT_TOP_N)?;
            let top_id =
                model.recommend_with_profiles(&learned, &learned, foldin, INJECT_TOP_N)?;
            injected_sum += reencode_profile(text_encoder, &top_inj, embeddings, rng)?[inj];
            identity_sum += reencode_profile(text_encoder, &top_id, embeddings, rng)?[inj];
        }
        let n = usable.len() as Real;
        out.push((injected_sum / n, identity_sum / n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClickMatrix, ItemEmbeddingTable};
    use crate::textenc::TextEncoderVariant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (ClickMatrix, ItemEmbeddingTable) {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let n_items = 12;
        let rows: Vec<Vec<Real>> = (0..n_items)
            .map(|_| (0..4).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let table = ItemEmbeddingTable::new(
            (0..n_items).map(|i| format!("i{i}")).collect(),
            Tensor2::from_rows(&rows).unwrap(),
        )
        .unwrap();
        let mut clicks = ClickMatrix::new(
            vec!["u0".into(), "u1".into()],
            (0..n_items).map(|i| format!("i{i}")).collect(),
        );
        for &i in &[0usize, 2, 4, 6] {
            clicks.insert(0, i);
        }
        for &i in &[1usize, 3, 5] {
            clicks.insert(1, i);
        }
        (clicks, table)
    }

    #[test]
    fn invalid_requests_rejected() {
        assert!(InjectionRequest::new(vec![0.5, 0.5], 0).is_err());
        assert!(InjectionRequest::new(vec![1.5, 0.0], 10).is_err());
        assert!(InjectionRequest::new(vec![1.0, 0.0], 10).is_ok());
    }

    #[test]
    fn identity_injection_reproduces_recommend() {
        let (clicks, table) = fixture();
        let emb = EmbeddingIndex::build(&clicks, &table).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let tenc =
            TextEncoderModel::<Real>::new(4, 6, 4, 3, TextEncoderVariant::Plain, 0.0, &mut rng);
        let model = ClickVaeModel::<Real>::new(12, 3, 8, 4, 0.0, &mut rng);
        let foldin = clicks.user_items(0);

        let mut rng_a = ChaCha8Rng::seed_from_u64(99);
        let direct = crate::clickvae::recommend(
            &model,
            Some(&tenc),
            foldin,
            &emb,
            3,
            8,
            RecommendMode::SampleK,
            &mut rng_a,
        )
        .unwrap();
        let mut rng_b = ChaCha8Rng::seed_from_u64(99);
        let learned = recommend_profile(
            &model,
            Some(&tenc),
            foldin,
            &emb,
            3,
            RecommendMode::SampleK,
            &mut rng_b,
        )
        .unwrap();
        let request = InjectionRequest::new(learned.clone(), 8).unwrap();
        let mut rng_c = ChaCha8Rng::seed_from_u64(99);
        let injected = inject_style(
            &model,
            &tenc,
            foldin,
            &emb,
            3,
            &request,
            RecommendMode::SampleK,
            &mut rng_c,
        )
        .unwrap();
        assert_eq!(direct, injected);
    }

    #[test]
    fn injection_is_deterministic_given_seed() {
        let (clicks, table) = fixture();
        let emb = EmbeddingIndex::build(&clicks, &table).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let tenc =
            TextEncoderModel::<Real>::new(4, 6, 4, 3, TextEncoderVariant::Plain, 0.0, &mut rng);
        let model = ClickVaeModel::<Real>::new(12, 3, 8, 4, 0.0, &mut rng);
        let request = InjectionRequest::new(vec![1.0, 0.0, 0.0], 5).unwrap();
        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            inject_style(
                &model,
                &tenc,
                clicks.user_items(1),
                &emb,
                3,
                &request,
                RecommendMode::SampleK,
                &mut r,
            )
            .unwrap()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn zero_weight_model_shows_zero_shift() {
        let (clicks, table) = fixture();
        let emb = EmbeddingIndex::build(&clicks, &table).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut tenc =
            TextEncoderModel::<Real>::new(4, 6, 4, 3, TextEncoderVariant::Plain, 0.0, &mut rng);
        tenc.set_flat_params(&vec![0.0; tenc.param_count()]);
        let mut model = ClickVaeModel::<Real>::new(12, 3, 8, 4, 0.0, &mut rng);
        model.set_flat_params(&vec![0.0; model.param_count()]);
        let users = vec![clicks.user_items(0).to_vec(), clicks.user_items(1).to_vec()];
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let shift =
            measure_injection_shift(&model, &tenc, &users, &emb, 3, &names, &mut rng).unwrap();
        assert_eq!(shift.n_users, 2);
        for &v in shift.deltas.data() {
            assert!(v.abs() < 1e-12, "expected zero shift, got {v}");
        }
        let tsv = shift.to_tsv();
        assert!(tsv.starts_with("injected\t"));
        assert_eq!(tsv.lines().count(), 4);
    }

    #[test]
    fn shift_measurement_reproducible() {
        let (clicks, table) = fixture();
        let emb = EmbeddingIndex::build(&clicks, &table).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let tenc =
            TextEncoderModel::<Real>::new(4, 6, 4, 3, TextEncoderVariant::Plain, 0.0, &mut rng);
        let model = ClickVaeModel::<Real>::new(12, 3, 8, 4, 0.0, &mut rng);
        let users = vec![clicks.user_items(0).to_vec(), clicks.user_items(1).to_vec()];
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            measure_injection_shift(&model, &tenc, &users, &emb, 3, &names, &mut r)
                .unwrap()
                .deltas
        };
        assert_eq!(run(7).data(), run(7).data());
    }
}

//! Conditional VAE over click vectors: tanh encoder to a diagonal Gaussian
//! latent, reparameterized sampling, tanh/softmax decoder to a multinomial
//! over items, β-weighted ELBO training with the text encoder frozen, and
//! top-N recommendation.

use crate::data::{sample::user_content_vector, ClickMatrix, EmbeddingIndex};
use crate::error::{Result, ScrError};
use crate::nncore::{
    dropout_mask, gaussian_kl_parts, multinomial_nll, AdamState, Activation, DenseLayer,
    GaussianParams, Scalar, Tensor2,
};
use crate::textenc::{normal_tensor, TextEncoderModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How the user profile for recommendation is built from fold-in clicks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecommendMode {
    /// Sample k clicked items uniformly (training-time convention).
    SampleK,
    /// Average the k most recent clicked items (recency variant).
    LastK,
}

impl RecommendMode {
    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "sample-k" => RecommendMode::SampleK,
            "last-k" => RecommendMode::LastK,
            other => {
                return Err(ScrError::Config(format!(
                    "unknown mode '{other}' (sample-k|last-k)"
                )))
            }
        })
    }
}

/// Encoder input is the L2-normalized click row concatenated with the
/// condition; decoder input is the latent code concatenated with the
/// condition (dropout there in training mode). `cond_dim = 0` gives the
/// unconditioned VAE-CF ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickVaeModel<T> {
    pub enc_hidden: DenseLayer<T>,
    pub enc_head: DenseLayer<T>,
    pub dec_hidden: DenseLayer<T>,
    pub dec_head: DenseLayer<T>,
    pub decoder_dropout: f64,
    latent_dim: usize,
    cond_dim: usize,
    n_items: usize,
}

impl<T: Scalar> ClickVaeModel<T> {
    pub fn new<R: Rng>(
        n_items: usize,
        cond_dim: usize,
        hidden: usize,
        latent: usize,
        decoder_dropout: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            enc_hidden: DenseLayer::init(n_items + cond_dim, hidden, Activation::Tanh, rng),
            enc_head: DenseLayer::init(hidden, 2 * latent, Activation::Identity, rng),
            dec_hidden: DenseLayer::init(latent + cond_dim, hidden, Activation::Tanh, rng),
            dec_head: DenseLayer::init(hidden, n_items, Activation::Softmax, rng),
            decoder_dropout,
            latent_dim: latent,
            cond_dim,
            n_items,
        }
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    /// Posterior parameters for one user. The click row is binarized by
    /// construction and L2-normalized here.
    pub fn encode_clicks(&self, x_c: &[T], z_t: &[T]) -> Result<GaussianParams<T>> {
        let x = Tensor2::from_vec(1, x_c.len(), normalize_row(x_c))?;
        let cond = Tensor2::from_vec(1, z_t.len(), z_t.to_vec())?;
        let g = self.enc_head.forward(&self.enc_hidden.forward(&x.hcat(&cond)?)?)?;
        let (mu, lv) = g.hsplit(self.latent_dim)?;
        GaussianParams::new(mu.row(0).to_vec(), lv.row(0).to_vec())
    }

    /// Item probabilities for one latent code; inference mode (no dropout).
    pub fn decode_clicks(&self, z_c: &[T], z_t: &[T]) -> Result<Vec<T>> {
        let z = Tensor2::from_vec(1, z_c.len(), z_c.to_vec())?;
        let cond = Tensor2::from_vec(1, z_t.len(), z_t.to_vec())?;
        let probs = self
            .dec_head
            .forward(&self.dec_hidden.forward(&z.hcat(&cond)?)?)?;
        Ok(probs.row(0).to_vec())
    }

    pub fn param_count(&self) -> usize {
        self.enc_hidden.param_count()
            + self.enc_head.param_count()
            + self.dec_hidden.param_count()
            + self.dec_head.param_count()
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.enc_hidden.append_params(&mut out);
        self.enc_head.append_params(&mut out);
        self.dec_hidden.append_params(&mut out);
        self.dec_head.append_params(&mut out);
        out
    }

    pub fn set_flat_params(&mut self, flat: &[T]) {
        let mut used = self.enc_hidden.load_params(flat);
        used += self.enc_head.load_params(&flat[used..]);
        used += self.dec_hidden.load_params(&flat[used..]);
        used += self.dec_head.load_params(&flat[used..]);
        debug_assert_eq!(used, flat.len());
    }

    /// Training loss on a batch: multinomial NLL plus β·KL, summed over the
    /// batch and divided by the batch size. `eps` is the external Gaussian
    /// noise, `dec_mask` the decoder-input dropout mask over the latent code
    /// only: the condition stays intact so the decoder can rely on it while
    /// the latent is unreliable, which is what pushes style information onto
    /// the condition.
    pub fn batch_loss(
        &self,
        x_bin: &Tensor2<T>,
        cond: &Tensor2<T>,
        eps: &Tensor2<T>,
        dec_mask: Option<&Tensor2<T>>,
        beta: f64,
    ) -> Result<T> {
        self.batch_forward(x_bin, cond, eps, dec_mask, beta)
            .map(|f| f.loss)
    }

    pub fn batch_loss_and_grads(
        &self,
        x_bin: &Tensor2<T>,
        cond: &Tensor2<T>,
        eps: &Tensor2<T>,
        dec_mask: Option<&Tensor2<T>>,
        beta: f64,
    ) -> Result<(T, T, Vec<T>)> {
        let f = self.batch_forward(x_bin, cond, eps, dec_mask, beta)?;
        let b = T::of(x_bin.rows() as f64);
        let beta_t = T::of(beta);
        let half = T::of(0.5);

        // fused softmax + multinomial NLL: grad wrt logits is nₖ·p − x
        let mut grad_logits = Tensor2::zeros(x_bin.rows(), self.n_items);
        for r in 0..x_bin.rows() {
            let n_u: T = x_bin.row(r).iter().copied().sum();
            let gl = grad_logits.row_mut(r);
            for ((g, &p), &t) in gl.iter_mut().zip(f.probs.row(r)).zip(x_bin.row(r)) {
                *g = (n_u * p - t) / b;
            }
        }

        let (grad_dh, g_dec_head) = self.dec_head.backward(&f.c_dec_head, &grad_logits, true)?;
        let (grad_din, g_dec_hidden) = self.dec_hidden.backward(&f.c_dec_hidden, &grad_dh, false)?;
        let (grad_z, _) = grad_din.hsplit(self.latent_dim)?;
        let grad_z = match dec_mask {
            Some(m) => grad_z.hadamard(m)?,
            None => grad_z,
        };

        let mut grad_mu = grad_z.clone();
        for (g, &m) in grad_mu.data_mut().iter_mut().zip(f.mu.data()) {
            *g = *g + beta_t * m / b;
        }
        let mut grad_lv = Tensor2::zeros(grad_z.rows(), self.latent_dim);
        for i in 0..grad_lv.data().len() {
            let gz = grad_z.data()[i];
            let l = f.log_var.data()[i];
            let e = eps.data()[i];
            grad_lv.data_mut()[i] =
                gz * half * (half * l).exp() * e + beta_t * half * (l.exp() - T::one()) / b;
        }
        let grad_g = grad_mu.hcat(&grad_lv)?;
        let (grad_h, g_enc_head) = self.enc_head.backward(&f.c_enc_head, &grad_g, true)?;
        let (_, g_enc_hidden) = self.enc_hidden.backward(&f.c_enc_hidden, &grad_h, false)?;

        let mut grads = Vec::with_capacity(self.param_count());
        g_enc_hidden.append_flat(&mut grads);
        g_enc_head.append_flat(&mut grads);
        g_dec_hidden.append_flat(&mut grads);
        g_dec_head.append_flat(&mut grads);
        Ok((f.loss, f.kl, grads))
    }

    fn batch_forward(
        &self,
        x_bin: &Tensor2<T>,
        cond: &Tensor2<T>,
        eps: &Tensor2<T>,
        dec_mask: Option<&Tensor2<T>>,
        beta: f64,
    ) -> Result<VaeForward<T>> {
        if cond.cols() != self.cond_dim {
            return Err(ScrError::Shape(format!(
                "condition width {} != {}",
                cond.cols(),
                self.cond_dim
            )));
        }
        let mut xn = x_bin.clone();
        for r in 0..xn.rows() {
            let row = xn.row_mut(r);
            let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm > T::zero() {
                for v in row.iter_mut() {
                    *v = *v / norm;
                }
            }
        }
        let (h, c_enc_hidden) = self.enc_hidden.forward_cached(&xn.hcat(cond)?)?;
        let (g, c_enc_head) = self.enc_head.forward_cached(&h)?;
        let (mu, log_var) = g.hsplit(self.latent_dim)?;

        let half = T::of(0.5);
        let mut z = mu.clone();
        for i in 0..z.data().len() {
            let v = z.data()[i] + (half * log_var.data()[i]).exp() * eps.data()[i];
            z.data_mut()[i] = v;
        }

        let z_dec = match dec_mask {
            Some(m) => z.hadamard(m)?,
            None => z.clone(),
        };
        let din = z_dec.hcat(cond)?;
        let (dh, c_dec_hidden) = self.dec_hidden.forward_cached(&din)?;
        let (probs, c_dec_head) = self.dec_head.forward_cached(&dh)?;

        let nll = multinomial_nll(x_bin, &probs)?;
        let kl = gaussian_kl_parts(mu.data(), log_var.data())?;
        let b = T::of(x_bin.rows() as f64);
        let loss = (nll + T::of(beta) * kl) / b;
        Ok(VaeForward {
            loss,
            kl,
            probs,
            mu,
            log_var,
            c_enc_hidden,
            c_enc_head,
            c_dec_hidden,
            c_dec_head,
        })
    }

    /// Deterministic top-N recommendation from explicit encoder/decoder
    /// profiles (ε = 0). Fold-in items are excluded; ties break by ascending
    /// item index.
    pub fn recommend_with_profiles(
        &self,
        enc_profile: &[T],
        dec_profile: &[T],
        foldin: &[usize],
        top_n: usize,
    ) -> Result<Vec<usize>> {
        if foldin.is_empty() {
            return Err(ScrError::Data("user has no fold-in clicks".into()));
        }
        let mut x = vec![T::zero(); self.n_items];
        for &i in foldin {
            x[i] = T::one();
        }
        let params = self.encode_clicks(&x, enc_profile)?;
        let probs = self.decode_clicks(&params.mu, dec_profile)?;
        let mut seen = vec![false; self.n_items];
        for &i in foldin {
            seen[i] = true;
        }
        let mut ranked: Vec<(usize, T)> = probs
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !seen[*i])
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        ranked.truncate(top_n);
        Ok(ranked.into_iter().map(|(i, _)| i).collect())
    }
}

struct VaeForward<T> {
    loss: T,
    kl: T,
    probs: Tensor2<T>,
    mu: Tensor2<T>,
    log_var: Tensor2<T>,
    c_enc_hidden: crate::nncore::LayerCache<T>,
    c_enc_head: crate::nncore::LayerCache<T>,
    c_dec_hidden: crate::nncore::LayerCache<T>,
    c_dec_head: crate::nncore::LayerCache<T>,
}

/// z = μ + exp(0.5·log σ²) ∘ ε.
pub fn reparameterize<T: Scalar>(params: &GaussianParams<T>, epsilon: &[T]) -> Result<Vec<T>> {
    if epsilon.len() != params.dim() {
        return Err(ScrError::Shape(format!(
            "epsilon length {} != latent dim {}",
            epsilon.len(),
            params.dim()
        )));
    }
    let half = T::of(0.5);
    Ok(params
        .mu
        .iter()
        .zip(&params.log_var)
        .zip(epsilon)
        .map(|((&m, &lv), &e)| m + (half * lv).exp() * e)
        .collect())
}

/// Minimized training objective: multinomial NLL plus β·KL.
pub fn cvae_loss<T: Scalar>(
    x_c: &Tensor2<T>,
    probs: &Tensor2<T>,
    params: &GaussianParams<T>,
    beta: f64,
) -> Result<T> {
    Ok(multinomial_nll(x_c, probs)? + T::of(beta) * crate::nncore::gaussian_kl(params)?)
}

#[derive(Debug, Clone)]
pub struct VaeTrainConfig {
    pub beta: f64,
    /// Items sampled per user content vector, re-drawn each epoch.
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Linear β warm-up over the first 20% of steps (off by default).
    pub beta_warmup: bool,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        Self {
            beta: 0.17,
            k: 5,
            epochs: 60,
            batch_size: 100,
            learning_rate: 1e-3,
            seed: 0,
            beta_warmup: false,
        }
    }
}

/// Profiles for every user of `clicks`, each from a fresh k-item content
/// sample. Users without clicks get an all-zero profile.
pub fn sample_user_profiles<T: Scalar, R: Rng>(
    tenc: &TextEncoderModel<T>,
    clicks: &ClickMatrix,
    embeddings: &EmbeddingIndex,
    k: usize,
    rng: &mut R,
) -> Result<Tensor2<T>> {
    let mut content = Tensor2::zeros(clicks.n_users(), embeddings.dim());
    let mut empty = Vec::new();
    for u in 0..clicks.n_users() {
        let items = clicks.user_items(u);
        if items.is_empty() {
            empty.push(u);
            continue;
        }
        let v = user_content_vector(items, embeddings, k, rng)?;
        for (dst, &s) in content.row_mut(u).iter_mut().zip(&v) {
            *dst = T::of(s);
        }
    }
    let mut profiles = tenc.encode_batch(&content)?;
    for u in empty {
        for v in profiles.row_mut(u) {
            *v = T::zero();
        }
    }
    Ok(profiles)
}

/// Phase-2 training: minibatch Adam on the CVAE loss with the text encoder
/// frozen (taken by shared reference; its parameters cannot change). Content
/// vectors are resampled every epoch. Returns per-epoch mean losses.
pub fn train_click_vae<T: Scalar>(
    model: &mut ClickVaeModel<T>,
    clicks: &ClickMatrix,
    text_encoder: Option<&TextEncoderModel<T>>,
    embeddings: &EmbeddingIndex,
    cfg: &VaeTrainConfig,
) -> Result<Vec<f64>> {
    match text_encoder {
        Some(t) if t.n_styles() != model.cond_dim => {
            return Err(ScrError::Config(format!(
                "text encoder emits {} styles but the VAE condition is {}-wide",
                t.n_styles(),
                model.cond_dim
            )))
        }
        None if model.cond_dim != 0 => {
            return Err(ScrError::Config(
                "conditioned VAE needs a text encoder".into(),
            ))
        }
        _ => {}
    }
    if clicks.n_items() != model.n_items {
        return Err(ScrError::Shape(format!(
            "click matrix has {} items, model expects {}",
            clicks.n_items(),
            model.n_items
        )));
    }

    let users: Vec<usize> = (0..clicks.n_users())
        .filter(|&u| !clicks.user_items(u).is_empty())
        .collect();
    if users.is_empty() {
        return Err(ScrError::Data("no users with interactions".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.param_count(), cfg.learning_rate);
    let mut order = users.clone();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let total_steps = cfg.epochs * order.len().div_ceil(cfg.batch_size.max(1));
    let warmup_steps = (total_steps as f64 * 0.2).ceil() as usize;
    let mut step_no = 0usize;

    for _epoch in 0..cfg.epochs {
        let checkpoint = model.flat_params();
        let profiles = match text_encoder {
            Some(t) => sample_user_profiles(t, clicks, embeddings, cfg.k, &mut rng)?,
            None => Tensor2::zeros(clicks.n_users(), 0),
        };
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;

        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let mut x_bin = Tensor2::zeros(chunk.len(), model.n_items);
            let mut cond = Tensor2::zeros(chunk.len(), model.cond_dim);
            for (r, &u) in chunk.iter().enumerate() {
                for &i in clicks.user_items(u) {
                    x_bin.set(r, i, T::one());
                }
                cond.row_mut(r).copy_from_slice(profiles.row(u));
            }
            let eps = normal_tensor(chunk.len(), model.latent_dim, &mut rng);
            let mask = if model.decoder_dropout > 0.0 {
                Some(dropout_mask(
                    chunk.len(),
                    model.latent_dim,
                    model.decoder_dropout,
                    &mut rng,
                )?)
            } else {
                None
            };
            let beta = if cfg.beta_warmup && step_no < warmup_steps {
                cfg.beta * step_no as f64 / warmup_steps as f64
            } else {
                cfg.beta
            };
            step_no += 1;

            let step = (|| {
                let (loss, kl, grads) =
                    model.batch_loss_and_grads(&x_bin, &cond, &eps, mask.as_ref(), beta)?;
                if !loss.is_finite() || kl < T::zero() {
                    return Err(ScrError::Numeric(format!(
                        "bad training step: loss {loss}, kl {kl}"
                    )));
                }
                let mut params = model.flat_params();
                adam.step(&mut params, &grads)?;
                model.set_flat_params(&params);
                Ok(loss.to_f64().unwrap())
            })();
            match step {
                Ok(l) => {
                    epoch_loss += l;
                    batches += 1;
                }
                Err(e) => {
                    model.set_flat_params(&checkpoint);
                    return Err(e);
                }
            }
        }
        curve.push(epoch_loss / batches as f64);
    }
    Ok(curve)
}

/// Builds the user profile for recommendation per the requested mode, then
/// recommends with that profile at both encoder and decoder.
#[allow(clippy::too_many_arguments)]
pub fn recommend<T: Scalar, R: Rng>(
    model: &ClickVaeModel<T>,
    text_encoder: Option<&TextEncoderModel<T>>,
    foldin: &[usize],
    embeddings: &EmbeddingIndex,
    k: usize,
    top_n: usize,
    mode: RecommendMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let profile = recommend_profile(model, text_encoder, foldin, embeddings, k, mode, rng)?;
    model.recommend_with_profiles(&profile, &profile, foldin, top_n)
}

/// The learned profile used by [`recommend`]; exposed so style injection can
/// reuse the exact same encoder condition.
pub fn recommend_profile<T: Scalar, R: Rng>(
    model: &ClickVaeModel<T>,
    text_encoder: Option<&TextEncoderModel<T>>,
    foldin: &[usize],
    embeddings: &EmbeddingIndex,
    k: usize,
    mode: RecommendMode,
    rng: &mut R,
) -> Result<Vec<T>> {
    if foldin.is_empty() {
        return Err(ScrError::Data("user has no fold-in clicks".into()));
    }
    let Some(tenc) = text_encoder else {
        return Ok(Vec::new()); // unconditioned ablation
    };
    if model.cond_dim == 0 {
        return Ok(Vec::new());
    }
    let content = match mode {
        RecommendMode::SampleK => user_content_vector(foldin, embeddings, k, rng)?,
        RecommendMode::LastK => {
            let start = foldin.len().saturating_sub(k);
            crate::data::sample::mean_embedding(&foldin[start..], embeddings)
        }
    };
    let content: Vec<T> = content.iter().map(|&v| T::of(v)).collect();
    tenc.encode(&content)
}

fn normalize_row<T: Scalar>(x: &[T]) -> Vec<T> {
    let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if norm > T::zero() {
        x.iter().map(|&v| v / norm).collect()
    } else {
        x.to_vec()
    }
}

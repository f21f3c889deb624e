//! Text encoder: a two-hidden-layer MLP mapping user content vectors to
//! S-dimensional style profiles in [0,1], trained on the label-propagation
//! dataset. Includes the Gaussian-prior variant and the per-style logistic
//! regression baseline.

use crate::data::LabeledProfileDataset;
use crate::error::{Result, ScrError};
use crate::nncore::{
    dropout_mask, multilabel_bce, AdamState, Activation, DenseLayer, Scalar, Tensor2,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextEncoderVariant {
    Plain,
    /// Head emits (μ, log σ²) per style; training samples a code via the
    /// reparameterization trick and adds a KL(q‖N(0,I)) term, inference uses
    /// μ. The profile is the sigmoid of the code either way.
    GaussianPrior,
}

impl TextEncoderVariant {
    pub fn name(self) -> &'static str {
        match self {
            TextEncoderVariant::Plain => "plain",
            TextEncoderVariant::GaussianPrior => "gaussian",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "plain" => TextEncoderVariant::Plain,
            "gaussian" => TextEncoderVariant::GaussianPrior,
            other => {
                return Err(ScrError::Config(format!(
                    "unknown text-encoder variant '{other}' (plain|gaussian)"
                )))
            }
        })
    }
}

/// ReLU hidden layers, sigmoid output; dropout applied at the input in
/// training mode only.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoderModel<T> {
    pub layer1: DenseLayer<T>,
    pub layer2: DenseLayer<T>,
    pub head: DenseLayer<T>,
    pub input_dropout: f64,
    pub variant: TextEncoderVariant,
    n_styles: usize,
}

impl<T: Scalar> TextEncoderModel<T> {
    pub fn new<R: Rng>(
        input_dim: usize,
        hidden1: usize,
        hidden2: usize,
        n_styles: usize,
        variant: TextEncoderVariant,
        input_dropout: f64,
        rng: &mut R,
    ) -> Self {
        let head_out = match variant {
            TextEncoderVariant::Plain => n_styles,
            TextEncoderVariant::GaussianPrior => 2 * n_styles,
        };
        let head_act = match variant {
            TextEncoderVariant::Plain => Activation::Sigmoid,
            TextEncoderVariant::GaussianPrior => Activation::Identity,
        };
        Self {
            layer1: DenseLayer::init(input_dim, hidden1, Activation::Relu, rng),
            layer2: DenseLayer::init(hidden1, hidden2, Activation::Relu, rng),
            head: DenseLayer::init(hidden2, head_out, head_act, rng),
            input_dropout,
            variant,
            n_styles,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer1.in_dim()
    }

    pub fn n_styles(&self) -> usize {
        self.n_styles
    }

    /// Deterministic inference profile for one content vector: no dropout,
    /// and the Gaussian variant uses μ (ε = 0).
    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        let input = Tensor2::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.encode_batch(&input)?.row(0).to_vec())
    }

    pub fn encode_batch(&self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        let h1 = self.layer1.forward(x)?;
        let h2 = self.layer2.forward(&h1)?;
        let out = self.head.forward(&h2)?;
        Ok(match self.variant {
            TextEncoderVariant::Plain => out,
            TextEncoderVariant::GaussianPrior => {
                let (mu, _) = out.hsplit(self.n_styles)?;
                sigmoid(&mu)
            }
        })
    }

    pub fn param_count(&self) -> usize {
        self.layer1.param_count() + self.layer2.param_count() + self.head.param_count()
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.layer1.append_params(&mut out);
        self.layer2.append_params(&mut out);
        self.head.append_params(&mut out);
        out
    }

    pub fn set_flat_params(&mut self, flat: &[T]) {
        let mut used = self.layer1.load_params(flat);
        used += self.layer2.load_params(&flat[used..]);
        used += self.head.load_params(&flat[used..]);
        debug_assert_eq!(used, flat.len());
    }

    /// Training-mode loss on one batch: per-style BCE summed over the batch
    /// divided by the batch size, plus `kl_weight`·KL/B for the Gaussian
    /// variant. `mask` is the input dropout mask, `eps` the external noise.
    pub fn batch_loss(
        &self,
        x: &Tensor2<T>,
        targets: &Tensor2<T>,
        mask: Option<&Tensor2<T>>,
        eps: Option<&Tensor2<T>>,
        kl_weight: f64,
    ) -> Result<T> {
        self.batch_forward(x, targets, mask, eps, kl_weight)
            .map(|f| f.loss)
    }

    pub fn batch_loss_and_grads(
        &self,
        x: &Tensor2<T>,
        targets: &Tensor2<T>,
        mask: Option<&Tensor2<T>>,
        eps: Option<&Tensor2<T>>,
        kl_weight: f64,
    ) -> Result<(T, Vec<T>)> {
        let f = self.batch_forward(x, targets, mask, eps, kl_weight)?;
        let b = T::of(x.rows() as f64);

        // sigmoid + BCE (and identity-head reparameterized code) both reduce
        // to (p − t)/B at the pre-activation / code
        let mut grad_code = Tensor2::zeros(x.rows(), self.n_styles);
        for (g, (&p, &t)) in grad_code
            .data_mut()
            .iter_mut()
            .zip(f.probs.data().iter().zip(targets.data()))
        {
            *g = (p - t) / b;
        }

        let grad_head_pre = match self.variant {
            TextEncoderVariant::Plain => grad_code,
            TextEncoderVariant::GaussianPrior => {
                let mu = f.mu.as_ref().expect("gaussian forward keeps mu");
                let lv = f.log_var.as_ref().expect("gaussian forward keeps log_var");
                let eps = eps.expect("gaussian training requires eps");
                let klw = T::of(kl_weight);
                let half = T::of(0.5);
                let mut grad_mu = grad_code.clone();
                for (g, &m) in grad_mu.data_mut().iter_mut().zip(mu.data()) {
                    *g = *g + klw * m / b;
                }
                let mut grad_lv = Tensor2::zeros(x.rows(), self.n_styles);
                for i in 0..grad_lv.data().len() {
                    let gz = grad_code.data()[i];
                    let l = lv.data()[i];
                    let e = eps.data()[i];
                    grad_lv.data_mut()[i] = gz * half * (half * l).exp() * e
                        + klw * half * (l.exp() - T::one()) / b;
                }
                grad_mu.hcat(&grad_lv)?
            }
        };

        let (grad_h2, g_head) = self.head.backward(&f.c_head, &grad_head_pre, true)?;
        let (grad_h1, g2) = self.layer2.backward(&f.c2, &grad_h2, false)?;
        let (_, g1) = self.layer1.backward(&f.c1, &grad_h1, false)?;

        let mut grads = Vec::with_capacity(self.param_count());
        g1.append_flat(&mut grads);
        g2.append_flat(&mut grads);
        g_head.append_flat(&mut grads);
        Ok((f.loss, grads))
    }

    fn batch_forward(
        &self,
        x: &Tensor2<T>,
        targets: &Tensor2<T>,
        mask: Option<&Tensor2<T>>,
        eps: Option<&Tensor2<T>>,
        kl_weight: f64,
    ) -> Result<BatchForward<T>> {
        let xd = match mask {
            Some(m) => x.hadamard(m)?,
            None => x.clone(),
        };
        let (h1, c1) = self.layer1.forward_cached(&xd)?;
        let (h2, c2) = self.layer2.forward_cached(&h1)?;
        let (head_out, c_head) = self.head.forward_cached(&h2)?;
        let b = T::of(x.rows() as f64);

        match self.variant {
            TextEncoderVariant::Plain => {
                let loss = multilabel_bce(targets, &head_out)? / b;
                Ok(BatchForward {
                    loss,
                    probs: head_out,
                    mu: None,
                    log_var: None,
                    c1,
                    c2,
                    c_head,
                })
            }
            TextEncoderVariant::GaussianPrior => {
                let eps = eps.ok_or_else(|| {
                    ScrError::Config("gaussian variant needs an epsilon tensor".into())
                })?;
                let (mu, lv) = head_out.hsplit(self.n_styles)?;
                let half = T::of(0.5);
                let mut code = mu.clone();
                for i in 0..code.data().len() {
                    let v = code.data()[i] + (half * lv.data()[i]).exp() * eps.data()[i];
                    code.data_mut()[i] = v;
                }
                let probs = sigmoid(&code);
                let mut kl = T::zero();
                for (&m, &l) in mu.data().iter().zip(lv.data()) {
                    kl = kl + half * (m * m + l.exp() - T::one() - l);
                }
                let loss = multilabel_bce(targets, &probs)? / b + T::of(kl_weight) * kl / b;
                Ok(BatchForward {
                    loss,
                    probs,
                    mu: Some(mu),
                    log_var: Some(lv),
                    c1,
                    c2,
                    c_head,
                })
            }
        }
    }
}

struct BatchForward<T> {
    loss: T,
    probs: Tensor2<T>,
    mu: Option<Tensor2<T>>,
    log_var: Option<Tensor2<T>>,
    c1: crate::nncore::LayerCache<T>,
    c2: crate::nncore::LayerCache<T>,
    c_head: crate::nncore::LayerCache<T>,
}

fn sigmoid<T: Scalar>(x: &Tensor2<T>) -> Tensor2<T> {
    x.map(|v| T::one() / (T::one() + (-v).exp()))
}

#[derive(Debug, Clone)]
pub struct TextTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// KL weight for the Gaussian-prior variant; ignored by the plain one.
    pub kl_weight: f64,
    pub seed: u64,
}

impl Default for TextTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 100,
            learning_rate: 1e-3,
            kl_weight: 1.0,
            seed: 0,
        }
    }
}

/// Minibatch Adam on the label-propagation loss. Returns per-epoch mean
/// losses. A non-finite loss aborts with the parameters restored to the last
/// completed epoch.
pub fn train_text_encoder<T: Scalar>(
    model: &mut TextEncoderModel<T>,
    dataset: &LabeledProfileDataset,
    cfg: &TextTrainConfig,
) -> Result<Vec<f64>>
where
    T: Scalar,
{
    if dataset.is_empty() {
        return Err(ScrError::Data("empty labeled-profile dataset".into()));
    }
    let x_all = convert(&dataset.vectors);
    let t_all = convert(&dataset.profiles);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.param_count(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for _epoch in 0..cfg.epochs {
        let checkpoint = model.flat_params();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let x = gather_rows(&x_all, chunk);
            let t = gather_rows(&t_all, chunk);
            let mask = if model.input_dropout > 0.0 {
                Some(dropout_mask(
                    x.rows(),
                    x.cols(),
                    model.input_dropout,
                    &mut rng,
                )?)
            } else {
                None
            };
            let eps = match model.variant {
                TextEncoderVariant::Plain => None,
                TextEncoderVariant::GaussianPrior => {
                    Some(normal_tensor(x.rows(), model.n_styles, &mut rng))
                }
            };
            let step = (|| {
                let (loss, grads) = model.batch_loss_and_grads(
                    &x,
                    &t,
                    mask.as_ref(),
                    eps.as_ref(),
                    cfg.kl_weight,
                )?;
                if !loss.is_finite() {
                    return Err(ScrError::Numeric("non-finite text-encoder loss".into()));
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

/// Per-style sigmoid-linear classifiers trained with the same optimizer and
/// loss; an all-vs-one logistic-regression reference baseline.
#[derive(Debug, Clone)]
pub struct LogisticBaseline<T> {
    pub layer: DenseLayer<T>,
}

impl<T: Scalar> LogisticBaseline<T> {
    pub fn new<R: Rng>(input_dim: usize, n_styles: usize, rng: &mut R) -> Self {
        Self {
            layer: DenseLayer::init(input_dim, n_styles, Activation::Sigmoid, rng),
        }
    }

    pub fn scores(&self, x: &[T]) -> Result<Vec<T>> {
        let input = Tensor2::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.layer.forward(&input)?.row(0).to_vec())
    }

    pub fn scores_batch(&self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        self.layer.forward(x)
    }

    pub fn batch_loss(&self, x: &Tensor2<T>, targets: &Tensor2<T>) -> Result<T> {
        let p = self.layer.forward(x)?;
        Ok(multilabel_bce(targets, &p)? / T::of(x.rows() as f64))
    }

    pub fn batch_loss_and_grads(
        &self,
        x: &Tensor2<T>,
        targets: &Tensor2<T>,
    ) -> Result<(T, Vec<T>)> {
        let (p, cache) = self.layer.forward_cached(x)?;
        let b = T::of(x.rows() as f64);
        let loss = multilabel_bce(targets, &p)? / b;
        let mut grad_pre = Tensor2::zeros(x.rows(), self.layer.out_dim());
        for (g, (&pv, &tv)) in grad_pre
            .data_mut()
            .iter_mut()
            .zip(p.data().iter().zip(targets.data()))
        {
            *g = (pv - tv) / b;
        }
        let (_, grads) = self.layer.backward(&cache, &grad_pre, true)?;
        let mut flat = Vec::with_capacity(self.layer.param_count());
        grads.append_flat(&mut flat);
        Ok((loss, flat))
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::new();
        self.layer.append_params(&mut out);
        out
    }

    pub fn set_flat_params(&mut self, flat: &[T]) {
        self.layer.load_params(flat);
    }
}

pub fn train_lr_baseline<T: Scalar>(
    model: &mut LogisticBaseline<T>,
    dataset: &LabeledProfileDataset,
    cfg: &TextTrainConfig,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(ScrError::Data("empty labeled-profile dataset".into()));
    }
    let x_all = convert(&dataset.vectors);
    let t_all = convert(&dataset.profiles);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.layer.param_count(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let x = gather_rows(&x_all, chunk);
            let t = gather_rows(&t_all, chunk);
            let (loss, grads) = model.batch_loss_and_grads(&x, &t)?;
            if !loss.is_finite() {
                return Err(ScrError::Numeric("non-finite baseline loss".into()));
            }
            let mut params = model.flat_params();
            adam.step(&mut params, &grads)?;
            model.set_flat_params(&params);
            epoch_loss += loss.to_f64().unwrap();
            batches += 1;
        }
        curve.push(epoch_loss / batches as f64);
    }
    Ok(curve)
}

fn convert<T: Scalar>(src: &Tensor2<crate::Real>) -> Tensor2<T> {
    Tensor2::from_vec(
        src.rows(),
        src.cols(),
        src.data().iter().map(|&v| T::of(v)).collect(),
    )
    .expect("same shape")
}

fn gather_rows<T: Scalar>(src: &Tensor2<T>, rows: &[usize]) -> Tensor2<T> {
    let mut data = Vec::with_capacity(rows.len() * src.cols());
    for &r in rows {
        data.extend_from_slice(src.row(r));
    }
    Tensor2::from_vec(rows.len(), src.cols(), data).expect("sized above")
}

pub(crate) fn normal_tensor<T: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor2<T> {
    let data = (0..rows * cols)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            T::of(g)
        })
        .collect();
    Tensor2::from_vec(rows, cols, data).expect("sized above")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::grad_check;

    fn random_dataset(n: usize, d: usize, s: usize, seed: u64) -> LabeledProfileDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let profiles: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut row: Vec<f64> =
                    (0..s).map(|_| if rng.random::<f64>() < 0.4 { 1.0 } else { 0.0 }).collect();
                if row.iter().all(|&v| v == 0.0) {
                    row[0] = 1.0;
                }
                row
            })
            .collect();
        LabeledProfileDataset {
            vectors: Tensor2::from_rows(&vectors).unwrap(),
            profiles: Tensor2::from_rows(&profiles).unwrap(),
            sampled_items: vec![Vec::new(); n],
            style_names: (0..s).map(|i| format!("s{i}")).collect(),
        }
    }

    #[test]
    fn zero_weights_encode_to_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model =
            TextEncoderModel::<f64>::new(4, 5, 3, 2, TextEncoderVariant::Plain, 0.0, &mut rng);
        let zeros = vec![0.0; model.param_count()];
        model.set_flat_params(&zeros);
        let p = model.encode(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn encode_is_deterministic_and_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for variant in [TextEncoderVariant::Plain, TextEncoderVariant::GaussianPrior] {
            let model = TextEncoderModel::<f64>::new(6, 8, 4, 3, variant, 0.5, &mut rng);
            let x: Vec<f64> = (0..6).map(|i| (i as f64) - 2.5).collect();
            let a = model.encode(&x).unwrap();
            let b = model.encode(&x).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn text_encoder_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for variant in [TextEncoderVariant::Plain, TextEncoderVariant::GaussianPrior] {
            let model =
                TextEncoderModel::<f64>::new(5, 6, 4, 3, variant, 0.0, &mut rng);
            let ds = random_dataset(3, 5, 3, 7);
            let x = convert::<f64>(&ds.vectors);
            let t = convert::<f64>(&ds.profiles);
            let eps = match variant {
                TextEncoderVariant::Plain => None,
                TextEncoderVariant::GaussianPrior => Some(normal_tensor(3, 3, &mut rng)),
            };
            let (_, grads) = model
                .batch_loss_and_grads(&x, &t, None, eps.as_ref(), 1.0)
                .unwrap();
            let params = model.flat_params();
            let mut probe = model.clone();
            let report = grad_check(
                |p: &[f64]| {
                    probe.set_flat_params(p);
                    probe.batch_loss(&x, &t, None, eps.as_ref(), 1.0).unwrap()
                },
                &params,
                &grads,
                1e-4,
            );
            assert!(report.pass, "{variant:?}: {report}");
        }
    }

    #[test]
    fn gradients_respect_dropout_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model =
            TextEncoderModel::<f64>::new(5, 6, 4, 2, TextEncoderVariant::Plain, 0.0, &mut rng);
        let ds = random_dataset(3, 5, 2, 8);
        let x = convert::<f64>(&ds.vectors);
        let t = convert::<f64>(&ds.profiles);
        let mask = dropout_mask(3, 5, 0.4, &mut rng).unwrap();
        let (_, grads) = model
            .batch_loss_and_grads(&x, &t, Some(&mask), None, 0.0)
            .unwrap();
        let params = model.flat_params();
        let mut probe = model.clone();
        let report = grad_check(
            |p: &[f64]| {
                probe.set_flat_params(p);
                probe.batch_loss(&x, &t, Some(&mask), None, 0.0).unwrap()
            },
            &params,
            &grads,
            1e-4,
        );
        assert!(report.pass, "{report}");
    }

    #[test]
    fn lr_baseline_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = LogisticBaseline::<f64>::new(5, 3, &mut rng);
        let ds = random_dataset(4, 5, 3, 9);
        let x = convert::<f64>(&ds.vectors);
        let t = convert::<f64>(&ds.profiles);
        let (_, grads) = model.batch_loss_and_grads(&x, &t).unwrap();
        let params = model.flat_params();
        let mut probe = model.clone();
        let report = grad_check(
            |p: &[f64]| {
                probe.set_flat_params(p);
                probe.batch_loss(&x, &t).unwrap()
            },
            &params,
            &grads,
            1e-4,
        );
        assert!(report.pass, "{report}");
    }

    #[test]
    fn single_sample_is_memorized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model =
            TextEncoderModel::<f64>::new(4, 16, 8, 2, TextEncoderVariant::Plain, 0.0, &mut rng);
        let ds = LabeledProfileDataset {
            vectors: Tensor2::from_rows(&[vec![1.0, -1.0, 0.5, 2.0]]).unwrap(),
            profiles: Tensor2::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            sampled_items: vec![Vec::new()],
            style_names: vec!["a".into(), "b".into()],
        };
        let cfg = TextTrainConfig {
            epochs: 300,
            batch_size: 1,
            learning_rate: 0.01,
            ..Default::default()
        };
        let curve = train_text_encoder(&mut model, &ds, &cfg).unwrap();
        assert!(curve.last().unwrap() < &0.01, "final loss {}", curve.last().unwrap());
        let p = model.encode(&[1.0, -1.0, 0.5, 2.0]).unwrap();
        assert!(p[0] > 0.9 && p[1] < 0.1, "{p:?}");
    }

    #[test]
    fn training_loss_decreases_on_random_but_learnable_data() {
        // targets depend linearly on the inputs, so the loss must drop
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 200;
        let d = 6;
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let profiles: Vec<Vec<f64>> = vectors
            .iter()
            .map(|v| {
                vec![
                    if v[0] + v[1] > 0.0 { 1.0 } else { 0.0 },
                    if v[2] - v[3] > 0.0 { 1.0 } else { 0.0 },
                ]
            })
            .collect();
        let ds = LabeledProfileDataset {
            vectors: Tensor2::from_rows(&vectors).unwrap(),
            profiles: Tensor2::from_rows(&profiles).unwrap(),
            sampled_items: vec![Vec::new(); n],
            style_names: vec!["a".into(), "b".into()],
        };
        let mut model =
            TextEncoderModel::<f64>::new(d, 16, 8, 2, TextEncoderVariant::Plain, 0.2, &mut rng);
        let cfg = TextTrainConfig {
            epochs: 40,
            batch_size: 32,
            learning_rate: 3e-3,
            ..Default::default()
        };
        let curve = train_text_encoder(&mut model, &ds, &cfg).unwrap();
        let head = curve.len() / 10;
        let first: f64 = curve[..head.max(1)].iter().sum::<f64>() / head.max(1) as f64;
        let last: f64 =
            curve[curve.len() - head.max(1)..].iter().sum::<f64>() / head.max(1) as f64;
        assert!(last < first, "loss did not decrease: first {first}, last {last}");
    }
}

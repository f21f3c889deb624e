//! Text checkpoint format shared by both models.
//!
//! Line 1: `SCR-CKPT v1`. Line 2: manifest reference (hash, seed, style
//! vocabulary). Then one `tensor name rows cols` header per tensor followed
//! by its rows as space-separated base-10 decimals. Decimals are written with
//! the shortest round-trip representation, so a save/load cycle reproduces
//! the model bit-identically.

use crate::clickvae::ClickVaeModel;
use crate::error::{Result, ScrError};
use crate::nncore::{DenseLayer, Tensor2};
use crate::textenc::{TextEncoderModel, TextEncoderVariant};
use crate::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

const MAGIC: &str = "SCR-CKPT v1";

/// Manifest reference carried in line 2 of every checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub manifest_hash: String,
    pub seed: u64,
    pub style_vocabulary: Vec<String>,
}

impl CheckpointHeader {
    fn to_line(&self) -> String {
        format!(
            "manifest\t{}\tseed\t{}\tstyles\t{}",
            self.manifest_hash,
            self.seed,
            self.style_vocabulary.join(",")
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 6 || parts[0] != "manifest" || parts[2] != "seed" || parts[4] != "styles"
        {
            return Err(ScrError::Data(format!("bad checkpoint header: {line}")));
        }
        let seed = parts[3]
            .parse()
            .map_err(|_| ScrError::Data(format!("bad seed in checkpoint header: {line}")))?;
        let styles = if parts[5].is_empty() {
            Vec::new()
        } else {
            parts[5].split(',').map(str::to_string).collect()
        };
        Ok(Self {
            manifest_hash: parts[1].to_string(),
            seed,
            style_vocabulary: styles,
        })
    }
}

pub fn save_text_encoder(
    path: &Path,
    model: &TextEncoderModel<Real>,
    header: &CheckpointHeader,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&header.to_line());
    out.push('\n');
    out.push_str(&format!(
        "model\ttext-encoder\tvariant={}\tinput-dropout={}\n",
        model.variant.name(),
        model.input_dropout
    ));
    write_layer(&mut out, "layer1", &model.layer1);
    write_layer(&mut out, "layer2", &model.layer2);
    write_layer(&mut out, "head", &model.head);
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_text_encoder(
    path: &Path,
    expected_hash: Option<&str>,
) -> Result<(TextEncoderModel<Real>, CheckpointHeader)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = read_preamble(path, &mut lines, expected_hash)?;
    let model_line = lines
        .next()
        .ok_or_else(|| ScrError::Data(format!("{}: truncated checkpoint", path.display())))?;
    let fields = model_fields(model_line, "text-encoder")?;
    let variant = TextEncoderVariant::from_name(field(&fields, "variant")?)?;
    let dropout: f64 = field(&fields, "input-dropout")?
        .parse()
        .map_err(|_| ScrError::Data("bad input-dropout in checkpoint".into()))?;

    let layer1 = read_layer(&mut lines, "layer1")?;
    let layer2 = read_layer(&mut lines, "layer2")?;
    let head = read_layer(&mut lines, "head")?;
    let (d, h1) = (layer1.0.rows(), layer1.0.cols());
    let h2 = layer2.0.cols();
    let n_styles = match variant {
        TextEncoderVariant::Plain => head.0.cols(),
        TextEncoderVariant::GaussianPrior => head.0.cols() / 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = TextEncoderModel::new(d, h1, h2, n_styles, variant, dropout, &mut rng);
    model.layer1.weights = layer1.0;
    model.layer1.bias = layer1.1;
    model.layer2.weights = layer2.0;
    model.layer2.bias = layer2.1;
    model.head.weights = head.0;
    model.head.bias = head.1;
    Ok((model, header))
}

pub fn save_click_vae(
    path: &Path,
    model: &ClickVaeModel<Real>,
    header: &CheckpointHeader,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&header.to_line());
    out.push('\n');
    out.push_str(&format!(
        "model\tclick-vae\tlatent={}\tcond={}\tdecoder-dropout={}\n",
        model.latent_dim(),
        model.cond_dim(),
        model.decoder_dropout
    ));
    write_layer(&mut out, "enc_hidden", &model.enc_hidden);
    write_layer(&mut out, "enc_head", &model.enc_head);
    write_layer(&mut out, "dec_hidden", &model.dec_hidden);
    write_layer(&mut out, "dec_head", &model.dec_head);
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_click_vae(
    path: &Path,
    expected_hash: Option<&str>,
) -> Result<(ClickVaeModel<Real>, CheckpointHeader)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = read_preamble(path, &mut lines, expected_hash)?;
    let model_line = lines
        .next()
        .ok_or_else(|| ScrError::Data(format!("{}: truncated checkpoint", path.display())))?;
    let fields = model_fields(model_line, "click-vae")?;
    let latent: usize = field(&fields, "latent")?
        .parse()
        .map_err(|_| ScrError::Data("bad latent in checkpoint".into()))?;
    let cond: usize = field(&fields, "cond")?
        .parse()
        .map_err(|_| ScrError::Data("bad cond in checkpoint".into()))?;
    let dropout: f64 = field(&fields, "decoder-dropout")?
        .parse()
        .map_err(|_| ScrError::Data("bad decoder-dropout in checkpoint".into()))?;

    let enc_hidden = read_layer(&mut lines, "enc_hidden")?;
    let enc_head = read_layer(&mut lines, "enc_head")?;
    let dec_hidden = read_layer(&mut lines, "dec_hidden")?;
    let dec_head = read_layer(&mut lines, "dec_head")?;
    let n_items = dec_head.0.cols();
    let hidden = enc_hidden.0.cols();
    if enc_hidden.0.rows() != n_items + cond || enc_head.0.cols() != 2 * latent {
        return Err(ScrError::Data(format!(
            "{}: tensor shapes inconsistent with model line",
            path.display()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = ClickVaeModel::new(n_items, cond, hidden, latent, dropout, &mut rng);
    model.enc_hidden.weights = enc_hidden.0;
    model.enc_hidden.bias = enc_hidden.1;
    model.enc_head.weights = enc_head.0;
    model.enc_head.bias = enc_head.1;
    model.dec_hidden.weights = dec_hidden.0;
    model.dec_hidden.bias = dec_hidden.1;
    model.dec_head.weights = dec_head.0;
    model.dec_head.bias = dec_head.1;
    Ok((model, header))
}

fn write_layer(out: &mut String, name: &str, layer: &DenseLayer<Real>) {
    write_tensor(out, &format!("{name}.weights"), &layer.weights);
    let bias = Tensor2::from_vec(1, layer.bias.len(), layer.bias.clone()).expect("bias tensor");
    write_tensor(out, &format!("{name}.bias"), &bias);
}

fn write_tensor(out: &mut String, name: &str, t: &Tensor2<Real>) {
    out.push_str(&format!("tensor {} {} {}\n", name, t.rows(), t.cols()));
    for r in 0..t.rows() {
        let mut first = true;
        for &v in t.row(r) {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
            first = false;
        }
        out.push('\n');
    }
}

fn read_preamble<'a>(
    path: &Path,
    lines: &mut std::str::Lines<'a>,
    expected_hash: Option<&str>,
) -> Result<CheckpointHeader> {
    let magic = lines
        .next()
        .ok_or_else(|| ScrError::Data(format!("{}: empty checkpoint", path.display())))?;
    if magic != MAGIC {
        return Err(ScrError::Data(format!(
            "{}: not a checkpoint (first line {magic:?})",
            path.display()
        )));
    }
    let header = CheckpointHeader::parse(lines.next().ok_or_else(|| {
        ScrError::Data(format!("{}: missing manifest line", path.display()))
    })?)?;
    if let Some(expected) = expected_hash {
        if header.manifest_hash != expected {
            return Err(ScrError::Data(format!(
                "{}: checkpoint belongs to manifest {} but {} was expected",
                path.display(),
                header.manifest_hash,
                expected
            )));
        }
    }
    Ok(header)
}

fn model_fields<'a>(line: &'a str, kind: &str) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() < 2 || parts[0] != "model" || parts[1] != kind {
        return Err(ScrError::Data(format!(
            "expected a '{kind}' model line, got: {line}"
        )));
    }
    Ok(parts[2..].to_vec())
}

fn field<'a>(fields: &[&'a str], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| ScrError::Data(format!("checkpoint model line missing {key}=")))
}

fn read_layer(lines: &mut std::str::Lines, name: &str) -> Result<(Tensor2<Real>, Vec<Real>)> {
    let weights = read_tensor(lines, &format!("{name}.weights"))?;
    let bias = read_tensor(lines, &format!("{name}.bias"))?;
    if bias.rows() != 1 || bias.cols() != weights.cols() {
        return Err(ScrError::Data(format!(
            "{name}: bias shape {}x{} does not match weights",
            bias.rows(),
            bias.cols()
        )));
    }
    let b = bias.row(0).to_vec();
    Ok((weights, b))
}

fn read_tensor(lines: &mut std::str::Lines, expected_name: &str) -> Result<Tensor2<Real>> {
    let header = lines
        .next()
        .ok_or_else(|| ScrError::Data(format!("missing tensor {expected_name}")))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "tensor" || parts[1] != expected_name {
        return Err(ScrError::Data(format!(
            "expected 'tensor {expected_name} rows cols', got: {header}"
        )));
    }
    let rows: usize = parts[2]
        .parse()
        .map_err(|_| ScrError::Data(format!("bad row count in: {header}")))?;
    let cols: usize = parts[3]
        .parse()
        .map_err(|_| ScrError::Data(format!("bad col count in: {header}")))?;
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines.next().ok_or_else(|| {
            ScrError::Data(format!("{expected_name}: missing row {r} of {rows}"))
        })?;
        let mut n = 0usize;
        for tok in line.split(' ') {
            let v: Real = tok.parse().map_err(|_| {
                ScrError::Data(format!("{expected_name} row {r}: bad number {tok:?}"))
            })?;
            data.push(v);
            n += 1;
        }
        if n != cols {
            return Err(ScrError::Data(format!(
                "{expected_name} row {r}: {n} values, expected {cols}"
            )));
        }
    }
    Tensor2::from_vec(rows, cols, data)
}

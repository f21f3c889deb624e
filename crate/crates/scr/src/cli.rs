//! Command-line pipeline: synth, train, eval, inject, grad-check.
//!
//! Every run writes a manifest before training; checkpoints and reports embed
//! its hash and mismatches are rejected. Exit codes: 0 success, 1 usage
//! error, 2 data error, 3 numeric failure.

use crate::checkpoint::{
    load_click_vae, load_text_encoder, save_click_vae, save_text_encoder, CheckpointHeader,
};
use crate::clickvae::{train_click_vae, ClickVaeModel, RecommendMode, VaeTrainConfig};
use crate::data::io::{
    load_dataset, write_clicks, write_embeddings, write_labels, write_truth, LoadedData,
};
use crate::data::sample::{build_labelprop_dataset, holdout_split};
use crate::data::synth::{synth_generate, SynthConfig};
use crate::data::{filter_interactions, EmbeddingIndex, HoldoutSplit};
use crate::error::{Result, ScrError};
use crate::eval::{
    ranking_report, style_report, variance_vs_k_study, RankingReport, StyleReport,
};
use crate::inject::{
    inject_style, measure_injection_shift, presence_gain, InjectionRequest,
};
use crate::manifest::{fnv1a64, RunManifest};
use crate::nncore::{dropout_mask, grad_check, Tensor2};
use crate::textenc::{
    train_text_encoder, LogisticBaseline, TextEncoderModel,
    TextEncoderVariant, TextTrainConfig,
};
use crate::Real;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "scr", version, about = "Style-conditioned recommender pipeline", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a planted-style synthetic dataset.
    Synth(SynthArgs),
    /// Train the text encoder, then the click VAE with the encoder frozen.
    Train(TrainArgs),
    /// Ranking, style, and variance reports on the masked holdout.
    Eval(EvalArgs),
    /// Style injection: per-user ranked lists or the full shift matrix.
    Inject(InjectArgs),
    /// Finite-difference verification of all analytic gradients.
    GradCheck(GradCheckArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory for clicks/embeddings/labels/truth files.
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_users: usize,
    #[arg(long, default_value_t = 500)]
    n_items: usize,
    #[arg(long, default_value_t = 8)]
    n_styles: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0.06)]
    density: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0.2)]
    label_frac: f64,
    #[arg(long, default_value_t = 0.137)]
    multi_style_rate: f64,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    /// Directory holding clicks.tsv, embeddings.tsv, labels.tsv.
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Output directory for the manifest, checkpoints, and loss curves.
    #[arg(long, default_value = "model")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.17)]
    beta: f64,
    #[arg(long, default_value_t = 60)]
    epochs_text: usize,
    #[arg(long, default_value_t = 60)]
    epochs_vae: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Items sampled per user content vector.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Label-propagation passes over the users.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 128)]
    text_hidden1: usize,
    #[arg(long, default_value_t = 64)]
    text_hidden2: usize,
    #[arg(long, default_value_t = 0.5)]
    text_dropout: f64,
    /// Text-encoder head: plain or gaussian-prior.
    #[arg(long, default_value = "plain")]
    text_variant: String,
    #[arg(long, default_value_t = 100)]
    vae_hidden: usize,
    #[arg(long, default_value_t = 32)]
    latent: usize,
    /// Dropout on the latent code at the decoder input. High rates make the
    /// latent unreliable during training, which forces style information onto
    /// the condition and is what makes injection steer.
    #[arg(long, default_value_t = 0.8)]
    decoder_dropout: f64,
    /// Train the unconditioned VAE-CF ablation (no text encoder).
    #[arg(long, default_value_t = false)]
    no_condition: bool,
    #[arg(long, default_value_t = 15)]
    min_items_per_user: usize,
    #[arg(long, default_value_t = 30)]
    min_users_per_item: usize,
    #[arg(long, default_value_t = 0.05)]
    heldout_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    mask_fraction: f64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Model directory written by `train`.
    #[arg(long, default_value = "model")]
    model: PathBuf,
    /// Optional second model directory (e.g. the unconditioned ablation).
    #[arg(long)]
    ablation: Option<PathBuf>,
    /// Output directory for reports; defaults to the model directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Profile construction at evaluation: sample-k or last-k.
    #[arg(long, default_value = "sample-k")]
    mode: String,
    /// Comma-separated ascending k values for the variance study.
    #[arg(long, default_value = "1,5,50")]
    variance_ks: String,
}

#[derive(Args, Debug)]
struct InjectArgs {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "model")]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Style name to inject, or "all" for the full shift matrix.
    #[arg(long, default_value = "all")]
    style: String,
    /// Explicit decoder profile file (one line of comma-separated values in
    /// [0,1]); overrides --style.
    #[arg(long)]
    target_profile: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    top_n: usize,
    /// Cap on the number of heldout users processed.
    #[arg(long)]
    users: Option<usize>,
    #[arg(long, default_value = "sample-k")]
    mode: String,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

/// Parses argv (after `--config FILE` expansion) and runs one command,
/// returning the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let argv = match expand_config_file(args.into_iter().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Inject(a) => cmd_inject(&a),
        Command::GradCheck(a) => cmd_grad_check(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &ScrError) -> i32 {
    match e {
        ScrError::Config(_) => 1,
        ScrError::Data(_) | ScrError::Io(_) => 2,
        ScrError::Numeric(_) | ScrError::Domain(_) | ScrError::Shape(_) => 3,
    }
}

/// Replaces `--config FILE` with the file's key=value lines as `--key=value`
/// flags, inserted before the remaining flags so explicit flags win.
fn expand_config_file(argv: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = argv.iter().position(|a| a == "--config") else {
        return Ok(argv);
    };
    let path = argv.get(pos + 1).ok_or_else(|| {
        ScrError::Config("--config requires a file argument".into())
    })?;
    let text = std::fs::read_to_string(path)?;
    let mut from_file = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ScrError::Config(format!("{path}:{}: expected key=value", lineno + 1))
        })?;
        from_file.push(format!("--{}={}", key.trim(), value.trim()));
    }
    // argv = [bin, subcommand, ...flags...]; config flags go right after the
    // subcommand so later explicit flags override them
    let mut out: Vec<String> = argv[..pos.min(2)].to_vec();
    if pos < 2 {
        return Err(ScrError::Config(
            "--config must follow a subcommand".into(),
        ));
    }
    out.extend(from_file);
    out.extend(argv[2..pos].iter().cloned());
    out.extend(argv[pos + 2..].iter().cloned());
    Ok(out)
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_users: args.n_users,
        n_items: args.n_items,
        n_styles: args.n_styles,
        dim: args.dim,
        density: args.density,
        noise: args.noise,
        label_frac: args.label_frac,
        multi_style_rate: args.multi_style_rate,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let data = synth_generate(&cfg, &mut rng)?;
    std::fs::create_dir_all(&args.out)?;
    write_clicks(&args.out.join("clicks.tsv"), &data.clicks)?;
    write_embeddings(&args.out.join("embeddings.tsv"), &data.embeddings)?;
    write_labels(
        &args.out.join("labels.tsv"),
        &data.labels,
        data.embeddings.item_ids(),
    )?;
    let user_ids: Vec<String> = (0..data.clicks.n_users())
        .map(|u| data.clicks.user_id(u).to_string())
        .collect();
    write_truth(
        &args.out.join("truth.tsv"),
        &crate::data::synth::style_names(cfg.n_styles),
        &user_ids,
        &data.truth,
    )?;
    println!(
        "wrote {} users, {} items, {} interactions, {} labeled items to {}",
        data.clicks.n_users(),
        data.clicks.n_items(),
        data.clicks.interaction_count(),
        data.labels.n_labeled(),
        args.out.display()
    );
    Ok(())
}

fn train_config_map(args: &TrainArgs) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("beta".into(), args.beta.to_string());
    m.insert("epochs-text".into(), args.epochs_text.to_string());
    m.insert("epochs-vae".into(), args.epochs_vae.to_string());
    m.insert("batch-size".into(), args.batch_size.to_string());
    m.insert("learning-rate".into(), args.learning_rate.to_string());
    m.insert("k".into(), args.k.to_string());
    m.insert("repeats".into(), args.repeats.to_string());
    m.insert("text-hidden1".into(), args.text_hidden1.to_string());
    m.insert("text-hidden2".into(), args.text_hidden2.to_string());
    m.insert("text-dropout".into(), args.text_dropout.to_string());
    m.insert("text-variant".into(), args.text_variant.clone());
    m.insert("vae-hidden".into(), args.vae_hidden.to_string());
    m.insert("latent".into(), args.latent.to_string());
    m.insert("decoder-dropout".into(), args.decoder_dropout.to_string());
    m.insert("no-condition".into(), args.no_condition.to_string());
    m.insert(
        "min-items-per-user".into(),
        args.min_items_per_user.to_string(),
    );
    m.insert(
        "min-users-per-item".into(),
        args.min_users_per_item.to_string(),
    );
    m.insert("heldout-frac".into(), args.heldout_frac.to_string());
    m.insert("mask-fraction".into(), args.mask_fraction.to_string());
    m
}

fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(label.as_bytes());
    fnv1a64(&bytes)
}

/// Everything `eval` and `inject` must rebuild identically from a manifest.
struct PreparedRun {
    manifest: RunManifest,
    hash: String,
    data: LoadedData,
    split: HoldoutSplit,
}

fn config_value<T: std::str::FromStr>(m: &RunManifest, key: &str) -> Result<T> {
    m.config
        .get(key)
        .ok_or_else(|| ScrError::Data(format!("manifest missing config key {key}")))?
        .parse()
        .map_err(|_| ScrError::Data(format!("manifest config key {key} unparsable")))
}

/// Loads the dataset and re-derives the filter and holdout split exactly as
/// `train` produced them, from the manifest's own configuration.
fn prepare_run(data_dir: &Path, manifest: RunManifest) -> Result<PreparedRun> {
    let data = load_dataset(
        &data_dir.join("clicks.tsv"),
        &data_dir.join("embeddings.tsv"),
        &data_dir.join("labels.tsv"),
    )?;
    let min_u: usize = config_value(&manifest, "min-items-per-user")?;
    let min_i: usize = config_value(&manifest, "min-users-per-item")?;
    let heldout_frac: f64 = config_value(&manifest, "heldout-frac")?;
    let mask_fraction: f64 = config_value(&manifest, "mask-fraction")?;
    let filtered = filter_interactions(&data.clicks, min_u, min_i)?;
    let n_heldout = ((heldout_frac * filtered.n_users() as f64).floor() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(manifest.seed, "split"));
    let split = holdout_split(&filtered, n_heldout, mask_fraction, &mut rng)?;
    let hash = manifest.hash();
    Ok(PreparedRun {
        manifest,
        hash,
        data: LoadedData {
            clicks: filtered,
            ..data
        },
        split,
    })
}

fn write_curve(path: &Path, hash: &str, seed: u64, curve: &[f64]) -> Result<()> {
    let mut out = format!("# manifest {hash} seed {seed}\nepoch\tloss\n");
    for (e, l) in curve.iter().enumerate() {
        writeln!(out, "{e}\t{l}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    if !(0.0..1.0).contains(&args.heldout_frac) || args.heldout_frac <= 0.0 {
        return Err(ScrError::Config(format!(
            "heldout-frac must be in (0, 1), got {}",
            args.heldout_frac
        )));
    }
    let variant = TextEncoderVariant::from_name(&args.text_variant)?;
    std::fs::create_dir_all(&args.out)?;

    // manifest first, before any training
    let labels_peek = load_dataset(
        &args.data.join("clicks.tsv"),
        &args.data.join("embeddings.tsv"),
        &args.data.join("labels.tsv"),
    )?;
    let mut manifest = RunManifest::new(
        args.seed,
        train_config_map(args),
        labels_peek.labels.style_names().to_vec(),
    );
    for name in ["clicks.tsv", "embeddings.tsv", "labels.tsv"] {
        manifest.checksum_file(&args.data.join(name))?;
    }
    manifest.save(&args.out.join("manifest.json"))?;
    let run = prepare_run(&args.data, manifest)?;
    let header = CheckpointHeader {
        manifest_hash: run.hash.clone(),
        seed: run.manifest.seed,
        style_vocabulary: run.manifest.style_vocabulary.clone(),
    };
    let embeddings = EmbeddingIndex::build(&run.split.train, &run.data.embeddings)?;
    let n_styles = run.data.labels.n_styles();
    let dim = run.data.embeddings.dim();

    let text_encoder = if args.no_condition {
        None
    } else {
        let mut labelprop_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(args.seed, "labelprop"));
        let dataset = build_labelprop_dataset(
            &run.split.train,
            &run.data.labels,
            &embeddings,
            args.k,
            args.repeats,
            false,
            &mut labelprop_rng,
        )?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, "text-init"));
        let mut model = TextEncoderModel::<Real>::new(
            dim,
            args.text_hidden1,
            args.text_hidden2,
            n_styles,
            variant,
            args.text_dropout,
            &mut init_rng,
        );
        let cfg = TextTrainConfig {
            epochs: args.epochs_text,
            batch_size: args.batch_size,
            learning_rate: args.learning_rate,
            kl_weight: 1.0,
            seed: derive_seed(args.seed, "text-train"),
        };
        let curve = train_text_encoder(&mut model, &dataset, &cfg)?;
        save_text_encoder(&args.out.join("text_encoder.ckpt"), &model, &header)?;
        write_curve(
            &args.out.join("text_loss.tsv"),
            &run.hash,
            args.seed,
            &curve,
        )?;
        println!(
            "phase 1: text encoder trained on {} samples, final loss {:.6}",
            dataset.len(),
            curve.last().unwrap()
        );
        Some(model)
    };

    let cond_dim = if args.no_condition { 0 } else { n_styles };
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, "vae-init"));
    let mut vae = ClickVaeModel::<Real>::new(
        run.split.train.n_items(),
        cond_dim,
        args.vae_hidden,
        args.latent,
        args.decoder_dropout,
        &mut init_rng,
    );
    let cfg = VaeTrainConfig {
        beta: args.beta,
        k: args.k,
        epochs: args.epochs_vae,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        seed: derive_seed(args.seed, "vae-train"),
        beta_warmup: false,
    };
    let curve = train_click_vae(
        &mut vae,
        &run.split.train,
        text_encoder.as_ref(),
        &embeddings,
        &cfg,
    )?;
    save_click_vae(&args.out.join("click_vae.ckpt"), &vae, &header)?;
    write_curve(&args.out.join("vae_loss.tsv"), &run.hash, args.seed, &curve)?;
    println!(
        "phase 2: click VAE trained on {} users, final loss {:.6}",
        run.split.train.n_users(),
        curve.last().unwrap()
    );
    Ok(())
}

fn load_models(
    model_dir: &Path,
    hash: &str,
) -> Result<(ClickVaeModel<Real>, Option<TextEncoderModel<Real>>)> {
    let (vae, _) = load_click_vae(&model_dir.join("click_vae.ckpt"), Some(hash))?;
    let tenc_path = model_dir.join("text_encoder.ckpt");
    let tenc = if tenc_path.exists() {
        Some(load_text_encoder(&tenc_path, Some(hash))?.0)
    } else {
        None
    };
    if tenc.is_none() && vae.cond_dim() != 0 {
        return Err(ScrError::Data(format!(
            "{}: conditioned checkpoint without a text encoder",
            model_dir.display()
        )));
    }
    Ok((vae, tenc))
}

fn ranking_block(name: &str, r: &RankingReport) -> String {
    format!(
        "[{name}]\nndcg@20\t{:.6}\nndcg@50\t{:.6}\nrecall@20\t{:.6}\nrecall@50\t{:.6}\nusers\t{}\nskipped\t{}\n",
        r.ndcg20, r.ndcg50, r.recall20, r.recall50, r.per_user.len(), r.skipped_users
    )
}

fn style_block(r: &StyleReport) -> String {
    let mut out = String::from("style\tauc\tprevalence\n");
    for (i, name) in r.style_names.iter().enumerate() {
        let auc = r.auc[i]
            .map(|a| format!("{a:.6}"))
            .unwrap_or_else(|| "absent".into());
        writeln!(out, "{name}\t{auc}\t{:.6}", r.prevalence[i]).unwrap();
    }
    out
}

fn pearson_block(r: &StyleReport) -> String {
    let mut out = String::from("style");
    for name in &r.style_names {
        write!(out, "\t{name}").unwrap();
    }
    out.push('\n');
    for (i, name) in r.style_names.iter().enumerate() {
        out.push_str(name);
        for j in 0..r.style_names.len() {
            let v = r.pearson.get(i, j);
            if v.is_nan() {
                out.push_str("\tabsent");
            } else {
                write!(out, "\t{v:.6}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mode = RecommendMode::from_name(&args.mode)?;
    let manifest = RunManifest::load(&args.model.join("manifest.json"))?;
    let run = prepare_run(&args.data, manifest)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.model.clone());
    std::fs::create_dir_all(&out_dir)?;
    let (vae, tenc) = load_models(&args.model, &run.hash)?;
    if vae.n_items() != run.split.train.n_items() {
        return Err(ScrError::Data(format!(
            "checkpoint covers {} items but the filtered dataset has {}",
            vae.n_items(),
            run.split.train.n_items()
        )));
    }
    let embeddings = EmbeddingIndex::build(&run.split.train, &run.data.embeddings)?;
    let k: usize = config_value(&run.manifest, "k")?;
    let seed = run.manifest.seed;
    let tag = format!("# manifest {} seed {}\n", run.hash, seed);
    let mut summary = format!(
        "run manifest {} (seed {}, version {})\n\n",
        run.hash, seed, run.manifest.version
    );

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "eval-rank"));
    let report = ranking_report(&vae, tenc.as_ref(), &run.split, &embeddings, k, mode, &mut rng)?;
    let mut ranking_tsv = tag.clone();
    ranking_tsv.push_str("model\tndcg@20\tndcg@50\trecall@20\trecall@50\tusers\tskipped\n");
    writeln!(
        ranking_tsv,
        "scr\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
        report.ndcg20,
        report.ndcg50,
        report.recall20,
        report.recall50,
        report.per_user.len(),
        report.skipped_users
    )
    .unwrap();
    summary.push_str(&ranking_block("ranking: scr", &report));

    if let Some(ablation_dir) = &args.ablation {
        let ab_manifest = RunManifest::load(&ablation_dir.join("manifest.json"))?;
        let ab_hash = ab_manifest.hash();
        let (ab_vae, ab_tenc) = load_models(ablation_dir, &ab_hash)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "eval-rank"));
        let ab = ranking_report(
            &ab_vae,
            ab_tenc.as_ref(),
            &run.split,
            &embeddings,
            k,
            mode,
            &mut rng,
        )?;
        writeln!(
            ranking_tsv,
            "ablation\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
            ab.ndcg20,
            ab.ndcg50,
            ab.recall20,
            ab.recall50,
            ab.per_user.len(),
            ab.skipped_users
        )
        .unwrap();
        summary.push_str(&ranking_block("ranking: ablation", &ab));
        let abs = report.ndcg20 - ab.ndcg20;
        let rel = if ab.ndcg20 > 0.0 { abs / ab.ndcg20 } else { 0.0 };
        writeln!(
            summary,
            "ndcg@20 delta: {abs:+.6} absolute, {:+.2}% relative\n",
            rel * 100.0
        )
        .unwrap();
    }
    std::fs::write(out_dir.join("ranking.tsv"), &ranking_tsv)?;

    let mut per_user = tag.clone();
    per_user.push_str("user\tndcg@20\tndcg@50\trecall@20\trecall@50\n");
    for &(u, n20, n50, r20, r50) in &report.per_user {
        writeln!(
            per_user,
            "{}\t{n20:.6}\t{n50:.6}\t{r20:.6}\t{r50:.6}",
            run.split.train.user_id(u)
        )
        .unwrap();
    }
    std::fs::write(out_dir.join("ranking_per_user.tsv"), per_user)?;

    if let Some(tenc) = &tenc {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "eval-style"));
        let repeats: usize = config_value(&run.manifest, "repeats")?;
        let dataset = build_labelprop_dataset(
            &run.split.train,
            &run.data.labels,
            &embeddings,
            k,
            repeats.min(2),
            false,
            &mut rng,
        )?;
        let scores = tenc.encode_batch(&dataset.vectors)?;
        let sr = style_report(&scores, &dataset.profiles, &dataset.style_names)?;
        let mut style_tsv = tag.clone();
        style_tsv.push_str(&style_block(&sr));
        std::fs::write(out_dir.join("style.tsv"), style_tsv)?;
        let mut pearson_tsv = tag.clone();
        pearson_tsv.push_str(&pearson_block(&sr));
        std::fs::write(out_dir.join("pearson.tsv"), pearson_tsv)?;
        summary.push_str("[style]\n");
        summary.push_str(&style_block(&sr));
        summary.push('\n');
    }

    let ks = parse_k_list(&args.variance_ks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "eval-var"));
    let study = variance_vs_k_study(&embeddings, &run.split.train, &ks, &mut rng)?;
    let mut var_tsv = tag.clone();
    var_tsv.push_str("k\tmean_feature_variance\n");
    summary.push_str("[variance]\n");
    for &(kv, v) in &study {
        writeln!(var_tsv, "{kv}\t{v:.8}").unwrap();
        writeln!(summary, "k={kv}\tvariance {v:.8}").unwrap();
    }
    std::fs::write(out_dir.join("variance.tsv"), var_tsv)?;
    std::fs::write(out_dir.join("summary.txt"), &summary)?;
    println!("{summary}");
    Ok(())
}

fn parse_k_list(s: &str) -> Result<Vec<usize>> {
    let ks: std::result::Result<Vec<usize>, _> =
        s.split(',').map(|t| t.trim().parse()).collect();
    ks.map_err(|_| ScrError::Config(format!("bad k list: {s}")))
}

fn load_profile_file(path: &Path, n_styles: usize) -> Result<Vec<Real>> {
    let text = std::fs::read_to_string(path)?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| ScrError::Data(format!("{}: empty profile file", path.display())))?;
    let values: std::result::Result<Vec<Real>, _> = line
        .split([',', '\t'])
        .map(|t| t.trim().parse::<Real>())
        .collect();
    let values =
        values.map_err(|_| ScrError::Data(format!("{}: bad profile values", path.display())))?;
    if values.len() != n_styles {
        return Err(ScrError::Data(format!(
            "{}: profile has {} values, expected {}",
            path.display(),
            values.len(),
            n_styles
        )));
    }
    Ok(values)
}

fn cmd_inject(args: &InjectArgs) -> Result<()> {
    let mode = RecommendMode::from_name(&args.mode)?;
    let manifest = RunManifest::load(&args.model.join("manifest.json"))?;
    let run = prepare_run(&args.data, manifest)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.model.clone());
    std::fs::create_dir_all(&out_dir)?;
    let (vae, tenc) = load_models(&args.model, &run.hash)?;
    let Some(tenc) = tenc else {
        return Err(ScrError::Config(
            "style injection needs a conditioned model".into(),
        ));
    };
    let embeddings = EmbeddingIndex::build(&run.split.train, &run.data.embeddings)?;
    let k: usize = config_value(&run.manifest, "k")?;
    let seed = run.manifest.seed;
    let styles = &run.manifest.style_vocabulary;
    let tag = format!("# manifest {} seed {}\n", run.hash, seed);

    let n_users = args
        .users
        .unwrap_or(run.split.heldout_users.len())
        .min(run.split.heldout_users.len());
    let foldins: Vec<Vec<usize>> = run.split.foldin[..n_users].to_vec();
    let user_ids: Vec<String> = run.split.heldout_users[..n_users]
        .iter()
        .map(|&u| run.split.train.user_id(u).to_string())
        .collect();

    let target = match (&args.target_profile, args.style.as_str()) {
        (Some(path), _) => Some(load_profile_file(path, vae.cond_dim())?),
        (None, "all") => None,
        (None, name) => {
            let s = styles.iter().position(|n| n == name).ok_or_else(|| {
                ScrError::Config(format!(
                    "unknown style {name:?}; vocabulary: {}",
                    styles.join(", ")
                ))
            })?;
            let mut p = vec![0.0; vae.cond_dim()];
            p[s] = 1.0;
            Some(p)
        }
    };

    match target {
        Some(profile) => {
            let request = InjectionRequest::new(profile, args.top_n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "inject"));
            let mut out = tag.clone();
            out.push_str("user\titems\n");
            for (foldin, id) in foldins.iter().zip(&user_ids) {
                let items = inject_style(
                    &vae, &tenc, foldin, &embeddings, k, &request, mode, &mut rng,
                )?;
                let ids: Vec<&str> = items
                    .iter()
                    .map(|&i| run.split.train.item_id(i))
                    .collect();
                writeln!(out, "{id}\t{}", ids.join(",")).unwrap();
            }
            std::fs::write(out_dir.join("injected.tsv"), &out)?;
            println!(
                "wrote {} injected lists of {} items to {}",
                user_ids.len(),
                args.top_n,
                out_dir.join("injected.tsv").display()
            );
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "inject"));
            let shift =
                measure_injection_shift(&vae, &tenc, &foldins, &embeddings, k, styles, &mut rng)?;
            let mut out = tag.clone();
            out.push_str(&shift.to_tsv());
            std::fs::write(out_dir.join("shift_matrix.tsv"), &out)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "presence"));
            let gains = presence_gain(&vae, &tenc, &foldins, &embeddings, k, &mut rng)?;
            let mut gain_tsv = tag.clone();
            gain_tsv.push_str("style\tinjected_presence\tidentity_presence\trelative_gain\n");
            for (s, &(inj, ident)) in gains.iter().enumerate() {
                let rel = if ident > 0.0 { inj / ident - 1.0 } else { 0.0 };
                writeln!(
                    gain_tsv,
                    "{}\t{inj:.6}\t{ident:.6}\t{:+.2}%",
                    styles[s],
                    rel * 100.0
                )
                .unwrap();
            }
            std::fs::write(out_dir.join("presence_gain.tsv"), &gain_tsv)?;
            println!(
                "wrote shift matrix over {} users to {}",
                shift.n_users,
                out_dir.join("shift_matrix.tsv").display()
            );
        }
    }
    Ok(())
}

fn cmd_grad_check(args: &GradCheckArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failures = 0usize;
    let mut check = |name: &str, report: crate::nncore::GradCheckReport| {
        println!("{name}: {report}");
        if !report.pass {
            failures += 1;
        }
    };

    // ReLU pre-activations within reach of the finite-difference step make
    // numeric and analytic gradients legitimately disagree at the kink, so
    // reroll inputs until every hidden unit is safely away from zero.
    fn kink_free(model: &TextEncoderModel<Real>, x: &Tensor2<Real>) -> bool {
        let pre1 = x.matmul(&model.layer1.weights).unwrap();
        let h1 = model.layer1.forward(x).unwrap();
        let pre2 = h1.matmul(&model.layer2.weights).unwrap();
        let margin = 1e-2;
        let clear = |pre: &Tensor2<Real>, bias: &[Real]| {
            (0..pre.rows()).all(|r| {
                pre.row(r)
                    .iter()
                    .zip(bias)
                    .all(|(&v, &b)| (v + b).abs() > margin)
            })
        };
        clear(&pre1, &model.layer1.bias) && clear(&pre2, &model.layer2.bias)
    }

    for (label, variant) in [
        ("text-encoder plain", TextEncoderVariant::Plain),
        ("text-encoder gaussian-prior", TextEncoderVariant::GaussianPrior),
    ] {
        let model = TextEncoderModel::<Real>::new(6, 8, 5, 3, variant, 0.0, &mut rng);
        let mut x = crate::textenc::normal_tensor(4, 6, &mut rng);
        for _ in 0..100 {
            if kink_free(&model, &x) {
                break;
            }
            x = crate::textenc::normal_tensor(4, 6, &mut rng);
        }
        let t = Tensor2::from_vec(
            4,
            3,
            (0..12).map(|i| ((i * 7) % 3 == 0) as u8 as Real).collect(),
        )?;
        let eps = crate::textenc::normal_tensor(4, 3, &mut rng);
        let (_, grads) = model.batch_loss_and_grads(&x, &t, None, Some(&eps), 1.0)?;
        let params = model.flat_params();
        let mut probe = model.clone();
        let report = grad_check(
            |p: &[Real]| {
                probe.set_flat_params(p);
                probe.batch_loss(&x, &t, None, Some(&eps), 1.0).unwrap()
            },
            &params,
            &grads,
            args.tolerance,
        );
        check(label, report);
    }

    {
        let model = ClickVaeModel::<Real>::new(10, 2, 6, 4, 0.0, &mut rng);
        let mut x = Tensor2::zeros(3, 10);
        for (u, items) in [[0usize, 3, 7], [1, 2, 9], [4, 5, 6]].iter().enumerate() {
            for &i in items {
                x.set(u, i, 1.0);
            }
        }
        let cond =
            Tensor2::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.5]])?;
        let eps = crate::textenc::normal_tensor(3, 4, &mut rng);
        let mask = dropout_mask(3, 4, 0.3, &mut rng)?;
        let (_, _, grads) = model.batch_loss_and_grads(&x, &cond, &eps, Some(&mask), 0.17)?;
        let params = model.flat_params();
        let mut probe = model.clone();
        let report = grad_check(
            |p: &[Real]| {
                probe.set_flat_params(p);
                probe.batch_loss(&x, &cond, &eps, Some(&mask), 0.17).unwrap()
            },
            &params,
            &grads,
            args.tolerance,
        );
        check("click-vae (fixed eps)", report);
    }

    {
        let model = LogisticBaseline::<Real>::new(6, 3, &mut rng);
        let x = crate::textenc::normal_tensor(5, 6, &mut rng);
        let t = Tensor2::from_vec(
            5,
            3,
            (0..15).map(|i| ((i * 5) % 4 == 0) as u8 as Real).collect(),
        )?;
        let (_, grads) = model.batch_loss_and_grads(&x, &t)?;
        let params = model.flat_params();
        let mut probe = model.clone();
        let report = grad_check(
            |p: &[Real]| {
                probe.set_flat_params(p);
                probe.batch_loss(&x, &t).unwrap()
            },
            &params,
            &grads,
            args.tolerance,
        );
        check("lr-baseline", report);
    }

    if failures > 0 {
        return Err(ScrError::Numeric(format!(
            "{failures} gradient check(s) failed"
        )));
    }
    println!("all gradient checks passed");
    Ok(())
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use mdvqa_core::eval::{crf_summary_for, run_protocol, split_dataset, write_crf_csv, ProtocolConfig};
use mdvqa_core::features::{
    extract_video, read_feature_file, to_feature_files, FileProvider, MotionProvider, SemanticProvider,
    ToyMotionBackbone, ToySemanticBackbone,
};
use mdvqa_core::media::{read_frame_dir, read_y4m, SamplerConfig};
use mdvqa_core::model::{
    load_model, predict_clips, save_model, train, LabeledVideo, ModelDims, ModelParams, TrainConfig,
};
use mdvqa_core::study::{read_ratings_csv, run_study, RejectionOrder, StudyConfig};
use mdvqa_core::{Manifest, ManifestEntry};

use crate::config::{FileConfig, Provider, Rejection};
use crate::{
    Command, CrfArgs, EvalArgs, ExtractArgs, MosArgs, PredictArgs, ServeArgs, SplitArgs, TrainArgs, TrainFlags,
};

const DEFAULT_L: usize = 8;

pub fn run(cmd: Command, cfg: &FileConfig) -> Result<()> {
    match cmd {
        Command::Extract(a) => extract(a, cfg),
        Command::Train(a) => train_cmd(a, cfg),
        Command::Predict(a) => predict(a, cfg),
        Command::Eval(a) => eval(a, cfg),
        Command::Mos(a) => mos(a, cfg),
        Command::Split(a) => split(a, cfg),
        Command::CrfSummary(a) => crf(a, cfg),
        Command::Serve(a) => serve(a, cfg),
    }
}

fn required<T>(flag: Option<T>, file: &Option<T>, name: &str) -> Result<T>
where
    T: Clone,
{
    flag.or_else(|| file.clone())
        .ok_or_else(|| anyhow!("--{name} is required (flag or config key)"))
}

fn existing(path: PathBuf, what: &str) -> Result<PathBuf> {
    ensure!(path.exists(), "{what} {} does not exist", path.display());
    Ok(path)
}

/// Buffered writer for `path`, or stdout.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn video_id(path: &Path) -> Result<String> {
    let stem = if path.is_dir() {
        path.file_name()
    } else {
        path.file_stem()
    };
    stem.and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| anyhow!("cannot derive a video id from {}", path.display()))
}

/// Path as stored in a manifest: relative when under its directory.
fn manifest_path(manifest_dir: &Path, file: &Path) -> PathBuf {
    let (Ok(dir), Ok(abs)) = (manifest_dir.canonicalize(), file.canonicalize()) else {
        return file.to_path_buf();
    };
    abs.strip_prefix(&dir).map(Path::to_path_buf).unwrap_or(abs)
}

fn load_manifest(path: &Path) -> Result<Manifest> {
    let m = Manifest::load(path).with_context(|| format!("loading manifest {}", path.display()))?;
    m.validate().with_context(|| format!("manifest {}", path.display()))?;
    Ok(m)
}

fn labeled_videos(manifest: &Manifest) -> Result<Vec<LabeledVideo>> {
    let unlabeled = manifest.unlabeled();
    ensure!(
        unlabeled.is_empty(),
        "{} manifest entries have no mos: {}",
        unlabeled.len(),
        unlabeled.join(", ")
    );
    ensure!(!manifest.entries.is_empty(), "manifest has no entries");
    manifest
        .entries
        .iter()
        .map(|(id, e)| {
            Ok(LabeledVideo {
                id: id.clone(),
                clips: manifest.load_features(id)?,
                mos: e.mos.expect("checked above"),
            })
        })
        .collect()
}

fn train_config(flags: &TrainFlags, cfg: &FileConfig, seed: u64) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let tc = TrainConfig {
        max_epochs: flags.epochs.or(cfg.epochs).unwrap_or(d.max_epochs),
        learning_rate: flags.lr.or(cfg.lr).unwrap_or(d.learning_rate),
        batch_size: flags.batch_size.or(cfg.batch_size).unwrap_or(d.batch_size),
        seed,
        ..d
    };
    tc.validate()?;
    Ok(tc)
}

/// Model widths for the data; `--L` must agree with the features.
fn model_dims(flags: &TrainFlags, cfg: &FileConfig, videos: &[LabeledVideo]) -> Result<ModelDims> {
    let clip = videos
        .iter()
        .find_map(|v| v.clips.first())
        .ok_or_else(|| anyhow!("no video has any clips"))?;
    if let Some(l) = flags.l.or(cfg.l) {
        ensure!(
            l == clip.half_samples(),
            "--L {l} but the features were extracted with L={}",
            clip.half_samples()
        );
    }
    let mut dims = ModelDims::for_features(clip.half_samples(), clip.dims());
    let widths = match &flags.dims {
        Some(w) => Some(*w),
        None => cfg.dims.as_deref().map(str::parse).transpose()?,
    };
    if let Some(w) = widths {
        w.apply(&mut dims);
    }
    Ok(dims)
}

fn extract(a: ExtractArgs, cfg: &FileConfig) -> Result<()> {
    let out = required(a.out, &cfg.out, "out")?;
    let l = a.l.or(cfg.l).unwrap_or(DEFAULT_L);
    ensure!(l >= 1, "--L must be at least 1");
    let provider = a.provider.or(cfg.provider).unwrap_or(Provider::Toy);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let manifest_file = a
        .manifest
        .or(cfg.manifest.clone())
        .unwrap_or_else(|| out.join("manifest.json"));
    let inputs = a
        .inputs
        .into_iter()
        .map(|p| existing(p, "input"))
        .collect::<Result<Vec<_>>>()?;
    let ids = inputs.iter().map(|p| video_id(p)).collect::<Result<Vec<_>>>()?;

    let (semantic, motion): (Box<dyn SemanticProvider>, Box<dyn MotionProvider>) = match provider {
        Provider::Toy => (
            Box::new(ToySemanticBackbone::new(seed)),
            Box::new(ToyMotionBackbone::new(seed)),
        ),
        Provider::Files => {
            let dir = a
                .features_dir
                .or(cfg.features_dir.clone())
                .ok_or_else(|| anyhow!("--provider files needs --features-dir"))?;
            let mut sem = FileProvider::semantic(l);
            let mut mot = FileProvider::motion();
            for id in &ids {
                for (kind, p) in [("semantic", &mut sem), ("motion", &mut mot)] {
                    let path = dir.join(format!("{id}.{kind}.feat"));
                    let file = read_feature_file(&path).with_context(|| format!("video '{id}': {}", path.display()))?;
                    p.register(id.clone(), file)?;
                }
            }
            (Box::new(sem), Box::new(mot))
        }
    };

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = if manifest_file.exists() {
        Manifest::load(&manifest_file)?
    } else {
        let base = manifest_file
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        std::fs::create_dir_all(base)?;
        Manifest::new(base)
    };
    let sampler = SamplerConfig { half_samples: l };
    for (input, id) in inputs.iter().zip(&ids) {
        let seq = if input.is_dir() {
            read_frame_dir(input)
        } else {
            read_y4m(input)
        }
        .with_context(|| format!("decoding {}", input.display()))?;
        let clips = extract_video(id, &seq, sampler, semantic.as_ref(), motion.as_ref())
            .with_context(|| format!("extracting {}", input.display()))?;
        let mut entry = manifest
            .entries
            .remove(id)
            .unwrap_or_else(|| ManifestEntry::new(clips.len(), l));
        entry.clip_count = clips.len();
        entry.half_samples = l;
        let files = to_feature_files(&clips)?;
        for (file, kind) in files.iter().zip(["semantic", "distortion", "motion"]) {
            let path = out.join(format!("{id}.{kind}.feat"));
            std::fs::write(&path, file.to_bytes()).with_context(|| format!("writing {}", path.display()))?;
            let stored = Some(manifest_path(manifest.base_dir(), &path));
            match kind {
                "semantic" => entry.semantic_path = stored,
                "distortion" => entry.distortion_path = stored,
                _ => entry.motion_path = stored,
            }
        }
        entry.fps.get_or_insert(seq.rate().fps());
        manifest.entries.insert(id.clone(), entry);
        println!("{id}: {} clips", clips.len());
    }
    manifest.save(&manifest_file)?;
    tracing::info!(manifest = %manifest_file.display(), videos = ids.len(), "manifest written");
    Ok(())
}

fn train_cmd(a: TrainArgs, cfg: &FileConfig) -> Result<()> {
    let manifest_file = existing(required(a.manifest, &cfg.manifest, "manifest")?, "manifest")?;
    let out = required(a.out, &cfg.out, "out")?;
    let loss_csv = a
        .loss_csv
        .or(cfg.loss_csv.clone())
        .unwrap_or_else(|| out.with_extension("loss.csv"));
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let tc = train_config(&a.train, cfg, seed)?;
    let manifest = load_manifest(&manifest_file)?;
    let videos = labeled_videos(&manifest)?;
    let dims = model_dims(&a.train, cfg, &videos)?;
    let outcome = train(&videos, &tc, ModelParams::init(dims, seed)?)?;
    let mut params = outcome.params;
    params.quantize_f32();
    save_model(&params, &out).with_context(|| format!("writing {}", out.display()))?;

    let mut w = csv::Writer::from_writer(output(Some(&loss_csv))?);
    for rec in &outcome.history {
        w.serialize(rec)?;
    }
    w.flush()?;
    if let Some(last) = outcome.history.last() {
        println!("trained {} epochs, final loss {:.6}", last.epoch + 1, last.loss);
    }
    Ok(())
}

fn predict(a: PredictArgs, cfg: &FileConfig) -> Result<()> {
    let model_file = existing(required(a.model, &cfg.model, "model")?, "model")?;
    let manifest_file = existing(required(a.manifest, &cfg.manifest, "manifest")?, "manifest")?;
    let params = load_model(&model_file).with_context(|| format!("loading {}", model_file.display()))?;
    let manifest = load_manifest(&manifest_file)?;
    let mut w = csv::Writer::from_writer(output(a.out.or(cfg.out.clone()).as_deref())?);
    w.write_record(["video_id", "score"])?;
    for id in manifest.entries.keys() {
        let clips = manifest.load_features(id)?;
        let q = predict_clips(&clips, &params).with_context(|| format!("video '{id}'"))?;
        w.write_record([id.as_str(), &q.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn eval(a: EvalArgs, cfg: &FileConfig) -> Result<()> {
    let manifest_file = existing(required(a.manifest, &cfg.manifest, "manifest")?, "manifest")?;
    let out = required(a.out, &cfg.out, "out")?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let d = ProtocolConfig::default();
    let manifest = load_manifest(&manifest_file)?;
    let videos = labeled_videos(&manifest)?;
    let pc = ProtocolConfig {
        n_splits: a.splits.or(cfg.splits).unwrap_or(d.n_splits),
        ratio: a.ratio.or(cfg.ratio).unwrap_or(d.ratio),
        seed,
        grouped: a.grouping.get().or(cfg.grouped).unwrap_or(d.grouped),
        train: train_config(&a.train, cfg, seed)?,
        dims: Some(model_dims(&a.train, cfg, &videos)?),
    };
    let report = run_protocol(&manifest, &videos, &pc)?;
    std::fs::create_dir_all(&out)?;
    report.write_splits_csv(output(Some(&out.join("splits.csv")))?)?;
    report.write_json(output(Some(&out.join("report.json")))?)?;
    println!(
        "{} splits: SRCC {:.4} +- {:.4}, PLCC {:.4} +- {:.4}",
        report.n_splits, report.srcc_mean, report.srcc_std, report.plcc_mean, report.plcc_std
    );
    Ok(())
}

fn mos(a: MosArgs, cfg: &FileConfig) -> Result<()> {
    let ratings = existing(a.ratings, "ratings file")?;
    let manifest_file = a.manifest.or(cfg.manifest.clone());
    let rejection = match a.rejection.or(cfg.rejection) {
        None | Some(Rejection::BeforeZscore) => RejectionOrder::BeforeZScore,
        Some(Rejection::AfterZscore) => RejectionOrder::AfterZScore,
        Some(Rejection::Disabled) => RejectionOrder::Disabled,
    };
    let file = File::open(&ratings).with_context(|| format!("opening {}", ratings.display()))?;
    let records = read_ratings_csv(file).with_context(|| format!("reading {}", ratings.display()))?;
    let report = run_study(&records, StudyConfig { rejection })?;
    eprintln!(
        "{} ratings from {} subjects; rejected: {}",
        report.ratings,
        report.subjects,
        if report.rejected_subjects.is_empty() {
            "none".to_string()
        } else {
            report.rejected_subjects.join(", ")
        }
    );
    report.mos.write_csv(output(a.out.or(cfg.out.clone()).as_deref())?)?;
    if let Some(path) = manifest_file {
        let mut manifest = Manifest::load(&path)?;
        let mut updated = 0;
        for row in &report.mos.rows {
            if let Some(e) = manifest.entries.get_mut(&row.video_id) {
                e.mos = Some(row.mos);
                updated += 1;
            }
        }
        manifest.save(&path)?;
        eprintln!("{updated} manifest entries labeled");
    }
    Ok(())
}

fn split(a: SplitArgs, cfg: &FileConfig) -> Result<()> {
    let manifest_file = existing(required(a.manifest, &cfg.manifest, "manifest")?, "manifest")?;
    let out = required(a.out, &cfg.out, "out")?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let n = a.splits.or(cfg.splits).unwrap_or(1);
    let ratio = a.ratio.or(cfg.ratio).unwrap_or(0.8);
    let grouped = a.grouping.get().or(cfg.grouped).unwrap_or(true);
    let manifest = load_manifest(&manifest_file)?;
    std::fs::create_dir_all(&out)?;
    for s in 0..n {
        let split = split_dataset(&manifest, ratio, seed + s as u64, grouped)?;
        let path = out.join(format!("split_{s:03}.json"));
        let doc = serde_json::json!({"split": s, "seed": seed + s as u64, "train": split.train, "test": split.test});
        std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{}: {} train, {} test",
            path.display(),
            doc["train"].as_array().map_or(0, Vec::len),
            doc["test"].as_array().map_or(0, Vec::len)
        );
    }
    Ok(())
}

fn crf(a: CrfArgs, cfg: &FileConfig) -> Result<()> {
    let manifest_file = existing(required(a.manifest, &cfg.manifest, "manifest")?, "manifest")?;
    let manifest = Manifest::load(&manifest_file)?;
    let scores = match a.scores.or(cfg.scores.clone()) {
        None => None,
        Some(p) => {
            let mut rdr = csv::Reader::from_path(&p).with_context(|| format!("opening {}", p.display()))?;
            let mut map = BTreeMap::new();
            for row in rdr.deserialize::<(String, f64)>() {
                let (id, s) = row.with_context(|| format!("reading {}", p.display()))?;
                map.insert(id, s);
            }
            Some(map)
        }
    };
    let rows = crf_summary_for(&manifest, scores.as_ref());
    if rows.is_empty() {
        bail!("no manifest entry has a score");
    }
    write_crf_csv(&rows, output(a.out.or(cfg.out.clone()).as_deref())?)?;
    Ok(())
}

fn serve(a: ServeArgs, cfg: &FileConfig) -> Result<()> {
    let manifest = existing(required(a.manifest, &cfg.manifest, "manifest")?, "manifest")?;
    let media = existing(required(a.media_dir, &cfg.media_dir, "media-dir")?, "media dir")?;
    let data = required(a.data_dir, &cfg.data_dir, "data-dir")?;
    let mut sc = mdvqa_server::ServerConfig::new(manifest, media, data);
    if let Some(addr) = a.addr.or(cfg.addr) {
        sc.addr = addr;
    }
    sc.seed = a.seed.or(cfg.seed).unwrap_or(0);
    sc.playlist_size = a.playlist_size.or(cfg.playlist_size).unwrap_or(sc.playlist_size);
    ensure!(sc.playlist_size > 0, "--playlist-size must be positive");
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(mdvqa_server::serve(sc))?;
    Ok(())
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cadas_core::grading::{wknn_classify, ModelSidecar, TrainingSet};
use cadas_core::model::{parse_annotation, serialize_annotation};
use cadas_core::morphometrics::{build_feature_vector, feature_columns, read_features_csv, write_features_csv};
use cadas_core::overlap::resolve_cells;
use cadas_core::pipeline::{self, io, Config, FeatureCache, Manifest, ManifestEntry};
use cadas_core::synth::{generate, SynthSpec};
use cadas_core::Grade;
use clap::Args;

/// Exit status when more than the allowed share of entries failed.
pub const EXIT_ENTRY_FAILURES: u8 = 2;

#[derive(Args)]
pub struct ConfigArg {
    /// Pipeline configuration (TOML, or JSON); defaults apply when omitted
    #[arg(long, short)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<Config> {
        Ok(match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        })
    }
}

fn stem_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sep".into())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Args)]
pub struct SegmentArgs {
    #[arg(long)]
    image: PathBuf,
    /// Output mask (1-bit PNG)
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

pub fn segment(a: SegmentArgs) -> Result<u8> {
    let cfg = a.config.load()?;
    let sep = io::load_sep(&a.image, &stem_id(&a.image))?;
    let (mask, summary) = pipeline::segment(&sep, &cfg.segmentation)?;
    io::save_mask_png(&mask, &a.out)?;
    println!("config fingerprint: {}", cfg.fingerprint());
    println!("{}", serde_json::to_string(&summary)?);
    Ok(0)
}

#[derive(Args)]
pub struct ResolveArgs {
    /// Nuclei mask from `segment`
    #[arg(long)]
    mask: PathBuf,
    /// Output label image (16-bit PNG, 0 = background, i+1 = cell i)
    #[arg(long)]
    labels: PathBuf,
    /// Output cell table
    #[arg(long)]
    cells: PathBuf,
    #[arg(long)]
    id: Option<String>,
    #[command(flatten)]
    config: ConfigArg,
}

pub fn resolve(a: ResolveArgs) -> Result<u8> {
    let cfg = a.config.load()?;
    let mask = io::load_mask_png(&a.mask)?;
    let res = resolve_cells::<f64>(&mask, &cfg.overlap)?;
    io::save_label_png(mask.width(), mask.height(), &res.cells, &a.labels)?;
    let id = a.id.unwrap_or_else(|| stem_id(&a.mask));
    fs::write(&a.cells, io::cells_csv(&id, &res.cells, true)?)?;
    let split = res.components.iter().filter(|c| c.cells > 1).count();
    println!("config fingerprint: {}", cfg.fingerprint());
    println!("{} components, {split} split, {} cells", res.components.len(), res.cells.len());
    Ok(0)
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    annotation: PathBuf,
    /// Label image from `resolve`
    #[arg(long)]
    labels: PathBuf,
    /// Cell table from `resolve`; geometry is refit from the labels without it
    #[arg(long)]
    cells: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    /// Reference grade to record in the label column
    #[arg(long)]
    label: Option<Grade>,
    /// Output feature table; stdout when omitted
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

pub fn features(a: FeaturesArgs) -> Result<u8> {
    let cfg = a.config.load()?;
    let id = a.id.clone().unwrap_or_else(|| stem_id(&a.image));
    let sep = io::load_sep(&a.image, &id)?;
    let text = fs::read_to_string(&a.annotation).with_context(|| a.annotation.display().to_string())?;
    let ann = parse_annotation(&text, Some((sep.width(), sep.height())))?;
    let (w, h, labels) = io::load_label_png(&a.labels)?;
    if (w, h) != (sep.width(), sep.height()) {
        bail!("label image is {w}x{h}, patch is {}x{}", sep.width(), sep.height());
    }
    let table = a.cells.as_deref().map(fs::read_to_string).transpose()?;
    let cells = io::cells_from_labels(labels, table.as_deref())?;
    let mask = cadas_core::segmentation::BinaryMask::new(w, h);
    let mut fv = build_feature_vector(&sep, &ann, &cells, &mask, &cfg.morphometrics)?;
    fv.label = a.label;
    write_or_print(a.out.as_deref(), &write_features_csv(&[fv])?)?;
    Ok(0)
}

#[derive(Args)]
pub struct GradeArgs {
    /// Labelled feature table used as the training set
    #[arg(long)]
    train: PathBuf,
    /// Feature table to grade
    #[arg(long)]
    query: PathBuf,
    /// Neighbour count; the config value when omitted
    #[arg(long)]
    k: Option<usize>,
    /// Output predictions table; stdout when omitted
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the fitted normalizer and k as JSON
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

pub fn grade(a: GradeArgs) -> Result<u8> {
    let cfg = a.config.load()?;
    let k = a.k.unwrap_or(cfg.grading.k);
    let train = read_features_csv(&fs::read_to_string(&a.train)?)?;
    let labelled: Vec<_> = train.iter().filter(|f| f.label.is_some()).collect();
    if labelled.is_empty() {
        bail!("{}: no labelled rows", a.train.display());
    }
    let raw: Vec<_> = labelled.iter().map(|f| f.values).collect();
    let labels = labelled.iter().map(|f| f.label.expect("filtered")).collect();
    let t = TrainingSet::fit(&raw, labels)?;
    let query = read_features_csv(&fs::read_to_string(&a.query)?)?;
    let rows = query
        .iter()
        .map(|q| Ok((q.sep_id.clone(), q.label, None, wknn_classify(q, &t, k)?)))
        .collect::<cadas_core::Result<Vec<_>>>()?;
    write_or_print(a.out.as_deref(), &pipeline::predictions_csv(&rows)?)?;
    if let Some(p) = a.model {
        let sidecar = ModelSidecar {
            k,
            columns: feature_columns(),
            normalizer: t.normalizer().clone(),
        };
        fs::write(p, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    }
    Ok(0)
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Predictions table with label and predicted columns
    #[arg(long)]
    predictions: PathBuf,
    /// Print JSON rather than text
    #[arg(long)]
    json: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

pub fn evaluate(a: EvaluateArgs) -> Result<u8> {
    let cfg = a.config.load()?;
    let rows = pipeline::read_predictions_csv(&fs::read_to_string(&a.predictions)?)?;
    let (predicted, reference): (Vec<Grade>, Vec<Grade>) = rows.iter().map(|(_, p, r)| (*p, *r)).unzip();
    let protocol = format!("predictions from {}", a.predictions.display());
    let report = pipeline::evaluation_report(&predicted, &reference, &cfg.fingerprint(), protocol, Vec::new())?;
    let text = if a.json { report.to_json() } else { report.to_text() };
    write_or_print(a.out.as_deref(), &text)?;
    Ok(0)
}

#[derive(Args)]
pub struct AgreementArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    json: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

pub fn agreement(a: AgreementArgs) -> Result<u8> {
    let cfg = a.config.load()?;
    let text = fs::read_to_string(&a.manifest).with_context(|| a.manifest.display().to_string())?;
    // only the label columns matter here, so files need not exist
    let m = Manifest::parse(&text, a.manifest.parent().unwrap_or(Path::new(".")))?;
    let report = pipeline::rater_agreement(&m, &cfg.fingerprint())?;
    let text = if a.json { report.to_json() } else { report.to_text() };
    write_or_print(a.out.as_deref(), &text)?;
    Ok(0)
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory (created if missing)
    #[arg(long, short)]
    out: PathBuf,
    /// Patches per grade
    #[arg(long, default_value_t = 3)]
    per_grade: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator settings as TOML or JSON; grade and seed are overridden
    #[arg(long)]
    spec: Option<PathBuf>,
}

pub fn synth(a: SynthArgs) -> Result<u8> {
    let base = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            if text.trim_start().starts_with('{') {
                serde_json::from_str(&text)?
            } else {
                toml::from_str(&text)?
            }
        }
        None => SynthSpec::default(),
    };
    fs::create_dir_all(&a.out)?;
    let mut entries = Vec::new();
    for (gi, &grade) in Grade::ALL.iter().enumerate() {
        for i in 0..a.per_grade {
            let seed = a.seed.wrapping_mul(1_000_003).wrapping_add((gi * a.per_grade + i) as u64);
            let s = generate(&SynthSpec {
                grade,
                seed,
                ..base.clone()
            })?;
            let id = s.sep.id().to_string();
            let image = a.out.join(format!("{id}.png"));
            let annotation = a.out.join(format!("{id}.json"));
            io::save_rgb_png(s.sep.image(), &image)?;
            fs::write(&annotation, serialize_annotation(&s.annotation))?;
            fs::write(a.out.join(format!("{id}.truth.csv")), s.truth_csv())?;
            entries.push(ManifestEntry {
                sep_id: id,
                image,
                annotation,
                label: Some(grade),
                label2: None,
            });
        }
    }
    let manifest = Manifest { entries };
    let path = a.out.join("manifest.csv");
    fs::write(&path, manifest.to_csv(&a.out)?)?;
    println!("{} patches, manifest at {}", manifest.entries.len(), path.display());
    Ok(0)
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for tables and reports
    #[arg(long, short)]
    out: PathBuf,
    /// Feature cache directory; CADAS_CACHE_DIR, then <out>/cache otherwise
    #[arg(long)]
    cache: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

pub fn run(a: RunArgs) -> Result<u8> {
    let cfg = a.config.load()?;
    let manifest = Manifest::load(&a.manifest)?;
    let cache = match a.cache {
        Some(d) => FeatureCache::new(d),
        None => FeatureCache::from_env(&a.out.join("cache")),
    };
    let outcome = pipeline::run(&manifest, &cfg, &a.out, &cache)?;
    print!("{}", outcome.report_text);
    for f in &outcome.failures {
        eprintln!("failed {}: {}", f.sep_id, f.error);
    }
    eprintln!(
        "{} entries, {} failed, {} from cache",
        outcome.entries(),
        outcome.failures.len(),
        outcome.cache_hits
    );
    Ok(if outcome.too_many_failures() { EXIT_ENTRY_FAILURES } else { 0 })
}

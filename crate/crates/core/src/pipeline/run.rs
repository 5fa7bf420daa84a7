use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::cache::FeatureCache;
use super::config::Config;
use super::manifest::{Manifest, ManifestEntry};
use super::stages::analyze;
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, AgreementReport, ConfusionMatrix, EvaluationReport, MatrixSummary, AGREEMENT_FOOTNOTE};
use crate::grading::{cin_to_sil, GradedResult};
use crate::model::{parse_annotation, ClassLabel, Grade, SepImage, SilGrade};
use crate::morphometrics::{read_features_csv, write_features_csv, FeatureVector};
use crate::numfmt::sig6;

/// Share of failed entries above which a run counts as failed.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone)]
pub struct EntryFailure {
    pub sep_id: String,
    pub error: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub fingerprint: String,
    pub features: Vec<FeatureVector<f64>>,
    pub failures: Vec<EntryFailure>,
    pub cache_hits: usize,
    pub report: Option<EvaluationReport>,
    pub report_text: String,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn entries(&self) -> usize {
        self.features.len() + self.failures.len()
    }

    pub fn too_many_failures(&self) -> bool {
        let n = self.entries();
        n > 0 && self.failures.len() as f64 > MAX_FAILURE_RATE * n as f64
    }
}

/// Feature vector of one manifest entry, through the cache.
pub fn entry_features(entry: &ManifestEntry, cfg: &Config, fingerprint: &str, cache: &FeatureCache) -> Result<(FeatureVector<f64>, bool)> {
    let image_bytes = std::fs::read(&entry.image)?;
    let annotation_bytes = std::fs::read(&entry.annotation)?;
    let key = FeatureCache::key(fingerprint, &entry.sep_id, &image_bytes, &annotation_bytes);
    if let Some(mut fv) = cache.get(&key) {
        fv.label = entry.label;
        return Ok((fv, true));
    }
    let img = image::load_from_memory(&image_bytes)
        .map_err(|e| Error::InvalidImage(format!("{}: {e}", entry.image.display())))?
        .to_rgb8();
    let sep = SepImage::new(entry.sep_id.clone(), img)?;
    let text = String::from_utf8(annotation_bytes)
        .map_err(|_| Error::AnnotationSyntax { line: 1, message: "not UTF-8".into() })?;
    let annotation = parse_annotation(&text, Some((sep.width(), sep.height())))?;
    let mut fv = analyze(&sep, &annotation, cfg)?.features;
    fv.label = None;
    cache.put(&key, &fv);
    fv.label = entry.label;
    Ok((fv, false))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Every entry's features, in manifest order, with per-entry failures kept
/// apart rather than aborting the batch.
pub fn extract_all(manifest: &Manifest, cfg: &Config, cache: &FeatureCache) -> Result<(Vec<FeatureVector<f64>>, Vec<EntryFailure>, usize)> {
    let fingerprint = cfg.fingerprint();
    let results: Vec<_> = pool(cfg.workers)?.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| (e.sep_id.clone(), entry_features(e, cfg, &fingerprint, cache)))
            .collect()
    });
    let mut features = Vec::new();
    let mut failures = Vec::new();
    let mut hits = 0;
    for (sep_id, r) in results {
        match r {
            Ok((fv, hit)) => {
                hits += usize::from(hit);
                features.push(fv);
            }
            Err(e) => failures.push(EntryFailure {
                sep_id,
                error: e.to_string(),
            }),
        }
    }
    Ok((features, failures, hits))
}

pub fn predictions_csv(preds: &[(String, Option<Grade>, Option<usize>, GradedResult<f64>)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sep_id".to_string(), "label".into(), "predicted".into(), "sil".into(), "fold".into(), "exact_match".into()];
    header.extend(Grade::ALL.iter().map(|g| format!("vote_{}", g.name().to_lowercase())));
    w.write_record(&header)?;
    for (id, label, fold, r) in preds {
        let mut rec = vec![
            id.clone(),
            label.map(|g| g.to_string()).unwrap_or_default(),
            r.predicted.to_string(),
            r.sil.to_string(),
            fold.map(|f| f.to_string()).unwrap_or_default(),
            u8::from(r.exact_match).to_string(),
        ];
        rec.extend(r.neighbor_votes.iter().map(|&v| sig6(v)));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Table(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Table(e.to_string()))
}

/// Predicted and reference labels from a predictions table.
pub fn read_predictions_csv(text: &str) -> Result<Vec<(String, Grade, Grade)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |n: &str| header.iter().position(|h| h == n).ok_or_else(|| Error::Table(format!("missing column {n}")));
    let (id, label, pred) = (col("sep_id")?, col("label")?, col("predicted")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<Grade> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse().map_err(|_| Error::Table(format!("bad grade {s:?}")))
        };
        if rec.get(label).unwrap_or("").trim().is_empty() {
            continue;
        }
        out.push((rec.get(id).unwrap_or("").to_string(), parse(pred)?, parse(label)?));
    }
    Ok(out)
}

/// Report for predicted-versus-reference label pairs.
pub fn evaluation_report(predicted: &[Grade], reference: &[Grade], fingerprint: &str, protocol: String, failures: Vec<String>) -> Result<EvaluationReport> {
    let cin = ConfusionMatrix::from_labels(predicted, reference)?;
    let sil = cin.map(cin_to_sil);
    Ok(EvaluationReport {
        fingerprint: fingerprint.to_string(),
        protocol,
        samples: reference.len(),
        cin: MatrixSummary::new(&cin, "Final Diagnosis", "Predicted")?,
        sil: MatrixSummary::new(&sil, "Final Diagnosis", "Predicted")?,
        notes: Vec::new(),
        failures,
    })
}

/// Segment → resolve → featurize every entry, then cross-validate the
/// grader on labelled entries and write
/// `features.csv`, `predictions.csv`, `report.txt` and `report.json`.
pub fn run(manifest: &Manifest, cfg: &Config, out_dir: &Path, cache: &FeatureCache) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let fingerprint = cfg.fingerprint();
    let (features, failures, cache_hits) = extract_all(manifest, cfg, cache)?;

    // grade from the table as written, so a rerun that starts from
    // features.csv sees exactly the same numbers
    let table = write_features_csv(&features)?;
    std::fs::write(out_dir.join("features.csv"), &table)?;
    let parsed = read_features_csv(&table)?;
    let labelled: Vec<FeatureVector<f64>> = parsed.into_iter().filter(|f| f.label.is_some()).collect();

    let failed_ids: Vec<String> = failures.iter().map(|f| f.sep_id.clone()).collect();
    let n_folds = cfg.evaluation.n_folds;
    let (report, report_text, preds_text) = if labelled.len() >= n_folds {
        let cv = cross_validate(&labelled, cfg.grading.k, n_folds, cfg.evaluation.seed)?;
        let reference: Vec<Grade> = labelled.iter().map(|f| f.label.expect("filtered")).collect();
        let predicted: Vec<Grade> = cv.predictions.iter().map(|p| p.predicted).collect();
        let protocol = format!(
            "{n_folds}-fold stratified cross-validation, seed {}, w-kNN k = {}",
            cfg.evaluation.seed, cfg.grading.k
        );
        let mut report = evaluation_report(&predicted, &reference, &fingerprint, protocol, failed_ids)?;
        if !cv.folds.undersized.is_empty() {
            let names: Vec<&str> = cv.folds.undersized.iter().map(|&i| Grade::ALL[i].name()).collect();
            report.notes.push(format!("classes with fewer members than folds: {}", names.join(", ")));
        }
        let rows: Vec<_> = labelled
            .iter()
            .zip(cv.predictions)
            .enumerate()
            .map(|(i, (f, p))| (f.sep_id.clone(), f.label, Some(cv.folds.fold[i]), p))
            .collect();
        let text = report.to_text();
        (Some(report), text, predictions_csv(&rows)?)
    } else {
        let mut text = String::new();
        let _ = writeln!(text, "config fingerprint: {fingerprint}");
        let _ = writeln!(text, "no evaluation: {} labelled entries for {n_folds} folds", labelled.len());
        if !failed_ids.is_empty() {
            let _ = writeln!(text, "failed entries: {}", failed_ids.join(", "));
        }
        (None, text, predictions_csv(&[])?)
    };
    std::fs::write(out_dir.join("predictions.csv"), preds_text)?;
    std::fs::write(out_dir.join("report.txt"), &report_text)?;
    let json = match &report {
        Some(r) => r.to_json(),
        None => serde_json::to_string_pretty(&serde_json::json!({
            "fingerprint": fingerprint,
            "evaluation": null,
            "failures": failures.iter().map(|f| &f.sep_id).collect::<Vec<_>>(),
        }))? + "\n",
    };
    std::fs::write(out_dir.join("report.json"), json)?;

    Ok(RunOutcome {
        fingerprint,
        features,
        failures,
        cache_hits,
        report,
        report_text,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Agreement between the `label` and `label2` columns.
pub fn rater_agreement(manifest: &Manifest, fingerprint: &str) -> Result<AgreementReport> {
    let (r1, r2): (Vec<Grade>, Vec<Grade>) = manifest
        .entries
        .iter()
        .filter_map(|e| Some((e.label?, e.label2?)))
        .unzip();
    if r1.is_empty() {
        return Err(Error::EmptyInput("no entry carries both rater labels".into()));
    }
    // rows: first rater, columns: second rater
    let cin = ConfusionMatrix::from_labels(&r2, &r1)?;
    let sil: ConfusionMatrix<SilGrade> = cin.map(cin_to_sil);
    Ok(AgreementReport {
        fingerprint: fingerprint.to_string(),
        pairs: r1.len(),
        cin: MatrixSummary::new(&cin, "Rater 1", "Rater 2")?,
        sil: MatrixSummary::new(&sil, "Rater 1", "Rater 2")?,
        footnote: AGREEMENT_FOOTNOTE.to_string(),
    })
}

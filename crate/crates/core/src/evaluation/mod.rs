//! Confusion matrices, agreement statistics, stratified folds and
//! cross-validated grading.

pub mod metrics;
mod folds;
mod report;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grading::{cin_to_sil, wknn_classify, GradedResult, TrainingSet};
use crate::model::{Grade, SilGrade};
use crate::morphometrics::FeatureVector;
use crate::scalar::Real;

pub use folds::{stratified_folds, FoldAssignment};
pub use metrics::{accuracy, cohen_kappa, off_by_one_accuracy, ConfusionMatrix, Kappa, MetricScalar};
pub use report::{AgreementReport, EvaluationReport, MatrixSummary, AGREEMENT_FOOTNOTE};

#[derive(Debug, Clone)]
pub struct CvOutcome<T> {
    /// One result per input vector, in input order.
    pub predictions: Vec<GradedResult<T>>,
    pub folds: FoldAssignment,
}

impl<T: Real> CvOutcome<T> {
    pub fn cin_matrix(&self, reference: &[Grade]) -> Result<ConfusionMatrix<Grade>> {
        let pred: Vec<Grade> = self.predictions.iter().map(|p| p.predicted).collect();
        ConfusionMatrix::from_labels(&pred, reference)
    }

    pub fn sil_matrix(&self, reference: &[Grade]) -> Result<ConfusionMatrix<SilGrade>> {
        let pred: Vec<SilGrade> = self.predictions.iter().map(|p| p.sil).collect();
        let reference: Vec<SilGrade> = reference.iter().map(|&g| cin_to_sil(g)).collect();
        ConfusionMatrix::from_labels(&pred, &reference)
    }
}

/// Stratified `n_folds` cross-validation of the w-kNN grader. The
/// normalizer is refitted on every training split. A fold whose training
/// split is smaller than `k` votes with all of it.
pub fn cross_validate<T: Real>(vectors: &[FeatureVector<T>], k: usize, n_folds: usize, seed: u64) -> Result<CvOutcome<T>> {
    let labels = vectors
        .iter()
        .map(|v| v.label.ok_or_else(|| Error::InvalidParameter(format!("{} has no label", v.sep_id))))
        .collect::<Result<Vec<Grade>>>()?;
    let folds = stratified_folds(&labels, n_folds, seed)?;
    let per_fold = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let train = folds.train_indices(f);
            let raw: Vec<&[T]> = train.iter().map(|&i| &vectors[i].values[..]).collect();
            let set = TrainingSet::fit(&raw, train.iter().map(|&i| labels[i]).collect())?;
            let kk = k.min(set.len());
            folds
                .test_indices(f)
                .into_iter()
                .map(|i| Ok((i, wknn_classify(&vectors[i], &set, kk)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut slots: Vec<Option<GradedResult<T>>> = vec![None; vectors.len()];
    for (i, r) in per_fold.into_iter().flatten() {
        slots[i] = Some(r);
    }
    Ok(CvOutcome {
        predictions: slots.into_iter().map(|s| s.expect("every sample is tested once")).collect(),
        folds,
    })
}

/// Cross-validated CIN accuracy for each candidate `k`.
pub fn sweep_k<T: Real>(vectors: &[FeatureVector<T>], ks: &[usize], n_folds: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let reference: Vec<Grade> = vectors.iter().filter_map(|v| v.label).collect();
    ks.iter()
        .map(|&k| {
            let cv = cross_validate(vectors, k, n_folds, seed)?;
            Ok((k, accuracy::<f64, _>(&cv.cin_matrix(&reference)?)?))
        })
        .collect()
}

//! Distance-weighted k-nearest-neighbour grading and the CIN → SIL map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, Grade, SilGrade};
use crate::morphometrics::FeatureVector;
use crate::scalar::Real;

/// Floor on squared distance for the vote weight `1/d²`.
pub const MIN_SQUARED_DISTANCE: f64 = 1e-12;
pub const DEFAULT_K: usize = 5;

pub fn cin_to_sil(g: Grade) -> SilGrade {
    match g {
        Grade::Normal => SilGrade::Normal,
        Grade::Cin1 => SilGrade::Lsil,
        Grade::Cin2 | Grade::Cin3 => SilGrade::Hsil,
    }
}

/// Per-dimension z-scoring with population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// Dimensions with zero variance; their std is forced to 1.
    pub constant: Vec<bool>,
}

impl<T: Real> Normalizer<T> {
    pub fn fit<V: AsRef<[T]>>(vectors: &[V]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::InsufficientPoints {
                needed: 2,
                got: vectors.len(),
            });
        }
        let dim = vectors[0].as_ref().len();
        if vectors.iter().any(|v| v.as_ref().len() != dim) {
            return Err(Error::InvalidParameter("vectors differ in dimension".into()));
        }
        let n = T::from_count(vectors.len());
        let mut mean = vec![T::zero(); dim];
        for v in vectors {
            for (m, &x) in mean.iter_mut().zip(v.as_ref()) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![T::zero(); dim];
        for v in vectors {
            for ((s, &x), &m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let mut constant = vec![false; dim];
        let std = var
            .into_iter()
            .zip(&mut constant)
            .map(|(s, flag)| {
                let sd = (s / n).sqrt();
                if sd > T::zero() {
                    sd
                } else {
                    *flag = true;
                    T::one()
                }
            })
            .collect();
        Ok(Self { mean, std, constant })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            std: vec![T::one(); dim],
            constant: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .zip(&self.constant)
            .map(|((&x, (&m, &s)), &c)| if c { T::zero() } else { (x - m) / s })
            .collect()
    }

    /// Undoes [`apply`](Self::apply) on non-constant dimensions; constant
    /// dimensions come back as their mean.
    pub fn invert(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .zip(&self.constant)
            .map(|((&x, (&m, &s)), &c)| if c { m } else { x * s + m })
            .collect()
    }
}

/// Normalized training vectors with their labels.
#[derive(Debug, Clone)]
pub struct TrainingSet<T, L = Grade> {
    normalizer: Normalizer<T>,
    vectors: Vec<Vec<T>>,
    labels: Vec<L>,
}

impl<T: Real, L: ClassLabel> TrainingSet<T, L> {
    /// Fits the normalizer on `raw` and stores the normalized vectors.
    pub fn fit<V: AsRef<[T]>>(raw: &[V], labels: Vec<L>) -> Result<Self> {
        let normalizer = Normalizer::fit(raw)?;
        Self::with_normalizer(raw, labels, normalizer)
    }

    pub fn with_normalizer<V: AsRef<[T]>>(raw: &[V], labels: Vec<L>, normalizer: Normalizer<T>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput("training set".into()));
        }
        if raw.len() != labels.len() {
            return Err(Error::LengthMismatch {
                predicted: raw.len(),
                reference: labels.len(),
            });
        }
        if raw.iter().any(|v| v.as_ref().len() != normalizer.dim()) {
            return Err(Error::InvalidParameter("training vector dimension differs from normalizer".into()));
        }
        let vectors = raw.iter().map(|v| normalizer.apply(v.as_ref())).collect();
        Ok(Self {
            normalizer,
            vectors,
            labels,
        })
    }

    pub fn normalizer(&self) -> &Normalizer<T> {
        &self.normalizer
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn normalized(&self) -> &[Vec<T>] {
        &self.vectors
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote<T, L> {
    pub predicted: L,
    /// Accumulated weight per class in `L::ALL` order; for an exact match
    /// these are the match counts instead.
    pub votes: Vec<T>,
    pub exact_match: bool,
    /// Training indices of the neighbours used, nearest first.
    pub neighbors: Vec<usize>,
}

/// Highest vote, ties to the later (more severe) class.
fn argmax_severe<T: Real, L: ClassLabel>(votes: &[T]) -> L {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v >= votes[best] {
            best = i;
        }
    }
    L::ALL[best]
}

/// Weighted vote of the `k` nearest training vectors to the already
/// normalized query `z`. Neighbours are ordered by squared distance, then
/// training index. Any training vector at distance zero decides alone: the
/// class with the most exact matches wins.
pub fn wknn_vote<T: Real, L: ClassLabel>(z: &[T], t: &TrainingSet<T, L>, k: usize) -> Result<Vote<T, L>> {
    if t.is_empty() {
        return Err(Error::EmptyInput("training set".into()));
    }
    if k == 0 || k > t.len() {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={}", t.len())));
    }
    if z.len() != t.normalizer.dim() {
        return Err(Error::InvalidParameter("query dimension differs from training set".into()));
    }
    let mut d2: Vec<(T, usize)> = t
        .vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (squared_distance(z, v), i))
        .collect();

    let mut votes = vec![T::zero(); L::ALL.len()];
    let exact: Vec<usize> = d2.iter().filter(|(d, _)| *d == T::zero()).map(|&(_, i)| i).collect();
    if !exact.is_empty() {
        for &i in &exact {
            votes[t.labels[i].index()] += T::one();
        }
        return Ok(Vote {
            predicted: argmax_severe(&votes),
            votes,
            exact_match: true,
            neighbors: exact,
        });
    }

    let by_distance = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).expect("finite distance").then(a.1.cmp(&b.1));
    if k < d2.len() {
        d2.select_nth_unstable_by(k - 1, by_distance);
        d2.truncate(k);
    }
    d2.sort_unstable_by(by_distance);
    let floor = T::lit(MIN_SQUARED_DISTANCE);
    for &(d, i) in &d2 {
        votes[t.labels[i].index()] += T::one() / d.max(floor);
    }
    Ok(Vote {
        predicted: argmax_severe(&votes),
        votes,
        exact_match: false,
        neighbors: d2.into_iter().map(|(_, i)| i).collect(),
    })
}

fn squared_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedResult<T> {
    pub sep_id: String,
    pub predicted: Grade,
    pub sil: SilGrade,
    pub neighbor_votes: Vec<T>,
    pub exact_match: bool,
}

pub fn wknn_classify<T: Real>(q: &FeatureVector<T>, t: &TrainingSet<T>, k: usize) -> Result<GradedResult<T>> {
    let z = t.normalizer.apply(&q.values);
    let vote = wknn_vote(&z, t, k)?;
    Ok(GradedResult {
        sep_id: q.sep_id.clone(),
        predicted: vote.predicted,
        sil: cin_to_sil(vote.predicted),
        neighbor_votes: vote.votes,
        exact_match: vote.exact_match,
    })
}

/// Serialized model: the normalizer plus `k`; the training vectors travel
/// separately as a feature CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub k: usize,
    pub columns: Vec<String>,
    pub normalizer: Normalizer<f64>,
}

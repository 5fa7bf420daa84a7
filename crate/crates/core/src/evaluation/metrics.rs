use num_rational::Ratio;
use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClassLabel;

/// Scalars the agreement metrics can be computed in: floats, or exact
/// rationals for reproducing published fractions digit for digit.
pub trait MetricScalar: Num + Clone + PartialOrd {
    fn from_count(n: u64) -> Self;
}

impl MetricScalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
}

impl MetricScalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
}

impl MetricScalar for Ratio<i64> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count fits i64"))
    }
}

impl MetricScalar for Ratio<i128> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i128::from(n))
    }
}

/// Rows are the reference labels, columns the predictions, both in
/// `L::ALL` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix<L> {
    counts: Vec<Vec<u64>>,
    #[serde(skip)]
    _labels: std::marker::PhantomData<L>,
}

impl<L: ClassLabel> ConfusionMatrix<L> {
    pub fn empty() -> Self {
        let n = L::ALL.len();
        Self {
            counts: vec![vec![0; n]; n],
            _labels: Default::default(),
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = L::ALL.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!("confusion matrix must be {n}x{n}")));
        }
        Ok(Self {
            counts,
            _labels: Default::default(),
        })
    }

    pub fn from_labels(predicted: &[L], reference: &[L]) -> Result<Self> {
        if predicted.len() != reference.len() {
            return Err(Error::LengthMismatch {
                predicted: predicted.len(),
                reference: reference.len(),
            });
        }
        if predicted.is_empty() {
            return Err(Error::EmptyInput("label lists".into()));
        }
        let mut m = Self::empty();
        for (&p, &r) in predicted.iter().zip(reference) {
            m.counts[r.index()][p.index()] += 1;
        }
        Ok(m)
    }

    pub fn labels(&self) -> &'static [L] {
        L::ALL
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, reference: L, predicted: L) -> u64 {
        self.counts[reference.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        (0..self.counts.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.counts.len();
        Self {
            counts: (0..n).map(|i| (0..n).map(|j| self.counts[j][i]).collect()).collect(),
            _labels: Default::default(),
        }
    }

    /// Re-buckets both axes through `f`, e.g. CIN → SIL.
    pub fn map<M: ClassLabel>(&self, f: impl Fn(L) -> M) -> ConfusionMatrix<M> {
        let mut out = ConfusionMatrix::<M>::empty();
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                out.counts[f(L::ALL[i]).index()][f(L::ALL[j]).index()] += c;
            }
        }
        out
    }

    /// Diagonal count over row total, per reference class; `None` for
    /// classes absent from the reference.
    pub fn recall(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let t: u64 = r.iter().sum();
                (t > 0).then(|| r[i] as f64 / t as f64)
            })
            .collect()
    }

    fn nonempty(&self) -> Result<u64> {
        match self.total() {
            0 => Err(Error::EmptyInput("confusion matrix".into())),
            t => Ok(t),
        }
    }
}

pub fn accuracy<F: MetricScalar, L: ClassLabel>(m: &ConfusionMatrix<L>) -> Result<F> {
    let total = m.nonempty()?;
    Ok(F::from_count(m.trace()) / F::from_count(total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kappa<F> {
    pub value: F,
    pub observed: F,
    pub expected: F,
    /// Chance agreement was 1 (a single class on both sides); `value` is 0.
    pub degenerate: bool,
}

/// Cohen's kappa from the matrix margins.
pub fn cohen_kappa<F: MetricScalar, L: ClassLabel>(m: &ConfusionMatrix<L>) -> Result<Kappa<F>> {
    let total = m.nonempty()?;
    let n = F::from_count(total);
    let observed = F::from_count(m.trace()) / n.clone();
    let chance: u64 = m.row_totals().iter().zip(m.col_totals()).map(|(r, c)| r * c).sum();
    let expected = F::from_count(chance) / (n.clone() * n);
    if expected == F::one() {
        return Ok(Kappa {
            value: F::zero(),
            observed,
            expected,
            degenerate: true,
        });
    }
    let value = (observed.clone() - expected.clone()) / (F::one() - expected.clone());
    Ok(Kappa {
        value,
        observed,
        expected,
        degenerate: false,
    })
}

/// Share of samples whose predicted rank is within one of the reference.
pub fn off_by_one_accuracy<F: MetricScalar, L: ClassLabel>(m: &ConfusionMatrix<L>) -> Result<F> {
    if !L::ORDERED {
        return Err(Error::UnorderedLabels);
    }
    let total = m.nonempty()?;
    let near: u64 = m
        .counts
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().filter(move |(j, _)| i.abs_diff(*j) <= 1).map(|(_, &c)| c))
        .sum();
    Ok(F::from_count(near) / F::from_count(total))
}

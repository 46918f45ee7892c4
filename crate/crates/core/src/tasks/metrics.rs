use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts with class 1 (risky) as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(predictions: &[u8], labels: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn fnr(&self) -> f64 {
        ratio(self.fn_, self.fn_ + self.tp)
    }

    pub fn merged(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(c: &Confusion) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as i128, c.tn as i128, c.fp as i128, c.fn_ as i128);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0) {
        return 0.0;
    }
    let num = tp * tn - fp * fn_;
    let den = factors.iter().map(|&f| f as f64).product::<f64>().sqrt();
    num as f64 / den
}

/// Rank-based (Mann-Whitney) area under the ROC curve; tied scores share
/// their average rank, so a tied pair counts one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc", &[scores.len()], &[labels.len()]));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives, kept integral: a tie group occupying
    // ranks lo+1..=hi has average rank (lo+1+hi)/2.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_avg = (i + 1 + j + 1) as u64;
        let positives = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        twice_rank_sum += twice_avg * positives;
        i = j + 1;
    }
    let twice_u = twice_rank_sum - pos * (pos + 1);
    Ok(twice_u as f64 / (2 * pos * neg) as f64)
}

/// Classification report for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    /// Absent when the evaluated labels contain a single class.
    pub auc: Option<f64>,
    pub mcc: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub confusion: Confusion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_fold: Option<Vec<Scores>>,
}

impl Scores {
    /// Scores from risk probabilities, hard predictions and labels.
    pub fn compute(risk: &[f64], predictions: &[u8], labels: &[u8]) -> Result<Scores> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let confusion = Confusion::from_predictions(predictions, labels);
        let auc = match auc(risk, labels) {
            Ok(a) => Some(a),
            Err(Error::UndefinedAuc) => None,
            Err(e) => return Err(e),
        };
        Ok(Scores {
            accuracy: confusion.accuracy(),
            auc,
            mcc: mcc(&confusion),
            fpr: confusion.fpr(),
            fnr: confusion.fnr(),
            confusion,
            per_fold: None,
        })
    }

    /// Mean of per-fold scores; the confusion matrix is the sum over folds.
    pub fn mean_of(folds: &[Scores]) -> Result<Scores> {
        if folds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = folds.len() as f64;
        let mean = |f: fn(&Scores) -> f64| folds.iter().map(f).sum::<f64>() / n;
        let aucs: Vec<f64> = folds.iter().filter_map(|s| s.auc).collect();
        Ok(Scores {
            accuracy: mean(|s| s.accuracy),
            auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
            mcc: mean(|s| s.mcc),
            fpr: mean(|s| s.fpr),
            fnr: mean(|s| s.fnr),
            confusion: folds
                .iter()
                .fold(Confusion::default(), |acc, s| acc.merged(&s.confusion)),
            per_fold: Some(folds.to_vec()),
        })
    }
}

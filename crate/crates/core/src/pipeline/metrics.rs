use std::fmt;

use serde::Serialize;

use super::PipelineError;

/// Confusion counts and derived percentages, rounded half-up to one
/// decimal. A ratio with a zero denominator is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub f1: Option<f64>,
}

/// `100·num/den` rounded half-up to one decimal, computed on integers.
fn percent(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        return None;
    }
    let (num, den) = (u128::from(num), u128::from(den));
    let tenths = (2000 * num + den) / (2 * den);
    Some(tenths as f64 / 10.0)
}

impl Metrics {
    pub fn from_counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> Metrics {
        Metrics {
            tp,
            tn,
            fp,
            fn_,
            accuracy: percent(tp + tn, tp + tn + fp + fn_),
            precision: percent(tp, tp + fp),
            recall: percent(tp, tp + fn_),
            fpr: percent(fp, fp + tn),
            fnr: percent(fn_, fn_ + tp),
            // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN)
            f1: if tp == 0 { (fp + fn_ > 0).then_some(0.0) } else { percent(2 * tp, 2 * tp + fp + fn_) },
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Unrounded accuracy as a fraction.
    pub fn accuracy_fraction(&self) -> Option<f64> {
        (self.total() > 0).then(|| (self.tp + self.tn) as f64 / self.total() as f64)
    }
}

/// Confusion counts of `predictions` against `labels`, positive class 1.
pub fn evaluate(predictions: &[u8], labels: &[u8]) -> Result<Metrics, PipelineError> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(PipelineError::Usage(format!(
            "evaluate needs equal non-empty lists, got {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, tn, fp, fn_))
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.1}"));
        writeln!(f, "TP {:>6}  TN {:>6}  FP {:>6}  FN {:>6}", self.tp, self.tn, self.fp, self.fn_)?;
        writeln!(f, "{:>6} {:>6} {:>6} {:>6} {:>6} {:>6}", "A", "P", "R", "FPR", "FNR", "F1")?;
        write!(
            f,
            "{:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            show(self.accuracy),
            show(self.precision),
            show(self.recall),
            show(self.fpr),
            show(self.fnr),
            show(self.f1)
        )
    }
}

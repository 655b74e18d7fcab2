use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Fractions in [0, 1]; `None` where a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub class0: ClassMetrics,
    pub class1: ClassMetrics,
    pub confusion: Confusion,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn class_metrics(hit: u64, false_alarm: u64, miss: u64) -> ClassMetrics {
    let precision = ratio(hit, hit + false_alarm);
    let recall = ratio(hit, hit + miss);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: hit + miss,
    }
}

impl ClassificationReport {
    pub fn from_confusion(c: Confusion) -> Self {
        ClassificationReport {
            accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
            class1: class_metrics(c.tp, c.fp, c.fn_),
            // class 0 swaps the roles of positives and negatives
            class0: class_metrics(c.tn, c.fn_, c.fp),
            confusion: c,
        }
    }
}

pub fn classification_report(predictions: &[u8], labels: &[u8]) -> Result<ClassificationReport, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(ClassificationReport::from_confusion(c))
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

/// Rows laid out as: accuracy, then precision, recall and F1 for class 0 and class 1.
pub fn format_table(rows: &[(&str, &ClassificationReport)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<28} {:>8} | {:>8} {:>8} | {:>8} {:>8} | {:>8} {:>8}\n",
        "Model", "Accuracy", "P(0)", "P(1)", "R(0)", "R(1)", "F1(0)", "F1(1)"
    ));
    for (name, r) in rows {
        out.push_str(&format!(
            "{:<28} {:>8} | {:>8} {:>8} | {:>8} {:>8} | {:>8} {:>8}\n",
            name,
            format!("{:.2}", 100.0 * r.accuracy),
            pct(r.class0.precision),
            pct(r.class1.precision),
            pct(r.class0.recall),
            pct(r.class1.recall),
            pct(r.class0.f1),
            pct(r.class1.f1),
        ));
    }
    out
}

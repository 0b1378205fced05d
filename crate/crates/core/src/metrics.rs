//! Evaluation metrics and the training-curve CSV row type.

use crate::apg::{predict, ClassifierModel};
use crate::data::LabeledDataset;
use crate::error::{arg, Result};

pub const CSV_HEADER: &str = "elapsed_sec,samples_seen,outer_iter,objective,test_mse,test_acc";

fn check_pair(preds: &[f64], labels: &[f64]) -> Result<()> {
    if preds.len() != labels.len() {
        return arg(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        ));
    }
    if preds.is_empty() {
        return arg("no predictions to score");
    }
    Ok(())
}

pub fn mse(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels)?;
    let sum: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok(sum / preds.len() as f64)
}

/// Fraction of predictions with `|pred - label| < eta` (strict).
pub fn accuracy(preds: &[f64], labels: &[f64], eta: f64) -> Result<f64> {
    check_pair(preds, labels)?;
    if !(eta > 0.0) {
        return arg(format!("eta must be > 0, got {eta}"));
    }
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|(p, y)| (*p - *y).abs() < eta)
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

pub fn predict_all(model: &ClassifierModel, data: &LabeledDataset) -> Result<Vec<f64>> {
    data.samples()
        .iter()
        .map(|s| predict(model, &s.x))
        .collect()
}

/// `(mse, accuracy)` of `model` on `data`.
pub fn evaluate(model: &ClassifierModel, data: &LabeledDataset, eta: f64) -> Result<(f64, f64)> {
    let preds = predict_all(model, data)?;
    let labels = data.labels();
    Ok((mse(&preds, &labels)?, accuracy(&preds, &labels, eta)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub elapsed_sec: f64,
    pub samples_seen: usize,
    pub outer_iter: usize,
    pub objective: f64,
    pub test_mse: f64,
    pub test_acc: f64,
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{},{},{:.17e},{:.17e},{}",
            self.elapsed_sec,
            self.samples_seen,
            self.outer_iter,
            self.objective,
            self.test_mse,
            self.test_acc
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 6 {
            return arg(format!("expected 6 CSV fields, got {}", f.len()));
        }
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| crate::Error::Argument(format!("bad number `{s}`")))
        };
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| crate::Error::Argument(format!("bad integer `{s}`")))
        };
        Ok(Self {
            elapsed_sec: real(f[0])?,
            samples_seen: int(f[1])?,
            outer_iter: int(f[2])?,
            objective: real(f[3])?,
            test_mse: real(f[4])?,
            test_acc: real(f[5])?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(mse(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap(), 1.0);
        assert_eq!(accuracy(&[2.0], &[1.0], 1.0).unwrap(), 0.0);
        assert_eq!(accuracy(&[1.4, 3.0], &[1.0, 5.0], 1.0).unwrap(), 0.5);
        assert!(accuracy(&[1.0], &[1.0], 0.0).is_err());
        assert!(accuracy(&[1.0], &[], 1.0).is_err());
    }

    #[test]
    fn csv_row_parses_back() {
        let r = MetricsRecord {
            elapsed_sec: 1.5,
            samples_seen: 10,
            outer_iter: 3,
            objective: 12.25,
            test_mse: 0.5,
            test_acc: 0.75,
        };
        assert_eq!(MetricsRecord::parse_csv_row(&r.csv_row()).unwrap(), r);
        assert_eq!(CSV_HEADER.split(',').count(), 6);
    }
}

//! Regression metrics.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// RMSE, MAE, R^2, and the standard error of the absolute errors.
///
/// `r2` is `None` when the targets are constant (total sum of squares is
/// zero, so the coefficient of determination is undefined). `se` is the
/// sample standard deviation (n-1 denominator) of the absolute errors
/// divided by sqrt(n); zero when n = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
    pub se: f64,
}

pub fn compute_metrics(preds: &[f64], targets: &[f64]) -> Result<Metrics> {
    if preds.is_empty() {
        return Err(Error::dim("metrics need at least one prediction"));
    }
    if preds.len() != targets.len() {
        return Err(Error::dim(format!(
            "prediction count {} != target count {}",
            preds.len(),
            targets.len()
        )));
    }
    let n = preds.len() as f64;
    let mut ss_res = 0.0;
    let mut abs_sum = 0.0;
    let mut abs_errors = Vec::with_capacity(preds.len());
    for (p, t) in preds.iter().zip(targets) {
        let e = p - t;
        ss_res += e * e;
        abs_sum += e.abs();
        abs_errors.push(e.abs());
    }
    let rmse = (ss_res / n).sqrt();
    let mae = abs_sum / n;

    let target_mean = targets.iter().sum::<f64>() / n;
    let ss_tot: f64 = targets.iter().map(|t| (t - target_mean).powi(2)).sum();
    // Bitwise-constant targets can still leave summation dust in ss_tot;
    // both cases leave r2 undefined.
    let constant = targets.iter().all(|t| *t == targets[0]);
    let r2 = if constant || ss_tot == 0.0 {
        None
    } else {
        Some(1.0 - ss_res / ss_tot)
    };

    let se = if preds.len() < 2 {
        0.0
    } else {
        let var = abs_errors
            .iter()
            .map(|a| (a - mae) * (a - mae))
            .sum::<f64>()
            / (n - 1.0);
        var.sqrt() / n.sqrt()
    };

    Ok(Metrics { rmse, mae, r2, se })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.r2, Some(1.0));
        assert_eq!(m.se, 0.0);
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let targets = [1.0, 2.0, 3.0, 6.0];
        let mean = targets.iter().sum::<f64>() / 4.0;
        let m = compute_metrics(&[mean; 4], &targets).unwrap();
        assert!((m.r2.unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example() {
        // preds [1,2], targets [1,4]: errors {0, 2}.
        // rmse = sqrt(4/2) = sqrt(2); mae = 1; r2 = 1 - 4/4.5.
        // se = sample_std({0,2}) / sqrt(2) = sqrt(2)/sqrt(2) = 1.
        let m = compute_metrics(&[1.0, 2.0], &[1.0, 4.0]).unwrap();
        assert!((m.rmse - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((m.mae - 1.0).abs() < 1e-12);
        assert!((m.r2.unwrap() - (1.0 - 4.0 / 4.5)).abs() < 1e-12);
        assert!((m.se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_have_undefined_r2() {
        let m = compute_metrics(&[1.0, 2.0], &[3.0, 3.0]).unwrap();
        assert_eq!(m.r2, None);
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }
}

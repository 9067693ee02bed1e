use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::norm2;

/// `‖reference − approx‖₂ / ‖reference‖₂`. Serves solution vectors and
/// eigenvalue lists alike.
pub fn learning_error(reference: &[f64], approx: &[f64]) -> Result<f64> {
    check_len("approximate vector", reference.len(), approx.len())?;
    let nr = norm2(reference);
    if nr == 0.0 {
        return Err(Error::InvalidArgument("learning error needs a non-zero reference".into()));
    }
    let diff: Vec<f64> = reference.iter().zip(approx).map(|(a, b)| a - b).collect();
    Ok(norm2(&diff) / nr)
}

/// `10·log₁₀(MAX / √MSE)` in dB with `MSE = ‖y − ŷ‖² / m`.
///
/// An exact reconstruction yields `f64::INFINITY`.
pub fn psnr(original: &[f64], reconstructed: &[f64], max_value: f64) -> Result<f64> {
    check_len("reconstruction", original.len(), reconstructed.len())?;
    if !(max_value > 0.0) {
        return Err(Error::InvalidArgument(format!("MAX must be positive, got {max_value}")));
    }
    if original.is_empty() {
        return Err(Error::InvalidArgument("psnr of an empty signal".into()));
    }
    let sq: f64 = original
        .iter()
        .zip(reconstructed)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(psnr_from_mse(sq / original.len() as f64, max_value))
}

pub fn psnr_from_mse(mse: f64, max_value: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_value / mse.sqrt()).log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: u32,
    pub scores: BTreeMap<u32, f64>,
    /// Every coefficient was zero; `class` is then the lowest label.
    pub no_support: bool,
}

/// Sums `|x_i|` per class label and picks the largest, lowest label on ties.
pub fn classify(x: &[f64], labels: &[u32]) -> Result<Classification> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("cannot classify an empty coefficient vector".into()));
    }
    check_len("class labels", x.len(), labels.len())?;
    let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
    for (&v, &c) in x.iter().zip(labels) {
        *scores.entry(c).or_insert(0.0) += v.abs();
    }
    let mut best = None;
    for (&c, &s) in &scores {
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((c, s)),
        }
    }
    let (class, top) = best.expect("at least one label");
    Ok(Classification {
        class,
        scores,
        no_support: top == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_error_cases() {
        assert_eq!(learning_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let e = learning_error(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((e - 2f64.sqrt()).abs() < 1e-15);
        assert!(learning_error(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(learning_error(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn psnr_cases() {
        assert_eq!(psnr_from_mse(1.0, 1.0), 0.0);
        assert!((psnr_from_mse(1e-4, 1.0) - 20.0).abs() < 1e-12);
        assert_eq!(psnr_from_mse(4.0, 2.0), 0.0);
        assert_eq!(psnr(&[1.0, 2.0], &[1.0, 2.0], 2.0).unwrap(), f64::INFINITY);
        // MSE = (1 + 1) / 2 = 1
        assert_eq!(psnr(&[1.0, 1.0], &[0.0, 2.0], 1.0).unwrap(), 0.0);
        assert!(psnr(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn classify_cases() {
        let c = classify(&[0.5, 0.1, 0.05], &[1, 1, 2]).unwrap();
        assert_eq!(c.class, 1);
        assert!((c.scores[&1] - 0.6).abs() < 1e-15);
        assert_eq!(c.scores[&2], 0.05);
        assert!(!c.no_support);

        let z = classify(&[0.0, 0.0], &[3, 2]).unwrap();
        assert_eq!(z.class, 2);
        assert!(z.no_support);

        let tie = classify(&[1.0, -1.0], &[5, 4]).unwrap();
        assert_eq!(tie.class, 4);

        assert!(classify(&[], &[]).is_err());
    }
}

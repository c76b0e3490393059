//! Scenario extraction: the Euler derivative of empirical ES as a conditional
//! mean over the reference's tail scenarios.

use crate::error::{FrtbError, Result};
use crate::es::{empirical_var_es, Bandwidth, EsConfig, KernelShape, TailEstimate};
use crate::normal;

/// Averaging weights derived once from a reference loss vector.
#[derive(Debug, Clone)]
pub enum Extractor {
    Tail { indices: Vec<usize>, n_tail: usize },
    Smoothed { weights: Vec<f64> },
}

impl Extractor {
    pub fn new(reference: &[f64], cfg: &EsConfig) -> Result<Extractor> {
        let tail = empirical_var_es(reference, cfg)?;
        Ok(Self::from_tail(reference, &tail, cfg))
    }

    pub fn from_tail(reference: &[f64], tail: &TailEstimate, cfg: &EsConfig) -> Extractor {
        let plain = || Extractor::Tail {
            indices: tail.tail_indices.clone(),
            n_tail: tail.tail_indices.len(),
        };
        match cfg.kernel {
            None => plain(),
            Some(kernel) => smoothed_weights(reference, tail, kernel.bandwidth, kernel.shape)
                .map(|weights| Extractor::Smoothed { weights })
                .unwrap_or_else(plain),
        }
    }

    pub fn extract(&self, component: &[f64]) -> f64 {
        match self {
            Extractor::Tail { indices, n_tail } => {
                indices.iter().map(|&s| component[s]).sum::<f64>() / *n_tail as f64
            }
            Extractor::Smoothed { weights } => {
                weights.iter().zip(component).map(|(w, x)| w * x).sum()
            }
        }
    }
}

/// Gaussian-smoothed tail indicator `Phi((L - VaR) / h)`, normalised and
/// rescaled so that extracting the reference itself returns its ES.
/// `None` when the reference carries no spread or the smoothed mean vanishes.
fn smoothed_weights(
    reference: &[f64],
    tail: &TailEstimate,
    bandwidth: Bandwidth,
    shape: KernelShape,
) -> Option<Vec<f64>> {
    let m = reference.len();
    if m < 2 {
        return None;
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Silverman => {
            let mean = reference.iter().sum::<f64>() / m as f64;
            let var = reference.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            1.06 * var.sqrt() * (m as f64).powf(-0.2)
        }
    };
    if !(h.is_finite() && h > 0.0) {
        return None;
    }
    let raw: Vec<f64> = match shape {
        KernelShape::Gaussian => reference
            .iter()
            .map(|&x| normal::cdf((x - tail.var) / h))
            .collect(),
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let smoothed_ref: f64 = raw.iter().zip(reference).map(|(w, x)| w * x).sum::<f64>() / total;
    let scale = reference.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if smoothed_ref.abs() <= 1e-12 * scale {
        return None;
    }
    let k = tail.es / (smoothed_ref * total);
    Some(raw.into_iter().map(|w| w * k).collect())
}

/// Conditional mean of `component` over the tail of `reference`.
pub fn scenario_extract(component: &[f64], reference: &[f64], cfg: &EsConfig) -> Result<f64> {
    if component.len() != reference.len() {
        return Err(FrtbError::Shape(format!(
            "component has {} scenarios, reference {}",
            component.len(),
            reference.len()
        )));
    }
    Ok(Extractor::new(reference, cfg)?.extract(component))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::es::KernelConfig;

    fn data() -> (Vec<f64>, Vec<f64>) {
        let a: Vec<f64> = (0..40).map(|s| ((s * 37 % 41) as f64 - 20.0) * 0.13).collect();
        let b: Vec<f64> = (0..40).map(|s| ((s * 11 % 43) as f64 - 21.0) * 0.07).collect();
        (a, b)
    }

    #[test]
    fn self_extraction_is_es() {
        let (a, b) = data();
        let reference: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let cfg = EsConfig::default();
        let es = empirical_var_es(&reference, &cfg).unwrap().es;
        assert_eq!(scenario_extract(&reference, &reference, &cfg).unwrap(), es);

        let smooth = EsConfig {
            kernel: Some(KernelConfig::default()),
            ..cfg
        };
        let s = scenario_extract(&reference, &reference, &smooth).unwrap();
        assert!((s - es).abs() <= 1e-12 * es.abs());
    }

    #[test]
    fn two_parts_sum_to_es() {
        let (a, b) = data();
        let reference: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        for kernel in [None, Some(KernelConfig::default())] {
            let cfg = EsConfig {
                kernel,
                ..EsConfig::default()
            };
            let es = empirical_var_es(&reference, &cfg).unwrap().es;
            let sa = scenario_extract(&a, &reference, &cfg).unwrap();
            let sb = scenario_extract(&b, &reference, &cfg).unwrap();
            assert!((sa + sb - es).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            scenario_extract(&[1.0, 2.0], &[1.0], &EsConfig::default()),
            Err(FrtbError::Shape(_))
        ));
    }

    #[test]
    fn flat_reference_falls_back_to_tail_mean() {
        let cfg = EsConfig {
            kernel: Some(KernelConfig::default()),
            ..EsConfig::default()
        };
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(scenario_extract(&x, &[5.0; 4], &cfg).unwrap(), 1.0);
    }
}

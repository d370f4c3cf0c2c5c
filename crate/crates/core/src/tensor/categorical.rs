use rand::Rng;

use crate::error::{Error, Result};

/// Softmax distribution over discrete actions.
#[derive(Clone, Debug, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl Categorical {
    /// Numerically stable softmax / log-softmax via max subtraction.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::contract("categorical over an empty logit vector"));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::contract(format!("non-finite logits: {logits:?}")));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let log_z = max + sum.ln();
        let log_probs: Vec<f64> = logits.iter().map(|l| l - log_z).collect();
        let probs = log_probs.iter().map(|lp| lp.exp()).collect();
        Ok(Self { probs, log_probs })
    }

    /// Softmax of `values / temperature`.
    pub fn boltzmann(values: &[f64], temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::contract(format!("temperature must be positive, got {temperature}")));
        }
        let scaled: Vec<f64> = values.iter().map(|v| v / temperature).collect();
        Self::from_logits(&scaled)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, lp)| if *p > 0.0 { p * lp } else { 0.0 })
            .sum::<f64>()
    }

    /// Inverse-CDF draw; falls back to the last action on round-off.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    /// Most probable action; ties resolve to the lowest index.
    pub fn mode(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `log Σ exp(x)` with max subtraction.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_are_uniform() {
        let c = Categorical::from_logits(&[2.5; 4]).unwrap();
        for p in c.probs() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!((c.entropy() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn huge_gap_does_not_overflow() {
        let c = Categorical::from_logits(&[1000.0, 0.0]).unwrap();
        assert_eq!(c.probs()[0], 1.0);
        assert!(c.probs()[1] < 1e-300);
        assert_eq!(c.log_probs()[1], -1000.0);
    }

    #[test]
    fn two_action_ratio_is_exp_gap_over_temperature() {
        let (q1, q2, alpha) = (1.3, 0.4, 0.3);
        let c = Categorical::boltzmann(&[q1, q2], alpha).unwrap();
        let ratio = c.probs()[0] / c.probs()[1];
        assert!((ratio - ((q1 - q2) / alpha).exp()).abs() < 1e-12 * ratio);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(Categorical::from_logits(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn helpers() {
        assert_eq!(argmax(&[1.0, 5.0, 5.0]), 1);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[3.0]), 3.0);
    }
}

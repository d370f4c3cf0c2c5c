//! Closed-form crossover of the action preferences at the start of the
//! three-state problem, and a tabular simulation that checks it.
//!
//! A count bonus `β / k` on `s1` inflates `Q(s0, a1)` above the initial value
//! `ε` of `Q(s0, a2)`. As the bonus decays the preference for `a1` fades,
//! and the two actions become equally likely after
//! `k* = β / ((1 − γ) ε − γ α log 2)` visits.

use serde::Serialize;

use crate::env::Mdp3State;
use crate::error::{Error, Result};
use crate::intrinsic::VisitCounter;

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossoverParams {
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl CrossoverParams {
    pub fn new(beta: f64, gamma: f64, alpha: f64, eps: f64) -> Result<Self> {
        let p = Self { beta, gamma, alpha, eps };
        let finite = [beta, gamma, alpha, eps].iter().all(|v| v.is_finite());
        if !finite || beta <= 0.0 || alpha <= 0.0 || !(0.0..1.0).contains(&gamma) {
            return Err(Error::Invalid(format!(
                "need beta > 0, alpha > 0, 0 <= gamma < 1, all finite; got {p:?}"
            )));
        }
        Ok(p)
    }

    /// `(1 − γ) ε − γ α log 2`; a crossover exists only when positive.
    pub fn denominator(&self) -> f64 {
        (1.0 - self.gamma) * self.eps - self.gamma * self.alpha * LN_2
    }

    /// Soft value of a state whose two actions still share the initial value.
    pub fn uniform_value(&self) -> f64 {
        self.eps + self.alpha * LN_2
    }

    /// `Q(s0, a1)` after `k` visits to `s1`.
    pub fn q_a1(&self, k: u64) -> f64 {
        self.beta / k as f64 + self.gamma * self.uniform_value()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Crossover<T> {
    At(T),
    NoCrossover,
}

impl<T: Copy> Crossover<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Crossover::At(v) => Some(*v),
            Crossover::NoCrossover => None,
        }
    }
}

pub fn k_star(p: &CrossoverParams) -> Crossover<f64> {
    let d = p.denominator();
    if d > 0.0 {
        Crossover::At(p.beta / d)
    } else {
        Crossover::NoCrossover
    }
}

/// `π(a1|s0) / π(a2|s0)`, or its logarithm when the ratio overflows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EtaRatio {
    Ratio(f64),
    LogRatio(f64),
}

impl EtaRatio {
    pub fn ln(&self) -> f64 {
        match self {
            EtaRatio::Ratio(r) => r.ln(),
            EtaRatio::LogRatio(l) => *l,
        }
    }

    pub fn at_most_one(&self) -> bool {
        self.ln() <= 0.0
    }
}

pub fn eta_ratio(q1: f64, q2: f64, alpha: f64) -> Result<EtaRatio> {
    if !(alpha > 0.0) {
        return Err(Error::contract(format!("temperature must be positive, got {alpha}")));
    }
    let log = (q1 - q2) / alpha;
    let r = log.exp();
    Ok(if r.is_finite() && r > 0.0 {
        EtaRatio::Ratio(r)
    } else {
        EtaRatio::LogRatio(log)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EtaPoint {
    pub k: u64,
    pub q_a1: f64,
    pub q_a2: f64,
    pub log_eta: f64,
}

/// Repeats `a1` from `s0`; each visit to `s1` pays the count bonus `β / N(s1)`.
/// Returns the trace up to and including the first `η ≤ 1`, or `max_k` points.
pub fn eta_trace(p: &CrossoverParams, max_k: u64) -> Result<Vec<EtaPoint>> {
    if max_k == 0 {
        return Err(Error::contract("max_k must be at least 1"));
    }
    let s1 = Mdp3State::S1.one_hot();
    let mut counter = VisitCounter::new();
    let mut trace = Vec::new();
    for k in 1..=max_k {
        let bonus = p.beta * counter.count_reward(&s1);
        let q_a1 = bonus + p.gamma * p.uniform_value();
        let q_a2 = p.eps;
        let eta = eta_ratio(q_a1, q_a2, p.alpha)?;
        trace.push(EtaPoint {
            k,
            q_a1,
            q_a2,
            log_eta: eta.ln(),
        });
        if eta.at_most_one() {
            break;
        }
    }
    Ok(trace)
}

/// Smallest visit count with `η ≤ 1`.
pub fn simulate_crossover(p: &CrossoverParams, max_k: u64) -> Result<Crossover<u64>> {
    let trace = eta_trace(p, max_k)?;
    Ok(match trace.last() {
        Some(pt) if pt.log_eta <= 0.0 => Crossover::At(pt.k),
        _ => Crossover::NoCrossover,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn analytic_case() {
        let p = CrossoverParams::new(1.0, 0.0, 0.7, 0.5).unwrap();
        assert_eq!(k_star(&p), Crossover::At(2.0));
        assert_eq!(simulate_crossover(&p, 100).unwrap(), Crossover::At(2));
    }

    #[test]
    fn documented_example() {
        let p = CrossoverParams::new(0.5, 0.9, 0.01, 0.1).unwrap();
        // 0.5 / (0.01 − 0.009 ln 2)
        let k = k_star(&p).value().unwrap();
        assert_relative_eq!(k, 132.919_497_341, epsilon = 1e-8);
        let sim = simulate_crossover(&p, 10_000).unwrap().value().unwrap();
        assert!((sim as i64 - k.ceil() as i64).abs() <= 1);
    }

    #[test]
    fn no_crossover_both_ways() {
        let p = CrossoverParams::new(1.0, 0.9, 0.5, 0.1).unwrap();
        assert_eq!(k_star(&p), Crossover::NoCrossover);
        assert_eq!(simulate_crossover(&p, 100_000).unwrap(), Crossover::NoCrossover);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_ratio(0.3, 0.3, 0.1).unwrap(), EtaRatio::Ratio(1.0));
        let a = 0.37;
        match eta_ratio(a * LN_2, 0.0, a).unwrap() {
            EtaRatio::Ratio(r) => assert_relative_eq!(r, 2.0, epsilon = 1e-14),
            other => panic!("{other:?}"),
        }
        assert_eq!(eta_ratio(1e4, 0.0, 1e-3).unwrap(), EtaRatio::LogRatio(1e7));
        assert!(eta_ratio(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CrossoverParams::new(1.0, 1.0, 0.1, 0.1).is_err());
        assert!(CrossoverParams::new(-1.0, 0.5, 0.1, 0.1).is_err());
        assert!(CrossoverParams::new(1.0, 0.5, 0.1, f64::NAN).is_err());
        assert!(eta_trace(&CrossoverParams::new(1.0, 0.5, 0.1, 0.1).unwrap(), 0).is_err());
    }
}

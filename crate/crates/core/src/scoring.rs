//! Deadline penalties, request utility, and scoring rules expressed in terms
//! of the class-frequency vector θ.

use serde::{Deserialize, Serialize};

use crate::domain::ClassLabel;
use crate::error::{Error, Result};

const THETA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Step,
    Linear,
    Sigmoid,
    ConstantZero,
}

impl PenaltyKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "step" => Some(PenaltyKind::Step),
            "linear" => Some(PenaltyKind::Linear),
            "sigmoid" => Some(PenaltyKind::Sigmoid),
            "zero" | "constant_zero" | "none" => Some(PenaltyKind::ConstantZero),
            _ => None,
        }
    }
}

/// How Linear and Sigmoid penalties are clamped.
///
/// `Saturating` grows from 0 and caps at 1. `Literal` evaluates
/// `max(1, ·)` as written in the original formulation, which makes every
/// late request pay the full penalty (i.e. it degenerates to `Step`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyClamp {
    #[default]
    Saturating,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    #[serde(default)]
    pub clamp: PenaltyClamp,
}

impl PenaltySpec {
    pub const fn new(kind: PenaltyKind) -> Self {
        PenaltySpec {
            kind,
            clamp: PenaltyClamp::Saturating,
        }
    }

    pub const fn step() -> Self {
        Self::new(PenaltyKind::Step)
    }

    pub const fn linear() -> Self {
        Self::new(PenaltyKind::Linear)
    }

    pub const fn sigmoid() -> Self {
        Self::new(PenaltyKind::Sigmoid)
    }

    pub const fn zero() -> Self {
        Self::new(PenaltyKind::ConstantZero)
    }
}

/// Sigmoid shape with exponent 3 on the normalized lateness `x ∈ (0, 1)`.
fn sigmoid_shape(x: f64) -> f64 {
    if x >= 1.0 {
        return 1.0;
    }
    1.0 / (1.0 + (x / (1.0 - x)).powi(-3))
}

/// Penalty γ(d, e) for completing at `completion` against deadline `deadline`.
pub fn penalty(spec: PenaltySpec, deadline: f64, completion: f64) -> Result<f64> {
    if !(deadline > 0.0) {
        return Err(Error::InvalidDeadline(deadline));
    }
    if completion <= deadline {
        return Ok(0.0);
    }
    let lateness = (completion - deadline) / deadline;
    let value = match (spec.kind, spec.clamp) {
        (PenaltyKind::ConstantZero, _) => 0.0,
        (PenaltyKind::Step, _) => 1.0,
        (PenaltyKind::Linear, PenaltyClamp::Saturating) => lateness.min(1.0),
        (PenaltyKind::Sigmoid, PenaltyClamp::Saturating) => sigmoid_shape(lateness),
        (_, PenaltyClamp::Literal) => 1.0,
    };
    Ok(value)
}

/// `accuracy · (1 − γ(d, t_start + latency))`.
pub fn utility(
    accuracy: f64,
    spec: PenaltySpec,
    deadline: f64,
    t_start: f64,
    latency: f64,
) -> Result<f64> {
    Ok(accuracy * (1.0 - penalty(spec, deadline, t_start + latency)?))
}

fn check_square(z: &[Vec<f64>]) -> Result<usize> {
    let n = z.len();
    for row in z {
        if row.len() != n {
            return Err(Error::dims(n, row.len()));
        }
    }
    Ok(n)
}

/// trace(Z) / sum(Z).
pub fn accuracy_from_confusion(z: &[Vec<f64>]) -> Result<f64> {
    check_square(z)?;
    let total: f64 = z.iter().flatten().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyConfusion);
    }
    let trace: f64 = z.iter().enumerate().map(|(i, row)| row[i]).sum();
    Ok(trace / total)
}

/// A class-frequency vector: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::EmptyInput);
        }
        if theta.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(Error::invalid("theta entries must lie in [0, 1]"));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > THETA_TOLERANCE {
            return Err(Error::invalid(format!("theta sums to {sum}, not 1")));
        }
        Ok(ThetaVector(theta))
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || !(total > 0.0) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::invalid("weights must be non-negative with a positive sum"));
        }
        Ok(ThetaVector(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        ThetaVector(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, label: ClassLabel) -> Self {
        let mut v = vec![0.0; n];
        v[label.0] = 1.0;
        ThetaVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index and value of the largest entry (lowest index on ties).
    pub fn argmax(&self) -> (ClassLabel, f64) {
        let mut best = (0, self.0[0]);
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (i, v);
            }
        }
        (ClassLabel(best.0), best.1)
    }
}

impl TryFrom<Vec<f64>> for ThetaVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ThetaVector::new(v)
    }
}

impl From<ThetaVector> for Vec<f64> {
    fn from(t: ThetaVector) -> Self {
        t.0
    }
}

/// Σ θ_i · recall_i.
pub fn theta_accuracy(theta: &ThetaVector, recalls: &[f64]) -> Result<f64> {
    if theta.len() != recalls.len() {
        return Err(Error::dims(theta.len(), recalls.len()));
    }
    Ok(theta.0.iter().zip(recalls).map(|(t, r)| t * r).sum())
}

/// Mean quadratic score `(1/n) Σ (2 p_{i,l(i)} − p_i·p_i)`.
pub fn quadratic_score_direct(probs: &[Vec<f64>], labels: &[ClassLabel]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if probs.len() != labels.len() {
        return Err(Error::dims(probs.len(), labels.len()));
    }
    let mut total = 0.0;
    for (p, l) in probs.iter().zip(labels) {
        if l.0 >= p.len() {
            return Err(Error::dims(p.len(), l.0 + 1));
        }
        let norm: f64 = p.iter().sum();
        if (norm - 1.0).abs() > THETA_TOLERANCE {
            return Err(Error::invalid(format!("probability vector sums to {norm}")));
        }
        total += 2.0 * p[l.0] - p.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(total / probs.len() as f64)
}

/// The quadratic score rewritten over class frequencies:
/// `2 Σ_j θ_j μ_p(c_j) − mean_sq`, where `μ_p(c_j)` is the mean probability
/// assigned to `c_j` over points whose true class is `c_j` and `mean_sq` is
/// the mean of `p_i·p_i`. `mean_sq` is expected to lie in (0, 1].
pub fn quadratic_score_theta(theta: &ThetaVector, mu_p: &[f64], mean_sq: f64) -> Result<f64> {
    if theta.len() != mu_p.len() {
        return Err(Error::dims(theta.len(), mu_p.len()));
    }
    let weighted: f64 = theta.0.iter().zip(mu_p).map(|(t, m)| t * m).sum();
    Ok(2.0 * weighted - mean_sq)
}

/// Σ θ_i · F1_i with precision from column sums and recall from row sums.
/// A class with zero precision and recall contributes F1 = 0.
pub fn theta_weighted_f1(theta: &ThetaVector, z: &[Vec<f64>]) -> Result<f64> {
    let n = check_square(z)?;
    if n == 0 || !(z.iter().flatten().sum::<f64>() > 0.0) {
        return Err(Error::EmptyConfusion);
    }
    if theta.len() != n {
        return Err(Error::dims(n, theta.len()));
    }
    let mut score = 0.0;
    for i in 0..n {
        let row: f64 = z[i].iter().sum();
        if !(row > 0.0) {
            return Err(Error::EmptyConfusion);
        }
        let col: f64 = z.iter().map(|r| r[i]).sum();
        let recall = z[i][i] / row;
        let precision = if col > 0.0 { z[i][i] / col } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        score += theta.0[i] * f1;
    }
    Ok(score)
}

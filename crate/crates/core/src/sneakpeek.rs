//! Data-aware accuracy estimation.
//!
//! A cheap estimator inspects each request's data and produces multinomial
//! evidence about its class label. Combined with a Dirichlet prior this
//! gives a posterior over the class frequencies θ, whose mean replaces the
//! profiling test set's frequencies when computing model accuracy.

use std::collections::BTreeMap;

use rand::distr::{Distribution, weighted::WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ClassLabel, ModelProfile, RequestId, ThetaMap};
use crate::error::{Error, Result};
use crate::scoring::{self, ThetaVector};

/// Neighbors counted per request unless configured otherwise.
pub const DEFAULT_K: usize = 5;

/// Jeffreys prior concentration.
const JEFFREYS_ALPHA: f64 = 0.5;
const MIN_ALPHA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    #[default]
    Uninformative,
    WeaklyInformative,
    StronglyInformative,
}

impl PriorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uninformative" | "jeffreys" => Some(PriorKind::Uninformative),
            "weak" | "weakly" | "weakly_informative" => Some(PriorKind::WeaklyInformative),
            "strong" | "strongly" | "strongly_informative" => Some(PriorKind::StronglyInformative),
            _ => None,
        }
    }
}

/// Dirichlet concentration parameters over an application's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletBelief {
    alpha: Vec<f64>,
}

impl DirichletBelief {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::EmptyInput);
        }
        if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid("Dirichlet concentrations must be positive"));
        }
        Ok(DirichletBelief { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Label counts observed for one request.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Evidence {
    counts: Vec<u32>,
}

impl Evidence {
    pub fn new(counts: Vec<u32>) -> Self {
        Evidence { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// A single decisive observation (one-hot).
    pub fn decisive(label_count: usize, label: ClassLabel) -> Self {
        let mut counts = vec![0; label_count];
        counts[label.0] = 1;
        Evidence { counts }
    }
}

pub fn make_prior(
    kind: PriorKind,
    label_count: usize,
    hint: Option<&ThetaVector>,
    window_request_count: Option<usize>,
) -> Result<DirichletBelief> {
    if label_count == 0 {
        return Err(Error::EmptyInput);
    }
    let alpha = match kind {
        PriorKind::Uninformative => vec![JEFFREYS_ALPHA; label_count],
        PriorKind::WeaklyInformative => {
            let hint = hint.ok_or(Error::MissingPriorHint(""))?;
            check_len(label_count, hint.len())?;
            hint.as_slice().iter().map(|&h| h.max(MIN_ALPHA)).collect()
        }
        PriorKind::StronglyInformative => {
            let hint = hint.ok_or(Error::MissingPriorHint(""))?;
            check_len(label_count, hint.len())?;
            let count = window_request_count
                .ok_or(Error::MissingPriorHint(" and a window request count"))?;
            hint.as_slice()
                .iter()
                .map(|&h| (h * count as f64).max(MIN_ALPHA))
                .collect()
        }
    };
    DirichletBelief::new(alpha)
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        Err(Error::dims(expected, actual))
    } else {
        Ok(())
    }
}

/// Labeled feature vectors for exact nearest-neighbor search.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    points: Vec<(Vec<f64>, ClassLabel)>,
    dim: usize,
    label_count: usize,
}

impl NeighborIndex {
    pub fn new(points: Vec<(Vec<f64>, ClassLabel)>, label_count: usize) -> Result<Self> {
        let Some((first, _)) = points.first() else {
            return Err(Error::InsufficientCorpus {
                requested: 1,
                available: 0,
            });
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("feature vectors must be non-empty"));
        }
        for (p, label) in &points {
            check_len(dim, p.len())?;
            if label.0 >= label_count {
                return Err(Error::dims(label_count, label.0 + 1));
            }
        }
        Ok(NeighborIndex {
            points,
            dim,
            label_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(Vec<f64>, ClassLabel)] {
        &self.points
    }
}

/// Label counts among the `k` nearest corpus points (Euclidean). Ties at
/// equal distance go to the point inserted first.
pub fn knn_evidence(point: &[f64], index: &NeighborIndex, k: usize) -> Result<Evidence> {
    check_len(index.dim, point.len())?;
    if k == 0 || k > index.len() {
        return Err(Error::InsufficientCorpus {
            requested: k,
            available: index.len(),
        });
    }
    let mut dist: Vec<(f64, usize)> = index
        .points
        .iter()
        .enumerate()
        .map(|(i, (p, _))| {
            let d2: f64 = p.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, i)
        })
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_dist);
    }
    let mut counts = vec![0u32; index.label_count];
    for &(_, i) in &dist[..k] {
        counts[index.points[i].1 .0] += 1;
    }
    Ok(Evidence { counts })
}

/// Conjugate update: α'_i = α_i + y_i.
pub fn posterior(prior: &DirichletBelief, evidence: &Evidence) -> Result<DirichletBelief> {
    check_len(prior.len(), evidence.counts.len())?;
    Ok(DirichletBelief {
        alpha: prior
            .alpha
            .iter()
            .zip(&evidence.counts)
            .map(|(a, &y)| a + f64::from(y))
            .collect(),
    })
}

/// Posterior mean α_i / Σα.
pub fn theta_estimate(belief: &DirichletBelief) -> ThetaVector {
    ThetaVector::from_weights(belief.alpha.clone()).expect("concentrations are positive")
}

/// θ-weighted recall of `profile`.
pub fn dynamic_accuracy(theta: &ThetaVector, profile: &ModelProfile) -> Result<f64> {
    scoring::theta_accuracy(theta, profile.recall())
}

/// Draws `k` pseudo-neighbor labels from a synthetic confusion row with
/// `target_accuracy` on the diagonal and the remaining mass spread evenly
/// over the other labels.
pub fn simulated_estimator(
    target_accuracy: f64,
    true_label: ClassLabel,
    label_count: usize,
    k: usize,
    seed: u64,
) -> Result<Evidence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulated_evidence(target_accuracy, true_label, label_count, k, &mut rng)
}

pub(crate) fn simulated_evidence<R: Rng + ?Sized>(
    target_accuracy: f64,
    true_label: ClassLabel,
    label_count: usize,
    k: usize,
    rng: &mut R,
) -> Result<Evidence> {
    if !(0.0..=1.0).contains(&target_accuracy) {
        return Err(Error::invalid(format!(
            "simulated accuracy must lie in [0, 1], got {target_accuracy}"
        )));
    }
    if label_count < 2 {
        return Err(Error::invalid("simulated estimator needs at least two labels"));
    }
    if true_label.0 >= label_count {
        return Err(Error::dims(label_count, true_label.0 + 1));
    }
    let off = (1.0 - target_accuracy) / (label_count - 1) as f64;
    let row: Vec<f64> = (0..label_count)
        .map(|i| if i == true_label.0 { target_accuracy } else { off })
        .collect();
    let dist = WeightedIndex::new(&row).map_err(|e| Error::invalid(e.to_string()))?;
    let mut counts = vec![0u32; label_count];
    for _ in 0..k {
        counts[dist.sample(rng)] += 1;
    }
    Ok(Evidence { counts })
}

/// Anything that turns a request's data into label evidence.
pub trait EvidenceSource: Sync {
    fn label_count(&self) -> usize;

    /// `true_label` is visible only to simulated sources.
    fn evidence(&self, point: &[f64], true_label: ClassLabel, rng: &mut ChaCha8Rng) -> Result<Evidence>;
}

/// Exact kNN over an application's training corpus.
#[derive(Debug, Clone, Copy)]
pub struct KnnEstimator<'a> {
    pub index: &'a NeighborIndex,
    pub k: usize,
}

impl EvidenceSource for KnnEstimator<'_> {
    fn label_count(&self) -> usize {
        self.index.label_count()
    }

    fn evidence(&self, point: &[f64], _true_label: ClassLabel, _rng: &mut ChaCha8Rng) -> Result<Evidence> {
        knn_evidence(point, self.index, self.k)
    }
}

/// Confusion-matrix driven estimator with a dialed-in accuracy.
#[derive(Debug, Clone, Copy)]
pub struct SimulatedEstimator {
    pub accuracy: f64,
    pub label_count: usize,
    pub k: usize,
}

impl EvidenceSource for SimulatedEstimator {
    fn label_count(&self) -> usize {
        self.label_count
    }

    fn evidence(&self, _point: &[f64], true_label: ClassLabel, rng: &mut ChaCha8Rng) -> Result<Evidence> {
        simulated_evidence(self.accuracy, true_label, self.label_count, self.k, rng)
    }
}

/// evidence → posterior → θ for one point.
pub fn estimate_theta(
    source: &dyn EvidenceSource,
    prior: &DirichletBelief,
    point: &[f64],
    true_label: ClassLabel,
    rng: &mut ChaCha8Rng,
) -> Result<ThetaVector> {
    let evidence = source.evidence(point, true_label, rng)?;
    Ok(theta_estimate(&posterior(prior, &evidence)?))
}

/// Profiles an estimator as a zero-latency classifier: predicts argmax θ on
/// every holdout point and tabulates the confusion matrix.
pub fn profile_estimator(
    id: impl Into<String>,
    source: &dyn EvidenceSource,
    prior: &DirichletBelief,
    holdout: &[(Vec<f64>, ClassLabel)],
    rng: &mut ChaCha8Rng,
) -> Result<ModelProfile> {
    if holdout.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = source.label_count();
    let mut confusion = vec![vec![0.0; n]; n];
    for (point, label) in holdout {
        if label.0 >= n {
            return Err(Error::dims(n, label.0 + 1));
        }
        let theta = estimate_theta(source, prior, point, *label, rng)?;
        confusion[label.0][theta.argmax().0 .0] += 1.0;
    }
    // Labels absent from the holdout get a neutral row so recall stays
    // defined; the row carries no weight in a balanced holdout.
    for (i, row) in confusion.iter_mut().enumerate() {
        if row.iter().sum::<f64>() == 0.0 {
            row[i] = f64::MIN_POSITIVE;
        }
    }
    ModelProfile::zero_latency(id, confusion)
}

/// Profiles the kNN estimator on a holdout set disjoint from `index`.
pub fn profile_sneakpeek(
    index: &NeighborIndex,
    k: usize,
    prior: &DirichletBelief,
    holdout: &[(Vec<f64>, ClassLabel)],
) -> Result<ModelProfile> {
    let source = KnnEstimator { index, k };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    profile_estimator("sneakpeek-knn", &source, prior, holdout, &mut rng)
}

/// Splits one application's group by the conclusive argmax label
/// (θ_i > 0.5). Inconclusive requests join the largest conclusive subgroup,
/// or form the only subgroup if none is conclusive. Requests without an
/// estimate count as inconclusive.
pub fn split_groups(group: &[RequestId], thetas: &ThetaMap) -> Vec<Vec<RequestId>> {
    let mut by_label: BTreeMap<ClassLabel, Vec<RequestId>> = BTreeMap::new();
    let mut residual = Vec::new();
    for &id in group {
        match thetas.get(&id).map(ThetaVector::argmax) {
            Some((label, p)) if p > 0.5 => by_label.entry(label).or_default().push(id),
            _ => residual.push(id),
        }
    }
    if by_label.is_empty() {
        return if residual.is_empty() { vec![] } else { vec![residual] };
    }
    let mut subgroups: Vec<Vec<RequestId>> = by_label.into_values().collect();
    if !residual.is_empty() {
        let mut largest = 0;
        for (i, g) in subgroups.iter().enumerate() {
            if g.len() > subgroups[largest].len() {
                largest = i;
            }
        }
        subgroups[largest].extend(residual);
    }
    subgroups
}

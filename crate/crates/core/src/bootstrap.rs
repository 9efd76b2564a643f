//! Classical, m-out-of-n and smoothed bootstrap for the maximum score
//! estimator, and percentile-type confidence intervals from the draws.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{CovariateSampler, Dataset, Propensity, SphereVector};
use crate::optimizer::{default_mc_size, maximize_score, smoothed_argmax, OptimizerOptions};
use crate::rng::Stream;
use crate::scalar::Real;
use crate::smoothing::fit_smoothers;
use crate::{Error, Result};

/// Child index of the stream used to compute the point estimate itself;
/// replicate `b` uses child `b`.
const ESTIMATE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    Classical,
    #[serde(rename = "moon", alias = "m_out_of_n")]
    MOutOfN {
        gamma: f64,
    },
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapScheme {
    #[serde(flatten)]
    pub kind: SchemeKind,
    #[serde(rename = "B", alias = "replicates")]
    pub replicates: usize,
}

impl BootstrapScheme {
    pub fn classical(replicates: usize) -> Self {
        Self { kind: SchemeKind::Classical, replicates }
    }

    pub fn m_out_of_n(gamma: f64, replicates: usize) -> Self {
        Self { kind: SchemeKind::MOutOfN { gamma }, replicates }
    }

    pub fn smoothed(replicates: usize) -> Self {
        Self { kind: SchemeKind::Smoothed, replicates }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("bootstrap needs B >= 1".into()));
        }
        if let SchemeKind::MOutOfN { gamma } = self.kind {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1), got {gamma}")));
            }
        }
        Ok(())
    }

    /// Resample size for a dataset of `n` rows.
    pub fn resample_size(&self, n: usize) -> usize {
        match self.kind {
            SchemeKind::MOutOfN { gamma } => subsample_size(n, gamma),
            _ => n,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            SchemeKind::Classical => "classical",
            SchemeKind::MOutOfN { .. } => "moon",
            SchemeKind::Smoothed => "smoothed",
        }
    }
}

impl fmt::Display for BootstrapScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SchemeKind::MOutOfN { gamma } => write!(f, "moon(gamma={gamma}, B={})", self.replicates),
            _ => write!(f, "{}(B={})", self.label(), self.replicates),
        }
    }
}

/// `ceil(n^gamma)` clamped to `[1, n]`. Powers that land within rounding
/// error of an integer are treated as that integer.
pub fn subsample_size(n: usize, gamma: f64) -> usize {
    let p = (n as f64).powf(gamma);
    let r = p.round();
    let m = if (p - r).abs() <= 1e-9 * r.max(1.0) { r } else { p.ceil() };
    (m as usize).clamp(1, n.max(1))
}

/// Draw `m` rows uniformly with replacement.
fn resample_rows<T: Real, R: Rng + ?Sized>(data: &Dataset<T>, m: usize, rng: &mut R) -> Result<Dataset<T>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
    Ok(data.select(&idx))
}

pub fn classical_resample<T: Real, R: Rng + ?Sized>(data: &Dataset<T>, rng: &mut R) -> Result<Dataset<T>> {
    resample_rows(data, data.len(), rng)
}

/// m-out-of-n resample with `m = ceil(n^gamma)`.
pub fn moon_resample<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    gamma: f64,
    rng: &mut R,
) -> Result<Dataset<T>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    resample_rows(data, subsample_size(data.len(), gamma), rng)
}

/// `n` draws from the fitted joint law: `X*` from `density`, then
/// `Y* | X*` Bernoulli with probability `kappa(X*)` clamped to `[0, 1]`.
pub fn smoothed_resample<T, S, K, R>(density: &S, kappa: &K, n: usize, rng: &mut R) -> Result<Dataset<T>>
where
    T: Real,
    S: CovariateSampler<T> + ?Sized,
    K: Propensity<T> + ?Sized,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = density.dim();
    let mut rng: &mut R = rng;
    let x = density.sample(n, &mut rng);
    let y = x
        .chunks_exact(d)
        .map(|row| {
            let p = kappa.prob(row).max(T::zero()).min(T::one());
            u8::from(T::unit_uniform(&mut rng) < p)
        })
        .collect();
    Dataset::from_parts(d, x, y)
}

pub type SharedSampler<T> = Arc<dyn CovariateSampler<T> + Send + Sync>;
pub type SharedPropensity<T> = Arc<dyn Propensity<T> + Send + Sync>;

/// Fitted law the smoothed bootstrap resamples from, with its population
/// maximizer used as the bootstrap center.
#[derive(Clone)]
pub struct SmoothedFit<T> {
    pub sampler: SharedSampler<T>,
    pub kappa: SharedPropensity<T>,
    pub center: SphereVector<T>,
}

impl<T: Real> SmoothedFit<T> {
    pub fn new(sampler: SharedSampler<T>, kappa: SharedPropensity<T>, center: SphereVector<T>) -> Self {
        Self { sampler, kappa, center }
    }

    /// Center at the Monte Carlo argmax of the supplied law.
    pub fn with_models<R: Rng + ?Sized>(
        sampler: SharedSampler<T>,
        kappa: SharedPropensity<T>,
        mc_size: usize,
        opts: &OptimizerOptions,
        rng: &mut R,
    ) -> Result<Self> {
        let center = smoothed_argmax(sampler.as_ref(), kappa.as_ref(), mc_size, opts, rng)?;
        Ok(Self { sampler, kappa, center })
    }

    /// Kernel density and Nadaraya-Watson fit with Scott bandwidths,
    /// centered at the smoothed argmax with the default Monte Carlo size.
    pub fn from_data<R: Rng + ?Sized>(data: &Dataset<T>, opts: &OptimizerOptions, rng: &mut R) -> Result<Self> {
        let (p, k) = fit_smoothers(data)?;
        Self::with_models(Arc::new(p), Arc::new(k), default_mc_size(data.len()), opts, rng)
    }
}

impl<T> fmt::Debug for SmoothedFit<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothedFit").field("center", &self.center).finish_non_exhaustive()
    }
}

/// `B x d` matrix of rate-scaled, centered bootstrap estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDistribution<T> {
    draws: Vec<T>,
    d: usize,
    center: SphereVector<T>,
    rate: T,
    scheme: BootstrapScheme,
}

impl<T: Real> BootstrapDistribution<T> {
    pub fn from_parts(draws: Vec<T>, center: SphereVector<T>, rate: T, scheme: BootstrapScheme) -> Result<Self> {
        let d = center.dim();
        if !draws.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch { expected: d, got: draws.len() % d });
        }
        if !(rate > T::zero()) {
            return Err(Error::InvalidConfig("rate must be positive".into()));
        }
        Ok(Self { draws, d, center, rate, scheme })
    }

    pub fn replicates(&self) -> usize {
        self.draws.len() / self.d
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, b: usize) -> &[T] {
        &self.draws[b * self.d..(b + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.draws.chunks_exact(self.d)
    }

    pub fn draws(&self) -> &[T] {
        &self.draws
    }

    /// Column `j` of the draws.
    pub fn coordinate(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn center(&self) -> &SphereVector<T> {
        &self.center
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn scheme(&self) -> &BootstrapScheme {
        &self.scheme
    }
}

/// Bootstrap distribution around an estimate computed here from `stream`.
pub fn bootstrap_distribution<T: Real>(
    data: &Dataset<T>,
    scheme: &BootstrapScheme,
    smoothing: Option<&SmoothedFit<T>>,
    opts: &OptimizerOptions,
    stream: &Stream,
) -> Result<BootstrapDistribution<T>> {
    let (estimate, _) = maximize_score(data, opts, &mut stream.child(ESTIMATE_STREAM).rng())?;
    bootstrap_distribution_at(data, &estimate, scheme, smoothing, opts, stream)
}

/// Bootstrap distribution given the score maximizer `estimate` of `data`.
///
/// Replicate `b` draws all of its randomness from `stream.child(b)`, so the
/// result does not depend on the rayon pool size.
pub fn bootstrap_distribution_at<T: Real>(
    data: &Dataset<T>,
    estimate: &SphereVector<T>,
    scheme: &BootstrapScheme,
    smoothing: Option<&SmoothedFit<T>>,
    opts: &OptimizerOptions,
    stream: &Stream,
) -> Result<BootstrapDistribution<T>> {
    scheme.validate()?;
    data.ensure_valid()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    data.check_dim(estimate.dim())?;
    let n = data.len();
    let third = T::lit(1.0 / 3.0);
    let (center, rate) = match scheme.kind {
        SchemeKind::Classical => (estimate.clone(), T::from_count(n).powf(third)),
        SchemeKind::MOutOfN { gamma } => (estimate.clone(), T::from_count(subsample_size(n, gamma)).powf(third)),
        SchemeKind::Smoothed => {
            let fit = smoothing.ok_or_else(|| {
                Error::InvalidConfig("smoothed bootstrap requires fitted models".into())
            })?;
            data.check_dim(fit.center.dim())?;
            (fit.center.clone(), T::from_count(n).powf(third))
        }
    };

    let rows: Vec<Vec<T>> = (0..scheme.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.child(b).rng();
            let resample = match scheme.kind {
                SchemeKind::Classical => classical_resample(data, &mut rng)?,
                SchemeKind::MOutOfN { gamma } => moon_resample(data, gamma, &mut rng)?,
                SchemeKind::Smoothed => {
                    let fit = smoothing.expect("checked above");
                    smoothed_resample(fit.sampler.as_ref(), fit.kappa.as_ref(), n, &mut rng)?
                }
            };
            let (beta, _) = maximize_score(&resample, opts, &mut rng)?;
            Ok(beta
                .components()
                .iter()
                .zip(center.components())
                .map(|(&b, &c)| rate * (b - c))
                .collect())
        })
        .collect::<Result<_>>()?;

    BootstrapDistribution::from_parts(rows.concat(), center, rate, *scheme)
}

/// Empirical `a`-quantile of sorted data: linear interpolation between order
/// statistics at (1-based) position `1 + (B - 1) a`.
pub fn quantile_sorted<T: Real>(sorted: &[T], a: f64) -> T {
    let h = (sorted.len() - 1) as f64 * a;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    /// `[est - q_{1-a/2} / r, est - q_{a/2} / r]`
    #[default]
    RootInversion,
    /// `[est + q_{a/2} / r, est + q_{1-a/2} / r]`
    Percentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval<T> {
    pub lower: T,
    pub upper: T,
    pub level: f64,
    pub coordinate: usize,
}

impl<T: Real> ConfidenceInterval<T> {
    pub fn length(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, v: T) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Root-inversion interval for coordinate `coordinate` of the parameter,
/// scaling the draws back by `n^{1/3}`.
pub fn percentile_ci<T: Real>(
    dist: &BootstrapDistribution<T>,
    estimate: &SphereVector<T>,
    n: usize,
    level: f64,
    coordinate: usize,
) -> Result<ConfidenceInterval<T>> {
    interval(dist, estimate, n, level, coordinate, IntervalMethod::RootInversion)
}

pub fn interval<T: Real>(
    dist: &BootstrapDistribution<T>,
    estimate: &SphereVector<T>,
    n: usize,
    level: f64,
    coordinate: usize,
    method: IntervalMethod,
) -> Result<ConfidenceInterval<T>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {level}")));
    }
    if coordinate >= dist.dim() || estimate.dim() != dist.dim() {
        return Err(Error::DimensionMismatch { expected: dist.dim(), got: coordinate.max(estimate.dim()) });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if dist.replicates() < 2 {
        return Err(Error::InsufficientDraws(dist.replicates()));
    }
    let mut col = dist.coordinate(coordinate);
    if col.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite bootstrap draw".into()));
    }
    col.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let alpha = 1.0 - level;
    let lo_q = quantile_sorted(&col, alpha / 2.0);
    let hi_q = quantile_sorted(&col, 1.0 - alpha / 2.0);
    let r = T::from_count(n).powf(T::lit(1.0 / 3.0));
    let est = estimate.components()[coordinate];
    let (lower, upper) = match method {
        IntervalMethod::RootInversion => (est - hi_q / r, est - lo_q / r),
        IntervalMethod::Percentile => (est + lo_q / r, est + hi_q / r),
    };
    Ok(ConfidenceInterval { lower, upper, level, coordinate })
}

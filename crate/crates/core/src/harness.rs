//! Coverage experiments, histograms and distribution distances.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    bootstrap_distribution_at, interval, BootstrapDistribution, BootstrapScheme, IntervalMethod, SchemeKind,
    SmoothedFit,
};
use crate::io::write_rows_csv;
use crate::model::{dgp_sample, DgpSpec, SphereVector};
use crate::optimizer::{default_mc_size, maximize_score, OptimizerOptions};
use crate::rng::Stream;
use crate::{Error, Result};

/// Serializable description of a built-in design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpConfig {
    HeteroNormal {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta0: Option<Vec<f64>>,
    },
    HeteroStudentT3 {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta0: Option<Vec<f64>>,
    },
}

impl DgpConfig {
    pub fn hetero_normal(d: usize) -> Self {
        DgpConfig::HeteroNormal { d, beta0: None }
    }

    pub fn dim(&self) -> usize {
        match self {
            DgpConfig::HeteroNormal { d, .. } | DgpConfig::HeteroStudentT3 { d, .. } => *d,
        }
    }

    pub fn build(&self) -> Result<DgpSpec<f64>> {
        let (spec, beta0) = match self {
            DgpConfig::HeteroNormal { d, beta0 } => (DgpSpec::hetero_normal(*d), beta0),
            DgpConfig::HeteroStudentT3 { d, beta0 } => (DgpSpec::hetero_student_t3(*d), beta0),
        };
        if spec.dim() < 2 {
            return Err(Error::InvalidConfig("dimension must be >= 2".into()));
        }
        match beta0 {
            Some(b) if b.len() != spec.dim() => Err(Error::DimensionMismatch { expected: spec.dim(), got: b.len() }),
            Some(b) => Ok(spec.with_beta0(SphereVector::new(b.clone())?)),
            None => Ok(spec),
        }
    }
}

fn default_level() -> f64 {
    0.95
}

fn default_workers() -> usize {
    1
}

fn default_intervals() -> Vec<IntervalMethod> {
    vec![IntervalMethod::RootInversion]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpConfig,
    pub n: usize,
    pub replications: usize,
    pub schemes: Vec<BootstrapScheme>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub coordinate: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    /// Interval constructions to evaluate; each gives its own rows.
    #[serde(default = "default_intervals")]
    pub intervals: Vec<IntervalMethod>,
    /// Monte Carlo size for the smoothed center; `max(10 n, 10^4)` if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_size: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpConfig, n: usize, replications: usize, schemes: Vec<BootstrapScheme>) -> Self {
        Self {
            dgp,
            n,
            replications,
            schemes,
            level: default_level(),
            coordinate: 0,
            master_seed: 0,
            workers: default_workers(),
            output_path: None,
            optimizer: OptimizerOptions::default(),
            intervals: default_intervals(),
            mc_size: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.coordinate >= self.dgp.dim() {
            return Err(Error::InvalidConfig(format!(
                "coordinate {} out of range for d = {}",
                self.coordinate,
                self.dgp.dim()
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        if self.intervals.is_empty() {
            return Err(Error::InvalidConfig("at least one interval method is required".into()));
        }
        if self.mc_size == Some(0) {
            return Err(Error::InvalidConfig("mc_size must be >= 1".into()));
        }
        self.optimizer.validate()?;
        for s in &self.schemes {
            s.validate()?;
        }
        self.dgp.build().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub scheme: String,
    pub interval: IntervalMethod,
    pub n: usize,
    pub m: Option<usize>,
    pub coverage: f64,
    pub avg_length: f64,
    pub replications: usize,
    pub seed: u64,
}

/// A fixed law of `n^{1/3}(beta_hat - beta0)` used in place of a bootstrap,
/// e.g. a long simulation of the true sampling distribution.
#[derive(Debug, Clone)]
pub struct ReferenceLaw {
    pub label: String,
    pub draws: Arc<BootstrapDistribution<f64>>,
}

/// Runs `f` on a rayon pool with `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

// child indices below a replication stream; schemes use 0..S
const DATA_STREAM: u64 = u64::MAX;
const ESTIMATE_STREAM: u64 = u64::MAX - 1;
const SMOOTH_STREAM: u64 = u64::MAX - 2;

pub fn run_coverage_experiment(config: &ExperimentConfig) -> Result<Vec<CoverageRow>> {
    config.validate()?;
    let spec = config.dgp.build()?;
    run_coverage_with(config, &spec, &[])
}

/// Coverage experiment on an arbitrary design, with optional reference laws
/// evaluated alongside the bootstrap schemes.
///
/// Replication `r` draws from `Stream::new(seed).child(r)`; scheme `j` of it
/// bootstraps from `child(r).child(j)`, replicate `b` from `.child(b)`.
pub fn run_coverage_with(
    config: &ExperimentConfig,
    spec: &DgpSpec<f64>,
    references: &[ReferenceLaw],
) -> Result<Vec<CoverageRow>> {
    if config.replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    if config.coordinate >= spec.dim() {
        return Err(Error::InvalidConfig("coordinate out of range".into()));
    }
    for s in &config.schemes {
        s.validate()?;
    }
    if config.schemes.is_empty() && references.is_empty() {
        return Err(Error::InvalidConfig("no schemes to evaluate".into()));
    }
    let n = config.n;
    let truth = spec.beta0.components()[config.coordinate];
    let needs_fit = config.schemes.iter().any(|s| s.kind == SchemeKind::Smoothed);
    let mc = config.mc_size.unwrap_or_else(|| default_mc_size(n));
    let root = Stream::new(config.master_seed);
    let methods = &config.intervals;
    let columns = (config.schemes.len() + references.len()) * methods.len();

    let per_rep: Vec<Vec<(bool, f64)>> = with_workers(config.workers, || {
        (0..config.replications as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<(bool, f64)>> {
                let rs = root.child(r);
                let data = dgp_sample(spec, n, &mut rs.child(DATA_STREAM).rng());
                let (est, _) = maximize_score(&data, &config.optimizer, &mut rs.child(ESTIMATE_STREAM).rng())?;
                let fit = if needs_fit {
                    let (p, k) = crate::smoothing::fit_smoothers(&data)?;
                    Some(SmoothedFit::with_models(
                        Arc::new(p),
                        Arc::new(k),
                        mc,
                        &config.optimizer,
                        &mut rs.child(SMOOTH_STREAM).rng(),
                    )?)
                } else {
                    None
                };
                let mut out = Vec::with_capacity(columns);
                let mut record = |dist: &BootstrapDistribution<f64>| -> Result<()> {
                    for &method in methods {
                        let ci = interval(dist, &est, n, config.level, config.coordinate, method)?;
                        out.push((ci.contains(truth), ci.length()));
                    }
                    Ok(())
                };
                for (j, scheme) in config.schemes.iter().enumerate() {
                    let dist =
                        bootstrap_distribution_at(&data, &est, scheme, fit.as_ref(), &config.optimizer, &rs.child(j as u64))?;
                    record(&dist)?;
                }
                for reference in references {
                    record(&reference.draws)?;
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let reps = config.replications;
    let mut labels: Vec<(String, Option<usize>)> = config
        .schemes
        .iter()
        .map(|s| {
            let m = matches!(s.kind, SchemeKind::MOutOfN { .. }).then(|| s.resample_size(n));
            (s.label().to_string(), m)
        })
        .collect();
    labels.extend(references.iter().map(|r| (r.label.clone(), None)));
    let mut rows = Vec::with_capacity(columns);
    for (i, (label, m)) in labels.into_iter().enumerate() {
        for (k, &method) in methods.iter().enumerate() {
            let col = i * methods.len() + k;
            let covered = per_rep.iter().filter(|v| v[col].0).count();
            let total: f64 = per_rep.iter().map(|v| v[col].1).sum();
            rows.push(CoverageRow {
                scheme: label.clone(),
                interval: method,
                n,
                m,
                coverage: covered as f64 / reps as f64,
                avg_length: total / reps as f64,
                replications: reps,
                seed: config.master_seed,
            });
        }
    }
    Ok(rows)
}

/// `reps` independent draws of `n^{1/3}(beta_hat_n - beta0)` from the design,
/// shaped as a distribution centered at `beta0`.
pub fn sampling_distribution(
    spec: &DgpSpec<f64>,
    n: usize,
    reps: usize,
    opts: &OptimizerOptions,
    stream: &Stream,
) -> Result<BootstrapDistribution<f64>> {
    if n == 0 || reps == 0 {
        return Err(Error::InvalidConfig("need n >= 1 and at least one replication".into()));
    }
    let rate = (n as f64).cbrt();
    let rows: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.child(r).rng();
            let data = dgp_sample(spec, n, &mut rng);
            let (b, _) = maximize_score(&data, opts, &mut rng)?;
            Ok(b.components().iter().zip(spec.beta0.components()).map(|(x, y)| rate * (x - y)).collect())
        })
        .collect::<Result<_>>()?;
    BootstrapDistribution::from_parts(rows.concat(), spec.beta0.clone(), rate, BootstrapScheme::classical(reps))
}

pub fn write_coverage_csv(rows: &[CoverageRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_rows_csv(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
    pub density: f64,
}

/// Equal-width bins over `[min, max]`, the last one closed. A sample with a
/// single distinct value gets unit-width bins starting half a unit below it.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<HistBin>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be >= 1".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("histogram samples must be finite".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (start, width) = if hi > lo {
        (lo, (hi - lo) / bins as f64)
    } else {
        (lo - 0.5 * bins as f64, 1.0)
    };
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let i = if hi > lo { ((x - lo) / width).floor() as usize } else { bins / 2 };
        counts[i.min(bins - 1)] += 1;
    }
    let total = samples.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let left = start + i as f64 * width;
            let right = if i + 1 == bins && hi > lo { hi } else { start + (i + 1) as f64 * width };
            HistBin {
                bin_left: left,
                bin_right: right,
                count,
                density: count as f64 / (total * width),
            }
        })
        .collect())
}

/// Writes `bin_left,bin_right,count,density`.
pub fn export_histogram(samples: &[f64], bins: usize, path: &Path) -> Result<Vec<HistBin>> {
    let h = histogram(samples, bins)?;
    let mut w = BufWriter::new(File::create(path)?);
    write_rows_csv(&h, &mut w)?;
    w.flush()?;
    Ok(h)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let sort = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sort(a), sort(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_known_values() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 1.0);
        // F_a jumps to 1/2 at 1 while F_b is still 0
        assert_eq!(ks_distance(&[1.0, 4.0], &[2.0, 3.0]).unwrap(), 0.5);
        assert!(ks_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[2.5], 1).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!((h[0].bin_left, h[0].bin_right, h[0].count, h[0].density), (2.0, 3.0, 1, 1.0));
        let h = histogram(&[0.0, 1.0, 0.5, 1.0], 2).unwrap();
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(h[1].bin_right, 1.0);
        assert!(matches!(histogram(&[], 3), Err(Error::EmptySample)));
    }

    #[test]
    fn config_json() {
        let c = ExperimentConfig::from_json(
            r#"{"dgp": {"kind": "hetero_normal", "d": 2}, "n": 50, "replications": 3,
                "schemes": [{"kind": "classical", "B": 10}, {"kind": "moon", "gamma": 0.5, "B": 10}]}"#,
        )
        .unwrap();
        assert_eq!(c.level, 0.95);
        assert_eq!(c.workers, 1);
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let zero = ExperimentConfig { replications: 0, ..c.clone() };
        assert!(zero.validate().unwrap_err().is_config());
        assert!(ExperimentConfig::from_json(r#"{"n": 1}"#).is_err());
    }
}

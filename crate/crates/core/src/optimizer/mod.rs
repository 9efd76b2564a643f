//! The empirical score, its maximization over the sphere, and the smoothed
//! population analogue used to recenter the smoothed bootstrap.

pub mod sweep;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovariateSampler, Dataset, Propensity, SphereVector};
use crate::scalar::{dot, Real};
use crate::special::normal_quantile;
use sweep::{sweep_max, SweepWeight};

/// Value of the empirical score `(1/n) sum (Y_i - 1/2) 1{beta'X_i >= 0}`,
/// always within `[-1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScoreValue<T>(T);

impl<T: Real> ScoreValue<T> {
    pub fn value(self) -> T {
        self.0
    }

    fn from_count(k: i64, n: usize) -> Self {
        Self(T::from_i64(k).expect("count fits scalar") / T::from_count(2 * n))
    }
}

/// Budget for the multi-start search used when `d >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub restarts: usize,
    pub grid_size: usize,
    pub refine_iters: usize,
    pub tolerance: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            grid_size: 4096,
            refine_iters: 200,
            tolerance: 1e-6,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.grid_size == 0 || self.refine_iters == 0 {
            return Err(Error::InvalidConfig(
                "optimizer counts must be at least 1".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidConfig("optimizer tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// `sum_i w_i 1{beta'x_i >= 0}` over row-major points.
struct Objective<'a, T, W> {
    points: &'a [T],
    weights: &'a [W],
    d: usize,
}

impl<'a, T: Real, W: SweepWeight> Objective<'a, T, W> {
    fn eval(&self, beta: &[T]) -> W {
        self.points
            .chunks_exact(self.d)
            .zip(self.weights)
            .filter(|(x, _)| dot(beta, x) >= T::zero())
            .fold(W::zero(), |acc, (_, &w)| acc + w)
    }

    /// Exact maximum over the great circle through `beta` and the unit
    /// vector `v` orthogonal to it.
    fn great_circle(&self, beta: &[T], v: &[T]) -> Vec<T> {
        let coords: Vec<[T; 2]> = self
            .points
            .chunks_exact(self.d)
            .map(|x| [dot(beta, x), dot(v, x)])
            .collect();
        let opt = sweep_max(&coords, self.weights);
        let [c, s] = opt.direction;
        let mut out: Vec<T> = beta.iter().zip(v).map(|(&b, &u)| c * b + s * u).collect();
        normalize(&mut out);
        out
    }
}

fn normalize<T: Real>(v: &mut [T]) -> bool {
    let r = dot(v, v).sqrt();
    if !(r > T::zero()) || !r.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|c| *c = *c / r);
    true
}

/// Unit vector along `u` with its `beta` component removed, if it is not
/// (numerically) parallel to `beta`.
fn orthogonal_to<T: Real>(u: &[T], beta: &[T]) -> Option<Vec<T>> {
    let p = dot(u, beta);
    let mut v: Vec<T> = u.iter().zip(beta).map(|(&a, &b)| a - p * b).collect();
    // second Gram-Schmidt pass for accuracy
    let p2 = dot(&v, beta);
    v.iter_mut().zip(beta).for_each(|(a, &b)| *a = *a - p2 * b);
    let r = dot(&v, &v).sqrt();
    if r.as_f64() < 1e-8 {
        return None;
    }
    v.iter_mut().for_each(|c| *c = *c / r);
    Some(v)
}

fn lex_less<T: Real>(a: &[T], b: &[T]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

pub(crate) fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

pub(crate) const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Deterministic quasi-uniform points on the sphere: a Halton sequence pushed
/// through the normal quantile and normalized.
pub fn quasi_random_sphere<T: Real>(d: usize, count: usize) -> Vec<Vec<T>> {
    assert!(d <= PRIMES.len(), "quasi-random sphere supports d <= {}", PRIMES.len());
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let mut v: Vec<T> = PRIMES[..d]
            .iter()
            .map(|&p| T::lit(normal_quantile(radical_inverse(i, p))))
            .collect();
        i += 1;
        if normalize(&mut v) {
            out.push(v);
        }
    }
    out
}

fn random_unit<T: Real>(d: usize, rng: &mut dyn RngCore) -> Vec<T> {
    loop {
        let mut v: Vec<T> = (0..d).map(|_| T::standard_normal(rng)).collect();
        if normalize(&mut v) {
            return v;
        }
    }
}

/// Multi-start search with exact great-circle refinement.
///
/// Starts are `restarts` random directions plus the best of `grid_size`
/// quasi-random directions. From each start the objective is maximized
/// exactly along the great circles towards every coordinate axis in turn;
/// when a full pass gains less than `min_gain`, `d` random great circles are
/// tried before the start is abandoned. Ties between starts go to the
/// lexicographically smallest vector.
fn multistart<T: Real, W: SweepWeight>(
    obj: &Objective<'_, T, W>,
    opts: &OptimizerOptions,
    min_gain: W,
    rng: &mut dyn RngCore,
) -> (Vec<T>, W) {
    let d = obj.d;
    let mut starts: Vec<Vec<T>> = (0..opts.restarts).map(|_| random_unit(d, rng)).collect();
    let grid_best = quasi_random_sphere::<T>(d, opts.grid_size)
        .into_iter()
        .map(|v| {
            let val = obj.eval(&v);
            (v, val)
        })
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .map(|(v, _)| v);
    starts.extend(grid_best);

    let mut best: Option<(Vec<T>, W)> = None;
    for start in starts {
        let (beta, val) = refine(obj, start, opts, min_gain, rng);
        let replace = match &best {
            None => true,
            Some((bb, bv)) => val > *bv || (val == *bv && lex_less(&beta, bb)),
        };
        if replace {
            best = Some((beta, val));
        }
    }
    best.expect("at least one start")
}

fn refine<T: Real, W: SweepWeight>(
    obj: &Objective<'_, T, W>,
    mut beta: Vec<T>,
    opts: &OptimizerOptions,
    min_gain: W,
    rng: &mut dyn RngCore,
) -> (Vec<T>, W) {
    let d = obj.d;
    let mut val = obj.eval(&beta);
    let try_plane = |beta: &mut Vec<T>, val: &mut W, u: &[T]| -> bool {
        let Some(v) = orthogonal_to(u, beta) else {
            return false;
        };
        let cand = obj.great_circle(beta, &v);
        let cv = obj.eval(&cand);
        if cv > *val + min_gain {
            *beta = cand;
            *val = cv;
            true
        } else {
            false
        }
    };
    for _ in 0..opts.refine_iters {
        let mut improved = false;
        for j in 0..d {
            let mut e = vec![T::zero(); d];
            e[j] = T::one();
            improved |= try_plane(&mut beta, &mut val, &e);
        }
        if !improved {
            for _ in 0..d {
                let u = random_unit::<T>(d, rng);
                improved |= try_plane(&mut beta, &mut val, &u);
            }
        }
        if !improved {
            break;
        }
    }
    (beta, val)
}

fn score_weights<T: Real>(data: &Dataset<T>) -> Vec<i64> {
    data.responses().iter().map(|&y| if y == 1 { 1 } else { -1 }).collect()
}

fn check_nonempty<T: Real>(data: &Dataset<T>) -> Result<()> {
    if data.is_empty() {
        Err(Error::EmptyDataset)
    } else {
        Ok(())
    }
}

/// The empirical score at `beta`. Rows with `beta'X_i = 0` count as inside.
pub fn score<T: Real>(data: &Dataset<T>, beta: &SphereVector<T>) -> Result<ScoreValue<T>> {
    data.check_dim(beta.dim())?;
    check_nonempty(data)?;
    let w = score_weights(data);
    let obj = Objective {
        points: data.covariates(),
        weights: &w,
        d: data.dim(),
    };
    Ok(ScoreValue::from_count(obj.eval(beta.components()), data.len()))
}

/// Exact global maximizer of the score for `d = 2`.
///
/// Returns the midpoint of the first maximizing arc in angle order, or the
/// maximizing breakpoint when the maximum is only attained on a boundary.
pub fn maximize_score_2d<T: Real>(data: &Dataset<T>) -> Result<(SphereVector<T>, ScoreValue<T>)> {
    if data.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: data.dim(),
        });
    }
    check_nonempty(data)?;
    data.ensure_valid()?;
    let coords: Vec<[T; 2]> = data.rows().map(|r| [r[0], r[1]]).collect();
    let opt = sweep_max(&coords, &score_weights(data));
    let beta = SphereVector::new(opt.direction.to_vec())?;
    let value = score(data, &beta)?;
    Ok((beta, value))
}

/// Heuristic maximizer for any `d >= 2`; see [`OptimizerOptions`].
pub fn maximize_score_nd<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    opts: &OptimizerOptions,
    rng: &mut R,
) -> Result<(SphereVector<T>, ScoreValue<T>)> {
    opts.validate()?;
    check_nonempty(data)?;
    data.ensure_valid()?;
    let w = score_weights(data);
    let obj = Objective {
        points: data.covariates(),
        weights: &w,
        d: data.dim(),
    };
    let mut rng: &mut R = rng;
    let (beta, _) = multistart(&obj, opts, 0, &mut rng);
    let beta = SphereVector::new(beta)?;
    let value = score(data, &beta)?;
    Ok((beta, value))
}

/// Exact sweep for `d = 2`, multi-start heuristic otherwise.
pub fn maximize_score<T: Real, R: Rng + ?Sized>(
    data: &Dataset<T>,
    opts: &OptimizerOptions,
    rng: &mut R,
) -> Result<(SphereVector<T>, ScoreValue<T>)> {
    if data.dim() == 2 {
        maximize_score_2d(data)
    } else {
        maximize_score_nd(data, opts, rng)
    }
}

/// Maximizer of `sum_j w_j 1{beta'x_j >= 0}` over row-major `points`.
/// Returns the direction and the averaged objective `(1/M) sum ...`.
pub fn weighted_argmax<T: Real, R: Rng + ?Sized>(
    points: &[T],
    d: usize,
    weights: &[T],
    opts: &OptimizerOptions,
    rng: &mut R,
) -> Result<(SphereVector<T>, T)> {
    if d < 2 || points.len() != weights.len() * d {
        return Err(Error::DimensionMismatch {
            expected: weights.len() * d.max(2),
            got: points.len(),
        });
    }
    if weights.is_empty() {
        return Err(Error::EmptySample);
    }
    let obj = Objective { points, weights, d };
    let m = T::from_count(weights.len());
    let beta = if d == 2 {
        let coords: Vec<[T; 2]> = points.chunks_exact(2).map(|r| [r[0], r[1]]).collect();
        sweep_max(&coords, weights).direction.to_vec()
    } else {
        opts.validate()?;
        let mut rng: &mut R = rng;
        let min_gain = T::lit(opts.tolerance) * m;
        multistart(&obj, opts, min_gain, &mut rng).0
    };
    let beta = SphereVector::new(beta)?;
    let value = obj.eval(beta.components()) / m;
    Ok((beta, value))
}

/// Default Monte Carlo size `max(10 n, 10^4)` for [`smoothed_argmax`].
pub fn default_mc_size(n: usize) -> usize {
    (10 * n).max(10_000)
}

/// Monte Carlo maximizer of `int_{beta'x >= 0} (kappa(x) - 1/2) p(x) dx`:
/// `mc_size` draws from `density`, weighted by `kappa - 1/2`.
pub fn smoothed_argmax<T, S, K, R>(
    density: &S,
    kappa: &K,
    mc_size: usize,
    opts: &OptimizerOptions,
    rng: &mut R,
) -> Result<SphereVector<T>>
where
    T: Real,
    S: CovariateSampler<T> + ?Sized,
    K: Propensity<T> + ?Sized,
    R: Rng + ?Sized,
{
    if mc_size == 0 {
        return Err(Error::InvalidConfig("Monte Carlo size must be at least 1".into()));
    }
    let d = density.dim();
    let mut rng: &mut R = rng;
    let points = density.sample(mc_size, &mut rng);
    let half = T::lit(0.5);
    let weights: Vec<T> = points.chunks_exact(d).map(|x| kappa.prob(x) - half).collect();
    weighted_argmax(&points, d, &weights, opts, &mut rng).map(|(b, _)| b)
}

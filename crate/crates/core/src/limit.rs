//! Cube-root limit law of the maximum score estimator: hyperplane basis,
//! covariance kernel and drift of the limiting Gaussian process, and a grid
//! simulator for the argmax of `W(s) - s'V s / 2`.
//!
//! Everything here is `f64`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::model::{kappa_gradient, DgpKind, DgpSpec, SphereVector};
use crate::optimizer::{radical_inverse, PRIMES};
use crate::rng::Stream;
use crate::{Error, Result};

/// Brownian scale `2^{-5/4}` of the reference limit for the heteroscedastic
/// normal design in the plane, as published.
pub const PAPER_BROWNIAN_SCALE: f64 = 0.420_448_207_626_857_25;
/// Quadratic drift coefficient `11 / (30 sqrt(pi))`.
pub const PAPER_DRIFT_COEFFICIENT: f64 = 0.206_869_513_967_510_66;
/// Brownian scale `2^{-3/2} = sqrt(Sigma(1, 1))` implied by the covariance
/// kernel for the same design.
pub const KERNEL_BROWNIAN_SCALE: f64 = 0.353_553_390_593_273_8;

/// Orthonormal basis `H` (`d x (d-1)`) of the hyperplane orthogonal to `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneBasis {
    h: DMatrix<f64>,
}

impl HyperplaneBasis {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Ambient dimension `d`.
    pub fn ambient_dim(&self) -> usize {
        self.h.nrows()
    }

    /// Hyperplane dimension `d - 1`.
    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    /// `H xi`
    pub fn embed(&self, xi: &[f64]) -> Vec<f64> {
        (&self.h * DVector::from_column_slice(xi)).as_slice().to_vec()
    }

    /// `H' x`
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (self.h.transpose() * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// Row `i` of `H`: maps `s` to coordinate `i` of `H s`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.h.row(i).iter().copied().collect()
    }
}

/// First `d - 1` columns of the Householder reflection taking `e_d` to `beta`.
pub fn hyperplane_basis(beta: &SphereVector<f64>) -> HyperplaneBasis {
    let d = beta.dim();
    let mut v = DVector::from_iterator(d, beta.components().iter().map(|b| -b));
    v[d - 1] += 1.0;
    let vv = v.dot(&v);
    let mut q = DMatrix::<f64>::identity(d, d);
    // beta == e_d gives the identity
    if vv > 1e-30 {
        q -= (&v * v.transpose()) * (2.0 / vv);
    }
    HyperplaneBasis { h: q.columns(0, d - 1).into_owned() }
}

/// Covariate density with a known bound on its support.
pub trait SupportedDensity: Sync {
    fn dim(&self) -> usize;
    fn density(&self, x: &[f64]) -> f64;
    /// `R` with `p(x) = 0` for `|x| > R`, if known.
    fn support_radius(&self) -> Option<f64>;
}

/// Uniform density on `[-1, 1]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformCube {
    pub d: usize,
}

impl SupportedDensity for UniformCube {
    fn dim(&self) -> usize {
        self.d
    }

    fn density(&self, x: &[f64]) -> f64 {
        if x.iter().all(|v| v.abs() <= 1.0) {
            0.5f64.powi(self.d as i32)
        } else {
            0.0
        }
    }

    fn support_radius(&self) -> Option<f64> {
        Some((self.d as f64).sqrt())
    }
}

impl SupportedDensity for DgpSpec<f64> {
    fn dim(&self) -> usize {
        self.beta0.dim()
    }

    fn density(&self, x: &[f64]) -> f64 {
        match self.kind {
            DgpKind::CustomKappa { .. } => f64::NAN,
            _ => UniformCube { d: self.beta0.dim() }.density(x),
        }
    }

    fn support_radius(&self) -> Option<f64> {
        match self.kind {
            DgpKind::CustomKappa { .. } => None,
            _ => Some((self.beta0.dim() as f64).sqrt()),
        }
    }
}

/// A user supplied density on the ball of radius `radius`.
pub struct CompactDensity<F> {
    pub d: usize,
    pub radius: f64,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> SupportedDensity for CompactDensity<F> {
    fn dim(&self) -> usize {
        self.d
    }

    fn density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadMethod {
    /// Adaptive Simpson on a line, quasi-Monte Carlo otherwise.
    #[default]
    Auto,
    QuasiMonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub method: QuadMethod,
    pub tolerance: f64,
    pub max_depth: u32,
    pub qmc_points: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            method: QuadMethod::Auto,
            tolerance: 1e-13,
            max_depth: 48,
            qmc_points: 1 << 18,
        }
    }
}

fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, fa, b, fb, m, fm, whole, eps, depth)
}

fn support_radius(density: &dyn SupportedDensity) -> Result<f64> {
    match density.support_radius() {
        Some(r) if r.is_finite() && r > 0.0 => Ok(r),
        _ => Err(Error::QuadratureFailure("density has no known compact support".into())),
    }
}

/// `int_{[-R, R]^k} f(xi) dxi` for a vector-valued integrand, either by
/// adaptive Simpson (split at 0, `k = 1`) or by a Halton rule.
fn integrate(
    k: usize,
    radius: f64,
    quad: &QuadConfig,
    out_len: usize,
    f: &(dyn Fn(&[f64], &mut [f64]) + Sync),
) -> Result<Vec<f64>> {
    if k == 1 && quad.method == QuadMethod::Auto {
        let eps = quad.tolerance;
        return Ok((0..out_len)
            .map(|j| {
                let g = |x: f64| {
                    let mut buf = vec![0.0; out_len];
                    f(&[x], &mut buf);
                    buf[j]
                };
                adaptive_simpson(&g, -radius, 0.0, eps, quad.max_depth)
                    + adaptive_simpson(&g, 0.0, radius, eps, quad.max_depth)
            })
            .collect());
    }
    if k > PRIMES.len() {
        return Err(Error::QuadratureFailure(format!("quasi-Monte Carlo supports up to {} dimensions", PRIMES.len())));
    }
    if quad.qmc_points == 0 {
        return Err(Error::QuadratureFailure("no quadrature points".into()));
    }
    let n = quad.qmc_points as u64;
    // fixed chunks summed in index order: bitwise identical for any pool size
    const CHUNK: u64 = 4096;
    let partials: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let (mut acc, mut xi, mut buf) = (vec![0.0; out_len], vec![0.0; k], vec![0.0; out_len]);
            for i in c * CHUNK + 1..=((c + 1) * CHUNK).min(n) {
                for (j, x) in xi.iter_mut().enumerate() {
                    *x = radius * (2.0 * radical_inverse(i, PRIMES[j]) - 1.0);
                }
                f(&xi, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; out_len];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    let vol = (2.0 * radius).powi(k as i32);
    Ok(total.into_iter().map(|t| t * vol / n as f64).collect())
}

fn check_basis(density: &dyn SupportedDensity, basis: &HyperplaneBasis) -> Result<()> {
    if density.dim() != basis.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: basis.ambient_dim(), got: density.dim() });
    }
    Ok(())
}

/// `Sigma(s, t) = (1/8) int (|s'xi| + |t'xi| - |(s-t)'xi|) p(H xi) dxi`.
pub fn sigma_cov(
    s: &[f64],
    t: &[f64],
    density: &dyn SupportedDensity,
    basis: &HyperplaneBasis,
    quad: &QuadConfig,
) -> Result<f64> {
    check_basis(density, basis)?;
    let k = basis.dim();
    if s.len() != k || t.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: s.len().max(t.len()) });
    }
    let r = support_radius(density)?;
    let f = |xi: &[f64], out: &mut [f64]| {
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for j in 0..k {
            a += s[j] * xi[j];
            b += t[j] * xi[j];
            c += (s[j] - t[j]) * xi[j];
        }
        let w = a.abs() + b.abs() - c.abs();
        out[0] = if w == 0.0 { 0.0 } else { w * density.density(&basis.embed(xi)) / 8.0 };
    };
    Ok(integrate(k, r, quad, 1, &f)?[0])
}

/// `V = int g(xi) p(H xi) xi xi' dxi` with `g(xi) = grad kappa(H xi)' beta0`.
pub fn drift_matrix(
    kappa_grad_dot_beta: &(dyn Fn(&[f64]) -> f64 + Sync),
    density: &dyn SupportedDensity,
    basis: &HyperplaneBasis,
    quad: &QuadConfig,
) -> Result<DMatrix<f64>> {
    check_basis(density, basis)?;
    let k = basis.dim();
    let r = support_radius(density)?;
    let f = |xi: &[f64], out: &mut [f64]| {
        let p = density.density(&basis.embed(xi));
        let w = if p == 0.0 { 0.0 } else { p * kappa_grad_dot_beta(xi) };
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] = w * xi[i] * xi[j];
            }
        }
    };
    let flat = integrate(k, r, quad, k * k, &f)?;
    let m = DMatrix::from_row_slice(k, k, &flat);
    Ok((&m + m.transpose()) * 0.5)
}

/// Drift matrix of a built-in design, using its closed-form gradient.
pub fn design_drift(spec: &DgpSpec<f64>, basis: &HyperplaneBasis, quad: &QuadConfig) -> Result<DMatrix<f64>> {
    if kappa_gradient(spec, spec.beta0.components()).is_none() {
        return Err(Error::QuadratureFailure("custom propensity has no gradient".into()));
    }
    let g = |xi: &[f64]| {
        let x = basis.embed(xi);
        let grad = kappa_gradient(spec, &x).expect("checked above");
        spec.beta0.dot(&grad)
    };
    drift_matrix(&g, spec, basis, quad)
}

pub type CovarianceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Covariance {
    /// `W(s) = a Z(s)` with `Z` a two-sided standard Brownian motion (`d = 2`).
    Brownian { scale: f64 },
    /// Gaussian field with the given covariance kernel, simulated exactly on
    /// a product grid.
    Field(CovarianceFn),
}

impl fmt::Debug for Covariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Covariance::Brownian { scale } => f.debug_struct("Brownian").field("scale", scale).finish(),
            Covariance::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// Largest number of grid points per axis for field simulation.
pub const MAX_FIELD_AXIS_POINTS: usize = 40;
/// Largest tolerated share of draws landing on the grid boundary.
pub const MAX_BOUNDARY_FRACTION: f64 = 0.01;

/// `Lambda(s) = W(s) - s'V s / 2` on the grid `{k step : |k step| <= L}^{d-1}`.
#[derive(Debug, Clone)]
pub struct LimitProcessSpec {
    pub drift: DMatrix<f64>,
    pub covariance: Covariance,
    pub half_width: f64,
    pub step: f64,
    /// Linear map from `s*` to the reported first coordinate.
    pub first_row: Vec<f64>,
}

impl LimitProcessSpec {
    /// One-dimensional `a Z(s) - b s^2`.
    pub fn brownian(a: f64, b: f64) -> Self {
        Self {
            drift: DMatrix::from_element(1, 1, 2.0 * b),
            covariance: Covariance::Brownian { scale: a },
            half_width: 6.0,
            step: 0.005,
            first_row: vec![1.0],
        }
    }

    /// Published reference law for the heteroscedastic normal design with
    /// `d = 2`: `(1/sqrt 2) argmax 2^{-5/4} Z(s) - 11/(30 sqrt pi) s^2`.
    pub fn published_reference() -> Self {
        Self::brownian(PAPER_BROWNIAN_SCALE, PAPER_DRIFT_COEFFICIENT).with_first_row(vec![FRAC_1_SQRT_2])
    }

    /// Same design with the Brownian scale implied by `Sigma`, reported as
    /// the first coordinate of `H s*`.
    pub fn kernel_reference() -> Self {
        let basis = hyperplane_basis(&SphereVector::equal_weights(2));
        Self::brownian(KERNEL_BROWNIAN_SCALE, PAPER_DRIFT_COEFFICIENT).with_first_row(basis.row(0))
    }

    /// Limit process of a built-in design computed by quadrature. Brownian
    /// in the plane, a gridded field otherwise.
    pub fn from_design(spec: &DgpSpec<f64>, quad: &QuadConfig) -> Result<Self> {
        let basis = hyperplane_basis(&spec.beta0);
        let drift = design_drift(spec, &basis, quad)?;
        let k = basis.dim();
        let covariance = if k == 1 {
            Covariance::Brownian { scale: sigma_cov(&[1.0], &[1.0], spec, &basis, quad)?.sqrt() }
        } else {
            let spec = spec.clone();
            let basis = basis.clone();
            let quad = *quad;
            Covariance::Field(Arc::new(move |s: &[f64], t: &[f64]| {
                sigma_cov(s, t, &spec, &basis, &quad).unwrap_or(f64::NAN)
            }))
        };
        Ok(Self {
            drift,
            covariance,
            half_width: 6.0,
            step: 0.005,
            first_row: basis.row(0),
        })
    }

    pub fn with_grid(mut self, half_width: f64, step: f64) -> Self {
        self.half_width = half_width;
        self.step = step;
        self
    }

    pub fn with_first_row(mut self, row: Vec<f64>) -> Self {
        self.first_row = row;
        self
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// Grid points on each side of 0.
    pub fn half_points(&self) -> usize {
        (self.half_width / self.step + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        if k == 0 || self.drift.ncols() != k || self.first_row.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: self.first_row.len() });
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidConfig("grid half width and step must be positive".into()));
        }
        if self.step > self.half_width / 10.0 {
            return Err(Error::GridTooCoarse { step: self.step, half_width: self.half_width });
        }
        if (&self.drift - self.drift.transpose()).abs().max() > 1e-10 {
            return Err(Error::InvalidConfig("drift matrix must be symmetric".into()));
        }
        match &self.covariance {
            Covariance::Brownian { scale } if k != 1 || !(*scale >= 0.0) => Err(Error::InvalidConfig(
                "Brownian covariance needs a one-dimensional process and scale >= 0".into(),
            )),
            Covariance::Field(_) if 2 * self.half_points() + 1 > MAX_FIELD_AXIS_POINTS => {
                Err(Error::InvalidConfig(format!(
                    "field grid allows at most {MAX_FIELD_AXIS_POINTS} points per axis"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Argmax draws `s*` of the limit process.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSample {
    draws: Vec<f64>,
    k: usize,
    first: Vec<f64>,
    boundary_hits: usize,
}

impl LimitSample {
    pub fn replicates(&self) -> usize {
        self.first.len()
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.draws[b * self.k..(b + 1) * self.k]
    }

    /// Reported first coordinate of each draw.
    pub fn first_coordinate(&self) -> &[f64] {
        &self.first
    }

    pub fn boundary_hits(&self) -> usize {
        self.boundary_hits
    }
}

fn project_first(row: &[f64], s: &[f64]) -> f64 {
    row.iter().zip(s).map(|(a, b)| a * b).sum()
}

/// Values of `a Z(k step) - b (k step)^2` for `k = -K..=K`, with the right
/// half of the path drawn before the left.
fn brownian_path<R: Rng + ?Sized>(a: f64, b: f64, k_max: usize, step: f64, rng: &mut R) -> Vec<f64> {
    let sd = step.sqrt();
    let mut vals = vec![0.0; 2 * k_max + 1];
    for dir in [1isize, -1] {
        let mut z = 0.0;
        for j in 1..=k_max {
            let e: f64 = rng.sample(StandardNormal);
            z += sd * e;
            let s = j as f64 * step;
            let idx = (k_max as isize + dir * j as isize) as usize;
            vals[idx] = a * z - b * s * s;
        }
    }
    vals
}

/// Index of the first maximum among every `stride`-th value.
fn argmax_strided(vals: &[f64], stride: usize) -> usize {
    let mut best = 0;
    let mut i = 0;
    while i < vals.len() {
        if vals[i] > vals[best] {
            best = i;
        }
        i += stride;
    }
    best
}

fn finish(draws: Vec<Vec<f64>>, hits: usize, first_row: &[f64]) -> Result<LimitSample> {
    let total = draws.len();
    if hits as f64 > MAX_BOUNDARY_FRACTION * total as f64 {
        return Err(Error::BoundarySaturation { hits, total });
    }
    let k = first_row.len();
    let first = draws.iter().map(|s| project_first(first_row, s)).collect();
    Ok(LimitSample { draws: draws.concat(), k, first, boundary_hits: hits })
}

/// `B` grid-argmax draws of the limit process; draw `b` uses `stream.child(b)`.
pub fn simulate_limit_argmax(spec: &LimitProcessSpec, replicates: usize, stream: &Stream) -> Result<LimitSample> {
    spec.validate()?;
    if replicates == 0 {
        return Err(Error::InvalidConfig("need at least one replicate".into()));
    }
    let k_max = spec.half_points();
    match &spec.covariance {
        Covariance::Brownian { scale } => {
            let b = 0.5 * spec.drift[(0, 0)];
            let out: Vec<(f64, bool)> = (0..replicates as u64)
                .into_par_iter()
                .map(|r| {
                    let vals = brownian_path(*scale, b, k_max, spec.step, &mut stream.child(r).rng());
                    let i = argmax_strided(&vals, 1);
                    ((i as f64 - k_max as f64) * spec.step, i == 0 || i == 2 * k_max)
                })
                .collect();
            let hits = out.iter().filter(|o| o.1).count();
            finish(out.into_iter().map(|o| vec![o.0]).collect(), hits, &spec.first_row)
        }
        Covariance::Field(cov) => simulate_field(spec, cov, k_max, replicates, stream),
    }
}

/// Draws on the grid with step `step` and, from the same paths, on the
/// subgrid with step `2 step`: `(coarse, fine)`.
pub fn simulate_limit_refinement(
    spec: &LimitProcessSpec,
    replicates: usize,
    stream: &Stream,
) -> Result<(LimitSample, LimitSample)> {
    spec.validate()?;
    let Covariance::Brownian { scale } = spec.covariance else {
        return Err(Error::InvalidConfig("grid refinement is implemented for Brownian processes".into()));
    };
    let coarse_spec = spec.clone().with_grid(spec.half_width, 2.0 * spec.step);
    coarse_spec.validate()?;
    let k_coarse = coarse_spec.half_points();
    let k_max = 2 * k_coarse;
    let b = 0.5 * spec.drift[(0, 0)];
    let out: Vec<(usize, usize)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let vals = brownian_path(scale, b, k_max, spec.step, &mut stream.child(r).rng());
            (argmax_strided(&vals, 2), argmax_strided(&vals, 1))
        })
        .collect();
    let locate = |i: usize| (i as f64 - k_max as f64) * spec.step;
    let at_edge = |i: usize| i == 0 || i == 2 * k_max;
    let coarse = finish(
        out.iter().map(|o| vec![locate(o.0)]).collect(),
        out.iter().filter(|o| at_edge(o.0)).count(),
        &spec.first_row,
    )?;
    let fine = finish(
        out.iter().map(|o| vec![locate(o.1)]).collect(),
        out.iter().filter(|o| at_edge(o.1)).count(),
        &spec.first_row,
    )?;
    Ok((coarse, fine))
}

fn simulate_field(
    spec: &LimitProcessSpec,
    cov: &CovarianceFn,
    k_max: usize,
    replicates: usize,
    stream: &Stream,
) -> Result<LimitSample> {
    let k = spec.dim();
    let axis = 2 * k_max + 1;
    let total = axis.pow(k as u32);
    // grid in lexicographic order, origin dropped (W(0) = 0)
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; k];
            for j in (0..k).rev() {
                p[j] = ((idx % axis) as f64 - k_max as f64) * spec.step;
                idx /= axis;
            }
            p
        })
        .collect();
    let origin = total / 2;
    let inner: Vec<usize> = (0..total).filter(|&i| i != origin).collect();
    let m = inner.len();
    let mut c = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in 0..=a {
            let v = cov(&points[inner[a]], &points[inner[b]]);
            if !v.is_finite() {
                return Err(Error::QuadratureFailure("covariance kernel is not finite on the grid".into()));
            }
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    let jitter = 1e-10 * c.diagonal().max().max(1e-300);
    for a in 0..m {
        c[(a, a)] += jitter;
    }
    let chol = c
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig("covariance is not positive definite on the grid".into()))?;
    let l = chol.l();
    let drift: Vec<f64> = points
        .iter()
        .map(|p| {
            let s = DVector::from_column_slice(p);
            0.5 * (s.transpose() * &spec.drift * &s)[(0, 0)]
        })
        .collect();
    let on_edge = |p: &[f64]| p.iter().any(|v| (v.abs() - k_max as f64 * spec.step).abs() < 0.5 * spec.step);

    let out: Vec<usize> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.child(r).rng();
            let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let w = &l * z;
            let mut best = origin;
            let mut best_val = 0.0;
            for (slot, &i) in inner.iter().enumerate() {
                let v = w[slot] - drift[i];
                if v > best_val || (v == best_val && i < best) {
                    best = i;
                    best_val = v;
                }
            }
            best
        })
        .collect();
    let hits = out.iter().filter(|&&i| on_edge(&points[i])).count();
    finish(out.into_iter().map(|i| points[i].clone()).collect(), hits, &spec.first_row)
}

/// `11 / (15 sqrt(pi))`, the drift of the heteroscedastic normal design in
/// the plane.
pub fn hetero_normal_plane_drift() -> f64 {
    11.0 / (15.0 * PI.sqrt())
}

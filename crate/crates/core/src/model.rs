//! Binary choice data, the two heteroscedastic simulation designs and the
//! latent-variable reconstruction of a propensity function.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Real};
use crate::special;

/// `n` observations of a covariate vector in `R^d` and a binary response.
///
/// Covariates are stored row-major. Construction only checks shapes; use
/// [`validate_dataset`] (or [`Dataset::ensure_valid`]) for the content checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    x: Vec<T>,
    y: Vec<u8>,
    d: usize,
}

impl<T: Real> Dataset<T> {
    pub fn from_parts(d: usize, x: Vec<T>, y: Vec<u8>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDataset("covariate dimension is zero".into()));
        }
        if x.len() != y.len() * d {
            return Err(Error::InvalidDataset(format!(
                "{} covariate values do not fill {} rows of dimension {d}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { x, y, d })
    }

    pub fn from_rows(rows: &[Vec<T>], y: Vec<u8>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDataset("ragged covariate rows".into()));
        }
        Self::from_parts(d, rows.concat(), y)
    }

    pub fn empty(d: usize) -> Self {
        Self {
            x: Vec::new(),
            y: Vec::new(),
            d,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.x.chunks_exact(self.d)
    }

    #[inline]
    pub fn y(&self, i: usize) -> u8 {
        self.y[i]
    }

    pub fn responses(&self) -> &[u8] {
        &self.y
    }

    pub fn covariates(&self) -> &[T] {
        &self.x
    }

    /// Copy of the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.d);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Self { x, y, d: self.d }
    }

    /// Rows with the given response value.
    pub fn class(&self, label: u8) -> Vec<T> {
        self.rows()
            .zip(&self.y)
            .filter(|(_, &y)| y == label)
            .flat_map(|(r, _)| r.iter().copied())
            .collect()
    }

    pub fn response_mean(&self) -> T {
        if self.is_empty() {
            return T::lit(0.5);
        }
        let ones = self.y.iter().filter(|&&y| y == 1).count();
        T::from_count(ones) / T::from_count(self.len())
    }

    /// Fails with the validation report rendered into the error when the
    /// data do not meet the estimation preconditions.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_dataset(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidDataset(report.to_string()))
        }
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.d != d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: d,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonBinaryResponse { row: usize, value: u8 },
    NonFiniteCovariate { row: usize, column: usize },
    DimensionTooSmall { d: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonBinaryResponse { row, value } => {
                write!(f, "non-binary response at row {row} (value {value})")
            }
            Violation::NonFiniteCovariate { row, column } => {
                write!(f, "non-finite covariate at row {row}, column {column}")
            }
            Violation::DimensionTooSmall { d } => write!(f, "dimension must be >= 2 (got {d})"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every violation of the estimation preconditions. Duplicate rows are
/// allowed.
pub fn validate_dataset<T: Real>(data: &Dataset<T>) -> ValidationReport {
    let mut violations = Vec::new();
    if data.dim() < 2 {
        violations.push(Violation::DimensionTooSmall { d: data.dim() });
    }
    for (row, (x, &y)) in data.rows().zip(data.responses()).enumerate() {
        if y > 1 {
            violations.push(Violation::NonBinaryResponse { row, value: y });
        }
        for (column, v) in x.iter().enumerate() {
            if !v.is_finite() {
                violations.push(Violation::NonFiniteCovariate { row, column });
            }
        }
    }
    ValidationReport { violations }
}

/// A direction in `R^d`, normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereVector<T> {
    components: Vec<T>,
}

impl<T: Real> SphereVector<T> {
    pub fn new(components: Vec<T>) -> Result<Self> {
        let r = norm(&components);
        if components.is_empty() || !r.is_finite() || r <= T::zero() {
            return Err(Error::InvalidConfig(
                "direction must be a finite nonzero vector".into(),
            ));
        }
        let mut v = Self {
            components: components.into_iter().map(|c| c / r).collect(),
        };
        // a second pass absorbs the rounding of the first division
        let r2 = norm(&v.components);
        if (r2 - T::one()).abs().as_f64() > T::UNIT_TOL / 4.0 {
            v.components.iter_mut().for_each(|c| *c = *c / r2);
        }
        Ok(v)
    }

    /// `d^{-1/2} (1, ..., 1)`.
    pub fn equal_weights(d: usize) -> Self {
        let c = T::one() / T::from_count(d).sqrt();
        Self {
            components: vec![c; d],
        }
    }

    /// `(cos theta, sin theta)`.
    pub fn from_angle(theta: T) -> Self {
        Self {
            components: vec![theta.cos(), theta.sin()],
        }
    }

    pub fn components(&self) -> &[T] {
        &self.components
    }

    pub fn into_inner(self) -> Vec<T> {
        self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn dot(&self, x: &[T]) -> T {
        dot(&self.components, x)
    }

    pub fn distance(&self, other: &Self) -> T {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn norm(&self) -> T {
        norm(&self.components)
    }

    pub fn cast<U: Real>(&self) -> SphereVector<U> {
        SphereVector {
            components: self.components.iter().map(|c| U::lit(c.as_f64())).collect(),
        }
    }
}

/// Probability of `Y = 1` given the covariates.
pub trait Propensity<T>: Sync {
    fn prob(&self, x: &[T]) -> T;
}

impl<T, F> Propensity<T> for F
where
    F: Fn(&[T]) -> T + Sync,
{
    fn prob(&self, x: &[T]) -> T {
        self(x)
    }
}

/// Source of covariate draws.
pub trait CovariateSampler<T>: Sync {
    fn dim(&self) -> usize;

    /// `m` draws, row-major.
    fn sample(&self, m: usize, rng: &mut dyn RngCore) -> Vec<T>;
}

pub type KappaFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type CovariateFn<T> = Arc<dyn Fn(&mut dyn RngCore) -> Vec<T> + Send + Sync>;

#[derive(Clone)]
pub enum DgpKind<T> {
    /// `U | X ~ N(0, (1 + |X|^2)^{-2})`.
    HeteroNormal,
    /// `U | X ~ (1 + |X|^2)^{-1} t_3`.
    HeteroStudentT3,
    /// Arbitrary propensity with its own covariate sampler.
    CustomKappa {
        kappa: KappaFn<T>,
        sampler: CovariateFn<T>,
    },
}

impl<T> fmt::Debug for DgpKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DgpKind::HeteroNormal => f.write_str("HeteroNormal"),
            DgpKind::HeteroStudentT3 => f.write_str("HeteroStudentT3"),
            DgpKind::CustomKappa { .. } => f.write_str("CustomKappa"),
        }
    }
}

/// Data generating process `Y = 1{beta0'X + U >= 0}`.
///
/// The two heteroscedastic designs draw `X ~ Uniform([-1, 1]^d)`.
#[derive(Debug, Clone)]
pub struct DgpSpec<T> {
    pub kind: DgpKind<T>,
    pub beta0: SphereVector<T>,
}

impl<T: Real> DgpSpec<T> {
    pub fn hetero_normal(d: usize) -> Self {
        Self {
            kind: DgpKind::HeteroNormal,
            beta0: SphereVector::equal_weights(d),
        }
    }

    pub fn hetero_student_t3(d: usize) -> Self {
        Self {
            kind: DgpKind::HeteroStudentT3,
            beta0: SphereVector::equal_weights(d),
        }
    }

    pub fn custom(beta0: SphereVector<T>, kappa: KappaFn<T>, sampler: CovariateFn<T>) -> Self {
        Self {
            kind: DgpKind::CustomKappa { kappa, sampler },
            beta0,
        }
    }

    pub fn with_beta0(mut self, beta0: SphereVector<T>) -> Self {
        self.beta0 = beta0;
        self
    }

    pub fn dim(&self) -> usize {
        self.beta0.dim()
    }

    fn draw_covariates(&self, rng: &mut dyn RngCore, out: &mut Vec<T>) {
        match &self.kind {
            DgpKind::HeteroNormal | DgpKind::HeteroStudentT3 => {
                for _ in 0..self.dim() {
                    out.push(T::lit(2.0) * T::unit_uniform(rng) - T::one());
                }
            }
            DgpKind::CustomKappa { sampler, .. } => {
                let x = sampler(rng);
                assert_eq!(x.len(), self.dim(), "covariate sampler returned wrong dimension");
                out.extend(x);
            }
        }
    }
}

/// Student-t with 3 degrees of freedom as `Z / sqrt(chi2_3 / 3)`.
fn student_t3<T: Real>(rng: &mut dyn RngCore) -> T {
    let z = T::standard_normal(rng);
    let chi2 = (0..3).map(|_| T::standard_normal(rng).powi(2)).sum::<T>();
    z / (chi2 / T::lit(3.0)).sqrt()
}

/// Draws `n` observations from the design.
pub fn dgp_sample<T: Real, R: Rng + ?Sized>(spec: &DgpSpec<T>, n: usize, rng: &mut R) -> Dataset<T> {
    let d = spec.dim();
    let mut rng: &mut R = rng;
    let rng: &mut dyn RngCore = &mut rng;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        spec.draw_covariates(rng, &mut x);
        let row = &x[i * d..(i + 1) * d];
        let index = spec.beta0.dot(row);
        let scale = T::one() + dot(row, row);
        let outcome = match &spec.kind {
            DgpKind::HeteroNormal => index + T::standard_normal(rng) / scale >= T::zero(),
            DgpKind::HeteroStudentT3 => index + student_t3::<T>(rng) / scale >= T::zero(),
            DgpKind::CustomKappa { kappa, .. } => {
                let p = clamp_prob(kappa(row));
                T::unit_uniform(rng) < p
            }
        };
        y.push(u8::from(outcome));
    }
    Dataset { x, y, d }
}

#[inline]
pub(crate) fn clamp_prob<T: Real>(p: T) -> T {
    p.max(T::zero()).min(T::one())
}

/// Index `beta0'x (1 + |x|^2)` whose noise CDF gives the propensity of the
/// heteroscedastic designs.
fn hetero_index<T: Real>(beta0: &SphereVector<T>, x: &[T]) -> T {
    beta0.dot(x) * (T::one() + dot(x, x))
}

/// `P(Y = 1 | X = x)` under the design.
pub fn kappa_true<T: Real>(spec: &DgpSpec<T>, x: &[T]) -> T {
    match &spec.kind {
        DgpKind::HeteroNormal => T::lit(special::normal_cdf(hetero_index(&spec.beta0, x).as_f64())),
        DgpKind::HeteroStudentT3 => {
            T::lit(special::student_t3_cdf(hetero_index(&spec.beta0, x).as_f64()))
        }
        DgpKind::CustomKappa { kappa, .. } => clamp_prob(kappa(x)),
    }
}

/// Gradient of the propensity for the two heteroscedastic designs; `None`
/// for custom propensities.
pub fn kappa_gradient<T: Real>(spec: &DgpSpec<T>, x: &[T]) -> Option<Vec<T>> {
    let z = hetero_index(&spec.beta0, x).as_f64();
    let g = match spec.kind {
        DgpKind::HeteroNormal => special::normal_pdf(z),
        DgpKind::HeteroStudentT3 => special::student_t3_pdf(z),
        DgpKind::CustomKappa { .. } => return None,
    };
    let g = T::lit(g);
    let index = spec.beta0.dot(x);
    let scale = T::one() + dot(x, x);
    Some(
        spec.beta0
            .components()
            .iter()
            .zip(x)
            .map(|(&b, &xi)| g * (b * scale + T::lit(2.0) * index * xi))
            .collect(),
    )
}

impl<T: Real> Propensity<T> for DgpSpec<T> {
    fn prob(&self, x: &[T]) -> T {
        kappa_true(self, x)
    }
}

impl<T: Real> CovariateSampler<T> for DgpSpec<T> {
    fn dim(&self) -> usize {
        DgpSpec::dim(self)
    }

    fn sample(&self, m: usize, rng: &mut dyn RngCore) -> Vec<T> {
        let mut out = Vec::with_capacity(m * self.dim());
        for _ in 0..m {
            self.draw_covariates(rng, &mut out);
        }
        out
    }
}

/// One draw `(V, U, W)` of the latent-variable representation.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDraw<T> {
    pub v: Vec<T>,
    pub u: T,
    pub w: bool,
}

/// Builds a latent error `U` with `med(U | V) = 0` such that
/// `W = 1{U + beta0'V >= 0}` has `P(W = 1 | V = v) = kappa(v)`.
///
/// `U = beta0'v / Psi^{-1}(kappa(v)) * Z` with `Z, Psi` standard normal,
/// and `U = 0` when `kappa(v)` is 0, 1/2 or 1. A fresh `Z` is always drawn.
pub fn reconstruct_latent<T, K, R>(
    kappa: &K,
    beta0: &SphereVector<T>,
    v: &[T],
    rng: &mut R,
) -> Result<LatentDraw<T>>
where
    T: Real,
    K: Propensity<T> + ?Sized,
    R: Rng + ?Sized,
{
    if v.len() != beta0.dim() {
        return Err(Error::DimensionMismatch {
            expected: beta0.dim(),
            got: v.len(),
        });
    }
    let k = kappa.prob(v);
    let index = beta0.dot(v);
    let excess = k - T::lit(0.5);
    if index * excess < T::zero() {
        return Err(Error::SignConditionViolated {
            index: index.as_f64(),
            excess: excess.as_f64(),
        });
    }
    let z = T::standard_normal(rng);
    let degenerate = k == T::zero() || k == T::one() || excess == T::zero();
    let u = if degenerate {
        T::zero()
    } else {
        index / T::lit(special::normal_quantile(k.as_f64())) * z
    };
    Ok(LatentDraw {
        v: v.to_vec(),
        w: u + index >= T::zero(),
        u,
    })
}

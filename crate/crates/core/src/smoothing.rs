//! Gaussian product-kernel density and regression estimates.
//!
//! Training rows are stored in lexicographic order, so every evaluation sums
//! its terms in an order that does not depend on how the input rows were
//! arranged.

use std::cmp::Ordering;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::model::{CovariateSampler, Dataset, Propensity};
use crate::scalar::Real;

/// Per-coordinate kernel bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthVector<T>(Vec<T>);

impl<T: Real> BandwidthVector<T> {
    pub fn new(h: Vec<T>) -> Result<Self> {
        if h.is_empty() || h.iter().any(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(Error::InvalidConfig(
                "bandwidths must be positive and finite".into(),
            ));
        }
        Ok(Self(h))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.0.iter().map(|&h| h * c).collect())
    }
}

/// Scott's normal reference rule `h_j = sd_j * n^{-1/(d+4)}`, with the
/// sample standard deviation taken over `n - 1`.
pub fn scott_bandwidths<T: Real>(data: &Dataset<T>) -> Result<BandwidthVector<T>> {
    let n = data.len();
    let d = data.dim();
    if n < 2 {
        return Err(Error::InvalidDataset(
            "bandwidth selection needs at least two rows".into(),
        ));
    }
    let nf = T::from_count(n);
    let factor = nf.powf(-T::one() / T::from_count(d + 4));
    let mut h = Vec::with_capacity(d);
    for j in 0..d {
        let mean = data.rows().map(|r| r[j]).sum::<T>() / nf;
        let ss = data.rows().map(|r| (r[j] - mean).powi(2)).sum::<T>();
        let sd = (ss / T::from_count(n - 1)).sqrt();
        if sd <= T::zero() || !sd.is_finite() {
            return Err(Error::DegenerateColumn { column: j });
        }
        h.push(sd * factor);
    }
    BandwidthVector::new(h)
}

fn lex_cmp<T: Real>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Row indices of a row-major matrix in lexicographic order.
fn sorted_order<T: Real>(points: &[T], d: usize, tie: impl Fn(usize) -> u8) -> Vec<usize> {
    let n = points.len() / d;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        lex_cmp(&points[a * d..(a + 1) * d], &points[b * d..(b + 1) * d])
            .then_with(|| tie(a).cmp(&tie(b)))
    });
    idx
}

/// Unnormalized product kernel `exp(-|(x - p) / h|^2 / 2)`.
#[inline]
fn kernel<T: Real>(x: &[T], p: &[T], inv_h: &[T]) -> T {
    let mut q = T::zero();
    for ((&a, &b), &s) in x.iter().zip(p).zip(inv_h) {
        let z = (a - b) * s;
        q = q + z * z;
    }
    (-T::lit(0.5) * q).exp()
}

/// Kernel density estimate with a Gaussian product kernel.
#[derive(Debug, Clone)]
pub struct DensityModel<T> {
    points: Vec<T>,
    d: usize,
    h: BandwidthVector<T>,
    inv_h: Vec<T>,
    norm: T,
}

impl<T: Real> DensityModel<T> {
    /// `points` is row-major with `h.dim()` columns.
    pub fn new(points: &[T], h: BandwidthVector<T>) -> Result<Self> {
        let d = h.dim();
        if points.is_empty() || !points.len().is_multiple_of(d) {
            return Err(Error::InvalidDataset(
                "density model needs at least one point of matching dimension".into(),
            ));
        }
        let order = sorted_order(points, d, |_| 0);
        let sorted = order
            .iter()
            .flat_map(|&i| points[i * d..(i + 1) * d].iter().copied())
            .collect::<Vec<_>>();
        let n = order.len();
        let two_pi = T::lit(2.0) * T::PI();
        let prod_h = h.as_slice().iter().fold(T::one(), |acc, &v| acc * v);
        let norm = T::one() / (T::from_count(n) * prod_h * two_pi.powf(T::from_count(d) / T::lit(2.0)));
        Ok(Self {
            points: sorted,
            d,
            inv_h: h.as_slice().iter().map(|&v| T::one() / v).collect(),
            h,
            norm,
        })
    }

    pub fn from_dataset(data: &Dataset<T>, h: BandwidthVector<T>) -> Result<Self> {
        data.check_dim(h.dim())?;
        Self::new(data.covariates(), h)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn bandwidths(&self) -> &BandwidthVector<T> {
        &self.h
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.points.chunks_exact(self.d)
    }

    /// Density at `x`.
    pub fn eval(&self, x: &[T]) -> T {
        let s = self
            .points
            .chunks_exact(self.d)
            .fold(T::zero(), |acc, p| acc + kernel(x, p, &self.inv_h));
        s * self.norm
    }

    /// `m` draws from the estimate: a uniformly resampled training point plus
    /// independent `N(0, h_j^2)` jitter in every coordinate.
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<T> {
        let n = self.len();
        let mut out = Vec::with_capacity(m * self.d);
        for _ in 0..m {
            let i = rng.random_range(0..n);
            let p = &self.points[i * self.d..(i + 1) * self.d];
            for (&c, &h) in p.iter().zip(self.h.as_slice()) {
                out.push(c + h * T::standard_normal(rng));
            }
        }
        out
    }
}

pub fn kde_eval<T: Real>(model: &DensityModel<T>, x: &[T]) -> T {
    model.eval(x)
}

pub fn kde_sample<T: Real, R: Rng + ?Sized>(model: &DensityModel<T>, m: usize, rng: &mut R) -> Vec<T> {
    model.sample(m, rng)
}

impl<T: Real> CovariateSampler<T> for DensityModel<T> {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample(&self, m: usize, rng: &mut dyn RngCore) -> Vec<T> {
        DensityModel::sample(self, m, rng)
    }
}

/// Nadaraya-Watson estimate of `P(Y = 1 | X = x)`.
#[derive(Debug, Clone)]
pub struct RegressionModel<T> {
    points: Vec<T>,
    responses: Vec<bool>,
    d: usize,
    h: BandwidthVector<T>,
    inv_h: Vec<T>,
    fallback: T,
}

/// Kernel sums below this are treated as underflow.
const UNDERFLOW: f64 = 1e-300;

impl<T: Real> RegressionModel<T> {
    pub fn new(data: &Dataset<T>, h: BandwidthVector<T>) -> Result<Self> {
        data.check_dim(h.dim())?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = data.dim();
        let order = sorted_order(data.covariates(), d, |i| data.y(i));
        let points = order
            .iter()
            .flat_map(|&i| data.row(i).iter().copied())
            .collect();
        let responses = order.iter().map(|&i| data.y(i) == 1).collect();
        Ok(Self {
            points,
            responses,
            d,
            inv_h: h.as_slice().iter().map(|&v| T::one() / v).collect(),
            h,
            fallback: data.response_mean(),
        })
    }

    pub fn bandwidths(&self) -> &BandwidthVector<T> {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Kernel-weighted response mean at `x`; the global response mean when
    /// the kernel weights underflow.
    pub fn eval(&self, x: &[T]) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for (p, &y) in self.points.chunks_exact(self.d).zip(&self.responses) {
            let k = kernel(x, p, &self.inv_h);
            den = den + k;
            if y {
                num = num + k;
            }
        }
        let floor = T::lit(UNDERFLOW).max(T::min_positive_value());
        if !(den >= floor) {
            return self.fallback;
        }
        (num / den).min(T::one())
    }
}

pub fn nw_eval<T: Real>(model: &RegressionModel<T>, x: &[T]) -> T {
    model.eval(x)
}

impl<T: Real> Propensity<T> for RegressionModel<T> {
    fn prob(&self, x: &[T]) -> T {
        self.eval(x)
    }
}

/// Kernel density estimate and Nadaraya-Watson regression sharing one
/// bandwidth vector (Scott's rule on the covariates).
pub fn fit_smoothers<T: Real>(data: &Dataset<T>) -> Result<(DensityModel<T>, RegressionModel<T>)> {
    data.ensure_valid()?;
    let h = scott_bandwidths(data)?;
    Ok((DensityModel::from_dataset(data, h.clone())?, RegressionModel::new(data, h)?))
}

/// Propensity obtained from class-conditional densities,
/// `pi f1(x) / ((1 - pi) f0(x) + pi f1(x))`.
#[derive(Debug, Clone)]
pub struct ClassDensityKappa<T> {
    f0: Option<DensityModel<T>>,
    f1: Option<DensityModel<T>>,
    pi: T,
}

impl<T: Real> ClassDensityKappa<T> {
    pub fn new(f0: Option<DensityModel<T>>, f1: Option<DensityModel<T>>, pi: T) -> Result<Self> {
        if !(pi >= T::zero() && pi <= T::one()) {
            return Err(Error::InvalidConfig(format!("class probability {pi} outside [0, 1]")));
        }
        if (pi < T::one() && f0.is_none()) || (pi > T::zero() && f1.is_none()) {
            return Err(Error::InvalidConfig(
                "a class with positive probability needs a density".into(),
            ));
        }
        Ok(Self { f0, f1, pi })
    }

    /// Class frequencies and per-class Scott bandwidths from the data.
    pub fn from_dataset(data: &Dataset<T>) -> Result<Self> {
        data.ensure_valid()?;
        let d = data.dim();
        let fit = |label: u8| -> Result<Option<DensityModel<T>>> {
            let pts = data.class(label);
            if pts.is_empty() {
                return Ok(None);
            }
            let class = Dataset::from_parts(d, pts.clone(), vec![label; pts.len() / d])?;
            let h = scott_bandwidths(&class)?;
            DensityModel::new(&pts, h).map(Some)
        };
        Self::new(fit(0)?, fit(1)?, data.response_mean())
    }

    pub fn pi(&self) -> T {
        self.pi
    }

    pub fn eval(&self, x: &[T]) -> T {
        let f0 = self.f0.as_ref().map_or(T::zero(), |m| m.eval(x));
        let f1 = self.f1.as_ref().map_or(T::zero(), |m| m.eval(x));
        let a = self.pi * f1;
        let den = (T::one() - self.pi) * f0 + a;
        let floor = T::lit(UNDERFLOW).max(T::min_positive_value());
        if !(den >= floor) {
            return T::lit(0.5);
        }
        (a / den).max(T::zero()).min(T::one())
    }
}

pub fn class_kappa_eval<T: Real>(model: &ClassDensityKappa<T>, x: &[T]) -> T {
    model.eval(x)
}

impl<T: Real> Propensity<T> for ClassDensityKappa<T> {
    fn prob(&self, x: &[T]) -> T {
        self.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::special::normal_pdf;
    use approx::assert_relative_eq;

    fn bw(h: &[f64]) -> BandwidthVector<f64> {
        BandwidthVector::new(h.to_vec()).unwrap()
    }

    #[test]
    fn scott_rule_unit_spread() {
        // two columns with sample sd exactly 1: values +-c with c^2 = (n-1)/n
        let n = 100;
        let c = ((n as f64 - 1.0) / n as f64).sqrt();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| if i % 2 == 0 { vec![c, -c] } else { vec![-c, c] })
            .collect();
        let data = Dataset::from_rows(&rows, vec![0; n]).unwrap();
        let h = scott_bandwidths(&data).unwrap();
        let expected = 100f64.powf(-1.0 / 6.0);
        assert!((expected - 0.464_158_883_361_277_9).abs() < 1e-12);
        for &v in h.as_slice() {
            assert_relative_eq!(v, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn scott_rule_rejects_constant_column() {
        let data = Dataset::from_rows(&[vec![1.0, 0.0], vec![1.0, 2.0], vec![1.0, 5.0]], vec![0, 1, 0]).unwrap();
        assert_eq!(scott_bandwidths(&data), Err(Error::DegenerateColumn { column: 0 }));
    }

    #[test]
    fn scott_rule_is_scale_homogeneous() {
        let spec = crate::model::DgpSpec::<f64>::hetero_normal(3);
        let data = crate::model::dgp_sample(&spec, 50, &mut Stream::new(4).rng());
        let scaled = Dataset::from_parts(
            3,
            data.covariates().iter().map(|v| 2.5 * v).collect(),
            data.responses().to_vec(),
        )
        .unwrap();
        let h = scott_bandwidths(&data).unwrap();
        let hs = scott_bandwidths(&scaled).unwrap();
        for (a, b) in h.as_slice().iter().zip(hs.as_slice()) {
            assert_relative_eq!(2.5 * a, *b, max_relative = 1e-13);
        }
    }

    #[test]
    fn kde_single_point_peak() {
        let m = DensityModel::new(&[0.7], bw(&[1.0])).unwrap();
        assert_relative_eq!(m.eval(&[0.7]), 0.398_942_280_401_432_7, max_relative = 1e-15);
    }

    #[test]
    fn kde_two_point_mixture() {
        let m = DensityModel::new(&[0.0, 2.0], bw(&[1.0])).unwrap();
        assert_relative_eq!(m.eval(&[1.0]), normal_pdf(1.0), max_relative = 1e-14);
        assert!((normal_pdf(1.0) - 0.241_970_724_519_143_37).abs() < 1e-15);
    }

    #[test]
    fn kde_integrates_to_one() {
        let pts = [0.1, 0.3, -0.5, 0.8, 0.9, -0.2];
        let h = [0.3, 0.2];
        let m = DensityModel::new(&pts, bw(&h)).unwrap();
        // box extends 6h beyond the data range
        let (lo, hi) = ([-0.5 - 1.8, -0.2 - 1.2], [0.9 + 1.8, 0.8 + 1.2]);
        let mut rng = Stream::new(11).rng();
        let draws = 200_000;
        let vol = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        let mut acc = 0.0;
        for _ in 0..draws {
            let x = [
                lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
                lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
            ];
            acc += m.eval(&x);
        }
        let integral = vol * acc / draws as f64;
        assert!((integral - 1.0).abs() < 0.01, "integral {integral}");
    }

    #[test]
    fn kde_sample_degenerate_jitter() {
        let pts = [0.25, -1.5, 3.0, 0.5];
        let m = DensityModel::new(&pts, bw(&[1e-300, 1e-300])).unwrap();
        let s = m.sample(50, &mut Stream::new(2).rng());
        for row in s.chunks_exact(2) {
            assert!(m.points().any(|p| p == row), "{row:?} not a training point");
        }
    }

    #[test]
    fn kde_sample_moments() {
        let spec = crate::model::DgpSpec::<f64>::hetero_normal(2);
        let data = crate::model::dgp_sample(&spec, 40, &mut Stream::new(5).rng());
        let h = scott_bandwidths(&data).unwrap();
        let m = DensityModel::from_dataset(&data, h.clone()).unwrap();
        let draws = 100_000;
        let s = m.sample(draws, &mut Stream::new(6).rng());
        let n = data.len() as f64;
        for j in 0..2 {
            let col: Vec<f64> = data.rows().map(|r| r[j]).collect();
            let tm = col.iter().sum::<f64>() / n;
            let tv = col.iter().map(|v| (v - tm).powi(2)).sum::<f64>() / (n - 1.0);
            let target_var = tv * (n - 1.0) / n + h.as_slice()[j].powi(2);
            let xs: Vec<f64> = s.chunks_exact(2).map(|r| r[j]).collect();
            let sm = xs.iter().sum::<f64>() / draws as f64;
            let sv = xs.iter().map(|v| (v - sm).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
            assert!((sm - tm).abs() < 4.0 * (target_var / draws as f64).sqrt());
            assert!((sv / target_var - 1.0).abs() < 0.02, "variance {sv} vs {target_var}");
        }
    }

    #[test]
    fn kde_sample_matches_kde_cdf() {
        // d = 1: sup distance between the empirical CDF of draws and the
        // kernel estimate's CDF, integrated numerically from kde_eval
        let pts = [-1.2, -0.3, 0.0, 0.4, 1.9, 2.2];
        let m = DensityModel::new(&pts, bw(&[0.35])).unwrap();
        let draws = 100_000;
        let mut s = m.sample(draws, &mut Stream::new(8).rng());
        s.sort_by(f64::total_cmp);
        let (lo, hi, steps) = (-4.0, 5.5, 19_000);
        let dx = (hi - lo) / steps as f64;
        let mut cdf = 0.0;
        let mut prev = m.eval(&[lo]);
        let mut k = 0;
        let mut sup: f64 = 0.0;
        for i in 1..=steps {
            let x = lo + i as f64 * dx;
            let cur = m.eval(&[x]);
            cdf += 0.5 * (prev + cur) * dx;
            prev = cur;
            while k < draws && s[k] <= x {
                k += 1;
            }
            sup = sup.max((k as f64 / draws as f64 - cdf).abs());
        }
        assert!(sup < 0.01, "sup distance {sup}");
        // KS at level 1e-3: critical value 1.95 / sqrt(n)
        assert!(sup < 1.95 / (draws as f64).sqrt(), "KS statistic {sup}");
    }

    #[test]
    fn nw_constant_response() {
        let rows = vec![vec![0.0, 1.0], vec![0.3, -0.2], vec![-1.0, 0.5]];
        let data = Dataset::from_rows(&rows, vec![1, 1, 1]).unwrap();
        let m = RegressionModel::new(&data, bw(&[0.5, 0.5])).unwrap();
        for x in [[0.0, 0.0], [3.0, -2.0], [0.3, -0.2]] {
            assert_eq!(m.eval(&x), 1.0);
        }
    }

    #[test]
    fn nw_single_point() {
        let data = Dataset::from_rows(&[vec![0.2, 0.2]], vec![0]).unwrap();
        let m = RegressionModel::new(&data, bw(&[1.0, 1.0])).unwrap();
        assert_eq!(m.eval(&[1.5, -0.5]), 0.0);
    }

    #[test]
    fn nw_three_point_ratio() {
        let data = Dataset::from_parts(1, vec![0.0, 1.0, 2.0], vec![0, 1, 1]).unwrap();
        let m = RegressionModel::new(&data, bw(&[1.0])).unwrap();
        let (p0, p1) = (normal_pdf(0.0), normal_pdf(1.0));
        let expected = (p0 + p1) / (p0 + 2.0 * p1);
        assert_relative_eq!(m.eval(&[1.0]), expected, max_relative = 1e-14);
        assert!((expected - 0.725_931_380_938_803).abs() < 1e-12);
    }

    #[test]
    fn nw_underflow_falls_back_to_mean() {
        let data = Dataset::from_parts(1, vec![0.0, 1.0, 2.0], vec![0, 1, 1]).unwrap();
        let m = RegressionModel::new(&data, bw(&[0.01])).unwrap();
        assert_relative_eq!(m.eval(&[1e3]), 2.0 / 3.0);
    }

    #[test]
    fn class_kappa_cases() {
        let f = DensityModel::new(&[0.0, 0.5, 1.0], bw(&[0.4])).unwrap();
        let same = ClassDensityKappa::new(Some(f.clone()), Some(f.clone()), 0.3).unwrap();
        assert_relative_eq!(same.eval(&[0.2]), 0.3, max_relative = 1e-14);
        let single = ClassDensityKappa::new(None, Some(f.clone()), 1.0).unwrap();
        assert_eq!(single.eval(&[0.7]), 1.0);
        assert!(ClassDensityKappa::new(None, Some(f), 0.5).is_err());
    }

    #[test]
    fn class_kappa_direct_substitution() {
        // f0(x) = 0.2, f1(x) = 0.4 at x = c for single-point models with
        // bandwidths solving phi(0) / h = value
        let h0 = normal_pdf(0.0) / 0.2;
        let h1 = normal_pdf(0.0) / 0.4;
        let f0 = DensityModel::new(&[0.0], bw(&[h0])).unwrap();
        let f1 = DensityModel::new(&[0.0], bw(&[h1])).unwrap();
        assert_relative_eq!(f0.eval(&[0.0]), 0.2, max_relative = 1e-14);
        let k = ClassDensityKappa::new(Some(f0), Some(f1), 0.5).unwrap();
        assert_relative_eq!(k.eval(&[0.0]), 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn class_kappa_from_data_in_unit_interval() {
        let spec = crate::model::DgpSpec::<f64>::hetero_normal(2);
        let data = crate::model::dgp_sample(&spec, 300, &mut Stream::new(3).rng());
        let k = ClassDensityKappa::from_dataset(&data).unwrap();
        assert_eq!(k.pi(), data.response_mean());
        let b = spec.beta0.components();
        assert!(k.eval(&[b[0] * 0.8, b[1] * 0.8]) > 0.5);
        assert!(k.eval(&[-b[0] * 0.8, -b[1] * 0.8]) < 0.5);
    }
}

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use maxscore::limit::*;
use maxscore::model::{DgpSpec, SphereVector};
use maxscore::rng::Stream;
use maxscore::Error;
use nalgebra::DMatrix;
use rand::Rng;

fn plane() -> (DgpSpec<f64>, HyperplaneBasis) {
    let spec = DgpSpec::hetero_normal(2);
    let basis = hyperplane_basis(&spec.beta0);
    (spec, basis)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Type-7 quantile with a distribution-free standard error from the
/// binomial order-statistic interval.
fn quantile_with_se(sorted: &[f64], p: f64) -> (f64, f64) {
    let b = sorted.len() as f64;
    let h = (b - 1.0) * p;
    let lo = h.floor() as usize;
    let q = sorted[lo] + (h - lo as f64) * (sorted[(lo + 1).min(sorted.len() - 1)] - sorted[lo]);
    let half = 1.96 * (b * p * (1.0 - p)).sqrt();
    let i = ((b * p - half).floor().max(0.0)) as usize;
    let j = ((b * p + half).ceil() as usize).min(sorted.len() - 1);
    (q, (sorted[j] - sorted[i]) / (2.0 * 1.96))
}

#[test]
fn basis_is_orthonormal_and_orthogonal() {
    let mut rng = Stream::new(1).rng();
    for d in [2usize, 3, 4] {
        for _ in 0..100 {
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let beta = SphereVector::new(v).unwrap();
            let h = hyperplane_basis(&beta);
            let hm = h.matrix();
            let gram = hm.transpose() * hm;
            assert!((gram - DMatrix::<f64>::identity(d - 1, d - 1)).abs().max() < 1e-12);
            assert!(h.project(beta.components()).iter().all(|v| v.abs() < 1e-12));
        }
    }
}

#[test]
fn covariance_matches_closed_form() {
    let (spec, basis) = plane();
    let q = QuadConfig::default();
    assert!((sigma_cov(&[1.0], &[1.0], &spec, &basis, &q).unwrap() - 0.125).abs() < 1e-6);
    // (1/4) int |s xi| p(H xi) dxi with p = 1/4 on |xi| <= sqrt 2
    for s in [0.3f64, 1.7, -2.5] {
        let v = sigma_cov(&[s], &[s], &spec, &basis, &q).unwrap();
        assert!((v - s.abs() / 8.0).abs() < 1e-9);
        assert!(sigma_cov(&[s], &[-s], &spec, &basis, &q).unwrap().abs() < 1e-12);
    }
    // one-sided Brownian covariance min(s, t) / 8
    let v = sigma_cov(&[0.4], &[1.3], &spec, &basis, &q).unwrap();
    assert!((v - 0.05).abs() < 1e-9);
}

#[test]
fn covariance_properties_in_three_dimensions() {
    let spec = DgpSpec::<f64>::hetero_normal(3);
    let basis = hyperplane_basis(&spec.beta0);
    let q = QuadConfig { qmc_points: 1 << 16, ..Default::default() };
    let s = [0.7, -0.2];
    let t = [-0.1, 0.9];
    let st = sigma_cov(&s, &t, &spec, &basis, &q).unwrap();
    let ts = sigma_cov(&t, &s, &spec, &basis, &q).unwrap();
    assert!((st - ts).abs() < 1e-12);
    assert!(sigma_cov(&s, &[-0.7, 0.2], &spec, &basis, &q).unwrap().abs() < 1e-12);
    assert!(sigma_cov(&s, &s, &spec, &basis, &q).unwrap() > 0.0);
    let scaled = sigma_cov(&[2.1, -0.6], &[-0.3, 2.7], &spec, &basis, &q).unwrap();
    assert!((scaled - 3.0 * st).abs() < 1e-10 * scaled.abs().max(1.0));
}

#[test]
fn drift_matches_closed_form() {
    let (spec, basis) = plane();
    let v = design_drift(&spec, &basis, &QuadConfig::default()).unwrap();
    assert!((v[(0, 0)] - 11.0 / (15.0 * PI.sqrt())).abs() < 1e-6);
    let qmc = QuadConfig { method: QuadMethod::QuasiMonteCarlo, ..Default::default() };
    let w = design_drift(&spec, &basis, &qmc).unwrap();
    assert!(((w[(0, 0)] - v[(0, 0)]) / v[(0, 0)]).abs() < 1e-4);

    let zero = drift_matrix(&|_: &[f64]| 0.0, &spec, &basis, &QuadConfig::default()).unwrap();
    assert_eq!(zero, DMatrix::zeros(1, 1));
}

#[test]
fn drift_is_nonnegative_definite_for_built_in_designs() {
    let q = QuadConfig { qmc_points: 1 << 16, ..Default::default() };
    for spec in [
        DgpSpec::<f64>::hetero_normal(2),
        DgpSpec::hetero_student_t3(2),
        DgpSpec::hetero_normal(3),
        DgpSpec::hetero_student_t3(3),
        DgpSpec::hetero_normal(4),
    ] {
        let basis = hyperplane_basis(&spec.beta0);
        let v = design_drift(&spec, &basis, &q).unwrap();
        assert!((&v - v.transpose()).abs().max() < 1e-14);
        let min = v.symmetric_eigenvalues().min();
        assert!(min >= -1e-8, "{min}");
    }
}

#[test]
fn custom_design_has_no_quadrature() {
    let beta = SphereVector::new(vec![1.0, 0.0]).unwrap();
    let spec = DgpSpec::custom(
        beta.clone(),
        Arc::new(|_: &[f64]| 0.5),
        Arc::new(|_: &mut dyn rand::RngCore| vec![0.0, 0.0]),
    );
    let basis = hyperplane_basis(&beta);
    assert!(matches!(
        sigma_cov(&[1.0], &[1.0], &spec, &basis, &QuadConfig::default()),
        Err(Error::QuadratureFailure(_))
    ));
    assert!(matches!(
        design_drift(&spec, &basis, &QuadConfig::default()),
        Err(Error::QuadratureFailure(_))
    ));
}

#[test]
fn design_limit_recovers_kernel_constants() {
    let spec = LimitProcessSpec::from_design(&DgpSpec::hetero_normal(2), &QuadConfig::default()).unwrap();
    let Covariance::Brownian { scale } = spec.covariance else { panic!("expected Brownian") };
    assert!((scale - KERNEL_BROWNIAN_SCALE).abs() < 1e-6);
    assert!((spec.drift[(0, 0)] - 2.0 * PAPER_DRIFT_COEFFICIENT).abs() < 1e-6);
    assert!((spec.first_row[0] + FRAC_1_SQRT_2).abs() < 1e-15);
}

#[test]
fn argmax_is_symmetric_and_stays_inside() {
    let spec = LimitProcessSpec::published_reference();
    let b = 10_000;
    let s = simulate_limit_argmax(&spec, b, &Stream::new(2)).unwrap();
    let x = s.draws();
    assert!(x.iter().all(|v| v.abs() <= spec.half_width));
    let mean = x.iter().sum::<f64>() / b as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0)).sqrt();
    assert!(mean.abs() < 4.0 * sd / (b as f64).sqrt(), "mean {mean} sd {sd}");
    assert!(s.boundary_hits() as f64 <= 0.01 * b as f64);
    for (f, v) in s.first_coordinate().iter().zip(x) {
        assert_eq!(*f, FRAC_1_SQRT_2 * v);
    }
    assert_eq!(s, simulate_limit_argmax(&spec, b, &Stream::new(2)).unwrap());
}

#[test]
fn halving_the_step_keeps_the_tail_quantile() {
    let spec = LimitProcessSpec::published_reference();
    let (coarse, fine) = simulate_limit_refinement(&spec, 10_000, &Stream::new(3)).unwrap();
    let q = |s: &LimitSample| {
        let a: Vec<f64> = s.draws().iter().map(|v| v.abs()).collect();
        quantile_with_se(&sorted(&a), 0.95).0
    };
    let (qc, qf) = (q(&coarse), q(&fine));
    assert!(((qc - qf) / qf).abs() < 0.02, "coarse {qc} fine {qf}");
}

#[test]
fn brownian_scaling() {
    let (a, b, c) = (PAPER_BROWNIAN_SCALE, PAPER_DRIFT_COEFFICIENT, 2.0f64);
    let base = LimitProcessSpec::brownian(a, b).with_grid(6.0, 0.0025);
    let scaled = LimitProcessSpec::brownian(a * c.sqrt(), b * c * c).with_grid(6.0, 0.0025);
    let x = sorted(simulate_limit_argmax(&base, 10_000, &Stream::new(4)).unwrap().draws());
    let y = sorted(simulate_limit_argmax(&scaled, 10_000, &Stream::new(5)).unwrap().draws());
    for p in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let (qx, sx) = quantile_with_se(&x, p);
        let (qy, sy) = quantile_with_se(&y, p);
        let tol = 3.0 * ((sx / c).powi(2) + sy.powi(2)).sqrt();
        assert!((qy - qx / c).abs() <= tol, "p {p}: {qy} vs {}", qx / c);
    }
}

#[test]
fn published_and_kernel_constants_differ_by_the_scale_ratio() {
    // argmax of a Z(s) - b s^2 scales like (a / b)^{2/3}
    let published = sorted(
        &simulate_limit_argmax(&LimitProcessSpec::published_reference(), 10_000, &Stream::new(6))
            .unwrap()
            .first_coordinate()
            .iter()
            .map(|v| v.abs())
            .collect::<Vec<_>>(),
    );
    let kernel = sorted(
        &simulate_limit_argmax(&LimitProcessSpec::kernel_reference(), 10_000, &Stream::new(7))
            .unwrap()
            .first_coordinate()
            .iter()
            .map(|v| v.abs())
            .collect::<Vec<_>>(),
    );
    let ratio = (PAPER_BROWNIAN_SCALE / KERNEL_BROWNIAN_SCALE).powf(2.0 / 3.0);
    for p in [0.5, 0.9] {
        let (qp, sp) = quantile_with_se(&published, p);
        let (qk, sk) = quantile_with_se(&kernel, p);
        assert!((qp - ratio * qk).abs() <= 3.0 * (sp.powi(2) + (ratio * sk).powi(2)).sqrt(), "p {p}: {qp} vs {}", ratio * qk);
    }
}

#[test]
fn gridded_field_in_two_dimensions() {
    // Levy Brownian field: covariance (|s| + |t| - |s - t|) / 2
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cov: CovarianceFn = Arc::new(move |s: &[f64], t: &[f64]| {
        let d: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
        0.5 * (norm(s) + norm(t) - norm(&d))
    });
    let spec = LimitProcessSpec {
        drift: DMatrix::identity(2, 2) * 4.0,
        covariance: Covariance::Field(cov),
        half_width: 1.8,
        step: 0.1,
        first_row: vec![1.0, 0.0],
    };
    let b = 2000;
    let s = simulate_limit_argmax(&spec, b, &Stream::new(8)).unwrap();
    assert_eq!(s.dim(), 2);
    for j in 0..2 {
        let col: Vec<f64> = (0..b).map(|i| s.row(i)[j]).collect();
        let mean = col.iter().sum::<f64>() / b as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0)).sqrt();
        assert!(mean.abs() < 4.0 * sd / (b as f64).sqrt());
        assert!(col.iter().all(|v| v.abs() <= 1.8 + 1e-12));
    }
    let too_big = LimitProcessSpec { half_width: 6.0, step: 0.1, ..spec };
    assert!(simulate_limit_argmax(&too_big, 10, &Stream::new(9)).is_err());
}

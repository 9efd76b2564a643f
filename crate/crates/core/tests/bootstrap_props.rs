use std::sync::Arc;

use maxscore::bootstrap::*;
use maxscore::model::{dgp_sample, Dataset, DgpSpec, SphereVector};
use maxscore::optimizer::{maximize_score_2d, OptimizerOptions};
use maxscore::rng::Stream;
use maxscore::smoothing::{BandwidthVector, DensityModel};
use proptest::prelude::*;

fn sample(n: usize, seed: u64) -> Dataset<f64> {
    dgp_sample(&DgpSpec::hetero_normal(2), n, &mut Stream::new(seed).rng())
}

fn contains_row(data: &Dataset<f64>, row: &[f64], y: u8) -> bool {
    (0..data.len()).any(|i| data.row(i) == row && data.y(i) == y)
}

#[test]
fn resamples_draw_from_the_input() {
    let one = sample(1, 3);
    let r = classical_resample(&one, &mut Stream::new(1).rng()).unwrap();
    assert_eq!(r, one);

    let data = sample(100, 4);
    let r = classical_resample(&data, &mut Stream::new(5).rng()).unwrap();
    assert_eq!(r.len(), 100);
    assert!((0..r.len()).all(|i| contains_row(&data, r.row(i), r.y(i))));
    assert_eq!(r, classical_resample(&data, &mut Stream::new(5).rng()).unwrap());

    let m = moon_resample(&data, 0.5, &mut Stream::new(6).rng()).unwrap();
    assert_eq!(m.len(), 10);
    assert!((0..m.len()).all(|i| contains_row(&data, m.row(i), m.y(i))));
    assert_eq!(moon_resample(&sample(200, 7), 0.8, &mut Stream::new(6).rng()).unwrap().len(), 70);

    assert!(matches!(
        classical_resample(&Dataset::<f64>::empty(2), &mut Stream::new(1).rng()),
        Err(maxscore::Error::EmptyDataset)
    ));
}

#[test]
fn smoothed_resample_follows_kappa() {
    let data = sample(200, 8);
    let p = DensityModel::from_dataset(&data, BandwidthVector::new(vec![0.3, 0.3]).unwrap()).unwrap();
    let ones = smoothed_resample(&p, &|_: &[f64]| 1.0, 500, &mut Stream::new(1).rng()).unwrap();
    assert!(ones.responses().iter().all(|&y| y == 1));
    let zeros = smoothed_resample(&p, &|_: &[f64]| 0.0, 500, &mut Stream::new(1).rng()).unwrap();
    assert!(zeros.responses().iter().all(|&y| y == 0));
    // probabilities just outside [0, 1] are clamped
    let over = smoothed_resample(&p, &|_: &[f64]| 1.0 + 1e-12, 100, &mut Stream::new(1).rng()).unwrap();
    assert!(over.responses().iter().all(|&y| y == 1));
    let big = smoothed_resample(&p, &|_: &[f64]| 0.3, 100_000, &mut Stream::new(2).rng()).unwrap();
    assert!((big.response_mean() - 0.3).abs() < 0.006);
}

#[test]
fn single_replicate_is_the_hand_composition() {
    let data = sample(120, 9);
    let stream = Stream::new(10);
    let opts = OptimizerOptions::default();
    let (est, _) = maximize_score_2d(&data).unwrap();
    let dist = bootstrap_distribution_at(&data, &est, &BootstrapScheme::classical(1), None, &opts, &stream).unwrap();

    let mut rng = stream.child(0).rng();
    let resample = classical_resample(&data, &mut rng).unwrap();
    let (star, _) = maximize_score_2d(&resample).unwrap();
    let rate = 120f64.powf(1.0 / 3.0);
    let expected: Vec<f64> = star.components().iter().zip(est.components()).map(|(b, c)| rate * (b - c)).collect();
    assert_eq!(dist.row(0), expected.as_slice());
    assert_eq!(dist.rate(), rate);
    assert_eq!(dist.center(), &est);
}

#[test]
fn centers_and_rates_follow_the_scheme() {
    let data = sample(200, 11);
    let opts = OptimizerOptions::default();
    let stream = Stream::new(12);
    let (est, _) = maximize_score_2d(&data).unwrap();
    let fit = SmoothedFit::from_data(&data, &opts, &mut Stream::new(13).rng()).unwrap();

    let c = bootstrap_distribution(&data, &BootstrapScheme::classical(20), None, &opts, &stream).unwrap();
    assert_eq!((c.center(), c.rate()), (&est, 200f64.powf(1.0 / 3.0)));
    let m = bootstrap_distribution(&data, &BootstrapScheme::m_out_of_n(0.5, 20), None, &opts, &stream).unwrap();
    assert_eq!((m.center(), m.rate()), (&est, 15f64.powf(1.0 / 3.0)));
    let s = bootstrap_distribution(&data, &BootstrapScheme::smoothed(20), Some(&fit), &opts, &stream).unwrap();
    assert_eq!((s.center(), s.rate()), (&fit.center, 200f64.powf(1.0 / 3.0)));
    for dist in [&c, &m, &s] {
        assert_eq!(dist.replicates(), 20);
        assert!(dist.draws().iter().all(|v| v.is_finite()));
    }
    assert!(bootstrap_distribution(&data, &BootstrapScheme::smoothed(5), None, &opts, &stream).is_err());
}

#[test]
fn draws_do_not_depend_on_pool_size() {
    let data = dgp_sample(&DgpSpec::<f64>::hetero_normal(3), 150, &mut Stream::new(14).rng());
    let opts = OptimizerOptions { restarts: 4, grid_size: 128, ..Default::default() };
    let fit = SmoothedFit::from_data(&data, &opts, &mut Stream::new(15).rng()).unwrap();
    let run = |threads: usize, scheme: BootstrapScheme| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_distribution(&data, &scheme, Some(&fit), &opts, &Stream::new(16)).unwrap())
    };
    for scheme in [BootstrapScheme::classical(16), BootstrapScheme::m_out_of_n(0.7, 16), BootstrapScheme::smoothed(16)] {
        let one = run(1, scheme);
        assert_eq!(one, run(2, scheme));
        assert_eq!(one, run(8, scheme));
    }
}

#[test]
fn true_law_smoothed_bootstrap_has_nominal_coverage() {
    // resampling from the true law around the true center makes the draws an
    // exact copy of the sampling distribution, so coverage is nominal
    let spec = Arc::new(DgpSpec::<f64>::hetero_normal(2));
    let fit = SmoothedFit::new(spec.clone(), spec.clone(), spec.beta0.clone());
    let scheme = BootstrapScheme::smoothed(200);
    let opts = OptimizerOptions::default();
    let (n, reps) = (500, 300u64);
    let covered = (0..reps)
        .filter(|&r| {
            let s = Stream::new(17).child(r);
            let data = dgp_sample(spec.as_ref(), n, &mut s.child(0).rng());
            let (est, _) = maximize_score_2d(&data).unwrap();
            let dist = bootstrap_distribution_at(&data, &est, &scheme, Some(&fit), &opts, &s.child(1)).unwrap();
            percentile_ci(&dist, &est, n, 0.95, 0).unwrap().contains(spec.beta0.components()[0])
        })
        .count();
    let coverage = covered as f64 / reps as f64;
    assert!((coverage - 0.95).abs() <= 0.06, "coverage {coverage}");
}

proptest! {
    #[test]
    fn intervals_nest_with_level(
        col in proptest::collection::vec(-5.0f64..5.0, 2..60),
        a in 0.01f64..0.98,
        b in 0.01f64..0.98,
        n in 1usize..5000,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let draws = col.iter().flat_map(|&v| [v, -v]).collect();
        let est = SphereVector::new(vec![0.3, -0.7]).unwrap();
        let dist = BootstrapDistribution::from_parts(draws, est.clone(), 2.0, BootstrapScheme::classical(col.len())).unwrap();
        for method in [IntervalMethod::RootInversion, IntervalMethod::Percentile] {
            let narrow = interval(&dist, &est, n, lo, 0, method).unwrap();
            let wide = interval(&dist, &est, n, hi, 0, method).unwrap();
            prop_assert!(narrow.lower <= narrow.upper);
            prop_assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
        }
    }
}

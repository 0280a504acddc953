mod support;

use ndarray::Array2;
use rand::seq::SliceRandom;

use riswie::matching::{Scaled, SoftParams};
use riswie::rng::stream_rng;
use riswie::{
    gaussian_closed_form, riswie_distance, sriswie_distance, DiffusionParams, EmbeddingConfig, GaussianSpec,
    PointCloud, RiswieError,
};

use support::*;

fn shuffled(x: &PointCloud, seed: u64) -> PointCloud {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let pts = Array2::from_shape_fn((x.len(), x.dim()), |(i, j)| x.points()[[order[i], j]]);
    PointCloud::new(pts).unwrap()
}

fn sampled(seed: u64, n: usize, spectrum: &[f64]) -> PointCloud {
    let stds: Vec<f64> = spectrum.iter().map(|l| l.sqrt()).collect();
    gaussian_cloud(&mut stream_rng(seed, 0), n, &stds)
}

fn sharp() -> SoftParams {
    SoftParams {
        beta: Scaled::Relative(1e6),
        eps: Scaled::Relative(1e-4),
        ..SoftParams::default()
    }
}

#[test]
fn shuffled_copy_is_at_zero() {
    let mut rng = stream_rng(1, 0);
    for d in 1..5 {
        let x = gaussian_cloud(&mut rng, 80, &distinct_stds(&mut stream_rng(2, d as u64), d));
        let y = shuffled(&x, d as u64);
        for config in [EmbeddingConfig::pca(None), EmbeddingConfig::coordinate(None)] {
            let r = riswie_distance(&x, &y, &config).unwrap();
            assert!(r.distance <= 1e-10, "d={d}: {}", r.distance);
        }
    }
}

#[test]
fn result_fields_are_consistent() {
    let x = sampled(3, 60, &[4.0, 2.0, 1.0]);
    let y = sampled(4, 90, &[9.0, 1.0, 0.25]);
    let r = riswie_distance(&x, &y, &EmbeddingConfig::pca(None)).unwrap();
    assert_eq!(r.k, 3);
    assert!((r.squared - r.matching.total / 3.0).abs() <= 1e-12);
    assert_eq!(r.distance, r.squared.sqrt());
    let sum: f64 = r.matching.pair_costs.iter().sum();
    assert!((sum - r.matching.total).abs() <= 1e-12);
}

#[test]
fn large_samples_approach_gaussian_closed_form() {
    let truth = gaussian_closed_form(
        &GaussianSpec::new(vec![4.0, 1.0]).unwrap(),
        &GaussianSpec::new(vec![9.0, 1.0]).unwrap(),
    )
    .unwrap();
    assert!((truth - 0.5f64.sqrt()).abs() < 1e-15);
    let mut mean = 0.0;
    for t in 0..5 {
        let x = sampled(100 + t, 20_000, &[4.0, 1.0]);
        let y = sampled(200 + t, 20_000, &[9.0, 1.0]);
        mean += riswie_distance(&x, &y, &EmbeddingConfig::pca(None)).unwrap().distance / 5.0;
    }
    assert!((mean - truth).abs() < 0.01, "mean {mean} vs {truth}");
}

#[test]
fn sorted_spectra_match_by_identity() {
    let mut identity = 0;
    for t in 0..100 {
        let x = sampled(300 + t, 2000, &[9.0, 4.0, 1.0]);
        let y = sampled(500 + t, 2000, &[16.0, 2.0, 0.5]);
        let r = riswie_distance(&x, &y, &EmbeddingConfig::pca(None)).unwrap();
        if r.matching.permutation == vec![0, 1, 2] {
            identity += 1;
        }
    }
    assert!(identity >= 95, "identity in {identity}/100 trials");
}

#[test]
fn independent_samples_are_strictly_apart() {
    for t in 0..50 {
        let x = sampled(700 + t, 100, &[4.0, 1.0]);
        let y = sampled(800 + t, 100, &[4.0, 1.0]);
        let d = riswie_distance(&x, &y, &EmbeddingConfig::pca(None)).unwrap().distance;
        assert!(d > 0.0, "trial {t}");
    }
}

#[test]
fn different_ambient_dimensions() {
    let x = sampled(10, 50, &[4.0, 2.0, 1.0]);
    let y = sampled(11, 50, &[3.0, 1.0]);
    let r = riswie_distance(&x, &y, &EmbeddingConfig::pca(None)).unwrap();
    assert_eq!(r.k, 2);
    assert!(matches!(
        riswie_distance(&x, &y, &EmbeddingConfig::pca(Some(3))),
        Err(RiswieError::BadK { .. })
    ));
}

#[test]
fn surplus_axes_pair_at_zero_cost() {
    // rank one clouds in the plane
    let line = |s: f64| {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![s * i as f64, s * i as f64]).collect();
        PointCloud::from_rows(&rows).unwrap()
    };
    let r = riswie_distance(&line(1.0), &line(2.0), &EmbeddingConfig::pca(None)).unwrap();
    assert_eq!(r.k, 2);
    assert!(r.matching.pair_costs.iter().any(|c| *c <= 1e-20));
}

fn ring(n: usize, rx: f64, ry: f64) -> PointCloud {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            vec![rx * a.cos(), ry * a.sin()]
        })
        .collect();
    PointCloud::from_rows(&rows).unwrap()
}

#[test]
fn diffusion_circle_quarter_turn() {
    // the circle's leading modes are degenerate, so only a motion that
    // leaves every pairwise distance bit-identical pins the basis
    let x = ring(100, 2.0, 2.0);
    let quarter = ndarray::array![[0.0, -1.0], [1.0, 0.0]];
    let y = x.transformed(&quarter, &ndarray::Array1::zeros(2)).unwrap();
    let config = EmbeddingConfig::diffusion(Some(2), DiffusionParams::default());
    let d = riswie_distance(&x, &y, &config).unwrap().distance;
    assert!(d <= 1e-8 * scale(&x, &y), "{d}");
}

#[test]
fn diffusion_ellipse_rigid_motion() {
    let x = ring(100, 2.0, 1.0);
    let mut rng = stream_rng(12, 0);
    for _ in 0..5 {
        let (q, t) = random_rigid(&mut rng, 2);
        let y = x.transformed(&q, &t).unwrap();
        let config = EmbeddingConfig::diffusion(Some(2), DiffusionParams::default());
        let d = riswie_distance(&x, &y, &config).unwrap().distance;
        assert!(d <= 1e-8 * scale(&x, &y), "{d}");
    }
}

#[test]
fn diffusion_rejects_numerically_split_graph() {
    let mut rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, 0.0]).collect();
    rows.push(vec![60.0, 0.0]);
    let x = PointCloud::from_rows(&rows).unwrap();
    let config = EmbeddingConfig::diffusion(Some(2), DiffusionParams::default());
    assert!(matches!(
        riswie_distance(&x, &x, &config),
        Err(RiswieError::Disconnected { .. })
    ));
}

#[test]
fn soft_self_distance_is_small() {
    let x = sampled(20, 150, &[9.0, 4.0, 1.0]);
    let y = shuffled(&x, 3);
    let (value, plan) = sriswie_distance(&x, &y, &EmbeddingConfig::pca(None), &sharp()).unwrap();
    assert!(value <= 1e-3 * scale(&x, &y), "{value}");
    assert!(plan.converged);
}

#[test]
fn soft_rigid_pair_is_small() {
    let mut rng = stream_rng(21, 0);
    for d in [2, 3, 5] {
        let stds = distinct_stds(&mut rng, d);
        let x = gaussian_cloud(&mut rng, 200, &stds);
        let (q, t) = random_rigid(&mut rng, d);
        let y = x.transformed(&q, &t).unwrap();
        let (value, _) = sriswie_distance(&x, &y, &EmbeddingConfig::pca(None), &sharp()).unwrap();
        assert!(value <= 1e-3 * scale(&x, &y), "d={d}: {value}");
    }
}

#[test]
fn soft_with_one_axis_equals_hard() {
    for t in 0..10 {
        let x = sampled(30 + t, 40, &[3.0, 1.0]);
        let y = sampled(40 + t, 70, &[2.0, 0.5]);
        let config = EmbeddingConfig::pca(Some(1));
        let hard = riswie_distance(&x, &y, &config).unwrap().distance;
        let (soft, plan) = sriswie_distance(&x, &y, &config, &sharp()).unwrap();
        assert_eq!(plan.plan[[0, 0]], 1.0);
        assert_eq!(soft, hard, "trial {t}");
    }
}

#[test]
fn soft_plan_is_doubly_stochastic() {
    let x = sampled(50, 80, &[5.0, 3.0, 2.0, 1.0]);
    let y = sampled(51, 60, &[4.0, 4.0, 1.0, 0.5]);
    let (_, soft) = sriswie_distance(&x, &y, &EmbeddingConfig::pca(None), &SoftParams::default()).unwrap();
    for i in 0..4 {
        let row: f64 = soft.plan.row(i).sum();
        let col: f64 = soft.plan.column(i).sum();
        assert!((row - 1.0).abs() <= 1e-8 && (col - 1.0).abs() <= 1e-8);
    }
    assert!(soft.plan.iter().all(|p| *p >= 0.0));
}

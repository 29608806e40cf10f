mod common;

use bifrac::gpsim::{build_cov_matrix, check_psd, sample_paths_with_workers};
use bifrac::kernel::{cov, BifParams, TimeGrid};
use bifrac::rng::default_workers;
use common::{random_grid, random_params, rng};

#[test]
fn domain_sweep_is_psd() {
    let mut r = rng(31);
    for _ in 0..20 {
        let p = random_params(&mut r);
        let grid = random_grid(&mut r, 32);
        let mut m = build_cov_matrix(&p, &grid).unwrap();
        let v = check_psd(&mut m, 1e-8).unwrap();
        assert!(v.is_psd(), "H={} K={} {v:?}", p.h(), p.k());
    }
}

#[test]
fn out_of_domain_instances_are_not_psd() {
    // HK > 1: a handful of explicit violations (not a claim about every such pair)
    for (h, k, pts) in [(1.0, 2.0, vec![1.0, 2.0]), (0.9, 1.8, vec![1.0, 2.0, 3.0, 4.0])] {
        let q = BifParams::new_unchecked(h, k).unwrap();
        let mut m = build_cov_matrix(&q, &TimeGrid::new(pts).unwrap()).unwrap();
        assert!(!check_psd(&mut m, 1e-8).unwrap().is_psd(), "H={h} K={k}");
    }
}

#[test]
fn factor_reconstructs_after_jitter() {
    let mut r = rng(32);
    for _ in 0..20 {
        let p = random_params(&mut r);
        let mut pts = random_grid(&mut r, 32).points().to_vec();
        pts.insert(0, 0.0);
        let m = build_cov_matrix(&p, &TimeGrid::new(pts).unwrap()).unwrap();
        let f = m.factor().unwrap();
        let err = (&f.l * f.l.transpose() - m.entries()).amax();
        assert!(err <= 1e-8 * m.scale(), "err={err:e}");
    }
}

#[test]
fn empirical_covariance_within_four_standard_errors() {
    let grid = TimeGrid::new(vec![0.0, 0.5, 1.5, 3.0]).unwrap();
    for (h, k) in [(0.3, 1.7), (0.8, 0.6), (0.5, 2.0)] {
        let p = BifParams::new(h, k).unwrap();
        let batch = sample_paths_with_workers(&p, &grid, 100_000, 99, default_workers()).unwrap();
        assert!(batch.column(0).all(|x| x == 0.0));
        for i in 1..grid.len() {
            for j in 1..=i {
                let (est, se) = batch.empirical_cov(i, j);
                let want = cov(&p, grid.points()[i], grid.points()[j]).unwrap();
                assert!((est - want).abs() <= 4.0 * se, "H={h} K={k} ({i},{j}): {est} vs {want} (se {se})");
            }
        }
    }
}

#[test]
fn diagonal_variance_example() {
    let p = BifParams::new(0.5, 0.8).unwrap();
    let batch = sample_paths_with_workers(&p, &TimeGrid::new(vec![2.0]).unwrap(), 100_000, 5, 2).unwrap();
    let (var, se) = batch.empirical_cov(0, 0);
    assert!((var - 2f64.powf(0.8)).abs() <= 4.0 * se);
    assert!((2f64.powf(0.8) - 1.7411).abs() < 1e-4);
}

mod common;

use common::oracle::*;
use common::*;
use dgcca::evaluation::{rank_quality, swiss};
use dgcca::signal::soft_threshold_svd;
use rand::Rng;

#[test]
fn soft_threshold_matches_eigen_oracle() {
    for seed in 0..INSTANCES {
        let mut g = rng(seed);
        let (y, r) = soft_instance(&mut g);
        let est = soft_threshold_svd(&y, r).unwrap();
        let oracle = soft_threshold_oracle(&y, r);
        let err = (&est.x_hat - &oracle).amax() / y.amax();
        assert!(err < 1e-10, "instance {seed}: relative error {err:e}");
    }
}

#[test]
fn swiss_matches_double_loop() {
    for seed in 0..INSTANCES {
        let mut g = rng(1000 + seed);
        let p = g.gen_range(1..6);
        let n = g.gen_range(3..25);
        let groups = g.gen_range(1..5);
        let m = gaussian(&mut g, p, n);
        let labels: Vec<String> = (0..n).map(|_| format!("{}", g.gen_range(0..groups))).collect();
        let a = swiss(&m, &labels).unwrap();
        let b = swiss_oracle(&m, &labels);
        assert!((a - b).abs() < 1e-10, "instance {seed}: {a} vs {b}");
    }
}

#[test]
fn rank_quality_matches_brute_force() {
    for seed in 0..INSTANCES {
        let mut g = rng(2000 + seed);
        let p = g.gen_range(2..30);
        // coarse grid values force ties
        let t: Vec<f64> = (0..p).map(|_| f64::from(g.gen_range(0..6)) / 5.0).collect();
        let e: Vec<f64> = (0..p).map(|i| t[i] + f64::from(g.gen_range(-2..3)) / 10.0).collect();
        let frac = g.gen_range(0.05..1.0);
        let q = rank_quality(&t, &e, frac).unwrap();
        let (rho, ndcg, top) = rank_quality_oracle(&t, &e, frac);
        assert!((q.spearman - rho).abs() < 1e-10, "instance {seed}: spearman {} vs {rho}", q.spearman);
        assert!((q.ndcg - ndcg).abs() < 1e-10, "instance {seed}: ndcg {} vs {ndcg}", q.ndcg);
        assert!((q.ndcg_top - top).abs() < 1e-10, "instance {seed}: top {} vs {top}", q.ndcg_top);
    }
}

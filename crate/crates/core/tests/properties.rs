mod common;

use common::*;
use dgcca::dataset::{is_centered, row_center, Matrix};
use dgcca::decomposition::hierarchy::{decompose_hierarchical, HierarchyConfig};
use dgcca::decomposition::population::{population_decompose, true_params, PopulationModel};
use dgcca::decomposition::{decompose_factors, decompose_signals, pick_alpha, StageCosines};
use dgcca::evaluation::{rank_quality, swiss};
use dgcca::gcca::{sample_gcca, sample_gcca_from_scores};
use dgcca::linalg;
use dgcca::nuisance::{select_l, SelectionConfig, SelectionReport};
use dgcca::signal::{exact_truncation, soft_threshold_svd, FactorView};
use dgcca::simulation::{compound_symmetric_cov, Design, SetupId, SetupSpec};
use dgcca::stats::{test_zero_corr, Tail};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn planted_fit(seed: u64) -> (Vec<dgcca::SignalEstimate>, dgcca::GccaModel, dgcca::NuisanceParams) {
    let ranks = [2, 3, 2];
    let ds = planted(seed, &[30, 25, 40], &ranks, 2, 80, 1.0);
    let sig = signals(&ds, &ranks);
    let model = sample_gcca(&sig).unwrap();
    let params = true_params(&model).unwrap();
    (sig, model, params)
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn centering_is_idempotent(seed in any::<u64>(), p in 1usize..6, n in 2usize..12, shift in -1e3f64..1e3) {
        let mut g = rng(seed);
        let m = Matrix::new(gaussian(&mut g, p, n).add_scalar(shift)).unwrap();
        let once = row_center(&m);
        prop_assert!(is_centered(&once));
        let twice = row_center(&once);
        prop_assert_eq!(once.values, twice.values);
    }

    #[test]
    fn shrinkage_properties(seed in any::<u64>(), p in 8usize..20, n in 10usize..30, r in 1usize..4, scale in 0.1f64..10.0) {
        let mut g = rng(seed);
        let y = gaussian(&mut g, p, r) * gaussian(&mut g, r, n) * 3.0 + gaussian(&mut g, p, n);
        let est = soft_threshold_svd(&y, r).unwrap();
        let s = linalg::singular_values(&y);
        for (a, b) in est.singular_values.iter().zip(&s) {
            prop_assert!(*a <= *b + 1e-12);
        }
        // left vectors span the top-r subspace of y
        let svd = linalg::thin_svd(&y).unwrap();
        let u = svd.u.columns(0, r);
        let proj = &u * (u.transpose() * &est.left_vectors);
        prop_assert!((&proj - &est.left_vectors).amax() < 1e-10);
        // scale equivariance
        let est2 = soft_threshold_svd(&(&y * scale), r).unwrap();
        prop_assert!((&est2.x_hat - &est.x_hat * scale).amax() < 1e-9 * scale * y.amax());
        // factor scores orthonormal under /n on nonzero rows
        let f = &est.factor_scores;
        let gram = f * f.transpose() / n as f64;
        for i in 0..r {
            for j in 0..r {
                let target = if i == j && f.row(i).amax() > 0.0 { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)] - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gcca_identities(seed in any::<u64>()) {
        let (_, model, _) = planted_fit(seed);
        let w = model.w_scores.as_ref().unwrap();
        let z = model.z_scores.as_ref().unwrap();
        let n = w.ncols() as f64;
        for l in 0..model.rank {
            let s: f64 = (0..3).map(|k| model.cos_wz(l, k).powi(2)).sum();
            prop_assert!((s - model.eigenvalues[l]).abs() < 1e-8);
            for k in 0..3 {
                prop_assert!(w.row(l).dot(&z[k].row(l)) / n >= -1e-10);
            }
        }
        // each view's factor rows lie in the span of the nonzero w rows
        let wr = w.rows(0, model.rank).into_owned();
        let q = wr.transpose().qr().q();
        let (sig, _, _) = planted_fit(seed);
        for s in &sig {
            let f = s.factor_scores.transpose();
            let res = &f - &q * (q.transpose() * &f);
            prop_assert!(res.amax() < 1e-8 * f.amax().max(1.0));
        }
    }

    #[test]
    fn rotation_leaves_common_part(seed in any::<u64>()) {
        let (sig, model, params) = planted_fit(seed);
        let l = model.stopping_index;
        prop_assume!(l >= 1);
        let distinct = (0..l).all(|i| model.eigenvalues[i] - model.eigenvalues[i + 1] > 1e-6);
        prop_assume!(distinct);
        let x_hats: Vec<&DMatrix<f64>> = sig.iter().map(|s| &s.x_hat).collect();
        let base: Vec<FactorView> = sig.iter().map(|s| s.factor_view()).collect();
        let first = decompose_factors(&x_hats, &base, &model, &params).unwrap();

        let mut g = rng(seed ^ 0x5eed);
        let rotated: Vec<FactorView> = base
            .iter()
            .map(|fv| {
                let o = random_orthogonal(&mut g, fv.scores.nrows());
                FactorView { loadings: &fv.loadings * o.transpose(), scores: &o * &fv.scores }
            })
            .collect();
        let scores: Vec<&DMatrix<f64>> = rotated.iter().map(|f| &f.scores).collect();
        let model2 = sample_gcca_from_scores(&scores).unwrap();
        for (a, b) in model.eigenvalues.iter().zip(&model2.eigenvalues) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let second = decompose_factors(&x_hats, &rotated, &model2, &params).unwrap();
        for (a, b) in first.views.iter().zip(&second.views) {
            let scale = linalg::frobenius_sq(&a.x_hat).sqrt();
            prop_assert!(linalg::frobenius_sq(&(&a.c_hat - &b.c_hat)).sqrt() <= 1e-8 * scale);
        }
    }

    #[test]
    fn stage_roots(seed in any::<u64>()) {
        let (sig, model, params) = planted_fit(seed);
        let res = decompose_signals(&sig, &model, &params).unwrap();
        for sol in &res.alphas {
            let cos = StageCosines::from_model(&model, sol.stage);
            let (j, k) = sol.chosen_pair;
            let a = sol.alpha;
            if cos.delta((j, k)) > 0.0 && params.stages[&sol.stage].delta_pos.contains(&(j, k)) {
                let inner = cos.zz[(j, k)] - a * (cos.wz[j] + cos.wz[k]) + a * a;
                prop_assert!(inner.abs() < 1e-8);
            }
            let sign = params.stages[&sol.stage].sign;
            let best = pick_alpha(&sol.candidates, sign).unwrap();
            prop_assert_eq!(best.alpha, a);
            for c in sol.candidates.iter().filter(|c| c.alpha * f64::from(sign) > 0.0) {
                prop_assert!(a.abs() <= c.alpha.abs());
                prop_assert!(c.delta >= 0.0);
            }
        }
        for v in &res.views {
            prop_assert_eq!(&v.d_hat, &(&v.x_hat - &v.c_hat));
            let pve_d = 1.0 - v.pve_view_c;
            prop_assert_eq!(v.pve_view_c + pve_d, 1.0);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v.pve_view_c));
        }
    }

    #[test]
    fn two_view_population_is_cross_orthogonal(seed in any::<u64>(), r1 in 1usize..4, r2 in 1usize..4) {
        let mut g = rng(seed);
        let m = r1 + r2;
        // random correlation between two orthonormal factor blocks
        let a = gaussian(&mut g, m, m);
        let c = &a * a.transpose();
        let d = DMatrix::from_diagonal(&c.diagonal().map(|v| 1.0 / v.sqrt()));
        let corr = &d * c * &d;
        let w1 = linalg::psd_sqrt(&corr.view((0, 0), (r1, r1)).into_owned()).unwrap().try_inverse().unwrap();
        let w2 = linalg::psd_sqrt(&corr.view((r1, r1), (r2, r2)).into_owned()).unwrap().try_inverse().unwrap();
        let mut wt = DMatrix::zeros(m, m);
        wt.view_mut((0, 0), (r1, r1)).copy_from(&w1);
        wt.view_mut((r1, r1), (r2, r2)).copy_from(&w2);
        let cov = &wt * corr * wt.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        let loads = vec![gaussian(&mut g, 6, r1), gaussian(&mut g, 7, r2)];
        let pm = PopulationModel::from_factor_cov(cov, loads).unwrap();
        let dec = population_decompose(&pm, None).unwrap();
        let d1 = dec.distinctive_coef(&pm, 0);
        let d2 = dec.distinctive_coef(&pm, 1);
        let cross = &d1 * &pm.sigma * d2.transpose();
        prop_assert!(cross.amax() < 1e-8, "cross covariance {}", cross.amax());
    }

    #[test]
    fn tails_are_complementary(seed in any::<u64>(), n in 8usize..60, rho in -0.9f64..0.9) {
        let mut g = rng(seed);
        let x = gaussian(&mut g, 1, n);
        let y = &x * rho + gaussian(&mut g, 1, n);
        let (x, y): (Vec<f64>, Vec<f64>) = (x.iter().copied().collect(), y.iter().copied().collect());
        let l = test_zero_corr(&x, &y, Tail::Left).unwrap();
        let r = test_zero_corr(&x, &y, Tail::Right).unwrap();
        let t = test_zero_corr(&x, &y, Tail::Two).unwrap();
        prop_assert!((l.p_value + r.p_value - 1.0).abs() < 1e-12);
        prop_assert!((t.p_value - 2.0 * l.p_value.min(r.p_value)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&t.p_value));
    }

    #[test]
    fn selected_l_grows_with_level(seed in any::<u64>()) {
        let (_, model, _) = planted_fit(seed);
        let mut last = 0;
        for level in [0.001, 0.01, 0.05, 0.1, 0.3] {
            let l = select_l(&model, level, &mut SelectionReport::default()).unwrap();
            prop_assert!(l >= last);
            last = l;
        }
    }

    #[test]
    fn swiss_invariances(seed in any::<u64>(), p in 1usize..5, n in 4usize..20, groups in 1usize..4, a in 0.1f64..5.0) {
        let mut g = rng(seed);
        let m = gaussian(&mut g, p, n);
        let labels: Vec<String> = (0..n).map(|i| format!("g{}", i % groups)).collect();
        let base = swiss(&m, &labels).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&base));
        let shifted = m.map(|v| a * v + 3.0);
        prop_assert!((swiss(&shifted, &labels).unwrap() - base).abs() < 1e-10);
        let perm: Vec<usize> = (0..n).rev().collect();
        let pm = DMatrix::from_fn(p, n, |i, j| m[(i, perm[j])]);
        let pl: Vec<String> = perm.iter().map(|&j| labels[j].clone()).collect();
        prop_assert!((swiss(&pm, &pl).unwrap() - base).abs() < 1e-10);
        let renamed: Vec<String> = labels.iter().map(|l| format!("x{l}")).collect();
        prop_assert!((swiss(&m, &renamed).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn rank_quality_invariances(t in prop::collection::vec(0.0f64..1.0, 2..40), seed in any::<u64>(), frac in 0.05f64..1.0) {
        let mut g = rng(seed);
        let est: Vec<f64> = t.iter().map(|v| v + 0.3 * g.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let q = rank_quality(&t, &est, frac).unwrap();
        prop_assert!((-1.0..=1.0).contains(&q.spearman));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&q.ndcg));
        let mono: Vec<f64> = est.iter().map(|v| (2.0 * v).exp()).collect();
        let q2 = rank_quality(&t, &mono, frac).unwrap();
        prop_assert!((q.spearman - q2.spearman).abs() < 1e-12);
        prop_assert!((q.ndcg - q2.ndcg).abs() < 1e-12);
        prop_assert!((q.ndcg_top - q2.ndcg_top).abs() < 1e-12);
        let perfect = rank_quality(&t, &t, frac).unwrap();
        prop_assert!((perfect.ndcg - 1.0).abs() < 1e-12);
    }
}

use rand::Rng as _;

proptest! {
    #![proptest_config(cfg(8))]

    #[test]
    fn hierarchy_telescopes(seed in any::<u64>()) {
        let ranks = [3, 3, 3];
        let ds = planted(seed, &[20, 24, 18], &ranks, 2, 60, 0.5);
        let mut hc = HierarchyConfig::new(3, 0.0, SelectionConfig { sign_bootstrap: 200, rank_bootstrap: 100, seed, ..SelectionConfig::default() });
        let sig = signals(&ds, &ranks);
        let model = sample_gcca(&sig).unwrap();
        let first = true_params(&model).unwrap();
        // pin the second level too so it has a nonempty common part
        let level1 = decompose_signals(&sig, &model, &first).unwrap();
        let inner: Vec<_> = level1
            .views
            .iter()
            .map(|v| {
                let r = linalg::thin_svd(&v.d_hat).unwrap().numerical_rank();
                let mut e = exact_truncation(&v.d_hat, r).unwrap();
                e.x_hat = v.d_hat.clone();
                e
            })
            .collect();
        let second = true_params(&sample_gcca(&inner).unwrap()).unwrap();
        prop_assume!(!second.i0.is_empty());
        hc.level_params = vec![Some(first), Some(second)];
        let h = decompose_hierarchical(&ds, &hc).unwrap();
        prop_assert!(h.levels.len() >= 2);
        prop_assert!(!h.levels[1].params.i0.is_empty());
        for k in 0..3 {
            let x = &h.levels[0].views[k].x_hat;
            let mut sum = h.levels.last().unwrap().views[k].d_hat.clone();
            for lvl in &h.levels {
                sum += &lvl.views[k].c_hat;
            }
            prop_assert!((&sum - x).amax() <= 1e-12 * x.amax().max(1.0));
            for t in 1..h.levels.len() {
                let prev = &h.levels[t - 1].views[k].d_hat;
                let cur = &h.levels[t].views[k];
                prop_assert_eq!(&cur.x_hat, prev);
                prop_assert_eq!(&cur.d_hat, &(prev - &cur.c_hat));
            }
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), rep in 0u64..5) {
        let spec = SetupSpec::new(SetupId::S11, 40.0, 30, 1.0, 40, seed).unwrap();
        let a = Design::new(spec.clone()).unwrap().generate(rep).unwrap();
        let b = Design::new(spec).unwrap().generate(rep).unwrap();
        for k in 0..3 {
            prop_assert_eq!(&a.0.views[k].values, &b.0.views[k].values);
            prop_assert_eq!(&a.1.c[k], &b.1.c[k]);
        }
    }
}

#[test]
fn alpha_decreases_with_angle() {
    let mut last = f64::INFINITY;
    for step in 1..18 {
        let theta = 5.0 * step as f64;
        let loads = vec![DMatrix::from_element(4, 1, 1.0); 3];
        let pm = PopulationModel::from_factor_cov(compound_symmetric_cov(theta), loads).unwrap();
        let dec = population_decompose(&pm, None).unwrap();
        let a = dec.alphas[0].alpha;
        assert!(a < last, "alpha {a} at {theta} degrees");
        last = a;
    }
}

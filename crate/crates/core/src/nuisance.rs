//! Test-based selection of the nuisance parameters: ranks, `L`, `I0`, `r*`,
//! the discriminant sets and the sign of each `alpha`.
//!
//! Every test run is logged in a [`SelectionReport`] together with its
//! statistic, p-value and decision.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::MultiViewDataset;
use crate::decomposition::{alpha_candidates, AlphaCandidate, StageCosines};
use crate::error::{Error, Result};
use crate::gcca::{self, GccaModel};
use crate::linalg;
use crate::params::{all_pairs, NuisanceParams, Pair, Provenance, StageParams};
use crate::rng;
use crate::signal::{self, SignalEstimate};
use crate::stats::{self, Interval, Tail, TestReport};

/// Optional per-step significance levels; unset steps use the global level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageLevels {
    #[serde(rename = "L", alias = "l", default)]
    pub l: Option<f64>,
    #[serde(rename = "I0", alias = "i0", default)]
    pub i0: Option<f64>,
    #[serde(default)]
    pub r_star: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub sign: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub alpha: f64,
    pub stage_levels: StageLevels,
    pub sign_bootstrap: usize,
    pub rank_bootstrap: usize,
    /// Constant `c` of the eigenvalue screen `c * sqrt(log n / n)`.
    pub rank_threshold_c: f64,
    pub k_max: Option<usize>,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.05,
            stage_levels: StageLevels::default(),
            sign_bootstrap: 2000,
            rank_bootstrap: 500,
            rank_threshold_c: 2.0,
            k_max: None,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let levels = [
            Some(self.alpha),
            self.stage_levels.l,
            self.stage_levels.i0,
            self.stage_levels.r_star,
            self.stage_levels.delta,
            self.stage_levels.sign,
        ];
        for a in levels.into_iter().flatten() {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("significance level {a} outside (0, 1)")));
            }
        }
        if self.sign_bootstrap < 100 {
            return Err(Error::Config(format!(
                "sign bootstrap needs B >= 100, got {}",
                self.sign_bootstrap
            )));
        }
        if self.rank_bootstrap < 1 {
            return Err(Error::Config("rank bootstrap needs B >= 1".into()));
        }
        Ok(())
    }

    fn level(&self, step: Option<f64>) -> f64 {
        step.unwrap_or(self.alpha)
    }
}

/// User-fixed values; each one skips the corresponding selection step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub ranks: Option<Vec<usize>>,
    pub l: Option<usize>,
    pub i0: Option<Vec<usize>>,
    pub r_star: Option<Vec<usize>>,
    pub delta_sets: Option<BTreeMap<usize, (Vec<Pair>, Vec<Pair>)>>,
    pub signs: Option<BTreeMap<usize, i8>>,
}

impl Overrides {
    pub fn from_params(p: &NuisanceParams) -> Overrides {
        Overrides {
            ranks: Some(p.ranks.clone()),
            l: Some(p.l),
            i0: Some(p.i0.clone()),
            r_star: Some(p.r_star.clone()),
            delta_sets: Some(
                p.stages
                    .iter()
                    .map(|(&l, s)| (l, (s.delta_pos.clone(), s.delta_zero.clone())))
                    .collect(),
            ),
            signs: Some(p.stages.iter().map(|(&l, s)| (l, s.sign)).collect()),
        }
    }

    fn complete(&self) -> bool {
        self.ranks.is_some()
            && self.l.is_some()
            && self.i0.is_some()
            && self.r_star.is_some()
            && self.delta_sets.is_some()
            && self.signs.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub step: String,
    pub stage: Option<usize>,
    pub views: Vec<usize>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub tail: Option<Tail>,
    pub level: f64,
    pub reject: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignBootstrap {
    pub stage: usize,
    pub estimate: f64,
    pub interval: Interval,
    pub resamples_used: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub tests: Vec<TestRecord>,
    pub sign_intervals: Vec<SignBootstrap>,
    pub warnings: Vec<String>,
    pub approximations: Vec<String>,
}

impl SelectionReport {
    fn log(&mut self, step: &str, stage: Option<usize>, views: Vec<usize>, level: f64, res: Result<TestReport>) -> bool {
        match res {
            Ok(t) => {
                let reject = t.rejects(level);
                self.tests.push(TestRecord {
                    step: step.into(),
                    stage,
                    views,
                    statistic: Some(t.statistic),
                    p_value: Some(t.p_value),
                    tail: Some(t.tail),
                    level,
                    reject,
                    note: None,
                });
                reject
            }
            Err(e) => {
                self.tests.push(TestRecord {
                    step: step.into(),
                    stage,
                    views,
                    statistic: None,
                    p_value: None,
                    tail: None,
                    level,
                    reject: false,
                    note: Some(e.to_string()),
                });
                false
            }
        }
    }
}

fn scores(model: &GccaModel) -> Result<(&DMatrix<f64>, &Vec<DMatrix<f64>>)> {
    match (&model.w_scores, &model.z_scores) {
        (Some(w), Some(z)) => Ok((w, z)),
        _ => Err(Error::Config("selection needs sample scores".into())),
    }
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Largest stage where, for some view, both `corr(w, z_k)` and the
/// correlation between view `k`'s part of `w` and the other views' part are
/// significantly positive.
pub fn select_l(model: &GccaModel, level: f64, report: &mut SelectionReport) -> Result<usize> {
    let (w, z) = scores(model)?;
    for l in (0..model.rank).rev() {
        let wl = row(w, l);
        let sq = model.eigenvalues[l].max(0.0).sqrt();
        for k in 0..model.k() {
            let zk = row(&z[k], l);
            let a = report.log("L:corr(w,z)", Some(l), vec![k], level, stats::test_zero_corr(&wl, &zk, Tail::Right));
            let nrm = model.eta_norms[(k, l)];
            let own: Vec<f64> = zk.iter().map(|v| nrm * v).collect();
            let rest: Vec<f64> = wl.iter().zip(&own).map(|(wv, o)| sq * wv - o).collect();
            let b = report.log("L:corr(own,rest)", Some(l), vec![k], level, stats::test_zero_corr(&own, &rest, Tail::Right));
            if a && b {
                return Ok(l + 1);
            }
        }
    }
    Ok(0)
}

/// Stages below `l_hat` whose canonical variables are all significantly
/// correlated with `w` (right tail) and with each other (two tails).
pub fn select_i0(model: &GccaModel, l_hat: usize, level: f64, report: &mut SelectionReport) -> Result<Vec<usize>> {
    let (w, z) = scores(model)?;
    let mut out = Vec::new();
    for l in 0..l_hat.min(model.stages()) {
        let wl = row(w, l);
        let mut keep = true;
        for k in 0..model.k() {
            let zk = row(&z[k], l);
            keep &= report.log("I0:corr(w,z)", Some(l), vec![k], level, stats::test_zero_corr(&wl, &zk, Tail::Right));
        }
        for (a, b) in all_pairs(model.k()) {
            let (za, zb) = (row(&z[a], l), row(&z[b], l));
            keep &= report.log("I0:corr(z,z)", Some(l), vec![a, b], level, stats::test_zero_corr(&za, &zb, Tail::Two));
        }
        if keep {
            out.push(l);
        }
    }
    Ok(out)
}

fn resample_eigenvalue(zs: &DMatrix<f64>, idx: &[usize], which: usize) -> Result<f64> {
    let mut sub = DMatrix::zeros(zs.nrows(), idx.len());
    for (c, &i) in idx.iter().enumerate() {
        sub.set_column(c, &zs.column(i));
    }
    let cov = &sub * sub.transpose() / idx.len() as f64;
    Ok(linalg::sym_eigen(&cov)?.values[which])
}

/// Rank of each view's canonical-variable covariance over `I0`: screen the
/// eigenvalues against `c sqrt(log n / n)`, then confirm the boundary
/// eigenvalue with a bootstrap lower quantile.
pub fn select_r_star(
    model: &GccaModel,
    i0: &[usize],
    cfg: &SelectionConfig,
    report: &mut SelectionReport,
) -> Result<Vec<usize>> {
    let (_, z) = scores(model)?;
    let level = cfg.level(cfg.stage_levels.r_star);
    if i0.is_empty() {
        return Ok(vec![0; model.k()]);
    }
    if i0.len() == 1 {
        return Ok(vec![1; model.k()]);
    }
    let n = z[0].ncols();
    let thr = cfg.rank_threshold_c * ((n as f64).ln() / n as f64).sqrt();
    let mut out = Vec::with_capacity(model.k());
    for k in 0..model.k() {
        let mut zs = DMatrix::zeros(i0.len(), n);
        for (r, &l) in i0.iter().enumerate() {
            zs.set_row(r, &z[k].row(l));
        }
        let mu = linalg::sym_eigen(&(&zs * zs.transpose() / n as f64))?.values;
        let screened = mu.iter().filter(|&&m| m > thr).count();
        let mut r = screened.clamp(1, i0.len());
        while r > 1 {
            let boot: Vec<f64> = crate::par::map_indices(cfg.rank_bootstrap, |b| {
                let mut g = rng::substream(cfg.seed, &[rng::TAG_RANK_BOOTSTRAP, k as u64, r as u64, b as u64]);
                let idx: Vec<usize> = (0..n).map(|_| g.gen_range(0..n)).collect();
                resample_eigenvalue(&zs, &idx, r - 1)
            })
            .into_iter()
            .collect::<Result<_>>()?;
            let mut sorted = boot;
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lower = stats::quantile_sorted(&sorted, level);
            let confirmed = lower > thr;
            report.tests.push(TestRecord {
                step: "r_star:bootstrap".into(),
                stage: None,
                views: vec![k],
                statistic: Some(mu[r - 1]),
                p_value: None,
                tail: Some(Tail::Left),
                level,
                reject: confirmed,
                note: Some(format!("eigenvalue {r}, lower quantile {lower:.6}, threshold {thr:.6}")),
            });
            if confirmed {
                break;
            }
            r -= 1;
        }
        out.push(r);
    }
    report.approximations.push(format!(
        "r*: two-step eigenvalue screen (c = {}) with bootstrap confirmation (B = {}) approximating the cited rank test",
        cfg.rank_threshold_c, cfg.rank_bootstrap
    ));
    Ok(out)
}

/// Pair split per stage: `I_Δ+` when the centered pair is significantly
/// negatively correlated, `I_Δ0` when it is not significantly positive.
pub fn select_delta_sets(
    model: &GccaModel,
    i0: &[usize],
    level: f64,
    report: &mut SelectionReport,
) -> Result<BTreeMap<usize, (Vec<Pair>, Vec<Pair>)>> {
    let (w, z) = scores(model)?;
    let mut out = BTreeMap::new();
    for &l in i0 {
        let cos = StageCosines::from_model(model, l);
        let wl = row(w, l);
        let wnorm = wl.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (mut pos, mut zero) = (Vec::new(), Vec::new());
        for (j, k) in all_pairs(model.k()) {
            let m = 0.5 * (cos.wz[j] + cos.wz[k]);
            let zjk: Vec<f64> = z[j].row(l).iter().zip(&wl).map(|(a, b)| a - m * b).collect();
            let zkj: Vec<f64> = z[k].row(l).iter().zip(&wl).map(|(a, b)| a - m * b).collect();
            let tiny = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-10 * wnorm.max(1.0);
            if tiny(&zjk) || tiny(&zkj) {
                report.warnings.push(format!(
                    "stage {l}, pair ({j}, {k}): residual canonical variable vanishes; assigned to the zero-discriminant set"
                ));
                zero.push((j, k));
                continue;
            }
            if report.log("delta:left", Some(l), vec![j, k], level, stats::test_zero_corr(&zjk, &zkj, Tail::Left)) {
                pos.push((j, k));
            } else if !report.log("delta:right", Some(l), vec![j, k], level, stats::test_zero_corr(&zjk, &zkj, Tail::Right)) {
                zero.push((j, k));
            }
        }
        if pos.is_empty() && zero.is_empty() {
            let (p, _) = all_pairs(model.k())
                .into_iter()
                .map(|p| (p, cos.delta(p)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
                .expect("K >= 2");
            report.warnings.push(format!(
                "stage {l}: no pair classified; using pair {p:?} with the largest discriminant"
            ));
            pos.push(p);
        }
        out.insert(l, (pos, zero));
    }
    Ok(out)
}

fn min_abs_by_sign(c: &[AlphaCandidate]) -> (Option<f64>, Option<f64>) {
    let mut pos: Option<f64> = None;
    let mut neg: Option<f64> = None;
    for a in c {
        if a.alpha > 0.0 {
            pos = Some(pos.map_or(a.alpha, |p: f64| p.min(a.alpha)));
        } else if a.alpha < 0.0 {
            neg = Some(neg.map_or(-a.alpha, |p: f64| p.min(-a.alpha)));
        }
    }
    (pos, neg)
}

/// Per-sample products feeding the stage cosines, so resamples only need
/// sums: `wz[k][i] = w_i z_ki`, `zz[pair][i] = z_ji z_ki`.
struct CosineTerms {
    wz: Vec<Vec<f64>>,
    zz: Vec<Vec<f64>>,
    pairs: Vec<Pair>,
    k: usize,
}

impl CosineTerms {
    fn new(model: &GccaModel, l: usize, w: &DMatrix<f64>, z: &[DMatrix<f64>]) -> CosineTerms {
        let k = model.k();
        let n = w.ncols();
        let pairs = all_pairs(k);
        let wz = (0..k).map(|v| (0..n).map(|i| w[(l, i)] * z[v][(l, i)]).collect()).collect();
        let zz = pairs
            .iter()
            .map(|&(a, b)| (0..n).map(|i| z[a][(l, i)] * z[b][(l, i)]).collect())
            .collect();
        CosineTerms { wz, zz, pairs, k }
    }

    fn cosines(&self, weights: impl Fn(&[f64]) -> f64) -> StageCosines {
        let wz = self.wz.iter().map(|t| weights(t)).collect();
        let mut zz = DMatrix::identity(self.k, self.k);
        for (t, &(a, b)) in self.zz.iter().zip(&self.pairs) {
            let c = weights(t);
            zz[(a, b)] = c;
            zz[(b, a)] = c;
        }
        StageCosines { wz, zz }
    }
}

/// Sign of each stage's `alpha`: the only sign available, or, when both
/// occur, +1 iff a BCa interval for `|alpha+| - |alpha-|` excludes zero and
/// the positive root is the smaller one.
pub fn select_sign(
    model: &GccaModel,
    sets: &BTreeMap<usize, (Vec<Pair>, Vec<Pair>)>,
    cfg: &SelectionConfig,
    report: &mut SelectionReport,
) -> Result<BTreeMap<usize, i8>> {
    if cfg.sign_bootstrap < 100 {
        return Err(Error::Config(format!(
            "sign bootstrap needs B >= 100, got {}",
            cfg.sign_bootstrap
        )));
    }
    let (w, z) = scores(model)?;
    let level = cfg.level(cfg.stage_levels.sign);
    let n = w.ncols();
    let mut out = BTreeMap::new();
    for (&l, (pos, zero)) in sets {
        let stage = StageParams { delta_pos: pos.clone(), delta_zero: zero.clone(), sign: 1 };
        let cos = StageCosines::from_model(model, l);
        let (ap, an) = min_abs_by_sign(&alpha_candidates(&cos, &stage));
        let sign = match (ap, an) {
            (Some(_), None) | (None, None) => 1,
            (None, Some(_)) => -1,
            (Some(p), Some(q)) => {
                let terms = CosineTerms::new(model, l, w, z);
                let theta = |c: &StageCosines| match min_abs_by_sign(&alpha_candidates(c, &stage)) {
                    (Some(p), Some(q)) => p - q,
                    _ => f64::NAN,
                };
                let boot = crate::par::map_indices(cfg.sign_bootstrap, |b| {
                    let mut g = rng::substream(cfg.seed, &[rng::TAG_SIGN_BOOTSTRAP, l as u64, b as u64]);
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[g.gen_range(0..n)] += 1;
                    }
                    theta(&terms.cosines(|t| {
                        t.iter().zip(&counts).map(|(v, &c)| v * f64::from(c)).sum::<f64>() / n as f64
                    }))
                });
                let totals: Vec<f64> = terms.wz.iter().chain(&terms.zz).map(|t| t.iter().sum()).collect();
                let nw = terms.wz.len();
                let jack: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut wz = Vec::with_capacity(nw);
                        for (v, t) in terms.wz.iter().enumerate() {
                            wz.push((totals[v] - t[i]) / (n - 1) as f64);
                        }
                        let mut zz = DMatrix::identity(terms.k, terms.k);
                        for (pi, (t, &(a, b))) in terms.zz.iter().zip(&terms.pairs).enumerate() {
                            let c = (totals[nw + pi] - t[i]) / (n - 1) as f64;
                            zz[(a, b)] = c;
                            zz[(b, a)] = c;
                        }
                        theta(&StageCosines { wz, zz })
                    })
                    .filter(|v| v.is_finite())
                    .collect();
                let estimate = p - q;
                let used = boot.iter().filter(|v| v.is_finite()).count();
                let interval = stats::bca_interval(estimate, &boot, &jack, 1.0 - level);
                report.sign_intervals.push(SignBootstrap { stage: l, estimate, interval, resamples_used: used });
                if !interval.contains(0.0) && p < q {
                    1
                } else {
                    -1
                }
            }
        };
        out.insert(l, sign);
    }
    Ok(out)
}

/// Output of [`select_all`]: the parameters plus the intermediate signal
/// and GCCA objects so the decomposition can reuse them.
#[derive(Debug, Clone)]
pub struct Selection {
    pub params: NuisanceParams,
    pub report: SelectionReport,
    pub signals: Vec<SignalEstimate>,
    pub model: GccaModel,
}

/// Selection of everything after the ranks, on an existing GCCA model.
pub fn select_from_model(
    model: &GccaModel,
    ranks: Vec<usize>,
    cfg: &SelectionConfig,
    ov: &Overrides,
    report: &mut SelectionReport,
) -> Result<NuisanceParams> {
    cfg.validate()?;
    let k = model.k();
    let l = match ov.l {
        Some(l) => l,
        None => select_l(model, cfg.level(cfg.stage_levels.l), report)?,
    };
    let i0 = match &ov.i0 {
        Some(i) => i.clone(),
        None => select_i0(model, l, cfg.level(cfg.stage_levels.i0), report)?,
    };
    let r_star = match &ov.r_star {
        Some(r) => r.clone(),
        None => select_r_star(model, &i0, cfg, report)?,
    };
    let sets = match &ov.delta_sets {
        Some(s) => s.clone(),
        None => select_delta_sets(model, &i0, cfg.level(cfg.stage_levels.delta), report)?,
    };
    let signs = match &ov.signs {
        Some(s) => s.clone(),
        None => {
            let needed: BTreeMap<_, _> = sets.iter().filter(|(l, _)| i0.contains(l)).map(|(l, s)| (*l, s.clone())).collect();
            select_sign(model, &needed, cfg, report)?
        }
    };
    let mut stages = BTreeMap::new();
    for &s in &i0 {
        let (pos, zero) = sets
            .get(&s)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no delta sets for stage {s}")))?;
        let sign = *signs
            .get(&s)
            .ok_or_else(|| Error::Config(format!("no sign for stage {s}")))?;
        stages.insert(s, StageParams { delta_pos: pos, delta_zero: zero, sign });
    }
    let params = NuisanceParams {
        ranks,
        l,
        i0,
        r_star,
        stages,
        alpha_level: Some(cfg.alpha),
        provenance: if ov.complete() { Provenance::User } else { Provenance::Selected },
    };
    params.validate(k)?;
    Ok(params)
}

pub fn select_all(ds: &MultiViewDataset, cfg: &SelectionConfig, ov: &Overrides) -> Result<Selection> {
    cfg.validate()?;
    let signals = signal::recover_all(ds, ov.ranks.as_deref(), cfg.k_max)?;
    let model = gcca::sample_gcca(&signals)?;
    let mut report = SelectionReport::default();
    report.warnings.extend(model.warnings.iter().cloned());
    let ranks = signals.iter().map(|s| s.rank).collect();
    let params = select_from_model(&model, ranks, cfg, ov, &mut report)?;
    Ok(Selection { params, report, signals, model })
}

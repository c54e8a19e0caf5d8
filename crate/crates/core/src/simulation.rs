//! Simulation setups with ground truth, and replication studies.
//!
//! Setups 1.x are single-factor views whose canonical variables share one
//! pairwise angle; setups 2.x are five-factor views with a fixed 15x15 factor
//! covariance. In x.2 variants views 2 and 3 are fixed at p = 300, 900 with
//! unit noise.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{assemble_dataset, Matrix, MultiViewDataset};
use crate::decomposition::population::{population_decompose, PopulationDecomposition, PopulationModel};
use crate::decomposition::{decompose_signals, DecompositionResult};
use crate::error::{Error, Result};
use crate::evaluation;
use crate::gcca;
use crate::linalg;
use crate::nuisance::{self, Overrides, SelectionConfig};
use crate::params::NuisanceParams;
use crate::rng;
use crate::signal;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetupId {
    #[serde(rename = "1.1")]
    S11,
    #[serde(rename = "1.2")]
    S12,
    #[serde(rename = "2.1")]
    S21,
    #[serde(rename = "2.2")]
    S22,
}

impl SetupId {
    pub fn parse(s: &str) -> Result<SetupId> {
        match s.trim() {
            "1.1" => Ok(SetupId::S11),
            "1.2" => Ok(SetupId::S12),
            "2.1" => Ok(SetupId::S21),
            "2.2" => Ok(SetupId::S22),
            other => Err(Error::Config(format!("unknown setup '{other}' (expected 1.1, 1.2, 2.1 or 2.2)"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SetupId::S11 => "1.1",
            SetupId::S12 => "1.2",
            SetupId::S21 => "2.1",
            SetupId::S22 => "2.2",
        }
    }

    fn single_factor(&self) -> bool {
        matches!(self, SetupId::S11 | SetupId::S12)
    }

    fn fixed_tail(&self) -> bool {
        matches!(self, SetupId::S12 | SetupId::S22)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupSpec {
    pub setup: SetupId,
    /// Pairwise canonical angle in degrees (setups 1.x only).
    pub theta_deg: f64,
    pub p: Vec<usize>,
    pub sigma2: Vec<f64>,
    pub n: usize,
    pub seed: u64,
}

impl SetupSpec {
    /// Fills in the view sizes and noise levels the setup prescribes from
    /// those of the first view.
    pub fn new(setup: SetupId, theta_deg: f64, p1: usize, sigma2_1: f64, n: usize, seed: u64) -> Result<SetupSpec> {
        let (p, sigma2) = if setup.fixed_tail() {
            (vec![p1, 300, 900], vec![sigma2_1, 1.0, 1.0])
        } else {
            (vec![p1; 3], vec![sigma2_1; 3])
        };
        let spec = SetupSpec { setup, theta_deg, p, sigma2, n, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.len() != 3 || self.sigma2.len() != 3 {
            return Err(Error::Config("setups have exactly three views".into()));
        }
        if self.setup.fixed_tail() && (self.p[1] != 300 || self.p[2] != 900 || self.sigma2[1] != 1.0 || self.sigma2[2] != 1.0) {
            return Err(Error::Config(format!(
                "setup {} fixes (p2, p3) = (300, 900) and unit noise for views 2 and 3",
                self.setup.as_str()
            )));
        }
        let r = self.factors_per_view();
        if self.p.iter().any(|&p| p < r) {
            return Err(Error::Config(format!("every view needs p >= {r}")));
        }
        if self.sigma2.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config("noise variances must be finite and nonnegative".into()));
        }
        if self.n < 8 {
            return Err(Error::Config("n must be at least 8".into()));
        }
        if self.setup.single_factor() && !(self.theta_deg > 0.0 && self.theta_deg < 90.0) {
            return Err(Error::Config("theta must lie in (0, 90) degrees".into()));
        }
        Ok(())
    }

    pub fn factors_per_view(&self) -> usize {
        if self.setup.single_factor() {
            1
        } else {
            5
        }
    }

    pub fn spike_variances(&self) -> Vec<f64> {
        if self.setup.single_factor() {
            vec![500.0]
        } else {
            vec![500.0, 400.0, 300.0, 200.0, 100.0]
        }
    }
}

const A12: [[f64; 5]; 5] = [
    [0.02498103503160578, -0.3734791596502449, -0.1482674122573037, -0.3913807076061239, -0.05845072081373771],
    [0.1298912403724416, -0.2915966482089937, -0.703223066831662, -0.286977394728156, -0.07037562289439672],
    [-0.4691315902716665, -0.02216628581934877, -0.05789731182102772, -0.1224434530178697, 0.7359965879693088],
    [-0.005270967060252731, -0.1916047000827934, 0.1572469950904809, -0.1862928969932901, 0.0648022978041196],
    [0.3309749556233325, 0.2910731038141944, -0.2222302484678626, 0.4183644600274041, -0.09116219316544609],
];
const A13: [[f64; 5]; 5] = [
    [-0.1652455953442644, 0.07288409202801582, 0.4797927991048995, -0.1974810941368655, 0.2123320697504773],
    [-0.3889488816571995, 0.05377416249857463, 0.5653871787847853, 0.03845218160536631, -0.2069628634535125],
    [0.4125592431747815, -0.7372033575312142, 0.2721804829221633, -0.0862772040030661, -0.2227478031028198],
    [-0.02345535210198419, -0.1075518721538277, 0.1394751370539585, -0.1625882523272944, 0.3301641568167817],
    [-0.3328426143159536, -0.09361178321406048, -0.4483940610130605, 0.3455811570541347, -0.09767404221183135],
];
const A23: [[f64; 5]; 5] = [
    [-0.1234093117538375, 0.2223022967058531, -0.3593383789512091, 0.04344070064196999, 0.2617381817815529],
    [-0.09993460814692552, -0.008819786526375878, -0.4039397802979183, 0.2933537865045707, -0.2650032054127345],
    [0.5075563895372593, -0.1098865559264541, -0.4771360952896037, -0.1119099874049149, 0.2079731636733454],
    [-0.08232391689469482, -0.01395485249078317, -0.5724368834706903, 0.3121430368957581, -0.1821568224740747],
    [0.3937761144502051, -0.6998227270213208, 0.1161733947993463, -0.04568041770157075, -0.1795827017135321],
];

/// The 15x15 five-factor covariance, identity diagonal blocks, symmetrized.
pub fn five_factor_cov() -> DMatrix<f64> {
    let mut s = DMatrix::identity(15, 15);
    for (blk, (bi, bj)) in [(&A12, (0, 1)), (&A13, (0, 2)), (&A23, (1, 2))] {
        for i in 0..5 {
            for j in 0..5 {
                s[(5 * bi + i, 5 * bj + j)] = blk[i][j];
                s[(5 * bj + j, 5 * bi + i)] = blk[i][j];
            }
        }
    }
    (&s + s.transpose()) * 0.5
}

/// Equal-angle correlation of three single factors.
pub fn compound_symmetric_cov(theta_deg: f64) -> DMatrix<f64> {
    let c = theta_deg.to_radians().cos();
    DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { c })
}

pub fn factor_cov(spec: &SetupSpec) -> DMatrix<f64> {
    if spec.setup.single_factor() {
        compound_symmetric_cov(spec.theta_deg)
    } else {
        five_factor_cov()
    }
}

/// Orthonormal `p x r` basis shared by every view of that size under the
/// same master seed.
pub fn loading_basis(seed: u64, p: usize, r: usize) -> DMatrix<f64> {
    let mut g = rng::substream(seed, &[rng::TAG_LOADINGS, p as u64, r as u64]);
    let m = DMatrix::from_fn(p, r, |_, _| g.sample::<f64, _>(StandardNormal));
    m.qr().q()
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub x: Vec<DMatrix<f64>>,
    pub c: Vec<DMatrix<f64>>,
    pub d: Vec<DMatrix<f64>>,
    pub pve_view_c: Vec<f64>,
    pub pve_var_c: Vec<Vec<f64>>,
    pub params: NuisanceParams,
}

/// A setup with everything that does not change across replications.
#[derive(Debug, Clone)]
pub struct Design {
    pub spec: SetupSpec,
    pub model: PopulationModel,
    pub truth: PopulationDecomposition,
    /// `m x m` factor such that `root * N(0, I)` has the factor covariance.
    pub root: DMatrix<f64>,
}

impl Design {
    pub fn new(spec: SetupSpec) -> Result<Design> {
        spec.validate()?;
        let cov = factor_cov(&spec);
        let root = if spec.setup.single_factor() {
            cov.clone()
                .cholesky()
                .ok_or_else(|| Error::Numerics("factor covariance is not positive definite".into()))?
                .l()
        } else {
            // Singular by design, so no Cholesky factor.
            linalg::psd_sqrt(&cov)?
        };
        let r = spec.factors_per_view();
        let spikes = spec.spike_variances();
        let loadings = spec
            .p
            .iter()
            .map(|&p| {
                let mut v = loading_basis(spec.seed, p, r);
                for (j, s) in spikes.iter().enumerate() {
                    v.column_mut(j).scale_mut(s.sqrt());
                }
                v
            })
            .collect();
        let model = PopulationModel::from_factor_cov(cov, loadings)?;
        let truth = population_decompose(&model, None)?;
        Ok(Design { spec, model, truth, root })
    }

    /// Replication `rep`: the noisy dataset and its ground truth.
    pub fn generate(&self, rep: u64) -> Result<(MultiViewDataset, GroundTruth)> {
        let spec = &self.spec;
        let mut g = rng::substream(spec.seed, &[rng::TAG_REPLICATION, rep]);
        let m = self.root.nrows();
        let raw = DMatrix::from_fn(m, spec.n, |_, _| g.sample::<f64, _>(StandardNormal));
        let mut f = &self.root * raw;
        // Centered factors keep the truth row-centered like the data.
        for mut row in f.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
        let mut views = Vec::with_capacity(3);
        let (mut xs, mut cs, mut ds) = (Vec::new(), Vec::new(), Vec::new());
        for (k, view) in self.model.views.iter().enumerate() {
            let x = &view.b * (&view.t * &f);
            let c = &view.b * (&self.truth.common_coef[k] * &f);
            let d = &x - &c;
            let sd = spec.sigma2[k].sqrt();
            let y = if sd > 0.0 {
                let noise = DMatrix::from_fn(x.nrows(), spec.n, |_, _| g.sample::<f64, _>(StandardNormal));
                &x + noise * sd
            } else {
                x.clone()
            };
            views.push(Matrix::new(y)?);
            xs.push(x);
            cs.push(c);
            ds.push(d);
        }
        let ds_out = assemble_dataset(views)?;
        Ok((
            ds_out,
            GroundTruth {
                x: xs,
                c: cs,
                d: ds,
                pve_view_c: self.truth.pve_view_c.clone(),
                pve_var_c: self.truth.pve_var_c.clone(),
                params: self.truth.params.clone(),
            },
        ))
    }
}

pub fn generate(spec: &SetupSpec) -> Result<(MultiViewDataset, GroundTruth)> {
    Design::new(spec.clone())?.generate(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ParamChoice {
    Truth,
    Select(SelectionConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub params: ParamChoice,
    pub fdr_level: f64,
    pub top_fraction: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { params: ParamChoice::Truth, fdr_level: 0.05, top_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub rep: u64,
    pub err_x: Vec<f64>,
    pub err_c: Vec<f64>,
    pub err_d: Vec<f64>,
    pub pve_view_abs_err: Vec<f64>,
    pub pve_var_abs_err_max: Vec<f64>,
    pub pve_var_abs_err_q3: Vec<f64>,
    pub pve_var_abs_err_median: Vec<f64>,
    /// `None` when the true variable PVEs are all equal.
    pub spearman: Vec<Option<f64>>,
    pub ndcg: Vec<f64>,
    pub ndcg_top: Vec<f64>,
    pub orthogonal_pair: bool,
    pub rho1: Option<f64>,
    pub params_correct: Option<bool>,
    pub params: NuisanceParams,
}

/// `‖est - truth‖² / ‖scale‖²` in Frobenius norm.
pub fn rel_err(est: &DMatrix<f64>, truth: &DMatrix<f64>, scale: &DMatrix<f64>) -> f64 {
    linalg::frobenius_sq(&(est - truth)) / linalg::frobenius_sq(scale)
}

/// Fit one replication with the chosen parameter source.
pub fn fit(ds: &MultiViewDataset, truth: &GroundTruth, cfg: &EstimatorConfig, rep_seed: u64) -> Result<DecompositionResult> {
    match &cfg.params {
        ParamChoice::Truth => {
            let signals = signal::recover_all(ds, Some(&truth.params.ranks), None)?;
            let model = gcca::sample_gcca(&signals)?;
            decompose_signals(&signals, &model, &truth.params)
        }
        ParamChoice::Select(sel) => {
            let mut sel = sel.clone();
            sel.seed = rep_seed;
            let s = nuisance::select_all(ds, &sel, &Overrides::default())?;
            decompose_signals(&s.signals, &s.model, &s.params)
        }
    }
}

pub fn replicate(design: &Design, rep: u64, cfg: &EstimatorConfig) -> Result<ReplicationMetrics> {
    let (ds, truth) = design.generate(rep)?;
    let rep_seed = rng::substream(design.spec.seed, &[rng::TAG_REPLICATION, rep, 1]).gen::<u64>();
    let res = fit(&ds, &truth, cfg, rep_seed)?;
    let k = res.views.len();
    let mut m = ReplicationMetrics {
        rep,
        err_x: Vec::with_capacity(k),
        err_c: Vec::with_capacity(k),
        err_d: Vec::with_capacity(k),
        pve_view_abs_err: Vec::with_capacity(k),
        pve_var_abs_err_max: Vec::with_capacity(k),
        pve_var_abs_err_q3: Vec::with_capacity(k),
        pve_var_abs_err_median: Vec::with_capacity(k),
        spearman: Vec::with_capacity(k),
        ndcg: Vec::with_capacity(k),
        ndcg_top: Vec::with_capacity(k),
        orthogonal_pair: false,
        rho1: None,
        params_correct: None,
        params: res.params.clone(),
    };
    for (v, view) in res.views.iter().enumerate() {
        let x = &truth.x[v];
        m.err_x.push(rel_err(&view.x_hat, x, x));
        m.err_c.push(rel_err(&view.c_hat, &truth.c[v], x));
        m.err_d.push(rel_err(&view.d_hat, &truth.d[v], x));
        m.pve_view_abs_err.push((view.pve_view_c - truth.pve_view_c[v]).abs());
        let mut errs: Vec<f64> = view
            .pve_var_c
            .iter()
            .zip(&truth.pve_var_c[v])
            .map(|(a, b)| (a - b).abs())
            .collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        m.pve_var_abs_err_max.push(*errs.last().unwrap());
        m.pve_var_abs_err_q3.push(stats::quantile_sorted(&errs, 0.75));
        m.pve_var_abs_err_median.push(stats::quantile_sorted(&errs, 0.5));
        let tv = &truth.pve_var_c[v];
        let q = evaluation::rank_quality(tv, &view.pve_var_c, cfg.top_fraction)?;
        let spread = tv.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - tv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        m.spearman.push((spread > 1e-12).then_some(q.spearman));
        m.ndcg.push(q.ndcg);
        m.ndcg_top.push(q.ndcg_top);
    }
    let scores: Vec<Option<DMatrix<f64>>> = res.views.iter().map(|v| evaluation::factor_scores(&v.d_hat, None).ok()).collect();
    m.orthogonal_pair = evaluation::orthogonal_pairs_from_scores(&scores, cfg.fdr_level)?.has_orthogonal_pair;
    m.rho1 = scores.iter().cloned().collect::<Option<Vec<_>>>().and_then(|b| evaluation::rho1_from_scores(&b).ok());
    if matches!(cfg.params, ParamChoice::Select(_)) {
        m.params_correct = Some(params_match(&res.params, &truth.params));
    }
    Ok(m)
}

/// Equality of every selected quantity (ranks, L, I0, r*, pair sets, signs).
pub fn params_match(a: &NuisanceParams, b: &NuisanceParams) -> bool {
    let norm = |p: &NuisanceParams| {
        p.stages
            .iter()
            .map(|(l, s)| {
                let (mut pos, mut zero) = (s.delta_pos.clone(), s.delta_zero.clone());
                pos.sort();
                zero.sort();
                (*l, pos, zero, s.sign)
            })
            .collect::<Vec<_>>()
    };
    a.ranks == b.ranks && a.l == b.l && a.i0 == b.i0 && a.r_star == b.r_star && norm(a) == norm(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(v: &[f64]) -> MeanSd {
        MeanSd { mean: stats::mean(v), sd: stats::std_dev(v) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub spec: SetupSpec,
    pub estimator: EstimatorConfig,
    pub reps: usize,
    pub true_pve_view_c: Vec<f64>,
    pub err_x: Vec<MeanSd>,
    pub err_c: Vec<MeanSd>,
    pub err_d: Vec<MeanSd>,
    pub pve_view_abs_err: Vec<MeanSd>,
    pub pve_var_abs_err_max: Vec<MeanSd>,
    pub pve_var_abs_err_q3: Vec<MeanSd>,
    pub pve_var_abs_err_median: Vec<MeanSd>,
    /// `None` for views whose true variable PVEs are all equal.
    pub spearman: Vec<Option<MeanSd>>,
    pub ndcg: Vec<MeanSd>,
    pub ndcg_top: Vec<MeanSd>,
    pub orthogonal_pair_rate: f64,
    pub rho1: Option<MeanSd>,
    pub params_accuracy: Option<f64>,
}

pub fn summarize(design: &Design, cfg: &EstimatorConfig, reps: &[ReplicationMetrics]) -> StudySummary {
    let k = design.model.views.len();
    let per_view = |f: &dyn Fn(&ReplicationMetrics) -> &Vec<f64>| -> Vec<MeanSd> {
        (0..k)
            .map(|v| MeanSd::of(&reps.iter().map(|r| f(r)[v]).collect::<Vec<_>>()))
            .collect()
    };
    let spearman = (0..k)
        .map(|v| {
            let vals: Vec<f64> = reps.iter().filter_map(|r| r.spearman[v]).collect();
            (!vals.is_empty()).then(|| MeanSd::of(&vals))
        })
        .collect();
    let rho: Vec<f64> = reps.iter().filter_map(|r| r.rho1).collect();
    let correct: Vec<bool> = reps.iter().filter_map(|r| r.params_correct).collect();
    StudySummary {
        spec: design.spec.clone(),
        estimator: cfg.clone(),
        reps: reps.len(),
        true_pve_view_c: design.truth.pve_view_c.clone(),
        err_x: per_view(&|r| &r.err_x),
        err_c: per_view(&|r| &r.err_c),
        err_d: per_view(&|r| &r.err_d),
        pve_view_abs_err: per_view(&|r| &r.pve_view_abs_err),
        pve_var_abs_err_max: per_view(&|r| &r.pve_var_abs_err_max),
        pve_var_abs_err_q3: per_view(&|r| &r.pve_var_abs_err_q3),
        pve_var_abs_err_median: per_view(&|r| &r.pve_var_abs_err_median),
        spearman,
        ndcg: per_view(&|r| &r.ndcg),
        ndcg_top: per_view(&|r| &r.ndcg_top),
        orthogonal_pair_rate: reps.iter().filter(|r| r.orthogonal_pair).count() as f64 / reps.len() as f64,
        rho1: (!rho.is_empty()).then(|| MeanSd::of(&rho)),
        params_accuracy: (!correct.is_empty())
            .then(|| correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64),
    }
}

/// Runs `reps` replications (indices `0..reps`) and aggregates them.
pub fn run_study(spec: &SetupSpec, reps: usize, cfg: &EstimatorConfig) -> Result<(StudySummary, Vec<ReplicationMetrics>)> {
    if reps < 1 {
        return Err(Error::Config("a study needs at least one replication".into()));
    }
    let design = Design::new(spec.clone())?;
    let per_rep = crate::par::map_indices(reps, |r| replicate(&design, r as u64, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok((summarize(&design, cfg, &per_rep), per_rep))
}

//! Common and distinctive source matrices from a GCCA model.
//!
//! For each stage in `I0` the common latent variable is `alpha * w`, where
//! `alpha` is the smallest root (of the requested sign) that makes one pair of
//! distinctive canonical variables orthogonal. Each view's common matrix is
//! the regression of its signal on its own canonical variables over `I0`,
//! evaluated at the common latent variables.

pub mod hierarchy;
pub mod population;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::gcca::{self, GccaModel};
use crate::linalg;
use crate::params::{all_pairs, NuisanceParams, Pair, StageParams};
use crate::signal::{self, FactorView, SignalEstimate};

/// Discriminants at or above this (negative) value on `I_Δ0` pairs are
/// rounding noise and clamp to zero.
pub const DELTA_ROUNDING: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCandidate {
    pub pair: Pair,
    /// Unclamped discriminant.
    pub delta_raw: f64,
    /// Discriminant after the set rule (`max(raw, 0)` on `I_Δ+`, 0 on `I_Δ0`).
    pub delta: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageAlpha {
    pub stage: usize,
    pub alpha: f64,
    pub chosen_pair: Pair,
    pub candidates: Vec<AlphaCandidate>,
}

/// Cosines of one stage: `wz[k] = cos(w, z_k)`, `zz[(j, k)] = cos(z_j, z_k)`.
#[derive(Debug, Clone)]
pub struct StageCosines {
    pub wz: Vec<f64>,
    pub zz: DMatrix<f64>,
}

impl StageCosines {
    pub fn from_model(model: &GccaModel, l: usize) -> StageCosines {
        let k = model.k();
        let wz = (0..k).map(|v| model.cos_wz(l, v)).collect();
        let mut zz = DMatrix::identity(k, k);
        for (a, b) in all_pairs(k) {
            let c = model.cos_zz(l, a, b);
            zz[(a, b)] = c;
            zz[(b, a)] = c;
        }
        StageCosines { wz, zz }
    }

    pub fn delta(&self, (j, k): Pair) -> f64 {
        let s = self.wz[j] + self.wz[k];
        s * s - 4.0 * self.zz[(j, k)]
    }
}

/// Unclamped discriminants for every pair `j < k` at stage `l`.
pub fn compute_deltas(model: &GccaModel, l: usize) -> Vec<(Pair, f64)> {
    let cos = StageCosines::from_model(model, l);
    all_pairs(model.k())
        .into_iter()
        .map(|p| (p, cos.delta(p)))
        .collect()
}

/// Candidate roots over `I_Δ+ ∪ I_Δ0`, pairs in lexicographic order.
pub fn alpha_candidates(cos: &StageCosines, stage: &StageParams) -> Vec<AlphaCandidate> {
    let mut pairs: Vec<(Pair, bool)> = stage
        .delta_pos
        .iter()
        .map(|&p| (p, true))
        .chain(stage.delta_zero.iter().map(|&p| (p, false)))
        .collect();
    pairs.sort();
    pairs
        .into_iter()
        .map(|(pair, positive)| {
            let raw = cos.delta(pair);
            let delta = if positive { raw.max(0.0) } else { 0.0 };
            AlphaCandidate {
                pair,
                delta_raw: raw,
                delta,
                alpha: 0.5 * (cos.wz[pair.0] + cos.wz[pair.1] - delta.sqrt()),
            }
        })
        .collect()
}

/// Smallest-magnitude candidate with the requested sign; ties keep the
/// lexicographically smallest pair.
pub fn pick_alpha(candidates: &[AlphaCandidate], sign: i8) -> Option<&AlphaCandidate> {
    let s = f64::from(sign);
    let mut best: Option<&AlphaCandidate> = None;
    for c in candidates {
        if c.alpha * s <= 0.0 {
            continue;
        }
        match best {
            Some(b) if c.alpha.abs() >= b.alpha.abs() => {}
            _ => best = Some(c),
        }
    }
    best
}

pub fn solve_alpha(model: &GccaModel, l: usize, stage: &StageParams) -> Result<StageAlpha> {
    let cos = StageCosines::from_model(model, l);
    let candidates = alpha_candidates(&cos, stage);
    if candidates.is_empty() {
        return Err(Error::Config(format!("no candidate pairs at stage {l}")));
    }
    let best = pick_alpha(&candidates, stage.sign)
        .ok_or(Error::SignSelection { stage: l })?
        .clone();
    Ok(StageAlpha {
        stage: l,
        alpha: best.alpha,
        chosen_pair: best.pair,
        candidates,
    })
}

/// Rows `h_k^(l)ᵀ` for `l` in `I0`; `|I0| x r_k`.
pub fn h_matrix(model: &GccaModel, k: usize, i0: &[usize]) -> DMatrix<f64> {
    let r = model.block_sizes[k];
    let mut h = DMatrix::zeros(i0.len(), r);
    for (row, &l) in i0.iter().enumerate() {
        h.set_row(row, &model.h_block(l, k).transpose().row(0));
    }
    h
}

/// Coefficient `Hᵀ [HHᵀ]⁺_{r*}` mapping common latent rows to view factors,
/// and the truncation rank actually used.
pub fn common_coefficient(model: &GccaModel, k: usize, i0: &[usize], r_star: usize) -> Result<(DMatrix<f64>, usize)> {
    if r_star > i0.len() {
        return Err(Error::Rank(format!(
            "r* = {r_star} for view {k} exceeds |I0| = {}",
            i0.len()
        )));
    }
    let h = h_matrix(model, k, i0);
    let gram = &h * h.transpose();
    let (g, used) = linalg::truncated_psd_pinv(&gram, r_star)?;
    Ok((h.transpose() * g, used))
}

#[derive(Debug, Clone)]
pub struct ViewDecomposition {
    pub x_hat: DMatrix<f64>,
    pub c_hat: DMatrix<f64>,
    pub d_hat: DMatrix<f64>,
    pub pve_view_c: f64,
    pub pve_var_c: Vec<f64>,
    pub r_star_used: usize,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub views: Vec<ViewDecomposition>,
    pub params: NuisanceParams,
    pub alphas: Vec<StageAlpha>,
    /// Rows `alpha^(l) w^(l)` for `l` in `I0`.
    pub common_latent: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DecompositionResult {
    pub fn i0(&self) -> &[usize] {
        &self.params.i0
    }
}

pub fn pve_view(c: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let den = linalg::frobenius_sq(x);
    if den > 0.0 {
        linalg::frobenius_sq(c) / den
    } else {
        0.0
    }
}

pub fn pve_variables(c: &DMatrix<f64>, x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let den = x.row(i).norm_squared();
            if den > 0.0 {
                c.row(i).norm_squared() / den
            } else {
                0.0
            }
        })
        .collect()
}

/// View-level and variable-level common PVE of every view.
pub fn pve(result: &DecompositionResult) -> (Vec<f64>, Vec<Vec<f64>>) {
    (
        result.views.iter().map(|v| v.pve_view_c).collect(),
        result.views.iter().map(|v| v.pve_var_c.clone()).collect(),
    )
}

/// Core construction from signals in factor form. `model` must have been
/// built from the scores of `factors`.
pub fn decompose_factors(
    x_hats: &[&DMatrix<f64>],
    factors: &[FactorView],
    model: &GccaModel,
    params: &NuisanceParams,
) -> Result<DecompositionResult> {
    let k = factors.len();
    if x_hats.len() != k || model.k() != k {
        return Err(Error::Arity("signals, factors and model disagree on K".into()));
    }
    params.validate(k)?;
    let w = model
        .w_scores
        .as_ref()
        .ok_or_else(|| Error::Config("decomposition needs sample scores".into()))?;
    let n = w.ncols();
    if let Some(&last) = params.i0.last() {
        if last >= model.stages() {
            return Err(Error::Config(format!(
                "I0 stage {last} beyond the {} available stages",
                model.stages()
            )));
        }
    }

    let mut alphas = Vec::with_capacity(params.i0.len());
    let mut latent = DMatrix::zeros(params.i0.len(), n);
    for (row, &l) in params.i0.iter().enumerate() {
        let sol = solve_alpha(model, l, &params.stages[&l])?;
        latent.set_row(row, &(w.row(l) * sol.alpha));
        alphas.push(sol);
    }

    let job = |v: usize| -> Result<ViewDecomposition> {
        let x_hat = x_hats[v].clone();
        let (c_hat, used) = if params.i0.is_empty() || factors[v].scores.nrows() == 0 {
            (DMatrix::zeros(x_hat.nrows(), n), 0)
        } else {
            let (coef, used) = common_coefficient(model, v, &params.i0, params.r_star[v])?;
            (&factors[v].loadings * (coef * &latent), used)
        };
        let d_hat = &x_hat - &c_hat;
        Ok(ViewDecomposition {
            pve_view_c: pve_view(&c_hat, &x_hat),
            pve_var_c: pve_variables(&c_hat, &x_hat),
            x_hat,
            c_hat,
            d_hat,
            r_star_used: used,
        })
    };
    let views = crate::par::map_indices(k, job)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(DecompositionResult {
        views,
        params: params.clone(),
        alphas,
        common_latent: latent,
        eigenvalues: model.eigenvalues.clone(),
        warnings: model.warnings.clone(),
    })
}

pub fn decompose_signals(
    signals: &[SignalEstimate],
    model: &GccaModel,
    params: &NuisanceParams,
) -> Result<DecompositionResult> {
    let x_hats: Vec<&DMatrix<f64>> = signals.iter().map(|s| &s.x_hat).collect();
    let factors: Vec<FactorView> = signals.iter().map(|s| s.factor_view()).collect();
    decompose_factors(&x_hats, &factors, model, params)
}

/// Decomposition with fully specified nuisance parameters.
pub fn decompose(ds: &MultiViewDataset, params: &NuisanceParams) -> Result<DecompositionResult> {
    params.validate(ds.k())?;
    let signals = signal::recover_all(ds, Some(&params.ranks), None)?;
    let model = gcca::sample_gcca(&signals)?;
    decompose_signals(&signals, &model, params)
}

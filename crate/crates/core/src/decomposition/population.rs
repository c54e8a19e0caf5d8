//! Exact (population) decomposition from covariance inputs.
//!
//! A view is written `x_k = B_k T_k g` where `g` is a latent vector with
//! covariance `Σ` and `T_k Σ T_kᵀ = I`, so `f_k = T_k g` are orthonormal
//! factors and `B_k` their loadings. Every population quantity is then a
//! linear map of `g`: the common part of view `k` is `B_k P_k g` and the
//! distinctive part `B_k (T_k - P_k) g`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{common_coefficient, solve_alpha, StageAlpha, StageCosines};
use crate::error::{Error, Result};
use crate::gcca::{self, GccaModel};
use crate::linalg;
use crate::params::{all_pairs, NuisanceParams, Provenance, StageParams};

/// Population discriminants with `|Δ|` at most this are treated as zero.
pub const DELTA_ZERO_TOL: f64 = 1e-8;
/// Population stages with `|alpha|` at most this carry no common part.
pub const ALPHA_ZERO_TOL: f64 = 1e-12;
/// Relative eigenvalue cutoff for the true `r*`.
pub const R_STAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PopulationView {
    /// `p x r` loadings.
    pub b: DMatrix<f64>,
    /// `r x m` map from the latent vector to orthonormal factors.
    pub t: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct PopulationModel {
    /// `m x m` latent covariance.
    pub sigma: DMatrix<f64>,
    pub views: Vec<PopulationView>,
}

impl PopulationModel {
    /// Views whose factors are consecutive blocks of `g` with covariance
    /// `cov_f` (diagonal blocks identity).
    pub fn from_factor_cov(cov_f: DMatrix<f64>, loadings: Vec<DMatrix<f64>>) -> Result<PopulationModel> {
        let m = cov_f.nrows();
        let total: usize = loadings.iter().map(|b| b.ncols()).sum();
        if total != m {
            return Err(Error::Shape(format!(
                "loadings have {total} factor columns, covariance is {m}x{m}"
            )));
        }
        let mut views = Vec::with_capacity(loadings.len());
        let mut off = 0;
        for b in loadings {
            let r = b.ncols();
            let mut t = DMatrix::zeros(r, m);
            for i in 0..r {
                t[(i, off + i)] = 1.0;
            }
            off += r;
            views.push(PopulationView { b, t });
        }
        Ok(PopulationModel { sigma: cov_f, views })
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.t.nrows()).collect()
    }

    pub fn stacked_t(&self) -> DMatrix<f64> {
        let m = self.sigma.nrows();
        let total: usize = self.block_sizes().iter().sum();
        let mut out = DMatrix::zeros(total, m);
        let mut off = 0;
        for v in &self.views {
            out.view_mut((off, 0), (v.t.nrows(), m)).copy_from(&v.t);
            off += v.t.nrows();
        }
        out
    }

    pub fn factor_cov(&self) -> DMatrix<f64> {
        let t = self.stacked_t();
        let c = &t * &self.sigma * t.transpose();
        (&c + c.transpose()) * 0.5
    }
}

#[derive(Debug, Clone)]
pub struct PopulationDecomposition {
    pub gcca: GccaModel,
    pub params: NuisanceParams,
    pub alphas: Vec<StageAlpha>,
    /// `r_k x m` coefficients: common part of view `k` is `B_k P_k g`.
    pub common_coef: Vec<DMatrix<f64>>,
    pub pve_view_c: Vec<f64>,
    pub pve_var_c: Vec<Vec<f64>>,
}

impl PopulationDecomposition {
    /// `r_k x m` distinctive coefficient `T_k - P_k`.
    pub fn distinctive_coef(&self, pm: &PopulationModel, k: usize) -> DMatrix<f64> {
        &pm.views[k].t - &self.common_coef[k]
    }
}

/// True nuisance parameters of an exact model: all stages up to `L`, pairs
/// split by the sign of `Δ`, the minimal-magnitude root (negative on a
/// magnitude tie) and `r*` as the numerical rank of `HHᵀ`.
pub fn true_params(model: &GccaModel) -> Result<NuisanceParams> {
    let k = model.k();
    let mut stages = BTreeMap::new();
    let mut i0 = Vec::new();
    for l in 0..model.stopping_index {
        let cos = StageCosines::from_model(model, l);
        let mut st = StageParams { delta_pos: Vec::new(), delta_zero: Vec::new(), sign: 1 };
        for p in all_pairs(k) {
            if cos.delta(p) > DELTA_ZERO_TOL {
                st.delta_pos.push(p);
            } else {
                st.delta_zero.push(p);
            }
        }
        let cands = super::alpha_candidates(&cos, &st);
        let best = cands
            .iter()
            .map(|c| c.alpha)
            .min_by(|a, b| {
                a.abs()
                    .partial_cmp(&b.abs())
                    .unwrap()
                    .then(a.partial_cmp(b).unwrap())
            })
            .unwrap_or(0.0);
        // A positive/negative magnitude tie resolves to the negative root.
        let neg_tie = cands
            .iter()
            .any(|c| c.alpha < 0.0 && (c.alpha.abs() - best.abs()).abs() <= ALPHA_ZERO_TOL);
        st.sign = if best < 0.0 || (neg_tie && best.abs() > ALPHA_ZERO_TOL) { -1 } else { 1 };
        if best.abs() > ALPHA_ZERO_TOL {
            i0.push(l);
        }
        stages.insert(l, st);
    }
    stages.retain(|l, _| i0.contains(l));
    let mut r_star = Vec::with_capacity(k);
    for v in 0..k {
        if i0.is_empty() {
            r_star.push(0);
            continue;
        }
        let h = super::h_matrix(model, v, &i0);
        let eig = linalg::sym_eigen(&(&h * h.transpose()))?;
        let top = eig.values.first().copied().unwrap_or(0.0);
        r_star.push(eig.values.iter().filter(|&&e| e > R_STAR_TOL * top.max(1e-300)).count());
    }
    Ok(NuisanceParams {
        ranks: model.block_sizes.clone(),
        l: model.stopping_index,
        i0,
        r_star,
        stages,
        alpha_level: None,
        provenance: Provenance::Truth,
    })
}

/// Exact decomposition with the true nuisance parameters, or with `params`
/// when supplied.
pub fn population_decompose(pm: &PopulationModel, params: Option<&NuisanceParams>) -> Result<PopulationDecomposition> {
    let block_sizes = pm.block_sizes();
    let model = gcca::population_gcca(&pm.factor_cov(), &block_sizes)?;
    let params = match params {
        Some(p) => p.clone(),
        None => true_params(&model)?,
    };
    params.validate(pm.views.len())?;

    let m = pm.sigma.nrows();
    let t_stack = pm.stacked_t();
    let mut alphas = Vec::new();
    let mut aw = DMatrix::zeros(params.i0.len(), m);
    for (row, &l) in params.i0.iter().enumerate() {
        let sol = solve_alpha(&model, l, &params.stages[&l])?;
        let lam = model.eigenvalues[l];
        let eta = model.eigenvectors.column(l);
        let w_row = eta.transpose() * &t_stack / lam.sqrt();
        aw.set_row(row, &(w_row * sol.alpha));
        alphas.push(sol);
    }

    let mut common_coef = Vec::new();
    let mut pve_view_c = Vec::new();
    let mut pve_var_c = Vec::new();
    for (k, view) in pm.views.iter().enumerate() {
        let r = view.t.nrows();
        let p_k = if params.i0.is_empty() || r == 0 {
            DMatrix::zeros(r, m)
        } else {
            let (coef, _) = common_coefficient(&model, k, &params.i0, params.r_star[k])?;
            coef * &aw
        };
        let c_cov = &view.b * (&p_k * &pm.sigma * p_k.transpose()) * view.b.transpose();
        let x_cov = &view.b * (&view.t * &pm.sigma * view.t.transpose()) * view.b.transpose();
        let num = c_cov.trace();
        let den = x_cov.trace();
        pve_view_c.push(if den > 0.0 { num / den } else { 0.0 });
        pve_var_c.push(
            (0..view.b.nrows())
                .map(|i| {
                    let d = x_cov[(i, i)];
                    if d > 0.0 {
                        c_cov[(i, i)] / d
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
        common_coef.push(p_k);
    }
    Ok(PopulationDecomposition {
        gcca: model,
        params,
        alphas,
        common_coef,
        pve_view_c,
        pve_var_c,
    })
}

/// Model of the distinctive parts, ready for the next hierarchy level.
/// Each view keeps the directions where its distinctive covariance is
/// nonzero.
pub fn next_level(pm: &PopulationModel, dec: &PopulationDecomposition) -> Result<PopulationModel> {
    let mut views = Vec::with_capacity(pm.views.len());
    for (k, view) in pm.views.iter().enumerate() {
        let resid = dec.distinctive_coef(pm, k);
        let cov = &resid * &pm.sigma * resid.transpose();
        let eig = linalg::sym_eigen(&cov)?;
        let top = eig.values.first().copied().unwrap_or(0.0);
        let keep = eig.values.iter().filter(|&&e| e > R_STAR_TOL * top.max(1e-300)).count();
        let e = eig.vectors.columns(0, keep).into_owned();
        let d = &eig.values[..keep];
        let inv_root = DVector::from_iterator(keep, d.iter().map(|v| 1.0 / v.sqrt()));
        let root = DVector::from_iterator(keep, d.iter().map(|v| v.sqrt()));
        let t = DMatrix::from_diagonal(&inv_root) * e.transpose() * &resid;
        let b = &view.b * &e * DMatrix::from_diagonal(&root);
        views.push(PopulationView { b, t });
    }
    Ok(PopulationModel { sigma: pm.sigma.clone(), views })
}

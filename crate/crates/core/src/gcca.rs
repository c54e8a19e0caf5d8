//! Carroll's GCCA in the covariance inner-product space.
//!
//! Stage `l` is the `l`-th eigenpair of the stacked-factor covariance. Its
//! eigenvector splits into per-view blocks `eta_k`; the canonical variable of
//! view `k` is `(eta_k/|eta_k|)ᵀ f_k` and the auxiliary variable is
//! `lambda^{-1/2} etaᵀ f`. Stages are 0-based throughout the code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::signal::SignalEstimate;

/// Eigenvalues within this distance above 1 do not count towards the
/// stopping index. Exact fixtures produce eigenvalues of `1 + 1e-9`.
pub const STOPPING_TOLERANCE: f64 = 1e-6;

/// Top eigenvalues closer than this are reported as a degenerate spectrum.
pub const TIE_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GccaModel {
    pub block_sizes: Vec<usize>,
    /// Stacked-factor covariance (exact or `F Fᵀ/n`).
    pub cov: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors `eta^(l)`.
    pub eigenvectors: DMatrix<f64>,
    /// `eta_norms[(k, l)] = |eta_k^(l)|`.
    pub eta_norms: DMatrix<f64>,
    /// Row `l` is `w^(l)`; sample mode only.
    pub w_scores: Option<DMatrix<f64>>,
    /// Per view, row `l` is `z_k^(l)`; sample mode only.
    pub z_scores: Option<Vec<DMatrix<f64>>>,
    pub stopping_index: usize,
    pub rank: usize,
    pub warnings: Vec<String>,
}

/// Number of eigenvalues exceeding 1 (by more than the tolerance).
pub fn stopping_index(eigenvalues: &[f64]) -> usize {
    eigenvalues
        .iter()
        .rposition(|&l| l > 1.0 + STOPPING_TOLERANCE)
        .map(|i| i + 1)
        .unwrap_or(0)
}

fn offsets(block_sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(block_sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for &r in block_sizes {
        acc += r;
        out.push(acc);
    }
    out
}

impl GccaModel {
    pub fn k(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn stages(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> Option<usize> {
        self.w_scores.as_ref().map(|w| w.ncols())
    }

    pub fn offsets(&self) -> Vec<usize> {
        offsets(&self.block_sizes)
    }

    /// `eta_k^(l)` as a column vector.
    pub fn eta_block(&self, l: usize, k: usize) -> DMatrix<f64> {
        let off = self.offsets();
        self.eigenvectors
            .view((off[k], l), (self.block_sizes[k], 1))
            .into_owned()
    }

    /// Unit-norm `h_k^(l) = eta_k/|eta_k|`, zero when the block vanishes.
    pub fn h_block(&self, l: usize, k: usize) -> DMatrix<f64> {
        let nrm = self.eta_norms[(k, l)];
        let eta = self.eta_block(l, k);
        if nrm > 0.0 {
            eta / nrm
        } else {
            eta * 0.0
        }
    }

    /// `cos(w^(l), z_k^(l))`.
    pub fn cos_wz(&self, l: usize, k: usize) -> f64 {
        match (&self.w_scores, &self.z_scores) {
            (Some(w), Some(z)) => {
                let n = w.ncols() as f64;
                w.row(l).dot(&z[k].row(l)) / n
            }
            _ => self.eigenvalues[l].max(0.0).sqrt() * self.eta_norms[(k, l)],
        }
    }

    /// `cos(z_j^(l), z_k^(l))`.
    pub fn cos_zz(&self, l: usize, j: usize, k: usize) -> f64 {
        match &self.z_scores {
            Some(z) => {
                let n = z[j].ncols() as f64;
                z[j].row(l).dot(&z[k].row(l)) / n
            }
            None => {
                let off = self.offsets();
                let block = self.cov.view(
                    (off[j], off[k]),
                    (self.block_sizes[j], self.block_sizes[k]),
                );
                (self.h_block(l, j).transpose() * block * self.h_block(l, k))[(0, 0)]
            }
        }
    }
}

fn eigen_model(cov: DMatrix<f64>, block_sizes: Vec<usize>) -> Result<GccaModel> {
    let eig = linalg::sym_eigen(&cov)?;
    let dim = cov.nrows();
    let top = eig.values.first().copied().unwrap_or(0.0);
    let cut = linalg::rank_cutoff(dim, dim, top);
    let rank = eig.values.iter().filter(|&&v| v > cut && v > 0.0).count();
    let off = offsets(&block_sizes);
    let k = block_sizes.len();
    let mut eta_norms = DMatrix::zeros(k, dim);
    for l in 0..dim {
        for b in 0..k {
            let seg = eig.vectors.view((off[b], l), (block_sizes[b], 1));
            eta_norms[(b, l)] = seg.norm();
        }
    }
    let stop = stopping_index(&eig.values);
    let mut warnings = Vec::new();
    for l in 0..stop {
        if l + 1 < eig.values.len() && eig.values[l] - eig.values[l + 1] < TIE_GAP {
            warnings.push(format!(
                "DegenerateSpectrum: eigenvalues {} and {} differ by less than {TIE_GAP:e}",
                l,
                l + 1
            ));
        }
    }
    Ok(GccaModel {
        block_sizes,
        cov,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        eta_norms,
        w_scores: None,
        z_scores: None,
        stopping_index: stop,
        rank,
        warnings,
    })
}

/// GCCA on an exact covariance of the stacked orthonormal factors.
pub fn population_gcca(cov_f: &DMatrix<f64>, block_sizes: &[usize]) -> Result<GccaModel> {
    let dim: usize = block_sizes.iter().sum();
    if cov_f.nrows() != dim || cov_f.ncols() != dim {
        return Err(Error::Shape(format!(
            "covariance is {}x{} but blocks sum to {dim}",
            cov_f.nrows(),
            cov_f.ncols()
        )));
    }
    if (cov_f - cov_f.transpose()).amax() > 1e-10 {
        return Err(Error::Numerics("covariance is not symmetric".into()));
    }
    let off = offsets(block_sizes);
    for (b, &r) in block_sizes.iter().enumerate() {
        let diag = cov_f.view((off[b], off[b]), (r, r));
        if (diag - DMatrix::<f64>::identity(r, r)).amax() > 1e-8 {
            return Err(Error::Shape(format!(
                "diagonal block {b} is not the identity"
            )));
        }
    }
    let model = eigen_model(cov_f.clone(), block_sizes.to_vec())?;
    let top = model.eigenvalues.first().copied().unwrap_or(0.0);
    if let Some(&min) = model.eigenvalues.last() {
        if min < -1e-8 * top.abs() {
            return Err(Error::Numerics(format!(
                "covariance is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
    }
    Ok(model)
}

/// GCCA on sample factor scores (one `r_k x n` block per view).
pub fn sample_gcca_from_scores(scores: &[&DMatrix<f64>]) -> Result<GccaModel> {
    if scores.is_empty() {
        return Err(Error::Arity("GCCA needs at least one view".into()));
    }
    let n = scores[0].ncols();
    if scores.iter().any(|s| s.ncols() != n) {
        return Err(Error::Shape("factor scores disagree on n".into()));
    }
    let block_sizes: Vec<usize> = scores.iter().map(|s| s.nrows()).collect();
    let dim: usize = block_sizes.iter().sum();
    let mut f = DMatrix::zeros(dim, n);
    let off = offsets(&block_sizes);
    for (k, s) in scores.iter().enumerate() {
        f.view_mut((off[k], 0), (block_sizes[k], n)).copy_from(*s);
    }
    let nf = n as f64;
    let cov = &f * f.transpose() / nf;
    let mut model = eigen_model(cov, block_sizes)?;

    let top = model.eigenvalues.first().copied().unwrap_or(0.0);
    let cut = linalg::rank_cutoff(dim, dim, top);
    let mut w = DMatrix::zeros(dim, n);
    let mut z: Vec<DMatrix<f64>> = (0..scores.len()).map(|_| DMatrix::zeros(dim, n)).collect();
    for l in 0..dim {
        let lam = model.eigenvalues[l];
        if lam > cut && lam > 0.0 {
            let eta = model.eigenvectors.column(l);
            let row = (eta.transpose() * &f) / lam.sqrt();
            w.set_row(l, &row);
        }
        for (k, s) in scores.iter().enumerate() {
            let nrm = model.eta_norms[(k, l)];
            if nrm > 0.0 {
                let h = model.eigenvectors.view((off[k], l), (model.block_sizes[k], 1)) / nrm;
                z[k].set_row(l, &(h.transpose() * *s).row(0));
            }
        }
    }
    model.w_scores = Some(w);
    model.z_scores = Some(z);
    Ok(model)
}

pub fn sample_gcca(signals: &[SignalEstimate]) -> Result<GccaModel> {
    let scores: Vec<&DMatrix<f64>> = signals.iter().map(|s| &s.factor_scores).collect();
    sample_gcca_from_scores(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopping_index_examples() {
        assert_eq!(stopping_index(&[3.0, 2.8, 2.25, 1.5, 1.0, 1.0]), 4);
        assert_eq!(stopping_index(&[1.0, 1.0, 1.0]), 0);
        let c = 50f64.to_radians().cos();
        assert_eq!(stopping_index(&[1.0 + 2.0 * c, 1.0 - c, 1.0 - c]), 1);
    }

    #[test]
    fn identity_covariance() {
        let m = population_gcca(&DMatrix::identity(3, 3), &[1, 1, 1]).unwrap();
        assert_eq!(m.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert_eq!(m.stopping_index, 0);
    }

    #[test]
    fn compound_symmetry() {
        let c = 50f64.to_radians().cos();
        let cov = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { c });
        let m = population_gcca(&cov, &[1, 1, 1]).unwrap();
        assert!((m.eigenvalues[0] - (1.0 + 2.0 * c)).abs() < 1e-12);
        assert!((m.eigenvalues[1] - (1.0 - c)).abs() < 1e-12);
        assert_eq!(m.stopping_index, 1);
        let s = 1.0 / 3f64.sqrt();
        for k in 0..3 {
            assert!((m.eigenvectors[(k, 0)] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_blocks() {
        let cov = DMatrix::from_element(3, 3, 0.5);
        assert_eq!(population_gcca(&cov, &[1, 1, 1]).unwrap_err().kind(), "ShapeError");
        assert_eq!(population_gcca(&DMatrix::identity(3, 3), &[1, 1]).unwrap_err().kind(), "ShapeError");
        let mut neg = DMatrix::identity(2, 2);
        neg[(0, 1)] = 2.0;
        neg[(1, 0)] = 2.0;
        assert_eq!(population_gcca(&neg, &[1, 1]).unwrap_err().kind(), "NumericsError");
    }

    #[test]
    fn identical_views() {
        let f: DMatrix<f64> = DMatrix::from_fn(1, 6, |_, j| [1.0, -1.0, 2.0, -2.0, 0.5, -0.5][j]);
        let f = &f / (f.norm_squared() / 6.0).sqrt();
        let m = sample_gcca_from_scores(&[&f, &f]).unwrap();
        assert!((m.eigenvalues[0] - 2.0).abs() < 1e-12);
        let w = m.w_scores.as_ref().unwrap();
        let z = m.z_scores.as_ref().unwrap();
        assert!((w.row(0) - z[0].row(0)).amax() < 1e-12);
        assert!((z[1].row(0) - z[0].row(0)).amax() < 1e-12);
    }
}

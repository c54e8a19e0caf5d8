//! Dense linear-algebra helpers shared by the estimators.
//!
//! Every factorization here is returned in a canonical form: values sorted in
//! nonincreasing order and each singular/eigen vector sign-fixed so that its
//! entry of largest magnitude is positive (ties go to the lowest index). This
//! makes downstream results independent of backend sign choices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin singular value decomposition `m = u * diag(s) * vt`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

impl Svd {
    pub fn rank_cutoff(&self) -> f64 {
        let top = self.s.first().copied().unwrap_or(0.0);
        rank_cutoff(self.u.nrows(), self.vt.ncols(), top)
    }

    /// Number of singular values above the numerical-rank cutoff.
    pub fn numerical_rank(&self) -> usize {
        let cut = self.rank_cutoff();
        self.s.iter().filter(|&&v| v > cut && v > 0.0).count()
    }
}

/// Numerical-rank cutoff `max(rows, cols) * eps * top` where `top` is the
/// leading singular value or eigenvalue of the matrix in question.
pub fn rank_cutoff(rows: usize, cols: usize, top: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * top.abs()
}

/// Index of the entry of largest magnitude, lowest index on ties.
fn pivot_index<'a>(values: impl Iterator<Item = &'a f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.enumerate() {
        let a = v.abs();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((i, a)),
        }
    }
    best.filter(|&(_, a)| a > 0.0).map(|(i, _)| i)
}

pub fn thin_svd(m: &DMatrix<f64>) -> Result<Svd> {
    let (p, n) = m.shape();
    if p == 0 || n == 0 {
        return Err(Error::EmptyInput("cannot factor an empty matrix".into()));
    }
    let svd = m.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerics("SVD did not return left vectors".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Numerics("SVD did not return right vectors".into()))?;
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut su = DMatrix::zeros(p, k);
    let mut svt = DMatrix::zeros(k, n);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let sv = svd.singular_values[src];
        if !sv.is_finite() {
            return Err(Error::Numerics("non-finite singular value".into()));
        }
        s.push(sv);
        let col = u.column(src);
        let flip = match pivot_index(col.iter()) {
            Some(i) => col[i] < 0.0,
            None => false,
        };
        let sign = if flip { -1.0 } else { 1.0 };
        su.set_column(dst, &(col * sign));
        svt.set_row(dst, &(vt.row(src) * sign));
    }
    Ok(Svd { u: su, s, vt: svt })
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Symmetric eigendecomposition with eigenvalues nonincreasing and the
/// eigenvectors (columns) sign-normalized.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymEigen> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::Shape(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if d == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut vectors = DMatrix::zeros(d, d);
    let mut values = Vec::with_capacity(d);
    for (dst, &src) in order.iter().enumerate() {
        let ev = eig.eigenvalues[src];
        if !ev.is_finite() {
            return Err(Error::Numerics("non-finite eigenvalue".into()));
        }
        values.push(ev);
        let col = eig.eigenvectors.column(src);
        let flip = pivot_index(col.iter()).map(|i| col[i] < 0.0).unwrap_or(false);
        vectors.set_column(dst, &(if flip { -col } else { col.into_owned() }));
    }
    Ok(SymEigen { values, vectors })
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix restricted to its
/// top `keep` eigenpairs (eigenvalues below the rank cutoff are dropped).
pub fn truncated_psd_pinv(m: &DMatrix<f64>, keep: usize) -> Result<(DMatrix<f64>, usize)> {
    let eig = sym_eigen(m)?;
    let d = m.nrows();
    let cut = rank_cutoff(d, d, eig.values.first().copied().unwrap_or(0.0));
    let rank = eig.values.iter().filter(|&&v| v > cut && v > 0.0).count();
    let used = keep.min(rank);
    let mut out = DMatrix::zeros(d, d);
    for i in 0..used {
        let v = eig.vectors.column(i);
        out += (&v * v.transpose()) / eig.values[i];
    }
    Ok((out, used))
}

/// Numerical rank of a symmetric PSD matrix.
pub fn psd_rank(m: &DMatrix<f64>) -> Result<usize> {
    let eig = sym_eigen(m)?;
    let d = m.nrows();
    let cut = rank_cutoff(d, d, eig.values.first().copied().unwrap_or(0.0));
    Ok(eig.values.iter().filter(|&&v| v > cut && v > 0.0).count())
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Largest absolute deviation of `mᵀm` from the identity.
pub fn orthonormality_error(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Symmetric square root `m^{1/2}` of a PSD matrix; tiny negative
/// eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m)?;
    let scale = eig.values.first().copied().unwrap_or(0.0).abs().max(1.0);
    if let Some(&min) = eig.values.last() {
        if min < -1e-8 * scale {
            return Err(Error::Numerics(format!(
                "matrix is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
    }
    let roots = DVector::from_iterator(eig.values.len(), eig.values.iter().map(|v| v.max(0.0).sqrt()));
    Ok(&eig.vectors * DMatrix::from_diagonal(&roots) * eig.vectors.transpose())
}

/// Spearman-style average ranks (1-based) with ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of two equal-length slices; `None` when either side
/// has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

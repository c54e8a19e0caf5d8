//! Per-view signal recovery: soft-thresholded SVD, edge-distribution rank
//! selection, and orthonormal factor scores.

use nalgebra::{DMatrix, DVector};

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Svd};

/// Denoised signal of one view together with its singular system.
#[derive(Debug, Clone)]
pub struct SignalEstimate {
    /// `p x n` denoised matrix.
    pub x_hat: DMatrix<f64>,
    pub rank: usize,
    /// `p x rank`, orthonormal columns.
    pub left_vectors: DMatrix<f64>,
    /// `rank x n`, orthonormal rows.
    pub right_vectors: DMatrix<f64>,
    /// Shrunken singular values of `x_hat`.
    pub singular_values: Vec<f64>,
    /// `singular_values^2 / n`.
    pub eigenvalues: Vec<f64>,
    /// `rank x n`; rows with a zero eigenvalue are zero.
    pub factor_scores: DMatrix<f64>,
    pub tau: f64,
}

/// Loadings and factor scores with `x = loadings * scores`, the form consumed
/// by GCCA and the common-source construction. Kept separate from
/// [`SignalEstimate`] so a factor basis can be rotated independently.
#[derive(Debug, Clone)]
pub struct FactorView {
    pub loadings: DMatrix<f64>,
    pub scores: DMatrix<f64>,
}

impl SignalEstimate {
    pub fn p(&self) -> usize {
        self.x_hat.nrows()
    }

    pub fn n(&self) -> usize {
        self.x_hat.ncols()
    }

    /// `loadings = U diag(sqrt(lambda))`, `scores = F`.
    pub fn factor_view(&self) -> FactorView {
        let roots = DVector::from_iterator(self.rank, self.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
        FactorView {
            loadings: &self.left_vectors * DMatrix::from_diagonal(&roots),
            scores: self.factor_scores.clone(),
        }
    }

    /// Rank-0 estimate: the whole view is treated as noise.
    pub fn zero(p: usize, n: usize) -> SignalEstimate {
        SignalEstimate {
            x_hat: DMatrix::zeros(p, n),
            rank: 0,
            left_vectors: DMatrix::zeros(p, 0),
            right_vectors: DMatrix::zeros(0, n),
            singular_values: Vec::new(),
            eigenvalues: Vec::new(),
            factor_scores: DMatrix::zeros(0, n),
            tau: 0.0,
        }
    }
}

fn check_rank(p: usize, n: usize, r: usize) -> Result<()> {
    if r == 0 || r >= p.min(n) {
        return Err(Error::Rank(format!(
            "rank {r} outside [1, {}) for a {p}x{n} view",
            p.min(n)
        )));
    }
    let (pp, nn, rr) = (p as i128, n as i128, r as i128);
    if nn * pp - nn * rr - pp * rr <= 0 {
        return Err(Error::Rank(format!(
            "rank {r} leaves no residual degrees of freedom for a {p}x{n} view"
        )));
    }
    Ok(())
}

pub fn soft_threshold_svd(y: &DMatrix<f64>, r: usize) -> Result<SignalEstimate> {
    let (p, n) = y.shape();
    check_rank(p, n, r)?;
    let svd = linalg::thin_svd(y)?;
    soft_threshold_from_svd(&svd, p, n, r)
}

/// Same as [`soft_threshold_svd`] but reuses a precomputed SVD of `y`.
pub fn soft_threshold_from_svd(svd: &Svd, p: usize, n: usize, r: usize) -> Result<SignalEstimate> {
    check_rank(p, n, r)?;
    let tail: f64 = svd.s[r..].iter().map(|s| s * s).sum();
    let tau = tail / (n * p - n * r - p * r) as f64;
    let shrunk: Vec<f64> = svd.s[..r]
        .iter()
        .map(|s| (s * s - tau * p as f64).max(0.0).sqrt())
        .collect();
    Ok(assemble(svd, p, n, r, shrunk, tau))
}

/// Truncated SVD without shrinkage. Used for inner hierarchy levels, where
/// the input is already a denoised matrix.
pub fn exact_truncation(m: &DMatrix<f64>, r: usize) -> Result<SignalEstimate> {
    let (p, n) = m.shape();
    if r == 0 {
        return Ok(SignalEstimate::zero(p, n));
    }
    exact_truncation_from_svd(&linalg::thin_svd(m)?, p, n, r)
}

pub fn exact_truncation_from_svd(svd: &Svd, p: usize, n: usize, r: usize) -> Result<SignalEstimate> {
    if r == 0 {
        return Ok(SignalEstimate::zero(p, n));
    }
    if r > svd.s.len() {
        return Err(Error::Rank(format!("rank {r} exceeds min(p, n) = {}", svd.s.len())));
    }
    let kept = svd.s[..r].to_vec();
    Ok(assemble(svd, p, n, r, kept, 0.0))
}

fn assemble(svd: &Svd, p: usize, n: usize, r: usize, sv: Vec<f64>, tau: f64) -> SignalEstimate {
    let u1 = svd.u.columns(0, r).into_owned();
    let v1t = svd.vt.rows(0, r).into_owned();
    let eigenvalues: Vec<f64> = sv.iter().map(|s| s * s / n as f64).collect();
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let cut = linalg::rank_cutoff(p, n, top);
    let sqrt_n = (n as f64).sqrt();
    let mut factor_scores = DMatrix::zeros(r, n);
    for (l, &lam) in eigenvalues.iter().enumerate() {
        if lam > cut && lam > 0.0 {
            factor_scores.set_row(l, &(v1t.row(l) * sqrt_n));
        }
    }
    let x_hat = &u1 * DMatrix::from_diagonal(&DVector::from_vec(sv.clone())) * &v1t;
    SignalEstimate {
        x_hat,
        rank: r,
        left_vectors: u1,
        right_vectors: v1t,
        singular_values: sv,
        eigenvalues,
        factor_scores,
        tau,
    }
}

pub fn default_k_max(p: usize, n: usize) -> usize {
    20.min(p.min(n) / 4)
}

/// Edge-distribution rank estimate from the eigenvalues of `YYᵀ/n`.
pub fn select_rank_ed(y: &DMatrix<f64>, k_max: usize) -> Result<usize> {
    let (p, n) = y.shape();
    check_k_max(p, n, k_max)?;
    let s = linalg::singular_values(y);
    let eig: Vec<f64> = s.iter().map(|v| v * v / n as f64).collect();
    Ok(ed_from_eigenvalues(&eig, k_max))
}

fn check_k_max(p: usize, n: usize, k_max: usize) -> Result<()> {
    if k_max + 5 > p.min(n) {
        return Err(Error::Rank(format!(
            "k_max = {k_max} needs min(p, n) >= {}, view is {p}x{n}",
            k_max + 5
        )));
    }
    Ok(())
}

/// The ED iteration on nonincreasing eigenvalues (0-based slice, 1-based
/// math). Needs `eig.len() >= k_max + 5`.
pub fn ed_from_eigenvalues(eig: &[f64], k_max: usize) -> usize {
    let lam = |i: usize| eig[i - 1];
    let mut j = k_max + 1;
    let mut r_hat = usize::MAX;
    for _ in 0..10 {
        // OLS of lambda_j..lambda_{j+4} on (j-1)^{2/3}..(j+3)^{2/3}.
        let xs: Vec<f64> = (0..5).map(|i| ((j - 1 + i) as f64).powf(2.0 / 3.0)).collect();
        let ys: Vec<f64> = (0..5).map(|i| lam(j + i)).collect();
        let mx = xs.iter().sum::<f64>() / 5.0;
        let my = ys.iter().sum::<f64>() / 5.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let delta = 2.0 * (sxy / sxx).abs();
        let next = (1..=k_max)
            .rev()
            .find(|&l| lam(l) - lam(l + 1) >= delta)
            .unwrap_or(0);
        if next == r_hat {
            break;
        }
        r_hat = next;
        j = r_hat + 1;
    }
    r_hat
}

/// Rank for an already-denoised matrix: the ED estimate capped at the
/// numerical rank, or the numerical rank alone when the view is too small
/// for ED.
pub fn inner_level_rank(m: &DMatrix<f64>) -> Result<usize> {
    let (p, n) = m.shape();
    let s = linalg::singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    let cut = linalg::rank_cutoff(p, n, top);
    let numerical = s.iter().filter(|&&v| v > cut && v > 0.0).count();
    let k_max = default_k_max(p, n);
    if k_max == 0 || check_k_max(p, n, k_max).is_err() {
        return Ok(numerical);
    }
    let eig: Vec<f64> = s.iter().map(|v| v * v / n as f64).collect();
    Ok(ed_from_eigenvalues(&eig, k_max).min(numerical))
}

/// Signal recovery for a single view: supplied rank or ED selection.
pub fn recover_view(y: &DMatrix<f64>, rank: Option<usize>, k_max: Option<usize>) -> Result<SignalEstimate> {
    let (p, n) = y.shape();
    let svd = linalg::thin_svd(y)?;
    let r = match rank {
        Some(r) => r,
        None => {
            let k_max = k_max.unwrap_or_else(|| default_k_max(p, n));
            check_k_max(p, n, k_max)?;
            let eig: Vec<f64> = svd.s.iter().map(|v| v * v / n as f64).collect();
            ed_from_eigenvalues(&eig, k_max)
        }
    };
    if r == 0 {
        return Ok(SignalEstimate::zero(p, n));
    }
    soft_threshold_from_svd(&svd, p, n, r)
}

pub fn recover_all(
    ds: &MultiViewDataset,
    ranks: Option<&[usize]>,
    k_max: Option<usize>,
) -> Result<Vec<SignalEstimate>> {
    if let Some(r) = ranks {
        if r.len() != ds.k() {
            return Err(Error::Arity(format!(
                "{} ranks supplied for {} views",
                r.len(),
                ds.k()
            )));
        }
    }
    let job = |k: usize| recover_view(&ds.views[k].values, ranks.map(|r| r[k]), k_max);
    crate::par::map_indices(ds.k(), job).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_low_rank_is_recovered() {
        let a = DMatrix::from_fn(6, 2, |i, j| (i as f64 + 1.0) * (j as f64 + 0.5) - 2.0 * j as f64);
        let b = DMatrix::from_fn(2, 9, |i, j| ((i * 9 + j) as f64).sin());
        let y = &a * &b;
        let est = soft_threshold_svd(&y, 2).unwrap();
        assert!(est.tau.abs() < 1e-20);
        assert!((&est.x_hat - &y).amax() < 1e-12);
        let f = &est.factor_scores;
        let gram = f * f.transpose() / 9.0;
        assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn zero_input_gives_zero_signal() {
        let est = soft_threshold_svd(&DMatrix::zeros(5, 7), 2).unwrap();
        assert_eq!(est.x_hat, DMatrix::zeros(5, 7));
        assert!(est.eigenvalues.iter().all(|&l| l == 0.0));
        assert_eq!(est.factor_scores, DMatrix::zeros(2, 7));
    }

    #[test]
    fn rank_bounds() {
        let y = DMatrix::from_element(4, 6, 1.0);
        assert_eq!(soft_threshold_svd(&y, 0).unwrap_err().kind(), "RankError");
        assert_eq!(soft_threshold_svd(&y, 4).unwrap_err().kind(), "RankError");
        // 2*2 - 2*1 - 2*1 = 0
        assert_eq!(soft_threshold_svd(&DMatrix::from_element(2, 2, 1.0), 1).unwrap_err().kind(), "RankError");
    }

    #[test]
    fn ed_needs_room() {
        let y = DMatrix::from_element(8, 8, 1.0);
        assert_eq!(select_rank_ed(&y, 4).unwrap_err().kind(), "RankError");
    }

    #[test]
    fn ed_finds_clear_spikes() {
        // Bulk decays smoothly; three spikes sit far above it.
        let mut eig: Vec<f64> = (0..40).map(|i| 1.0 - 0.01 * i as f64).collect();
        eig[0] = 50.0;
        eig[1] = 30.0;
        eig[2] = 20.0;
        eig[3..].sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(ed_from_eigenvalues(&eig, 10), 3);
    }
}

//! Evaluation metrics: SWISS score, `rho1` of distinctive parts,
//! orthogonal-pair detection and PVE-ranking quality.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::params::{all_pairs, Pair};
use crate::signal;
use crate::stats::{self, Tail};

#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub matrix: Matrix,
    pub labels: Vec<String>,
}

impl LabeledMatrix {
    pub fn new(matrix: Matrix, labels: Vec<String>) -> Result<LabeledMatrix> {
        if labels.len() != matrix.n() {
            return Err(Error::Shape(format!(
                "{} labels for {} samples",
                labels.len(),
                matrix.n()
            )));
        }
        Ok(LabeledMatrix { matrix, labels })
    }
}

/// Standardized within-group sum of squares: within-group over total sum of
/// squares about the row means.
pub fn swiss(m: &DMatrix<f64>, labels: &[String]) -> Result<f64> {
    let n = m.ncols();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} samples", labels.len())));
    }
    let mut groups: Vec<&String> = labels.iter().collect();
    groups.sort();
    groups.dedup();
    let gid: Vec<usize> = labels
        .iter()
        .map(|l| groups.binary_search(&l).unwrap())
        .collect();
    let g = groups.len();
    let mut counts = vec![0usize; g];
    for &i in &gid {
        counts[i] += 1;
    }
    let (mut within, mut total) = (0.0, 0.0);
    let mut sums = vec![0.0; g];
    for row in m.row_iter() {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (j, v) in row.iter().enumerate() {
            sums[gid[j]] += v;
        }
        let mean = row.sum() / n as f64;
        for (j, v) in row.iter().enumerate() {
            let gm = sums[gid[j]] / counts[gid[j]] as f64;
            within += (v - gm) * (v - gm);
            total += (v - mean) * (v - mean);
        }
    }
    if total <= 0.0 {
        return Err(Error::DegenerateInput("constant matrix has no variation".into()));
    }
    Ok(within / total)
}

/// Factor scores `sqrt(n) Vᵀ` of a matrix at the given (or numerical) rank.
pub fn factor_scores(d: &DMatrix<f64>, rank: Option<usize>) -> Result<DMatrix<f64>> {
    let svd = linalg::thin_svd(d)?;
    let r = rank.unwrap_or_else(|| svd.numerical_rank());
    if r == 0 {
        return Err(Error::DegenerateInput("zero matrix among distinctive parts".into()));
    }
    Ok(signal::exact_truncation_from_svd(&svd, d.nrows(), d.ncols(), r)?.factor_scores)
}

/// Largest eigenvalue of the stacked factor-score covariance.
pub fn rho1(d_mats: &[&DMatrix<f64>], ranks: Option<&[usize]>) -> Result<f64> {
    if d_mats.is_empty() {
        return Err(Error::Arity("rho1 needs at least one matrix".into()));
    }
    check_inputs(d_mats, ranks)?;
    let mut blocks = Vec::with_capacity(d_mats.len());
    for (k, d) in d_mats.iter().enumerate() {
        if d.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateInput(format!("matrix {k} is zero")));
        }
        blocks.push(factor_scores(d, ranks.map(|r| r[k]))?);
    }
    rho1_from_scores(&blocks)
}

fn check_inputs(d_mats: &[&DMatrix<f64>], ranks: Option<&[usize]>) -> Result<()> {
    if let Some(r) = ranks {
        if r.len() != d_mats.len() {
            return Err(Error::Arity(format!("{} ranks for {} matrices", r.len(), d_mats.len())));
        }
    }
    let n = d_mats.first().map(|d| d.ncols()).unwrap_or(0);
    if d_mats.iter().any(|d| d.ncols() != n) {
        return Err(Error::Shape("matrices disagree on n".into()));
    }
    Ok(())
}

/// `rho1` on precomputed factor scores (`rank x n` blocks).
pub fn rho1_from_scores(blocks: &[DMatrix<f64>]) -> Result<f64> {
    let Some(first) = blocks.first() else {
        return Err(Error::Arity("rho1 needs at least one matrix".into()));
    };
    let n = first.ncols();
    if blocks.iter().any(|b| b.ncols() != n) {
        return Err(Error::Shape("factor scores disagree on n".into()));
    }
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut f = DMatrix::zeros(total, n);
    let mut off = 0;
    for b in blocks {
        f.view_mut((off, 0), (b.nrows(), n)).copy_from(b);
        off += b.nrows();
    }
    let cov = &f * f.transpose() / n as f64;
    Ok(linalg::sym_eigen(&cov)?.values[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOrthogonality {
    pub pair: Pair,
    pub tests: usize,
    pub discoveries: usize,
    /// Share of factor pairs with a significant correlation.
    pub nonzero_proportion: f64,
    pub orthogonal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalPairs {
    pub has_orthogonal_pair: bool,
    pub pairs: Vec<PairOrthogonality>,
    /// Scaling used for the right singular vectors.
    pub factor_scaling: String,
}

/// Per view pair, two-sided correlation tests between every pair of factor
/// samples with Benjamini-Hochberg control; a pair is orthogonal when
/// nothing is discovered.
pub fn orthogonal_pair_rate(d_mats: &[&DMatrix<f64>], fdr_level: f64, ranks: Option<&[usize]>) -> Result<OrthogonalPairs> {
    check_inputs(d_mats, ranks)?;
    let scores: Vec<Option<DMatrix<f64>>> = d_mats
        .iter()
        .enumerate()
        .map(|(k, d)| factor_scores(d, ranks.map(|r| r[k])).ok())
        .collect();
    orthogonal_pairs_from_scores(&scores, fdr_level)
}

/// Same as `orthogonal_pair_rate` on precomputed factor scores; `None`
/// marks a zero distinctive part.
pub fn orthogonal_pairs_from_scores(scores: &[Option<DMatrix<f64>>], fdr_level: f64) -> Result<OrthogonalPairs> {
    let mut pairs = Vec::new();
    for (a, b) in all_pairs(scores.len()) {
        let (fa, fb) = match (&scores[a], &scores[b]) {
            (Some(x), Some(y)) => (x, y),
            // A zero distinctive part is orthogonal to anything.
            _ => {
                pairs.push(PairOrthogonality { pair: (a, b), tests: 0, discoveries: 0, nonzero_proportion: 0.0, orthogonal: true });
                continue;
            }
        };
        let mut p = Vec::new();
        for i in 0..fa.nrows() {
            let x: Vec<f64> = fa.row(i).iter().copied().collect();
            for j in 0..fb.nrows() {
                let y: Vec<f64> = fb.row(j).iter().copied().collect();
                // A degenerate test cannot show a correlation.
                p.push(stats::test_zero_corr(&x, &y, Tail::Two).map(|t| t.p_value).unwrap_or(1.0));
            }
        }
        let found = stats::benjamini_hochberg(&p, fdr_level).iter().filter(|&&d| d).count();
        pairs.push(PairOrthogonality {
            pair: (a, b),
            tests: p.len(),
            discoveries: found,
            nonzero_proportion: if p.is_empty() { 0.0 } else { found as f64 / p.len() as f64 },
            orthogonal: found == 0,
        });
    }
    Ok(OrthogonalPairs {
        has_orthogonal_pair: pairs.iter().any(|p| p.orthogonal),
        pairs,
        factor_scaling: "right singular vectors scaled to unit sample variance".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankQuality {
    pub spearman: f64,
    pub ndcg: f64,
    pub ndcg_top: f64,
}

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// Spearman correlation and nDCG of the ranking induced by `est` with the
/// true values as relevance. `ndcg_top` keeps the first
/// `ceil(top_fraction * p)` positions.
pub fn rank_quality(truth: &[f64], est: &[f64], top_fraction: f64) -> Result<RankQuality> {
    let p = truth.len();
    if est.len() != p {
        return Err(Error::Shape(format!("{p} true values, {} estimates", est.len())));
    }
    if p < 2 {
        return Err(Error::Shape("ranking needs at least 2 items".into()));
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::Config(format!("top fraction {top_fraction} outside (0, 1]")));
    }
    let spearman = linalg::pearson(&linalg::average_ranks(truth), &linalg::average_ranks(est)).unwrap_or(0.0);
    let mut by_est: Vec<usize> = (0..p).collect();
    by_est.sort_by(|&a, &b| est[b].partial_cmp(&est[a]).unwrap().then(a.cmp(&b)));
    let mut ideal: Vec<f64> = truth.to_vec();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = ((top_fraction * p as f64).ceil() as usize).clamp(1, p);
    let ratio = |len: usize| {
        let idcg = dcg(ideal.iter().take(len).copied());
        if idcg == 0.0 {
            1.0
        } else {
            dcg(by_est.iter().take(len).map(|&i| truth[i])) / idcg
        }
    };
    Ok(RankQuality {
        spearman,
        ndcg: ratio(p),
        ndcg_top: ratio(top),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn swiss_extremes() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 3.0, 3.0, 0.0, 2.0, 0.0, 2.0]);
        assert_eq!(swiss(&m, &labels(&["a", "b", "c", "d"])).unwrap(), 0.0);
        assert_eq!(swiss(&m, &labels(&["a"; 4])).unwrap(), 1.0);
        // row 1 within 0 of total 4, row 2 within 4 of total 4
        assert!((swiss(&m, &labels(&["A", "A", "B", "B"])).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(swiss(&DMatrix::from_element(2, 4, 3.0), &labels(&["a"; 4])).unwrap_err().kind(), "DegenerateInput");
    }

    #[test]
    fn rank_quality_perfect_and_reversed() {
        let t = [0.9, 0.1, 0.5, 0.3];
        let q = rank_quality(&t, &t, 0.5).unwrap();
        assert_eq!((q.spearman, q.ndcg, q.ndcg_top), (1.0, 1.0, 1.0));
        let rev: Vec<f64> = t.iter().map(|v| -v).collect();
        assert!((rank_quality(&t, &rev, 1.0).unwrap().spearman + 1.0).abs() < 1e-15);
        assert_eq!(rank_quality(&t, &t[..3], 1.0).unwrap_err().kind(), "ShapeError");
    }

    #[test]
    fn rho1_bounds() {
        let a = DMatrix::from_row_slice(1, 4, &[1.0, -1.0, 1.0, -1.0]);
        let b = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, -1.0, -1.0]);
        let c = DMatrix::from_row_slice(1, 4, &[1.0, -1.0, -1.0, 1.0]);
        assert!((rho1(&[&a, &b, &c], None).unwrap() - 1.0).abs() < 1e-12);
        assert!((rho1(&[&a, &a, &a], None).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(rho1(&[&a, &DMatrix::zeros(1, 4)], None).unwrap_err().kind(), "DegenerateInput");
    }
}

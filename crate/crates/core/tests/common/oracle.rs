//! Brute-force reference implementations.

use nalgebra::DMatrix;

pub const INSTANCES: u64 = 120;

/// Soft-thresholded reconstruction from the eigen-decomposition of `Y Yᵀ`
/// rather than an SVD.
pub fn soft_threshold_oracle(y: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let (p, n) = y.shape();
    let gram = y * y.transpose();
    let eig = gram.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let total: f64 = y.iter().map(|v| v * v).sum();
    let head: f64 = idx[..r].iter().map(|&i| eig.eigenvalues[i]).sum();
    let tau = (total - head) / (n * p - n * r - p * r) as f64;
    let mut out = DMatrix::zeros(p, n);
    for &i in &idx[..r] {
        let s2 = eig.eigenvalues[i];
        let shrunk = (s2 - tau * p as f64).max(0.0).sqrt();
        let u = eig.eigenvectors.column(i);
        // v = Yᵀu / s
        let v = y.transpose() * u / s2.sqrt();
        out += u * v.transpose() * shrunk;
    }
    out
}

pub fn swiss_oracle(m: &DMatrix<f64>, labels: &[String]) -> f64 {
    let (p, n) = m.shape();
    let (mut within, mut total) = (0.0, 0.0);
    for i in 0..p {
        let mut mean = 0.0;
        for j in 0..n {
            mean += m[(i, j)];
        }
        mean /= n as f64;
        for j in 0..n {
            let (mut gs, mut gc) = (0.0, 0.0);
            for k in 0..n {
                if labels[k] == labels[j] {
                    gs += m[(i, k)];
                    gc += 1.0;
                }
            }
            within += (m[(i, j)] - gs / gc).powi(2);
            total += (m[(i, j)] - mean).powi(2);
        }
    }
    within / total
}

pub fn mid_rank(v: &[f64], i: usize) -> f64 {
    let below = v.iter().filter(|&&x| x < v[i]).count() as f64;
    let equal = v.iter().filter(|&&x| x == v[i]).count() as f64;
    below + (equal + 1.0) / 2.0
}

pub fn rank_quality_oracle(t: &[f64], e: &[f64], frac: f64) -> (f64, f64, f64) {
    let p = t.len();
    let rt: Vec<f64> = (0..p).map(|i| mid_rank(t, i)).collect();
    let re: Vec<f64> = (0..p).map(|i| mid_rank(e, i)).collect();
    let mt = rt.iter().sum::<f64>() / p as f64;
    let me = re.iter().sum::<f64>() / p as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..p {
        sxy += (rt[i] - mt) * (re[i] - me);
        sxx += (rt[i] - mt).powi(2);
        syy += (re[i] - me).powi(2);
    }
    let rho = if sxx == 0.0 || syy == 0.0 { 0.0 } else { sxy / (sxx * syy).sqrt() };

    // selection order: repeatedly take the largest estimate, lowest index first
    let mut taken = vec![false; p];
    let mut order = Vec::new();
    for _ in 0..p {
        let mut best = None;
        for i in 0..p {
            if taken[i] {
                continue;
            }
            match best {
                Some(b) if e[i] <= e[b] => {}
                _ => best = Some(i),
            }
        }
        taken[best.unwrap()] = true;
        order.push(best.unwrap());
    }
    let mut ideal = t.to_vec();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = ((frac * p as f64).ceil() as usize).clamp(1, p);
    let ndcg = |len: usize| {
        let mut dcg = 0.0;
        let mut idcg = 0.0;
        for pos in 0..len {
            let disc = 1.0 / ((pos + 2) as f64).log2();
            dcg += t[order[pos]] * disc;
            idcg += ideal[pos] * disc;
        }
        if idcg == 0.0 {
            1.0
        } else {
            dcg / idcg
        }
    };
    (rho, ndcg(p), ndcg(top))
}

/// Random `(y, r)` with residual degrees of freedom left after rank `r`.
pub fn soft_instance(g: &mut rand_chacha::ChaCha8Rng) -> (DMatrix<f64>, usize) {
    use rand::Rng;
    loop {
        let p = g.gen_range(4..12);
        let n = g.gen_range(p + 2..30);
        let r = g.gen_range(1..p.min(4));
        if n * p > r * (n + p) {
            let y = super::gaussian(g, p, r) * super::gaussian(g, r, n) * 4.0 + super::gaussian(g, p, n);
            return (y, r);
        }
    }
}

#![allow(dead_code)]

pub mod oracle;

use dgcca::dataset::{assemble_dataset, Matrix, MultiViewDataset};
use dgcca::signal::SignalEstimate;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(g: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| g.sample::<f64, _>(StandardNormal))
}

pub fn random_orthogonal(g: &mut ChaCha8Rng, r: usize) -> DMatrix<f64> {
    gaussian(g, r, r).qr().q()
}

/// Views driven by `shared` common latent rows plus own factors, with noise.
pub fn planted(seed: u64, ps: &[usize], ranks: &[usize], shared: usize, n: usize, noise: f64) -> MultiViewDataset {
    let mut g = rng(seed);
    let common = gaussian(&mut g, shared, n);
    let views = ps
        .iter()
        .zip(ranks)
        .map(|(&p, &r)| {
            let own = gaussian(&mut g, r, n);
            let mut f = own.clone();
            for i in 0..r.min(shared) {
                let mix = 0.4 + 0.5 * g.gen::<f64>();
                let row = common.row(i) * mix + own.row(i) * (1.0 - mix * mix).sqrt();
                f.set_row(i, &row);
            }
            let scale = DMatrix::from_fn(r, 1, |i, _| 40.0 / (i + 1) as f64);
            let load = gaussian(&mut g, p, r).qr().q() * DMatrix::from_diagonal(&scale.column(0)) * (p as f64).sqrt();
            let y = load * f + gaussian(&mut g, p, n) * noise;
            Matrix::new(y).unwrap()
        })
        .collect();
    assemble_dataset(views).unwrap()
}

pub fn signals(ds: &MultiViewDataset, ranks: &[usize]) -> Vec<SignalEstimate> {
    dgcca::recover_all(ds, Some(ranks), None).unwrap()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

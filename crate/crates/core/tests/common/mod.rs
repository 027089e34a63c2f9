// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use covchange::linalg::CMatrix;
use covchange::rng::{complex_normal, substream};
use covchange::CovarianceMatrix;
use rand::Rng;

/// Random PSD covariance `G·Gᴴ/M` with a random rank between 1 and `dim`, plus `floor·I`.
pub fn random_cov(seed: u64, dim: usize, floor: f64) -> CovarianceMatrix {
    let mut rng = substream(seed, &[0xC0]);
    let rank = rng.gen_range(1..=dim);
    let g = CMatrix::from_fn(dim, rank, |_, _| complex_normal(&mut rng));
    let mut c = (&g * g.adjoint()).unscale(dim as f64);
    for i in 0..dim {
        c[(i, i)] += floor;
    }
    CovarianceMatrix::new(c).expect("constructed PSD")
}

/// `k` columns of i.i.d. CN(0, scale) entries.
pub fn random_blocks(seed: u64, dim: usize, k: usize, scale: f64) -> CMatrix {
    let mut rng = substream(seed, &[0xB1]);
    CMatrix::from_fn(dim, k, |_, _| complex_normal(&mut rng) * scale.sqrt())
}

/// Random unitary matrix from the QR factorization of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    g.qr().q()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

pub mod props;

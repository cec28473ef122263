//! Fixtures shared by the benchmarks.

use fdr_core::{builtin_affine, AffineModel};
use nalgebra::DMatrix;

pub fn decay() -> AffineModel {
    builtin_affine("decay").expect("builtin")
}

pub fn ns3() -> AffineModel {
    builtin_affine("ns3").expect("builtin")
}

/// A dense, well-scaled test generator of size `n`.
pub fn generator(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let v = ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5;
        if i == j { v - 1.0 } else { v / n as f64 }
    })
}

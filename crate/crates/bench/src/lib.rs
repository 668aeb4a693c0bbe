//! Deterministic inputs for the benchmarks.

use std::sync::Arc;

use lowrank_sdp::dense_oracle::store_of;
use lowrank_sdp::{smalldense, Complex64, DenseMatrix, SampledMatrix};

/// Cheap reproducible values in `[-0.5, 0.5)`.
fn values(seed: u64) -> impl FnMut() -> f64 {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    move || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }
}

/// `q₁q₁† − q₂q₂†` for a fixed orthonormal pair in dimension `n`.
pub fn signed_pair(n: usize, seed: u64) -> Arc<SampledMatrix> {
    let mut next = values(seed);
    let g = DenseMatrix::from_fn(n, 2, |_, _| Complex64::new(next(), next()));
    let (q, _) = smalldense::qr(&g).expect("qr");
    let a = q.column(0) * q.column(0).adjoint() - q.column(1) * q.column(1).adjoint();
    Arc::new(store_of(&a, 2).expect("store"))
}

//! Named, seed-derived random substreams.
//!
//! Every random draw in the crate comes from `substream(seed, stream, index)`,
//! so adding clients or reordering work never perturbs draws made elsewhere.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Components = 1,
    Scores = 2,
    Noise = 3,
    Init = 4,
    KMeans = 5,
    Split = 6,
    Verify = 7,
}

/// Independent generator for `(seed, stream, index)`; `index` is usually a client id.
pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) ^ index);
    rng
}

/// `rows × cols` matrix of i.i.d. standard normals, drawn in column-major order.
pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<T> {
    let data: Vec<T> = (0..rows * cols)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// `rows × cols` matrix of i.i.d. ±1 entries.
pub fn rademacher_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<T> {
    let data: Vec<T> = (0..rows * cols)
        .map(|_| if rng.random::<bool>() { T::one() } else { -T::one() })
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

//! Dense numeric substrate: matrices, MLPs with manual backprop, Adam, and a
//! finite-difference gradient checker.

mod activation;
mod adam;
mod gradcheck;
mod matrix;
mod mlp;

pub use activation::{Activation, DEFAULT_LEAKY_SLOPE};
pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, FD_STEP, GRAD_FLOOR, GRAD_TOLERANCE};
pub use matrix::{dot, euclidean, l2_norm, squared_distance, Matrix};
pub use mlp::{Dense, Mlp, MlpCache};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// The single RNG type used across the crate.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream from a base seed and a purpose tag, so that
/// consuming randomness in one phase never shifts another phase's draws.
pub fn derived_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Matrix of i.i.d. `N(0, sigma²)` draws.
pub fn gaussian_matrix<R: rand::Rng + ?Sized>(rows: usize, cols: usize, sigma: f64, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * sigma
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

/// A collection of trainable scalars exposed as flat slices in a stable order.
///
/// Gradients are carried in a value of the same type, so the i-th slice of a
/// gradient lines up with the i-th slice of the parameters.
pub trait Parameters {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Adds `other · factor` slice-wise. Shapes must match.
    fn add_scaled(&mut self, other: &Self, factor: f64)
    where
        Self: Sized,
    {
        let src = other.param_slices();
        for (dst, src) in self.param_slices_mut().into_iter().zip(src) {
            assert_eq!(dst.len(), src.len(), "parameter shape mismatch");
            for (d, s) in dst.iter_mut().zip(src) {
                *d += factor * s;
            }
        }
    }
}

/// A bare matrix treated as one parameter block, for checking gradients
/// with respect to inputs.
impl Parameters for Matrix {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

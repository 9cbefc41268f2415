//! Seeded random operators and states for scans and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{c64, CMatrix, CVector, DensityOp, Ket, Operator, SpaceSignature};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_entry<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..1.0)
}

/// Complex matrix with independent real and imaginary parts in `[−1, 1)`.
pub fn random_matrix<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| c64(uniform_entry(rng), uniform_entry(rng)))
}

/// `(M + M†)/2` for a random `M`.
pub fn random_hermitian<R: Rng>(signature: &SpaceSignature, rng: &mut R) -> Result<Operator> {
    let m = random_matrix(signature.dim(), rng);
    let h = (&m + m.adjoint()) * c64(0.5, 0.0);
    Operator::hermitian(h, signature.clone())
}

pub fn random_ket<R: Rng>(signature: &SpaceSignature, rng: &mut R) -> Result<Ket> {
    let v = CVector::from_fn(signature.dim(), |_, _| {
        c64(uniform_entry(rng), uniform_entry(rng))
    });
    Ket::new(v, signature.clone())?.renormalize()
}

/// `M M† / Tr(M M†)`, full rank with probability one.
pub fn random_density<R: Rng>(signature: &SpaceSignature, rng: &mut R) -> Result<DensityOp> {
    let m = random_matrix(signature.dim(), rng);
    let mm = &m * m.adjoint();
    let tr = mm.trace().re;
    let rho = mm.unscale(tr);
    let rho = (&rho + rho.adjoint()) * c64(0.5, 0.0);
    DensityOp::new(rho, signature.clone())
}

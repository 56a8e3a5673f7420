//! Random matrices for tests and benchmarks. All take an explicit RNG.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{c, hermitian_part, CMatrix, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    hermitian_part(&random_matrix(dim, rng))
}

/// Haar-ish unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = random_matrix(dim, rng).qr();
    let (q, r) = qr.unpack();
    // fix column phases so the distribution does not depend on the QR convention
    let phases = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                C64::from(1.0)
            }
        } else {
            C64::from(0.0)
        }
    });
    q * phases
}

/// Full-rank random density matrix `G G† / tr(G G†)`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = random_matrix(dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace();
    hermitian_part(&m.unscale(tr.re))
}

pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let v = CMatrix::from_fn(dim, 1, |_, _| gaussian(rng));
    let v = v.unscale(v.norm());
    &v * v.adjoint()
}

//! Finite-dimensional *-algebras as linear subspaces of `B(ℂ^d)`.
//!
//! An [`AlgebraBasis`] is an orthonormal (Hilbert–Schmidt) basis of a unital,
//! *-closed, multiplicatively closed subspace. Commutants, relative commutants
//! and centers reduce to nullspace and subspace-intersection problems, solved
//! with SVD cutoffs from [`crate::tolerance`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{
    self, commutator, hermitian_eig_unchecked, hs_norm, identity, nullspace, unvectorize, CMatrix,
    LinalgError, Projection, C64,
};
use crate::tolerance::TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("algebra invariant violated: {invariant} (residual {residual:e})")]
    Invariant { invariant: &'static str, residual: f64 },
    #[error("algebra is not abelian (commutator residual {0:e})")]
    NotAbelian(f64),
    #[error("degenerate generic element: spectral clusters never matched the center after {0} draws")]
    DegenerateGenericElement(usize),
    #[error("partition of unity invalid: {0}")]
    Partition(String),
}

pub type Result<T, E = AlgebraError> = std::result::Result<T, E>;

/// Orthonormal basis of a finite-dimensional von Neumann algebra on `ℂ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraBasis {
    ambient_dim: usize,
    basis: Vec<CMatrix>,
}

impl AlgebraBasis {
    /// `ℂ·1`.
    pub fn scalars(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: vec![identity(ambient_dim).unscale((ambient_dim as f64).sqrt())],
        }
    }

    /// All of `B(ℂ^d)`, spanned by the matrix units.
    pub fn full(ambient_dim: usize) -> Self {
        let d = ambient_dim;
        let basis = (0..d * d)
            .map(|k| {
                let mut e = CMatrix::zeros(d, d);
                e[(k % d, k / d)] = C64::from(1.0);
                e
            })
            .collect();
        Self { ambient_dim, basis }
    }

    /// Diagonal matrices in the standard basis.
    pub fn diagonal(ambient_dim: usize) -> Self {
        let d = ambient_dim;
        let basis = (0..d)
            .map(|k| {
                let mut e = CMatrix::zeros(d, d);
                e[(k, k)] = C64::from(1.0);
                e
            })
            .collect();
        Self { ambient_dim, basis }
    }

    /// Wraps a basis, checking only shape and Gram orthonormality.
    pub fn from_orthonormal(ambient_dim: usize, basis: Vec<CMatrix>) -> Result<Self> {
        for b in &basis {
            if b.shape() != (ambient_dim, ambient_dim) {
                return Err(linalg::mismatch(format!("{ambient_dim}x{ambient_dim}"), format!("{:?}", b.shape())).into());
            }
        }
        let alg = Self { ambient_dim, basis };
        let residual = alg.gram_residual();
        if residual > 1e-10 {
            return Err(AlgebraError::Invariant {
                invariant: "basis orthonormal (Gram = I)",
                residual,
            });
        }
        Ok(alg)
    }

    fn from_columns(ambient_dim: usize, cols: &CMatrix) -> Self {
        let basis = (0..cols.ncols())
            .map(|j| unvectorize(cols.column(j).as_slice(), ambient_dim))
            .collect();
        Self { ambient_dim, basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Dimension of the algebra as a complex vector space.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim * self.ambient_dim
    }

    /// Basis vectors as columns of a `d² × dim` matrix.
    pub fn stacked(&self) -> CMatrix {
        let d2 = self.ambient_dim * self.ambient_dim;
        let mut out = CMatrix::zeros(d2, self.dim());
        for (j, b) in self.basis.iter().enumerate() {
            out.column_mut(j).copy_from_slice(b.as_slice());
        }
        out
    }

    /// Hilbert–Schmidt orthogonal projection of `m` onto the span.
    pub fn project(&self, m: &CMatrix) -> CMatrix {
        self.basis
            .iter()
            .fold(CMatrix::zeros(self.ambient_dim, self.ambient_dim), |acc, b| acc + b * b.dotc(m))
    }

    /// `‖m − P m‖ / ‖m‖` (zero for `m = 0`).
    pub fn residual(&self, m: &CMatrix) -> f64 {
        let norm = hs_norm(m);
        if norm == 0.0 {
            return 0.0;
        }
        hs_norm(&(m - self.project(m))) / norm
    }

    /// Largest projection residual of `other`'s basis onto this span.
    pub fn containment_residual(&self, other: &AlgebraBasis) -> f64 {
        if self.is_full() && self.ambient_dim == other.ambient_dim {
            return 0.0;
        }
        other.basis.iter().map(|b| self.residual(b)).fold(0.0, f64::max)
    }

    pub fn contains(&self, other: &AlgebraBasis, tol: f64) -> bool {
        self.ambient_dim == other.ambient_dim && self.containment_residual(other) <= tol
    }

    pub fn same_span(&self, other: &AlgebraBasis, tol: f64) -> bool {
        self.dim() == other.dim() && self.contains(other, tol) && other.contains(self, tol)
    }

    /// `{A ⊗ B}` on `ℂ^{d_a} ⊗ ℂ^{d_b}`.
    pub fn tensor(&self, other: &AlgebraBasis) -> AlgebraBasis {
        let basis = self
            .basis
            .iter()
            .flat_map(|a| other.basis.iter().map(move |b| a.kronecker(b)))
            .collect();
        Self {
            ambient_dim: self.ambient_dim * other.ambient_dim,
            basis,
        }
    }

    /// `{u† B u}`; `u` must be unitary for the result to stay orthonormal.
    pub fn conjugated(&self, u: &CMatrix) -> AlgebraBasis {
        let ud = u.adjoint();
        Self {
            ambient_dim: self.ambient_dim,
            basis: self.basis.iter().map(|b| &ud * b * u).collect(),
        }
    }

    fn gram_residual(&self) -> f64 {
        let k = self.dim();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in i..k {
                let g = self.basis[i].dotc(&self.basis[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    /// Largest `‖[Bᵢ, Bⱼ]‖` over basis pairs.
    pub fn commutativity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.basis.iter().enumerate() {
            for b in &self.basis[i + 1..] {
                worst = worst.max(hs_norm(&commutator(a, b)));
            }
        }
        worst
    }

    pub fn is_abelian(&self) -> bool {
        self.commutativity_residual() <= TOL.closure
    }

    /// Checks unitality, *-closure, multiplicative closure and orthonormality.
    ///
    /// Multiplicative closure costs `dim²` products; meant for tests and
    /// small algebras.
    pub fn validate(&self) -> Result<()> {
        let fail = |invariant, residual| Err(AlgebraError::Invariant { invariant, residual });
        let g = self.gram_residual();
        if g > 1e-10 {
            return fail("basis orthonormal (Gram = I)", g);
        }
        let r = self.residual(&identity(self.ambient_dim));
        if r > TOL.closure {
            return fail("unital: I in span", r);
        }
        for b in &self.basis {
            let r = self.residual(&b.adjoint());
            if r > TOL.closure {
                return fail("closed under adjoint", r);
            }
        }
        for a in &self.basis {
            for b in &self.basis {
                let r = self.residual(&(a * b));
                if r > TOL.closure {
                    return fail("closed under multiplication", r);
                }
            }
        }
        Ok(())
    }
}

/// Appends `candidate` to `basis` by modified Gram–Schmidt (two passes).
/// Returns false when the normalized residual is at most `drop_tol`.
fn orthonormal_append(basis: &mut Vec<CMatrix>, candidate: &CMatrix, drop_tol: f64) -> bool {
    let norm = hs_norm(candidate);
    if norm == 0.0 {
        return false;
    }
    let mut w = candidate.unscale(norm);
    for _ in 0..2 {
        for q in basis.iter() {
            let coeff = q.dotc(&w);
            w -= q * coeff;
        }
    }
    let rn = hs_norm(&w);
    if rn <= drop_tol {
        return false;
    }
    basis.push(w.unscale(rn));
    true
}

/// Smallest unital *-algebra containing `generators`.
///
/// Seeds the span with `{I} ∪ generators ∪ adjoints`, then repeatedly
/// appends all products involving at least one newly added basis element
/// until a full round adds nothing. Deterministic in the input order.
pub fn generate_algebra(generators: &[CMatrix], ambient_dim: usize) -> Result<AlgebraBasis> {
    let d = ambient_dim;
    for g in generators {
        if g.shape() != (d, d) {
            let err = if g.nrows() != g.ncols() {
                LinalgError::NotSquare { rows: g.nrows(), cols: g.ncols() }
            } else {
                linalg::mismatch(format!("{d}x{d}"), format!("{:?}", g.shape()))
            };
            return Err(err.into());
        }
    }
    let full = d * d;
    let mut basis = Vec::new();
    orthonormal_append(&mut basis, &identity(d), TOL.closure);
    for g in generators {
        orthonormal_append(&mut basis, g, TOL.closure);
        orthonormal_append(&mut basis, &g.adjoint(), TOL.closure);
    }
    let mut done = 0;
    while basis.len() < full && done < basis.len() {
        let fresh = basis.len();
        for i in 0..fresh {
            for j in 0..fresh {
                if i < done && j < done {
                    continue;
                }
                let p = &basis[i] * &basis[j];
                orthonormal_append(&mut basis, &p, TOL.closure);
                if basis.len() == full {
                    break;
                }
            }
        }
        done = fresh;
    }
    Ok(AlgebraBasis { ambient_dim, basis })
}

/// Restricts the column span `v` (vectorized `d×d` matrices) to the subspace
/// commuting with `b`.
fn restrict_to_commuting(v: &CMatrix, b: &CMatrix, d: usize) -> CMatrix {
    let mut k = CMatrix::zeros(d * d, v.ncols());
    for j in 0..v.ncols() {
        let x = unvectorize(v.column(j).as_slice(), d);
        let c = commutator(b, &x);
        k.column_mut(j).copy_from_slice(c.as_slice());
    }
    let null = nullspace(&k, TOL.rank, hs_norm(b));
    v * null
}

/// `{A ∈ a : [A, x] = 0}`.
pub fn commuting_subalgebra(a: &AlgebraBasis, x: &CMatrix) -> AlgebraBasis {
    let v = restrict_to_commuting(&a.stacked(), x, a.ambient_dim);
    AlgebraBasis::from_columns(a.ambient_dim, &v)
}

/// `{X : [X, Bᵢ] = 0 for every basis element}`.
pub fn commutant(a: &AlgebraBasis) -> AlgebraBasis {
    let d = a.ambient_dim;
    let mut v = identity(d * d);
    for b in &a.basis {
        v = restrict_to_commuting(&v, b, d);
        if v.ncols() <= 1 {
            break;
        }
    }
    AlgebraBasis::from_columns(d, &v)
}

/// Subspace intersection of two spans (orthonormal result).
pub fn intersect(u: &AlgebraBasis, w: &AlgebraBasis) -> Result<AlgebraBasis> {
    if u.ambient_dim != w.ambient_dim {
        return Err(linalg::mismatch(u.ambient_dim, w.ambient_dim).into());
    }
    let wm = w.stacked();
    if u.is_full() {
        return Ok(w.clone());
    }
    let um = u.stacked();
    let outside = &wm - &um * (um.adjoint() * &wm);
    let null = nullspace(&outside, TOL.rank, 1.0);
    Ok(AlgebraBasis::from_columns(w.ambient_dim, &(wm * null)))
}

/// `A′ ∩ B`.
pub fn relative_commutant(a: &AlgebraBasis, b: &AlgebraBasis) -> Result<AlgebraBasis> {
    if a.ambient_dim != b.ambient_dim {
        return Err(linalg::mismatch(a.ambient_dim, b.ambient_dim).into());
    }
    intersect(&commutant(a), b)
}

/// `A′ ∩ A`; abelian by construction.
pub fn center(a: &AlgebraBasis) -> AlgebraBasis {
    relative_commutant(a, a).expect("same ambient dimension")
}

/// Hilbert–Schmidt projection of `omega` onto the algebra: the density of the
/// restricted state, satisfying `tr(Ω_A X) = tr(Ω X)` for all `X ∈ A`.
pub fn conditional_expectation(omega: &CMatrix, a: &AlgebraBasis) -> Result<linalg::Hermitian> {
    if omega.shape() != (a.ambient_dim, a.ambient_dim) {
        return Err(linalg::mismatch(a.ambient_dim, format!("{:?}", omega.shape())).into());
    }
    Ok(linalg::Hermitian::from_hermitian_part(&a.project(omega))?)
}

/// A partition of unity by mutually orthogonal, nonzero projections.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    projections: Vec<Projection>,
    labels: Vec<i64>,
}

impl PartitionOfUnity {
    pub fn new(projections: Vec<Projection>, labels: Vec<i64>) -> Result<Self> {
        if projections.is_empty() {
            return Err(AlgebraError::Partition("no projections".into()));
        }
        if projections.len() != labels.len() {
            return Err(AlgebraError::Partition("labels and projections differ in length".into()));
        }
        let d = projections[0].dim();
        let mut sum = CMatrix::zeros(d, d);
        for (i, p) in projections.iter().enumerate() {
            if p.dim() != d {
                return Err(AlgebraError::Partition("projections of different dimensions".into()));
            }
            if p.trace().re < 0.5 {
                return Err(AlgebraError::Partition(format!("projection {i} is zero")));
            }
            for q in &projections[i + 1..] {
                let r = hs_norm(&(p.matrix() * q.matrix()));
                if r > TOL.partition {
                    return Err(AlgebraError::Partition(format!("projections not orthogonal (residual {r:e})")));
                }
            }
            sum += p.matrix();
        }
        let r = hs_norm(&(sum - identity(d)));
        if r > TOL.partition {
            return Err(AlgebraError::Partition(format!("projections do not sum to I (residual {r:e})")));
        }
        Ok(Self { projections, labels })
    }

    /// `{I}`.
    pub fn trivial(dim: usize) -> Self {
        Self {
            projections: vec![Projection::new(identity(dim)).expect("identity is a projection")],
            labels: vec![0],
        }
    }

    pub fn projections(&self) -> &[Projection] {
        &self.projections
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.projections[0].dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Projection)> {
        self.labels.iter().copied().zip(self.projections.iter())
    }
}

pub const MAX_GENERIC_RETRIES: usize = 8;

/// Minimal projections of an abelian algebra, i.e. the finest partition of
/// unity generating it.
///
/// Diagonalizes a generic self-adjoint element `G = Σ cᵢ Re(Bᵢ) + c′ᵢ Im(Bᵢ)`
/// with coefficients uniform in `[-1, 1]` drawn from `seed`, clusters its
/// eigenvalues (gap `TOL.cluster_gap · spread`) and takes the spectral
/// projections of the clusters, labelled in ascending eigenvalue order.
/// Candidates are accepted when there are exactly `dim Z` of them and each
/// lies in `Z`; otherwise coefficients are redrawn.
pub fn minimal_projections(z: &AlgebraBasis, seed: u64) -> Result<PartitionOfUnity> {
    let d = z.ambient_dim;
    let comm = z.commutativity_residual();
    if comm > TOL.closure {
        return Err(AlgebraError::NotAbelian(comm));
    }
    if z.dim() == 1 {
        return Ok(PartitionOfUnity::trivial(d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..=MAX_GENERIC_RETRIES {
        let mut g = CMatrix::zeros(d, d);
        for b in &z.basis {
            let re = linalg::hermitian_part(b);
            let im = (b - b.adjoint()) * C64::new(0.0, -0.5);
            g += re.scale(rng.random_range(-1.0..1.0)) + im.scale(rng.random_range(-1.0..1.0));
        }
        let eig = hermitian_eig_unchecked(&g);
        let spread = eig.values[d - 1] - eig.values[0];
        let gap = TOL.cluster_gap * spread;
        let mut clusters = Vec::new();
        let mut start = 0;
        for k in 1..=d {
            if k == d || eig.values[k] - eig.values[k - 1] > gap {
                clusters.push(start..k);
                start = k;
            }
        }
        if clusters.len() != z.dim() {
            continue;
        }
        let candidates: Vec<CMatrix> = clusters
            .into_iter()
            .map(|r| linalg::hermitian_part(&eig.spectral_projection(r)))
            .collect();
        if candidates.iter().any(|p| z.residual(p) > TOL.inclusion) {
            continue;
        }
        let projections = candidates
            .into_iter()
            .map(Projection::new)
            .collect::<Result<Vec<_>, _>>()?;
        let labels = (0..projections.len() as i64).collect();
        return PartitionOfUnity::new(projections, labels);
    }
    Err(AlgebraError::DegenerateGenericElement(MAX_GENERIC_RETRIES))
}

/// `Σ_ξ π_ξ Ω π_ξ`, the pinching of `omega` by a partition.
pub fn pinch(omega: &CMatrix, partition: &PartitionOfUnity) -> CMatrix {
    partition
        .projections()
        .iter()
        .fold(CMatrix::zeros(omega.nrows(), omega.ncols()), |acc, p| acc + p.matrix() * omega * p.matrix())
}

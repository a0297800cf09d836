//! Dense complex Hermitian linear algebra.
//!
//! Everything here works on small dense matrices (dimension up to a few
//! dozen). Matrices are `nalgebra::DMatrix<Complex64>`; the newtypes
//! [`HermitianMatrix`], [`DensityMatrix`] and [`PureStateVector`] carry the
//! validated invariants.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance on `H - H†`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues in `[-CLAMP_TOL, 0)` are clamped to zero; anything lower is an error.
pub const CLAMP_TOL: f64 = 1e-10;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues above this count towards the rank of a state.
pub const RANK_TOL: f64 = 1e-9;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub(crate) fn creal(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry of `|H - H†|`.
pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * creal(0.5)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `|v⟩⟨w|`.
pub fn outer(v: &CVector, w: &CVector) -> CMatrix {
    v * w.adjoint()
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Deviation `max |U†U - I|`, for square or tall matrices.
pub fn isometry_deviation(u: &CMatrix) -> f64 {
    let g = u.adjoint() * u;
    let id = CMatrix::identity(g.nrows(), g.ncols());
    max_abs(&(g - id))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let asym = max_asymmetry(&m);
        if asym > HERMITIAN_TOL * max_abs(&m).max(1.0) {
            return Err(Error::NotHermitian {
                max_asymmetry: asym,
            });
        }
        Ok(Self { m })
    }

    /// Builds from `(M + M†)/2` without a tolerance check.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        Self {
            m: hermitian_part(m),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }
}

/// A positive unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    h: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        let tr = trace(h.matrix());
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {} differs from 1",
                tr.re
            )));
        }
        let ev = eigenvalues(h.matrix());
        if let Some(&lo) = ev.first() {
            if lo < -CLAMP_TOL {
                return Err(Error::InvalidState(format!(
                    "negative eigenvalue {lo:e}"
                )));
            }
        }
        Ok(Self { h })
    }

    /// Hermitian-symmetrizes and rescales to unit trace before validating.
    /// Used for states assembled from sums that carry rounding noise.
    pub fn from_noisy(m: &CMatrix) -> Result<Self> {
        let h = hermitian_part(m);
        let tr = trace(&h).re;
        if tr <= 0.0 {
            return Err(Error::InvalidState(format!("non-positive trace {tr}")));
        }
        Self::new(h / creal(tr))
    }

    pub fn from_pure(v: &PureStateVector) -> Self {
        let a = v.normalized();
        Self {
            h: HermitianMatrix::from_hermitian_part(&outer(a.amplitudes(), a.amplitudes())),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            h: HermitianMatrix {
                m: CMatrix::identity(dim, dim) / creal(dim as f64),
            },
        }
    }

    pub fn diagonal(p: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            p.len(),
            p.iter().map(|&x| creal(x)),
        ));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.h.matrix()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.h
    }

    /// Number of eigenvalues above [`RANK_TOL`].
    pub fn rank(&self) -> usize {
        eigenvalues(self.matrix())
            .iter()
            .filter(|&&x| x > RANK_TOL)
            .count()
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        Self::from_noisy(&(u * self.matrix() * u.adjoint()))
    }

    /// `ρ ⊗ σ`.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            h: HermitianMatrix::from_hermitian_part(&kron(self.matrix(), other.matrix())),
        }
    }

    /// Convex combination `t·self + (1-t)·other`.
    pub fn mix(&self, other: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        DensityMatrix::from_noisy(
            &(self.matrix() * creal(t) + other.matrix() * creal(1.0 - t)),
        )
    }
}

/// A state vector; normalized unless built with [`PureStateVector::with_weight`].
#[derive(Debug, Clone, PartialEq)]
pub struct PureStateVector {
    amps: CVector,
}

impl PureStateVector {
    /// Normalizes the given amplitudes.
    pub fn new(amps: CVector) -> Result<Self> {
        let n = amps.norm();
        if amps.is_empty() || n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero or non-finite vector".into()));
        }
        Ok(Self {
            amps: amps / creal(n),
        })
    }

    pub fn from_real(v: &[f64]) -> Result<Self> {
        Self::new(CVector::from_iterator(v.len(), v.iter().map(|&x| creal(x))))
    }

    /// Keeps the amplitudes as given; the squared norm is the weight.
    pub fn with_weight(amps: CVector) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn weight(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn normalized(&self) -> PureStateVector {
        let n = self.amps.norm();
        PureStateVector {
            amps: &self.amps / creal(n),
        }
    }

    pub fn projector(&self) -> CMatrix {
        outer(&self.amps, &self.amps)
    }

    /// `|⟨self|other⟩|²` for normalized vectors.
    pub fn overlap(&self, other: &PureStateVector) -> f64 {
        self.amps.dotc(&other.amps).norm_sqr()
    }

    pub fn apply(&self, u: &CMatrix) -> PureStateVector {
        PureStateVector {
            amps: u * &self.amps,
        }
    }
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal columns, aligned with `values`.
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn reconstruct(&self) -> CMatrix {
        let d = CVector::from_iterator(self.values.len(), self.values.iter().map(|&x| creal(x)));
        &self.vectors * CMatrix::from_diagonal(&d) * self.vectors.adjoint()
    }
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    match n {
        0 => vec![],
        1 => vec![m[(0, 0)].re],
        2 => {
            let (lo, hi, _) = eig2_values(m);
            vec![lo, hi]
        }
        _ => {
            let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v
        }
    }
}

fn eig2_values(m: &CMatrix) -> (f64, f64, f64) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    (mean - r, mean + r, r)
}

/// Raw eigen-decomposition: ascending values, no basis canonicalization.
pub(crate) fn eigh_raw(m: &CMatrix) -> Eigh {
    let n = m.nrows();
    if n == 1 {
        return Eigh {
            values: vec![m[(0, 0)].re],
            vectors: CMatrix::identity(1, 1),
        };
    }
    let se = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(i));
    }
    Eigh { values, vectors }
}

/// Hermitian eigen-decomposition with a reproducible basis.
///
/// Eigenvalues come back ascending. Within every (near-)degenerate
/// eigenspace the basis is replaced by Gram–Schmidt on the projections of the
/// coordinate vectors, taken in index order, so the output depends only on
/// the spectral projectors. Non-degenerate vectors get the same treatment,
/// which fixes their phase.
pub fn eigh(h: &HermitianMatrix) -> Eigh {
    let raw = eigh_raw(h.matrix());
    canonicalize(raw)
}

/// Checks hermiticity and then calls [`eigh`].
pub fn eigh_checked(m: &CMatrix) -> Result<Eigh> {
    let h = HermitianMatrix::new(m.clone())?;
    Ok(eigh(&h))
}

fn canonicalize(raw: Eigh) -> Eigh {
    let n = raw.values.len();
    let scale = raw
        .values
        .iter()
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut out = CMatrix::zeros(n, n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && raw.values[end] - raw.values[end - 1] <= tol {
            end += 1;
        }
        let block = raw.vectors.columns(start, end - start).into_owned();
        let chosen = coordinate_gram_schmidt(&block);
        for (k, v) in chosen.iter().enumerate() {
            out.set_column(start + k, v);
        }
        start = end;
    }
    Eigh {
        values: raw.values,
        vectors: out,
    }
}

/// Orthonormal basis of span(cols) built from projected coordinate vectors.
fn coordinate_gram_schmidt(cols: &CMatrix) -> Vec<CVector> {
    let n = cols.nrows();
    let g = cols.ncols();
    let proj = cols * cols.adjoint();
    let mut chosen: Vec<CVector> = Vec::with_capacity(g);
    let mut used = vec![false; n];
    while chosen.len() < g {
        let residuals: Vec<CVector> = (0..n)
            .map(|k| {
                let mut r = proj.column(k).into_owned();
                for q in &chosen {
                    let ov = q.dotc(&r);
                    r -= q * ov;
                }
                r
            })
            .collect();
        let best = residuals
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(_, r)| r.norm_squared())
            .fold(0.0f64, f64::max);
        let pick = (0..n)
            .find(|&k| !used[k] && residuals[k].norm_squared() >= 0.5 * best)
            .expect("spanning set is never exhausted");
        used[pick] = true;
        let r = &residuals[pick];
        chosen.push(r / creal(r.norm()));
    }
    chosen
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = m.nrows();
    if n == 1 {
        return CMatrix::from_element(1, 1, creal(f(m[(0, 0)].re)));
    }
    let e = eigh_raw(m);
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in e.values.iter().enumerate() {
        let fv = f(lam);
        if fv == 0.0 {
            continue;
        }
        let v = e.vectors.column(k);
        out += v * v.adjoint() * creal(fv);
    }
    out
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_function(m, |x| x.max(0.0).sqrt())
}

/// Partial trace over tensor factors.
///
/// `dims` lists the factor dimensions (first factor most significant);
/// `keep` lists the factors that survive, in ascending order in the output.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let out = partial_trace_matrix(rho.matrix(), dims, keep)?;
    DensityMatrix::from_noisy(&out)
}

pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if total != m.nrows() || dims.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: total,
        });
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidParameter(format!(
            "factor index out of range for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let dk: usize = kept.iter().map(|&k| dims[k]).product();
    let dt: usize = traced.iter().map(|&k| dims[k]).product();

    // index = Σ digit_k · stride_k
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let compose = |factors: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &f in factors.iter().rev() {
            off += (idx % dims[f]) * strides[f];
            idx /= dims[f];
        }
        off
    };
    let kept_off: Vec<usize> = (0..dk).map(|i| compose(&kept, i)).collect();
    let traced_off: Vec<usize> = (0..dt).map(|i| compose(&traced, i)).collect();

    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_off {
                acc += m[(kept_off[i] + t, kept_off[j] + t)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Permutation matrix that moves the listed factors to the front.
///
/// Column `new` is the coordinate vector of the old index, so
/// `P† X P` expresses `X` in the reordered tensor basis.
pub fn factor_permutation(dims: &[usize], front: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    let mut order: Vec<usize> = front.to_vec();
    for k in 0..dims.len() {
        if !order.contains(&k) {
            order.push(k);
        }
    }
    if order.len() != dims.len() || order.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidParameter("bad factor ordering".into()));
    }
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let mut p = CMatrix::zeros(total, total);
    for new in 0..total {
        let mut idx = new;
        let mut old = 0;
        for &f in order.iter().rev() {
            old += (idx % dims[f]) * strides[f];
            idx /= dims[f];
        }
        p[(old, new)] = creal(1.0);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian};

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[creal(0.0), creal(1.0), creal(1.0), creal(0.0)])
    }

    #[test]
    fn eigh_of_diagonal_is_sorted_coordinate_basis() {
        let h = HermitianMatrix::new(CMatrix::from_diagonal(&CVector::from_vec(vec![
            creal(3.0),
            creal(1.0),
            creal(2.0),
        ])))
        .unwrap();
        let e = eigh(&h);
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert!((e.vectors[(1, 0)] - creal(1.0)).norm() < 1e-14);
        assert!((e.vectors[(2, 1)] - creal(1.0)).norm() < 1e-14);
        assert!((e.vectors[(0, 2)] - creal(1.0)).norm() < 1e-14);
    }

    #[test]
    fn eigh_of_pauli_x() {
        let e = eigh(&HermitianMatrix::new(pauli_x()).unwrap());
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        // canonical phase: first coordinate real positive
        assert!((e.vectors[(0, 0)] - creal(s)).norm() < 1e-12);
        assert!((e.vectors[(1, 0)] + creal(s)).norm() < 1e-12);
        assert!((e.vectors[(0, 1)] - creal(s)).norm() < 1e-12);
        assert!((e.vectors[(1, 1)] - creal(s)).norm() < 1e-12);
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        let h = random_hermitian(11, 6);
        let e = eigh(&h);
        assert!(max_abs(&(e.reconstruct() - h.matrix())) < 1e-10);
        assert!(isometry_deviation(&e.vectors) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigh_degenerate_basis_is_reproducible() {
        // identity rotated by a random unitary has a fully degenerate spectrum
        let u = crate::random::haar_unitary(3, 4);
        let m = &u * CMatrix::from_diagonal(&CVector::from_vec(vec![
            creal(1.0),
            creal(1.0),
            creal(2.0),
            creal(2.0),
        ])) * u.adjoint();
        let e = eigh(&HermitianMatrix::from_hermitian_part(&m));
        // the degenerate pair is rebuilt from coordinate projections
        let p = e.vectors.columns(0, 2) * e.vectors.columns(0, 2).adjoint();
        let v0 = p.column(0).into_owned();
        let v0 = &v0 / creal(v0.norm());
        assert!((e.vectors.column(0) - v0).norm() < 1e-9);
        assert!(max_abs(&(e.reconstruct() - &m)) < 1e-10);
    }

    #[test]
    fn non_hermitian_rejected_with_asymmetry() {
        let m = CMatrix::from_row_slice(2, 2, &[creal(1.0), creal(0.5), creal(0.0), creal(1.0)]);
        match eigh_checked(&m) {
            Err(Error::NotHermitian { max_asymmetry }) => assert!((max_asymmetry - 0.5).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let s = 1.0 / 2f64.sqrt();
        let bell = PureStateVector::from_real(&[s, 0.0, 0.0, s]).unwrap();
        let rho = DensityMatrix::from_pure(&bell);
        let a = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!(max_abs(&(a.matrix() - DensityMatrix::maximally_mixed(2).matrix())) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let r = random_density(5, 2, 2);
        let s = random_density(6, 3, 3);
        let prod = r.tensor(&s);
        let back = partial_trace(&prod, &[2, 3], &[0]).unwrap();
        assert!(max_abs(&(back.matrix() - r.matrix())) < 1e-12);
        let back = partial_trace(&prod, &[2, 3], &[1]).unwrap();
        assert!(max_abs(&(back.matrix() - s.matrix())) < 1e-12);
    }

    #[test]
    fn partial_trace_of_tracial_state() {
        let t = DensityMatrix::maximally_mixed(4);
        let b = partial_trace(&t, &[2, 2], &[1]).unwrap();
        assert!(max_abs(&(b.matrix() - DensityMatrix::maximally_mixed(2).matrix())) < 1e-15);
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let t = DensityMatrix::maximally_mixed(4);
        assert!(matches!(
            partial_trace(&t, &[2, 3], &[0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn factor_permutation_matches_partial_trace() {
        let rho = random_density(9, 6, 6);
        let p = factor_permutation(&[2, 3], &[1]).unwrap();
        let moved = p.adjoint() * rho.matrix() * &p;
        let direct = partial_trace_matrix(rho.matrix(), &[2, 3], &[1]).unwrap();
        let via = partial_trace_matrix(&moved, &[3, 2], &[0]).unwrap();
        assert!(max_abs(&(direct - via)) < 1e-14);
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.5]).is_ok());
        assert!(DensityMatrix::diagonal(&[0.6, 0.5]).is_err());
        assert!(DensityMatrix::diagonal(&[1.0 + 1e-3, -1e-3]).is_err());
        assert!(DensityMatrix::diagonal(&[1.0 + 1e-11, -1e-11]).is_ok());
    }
}

//! Von Neumann entropy, logarithms on the support, relative entropy.
//!
//! All logarithms are natural.

use crate::error::{Error, Result};
use crate::operator::{
    creal, eigh_raw, eigenvalues, trace_product, CMatrix, DensityMatrix, HermitianMatrix,
    CLAMP_TOL,
};

/// `-Σ p ln p` over a spectrum, clamping `[-CLAMP_TOL, 0)` to zero.
pub fn spectrum_entropy(values: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &p in values {
        if p < -CLAMP_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {p:e}")));
        }
        let p = p.clamp(0.0, 1.0);
        if p > 0.0 {
            s -= p * p.ln();
        }
    }
    Ok(s)
}

/// `-Σ p ln p` ignoring eigenvalues below `floor`; used on the optimizer hot path.
pub(crate) fn spectrum_entropy_floored(values: &[f64], floor: f64) -> f64 {
    values
        .iter()
        .filter(|&&p| p > floor)
        .map(|&p| -p * p.ln())
        .sum()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let s = spectrum_entropy(&eigenvalues(rho.matrix()))?;
    Ok(s.clamp(0.0, (rho.dim() as f64).ln()))
}

/// Logarithm on the support of a positive semidefinite matrix.
///
/// Eigenvalues above `null_tol` are logged; the rest map to zero and are
/// excluded from the returned support projector.
pub fn log_on_support(m: &CMatrix, null_tol: f64) -> Result<(CMatrix, CMatrix)> {
    let n = m.nrows();
    let e = eigh_raw(m);
    let mut log = CMatrix::zeros(n, n);
    let mut support = CMatrix::zeros(n, n);
    for (k, &lam) in e.values.iter().enumerate() {
        if lam < -null_tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {lam:e}")));
        }
        if lam > null_tol {
            let v = e.vectors.column(k);
            let p = v * v.adjoint();
            log += &p * creal(lam.ln());
            support += p;
        }
    }
    Ok((log, support))
}

pub fn matrix_log_on_support(rho: &DensityMatrix, null_tol: f64) -> Result<(HermitianMatrix, CMatrix)> {
    let (log, support) = log_on_support(rho.matrix(), null_tol)?;
    Ok((HermitianMatrix::from_hermitian_part(&log), support))
}

/// Support tolerance used by [`relative_entropy`].
pub const SUPPORT_TOL: f64 = 1e-10;

/// `S(base|component) = Tr ρ_c (ln ρ_c - ln ρ_b)`.
///
/// Returns `f64::INFINITY` when the component is not supported inside the
/// base.
pub fn relative_entropy(base: &DensityMatrix, component: &DensityMatrix) -> Result<f64> {
    if base.dim() != component.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            got: component.dim(),
        });
    }
    relative_entropy_matrices(base.matrix(), component.matrix())
}

/// Same as [`relative_entropy`] on raw positive matrices of equal trace.
pub fn relative_entropy_matrices(base: &CMatrix, component: &CMatrix) -> Result<f64> {
    let (log_b, supp_b) = log_on_support(base, SUPPORT_TOL)?;
    let n = base.nrows();
    let off = CMatrix::identity(n, n) - &supp_b;
    let leak = trace_product(&off, component).re;
    if leak > SUPPORT_TOL {
        return Ok(f64::INFINITY);
    }
    let (log_c, _) = log_on_support(component, SUPPORT_TOL)?;
    let v = trace_product(component, &(log_c - log_b)).re;
    Ok(v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{max_abs, PureStateVector};
    use crate::random::{haar_unitary, random_density, random_pure};

    #[test]
    fn maximally_mixed_qubit() {
        let s = von_neumann_entropy(&DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pure_state_has_zero_entropy() {
        let v = random_pure(3, 5);
        let s = von_neumann_entropy(&DensityMatrix::from_pure(&v)).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_spectrum() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.25, 0.25]).unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        // 0.5 ln 2 + 2·0.25·ln 4
        assert!((s - 1.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_on_support_of_singular_diagonal() {
        let m = DensityMatrix::diagonal(&[0.5, 0.5, 0.0]).unwrap();
        let (log, supp) = matrix_log_on_support(&m, 1e-12).unwrap();
        let l = -(2f64.ln());
        assert!((log.matrix()[(0, 0)].re - l).abs() < 1e-14);
        assert!((log.matrix()[(1, 1)].re - l).abs() < 1e-14);
        assert!(log.matrix()[(2, 2)].norm() < 1e-14);
        assert!((supp.trace().re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_of_identity_is_zero() {
        let id = CMatrix::identity(3, 3);
        let (log, supp) = log_on_support(&id, 1e-12).unwrap();
        assert!(max_abs(&log) < 1e-15);
        assert!(max_abs(&(supp - id)) < 1e-14);
    }

    #[test]
    fn log_rejects_negativity() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![creal(1.0), creal(-1e-3)]));
        assert!(log_on_support(&m, 1e-9).is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        let rho = random_density(1, 3, 3);
        assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-12);

        let mixed = DensityMatrix::maximally_mixed(2);
        let pure = DensityMatrix::from_pure(&PureStateVector::from_real(&[0.6, 0.8]).unwrap());
        let v = relative_entropy(&mixed, &pure).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);

        let p = DensityMatrix::from_pure(&PureStateVector::from_real(&[1.0, 0.0]).unwrap());
        let q = DensityMatrix::from_pure(&PureStateVector::from_real(&[0.0, 1.0]).unwrap());
        assert_eq!(relative_entropy(&p, &q).unwrap(), f64::INFINITY);
    }

    #[test]
    fn unitary_invariance() {
        for seed in 0..5 {
            let rho = random_density(seed, 4, 3);
            let u = haar_unitary(seed + 100, 4);
            let s1 = von_neumann_entropy(&rho).unwrap();
            let s2 = von_neumann_entropy(&rho.conjugate_by(&u).unwrap()).unwrap();
            assert!((s1 - s2).abs() < 1e-10);
        }
    }

    #[test]
    fn concavity_spot_check() {
        for seed in 0..6 {
            let a = random_density(2 * seed, 3, 1 + (seed as usize % 3));
            let b = random_density(2 * seed + 1, 3, 3);
            for t in [0.25, 0.5, 0.75] {
                let m = a.mix(&b, t).unwrap();
                let lhs = von_neumann_entropy(&m).unwrap();
                let rhs = t * von_neumann_entropy(&a).unwrap()
                    + (1.0 - t) * von_neumann_entropy(&b).unwrap();
                assert!(lhs >= rhs - 1e-9);
            }
        }
    }

    #[test]
    fn relative_entropy_positive_on_random_pairs() {
        for seed in 0..8 {
            let a = random_density(seed, 3, 3);
            let b = random_density(seed + 50, 3, 3);
            let d = relative_entropy(&a, &b).unwrap();
            assert!(d > 1e-8, "distinct states must have positive divergence");
        }
    }
}

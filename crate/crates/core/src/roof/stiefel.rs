use crate::error::{Error, Result};
use crate::operator::{creal, eigh, isometry_deviation, CMatrix, CVector, DensityMatrix, RANK_TOL};
use crate::random::q_factor;

use super::Ensemble;

/// An `N × r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    v: CMatrix,
}

impl StiefelPoint {
    pub fn new(v: CMatrix) -> Result<Self> {
        if v.nrows() < v.ncols() || v.ncols() == 0 {
            return Err(Error::InvalidParameter(format!(
                "Stiefel point needs rows >= cols > 0, got {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        let dev = isometry_deviation(&v);
        if dev > 1e-10 {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Ok(Self { v })
    }

    pub(crate) fn new_unchecked(v: CMatrix) -> Self {
        Self { v }
    }

    /// The first `r` columns of the `n × n` identity.
    pub fn identity(n: usize, r: usize) -> Self {
        Self {
            v: CMatrix::identity(n, r),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.v
    }

    pub fn members(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    /// Projection of an ambient direction onto the tangent space at `self`.
    pub fn project_tangent(&self, g: &CMatrix) -> CMatrix {
        let vg = self.v.adjoint() * g;
        let sym = (&vg + vg.adjoint()) * creal(0.5);
        g - &self.v * sym
    }

    /// QR retraction of `V + t·Z`.
    pub fn retract(&self, z: &CMatrix, t: f64) -> StiefelPoint {
        StiefelPoint {
            v: q_factor(&(&self.v + z * creal(t))),
        }
    }

    /// Appends zero rows, i.e. zero-weight members.
    pub fn padded(&self, extra: usize) -> StiefelPoint {
        let (n, r) = self.v.shape();
        let mut v = CMatrix::zeros(n + extra, r);
        v.view_mut((0, 0), (n, r)).copy_from(&self.v);
        StiefelPoint { v }
    }
}

/// `B = E·diag(√p)` over the eigenpairs of `ρ` above the rank tolerance,
/// largest eigenvalue first.
#[derive(Debug, Clone)]
pub struct HjwFactor {
    b: CMatrix,
}

impl HjwFactor {
    pub fn new(rho: &DensityMatrix) -> Self {
        let e = eigh(rho.as_hermitian());
        let d = rho.dim();
        let keep: Vec<usize> = (0..d).rev().filter(|&k| e.values[k] > RANK_TOL).collect();
        let b = CMatrix::from_fn(d, keep.len(), |i, j| {
            e.vectors[(i, keep[j])] * creal(e.values[keep[j]].sqrt())
        });
        Self { b }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.b.ncols()
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// `Ψ = B Vᵀ`; column `i` is the unnormalized member `ψ_i`.
    pub fn members(&self, v: &CMatrix) -> CMatrix {
        &self.b * v.transpose()
    }

    /// Recovers `V` from unnormalized members spanning the range of `ρ`:
    /// `V = (B⁺ Ψ)ᵀ`.
    pub fn coordinates(&self, psi: &CMatrix) -> CMatrix {
        let btb = self.b.adjoint() * &self.b;
        let inv = CMatrix::from_diagonal(&CVector::from_iterator(
            btb.nrows(),
            (0..btb.nrows()).map(|k| creal(1.0 / btb[(k, k)].re)),
        ));
        (inv * self.b.adjoint() * psi).transpose()
    }
}

/// The pure decomposition of `ρ` labelled by `V`.
pub fn hjw_ensemble(v: &StiefelPoint, rho: &DensityMatrix) -> Result<Ensemble> {
    let f = HjwFactor::new(rho);
    if v.rank() != f.rank() {
        return Err(Error::DimensionMismatch {
            expected: f.rank(),
            got: v.rank(),
        });
    }
    let psi = f.members(v.matrix());
    let cols = (0..psi.ncols()).map(|i| psi.column(i).into_owned()).collect();
    Ensemble::from_unnormalized(cols, rho.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, max_abs};
    use crate::random::{haar_stiefel_with, random_density, stream_rng};

    #[test]
    fn identity_gives_eigen_decomposition() {
        let rho = DensityMatrix::diagonal(&[0.2, 0.5, 0.3]).unwrap();
        let ens = hjw_ensemble(&StiefelPoint::identity(3, 3), &rho).unwrap();
        assert_eq!(ens.weights().len(), 3);
        assert!((ens.weights()[0] - 0.5).abs() < 1e-12);
        assert!((ens.weights()[1] - 0.3).abs() < 1e-12);
        assert!((ens.weights()[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn fourier_mixing_of_tracial_qubit() {
        let rho = DensityMatrix::maximally_mixed(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
        let ens = hjw_ensemble(&StiefelPoint::new(v).unwrap(), &rho).unwrap();
        for (w, m) in ens.weights().iter().zip(ens.members()) {
            assert!((w - 0.5).abs() < 1e-12);
            assert!((m.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
            assert!((m.matrix()[(0, 1)].norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn random_mixing_reconstructs() {
        let rho = random_density(5, 3, 2);
        let v = haar_stiefel_with(&mut stream_rng(5, 1), 4, 2);
        let ens = hjw_ensemble(&StiefelPoint::new(v).unwrap(), &rho).unwrap();
        assert!(ens.reconstruction_error() < 1e-10);
    }

    #[test]
    fn wrong_rank_rejected() {
        let rho = random_density(5, 3, 2);
        assert!(hjw_ensemble(&StiefelPoint::identity(3, 3), &rho).is_err());
    }

    #[test]
    fn coordinates_invert_members() {
        let rho = random_density(2, 4, 3);
        let f = HjwFactor::new(&rho);
        let v = haar_stiefel_with(&mut stream_rng(2, 3), 9, 3);
        let back = f.coordinates(&f.members(&v));
        assert!(max_abs(&(back - v)) < 1e-10);
    }

    #[test]
    fn retraction_stays_on_manifold() {
        let mut rng = stream_rng(4, 0);
        let p = StiefelPoint::new(haar_stiefel_with(&mut rng, 5, 2)).unwrap();
        let z = p.project_tangent(&crate::random::ginibre(&mut rng, 5, 2));
        let q = p.retract(&z, 0.3);
        assert!(isometry_deviation(q.matrix()) < 1e-12);
        let herm = p.matrix().adjoint() * &z;
        assert!(max_abs(&(&herm + herm.adjoint())) < 1e-12);
    }
}

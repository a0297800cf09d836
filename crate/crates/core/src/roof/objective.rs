use crate::error::{Error, Result};
use crate::operator::{creal, CMatrix, CVector, DensityMatrix};
use crate::subalgebra::SubalgebraSpec;

use super::stiefel::{HjwFactor, StiefelPoint};
use super::EIGEN_FLOOR;

/// Restricted eigenvalues below this mark a member as sitting on a support boundary.
const BOUNDARY_FLAG: f64 = 1e-8;

pub(crate) fn check_dims(rho: &DensityMatrix, a: &SubalgebraSpec) -> Result<()> {
    if rho.dim() != a.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            got: rho.dim(),
        });
    }
    Ok(())
}

/// `F(ψ) = -R*(ln R̂)ψ` with `R̂ = R(ψψ†)/‖ψ‖²`, the derivative of
/// `‖ψ‖² S(R̂)` with respect to `⟨ψ|`.
pub fn member_function(a: &SubalgebraSpec, psi: &CVector) -> Result<CVector> {
    if psi.len() != a.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            got: psi.len(),
        });
    }
    Ok(a.member_terms(psi, EIGEN_FLOOR, true).1.expect("gradient requested"))
}

pub(crate) struct Evaluation {
    pub value: f64,
    /// Euclidean gradient in the convention `df = Re Tr(G† dV)`.
    pub grad: Option<CMatrix>,
    pub min_eigenvalue: f64,
}

pub(crate) fn evaluate(f: &HjwFactor, v: &CMatrix, a: &SubalgebraSpec, want_grad: bool) -> Evaluation {
    let psi = f.members(v);
    let n = psi.ncols();
    let mut value = 0.0;
    let mut min_eigenvalue = f64::INFINITY;
    let mut fm = want_grad.then(|| CMatrix::zeros(psi.nrows(), n));
    for i in 0..n {
        let col = psi.column(i).into_owned();
        let (g, grad, lo) = a.member_terms(&col, EIGEN_FLOOR, want_grad);
        value += g;
        min_eigenvalue = min_eigenvalue.min(lo);
        if let (Some(fm), Some(grad)) = (fm.as_mut(), grad) {
            fm.set_column(i, &grad);
        }
    }
    let grad = fm.map(|fm| fm.transpose() * f.matrix().conjugate() * creal(2.0));
    Evaluation {
        value,
        grad,
        min_eigenvalue,
    }
}

/// `Σ_i λ_i S(ψ_iψ_i†/λ_i |_A)` over the decomposition labelled by `V`.
pub fn roof_objective(v: &StiefelPoint, rho: &DensityMatrix, a: &SubalgebraSpec) -> Result<f64> {
    check_dims(rho, a)?;
    let f = HjwFactor::new(rho);
    if v.rank() != f.rank() {
        return Err(Error::DimensionMismatch {
            expected: f.rank(),
            got: v.rank(),
        });
    }
    Ok(evaluate(&f, v.matrix(), a, false).value)
}

#[derive(Debug, Clone)]
pub struct RoofGradient {
    /// `G` with `df = Re Tr(G† dV)` for unconstrained `dV`.
    pub euclidean: CMatrix,
    /// Tangent projection of `G` at `V`.
    pub riemannian: CMatrix,
    /// Some member's restriction has an eigenvalue in `(0, 1e-8)`.
    pub near_boundary: bool,
}

pub fn roof_gradient(v: &StiefelPoint, rho: &DensityMatrix, a: &SubalgebraSpec) -> Result<RoofGradient> {
    check_dims(rho, a)?;
    let f = HjwFactor::new(rho);
    if v.rank() != f.rank() {
        return Err(Error::DimensionMismatch {
            expected: f.rank(),
            got: v.rank(),
        });
    }
    let ev = evaluate(&f, v.matrix(), a, true);
    let g = ev.grad.expect("gradient requested");
    Ok(RoofGradient {
        riemannian: v.project_tangent(&g),
        euclidean: g,
        near_boundary: ev.min_eigenvalue < BOUNDARY_FLAG,
    })
}

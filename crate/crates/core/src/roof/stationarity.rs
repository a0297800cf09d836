use crate::error::{Error, Result};
use crate::operator::{creal, eigh, CMatrix, DensityMatrix, RANK_TOL};
use crate::subalgebra::SubalgebraSpec;

use super::objective::{check_dims, member_function};
use super::Ensemble;

/// `Σ‖F(ψ_i)‖` at or below this multiple of `Σ‖ψ_i‖` is rounding noise.
const VANISHING_F: f64 = 1e-10;

/// Relative residual of `F(ψ_i) + Mψ_i = 0` for the best Hermitian `M`.
///
/// With `Ψ` the matrix of members `√λ_i v_i` and `F` the matrix of
/// `F(ψ_i)`, the least-squares multiplier solves `Mρ + ρM = -(FΨ† + ΨF†)`,
/// which is diagonal in the eigenbasis of `ρ`. Returns
/// `‖F + MΨ‖ / Σ_i ‖F(ψ_i)‖`, or 0 when every `F(ψ_i)` vanishes to rounding.
pub fn stationarity_residual(ens: &Ensemble, rho: &DensityMatrix, a: &SubalgebraSpec) -> Result<f64> {
    check_dims(rho, a)?;
    let members = ens
        .unnormalized_members()
        .ok_or_else(|| Error::InvalidState("stationarity needs pure members".into()))?;
    let d = rho.dim();
    let n = members.len();
    let mut psi = CMatrix::zeros(d, n);
    let mut fm = CMatrix::zeros(d, n);
    let mut scale = 0.0;
    let mut mass = 0.0;
    for (i, m) in members.iter().enumerate() {
        let fi = member_function(a, m)?;
        scale += fi.norm();
        mass += m.norm();
        psi.set_column(i, m);
        fm.set_column(i, &fi);
    }
    if scale <= VANISHING_F * mass {
        return Ok(0.0);
    }
    let c = &fm * psi.adjoint();
    let rhs = -(&c + c.adjoint());
    let e = eigh(rho.as_hermitian());
    let w = &e.vectors;
    let rt = w.adjoint() * rhs * w;
    let mut mt = CMatrix::zeros(d, d);
    for k in 0..d {
        for l in 0..d {
            let den = e.values[k].max(0.0) + e.values[l].max(0.0);
            if den > RANK_TOL {
                mt[(k, l)] = rt[(k, l)] / creal(den);
            }
        }
    }
    let m = w * mt * w.adjoint();
    let res = fm + m * psi;
    Ok(res.norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::PureStateVector;

    #[test]
    fn single_pure_member_is_exact() {
        let a = SubalgebraSpec::diagonal(3).unwrap();
        let v = PureStateVector::from_real(&[0.6, 0.0, 0.8]).unwrap();
        let rho = DensityMatrix::from_pure(&v);
        let ens = Ensemble::from_pure(vec![1.0], vec![v], rho.clone()).unwrap();
        assert!(stationarity_residual(&ens, &rho, &a).unwrap() < 1e-12);
    }

    #[test]
    fn orbit_decomposer_is_stationary() {
        let a = SubalgebraSpec::diagonal(3).unwrap();
        let vs = vec![
            PureStateVector::from_real(&[1.0, -1.0, 0.0]).unwrap(),
            PureStateVector::from_real(&[0.0, 1.0, -1.0]).unwrap(),
            PureStateVector::from_real(&[-1.0, 0.0, 1.0]).unwrap(),
        ];
        let t = 1.0 / 3.0;
        let z = -1.0 / 6.0;
        let rho = DensityMatrix::new(CMatrix::from_fn(3, 3, |i, j| creal(if i == j { t } else { z }))).unwrap();
        let ens = Ensemble::from_pure(vec![t; 3], vs, rho.clone()).unwrap();
        assert!(stationarity_residual(&ens, &rho, &a).unwrap() < 1e-12);
    }
}

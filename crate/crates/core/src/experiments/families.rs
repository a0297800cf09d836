use crate::error::{Error, Result};
use crate::operator::{creal, CMatrix, CVector, DensityMatrix, PureStateVector};
use crate::roof::Ensemble;

const RANGE_TOL: f64 = 1e-12;

/// `ω(e_ii) = 1/3`, `ω(e_ij) = z` on `M₃`.
pub fn m3_symmetric_state(z: f64) -> Result<DensityMatrix> {
    if !(-1.0 / 6.0 - RANGE_TOL..=1.0 / 3.0 + RANGE_TOL).contains(&z) {
        return Err(Error::InvalidState(format!(
            "z = {z} outside −1/6 ≤ z ≤ 1/3"
        )));
    }
    let z = z.clamp(-1.0 / 6.0, 1.0 / 3.0);
    DensityMatrix::from_noisy(&CMatrix::from_fn(3, 3, |i, j| {
        creal(if i == j { 1.0 / 3.0 } else { z })
    }))
}

/// `(1 + x σ_x)/2`, the states invariant under conjugation by `σ_x`.
pub fn m2_symmetric_state(x: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0 + RANGE_TOL).contains(&x.abs()) {
        return Err(Error::InvalidState(format!("x = {x} outside |x| ≤ 1")));
    }
    let x = x.clamp(-1.0, 1.0);
    DensityMatrix::from_noisy(&CMatrix::from_row_slice(
        2,
        2,
        &[creal(0.5), creal(x / 2.0), creal(x / 2.0), creal(0.5)],
    ))
}

/// `(a, b)` with `a² + b² = 1`, `ab = x/2` and `a ≥ |b|`; `b` carries the sign of `x`.
pub fn m2_pair_amplitudes(x: f64) -> (f64, f64) {
    let x = x.clamp(-1.0, 1.0);
    let a = ((1.0 + (1.0 - x * x).sqrt()) / 2.0).sqrt();
    (a, x / (2.0 * a))
}

/// The swap-symmetric pair `(a, b)`, `(b, a)` with equal weights.
pub fn m2_pair_decomposition(x: f64) -> Result<Ensemble> {
    let rho = m2_symmetric_state(x)?;
    let (a, b) = m2_pair_amplitudes(x);
    let v1 = PureStateVector::from_real(&[a, b])?;
    let v2 = PureStateVector::from_real(&[b, a])?;
    Ensemble::from_pure(vec![0.5, 0.5], vec![v1, v2], rho)
}

/// Binary entropy of `(p, 1 - p)` in nats.
pub fn binary_entropy(p: f64) -> f64 {
    [p, 1.0 - p]
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| -q * q.ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaInput {
    Density(DensityMatrix),
    Vector(PureStateVector),
    Probabilities(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaOutput {
    Density(DensityMatrix),
    Vector(PureStateVector),
    Probabilities([f64; 3]),
}

/// The isometry `J: e₁ ↦ e₁, e₂ ↦ (e₂ + e₃)/√2`.
pub fn gamma_isometry() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(3, 2, &[creal(1.0), creal(0.0), creal(0.0), creal(s), creal(0.0), creal(s)])
}

/// Embeds `M₂` into `M₃` so that the diagonal algebra goes to the diagonal
/// algebra: `ρ ↦ JρJ†`, `(u, v) ↦ (u, v/√2, v/√2)`, `(a, b) ↦ (a, b/2, b/2)`.
pub fn gamma_map(input: &GammaInput) -> Result<GammaOutput> {
    let j = gamma_isometry();
    match input {
        GammaInput::Density(rho) => {
            if rho.dim() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: rho.dim(),
                });
            }
            Ok(GammaOutput::Density(DensityMatrix::from_noisy(
                &(&j * rho.matrix() * j.adjoint()),
            )?))
        }
        GammaInput::Vector(v) => {
            if v.dim() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: v.dim(),
                });
            }
            let w: CVector = &j * v.amplitudes();
            Ok(GammaOutput::Vector(PureStateVector::with_weight(w)))
        }
        GammaInput::Probabilities(a, b) => Ok(GammaOutput::Probabilities([*a, b / 2.0, b / 2.0])),
    }
}

/// Pushes a pure decomposition on `M₂` to one of `Γ(ρ)` on `M₃`.
pub fn gamma_ensemble(ens: &Ensemble) -> Result<Ensemble> {
    let vs = ens
        .pure_vectors()
        .ok_or_else(|| Error::InvalidState("Γ push-forward needs pure members".into()))?;
    let target = match gamma_map(&GammaInput::Density(ens.target().clone()))? {
        GammaOutput::Density(d) => d,
        _ => unreachable!(),
    };
    let images = vs
        .iter()
        .map(|v| match gamma_map(&GammaInput::Vector(v.clone()))? {
            GammaOutput::Vector(w) => Ok(w),
            _ => unreachable!(),
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::from_pure(ens.weights().to_vec(), images, target)
}

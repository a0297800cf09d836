use crate::error::{Error, Result};
use crate::operator::{creal, max_abs, CMatrix, CVector, DensityMatrix, PureStateVector};
use crate::subalgebra::SubalgebraSpec;

/// Weighted decomposition `target = Σ λ_i ρ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    weights: Vec<f64>,
    members: Vec<DensityMatrix>,
    pure: Option<Vec<PureStateVector>>,
    target: DensityMatrix,
}

const WEIGHT_SUM_TOL: f64 = 1e-9;
const RECONSTRUCTION_TOL: f64 = 1e-8;

impl Ensemble {
    pub fn new(weights: Vec<f64>, members: Vec<DensityMatrix>, target: DensityMatrix) -> Result<Self> {
        Self::validated(weights, members, None, target)
    }

    /// Pure members given as normalized vectors.
    pub fn from_pure(weights: Vec<f64>, vectors: Vec<PureStateVector>, target: DensityMatrix) -> Result<Self> {
        let vectors: Vec<PureStateVector> = vectors.iter().map(|v| v.normalized()).collect();
        let members = vectors.iter().map(DensityMatrix::from_pure).collect();
        Self::validated(weights, members, Some(vectors), target)
    }

    /// Validates stored parts without renormalizing anything.
    pub fn from_parts(
        weights: Vec<f64>,
        members: Vec<DensityMatrix>,
        pure: Option<Vec<PureStateVector>>,
        target: DensityMatrix,
    ) -> Result<Self> {
        if let Some(p) = &pure {
            if p.len() != members.len() {
                return Err(Error::DimensionMismatch {
                    expected: members.len(),
                    got: p.len(),
                });
            }
        }
        Self::validated(weights, members, pure, target)
    }

    /// Pure members given as `√λ_i v_i`; zero vectors are kept with weight 0.
    pub fn from_unnormalized(vectors: Vec<CVector>, target: DensityMatrix) -> Result<Self> {
        let d = target.dim();
        let mut weights = Vec::with_capacity(vectors.len());
        let mut pure = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            let w = v.norm_squared();
            weights.push(w);
            pure.push(if w > 0.0 {
                PureStateVector::new(v)?
            } else {
                let mut e = CVector::zeros(d);
                e[0] = creal(1.0);
                PureStateVector::with_weight(e)
            });
        }
        let members = pure.iter().map(DensityMatrix::from_pure).collect();
        Self::validated(weights, members, Some(pure), target)
    }

    fn validated(
        weights: Vec<f64>,
        members: Vec<DensityMatrix>,
        pure: Option<Vec<PureStateVector>>,
        target: DensityMatrix,
    ) -> Result<Self> {
        if weights.len() != members.len() || weights.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                got: members.len(),
            });
        }
        if let Some(m) = members.iter().find(|m| m.dim() != target.dim()) {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: m.dim(),
            });
        }
        if weights.iter().any(|&w| w.is_nan() || w < 0.0) {
            return Err(Error::InvalidState("negative weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidState(format!("weights sum to {s}")));
        }
        let e = Self {
            weights,
            members,
            pure,
            target,
        };
        let err = e.reconstruction_error();
        if err > RECONSTRUCTION_TOL {
            return Err(Error::InvalidState(format!(
                "ensemble misses its target by {err:e}"
            )));
        }
        Ok(e)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn members(&self) -> &[DensityMatrix] {
        &self.members
    }

    pub fn target(&self) -> &DensityMatrix {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Normalized member vectors when every member is pure.
    pub fn pure_vectors(&self) -> Option<&[PureStateVector]> {
        self.pure.as_deref()
    }

    /// Columns `√λ_i v_i`; `None` for mixed ensembles.
    pub fn unnormalized_members(&self) -> Option<Vec<CVector>> {
        self.pure.as_ref().map(|p| {
            p.iter()
                .zip(&self.weights)
                .map(|(v, &w)| v.amplitudes() * creal(w.sqrt()))
                .collect()
        })
    }

    pub fn reconstruction_error(&self) -> f64 {
        let d = self.target.dim();
        let mut sum = CMatrix::zeros(d, d);
        for (w, m) in self.weights.iter().zip(&self.members) {
            sum += m.matrix() * creal(*w);
        }
        max_abs(&(sum - self.target.matrix()))
    }

    /// Drops members with weight below `threshold` and renormalizes.
    pub fn pruned(&self, threshold: f64) -> Ensemble {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] >= threshold).collect();
        let s: f64 = keep.iter().map(|&i| self.weights[i]).sum();
        Ensemble {
            weights: keep.iter().map(|&i| self.weights[i] / s).collect(),
            members: keep.iter().map(|&i| self.members[i].clone()).collect(),
            pure: self
                .pure
                .as_ref()
                .map(|p| keep.iter().map(|&i| p[i].clone()).collect()),
            target: self.target.clone(),
        }
    }

    /// `Σ λ_i S(ρ_i|_A)`.
    pub fn roof_value(&self, a: &SubalgebraSpec) -> Result<f64> {
        let mut v = 0.0;
        for (w, m) in self.weights.iter().zip(&self.members) {
            if *w > 0.0 {
                v += w * a.restricted_entropy(m)?;
            }
        }
        Ok(v)
    }

    /// Applies `ρ_i ↦ U ρ_i U†` to members and target.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Ensemble> {
        let members = self
            .members
            .iter()
            .map(|m| m.conjugate_by(u))
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            weights: self.weights.clone(),
            members,
            pure: self
                .pure
                .as_ref()
                .map(|p| p.iter().map(|v| v.apply(u)).collect()),
            target: self.target.conjugate_by(u)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weights_and_misfits() {
        let t = DensityMatrix::maximally_mixed(2);
        let e0 = PureStateVector::from_real(&[1.0, 0.0]).unwrap();
        let e1 = PureStateVector::from_real(&[0.0, 1.0]).unwrap();
        assert!(Ensemble::from_pure(vec![0.5, 0.5], vec![e0.clone(), e1.clone()], t.clone()).is_ok());
        assert!(Ensemble::from_pure(vec![0.7, 0.3], vec![e0.clone(), e1.clone()], t.clone()).is_err());
        assert!(Ensemble::from_pure(vec![1.5, -0.5], vec![e0, e1], t).is_err());
    }

    #[test]
    fn pruning_drops_zero_members() {
        let t = DensityMatrix::maximally_mixed(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let vs = vec![
            CVector::from_vec(vec![creal(s), creal(0.0)]),
            CVector::zeros(2),
            CVector::from_vec(vec![creal(0.0), creal(s)]),
        ];
        let e = Ensemble::from_unnormalized(vs, t).unwrap();
        assert_eq!(e.len(), 3);
        let p = e.pruned(1e-12);
        assert_eq!(p.len(), 2);
        assert!(p.reconstruction_error() < 1e-15);
    }
}

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::leaf::RAY_MERGE;
use crate::operator::{c, creal, max_abs, CMatrix, CVector, DensityMatrix, PureStateVector, C64};
use crate::roof::Ensemble;
use crate::subalgebra::SubalgebraSpec;

use super::families::m3_symmetric_state;
use super::group::{permutation_action, GroupAction};

const INVARIANCE_TOL: f64 = 1e-9;
const FIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzFit {
    pub ensemble: Ensemble,
    pub value: f64,
    /// Weight of the first orbit; 1 for a single orbit.
    pub mu: f64,
    pub rays: usize,
    /// The second-orbit generator actually used.
    pub candidate_b: Option<PureStateVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnsatzOutcome {
    Fit(AnsatzFit),
    /// The ansatz cannot reproduce the state; max-abs misfit attached.
    Misfit { residual: f64 },
}

impl AnsatzOutcome {
    pub fn fit(&self) -> Option<&AnsatzFit> {
        match self {
            AnsatzOutcome::Fit(f) => Some(f),
            AnsatzOutcome::Misfit { .. } => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.fit().map(|f| f.value)
    }
}

/// Distinct rays among `{g v}`.
pub fn ray_orbit(g: &GroupAction, v: &PureStateVector) -> Vec<PureStateVector> {
    let v = v.normalized();
    let mut rays: Vec<PureStateVector> = Vec::new();
    for u in g.elements() {
        let w = v.apply(u);
        if !rays.iter().any(|r| r.overlap(&w) > 1.0 - RAY_MERGE) {
            rays.push(w);
        }
    }
    rays
}

fn check_invariant(rho: &DensityMatrix, g: &GroupAction) -> Result<()> {
    if g.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: g.dim(),
        });
    }
    let defect = g.invariance_defect(rho);
    if defect > INVARIANCE_TOL {
        return Err(Error::InvalidParameter(format!(
            "state is not invariant under the group (defect {defect:e})"
        )));
    }
    Ok(())
}

struct Orbit {
    rays: Vec<PureStateVector>,
    average: CMatrix,
    value: f64,
}

fn orbit_data(g: &GroupAction, v: &PureStateVector, a: &SubalgebraSpec) -> Result<Orbit> {
    let rays = ray_orbit(g, v);
    let k = rays.len() as f64;
    let d = v.dim();
    let mut average = CMatrix::zeros(d, d);
    let mut value = 0.0;
    for r in &rays {
        average += r.projector() / creal(k);
        value += a.restricted_entropy(&DensityMatrix::from_pure(r))? / k;
    }
    Ok(Orbit { rays, average, value })
}

/// Equal-weight decomposition over the ray orbit of `candidate`.
pub fn orbit_ansatz(
    rho: &DensityMatrix,
    g: &GroupAction,
    candidate: &PureStateVector,
    a: &SubalgebraSpec,
) -> Result<AnsatzOutcome> {
    check_invariant(rho, g)?;
    let o = orbit_data(g, candidate, a)?;
    let residual = max_abs(&(&o.average - rho.matrix()));
    if residual > FIT_TOL {
        return Ok(AnsatzOutcome::Misfit { residual });
    }
    let k = o.rays.len();
    let ensemble = Ensemble::from_pure(vec![1.0 / k as f64; k], o.rays, rho.clone())?;
    Ok(AnsatzOutcome::Fit(AnsatzFit {
        ensemble,
        value: o.value,
        mu: 1.0,
        rays: k,
        candidate_b: None,
    }))
}

/// Phases of `y` relative to `x` tried by [`solve_h_invariant_candidate`].
pub const PHASE_GRID: usize = 12;

/// Rays `(x, y, y)`, `x ≥ 0`, `y = s e^{iφ}` whose three-ray permutation
/// orbit averages to the symmetric state with off-diagonal `z`:
/// `x² + 2s² = 1` and `2xs cos φ + s² = 3z`, for `φ = 2πk/12`.
/// At `z = -1/6` the antisymmetric ray `(0, 1, -1)/√2` is added.
pub fn solve_h_invariant_candidate(z: f64) -> Vec<PureStateVector> {
    let mut out: Vec<PureStateVector> = Vec::new();
    let mut push = |v: PureStateVector| {
        if !out.iter().any(|r| r.overlap(&v) > 1.0 - RAY_MERGE) {
            out.push(v);
        }
    };
    for k in 0..PHASE_GRID {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / PHASE_GRID as f64;
        let cphi = phi.cos();
        let c2 = cphi * cphi;
        // (1 + 8c²)u² - (4c² + 6z)u + 9z² = 0 with u = s².
        let qa = 1.0 + 8.0 * c2;
        let qb = -(4.0 * c2 + 6.0 * z);
        let qc = 9.0 * z * z;
        let mut disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 && disc > -1e-12 {
            disc = 0.0;
        }
        if disc < 0.0 {
            continue;
        }
        for sign in [-1.0, 1.0] {
            let u = (-qb + sign * disc.sqrt()) / (2.0 * qa);
            if !(-1e-14..=0.5 + 1e-14).contains(&u) {
                continue;
            }
            let u = u.clamp(0.0, 0.5);
            let s = u.sqrt();
            let x = (1.0 - 2.0 * u).max(0.0).sqrt();
            if (2.0 * x * s * cphi + u - 3.0 * z).abs() > 1e-9 {
                continue;
            }
            let y = c(s * phi.cos(), s * phi.sin());
            let v = CVector::from_vec(vec![creal(x), y, y]);
            if let Ok(p) = PureStateVector::new(v) {
                push(p);
            }
        }
    }
    if (z + 1.0 / 6.0).abs() <= 1e-12 {
        push(PureStateVector::from_real(&[0.0, 1.0, -1.0]).expect("non-zero"));
    }
    out
}

/// Lowest-valued single orbit among the H-invariant candidates at `z`.
pub fn best_single_orbit(z: f64, a: &SubalgebraSpec) -> Result<Option<AnsatzFit>> {
    let rho = m3_symmetric_state(z)?;
    let g = permutation_action(3)?;
    let mut best: Option<AnsatzFit> = None;
    for cand in solve_h_invariant_candidate(z) {
        if let AnsatzOutcome::Fit(f) = orbit_ansatz(&rho, &g, &cand, a)? {
            if best.as_ref().is_none_or(|b| f.value < b.value) {
                best = Some(f);
            }
        }
    }
    Ok(best)
}

/// Orthonormal basis of the common eigenspace of the stabilizer of `v`'s ray.
fn stabilizer_subspace(g: &GroupAction, v: &PureStateVector) -> Vec<CVector> {
    let v = v.normalized();
    let d = v.dim();
    let mut rows: Vec<CMatrix> = Vec::new();
    for u in g.elements() {
        let w = u * v.amplitudes();
        let chi: C64 = v.amplitudes().dotc(&w);
        if (chi.norm() - 1.0).abs() < 1e-9 {
            rows.push(u - CMatrix::identity(d, d) * chi);
        }
    }
    let stacked = DMatrix::from_fn(rows.len() * d, d, |r, col| rows[r / d][(r % d, col)]);
    let svd = stacked.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut basis = vec![v.amplitudes().clone()];
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv > 1e-9 {
            continue;
        }
        let mut w: CVector = vt.row(k).adjoint();
        for b in &basis {
            let p = b.dotc(&w);
            w -= b * p;
        }
        let n = w.norm();
        if n > 1e-8 {
            w /= creal(n);
            let big = w.iter().copied().max_by(|x, y| x.norm().total_cmp(&y.norm())).expect("non-empty");
            w *= big.conj() / creal(big.norm());
            basis.push(w);
        }
    }
    basis
}

#[derive(Clone, Copy)]
struct TwoOrbitPoint {
    mu: f64,
    value: f64,
    theta: f64,
}

/// Equal-weight orbits of `cand_a` and of a second generator, mixed with
/// weight `μ`, minimizing `μ E_A + (1-μ) E_B`.
///
/// The second generator ranges over `cos θ·b + sin θ·b⊥` where `b⊥` spans
/// the rest of the stabilizer eigenspace of `cand_b` (real phase), so the
/// optimized vector keeps the symmetry of `cand_b`.
pub fn two_orbit_ansatz(
    rho: &DensityMatrix,
    g: &GroupAction,
    cand_a: &PureStateVector,
    cand_b: &PureStateVector,
    a: &SubalgebraSpec,
) -> Result<AnsatzOutcome> {
    check_invariant(rho, g)?;
    let oa = orbit_data(g, cand_a, a)?;
    let basis = stabilizer_subspace(g, cand_b);
    let gen = |theta: f64| -> CVector {
        if basis.len() < 2 {
            basis[0].clone()
        } else {
            &basis[0] * creal(theta.cos()) + &basis[1] * creal(theta.sin())
        }
    };
    let eval = |theta: f64| -> Result<Option<TwoOrbitPoint>> {
        let b = PureStateVector::new(gen(theta))?;
        let ob = orbit_data(g, &b, a)?;
        let diff = &oa.average - &ob.average;
        let den = diff.norm_squared();
        if den < 1e-20 {
            return Ok(None);
        }
        let num: f64 = (rho.matrix() - &ob.average).iter().zip(diff.iter()).map(|(x, y)| (x.conj() * y).re).sum();
        let mu = num / den;
        if !(-1e-12..=1.0 + 1e-12).contains(&mu) {
            return Ok(None);
        }
        let mu = mu.clamp(0.0, 1.0);
        let fit = &oa.average * creal(mu) + &ob.average * creal(1.0 - mu);
        if max_abs(&(fit - rho.matrix())) > FIT_TOL {
            return Ok(None);
        }
        Ok(Some(TwoOrbitPoint {
            mu,
            value: mu * oa.value + (1.0 - mu) * ob.value,
            theta,
        }))
    };

    let steps = if basis.len() < 2 { 1 } else { 720 };
    let pi = std::f64::consts::PI;
    let thetas: Vec<f64> = (0..steps).map(|k| pi * k as f64 / steps as f64).collect();
    let grid = thetas.iter().map(|&t| eval(t)).collect::<Result<Vec<_>>>()?;
    let mut best: Option<TwoOrbitPoint> = None;
    fn consider(best: &mut Option<TwoOrbitPoint>, p: Option<TwoOrbitPoint>) {
        if let Some(p) = p {
            if best.as_ref().is_none_or(|b| p.value < b.value) {
                *best = Some(p);
            }
        }
    }
    for k in 0..steps {
        let (t0, t1) = (thetas[k], if k + 1 < steps { thetas[k + 1] } else { pi });
        let here = grid[k].as_ref().map(|p| p.mu);
        let next = if k + 1 < steps { grid[k + 1].as_ref().map(|p| p.mu) } else { grid[0].as_ref().map(|p| p.mu) };
        // Feasibility boundary between neighbours: bisect on feasibility.
        if steps > 1 && here.is_some() != next.is_some() {
            let (mut lo, mut hi) = (t0, t1);
            let lo_feasible = here.is_some();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if eval(mid)?.is_some() == lo_feasible {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            consider(&mut best, eval(if lo_feasible { lo } else { hi })?);
        }
    }
    for p in grid.iter().flatten() {
        consider(&mut best, Some(*p));
    }
    // Golden-section polish around the best interior grid point.
    if let Some(b) = best.as_ref().map(|b| b.theta) {
        if steps > 1 {
            let h = pi / steps as f64;
            let (mut lo, mut hi) = (b - h, b + h);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let val = |t: f64| -> Result<f64> { Ok(eval(t)?.map_or(f64::INFINITY, |p| p.value)) };
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            let (mut f1, mut f2) = (val(x1)?, val(x2)?);
            for _ in 0..80 {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = val(x1)?;
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = val(x2)?;
                }
            }
            consider(&mut best, eval(0.5 * (lo + hi))?);
        }
    }

    let Some(best) = best else {
        let residual = max_abs(&(&oa.average - rho.matrix()));
        return Ok(AnsatzOutcome::Misfit { residual });
    };
    let b = PureStateVector::new(gen(best.theta))?;
    let ob = orbit_data(g, &b, a)?;
    let mut weights = Vec::new();
    let mut members = Vec::new();
    if best.mu > 0.0 {
        for r in &oa.rays {
            weights.push(best.mu / oa.rays.len() as f64);
            members.push(r.clone());
        }
    }
    if best.mu < 1.0 {
        for r in &ob.rays {
            weights.push((1.0 - best.mu) / ob.rays.len() as f64);
            members.push(r.clone());
        }
    }
    let rays = members.len();
    let ensemble = Ensemble::from_pure(weights, members, rho.clone())?;
    Ok(AnsatzOutcome::Fit(AnsatzFit {
        ensemble,
        value: best.value,
        mu: best.mu,
        rays,
        candidate_b: Some(b),
    }))
}

/// `(1,1,1)/√3` and `(2,1,1)/√6`, the images of `(1,√2)/√3` and `(√2,1)/√3` under Γ.
pub fn m3_two_orbit_candidates() -> (PureStateVector, PureStateVector) {
    (
        PureStateVector::from_real(&[1.0, 1.0, 1.0]).expect("non-zero"),
        PureStateVector::from_real(&[2.0, 1.0, 1.0]).expect("non-zero"),
    )
}

//! Leaves of the state space: linearity of the roof on a leaf, the
//! compatibility inequality between pure states, its first-order equality,
//! and second-order stability of decompositions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::entropy::log_on_support;
use crate::error::{Error, Result};
use crate::operator::{c, creal, eigh_raw, CMatrix, CVector, DensityMatrix, PureStateVector, C64};
use crate::random::{ginibre, random_pure_with, stream_rng};
use crate::roof::{entanglement_of_formation, Direction, Ensemble, RoofOptions, RoofResult, EIGEN_FLOOR};
use crate::subalgebra::{BlockOperator, SubalgebraSpec};

/// Default stationarity threshold for certifying an optimal ensemble.
pub const CERTIFY_RESIDUAL: f64 = 1e-4;
/// Rays with overlap above `1 - RAY_MERGE` are identified.
pub const RAY_MERGE: f64 = 1e-8;
/// Membership tolerance on `|E(ω) - Σ μ_i E_i|`.
pub const MEMBERSHIP_GAP: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    extremals: Vec<PureStateVector>,
    subalgebra: SubalgebraSpec,
    point_values: Vec<f64>,
}

impl Leaf {
    /// Deduplicates rays and evaluates their restricted entropies.
    pub fn new(extremals: Vec<PureStateVector>, a: &SubalgebraSpec) -> Result<Self> {
        let mut rays: Vec<PureStateVector> = Vec::new();
        for v in extremals {
            if v.dim() != a.ambient_dim() {
                return Err(Error::DimensionMismatch {
                    expected: a.ambient_dim(),
                    got: v.dim(),
                });
            }
            let v = v.normalized();
            if !rays.iter().any(|r| r.overlap(&v) > 1.0 - RAY_MERGE) {
                rays.push(v);
            }
        }
        if rays.is_empty() {
            return Err(Error::InvalidParameter("a leaf needs at least one extremal".into()));
        }
        let point_values = rays
            .iter()
            .map(|v| a.restricted_entropy(&DensityMatrix::from_pure(v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            extremals: rays,
            subalgebra: a.clone(),
            point_values,
        })
    }

    /// Stored parts as given; only shapes are checked.
    pub fn from_parts(extremals: Vec<PureStateVector>, a: SubalgebraSpec, point_values: Vec<f64>) -> Result<Self> {
        if extremals.is_empty() || extremals.len() != point_values.len() {
            return Err(Error::DimensionMismatch {
                expected: extremals.len(),
                got: point_values.len(),
            });
        }
        if let Some(v) = extremals.iter().find(|v| v.dim() != a.ambient_dim()) {
            return Err(Error::DimensionMismatch {
                expected: a.ambient_dim(),
                got: v.dim(),
            });
        }
        Ok(Self {
            extremals,
            subalgebra: a,
            point_values,
        })
    }

    pub fn extremals(&self) -> &[PureStateVector] {
        &self.extremals
    }

    pub fn point_values(&self) -> &[f64] {
        &self.point_values
    }

    pub fn subalgebra(&self) -> &SubalgebraSpec {
        &self.subalgebra
    }

    pub fn len(&self) -> usize {
        self.extremals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extremals.is_empty()
    }

    /// `Σ μ_i |σ_i⟩⟨σ_i|`.
    pub fn mixture(&self, weights: &[f64]) -> Result<DensityMatrix> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: weights.len(),
            });
        }
        let d = self.subalgebra.ambient_dim();
        let mut m = CMatrix::zeros(d, d);
        for (w, v) in weights.iter().zip(&self.extremals) {
            m += v.projector() * creal(*w);
        }
        DensityMatrix::from_noisy(&m)
    }

    /// `Σ μ_i E(σ_i)`.
    pub fn linear_value(&self, weights: &[f64]) -> f64 {
        weights.iter().zip(&self.point_values).map(|(w, e)| w * e).sum()
    }

    /// Image of every extremal under `U`.
    pub fn transformed(&self, u: &CMatrix) -> Result<Leaf> {
        Leaf::new(self.extremals.iter().map(|v| v.apply(u)).collect(), &self.subalgebra)
    }
}

pub fn leaf_from_ensemble(res: &RoofResult, a: &SubalgebraSpec) -> Result<Leaf> {
    leaf_from_ensemble_with(res, a, CERTIFY_RESIDUAL)
}

pub fn leaf_from_ensemble_with(res: &RoofResult, a: &SubalgebraSpec, max_residual: f64) -> Result<Leaf> {
    if res.stationarity_residual.is_nan() || res.stationarity_residual > max_residual {
        return Err(Error::Uncertified {
            residual: res.stationarity_residual,
            threshold: max_residual,
        });
    }
    let vs = res
        .ensemble
        .pure_vectors()
        .ok_or_else(|| Error::InvalidState("leaf needs pure members".into()))?;
    Leaf::new(vs.to_vec(), a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityPoint {
    pub weights: Vec<f64>,
    pub value: f64,
    pub linear: f64,
    pub gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    pub max_gap: f64,
    pub points: Vec<LinearityPoint>,
}

/// Weight vectors `(t, 1-t)` at `points` equally spaced `t ∈ [0, 1]`.
pub fn pair_weight_grid(points: usize) -> Vec<Vec<f64>> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            vec![t, 1.0 - t]
        })
        .collect()
}

/// Compares `E(Σ μ_i σ_i)` with `Σ μ_i E(σ_i)` over a grid of weights.
pub fn leaf_linearity_check(leaf: &Leaf, weight_grid: &[Vec<f64>], opts: &RoofOptions) -> Result<LinearityReport> {
    let points = weight_grid
        .iter()
        .map(|mu| {
            let omega = leaf.mixture(mu)?;
            let res = entanglement_of_formation(&omega, &leaf.subalgebra, opts)?;
            let linear = leaf.linear_value(mu);
            Ok(LinearityPoint {
                weights: mu.clone(),
                value: res.value,
                linear,
                gap: (res.value - linear).abs(),
                converged: res.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_gap = points.iter().map(|p| p.gap).fold(0.0, f64::max);
    Ok(LinearityReport { max_gap, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Non-negative mixing weights when the mixture is solvable.
    pub weights: Option<Vec<f64>>,
    /// Max-abs misfit of the best non-negative mixture.
    pub mixture_residual: f64,
    /// `|E(ω) - Σ μ_i E_i|` when the mixture is solvable.
    pub gap: Option<f64>,
}

/// Lawson–Hanson non-negative least squares.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0);
    for _ in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let z_sub = sub
                .clone()
                .svd(true, true)
                .solve(b, 1e-14)
                .expect("SVD with both factors");
            let mut z = DVector::zeros(n);
            for (c, &k) in idx.iter().enumerate() {
                z[k] = z_sub[c];
            }
            if idx.iter().all(|&k| z[k] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = 1.0f64;
            for &k in &idx {
                if z[k] <= 0.0 {
                    alpha = alpha.min(x[k] / (x[k] - z[k]));
                }
            }
            x = &x + (z - &x) * alpha;
            for &k in &idx {
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    x
}

/// Whether `ω` lies on `leaf`: a non-negative mixture of its extremals at
/// which the roof equals the linear interpolation.
pub fn leaf_membership(omega: &DensityMatrix, leaf: &Leaf, opts: &RoofOptions) -> Result<Membership> {
    let d = leaf.subalgebra.ambient_dim();
    if omega.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: omega.dim(),
        });
    }
    let k = leaf.len();
    let projs: Vec<CMatrix> = leaf.extremals.iter().map(|v| v.projector()).collect();
    let rows = 2 * d * d;
    let a = DMatrix::from_fn(rows, k, |r, col| {
        let e = projs[col][(r / 2 % d, r / 2 / d)];
        if r % 2 == 0 {
            e.re
        } else {
            e.im
        }
    });
    let b = DVector::from_fn(rows, |r, _| {
        let e = omega.matrix()[(r / 2 % d, r / 2 / d)];
        if r % 2 == 0 {
            e.re
        } else {
            e.im
        }
    });
    let mu = nnls(&a, &b);
    let misfit = (&a * &mu - &b).amax();
    if misfit >= 1e-8 {
        return Ok(Membership {
            member: false,
            weights: None,
            mixture_residual: misfit,
            gap: None,
        });
    }
    let weights: Vec<f64> = mu.iter().copied().collect();
    let e = entanglement_of_formation(omega, &leaf.subalgebra, opts)?;
    let gap = (e.value - leaf.linear_value(&weights)).abs();
    Ok(Membership {
        member: gap < MEMBERSHIP_GAP,
        weights: Some(weights),
        mixture_residual: misfit,
        gap: Some(gap),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapDirection {
    /// Convex roof: the inequality reads `rhs ≥ lhs`.
    #[default]
    Entanglement,
    /// Concave roof: the inequality is reversed.
    Conditional,
}

/// Index placement in the cross terms of the compatibility inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapConvention {
    /// `-½ Σ_{i≠j} Tr{[γ_i*γ_j R(|v_j⟩⟨v_i|) + γ_iγ_j* R(|v_i⟩⟨v_j|)] ln R_i}`;
    /// reproduces the first-order equality under `γ = (1, ε)`.
    #[default]
    Validated,
    /// `+Σ_{i≠j} Tr{[γ_jγ_i* R(|v_i⟩⟨v_j|) + γ_iγ_j* R(|v_j⟩⟨v_i|)] ln R_i}`
    /// as typeset.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Largest Frobenius mass of a cross operator outside the support of `R_i`.
    pub off_support_mass: f64,
}

struct RestrictedLog {
    log: BlockOperator,
    support: BlockOperator,
}

fn restricted_log(a: &SubalgebraSpec, v: &CVector) -> Result<RestrictedLog> {
    let r = a.restrict_outer(v, v)?;
    let mut logs = Vec::with_capacity(r.blocks.len());
    let mut supports = Vec::with_capacity(r.blocks.len());
    for b in &r.blocks {
        let h = (b + b.adjoint()) * creal(0.5);
        let (l, p) = log_on_support(&h, EIGEN_FLOOR)?;
        logs.push(l);
        supports.push(p);
    }
    Ok(RestrictedLog {
        log: BlockOperator { blocks: logs },
        support: BlockOperator { blocks: supports },
    })
}

fn off_support(cross: &BlockOperator, support: &BlockOperator) -> f64 {
    cross
        .blocks
        .iter()
        .zip(&support.blocks)
        .map(|(x, p)| (x - p * x * p).norm_squared())
        .sum::<f64>()
        .sqrt()
}

fn weighted_entropy(a: &SubalgebraSpec, w: &CVector) -> Result<f64> {
    let t = w.norm_squared();
    if t < 1e-300 {
        return Ok(0.0);
    }
    let r = a.restrict_outer(w, w)?.scale(1.0 / t);
    Ok(t * r.entropy()?)
}

/// Both sides of the compatibility inequality for states `σ_i` and
/// coefficients `γ_i`, with `w = Σ γ_i σ_i`.
pub fn compatibility_gap(
    sigmas: &[PureStateVector],
    gamma: &[C64],
    a: &SubalgebraSpec,
    direction: GapDirection,
    convention: GapConvention,
) -> Result<CompatibilityReport> {
    if sigmas.len() != gamma.len() || sigmas.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: sigmas.len(),
            got: gamma.len(),
        });
    }
    if gamma.iter().all(|g| g.norm() == 0.0) {
        return Err(Error::InvalidParameter("all coefficients vanish".into()));
    }
    let vs: Vec<CVector> = sigmas.iter().map(|s| s.normalized().amplitudes().clone()).collect();
    let logs = vs.iter().map(|v| restricted_log(a, v)).collect::<Result<Vec<_>>>()?;
    let mut lhs = 0.0;
    let mut mass: f64 = 0.0;
    for (i, v) in vs.iter().enumerate() {
        lhs += gamma[i].norm_sqr() * weighted_entropy(a, v)?;
    }
    for i in 0..vs.len() {
        for j in 0..vs.len() {
            if i == j {
                continue;
            }
            let rij = a.restrict_outer(&vs[i], &vs[j])?;
            let rji = a.restrict_outer(&vs[j], &vs[i])?;
            mass = mass
                .max(off_support(&rij, &logs[i].support))
                .max(off_support(&rji, &logs[i].support));
            let (gi, gj) = (gamma[i], gamma[j]);
            let term = match convention {
                GapConvention::Validated => {
                    (gi.conj() * gj * rji.pairing(&logs[i].log) + gi * gj.conj() * rij.pairing(&logs[i].log))
                        * creal(-0.5)
                }
                GapConvention::Literal => {
                    gj * gi.conj() * rij.pairing(&logs[i].log) + gi * gj.conj() * rji.pairing(&logs[i].log)
                }
            };
            lhs += term.re;
        }
    }
    let mut w = CVector::zeros(vs[0].len());
    for (g, v) in gamma.iter().zip(&vs) {
        w += v * *g;
    }
    let rhs = weighted_entropy(a, &w)?;
    let gap = match direction {
        GapDirection::Entanglement => rhs - lhs,
        GapDirection::Conditional => lhs - rhs,
    };
    Ok(CompatibilityReport {
        lhs,
        rhs,
        gap,
        off_support_mass: mass,
    })
}

/// Seeded coefficient vectors: complex Gaussian entries.
pub fn random_gammas(k: usize, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = stream_rng(seed, 0);
    (0..count)
        .map(|_| ginibre(&mut rng, k, 1).iter().copied().collect())
        .collect()
}

/// `compatibility_gap` over `count` seeded coefficient vectors.
pub fn gamma_sweep(
    sigmas: &[PureStateVector],
    a: &SubalgebraSpec,
    count: usize,
    seed: u64,
    direction: GapDirection,
    convention: GapConvention,
) -> Result<Vec<CompatibilityReport>> {
    random_gammas(sigmas.len(), count, seed)
        .par_iter()
        .map(|g| compatibility_gap(sigmas, g, a, direction, convention))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderResidual {
    pub value: C64,
    /// Frobenius mass of `R(|v₁⟩⟨v₂|)` outside the supports of `R₁` and `R₂`.
    pub off_support_mass: f64,
}

/// `Tr[R(|v₁⟩⟨v₂|)(ln R₁ - ln R₂)]` for normalized `v₁, v₂`.
pub fn first_order_residual(s1: &PureStateVector, s2: &PureStateVector, a: &SubalgebraSpec) -> Result<FirstOrderResidual> {
    let v1 = s1.normalized().amplitudes().clone();
    let v2 = s2.normalized().amplitudes().clone();
    let l1 = restricted_log(a, &v1)?;
    let l2 = restricted_log(a, &v2)?;
    let cross = a.restrict_outer(&v1, &v2)?;
    let value = cross.pairing(&l1.log) - cross.pairing(&l2.log);
    let off = off_support(&cross, &l1.support).max(off_support(&cross, &l2.support));
    Ok(FirstOrderResidual {
        value,
        off_support_mass: off,
    })
}

/// Largest `|first_order_residual|` over all pairs of an ensemble's rays.
pub fn max_pairwise_first_order(vectors: &[PureStateVector], a: &SubalgebraSpec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..vectors.len() {
        for j in (i + 1)..vectors.len() {
            worst = worst.max(first_order_residual(&vectors[i], &vectors[j], a)?.value.norm());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub first_order_max: f64,
    /// Smallest second derivative for the convex roof, largest for the concave one.
    pub min_second_order: f64,
    pub directions: usize,
    pub unstable: bool,
}

const STABILITY_STEP: f64 = 1e-4;
const FIRST_ORDER_FLAG: f64 = 1e-5;
const SECOND_ORDER_FLAG: f64 = 1e-6;

fn mixed_objective(a: &SubalgebraSpec, psi: &CMatrix, h_vals: &[f64], h_vecs: &CMatrix, t: f64) -> f64 {
    let phases = CVector::from_iterator(h_vals.len(), h_vals.iter().map(|&l| c((l * t).cos(), (l * t).sin())));
    let u = h_vecs * CMatrix::from_diagonal(&phases) * h_vecs.adjoint();
    let mixed = psi * u.transpose();
    (0..mixed.ncols())
        .map(|i| a.member_terms(&mixed.column(i).into_owned(), EIGEN_FLOOR, false).0)
        .sum()
}

/// Second-order test of a pure decomposition under `ψ_i ↦ Σ_k U_ik ψ_k`,
/// `U = exp(tA)`, with as many zero-weight members appended as there are
/// members.
///
/// Probes every elementary rotation between two member slots (real and
/// imaginary) plus `probe_count` seeded random generators.
pub fn hjw_stability_check(
    ens: &Ensemble,
    rho: &DensityMatrix,
    a: &SubalgebraSpec,
    direction: Direction,
    probe_count: usize,
) -> Result<StabilityReport> {
    if rho.dim() != a.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim(),
            got: rho.dim(),
        });
    }
    let members = ens
        .unnormalized_members()
        .ok_or_else(|| Error::InvalidState("stability check needs pure members".into()))?;
    let zero = StabilityReport {
        first_order_max: 0.0,
        min_second_order: 0.0,
        directions: 0,
        unstable: false,
    };
    if rho.rank() <= 1 {
        return Ok(zero);
    }
    let d = rho.dim();
    let n = members.len();
    let total = 2 * n;
    let mut psi = CMatrix::zeros(d, total);
    for (i, m) in members.iter().enumerate() {
        psi.set_column(i, m);
    }

    let mut gens: Vec<CMatrix> = Vec::new();
    for i in 0..total {
        for j in (i + 1)..total {
            if i >= n && j >= n {
                continue;
            }
            let mut h = CMatrix::zeros(total, total);
            h[(i, j)] = c(0.0, 1.0);
            h[(j, i)] = c(0.0, -1.0);
            gens.push(h.clone());
            h[(i, j)] = creal(1.0);
            h[(j, i)] = creal(1.0);
            gens.push(h);
        }
    }
    let mut rng = stream_rng(0x57ab, 0);
    for _ in 0..probe_count {
        let g = ginibre(&mut rng, total, total);
        gens.push((&g + g.adjoint()) * creal(0.5));
    }

    // U = exp(tA) with A = iH; H Hermitian and normalized.
    let f0 = mixed_objective(a, &psi, &vec![0.0; total], &CMatrix::identity(total, total), 0.0);
    let s = direction.sign();
    let derivs: Vec<(f64, f64)> = gens
        .par_iter()
        .map(|h| {
            let h = h / creal(h.norm());
            let e = eigh_raw(&h);
            let fp = mixed_objective(a, &psi, &e.values, &e.vectors, STABILITY_STEP);
            let fm = mixed_objective(a, &psi, &e.values, &e.vectors, -STABILITY_STEP);
            let d1 = (fp - fm) / (2.0 * STABILITY_STEP);
            let d2 = (fp - 2.0 * f0 + fm) / (STABILITY_STEP * STABILITY_STEP);
            (d1.abs(), s * d2)
        })
        .collect();
    let first_order_max = derivs.iter().map(|d| d.0).fold(0.0, f64::max);
    let worst = derivs.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    Ok(StabilityReport {
        first_order_max,
        min_second_order: s * worst,
        directions: derivs.len(),
        unstable: first_order_max > FIRST_ORDER_FLAG || worst < -SECOND_ORDER_FLAG,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseSearchReport {
    pub triples_tested: usize,
    pub pairwise_compatible: usize,
    /// Index triples compatible pairwise but violating the joint inequality.
    pub counterexamples: Vec<[usize; 3]>,
    /// Most negative joint gap among pairwise-compatible triples.
    pub worst_joint_gap: f64,
}

fn compatible(set: &[PureStateVector], a: &SubalgebraSpec, samples: usize, seed: u64) -> Result<f64> {
    let gaps = gamma_sweep(set, a, samples, seed, GapDirection::Entanglement, GapConvention::Validated)?;
    Ok(gaps.iter().map(|g| g.gap).fold(f64::INFINITY, f64::min))
}

/// Looks for triples of candidate rays that pass the compatibility test in
/// every pair but fail it jointly.
pub fn pairwise_sufficiency_search(
    candidates: &[PureStateVector],
    a: &SubalgebraSpec,
    gamma_samples: usize,
    seed: u64,
) -> Result<PairwiseSearchReport> {
    let k = candidates.len();
    let mut pair_ok = vec![vec![false; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let pair = [candidates[i].clone(), candidates[j].clone()];
            let ok = compatible(&pair, a, gamma_samples, seed)? >= -1e-6;
            pair_ok[i][j] = ok;
            pair_ok[j][i] = ok;
        }
    }
    let mut report = PairwiseSearchReport {
        triples_tested: 0,
        pairwise_compatible: 0,
        counterexamples: Vec::new(),
        worst_joint_gap: f64::INFINITY,
    };
    for i in 0..k {
        for j in (i + 1)..k {
            for l in (j + 1)..k {
                report.triples_tested += 1;
                if !(pair_ok[i][j] && pair_ok[i][l] && pair_ok[j][l]) {
                    continue;
                }
                report.pairwise_compatible += 1;
                let triple = [candidates[i].clone(), candidates[j].clone(), candidates[l].clone()];
                let g = compatible(&triple, a, gamma_samples, seed)?;
                report.worst_joint_gap = report.worst_joint_gap.min(g);
                if g < -1e-6 {
                    report.counterexamples.push([i, j, l]);
                }
            }
        }
    }
    Ok(report)
}

/// Seeded random rays, a convenience source of search candidates.
pub fn random_rays(dim: usize, count: usize, seed: u64) -> Vec<PureStateVector> {
    let mut rng = stream_rng(seed, 0);
    (0..count).map(|_| random_pure_with(&mut rng, dim)).collect()
}

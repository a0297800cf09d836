//! Conditional entropy `H_ω(B|A)` as a supremum over decompositions.

use rayon::prelude::*;

use crate::entropy::{log_on_support, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::leaf::{hjw_stability_check, StabilityReport};
use crate::operator::{c, creal, max_abs, psd_sqrt, trace, CMatrix, CVector, DensityMatrix, PureStateVector};
use crate::random::{haar_stiefel_with, stream_rng};
use crate::roof::{concave_roof, Direction, Ensemble, RoofOptions, RoofResult};
use crate::subalgebra::{BlockOperator, SubalgebraSpec};

const COMPLETENESS_TOL: f64 = 1e-9;
const LOG_NULL: f64 = 1e-13;
/// Concave-roof certificates carry second-order data up to this many members.
const STABILITY_MAX_MEMBERS: usize = 16;

/// POVM `{E_i}` and the decomposition `λ_i = Tr ρE_i`, `ρ_i = √ρ E_i √ρ / λ_i` it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmDecomposition {
    elements: Vec<CMatrix>,
    weights: Vec<f64>,
    members: Vec<Option<DensityMatrix>>,
    target: DensityMatrix,
}

impl PovmDecomposition {
    pub fn new(elements: Vec<CMatrix>, rho: &DensityMatrix) -> Result<Self> {
        let d = rho.dim();
        if elements.is_empty() {
            return Err(Error::InvalidParameter("POVM needs at least one element".into()));
        }
        let mut sum = CMatrix::zeros(d, d);
        for e in &elements {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: e.nrows(),
                });
            }
            if crate::operator::eigenvalues(e)[0] < -COMPLETENESS_TOL {
                return Err(Error::InvalidParameter("POVM element is not positive".into()));
            }
            sum += e;
        }
        let defect = max_abs(&(sum - CMatrix::identity(d, d)));
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidParameter(format!("POVM elements sum to identity only up to {defect:e}")));
        }
        let s = psd_sqrt(rho.matrix());
        let mut weights = Vec::with_capacity(elements.len());
        let mut members = Vec::with_capacity(elements.len());
        for e in &elements {
            let sigma = &s * e * &s;
            let lambda = trace(&sigma).re.max(0.0);
            weights.push(lambda);
            members.push(if lambda > 1e-14 {
                Some(DensityMatrix::from_noisy(&(sigma / creal(lambda)))?)
            } else {
                None
            });
        }
        Ok(Self {
            elements,
            weights,
            members,
            target: rho.clone(),
        })
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Members with positive weight as an ensemble.
    pub fn ensemble(&self) -> Result<Ensemble> {
        let (w, m): (Vec<f64>, Vec<DensityMatrix>) = self
            .weights
            .iter()
            .zip(&self.members)
            .filter_map(|(&w, m)| m.clone().map(|m| (w, m)))
            .unzip();
        let total: f64 = w.iter().sum();
        Ensemble::new(w.iter().map(|x| x / total).collect(), m, self.target.clone())
    }

    /// `Σ λ_i [S(ρ_i|_B ‖ ρ|_B) - S(ρ_i|_A ‖ ρ|_A)]`.
    pub fn value(&self, b: &SubalgebraSpec, a: &SubalgebraSpec) -> Result<f64> {
        let setup = PairSetup::new(&self.target, b, a)?;
        let s = psd_sqrt(self.target.matrix());
        let mut total = 0.0;
        for e in &self.elements {
            total += setup.term(&(&s * e * &s), false)?.0;
        }
        Ok(total)
    }
}

struct PairSetup<'a> {
    b: &'a SubalgebraSpec,
    a: &'a SubalgebraSpec,
    log_b: BlockOperator,
    log_a: BlockOperator,
}

fn block_log(x: &BlockOperator) -> Result<BlockOperator> {
    Ok(BlockOperator {
        blocks: x
            .blocks
            .iter()
            .map(|m| log_on_support(m, LOG_NULL).map(|(l, _)| l))
            .collect::<Result<_>>()?,
    })
}

impl<'a> PairSetup<'a> {
    fn new(rho: &DensityMatrix, b: &'a SubalgebraSpec, a: &'a SubalgebraSpec) -> Result<Self> {
        for x in [a, b] {
            if x.ambient_dim() != rho.dim() {
                return Err(Error::DimensionMismatch {
                    expected: rho.dim(),
                    got: x.ambient_dim(),
                });
            }
        }
        Ok(Self {
            b,
            a,
            log_b: block_log(&b.restrict(rho.matrix())?)?,
            log_a: block_log(&a.restrict(rho.matrix())?)?,
        })
    }

    /// Contribution of an unnormalized member `σ` and, on request, the
    /// Hermitian `K` with `d(term) = Tr K dσ`. The `λ ln λ` parts of the two
    /// relative entropies cancel.
    fn term(&self, sigma: &CMatrix, want_grad: bool) -> Result<(f64, Option<CMatrix>)> {
        let mut value = 0.0;
        let mut grad: Option<CMatrix> = None;
        for (spec, log_rho, sign) in [(self.b, &self.log_b, 1.0), (self.a, &self.log_a, -1.0)] {
            let sx = spec.restrict(sigma)?;
            let mut g = Vec::with_capacity(sx.blocks.len());
            for (blk, lr) in sx.blocks.iter().zip(&log_rho.blocks) {
                let (ls, _) = log_on_support(blk, LOG_NULL)?;
                let diff = ls - lr;
                value += sign * trace(&(blk * &diff)).re;
                g.push(diff);
            }
            if want_grad {
                let k = spec.adjoint_restrict(&BlockOperator { blocks: g })? * creal(sign);
                grad = Some(match grad {
                    Some(acc) => acc + k,
                    None => k,
                });
            }
        }
        Ok((value, grad))
    }
}

#[derive(Debug, Clone)]
pub struct PairResult {
    pub value: f64,
    pub povm: PovmDecomposition,
    pub restarts_agreeing: usize,
    pub converged: bool,
    pub restart_values: Vec<f64>,
    pub flags: Vec<String>,
}

/// Maximizes `Σ λ_i [S(ρ_i|_B ‖ ρ|_B) - S(ρ_i|_A ‖ ρ|_A)]` over `N`-outcome
/// POVMs `E_i = W_i†W_i`, where the `W_i` are the `d × d` blocks of an
/// isometry `W: C^d → C^{Nd}`. `opts.member_count` is `N` (default `d²`).
pub fn conditional_entropy_pair(
    rho: &DensityMatrix,
    b: &SubalgebraSpec,
    a: &SubalgebraSpec,
    opts: &RoofOptions,
) -> Result<PairResult> {
    let setup = PairSetup::new(rho, b, a)?;
    let d = rho.dim();
    let n = opts.member_count.unwrap_or(d * d);
    if n == 0 {
        return Err(Error::InvalidParameter("POVM needs at least one element".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let s = psd_sqrt(rho.matrix());
    let eval = |w: &CMatrix, want_grad: bool| -> (f64, Option<CMatrix>) {
        let mut value = 0.0;
        let mut grad = want_grad.then(|| CMatrix::zeros(n * d, d));
        for i in 0..n {
            let wi = w.rows(i * d, d);
            let sigma = &s * wi.adjoint() * wi * &s;
            if trace(&sigma).re <= 1e-14 {
                continue;
            }
            let (v, k) = setup.term(&sigma, want_grad).expect("dimensions checked");
            value += v;
            if let (Some(g), Some(k)) = (grad.as_mut(), k) {
                let l = &s * k * &s;
                g.rows_mut(i * d, d).copy_from(&(wi * l * creal(2.0)));
            }
        }
        (value, grad)
    };
    let run_opts = opts.clone().with_direction(Direction::Max);
    let runs: Vec<_> = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let w0 = haar_stiefel_with(&mut stream_rng(opts.seed, k as u64), n * d, d);
            crate::roof::stiefel_descent(eval, w0, &run_opts)
        })
        .collect();
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = k;
        }
    }
    let run = &runs[best];
    let agreeing = runs.iter().filter(|r| (r.value - run.value).abs() <= 10.0 * opts.value_tol).count();
    let elements: Vec<CMatrix> = (0..n)
        .map(|i| {
            let wi = run.v.rows(i * d, d);
            let e = wi.adjoint() * wi;
            (&e + e.adjoint()) * creal(0.5)
        })
        .collect();
    let povm = PovmDecomposition::new(elements, rho)?;
    let mut flags = Vec::new();
    if !run.converged {
        flags.push("unconverged".to_string());
    }
    if agreeing == 1 && opts.restarts > 1 {
        flags.push("isolated_optimum".to_string());
    }
    Ok(PairResult {
        value: run.value,
        povm,
        restarts_agreeing: agreeing,
        converged: run.converged,
        restart_values: runs.iter().map(|r| r.value).collect(),
        flags,
    })
}

#[derive(Debug, Clone)]
pub struct ImbeddedResult {
    /// `S(ρ) - S(ρ|_A) + sup Σ λ_i S(ψ_i|_A)`.
    pub value: f64,
    pub entropy: f64,
    pub restricted_entropy: f64,
    pub roof: RoofResult,
    /// Second-order data for the maximizing decomposition, when small enough to probe.
    pub stability: Option<StabilityReport>,
    pub flags: Vec<String>,
}

/// `H_ρ(M|A)` through the pure-decomposition reduction.
pub fn conditional_entropy_imbedded(rho: &DensityMatrix, a: &SubalgebraSpec, opts: &RoofOptions) -> Result<ImbeddedResult> {
    let roof = concave_roof(rho, a, opts)?;
    let entropy = von_neumann_entropy(rho)?;
    let restricted = a.restricted_entropy(rho)?;
    let mut flags = roof.flags.clone();
    let stability = if roof.ensemble.len() <= STABILITY_MAX_MEMBERS {
        Some(hjw_stability_check(&roof.ensemble, rho, a, Direction::Max, 4)?)
    } else {
        flags.push("stability_skipped".into());
        None
    };
    if stability.as_ref().is_some_and(|s| s.unstable) {
        flags.push("saddle_suspected".into());
    }
    Ok(ImbeddedResult {
        value: entropy - restricted + roof.value,
        entropy,
        restricted_entropy: restricted,
        roof,
        stability,
        flags,
    })
}

/// `n⁴` generalized Bell vectors `Σ_i ω^{ki} |i⟩ ⊗ |i+j⟩ / n` across the cut
/// `C^{n²} | C^n ⊗ C^n`, `ω = e^{2πi/n²}`, with equal weights.
pub fn bell_witness_ensemble(n: usize) -> Result<Ensemble> {
    if n < 2 {
        return Err(Error::InvalidParameter("witness needs n ≥ 2".into()));
    }
    let m = n * n;
    let dim = m * m;
    let mut vectors = Vec::with_capacity(dim);
    for j in 0..m {
        for k in 0..m {
            let mut v = CVector::zeros(dim);
            for i in 0..m {
                let ph = 2.0 * std::f64::consts::PI * ((k * i) % m) as f64 / m as f64;
                v[i * m + (i + j) % m] = c(ph.cos(), ph.sin()) / creal(n as f64);
            }
            vectors.push(PureStateVector::new(v)?);
        }
    }
    Ensemble::from_pure(vec![1.0 / dim as f64; dim], vectors, DensityMatrix::maximally_mixed(dim))
}

#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub n: usize,
    /// `H_τ(A⊗B⊗C | B⊗C)` on `M_{n²} ⊗ M_n ⊗ M_n`.
    pub h_full: f64,
    /// Witness value of the decomposition term and its concavity bound `ln n²`.
    pub witness_value: f64,
    pub witness_bound: f64,
    /// `H_τ(A⊗B | B)` on `M_{n²} ⊗ M_n`, computed.
    pub h_ab: f64,
    /// The published value `2 ln n` for the same quantity.
    pub published_h_ab: f64,
    /// `H_τ(C | C)` on `M_n`.
    pub h_cc: f64,
    pub margin: f64,
    pub nonadditive: bool,
    pub flags: Vec<String>,
}

/// Non-additivity of the conditional entropy for the tracial state.
pub fn additivity_counterexample(n: usize, opts: &RoofOptions) -> Result<CounterexampleReport> {
    if n < 2 {
        return Err(Error::InvalidParameter("counterexample needs n ≥ 2".into()));
    }
    let m = n * n;
    let mut flags = Vec::new();

    let bc = SubalgebraSpec::tensor_factor(&[m, n, n], &[1, 2])?;
    let tau = DensityMatrix::maximally_mixed(m * m);
    let witness = bell_witness_ensemble(n)?;
    let witness_value = witness.roof_value(&bc)?;
    let witness_bound = (m as f64).ln();
    if (witness_value - witness_bound).abs() > 1e-9 {
        flags.push("witness_below_bound".into());
    }
    let h_full = von_neumann_entropy(&tau)? - bc.restricted_entropy(&tau)? + witness_value;

    let b = SubalgebraSpec::tensor_factor(&[m, n], &[1])?;
    let ab = conditional_entropy_imbedded(&DensityMatrix::maximally_mixed(m * n), &b, opts)?;
    flags.extend(ab.flags.iter().map(|f| format!("h_ab:{f}")));
    if ab.roof.value > (n as f64).ln() + 1e-9 {
        flags.push("h_ab:above_bound".into());
    }

    let cc = conditional_entropy_imbedded(&DensityMatrix::maximally_mixed(n), &SubalgebraSpec::full(n)?, opts)?;
    flags.extend(cc.flags.iter().map(|f| format!("h_cc:{f}")));

    let published_h_ab = 2.0 * (n as f64).ln();
    if (ab.value - published_h_ab).abs() > 1e-6 {
        flags.push("h_ab_differs_from_published".into());
    }
    let margin = (h_full - (ab.value + cc.value)).abs();
    Ok(CounterexampleReport {
        n,
        h_full,
        witness_value,
        witness_bound,
        h_ab: ab.value,
        published_h_ab,
        h_cc: cc.value,
        margin,
        nonadditive: margin > 0.1,
        flags,
    })
}

/// Decomposes a diagonal `ρ` with the Fourier projectors `Q_k = |f_k⟩⟨f_k|`,
/// `f_k = (ω^{jk})_j / √n`: members `√ρ Q_k √ρ / Tr ρQ_k`, weights `1/n`.
pub fn mub_style_decomposition(rho: &DensityMatrix) -> Result<Ensemble> {
    let n = rho.dim();
    let off = max_abs(&(rho.matrix() - CMatrix::from_diagonal(&rho.matrix().diagonal())));
    if off > 1e-12 {
        return Err(Error::InvalidState(format!("state is not diagonal (off-diagonal {off:e})")));
    }
    let sqrt_p: Vec<f64> = rho.matrix().diagonal().iter().map(|x| x.re.max(0.0).sqrt()).collect();
    let mut weights = Vec::with_capacity(n);
    let mut members = Vec::with_capacity(n);
    for k in 0..n {
        let v = CVector::from_iterator(
            n,
            (0..n).map(|j| {
                let ph = 2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                c(ph.cos(), ph.sin()) * sqrt_p[j] / (n as f64).sqrt()
            }),
        );
        weights.push(v.norm_squared());
        members.push(PureStateVector::new(v)?);
    }
    Ensemble::from_pure(weights, members, rho.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_density;

    fn quick() -> RoofOptions {
        RoofOptions {
            restarts: 6,
            ..RoofOptions::default()
        }
    }

    #[test]
    fn tracial_qubit_diagonal_is_ln2() {
        let r = conditional_entropy_imbedded(&DensityMatrix::maximally_mixed(2), &SubalgebraSpec::diagonal(2).unwrap(), &quick()).unwrap();
        assert!((r.value - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn trivial_and_full_conditioning() {
        let rho = random_density(5, 3, 3);
        let s = von_neumann_entropy(&rho).unwrap();
        let t = conditional_entropy_imbedded(&rho, &SubalgebraSpec::trivial(3).unwrap(), &quick()).unwrap();
        let f = conditional_entropy_imbedded(&rho, &SubalgebraSpec::full(3).unwrap(), &quick()).unwrap();
        assert!((t.value - s).abs() < 1e-6);
        assert!(f.value.abs() < 1e-6);
    }

    #[test]
    fn povm_completeness_enforced() {
        let rho = DensityMatrix::maximally_mixed(2);
        let e = CMatrix::identity(2, 2) * creal(0.4);
        assert!(PovmDecomposition::new(vec![e.clone(), e], &rho).is_err());
    }

    #[test]
    fn product_basis_povm_value() {
        let rho = DensityMatrix::maximally_mixed(4);
        let a = SubalgebraSpec::tensor_factor(&[2, 2], &[0]).unwrap();
        let b = SubalgebraSpec::tensor_factor(&[2, 2], &[1]).unwrap();
        let elems = (0..2)
            .map(|k| {
                let mut p = CMatrix::zeros(2, 2);
                p[(k, k)] = creal(1.0);
                crate::operator::kron(&CMatrix::identity(2, 2), &p)
            })
            .collect();
        let povm = PovmDecomposition::new(elems, &rho).unwrap();
        assert!((povm.value(&b, &a).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(povm.ensemble().unwrap().reconstruction_error() < 1e-12);
    }

    #[test]
    fn bell_witness_members() {
        let w = bell_witness_ensemble(2).unwrap();
        assert_eq!(w.len(), 16);
        assert!(w.reconstruction_error() < 1e-10);
        let bc = SubalgebraSpec::tensor_factor(&[4, 2, 2], &[1, 2]).unwrap();
        for m in w.members() {
            assert_eq!(m.rank(), 1);
            assert!((bc.restricted_entropy(m).unwrap() - 4f64.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn mub_members_keep_entropy() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        let ens = mub_style_decomposition(&rho).unwrap();
        let a = SubalgebraSpec::diagonal(3).unwrap();
        assert!(ens.reconstruction_error() < 1e-10);
        for (w, m) in ens.weights().iter().zip(ens.members()) {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
            assert!((a.restricted_entropy(m).unwrap() - s).abs() < 1e-10);
        }
        assert!(mub_style_decomposition(&crate::random::random_density(1, 3, 3)).is_err());
    }
}

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, CVector, DensityMatrix};
use crate::random::{haar_stiefel_with, stream_rng};
use crate::subalgebra::SubalgebraSpec;

use super::objective::{check_dims, evaluate};
use super::stationarity::stationarity_residual;
use super::stiefel::{HjwFactor, StiefelPoint};
use super::{Direction, Ensemble, PRUNE_WEIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct RoofOptions {
    /// Number of members `N`; `None` means `r²`.
    pub member_count: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub value_tol: f64,
    pub seed: u64,
    pub direction: Direction,
}

impl Default for RoofOptions {
    fn default() -> Self {
        Self {
            member_count: None,
            restarts: 32,
            max_iters: 3000,
            grad_tol: 1e-8,
            value_tol: 1e-9,
            seed: 0,
            direction: Direction::Min,
        }
    }
}

impl RoofOptions {
    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    fn members_for(&self, r: usize) -> Result<usize> {
        let n = self.member_count.unwrap_or(r * r);
        if n < r || n > 4 * r * r {
            return Err(Error::InvalidParameter(format!(
                "member count {n} outside [{r}, {}]",
                4 * r * r
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0 && self.value_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoofResult {
    pub value: f64,
    /// Best decomposition with members below `1e-12` weight removed.
    pub ensemble: Ensemble,
    /// Mixing matrix of the best restart, zero-weight rows included.
    pub stiefel: StiefelPoint,
    pub stationarity_residual: f64,
    /// Restarts within `10·value_tol` of the best value.
    pub restarts_agreeing: usize,
    /// Iterations spent by the best restart.
    pub iterations: usize,
    pub converged: bool,
    /// Final value of every restart, by restart index.
    pub restart_values: Vec<f64>,
    pub direction: Direction,
    pub flags: Vec<String>,
}

/// Number of consecutive iterations over which the best value must improve
/// by more than `value_tol`.
const PLATEAU_WINDOW: usize = 20;
const ARMIJO: f64 = 1e-4;
const NONMONOTONE_ETA: f64 = 0.85;
const MAX_BACKTRACKS: usize = 60;

pub(crate) struct Run {
    pub(crate) value: f64,
    pub(crate) v: CMatrix,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
}

fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Riemannian gradient descent on `sign·f` with Barzilai–Borwein steps and
/// a nonmonotone Armijo line search.
fn descend(f: &HjwFactor, a: &SubalgebraSpec, v0: CMatrix, opts: &RoofOptions) -> Run {
    stiefel_descent(
        |v, want_grad| {
            let ev = evaluate(f, v, a, want_grad);
            (ev.value, ev.grad)
        },
        v0,
        opts,
    )
}

/// Same iteration for any objective `v ↦ (f(v), ∇f(v))` on a Stiefel manifold.
pub(crate) fn stiefel_descent(
    eval: impl Fn(&CMatrix, bool) -> (f64, Option<CMatrix>),
    v0: CMatrix,
    opts: &RoofOptions,
) -> Run {
    let s = opts.direction.sign();
    let mut v = StiefelPoint::new_unchecked(v0);
    let (f0, g0) = eval(v.matrix(), true);
    let mut fval = s * f0;
    let mut g = v.project_tangent(&(g0.expect("gradient requested") * crate::operator::creal(s)));
    let mut best = (fval, v.matrix().clone());
    let mut history = vec![fval];
    let mut c_ref = fval;
    let mut q = 1.0;
    let mut alpha = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iters {
        iterations = it;
        let gn2 = inner(&g, &g);
        if gn2.sqrt() < opts.grad_tol {
            converged = true;
            break;
        }
        let mut t = alpha;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand = v.retract(&g, -t);
            let fc = s * eval(cand.matrix(), false).0;
            if fc <= c_ref - ARMIJO * t * gn2 {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            // No decrease is representable at this precision.
            converged = true;
            break;
        };
        let (fv, gv) = eval(next.matrix(), true);
        let f_new = s * fv;
        let g_new = next.project_tangent(&(gv.expect("gradient requested") * crate::operator::creal(s)));

        let sk = next.matrix() - v.matrix();
        let yk = &g_new - &g;
        let sy = inner(&sk, &yk).abs();
        alpha = if sy > 0.0 {
            if it % 2 == 0 {
                inner(&sk, &sk) / sy
            } else {
                sy / inner(&yk, &yk)
            }
        } else {
            t * 2.0
        };
        alpha = alpha.clamp(1e-10, 1e6);

        let q_new = NONMONOTONE_ETA * q + 1.0;
        c_ref = (NONMONOTONE_ETA * q * c_ref + f_new) / q_new;
        q = q_new;

        v = next;
        g = g_new;
        fval = f_new;
        if fval < best.0 {
            best = (fval, v.matrix().clone());
        }
        history.push(best.0);
        let k = history.len();
        if k > PLATEAU_WINDOW && history[k - 1 - PLATEAU_WINDOW] - best.0 < opts.value_tol {
            converged = true;
            iterations = it + 1;
            break;
        }
        iterations = it + 1;
    }
    Run {
        value: s * best.0,
        v: best.1,
        iterations,
        converged,
    }
}

fn single_member_result(rho: &DensityMatrix, a: &SubalgebraSpec, opts: &RoofOptions) -> Result<RoofResult> {
    let value = a.restricted_entropy(rho)?;
    let f = HjwFactor::new(rho);
    let psi: CVector = f.matrix().column(0).into_owned();
    let ensemble = Ensemble::from_unnormalized(vec![psi], rho.clone())?;
    Ok(RoofResult {
        value,
        ensemble,
        stiefel: StiefelPoint::identity(1, 1),
        stationarity_residual: 0.0,
        restarts_agreeing: opts.restarts,
        iterations: 0,
        converged: true,
        restart_values: vec![value; opts.restarts],
        direction: opts.direction,
        flags: vec!["pure_state".into()],
    })
}

/// Best of `opts.restarts` seeded descents; restart `k` starts from a Haar
/// Stiefel point drawn from stream `k`.
pub fn optimize_roof(rho: &DensityMatrix, a: &SubalgebraSpec, opts: &RoofOptions) -> Result<RoofResult> {
    check_dims(rho, a)?;
    let f = HjwFactor::new(rho);
    let r = f.rank();
    let n = opts.members_for(r)?;
    if r == 1 {
        return single_member_result(rho, a, opts);
    }

    let runs: Vec<Run> = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let v0 = haar_stiefel_with(&mut stream_rng(opts.seed, k as u64), n, r);
            descend(&f, a, v0, opts)
        })
        .collect();

    let s = opts.direction.sign();
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if s * run.value < s * runs[best].value {
            best = k;
        }
    }
    let run = &runs[best];
    let agreeing = runs
        .iter()
        .filter(|r| (r.value - run.value).abs() <= 10.0 * opts.value_tol)
        .count();

    let psi = f.members(&run.v);
    let full = Ensemble::from_unnormalized(
        (0..n).map(|i| psi.column(i).into_owned()).collect(),
        rho.clone(),
    )?;
    let ensemble = full.pruned(PRUNE_WEIGHT);
    let residual = stationarity_residual(&ensemble, rho, a)?;

    let mut flags = Vec::new();
    if !run.converged {
        flags.push("unconverged".to_string());
    }
    if agreeing == 1 && opts.restarts > 1 {
        flags.push("isolated_optimum".to_string());
    }
    let value = match opts.direction {
        Direction::Min => run.value.max(0.0),
        Direction::Max => run.value,
    };
    Ok(RoofResult {
        value,
        ensemble,
        stiefel: StiefelPoint::new_unchecked(run.v.clone()),
        stationarity_residual: residual,
        restarts_agreeing: agreeing,
        iterations: run.iterations,
        converged: run.converged,
        restart_values: runs.iter().map(|r| r.value).collect(),
        direction: opts.direction,
        flags,
    })
}

/// Convex roof of the restricted entropy.
pub fn entanglement_of_formation(rho: &DensityMatrix, a: &SubalgebraSpec, opts: &RoofOptions) -> Result<RoofResult> {
    optimize_roof(rho, a, &opts.clone().with_direction(Direction::Min))
}

/// Concave roof of the restricted entropy.
pub fn concave_roof(rho: &DensityMatrix, a: &SubalgebraSpec, opts: &RoofOptions) -> Result<RoofResult> {
    optimize_roof(rho, a, &opts.clone().with_direction(Direction::Max))
}

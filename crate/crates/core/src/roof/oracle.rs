use crate::error::Result;
use crate::operator::{c, CMatrix, DensityMatrix};
use crate::random::{haar_stiefel_with, q_factor, stream_rng};
use crate::subalgebra::SubalgebraSpec;

use super::objective::{check_dims, evaluate};
use super::stiefel::HjwFactor;
use super::Direction;

/// Derivative-free search over decompositions, independent of the descent code.
///
/// Rank 2 with two members: exhaustive grid over `SU(2)` mixings
/// `[[e^{iα}cosθ, e^{iβ}sinθ], [-e^{-iβ}sinθ, e^{-iα}cosθ]]` with about
/// `budget` points, then pattern-search refinement of the best cells.
/// Otherwise: `budget` Haar samples with `r²` members and coordinatewise
/// refinement of the best one. Returns the best value seen: an upper bound
/// for the infimum, a lower bound for the supremum.
pub fn brute_force_roof(rho: &DensityMatrix, a: &SubalgebraSpec, budget: usize, direction: Direction) -> Result<f64> {
    check_dims(rho, a)?;
    let f = HjwFactor::new(rho);
    let r = f.rank();
    if r == 1 {
        return a.restricted_entropy(rho);
    }
    let s = direction.sign();
    let cost = |v: &CMatrix| s * evaluate(&f, v, a, false).value;
    let best = if r == 2 {
        su2_grid(&cost, budget.max(64))
    } else {
        sampled(&cost, r, budget.max(1))
    };
    Ok(s * best)
}

fn su2(p: &[f64; 3]) -> CMatrix {
    let (th, al, be) = (p[0], p[1], p[2]);
    let (st, ct) = th.sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c(al.cos(), al.sin()) * ct,
            c(be.cos(), be.sin()) * st,
            -c(be.cos(), -be.sin()) * st,
            c(al.cos(), -al.sin()) * ct,
        ],
    )
}

fn su2_grid(cost: &impl Fn(&CMatrix) -> f64, budget: usize) -> f64 {
    let k = (budget as f64).cbrt().floor().max(4.0) as usize;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let two_pi = 2.0 * std::f64::consts::PI;
    let steps = [half_pi / (k - 1) as f64, two_pi / k as f64, two_pi / k as f64];
    let mut cells: Vec<(f64, [f64; 3])> = Vec::with_capacity(k * k * k);
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                let p = [i as f64 * steps[0], j as f64 * steps[1], l as f64 * steps[2]];
                cells.push((cost(&su2(&p)), p));
            }
        }
    }
    cells.sort_by(|x, y| x.0.total_cmp(&y.0));
    cells
        .iter()
        .take(8)
        .map(|&(v, p)| pattern_search(|q| cost(&su2(q)), p, v, steps))
        .fold(f64::INFINITY, f64::min)
}

fn pattern_search(cost: impl Fn(&[f64; 3]) -> f64, mut p: [f64; 3], mut best: f64, steps: [f64; 3]) -> f64 {
    let mut h = steps.map(|s| s * 0.5);
    while h.iter().any(|&x| x > 1e-10) {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut q = p;
                q[axis] += sign * h[axis];
                let v = cost(&q);
                if v < best {
                    best = v;
                    p = q;
                    improved = true;
                }
            }
        }
        if !improved {
            h = h.map(|x| x * 0.5);
        }
    }
    best
}

fn sampled(cost: &impl Fn(&CMatrix) -> f64, r: usize, budget: usize) -> f64 {
    let n = r * r;
    let mut rng = stream_rng(0x0b5e_55ed, 0);
    let mut best_v = haar_stiefel_with(&mut rng, n, r);
    let mut best = cost(&best_v);
    for _ in 1..budget {
        let v = haar_stiefel_with(&mut rng, n, r);
        let fv = cost(&v);
        if fv < best {
            best = fv;
            best_v = v;
        }
    }
    let mut h = 0.1;
    let mut sweeps = 0;
    while h > 1e-9 && sweeps < 400 {
        sweeps += 1;
        let mut improved = false;
        for i in 0..n {
            for j in 0..r {
                for dir in [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)] {
                    let mut v = best_v.clone();
                    v[(i, j)] += dir * h;
                    let v = q_factor(&v);
                    let fv = cost(&v);
                    if fv < best {
                        best = fv;
                        best_v = v;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best
}

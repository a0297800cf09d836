//! Seeded random matrices.
//!
//! The generator is ChaCha20 (`rand_chacha::ChaCha20Rng`), which is
//! counter-based: a `(seed, stream)` pair addresses an independent
//! keystream. Optimizer restart `k` always draws from stream `k`, so the
//! numbers a restart sees do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operator::{c, creal, CMatrix, CVector, DensityMatrix, HermitianMatrix, PureStateVector};

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re * scale, im * scale)
    })
}

/// Q factor of a tall matrix with the phases of `diag(R)` moved into Q.
///
/// Applied to a Ginibre matrix this samples the Haar measure on the Stiefel
/// manifold; applied to `V + tZ` it is the QR retraction.
pub fn q_factor(m: &CMatrix) -> CMatrix {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..q.ncols() {
        let d = r[(k, k)];
        let n = d.norm();
        let phase = if n > 0.0 { d / creal(n) } else { creal(1.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

pub fn haar_stiefel_with(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> CMatrix {
    q_factor(&ginibre(rng, rows, cols))
}

pub fn haar_unitary_with(rng: &mut ChaCha20Rng, dim: usize) -> CMatrix {
    haar_stiefel_with(rng, dim, dim)
}

pub fn haar_unitary(seed: u64, dim: usize) -> CMatrix {
    haar_unitary_with(&mut stream_rng(seed, 0), dim)
}

pub fn random_pure_with(rng: &mut ChaCha20Rng, dim: usize) -> PureStateVector {
    let g = ginibre(rng, dim, 1);
    PureStateVector::new(CVector::from_column_slice(g.as_slice()))
        .expect("Gaussian vector is non-zero with probability one")
}

pub fn random_pure(seed: u64, dim: usize) -> PureStateVector {
    random_pure_with(&mut stream_rng(seed, 0), dim)
}

/// `G G† / Tr` for a `dim × rank` Ginibre `G`.
pub fn random_density_with(rng: &mut ChaCha20Rng, dim: usize, rank: usize) -> DensityMatrix {
    assert!(rank >= 1 && rank <= dim, "rank must lie in 1..=dim");
    let g = ginibre(rng, dim, rank);
    DensityMatrix::from_noisy(&(&g * g.adjoint())).expect("Wishart matrix is a valid state")
}

pub fn random_density(seed: u64, dim: usize, rank: usize) -> DensityMatrix {
    random_density_with(&mut stream_rng(seed, 0), dim, rank)
}

pub fn random_hermitian(seed: u64, dim: usize) -> HermitianMatrix {
    let g = ginibre(&mut stream_rng(seed, 0), dim, dim);
    HermitianMatrix::from_hermitian_part(&g)
}

/// Random point of the probability simplex (flat Dirichlet).
pub fn random_simplex_with(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rand::Rng::random(rng);
            -(1.0 - u).ln()
        })
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomKind {
    HaarUnitary,
    Pure,
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RandomOutput {
    Unitary(CMatrix),
    Pure(PureStateVector),
    Density(DensityMatrix),
}

/// Single entry point over the generators; identical inputs give identical bytes.
pub fn random_kit(seed: u64, kind: RandomKind, dim: usize, rank: Option<usize>) -> Result<RandomOutput> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    Ok(match kind {
        RandomKind::HaarUnitary => RandomOutput::Unitary(haar_unitary_with(&mut rng, dim)),
        RandomKind::Pure => RandomOutput::Pure(random_pure_with(&mut rng, dim)),
        RandomKind::Density => {
            let rank = rank.unwrap_or(dim);
            if rank > dim || rank == 0 {
                return Err(Error::RankTooLarge { rank, dim });
            }
            RandomOutput::Density(random_density_with(&mut rng, dim, rank))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{eigenvalues, isometry_deviation};

    #[test]
    fn haar_unitary_is_deterministic_and_unitary() {
        let a = random_kit(7, RandomKind::HaarUnitary, 3, None).unwrap();
        let b = random_kit(7, RandomKind::HaarUnitary, 3, None).unwrap();
        match (a, b) {
            (RandomOutput::Unitary(x), RandomOutput::Unitary(y)) => {
                let bx: Vec<u64> = x.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect();
                let by: Vec<u64> = y.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect();
                assert_eq!(bx, by);
                assert!(isometry_deviation(&x) < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn density_has_requested_rank() {
        match random_kit(7, RandomKind::Density, 4, Some(2)).unwrap() {
            RandomOutput::Density(rho) => {
                let n = eigenvalues(rho.matrix()).iter().filter(|&&x| x > 1e-9).count();
                assert_eq!(n, 2);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn pure_is_normalized() {
        match random_kit(7, RandomKind::Pure, 5, None).unwrap() {
            RandomOutput::Pure(v) => assert!((v.weight() - 1.0).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn rank_above_dim_rejected() {
        assert!(matches!(
            random_kit(1, RandomKind::Density, 3, Some(4)),
            Err(Error::RankTooLarge { rank: 4, dim: 3 })
        ));
    }

    #[test]
    fn streams_differ() {
        let a = ginibre(&mut stream_rng(3, 0), 2, 2);
        let b = ginibre(&mut stream_rng(3, 1), 2, 2);
        assert!((a - b).norm() > 1e-3);
    }
}

//! Finite-dimensional *-subalgebras in framed block form.
//!
//! A subalgebra of `M_d` is stored as `U (⊕_k M_{n_k} ⊗ 1_{m_k}) U†`.
//! Inside block `k` the ambient index is `offset_k + a·m_k + μ` with `a` the
//! block index and `μ` the multiplicity index. Restricting a state to the
//! subalgebra keeps, for every block, the partial trace over the
//! multiplicity space of the corresponding diagonal block of `U† X U`.

use crate::entropy::{spectrum_entropy, spectrum_entropy_floored};
use crate::error::{Error, Result};
use crate::operator::{
    creal, eigenvalues, factor_permutation, isometry_deviation, max_asymmetry, CMatrix, CVector,
    DensityMatrix, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub dim: usize,
    pub multiplicity: usize,
}

impl Block {
    pub fn new(dim: usize, multiplicity: usize) -> Self {
        Self { dim, multiplicity }
    }
}

/// Constructor tag remembered for serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubalgebraKind {
    Diagonal,
    TensorFactor { dims: Vec<usize>, keep: Vec<usize> },
    Full,
    Trivial,
    Framed,
}

impl SubalgebraKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SubalgebraKind::Diagonal => "diagonal",
            SubalgebraKind::TensorFactor { .. } => "tensor_factor",
            SubalgebraKind::Full => "full",
            SubalgebraKind::Trivial => "trivial",
            SubalgebraKind::Framed => "framed",
        }
    }
}

/// Request for [`make_subalgebra`].
#[derive(Debug, Clone, PartialEq)]
pub enum SubalgebraRequest {
    Diagonal { n: usize },
    TensorFactor { dims: Vec<usize>, keep: Vec<usize> },
    Full { n: usize },
    Trivial { n: usize },
    Framed { blocks: Vec<Block>, framing: CMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubalgebraSpec {
    ambient_dim: usize,
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    framing: Option<CMatrix>,
    kind: SubalgebraKind,
}

/// One matrix per block of a [`SubalgebraSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    pub blocks: Vec<CMatrix>,
}

impl BlockOperator {
    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn is_hermitian(&self) -> Vec<bool> {
        self.blocks
            .iter()
            .map(|b| max_asymmetry(b) <= 1e-12 * b.norm().max(1.0))
            .collect()
    }

    /// `Σ_k Tr[A_k B_k]`.
    pub fn pairing(&self, other: &BlockOperator) -> C64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| crate::operator::trace_product(a, b))
            .sum()
    }

    /// Block spectra, concatenated.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(eigenvalues).collect()
    }

    /// `-Σ_k Tr[d_k ln d_k]`.
    pub fn entropy(&self) -> Result<f64> {
        spectrum_entropy(&self.eigenvalues())
    }

    pub fn scale(&self, s: f64) -> BlockOperator {
        BlockOperator {
            blocks: self.blocks.iter().map(|b| b * creal(s)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &BlockOperator) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| crate::operator::max_abs(&(a - b)))
            .fold(0.0, f64::max)
    }
}

impl SubalgebraSpec {
    /// Validates and builds a spec; `framing = None` means identity.
    pub fn new(ambient_dim: usize, blocks: Vec<Block>, framing: Option<CMatrix>) -> Result<Self> {
        Self::with_kind(ambient_dim, blocks, framing, SubalgebraKind::Framed)
    }

    /// Like [`SubalgebraSpec::new`] but keeps the given constructor tag.
    pub fn with_kind(
        ambient_dim: usize,
        blocks: Vec<Block>,
        framing: Option<CMatrix>,
        kind: SubalgebraKind,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("block list is empty".into()));
        }
        if blocks.iter().any(|b| b.dim == 0 || b.multiplicity == 0) {
            return Err(Error::InvalidParameter("block dimensions must be positive".into()));
        }
        let total: usize = blocks.iter().map(|b| b.dim * b.multiplicity).sum();
        if total != ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                got: total,
            });
        }
        if let Some(u) = &framing {
            if u.nrows() != ambient_dim || u.ncols() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    got: u.nrows(),
                });
            }
            let dev = isometry_deviation(u);
            if dev > 1e-10 {
                return Err(Error::NotUnitary { deviation: dev });
            }
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut off = 0;
        for b in &blocks {
            offsets.push(off);
            off += b.dim * b.multiplicity;
        }
        Ok(Self {
            ambient_dim,
            blocks,
            offsets,
            framing,
            kind,
        })
    }

    pub fn diagonal(n: usize) -> Result<Self> {
        Self::with_kind(n, vec![Block::new(1, 1); n], None, SubalgebraKind::Diagonal)
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::with_kind(n, vec![Block::new(n, 1)], None, SubalgebraKind::Full)
    }

    pub fn trivial(n: usize) -> Result<Self> {
        Self::with_kind(n, vec![Block::new(1, n)], None, SubalgebraKind::Trivial)
    }

    /// The factors listed in `keep` of `⊗_k M_{dims[k]}`, tensored with identity
    /// on the rest. Kept factors are moved to the front by the framing.
    pub fn tensor_factor(dims: &[usize], keep: &[usize]) -> Result<Self> {
        if dims.is_empty() || keep.is_empty() {
            return Err(Error::InvalidParameter("need factor dimensions and a kept factor".into()));
        }
        let mut seen = keep.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != keep.len() || keep.iter().any(|&k| k >= dims.len()) {
            return Err(Error::InvalidParameter("kept factors must be distinct valid indices".into()));
        }
        let n: usize = keep.iter().map(|&k| dims[k]).product();
        let total: usize = dims.iter().product();
        let p = factor_permutation(dims, keep)?;
        let is_identity = (0..total).all(|i| p[(i, i)].re == 1.0);
        Self::with_kind(
            total,
            vec![Block::new(n, total / n)],
            if is_identity { None } else { Some(p) },
            SubalgebraKind::TensorFactor {
                dims: dims.to_vec(),
                keep: keep.to_vec(),
            },
        )
    }

    pub fn framed(blocks: Vec<Block>, framing: CMatrix) -> Result<Self> {
        let d = framing.nrows();
        Self::with_kind(d, blocks, Some(framing), SubalgebraKind::Framed)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn framing(&self) -> Option<&CMatrix> {
        self.framing.as_ref()
    }

    pub fn kind(&self) -> &SubalgebraKind {
        &self.kind
    }

    /// `Σ n_k`, the dimension on which restricted states live.
    pub fn restricted_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                got: n,
            });
        }
        Ok(())
    }

    fn unframe_matrix(&self, x: &CMatrix) -> CMatrix {
        match &self.framing {
            Some(u) => u.adjoint() * x * u,
            None => x.clone(),
        }
    }

    fn unframe_vector(&self, v: &CVector) -> CVector {
        match &self.framing {
            Some(u) => u.adjoint() * v,
            None => v.clone(),
        }
    }

    /// The restriction map; linear, applied to any square matrix.
    pub fn restrict(&self, x: &CMatrix) -> Result<BlockOperator> {
        if x.nrows() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: x.ncols(),
            });
        }
        self.check_dim(x.nrows())?;
        let y = self.unframe_matrix(x);
        let blocks = self
            .blocks
            .iter()
            .zip(&self.offsets)
            .map(|(b, &off)| {
                let m = b.multiplicity;
                CMatrix::from_fn(b.dim, b.dim, |i, j| {
                    (0..m).map(|mu| y[(off + i * m + mu, off + j * m + mu)]).sum()
                })
            })
            .collect();
        Ok(BlockOperator { blocks })
    }

    /// `restrict(|v⟩⟨w|)` without forming the outer product.
    pub fn restrict_outer(&self, v: &CVector, w: &CVector) -> Result<BlockOperator> {
        self.check_dim(v.len())?;
        self.check_dim(w.len())?;
        let fv = self.unframe_vector(v);
        let fw = self.unframe_vector(w);
        Ok(self.restrict_outer_unframed(&fv, &fw))
    }

    fn restrict_outer_unframed(&self, fv: &CVector, fw: &CVector) -> BlockOperator {
        let blocks = self
            .blocks
            .iter()
            .zip(&self.offsets)
            .map(|(b, &off)| {
                let m = b.multiplicity;
                CMatrix::from_fn(b.dim, b.dim, |i, j| {
                    (0..m)
                        .map(|mu| fv[off + i * m + mu] * fw[off + j * m + mu].conj())
                        .sum()
                })
            })
            .collect();
        BlockOperator { blocks }
    }

    fn check_aligned(&self, y: &BlockOperator) -> Result<()> {
        if y.blocks.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: self.blocks.len(),
                got: y.blocks.len(),
            });
        }
        for (b, m) in self.blocks.iter().zip(&y.blocks) {
            if m.nrows() != b.dim || m.ncols() != b.dim {
                return Err(Error::DimensionMismatch {
                    expected: b.dim,
                    got: m.nrows(),
                });
            }
        }
        Ok(())
    }

    /// `U (⊕_k y_k ⊗ 1_{m_k}) U†`.
    pub fn adjoint_restrict(&self, y: &BlockOperator) -> Result<CMatrix> {
        self.check_aligned(y)?;
        let d = self.ambient_dim;
        let mut out = CMatrix::zeros(d, d);
        for ((b, &off), yk) in self.blocks.iter().zip(&self.offsets).zip(&y.blocks) {
            let m = b.multiplicity;
            for i in 0..b.dim {
                for j in 0..b.dim {
                    for mu in 0..m {
                        out[(off + i * m + mu, off + j * m + mu)] = yk[(i, j)];
                    }
                }
            }
        }
        Ok(match &self.framing {
            Some(u) => u * out * u.adjoint(),
            None => out,
        })
    }

    /// `adjoint_restrict(y) · v` without forming the ambient matrix.
    pub fn adjoint_apply(&self, y: &BlockOperator, v: &CVector) -> Result<CVector> {
        self.check_aligned(y)?;
        self.check_dim(v.len())?;
        let fv = self.unframe_vector(v);
        let out = self.adjoint_apply_unframed(y, &fv);
        Ok(match &self.framing {
            Some(u) => u * out,
            None => out,
        })
    }

    fn adjoint_apply_unframed(&self, y: &BlockOperator, fv: &CVector) -> CVector {
        let mut out = CVector::zeros(self.ambient_dim);
        for ((b, &off), yk) in self.blocks.iter().zip(&self.offsets).zip(&y.blocks) {
            let m = b.multiplicity;
            for i in 0..b.dim {
                for mu in 0..m {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..b.dim {
                        acc += yk[(i, j)] * fv[off + j * m + mu];
                    }
                    out[off + i * m + mu] = acc;
                }
            }
        }
        out
    }

    /// Entropy of the restricted state, in nats.
    pub fn restricted_entropy(&self, rho: &DensityMatrix) -> Result<f64> {
        let r = self.restrict(rho.matrix())?;
        let s = r.entropy()?;
        Ok(s.clamp(0.0, (self.restricted_dim() as f64).ln()))
    }

    /// Weighted entropy `‖ψ‖² S(R(ψψ†)/‖ψ‖²)` and, when requested, the
    /// vector `-R*(ln R̂) ψ` with logs on eigenvalues above `floor`.
    ///
    /// Returns `(value, gradient, min_positive_eigenvalue)`; the last item
    /// lets callers notice members sitting close to a support boundary.
    pub(crate) fn member_terms(
        &self,
        psi: &CVector,
        floor: f64,
        want_grad: bool,
    ) -> (f64, Option<CVector>, f64) {
        let t = psi.norm_squared();
        if t < crate::roof::MEMBER_WEIGHT_FLOOR {
            return (0.0, want_grad.then(|| CVector::zeros(psi.len())), 1.0);
        }
        let fv = self.unframe_vector(psi);
        let mut value = 0.0;
        let mut min_pos = f64::INFINITY;
        let mut grad_unframed = want_grad.then(|| CVector::zeros(psi.len()));
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            let m = b.multiplicity;
            if b.dim == 1 {
                let p: f64 = (0..m).map(|mu| fv[off + mu].norm_sqr()).sum::<f64>() / t;
                if p > floor {
                    value -= p * p.ln();
                    min_pos = min_pos.min(p);
                    if let Some(g) = grad_unframed.as_mut() {
                        let l = p.ln();
                        for mu in 0..m {
                            g[off + mu] = -fv[off + mu] * l;
                        }
                    }
                } else if p > 0.0 {
                    min_pos = min_pos.min(p);
                }
                continue;
            }
            let blk = CMatrix::from_fn(b.dim, b.dim, |i, j| {
                (0..m)
                    .map(|mu| fv[off + i * m + mu] * fv[off + j * m + mu].conj())
                    .sum::<C64>()
                    / creal(t)
            });
            if !want_grad {
                let ev = eigenvalues(&blk);
                value += spectrum_entropy_floored(&ev, floor);
                for &e in &ev {
                    if e > 0.0 {
                        min_pos = min_pos.min(e);
                    }
                }
                continue;
            }
            let e = crate::operator::eigh_raw(&blk);
            let mut log = CMatrix::zeros(b.dim, b.dim);
            for (k, &lam) in e.values.iter().enumerate() {
                if lam > 0.0 {
                    min_pos = min_pos.min(lam);
                }
                if lam > floor {
                    value -= lam * lam.ln();
                    let v = e.vectors.column(k);
                    log += v * v.adjoint() * creal(lam.ln());
                }
            }
            let g = grad_unframed.as_mut().expect("gradient requested");
            for i in 0..b.dim {
                for mu in 0..m {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..b.dim {
                        acc += log[(i, j)] * fv[off + j * m + mu];
                    }
                    g[off + i * m + mu] = -acc;
                }
            }
        }
        let grad = grad_unframed.map(|g| match &self.framing {
            Some(u) => u * g,
            None => g,
        });
        (t * value, grad, min_pos)
    }

    /// Whether `V A V† = A` as a set: `V` maps the restriction kernel onto itself.
    ///
    /// Checked on the matrix units of every block: each image must lie in
    /// the subalgebra, i.e. be reproduced by `adjoint_restrict ∘ restrict`
    /// up to the multiplicity normalisation.
    pub fn is_normalized_by(&self, v: &CMatrix) -> bool {
        if v.nrows() != self.ambient_dim {
            return false;
        }
        for (k, b) in self.blocks.iter().enumerate() {
            for i in 0..b.dim {
                for j in 0..b.dim {
                    let mut y = self.zero_blocks();
                    y.blocks[k][(i, j)] = creal(1.0);
                    let a = self.adjoint_restrict(&y).expect("aligned");
                    let img = v * &a * v.adjoint();
                    if !self.contains(&img) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Membership test: `X` equals `adjoint_restrict` of its normalized restriction.
    pub fn contains(&self, x: &CMatrix) -> bool {
        let Ok(r) = self.restrict(x) else {
            return false;
        };
        let scaled = BlockOperator {
            blocks: r
                .blocks
                .iter()
                .zip(&self.blocks)
                .map(|(m, b)| m / creal(b.multiplicity as f64))
                .collect(),
        };
        let back = self.adjoint_restrict(&scaled).expect("aligned");
        crate::operator::max_abs(&(back - x)) < 1e-9
    }

    pub fn zero_blocks(&self) -> BlockOperator {
        BlockOperator {
            blocks: self
                .blocks
                .iter()
                .map(|b| CMatrix::zeros(b.dim, b.dim))
                .collect(),
        }
    }
}

pub fn make_subalgebra(req: &SubalgebraRequest) -> Result<SubalgebraSpec> {
    match req {
        SubalgebraRequest::Diagonal { n } => SubalgebraSpec::diagonal(*n),
        SubalgebraRequest::TensorFactor { dims, keep } => SubalgebraSpec::tensor_factor(dims, keep),
        SubalgebraRequest::Full { n } => SubalgebraSpec::full(*n),
        SubalgebraRequest::Trivial { n } => SubalgebraSpec::trivial(*n),
        SubalgebraRequest::Framed { blocks, framing } => {
            SubalgebraSpec::framed(blocks.clone(), framing.clone())
        }
    }
}

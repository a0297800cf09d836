use crate::error::{Error, Result};
use crate::operator::{creal, max_abs, CMatrix, DensityMatrix};

/// A finite group of unitaries acting by conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAction {
    elements: Vec<CMatrix>,
    labels: Vec<String>,
}

impl GroupAction {
    pub fn new(elements: Vec<CMatrix>, labels: Vec<String>) -> Result<Self> {
        if elements.is_empty() || elements.len() != labels.len() {
            return Err(Error::InvalidParameter("group needs labelled elements".into()));
        }
        let g = Self { elements, labels };
        let d = g.dim();
        if !g.elements.iter().any(|u| same_up_to_phase(u, &CMatrix::identity(d, d))) {
            return Err(Error::InvalidParameter("group lacks the identity".into()));
        }
        Ok(g)
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    /// Every product lies in the group up to a phase.
    pub fn is_closed(&self, tol: f64) -> bool {
        self.elements.iter().all(|a| {
            self.elements.iter().all(|b| {
                let p = a * b;
                self.elements.iter().any(|e| phase_distance(&p, e) < tol)
            })
        })
    }

    /// Largest `‖gρg† - ρ‖_max` over the group.
    pub fn invariance_defect(&self, rho: &DensityMatrix) -> f64 {
        self.elements
            .iter()
            .map(|u| max_abs(&(u * rho.matrix() * u.adjoint() - rho.matrix())))
            .fold(0.0, f64::max)
    }
}

fn phase_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let t = (b.adjoint() * a).trace();
    let phase = if t.norm() > 0.0 { t / creal(t.norm()) } else { creal(1.0) };
    max_abs(&(a - b * phase))
}

fn same_up_to_phase(a: &CMatrix, b: &CMatrix) -> bool {
    phase_distance(a, b) < 1e-10
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Cycle notation with 1-based points; `()` for the identity.
fn cycle_label(p: &[usize]) -> String {
    let mut seen = vec![false; p.len()];
    let mut s = String::new();
    for start in 0..p.len() {
        if seen[start] || p[start] == start {
            continue;
        }
        let mut cyc = Vec::new();
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            cyc.push((k + 1).to_string());
            k = p[k];
        }
        s.push_str(&format!("({})", cyc.join(" ")));
    }
    if s.is_empty() {
        "()".into()
    } else {
        s
    }
}

/// All `n!` permutation matrices, `P e_i = e_{π(i)}`.
pub fn permutation_action(n: usize) -> Result<GroupAction> {
    if n == 0 || n > 5 {
        return Err(Error::InvalidParameter(format!("permutation degree {n} outside 1..=5")));
    }
    let perms = permutations(n);
    let elements = perms
        .iter()
        .map(|p| CMatrix::from_fn(n, n, |i, j| creal(if p[j] == i { 1.0 } else { 0.0 })))
        .collect();
    let labels = perms.iter().map(|p| cycle_label(p)).collect();
    GroupAction::new(elements, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_group_of_three() {
        let g = permutation_action(3).unwrap();
        assert_eq!(g.order(), 6);
        assert!(g.is_closed(1e-10));
        assert!(g.labels().iter().any(|l| l == "()"));
        assert!(g.labels().iter().any(|l| l == "(2 3)"));
        assert!(g.labels().iter().any(|l| l == "(1 2 3)"));
    }

    #[test]
    fn degree_bounds() {
        assert_eq!(permutation_action(5).unwrap().order(), 120);
        assert!(permutation_action(6).is_err());
    }
}

//! JSON forms of the library types.

use leafspace::leaf::Leaf;
use leafspace::roof::{Direction, Ensemble, RoofResult, StiefelPoint};
use leafspace::subalgebra::SubalgebraKind;
use leafspace::{Block, CMatrix, CVector, DensityMatrix, PureStateVector, SubalgebraSpec, C64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

type WireResult<T> = std::result::Result<T, CliError>;

/// `{"dim": d, "re": [[..]], "im": [[..]]}`; vectors use a single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

fn rows_of(m: &CMatrix, part: fn(&C64) -> f64) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| part(&m[(i, j)])).collect()).collect()
}

fn check_rows(what: &str, re: &[Vec<f64>], im: &[Vec<f64>], rows: usize, cols: usize) -> WireResult<()> {
    for (name, part) in [("re", re), ("im", im)] {
        if part.len() != rows || part.iter().any(|r| r.len() != cols) {
            return Err(CliError::Input(format!("{what}.{name}: expected {rows} rows of {cols} entries")));
        }
    }
    Ok(())
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            dim: m.nrows(),
            re: rows_of(m, |z| z.re),
            im: rows_of(m, |z| z.im),
        }
    }

    pub fn from_vector(v: &CVector) -> Self {
        Self {
            dim: v.len(),
            re: vec![v.iter().map(|z| z.re).collect()],
            im: vec![v.iter().map(|z| z.im).collect()],
        }
    }

    pub fn to_matrix(&self, what: &str) -> WireResult<CMatrix> {
        check_rows(what, &self.re, &self.im, self.dim, self.dim)?;
        Ok(CMatrix::from_fn(self.dim, self.dim, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }

    pub fn to_vector(&self, what: &str) -> WireResult<CVector> {
        check_rows(what, &self.re, &self.im, 1, self.dim)?;
        Ok(CVector::from_iterator(self.dim, (0..self.dim).map(|j| C64::new(self.re[0][j], self.im[0][j]))))
    }

    pub fn to_density(&self, what: &str) -> WireResult<DensityMatrix> {
        Ok(DensityMatrix::new(self.to_matrix(what)?)?)
    }

    pub fn to_pure(&self, what: &str) -> WireResult<PureStateVector> {
        Ok(PureStateVector::with_weight(self.to_vector(what)?))
    }
}

/// Rectangular matrices such as Stiefel points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl RectJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: rows_of(m, |z| z.re),
            im: rows_of(m, |z| z.im),
        }
    }

    pub fn to_matrix(&self, what: &str) -> WireResult<CMatrix> {
        check_rows(what, &self.re, &self.im, self.rows, self.cols)?;
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FramingJson {
    Identity(String),
    Matrix(MatrixJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubalgebraJson {
    pub ambient_dim: usize,
    pub blocks: Vec<[usize; 2]>,
    pub framing: FramingJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Factor dimensions and kept factors of a tensor-factor subalgebra.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep: Option<Vec<usize>>,
}

impl SubalgebraJson {
    pub fn from_spec(a: &SubalgebraSpec) -> Self {
        let (dims, keep) = match a.kind() {
            SubalgebraKind::TensorFactor { dims, keep } => (Some(dims.clone()), Some(keep.clone())),
            _ => (None, None),
        };
        Self {
            ambient_dim: a.ambient_dim(),
            blocks: a.blocks().iter().map(|b| [b.dim, b.multiplicity]).collect(),
            framing: match a.framing() {
                Some(u) => FramingJson::Matrix(MatrixJson::from_matrix(u)),
                None => FramingJson::Identity("identity".into()),
            },
            kind: Some(a.kind().tag().into()),
            dims,
            keep,
        }
    }

    pub fn to_spec(&self) -> WireResult<SubalgebraSpec> {
        let framing = match &self.framing {
            FramingJson::Identity(s) if s == "identity" => None,
            FramingJson::Identity(s) => {
                return Err(CliError::Input(format!("subalgebra.framing: expected a matrix or \"identity\", got {s:?}")))
            }
            FramingJson::Matrix(m) => Some(m.to_matrix("subalgebra.framing")?),
        };
        let kind = match self.kind.as_deref() {
            None | Some("framed") => SubalgebraKind::Framed,
            Some("diagonal") => SubalgebraKind::Diagonal,
            Some("full") => SubalgebraKind::Full,
            Some("trivial") => SubalgebraKind::Trivial,
            Some("tensor_factor") => match (&self.dims, &self.keep) {
                (Some(dims), Some(keep)) => SubalgebraKind::TensorFactor {
                    dims: dims.clone(),
                    keep: keep.clone(),
                },
                _ => return Err(CliError::Input("subalgebra: tensor_factor needs \"dims\" and \"keep\"".into())),
            },
            Some(other) => return Err(CliError::Input(format!("subalgebra.kind: unknown tag {other:?}"))),
        };
        let blocks = self.blocks.iter().map(|&[n, m]| Block::new(n, m)).collect();
        Ok(SubalgebraSpec::with_kind(self.ambient_dim, blocks, framing, kind)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleJson {
    pub weights: Vec<f64>,
    pub members: Vec<MatrixJson>,
    pub target: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure_vectors: Option<Vec<MatrixJson>>,
}

impl EnsembleJson {
    pub fn from_ensemble(e: &Ensemble) -> Self {
        Self {
            weights: e.weights().to_vec(),
            members: e.members().iter().map(|m| MatrixJson::from_matrix(m.matrix())).collect(),
            target: MatrixJson::from_matrix(e.target().matrix()),
            pure_vectors: e
                .pure_vectors()
                .map(|vs| vs.iter().map(|v| MatrixJson::from_vector(v.amplitudes())).collect()),
        }
    }

    pub fn to_ensemble(&self) -> WireResult<Ensemble> {
        let members = self
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| m.to_density(&format!("members[{i}]")))
            .collect::<WireResult<Vec<_>>>()?;
        let pure = match &self.pure_vectors {
            Some(vs) => Some(
                vs.iter()
                    .enumerate()
                    .map(|(i, v)| v.to_pure(&format!("pure_vectors[{i}]")))
                    .collect::<WireResult<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(Ensemble::from_parts(self.weights.clone(), members, pure, self.target.to_density("target")?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoofResultJson {
    pub value: f64,
    pub residual: f64,
    pub restarts_agreeing: usize,
    pub flags: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
    pub direction: String,
    pub restart_values: Vec<f64>,
    pub stiefel: RectJson,
    pub ensemble: EnsembleJson,
}

pub fn direction_from_tag(tag: &str) -> WireResult<Direction> {
    match tag {
        "min" => Ok(Direction::Min),
        "max" => Ok(Direction::Max),
        other => Err(CliError::Input(format!("direction: expected \"min\" or \"max\", got {other:?}"))),
    }
}

impl RoofResultJson {
    pub fn from_result(r: &RoofResult) -> Self {
        Self {
            value: r.value,
            residual: r.stationarity_residual,
            restarts_agreeing: r.restarts_agreeing,
            flags: r.flags.clone(),
            iterations: r.iterations,
            converged: r.converged,
            direction: r.direction.tag().into(),
            restart_values: r.restart_values.clone(),
            stiefel: RectJson::from_matrix(r.stiefel.matrix()),
            ensemble: EnsembleJson::from_ensemble(&r.ensemble),
        }
    }

    pub fn to_result(&self) -> WireResult<RoofResult> {
        Ok(RoofResult {
            value: self.value,
            ensemble: self.ensemble.to_ensemble()?,
            stiefel: StiefelPoint::new(self.stiefel.to_matrix("stiefel")?)?,
            stationarity_residual: self.residual,
            restarts_agreeing: self.restarts_agreeing,
            iterations: self.iterations,
            converged: self.converged,
            restart_values: self.restart_values.clone(),
            direction: direction_from_tag(&self.direction)?,
            flags: self.flags.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafJson {
    pub extremals: Vec<MatrixJson>,
    pub values: Vec<f64>,
    pub subalgebra: SubalgebraJson,
}

impl LeafJson {
    pub fn from_leaf(l: &Leaf) -> Self {
        Self {
            extremals: l.extremals().iter().map(|v| MatrixJson::from_vector(v.amplitudes())).collect(),
            values: l.point_values().to_vec(),
            subalgebra: SubalgebraJson::from_spec(l.subalgebra()),
        }
    }

    pub fn to_leaf(&self) -> WireResult<Leaf> {
        let ext = self
            .extremals
            .iter()
            .enumerate()
            .map(|(i, v)| v.to_pure(&format!("extremals[{i}]")))
            .collect::<WireResult<Vec<_>>>()?;
        Ok(Leaf::from_parts(ext, self.subalgebra.to_spec()?, self.values.clone())?)
    }
}

/// Parses JSON, reporting the failing position and field.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> WireResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use leafspace::random::{haar_unitary, random_density};

    #[test]
    fn matrix_roundtrip_is_bit_exact() {
        let rho = random_density(3, 3, 3);
        let text = serde_json::to_string(&MatrixJson::from_matrix(rho.matrix())).unwrap();
        let back: MatrixJson = parse_json(&text, "state").unwrap();
        assert_eq!(back.to_density("state").unwrap(), rho);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let m = MatrixJson {
            dim: 2,
            re: vec![vec![1.0, 0.0], vec![0.0]],
            im: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        let err = m.to_matrix("state").unwrap_err().to_string();
        assert!(err.contains("state.re"));
    }

    #[test]
    fn subalgebra_roundtrip() {
        for a in [
            SubalgebraSpec::diagonal(3).unwrap(),
            SubalgebraSpec::tensor_factor(&[2, 3], &[1]).unwrap(),
            SubalgebraSpec::framed(vec![Block::new(1, 2), Block::new(2, 1)], haar_unitary(1, 4)).unwrap(),
        ] {
            let text = serde_json::to_string(&SubalgebraJson::from_spec(&a)).unwrap();
            let back: SubalgebraJson = parse_json(&text, "subalgebra").unwrap();
            assert_eq!(back.to_spec().unwrap(), a);
        }
    }

    #[test]
    fn missing_field_names_the_field() {
        let err = parse_json::<MatrixJson>("{\"dim\": 2, \"re\": [[1,0],[0,0]]}", "state").unwrap_err().to_string();
        assert!(err.contains("im") && err.contains("line 1"));
    }
}

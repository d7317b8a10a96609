//! JSON state files: `{"dims": [2, 2], "matrix": [[re, im], ...]}`, row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::DensityOperator;
use crate::tensor::{c, CMatrix, Operator, SubsystemShape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub matrix: Vec<[f64; 2]>,
}

impl StateFile {
    pub fn from_operator(op: &Operator) -> Self {
        let m = op.matrix();
        let n = m.nrows();
        let matrix = (0..n * n)
            .map(|k| {
                let z = m[(k / n, k % n)];
                [z.re, z.im]
            })
            .collect();
        Self {
            dims: op.shape().dims().to_vec(),
            matrix,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("state file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn to_operator(&self) -> Result<Operator> {
        let shape = SubsystemShape::new(self.dims.clone())?;
        let n = shape.dim();
        if self.matrix.len() != n * n {
            return Err(Error::InvalidShape(format!(
                "matrix has {} entries, dims {} need {}",
                self.matrix.len(),
                shape,
                n * n
            )));
        }
        let m = CMatrix::from_fn(n, n, |i, j| {
            let [re, im] = self.matrix[i * n + j];
            c(re, im)
        });
        Operator::new(shape, m)
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        DensityOperator::new(self.to_operator()?)
    }
}

pub fn read_state_file(path: &Path) -> Result<StateFile> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    StateFile::parse(&text)
}

pub fn load_density(path: &Path) -> Result<DensityOperator> {
    read_state_file(path)?.to_density()
}

pub fn load_operator(path: &Path) -> Result<Operator> {
    read_state_file(path)?.to_operator()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::max_entangled_state;

    #[test]
    fn round_trip() {
        let rho = max_entangled_state(2).unwrap();
        let file = StateFile::from_operator(rho.op());
        let back = StateFile::parse(&file.to_json())
            .unwrap()
            .to_density()
            .unwrap();
        assert!(back.op().max_abs_diff(rho.op()) < 1e-16);
    }

    #[test]
    fn failures_name_the_invariant() {
        let err = |text: &str| {
            StateFile::parse(text)
                .and_then(|f| f.to_density())
                .unwrap_err()
                .to_string()
        };
        assert!(err(r#"{"dims":[2],"matrix":[[1,0],[0,0],[0,0]]}"#).contains("entries"));
        assert!(err(r#"{"dims":[2],"matrix":[[1,0],[1,0],[0,0],[0,0]]}"#).contains("Hermitian"));
        assert!(err(r#"{"dims":[2],"matrix":[[1,0],[0,0],[0,0],[1,0]]}"#).contains("trace"));
        assert!(err(r#"{"dims":[2],"matrix":[[2,0],[0,0],[0,0],[-1,0]]}"#)
            .contains("positive semidefinite"));
        assert!(err(r#"{"dims":[1],"matrix":[[1,0]]}"#).contains("dimension"));
        assert!(err(r#"{"dims":[2]"#).contains("state file"));
    }
}

//! Self-describing instance document. The coupling data is stored dense,
//! together with the generator name, parameters and seed, so an experiment
//! can be replayed bit-exactly from the file alone.

use serde::{Deserialize, Serialize};

use super::{BlockAffineCoupling, RowKind};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// JSON schema:
/// `{"m", "block_dims", "A_blocks" (row-major dense per block), "b",
///   "row_kind", "generator", "params", "seed", "reference"?}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceDoc<T> {
    pub m: usize,
    pub block_dims: Vec<usize>,
    #[serde(rename = "A_blocks")]
    pub a_blocks: Vec<Vec<T>>,
    pub b: Vec<T>,
    pub row_kind: Vec<RowKind>,
    pub generator: String,
    pub params: serde_json::Value,
    pub seed: u64,
    #[serde(default = "none_ref", skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceDoc<T>>,
}

fn none_ref<T>() -> Option<ReferenceDoc<T>> {
    None
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceDoc<T> {
    pub f_star: T,
    pub x_star: Vec<T>,
    pub lambda_star: Vec<T>,
}

impl<T: Scalar> InstanceDoc<T> {
    pub fn from_coupling(
        coupling: &BlockAffineCoupling<T>,
        generator: &str,
        params: serde_json::Value,
        seed: u64,
        reference: Option<ReferenceDoc<T>>,
    ) -> Self {
        Self {
            m: coupling.num_rows(),
            block_dims: coupling.block_dims(),
            a_blocks: coupling.blocks().iter().map(|blk| blk.data().to_vec()).collect(),
            b: coupling.b().to_vec(),
            row_kind: coupling.row_kind().to_vec(),
            generator: generator.to_string(),
            params,
            seed,
            reference,
        }
    }

    pub fn to_coupling(&self) -> Result<BlockAffineCoupling<T>> {
        if self.a_blocks.len() != self.block_dims.len() {
            return Err(Error::Invalid("A_blocks and block_dims disagree".into()));
        }
        let blocks = self
            .a_blocks
            .iter()
            .zip(&self.block_dims)
            .enumerate()
            .map(|(i, (data, &n_i))| {
                if data.len() != self.m * n_i {
                    return Err(Error::Invalid(format!(
                        "block {i}: {} entries, expected {} ({} x {})",
                        data.len(),
                        self.m * n_i,
                        self.m,
                        n_i
                    )));
                }
                Ok(Mat::from_row_major(self.m, n_i, data.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        BlockAffineCoupling::new(blocks, self.b.clone(), self.row_kind.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

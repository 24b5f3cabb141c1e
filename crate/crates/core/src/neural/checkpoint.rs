//! Versioned JSON checkpoint container.
//!
//! ```text
//! {
//!   "format": "dwn-checkpoint",
//!   "version": 1,
//!   "payload": { ... }
//! }
//! ```
//!
//! A network payload holds its `spec`, the `params` as a list of layers
//! (`rows`, `cols`, row-major `weight`, `bias`), and optionally the
//! optimizer state. Floats are written in shortest round-trip form, so a
//! save/load cycle reproduces parameters bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Network, NetworkSpec, OptimizerState, Parameters, Real};
use crate::error::{Error, Result};

pub const FORMAT: &str = "dwn-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Container<P> {
    pub format: String,
    pub version: u32,
    pub payload: P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NetworkCheckpoint<T> {
    pub spec: NetworkSpec,
    pub params: Parameters<T>,
    #[serde(default)]
    pub optimizer: Option<OptimizerState<T>>,
}

impl<T: Real> NetworkCheckpoint<T> {
    pub fn of(net: &Network<T>, optimizer: Option<&OptimizerState<T>>) -> Self {
        Self {
            spec: net.spec().clone(),
            params: net.params().clone(),
            optimizer: optimizer.cloned(),
        }
    }

    /// Rebuilds the network, requiring its spec to equal `expected`.
    ///
    /// `name` labels the network in mismatch errors.
    pub fn restore(&self, expected: &NetworkSpec, name: &str) -> Result<Network<T>> {
        let want = expected.layer_shapes();
        let have = self.spec.layer_shapes();
        for (i, (w, h)) in want.iter().zip(&have).enumerate() {
            if w != h {
                return Err(Error::CheckpointMismatch {
                    network: name.to_string(),
                    layer: i,
                    expected: format!("{}x{}", w.0, w.1),
                    found: format!("{}x{}", h.0, h.1),
                });
            }
        }
        if want.len() != have.len() || &self.spec != expected {
            return Err(Error::CheckpointMismatch {
                network: name.to_string(),
                layer: want.len().min(have.len()),
                expected: format!("{expected:?}"),
                found: format!("{:?}", self.spec),
            });
        }
        if let Some(opt) = &self.optimizer {
            opt.check_shapes(expected)?;
        }
        Network::from_parameters(self.spec.clone(), self.params.clone())
    }
}

pub fn save_container<P: Serialize>(path: &Path, payload: &P) -> Result<()> {
    let container = Container {
        format: FORMAT.to_string(),
        version: VERSION,
        payload,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string(&container)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_container<P: DeserializeOwned>(path: &Path) -> Result<P> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let container: Container<P> = serde_json::from_str(&text)?;
    if container.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "{}: unexpected format `{}`",
            path.display(),
            container.format
        )));
    }
    if container.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported version {}",
            path.display(),
            container.version
        )));
    }
    Ok(container.payload)
}

//! Feed-forward function approximators with manual backpropagation.
//!
//! Networks are small dense MLPs with rectifier hidden layers and either a
//! plain linear output or a dueling head. Everything is generic over the
//! float type: training runs in `f32`, gradient checks in `f64`.

mod checkpoint;
mod network;
mod optim;

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};
use rand::distr::uniform::SampleUniform;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_container, save_container, Container, NetworkCheckpoint, FORMAT, VERSION};
pub use network::{
    dueling_combine, soft_update, ForwardCache, GradientBuffer, Layer, Network, Parameters,
};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};

use crate::error::{Error, Result};

/// Scalar types a network can be instantiated with.
pub trait Real:
    Float
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + SampleUniform
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + std::iter::Sum
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Width of the shared layer feeding the value and advantage streams.
pub const DUELING_WIDTH: usize = 256;

pub const DEFAULT_HIDDEN: [usize; 2] = [128, 128];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    Plain,
    /// A rectifier layer of `width` units followed by one value unit and
    /// `output_dim` advantage units, recombined as `V + A - mean(A)`.
    Dueling { width: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub head: Head,
    pub output_dim: usize,
}

impl NetworkSpec {
    pub fn q_network(input_dim: usize, num_actions: usize, hidden_dims: &[usize]) -> Self {
        Self {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            head: Head::Dueling {
                width: DUELING_WIDTH,
            },
            output_dim: num_actions,
        }
    }

    pub fn w_network(input_dim: usize, hidden_dims: &[usize]) -> Self {
        Self {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            head: Head::Plain,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::config("network dimensions must be >= 1"));
        }
        if let Some(i) = self.hidden_dims.iter().position(|&d| d == 0) {
            return Err(Error::config(format!("hidden layer {i} has zero width")));
        }
        if let Head::Dueling { width } = self.head {
            if width == 0 {
                return Err(Error::config("dueling width must be >= 1"));
            }
            if self.output_dim < 2 {
                return Err(Error::config("dueling head requires output_dim >= 2"));
            }
        }
        Ok(())
    }

    /// `(rows, cols)` of every weight matrix, i.e. `(fan_out, fan_in)`.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden_dims);
        let last = match self.head {
            Head::Plain => self.output_dim,
            Head::Dueling { width } => {
                dims.push(width);
                self.output_dim + 1
            }
        };
        dims.push(last);
        dims.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * i + o).sum()
    }

    pub fn is_dueling(&self) -> bool {
        matches!(self.head, Head::Dueling { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_spec_shapes() {
        let spec = NetworkSpec::q_network(2, 3, &DEFAULT_HIDDEN);
        assert_eq!(
            spec.layer_shapes(),
            vec![(128, 2), (128, 128), (256, 128), (4, 256)]
        );
        assert_eq!(spec.param_count(), 384 + 16512 + 33024 + 1028);
    }

    #[test]
    fn w_spec_is_scalar_plain() {
        let spec = NetworkSpec::w_network(110, &DEFAULT_HIDDEN);
        assert_eq!(spec.output_dim, 1);
        assert_eq!(spec.head, Head::Plain);
        assert_eq!(spec.layer_shapes().last(), Some(&(1, 128)));
    }

    #[test]
    fn validation() {
        let mut spec = NetworkSpec::q_network(2, 1, &[4]);
        assert!(spec.validate().is_err());
        spec.output_dim = 2;
        assert!(spec.validate().is_ok());
        spec.hidden_dims = vec![4, 0];
        assert!(spec.validate().is_err());
        assert!(NetworkSpec::w_network(0, &[]).validate().is_err());
    }
}

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::{GradientBuffer, NetworkSpec, Parameters, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    RmsProp,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            other => Err(Error::config(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::RmsProp => "rmsprop",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Squared-gradient averaging factor for RMSprop.
    pub decay: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            decay: 0.99,
            eps: 1e-8,
        }
    }

    pub fn rmsprop(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::RmsProp,
            ..Self::adam(learning_rate)
        }
    }

    pub fn with_kind(kind: OptimizerKind, learning_rate: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Self::adam(learning_rate),
            OptimizerKind::RmsProp => Self::rmsprop(learning_rate),
        }
    }
}

/// Adam or RMSprop accumulators for one network.
///
/// Adam keeps first and second moments; RMSprop uses only `second`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OptimizerState<T> {
    pub config: OptimizerConfig,
    pub step: u64,
    first: GradientBuffer<T>,
    second: GradientBuffer<T>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: OptimizerConfig, spec: &NetworkSpec) -> Self {
        Self {
            config,
            step: 0,
            first: GradientBuffer::zeros(spec),
            second: GradientBuffer::zeros(spec),
        }
    }

    pub fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
        self.first.check_shapes(spec)?;
        self.second.check_shapes(spec)
    }

    /// Applies one descent step along `grads` (the gradient of the loss).
    ///
    /// Refuses the update, leaving both parameters and state untouched, when
    /// any gradient entry is non-finite.
    pub fn apply(&mut self, params: &mut Parameters<T>, grads: &GradientBuffer<T>) -> Result<()> {
        if let Some(layer) = grads.first_non_finite() {
            return Err(Error::NonFinite {
                what: "gradient",
                layer,
            });
        }
        if grads.layers.len() != params.layers.len() || self.first.layers.len() != params.layers.len() {
            return Err(Error::Shape {
                layer: 0,
                expected: format!("{} layers", params.layers.len()),
                found: format!("{} layers", grads.layers.len()),
            });
        }
        self.step += 1;
        let cfg = self.config;
        let lr = cfg.learning_rate;
        let eps = T::from_f64(cfg.eps).unwrap();

        match cfg.kind {
            OptimizerKind::Adam => {
                let b1 = T::from_f64(cfg.beta1).unwrap();
                let b2 = T::from_f64(cfg.beta2).unwrap();
                let one = T::one();
                let t = self.step as i32;
                let bc1 = 1.0 - cfg.beta1.powi(t);
                let bc2 = 1.0 - cfg.beta2.powi(t);
                // lr * m_hat / (sqrt(v_hat) + eps), with the bias corrections folded in
                let step_size = T::from_f64(lr / bc1).unwrap();
                let inv_sqrt_bc2 = T::from_f64(1.0 / bc2.sqrt()).unwrap();
                let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *p -= step_size * *m / (v.sqrt() * inv_sqrt_bc2 + eps);
                };
                for (((p, m), v), g) in params
                    .layers
                    .iter_mut()
                    .zip(&mut self.first.layers)
                    .zip(&mut self.second.layers)
                    .zip(&grads.layers)
                {
                    Zip::from(&mut p.weight)
                        .and(&mut m.weight)
                        .and(&mut v.weight)
                        .and(&g.weight)
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                    Zip::from(&mut p.bias)
                        .and(&mut m.bias)
                        .and(&mut v.bias)
                        .and(&g.bias)
                        .for_each(|p, m, v, &g| update(p, m, v, g));
                }
            }
            OptimizerKind::RmsProp => {
                let rho = T::from_f64(cfg.decay).unwrap();
                let one = T::one();
                let lr = T::from_f64(lr).unwrap();
                let update = |p: &mut T, v: &mut T, g: T| {
                    *v = rho * *v + (one - rho) * g * g;
                    *p -= lr * g / (v.sqrt() + eps);
                };
                for ((p, v), g) in params
                    .layers
                    .iter_mut()
                    .zip(&mut self.second.layers)
                    .zip(&grads.layers)
                {
                    Zip::from(&mut p.weight)
                        .and(&mut v.weight)
                        .and(&g.weight)
                        .for_each(|p, v, &g| update(p, v, g));
                    Zip::from(&mut p.bias)
                        .and(&mut v.bias)
                        .and(&g.bias)
                        .for_each(|p, v, &g| update(p, v, g));
                }
            }
        }
        Ok(())
    }
}

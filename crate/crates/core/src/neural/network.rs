use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NetworkSpec, Real};
use crate::error::{Error, Result};

/// One dense layer. `weight` is `fan_out x fan_in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Layer<T> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            weight: Array2::zeros((rows, cols)),
            bias: Array1::zeros(rows),
        }
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct LayerRecord<T> {
    rows: usize,
    cols: usize,
    weight: Vec<T>,
    bias: Vec<T>,
}

impl<T: Real> From<&Layer<T>> for LayerRecord<T> {
    fn from(layer: &Layer<T>) -> Self {
        let (rows, cols) = layer.weight.dim();
        Self {
            rows,
            cols,
            weight: layer.weight.iter().copied().collect(),
            bias: layer.bias.to_vec(),
        }
    }
}

impl<T: Real> TryFrom<LayerRecord<T>> for Layer<T> {
    type Error = String;

    fn try_from(rec: LayerRecord<T>) -> std::result::Result<Self, String> {
        if rec.bias.len() != rec.rows {
            return Err(format!(
                "bias length {} does not match {} rows",
                rec.bias.len(),
                rec.rows
            ));
        }
        let weight = Array2::from_shape_vec((rec.rows, rec.cols), rec.weight)
            .map_err(|e| e.to_string())?;
        Ok(Self {
            weight,
            bias: Array1::from(rec.bias),
        })
    }
}

macro_rules! layer_set {
    ($name:ident) => {
        impl<T: Real> $name<T> {
            pub fn zeros(spec: &NetworkSpec) -> Self {
                Self {
                    layers: spec
                        .layer_shapes()
                        .into_iter()
                        .map(|(r, c)| Layer::zeros(r, c))
                        .collect(),
                }
            }

            pub fn len(&self) -> usize {
                self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
            }

            pub fn is_empty(&self) -> bool {
                self.len() == 0
            }

            /// Every scalar in layer order: each layer's weights row-major, then its bias.
            pub fn flatten(&self) -> Vec<T> {
                let mut out = Vec::with_capacity(self.len());
                for l in &self.layers {
                    out.extend(l.weight.iter().copied());
                    out.extend(l.bias.iter().copied());
                }
                out
            }

            /// Index of the first layer containing a NaN or infinity.
            pub fn first_non_finite(&self) -> Option<usize> {
                self.layers.iter().position(|l| !l.is_finite())
            }

            /// Checks that layer shapes agree with `spec`.
            pub fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
                let shapes = spec.layer_shapes();
                if shapes.len() != self.layers.len() {
                    return Err(Error::Shape {
                        layer: shapes.len().min(self.layers.len()),
                        expected: format!("{} layers", shapes.len()),
                        found: format!("{} layers", self.layers.len()),
                    });
                }
                for (i, ((r, c), l)) in shapes.iter().zip(&self.layers).enumerate() {
                    if l.weight.dim() != (*r, *c) || l.bias.len() != *r {
                        return Err(Error::Shape {
                            layer: i,
                            expected: format!("{r}x{c}"),
                            found: format!("{:?}/{}", l.weight.dim(), l.bias.len()),
                        });
                    }
                }
                Ok(())
            }
        }

        impl<T: Real> Serialize for $name<T> {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let recs: Vec<LayerRecord<T>> = self.layers.iter().map(LayerRecord::from).collect();
                recs.serialize(s)
            }
        }

        impl<'de, T: Real> Deserialize<'de> for $name<T> {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let recs = Vec::<LayerRecord<T>>::deserialize(d)?;
                let layers = recs
                    .into_iter()
                    .map(Layer::try_from)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(serde::de::Error::custom)?;
                Ok(Self { layers })
            }
        }
    };
}

/// Weights and biases of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub layers: Vec<Layer<T>>,
}

/// Accumulated weight change, shaped like [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer<T> {
    pub layers: Vec<Layer<T>>,
}

layer_set!(Parameters);
layer_set!(GradientBuffer);

impl<T: Real> Parameters<T> {
    /// Uniform in `±1/sqrt(fan_in)` for weights and biases alike.
    pub fn random<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(rows, cols)| {
                let bound = T::from_f64(1.0 / (cols as f64).sqrt()).unwrap();
                let mut draw = || rng.random_range(-bound..=bound);
                let weight = Array2::from_shape_simple_fn((rows, cols), &mut draw);
                let bias = Array1::from_shape_simple_fn(rows, &mut draw);
                Layer { weight, bias }
            })
            .collect();
        Self { layers }
    }
}

impl<T: Real> GradientBuffer<T> {
    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.weight.fill(T::zero());
            l.bias.fill(T::zero());
        }
    }

    /// `self += scale * other`
    pub fn accumulate(&mut self, other: &GradientBuffer<T>, scale: T) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.scaled_add(scale, &b.weight);
            a.bias.scaled_add(scale, &b.bias);
        }
    }
}

/// Intermediates of a batched forward pass, kept for [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input to each layer: the batch itself, then each rectified hidden output.
    inputs: Vec<Array2<T>>,
    /// Final outputs, one row per sample (after the dueling combine).
    pub output: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    params: Parameters<T>,
}

impl<T: Real> Network<T> {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let params = Parameters::random(&spec, rng);
        Ok(Self { spec, params })
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let params = Parameters::zeros(&spec);
        Ok(Self { spec, params })
    }

    pub fn from_parameters(spec: NetworkSpec, params: Parameters<T>) -> Result<Self> {
        spec.validate()?;
        params.check_shapes(&spec)?;
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters<T> {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Parameters<T>) -> Result<()> {
        params.check_shapes(&self.spec)?;
        self.params = params;
        Ok(())
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        Ok(self.forward_batch(x)?.row(0).to_vec())
    }

    /// Forward pass over a batch (`batch x input_dim`) without keeping intermediates.
    pub fn forward_batch(&self, input: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(input.ncols())?;
        let last = self.params.layers.len() - 1;
        let mut act: Array2<T> = input.to_owned();
        for (i, layer) in self.params.layers.iter().enumerate() {
            act = affine(&act, layer);
            if i < last {
                relu_inplace(&mut act);
            }
        }
        Ok(self.finish_head(act))
    }

    pub fn forward_cached(&self, input: ArrayView2<'_, T>) -> Result<ForwardCache<T>> {
        self.check_input(input.ncols())?;
        let last = self.params.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.params.layers.len());
        let mut act: Array2<T> = input.to_owned();
        for (i, layer) in self.params.layers.iter().enumerate() {
            let mut z = affine(&act, layer);
            if i < last {
                relu_inplace(&mut z);
            }
            inputs.push(std::mem::replace(&mut act, z));
        }
        let output = self.finish_head(act);
        Ok(ForwardCache { inputs, output })
    }

    /// Gradient of `sum(output * output_grad)` with respect to every parameter.
    ///
    /// `output_grad` is `batch x output_dim`; contributions of all rows are summed.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        output_grad: ArrayView2<'_, T>,
    ) -> Result<GradientBuffer<T>> {
        let n_layers = self.params.layers.len();
        if output_grad.dim() != cache.output.dim() {
            return Err(Error::Shape {
                layer: n_layers - 1,
                expected: format!("{:?}", cache.output.dim()),
                found: format!("{:?}", output_grad.dim()),
            });
        }
        let mut delta = if self.spec.is_dueling() {
            dueling_backward(output_grad)
        } else {
            output_grad.to_owned()
        };
        let mut layers = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let a_in = &cache.inputs[l];
            let weight = delta.t().dot(a_in);
            let bias = delta.sum_axis(Axis(0));
            let grad = Layer { weight, bias };
            if !grad.is_finite() {
                return Err(Error::NonFinite {
                    what: "gradient",
                    layer: l,
                });
            }
            layers.push(grad);
            if l > 0 {
                let mut next = delta.dot(&self.params.layers[l].weight);
                Zip::from(&mut next).and(a_in).for_each(|d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = next;
            }
        }
        layers.reverse();
        Ok(GradientBuffer { layers })
    }

    /// Single-sample convenience wrapper around [`forward_cached`] and [`backward`].
    ///
    /// [`forward_cached`]: Network::forward_cached
    /// [`backward`]: Network::backward
    pub fn backward_single(&self, input: &[T], output_grad: &[T]) -> Result<GradientBuffer<T>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let cache = self.forward_cached(x)?;
        let g = ArrayView2::from_shape((1, output_grad.len()), output_grad).map_err(|_| {
            Error::Shape {
                layer: self.params.layers.len() - 1,
                expected: self.spec.output_dim.to_string(),
                found: output_grad.len().to_string(),
            }
        })?;
        self.backward(&cache, g)
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.spec.input_dim {
            return Err(Error::Shape {
                layer: 0,
                expected: self.spec.input_dim.to_string(),
                found: cols.to_string(),
            });
        }
        Ok(())
    }

    fn finish_head(&self, raw: Array2<T>) -> Array2<T> {
        if !self.spec.is_dueling() {
            return raw;
        }
        let n_act = self.spec.output_dim;
        let inv = T::one() / T::from_usize(n_act).unwrap();
        let mut out = Array2::zeros((raw.nrows(), n_act));
        for (mut q, h) in out.rows_mut().into_iter().zip(raw.rows()) {
            let value = h[0];
            let adv = h.slice(s![1..]);
            let mean = adv.sum() * inv;
            Zip::from(&mut q).and(adv).for_each(|q, &a| *q = value + (a - mean));
        }
        out
    }
}

fn affine<T: Real>(x: &Array2<T>, layer: &Layer<T>) -> Array2<T> {
    let mut z = x.dot(&layer.weight.t());
    z += &layer.bias;
    z
}

fn relu_inplace<T: Real>(x: &mut Array2<T>) {
    x.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

/// Maps a gradient on Q-values back to the raw `[value, advantages...]` head.
fn dueling_backward<T: Real>(grad_q: ArrayView2<'_, T>) -> Array2<T> {
    let (rows, n_act) = grad_q.dim();
    let inv = T::one() / T::from_usize(n_act).unwrap();
    let mut out = Array2::zeros((rows, n_act + 1));
    for (mut h, g) in out.rows_mut().into_iter().zip(grad_q.rows()) {
        let total = g.sum();
        h[0] = total;
        let mean = total * inv;
        Zip::from(h.slice_mut(s![1..])).and(g).for_each(|h, &g| *h = g - mean);
    }
    out
}

/// `Q(a) = V + A(a) - mean(A)`
pub fn dueling_combine<T: Real>(value: T, advantages: &[T]) -> Result<Vec<T>> {
    if advantages.is_empty() {
        return Err(Error::Shape {
            layer: 0,
            expected: "at least one advantage".into(),
            found: "0".into(),
        });
    }
    let mean = advantages.iter().copied().sum::<T>() / T::from_usize(advantages.len()).unwrap();
    Ok(advantages.iter().map(|&a| value + (a - mean)).collect())
}

/// `target <- tau * online + (1 - tau) * target`, elementwise.
pub fn soft_update<T: Real>(target: &mut Parameters<T>, online: &Parameters<T>, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config(format!("soft update tau {tau} outside [0, 1]")));
    }
    if target.layers.len() != online.layers.len() {
        return Err(Error::Shape {
            layer: 0,
            expected: format!("{} layers", online.layers.len()),
            found: format!("{} layers", target.layers.len()),
        });
    }
    for (i, (t, o)) in target.layers.iter_mut().zip(&online.layers).enumerate() {
        if t.weight.dim() != o.weight.dim() || t.bias.len() != o.bias.len() {
            return Err(Error::Shape {
                layer: i,
                expected: format!("{:?}", o.weight.dim()),
                found: format!("{:?}", t.weight.dim()),
            });
        }
    }
    if tau == 0.0 {
        return Ok(());
    }
    let tau_t = T::from_f64(tau).unwrap();
    let keep = T::from_f64(1.0 - tau).unwrap();
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        Zip::from(&mut t.weight)
            .and(&o.weight)
            .for_each(|t, &o| *t = tau_t * o + keep * *t);
        Zip::from(&mut t.bias)
            .and(&o.bias)
            .for_each(|t, &o| *t = tau_t * o + keep * *t);
    }
    Ok(())
}

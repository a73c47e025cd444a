use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    LeakyRelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Identity => a,
            Activation::Tanh => a.tanh(),
            Activation::LeakyRelu => {
                if a >= 0.0 {
                    a
                } else {
                    LEAKY_SLOPE * a
                }
            }
        }
    }

    /// First and second derivative at pre-activation `a`. The leaky ReLU kink
    /// takes the positive-side slope and has zero curvature everywhere.
    #[inline]
    pub fn derivatives(self, a: f64) -> (f64, f64) {
        match self {
            Activation::Identity => (1.0, 0.0),
            Activation::Tanh => {
                let t = a.tanh();
                let d1 = 1.0 - t * t;
                (d1, -2.0 * t * d1)
            }
            Activation::LeakyRelu => (if a >= 0.0 { 1.0 } else { LEAKY_SLOPE }, 0.0),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
            Activation::LeakyRelu => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::LeakyRelu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Location of one scalar parameter inside a [`Network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamTag {
    pub layer: usize,
    pub kind: ParamKind,
}

/// Fully connected layer `act(W x + b)` with `W` stored row-major as `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_size: usize,
    pub out_size: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_size: usize,
        out_size: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weight.len() != in_size * out_size || bias.len() != out_size {
            return Err(Error::Dimension(format!(
                "layer {in_size}->{out_size} got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(DenseLayer {
            in_size,
            out_size,
            weight,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        in_size: usize,
        out_size: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_size + out_size) as f64).sqrt();
        let weight = (0..in_size * out_size)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        DenseLayer {
            in_size,
            out_size,
            weight,
            bias: vec![0.0; out_size],
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Pre-activation `W x + b`.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.in_size)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }

    /// `W u` without the bias.
    pub(crate) fn affine_no_bias(&self, u: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.in_size)
            .map(|row| row.iter().zip(u).map(|(w, x)| w * x).sum())
            .collect()
    }

    /// `W^T u`.
    pub(crate) fn transpose_mul(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_size];
        for (row, &ui) in self.weight.chunks_exact(self.in_size).zip(u) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * ui;
            }
        }
        out
    }
}

/// Dense feed-forward network.
///
/// Parameters are enumerated layer by layer, weights (row-major) before
/// biases. Every gradient in the crate is a flat vector in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
    offsets: Vec<usize>,
}

impl Network {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_size != pair[1].in_size {
                return Err(Error::Dimension(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_size,
                    i + 1,
                    pair[1].in_size
                )));
            }
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut acc = 0;
        for l in &layers {
            offsets.push(acc);
            acc += l.param_count();
        }
        offsets.push(acc);
        Ok(Network { layers, offsets })
    }

    /// Multilayer perceptron with Glorot initialisation.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_act: Activation,
        output_act: Activation,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == n { output_act } else { hidden_act };
                DenseLayer::glorot(w[0], w[1], act, rng)
            })
            .collect();
        Self::from_layers(layers).expect("consistent sizes by construction")
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].in_size
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_size)
    }

    pub fn param_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Offset of layer `l`'s first parameter in the flat ordering.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    pub fn param_tag(&self, id: usize) -> Option<ParamTag> {
        if id >= self.param_count() {
            return None;
        }
        let layer = self.offsets.partition_point(|&o| o <= id) - 1;
        let local = id - self.offsets[layer];
        let kind = if local < self.layers[layer].weight.len() {
            ParamKind::Weight
        } else {
            ParamKind::Bias
        };
        Some(ParamTag { layer, kind })
    }

    /// Tags for every parameter, in flat order.
    pub fn param_index(&self) -> Vec<ParamTag> {
        let mut out = Vec::with_capacity(self.param_count());
        for (layer, l) in self.layers.iter().enumerate() {
            out.extend(std::iter::repeat_n(
                ParamTag {
                    layer,
                    kind: ParamKind::Weight,
                },
                l.weight.len(),
            ));
            out.extend(std::iter::repeat_n(
                ParamTag {
                    layer,
                    kind: ParamKind::Bias,
                },
                l.bias.len(),
            ));
        }
        out
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weight.len());
            let (b, tail) = tail.split_at(l.bias.len());
            l.weight.copy_from_slice(w);
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for l in &self.layers {
            h = l.affine(&h);
            for v in &mut h {
                *v = l.activation.apply(*v);
            }
        }
        h
    }

    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        if batch.cols() != self.input_size() {
            return Err(Error::Dimension(format!(
                "batch width {} but network input is {}",
                batch.cols(),
                self.input_size()
            )));
        }
        let mut values = Vec::with_capacity(batch.rows() * self.output_size());
        for row in batch.iter_rows() {
            values.extend(self.forward_one(row));
        }
        Tensor::matrix(batch.rows(), self.output_size(), values)
    }
}

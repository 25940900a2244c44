//! Dense feed-forward networks with hand-derived backpropagation.
//!
//! Batches are row-major `B × width` buffers. Forward passes and input
//! gradients are parallel over rows; weight gradients are parallel over
//! output neurons and sum the batch in row order, so results do not depend on
//! the worker count.

use rand::Rng;

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::sampling::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::Identity => z,
            Self::Relu => z.max(0.0),
            Self::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation z and output y.
    fn grad(self, z: f64, y: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Relu => "relu",
            Self::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Self::Identity),
            "relu" => Some(Self::Relu),
            "sigmoid" => Some(Self::Sigmoid),
            _ => None,
        }
    }
}

/// y = act(W x + b) with W stored `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// Weights uniform on ±1/√fan_in, biases zero.
    pub fn init<R: Rng>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Per-layer values kept by the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Layer inputs; `inputs[0]` is the batch itself.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Gradients shaped like an [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Mlp {
    /// Layers of the given widths, ReLU between them and `output` at the end.
    pub fn new(widths: &[usize], output: Activation, seed: Seed) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Shape(format!("invalid layer widths {widths:?}")));
        }
        let mut rng = seed.rng();
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { Activation::Relu };
                Dense::init(widths[i], widths[i + 1], act, &mut rng)
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::Shape(format!(
                    "layer widths {} → {} do not chain",
                    w[0].outputs, w[1].inputs
                )));
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Shape(
                    "layer buffers do not match their widths".into(),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").outputs
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn forward(&self, batch: &[f64]) -> Result<Trace> {
        if !batch.len().is_multiple_of(self.input_dim()) {
            return Err(Error::Shape(format!(
                "batch of length {} is not a multiple of input width {}",
                batch.len(),
                self.input_dim()
            )));
        }
        let rows = batch.len() / self.input_dim();
        let mut inputs = vec![batch.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = inputs.last().expect("input present");
            let per_row = map_indexed(rows, |r| {
                let xr = &x[r * layer.inputs..(r + 1) * layer.inputs];
                (0..layer.outputs)
                    .map(|o| {
                        let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        layer.bias[o] + w.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect::<Vec<f64>>()
            });
            let z: Vec<f64> = per_row.into_iter().flatten().collect();
            let y: Vec<f64> = z.iter().map(|v| layer.activation.apply(*v)).collect();
            pre.push(z);
            inputs.push(y);
        }
        let output = inputs.pop().expect("output present");
        Ok(Trace {
            inputs,
            pre,
            output,
        })
    }

    /// Gradients of a scalar loss given ∂loss/∂output; also returns ∂loss/∂input.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64]) -> Result<(MlpGrad, Vec<f64>)> {
        if grad_output.len() != trace.output.len() {
            return Err(Error::Shape(
                "output gradient does not match the forward pass".into(),
            ));
        }
        let rows = trace.output.len() / self.output_dim();
        let n = self.layers.len();
        let mut gw = vec![Vec::new(); n];
        let mut gb = vec![Vec::new(); n];
        let mut upstream = grad_output.to_vec();
        for li in (0..n).rev() {
            let layer = &self.layers[li];
            let z = &trace.pre[li];
            let y: &[f64] = if li + 1 == n {
                &trace.output
            } else {
                &trace.inputs[li + 1]
            };
            let dz: Vec<f64> = upstream
                .iter()
                .zip(z.iter().zip(y))
                .map(|(g, (zv, yv))| g * layer.activation.grad(*zv, *yv))
                .collect();
            let x = &trace.inputs[li];
            let (ni, no) = (layer.inputs, layer.outputs);
            let w_rows = map_indexed(no, |o| {
                let mut row = vec![0.0; ni];
                let mut b = 0.0;
                for r in 0..rows {
                    let d = dz[r * no + o];
                    if d != 0.0 {
                        let xr = &x[r * ni..(r + 1) * ni];
                        row.iter_mut().zip(xr).for_each(|(acc, xv)| *acc += d * xv);
                    }
                    b += d;
                }
                (row, b)
            });
            gb[li] = w_rows.iter().map(|(_, b)| *b).collect();
            gw[li] = w_rows.into_iter().flat_map(|(r, _)| r).collect();
            let dx = map_indexed(rows, |r| {
                let dr = &dz[r * no..(r + 1) * no];
                let mut out = vec![0.0; ni];
                for (o, d) in dr.iter().enumerate() {
                    if *d != 0.0 {
                        let w = &layer.weights[o * ni..(o + 1) * ni];
                        out.iter_mut().zip(w).for_each(|(acc, wv)| *acc += d * wv);
                    }
                }
                out
            });
            upstream = dx.into_iter().flatten().collect();
        }
        Ok((
            MlpGrad {
                weights: gw,
                bias: gb,
            },
            upstream,
        ))
    }

    /// Flat view of all parameters in layer order (weights, then bias).
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .for_each(|w| *w = it.next().expect("length checked"));
            l.bias
                .iter_mut()
                .for_each(|b| *b = it.next().expect("length checked"));
        }
        Ok(())
    }
}

impl MlpGrad {
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mse(out: &[f64], target: &[f64]) -> f64 {
        out.iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    #[test]
    fn zero_network_outputs_bias() {
        let mut l = Dense::zeros(3, 2, Activation::Identity);
        l.bias = vec![0.5, -1.0];
        let net = Mlp::from_layers(vec![l]).unwrap();
        let t = net.forward(&[1.0, 2.0, 3.0, -4.0, 0.0, 9.0]).unwrap();
        assert_eq!(t.output, vec![0.5, -1.0, 0.5, -1.0]);
    }

    #[test]
    fn linear_layer_gradient_is_least_squares_gradient() {
        // L = Σ_r ‖W x_r + b − y_r‖²: ∂L/∂W = 2 Σ_r (W x_r + b − y_r) x_rᵀ.
        let net = Mlp::new(&[3, 3], Activation::Identity, Seed::new(1)).unwrap();
        let x = [0.2, -1.0, 0.5, 1.5, 0.3, -0.7];
        let y = [1.0, 0.0, 2.0, -1.0, 0.5, 0.1];
        let t = net.forward(&x).unwrap();
        let resid: Vec<f64> = t.output.iter().zip(&y).map(|(a, b)| a - b).collect();
        let g_out: Vec<f64> = resid.iter().map(|r| 2.0 * r).collect();
        let (g, _) = net.backward(&t, &g_out).unwrap();
        for o in 0..3 {
            for i in 0..3 {
                let expect = 2.0 * (resid[o] * x[i] + resid[3 + o] * x[3 + i]);
                assert!((g.weights[0][o * 3 + i] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let net = Mlp::new(&[8, 16, 4, 16, 8], Activation::Identity, Seed::new(2)).unwrap();
        let x: Vec<f64> = (0..40).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect();
        let target: Vec<f64> = (0..40).map(|i| ((i * 5 % 11) as f64 - 5.0) / 4.0).collect();
        let loss = |n: &Mlp| mse(&n.forward(&x).unwrap().output, &target);
        let t = net.forward(&x).unwrap();
        let g_out: Vec<f64> = t
            .output
            .iter()
            .zip(&target)
            .map(|(a, b)| 2.0 * (a - b))
            .collect();
        let grad = net.backward(&t, &g_out).unwrap().0.flatten();
        let p0 = net.params();
        let h = 1e-6;
        for k in (0..p0.len()).step_by(p0.len() / 10) {
            let mut n2 = net.clone();
            let mut p = p0.clone();
            p[k] += h;
            n2.set_params(&p).unwrap();
            let up = loss(&n2);
            p[k] -= 2.0 * h;
            n2.set_params(&p).unwrap();
            let down = loss(&n2);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() <= 1e-5 * grad[k].abs().max(1.0),
                "param {k}: {fd} vs {}",
                grad[k]
            );
        }
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::new(&[3, 2], Activation::Identity, Seed::new(1)).unwrap();
        assert!(net.forward(&[1.0, 2.0]).is_err());
        assert!(Mlp::from_layers(vec![
            Dense::zeros(2, 3, Activation::Relu),
            Dense::zeros(2, 1, Activation::Relu)
        ])
        .is_err());
    }
}

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

use crate::error::{CuraError, Result};

/// Fully connected network with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector, layer by layer, each layer stored as
/// its row-major `out × in` weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_batch`]; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct MlpCache {
    activations: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0));
        Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// Glorot-uniform weights, zero biases; the output layer is scaled by `output_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        let mut net = Mlp::zeros(sizes);
        let layers = net.num_layers();
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let gain = if l + 1 == layers { output_gain } else { 1.0 };
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = gain * rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(CuraError::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.sizes[..=l])
    }

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.layer_offset(l);
        let w = ArrayView2::from_shape((o, i), &self.params[off..off + o * i]).unwrap();
        let b = ArrayView1::from(&self.params[off + o * i..off + o * i + o]);
        (w, b)
    }

    /// Mutable views of one layer's weight and bias inside a flat buffer laid
    /// out like this network's parameters.
    fn layer_of<'a>(
        &self,
        l: usize,
        flat: &'a mut [f64],
    ) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.layer_offset(l);
        let (w, rest) = flat[off..off + o * i + o].split_at_mut(o * i);
        (
            ArrayViewMut2::from_shape((o, i), w).unwrap(),
            ArrayViewMut1::from(rest),
        )
    }

    /// Sets layer `l` to the given `out × in` weights and bias.
    pub fn set_layer(&mut self, l: usize, weights: &[f64], bias: &[f64]) {
        let sizes = self.sizes.clone();
        let mut params = std::mem::take(&mut self.params);
        {
            let (mut w, mut b) = self.layer_of(l, &mut params);
            assert_eq!(weights.len(), sizes[l] * sizes[l + 1]);
            assert_eq!(bias.len(), sizes[l + 1]);
            w.as_slice_mut().unwrap().copy_from_slice(weights);
            b.as_slice_mut().unwrap().copy_from_slice(bias);
        }
        self.params = params;
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).unwrap();
        let (out, _) = self.forward_batch(x)?;
        Ok(out.into_raw_vec_and_offset().0)
    }

    /// Row-wise evaluation of a `batch × in` matrix, returning the output and
    /// the activations needed by [`Mlp::backward`].
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<(Array2<f64>, MlpCache)> {
        if input.ncols() != self.input_dim() {
            return Err(CuraError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.ncols(),
            });
        }
        let layers = self.num_layers();
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(input.to_owned());
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let mut z = activations[l].dot(&w.t());
            z += &b;
            if l + 1 < layers {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        let out = activations[layers].clone();
        Ok((out, MlpCache { activations }))
    }

    /// Reverse-mode pass. Accumulates parameter gradients into `grads` (same
    /// layout as [`Mlp::params`]) and returns the gradient w.r.t. the input.
    pub fn backward(
        &self,
        cache: &MlpCache,
        output_grad: ArrayView2<'_, f64>,
        grads: &mut [f64],
    ) -> Result<Array2<f64>> {
        let layers = self.num_layers();
        if cache.activations.len() != layers + 1
            || cache
                .activations
                .iter()
                .zip(&self.sizes)
                .any(|(a, &s)| a.ncols() != s)
        {
            return Err(CuraError::DimensionMismatch {
                expected: layers + 1,
                got: cache.activations.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(CuraError::DimensionMismatch {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        if output_grad.dim() != cache.output().dim() {
            return Err(CuraError::DimensionMismatch {
                expected: self.output_dim(),
                got: output_grad.ncols(),
            });
        }
        let mut delta = output_grad.to_owned();
        for l in (0..layers).rev() {
            if l + 1 < layers {
                let a = &cache.activations[l + 1];
                ndarray::Zip::from(&mut delta)
                    .and(a)
                    .for_each(|d, &a| *d *= 1.0 - a * a);
            }
            let input = &cache.activations[l];
            {
                let (mut gw, mut gb) = self.layer_of(l, grads);
                general_mat_mul(1.0, &delta.t(), input, 1.0, &mut gw);
                gb += &delta.sum_axis(Axis(0));
            }
            let (w, _) = self.layer(l);
            delta = delta.dot(&w);
        }
        Ok(delta)
    }
}

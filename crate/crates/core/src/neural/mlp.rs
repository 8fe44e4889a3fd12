use std::fs;
use std::path::Path;

use rand_distr::{Distribution, Normal};

use super::matrix::{gemm, Matrix, View};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Leading bytes of a serialized parameter file.
pub const PARAM_MAGIC: &[u8; 7] = b"GV2VNN1";

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerLayout {
    inputs: usize,
    outputs: usize,
    weight_offset: usize,
    bias_offset: usize,
}

/// Multilayer perceptron with ReLU hidden layers and a linear output layer.
///
/// All weights and biases live in one flat vector. Layer `l` stores its
/// `outputs x inputs` weight matrix row-major, followed by its bias vector;
/// gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<LayerLayout>,
    params: Vec<f64>,
}

/// Activations of every layer for one batch, input first.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Network with every parameter zero.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape(format!(
                "need at least input and output sizes, got {dims:?}"
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("layer sizes must be positive, got {dims:?}")));
        }
        let mut offset = 0;
        let layers = dims
            .windows(2)
            .map(|w| {
                let l = LayerLayout {
                    inputs: w[0],
                    outputs: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset = l.bias_offset + w[1];
                l
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            params: vec![0.0; offset],
        })
    }

    /// He-normal weights (variance `2 / fan_in`), zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        let mut rng = rng::stream(seed, &[tag::INIT]);
        for l in net.layers.clone() {
            let normal = Normal::new(0.0, (2.0 / l.inputs as f64).sqrt())
                .map_err(|e| Error::Domain(e.to_string()))?;
            for w in &mut net.params[l.weight_offset..l.bias_offset] {
                *w = normal.sample(&mut rng);
            }
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
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

    /// Row-major `outputs x inputs` weights of layer `layer`.
    pub fn weights(&self, layer: usize) -> &[f64] {
        let l = self.layers[layer];
        &self.params[l.weight_offset..l.bias_offset]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.params[l.weight_offset..l.bias_offset]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let l = self.layers[layer];
        &self.params[l.bias_offset..l.bias_offset + l.outputs]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&input)?.into_vec())
    }

    /// Forward every row of `x`.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut current = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            current = self.layer_forward(i, l, &current);
        }
        Ok(current)
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for (i, l) in self.layers.iter().enumerate() {
            let next = self.layer_forward(i, l, activations.last().unwrap());
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn layer_forward(&self, index: usize, l: &LayerLayout, input: &Matrix) -> Matrix {
        let n = input.rows();
        let mut out = Matrix::zeros(n, l.outputs);
        let bias = &self.params[l.bias_offset..l.bias_offset + l.outputs];
        for r in 0..n {
            out.row_mut(r).copy_from_slice(bias);
        }
        gemm(
            n,
            l.inputs,
            l.outputs,
            View::row_major(input.as_slice(), l.inputs),
            View::transposed(&self.params[l.weight_offset..l.bias_offset], l.inputs),
            1.0,
            out.as_mut_slice(),
        );
        if index + 1 < self.layers.len() {
            out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        out
    }

    /// Gradient of `(1/n) sum_i loss_i` with respect to every parameter, where
    /// row `i` of `output_grads` is `d loss_i / d output_i`.
    pub fn backward(&self, x: &Matrix, output_grads: &Matrix) -> Result<Vec<f64>> {
        let cache = self.forward_cached(x)?;
        self.backward_from_cache(&cache, output_grads)
    }

    pub fn backward_from_cache(&self, cache: &ForwardCache, output_grads: &Matrix) -> Result<Vec<f64>> {
        let out = cache.output();
        if output_grads.rows() != out.rows() || output_grads.cols() != out.cols() {
            return Err(Error::Shape(format!(
                "output gradients are {}x{}, outputs are {}x{}",
                output_grads.rows(),
                output_grads.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let n = out.rows();
        let mut grads = vec![0.0; self.params.len()];
        if n == 0 {
            return Ok(grads);
        }
        let scale = 1.0 / n as f64;
        let mut delta: Vec<f64> = output_grads.as_slice().iter().map(|g| g * scale).collect();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            // dW = delta^T (out x n) * input (n x in)
            gemm(
                l.outputs,
                n,
                l.inputs,
                View::transposed(&delta, l.outputs),
                View::row_major(input.as_slice(), l.inputs),
                0.0,
                &mut grads[l.weight_offset..l.bias_offset],
            );
            let db = &mut grads[l.bias_offset..l.bias_offset + l.outputs];
            for row in delta.chunks_exact(l.outputs) {
                db.iter_mut().zip(row).for_each(|(b, d)| *b += d);
            }
            if i == 0 {
                break;
            }
            // delta_prev = delta (n x out) * W (out x in), masked by ReLU
            let mut prev = vec![0.0; n * l.inputs];
            gemm(
                n,
                l.outputs,
                l.inputs,
                View::row_major(&delta, l.outputs),
                View::row_major(&self.params[l.weight_offset..l.bias_offset], l.inputs),
                0.0,
                &mut prev,
            );
            for (p, a) in prev.iter_mut().zip(input.as_slice()) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(grads)
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.dims == other.dims
    }

    /// Little-endian serialization: magic, layer count (u32), layer sizes
    /// (u32 each), then every parameter as f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + 4 * (self.dims.len() + 1) + 8 * self.params.len());
        out.extend_from_slice(PARAM_MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let rest = bytes
            .strip_prefix(PARAM_MAGIC.as_slice())
            .ok_or("missing GV2VNN1 magic")?;
        let (count, mut rest) = split_u32(rest).ok_or("truncated header")?;
        let mut dims = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let (d, r) = split_u32(rest).ok_or("truncated layer sizes")?;
            dims.push(d as usize);
            rest = r;
        }
        let mut net = Mlp::zeros(&dims).map_err(|e| e.to_string())?;
        if rest.len() != 8 * net.params.len() {
            return Err(format!(
                "expected {} parameter bytes, found {}",
                8 * net.params.len(),
                rest.len()
            ));
        }
        for (p, chunk) in net.params.iter_mut().zip(rest.chunks_exact(8)) {
            *p = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }
}

fn split_u32(b: &[u8]) -> Option<(u32, &[u8])> {
    let (head, tail) = b.split_first_chunk::<4>()?;
    Some((u32::from_le_bytes(*head), tail))
}

/// Overwrite `dst`'s parameters with `src`'s.
pub fn copy_parameters(src: &Mlp, dst: &mut Mlp) -> Result<()> {
    if !src.same_architecture(dst) {
        return Err(Error::Shape(format!(
            "cannot copy {:?} parameters into {:?}",
            src.dims, dst.dims
        )));
    }
    dst.params.copy_from_slice(&src.params);
    Ok(())
}

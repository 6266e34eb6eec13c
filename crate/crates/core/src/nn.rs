//! Dense networks with analytic backpropagation, a diagonal Gaussian policy
//! head and the Adam optimizer.
//!
//! Parameters are held in `f64` but kept representable in `f32` (see
//! [`round_to_f32`]), which is also how they are serialized; all reductions
//! accumulate in `f64` in a fixed order so results are bit-reproducible.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

const NET_MAGIC: &[u8; 4] = b"TGNN";
const NET_VERSION: u32 = 1;

/// Row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "tensor {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::shape("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Round every value to the nearest `f32`.
pub fn round_to_f32(values: &mut [f64]) {
    for v in values {
        *v = *v as f32 as f64;
    }
}

/// Multilayer perceptron: tanh on hidden layers, linear output.
///
/// Parameters are one flat vector; layer `l` stores its `out × in` weight
/// matrix row-major followed by its `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer inputs recorded by [`Mlp::forward`]; `inputs[l]` feeds layer `l`.
#[derive(Clone, Debug)]
pub struct MlpCache {
    inputs: Vec<Tensor2>,
}

impl Mlp {
    /// All-zero network with layer widths `sizes` (input first).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::shape(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        })
    }

    /// Uniform fan-in initialization; the output layer is scaled by `out_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], out_gain: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let last = net.num_layers() - 1;
        let mut offset = 0;
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = (1.0 / fan_in as f64).sqrt() * if l == last { out_gain } else { 1.0 };
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-1.0..1.0) * bound;
            }
            offset += fan_out * (fan_in + 1);
        }
        round_to_f32(&mut net.params);
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
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

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let start = offset;
            offset += w[1] * (w[0] + 1);
            (start, w[0], w[1])
        })
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::shape(format!(
                "network expects {} inputs, got {cols}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor2) -> Result<(Tensor2, MlpCache)> {
        self.check_input(input.cols())?;
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut x = input.clone();
        for (l, (start, n_in, n_out)) in self.layer_offsets().enumerate() {
            let w = &self.params[start..start + n_in * n_out];
            let b = &self.params[start + n_in * n_out..start + n_out * (n_in + 1)];
            let mut y = Tensor2::zeros(x.rows(), n_out);
            for r in 0..x.rows() {
                let xr = x.row(r);
                for (j, out) in y.row_mut(r).iter_mut().enumerate() {
                    let z = b[j] + dot(&w[j * n_in..(j + 1) * n_in], xr);
                    *out = if l == last { z } else { z.tanh() };
                }
            }
            inputs.push(std::mem::replace(&mut x, y));
        }
        Ok((x, MlpCache { inputs }))
    }

    /// Forward pass for a single input row, without a cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let last = self.num_layers() - 1;
        let mut x = input.to_vec();
        for (l, (start, n_in, n_out)) in self.layer_offsets().enumerate() {
            let w = &self.params[start..start + n_in * n_out];
            let b = &self.params[start + n_in * n_out..start + n_out * (n_in + 1)];
            x = (0..n_out)
                .map(|j| {
                    let z = b[j] + dot(&w[j * n_in..(j + 1) * n_in], &x);
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
        }
        Ok(x)
    }

    /// Gradients of `sum(grad_out ⊙ output)` with respect to the parameters
    /// (flat, same layout as [`Mlp::params`]) and to the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Tensor2) -> Result<(Vec<f64>, Tensor2)> {
        if cache.inputs.len() != self.num_layers()
            || cache.inputs[0].cols() != self.input_dim()
        {
            return Err(Error::shape("cache does not match network"));
        }
        let rows = cache.inputs[0].rows();
        if grad_out.shape() != (rows, self.output_dim()) {
            return Err(Error::shape(format!(
                "output gradient {:?} does not match ({rows}, {})",
                grad_out.shape(),
                self.output_dim()
            )));
        }
        let offsets: Vec<_> = self.layer_offsets().collect();
        let mut grads = vec![0.0; self.params.len()];
        let mut g = grad_out.clone();
        for l in (0..self.num_layers()).rev() {
            let (start, n_in, n_out) = offsets[l];
            let x = &cache.inputs[l];
            let w = &self.params[start..start + n_in * n_out];
            let (gw, gb) = grads[start..start + n_out * (n_in + 1)].split_at_mut(n_in * n_out);
            let mut gx = Tensor2::zeros(rows, n_in);
            for r in 0..rows {
                let xr = x.row(r);
                let gr = g.row(r);
                let gxr = gx.row_mut(r);
                for j in 0..n_out {
                    let gj = gr[j];
                    if gj == 0.0 {
                        continue;
                    }
                    gb[j] += gj;
                    let wj = &w[j * n_in..(j + 1) * n_in];
                    for (k, (gwk, wk)) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(wj).enumerate() {
                        *gwk += gj * xr[k];
                        gxr[k] += gj * wk;
                    }
                }
            }
            if l > 0 {
                // x is the tanh output of layer l-1.
                for (gv, a) in gx.data_mut().iter_mut().zip(x.data()) {
                    *gv *= 1.0 - a * a;
                }
            }
            g = gx;
        }
        Ok((grads, g))
    }

    pub fn write_to<W: Write>(&self, w: &mut W, log_std: &[f64]) -> Result<()> {
        let io = |e| Error::Format(format!("network write failed: {e}"));
        w.write_all(NET_MAGIC).map_err(io)?;
        let mut header = vec![NET_VERSION, self.sizes.len() as u32];
        header.extend(self.sizes.iter().map(|&s| s as u32));
        header.push(log_std.len() as u32);
        for v in header {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        for &p in self.params.iter().chain(log_std) {
            w.write_all(&(p as f32).to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    /// Inverse of [`Mlp::write_to`]; returns the network and its log-std vector.
    pub fn read_from<R: Read>(r: &mut R) -> Result<(Self, Vec<f64>)> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != NET_MAGIC {
            return Err(Error::Integrity {
                field: "network magic".into(),
                expected: String::from_utf8_lossy(NET_MAGIC).into_owned(),
                found: String::from_utf8_lossy(&magic).into_owned(),
            });
        }
        let version = read_u32(r)?;
        if version != NET_VERSION {
            return Err(Error::Integrity {
                field: "network version".into(),
                expected: NET_VERSION.to_string(),
                found: version.to_string(),
            });
        }
        let n = read_u32(r)? as usize;
        if !(2..=16).contains(&n) {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let mut sizes = Vec::with_capacity(n);
        for _ in 0..n {
            let s = read_u32(r)? as usize;
            if s == 0 || s > 1 << 16 {
                return Err(Error::Format(format!("implausible layer width {s}")));
            }
            sizes.push(s);
        }
        let std_len = read_u32(r)? as usize;
        if std_len > 1 << 16 {
            return Err(Error::Format(format!("implausible log-std length {std_len}")));
        }
        let mut net = Self::zeros(&sizes)?;
        for p in net.params.iter_mut() {
            *p = read_f32(r)?;
        }
        let log_std = (0..std_len).map(|_| read_f32(r)).collect::<Result<Vec<_>>>()?;
        Ok((net, log_std))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated network data: {e}")))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    let v = f32::from_le_bytes(b) as f64;
    if !v.is_finite() {
        return Err(Error::NonFinite("non-finite stored parameter".into()));
    }
    Ok(v)
}

/// Diagonal Gaussian with a state-independent, learned log standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    pub log_std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(dim: usize, init_log_std: f64) -> Self {
        Self {
            log_std: vec![init_log_std; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.log_std.len()
    }

    fn clamped(&self, i: usize) -> f64 {
        self.log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    fn in_range(&self, i: usize) -> bool {
        (LOG_STD_MIN..=LOG_STD_MAX).contains(&self.log_std[i])
    }

    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> f64 {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        (0..self.dim())
            .map(|i| {
                let ls = self.clamped(i);
                let z = (action[i] - mean[i]) / ls.exp();
                -0.5 * z * z - ls - half_ln_2pi
            })
            .sum()
    }

    /// Gradients of the log-prob with respect to the mean and to `log_std`.
    pub fn log_prob_grad(&self, mean: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut g_mean = vec![0.0; self.dim()];
        let mut g_std = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            let var = (2.0 * self.clamped(i)).exp();
            let d = action[i] - mean[i];
            g_mean[i] = d / var;
            if self.in_range(i) {
                g_std[i] = d * d / var - 1.0;
            }
        }
        (g_mean, g_std)
    }

    pub fn entropy(&self) -> f64 {
        let c = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
        (0..self.dim()).map(|i| c + self.clamped(i)).sum()
    }

    /// Gradient of the entropy with respect to `log_std`.
    pub fn entropy_grad(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| if self.in_range(i) { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let n: f64 = StandardNormal.sample(rng);
                mean[i] + self.clamped(i).exp() * n
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam state has {} entries, params {}, grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

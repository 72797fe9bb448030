use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn uniform_fan_in(rng: &mut impl Rng, fan_in: usize) -> impl FnMut() -> f64 + '_ {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    move || rng.random_range(-bound..=bound)
}

/// Graph filter coefficients `g[c, f, k]` and per-feature bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagConvParams {
    pub coeffs: Array3<f64>,
    pub bias: Array1<f64>,
}

impl TagConvParams {
    pub fn zeros(in_channels: usize, out_features: usize, hops: usize) -> Self {
        Self {
            coeffs: Array3::zeros((in_channels, out_features, hops + 1)),
            bias: Array1::zeros(out_features),
        }
    }

    /// Uniform in `±1/sqrt(C (K+1))`, the fan-in of one output feature.
    pub fn init(in_channels: usize, out_features: usize, hops: usize, rng: &mut impl Rng) -> Self {
        let mut sample = uniform_fan_in(rng, in_channels * (hops + 1));
        let coeffs = Array3::from_shape_simple_fn((in_channels, out_features, hops + 1), &mut sample);
        let bias = Array1::from_shape_simple_fn(out_features, &mut sample);
        Self { coeffs, bias }
    }

    pub fn in_channels(&self) -> usize {
        self.coeffs.dim().0
    }

    pub fn out_features(&self) -> usize {
        self.coeffs.dim().1
    }

    pub fn hops(&self) -> usize {
        self.coeffs.dim().2 - 1
    }

    /// `G_k` as a `C x F` view.
    fn filter(&self, k: usize) -> ArrayView2<'_, f64> {
        self.coeffs.slice(s![.., .., k])
    }

    /// `z_f = sum_c sum_k g[c,f,k] A^k x_c + b_f`, returned as an `N x F` current matrix.
    pub fn forward(&self, x: ArrayView2<'_, f64>, powers: &[Array2<f64>]) -> Result<Array2<f64>> {
        let (n, c) = x.dim();
        if c != self.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "TAGConv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        if powers.len() < self.hops() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "TAGConv of degree {} needs {} adjacency powers, got {}",
                self.hops(),
                self.hops() + 1,
                powers.len()
            )));
        }
        if let Some(p) = powers.iter().find(|p| p.dim() != (n, n)) {
            return Err(Error::ShapeMismatch(format!("adjacency power is {:?} for {n} nodes", p.dim())));
        }
        let mut z = Array2::from_shape_fn((n, self.out_features()), |(_, f)| self.bias[f]);
        for (k, power) in powers.iter().enumerate().take(self.hops() + 1) {
            let propagated = power.dot(&x);
            z += &propagated.dot(&self.filter(k));
        }
        Ok(z)
    }

    /// Accumulates parameter gradients for one timestep given `d loss / d z` (`N x F`).
    pub(crate) fn accumulate_grad(
        &self,
        x: ArrayView2<'_, f64>,
        dz: ArrayView2<'_, f64>,
        powers: &[Array2<f64>],
        grad: &mut TagConvParams,
    ) {
        for (k, power) in powers.iter().enumerate().take(self.hops() + 1) {
            let propagated = power.dot(&x);
            let mut g = grad.coeffs.slice_mut(s![.., .., k]);
            g += &propagated.t().dot(&dz);
        }
        grad.bias += &dz.sum_axis(Axis(0));
    }
}

/// `h = W x + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl FcParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Array2::zeros((outputs, inputs)), bias: Array1::zeros(outputs) }
    }

    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut sample = uniform_fan_in(rng, inputs);
        let weight = Array2::from_shape_simple_fn((outputs, inputs), &mut sample);
        let bias = Array1::from_shape_simple_fn(outputs, &mut sample);
        Self { weight, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.inputs() {
            return Err(Error::ShapeMismatch(format!(
                "FC layer expects {} inputs, got {}",
                self.inputs(),
                x.len()
            )));
        }
        Ok(self.weight.dot(x) + &self.bias)
    }

    /// Row-wise affine map of a `T x in` sequence.
    pub(crate) fn forward_seq(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.inputs() {
            return Err(Error::ShapeMismatch(format!(
                "FC layer expects {} inputs, got {}",
                self.inputs(),
                x.ncols()
            )));
        }
        Ok(x.dot(&self.weight.t()) + &self.bias)
    }

    /// Parameter gradients from `d loss / d h` over a sequence; returns `d loss / d x`.
    pub(crate) fn backward_seq(
        &self,
        x: ArrayView2<'_, f64>,
        dh: ArrayView2<'_, f64>,
        grad: &mut FcParams,
    ) -> Array2<f64> {
        grad.weight += &dh.t().dot(&x);
        grad.bias += &dh.sum_axis(Axis(0));
        dh.dot(&self.weight)
    }
}

/// Free-function form of [`TagConvParams::forward`].
pub fn tagconv_forward(
    x: ArrayView2<'_, f64>,
    params: &TagConvParams,
    powers: &[Array2<f64>],
) -> Result<Array2<f64>> {
    params.forward(x, powers)
}

pub fn fc_forward(x: &Array1<f64>, params: &FcParams) -> Result<Array1<f64>> {
    params.forward(x)
}

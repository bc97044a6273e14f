//! Self-convolved filter kernels and their circulant eigenvalues.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{MvfifError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    /// `exp(-1/(1-x^2))` on `(-1, 1)`.
    #[default]
    Bump,
    /// `1 - |x|`.
    Triangle,
}

impl FilterShape {
    fn eval(self, x: f64) -> f64 {
        match self {
            FilterShape::Bump if x.abs() < 1.0 => (-1.0 / (1.0 - x * x)).exp(),
            FilterShape::Bump => 0.0,
            FilterShape::Triangle => (1.0 - x.abs()).max(0.0),
        }
    }
}

/// Nonnegative even window of length `2L+1`, built as `h * h`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel<T> {
    weights: Vec<T>,
    half_length: usize,
    shape: FilterShape,
    base: Vec<T>,
}

impl<T: Scalar> FilterKernel<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn half_length(&self) -> usize {
        self.half_length
    }

    pub fn shape(&self) -> FilterShape {
        self.shape
    }

    /// The base kernel `h` before self-convolution.
    pub fn base(&self) -> &[T] {
        &self.base
    }

    /// Unit impulse: `W = I`.
    pub fn delta() -> Self {
        Self {
            weights: vec![T::one()],
            half_length: 0,
            shape: FilterShape::Bump,
            base: vec![T::one()],
        }
    }

    /// Breaks the even symmetry of the kernel. Fault-injection hook for self-tests.
    #[doc(hidden)]
    pub fn with_asymmetry(mut self, amount: T) -> Self {
        let last = self.weights.len() - 1;
        if last > 0 {
            self.weights[last] += amount;
            let first = self.weights[0];
            self.weights[0] -= amount.min(first);
        }
        self
    }

    /// First column of the `m x m` circulant operator.
    pub fn circulant_column(&self, m: usize) -> Result<Vec<T>> {
        let l = self.half_length;
        if 2 * l + 1 > m {
            return Err(MvfifError::KernelTooWide { l, m });
        }
        let mut col = vec![T::zero(); m];
        col[0] = self.weights[l];
        for q in 1..=l {
            col[q] = self.weights[l + q];
            col[m - q] = self.weights[l - q];
        }
        Ok(col)
    }
}

/// Samples `shape` at `2 ceil(L/2) + 1` uniform points on `[-1, 1]`, normalizes,
/// self-convolves and fits the result to length `2L+1`.
pub fn build_kernel<T: Scalar>(l: usize, shape: FilterShape) -> Result<FilterKernel<T>> {
    if l < 1 {
        return Err(MvfifError::InvalidLength(l));
    }
    let a = l.div_ceil(2);
    let mut h: Vec<f64> = (0..=2 * a)
        .map(|j| shape.eval(-1.0 + j as f64 / a as f64))
        .collect();
    let sum: f64 = h.iter().sum();
    if sum <= 0.0 {
        h = vec![1.0];
    } else {
        h.iter_mut().for_each(|v| *v /= sum);
    }

    let mut w = vec![0.0f64; 2 * h.len() - 1];
    for (i, &x) in h.iter().enumerate() {
        for (j, &y) in h.iter().enumerate() {
            w[i + j] += x * y;
        }
    }
    let c = w.len() / 2;
    let w: Vec<f64> = if c >= l {
        w[c - l..=c + l].to_vec()
    } else {
        let mut p = vec![0.0; 2 * l + 1];
        p[l - c..=l + c].copy_from_slice(&w);
        p
    };
    let total: f64 = w.iter().sum();
    // exact mirror so rounding cannot break the symmetry
    let weights: Vec<T> = (0..=2 * l)
        .map(|i| T::of(0.5 * (w[i] + w[2 * l - i]) / total))
        .collect();
    Ok(FilterKernel {
        weights,
        half_length: l,
        shape,
        base: h.into_iter().map(T::of).collect(),
    })
}

/// Real eigenvalues of the circulant operator, clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueVector<T>(pub Vec<T>);

impl<T> EigenvalueVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// DFT of the circulant column before any cleanup.
pub fn raw_spectrum<T: Scalar>(kernel: &FilterKernel<T>, m: usize) -> Result<Vec<Complex<T>>> {
    let col = kernel.circulant_column(m)?;
    let mut buf: Vec<Complex<T>> = col.into_iter().map(|v| Complex::new(v, T::zero())).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    Ok(buf)
}

pub fn eigenvalues<T: Scalar>(kernel: &FilterKernel<T>, m: usize) -> Result<EigenvalueVector<T>> {
    let spec = raw_spectrum(kernel, m)?;
    let tol = T::tol(1e-10);
    if let Some(c) = spec.iter().find(|c| c.im.abs() > tol) {
        log::warn!("kernel spectrum has imaginary part {}", c.im);
    }
    Ok(EigenvalueVector(
        spec.into_iter().map(|c| c.re.max(T::zero()).min(T::one())).collect(),
    ))
}

//! Rotation angle between consecutive sample vectors, extrema detection and filter lengths.

use crate::error::{MvfifError, Result};
use crate::scalar::Scalar;
use crate::signal::MultivariateSignal;

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSeries<T> {
    /// `values[t-1]` is the angle between columns `t-1` and `t`, in `[0, pi]`.
    pub values: Vec<T>,
    pub source_len: usize,
    /// Indices into `values` where a near-zero column forced the angle to 0.
    pub degenerate: Vec<usize>,
}

/// Angle between consecutive normalized column vectors.
pub fn compute_theta<T: Scalar>(signal: &MultivariateSignal<T>) -> Result<ThetaSeries<T>> {
    let (n, m) = (signal.channels(), signal.samples());
    if m < 2 {
        return Err(MvfifError::SignalTooShort { m });
    }
    let data = signal.as_slice();
    let mut norms = vec![T::zero(); m];
    for row in data.chunks_exact(m) {
        for (acc, &v) in norms.iter_mut().zip(row) {
            *acc += v * v;
        }
    }
    norms.iter_mut().for_each(|v| *v = v.sqrt());
    let max_norm = norms.iter().copied().fold(T::zero(), T::max);
    let floor = T::of(1e-14) * max_norm;

    let mut values = Vec::with_capacity(m - 1);
    let mut degenerate = Vec::new();
    for t in 1..m {
        let (na, nb) = (norms[t], norms[t - 1]);
        if na <= floor || nb <= floor || max_norm == T::zero() {
            degenerate.push(t - 1);
            values.push(T::zero());
            continue;
        }
        let (mut diff, mut sum) = (T::zero(), T::zero());
        for i in 0..n {
            let a = data[i * m + t] / na;
            let b = data[i * m + t - 1] / nb;
            diff += (a - b) * (a - b);
            sum += (a + b) * (a + b);
        }
        let th = T::of(2.0) * diff.sqrt().atan2(sum.sqrt());
        values.push(th.max(T::zero()).min(T::PI()));
    }
    if !degenerate.is_empty() {
        log::debug!("theta: {} zero-norm columns", degenerate.len());
    }
    Ok(ThetaSeries {
        values,
        source_len: m,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtremaSet {
    pub indices: Vec<usize>,
}

impl ExtremaSet {
    pub fn count(&self) -> usize {
        self.indices.len()
    }

    /// Mean distance between consecutive extrema.
    pub fn mean_gap(&self) -> Option<f64> {
        let k = self.indices.len();
        (k >= 2).then(|| (self.indices[k - 1] - self.indices[0]) as f64 / (k - 1) as f64)
    }
}

/// Strict interior extrema after collapsing runs of equal values to their midpoint.
pub fn find_extrema<T: PartialOrd + Copy>(series: &[T]) -> ExtremaSet {
    let mut runs: Vec<(usize, T)> = Vec::new();
    let mut i = 0;
    while i < series.len() {
        let mut j = i;
        while j + 1 < series.len() && series[j + 1] == series[i] {
            j += 1;
        }
        runs.push(((i + j) / 2, series[i]));
        i = j + 1;
    }
    let indices = runs
        .windows(3)
        .filter(|w| {
            let (a, b, c) = (w[0].1, w[1].1, w[2].1);
            (b > a && b > c) || (b < a && b < c)
        })
        .map(|w| w[1].0)
        .collect();
    ExtremaSet { indices }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterLength {
    Length(usize),
    /// Fewer than two extrema: the residual is a trend.
    Trend,
}

impl FilterLength {
    pub fn length(self) -> Option<usize> {
        match self {
            FilterLength::Length(l) => Some(l),
            FilterLength::Trend => None,
        }
    }
}

/// Doubled mean extrema spacing of theta, rounded.
pub fn filter_length_from_theta<T: Scalar>(theta: &ThetaSeries<T>) -> FilterLength {
    match find_extrema(&theta.values).mean_gap() {
        Some(gap) => FilterLength::Length(((2.0 * gap).round() as usize).max(1)),
        None => FilterLength::Trend,
    }
}

/// Length used by the multivariate decomposer: `2 floor(xi * D)` with `D` the doubled mean spacing.
pub fn mvfif_filter_length<T: Scalar>(theta: &ThetaSeries<T>, xi: T) -> FilterLength {
    match find_extrema(&theta.values).mean_gap() {
        Some(gap) => FilterLength::Length((2 * (xi.as_f64() * 2.0 * gap).floor() as usize).max(1)),
        None => FilterLength::Trend,
    }
}

/// `2 floor(xi * N / k)` for a single channel.
pub fn filter_length_univariate<T: Scalar>(series: &[T], xi: T) -> Result<usize> {
    let k = find_extrema(series).count();
    if k < 2 {
        return Err(MvfifError::NoExtrema);
    }
    Ok(length_from_count(series.len(), k, xi.as_f64()))
}

pub(crate) fn length_from_count(n: usize, k: usize, xi: f64) -> usize {
    (2 * (xi * n as f64 / k as f64).floor() as usize).max(1)
}

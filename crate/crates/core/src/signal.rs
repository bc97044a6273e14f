//! Multichannel signals, decomposition containers and boundary extension.

use serde::{Deserialize, Serialize};

use crate::error::{MvfifError, Result};
use crate::filter::FilterShape;
use crate::scalar::Scalar;

/// `n` channels by `m` samples, stored row-major (one row per channel).
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSignal<T> {
    data: Vec<T>,
    n: usize,
    m: usize,
    sample_rate: T,
    labels: Option<Vec<String>>,
}

impl<T: Scalar> MultivariateSignal<T> {
    /// Builds a signal from per-channel rows. Only the shape is checked here; see [`validate`].
    pub fn from_rows(rows: Vec<Vec<T>>, sample_rate: T) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(MvfifError::EmptySignal);
        }
        let m = rows[0].len();
        for (channel, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(MvfifError::RaggedChannels {
                    channel,
                    expected: m,
                    found: row.len(),
                });
            }
        }
        if m == 0 {
            return Err(MvfifError::EmptySignal);
        }
        check_rate(sample_rate)?;
        Ok(Self {
            data: rows.into_iter().flatten().collect(),
            n,
            m,
            sample_rate,
            labels: None,
        })
    }

    /// Builds a signal from a row-major buffer of length `n * m`.
    pub fn from_flat(n: usize, m: usize, data: Vec<T>, sample_rate: T) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(MvfifError::EmptySignal);
        }
        if data.len() != n * m {
            return Err(MvfifError::ShapeMismatch(format!(
                "buffer of {} values cannot hold {n}x{m}",
                data.len()
            )));
        }
        check_rate(sample_rate)?;
        Ok(Self {
            data,
            n,
            m,
            sample_rate,
            labels: None,
        })
    }

    pub fn zeros(n: usize, m: usize, sample_rate: T) -> Result<Self> {
        Self::from_flat(n, m, vec![T::zero(); n * m], sample_rate)
    }

    pub fn with_labels(mut self, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n {
                return Err(MvfifError::ShapeMismatch(format!(
                    "{} labels for {} channels",
                    l.len(),
                    self.n
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub(crate) fn same_shape(&self, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            data,
            n: self.n,
            m: self.m,
            sample_rate: self.sample_rate,
            labels: self.labels.clone(),
        }
    }

    pub fn channels(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> usize {
        self.m
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn channel(&self, i: usize) -> &[T] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn channel_mut(&mut self, i: usize) -> &mut [T] {
        let m = self.m;
        &mut self.data[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.data.chunks_exact(self.m)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, channel: usize, sample: usize) -> T {
        self.data[channel * self.m + sample]
    }

    /// Column vector at one time index.
    pub fn column(&self, t: usize) -> Vec<T> {
        (0..self.n).map(|i| self.data[i * self.m + t]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    /// Single-channel view as an owned signal.
    pub fn select_channel(&self, i: usize) -> Self {
        Self {
            data: self.channel(i).to_vec(),
            n: 1,
            m: self.m,
            sample_rate: self.sample_rate,
            labels: self.labels.as_ref().map(|l| vec![l[i].clone()]),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.same_shape(self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.same_shape(self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect()))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.m != other.m {
            return Err(MvfifError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.n, self.m, other.n, other.m
            )));
        }
        Ok(())
    }

    pub fn channel_norm(&self, i: usize) -> T {
        norm(self.channel(i))
    }
}

fn check_rate<T: Scalar>(fs: T) -> Result<()> {
    if fs.is_finite() && fs > T::zero() {
        Ok(())
    } else {
        Err(MvfifError::InvalidSampleRate)
    }
}

pub(crate) fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// Checks the invariants every decomposer relies on: finite samples and `m >= 3`.
pub fn validate<T: Scalar>(signal: MultivariateSignal<T>) -> Result<MultivariateSignal<T>> {
    if signal.m < 3 {
        return Err(MvfifError::TooShort {
            found: signal.m,
            required: 3,
        });
    }
    if let Some(pos) = signal.data.iter().position(|v| !v.is_finite()) {
        return Err(MvfifError::NonFinite {
            channel: pos / signal.m,
            index: pos % signal.m,
        });
    }
    Ok(signal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    None,
    #[default]
    Reflect,
}

// even reflection about both endpoints, folding repeatedly for long extensions
fn reflect_index(j: isize, m: usize) -> usize {
    if m == 1 {
        return 0;
    }
    let period = 2 * (m as isize - 1);
    let r = j.rem_euclid(period);
    if r < m as isize {
        r as usize
    } else {
        (period - r) as usize
    }
}

/// Pads every channel by `ext_len` samples on each side.
pub fn pre_extend<T: Scalar>(
    signal: &MultivariateSignal<T>,
    mode: Extension,
    ext_len: usize,
) -> Result<MultivariateSignal<T>> {
    if ext_len > signal.m {
        return Err(MvfifError::ExtensionTooLong {
            ext_len,
            m: signal.m,
        });
    }
    if mode == Extension::None || ext_len == 0 {
        return Ok(signal.clone());
    }
    let m = signal.m;
    let me = m + 2 * ext_len;
    let mut data = Vec::with_capacity(signal.n * me);
    for row in signal.rows() {
        data.extend((0..me).map(|j| row[reflect_index(j as isize - ext_len as isize, m)]));
    }
    Ok(MultivariateSignal {
        data,
        n: signal.n,
        m: me,
        sample_rate: signal.sample_rate,
        labels: signal.labels.clone(),
    })
}

/// Removes `ext_len` samples from each side of every channel.
pub fn crop<T: Scalar>(signal: &MultivariateSignal<T>, ext_len: usize) -> Result<MultivariateSignal<T>> {
    if 2 * ext_len >= signal.m {
        return Err(MvfifError::ExtensionTooLong {
            ext_len,
            m: signal.m,
        });
    }
    if ext_len == 0 {
        return Ok(signal.clone());
    }
    let m = signal.m - 2 * ext_len;
    let data = signal
        .rows()
        .flat_map(|row| row[ext_len..ext_len + m].iter().copied())
        .collect();
    Ok(MultivariateSignal {
        data,
        n: signal.n,
        m,
        sample_rate: signal.sample_rate,
        labels: signal.labels.clone(),
    })
}

/// Inner-loop stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "delta", rename_all = "snake_case")]
pub enum StopRule<T> {
    /// `max_i ||u_i^(k+1) - u_i^(k)||^2 / ||u_i^(k)||^2 < delta`.
    RelativeEnergy(T),
    /// Absolute criterion with threshold `delta * max_i ||u_i^(0)||`.
    RelativeToInput(T),
    /// `max_i ||u_i^(k+1) - u_i^(k)|| < delta`.
    Absolute(T),
}

impl<T: Scalar> StopRule<T> {
    pub fn delta(&self) -> T {
        match *self {
            StopRule::RelativeEnergy(d) | StopRule::RelativeToInput(d) | StopRule::Absolute(d) => d,
        }
    }
}

impl<T: Scalar> Default for StopRule<T> {
    fn default() -> Self {
        StopRule::RelativeEnergy(T::of(1e-3))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig<T> {
    pub xi: T,
    pub stop: StopRule<T>,
    pub max_inner: usize,
    pub max_imfs: Option<usize>,
    pub extension: Extension,
    /// Per-side extension; `None` derives it from the first filter length.
    pub ext_len: Option<usize>,
    pub filter_shape: FilterShape,
    pub monotone_l: bool,
}

impl<T: Scalar> Default for DecompositionConfig<T> {
    fn default() -> Self {
        Self {
            xi: T::of(1.6),
            stop: StopRule::default(),
            max_inner: 200,
            max_imfs: None,
            extension: Extension::Reflect,
            ext_len: None,
            filter_shape: FilterShape::Bump,
            monotone_l: true,
        }
    }
}

impl<T: Scalar> DecompositionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.xi > T::zero()) {
            return Err(MvfifError::InvalidConfig("xi must be positive".into()));
        }
        let d = self.stop.delta();
        if !(d.is_finite() && d > T::zero()) {
            return Err(MvfifError::InvalidConfig("delta must be positive".into()));
        }
        if self.max_inner == 0 {
            return Err(MvfifError::InvalidConfig("max_inner must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mvfif,
    Fif,
}

/// Why the outer loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Fewer than two extrema remain.
    Trend,
    MaxImfs,
    /// Next filter would not fit in the signal.
    FilterTooWide,
    ImfCeiling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImfMeta<T> {
    #[serde(rename = "L")]
    pub filter_length: usize,
    #[serde(rename = "N0")]
    pub inner_iterations: usize,
    pub stopping_value: T,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    pub imfs: Vec<MultivariateSignal<T>>,
    pub trend: MultivariateSignal<T>,
    pub meta: Vec<ImfMeta<T>>,
    pub config: DecompositionConfig<T>,
    pub method: Method,
    pub ext_len: usize,
    pub stop_reason: StopReason,
}

impl<T: Scalar> Decomposition<T> {
    pub fn num_imfs(&self) -> usize {
        self.imfs.len()
    }

    pub fn channels(&self) -> usize {
        self.trend.channels()
    }

    pub fn samples(&self) -> usize {
        self.trend.samples()
    }

    pub fn sample_rate(&self) -> T {
        self.trend.sample_rate()
    }

    pub fn converged(&self) -> bool {
        self.meta.iter().all(|m| m.converged)
    }

    /// Sum of all IMFs plus the trend.
    pub fn reconstruct(&self) -> MultivariateSignal<T> {
        let mut out = self.trend.clone();
        for imf in &self.imfs {
            for (o, &v) in out.data.iter_mut().zip(&imf.data) {
                *o += v;
            }
        }
        out
    }

    /// Largest per-channel relative reconstruction error against `input`.
    pub fn reconstruction_error(&self, input: &MultivariateSignal<T>) -> Result<T> {
        let rec = self.reconstruct();
        let diff = input.sub(&rec)?;
        Ok((0..input.channels())
            .map(|i| {
                let nrm = input.channel_norm(i);
                let d = diff.channel_norm(i);
                if nrm > T::zero() {
                    d / nrm
                } else {
                    d
                }
            })
            .fold(T::zero(), T::max))
    }
}

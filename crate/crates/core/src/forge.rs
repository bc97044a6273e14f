//! Deterministic synthetic inputs: white Gaussian noise ensembles and two bivariate test signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MvfifError, Result};
use crate::scalar::Scalar;
use crate::signal::MultivariateSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    WgnEnsemble,
    BivariateIvb,
    BivariateIve,
}

/// Full description of a generated input, written next to generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub m: usize,
    pub t0: f64,
    pub t1: f64,
    pub seed: u64,
    pub sigmas: Vec<f64>,
    pub realizations: usize,
}

impl GeneratorSpec {
    pub fn wgn(n: usize, m: usize, realizations: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::WgnEnsemble,
            n,
            m,
            t0: 0.0,
            t1: m as f64,
            seed,
            sigmas: vec![1.0; n],
            realizations,
        }
    }

    /// Two channels on `[0, 10]` with 2000 samples.
    pub fn ivb() -> Self {
        Self {
            kind: GeneratorKind::BivariateIvb,
            n: 2,
            m: 2000,
            t0: 0.0,
            t1: 10.0,
            seed: 0,
            sigmas: vec![0.0, 0.0],
            realizations: 1,
        }
    }

    /// Two noisy channels on `[0, 20]` with 1000 samples and noise levels 1 and 2.
    pub fn ive(seed: u64) -> Self {
        Self {
            kind: GeneratorKind::BivariateIve,
            n: 2,
            m: 1000,
            t0: 0.0,
            t1: 20.0,
            seed,
            sigmas: vec![1.0, 2.0],
            realizations: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return Err(MvfifError::TooShort { found: self.m, required: 3 });
        }
        if self.n == 0 {
            return Err(MvfifError::EmptySignal);
        }
        if !self.t0.is_finite() || !self.t1.is_finite() || self.t1 <= self.t0 {
            return Err(MvfifError::InvalidConfig("time span must satisfy t1 > t0".into()));
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(MvfifError::InvalidConfig("noise levels must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        self.m as f64 / (self.t1 - self.t0)
    }
}

/// `m` points from `t0` with step `(t1 - t0) / m`; `t1` itself is excluded.
pub fn time_grid(m: usize, t0: f64, t1: f64) -> Vec<f64> {
    let dt = (t1 - t0) / m as f64;
    (0..m).map(|j| t0 + j as f64 * dt).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6D76_6669_665F_7267, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

const WGN_TAG: u64 = 1;
const IVE_TAG: u64 = 2;

/// Standard normal samples of one independent stream.
pub fn normal_stream(parts: &[u64], len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_key(parts));
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Independent standard normal realizations; channel `c` of realization `r` depends only on
/// `(seed, n, r, c)`.
pub fn gen_wgn_ensemble<T: Scalar>(spec: &GeneratorSpec) -> Result<Vec<MultivariateSignal<T>>> {
    spec.validate()?;
    let fs = T::of(spec.sample_rate());
    (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            let rows = (0..spec.n)
                .map(|c| {
                    normal_stream(&[WGN_TAG, spec.seed, spec.n as u64, r as u64, c as u64], spec.m)
                        .into_iter()
                        .map(T::of)
                        .collect()
                })
                .collect();
            MultivariateSignal::from_rows(rows, fs)
        })
        .collect()
}

fn to_signal<T: Scalar>(rows: Vec<Vec<f64>>, fs: f64) -> Result<MultivariateSignal<T>> {
    MultivariateSignal::from_rows(
        rows.into_iter().map(|r| r.into_iter().map(T::of).collect()).collect(),
        T::of(fs),
    )
}

/// Clean parts of the bivariate signal with one shared 2 Hz oscillation.
pub fn ivb_components(t: &[f64]) -> [[Vec<f64>; 3]; 2] {
    use std::f64::consts::{FRAC_PI_2, PI};
    let f = |g: &dyn Fn(f64) -> f64| t.iter().map(|&x| g(x)).collect::<Vec<_>>();
    [
        [
            f(&|x| 0.5 * x),
            f(&|x| (4.0 * PI * x + FRAC_PI_2).sin()),
            f(&|x| (0.2 * PI * x.powf(1.3)).cos()),
        ],
        [
            f(&|x| -x / 5.0),
            f(&|x| (4.0 * PI * x).sin()),
            f(&|x| (6.0 * PI * (x * x / 20.0 + x)).sin()),
        ],
    ]
}

/// Clean parts of the noisy bivariate signal with a shared 1 Hz oscillation.
pub fn ive_components(t: &[f64]) -> [[Vec<f64>; 3]; 2] {
    use std::f64::consts::{FRAC_PI_2, PI};
    let f = |g: &dyn Fn(f64) -> f64| t.iter().map(|&x| g(x)).collect::<Vec<_>>();
    [
        [
            f(&|x| 0.5 * x),
            f(&|x| (2.0 * PI * x + FRAC_PI_2).sin()),
            f(&|x| (0.2 * PI * x.powf(1.3)).cos()),
        ],
        [
            f(&|x| -x / 5.0),
            f(&|x| (2.0 * PI * x).sin()),
            f(&|x| (6.0 * PI * (x.powf(1.5) / 20.0 + x)).sin()),
        ],
    ]
}

fn sum_parts(parts: &[Vec<f64>; 3]) -> Vec<f64> {
    (0..parts[0].len()).map(|j| parts[0][j] + parts[1][j] + parts[2][j]).collect()
}

pub fn gen_bivariate_ivb<T: Scalar>(m: usize, t0: f64, t1: f64) -> Result<MultivariateSignal<T>> {
    let spec = GeneratorSpec { m, t0, t1, ..GeneratorSpec::ivb() };
    spec.validate()?;
    let t = time_grid(m, t0, t1);
    let [a, b] = ivb_components(&t);
    to_signal(vec![sum_parts(&a), sum_parts(&b)], spec.sample_rate())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyPair<T> {
    pub noisy: MultivariateSignal<T>,
    pub clean: MultivariateSignal<T>,
}

pub fn gen_bivariate_ive<T: Scalar>(m: usize, t0: f64, t1: f64, seed: u64, sigmas: [f64; 2]) -> Result<NoisyPair<T>> {
    let spec = GeneratorSpec { m, t0, t1, sigmas: sigmas.to_vec(), ..GeneratorSpec::ive(seed) };
    spec.validate()?;
    let t = time_grid(m, t0, t1);
    let clean_rows: Vec<Vec<f64>> = ive_components(&t).iter().map(sum_parts).collect();
    let noisy_rows = clean_rows
        .iter()
        .enumerate()
        .map(|(c, row)| {
            if sigmas[c] == 0.0 {
                return row.clone();
            }
            let z = normal_stream(&[IVE_TAG, seed, c as u64], m);
            row.iter().zip(z).map(|(&x, e)| x + sigmas[c] * e).collect()
        })
        .collect();
    Ok(NoisyPair {
        noisy: to_signal(noisy_rows, spec.sample_rate())?,
        clean: to_signal(clean_rows, spec.sample_rate())?,
    })
}

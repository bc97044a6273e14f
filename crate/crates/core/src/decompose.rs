//! Inner and outer iterations of the multivariate and univariate decomposers.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{MvfifError, Result};
use crate::filter::{build_kernel, eigenvalues, FilterKernel};
use crate::rotation::{compute_theta, find_extrema, length_from_count, mvfif_filter_length, FilterLength};
use crate::scalar::Scalar;
use crate::signal::{
    crop, pre_extend, validate, Decomposition, DecompositionConfig, Extension, ImfMeta, Method,
    MultivariateSignal, StopReason, StopRule,
};

/// Outer-loop ceiling when no IMF cap is configured.
pub const IMF_CEILING: usize = 64;

const PARALLEL_THRESHOLD: usize = 1 << 15;

static INNER_LOOPS: AtomicU64 = AtomicU64::new(0);
static SC_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Inner loops run by this process.
pub fn inner_loops_run() -> u64 {
    INNER_LOOPS.load(Ordering::Relaxed)
}

/// Iterations in this process where the absolute step norm grew.
pub fn sc_monotonicity_violations() -> u64 {
    SC_VIOLATIONS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoopOutcome<T> {
    pub imf: MultivariateSignal<T>,
    pub iterations: usize,
    /// Value of the configured stopping statistic at the last iteration.
    pub stopping_value: T,
    pub converged: bool,
    /// `max_i ||u_i^(k+1) - u_i^(k)||` for every iteration.
    pub sc_trace: Vec<T>,
}

/// Repeats `u_i <- (I - W) u_i` jointly on all channels until the stopping rule holds.
pub fn inner_loop<T: Scalar>(
    channels: &MultivariateSignal<T>,
    kernel: &FilterKernel<T>,
    stop: &StopRule<T>,
    max_inner: usize,
) -> Result<InnerLoopOutcome<T>> {
    if max_inner == 0 {
        return Err(MvfifError::InvalidConfig("max_inner must be at least 1".into()));
    }
    let (n, m) = (channels.channels(), channels.samples());
    let lambda = eigenvalues(kernel, m)?.0;
    let damp: Vec<T> = lambda.iter().map(|&l| T::one() - l).collect();
    let parallel = n > 1 && n * m >= PARALLEL_THRESHOLD;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut spec: Vec<Complex<T>> = channels
        .as_slice()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    for_each_channel(&mut spec, m, parallel, |row| fwd.process(row));

    let sqrt_m = T::from_usize_lossy(m).sqrt();
    let step = |row: &mut [Complex<T>]| {
        let (mut diff, mut cur) = (T::zero(), T::zero());
        for ((u, &l), &d) in row.iter_mut().zip(&lambda).zip(&damp) {
            let e = u.norm_sqr();
            diff += l * l * e;
            cur += e;
            *u *= d;
        }
        (diff, cur)
    };

    let mut trace = Vec::new();
    let mut threshold = None;
    let (mut stat, mut converged) = (T::zero(), false);
    let mut k = 0;
    while k < max_inner {
        let sums: Vec<(T, T)> = if parallel {
            spec.par_chunks_mut(m).map(step).collect()
        } else {
            spec.chunks_mut(m).map(step).collect()
        };
        k += 1;
        let sc = sums.iter().map(|&(d, _)| d.sqrt() / sqrt_m).fold(T::zero(), T::max);
        if let Some(&prev) = trace.last() {
            if sc > prev {
                SC_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
                log::warn!("stopping sequence increased: {prev} -> {sc}");
            }
        }
        trace.push(sc);
        let thr = match *stop {
            StopRule::RelativeEnergy(d) => {
                stat = sums
                    .iter()
                    .map(|&(d, c)| if c > T::zero() { d / c } else { T::zero() })
                    .fold(T::zero(), T::max);
                d
            }
            StopRule::Absolute(d) => {
                stat = sc;
                d
            }
            StopRule::RelativeToInput(d) => {
                stat = sc;
                *threshold.get_or_insert_with(|| {
                    d * sums.iter().map(|&(_, c)| c.sqrt() / sqrt_m).fold(T::zero(), T::max)
                })
            }
        };
        if stat < thr || stat == T::zero() {
            converged = true;
            break;
        }
    }
    INNER_LOOPS.fetch_add(1, Ordering::Relaxed);

    for_each_channel(&mut spec, m, parallel, |row| inv.process(row));
    let scale = T::one() / T::from_usize_lossy(m);
    let max_re = spec.iter().map(|c| c.re.abs()).fold(T::zero(), T::max) * scale;
    let max_im = spec.iter().map(|c| c.im.abs()).fold(T::zero(), T::max) * scale;
    let tol = T::tol(1e-9) * max_re.max(T::one());
    if max_im > tol {
        return Err(MvfifError::ComplexResidue {
            residue: max_im.as_f64(),
            tolerance: tol.as_f64(),
        });
    }
    let imf = channels.same_shape(spec.into_iter().map(|c| c.re * scale).collect());
    if !converged {
        log::info!("inner loop reached max_inner = {max_inner}");
    }
    Ok(InnerLoopOutcome {
        imf,
        iterations: k,
        stopping_value: stat,
        converged,
        sc_trace: trace,
    })
}

fn for_each_channel<T: Scalar, F>(spec: &mut [Complex<T>], m: usize, parallel: bool, f: F)
where
    F: Fn(&mut [Complex<T>]) + Sync + Send,
{
    if parallel {
        spec.par_chunks_mut(m).for_each(f);
    } else {
        spec.chunks_mut(m).for_each(f);
    }
}

fn is_smooth(mut x: usize) -> bool {
    if x == 0 {
        return false;
    }
    for p in [2, 3, 5, 7] {
        while x.is_multiple_of(p) {
            x /= p;
        }
    }
    x == 1
}

/// Per-side extension for a first filter length `l0`: `min(m-1, 2 l0)`, grown by at most
/// about as much again so the extended length factors into small primes.
pub fn auto_ext_len(m: usize, l0: usize) -> usize {
    let target = (2 * l0).min(m.saturating_sub(1));
    let limit = (2 * target + 16).min(m.saturating_sub(1));
    (target..=limit)
        .find(|&e| is_smooth(m + 2 * e))
        .unwrap_or(target)
}

/// Multivariate decomposition with one filter length per IMF shared by all channels.
pub fn mvfif_decompose<T: Scalar>(
    signal: &MultivariateSignal<T>,
    config: &DecompositionConfig<T>,
) -> Result<Decomposition<T>> {
    let xi = config.xi;
    run_outer(signal, config, Method::Mvfif, |r| {
        Ok(mvfif_filter_length(&compute_theta(r)?, xi))
    })
}

/// Univariate decomposition of a single-channel signal.
pub fn fif_decompose<T: Scalar>(
    signal: &MultivariateSignal<T>,
    config: &DecompositionConfig<T>,
) -> Result<Decomposition<T>> {
    if signal.channels() != 1 {
        return Err(MvfifError::ShapeMismatch(format!(
            "univariate decomposition needs one channel, got {}",
            signal.channels()
        )));
    }
    let xi = config.xi.as_f64();
    run_outer(signal, config, Method::Fif, |r| {
        let x = r.channel(0);
        let k = find_extrema(x).count();
        Ok(if k < 2 {
            FilterLength::Trend
        } else {
            FilterLength::Length(length_from_count(x.len(), k, xi))
        })
    })
}

/// Decomposes every channel independently.
pub fn fif_decompose_channels<T: Scalar>(
    signal: &MultivariateSignal<T>,
    config: &DecompositionConfig<T>,
) -> Result<Vec<Decomposition<T>>> {
    (0..signal.channels())
        .into_par_iter()
        .map(|c| fif_decompose(&signal.select_channel(c), config))
        .collect()
}

fn run_outer<T: Scalar, F>(
    signal: &MultivariateSignal<T>,
    config: &DecompositionConfig<T>,
    method: Method,
    length_rule: F,
) -> Result<Decomposition<T>>
where
    F: Fn(&MultivariateSignal<T>) -> Result<FilterLength>,
{
    config.validate()?;
    let signal = validate(signal.clone())?;
    let m = signal.samples();

    let ext_len = match config.extension {
        Extension::None => 0,
        Extension::Reflect => match config.ext_len {
            Some(e) => e,
            None => match length_rule(&signal)? {
                FilterLength::Length(l0) => auto_ext_len(m, l0),
                FilterLength::Trend => 0,
            },
        },
    };
    let mut residual = pre_extend(&signal, config.extension, ext_len)?;
    let me = residual.samples();

    let cap = config.max_imfs.unwrap_or(IMF_CEILING);
    let mut imfs = Vec::new();
    let mut meta = Vec::new();
    let mut prev_l = 0;
    let stop_reason = loop {
        if imfs.len() >= cap {
            break if config.max_imfs.is_some() {
                StopReason::MaxImfs
            } else {
                StopReason::ImfCeiling
            };
        }
        let mut l = match length_rule(&residual)? {
            FilterLength::Length(l) => l,
            FilterLength::Trend => break StopReason::Trend,
        };
        if config.monotone_l {
            l = l.max(prev_l);
        }
        if 2 * l + 1 > me {
            break StopReason::FilterTooWide;
        }
        let kernel = build_kernel(l, config.filter_shape)?;
        let out = inner_loop(&residual, &kernel, &config.stop, config.max_inner)?;
        for (r, &v) in residual.as_mut_slice().iter_mut().zip(out.imf.as_slice()) {
            *r -= v;
        }
        meta.push(ImfMeta {
            filter_length: l,
            inner_iterations: out.iterations,
            stopping_value: out.stopping_value,
            converged: out.converged,
        });
        imfs.push(crop(&out.imf, ext_len)?);
        prev_l = l;
    };
    log::debug!("{:?}: {} IMFs, stop {:?}", method, imfs.len(), stop_reason);

    Ok(Decomposition {
        imfs,
        trend: crop(&residual, ext_len)?,
        meta,
        config: config.clone(),
        method,
        ext_len,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::FilterShape;
    use std::f64::consts::PI;

    fn sig(rows: Vec<Vec<f64>>, fs: f64) -> MultivariateSignal<f64> {
        MultivariateSignal::from_rows(rows, fs).unwrap()
    }

    #[test]
    fn zero_signal_is_a_fixed_point() {
        let s = MultivariateSignal::<f64>::zeros(2, 32, 1.0).unwrap();
        let k = build_kernel(3, FilterShape::Bump).unwrap();
        let out = inner_loop(&s, &k, &StopRule::Absolute(1e-6), 50).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.stopping_value, 0.0);
        assert!(out.converged);
        assert!(out.imf.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fourier_mode_scales_by_one_minus_lambda() {
        let m = 32;
        let p = 3;
        let ang: Vec<f64> = (0..m).map(|t| 2.0 * PI * (p * t) as f64 / m as f64).collect();
        let s = sig(vec![ang.iter().map(|a| a.cos()).collect(), ang.iter().map(|a| a.sin()).collect()], 1.0);
        let k = build_kernel(4, FilterShape::Bump).unwrap();
        let lam = eigenvalues(&k, m).unwrap().0[p];
        for steps in 1..4 {
            let out = inner_loop(&s, &k, &StopRule::Absolute(1e-300), steps).unwrap();
            assert_eq!(out.iterations, steps);
            let g = (1.0 - lam).powi(steps as i32);
            for c in 0..2 {
                for t in 0..m {
                    assert!((out.imf.get(c, t) - g * s.get(c, t)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn relative_to_input_on_zero_signal_stops() {
        let s = MultivariateSignal::<f64>::zeros(1, 16, 1.0).unwrap();
        let k = build_kernel(2, FilterShape::Bump).unwrap();
        let out = inner_loop(&s, &k, &StopRule::RelativeToInput(1e-3), 10).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn max_inner_flags_nonconvergence() {
        let x: Vec<f64> = (0..64).map(|t| (t as f64 * 0.7).sin() + (t as f64 * 0.05).cos()).collect();
        let s = sig(vec![x], 1.0);
        let k = build_kernel(5, FilterShape::Bump).unwrap();
        let out = inner_loop(&s, &k, &StopRule::Absolute(1e-300), 3).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert_eq!(out.sc_trace.len(), 3);
    }

    #[test]
    fn smooth_extension_lengths() {
        assert_eq!(auto_ext_len(1000, 8), 25);
        assert_eq!(auto_ext_len(1000, 12), 25);
        let e = auto_ext_len(4096, 9);
        assert!(e >= 18 && is_smooth(4096 + 2 * e));
        assert_eq!(auto_ext_len(10, 50), 9);
    }

    #[test]
    fn constant_signal_is_all_trend() {
        let s = sig(vec![vec![3.0; 50], vec![-1.0; 50], vec![0.5; 50]], 1.0);
        let d = mvfif_decompose(&s, &DecompositionConfig::default()).unwrap();
        assert_eq!(d.num_imfs(), 0);
        assert_eq!(d.trend, s);
        assert_eq!(d.stop_reason, StopReason::Trend);
    }

    #[test]
    fn max_imfs_caps_the_outer_loop() {
        let x: Vec<f64> = (0..400).map(|t| ((t * t) as f64 * 0.001).sin()).collect();
        let y: Vec<f64> = (0..400).map(|t| (t as f64 * 0.3).cos()).collect();
        let cfg = DecompositionConfig { max_imfs: Some(2), ..Default::default() };
        let d = mvfif_decompose(&sig(vec![x, y], 1.0), &cfg).unwrap();
        assert_eq!(d.num_imfs(), 2);
        assert_eq!(d.stop_reason, StopReason::MaxImfs);
        let cfg0 = DecompositionConfig { max_imfs: Some(0), ..Default::default() };
        let s = sig(vec![vec![1.0, 2.0, 1.0, 2.0, 1.0]], 1.0);
        assert_eq!(mvfif_decompose(&s, &cfg0).unwrap().num_imfs(), 0);
    }

    #[test]
    fn univariate_sinusoid_lands_in_first_imf() {
        let m = 1000;
        let x: Vec<f64> = (0..m).map(|t| (2.0 * PI * 20.0 * t as f64 / m as f64).sin()).collect();
        let s = sig(vec![x.clone()], 100.0);
        let cfg = DecompositionConfig { extension: Extension::None, ..Default::default() };
        let d = fif_decompose(&s, &cfg).unwrap();
        let e: f64 = x.iter().map(|v| v * v).sum();
        let e1: f64 = d.imfs[0].channel(0).iter().map(|v| v * v).sum();
        assert!(e1 / e >= 0.99, "{}", e1 / e);
    }

    #[test]
    fn fif_rejects_multichannel() {
        let s = MultivariateSignal::<f64>::zeros(2, 10, 1.0).unwrap();
        assert!(fif_decompose(&s, &DecompositionConfig::default()).is_err());
    }

    #[test]
    fn same_length_and_iterations_for_all_channels() {
        let x: Vec<f64> = (0..300).map(|t| (t as f64 * 0.4).sin()).collect();
        let y: Vec<f64> = (0..300).map(|t| (t as f64 * 0.05).sin()).collect();
        let d = mvfif_decompose(&sig(vec![x, y], 1.0), &DecompositionConfig::default()).unwrap();
        assert!(d.num_imfs() >= 1);
        assert_eq!(d.meta.len(), d.num_imfs());
        for w in d.meta.windows(2) {
            assert!(w[1].filter_length >= w[0].filter_length);
        }
    }
}

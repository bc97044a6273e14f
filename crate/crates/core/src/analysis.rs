//! Periodograms, IMF correlation, SNR and cross-channel alignment.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{MvfifError, Result};
use crate::scalar::Scalar;
use crate::signal::{norm, Decomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdCurve<T> {
    pub freqs: Vec<T>,
    pub power: Vec<T>,
    pub channel: usize,
    /// 1-based IMF number; `None` for raw signals or the trend.
    pub imf: Option<usize>,
}

impl<T: Scalar> PsdCurve<T> {
    /// Frequency of the largest bin.
    pub fn peak_frequency(&self) -> T {
        let mut best = 0;
        for (i, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = i;
            }
        }
        self.freqs[best]
    }

    pub fn nearest_bin(&self, freq: T) -> usize {
        let df = self.freqs[1] - self.freqs[0];
        let i = (freq / df).round().to_usize().unwrap_or(0);
        i.min(self.freqs.len() - 1)
    }

    /// Sum of power times bin width.
    pub fn total_power(&self) -> T {
        let df = self.freqs[1] - self.freqs[0];
        self.power.iter().copied().sum::<T>() * df
    }
}

/// One-sided periodogram `|X|^2 / (m fs)` with interior bins doubled.
pub fn psd<T: Scalar>(channel: &[T], sample_rate: T, window: Window) -> Result<PsdCurve<T>> {
    let m = channel.len();
    if m < 4 {
        return Err(MvfifError::TooShort { found: m, required: 4 });
    }
    let mf = T::from_usize_lossy(m);
    let (taper, gain): (Vec<T>, T) = match window {
        Window::None => (vec![T::one(); m], T::one()),
        Window::Hann => {
            let w: Vec<T> = (0..m)
                .map(|j| {
                    let x = T::of(2.0) * T::PI() * T::from_usize_lossy(j) / mf;
                    T::of(0.5) - T::of(0.5) * x.cos()
                })
                .collect();
            let g = w.iter().map(|&v| v * v).sum::<T>() / mf;
            (w, g)
        }
    };
    let mut buf: Vec<Complex<T>> = channel
        .iter()
        .zip(&taper)
        .map(|(&v, &w)| Complex::new(v * w, T::zero()))
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let bins = m / 2 + 1;
    let denom = mf * sample_rate * gain;
    let power = (0..bins)
        .map(|p| {
            let v = buf[p].norm_sqr() / denom;
            let nyquist = m.is_multiple_of(2) && p == m / 2;
            if p == 0 || nyquist {
                v
            } else {
                v * T::of(2.0)
            }
        })
        .collect();
    let freqs = (0..bins)
        .map(|p| T::from_usize_lossy(p) * sample_rate / mf)
        .collect();
    Ok(PsdCurve {
        freqs,
        power,
        channel: 0,
        imf: None,
    })
}

/// PSD of one channel of IMF `imf` (0-based) of a decomposition.
pub fn imf_psd<T: Scalar>(dec: &Decomposition<T>, imf: usize, channel: usize, window: Window) -> Result<PsdCurve<T>> {
    let sig = dec
        .imfs
        .get(imf)
        .ok_or_else(|| MvfifError::ShapeMismatch(format!("no IMF {}", imf + 1)))?;
    if channel >= sig.channels() {
        return Err(MvfifError::ShapeMismatch(format!("no channel {channel}")));
    }
    let mut c = psd(sig.channel(channel), sig.sample_rate(), window)?;
    c.channel = channel;
    c.imf = Some(imf + 1);
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePsd<T> {
    pub curve: PsdCurve<T>,
    pub used: usize,
    /// Realizations that lacked the requested IMF.
    pub skipped: usize,
}

/// Bin-wise mean PSD of IMF `imf` (0-based), channel `channel`, over an ensemble.
/// Each bin is summed in sorted order, so the result does not depend on the input order.
pub fn ensemble_psd<T: Scalar>(
    decompositions: &[Decomposition<T>],
    imf: usize,
    channel: usize,
    window: Window,
) -> Result<EnsemblePsd<T>> {
    if decompositions.is_empty() {
        return Err(MvfifError::EmptyEnsemble);
    }
    let curves = decompositions
        .iter()
        .filter(|d| d.num_imfs() > imf)
        .map(|d| imf_psd(d, imf, channel, window))
        .collect::<Result<Vec<_>>>()?;
    let skipped = decompositions.len() - curves.len();
    let first = curves.first().ok_or(MvfifError::EmptyEnsemble)?;
    if curves.iter().any(|c| c.freqs != first.freqs) {
        return Err(MvfifError::ShapeMismatch("realizations use different frequency grids".into()));
    }
    let count = T::from_usize_lossy(curves.len());
    let mut column = vec![T::zero(); curves.len()];
    let power = (0..first.power.len())
        .map(|b| {
            for (slot, c) in column.iter_mut().zip(&curves) {
                *slot = c.power[b];
            }
            column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            column.iter().copied().sum::<T>() / count
        })
        .collect();
    Ok(EnsemblePsd {
        curve: PsdCurve {
            freqs: first.freqs.clone(),
            power,
            channel,
            imf: Some(imf + 1),
        },
        used: curves.len(),
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix<T> {
    /// Row-major `k x k`.
    pub values: Vec<T>,
    pub k: usize,
    /// 1-based numbers of the IMFs in the matrix.
    pub imfs: Vec<usize>,
    /// 1-based numbers of IMFs left out as constant.
    pub excluded: Vec<usize>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.k + j]
    }

    /// Mean of `|c_ij|` over `i != j`.
    pub fn mean_abs_offdiag(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.k {
            for j in 0..self.k {
                if i != j {
                    s += self.get(i, j).abs();
                }
            }
        }
        s / T::from_usize_lossy(self.k * (self.k - 1))
    }
}

/// Population Pearson correlation of two equal-length series.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() || a.is_empty() {
        return Err(MvfifError::ShapeMismatch(format!("lengths {} and {}", a.len(), b.len())));
    }
    let n = T::from_usize_lossy(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == T::zero() || sbb == T::zero() {
        return Err(MvfifError::DegenerateImf);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).max(-T::one()).min(T::one()))
}

fn std_dev<T: Scalar>(x: &[T]) -> T {
    let n = T::from_usize_lossy(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    (x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n).sqrt()
}

/// Correlation coefficients between the IMFs of one channel.
pub fn correlation_matrix<T: Scalar>(dec: &Decomposition<T>, channel: usize) -> Result<CorrelationMatrix<T>> {
    if channel >= dec.channels() {
        return Err(MvfifError::ShapeMismatch(format!("no channel {channel}")));
    }
    let input = dec.reconstruct();
    let floor = T::of(1e-14) * norm(input.channel(channel));
    let (mut kept, mut excluded) = (Vec::new(), Vec::new());
    for (k, imf) in dec.imfs.iter().enumerate() {
        if std_dev(imf.channel(channel)) > floor {
            kept.push(k);
        } else {
            excluded.push(k + 1);
        }
    }
    if kept.len() < 2 {
        return Err(MvfifError::DegenerateImf);
    }
    let k = kept.len();
    let mut values = vec![T::zero(); k * k];
    for i in 0..k {
        values[i * k + i] = T::one();
        for j in i + 1..k {
            let c = pearson(dec.imfs[kept[i]].channel(channel), dec.imfs[kept[j]].channel(channel))?;
            values[i * k + j] = c;
            values[j * k + i] = c;
        }
    }
    Ok(CorrelationMatrix {
        values,
        k,
        imfs: kept.iter().map(|&i| i + 1).collect(),
        excluded,
    })
}

/// `20 log10(||clean|| / ||noise||)`.
pub fn snr<T: Scalar>(clean: &[T], noise: &[T]) -> Result<T> {
    if clean.len() != noise.len() {
        return Err(MvfifError::ShapeMismatch(format!("lengths {} and {}", clean.len(), noise.len())));
    }
    let nn = norm(noise);
    if nn == T::zero() {
        return Err(MvfifError::ZeroNoise);
    }
    Ok(T::of(20.0) * (norm(clean) / nn).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAlignment<T> {
    pub channel: usize,
    /// 1-based IMF holding the most power at the target bin.
    pub imf: Option<usize>,
    /// Dominant frequency of that IMF.
    pub peak_frequency: Option<T>,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEntry<T> {
    pub target: T,
    pub channels: Vec<ChannelAlignment<T>>,
    /// All channels report the same IMF.
    pub aligned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport<T> {
    pub tolerance: T,
    pub entries: Vec<AlignmentEntry<T>>,
}

/// Locates each target frequency in the IMFs of every channel.
pub fn alignment_report<T: Scalar>(dec: &Decomposition<T>, targets: &[T], tolerance: T) -> Result<AlignmentReport<T>> {
    let per_channel: Vec<Decomposition<T>> = vec![dec.clone()];
    let lookup = |channel: usize| (0usize, channel);
    build_alignment(&per_channel, dec.channels(), lookup, targets, tolerance)
}

/// Alignment across independent single-channel decompositions, one per channel.
pub fn alignment_report_channelwise<T: Scalar>(
    decs: &[Decomposition<T>],
    targets: &[T],
    tolerance: T,
) -> Result<AlignmentReport<T>> {
    build_alignment(decs, decs.len(), |c| (c, 0), targets, tolerance)
}

fn build_alignment<T: Scalar>(
    decs: &[Decomposition<T>],
    channels: usize,
    lookup: impl Fn(usize) -> (usize, usize),
    targets: &[T],
    tolerance: T,
) -> Result<AlignmentReport<T>> {
    let mut curves: Vec<Vec<PsdCurve<T>>> = Vec::with_capacity(channels);
    for c in 0..channels {
        let (d, ch) = lookup(c);
        let dec = &decs[d];
        curves.push(
            (0..dec.num_imfs())
                .map(|k| imf_psd(dec, k, ch, Window::None))
                .collect::<Result<_>>()?,
        );
    }
    let entries = targets
        .iter()
        .map(|&target| {
            let chans: Vec<ChannelAlignment<T>> = curves
                .iter()
                .enumerate()
                .map(|(c, list)| {
                    let mut best: Option<(usize, T)> = None;
                    for (k, curve) in list.iter().enumerate() {
                        let p = curve.power[curve.nearest_bin(target)];
                        if best.is_none_or(|(_, bp)| p > bp) {
                            best = Some((k, p));
                        }
                    }
                    let peak = best.map(|(k, _)| list[k].peak_frequency());
                    ChannelAlignment {
                        channel: c,
                        imf: best.map(|(k, _)| k + 1),
                        peak_frequency: peak,
                        within_tolerance: peak.is_some_and(|f| (f - target).abs() <= tolerance),
                    }
                })
                .collect();
            let aligned = chans.iter().all(|c| c.imf.is_some() && c.imf == chans[0].imf);
            AlignmentEntry {
                target,
                channels: chans,
                aligned,
            }
        })
        .collect();
    Ok(AlignmentReport { tolerance, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{DecompositionConfig, Method, MultivariateSignal, StopReason};
    use std::f64::consts::PI;

    fn dec_from(imfs: Vec<Vec<f64>>, fs: f64) -> Decomposition<f64> {
        let m = imfs[0].len();
        Decomposition {
            imfs: imfs
                .into_iter()
                .map(|x| MultivariateSignal::from_rows(vec![x], fs).unwrap())
                .collect(),
            trend: MultivariateSignal::zeros(1, m, fs).unwrap(),
            meta: vec![],
            config: DecompositionConfig::default(),
            method: Method::Fif,
            ext_len: 0,
            stop_reason: StopReason::Trend,
        }
    }

    #[test]
    fn tone_concentrates_in_one_bin() {
        let m = 256;
        let x: Vec<f64> = (0..m).map(|t| (2.0 * PI * 10.0 * t as f64 / m as f64).sin()).collect();
        let c = psd(&x, 1.0, Window::None).unwrap();
        let total: f64 = c.power.iter().sum();
        assert!(c.power[10] / total >= 0.999);
        assert_eq!(c.freqs.len(), 129);
        assert!((c.total_power() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_psd() {
        let c = psd(&[0.0f64; 16], 2.0, Window::None).unwrap();
        assert!(c.power.iter().all(|&p| p == 0.0));
        assert_eq!(*c.freqs.last().unwrap(), 1.0);
    }

    #[test]
    fn odd_length_parseval() {
        let x: Vec<f64> = (0..33).map(|t| ((t * 7 % 11) as f64 - 5.0) * 0.3).collect();
        let c = psd(&x, 3.0, Window::None).unwrap();
        let ms: f64 = x.iter().map(|v| v * v).sum::<f64>() / 33.0;
        assert!((c.total_power() - ms).abs() < 1e-12 * ms);
    }

    #[test]
    fn hann_window_keeps_scale_for_noise_like_input() {
        let x: Vec<f64> = (0..512).map(|t| ((t * 7919 % 97) as f64 - 48.0) / 30.0).collect();
        let c = psd(&x, 1.0, Window::Hann).unwrap();
        let ms: f64 = x.iter().map(|v| v * v).sum::<f64>() / 512.0;
        assert!((c.total_power() / ms - 1.0).abs() < 0.2);
    }

    #[test]
    fn too_short_psd() {
        assert!(matches!(psd(&[1.0f64; 3], 1.0, Window::None), Err(MvfifError::TooShort { .. })));
    }

    #[test]
    fn quadrature_pair_is_uncorrelated() {
        let m = 400;
        let s: Vec<f64> = (0..m).map(|t| (2.0 * PI * 4.0 * t as f64 / m as f64).sin()).collect();
        let c: Vec<f64> = (0..m).map(|t| (2.0 * PI * 4.0 * t as f64 / m as f64).cos()).collect();
        let d = dec_from(vec![s.clone(), c, s], 1.0);
        let cm = correlation_matrix(&d, 0).unwrap();
        assert!(cm.get(0, 1).abs() < 1e-10);
        assert!((cm.get(0, 2) - 1.0).abs() < 1e-12);
        assert_eq!(cm.get(1, 1), 1.0);
    }

    #[test]
    fn constant_imfs_are_excluded() {
        let d = dec_from(vec![vec![1.0; 8], vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0], vec![2.0; 8]], 1.0);
        assert_eq!(correlation_matrix(&d, 0), Err(MvfifError::DegenerateImf));
    }

    #[test]
    fn snr_examples() {
        let a = [1.0f64, 2.0, 3.0];
        assert!(snr(&a, &[3.0, 2.0, 1.0]).unwrap().abs() < 1e-12);
        assert!((snr(&a, &[10.0, 20.0, 30.0]).unwrap() + 20.0).abs() < 1e-12);
        assert_eq!(snr(&a, &[0.0; 3]), Err(MvfifError::ZeroNoise));
    }

    #[test]
    fn ensemble_of_two_is_the_mean() {
        let a = dec_from(vec![vec![1.0, 0.0, -1.0, 0.5, 0.2, 0.0]], 1.0);
        let b = dec_from(vec![vec![0.0, 2.0, 0.0, -1.0, 0.0, 0.3]], 1.0);
        let e = ensemble_psd(&[a.clone(), b.clone()], 0, 0, Window::None).unwrap();
        let pa = imf_psd(&a, 0, 0, Window::None).unwrap();
        let pb = imf_psd(&b, 0, 0, Window::None).unwrap();
        for i in 0..pa.power.len() {
            assert!((e.curve.power[i] - 0.5 * (pa.power[i] + pb.power[i])).abs() < 1e-15);
        }
        assert_eq!(ensemble_psd::<f64>(&[], 0, 0, Window::None), Err(MvfifError::EmptyEnsemble));
        let skip = ensemble_psd(&[a, b], 1, 0, Window::None);
        assert_eq!(skip, Err(MvfifError::EmptyEnsemble));
    }

    #[test]
    fn single_channel_is_aligned() {
        let m = 200;
        let x: Vec<f64> = (0..m).map(|t| (2.0 * PI * 2.0 * t as f64 / 100.0).sin()).collect();
        let d = dec_from(vec![x], 100.0);
        let r = alignment_report(&d, &[2.0], 0.25).unwrap();
        assert!(r.entries[0].aligned);
        assert_eq!(r.entries[0].channels[0].imf, Some(1));
        assert!(r.entries[0].channels[0].within_tolerance);
    }
}

use mvfif::analysis::{alignment_report, psd, Window};
use mvfif::forge::{gen_bivariate_ivb, gen_wgn_ensemble, ive_components, ivb_components, normal_stream, time_grid, GeneratorSpec};
use mvfif::io::{read_decomposition, write_decomposition, Layout};
use mvfif::oracle::{dense_circulant, dense_oracle_imf};
use mvfif::rotation::filter_length_univariate;
use mvfif::*;
use nalgebra::DMatrix;

/// Unevaluated sum `hi + lo` with about 106 bits of precision.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

fn fast_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd(s, b - (s - a))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.0, o.0);
        fast_two_sum(s.0, s.1 + self.1 + o.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        fast_two_sum(p, e + self.0 * o.1 + self.1 * o.0)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.add(o.mul(Dd(-q1, 0.0)));
        let q2 = r.0 / o.0;
        fast_two_sum(q1, q2)
    }

    fn sqrt(self) -> Dd {
        let s = self.0.sqrt();
        let r = self.add(Dd(s, 0.0).mul(Dd(-s, 0.0)));
        fast_two_sum(s, r.0 / (2.0 * s))
    }
}

fn dd_dot(a: &[f64], b: &[f64]) -> Dd {
    a.iter().zip(b).fold(Dd(0.0, 0.0), |acc, (&x, &y)| acc.add(Dd(x, 0.0).mul(Dd(y, 0.0))))
}

fn random_signal(n: usize, m: usize, key: u64) -> Signal64 {
    let rows = (0..n).map(|c| normal_stream(&[7000, key, c as u64], m)).collect();
    Signal64::from_rows(rows, 1.0).unwrap()
}

#[test]
fn theta_matches_extended_precision_oracle() {
    let s = random_signal(4, 50, 1);
    let theta = compute_theta(&s).unwrap();
    assert_eq!(theta.values.len(), 49);
    for t in 1..50 {
        let (a, b) = (s.column(t), s.column(t - 1));
        let cos = dd_dot(&a, &b).div(dd_dot(&a, &a).mul(dd_dot(&b, &b)).sqrt());
        let expect = cos.0.clamp(-1.0, 1.0).acos();
        assert!((theta.values[t - 1] - expect).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn triangle_eigenvalues_match_dense_eigensolver() {
    let k: Kernel64 = build_kernel(3, FilterShape::Triangle).unwrap();
    let w = dense_circulant(&k, 16).unwrap();
    let dense = DMatrix::from_fn(16, 16, |r, c| w[r][c]);
    let mut expect: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
    let mut got = eigenvalues(&k, 16).unwrap().0;
    expect.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn inner_loop_matches_dense_operator() {
    for (key, m) in [(2u64, 16usize), (3, 48), (4, 64)] {
        let s = random_signal(3, m, key);
        let k = build_kernel(5, FilterShape::Bump).unwrap();
        let out = inner_loop(&s, &k, &StopRule::Absolute(1e-6), 200).unwrap();
        let dense = dense_oracle_imf(&s, &k, out.iterations).unwrap();
        for (a, b) in out.imf.as_slice().iter().zip(dense.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn tone_length_from_extrema() {
    let t = time_grid(1000, 0.0, 10.0);
    let x: Vec<f64> = t.iter().map(|v| (4.0 * std::f64::consts::PI * v).sin()).collect();
    assert_eq!(find_extrema(&x).count(), 40);
    assert_eq!(filter_length_univariate(&x, 1.6).unwrap(), 80);
}

#[test]
fn reflect_and_plain_runs_agree_on_periodic_cosine() {
    let m = 1000;
    let x: Vec<f64> = (0..m)
        .map(|t| (2.0 * std::f64::consts::PI * (20 * t) as f64 / m as f64).cos())
        .collect();
    let s = Signal64::from_rows(vec![x], 1.0).unwrap();
    let plain = fif_decompose(&s, &Config64 { extension: Extension::None, ..Default::default() }).unwrap();
    let refl = fif_decompose(&s, &Config64::default()).unwrap();
    assert!(refl.ext_len > 0);
    let (a, b) = (plain.imfs[0].as_slice(), refl.imfs[0].as_slice());
    let rms = (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / m as f64).sqrt();
    assert!(rms < 1e-2, "rms {rms}");
    assert!(refl.reconstruction_error(&s).unwrap() < 1e-12);
}

#[test]
fn decomposition_is_not_additive() {
    let s: Signal64 = gen_bivariate_ivb(2000, 0.0, 10.0).unwrap();
    let cfg = Config64::default();
    let p = s.select_channel(0);
    let q = s.select_channel(1);
    let pq = p.add(&q).unwrap();
    let dp = fif_decompose(&p, &cfg).unwrap();
    let dq = fif_decompose(&q, &cfg).unwrap();
    let dpq = fif_decompose(&pq, &cfg).unwrap();
    let (a, b, c) = (dp.imfs[0].as_slice(), dq.imfs[0].as_slice(), dpq.imfs[0].as_slice());
    let scale = c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let worst = (0..c.len()).map(|j| (c[j] - a[j] - b[j]).abs()).fold(0.0, f64::max);
    assert!(worst / scale > 1e-3, "discrepancy {}", worst / scale);
}

#[test]
fn wgn_sample_moments() {
    let ens: Vec<Signal64> = gen_wgn_ensemble(&GeneratorSpec::wgn(4, 1000, 100, 2024)).unwrap();
    let good = ens
        .iter()
        .filter(|s| {
            s.rows().all(|x| {
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
                mean.abs() <= 0.15 && (0.85..=1.15).contains(&var)
            })
        })
        .count();
    assert!(good >= 95, "{good} of 100");
}

#[test]
fn ivb_regression_values() {
    let s: Signal64 = gen_bivariate_ivb(2000, 0.0, 10.0).unwrap();
    assert_eq!(s.get(0, 0), 2.0);
    assert_eq!(s.get(1, 0), 0.0);
    assert!((s.get(0, 200) - 2.3090169943749475).abs() < 1e-14);
}

fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let var: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    cov / var
}

#[test]
fn trends_have_stated_slopes() {
    let t = time_grid(2000, 0.0, 10.0);
    let [a, b] = ivb_components(&t);
    assert!((slope(&t, &a[0]) - 0.5).abs() < 1e-6);
    assert!((slope(&t, &b[0]) + 0.2).abs() < 1e-6);
    let t = time_grid(1000, 0.0, 20.0);
    let [a, b] = ive_components(&t);
    let sum: Vec<f64> = (0..t.len()).map(|j| a[0][j] + a[1][j] + a[2][j] - a[1][j] - a[2][j]).collect();
    assert!((slope(&t, &sum) - 0.5).abs() < 1e-6);
    assert!((slope(&t, &b[0]) + 0.2).abs() < 1e-6);
}

#[test]
fn white_noise_parseval() {
    for c in 0..4 {
        let x = normal_stream(&[7001, c], 1000 + c as usize);
        let p = psd(&x, 3.0, Window::None).unwrap();
        let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((p.total_power() - ms).abs() / ms < 1e-8);
    }
}

#[test]
fn single_precision_pipeline() {
    let s: Signal32 = gen_bivariate_ivb(2000, 0.0, 10.0).unwrap();
    let d = mvfif_decompose(&s, &Config32::default()).unwrap();
    assert!(d.num_imfs() >= 2);
    assert!(d.reconstruction_error(&s).unwrap() < 1e-5);
    let report = alignment_report(&d, &[2.0f32], 0.25).unwrap();
    assert!(report.entries[0].aligned);
}

#[test]
fn decomposition_directory_round_trip() {
    let s: Signal64 = gen_bivariate_ivb(400, 0.0, 2.0).unwrap();
    let d = mvfif_decompose(&s, &Config64::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_decomposition(dir.path(), &d, Layout::Columns).unwrap();
    let back: Decomposition64 = read_decomposition(dir.path()).unwrap();
    assert_eq!(back, d);
}

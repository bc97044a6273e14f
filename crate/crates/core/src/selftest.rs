//! Desk-scale invariant checks behind the `selftest` command.

use crate::analysis::{correlation_matrix, psd, Window};
use crate::decompose::{inner_loop, mvfif_decompose};
use crate::error::Result;
use crate::filter::{build_kernel, eigenvalues, raw_spectrum, FilterShape};
use crate::forge::{gen_bivariate_ivb, gen_wgn_ensemble, normal_stream, GeneratorSpec};
use crate::oracle::dense_oracle_imf;
use crate::rotation::compute_theta;
use crate::signal::{DecompositionConfig, MultivariateSignal, StopRule};

/// Deliberate defects used to prove that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    KernelAsymmetry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<24} {:<4} {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
    }
}

fn random_signal(n: usize, m: usize, key: u64) -> Result<MultivariateSignal<f64>> {
    let rows = (0..n).map(|c| normal_stream(&[99, key, c as u64], m)).collect();
    MultivariateSignal::from_rows(rows, 1.0)
}

pub fn run_selftest(fault: Option<Fault>) -> SelftestReport {
    let shapes = [FilterShape::Bump, FilterShape::Triangle];
    let mut checks = Vec::new();

    checks.push(check("kernel_window", (|| {
        let mut worst = 0.0f64;
        for shape in shapes {
            for l in 1..=40 {
                let k = build_kernel::<f64>(l, shape)?;
                let w = k.weights();
                worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
                for i in 0..w.len() {
                    if w[i] < 0.0 {
                        return Ok((false, format!("negative weight at L={l}")));
                    }
                    worst = worst.max((w[i] - w[w.len() - 1 - i]).abs());
                }
            }
        }
        Ok((worst < 1e-12, format!("max deviation {worst:.3e}")))
    })()));

    checks.push(check("eigen_symmetry", (|| {
        let mut worst = 0.0f64;
        for shape in shapes {
            for l in 1..=30 {
                let mut k = build_kernel::<f64>(l, shape)?;
                if fault == Some(Fault::KernelAsymmetry) {
                    k = k.with_asymmetry(1e-4);
                }
                for c in raw_spectrum(&k, 64)? {
                    worst = worst.max(c.im.abs());
                }
            }
        }
        Ok((worst < 1e-10, format!("max imaginary part {worst:.3e}")))
    })()));

    checks.push(check("eigen_bounds", (|| {
        let (mut lo, mut hi, mut dc) = (0.0f64, 0.0f64, 0.0f64);
        for shape in shapes {
            for l in 1..=50 {
                let k = build_kernel::<f64>(l, shape)?;
                let spec = raw_spectrum(&k, 1000)?;
                dc = dc.max((spec[0].re - 1.0).abs());
                for c in spec {
                    lo = lo.min(c.re);
                    hi = hi.max(c.re);
                }
            }
        }
        let ok = lo >= -1e-10 && hi <= 1.0 + 1e-10 && dc <= 1e-12;
        Ok((ok, format!("min {lo:.3e} max-1 {:.3e} |l0-1| {dc:.3e}", hi - 1.0)))
    })()));

    checks.push(check("oracle_equivalence", (|| {
        let mut worst = 0.0f64;
        for (i, &m) in [16usize, 48, 64].iter().enumerate() {
            let s = random_signal(3, m, i as u64)?;
            let k = build_kernel(5, FilterShape::Bump)?;
            let out = inner_loop(&s, &k, &StopRule::Absolute(1e-6), 200)?;
            let dense = dense_oracle_imf(&s, &k, out.iterations)?;
            for (a, b) in out.imf.as_slice().iter().zip(dense.as_slice()) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok((worst < 1e-9, format!("max difference {worst:.3e}")))
    })()));

    checks.push(check("fourier_scaling", (|| {
        let m = 64;
        let k = build_kernel(6, FilterShape::Bump)?;
        let lam = eigenvalues(&k, m)?.0;
        let mut worst = 0.0f64;
        for p in [1usize, 5, 17] {
            let ang: Vec<f64> = (0..m).map(|t| 2.0 * std::f64::consts::PI * (p * t) as f64 / m as f64).collect();
            let s = MultivariateSignal::from_rows(
                vec![ang.iter().map(|a| a.cos()).collect(), ang.iter().map(|a| a.sin()).collect()],
                1.0,
            )?;
            let out = inner_loop(&s, &k, &StopRule::Absolute(1e-300), 1)?;
            for (a, b) in out.imf.as_slice().iter().zip(s.as_slice()) {
                worst = worst.max((a - (1.0 - lam[p]) * b).abs());
            }
        }
        Ok((worst < 1e-12, format!("max difference {worst:.3e}")))
    })()));

    let wgn: Vec<MultivariateSignal<f64>> =
        gen_wgn_ensemble(&GeneratorSpec::wgn(4, 500, 3, 11)).unwrap_or_default();
    let config = DecompositionConfig::default();

    checks.push(check("monotone_stopping", (|| {
        let (mut loops, mut bad) = (0, 0);
        for s in &wgn {
            for l in [3usize, 9, 27] {
                let k = build_kernel(l, FilterShape::Bump)?;
                let out = inner_loop(s, &k, &StopRule::Absolute(1e-8), 200)?;
                loops += 1;
                bad += out.sc_trace.windows(2).filter(|w| w[1] > w[0]).count();
            }
        }
        Ok((bad == 0 && loops > 0, format!("{loops} loops, {bad} increases")))
    })()));

    checks.push(check("reconstruction", (|| {
        let mut worst = 0.0f64;
        let ivb = gen_bivariate_ivb::<f64>(2000, 0.0, 10.0)?;
        for s in wgn.iter().chain(std::iter::once(&ivb)) {
            let d = mvfif_decompose(s, &config)?;
            worst = worst.max(d.reconstruction_error(s)?);
        }
        Ok((worst < 1e-10 && !wgn.is_empty(), format!("max relative error {worst:.3e}")))
    })()));

    checks.push(check("theta_range", (|| {
        let mut ok = true;
        for s in &wgn {
            ok &= compute_theta(s)?.values.iter().all(|v| (0.0..=std::f64::consts::PI).contains(v));
        }
        Ok((ok && !wgn.is_empty(), "all angles in [0, pi]".into()))
    })()));

    checks.push(check("psd_parseval", (|| {
        let mut worst = 0.0f64;
        for s in &wgn {
            for x in s.rows() {
                let c = psd(x, 1.0, Window::None)?;
                let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
                worst = worst.max((c.total_power() - ms).abs() / ms);
            }
        }
        Ok((worst < 1e-8, format!("max relative error {worst:.3e}")))
    })()));

    checks.push(check("correlation_matrix", (|| {
        let mut worst = 0.0f64;
        for s in &wgn {
            let d = mvfif_decompose(s, &config)?;
            for c in 0..d.channels() {
                let cm = correlation_matrix(&d, c)?;
                for i in 0..cm.k {
                    worst = worst.max((cm.get(i, i) - 1.0).abs());
                    for j in 0..cm.k {
                        worst = worst.max((cm.get(i, j) - cm.get(j, i)).abs());
                        if cm.get(i, j).abs() > 1.0 {
                            return Ok((false, "entry outside [-1, 1]".into()));
                        }
                    }
                }
            }
        }
        Ok((worst < 1e-12 && !wgn.is_empty(), format!("max deviation {worst:.3e}")))
    })()));

    checks.push(check("generator_determinism", (|| {
        let again: Vec<MultivariateSignal<f64>> = gen_wgn_ensemble(&GeneratorSpec::wgn(4, 500, 3, 11))?;
        Ok((again == wgn, "regenerated ensemble is identical".into()))
    })()));

    SelftestReport { checks }
}

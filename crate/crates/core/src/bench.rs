//! Wall-clock timing of decompositions over wGn inputs.

use std::time::Instant;

use serde::Serialize;

use crate::decompose::mvfif_decompose;
use crate::error::Result;
use crate::forge::{gen_wgn_ensemble, GeneratorSpec};
use crate::signal::{DecompositionConfig, MultivariateSignal};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub realizations: usize,
    pub mean_imfs: f64,
    pub median_seconds: f64,
    /// Time ratio against the previous size in the same series, with its allowed maximum.
    pub ratio: Option<f64>,
    pub limit: Option<f64>,
}

impl BenchRow {
    pub fn passed(&self) -> bool {
        match (self.ratio, self.limit) {
            (Some(r), Some(l)) => r <= l,
            _ => true,
        }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Median decomposition time of `signals`, run one after another.
pub fn time_decompositions(signals: &[MultivariateSignal<f64>], config: &DecompositionConfig<f64>) -> Result<(f64, f64)> {
    let mut times = Vec::with_capacity(signals.len());
    let mut imfs = 0usize;
    for s in signals {
        let start = Instant::now();
        let d = mvfif_decompose(s, config)?;
        times.push(start.elapsed().as_secs_f64());
        imfs += d.num_imfs();
    }
    Ok((median(&mut times), imfs as f64 / signals.len().max(1) as f64))
}

pub fn bench_case(n: usize, m: usize, realizations: usize, seed: u64, config: &DecompositionConfig<f64>) -> Result<BenchRow> {
    let signals = gen_wgn_ensemble::<f64>(&GeneratorSpec::wgn(n, m, realizations, seed))?;
    // one untimed run so planner setup and page faults stay out of the figures
    if let Some(s) = signals.first() {
        mvfif_decompose(s, config)?;
    }
    let (median_seconds, mean_imfs) = time_decompositions(&signals, config)?;
    Ok(BenchRow { n, m, realizations, mean_imfs, median_seconds, ratio: None, limit: None })
}

/// Fills `ratio` and `limit` against the previous row that differs in exactly one of `n`, `m`.
/// Doubling `m` may cost at most 2.5x; growing `n` at most 1.5x its ratio.
pub fn annotate_scaling(rows: &mut [BenchRow]) {
    for i in 0..rows.len() {
        let prev = (0..i).rev().find(|&j| {
            (rows[j].n == rows[i].n && rows[j].m < rows[i].m) || (rows[j].m == rows[i].m && rows[j].n < rows[i].n)
        });
        if let Some(j) = prev {
            let ratio = rows[i].median_seconds / rows[j].median_seconds;
            let limit = if rows[j].n == rows[i].n {
                2.5f64.powf((rows[i].m as f64 / rows[j].m as f64).log2())
            } else {
                1.5 * rows[i].n as f64 / rows[j].n as f64
            };
            rows[i].ratio = Some(ratio);
            rows[i].limit = Some(limit);
        }
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,m,realizations,mean_imfs,median_seconds,ratio,limit,pass\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.2},{:.6},{},{},{}\n",
            r.n,
            r.m,
            r.realizations,
            r.mean_imfs,
            r.median_seconds,
            opt(r.ratio),
            opt(r.limit),
            r.passed()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, m: usize, t: f64) -> BenchRow {
        BenchRow { n, m, realizations: 1, mean_imfs: 1.0, median_seconds: t, ratio: None, limit: None }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn scaling_annotations() {
        let mut rows = vec![row(4, 100, 1.0), row(4, 200, 2.4), row(4, 400, 6.5), row(8, 400, 10.0)];
        annotate_scaling(&mut rows);
        assert_eq!(rows[0].ratio, None);
        assert!(rows[1].passed());
        assert!(!rows[2].passed());
        assert_eq!(rows[3].limit, Some(3.0));
    }

    #[test]
    fn tiny_run_gives_one_row() {
        let cfg = DecompositionConfig { max_imfs: Some(2), ..Default::default() };
        let r = bench_case(2, 64, 1, 0, &cfg).unwrap();
        let csv = to_csv(&[r]);
        assert_eq!(csv.lines().count(), 2);
    }
}

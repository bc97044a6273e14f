use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mvfif::analysis::{
    alignment_report, correlation_matrix, ensemble_psd, imf_psd, snr, Window,
};
use mvfif::bench::{annotate_scaling, bench_case, to_csv};
use mvfif::forge::{gen_bivariate_ive, gen_bivariate_ivb, gen_wgn_ensemble, GeneratorKind, GeneratorSpec};
use mvfif::io::{read_csv, read_decomposition, write_csv, write_decomposition, Layout};
use mvfif::selftest::{run_selftest, Fault};
use mvfif::{fif_decompose, mvfif_decompose, Config64, Decomposition64, Extension, FilterShape, StopRule};

const THREADS_ENV: &str = "MVFIF_THREADS";

#[derive(Parser)]
#[command(name = "mvfif", version, about = "Multivariate Fast Iterative Filtering toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multivariate decomposition of a CSV signal.
    Decompose(DecomposeArgs),
    /// Univariate decomposition of a single-column CSV signal.
    Fif(DecomposeArgs),
    /// Write synthetic test signals.
    Generate(GenerateArgs),
    /// Spectral and statistical reports on decomposition directories.
    Analyze(AnalyzeArgs),
    /// Run the built-in invariant checks.
    Selftest(SelftestArgs),
    /// Time decompositions of white noise.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    RelativeEnergy,
    RelativeInput,
    Absolute,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtensionArg {
    None,
    Reflect,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Bump,
    Triangle,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1.6)]
    xi: f64,
    /// Threshold of the stopping rule.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, value_enum, default_value = "relative-energy")]
    stop_rule: RuleArg,
    #[arg(long, default_value_t = 200)]
    max_inner: usize,
    #[arg(long)]
    max_imfs: Option<usize>,
    #[arg(long, value_enum, default_value = "reflect")]
    extension: ExtensionArg,
    /// Samples added on each side; derived from the first filter length when omitted.
    #[arg(long)]
    ext_len: Option<usize>,
    #[arg(long, value_enum, default_value = "bump")]
    filter_shape: ShapeArg,
    #[arg(long = "no-monotone-L", alias = "no-monotone-l")]
    no_monotone_l: bool,
    /// Rows are channels instead of columns.
    #[arg(long)]
    transpose: bool,
    #[arg(long, default_value_t = 1.0)]
    sample_rate: f64,
}

impl DecomposeArgs {
    fn config(&self) -> Config64 {
        Config64 {
            xi: self.xi,
            stop: match self.stop_rule {
                RuleArg::RelativeEnergy => StopRule::RelativeEnergy(self.delta),
                RuleArg::RelativeInput => StopRule::RelativeToInput(self.delta),
                RuleArg::Absolute => StopRule::Absolute(self.delta),
            },
            max_inner: self.max_inner,
            max_imfs: self.max_imfs,
            extension: match self.extension {
                ExtensionArg::None => Extension::None,
                ExtensionArg::Reflect => Extension::Reflect,
            },
            ext_len: self.ext_len,
            filter_shape: match self.filter_shape {
                ShapeArg::Bump => FilterShape::Bump,
                ShapeArg::Triangle => FilterShape::Triangle,
            },
            monotone_l: !self.no_monotone_l,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Wgn,
    Ivb,
    Ive,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 4)]
    channels: usize,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    /// Noise standard deviations per channel.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long)]
    transpose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Psd,
    Corr,
    Align,
    Snr,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    None,
    Hann,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    kind: ReportArg,
    /// Decomposition directory.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Glob matching several decomposition directories.
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    output: PathBuf,
    /// Restrict to one channel (0-based).
    #[arg(long)]
    channel: Option<usize>,
    /// Target frequencies in Hz.
    #[arg(long = "freq", value_delimiter = ',')]
    freqs: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    tol: f64,
    #[arg(long, value_enum, default_value = "none")]
    window: WindowArg,
    #[arg(long)]
    clean: Option<PathBuf>,
    #[arg(long)]
    noisy: Option<PathBuf>,
    #[arg(long)]
    transpose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    KernelAsymmetry,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,16,64")]
    channels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    samples: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    realizations: usize,
    #[arg(long, default_value_t = 8)]
    max_imfs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Builds `output` in a sibling temporary directory and renames it into place.
fn write_atomically(output: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if output.exists() {
        let empty = output.is_dir() && fs::read_dir(output)?.next().is_none();
        if !empty {
            bail!("output {} already exists and is not an empty directory", output.display());
        }
    }
    fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    let tmp = tempfile::Builder::new().prefix(".mvfif-").tempdir_in(&parent)?;
    fill(tmp.path())?;
    if output.exists() {
        fs::remove_dir(output)?;
    }
    let path = tmp.keep();
    fs::rename(&path, output).with_context(|| format!("moving results to {}", output.display()))?;
    Ok(())
}

fn run_decompose(args: &DecomposeArgs, univariate: bool) -> Result<ExitCode> {
    let layout = Layout::from_transpose(args.transpose);
    let config = args.config();
    config.validate()?;
    let signal = read_csv(&args.input, layout, args.sample_rate)
        .with_context(|| format!("reading {}", args.input.display()))?;
    if univariate && signal.channels() != 1 {
        bail!("fif expects a single channel, {} has {}", args.input.display(), signal.channels());
    }
    let dec = if univariate {
        fif_decompose(&signal, &config)?
    } else {
        mvfif_decompose(&signal, &config)?
    };
    write_atomically(&args.output, |dir| Ok(write_decomposition(dir, &dec, layout)?))?;
    log::info!("{} IMFs written to {}", dec.num_imfs(), args.output.display());
    if dec.converged() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: inner loop reached --max-inner for at least one IMF");
        Ok(ExitCode::from(2))
    }
}

fn run_generate(args: &GenerateArgs) -> Result<()> {
    let layout = Layout::from_transpose(args.transpose);
    let mut spec = match args.kind {
        KindArg::Wgn => GeneratorSpec::wgn(args.channels, args.samples.unwrap_or(1000), args.realizations, args.seed),
        KindArg::Ivb => GeneratorSpec::ivb(),
        KindArg::Ive => GeneratorSpec::ive(args.seed),
    };
    if let Some(m) = args.samples {
        spec.m = m;
    }
    if let Some(t0) = args.t0 {
        spec.t0 = t0;
    }
    if let Some(t1) = args.t1 {
        spec.t1 = t1;
    } else if spec.kind == GeneratorKind::WgnEnsemble {
        spec.t1 = spec.t0 + spec.m as f64;
    }
    if let Some(s) = &args.sigmas {
        spec.sigmas = s.clone();
    }
    spec.validate()?;
    let files = match spec.kind {
        GeneratorKind::WgnEnsemble => gen_wgn_ensemble::<f64>(&spec)?
            .into_iter()
            .enumerate()
            .map(|(r, s)| (format!("realization_{:03}.csv", r + 1), s))
            .collect(),
        GeneratorKind::BivariateIvb => vec![("signal.csv".to_string(), gen_bivariate_ivb(spec.m, spec.t0, spec.t1)?)],
        GeneratorKind::BivariateIve => {
            let [a, b] = spec.sigmas[..] else {
                bail!("ive needs exactly two noise levels");
            };
            let pair = gen_bivariate_ive(spec.m, spec.t0, spec.t1, spec.seed, [a, b])?;
            vec![("noisy.csv".to_string(), pair.noisy), ("clean.csv".to_string(), pair.clean)]
        }
    };
    write_atomically(&args.output, |dir| {
        for (name, s) in &files {
            write_csv(&dir.join(name), s, layout)?;
        }
        let mut json = serde_json::to_string_pretty(&spec)?;
        json.push('\n');
        fs::write(dir.join("spec.json"), json)?;
        Ok(())
    })
}

fn load_ensemble(args: &AnalyzeArgs) -> Result<Vec<Decomposition64>> {
    if let Some(pattern) = &args.ensemble {
        let mut dirs: Vec<PathBuf> = glob::glob(pattern)
            .context("invalid --ensemble pattern")?
            .filter_map(|p| p.ok())
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        if dirs.is_empty() {
            bail!(mvfif::MvfifError::EmptyEnsemble);
        }
        return dirs
            .iter()
            .map(|d| read_decomposition(d).with_context(|| format!("loading {}", d.display())))
            .collect();
    }
    let Some(dir) = &args.input else {
        bail!("--input or --ensemble is required");
    };
    Ok(vec![read_decomposition(dir).with_context(|| format!("loading {}", dir.display()))?])
}

fn channels_of(args: &AnalyzeArgs, n: usize) -> Result<Vec<usize>> {
    match args.channel {
        Some(c) if c >= n => bail!("channel {c} out of range for {n} channels"),
        Some(c) => Ok(vec![c]),
        None => Ok((0..n).collect()),
    }
}

fn psd_table(freqs: &[f64], columns: &[(String, Vec<f64>)]) -> String {
    let mut out = String::from("freq");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, f) in freqs.iter().enumerate() {
        out.push_str(&f.to_string());
        for (_, p) in columns {
            out.push(',');
            out.push_str(&p[i].to_string());
        }
        out.push('\n');
    }
    out
}

fn run_analyze(args: &AnalyzeArgs) -> Result<()> {
    let window = match args.window {
        WindowArg::None => Window::None,
        WindowArg::Hann => Window::Hann,
    };
    let mut files: Vec<(String, String)> = Vec::new();
    match args.kind {
        ReportArg::Snr => {
            let (Some(clean), Some(noisy)) = (&args.clean, &args.noisy) else {
                bail!("snr needs --clean and --noisy");
            };
            let layout = Layout::from_transpose(args.transpose);
            let clean = read_csv::<f64>(clean, layout, 1.0)?;
            let noisy = read_csv::<f64>(noisy, layout, 1.0)?;
            let noise = noisy.sub(&clean)?;
            let values = (0..clean.channels())
                .map(|c| Ok(serde_json::json!({"channel": c, "snr_db": snr(clean.channel(c), noise.channel(c))?})))
                .collect::<Result<Vec<_>>>()?;
            files.push(("snr.json".into(), serde_json::to_string_pretty(&values)?));
        }
        ReportArg::Psd => {
            let decs = load_ensemble(args)?;
            let n = decs[0].channels();
            let max_k = decs.iter().map(|d| d.num_imfs()).max().unwrap_or(0);
            let mut summary = Vec::new();
            for c in channels_of(args, n)? {
                let mut columns = Vec::new();
                let mut freqs = Vec::new();
                for k in 0..max_k {
                    if decs.len() == 1 {
                        let curve = imf_psd(&decs[0], k, c, window)?;
                        freqs = curve.freqs;
                        columns.push((format!("imf_{:03}", k + 1), curve.power));
                    } else {
                        let e = ensemble_psd(&decs, k, c, window)?;
                        summary.push(serde_json::json!({"channel": c, "imf": k + 1, "used": e.used, "skipped": e.skipped}));
                        freqs = e.curve.freqs;
                        columns.push((format!("imf_{:03}", k + 1), e.curve.power));
                    }
                }
                if columns.is_empty() {
                    continue;
                }
                files.push((format!("psd_ch{c}.csv"), psd_table(&freqs, &columns)));
            }
            if decs.len() > 1 {
                files.push((
                    "ensemble.json".into(),
                    serde_json::to_string_pretty(&serde_json::json!({"realizations": decs.len(), "imfs": summary}))?,
                ));
            }
        }
        ReportArg::Corr => {
            let decs = load_ensemble(args)?;
            let n = decs[0].channels();
            let chans = channels_of(args, n)?;
            let mut means = Vec::new();
            for (r, d) in decs.iter().enumerate() {
                for &c in &chans {
                    let cm = correlation_matrix(d, c)?;
                    means.push(cm.mean_abs_offdiag());
                    if decs.len() == 1 {
                        let mut csv = cm.imfs.iter().map(|k| format!("imf_{k:03}")).collect::<Vec<_>>().join(",");
                        csv.push('\n');
                        for i in 0..cm.k {
                            let row: Vec<String> = (0..cm.k).map(|j| cm.get(i, j).to_string()).collect();
                            csv.push_str(&row.join(","));
                            csv.push('\n');
                        }
                        files.push((format!("corr_ch{c}.csv"), csv));
                        if !cm.excluded.is_empty() {
                            log::warn!("realization {r} channel {c}: constant IMFs {:?} excluded", cm.excluded);
                        }
                    }
                }
            }
            let mean = means.iter().sum::<f64>() / means.len().max(1) as f64;
            files.push((
                "corr_summary.json".into(),
                serde_json::to_string_pretty(&serde_json::json!({
                    "realizations": decs.len(),
                    "channels": chans,
                    "mean_abs_offdiag": mean,
                }))?,
            ));
        }
        ReportArg::Align => {
            if args.freqs.is_empty() {
                bail!("align needs at least one --freq");
            }
            let decs = load_ensemble(args)?;
            if decs.len() != 1 {
                bail!("align works on a single decomposition");
            }
            let report = alignment_report(&decs[0], &args.freqs, args.tol)?;
            files.push(("alignment.json".into(), serde_json::to_string_pretty(&report)?));
        }
    }
    write_atomically(&args.output, |dir| {
        for (name, body) in &files {
            let mut body = body.clone();
            if !body.ends_with('\n') {
                body.push('\n');
            }
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    })
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let config = Config64 { max_imfs: Some(args.max_imfs), ..Default::default() };
    let mut rows = Vec::new();
    for &n in &args.channels {
        for &m in &args.samples {
            rows.push(bench_case(n, m, args.realizations, args.seed, &config)?);
        }
    }
    annotate_scaling(&mut rows);
    let csv = to_csv(&rows);
    match &args.output {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    if rows.iter().any(|r| !r.passed()) {
        eprintln!("warning: scaling limit exceeded");
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV} must be a positive integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    match cli.command {
        Command::Decompose(a) => run_decompose(&a, false),
        Command::Fif(a) => run_decompose(&a, true),
        Command::Generate(a) => run_generate(&a).map(|_| ExitCode::SUCCESS),
        Command::Analyze(a) => run_analyze(&a).map(|_| ExitCode::SUCCESS),
        Command::Selftest(a) => {
            let report = run_selftest(a.inject_fault.map(|f| match f {
                FaultArg::KernelAsymmetry => Fault::KernelAsymmetry,
            }));
            print!("{}", report.render());
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Bench(a) => run_bench(&a).map(|_| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cuspdim::coding::{cuspidal_decompose, enumerate_alphabet, expand, CuspidalWord, TransitionMatrix};
use cuspdim::dimension::{build_model, dimension_rows, theta_report, BowenOptions, Scheme};
use cuspdim::diophantine::{bad_test, expansion_approximation_check, sample_expansion};
use cuspdim::error::Error;
use cuspdim::gauss::{hensley_fit, GaussOperator};
use cuspdim::group::{from_toml, GroupPresentation};
use cuspdim::linalg::DenseMatrix;
use cuspdim::moebius::real_to_disc;
use cuspdim::transfer::Cutoff;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

mod fmt;
use fmt::g12;

/// Hausdorff dimension of bounded-type sets for cusped Fuchsian groups.
#[derive(Parser)]
#[command(name = "cuspdim", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Grid nodes per arc (per unit interval for the Gauss operator).
    #[arg(long, global = true, default_value_t = 256)]
    grid: usize,
    /// Target for |λ(s) − 1| in the Bowen solve.
    #[arg(long, global = true, default_value_t = 1e-11)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the assembled operator to this file (dimension, theta, hensley).
    #[arg(long, global = true, value_name = "PATH")]
    dump_operator: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = SchemeArg::Refined)]
    scheme: SchemeArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Linear,
    Refined,
}

#[derive(Args)]
#[group(multiple = false)]
struct GroupArgs {
    /// Built-in group: gamma2 or punctured_torus.
    #[arg(long)]
    builtin: Option<String>,
    /// Group description in TOML.
    #[arg(long, value_name = "PATH")]
    group: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the polygon checks on a group.
    ValidateGroup {
        #[command(flatten)]
        group: GroupArgs,
    },
    /// Boundary expansion and cuspidal decomposition of a real point.
    CodePoint {
        #[command(flatten)]
        group: GroupArgs,
        /// Point on the real line; `inf` for ∞.
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 40)]
        letters: usize,
    },
    /// Cuspidal words with geometric length at most T.
    EnumCuspidal {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long = "T")]
        t: f64,
    },
    /// Transition matrix on the words of length at most T.
    TransitionMatrix {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long = "T")]
        t: f64,
    },
    /// s_T for each cut-off T.
    Dimension {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long = "T", value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
    /// δ, β and both estimates of Θ.
    Theta {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long = "T", value_delimiter = ',', default_value = "25,50,100,200")]
        t: Vec<f64>,
    },
    /// N·(1 − dim E_N) and its limit.
    Hensley {
        #[arg(long = "N-list", value_delimiter = ',', default_value = "20,50,100,200")]
        n_list: Vec<usize>,
    },
    /// Finite-Q badly-approximable verdicts for random points in [0, 1).
    BadScan {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long = "Q")]
        q: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 5000)]
        depth_cap: usize,
    },
    /// Two-sided convergent inequality along random expansions.
    DioVerify {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long, default_value_t = 15)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

enum Failure {
    Usage(String),
    Validation(String),
    Runtime(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Usage(m),
            Error::UnknownGroup(_) => Failure::Usage(e.to_string()),
            Error::Config(_) | Error::InvalidGroup(_) => Failure::Validation(e.to_string()),
            e => Failure::Runtime(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(m)) => {
            eprintln!("validation failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_group(a: &GroupArgs) -> Res<GroupPresentation> {
    if let Some(path) = &a.group {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        return Ok(from_toml(&text)?);
    }
    Ok(GroupPresentation::builtin(a.builtin.as_deref().unwrap_or("gamma2"))?)
}

fn run(cli: Cli) -> Res<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if g.grid < 2 {
        return Err(Failure::Usage("--grid must be at least 2".into()));
    }
    if !(g.tol > 0.0) {
        return Err(Failure::Usage("--tol must be positive".into()));
    }
    let dumps = matches!(cli.cmd, Cmd::Dimension { .. } | Cmd::Theta { .. } | Cmd::Hensley { .. });
    if g.dump_operator.is_some() && !dumps {
        return Err(Failure::Usage("--dump-operator applies to dimension, theta and hensley only".into()));
    }
    let opts = BowenOptions { tol: g.tol, ..BowenOptions::default() };
    let scheme = match g.scheme {
        SchemeArg::Linear => Scheme::Linear,
        SchemeArg::Refined => Scheme::Refined,
    };
    let out = &mut io::stdout().lock();

    match &cli.cmd {
        Cmd::ValidateGroup { group } => {
            let grp = load_group(group)?;
            let report = grp.validate();
            if g.format == Some(Format::Json) {
                writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
            } else {
                let rows = report
                    .checks
                    .iter()
                    .map(|c| vec![c.name.clone(), c.passed.to_string(), g12(c.slack)])
                    .collect();
                write_csv(out, &["check", "passed", "slack"], rows)?;
            }
            if !report.passed() {
                let failed: Vec<&str> =
                    report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(Failure::Validation(failed.join(", ")));
            }
        }
        Cmd::CodePoint { group, x, letters } => {
            let grp = load_group(group)?;
            if x.is_nan() || *letters == 0 {
                return Err(Failure::Usage("need a real point and a positive letter count".into()));
            }
            let xi = real_to_disc(x.is_finite().then_some(*x));
            let seq = expand(&grp, xi, *letters);
            let dec = cuspidal_decompose(&grp, &seq)?;
            let word: String = seq.iter().map(|&a| grp.labels[a].as_str()).collect();
            if g.format == Some(Format::Json) {
                let pieces: Vec<_> = dec
                    .pieces
                    .iter()
                    .map(|p| json!({ "start": p.start, "word": label(&grp, &p.word), "type": p.word.ty, "length": p.word.length }))
                    .collect();
                let v = json!({ "x": x, "letters": word, "pieces": pieces, "truncated": dec.truncated });
                writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
            } else {
                let rows = dec
                    .pieces
                    .iter()
                    .map(|p| {
                        vec![p.start.to_string(), label(&grp, &p.word), format!("{:?}", p.word.ty), g12(p.word.length)]
                    })
                    .collect();
                write_csv(out, &["start", "word", "type", "length"], rows)?;
            }
        }
        Cmd::EnumCuspidal { group, t } => {
            let grp = load_group(group)?;
            let words = enumerate_alphabet(&grp, *t)?;
            if g.format == Some(Format::Json) {
                let v: Vec<_> = words.iter().map(|w| word_json(&grp, w)).collect();
                writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
            } else {
                let rows = words
                    .iter()
                    .map(|w| {
                        vec![
                            label(&grp, w),
                            grp.labels[w.a0].clone(),
                            format!("{:?}", w.ty),
                            (w.n + 1).to_string(),
                            g12(w.length),
                            w.vertex.to_string(),
                        ]
                    })
                    .collect();
                write_csv(out, &["word", "first", "type", "letters", "length", "vertex"], rows)?;
            }
        }
        Cmd::TransitionMatrix { group, t } => {
            let grp = load_group(group)?;
            let tm = TransitionMatrix::new(&grp, enumerate_alphabet(&grp, *t)?);
            let n = tm.len();
            let names: Vec<String> = tm.words.iter().map(|w| label(&grp, w)).collect();
            let bits: Vec<Vec<u8>> = (0..n).map(|i| (0..n).map(|j| tm.get(i, j) as u8).collect()).collect();
            if g.format == Some(Format::Json) {
                let (aperiodic, zero) = tm.check_aperiodicity();
                let v = json!({ "T": t, "words": names, "matrix": bits, "square_positive": aperiodic, "square_zero": zero });
                writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
            } else {
                let mut header = vec!["word".to_string()];
                header.extend(names.iter().cloned());
                let rows = (0..n)
                    .map(|i| {
                        let mut r = vec![names[i].clone()];
                        r.extend(bits[i].iter().map(|b| b.to_string()));
                        r
                    })
                    .collect();
                let h: Vec<&str> = header.iter().map(String::as_str).collect();
                write_csv(out, &h, rows)?;
            }
        }
        Cmd::Dimension { group, t } => {
            let grp = load_group(group)?;
            check_cutoffs(t)?;
            let model = build_model(&grp, g.grid, scheme)?;
            let rows = dimension_rows(&model, t, &opts)?;
            if g.format == Some(Format::Json) {
                writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("json"))?;
            } else {
                let r = rows.iter().map(|r| vec![g12(r.t), g12(r.s), g12(r.residual)]).collect();
                write_csv(out, &["T", "s_T", "residual"], r)?;
            }
            if let (Some(path), Some(last)) = (&g.dump_operator, rows.last()) {
                let m = model.transfer(last.s, Cutoff::Within(last.t))?;
                let meta = [
                    ("group", grp.name.clone()),
                    ("operator", "transfer".into()),
                    ("s", g12(last.s)),
                    ("T", g12(last.t)),
                    ("nodes_per_arc", g.grid.to_string()),
                ];
                dump(path, &meta, &m)?;
            }
        }
        Cmd::Theta { group, t } => {
            let grp = load_group(group)?;
            check_cutoffs(t)?;
            let model = build_model(&grp, g.grid, scheme)?;
            let report = theta_report(&model, t, &opts)?;
            if g.format == Some(Format::Csv) {
                let d = &report.diagnostics;
                let rows = [
                    ("theta_spectral", report.theta_spectral),
                    ("theta_regression", report.theta_regression),
                    ("delta", report.delta),
                    ("beta", report.beta),
                    ("beta_limit", report.beta_limit.extrapolated),
                    ("lambda_one_infinity", d.lambda_one_infinity),
                    ("contraction", d.contraction),
                    ("distortion", d.distortion),
                    ("cone_constant", d.cone_constant),
                ]
                .iter()
                .map(|(k, v)| vec![k.to_string(), g12(*v)])
                .collect();
                write_csv(out, &["quantity", "value"], rows)?;
            } else {
                writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("json"))?;
            }
            if let Some(path) = &g.dump_operator {
                let m = model.transfer(1.0, Cutoff::All)?;
                let meta = [
                    ("group", grp.name.clone()),
                    ("operator", "transfer".into()),
                    ("s", "1".into()),
                    ("T", "inf".into()),
                    ("nodes_per_arc", g.grid.to_string()),
                ];
                dump(path, &meta, &m)?;
            }
        }
        Cmd::Hensley { n_list } => {
            let fit = hensley_fit(n_list, g.grid, &opts)?;
            if g.format == Some(Format::Json) {
                writeln!(out, "{}", serde_json::to_string_pretty(&fit).expect("json"))?;
            } else {
                let rows = fit
                    .rows
                    .iter()
                    .map(|r| vec![r.n.to_string(), g12(r.dim), g12(r.scaled_gap)])
                    .collect();
                write_csv(out, &["N", "dim", "scaled_gap"], rows)?;
                writeln!(out, "# constant={} target={}", g12(fit.constant), g12(fit.target))?;
            }
            if let (Some(path), Some(last)) = (&g.dump_operator, fit.rows.iter().max_by_key(|r| r.n)) {
                let m = GaussOperator::new(g.grid, Some(last.n))?.assemble(last.dim)?;
                let meta = [
                    ("group", "gauss".to_string()),
                    ("operator", "gauss".into()),
                    ("s", g12(last.dim)),
                    ("N", last.n.to_string()),
                    ("nodes", g.grid.to_string()),
                ];
                dump(path, &meta, &m)?;
            }
        }
        Cmd::BadScan { group, eps, q, samples, depth_cap } => {
            let grp = load_group(group)?;
            if !(*eps > 0.0) || !(*q >= 1.0) {
                return Err(Failure::Usage("need --eps > 0 and --Q ≥ 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            let alphas: Vec<f64> = (0..*samples).map(|_| rng.random::<f64>()).collect();
            let mut rows = Vec::with_capacity(alphas.len());
            for (i, &a) in alphas.iter().enumerate() {
                let bad = bad_test(&grp, a, *eps, *q, *depth_cap)?;
                rows.push((i, a, bad));
            }
            if g.format == Some(Format::Json) {
                let v: Vec<_> = rows.iter().map(|(i, a, b)| json!({ "sample": i, "alpha": a, "bad": b })).collect();
                writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
            } else {
                let r = rows.iter().map(|(i, a, b)| vec![i.to_string(), g12(*a), b.to_string()]).collect();
                write_csv(out, &["sample", "alpha", "bad"], r)?;
            }
            let n_bad = rows.iter().filter(|r| r.2).count();
            eprintln!("{n_bad}/{} samples have no approximant with D <= Q inside eps/D^2", rows.len());
        }
        Cmd::DioVerify { group, depth, samples } => {
            let grp = load_group(group)?;
            if *depth == 0 || *depth > 30 {
                return Err(Failure::Usage("--depth must lie in 1..=30".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            let mut table = Vec::new();
            for i in 0..*samples {
                let s = sample_expansion(&grp, &mut rng, *depth)?;
                let alpha = s.alpha()?;
                for v in expansion_approximation_check(&grp, &s, *depth, 1.0)? {
                    table.push((i, alpha, v));
                }
            }
            if g.format == Some(Format::Json) {
                let v: Vec<_> = table
                    .iter()
                    .map(|(i, a, v)| json!({ "sample": i, "alpha": a, "check": v }))
                    .collect();
                writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
            } else {
                let rows = table
                    .iter()
                    .map(|(i, a, v)| {
                        vec![
                            i.to_string(),
                            g12(*a),
                            v.r.to_string(),
                            g12(v.length),
                            g12(v.point),
                            g12(v.denominator),
                            g12(v.value),
                            g12(v.lower),
                            g12(v.upper),
                            v.ok.to_string(),
                        ]
                    })
                    .collect();
                let h = ["sample", "alpha", "r", "length", "point", "denominator", "value", "lower", "upper", "ok"];
                write_csv(out, &h, rows)?;
            }
            let bad = table.iter().filter(|t| !t.2.ok).count();
            eprintln!("{} checks, {bad} outside the two-sided bound", table.len());
        }
    }
    out.flush()?;
    Ok(())
}

fn check_cutoffs(t: &[f64]) -> Res<()> {
    if t.is_empty() || t.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Failure::Usage("--T needs positive finite cut-offs".into()));
    }
    Ok(())
}

fn label(g: &GroupPresentation, w: &CuspidalWord) -> String {
    w.letters(g).iter().map(|&a| g.labels[a].as_str()).collect()
}

fn word_json(g: &GroupPresentation, w: &CuspidalWord) -> serde_json::Value {
    json!({
        "word": label(g, w),
        "first": g.labels[w.a0],
        "type": w.ty,
        "letters": w.n + 1,
        "length": w.length,
        "vertex": w.vertex,
    })
}

fn write_csv<W: Write>(out: &mut W, header: &[&str], rows: Vec<Vec<String>>) -> Res<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// `# key=value` header lines, then one comma-separated row per matrix row.
fn dump(path: &Path, meta: &[(&str, String)], m: &DenseMatrix) -> Res<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# cuspdim-operator v1")?;
    for (k, v) in meta {
        writeln!(f, "# {k}={v}")?;
    }
    writeln!(f, "# n={}", m.n)?;
    for i in 0..m.n {
        let row: Vec<String> = m.row(i).iter().map(|&x| g12(x)).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

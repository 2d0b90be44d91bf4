//! `sidecode`: generate matrices and laws, encode, decode, construct polar
//! codes and run the bound-verification harness.
//!
//! Vector files hold one labelled line per vector, e.g. `x 0 1 1 0` or
//! `c1 1 0`. A sample file from `gen sample` has an `x` and a `y` line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sidecode::decoders::{Evaluation, LinearCode, Method};
use sidecode::linalg::{sample_sparse_full_rank, SparseMatrix};
use sidecode::polar::{self, PolarCode, PolarMode, ZMethod, ZMethodTag};
use sidecode::sim::{self, BoundReport, BoundSet, Corruption, DecoderConfig};
use sidecode::source::{seeded_rng, JointSourceLaw};
use sidecode::{Error, FieldSpec};

#[derive(Parser)]
#[command(name = "sidecode", version, about = "Source coding with decoder side information")]
struct Cli {
    /// Worker threads for harness and Monte Carlo runs.
    #[arg(long, global = true, env = "SIDECODE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a matrix, law or sample file.
    #[command(subcommand)]
    Gen(Gen),
    /// Compute the codeword `c1 = A x`.
    Encode(EncodeArgs),
    /// Reconstruct `x` from `c1` and `y`.
    Decode(DecodeArgs),
    /// Run exact bound checks and write a CSV report.
    Verify(VerifyArgs),
    /// Polar code construction and simulation.
    #[command(subcommand)]
    Polar(PolarCmd),
}

#[derive(Subcommand)]
enum Gen {
    /// Random sparse full-rank l x n matrix.
    Matrix {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        l: usize,
        /// Maximum row weight.
        #[arg(long, default_value_t = 3)]
        w: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Joint law of (X, Y).
    Law(LawArgs),
    /// An i.i.d. block (x, y) drawn from a law.
    Sample {
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LawArgs {
    #[arg(long)]
    p: u32,
    /// Symmetric law with crossover `theta` (binary symmetric when p = 2).
    #[arg(long, value_name = "THETA", group = "kind")]
    bsc: Option<f64>,
    /// Y = X.
    #[arg(long, group = "kind")]
    noiseless: bool,
    /// Random law with this many side-information symbols.
    #[arg(long, value_name = "Y_SIZE", group = "kind")]
    dirichlet: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Polar descriptor instead of a matrix.
    #[arg(long, conflicts_with = "matrix")]
    code: Option<PathBuf>,
    /// File with an `x` line.
    #[arg(long)]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecodeMethod {
    Map,
    Typical,
    Smap,
    Sc,
    Ssc,
    PolarSc,
    PolarSsc,
}

impl DecodeMethod {
    fn name(self) -> &'static str {
        match self {
            DecodeMethod::Map => "map",
            DecodeMethod::Typical => "typical",
            DecodeMethod::Smap => "smap",
            DecodeMethod::Sc => "sc",
            DecodeMethod::Ssc => "ssc",
            DecodeMethod::PolarSc => "polar-sc",
            DecodeMethod::PolarSsc => "polar-ssc",
        }
    }

    fn stochastic(self) -> bool {
        matches!(self, DecodeMethod::Ssc | DecodeMethod::PolarSsc)
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, value_enum)]
    method: DecodeMethod,
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Polar descriptor, required by the polar methods.
    #[arg(long)]
    code: Option<PathBuf>,
    #[arg(long)]
    law: PathBuf,
    /// File with a `c1` line.
    #[arg(long)]
    codeword: PathBuf,
    /// File with a `y` line.
    #[arg(long)]
    side: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Typical-set slack.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Use sum-product with this many iterations instead of exact evaluation.
    #[arg(long)]
    iterations: Option<usize>,
    /// Print the per-stage decisions.
    #[arg(long)]
    trace: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Check this system instead of the randomized suite (needs --law).
    #[arg(long, requires = "law")]
    matrix: Option<PathBuf>,
    #[arg(long)]
    law: Option<PathBuf>,
    /// Number of random instances in the suite.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// CSV destination; the summary goes to stderr.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, hide = true)]
    corrupt_decoder: bool,
}

#[derive(Subcommand)]
enum PolarCmd {
    /// Estimate Z for every index and freeze the unreliable ones.
    Construct {
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = polar::DEFAULT_BETA)]
        beta: f64,
        #[arg(long, default_value = "exact")]
        method: ZMethodTag,
        #[arg(long, default_value_t = polar::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo SC and SSC block error against the finite-n bound.
    Run {
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        code: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Lib(Error),
    Violation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        #[cfg(feature = "parallel")]
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let res = match cli.command {
        Command::Gen(g) => cmd_gen(g),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Polar(c) => cmd_polar(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => ExitCode::from(1),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Budget { .. } => 3,
                _ => 2,
            })
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Error::Usage(format!("{}: {e}", p.display()))),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_matrix(path: &Path) -> Result<SparseMatrix, Error> {
    let a: SparseMatrix = read(path)?.parse()?;
    if a.rank() != a.rows() {
        return Err(Error::Domain(format!("{}: matrix is not full row rank", path.display())));
    }
    Ok(a)
}

fn load_law(path: &Path) -> Result<JointSourceLaw, Error> {
    read(path)?.parse()
}

fn load_code(path: &Path) -> Result<PolarCode, Error> {
    read(path)?.parse()
}

/// The symbols on the line labelled `label`.
fn load_vector(path: &Path, label: &str) -> Result<Vec<u8>, Error> {
    let text = read(path)?;
    for (ln, line) in text.lines().enumerate() {
        let mut toks = line.split_whitespace();
        if toks.next() == Some(label) {
            return toks
                .map(|t| t.parse().map_err(|_| Error::parse(ln + 1, format!("bad symbol `{t}`"))))
                .collect();
        }
    }
    Err(Error::Usage(format!("{}: no `{label}` line", path.display())))
}

fn vector_line(label: &str, v: &[u8]) -> String {
    let mut s = label.to_string();
    for x in v {
        s.push(' ');
        s.push_str(&x.to_string());
    }
    s.push('\n');
    s
}

fn cmd_gen(g: Gen) -> CmdResult {
    match g {
        Gen::Matrix { p, n, l, w, seed, output } => {
            let field = FieldSpec::new(p)?;
            if l == 0 || l > n || w == 0 {
                return Err(Error::Usage("need 1 <= l <= n and w >= 1".into()).into());
            }
            let a = sample_sparse_full_rank(field, n, l, w, seed)?;
            emit(&output, &a.to_string())?;
        }
        Gen::Law(a) => {
            let field = FieldSpec::new(a.p)?;
            let law = if let Some(theta) = a.bsc {
                JointSourceLaw::symmetric(field, theta)?
            } else if a.noiseless {
                JointSourceLaw::noiseless(field)?
            } else if let Some(ys) = a.dirichlet {
                JointSourceLaw::random_dirichlet(field, ys, a.alpha, &mut seeded_rng(a.seed, 0))?
            } else {
                return Err(Error::Usage("choose one of --bsc, --noiseless, --dirichlet".into()).into());
            };
            emit(&a.output, &law.to_string())?;
        }
        Gen::Sample { law, n, seed, output } => {
            let law = load_law(&law)?;
            let s = law.sample_block(n, seed);
            emit(&output, &format!("{}{}", vector_line("x", &s.x), vector_line("y", &s.y)))?;
        }
    }
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> CmdResult {
    let x = load_vector(&a.input, "x")?;
    let c1 = match (&a.matrix, &a.code) {
        (Some(m), _) => {
            let m = load_matrix(m)?;
            m.field().check_symbols(&x)?;
            m.apply(&x)?
        }
        (None, Some(c)) => {
            let code = load_code(c)?;
            code.field().check_symbols(&x)?;
            polar::polar_encode(&code, &x)?
        }
        (None, None) => return Err(Error::Usage("encode needs --matrix or --code".into()).into()),
    };
    emit(&a.output, &vector_line("c1", &c1))?;
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> CmdResult {
    let law = load_law(&a.law)?;
    let c1 = load_vector(&a.codeword, "c1")?;
    let y = load_vector(&a.side, "y")?;
    let polar_method = matches!(a.method, DecodeMethod::PolarSc | DecodeMethod::PolarSsc);
    let result = if polar_method {
        let path = a.code.as_ref().ok_or_else(|| Error::Usage("polar methods need --code".into()))?;
        let code = load_code(path)?;
        let mode = if a.method == DecodeMethod::PolarSsc {
            PolarMode::Ssc { seed: a.seed }
        } else {
            PolarMode::Sc
        };
        polar::polar_decode(&code, &law, &c1, &y, mode)?
    } else {
        let path = a.matrix.as_ref().ok_or_else(|| Error::Usage("this method needs --matrix".into()))?;
        let m = load_matrix(path)?;
        let evaluation = match a.iterations {
            Some(it) => Evaluation::SumProduct { iterations: it },
            None => Evaluation::Exact,
        };
        let method = match a.method {
            DecodeMethod::Map => Method::Map,
            DecodeMethod::Typical => Method::Typical { epsilon: a.epsilon },
            DecodeMethod::Smap => Method::Smap,
            DecodeMethod::Sc => Method::Sc,
            _ => Method::Ssc { seed: a.seed },
        };
        LinearCode::new(m, law, evaluation)?.decode(method, &c1, &y)?
    };
    let mut out = format!("method {}\n", a.method.name());
    if a.method.stochastic() {
        out += &format!("seed {}\n", a.seed);
    } else {
        out += "seed none\n";
    }
    if let Some(it) = a.iterations.filter(|_| !polar_method) {
        out += &format!("iterations {it}\n");
    }
    match &result.x_hat {
        Some(x) => {
            out += "success true\n";
            out += &vector_line("x", x);
        }
        None => out += "success false\n",
    }
    if a.trace {
        out += "trace index symbol mass tie zero_support\n";
        for d in &result.trace {
            out += &format!("{} {} {:?} {} {}\n", d.index, d.symbol, d.mass, d.tie, d.zero_support);
        }
    }
    emit(&a.output, &out)?;
    Ok(())
}

fn finish_reports(reports: &[BoundReport], output: &Option<PathBuf>) -> CmdResult {
    let mut buf = Vec::new();
    sim::write_csv(reports, &mut buf)?;
    emit(output, &String::from_utf8_lossy(&buf))?;
    eprint!("{}", sim::summary(reports));
    if reports.iter().any(|r| r.is_hard_violation()) {
        Err(Failure::Violation)
    } else {
        Ok(())
    }
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let set = BoundSet {
        typical_epsilon: a.epsilon,
        ..BoundSet::default()
    };
    let corruption = Corruption {
        sc_argmin: a.corrupt_decoder,
    };
    let reports = match (&a.matrix, &a.law) {
        (Some(m), Some(l)) => {
            let code = LinearCode::new(load_matrix(m)?, load_law(l)?, Evaluation::Exact)?;
            sim::check_bounds_with(code.model(), set, corruption)?
        }
        _ => {
            if a.instances == 0 {
                return Err(Error::Usage("--instances must be at least 1".into()).into());
            }
            sim::suite_with(a.seed, a.instances, set, corruption)?
        }
    };
    finish_reports(&reports, &a.output)
}

fn cmd_polar(c: PolarCmd) -> CmdResult {
    match c {
        PolarCmd::Construct { law, k, beta, method, samples, seed, output } => {
            let law = load_law(&law)?;
            let method = match method {
                ZMethodTag::Exact => ZMethod::Exact,
                ZMethodTag::MonteCarlo => ZMethod::MonteCarlo { samples, seed },
            };
            let (code, stats) = polar::construct(&law, k, beta, method)?;
            emit(&output, &code.to_string())?;
            eprintln!(
                "n {} frozen {} rate {:.4} sc_bound {:?} sum_h_i0 {:?}",
                code.n(),
                code.i1().len(),
                code.rate(),
                code.sc_error_bound(),
                code.i0().iter().map(|&i| stats.h[i]).sum::<f64>()
            );
        }
        PolarCmd::Run { law, code, trials, seed, output } => {
            let law = load_law(&law)?;
            let code = load_code(&code)?;
            if trials == 0 {
                return Err(Error::Usage("--trials must be at least 1".into()).into());
            }
            let sc = sim::monte_carlo_error(DecoderConfig::Polar { code: &code, stochastic: false }, &law, trials, seed)?;
            let ssc = sim::monte_carlo_error(DecoderConfig::Polar { code: &code, stochastic: true }, &law, trials, seed)?;
            eprintln!("seed {seed} rate {:.4} sc {:?} ssc {:?}", code.rate(), sc.p_hat, ssc.p_hat);
            return finish_reports(&sim::polar_trial_reports(&sc, &ssc, &code), &output);
        }
    }
    Ok(())
}

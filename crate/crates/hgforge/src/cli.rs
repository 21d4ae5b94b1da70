//! Command-line front end. Parsing stays here; everything the commands do
//! lives in the library so the binary is a thin shell around it.
//!
//! Exit codes: 0 when every check passes, 1 on any failing check or
//! runtime error, 2 on usage errors.

use crate::elliptic::{inv_sn, inv_sn_factored, LatticeSpec};
use crate::linalg::ONE;
use crate::params::{params_from_json, params_to_json, sample_parameters, SampleMode, DELTA_SEP};
use crate::report::{emit_report, run_suite, KindFilter, ReportFormat, Suite, SuiteConfig};
use crate::residue::build_residue_triple;
use crate::series::{hyper_pfq, mhgs_frobenius, with_zero_a2, BasePoint};
use crate::Result;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use std::path::PathBuf;

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = |_| format!("expected RE or RE,IM, got '{s}'");
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.trim().parse().map_err(bad)?, 0.0)),
        [re, im] => Ok(Complex64::new(
            re.trim().parse().map_err(bad)?,
            im.trim().parse().map_err(bad)?,
        )),
        _ => Err(format!("expected RE or RE,IM, got '{s}'")),
    }
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    Suite::parse(s).ok_or_else(|| {
        "expected one of params, identities, residue, flows, cauchy, elliptic, series, \
         monodromy, fock, cm, all"
            .into()
    })
}

fn parse_kind(s: &str) -> std::result::Result<KindFilter, String> {
    KindFilter::parse(s).ok_or_else(|| "expected one of rational, trig, elliptic".into())
}

fn parse_point(s: &str) -> std::result::Result<BasePoint, String> {
    match s {
        "0" => Ok(BasePoint::Zero),
        "inf" => Ok(BasePoint::Infinity),
        _ => Err("expected 0 or inf".into()),
    }
}

#[derive(Parser)]
#[command(
    name = "hgforge",
    version,
    about = "Numerical checks for a hypergeometric system of rank m and its many-body picture"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification suite and report every residual
    Verify(VerifyArgs),
    /// Evaluate one quantity and print it
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Sample an exponent set and print it as JSON
    SampleParams(SampleArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name, or "all" for every suite in order
    #[arg(value_parser = parse_suite)]
    suite: Suite,
    /// Number of exponent columns
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Independent random draws per check
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override every check's tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Second lattice period as RE,IM (the first is 1)
    #[arg(long, value_parser = parse_complex, default_value = "0,0.8")]
    omega2: Complex64,
    /// Series order and lattice depth override
    #[arg(long)]
    trunc: Option<usize>,
    /// Write the JSON report to this path
    #[arg(long)]
    json: Option<PathBuf>,
    /// Restrict the cauchy suite to one kernel kind
    #[arg(long, value_parser = parse_kind)]
    kind: Option<KindFilter>,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Generalized hypergeometric partial sum at z
    Pfq(PfqArgs),
    /// Local series solution of the rank-m system at a regular point
    Frobenius(FrobeniusArgs),
    /// Doubly periodic reciprocal sine at z
    InvSn(InvSnArgs),
}

#[derive(Args)]
struct PfqArgs {
    /// Upper parameter, repeatable
    #[arg(long = "a", value_parser = parse_complex)]
    a: Vec<Complex64>,
    /// Lower parameter, repeatable
    #[arg(long = "b", value_parser = parse_complex)]
    b: Vec<Complex64>,
    #[arg(long, value_parser = parse_complex)]
    z: Complex64,
    /// Number of series terms
    #[arg(long, default_value_t = 200)]
    trunc: usize,
}

#[derive(Args)]
struct FrobeniusArgs {
    /// Expansion point: 0 or inf
    #[arg(long, value_parser = parse_point)]
    point: BasePoint,
    /// Solution index, 0-based
    #[arg(long, default_value_t = 0)]
    i: usize,
    #[arg(long, value_parser = parse_complex)]
    z: Complex64,
    /// JSON parameter file; sampled from --m/--seed when absent
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Series order
    #[arg(long, default_value_t = 40)]
    trunc: usize,
}

#[derive(Args)]
struct InvSnArgs {
    #[arg(long, value_parser = parse_complex)]
    z: Complex64,
    /// Second lattice period as RE,IM (the first is 1)
    #[arg(long, value_parser = parse_complex, default_value = "0,0.8")]
    omega2: Complex64,
    /// Sum over the lattice instead of taking the product form
    #[arg(long)]
    lattice_sum: bool,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn fmt_complex(z: Complex64) -> String {
    format!("{:.15e} {:+.15e}i", z.re, z.im)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let cfg = SuiteConfig {
        suite: args.suite,
        m: args.m,
        trials: args.trials,
        seed: args.seed,
        tol: args.tol,
        omega2: args.omega2,
        trunc: args.trunc,
        kind: args.kind,
    };
    let report = run_suite(&cfg);
    if let Some(path) = &args.json {
        std::fs::write(path, emit_report(&report, ReportFormat::Json))
            .map_err(|e| crate::Error::InvalidArgument(format!("cannot write {path:?}: {e}")))?;
    }
    print!("{}", emit_report(&report, ReportFormat::Text));
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn cmd_pfq(args: &PfqArgs) -> Result<i32> {
    let v = hyper_pfq(&args.a, &args.b, args.z, args.trunc)?;
    println!("value     {}", fmt_complex(v.value));
    println!("next_term {:.3e}", v.next_term);
    Ok(0)
}

fn cmd_frobenius(args: &FrobeniusArgs) -> Result<i32> {
    let e = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                crate::Error::InvalidArgument(format!("cannot read {path:?}: {e}"))
            })?;
            params_from_json(&text)?
        }
        None => sample_parameters(args.m, args.seed, SampleMode::Complex, DELTA_SEP)?,
    };
    // the series machinery wants the scalar part of the connection gone;
    // the reduction rebalances the derived exponent and changes nothing else
    let e = with_zero_a2(&e)?;
    let t = build_residue_triple(&e)?;
    let sol = mhgs_frobenius(&t, args.point, args.i, args.trunc)?;
    let values = sol.eval(args.z)?;
    println!("exponent  {}", fmt_complex(sol.exponent));
    for (j, v) in values.iter().enumerate() {
        println!("f[{j}]      {}", fmt_complex(*v));
    }
    Ok(0)
}

fn cmd_inv_sn(args: &InvSnArgs) -> Result<i32> {
    let lat = LatticeSpec::new(ONE, args.omega2)?;
    if args.lattice_sum {
        let v = inv_sn(args.z, &lat)?;
        println!("value     {}", fmt_complex(v.value));
        println!("tail      {:.3e}", v.tail_bound);
    } else {
        println!("value     {}", fmt_complex(inv_sn_factored(args.z, &lat)?));
    }
    Ok(0)
}

fn cmd_sample(args: &SampleArgs) -> Result<i32> {
    let e = sample_parameters(args.m, args.seed, SampleMode::Complex, DELTA_SEP)?;
    println!("{}", params_to_json(&e));
    Ok(0)
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 2 on usage errors and 0 for help and version
        Err(e) => e.exit(),
    };
    if let Ok(threads) = std::env::var("HGFORGE_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // a second initialization in the same process is harmless
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("HGFORGE_THREADS must be a positive integer, got '{threads}'");
                return 2;
            }
        }
    }
    let outcome = match &cli.cmd {
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Eval(EvalCmd::Pfq(args)) => cmd_pfq(args),
        Cmd::Eval(EvalCmd::Frobenius(args)) => cmd_frobenius(args),
        Cmd::Eval(EvalCmd::InvSn(args)) => cmd_inv_sn(args),
        Cmd::SampleParams(args) => cmd_sample(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

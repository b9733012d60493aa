//! Command implementations shared by the `ip1s` and `ippow` binaries.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ip1s_core::counting::{brute_force_equivalence, count_bound};
use ip1s_core::field::text::{format_element, format_field_spec};
use ip1s_core::harness::{bench, format_table, generate, summarize, BenchConfig, InstanceKind, MRule};
use ip1s_core::io::{format_solution, parse_instance, parse_matrix_file, write_instance, write_matrix_file};
use ip1s_core::ip1s::{solve, Algo, Outcome, SolutionMode, SolveOptions};
use ip1s_core::ippow::{solve_pow, DensePolySystem, PowOutcome};
use ip1s_core::sqrtmat::{sqrt_matrix, Backend};
use ip1s_core::{Error, MatrixF};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOSOL: i32 = 1;
pub const EXIT_IRREGULAR: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser)]
#[command(name = "ip1s", version, about = "Quadratic polynomial isomorphism over finite fields")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Write a random instance
    Gen(GenArgs),
    /// Solve an instance file
    Solve(SolveArgs),
    /// Bound (and for tiny instances count) the solutions
    Count(CountArgs),
    /// Time the solver on generated instances
    Bench(BenchArgs),
    /// Square root of a matrix
    Matsqrt(SqrtArgs),
    /// Isomorphism against the power system
    Ippow {
        #[command(subcommand)]
        cmd: PowCommand,
    },
}

#[derive(Subcommand)]
pub enum PowCommand {
    /// Find (A, B) with B·POW(Ax) = g
    Solve(PowArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlgoArg {
    Auto,
    Canonical,
    Generic,
    /// The canonical path, named for its use over F_2
    Char2,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Algo {
        match a {
            AlgoArg::Auto => Algo::Auto,
            AlgoArg::Canonical | AlgoArg::Char2 => Algo::Canonical,
            AlgoArg::Generic => Algo::Generic,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Jordan,
    Companion,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Jordan => Backend::Jordan,
            BackendArg::Companion => Backend::Companion,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Equivalent,
    EquivalentExtOnly,
    Inequivalent,
    Irregular,
}

impl From<KindArg> for InstanceKind {
    fn from(k: KindArg) -> InstanceKind {
        match k {
            KindArg::Equivalent => InstanceKind::Equivalent,
            KindArg::EquivalentExtOnly => InstanceKind::EquivalentExtOnly,
            KindArg::Inequivalent => InstanceKind::Inequivalent,
            KindArg::Irregular => InstanceKind::Irregular,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Jsonl,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    /// Number of forms (defaults to n)
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub q: u64,
    #[arg(long, value_enum, default_value = "equivalent")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instance file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Provenance sidecar (defaults to <out>.planted.json)
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Args)]
pub struct SolveArgs {
    /// Instance file, or - for stdin
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub algo: AlgoArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Accept solutions that need an extension of the base field
    #[arg(long)]
    pub allow_extension: bool,
    #[arg(long, value_enum, default_value = "companion")]
    pub backend: BackendArg,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Args)]
pub struct CountArgs {
    pub instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated sizes
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Fixed number of forms (defaults to m = n)
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub q: u64,
    #[arg(long, value_enum, default_value = "auto")]
    pub algo: AlgoArg,
    #[arg(long, value_enum, default_value = "equivalent")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Run trials one at a time
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args)]
pub struct SqrtArgs {
    /// Field line followed by the matrix rows
    pub matrix: PathBuf,
    #[arg(long, value_enum, default_value = "jordan")]
    pub backend: BackendArg,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Args)]
pub struct PowArgs {
    /// Polynomial file
    pub polys: PathBuf,
    #[arg(long)]
    pub d: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn rows_json(m: &MatrixF) -> Value {
    let rows: Vec<Vec<String>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| format_element(m.ctx(), m.level(), m.get(i, j))).collect())
        .collect();
    json!(rows)
}

/// Exit code for a library error.
pub fn error_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<Error>() {
        Some(Error::Irregular(_)) | Some(Error::UnsupportedKind(_)) => EXIT_IRREGULAR,
        _ => EXIT_INTERNAL,
    }
}

pub fn cmd_gen(a: &GenArgs) -> Result<i32> {
    let m = a.m.unwrap_or(a.n);
    let inst = generate(a.n, m, a.q, a.kind.into(), a.seed)?;
    let text = write_instance(&inst.f, &inst.g);
    let sidecar = serde_json::to_string_pretty(&inst.planted)?;
    match &a.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            let side = a.sidecar.clone().unwrap_or_else(|| {
                let mut s = path.clone().into_os_string();
                s.push(".planted.json");
                s.into()
            });
            fs::write(&side, sidecar + "\n").with_context(|| format!("writing {}", side.display()))?;
        }
        None => {
            print!("{text}");
            if let Some(side) = &a.sidecar {
                fs::write(side, sidecar + "\n").with_context(|| format!("writing {}", side.display()))?;
            }
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let (f, g) = parse_instance(&read_input(&a.instance)?)?;
    let opts = SolveOptions {
        algo: a.algo.into(),
        allow_extension: a.allow_extension,
        backend: a.backend.into(),
        ..SolveOptions::default()
    };
    let out = solve(&f, &g, a.seed, &opts)?;
    let (code, verdict, reason) = match &out {
        Outcome::Solution(_) => (EXIT_OK, "solution", None),
        Outcome::NoSol(r) => (EXIT_NOSOL, "nosol", Some(r.clone())),
        Outcome::Irregular(r) => (EXIT_IRREGULAR, "irregular", Some(r.clone())),
    };
    match a.format {
        Format::Table => {
            println!("verdict: {verdict}");
            if let Some(r) = &reason {
                println!("reason: {r}");
            }
            if let Outcome::Solution(s) = &out {
                print!("{}", format_solution(s));
            }
        }
        Format::Jsonl => {
            let mut rec = json!({ "verdict": verdict, "reason": reason });
            if let Outcome::Solution(s) = &out {
                let (ctx, body) = match &s.mode {
                    SolutionMode::Assembled(m) => (m.ctx().clone(), json!({ "matrix": rows_json(m) })),
                    SolutionMode::Factored { s: sm, t } => {
                        (sm.ctx().clone(), json!({ "s": rows_json(sm), "t": rows_json(t) }))
                    }
                };
                rec["field"] = json!(format_field_spec(&ctx.truncate(s.field_level)));
                rec["field_degree"] = json!(ctx.size(s.field_level) / ctx.size(f.level));
                rec["solution"] = body;
                if let Some(b) = &s.translation {
                    let l = (0..=ctx.top()).find(|&l| ctx.size(l) == b[0].len()).unwrap_or(0);
                    rec["translation"] = json!(b.iter().map(|c| format_element(&ctx, l, c)).collect::<Vec<_>>());
                }
            }
            println!("{rec}");
        }
    }
    Ok(code)
}

pub fn cmd_count(a: &CountArgs) -> Result<i32> {
    let (f, g) = parse_instance(&read_input(&a.instance)?)?;
    let b = count_bound(&f, a.seed)?;
    let exact = if f.is_homogeneous() && g.is_homogeneous() {
        match brute_force_equivalence(&f, &g) {
            Ok(r) => Some(r.count),
            Err(Error::TooLarge(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let ctx = b.h.ctx();
    let jordan: Vec<Value> = b
        .jordan_summary
        .iter()
        .map(|(z, sizes)| json!({ "eigenvalue": format_element(ctx, ctx.level_of(z), z), "sizes": sizes }))
        .collect();
    match a.format {
        Format::Table => {
            println!("dim (over K(alpha), from Jordan data): {}", b.dim);
            println!("dim over K (linear algebra): {}", b.base_dim);
            println!("bound: {}", b.bound);
            println!("alpha degree: {}", b.alpha_degree);
            for (z, sizes) in &b.jordan_summary {
                println!("eigenvalue {} blocks {:?}", format_element(ctx, ctx.level_of(z), z), sizes);
            }
            if b.heuristic {
                println!("note: characteristic 2, the bound is heuristic");
            }
            match exact {
                Some(c) => println!("exact count: {c}"),
                None => println!("exact count: not enumerated"),
            }
        }
        Format::Jsonl => println!(
            "{}",
            json!({
                "dim": b.dim,
                "base_dim": b.base_dim,
                "bound": b.bound.to_string(),
                "alpha_degree": b.alpha_degree,
                "heuristic": b.heuristic,
                "jordan": jordan,
                "exact_count": exact,
            })
        ),
    }
    Ok(EXIT_OK)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let cfg = BenchConfig {
        n_list: a.n.clone(),
        m_rule: a.m.map_or(MRule::EqualN, MRule::Fixed),
        q: a.q,
        algo: a.algo.into(),
        kind: a.kind.into(),
        trials: a.trials,
        seed: a.seed,
        parallel: !a.sequential,
    };
    let recs = bench(&cfg);
    match a.format {
        Format::Jsonl => {
            for r in &recs {
                println!("{}", serde_json::to_string(r)?);
            }
        }
        Format::Table => print!("{}", format_table(&summarize(&recs), a.q)),
    }
    Ok(EXIT_OK)
}

pub fn cmd_matsqrt(a: &SqrtArgs) -> Result<i32> {
    let z = parse_matrix_file(&read_input(&a.matrix)?)?;
    let r = match sqrt_matrix(&z, a.backend.into()) {
        Ok(r) => r,
        Err(e @ Error::NoSquareRoot(_)) => {
            println!("no square root: {e}");
            return Ok(EXIT_NOSOL);
        }
        Err(e @ (Error::SingularMatrix | Error::ZeroEigenvalue | Error::UnsupportedKind(_))) => {
            println!("unsupported: {e}");
            return Ok(EXIT_IRREGULAR);
        }
        Err(e) => return Err(e.into()),
    };
    match a.format {
        Format::Table => {
            print!("{}", write_matrix_file(&r.w));
            if let Some(q) = &r.as_polynomial {
                println!("W = Q(Z), Q = {q}");
            }
        }
        Format::Jsonl => println!(
            "{}",
            json!({
                "field": format_field_spec(r.w.ctx()),
                "w": rows_json(&r.w),
                "polynomial": r.as_polynomial.as_ref().map(|q| q.to_string()),
            })
        ),
    }
    Ok(EXIT_OK)
}

pub fn cmd_ippow(a: &PowArgs) -> Result<i32> {
    let g = DensePolySystem::parse(&read_input(&a.polys)?)?;
    match solve_pow(&g, a.d, a.seed)? {
        PowOutcome::Solution(s) => {
            match a.format {
                Format::Table => {
                    println!("verdict: solution");
                    println!("d = {}^{} * {}", s.p, s.r, s.e);
                    println!("A");
                    print!("{}", s.a.to_text().split_once('\n').map_or("", |x| x.1));
                    println!("B");
                    print!("{}", s.b.to_text().split_once('\n').map_or("", |x| x.1));
                }
                Format::Jsonl => println!(
                    "{}",
                    json!({ "verdict": "solution", "p": s.p, "r": s.r, "e": s.e, "a": rows_json(&s.a), "b": rows_json(&s.b) })
                ),
            }
            Ok(EXIT_OK)
        }
        PowOutcome::NoSol(r) => {
            match a.format {
                Format::Table => println!("verdict: nosol\nreason: {r}"),
                Format::Jsonl => println!("{}", json!({ "verdict": "nosol", "reason": r })),
            }
            Ok(EXIT_NOSOL)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Count(a) => cmd_count(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Matsqrt(a) => cmd_matsqrt(a),
        Command::Ippow { cmd: PowCommand::Solve(a) } => cmd_ippow(a),
    }
}

/// Run and turn errors into exit codes.
pub fn exit_code(result: Result<i32>) -> i32 {
    match result {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            error_code(&e)
        }
    }
}

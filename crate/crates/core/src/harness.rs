//! Instance generation and timing runs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::counting::{brute_force_equivalence, ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::field::{field_of_order, text::format_element, FieldCtx};
use crate::ip1s::{solve, Algo, Outcome, SolveOptions};
use crate::matrix::MatrixF;
use crate::quadform::{regular_combination, QuadSystem};

/// Attempts at drawing a regular system or a valid twist.
pub const GEN_BUDGET: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Equivalent,
    EquivalentExtOnly,
    Inequivalent,
    Irregular,
}

impl FromStr for InstanceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "equivalent" => InstanceKind::Equivalent,
            "equivalent_ext_only" => InstanceKind::EquivalentExtOnly,
            "inequivalent" => InstanceKind::Inequivalent,
            "irregular" => InstanceKind::Irregular,
            other => return Err(Error::InvalidInput(format!("unknown instance kind '{other}'"))),
        })
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InstanceKind::Equivalent => "equivalent",
            InstanceKind::EquivalentExtOnly => "equivalent_ext_only",
            InstanceKind::Inequivalent => "inequivalent",
            InstanceKind::Irregular => "irregular",
        };
        f.write_str(s)
    }
}

/// Sidecar describing how an instance was made.  The solver never reads it.
#[derive(Clone, Debug, Serialize)]
pub struct Planted {
    pub kind: InstanceKind,
    pub n: usize,
    pub m: usize,
    pub q: u64,
    pub seed: u64,
    /// Rows of the planted `A` with `g = f(Ax)` (up to `twist`).
    pub a: Option<Vec<Vec<String>>>,
    /// Nonsquare `ν` with `g = ν·f(Ax)`, for extension-only instances.
    pub twist: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub f: QuadSystem,
    pub g: QuadSystem,
    pub a: Option<MatrixF>,
    pub planted: Planted,
}

fn matrix_strings(a: &MatrixF) -> Vec<Vec<String>> {
    (0..a.rows())
        .map(|i| (0..a.cols()).map(|j| format_element(a.ctx(), a.level(), a.get(i, j))).collect())
        .collect()
}

fn random_system<R: Rng>(ctx: &Arc<FieldCtx>, n: usize, m: usize, rng: &mut R) -> QuadSystem {
    let l = ctx.top();
    let mats = (0..m).map(|_| MatrixF::random(ctx, l, n, n, rng)).collect();
    QuadSystem::new(ctx, l, n, mats)
}

/// A random system with a nondegenerate combination.
pub fn random_regular<R: Rng>(ctx: &Arc<FieldCtx>, n: usize, m: usize, rng: &mut R) -> Result<QuadSystem> {
    for _ in 0..GEN_BUDGET {
        let f = random_system(ctx, n, m, rng);
        if regular_combination(&f, rng.gen()).is_ok() {
            return Ok(f);
        }
    }
    Err(Error::UnsupportedKind(format!(
        "no regular system found for n = {n}, m = {m} over F_{}",
        ctx.order(ctx.top())
    )))
}

fn tiny(ctx: &FieldCtx, n: usize) -> bool {
    ctx.order_u64(ctx.top())
        .and_then(|q| q.checked_pow((n * n) as u32))
        .is_some_and(|t| t <= ENUMERATION_LIMIT)
}

fn scale_system(f: &QuadSystem, nu: &[u64]) -> QuadSystem {
    let m = f.m();
    let rows: Vec<Vec<_>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { nu.to_vec() } else { f.ctx.zero(f.level) }).collect())
        .collect();
    f.combine(&rows)
}

/// Draw an instance of the requested kind.  Identical arguments give
/// identical instances.
pub fn generate(n: usize, m: usize, q: u64, kind: InstanceKind, seed: u64) -> Result<Generated> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("n and m must be positive".into()));
    }
    let ctx = field_of_order(q)?;
    let l = ctx.top();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planted = Planted {
        kind,
        n,
        m,
        q,
        seed,
        a: None,
        twist: None,
    };
    match kind {
        InstanceKind::Equivalent => {
            let f = random_regular(&ctx, n, m, &mut rng)?;
            let a = MatrixF::random_invertible(&ctx, l, n, &mut rng);
            let g = f.substitute(&a);
            planted.a = Some(matrix_strings(&a));
            Ok(Generated { f, g, a: Some(a), planted })
        }
        InstanceKind::EquivalentExtOnly => {
            if ctx.p() == 2 {
                return Err(Error::UnsupportedKind(
                    "every element is a square in characteristic 2, so no scalar twist exists".into(),
                ));
            }
            let nu = ctx.nonsquare_el(l);
            for _ in 0..GEN_BUDGET {
                let f = random_regular(&ctx, n, m, &mut rng)?;
                let a = MatrixF::random_invertible(&ctx, l, n, &mut rng);
                // g = ν f(Ax) = f(√ν A x) with √ν in the quadratic extension
                let g = scale_system(&f.substitute(&a), &nu);
                let rational = if tiny(&ctx, n) {
                    brute_force_equivalence(&f, &g)?.equivalent
                } else {
                    !matches!(solve(&f, &g, rng.gen(), &SolveOptions::default())?, Outcome::NoSol(_))
                };
                if !rational {
                    planted.a = Some(matrix_strings(&a));
                    planted.twist = Some(format_element(&ctx, l, &nu));
                    return Ok(Generated { f, g, a: Some(a), planted });
                }
            }
            Err(Error::UnsupportedKind(format!(
                "every twisted draw stayed equivalent over F_{q} for n = {n}, m = {m}"
            )))
        }
        InstanceKind::Inequivalent => {
            for _ in 0..GEN_BUDGET {
                let f = random_regular(&ctx, n, m, &mut rng)?;
                let g = random_regular(&ctx, n, m, &mut rng)?;
                if tiny(&ctx, n) && brute_force_equivalence(&f, &g)?.equivalent {
                    continue;
                }
                return Ok(Generated { f, g, a: None, planted });
            }
            Err(Error::UnsupportedKind(format!("could not draw an inequivalent pair at n = {n} over F_{q}")))
        }
        InstanceKind::Irregular => {
            if n < 3 || m >= n {
                return Err(Error::UnsupportedKind("the x_i·x_n family needs n ≥ 3 and m < n".into()));
            }
            // f_i = x_i x_n: every combination is (Σ λ_i x_i)·x_n, of rank ≤ 2
            let mats = (0..m)
                .map(|i| {
                    let mut u = MatrixF::zeros(&ctx, l, n, n);
                    u.set(i, n - 1, &ctx.one(l));
                    u
                })
                .collect();
            let f = QuadSystem::new(&ctx, l, n, mats);
            let a = MatrixF::random_invertible(&ctx, l, n, &mut rng);
            let g = f.substitute(&a);
            planted.a = Some(matrix_strings(&a));
            Ok(Generated { f, g, a: Some(a), planted })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRecord {
    pub n: usize,
    pub m: usize,
    pub q: u64,
    pub algo: String,
    pub seed: u64,
    pub trial: usize,
    pub wall_time_ms: f64,
    pub verdict: String,
    /// Degree over `F_q` of the field holding the solution (0 when none).
    pub solution_field_degree: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum MRule {
    EqualN,
    Fixed(usize),
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub n_list: Vec<usize>,
    pub m_rule: MRule,
    pub q: u64,
    pub algo: Algo,
    pub kind: InstanceKind,
    pub trials: usize,
    pub seed: u64,
    /// Run trials on the rayon pool.
    pub parallel: bool,
}

pub fn algo_name(a: Algo) -> &'static str {
    match a {
        Algo::Auto => "auto",
        Algo::Canonical => "canonical",
        Algo::Generic => "generic",
    }
}

/// Seeds for trial `trial`: instance seed and solver seed, from the
/// ChaCha stream `trial` of the run seed.
pub fn trial_seeds(seed: u64, trial: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (rng.gen(), rng.gen())
}

fn run_trial(cfg: &BenchConfig, n: usize, trial: usize, index: u64) -> BenchRecord {
    let m = match cfg.m_rule {
        MRule::EqualN => n,
        MRule::Fixed(m) => m,
    };
    let (inst_seed, solve_seed) = trial_seeds(cfg.seed, index);
    let mut rec = BenchRecord {
        n,
        m,
        q: cfg.q,
        algo: algo_name(cfg.algo).into(),
        seed: inst_seed,
        trial,
        wall_time_ms: 0.0,
        verdict: "error".into(),
        solution_field_degree: 0,
    };
    let inst = match generate(n, m, cfg.q, cfg.kind, inst_seed) {
        Ok(x) => x,
        Err(_) => return rec,
    };
    let opts = SolveOptions {
        algo: cfg.algo,
        ..SolveOptions::default()
    };
    let t0 = Instant::now();
    let out = solve(&inst.f, &inst.g, solve_seed, &opts);
    rec.wall_time_ms = t0.elapsed().as_secs_f64() * 1e3;
    rec.verdict = match out {
        Ok(Outcome::Solution(s)) => {
            let ctx = s.matrix().map(|a| a.ctx().clone()).ok();
            rec.solution_field_degree = ctx.map_or(1, |c| c.size(s.field_level) / c.size(inst.f.level));
            "solution"
        }
        Ok(Outcome::NoSol(_)) => "nosol",
        Ok(Outcome::Irregular(_)) => "irregular",
        Err(_) => "error",
    }
    .into();
    rec
}

/// One record per (size, trial).
pub fn bench(cfg: &BenchConfig) -> Vec<BenchRecord> {
    let jobs: Vec<(usize, usize, u64)> = cfg
        .n_list
        .iter()
        .enumerate()
        .flat_map(|(si, &n)| (0..cfg.trials).map(move |t| (n, t, (si * cfg.trials + t) as u64)))
        .collect();
    if cfg.parallel {
        jobs.par_iter().map(|&(n, t, i)| run_trial(cfg, n, t, i)).collect()
    } else {
        jobs.iter().map(|&(n, t, i)| run_trial(cfg, n, t, i)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub trials: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub solutions: usize,
    pub nosol: usize,
    pub irregular: usize,
    pub errors: usize,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let rs: Vec<&BenchRecord> = records.iter().filter(|r| r.n == n).collect();
            let mut t: Vec<f64> = rs.iter().map(|r| r.wall_time_ms).collect();
            t.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if t.is_empty() {
                0.0
            } else if t.len() % 2 == 1 {
                t[t.len() / 2]
            } else {
                (t[t.len() / 2 - 1] + t[t.len() / 2]) / 2.0
            };
            let count = |v: &str| rs.iter().filter(|r| r.verdict == v).count();
            SummaryRow {
                n,
                trials: rs.len(),
                median_ms: median,
                mean_ms: t.iter().sum::<f64>() / t.len().max(1) as f64,
                solutions: count("solution"),
                nosol: count("nosol"),
                irregular: count("irregular"),
                errors: count("error"),
            }
        })
        .collect()
}

/// `median(2n) / median(n)` for every size whose double was also run.
pub fn growth_ratios(rows: &[SummaryRow]) -> Vec<(usize, f64)> {
    rows.iter()
        .filter_map(|r| {
            let d = rows.iter().find(|s| s.n == 2 * r.n)?;
            (r.median_ms > 0.0).then(|| (r.n, d.median_ms / r.median_ms))
        })
        .collect()
}

pub fn format_table(rows: &[SummaryRow], q: u64) -> String {
    let mut s = format!("q = {q}\n{:>6} {:>7} {:>12} {:>12} {:>9} {:>6} {:>9} {:>6}\n", "n", "trials", "median (s)", "mean (s)", "solution", "nosol", "irregular", "error");
    for r in rows {
        s.push_str(&format!(
            "{:>6} {:>7} {:>12.4} {:>12.4} {:>9} {:>6} {:>9} {:>6}\n",
            r.n,
            r.trials,
            r.median_ms / 1e3,
            r.mean_ms / 1e3,
            r.solutions,
            r.nosol,
            r.irregular,
            r.errors
        ));
    }
    for (n, ratio) in growth_ratios(rows) {
        s.push_str(&format!("time({})/time({n}) = {ratio:.1}\n", 2 * n));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_instance;

    #[test]
    fn deterministic() {
        let a = generate(3, 3, 7, InstanceKind::Equivalent, 1).unwrap();
        let b = generate(3, 3, 7, InstanceKind::Equivalent, 1).unwrap();
        assert_eq!(write_instance(&a.f, &a.g), write_instance(&b.f, &b.g));
        let c = generate(3, 3, 7, InstanceKind::Equivalent, 2).unwrap();
        assert_ne!(write_instance(&a.f, &a.g), write_instance(&c.f, &c.g));
        assert!(a.f.substitute(a.a.as_ref().unwrap()).same_polys(&a.g));
    }

    #[test]
    fn kinds() {
        let g = generate(3, 2, 7, InstanceKind::Irregular, 1).unwrap();
        assert!(matches!(solve(&g.f, &g.g, 1, &SolveOptions::default()).unwrap(), Outcome::Irregular(_)));
        let g = generate(2, 2, 3, InstanceKind::Inequivalent, 5).unwrap();
        assert!(!brute_force_equivalence(&g.f, &g.g).unwrap().equivalent);
        let g = generate(2, 2, 3, InstanceKind::EquivalentExtOnly, 5).unwrap();
        assert!(!brute_force_equivalence(&g.f, &g.g).unwrap().equivalent);
        let opts = SolveOptions {
            allow_extension: true,
            ..SolveOptions::default()
        };
        assert!(solve(&g.f, &g.g, 1, &opts).unwrap().is_solution());
        assert!(matches!(
            generate(4, 2, 2, InstanceKind::EquivalentExtOnly, 1),
            Err(Error::UnsupportedKind(_))
        ));
    }

    #[test]
    fn bench_streams() {
        assert_ne!(trial_seeds(7, 0), trial_seeds(7, 1));
        assert_eq!(trial_seeds(7, 3), trial_seeds(7, 3));
        let cfg = BenchConfig {
            n_list: vec![3, 6],
            m_rule: MRule::EqualN,
            q: 65521,
            algo: Algo::Generic,
            kind: InstanceKind::Equivalent,
            trials: 2,
            seed: 7,
            parallel: true,
        };
        let recs = bench(&cfg);
        assert_eq!(recs.len(), 4);
        assert!(recs.iter().all(|r| r.verdict == "solution" && r.solution_field_degree == 1));
        let rows = summarize(&recs);
        assert_eq!(growth_ratios(&rows).len(), 1);
        assert!(format_table(&rows, 65521).contains("time(6)/time(3)"));
    }
}

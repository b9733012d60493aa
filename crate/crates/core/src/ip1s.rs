//! The IP1S solver: find `A` with `f(Ax) = g(x)` for quadratic systems.
//!
//! Pipeline: homogenize affine instances, drop redundant variables, bring both
//! systems to a canonical form with equal first matrices, compute the space of
//! intertwiners of the normalized Hessians, draw an invertible `Y` from it and
//! correct it into an orthogonal one with a matrix square root.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::factor;
use crate::field::{El, FieldCtx};
use crate::matrix::intertwine::intertwiner_space;
use crate::matrix::jordan::rational_canonical_form;
use crate::matrix::MatrixF;
use crate::quadform::{
    affine_to_linear, canonicalize_forms, essential_reduce, homogenize, linear_to_affine, upper, Canonical,
    CanonicalInstance, QuadSystem,
};
use crate::sqrtmat::{sqrt_char2, sqrt_matrix, Backend};

/// Random draws from the conjugacy space before falling back.
pub const SAMPLE_BUDGET: usize = 32;
/// Resamples allowed while waiting for a diagonalizable `Z` in characteristic 2.
pub const CHAR2_BUDGET: usize = 64;
/// Exhaustive enumeration of the conjugacy space is used up to this many points.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Algo {
    #[default]
    Auto,
    Canonical,
    Generic,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub algo: Algo,
    /// Accept solutions that only exist over an extension of the base field.
    pub allow_extension: bool,
    pub backend: Backend,
    pub sample_budget: usize,
    pub char2_budget: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            algo: Algo::Auto,
            allow_extension: false,
            backend: Backend::Companion,
            sample_budget: SAMPLE_BUDGET,
            char2_budget: CHAR2_BUDGET,
        }
    }
}

/// Span of matrices containing every invertible intertwiner.
#[derive(Clone, Debug)]
pub struct ConjugacySpaceBasis {
    pub basis: Vec<MatrixF>,
}

impl ConjugacySpaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolutionMode {
    Assembled(MatrixF),
    /// `f(Sx) = g(Tx)`; the solution is `S T⁻¹`.
    Factored { s: MatrixF, t: MatrixF },
}

/// Canonicalization data behind a solution.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub p: MatrixF,
    pub q: MatrixF,
    pub nu: Vec<El>,
    pub lambda: Vec<El>,
}

#[derive(Clone, Debug)]
pub struct SolutionRepr {
    pub mode: SolutionMode,
    /// Tower level holding the solution (the instance level when rational).
    pub field_level: usize,
    /// Translation `b` of an affine solution `x ↦ Ax + b`.
    pub translation: Option<Vec<El>>,
    pub provenance: Option<Provenance>,
}

impl SolutionRepr {
    fn assembled(a: MatrixF) -> SolutionRepr {
        let l = a.level();
        SolutionRepr {
            mode: SolutionMode::Assembled(a),
            field_level: l,
            translation: None,
            provenance: None,
        }
    }

    /// The solution matrix, forming `S T⁻¹` if needed.
    pub fn matrix(&self) -> Result<MatrixF> {
        match &self.mode {
            SolutionMode::Assembled(a) => Ok(a.clone()),
            SolutionMode::Factored { s, t } => Ok(s.mul(&t.inverse()?)),
        }
    }

    fn map(&self, left: &MatrixF, right: &MatrixF) -> Result<SolutionMode> {
        Ok(match &self.mode {
            SolutionMode::Assembled(a) => SolutionMode::Assembled(left.mul(a).mul(&right.inverse()?)),
            SolutionMode::Factored { s, t } => SolutionMode::Factored {
                s: left.mul(s),
                t: right.mul(t),
            },
        })
    }
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Solution(SolutionRepr),
    NoSol(String),
    Irregular(String),
}

impl Outcome {
    pub fn is_solution(&self) -> bool {
        matches!(self, Outcome::Solution(_))
    }
}

/// Canonical form of a pair of systems; see [`canonicalize_forms`].
pub fn canonicalize(f: &QuadSystem, g: &QuadSystem, seed: u64) -> Result<Canonical> {
    canonicalize_forms(f, g, seed)
}

/// Normalized Hessians `M⁻¹ Hess f̃_i`, `M⁻¹ Hess g̃_i` where `M` is the
/// metric (`D` or `Σ(δ)`).
fn normalized(inst: &CanonicalInstance) -> Result<(Vec<MatrixF>, Vec<MatrixF>)> {
    let minv = inst.metric().inverse()?;
    let a = (0..inst.f.len()).map(|i| minv.mul(&inst.hess_f(i))).collect();
    let b = (0..inst.g.len()).map(|i| minv.mul(&inst.hess_g(i))).collect();
    Ok((a, b))
}

/// Intertwiners `Y` with `M⁻¹H_i Y = Y M⁻¹H'_i` for all `i`.
pub fn conjugacy_space(inst: &CanonicalInstance, seed: u64) -> Result<ConjugacySpaceBasis> {
    let (a, b) = normalized(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ConjugacySpaceBasis {
        basis: intertwiner_space(&a, &b, &mut rng),
    })
}

fn random_member<R: Rng + ?Sized>(basis: &[MatrixF], ctx: &Arc<FieldCtx>, l: usize, rng: &mut R) -> MatrixF {
    let cs: Vec<El> = basis.iter().map(|_| ctx.random_el(l, rng)).collect();
    let lifted: Vec<MatrixF> = basis.iter().map(|b| b.lift_to(ctx, l)).collect();
    MatrixF::combination(&lifted, &cs)
}

fn member_by_index(basis: &[MatrixF], idx: u64, q: u64) -> MatrixF {
    let ctx = basis[0].ctx();
    let l = basis[0].level();
    let mut t = idx;
    let cs: Vec<El> = basis
        .iter()
        .map(|_| {
            let e = ctx.element_from_index(l, t % q);
            t /= q;
            e
        })
        .collect();
    MatrixF::combination(basis, &cs)
}

fn space_size(basis: &[MatrixF]) -> Option<u64> {
    let b = basis.first()?;
    let q = b.ctx().order_u64(b.level())?;
    q.checked_pow(basis.len() as u32).filter(|&t| t <= EXHAUSTIVE_LIMIT)
}

/// Degree of the amplifying extension: `⌈log_q(2¹⁰ n)⌉`, at least 2.
pub fn amplification_degree(q: u64, n: usize) -> usize {
    let target = 1024.0 * n as f64;
    let d = (target.ln() / (q as f64).ln()).ceil() as usize;
    d.max(2)
}

/// An invertible member of the span: random draws, then exhaustive search
/// for small spaces, then draws with scalars from an extension.
pub fn sample_invertible(space: &ConjugacySpaceBasis, seed: u64) -> Result<MatrixF> {
    let basis = &space.basis;
    let Some(b0) = basis.first() else {
        return Err(Error::NoSolution);
    };
    let ctx = b0.ctx().clone();
    let l = b0.level();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLE_BUDGET {
        let y = random_member(basis, &ctx, l, &mut rng);
        if y.is_invertible() {
            return Ok(y);
        }
    }
    if let Some(total) = space_size(basis) {
        let q = ctx.order_u64(l).unwrap();
        for idx in 1..total {
            let y = member_by_index(basis, idx, q);
            if y.is_invertible() {
                return Ok(y);
            }
        }
        return Err(Error::NoSolution);
    }
    let (ext, el) = amplify(&ctx, l, b0.rows(), &mut rng)?;
    for _ in 0..SAMPLE_BUDGET {
        let y = random_member(basis, &ext, el, &mut rng);
        if y.is_invertible() {
            return Ok(y);
        }
    }
    Err(Error::NoSolution)
}

fn amplify<R: Rng + ?Sized>(ctx: &Arc<FieldCtx>, l: usize, n: usize, rng: &mut R) -> Result<(Arc<FieldCtx>, usize)> {
    let base = ctx.truncate(l);
    let q = base.order_u64(l).unwrap_or(u64::MAX);
    let d = amplification_degree(q, n);
    let irr = factor::random_irreducible(base.fq(l), d, rng);
    let ext = base.extend("t", &irr)?;
    let top = ext.top();
    Ok((ext, top))
}

/// Correct an invertible intertwiner `Y` into a `D`-orthogonal solution
/// `A = Y W⁻¹` with `W² = Z = D⁻¹YᵀDY`.  The result is assembled when it is
/// defined over the level of `Y`; otherwise it is returned factored as
/// `S = A T`, `T` with `T` the rational canonical basis of `Z`, which is
/// defined over the level of `Y`.
pub fn orthogonalize(y: &MatrixF, inst: &CanonicalInstance, backend: Backend) -> Result<SolutionRepr> {
    let base = y.level();
    let d = inst.d.lift_to(y.ctx(), base);
    let z = d.inverse()?.mul(&y.transpose()).mul(&d).mul(y);
    if z.is_identity() {
        return Ok(SolutionRepr::assembled(y.clone()));
    }
    let s0 = z.get(0, 0).to_vec();
    if z == MatrixF::identity(y.ctx(), base, z.rows()).scale(&s0) && y.ctx().is_square_el(base, &s0) {
        let w = y.ctx().sqrt_el(base, &s0)?;
        return Ok(SolutionRepr::assembled(y.scale(&y.ctx().inv(base, &w)?)));
    }
    let r = sqrt_matrix(&z, backend)?;
    let w = r.w;
    let a = y.lift_to(w.ctx(), w.level()).mul(&w.inverse()?);
    if let Some(ab) = a.descend(base) {
        let ab = ab.with_ctx(y.ctx());
        return Ok(SolutionRepr::assembled(ab));
    }
    let lev = a.level();
    let t = rational_canonical_form(&z)?.t.lift_to(a.ctx(), lev);
    Ok(SolutionRepr {
        mode: SolutionMode::Factored { s: a.mul(&t), t },
        field_level: lev,
        translation: None,
        provenance: None,
    })
}

/// `f(Sx) = g(Tx)` coefficientwise for the canonical systems.
fn congruent(fs: &[MatrixF], gs: &[MatrixF], s: &MatrixF, t: &MatrixF) -> bool {
    let st = s.transpose();
    let tt = t.transpose();
    fs.iter()
        .zip(gs)
        .all(|(u, v)| upper(&st.mul(u).mul(s)) == upper(&tt.mul(v).mul(t)))
}

/// Exact check of a canonical-level solution: every form is preserved, which
/// includes the orthogonality condition for the first one.
pub fn verify(sol: &SolutionRepr, inst: &CanonicalInstance) -> bool {
    match &sol.mode {
        SolutionMode::Assembled(a) => {
            let i = MatrixF::identity(a.ctx(), a.level(), a.rows());
            if a.rows() != inst.n || !a.is_invertible() {
                return false;
            }
            let orth = if inst.is_char2() {
                true
            } else {
                let d = inst.d.lift_to(a.ctx(), a.level());
                a.transpose().mul(&d).mul(a) == d
            };
            orth && congruent(&inst.f, &inst.g, a, &i)
        }
        SolutionMode::Factored { s, t } => s.is_invertible() && t.is_invertible() && congruent(&inst.f, &inst.g, s, t),
    }
}

enum Char2Step {
    Found(MatrixF),
    NotDiagonalizable,
    DeltaFailure,
}

fn orthogonalize_char2(y: &MatrixF, inst: &CanonicalInstance) -> Result<Char2Step> {
    let s = inst.metric();
    let z = s.inverse()?.mul(&y.transpose()).mul(&s).mul(y);
    let w = if z.is_identity() {
        z
    } else {
        match sqrt_char2(&z) {
            Ok(r) if r.as_polynomial.is_some() => r.w,
            Ok(_) | Err(Error::NoSquareRoot(_)) => return Ok(Char2Step::NotDiagonalizable),
            Err(e) => return Err(e),
        }
    };
    let a = y.mul(&w.inverse()?);
    let i = MatrixF::identity(a.ctx(), a.level(), a.rows());
    if congruent(&inst.f, &inst.g, &a, &i) {
        Ok(Char2Step::Found(a))
    } else {
        Ok(Char2Step::DeltaFailure)
    }
}

/// Search the conjugacy space of a canonical instance for a solution.
fn solve_canonical(inst: &CanonicalInstance, seed: u64, opts: &SolveOptions) -> Result<Outcome> {
    let ctx = inst.ctx.clone();
    let l = inst.level;
    let n = inst.n;
    let ident = MatrixF::identity(&ctx, l, n);
    if congruent(&inst.f, &inst.g, &ident, &ident) {
        return Ok(Outcome::Solution(SolutionRepr::assembled(ident)));
    }
    let space = conjugacy_space(inst, seed)?;
    if space.dim() == 0 {
        return Ok(Outcome::NoSol("no invertible intertwiner exists".into()));
    }
    let basis = &space.basis;
    let char2 = inst.is_char2();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut extension: Option<SolutionRepr> = None;
    let mut any_invertible = false;
    let mut nondiag = 0usize;
    let mut delta_fail = 0usize;
    let draws = if char2 { opts.char2_budget } else { opts.sample_budget };
    for _ in 0..draws {
        let y = random_member(basis, &ctx, l, &mut rng);
        if !y.is_invertible() {
            continue;
        }
        any_invertible = true;
        if char2 {
            match orthogonalize_char2(&y, inst)? {
                Char2Step::Found(a) => return Ok(Outcome::Solution(SolutionRepr::assembled(a))),
                Char2Step::NotDiagonalizable => nondiag += 1,
                Char2Step::DeltaFailure => delta_fail += 1,
            }
            continue;
        }
        let sol = orthogonalize(&y, inst, opts.backend)?;
        if !verify(&sol, inst) {
            continue;
        }
        if sol.field_level == l {
            return Ok(Outcome::Solution(sol));
        }
        if extension.is_none() {
            extension = Some(sol);
        }
        if space.dim() == 1 {
            // Y is determined up to a scalar, which does not change rationality
            break;
        }
    }
    // on a line, rationality of the corrected Y does not depend on the draw
    let line_decided = space.dim() == 1 && any_invertible && !char2;
    if let (Some(total), false) = (space_size(basis), line_decided) {
        let q = ctx.order_u64(l).unwrap();
        for idx in 1..total {
            let y = member_by_index(basis, idx, q);
            if congruent(&inst.f, &inst.g, &y, &ident) {
                return Ok(Outcome::Solution(SolutionRepr::assembled(y)));
            }
        }
        return Ok(match extension {
            Some(sol) if opts.allow_extension => Outcome::Solution(sol),
            Some(_) => Outcome::NoSol("equivalent only over an extension field (exhaustive search)".into()),
            None => Outcome::NoSol("exhaustive search of the conjugacy space found no solution".into()),
        });
    }
    if let Some(sol) = extension {
        return Ok(if opts.allow_extension {
            Outcome::Solution(sol)
        } else {
            Outcome::NoSol("no solution over the base field found; one exists over an extension".into())
        });
    }
    if char2 && any_invertible {
        if delta_fail == 0 && nondiag > 0 {
            return Err(Error::LoopBudgetExceeded(format!(
                "{nondiag} samples gave a non-diagonalizable Z"
            )));
        }
        return Ok(Outcome::NoSol("candidates violate the diagonal constraints".into()));
    }
    if any_invertible {
        return Ok(Outcome::NoSol("sampled solutions failed verification".into()));
    }
    // every draw was singular: retry with scalars from an extension
    let (ext, el) = amplify(&ctx, l, n, &mut rng)?;
    for _ in 0..draws {
        let y = random_member(basis, &ext, el, &mut rng);
        if !y.is_invertible() {
            continue;
        }
        if char2 {
            if let Char2Step::Found(a) = orthogonalize_char2(&y, inst)? {
                let sol = SolutionRepr::assembled(a);
                return Ok(extension_outcome(sol, l, opts));
            }
            continue;
        }
        let sol = orthogonalize(&y, inst, opts.backend)?;
        if verify(&sol, inst) {
            return Ok(extension_outcome(sol, l, opts));
        }
    }
    Ok(Outcome::NoSol("every sampled intertwiner is singular".into()))
}

fn extension_outcome(mut sol: SolutionRepr, base: usize, opts: &SolveOptions) -> Outcome {
    if let SolutionMode::Assembled(a) = &sol.mode {
        if let Some(ab) = a.descend(base) {
            sol.mode = SolutionMode::Assembled(ab);
            sol.field_level = base;
            return Outcome::Solution(sol);
        }
    }
    if opts.allow_extension {
        Outcome::Solution(sol)
    } else {
        Outcome::NoSol("no solution over the base field found; one exists over an extension".into())
    }
}

/// Solve a pair of homogeneous systems whose variables are all essential.
fn solve_reduced(f: &QuadSystem, g: &QuadSystem, seed: u64, opts: &SolveOptions) -> Result<Outcome> {
    let inst = match canonicalize(f, g, seed) {
        Ok(Canonical::Instance(inst)) => inst,
        Ok(Canonical::NoSol(msg)) => return Ok(Outcome::NoSol(msg)),
        Err(Error::Irregular(msg)) => return Ok(Outcome::Irregular(msg)),
        Err(e) => return Err(e),
    };
    match solve_canonical(&inst, seed, opts)? {
        Outcome::Solution(sol) => {
            let p = inst.p.clone();
            let q = inst.q.clone();
            let mode = sol.map(&p, &q)?;
            Ok(Outcome::Solution(SolutionRepr {
                mode,
                field_level: sol.field_level,
                translation: None,
                provenance: Some(Provenance {
                    p,
                    q,
                    nu: inst.nu.clone(),
                    lambda: inst.lambda.clone(),
                }),
            }))
        }
        other => Ok(other),
    }
}

/// `diag(X, I)` of size `n`.
fn pad(x: &MatrixF, n: usize) -> MatrixF {
    let mut m = MatrixF::identity(x.ctx(), x.level(), n);
    m.set_block(0, 0, x);
    m
}

fn solve_homogeneous(f: &QuadSystem, g: &QuadSystem, seed: u64, opts: &SolveOptions) -> Result<Outcome> {
    let n = f.n;
    let (sf, mf, rf) = essential_reduce(f);
    let (sg, mg, rg) = essential_reduce(g);
    if sf != sg {
        return Ok(Outcome::NoSol(format!("{sf} versus {sg} essential variables")));
    }
    if sf == 0 {
        // both systems vanish identically
        return Ok(Outcome::Solution(SolutionRepr::assembled(MatrixF::identity(&f.ctx, f.level, n))));
    }
    let inner = match opts.algo {
        Algo::Generic => solve_generic_inner(&rf, &rg, seed, opts),
        _ => solve_reduced(&rf, &rg, seed, opts),
    };
    let inner = match inner {
        Ok(o) => o,
        Err(Error::NoSolution) => return Ok(Outcome::NoSol("no invertible intertwiner".into())),
        Err(e) => return Err(e),
    };
    let Outcome::Solution(sol) = inner else {
        return Ok(inner);
    };
    if sf == n && mf.is_identity() && mg.is_identity() {
        return Ok(Outcome::Solution(sol));
    }
    let mode = match &sol.mode {
        SolutionMode::Assembled(a) => {
            SolutionMode::Assembled(mf.mul(&pad(a, n)).mul(&mg.inverse()?))
        }
        SolutionMode::Factored { s, t } => SolutionMode::Factored {
            s: mf.mul(&pad(s, n)),
            t: mg.mul(&pad(t, n)),
        },
    };
    Ok(Outcome::Solution(SolutionRepr { mode, ..sol }))
}

/// Same context with `level` as its top.
fn at_level(sys: &QuadSystem) -> QuadSystem {
    let ctx = sys.ctx.truncate(sys.level);
    let mut s = sys.clone();
    s.mats = s.mats.iter().map(|m| m.with_ctx(&ctx)).collect();
    s.ctx = ctx;
    s
}

/// Solve `f(Ax + b) = g(x)` (`b = 0` for homogeneous inputs).  Every returned
/// solution has been checked exactly against the input systems.
pub fn solve(f: &QuadSystem, g: &QuadSystem, seed: u64, opts: &SolveOptions) -> Result<Outcome> {
    if f.n != g.n || f.m() != g.m() {
        return Ok(Outcome::NoSol("systems have different shapes".into()));
    }
    if *f.ctx.truncate(f.level) != *g.ctx.truncate(g.level) || f.level != g.level {
        return Err(Error::IncompatibleContexts);
    }
    let f = at_level(f);
    let g = at_level(g);
    if f.n == 0 {
        return Ok(Outcome::Solution(SolutionRepr::assembled(MatrixF::zeros(&f.ctx, f.level, 0, 0))));
    }
    let affine = !f.is_homogeneous() || !g.is_homogeneous();
    let out = if affine {
        let (hf, hg) = homogenize(&f, &g);
        match solve_homogeneous(&hf, &hg, seed, opts)? {
            Outcome::Solution(sol) => {
                let a = sol.matrix()?;
                let (a, b) = linear_to_affine(&a)?;
                let field_level = a.level();
                Outcome::Solution(SolutionRepr {
                    mode: SolutionMode::Assembled(a),
                    field_level,
                    translation: Some(b),
                    provenance: sol.provenance,
                })
            }
            other => other,
        }
    } else {
        solve_homogeneous(&f, &g, seed, opts)?
    };
    if let Outcome::Solution(sol) = &out {
        if !check_solution(&f, &g, sol)? {
            return Err(Error::InvalidInput("internal: solution failed final verification".into()));
        }
    }
    Ok(out)
}

/// Exact check of a solution against the original systems.
pub fn check_solution(f: &QuadSystem, g: &QuadSystem, sol: &SolutionRepr) -> Result<bool> {
    match (&sol.mode, &sol.translation) {
        (SolutionMode::Assembled(a), None) => {
            let lhs = f.substitute(a);
            Ok(a.is_invertible() && lhs.same_polys(&g.lift_to(&lhs.ctx, lhs.level)))
        }
        (SolutionMode::Assembled(a), Some(b)) => {
            let ap = affine_to_linear(a, b);
            let (hf, hg) = homogenize(f, g);
            let lhs = hf.substitute(&ap);
            Ok(a.is_invertible() && lhs.same_polys(&hg.lift_to(&lhs.ctx, lhs.level)))
        }
        (SolutionMode::Factored { s, t }, _) => {
            let (hf, hg) = if sol.translation.is_some() { homogenize(f, g) } else { (f.clone(), g.clone()) };
            let lhs = hf.substitute(s);
            let rhs = hg.substitute(t);
            Ok(s.is_invertible() && t.is_invertible() && lhs.same_polys(&rhs))
        }
    }
}

/// Result of the generic algorithm, which also reports whether the scaling
/// needed a quadratic extension.
fn solve_generic_inner(f: &QuadSystem, g: &QuadSystem, seed: u64, opts: &SolveOptions) -> Result<Outcome> {
    match solve_generic(f, g, seed)? {
        GenericOutcome::Solution { a, over_extension } => {
            if over_extension && !opts.allow_extension {
                return Ok(Outcome::NoSol("equivalent only over a quadratic extension".into()));
            }
            Ok(Outcome::Solution(SolutionRepr::assembled(a)))
        }
        GenericOutcome::NoSol(msg) => Ok(Outcome::NoSol(msg)),
    }
}

#[derive(Clone, Debug)]
pub enum GenericOutcome {
    Solution { a: MatrixF, over_extension: bool },
    NoSol(String),
}

/// Simplified algorithm for generic instances: no canonical form.  The
/// intertwiners of `H_1⁻¹H_i` and `H'_1⁻¹H'_i` are computed from a few
/// equations (all of them if the space is not a line), and the single
/// scale `λ` with `λ²(Y₀ᵀH_1Y₀)_{ij} = (H'_1)_{ij}` is solved for.
pub fn solve_generic(f: &QuadSystem, g: &QuadSystem, seed: u64) -> Result<GenericOutcome> {
    if f.n != g.n || f.m() != g.m() {
        return Ok(GenericOutcome::NoSol("systems have different shapes".into()));
    }
    let f = at_level(f);
    let g = at_level(g);
    let ctx = f.ctx.clone();
    let l = f.level;
    let m = f.m();
    let hf = f.hessians();
    let hg = g.hessians();
    let Some(k) = (0..m).find(|&i| hf[i].is_invertible()) else {
        return Err(Error::GenericityFailure("no invertible Hessian".into()));
    };
    if !hg[k].is_invertible() {
        return Ok(GenericOutcome::NoSol("pivot Hessians differ in rank".into()));
    }
    let h1i = hf[k].inverse()?;
    let g1i = hg[k].inverse()?;
    let others: Vec<usize> = (0..m).filter(|&i| i != k).collect();
    let a: Vec<MatrixF> = std::iter::once(MatrixF::identity(&ctx, l, f.n))
        .chain(others.iter().map(|&i| h1i.mul(&hf[i])))
        .collect();
    let b: Vec<MatrixF> = std::iter::once(MatrixF::identity(&ctx, l, f.n))
        .chain(others.iter().map(|&i| g1i.mul(&hg[i])))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let few = a.len().min(3);
    let mut basis = intertwiner_space(&a[..few], &b[..few], &mut rng);
    if basis.len() > 1 && few < a.len() {
        basis = intertwiner_space(&a, &b, &mut rng);
    }
    match basis.len() {
        0 => return Ok(GenericOutcome::NoSol("the intertwining system has only the zero solution".into())),
        1 => {}
        d => return Err(Error::GenericityFailure(format!("intertwiner space has dimension {d}"))),
    }
    let y0 = &basis[0];
    if !y0.is_invertible() {
        return Ok(GenericOutcome::NoSol("the intertwiner line contains no invertible matrix".into()));
    }
    let lhs = y0.transpose().mul(&hf[k]).mul(y0);
    let n = f.n;
    let Some((i, j)) = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| !FieldCtx::is_zero_el(lhs.get(i, j)))
    else {
        return Ok(GenericOutcome::NoSol("degenerate scaling equation".into()));
    };
    let c = ctx.div(l, hg[k].get(i, j), lhs.get(i, j))?;
    if FieldCtx::is_zero_el(&c) {
        return Ok(GenericOutcome::NoSol("scaling equation forces zero".into()));
    }
    let (ectx, el, lambda, over_extension) = if ctx.is_square_el(l, &c) {
        (ctx.clone(), l, ctx.sqrt_el(l, &c)?, false)
    } else {
        let ext = ctx.extend("s", &[ctx.neg(&c), ctx.zero(l), ctx.one(l)])?;
        let top = ext.top();
        let y = ext.generator(top);
        (ext, top, y, true)
    };
    let y0e = y0.lift_to(&ectx, el);
    // random-vector screening before the exact check
    let r: Vec<El> = (0..n).map(|_| ectx.random_el(el, &mut rng)).collect();
    let mut found: Vec<MatrixF> = Vec::new();
    for sign in [lambda.clone(), ectx.neg(&lambda)] {
        let cand = y0e.scale(&sign);
        let ct = cand.transpose();
        let screened = (0..m).all(|i| {
            let hi = hf[i].lift_to(&ectx, el);
            let gi = hg[i].lift_to(&ectx, el);
            ct.mul(&hi).mul(&cand).mul_vec(&r) == gi.mul_vec(&r)
        });
        if screened && f.substitute(&cand).same_polys(&g.lift_to(&ectx, el)) {
            found.push(cand);
        }
    }
    found.sort_by(|x, y| x.cmp_lex(y));
    match found.into_iter().next() {
        Some(a) => Ok(GenericOutcome::Solution { a, over_extension }),
        None => Ok(GenericOutcome::NoSol("scaled intertwiner is not a solution".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(p: u64) -> Arc<FieldCtx> {
        FieldCtx::prime(p).unwrap()
    }

    fn m(ctx: &Arc<FieldCtx>, rows: &[&[i64]]) -> MatrixF {
        MatrixF::from_i64(ctx, &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    fn random_system(ctx: &Arc<FieldCtx>, n: usize, m: usize, rng: &mut ChaCha8Rng) -> QuadSystem {
        QuadSystem::new(ctx, 0, n, (0..m).map(|_| MatrixF::random(ctx, 0, n, n, rng)).collect())
    }

    fn instance(inst_f: &QuadSystem, inst_g: &QuadSystem) -> CanonicalInstance {
        match canonicalize(inst_f, inst_g, 1).unwrap() {
            Canonical::Instance(c) => c,
            Canonical::NoSol(s) => panic!("{s}"),
        }
    }

    #[test]
    fn single_form_space_is_full() {
        let k7 = k(7);
        let f = QuadSystem::from_i64(&k7, &[vec![vec![1, 0], vec![0, 1]]]);
        let c = instance(&f, &f);
        assert_eq!(conjugacy_space(&c, 1).unwrap().dim(), 4);
    }

    #[test]
    fn sample_examples() {
        let k3 = k(3);
        let sp = ConjugacySpaceBasis {
            basis: vec![m(&k3, &[&[1, 0], &[0, 0]]), m(&k3, &[&[0, 0], &[0, 1]])],
        };
        let y = sample_invertible(&sp, 3).unwrap();
        assert!(y.is_diagonal() && y.is_invertible());
        let sp = ConjugacySpaceBasis { basis: vec![] };
        assert_eq!(sample_invertible(&sp, 3).unwrap_err(), Error::NoSolution);
        let sp = ConjugacySpaceBasis {
            basis: vec![MatrixF::identity(&k3, 0, 2)],
        };
        let y = sample_invertible(&sp, 3).unwrap();
        assert!(y.is_diagonal() && y.get(0, 0) == y.get(1, 1) && y.is_invertible());
    }

    #[test]
    fn orthogonalize_examples() {
        let k7 = k(7);
        let f = QuadSystem::from_i64(&k7, &[vec![vec![1, 0], vec![0, 1]]]);
        let c = instance(&f, &f);
        assert!(c.d.is_identity());
        let y = m(&k7, &[&[2, 0], &[0, 1]]);
        let sol = orthogonalize(&y, &c, Backend::Jordan).unwrap();
        assert_eq!(sol.mode, SolutionMode::Assembled(MatrixF::identity(&k7, 0, 2)));
        let y = m(&k7, &[&[0, 1], &[6, 0]]);
        let sol = orthogonalize(&y, &c, Backend::Jordan).unwrap();
        assert_eq!(sol.mode, SolutionMode::Assembled(y));
    }

    #[test]
    fn orthogonalize_factored_over_extension() {
        let k101 = k(101);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_system(&k101, 6, 1, &mut rng);
        let c = instance(&f, &f);
        let mut factored = 0;
        for _ in 0..10 {
            let y = MatrixF::random_invertible(&k101, 0, 6, &mut rng);
            let sol = orthogonalize(&y, &c, Backend::Companion).unwrap();
            assert!(verify(&sol, &c));
            if let SolutionMode::Factored { s, t } = &sol.mode {
                factored += 1;
                let mut s2 = s.clone();
                let v = s2.ctx().add(s2.get(0, 0), &s2.ctx().one(s2.level()));
                s2.set(0, 0, &v);
                let bad = SolutionRepr {
                    mode: SolutionMode::Factored { s: s2, t: t.clone() },
                    ..sol.clone()
                };
                assert!(!verify(&bad, &c));
            }
        }
        assert!(factored > 0);
    }

    #[test]
    fn identity_solution_verifies() {
        let k7 = k(7);
        let f = QuadSystem::from_i64(&k7, &[vec![vec![1, 0], vec![0, 1]], vec![vec![0, 1], vec![0, 0]]]);
        let c = instance(&f, &f);
        let sol = SolutionRepr::assembled(MatrixF::identity(&k7, 0, 2));
        assert!(verify(&sol, &c));
        let out = solve(&f, &f, 1, &SolveOptions::default()).unwrap();
        assert!(out.is_solution());
    }

    #[test]
    fn roundtrip_odd() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (p, n, m) in [(101u64, 3usize, 3usize), (65521, 6, 4), (7, 3, 2), (65521, 10, 3)] {
            let kp = k(p);
            for seed in 0..4 {
                let f = random_system(&kp, n, m, &mut rng);
                let a = MatrixF::random_invertible(&kp, 0, n, &mut rng);
                let g = f.substitute(&a);
                let out = solve(&f, &g, seed, &SolveOptions::default()).unwrap();
                let Outcome::Solution(sol) = out else { panic!("{out:?}") };
                assert!(check_solution(&f, &g, &sol).unwrap());
                assert_eq!(sol.field_level, 0);
            }
        }
    }

    #[test]
    fn generic_dimension_one() {
        let k = k(65521);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_system(&k, 10, 3, &mut rng);
        let a = MatrixF::random_invertible(&k, 0, 10, &mut rng);
        let g = f.substitute(&a);
        let c = instance(&f, &g);
        assert_eq!(conjugacy_space(&c, 3).unwrap().dim(), 1);
    }

    #[test]
    fn independent_systems_nosol() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kp = k(65521);
        let f = random_system(&kp, 5, 3, &mut rng);
        let g = random_system(&kp, 5, 3, &mut rng);
        let c = instance(&f, &g);
        assert_eq!(conjugacy_space(&c, 3).unwrap().dim(), 0);
        assert!(matches!(solve(&f, &g, 1, &SolveOptions::default()).unwrap(), Outcome::NoSol(_)));
        assert!(matches!(solve_generic(&f, &g, 1).unwrap(), GenericOutcome::NoSol(_)));
    }

    #[test]
    fn irregular_instance() {
        let k7 = k(7);
        let f = QuadSystem::from_i64(
            &k7,
            &[
                vec![vec![0, 0, 1], vec![0, 0, 0], vec![0, 0, 0]],
                vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 0, 0]],
            ],
        );
        assert!(matches!(solve(&f, &f, 1, &SolveOptions::default()).unwrap(), Outcome::Irregular(_)));
    }

    #[test]
    fn affine_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let kp = k(101);
        for _ in 0..3 {
            let n = 3;
            let f = random_system(&kp, n, 2, &mut rng).with_affine(
                (0..2).map(|_| (0..n).map(|_| kp.random_el(0, &mut rng)).collect()).collect(),
                (0..2).map(|_| kp.random_el(0, &mut rng)).collect(),
            );
            let a = MatrixF::random_invertible(&kp, 0, n, &mut rng);
            let b: Vec<El> = (0..n).map(|_| kp.random_el(0, &mut rng)).collect();
            let (hf, _) = homogenize(&f, &f);
            let g = hf.substitute(&affine_to_linear(&a, &b)).dehomogenize();
            let out = solve(&f, &g, 4, &SolveOptions::default()).unwrap();
            let Outcome::Solution(sol) = out else { panic!("{out:?}") };
            assert!(sol.translation.is_some());
            assert!(check_solution(&f, &g, &sol).unwrap());
        }
    }

    #[test]
    fn roundtrip_char2() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let f4 = crate::field::prime_extension(2, &[1, 1, 1]).unwrap();
        for ctx in [k(2), f4] {
            let l = ctx.top();
            for n in [2usize, 4, 6] {
                let mut found = 0;
                for seed in 0..6 {
                    let f = QuadSystem::new(&ctx, l, n, (0..n).map(|_| MatrixF::random(&ctx, l, n, n, &mut rng)).collect());
                    let a = MatrixF::random_invertible(&ctx, l, n, &mut rng);
                    let g = f.substitute(&a);
                    match solve(&f, &g, seed, &SolveOptions::default()) {
                        Ok(Outcome::Solution(sol)) => {
                            assert!(check_solution(&f, &g, &sol).unwrap());
                            found += 1;
                        }
                        Ok(Outcome::Irregular(_)) | Err(Error::LoopBudgetExceeded(_)) => {}
                        other => panic!("{other:?}"),
                    }
                }
                assert!(found > 0, "n = {n}");
            }
        }
    }

    #[test]
    fn char2_odd_dimension_irregular() {
        let k2 = k(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = QuadSystem::new(&k2, 0, 3, (0..3).map(|_| MatrixF::random(&k2, 0, 3, 3, &mut rng)).collect());
        let (s, _, _) = essential_reduce(&f);
        if s == 3 {
            assert!(matches!(solve(&f, &f, 1, &SolveOptions::default()).unwrap(), Outcome::Irregular(_) | Outcome::Solution(_)));
        }
        assert!(matches!(
            crate::quadform::regular_combination(&f, 1),
            Err(Error::Irregular(_))
        ));
    }

    #[test]
    fn generic_roundtrip_and_extension() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kp = k(65521);
        let f = random_system(&kp, 8, 8, &mut rng);
        let a = MatrixF::random_invertible(&kp, 0, 8, &mut rng);
        let g = f.substitute(&a);
        match solve_generic(&f, &g, 1).unwrap() {
            GenericOutcome::Solution { a: sol, over_extension } => {
                assert!(!over_extension);
                assert!(sol == a || sol == a.neg());
            }
            other => panic!("{other:?}"),
        }
        // g = c·f(Ax) with c a nonsquare: equivalent only over F_{q²}... scaled by a nonsquare
        // square factor, i.e. f(√c A x) with √c outside F_q
        let c = kp.nonsquare_el(0);
        let g2 = QuadSystem::new(&kp, 0, 8, g.mats.iter().map(|u| u.scale(&c)).collect());
        match solve_generic(&f, &g2, 1).unwrap() {
            GenericOutcome::Solution { a: sol, over_extension } => {
                assert!(over_extension);
                assert_eq!(sol.level(), 1);
                assert!(f.substitute(&sol).same_polys(&g2.lift_to(sol.ctx(), 1)));
            }
            other => panic!("{other:?}"),
        }
        let opts = SolveOptions::default();
        assert!(matches!(solve(&f, &g2, 1, &opts).unwrap(), Outcome::NoSol(_)));
        let opts = SolveOptions {
            allow_extension: true,
            ..SolveOptions::default()
        };
        assert!(solve(&f, &g2, 1, &opts).unwrap().is_solution());
    }
}

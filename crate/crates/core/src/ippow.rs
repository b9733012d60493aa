//! Isomorphism of polynomials against the power system
//! `POW_{n,d} = (x_1^d, …, x_n^d)`: find `A, B` with `B·POW_{n,d}(Ax) = g`.
//!
//! The forms `ℓ_i` (rows of `A`) are read off the Jacobian determinant of
//! `g`, which is `c·∏ ℓ_i^{d−1}`.  Instead of a multivariate factorizer the
//! determinant is restricted to random lines and the roots of the
//! restrictions are matched up.  When the characteristic divides `d`,
//! the system is first written as a polynomial in `x^{p^r}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::text::{format_element, format_field_spec, parse_element, parse_field_spec, split_top};
use crate::field::{cmp_lex, factor, poly, El, FieldCtx, Fq};
use crate::matrix::MatrixF;

/// Retries for unlucky random lines.
pub const RESTRICTION_BUDGET: usize = 16;
/// Cap on the number of monomials of a Jacobian determinant.
pub const DET_MONOMIAL_LIMIT: u128 = 1 << 20;

pub type Monomial = Vec<u32>;

/// Multivariate polynomial in `n` variables as a monomial → coefficient map
/// with no zero coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MPoly {
    pub n: usize,
    pub terms: BTreeMap<Monomial, El>,
}

impl MPoly {
    pub fn zero(n: usize) -> MPoly {
        MPoly { n, terms: BTreeMap::new() }
    }

    pub fn constant(f: Fq, n: usize, c: El) -> MPoly {
        let mut p = MPoly::zero(n);
        p.add_term(f, vec![0; n], &c);
        p
    }

    /// `Σ c_j x_j`.
    pub fn linear(f: Fq, c: &[El]) -> MPoly {
        let n = c.len();
        let mut p = MPoly::zero(n);
        for (j, cj) in c.iter().enumerate() {
            let mut m = vec![0; n];
            m[j] = 1;
            p.add_term(f, m, cj);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, f: Fq, m: Monomial, c: &[u64]) {
        if f.is_zero(c) {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v = f.add(v, c);
                if f.is_zero(v) {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c.to_vec());
            }
        }
    }

    pub fn coeff(&self, f: Fq, m: &[u32]) -> El {
        self.terms.get(m).cloned().unwrap_or_else(|| f.zero())
    }

    /// Total degree; `None` for zero.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.iter().sum()).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|m| m.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    pub fn add(&self, f: Fq, o: &MPoly) -> MPoly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(f, m.clone(), c);
        }
        r
    }

    pub fn sub(&self, f: Fq, o: &MPoly) -> MPoly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(f, m.clone(), &f.neg(c));
        }
        r
    }

    pub fn scale(&self, f: Fq, s: &[u64]) -> MPoly {
        let mut r = MPoly::zero(self.n);
        for (m, c) in &self.terms {
            r.add_term(f, m.clone(), &f.mul(c, s));
        }
        r
    }

    pub fn mul(&self, f: Fq, o: &MPoly) -> MPoly {
        let mut r = MPoly::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let m: Monomial = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                r.add_term(f, m, &f.mul(ca, cb));
            }
        }
        r
    }

    pub fn pow(&self, f: Fq, mut e: u32) -> MPoly {
        let mut acc = MPoly::constant(f, self.n, f.one());
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(f, &b);
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(f, &b);
            }
        }
        acc
    }

    pub fn derivative(&self, f: Fq, i: usize) -> MPoly {
        let mut r = MPoly::zero(self.n);
        for (m, c) in &self.terms {
            if m[i] == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2[i] -= 1;
            let k = f.from_i64((m[i] as u64 % f.p()) as i64);
            r.add_term(f, m2, &f.mul(c, &k));
        }
        r
    }

    pub fn eval(&self, f: Fq, x: &[El]) -> El {
        let mut acc = f.zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (xj, &a) in x.iter().zip(m) {
                t = f.mul(&t, &f.ctx.pow_u64(f.l, xj, a as u64));
            }
            acc = f.add(&acc, &t);
        }
        acc
    }

    /// The univariate polynomial `t ↦ P(v + t·w)`.
    pub fn restrict_line(&self, f: Fq, v: &[El], w: &[El]) -> Vec<El> {
        let mut cache: HashMap<(usize, u32), Vec<El>> = HashMap::new();
        let mut out: Vec<El> = Vec::new();
        for (m, c) in &self.terms {
            let mut t = vec![c.clone()];
            for (j, &a) in m.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let pw = cache
                    .entry((j, a))
                    .or_insert_with(|| poly::pow(f, &poly::trim(f, vec![v[j].clone(), w[j].clone()]), a as u64));
                t = poly::mul(f, &t, pw);
            }
            out = poly::add(f, &out, &t);
        }
        poly::trim(f, out)
    }

    /// `P(Ax)`.
    pub fn compose(&self, f: Fq, a: &MatrixF) -> MPoly {
        let n = a.cols();
        let rows: Vec<MPoly> = (0..a.rows()).map(|j| MPoly::linear(f, &a.row(j))).collect();
        let mut cache: HashMap<(usize, u32), MPoly> = HashMap::new();
        let mut out = MPoly::zero(n);
        for (m, c) in &self.terms {
            let mut t = MPoly::constant(f, n, c.clone());
            for (j, &e) in m.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let pw = cache.entry((j, e)).or_insert_with(|| rows[j].pow(f, e));
                t = t.mul(f, pw);
            }
            out = out.add(f, &t);
        }
        out
    }
}

/// `m` polynomials in `n` variables over one level of a context.
#[derive(Clone, Debug)]
pub struct DensePolySystem {
    pub ctx: Arc<FieldCtx>,
    pub level: usize,
    pub n: usize,
    pub polys: Vec<MPoly>,
}

impl DensePolySystem {
    pub fn fq(&self) -> Fq<'_> {
        self.ctx.fq(self.level)
    }

    pub fn m(&self) -> usize {
        self.polys.len()
    }

    /// `POW_{n,d}`.
    pub fn pow_system(ctx: &Arc<FieldCtx>, level: usize, n: usize, d: u32) -> DensePolySystem {
        let f = ctx.fq(level);
        let polys = (0..n)
            .map(|i| {
                let mut m = vec![0; n];
                m[i] = d;
                let mut p = MPoly::zero(n);
                p.add_term(f, m, &f.one());
                p
            })
            .collect();
        DensePolySystem { ctx: ctx.clone(), level, n, polys }
    }

    pub fn degree(&self) -> Option<u32> {
        self.polys.iter().filter_map(|p| p.degree()).max()
    }

    /// All polynomials homogeneous of the same degree (zero allowed).
    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.polys
            .iter()
            .all(|p| p.is_homogeneous() && (p.is_zero() || p.degree() == d))
    }

    /// `g(Ax)`.
    pub fn compose(&self, a: &MatrixF) -> DensePolySystem {
        let f = self.fq();
        DensePolySystem {
            ctx: self.ctx.clone(),
            level: self.level,
            n: a.cols(),
            polys: self.polys.iter().map(|p| p.compose(f, a)).collect(),
        }
    }

    /// `B·g`.
    pub fn mix(&self, b: &MatrixF) -> DensePolySystem {
        let f = self.fq();
        let polys = (0..b.rows())
            .map(|k| {
                let mut acc = MPoly::zero(self.n);
                for (i, p) in self.polys.iter().enumerate() {
                    acc = acc.add(f, &p.scale(f, b.get(k, i)));
                }
                acc
            })
            .collect();
        DensePolySystem { polys, ..self.clone() }
    }

    /// Text form: field spec, `n`, then one polynomial per line as
    /// `(e_1,…,e_n) : c` entries separated by `;` (`0` for the zero polynomial).
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n{}\n", format_field_spec(&self.ctx), self.n);
        for p in &self.polys {
            if p.is_zero() {
                s.push_str("0\n");
                continue;
            }
            let entries: Vec<String> = p
                .terms
                .iter()
                .rev()
                .map(|(m, c)| {
                    let m: Vec<String> = m.iter().map(|e| e.to_string()).collect();
                    format!("({}) : {}", m.join(","), format_element(&self.ctx, self.level, c))
                })
                .collect();
            let _ = writeln!(s, "{}", entries.join("; "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<DensePolySystem> {
        let perr = |m: String| Error::Parse(m);
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let ctx = parse_field_spec(lines.next().ok_or_else(|| perr("missing field line".into()))?)?;
        let level = ctx.top();
        let f = ctx.fq(level);
        let n: usize = lines
            .next()
            .ok_or_else(|| perr("missing variable count".into()))?
            .parse()
            .map_err(|_| perr("bad variable count".into()))?;
        let mut polys = Vec::new();
        for line in lines {
            let mut p = MPoly::zero(n);
            if line != "0" {
                for entry in split_top(line, Some(';')) {
                    if entry.is_empty() {
                        continue;
                    }
                    let (mono, c) = entry
                        .split_once(':')
                        .ok_or_else(|| perr(format!("expected 'monomial : coefficient' in '{entry}'")))?;
                    let body = mono
                        .trim()
                        .strip_prefix('(')
                        .and_then(|b| b.strip_suffix(')'))
                        .ok_or_else(|| perr(format!("monomial '{mono}' must be a tuple")))?;
                    let m = body
                        .split(',')
                        .map(|e| e.trim().parse::<u32>().map_err(|_| perr(format!("bad exponent in '{mono}'"))))
                        .collect::<Result<Monomial>>()?;
                    if m.len() != n {
                        return Err(perr(format!("monomial '{mono}' does not have {n} exponents")));
                    }
                    p.add_term(f, m, &parse_element(&ctx, level, c)?);
                }
            }
            polys.push(p);
        }
        Ok(DensePolySystem { ctx, level, n, polys })
    }
}

/// Matrix of partial derivatives `∂g_k/∂x_j`.
pub fn jacobian(g: &DensePolySystem) -> Vec<Vec<MPoly>> {
    let f = g.fq();
    g.polys
        .iter()
        .map(|p| (0..g.n).map(|j| p.derivative(f, j)).collect())
        .collect()
}

fn binomial_sat(a: u128, b: u128) -> u128 {
    let mut r: u128 = 1;
    for i in 0..b {
        r = r.saturating_mul(a - i) / (i + 1);
    }
    r
}

/// Determinant of a square matrix of polynomials by expansion along rows,
/// memoized on the set of remaining columns.
pub fn det_poly(f: Fq, m: &[Vec<MPoly>], nvars: usize) -> MPoly {
    let n = m.len();
    let mut memo: HashMap<u32, MPoly> = HashMap::new();
    fn go(f: Fq, m: &[Vec<MPoly>], nvars: usize, mask: u32, memo: &mut HashMap<u32, MPoly>) -> MPoly {
        let n = m.len();
        let row = n - mask.count_ones() as usize;
        if row == n {
            return MPoly::constant(f, nvars, f.one());
        }
        if let Some(r) = memo.get(&mask) {
            return r.clone();
        }
        let mut acc = MPoly::zero(nvars);
        let mut pos = 0;
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            if !m[row][j].is_zero() {
                let minor = go(f, m, nvars, mask & !(1 << j), memo);
                let t = m[row][j].mul(f, &minor);
                acc = if pos % 2 == 0 { acc.add(f, &t) } else { acc.sub(f, &t) };
            }
            pos += 1;
        }
        memo.insert(mask, acc.clone());
        acc
    }
    go(f, m, nvars, (1u32 << n) - 1, &mut memo)
}

/// Symbolic `det J_g`.
pub fn jacobian_det(g: &DensePolySystem) -> Result<MPoly> {
    if g.m() != g.n {
        return Err(Error::InvalidInput(format!("{} polynomials in {} variables", g.m(), g.n)));
    }
    let dsum: u128 = g.polys.iter().map(|p| p.degree().unwrap_or(0).saturating_sub(1) as u128).sum();
    let n = g.n as u128;
    let est = binomial_sat(dsum + n, n);
    if est > DET_MONOMIAL_LIMIT || g.n > 16 {
        return Err(Error::TooLarge(format!("determinant may have {est} monomials")));
    }
    Ok(det_poly(g.fq(), &jacobian(g), g.n))
}

/// Write `g(x) = g̃(x^{p^r})` for `d = p^r·e` with `p ∤ e`.
pub fn frobenius_descent(g: &DensePolySystem, d: u32) -> Result<(DensePolySystem, u32, u32)> {
    if d == 0 {
        return Err(Error::InvalidInput("degree must be positive".into()));
    }
    let p = g.ctx.p() as u32;
    let (mut r, mut e) = (0, d);
    while e % p == 0 {
        e /= p;
        r += 1;
    }
    let pr = p.pow(r);
    let mut polys = Vec::new();
    for q in &g.polys {
        let mut out = MPoly::zero(g.n);
        for (m, c) in &q.terms {
            if m.iter().any(|a| a % pr != 0) {
                return Err(Error::NotAPthPower);
            }
            out.terms.insert(m.iter().map(|a| a / pr).collect(), c.clone());
        }
        polys.push(out);
    }
    Ok((DensePolySystem { polys, ..g.clone() }, r, e))
}

/// Inverse of [`frobenius_descent`]: multiply every exponent by `p^r`.
pub fn inflate(g: &DensePolySystem, r: u32) -> DensePolySystem {
    let pr = (g.ctx.p() as u32).pow(r);
    let polys = g
        .polys
        .iter()
        .map(|q| MPoly {
            n: q.n,
            terms: q.terms.iter().map(|(m, c)| (m.iter().map(|a| a * pr).collect(), c.clone())).collect(),
        })
        .collect();
    DensePolySystem { polys, ..g.clone() }
}

#[derive(Clone, Debug)]
pub struct LinearFactors {
    pub c: El,
    /// Forms as coefficient rows, first nonzero coefficient 1, sorted
    /// descending.
    pub forms: Vec<Vec<El>>,
}

enum Attempt {
    Unlucky,
    Mismatch,
}

/// The `n` roots of `δ`, each of multiplicity exactly `e − 1`.
fn split_roots<R: Rng>(f: Fq, delta: &[El], n: usize, e: u32, rng: &mut R) -> std::result::Result<Vec<El>, Error> {
    let k = (e - 1) as usize;
    let rts = factor::roots(f, delta, rng);
    let mut rest = delta.to_vec();
    let mut out = Vec::new();
    for r in rts {
        let lin = vec![f.neg(&r), f.one()];
        let mut mult = 0;
        loop {
            let (q, rem) = poly::divrem(f, &rest, &lin);
            if !rem.is_empty() {
                break;
            }
            rest = q;
            mult += 1;
        }
        if mult % k != 0 {
            return Err(Error::NotAProduct);
        }
        if mult != k {
            return Err(Error::UnluckyRestriction);
        }
        out.push(r);
    }
    if rest.len() != 1 || out.len() != n {
        return Err(Error::NotAProduct);
    }
    Ok(out)
}

fn normalize_form(f: Fq, v: &[El]) -> Vec<El> {
    match v.iter().find(|c| !f.is_zero(c)) {
        Some(lead) => {
            let inv = f.inv(lead);
            v.iter().map(|c| f.mul(c, &inv)).collect()
        }
        None => v.to_vec(),
    }
}

fn try_extract<R: Rng>(
    ctx: &Arc<FieldCtx>,
    l: usize,
    delta: &MPoly,
    n: usize,
    e: u32,
    rng: &mut R,
) -> std::result::Result<LinearFactors, std::result::Result<Attempt, Error>> {
    let f = ctx.fq(l);
    let u: Vec<El> = (0..n).map(|_| ctx.random_el(l, rng)).collect();
    if f.is_zero(&delta.eval(f, &u)) {
        return Err(Ok(Attempt::Unlucky));
    }
    let w: Vec<El> = u.iter().map(|c| f.neg(c)).collect();
    let basis = MatrixF::random_invertible(ctx, l, n, rng);
    let roots_at = |v: &[El], rng: &mut R| -> std::result::Result<Vec<El>, std::result::Result<Attempt, Error>> {
        split_roots(f, &delta.restrict_line(f, v, &w), n, e, rng).map_err(|err| match err {
            Error::UnluckyRestriction => Ok(Attempt::Unlucky),
            other => Err(other),
        })
    };
    let b: Vec<Vec<El>> = (0..n).map(|k| basis.col(k)).collect();
    let r0 = roots_at(&b[0], rng)?;
    // rows[i][k] = ρ_i(b_k)
    let mut rows: Vec<Vec<El>> = r0.iter().map(|r| vec![r.clone()]).collect();
    for k in 1..n {
        let rk = roots_at(&b[k], rng)?;
        let sum: Vec<El> = b[0].iter().zip(&b[k]).map(|(x, y)| f.add(x, y)).collect();
        let tk = roots_at(&sum, rng)?;
        let mut used = vec![false; n];
        for i in 0..n {
            let hits: Vec<usize> = (0..n).filter(|&j| tk.contains(&f.add(&r0[i], &rk[j]))).collect();
            if hits.len() > 1 {
                return Err(Ok(Attempt::Unlucky));
            }
            if hits.is_empty() || used[hits[0]] {
                return Err(Ok(Attempt::Mismatch));
            }
            used[hits[0]] = true;
            rows[i].push(rk[hits[0]].clone());
        }
    }
    // ℓ_i(b_k) ∝ ρ_i(b_k), so ℓ_i = r_i·basis⁻¹
    let binv = basis.inverse().map_err(Err)?;
    let mut forms: Vec<Vec<El>> = rows
        .iter()
        .map(|r| {
            let rm = MatrixF::from_rows(ctx, l, std::slice::from_ref(r));
            normalize_form(f, &rm.mul(&binv).row(0))
        })
        .collect();
    sort_forms(&mut forms);
    let mut prod = MPoly::constant(f, n, f.one());
    for form in &forms {
        prod = prod.mul(f, &MPoly::linear(f, form).pow(f, e - 1));
    }
    let (m0, p0) = prod.terms.iter().next().ok_or(Err(Error::NotAProduct))?;
    let c = f.div(&delta.coeff(f, m0), p0);
    if prod.scale(f, &c) != *delta {
        return Err(Ok(Attempt::Mismatch));
    }
    Ok(LinearFactors { c, forms })
}

fn sort_forms(forms: &mut [Vec<El>]) {
    forms.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| cmp_lex(x, y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .reverse()
    });
}

fn attempts<R: Rng>(ctx: &Arc<FieldCtx>, l: usize, delta: &MPoly, n: usize, e: u32, rng: &mut R) -> Result<LinearFactors> {
    let mut mismatches = 0;
    for _ in 0..RESTRICTION_BUDGET {
        match try_extract(ctx, l, delta, n, e, rng) {
            Ok(r) => return Ok(r),
            Err(Ok(Attempt::Unlucky)) => {}
            Err(Ok(Attempt::Mismatch)) => mismatches += 1,
            Err(Err(err)) => return Err(err),
        }
    }
    if mismatches > 0 {
        Err(Error::NotAProduct)
    } else {
        Err(Error::UnluckyRestriction)
    }
}

/// Smallest extension size that makes random lines lucky with high
/// probability.
fn lucky_size(n: usize, e: u32) -> u64 {
    16 * (n * n) as u64 * e as u64
}

/// Write a homogeneous `Δ` of degree `n(e−1)` as `c·∏ ℓ_i^{e−1}`.  Over
/// small fields the lines are drawn from an extension; normalized factors
/// of a `K`-rational product are `K`-rational, so they descend.
pub fn extract_linear_factors(
    ctx: &Arc<FieldCtx>,
    l: usize,
    delta: &MPoly,
    n: usize,
    e: u32,
    seed: u64,
) -> Result<LinearFactors> {
    if e < 2 {
        return Err(Error::InvalidInput("factor extraction needs e ≥ 2".into()));
    }
    if delta.is_zero() || !delta.is_homogeneous() || delta.degree() != Some(n as u32 * (e - 1)) {
        return Err(Error::NotAProduct);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match attempts(ctx, l, delta, n, e, &mut rng) {
        Err(Error::UnluckyRestriction) => {}
        other => return other,
    }
    let q = ctx.order_u64(l).unwrap_or(u64::MAX);
    let target = lucky_size(n, e);
    if q >= target {
        return Err(Error::UnluckyRestriction);
    }
    let mut k = 2;
    while q.saturating_pow(k as u32) < target {
        k += 1;
    }
    let base = ctx.truncate(l);
    let irr = factor::random_irreducible(base.fq(l), k, &mut rng);
    let ext = base.extend("s", &irr)?;
    let top = ext.top();
    let lifted = MPoly {
        n: delta.n,
        terms: delta.terms.iter().map(|(m, c)| (m.clone(), ext.embed(l, top, c))).collect(),
    };
    let found = attempts(&ext, top, &lifted, n, e, &mut rng)?;
    let down = |c: &El| (ext.level_of(c) <= l).then(|| c[..ctx.size(l)].to_vec());
    let mut forms = found
        .forms
        .iter()
        .map(|v| v.iter().map(down).collect::<Option<Vec<El>>>())
        .collect::<Option<Vec<_>>>()
        .ok_or(Error::NotAProduct)?;
    let c = down(&found.c).ok_or(Error::NotAProduct)?;
    sort_forms(&mut forms);
    Ok(LinearFactors { c, forms })
}

#[derive(Clone, Debug)]
pub struct PowSolution {
    pub a: MatrixF,
    pub b: MatrixF,
    pub p: u64,
    pub r: u32,
    pub e: u32,
}

#[derive(Clone, Debug)]
pub enum PowOutcome {
    Solution(PowSolution),
    NoSol(String),
}

/// `B·POW_{n,d}(Ax)`.
pub fn apply_pow(a: &MatrixF, b: &MatrixF, d: u32) -> DensePolySystem {
    let ctx = a.ctx().clone();
    let level = a.level().max(b.level());
    DensePolySystem::pow_system(&ctx, level, a.rows(), d)
        .compose(&a.lift(level))
        .mix(&b.lift(level))
}

fn nosol(msg: impl Into<String>) -> Result<PowOutcome> {
    Ok(PowOutcome::NoSol(msg.into()))
}

/// Find `(A, B)` with `B·POW_{n,d}(Ax) = g`.
pub fn solve_pow(g: &DensePolySystem, d: u32, seed: u64) -> Result<PowOutcome> {
    if g.m() != g.n {
        return Err(Error::InvalidInput(format!("{} polynomials in {} variables", g.m(), g.n)));
    }
    let n = g.n;
    let ctx = g.ctx.clone();
    let l = g.level;
    let f = g.fq();
    if g.polys.iter().any(|p| p.is_zero() || !p.is_homogeneous() || p.degree() != Some(d)) {
        return nosol(format!("not every polynomial is a nonzero form of degree {d}"));
    }
    let (gt, r, e) = match frobenius_descent(g, d) {
        Ok(x) => x,
        Err(Error::NotAPthPower) => return nosol("system is not a polynomial in p^r-th powers"),
        Err(err) => return Err(err),
    };
    let forms: Vec<Vec<El>> = if e == 1 {
        (0..n).map(|i| (0..n).map(|j| if i == j { f.one() } else { f.zero() }).collect()).collect()
    } else {
        let delta = jacobian_det(&gt)?;
        match extract_linear_factors(&ctx, l, &delta, n, e, seed) {
            Ok(lf) => lf.forms,
            Err(Error::NotAProduct) => return nosol("Jacobian determinant is not a product of linear forms"),
            Err(err) => return Err(err),
        }
    };
    // g̃_k = Σ_i B_ki ℓ_i^e
    let powers: Vec<MPoly> = forms.iter().map(|v| MPoly::linear(f, v).pow(f, e)).collect();
    let mut monos: Vec<Monomial> = powers.iter().chain(&gt.polys).flat_map(|p| p.terms.keys().cloned()).collect();
    monos.sort();
    monos.dedup();
    let lhs = MatrixF::from_fn(&ctx, l, monos.len(), n, |i, j| powers[j].coeff(f, &monos[i]));
    let rhs = MatrixF::from_fn(&ctx, l, monos.len(), n, |i, k| gt.polys[k].coeff(f, &monos[i]));
    let b = match lhs.solve(&rhs) {
        Ok((x, _)) => x.transpose(),
        Err(Error::NoSolution) => return nosol("system is not spanned by powers of the recovered forms"),
        Err(err) => return Err(err),
    };
    if !b.is_invertible() {
        return nosol("mixing matrix is singular");
    }
    let at = MatrixF::from_rows(&ctx, l, &forms);
    if !at.is_invertible() {
        return nosol("recovered forms are dependent");
    }
    let a = at.map_entries(|c| (0..r).fold(c.to_vec(), |x, _| ctx.pth_root(l, &x)));
    let check = apply_pow(&a, &b, d);
    if check.polys != g.polys {
        return nosol("final identity check failed");
    }
    Ok(PowOutcome::Solution(PowSolution { a, b, p: ctx.p(), r, e }))
}

//! Exact matrix square roots over finite fields.
//!
//! Odd characteristic has two backends: a Jordan-based one gluing truncated
//! Taylor series of `√x` by the Chinese remainder theorem, and a companion
//! one lifting a square root of `x` modulo each primary factor of the
//! minimal polynomial.  Both return `W` together with `Q` such that `W = Q(Z)`.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::factor;
use crate::field::poly::{self, Coeffs};
use crate::field::{El, FieldCtx, Fq, UniPoly};
use crate::matrix::jordan::{charpoly_factors, jordan_form, rational_canonical_form};
use crate::matrix::MatrixF;

const SQRT_SEED: u64 = 0x7371_7274;

#[derive(Clone, Debug)]
pub struct SqrtResult {
    /// `W` with `W² = Z`, at the lowest level reached by the computation that
    /// still contains its entries.
    pub w: MatrixF,
    /// `Q` with `Q(Z) = W`, when `W` is a polynomial in `Z`.
    pub as_polynomial: Option<UniPoly>,
    pub field_level: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Jordan,
    Companion,
}

/// Square root of `z` in any characteristic.
pub fn sqrt_matrix(z: &MatrixF, backend: Backend) -> Result<SqrtResult> {
    if !z.is_square() {
        return Err(Error::InvalidInput("square root of a non-square matrix".into()));
    }
    if z.ctx().p() == 2 {
        return sqrt_char2(z);
    }
    match backend {
        Backend::Jordan => sqrt_poly(z),
        Backend::Companion => sqrt_companion_backend(z),
    }
}

/// Same matrix with its level as the top of the context, so that the tower
/// can be extended from it.
fn at_top(z: &MatrixF) -> MatrixF {
    let ctx = z.ctx().truncate(z.level());
    z.with_ctx(&ctx)
}

/// `binom(1/2, k)` computed in the prime field; needs `k < p`.
pub fn binom_half(ctx: &FieldCtx, l: usize, k: usize) -> Result<El> {
    let p = ctx.p();
    if k as u64 >= p {
        return Err(Error::InvalidInput(format!("binom(1/2, {k}) is undefined modulo {p}")));
    }
    let half = ctx.inv(l, &ctx.from_u64(l, 2))?;
    let mut num = ctx.one(l);
    let mut den = ctx.one(l);
    for i in 0..k {
        num = ctx.mul(l, &num, &ctx.sub(&half, &ctx.from_u64(l, i as u64)));
        den = ctx.mul(l, &den, &ctx.from_u64(l, i as u64 + 1));
    }
    ctx.div(l, &num, &den)
}

/// A square root of `a`, adjoining one when `a` is a nonsquare at level `l`.
/// Returns the (possibly extended) context, its level, and the root.
fn root_of(ctx: &Arc<FieldCtx>, l: usize, a: &[u64]) -> Result<(Arc<FieldCtx>, usize, El)> {
    if ctx.is_square_el(l, a) {
        return Ok((ctx.clone(), l, ctx.sqrt_el(l, a)?));
    }
    let base = ctx.truncate(l);
    let minpoly = vec![base.neg(a), base.zero(l), base.one(l)];
    let ext = base.extend("w", &minpoly)?;
    let top = ext.top();
    let g = ext.generator(top);
    Ok((ext, top, g))
}

/// Coefficients `ω binom(1/2,k) ζ^{-k}` of the truncated Taylor series of `√x` at `ζ`.
fn taylor(ctx: &FieldCtx, l: usize, zeta: &[u64], omega: &[u64], d: usize) -> Result<Vec<El>> {
    let zinv = ctx.inv(l, zeta)?;
    let mut zk = ctx.one(l);
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        out.push(ctx.mul(l, &ctx.mul(l, omega, &binom_half(ctx, l, k)?), &zk));
        zk = ctx.mul(l, &zk, &zinv);
    }
    Ok(out)
}

/// Square root of the Jordan block `J_{ζ,d}`: upper-triangular Toeplitz with
/// `k`-th superdiagonal `ω binom(1/2,k) ζ^{-k}`.
pub fn sqrt_jordan_block(ctx: &Arc<FieldCtx>, l: usize, zeta: &[u64], d: usize) -> Result<MatrixF> {
    if ctx.p() == 2 {
        return Err(Error::UnsupportedKind("Taylor square root in characteristic 2".into()));
    }
    if FieldCtx::is_zero_el(zeta) {
        return Err(Error::ZeroEigenvalue);
    }
    let (ctx, l, omega) = root_of(ctx, l, zeta)?;
    let zeta = ctx.embed(ctx.level_of(zeta).min(l), l, zeta);
    let c = taylor(&ctx, l, &zeta, &omega, d)?;
    Ok(MatrixF::from_fn(&ctx, l, d, d, |i, j| if j >= i { c[j - i].clone() } else { ctx.zero(l) }))
}

/// `Σ c_k (x − ζ)^k` expanded.
fn shifted_poly(f: Fq, c: &[El], zeta: &[u64]) -> Coeffs {
    let lin = vec![f.neg(zeta), f.one()];
    let mut acc: Coeffs = Vec::new();
    for ck in c.iter().rev() {
        acc = poly::add(f, &poly::mul(f, &acc, &lin), std::slice::from_ref(ck));
    }
    poly::trim(f, acc)
}

/// `Q ≡ r_i mod m_i` for pairwise coprime moduli.
pub fn crt(f: Fq, parts: &[(Coeffs, Coeffs)]) -> Result<Coeffs> {
    let mut q: Coeffs = Vec::new();
    let mut m: Coeffs = vec![f.one()];
    for (r, md) in parts {
        let inv = poly::invmod(f, &poly::rem(f, &m, md), md)
            .ok_or_else(|| Error::InvalidInput("CRT moduli are not coprime".into()))?;
        let t = poly::mulmod(f, &poly::sub(f, r, &q), &inv, md);
        q = poly::add(f, &q, &poly::mul(f, &m, &t));
        m = poly::mul(f, &m, md);
    }
    Ok(poly::rem(f, &q, &m))
}

fn check_square(w: &MatrixF, z: &MatrixF) -> Result<()> {
    if w.mul(w) == *z {
        Ok(())
    } else {
        Err(Error::InvalidInput("internal: square root check failed".into()))
    }
}

/// Lower `w` to `base` when its entries allow it.
fn settle(w: MatrixF, base: usize) -> (MatrixF, usize) {
    match w.descend(base) {
        Some(d) => (d, base),
        None => {
            let l = w.level();
            (w, l)
        }
    }
}

/// Jordan backend: `W = Q(Z)` with `Q` the CRT combination of truncated
/// Taylor series, one per distinct eigenvalue.  Conjugate eigenvalues get
/// conjugate roots so that `W` stays rational whenever the roots allow it.
pub fn sqrt_poly(z: &MatrixF) -> Result<SqrtResult> {
    let p = z.ctx().p();
    if p == 2 {
        return sqrt_char2(z);
    }
    if !z.is_invertible() {
        return Err(Error::SingularMatrix);
    }
    let z0 = at_top(z);
    let base = z0.level();
    let jd = jordan_form(&z0)?;
    if jd.blocks.iter().any(|b| b.size as u64 >= p) {
        return sqrt_companion_backend(z);
    }
    let (mut ctx, mut lev) = (jd.ctx.clone(), jd.level);
    let grouped = jd.grouped();
    if grouped.iter().any(|(zeta, _)| !ctx.is_square_el(lev, zeta)) {
        let nu = ctx.nonsquare_el(lev);
        ctx = ctx.extend("w", &[ctx.neg(&nu), ctx.zero(lev), ctx.one(lev)])?;
        lev = ctx.top();
    }
    let f = ctx.fq(lev);
    let mut parts = Vec::new();
    for (fi, _) in jd.factors.iter().enumerate() {
        let mine: Vec<_> = jd.blocks.iter().filter(|b| b.factor == fi).collect();
        let z_first = ctx.embed(jd.level, lev, &mine[0].eigenvalue);
        let omega0 = ctx.sqrt_el(lev, &z_first)?;
        let mut conjs: Vec<usize> = mine.iter().map(|b| b.conj).collect();
        conjs.sort_unstable();
        conjs.dedup();
        for k in conjs {
            let zeta = ctx.embed(jd.level, lev, &mine.iter().find(|b| b.conj == k).unwrap().eigenvalue);
            let d = mine.iter().filter(|b| b.conj == k).map(|b| b.size).max().unwrap();
            let omega = ctx.frobenius_over(lev, base, &omega0, k);
            debug_assert_eq!(ctx.mul(lev, &omega, &omega), zeta);
            let c = taylor(&ctx, lev, &zeta, &omega, d)?;
            let modulus = poly::pow(f, &[f.neg(&zeta), f.one()], d as u64);
            parts.push((shifted_poly(f, &c, &zeta), modulus));
        }
    }
    let q = crt(f, &parts)?;
    let zl = z0.lift_to(&ctx, lev);
    let w = zl.eval_poly(&q);
    check_square(&w, &zl)?;
    let (w, field_level) = settle(w, base);
    Ok(SqrtResult {
        w,
        as_polynomial: Some(UniPoly::new(ctx.clone(), lev, q)),
        field_level,
    })
}

/// Whether `x` is a square in `K[x]/P` for irreducible `P` of degree `d`:
/// the norm `(−1)^d P(0)` of a root must be a square in `K`.
fn root_is_square(ctx: &FieldCtx, l: usize, p: &[El]) -> bool {
    let d = p.len() - 1;
    let c0 = if d.is_multiple_of(2) { p[0].clone() } else { ctx.neg(&p[0]) };
    ctx.is_square_el(l, &c0)
}

/// Square root of `x` modulo the irreducible `P`, as a polynomial over `K`.
fn sqrt_x_mod(ctx: &Arc<FieldCtx>, l: usize, p: &[El]) -> Result<Coeffs> {
    let d = p.len() - 1;
    if d == 1 {
        let beta = ctx.neg(&p[0]);
        return Ok(vec![ctx.sqrt_el(l, &beta)?]);
    }
    let base = ctx.truncate(l);
    let lk = base.push_level_unchecked("r", p.to_vec());
    let top = lk.top();
    let r = lk.sqrt_el(top, &lk.generator(top))?;
    let s = lk.size(l);
    let f = ctx.fq(l);
    Ok(poly::trim(f, r.chunks(s).map(|c| c.to_vec()).collect()))
}

/// Companion backend: per primary factor `P^e` of the minimal polynomial,
/// a square root of `x` modulo `P` is Newton-lifted modulo `P^e`; the pieces
/// are glued by CRT.  Adjoins an extension of degree `2^{1+max v2(deg P)}`
/// when some root is a nonsquare, after which every root is a square.
pub fn sqrt_companion_backend(z: &MatrixF) -> Result<SqrtResult> {
    if z.ctx().p() == 2 {
        return sqrt_char2(z);
    }
    if !z.is_invertible() {
        return Err(Error::SingularMatrix);
    }
    let z0 = at_top(z);
    let base = z0.level();
    let mut ctx = z0.ctx().clone();
    let mut lev = base;
    let factors = charpoly_factors(&z0);
    if factors.iter().any(|(pf, _)| !root_is_square(&ctx, lev, pf)) {
        let v = factors.iter().map(|(pf, _)| (pf.len() - 1).trailing_zeros()).max().unwrap_or(0);
        let n = 1usize << (v + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(SQRT_SEED ^ n as u64);
        let irr = factor::random_irreducible(ctx.fq(lev), n, &mut rng);
        ctx = ctx.extend("e", &irr)?;
        lev = ctx.top();
    }
    let zl = z0.lift_to(&ctx, lev);
    let rcf = rational_canonical_form(&zl)?;
    let mut powers: Vec<(Coeffs, usize)> = Vec::new();
    for (pf, e) in rcf.summands() {
        match powers.iter_mut().find(|(q, _)| *q == pf) {
            Some((_, m)) => *m = (*m).max(e),
            None => powers.push((pf, e)),
        }
    }
    let f = ctx.fq(lev);
    let half = ctx.inv(lev, &ctx.from_u64(lev, 2))?;
    let x = poly::x(f);
    let mut parts = Vec::new();
    for (pf, e) in &powers {
        let modulus = poly::pow(f, pf, *e as u64);
        let mut r = sqrt_x_mod(&ctx, lev, pf)?;
        let mut prec = 1;
        while prec < *e {
            let inv = poly::invmod(f, &r, &modulus).ok_or(Error::SingularMatrix)?;
            let t = poly::add(f, &r, &poly::mulmod(f, &x, &inv, &modulus));
            r = poly::rem(f, &poly::scale(f, &t, &half), &modulus);
            prec *= 2;
        }
        parts.push((r, modulus));
    }
    let q = crt(f, &parts)?;
    let w = zl.eval_poly(&q);
    check_square(&w, &zl)?;
    let (w, field_level) = settle(w, base);
    Ok(SqrtResult {
        w,
        as_polynomial: Some(UniPoly::new(ctx.clone(), lev, q)),
        field_level,
    })
}

/// Monic `Q` of degree `d = deg P` with `(−1)^d Q(z)Q(−z) = P(z²)`: the
/// companion matrix of `Q` squares to a matrix similar to `C(P)`.
///
/// When a root `β` of `P` is a square in `K[x]/P`, `Q = Π (z − γ^{q^i})` with
/// `γ² = β` has coefficients in `K`.  Otherwise `y² = β` is adjoined and
/// `Q = Π (z − y β^{(q^i − 1)/2})`.  Returns `Q` and the level holding it.
pub fn sqrt_companion(p: &UniPoly) -> Result<(UniPoly, usize)> {
    let l = p.level;
    let ctx = p.ctx.truncate(l);
    if ctx.p() == 2 {
        return Err(Error::UnsupportedKind("companion square root in characteristic 2".into()));
    }
    let f = ctx.fq(l);
    let pm = poly::monic(f, &p.coeffs);
    if pm.len() < 2 {
        return Err(Error::InvalidInput("constant polynomial".into()));
    }
    if !factor::is_irreducible(f, &pm) {
        return Err(Error::ReduciblePolynomial);
    }
    if FieldCtx::is_zero_el(&pm[0]) {
        return Err(Error::ZeroEigenvalue);
    }
    let d = pm.len() - 1;
    let q = ctx.order(l);
    let linear_product = |c: &Arc<FieldCtx>, lv: usize, roots: &[El]| -> Coeffs {
        let fl = c.fq(lv);
        roots
            .iter()
            .fold(vec![fl.one()], |acc, r| poly::mul(fl, &acc, &[fl.neg(r), fl.one()]))
    };
    if d == 1 {
        let beta = ctx.neg(&pm[0]);
        if ctx.is_square_el(l, &beta) {
            let g = ctx.sqrt_el(l, &beta)?;
            let qq = linear_product(&ctx, l, &[g]);
            return Ok((UniPoly::new(ctx, l, qq), l));
        }
        let ext = ctx.push_level_unchecked("y", vec![ctx.neg(&beta), ctx.zero(l), ctx.one(l)]);
        let top = ext.top();
        let y = ext.generator(top);
        let qq = linear_product(&ext, top, &[y]);
        return Ok((UniPoly::new(ext, top, qq), top));
    }
    let lk = ctx.push_level_unchecked("b", pm.clone());
    let ll = lk.top();
    let beta = lk.generator(ll);
    if lk.is_square_el(ll, &beta) {
        let g = lk.sqrt_el(ll, &beta)?;
        let roots: Vec<El> = (0..d).map(|i| lk.frobenius_over(ll, l, &g, i)).collect();
        let qq = linear_product(&lk, ll, &roots);
        let s = lk.size(l);
        let mut down = Vec::with_capacity(qq.len());
        for c in &qq {
            if lk.level_of(c) > l {
                return Err(Error::InvalidInput("internal: conjugate product not rational".into()));
            }
            down.push(c[..s].to_vec());
        }
        return Ok((UniPoly::new(ctx, l, down), l));
    }
    let ext = lk.push_level_unchecked("y", vec![lk.neg(&beta), lk.zero(ll), lk.one(ll)]);
    let top = ext.top();
    let y = ext.generator(top);
    let mut roots = Vec::with_capacity(d);
    let mut qi = BigUint::from(1u32);
    for _ in 0..d {
        let e = (&qi - 1u32) >> 1;
        let u = ext.embed(ll, top, &lk.pow(ll, &beta, &e));
        roots.push(ext.mul(top, &y, &u));
        qi *= &q;
    }
    let qq = linear_product(&ext, top, &roots);
    Ok((UniPoly::new(ext, top, qq), top))
}

/// Pair the Jordan block sizes of one eigenvalue into squares of single
/// blocks: sizes `(a, b)` with `a − b ∈ {0, 1}`, and lone blocks of size 1.
/// Returns index pairs into `sizes` (`None` for a lone block).
pub fn pair_blocks(sizes: &[usize]) -> Option<Vec<(usize, Option<usize>)>> {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut used = vec![false; sizes.len()];
    let mut out = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let a = sizes[i];
        let partner = |want: usize| order[pos + 1..].iter().copied().find(|&j| !used[j] && sizes[j] == want);
        let j = partner(a).or_else(|| if a > 1 { partner(a - 1) } else { None });
        match j {
            Some(j) => {
                used[j] = true;
                out.push((i, Some(j)));
            }
            None if a == 1 => out.push((i, None)),
            None => return None,
        }
    }
    Some(out)
}

/// Square root in characteristic 2.  A root exists iff the Jordan blocks of
/// each eigenvalue pair up as in [`pair_blocks`].  Diagonalizable `Z` gets
/// `W = R(Z)` with `R ≡ x^{|K|^d / 2} mod P` for each factor `P` of degree
/// `d`.  Otherwise each pair `(a, b)` is the square of `J_{√ζ, a+b}`, and
/// `W` is the conjugate of that block matrix.
pub fn sqrt_char2(z: &MatrixF) -> Result<SqrtResult> {
    if z.ctx().p() != 2 {
        return Err(Error::UnsupportedKind("characteristic 2 square root in odd characteristic".into()));
    }
    let z0 = at_top(z);
    let base = z0.level();
    let jd = jordan_form(&z0)?;
    let mut offsets = Vec::with_capacity(jd.blocks.len());
    let mut acc = 0;
    for b in &jd.blocks {
        offsets.push(acc);
        acc += b.size;
    }
    let mut groups: Vec<(El, Vec<usize>)> = Vec::new();
    for (i, b) in jd.blocks.iter().enumerate() {
        match groups.iter_mut().find(|(z, _)| *z == b.eigenvalue) {
            Some((_, v)) => v.push(i),
            None => groups.push((b.eigenvalue.clone(), vec![i])),
        }
    }
    let mut pairings = Vec::new();
    for (zeta, idx) in &groups {
        let sizes: Vec<usize> = idx.iter().map(|&i| jd.blocks[i].size).collect();
        match pair_blocks(&sizes) {
            Some(pairs) => pairings.push((zeta.clone(), idx.clone(), pairs)),
            None => {
                let mut s = sizes.clone();
                s.sort_unstable_by(|a, b| b.cmp(a));
                return Err(Error::NoSquareRoot(format!("Jordan block sizes {s:?} of one eigenvalue cannot be paired")));
            }
        }
    }
    if jd.is_diagonal() {
        let ctx = z0.ctx().clone();
        let f = ctx.fq(base);
        let x = poly::x(f);
        let mut parts = Vec::new();
        for (pf, _) in &jd.factors {
            let d = pf.len() - 1;
            let e = ctx.order(base).pow(d as u32) >> 1;
            parts.push((poly::powmod(f, &x, &e, pf), pf.clone()));
        }
        let r = crt(f, &parts)?;
        let w = z0.eval_poly(&r);
        check_square(&w, &z0)?;
        return Ok(SqrtResult {
            w,
            as_polynomial: Some(UniPoly::new(ctx, base, r)),
            field_level: base,
        });
    }
    let ctx = jd.ctx.clone();
    let lev = jd.level;
    let n = z0.rows();
    let mut wj = MatrixF::zeros(&ctx, lev, n, n);
    for (zeta, idx, pairs) in &pairings {
        let omega = ctx.sqrt_el(lev, zeta)?;
        for (i, j) in pairs {
            let bi = idx[*i];
            let a = jd.blocks[bi].size;
            let Some(j) = j else {
                wj.set(offsets[bi], offsets[bi], &omega);
                continue;
            };
            let bj = idx[*j];
            let b = jd.blocks[bj].size;
            let dd = a + b;
            // global index and position in J_{ω,dd} for each basis vector of the pair
            let mut map: Vec<(usize, usize)> = Vec::with_capacity(dd);
            for t in 0..a {
                map.push((offsets[bi] + t, dd - 2 * (a - 1 - t) - 1));
            }
            for t in 0..b {
                map.push((offsets[bj] + t, dd - 2 * (b - t)));
            }
            for &(gr, pr) in &map {
                for &(gc, pc) in &map {
                    if pr == pc {
                        wj.set(gr, gc, &omega);
                    } else if pc == pr + 1 {
                        wj.set(gr, gc, &ctx.one(lev));
                    }
                }
            }
        }
    }
    let w = jd.t.mul(&wj).mul(&jd.t_inv);
    let zl = z0.lift_to(&ctx, lev);
    check_square(&w, &zl)?;
    let (w, field_level) = settle(w, base);
    Ok(SqrtResult {
        w,
        as_polynomial: None,
        field_level,
    })
}

//! Prime fields and towers of algebraic extensions over them.
//!
//! An element of tower level `k` is stored as a flat coefficient vector of
//! length `D_k` (the degree of level `k` over the prime field): `d_k` chunks
//! of length `D_{k-1}`, chunk `i` being the coefficient of `y_k^i`.  Embedding
//! an element into a higher level is zero padding.

pub mod factor;
pub mod poly;
pub mod prime;
pub mod text;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use prime::{addmod, invmod, mulmod, negmod, powmod, submod};

pub use poly::UniPoly;

/// Raw element storage: flattened coefficients over the prime field.
pub type El = Vec<u64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerLimits {
    pub max_depth: usize,
    pub max_degree: usize,
}

impl Default for TowerLimits {
    fn default() -> Self {
        TowerLimits {
            max_depth: 8,
            max_degree: 1 << 16,
        }
    }
}

/// One extension step: `y` with minimal polynomial `minpoly` over the level below.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level {
    pub name: String,
    pub degree: usize,
    /// Monic, `degree + 1` coefficients, low to high, each an element of the level below.
    pub minpoly: Vec<El>,
}

#[derive(Debug)]
pub struct FieldCtx {
    p: u64,
    levels: Vec<Level>,
    sizes: Vec<usize>,
    nonsquare: Option<u64>,
    limits: TowerLimits,
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.levels == other.levels
    }
}

impl Eq for FieldCtx {}

impl FieldCtx {
    pub fn prime(p: u64) -> Result<Arc<FieldCtx>> {
        Self::prime_with_limits(p, TowerLimits::default())
    }

    pub fn prime_with_limits(p: u64, limits: TowerLimits) -> Result<Arc<FieldCtx>> {
        if p >= 1 << 62 || !prime::is_prime(p) {
            return Err(Error::InvalidInput(format!("{p} is not a supported prime")));
        }
        let nonsquare = if p == 2 {
            None
        } else {
            (2..p).find(|&a| powmod(a, (p - 1) / 2, p) == p - 1)
        };
        Ok(Arc::new(FieldCtx {
            p,
            levels: Vec::new(),
            sizes: vec![1],
            nonsquare,
            limits,
        }))
    }

    /// Append a level defined by `minpoly` (coefficients at the current top level).
    pub fn extend(self: &Arc<Self>, name: &str, minpoly: &[El]) -> Result<Arc<FieldCtx>> {
        let top = self.top();
        let f = poly::trim(self.fq(top), minpoly.to_vec());
        if f.len() < 3 {
            return Err(Error::InvalidInput(
                "extension polynomial must have degree at least 2".into(),
            ));
        }
        let d = f.len() - 1;
        if self.levels.len() + 1 > self.limits.max_depth {
            return Err(Error::TowerDepthExceeded(format!(
                "depth {} exceeds {}",
                self.levels.len() + 1,
                self.limits.max_depth
            )));
        }
        let total = self.sizes[top].saturating_mul(d);
        if total > self.limits.max_degree {
            return Err(Error::TowerDepthExceeded(format!(
                "total degree {total} exceeds {}",
                self.limits.max_degree
            )));
        }
        let f = poly::monic(self.fq(top), &f);
        if !factor::is_irreducible(self.fq(top), &f) {
            return Err(Error::ReduciblePolynomial);
        }
        Ok(self.push_level_unchecked(name, f))
    }

    pub(crate) fn push_level_unchecked(self: &Arc<Self>, name: &str, minpoly: Vec<El>) -> Arc<FieldCtx> {
        let top = self.top();
        let d = minpoly.len() - 1;
        let mut levels = self.levels.clone();
        levels.push(Level {
            name: name.to_string(),
            degree: d,
            minpoly,
        });
        let mut sizes = self.sizes.clone();
        sizes.push(self.sizes[top] * d);
        Arc::new(FieldCtx {
            p: self.p,
            levels,
            sizes,
            nonsquare: self.nonsquare,
            limits: self.limits.clone(),
        })
    }

    /// Context truncated to its first `depth` levels.
    pub fn truncate(self: &Arc<Self>, depth: usize) -> Arc<FieldCtx> {
        if depth >= self.levels.len() {
            return self.clone();
        }
        Arc::new(FieldCtx {
            p: self.p,
            levels: self.levels[..depth].to_vec(),
            sizes: self.sizes[..=depth].to_vec(),
            nonsquare: self.nonsquare,
            limits: self.limits.clone(),
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn limits(&self) -> &TowerLimits {
        &self.limits
    }

    /// Number of extension levels; the top level index.
    pub fn top(&self) -> usize {
        self.levels.len()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Level {
        &self.levels[k - 1]
    }

    /// Degree of level `l` over the prime field.
    pub fn size(&self, l: usize) -> usize {
        self.sizes[l]
    }

    /// Number of elements of level `l`, as a big integer.
    pub fn order(&self, l: usize) -> BigUint {
        BigUint::from(self.p).pow(self.sizes[l] as u32)
    }

    /// Number of elements of level `l` if it fits in a `u64`.
    pub fn order_u64(&self, l: usize) -> Option<u64> {
        self.p.checked_pow(self.sizes[l] as u32)
    }

    pub fn canonical_nonsquare(&self) -> Option<u64> {
        self.nonsquare
    }

    pub fn is_prefix_of(&self, other: &FieldCtx) -> bool {
        self.p == other.p
            && self.levels.len() <= other.levels.len()
            && self.levels[..] == other.levels[..self.levels.len()]
    }

    pub fn fq(&self, l: usize) -> Fq<'_> {
        Fq { ctx: self, l }
    }

    // ----- raw element operations -----

    pub fn zero(&self, l: usize) -> El {
        vec![0; self.sizes[l]]
    }

    pub fn one(&self, l: usize) -> El {
        let mut v = self.zero(l);
        v[0] = 1 % self.p;
        v
    }

    pub fn from_u64(&self, l: usize, x: u64) -> El {
        let mut v = self.zero(l);
        v[0] = x % self.p;
        v
    }

    pub fn from_i64(&self, l: usize, x: i64) -> El {
        let mut v = self.zero(l);
        v[0] = prime::reduce_i64(x, self.p);
        v
    }

    pub fn is_zero_el(a: &[u64]) -> bool {
        a.iter().all(|&c| c == 0)
    }

    pub fn is_one_el(a: &[u64]) -> bool {
        a[0] == 1 && a[1..].iter().all(|&c| c == 0)
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> El {
        a.iter().zip(b).map(|(&x, &y)| addmod(x, y, self.p)).collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> El {
        a.iter().zip(b).map(|(&x, &y)| submod(x, y, self.p)).collect()
    }

    pub fn neg(&self, a: &[u64]) -> El {
        a.iter().map(|&x| negmod(x, self.p)).collect()
    }

    pub fn add_assign(&self, a: &mut [u64], b: &[u64]) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x = addmod(*x, y, self.p);
        }
    }

    pub fn sub_assign(&self, a: &mut [u64], b: &[u64]) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x = submod(*x, y, self.p);
        }
    }

    /// Multiply by a prime-field scalar.
    pub fn scale(&self, a: &[u64], s: u64) -> El {
        a.iter().map(|&x| mulmod(x, s, self.p)).collect()
    }

    pub fn mul(&self, l: usize, a: &[u64], b: &[u64]) -> El {
        let mut out = vec![0; self.sizes[l]];
        self.mul_into(l, a, b, &mut out);
        out
    }

    /// `out = a * b` at level `l`; `out` must have the level's size.
    pub fn mul_into(&self, l: usize, a: &[u64], b: &[u64], out: &mut [u64]) {
        let p = self.p;
        match l {
            0 => out[0] = mulmod(a[0], b[0], p),
            1 => {
                let lev = &self.levels[0];
                let d = lev.degree;
                let mut prod = vec![0u64; 2 * d - 1];
                for i in 0..d {
                    let ai = a[i];
                    if ai == 0 {
                        continue;
                    }
                    for j in 0..d {
                        if b[j] != 0 {
                            prod[i + j] = addmod(prod[i + j], mulmod(ai, b[j], p), p);
                        }
                    }
                }
                for t in (d..2 * d - 1).rev() {
                    let c = prod[t];
                    if c == 0 {
                        continue;
                    }
                    for j in 0..d {
                        let m = lev.minpoly[j][0];
                        if m != 0 {
                            prod[t - d + j] = submod(prod[t - d + j], mulmod(c, m, p), p);
                        }
                    }
                }
                out.copy_from_slice(&prod[..d]);
            }
            _ => {
                let lev = &self.levels[l - 1];
                let d = lev.degree;
                let s = self.sizes[l - 1];
                let nz_a: Vec<bool> = (0..d).map(|i| !Self::is_zero_el(&a[i * s..(i + 1) * s])).collect();
                let nz_b: Vec<bool> = (0..d).map(|i| !Self::is_zero_el(&b[i * s..(i + 1) * s])).collect();
                let mut prod = vec![0u64; (2 * d - 1) * s];
                let mut tmp = vec![0u64; s];
                for i in 0..d {
                    if !nz_a[i] {
                        continue;
                    }
                    for j in 0..d {
                        if !nz_b[j] {
                            continue;
                        }
                        self.mul_into(l - 1, &a[i * s..(i + 1) * s], &b[j * s..(j + 1) * s], &mut tmp);
                        self.add_assign(&mut prod[(i + j) * s..(i + j + 1) * s], &tmp);
                    }
                }
                for t in (d..2 * d - 1).rev() {
                    let c: Vec<u64> = prod[t * s..(t + 1) * s].to_vec();
                    if Self::is_zero_el(&c) {
                        continue;
                    }
                    for j in 0..d {
                        if Self::is_zero_el(&lev.minpoly[j]) {
                            continue;
                        }
                        self.mul_into(l - 1, &c, &lev.minpoly[j], &mut tmp);
                        let k = t - d + j;
                        self.sub_assign(&mut prod[k * s..(k + 1) * s], &tmp);
                    }
                }
                out.copy_from_slice(&prod[..d * s]);
            }
        }
    }

    pub fn inv(&self, l: usize, a: &[u64]) -> Result<El> {
        if Self::is_zero_el(a) {
            return Err(Error::DivisionByZero);
        }
        if l == 0 {
            return Ok(vec![invmod(a[0], self.p).ok_or(Error::DivisionByZero)?]);
        }
        // Elements of a lower level invert there.
        let ll = self.level_of(a);
        if ll < l {
            let r = self.inv(ll, &a[..self.sizes[ll]])?;
            return Ok(self.embed(ll, l, &r));
        }
        let lev = &self.levels[l - 1];
        let s = self.sizes[l - 1];
        let below = self.fq(l - 1);
        let ap: Vec<El> = poly::trim(below, a.chunks(s).map(|c| c.to_vec()).collect());
        let (g, u, _) = poly::gcdext(below, &ap, &lev.minpoly);
        if g.len() != 1 {
            return Err(Error::DivisionByZero);
        }
        let gi = self.inv(l - 1, &g[0])?;
        let mut out = self.zero(l);
        for (i, c) in u.iter().enumerate() {
            let v = self.mul(l - 1, c, &gi);
            out[i * s..(i + 1) * s].copy_from_slice(&v);
        }
        Ok(out)
    }

    pub fn div(&self, l: usize, a: &[u64], b: &[u64]) -> Result<El> {
        let bi = self.inv(l, b)?;
        Ok(self.mul(l, a, &bi))
    }

    pub fn pow_u64(&self, l: usize, a: &[u64], mut e: u64) -> El {
        let mut r = self.one(l);
        let mut b = a.to_vec();
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(l, &r, &b);
            }
            e >>= 1;
            if e > 0 {
                b = self.mul(l, &b, &b);
            }
        }
        r
    }

    pub fn pow(&self, l: usize, a: &[u64], e: &BigUint) -> El {
        let mut r = self.one(l);
        let bits = e.bits();
        for i in (0..bits).rev() {
            r = self.mul(l, &r, &r);
            if e.bit(i) {
                r = self.mul(l, &r, a);
            }
        }
        r
    }

    /// `a^p`.
    pub fn frobenius(&self, l: usize, a: &[u64]) -> El {
        if l == 0 {
            return a.to_vec();
        }
        self.pow_u64(l, a, self.p)
    }

    /// `a^(|level l|)`-th power map composed `k` times over level `base`: `a^(|base|^k)`.
    pub fn frobenius_over(&self, l: usize, base: usize, a: &[u64], k: usize) -> El {
        let mut r = a.to_vec();
        for _ in 0..k * self.sizes[base] {
            r = self.frobenius(l, &r);
        }
        r
    }

    /// Inverse Frobenius: the unique `b` with `b^p = a`.
    pub fn pth_root(&self, l: usize, a: &[u64]) -> El {
        let mut r = a.to_vec();
        for _ in 0..self.sizes[l].saturating_sub(1) {
            r = self.frobenius(l, &r);
        }
        r
    }

    pub fn embed(&self, from: usize, to: usize, a: &[u64]) -> El {
        debug_assert!(from <= to);
        let mut v = a[..self.sizes[from]].to_vec();
        v.resize(self.sizes[to], 0);
        v
    }

    /// Smallest level containing `a`.
    pub fn level_of(&self, a: &[u64]) -> usize {
        let last = a.iter().rposition(|&c| c != 0).map(|i| i + 1).unwrap_or(0);
        (0..self.sizes.len()).find(|&l| self.sizes[l] >= last).unwrap_or(self.top())
    }

    pub fn is_square_el(&self, l: usize, a: &[u64]) -> bool {
        if self.p == 2 || Self::is_zero_el(a) {
            return true;
        }
        if l == 0 {
            return powmod(a[0], (self.p - 1) / 2, self.p) == 1;
        }
        let e = (self.order(l) - 1u32) >> 1;
        Self::is_one_el(&self.pow(l, a, &e))
    }

    /// Deterministic nonsquare of level `l` (odd characteristic).
    pub fn nonsquare_el(&self, l: usize) -> El {
        if l == 0 {
            return vec![self.nonsquare.expect("odd characteristic")];
        }
        if self.sizes[l] % 2 == 1 {
            return self.from_u64(l, self.nonsquare.expect("odd characteristic"));
        }
        // every element of the level below is a square here, so start past it
        let Some(mut idx) = self.order_u64(l - 1) else {
            let g = self.generator(l);
            let mut k = 0u64;
            loop {
                let c = self.add(&g, &self.element_from_index(l, k));
                if !self.is_square_el(l, &c) {
                    return c;
                }
                k += 1;
            }
        };
        loop {
            let c = self.element_from_index(l, idx);
            if !self.is_square_el(l, &c) {
                return c;
            }
            idx += 1;
        }
    }

    /// Square root with the canonical choice (lexicographically smaller of `±w`).
    pub fn sqrt_el(&self, l: usize, a: &[u64]) -> Result<El> {
        if Self::is_zero_el(a) {
            return Ok(self.zero(l));
        }
        if self.p == 2 {
            // a^(q/2)
            let mut r = a.to_vec();
            for _ in 0..self.sizes[l] - 1 {
                r = self.mul(l, &r, &r);
            }
            return Ok(r);
        }
        let ll = self.level_of(a);
        if ll < l && self.is_square_el(ll, &a[..self.sizes[ll]]) {
            let r = self.sqrt_el(ll, &a[..self.sizes[ll]])?;
            return Ok(self.embed(ll, l, &r));
        }
        if !self.is_square_el(l, a) {
            return Err(Error::NotASquare);
        }
        let q1 = self.order(l) - 1u32;
        let s = q1.trailing_zeros().unwrap_or(0);
        let t = &q1 >> s;
        let z = self.nonsquare_el(l);
        let mut m = s;
        let mut c = self.pow(l, &z, &t);
        let mut tt = self.pow(l, a, &t);
        let mut r = self.pow(l, a, &((&t + 1u32) >> 1));
        while !Self::is_one_el(&tt) {
            let mut i = 0u64;
            let mut x = tt.clone();
            while !Self::is_one_el(&x) {
                x = self.mul(l, &x, &x);
                i += 1;
            }
            let mut b = c.clone();
            for _ in 0..(m - i - 1) {
                b = self.mul(l, &b, &b);
            }
            m = i;
            c = self.mul(l, &b, &b);
            tt = self.mul(l, &tt, &c);
            r = self.mul(l, &r, &b);
        }
        let nr = self.neg(&r);
        Ok(if cmp_lex(&nr, &r) == Ordering::Less { nr } else { r })
    }

    /// Absolute trace of `a` down to the prime field.
    pub fn abs_trace(&self, l: usize, a: &[u64]) -> u64 {
        let mut acc = a.to_vec();
        let mut x = a.to_vec();
        for _ in 1..self.sizes[l] {
            x = self.frobenius(l, &x);
            self.add_assign(&mut acc, &x);
        }
        acc[0]
    }

    pub fn random_el<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> El {
        (0..self.sizes[l]).map(|_| rng.gen_range(0..self.p)).collect()
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> El {
        loop {
            let v = self.random_el(l, rng);
            if !Self::is_zero_el(&v) {
                return v;
            }
        }
    }

    /// Element with base-`p` digits of `idx` as coefficients.
    pub fn element_from_index(&self, l: usize, mut idx: u64) -> El {
        let mut v = self.zero(l);
        for c in v.iter_mut() {
            *c = idx % self.p;
            idx /= self.p;
        }
        v
    }

    pub fn element_index(&self, a: &[u64]) -> u64 {
        a.iter().rev().fold(0u64, |acc, &c| acc * self.p + c)
    }

    pub fn elem(self: &Arc<Self>, l: usize, c: El) -> FieldElem {
        FieldElem::new(self.clone(), l, c)
    }

    /// The generator `y_l` of level `l`, as an element of level `l`.
    pub fn generator(&self, l: usize) -> El {
        assert!(l >= 1);
        let mut v = self.zero(l);
        v[self.sizes[l - 1]] = 1;
        v
    }
}

/// Lexicographic comparison of coefficient vectors, low index first.
pub fn cmp_lex(a: &[u64], b: &[u64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Borrowed view of one level of a context.
#[derive(Clone, Copy)]
pub struct Fq<'a> {
    pub ctx: &'a FieldCtx,
    pub l: usize,
}

impl<'a> Fq<'a> {
    pub fn p(&self) -> u64 {
        self.ctx.p
    }
    pub fn size(&self) -> usize {
        self.ctx.sizes[self.l]
    }
    pub fn zero(&self) -> El {
        self.ctx.zero(self.l)
    }
    pub fn one(&self) -> El {
        self.ctx.one(self.l)
    }
    pub fn from_i64(&self, x: i64) -> El {
        self.ctx.from_i64(self.l, x)
    }
    pub fn is_zero(&self, a: &[u64]) -> bool {
        FieldCtx::is_zero_el(a)
    }
    pub fn is_one(&self, a: &[u64]) -> bool {
        FieldCtx::is_one_el(a)
    }
    pub fn add(&self, a: &[u64], b: &[u64]) -> El {
        self.ctx.add(a, b)
    }
    pub fn sub(&self, a: &[u64], b: &[u64]) -> El {
        self.ctx.sub(a, b)
    }
    pub fn neg(&self, a: &[u64]) -> El {
        self.ctx.neg(a)
    }
    pub fn mul(&self, a: &[u64], b: &[u64]) -> El {
        self.ctx.mul(self.l, a, b)
    }
    pub fn inv(&self, a: &[u64]) -> El {
        self.ctx.inv(self.l, a).expect("inverse of zero")
    }
    pub fn div(&self, a: &[u64], b: &[u64]) -> El {
        self.mul(a, &self.inv(b))
    }
    pub fn pow(&self, a: &[u64], e: &BigUint) -> El {
        self.ctx.pow(self.l, a, e)
    }
    pub fn order(&self) -> BigUint {
        self.ctx.order(self.l)
    }
}

/// Field element bound to its context.
#[derive(Clone, Debug)]
pub struct FieldElem {
    ctx: Arc<FieldCtx>,
    level: usize,
    c: El,
}

impl PartialEq for FieldElem {
    fn eq(&self, other: &Self) -> bool {
        if !(self.ctx.is_prefix_of(&other.ctx) || other.ctx.is_prefix_of(&self.ctx)) {
            return false;
        }
        let n = self.c.len().max(other.c.len());
        (0..n).all(|i| self.c.get(i).copied().unwrap_or(0) == other.c.get(i).copied().unwrap_or(0))
    }
}

impl Eq for FieldElem {}

/// Arithmetic selector for [`arithmetic`].
#[derive(Clone, Copy, Debug)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Inv,
    Pow(u64),
}

/// Apply `kind` to `a` (and `b` for binary operations).
pub fn arithmetic(a: &FieldElem, b: &FieldElem, kind: ArithOp) -> Result<FieldElem> {
    match kind {
        ArithOp::Add => a.add(b),
        ArithOp::Sub => a.sub(b),
        ArithOp::Mul => a.mul(b),
        ArithOp::Div => a.div(b),
        ArithOp::Inv => a.inv(),
        ArithOp::Pow(k) => Ok(a.pow(k)),
    }
}

impl FieldElem {
    pub fn new(ctx: Arc<FieldCtx>, level: usize, mut c: El) -> FieldElem {
        c.resize(ctx.size(level), 0);
        FieldElem { ctx, level, c }
    }

    pub fn from_i64(ctx: &Arc<FieldCtx>, x: i64) -> FieldElem {
        FieldElem::new(ctx.clone(), 0, ctx.from_i64(0, x))
    }

    pub fn zero(ctx: &Arc<FieldCtx>, level: usize) -> FieldElem {
        FieldElem::new(ctx.clone(), level, ctx.zero(level))
    }

    pub fn one(ctx: &Arc<FieldCtx>, level: usize) -> FieldElem {
        FieldElem::new(ctx.clone(), level, ctx.one(level))
    }

    pub fn ctx(&self) -> &Arc<FieldCtx> {
        &self.ctx
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.c
    }

    pub fn into_coeffs(self) -> El {
        self.c
    }

    pub fn is_zero(&self) -> bool {
        FieldCtx::is_zero_el(&self.c)
    }

    pub fn is_one(&self) -> bool {
        FieldCtx::is_one_el(&self.c)
    }

    /// Re-express at a higher level (lossless).
    pub fn lift(&self, level: usize) -> FieldElem {
        assert!(level >= self.level);
        FieldElem::new(self.ctx.clone(), level, self.ctx.embed(self.level, level, &self.c))
    }

    fn common(&self, o: &FieldElem) -> Result<(Arc<FieldCtx>, usize, El, El)> {
        let ctx = if Arc::ptr_eq(&self.ctx, &o.ctx) || o.ctx.is_prefix_of(&self.ctx) {
            self.ctx.clone()
        } else if self.ctx.is_prefix_of(&o.ctx) {
            o.ctx.clone()
        } else {
            return Err(Error::IncompatibleContexts);
        };
        let l = self.level.max(o.level);
        let a = ctx.embed(self.level, l, &self.c);
        let b = ctx.embed(o.level, l, &o.c);
        Ok((ctx, l, a, b))
    }

    pub fn add(&self, o: &FieldElem) -> Result<FieldElem> {
        let (ctx, l, a, b) = self.common(o)?;
        let c = ctx.add(&a, &b);
        Ok(FieldElem::new(ctx, l, c))
    }

    pub fn sub(&self, o: &FieldElem) -> Result<FieldElem> {
        let (ctx, l, a, b) = self.common(o)?;
        let c = ctx.sub(&a, &b);
        Ok(FieldElem::new(ctx, l, c))
    }

    pub fn mul(&self, o: &FieldElem) -> Result<FieldElem> {
        let (ctx, l, a, b) = self.common(o)?;
        let c = ctx.mul(l, &a, &b);
        Ok(FieldElem::new(ctx, l, c))
    }

    pub fn div(&self, o: &FieldElem) -> Result<FieldElem> {
        let (ctx, l, a, b) = self.common(o)?;
        let c = ctx.div(l, &a, &b)?;
        Ok(FieldElem::new(ctx, l, c))
    }

    pub fn neg(&self) -> FieldElem {
        FieldElem::new(self.ctx.clone(), self.level, self.ctx.neg(&self.c))
    }

    pub fn inv(&self) -> Result<FieldElem> {
        let c = self.ctx.inv(self.level, &self.c)?;
        Ok(FieldElem::new(self.ctx.clone(), self.level, c))
    }

    pub fn pow(&self, k: u64) -> FieldElem {
        FieldElem::new(self.ctx.clone(), self.level, self.ctx.pow_u64(self.level, &self.c, k))
    }

    pub fn pow_big(&self, e: &BigUint) -> FieldElem {
        FieldElem::new(self.ctx.clone(), self.level, self.ctx.pow(self.level, &self.c, e))
    }

    pub fn frobenius(&self) -> FieldElem {
        FieldElem::new(self.ctx.clone(), self.level, self.ctx.frobenius(self.level, &self.c))
    }

    pub fn is_square(&self) -> bool {
        self.ctx.is_square_el(self.level, &self.c)
    }

    pub fn sqrt(&self) -> Result<FieldElem> {
        let c = self.ctx.sqrt_el(self.level, &self.c)?;
        Ok(FieldElem::new(self.ctx.clone(), self.level, c))
    }

    /// Multiplicative order divides `|level| - 1`; true when `self^(|level|-1) = 1`.
    pub fn is_unit(&self) -> bool {
        !self.is_zero()
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", text::format_element(&self.ctx, self.level, &self.c))
    }
}

/// Build `F_p[y]/(m)` for a prime-field minimal polynomial given by integer coefficients.
pub fn prime_extension(p: u64, minpoly: &[i64]) -> Result<Arc<FieldCtx>> {
    let base = FieldCtx::prime(p)?;
    let m: Vec<El> = minpoly.iter().map(|&c| base.from_i64(0, c)).collect();
    base.extend("a1", &m)
}

/// `F_q` for a prime power `q`, with the lexicographically smallest monic
/// irreducible (constant term first) as modulus when `q` is not prime.
pub fn field_of_order(q: u64) -> Result<Arc<FieldCtx>> {
    let ps = prime::prime_factors(q);
    let bad = || Error::InvalidInput(format!("{q} is not a prime power"));
    let p = *ps.first().ok_or_else(bad)?;
    if ps.iter().any(|&r| r != p) {
        return Err(bad());
    }
    let (mut k, mut t) = (0usize, q);
    while t > 1 {
        t /= p;
        k += 1;
    }
    let base = FieldCtx::prime(p)?;
    if k == 1 {
        return Ok(base);
    }
    let f = base.fq(0);
    let total = p.checked_pow(k as u32).ok_or_else(bad)?;
    for idx in 0..total {
        let mut c = idx;
        let mut m: Vec<El> = (0..k)
            .map(|_| {
                let e = base.from_u64(0, c % p);
                c /= p;
                e
            })
            .collect();
        m.push(base.one(0));
        if factor::is_irreducible(f, &m) {
            return base.extend("a1", &m);
        }
    }
    Err(bad())
}

#[allow(dead_code)]
fn _assert_traits() {
    fn is_send_sync<T: Send + Sync>() {}
    is_send_sync::<FieldCtx>();
    is_send_sync::<FieldElem>();
    let _ = BigUint::zero() + BigUint::one();
}

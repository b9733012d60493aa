//! Dense univariate polynomials over one level of a tower.
//!
//! The free functions work on raw coefficient vectors (`Vec<El>`, low to
//! high, no trailing zeros; the zero polynomial is empty).  [`UniPoly`] wraps
//! them with a context for the public API.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;

use super::{El, FieldCtx, Fq};
use crate::error::{Error, Result};

pub type Coeffs = Vec<El>;

pub fn trim(_f: Fq, mut a: Coeffs) -> Coeffs {
    while a.last().is_some_and(|c| FieldCtx::is_zero_el(c)) {
        a.pop();
    }
    a
}

pub fn degree(a: &[El]) -> Option<usize> {
    if a.is_empty() {
        None
    } else {
        Some(a.len() - 1)
    }
}

pub fn is_one(f: Fq, a: &[El]) -> bool {
    a.len() == 1 && f.is_one(&a[0])
}

pub fn constant(f: Fq, c: El) -> Coeffs {
    trim(f, vec![c])
}

/// The monomial `x`.
pub fn x(f: Fq) -> Coeffs {
    vec![f.zero(), f.one()]
}

pub fn monic(f: Fq, a: &[El]) -> Coeffs {
    match a.last() {
        None => Vec::new(),
        Some(lc) if f.is_one(lc) => a.to_vec(),
        Some(lc) => {
            let li = f.inv(lc);
            a.iter().map(|c| f.mul(c, &li)).collect()
        }
    }
}

pub fn add(f: Fq, a: &[El], b: &[El]) -> Coeffs {
    let n = a.len().max(b.len());
    let z = f.zero();
    let r = (0..n)
        .map(|i| f.add(a.get(i).unwrap_or(&z), b.get(i).unwrap_or(&z)))
        .collect();
    trim(f, r)
}

pub fn sub(f: Fq, a: &[El], b: &[El]) -> Coeffs {
    let n = a.len().max(b.len());
    let z = f.zero();
    let r = (0..n)
        .map(|i| f.sub(a.get(i).unwrap_or(&z), b.get(i).unwrap_or(&z)))
        .collect();
    trim(f, r)
}

pub fn neg(f: Fq, a: &[El]) -> Coeffs {
    a.iter().map(|c| f.neg(c)).collect()
}

pub fn scale(f: Fq, a: &[El], s: &[u64]) -> Coeffs {
    trim(f, a.iter().map(|c| f.mul(c, s)).collect())
}

pub fn mul(f: Fq, a: &[El], b: &[El]) -> Coeffs {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut r = vec![f.zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if f.is_zero(ai) {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if f.is_zero(bj) {
                continue;
            }
            let t = f.mul(ai, bj);
            f.ctx.add_assign(&mut r[i + j], &t);
        }
    }
    trim(f, r)
}

/// Quotient and remainder; panics on division by the zero polynomial.
pub fn divrem(f: Fq, a: &[El], b: &[El]) -> (Coeffs, Coeffs) {
    assert!(!b.is_empty(), "polynomial division by zero");
    if a.len() < b.len() {
        return (Vec::new(), a.to_vec());
    }
    let db = b.len() - 1;
    let lc_inv = f.inv(&b[db]);
    let mut r = a.to_vec();
    let mut q = vec![f.zero(); a.len() - db];
    for k in (0..q.len()).rev() {
        let c = f.mul(&r[k + db], &lc_inv);
        if f.is_zero(&c) {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if !f.is_zero(bj) {
                let t = f.mul(&c, bj);
                f.ctx.sub_assign(&mut r[k + j], &t);
            }
        }
        q[k] = c;
    }
    r.truncate(db);
    (trim(f, q), trim(f, r))
}

pub fn rem(f: Fq, a: &[El], b: &[El]) -> Coeffs {
    if a.len() < b.len() {
        return a.to_vec();
    }
    divrem(f, a, b).1
}

pub fn div_exact(f: Fq, a: &[El], b: &[El]) -> Coeffs {
    divrem(f, a, b).0
}

/// Monic gcd (zero if both inputs are zero).
pub fn gcd(f: Fq, a: &[El], b: &[El]) -> Coeffs {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    while !b.is_empty() {
        let r = rem(f, &a, &b);
        a = b;
        b = r;
    }
    monic(f, &a)
}

/// `(g, s, t)` with `s·a + t·b = g`, `g` monic.
pub fn gcdext(f: Fq, a: &[El], b: &[El]) -> (Coeffs, Coeffs, Coeffs) {
    let (mut r0, mut r1) = (a.to_vec(), b.to_vec());
    let (mut s0, mut s1) = (vec![f.one()], Vec::new());
    let (mut t0, mut t1) = (Vec::new(), vec![f.one()]);
    while !r1.is_empty() {
        let (q, r) = divrem(f, &r0, &r1);
        let s2 = sub(f, &s0, &mul(f, &q, &s1));
        let t2 = sub(f, &t0, &mul(f, &q, &t1));
        r0 = r1;
        r1 = r;
        s0 = s1;
        s1 = s2;
        t0 = t1;
        t1 = t2;
    }
    match r0.last() {
        None => (r0, s0, t0),
        Some(lc) => {
            let li = f.inv(lc);
            (scale(f, &r0, &li), scale(f, &s0, &li), scale(f, &t0, &li))
        }
    }
}

/// Inverse of `a` modulo `m`, if coprime.
pub fn invmod(f: Fq, a: &[El], m: &[El]) -> Option<Coeffs> {
    let (g, s, _) = gcdext(f, a, m);
    if is_one(f, &g) {
        Some(rem(f, &s, m))
    } else {
        None
    }
}

pub fn mulmod(f: Fq, a: &[El], b: &[El], m: &[El]) -> Coeffs {
    rem(f, &mul(f, a, b), m)
}

pub fn powmod(f: Fq, a: &[El], e: &BigUint, m: &[El]) -> Coeffs {
    let mut r = rem(f, &[f.one()], m);
    let base = rem(f, a, m);
    for i in (0..e.bits()).rev() {
        r = mulmod(f, &r, &r, m);
        if e.bit(i) {
            r = mulmod(f, &r, &base, m);
        }
    }
    r
}

pub fn pow(f: Fq, a: &[El], mut e: u64) -> Coeffs {
    let mut r = vec![f.one()];
    let mut b = a.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            r = mul(f, &r, &b);
        }
        e >>= 1;
        if e > 0 {
            b = mul(f, &b, &b);
        }
    }
    r
}

pub fn derivative(f: Fq, a: &[El]) -> Coeffs {
    let r = a
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| f.ctx.scale(c, (i as u64) % f.p()))
        .collect();
    trim(f, r)
}

/// Horner evaluation at a point of the same level.
pub fn eval(f: Fq, a: &[El], x: &[u64]) -> El {
    let mut acc = f.zero();
    for c in a.iter().rev() {
        acc = f.add(&f.mul(&acc, x), c);
    }
    acc
}

/// `a(b(x)) mod m`.
pub fn compose_mod(f: Fq, a: &[El], b: &[El], m: &[El]) -> Coeffs {
    let mut acc: Coeffs = Vec::new();
    for c in a.iter().rev() {
        acc = add(f, &mulmod(f, &acc, b, m), &constant(f, c.clone()));
    }
    rem(f, &acc, m)
}

/// `a(-x)`.
pub fn negate_var(f: Fq, a: &[El]) -> Coeffs {
    a.iter()
        .enumerate()
        .map(|(i, c)| if i % 2 == 1 { f.neg(c) } else { c.clone() })
        .collect()
}

/// Re-express coefficients at a higher level.
pub fn embed(ctx: &FieldCtx, from: usize, to: usize, a: &[El]) -> Coeffs {
    a.iter().map(|c| ctx.embed(from, to, c)).collect()
}

/// Public polynomial type bound to a context level.
#[derive(Clone, Debug)]
pub struct UniPoly {
    pub ctx: Arc<FieldCtx>,
    pub level: usize,
    pub coeffs: Coeffs,
}

impl PartialEq for UniPoly {
    fn eq(&self, other: &Self) -> bool {
        *self.ctx == *other.ctx && self.level == other.level && self.coeffs == other.coeffs
    }
}

impl Eq for UniPoly {}

impl UniPoly {
    pub fn new(ctx: Arc<FieldCtx>, level: usize, coeffs: Coeffs) -> UniPoly {
        let coeffs = coeffs
            .into_iter()
            .map(|mut c| {
                c.resize(ctx.size(level), 0);
                c
            })
            .collect();
        let coeffs = trim(ctx.fq(level), coeffs);
        UniPoly { ctx, level, coeffs }
    }

    /// Prime-field polynomial from signed integer coefficients, low to high.
    pub fn from_i64(ctx: &Arc<FieldCtx>, level: usize, c: &[i64]) -> UniPoly {
        let coeffs = c.iter().map(|&v| ctx.from_i64(level, v)).collect();
        UniPoly::new(ctx.clone(), level, coeffs)
    }

    pub fn fq(&self) -> Fq<'_> {
        self.ctx.fq(self.level)
    }

    pub fn degree(&self) -> Option<usize> {
        degree(&self.coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last().is_some_and(|c| FieldCtx::is_one_el(c))
    }

    pub fn leading(&self) -> Option<&El> {
        self.coeffs.last()
    }

    fn same(&self, o: &UniPoly) -> Result<()> {
        if *self.ctx != *o.ctx || self.level != o.level {
            return Err(Error::IncompatibleContexts);
        }
        Ok(())
    }

    pub fn add(&self, o: &UniPoly) -> Result<UniPoly> {
        self.same(o)?;
        Ok(UniPoly::new(self.ctx.clone(), self.level, add(self.fq(), &self.coeffs, &o.coeffs)))
    }

    pub fn sub(&self, o: &UniPoly) -> Result<UniPoly> {
        self.same(o)?;
        Ok(UniPoly::new(self.ctx.clone(), self.level, sub(self.fq(), &self.coeffs, &o.coeffs)))
    }

    pub fn mul(&self, o: &UniPoly) -> Result<UniPoly> {
        self.same(o)?;
        Ok(UniPoly::new(self.ctx.clone(), self.level, mul(self.fq(), &self.coeffs, &o.coeffs)))
    }

    pub fn divrem(&self, o: &UniPoly) -> Result<(UniPoly, UniPoly)> {
        self.same(o)?;
        if o.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let (q, r) = divrem(self.fq(), &self.coeffs, &o.coeffs);
        Ok((
            UniPoly::new(self.ctx.clone(), self.level, q),
            UniPoly::new(self.ctx.clone(), self.level, r),
        ))
    }

    pub fn gcd(&self, o: &UniPoly) -> Result<UniPoly> {
        self.same(o)?;
        Ok(UniPoly::new(self.ctx.clone(), self.level, gcd(self.fq(), &self.coeffs, &o.coeffs)))
    }

    pub fn monic(&self) -> UniPoly {
        UniPoly::new(self.ctx.clone(), self.level, monic(self.fq(), &self.coeffs))
    }

    pub fn derivative(&self) -> UniPoly {
        UniPoly::new(self.ctx.clone(), self.level, derivative(self.fq(), &self.coeffs))
    }

    pub fn eval(&self, x: &[u64]) -> El {
        eval(self.fq(), &self.coeffs, x)
    }

    pub fn pow(&self, e: u64) -> UniPoly {
        UniPoly::new(self.ctx.clone(), self.level, pow(self.fq(), &self.coeffs, e))
    }

    /// Re-express over a higher level of the same (or an extended) context.
    pub fn lift(&self, ctx: &Arc<FieldCtx>, level: usize) -> UniPoly {
        assert!(self.ctx.is_prefix_of(ctx) && level >= self.level);
        UniPoly::new(ctx.clone(), level, embed(ctx, self.level, level, &self.coeffs))
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(fm, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if FieldCtx::is_zero_el(c) {
                continue;
            }
            if !first {
                write!(fm, " + ")?;
            }
            first = false;
            let cs = super::text::format_element(&self.ctx, self.level, c);
            match i {
                0 => write!(fm, "{cs}")?,
                1 if FieldCtx::is_one_el(c) => write!(fm, "x")?,
                1 => write!(fm, "{cs}*x")?,
                _ if FieldCtx::is_one_el(c) => write!(fm, "x^{i}")?,
                _ => write!(fm, "{cs}*x^{i}")?,
            }
        }
        Ok(())
    }
}

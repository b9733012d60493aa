//! Factoring univariate polynomials over a finite level: squarefree split,
//! distinct-degree split, then Cantor–Zassenhaus or Berlekamp.

use std::sync::Arc;

use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::poly::{self, Coeffs, UniPoly};
use super::{El, FieldCtx, FieldElem, Fq};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FactorMethod {
    #[default]
    CantorZassenhaus,
    Berlekamp,
}

/// Largest field for which Berlekamp enumerates constants.
const BERLEKAMP_MAX_Q: u64 = 1 << 16;

fn p_th_root_poly(f: Fq, a: &[El]) -> Coeffs {
    let p = f.p() as usize;
    let r = a
        .iter()
        .step_by(p)
        .map(|c| f.ctx.pth_root(f.l, c))
        .collect();
    poly::trim(f, r)
}

/// Squarefree decomposition of a monic polynomial: `(g_i, m_i)` with `f = ∏ g_i^{m_i}`.
pub fn squarefree(f: Fq, a: &[El]) -> Vec<(Coeffs, usize)> {
    let mut out = Vec::new();
    if a.len() <= 1 {
        return out;
    }
    let a = poly::monic(f, a);
    let da = poly::derivative(f, &a);
    let mut c = poly::gcd(f, &a, &da);
    let mut w = poly::div_exact(f, &a, &c);
    let mut i = 1;
    while !poly::is_one(f, &w) {
        let y = poly::gcd(f, &w, &c);
        let fac = poly::div_exact(f, &w, &y);
        if fac.len() > 1 {
            out.push((fac, i));
        }
        c = poly::div_exact(f, &c, &y);
        w = y;
        i += 1;
    }
    if c.len() > 1 {
        let r = p_th_root_poly(f, &c);
        let p = f.p() as usize;
        for (g, m) in squarefree(f, &r) {
            out.push((g, m * p));
        }
    }
    out
}

/// Distinct-degree factorization of a squarefree monic polynomial.
pub fn distinct_degree(f: Fq, a: &[El]) -> Vec<(Coeffs, usize)> {
    let mut out = Vec::new();
    let q = f.order();
    let x = poly::x(f);
    let mut rest = a.to_vec();
    let mut h = poly::rem(f, &x, &rest);
    let mut d = 1;
    while rest.len() > 1 && 2 * d < rest.len() {
        h = poly::powmod(f, &h, &q, &rest);
        let g = poly::gcd(f, &poly::sub(f, &h, &x), &rest);
        if g.len() > 1 {
            rest = poly::div_exact(f, &rest, &g);
            h = poly::rem(f, &h, &rest);
            out.push((g, d));
        }
        d += 1;
    }
    if rest.len() > 1 {
        let deg = rest.len() - 1;
        out.push((rest, deg));
    }
    out
}

fn random_poly<R: Rng + ?Sized>(f: Fq, deg_bound: usize, rng: &mut R) -> Coeffs {
    let v = (0..deg_bound).map(|_| f.ctx.random_el(f.l, rng)).collect();
    poly::trim(f, v)
}

/// Splitting polynomial for equal-degree factorization.
fn edf_splitter<R: Rng + ?Sized>(f: Fq, a: &[El], d: usize, rng: &mut R) -> Coeffs {
    let n = a.len() - 1;
    let r = random_poly(f, n, rng);
    if f.p() == 2 {
        // Trace from F_{Q^d} to F_2.
        let k = f.size() * d;
        let mut t = r.clone();
        let mut acc = r;
        for _ in 1..k {
            t = poly::mulmod(f, &t, &t, a);
            acc = poly::add(f, &acc, &t);
        }
        acc
    } else {
        let e: BigUint = (f.order().pow(d as u32) - 1u32) >> 1;
        let b = poly::powmod(f, &r, &e, a);
        poly::sub(f, &b, &[f.one()])
    }
}

/// Equal-degree factorization (Cantor–Zassenhaus) of a squarefree monic
/// product of irreducibles of degree `d`.
pub fn equal_degree<R: Rng + ?Sized>(f: Fq, a: &[El], d: usize, rng: &mut R) -> Vec<Coeffs> {
    let n = a.len() - 1;
    if n == d {
        return vec![a.to_vec()];
    }
    loop {
        let b = edf_splitter(f, a, d, rng);
        let g = poly::gcd(f, &b, a);
        if g.len() > 1 && g.len() < a.len() {
            let h = poly::div_exact(f, a, &g);
            let mut out = equal_degree(f, &g, d, rng);
            out.extend(equal_degree(f, &h, d, rng));
            return out;
        }
    }
}

fn kernel_of_square(f: Fq, m: &mut [Vec<El>], n: usize) -> Vec<Vec<El>> {
    // Row reduce n x n matrix m (row-major) and return a basis of its right kernel.
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(pr) = (row..n).find(|&r| !f.is_zero(&m[r][col])) else {
            continue;
        };
        m.swap(row, pr);
        let inv = f.inv(&m[row][col]);
        for c in 0..n {
            m[row][c] = f.mul(&m[row][c], &inv);
        }
        for r in 0..n {
            if r != row && !f.is_zero(&m[r][col]) {
                let fac = m[r][col].clone();
                for c in 0..n {
                    let t = f.mul(&fac, &m[row][c]);
                    m[r][c] = f.sub(&m[r][c], &t);
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let mut basis = Vec::new();
    for free in (0..n).filter(|c| !pivots.contains(c)) {
        let mut v = vec![f.zero(); n];
        v[free] = f.one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = f.neg(&m[r][free]);
        }
        basis.push(v);
    }
    basis
}

/// Berlekamp's algorithm for a squarefree monic polynomial.
pub fn berlekamp(f: Fq, a: &[El]) -> Result<Vec<Coeffs>> {
    let n = a.len() - 1;
    if n <= 1 {
        return Ok(vec![a.to_vec()]);
    }
    let qn = f.ctx.order_u64(f.l).filter(|&q| q <= BERLEKAMP_MAX_Q).ok_or_else(|| {
        Error::TooLarge("Berlekamp enumerates the coefficient field; use Cantor-Zassenhaus".into())
    })?;
    let q = f.order();
    // Columns: x^{Q i} mod a, minus identity.
    let xq = poly::powmod(f, &poly::x(f), &q, a);
    let mut cur = vec![f.one()];
    let mut m = vec![vec![f.zero(); n]; n];
    for i in 0..n {
        for (r, row) in m.iter_mut().enumerate() {
            row[i] = cur.get(r).cloned().unwrap_or_else(|| f.zero());
        }
        m[i][i] = f.sub(&m[i][i], &f.one());
        cur = poly::mulmod(f, &cur, &xq, a);
    }
    let kernel = kernel_of_square(f, &mut m, n);
    let k = kernel.len();
    let mut factors = vec![a.to_vec()];
    for v in kernel.iter() {
        if factors.len() == k {
            break;
        }
        let v = poly::trim(f, v.clone());
        if v.len() <= 1 {
            continue;
        }
        let mut next = Vec::new();
        for u in factors {
            if u.len() <= 2 {
                next.push(u);
                continue;
            }
            let mut rest = u;
            for s in 0..qn {
                if rest.len() <= 1 {
                    break;
                }
                let c = f.ctx.element_from_index(f.l, s);
                let g = poly::gcd(f, &poly::sub(f, &v, &[c]), &rest);
                if g.len() > 1 && g.len() < rest.len() {
                    rest = poly::div_exact(f, &rest, &g);
                    next.push(g);
                }
            }
            if rest.len() > 1 {
                next.push(rest);
            }
        }
        factors = next;
    }
    Ok(factors)
}

/// Full factorization over the level of `f`: leading coefficient and sorted
/// monic irreducible factors with multiplicities.
pub fn factor_coeffs<R: Rng + ?Sized>(
    f: Fq,
    a: &[El],
    method: FactorMethod,
    rng: &mut R,
) -> Result<(El, Vec<(Coeffs, usize)>)> {
    if a.is_empty() {
        return Err(Error::InvalidInput("cannot factor the zero polynomial".into()));
    }
    let lc = a.last().unwrap().clone();
    let mut out = Vec::new();
    for (sq, m) in squarefree(f, a) {
        match method {
            FactorMethod::CantorZassenhaus => {
                for (g, d) in distinct_degree(f, &sq) {
                    for h in equal_degree(f, &g, d, rng) {
                        out.push((h, m));
                    }
                }
            }
            FactorMethod::Berlekamp => {
                for h in berlekamp(f, &sq)? {
                    out.push((h, m));
                }
            }
        }
    }
    out.sort_by(|x, y| {
        x.0.len()
            .cmp(&y.0.len())
            .then_with(|| cmp_poly(&x.0, &y.0))
            .then(x.1.cmp(&y.1))
    });
    // Merge equal factors coming from different squarefree layers.
    let mut merged: Vec<(Coeffs, usize)> = Vec::new();
    for (g, m) in out {
        match merged.last_mut() {
            Some((h, mm)) if *h == g => *mm += m,
            _ => merged.push((g, m)),
        }
    }
    Ok((lc, merged))
}

fn cmp_poly(a: &[El], b: &[El]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match super::cmp_lex(x, y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Factor a polynomial with an explicit seed for the randomized method.
pub fn factor_univariate(p: &UniPoly, method: FactorMethod, seed: u64) -> Result<Vec<(UniPoly, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, fs) = factor_coeffs(p.fq(), &p.coeffs, method, &mut rng)?;
    Ok(fs
        .into_iter()
        .map(|(g, m)| (UniPoly::new(p.ctx.clone(), p.level, g), m))
        .collect())
}

/// Rabin's irreducibility test for a monic polynomial.
pub fn is_irreducible(f: Fq, a: &[El]) -> bool {
    let Some(n) = poly::degree(a) else {
        return false;
    };
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let a = poly::monic(f, a);
    let q = f.order();
    let x = poly::x(f);
    // x^{Q^k} mod a for k = 1..n
    let mut pows = vec![poly::rem(f, &x, &a)];
    for _ in 0..n {
        let last = pows.last().unwrap();
        pows.push(poly::powmod(f, last, &q, &a));
    }
    if !poly::sub(f, &pows[n], &pows[0]).is_empty() {
        return false;
    }
    for r in super::prime::prime_factors(n as u64) {
        let k = n / r as usize;
        let g = poly::gcd(f, &poly::sub(f, &pows[k], &x), &a);
        if !poly::is_one(f, &g) {
            return false;
        }
    }
    true
}

/// Distinct roots of `a` in its own level.
pub fn roots<R: Rng + ?Sized>(f: Fq, a: &[El], rng: &mut R) -> Vec<El> {
    if a.len() <= 1 {
        return Vec::new();
    }
    let a = poly::monic(f, a);
    let x = poly::x(f);
    let xq = poly::powmod(f, &x, &f.order(), &a);
    let g = poly::gcd(f, &poly::sub(f, &xq, &x), &a);
    if g.len() <= 1 {
        return Vec::new();
    }
    let mut out: Vec<El> = equal_degree(f, &g, 1, rng)
        .into_iter()
        .map(|h| f.neg(&h[0]))
        .collect();
    out.sort_by(|u, v| super::cmp_lex(u, v));
    out
}

/// Random monic irreducible polynomial of degree `d`.
pub fn random_irreducible<R: Rng + ?Sized>(f: Fq, d: usize, rng: &mut R) -> Coeffs {
    loop {
        let mut c: Coeffs = (0..d).map(|_| f.ctx.random_el(f.l, rng)).collect();
        c.push(f.one());
        if is_irreducible(f, &c) {
            return c;
        }
    }
}

/// Extend the tower by a root of the irreducible `p` (given over the top level).
pub fn adjoin_root(ctx: &Arc<FieldCtx>, p: &UniPoly) -> Result<(Arc<FieldCtx>, FieldElem)> {
    if !p.ctx.is_prefix_of(ctx) || p.level != ctx.top() {
        return Err(Error::InvalidInput(
            "polynomial must be defined over the top level of the tower".into(),
        ));
    }
    let name = format!("a{}", ctx.depth() + 1);
    let c: Vec<El> = p.coeffs.iter().map(|c| {
        let mut c = c.clone();
        c.resize(ctx.size(ctx.top()), 0);
        c
    }).collect();
    let new = ctx.extend(&name, &c)?;
    let top = new.top();
    let root = FieldElem::new(new.clone(), top, new.generator(top));
    Ok((new, root))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polys(k: &Arc<FieldCtx>, fs: &[(UniPoly, usize)]) -> Vec<(Vec<i64>, usize)> {
        let _ = k;
        fs.iter()
            .map(|(g, m)| (g.coeffs.iter().map(|c| c[0] as i64).collect(), *m))
            .collect()
    }

    #[test]
    fn spec_factor_examples() {
        for method in [FactorMethod::CantorZassenhaus, FactorMethod::Berlekamp] {
            let k5 = FieldCtx::prime(5).unwrap();
            let f = UniPoly::from_i64(&k5, 0, &[-1, 0, 1]);
            let fs = factor_univariate(&f, method, 1).unwrap();
            assert_eq!(polys(&k5, &fs), vec![(vec![1, 1], 1), (vec![4, 1], 1)]);

            let k2 = FieldCtx::prime(2).unwrap();
            let f = UniPoly::from_i64(&k2, 0, &[1, 1, 1]);
            let fs = factor_univariate(&f, method, 1).unwrap();
            assert_eq!(polys(&k2, &fs), vec![(vec![1, 1, 1], 1)]);

            let k3 = FieldCtx::prime(3).unwrap();
            let f = UniPoly::from_i64(&k3, 0, &[0, 0, 1, 0, 1]);
            let fs = factor_univariate(&f, method, 1).unwrap();
            assert_eq!(polys(&k3, &fs), vec![(vec![0, 1], 2), (vec![1, 0, 1], 1)]);
        }
    }

    #[test]
    fn inseparable_layers() {
        // (x+1)^6 (x^2+1)^3 over F3
        let k3 = FieldCtx::prime(3).unwrap();
        let a = UniPoly::from_i64(&k3, 0, &[1, 1]).pow(6);
        let b = UniPoly::from_i64(&k3, 0, &[1, 0, 1]).pow(3);
        let f = a.mul(&b).unwrap();
        let fs = factor_univariate(&f, FactorMethod::CantorZassenhaus, 9).unwrap();
        assert_eq!(polys(&k3, &fs), vec![(vec![1, 1], 6), (vec![1, 0, 1], 3)]);
    }

    #[test]
    fn adjoin_examples() {
        let k3 = FieldCtx::prime(3).unwrap();
        let (k9, i) = adjoin_root(&k3, &UniPoly::from_i64(&k3, 0, &[1, 0, 1])).unwrap();
        assert_eq!(i.mul(&i).unwrap(), FieldElem::from_i64(&k9, -1));
        let k7 = FieldCtx::prime(7).unwrap();
        let (k49, r) = adjoin_root(&k7, &UniPoly::from_i64(&k7, 0, &[-3, 0, 1])).unwrap();
        assert_eq!(r.mul(&r).unwrap(), FieldElem::from_i64(&k49, 3));
        // i = -(1+i)^2 is a square in F9, so y^2 - i splits; 1+i is a nonsquare.
        assert!(i.is_square());
        let m = UniPoly::new(k9.clone(), 1, vec![i.neg().into_coeffs(), vec![0, 0], vec![1, 0]]);
        assert_eq!(adjoin_root(&k9, &m).err(), Some(Error::ReduciblePolynomial));
        let g = i.add(&FieldElem::one(&k9, 0)).unwrap();
        assert!(!g.is_square());
        let m = UniPoly::new(k9.clone(), 1, vec![g.neg().into_coeffs(), vec![0, 0], vec![1, 0]]);
        let (k81, y) = adjoin_root(&k9, &m).unwrap();
        assert_eq!(k81.depth(), 2);
        assert_eq!(y.mul(&y).unwrap(), g);
        let red = UniPoly::from_i64(&k7, 0, &[-2, 0, 1]);
        assert_eq!(adjoin_root(&k7, &red).err(), Some(Error::ReduciblePolynomial));
    }

    #[test]
    fn roots_over_extension() {
        let k9 = super::super::prime_extension(3, &[1, 0, 1]).unwrap();
        let f = k9.fq(1);
        let p = vec![k9.one(1), k9.zero(1), k9.one(1)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rs = roots(f, &p, &mut rng);
        assert_eq!(rs.len(), 2);
        for r in rs {
            assert!(FieldCtx::is_zero_el(&poly::eval(f, &p, &r)));
        }
    }
}

//! Jordan normal form over a splitting extension and the primary rational
//! canonical form over the base field.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EchelonBasis, MatrixF};
use crate::error::{Error, Result};
use crate::field::factor::{self, FactorMethod};
use crate::field::poly::{self, Coeffs};
use crate::field::{El, FieldCtx, UniPoly};

const JORDAN_SEED: u64 = 0x4a6f7264;

#[derive(Clone, Debug, PartialEq)]
pub struct JordanBlock {
    /// Eigenvalue at the splitting level.
    pub eigenvalue: El,
    pub size: usize,
    /// Index into `JordanData::factors`.
    pub factor: usize,
    /// Frobenius power: the eigenvalue is `root^(Q^conj)` of its factor.
    pub conj: usize,
    /// Smallest tower level containing the eigenvalue.
    pub field_level: usize,
}

#[derive(Clone, Debug)]
pub struct JordanData {
    pub ctx: Arc<FieldCtx>,
    /// Level of the input matrix.
    pub base_level: usize,
    /// Splitting level holding eigenvalues, `T` and `T_inv`.
    pub level: usize,
    /// Monic irreducible factors of the characteristic polynomial over the base level.
    pub factors: Vec<(Coeffs, usize)>,
    pub blocks: Vec<JordanBlock>,
    pub t: MatrixF,
    pub t_inv: MatrixF,
}

impl JordanData {
    /// The block-diagonal Jordan matrix.
    pub fn jordan_matrix(&self) -> MatrixF {
        let bs: Vec<MatrixF> = self
            .blocks
            .iter()
            .map(|b| MatrixF::jordan_block(&self.ctx, self.level, &b.eigenvalue, b.size))
            .collect();
        MatrixF::block_diag(&self.ctx, self.level, &bs)
    }

    /// Block sizes grouped by distinct eigenvalue, in block order.
    pub fn grouped(&self) -> Vec<(El, Vec<usize>)> {
        let mut out: Vec<(El, Vec<usize>)> = Vec::new();
        for b in &self.blocks {
            match out.iter_mut().find(|(z, _)| *z == b.eigenvalue) {
                Some((_, v)) => v.push(b.size),
                None => out.push((b.eigenvalue.clone(), vec![b.size])),
            }
        }
        out
    }

    pub fn is_diagonal(&self) -> bool {
        self.blocks.iter().all(|b| b.size == 1)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Factor the characteristic polynomial deterministically.
pub fn charpoly_factors(m: &MatrixF) -> Vec<(Coeffs, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(JORDAN_SEED);
    let cp = m.charpoly_coeffs();
    factor::factor_coeffs(m.fq(), &cp, FactorMethod::CantorZassenhaus, &mut rng)
        .expect("characteristic polynomial is nonzero")
        .1
}

/// Extend the context (at its top level) so that every factor splits.
/// Returns the context and the splitting level.
pub fn splitting_level(ctx: &Arc<FieldCtx>, level: usize, factors: &[(Coeffs, usize)]) -> Result<(Arc<FieldCtx>, usize)> {
    let deg = factors.iter().fold(1, |acc, (p, _)| lcm(acc, p.len() - 1));
    if deg == 1 {
        return Ok((ctx.clone(), level));
    }
    if level != ctx.top() {
        return Err(Error::InvalidInput("splitting requires a matrix over the top level".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(JORDAN_SEED ^ deg as u64);
    let irr = factor::random_irreducible(ctx.fq(level), deg, &mut rng);
    let name = format!("a{}", ctx.depth() + 1);
    let new = ctx.extend(&name, &irr)?;
    let top = new.top();
    Ok((new, top))
}

/// Jordan chains of `n = M - zI` over `level`, longest first.  Each chain is
/// `[t_1, ..., t_s]` with `(M - z) t_1 = 0` and `(M - z) t_j = t_{j-1}`.
fn jordan_chains(m: &MatrixF, z: &[u64], mult: usize) -> Vec<Vec<Vec<El>>> {
    let ctx = m.ctx().clone();
    let l = m.level();
    let n = m.rows();
    let zi = MatrixF::identity(&ctx, l, n).scale(z);
    let nm = m.sub(&zi);
    // kernels of N^k until the dimension reaches the multiplicity
    let mut kernels: Vec<Vec<Vec<El>>> = vec![Vec::new()];
    let mut pw = nm.clone();
    loop {
        let k = pw.kernel();
        let done = k.len() >= mult;
        kernels.push(k);
        if done || kernels.len() > n + 1 {
            break;
        }
        pw = pw.mul(&nm);
    }
    let top = kernels.len() - 1;
    let mut chains: Vec<Vec<Vec<El>>> = Vec::new();
    for k in (1..=top).rev() {
        let mut basis = EchelonBasis::new(&ctx, l);
        for v in &kernels[k - 1] {
            basis.insert(v);
        }
        for ch in &chains {
            if ch.len() > k {
                basis.insert(&ch[k - 1]);
            }
        }
        for w in &kernels[k] {
            if basis.insert(w) {
                let mut ch = vec![w.clone()];
                for _ in 1..k {
                    let next = nm.mul_vec(ch.last().unwrap());
                    ch.push(next);
                }
                ch.reverse();
                chains.push(ch);
            }
        }
    }
    chains
}

/// Jordan normal form of a square matrix over the top level of its context.
///
/// One splitting level of degree `lcm(deg P_i)` is adjoined when needed; one
/// root per irreducible factor is located and its conjugates are obtained by
/// Frobenius powers, as are the corresponding chains.
pub fn jordan_form(m: &MatrixF) -> Result<JordanData> {
    if !m.is_square() {
        return Err(Error::InvalidInput("Jordan form of a non-square matrix".into()));
    }
    let base = m.ctx().top();
    let m = m.lift(base);
    let factors = charpoly_factors(&m);
    let (ctx, lev) = splitting_level(m.ctx(), base, &factors)?;
    let me = m.lift_to(&ctx, lev);
    let q_steps = ctx.size(base);
    let mut rng = ChaCha8Rng::seed_from_u64(JORDAN_SEED);
    let mut blocks = Vec::new();
    let mut cols: Vec<Vec<El>> = Vec::new();
    for (fi, (p, mult)) in factors.iter().enumerate() {
        let d = p.len() - 1;
        let pe = poly::embed(&ctx, base, lev, p);
        let roots = factor::roots(ctx.fq(lev), &pe, &mut rng);
        let root = roots.first().cloned().ok_or_else(|| Error::InvalidInput("factor failed to split".into()))?;
        let chains = jordan_chains(&me, &root, *mult);
        let mut z = root.clone();
        for k in 0..d {
            for ch in &chains {
                let mapped: Vec<Vec<El>> = if k == 0 {
                    ch.clone()
                } else {
                    ch.iter()
                        .map(|v| v.iter().map(|x| ctx.frobenius_over(lev, base, x, k)).collect())
                        .collect()
                };
                blocks.push(JordanBlock {
                    eigenvalue: z.clone(),
                    size: ch.len(),
                    factor: fi,
                    conj: k,
                    field_level: ctx.level_of(&z),
                });
                cols.extend(mapped);
            }
            for _ in 0..q_steps {
                z = ctx.frobenius(lev, &z);
            }
        }
    }
    let n = me.rows();
    let t = MatrixF::from_cols(&ctx, lev, n, &cols);
    let t_inv = t.inverse()?;
    Ok(JordanData {
        ctx,
        base_level: base,
        level: lev,
        factors,
        blocks,
        t,
        t_inv,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RationalBlock {
    /// Monic irreducible polynomial over the base level.
    pub poly: Coeffs,
    /// Whether a link 1 connects this block to the next one.
    pub linked_to_next: bool,
}

#[derive(Clone, Debug)]
pub struct RationalCanonicalData {
    pub ctx: Arc<FieldCtx>,
    pub level: usize,
    pub blocks: Vec<RationalBlock>,
    pub form: MatrixF,
    pub t: MatrixF,
    pub t_inv: MatrixF,
}

impl RationalCanonicalData {
    /// Primary chains: `(factor polynomial, power)` for each cyclic summand.
    pub fn summands(&self) -> Vec<(Coeffs, usize)> {
        let mut out: Vec<(Coeffs, usize)> = Vec::new();
        let mut open = false;
        for b in &self.blocks {
            if open {
                out.last_mut().unwrap().1 += 1;
            } else {
                out.push((b.poly.clone(), 1));
            }
            open = b.linked_to_next;
        }
        out
    }
}

/// Generalized Jordan block of `P^s`: `s` companion blocks `C(P)` with a 1 in
/// the bottom-left corner of each superdiagonal block.
pub fn generalized_jordan_block(ctx: &Arc<FieldCtx>, level: usize, p: &[El], s: usize) -> MatrixF {
    let d = p.len() - 1;
    let c = MatrixF::companion(ctx, level, p);
    let mut m = MatrixF::zeros(ctx, level, d * s, d * s);
    for j in 0..s {
        m.set_block(j * d, j * d, &c);
        if j + 1 < s {
            m.set(j * d + d - 1, (j + 1) * d, &ctx.one(level));
        }
    }
    m
}

fn krylov(m: &MatrixF, v: &[El], k: usize) -> Vec<Vec<El>> {
    let mut out = vec![v.to_vec()];
    for _ in 1..k {
        let next = m.mul_vec(out.last().unwrap());
        out.push(next);
    }
    out
}

/// Top vectors of the cyclic summands of the `P`-primary component:
/// `(vector, power)`, longest first.
fn primary_tops(m: &MatrixF, p: &[El], mult: usize) -> Vec<(Vec<El>, usize)> {
    let ctx = m.ctx().clone();
    let l = m.level();
    let d = p.len() - 1;
    let pm = m.eval_poly(p);
    let mut kernels: Vec<Vec<Vec<El>>> = vec![Vec::new()];
    let mut pw = pm.clone();
    loop {
        let k = pw.kernel();
        let done = k.len() >= mult * d;
        kernels.push(k);
        if done || kernels.len() > m.rows() + 1 {
            break;
        }
        pw = pw.mul(&pm);
    }
    let top = kernels.len() - 1;
    let mut tops: Vec<(Vec<El>, usize)> = Vec::new();
    for k in (1..=top).rev() {
        let mut basis = EchelonBasis::new(&ctx, l);
        for v in &kernels[k - 1] {
            basis.insert(v);
        }
        for (w, s) in &tops {
            if *s > k {
                let mut u = w.clone();
                for _ in 0..(*s - k) {
                    u = pm.mul_vec(&u);
                }
                for x in krylov(m, &u, d) {
                    basis.insert(&x);
                }
            }
        }
        for w in &kernels[k] {
            if basis.contains(w) {
                continue;
            }
            for x in krylov(m, w, d) {
                basis.insert(&x);
            }
            tops.push((w.clone(), k));
        }
    }
    tops
}

/// Primary rational canonical form over the matrix's own level.
pub fn rational_canonical_form(m: &MatrixF) -> Result<RationalCanonicalData> {
    if !m.is_square() {
        return Err(Error::InvalidInput("canonical form of a non-square matrix".into()));
    }
    let ctx = m.ctx().clone();
    let l = m.level();
    let n = m.rows();
    let factors = charpoly_factors(m);
    let mut blocks = Vec::new();
    let mut forms = Vec::new();
    let mut t = MatrixF::zeros(&ctx, l, n, n);
    let mut col = 0;
    for (p, mult) in &factors {
        let d = p.len() - 1;
        for (w, s) in primary_tops(m, p, *mult) {
            let g = generalized_jordan_block(&ctx, l, p, s);
            let size = d * s;
            // g is cyclic; map a cyclic vector of g onto w's Krylov basis.
            let km = MatrixF::from_cols(&ctx, l, n, &krylov(m, &w, size));
            let mut found = None;
            for e in (0..size).rev() {
                let mut v = vec![ctx.zero(l); size];
                v[e] = ctx.one(l);
                let kg = MatrixF::from_cols(&ctx, l, size, &krylov(&g, &v, size));
                if let Ok(inv) = kg.inverse() {
                    found = Some(inv);
                    break;
                }
            }
            let kg_inv = found.ok_or_else(|| Error::InvalidInput("generalized Jordan block is not cyclic".into()))?;
            let tb = km.mul(&kg_inv);
            t.set_block(0, col, &tb);
            col += size;
            for j in 0..s {
                blocks.push(RationalBlock {
                    poly: p.clone(),
                    linked_to_next: j + 1 < s,
                });
            }
            forms.push(g);
        }
    }
    let form = MatrixF::block_diag(&ctx, l, &forms);
    let t_inv = t.inverse()?;
    Ok(RationalCanonicalData {
        ctx,
        level: l,
        blocks,
        form,
        t,
        t_inv,
    })
}

/// The characteristic polynomial as a public polynomial.
pub fn charpoly(m: &MatrixF) -> UniPoly {
    m.charpoly()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn check_jordan(m: &MatrixF, jd: &JordanData) {
        let me = m.lift_to(&jd.ctx, jd.level);
        assert!(jd.t.mul(&jd.t_inv).is_identity());
        assert_eq!(jd.t_inv.mul(&me).mul(&jd.t), jd.jordan_matrix());
        // block sizes match the rank sequence of (M - z)^k
        for (z, sizes) in jd.grouped() {
            let n = me.rows();
            let nm = me.sub(&MatrixF::identity(&jd.ctx, jd.level, n).scale(&z));
            let mut pw = MatrixF::identity(&jd.ctx, jd.level, n);
            let mut prev = n;
            for k in 1..=n {
                pw = pw.mul(&nm);
                let r = pw.rank();
                let at_least = sizes.iter().filter(|&&s| s >= k).count();
                assert_eq!(prev - r, at_least);
                prev = r;
            }
        }
    }

    #[test]
    fn spec_jordan_examples() {
        let k5 = FieldCtx::prime(5).unwrap();
        let m = MatrixF::from_i64(&k5, &[vec![1, 1], vec![0, 1]]);
        let jd = jordan_form(&m).unwrap();
        assert_eq!(jd.blocks.len(), 1);
        assert_eq!(jd.blocks[0].size, 2);
        assert_eq!(jd.blocks[0].eigenvalue, vec![1]);
        assert!(jd.t.is_identity());

        let k3 = FieldCtx::prime(3).unwrap();
        let m = MatrixF::from_i64(&k3, &[vec![0, -1], vec![1, 0]]);
        let jd = jordan_form(&m).unwrap();
        assert_eq!(jd.ctx.size(jd.level), 2);
        assert_eq!(jd.blocks.len(), 2);
        let i = &jd.blocks[0].eigenvalue;
        let sq = jd.ctx.mul(jd.level, i, i);
        assert_eq!(sq, jd.ctx.from_i64(jd.level, -1));
        assert_eq!(jd.blocks[1].eigenvalue, jd.ctx.neg(i));
        check_jordan(&m, &jd);

        let k7 = FieldCtx::prime(7).unwrap();
        let m = MatrixF::from_i64(&k7, &[vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
        let jd = jordan_form(&m).unwrap();
        assert_eq!(jd.blocks.iter().map(|b| b.size).collect::<Vec<_>>(), vec![1, 1, 1]);
    }

    #[test]
    fn random_jordan_and_rational_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for p in [2u64, 3, 5] {
            let k = FieldCtx::prime(p).unwrap();
            for _ in 0..30 {
                let n = rng.gen_range(1..6);
                // mix in repeated structure: conjugate a block matrix
                let mut blocks = Vec::new();
                let mut left = n;
                while left > 0 {
                    let s = rng.gen_range(1..=left);
                    let z = vec![rng.gen_range(0..p)];
                    blocks.push(MatrixF::jordan_block(&k, 0, &z, s));
                    left -= s;
                }
                let j = MatrixF::block_diag(&k, 0, &blocks);
                let r = MatrixF::random_invertible(&k, 0, n, &mut rng);
                let m = if rng.gen_bool(0.5) {
                    r.mul(&j).mul(&r.inverse().unwrap())
                } else {
                    MatrixF::random(&k, 0, n, n, &mut rng)
                };
                let jd = jordan_form(&m).unwrap();
                check_jordan(&m, &jd);
                let rc = rational_canonical_form(&m).unwrap();
                assert_eq!(rc.t_inv.mul(&m).mul(&rc.t), rc.form);
                // same block-size multiset per factor
                for (fi, (p, _)) in jd.factors.iter().enumerate() {
                    let mut a: Vec<usize> = jd.blocks.iter().filter(|b| b.factor == fi && b.conj == 0).map(|b| b.size).collect();
                    let mut b: Vec<usize> = rc.summands().into_iter().filter(|(q, _)| q == p).map(|(_, s)| s).collect();
                    a.sort();
                    b.sort();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn spec_rational_examples() {
        let k2 = FieldCtx::prime(2).unwrap();
        let c = MatrixF::from_i64(&k2, &[vec![0, 1], vec![1, 1]]);
        let rc = rational_canonical_form(&c).unwrap();
        assert_eq!(rc.form, c);
        assert_eq!(rc.blocks.len(), 1);
        let k5 = FieldCtx::prime(5).unwrap();
        let d = MatrixF::from_i64(&k5, &[vec![1, 0], vec![0, 2]]);
        let rc = rational_canonical_form(&d).unwrap();
        assert_eq!(rc.blocks.len(), 2);
        // factors are ordered by degree, then coefficients low to high: x-2 before x-1
        assert_eq!(rc.form, MatrixF::from_i64(&k5, &[vec![2, 0], vec![0, 1]]));
        let k3 = FieldCtx::prime(3).unwrap();
        let m = MatrixF::from_i64(&k3, &[vec![0, -1], vec![1, 0]]);
        let rc = rational_canonical_form(&m).unwrap();
        assert_eq!(rc.blocks.len(), 1);
        assert_eq!(rc.blocks[0].poly, vec![vec![1], vec![0], vec![1]]);
        assert_eq!(rc.t.level(), 0);
    }
}

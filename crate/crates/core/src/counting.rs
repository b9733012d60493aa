//! Upper bound on the number of solutions via centralizer dimensions, and
//! exhaustive oracles for tiny instances.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::factor;
use crate::field::{El, FieldCtx};
use crate::matrix::jordan::jordan_form;
use crate::matrix::{EchelonBasis, MatrixF};
use crate::quadform::{canonicalize_forms, Canonical, QuadSystem};

/// Enumeration guard: at most this many matrices (`q^(n²)`).
pub const ENUMERATION_LIMIT: u64 = 1 << 24;
/// Witnesses kept by [`brute_force_equivalence`].
pub const MAX_WITNESSES: usize = 16;

#[derive(Clone, Debug)]
pub struct CountBound {
    pub dim: usize,
    /// `dim_K` of the commutant restricted to the base field `K`.
    pub base_dim: usize,
    /// The matrix `H` over `K(α)`.
    pub h: MatrixF,
    /// `q^dim − 1`.
    pub bound: BigUint,
    /// Block sizes (ascending) per distinct eigenvalue of `H`.
    pub jordan_summary: Vec<(El, Vec<usize>)>,
    /// Degree `m` of the element `α` mixing the forms.
    pub alpha_degree: usize,
    /// Set in characteristic 2, where the bound is not established.
    pub heuristic: bool,
}

/// `Σ_j (2d − 2j + 1) s_j` for ascending sizes `s_1 ≤ … ≤ s_d` of one eigenvalue.
pub fn centralizer_dim(sizes: &[usize]) -> usize {
    let mut s = sizes.to_vec();
    s.sort_unstable();
    let d = s.len();
    s.iter().enumerate().map(|(j, &sj)| (2 * d - 2 * j - 1) * sj).sum()
}

/// Dimension of the commutant of `h` read off its Jordan data.
pub fn jordan_commutant_dim(h: &MatrixF) -> Result<(usize, Vec<(El, Vec<usize>)>)> {
    let top = h.with_ctx(&h.ctx().truncate(h.level()));
    let jd = jordan_form(&top)?;
    let mut groups = jd.grouped();
    for (_, s) in groups.iter_mut() {
        s.sort_unstable();
    }
    let dim = groups.iter().map(|(_, s)| centralizer_dim(s)).sum();
    Ok((dim, groups))
}

/// `dim {X : XH = HX}` over the level of `h`, by linear algebra.
pub fn commutant_dimension(h: &MatrixF) -> usize {
    base_commutant_dimension(h, h.level())
}

/// `dim_K {X ∈ K^{n×n} : XH = HX}` for `K` the given level at or below that of `h`.
pub fn base_commutant_dimension(h: &MatrixF, base: usize) -> usize {
    commutant_basis(h, base).len()
}

/// Basis over the level `base` of `{X ∈ K^{n×n} : XH = HX}`.
pub fn commutant_basis(h: &MatrixF, base: usize) -> Vec<MatrixF> {
    let ctx = h.ctx();
    let n = h.rows();
    let l = h.level();
    let s = ctx.size(base);
    let chunks = ctx.size(l) / s;
    // unknown X_ab has index a*n + b; equation (i, j): Σ_k X_ik H_kj − H_ik X_kj
    let mut rows: Vec<Vec<El>> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut eq = vec![ctx.zero(l); n * n];
            for k in 0..n {
                ctx.add_assign(&mut eq[i * n + k], h.get(k, j));
                ctx.sub_assign(&mut eq[k * n + j], h.get(i, k));
            }
            // split each coefficient into its coordinates over the base level
            for t in 0..chunks {
                rows.push(eq.iter().map(|c| c[t * s..(t + 1) * s].to_vec()).collect());
            }
        }
    }
    MatrixF::from_rows(ctx, base, &rows)
        .kernel()
        .into_iter()
        .map(|v| MatrixF::from_fn(ctx, base, n, n, |a, b| v[a * n + b].clone()))
        .collect()
}

/// Bound on the number of automorphisms of a regular system (equivalently,
/// of solutions of any instance with this `f`): with `α` of degree `m`,
/// `H = D⁻¹(H_1 + αH_2 + ⋯ + α^{m−1}H_m)` built from the canonical form, the
/// bound is `q^dim − 1` for `dim` the commutant dimension of `H`.
pub fn count_bound(f: &QuadSystem, seed: u64) -> Result<CountBound> {
    let inst = match canonicalize_forms(f, f, seed)? {
        Canonical::Instance(inst) => inst,
        Canonical::NoSol(msg) => return Err(Error::InvalidInput(msg)),
    };
    let base = inst.level;
    let m = inst.f.len();
    let ctx = inst.ctx.truncate(base);
    let (ctx, l): (Arc<FieldCtx>, usize) = if m >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa1fa);
        let irr = factor::random_irreducible(ctx.fq(base), m, &mut rng);
        let ext = ctx.extend("alpha", &irr)?;
        let top = ext.top();
        (ext, top)
    } else {
        (ctx, base)
    };
    let alpha = if m >= 2 { ctx.generator(l) } else { ctx.one(l) };
    let minv = inst.metric().with_ctx(&ctx).lift_to(&ctx, l).inverse()?;
    let mut h = MatrixF::zeros(&ctx, l, inst.n, inst.n);
    let mut a = ctx.one(l);
    for i in 0..m {
        h = h.add(&inst.hess_f(i).with_ctx(&ctx).lift_to(&ctx, l).scale(&a));
        a = ctx.mul(l, &a, &alpha);
    }
    let h = minv.mul(&h);
    let (dim, jordan_summary) = jordan_commutant_dim(&h)?;
    let q = ctx.order(base);
    Ok(CountBound {
        dim,
        base_dim: base_commutant_dimension(&h, base),
        h,
        bound: q.pow(dim as u32) - BigUint::one(),
        jordan_summary,
        alpha_degree: m,
        heuristic: ctx.p() == 2,
    })
}

fn all_vectors(ctx: &FieldCtx, l: usize, n: usize) -> Vec<Vec<El>> {
    let q = ctx.order_u64(l).unwrap();
    let total = q.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|_| {
                    let e = ctx.element_from_index(l, idx % q);
                    idx /= q;
                    e
                })
                .collect()
        })
        .collect()
}

fn guard(ctx: &FieldCtx, l: usize, n: usize) -> Result<u64> {
    let q = ctx.order_u64(l).ok_or_else(|| Error::TooLarge("field too large to enumerate".into()))?;
    match q.checked_pow((n * n) as u32) {
        Some(t) if t <= ENUMERATION_LIMIT => Ok(q),
        _ => Err(Error::TooLarge(format!("{q}^{} matrices exceed the enumeration limit", n * n))),
    }
}

/// Number of invertible `X` over the level `base` commuting with `h`, by
/// enumerating every matrix.
pub fn brute_force_centralizer(h: &MatrixF, base: usize) -> Result<u64> {
    let ctx = h.ctx().clone();
    let n = h.rows();
    let q = guard(&ctx, base, n)?;
    let total = q.pow((n * n) as u32);
    let mut count = 0;
    for idx in 0..total {
        let mut t = idx;
        let x = MatrixF::from_fn(&ctx, base, n, n, |_, _| {
            let e = ctx.element_from_index(base, t % q);
            t /= q;
            e
        });
        if x.mul(h) == h.mul(&x) && x.is_invertible() {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Clone, Debug)]
pub struct EquivalenceCount {
    pub equivalent: bool,
    /// Number of `A ∈ GL_n` with `f(Ax) = g(x)`.
    pub count: u64,
    pub witnesses: Vec<MatrixF>,
}

fn dot(ctx: &FieldCtx, l: usize, a: &[El], b: &[El]) -> El {
    let mut acc = ctx.zero(l);
    for (x, y) in a.iter().zip(b) {
        ctx.add_assign(&mut acc, &ctx.mul(l, x, y));
    }
    acc
}

/// Every `A ∈ GL_n(K)` with `f(Ax) = g(x)`, found by choosing the columns of
/// `A` one at a time: column `i` must satisfy `f_k(a_i) = g_k[i][i]` and
/// `a_iᵀ(U_k + U_kᵀ)a_j = g_k[i][j]` against earlier columns.
pub fn brute_force_equivalence(f: &QuadSystem, g: &QuadSystem) -> Result<EquivalenceCount> {
    if !f.is_homogeneous() || !g.is_homogeneous() {
        return Err(Error::InvalidInput("the oracle handles homogeneous systems only".into()));
    }
    if f.n != g.n || f.m() != g.m() {
        return Ok(EquivalenceCount {
            equivalent: false,
            count: 0,
            witnesses: Vec::new(),
        });
    }
    let ctx = f.ctx.clone();
    let l = f.level;
    let n = f.n;
    guard(&ctx, l, n)?;
    let vecs = all_vectors(&ctx, l, n);
    let hs = f.hessians();
    let qv = |k: usize, v: &[El]| dot(&ctx, l, v, &f.mats[k].mul_vec(v));
    // candidates per column: the diagonal conditions
    let cands: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..vecs.len())
                .filter(|&vi| {
                    let v = &vecs[vi];
                    v.iter().any(|x| !FieldCtx::is_zero_el(x))
                        && (0..f.m()).all(|k| qv(k, v) == g.mats[k].get(i, i).to_vec())
                })
                .collect()
        })
        .collect();
    // polar images H_k v for every candidate
    let polar: Vec<Vec<Vec<El>>> = vecs.iter().map(|v| hs.iter().map(|h| h.mul_vec(v)).collect()).collect();
    let mut out = EquivalenceCount {
        equivalent: false,
        count: 0,
        witnesses: Vec::new(),
    };
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let basis = EchelonBasis::new(&ctx, l);
    search(&ctx, l, g, &vecs, &polar, &cands, &mut chosen, &basis, &mut out);
    out.equivalent = out.count > 0;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn search(
    ctx: &Arc<FieldCtx>,
    l: usize,
    g: &QuadSystem,
    vecs: &[Vec<El>],
    polar: &[Vec<Vec<El>>],
    cands: &[Vec<usize>],
    chosen: &mut Vec<usize>,
    basis: &EchelonBasis,
    out: &mut EquivalenceCount,
) {
    let i = chosen.len();
    let n = cands.len();
    if i == n {
        out.count += 1;
        if out.witnesses.len() < MAX_WITNESSES {
            let cols: Vec<Vec<El>> = chosen.iter().map(|&c| vecs[c].clone()).collect();
            out.witnesses.push(MatrixF::from_cols(ctx, l, n, &cols));
        }
        return;
    }
    for &c in &cands[i] {
        let v = &vecs[c];
        let ok = chosen.iter().enumerate().all(|(j, &cj)| {
            (0..g.m()).all(|k| dot(ctx, l, &vecs[cj], &polar[c][k]) == g.mats[k].get(j, i).to_vec())
        });
        if !ok || basis.contains(v) {
            continue;
        }
        let mut next = basis.clone();
        next.insert(v);
        chosen.push(c);
        search(ctx, l, g, vecs, polar, cands, chosen, &next, out);
        chosen.pop();
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

    #[test]
    fn jordan_dimension_examples() {
        assert_eq!(centralizer_dim(&[1]), 1);
        assert_eq!(centralizer_dim(&[4]), 4);
        assert_eq!(centralizer_dim(&[2, 1]), 5);
        assert_eq!(centralizer_dim(&[1, 1, 1]), 9);
        let k3 = k(3);
        let h = m(&k3, &[&[1, 0, 0], &[0, 1, 1], &[0, 0, 1]]);
        assert_eq!(jordan_commutant_dim(&h).unwrap().0, 5);
        assert_eq!(commutant_dimension(&h), 5);
        assert_eq!(brute_force_centralizer(&h, 0).unwrap(), 2 * 2 * 27);
    }

    #[test]
    fn centralizer_examples() {
        let k3 = k(3);
        assert_eq!(brute_force_centralizer(&MatrixF::identity(&k3, 0, 2), 0).unwrap(), 48);
        assert_eq!(brute_force_centralizer(&m(&k3, &[&[1, 0], &[0, 2]]), 0).unwrap(), 4);
        assert_eq!(brute_force_centralizer(&m(&k3, &[&[1, 1], &[0, 1]]), 0).unwrap(), 6);
        let k7 = k(7);
        assert!(matches!(
            brute_force_centralizer(&MatrixF::identity(&k7, 0, 3), 0),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn equivalence_examples() {
        let k3 = k(3);
        let f = QuadSystem::from_i64(&k3, &[vec![vec![1]]]);
        let r = brute_force_equivalence(&f, &f).unwrap();
        assert_eq!(r.count, 2);
        let g = QuadSystem::from_i64(&k3, &[vec![vec![2]]]);
        assert!(!brute_force_equivalence(&f, &g).unwrap().equivalent);
        let f = QuadSystem::from_i64(&k3, &[vec![vec![1, 0], vec![0, 1]]]);
        let r = brute_force_equivalence(&f, &f).unwrap();
        // anisotropic plane: four unit vectors, two orthogonal partners each
        assert_eq!(r.count, 8);
        let b = count_bound(&f, 1).unwrap();
        assert!(BigUint::from(r.count) <= b.bound);
    }

    #[test]
    fn bound_examples() {
        let k7 = k(7);
        // distinct eigenvalues: dim = n
        let f = QuadSystem::from_i64(
            &k7,
            &[vec![vec![1, 0], vec![0, 1]], vec![vec![1, 0], vec![0, 2]]],
        );
        let b = count_bound(&f, 1).unwrap();
        assert_eq!(b.dim, 2);
        assert_eq!(b.base_dim, 2);
        assert_eq!(b.bound, BigUint::from(48u32));
        let r = brute_force_equivalence(&f, &f).unwrap();
        assert!(BigUint::from(r.count) <= b.bound);
    }

    #[test]
    fn oracle_counts_match_full_enumeration() {
        let k3 = k(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = QuadSystem::new(&k3, 0, 2, vec![MatrixF::random(&k3, 0, 2, 2, &mut rng)]);
            let g = QuadSystem::new(&k3, 0, 2, vec![MatrixF::random(&k3, 0, 2, 2, &mut rng)]);
            let fast = brute_force_equivalence(&f, &g).unwrap().count;
            let mut slow = 0;
            for idx in 0..81u64 {
                let mut t = idx;
                let a = MatrixF::from_fn(&k3, 0, 2, 2, |_, _| {
                    let e = vec![t % 3];
                    t /= 3;
                    e
                });
                if a.is_invertible() && f.substitute(&a).same_polys(&g) {
                    slow += 1;
                }
            }
            assert_eq!(fast, slow);
        }
    }
}

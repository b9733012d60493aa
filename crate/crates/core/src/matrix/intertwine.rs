//! Spaces of intertwiners `{Y : A_i Y = Y B_i for all i}`.
//!
//! One pair `A = Σ c_i A_i`, `B = Σ c_i B_i` is solved through Krylov
//! chains of `B`, which needs `n·k` unknowns for `k` chains instead of the
//! `n²` of the dense system; the remaining pairs then cut the span down.

use rand::Rng;

use super::{EchelonBasis, MatrixF};
use crate::field::{El, FieldCtx};

fn random_vec<R: Rng + ?Sized>(m: &MatrixF, rng: &mut R) -> Vec<El> {
    (0..m.rows()).map(|_| m.ctx().random_el(m.level(), rng)).collect()
}

/// Is `a` a scalar multiple of the identity?
fn is_scalar(a: &MatrixF) -> bool {
    let z = a.get(0, 0).to_vec();
    (0..a.rows()).all(|i| (0..a.cols()).all(|j| if i == j { a.get(i, j) == &z[..] } else { FieldCtx::is_zero_el(a.get(i, j)) }))
}

/// Restrict the span of `basis` to the intertwiners of `(a, b)`.
pub fn restrict(basis: &[MatrixF], a: &MatrixF, b: &MatrixF) -> Vec<MatrixF> {
    if basis.is_empty() {
        return Vec::new();
    }
    let ctx = a.ctx();
    let l = a.level();
    let n = a.rows();
    let cols: Vec<Vec<El>> = basis.iter().map(|y| a.mul(y).sub(&y.mul(b)).vec_cols()).collect();
    let sys = MatrixF::from_cols(ctx, l, n * n, &cols);
    sys.kernel()
        .into_iter()
        .map(|c| MatrixF::combination(basis, &c))
        .collect()
}

/// Dense solve of `A Y = Y B` over all pairs.
pub fn dense_space(a: &[MatrixF], b: &[MatrixF]) -> Vec<MatrixF> {
    let ctx = a[0].ctx();
    let l = a[0].level();
    let n = a[0].rows();
    let nn = n * n;
    let mut rows: Vec<Vec<El>> = Vec::new();
    for (ai, bi) in a.iter().zip(b) {
        // vec(A Y - Y B) with column-major vec: entry (r, c) of the product
        for c in 0..n {
            for r in 0..n {
                let mut row = vec![ctx.zero(l); nn];
                for k in 0..n {
                    // (A Y)_{r,c} = Σ_k A_{r,k} Y_{k,c}
                    let x = ai.get(r, k);
                    if !FieldCtx::is_zero_el(x) {
                        row[c * n + k] = ctx.add(&row[c * n + k], x);
                    }
                    // (Y B)_{r,c} = Σ_k Y_{r,k} B_{k,c}
                    let y = bi.get(k, c);
                    if !FieldCtx::is_zero_el(y) {
                        row[k * n + r] = ctx.sub(&row[k * n + r], y);
                    }
                }
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return full_space(ctx, l, n);
    }
    let sys = MatrixF::from_rows(ctx, l, &rows);
    sys.kernel()
        .into_iter()
        .map(|v| MatrixF::from_vec_cols(ctx, l, n, n, &v))
        .collect()
}

fn full_space(ctx: &std::sync::Arc<FieldCtx>, l: usize, n: usize) -> Vec<MatrixF> {
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let mut m = MatrixF::zeros(ctx, l, n, n);
            m.set(i, j, &ctx.one(l));
            out.push(m);
        }
    }
    out
}

/// Intertwiners of one pair from Krylov chains of `b`.  With chains
/// `w_j, B w_j, …, B^{d_j−1} w_j` forming a basis, `Y` is fixed by the
/// vectors `u_j = Y w_j`, and `B^{d_j} w_j = Σ c_{j',i} B^i w_{j'}` becomes
/// the linear condition `A^{d_j} u_j = Σ c_{j',i} A^i u_{j'}`.  The system
/// has `n·k` unknowns for `k` chains, so one cyclic vector gives `n`.
pub fn chain_space<R: Rng + ?Sized>(a: &MatrixF, b: &MatrixF, rng: &mut R) -> Vec<MatrixF> {
    let ctx = a.ctx().clone();
    let l = a.level();
    let n = a.rows();
    let f = ctx.fq(l);
    let mut ech = EchelonBasis::new(&ctx, l);
    // (chain, position) of each basis column
    let mut cols: Vec<Vec<El>> = Vec::new();
    let mut tags: Vec<(usize, usize)> = Vec::new();
    let mut chains: Vec<(Vec<El>, Vec<El>)> = Vec::new();
    while cols.len() < n {
        let mut w = None;
        for _ in 0..8 {
            let v = random_vec(b, rng);
            if !ech.contains(&v) {
                w = Some(v);
                break;
            }
        }
        let w = w.unwrap_or_else(|| {
            (0..n)
                .map(|i| (0..n).map(|r| if r == i { ctx.one(l) } else { ctx.zero(l) }).collect::<Vec<_>>())
                .find(|e| !ech.contains(e))
                .expect("basis incomplete")
        });
        let j = chains.len();
        let mut v = w.clone();
        let mut i = 0;
        while ech.insert(&v) {
            cols.push(v.clone());
            tags.push((j, i));
            v = b.mul_vec(&v);
            i += 1;
        }
        chains.push((w, v));
    }
    let k = chains.len();
    let depth: Vec<usize> = (0..k).map(|j| tags.iter().filter(|t| t.0 == j).count()).collect();
    let pinv = MatrixF::from_cols(&ctx, l, n, &cols).inverse().expect("chains form a basis");
    let maxd = depth.iter().copied().max().unwrap_or(0);
    let mut powers = vec![MatrixF::identity(&ctx, l, n)];
    for _ in 0..maxd {
        let next = a.mul(powers.last().unwrap());
        powers.push(next);
    }
    // rows of the system in the unknowns (u_1, …, u_k)
    let mut sys = MatrixF::zeros(&ctx, l, n * k, n * k);
    for (j, (_, over)) in chains.iter().enumerate() {
        let c = pinv.mul_vec(over);
        let mut blocks = vec![MatrixF::zeros(&ctx, l, n, n); k];
        blocks[j] = powers[depth[j]].clone();
        for (t, &(jt, it)) in tags.iter().enumerate() {
            if !f.is_zero(&c[t]) {
                blocks[jt] = blocks[jt].sub(&powers[it].scale(&c[t]));
            }
        }
        for (jb, blk) in blocks.iter().enumerate() {
            sys.set_block(j * n, jb * n, blk);
        }
    }
    sys.kernel()
        .into_iter()
        .map(|u| {
            let images: Vec<Vec<El>> = tags
                .iter()
                .map(|&(jt, it)| powers[it].mul_vec(&u[jt * n..(jt + 1) * n]))
                .collect();
            MatrixF::from_cols(&ctx, l, n, &images).mul(&pinv)
        })
        .collect()
}

/// Basis of the intertwiner space, or of a subspace containing every
/// invertible intertwiner: when some pair has distinct characteristic
/// polynomials (so no invertible intertwiner exists) the result is empty.
pub fn intertwiner_space<R: Rng + ?Sized>(a: &[MatrixF], b: &[MatrixF], rng: &mut R) -> Vec<MatrixF> {
    assert_eq!(a.len(), b.len());
    let n = a[0].rows();
    let l = a[0].level();
    let ctx = a[0].ctx().clone();
    // pairs that impose conditions
    let mut pairs: Vec<(MatrixF, MatrixF)> = Vec::new();
    for (x, y) in a.iter().zip(b) {
        if is_scalar(x) && is_scalar(y) && x.get(0, 0) == y.get(0, 0) {
            continue;
        }
        if x.charpoly_coeffs() != y.charpoly_coeffs() {
            return Vec::new();
        }
        pairs.push((x.clone(), y.clone()));
    }
    if pairs.is_empty() {
        return full_space(&ctx, l, n);
    }
    let (mut ca, mut cb) = pairs[0].clone();
    if pairs.len() > 1 {
        // a random combination is usually cyclic, which keeps the chain system small
        let cs: Vec<El> = pairs.iter().map(|_| ctx.random_el(l, rng)).collect();
        let xa = MatrixF::combination(&pairs.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), &cs);
        if !is_scalar(&xa) {
            cb = MatrixF::combination(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>(), &cs);
            ca = xa;
        }
    }
    let mut basis = chain_space(&ca, &cb, rng);
    for (x, y) in &pairs {
        if basis.is_empty() {
            break;
        }
        basis = restrict(&basis, x, y);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn krylov_matches_dense() {
        let k = FieldCtx::prime(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..5 {
            let x = MatrixF::random_invertible(&k, 0, n, &mut rng);
            let xi = x.inverse().unwrap();
            let a: Vec<MatrixF> = (0..2).map(|_| MatrixF::random(&k, 0, n, n, &mut rng)).collect();
            let b: Vec<MatrixF> = a.iter().map(|ai| xi.mul(ai).mul(&x)).collect();
            let fast = intertwiner_space(&a, &b, &mut rng);
            let dense = dense_space(&a, &b);
            assert_eq!(fast.len(), dense.len());
            for y in &fast {
                for (ai, bi) in a.iter().zip(&b) {
                    assert_eq!(ai.mul(y), y.mul(bi));
                }
            }
        }
    }

    #[test]
    fn small_fields_agree_with_dense() {
        // cyclic vectors are rare over F_2 and F_3; similar pairs must
        // never be reported as having no intertwiner
        for p in [2u64, 3] {
            let k = FieldCtx::prime(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(p);
            for _ in 0..40 {
                let n = rng.gen_range(2..6);
                let x = MatrixF::random_invertible(&k, 0, n, &mut rng);
                let xi = x.inverse().unwrap();
                let a: Vec<MatrixF> = (0..2).map(|_| MatrixF::random(&k, 0, n, n, &mut rng)).collect();
                let b: Vec<MatrixF> = a.iter().map(|ai| xi.mul(ai).mul(&x)).collect();
                assert_eq!(intertwiner_space(&a, &b, &mut rng).len(), dense_space(&a, &b).len());
            }
        }
    }

    #[test]
    fn repeated_blocks_agree_with_dense() {
        // A ⊕ A is never cyclic; the chain system has several chains
        for p in [2u64, 5] {
            let k = FieldCtx::prime(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for h in 1..4 {
                let c = MatrixF::random(&k, 0, h, h, &mut rng);
                let a = MatrixF::block_diag(&k, 0, &[c.clone(), c.clone(), MatrixF::identity(&k, 0, 1)]);
                let x = MatrixF::random_invertible(&k, 0, 2 * h + 1, &mut rng);
                let b = x.inverse().unwrap().mul(&a).mul(&x);
                let fast = chain_space(&a, &b, &mut rng);
                assert_eq!(fast.len(), dense_space(&[a.clone()], &[b.clone()]).len());
                for y in &fast {
                    assert_eq!(a.mul(y), y.mul(&b));
                }
            }
        }
    }

    #[test]
    fn scalar_pairs_give_full_space() {
        let k = FieldCtx::prime(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let i = MatrixF::identity(&k, 0, 2);
        assert_eq!(intertwiner_space(&[i.clone()], &[i], &mut rng).len(), 4);
    }
}

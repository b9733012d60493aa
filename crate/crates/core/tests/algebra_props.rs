//! Property tests for field arithmetic and exact linear algebra.

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ip1s_core::field::factor::{factor_univariate, is_irreducible, FactorMethod};
use ip1s_core::field::{field_of_order, prime_extension, FieldCtx};
use ip1s_core::matrix::jordan::{charpoly, jordan_form, rational_canonical_form};
use ip1s_core::{MatrixF, UniPoly};

fn fields() -> Vec<Arc<FieldCtx>> {
    let f9 = prime_extension(3, &[1, 0, 1]).unwrap();
    // F_{9^2} over F_9 as a two-level tower
    let f81 = {
        let t = f9.top();
        let nonsq = f9.nonsquare_el(t);
        let m = vec![f9.neg(&nonsq), f9.zero(t), f9.one(t)];
        f9.extend("b", &m).unwrap()
    };
    vec![
        FieldCtx::prime(7).unwrap(),
        FieldCtx::prime(65521).unwrap(),
        f9,
        f81,
        field_of_order(16).unwrap(),
    ]
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_and_sqrt(fi in 0usize..5, seed in any::<u64>()) {
        let ctx = &fields()[fi];
        let l = ctx.top();
        let mut r = rng(seed);
        let a = ctx.random_nonzero(l, &mut r);
        let ai = ctx.inv(l, &a).unwrap();
        prop_assert!(FieldCtx::is_one_el(&ctx.mul(l, &a, &ai)));
        if let Ok(s) = ctx.sqrt_el(l, &a) {
            prop_assert_eq!(ctx.mul(l, &s, &s), a.clone());
        }
        if ctx.p() != 2 {
            let ns = ctx.nonsquare_el(l);
            prop_assert!(ctx.is_square_el(l, &a) ^ ctx.is_square_el(l, &ctx.mul(l, &ns, &a)));
        } else {
            prop_assert!(ctx.is_square_el(l, &a));
        }
    }

    #[test]
    fn frobenius_is_a_ring_map(fi in 0usize..5, seed in any::<u64>()) {
        let ctx = &fields()[fi];
        let mut r = rng(seed);
        for l in 0..=ctx.top() {
            let a = ctx.random_el(l, &mut r);
            let b = ctx.random_el(l, &mut r);
            let fr = |x: &[u64]| ctx.frobenius(l, x);
            prop_assert_eq!(fr(&ctx.add(&a, &b)), ctx.add(&fr(&a), &fr(&b)));
            prop_assert_eq!(fr(&ctx.mul(l, &a, &b)), ctx.mul(l, &fr(&a), &fr(&b)));
        }
    }

    #[test]
    fn factorization_multiplies_back(fi in 0usize..5, deg in 1usize..7, seed in any::<u64>()) {
        let ctx = &fields()[fi];
        let l = ctx.top();
        let mut r = rng(seed);
        let mut c: Vec<_> = (0..deg).map(|_| ctx.random_el(l, &mut r)).collect();
        c.push(ctx.random_nonzero(l, &mut r));
        let p = UniPoly::new(ctx.clone(), l, c);
        for method in [FactorMethod::CantorZassenhaus, FactorMethod::Berlekamp] {
            let fs = factor_univariate(&p, method, seed).unwrap();
            let mut prod = UniPoly::new(ctx.clone(), l, vec![p.leading().unwrap().clone()]);
            for (f, e) in &fs {
                prop_assert!(f.is_monic());
                prop_assert!(is_irreducible(p.fq(), &f.coeffs));
                prod = prod.mul(&f.pow(*e as u64)).unwrap();
            }
            prop_assert_eq!(&prod.coeffs, &p.coeffs);
        }
    }

    #[test]
    fn elimination(fi in 0usize..5, n in 1usize..7, extra in 0usize..3, seed in any::<u64>()) {
        let ctx = &fields()[fi];
        let l = ctx.top();
        let mut r = rng(seed);
        let m = MatrixF::random(ctx, l, n, n + extra, &mut r);
        prop_assert_eq!(m.rank() + m.kernel().len(), n + extra);
        for v in m.kernel() {
            prop_assert!(m.mul_vec(&v).iter().all(|c| FieldCtx::is_zero_el(c)));
        }
        let a = MatrixF::random_invertible(ctx, l, n, &mut r);
        prop_assert!(a.mul(&a.inverse().unwrap()).is_identity());
        let b = MatrixF::random(ctx, l, n, 2, &mut r);
        let (x, _) = a.solve(&b).unwrap();
        prop_assert_eq!(a.mul(&x), b);
    }
}

/// A random matrix with a prescribed Jordan structure, conjugated.
fn structured(ctx: &Arc<FieldCtx>, n: usize, seed: u64) -> MatrixF {
    let mut r = rng(seed);
    let l = ctx.top();
    let mut blocks = Vec::new();
    let mut left = n;
    let mut eig = Vec::new();
    for _ in 0..2 {
        eig.push(ctx.random_el(l, &mut r));
    }
    let mut i = 0;
    while left > 0 {
        let s = 1 + (seed as usize / (i + 1)) % left.min(3);
        blocks.push(MatrixF::jordan_block(ctx, l, &eig[i % 2], s));
        left -= s;
        i += 1;
    }
    let j = MatrixF::block_diag(ctx, l, &blocks);
    let p = MatrixF::random_invertible(ctx, l, n, &mut r);
    p.mul(&j).mul(&p.inverse().unwrap())
}

fn rank_sequence_sizes(m: &MatrixF, z: &[u64], n: usize) -> Vec<usize> {
    // number of blocks of size ≥ k is rank(N^{k−1}) − rank(N^k)
    let ctx = m.ctx();
    let l = ctx.level_of(z).max(m.level());
    let mm = m.lift(l);
    let nz = mm.sub(&MatrixF::identity(ctx, l, n).scale(&ctx.embed(ctx.level_of(z), l, z)));
    let mut ranks = vec![n];
    let mut p = MatrixF::identity(ctx, l, n);
    for _ in 0..n {
        p = p.mul(&nz);
        ranks.push(p.rank());
    }
    let ge: Vec<usize> = (1..=n).map(|k| ranks[k - 1] - ranks[k]).collect();
    let mut sizes = Vec::new();
    for k in 1..=n {
        let next = if k < n { ge[k] } else { 0 };
        for _ in 0..(ge[k - 1] - next) {
            sizes.push(k);
        }
    }
    sizes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn jordan_and_rational_forms(fi in 0usize..5, n in 1usize..7, seed in any::<u64>(), structured_input in any::<bool>()) {
        let ctx = &fields()[fi];
        let l = ctx.top();
        let m = if structured_input {
            structured(ctx, n, seed)
        } else {
            MatrixF::random(ctx, l, n, n, &mut rng(seed))
        };
        let jd = jordan_form(&m).unwrap();
        let top = jd.ctx.clone();
        let mm = m.with_ctx(&top).lift(jd.level);
        prop_assert_eq!(jd.t_inv.mul(&mm).mul(&jd.t), jd.jordan_matrix());
        for (z, sizes) in jd.grouped() {
            let mut a = sizes.clone();
            a.sort_unstable();
            let mut b = rank_sequence_sizes(&mm, &z, n);
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }

        let rc = rational_canonical_form(&m).unwrap();
        prop_assert_eq!(rc.t_inv.mul(&m.with_ctx(&rc.ctx)).mul(&rc.t), rc.form.clone());
        let f = m.fq();
        let mut prod = UniPoly::new(ctx.clone(), l, vec![f.one()]);
        for b in &rc.blocks {
            prod = prod.mul(&UniPoly::new(ctx.clone(), l, b.poly.clone())).unwrap();
        }
        prop_assert_eq!(prod.coeffs, charpoly(&m).coeffs);

        // per irreducible factor, the Jordan block sizes equal the rational chain lengths
        for (fi_, (p, _)) in jd.factors.iter().enumerate() {
            let mut js: Vec<usize> = jd.blocks.iter().filter(|b| b.factor == fi_ && b.conj == 0).map(|b| b.size).collect();
            let mut rs: Vec<usize> = rc.summands().into_iter().filter(|(q, _)| q == p).map(|(_, e)| e).collect();
            js.sort_unstable();
            rs.sort_unstable();
            prop_assert_eq!(js, rs);
        }
    }
}

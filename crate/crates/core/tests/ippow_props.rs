//! Property tests for the power-sum decomposition solver.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ip1s_core::field::{field_of_order, Fq};
use ip1s_core::ippow::{
    apply_pow, frobenius_descent, inflate, jacobian, jacobian_det, solve_pow, DensePolySystem, MPoly, PowOutcome,
};
use ip1s_core::{FieldCtx, MatrixF};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_form<R: Rng>(ctx: &FieldCtx, f: Fq, n: usize, d: u32, rng: &mut R) -> MPoly {
    let mut p = MPoly::zero(n);
    for _ in 0..4 {
        let mut m = vec![0u32; n];
        for _ in 0..d {
            m[rng.gen_range(0..n)] += 1;
        }
        p.add_term(f, m, &ctx.random_el(ctx.top(), rng));
    }
    p
}

fn random_system(ctx: &Arc<FieldCtx>, n: usize, d: u32, seed: u64) -> DensePolySystem {
    let l = ctx.top();
    let f = ctx.fq(l);
    let mut r = rng(seed);
    DensePolySystem {
        ctx: ctx.clone(),
        level: l,
        n,
        polys: (0..n).map(|_| random_form(ctx, f, n, d, &mut r)).collect(),
    }
}

fn eval_matrix(f: Fq, m: &[Vec<MPoly>], x: &[Vec<u64>], ctx: &Arc<FieldCtx>, l: usize) -> MatrixF {
    MatrixF::from_fn(ctx, l, m.len(), m[0].len(), |i, j| m[i][j].eval(f, x))
}

fn fields() -> Vec<Arc<FieldCtx>> {
    vec![
        field_of_order(5).unwrap(),
        field_of_order(101).unwrap(),
        field_of_order(9).unwrap(),
        field_of_order(8).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn compose_evaluates_at_ax(fi in 0usize..4, n in 1usize..4, d in 1u32..4, seed in any::<u64>()) {
        let ctx = &fields()[fi];
        let l = ctx.top();
        let f = ctx.fq(l);
        let mut r = rng(seed ^ 7);
        let p = random_form(ctx, f, n, d, &mut r);
        let a = MatrixF::random(ctx, l, n, n, &mut r);
        let x: Vec<_> = (0..n).map(|_| ctx.random_el(ctx.top(), &mut r)).collect();
        prop_assert_eq!(p.compose(f, &a).eval(f, &x), p.eval(f, &a.mul_vec(&x)));
    }

    #[test]
    fn jacobian_chain_rule(fi in 0usize..4, n in 1usize..4, d in 1u32..4, seed in any::<u64>()) {
        let ctx = &fields()[fi];
        let l = ctx.top();
        let f = ctx.fq(l);
        let g = random_system(ctx, n, d, seed);
        let mut r = rng(seed ^ 3);
        let a = MatrixF::random(ctx, l, n, n, &mut r);
        let b = MatrixF::random(ctx, l, n, n, &mut r);
        let h = g.compose(&a).mix(&b);
        let x: Vec<_> = (0..n).map(|_| ctx.random_el(ctx.top(), &mut r)).collect();
        let lhs = eval_matrix(f, &jacobian(&h), &x, ctx, l);
        let rhs = b.mul(&eval_matrix(f, &jacobian(&g), &a.mul_vec(&x), ctx, l)).mul(&a);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn descent_inverts_inflate(fi in 0usize..4, n in 1usize..4, e in 1u32..4, r in 0u32..3, seed in any::<u64>()) {
        let ctx = &fields()[fi];
        let p = ctx.p() as u32;
        if e % p == 0 {
            return Ok(());
        }
        let g = random_system(ctx, n, e, seed);
        let big = inflate(&g, r);
        let (back, r2, e2) = frobenius_descent(&big, p.pow(r) * e).unwrap();
        prop_assert_eq!((r2, e2), (r, e));
        prop_assert_eq!(back.polys, g.polys);
    }

    #[test]
    fn planted_roundtrip(fi in 0usize..4, n in 1usize..4, d in 2u32..6, seed in any::<u64>()) {
        let ctx = &fields()[fi];
        let l = ctx.top();
        let mut r = rng(seed);
        let a = MatrixF::random_invertible(ctx, l, n, &mut r);
        let b = MatrixF::random_invertible(ctx, l, n, &mut r);
        let g = apply_pow(&a, &b, d);
        match solve_pow(&g, d, seed).unwrap() {
            PowOutcome::Solution(s) => {
                prop_assert!(s.a.is_invertible() && s.b.is_invertible());
                prop_assert_eq!(apply_pow(&s.a, &s.b, d).polys, g.polys);
            }
            PowOutcome::NoSol(msg) => prop_assert!(false, "planted instance reported {}", msg),
        }
    }
}

/// `det J` of `POW_{n,d}` is `dⁿ ∏ x_i^{d−1}`.
#[test]
fn pow_jacobian_determinant() {
    for ctx in [field_of_order(7).unwrap(), field_of_order(11).unwrap()] {
        let f = ctx.fq(0);
        for n in 1..=4 {
            for d in 1..=5u32 {
                let det = jacobian_det(&DensePolySystem::pow_system(&ctx, 0, n, d)).unwrap();
                let coeff = f.pow(&f.from_i64(d as i64), &(n as u64).into());
                let want = if FieldCtx::is_zero_el(&coeff) {
                    MPoly::zero(n)
                } else {
                    let mut m = MPoly::zero(n);
                    m.add_term(f, vec![d - 1; n], &coeff);
                    m
                };
                assert_eq!(det, want, "n = {n}, d = {d}");
            }
        }
    }
}

/// `det J` of `B·POW(Ax)` at a point is `det B · det A · dⁿ ∏ (Ax)_i^{d−1}`.
#[test]
fn composed_jacobian_determinant() {
    let ctx = field_of_order(101).unwrap();
    let f = ctx.fq(0);
    let mut r = rng(5);
    for n in 1..=3 {
        for d in 2..=4u32 {
            let a = MatrixF::random_invertible(&ctx, 0, n, &mut r);
            let b = MatrixF::random_invertible(&ctx, 0, n, &mut r);
            let det = jacobian_det(&apply_pow(&a, &b, d)).unwrap();
            let x: Vec<_> = (0..n).map(|_| ctx.random_el(ctx.top(), &mut r)).collect();
            let ax = a.mul_vec(&x);
            let mut want = f.mul(&b.det(), &a.det());
            for v in &ax {
                want = f.mul(&want, &f.mul(&f.from_i64(d as i64), &f.pow(v, &(d as u64 - 1).into())));
            }
            assert_eq!(det.eval(f, &x), want);
        }
    }
}

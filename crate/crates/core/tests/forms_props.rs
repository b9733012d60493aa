//! Property tests for quadratic forms, matrix square roots, the solver and
//! the counting bound.

use std::collections::HashSet;
use std::sync::Arc;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ip1s_core::counting::{
    brute_force_equivalence, commutant_basis, commutant_dimension, count_bound, jordan_commutant_dim,
};
use ip1s_core::field::{field_of_order, FieldCtx};
use ip1s_core::harness::random_regular;
use ip1s_core::ip1s::{
    check_solution, conjugacy_space, orthogonalize, sample_invertible, solve, solve_generic, verify, GenericOutcome,
    Outcome, SolutionMode, SolveOptions,
};
use ip1s_core::matrix::jordan::jordan_form;
use ip1s_core::quadform::{
    canonicalize_forms, essential_reduce, gauss_reduce, homogenize, regular_combination, sigma, upper, Canonical,
    QuadSystem,
};
use ip1s_core::sqrtmat::{sqrt_companion, sqrt_matrix, Backend};
use ip1s_core::{Error, MatrixF, UniPoly};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn odd_fields() -> Vec<Arc<FieldCtx>> {
    vec![
        field_of_order(3).unwrap(),
        field_of_order(7).unwrap(),
        field_of_order(9).unwrap(),
        field_of_order(101).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn homogenize_roundtrip(fi in 0usize..4, n in 1usize..5, m in 1usize..4, seed in any::<u64>()) {
        let ctx = &odd_fields()[fi];
        let mut r = rng(seed);
        let mats = (0..m).map(|_| MatrixF::random(ctx, 0, n, n, &mut r)).collect();
        let lin = (0..m).map(|_| (0..n).map(|_| ctx.random_el(0, &mut r)).collect()).collect();
        let cons = (0..m).map(|_| ctx.random_el(0, &mut r)).collect();
        let f = QuadSystem::new(ctx, 0, n, mats).with_affine(lin, cons);
        let (hf, hg) = homogenize(&f, &f);
        prop_assert!(hf.is_homogeneous());
        prop_assert!(hf.dehomogenize().same_polys(&f));
        prop_assert!(hg.dehomogenize().same_polys(&f));
    }

    #[test]
    fn essential_variables(fi in 0usize..4, s in 1usize..4, extra in 0usize..3, m in 1usize..3, seed in any::<u64>()) {
        let ctx = &odd_fields()[fi];
        let n = s + extra;
        let mut r = rng(seed);
        // forms in s variables, padded and scrambled
        let mats: Vec<MatrixF> = (0..m)
            .map(|_| {
                let mut u = MatrixF::zeros(ctx, 0, n, n);
                u.set_block(0, 0, &MatrixF::random(ctx, 0, s, s, &mut r));
                u
            })
            .collect();
        let a = MatrixF::random_invertible(ctx, 0, n, &mut r);
        let f = QuadSystem::new(ctx, 0, n, mats).substitute(&a);
        let (s2, mm, red) = essential_reduce(&f);
        prop_assert!(s2 <= s);
        prop_assert!(mm.is_invertible());
        let stacked = MatrixF::from_rows(ctx, 0, &red.hessians().iter().flat_map(|h| (0..s2).map(move |i| h.row(i))).collect::<Vec<_>>());
        if s2 > 0 {
            prop_assert_eq!(stacked.rank(), s2);
        }
        let padded = QuadSystem::new(
            ctx,
            0,
            n,
            red.mats
                .iter()
                .map(|u| {
                    let mut p = MatrixF::zeros(ctx, 0, n, n);
                    p.set_block(0, 0, u);
                    p
                })
                .collect(),
        );
        prop_assert!(f.substitute(&mm).same_polys(&padded));
    }

    #[test]
    fn gauss_reduction(fi in 0usize..4, n in 1usize..7, seed in any::<u64>()) {
        let ctx = &odd_fields()[fi];
        let mut r = rng(seed);
        let b = MatrixF::random_invertible(ctx, 0, n, &mut r);
        let d0 = MatrixF::diag(ctx, 0, &(0..n).map(|_| ctx.random_nonzero(0, &mut r)).collect::<Vec<_>>());
        let phi = b.transpose().mul(&d0).mul(&b);
        let (d, p) = gauss_reduce(&phi).unwrap();
        prop_assert_eq!(p.transpose().mul(&phi).mul(&p), d.clone());
        let nu = ctx.nonsquare_el(0);
        for i in 0..n {
            let x = d.get(i, i).to_vec();
            prop_assert!(FieldCtx::is_one_el(&x) || (i == n - 1 && x == nu));
        }
    }

    #[test]
    fn regular_stays_regular(fi in 0usize..2, n in 2usize..4, m in 1usize..4, seed in any::<u64>()) {
        let ctx = &odd_fields()[fi];
        let mut r = rng(seed);
        let f = random_regular(ctx, n, m, &mut r).unwrap();
        let a = MatrixF::random_invertible(ctx, 0, n, &mut r);
        prop_assert!(regular_combination(&f.substitute(&a), seed).is_ok());
    }

    #[test]
    fn char2_odd_dimension_sigma_singular(q in prop::sample::select(vec![2u64, 4, 8]), k in 0usize..3, seed in any::<u64>()) {
        let ctx = field_of_order(q).unwrap();
        let n = 2 * k + 1;
        let u = MatrixF::random(&ctx, ctx.top(), n, n, &mut rng(seed));
        prop_assert!(FieldCtx::is_zero_el(&sigma(&upper(&u)).det()));
    }
}

fn random_invertible_z(ctx: &Arc<FieldCtx>, n: usize, seed: u64, structured: bool) -> MatrixF {
    let l = ctx.top();
    let mut r = rng(seed);
    if !structured {
        return MatrixF::random_invertible(ctx, l, n, &mut r);
    }
    let mut blocks = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = r.gen_range(1..=left.min(3));
        blocks.push(MatrixF::jordan_block(ctx, l, &ctx.random_nonzero(l, &mut r), s));
        left -= s;
    }
    let p = MatrixF::random_invertible(ctx, l, n, &mut r);
    p.mul(&MatrixF::block_diag(ctx, l, &blocks)).mul(&p.inverse().unwrap())
}

fn check_root(z: &MatrixF, w: &MatrixF, q: Option<&UniPoly>) -> Result<(), TestCaseError> {
    let ctx = w.ctx().clone();
    let zl = z.with_ctx(&ctx).lift(w.level());
    prop_assert_eq!(w.mul(w), zl.clone());
    if let Some(q) = q {
        let lev = q.level.max(w.level());
        let qc: Vec<_> = q.coeffs.iter().map(|c| ctx.embed(q.level, lev, c)).collect();
        prop_assert_eq!(z.with_ctx(&ctx).lift(lev).eval_poly(&qc), w.lift(lev));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn square_roots_odd(fi in 1usize..4, n in 1usize..6, seed in any::<u64>(), structured in any::<bool>()) {
        let ctx = &odd_fields()[fi];
        let z = random_invertible_z(ctx, n, seed, structured);
        for backend in [Backend::Jordan, Backend::Companion] {
            let r = sqrt_matrix(&z, backend).unwrap();
            prop_assert!(r.as_polynomial.is_some());
            check_root(&z, &r.w, r.as_polynomial.as_ref())?;
        }
        // W commutes with the centralizer of Z
        let r = sqrt_matrix(&z, Backend::Jordan).unwrap();
        let wctx = r.w.ctx().clone();
        let mut g = rng(seed ^ 1);
        let basis = commutant_basis(&z, z.level());
        for _ in 0..3 {
            let mut c = MatrixF::zeros(&z.ctx().clone(), z.level(), n, n);
            for b in &basis {
                c = c.add(&b.scale(&z.ctx().random_el(z.level(), &mut g)));
            }
            let c = c.with_ctx(&wctx).lift(r.w.level());
            prop_assert_eq!(c.mul(&r.w), r.w.mul(&c));
        }
    }

    #[test]
    fn companion_identity(p in prop::sample::select(vec![3u64, 5, 7, 11]), d in 1usize..5, seed in any::<u64>()) {
        let ctx = FieldCtx::prime(p).unwrap();
        let f = ctx.fq(0);
        let mut r = rng(seed);
        let irr = ip1s_core::field::factor::random_irreducible(f, d, &mut r);
        if FieldCtx::is_zero_el(&irr[0]) {
            return Ok(());
        }
        let pp = UniPoly::new(ctx.clone(), 0, irr.clone());
        let (q, lev) = sqrt_companion(&pp).unwrap();
        let qctx = q.ctx.clone();
        let fq = qctx.fq(lev);
        let qc = q.coeffs.iter().map(|c| qctx.embed(q.level, lev, c)).collect::<Vec<_>>();
        let qneg = ip1s_core::field::poly::negate_var(fq, &qc);
        let mut lhs = ip1s_core::field::poly::mul(fq, &qc, &qneg);
        if d % 2 == 1 {
            lhs = ip1s_core::field::poly::neg(fq, &lhs);
        }
        // P(z²)
        let mut rhs = vec![qctx.zero(lev); 2 * d + 1];
        for (i, c) in irr.iter().enumerate() {
            rhs[2 * i] = qctx.embed(0, lev, c);
        }
        prop_assert_eq!(lhs, rhs);
    }
}

fn all_matrices(ctx: &Arc<FieldCtx>, n: usize) -> impl Iterator<Item = MatrixF> + '_ {
    let q = ctx.order_u64(ctx.top()).unwrap();
    let l = ctx.top();
    (0..q.pow((n * n) as u32)).map(move |idx| {
        let mut t = idx;
        MatrixF::from_fn(ctx, l, n, n, |_, _| {
            let e = ctx.element_from_index(l, t % q);
            t /= q;
            e
        })
    })
}

#[test]
fn char2_existence_matches_enumeration() {
    for (q, nmax) in [(2u64, 4usize), (4, 2)] {
        let ctx = field_of_order(q).unwrap();
        for n in 1..=nmax {
            let squares: HashSet<Vec<u64>> = all_matrices(&ctx, n).map(|w| w.mul(&w).raw().to_vec()).collect();
            for z in all_matrices(&ctx, n).filter(|z| z.is_invertible()) {
                let expected = squares.contains(z.raw());
                match sqrt_matrix(&z, Backend::Jordan) {
                    Ok(r) => {
                        assert!(expected, "root claimed for a non-square over F_{q}:\n{z}");
                        let zl = z.with_ctx(r.w.ctx()).lift(r.w.level());
                        assert_eq!(r.w.mul(&r.w), zl);
                    }
                    Err(Error::NoSquareRoot(_)) => assert!(!expected, "missed a square over F_{q}:\n{z}"),
                    Err(e) => panic!("unexpected error {e} for\n{z}"),
                }
            }
        }
    }
}

#[test]
fn char2_block_squares_split() {
    for q in [2u64, 4] {
        let ctx = field_of_order(q).unwrap();
        let l = ctx.top();
        let mut r = rng(q);
        for d in 1..=7 {
            let j = MatrixF::jordan_block(&ctx, l, &ctx.random_nonzero(l, &mut r), d);
            let mut sizes: Vec<usize> = jordan_form(&j.mul(&j)).unwrap().blocks.iter().map(|b| b.size).collect();
            sizes.sort_unstable();
            let mut want = vec![d / 2, d.div_ceil(2)];
            want.retain(|&s| s > 0);
            assert_eq!(sizes, want, "d = {d}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_soundness(q in prop::sample::select(vec![3u64, 5, 7, 9, 2, 4, 65521]), n in 2usize..6, m in 1usize..4, seed in any::<u64>(), planted in any::<bool>()) {
        let ctx = field_of_order(q).unwrap();
        let n = if q % 2 == 0 { n & !1 } else { n };
        let mut r = rng(seed);
        let f = random_regular(&ctx, n, m, &mut r).unwrap();
        let g = if planted {
            f.substitute(&MatrixF::random_invertible(&ctx, ctx.top(), n, &mut r))
        } else {
            random_regular(&ctx, n, m, &mut r).unwrap()
        };
        let out = solve(&f, &g, seed, &SolveOptions::default());
        match out {
            Ok(Outcome::Solution(s)) => {
                prop_assert!(check_solution(&f, &g, &s).unwrap());
                prop_assert_eq!(s.field_level, f.level);
            }
            Ok(Outcome::NoSol(_)) => prop_assert!(!planted),
            Ok(Outcome::Irregular(msg)) => prop_assert!(false, "regular f reported irregular: {}", msg),
            Err(Error::LoopBudgetExceeded(_)) | Err(Error::GenericityFailure(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn canonical_solutions_backmap(q in prop::sample::select(vec![7u64, 101, 65521]), n in 2usize..6, m in 1usize..4, seed in any::<u64>()) {
        let ctx = field_of_order(q).unwrap();
        let mut r = rng(seed);
        let f = random_regular(&ctx, n, m, &mut r).unwrap();
        let g = f.substitute(&MatrixF::random_invertible(&ctx, ctx.top(), n, &mut r));
        let Canonical::Instance(inst) = canonicalize_forms(&f, &g, seed).unwrap() else {
            return Err(TestCaseError::fail("planted instance canonicalized to NoSol"));
        };
        let space = conjugacy_space(&inst, seed).unwrap();
        let Ok(y) = sample_invertible(&space, seed) else { return Ok(()) };
        let sol = orthogonalize(&y, &inst, Backend::Companion).unwrap();
        prop_assert!(verify(&sol, &inst));
        if let SolutionMode::Assembled(a) = &sol.mode {
            if a.level() == 0 {
                let d = inst.metric();
                prop_assert_eq!(a.transpose().mul(&d).mul(a), d);
                let back = inst.back_map(a).unwrap();
                prop_assert!(f.substitute(&back).same_polys(&g));
            }
        }
    }

    #[test]
    fn generic_agrees_with_solve(n in 3usize..7, m in 3usize..5, seed in any::<u64>(), planted in any::<bool>()) {
        let ctx = field_of_order(65521).unwrap();
        let mut r = rng(seed);
        let f = random_regular(&ctx, n, m, &mut r).unwrap();
        let g = if planted {
            f.substitute(&MatrixF::random_invertible(&ctx, ctx.top(), n, &mut r))
        } else {
            random_regular(&ctx, n, m, &mut r).unwrap()
        };
        let full = solve(&f, &g, seed, &SolveOptions::default()).unwrap();
        match solve_generic(&f, &g, seed) {
            Ok(GenericOutcome::Solution { a, over_extension }) => {
                prop_assert!(full.is_solution() || over_extension);
                if !over_extension {
                    prop_assert!(f.substitute(&a).same_polys(&g));
                }
            }
            Ok(GenericOutcome::NoSol(_)) => prop_assert!(!full.is_solution()),
            Err(Error::GenericityFailure(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn jordan_dimension_is_commutant_dimension(n in 1usize..5, seed in any::<u64>(), structured in any::<bool>()) {
        let ctx = field_of_order(9).unwrap();
        let h = if structured {
            random_invertible_z(&ctx, n, seed, true)
        } else {
            MatrixF::random(&ctx, 1, n, n, &mut rng(seed))
        };
        prop_assert_eq!(jordan_commutant_dim(&h).unwrap().0, commutant_dimension(&h));
    }

    #[test]
    fn automorphism_count_within_bound(q in prop::sample::select(vec![3u64, 5]), n in 2usize..4, m in 1usize..4, seed in any::<u64>()) {
        let ctx = field_of_order(q).unwrap();
        let f = random_regular(&ctx, n, m, &mut rng(seed)).unwrap();
        let exact = brute_force_equivalence(&f, &f).unwrap().count;
        let b = count_bound(&f, seed).unwrap();
        prop_assert!(BigUint::from(exact) <= b.bound);
        prop_assert!(b.base_dim <= b.dim);
    }
}

/// Automorphisms of a canonical form commute with `D⁻¹·Hess f_i`.
#[test]
fn solution_ratios_commute() {
    let mut r = rng(11);
    for (q, n) in [(5u64, 2usize), (5, 3), (3, 3)] {
        let ctx = field_of_order(q).unwrap();
        for m in 1..=3 {
            let f = random_regular(&ctx, n, m, &mut r).unwrap();
            let g = f.substitute(&MatrixF::random_invertible(&ctx, ctx.top(), n, &mut r));
            let Canonical::Instance(inst) = canonicalize_forms(&f, &g, 3).unwrap() else { panic!() };
            let res = brute_force_equivalence(&inst.f_system(), &inst.g_system()).unwrap();
            assert!(res.equivalent);
            let dinv = inst.metric().inverse().unwrap();
            let x0inv = res.witnesses[0].inverse().unwrap();
            for x in &res.witnesses[1..] {
                let ratio = x.mul(&x0inv);
                for i in 0..m {
                    let h = dinv.mul(&inst.hess_f(i));
                    assert_eq!(ratio.mul(&h), h.mul(&ratio));
                }
            }
        }
    }
}

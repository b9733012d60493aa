//! Quadratic systems and their canonical forms.
//!
//! A form is stored as an upper-triangular matrix `U` with `f(x) = xᵀUx`.
//! The Hessian is `U + Uᵀ` in every characteristic: in odd characteristic
//! it satisfies `xᵀHx = 2f`, in characteristic 2 it is `Σ(U)`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::factor;
use crate::field::{El, FieldCtx};
use crate::matrix::{EchelonBasis, MatrixF};

/// Random draws before falling back to exhaustive search for `λ`.
pub const REGULAR_DRAWS: usize = 32;
/// Exhaustive `λ` search is attempted when `q^m` is at most this.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 16;

/// `m` quadratic polynomials in `n` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadSystem {
    pub ctx: Arc<FieldCtx>,
    pub level: usize,
    pub n: usize,
    pub mats: Vec<MatrixF>,
    /// Linear parts `L_i` (length `n` each), absent for homogeneous systems.
    pub linear: Option<Vec<Vec<El>>>,
    pub constants: Option<Vec<El>>,
}

/// Fold a square matrix into upper-triangular form with the same quadratic form.
pub fn upper(m: &MatrixF) -> MatrixF {
    let ctx = m.ctx();
    let n = m.rows();
    let mut u = MatrixF::zeros(ctx, m.level(), n, n);
    for i in 0..n {
        u.set(i, i, m.get(i, i));
        for j in i + 1..n {
            u.set(i, j, &ctx.add(m.get(i, j), m.get(j, i)));
        }
    }
    u
}

/// `Σ(M) = M + Mᵀ`.
pub fn sigma(m: &MatrixF) -> MatrixF {
    m.add(&m.transpose())
}

/// `Δ(M)`, the diagonal part.
pub fn delta(m: &MatrixF) -> MatrixF {
    let n = m.rows();
    let mut d = MatrixF::zeros(m.ctx(), m.level(), n, n);
    for i in 0..n {
        d.set(i, i, m.get(i, i));
    }
    d
}

impl QuadSystem {
    /// Homogeneous system; the matrices are folded to upper-triangular form.
    pub fn new(ctx: &Arc<FieldCtx>, level: usize, n: usize, mats: Vec<MatrixF>) -> QuadSystem {
        let mats = mats.iter().map(|m| upper(&m.lift_to(ctx, level))).collect();
        QuadSystem {
            ctx: ctx.clone(),
            level,
            n,
            mats,
            linear: None,
            constants: None,
        }
    }

    pub fn with_affine(mut self, linear: Vec<Vec<El>>, constants: Vec<El>) -> QuadSystem {
        self.linear = Some(linear);
        self.constants = Some(constants);
        self
    }

    /// Build from prime-field integer matrices.
    pub fn from_i64(ctx: &Arc<FieldCtx>, mats: &[Vec<Vec<i64>>]) -> QuadSystem {
        let ms: Vec<MatrixF> = mats.iter().map(|m| MatrixF::from_i64(ctx, m)).collect();
        let n = ms.first().map_or(0, |m| m.rows());
        QuadSystem::new(ctx, 0, n, ms)
    }

    /// Homogeneous system whose Hessians (`H + Hᵀ` convention) are the given
    /// symmetric matrices.  Odd characteristic only.
    pub fn from_hessians(ctx: &Arc<FieldCtx>, level: usize, hs: &[MatrixF]) -> QuadSystem {
        let half = ctx.inv(level, &ctx.from_u64(level, 2)).expect("odd characteristic");
        let n = hs[0].rows();
        let mats = hs
            .iter()
            .map(|h| {
                let mut u = upper(h);
                for i in 0..n {
                    let v = ctx.mul(level, h.get(i, i), &half);
                    u.set(i, i, &v);
                }
                u
            })
            .collect();
        QuadSystem::new(ctx, level, n, mats)
    }

    pub fn m(&self) -> usize {
        self.mats.len()
    }

    pub fn is_homogeneous(&self) -> bool {
        let zero = |v: &Vec<El>| v.iter().all(|x| FieldCtx::is_zero_el(x));
        self.linear.as_ref().is_none_or(|ls| ls.iter().all(zero)) && self.constants.as_ref().is_none_or(zero)
    }

    pub fn is_char2(&self) -> bool {
        self.ctx.p() == 2
    }

    /// Hessian `U_i + U_iᵀ` (`Σ(U_i)` in characteristic 2).
    pub fn hessian(&self, i: usize) -> MatrixF {
        sigma(&self.mats[i])
    }

    pub fn hessians(&self) -> Vec<MatrixF> {
        (0..self.m()).map(|i| self.hessian(i)).collect()
    }

    pub fn evaluate(&self, x: &[El]) -> Vec<El> {
        let ctx = &self.ctx;
        let l = self.level;
        (0..self.m())
            .map(|k| {
                let u = &self.mats[k];
                let mut acc = ctx.zero(l);
                for i in 0..self.n {
                    if FieldCtx::is_zero_el(&x[i]) {
                        continue;
                    }
                    let mut row = ctx.zero(l);
                    for j in i..self.n {
                        let c = u.get(i, j);
                        if !FieldCtx::is_zero_el(c) {
                            ctx.add_assign(&mut row, &ctx.mul(l, c, &x[j]));
                        }
                    }
                    ctx.add_assign(&mut acc, &ctx.mul(l, &x[i], &row));
                }
                if let Some(ls) = &self.linear {
                    for (c, xi) in ls[k].iter().zip(x) {
                        ctx.add_assign(&mut acc, &ctx.mul(l, c, xi));
                    }
                }
                if let Some(cs) = &self.constants {
                    ctx.add_assign(&mut acc, &cs[k]);
                }
                acc
            })
            .collect()
    }

    /// The system `f(Ax)`; `A` may live at a higher level of an extending context.
    pub fn substitute(&self, a: &MatrixF) -> QuadSystem {
        let (ctx, l) = if self.ctx.is_prefix_of(a.ctx()) && a.ctx().depth() >= self.ctx.depth() {
            (a.ctx().clone(), a.level().max(self.level))
        } else {
            (self.ctx.clone(), self.level.max(a.level()))
        };
        let a = a.lift_to(&ctx, l);
        let at = a.transpose();
        let mats = self
            .mats
            .iter()
            .map(|u| upper(&at.mul(&u.lift_to(&ctx, l)).mul(&a)))
            .collect();
        let linear = self.linear.as_ref().map(|ls| {
            ls.iter()
                .map(|row| {
                    let r = MatrixF::from_rows(&ctx, l, &[row.iter().map(|x| ctx.embed(self.level, l, x)).collect()]);
                    r.mul(&a).row(0)
                })
                .collect()
        });
        let constants = self
            .constants
            .as_ref()
            .map(|cs| cs.iter().map(|c| ctx.embed(self.level, l, c)).collect());
        QuadSystem {
            ctx,
            level: l,
            n: self.n,
            mats,
            linear,
            constants,
        }
    }

    /// Same system re-expressed at a higher level of an extending context.
    pub fn lift_to(&self, ctx: &Arc<FieldCtx>, level: usize) -> QuadSystem {
        QuadSystem {
            ctx: ctx.clone(),
            level,
            n: self.n,
            mats: self.mats.iter().map(|m| m.lift_to(ctx, level)).collect(),
            linear: self
                .linear
                .as_ref()
                .map(|ls| ls.iter().map(|r| r.iter().map(|x| ctx.embed(self.level, level, x)).collect()).collect()),
            constants: self
                .constants
                .as_ref()
                .map(|cs| cs.iter().map(|c| ctx.embed(self.level, level, c)).collect()),
        }
    }

    /// Coefficientwise equality of the polynomials.
    pub fn same_polys(&self, o: &QuadSystem) -> bool {
        if self.n != o.n || self.m() != o.m() {
            return false;
        }
        let zero_l = |s: &QuadSystem, k: usize| s.linear.as_ref().is_none_or(|ls| ls[k].iter().all(|x| FieldCtx::is_zero_el(x)));
        (0..self.m()).all(|k| {
            self.mats[k] == o.mats[k]
                && match (&self.linear, &o.linear) {
                    (Some(a), Some(b)) => a[k].iter().zip(&b[k]).all(|(x, y)| same_el(x, y)),
                    _ => zero_l(self, k) && zero_l(o, k),
                }
                && same_el(
                    self.constants.as_ref().map_or(&[][..], |c| &c[k][..]),
                    o.constants.as_ref().map_or(&[][..], |c| &c[k][..]),
                )
        })
    }

    /// Replace the forms by linear combinations: row `k` of `c` gives form `k`.
    pub fn combine(&self, c: &[Vec<El>]) -> QuadSystem {
        let ctx = &self.ctx;
        let mats = c.iter().map(|row| MatrixF::combination(&self.mats, row)).collect();
        let lin = |ls: &Vec<Vec<El>>| -> Vec<Vec<El>> {
            c.iter()
                .map(|row| {
                    (0..self.n)
                        .map(|j| {
                            let mut acc = ctx.zero(self.level);
                            for (k, ck) in row.iter().enumerate() {
                                ctx.add_assign(&mut acc, &ctx.mul(self.level, ck, &ls[k][j]));
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        };
        let cons = |cs: &Vec<El>| -> Vec<El> {
            c.iter()
                .map(|row| {
                    let mut acc = ctx.zero(self.level);
                    for (k, ck) in row.iter().enumerate() {
                        ctx.add_assign(&mut acc, &ctx.mul(self.level, ck, &cs[k]));
                    }
                    acc
                })
                .collect()
        };
        QuadSystem {
            ctx: ctx.clone(),
            level: self.level,
            n: self.n,
            mats,
            linear: self.linear.as_ref().map(lin),
            constants: self.constants.as_ref().map(cons),
        }
    }

    /// Drop the affine parts after homogenization, returning the inhomogeneous
    /// system encoded by forms `1..` of a homogenized system (variable 0 is `x0`).
    pub fn dehomogenize(&self) -> QuadSystem {
        let ctx = &self.ctx;
        let l = self.level;
        let n = self.n - 1;
        let mut mats = Vec::new();
        let mut linear = Vec::new();
        let mut constants = Vec::new();
        for u in &self.mats[1..] {
            mats.push(u.submatrix(1, 1, n, n));
            linear.push((0..n).map(|j| u.get(0, j + 1).to_vec()).collect());
            constants.push(u.get(0, 0).to_vec());
        }
        QuadSystem {
            ctx: ctx.clone(),
            level: l,
            n,
            mats,
            linear: Some(linear),
            constants: Some(constants),
        }
    }
}

fn same_el(a: &[u64], b: &[u64]) -> bool {
    let n = a.len().max(b.len());
    (0..n).all(|i| a.get(i).copied().unwrap_or(0) == b.get(i).copied().unwrap_or(0))
}

/// Homogenize both systems with a new variable `x0`, prepending the guard form `x0²`.
pub fn homogenize(f: &QuadSystem, g: &QuadSystem) -> (QuadSystem, QuadSystem) {
    (homogenize_one(f), homogenize_one(g))
}

fn homogenize_one(f: &QuadSystem) -> QuadSystem {
    let ctx = &f.ctx;
    let l = f.level;
    let n = f.n + 1;
    let mut guard = MatrixF::zeros(ctx, l, n, n);
    guard.set(0, 0, &ctx.one(l));
    let mut mats = vec![guard];
    for k in 0..f.m() {
        let mut u = MatrixF::zeros(ctx, l, n, n);
        u.set_block(1, 1, &f.mats[k]);
        if let Some(ls) = &f.linear {
            for j in 0..f.n {
                u.set(0, j + 1, &ls[k][j]);
            }
        }
        if let Some(cs) = &f.constants {
            u.set(0, 0, &cs[k]);
        }
        mats.push(u);
    }
    QuadSystem {
        ctx: ctx.clone(),
        level: l,
        n,
        mats,
        linear: None,
        constants: None,
    }
}

/// `A' = [[1, 0], [b, A]]`: the homogenized form of the affine map `x ↦ Ax + b`.
pub fn affine_to_linear(a: &MatrixF, b: &[El]) -> MatrixF {
    let n = a.rows();
    let mut m = MatrixF::zeros(a.ctx(), a.level(), n + 1, n + 1);
    m.set(0, 0, &a.ctx().one(a.level()));
    for i in 0..n {
        m.set(i + 1, 0, &b[i]);
    }
    m.set_block(1, 1, a);
    m
}

/// Inverse of [`affine_to_linear`] for a solution of a homogenized instance:
/// normalizes by `a'_00 = ±1` and reads off `(A, b)`.
pub fn linear_to_affine(a: &MatrixF) -> Result<(MatrixF, Vec<El>)> {
    let ctx = a.ctx();
    let l = a.level();
    let n = a.rows() - 1;
    for j in 1..=n {
        if !FieldCtx::is_zero_el(a.get(0, j)) {
            return Err(Error::InvalidInput("solution does not stabilize x0".into()));
        }
    }
    let s = ctx.inv(l, a.get(0, 0)).map_err(|_| Error::InvalidInput("solution does not stabilize x0".into()))?;
    let c = a.scale(&s);
    let b = (1..=n).map(|i| c.get(i, 0).to_vec()).collect();
    Ok((c.submatrix(1, 1, n, n), b))
}

/// Matrix whose kernel is the space of redundant directions: `v` with
/// `Σ_i v = 0` for all `i` and, in characteristic 2, `f_i(v) = 0` as well
/// (a semilinear condition made linear by taking square roots of `Δ`).
fn redundancy_matrix(sys: &QuadSystem) -> MatrixF {
    let ctx = &sys.ctx;
    let l = sys.level;
    let n = sys.n;
    let mut rows: Vec<Vec<El>> = Vec::new();
    for k in 0..sys.m() {
        let h = sys.hessian(k);
        for i in 0..n {
            rows.push(h.row(i));
        }
        if sys.is_char2() {
            let u = &sys.mats[k];
            rows.push((0..n).map(|i| ctx.sqrt_el(l, u.get(i, i)).expect("char 2 square root")).collect());
        }
    }
    if rows.is_empty() {
        return MatrixF::zeros(ctx, l, 1, n);
    }
    MatrixF::from_rows(ctx, l, &rows)
}

/// Essential variables: `s`, an invertible `M` with `sys(Mx)` depending only on
/// `x_1..x_s`, and the reduced `s`-variable system.
pub fn essential_reduce(sys: &QuadSystem) -> (usize, MatrixF, QuadSystem) {
    let ctx = &sys.ctx;
    let l = sys.level;
    let n = sys.n;
    let ker = redundancy_matrix(sys).kernel();
    let s = n - ker.len();
    let mut basis = EchelonBasis::new(ctx, l);
    for v in &ker {
        basis.insert(v);
    }
    let mut cols: Vec<Vec<El>> = Vec::new();
    for i in 0..n {
        let mut e = vec![ctx.zero(l); n];
        e[i] = ctx.one(l);
        if basis.insert(&e) {
            cols.push(e);
        }
    }
    cols.extend(ker);
    let m = MatrixF::from_cols(ctx, l, n, &cols);
    let full = sys.substitute(&m);
    let mats = full.mats.iter().map(|u| u.submatrix(0, 0, s, s)).collect();
    let reduced = QuadSystem {
        ctx: ctx.clone(),
        level: l,
        n: s,
        mats,
        linear: None,
        constants: None,
    };
    (s, m, reduced)
}

/// Hessian of `Σ λ_i f_i`.
pub fn combined_hessian(sys: &QuadSystem, lambda: &[El]) -> MatrixF {
    MatrixF::combination(&sys.hessians(), lambda)
}

/// Find `λ ≠ 0` with `det(Σ λ_i Hess f_i) ≠ 0`: random draws, then exhaustive
/// search when the field is small enough.  The returned error message starts
/// with `certified` when the exhaustive search ran.
pub fn regular_combination(f: &QuadSystem, seed: u64) -> Result<Vec<El>> {
    let ctx = &f.ctx;
    let l = f.level;
    let m = f.m();
    if f.n == 0 || m == 0 {
        return Err(Error::Irregular("empty system".into()));
    }
    if f.is_char2() && f.n % 2 == 1 {
        return Err(Error::Irregular("certified: odd dimension in characteristic 2".into()));
    }
    let hs = f.hessians();
    let ok = |lam: &[El]| MatrixF::combination(&hs, lam).is_invertible();
    // the first form alone is the most common witness
    let mut e1 = vec![ctx.zero(l); m];
    e1[0] = ctx.one(l);
    if ok(&e1) {
        return Ok(e1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..REGULAR_DRAWS {
        let lam: Vec<El> = (0..m).map(|_| ctx.random_el(l, &mut rng)).collect();
        if lam.iter().any(|x| !FieldCtx::is_zero_el(x)) && ok(&lam) {
            return Ok(lam);
        }
    }
    let q = ctx.order_u64(l);
    let total = q.and_then(|q| q.checked_pow(m as u32)).filter(|&t| t <= EXHAUSTIVE_LIMIT);
    let Some(total) = total else {
        return Err(Error::Irregular("probably irregular: no regular combination found by sampling".into()));
    };
    let q = q.unwrap();
    for idx in 1..total {
        let mut t = idx;
        let lam: Vec<El> = (0..m)
            .map(|_| {
                let e = ctx.element_from_index(l, t % q);
                t /= q;
                e
            })
            .collect();
        if ok(&lam) {
            return Ok(lam);
        }
    }
    Err(Error::Irregular("certified: every linear combination is degenerate".into()))
}

/// Congruence `PᵀφP = D` with `D = diag(1, …, 1, δ)`, `δ ∈ {1, ν}` and `ν` the
/// canonical nonsquare.  Odd characteristic.
pub fn gauss_reduce(phi: &MatrixF) -> Result<(MatrixF, MatrixF)> {
    let ctx = phi.ctx().clone();
    let l = phi.level();
    let n = phi.rows();
    assert!(ctx.p() != 2, "Gauss reduction needs odd characteristic");
    let mut a = phi.clone();
    let mut p = MatrixF::identity(&ctx, l, n);
    // add c * (index k) to index j on both sides of the congruence
    let axpy = |a: &mut MatrixF, p: &mut MatrixF, j: usize, k: usize, c: &El| {
        for r in 0..n {
            let v = ctx.add(a.get(r, j), &ctx.mul(l, c, a.get(r, k)));
            a.set(r, j, &v);
        }
        for r in 0..n {
            let v = ctx.add(a.get(j, r), &ctx.mul(l, c, a.get(k, r)));
            a.set(j, r, &v);
        }
        for r in 0..n {
            let v = ctx.add(p.get(r, j), &ctx.mul(l, c, p.get(r, k)));
            p.set(r, j, &v);
        }
    };
    let swap = |a: &mut MatrixF, p: &mut MatrixF, i: usize, j: usize| {
        if i == j {
            return;
        }
        for r in 0..n {
            let (x, y) = (a.get(r, i).to_vec(), a.get(r, j).to_vec());
            a.set(r, i, &y);
            a.set(r, j, &x);
        }
        for r in 0..n {
            let (x, y) = (a.get(i, r).to_vec(), a.get(j, r).to_vec());
            a.set(i, r, &y);
            a.set(j, r, &x);
        }
        for r in 0..n {
            let (x, y) = (p.get(r, i).to_vec(), p.get(r, j).to_vec());
            p.set(r, i, &y);
            p.set(r, j, &x);
        }
    };
    let one = ctx.one(l);
    for k in 0..n {
        let piv = (k..n).find(|&i| !FieldCtx::is_zero_el(a.get(i, i)));
        let piv = match piv {
            Some(i) => i,
            None => {
                let mut found = None;
                'o: for i in k..n {
                    for j in k..n {
                        if i != j && !FieldCtx::is_zero_el(a.get(i, j)) {
                            found = Some((i, j));
                            break 'o;
                        }
                    }
                }
                let (i, j) = found.ok_or(Error::DegenerateForm)?;
                axpy(&mut a, &mut p, i, j, &one);
                i
            }
        };
        swap(&mut a, &mut p, k, piv);
        let inv = ctx.inv(l, a.get(k, k))?;
        for j in k + 1..n {
            if FieldCtx::is_zero_el(a.get(k, j)) {
                continue;
            }
            let c = ctx.neg(&ctx.mul(l, a.get(k, j), &inv));
            axpy(&mut a, &mut p, j, k, &c);
        }
    }
    // normalize each d_i to 1 or ν
    let nu = ctx.nonsquare_el(l);
    let nu_inv = ctx.inv(l, &nu)?;
    let mut is_nu = vec![false; n];
    for i in 0..n {
        let d = a.get(i, i).to_vec();
        let (w, ns) = if ctx.is_square_el(l, &d) {
            (ctx.sqrt_el(l, &d)?, false)
        } else {
            (ctx.sqrt_el(l, &ctx.mul(l, &d, &nu_inv))?, true)
        };
        let s = ctx.inv(l, &w)?;
        for r in 0..n {
            let v = ctx.mul(l, p.get(r, i), &s);
            p.set(r, i, &v);
        }
        is_nu[i] = ns;
    }
    // diag(ν, ν) ≅ diag(1, 1): find a² + b² = ν⁻¹
    let nus: Vec<usize> = (0..n).filter(|&i| is_nu[i]).collect();
    if nus.len() >= 2 {
        let (a0, b0) = sum_of_two_squares(&ctx, l, &nu_inv);
        for pair in nus.chunks(2) {
            if pair.len() < 2 {
                break;
            }
            let (i, j) = (pair[0], pair[1]);
            for r in 0..n {
                let (x, y) = (p.get(r, i).to_vec(), p.get(r, j).to_vec());
                let ni = ctx.add(&ctx.mul(l, &a0, &x), &ctx.mul(l, &b0, &y));
                let nj = ctx.sub(&ctx.mul(l, &a0, &y), &ctx.mul(l, &b0, &x));
                p.set(r, i, &ni);
                p.set(r, j, &nj);
            }
            is_nu[i] = false;
            is_nu[j] = false;
        }
    }
    // move a leftover ν to the last position
    if let Some(i) = (0..n).find(|&i| is_nu[i]) {
        if i != n - 1 {
            for r in 0..n {
                let (x, y) = (p.get(r, i).to_vec(), p.get(r, n - 1).to_vec());
                p.set(r, i, &y);
                p.set(r, n - 1, &x);
            }
            is_nu.swap(i, n - 1);
        }
    }
    let d: Vec<El> = (0..n).map(|i| if is_nu[i] { nu.clone() } else { one.clone() }).collect();
    let dm = MatrixF::diag(&ctx, l, &d);
    debug_assert_eq!(p.transpose().mul(phi).mul(&p), dm);
    Ok((dm, p))
}

fn sum_of_two_squares(ctx: &FieldCtx, l: usize, t: &[u64]) -> (El, El) {
    let q = ctx.order_u64(l).unwrap_or(u64::MAX);
    for idx in 0..q {
        let a = ctx.element_from_index(l, idx);
        let r = ctx.sub(t, &ctx.mul(l, &a, &a));
        if ctx.is_square_el(l, &r) {
            let b = ctx.sqrt_el(l, &r).expect("square");
            return (a, b);
        }
    }
    unreachable!("every element of a finite field is a sum of two squares")
}

/// Type of a nondegenerate even-dimensional form in characteristic 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Char2Kind {
    /// `ℓ1ℓ2 + ⋯ + ℓ_{n−1}ℓ_n`
    Hyperbolic,
    /// `ℓ1ℓ2 + ⋯ + ℓ_{n−1}ℓ_n + ℓ_{n−1}² + dℓ_n²` with `tr(d) = 1`
    Elliptic,
}

/// The fixed `d` with absolute trace 1 used by the elliptic canonical form.
pub fn trace_one_element(ctx: &FieldCtx, l: usize) -> El {
    let mut idx = 1;
    loop {
        let d = ctx.element_from_index(l, idx);
        if ctx.abs_trace(l, &d) == 1 {
            return d;
        }
        idx += 1;
    }
}

/// Canonical upper-triangular matrix for the given kind.
pub fn char2_canonical_matrix(ctx: &Arc<FieldCtx>, l: usize, n: usize, kind: Char2Kind) -> MatrixF {
    let mut d = MatrixF::zeros(ctx, l, n, n);
    for k in (0..n).step_by(2) {
        d.set(k, k + 1, &ctx.one(l));
    }
    if kind == Char2Kind::Elliptic {
        d.set(n - 2, n - 2, &ctx.one(l));
        d.set(n - 1, n - 1, &trace_one_element(ctx, l));
    }
    d
}

struct Char2Form<'a> {
    ctx: &'a Arc<FieldCtx>,
    l: usize,
    u: &'a MatrixF,
    s: MatrixF,
    rng: ChaCha8Rng,
}

impl Char2Form<'_> {
    fn q(&self, v: &[El]) -> El {
        let uv = self.u.mul_vec(v);
        dot(self.ctx, self.l, v, &uv)
    }

    fn b(&self, a: &[El], v: &[El]) -> El {
        let sv = self.s.mul_vec(v);
        dot(self.ctx, self.l, a, &sv)
    }

    fn axpy(&self, y: &[El], c: &[u64], x: &[El]) -> Vec<El> {
        y.iter().zip(x).map(|(yi, xi)| self.ctx.add(yi, &self.ctx.mul(self.l, c, xi))).collect()
    }

    fn scale(&self, c: &[u64], x: &[El]) -> Vec<El> {
        x.iter().map(|xi| self.ctx.mul(self.l, c, xi)).collect()
    }

    /// `(e, f)` in `w` with `B(e, f) = 1`.
    fn plane(&self, w: &[Vec<El>]) -> Result<(Vec<El>, Vec<El>)> {
        for (i, e) in w.iter().enumerate() {
            for f in &w[i + 1..] {
                let b = self.b(e, f);
                if !FieldCtx::is_zero_el(&b) {
                    let inv = self.ctx.inv(self.l, &b)?;
                    return Ok((e.clone(), self.scale(&inv, f)));
                }
            }
        }
        Err(Error::DegenerateForm)
    }

    /// Nonzero singular vector in the plane, if any.
    fn isotropic(&mut self, e: &[El], f: &[El]) -> Option<Vec<El>> {
        let a = self.q(e);
        if FieldCtx::is_zero_el(&a) {
            return Some(e.to_vec());
        }
        let b = self.q(f);
        if FieldCtx::is_zero_el(&b) {
            return Some(f.to_vec());
        }
        // Q(x e + f) = a x² + x + b
        let fq = self.ctx.fq(self.l);
        let roots = factor::roots(fq, &[b, self.ctx.one(self.l), a], &mut self.rng);
        roots.first().map(|x| self.axpy(f, x, e))
    }

    /// `B`-orthogonal complement of the hyperbolic pair `(u, v)` inside `w`.
    fn complement(&self, w: &[Vec<El>], u: &[El], v: &[El]) -> Vec<Vec<El>> {
        let mut span = EchelonBasis::new(self.ctx, self.l);
        span.insert(u);
        span.insert(v);
        let mut out = Vec::new();
        for x in w {
            let bv = self.b(x, v);
            let bu = self.b(x, u);
            let y = self.axpy(&self.axpy(x, &bv, u), &bu, v);
            if span.insert(&y) {
                out.push(y);
            }
        }
        out
    }
}

fn dot(ctx: &FieldCtx, l: usize, a: &[El], b: &[El]) -> El {
    let mut acc = ctx.zero(l);
    for (x, y) in a.iter().zip(b) {
        if !FieldCtx::is_zero_el(x) && !FieldCtx::is_zero_el(y) {
            ctx.add_assign(&mut acc, &ctx.mul(l, x, y));
        }
    }
    acc
}

/// Canonical form of a nondegenerate form in characteristic 2, `n` even:
/// `φ(Px)` has upper-triangular matrix `δ` of the returned kind and
/// `Σ(δ)` is block diagonal with `[[0,1],[1,0]]` blocks.
pub fn canonical_char2(phi: &MatrixF) -> Result<(MatrixF, MatrixF, Char2Kind)> {
    let ctx = phi.ctx().clone();
    let l = phi.level();
    let n = phi.rows();
    assert_eq!(ctx.p(), 2, "characteristic 2 canonical form");
    if n % 2 == 1 {
        return Err(Error::Irregular("certified: odd dimension in characteristic 2".into()));
    }
    let u = upper(phi);
    let s = sigma(&u);
    if !s.is_invertible() {
        return Err(Error::DegenerateForm);
    }
    let mut form = Char2Form {
        ctx: &ctx,
        l,
        u: &u,
        s,
        rng: ChaCha8Rng::seed_from_u64(0xc4a2),
    };
    let mut w: Vec<Vec<El>> = (0..n)
        .map(|i| {
            let mut e = vec![ctx.zero(l); n];
            e[i] = ctx.one(l);
            e
        })
        .collect();
    let mut cols: Vec<Vec<El>> = Vec::new();
    let mut kind = Char2Kind::Hyperbolic;
    while !w.is_empty() {
        let (e, f) = form.plane(&w)?;
        let mut singular = form.isotropic(&e, &f);
        if singular.is_none() && w.len() == 2 {
            // anisotropic last plane: x² + xy + d y²
            let a = form.q(&e);
            let x = ctx.sqrt_el(l, &ctx.inv(l, &a)?)?;
            let e1 = form.scale(&x, &e);
            let f1 = form.scale(&ctx.inv(l, &x)?, &f);
            let d0 = trace_one_element(&ctx, l);
            let t = ctx.sub(&form.q(&f1), &d0);
            let fq = ctx.fq(l);
            let roots = factor::roots(fq, &[t, ctx.one(l), ctx.one(l)], &mut form.rng);
            let c = roots.first().cloned().ok_or(Error::DegenerateForm)?;
            let f2 = form.axpy(&f1, &c, &e1);
            cols.push(e1);
            cols.push(f2);
            kind = Char2Kind::Elliptic;
            break;
        }
        if singular.is_none() {
            // two orthogonal anisotropic planes: u1 + u2 with Q(u1) = Q(u2) = 1
            let rest = form.complement(&w, &e, &f);
            let (e2, f2) = form.plane(&rest)?;
            singular = form.isotropic(&e2, &f2);
            if singular.is_none() {
                let x1 = ctx.sqrt_el(l, &ctx.inv(l, &form.q(&e))?)?;
                let x2 = ctx.sqrt_el(l, &ctx.inv(l, &form.q(&e2))?)?;
                let u1 = form.scale(&x1, &e);
                let uu = form.axpy(&u1, &x2, &e2);
                singular = Some(uu);
            }
        }
        let uvec = singular.unwrap();
        let mut v = None;
        for x in &w {
            let b = form.b(&uvec, x);
            if !FieldCtx::is_zero_el(&b) {
                v = Some(form.scale(&ctx.inv(l, &b)?, x));
                break;
            }
        }
        let v = v.ok_or(Error::DegenerateForm)?;
        let qv = form.q(&v);
        let v = form.axpy(&v, &qv, &uvec);
        w = form.complement(&w, &uvec, &v);
        cols.push(uvec);
        cols.push(v);
    }
    let p = MatrixF::from_cols(&ctx, l, n, &cols);
    let delta = char2_canonical_matrix(&ctx, l, n, kind);
    debug_assert_eq!(upper(&p.transpose().mul(&u).mul(&p)), delta);
    Ok((delta, p, kind))
}

/// Smallest `ν` (in element-index order, starting at 0) such that `h − ν h1`
/// and `h2 − ν h1` are both invertible.
pub fn find_shift(h1: &MatrixF, h: &MatrixF, h2: &MatrixF) -> Result<El> {
    let ctx = h1.ctx();
    let l = h1.level();
    let q = ctx.order_u64(l).unwrap_or(u64::MAX);
    let limit = q.min(4 * h1.rows() as u64 + 8);
    for idx in 0..limit {
        let nu = ctx.element_from_index(l, idx);
        let s = h1.scale(&nu);
        if h.sub(&s).is_invertible() && h2.sub(&s).is_invertible() {
            return Ok(nu);
        }
    }
    Err(Error::FieldTooSmall(format!(
        "no shift avoids the eigenvalues over a field of {} elements",
        q
    )))
}

/// Canonicalized pair of systems with the data needed to map solutions back.
#[derive(Clone, Debug)]
pub struct CanonicalInstance {
    pub ctx: Arc<FieldCtx>,
    pub level: usize,
    pub n: usize,
    /// Upper-triangular matrices of `f̃` and `g̃`; the first ones coincide.
    pub f: Vec<MatrixF>,
    pub g: Vec<MatrixF>,
    /// Odd characteristic: the diagonal Hessian `D` of the first forms.
    /// Characteristic 2: the canonical upper-triangular `δ`.
    pub d: MatrixF,
    pub char2_kind: Option<Char2Kind>,
    /// `f(Px) = f̃(x)`, `g(Qx) = g̃(x)` (after the form recombination below).
    pub p: MatrixF,
    pub q: MatrixF,
    /// Regular combination used for the first form.
    pub lambda: Vec<El>,
    /// Index of the original form replaced by the combination.
    pub first: usize,
    /// Shifts: form `i` of `f̃` is `f_{σ(i)} − ν_i φ` (plus in characteristic 2).
    pub nu: Vec<El>,
    /// Whether every shifted Hessian is invertible.
    pub all_invertible: bool,
}

impl CanonicalInstance {
    pub fn is_char2(&self) -> bool {
        self.ctx.p() == 2
    }

    /// The metric of the orthogonality condition: `D` or `Σ(δ)`.
    pub fn metric(&self) -> MatrixF {
        if self.is_char2() {
            sigma(&self.d)
        } else {
            self.d.clone()
        }
    }

    pub fn hess_f(&self, i: usize) -> MatrixF {
        sigma(&self.f[i])
    }

    pub fn hess_g(&self, i: usize) -> MatrixF {
        sigma(&self.g[i])
    }

    pub fn f_system(&self) -> QuadSystem {
        QuadSystem::new(&self.ctx, self.level, self.n, self.f.clone())
    }

    pub fn g_system(&self) -> QuadSystem {
        QuadSystem::new(&self.ctx, self.level, self.n, self.g.clone())
    }

    /// Original solution `P A' Q⁻¹` from a canonical one.
    pub fn back_map(&self, a: &MatrixF) -> Result<MatrixF> {
        Ok(self.p.mul(a).mul(&self.q.inverse()?))
    }

    /// Mixing matrix turning the original forms into the canonical ones
    /// (before shifting): row `i` lists the coefficients of form `i`.
    pub fn form_order(&self, m: usize) -> Vec<usize> {
        let mut order = vec![self.first];
        order.extend((0..m).filter(|&i| i != self.first));
        order
    }
}

/// Result of [`canonicalize_forms`].
#[derive(Clone, Debug)]
pub enum Canonical {
    Instance(CanonicalInstance),
    NoSol(String),
}

/// Canonicalize a pair of homogeneous systems with the same `(n, m)` and all
/// `n` variables essential.  Irregular pairs yield `Error::Irregular`.
pub fn canonicalize_forms(f: &QuadSystem, g: &QuadSystem, seed: u64) -> Result<Canonical> {
    if f.n != g.n || f.m() != g.m() {
        return Ok(Canonical::NoSol("systems have different shapes".into()));
    }
    let ctx = f.ctx.clone();
    let l = f.level;
    let n = f.n;
    let m = f.m();
    let lambda = match regular_combination(f, seed) {
        Ok(lam) => lam,
        Err(Error::Irregular(msg)) => {
            // regularity is invariant under equivalence
            return match regular_combination(g, seed ^ 1) {
                Ok(_) => Ok(Canonical::NoSol("only one side is regular".into())),
                Err(_) => Err(Error::Irregular(msg)),
            };
        }
        Err(e) => return Err(e),
    };
    let first = lambda.iter().position(|x| !FieldCtx::is_zero_el(x)).expect("nonzero λ");
    let mut order = vec![first];
    order.extend((0..m).filter(|&i| i != first));
    let mix: Vec<Vec<El>> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            if pos == 0 {
                lambda.clone()
            } else {
                let mut r = vec![ctx.zero(l); m];
                r[i] = ctx.one(l);
                r
            }
        })
        .collect();
    let fm = f.combine(&mix);
    let gm = g.combine(&mix);
    let phi = fm.hessian(0);
    let gamma = gm.hessian(0);
    if !gamma.is_invertible() {
        return Ok(Canonical::NoSol("combination regular on one side only".into()));
    }
    let (d, p, q, kind) = if ctx.p() == 2 {
        let (d1, p, k1) = canonical_char2(&fm.mats[0])?;
        let (_, q, k2) = canonical_char2(&gm.mats[0])?;
        if k1 != k2 {
            return Ok(Canonical::NoSol("first forms have different Arf invariants".into()));
        }
        (d1, p, q, Some(k1))
    } else {
        let (d1, p) = gauss_reduce(&phi)?;
        let (d2, q) = gauss_reduce(&gamma)?;
        if d1 != d2 {
            return Ok(Canonical::NoSol("first forms have different discriminants".into()));
        }
        (d1, p, q, None)
    };
    let ft = fm.substitute(&p);
    let gt = gm.substitute(&q);
    let mut inst = CanonicalInstance {
        ctx: ctx.clone(),
        level: l,
        n,
        f: ft.mats,
        g: gt.mats,
        d,
        char2_kind: kind,
        p,
        q,
        lambda,
        first,
        nu: vec![ctx.zero(l); m],
        all_invertible: true,
    };
    // the first forms are now equal by construction
    inst.g[0] = inst.f[0].clone();
    if let Err(e) = shift_invertible(&mut inst) {
        match e {
            Error::FieldTooSmall(_) => inst.all_invertible = false,
            other => return Err(other),
        }
    }
    Ok(Canonical::Instance(inst))
}

/// Replace form `i ≥ 1` by `f̃_i − ν_i f̃_1` on both sides so that every
/// Hessian is invertible.  Forms for which no shift exists are left as they
/// are and the error is reported after processing the others.
pub fn shift_invertible(inst: &mut CanonicalInstance) -> Result<()> {
    let h1 = sigma(&inst.f[0]);
    let mut failure = None;
    for i in 1..inst.f.len() {
        let hf = sigma(&inst.f[i]);
        let hg = sigma(&inst.g[i]);
        if hf.is_invertible() && hg.is_invertible() {
            continue;
        }
        match find_shift(&h1, &hf, &hg) {
            Ok(nu) => {
                let s = inst.f[0].scale(&nu);
                inst.f[i] = inst.f[i].sub(&s);
                inst.g[i] = inst.g[i].sub(&s);
                inst.nu[i] = nu;
            }
            Err(e) => failure = Some(e),
        }
    }
    match failure {
        Some(e) => {
            inst.all_invertible = false;
            Err(e)
        }
        None => Ok(()),
    }
}

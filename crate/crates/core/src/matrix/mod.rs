//! Dense matrices over one level of a field tower.

pub mod intertwine;
pub mod jordan;

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::poly::{self, Coeffs};
use crate::field::prime::{addmod, invmod, mulmod, negmod, submod};
use crate::field::{El, FieldCtx, FieldElem, Fq, UniPoly};

pub use jordan::{jordan_form, rational_canonical_form, JordanBlock, JordanData, RationalBlock, RationalCanonicalData};

/// Row-major dense matrix; entry `(i, j)` occupies `stride` consecutive words.
#[derive(Clone, Debug)]
pub struct MatrixF {
    ctx: Arc<FieldCtx>,
    level: usize,
    rows: usize,
    cols: usize,
    s: usize,
    data: Vec<u64>,
}

impl PartialEq for MatrixF {
    fn eq(&self, o: &Self) -> bool {
        self.rows == o.rows
            && self.cols == o.cols
            && (self.ctx.is_prefix_of(&o.ctx) || o.ctx.is_prefix_of(&self.ctx))
            && if self.s == o.s {
                self.data == o.data
            } else {
                let s = self.s.max(o.s);
                (0..self.rows).all(|i| {
                    (0..self.cols).all(|j| {
                        let (a, b) = (self.get(i, j), o.get(i, j));
                        (0..s).all(|k| a.get(k).copied().unwrap_or(0) == b.get(k).copied().unwrap_or(0))
                    })
                })
            }
    }
}

impl Eq for MatrixF {}

/// Which result [`eliminate`] should produce.
#[derive(Clone, Debug)]
pub enum EliminateTask {
    Rank,
    Det,
    Inverse,
    Solve(MatrixF),
    KernelBasis,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EliminateResult {
    Rank(usize),
    Det(FieldElem),
    Inverse(MatrixF),
    Solve { x: MatrixF, kernel: Vec<MatrixF> },
    KernelBasis(Vec<MatrixF>),
}

/// Gaussian elimination front end.
pub fn eliminate(m: &MatrixF, task: EliminateTask) -> Result<EliminateResult> {
    Ok(match task {
        EliminateTask::Rank => EliminateResult::Rank(m.rank()),
        EliminateTask::Det => EliminateResult::Det(m.det_elem()?),
        EliminateTask::Inverse => EliminateResult::Inverse(m.inverse()?),
        EliminateTask::Solve(b) => {
            let (x, k) = m.solve(&b)?;
            EliminateResult::Solve {
                x,
                kernel: k.into_iter().map(|v| m.column_from(v)).collect(),
            }
        }
        EliminateTask::KernelBasis => {
            EliminateResult::KernelBasis(m.kernel().into_iter().map(|v| m.column_from(v)).collect())
        }
    })
}

impl MatrixF {
    pub fn zeros(ctx: &Arc<FieldCtx>, level: usize, rows: usize, cols: usize) -> MatrixF {
        let s = ctx.size(level);
        MatrixF {
            ctx: ctx.clone(),
            level,
            rows,
            cols,
            s,
            data: vec![0; rows * cols * s],
        }
    }

    pub fn identity(ctx: &Arc<FieldCtx>, level: usize, n: usize) -> MatrixF {
        let mut m = Self::zeros(ctx, level, n, n);
        for i in 0..n {
            m.data[(i * n + i) * m.s] = 1;
        }
        m
    }

    /// Prime-field matrix from signed integer rows.
    pub fn from_i64(ctx: &Arc<FieldCtx>, rows: &[Vec<i64>]) -> MatrixF {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(ctx, 0, r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix rows");
            for (j, &v) in row.iter().enumerate() {
                m.data[i * c + j] = crate::field::prime::reduce_i64(v, ctx.p());
            }
        }
        m
    }

    pub fn from_fn(
        ctx: &Arc<FieldCtx>,
        level: usize,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> El,
    ) -> MatrixF {
        let mut m = Self::zeros(ctx, level, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                m.set(i, j, &v);
            }
        }
        m
    }

    pub fn random<R: Rng + ?Sized>(ctx: &Arc<FieldCtx>, level: usize, rows: usize, cols: usize, rng: &mut R) -> MatrixF {
        let mut m = Self::zeros(ctx, level, rows, cols);
        for x in m.data.iter_mut() {
            *x = rng.gen_range(0..ctx.p());
        }
        m
    }

    /// Random invertible matrix by rejection sampling.
    pub fn random_invertible<R: Rng + ?Sized>(ctx: &Arc<FieldCtx>, level: usize, n: usize, rng: &mut R) -> MatrixF {
        loop {
            let m = Self::random(ctx, level, n, n, rng);
            if m.rank() == n {
                return m;
            }
        }
    }

    /// Diagonal matrix from entries.
    pub fn diag(ctx: &Arc<FieldCtx>, level: usize, d: &[El]) -> MatrixF {
        let n = d.len();
        let mut m = Self::zeros(ctx, level, n, n);
        for (i, x) in d.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    /// Companion matrix of a monic polynomial (ones on the subdiagonal, `-p_i` in the last column).
    pub fn companion(ctx: &Arc<FieldCtx>, level: usize, p: &[El]) -> MatrixF {
        let d = p.len() - 1;
        let mut m = Self::zeros(ctx, level, d, d);
        for i in 1..d {
            m.set(i, i - 1, &ctx.one(level));
        }
        for i in 0..d {
            m.set(i, d - 1, &ctx.neg(&p[i]));
        }
        m
    }

    /// Jordan block of size `d` with ones on the superdiagonal.
    pub fn jordan_block(ctx: &Arc<FieldCtx>, level: usize, z: &[u64], d: usize) -> MatrixF {
        let mut m = Self::zeros(ctx, level, d, d);
        for i in 0..d {
            m.set(i, i, z);
            if i + 1 < d {
                m.set(i, i + 1, &ctx.one(level));
            }
        }
        m
    }

    pub fn block_diag(ctx: &Arc<FieldCtx>, level: usize, blocks: &[MatrixF]) -> MatrixF {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let c: usize = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(ctx, level, n, c);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            m.set_block(r0, c0, &b.lift_to(ctx, level));
            r0 += b.rows;
            c0 += b.cols;
        }
        m
    }

    pub fn ctx(&self) -> &Arc<FieldCtx> {
        &self.ctx
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn fq(&self) -> Fq<'_> {
        self.ctx.fq(self.level)
    }

    pub fn raw(&self) -> &[u64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &[u64] {
        let o = (i * self.cols + j) * self.s;
        &self.data[o..o + self.s]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut [u64] {
        let o = (i * self.cols + j) * self.s;
        &mut self.data[o..o + self.s]
    }

    /// Set entry `(i, j)`; a lower-level value is zero-padded.
    pub fn set(&mut self, i: usize, j: usize, v: &[u64]) {
        let s = self.s;
        let dst = self.get_mut(i, j);
        let k = v.len().min(s);
        dst[..k].copy_from_slice(&v[..k]);
        dst[k..].iter_mut().for_each(|x| *x = 0);
    }

    pub fn entry(&self, i: usize, j: usize) -> FieldElem {
        FieldElem::new(self.ctx.clone(), self.level, self.get(i, j).to_vec())
    }

    pub fn row(&self, i: usize) -> Vec<El> {
        (0..self.cols).map(|j| self.get(i, j).to_vec()).collect()
    }

    pub fn col(&self, j: usize) -> Vec<El> {
        (0..self.rows).map(|i| self.get(i, j).to_vec()).collect()
    }

    pub fn from_cols(ctx: &Arc<FieldCtx>, level: usize, rows: usize, cols: &[Vec<El>]) -> MatrixF {
        let mut m = Self::zeros(ctx, level, rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..rows {
                m.set(i, j, &c[i]);
            }
        }
        m
    }

    pub fn from_rows(ctx: &Arc<FieldCtx>, level: usize, rows: &[Vec<El>]) -> MatrixF {
        let c = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(ctx, level, rows.len(), c);
        for (i, r) in rows.iter().enumerate() {
            for j in 0..c {
                m.set(i, j, &r[j]);
            }
        }
        m
    }

    fn column_from(&self, v: Vec<El>) -> MatrixF {
        Self::from_cols(&self.ctx, self.level, v.len(), &[v])
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatrixF {
        let mut m = Self::zeros(&self.ctx, self.level, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, self.get(r0 + i, c0 + j));
            }
        }
        m
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &MatrixF) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self.set(r0 + i, c0 + j, b.get(i, j));
            }
        }
    }

    /// Re-express over `level` of `ctx` (a context extending this one).
    pub fn lift_to(&self, ctx: &Arc<FieldCtx>, level: usize) -> MatrixF {
        assert!(self.ctx.is_prefix_of(ctx), "lift into an unrelated context");
        assert!(level >= self.level);
        if level == self.level && Arc::ptr_eq(ctx, &self.ctx) {
            return self.clone();
        }
        let mut m = Self::zeros(ctx, level, self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }

    pub fn lift(&self, level: usize) -> MatrixF {
        let ctx = self.ctx.clone();
        self.lift_to(&ctx, level)
    }

    /// Smallest level containing every entry.
    pub fn entry_level(&self) -> usize {
        let mut l = 0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                l = l.max(self.ctx.level_of(self.get(i, j)));
            }
        }
        l
    }

    /// Re-express at a lower level if all entries lie there.
    pub fn descend(&self, level: usize) -> Option<MatrixF> {
        if self.entry_level() > level {
            return None;
        }
        let mut m = Self::zeros(&self.ctx, level, self.rows, self.cols);
        let s = m.s;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j)[..s].to_vec();
                m.set(i, j, &v);
            }
        }
        Some(m)
    }

    /// Same entries in a context this one is a prefix of (or vice versa, when entries fit).
    pub fn with_ctx(&self, ctx: &Arc<FieldCtx>) -> MatrixF {
        if ctx.is_prefix_of(&self.ctx) && self.level <= ctx.top() {
            let mut m = Self::zeros(ctx, self.level, self.rows, self.cols);
            m.data.copy_from_slice(&self.data);
            m
        } else {
            self.lift_to(ctx, self.level)
        }
    }

    fn check_same(&self, o: &MatrixF) -> (MatrixF, MatrixF) {
        if self.level == o.level && Arc::ptr_eq(&self.ctx, &o.ctx) {
            return (self.clone(), o.clone());
        }
        let ctx = if o.ctx.is_prefix_of(&self.ctx) {
            self.ctx.clone()
        } else {
            assert!(self.ctx.is_prefix_of(&o.ctx), "incompatible matrix contexts");
            o.ctx.clone()
        };
        let l = self.level.max(o.level);
        (self.lift_to(&ctx, l), o.lift_to(&ctx, l))
    }

    pub fn add(&self, o: &MatrixF) -> MatrixF {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let (mut a, b) = self.check_same(o);
        let p = a.ctx.p();
        for (x, &y) in a.data.iter_mut().zip(&b.data) {
            *x = addmod(*x, y, p);
        }
        a
    }

    pub fn sub(&self, o: &MatrixF) -> MatrixF {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let (mut a, b) = self.check_same(o);
        let p = a.ctx.p();
        for (x, &y) in a.data.iter_mut().zip(&b.data) {
            *x = submod(*x, y, p);
        }
        a
    }

    pub fn neg(&self) -> MatrixF {
        let mut a = self.clone();
        let p = a.ctx.p();
        a.data.iter_mut().for_each(|x| *x = negmod(*x, p));
        a
    }

    pub fn scale(&self, c: &[u64]) -> MatrixF {
        let mut a = self.clone();
        let mut c = c.to_vec();
        c.resize(self.s, 0);
        let mut tmp = vec![0; self.s];
        for k in 0..self.rows * self.cols {
            let e = &mut a.data[k * self.s..(k + 1) * self.s];
            self.ctx.mul_into(self.level, e, &c, &mut tmp);
            e.copy_from_slice(&tmp);
        }
        a
    }

    pub fn transpose(&self) -> MatrixF {
        let mut m = Self::zeros(&self.ctx, self.level, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.get(i, j));
            }
        }
        m
    }

    pub fn mul(&self, o: &MatrixF) -> MatrixF {
        assert_eq!(self.cols, o.rows, "matrix shape mismatch");
        let (a, b) = self.check_same(o);
        let (n, k, m) = (a.rows, a.cols, b.cols);
        let mut out = Self::zeros(&a.ctx, a.level, n, m);
        let p = a.ctx.p();
        if a.s == 1 {
            if p <= u32::MAX as u64 {
                // products fit in u64; accumulate in u128 and reduce once
                for i in 0..n {
                    let arow = &a.data[i * k..(i + 1) * k];
                    let mut acc = vec![0u128; m];
                    for (t, &x) in arow.iter().enumerate() {
                        if x == 0 {
                            continue;
                        }
                        let brow = &b.data[t * m..(t + 1) * m];
                        for (c, &y) in acc.iter_mut().zip(brow) {
                            *c += (x * y) as u128;
                        }
                    }
                    for j in 0..m {
                        out.data[i * m + j] = (acc[j] % p as u128) as u64;
                    }
                }
            } else {
                for i in 0..n {
                    for t in 0..k {
                        let x = a.data[i * k + t];
                        if x == 0 {
                            continue;
                        }
                        for j in 0..m {
                            let v = mulmod(x, b.data[t * m + j], p);
                            out.data[i * m + j] = addmod(out.data[i * m + j], v, p);
                        }
                    }
                }
            }
            return out;
        }
        let s = a.s;
        let mut tmp = vec![0u64; s];
        for i in 0..n {
            for t in 0..k {
                let x = a.get(i, t);
                if FieldCtx::is_zero_el(x) {
                    continue;
                }
                for j in 0..m {
                    let y = b.get(t, j);
                    if FieldCtx::is_zero_el(y) {
                        continue;
                    }
                    a.ctx.mul_into(a.level, x, y, &mut tmp);
                    let o = (i * m + j) * s;
                    a.ctx.add_assign(&mut out.data[o..o + s], &tmp);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[El]) -> Vec<El> {
        let col = Self::from_cols(&self.ctx, self.level, self.cols, &[v.to_vec()]);
        self.mul(&col).col(0)
    }

    pub fn pow(&self, mut e: u64) -> MatrixF {
        let mut r = Self::identity(&self.ctx, self.level, self.rows);
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                r = r.mul(&b);
            }
            e >>= 1;
            if e > 0 {
                b = b.mul(&b);
            }
        }
        r
    }

    /// Evaluate a polynomial (coefficients at this matrix's level or below) at the matrix.
    pub fn eval_poly(&self, coeffs: &[El]) -> MatrixF {
        let n = self.rows;
        let mut acc = Self::zeros(&self.ctx, self.level, n, n);
        for c in coeffs.iter().rev() {
            acc = acc.mul(self);
            let mut c = c.clone();
            c.resize(self.s, 0);
            for i in 0..n {
                let v = self.ctx.add(acc.get(i, i), &c);
                acc.set(i, i, &v);
            }
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let e = self.get(i, j);
                    if i == j {
                        FieldCtx::is_one_el(e)
                    } else {
                        FieldCtx::is_zero_el(e)
                    }
                })
            })
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || FieldCtx::is_zero_el(self.get(i, j))))
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Apply `x ↦ x^(p^k)` entrywise.
    pub fn frobenius_entries(&self, k: usize) -> MatrixF {
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let mut v = self.get(i, j).to_vec();
                for _ in 0..k {
                    v = self.ctx.frobenius(self.level, &v);
                }
                m.set(i, j, &v);
            }
        }
        m
    }

    pub fn map_entries(&self, mut f: impl FnMut(&[u64]) -> El) -> MatrixF {
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = f(self.get(i, j));
                m.set(i, j, &v);
            }
        }
        m
    }

    /// Lexicographic comparison of the flattened entries.
    pub fn cmp_lex(&self, o: &MatrixF) -> std::cmp::Ordering {
        crate::field::cmp_lex(&self.data, &o.data)
    }

    // ----- elimination -----

    fn row_axpy(&mut self, dst: usize, src: usize, c: &[u64], from_col: usize, tmp: &mut [u64]) {
        // row_dst -= c * row_src, for columns >= from_col
        let s = self.s;
        let p = self.ctx.p();
        if s == 1 {
            let c = c[0];
            for j in from_col..self.cols {
                let y = self.data[src * self.cols + j];
                if y != 0 {
                    let v = mulmod(c, y, p);
                    let x = &mut self.data[dst * self.cols + j];
                    *x = submod(*x, v, p);
                }
            }
            return;
        }
        for j in from_col..self.cols {
            let o = (src * self.cols + j) * s;
            if self.data[o..o + s].iter().all(|&x| x == 0) {
                continue;
            }
            let y: Vec<u64> = self.data[o..o + s].to_vec();
            self.ctx.mul_into(self.level, c, &y, tmp);
            let d = (dst * self.cols + j) * s;
            self.ctx.sub_assign(&mut self.data[d..d + s], tmp);
        }
    }

    fn row_scale(&mut self, r: usize, c: &[u64], from_col: usize, tmp: &mut [u64]) {
        let s = self.s;
        if s == 1 {
            let p = self.ctx.p();
            for j in from_col..self.cols {
                let x = &mut self.data[r * self.cols + j];
                *x = mulmod(*x, c[0], p);
            }
            return;
        }
        for j in from_col..self.cols {
            let o = (r * self.cols + j) * s;
            let y: Vec<u64> = self.data[o..o + s].to_vec();
            self.ctx.mul_into(self.level, c, &y, tmp);
            self.data[o..o + s].copy_from_slice(tmp);
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let w = self.cols * self.s;
        let (lo, hi) = (a.min(b), a.max(b));
        let (x, y) = self.data.split_at_mut(hi * w);
        x[lo * w..(lo + 1) * w].swap_with_slice(&mut y[..w]);
    }

    fn inv_el(&self, a: &[u64]) -> El {
        if self.s == 1 {
            vec![invmod(a[0], self.ctx.p()).expect("nonzero pivot")]
        } else {
            self.ctx.inv(self.level, a).expect("nonzero pivot")
        }
    }

    /// Reduced row echelon form in place, restricted to the first `ncols`
    /// columns for pivot search.  Returns pivot columns and the determinant
    /// factor (product of pivots times the sign of the row permutation).
    pub fn rref_in_place(&mut self, ncols: usize) -> (Vec<usize>, El) {
        let mut tmp = vec![0u64; self.s];
        let mut pivots = Vec::new();
        let mut det = self.ctx.one(self.level);
        let mut row = 0;
        for col in 0..ncols {
            if row == self.rows {
                break;
            }
            let Some(pr) = (row..self.rows).find(|&r| !FieldCtx::is_zero_el(self.get(r, col))) else {
                continue;
            };
            if pr != row {
                self.swap_rows(pr, row);
                det = self.ctx.neg(&det);
            }
            let pv = self.get(row, col).to_vec();
            det = self.ctx.mul(self.level, &det, &pv);
            let inv = self.inv_el(&pv);
            self.row_scale(row, &inv, col, &mut tmp);
            for r in 0..self.rows {
                if r == row {
                    continue;
                }
                let c = self.get(r, col).to_vec();
                if !FieldCtx::is_zero_el(&c) {
                    self.row_axpy(r, row, &c, col, &mut tmp);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (pivots, det)
    }

    pub fn rref(&self) -> (MatrixF, Vec<usize>) {
        let mut m = self.clone();
        let (p, _) = m.rref_in_place(self.cols);
        (m, p)
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref_in_place(self.cols).0.len()
    }

    pub fn det(&self) -> El {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let mut m = self.clone();
        let (piv, det) = m.rref_in_place(self.cols);
        if piv.len() < self.rows {
            self.ctx.zero(self.level)
        } else {
            det
        }
    }

    fn det_elem(&self) -> Result<FieldElem> {
        if !self.is_square() {
            return Err(Error::InvalidInput("determinant of a non-square matrix".into()));
        }
        Ok(FieldElem::new(self.ctx.clone(), self.level, self.det()))
    }

    pub fn is_invertible(&self) -> bool {
        self.is_square() && self.rank() == self.rows
    }

    pub fn inverse(&self) -> Result<MatrixF> {
        if !self.is_square() {
            return Err(Error::InvalidInput("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Self::zeros(&self.ctx, self.level, n, 2 * n);
        aug.set_block(0, 0, self);
        for i in 0..n {
            aug.set(i, n + i, &self.ctx.one(self.level));
        }
        let (piv, _) = aug.rref_in_place(n);
        if piv.len() < n {
            return Err(Error::SingularMatrix);
        }
        Ok(aug.submatrix(0, n, n, n))
    }

    /// Basis of the right null space, as column vectors.
    pub fn kernel(&self) -> Vec<Vec<El>> {
        let (r, piv) = self.rref();
        let mut basis = Vec::new();
        let mut is_piv = vec![false; self.cols];
        for &c in &piv {
            is_piv[c] = true;
        }
        for free in 0..self.cols {
            if is_piv[free] {
                continue;
            }
            let mut v = vec![self.ctx.zero(self.level); self.cols];
            v[free] = self.ctx.one(self.level);
            for (ri, &pc) in piv.iter().enumerate() {
                v[pc] = self.ctx.neg(r.get(ri, free));
            }
            basis.push(v);
        }
        basis
    }

    /// Solve `self · X = B`: one particular solution and a kernel basis.
    pub fn solve(&self, b: &MatrixF) -> Result<(MatrixF, Vec<Vec<El>>)> {
        assert_eq!(self.rows, b.rows, "right-hand side shape mismatch");
        let b = b.lift_to(&self.ctx, self.level);
        let (n, c, k) = (self.rows, self.cols, b.cols);
        let mut aug = Self::zeros(&self.ctx, self.level, n, c + k);
        aug.set_block(0, 0, self);
        aug.set_block(0, c, &b);
        let (piv, _) = aug.rref_in_place(c);
        for r in piv.len()..n {
            for j in 0..k {
                if !FieldCtx::is_zero_el(aug.get(r, c + j)) {
                    return Err(Error::NoSolution);
                }
            }
        }
        let mut x = Self::zeros(&self.ctx, self.level, c, k);
        for (ri, &pc) in piv.iter().enumerate() {
            for j in 0..k {
                x.set(pc, j, aug.get(ri, c + j));
            }
        }
        Ok((x, self.kernel()))
    }

    /// Characteristic polynomial `det(xI - M)` via Hessenberg reduction.
    pub fn charpoly(&self) -> UniPoly {
        UniPoly::new(self.ctx.clone(), self.level, self.charpoly_coeffs())
    }

    pub fn charpoly_coeffs(&self) -> Coeffs {
        assert!(self.is_square());
        let n = self.rows;
        let f = self.fq();
        let mut h = self.clone();
        let mut tmp = vec![0u64; self.s];
        // Reduce to upper Hessenberg form by similarity.
        for j in 0..n.saturating_sub(2) {
            let Some(pr) = (j + 1..n).find(|&r| !FieldCtx::is_zero_el(h.get(r, j))) else {
                continue;
            };
            if pr != j + 1 {
                h.swap_rows(pr, j + 1);
                h.swap_cols(pr, j + 1);
            }
            let pinv = h.inv_el(h.get(j + 1, j));
            for i in j + 2..n {
                let hij = h.get(i, j).to_vec();
                if FieldCtx::is_zero_el(&hij) {
                    continue;
                }
                let u = f.mul(&hij, &pinv);
                h.row_axpy(i, j + 1, &u, 0, &mut tmp);
                // column j+1 += u * column i
                for r in 0..n {
                    let v = f.mul(&u, h.get(r, i));
                    let w = f.add(h.get(r, j + 1), &v);
                    h.set(r, j + 1, &w);
                }
            }
        }
        // p_k = (x - h_kk) p_{k-1} - sum_{i<k} h_{i,k} prod_{j=i+1..k} h_{j,j-1} p_{i-1}
        let mut ps: Vec<Coeffs> = vec![vec![f.one()]];
        for k in 0..n {
            let mut pk = poly::mul(f, &[f.neg(h.get(k, k)), f.one()], &ps[k]);
            let mut prod = f.one();
            for i in (0..k).rev() {
                prod = f.mul(&prod, h.get(i + 1, i));
                if f.is_zero(&prod) {
                    break;
                }
                let c = f.mul(h.get(i, k), &prod);
                pk = poly::sub(f, &pk, &poly::scale(f, &ps[i], &c));
            }
            ps.push(pk);
        }
        ps.pop().unwrap()
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        for r in 0..self.rows {
            let x = self.get(r, a).to_vec();
            let y = self.get(r, b).to_vec();
            self.set(r, a, &y);
            self.set(r, b, &x);
        }
    }

    /// Vectorize column-major into one column.
    pub fn vec_cols(&self) -> Vec<El> {
        let mut v = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self.get(i, j).to_vec());
            }
        }
        v
    }

    pub fn from_vec_cols(ctx: &Arc<FieldCtx>, level: usize, rows: usize, cols: usize, v: &[El]) -> MatrixF {
        let mut m = Self::zeros(ctx, level, rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.set(i, j, &v[j * rows + i]);
            }
        }
        m
    }

    /// Linear combination `sum c_k M_k`.
    pub fn combination(ms: &[MatrixF], cs: &[El]) -> MatrixF {
        let mut acc = MatrixF::zeros(&ms[0].ctx, ms[0].level, ms[0].rows, ms[0].cols);
        for (m, c) in ms.iter().zip(cs) {
            if FieldCtx::is_zero_el(c) {
                continue;
            }
            acc = acc.add(&m.scale(c));
        }
        acc
    }

    /// Text form: `rows cols` header then one row per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| crate::field::text::format_element(&self.ctx, self.level, self.get(i, j)))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for MatrixF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// Incrementally maintained echelon basis for independence tests.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    ctx: Arc<FieldCtx>,
    level: usize,
    rows: Vec<(usize, Vec<El>)>,
}

impl EchelonBasis {
    pub fn new(ctx: &Arc<FieldCtx>, level: usize) -> Self {
        EchelonBasis {
            ctx: ctx.clone(),
            level,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reduce `v` against the stored vectors.
    pub fn reduce(&self, v: &[El]) -> Vec<El> {
        let f = self.ctx.fq(self.level);
        let mut v = v.to_vec();
        for (piv, r) in &self.rows {
            let c = v[*piv].clone();
            if f.is_zero(&c) {
                continue;
            }
            for (x, y) in v.iter_mut().zip(r) {
                if !f.is_zero(y) {
                    *x = f.sub(x, &f.mul(&c, y));
                }
            }
        }
        v
    }

    pub fn contains(&self, v: &[El]) -> bool {
        self.reduce(v).iter().all(|x| FieldCtx::is_zero_el(x))
    }

    /// Insert `v`; returns false if it was dependent.
    pub fn insert(&mut self, v: &[El]) -> bool {
        let f = self.ctx.fq(self.level);
        let mut r = self.reduce(v);
        let Some(piv) = r.iter().position(|x| !f.is_zero(x)) else {
            return false;
        };
        let inv = f.inv(&r[piv]);
        for x in r.iter_mut() {
            *x = f.mul(x, &inv);
        }
        // keep stored rows reduced at the new pivot
        for (_, row) in self.rows.iter_mut() {
            let c = row[piv].clone();
            if !f.is_zero(&c) {
                for (x, y) in row.iter_mut().zip(&r) {
                    *x = f.sub(x, &f.mul(&c, y));
                }
            }
        }
        self.rows.push((piv, r));
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spec_eliminate_examples() {
        let k5 = FieldCtx::prime(5).unwrap();
        assert_eq!(MatrixF::identity(&k5, 0, 3).det(), vec![1]);
        let m = MatrixF::from_i64(&k5, &[vec![1, 1], vec![2, 2]]);
        let k = m.kernel();
        assert_eq!(k, vec![vec![vec![4], vec![1]]]);
        let k2 = FieldCtx::prime(2).unwrap();
        assert_eq!(MatrixF::from_i64(&k2, &[vec![0, 1], vec![1, 0]]).det(), vec![1]);
        assert_eq!(m.inverse(), Err(Error::SingularMatrix));
    }

    #[test]
    fn spec_charpoly_examples() {
        let k7 = FieldCtx::prime(7).unwrap();
        let d = MatrixF::from_i64(&k7, &[vec![2, 0], vec![0, 3]]);
        assert_eq!(d.charpoly(), UniPoly::from_i64(&k7, 0, &[6, 2, 1]));
        let k3 = FieldCtx::prime(3).unwrap();
        let j = MatrixF::from_i64(&k3, &[vec![1, 1], vec![0, 1]]);
        assert_eq!(j.charpoly(), UniPoly::from_i64(&k3, 0, &[1, -2, 1]));
        let k2 = FieldCtx::prime(2).unwrap();
        let p = UniPoly::from_i64(&k2, 0, &[1, 1, 0, 1]);
        let c = MatrixF::companion(&k2, 0, &p.coeffs);
        assert_eq!(c.charpoly(), p);
    }

    #[test]
    fn inverse_solve_and_cayley_hamilton_over_extension() {
        let k = crate::field::prime_extension(3, &[1, 0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..6 {
            let m = MatrixF::random_invertible(&k, 1, n, &mut rng);
            let inv = m.inverse().unwrap();
            assert!(m.mul(&inv).is_identity());
            let cp = m.charpoly();
            assert!(m.eval_poly(&cp.coeffs).is_zero());
            let det = m.det();
            let c0 = &cp.coeffs[0];
            let sign = if n % 2 == 1 { k.neg(&det) } else { det };
            assert_eq!(&sign, c0);
            let b = MatrixF::random(&k, 1, n, 2, &mut rng);
            let (x, ker) = m.solve(&b).unwrap();
            assert!(ker.is_empty());
            assert_eq!(m.mul(&x), b);
        }
    }

    #[test]
    fn rank_plus_nullity() {
        let k = FieldCtx::prime(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = MatrixF::random(&k, 0, 4, 2, &mut rng);
            let b = MatrixF::random(&k, 0, 2, 5, &mut rng);
            let m = a.mul(&b);
            let ker = m.kernel();
            assert_eq!(m.rank() + ker.len(), 5);
            for v in ker {
                assert!(m.mul_vec(&v).iter().all(|x| x[0] == 0));
            }
        }
    }

    #[test]
    fn large_prime_products() {
        let k = FieldCtx::prime(4611686018427387847).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = MatrixF::random_invertible(&k, 0, 4, &mut rng);
        assert!(m.mul(&m.inverse().unwrap()).is_identity());
    }
}

//! Text formats for instances, matrices and solutions.
//!
//! Instance file:
//!
//! ```text
//! # comment
//! field p=7
//! n 2
//! f
//! 1 2
//! 0 3
//! linear 1 0      (optional, after the matrix of the form it belongs to)
//! constant 4      (optional)
//! f
//! ...
//! g
//! ...
//! ```
//!
//! Each `f`/`g` block is an `n × n` matrix `U` of the form `xᵀUx`; entries
//! below the diagonal are folded onto it.  Extension elements are written
//! as coefficient tuples such as `(1,2)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::text::{format_element, format_field_spec, parse_element, parse_field_spec, split_top};
use crate::field::{El, FieldCtx};
use crate::ip1s::{SolutionMode, SolutionRepr};
use crate::matrix::MatrixF;
use crate::quadform::QuadSystem;

fn perr(m: impl Into<String>) -> Error {
    Error::Parse(m.into())
}

fn content_lines(text: &str) -> Vec<&str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect()
}

fn parse_row(ctx: &FieldCtx, l: usize, line: &str, n: usize) -> Result<Vec<El>> {
    let parts = split_top(line, None);
    if parts.len() != n {
        return Err(perr(format!("expected {n} entries in '{line}'")));
    }
    parts.iter().map(|p| parse_element(ctx, l, p)).collect()
}

fn format_row(ctx: &FieldCtx, l: usize, row: &[El]) -> String {
    row.iter().map(|c| format_element(ctx, l, c)).collect::<Vec<_>>().join(" ")
}

#[derive(Default)]
struct FormBlock {
    rows: Vec<Vec<El>>,
    linear: Option<Vec<El>>,
    constant: Option<El>,
}

fn build_system(ctx: &Arc<FieldCtx>, l: usize, n: usize, blocks: Vec<FormBlock>) -> QuadSystem {
    let affine = blocks.iter().any(|b| b.linear.is_some() || b.constant.is_some());
    let mats = blocks.iter().map(|b| MatrixF::from_rows(ctx, l, &b.rows)).collect();
    let sys = QuadSystem::new(ctx, l, n, mats);
    if !affine {
        return sys;
    }
    let linear = blocks
        .iter()
        .map(|b| b.linear.clone().unwrap_or_else(|| vec![ctx.zero(l); n]))
        .collect();
    let constants = blocks.iter().map(|b| b.constant.clone().unwrap_or_else(|| ctx.zero(l))).collect();
    sys.with_affine(linear, constants)
}

/// Parse an instance file into `(f, g)`.
pub fn parse_instance(text: &str) -> Result<(QuadSystem, QuadSystem)> {
    let lines = content_lines(text);
    let mut it = lines.into_iter().peekable();
    let field = it
        .next()
        .and_then(|l| l.strip_prefix("field"))
        .ok_or_else(|| perr("first line must be 'field <spec>'"))?;
    let ctx = parse_field_spec(field.trim())?;
    let l = ctx.top();
    let n: usize = it
        .next()
        .and_then(|s| s.strip_prefix('n'))
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| perr("second line must be 'n <count>'"))?;
    let mut sides: [Vec<FormBlock>; 2] = [Vec::new(), Vec::new()];
    while let Some(line) = it.next() {
        let side = match line {
            "f" => 0,
            "g" => 1,
            other => return Err(perr(format!("expected 'f' or 'g', found '{other}'"))),
        };
        let mut block = FormBlock::default();
        for _ in 0..n {
            let row = it.next().ok_or_else(|| perr("truncated matrix"))?;
            block.rows.push(parse_row(&ctx, l, row, n)?);
        }
        while let Some(&next) = it.peek() {
            if let Some(rest) = next.strip_prefix("linear") {
                block.linear = Some(parse_row(&ctx, l, rest, n)?);
            } else if let Some(rest) = next.strip_prefix("constant") {
                block.constant = Some(parse_element(&ctx, l, rest.trim())?);
            } else {
                break;
            }
            it.next();
        }
        sides[side].push(block);
    }
    let [fb, gb] = sides;
    if fb.is_empty() {
        return Err(perr("instance has no forms"));
    }
    Ok((build_system(&ctx, l, n, fb), build_system(&ctx, l, n, gb)))
}

fn write_side(out: &mut String, tag: &str, sys: &QuadSystem) {
    let (ctx, l) = (&sys.ctx, sys.level);
    for (i, m) in sys.mats.iter().enumerate() {
        out.push_str(tag);
        out.push('\n');
        for r in 0..sys.n {
            out.push_str(&format_row(ctx, l, &m.row(r)));
            out.push('\n');
        }
        if let Some(lin) = &sys.linear {
            out.push_str(&format!("linear {}\n", format_row(ctx, l, &lin[i])));
        }
        if let Some(c) = &sys.constants {
            out.push_str(&format!("constant {}\n", format_element(ctx, l, &c[i])));
        }
    }
}

pub fn write_instance(f: &QuadSystem, g: &QuadSystem) -> String {
    let mut out = format!("field {}\nn {}\n", format_field_spec(&f.ctx), f.n);
    write_side(&mut out, "f", f);
    write_side(&mut out, "g", g);
    out
}

/// Field line followed by the rows of a square matrix.
pub fn parse_matrix_file(text: &str) -> Result<MatrixF> {
    let lines = content_lines(text);
    let (first, rows) = lines.split_first().ok_or_else(|| perr("empty matrix file"))?;
    let spec = first.strip_prefix("field").unwrap_or(first).trim();
    let ctx = parse_field_spec(spec)?;
    let l = ctx.top();
    let n = rows.len();
    let parsed = rows.iter().map(|r| parse_row(&ctx, l, r, n)).collect::<Result<Vec<_>>>()?;
    if n == 0 {
        return Err(perr("matrix has no rows"));
    }
    Ok(MatrixF::from_rows(&ctx, l, &parsed))
}

pub fn write_matrix_file(m: &MatrixF) -> String {
    let mut out = format!("field {}\n", format_field_spec(m.ctx()));
    for r in 0..m.rows() {
        out.push_str(&format_row(m.ctx(), m.level(), &m.row(r)));
        out.push('\n');
    }
    out
}

fn write_rows(out: &mut String, m: &MatrixF) {
    for r in 0..m.rows() {
        out.push_str(&format_row(m.ctx(), m.level(), &m.row(r)));
        out.push('\n');
    }
}

/// Human-readable solution: the matrix (or the pair `S`, `T` with
/// `f(Sx) = g(Tx)`), the translation, and the tower used.
pub fn format_solution(sol: &SolutionRepr) -> String {
    let mut out = String::new();
    match &sol.mode {
        SolutionMode::Assembled(a) => {
            if a.level() > 0 {
                out.push_str(&format!("field {}\n", format_field_spec(a.ctx())));
            }
            out.push_str("A\n");
            write_rows(&mut out, a);
        }
        SolutionMode::Factored { s, t } => {
            out.push_str(&format!("field {}\n", format_field_spec(s.ctx())));
            out.push_str("# f(Sx) = g(Tx); the solution is S T^-1\nS\n");
            write_rows(&mut out, s);
            out.push_str("T\n");
            write_rows(&mut out, t);
        }
    }
    if let Some(b) = &sol.translation {
        let ctx = match &sol.mode {
            SolutionMode::Assembled(a) => a.ctx().clone(),
            SolutionMode::Factored { s, .. } => s.ctx().clone(),
        };
        let len = b.first().map_or(1, |c| c.len());
        let lev = (0..=ctx.top()).find(|&l| ctx.size(l) == len).unwrap_or(ctx.top());
        out.push_str(&format!("b {}\n", format_row(&ctx, lev, b)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_roundtrip() {
        let k = crate::field::prime_extension(3, &[1, 0, 1]).unwrap();
        let text = "# two forms\nfield p=3; ext=[1,0,1]\nn 2\nf\n1 (1,2)\n0 2\nf\n0 1\n0 0\ng\n1 0\n1 1\ng\n2 0\n0 0\n";
        let (f, g) = parse_instance(text).unwrap();
        assert_eq!(f.m(), 2);
        assert!(f.ctx.is_prefix_of(&k) && k.is_prefix_of(&f.ctx));
        // below-diagonal entries fold up
        assert_eq!(g.mats[0].get(0, 1), &k.from_u64(1, 1)[..]);
        let (f2, g2) = parse_instance(&write_instance(&f, &g)).unwrap();
        assert!(f2.same_polys(&f) && g2.same_polys(&g));
    }

    #[test]
    fn affine_roundtrip() {
        let text = "field p=7\nn 2\nf\n1 0\n0 1\nlinear 1 2\nconstant 3\ng\n1 0\n0 1\n";
        let (f, g) = parse_instance(text).unwrap();
        assert!(!f.is_homogeneous() && g.is_homogeneous());
        let (f2, _) = parse_instance(&write_instance(&f, &g)).unwrap();
        assert!(f2.same_polys(&f));
    }

    #[test]
    fn malformed() {
        assert!(parse_instance("field p=7\nn 2\nf\n1 0\n").is_err());
        assert!(parse_instance("field p=7\nn 2\nh\n").is_err());
        assert!(parse_instance("n 2\n").is_err());
        assert!(parse_matrix_file("field p=7\n1 2\n3\n").is_err());
        let m = parse_matrix_file("field p=7\n1 2\n3 4\n").unwrap();
        assert_eq!(parse_matrix_file(&write_matrix_file(&m)).unwrap(), m);
    }
}

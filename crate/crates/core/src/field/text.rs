//! Text forms of field specifications and elements.
//!
//! A field is written `p=7` or `p=3; ext=[1,0,1],[(2,2),0,1]`: one minimal
//! polynomial per level, coefficients low to high, each coefficient an
//! element of the level below.  Elements are integers (prime-field values)
//! or parenthesized coefficient tuples over the level below.

use std::sync::Arc;

use super::{El, FieldCtx};
use crate::error::{Error, Result};

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Split `s` on `sep` (or whitespace when `sep` is `None`) at bracket depth 0.
pub fn split_top(s: &str, sep: Option<char>) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | '[' => {
                depth += 1;
                cur.push(ch);
            }
            ')' | ']' => {
                depth -= 1;
                cur.push(ch);
            }
            c if depth == 0 && (Some(c) == sep || (sep.is_none() && c.is_whitespace())) => {
                if !cur.trim().is_empty() || sep.is_some() {
                    out.push(cur.trim().to_string());
                }
                cur.clear();
            }
            c => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn parse_int(s: &str, p: u64) -> Result<u64> {
    let v: i128 = s
        .trim()
        .parse()
        .map_err(|_| perr(format!("bad integer '{s}'")))?;
    Ok(v.rem_euclid(p as i128) as u64)
}

/// Parse an element of level `l`.
pub fn parse_element(ctx: &FieldCtx, l: usize, s: &str) -> Result<El> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('(') {
        let inner = inner
            .strip_suffix(')')
            .ok_or_else(|| perr(format!("unbalanced element '{s}'")))?;
        if l == 0 {
            return Err(perr(format!("tuple '{s}' given for a prime-field element")));
        }
        let parts = split_top(inner, Some(','));
        let d = ctx.level(l).degree;
        if parts.len() > d {
            return Err(perr(format!("element '{s}' has more than {d} coefficients")));
        }
        let sz = ctx.size(l - 1);
        let mut out = ctx.zero(l);
        for (i, part) in parts.iter().enumerate() {
            let c = parse_element(ctx, l - 1, part)?;
            out[i * sz..(i + 1) * sz].copy_from_slice(&c);
        }
        Ok(out)
    } else {
        Ok(ctx.from_u64(l, parse_int(s, ctx.p())?))
    }
}

pub fn format_element(ctx: &FieldCtx, l: usize, a: &[u64]) -> String {
    if l == 0 || ctx.level_of(a) == 0 {
        return a[0].to_string();
    }
    let sz = ctx.size(l - 1);
    let parts: Vec<String> = a
        .chunks(sz)
        .map(|c| format_element(ctx, l - 1, c))
        .collect();
    format!("({})", parts.join(","))
}

/// Parse a field specification line.
pub fn parse_field_spec(s: &str) -> Result<Arc<FieldCtx>> {
    let mut p = None;
    let mut ext = None;
    for part in split_top(s, Some(';')) {
        if part.is_empty() {
            continue;
        }
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| perr(format!("expected key=value in '{part}'")))?;
        match k.trim() {
            "p" => p = Some(v.trim().parse::<u64>().map_err(|_| perr(format!("bad prime '{v}'")))?),
            "ext" => ext = Some(v.trim().to_string()),
            other => return Err(perr(format!("unknown field key '{other}'"))),
        }
    }
    let p = p.ok_or_else(|| perr("missing p="))?;
    let mut ctx = FieldCtx::prime(p)?;
    if let Some(ext) = ext {
        for (i, list) in split_top(&ext, Some(',')).iter().enumerate() {
            let body = list
                .strip_prefix('[')
                .and_then(|b| b.strip_suffix(']'))
                .ok_or_else(|| perr(format!("extension polynomial '{list}' must be in brackets")))?;
            let top = ctx.top();
            let coeffs = split_top(body, Some(','))
                .iter()
                .map(|c| parse_element(&ctx, top, c))
                .collect::<Result<Vec<El>>>()?;
            ctx = ctx.extend(&format!("a{}", i + 1), &coeffs)?;
        }
    }
    Ok(ctx)
}

pub fn format_field_spec(ctx: &FieldCtx) -> String {
    if ctx.depth() == 0 {
        return format!("p={}", ctx.p());
    }
    let lists: Vec<String> = ctx
        .levels()
        .iter()
        .enumerate()
        .map(|(i, lev)| {
            let cs: Vec<String> = lev.minpoly.iter().map(|c| format_element(ctx, i, c)).collect();
            format!("[{}]", cs.join(","))
        })
        .collect();
    format!("p={}; ext={}", ctx.p(), lists.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_spec() {
        let s = "p=3; ext=[1,0,1],[(2,2),0,1]";
        let ctx = parse_field_spec(s).unwrap();
        assert_eq!(ctx.depth(), 2);
        assert_eq!(format_field_spec(&ctx), s);
        let e = parse_element(&ctx, 2, "((1,2),1)").unwrap();
        assert_eq!(e, vec![1, 2, 1, 0]);
        assert_eq!(format_element(&ctx, 2, &e), "((1,2),1)");
        assert_eq!(format_element(&ctx, 2, &[2, 0, 0, 0]), "2");
    }

    #[test]
    fn bad_specs() {
        assert!(parse_field_spec("p=4").is_err());
        assert!(parse_field_spec("q=5").is_err());
        assert_eq!(parse_field_spec("p=5; ext=[4,0,1]").err(), Some(Error::ReduciblePolynomial));
    }
}

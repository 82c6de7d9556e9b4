//! Minimal s-expression reader shared by the expression and pattern parsers.

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SExp<'a> {
    Atom(&'a str, usize),
    List(Vec<SExp<'a>>, usize),
}

fn lex(src: &str) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in src.char_indices() {
        if ch == '(' || ch == ')' || ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((&src[s..i], s));
            }
            if !ch.is_whitespace() {
                out.push((&src[i..i + 1], i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((&src[s..], s));
    }
    out
}

/// Reads exactly one s-expression; anything after it is an error.
pub(crate) fn read(src: &str) -> Result<SExp<'_>, ParseError> {
    let toks = lex(src);
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut pos = 0;
    let e = read_one(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(ParseError::TrailingTokens { position: pos });
    }
    Ok(e)
}

fn read_one<'a>(toks: &[(&'a str, usize)], pos: &mut usize) -> Result<SExp<'a>, ParseError> {
    let Some(&(tok, off)) = toks.get(*pos) else {
        return Err(ParseError::UnbalancedParens);
    };
    *pos += 1;
    match tok {
        "(" => {
            let mut items = Vec::new();
            loop {
                match toks.get(*pos) {
                    None => return Err(ParseError::UnbalancedParens),
                    Some(&(")", _)) => {
                        *pos += 1;
                        return Ok(SExp::List(items, off));
                    }
                    Some(_) => items.push(read_one(toks, pos)?),
                }
            }
        }
        ")" => Err(ParseError::UnbalancedParens),
        atom => Ok(SExp::Atom(atom, off)),
    }
}

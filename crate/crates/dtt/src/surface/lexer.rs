use super::{Diagnostic, Span};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(String),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

pub const KEYWORDS: &[&str] = &[
    "fun", "let", "in", "refl", "Der", "J", "D", "Pi", "fst", "snd", "def", "const", "dconst", "type", "pred", "rules",
    "calculus", "numerals", "equation",
];

const SYMBOLS: &[&str] = &[":=", "=>", "->", "-o", "**", "(", ")", "[", "]", ",", ".", ":", "*", "!", "="];

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    'outer: while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
            }
            continue;
        }
        let span = Span { line, col };
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
            }
            let s: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == s) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(s),
            };
            out.push(Token { tok, span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
            }
            if i + 1 < chars.len() && (chars[i] == '.' || chars[i] == '/') && chars[i + 1].is_ascii_digit() {
                { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
                }
            }
            out.push(Token { tok: Tok::Num(chars[start..i].iter().collect()), span });
            continue;
        }
        for s in SYMBOLS {
            let n = s.chars().count();
            if i + n <= chars.len() && chars[i..i + n].iter().copied().eq(s.chars()) {
                for _ in 0..n {
                    { let ch = chars[i]; advance(&mut i, &mut line, &mut col, ch); }
                }
                out.push(Token { tok: Tok::Sym(s), span });
                continue 'outer;
            }
        }
        return Err(Diagnostic::error(span, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_mixed_input() {
        let toks = lex("def d := fun x => refl x -- comment\n!1/2 (A -o A) ** B").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(kinds[0], Tok::Kw("def"));
        assert!(kinds.contains(&Tok::Num("1/2".into())));
        assert!(kinds.contains(&Tok::Sym("-o")));
        assert!(kinds.contains(&Tok::Sym("**")));
        assert_eq!(*kinds.last().unwrap(), Tok::Eof);
    }

    #[test]
    fn reports_position() {
        let e = lex("def x := \n  ?").unwrap_err();
        assert_eq!(e.span, Span { line: 2, col: 3 });
    }
}

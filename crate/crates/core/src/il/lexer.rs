use std::fmt;

use super::IlError;

/// Source position (1-based line and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Literal value and optional `(signed, width)` suffix.
    Int(u64, Option<(bool, u32)>),
    True,
    False,
    Old,
    If,
    Then,
    Else,
    Havoc,
    In,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Dot,
    DotDot,
    Semi,
    Assign,
    AndAnd,
    OrOr,
    Implies,
    EqEq,
    NotEq,
    Bang,
    /// `<`, `<=`, `>`, `>=` with optional explicit signedness.
    Cmp(CmpTok, Option<super::Sign>),
    Plus,
    Minus,
    Star,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpTok {
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(v, _) => write!(f, "integer `{v}`"),
            Tok::Eof => write!(f, "end of input"),
            other => write!(f, "`{other:?}`"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, IlError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! bump {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let loc = Loc { line, col };
        if c.is_whitespace() {
            bump!(1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!(1);
            }
            continue;
        }
        let peek = |k: usize| chars.get(i + k).copied();
        let (tok, len) = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let word: String = chars[start..j].iter().collect();
            let tok = match word.as_str() {
                "true" => Tok::True,
                "false" => Tok::False,
                "old" => Tok::Old,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "havoc" => Tok::Havoc,
                "in" => Tok::In,
                _ => Tok::Ident(word),
            };
            (tok, j - start)
        } else if c.is_ascii_digit() {
            lex_int(&chars, i, loc)?
        } else {
            match (c, peek(1), peek(2)) {
                ('=', Some('='), Some('>')) => (Tok::Implies, 3),
                ('=', Some('='), _) => (Tok::EqEq, 2),
                ('!', Some('='), _) => (Tok::NotEq, 2),
                ('&', Some('&'), _) => (Tok::AndAnd, 2),
                ('|', Some('|'), _) => (Tok::OrOr, 2),
                (':', Some('='), _) => (Tok::Assign, 2),
                ('.', Some('.'), _) => (Tok::DotDot, 2),
                ('<' | '>', _, _) => {
                    let (kind, mut len) = match (c, peek(1)) {
                        ('<', Some('=')) => (CmpTok::Le, 2),
                        ('>', Some('=')) => (CmpTok::Ge, 2),
                        ('<', _) => (CmpTok::Lt, 1),
                        _ => (CmpTok::Gt, 1),
                    };
                    let sign = match (peek(len), peek(len + 1)) {
                        (Some('u'), next) if !next.is_some_and(is_ident_char) => {
                            Some(super::Sign::Unsigned)
                        }
                        (Some('s'), next) if !next.is_some_and(is_ident_char) => {
                            Some(super::Sign::Signed)
                        }
                        _ => None,
                    };
                    if sign.is_some() {
                        len += 1;
                    }
                    (Tok::Cmp(kind, sign), len)
                }
                ('!', _, _) => (Tok::Bang, 1),
                ('(', _, _) => (Tok::LParen, 1),
                (')', _, _) => (Tok::RParen, 1),
                ('{', _, _) => (Tok::LBrace, 1),
                ('}', _, _) => (Tok::RBrace, 1),
                ('[', _, _) => (Tok::LBracket, 1),
                (']', _, _) => (Tok::RBracket, 1),
                ('.', _, _) => (Tok::Dot, 1),
                (';', _, _) => (Tok::Semi, 1),
                ('+', _, _) => (Tok::Plus, 1),
                ('-', _, _) => (Tok::Minus, 1),
                ('*', _, _) => (Tok::Star, 1),
                _ => {
                    return Err(IlError::Syntax {
                        loc,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            }
        };
        out.push(Token { tok, loc });
        bump!(len);
    }
    out.push(Token {
        tok: Tok::Eof,
        loc: Loc { line, col },
    });
    Ok(out)
}

fn lex_int(chars: &[char], start: usize, loc: Loc) -> Result<(Tok, usize), IlError> {
    let mut j = start;
    let hex = chars[j] == '0' && matches!(chars.get(j + 1), Some('x') | Some('X'));
    if hex {
        j += 2;
    }
    let s = j;
    while j < chars.len() && (chars[j].is_ascii_digit() || hex && chars[j].is_ascii_hexdigit()) {
        j += 1;
    }
    let digits: String = chars[s..j].iter().collect();
    let value =
        u64::from_str_radix(&digits, if hex { 16 } else { 10 }).map_err(|_| IlError::Syntax {
            loc,
            message: format!("integer literal `{digits}` out of range"),
        })?;
    let mut suffix = None;
    if matches!(chars.get(j), Some('u') | Some('i')) {
        let signed = chars[j] == 'i';
        let s = j + 1;
        let mut k = s;
        while k < chars.len() && chars[k].is_ascii_digit() {
            k += 1;
        }
        if k > s && !chars.get(k).copied().is_some_and(is_ident_char) {
            let w: u32 = chars[s..k].iter().collect::<String>().parse().unwrap_or(0);
            if w == 0 || w > super::types::MAX_WIDTH {
                return Err(IlError::Syntax {
                    loc,
                    message: format!("bad literal width {w}"),
                });
            }
            suffix = Some((signed, w));
            j = k;
        }
    }
    if chars.get(j).copied().is_some_and(is_ident_char) {
        return Err(IlError::Syntax {
            loc,
            message: "malformed integer literal".into(),
        });
    }
    Ok((Tok::Int(value, suffix), j - start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::il::Sign;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn signed_comparators() {
        assert_eq!(
            toks("a <u 3"),
            vec![
                Tok::Ident("a".into()),
                Tok::Cmp(CmpTok::Lt, Some(Sign::Unsigned)),
                Tok::Int(3, None),
                Tok::Eof
            ]
        );
        assert_eq!(toks(">=s")[0], Tok::Cmp(CmpTok::Ge, Some(Sign::Signed)));
        // `<` followed by an identifier starting with `u` stays a plain comparator.
        assert_eq!(toks("a<up")[1], Tok::Cmp(CmpTok::Lt, None));
    }

    #[test]
    fn literal_suffixes() {
        assert_eq!(toks("255u8")[0], Tok::Int(255, Some((false, 8))));
        assert_eq!(toks("0x1fi16")[0], Tok::Int(0x1f, Some((true, 16))));
        assert!(tokenize("3u99").is_err());
        assert!(tokenize("3abc").is_err());
    }

    #[test]
    fn implies_and_eq() {
        assert_eq!(
            toks("==> == :=")[..3],
            [Tok::Implies, Tok::EqEq, Tok::Assign]
        );
    }
}

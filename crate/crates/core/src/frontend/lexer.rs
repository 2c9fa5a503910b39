use crate::datamodel::Date;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Identifier or keyword, upper-cased.
    Word(String),
    Int(i64),
    Float(f64),
    Date(Date),
    Str(String),
    Param,
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Semi,
    Minus,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: usize,
}

fn syntax(pos: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        pos,
        message: message.into(),
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let tok = match c {
            b',' => Tok::Comma,
            b'.' => Tok::Dot,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'*' => Tok::Star,
            b';' => Tok::Semi,
            b'?' => Tok::Param,
            b'-' => Tok::Minus,
            b'=' => Tok::Eq,
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 1;
                Tok::Ne
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    Tok::Le
                }
                Some(b'>') => {
                    i += 1;
                    Tok::Ne
                }
                _ => Tok::Lt,
            },
            b'>' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    Tok::Ge
                }
                _ => Tok::Gt,
            },
            b'\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match text[i..].chars().next() {
                        None => return Err(syntax(start, "unterminated string literal")),
                        Some('\'') if bytes.get(i + 1) == Some(&b'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => break,
                        Some(ch) => {
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                Tok::Str(s)
            }
            b'0'..=b'9' => {
                let (tok, end) = number(text, i)?;
                out.push(Token { tok, pos: start });
                i = end;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Word(text[start..i].to_ascii_uppercase()),
                    pos: start,
                });
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character '{ch}'")));
            }
        };
        out.push(Token { tok, pos: start });
        i += 1;
    }
    Ok(out)
}

fn digits(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    i
}

/// Integer, float (`1.5`, `2e10`) or dotted date (`1980.01.01`).
fn number(text: &str, start: usize) -> Result<(Tok, usize)> {
    let bytes = text.as_bytes();
    let mut i = digits(bytes, start);
    let mut float = false;
    if bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        let frac_end = digits(bytes, i + 1);
        if bytes.get(frac_end) == Some(&b'.') && bytes.get(frac_end + 1).is_some_and(u8::is_ascii_digit) {
            let end = digits(bytes, frac_end + 1);
            let lit = &text[start..end];
            let d = Date::parse(lit).ok_or_else(|| syntax(start, format!("invalid date {lit}")))?;
            return Ok((Tok::Date(d), end));
        }
        i = frac_end;
        float = true;
    }
    if matches!(bytes.get(i), Some(b'e') | Some(b'E')) {
        let mut j = i + 1;
        if matches!(bytes.get(j), Some(b'+') | Some(b'-')) {
            j += 1;
        }
        if bytes.get(j).is_some_and(u8::is_ascii_digit) {
            i = digits(bytes, j);
            float = true;
        }
    }
    let lit = &text[start..i];
    let tok = if float {
        Tok::Float(lit.parse().map_err(|_| syntax(start, format!("invalid number {lit}")))?)
    } else {
        Tok::Int(lit.parse().map_err(|_| syntax(start, format!("integer {lit} out of range")))?)
    };
    Ok((tok, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn words_are_upper_cased() {
        assert_eq!(toks("select u.Name"), vec![
            Tok::Word("SELECT".into()),
            Tok::Word("U".into()),
            Tok::Dot,
            Tok::Word("NAME".into()),
        ]);
    }

    #[test]
    fn numbers_and_dates() {
        assert_eq!(toks("42 1.5 2e3 1980.01.01"), vec![
            Tok::Int(42),
            Tok::Float(1.5),
            Tok::Float(2000.0),
            Tok::Date(Date::parse("1980-01-01").unwrap()),
        ]);
        assert!(tokenize("1980.13.01").is_err());
    }

    #[test]
    fn strings_and_operators() {
        assert_eq!(toks("'it''s' <> != <= >= < > = ?"), vec![
            Tok::Str("it's".into()),
            Tok::Ne,
            Tok::Ne,
            Tok::Le,
            Tok::Ge,
            Tok::Lt,
            Tok::Gt,
            Tok::Eq,
            Tok::Param,
        ]);
    }

    #[test]
    fn errors_carry_position() {
        match tokenize("SELECT #").unwrap_err() {
            Error::Syntax { pos, .. } => assert_eq!(pos, 7),
            e => panic!("{e:?}"),
        }
        assert!(matches!(tokenize("'abc"), Err(Error::Syntax { pos: 0, .. })));
    }
}

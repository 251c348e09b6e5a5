//! Tokenizer shared by both dialects. Tokens carry their 1-based index and
//! byte offset so parse errors can point at the offending token.

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Bare identifier; keywords are classified by the parser.
    Ident(String),
    Num(f64),
    Str(String),
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Colon,
    Star,
    Minus,
    Arrow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Num(n) => n.to_string(),
            TokenKind::Str(s) => format!("'{s}'"),
            TokenKind::Comma => ",".into(),
            TokenKind::LParen => "(".into(),
            TokenKind::RParen => ")".into(),
            TokenKind::LBracket => "[".into(),
            TokenKind::RBracket => "]".into(),
            TokenKind::Dot => ".".into(),
            TokenKind::Colon => ":".into(),
            TokenKind::Star => "*".into(),
            TokenKind::Minus => "-".into(),
            TokenKind::Arrow => "->".into(),
            TokenKind::Eq => "=".into(),
            TokenKind::Ne => "!=".into(),
            TokenKind::Lt => "<".into(),
            TokenKind::Le => "<=".into(),
            TokenKind::Gt => ">".into(),
            TokenKind::Ge => ">=".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// 1-based token index.
    pub index: usize,
    /// Byte offset in the query text.
    pub offset: usize,
}

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let index = tokens.len() + 1;
        let kind = match c {
            ',' => {
                i += 1;
                TokenKind::Comma
            }
            '(' => {
                i += 1;
                TokenKind::LParen
            }
            ')' => {
                i += 1;
                TokenKind::RParen
            }
            '[' => {
                i += 1;
                TokenKind::LBracket
            }
            ']' => {
                i += 1;
                TokenKind::RBracket
            }
            '.' => {
                i += 1;
                TokenKind::Dot
            }
            ':' => {
                i += 1;
                TokenKind::Colon
            }
            '*' => {
                i += 1;
                TokenKind::Star
            }
            '=' => {
                i += 1;
                TokenKind::Eq
            }
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    i += 2;
                    TokenKind::Arrow
                } else {
                    i += 1;
                    TokenKind::Minus
                }
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    TokenKind::Ne
                } else {
                    return Err(ParseError::at_offset(index, start, "!", &["!="]));
                }
            }
            '<' => match bytes.get(i + 1) {
                Some(&b'=') => {
                    i += 2;
                    TokenKind::Le
                }
                Some(&b'>') => {
                    i += 2;
                    TokenKind::Ne
                }
                _ => {
                    i += 1;
                    TokenKind::Lt
                }
            },
            '>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    TokenKind::Ge
                } else {
                    i += 1;
                    TokenKind::Gt
                }
            }
            '\'' | '"' => {
                let quote = c;
                let mut value = String::new();
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => {
                            return Err(ParseError::at_offset(
                                index,
                                start,
                                "unterminated string",
                                &["closing quote"],
                            ));
                        }
                        Some(&b) if b as char == quote => {
                            // Doubled quote is an escaped quote.
                            if bytes.get(i + 1) == Some(&(quote as u8)) {
                                value.push(quote);
                                i += 2;
                            } else {
                                i += 1;
                                break;
                            }
                        }
                        Some(&b) => {
                            value.push(b as char);
                            i += 1;
                        }
                    }
                }
                TokenKind::Str(value)
            }
            c if c.is_ascii_digit() => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                let raw = &text[start..i];
                let n: f64 = raw
                    .parse()
                    .map_err(|_| ParseError::at_offset(index, start, raw, &["a number"]))?;
                TokenKind::Num(n)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                TokenKind::Ident(text[start..i].to_string())
            }
            other => {
                return Err(ParseError::at_offset(
                    index,
                    start,
                    &other.to_string(),
                    &["a token"],
                ));
            }
        };
        tokens.push(Token {
            kind,
            index,
            offset: start,
        });
    }
    Ok(tokens)
}

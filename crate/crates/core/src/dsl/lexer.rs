use super::{ParseError, SourceSpan};
use crate::rule::Comparator;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(super) enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Dot,
    At,
    Colon,
    Cmp(Comparator),
    Eof,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => match super::keyword(s) {
                Some(k) => k.to_owned(),
                None => format!("identifier `{s}`"),
            },
            Tok::Int(i) => format!("integer {i}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Dot => "`.`".into(),
            Tok::At => "`@`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Cmp(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(super) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

fn lex_error(line: usize, column: usize, length: usize, expected: &[&str], found: String) -> ParseError {
    ParseError {
        span: SourceSpan {
            line,
            column,
            length: length.max(1),
        },
        expected: expected.iter().map(|s| (*s).to_owned()).collect(),
        found,
    }
}

/// Splits `src` into tokens. The final token is always [`Tok::Eof`],
/// positioned just past the last character.
pub(super) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        chars: src.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        while cur.peek().is_some_and(char::is_whitespace) {
            cur.bump();
        }
        if cur.peek() == Some('#') {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        let (line, column) = (cur.line, cur.column);
        let Some(c) = cur.bump() else {
            out.push(Token {
                tok: Tok::Eof,
                span: SourceSpan { line, column, length: 1 },
            });
            return Ok(out);
        };
        let tok = match c {
            '.' => Tok::Dot,
            '@' => Tok::At,
            ':' => Tok::Colon,
            '=' => Tok::Cmp(Comparator::Eq),
            '!' => {
                if cur.peek() == Some('=') {
                    cur.bump();
                    Tok::Cmp(Comparator::Ne)
                } else {
                    return Err(lex_error(line, column, 1, &["`!=`"], "`!`".into()));
                }
            }
            '<' | '>' => {
                let with_eq = cur.peek() == Some('=');
                if with_eq {
                    cur.bump();
                }
                Tok::Cmp(match (c, with_eq) {
                    ('<', false) => Comparator::Lt,
                    ('<', true) => Comparator::Le,
                    ('>', false) => Comparator::Gt,
                    _ => Comparator::Ge,
                })
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        None | Some('\n') => {
                            return Err(lex_error(line, column, cur.column.saturating_sub(column), &["closing `\"`"], "unterminated string".into()));
                        }
                        Some('"') => break,
                        Some('\\') => match cur.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            other => {
                                let found = other.map_or("end of input".to_owned(), |c| format!("`\\{c}`"));
                                return Err(lex_error(cur.line, cur.column.saturating_sub(2).max(1), 2, &["escape sequence"], found));
                            }
                        },
                        Some(other) => s.push(other),
                    }
                }
                Tok::Str(s)
            }
            '-' | '0'..='9' => {
                let mut text = String::from(c);
                while cur.peek().is_some_and(|d| d.is_ascii_digit()) {
                    text.push(cur.bump().unwrap());
                }
                if text == "-" {
                    return Err(lex_error(line, column, 1, &["integer"], "`-`".into()));
                }
                match text.parse::<i64>() {
                    Ok(i) => Tok::Int(i),
                    Err(_) => {
                        return Err(lex_error(line, column, text.chars().count(), &["integer in 64-bit range"], format!("`{text}`")));
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::from(c);
                while cur.peek().is_some_and(|d| d.is_ascii_alphanumeric() || d == '_') {
                    text.push(cur.bump().unwrap());
                }
                Tok::Ident(text)
            }
            other => {
                return Err(lex_error(line, column, 1, &["identifier", "keyword", "literal"], format!("{other:?}")));
            }
        };
        let length = if line == cur.line {
            cur.column - column
        } else {
            1
        };
        out.push(Token {
            tok,
            span: SourceSpan { line, column, length },
        });
    }
}

//! A small s-expression reader with source positions.
//!
//! PDDL is written as nested parenthesised lists of symbols. Comments start
//! with `;` and run to the end of the line. Symbols are lowercased on read.

use std::fmt;

/// 1-based line and column of a token in the input text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Atom(..) => None,
        }
    }

    /// The head symbol of a list, if it has one.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(SExpr::as_atom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadError {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Symbol(String),
}

fn tokenize(text: &str) -> Vec<(Token, Pos)> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    let mut current: Option<(String, Pos)> = None;

    let flush = |current: &mut Option<(String, Pos)>, tokens: &mut Vec<(Token, Pos)>| {
        if let Some((sym, pos)) = current.take() {
            tokens.push((Token::Symbol(sym.to_lowercase()), pos));
        }
    };

    while let Some(c) = chars.next() {
        let pos = Pos { line, col };
        match c {
            '(' => {
                flush(&mut current, &mut tokens);
                tokens.push((Token::Open, pos));
            }
            ')' => {
                flush(&mut current, &mut tokens);
                tokens.push((Token::Close, pos));
            }
            ';' => {
                flush(&mut current, &mut tokens);
                // skip to end of line, leaving the newline for the position bookkeeping
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            c if c.is_whitespace() => flush(&mut current, &mut tokens),
            c => match current.as_mut() {
                Some((s, _)) => s.push(c),
                None => current = Some((c.to_string(), pos)),
            },
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// Reads exactly one top-level s-expression from `text`.
pub fn read(text: &str) -> Result<SExpr, ReadError> {
    let tokens = tokenize(text);
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut result: Option<SExpr> = None;

    for (token, pos) in tokens {
        if result.is_some() {
            return Err(ReadError {
                pos,
                message: "unexpected content after the top-level expression".into(),
            });
        }
        match token {
            Token::Open => stack.push((Vec::new(), pos)),
            Token::Close => {
                let (items, open) = stack.pop().ok_or_else(|| ReadError {
                    pos,
                    message: "unbalanced ')'".into(),
                })?;
                let list = SExpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => result = Some(list),
                }
            }
            Token::Symbol(s) => match stack.last_mut() {
                Some((parent, _)) => parent.push(SExpr::Atom(s, pos)),
                None => {
                    return Err(ReadError {
                        pos,
                        message: format!("expected '(' but found '{s}'"),
                    })
                }
            },
        }
    }

    if let Some((_, open)) = stack.last() {
        return Err(ReadError {
            pos: *open,
            message: "unclosed '('".into(),
        });
    }
    result.ok_or(ReadError {
        pos: Pos { line: 1, col: 1 },
        message: "empty input".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_lowercased() {
        let e = read("(Define (Domain BW))").unwrap();
        let items = e.as_list().unwrap();
        assert_eq!(items[0].as_atom(), Some("define"));
        assert_eq!(items[1].head(), Some("domain"));
        assert_eq!(items[1].as_list().unwrap()[1].as_atom(), Some("bw"));
    }

    #[test]
    fn comments_are_skipped_and_positions_tracked() {
        let e = read("; header\n  (a ; trailing\n b)").unwrap();
        assert_eq!(e.pos(), Pos { line: 2, col: 3 });
        let items = e.as_list().unwrap();
        assert_eq!(items[1].pos(), Pos { line: 3, col: 2 });
    }

    #[test]
    fn empty_input_is_error_at_origin() {
        let err = read("").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 1 });
        let err = read("   ; only a comment\n").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 1 });
    }

    #[test]
    fn unbalanced_parens() {
        let err = read("(a (b)").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 1 });
        let err = read("(a))").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 4 });
    }
}

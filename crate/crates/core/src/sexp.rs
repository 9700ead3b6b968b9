//! A minimal s-expression reader shared by the term, pattern and rules parsers.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    pub(crate) fn position(&self) -> usize {
        match self {
            Sexp::Atom(_, pos) | Sexp::List(_, pos) => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SexpError {
    #[error("unexpected end of input at byte {0}")]
    UnexpectedEof(usize),
    #[error("unexpected `)` at byte {0}")]
    UnexpectedClose(usize),
    #[error("empty list at byte {0}")]
    EmptyList(usize),
    #[error("trailing input at byte {0}")]
    Trailing(usize),
}

impl SexpError {
    pub fn position(&self) -> usize {
        match self {
            SexpError::UnexpectedEof(p)
            | SexpError::UnexpectedClose(p)
            | SexpError::EmptyList(p)
            | SexpError::Trailing(p) => *p,
        }
    }
}

fn skip_ws(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    pos
}

fn is_delim(b: u8) -> bool {
    b.is_ascii_whitespace() || b == b'(' || b == b')'
}

/// Reads one s-expression starting at `start`, returning it and the byte
/// offset just past it.
pub(crate) fn read_prefix(text: &str, start: usize) -> Result<(Sexp, usize), SexpError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<(Vec<Sexp>, usize)> = Vec::new();
    let mut pos = skip_ws(bytes, start);
    loop {
        if pos >= bytes.len() {
            return Err(SexpError::UnexpectedEof(pos));
        }
        let finished = match bytes[pos] {
            b'(' => {
                stack.push((Vec::new(), pos));
                pos += 1;
                None
            }
            b')' => {
                let (items, open) = stack.pop().ok_or(SexpError::UnexpectedClose(pos))?;
                if items.is_empty() {
                    return Err(SexpError::EmptyList(open));
                }
                pos += 1;
                Some(Sexp::List(items, open))
            }
            _ => {
                let begin = pos;
                while pos < bytes.len() && !is_delim(bytes[pos]) {
                    pos += 1;
                }
                Some(Sexp::Atom(text[begin..pos].to_owned(), begin))
            }
        };
        if let Some(sexp) = finished {
            match stack.last_mut() {
                Some((items, _)) => items.push(sexp),
                None => return Ok((sexp, pos)),
            }
        }
        pos = skip_ws(bytes, pos);
    }
}

/// Reads exactly one s-expression spanning the whole input.
pub(crate) fn read(text: &str) -> Result<Sexp, SexpError> {
    let (sexp, end) = read_prefix(text, 0)?;
    let end = skip_ws(text.as_bytes(), end);
    if end != text.len() {
        return Err(SexpError::Trailing(end));
    }
    Ok(sexp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists() {
        let s = read("(+ 1 (* a b))").unwrap();
        let Sexp::List(items, 0) = s else { panic!() };
        assert_eq!(items.len(), 3);
        assert!(matches!(&items[2], Sexp::List(inner, 5) if inner.len() == 3));
    }

    #[test]
    fn reports_positions() {
        assert_eq!(read("(a b"), Err(SexpError::UnexpectedEof(4)));
        assert_eq!(read("a )"), Err(SexpError::Trailing(2)));
        assert_eq!(read(")"), Err(SexpError::UnexpectedClose(0)));
        assert_eq!(read("( )"), Err(SexpError::EmptyList(0)));
    }

    #[test]
    fn prefix_leaves_rest() {
        let text = "(f x) if (g y)";
        let (_, end) = read_prefix(text, 0).unwrap();
        assert_eq!(&text[end..], " if (g y)");
    }
}

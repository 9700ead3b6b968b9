//! A plain-text format for rule sets.
//!
//! One rule per line:
//!
//! ```text
//! # comments and blank lines are ignored
//! add-comm: (+ ?a ?b) => (+ ?b ?a)
//! let-const: (let ?v ?e ?c) => ?c if is-const ?c
//! let-var-diff: (let ?v1 ?e (var ?v2)) => (var ?v2) if not-same-var ?v1 ?v2
//! if-elim: (if (= (var ?x) ?e) ?then ?else) => ?else if eq (let ?x ?e ?then) (let ?x ?e ?else)
//! ```

use thiserror::Error;

use crate::language::{LanguageDef, ParseError};
use crate::pattern::{Pattern, Var};
use crate::rewrite::{ConditionEqual, ConditionalApplier, IsConst, NotSameVar, Rewrite, RewriteError};
use crate::sexp::{read_prefix, Sexp};
use crate::Analysis;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RulesFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Pattern {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("line {line}: {source}")]
    Rule {
        line: usize,
        #[source]
        source: RewriteError,
    },
}

enum Guard {
    IsConst(Var),
    NotSameVar(Var, Var),
    Eq(Pattern, Pattern),
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> RulesFileError {
        RulesFileError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.text.len()
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let text: &'a str = self.text;
        let rest = &text[self.pos..];
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn expect(&mut self, token: &str) -> Result<(), RulesFileError> {
        match self.word() {
            w if w == token => Ok(()),
            w => Err(self.err(format!("expected `{token}`, found `{w}`"))),
        }
    }

    fn sexp(&mut self) -> Result<Sexp, RulesFileError> {
        let (s, end) = read_prefix(self.text, self.pos).map_err(|e| RulesFileError::Pattern {
            line: self.line,
            source: e.into(),
        })?;
        self.pos = end;
        Ok(s)
    }

    fn pattern(&mut self, lang: &LanguageDef) -> Result<Pattern, RulesFileError> {
        let s = self.sexp()?;
        Pattern::from_sexp(&s, lang).map_err(|source| RulesFileError::Pattern {
            line: self.line,
            source,
        })
    }

    fn var(&mut self) -> Result<Var, RulesFileError> {
        let w = self.word();
        w.parse().map_err(|e: crate::pattern::BadVar| self.err(e.to_string()))
    }
}

/// Parses a rules file against `lang`.
pub fn parse_rules<N: Analysis>(text: &str, lang: &LanguageDef) -> Result<Vec<Rewrite<N>>, RulesFileError> {
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (name, body) = content.split_once(':').ok_or(RulesFileError::Syntax {
            line,
            message: "expected `name: lhs => rhs`".into(),
        })?;
        let name = name.trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(RulesFileError::Syntax {
                line,
                message: format!("bad rule name `{name}`"),
            });
        }
        let mut cur = Cursor {
            text: body,
            pos: 0,
            line,
        };
        let lhs = cur.pattern(lang)?;
        cur.expect("=>")?;
        let rhs = cur.pattern(lang)?;
        let guard = if cur.at_end() {
            None
        } else {
            cur.expect("if")?;
            Some(match cur.word() {
                "is-const" => Guard::IsConst(cur.var()?),
                "not-same-var" => Guard::NotSameVar(cur.var()?, cur.var()?),
                "eq" => Guard::Eq(cur.pattern(lang)?, cur.pattern(lang)?),
                other => return Err(cur.err(format!("unknown condition `{other}`"))),
            })
        };
        if !cur.at_end() {
            return Err(cur.err("trailing text after rule"));
        }
        let rule = match guard {
            None => Rewrite::new(name, lhs, rhs),
            Some(Guard::IsConst(v)) => Rewrite::new(
                name,
                lhs,
                ConditionalApplier {
                    condition: IsConst(v),
                    applier: rhs,
                },
            ),
            Some(Guard::NotSameVar(a, b)) => Rewrite::new(
                name,
                lhs,
                ConditionalApplier {
                    condition: NotSameVar(a, b),
                    applier: rhs,
                },
            ),
            Some(Guard::Eq(p, q)) => Rewrite::new(
                name,
                lhs,
                ConditionalApplier {
                    condition: ConditionEqual::new(p, q),
                    applier: rhs,
                },
            ),
        };
        rules.push(rule.map_err(|source| RulesFileError::Rule { line, source })?);
    }
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::lambda::{self, LambdaAnalysis};
    use crate::domains::math::{self, MathAnalysis};

    #[test]
    fn parses_all_forms() {
        let text = "\
# lambda rules
add-comm: (+ ?a ?b) => (+ ?b ?a)

let-const: (let ?v ?e ?c) => ?c if is-const ?c
let-var-diff: (let ?v1 ?e (var ?v2)) => (var ?v2) if not-same-var ?v1 ?v2
if-elim: (if (= (var ?x) ?e) ?then ?else) => ?else if eq (let ?x ?e ?then) (let ?x ?e ?else)
";
        let rules: Vec<Rewrite<LambdaAnalysis>> = parse_rules(text, &lambda::language()).unwrap();
        let names: Vec<&str> = rules.iter().map(|r| r.name()).collect();
        assert_eq!(names, ["add-comm", "let-const", "let-var-diff", "if-elim"]);
        assert_eq!(format!("{:?}", rules[0]), "add-comm: (+ ?a ?b) => (+ ?b ?a)");
    }

    #[test]
    fn reports_line_numbers() {
        let lang = math::language();
        let err = |t: &str| parse_rules::<MathAnalysis>(t, &lang).unwrap_err();
        assert!(matches!(
            err("\n\nno colon here"),
            RulesFileError::Syntax { line: 3, .. }
        ));
        assert!(matches!(
            err("r: (+ ?a ?b) -> ?a"),
            RulesFileError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            err("r: (foo ?a) => ?a"),
            RulesFileError::Pattern { line: 1, .. }
        ));
        assert!(matches!(err("r: ?a => ?b"), RulesFileError::Rule { line: 1, .. }));
        assert!(matches!(err("r: ?a => ?a if maybe ?a"), RulesFileError::Syntax { .. }));
        assert!(matches!(err("r: ?a => ?a if is-const ?b"), RulesFileError::Rule { .. }));
        assert!(matches!(err("r: (+ ?a"), RulesFileError::Pattern { .. }));
    }
}

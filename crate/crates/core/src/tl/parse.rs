//! Prefix s-expression syntax for formulas.
//!
//! ```text
//! f := (always a b f) | (eventually a b f)
//!    | (and f f ...) | (or f f ...) | (not f) | (implies f f)
//!    | (in-box v lo hi [v lo hi ...] [@loc L])           also out-box
//!    | (in-ball [v ...] c ... r [@loc L])                also out-ball
//!    | (in-halfspace [v ...] a ... b [@loc L])           also out-halfspace, a·x ≤ b
//! ```
//! Variables are state names or `x1..xn`; without variables, balls and
//! half-spaces act on the leading state components. Numbers accept `inf`.

use thiserror::Error;

use crate::automaton::Location;
use crate::tl::predicate::{Polarity, PredicateSet, SetKind};
use crate::tl::{Formula, TlError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("unexpected end of input")]
    Eof,
    #[error("unexpected token `{0}`")]
    Unexpected(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("expected a number, found `{0}`")]
    NotANumber(String),
    #[error("`{op}`: {msg}")]
    Arity { op: String, msg: String },
    #[error("trailing input after formula")]
    Trailing,
    #[error(transparent)]
    Set(#[from] TlError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<Tok>| {
        if !cur.is_empty() {
            out.push(Tok::Atom(std::mem::take(cur)));
        }
    };
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                flush(&mut cur, &mut out);
                out.push(if ch == '(' { Tok::Open } else { Tok::Close });
            }
            c if c.is_whitespace() => flush(&mut cur, &mut out),
            c => cur.push(c),
        }
    }
    flush(&mut cur, &mut out);
    out
}

struct Parser<'a, R> {
    toks: Vec<Tok>,
    pos: usize,
    resolve: &'a R,
}

fn number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| !v.is_nan())
}

impl<R: Fn(&str) -> Option<usize>> Parser<'_, R> {
    fn next(&mut self) -> Result<Tok, ParseError> {
        let t = self.toks.get(self.pos).cloned().ok_or(ParseError::Eof)?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn atom(&mut self) -> Result<String, ParseError> {
        match self.next()? {
            Tok::Atom(a) => Ok(a),
            Tok::Open => Err(ParseError::Unexpected("(".into())),
            Tok::Close => Err(ParseError::Unexpected(")".into())),
        }
    }

    fn num(&mut self) -> Result<f64, ParseError> {
        let a = self.atom()?;
        number(&a).ok_or(ParseError::NotANumber(a))
    }

    fn close(&mut self) -> Result<(), ParseError> {
        match self.next()? {
            Tok::Close => Ok(()),
            Tok::Open => Err(ParseError::Unexpected("(".into())),
            Tok::Atom(a) => Err(ParseError::Unexpected(a)),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        match self.next()? {
            Tok::Open => {}
            Tok::Close => return Err(ParseError::Unexpected(")".into())),
            Tok::Atom(a) => return Err(ParseError::Unexpected(a)),
        }
        let op = self.atom()?;
        let f = match op.as_str() {
            "always" | "eventually" => {
                let a = self.num()?;
                let b = self.num()?;
                let body = self.formula()?;
                if op == "always" {
                    Formula::always(a, b, body)
                } else {
                    Formula::eventually(a, b, body)
                }
            }
            "and" | "or" => {
                let mut fs = Vec::new();
                while matches!(self.peek(), Some(Tok::Open)) {
                    fs.push(self.formula()?);
                }
                if fs.is_empty() {
                    return Err(ParseError::Arity { op, msg: "needs at least one operand".into() });
                }
                if op == "and" {
                    Formula::and(fs)
                } else {
                    Formula::or(fs)
                }
            }
            "not" => Formula::not(self.formula()?),
            "implies" => {
                let a = self.formula()?;
                let b = self.formula()?;
                Formula::implies(a, b)
            }
            p => {
                let (polarity, shape) = if let Some(s) = p.strip_prefix("in-") {
                    (Polarity::In, s)
                } else if let Some(s) = p.strip_prefix("out-") {
                    (Polarity::Out, s)
                } else {
                    return Err(ParseError::UnknownOperator(op));
                };
                if !matches!(shape, "box" | "ball" | "halfspace") {
                    return Err(ParseError::UnknownOperator(op));
                }
                let set = self.predicate(&op, shape)?;
                return Ok(Formula::Pred { set, polarity });
            }
        };
        self.close()?;
        Ok(f)
    }

    /// Predicate arguments up to and including the closing parenthesis.
    fn predicate(&mut self, op: &str, shape: &str) -> Result<PredicateSet, ParseError> {
        let mut args = Vec::new();
        let mut location: Option<Location> = None;
        loop {
            match self.next()? {
                Tok::Close => break,
                Tok::Open => return Err(ParseError::Unexpected("(".into())),
                Tok::Atom(a) if a == "@loc" => {
                    let l = self.atom()?;
                    location = Some(l.parse().map_err(|_| ParseError::NotANumber(l))?);
                }
                Tok::Atom(a) => args.push(a),
            }
        }
        let arity = |msg: &str| ParseError::Arity { op: op.to_string(), msg: msg.to_string() };
        let set = if shape == "box" {
            if args.is_empty() || args.len() % 3 != 0 {
                return Err(arity("expects triples `var lo hi`"));
            }
            let mut proj = Vec::new();
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for chunk in args.chunks(3) {
                proj.push(self.var(&chunk[0])?);
                lo.push(number(&chunk[1]).ok_or_else(|| ParseError::NotANumber(chunk[1].clone()))?);
                hi.push(number(&chunk[2]).ok_or_else(|| ParseError::NotANumber(chunk[2].clone()))?);
            }
            PredicateSet::in_box(proj, lo, hi)?
        } else {
            let split = args.iter().position(|a| number(a).is_some()).unwrap_or(args.len());
            let mut proj = args[..split].iter().map(|v| self.var(v)).collect::<Result<Vec<_>, _>>()?;
            let nums = args[split..]
                .iter()
                .map(|a| number(a).ok_or_else(|| ParseError::NotANumber(a.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            if nums.len() < 2 {
                return Err(arity("needs coefficients and a scalar"));
            }
            let (coef, last) = nums.split_at(nums.len() - 1);
            if proj.is_empty() {
                proj = (0..coef.len()).collect();
            }
            if proj.len() != coef.len() {
                return Err(arity("number of variables and coefficients differ"));
            }
            if shape == "ball" {
                PredicateSet::ball(proj, coef.to_vec(), last[0])?
            } else {
                PredicateSet::new(SetKind::HalfSpace { normal: coef.to_vec(), offset: last[0] }, proj)?
            }
        };
        Ok(match location {
            Some(l) => set.at_location(l),
            None => set,
        })
    }

    fn var(&self, name: &str) -> Result<usize, ParseError> {
        (self.resolve)(name).ok_or_else(|| ParseError::UnknownVariable(name.to_string()))
    }
}

/// Parse a formula; `resolve` maps variable names to state indices.
pub fn parse_formula<R>(text: &str, resolve: &R) -> Result<Formula, ParseError>
where
    R: Fn(&str) -> Option<usize>,
{
    let mut p = Parser { toks: tokenize(text), pos: 0, resolve };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return Err(ParseError::Trailing);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(s: &str) -> Option<usize> {
        match s {
            "G" => Some(0),
            "X" => Some(1),
            _ => s.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()).filter(|&k| k >= 1).map(|k| k - 1),
        }
    }

    #[test]
    fn glycemic_requirement() {
        let text = "(and (always 0 30 (in-box G -3 10)) (always 30 120 (in-box G -1.5 5.1)) (always 120 200 (in-box G 2 5)))";
        let f = parse_formula(text, &names).unwrap();
        match &f {
            Formula::And(fs) => assert_eq!(fs.len(), 3),
            _ => panic!("expected a conjunction"),
        }
        assert_eq!(f.leaves().len(), 3);
        assert_eq!(f.depth(), 3);
    }

    #[test]
    fn round_trip_through_text() {
        let text = "(not (and (always 0 10 (and (out-box x1 5.5 6.5 x2 2.5 3.5) (out-box x1 9.5 10.5 x2 1.5 4.5 @loc 3))) (eventually 0 10 (in-ball 0.2 1.6 0.1))))";
        let f = parse_formula(text, &names).unwrap();
        let again = parse_formula(&f.to_sexpr(), &names).unwrap();
        assert_eq!(f, again);
        let h = parse_formula("(implies (in-halfspace x2 0 1) (out-halfspace 1 -2 3))", &names)
            .unwrap_err();
        assert!(matches!(h, ParseError::Set(_)), "{h:?}");
    }

    #[test]
    fn infinite_bounds_and_locations() {
        let f = parse_formula("(always 30 120 (out-box G 5.1 inf @loc 4))", &names).unwrap();
        let (set, pol) = f.leaves()[0];
        assert_eq!(pol, Polarity::Out);
        assert_eq!(set.location, Some(4));
        assert_eq!(set.kind, SetKind::Box { lo: vec![5.1], hi: vec![f64::INFINITY] });
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_formula("(always 0 1)", &names), Err(ParseError::Unexpected(_))));
        assert!(matches!(parse_formula("(nope)", &names), Err(ParseError::UnknownOperator(_))));
        assert!(matches!(parse_formula("(in-box Q 0 1)", &names), Err(ParseError::UnknownVariable(_))));
        assert!(matches!(parse_formula("(in-box G 0)", &names), Err(ParseError::Arity { .. })));
        assert!(matches!(parse_formula("(in-box G 0 1) x", &names), Err(ParseError::Trailing)));
        assert!(matches!(parse_formula("(and (in-box G 0 1)", &names), Err(ParseError::Eof)));
    }
}

//! Text syntax for perturbation specs.
//!
//! ```text
//! spec   := name "(" arg ("," arg)* ")"
//! arg    := number | "[" number "," number "]"
//! name   := brightness | contrast | occlusion | patch | translation | rotation | linf
//! ```
//!
//! Arity per kind:
//!
//! | kind        | arguments                    |
//! |-------------|------------------------------|
//! | brightness  | `range`                      |
//! | contrast    | `range`                      |
//! | occlusion   | `i, j, w`                    |
//! | patch       | `[0,eps], i, j, w`           |
//! | translation | `tx, ty`                     |
//! | rotation    | `theta`                      |
//! | linf        | `[0,eps]`                    |
//!
//! A bare number stands for the degenerate interval `[v,v]`, except for the
//! `[0,eps]` argument of `patch` and `linf` where it means `[0,v]`. Pixel
//! coordinates are 1-based; integer arguments must be whole numbers.

use std::str::FromStr;

use super::{IntRange, Interval, PerturbationSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Arg {
    Scalar(f64),
    Range(f64, f64),
}

impl Arg {
    fn interval(self) -> Interval {
        match self {
            Arg::Scalar(v) => Interval::new(v, v),
            Arg::Range(lo, hi) => Interval::new(lo, hi),
        }
    }

    /// `[0, v]` for a bare number, used by the bounded-magnitude kinds.
    fn magnitude(self) -> Interval {
        match self {
            Arg::Scalar(v) => Interval::new(0.0, v),
            Arg::Range(lo, hi) => Interval::new(lo, hi),
        }
    }

    fn int_range(self, what: &str) -> Result<IntRange> {
        let (lo, hi) = match self {
            Arg::Scalar(v) => (v, v),
            Arg::Range(lo, hi) => (lo, hi),
        };
        let whole = |v: f64| -> Result<i64> {
            if v.fract() == 0.0 && v.abs() < 1e9 {
                Ok(v as i64)
            } else {
                Err(Error::Parse(format!("{what} must be an integer, got {v}")))
            }
        };
        Ok(IntRange::new(whole(lo)?, whole(hi)?))
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn error(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at column {} in \"{}\"", self.pos + 1, self.text))
    }

    fn ident(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self.text[self.pos..].starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.text[self.pos..].starts_with(|c: char| c.is_ascii_digit() || "+-.eE".contains(c)) {
            self.pos += 1;
        }
        let token = &self.text[start..self.pos];
        token
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse(format!("bad number '{token}' at column {} in \"{}\"", start + 1, self.text)))
    }

    fn arg(&mut self) -> Result<Arg> {
        if self.eat('[') {
            let lo = self.number()?;
            self.expect(',')?;
            let hi = self.number()?;
            self.expect(']')?;
            Ok(Arg::Range(lo, hi))
        } else {
            Ok(Arg::Scalar(self.number()?))
        }
    }
}

pub fn parse_perturbation(text: &str) -> Result<PerturbationSpec> {
    let mut cur = Cursor { text, pos: 0 };
    let name = cur.ident().to_ascii_lowercase();
    if name.is_empty() {
        return Err(cur.error("expected a perturbation name"));
    }
    cur.expect('(')?;
    let mut args = vec![cur.arg()?];
    while cur.eat(',') {
        args.push(cur.arg()?);
    }
    cur.expect(')')?;
    cur.skip_ws();
    if cur.pos != text.len() {
        return Err(cur.error("trailing input"));
    }
    let arity = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::Parse(format!("{name} takes {n} argument(s), got {}", args.len())))
        }
    };
    let spec = match name.as_str() {
        "brightness" => {
            arity(1)?;
            PerturbationSpec::Brightness(args[0].interval())
        }
        "contrast" => {
            arity(1)?;
            PerturbationSpec::Contrast(args[0].interval())
        }
        "occlusion" => {
            arity(3)?;
            PerturbationSpec::Occlusion {
                i: args[0].int_range("occlusion row")?,
                j: args[1].int_range("occlusion column")?,
                w: args[2].int_range("occlusion width")?,
            }
        }
        "patch" => {
            arity(4)?;
            PerturbationSpec::Patch {
                eps: args[0].magnitude(),
                i: args[1].int_range("patch row")?,
                j: args[2].int_range("patch column")?,
                w: args[3].int_range("patch width")?,
            }
        }
        "translation" => {
            arity(2)?;
            PerturbationSpec::Translation {
                tx: args[0].int_range("translation row offset")?,
                ty: args[1].int_range("translation column offset")?,
            }
        }
        "rotation" => {
            arity(1)?;
            PerturbationSpec::Rotation(args[0].interval())
        }
        "linf" => {
            arity(1)?;
            PerturbationSpec::Linf(args[0].magnitude())
        }
        other => return Err(Error::Parse(format!("unknown perturbation '{other}'"))),
    };
    spec.check()?;
    Ok(spec)
}

impl FromStr for PerturbationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_perturbation(s)
    }
}

//! Commutative semifields and their exact element values.
//!
//! Three instances are supported: the rationals `(Q, +, *, 0, 1)`, the
//! Viterbi semifield `(Q>=0, max, *, 0, 1)` and the Boolean semifield
//! `({0,1}, max, min, 0, 1)`. All arithmetic is exact; there is no floating
//! point anywhere in the crate because minimization and equivalence compare
//! weights for exact equality.

use std::fmt;

use num::{BigInt, BigRational, One, Signed, Zero};

use crate::{Error, Result};

/// Identifies one of the supported commutative semifields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Semifield {
    /// Arbitrary-precision rational numbers with ordinary `+` and `*`.
    Rational,
    /// Nonnegative rationals with `max` as addition and `*` as multiplication.
    Viterbi,
    /// `{0, 1}` with `max` as addition and `min` as multiplication.
    Boolean,
}

impl Semifield {
    pub fn name(self) -> &'static str {
        match self {
            Semifield::Rational => "rational",
            Semifield::Viterbi => "viterbi",
            Semifield::Boolean => "boolean",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "rational" => Ok(Semifield::Rational),
            "viterbi" => Ok(Semifield::Viterbi),
            "boolean" => Ok(Semifield::Boolean),
            other => Err(Error::InvalidAutomaton(format!(
                "unknown semifield `{other}` (expected rational, viterbi or boolean)"
            ))),
        }
    }

    /// The additive identity.
    pub fn zero(self) -> Value {
        match self {
            Semifield::Rational => Value::Rational(BigRational::zero()),
            Semifield::Viterbi => Value::Viterbi(BigRational::zero()),
            Semifield::Boolean => Value::Boolean(false),
        }
    }

    /// The multiplicative identity.
    pub fn one(self) -> Value {
        match self {
            Semifield::Rational => Value::Rational(BigRational::one()),
            Semifield::Viterbi => Value::Viterbi(BigRational::one()),
            Semifield::Boolean => Value::Boolean(true),
        }
    }

    fn check(self, v: &Value) -> Result<()> {
        if v.semifield() == self {
            Ok(())
        } else {
            Err(Error::SemifieldMismatch {
                expected: self,
                found: v.semifield(),
            })
        }
    }

    /// Semifield addition (`max` for Viterbi and Boolean).
    pub fn plus(self, a: &Value, b: &Value) -> Result<Value> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (a, b) {
            (Value::Rational(x), Value::Rational(y)) => Value::Rational(x + y),
            (Value::Viterbi(x), Value::Viterbi(y)) => Value::Viterbi(x.max(y).clone()),
            (Value::Boolean(x), Value::Boolean(y)) => Value::Boolean(*x || *y),
            _ => unreachable!("tags checked above"),
        })
    }

    /// Semifield multiplication (`min` for Boolean).
    pub fn times(self, a: &Value, b: &Value) -> Result<Value> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (a, b) {
            (Value::Rational(x), Value::Rational(y)) => Value::Rational(x * y),
            (Value::Viterbi(x), Value::Viterbi(y)) => Value::Viterbi(x * y),
            (Value::Boolean(x), Value::Boolean(y)) => Value::Boolean(*x && *y),
            _ => unreachable!("tags checked above"),
        })
    }

    /// Multiplicative inverse of a nonzero value.
    pub fn inverse(self, a: &Value) -> Result<Value> {
        self.check(a)?;
        if a.is_zero() {
            return Err(Error::InverseOfZero(self));
        }
        Ok(match a {
            Value::Rational(x) => Value::Rational(x.recip()),
            Value::Viterbi(x) => Value::Viterbi(x.recip()),
            Value::Boolean(_) => Value::Boolean(true),
        })
    }

    /// Parses a weight literal: `INT ( "/" POSINT )?` with an optional
    /// leading `-`. The sign is rejected for Viterbi and Boolean values,
    /// and Boolean values must be exactly `0` or `1`.
    pub fn parse_value(self, text: &str) -> Result<Value> {
        let invalid = |message: String| Error::InvalidValue {
            semifield: self,
            message,
        };
        if self == Semifield::Boolean {
            return match text {
                "0" => Ok(Value::Boolean(false)),
                "1" => Ok(Value::Boolean(true)),
                other => Err(invalid(format!("`{other}` is not 0 or 1"))),
            };
        }
        let (numer_text, denom_text) = match text.split_once('/') {
            Some((n, d)) => (n, Some(d)),
            None => (text, None),
        };
        let numer = parse_int(numer_text, true)
            .ok_or_else(|| invalid(format!("`{text}` is not a weight literal")))?;
        let denom = match denom_text {
            Some(d) => {
                let d = parse_int(d, false)
                    .ok_or_else(|| invalid(format!("`{text}` is not a weight literal")))?;
                if d.is_zero() {
                    return Err(invalid("denominator must be positive".into()));
                }
                d
            }
            None => BigInt::one(),
        };
        if self == Semifield::Viterbi && numer.is_negative() {
            return Err(invalid(format!("`{text}` is negative")));
        }
        let ratio = BigRational::new(numer, denom);
        Ok(match self {
            Semifield::Rational => Value::Rational(ratio),
            Semifield::Viterbi => Value::Viterbi(ratio),
            Semifield::Boolean => unreachable!(),
        })
    }
}

impl fmt::Display for Semifield {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn parse_int(text: &str, allow_sign: bool) -> Option<BigInt> {
    let digits = text.strip_prefix('-').unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !allow_sign && digits.len() != text.len() {
        return None;
    }
    text.parse().ok()
}

/// An exact element of one of the supported semifields.
///
/// Rational and Viterbi values are stored in lowest terms with positive
/// denominator, so equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Rational(BigRational),
    Viterbi(BigRational),
    Boolean(bool),
}

impl Value {
    pub fn semifield(&self) -> Semifield {
        match self {
            Value::Rational(_) => Semifield::Rational,
            Value::Viterbi(_) => Semifield::Viterbi,
            Value::Boolean(_) => Semifield::Boolean,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Rational(x) | Value::Viterbi(x) => x.is_zero(),
            Value::Boolean(b) => !b,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Value::Rational(x) | Value::Viterbi(x) => x.is_one(),
            Value::Boolean(b) => *b,
        }
    }

    /// Rational value `n / d`. Panics if `d == 0`.
    pub fn rational(n: i64, d: i64) -> Value {
        Value::Rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// Viterbi value `n / d`. Panics if `d == 0` or the value is negative.
    pub fn viterbi(n: i64, d: i64) -> Value {
        let r = BigRational::new(BigInt::from(n), BigInt::from(d));
        assert!(!r.is_negative(), "Viterbi values must be nonnegative");
        Value::Viterbi(r)
    }

    pub fn plus(&self, other: &Value) -> Result<Value> {
        self.semifield().plus(self, other)
    }

    pub fn times(&self, other: &Value) -> Result<Value> {
        self.semifield().times(self, other)
    }

    pub fn inverse(&self) -> Result<Value> {
        self.semifield().inverse(self)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Rational(x) | Value::Viterbi(x) => {
                if x.denom().is_one() {
                    write!(f, "{}", x.numer())
                } else {
                    write!(f, "{}/{}", x.numer(), x.denom())
                }
            }
            Value::Boolean(b) => f.write_str(if *b { "1" } else { "0" }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> Value {
        Value::rational(n, d)
    }

    #[test]
    fn rational_plus() {
        let sum = rat(1, 2).plus(&rat(1, 3)).unwrap();
        assert_eq!(sum, rat(5, 6));
    }

    #[test]
    fn viterbi_plus_is_max() {
        let a = Value::viterbi(3, 4);
        let b = Value::viterbi(1, 2);
        assert_eq!(a.plus(&b).unwrap(), a);
        assert_eq!(b.plus(&a).unwrap(), a);
    }

    #[test]
    fn boolean_join() {
        assert_eq!(
            Value::Boolean(false).plus(&Value::Boolean(true)).unwrap(),
            Value::Boolean(true)
        );
    }

    #[test]
    fn rational_inverse() {
        assert_eq!(rat(4, 1).inverse().unwrap(), rat(1, 4));
        // 2 * 4 * 8^-1 * 1^-1 = 1
        let product = rat(2, 1)
            .times(&rat(4, 1))
            .unwrap()
            .times(&rat(8, 1).inverse().unwrap())
            .unwrap()
            .times(&rat(1, 1).inverse().unwrap())
            .unwrap();
        assert!(product.is_one());
    }

    #[test]
    fn inverse_of_one_is_one() {
        for sf in [Semifield::Rational, Semifield::Viterbi, Semifield::Boolean] {
            assert_eq!(sf.inverse(&sf.one()).unwrap(), sf.one());
        }
    }

    #[test]
    fn viterbi_inverse() {
        assert_eq!(
            Value::viterbi(2, 3).inverse().unwrap(),
            Value::viterbi(3, 2)
        );
    }

    #[test]
    fn inverse_of_zero_is_rejected() {
        for sf in [Semifield::Rational, Semifield::Viterbi, Semifield::Boolean] {
            assert!(matches!(
                sf.inverse(&sf.zero()),
                Err(Error::InverseOfZero(_))
            ));
        }
    }

    #[test]
    fn instance_mismatch_is_rejected() {
        let err = Semifield::Rational.plus(&rat(1, 2), &Value::Boolean(true));
        assert!(matches!(err, Err(Error::SemifieldMismatch { .. })));
    }

    #[test]
    fn parse_and_print_round_trip() {
        for text in ["0", "1", "-1", "5/6", "-7/3", "1000000000000000000000/7"] {
            let v = Semifield::Rational.parse_value(text).unwrap();
            assert_eq!(v.to_string(), text);
        }
        for text in ["0", "1", "5/6"] {
            let v = Semifield::Viterbi.parse_value(text).unwrap();
            assert_eq!(v.to_string(), text);
        }
        assert_eq!(
            Semifield::Boolean.parse_value("1").unwrap(),
            Value::Boolean(true)
        );
    }

    #[test]
    fn parse_normalizes() {
        assert_eq!(Semifield::Rational.parse_value("4/6").unwrap(), rat(2, 3));
        assert_eq!(Semifield::Rational.parse_value("-4/6").unwrap(), rat(-2, 3));
    }

    #[test]
    fn parse_rejects_bad_literals() {
        for text in ["", "a", "1/", "/2", "1/0", "1/-2", "--1", "1.5", "1 /2"] {
            assert!(Semifield::Rational.parse_value(text).is_err(), "{text}");
        }
        assert!(Semifield::Viterbi.parse_value("-1").is_err());
        assert!(Semifield::Boolean.parse_value("2").is_err());
        assert!(Semifield::Boolean.parse_value("1/1").is_err());
    }
}

//! Exact decimal arithmetic: a value is `mantissa * 10^exponent` with an
//! arbitrary precision integer mantissa.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Significant digits kept by [`Decimal::div`] when the quotient does not
/// terminate.
pub const DIVISION_DIGITS: u32 = 30;

#[derive(Clone, Debug)]
pub struct Decimal {
    mantissa: BigInt,
    exponent: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecimalError {
    #[error("invalid decimal literal {0:?}")]
    Parse(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("value {value} does not fit numeric({precision},{scale})")]
    Overflow { value: String, precision: u32, scale: u32 },
}

fn pow10(n: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), n as usize)
}

fn digit_count(m: &BigInt) -> u32 {
    if m.is_zero() {
        1
    } else {
        m.abs().to_str_radix(10).len() as u32
    }
}

/// Divide rounding half away from zero.
fn div_round(num: &BigInt, den: &BigInt) -> BigInt {
    let (q, r) = num.div_rem(den);
    if r.is_zero() {
        return q;
    }
    let twice = r.abs() * 2;
    if twice >= den.abs() {
        let neg = (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus);
        if neg {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

impl Decimal {
    pub fn new(mantissa: impl Into<BigInt>, exponent: i32) -> Self {
        Decimal { mantissa: mantissa.into(), exponent }
    }

    pub fn from_int(i: impl Into<BigInt>) -> Self {
        Decimal::new(i, 0)
    }

    pub fn zero() -> Self {
        Decimal::from_int(0)
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    /// Number of digits after the decimal point as written.
    pub fn scale(&self) -> u32 {
        if self.exponent < 0 {
            (-self.exponent) as u32
        } else {
            0
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    /// Drop trailing zero digits from the mantissa, never going above
    /// exponent zero.
    pub fn normalized(&self) -> Decimal {
        let mut m = self.mantissa.clone();
        let mut e = self.exponent;
        if m.is_zero() {
            return Decimal::new(0, 0);
        }
        let ten = BigInt::from(10);
        while e < 0 {
            let (q, r) = m.div_rem(&ten);
            if !r.is_zero() {
                break;
            }
            m = q;
            e += 1;
        }
        Decimal { mantissa: m, exponent: e }
    }

    fn aligned(&self, other: &Decimal) -> (BigInt, BigInt, i32) {
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa * pow10((self.exponent - e) as u32);
        let b = &other.mantissa * pow10((other.exponent - e) as u32);
        (a, b, e)
    }

    pub fn add(&self, other: &Decimal) -> Decimal {
        let (a, b, e) = self.aligned(other);
        Decimal::new(a + b, e)
    }

    pub fn sub(&self, other: &Decimal) -> Decimal {
        let (a, b, e) = self.aligned(other);
        Decimal::new(a - b, e)
    }

    pub fn mul(&self, other: &Decimal) -> Decimal {
        Decimal::new(&self.mantissa * &other.mantissa, self.exponent + other.exponent)
    }

    pub fn neg(&self) -> Decimal {
        Decimal::new(-&self.mantissa, self.exponent)
    }

    /// Quotient rounded half away from zero to [`DIVISION_DIGITS`]
    /// significant digits (or the operands' scale, if larger).
    pub fn div(&self, other: &Decimal) -> Result<Decimal, DecimalError> {
        if other.is_zero() {
            return Err(DecimalError::DivisionByZero);
        }
        if self.is_zero() {
            return Ok(Decimal::zero());
        }
        let want = DIVISION_DIGITS.max(self.scale()).max(other.scale());
        let shift = (want as i64 + digit_count(&other.mantissa) as i64
            - digit_count(&self.mantissa) as i64)
            .max(0) as u32;
        let num = &self.mantissa * pow10(shift);
        let q = div_round(&num, &other.mantissa);
        let d = Decimal::new(q, self.exponent - other.exponent - shift as i32);
        Ok(d.normalized())
    }

    /// Round to `scale` fractional digits, half away from zero.
    pub fn round_to(&self, scale: u32) -> Decimal {
        let target = -(scale as i32);
        if self.exponent >= target {
            let m = &self.mantissa * pow10((self.exponent - target) as u32);
            return Decimal::new(m, target);
        }
        let drop = (target - self.exponent) as u32;
        Decimal::new(div_round(&self.mantissa, &pow10(drop)), target)
    }

    /// Round toward zero to an integer.
    pub fn trunc(&self) -> BigInt {
        if self.exponent >= 0 {
            &self.mantissa * pow10(self.exponent as u32)
        } else {
            &self.mantissa / pow10((-self.exponent) as u32)
        }
    }

    /// Round half away from zero to an integer.
    pub fn round_int(&self) -> BigInt {
        self.round_to(0).mantissa
    }

    /// Coerce into `numeric(precision, scale)`.
    pub fn fit(&self, precision: Option<u32>, scale: Option<u32>) -> Result<Decimal, DecimalError> {
        let d = match scale {
            Some(s) => self.round_to(s),
            None => self.clone(),
        };
        if let Some(p) = precision {
            let int_digits = digit_count(&d.trunc());
            let allowed = p.saturating_sub(scale.unwrap_or(0)).max(1);
            if !d.trunc().is_zero() && int_digits > allowed {
                return Err(DecimalError::Overflow {
                    value: self.to_string(),
                    precision: p,
                    scale: scale.unwrap_or(0),
                });
            }
        }
        Ok(d)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_string().parse().unwrap_or(f64::NAN)
    }

    pub fn to_i64(&self) -> Option<i64> {
        if self.normalized().exponent < 0 {
            return None;
        }
        self.trunc().to_i64()
    }

    pub fn is_integral(&self) -> bool {
        self.normalized().exponent >= 0
    }
}

impl From<i64> for Decimal {
    fn from(v: i64) -> Self {
        Decimal::from_int(v)
    }
}

impl From<BigInt> for Decimal {
    fn from(v: BigInt) -> Self {
        Decimal::new(v, 0)
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Decimal {}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl Hash for Decimal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let n = self.normalized();
        n.mantissa.hash(state);
        n.exponent.hash(state);
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent >= 0 {
            let m = &self.mantissa * pow10(self.exponent as u32);
            return write!(f, "{m}");
        }
        let scale = (-self.exponent) as usize;
        let digits = self.mantissa.abs().to_str_radix(10);
        let sign = if self.mantissa.is_negative() { "-" } else { "" };
        if digits.len() > scale {
            let (i, frac) = digits.split_at(digits.len() - scale);
            write!(f, "{sign}{i}.{frac}")
        } else {
            write!(f, "{sign}0.{}{digits}", "0".repeat(scale - digits.len()))
        }
    }
}

impl FromStr for Decimal {
    type Err = DecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DecimalError::Parse(s.to_string());
        let t = s.trim();
        let (body, exp_part) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], Some(&t[i + 1..])),
            None => (t, None),
        };
        let (neg, body) = match body.as_bytes().first() {
            Some(b'-') => (true, &body[1..]),
            Some(b'+') => (false, &body[1..]),
            _ => (false, body),
        };
        let (int, frac) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return Err(err());
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let digits = format!("{int}{frac}");
        let mut m: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| err())?
        };
        if neg {
            m = -m;
        }
        let mut e = -(frac.len() as i32);
        if let Some(x) = exp_part {
            e += x.parse::<i32>().map_err(|_| err())?;
        }
        Ok(Decimal::new(m, e))
    }
}

impl serde::Serialize for Decimal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `10^n` as a decimal.
pub fn ten_pow(n: i32) -> Decimal {
    Decimal::new(BigInt::one(), n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(d("17000.00").to_string(), "17000.00");
        assert_eq!(d("-0.05").to_string(), "-0.05");
        assert_eq!(d("1e3").to_string(), "1000");
        assert_eq!(d(".5").to_string(), "0.5");
        assert!("1.2.3".parse::<Decimal>().is_err());
        assert!("".parse::<Decimal>().is_err());
    }

    #[test]
    fn equality_is_numeric() {
        assert_eq!(d("1.50"), d("1.5"));
        assert!(d("0.5") < d("0.51"));
        assert!(d("-2") < d("-1.99"));
    }

    #[test]
    fn rounding_half_away_from_zero() {
        assert_eq!(d("26.315789").round_to(2).to_string(), "26.32");
        assert_eq!(d("2.345").round_to(2).to_string(), "2.35");
        assert_eq!(d("-2.345").round_to(2).to_string(), "-2.35");
        assert_eq!(d("2.344").round_to(2).to_string(), "2.34");
        assert_eq!(d("7").round_to(2).to_string(), "7.00");
    }

    #[test]
    fn division() {
        let q = d("20000.00").div(&d("76000.00")).unwrap();
        assert_eq!(q.round_to(4).to_string(), "0.2632");
        assert_eq!(d("76000").div(&d("76000")).unwrap().to_string(), "1");
        assert_eq!(d("1").div(&d("3")).unwrap().to_string().len(), 32);
        assert_eq!(d("1").div(&d("0")), Err(DecimalError::DivisionByZero));
    }

    #[test]
    fn fit_checks_precision() {
        assert_eq!(d("26.3157").fit(Some(6), Some(2)).unwrap().to_string(), "26.32");
        assert!(d("123456.7").fit(Some(6), Some(2)).is_err());
        assert_eq!(d("9999.994").fit(Some(6), Some(2)).unwrap().to_string(), "9999.99");
    }
}

//! Precision plumbing: exact decimal parsing, float/complex constructors at a
//! fixed bit count, deterministic formatting, and compensated accumulation.
//!
//! Every floating value in the crate is an MPFR float or MPC complex created
//! through one of these helpers, so a computation at P bits is reproducible
//! bit for bit across runs and thread counts.

use rug::float::Round;
use rug::ops::Pow;
use rug::{Complete, Complex, Float, Integer, Rational};

use crate::error::{Error, Result};

// rug returns lazy "incomplete" values for ref-op-ref arithmetic; these
// helpers keep call sites short while pinning the result precision to the
// left operand.
pub fn cadd(a: &Complex, b: &Complex) -> Complex {
    a.clone() + b
}
pub fn csub(a: &Complex, b: &Complex) -> Complex {
    a.clone() - b
}
pub fn cmul(a: &Complex, b: &Complex) -> Complex {
    a.clone() * b
}
pub fn cdiv(a: &Complex, b: &Complex) -> Complex {
    a.clone() / b
}
pub fn cneg(a: &Complex) -> Complex {
    -a.clone()
}
pub fn fadd(a: &Float, b: &Float) -> Float {
    a.clone() + b
}
pub fn fsub(a: &Float, b: &Float) -> Float {
    a.clone() - b
}
pub fn fmul(a: &Float, b: &Float) -> Float {
    a.clone() * b
}
pub fn fdiv(a: &Float, b: &Float) -> Float {
    a.clone() / b
}

/// 2^-e at the given precision.
pub fn exp2_neg(e: u32, prec: u32) -> Float {
    Float::with_val(prec, -(e as i64)).exp2()
}

pub const DEFAULT_PRECISION: u32 = 128;
pub const MIN_PRECISION: u32 = 64;

/// Parse a decimal or rational literal into an exact `Rational`.
///
/// Accepted forms: `-3`, `0.04`, `5/7`, `1e-3`, `2.5e2`. The decimal point
/// and exponent are expanded exactly, never rounded.
pub fn parse_exact(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::InvalidInput("empty numeric literal".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = Integer::parse(num.trim())
            .map_err(|e| Error::InvalidInput(format!("bad numerator {num:?}: {e}")))?
            .complete();
        let d = Integer::parse(den.trim())
            .map_err(|e| Error::InvalidInput(format!("bad denominator {den:?}: {e}")))?
            .complete();
        if d == 0 {
            return Err(Error::InvalidInput(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::from((n, d)));
    }
    let (mantissa, exp10) = match s.split_once(['e', 'E']) {
        Some((m, e)) => {
            let exp: i64 = e
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad exponent in {s:?}")))?;
            (m, exp)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits: String = format!("{int_part}{frac_part}");
    let digits_ok = {
        let body = digits.strip_prefix(['+', '-']).unwrap_or(&digits);
        !body.is_empty() && body.chars().all(|c| c.is_ascii_digit())
    };
    if !digits_ok || frac_part.starts_with(['+', '-']) {
        return Err(Error::InvalidInput(format!("bad numeric literal {s:?}")));
    }
    let n = Integer::parse(&digits)
        .map_err(|e| Error::InvalidInput(format!("bad numeric literal {s:?}: {e}")))?
        .complete();
    let shift = exp10 - frac_part.len() as i64;
    let mut r = Rational::from(n);
    if shift >= 0 {
        r *= Rational::from(Integer::from(10).pow(shift as u32));
    } else {
        r /= Rational::from(Integer::from(10).pow((-shift) as u32));
    }
    Ok(r)
}

pub fn float_from_rational(r: &Rational, prec: u32) -> Float {
    Float::with_val(prec, r)
}

pub fn float_zero(prec: u32) -> Float {
    Float::with_val(prec, 0)
}

pub fn float_from_f64(x: f64, prec: u32) -> Float {
    Float::with_val(prec, x)
}

pub fn complex_zero(prec: u32) -> Complex {
    Complex::with_val(prec, (0, 0))
}

pub fn complex_one(prec: u32) -> Complex {
    Complex::with_val(prec, (1, 0))
}

pub fn complex_from_rationals(re: &Rational, im: &Rational, prec: u32) -> Complex {
    Complex::with_val(prec, (Float::with_val(prec, re), Float::with_val(prec, im)))
}

pub fn complex_from_f64(re: f64, im: f64, prec: u32) -> Complex {
    Complex::with_val(prec, (re, im))
}

/// |z|^2 as a real float; avoids the square root of `abs`.
pub fn norm_sqr(z: &Complex) -> Float {
    let mut n = fmul(z.real(), z.real());
    n += fmul(z.imag(), z.imag());
    n
}

/// |z| as a real float.
pub fn cabs(z: &Complex) -> Float {
    norm_sqr(z).sqrt()
}

/// Decimal digits that faithfully round-trip a float of `prec` bits.
pub fn decimal_digits(prec: u32) -> usize {
    (prec as f64 * std::f64::consts::LOG10_2).ceil() as usize + 3
}

/// Deterministic decimal rendering of a `Float` (fixed digit count, lowercase
/// exponent marker), used for JSON and CSV output.
pub fn format_float(x: &Float, prec: u32) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x.is_sign_positive() { "inf".into() } else { "-inf".into() };
    }
    let (sign, digits, exp) = x.to_sign_string_exp_round(10, Some(decimal_digits(prec)), Round::Nearest);
    if digits.chars().all(|c| c == '0') {
        return "0".into();
    }
    let s = if sign { "-" } else { "" };
    // digits = d1 d2 d3 ..., value = 0.d1d2... * 10^exp
    let exp = exp.unwrap_or(0);
    format!("{s}0.{digits}e{exp}")
}

pub fn format_complex(z: &Complex, prec: u32) -> (String, String) {
    (format_float(z.real(), prec), format_float(z.imag(), prec))
}

/// Kahan-compensated complex accumulator. MPFR rounding is already tight at
/// high precision; the compensation keeps long canonical-order reductions
/// independent of shell boundaries.
#[derive(Clone)]
pub struct CompensatedComplex {
    sum: Complex,
    carry: Complex,
}

impl CompensatedComplex {
    pub fn new(prec: u32) -> Self {
        Self {
            sum: complex_zero(prec),
            carry: complex_zero(prec),
        }
    }

    pub fn add(&mut self, value: &Complex) {
        let y = csub(value, &self.carry);
        let t = cadd(&self.sum, &y);
        self.carry = csub(&t, &self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> Complex {
        self.sum.clone()
    }
}

/// Exact Gaussian rational, the scalar of the exact-entry mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaussRational {
    pub re: Rational,
    pub im: Rational,
}

impl GaussRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        Self { re, im }
    }

    pub fn from_int(n: i64) -> Self {
        Self::new(Rational::from(n), Rational::new())
    }

    pub fn zero() -> Self {
        Self::new(Rational::new(), Rational::new())
    }

    pub fn is_zero(&self) -> bool {
        self.re == 0 && self.im == 0
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new((&self.re + &o.re).complete(), (&self.im + &o.im).complete())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new((&self.re - &o.re).complete(), (&self.im - &o.im).complete())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let re = (&self.re * &o.re).complete() - (&self.im * &o.im).complete();
        let im = (&self.re * &o.im).complete() + (&self.im * &o.re).complete();
        Self::new(re, im)
    }

    pub fn neg(&self) -> Self {
        Self::new((-&self.re).complete(), (-&self.im).complete())
    }

    pub fn to_complex(&self, prec: u32) -> Complex {
        complex_from_rationals(&self.re, &self.im, prec)
    }
}

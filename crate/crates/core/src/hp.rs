//! Configurable-precision binary floating point used for series coefficients.

use std::str::FromStr;

use dashu_float::round::mode::HalfEven;
use dashu_float::{ConstCache, DBig, FBig};
use dashu_int::IBig;

use crate::error::{invalid, Result};

/// Binary floating point scalar with a per-value mantissa length.
pub type HpFloat = FBig<HalfEven, 2>;

/// Default mantissa length in bits.
pub const DEFAULT_PRECISION_BITS: usize = 256;

pub fn zero(prec: usize) -> HpFloat {
    HpFloat::ZERO.with_precision(prec).value()
}

pub fn from_i64(v: i64, prec: usize) -> HpFloat {
    HpFloat::from(v).with_precision(prec).value()
}

pub fn from_f64(v: f64, prec: usize) -> HpFloat {
    HpFloat::try_from(v)
        .expect("finite f64")
        .with_precision(prec)
        .value()
}

/// `num / den` rounded to `prec` bits.
pub fn ratio(num: i64, den: i64, prec: usize) -> HpFloat {
    from_i64(num, prec) / from_i64(den, prec)
}

pub fn to_f64(v: &HpFloat) -> f64 {
    v.to_f64().value()
}

pub fn pi(prec: usize) -> HpFloat {
    let mut cache = ConstCache::new();
    cache.pi::<2, HalfEven>(prec).value()
}

/// Number of significant decimal digits that round-trips `bits` of mantissa.
pub fn decimal_digits(bits: usize) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 3
}

/// Decimal representation carrying enough digits to recover the value exactly.
pub fn to_decimal_string(v: &HpFloat) -> String {
    if is_zero(v) {
        return "0".to_string();
    }
    let digits = decimal_digits(v.precision().max(53));
    v.clone()
        .with_base_and_precision::<10>(digits)
        .value()
        .to_string()
}

pub fn parse_decimal(s: &str, prec: usize) -> Result<HpFloat> {
    let d = DBig::from_str(s.trim()).map_err(|e| invalid(format!("bad decimal '{s}': {e}")))?;
    Ok(d.with_base_and_precision::<2>(prec)
        .value()
        .with_rounding::<HalfEven>())
}

/// `sum x_i y_i` accumulated exactly on the significands and rounded once.
/// Products more than `prec + 64` bits below the largest one only contribute
/// their truncated part.
pub fn dot<'a>(pairs: impl Iterator<Item = (&'a HpFloat, &'a HpFloat)>, prec: usize) -> HpFloat {
    let mut prods = Vec::new();
    let mut top = isize::MIN;
    for (x, y) in pairs {
        let (a, b) = (x.repr(), y.repr());
        if a.significand().is_zero() || b.significand().is_zero() {
            continue;
        }
        let e = a.exponent() + b.exponent();
        top = top.max(e + (a.digits() + b.digits()) as isize);
        prods.push((a.significand() * b.significand(), e));
    }
    if prods.is_empty() {
        return zero(prec);
    }
    let base = top - prec as isize - 64;
    let mut acc = IBig::ZERO;
    for (s, e) in prods {
        if e >= base {
            acc += s << (e - base) as usize;
        } else {
            acc += s >> (base - e) as usize;
        }
    }
    HpFloat::from_parts(acc, base).with_precision(prec).value()
}

pub fn is_zero(v: &HpFloat) -> bool {
    v.repr().is_pos_zero() || v.repr().is_neg_zero()
}

pub fn is_negative(v: &HpFloat) -> bool {
    !is_zero(v) && *v < HpFloat::ZERO
}

pub fn abs(v: &HpFloat) -> HpFloat {
    if is_negative(v) {
        -v.clone()
    } else {
        v.clone()
    }
}

//! Truncated odd power series with high-precision coefficients.
//!
//! The two series the crate cares about are the Taylor expansion of
//!
//! ```text
//! E_r(t) = a_1 t 2F1(1/2, 1/2; r/2 + 1; t^2),   a_1 = (2/r) (Gamma((r+1)/2) / Gamma(r/2))^2
//! ```
//!
//! and of its compositional inverse `E_r^{-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Result};
use crate::hp::{self, HpFloat};

/// Extra mantissa bits carried through the recurrences and rounded away at the end.
const GUARD_BITS: usize = 64;

/// What a series is known to represent. Tagged series carry extra invariants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    #[default]
    Untagged,
    /// Taylor series of `E_r`.
    Forward,
    /// Taylor series of `E_r^{-1}`.
    Inverse,
}

/// `sum_{k < N} c_{2k+1} t^{2k+1}` with coefficients in [`HpFloat`].
///
/// An f64 copy of the coefficients is kept for fast evaluation.
#[derive(Clone, Debug)]
pub struct OddSeries {
    rank: u32,
    kind: SeriesKind,
    precision_bits: usize,
    coeffs: Vec<HpFloat>,
    approx: Vec<f64>,
}

impl PartialEq for OddSeries {
    fn eq(&self, other: &Self) -> bool {
        self.rank == other.rank
            && self.kind == other.kind
            && self.precision_bits == other.precision_bits
            && self.coeffs == other.coeffs
    }
}

impl OddSeries {
    /// Builds a series and checks the invariants of its tag.
    ///
    /// `coeffs[k]` is the coefficient of `t^(2k+1)`. Every coefficient is rounded
    /// to `precision_bits`.
    pub fn new(
        rank: u32,
        kind: SeriesKind,
        precision_bits: usize,
        coeffs: Vec<HpFloat>,
    ) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("a series needs at least one coefficient"));
        }
        if precision_bits == 0 {
            return Err(invalid("precision_bits must be positive"));
        }
        if kind != SeriesKind::Untagged && rank == 0 {
            return Err(invalid("tagged series need a rank >= 1"));
        }
        let coeffs: Vec<HpFloat> = coeffs
            .into_iter()
            .map(|c| c.with_precision(precision_bits).value())
            .collect();
        if let Some(k) = coeffs.iter().position(|c| !c.repr().is_finite()) {
            return Err(numerical(format!("coefficient of t^{} is not finite", 2 * k + 1)));
        }
        let approx: Vec<f64> = coeffs.iter().map(hp::to_f64).collect();
        match kind {
            SeriesKind::Untagged => {}
            SeriesKind::Forward => {
                if let Some(k) = coeffs.iter().position(|c| hp::is_negative(c) || hp::is_zero(c)) {
                    return Err(invalid(format!(
                        "E_{rank} coefficient of t^{} must be positive",
                        2 * k + 1
                    )));
                }
            }
            SeriesKind::Inverse => {
                if hp::is_negative(&coeffs[0]) || hp::is_zero(&coeffs[0]) {
                    return Err(invalid("inverse series needs c_1 > 0"));
                }
                if coeffs.len() > 1 && !hp::is_negative(&coeffs[1]) {
                    return Err(invalid("inverse series needs c_3 < 0"));
                }
            }
        }
        Ok(OddSeries {
            rank,
            kind,
            precision_bits,
            coeffs,
            approx,
        })
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn precision_bits(&self) -> usize {
        self.precision_bits
    }

    /// Number of stored odd coefficients `N`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[HpFloat] {
        &self.coeffs
    }

    /// Coefficients rounded to f64, `[c_1, c_3, ...]`.
    pub fn coeffs_f64(&self) -> &[f64] {
        &self.approx
    }

    /// Keeps the first `n` coefficients.
    pub fn truncated(&self, n: usize) -> Result<OddSeries> {
        if n == 0 || n > self.len() {
            return Err(invalid(format!("cannot truncate {} terms to {n}", self.len())));
        }
        Ok(OddSeries {
            rank: self.rank,
            kind: self.kind,
            precision_bits: self.precision_bits,
            coeffs: self.coeffs[..n].to_vec(),
            approx: self.approx[..n].to_vec(),
        })
    }

    /// `sum c_{2k+1} t^{2k+1}` by Horner's rule in `t^2`.
    pub fn eval(&self, t: f64) -> f64 {
        let t2 = t * t;
        let mut acc = 0.0;
        for c in self.approx.iter().rev() {
            acc = acc * t2 + c;
        }
        acc * t
    }

    /// `sum |c_{2k+1}| t^{2k+1}`.
    pub fn eval_abs(&self, t: f64) -> f64 {
        let t2 = t * t;
        let mut acc = 0.0;
        for c in self.approx.iter().rev() {
            acc = acc * t2 + c.abs();
        }
        acc * t
    }

    /// Horner evaluation in the series' own precision.
    pub fn eval_hp(&self, t: &HpFloat) -> HpFloat {
        let t = t.clone().with_precision(self.precision_bits).value();
        let t2 = &t * &t;
        let mut acc = hp::zero(self.precision_bits);
        for c in self.coeffs.iter().rev() {
            acc = acc * &t2 + c;
        }
        acc * t
    }

    /// Horner evaluation of the absolute series in the series' own precision.
    pub fn eval_abs_hp(&self, t: &HpFloat) -> HpFloat {
        let t = t.clone().with_precision(self.precision_bits).value();
        let t2 = &t * &t;
        let mut acc = hp::zero(self.precision_bits);
        for c in self.coeffs.iter().rev() {
            acc = acc * &t2 + hp::abs(c);
        }
        acc * t
    }

    /// A-posteriori estimate of the neglected tail at `t`:
    /// `|c_{2N-1}| t^{2N-1} / (1 - t^2)`, infinite for `|t| >= 1`.
    pub fn tail_estimate(&self, t: f64) -> f64 {
        let t = t.abs();
        if t >= 1.0 {
            return f64::INFINITY;
        }
        let last = self.approx[self.approx.len() - 1].abs();
        let deg = (2 * self.approx.len() - 1) as i32;
        last * t.powi(deg) / (1.0 - t * t)
    }

    pub fn to_document(&self) -> SeriesDocument {
        SeriesDocument {
            rank: self.rank,
            kind: self.kind,
            precision_bits: self.precision_bits,
            coefficients: self.coeffs.iter().map(hp::to_decimal_string).collect(),
        }
    }

    pub fn from_document(doc: &SeriesDocument) -> Result<OddSeries> {
        let coeffs = doc
            .coefficients
            .iter()
            .map(|s| hp::parse_decimal(s, doc.precision_bits))
            .collect::<Result<Vec<_>>>()?;
        OddSeries::new(doc.rank, doc.kind, doc.precision_bits, coeffs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<OddSeries> {
        let doc: SeriesDocument = serde_json::from_str(s)?;
        OddSeries::from_document(&doc)
    }
}

/// On-disk form of an [`OddSeries`]; decimal strings keep full precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDocument {
    pub rank: u32,
    #[serde(default)]
    pub kind: SeriesKind,
    pub precision_bits: usize,
    pub coefficients: Vec<String>,
}

/// `(2/r) (Gamma((r+1)/2) / Gamma(r/2))^2` to `prec` bits.
///
/// Uses `rho_r = Gamma((r+1)/2)/Gamma(r/2)` with `rho_1 = 1/sqrt(pi)`,
/// `rho_2 = sqrt(pi)/2` and `rho_{r+2} = rho_r (r+1)/r`, so only pi is needed.
pub fn lead_coefficient_hp(r: u32, prec: usize) -> Result<HpFloat> {
    if r == 0 {
        return Err(invalid("rank r must be >= 1"));
    }
    let pi = hp::pi(prec);
    // rho_r^2 as pi^{+-1} times a rational product.
    let mut rho2 = if r % 2 == 1 {
        hp::from_i64(1, prec) / &pi
    } else {
        pi / hp::from_i64(4, prec)
    };
    let mut j = if r % 2 == 1 { 1 } else { 2 };
    while j < r {
        let num = hp::from_i64(i64::from(j) + 1, prec);
        let den = hp::from_i64(i64::from(j), prec);
        let f = num / den;
        rho2 = rho2 * &f * &f;
        j += 2;
    }
    Ok(rho2 * hp::ratio(2, i64::from(r), prec))
}

/// First `n_terms` odd Taylor coefficients of `E_r`, built from `a_1` by the
/// ratio `a_{2k+3} / a_{2k+1} = (2k+1)^2 / ((2k+2)(r+2k+2))`.
pub fn er_taylor(r: u32, n_terms: usize, precision_bits: usize) -> Result<OddSeries> {
    if r == 0 {
        return Err(invalid("rank r must be >= 1"));
    }
    if n_terms == 0 {
        return Err(invalid("need at least one term"));
    }
    let prec = precision_bits + GUARD_BITS;
    let mut coeffs = Vec::with_capacity(n_terms);
    let mut a = lead_coefficient_hp(r, prec)?;
    let r = i64::from(r);
    for k in 0..n_terms as i64 {
        coeffs.push(a.clone());
        let num = hp::from_i64((2 * k + 1) * (2 * k + 1), prec);
        let den = hp::from_i64((2 * k + 2) * (r + 2 * k + 2), prec);
        a = a * num / den;
    }
    OddSeries::new(r as u32, SeriesKind::Forward, precision_bits, coeffs)
}

/// First `n_terms` odd Taylor coefficients of `E_r^{-1}`.
///
/// `Y = E_r / a_1` solves `x^2 (1-x^2) Y'' + x (r-1-x^2) Y' + (1-r) Y = 0`, so its
/// inverse `x = phi(s)` solves
///
/// ```text
/// phi^2 (1-phi^2) phi'' + phi (phi^2 + 1 - r) phi'^2 + (r-1) s phi'^3 = 0,   phi_1 = 1.
/// ```
///
/// Collecting `s^m` gives `phi_m` from lower coefficients with pivot
/// `(m-1)(m+r-1)`, an O(N^2) recurrence. Then `b_{2k+1} = phi_{2k+1} / a_1^{2k+1}`.
pub fn er_inverse_taylor(r: u32, n_terms: usize, precision_bits: usize) -> Result<OddSeries> {
    if r == 0 {
        return Err(invalid("rank r must be >= 1"));
    }
    if n_terms == 0 {
        return Err(invalid("need at least one term"));
    }
    let prec = precision_bits + GUARD_BITS;
    let phi = inverse_phi_coefficients(i64::from(r), 2 * n_terms, prec);
    let a1 = lead_coefficient_hp(r, prec)?;
    let inv_a1 = hp::from_i64(1, prec) / a1;
    let inv_a1_sq = &inv_a1 * &inv_a1;
    let mut scale = inv_a1;
    let mut coeffs = Vec::with_capacity(n_terms);
    for k in 0..n_terms {
        coeffs.push(&phi[2 * k + 1] * &scale);
        scale *= &inv_a1_sq;
    }
    OddSeries::new(r, SeriesKind::Inverse, precision_bits, coeffs)
}

/// Coefficients `phi_0..phi_{deg-1}` of the inverse of `E_r / a_1`.
fn inverse_phi_coefficients(r: i64, deg: usize, prec: usize) -> Vec<HpFloat> {
    let int = |v: i64| hp::from_i64(v, prec);
    let z = hp::zero(prec);
    let len = deg + 2;
    let mut phi = vec![z.clone(); len];
    phi[1] = int(1);
    // Coefficients of phi', phi'', phi'^2, phi'^3, phi^2, phi^3, and the
    // combinations phi^2 - phi^4 and phi^3 + (1-r) phi that multiply phi'' and
    // phi'^2. Only the parity-allowed slots are filled.
    let mut d = vec![z.clone(); len];
    let mut dd = vec![z.clone(); len];
    let mut q = vec![z.clone(); len];
    let mut c = vec![z.clone(); len];
    let mut p2 = vec![z.clone(); len];
    let mut w = vec![z.clone(); len];
    let mut v = vec![z.clone(); len];
    d[0] = int(1);
    q[0] = int(1);
    c[0] = int(1);
    v[1] = int(1 - r);

    let r_minus_one = int(r - 1);
    for m in (3..deg).step_by(2) {
        let k = m - 1;
        p2[k] = hp::dot((1..k).step_by(2).map(|i| (&phi[i], &phi[k - i])), prec);
        let p4 = hp::dot((2..k - 1).step_by(2).map(|i| (&p2[i], &p2[k - i])), prec);
        w[k] = &p2[k] - p4;
        let p3 = hp::dot((2..m).step_by(2).map(|i| (&p2[i], &phi[m - i])), prec);

        // q[k] and c[k] without the phi_m terms (d[k] is still zero).
        q[k] = hp::dot((2..k - 1).step_by(2).map(|i| (&d[i], &d[k - i])), prec);
        c[k] = &q[k] + hp::dot((2..k).step_by(2).map(|i| (&d[i], &q[k - i])), prec);

        let terms = (4..m).step_by(2).map(|i| (&w[i], &dd[m - i]));
        let mut res = hp::dot(terms.chain((1..m).step_by(2).map(|i| (&v[i], &q[m - i]))), prec);
        res += &p3;
        res += &r_minus_one * &c[k];
        let pivot = int((m as i64 - 1) * (m as i64 + r - 1));
        phi[m] = -(res / pivot);

        d[k] = &phi[m] * int(m as i64);
        dd[k - 1] = &phi[m] * int((m * k) as i64);
        q[k] += &d[k] * int(2);
        c[k] += &d[k] * int(3);
        v[m] = p3 + &int(1 - r) * &phi[m];
    }
    phi.truncate(deg);
    phi
}

/// Compositional inverse of an odd series by Newton iteration on truncated
/// series: `b <- b - (a(b) - t) / a'(b)`, doubling the number of correct
/// coefficients per step.
///
/// The result is tagged `Inverse` when `a` is tagged `Forward` and vice versa.
pub fn revert_odd_series(a: &OddSeries, n_terms: usize) -> Result<OddSeries> {
    if n_terms == 0 {
        return Err(invalid("need at least one term"));
    }
    if a.len() < n_terms {
        return Err(invalid(format!(
            "series has {} terms, {n_terms} requested",
            a.len()
        )));
    }
    if hp::is_zero(&a.coeffs[0]) {
        return Err(invalid("cannot revert a series with a_1 = 0"));
    }
    let prec = a.precision_bits + GUARD_BITS;
    let deg = 2 * n_terms - 1;
    let a_odd: Vec<HpFloat> = a.coeffs[..n_terms]
        .iter()
        .map(|c| c.clone().with_precision(prec).value())
        .collect();
    // a'(x) = sum (2k+1) a_{2k+1} x^{2k}
    let a_der: Vec<HpFloat> = a_odd
        .iter()
        .enumerate()
        .map(|(k, c)| c * hp::from_i64(2 * k as i64 + 1, prec))
        .collect();

    let mut b = vec![hp::zero(prec); deg + 1];
    b[1] = hp::from_i64(1, prec) / &a_odd[0];

    let mut d = 1;
    let mut finishing = false;
    loop {
        d = (2 * d + 1).min(deg);
        let b_sq = mul_trunc(&b, &b, d);
        let mut val = horner_in_square(&a_odd, &b_sq, d);
        val = mul_trunc(&val, &b, d);
        val[1] -= hp::from_i64(1, prec);
        let der = horner_in_square(&a_der, &b_sq, d);
        let corr = mul_trunc(&val, &reciprocal(&der, d)?, d);
        for (bk, ck) in b.iter_mut().zip(corr.iter()).take(d + 1) {
            *bk -= ck;
        }
        if let Some(k) = b.iter().position(|c| !c.repr().is_finite()) {
            return Err(numerical(format!("non-finite coefficient at degree {k}")));
        }
        if d == deg {
            if finishing {
                break;
            }
            finishing = true;
        }
    }
    let coeffs: Vec<HpFloat> = (0..n_terms).map(|k| b[2 * k + 1].clone()).collect();
    let kind = match a.kind {
        SeriesKind::Forward => SeriesKind::Inverse,
        SeriesKind::Inverse => SeriesKind::Forward,
        SeriesKind::Untagged => SeriesKind::Untagged,
    };
    OddSeries::new(a.rank, kind, a.precision_bits, coeffs)
}

/// Dense truncated product, skipping structural zeros.
fn mul_trunc(x: &[HpFloat], y: &[HpFloat], deg: usize) -> Vec<HpFloat> {
    let prec = x[0].precision().max(y[0].precision());
    let xs: Vec<usize> = (0..x.len().min(deg + 1))
        .filter(|&i| !hp::is_zero(&x[i]))
        .collect();
    let ys: Vec<usize> = (0..y.len().min(deg + 1))
        .filter(|&i| !hp::is_zero(&y[i]))
        .collect();
    let mut out = vec![hp::zero(prec); deg + 1];
    for &i in &xs {
        for &j in &ys {
            if i + j > deg {
                break;
            }
            out[i + j] += &x[i] * &y[j];
        }
    }
    out
}

/// `sum_k c_k s^k` where `s` is a dense series, truncated at `deg`.
fn horner_in_square(c: &[HpFloat], s: &[HpFloat], deg: usize) -> Vec<HpFloat> {
    let prec = c[0].precision();
    let mut acc = vec![hp::zero(prec); deg + 1];
    for ck in c.iter().rev() {
        acc = mul_trunc(&acc, s, deg);
        acc[0] += ck;
    }
    acc
}

/// `1 / s` truncated at `deg`; requires `s_0 != 0`.
fn reciprocal(s: &[HpFloat], deg: usize) -> Result<Vec<HpFloat>> {
    if hp::is_zero(&s[0]) {
        return Err(numerical("reciprocal of a series with zero constant term"));
    }
    let prec = s[0].precision();
    let inv0 = hp::from_i64(1, prec) / &s[0];
    let mut out = vec![hp::zero(prec); deg + 1];
    out[0] = inv0.clone();
    for k in 1..=deg {
        let mut acc = hp::zero(prec);
        for i in 1..=k.min(s.len() - 1) {
            if hp::is_zero(&s[i]) || hp::is_zero(&out[k - i]) {
                continue;
            }
            acc += &s[i] * &out[k - i];
        }
        out[k] = -(acc * &inv0);
    }
    Ok(out)
}

//! Special functions around `E_r`: gamma ratios, hypergeometric and quadrature
//! evaluation, the upper incomplete gamma function and Gegenbauer polynomials
//! normalized to `P_k^q(1) = 1`.

use std::f64::consts::{LN_2, PI};
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{invalid, Result};

/// `(2/r) (Gamma((r+1)/2) / Gamma(r/2))^2`, the slope of `E_r` at 0.
///
/// Real `r` is accepted so the large-rank limit can be probed.
pub fn lead_coefficient(r: f64) -> f64 {
    (2.0 / r) * (2.0 * (ln_gamma((r + 1.0) / 2.0) - ln_gamma(r / 2.0))).exp()
}

/// Terms are summed until they drop below this fraction of the partial sum.
const SERIES_EPS: f64 = 1e-17;

/// `E_r(t)` from the hypergeometric representation
/// `a_1 t 2F1(1/2, 1/2; r/2 + 1; t^2)`.
///
/// For `t^2 <= 1/2` the Gauss series is summed directly. Closer to `|t| = 1` the
/// series converges only algebraically, so the function is continued through the
/// `z -> 1 - z` connection formulas: the non-integer case for odd `r` and the
/// logarithmic case for even `r`.
pub fn er_eval_hyp(r: u32, t: f64) -> f64 {
    assert!(r >= 1, "rank r must be >= 1");
    let t = t.clamp(-1.0, 1.0);
    if t == 0.0 {
        0.0
    } else if t * t <= 0.5 {
        hyp_direct(r, t)
    } else {
        hyp_continued(r, t)
    }
}

fn hyp_direct(r: u32, t: f64) -> f64 {
    lead_coefficient(f64::from(r)) * t * gauss_2f1(0.5, 0.5, f64::from(r) / 2.0 + 1.0, t * t)
}

fn hyp_continued(r: u32, t: f64) -> f64 {
    let a1 = lead_coefficient(f64::from(r));
    let w = 1.0 - t * t;
    let s = f64::from(r) / 2.0;
    let bracket = if r % 2 == 1 {
        // F = (1/a_1) 2F1(1/2,1/2;1-s;w) + w^s Gamma(c) Gamma(-s)/pi 2F1(c-1/2,c-1/2;1+s;w)
        // with c = 1 + s and Gamma(-s) Gamma(1+s) = -pi / sin(pi s).
        let sign = if (r / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        let head = gauss_2f1(0.5, 0.5, 1.0 - s, w);
        let tail = if w == 0.0 {
            0.0
        } else {
            w.powf(s) * gauss_2f1(s + 0.5, s + 0.5, 1.0 + s, w)
        };
        head - sign * a1 * tail
    } else {
        let m = (r / 2) as usize;
        // finite part: sum_{n<m} (1/2)_n^2 / (n! (1-m)_n) w^n
        let mut head = 0.0;
        let mut term = 1.0;
        for n in 0..m {
            head += term;
            let nf = n as f64;
            term *= (nf + 0.5) * (nf + 0.5) / ((nf + 1.0) * (nf + 1.0 - m as f64)) * w;
        }
        let tail = if w == 0.0 {
            0.0
        } else {
            let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * w.powi(m as i32) / PI * log_case_sum(m, w)
        };
        head - a1 * tail
    };
    t.signum() * (t.abs() * bracket)
}

/// `sum_n u_n w^n L_n` with `u_0 = 1`, `u_{n+1} = u_n (m+1/2+n)^2 / ((n+1)(n+m+1))`
/// and `L_n = ln w - H_n - H_{n+m} - 4 ln 2 + 4 O_{n+m}`, where `H_j` are harmonic
/// numbers and `O_j = sum_{k<=j} 1/(2k-1)` (the digamma values at integers and
/// half-integers with Euler's constant cancelled).
fn log_case_sum(m: usize, w: f64) -> f64 {
    let mut h_n = 0.0;
    let mut h_nm: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
    let mut o_nm: f64 = (1..=m).map(|k| 1.0 / (2 * k - 1) as f64).sum();
    let ln_w = w.ln();
    let mut u = 1.0;
    let mut sum = 0.0;
    let mf = m as f64;
    for n in 0..10_000usize {
        let l = ln_w - h_n - h_nm - 4.0 * LN_2 + 4.0 * o_nm;
        let term = u * l;
        sum += term;
        if n > 2 && term.abs() <= SERIES_EPS * sum.abs() {
            break;
        }
        let nf = n as f64;
        u *= (mf + 0.5 + nf) * (mf + 0.5 + nf) / ((nf + 1.0) * (nf + mf + 1.0)) * w;
        h_n += 1.0 / (nf + 1.0);
        h_nm += 1.0 / (nf + mf + 1.0);
        o_nm += 1.0 / (2.0 * (nf + mf + 1.0) - 1.0);
    }
    sum
}

/// Gauss series `2F1(a, b; c; z)` for `0 <= z < 1`; `c` must not be a
/// non-positive integer.
fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for n in 0..100_000usize {
        sum += term;
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        if n > 2 && term.abs() <= SERIES_EPS * sum.abs() {
            break;
        }
    }
    sum
}

/// `E_r(t)` from the integral representation
///
/// ```text
/// E_r(z) = 2(r-1) Gamma((r+1)/2) / (Gamma(1/2) Gamma(r/2))
///          * int_0^{pi/2} cos^{r-2}(th) sin(th) arcsin(z sin(th)) dth,
/// ```
///
/// integrated with adaptive composite Gauss–Legendre.
pub fn er_eval_quadrature(r: u32, t: f64) -> Result<f64> {
    if r < 2 {
        return Err(invalid("the integral representation needs r >= 2"));
    }
    if !(-1.0..=1.0).contains(&t) {
        return Err(invalid(format!("|t| must be <= 1, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let rf = f64::from(r);
    let pre = 2.0
        * (rf - 1.0)
        * (ln_gamma((rf + 1.0) / 2.0) - ln_gamma(0.5) - ln_gamma(rf / 2.0)).exp();
    let f = |th: f64| th.cos().powi(r as i32 - 2) * th.sin() * (t * th.sin()).asin();
    let rule = GaussLegendre::new(NonZeroUsize::new(20).unwrap());
    let panels = 4;
    let h = PI / 2.0 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let (a, b) = (p as f64 * h, (p + 1) as f64 * h);
        total += adaptive(&rule, &f, a, b, rule.integrate(a, b, f), 1e-13, 0);
    }
    Ok(pre * total)
}

fn adaptive(
    rule: &GaussLegendre,
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    if (left + right - whole).abs() <= tol || depth >= 40 {
        return left + right;
    }
    adaptive(rule, f, a, mid, left, 0.5 * tol, depth + 1)
        + adaptive(rule, f, mid, b, right, 0.5 * tol, depth + 1)
}

/// Upper incomplete gamma `Gamma(a, x) = int_x^inf s^{a-1} e^{-s} ds`.
///
/// Series for the lower function when `x < a + 1`, modified Lentz continued
/// fraction otherwise.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("a must be positive, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(invalid(format!("x must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(gamma(a));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = a * x.ln() - x;
    if x < a + 1.0 {
        // gamma(a, x) = e^{-x} x^a sum_n x^n / (a (a+1) ... (a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        Ok(gamma(a) - sum * log_prefactor.exp())
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        Ok((log_prefactor.exp()) * h)
    }
}

/// `(alpha_k, gamma_k)` in `t P_k = alpha_k P_{k+1} + gamma_k P_{k-1}` for the
/// normalization `P_k(1) = 1`.
fn recurrence(q: u32, k: usize) -> (f64, f64) {
    if q == 2 {
        return if k == 0 { (1.0, 0.0) } else { (0.5, 0.5) };
    }
    let kf = k as f64;
    let qf = f64::from(q);
    let den = 2.0 * kf + qf - 2.0;
    ((kf + qf - 2.0) / den, kf / den)
}

/// `P_0^q(t), ..., P_kmax^q(t)`.
pub fn gegenbauer_all(q: u32, kmax: usize, t: f64) -> Vec<f64> {
    assert!(q >= 2, "q must be >= 2");
    let mut p = Vec::with_capacity(kmax + 1);
    p.push(1.0);
    if kmax == 0 {
        return p;
    }
    p.push(t);
    for k in 1..kmax {
        let (al, ga) = recurrence(q, k);
        p.push((t * p[k] - ga * p[k - 1]) / al);
    }
    p
}

/// `P_k^q(t)`, the Gegenbauer polynomial of parameter `(q-2)/2` scaled to
/// `P_k^q(1) = 1`. For `q = 2` this is `cos(k arccos t)`.
pub fn gegenbauer_eval(q: u32, k: usize, t: f64) -> Result<f64> {
    if q < 2 {
        return Err(invalid(format!("q must be >= 2, got {q}")));
    }
    Ok(gegenbauer_all(q, k, t)[k])
}

/// Connection coefficients `t^l = sum_k m_{l,k} P_k^q(t)`, `0 <= k <= l <= L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GegenbauerTable {
    q: u32,
    max_degree: usize,
    /// `rows[l][k] = m_{l,k}`
    rows: Vec<Vec<f64>>,
}

/// Builds rows `0..=max_degree` by repeated multiplication with `t`:
/// `m_{l+1,k} = m_{l,k-1} alpha_{k-1} + m_{l,k+1} gamma_{k+1}`.
pub fn build_connection_table(q: u32, max_degree: usize) -> Result<GegenbauerTable> {
    if q < 2 {
        return Err(invalid(format!("q must be >= 2, got {q}")));
    }
    if max_degree < 1 {
        return Err(invalid("max degree must be >= 1"));
    }
    let coef: Vec<(f64, f64)> = (0..=max_degree + 1).map(|k| recurrence(q, k)).collect();
    let mut rows = Vec::with_capacity(max_degree + 1);
    rows.push(vec![1.0]);
    for l in 0..max_degree {
        let prev: &Vec<f64> = &rows[l];
        let mut next = vec![0.0; l + 2];
        for k in 0..=l + 1 {
            let mut v = 0.0;
            if k >= 1 {
                v += prev[k - 1] * coef[k - 1].0;
            }
            if k < l {
                v += prev[k + 1] * coef[k + 1].1;
            }
            next[k] = v;
        }
        rows.push(next);
    }
    Ok(GegenbauerTable {
        q,
        max_degree,
        rows,
    })
}

impl GegenbauerTable {
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `m_{l,k}`, zero for `k > l`.
    pub fn m(&self, l: usize, k: usize) -> f64 {
        self.rows[l].get(k).copied().unwrap_or(0.0)
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.rows[l]
    }

    /// `sum_k m_{l,k} P_k^q(t)`, which should reproduce `t^l`.
    pub fn reconstruct(&self, l: usize, t: f64) -> f64 {
        let p = gegenbauer_all(self.q, l, t);
        self.rows[l].iter().zip(p).map(|(m, p)| m * p).sum()
    }

    /// Gegenbauer coefficients of `sum_l c_l t^l`: `g_k = sum_l c_l m_{l,k}`.
    /// Only the first `min(c.len(), L+1)` monomials are used.
    pub fn expand(&self, c: &[f64]) -> Vec<f64> {
        let lmax = c.len().min(self.max_degree + 1);
        let mut g = vec![0.0; lmax];
        for (l, &cl) in c.iter().enumerate().take(lmax) {
            if cl == 0.0 {
                continue;
            }
            for (gk, m) in g.iter_mut().zip(&self.rows[l]) {
                *gk += cl * m;
            }
        }
        g
    }
}

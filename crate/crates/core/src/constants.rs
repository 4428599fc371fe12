//! Rounding constants `beta(r, G)`, `K(r, G) = 1/beta`, the sphere-to-sphere
//! refinement `beta(q -> r, G)` and the truncated-rounding factor.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, numerical, Result};
use crate::exec::Backend;
use crate::hp::DEFAULT_PRECISION_BITS;
use crate::power_series::{er_inverse_taylor, OddSeries};
use crate::special::{build_connection_table, upper_incomplete_gamma, GegenbauerTable};

/// Default number of odd coefficients of `E_r^{-1}`.
pub const DEFAULT_TERMS: usize = 1024;
/// Default bracket width for the root finders.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default downward scan step for `beta(q -> r)`.
pub const DEFAULT_GRID_STEP: f64 = 1e-3;

/// Truncation and precision of the inverse series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub terms: usize,
    pub precision_bits: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            terms: DEFAULT_TERMS,
            precision_bits: DEFAULT_PRECISION_BITS,
        }
    }
}

impl SeriesConfig {
    pub fn inverse_series(&self, r: u32) -> Result<OddSeries> {
        er_inverse_taylor(r, self.terms, self.precision_bits)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub r: u32,
    pub theta: f64,
    pub beta: f64,
    pub k_bound: f64,
    pub terms_used: usize,
    /// Tail estimate of the series at `beta` plus the bracket width.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaQrResult {
    pub q: u32,
    pub r: u32,
    pub theta: f64,
    pub beta: f64,
    pub k_bound: f64,
    /// `sum_k |g_k^q(beta)|`
    pub gk_abs_sum: f64,
    pub terms_used: usize,
    /// `g_k^q(beta)` for `k = 0..`, the Gegenbauer coefficients of `E_r^{-1}(beta t)`.
    pub g_coefficients: Vec<f64>,
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta >= 2.0) || !theta.is_finite() {
        return Err(invalid(format!("theta must be >= 2, got {theta}")));
    }
    Ok(())
}

/// `beta(r, G)` for `theta = theta(complement of G)`, built from a fresh series.
pub fn beta_rank(r: u32, theta: f64, tol: f64) -> Result<BetaResult> {
    let inv = SeriesConfig::default().inverse_series(r)?;
    beta_rank_with_series(&inv, theta, tol)
}

/// Solves `sum_k |b_{2k+1}| beta^{2k+1} = 1/(theta - 1)` by bisection on `[0, 1]`.
pub fn beta_rank_with_series(inv: &OddSeries, theta: f64, tol: f64) -> Result<BetaResult> {
    check_theta(theta)?;
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let target = 1.0 / (theta - 1.0);
    if inv.eval_abs(1.0) < target {
        return Err(numerical(format!(
            "absolute series at 1 is {} < 1/(theta-1) = {target}",
            inv.eval_abs(1.0)
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if inv.eval_abs(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok(BetaResult {
        r: inv.rank(),
        theta,
        beta,
        k_bound: 1.0 / beta,
        terms_used: inv.len(),
        residual: inv.tail_estimate(beta) + (hi - lo),
    })
}

/// All `(r, theta)` pairs for `r = 1..=r_max`, ordered by `r` then by the order
/// of `thetas`. Series are built once per rank; ranks run on `backend`.
pub fn grothendieck_table(
    r_max: u32,
    thetas: &[f64],
    cfg: SeriesConfig,
    tol: f64,
    backend: Backend,
) -> Result<Vec<BetaResult>> {
    if r_max < 1 {
        return Err(invalid("r_max must be >= 1"));
    }
    for &t in thetas {
        check_theta(t)?;
    }
    let per_rank = backend.map(r_max as usize, |i| -> Result<Vec<BetaResult>> {
        let inv = cfg.inverse_series(i as u32 + 1)?;
        thetas
            .iter()
            .map(|&t| beta_rank_with_series(&inv, t, tol))
            .collect()
    });
    let mut rows = Vec::new();
    for rank_rows in per_rank {
        rows.extend(rank_rows?);
    }
    Ok(rows)
}

pub fn table_to_csv(rows: &[BetaResult]) -> String {
    let mut out = String::from("r,theta,beta,K,terms,residual\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{:.15},{:.15},{},{:.3e}\n",
            row.r, row.theta, row.beta, row.k_bound, row.terms_used, row.residual
        ));
    }
    out
}

/// Precomputed data for repeated evaluation of `sum_k |g_k^q(beta)|`.
pub struct GegenbauerSum {
    q: u32,
    r: u32,
    /// `c_l`, coefficient of `t^l` in `E_r^{-1}(t)` (zero for even `l`).
    monomial: Vec<f64>,
    table: GegenbauerTable,
}

impl GegenbauerSum {
    pub fn new(q: u32, inv: &OddSeries) -> Result<Self> {
        let r = inv.rank();
        if q < 2 {
            return Err(invalid(format!("q must be >= 2, got {q}")));
        }
        if q < r {
            return Err(invalid(format!("need q >= r, got q = {q}, r = {r}")));
        }
        let max_degree = 2 * inv.len() - 1;
        let mut monomial = vec![0.0; max_degree + 1];
        for (k, &c) in inv.coeffs_f64().iter().enumerate() {
            monomial[2 * k + 1] = c;
        }
        Ok(GegenbauerSum {
            q,
            r,
            monomial,
            table: build_connection_table(q, max_degree)?,
        })
    }

    /// `g_k^q(beta) = sum_l c_l beta^l m_{l,k}`. The monomial sum is cut where the
    /// remaining `sum_l |c_l| beta^l` drops below 1e-12.
    pub fn coefficients(&self, beta: f64) -> Vec<f64> {
        let mut scaled: Vec<f64> = Vec::with_capacity(self.monomial.len());
        let mut p = 1.0;
        for &c in &self.monomial {
            scaled.push(c * p);
            p *= beta;
        }
        let mut tail = 0.0;
        let mut cut = scaled.len();
        for l in (0..scaled.len()).rev() {
            tail += scaled[l].abs();
            if tail >= 1e-12 {
                cut = l + 1;
                break;
            }
        }
        self.table.expand(&scaled[..cut])
    }

    pub fn abs_sum(&self, beta: f64) -> f64 {
        self.coefficients(beta).iter().map(|g| g.abs()).sum()
    }
}

/// `beta(q -> r, G)`: the largest `beta` in `(0, 1]` with
/// `sum_k |g_k^q(beta)| = 1/(theta - 1)`, found by a downward scan followed by
/// bisection.
pub fn beta_qr(
    q: u32,
    r: u32,
    theta: f64,
    grid_step: f64,
    tol: f64,
    cfg: SeriesConfig,
) -> Result<BetaQrResult> {
    check_theta(theta)?;
    if q < r {
        return Err(invalid(format!("need q >= r, got q = {q}, r = {r}")));
    }
    let inv = cfg.inverse_series(r)?;
    beta_qr_with_series(q, &inv, theta, grid_step, tol)
}

pub fn beta_qr_with_series(
    q: u32,
    inv: &OddSeries,
    theta: f64,
    grid_step: f64,
    tol: f64,
) -> Result<BetaQrResult> {
    check_theta(theta)?;
    if !(grid_step > 0.0 && grid_step < 1.0) || !(tol > 0.0) {
        return Err(invalid("grid_step must be in (0, 1) and tol positive"));
    }
    let sums = GegenbauerSum::new(q, inv)?;
    let target = 1.0 / (theta - 1.0);
    let f = |b: f64| sums.abs_sum(b) - target;

    let mut upper = 1.0;
    let mut f_upper = f(upper);
    let mut bracket = None;
    let steps = (1.0 / grid_step).ceil() as usize;
    for i in 1..=steps {
        let lower = (1.0 - i as f64 * grid_step).max(0.0);
        let f_lower = f(lower);
        if f_upper == 0.0 {
            bracket = Some((upper, upper));
            break;
        }
        if (f_lower < 0.0) != (f_upper < 0.0) {
            bracket = Some((lower, upper));
            break;
        }
        upper = lower;
        f_upper = f_lower;
        if lower == 0.0 {
            break;
        }
    }
    let (mut lo, mut hi) =
        bracket.ok_or_else(|| numerical("no crossing of sum |g_k| = 1/(theta-1) in (0, 1]"))?;
    let lo_negative = f(lo) < 0.0;
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    let beta = 0.5 * (lo + hi);
    let g = sums.coefficients(beta);
    Ok(BetaQrResult {
        q: sums.q,
        r: sums.r,
        theta,
        beta,
        k_bound: 1.0 / beta,
        gk_abs_sum: g.iter().map(|v| v.abs()).sum(),
        terms_used: inv.len(),
        g_coefficients: g,
    })
}

/// `(1/R^2) (1 - (1/2 + lambda 2^{(r+1)/2} / (sqrt(r) Gamma(r/2)) Gamma((r+1)/2, r R^2/2))^2)`.
///
/// Negative values mean the bound is vacuous at this `R`.
pub fn truncation_bound_factor(r: u32, lambda: f64, radius: f64) -> Result<f64> {
    if r == 0 {
        return Err(invalid("rank r must be >= 1"));
    }
    if !(radius >= 2.0) {
        return Err(invalid(format!("R must be >= 2, got {radius}")));
    }
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let rf = f64::from(r);
    let inc = upper_incomplete_gamma((rf + 1.0) / 2.0, rf * radius * radius / 2.0)?;
    let x = if inc == 0.0 {
        0.0
    } else {
        (lambda.ln() + (rf + 1.0) / 2.0 * std::f64::consts::LN_2 - 0.5 * rf.ln()
            - ln_gamma(rf / 2.0)
            + inc.ln())
        .exp()
    };
    let bracket = 0.5 + x;
    Ok((1.0 - bracket * bracket) / (radius * radius))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationChoice {
    pub radius: f64,
    pub factor: f64,
    /// Whether `factor > 0`, i.e. the bound is informative.
    pub positive: bool,
}

/// Grid of `R` values searched by [`best_truncation_radius`].
pub fn truncation_grid(r: u32, lambda: f64) -> Vec<f64> {
    let hi = 2.0 + (4.0 * lambda.max(1.0).ln() / f64::from(r.max(1))).sqrt();
    let n = 1000;
    (0..n)
        .map(|i| 2.0 + (hi - 2.0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Maximizes [`truncation_bound_factor`] over `R`: grid search then golden
/// section between the neighbours of the best grid point.
pub fn best_truncation_radius(r: u32, lambda: f64) -> Result<TruncationChoice> {
    let grid = truncation_grid(r, lambda);
    let vals = grid
        .iter()
        .map(|&x| truncation_bound_factor(r, lambda, x))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = i;
        }
    }
    let (mut a, mut b) = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(grid.len() - 1)],
    );
    let mut best_r = grid[best];
    let mut best_v = vals[best];
    if b > a {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = truncation_bound_factor(r, lambda, c)?;
        let mut fd = truncation_bound_factor(r, lambda, d)?;
        for _ in 0..100 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = truncation_bound_factor(r, lambda, c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = truncation_bound_factor(r, lambda, d)?;
            }
            if b - a < 1e-12 {
                break;
            }
        }
        let (xm, fm) = if fc > fd { (c, fc) } else { (d, fd) };
        if fm > best_v {
            best_r = xm;
            best_v = fm;
        }
    }
    Ok(TruncationChoice {
        radius: best_r,
        factor: best_v,
        positive: best_v > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_cfg() -> SeriesConfig {
        SeriesConfig {
            terms: 256,
            precision_bits: 256,
        }
    }

    #[test]
    fn rank_one_closed_forms() {
        let inv = small_cfg().inverse_series(1).unwrap();
        let b = beta_rank_with_series(&inv, 2.0, 1e-13).unwrap();
        let want = 2.0 * (1.0 + 2f64.sqrt()).ln() / PI;
        assert!((b.beta - want).abs() < 1e-12);
        let b3 = beta_rank_with_series(&inv, 3.0, 1e-13).unwrap();
        let want = PI / (2.0 * (0.5f64).asinh());
        assert!((b3.k_bound - want).abs() < 1e-9);
    }

    #[test]
    fn beta_invariants() {
        for r in [1u32, 2, 5] {
            let inv = small_cfg().inverse_series(r).unwrap();
            let mut prev = 1.0;
            for theta in [2.0, 2.5, 3.0, 4.0, 10.0] {
                let b = beta_rank_with_series(&inv, theta, 1e-12).unwrap();
                assert!(b.beta > 0.0 && b.beta <= 1.0 && b.k_bound >= 1.0);
                assert!(b.beta < prev);
                prev = b.beta;
                let lhs = inv.eval_abs(b.beta);
                let tol = b.residual + 1e-11;
                assert!((lhs - 1.0 / (theta - 1.0)).abs() <= tol);
            }
        }
    }

    #[test]
    fn rejects_bad_theta() {
        let inv = small_cfg().inverse_series(1).unwrap();
        assert!(beta_rank_with_series(&inv, 1.5, 1e-12).is_err());
        assert!(beta_qr(1, 2, 2.0, 1e-3, 1e-10, small_cfg()).is_err());
    }

    #[test]
    fn table_rows_in_order() {
        let rows = grothendieck_table(3, &[2.0, 3.0], small_cfg(), 1e-12, Backend::Sequential).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[3].r, rows[3].theta), (2, 3.0));
        let csv = table_to_csv(&rows);
        assert!(csv.starts_with("r,theta,beta,K,terms,residual\n"));
        assert_eq!(csv.lines().count(), 7);
        let par = grothendieck_table(3, &[2.0, 3.0], small_cfg(), 1e-12, Backend::Parallel).unwrap();
        assert_eq!(rows, par);
    }

    #[test]
    fn q2_r1_matches_bessel_closed_form() {
        // For q = 2, g_k(beta) = 2 (-1)^j J_k(pi beta / 2) (k = 2j+1), so
        // sum |g_k| = int_0^z J_0 with z = pi beta / 2; the root is z = 1.10836466084691.
        let res = beta_qr(2, 1, 2.0, 1e-3, 1e-12, small_cfg()).unwrap();
        let z = 1.108_364_660_846_91;
        assert!((res.k_bound - PI / (2.0 * z)).abs() < 1e-9, "{}", res.k_bound);
        assert!((res.gk_abs_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn q4_r1_is_half_pi() {
        let res = beta_qr(4, 1, 2.0, 1e-3, 1e-12, small_cfg()).unwrap();
        assert!((res.k_bound - PI / 2.0).abs() < 1e-8, "{}", res.k_bound);
    }

    #[test]
    fn truncation_factor_envelope() {
        for r in [1u32, 2, 5] {
            for lambda in [2.0, 3.0, 10.0] {
                for radius in [2.0, 2.5, 4.0, 10.0, 50.0] {
                    let f = truncation_bound_factor(r, lambda, radius).unwrap();
                    assert!(f <= 0.75 / (radius * radius) + 1e-15);
                }
            }
            let f = truncation_bound_factor(r, 2.0, 50.0).unwrap();
            assert!(f > 0.0 && (f - 0.75 / 2500.0).abs() < 1e-12);
        }
        assert!(truncation_bound_factor(1, 2.0, 1.9).is_err());
    }

    #[test]
    fn best_radius_is_grid_argmax() {
        for (r, lambda) in [(1u32, 2.0), (3, 3.0), (5, 20.0)] {
            let best = best_truncation_radius(r, lambda).unwrap();
            assert!(best.radius >= 2.0);
            assert!(best.factor * best.radius * best.radius <= 0.75);
            for x in truncation_grid(r, lambda) {
                assert!(best.factor >= truncation_bound_factor(r, lambda, x).unwrap());
            }
        }
    }
}

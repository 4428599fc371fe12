//! Gram matrix of the embedded vectors `R(u) = s(u) (x) S(f(u)) + t(u) (x) T(f(u))`
//! and extraction of unit vectors from it.
//!
//! Only inner products are needed: `S(x).S(y) = T(x).T(y) = Phi_abs(x.y)` and
//! `S(x).T(y) = Phi_sgn(x.y)`, so
//! `M(u,v) = (A(u,v) + A(u,v)) Phi_abs + (B(u,v) + B(v,u)) Phi_sgn` at `f(u).f(v)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Result};
use crate::exec::Backend;
use crate::linalg::{from_rows, min_eigenvalue, psd_factor, to_rows};
use crate::power_series::{OddSeries, SeriesKind};
use crate::sdp::UnitVectorAssignment;
use crate::special::gegenbauer_all;
use crate::theta::DualEmbedding;

/// Entries and diagonal are checked to this tolerance.
pub const GRAM_TOL: f64 = 1e-6;
/// `sum |b| beta^(2k+1)` must match `1/(lambda-1)` this closely.
pub const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedGram {
    pub m: DMatrix<f64>,
    pub beta_used: f64,
    pub min_eigenvalue: f64,
}

#[derive(Serialize, Deserialize)]
struct GramDocument {
    beta_used: f64,
    min_eigenvalue: f64,
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
}

impl EmbeddedGram {
    pub fn max_diagonal_deviation(&self) -> f64 {
        self.m.diagonal().iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GramDocument {
            beta_used: self.beta_used,
            min_eigenvalue: self.min_eigenvalue,
            m: to_rows(&self.m),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<EmbeddedGram> {
        let doc: GramDocument = serde_json::from_str(s)?;
        let m = from_rows(&doc.m).ok_or_else(|| invalid("ragged M"))?;
        if m.nrows() != m.ncols() {
            return Err(invalid("M must be square"));
        }
        Ok(EmbeddedGram {
            m,
            beta_used: doc.beta_used,
            min_eigenvalue: doc.min_eigenvalue,
        })
    }
}

fn assemble(
    f: &UnitVectorAssignment,
    de: &DualEmbedding,
    beta: f64,
    phi: impl Fn(f64) -> (f64, f64) + Sync,
) -> Result<EmbeddedGram> {
    let n = f.n();
    if de.s_gram.nrows() != n {
        return Err(invalid(format!("dual embedding has {} vertices, f has {n}", de.s_gram.nrows())));
    }
    let rows = Backend::default().map(n, |u| {
        (0..n)
            .map(|v| {
                let (abs, sgn) = phi(f.inner(u, v).clamp(-1.0, 1.0));
                (de.s_gram[(u, v)] + de.t_gram[(u, v)]) * abs + (de.st_gram[(u, v)] + de.st_gram[(v, u)]) * sgn
            })
            .collect::<Vec<f64>>()
    });
    let mut m = DMatrix::from_fn(n, n, |u, v| rows[u][v]);
    crate::linalg::symmetrize(&mut m);
    let eg = EmbeddedGram {
        min_eigenvalue: min_eigenvalue(&m),
        m,
        beta_used: beta,
    };
    let dev = eg.max_diagonal_deviation();
    if dev > GRAM_TOL {
        return Err(numerical(format!("embedded Gram diagonal deviates from 1 by {dev:e}")));
    }
    Ok(eg)
}

/// Gram matrix for rank `r = inv.rank()` with `Phi_abs(t) = sum |b_k| (beta t)^(2k+1)`
/// and `Phi_sgn(t) = E_r^{-1}(beta t)`.
pub fn build_embedded_gram(
    f: &UnitVectorAssignment,
    de: &DualEmbedding,
    inv: &OddSeries,
    beta: f64,
) -> Result<EmbeddedGram> {
    if inv.kind() == SeriesKind::Forward {
        return Err(invalid("expected the series of E_r^{-1}"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("beta must lie in (0, 1], got {beta}")));
    }
    let mismatch = (inv.eval_abs(beta) - 1.0 / (de.lambda - 1.0)).abs();
    if mismatch > CONSISTENCY_TOL {
        return Err(invalid(format!(
            "beta does not match lambda = {}: sum |b| beta^(2k+1) off by {mismatch:e}",
            de.lambda
        )));
    }
    assemble(f, de, beta, |t| (inv.eval_abs(beta * t), inv.eval(beta * t)))
}

/// Gram matrix for `f` in dimension `q` with the Gegenbauer coefficients
/// `g_k = g_k^q(beta)`: `Phi_abs(t) = sum |g_k| P_k^q(t)`, `Phi_sgn(t) = sum g_k P_k^q(t)`.
pub fn build_embedded_gram_qr(
    f: &UnitVectorAssignment,
    q: u32,
    g: &[f64],
    de: &DualEmbedding,
    beta: f64,
) -> Result<EmbeddedGram> {
    if q < 2 {
        return Err(invalid("q must be at least 2"));
    }
    if f.d() != q as usize {
        return Err(invalid(format!("f has dimension {}, expected q = {q}", f.d())));
    }
    if g.is_empty() {
        return Err(invalid("no Gegenbauer coefficients"));
    }
    let mismatch = ((de.lambda - 1.0) * g.iter().map(|x| x.abs()).sum::<f64>() - 1.0).abs();
    if mismatch > GRAM_TOL {
        return Err(invalid(format!("coefficients do not match lambda = {}: off by {mismatch:e}", de.lambda)));
    }
    let kmax = g.len() - 1;
    assemble(f, de, beta, |t| {
        let p = gegenbauer_all(q, kmax, t);
        let abs = g.iter().zip(&p).map(|(c, p)| c.abs() * p).sum();
        let sgn = g.iter().zip(&p).map(|(c, p)| c * p).sum();
        (abs, sgn)
    })
}

/// Unit vectors `g` with `g(u).g(v) ~ M(u,v)`: eigen-factorization with
/// negative eigenvalues clipped, rows renormalized. Also returns the largest
/// entrywise change this caused.
pub fn gram_to_unit_vectors(eg: &EmbeddedGram) -> Result<(UnitVectorAssignment, f64)> {
    let n = eg.m.nrows();
    if n == 0 {
        return Err(invalid("empty Gram matrix"));
    }
    let (factor, min) = psd_factor(&eg.m);
    if min < -GRAM_TOL {
        return Err(numerical(format!("Gram matrix has eigenvalue {min:e} below -{GRAM_TOL:e}")));
    }
    let mut data = Vec::with_capacity(n * n);
    for row in factor.row_iter() {
        let nrm = row.norm();
        if !(nrm > 0.0) {
            return Err(numerical("zero row in Gram factor"));
        }
        data.extend(row.iter().map(|x| x / nrm));
    }
    let g = UnitVectorAssignment::from_flat(n, data, false);
    let perturbation = (g.gram() - &eg.m).amax();
    Ok((g, perturbation))
}

//! The relaxation `SDP_inf` by block-coordinate ascent, and exact / heuristic
//! oracles for the rank-constrained problems.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec::Backend;
use crate::graph::WeightedInstance;
use crate::linalg::min_eigenvalue;

pub const DEFAULT_SDP_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;
pub const MAX_BRUTE_FORCE_VERTICES: usize = 20;
const UNIT_TOL: f64 = 1e-12;
const ZERO_FIELD: f64 = 1e-300;

/// One vector per vertex, stored row-major. Rows are unit vectors unless the
/// assignment is flagged as ball-valued (norms at most 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AssignmentDocument", into = "AssignmentDocument")]
pub struct UnitVectorAssignment {
    d: usize,
    data: Vec<f64>,
    ball: bool,
}

#[derive(Clone, Serialize, Deserialize)]
struct AssignmentDocument {
    d: usize,
    vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    ball: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl UnitVectorAssignment {
    pub fn new(d: usize, rows: Vec<Vec<f64>>) -> Result<UnitVectorAssignment> {
        UnitVectorAssignment::build(d, rows, false)
    }

    /// Rows of norm at most 1.
    pub fn ball(d: usize, rows: Vec<Vec<f64>>) -> Result<UnitVectorAssignment> {
        UnitVectorAssignment::build(d, rows, true)
    }

    fn build(d: usize, rows: Vec<Vec<f64>>, ball: bool) -> Result<UnitVectorAssignment> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for (u, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(invalid(format!("row {u} has length {}, expected {d}", row.len())));
            }
            let nrm = norm(row);
            let ok = if ball { nrm <= 1.0 + UNIT_TOL } else { (nrm - 1.0).abs() <= UNIT_TOL };
            if !ok || !nrm.is_finite() {
                return Err(invalid(format!("row {u} has norm {nrm}")));
            }
            data.extend_from_slice(row);
        }
        Ok(UnitVectorAssignment { d, data, ball })
    }

    pub(crate) fn from_flat(d: usize, data: Vec<f64>, ball: bool) -> UnitVectorAssignment {
        debug_assert_eq!(data.len() % d, 0);
        UnitVectorAssignment { d, data, ball }
    }

    /// `+-1` signs as a one-dimensional assignment.
    pub fn from_signs(signs: &[i8]) -> UnitVectorAssignment {
        let data = signs.iter().map(|&s| if s < 0 { -1.0 } else { 1.0 }).collect();
        UnitVectorAssignment::from_flat(1, data, false)
    }

    /// Independent uniformly random unit vectors.
    pub fn random(n: usize, d: usize, rng: &mut impl Rng) -> UnitVectorAssignment {
        let mut data = vec![0.0; n * d];
        for row in data.chunks_mut(d) {
            loop {
                for x in row.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                let nrm = norm(row);
                if nrm > 1e-8 {
                    row.iter_mut().for_each(|x| *x /= nrm);
                    break;
                }
            }
        }
        UnitVectorAssignment::from_flat(d, data, false)
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_ball(&self) -> bool {
        self.ball
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.d..(u + 1) * self.d]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    pub fn inner(&self, u: usize, v: usize) -> f64 {
        dot(self.row(u), self.row(v))
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |u, v| self.inner(u, v))
    }

    /// Largest deviation of a row norm from 1.
    pub fn max_norm_deviation(&self) -> f64 {
        self.data.chunks(self.d).map(|r| (norm(r) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Pads every row with zeros up to dimension `d`.
    pub fn embed(&self, d: usize) -> UnitVectorAssignment {
        assert!(d >= self.d);
        let mut data = Vec::with_capacity(self.n() * d);
        for row in self.data.chunks(self.d) {
            data.extend_from_slice(row);
            data.extend(std::iter::repeat_n(0.0, d - self.d));
        }
        UnitVectorAssignment::from_flat(d, data, self.ball)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.document())?)
    }

    fn document(&self) -> AssignmentDocument {
        AssignmentDocument {
            d: self.d,
            vectors: self.rows(),
            ball: self.ball,
        }
    }

    pub fn from_json(s: &str) -> Result<UnitVectorAssignment> {
        let doc: AssignmentDocument = serde_json::from_str(s)?;
        UnitVectorAssignment::build(doc.d, doc.vectors, doc.ball)
    }
}

impl TryFrom<AssignmentDocument> for UnitVectorAssignment {
    type Error = crate::error::Error;

    fn try_from(doc: AssignmentDocument) -> Result<UnitVectorAssignment> {
        UnitVectorAssignment::build(doc.d, doc.vectors, doc.ball)
    }
}

impl From<UnitVectorAssignment> for AssignmentDocument {
    fn from(f: UnitVectorAssignment) -> AssignmentDocument {
        f.document()
    }
}

/// `sum over edges of A(u,v) f(u).f(v)`.
pub fn objective(inst: &WeightedInstance, f: &UnitVectorAssignment) -> Result<f64> {
    if f.n() != inst.n() {
        return Err(invalid(format!("{} vectors for {} vertices", f.n(), inst.n())));
    }
    Ok(inst.weighted_edges().map(|(u, v, w)| w * f.inner(u, v)).sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub assignment: UnitVectorAssignment,
    pub value: f64,
    /// `(sum y + mu n) / 2`, an upper bound on `SDP_inf`.
    pub dual_bound: f64,
    pub dual_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Serialize)]
struct SolutionDocument<'a> {
    #[serde(flatten)]
    assignment: &'a AssignmentDocument,
    value: f64,
    dual_gap: f64,
}

impl SdpSolution {
    pub fn to_json(&self) -> Result<String> {
        let doc = SolutionDocument {
            assignment: &self.assignment.document(),
            value: self.value,
            dual_gap: self.dual_gap,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// `w_u = sum_v A~(u,v) f(v)` written into `out`.
fn field(adj: &[(usize, f64)], f: &UnitVectorAssignment, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for &(v, w) in adj {
        for (o, x) in out.iter_mut().zip(f.row(v)) {
            *o += w * x;
        }
    }
}

/// Block-coordinate ascent: sweeps `f(u) <- w_u / |w_u|` until a sweep gains
/// less than `tol`. Rows with `w_u = 0` are kept. Returns `(value, sweeps, converged)`.
pub fn block_ascent(
    inst: &WeightedInstance,
    f: &mut UnitVectorAssignment,
    tol: f64,
    max_sweeps: usize,
) -> Result<(f64, usize, bool)> {
    let adj = inst.weighted_adjacency();
    let mut value = objective(inst, f)?;
    let mut w = vec![0.0; f.d];
    for sweep in 1..=max_sweeps {
        for (u, nbrs) in adj.iter().enumerate() {
            field(nbrs, f, &mut w);
            let nrm = norm(&w);
            if nrm > ZERO_FIELD {
                let d = f.d;
                for (x, wi) in f.data[u * d..(u + 1) * d].iter_mut().zip(&w) {
                    *x = wi / nrm;
                }
            }
        }
        let next = objective(inst, f)?;
        let gain = next - value;
        value = next;
        if gain < tol {
            return Ok((value, sweep, true));
        }
    }
    Ok((value, max_sweeps, false))
}

fn check_instance(inst: &WeightedInstance) -> Result<()> {
    if inst.n() < 2 || inst.graph().num_edges() == 0 {
        return Err(invalid("instance needs at least 2 vertices and one edge"));
    }
    Ok(())
}

/// Dual certificate at `f`: `y_u = |w_u|`, `mu = max(0, -lambda_min(Diag(y) - A~))`.
/// Returns `(sum y + mu n) / 2`.
pub fn dual_bound(inst: &WeightedInstance, f: &UnitVectorAssignment) -> f64 {
    let adj = inst.weighted_adjacency();
    let mut w = vec![0.0; f.d];
    let y: Vec<f64> = adj
        .iter()
        .map(|nbrs| {
            field(nbrs, f, &mut w);
            norm(&w)
        })
        .collect();
    let n = inst.n();
    let mut m = -inst.dense_matrix();
    for (u, &yu) in y.iter().enumerate() {
        m[(u, u)] += yu;
    }
    let mu = (-min_eigenvalue(&m)).max(0.0);
    0.5 * (y.iter().sum::<f64>() + mu * n as f64)
}

/// Sweeps run between dual-gap checks once the per-sweep gain is below `tol`.
const GAP_CHECK_SWEEPS: usize = 50;

/// Full-dimension (`d = n`) block-coordinate ascent from a random start. After
/// the gain per sweep drops below `tol`, sweeps continue in chunks until the
/// dual gap is below `tol`, a sweep gains nothing, or `max_sweeps` is spent.
pub fn solve_sdp_infinity(
    inst: &WeightedInstance,
    tol: f64,
    max_sweeps: usize,
    seed: u64,
) -> Result<SdpSolution> {
    check_instance(inst)?;
    let n = inst.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep clear of the per-sample streams used for rounding
    rng.set_stream(u64::MAX);
    let mut f = UnitVectorAssignment::random(n, n, &mut rng);
    let (mut value, mut iterations, mut converged) = block_ascent(inst, &mut f, tol, max_sweeps)?;
    let mut bound = dual_bound(inst, &f);
    while converged && bound - value > tol && iterations < max_sweeps {
        let chunk = GAP_CHECK_SWEEPS.min(max_sweeps - iterations);
        let before = value;
        let (v, sweeps, stalled) = block_ascent(inst, &mut f, 0.0, chunk)?;
        value = v;
        iterations += sweeps;
        bound = dual_bound(inst, &f);
        if stalled || value <= before {
            break;
        }
        converged = iterations < max_sweeps || bound - value <= tol;
    }
    Ok(SdpSolution {
        assignment: f,
        value,
        dual_bound: bound,
        dual_gap: bound - value,
        iterations,
        converged,
    })
}

/// Exact `SDP_1` by Gray-code enumeration of the `2^(n-1)` sign patterns with
/// the last sign fixed to `+1`.
pub fn brute_force_rank1(inst: &WeightedInstance) -> Result<(Vec<i8>, f64)> {
    let n = inst.n();
    if n == 0 {
        return Err(invalid("empty instance"));
    }
    if n > MAX_BRUTE_FORCE_VERTICES {
        return Err(invalid(format!(
            "brute force limited to {MAX_BRUTE_FORCE_VERTICES} vertices, got {n}"
        )));
    }
    let adj = inst.weighted_adjacency();
    let mut s = vec![1i8; n];
    // h[u] = sum_v A~(u,v) s(v)
    let mut h: Vec<f64> = adj.iter().map(|nb| nb.iter().map(|&(_, w)| w).sum()).collect();
    let mut value: f64 = inst.weights().iter().sum();
    let mut best = (s.clone(), value);
    for k in 1u64..(1u64 << (n - 1)) {
        let i = k.trailing_zeros() as usize;
        let si = s[i] as f64;
        value -= 2.0 * si * h[i];
        for &(v, w) in &adj[i] {
            h[v] -= 2.0 * w * si;
        }
        s[i] = -s[i];
        if value > best.1 {
            best = (s.clone(), value);
        }
    }
    let exact = objective(inst, &UnitVectorAssignment::from_signs(&best.0))?;
    Ok((best.0, exact))
}

/// Heuristic lower bound for `SDP_r`: block ascent in dimension `r` from
/// `restarts` random starts (restart `i` seeded with `seed + i`), together with
/// the zero-padded best solution of dimension `r - 1`, so the value is
/// nondecreasing in `r`.
pub fn local_search_rank_r(
    inst: &WeightedInstance,
    r: usize,
    restarts: usize,
    seed: u64,
    backend: Backend,
) -> Result<(UnitVectorAssignment, f64)> {
    check_instance(inst)?;
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    if restarts == 0 {
        return Err(invalid("at least one restart required"));
    }
    let mut best: Option<(UnitVectorAssignment, f64)> = None;
    for dim in 1..=r {
        let runs = backend.map(restarts, |i| -> Result<(UnitVectorAssignment, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            rng.set_stream(dim as u64);
            let mut f = UnitVectorAssignment::random(inst.n(), dim, &mut rng);
            let (value, _, _) = block_ascent(inst, &mut f, DEFAULT_SDP_TOL, DEFAULT_MAX_SWEEPS)?;
            Ok((f, value))
        });
        let mut level: Option<(UnitVectorAssignment, f64)> = None;
        if let Some((prev, prev_value)) = best.take() {
            let padded = prev.embed(dim);
            let mut polished = padded.clone();
            let (value, _, _) = block_ascent(inst, &mut polished, DEFAULT_SDP_TOL, DEFAULT_MAX_SWEEPS)?;
            level = Some(if value > prev_value { (polished, value) } else { (padded, prev_value) });
        }
        for run in runs {
            let (f, value) = run?;
            if level.as_ref().is_none_or(|(_, v)| value > *v) {
                level = Some((f, value));
            }
        }
        best = level;
    }
    Ok(best.expect("at least one restart"))
}

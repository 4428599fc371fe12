//! The theta number of the complement graph and the s/t dual embedding.
//!
//! A certificate is a symmetric `Z` with `Z(u,u) = lambda - 1`, `Z(u,v) = -1`
//! on edges and `Z` PSD. Writing `Z = lambda I - M`, any choice of the
//! non-edge entries of `M` gives one with `lambda = lambda_max(M)`, so every
//! solver below only searches for good non-edge entries and then snaps.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, numerical, Error, Result};
use crate::graph::{greedy_clique, greedy_coloring, is_bipartite, k_coloring, Graph};
use crate::linalg::{eigen, from_rows, max_eigenvalue, min_eigenvalue, symmetrize, to_rows};

pub const DEFAULT_THETA_TOL: f64 = 1e-6;
pub const MAX_PROJECTION_ITERATIONS: usize = 50_000;
pub const MAX_VERTICES: usize = 128;
/// Properties of the dual embedding are checked to this tolerance.
pub const PROPERTY_TOL: f64 = 1e-6;
const COLORING_NODE_LIMIT: usize = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMethod {
    #[default]
    InteriorPoint,
    Projections,
    Coloring,
}

/// How `lambda` is obtained in the pipeline: an SDP solve, or a known
/// colouring with `k` colours (`lambda = k`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ThetaMode {
    Solve,
    Chromatic(usize),
}

impl ThetaMode {
    /// `chi:2` for bipartite graphs, `solve` otherwise.
    pub fn default_for(g: &Graph) -> ThetaMode {
        if is_bipartite(g).is_bipartite() {
            ThetaMode::Chromatic(2)
        } else {
            ThetaMode::Solve
        }
    }

    pub fn certificate(self, g: &Graph, tol: f64) -> Result<ThetaCertificate> {
        match self {
            ThetaMode::Solve => solve_theta_complement(g, tol),
            ThetaMode::Chromatic(k) => chromatic_certificate(g, k),
        }
    }
}

impl std::fmt::Display for ThetaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThetaMode::Solve => write!(f, "solve"),
            ThetaMode::Chromatic(k) => write!(f, "chi:{k}"),
        }
    }
}

impl std::str::FromStr for ThetaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<ThetaMode> {
        if s == "solve" {
            return Ok(ThetaMode::Solve);
        }
        let k = s
            .strip_prefix("chi:")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 2)
            .ok_or_else(|| invalid(format!("theta mode must be 'solve' or 'chi:k' with k >= 2, got '{s}'")))?;
        Ok(ThetaMode::Chromatic(k))
    }
}

impl TryFrom<String> for ThetaMode {
    type Error = Error;

    fn try_from(s: String) -> Result<ThetaMode> {
        s.parse()
    }
}

impl From<ThetaMode> for String {
    fn from(m: ThetaMode) -> String {
        m.to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaCertificate {
    pub lambda: f64,
    pub z: DMatrix<f64>,
    /// `|lambda_min(Z)|` when negative, else 0.
    pub psd_residual: f64,
    pub affine_residual: f64,
    pub method: ThetaMethod,
    pub iterations: usize,
}

#[derive(Serialize, Deserialize)]
struct CertificateDocument {
    lambda: f64,
    residuals: Residuals,
    method: ThetaMethod,
    iterations: usize,
    #[serde(rename = "Z")]
    z: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Residuals {
    psd: f64,
    affine: f64,
}

impl ThetaCertificate {
    /// Wraps `Z`, computing both residuals against `g`.
    pub fn new(
        g: &Graph,
        lambda: f64,
        z: DMatrix<f64>,
        method: ThetaMethod,
        iterations: usize,
    ) -> Result<ThetaCertificate> {
        if z.nrows() != g.n() || z.ncols() != g.n() {
            return Err(invalid("Z must be n x n"));
        }
        let (psd_residual, affine_residual) = residuals(g, lambda, &z);
        Ok(ThetaCertificate {
            lambda,
            z,
            psd_residual,
            affine_residual,
            method,
            iterations,
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.psd_residual.max(self.affine_residual)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CertificateDocument {
            lambda: self.lambda,
            residuals: Residuals {
                psd: self.psd_residual,
                affine: self.affine_residual,
            },
            method: self.method,
            iterations: self.iterations,
            z: to_rows(&self.z),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses a dump and recomputes the residuals against `g`.
    pub fn from_json(g: &Graph, s: &str) -> Result<ThetaCertificate> {
        let doc: CertificateDocument = serde_json::from_str(s)?;
        let z = from_rows(&doc.z).ok_or_else(|| invalid("ragged Z"))?;
        ThetaCertificate::new(g, doc.lambda, z, doc.method, doc.iterations)
    }
}

fn residuals(g: &Graph, lambda: f64, z: &DMatrix<f64>) -> (f64, f64) {
    let psd = (-min_eigenvalue(z)).max(0.0);
    let mut affine = 0.0f64;
    for u in 0..g.n() {
        affine = affine.max((z[(u, u)] - (lambda - 1.0)).abs());
    }
    for &(u, v) in g.edges() {
        affine = affine.max((z[(u, v)] + 1.0).abs());
        affine = affine.max((z[(v, u)] + 1.0).abs());
    }
    (psd, affine)
}

fn check_graph(g: &Graph) -> Result<()> {
    if g.num_edges() == 0 {
        return Err(invalid("graph has no edges"));
    }
    if g.n() > MAX_VERTICES {
        return Err(invalid(format!("theta solver limited to {MAX_VERTICES} vertices")));
    }
    Ok(())
}

/// `M` with ones on the diagonal and on edges and `nonedge(u, v)` elsewhere.
fn m_matrix(g: &Graph, nonedge: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let n = g.n();
    let mut m = DMatrix::from_element(n, n, f64::NAN);
    for u in 0..n {
        m[(u, u)] = 1.0;
    }
    for &(u, v) in g.edges() {
        m[(u, v)] = 1.0;
        m[(v, u)] = 1.0;
    }
    for u in 0..n {
        for v in u + 1..n {
            if m[(u, v)].is_nan() {
                let x = nonedge(u, v);
                m[(u, v)] = x;
                m[(v, u)] = x;
            }
        }
    }
    m
}

fn snap(
    g: &Graph,
    nonedge: impl Fn(usize, usize) -> f64,
    method: ThetaMethod,
    iterations: usize,
) -> Result<ThetaCertificate> {
    let m = m_matrix(g, nonedge);
    let lambda = max_eigenvalue(&m);
    let z = DMatrix::identity(g.n(), g.n()) * lambda - m;
    ThetaCertificate::new(g, lambda, z, method, iterations)
}

/// `Z = k P - J` with `P(u,v) = 1` when `u`, `v` share a colour. Valid for any
/// proper colouring using at most `k` colours.
pub fn coloring_certificate(g: &Graph, colors: &[usize], k: usize) -> Result<ThetaCertificate> {
    if colors.len() != g.n() {
        return Err(invalid("one colour per vertex required"));
    }
    if k < 2 {
        return Err(invalid("k must be at least 2"));
    }
    if colors.iter().any(|&c| c >= k) {
        return Err(invalid(format!("colouring uses more than {k} colours")));
    }
    if let Some(&(u, v)) = g.edges().iter().find(|&&(u, v)| colors[u] == colors[v]) {
        return Err(invalid(format!("edge ({u}, {v}) is monochromatic")));
    }
    let n = g.n();
    let kf = k as f64;
    let z = DMatrix::from_fn(n, n, |u, v| if colors[u] == colors[v] { kf - 1.0 } else { -1.0 });
    ThetaCertificate::new(g, kf, z, ThetaMethod::Coloring, 0)
}

/// Certificate with `lambda = k` from a `k`-colouring found by search.
pub fn chromatic_certificate(g: &Graph, k: usize) -> Result<ThetaCertificate> {
    check_graph(g)?;
    let colors = k_coloring(g, k, COLORING_NODE_LIMIT)
        .ok_or_else(|| invalid(format!("no proper {k}-colouring found")))?;
    coloring_certificate(g, &colors, k)
}

/// Smallest `lambda` admitting a certificate, by a primal-dual interior point
/// method. The result is never worse than the greedy colouring bound.
pub fn solve_theta_complement(g: &Graph, tol: f64) -> Result<ThetaCertificate> {
    check_graph(g)?;
    let colors = greedy_coloring(g);
    let k = colors.iter().max().map_or(1, |c| c + 1).max(2);
    let by_coloring = coloring_certificate(g, &colors, k)?;
    if greedy_clique(g).len() == k {
        return Ok(by_coloring);
    }
    let cert = solve_interior_point(g, tol)?;
    if by_coloring.lambda <= cert.lambda {
        Ok(by_coloring)
    } else {
        Ok(cert)
    }
}

/// Bisection on `lambda`; feasibility at fixed `lambda` by alternating
/// projections between the affine set and the PSD cone.
///
/// A `lambda` at which the projections do not close the gap within `max_iter`
/// is treated as infeasible. Just above a degenerate optimum the gap closes
/// sublinearly, so the returned `lambda` (always backed by a certificate) can
/// overshoot the optimum by more than `tol`.
pub fn solve_theta_projections(g: &Graph, tol: f64, max_iter: usize) -> Result<ThetaCertificate> {
    check_graph(g)?;
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let colors = greedy_coloring(g);
    let k = colors.iter().max().map_or(1, |c| c + 1).max(2);
    let mut best = coloring_certificate(g, &colors, k)?;
    let mut lo = (greedy_clique(g).len() as f64).max(2.0);
    let mut z = best.z.clone();
    let mut total = 0;
    for _ in 0..200 {
        if best.lambda - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + best.lambda);
        // a gap below tol/4 snaps to lambda <= mid + tol/4, so the bracket keeps shrinking
        let (feasible, iters) = project_at(g, mid, &mut z, 0.25 * tol, max_iter);
        total += iters;
        let cand = snap(g, |u, v| -z[(u, v)], ThetaMethod::Projections, total)?;
        if cand.lambda < best.lambda {
            best = cand;
        }
        if !feasible {
            lo = mid;
        }
    }
    best.iterations = total;
    Ok(best)
}

/// Alternating projections at fixed `lambda`, warm-started from `z`. Returns
/// whether the gap between the two sets fell below `tol`.
fn project_at(g: &Graph, lambda: f64, z: &mut DMatrix<f64>, tol: f64, max_iter: usize) -> (bool, usize) {
    let n = g.n();
    let mut history = Vec::new();
    for it in 0..max_iter {
        for u in 0..n {
            z[(u, u)] = lambda - 1.0;
        }
        for &(u, v) in g.edges() {
            z[(u, v)] = -1.0;
            z[(v, u)] = -1.0;
        }
        let e = eigen(z);
        let mut gap = 0.0;
        let mut clipped = e.eigenvectors.clone();
        for (j, &val) in e.eigenvalues.iter().enumerate() {
            if val < 0.0 {
                gap += val * val;
            }
            clipped.column_mut(j).scale_mut(val.max(0.0));
        }
        let gap = gap.sqrt();
        if gap < tol {
            return (true, it + 1);
        }
        let mut next = clipped * e.eigenvectors.transpose();
        symmetrize(&mut next);
        *z = next;
        history.push(gap);
        if history.len() > 200 && gap > 0.999_999 * history[history.len() - 201] {
            return (false, it + 1);
        }
    }
    (false, max_iter)
}

/// Constraint `sum_p coef_p <sym(a_p, b_p), X> = b` with
/// `sym(a, b) = (e_a e_b^T + e_b e_a^T) / 2`.
type Constraint = Vec<(usize, usize, f64)>;

struct StandardSdp {
    c: DMatrix<f64>,
    cons: Vec<Constraint>,
    b: DVector<f64>,
}

struct IpmResult {
    x: DMatrix<f64>,
    y: DVector<f64>,
    iterations: usize,
}

impl StandardSdp {
    fn n(&self) -> usize {
        self.c.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.cons.len(),
            self.cons
                .iter()
                .map(|t| t.iter().map(|&(a, b, c)| 0.5 * c * (x[(a, b)] + x[(b, a)])).sum()),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (terms, &yi) in self.cons.iter().zip(y.iter()) {
            for &(a, b, c) in terms {
                if a == b {
                    m[(a, a)] += c * yi;
                } else {
                    m[(a, b)] += 0.5 * c * yi;
                    m[(b, a)] += 0.5 * c * yi;
                }
            }
        }
        m
    }

    /// `M(i, j) = tr(A_i X A_j S^{-1})`.
    fn schur(&self, x: &DMatrix<f64>, si: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.cons.len();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for &(a, b, ci) in &self.cons[i] {
                    for &(c, d, cj) in &self.cons[j] {
                        acc += ci
                            * cj
                            * 0.25
                            * (x[(b, c)] * si[(d, a)]
                                + x[(b, d)] * si[(c, a)]
                                + x[(a, c)] * si[(d, b)]
                                + x[(a, d)] * si[(c, b)]);
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    /// Mehrotra predictor-corrector with the HKM direction.
    fn solve(&self, tol: f64, max_iter: usize) -> Result<IpmResult> {
        let n = self.n();
        let scale = (n as f64).sqrt().max(1.0);
        let mut x = DMatrix::identity(n, n) * scale;
        let mut s = DMatrix::identity(n, n) * scale;
        let mut y = DVector::zeros(self.cons.len());
        let bnorm = 1.0 + self.b.norm();
        let cnorm = 1.0 + self.c.norm();
        let mut last = f64::INFINITY;
        let mut trouble = None;
        let mut iterations = max_iter;
        for it in 0..max_iter {
            let rp = &self.b - self.apply(&x);
            let rd = self.adjoint(&y) - &s - &self.c;
            let pobj = self.c.dot(&x);
            let dobj = self.b.dot(&y);
            let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let infeas = (rp.norm() / bnorm).max(rd.norm() / cnorm);
            last = rel_gap.max(infeas);
            if last < tol {
                return Ok(IpmResult { x, y, iterations: it });
            }
            let mu = x.dot(&s) / n as f64;
            let Some(si) = spd_inverse(&s) else {
                (trouble, iterations) = (Some("dual iterate lost definiteness"), it);
                break;
            };
            let schur = self.schur(&x, &si);
            let chol = Cholesky::new(schur.clone()).or_else(|| {
                let reg = 1e-14 * schur.diagonal().amax().max(1.0);
                Cholesky::new(schur + DMatrix::identity(self.cons.len(), self.cons.len()) * reg)
            });
            let Some(chol) = chol else {
                (trouble, iterations) = (Some("Schur complement is singular"), it);
                break;
            };
            let direction = |target: &DMatrix<f64>| {
                let g = target * &si - &x;
                let rhs = self.apply(&(&g - &x * &rd * &si)) - &rp;
                let dy = chol.solve(&rhs);
                let ds = self.adjoint(&dy) + &rd;
                let mut dx = g - &x * &ds * &si;
                symmetrize(&mut dx);
                (dx, dy, ds)
            };
            let zero = DMatrix::zeros(n, n);
            let (dxa, _, dsa) = direction(&zero);
            let ap = step_length(&x, &dxa).min(1.0);
            let ad = step_length(&s, &dsa).min(1.0);
            let mu_aff = (&x + &dxa * ap).dot(&(&s + &dsa * ad)) / n as f64;
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
            let target = DMatrix::identity(n, n) * (sigma * mu) - &dxa * &dsa;
            let (dx, dy, ds) = direction(&target);
            let ap = (0.98 * step_length(&x, &dx)).min(1.0);
            let ad = (0.98 * step_length(&s, &ds)).min(1.0);
            x += dx * ap;
            y += dy * ad;
            s += ds * ad;
            symmetrize(&mut x);
            symmetrize(&mut s);
        }
        // Degenerate optima can stall the iteration just short of `tol`; any
        // iterate still snaps to a valid certificate.
        if last < tol.sqrt() * 1e-2 {
            return Ok(IpmResult { x, y, iterations });
        }
        match trouble {
            Some(msg) => Err(numerical(format!("{msg} (residual {last:e})"))),
            None => Err(Error::NotConverged {
                iterations: max_iter,
                residual: last,
            }),
        }
    }
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut inv = Cholesky::new(m.clone())?.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

/// Largest `alpha` with `m + alpha d` PSD (infinite when `d` is PSD).
fn step_length(m: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let Some(chol) = Cholesky::new(m.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(d) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lmin = min_eigenvalue(&w);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn solve_interior_point(g: &Graph, tol: f64) -> Result<ThetaCertificate> {
    let n = g.n();
    let nonedges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|&(u, v)| !g.has_edge(u, v))
        .collect();
    if nonedges.is_empty() {
        return snap(g, |_, _| 0.0, ThetaMethod::InteriorPoint, 0);
    }
    let ipm_tol = (tol * 1e-3).max(1e-11);
    if nonedges.len() < n - 1 + g.num_edges() {
        // max <J, X> s.t. tr X = 1, X(u,v) = 0 on non-edges
        let mut cons = vec![(0..n).map(|u| (u, u, 1.0)).collect::<Constraint>()];
        cons.extend(nonedges.iter().map(|&(u, v)| vec![(u, v, 1.0)]));
        let mut b = DVector::zeros(cons.len());
        b[0] = 1.0;
        let sdp = StandardSdp {
            c: DMatrix::from_element(n, n, 1.0),
            cons,
            b,
        };
        let res = sdp.solve(ipm_tol, 200)?;
        let index = |u: usize, v: usize| nonedges.binary_search(&(u, v)).unwrap() + 1;
        snap(g, |u, v| 1.0 - 0.5 * res.y[index(u, v)], ThetaMethod::InteriorPoint, res.iterations)
    } else {
        // min Z(0,0) s.t. equal diagonal, Z(u,v) = -1 on edges, Z PSD
        let mut cons: Vec<Constraint> = (1..n).map(|u| vec![(u, u, 1.0), (0, 0, -1.0)]).collect();
        cons.extend(g.edges().iter().map(|&(u, v)| vec![(u, v, 1.0)]));
        let mut b = DVector::zeros(cons.len());
        for i in n - 1..cons.len() {
            b[i] = -1.0;
        }
        let mut c = DMatrix::zeros(n, n);
        c[(0, 0)] = -1.0;
        let sdp = StandardSdp { c, cons, b };
        let res = sdp.solve(ipm_tol, 200)?;
        snap(g, |u, v| -res.x[(u, v)], ThetaMethod::InteriorPoint, res.iterations)
    }
}

/// Gram blocks of the s- and t-vectors: `s_gram = t_gram = A`, `st_gram = B`
/// with `A = (lambda-1)(J+Z)/(2 lambda)` and `B = ((lambda-1)J - Z)/(2 lambda)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualEmbedding {
    pub lambda: f64,
    pub s_gram: DMatrix<f64>,
    pub t_gram: DMatrix<f64>,
    pub st_gram: DMatrix<f64>,
    /// Smallest eigenvalue of `A + B` and `A - B` before clipping.
    pub min_eigenvalue: f64,
}

impl DualEmbedding {
    /// Largest deviation from each of the four properties, in order.
    pub fn property_deviations(&self, g: &Graph) -> [f64; 4] {
        let half_norm = 0.5 * (self.lambda - 1.0);
        let mut dev = [0.0f64; 4];
        for u in 0..g.n() {
            dev[0] = dev[0].max(self.st_gram[(u, u)].abs());
            dev[1] = dev[1]
                .max((self.s_gram[(u, u)] - half_norm).abs())
                .max((self.t_gram[(u, u)] - half_norm).abs());
        }
        for &(u, v) in g.edges() {
            dev[2] = dev[2].max(self.s_gram[(u, v)].abs()).max(self.t_gram[(u, v)].abs());
            dev[3] = dev[3]
                .max((self.st_gram[(u, v)] - 0.5).abs())
                .max((self.st_gram[(v, u)] - 0.5).abs());
        }
        dev
    }

    /// Smallest eigenvalue of the `2n x 2n` block Gram matrix, via `A + B` and `A - B`.
    pub fn block_min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&(&self.s_gram + &self.st_gram)).min(min_eigenvalue(&(&self.s_gram - &self.st_gram)))
    }
}

pub fn build_dual_embedding(cert: &ThetaCertificate, g: &Graph) -> Result<DualEmbedding> {
    let n = g.n();
    if cert.z.nrows() != n {
        return Err(invalid("certificate size does not match graph"));
    }
    if cert.max_residual() > PROPERTY_TOL {
        return Err(invalid(format!(
            "certificate residual {:e} exceeds {PROPERTY_TOL:e}",
            cert.max_residual()
        )));
    }
    let lambda = cert.lambda;
    let j = DMatrix::from_element(n, n, 1.0);
    let a = (&j + &cert.z) * ((lambda - 1.0) / (2.0 * lambda));
    let b = (&j * (lambda - 1.0) - &cert.z) / (2.0 * lambda);
    let (plus, min_plus) = clip_small(&(&a + &b));
    let (minus, min_minus) = clip_small(&(&a - &b));
    let min_eigenvalue = min_plus.min(min_minus);
    if min_eigenvalue < -PROPERTY_TOL {
        return Err(Error::PropertyViolation {
            property: 4,
            deviation: -min_eigenvalue,
        });
    }
    let a = (&plus + &minus) * 0.5;
    let b = (&plus - &minus) * 0.5;
    let de = DualEmbedding {
        lambda,
        s_gram: a.clone(),
        t_gram: a,
        st_gram: b,
        min_eigenvalue,
    };
    for (i, &d) in de.property_deviations(g).iter().enumerate() {
        if d > PROPERTY_TOL {
            return Err(Error::PropertyViolation {
                property: i as u8 + 1,
                deviation: d,
            });
        }
    }
    Ok(de)
}

/// Clips negative eigenvalues to zero, leaving PSD input untouched.
fn clip_small(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let e = eigen(m);
    let min = e.eigenvalues.min();
    if min >= 0.0 {
        return (m.clone(), min);
    }
    let vals = e.eigenvalues.map(|v| v.max(0.0));
    let mut out = &e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose();
    symmetrize(&mut out);
    (out, min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::greedy_chromatic_upper_bound;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|_| rng.random_bool(p))
            .collect();
        if edges.is_empty() {
            edges.push((0, 1));
        }
        Graph::new(n, edges).unwrap()
    }

    #[test]
    fn small_complete_graphs() {
        for n in 2..6 {
            let cert = solve_theta_complement(&Graph::complete(n), 1e-6).unwrap();
            assert!((cert.lambda - n as f64).abs() < 1e-9);
            assert!(cert.max_residual() < 1e-9);
        }
    }

    #[test]
    fn five_cycle_both_methods() {
        let c5 = Graph::cycle(5).unwrap();
        let ipm = solve_theta_complement(&c5, 1e-6).unwrap();
        assert_eq!(ipm.method, ThetaMethod::InteriorPoint);
        assert!((ipm.lambda - 5f64.sqrt()).abs() < 1e-7, "{}", ipm.lambda);
        assert!(ipm.max_residual() < 1e-9);
        let ap = solve_theta_projections(&c5, 1e-6, MAX_PROJECTION_ITERATIONS).unwrap();
        assert!((ap.lambda - 5f64.sqrt()).abs() < 1e-4, "{}", ap.lambda);
        assert!(ap.max_residual() < 1e-6);
    }

    #[test]
    fn both_forms_agree() {
        // sparse graph takes the edge form, dense graph the non-edge form
        let sparse = Graph::cycle(7).unwrap();
        let dense = Graph::new(
            7,
            Graph::complete(7).edges().iter().copied().filter(|&(u, v)| (u + v) % 5 != 0),
        )
        .unwrap();
        for g in [sparse, dense] {
            let ipm = solve_interior_point(&g, 1e-8).unwrap();
            let ap = solve_theta_projections(&g, 1e-6, MAX_PROJECTION_ITERATIONS).unwrap();
            assert!((ipm.lambda - ap.lambda).abs() < 1e-4, "{} vs {}", ipm.lambda, ap.lambda);
        }
    }

    #[test]
    fn odd_cycle_values() {
        // theta(C_n) = n cos(pi/n) / (1 + cos(pi/n)) and C_n is vertex transitive
        for n in [5usize, 7, 9] {
            let c = (std::f64::consts::PI / n as f64).cos();
            let expected = (1.0 + c) / c;
            let cert = solve_theta_complement(&Graph::cycle(n).unwrap(), 1e-6).unwrap();
            assert!((cert.lambda - expected).abs() < 1e-6, "n={n}: {} vs {expected}", cert.lambda);
        }
    }

    #[test]
    fn sandwich_on_random_graphs() {
        for seed in 0..20 {
            let g = random_graph(6 + (seed as usize % 10), 0.45, seed);
            let cert = solve_theta_complement(&g, 1e-6).unwrap();
            let omega = greedy_clique(&g).len() as f64;
            let chi = greedy_chromatic_upper_bound(&g) as f64;
            assert!(omega - 1e-6 <= cert.lambda && cert.lambda <= chi + 1e-9);
            assert!(cert.max_residual() < 1e-8);
        }
    }

    #[test]
    fn feasibility_is_monotone_in_lambda() {
        let g = Graph::cycle(5).unwrap();
        let cert = solve_theta_complement(&g, 1e-6).unwrap();
        for shift in [0.0, 0.1, 1.0, 5.0] {
            let lambda = cert.lambda + shift;
            let z = &cert.z + DMatrix::identity(5, 5) * shift;
            let c = ThetaCertificate::new(&g, lambda, z, ThetaMethod::InteriorPoint, 0).unwrap();
            assert!(c.max_residual() < 1e-9);
        }
    }

    #[test]
    fn coloring_certificates() {
        let g = Graph::complete_multipartite(&[2, 3, 2]);
        let cert = chromatic_certificate(&g, 3).unwrap();
        assert_eq!(cert.lambda, 3.0);
        assert!(cert.max_residual() < 1e-12);
        let de = build_dual_embedding(&cert, &g).unwrap();
        assert!(de.property_deviations(&g).iter().all(|&d| d < 1e-12));
        // more colours available than used
        let bip = Graph::cycle(6).unwrap();
        let cert = chromatic_certificate(&bip, 4).unwrap();
        assert!(cert.max_residual() < 1e-12);
        assert!(coloring_certificate(&bip, &[0, 0, 1, 0, 1, 0], 2).is_err());
        assert!(chromatic_certificate(&Graph::complete(4), 3).is_err());
    }

    #[test]
    fn k2_embedding_values() {
        let g = Graph::complete(2);
        let cert = solve_theta_complement(&g, 1e-6).unwrap();
        let de = build_dual_embedding(&cert, &g).unwrap();
        assert!((de.s_gram[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((de.st_gram[(0, 1)] - 0.5).abs() < 1e-12);
        assert!((de.st_gram[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn embedding_trace_and_properties() {
        for seed in 0..10 {
            let g = random_graph(10, 0.4, 100 + seed);
            let cert = solve_theta_complement(&g, 1e-6).unwrap();
            let de = build_dual_embedding(&cert, &g).unwrap();
            let n = g.n() as f64;
            assert!((de.s_gram.trace() - n * (de.lambda - 1.0) / 2.0).abs() < 1e-8);
            assert!(de.property_deviations(&g).iter().all(|&d| d < 1e-6));
            assert!(de.block_min_eigenvalue() > -1e-9);
        }
    }

    #[test]
    fn violated_certificate_is_rejected() {
        let g = Graph::cycle(5).unwrap();
        let z = DMatrix::from_fn(5, 5, |u, v| if u == v { 1.0 } else { -1.0 });
        let cert = ThetaCertificate::new(&g, 2.0, z, ThetaMethod::Coloring, 0).unwrap();
        assert!(cert.psd_residual > 1.0);
        assert!(build_dual_embedding(&cert, &g).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = Graph::cycle(5).unwrap();
        let cert = solve_theta_complement(&g, 1e-6).unwrap();
        let back = ThetaCertificate::from_json(&g, &cert.to_json().unwrap()).unwrap();
        assert_eq!(back.lambda, cert.lambda);
        assert_eq!(back.z, cert.z);
    }

    #[test]
    fn theta_mode_parsing() {
        assert_eq!("solve".parse::<ThetaMode>().unwrap(), ThetaMode::Solve);
        assert_eq!("chi:3".parse::<ThetaMode>().unwrap(), ThetaMode::Chromatic(3));
        assert!("chi:1".parse::<ThetaMode>().is_err());
        assert!("chi".parse::<ThetaMode>().is_err());
        assert_eq!(ThetaMode::Chromatic(4).to_string(), "chi:4");
        assert_eq!(ThetaMode::default_for(&Graph::cycle(6).unwrap()), ThetaMode::Chromatic(2));
        assert_eq!(ThetaMode::default_for(&Graph::cycle(5).unwrap()), ThetaMode::Solve);
        let json = serde_json::to_string(&ThetaMode::Chromatic(2)).unwrap();
        assert_eq!(json, "\"chi:2\"");
    }

    #[test]
    fn rejects_edgeless_graph() {
        let g = Graph::new(3, []).unwrap();
        assert!(solve_theta_complement(&g, 1e-6).is_err());
    }
}

//! Gaussian projection rounding, its Monte-Carlo estimator, truncated rounding
//! and the end-to-end rank-r algorithm.
//!
//! Sample `i` of a run seeded with `seed` draws from ChaCha8 stream `i` of
//! `seed`, so results do not depend on the backend or thread count.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::{beta_rank_with_series, SeriesConfig, DEFAULT_TOL};
use crate::embedding::{build_embedded_gram, gram_to_unit_vectors};
use crate::error::{invalid, Result};
use crate::exec::Backend;
use crate::graph::WeightedInstance;
use crate::power_series::er_taylor;
use crate::sdp::{objective, solve_sdp_infinity, UnitVectorAssignment, DEFAULT_MAX_SWEEPS, DEFAULT_SDP_TOL};
use crate::theta::{build_dual_embedding, ThetaMethod, ThetaMode, DEFAULT_THETA_TOL};

const MIN_PROJECTION_NORM: f64 = 1e-300;
/// Samples per random stream in [`identity_check`].
const IDENTITY_CHUNK: usize = 4096;

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian_matrix(r: usize, d: usize, scale: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Rows of `g` mapped by `z`, unnormalized.
fn images(g: &UnitVectorAssignment, z: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..g.n())
        .map(|u| {
            let row = g.row(u);
            (0..z.nrows())
                .map(|i| (0..z.ncols()).map(|j| z[(i, j)] * row[j]).sum())
                .collect()
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `h(u) = Z g(u) / |Z g(u)|` for a given `r x d` matrix `Z`; `None` when some
/// image vanishes.
pub fn project(g: &UnitVectorAssignment, z: &DMatrix<f64>) -> Result<Option<UnitVectorAssignment>> {
    if z.ncols() != g.d() || z.nrows() == 0 {
        return Err(invalid(format!("Z is {}x{}, vectors have dimension {}", z.nrows(), z.ncols(), g.d())));
    }
    let r = z.nrows();
    let mut data = Vec::with_capacity(g.n() * r);
    for img in images(g, z) {
        let nrm = norm(&img);
        if !(nrm >= MIN_PROJECTION_NORM) {
            return Ok(None);
        }
        data.extend(img.iter().map(|x| x / nrm));
    }
    Ok(Some(UnitVectorAssignment::from_flat(r, data, false)))
}

fn round_with(g: &UnitVectorAssignment, r: usize, rng: &mut ChaCha8Rng) -> UnitVectorAssignment {
    loop {
        let z = gaussian_matrix(r, g.d(), 1.0, rng);
        if let Some(h) = project(g, &z).expect("dimensions match") {
            return h;
        }
    }
}

fn round_sample(g: &UnitVectorAssignment, r: usize, seed: u64, index: usize) -> UnitVectorAssignment {
    round_with(g, r, &mut stream(seed, index as u64))
}

/// One rounding with `Z_ij ~ N(0, 1)`; `Z` is redrawn if some `Z g(u)` vanishes.
pub fn gaussian_round(g: &UnitVectorAssignment, r: usize, seed: u64) -> Result<UnitVectorAssignment> {
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    Ok(round_sample(g, r, seed, 0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingReport {
    pub r: usize,
    pub samples: usize,
    pub mean_value: f64,
    /// Sample standard deviation over `sqrt(samples)`.
    pub std_error: f64,
    pub best_value: f64,
    pub best_sample: usize,
    pub best_assignment: UnitVectorAssignment,
    pub beta_reference: f64,
    pub sdp_inf_reference: f64,
    pub seed: u64,
}

impl RoundingReport {
    /// `mean_value / sdp_inf_reference`.
    pub fn ratio(&self) -> f64 {
        self.mean_value / self.sdp_inf_reference
    }
}

/// Mean and standard error, summed in index order.
fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_rounding(
    inst: &WeightedInstance,
    g: &UnitVectorAssignment,
    r: usize,
    samples: usize,
    seed: u64,
    beta_ref: f64,
    sdp_ref: f64,
    backend: Backend,
) -> Result<RoundingReport> {
    if samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    if g.n() != inst.n() {
        return Err(invalid("assignment does not match instance"));
    }
    let values = backend.map(samples, |i| {
        objective(inst, &round_sample(g, r, seed, i)).expect("dimensions checked")
    });
    let (mean_value, std_error) = mean_and_error(&values);
    let mut best_sample = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best_sample] {
            best_sample = i;
        }
    }
    Ok(RoundingReport {
        r,
        samples,
        mean_value,
        std_error,
        best_value: values[best_sample],
        best_sample,
        best_assignment: round_sample(g, r, seed, best_sample),
        beta_reference: beta_ref,
        sdp_inf_reference: sdp_ref,
        seed,
    })
}

/// Replaces rows one at a time by `w_u / |w_u|`, `w_u = sum_v A~(u,v) h(v)`.
/// The objective is linear in each row, so no step decreases it.
pub fn lift_to_sphere(inst: &WeightedInstance, h: &UnitVectorAssignment) -> Result<UnitVectorAssignment> {
    if h.n() != inst.n() {
        return Err(invalid("assignment does not match instance"));
    }
    let d = h.d();
    let adj = inst.weighted_adjacency();
    let mut rows = h.rows();
    for (u, nbrs) in adj.iter().enumerate() {
        let mut w = vec![0.0; d];
        for &(v, a) in nbrs {
            for (wi, x) in w.iter_mut().zip(&rows[v]) {
                *wi += a * x;
            }
        }
        let nw = norm(&w);
        let target = if nw > MIN_PROJECTION_NORM {
            w
        } else {
            rows[u].clone()
        };
        let nt = norm(&target);
        rows[u] = if nt > MIN_PROJECTION_NORM {
            target.iter().map(|x| x / nt).collect()
        } else {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        };
    }
    UnitVectorAssignment::new(d, rows)
}

/// `g_u = Z f(u) / R` if `|Z f(u)| <= R`, else `Z f(u) / |Z f(u)|`, with
/// `Z_ij ~ N(0, 1/r)`. Optionally lifted to unit vectors by [`lift_to_sphere`].
pub fn truncated_round(
    inst: &WeightedInstance,
    f: &UnitVectorAssignment,
    r: usize,
    radius: f64,
    seed: u64,
    lift: bool,
) -> Result<UnitVectorAssignment> {
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("radius must be positive and finite, got {radius}")));
    }
    let mut rng = stream(seed, 0);
    let z = gaussian_matrix(r, f.d(), 1.0 / (r as f64).sqrt(), &mut rng);
    let mut data = Vec::with_capacity(f.n() * r);
    for img in images(f, &z) {
        let nrm = norm(&img);
        let scale = if nrm <= radius { radius } else { nrm };
        data.extend(img.iter().map(|x| x / scale));
    }
    let ball = UnitVectorAssignment::from_flat(r, data, true);
    if lift {
        lift_to_sphere(inst, &ball)
    } else {
        Ok(ball)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub r: u32,
    pub t: f64,
    pub samples: usize,
    pub mc_mean: f64,
    pub std_error: f64,
    pub series_value: f64,
}

/// Monte-Carlo estimate of `E[Zu/|Zu| . Zv/|Zv|]` for `u = (1,0)`,
/// `v = (t, sqrt(1-t^2))` and `Z` an `r x 2` Gaussian matrix, against the
/// Taylor series of `E_r`.
pub fn identity_check(
    r: u32,
    t: f64,
    samples: usize,
    seed: u64,
    cfg: SeriesConfig,
    backend: Backend,
) -> Result<IdentityCheck> {
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    if !(t.abs() <= 1.0) {
        return Err(invalid(format!("|t| must be <= 1, got {t}")));
    }
    if samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    let s = (1.0 - t * t).sqrt();
    let chunks = samples.div_ceil(IDENTITY_CHUNK);
    let per_chunk = backend.map(chunks, |c| {
        let mut rng = stream(seed, c as u64);
        let count = IDENTITY_CHUNK.min(samples - c * IDENTITY_CHUNK);
        let mut out = Vec::with_capacity(count);
        let mut a = vec![0.0; r as usize];
        let mut b = vec![0.0; r as usize];
        while out.len() < count {
            for i in 0..r as usize {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                a[i] = z0;
                b[i] = t * z0 + s * z1;
            }
            let (na, nb) = (norm(&a), norm(&b));
            if na < MIN_PROJECTION_NORM || nb < MIN_PROJECTION_NORM {
                continue;
            }
            out.push(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (na * nb));
        }
        out
    });
    let values: Vec<f64> = per_chunk.into_iter().flatten().collect();
    let (mc_mean, std_error) = mean_and_error(&values);
    let series_value = er_taylor(r, cfg.terms, cfg.precision_bits)?.eval(t);
    Ok(IdentityCheck {
        r,
        t,
        samples,
        mc_mean,
        std_error,
        series_value,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub series: SeriesConfig,
    pub beta_tol: f64,
    pub theta_tol: f64,
    pub sdp_tol: f64,
    pub max_sweeps: usize,
    pub backend: Backend,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            series: SeriesConfig::default(),
            beta_tol: DEFAULT_TOL,
            theta_tol: DEFAULT_THETA_TOL,
            sdp_tol: DEFAULT_SDP_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            backend: Backend::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub rounding: RoundingReport,
    pub theta_mode: ThetaMode,
    pub theta_method: ThetaMethod,
    pub lambda: f64,
    pub beta: f64,
    pub sdp_value: f64,
    pub sdp_dual_bound: f64,
    pub sdp_dual_gap: f64,
    pub sdp_sweeps: usize,
    pub gram_min_eigenvalue: f64,
    /// Largest entry change from clipping and renormalizing the Gram factor.
    pub extraction_perturbation: f64,
}

/// `SDP_inf` solve, theta certificate, `beta(r, G)`, embedded Gram matrix,
/// unit-vector extraction and `samples` Gaussian roundings to dimension `r`.
pub fn algorithm_a(
    inst: &WeightedInstance,
    r: usize,
    samples: usize,
    seed: u64,
    theta_mode: ThetaMode,
    cfg: &AlgorithmConfig,
) -> Result<AlgorithmReport> {
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    let rank = u32::try_from(r).map_err(|_| invalid("r too large"))?;
    let inv = cfg.series.inverse_series(rank)?;
    let sdp = solve_sdp_infinity(inst, cfg.sdp_tol, cfg.max_sweeps, seed)?;
    let cert = theta_mode.certificate(inst.graph(), cfg.theta_tol)?;
    let de = build_dual_embedding(&cert, inst.graph())?;
    let beta = beta_rank_with_series(&inv, cert.lambda, cfg.beta_tol)?.beta;
    let eg = build_embedded_gram(&sdp.assignment, &de, &inv, beta)?;
    let (g, extraction_perturbation) = gram_to_unit_vectors(&eg)?;
    let rounding = estimate_rounding(inst, &g, r, samples, seed, beta, sdp.value, cfg.backend)?;
    Ok(AlgorithmReport {
        rounding,
        theta_mode,
        theta_method: cert.method,
        lambda: cert.lambda,
        beta,
        sdp_value: sdp.value,
        sdp_dual_bound: sdp.dual_bound,
        sdp_dual_gap: sdp.dual_gap,
        sdp_sweeps: sdp.iterations,
        gram_min_eigenvalue: eg.min_eigenvalue,
        extraction_perturbation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn edge(w: f64) -> WeightedInstance {
        WeightedInstance::from_weighted_edges(2, &[(0, 1, w)]).unwrap()
    }

    fn planar(angles: &[f64]) -> UnitVectorAssignment {
        UnitVectorAssignment::new(2, angles.iter().map(|a| vec![a.cos(), a.sin()]).collect()).unwrap()
    }

    #[test]
    fn identity_matrix_projection_is_identity() {
        let g = planar(&[0.3, 1.1, -2.0]);
        let h = project(&g, &DMatrix::identity(2, 2)).unwrap().unwrap();
        assert!((h.gram() - g.gram()).amax() < 1e-15);
        assert!(project(&g, &DMatrix::zeros(2, 2)).unwrap().is_none());
        assert!(project(&g, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn equal_vectors_stay_equal_and_rank_one_gives_signs() {
        let g = planar(&[0.7, 0.7, 2.5]);
        for seed in 0..20 {
            let h = gaussian_round(&g, 3, seed).unwrap();
            assert_eq!(h.row(0), h.row(1));
            assert!(h.max_norm_deviation() < 1e-12);
            let s = gaussian_round(&g, 1, seed).unwrap();
            assert!((0..3).all(|u| s.row(u)[0].abs() == 1.0));
        }
    }

    #[test]
    fn aligned_edge_rounds_exactly() {
        let g = planar(&[0.4, 0.4]);
        let rep = estimate_rounding(&edge(1.0), &g, 1, 500, 3, 1.0, 1.0, Backend::Parallel).unwrap();
        assert_eq!(rep.mean_value, 1.0);
        assert_eq!(rep.std_error, 0.0);
    }

    #[test]
    fn report_is_deterministic_across_backends() {
        let g = planar(&[0.0, 1.0, 2.0]);
        let inst = WeightedInstance::uniform(Graph::complete(3), -1.0);
        let a = estimate_rounding(&inst, &g, 2, 3000, 17, 0.5, 1.5, Backend::Sequential).unwrap();
        let b = estimate_rounding(&inst, &g, 2, 3000, 17, 0.5, 1.5, Backend::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(objective(&inst, &a.best_assignment).unwrap(), a.best_value);
        let back: RoundingReport = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn rank_three_mean_matches_series() {
        let t: f64 = 0.5;
        let g = planar(&[0.0, t.acos()]);
        let rep = estimate_rounding(&edge(1.0), &g, 3, 200_000, 8, 1.0, 1.0, Backend::Parallel).unwrap();
        let e3 = er_taylor(3, 512, 128).unwrap().eval(t);
        assert!((rep.mean_value - e3).abs() < 4.0 * rep.std_error, "{} vs {e3}", rep.mean_value);
    }

    #[test]
    fn identity_examples() {
        let cfg = SeriesConfig {
            terms: 512,
            precision_bits: 128,
        };
        let c = identity_check(1, 0.5, 100_000, 1, cfg, Backend::Parallel).unwrap();
        assert!((c.series_value - 1.0 / 3.0).abs() < 1e-12);
        assert!((c.mc_mean - 1.0 / 3.0).abs() < 4.0 * c.std_error);
        let c = identity_check(2, 0.0, 100_000, 2, cfg, Backend::Parallel).unwrap();
        assert!(c.mc_mean.abs() < 4.0 * c.std_error);
        let a = identity_check(2, 0.7, 10_000, 5, cfg, Backend::Sequential).unwrap();
        let b = identity_check(2, 0.7, 10_000, 5, cfg, Backend::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(identity_check(2, 1.5, 10, 0, cfg, Backend::Sequential).is_err());
    }

    #[test]
    fn truncated_rounding_examples() {
        let inst = WeightedInstance::uniform(Graph::cycle(5).unwrap(), -1.0);
        let f = planar(&[0.0, 2.5, 5.0, 7.5, 10.0]);
        let huge = truncated_round(&inst, &f, 3, 1e6, 4, false).unwrap();
        assert!(huge.is_ball());
        assert!((0..5).all(|u| norm(huge.row(u)) < 1e-4));
        for seed in 0..20 {
            let raw = truncated_round(&inst, &f, 2, 2.0, seed, false).unwrap();
            assert!((0..5).all(|u| norm(raw.row(u)) <= 1.0 + 1e-12));
            let lifted = truncated_round(&inst, &f, 2, 2.0, seed, true).unwrap();
            assert!(!lifted.is_ball());
            assert!(lifted.max_norm_deviation() < 1e-12);
            assert!(objective(&inst, &lifted).unwrap() >= objective(&inst, &raw).unwrap() - 1e-12);
        }
    }

    #[test]
    fn algorithm_a_single_edge_and_triangle() {
        let cfg = AlgorithmConfig {
            series: SeriesConfig {
                terms: 256,
                precision_bits: 256,
            },
            ..AlgorithmConfig::default()
        };
        let rep = algorithm_a(&edge(1.0), 1, 2000, 1, ThetaMode::Chromatic(2), &cfg).unwrap();
        let krivine = 2.0 * (1.0 + 2f64.sqrt()).ln() / std::f64::consts::PI;
        assert!((rep.beta - krivine).abs() < 1e-10);
        assert!(rep.rounding.ratio() >= krivine - 4.0 * rep.rounding.std_error);

        let tri = WeightedInstance::uniform(Graph::complete(3), -1.0);
        let rep = algorithm_a(&tri, 1, 4000, 2, ThetaMode::Chromatic(3), &cfg).unwrap();
        assert!(rep.rounding.best_value <= 1.0 + 1e-12);
        assert!((rep.sdp_value - 1.5).abs() < 1e-6);
        assert!(rep.rounding.mean_value >= rep.beta * 1.5 - 4.0 * rep.rounding.std_error);
        let solved = algorithm_a(&tri, 1, 100, 2, ThetaMode::Solve, &cfg).unwrap();
        assert!((solved.lambda - 3.0).abs() < 1e-9);
    }
}

//! n-vector model ground states and XOR game value brackets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{xor_game_instance, WeightedInstance, XorGame};
use crate::rounding::{algorithm_a, AlgorithmConfig, AlgorithmReport};
use crate::sdp::{
    block_ascent, brute_force_rank1, local_search_rank_r, solve_sdp_infinity, UnitVectorAssignment,
    MAX_BRUTE_FORCE_VERTICES,
};
use crate::theta::ThetaMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub r: usize,
    /// `H(h) = -sum A(u,v) h(u).h(v)` of the polished best rounding.
    pub energy: f64,
    /// Energy of the best rounding before polishing.
    pub rounded_energy: f64,
    /// `-(SDP_inf dual bound)`; no spin configuration goes below it.
    pub lower_bound: f64,
    /// `energy / lower_bound`.
    pub ratio: f64,
    /// Mean rounded value over the `SDP_inf` value.
    pub mean_ratio: f64,
    pub state: UnitVectorAssignment,
    pub algorithm: AlgorithmReport,
}

/// Runs the rank-`r` rounding pipeline and polishes the best sample by
/// block-coordinate ascent in dimension `r`.
pub fn ground_state(
    inst: &WeightedInstance,
    r: usize,
    samples: usize,
    seed: u64,
    theta_mode: ThetaMode,
    cfg: &AlgorithmConfig,
) -> Result<GroundStateReport> {
    let algorithm = algorithm_a(inst, r, samples, seed, theta_mode, cfg)?;
    let mut state = algorithm.rounding.best_assignment.clone();
    let (polished, _, _) = block_ascent(inst, &mut state, cfg.sdp_tol, cfg.max_sweeps)?;
    let best = polished.max(algorithm.rounding.best_value);
    if best > polished {
        state = algorithm.rounding.best_assignment.clone();
    }
    let lower_bound = -algorithm.sdp_dual_bound;
    Ok(GroundStateReport {
        r,
        energy: -best,
        rounded_energy: -algorithm.rounding.best_value,
        lower_bound,
        ratio: if lower_bound != 0.0 { -best / lower_bound } else { 1.0 },
        mean_ratio: algorithm.rounding.ratio(),
        state,
        algorithm,
    })
}

/// Largest `r` with `base^r <= d`.
pub fn floor_log(d: u64, base: f64) -> Result<u32> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    if !(base > 1.0) || !base.is_finite() {
        return Err(invalid(format!("log base must exceed 1, got {base}")));
    }
    let mut r = 0u32;
    let mut p = base;
    while p <= d as f64 * (1.0 + 1e-12) {
        r += 1;
        p *= base;
    }
    Ok(r)
}

/// Winning probabilities are `1/2 + (sum over edges of A(u,v) a(u).b(v))` with
/// `A = (-1)^g pi / 2`, so every value `v` of the instance maps to `(1 + 2v) / 2`.
fn win(v: f64) -> f64 {
    0.5 * (1.0 + 2.0 * v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XorGameReport {
    pub s: usize,
    pub t: usize,
    pub d: u64,
    pub log_base: f64,
    pub classical_lower: f64,
    pub classical_upper: f64,
    /// Whether the classical value was found by exhaustive search.
    pub classical_exact: bool,
    /// Rank used for the heuristic entangled lower bound, `floor(log d)`.
    pub entangled_rank: u32,
    /// Heuristic: local search value in rank `entangled_rank`.
    pub entangled_lower: f64,
    pub entangled_upper: f64,
    pub sdp_value: f64,
    pub sdp_dual_bound: f64,
}

/// Brackets for the classical value and the value with `d`-dimensional
/// entanglement. The upper bound uses `SDP_2d <= SDP_inf` and the certified
/// dual bound.
pub fn xor_game_bounds(
    game: &XorGame,
    d: u64,
    log_base: f64,
    restarts: usize,
    seed: u64,
    cfg: &AlgorithmConfig,
) -> Result<XorGameReport> {
    let inst = xor_game_instance(game)?;
    let entangled_rank = floor_log(d, log_base)?;
    let sdp = solve_sdp_infinity(&inst, cfg.sdp_tol, cfg.max_sweeps, seed)?;
    let upper = win(sdp.dual_bound);
    let (classical_lower, classical_upper, classical_exact) = if inst.n() <= MAX_BRUTE_FORCE_VERTICES {
        let (_, opt) = brute_force_rank1(&inst)?;
        (win(opt), win(opt), true)
    } else {
        let (_, v) = local_search_rank_r(&inst, 1, restarts, seed, cfg.backend)?;
        (win(v), upper, false)
    };
    let entangled_lower = if entangled_rank == 0 {
        classical_lower
    } else {
        let (_, v) = local_search_rank_r(&inst, entangled_rank as usize, restarts, seed, cfg.backend)?;
        win(v).max(classical_lower)
    };
    Ok(XorGameReport {
        s: game.s(),
        t: game.t(),
        d,
        log_base,
        classical_lower,
        classical_upper,
        classical_exact,
        entangled_rank,
        entangled_lower,
        entangled_upper: upper,
        sdp_value: sdp.value,
        sdp_dual_bound: sdp.dual_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::SeriesConfig;
    use crate::graph::Graph;

    fn cfg() -> AlgorithmConfig {
        AlgorithmConfig {
            series: SeriesConfig {
                terms: 256,
                precision_bits: 256,
            },
            ..AlgorithmConfig::default()
        }
    }

    #[test]
    fn floor_log_values() {
        assert_eq!(floor_log(1, 2.0).unwrap(), 0);
        assert_eq!(floor_log(2, 2.0).unwrap(), 1);
        assert_eq!(floor_log(7, 2.0).unwrap(), 2);
        assert_eq!(floor_log(8, 2.0).unwrap(), 3);
        assert_eq!(floor_log(1000, 10.0).unwrap(), 3);
        assert_eq!(floor_log(7, std::f64::consts::E).unwrap(), 1);
        assert!(floor_log(0, 2.0).is_err());
        assert!(floor_log(4, 1.0).is_err());
    }

    #[test]
    fn chsh_brackets() {
        let rep = xor_game_bounds(&XorGame::chsh(), 2, 2.0, 20, 0, &cfg()).unwrap();
        assert!(rep.classical_exact);
        assert!((rep.classical_lower - 0.75).abs() < 1e-15);
        let tsirelson = 0.5 * (1.0 + 0.5f64.sqrt());
        assert!((rep.entangled_upper - tsirelson).abs() < 1e-6);
        assert_eq!(rep.entangled_rank, 1);
        assert!(rep.entangled_lower <= rep.entangled_upper + 1e-12);
    }

    #[test]
    fn trivial_game_has_value_one() {
        let game = XorGame::new(vec![vec![0.25; 2]; 2], vec![vec![0; 2]; 2]).unwrap();
        let rep = xor_game_bounds(&game, 4, 2.0, 10, 0, &cfg()).unwrap();
        for v in [rep.classical_lower, rep.classical_upper, rep.entangled_lower, rep.entangled_upper] {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn ground_state_examples() {
        let edge = WeightedInstance::from_weighted_edges(2, &[(0, 1, 1.0)]).unwrap();
        let rep = ground_state(&edge, 3, 50, 0, ThetaMode::Chromatic(2), &cfg()).unwrap();
        assert!((rep.energy + 1.0).abs() < 1e-12);
        let tri = WeightedInstance::uniform(Graph::complete(3), -1.0);
        let rep = ground_state(&tri, 2, 500, 0, ThetaMode::Solve, &cfg()).unwrap();
        assert!(rep.energy >= -1.5 - 1e-9);
        assert!(rep.energy <= -1.45);
        assert!(rep.lower_bound <= rep.energy + 1e-12);
    }
}

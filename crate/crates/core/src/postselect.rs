//! Key-rate upper bound with random postselection of the key rounds.
//!
//! Alice bins her no-click onto outcome 1 and keeps each '1' with probability
//! q; Bob keeps each of his '1' and no-click outcomes with probability q.
//! Surviving rounds are renormalized. The bound is the kept fraction times
//! the privacy-amplification/error-correction gap on the kept data.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::correlations::{
    apply_detection_efficiency, chsh_family_strategy, correlation_from_qubit_strategy,
    golden_section_max, QubitStrategy,
};
use crate::error::{Error, Result};
use crate::infotheory::{binary_entropy_clamped, JointDistribution};
use crate::localset::{max_local_weight, CcDecomposition};
use crate::thresholds::nelder_mead_max;

/// Postselection parameters. The binning/postselection target is fixed to
/// outcome 1: '0' outcomes are always kept.
#[derive(Debug, Clone, Copy)]
pub struct PostselectParams {
    /// Probability with which a designated outcome survives.
    pub accept: f64,
}

impl PostselectParams {
    pub fn new(accept: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&accept) {
            return Err(Error::InvalidParameter(format!(
                "acceptance probability {accept} outside [0, 1]"
            )));
        }
        Ok(Self { accept })
    }
}

/// Alice's key table after binning her no-click onto 1, with Bob untouched:
/// a 2 x 3 joint over (A', B).
pub fn alice_binned_key_table(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
    mirrored: bool,
) -> Result<JointDistribution> {
    let scenario = dec.scenario();
    if scenario.outcomes_a != 3 || scenario.outcomes_b != 3 {
        return Err(Error::InvalidParameter(
            "postselection applies to the lossy three-outcome scenario".into(),
        ));
    }
    let observed = dec.observed.as_ref().expect("decomposition keeps its observed correlation");
    let table = observed.key_table(key_x, key_y)?;
    let relabel = |v: usize| if mirrored && v < 2 { 1 - v } else { v };
    let mut out = vec![0.0; 2 * 3];
    for a in 0..3 {
        for b in 0..3 {
            let ra = relabel(a);
            let rb = relabel(b);
            let binned_a = if ra == 2 { 1 } else { ra };
            out[binned_a * 3 + rb] += table[a * 3 + b];
        }
    }
    JointDistribution::new(vec![2, 3], out)
}

/// Thins the binned table by the acceptance rule and renormalizes. Returns
/// the postselected table and the success probability.
pub fn postselected_correlation(
    binned: &JointDistribution,
    params: PostselectParams,
) -> Result<(JointDistribution, f64)> {
    if binned.shape() != [2, 3] {
        return Err(Error::DimensionMismatch(
            "expected a 2 x 3 Alice-binned key table".into(),
        ));
    }
    let q = params.accept;
    let alice_keep = [1.0, q];
    let bob_keep = [1.0, q, q];
    let mut kept = [0.0; 6];
    let mut total = 0.0;
    for a in 0..2 {
        for b in 0..3 {
            let w = alice_keep[a] * bob_keep[b] * binned.prob(&[a, b]);
            kept[a * 3 + b] = w;
            total += w;
        }
    }
    if total <= 1e-15 {
        return Err(Error::DegeneratePostselection);
    }
    let normalized: Vec<f64> = kept.iter().map(|w| w / total).collect();
    Ok((JointDistribution::new(vec![2, 3], normalized)?, total))
}

/// Error-correction cost H(A|B) on the postselected table. Zero-mass columns
/// of Bob contribute nothing.
pub fn ps_ec_term(ps_table: &JointDistribution) -> Result<f64> {
    if ps_table.shape() != [2, 3] {
        return Err(Error::DimensionMismatch(
            "expected a 2 x 3 postselected key table".into(),
        ));
    }
    ps_table.conditional_entropy(0, &[1])
}

/// The 2 x 2 key tables entering the privacy-amplification term: the anchor
/// mixture and the local-round table, both with every no-click binned onto 1.
struct BinnedSplit {
    anchor: [f64; 4],
    local: [f64; 4],
}

fn binned_split(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
    mirrored: bool,
) -> Result<BinnedSplit> {
    let scenario = dec.scenario();
    if scenario.outcomes_a != 3 || scenario.outcomes_b != 3 {
        return Err(Error::InvalidParameter(
            "postselection applies to the lossy three-outcome scenario".into(),
        ));
    }
    let relabel = |v: usize| if mirrored && v < 2 { 1 - v } else { v };
    let bin = |v: usize| if v == 2 { 1 } else { v };

    // anchors carry no no-click mass, so binning is trivial for them
    let anchor_table = dec.anchor_key_table(key_x, key_y)?;
    let mut anchor = [0.0; 4];
    for a in 0..3 {
        for b in 0..3 {
            let cell = anchor_table[a * 3 + b];
            if cell != 0.0 {
                anchor[bin(relabel(a)) * 2 + bin(relabel(b))] += cell;
            }
        }
    }

    // local table from the reconstruction: observed minus nonlocal part
    let observed = dec.observed.as_ref().expect("decomposition keeps its observed correlation");
    let table = observed.key_table(key_x, key_y)?;
    let nonlocal = 1.0 - dec.local_weight;
    let mut local = [0.0; 4];
    if dec.local_weight > 1e-12 {
        let mut binned_obs = [0.0; 4];
        for a in 0..3 {
            for b in 0..3 {
                binned_obs[bin(relabel(a)) * 2 + bin(relabel(b))] += table[a * 3 + b];
            }
        }
        for k in 0..4 {
            let v = (binned_obs[k] - nonlocal * anchor[k]) / dec.local_weight;
            if v < -1e-10 {
                return Err(Error::InconsistentDecomposition(format!(
                    "local key table entry {v:.3e} is negative"
                )));
            }
            local[k] = v.max(0.0);
        }
    }
    Ok(BinnedSplit { anchor, local })
}

/// Privacy-amplification term H(A|E) on the postselected data.
///
/// Eve learns both outcomes in local rounds, so only the nonlocal rounds that
/// survive postselection contribute: their conditional fraction times the
/// binary entropy of Alice's kept nonlocal bit.
pub fn ps_pa_term(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
    params: PostselectParams,
) -> Result<f64> {
    ps_pa_term_oriented(dec, key_x, key_y, params, false)
}

pub(crate) fn ps_pa_term_oriented(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
    params: PostselectParams,
    mirrored: bool,
) -> Result<f64> {
    let split = binned_split(dec, key_x, key_y, mirrored)?;
    let q = params.accept;
    let survive = |t: &[f64; 4]| t[0] + q * (t[1] + t[2]) + q * q * t[3];
    let nonlocal = 1.0 - dec.local_weight;
    let p_keep_nonlocal = survive(&split.anchor);
    let p_keep = nonlocal * p_keep_nonlocal + dec.local_weight * survive(&split.local);
    if p_keep <= 1e-15 {
        return Err(Error::DegeneratePostselection);
    }
    if nonlocal <= 1e-15 || p_keep_nonlocal <= 1e-15 {
        return Ok(0.0);
    }
    let alice_zero = (split.anchor[0] + q * split.anchor[1]) / p_keep_nonlocal;
    Ok(nonlocal * (p_keep_nonlocal / p_keep) * binary_entropy_clamped(alice_zero))
}

/// Postselected key-rate upper bound: success probability times the
/// privacy-amplification/error-correction gap of the kept data.
pub fn ps_rate_upper_bound(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
    params: PostselectParams,
) -> Result<f64> {
    ps_rate_oriented(dec, key_x, key_y, params, false)
}

pub(crate) fn ps_rate_oriented(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
    params: PostselectParams,
    mirrored: bool,
) -> Result<f64> {
    let binned = alice_binned_key_table(dec, key_x, key_y, mirrored)?;
    let (ps_table, p_keep) = postselected_correlation(&binned, params)?;
    let ec = ps_ec_term(&ps_table)?;
    let pa = ps_pa_term_oriented(dec, key_x, key_y, params, mirrored)?;
    Ok(p_keep * (pa - ec))
}

/// Best postselected configuration found by the heuristic search.
#[derive(Debug, Clone)]
pub struct PsOptimum {
    pub theta: f64,
    pub strategy: QubitStrategy,
    pub accept: f64,
    /// True when the outcome labels were mirrored, i.e. the no-click is
    /// binned onto the majority outcome before thinning it.
    pub mirrored: bool,
    pub bound: f64,
}

/// Maximizes the postselected bound over the state angle, Alice's test angle
/// (Bob's test angles tied to it in closed form), the acceptance probability
/// and the binning orientation. Nelder-Mead restarts from a deterministic
/// grid of seeds; the maximal-entanglement default configuration is always
/// among them.
pub fn optimize_ps(eta: f64, seed: u64, restarts: usize) -> Result<PsOptimum> {
    if !(0.0 < eta && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("efficiency {eta} outside (0, 1]")));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart".into()));
    }
    let decompose = |theta: f64, phi_a: f64| -> Result<CcDecomposition> {
        let strategy = chsh_family_strategy(theta, eta, phi_a);
        let ideal = correlation_from_qubit_strategy(&strategy)?;
        let anchor = apply_detection_efficiency(&ideal, 1.0)?;
        let observed = apply_detection_efficiency(&ideal, eta)?;
        max_local_weight(&observed, &[anchor])
    };
    let rate = |theta: f64, phi_a: f64, accept: f64, mirrored: bool| -> f64 {
        if !(1e-4..=std::f64::consts::FRAC_PI_2).contains(&theta)
            || !(0.0..=std::f64::consts::FRAC_PI_2).contains(&phi_a)
            || !(1e-9..=1.0).contains(&accept)
        {
            return -1.0;
        }
        let Ok(dec) = decompose(theta, phi_a) else {
            return -1.0;
        };
        ps_rate_oriented(&dec, 0, 2, PostselectParams { accept }, mirrored).unwrap_or(-1.0)
    };

    let logit = |q: f64| (q / (1.0 - q + 1e-12)).ln();
    let sigmoid = |l: f64| 1.0 / (1.0 + (-l).exp());

    let mut best: Option<PsOptimum> = None;
    let consider = |theta: f64, phi_a: f64, accept: f64, mirrored: bool, bound: f64,
                        best: &mut Option<PsOptimum>| {
        if best.as_ref().is_none_or(|b| bound > b.bound) {
            *best = Some(PsOptimum {
                theta,
                strategy: chsh_family_strategy(theta, eta, phi_a),
                accept,
                mirrored,
                bound,
            });
        }
    };

    // deterministic seed grid; the optimal test angle per theta seeds phi_a
    let mut seeds: Vec<(f64, f64, f64, bool)> = Vec::new();
    let theta_grid = [
        0.005, 0.01, 0.02, 0.04, 0.08, 0.15, 0.3, 0.6, 1.0, std::f64::consts::FRAC_PI_2,
    ];
    for &theta in &theta_grid {
        let phi_star = golden_section_max(
            |phi| {
                let s = chsh_family_strategy(theta, eta, phi);
                crate::correlations::s_det(&s, eta).unwrap_or(f64::NEG_INFINITY)
            },
            0.0,
            std::f64::consts::FRAC_PI_2,
            1e-8,
        );
        for &q in &[0.01, 0.05, 0.2, 0.5, 1.0 - 1e-6] {
            for &mirrored in &[false, true] {
                seeds.push((theta, phi_star, q, mirrored));
            }
        }
    }
    let mut scored: Vec<((f64, f64, f64, bool), f64)> = seeds
        .into_iter()
        .map(|s| (s, rate(s.0, s.1, s.2, s.3)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    for &((theta, phi_a, q, mirrored), value) in &scored {
        consider(theta, phi_a, q, mirrored, value, &mut best);
    }

    // Nelder-Mead polish from the best seeds plus random restarts
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top: Vec<(f64, f64, f64, bool)> =
        scored.iter().take(restarts.min(scored.len())).map(|(s, _)| *s).collect();
    for restart in 0..restarts {
        let (theta0, phi0, q0, mirrored) = if restart < top.len() {
            top[restart]
        } else {
            (
                rng.random_range(0.005..1.2),
                rng.random_range(0.0..1.2),
                rng.random_range(0.01..0.99),
                rng.random_range(0..2) == 1,
            )
        };
        let objective = |x: &[f64]| rate(x[0], x[1], sigmoid(x[2]), mirrored);
        let start = [theta0, phi0, logit(q0.clamp(1e-6, 1.0 - 1e-6))];
        let (params, value) = nelder_mead_max(&objective, &start, 0.15, 160);
        consider(params[0], params[1], sigmoid(params[2]), mirrored, value, &mut best);
    }

    Ok(best.expect("seed grid is non-empty"))
}

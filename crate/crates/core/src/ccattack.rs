//! The convex-combination attack: Eve's tripartite view of the key settings
//! and the one-way key-rate upper bound for arbitrary preprocessing.
//!
//! In local rounds Eve distributes a deterministic vertex and knows both
//! outcomes; her symbol is the pair (a, b). In nonlocal rounds she distributes
//! an anchor correlation and learns nothing; her symbol is the reserved "?".
//! The one-way bound is H(A'|E, M) - H(A'|B, M): the privacy-amplification
//! budget minus the error-correction cost of Alice's processed key variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::{shannon_entropy, JointDistribution, StochasticMap};
use crate::localset::{CcDecomposition, DeterministicVertex};

/// One symbol of Eve's alphabet: a guessed outcome pair or ignorance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveSymbol {
    Pair(usize, usize),
    Unknown,
}

/// Joint distribution over (A, B, E) at the key settings. Eve's axis holds
/// the nA*nB outcome pairs in lexicographic order followed by "?".
#[derive(Debug, Clone)]
pub struct TripartiteDistribution {
    pub joint: JointDistribution,
    outcomes_a: usize,
    outcomes_b: usize,
}

impl TripartiteDistribution {
    /// Decodes an Eve-axis index.
    pub fn eve_symbol(&self, e: usize) -> EveSymbol {
        if e == self.eve_unknown_index() {
            EveSymbol::Unknown
        } else {
            EveSymbol::Pair(e / self.outcomes_b, e % self.outcomes_b)
        }
    }

    pub fn outcomes_a(&self) -> usize {
        self.outcomes_a
    }

    pub fn outcomes_b(&self) -> usize {
        self.outcomes_b
    }

    /// Eve-axis index of the pair symbol (a, b).
    pub fn eve_pair_index(&self, a: usize, b: usize) -> usize {
        a * self.outcomes_b + b
    }

    /// Eve-axis index of the ignorance symbol.
    pub fn eve_unknown_index(&self) -> usize {
        self.outcomes_a * self.outcomes_b
    }

    /// Mass on the ignorance symbol.
    pub fn unknown_mass(&self) -> f64 {
        let e = self.eve_unknown_index();
        let mut total = 0.0;
        for a in 0..self.outcomes_a {
            for b in 0..self.outcomes_b {
                total += self.joint.prob(&[a, b, e]);
            }
        }
        total
    }
}

/// Alice's preprocessing: a stochastic map on her key outcome, optionally
/// followed by a second map whose output is announced publicly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessingStrategy {
    pub name: String,
    /// Map from A to the kept variable A'.
    #[serde(rename = "mapAtoAprime")]
    pub map_keep: StochasticMap,
    /// Optional map from A' to the announced message M.
    #[serde(rename = "mapAprimeToM", default)]
    pub map_announce: Option<StochasticMap>,
}

impl PreprocessingStrategy {
    pub fn custom(
        name: impl Into<String>,
        map_keep: StochasticMap,
        map_announce: Option<StochasticMap>,
    ) -> Result<Self> {
        if let Some(announce) = &map_announce {
            if announce.cols() != map_keep.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "announce map expects {} inputs, keep map outputs {}",
                    announce.cols(),
                    map_keep.rows()
                )));
            }
        }
        Ok(Self { name: name.into(), map_keep, map_announce })
    }

    /// Identity on `n` outcomes.
    pub fn none(n: usize) -> Self {
        Self {
            name: "none".into(),
            map_keep: StochasticMap::identity(n),
            map_announce: None,
        }
    }

    /// Bins the trailing no-click outcome onto `target`; other outcomes pass
    /// through. For `n = 2` there is nothing to bin and this is the identity.
    pub fn det_bin(n: usize, target: usize) -> Result<Self> {
        let map_keep = det_bin_map(n, target)?;
        Ok(Self { name: "det".into(), map_keep, map_announce: None })
    }

    /// Deterministic binning followed by a symmetric bit-flip of strength `p`.
    pub fn det_bin_np(n: usize, target: usize, flip: f64) -> Result<Self> {
        let base = det_bin_map(n, target)?;
        let map_keep = compose(&bit_flip_map(base.rows(), flip)?, &base)?;
        Ok(Self { name: "det-np".into(), map_keep, map_announce: None })
    }

    /// Bins the no-click outcome uniformly at random onto the real outcomes.
    pub fn rand_bin(n: usize) -> Result<Self> {
        Ok(Self { name: "rand".into(), map_keep: rand_bin_map(n)?, map_announce: None })
    }

    /// Random binning followed by a symmetric bit-flip of strength `p`.
    pub fn rand_bin_np(n: usize, flip: f64) -> Result<Self> {
        let base = rand_bin_map(n)?;
        let map_keep = compose(&bit_flip_map(base.rows(), flip)?, &base)?;
        Ok(Self { name: "rand-np".into(), map_keep, map_announce: None })
    }

    /// Keeps A untouched and publicly announces whether it was a no-click:
    /// the message merges all real outcomes and singles out the last one.
    pub fn announce_noclick(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("alphabet too small".into()));
        }
        let mut assign = vec![0usize; n];
        assign[n - 1] = 1;
        Ok(Self {
            name: "announce".into(),
            map_keep: StochasticMap::identity(n),
            map_announce: Some(StochasticMap::deterministic(2, &assign)?),
        })
    }
}

fn det_bin_map(n: usize, target: usize) -> Result<StochasticMap> {
    if n < 2 {
        return Err(Error::InvalidParameter("alphabet too small".into()));
    }
    if n == 2 {
        return Ok(StochasticMap::identity(2));
    }
    if target >= n - 1 {
        return Err(Error::InvalidParameter(format!(
            "bin target {target} out of range for {} real outcomes",
            n - 1
        )));
    }
    let mut assign: Vec<usize> = (0..n - 1).collect();
    assign.push(target);
    StochasticMap::deterministic(n - 1, &assign)
}

fn rand_bin_map(n: usize) -> Result<StochasticMap> {
    if n < 3 {
        return Err(Error::InvalidParameter(
            "random binning needs a no-click outcome".into(),
        ));
    }
    let real = n - 1;
    let mut entries = vec![0.0; real * n];
    for o in 0..real {
        entries[o * n + o] = 1.0;
        entries[o * n + (n - 1)] = 1.0 / real as f64;
    }
    StochasticMap::new(real, n, entries)
}

fn bit_flip_map(n: usize, flip: f64) -> Result<StochasticMap> {
    if n != 2 {
        return Err(Error::InvalidParameter(
            "bit flip applies to binary variables".into(),
        ));
    }
    if !(0.0..=1.0).contains(&flip) {
        return Err(Error::InvalidParameter(format!("flip {flip} outside [0, 1]")));
    }
    StochasticMap::new(2, 2, vec![1.0 - flip, flip, flip, 1.0 - flip])
}

/// Composition second(first(.)), column-stochastic by construction.
fn compose(second: &StochasticMap, first: &StochasticMap) -> Result<StochasticMap> {
    if second.cols() != first.rows() {
        return Err(Error::DimensionMismatch("map composition mismatch".into()));
    }
    let rows = second.rows();
    let cols = first.cols();
    let mut entries = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut v = 0.0;
            for k in 0..first.rows() {
                v += second.entry(r, k) * first.entry(k, c);
            }
            entries[r * cols + c] = v;
        }
    }
    StochasticMap::new(rows, cols, entries)
}

/// Eve's tripartite distribution at the key settings: each vertex places its
/// weight at (a, b, (a, b)); each anchor places its weighted key table at
/// (a, b, ?).
pub fn build_tripartite(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
) -> Result<TripartiteDistribution> {
    let scenario = dec.scenario();
    if key_x >= scenario.settings_a || key_y >= scenario.settings_b {
        return Err(Error::InvalidParameter(format!(
            "key settings ({key_x}, {key_y}) out of range"
        )));
    }
    let na = scenario.outcomes_a;
    let nb = scenario.outcomes_b;
    let ne = na * nb + 1;
    let mut probs = vec![0.0; na * nb * ne];
    let at = |a: usize, b: usize, e: usize| (a * nb + b) * ne + e;
    for &(index, w) in &dec.vertex_weights {
        let v = DeterministicVertex::from_index(&scenario, index);
        let a = v.alice_assign[key_x];
        let b = v.bob_assign[key_y];
        probs[at(a, b, a * nb + b)] += w;
    }
    for (anchor, &w) in dec.anchors.iter().zip(&dec.nonlocal_weights) {
        let table = anchor.key_table(key_x, key_y)?;
        for a in 0..na {
            for b in 0..nb {
                probs[at(a, b, na * nb)] += w * table[a * nb + b];
            }
        }
    }
    Ok(TripartiteDistribution {
        joint: JointDistribution::new(vec![na, nb, ne], probs)?,
        outcomes_a: na,
        outcomes_b: nb,
    })
}

/// The observed key-setting table of a decomposition as a two-axis joint.
pub fn observed_key_joint(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
) -> Result<JointDistribution> {
    let scenario = dec.scenario();
    let observed = dec.observed.as_ref().expect("decomposition keeps its observed correlation");
    JointDistribution::new(
        vec![scenario.outcomes_a, scenario.outcomes_b],
        observed.key_table(key_x, key_y)?,
    )
}

/// Error-correction cost H(A'|B, M) on the observed key table after Alice's
/// preprocessing. Bob's outcome is left untouched; when no message map is
/// present this is plain H(A'|B).
pub fn ec_term(key_table: &JointDistribution, strat: &PreprocessingStrategy) -> Result<f64> {
    if key_table.axes() != 2 {
        return Err(Error::DimensionMismatch(
            "key table must have axes (A, B)".into(),
        ));
    }
    let mapped = key_table.apply_map(&strat.map_keep, 0)?;
    match &strat.map_announce {
        None => mapped.conditional_entropy(0, &[1]),
        Some(announce) => {
            let with_m = extend_with_message(&mapped, announce, 0)?;
            // axes: (A', B, M)
            with_m.conditional_entropy(0, &[1, 2])
        }
    }
}

/// Privacy-amplification budget H(A'|E, M).
///
/// Without a message map this evaluates the convex split directly: the
/// nonlocal rounds contribute the entropy of the mapped anchor marginal, and
/// the local rounds contribute the column entropies of the keep-map weighted
/// by Eve's conditional view of A. With a message map the joint over
/// (A', E, M) is built explicitly.
pub fn pa_term(
    dec: &CcDecomposition,
    strat: &PreprocessingStrategy,
    key_x: usize,
    key_y: usize,
) -> Result<f64> {
    let scenario = dec.scenario();
    let na = scenario.outcomes_a;
    if strat.map_keep.cols() != na {
        return Err(Error::DimensionMismatch(format!(
            "keep map expects {} inputs, Alice has {na} outcomes",
            strat.map_keep.cols()
        )));
    }
    let local = dec.local_weight;
    let nonlocal = 1.0 - local;
    match &strat.map_announce {
        None => {
            let mut total = 0.0;
            if nonlocal > 1e-15 {
                let anchor_table = dec.anchor_key_table(key_x, key_y)?;
                let nb = scenario.outcomes_b;
                let mut marginal = vec![0.0; na];
                for a in 0..na {
                    for b in 0..nb {
                        marginal[a] += anchor_table[a * nb + b];
                    }
                }
                total += nonlocal * shannon_entropy(&strat.map_keep.apply_to_vec(&marginal)?);
            }
            if local > 1e-15 {
                let eve_view = dec.local_alice_marginal(key_x)?;
                let mut local_part = 0.0;
                for (symbol, &weight) in eve_view.iter().enumerate() {
                    if weight > 1e-15 {
                        local_part += weight * strat.map_keep.column_entropy(symbol);
                    }
                }
                total += local * local_part;
            }
            Ok(total)
        }
        Some(announce) => {
            let tri = build_tripartite(dec, key_x, key_y)?;
            let ae = JointDistribution::new(
                vec![na, na * scenario.outcomes_b + 1],
                tri.joint.marginal(&[0, 2])?,
            )?;
            let mapped = ae.apply_map(&strat.map_keep, 0)?;
            let with_m = extend_with_message(&mapped, announce, 0)?;
            // axes: (A', E, M)
            with_m.conditional_entropy(0, &[1, 2])
        }
    }
}

/// Appends a message axis generated from axis `source` by the announce map:
/// p(..., m) = announce(m | value at source) p(...).
fn extend_with_message(
    joint: &JointDistribution,
    announce: &StochasticMap,
    source: usize,
) -> Result<JointDistribution> {
    let shape = joint.shape().to_vec();
    if announce.cols() != shape[source] {
        return Err(Error::DimensionMismatch(format!(
            "announce map expects {} inputs, axis has {}",
            announce.cols(),
            shape[source]
        )));
    }
    let mut out_shape = shape.clone();
    out_shape.push(announce.rows());
    let m_count = announce.rows();
    let mut out = vec![0.0; joint.probs().len() * m_count];
    let mut idx = vec![0usize; shape.len()];
    for (flat, &p) in joint.probs().iter().enumerate() {
        let mut rem = flat;
        for k in (0..shape.len()).rev() {
            idx[k] = rem % shape[k];
            rem /= shape[k];
        }
        let source_val = idx[source];
        for m in 0..m_count {
            let w = announce.entry(m, source_val);
            if w != 0.0 {
                out[flat * m_count + m] = w * p;
            }
        }
    }
    JointDistribution::new(out_shape, out)
}

/// One-way key-rate upper bound H(A'|E, M) - H(A'|B, M); may be negative.
pub fn one_way_bound(
    dec: &CcDecomposition,
    strat: &PreprocessingStrategy,
    key_x: usize,
    key_y: usize,
) -> Result<f64> {
    let key_table = observed_key_joint(dec, key_x, key_y)?;
    Ok(pa_term(dec, strat, key_x, key_y)? - ec_term(&key_table, strat)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{
        apply_detection_efficiency, apply_visibility, correlation_from_qubit_strategy,
        QubitStrategy,
    };
    use crate::infotheory::binary_entropy;
    use crate::localset::{local_weight_maxent_eta, max_local_weight};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    fn maxent_2333(eta: f64) -> CcDecomposition {
        let strat = QubitStrategy::new(
            FRAC_PI_2,
            vec![0.0, FRAC_PI_2],
            vec![FRAC_PI_4, -FRAC_PI_4, 0.0],
        )
        .unwrap();
        let ideal = correlation_from_qubit_strategy(&strat).unwrap();
        let anchor = apply_detection_efficiency(&ideal, 1.0).unwrap();
        let observed = apply_detection_efficiency(&ideal, eta).unwrap();
        max_local_weight(&observed, &[anchor]).unwrap()
    }

    fn maxent_2322(visibility: f64) -> CcDecomposition {
        let strat = QubitStrategy::new(
            FRAC_PI_2,
            vec![0.0, FRAC_PI_2],
            vec![FRAC_PI_4, -FRAC_PI_4, 0.0],
        )
        .unwrap();
        let ideal = correlation_from_qubit_strategy(&strat).unwrap();
        let observed = apply_visibility(&ideal, visibility).unwrap();
        max_local_weight(&observed, &[ideal]).unwrap()
    }

    #[test]
    fn tripartite_marginal_recovers_the_key_table_and_unknown_mass() {
        let dec = maxent_2333(0.9);
        let tri = build_tripartite(&dec, 0, 2).unwrap();
        let observed = observed_key_joint(&dec, 0, 2).unwrap();
        let marginal = tri.joint.marginal(&[0, 1]).unwrap();
        for (m, o) in marginal.iter().zip(observed.probs()) {
            assert_close(*m, *o, 1e-9);
        }
        assert_close(tri.unknown_mass(), 1.0 - dec.local_weight, 1e-9);
    }

    #[test]
    fn no_clicks_happen_only_in_local_rounds() {
        let dec = maxent_2333(0.9);
        let tri = build_tripartite(&dec, 0, 2).unwrap();
        // double no-click sits with Eve knowing the pair
        let e_pair = tri.eve_pair_index(2, 2);
        assert_close(tri.joint.prob(&[2, 2, e_pair]), 0.01, 1e-9);
        let unknown = tri.eve_unknown_index();
        for b in 0..3 {
            assert_close(tri.joint.prob(&[2, b, unknown]), 0.0, 1e-12);
            assert_close(tri.joint.prob(&[b, 2, unknown]), 0.0, 1e-12);
        }
    }

    #[test]
    fn ec_term_matches_the_closed_form_for_det_binning() {
        let eta = 0.9;
        let dec = maxent_2333(eta);
        let key = observed_key_joint(&dec, 0, 2).unwrap();
        let det = PreprocessingStrategy::det_bin(3, 0).unwrap();
        let expected = (eta / 2.0) * binary_entropy(eta).unwrap()
            + (1.0 - eta) * binary_entropy(eta / 2.0).unwrap();
        assert_close(ec_term(&key, &det).unwrap(), expected, 1e-12);
        assert_close(expected, 0.3103254625139573, 1e-10);
    }

    #[test]
    fn ec_term_matches_the_closed_form_without_preprocessing() {
        let eta: f64 = 0.9;
        let dec = maxent_2333(eta);
        let key = observed_key_joint(&dec, 0, 2).unwrap();
        let none = PreprocessingStrategy::none(3);
        let h3 = |ps: &[f64]| shannon_entropy(ps);
        let expected = eta * 0.5 * h3(&[eta, 0.0, 1.0 - eta])
            + eta * 0.5 * h3(&[0.0, eta, 1.0 - eta])
            + (1.0 - eta) * h3(&[eta * 0.5, eta * 0.5, 1.0 - eta]);
        assert_close(ec_term(&key, &none).unwrap(), expected, 1e-12);
    }

    #[test]
    fn deterministic_strategies_have_no_local_leak_term() {
        let dec = maxent_2333(0.9);
        let local_weight = dec.local_weight;
        let det = PreprocessingStrategy::det_bin(3, 0).unwrap();
        // PA for det binning is (1 - qL) h(1/2) = 1 - qL
        assert_close(pa_term(&dec, &det, 0, 2).unwrap(), 1.0 - local_weight, 1e-10);
        let none = PreprocessingStrategy::none(3);
        assert_close(pa_term(&dec, &none, 0, 2).unwrap(), 1.0 - local_weight, 1e-10);
    }

    #[test]
    fn noisy_preprocessing_pa_matches_the_closed_form() {
        let dec = maxent_2333(0.9);
        let ql = dec.local_weight;
        for &p in &[0.1, 0.3, 0.5] {
            let np = PreprocessingStrategy::det_bin_np(3, 0, p).unwrap();
            let expected = (1.0 - ql) + ql * binary_entropy(p).unwrap();
            assert_close(pa_term(&dec, &np, 0, 2).unwrap(), expected, 1e-10);
        }
    }

    #[test]
    fn random_binning_pa_matches_the_closed_form() {
        let eta: f64 = 0.9;
        let dec = maxent_2333(eta);
        let ql = dec.local_weight;
        let rand = PreprocessingStrategy::rand_bin(3).unwrap();
        let expected = (1.0 - ql) + (1.0 - eta);
        assert_close(pa_term(&dec, &rand, 0, 2).unwrap(), expected, 1e-9);
        assert_close(expected, 0.47544155877284306, 1e-8);
    }

    #[test]
    fn one_way_bound_matches_the_lossy_closed_form_on_a_grid() {
        let s2 = SQRT_2;
        for i in 0..50 {
            let eta = 0.84 + 0.16 * (i as f64) / 49.0;
            let dec = maxent_2333(eta);
            let det = PreprocessingStrategy::det_bin(3, 0).unwrap();
            let bound = one_way_bound(&dec, &det, 0, 2).unwrap();
            let closed = (3.0 + 2.0 * s2) * eta * eta
                - 2.0 * (1.0 + s2) * eta
                - (eta / 2.0) * binary_entropy(eta).unwrap()
                - (1.0 - eta) * binary_entropy(eta / 2.0).unwrap();
            assert_close(bound, closed, 1e-9);
        }
    }

    #[test]
    fn one_way_bound_at_reference_points() {
        let dec = maxent_2333(0.9);
        let det = PreprocessingStrategy::det_bin(3, 0).unwrap();
        assert_close(one_way_bound(&dec, &det, 0, 2).unwrap(), 0.06511609625888526, 1e-9);

        let decv = maxent_2322(0.9);
        let none = PreprocessingStrategy::none(2);
        let closed = 0.9 * (2.0 + SQRT_2) - binary_entropy(0.95).unwrap() - SQRT_2 - 1.0;
        assert_close(one_way_bound(&decv, &none, 0, 2).unwrap(), closed, 1e-9);
        assert_close(closed, 0.37218168664673423, 1e-10);
    }

    #[test]
    fn announcing_no_clicks_matches_the_closed_form() {
        for &eta in &[0.87, 0.9, 0.95] {
            let dec = maxent_2333(eta);
            let announce = PreprocessingStrategy::announce_noclick(3).unwrap();
            let bound = one_way_bound(&dec, &announce, 0, 2).unwrap();
            let ql = local_weight_maxent_eta(eta).unwrap();
            let closed = 1.0 - ql - eta * (1.0 - eta);
            assert_close(bound, closed, 1e-9);
        }
    }

    #[test]
    fn noisy_preprocessing_bound_is_symmetric_and_continuous_in_p() {
        let dec = maxent_2333(0.9);
        for &p in &[0.05, 0.2, 0.35] {
            let up = PreprocessingStrategy::det_bin_np(3, 0, 0.5 + p).unwrap();
            let down = PreprocessingStrategy::det_bin_np(3, 0, 0.5 - p).unwrap();
            let bu = one_way_bound(&dec, &up, 0, 2).unwrap();
            let bd = one_way_bound(&dec, &down, 0, 2).unwrap();
            assert_close(bu, bd, 1e-10);
        }
        // continuity near p = 1/2
        let near = PreprocessingStrategy::det_bin_np(3, 0, 0.5 + 1e-6).unwrap();
        let at = PreprocessingStrategy::det_bin_np(3, 0, 0.5).unwrap();
        let bn = one_way_bound(&dec, &near, 0, 2).unwrap();
        let ba = one_way_bound(&dec, &at, 0, 2).unwrap();
        assert!((bn - ba).abs() < 1e-9);
    }

    #[test]
    fn key_setting_choice_does_not_move_the_2233_bound() {
        let strat = QubitStrategy::new(
            FRAC_PI_2,
            vec![0.0, FRAC_PI_2],
            vec![FRAC_PI_4, -FRAC_PI_4],
        )
        .unwrap();
        let ideal = correlation_from_qubit_strategy(&strat).unwrap();
        let anchor = apply_detection_efficiency(&ideal, 1.0).unwrap();
        let observed = apply_detection_efficiency(&ideal, 0.96).unwrap();
        let dec = max_local_weight(&observed, &[anchor]).unwrap();
        let det = PreprocessingStrategy::det_bin(3, 0).unwrap();
        let bounds: Vec<f64> = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(x, y)| one_way_bound(&dec, &det, x, y).unwrap())
            .collect();
        for b in &bounds[1..] {
            assert_close(*b, bounds[0], 1e-9);
        }
    }

    #[test]
    fn pa_formula_agrees_with_explicit_joint_conditioning() {
        // a trivial announce map (constant message) must reproduce the
        // formula-path PA exactly
        let dec = maxent_2333(0.88);
        for strat in [
            PreprocessingStrategy::det_bin(3, 0).unwrap(),
            PreprocessingStrategy::rand_bin(3).unwrap(),
            PreprocessingStrategy::det_bin_np(3, 0, 0.3).unwrap(),
            PreprocessingStrategy::none(3),
        ] {
            let rows = strat.map_keep.rows();
            let constant = StochasticMap::new(1, rows, vec![1.0; rows]).unwrap();
            let with_m = PreprocessingStrategy::custom(
                strat.name.clone(),
                strat.map_keep.clone(),
                Some(constant),
            )
            .unwrap();
            let direct = pa_term(&dec, &strat, 0, 2).unwrap();
            let explicit = pa_term(&dec, &with_m, 0, 2).unwrap();
            assert_close(direct, explicit, 1e-10);
        }
    }

    #[test]
    fn extreme_local_weights_pin_the_pa_term() {
        // all-nonlocal: Eve learns nothing, PA = H(A)
        let ideal_dec = maxent_2322(1.0);
        assert!(ideal_dec.local_weight < 1e-8);
        let none = PreprocessingStrategy::none(2);
        assert_close(pa_term(&ideal_dec, &none, 0, 2).unwrap(), 1.0, 1e-7);
        // fully local: Eve knows everything, PA = 0 for identity preprocessing
        let local_dec = maxent_2322(0.5);
        assert_close(local_dec.local_weight, 1.0, 1e-9);
        assert_close(pa_term(&local_dec, &none, 0, 2).unwrap(), 0.0, 1e-9);
    }
}

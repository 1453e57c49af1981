//! The local polytope: deterministic strategies, the convex-combination
//! decomposition of an observed correlation into local vertices plus fixed
//! nonlocal anchors, and the analytic local weights used as cross-checks.
//!
//! The decomposition maximizes the total weight on local vertices subject to
//! exact reconstruction of the observed correlation, a linear program solved
//! by the dense simplex in [`simplex`].

pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::correlations::{Correlation, Scenario};
use crate::error::{Error, Result};
use simplex::{Column, StandardFormLp};

/// A local deterministic strategy: fixed outputs for every setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicVertex {
    /// Outcome per Alice setting.
    pub alice_assign: Vec<usize>,
    /// Outcome per Bob setting.
    pub bob_assign: Vec<usize>,
}

impl DeterministicVertex {
    /// Vertex at `index` in the lexicographic order: Alice's assignment is
    /// the most significant block, and within each party the setting-0 digit
    /// is most significant.
    pub fn from_index(scenario: &Scenario, index: usize) -> Self {
        let bob_span = (scenario.outcomes_b as u128).pow(scenario.settings_b as u32) as usize;
        let mut ia = index / bob_span;
        let mut ib = index % bob_span;
        let mut alice_assign = vec![0usize; scenario.settings_a];
        for x in (0..scenario.settings_a).rev() {
            alice_assign[x] = ia % scenario.outcomes_a;
            ia /= scenario.outcomes_a;
        }
        let mut bob_assign = vec![0usize; scenario.settings_b];
        for y in (0..scenario.settings_b).rev() {
            bob_assign[y] = ib % scenario.outcomes_b;
            ib /= scenario.outcomes_b;
        }
        Self { alice_assign, bob_assign }
    }

    /// The induced 0/1 product correlation.
    pub fn correlation(&self, scenario: &Scenario) -> Result<Correlation> {
        let mut probs = vec![0.0; scenario.entry_count()];
        for (x, &a) in self.alice_assign.iter().enumerate() {
            for (y, &b) in self.bob_assign.iter().enumerate() {
                let idx = ((x * scenario.settings_b + y) * scenario.outcomes_a + a)
                    * scenario.outcomes_b
                    + b;
                probs[idx] = 1.0;
            }
        }
        Correlation::new(*scenario, probs)
    }
}

/// All deterministic vertices of a scenario in lexicographic order.
pub fn enumerate_vertices(scenario: &Scenario) -> Result<Vec<DeterministicVertex>> {
    let count = scenario.vertex_count();
    if count > crate::correlations::VERTEX_GUARD {
        return Err(Error::ScenarioTooLarge { vertices: count });
    }
    Ok((0..count as usize)
        .map(|i| DeterministicVertex::from_index(scenario, i))
        .collect())
}

/// The optimal convex-combination decomposition of an observed correlation:
/// a sparse mixture of deterministic vertices (total mass `local_weight`)
/// plus the supplied nonlocal anchors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcDecomposition {
    /// Total probability mass on local deterministic strategies.
    #[serde(rename = "qLocal")]
    pub local_weight: f64,
    /// Nonzero vertex weights, keyed by lexicographic vertex index.
    #[serde(rename = "vertexWeights")]
    pub vertex_weights: Vec<(usize, f64)>,
    /// Weight per anchor, aligned with `anchors`.
    #[serde(rename = "nonlocalWeights")]
    pub nonlocal_weights: Vec<f64>,
    #[serde(skip)]
    pub observed: Option<Correlation>,
    #[serde(skip)]
    pub anchors: Vec<Correlation>,
    /// Anchor content hashes, for serialized decompositions.
    #[serde(rename = "anchorHashes")]
    pub anchor_hashes: Vec<String>,
    /// Set when the LP was only feasible at the relaxed 1e-8 tolerance.
    #[serde(rename = "feasibleAtTolerance")]
    pub feasible_at_tolerance: bool,
}

impl CcDecomposition {
    pub fn scenario(&self) -> Scenario {
        self.observed.as_ref().expect("decomposition keeps its observed correlation").scenario
    }

    /// The mixture of local vertices divided by the local weight, i.e. the
    /// effective local correlation distributed in local rounds.
    pub fn local_correlation(&self) -> Result<Correlation> {
        let scenario = self.scenario();
        if self.local_weight <= 1e-12 {
            return Err(Error::InconsistentDecomposition(
                "no local mass to normalize".into(),
            ));
        }
        let mut probs = vec![0.0; scenario.entry_count()];
        for &(index, w) in &self.vertex_weights {
            let v = DeterministicVertex::from_index(&scenario, index);
            for (x, &a) in v.alice_assign.iter().enumerate() {
                for (y, &b) in v.bob_assign.iter().enumerate() {
                    let idx = ((x * scenario.settings_b + y) * scenario.outcomes_a + a)
                        * scenario.outcomes_b
                        + b;
                    probs[idx] += w;
                }
            }
        }
        for p in probs.iter_mut() {
            *p /= self.local_weight;
        }
        Correlation::new(scenario, probs)
    }

    /// Alice's marginal over outcomes at setting `x`, conditioned on a local
    /// round (normalized by the local weight).
    pub fn local_alice_marginal(&self, x: usize) -> Result<Vec<f64>> {
        let scenario = self.scenario();
        if x >= scenario.settings_a {
            return Err(Error::InvalidParameter(format!("setting {x} out of range")));
        }
        if self.local_weight <= 1e-12 {
            return Err(Error::InconsistentDecomposition(
                "no local mass to normalize".into(),
            ));
        }
        let mut out = vec![0.0; scenario.outcomes_a];
        for &(index, w) in &self.vertex_weights {
            let v = DeterministicVertex::from_index(&scenario, index);
            out[v.alice_assign[x]] += w;
        }
        for p in out.iter_mut() {
            *p /= self.local_weight;
        }
        Ok(out)
    }

    /// The key-setting table of the anchor mixture, normalized (nA x nB flat).
    pub fn anchor_key_table(&self, key_x: usize, key_y: usize) -> Result<Vec<f64>> {
        let scenario = self.scenario();
        let nonlocal: f64 = self.nonlocal_weights.iter().sum();
        if nonlocal <= 1e-15 {
            // all-local decomposition: return the first anchor's table
            return self.anchors[0].key_table(key_x, key_y);
        }
        let mut out = vec![0.0; scenario.outcomes_a * scenario.outcomes_b];
        for (anchor, &w) in self.anchors.iter().zip(&self.nonlocal_weights) {
            for (k, &p) in anchor.key_table(key_x, key_y)?.iter().enumerate() {
                out[k] += w * p;
            }
        }
        for p in out.iter_mut() {
            *p /= nonlocal;
        }
        Ok(out)
    }

    /// Largest absolute reconstruction error over all entries.
    pub fn reconstruction_error(&self) -> f64 {
        let observed = self.observed.as_ref().expect("observed kept");
        let scenario = observed.scenario;
        let mut mix = vec![0.0; scenario.entry_count()];
        for &(index, w) in &self.vertex_weights {
            let v = DeterministicVertex::from_index(&scenario, index);
            for (x, &a) in v.alice_assign.iter().enumerate() {
                for (y, &b) in v.bob_assign.iter().enumerate() {
                    let idx = ((x * scenario.settings_b + y) * scenario.outcomes_a + a)
                        * scenario.outcomes_b
                        + b;
                    mix[idx] += w;
                }
            }
        }
        for (anchor, &w) in self.anchors.iter().zip(&self.nonlocal_weights) {
            for (k, &p) in anchor.probs().iter().enumerate() {
                mix[k] += w * p;
            }
        }
        mix.iter()
            .zip(observed.probs())
            .map(|(m, o)| (m - o).abs())
            .fold(0.0, f64::max)
    }
}

/// Maximizes the local weight in the convex-combination decomposition of
/// `observed` over deterministic vertices plus the given anchor correlations.
pub fn max_local_weight(
    observed: &Correlation,
    anchors: &[Correlation],
) -> Result<CcDecomposition> {
    if anchors.is_empty() {
        return Err(Error::InvalidParameter("at least one anchor is required".into()));
    }
    let scenario = observed.scenario;
    for anchor in anchors {
        if anchor.scenario != scenario {
            return Err(Error::DimensionMismatch(
                "anchor scenario differs from observed scenario".into(),
            ));
        }
    }
    let vertex_count = scenario.vertex_count() as usize;
    let entries = scenario.entry_count();
    let rows = entries + 1; // probability entries plus total-weight row

    let mut columns = Vec::with_capacity(vertex_count + anchors.len());
    for index in 0..vertex_count {
        let v = DeterministicVertex::from_index(&scenario, index);
        let mut row_idx = Vec::with_capacity(scenario.settings_a * scenario.settings_b + 1);
        for (x, &a) in v.alice_assign.iter().enumerate() {
            for (y, &b) in v.bob_assign.iter().enumerate() {
                row_idx.push(
                    ((x * scenario.settings_b + y) * scenario.outcomes_a + a)
                        * scenario.outcomes_b
                        + b,
                );
            }
        }
        row_idx.push(entries);
        columns.push(Column::Unit(row_idx));
    }
    for anchor in anchors {
        let mut col = Vec::with_capacity(rows);
        col.extend_from_slice(anchor.probs());
        col.push(1.0);
        columns.push(Column::Dense(col));
    }

    let mut rhs = Vec::with_capacity(rows);
    rhs.extend_from_slice(observed.probs());
    rhs.push(1.0);

    let mut objective = vec![1.0; vertex_count];
    objective.extend(std::iter::repeat_n(0.0, anchors.len()));

    let kept_rows = independent_cell_rows(&scenario);
    let lp = StandardFormLp { columns, rhs, objective };
    let solution = match simplex::maximize_with_rows(&lp, &kept_rows) {
        Ok(sol) => sol,
        // Exactly degenerate configurations can strand the simplex path at a
        // marginally infeasible corner. Mixing a whisker of the uniform box
        // (itself a vertex mixture) into the target breaks the tie without
        // leaving the feasible hull or moving the optimum measurably.
        Err(Error::Infeasible { residual }) if residual <= 1e-6 => {
            let uniform = 1.0 / (scenario.outcomes_a * scenario.outcomes_b) as f64;
            let mut retried = None;
            for epsilon in [1e-10, 1e-9] {
                let mut nudged = lp.rhs.clone();
                for (cell, value) in nudged.iter_mut().enumerate().take(entries) {
                    *value = (1.0 - epsilon) * observed.probs()[cell] + epsilon * uniform;
                }
                let attempt = StandardFormLp {
                    columns: lp.columns.clone(),
                    rhs: nudged,
                    objective: lp.objective.clone(),
                };
                if let Ok(sol) = simplex::maximize_with_rows(&attempt, &kept_rows) {
                    retried = Some(sol);
                    break;
                }
            }
            retried.ok_or(Error::Infeasible { residual })?
        }
        Err(other) => return Err(other),
    };

    let vertex_weights: Vec<(usize, f64)> = solution.x[..vertex_count]
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 1e-12)
        .map(|(i, &w)| (i, w))
        .collect();
    let nonlocal_weights: Vec<f64> =
        solution.x[vertex_count..].iter().map(|&w| w.max(0.0)).collect();
    let local_weight: f64 = vertex_weights.iter().map(|&(_, w)| w).sum();

    let dec = CcDecomposition {
        local_weight: local_weight.min(1.0),
        vertex_weights,
        nonlocal_weights,
        observed: Some(observed.clone()),
        anchor_hashes: anchors.iter().map(|a| format!("{:016x}", a.content_hash())).collect(),
        anchors: anchors.to_vec(),
        feasible_at_tolerance: solution.feasible_at_tolerance,
    };
    let err = dec.reconstruction_error();
    if err > 1e-8 {
        return Err(Error::InconsistentDecomposition(format!(
            "reconstruction error {err:.3e} exceeds 1e-8"
        )));
    }
    Ok(dec)
}

/// The exactly independent subset of probability-cell constraints for the
/// decomposition program. No-signalling and per-setting normalization tie the
/// remaining cells to these by integer relations, so the selection needs no
/// numerical rank decisions: per setting pair the core cells (both outcomes
/// below the last), one marginal-carrying column per Alice setting (at Bob's
/// setting 0), one per Bob setting (at Alice's setting 0), and the total
/// weight row.
fn independent_cell_rows(scenario: &Scenario) -> Vec<usize> {
    let (ma, mb, na, nb) =
        (scenario.settings_a, scenario.settings_b, scenario.outcomes_a, scenario.outcomes_b);
    let idx = |x: usize, y: usize, a: usize, b: usize| ((x * mb + y) * na + a) * nb + b;
    let mut rows = Vec::new();
    for x in 0..ma {
        for y in 0..mb {
            for a in 0..na - 1 {
                for b in 0..nb - 1 {
                    rows.push(idx(x, y, a, b));
                }
            }
        }
    }
    for x in 0..ma {
        for a in 0..na - 1 {
            rows.push(idx(x, 0, a, nb - 1));
        }
    }
    for y in 0..mb {
        for b in 0..nb - 1 {
            rows.push(idx(0, y, na - 1, b));
        }
    }
    rows.push(ma * mb * na * nb);
    rows.sort_unstable();
    rows
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Detection efficiency below which the lossy maximal-CHSH correlation
/// becomes local.
pub fn efficiency_locality_threshold() -> f64 {
    2.0 * (SQRT2 - 1.0)
}

/// Closed-form maximal local weight for the lossy maximal-CHSH correlation:
/// min(1, (1 - eta)(1 + (3 + 2 sqrt 2) eta)).
pub fn local_weight_maxent_eta(eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta {eta} outside [0, 1]")));
    }
    Ok(((1.0 - eta) * (1.0 + (3.0 + 2.0 * SQRT2) * eta)).min(1.0))
}

/// Closed-form maximal local weight for the noisy maximal-CHSH correlation:
/// min(1, (1 - V) / (1 - 1/sqrt 2)).
pub fn local_weight_visibility(visibility: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::InvalidParameter(format!(
            "visibility {visibility} outside [0, 1]"
        )));
    }
    Ok(((1.0 - visibility) / (1.0 - 1.0 / SQRT2)).min(1.0))
}

/// Closed-form maximal local weight of the lossy nearly-product family in the
/// vanishing-state-angle limit: min(1, 1 - eta (3 eta - 2)).
pub fn local_weight_partial_theta0(eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta {eta} outside [0, 1]")));
    }
    Ok((1.0 - eta * (3.0 * eta - 2.0)).min(1.0))
}

/// The CHSH combination <A_x0 B_y0> + <A_x0 B_y1> + <A_x1 B_y0> - <A_x1 B_y1>
/// of a binary-outcome correlation. |value| <= 2 certifies that facet holds.
pub fn chsh_facet_value(
    corr: &Correlation,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
) -> Result<f64> {
    let s = corr.scenario;
    if s.outcomes_a != 2 || s.outcomes_b != 2 {
        return Err(Error::InvalidParameter(
            "CHSH facet needs binary outcomes".into(),
        ));
    }
    let correlator = |x: usize, y: usize| {
        corr.prob(x, y, 0, 0) + corr.prob(x, y, 1, 1)
            - corr.prob(x, y, 0, 1)
            - corr.prob(x, y, 1, 0)
    };
    if x0 >= s.settings_a || x1 >= s.settings_a || y0 >= s.settings_b || y1 >= s.settings_b {
        return Err(Error::InvalidParameter("facet setting out of range".into()));
    }
    Ok(correlator(x0, y0) + correlator(x0, y1) + correlator(x1, y0) - correlator(x1, y1))
}

/// Value of the lifted CHSH-type inequality that pins the optimal local part
/// for lossy maximal-CHSH correlations; the left-hand side is
/// -p_A(1|0) - p_B(1|0) + p(1,1|0,0) + p(1,1|0,1) + p(1,1|1,0) - p(1,1|1,1),
/// non-positive on the local set and zero when the facet is saturated.
pub fn lifted_facet_value(corr: &Correlation) -> Result<f64> {
    let s = corr.scenario;
    if s.settings_a < 2 || s.settings_b < 2 {
        return Err(Error::InvalidParameter("facet needs two settings per party".into()));
    }
    Ok(-corr.alice_marginal(0, 0, 1) - corr.bob_marginal(0, 0, 1)
        + corr.prob(0, 0, 1, 1)
        + corr.prob(0, 1, 1, 1)
        + corr.prob(1, 0, 1, 1)
        - corr.prob(1, 1, 1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{
        apply_detection_efficiency, apply_visibility, correlation_from_qubit_strategy,
        QubitStrategy,
    };
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    fn chsh_2322() -> Correlation {
        let strat = QubitStrategy::new(
            FRAC_PI_2,
            vec![0.0, FRAC_PI_2],
            vec![FRAC_PI_4, -FRAC_PI_4, 0.0],
        )
        .unwrap();
        correlation_from_qubit_strategy(&strat).unwrap()
    }

    #[test]
    fn vertex_counts_match_the_combinatorics() {
        let count = |ma, mb, na, nb| {
            enumerate_vertices(&Scenario::new(ma, mb, na, nb).unwrap()).unwrap().len()
        };
        assert_eq!(count(2, 2, 2, 2), 16);
        assert_eq!(count(2, 3, 3, 3), 243);
        assert_eq!(count(2, 3, 2, 2), 32);
    }

    #[test]
    fn vertices_are_distinct_and_lexicographic() {
        let scenario = Scenario::new(2, 2, 2, 2).unwrap();
        let vertices = enumerate_vertices(&scenario).unwrap();
        assert_eq!(vertices[0].alice_assign, vec![0, 0]);
        assert_eq!(vertices[0].bob_assign, vec![0, 0]);
        assert_eq!(vertices[1].bob_assign, vec![0, 1]);
        assert_eq!(vertices[4].alice_assign, vec![0, 1]);
        for w in vertices.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn vertex_correlation_is_deterministic_product() {
        let scenario = Scenario::new(2, 3, 2, 2).unwrap();
        let v = DeterministicVertex::from_index(&scenario, 17);
        let corr = v.correlation(&scenario).unwrap();
        for x in 0..2 {
            for y in 0..3 {
                for a in 0..2 {
                    for b in 0..2 {
                        let expected = if v.alice_assign[x] == a && v.bob_assign[y] == b {
                            1.0
                        } else {
                            0.0
                        };
                        assert_eq!(corr.prob(x, y, a, b), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn lossy_maxent_local_weight_matches_closed_form() {
        let ideal = chsh_2322();
        let anchor = apply_detection_efficiency(&ideal, 1.0).unwrap();
        for &eta in &[0.85, 0.9, 0.95] {
            let observed = apply_detection_efficiency(&ideal, eta).unwrap();
            let dec = max_local_weight(&observed, std::slice::from_ref(&anchor)).unwrap();
            assert_close(dec.local_weight, local_weight_maxent_eta(eta).unwrap(), 1e-8);
            assert!(dec.reconstruction_error() < 1e-8);
            let nonlocal: f64 = dec.nonlocal_weights.iter().sum();
            assert_close(dec.local_weight + nonlocal, 1.0, 1e-9);
        }
    }

    #[test]
    fn noisy_maxent_local_weight_matches_closed_form() {
        let ideal = chsh_2322();
        for &v in &[0.75, 0.8, 0.9] {
            let observed = apply_visibility(&ideal, v).unwrap();
            let dec = max_local_weight(&observed, std::slice::from_ref(&ideal)).unwrap();
            assert_close(dec.local_weight, local_weight_visibility(v).unwrap(), 1e-8);
        }
    }

    #[test]
    fn extremal_observed_correlation_has_zero_local_weight() {
        let ideal = chsh_2322();
        let dec = max_local_weight(&ideal, std::slice::from_ref(&ideal)).unwrap();
        assert!(dec.local_weight < 1e-8, "local weight {}", dec.local_weight);
    }

    #[test]
    fn deterministic_observed_correlation_is_fully_local() {
        let scenario = Scenario::new(2, 3, 2, 2).unwrap();
        let v = DeterministicVertex::from_index(&scenario, 11);
        let observed = v.correlation(&scenario).unwrap();
        let dec = max_local_weight(&observed, &[chsh_2322()]).unwrap();
        assert_close(dec.local_weight, 1.0, 1e-9);
    }

    #[test]
    fn closed_form_weights_hit_their_locality_thresholds() {
        assert_close(
            local_weight_maxent_eta(efficiency_locality_threshold()).unwrap(),
            1.0,
            1e-12,
        );
        assert_close(local_weight_maxent_eta(1.0).unwrap(), 0.0, 1e-12);
        assert_close(local_weight_maxent_eta(0.95).unwrap(), 0.32685028842544456, 1e-10);
        assert_close(local_weight_visibility(1.0 / SQRT2).unwrap(), 1.0, 1e-12);
        assert_close(local_weight_visibility(1.0).unwrap(), 0.0, 1e-12);
        assert_close(local_weight_visibility(0.8).unwrap(), 0.6828427124746192, 1e-10);
        assert_close(local_weight_partial_theta0(2.0 / 3.0).unwrap(), 1.0, 1e-12);
        assert_close(local_weight_partial_theta0(1.0).unwrap(), 0.0, 1e-12);
        assert_close(local_weight_partial_theta0(0.75).unwrap(), 0.8125, 1e-12);
    }

    #[test]
    fn facet_values_of_the_ideal_correlation() {
        let corr = chsh_2322();
        assert_close(chsh_facet_value(&corr, 0, 1, 0, 1).unwrap(), 2.0 * SQRT2, 1e-12);
        assert_close(chsh_facet_value(&corr, 1, 0, 0, 1).unwrap(), 0.0, 1e-12);
        assert_close(chsh_facet_value(&corr, 0, 1, 0, 2).unwrap(), 1.0 + SQRT2, 1e-12);
    }

    #[test]
    fn deterministic_vertices_respect_the_local_bound() {
        let scenario = Scenario::new(2, 3, 2, 2).unwrap();
        for index in 0..scenario.vertex_count() as usize {
            let corr = DeterministicVertex::from_index(&scenario, index)
                .correlation(&scenario)
                .unwrap();
            let s = chsh_facet_value(&corr, 0, 1, 0, 1).unwrap();
            assert!(s.abs() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn local_part_saturates_the_lifted_facet_at_the_optimum() {
        let ideal = chsh_2322();
        let anchor = apply_detection_efficiency(&ideal, 1.0).unwrap();
        let observed = apply_detection_efficiency(&ideal, 0.9).unwrap();
        let dec = max_local_weight(&observed, &[anchor]).unwrap();
        let local = dec.local_correlation().unwrap();
        assert_close(lifted_facet_value(&local).unwrap(), 0.0, 1e-7);
    }

    #[test]
    fn local_weight_decreases_with_cleaner_devices() {
        let ideal = chsh_2322();
        let anchor = apply_detection_efficiency(&ideal, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..8 {
            let eta = 0.84 + 0.15 * (i as f64) / 7.0;
            let observed = apply_detection_efficiency(&ideal, eta).unwrap();
            let dec = max_local_weight(&observed, std::slice::from_ref(&anchor)).unwrap();
            assert!(dec.local_weight <= last + 1e-9, "not monotone at eta = {eta}");
            last = dec.local_weight;
        }
        last = f64::INFINITY;
        for i in 0..8 {
            let v = 0.72 + 0.27 * (i as f64) / 7.0;
            let observed = apply_visibility(&ideal, v).unwrap();
            let dec = max_local_weight(&observed, std::slice::from_ref(&ideal)).unwrap();
            assert!(dec.local_weight <= last + 1e-9, "not monotone at v = {v}");
            last = dec.local_weight;
        }
    }

    #[test]
    fn bobs_extra_setting_leaves_the_local_weight_intact() {
        // dropping Bob's dedicated key setting does not help the attack
        let full = chsh_2322();
        let sub_strategy = QubitStrategy::new(
            FRAC_PI_2,
            vec![0.0, FRAC_PI_2],
            vec![FRAC_PI_4, -FRAC_PI_4],
        )
        .unwrap();
        let sub = correlation_from_qubit_strategy(&sub_strategy).unwrap();
        for &eta in &[0.87, 0.93] {
            let dec_full = max_local_weight(
                &apply_detection_efficiency(&full, eta).unwrap(),
                &[apply_detection_efficiency(&full, 1.0).unwrap()],
            )
            .unwrap();
            let dec_sub = max_local_weight(
                &apply_detection_efficiency(&sub, eta).unwrap(),
                &[apply_detection_efficiency(&sub, 1.0).unwrap()],
            )
            .unwrap();
            assert_close(dec_full.local_weight, dec_sub.local_weight, 1e-8);
        }
    }

    #[test]
    fn decomposition_serializes_with_the_wire_field_names() {
        let ideal = chsh_2322();
        let observed = apply_visibility(&ideal, 0.85).unwrap();
        let dec = max_local_weight(&observed, &[ideal]).unwrap();
        let json = serde_json::to_string(&dec).unwrap();
        assert!(json.contains("\"qLocal\""));
        assert!(json.contains("\"vertexWeights\""));
        assert!(json.contains("\"anchorHashes\""));
    }

    #[test]
    fn anchors_must_share_the_scenario() {
        let ideal = chsh_2322();
        let lossy = apply_detection_efficiency(&ideal, 0.9).unwrap();
        assert!(matches!(
            max_local_weight(&lossy, &[ideal]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    /// Independent oracle for the 2x2-setting binary scenario, where the
    /// local set is cut out exactly by positivity and the eight CHSH-type
    /// inequalities: along the line from the anchor towards the observed
    /// point, every facet yields a closed-form bound on the local weight.
    fn facet_oracle_2222(observed: &Correlation, anchor: &Correlation) -> f64 {
        let mut upper: f64 = 1.0;
        for &(x0, x1) in &[(0, 1), (1, 0)] {
            for &(y0, y1) in &[(0, 1), (1, 0)] {
                for sign in [1.0, -1.0] {
                    let f_obs = sign * chsh_facet_value(observed, x0, x1, y0, y1).unwrap();
                    let f_anchor = sign * chsh_facet_value(anchor, x0, x1, y0, y1).unwrap();
                    if f_anchor > 2.0 {
                        upper = upper.min((f_anchor - f_obs) / (f_anchor - 2.0));
                    }
                }
            }
        }
        upper
    }

    #[test]
    fn lp_matches_the_facet_oracle_in_the_smallest_scenario() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut nontrivial = 0;
        for _ in 0..40 {
            let strat = QubitStrategy::new(
                rng.random_range(0.3..FRAC_PI_2),
                vec![rng.random_range(-0.4..0.4), rng.random_range(0.7..1.5)],
                vec![rng.random_range(0.2..1.0), rng.random_range(-1.0..-0.2)],
            )
            .unwrap();
            let anchor = correlation_from_qubit_strategy(&strat).unwrap();
            let v = rng.random_range(0.6..0.99);
            let observed = apply_visibility(&anchor, v).unwrap();
            let dec = max_local_weight(&observed, &[anchor.clone()]).unwrap();
            let oracle = facet_oracle_2222(&observed, &anchor);
            assert_close(dec.local_weight, oracle, 1e-8);
            if oracle < 1.0 - 1e-9 {
                nontrivial += 1;
            }
        }
        assert!(nontrivial >= 10, "only {nontrivial} nonlocal draws");
    }

    #[test]
    fn decompositions_are_deterministic() {
        let ideal = chsh_2322();
        let observed = apply_detection_efficiency(&ideal, 0.91).unwrap();
        let anchor = apply_detection_efficiency(&ideal, 1.0).unwrap();
        let first = max_local_weight(&observed, &[anchor.clone()]).unwrap();
        let second = max_local_weight(&observed, &[anchor]).unwrap();
        assert_eq!(first.local_weight.to_bits(), second.local_weight.to_bits());
        assert_eq!(first.vertex_weights, second.vertex_weights);
    }

    #[test]
    fn infeasible_when_observed_is_outside_the_hull() {
        // observed more nonlocal than the anchor: anchor at V=0.9, observed ideal
        let ideal = chsh_2322();
        let weak_anchor = apply_visibility(&ideal, 0.9).unwrap();
        assert!(matches!(
            max_local_weight(&ideal, &[weak_anchor]),
            Err(Error::Infeasible { .. })
        ));
    }
}

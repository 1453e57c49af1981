//! Two-qubit correlation generation and the two noise models.
//!
//! Measurements are dichotomic observables in the z-x plane of the Bloch
//! sphere: the observable at angle `phi` is `cos(phi) sigma_z + sin(phi)
//! sigma_x`, and outcome 0 projects onto its +1 eigenspace. All two-qubit
//! expectation values are evaluated in closed form, so no general
//! linear-algebra machinery is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard on the deterministic-vertex count of a scenario.
pub const VERTEX_GUARD: u128 = 10_000_000;

/// The (mA, mB, nA, nB) shape of a bipartite Bell experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "mA")]
    pub settings_a: usize,
    #[serde(rename = "mB")]
    pub settings_b: usize,
    #[serde(rename = "nA")]
    pub outcomes_a: usize,
    #[serde(rename = "nB")]
    pub outcomes_b: usize,
}

impl Scenario {
    pub fn new(
        settings_a: usize,
        settings_b: usize,
        outcomes_a: usize,
        outcomes_b: usize,
    ) -> Result<Self> {
        if settings_a < 1 || settings_b < 1 {
            return Err(Error::InvalidParameter(
                "scenario needs at least one setting per party".into(),
            ));
        }
        if outcomes_a < 2 || outcomes_b < 2 {
            return Err(Error::InvalidParameter(
                "scenario needs at least two outcomes per party".into(),
            ));
        }
        let s = Self { settings_a, settings_b, outcomes_a, outcomes_b };
        let v = s.vertex_count();
        if v > VERTEX_GUARD {
            return Err(Error::ScenarioTooLarge { vertices: v });
        }
        Ok(s)
    }

    /// Number of local deterministic strategies, nA^mA * nB^mB.
    pub fn vertex_count(&self) -> u128 {
        (self.outcomes_a as u128).pow(self.settings_a as u32)
            * (self.outcomes_b as u128).pow(self.settings_b as u32)
    }

    /// Number of probability entries, mA * mB * nA * nB.
    pub fn entry_count(&self) -> usize {
        self.settings_a * self.settings_b * self.outcomes_a * self.outcomes_b
    }
}

/// A conditional distribution p(a, b | x, y) over a [`Scenario`], stored flat
/// in (x, y, a, b) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub scenario: Scenario,
    probs: Vec<f64>,
}

/// Nested JSON form: `probs[x][y][a][b]`, the on-disk ingestion schema.
#[derive(Serialize, Deserialize)]
struct CorrelationJson {
    scenario: Scenario,
    probs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Correlation {
    /// Builds a correlation and checks all invariants: entries in [0, 1]
    /// (tolerance 1e-12), per-setting normalization, and no-signalling
    /// (both to 1e-9).
    pub fn new(scenario: Scenario, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != scenario.entry_count() {
            return Err(Error::DimensionMismatch(format!(
                "correlation wants {} entries, got {}",
                scenario.entry_count(),
                probs.len()
            )));
        }
        let c = Self { scenario, probs };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        for &p in &self.probs {
            if !(-1e-12..=1.0 + 1e-12).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "correlation entry {p} outside [0, 1]"
                )));
            }
        }
        for x in 0..s.settings_a {
            for y in 0..s.settings_b {
                let mut total = 0.0;
                for a in 0..s.outcomes_a {
                    for b in 0..s.outcomes_b {
                        total += self.prob(x, y, a, b);
                    }
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "settings ({x}, {y}) sum to {total}, expected 1"
                    )));
                }
            }
        }
        // no-signalling: Alice's marginal independent of y, Bob's of x
        for x in 0..s.settings_a {
            for a in 0..s.outcomes_a {
                let first = self.alice_marginal(x, 0, a);
                for y in 1..s.settings_b {
                    if (self.alice_marginal(x, y, a) - first).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "signalling to Alice at (x={x}, a={a})"
                        )));
                    }
                }
            }
        }
        for y in 0..s.settings_b {
            for b in 0..s.outcomes_b {
                let first = self.bob_marginal(0, y, b);
                for x in 1..s.settings_a {
                    if (self.bob_marginal(x, y, b) - first).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "signalling to Bob at (y={y}, b={b})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn flat(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        let s = &self.scenario;
        ((x * s.settings_b + y) * s.outcomes_a + a) * s.outcomes_b + b
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.probs[self.flat(x, y, a, b)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// p_A(a | x), evaluated at setting pair (x, y).
    pub fn alice_marginal(&self, x: usize, y: usize, a: usize) -> f64 {
        (0..self.scenario.outcomes_b).map(|b| self.prob(x, y, a, b)).sum()
    }

    /// p_B(b | y), evaluated at setting pair (x, y).
    pub fn bob_marginal(&self, x: usize, y: usize, b: usize) -> f64 {
        (0..self.scenario.outcomes_a).map(|a| self.prob(x, y, a, b)).sum()
    }

    /// The 2D table p(a, b | x*, y*) at one setting pair, shape (nA, nB).
    pub fn key_table(&self, x: usize, y: usize) -> Result<Vec<f64>> {
        let s = &self.scenario;
        if x >= s.settings_a || y >= s.settings_b {
            return Err(Error::InvalidParameter(format!(
                "setting pair ({x}, {y}) out of range"
            )));
        }
        let mut out = Vec::with_capacity(s.outcomes_a * s.outcomes_b);
        for a in 0..s.outcomes_a {
            for b in 0..s.outcomes_b {
                out.push(self.prob(x, y, a, b));
            }
        }
        Ok(out)
    }

    /// Serializes to the nested-JSON ingestion schema.
    pub fn to_json(&self) -> String {
        let s = &self.scenario;
        let mut nested = Vec::with_capacity(s.settings_a);
        for x in 0..s.settings_a {
            let mut ys = Vec::with_capacity(s.settings_b);
            for y in 0..s.settings_b {
                let mut aa = Vec::with_capacity(s.outcomes_a);
                for a in 0..s.outcomes_a {
                    let mut bb = Vec::with_capacity(s.outcomes_b);
                    for b in 0..s.outcomes_b {
                        bb.push(self.prob(x, y, a, b));
                    }
                    aa.push(bb);
                }
                ys.push(aa);
            }
            nested.push(ys);
        }
        serde_json::to_string_pretty(&CorrelationJson { scenario: *s, probs: nested })
            .expect("correlation serialization cannot fail")
    }

    /// Parses and validates the nested-JSON ingestion schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: CorrelationJson = serde_json::from_str(text)
            .map_err(|e| Error::SchemaViolation(e.to_string()))?;
        let s = parsed.scenario;
        Scenario::new(s.settings_a, s.settings_b, s.outcomes_a, s.outcomes_b)?;
        if parsed.probs.len() != s.settings_a {
            return Err(Error::SchemaViolation(format!(
                "probs has {} x-blocks, scenario says {}",
                parsed.probs.len(),
                s.settings_a
            )));
        }
        let mut flat = Vec::with_capacity(s.entry_count());
        for (x, ys) in parsed.probs.iter().enumerate() {
            if ys.len() != s.settings_b {
                return Err(Error::SchemaViolation(format!(
                    "probs[{x}] has {} y-blocks, scenario says {}",
                    ys.len(),
                    s.settings_b
                )));
            }
            for (y, aa) in ys.iter().enumerate() {
                if aa.len() != s.outcomes_a {
                    return Err(Error::SchemaViolation(format!(
                        "probs[{x}][{y}] has {} a-rows, scenario says {}",
                        aa.len(),
                        s.outcomes_a
                    )));
                }
                for (a, bb) in aa.iter().enumerate() {
                    if bb.len() != s.outcomes_b {
                        return Err(Error::SchemaViolation(format!(
                            "probs[{x}][{y}][{a}] has {} entries, scenario says {}",
                            bb.len(),
                            s.outcomes_b
                        )));
                    }
                    flat.extend_from_slice(bb);
                }
            }
        }
        Self::new(s, flat).map_err(|e| Error::SchemaViolation(e.to_string()))
    }

    /// Content hash of scenario and probability entries (FNV-1a over bits).
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |v: u64| {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.scenario.settings_a as u64);
        eat(self.scenario.settings_b as u64);
        eat(self.scenario.outcomes_a as u64);
        eat(self.scenario.outcomes_b as u64);
        for &p in &self.probs {
            eat(p.to_bits());
        }
        h
    }
}

/// A two-qubit strategy: the partially entangled state
/// cos(theta/2)|00> + sin(theta/2)|11> plus z-x-plane measurement angles for
/// each setting of each party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitStrategy {
    pub theta: f64,
    pub alice_angles: Vec<f64>,
    pub bob_angles: Vec<f64>,
}

impl QubitStrategy {
    pub fn new(theta: f64, alice_angles: Vec<f64>, bob_angles: Vec<f64>) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI / 2.0 + 1e-12).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "state angle {theta} outside [0, pi/2]"
            )));
        }
        if alice_angles.is_empty() || bob_angles.is_empty() {
            return Err(Error::InvalidParameter("empty angle list".into()));
        }
        Ok(Self { theta, alice_angles, bob_angles })
    }

    /// Two-party product expectation value for observables at the given angles.
    pub fn pair_expectation(&self, phi_a: f64, phi_b: f64) -> f64 {
        phi_a.cos() * phi_b.cos() + phi_a.sin() * phi_b.sin() * self.theta.sin()
    }

    /// Single-party expectation value of one observable at the given angle.
    pub fn single_expectation(&self, phi: f64) -> f64 {
        phi.cos() * self.theta.cos()
    }
}

/// p(a, b | x, y) for a two-qubit strategy with binary outcomes; outcome 0 is
/// the +1 eigenspace of the observable.
pub fn correlation_from_qubit_strategy(strategy: &QubitStrategy) -> Result<Correlation> {
    let ma = strategy.alice_angles.len();
    let mb = strategy.bob_angles.len();
    let scenario = Scenario::new(ma, mb, 2, 2)?;
    let mut probs = Vec::with_capacity(scenario.entry_count());
    for &phi_a in &strategy.alice_angles {
        for &phi_b in &strategy.bob_angles {
            let e_ab = strategy.pair_expectation(phi_a, phi_b);
            let e_a = strategy.single_expectation(phi_a);
            let e_b = strategy.single_expectation(phi_b);
            for a in 0..2usize {
                for b in 0..2usize {
                    let sa = if a == 0 { 1.0 } else { -1.0 };
                    let sb = if b == 0 { 1.0 } else { -1.0 };
                    let p = 0.25 * (1.0 + sa * e_a + sb * e_b + sa * sb * e_ab);
                    probs.push(p.clamp(0.0, 1.0));
                }
            }
        }
    }
    Correlation::new(scenario, probs)
}

/// Mixes a correlation with uniform noise: V p + (1 - V) / (nA nB).
pub fn apply_visibility(corr: &Correlation, visibility: f64) -> Result<Correlation> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::InvalidParameter(format!(
            "visibility {visibility} outside [0, 1]"
        )));
    }
    let s = corr.scenario;
    let uniform = 1.0 / (s.outcomes_a * s.outcomes_b) as f64;
    let probs = corr
        .probs()
        .iter()
        .map(|&p| visibility * p + (1.0 - visibility) * uniform)
        .collect();
    Correlation::new(s, probs)
}

/// Adds a trailing no-click outcome to both parties: clicks survive with
/// probability `eta` per party, so joint clicks carry eta^2 of the original
/// table, single clicks eta(1-eta) of the corresponding marginal, and the
/// double no-click cell (1-eta)^2.
pub fn apply_detection_efficiency(corr: &Correlation, eta: f64) -> Result<Correlation> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "detection efficiency {eta} outside [0, 1]"
        )));
    }
    let s = corr.scenario;
    let out_scenario = Scenario::new(s.settings_a, s.settings_b, s.outcomes_a + 1, s.outcomes_b + 1)?;
    let miss = 1.0 - eta;
    let mut probs = Vec::with_capacity(out_scenario.entry_count());
    for x in 0..s.settings_a {
        for y in 0..s.settings_b {
            for a in 0..=s.outcomes_a {
                for b in 0..=s.outcomes_b {
                    let p = match (a == s.outcomes_a, b == s.outcomes_b) {
                        (false, false) => eta * eta * corr.prob(x, y, a, b),
                        (false, true) => eta * miss * corr.alice_marginal(x, y, a),
                        (true, false) => miss * eta * corr.bob_marginal(x, y, b),
                        (true, true) => miss * miss,
                    };
                    probs.push(p);
                }
            }
        }
    }
    Correlation::new(out_scenario, probs)
}

/// The detection-adjusted CHSH functional of a strategy whose first two
/// settings on each side are the test settings:
/// eta^2 <B0 (A0 + A1) + B1 (A0 - A1)> + 2 eta (1 - eta) <A0 + B0> + 2 (1 - eta)^2.
pub fn s_det(strategy: &QubitStrategy, eta: f64) -> Result<f64> {
    if strategy.alice_angles.len() < 2 || strategy.bob_angles.len() < 2 {
        return Err(Error::InvalidParameter(
            "detection-adjusted CHSH needs two settings per party".into(),
        ));
    }
    let a0 = strategy.alice_angles[0];
    let a1 = strategy.alice_angles[1];
    let b0 = strategy.bob_angles[0];
    let b1 = strategy.bob_angles[1];
    let miss = 1.0 - eta;
    let chsh = strategy.pair_expectation(a0, b0)
        + strategy.pair_expectation(a1, b0)
        + strategy.pair_expectation(a0, b1)
        - strategy.pair_expectation(a1, b1);
    Ok(eta * eta * chsh
        + 2.0 * eta * miss * (strategy.single_expectation(a0) + strategy.single_expectation(b0))
        + 2.0 * miss * miss)
}

/// Bloch cosines z+- of Bob's optimal test observables, given Alice's test
/// angle. The bias parameter of the underlying CHSH family is fixed to 1,
/// since the detection-adjusted functional used here carries no bias.
fn bob_optimal_cosines(theta: f64, eta: f64, phi_a: f64) -> (f64, f64) {
    let miss = 1.0 - eta;
    let p = eta + miss * theta.cos();
    let q = eta * phi_a.cos() + miss * theta.cos();
    let r = eta * phi_a.sin() * theta.sin();
    let zp = (p + q) / ((p + q).powi(2) + r * r).sqrt();
    let zm = (p - q) / ((p - q).powi(2) + r * r).sqrt();
    (zp, zm)
}

/// Builds the full strategy for a given Alice test angle: Alice {0, phi_a},
/// Bob {phi_b+, phi_b-, 0} with cos(phi_b+-) = z+- and the sign convention
/// sin(phi_b+) >= 0 >= sin(phi_b-). The key observables sit along z.
pub fn chsh_family_strategy(theta: f64, eta: f64, phi_a: f64) -> QubitStrategy {
    let (zp, zm) = bob_optimal_cosines(theta, eta, phi_a);
    let phi_bp = (1.0 - zp * zp).max(0.0).sqrt().atan2(zp);
    let phi_bm = (-(1.0 - zm * zm).max(0.0).sqrt()).atan2(zm);
    QubitStrategy {
        theta,
        alice_angles: vec![0.0, phi_a],
        bob_angles: vec![phi_bp, phi_bm, 0.0],
    }
}

/// Golden-section maximization on a bracket, to absolute tolerance `tol`.
pub(crate) fn golden_section_max(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// The strategy maximizing the detection-adjusted CHSH functional at a given
/// state angle and detection efficiency, with the key observables of both
/// parties pinned to sigma_z.
///
/// Alice's test angle is found by golden-section search on [0, pi/2]
/// (absolute tolerance 1e-10); Bob's test angles follow in closed form.
pub fn chsh_optimal_strategy(theta: f64, eta: f64) -> Result<QubitStrategy> {
    if !(0.0 < theta && theta <= std::f64::consts::PI / 2.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "state angle {theta} outside (0, pi/2]"
        )));
    }
    if !(0.0 < eta && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "detection efficiency {eta} outside (0, 1]"
        )));
    }
    let objective = |phi_a: f64| {
        let strat = chsh_family_strategy(theta, eta, phi_a);
        s_det(&strat, eta).expect("two test settings by construction")
    };
    let phi_a = golden_section_max(objective, 0.0, std::f64::consts::PI / 2.0, 1e-10);
    Ok(chsh_family_strategy(theta, eta, phi_a))
}

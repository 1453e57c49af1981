//! Protocol presets tying together correlation generation, the local-weight
//! program and the bound constructions: the maximal-entanglement families at
//! fixed measurement angles, and the partially entangled family whose test
//! measurements are re-optimized at every (theta, eta).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::ccattack::{self, PreprocessingStrategy};
use crate::correlations::{
    apply_detection_efficiency, apply_visibility, chsh_optimal_strategy,
    correlation_from_qubit_strategy, Correlation, QubitStrategy,
};
use crate::error::{Error, Result};
use crate::localset::{max_local_weight, CcDecomposition};

/// Which experimental imperfection is being swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Efficiency,
    Visibility,
}

/// Named protocol scenarios built on the maximally entangled state with
/// standard test measurements. Lossy tags include the no-click outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioTag {
    /// Lossy CHSH protocol with a dedicated key setting for Bob.
    L2333,
    /// Lossy CHSH protocol reusing test settings for the key.
    L2233,
    /// Noisy CHSH protocol with a dedicated key setting for Bob.
    V2322,
    /// Noisy CHSH protocol reusing test settings for the key.
    V2222,
    /// Noisy CHSH protocol with two dedicated key settings.
    V2422,
}

impl ScenarioTag {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "2333" => Ok(Self::L2333),
            "2233" => Ok(Self::L2233),
            "2322" => Ok(Self::V2322),
            "2222" => Ok(Self::V2222),
            "2422" => Ok(Self::V2422),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario tag {other}; expected 2333, 2233, 2322, 2222 or 2422"
            ))),
        }
    }

    pub fn noise_kind(&self) -> NoiseKind {
        match self {
            Self::L2333 | Self::L2233 => NoiseKind::Efficiency,
            Self::V2322 | Self::V2222 | Self::V2422 => NoiseKind::Visibility,
        }
    }

    /// Default key settings: the dedicated pair where one exists, otherwise
    /// the first test pair.
    pub fn default_key_settings(&self) -> (usize, usize) {
        match self {
            Self::L2333 | Self::V2322 | Self::V2422 => (0, 2),
            Self::L2233 | Self::V2222 => (0, 0),
        }
    }

    /// Alice's preprocessing alphabet size at the key setting.
    pub fn key_alphabet(&self) -> usize {
        match self.noise_kind() {
            NoiseKind::Efficiency => 3,
            NoiseKind::Visibility => 2,
        }
    }

    /// The ideal qubit strategy: maximally entangled state, test measurements
    /// at the standard angles, key measurements along z.
    pub fn ideal_strategy(&self) -> QubitStrategy {
        let bob_angles = match self {
            Self::L2333 | Self::V2322 => vec![FRAC_PI_4, -FRAC_PI_4, 0.0],
            Self::L2233 | Self::V2222 => vec![FRAC_PI_4, -FRAC_PI_4],
            Self::V2422 => vec![FRAC_PI_4, -FRAC_PI_4, 0.0, FRAC_PI_2],
        };
        QubitStrategy {
            theta: FRAC_PI_2,
            alice_angles: vec![0.0, FRAC_PI_2],
            bob_angles,
        }
    }

    /// The noiseless correlation (the nonlocal anchor), embedded in the lossy
    /// scenario when the noise model is detection efficiency.
    pub fn anchor(&self) -> Result<Correlation> {
        let ideal = correlation_from_qubit_strategy(&self.ideal_strategy())?;
        match self.noise_kind() {
            NoiseKind::Efficiency => apply_detection_efficiency(&ideal, 1.0),
            NoiseKind::Visibility => Ok(ideal),
        }
    }

    /// The observed correlation at noise level `noise`.
    pub fn observed(&self, noise: f64) -> Result<Correlation> {
        let ideal = correlation_from_qubit_strategy(&self.ideal_strategy())?;
        match self.noise_kind() {
            NoiseKind::Efficiency => apply_detection_efficiency(&ideal, noise),
            NoiseKind::Visibility => apply_visibility(&ideal, noise),
        }
    }

    /// Solves the local-weight program at noise level `noise`.
    pub fn decompose(&self, noise: f64) -> Result<CcDecomposition> {
        max_local_weight(&self.observed(noise)?, &[self.anchor()?])
    }
}

/// Named preprocessing strategies selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyKind {
    None,
    DetBin,
    DetBinNp(f64),
    RandBin,
    RandBinNp(f64),
    AnnounceNoClick,
}

impl StrategyKind {
    /// Builds the concrete maps for the given key alphabet size.
    pub fn build(&self, alphabet: usize) -> Result<PreprocessingStrategy> {
        match *self {
            Self::None => Ok(PreprocessingStrategy::none(alphabet)),
            Self::DetBin => PreprocessingStrategy::det_bin(alphabet, 0),
            Self::DetBinNp(p) => PreprocessingStrategy::det_bin_np(alphabet, 0, p),
            Self::RandBin => PreprocessingStrategy::rand_bin(alphabet),
            Self::RandBinNp(p) => PreprocessingStrategy::rand_bin_np(alphabet, p),
            Self::AnnounceNoClick => PreprocessingStrategy::announce_noclick(alphabet),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::DetBin => "det",
            Self::DetBinNp(_) => "det-np",
            Self::RandBin => "rand",
            Self::RandBinNp(_) => "rand-np",
            Self::AnnounceNoClick => "announce",
        }
    }
}

/// A full one-way bound report for one protocol point.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub local_weight: f64,
    pub ec: f64,
    pub pa: f64,
    pub bound: f64,
    pub feasible_at_tolerance: bool,
}

/// Evaluates the one-way bound for a preset protocol at one noise level.
pub fn one_way_report(
    tag: ScenarioTag,
    noise: f64,
    strat: &PreprocessingStrategy,
    key: (usize, usize),
) -> Result<BoundReport> {
    let dec = tag.decompose(noise)?;
    report_from_decomposition(&dec, strat, key)
}

/// Evaluates the one-way bound for an arbitrary decomposition.
pub fn report_from_decomposition(
    dec: &CcDecomposition,
    strat: &PreprocessingStrategy,
    key: (usize, usize),
) -> Result<BoundReport> {
    let key_table = ccattack::observed_key_joint(dec, key.0, key.1)?;
    let ec = ccattack::ec_term(&key_table, strat)?;
    let pa = ccattack::pa_term(dec, strat, key.0, key.1)?;
    Ok(BoundReport {
        local_weight: dec.local_weight,
        ec,
        pa,
        bound: pa - ec,
        feasible_at_tolerance: dec.feasible_at_tolerance,
    })
}

/// The partially entangled lossy family: at every (theta, eta) the test
/// measurements maximize the detection-adjusted CHSH functional, the key
/// measurements stay along z, and the anchor is the noiseless correlation at
/// those same angles.
#[derive(Debug, Clone, Copy)]
pub struct PartialFamily {
    pub theta: f64,
}

impl PartialFamily {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0 < theta && theta <= FRAC_PI_2 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "state angle {theta} outside (0, pi/2]"
            )));
        }
        Ok(Self { theta })
    }

    pub fn strategy(&self, eta: f64) -> Result<QubitStrategy> {
        chsh_optimal_strategy(self.theta, eta)
    }

    pub fn decompose(&self, eta: f64) -> Result<CcDecomposition> {
        let strategy = self.strategy(eta)?;
        self.decompose_with_strategy(&strategy, eta)
    }

    pub fn decompose_with_strategy(
        &self,
        strategy: &QubitStrategy,
        eta: f64,
    ) -> Result<CcDecomposition> {
        let ideal = correlation_from_qubit_strategy(strategy)?;
        let anchor = apply_detection_efficiency(&ideal, 1.0)?;
        let observed = apply_detection_efficiency(&ideal, eta)?;
        max_local_weight(&observed, &[anchor])
    }

    /// One-way bound at the optimal measurements, key settings (0, 2).
    pub fn one_way_bound(&self, eta: f64, strat: &PreprocessingStrategy) -> Result<f64> {
        let dec = self.decompose(eta)?;
        Ok(report_from_decomposition(&dec, strat, (0, 2))?.bound)
    }
}

/// Strategies whose critical noise can be requested by name. The noisy
/// variants are evaluated in their flip -> 1/2 limit through the quadratic
/// coefficient, where they are most robust.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdStrategy {
    None,
    DetBin,
    DetBinNpLimit,
    RandBin,
    RandBinNpLimit,
    AnnounceNoClick,
}

impl ThresholdStrategy {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "none" => Ok(Self::None),
            "det" => Ok(Self::DetBin),
            "det-np" => Ok(Self::DetBinNpLimit),
            "rand" => Ok(Self::RandBin),
            "rand-np" => Ok(Self::RandBinNpLimit),
            "announce" => Ok(Self::AnnounceNoClick),
            other => Err(Error::InvalidParameter(format!(
                "unknown strategy {other}; expected none, det, det-np, rand, rand-np or announce"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::DetBin => "det",
            Self::DetBinNpLimit => "det-np",
            Self::RandBin => "rand",
            Self::RandBinNpLimit => "rand-np",
            Self::AnnounceNoClick => "announce",
        }
    }
}

/// Default noise bracket for threshold searches on a preset protocol.
pub fn default_bracket(tag: ScenarioTag) -> (f64, f64) {
    match tag.noise_kind() {
        NoiseKind::Efficiency => (0.84, 0.995),
        NoiseKind::Visibility => (0.72, 0.995),
    }
}

/// Critical noise of a named preprocessing strategy on a preset protocol.
pub fn named_threshold(
    tag: ScenarioTag,
    strategy: ThresholdStrategy,
    key: (usize, usize),
    tol: f64,
) -> Result<f64> {
    let (lo, hi) = default_bracket(tag);
    let alphabet = tag.key_alphabet();
    match strategy {
        ThresholdStrategy::None
        | ThresholdStrategy::DetBin
        | ThresholdStrategy::RandBin
        | ThresholdStrategy::AnnounceNoClick => {
            let strat = match strategy {
                ThresholdStrategy::None => StrategyKind::None.build(alphabet)?,
                ThresholdStrategy::DetBin => StrategyKind::DetBin.build(alphabet)?,
                ThresholdStrategy::RandBin => StrategyKind::RandBin.build(alphabet)?,
                ThresholdStrategy::AnnounceNoClick => {
                    StrategyKind::AnnounceNoClick.build(alphabet)?
                }
                _ => unreachable!(),
            };
            let crit = crate::thresholds::critical_noise(
                |noise| Ok(one_way_report(tag, noise, &strat, key)?.bound),
                lo,
                hi,
                tol,
            )?;
            Ok(crit.value)
        }
        ThresholdStrategy::DetBinNpLimit => crate::thresholds::noisy_prep_limit_threshold(
            |noise, p| {
                let strat = PreprocessingStrategy::det_bin_np(alphabet, 0, p)?;
                Ok(one_way_report(tag, noise, &strat, key)?.bound)
            },
            lo,
            hi,
            tol,
        ),
        ThresholdStrategy::RandBinNpLimit => {
            if alphabet < 3 {
                return Err(Error::InvalidParameter(
                    "random binning needs a no-click outcome".into(),
                ));
            }
            crate::thresholds::noisy_prep_limit_threshold(
                |noise, p| {
                    let strat = PreprocessingStrategy::rand_bin_np(alphabet, p)?;
                    Ok(one_way_report(tag, noise, &strat, key)?.bound)
                },
                lo,
                hi,
                tol,
            )
        }
    }
}

/// Critical noise of the two-way bound on a preset protocol, for a given Eve
/// post-map and (on lossy protocols) binning targets.
pub fn two_way_threshold(
    tag: ScenarioTag,
    key: (usize, usize),
    map: &crate::twoway::EvePostMap,
    bins: (usize, usize),
    tol: f64,
) -> Result<f64> {
    let (lo, hi) = default_bracket(tag);
    let crit = crate::thresholds::critical_noise(
        |noise| two_way_bound_at(tag, noise, key, map, bins),
        lo,
        hi,
        tol,
    )?;
    Ok(crit.value)
}

/// The two-way bound value at one noise level.
pub fn two_way_bound_at(
    tag: ScenarioTag,
    noise: f64,
    key: (usize, usize),
    map: &crate::twoway::EvePostMap,
    bins: (usize, usize),
) -> Result<f64> {
    let dec = tag.decompose(noise)?;
    let table = match tag.noise_kind() {
        NoiseKind::Efficiency => {
            crate::twoway::binned_tripartite_lossy(&dec, key.0, key.1, bins.0, bins.1)?
        }
        NoiseKind::Visibility => crate::ccattack::build_tripartite(&dec, key.0, key.1)?.joint,
    };
    crate::twoway::two_way_bound(&table, map)
}

/// Critical noise of the one-way bound maximized over all preprocessing, on a
/// preset protocol.
pub fn any_preprocessing_threshold(
    tag: ScenarioTag,
    key: (usize, usize),
    seed: u64,
    restarts: usize,
) -> Result<crate::thresholds::PreprocessingOptimum> {
    let alphabet = tag.key_alphabet();
    let dims = crate::thresholds::PreprocessingDims {
        keep: alphabet,
        announce: Some(2),
    };
    let factory = |noise: f64| -> Result<crate::thresholds::BoundEvaluator<'static>> {
        let dec = tag.decompose(noise)?;
        let key_table = crate::ccattack::observed_key_joint(&dec, key.0, key.1)?;
        Ok(Box::new(move |strat: &PreprocessingStrategy| {
            let pa = crate::ccattack::pa_term(&dec, strat, key.0, key.1)?;
            let ec = crate::ccattack::ec_term(&key_table, strat)?;
            Ok(pa - ec)
        }))
    };
    crate::thresholds::optimize_preprocessing(
        factory,
        alphabet,
        dims,
        default_bracket(tag),
        1e-6,
        seed,
        restarts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::binary_entropy;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    #[test]
    fn preset_reports_match_the_closed_forms() {
        let det = StrategyKind::DetBin.build(3).unwrap();
        let report = one_way_report(ScenarioTag::L2333, 0.9, &det, (0, 2)).unwrap();
        assert_close(report.bound, 0.06511609625888526, 1e-9);
        assert_close(report.local_weight, 0.624558441227157, 1e-8);
        assert_close(report.pa - report.ec, report.bound, 1e-15);
    }

    #[test]
    fn dedicated_and_shared_key_settings_differ_in_2233() {
        // the shared-setting protocol has a weaker key correlation
        let det = StrategyKind::DetBin.build(3).unwrap();
        let shared = one_way_report(ScenarioTag::L2233, 0.97, &det, (0, 0)).unwrap();
        let dedicated = one_way_report(ScenarioTag::L2333, 0.97, &det, (0, 2)).unwrap();
        assert!(shared.bound < dedicated.bound);
    }

    #[test]
    fn the_2422_key_pairs_agree() {
        let none = StrategyKind::None.build(2).unwrap();
        let first = one_way_report(ScenarioTag::V2422, 0.9, &none, (0, 2)).unwrap();
        let second = one_way_report(ScenarioTag::V2422, 0.9, &none, (1, 3)).unwrap();
        assert_close(first.bound, second.bound, 1e-9);
        // and match the 2322 protocol
        let base = one_way_report(ScenarioTag::V2322, 0.9, &none, (0, 2)).unwrap();
        assert_close(first.bound, base.bound, 1e-9);
    }

    #[test]
    fn partial_family_bound_approaches_the_small_angle_form() {
        let family = PartialFamily::new(1e-3).unwrap();
        let eta: f64 = 0.8;
        let dec = family.decompose(eta).unwrap();
        let limit = crate::localset::local_weight_partial_theta0(eta).unwrap();
        assert!((dec.local_weight - limit).abs() < 1e-3);
        let det = StrategyKind::DetBin.build(3).unwrap();
        let bound = family.one_way_bound(eta, &det).unwrap();
        // closed small-angle form of the bound
        let theta: f64 = 1e-3;
        let c2 = (theta / 2.0).cos().powi(2);
        let s2 = (theta / 2.0).sin().powi(2);
        let closed = eta * (3.0 * eta - 2.0) * binary_entropy(c2).unwrap()
            - eta * s2 * binary_entropy(eta).unwrap()
            - (1.0 - eta) * binary_entropy(eta * s2).unwrap();
        assert!((bound - closed).abs() < 2e-3 * closed.abs().max(1e-6));
    }

    #[test]
    fn scenario_tags_parse_and_reject() {
        assert_eq!(ScenarioTag::parse("2333").unwrap(), ScenarioTag::L2333);
        assert!(ScenarioTag::parse("9999").is_err());
    }
}

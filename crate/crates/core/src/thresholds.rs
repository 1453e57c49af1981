//! Critical-noise root finding and heuristic optimization over preprocessing
//! maps.
//!
//! One-way bounds cross zero transversally, so bisection applies directly.
//! Two-way bounds are conditional mutual informations and therefore
//! non-negative: at the critical point they touch zero from above, which is
//! handled by golden-section minimization. Noisy-preprocessing bounds vanish
//! identically at flip probability 1/2; their thresholds are roots of the
//! second-order coefficient in the flip offset, estimated by Richardson
//! extrapolation.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::ccattack::PreprocessingStrategy;
use crate::correlations::golden_section_max;
use crate::error::{Error, Result};
use crate::infotheory::StochasticMap;
use crate::protocols::PartialFamily;

/// Value below which a minimized non-negative bound counts as touching zero.
const TOUCH_TOL: f64 = 1e-7;

/// How a critical point was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    /// The bound changes sign at the critical point.
    Crossing,
    /// The bound is non-negative and touches zero at the critical point.
    Touching,
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalNoise {
    pub value: f64,
    pub kind: CriticalKind,
}

/// Finds the largest noise parameter at which the bound is non-positive.
///
/// With a sign change on the bracket this is a plain bisection root. When the
/// bound is positive at both ends, the interior minimum is located by
/// golden-section search and accepted as a touching zero if it lies below
/// `TOUCH_TOL`; otherwise there is no critical point on the range.
pub fn critical_noise(
    mut bound: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<CriticalNoise> {
    if lo >= hi {
        return Err(Error::InvalidParameter(format!("bad bracket [{lo}, {hi}]")));
    }
    let flo = bound(lo)?;
    let fhi = bound(hi)?;
    if flo <= 0.0 && fhi > 0.0 {
        let mut a = lo;
        let mut b = hi;
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if bound(mid)? <= 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        return Ok(CriticalNoise { value: 0.5 * (a + b), kind: CriticalKind::Crossing });
    }
    if flo > 0.0 && fhi > 0.0 {
        // possible touching zero between two positive ends
        let minimizer =
            golden_section_max(|x| -bound(x).unwrap_or(f64::INFINITY), lo, hi, tol.min(1e-9));
        let fmin = bound(minimizer)?;
        if fmin <= TOUCH_TOL {
            return Ok(CriticalNoise { value: minimizer, kind: CriticalKind::Touching });
        }
    }
    Err(Error::NoSignChange { lo, hi, flo, fhi })
}

/// Second-order coefficient of a noisy-preprocessing bound around flip
/// probability 1/2: the limit of bound / delta^2 as p = 1/2 +- delta -> 1/2.
///
/// Estimated by Richardson extrapolation from delta in {1e-3, 5e-4}; a third
/// evaluation at 2e-3 provides the stability check (relative spread of the
/// two extrapolants above 1e-4 is an error). The two one-sided evaluations
/// are averaged, which cancels any odd component exactly.
pub fn noisy_prep_limit_coefficient(
    mut bound_at_flip: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let mut scaled = |delta: f64| -> Result<f64> {
        let up = bound_at_flip(0.5 + delta)?;
        let down = bound_at_flip(0.5 - delta)?;
        Ok(0.5 * (up + down) / (delta * delta))
    };
    let c_coarse = scaled(2e-3)?;
    let c_mid = scaled(1e-3)?;
    let c_fine = scaled(5e-4)?;
    let extrap_fine = (4.0 * c_fine - c_mid) / 3.0;
    let extrap_mid = (4.0 * c_mid - c_coarse) / 3.0;
    let scale = extrap_fine.abs().max(extrap_mid.abs()).max(0.01);
    let spread = (extrap_fine - extrap_mid).abs() / scale;
    if spread > 1e-4 {
        return Err(Error::UnstableCoefficient { spread });
    }
    Ok(extrap_fine)
}

/// Critical noise of a noisy-preprocessing strategy in the p -> 1/2 limit:
/// the root of the delta^2 coefficient over the noise range.
pub fn noisy_prep_limit_threshold(
    mut bound: impl FnMut(f64, f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    let mut coeff = |noise: f64| noisy_prep_limit_coefficient(|p| bound(noise, p));
    let clo = coeff(lo)?;
    let chi = coeff(hi)?;
    if clo > 0.0 || chi < 0.0 {
        return Err(Error::NoSignChange { lo, hi, flo: clo, fhi: chi });
    }
    let mut a = lo;
    let mut b = hi;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if coeff(mid)? <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Output-alphabet sizes searched by [`optimize_preprocessing`].
#[derive(Debug, Clone, Copy)]
pub struct PreprocessingDims {
    /// Size of the kept variable's alphabet.
    pub keep: usize,
    /// Size of the announced message alphabet, when a message map is allowed.
    pub announce: Option<usize>,
}

/// Result of the preprocessing optimization.
#[derive(Debug, Clone)]
pub struct PreprocessingOptimum {
    pub threshold: f64,
    pub strategy: PreprocessingStrategy,
    /// Which search component achieved the threshold.
    pub achieved_by: String,
}

/// A bound evaluator at one fixed noise level.
pub type BoundEvaluator<'a> = Box<dyn Fn(&PreprocessingStrategy) -> Result<f64> + 'a>;

/// Heuristically maximizes the one-way bound over preprocessing strategies
/// and returns the critical noise of the maximized bound.
///
/// The search portfolio combines, per noise level:
/// - the named strategies (identity, deterministic and random binning, the
///   no-click announcement when a message is allowed), with the bit-flip
///   strength of the noisy variants optimized by golden-section search and
///   their p -> 1/2 limits handled through the delta^2 coefficient;
/// - Nelder-Mead restarts over raw stochastic matrices of the requested
///   dimensions, seeded deterministically.
///
/// The returned threshold never exceeds any named-strategy threshold.
pub fn optimize_preprocessing<'a, F>(
    factory: F,
    input_alphabet: usize,
    dims: PreprocessingDims,
    range: (f64, f64),
    tol: f64,
    seed: u64,
    restarts: usize,
) -> Result<PreprocessingOptimum>
where
    F: Fn(f64) -> Result<BoundEvaluator<'a>>,
{
    let (lo, hi) = range;
    let mut best: Option<(f64, PreprocessingStrategy, String)> = None;
    let consider =
        |threshold: f64, strat: PreprocessingStrategy, label: String,
         best: &mut Option<(f64, PreprocessingStrategy, String)>| {
            if best.as_ref().is_none_or(|(t, _, _)| threshold < *t) {
                *best = Some((threshold, strat, label));
            }
        };

    // named deterministic strategies
    let mut named: Vec<PreprocessingStrategy> = vec![PreprocessingStrategy::none(input_alphabet)];
    if input_alphabet >= 3 {
        named.push(PreprocessingStrategy::det_bin(input_alphabet, 0)?);
        named.push(PreprocessingStrategy::rand_bin(input_alphabet)?);
    }
    if dims.announce.is_some() {
        named.push(PreprocessingStrategy::announce_noclick(input_alphabet)?);
    }
    for strat in named {
        let result = critical_noise(
            |noise| factory(noise)?(&strat),
            lo,
            hi,
            tol,
        );
        if let Ok(c) = result {
            consider(c.value, strat.clone(), strat.name.clone(), &mut best);
        }
    }

    // noisy-preprocessing limits
    type StrategyFamily = Box<dyn Fn(f64) -> Result<PreprocessingStrategy>>;
    let mut np_families: Vec<(&str, StrategyFamily)> = Vec::new();
    if input_alphabet >= 3 {
        np_families.push((
            "det-np",
            Box::new(move |p| PreprocessingStrategy::det_bin_np(input_alphabet, 0, p)),
        ));
        np_families.push((
            "rand-np",
            Box::new(move |p| PreprocessingStrategy::rand_bin_np(input_alphabet, p)),
        ));
    } else {
        np_families.push((
            "np",
            Box::new(move |p| PreprocessingStrategy::det_bin_np(input_alphabet, 0, p)),
        ));
    }
    for (label, family) in &np_families {
        let result = noisy_prep_limit_threshold(
            |noise, p| factory(noise)?(&family(p)?),
            lo,
            hi,
            tol,
        );
        if let Ok(threshold) = result {
            consider(
                threshold,
                family(0.5 - 1e-3)?,
                format!("{label} (p -> 1/2 limit)"),
                &mut best,
            );
        }
    }

    // free-matrix Nelder-Mead search: bisect on "does any searched map give a
    // strictly positive bound"
    let nm_positive = |noise: f64, rng_seed: u64| -> Result<(f64, PreprocessingStrategy)> {
        let evaluate = factory(noise)?;
        nelder_mead_best_strategy(&evaluate, input_alphabet, dims, rng_seed, restarts)
    };
    let probe_hi = nm_positive(hi, seed)?;
    if probe_hi.0 > 1e-9 {
        let mut a = lo;
        let mut b = hi;
        let mut best_strat = probe_hi.1;
        let mut step = 0u64;
        while b - a > tol.max(1e-5) {
            step += 1;
            let mid = 0.5 * (a + b);
            let (value, strat) = nm_positive(mid, seed.wrapping_add(step))?;
            if value <= 1e-9 {
                a = mid;
            } else {
                b = mid;
                best_strat = strat;
            }
        }
        consider(0.5 * (a + b), best_strat, "matrix search".into(), &mut best);
    }

    let (threshold, strategy, achieved_by) =
        best.ok_or(Error::NoSignChange { lo, hi, flo: f64::NAN, fhi: f64::NAN })?;
    Ok(PreprocessingOptimum { threshold, strategy, achieved_by })
}

/// Best strategy found by Nelder-Mead over softmax-parameterized stochastic
/// matrices, including a golden-section sharpening of the noisy named
/// strategies (which live on a line inside the matrix space).
fn nelder_mead_best_strategy(
    evaluate: &BoundEvaluator,
    input_alphabet: usize,
    dims: PreprocessingDims,
    seed: u64,
    restarts: usize,
) -> Result<(f64, PreprocessingStrategy)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep_rows = dims.keep;
    let announce_rows = dims.announce;
    let keep_len = keep_rows * input_alphabet;
    let total_len = keep_len + announce_rows.map_or(0, |m| m * keep_rows);

    let strategy_of = |params: &[f64]| -> Result<PreprocessingStrategy> {
        let keep = softmax_map(&params[..keep_len], keep_rows, input_alphabet);
        let announce = announce_rows.map(|m| softmax_map(&params[keep_len..], m, keep_rows));
        PreprocessingStrategy::custom("searched", keep, announce)
    };
    let objective = |params: &[f64]| -> f64 {
        strategy_of(params)
            .and_then(|s| evaluate(&s))
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut best_value = f64::NEG_INFINITY;
    let mut best_params: Option<Vec<f64>> = None;
    for _ in 0..restarts.max(1) {
        let start: Vec<f64> = (0..total_len).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (params, value) = nelder_mead_max(&objective, &start, 0.8, 220);
        if value > best_value {
            best_value = value;
            best_params = Some(params);
        }
    }

    // sharpen with the noisy named strategies at their best flip strength:
    // they live on a line inside the matrix space that plain restarts rarely
    // resolve to full precision
    let mut best_named: Option<(f64, PreprocessingStrategy)> = None;
    let offer = |strat: PreprocessingStrategy,
                     best_named: &mut Option<(f64, PreprocessingStrategy)>|
     -> Result<()> {
        let v = evaluate(&strat)?;
        if best_named.as_ref().is_none_or(|(bv, _)| v > *bv) {
            *best_named = Some((v, strat));
        }
        Ok(())
    };
    let tuned_flip =
        |family: &dyn Fn(f64) -> Result<PreprocessingStrategy>| -> Result<PreprocessingStrategy> {
            let value_at = |p: f64| {
                family(p).and_then(|s| evaluate(&s)).unwrap_or(f64::NEG_INFINITY)
            };
            family(golden_section_max(value_at, 1e-6, 0.5, 1e-9))
        };
    offer(
        tuned_flip(&|p| PreprocessingStrategy::det_bin_np(input_alphabet, 0, p))?,
        &mut best_named,
    )?;
    if input_alphabet >= 3 {
        offer(
            tuned_flip(&|p| PreprocessingStrategy::rand_bin_np(input_alphabet, p))?,
            &mut best_named,
        )?;
    }
    if dims.announce.is_some() {
        offer(PreprocessingStrategy::announce_noclick(input_alphabet)?, &mut best_named)?;
    }

    let named = best_named.expect("at least one named candidate");
    if named.0 >= best_value {
        Ok(named)
    } else {
        Ok((best_value, strategy_of(&best_params.expect("some restart ran"))?))
    }
}

fn softmax_map(params: &[f64], rows: usize, cols: usize) -> StochasticMap {
    let mut entries = vec![0.0; rows * cols];
    for c in 0..cols {
        let mut total = 0.0;
        for r in 0..rows {
            let v = params[r * cols + c].clamp(-30.0, 30.0).exp();
            entries[r * cols + c] = v;
            total += v;
        }
        for r in 0..rows {
            entries[r * cols + c] /= total;
        }
    }
    StochasticMap::new(rows, cols, entries).expect("softmax columns are stochastic")
}

/// Plain Nelder-Mead maximization; returns (argmax, max).
pub(crate) fn nelder_mead_max(
    objective: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    iterations: usize,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| objective(p)).collect();
    for _ in 0..iterations {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if values[0] - values[n] < 1e-14 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> =
            (0..n).map(|k| centroid[k] + (centroid[k] - simplex[n][k])).collect();
        let f_reflect = objective(&reflect);
        if f_reflect > values[0] {
            let expand: Vec<f64> =
                (0..n).map(|k| centroid[k] + 2.0 * (centroid[k] - simplex[n][k])).collect();
            let f_expand = objective(&expand);
            if f_expand > f_reflect {
                simplex[n] = expand;
                values[n] = f_expand;
            } else {
                simplex[n] = reflect;
                values[n] = f_reflect;
            }
        } else if f_reflect > values[n - 1] {
            simplex[n] = reflect;
            values[n] = f_reflect;
        } else {
            let contract: Vec<f64> =
                (0..n).map(|k| centroid[k] + 0.5 * (simplex[n][k] - centroid[k])).collect();
            let f_contract = objective(&contract);
            if f_contract > values[n] {
                simplex[n] = contract;
                values[n] = f_contract;
            } else {
                for i in 1..=n {
                    let (head, tail) = simplex.split_at_mut(i);
                    for (slot, best) in tail[0].iter_mut().zip(&head[0]) {
                        *slot = best + 0.5 * (*slot - best);
                    }
                    values[i] = objective(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

/// Strategies swept in the state-angle scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStrategy {
    DetBin,
    DetBinNpLimit,
}

impl SweepStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            Self::DetBin => "det",
            Self::DetBinNpLimit => "det-np-limit",
        }
    }
}

/// One row of the state-angle sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub theta: f64,
    pub strategy: &'static str,
    pub eta_crit: f64,
    /// Alice's optimal test angle at the critical efficiency.
    pub phi_a: f64,
    /// Bound slightly above the critical efficiency (documents positivity).
    pub bound_above: f64,
}

/// Critical detection efficiency per state angle and binning strategy for the
/// partially entangled lossy family.
pub fn sweep(theta_grid: &[f64], strategies: &[SweepStrategy]) -> Result<Vec<SweepRow>> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let mut rows = Vec::new();
    for &theta in theta_grid {
        let family = PartialFamily::new(theta)?;
        for &strategy in strategies {
            let eta_crit = match strategy {
                SweepStrategy::DetBin => {
                    let det = PreprocessingStrategy::det_bin(3, 0)?;
                    critical_noise(
                        |eta| family.one_way_bound(eta, &det),
                        0.70,
                        0.999,
                        1e-6,
                    )?
                    .value
                }
                SweepStrategy::DetBinNpLimit => {
                    // the decomposition depends on eta only; cache it across
                    // the flip-probability evaluations of each coefficient
                    let cache: std::cell::RefCell<Option<(f64, crate::localset::CcDecomposition)>> =
                        std::cell::RefCell::new(None);
                    noisy_prep_limit_threshold(
                        |eta, p| {
                            let mut slot = cache.borrow_mut();
                            if slot.as_ref().map(|(e, _)| *e) != Some(eta) {
                                *slot = Some((eta, family.decompose(eta)?));
                            }
                            let dec = &slot.as_ref().expect("just filled").1;
                            let strat = PreprocessingStrategy::det_bin_np(3, 0, p)?;
                            Ok(crate::protocols::report_from_decomposition(dec, &strat, (0, 2))?
                                .bound)
                        },
                        0.72,
                        0.999,
                        1e-6,
                    )?
                }
            };
            let phi_a = family.strategy(eta_crit)?.alice_angles[1];
            let probe = (eta_crit + 1e-3).min(1.0);
            let bound_above = match strategy {
                SweepStrategy::DetBin => {
                    family.one_way_bound(probe, &PreprocessingStrategy::det_bin(3, 0)?)?
                }
                SweepStrategy::DetBinNpLimit => {
                    family.one_way_bound(probe, &PreprocessingStrategy::det_bin_np(3, 0, 0.45)?)?
                }
            };
            rows.push(SweepRow {
                theta,
                strategy: strategy.label(),
                eta_crit,
                phi_a,
                bound_above,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    #[test]
    fn bisection_finds_a_crossing_root() {
        let c = critical_noise(|x| Ok(x * x - 2.0), 1.0, 2.0, 1e-8).unwrap();
        assert_eq!(c.kind, CriticalKind::Crossing);
        assert_close(c.value, std::f64::consts::SQRT_2, 1e-7);
    }

    #[test]
    fn touching_roots_are_located_by_minimization() {
        let c = critical_noise(|x| Ok((x - 0.85).powi(2)), 0.7, 1.0, 1e-6).unwrap();
        assert_eq!(c.kind, CriticalKind::Touching);
        assert_close(c.value, 0.85, 1e-5);
    }

    #[test]
    fn missing_roots_are_an_error() {
        assert!(matches!(
            critical_noise(|x| Ok(x + 1.0), 0.5, 1.0, 1e-6),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn bisection_is_insensitive_to_bracket_refinement() {
        let f = |x: f64| Ok(x.powi(3) - 0.5);
        let a = critical_noise(f, 0.1, 1.0, 1e-9).unwrap().value;
        let b = critical_noise(f, 0.5, 0.95, 1e-9).unwrap().value;
        assert_close(a, b, 1e-8);
    }

    #[test]
    fn limit_coefficient_recovers_a_quadratic() {
        // bound = 3 delta^2 - 7 delta^4 near p = 1/2
        let bound = |p: f64| {
            let d: f64 = p - 0.5;
            Ok(3.0 * d * d - 7.0 * d.powi(4))
        };
        let c = noisy_prep_limit_coefficient(bound).unwrap();
        assert_close(c, 3.0, 1e-8);
    }

    #[test]
    fn limit_threshold_roots_the_coefficient() {
        // coefficient (noise - 0.88) changes sign at 0.88
        let bound = |noise: f64, p: f64| {
            let d: f64 = p - 0.5;
            Ok((noise - 0.88) * d * d + 0.3 * d.powi(4))
        };
        let root = noisy_prep_limit_threshold(bound, 0.8, 0.95, 1e-8).unwrap();
        assert_close(root, 0.88, 1e-7);
    }

    #[test]
    fn nelder_mead_maximizes_a_smooth_bowl() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - (x[1] + 2.0).powi(2);
        let (argmax, value) = nelder_mead_max(&f, &[0.0, 0.0], 0.5, 300);
        assert_close(argmax[0], 1.0, 1e-4);
        assert_close(argmax[1], -2.0, 1e-4);
        assert!(value > -1e-7);
    }
}

//! Two-way key-rate upper bounds: conditional mutual information I(A:B|F)
//! after a post-processing map on Eve's variable, including the closed-form
//! visibility bounds and a heuristic minimizer over Eve's maps.
//!
//! Any column-stochastic map on Eve's axis yields a valid upper bound; the
//! minimizer only sharpens it.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::ccattack::{build_tripartite, TripartiteDistribution};
use crate::error::{Error, Result};
use crate::infotheory::{conditional_mutual_information, JointDistribution, StochasticMap};
use crate::localset::CcDecomposition;

/// A post-processing map applied by Eve to her own variable.
#[derive(Debug, Clone)]
pub struct EvePostMap(pub StochasticMap);

impl EvePostMap {
    /// The map that keeps (0,0) and (1,1) and uniformly mixes the remaining
    /// symbols {(0,1), (1,0), ?} among themselves. Eve alphabet order:
    /// (0,0), (0,1), (1,0), (1,1), ?.
    ///
    /// Merging the three mixed symbols into one deterministically gives the
    /// same conditional mutual information; the square form keeps |F| = |E|.
    pub fn canonical() -> Self {
        let t = 1.0 / 3.0;
        EvePostMap(
            StochasticMap::from_rows(&[
                vec![1.0, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, t, t, 0.0, t],
                vec![0.0, t, t, 0.0, t],
                vec![0.0, 0.0, 0.0, 1.0, 0.0],
                vec![0.0, t, t, 0.0, t],
            ])
            .expect("constant map is column-stochastic"),
        )
    }

    /// The permuted variant keeping (0,1) and (1,0) while mixing
    /// {(0,0), (1,1), ?}, needed when the key outcomes are anti-correlated.
    pub fn permuted() -> Self {
        let t = 1.0 / 3.0;
        EvePostMap(
            StochasticMap::from_rows(&[
                vec![t, 0.0, 0.0, t, t],
                vec![0.0, 1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0, 0.0],
                vec![t, 0.0, 0.0, t, t],
                vec![t, 0.0, 0.0, t, t],
            ])
            .expect("constant map is column-stochastic"),
        )
    }

    pub fn identity(n: usize) -> Self {
        EvePostMap(StochasticMap::identity(n))
    }
}

/// Tripartite table over (A', B', E~) after all three parties deterministically
/// bin the no-click outcome: Alice onto `bin_a`, Bob onto `bin_b`, and Eve
/// binning each half of her pair the same way. Eve's binned alphabet is
/// ((0,0), (0,1), (1,0), (1,1), ?).
pub fn binned_tripartite_lossy(
    dec: &CcDecomposition,
    key_x: usize,
    key_y: usize,
    bin_a: usize,
    bin_b: usize,
) -> Result<JointDistribution> {
    let scenario = dec.scenario();
    if scenario.outcomes_a != 3 || scenario.outcomes_b != 3 {
        return Err(Error::InvalidParameter(
            "binning applies to the lossy three-outcome scenario".into(),
        ));
    }
    if bin_a > 1 || bin_b > 1 {
        return Err(Error::InvalidParameter("bin targets must be 0 or 1".into()));
    }
    let tri: TripartiteDistribution = build_tripartite(dec, key_x, key_y)?;
    let bin = |target: usize| {
        StochasticMap::deterministic(2, &[0, 1, target]).expect("targets checked")
    };
    let joint = tri.joint.apply_map(&bin(bin_a), 0)?.apply_map(&bin(bin_b), 1)?;
    // Eve's axis: pairs (a, b) with a, b in {0,1,no-click} in lexicographic
    // order, then "?". Bin each half of the pair and keep "?" last.
    let mut assign = Vec::with_capacity(10);
    for a in 0..3usize {
        for b in 0..3usize {
            let ab = if a == 2 { bin_a } else { a };
            let bb = if b == 2 { bin_b } else { b };
            assign.push(ab * 2 + bb);
        }
    }
    assign.push(4); // ? stays ?
    joint.apply_map(&StochasticMap::deterministic(5, &assign)?, 2)
}

/// I(A : B | F) after Eve applies `map` to her axis of the tripartite table.
pub fn two_way_bound(tri: &JointDistribution, map: &EvePostMap) -> Result<f64> {
    if tri.axes() != 3 {
        return Err(Error::DimensionMismatch("tripartite table must have 3 axes".into()));
    }
    conditional_mutual_information(&tri.apply_map(&map.0, 2)?)
}

/// Scenario tags for the closed-form visibility bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisibilityScenario {
    S2322,
    S2222,
    S2422,
}

/// Result of a closed-form two-way visibility bound.
#[derive(Debug, Clone, Copy)]
pub struct VisibilityBound {
    pub value: f64,
    /// Set when the requested visibility lies in the local range, where the
    /// bound is trivially zero.
    pub local: bool,
}

/// Closed-form two-way upper bound at visibility `v` for the maximal-CHSH
/// protocols. The 2422 protocol shares the 2322 form for both key pairs.
pub fn two_way_bound_visibility(v: f64, scenario: VisibilityScenario) -> Result<VisibilityBound> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("visibility {v} outside [0, 1]")));
    }
    let s2 = std::f64::consts::SQRT_2;
    if v <= 1.0 / s2 {
        return Ok(VisibilityBound { value: 0.0, local: true });
    }
    let (j, k) = match scenario {
        VisibilityScenario::S2322 | VisibilityScenario::S2422 => {
            ((1.0 - v) * (s2 - 1.0), 2.0 * (s2 * v - 1.0))
        }
        VisibilityScenario::S2222 => {
            ((1.0 - v / s2) * (s2 - 1.0), (1.0 + 1.0 / s2) * (s2 * v - 1.0))
        }
    };
    let xlog = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    let value = (1.0 + s2) / 2.0 * (xlog(j) + xlog(k) - xlog(j + k) + j + k);
    Ok(VisibilityBound { value: value.max(0.0), local: false })
}

/// Best-found Eve map and its bound value.
#[derive(Debug, Clone)]
pub struct MapSearchResult {
    pub map: EvePostMap,
    pub value: f64,
}

/// Heuristically minimizes I(A:B|F) over column-stochastic maps on Eve's axis
/// with |F| = |E|, by random-restart projected coordinate descent on the
/// columns. The identity and, on five-symbol alphabets, the canonical and
/// permuted maps seed the search, so the result never exceeds their values.
pub fn minimize_over_eve_maps(
    tri: &JointDistribution,
    seed: u64,
    restarts: usize,
) -> Result<MapSearchResult> {
    if tri.axes() != 3 {
        return Err(Error::DimensionMismatch("tripartite table must have 3 axes".into()));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart".into()));
    }
    let n = tri.shape()[2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<MapSearchResult> = None;
    let consider = |map: EvePostMap, value: f64, best: &mut Option<MapSearchResult>| {
        if best.as_ref().is_none_or(|b| value < b.value - 1e-15) {
            *best = Some(MapSearchResult { map, value });
        }
    };

    let mut seeds: Vec<Vec<f64>> = Vec::new();
    seeds.push(matrix_of(&EvePostMap::identity(n).0));
    if n == 5 {
        seeds.push(matrix_of(&EvePostMap::canonical().0));
        seeds.push(matrix_of(&EvePostMap::permuted().0));
    }
    for _ in seeds.len()..restarts.max(seeds.len()) {
        let mut m = vec![0.0; n * n];
        for c in 0..n {
            let mut col: Vec<f64> = (0..n).map(|_| rng.random::<f64>().max(1e-3)).collect();
            let s: f64 = col.iter().sum();
            for v in col.iter_mut() {
                *v /= s;
            }
            for (r, v) in col.iter().enumerate() {
                m[r * n + c] = *v;
            }
        }
        seeds.push(m);
    }

    for start in seeds {
        let (mat, value) = descend(tri, start, n)?;
        consider(EvePostMap(StochasticMap::new(n, n, mat)?), value, &mut best);
    }
    Ok(best.expect("at least one seed"))
}

fn matrix_of(map: &StochasticMap) -> Vec<f64> {
    let (r, c) = (map.rows(), map.cols());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[i * c + j] = map.entry(i, j);
        }
    }
    out
}

/// Projected coordinate descent over the columns of the map, converging when
/// a full sweep improves by less than 1e-10.
fn descend(tri: &JointDistribution, mut mat: Vec<f64>, n: usize) -> Result<(Vec<f64>, f64)> {
    let eval = |mat: &Vec<f64>| -> Result<f64> {
        let map = StochasticMap::new(n, n, mat.clone())?;
        conditional_mutual_information(&tri.apply_map(&map, 2)?)
    };
    let mut value = eval(&mat)?;
    for _sweep in 0..200 {
        let before = value;
        for col in 0..n {
            // numeric gradient of the CMI with respect to this column
            let mut grad = vec![0.0; n];
            let h = 1e-6;
            for (r, slot) in grad.iter_mut().enumerate() {
                let mut up = mat.clone();
                bump_column(&mut up, n, col, r, h);
                *slot = (eval(&up)? - value) / h;
            }
            // project the descent direction onto the simplex tangent
            let mean: f64 = grad.iter().sum::<f64>() / n as f64;
            let dir: Vec<f64> = grad.iter().map(|g| -(g - mean)).collect();
            let mut step = 0.5;
            while step > 1e-9 {
                let mut cand = mat.clone();
                for r in 0..n {
                    cand[r * n + col] = (cand[r * n + col] + step * dir[r]).max(0.0);
                }
                let s: f64 = (0..n).map(|r| cand[r * n + col]).sum();
                if s > 1e-12 {
                    for r in 0..n {
                        cand[r * n + col] /= s;
                    }
                    let cand_value = eval(&cand)?;
                    if cand_value < value - 1e-13 {
                        mat = cand;
                        value = cand_value;
                        break;
                    }
                }
                step *= 0.25;
            }
        }
        if before - value < 1e-10 {
            break;
        }
    }
    Ok((mat, value))
}

/// Adds `h` to entry (r, col) and renormalizes the column.
fn bump_column(mat: &mut [f64], n: usize, col: usize, row: usize, h: f64) {
    mat[row * n + col] += h;
    let s: f64 = (0..n).map(|r| mat[r * n + col]).sum();
    for r in 0..n {
        mat[r * n + col] /= s;
    }
}

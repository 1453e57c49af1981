//! Finite-alphabet probability containers and Shannon-entropy primitives.
//!
//! Every quantity is in bits (log base 2). Probabilities below `ZERO_CUTOFF`
//! are treated as exact zeros inside logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities below this are treated as exact zeros inside logs.
pub const ZERO_CUTOFF: f64 = 1e-15;

/// Shannon entropy of a probability vector, in bits.
///
/// `0 log 0` is taken as 0. The vector is trusted to be normalized; callers
/// that construct distributions through [`JointDistribution`] get that check.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let mut total = 0.0;
    for &p in probs {
        if p > ZERO_CUTOFF {
            total -= p * p.log2();
        }
    }
    total
}

/// Binary entropy `h(x) = -x log2 x - (1-x) log2 (1-x)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "binary entropy argument {x} outside [0, 1]"
        )));
    }
    Ok(shannon_entropy(&[x, 1.0 - x]))
}

/// Binary entropy without the range check, clamping tiny negative noise.
///
/// Used in hot loops where the argument is a probability computed in floating
/// point and may undershoot 0 or overshoot 1 by rounding error.
pub(crate) fn binary_entropy_clamped(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    shannon_entropy(&[x, 1.0 - x])
}

/// A column-stochastic matrix: `rows` output symbols, `cols` input symbols.
///
/// Entry `(o, i)` is the probability of producing output `o` from input `i`,
/// so every column sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMap {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl StochasticMap {
    /// Builds a map from row-major entries, validating column-stochasticity.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "stochastic map needs {rows}x{cols} = {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        for (k, &v) in entries.iter().enumerate() {
            if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "stochastic map entry {k} = {v} outside [0, 1]"
                )));
            }
        }
        for c in 0..cols {
            let s: f64 = (0..rows).map(|r| entries[r * cols + c]).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "stochastic map column {c} sums to {s}, expected 1"
                )));
            }
        }
        Ok(Self { rows, cols, entries })
    }

    /// Builds a map from rows of entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(nrows * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch("ragged stochastic map rows".into()));
            }
            entries.extend_from_slice(row);
        }
        Self::new(nrows, ncols, entries)
    }

    /// Identity map on `n` symbols.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, entries }
    }

    /// Deterministic map sending input `i` to output `assign[i]`.
    pub fn deterministic(rows: usize, assign: &[usize]) -> Result<Self> {
        let cols = assign.len();
        let mut entries = vec![0.0; rows * cols];
        for (i, &o) in assign.iter().enumerate() {
            if o >= rows {
                return Err(Error::InvalidParameter(format!(
                    "deterministic map target {o} out of range {rows}"
                )));
            }
            entries[o * cols + i] = 1.0;
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    /// Entropy of one column, in bits.
    pub fn column_entropy(&self, col: usize) -> f64 {
        let column: Vec<f64> = (0..self.rows).map(|r| self.entry(r, col)).collect();
        shannon_entropy(&column)
    }

    /// Applies the map to a probability vector over the input alphabet.
    pub fn apply_to_vec(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "map expects {} inputs, got {}",
                self.cols,
                input.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (i, &p) in input.iter().enumerate() {
            for (o, slot) in out.iter_mut().enumerate() {
                *slot += self.entry(o, i) * p;
            }
        }
        Ok(out)
    }
}

/// A joint distribution over finitely many axes, stored as a flat tensor in
/// row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    /// Builds a distribution, clamping tiny negative entries to zero and
    /// checking normalization to 1e-9.
    pub fn new(shape: Vec<usize>, mut probs: Vec<f64>) -> Result<Self> {
        let size: usize = shape.iter().product();
        if probs.len() != size {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} wants {size} entries, got {}",
                probs.len()
            )));
        }
        let mut total = 0.0;
        for p in probs.iter_mut() {
            if *p < 0.0 {
                if *p < -1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "negative probability {p}"
                    )));
                }
                *p = 0.0;
            }
            total += *p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "distribution sums to {total}, expected 1"
            )));
        }
        Ok(Self { shape, probs })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn axes(&self) -> usize {
        self.shape.len()
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut flat = 0;
        for (k, &i) in idx.iter().enumerate() {
            flat = flat * self.shape[k] + i;
        }
        flat
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        self.probs[self.flat_index(idx)]
    }

    /// Marginal distribution on the given axes (kept in the given order).
    pub fn marginal(&self, axes: &[usize]) -> Result<Vec<f64>> {
        for &a in axes {
            if a >= self.shape.len() {
                return Err(Error::DimensionMismatch(format!(
                    "axis {a} out of range for shape {:?}",
                    self.shape
                )));
            }
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let out_size: usize = out_shape.iter().product();
        let mut out = vec![0.0; out_size];
        let mut idx = vec![0usize; self.shape.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            let mut rem = flat;
            for k in (0..self.shape.len()).rev() {
                idx[k] = rem % self.shape[k];
                rem /= self.shape[k];
            }
            let mut o = 0;
            for (k, &a) in axes.iter().enumerate() {
                o = o * out_shape[k] + idx[a];
            }
            out[o] += p;
        }
        Ok(out)
    }

    /// Joint entropy of the marginal on `axes`, in bits.
    pub fn entropy(&self, axes: &[usize]) -> Result<f64> {
        Ok(shannon_entropy(&self.marginal(axes)?))
    }

    /// H(target | conditioners) in bits.
    pub fn conditional_entropy(&self, target: usize, cond: &[usize]) -> Result<f64> {
        let mut joint_axes = vec![target];
        joint_axes.extend_from_slice(cond);
        Ok(self.entropy(&joint_axes)? - self.entropy(cond)?)
    }

    /// I(X : Y | Z) = H(X|Z) + H(Y|Z) - H(X,Y|Z) in bits.
    pub fn conditional_mutual_information(
        &self,
        x: usize,
        y: usize,
        z: usize,
    ) -> Result<f64> {
        let hxz = self.entropy(&[x, z])?;
        let hyz = self.entropy(&[y, z])?;
        let hxyz = self.entropy(&[x, y, z])?;
        let hz = self.entropy(&[z])?;
        Ok(hxz + hyz - hxyz - hz)
    }

    /// Applies a column-stochastic map to one axis, returning the transformed
    /// distribution. Untouched marginals are preserved.
    pub fn apply_map(&self, map: &StochasticMap, axis: usize) -> Result<Self> {
        if axis >= self.shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        if map.cols() != self.shape[axis] {
            return Err(Error::DimensionMismatch(format!(
                "map has {} input symbols, axis {axis} has {}",
                map.cols(),
                self.shape[axis]
            )));
        }
        let mut out_shape = self.shape.clone();
        out_shape[axis] = map.rows();
        let out_size: usize = out_shape.iter().product();
        let mut out = vec![0.0; out_size];

        // stride of the mapped axis and the block sizes around it
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let n_in = self.shape[axis];
        let n_out = map.rows();
        for oblk in 0..outer {
            for i in 0..n_in {
                let base_in = (oblk * n_in + i) * inner;
                for o in 0..n_out {
                    let w = map.entry(o, i);
                    if w == 0.0 {
                        continue;
                    }
                    let base_out = (oblk * n_out + o) * inner;
                    for k in 0..inner {
                        out[base_out + k] += w * self.probs[base_in + k];
                    }
                }
            }
        }
        Ok(Self { shape: out_shape, probs: out })
    }
}

/// Conditional entropy H(target | conditioners) of a joint distribution.
pub fn conditional_entropy(
    joint: &JointDistribution,
    target: usize,
    cond: &[usize],
) -> Result<f64> {
    joint.conditional_entropy(target, cond)
}

/// I(A : B | F) for a three-axis distribution ordered (A, B, F).
pub fn conditional_mutual_information(joint: &JointDistribution) -> Result<f64> {
    if joint.axes() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "conditional mutual information expects 3 axes, got {}",
            joint.axes()
        )));
    }
    joint.conditional_mutual_information(0, 1, 2)
}

//! Dense two-phase revised simplex for small equality-form problems:
//! maximize c.x subject to A x = b, x >= 0.
//!
//! Sized for local-polytope decompositions: a few hundred rows, up to ~10^5
//! columns. Vertex columns are 0/1-sparse (a handful of unit entries), so
//! columns are stored implicitly and priced through index lists.
//!
//! Linearly dependent equality rows (per-setting normalizations, no-signalling
//! sums) are removed up front by rank-revealing elimination on the row Gram
//! matrix, so that phase 1 can always drive every artificial variable out of
//! the basis and phase 2 runs on structural columns alone. The basis inverse
//! is kept explicitly, refactorized periodically, and the basic solution is
//! polished by iterative refinement, which keeps the ill-conditioned
//! decompositions (probability entries spanning ten orders of magnitude)
//! accurate.
//!
//! Pivoting uses Dantzig's rule with a deterministic lowest-index tie-break,
//! falling back to Bland's rule when the objective stalls, so solutions are
//! reproducible and cycling is excluded.

use crate::error::{Error, Result};

/// Feasibility tolerance: phase-1 residual below this is clean.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Residuals in (FEASIBILITY_TOL, AT_TOLERANCE] are accepted with a warning.
pub const AT_TOLERANCE: f64 = 1e-8;
/// Reduced-cost threshold for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Pivot magnitude below this is treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;

/// One column of the constraint matrix.
#[derive(Debug, Clone)]
pub enum Column {
    /// Unit entries (value 1.0) at the listed row indices.
    Unit(Vec<usize>),
    /// A fully dense column over the original rows.
    Dense(Vec<f64>),
}

impl Column {
    /// Dot product against a vector indexed by original rows.
    fn dot(&self, y: &[f64]) -> f64 {
        match self {
            Column::Unit(rows) => rows.iter().map(|&r| y[r]).sum(),
            Column::Dense(vals) => vals.iter().zip(y).map(|(v, w)| v * w).sum(),
        }
    }

    /// Writes the column into `out` over working rows.
    fn expand(&self, row_map: &[Option<usize>], out: &mut [f64]) {
        out.fill(0.0);
        match self {
            Column::Unit(rows) => {
                for &r in rows {
                    if let Some(i) = row_map[r] {
                        out[i] += 1.0;
                    }
                }
            }
            Column::Dense(vals) => {
                for (r, &v) in vals.iter().enumerate() {
                    if v != 0.0 {
                        if let Some(i) = row_map[r] {
                            out[i] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Problem statement: maximize `objective . x` s.t. the columns combine to `rhs`.
pub struct StandardFormLp {
    pub columns: Vec<Column>,
    pub rhs: Vec<f64>,
    pub objective: Vec<f64>,
}

/// Solution of a [`StandardFormLp`].
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Values of the structural variables.
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Phase-1 residual (distance from exact feasibility).
    pub feasibility_residual: f64,
    /// True when the residual exceeded `FEASIBILITY_TOL` but not `AT_TOLERANCE`.
    pub feasible_at_tolerance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisVar {
    Structural(usize),
    /// Artificial variable pinned to one working row (phase 1 only).
    Artificial(usize),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Selects a maximal independent subset of rows by incremental Cholesky on
/// the normalized row Gram matrix. Exact dependencies in this constraint
/// family (block normalizations, no-signalling sums) show up at rounding
/// scale and are cleanly separated by the pivot threshold.
fn independent_rows(lp: &StandardFormLp) -> Vec<usize> {
    let m = lp.rhs.len();
    // gram[r][s] = sum_j A[r][j] A[s][j], built column by column
    let mut gram = vec![vec![0.0f64; m]; m];
    let mut buf: Vec<(usize, f64)> = Vec::new();
    for col in &lp.columns {
        buf.clear();
        match col {
            Column::Unit(rows) => buf.extend(rows.iter().map(|&r| (r, 1.0))),
            Column::Dense(vals) => {
                buf.extend(vals.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(r, v)| (r, *v)))
            }
        }
        for &(r, vr) in &buf {
            for &(s, vs) in &buf {
                gram[r][s] += vr * vs;
            }
        }
    }
    // normalize to a correlation matrix so thresholds are scale-free
    let norms: Vec<f64> = (0..m).map(|r| gram[r][r].max(1e-300).sqrt()).collect();
    for r in 0..m {
        for s in 0..m {
            gram[r][s] /= norms[r] * norms[s];
        }
    }
    // incremental Cholesky with skipping: keep rows whose residual after
    // projection onto the kept set stays above the pivot threshold
    let mut kept: Vec<usize> = Vec::new();
    let mut lfactor: Vec<Vec<f64>> = Vec::new(); // rows of L for kept set
    #[allow(clippy::needless_range_loop)] // gram is indexed on both axes
    for r in 0..m {
        let mut w = vec![0.0f64; kept.len()];
        for (k, &s) in kept.iter().enumerate() {
            let mut v = gram[r][s];
            for t in 0..k {
                v -= w[t] * lfactor[k][t];
            }
            w[k] = v / lfactor[k][k];
        }
        let residual = 1.0 - w.iter().map(|v| v * v).sum::<f64>();
        if residual > PIVOT_TOL {
            let mut lrow = w;
            lrow.push(residual.sqrt());
            lfactor.push(lrow);
            kept.push(r);
        }
    }
    kept
}

struct Tableau<'a> {
    lp: &'a StandardFormLp,
    /// original row -> working row (None for eliminated dependent rows)
    row_map: Vec<Option<usize>>,
    /// per working row: right-hand side
    rhs: Vec<f64>,
    basis: Vec<BasisVar>,
    basic_mask: Vec<bool>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a StandardFormLp, kept: &[usize]) -> Self {
        let mut row_map = vec![None; lp.rhs.len()];
        for (w, &orig) in kept.iter().enumerate() {
            row_map[orig] = Some(w);
        }
        let rhs: Vec<f64> = kept.iter().map(|&r| lp.rhs[r]).collect();
        let m = kept.len();
        let mut binv = vec![vec![0.0; m]; m];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Tableau {
            lp,
            row_map,
            xb: rhs.clone(),
            rhs,
            basis: (0..m).map(BasisVar::Artificial).collect(),
            basic_mask: vec![false; lp.columns.len()],
            binv,
            pivots_since_refactor: 0,
        }
    }

    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn working_column(&self, j: usize, out: &mut Vec<f64>) {
        out.resize(self.rows(), 0.0);
        self.lp.columns[j].expand(&self.row_map, out);
    }

    /// B^-1 times working column j.
    fn direction(&self, j: usize, col_buf: &mut Vec<f64>) -> Vec<f64> {
        self.working_column(j, col_buf);
        self.binv.iter().map(|row| dot(row, col_buf)).collect()
    }

    fn simplex_multipliers(&self, cost: impl Fn(BasisVar) -> f64) -> Vec<f64> {
        let m = self.rows();
        let mut y = vec![0.0; m];
        for (i, &bv) in self.basis.iter().enumerate() {
            let cb = cost(bv);
            if cb != 0.0 {
                for (slot, v) in y.iter_mut().zip(&self.binv[i]) {
                    *slot += cb * v;
                }
            }
        }
        y
    }

    /// Multipliers re-indexed by original rows, so that reduced costs are
    /// plain dot products against stored columns.
    fn original_row_vector(&self, working: &[f64]) -> Vec<f64> {
        let mut adj = vec![0.0; self.row_map.len()];
        for (orig, &w) in self.row_map.iter().enumerate() {
            if let Some(i) = w {
                adj[orig] = working[i];
            }
        }
        adj
    }

    fn pivot(&mut self, leave_row: usize, enter: BasisVar, direction: &[f64]) {
        let m = self.rows();
        let inv_piv = 1.0 / direction[leave_row];
        for k in 0..m {
            self.binv[leave_row][k] *= inv_piv;
        }
        self.xb[leave_row] *= inv_piv;
        #[allow(clippy::needless_range_loop)] // row pairs of binv are updated in place
        for i in 0..m {
            if i != leave_row {
                let factor = direction[i];
                if factor != 0.0 {
                    for k in 0..m {
                        self.binv[i][k] -= factor * self.binv[leave_row][k];
                    }
                    self.xb[i] -= factor * self.xb[leave_row];
                    if self.xb[i] < 0.0 && self.xb[i] > -1e-11 {
                        self.xb[i] = 0.0;
                    }
                }
            }
        }
        if let BasisVar::Structural(old) = self.basis[leave_row] {
            self.basic_mask[old] = false;
        }
        if let BasisVar::Structural(j) = enter {
            self.basic_mask[j] = true;
        }
        self.basis[leave_row] = enter;
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= 100 {
            self.refactor();
        }
    }

    /// Rebuilds B^-1 by Gauss-Jordan elimination with partial pivoting and
    /// recomputes x_B with two rounds of iterative refinement.
    fn refactor(&mut self) {
        let m = self.rows();
        let mut mat = vec![vec![0.0; m]; m];
        let mut buf = Vec::new();
        for (col_idx, &bv) in self.basis.iter().enumerate() {
            match bv {
                BasisVar::Structural(j) => {
                    self.working_column(j, &mut buf);
                    for i in 0..m {
                        mat[i][col_idx] = buf[i];
                    }
                }
                BasisVar::Artificial(row) => {
                    mat[row][col_idx] = 1.0;
                }
            }
        }
        let mut inv = vec![vec![0.0; m]; m];
        for (i, row) in inv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for col in 0..m {
            let mut best = col;
            for r in col + 1..m {
                if mat[r][col].abs() > mat[best][col].abs() {
                    best = r;
                }
            }
            mat.swap(col, best);
            inv.swap(col, best);
            let inv_piv = 1.0 / mat[col][col];
            for k in 0..m {
                mat[col][k] *= inv_piv;
                inv[col][k] *= inv_piv;
            }
            for r in 0..m {
                if r != col {
                    let f = mat[r][col];
                    if f != 0.0 {
                        for k in 0..m {
                            mat[r][k] -= f * mat[col][k];
                            inv[r][k] -= f * inv[col][k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.xb = self.binv.iter().map(|row| dot(row, &self.rhs)).collect();
        self.refine_basic_solution();
        for v in self.xb.iter_mut() {
            if *v < 0.0 && *v > -1e-10 {
                *v = 0.0;
            }
        }
        self.pivots_since_refactor = 0;
    }

    /// Iterative refinement of x_B: ill-conditioned bases lose digits in one
    /// inverse application, and a couple of correction rounds recover them.
    fn refine_basic_solution(&mut self) {
        let mut buf = Vec::new();
        for _ in 0..2 {
            let mut residual = self.rhs.clone();
            for (i, &bv) in self.basis.iter().enumerate() {
                let xi = self.xb[i];
                if xi == 0.0 {
                    continue;
                }
                match bv {
                    BasisVar::Structural(j) => {
                        self.working_column(j, &mut buf);
                        for (r, v) in buf.iter().enumerate() {
                            residual[r] -= xi * v;
                        }
                    }
                    BasisVar::Artificial(row) => residual[row] -= xi,
                }
            }
            let worst = residual.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
            if worst < 1e-14 {
                break;
            }
            for (i, row) in self.binv.iter().enumerate() {
                self.xb[i] += dot(row, &residual);
            }
        }
    }

    /// Two-pass min-ratio test: the first pass finds the tightest ratio over
    /// pivots above a direction-relative threshold, the second picks, among
    /// rows within a whisker of that ratio, the largest pivot (artificial
    /// leavers preferred on ties, then lowest basic index). Preferring large
    /// pivots keeps the basis inverse from amplifying rounding noise.
    fn ratio_test(&self, direction: &[f64]) -> Option<usize> {
        let scale = direction.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        let tol = 1e-9 * scale.max(1.0);
        let mut min_ratio = f64::INFINITY;
        for (i, &d) in direction.iter().enumerate() {
            if d > tol {
                min_ratio = min_ratio.min(self.xb[i].max(0.0) / d);
            }
        }
        if !min_ratio.is_finite() {
            return None;
        }
        let whisker = min_ratio + 1e-10 * (1.0 + min_ratio);
        let mut best: Option<usize> = None;
        for (i, &d) in direction.iter().enumerate() {
            if d > tol && self.xb[i].max(0.0) / d <= whisker {
                match best {
                    None => best = Some(i),
                    Some(bi) => {
                        let db = direction[bi];
                        if d > db * (1.0 + 1e-12)
                            || ((d - db).abs() <= db * 1e-12 && self.prefer_leaving(i, bi))
                        {
                            best = Some(i);
                        }
                    }
                }
            }
        }
        best
    }

    fn prefer_leaving(&self, cand: usize, incumbent: usize) -> bool {
        let rank = |bv: BasisVar| match bv {
            BasisVar::Artificial(r) => (0usize, r),
            BasisVar::Structural(j) => (1usize, j),
        };
        rank(self.basis[cand]) < rank(self.basis[incumbent])
    }

    fn objective_value(&self, cost: impl Fn(BasisVar) -> f64) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&bv, &v)| cost(bv) * v).sum()
    }
}

/// Runs simplex iterations for a fixed cost vector until optimal. Apparent
/// optimality triggers a refactorization and one re-pricing pass, so stale
/// basis inverses cannot fake convergence.
fn optimize(
    t: &mut Tableau,
    cost: impl Fn(BasisVar) -> f64 + Copy,
    structural_cost: impl Fn(usize) -> f64 + Copy,
    opt_tol: f64,
    max_iters: usize,
) -> Result<()> {
    let n = t.lp.columns.len();
    let mut stall_count = 0usize;
    let mut last_objective = f64::NEG_INFINITY;
    let mut col_buf = Vec::new();
    let mut cleanups = 0usize;
    for _ in 0..max_iters {
        let y = t.simplex_multipliers(cost);
        let adj = t.original_row_vector(&y);

        let bland = stall_count > 60;
        let mut enter: Option<(usize, f64)> = None;
        for j in 0..n {
            if t.basic_mask[j] {
                continue;
            }
            let rc = structural_cost(j) - t.lp.columns[j].dot(&adj);
            if rc > opt_tol {
                if bland {
                    enter = Some((j, rc));
                    break;
                }
                match enter {
                    None => enter = Some((j, rc)),
                    Some((_, brc)) if rc > brc + 1e-15 => enter = Some((j, rc)),
                    _ => {}
                }
            }
        }
        let Some((j, _)) = enter else {
            if t.pivots_since_refactor == 0 || cleanups >= 4 {
                return Ok(());
            }
            cleanups += 1;
            t.refactor();
            continue;
        };
        let direction = t.direction(j, &mut col_buf);
        let Some(leave) = t.ratio_test(&direction) else {
            return Err(Error::LpNonConvergence("unbounded direction".into()));
        };
        t.pivot(leave, BasisVar::Structural(j), &direction);

        let objective = t.objective_value(cost);
        if objective > last_objective + 1e-13 {
            stall_count = 0;
            last_objective = objective;
        } else {
            stall_count += 1;
        }
    }
    Err(Error::LpNonConvergence(format!("iteration limit {max_iters} reached")))
}

/// Maximizes the LP, choosing an independent row subset numerically.
pub fn maximize(lp: &StandardFormLp) -> Result<LpSolution> {
    let kept = independent_rows(lp);
    maximize_with_rows(lp, &kept)
}

/// Maximizes the LP over a caller-supplied independent row subset. The
/// eliminated rows are still checked for consistency against the phase-1
/// point, so an inconsistent selection surfaces as infeasibility.
pub fn maximize_with_rows(lp: &StandardFormLp, kept: &[usize]) -> Result<LpSolution> {
    let m = lp.rhs.len();
    let n = lp.columns.len();
    if lp.objective.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "objective has {} entries for {} columns",
            lp.objective.len(),
            n
        )));
    }
    for col in &lp.columns {
        if let Column::Dense(vals) = col {
            if vals.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "dense column has {} rows, expected {m}",
                    vals.len()
                )));
            }
        }
    }
    for &b in &lp.rhs {
        if b < -1e-12 {
            return Err(Error::InvalidParameter(
                "negative right-hand side in a probability system".into(),
            ));
        }
    }

    let mut t = Tableau::new(lp, kept);
    let iter_cap = 60 * (kept.len() + n).max(100);

    // phase 1: drive artificial mass to zero
    let phase1_cost = |bv: BasisVar| match bv {
        BasisVar::Structural(_) => 0.0,
        BasisVar::Artificial(_) => -1.0,
    };
    // phase 1 runs at a much tighter optimality tolerance: leftover
    // artificial mass scales with the dual tolerance, and the feasibility
    // budget is only 1e-9
    optimize(&mut t, phase1_cost, |_| 0.0, 1e-13, iter_cap)?;
    let mut residual: f64 = t
        .basis
        .iter()
        .zip(&t.xb)
        .filter(|(bv, _)| matches!(bv, BasisVar::Artificial(_)))
        .map(|(_, &v)| v.max(0.0))
        .sum();
    // consistency of the eliminated dependent rows against the current point
    {
        let mut x = vec![0.0; n];
        for (i, &bv) in t.basis.iter().enumerate() {
            if let BasisVar::Structural(j) = bv {
                x[j] = t.xb[i].max(0.0);
            }
        }
        let mut reproduced = vec![0.0; m];
        for (j, col) in lp.columns.iter().enumerate() {
            if x[j] != 0.0 {
                match col {
                    Column::Unit(rows) => {
                        for &r in rows {
                            reproduced[r] += x[j];
                        }
                    }
                    Column::Dense(vals) => {
                        for (r, &v) in vals.iter().enumerate() {
                            reproduced[r] += x[j] * v;
                        }
                    }
                }
            }
        }
        for (r, &w) in t.row_map.iter().enumerate() {
            if w.is_none() {
                residual = residual.max((reproduced[r] - lp.rhs[r]).abs());
            }
        }
    }
    if residual > AT_TOLERANCE {
        return Err(Error::Infeasible { residual });
    }
    let feasible_at_tolerance = residual > FEASIBILITY_TOL;

    // displace leftover artificial basics; the rows are independent, so a
    // pivot always exists, and the leaving level is zero up to the residual
    let mut col_buf = Vec::new();
    for r in 0..t.rows() {
        if !matches!(t.basis[r], BasisVar::Artificial(_)) {
            continue;
        }
        let row_mult = t.original_row_vector(&t.binv[r].clone());
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if t.basic_mask[j] {
                continue;
            }
            let entry = t.lp.columns[j].dot(&row_mult).abs();
            if entry > PIVOT_TOL && best.as_ref().is_none_or(|&(_, b)| entry > b) {
                best = Some((j, entry));
            }
        }
        let Some((j, _)) = best else {
            return Err(Error::LpNonConvergence(
                "artificial variable stuck on an independent row".into(),
            ));
        };
        let direction = t.direction(j, &mut col_buf);
        t.pivot(r, BasisVar::Structural(j), &direction);
    }
    t.refactor();

    // phase 2 on the structural objective, artificial-free
    let obj = &lp.objective;
    let phase2_cost = |bv: BasisVar| match bv {
        BasisVar::Structural(j) => obj[j],
        BasisVar::Artificial(_) => 0.0,
    };
    optimize(&mut t, phase2_cost, |j| obj[j], OPTIMALITY_TOL, iter_cap)?;

    let mut x = vec![0.0; n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if let BasisVar::Structural(j) = bv {
            x[j] = t.xb[i].max(0.0);
        }
    }
    let objective_value = dot(&x, &lp.objective);
    Ok(LpSolution { x, objective_value, feasibility_residual: residual, feasible_at_tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(cols: Vec<Vec<f64>>, rhs: Vec<f64>, obj: Vec<f64>) -> StandardFormLp {
        StandardFormLp {
            columns: cols.into_iter().map(Column::Dense).collect(),
            rhs,
            objective: obj,
        }
    }

    #[test]
    fn solves_a_textbook_problem() {
        // max x0 + 2 x1 s.t. x0 + x1 + s = 4, x1 + t = 3
        let lp = dense(
            vec![
                vec![1.0, 0.0],
                vec![1.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
            ],
            vec![4.0, 3.0],
            vec![1.0, 2.0, 0.0, 0.0],
        );
        let sol = maximize(&lp).unwrap();
        assert!((sol.objective_value - 7.0).abs() < 1e-9, "{}", sol.objective_value);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!((sol.x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        // x0 = 1 and 2 x0 = 3 simultaneously
        let lp = dense(vec![vec![1.0, 2.0]], vec![1.0, 3.0], vec![1.0]);
        assert!(matches!(maximize(&lp), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn drops_redundant_rows() {
        // duplicated constraint row for x0 + x1 = 1
        let lp = dense(
            vec![vec![1.0, 1.0, 2.0], vec![1.0, 1.0, 2.0]],
            vec![1.0, 1.0, 2.0],
            vec![1.0, 0.5],
        );
        let sol = maximize(&lp).unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unit_columns_match_dense_columns() {
        let unit = StandardFormLp {
            columns: vec![
                Column::Unit(vec![0, 2]),
                Column::Unit(vec![1]),
                Column::Unit(vec![0, 1, 2]),
            ],
            rhs: vec![1.0, 1.0, 1.0],
            objective: vec![1.0, 1.0, 1.0],
        };
        let densified = dense(
            vec![
                vec![1.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
                vec![1.0, 1.0, 1.0],
            ],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        );
        let a = maximize(&unit).unwrap();
        let b = maximize(&densified).unwrap();
        assert!((a.objective_value - b.objective_value).abs() < 1e-9);
    }

    #[test]
    fn rank_detection_separates_exact_dependencies() {
        // third row = first + second
        let lp = dense(
            vec![
                vec![1.0, 0.0, 1.0],
                vec![0.0, 1.0, 1.0],
                vec![1.0, 1.0, 2.0],
            ],
            vec![0.3, 0.7, 1.0],
            vec![1.0, 1.0, 1.0],
        );
        let kept = independent_rows(&lp);
        assert_eq!(kept.len(), 2);
        let sol = maximize(&lp).unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
    }
}

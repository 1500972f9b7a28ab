//! Production LP path: bounded-variable revised primal simplex.
//!
//! The solver keeps an explicit dense basis inverse, updated by row
//! operations on each pivot (O(m^2)) and rebuilt by Gauss-Jordan elimination
//! if the running representation drifts. Startup uses a greedy triangular
//! crash: columns that are the last structural nonzero of some row are pivoted
//! in one at a time, which on tree-structured power-flow problems covers every
//! row and leaves nothing for artificial variables to do.
//!
//! Phase 1 minimizes the total bound violation of the basic variables
//! (composite weights -1/0/+1) without letting a violated variable pass
//! through the bound it violates; phase 2 minimizes the true objective.
//! Both phases enter by Bland's rule (lowest eligible column) and break
//! ratio-test ties toward the lowest basic column, so runs are deterministic
//! and cycling is impossible while the violation set is stable.

use super::{LpError, LpProblem, LpSolution, LpStatus, VarStatus, FEAS_TOL, OPT_TOL};

/// Pivot-count cap before giving up; generous next to the ~m+n pivots a
/// non-degenerate run needs.
const MAX_ITERS_BASE: usize = 20_000;
/// Direction entries at or below this magnitude cannot serve as pivots.
const PIVOT_TOL: f64 = 1e-9;
/// Minimum magnitude for a crash pivot; smaller singletons are skipped.
const CRASH_PIVOT_TOL: f64 = 1e-6;
/// Ratio-test ties within this width are broken by Bland's rule.
const RATIO_TIE: f64 = 1e-12;
/// Full recomputation cadence for the basic values.
const REFRESH_EVERY: usize = 128;
/// Gauss-Jordan rebuilds allowed before declaring the basis singular.
const MAX_REFACTORS: usize = 3;

/// Solve `p` to proven optimality, infeasibility, or unboundedness.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    let mut s = Solver::new(p);
    s.crash();
    s.run()
}

struct Solver<'a> {
    p: &'a LpProblem,
    m: usize,
    /// Structural variable count; columns `>= n` are artificials fixed at 0.
    n: usize,
    ntot: usize,
    /// Sparse columns of the full (structural + artificial) matrix.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarStatus>,
    /// Basic column per basis slot.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    slot_of: Vec<usize>,
    /// Dense basis inverse, slot-major: `binv[slot * m + row]`.
    binv: Vec<f64>,
    /// Current basic values per slot.
    xb: Vec<f64>,
    iterations: usize,
    refactors: usize,
}

impl<'a> Solver<'a> {
    fn new(p: &'a LpProblem) -> Solver<'a> {
        let m = p.rows.len();
        let n = p.n_vars;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, row) in p.rows.iter().enumerate() {
            for &(c, v) in row {
                cols[c].push((r, v));
            }
        }
        Solver {
            p,
            m,
            n,
            ntot: n,
            cols,
            lower: p.lower.clone(),
            upper: p.upper.clone(),
            state: Vec::new(),
            basis: Vec::new(),
            in_basis: Vec::new(),
            slot_of: Vec::new(),
            binv: Vec::new(),
            xb: vec![0.0; m],
            iterations: 0,
            refactors: 0,
        }
    }

    /// Is the variable allowed to move at all?
    fn movable(&self, j: usize) -> bool {
        self.upper[j] - self.lower[j] > 0.0
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::FreeZero => 0.0,
            VarStatus::Basic => {
                debug_assert!(false, "basic column priced as nonbasic");
                0.0
            }
        }
    }

    fn phase2_cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.p.objective[j]
        } else {
            0.0
        }
    }

    /// Greedy triangular crash. Repeatedly pivots in a movable column that is
    /// the only remaining structural nonzero of some active row, retiring that
    /// row; rows left uncovered get an artificial fixed at zero. Because each
    /// chosen column touches only rows retired earlier plus its own, the crash
    /// basis is permuted-triangular and its inverse follows by substitution.
    fn crash(&mut self) {
        let m = self.m;
        let mut active = vec![true; m];
        let mut count = vec![0usize; self.n];
        for col in 0..self.n {
            count[col] = self.cols[col].len();
        }
        let mut dead = vec![false; self.n];
        let mut chosen = vec![false; self.n];
        let mut ready: std::collections::BTreeSet<usize> = (0..self.n)
            .filter(|&j| count[j] == 1 && self.movable(j))
            .collect();
        // (row, column) pivot pairs in selection order.
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(m);
        while let Some(&j) = ready.iter().next() {
            ready.remove(&j);
            if count[j] != 1 || dead[j] || chosen[j] {
                continue;
            }
            let mut hit: Option<(usize, f64)> = None;
            for &(r, v) in &self.cols[j] {
                if active[r] {
                    hit = Some((r, v));
                    break;
                }
            }
            let Some((r, v)) = hit else { continue };
            if v.abs() < CRASH_PIVOT_TOL {
                // Too small to anchor a triangular factor; the row can still
                // be covered by another column or an artificial.
                dead[j] = true;
                continue;
            }
            chosen[j] = true;
            pairs.push((r, j));
            active[r] = false;
            for &(c, _) in &self.p.rows[r] {
                count[c] -= 1;
                if count[c] == 1 && self.movable(c) && !chosen[c] && !dead[c] {
                    ready.insert(c);
                } else if count[c] == 0 {
                    ready.remove(&c);
                }
            }
        }
        // Artificials for anything the crash could not reach.
        for r in 0..m {
            if active[r] {
                let art = self.ntot;
                self.cols.push(vec![(r, 1.0)]);
                self.lower.push(0.0);
                self.upper.push(0.0);
                self.ntot += 1;
                pairs.push((r, art));
            }
        }
        debug_assert_eq!(pairs.len(), m);

        self.state = (0..self.ntot)
            .map(|j| {
                if self.lower[j].is_finite() {
                    VarStatus::AtLower
                } else if self.upper[j].is_finite() {
                    VarStatus::AtUpper
                } else {
                    VarStatus::FreeZero
                }
            })
            .collect();
        self.in_basis = vec![false; self.ntot];
        self.slot_of = vec![usize::MAX; self.ntot];
        self.basis = Vec::with_capacity(m);
        let mut pos_of_row = vec![usize::MAX; m];
        for (slot, &(r, j)) in pairs.iter().enumerate() {
            self.basis.push(j);
            self.state[j] = VarStatus::Basic;
            self.in_basis[j] = true;
            self.slot_of[j] = slot;
            pos_of_row[r] = slot;
        }

        // Invert the permuted-triangular crash basis by back substitution.
        // In slot coordinates M[i][k] = A[row_of_slot(i)][basis[k]] is upper
        // triangular with the crash pivots on the diagonal.
        let mut diag = vec![0.0; m];
        let mut offdiag: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                let pos = pos_of_row[r];
                if pos == k {
                    diag[k] = v;
                } else {
                    debug_assert!(pos < k, "crash basis not triangular");
                    offdiag[k].push((pos, v));
                }
            }
        }
        self.binv = vec![0.0; m * m];
        let mut tmp = vec![0.0; m];
        let mut touched: Vec<usize> = Vec::new();
        for kprime in 0..m {
            let r_col = pairs[kprime].0;
            tmp[kprime] = 1.0;
            touched.push(kprime);
            for k in (0..=kprime).rev() {
                let t = tmp[k];
                if t == 0.0 {
                    continue;
                }
                let z = t / diag[k];
                self.binv[k * m + r_col] = z;
                for &(pos, v) in &offdiag[k] {
                    if tmp[pos] == 0.0 {
                        touched.push(pos);
                    }
                    tmp[pos] -= v * z;
                }
            }
            for idx in touched.drain(..) {
                tmp[idx] = 0.0;
            }
        }
    }

    /// Recompute every basic value from the basis inverse.
    fn recompute_xb(&mut self) {
        let m = self.m;
        let mut rhs_eff = self.p.rhs.clone();
        for j in 0..self.ntot {
            if self.in_basis[j] {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(r, a) in &self.cols[j] {
                    rhs_eff[r] -= a * v;
                }
            }
        }
        for slot in 0..m {
            let row = &self.binv[slot * m..(slot + 1) * m];
            self.xb[slot] = row.iter().zip(&rhs_eff).map(|(b, r)| b * r).sum();
        }
    }

    /// y = w' B^{-1}, skipping zero weights (both phase objectives are sparse
    /// over the basis).
    fn btran(&self, w: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (slot, &ws) in w.iter().enumerate() {
            if ws == 0.0 {
                continue;
            }
            let row = &self.binv[slot * m..(slot + 1) * m];
            for (yr, b) in y.iter_mut().zip(row) {
                *yr += ws * b;
            }
        }
        y
    }

    /// abar = B^{-1} a_col.
    fn ftran(&self, col: usize) -> Vec<f64> {
        let m = self.m;
        let mut abar = vec![0.0; m];
        for &(r, v) in &self.cols[col] {
            for slot in 0..m {
                abar[slot] += self.binv[slot * m + r] * v;
            }
        }
        abar
    }

    /// Phase-1 gradient (-1 below, +1 above, 0 inside) and the worst
    /// violation across the basis.
    fn violation_weights(&self) -> (Vec<f64>, f64) {
        let mut w = vec![0.0; self.m];
        let mut worst = 0.0f64;
        for slot in 0..self.m {
            let j = self.basis[slot];
            let v = self.xb[slot];
            if v < self.lower[j] - FEAS_TOL {
                w[slot] = -1.0;
                worst = worst.max(self.lower[j] - v);
            } else if v > self.upper[j] + FEAS_TOL {
                w[slot] = 1.0;
                worst = worst.max(v - self.upper[j]);
            }
        }
        (w, worst)
    }

    /// Residual check straight from the problem data, independent of `binv`.
    fn residual_ok(&self) -> bool {
        let mut r = self.p.rhs.clone();
        for j in 0..self.ntot {
            let xv = if self.in_basis[j] {
                self.xb[self.slot_of[j]]
            } else {
                self.nonbasic_value(j)
            };
            if xv != 0.0 {
                for &(row, a) in &self.cols[j] {
                    r[row] -= a * xv;
                }
            }
        }
        let scale = 1.0 + self.p.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        r.iter().all(|v| v.abs() <= FEAS_TOL * scale)
    }

    /// Rebuild the basis inverse from scratch by Gauss-Jordan elimination
    /// with partial pivoting.
    fn refactorize(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.refactors += 1;
        let mut a = vec![0.0; m * m];
        for (slot, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + slot] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_val = a[k * m + k].abs();
            for r in (k + 1)..m {
                let v = a[r * m + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-11 {
                return Err(LpError::SingularBasis);
            }
            if piv_row != k {
                for c in 0..m {
                    a.swap(k * m + c, piv_row * m + c);
                    inv.swap(k * m + c, piv_row * m + c);
                }
            }
            let d = a[k * m + k];
            for c in 0..m {
                a[k * m + c] /= d;
                inv[k * m + c] /= d;
            }
            for r in 0..m {
                if r == k {
                    continue;
                }
                let f = a[r * m + k];
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    a[r * m + c] -= f * a[k * m + c];
                    inv[r * m + c] -= f * inv[k * m + c];
                }
            }
        }
        self.binv = inv;
        Ok(())
    }

    fn run(&mut self) -> Result<LpSolution, LpError> {
        let max_iters = MAX_ITERS_BASE + 50 * (self.m + self.ntot);
        self.recompute_xb();
        let mut since_refresh = 0usize;
        loop {
            if self.iterations > max_iters {
                return Err(LpError::IterationLimit(max_iters));
            }
            if since_refresh >= REFRESH_EVERY {
                self.recompute_xb();
                since_refresh = 0;
            }

            let (mut weights, worst) = self.violation_weights();
            let phase1 = worst > FEAS_TOL;
            if !phase1 {
                for slot in 0..self.m {
                    weights[slot] = self.phase2_cost(self.basis[slot]);
                }
            }
            let y = self.btran(&weights);

            // Entering column: lowest index whose reduced cost improves the
            // current phase objective (Bland's rule).
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.ntot {
                if self.in_basis[j] || !self.movable(j) {
                    continue;
                }
                let mut d = if phase1 { 0.0 } else { self.phase2_cost(j) };
                for &(r, v) in &self.cols[j] {
                    d -= y[r] * v;
                }
                let sigma = match self.state[j] {
                    VarStatus::AtLower if d < -OPT_TOL => 1.0,
                    VarStatus::AtUpper if d > OPT_TOL => -1.0,
                    VarStatus::FreeZero if d < -OPT_TOL => 1.0,
                    VarStatus::FreeZero if d > OPT_TOL => -1.0,
                    _ => continue,
                };
                entering = Some((j, sigma));
                break;
            }

            let Some((q, sigma)) = entering else {
                // Phase objective is stationary. Verify before declaring.
                self.recompute_xb();
                since_refresh = 0;
                if !self.residual_ok() {
                    if self.refactors >= MAX_REFACTORS {
                        return Err(LpError::SingularBasis);
                    }
                    self.refactorize()?;
                    self.recompute_xb();
                    continue;
                }
                let (_, worst2) = self.violation_weights();
                if (worst2 > FEAS_TOL) != phase1 {
                    // The refresh changed the phase; price again.
                    continue;
                }
                let status = if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
                return Ok(self.finish(status));
            };

            let abar = self.ftran(q);
            // Basic motion per unit increase of x_q along sigma is -dir.
            let dir: Vec<f64> = abar.iter().map(|a| sigma * a).collect();

            // Ratio test. Inside phase 1, a variable violating a bound blocks
            // only at that bound (it may not pass through to the far side),
            // while feasible variables block at whichever bound they approach.
            let mut t_best = f64::INFINITY;
            let mut leave: Option<(usize, VarStatus)> = None;
            for slot in 0..self.m {
                let d_i = dir[slot];
                if d_i.abs() <= PIVOT_TOL {
                    continue;
                }
                let jb = self.basis[slot];
                let v = self.xb[slot];
                let (lo, hi) = (self.lower[jb], self.upper[jb]);
                let below = phase1 && v < lo - FEAS_TOL;
                let above = phase1 && v > hi + FEAS_TOL;
                let cand = if below {
                    (d_i < 0.0).then(|| ((v - lo) / d_i, VarStatus::AtLower))
                } else if above {
                    (d_i > 0.0).then(|| ((v - hi) / d_i, VarStatus::AtUpper))
                } else if d_i > 0.0 {
                    lo.is_finite().then(|| ((v - lo) / d_i, VarStatus::AtLower))
                } else {
                    hi.is_finite().then(|| ((v - hi) / d_i, VarStatus::AtUpper))
                };
                let Some((t_raw, hit)) = cand else { continue };
                let t = t_raw.max(0.0);
                let replace = match leave {
                    None => t < t_best,
                    Some((pslot, _)) => {
                        if t < t_best - RATIO_TIE {
                            true
                        } else if t <= t_best + RATIO_TIE {
                            self.basis[slot] < self.basis[pslot]
                        } else {
                            false
                        }
                    }
                };
                if replace {
                    t_best = t.min(t_best);
                    leave = Some((slot, hit));
                }
            }

            let span = self.upper[q] - self.lower[q];
            if span.is_finite() && span <= t_best {
                // The entering variable reaches its far bound first.
                for slot in 0..self.m {
                    self.xb[slot] -= span * dir[slot];
                }
                self.state[q] = match self.state[q] {
                    VarStatus::AtLower => VarStatus::AtUpper,
                    VarStatus::AtUpper => VarStatus::AtLower,
                    s => s,
                };
                self.iterations += 1;
                since_refresh += 1;
                continue;
            }

            let Some((p_slot, hit)) = leave else {
                // Unblocked improving ray. Legitimate in phase 2; in phase 1
                // it can only be numerical (the violation sum is bounded
                // below), so rebuild and retry.
                if phase1 || self.refactors == 0 {
                    if self.refactors >= MAX_REFACTORS {
                        return Err(LpError::SingularBasis);
                    }
                    self.refactorize()?;
                    self.recompute_xb();
                    since_refresh = 0;
                    continue;
                }
                return Ok(self.finish(LpStatus::Unbounded));
            };

            // Pivot: step the basics, then swap q into slot p_slot.
            for slot in 0..self.m {
                self.xb[slot] -= t_best * dir[slot];
            }
            let entering_val = self.nonbasic_value(q) + sigma * t_best;
            let leaving = self.basis[p_slot];
            let piv = abar[p_slot];
            let m = self.m;
            let pivot_row: Vec<f64> =
                self.binv[p_slot * m..(p_slot + 1) * m].iter().map(|v| v / piv).collect();
            self.binv[p_slot * m..(p_slot + 1) * m].copy_from_slice(&pivot_row);
            for slot in 0..m {
                if slot == p_slot {
                    continue;
                }
                let f = abar[slot];
                if f == 0.0 {
                    continue;
                }
                let row = &mut self.binv[slot * m..(slot + 1) * m];
                for (rv, pv) in row.iter_mut().zip(&pivot_row) {
                    *rv -= f * pv;
                }
            }
            self.basis[p_slot] = q;
            self.in_basis[q] = true;
            self.slot_of[q] = p_slot;
            self.state[q] = VarStatus::Basic;
            self.in_basis[leaving] = false;
            self.slot_of[leaving] = usize::MAX;
            self.state[leaving] = hit;
            self.xb[p_slot] = entering_val;
            self.iterations += 1;
            since_refresh += 1;
        }
    }

    fn finish(&self, status: LpStatus) -> LpSolution {
        let n = self.n;
        let mut x = vec![0.0; n];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = if self.in_basis[j] {
                self.xb[self.slot_of[j]]
            } else {
                self.nonbasic_value(j)
            };
        }
        let mut w = vec![0.0; self.m];
        for slot in 0..self.m {
            w[slot] = self.phase2_cost(self.basis[slot]);
        }
        let duals = self.btran(&w);
        let mut basis_out = Vec::with_capacity(n);
        for j in 0..n {
            let st = if !self.in_basis[j] && self.lower[j] == self.upper[j] {
                // A pinned variable satisfies either sign rule; report the
                // side whose multiplier matches its final reduced cost.
                let mut d = self.phase2_cost(j);
                for &(r, v) in &self.cols[j] {
                    d -= duals[r] * v;
                }
                if d >= 0.0 {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                }
            } else {
                self.state[j]
            };
            basis_out.push(st);
        }
        let objective_value = (0..n).map(|j| self.p.objective[j] * x[j]).sum();
        LpSolution { status, x, objective_value, iterations: self.iterations, basis: basis_out, duals }
    }
}

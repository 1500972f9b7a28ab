//! Reference simplex: a deliberately naive full-tableau implementation.
//!
//! This exists so the production solver has something independent to be
//! checked against. It converts the box-bounded problem to standard form
//! (nonnegative variables, upper bounds as explicit rows), runs the
//! classic two-phase dense tableau method with Bland's rule, and maps the
//! answer back. Nothing here is shared with `solve_lp`, and nothing here is
//! tuned for speed — tests feed it small problems only.

use super::{LpProblem, LpStatus};

#[derive(Clone, Debug)]
pub struct NaiveSolution {
    pub status: LpStatus,
    /// Values in the original variable space (valid when Optimal).
    pub x: Vec<f64>,
    pub objective: f64,
}

const EPS: f64 = 1e-9;
const FEAS: f64 = 1e-7;
const MAX_PIVOTS: usize = 200_000;

/// How one original variable maps into standard-form columns.
enum VarMap {
    /// x = lo + u, u >= 0 (possibly with an upper-bound row on u).
    Shifted { col: usize, lo: f64 },
    /// x = hi - u, u >= 0 (lower bound infinite).
    Mirrored { col: usize, hi: f64 },
    /// x = u - v, both >= 0 (free variable).
    Split { pos: usize, neg: usize },
}

/// Solve by the book. Panics if Bland's rule somehow fails to terminate
/// within a generous pivot budget (it cannot cycle, so that would be a bug).
pub fn solve_naive(p: &LpProblem) -> NaiveSolution {
    p.validate().expect("oracle fed an invalid problem");

    // --- Standard-form conversion ---------------------------------------
    let mut maps: Vec<VarMap> = Vec::with_capacity(p.n_vars);
    let mut n_std = 0usize;
    // (column, cap) for doubly-bounded variables: u <= cap row added below.
    let mut caps: Vec<(usize, f64)> = Vec::new();
    for j in 0..p.n_vars {
        let (lo, hi) = (p.lower[j], p.upper[j]);
        if lo.is_finite() {
            maps.push(VarMap::Shifted { col: n_std, lo });
            if hi.is_finite() {
                caps.push((n_std, hi - lo));
            }
            n_std += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirrored { col: n_std, hi });
            n_std += 1;
        } else {
            maps.push(VarMap::Split { pos: n_std, neg: n_std + 1 });
            n_std += 2;
        }
    }

    // Dense rows over standard columns, rhs adjusted by shifts.
    let m_eq = p.rows.len();
    let m = m_eq + caps.len();
    let mut a = vec![vec![0.0f64; n_std]; m];
    let mut b = vec![0.0f64; m];
    for (i, row) in p.rows.iter().enumerate() {
        b[i] = p.rhs[i];
        for (j, coef) in row {
            match maps[*j] {
                VarMap::Shifted { col, lo } => {
                    a[i][col] += coef;
                    b[i] -= coef * lo;
                }
                VarMap::Mirrored { col, hi } => {
                    a[i][col] -= coef;
                    b[i] -= coef * hi;
                }
                VarMap::Split { pos, neg } => {
                    a[i][pos] += coef;
                    a[i][neg] -= coef;
                }
            }
        }
    }
    for (k, (col, cap)) in caps.iter().enumerate() {
        a[m_eq + k][*col] = 1.0;
        b[m_eq + k] = *cap;
    }

    // Slack for each cap row; artificial for every row that needs one.
    let n_slack = caps.len();
    for (k, _) in caps.iter().enumerate() {
        a[m_eq + k].resize(n_std + n_slack, 0.0);
        a[m_eq + k][n_std + k] = 1.0;
    }
    for i in 0..m_eq {
        a[i].resize(n_std + n_slack, 0.0);
    }
    // Flip rows to nonnegative rhs.
    for i in 0..m {
        if b[i] < 0.0 {
            for v in a[i].iter_mut() {
                *v = -*v;
            }
            b[i] = -b[i];
        }
    }
    // Basis: slacks where rhs stayed as-is and the slack carries +1;
    // otherwise an artificial. (After flipping, a cap row may have slack -1.)
    let mut basis = vec![usize::MAX; m];
    let mut n_total = n_std + n_slack;
    for (k, _) in caps.iter().enumerate() {
        let i = m_eq + k;
        if a[i][n_std + k] > 0.5 {
            basis[i] = n_std + k;
        }
    }
    let mut artificial_base = n_total;
    for i in 0..m {
        if basis[i] == usize::MAX {
            for row in 0..m {
                a[row].push(if row == i { 1.0 } else { 0.0 });
            }
            basis[i] = n_total;
            n_total += 1;
        }
    }

    // --- Phase 1: drive artificials to zero ------------------------------
    let phase1_cost: Vec<f64> = (0..n_total)
        .map(|j| if j >= artificial_base { 1.0 } else { 0.0 })
        .collect();
    let mut pivots = 0usize;
    let status1 = run_tableau(&mut a, &mut b, &mut basis, &phase1_cost, &mut pivots);
    assert!(
        !matches!(status1, TabStatus::Unbounded),
        "phase 1 objective is bounded below by zero"
    );
    let phase1_obj: f64 = basis
        .iter()
        .zip(b.iter())
        .filter(|(j, _)| **j >= artificial_base)
        .map(|(_, v)| v)
        .sum();
    if phase1_obj > FEAS {
        return NaiveSolution { status: LpStatus::Infeasible, x: vec![0.0; p.n_vars], objective: 0.0 };
    }

    // Pivot leftover zero-valued artificials out, dropping redundant rows.
    let mut i = 0;
    while i < m.min(a.len()) {
        if basis[i] >= artificial_base {
            let col = (0..artificial_base).find(|j| a[i][*j].abs() > 1e-8);
            match col {
                Some(j) => {
                    pivot(&mut a, &mut b, i, j);
                    basis[i] = j;
                    i += 1;
                }
                None => {
                    a.remove(i);
                    b.remove(i);
                    basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    // Artificials never re-enter: chop their columns.
    for row in a.iter_mut() {
        row.truncate(artificial_base);
    }
    n_total = artificial_base;
    artificial_base = usize::MAX;
    let _ = artificial_base;

    // --- Phase 2: the real objective -------------------------------------
    let mut cost = vec![0.0f64; n_total];
    let mut constant = 0.0f64;
    for j in 0..p.n_vars {
        let c = p.objective[j];
        match maps[j] {
            VarMap::Shifted { col, lo } => {
                cost[col] += c;
                constant += c * lo;
            }
            VarMap::Mirrored { col, hi } => {
                cost[col] -= c;
                constant += c * hi;
            }
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }
    let status2 = run_tableau(&mut a, &mut b, &mut basis, &cost, &mut pivots);
    if matches!(status2, TabStatus::Unbounded) {
        return NaiveSolution { status: LpStatus::Unbounded, x: vec![0.0; p.n_vars], objective: f64::NEG_INFINITY };
    }

    // --- Map back ---------------------------------------------------------
    let mut std_x = vec![0.0f64; n_total];
    for (i, j) in basis.iter().enumerate() {
        std_x[*j] = b[i];
    }
    let mut x = vec![0.0f64; p.n_vars];
    for j in 0..p.n_vars {
        x[j] = match maps[j] {
            VarMap::Shifted { col, lo } => lo + std_x[col],
            VarMap::Mirrored { col, hi } => hi - std_x[col],
            VarMap::Split { pos, neg } => std_x[pos] - std_x[neg],
        };
    }
    let objective: f64 = (0..n_total).map(|j| cost[j] * std_x[j]).sum::<f64>() + constant;
    NaiveSolution { status: LpStatus::Optimal, x, objective }
}

enum TabStatus {
    Optimal,
    Unbounded,
}

/// Bland's rule over a dense tableau: entering = lowest-index column with a
/// negative reduced cost, leaving = min ratio with lowest basic index on ties.
fn run_tableau(
    a: &mut Vec<Vec<f64>>,
    b: &mut Vec<f64>,
    basis: &mut Vec<usize>,
    cost: &[f64],
    pivots: &mut usize,
) -> TabStatus {
    let m = a.len();
    let n = if m == 0 { return TabStatus::Optimal } else { a[0].len() };
    loop {
        // Simplex multipliers via the basic costs, then reduced costs.
        let mut entering = None;
        for j in 0..n {
            if basis.contains(&j) {
                continue;
            }
            let mut d = cost[j];
            for i in 0..m {
                d -= cost[basis[i]] * a[i][j];
            }
            if d < -EPS {
                entering = Some(j);
                break; // lowest index: Bland
            }
        }
        let Some(q) = entering else { return TabStatus::Optimal };

        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if a[i][q] > EPS {
                let ratio = b[i] / a[i][q];
                let better = ratio < best - EPS
                    || ((ratio - best).abs() <= EPS
                        && leave.map(|l| basis[i] < basis[l]).unwrap_or(true));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else { return TabStatus::Unbounded };

        pivot(a, b, r, q);
        basis[r] = q;
        *pivots += 1;
        assert!(*pivots < MAX_PIVOTS, "tableau simplex exceeded its pivot budget");
    }
}

fn pivot(a: &mut [Vec<f64>], b: &mut [f64], r: usize, q: usize) {
    let piv = a[r][q];
    for v in a[r].iter_mut() {
        *v /= piv;
    }
    b[r] /= piv;
    let pivot_row = a[r].clone();
    let pivot_rhs = b[r];
    for i in 0..a.len() {
        if i == r {
            continue;
        }
        let factor = a[i][q];
        if factor != 0.0 {
            for (v, pv) in a[i].iter_mut().zip(pivot_row.iter()) {
                *v -= factor * pv;
            }
            b[i] -= factor * pivot_rhs;
        }
    }
}

//! Linearized multi-phase power flow as an equality-constrained LP.
//!
//! Voltages appear as squared magnitudes `w` per bus and phase. Along a line
//! with per-phase series impedance matrix `z`, the model ties the endpoint
//! voltages to the phase flows through
//!
//! ```text
//! w_to[p] = w_from[p] - 2 * sum_c ( Re(g[p][c]) * P[c] - Im(g[p][c]) * Q[c] )
//! g[p][c] = a^(idx(p) - idx(c) mod 3) * conj(z[p][c]),      a = e^(-j*2*pi/3)
//! ```
//!
//! which drops quadratic loss terms and assumes phase voltages stay near the
//! balanced reference. Flows are signed in the line's declared from -> to
//! orientation and boxed per phase by the line rating, applied independently
//! to P and Q. Every bus carries per-phase P and Q balance rows; substation
//! buses are pinned to the 1.0 pu reference. The objective is total active
//! generation priced at each generator's cost, so free pv energy is used
//! whenever the voltage window allows it.
//!
//! [`build_flow_problem`] takes two line masks so the same builder serves
//! both full evaluations of a radial topology (`flow == drop`) and the
//! optimistic relaxations used while searching over switch states, where
//! undecided lines may carry flow but do not constrain voltage.

use num_complex::Complex64;

use crate::linsolve::LpProblem;
use crate::netcase::{GenKind, NetworkCase, Phase, RadialTopology, Scenario};

/// A per-phase rotation weight: unit phasor at -120 degrees.
fn alpha() -> Complex64 {
    Complex64::new(-0.5, -(3.0f64.sqrt()) / 2.0)
}

/// The balanced-reference coupling weight between phases `p` and `c`.
fn gamma(p: Phase, c: Phase) -> Complex64 {
    match (p.index() + 3 - c.index()) % 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => alpha(),
        _ => alpha() * alpha(),
    }
}

/// An optional voltage window in volts pu, intersected with each bus's own
/// limits when building the LP. Narrower windows tighten the problem; a
/// window wider than a bus's native limits has no effect there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoltageWindow {
    pub vmin_pu: f64,
    pub vmax_pu: f64,
}

/// Column layout of a built flow problem, indexed by [`Phase::index`].
#[derive(Clone, Debug)]
pub struct FlowVariables {
    pub n_vars: usize,
    w: Vec<[Option<usize>; 3]>,
    line_p: Vec<[Option<usize>; 3]>,
    line_q: Vec<[Option<usize>; 3]>,
    gen_p: Vec<[Option<usize>; 3]>,
    gen_q: Vec<[Option<usize>; 3]>,
}

impl FlowVariables {
    pub fn w_col(&self, bus: usize, p: Phase) -> Option<usize> {
        self.w[bus][p.index()]
    }
    pub fn line_p_col(&self, line: usize, p: Phase) -> Option<usize> {
        self.line_p[line][p.index()]
    }
    pub fn line_q_col(&self, line: usize, p: Phase) -> Option<usize> {
        self.line_q[line][p.index()]
    }
    pub fn gen_p_col(&self, gen: usize, p: Phase) -> Option<usize> {
        self.gen_p[gen][p.index()]
    }
    pub fn gen_q_col(&self, gen: usize, p: Phase) -> Option<usize> {
        self.gen_q[gen][p.index()]
    }
}

/// An LP plus the column map that built it.
#[derive(Clone, Debug)]
pub struct FlowProblem {
    pub lp: LpProblem,
    pub vars: FlowVariables,
}

/// Bool mask over lines from a list of energized indices.
pub fn line_mask(case: &NetworkCase, lines: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; case.lines.len()];
    for &li in lines {
        mask[li] = true;
    }
    mask
}

/// Build the flow LP for one scenario.
///
/// `flow_lines` selects lines that carry flow variables; `drop_lines` (a
/// subset) selects lines whose voltage-drop equalities apply. Every bus gets
/// voltage variables and balance rows, so callers must not pass masks that
/// strand a loaded bus with no line at all (the LP would simply come back
/// infeasible).
pub fn build_flow_problem(
    case: &NetworkCase,
    scenario: &Scenario,
    flow_lines: &[bool],
    drop_lines: &[bool],
    window: Option<VoltageWindow>,
) -> FlowProblem {
    assert_eq!(flow_lines.len(), case.lines.len(), "flow mask length");
    assert_eq!(drop_lines.len(), case.lines.len(), "drop mask length");
    assert!(
        drop_lines.iter().zip(flow_lines).all(|(d, f)| !d | f),
        "drop lines must be a subset of flow lines"
    );
    assert_eq!(scenario.load_scale.len(), case.loads.len(), "load scale length");
    assert_eq!(scenario.pv_scale.len(), case.pv_generators().len(), "pv scale length");

    let nb = case.buses.len();
    let nl = case.lines.len();
    let ng = case.generators.len();
    let mut vars = FlowVariables {
        n_vars: 0,
        w: vec![[None; 3]; nb],
        line_p: vec![[None; 3]; nl],
        line_q: vec![[None; 3]; nl],
        gen_p: vec![[None; 3]; ng],
        gen_q: vec![[None; 3]; ng],
    };
    let mut next = 0usize;
    let mut take = || {
        let c = next;
        next += 1;
        c
    };
    for (bi, bus) in case.buses.iter().enumerate() {
        for p in bus.phases.iter() {
            vars.w[bi][p.index()] = Some(take());
        }
    }
    for (li, line) in case.lines.iter().enumerate() {
        if !flow_lines[li] {
            continue;
        }
        for p in line.phases.iter() {
            vars.line_p[li][p.index()] = Some(take());
        }
        for p in line.phases.iter() {
            vars.line_q[li][p.index()] = Some(take());
        }
    }
    for (gi, gen) in case.generators.iter().enumerate() {
        let host = case.buses[gen.bus].phases;
        for p in host.iter() {
            vars.gen_p[gi][p.index()] = Some(take());
        }
        for p in host.iter() {
            vars.gen_q[gi][p.index()] = Some(take());
        }
    }
    vars.n_vars = next;

    let mut lp = LpProblem::new(vars.n_vars);

    // Voltage boxes; substations hold the reference exactly.
    for (bi, bus) in case.buses.iter().enumerate() {
        let (mut lo, mut hi) = (bus.vmin_pu, bus.vmax_pu);
        if let Some(win) = window {
            lo = lo.max(win.vmin_pu);
            hi = hi.min(win.vmax_pu);
        }
        for p in bus.phases.iter() {
            let col = vars.w[bi][p.index()].unwrap();
            if bus.substation {
                lp.set_bounds(col, 1.0, 1.0);
            } else {
                lp.set_bounds(col, lo * lo, hi * hi);
            }
        }
    }
    // Flow boxes per phase.
    for (li, line) in case.lines.iter().enumerate() {
        if !flow_lines[li] {
            continue;
        }
        for (o, p) in line.phases.iter().enumerate() {
            let s = line.smax_pu[o];
            lp.set_bounds(vars.line_p[li][p.index()].unwrap(), -s, s);
            lp.set_bounds(vars.line_q[li][p.index()].unwrap(), -s, s);
        }
    }
    // Generator boxes; pv active power is capped by current availability.
    let pv_rank: std::collections::BTreeMap<usize, usize> =
        case.pv_generators().iter().enumerate().map(|(k, gi)| (*gi, k)).collect();
    for (gi, gen) in case.generators.iter().enumerate() {
        let host = case.buses[gen.bus].phases;
        let avail = match gen.kind {
            GenKind::Pv => scenario.pv_scale[pv_rank[&gi]],
            GenKind::Substation => 1.0,
        };
        for (o, p) in host.iter().enumerate() {
            let pcol = vars.gen_p[gi][p.index()].unwrap();
            let qcol = vars.gen_q[gi][p.index()].unwrap();
            lp.set_bounds(pcol, gen.pmin[o], avail * gen.pmax[o]);
            lp.set_bounds(qcol, gen.qmin[o], gen.qmax[o]);
            if gen.cost != 0.0 {
                lp.set_objective(pcol, gen.cost);
            }
        }
    }

    // Balance rows: per bus and phase, flows in minus flows out plus local
    // generation equals scaled load.
    for (bi, bus) in case.buses.iter().enumerate() {
        for (o, p) in bus.phases.iter().enumerate() {
            let mut prow: Vec<(usize, f64)> = Vec::new();
            let mut qrow: Vec<(usize, f64)> = Vec::new();
            for &li in case.lines_at(bi) {
                if !flow_lines[li] || !case.lines[li].phases.contains(p) {
                    continue;
                }
                let sign = if case.lines[li].to == bi { 1.0 } else { -1.0 };
                prow.push((vars.line_p[li][p.index()].unwrap(), sign));
                qrow.push((vars.line_q[li][p.index()].unwrap(), sign));
            }
            for &gi in case.generators_at(bi) {
                prow.push((vars.gen_p[gi][p.index()].unwrap(), 1.0));
                qrow.push((vars.gen_q[gi][p.index()].unwrap(), 1.0));
            }
            let mut pl = 0.0;
            let mut ql = 0.0;
            for &ldi in case.loads_at(bi) {
                let scale = scenario.load_scale[ldi];
                pl += scale * case.loads[ldi].p_nominal[o];
                ql += scale * case.loads[ldi].q_nominal[o];
            }
            lp.add_eq(&prow, pl);
            lp.add_eq(&qrow, ql);
        }
    }

    // Voltage-drop rows on the committed lines.
    for (li, line) in case.lines.iter().enumerate() {
        if !drop_lines[li] {
            continue;
        }
        for (po, p) in line.phases.iter().enumerate() {
            let mut row: Vec<(usize, f64)> = vec![
                (vars.w[line.to][p.index()].unwrap(), 1.0),
                (vars.w[line.from][p.index()].unwrap(), -1.0),
            ];
            for (co, c) in line.phases.iter().enumerate() {
                let weight = gamma(p, c) * line.z(po, co).conj();
                row.push((vars.line_p[li][c.index()].unwrap(), 2.0 * weight.re));
                row.push((vars.line_q[li][c.index()].unwrap(), -2.0 * weight.im));
            }
            lp.add_eq(&row, 0.0);
        }
    }

    FlowProblem { lp, vars }
}

/// Flow LP for a radial topology: committed lines are exactly the energized
/// ones.
pub fn radial_flow_problem(
    case: &NetworkCase,
    topo: &RadialTopology,
    scenario: &Scenario,
    window: Option<VoltageWindow>,
) -> FlowProblem {
    let mask = line_mask(case, &topo.energized);
    build_flow_problem(case, scenario, &mask, &mask, window)
}

/// Headline quantities pulled out of a solved flow problem.
#[derive(Clone, Debug)]
pub struct Dispatch {
    /// Objective: cost-weighted total active generation.
    pub generation_cost: f64,
    /// Active/reactive totals per generator, summed over phases.
    pub gen_p_total: Vec<f64>,
    pub gen_q_total: Vec<f64>,
    /// Lowest and highest voltage magnitude (pu) over buses and phases.
    pub v_min_pu: f64,
    pub v_max_pu: f64,
}

/// Summarize an optimal solution of `vars`' problem.
pub fn extract_dispatch(
    case: &NetworkCase,
    vars: &FlowVariables,
    x: &[f64],
    objective_value: f64,
) -> Dispatch {
    let mut gen_p_total = vec![0.0; case.generators.len()];
    let mut gen_q_total = vec![0.0; case.generators.len()];
    for gi in 0..case.generators.len() {
        for p in [Phase::A, Phase::B, Phase::C] {
            if let Some(col) = vars.gen_p_col(gi, p) {
                gen_p_total[gi] += x[col];
            }
            if let Some(col) = vars.gen_q_col(gi, p) {
                gen_q_total[gi] += x[col];
            }
        }
    }
    let mut v_min_pu = f64::INFINITY;
    let mut v_max_pu = f64::NEG_INFINITY;
    for bi in 0..case.buses.len() {
        for p in [Phase::A, Phase::B, Phase::C] {
            if let Some(col) = vars.w_col(bi, p) {
                let v = x[col].max(0.0).sqrt();
                v_min_pu = v_min_pu.min(v);
                v_max_pu = v_max_pu.max(v);
            }
        }
    }
    Dispatch { generation_cost: objective_value, gen_p_total, gen_q_total, v_min_pu, v_max_pu }
}

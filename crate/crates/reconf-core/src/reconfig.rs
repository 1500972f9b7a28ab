//! Switch optimization: exact search, assignment-restricted search, and the
//! assignment repair / voltage-relaxation machinery around them.
//!
//! The exact solver is a depth-first branch-and-bound over switch states in
//! file order, opening before closing, so the visit order is lexicographic
//! over configuration strings and the result is deterministic including
//! tie-breaks. Three graph prunes run before any LP at a node:
//!
//! * a cycle among surely-closed lines survives into every completion;
//! * two substations joined by surely-closed lines can never separate;
//! * a bus with no path to a substation through non-open lines can never be
//!   energized.
//!
//! Nodes that survive are bounded by an optimistic relaxation: flow variables
//! exist on every non-open line, but voltage-drop equalities are imposed only
//! on surely-energized lines (non-switchable plus decided-closed). Any radial
//! completion's dispatch remains feasible for that relaxation with zero flow
//! on the lines it opens, so the relaxation value is a true lower bound, and
//! both its infeasibility and bound-domination prunes are exact.
//!
//! The restricted solver reuses the same engine after forcing open every
//! switch that straddles two blocks with different labels; intra-label
//! switches stay free. Blocks only ever connect to same-label blocks, so any
//! radial completion realizes exactly the requested assignment.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::linsolve::{solve_lp, LpError, LpStatus};
use crate::lpf::{build_flow_problem, extract_dispatch, Dispatch, VoltageWindow};
use crate::netcase::{
    BlockAssignment, CaseError, LoadBlockPartition, NetworkCase, Scenario, SwitchConfiguration,
    UnionFind,
};

/// Strict-improvement margin for replacing the incumbent.
const IMPROVE_EPS: f64 = 1e-9;

#[derive(Error, Debug)]
pub enum ReconfigError {
    #[error("no radial configuration can serve this scenario")]
    NoFeasibleTopology,
    #[error("assignment is not realizable: {0}")]
    Unrealizable(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Case(#[from] CaseError),
}

/// Search effort counters plus wall time (wall time is reporting-only and
/// excluded from determinism guarantees).
#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub nodes: usize,
    pub bound_lps: usize,
    pub leaf_lps: usize,
    pub wall: Duration,
}

impl SolveStats {
    pub fn lp_count(&self) -> usize {
        self.bound_lps + self.leaf_lps
    }
}

/// An optimal (or restricted-optimal) reconfiguration.
#[derive(Clone, Debug)]
pub struct ReconfigResult {
    pub config: SwitchConfiguration,
    pub assignment: BlockAssignment,
    pub objective: f64,
    pub dispatch: Dispatch,
    pub stats: SolveStats,
}

/// The default voltage relaxation ladder: tight to native-wide.
pub fn default_ladder() -> Vec<VoltageWindow> {
    vec![
        VoltageWindow { vmin_pu: 0.900, vmax_pu: 1.100 },
        VoltageWindow { vmin_pu: 0.875, vmax_pu: 1.125 },
        VoltageWindow { vmin_pu: 0.850, vmax_pu: 1.150 },
    ]
}

/// Exact optimum over every radial configuration. `fixed` pins individual
/// switches (same indexing as [`NetworkCase::switchable_lines`]); pass `&[]`
/// to leave them all free.
pub fn solve_exact(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    scenario: &Scenario,
    window: Option<VoltageWindow>,
    fixed: &[Option<bool>],
) -> Result<ReconfigResult, ReconfigError> {
    let k = case.switchable_lines().len();
    let state: Vec<Option<bool>> = if fixed.is_empty() {
        vec![None; k]
    } else if fixed.len() == k {
        fixed.to_vec()
    } else {
        return Err(ReconfigError::BadInput(format!(
            "fixed has {} entries for {} switches",
            fixed.len(),
            k
        )));
    };
    check_scenario(case, scenario)?;
    let mut search = Search {
        case,
        scenario,
        window,
        state,
        incumbent: None,
        stats: SolveStats::default(),
    };
    let started = Instant::now();
    search.dfs(0)?;
    search.stats.wall = started.elapsed();
    finish_search(case, partition, search)
}

/// Cheapest radial configuration that feeds each block from its labeled
/// substation. Fails fast when the assignment is not realizable at all.
pub fn solve_restricted(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    scenario: &Scenario,
    assignment: &BlockAssignment,
    window: Option<VoltageWindow>,
) -> Result<ReconfigResult, ReconfigError> {
    validate_assignment(case, partition, assignment)?;
    if let Err(why) = realizability(case, partition, assignment) {
        return Err(ReconfigError::Unrealizable(why));
    }
    check_scenario(case, scenario)?;
    if !region_supply_screen(case, partition, scenario, assignment) {
        return Err(ReconfigError::NoFeasibleTopology);
    }
    // Force open every switch whose endpoints carry different labels.
    let state: Vec<Option<bool>> = case
        .switchable_lines()
        .iter()
        .map(|&li| {
            let line = &case.lines[li];
            let la = assignment.labels[partition.block_of_bus[line.from]];
            let lb = assignment.labels[partition.block_of_bus[line.to]];
            if la != lb {
                Some(false)
            } else {
                None
            }
        })
        .collect();
    let mut search = Search {
        case,
        scenario,
        window,
        state,
        incumbent: None,
        stats: SolveStats::default(),
    };
    let started = Instant::now();
    search.dfs(0)?;
    search.stats.wall = started.elapsed();
    let result = finish_search(case, partition, search)?;
    debug_assert_eq!(result.assignment, *assignment);
    Ok(result)
}

/// Window-independent supply screen for a fixed assignment. On any topology
/// the restricted search can produce, each label region is electrically
/// isolated (inter-label switches are forced open and non-switchable lines
/// never cross regions), so lossless conservation makes the region's
/// per-phase load equal the sum of its own units' outputs. The screen checks
/// that each such load fits inside the region's aggregated generation
/// capability box — substations at full availability, pv units at the
/// scenario's. Every LP-feasible dispatch satisfies these sums, so a
/// violation proves infeasibility at any voltage window without building an
/// LP; the screen never rejects a feasible case.
fn region_supply_screen(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    scenario: &Scenario,
    assignment: &BlockAssignment,
) -> bool {
    // Slack well above the LP's own feasibility tolerance so knife-edge
    // cases fall through to the real solve instead of being pre-judged.
    const SLACK: f64 = 1e-6;
    let n_subs = case.substations().len();
    let mut load_p = vec![[0.0f64; 3]; n_subs];
    let mut load_q = vec![[0.0f64; 3]; n_subs];
    let mut p_lo = vec![[0.0f64; 3]; n_subs];
    let mut p_hi = vec![[0.0f64; 3]; n_subs];
    let mut q_lo = vec![[0.0f64; 3]; n_subs];
    let mut q_hi = vec![[0.0f64; 3]; n_subs];

    for (ldi, load) in case.loads.iter().enumerate() {
        let region = assignment.labels[partition.block_of_bus[load.bus]];
        let scale = scenario.load_scale[ldi];
        for (o, p) in case.buses[load.bus].phases.iter().enumerate() {
            load_p[region][p.index()] += scale * load.p_nominal[o];
            load_q[region][p.index()] += scale * load.q_nominal[o];
        }
    }
    let mut avail = vec![1.0f64; case.generators.len()];
    for (k, &gi) in case.pv_generators().iter().enumerate() {
        avail[gi] = scenario.pv_scale[k];
    }
    for (gi, gen) in case.generators.iter().enumerate() {
        let region = assignment.labels[partition.block_of_bus[gen.bus]];
        for (o, p) in case.buses[gen.bus].phases.iter().enumerate() {
            p_lo[region][p.index()] += gen.pmin[o];
            p_hi[region][p.index()] += avail[gi] * gen.pmax[o];
            q_lo[region][p.index()] += gen.qmin[o];
            q_hi[region][p.index()] += gen.qmax[o];
        }
    }
    for s in 0..n_subs {
        for ph in 0..3 {
            if load_p[s][ph] < p_lo[s][ph] - SLACK
                || load_p[s][ph] > p_hi[s][ph] + SLACK
                || load_q[s][ph] < q_lo[s][ph] - SLACK
                || load_q[s][ph] > q_hi[s][ph] + SLACK
            {
                return false;
            }
        }
    }
    true
}

/// Restricted solve over the relaxation ladder; reports the lowest rung that
/// admits a feasible radial configuration along with its solution.
#[derive(Clone, Debug)]
pub struct LadderSolve {
    pub result: ReconfigResult,
    /// Index into the ladder of the lowest feasible rung.
    pub rung: usize,
    /// Total LPs spent across every rung actually solved.
    pub lp_count: usize,
}

/// Find the lowest feasible ladder rung and its solution.
///
/// Rung windows are nested (each contains the previous one), so feasibility
/// is monotone along the ladder and the lowest feasible rung can be located
/// by bisection: two searches for a three-rung ladder instead of up to
/// three. The answer is identical to a tightest-first scan; only the set of
/// rungs actually tried differs.
pub fn relax_and_solve(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    scenario: &Scenario,
    assignment: &BlockAssignment,
    ladder: &[VoltageWindow],
) -> Result<LadderSolve, ReconfigError> {
    if ladder.is_empty() {
        return Err(ReconfigError::BadInput("empty voltage ladder".to_string()));
    }
    let mut spent = 0usize;
    let mut best: Option<(usize, ReconfigResult)> = None;
    let mut lo = 0usize;
    let mut hi = ladder.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        match solve_restricted(case, partition, scenario, assignment, Some(ladder[mid])) {
            Ok(result) => {
                spent += result.stats.lp_count();
                best = Some((mid, result));
                hi = mid;
            }
            Err(ReconfigError::NoFeasibleTopology) => lo = mid + 1,
            Err(other) => return Err(other),
        }
    }
    match best {
        Some((rung, result)) => {
            // The last stored solve is exactly the bisection's answer.
            debug_assert_eq!(rung, lo);
            Ok(LadderSolve { result, rung, lp_count: spent })
        }
        None => Err(ReconfigError::NoFeasibleTopology),
    }
}

/// Can each label region be served by its substation at all, ignoring flow
/// physics? Checks that every substation's block carries its own label and
/// that each label region is connected using only non-switchable lines and
/// intra-label switches.
pub fn is_realizable(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    assignment: &BlockAssignment,
) -> bool {
    realizability(case, partition, assignment).is_ok()
}

fn realizability(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    assignment: &BlockAssignment,
) -> Result<(), String> {
    let subs = case.substations();
    for (si, &gi) in subs.iter().enumerate() {
        let bus = case.generators[gi].bus;
        let label = assignment.labels[partition.block_of_bus[bus]];
        if label != si {
            return Err(format!(
                "substation {} sits in a block labeled {}",
                case.buses[bus].id, label
            ));
        }
    }
    let mut uf = UnionFind::new(case.buses.len());
    for line in &case.lines {
        let la = assignment.labels[partition.block_of_bus[line.from]];
        let lb = assignment.labels[partition.block_of_bus[line.to]];
        if !line.switchable || la == lb {
            uf.union(line.from, line.to);
        }
    }
    let sub_root: Vec<usize> =
        subs.iter().map(|&gi| uf.find(case.generators[gi].bus)).collect();
    for (bi, bus) in case.buses.iter().enumerate() {
        let label = assignment.labels[partition.block_of_bus[bi]];
        if uf.find(bi) != sub_root[label] {
            return Err(format!(
                "bus {} cannot reach substation {} inside its label region",
                bus.id, label
            ));
        }
    }
    Ok(())
}

/// Make a predicted assignment realizable. Realizable inputs pass through
/// unchanged; otherwise label groups are flipped breadth-first by Hamming
/// radius (1 up to 3), then, as a last resort, the whole realizable set is
/// scanned for the nearest member. Ties resolve to the lexicographically
/// smallest group-label vector, so repair is deterministic.
pub fn repair_assignment(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    predicted: &BlockAssignment,
) -> Result<BlockAssignment, ReconfigError> {
    validate_assignment(case, partition, predicted)?;
    if !predicted.respects_ties(partition) {
        return Err(ReconfigError::BadInput(
            "predicted assignment splits a tie group".to_string(),
        ));
    }
    if is_realizable(case, partition, predicted) {
        return Ok(predicted.clone());
    }
    let n_subs = case.substations().len();
    let groups = &partition.label_groups;
    let base: Vec<usize> = groups
        .iter()
        .map(|g| predicted.labels[g[0]])
        .collect();

    let expand = |group_labels: &[usize]| -> BlockAssignment {
        let mut labels = vec![0usize; partition.n_blocks()];
        for (g, &l) in groups.iter().zip(group_labels) {
            for &b in g {
                labels[b] = l;
            }
        }
        BlockAssignment { labels }
    };

    // Radius-bounded breadth-first scan over group flips.
    for radius in 1..=3usize.min(groups.len()) {
        let mut best: Option<Vec<usize>> = None;
        let mut combo: Vec<usize> = (0..radius).collect();
        loop {
            // Try every relabeling of the chosen groups, counting only
            // candidates where every chosen group actually changes.
            let mut trial = base.clone();
            let mut alternatives: Vec<Vec<usize>> = Vec::with_capacity(radius);
            for &g in &combo {
                alternatives.push((0..n_subs).filter(|&s| s != base[g]).collect());
            }
            let mut pick = vec![0usize; radius];
            'assignments: loop {
                for (i, &g) in combo.iter().enumerate() {
                    trial[g] = alternatives[i][pick[i]];
                }
                let cand = expand(&trial);
                if is_realizable(case, partition, &cand) {
                    let t = trial.clone();
                    if best.as_ref().is_none_or(|b| t < *b) {
                        best = Some(t);
                    }
                }
                // Odometer over alternative labels.
                let mut i = 0;
                loop {
                    if i == radius {
                        break 'assignments;
                    }
                    pick[i] += 1;
                    if pick[i] < alternatives[i].len() {
                        break;
                    }
                    pick[i] = 0;
                    i += 1;
                }
            }
            // Next combination of groups (lexicographic).
            let mut i = radius;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if combo[i] + (radius - i) < groups.len() {
                    combo[i] += 1;
                    for j in (i + 1)..radius {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    combo.clear();
                    break;
                }
            }
            if combo.is_empty() || combo[radius - 1] >= groups.len() {
                break;
            }
        }
        if let Some(b) = best {
            return Ok(expand(&b));
        }
    }

    // Exhaustive fallback: nearest realizable group labeling overall.
    let total = (n_subs as u128).checked_pow(groups.len() as u32);
    if total.is_none() || total.unwrap() > 1 << 22 {
        return Err(ReconfigError::Unrealizable(
            "no nearby realizable assignment and the label space is too large to scan"
                .to_string(),
        ));
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut trial = vec![0usize; groups.len()];
    loop {
        let cand = expand(&trial);
        if is_realizable(case, partition, &cand) {
            let dist = trial.iter().zip(&base).filter(|(a, b)| a != b).count();
            let better = match &best {
                None => true,
                Some((bd, bl)) => dist < *bd || (dist == *bd && trial < *bl),
            };
            if better {
                best = Some((dist, trial.clone()));
            }
        }
        // Odometer over the full label space.
        let mut i = 0;
        loop {
            if i == groups.len() {
                return match best {
                    Some((_, labels)) => Ok(expand(&labels)),
                    None => Err(ReconfigError::Unrealizable(
                        "no realizable assignment exists for this network".to_string(),
                    )),
                };
            }
            trial[i] += 1;
            if trial[i] < n_subs {
                break;
            }
            trial[i] = 0;
            i += 1;
        }
    }
}

/// Exhaustive reference: enumerate switch configurations in the same
/// lexicographic order as the search, keep radial ones, and evaluate each
/// with a full flow LP. Returns the winner (if any) and the number of radial
/// configurations seen. Test/bench reference only: exponential in switches.
pub fn enumerate_reference(
    case: &NetworkCase,
    scenario: &Scenario,
    window: Option<VoltageWindow>,
    fixed: &[Option<bool>],
) -> Result<(Option<(SwitchConfiguration, f64)>, usize), ReconfigError> {
    let k = case.switchable_lines().len();
    assert!(k <= 24, "enumeration reference is for small switch counts");
    check_scenario(case, scenario)?;
    let mut best: Option<(SwitchConfiguration, f64)> = None;
    let mut radial = 0usize;
    for mask in 0u64..(1u64 << k) {
        // Bit 0 is the most significant digit so masks follow the search's
        // open-first visit order.
        let closed: Vec<bool> = (0..k).map(|i| (mask >> (k - 1 - i)) & 1 == 1).collect();
        let config = SwitchConfiguration { closed };
        if fixed
            .iter()
            .enumerate()
            .any(|(i, f)| f.is_some_and(|want| config.closed[i] != want))
        {
            continue;
        }
        let topo = match crate::netcase::energized_topology(case, &config)? {
            crate::netcase::TopologyReport::Radial(t) => t,
            _ => continue,
        };
        radial += 1;
        let fp = crate::lpf::radial_flow_problem(case, &topo, scenario, window);
        let sol = solve_lp(&fp.lp)?;
        if sol.status == LpStatus::Optimal
            && best
                .as_ref()
                .is_none_or(|(_, obj)| sol.objective_value < obj - IMPROVE_EPS)
        {
            best = Some((config, sol.objective_value));
        }
    }
    Ok((best, radial))
}

fn check_scenario(case: &NetworkCase, scenario: &Scenario) -> Result<(), ReconfigError> {
    if scenario.load_scale.len() != case.loads.len()
        || scenario.pv_scale.len() != case.pv_generators().len()
    {
        return Err(ReconfigError::BadInput(format!(
            "scenario shape ({} loads, {} pv) does not match the case ({} loads, {} pv)",
            scenario.load_scale.len(),
            scenario.pv_scale.len(),
            case.loads.len(),
            case.pv_generators().len()
        )));
    }
    Ok(())
}

fn validate_assignment(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    assignment: &BlockAssignment,
) -> Result<(), ReconfigError> {
    let n_subs = case.substations().len();
    if assignment.labels.len() != partition.n_blocks() {
        return Err(ReconfigError::BadInput(format!(
            "{} labels for {} blocks",
            assignment.labels.len(),
            partition.n_blocks()
        )));
    }
    if let Some(bad) = assignment.labels.iter().find(|&&l| l >= n_subs) {
        return Err(ReconfigError::BadInput(format!(
            "label {bad} out of range for {n_subs} substations"
        )));
    }
    Ok(())
}

struct Incumbent {
    config: SwitchConfiguration,
    objective: f64,
    x: Vec<f64>,
    vars: crate::lpf::FlowVariables,
}

struct Search<'a> {
    case: &'a NetworkCase,
    scenario: &'a Scenario,
    window: Option<VoltageWindow>,
    /// Per-switch decision; `None` is undecided (or free, at depth >= own).
    state: Vec<Option<bool>>,
    incumbent: Option<Incumbent>,
    stats: SolveStats,
}

impl<'a> Search<'a> {
    fn dfs(&mut self, depth: usize) -> Result<(), ReconfigError> {
        self.stats.nodes += 1;
        if !self.graph_prunes_pass() {
            return Ok(());
        }
        let k = self.state.len();
        if depth == k {
            return self.evaluate_leaf();
        }
        if self.state.iter().any(|s| s.is_none()) {
            // Optimistic relaxation; prunes on infeasibility or domination.
            let (flow, drop) = self.masks();
            let fp = build_flow_problem(self.case, self.scenario, &flow, &drop, self.window);
            let sol = solve_lp(&fp.lp)?;
            self.stats.bound_lps += 1;
            match sol.status {
                LpStatus::Infeasible => return Ok(()),
                LpStatus::Optimal => {
                    if let Some(inc) = &self.incumbent {
                        if sol.objective_value >= inc.objective - IMPROVE_EPS {
                            return Ok(());
                        }
                    }
                }
                LpStatus::Unbounded => {
                    // Boxes on every variable make this impossible.
                    return Err(ReconfigError::BadInput(
                        "relaxation came back unbounded".to_string(),
                    ));
                }
            }
        }
        if self.state[depth].is_some() {
            // Pinned by the caller: nothing to branch on here.
            return self.dfs(depth + 1);
        }
        self.state[depth] = Some(false);
        self.dfs(depth + 1)?;
        self.state[depth] = Some(true);
        self.dfs(depth + 1)?;
        self.state[depth] = None;
        Ok(())
    }

    /// Flow mask (non-open lines) and drop mask (surely-energized lines).
    fn masks(&self) -> (Vec<bool>, Vec<bool>) {
        let nl = self.case.lines.len();
        let mut flow = vec![true; nl];
        let mut drop = vec![true; nl];
        for (i, &li) in self.case.switchable_lines().iter().enumerate() {
            match self.state[i] {
                Some(true) => {}
                Some(false) => {
                    flow[li] = false;
                    drop[li] = false;
                }
                None => {
                    drop[li] = false;
                }
            }
        }
        (flow, drop)
    }

    /// Cycle, substation-pairing, and reachability prunes. Exact: a failure
    /// here rules out every completion of the current partial assignment.
    fn graph_prunes_pass(&mut self) -> bool {
        let case = self.case;
        let mut closed_of_line = vec![true; case.lines.len()];
        let mut open_of_line = vec![false; case.lines.len()];
        for (i, &li) in case.switchable_lines().iter().enumerate() {
            match self.state[i] {
                Some(true) => {}
                Some(false) => {
                    closed_of_line[li] = false;
                    open_of_line[li] = true;
                }
                None => closed_of_line[li] = false,
            }
        }
        // Surely-closed cycle / substation collision.
        let mut uf = UnionFind::new(case.buses.len());
        for (li, line) in case.lines.iter().enumerate() {
            if closed_of_line[li] && !uf.union(line.from, line.to) {
                return false;
            }
        }
        let mut owner: Vec<Option<usize>> = vec![None; case.buses.len()];
        for &gi in case.substations() {
            let root = uf.find(case.generators[gi].bus);
            if owner[root].replace(gi).is_some() {
                return false;
            }
        }
        // Reachability through non-open lines.
        let mut seen = vec![false; case.buses.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &gi in case.substations() {
            let b = case.generators[gi].bus;
            if !seen[b] {
                seen[b] = true;
                queue.push_back(b);
            }
        }
        while let Some(b) = queue.pop_front() {
            for &li in case.lines_at(b) {
                if open_of_line[li] {
                    continue;
                }
                let line = &case.lines[li];
                let other = if line.from == b { line.to } else { line.from };
                if !seen[other] {
                    seen[other] = true;
                    queue.push_back(other);
                }
            }
        }
        seen.iter().all(|s| *s)
    }

    fn evaluate_leaf(&mut self) -> Result<(), ReconfigError> {
        // Surviving the graph prunes with every switch decided means the
        // energized subgraph is a spanning forest with one substation per
        // component: radial by definition.
        let closed: Vec<bool> = self.state.iter().map(|s| s == &Some(true)).collect();
        let config = SwitchConfiguration { closed };
        let mask = self.case.energized_lines(&config)?;
        let fp = build_flow_problem(self.case, self.scenario, &mask, &mask, self.window);
        let sol = solve_lp(&fp.lp)?;
        self.stats.leaf_lps += 1;
        if sol.status == LpStatus::Optimal
            && self
                .incumbent
                .as_ref()
                .is_none_or(|inc| sol.objective_value < inc.objective - IMPROVE_EPS)
        {
            self.incumbent = Some(Incumbent {
                config,
                objective: sol.objective_value,
                x: sol.x,
                vars: fp.vars,
            });
        }
        Ok(())
    }
}

fn finish_search(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    search: Search<'_>,
) -> Result<ReconfigResult, ReconfigError> {
    let Some(inc) = search.incumbent else {
        return Err(ReconfigError::NoFeasibleTopology);
    };
    let assignment = crate::netcase::assignment_of(case, partition, &inc.config)?;
    let dispatch = extract_dispatch(case, &inc.vars, &inc.x, inc.objective);
    Ok(ReconfigResult {
        config: inc.config,
        assignment,
        objective: inc.objective,
        dispatch,
        stats: search.stats,
    })
}

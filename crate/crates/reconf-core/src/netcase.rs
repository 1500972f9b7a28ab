//! Network case model for reconfigurable multi-phase feeders.
//!
//! A case file is JSON: buses (with per-unit voltage limits and phase sets),
//! lines (per-phase impedance matrices, flow limits, switchable flag),
//! generators (substation or pv, per-phase boxes, linear cost), loads
//! (nominal per-phase P/Q), and optional tie groups naming load blocks whose
//! substation assignment is forced equal.
//!
//! Everything downstream works against [`NetworkCase`]: load-block
//! partitioning (components under non-switchable lines), switch
//! configurations over the switchable lines, and radiality analysis of the
//! energized subgraph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// One of the three phases, ordered a < b < c.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub fn letter(self) -> char {
        match self {
            Phase::A => 'a',
            Phase::B => 'b',
            Phase::C => 'c',
        }
    }

    /// 0, 1, 2 for a, b, c — the row/column index into full 3x3 matrices.
    pub fn index(self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }
}

/// A non-empty subset of {a, b, c}, stored as a 3-bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Phases in ascending order (a, b, c).
    pub fn iter(self) -> impl Iterator<Item = Phase> {
        [Phase::A, Phase::B, Phase::C]
            .into_iter()
            .filter(move |p| self.contains(*p))
    }

    /// Position of `p` within this set's ascending order, e.g. c is 1 in "ac".
    /// Impedance matrices and per-phase arrays are indexed this way.
    pub fn offset_of(self, p: Phase) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        Some((self.0 & ((1 << p.index()) - 1)).count_ones() as usize)
    }
}

impl FromStr for PhaseSet {
    type Err = String;

    fn from_str(s: &str) -> Result<PhaseSet, String> {
        let mut mask = 0u8;
        for c in s.chars() {
            let bit = match c {
                'a' => 1,
                'b' => 2,
                'c' => 4,
                _ => return Err(format!("invalid phase character {c:?}")),
            };
            if mask & bit != 0 {
                return Err(format!("duplicate phase {c:?}"));
            }
            mask |= bit;
        }
        if mask == 0 {
            return Err("empty phase set".to_string());
        }
        Ok(PhaseSet(mask))
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

/// A network bus.
#[derive(Clone, Debug)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    // Squared-magnitude voltage limits apply to every phase present.
    pub vmin_pu: f64,
    pub vmax_pu: f64,
    pub substation: bool,
}

/// A line (or switch) joining two buses, oriented from -> to.
#[derive(Clone, Debug)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub phases: PhaseSet,
    // Per-phase impedance matrices, |phases| x |phases|, row-major, ordered
    // by ascending phase. Off-diagonal entries couple the phases.
    pub r: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    // Per-phase bound applied independently to |P| and |Q| on this line.
    pub smax_pu: Vec<f64>,
    pub switchable: bool,
}

impl Line {
    /// Complex series impedance entry between phase offsets (i, j).
    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.r[i][j], self.x[i][j])
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GenKind {
    Substation,
    Pv,
}

/// A generator: substation infeed or a pv unit. Boxes are per phase of the
/// host bus, ascending phase order.
#[derive(Clone, Debug)]
pub struct Generator {
    pub id: String,
    pub bus: usize,
    pub kind: GenKind,
    pub pmin: Vec<f64>,
    pub pmax: Vec<f64>,
    pub qmin: Vec<f64>,
    pub qmax: Vec<f64>,
    // Linear cost per unit active power, summed over phases.
    pub cost: f64,
}

/// A spot load with nominal per-phase P/Q (host bus phase order).
#[derive(Clone, Debug)]
pub struct Load {
    pub id: String,
    pub bus: usize,
    pub p_nominal: Vec<f64>,
    pub q_nominal: Vec<f64>,
}

/// A parsed, validated network case.
///
/// Bus/line/generator/load indices are positions in the corresponding
/// vectors (file order). Canonical orderings derived from ids — substation
/// order, block order — are computed, not taken from the file.
#[derive(Clone, Debug)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub base_kv: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    pub tie_groups: Vec<Vec<String>>,

    // Derived, kept consistent by construction.
    bus_index: BTreeMap<String, usize>,
    switchable: Vec<usize>,
    substation_gens: Vec<usize>,
    pv_gens: Vec<usize>,
    gens_at_bus: Vec<Vec<usize>>,
    loads_at_bus: Vec<Vec<usize>>,
    lines_at_bus: Vec<Vec<usize>>,
}

#[derive(Error, Debug)]
pub enum CaseError {
    #[error("case is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bus {0}: {1}")]
    Bus(String, String),
    #[error("line {0}: {1}")]
    Line(String, String),
    #[error("generator {0}: {1}")]
    Generator(String, String),
    #[error("load {0}: {1}")]
    Load(String, String),
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("case: {0}")]
    Case(String),
    #[error("tie group {0}: {1}")]
    TieGroup(usize, String),
    #[error("switch configuration has {got} entries, case has {want} switchable lines")]
    SwitchLength { got: usize, want: usize },
    #[error("configuration is not radial: {0}")]
    NotRadial(String),
    #[error("scenario features: {0}")]
    Features(String),
}

// Raw serde mirror of the on-disk schema.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    base_mva: f64,
    base_kv: f64,
    buses: Vec<RawBus>,
    lines: Vec<RawLine>,
    generators: Vec<RawGen>,
    loads: Vec<RawLoad>,
    #[serde(default)]
    tie_groups: Vec<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBus {
    id: String,
    phases: String,
    vmin_pu: f64,
    vmax_pu: f64,
    #[serde(default)]
    substation: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    id: String,
    from: String,
    to: String,
    phases: String,
    r: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    smax_pu: Vec<f64>,
    #[serde(default)]
    switchable: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGen {
    id: String,
    bus: String,
    kind: String,
    pmin: Vec<f64>,
    pmax: Vec<f64>,
    qmin: Vec<f64>,
    qmax: Vec<f64>,
    cost: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoad {
    id: String,
    bus: String,
    p_nominal: Vec<f64>,
    q_nominal: Vec<f64>,
}

/// SHA-256 of raw bytes as lowercase hex; used to pin artifacts to a case file.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse and validate a case file.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let raw: RawCase = serde_json::from_str(text)?;

    if !(raw.base_mva.is_finite() && raw.base_mva > 0.0) {
        return Err(CaseError::Case(format!("base_mva must be positive, got {}", raw.base_mva)));
    }
    if !(raw.base_kv.is_finite() && raw.base_kv > 0.0) {
        return Err(CaseError::Case(format!("base_kv must be positive, got {}", raw.base_kv)));
    }

    // Buses.
    let mut buses = Vec::with_capacity(raw.buses.len());
    let mut bus_index = BTreeMap::new();
    for rb in &raw.buses {
        let phases: PhaseSet = rb
            .phases
            .parse()
            .map_err(|e| CaseError::Bus(rb.id.clone(), e))?;
        if !(rb.vmin_pu.is_finite() && rb.vmax_pu.is_finite() && rb.vmin_pu > 0.0 && rb.vmin_pu < rb.vmax_pu) {
            return Err(CaseError::Bus(
                rb.id.clone(),
                format!("need 0 < vmin_pu < vmax_pu, got {} .. {}", rb.vmin_pu, rb.vmax_pu),
            ));
        }
        if bus_index.insert(rb.id.clone(), buses.len()).is_some() {
            return Err(CaseError::DuplicateId { kind: "bus", id: rb.id.clone() });
        }
        buses.push(Bus {
            id: rb.id.clone(),
            phases,
            vmin_pu: rb.vmin_pu,
            vmax_pu: rb.vmax_pu,
            substation: rb.substation,
        });
    }
    if buses.is_empty() {
        return Err(CaseError::Case("case has no buses".to_string()));
    }

    // Lines.
    let mut lines = Vec::with_capacity(raw.lines.len());
    let mut line_ids = BTreeSet::new();
    for rl in &raw.lines {
        let err = |m: String| CaseError::Line(rl.id.clone(), m);
        if !line_ids.insert(rl.id.clone()) {
            return Err(CaseError::DuplicateId { kind: "line", id: rl.id.clone() });
        }
        let from = *bus_index
            .get(&rl.from)
            .ok_or_else(|| err(format!("references absent bus {}", rl.from)))?;
        let to = *bus_index
            .get(&rl.to)
            .ok_or_else(|| err(format!("references absent bus {}", rl.to)))?;
        if from == to {
            return Err(err("from and to are the same bus".to_string()));
        }
        let phases: PhaseSet = rl.phases.parse().map_err(err)?;
        if !phases.is_subset_of(buses[from].phases) || !phases.is_subset_of(buses[to].phases) {
            return Err(err(format!(
                "phases {} not carried by both endpoints ({} has {}, {} has {})",
                phases, rl.from, buses[from].phases, rl.to, buses[to].phases
            )));
        }
        let n = phases.len();
        for (name, m) in [("r", &rl.r), ("x", &rl.x)] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(err(format!("{name} must be a {n}x{n} matrix")));
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(err(format!("{name} has a non-finite entry")));
            }
        }
        if rl.smax_pu.len() != n {
            return Err(err(format!("smax_pu must have {n} entries")));
        }
        if rl.smax_pu.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(err("smax_pu entries must be positive".to_string()));
        }
        lines.push(Line {
            id: rl.id.clone(),
            from,
            to,
            phases,
            r: rl.r.clone(),
            x: rl.x.clone(),
            smax_pu: rl.smax_pu.clone(),
            switchable: rl.switchable,
        });
    }

    // Generators.
    let mut generators = Vec::with_capacity(raw.generators.len());
    let mut gen_ids = BTreeSet::new();
    for rg in &raw.generators {
        let err = |m: String| CaseError::Generator(rg.id.clone(), m);
        if !gen_ids.insert(rg.id.clone()) {
            return Err(CaseError::DuplicateId { kind: "generator", id: rg.id.clone() });
        }
        let bus = *bus_index
            .get(&rg.bus)
            .ok_or_else(|| err(format!("references absent bus {}", rg.bus)))?;
        let kind = match rg.kind.as_str() {
            "substation" => GenKind::Substation,
            "pv" => GenKind::Pv,
            other => return Err(err(format!("unknown kind {other:?}"))),
        };
        let n = buses[bus].phases.len();
        for (name, v) in [("pmin", &rg.pmin), ("pmax", &rg.pmax), ("qmin", &rg.qmin), ("qmax", &rg.qmax)] {
            if v.len() != n {
                return Err(err(format!("{name} must have {n} entries (bus phases)")));
            }
            if v.iter().any(|f| !f.is_finite()) {
                return Err(err(format!("{name} has a non-finite entry")));
            }
        }
        for p in 0..n {
            if rg.pmin[p] > rg.pmax[p] || rg.qmin[p] > rg.qmax[p] {
                return Err(err(format!("empty box on phase offset {p}")));
            }
        }
        if kind == GenKind::Pv && rg.pmin.iter().any(|v| *v != 0.0) {
            return Err(err("pv units must have pmin = 0 (curtailment allowed)".to_string()));
        }
        if !(rg.cost.is_finite() && rg.cost >= 0.0) {
            return Err(err(format!("cost must be finite and nonnegative, got {}", rg.cost)));
        }
        generators.push(Generator {
            id: rg.id.clone(),
            bus,
            kind,
            pmin: rg.pmin.clone(),
            pmax: rg.pmax.clone(),
            qmin: rg.qmin.clone(),
            qmax: rg.qmax.clone(),
            cost: rg.cost,
        });
    }

    // Loads.
    let mut loads = Vec::with_capacity(raw.loads.len());
    let mut load_ids = BTreeSet::new();
    for rl in &raw.loads {
        let err = |m: String| CaseError::Load(rl.id.clone(), m);
        if !load_ids.insert(rl.id.clone()) {
            return Err(CaseError::DuplicateId { kind: "load", id: rl.id.clone() });
        }
        let bus = *bus_index
            .get(&rl.bus)
            .ok_or_else(|| err(format!("references absent bus {}", rl.bus)))?;
        let n = buses[bus].phases.len();
        if rl.p_nominal.len() != n || rl.q_nominal.len() != n {
            return Err(err(format!("p_nominal/q_nominal must have {n} entries (bus phases)")));
        }
        if rl.p_nominal.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(err("p_nominal entries must be finite and nonnegative".to_string()));
        }
        if rl.q_nominal.iter().any(|v| !v.is_finite()) {
            return Err(err("q_nominal has a non-finite entry".to_string()));
        }
        loads.push(Load {
            id: rl.id.clone(),
            bus,
            p_nominal: rl.p_nominal.clone(),
            q_nominal: rl.q_nominal.clone(),
        });
    }

    // Substation flags and generators must agree.
    let mut sub_gen_bus = vec![0usize; 0];
    for (gi, g) in generators.iter().enumerate() {
        if g.kind == GenKind::Substation {
            if !buses[g.bus].substation {
                return Err(CaseError::Generator(
                    g.id.clone(),
                    format!("substation generator on bus {} not flagged substation", buses[g.bus].id),
                ));
            }
            if sub_gen_bus.contains(&g.bus) {
                return Err(CaseError::Bus(
                    buses[g.bus].id.clone(),
                    "has more than one substation generator".to_string(),
                ));
            }
            sub_gen_bus.push(g.bus);
            let _ = gi;
        }
    }
    for b in &buses {
        if b.substation
            && !generators
                .iter()
                .any(|g| g.kind == GenKind::Substation && buses[g.bus].id == b.id)
        {
            return Err(CaseError::Bus(
                b.id.clone(),
                "flagged substation but has no substation generator".to_string(),
            ));
        }
    }
    if sub_gen_bus.is_empty() {
        return Err(CaseError::Case("case has no substation".to_string()));
    }

    // With every switch closed the network must be one connected piece.
    let mut uf = UnionFind::new(buses.len());
    for l in &lines {
        uf.union(l.from, l.to);
    }
    let root0 = uf.find(0);
    for (i, b) in buses.iter().enumerate() {
        if uf.find(i) != root0 {
            return Err(CaseError::Case(format!(
                "bus {} is disconnected even with every switch closed",
                b.id
            )));
        }
    }

    // Derived orderings. Substation order is by host bus id so it does not
    // depend on file order.
    let mut substation_gens: Vec<usize> = generators
        .iter()
        .enumerate()
        .filter(|(_, g)| g.kind == GenKind::Substation)
        .map(|(i, _)| i)
        .collect();
    substation_gens.sort_by(|a, b| buses[generators[*a].bus].id.cmp(&buses[generators[*b].bus].id));
    let pv_gens: Vec<usize> = generators
        .iter()
        .enumerate()
        .filter(|(_, g)| g.kind == GenKind::Pv)
        .map(|(i, _)| i)
        .collect();
    let switchable: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.switchable)
        .map(|(i, _)| i)
        .collect();

    let mut gens_at_bus = vec![Vec::new(); buses.len()];
    for (i, g) in generators.iter().enumerate() {
        gens_at_bus[g.bus].push(i);
    }
    let mut loads_at_bus = vec![Vec::new(); buses.len()];
    for (i, l) in loads.iter().enumerate() {
        loads_at_bus[l.bus].push(i);
    }
    let mut lines_at_bus = vec![Vec::new(); buses.len()];
    for (i, l) in lines.iter().enumerate() {
        lines_at_bus[l.from].push(i);
        lines_at_bus[l.to].push(i);
    }

    let case = NetworkCase {
        base_mva: raw.base_mva,
        base_kv: raw.base_kv,
        buses,
        lines,
        generators,
        loads,
        tie_groups: raw.tie_groups,
        bus_index,
        switchable,
        substation_gens,
        pv_gens,
        gens_at_bus,
        loads_at_bus,
        lines_at_bus,
    };

    // Tie groups must name known buses; block-level checks happen in
    // load_blocks, but catch dangling ids at parse time.
    for (gi, group) in case.tie_groups.iter().enumerate() {
        for id in group {
            if !case.bus_index.contains_key(id) {
                return Err(CaseError::TieGroup(gi, format!("names absent bus {id}")));
            }
        }
    }

    Ok(case)
}

impl NetworkCase {
    pub fn bus_idx(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    /// Indices of switchable lines, in file order. Switch configurations
    /// index into this.
    pub fn switchable_lines(&self) -> &[usize] {
        &self.switchable
    }

    /// Substation generator indices, ordered by host bus id.
    pub fn substations(&self) -> &[usize] {
        &self.substation_gens
    }

    /// PV generator indices, in file order.
    pub fn pv_generators(&self) -> &[usize] {
        &self.pv_gens
    }

    pub fn generators_at(&self, bus: usize) -> &[usize] {
        &self.gens_at_bus[bus]
    }

    pub fn loads_at(&self, bus: usize) -> &[usize] {
        &self.loads_at_bus[bus]
    }

    pub fn lines_at(&self, bus: usize) -> &[usize] {
        &self.lines_at_bus[bus]
    }

    /// Substation index (position in `substations()`) of a substation bus.
    pub fn substation_index_of_bus(&self, bus: usize) -> Option<usize> {
        self.substation_gens
            .iter()
            .position(|g| self.generators[*g].bus == bus)
    }

    /// Per-line energized flags under a switch configuration.
    pub fn energized_lines(&self, x: &SwitchConfiguration) -> Result<Vec<bool>, CaseError> {
        if x.closed.len() != self.switchable.len() {
            return Err(CaseError::SwitchLength {
                got: x.closed.len(),
                want: self.switchable.len(),
            });
        }
        let mut on = vec![true; self.lines.len()];
        for (si, li) in self.switchable.iter().enumerate() {
            on[*li] = x.closed[si];
        }
        Ok(on)
    }
}

/// An operating point: one multiplier per load (P and Q together, constant
/// power factor) and one availability fraction per pv generator (applied to
/// its pmax).
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub load_scale: Vec<f64>,
    pub pv_scale: Vec<f64>,
}

impl Scenario {
    /// Loads at nominal, pv at full rating.
    pub fn nominal(case: &NetworkCase) -> Scenario {
        Scenario {
            load_scale: vec![1.0; case.loads.len()],
            pv_scale: vec![1.0; case.pv_generators().len()],
        }
    }

    /// Feature vector: total active P per load, then available P per pv
    /// unit, in file order. This is the model input layout.
    pub fn features(&self, case: &NetworkCase) -> Vec<f64> {
        let mut f = Vec::with_capacity(case.loads.len() + case.pv_generators().len());
        for (li, load) in case.loads.iter().enumerate() {
            f.push(self.load_scale[li] * load.p_nominal.iter().sum::<f64>());
        }
        for (k, gi) in case.pv_generators().iter().enumerate() {
            f.push(self.pv_scale[k] * case.generators[*gi].pmax.iter().sum::<f64>());
        }
        f
    }

    /// Column names matching `features`.
    pub fn feature_names(case: &NetworkCase) -> Vec<String> {
        let mut names = Vec::new();
        for load in &case.loads {
            names.push(format!("load_{}", load.id));
        }
        for gi in case.pv_generators() {
            names.push(format!("pv_{}", case.generators[*gi].id));
        }
        names
    }

    /// Invert `features`. Loads with zero nominal P keep scale 1 (their
    /// feature is necessarily 0); same for pv units with zero rating.
    pub fn from_features(case: &NetworkCase, features: &[f64]) -> Result<Scenario, CaseError> {
        let nl = case.loads.len();
        let np = case.pv_generators().len();
        if features.len() != nl + np {
            return Err(CaseError::Features(format!(
                "expected {} features, got {}",
                nl + np,
                features.len()
            )));
        }
        let mut load_scale = Vec::with_capacity(nl);
        for (li, load) in case.loads.iter().enumerate() {
            let nom: f64 = load.p_nominal.iter().sum();
            if nom > 0.0 {
                load_scale.push(features[li] / nom);
            } else if features[li].abs() > 1e-12 {
                return Err(CaseError::Features(format!(
                    "load {} has zero nominal P but feature {}",
                    load.id, features[li]
                )));
            } else {
                load_scale.push(1.0);
            }
        }
        let mut pv_scale = Vec::with_capacity(np);
        for (k, gi) in case.pv_generators().iter().enumerate() {
            let rated: f64 = case.generators[*gi].pmax.iter().sum();
            let feat = features[nl + k];
            if rated > 0.0 {
                pv_scale.push(feat / rated);
            } else if feat.abs() > 1e-12 {
                return Err(CaseError::Features(format!(
                    "pv {} has zero rating but feature {}",
                    case.generators[*gi].id, feat
                )));
            } else {
                pv_scale.push(0.0);
            }
        }
        Ok(Scenario { load_scale, pv_scale })
    }
}

/// Open/closed state per switchable line, indexed like
/// [`NetworkCase::switchable_lines`].
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SwitchConfiguration {
    pub closed: Vec<bool>,
}

impl SwitchConfiguration {
    pub fn all_closed(case: &NetworkCase) -> SwitchConfiguration {
        SwitchConfiguration { closed: vec![true; case.switchable_lines().len()] }
    }

    pub fn all_open(case: &NetworkCase) -> SwitchConfiguration {
        SwitchConfiguration { closed: vec![false; case.switchable_lines().len()] }
    }
}

impl fmt::Display for SwitchConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.closed {
            write!(f, "{}", if *c { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl FromStr for SwitchConfiguration {
    type Err = String;

    fn from_str(s: &str) -> Result<SwitchConfiguration, String> {
        let mut closed = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '1' => closed.push(true),
                '0' => closed.push(false),
                _ => return Err(format!("invalid switch state {c:?} (want 0/1)")),
            }
        }
        Ok(SwitchConfiguration { closed })
    }
}

/// Why an energized subgraph is not radial, or the radial decomposition.
#[derive(Clone, Debug)]
pub enum TopologyReport {
    Radial(RadialTopology),
    /// The named line closes a loop among energized lines.
    Cycle { line: String },
    /// The named bus has no energized path to any substation.
    Island { bus: String },
    /// Two substations share one energized component.
    MultipleSubstations { bus_a: String, bus_b: String },
}

impl TopologyReport {
    pub fn diagnosis(&self) -> String {
        match self {
            TopologyReport::Radial(_) => "radial".to_string(),
            TopologyReport::Cycle { line } => format!("cycle closed by line {line}"),
            TopologyReport::Island { bus } => format!("island: bus {bus} cut off from every substation"),
            TopologyReport::MultipleSubstations { bus_a, bus_b } => {
                format!("substations {bus_a} and {bus_b} share one component")
            }
        }
    }
}

/// The energized spanning forest of a radial configuration.
#[derive(Clone, Debug)]
pub struct RadialTopology {
    /// Energized line indices, ascending.
    pub energized: Vec<usize>,
    /// Substation index (into `case.substations()`) feeding each bus.
    pub feeder_of_bus: Vec<usize>,
    /// (parent bus, connecting line) per bus; None at substation roots.
    pub parent: Vec<Option<(usize, usize)>>,
    /// Hop count from the feeding substation.
    pub depth: Vec<usize>,
}

/// Analyze the energized subgraph under `x`: every bus must sit in a tree
/// hanging off exactly one substation.
pub fn energized_topology(case: &NetworkCase, x: &SwitchConfiguration) -> Result<TopologyReport, CaseError> {
    let on = case.energized_lines(x)?;

    // Cycle scan in line order: deterministic first offender.
    let mut uf = UnionFind::new(case.buses.len());
    for (li, line) in case.lines.iter().enumerate() {
        if on[li] && !uf.union(line.from, line.to) {
            return Ok(TopologyReport::Cycle { line: line.id.clone() });
        }
    }

    // Substation census per component.
    let mut sub_in_component: BTreeMap<usize, usize> = BTreeMap::new();
    for gi in case.substations() {
        let bus = case.generators[*gi].bus;
        let root = uf.find(bus);
        if let Some(other) = sub_in_component.insert(root, bus) {
            return Ok(TopologyReport::MultipleSubstations {
                bus_a: case.buses[other].id.clone(),
                bus_b: case.buses[bus].id.clone(),
            });
        }
    }
    for (bi, bus) in case.buses.iter().enumerate() {
        if !sub_in_component.contains_key(&uf.find(bi)) {
            return Ok(TopologyReport::Island { bus: bus.id.clone() });
        }
    }

    // Radial: orient every tree away from its substation.
    let mut feeder_of_bus = vec![usize::MAX; case.buses.len()];
    let mut parent = vec![None; case.buses.len()];
    let mut depth = vec![0usize; case.buses.len()];
    for (si, gi) in case.substations().iter().enumerate() {
        let root = case.generators[*gi].bus;
        feeder_of_bus[root] = si;
        let mut queue = VecDeque::from([root]);
        while let Some(b) = queue.pop_front() {
            for li in case.lines_at(b) {
                if !on[*li] {
                    continue;
                }
                let line = &case.lines[*li];
                let other = if line.from == b { line.to } else { line.from };
                if feeder_of_bus[other] == usize::MAX {
                    feeder_of_bus[other] = si;
                    parent[other] = Some((b, *li));
                    depth[other] = depth[b] + 1;
                    queue.push_back(other);
                }
            }
        }
    }
    debug_assert!(feeder_of_bus.iter().all(|f| *f != usize::MAX));

    let energized: Vec<usize> = (0..case.lines.len()).filter(|li| on[*li]).collect();
    Ok(TopologyReport::Radial(RadialTopology {
        energized,
        feeder_of_bus,
        parent,
        depth,
    }))
}

/// True when the energized subgraph is a spanning forest with exactly one
/// substation per component.
pub fn is_radial(case: &NetworkCase, x: &SwitchConfiguration) -> Result<bool, CaseError> {
    Ok(matches!(energized_topology(case, x)?, TopologyReport::Radial(_)))
}

/// The partition of buses into load blocks: connected components once every
/// switchable line is removed.
#[derive(Clone, Debug)]
pub struct LoadBlockPartition {
    /// Bus indices per block; members sorted by bus id, blocks sorted by
    /// their smallest bus id. Independent of file ordering.
    pub blocks: Vec<Vec<usize>>,
    pub block_of_bus: Vec<usize>,
    /// Tie groups as sorted block indices.
    pub tie_groups: Vec<Vec<usize>>,
    /// Output groups for the predictor: each tie group plus a singleton per
    /// untied block, sorted by smallest member block.
    pub label_groups: Vec<Vec<usize>>,
}

impl LoadBlockPartition {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Canonical display id of a block: its smallest bus id.
    pub fn block_id<'c>(&self, case: &'c NetworkCase, block: usize) -> &'c str {
        &case.buses[self.blocks[block][0]].id
    }

    /// Block containing a substation (by substation index).
    pub fn block_of_substation(&self, case: &NetworkCase, sub: usize) -> usize {
        let gi = case.substations()[sub];
        self.block_of_bus[case.generators[gi].bus]
    }
}

/// Compute load blocks and resolve tie groups (`ties` overrides the case's).
pub fn load_blocks(case: &NetworkCase, ties: Option<&[Vec<String>]>) -> Result<LoadBlockPartition, CaseError> {
    let mut uf = UnionFind::new(case.buses.len());
    for line in &case.lines {
        if !line.switchable {
            uf.union(line.from, line.to);
        }
    }

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for bi in 0..case.buses.len() {
        members.entry(uf.find(bi)).or_default().push(bi);
    }
    let mut blocks: Vec<Vec<usize>> = members.into_values().collect();
    for block in &mut blocks {
        block.sort_by(|a, b| case.buses[*a].id.cmp(&case.buses[*b].id));
    }
    blocks.sort_by(|a, b| case.buses[a[0]].id.cmp(&case.buses[b[0]].id));

    let mut block_of_bus = vec![0usize; case.buses.len()];
    for (bi, block) in blocks.iter().enumerate() {
        for bus in block {
            block_of_bus[*bus] = bi;
        }
    }

    let tie_spec: &[Vec<String>] = ties.unwrap_or(&case.tie_groups);
    let mut tie_groups: Vec<Vec<usize>> = Vec::new();
    let mut tied = vec![false; blocks.len()];
    for (gi, group) in tie_spec.iter().enumerate() {
        let mut set = BTreeSet::new();
        for id in group {
            let bus = case
                .bus_idx(id)
                .ok_or_else(|| CaseError::TieGroup(gi, format!("names absent bus {id}")))?;
            set.insert(block_of_bus[bus]);
        }
        let group_blocks: Vec<usize> = set.into_iter().collect();
        for b in &group_blocks {
            if tied[*b] {
                return Err(CaseError::TieGroup(
                    gi,
                    format!("block {} appears in more than one tie group", case.buses[blocks[*b][0]].id),
                ));
            }
            tied[*b] = true;
        }
        if group_blocks.len() >= 2 {
            tie_groups.push(group_blocks);
        }
    }

    let mut label_groups: Vec<Vec<usize>> = tie_groups.clone();
    for (bi, t) in tied.iter().enumerate() {
        // Blocks in degenerate (single-block) tie groups count as untied.
        if !*t || !tie_groups.iter().any(|g| g.contains(&bi)) {
            label_groups.push(vec![bi]);
        }
    }
    label_groups.sort_by_key(|g| g[0]);

    Ok(LoadBlockPartition {
        blocks,
        block_of_bus,
        tie_groups,
        label_groups,
    })
}

/// Which substation feeds each load block.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BlockAssignment {
    /// Substation index per block, aligned with `LoadBlockPartition::blocks`.
    pub labels: Vec<usize>,
}

impl BlockAssignment {
    /// Read the assignment off a radial topology. Buses of one block always
    /// share a feeder because intra-block lines are non-switchable.
    pub fn from_topology(partition: &LoadBlockPartition, topo: &RadialTopology) -> BlockAssignment {
        let labels = partition
            .blocks
            .iter()
            .map(|block| {
                let f = topo.feeder_of_bus[block[0]];
                debug_assert!(block.iter().all(|b| topo.feeder_of_bus[*b] == f));
                f
            })
            .collect();
        BlockAssignment { labels }
    }

    /// All tied blocks carry identical labels.
    pub fn respects_ties(&self, partition: &LoadBlockPartition) -> bool {
        partition
            .tie_groups
            .iter()
            .all(|g| g.iter().all(|b| self.labels[*b] == self.labels[g[0]]))
    }
}

impl fmt::Display for BlockAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.labels {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Assignment induced by a radial switch configuration; errors with the
/// diagnosis when `x` is not radial.
pub fn assignment_of(
    case: &NetworkCase,
    partition: &LoadBlockPartition,
    x: &SwitchConfiguration,
) -> Result<BlockAssignment, CaseError> {
    match energized_topology(case, x)? {
        TopologyReport::Radial(topo) => Ok(BlockAssignment::from_topology(partition, &topo)),
        other => Err(CaseError::NotRadial(other.diagnosis())),
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// False when both ends already share a root (a cycle would close).
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.rank[ra] < self.rank[rb] {
            self.parent[ra] = rb;
        } else if self.rank[ra] > self.rank[rb] {
            self.parent[rb] = ra;
        } else {
            self.parent[rb] = ra;
            self.rank[ra] += 1;
        }
        true
    }
}

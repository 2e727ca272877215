//! State-space analysis on small tori.
//!
//! States are identified by their state id (see
//! [`Configuration::from_state_id`]). The transition graph stores, for each
//! state, the nodes across which an exchange is allowed together with its
//! rate; communicating classes are the connected components of that graph.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::constraints::LocalRates;
use crate::error::{Error, Result};
use crate::exact::{int, Rational};
use crate::identities::{IdentityReport, Mode, Params, Tally, Witness};
use crate::lattice::{check_torus, Configuration};
use crate::model::ModelSpec;

/// Largest torus for [`build_transition_graph`] and [`find_blocked`].
pub const MAX_GRAPH_SITES: usize = 20;
/// Largest torus for the mobile-cluster checks.
pub const MAX_CLUSTER_SITES: usize = 18;

const CHUNK: u64 = 1 << 12;

/// Allowed exchanges of the chain, in compressed row form.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    n_sites: usize,
    model: ModelSpec,
    offsets: Vec<u32>,
    nodes: Vec<u8>,
    rates: Vec<Rational>,
}

impl TransitionGraph {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn state_count(&self) -> u64 {
        1 << self.n_sites
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.len()
    }

    /// `(node, target state, rate)` for every allowed exchange out of `state`.
    pub fn edges(&self, state: u64) -> impl Iterator<Item = (usize, u64, Rational)> + '_ {
        let (a, b) = (
            self.offsets[state as usize] as usize,
            self.offsets[state as usize + 1] as usize,
        );
        (a..b).map(move |e| {
            let x = self.nodes[e] as usize;
            (x, swap_id(self.n_sites, state, x), self.rates[e])
        })
    }

    pub fn exit_rate(&self, state: u64) -> Rational {
        self.edges(state).map(|(_, _, r)| r).sum()
    }

    /// Checks that every edge has a reverse edge with the same rate.
    pub fn audit_symmetry(&self) -> std::result::Result<(), (u64, usize)> {
        for state in 0..self.state_count() {
            for (x, target, rate) in self.edges(state) {
                if !self
                    .edges(target)
                    .any(|(y, back, r)| y == x && back == state && r == rate)
                {
                    return Err((state, x));
                }
            }
        }
        Ok(())
    }
}

/// State id of `swap(η, x)` for the configuration with id `state`.
#[inline]
fn swap_id(n_sites: usize, state: u64, x: usize) -> u64 {
    let bit = |s: usize| 1_u64 << (n_sites - 1 - s);
    state ^ bit(x) ^ bit((x + 1) % n_sites)
}

fn check_size(n_sites: usize, limit: usize, what: &'static str) -> Result<()> {
    check_torus(n_sites, 2)?;
    if n_sites > limit {
        return Err(Error::TooLarge { what, n_sites, limit });
    }
    Ok(())
}

fn exchange_rates<'a>(table: &'a LocalRates, eta: &'a Configuration) -> impl Iterator<Item = (usize, Rational)> + 'a {
    (0..eta.n_sites()).filter_map(move |x| {
        if eta.occupancy(x as i64) == eta.occupancy(x as i64 + 1) {
            return None;
        }
        let r = table.rate(eta, x as i64);
        (r > int(0)).then_some((x, r))
    })
}

pub fn build_transition_graph(model: &ModelSpec, n_sites: usize) -> Result<TransitionGraph> {
    check_size(n_sites, MAX_GRAPH_SITES, "transition graph")?;
    let table = LocalRates::new(model)?;
    let total = 1_u64 << n_sites;
    let chunks: Vec<(Vec<u32>, Vec<u8>, Vec<Rational>)> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut degrees = Vec::new();
            let mut nodes = Vec::new();
            let mut rates = Vec::new();
            for state in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let eta = Configuration::from_state_id(n_sites, state);
                let before = nodes.len();
                for (x, r) in exchange_rates(&table, &eta) {
                    nodes.push(x as u8);
                    rates.push(r);
                }
                degrees.push((nodes.len() - before) as u32);
            }
            (degrees, nodes, rates)
        })
        .collect();
    let mut offsets = Vec::with_capacity(total as usize + 1);
    offsets.push(0_u32);
    let mut nodes = Vec::new();
    let mut rates = Vec::new();
    for (degrees, n, r) in chunks {
        for d in degrees {
            offsets.push(offsets.last().unwrap() + d);
        }
        nodes.extend(n);
        rates.extend(r);
    }
    let graph = TransitionGraph {
        n_sites,
        model: *model,
        offsets,
        nodes,
        rates,
    };
    if let Err((state, x)) = graph.audit_symmetry() {
        panic!("asymmetric edge at state {state}, node {x}");
    }
    Ok(graph)
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    /// Keeps the smaller root, so every root is its component's minimum.
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sector {
    pub particles: usize,
    /// Classes ordered by minimal member, members ascending.
    pub classes: Vec<Vec<u64>>,
    pub blocked: usize,
}

#[derive(Debug, Clone)]
pub struct ClassDecomposition {
    n_sites: usize,
    class_id: Vec<u32>,
    pub sectors: Vec<Sector>,
    /// States with zero exit rate, ascending.
    pub blocked: Vec<u64>,
}

impl ClassDecomposition {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Class label of a state: the smallest state id in its class.
    pub fn class_of(&self, state: u64) -> u64 {
        self.class_id[state as usize] as u64
    }

    pub fn same_class(&self, a: u64, b: u64) -> bool {
        self.class_of(a) == self.class_of(b)
    }

    pub fn is_blocked(&self, state: u64) -> bool {
        self.blocked.binary_search(&state).is_ok()
    }

    pub fn class_count(&self) -> usize {
        self.sectors.iter().map(|s| s.classes.len()).sum()
    }

    pub fn summary(&self, model: &ModelSpec) -> GraphSummary {
        GraphSummary {
            model: model.to_string(),
            n_sites: self.n_sites,
            states: 1 << self.n_sites,
            classes: self.class_count(),
            blocked: self.blocked.len(),
            sectors: self
                .sectors
                .iter()
                .map(|s| SectorSummary {
                    particles: s.particles,
                    states: s.classes.iter().map(Vec::len).sum(),
                    classes: s.classes.len(),
                    blocked: s.blocked,
                })
                .collect(),
        }
    }

    /// Writes `state_id,sector,class_id,blocked` for every state.
    pub fn write_membership_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "state_id,sector,class_id,blocked")?;
        let mut next_blocked = self.blocked.iter().peekable();
        for state in 0..(1_u64 << self.n_sites) {
            let blocked = next_blocked.next_if_eq(&&state).is_some();
            writeln!(
                out,
                "{},{},{},{}",
                state,
                state.count_ones(),
                self.class_of(state),
                blocked as u8
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SectorSummary {
    pub particles: usize,
    pub states: usize,
    pub classes: usize,
    pub blocked: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphSummary {
    pub model: String,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub states: u64,
    pub classes: usize,
    pub blocked: usize,
    pub sectors: Vec<SectorSummary>,
}

pub fn communicating_classes(graph: &TransitionGraph) -> ClassDecomposition {
    let n_sites = graph.n_sites;
    let total = graph.state_count();
    let mut uf = UnionFind::new(total as usize);
    let mut blocked = Vec::new();
    for state in 0..total {
        let mut any = false;
        for (_, target, _) in graph.edges(state) {
            any = true;
            if target > state {
                uf.union(state as u32, target as u32);
            }
        }
        if !any {
            blocked.push(state);
        }
    }
    let class_id: Vec<u32> = (0..total as u32).map(|s| uf.find(s)).collect();
    let mut sectors: Vec<Sector> = (0..=n_sites)
        .map(|particles| Sector {
            particles,
            classes: Vec::new(),
            blocked: 0,
        })
        .collect();
    let mut slot = vec![u32::MAX; total as usize];
    for state in 0..total {
        let sector = &mut sectors[state.count_ones() as usize];
        let root = class_id[state as usize] as usize;
        if slot[root] == u32::MAX {
            slot[root] = sector.classes.len() as u32;
            sector.classes.push(Vec::new());
        }
        sector.classes[slot[root] as usize].push(state);
    }
    for &state in &blocked {
        sectors[state.count_ones() as usize].blocked += 1;
    }
    ClassDecomposition {
        n_sites,
        class_id,
        sectors,
        blocked,
    }
}

/// All states with zero total exit rate.
pub fn find_blocked(model: &ModelSpec, n_sites: usize) -> Result<Vec<u64>> {
    check_size(n_sites, MAX_GRAPH_SITES, "blocked-state scan")?;
    let table = LocalRates::new(model)?;
    let total = 1_u64 << n_sites;
    Ok((0..total.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let table = &table;
            (c * CHUNK..((c + 1) * CHUNK).min(total)).filter(move |&state| {
                let eta = Configuration::from_state_id(n_sites, state);
                let blocked = exchange_rates(table, &eta).next().is_none();
                blocked
            })
        })
        .collect())
}

fn particle_positions(eta: &Configuration, value: u8) -> Vec<usize> {
    (0..eta.n_sites())
        .filter(|&s| eta.occupancy(s as i64) == value)
        .collect()
}

fn pairwise_far(positions: &[usize], n_sites: usize, min_distance: usize) -> bool {
    positions.iter().enumerate().all(|(i, &a)| {
        positions[i + 1..].iter().all(|&b| {
            let d = a.abs_diff(b);
            d.min(n_sites - d) >= min_distance
        })
    })
}

fn family(n_sites: usize, keep: impl Fn(&Configuration) -> bool + Sync) -> Result<Vec<u64>> {
    check_size(n_sites, MAX_GRAPH_SITES, "family enumeration")?;
    Ok((0..1_u64 << n_sites)
        .into_par_iter()
        .filter(|&id| keep(&Configuration::from_state_id(n_sites, id)))
        .collect())
}

/// Configurations whose particles are pairwise at circular distance `> l`.
pub fn isolated_particles(l: usize, n_sites: usize) -> Result<Vec<u64>> {
    family(n_sites, |eta| pairwise_far(&particle_positions(eta, 1), n_sites, l + 1))
}

/// Configurations whose holes are pairwise at circular distance `> l`.
pub fn isolated_holes(l: usize, n_sites: usize) -> Result<Vec<u64>> {
    family(n_sites, |eta| pairwise_far(&particle_positions(eta, 0), n_sites, l + 1))
}

/// Configurations whose particles form groups separated by at least `l`
/// holes, each group spanning at most `l` sites and holding fewer than `ell`
/// particles.
pub fn sparse_clusters(ell: usize, l: usize, n_sites: usize) -> Result<Vec<u64>> {
    family(n_sites, |eta| {
        let p = particle_positions(eta, 1);
        if p.is_empty() {
            return true;
        }
        let m = p.len();
        let gap = |i: usize| (p[(i + 1) % m] + n_sites - p[i] - 1) % n_sites;
        let gaps: Vec<usize> = (0..m).map(|i| if m == 1 { n_sites - 1 } else { gap(i) }).collect();
        let Some(cut) = (0..m).find(|&i| gaps[i] >= l) else {
            return false;
        };
        let mut start = (cut + 1) % m;
        let mut count = 0;
        for step in 0..m {
            let i = (cut + 1 + step) % m;
            count += 1;
            if gaps[i] >= l {
                let span = (p[i] + n_sites - p[start]) % n_sites + 1;
                if count >= ell || span > l {
                    return false;
                }
                start = (i + 1) % m;
                count = 0;
            }
        }
        true
    })
}

/// The constructed blocked families of the model on `n_sites`.
///
/// Isolated particles block `B(n, L)` for `n ≥ 2` and isolated holes for
/// `n ≤ L − 2`; sparse clusters block the reduced model and the PMM.
pub fn blocked_family(model: &ModelSpec, n_sites: usize) -> Result<Vec<u64>> {
    model.validate()?;
    let mut states = match *model {
        ModelSpec::Ssep => vec![0, (1_u64 << n_sites) - 1],
        ModelSpec::Bernstein { n, l } => {
            let mut s = Vec::new();
            if n >= 2 {
                s.extend(isolated_particles(l, n_sites)?);
            }
            if n + 2 <= l {
                s.extend(isolated_holes(l, n_sites)?);
            }
            s
        }
        ModelSpec::ReducedPmm { ell, l } => sparse_clusters(ell, l, n_sites)?,
        ModelSpec::Pmm { n } => sparse_clusters(n, n, n_sites)?,
    };
    states.sort_unstable();
    states.dedup();
    Ok(states)
}

/// A box of `len` consecutive sites with a bounded particle count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClusterPattern {
    pub model: ModelSpec,
    pub len: usize,
    pub min_particles: usize,
    pub max_particles: usize,
}

impl ClusterPattern {
    /// The mobile cluster of the model: `L + 2` sites holding exactly `n + 1`
    /// particles for `B(n, L)`, at least `ℓ + 1` particles and one hole for
    /// `PMM_L(ℓ)` (and the PMM as `PMM_n(n)`).
    pub fn for_model(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let (len, min_particles, max_particles) = match *model {
            ModelSpec::Bernstein { n, l } => (l + 2, n + 1, n + 1),
            ModelSpec::ReducedPmm { ell, l } => (l + 2, ell + 1, l + 1),
            ModelSpec::Pmm { n } => (n + 2, n + 1, n + 1),
            ModelSpec::Ssep => {
                return Err(Error::UnsupportedFamily {
                    op: "cluster pattern",
                    model: model.to_string(),
                })
            }
        };
        Ok(Self {
            model: *model,
            len,
            min_particles,
            max_particles,
        })
    }

    /// A box of the model's length holding exactly `particles` particles.
    pub fn with_particles(model: &ModelSpec, particles: usize) -> Result<Self> {
        let base = Self::for_model(model)?;
        Ok(Self {
            min_particles: particles,
            max_particles: particles,
            ..base
        })
    }

    pub fn min_holes(&self) -> usize {
        self.len - self.max_particles
    }

    /// Whether sites `p, …, p + len − 1` of `eta` form an instance.
    pub fn matches_at(&self, eta: &Configuration, p: i64) -> bool {
        let k = eta.segment(p, self.len).count_ones() as usize;
        (self.min_particles..=self.max_particles).contains(&k)
    }
}

/// Sites `p, …, p + span − 1` rotated right by one: the last site moves to `p`.
fn rotate_right(eta: &Configuration, p: i64, span: usize) -> Configuration {
    let mut out = eta.clone();
    let last = eta.occupancy(p + span as i64 - 1);
    for i in (1..span as i64).rev() {
        out.set(p + i, eta.occupancy(p + i - 1));
    }
    out.set(p, last);
    out
}

fn cluster_setup(pattern: &ClusterPattern, n_sites: usize) -> Result<ClassDecomposition> {
    check_size(n_sites, MAX_CLUSTER_SITES, "mobile-cluster check")?;
    check_torus(n_sites, 2 * pattern.len + 2)?;
    Ok(communicating_classes(&build_transition_graph(&pattern.model, n_sites)?))
}

fn class_witness(
    eta: &Configuration,
    p: i64,
    classes: &ClassDecomposition,
    other: &Configuration,
    what: &str,
) -> Witness {
    Witness {
        configuration: eta.to_string(),
        node: p,
        lhs: classes.class_of(eta.state_id()).to_string(),
        rhs: classes.class_of(other.state_id()).to_string(),
        detail: Some(format!("{what} {other}")),
    }
}

fn cluster_report(name: &str, pattern: &ClusterPattern, n_sites: usize, states: u64, tally: Tally) -> IdentityReport {
    let params = Params {
        model: Some(pattern.model.to_string()),
        n_sites,
        ..Params::default()
    };
    let mut report = IdentityReport::from_parts(name, params, Mode::Exhaustive, states, tally);
    report.notes.push(format!(
        "cluster: {} sites, {}..={} particles",
        pattern.len, pattern.min_particles, pattern.max_particles
    ));
    report
}

/// Moving a cluster one site to the right, with the displaced site moved to
/// its left, stays in the communicating class.
pub fn mobility_check(model: &ModelSpec, n_sites: usize) -> Result<IdentityReport> {
    mobility_check_with(&ClusterPattern::for_model(model)?, n_sites)
}

pub fn mobility_check_with(pattern: &ClusterPattern, n_sites: usize) -> Result<IdentityReport> {
    let classes = cluster_setup(pattern, n_sites)?;
    let mut tally = Tally::default();
    for state in 0..1_u64 << n_sites {
        let eta = Configuration::from_state_id(n_sites, state);
        for p in 0..n_sites as i64 {
            if !pattern.matches_at(&eta, p) {
                continue;
            }
            let moved = rotate_right(&eta, p, pattern.len + 1);
            if !classes.same_class(state, moved.state_id()) {
                tally.push(class_witness(&eta, p, &classes, &moved, "cluster moved right:"));
            }
        }
    }
    Ok(cluster_report("mobility", pattern, n_sites, 1 << n_sites, tally))
}

/// An exchange at a node adjacent to a cluster stays in the class.
pub fn mass_transport_check(model: &ModelSpec, n_sites: usize) -> Result<IdentityReport> {
    mass_transport_check_with(&ClusterPattern::for_model(model)?, n_sites)
}

pub fn mass_transport_check_with(pattern: &ClusterPattern, n_sites: usize) -> Result<IdentityReport> {
    let classes = cluster_setup(pattern, n_sites)?;
    let mut tally = Tally::default();
    for state in 0..1_u64 << n_sites {
        let eta = Configuration::from_state_id(n_sites, state);
        for p in 0..n_sites as i64 {
            if !pattern.matches_at(&eta, p) {
                continue;
            }
            for x in [p - 2, p + pattern.len as i64] {
                if eta.occupancy(x) == eta.occupancy(x + 1) {
                    continue;
                }
                let swapped = eta.swap(x);
                if !classes.same_class(state, swapped.state_id()) {
                    tally.push(class_witness(&eta, p, &classes, &swapped, "exchange beside cluster:"));
                }
            }
        }
    }
    Ok(cluster_report("mass_transport", pattern, n_sites, 1 << n_sites, tally))
}

/// In each sector, the states containing a cluster lie in a single class.
pub fn cluster_connectivity_check(model: &ModelSpec, n_sites: usize) -> Result<IdentityReport> {
    let pattern = ClusterPattern::for_model(model)?;
    let classes = cluster_setup(&pattern, n_sites)?;
    let mut tally = Tally::default();
    let mut first: Vec<Option<u64>> = vec![None; n_sites + 1];
    for state in 0..1_u64 << n_sites {
        let eta = Configuration::from_state_id(n_sites, state);
        if !(0..n_sites as i64).any(|p| pattern.matches_at(&eta, p)) {
            continue;
        }
        let sector = state.count_ones() as usize;
        match first[sector] {
            None => first[sector] = Some(state),
            Some(rep) if !classes.same_class(rep, state) => {
                let other = Configuration::from_state_id(n_sites, rep);
                tally.push(class_witness(&eta, 0, &classes, &other, "not connected to"));
            }
            Some(_) => {}
        }
    }
    Ok(cluster_report(
        "cluster_connectivity",
        &pattern,
        n_sites,
        1 << n_sites,
        tally,
    ))
}

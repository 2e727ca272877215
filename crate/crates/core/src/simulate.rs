//! Continuous-time simulation at diffusive scale.
//!
//! Node rates are read from a table indexed by the local pattern around the
//! node. Two exact engines are available: the direct method keeps the rates
//! in a sum tree (`O(L log N)` per event), the uniformized one lets every
//! node ring at rate one and accepts with probability equal to its rate.
//! Each replica owns a ChaCha8 stream (`seed`, stream = replica index);
//! replicas run in parallel and are reported in index order.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::LocalRates;
use crate::error::{Error, Result};
use crate::exact::{to_f64, Rational};
use crate::lattice::{check_torus, Configuration};
use crate::model::ModelSpec;

/// Recorded in output metadata.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = replica index";

/// Initial density profile on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProfileSpec {
    Constant(f64),
    /// `left` on `[0, 1/2)`, `right` on `[1/2, 1)`.
    Step {
        left: f64,
        right: f64,
    },
    /// `mean + amplitude · cos(2π k u)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        k: u32,
    },
}

impl ProfileSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |rho: f64| {
            if (0.0..=1.0).contains(&rho) {
                Ok(())
            } else {
                Err(Error::DensityOutOfRange(rho))
            }
        };
        match *self {
            ProfileSpec::Constant(rho) => check(rho),
            ProfileSpec::Step { left, right } => check(left).and(check(right)),
            ProfileSpec::Cosine { mean, amplitude, .. } => {
                check(mean - amplitude.abs()).and(check(mean + amplitude.abs()))
            }
        }
    }

    pub fn density(&self, u: f64) -> f64 {
        let u = u.rem_euclid(1.0);
        match *self {
            ProfileSpec::Constant(rho) => rho,
            ProfileSpec::Step { left, right } => {
                if u < 0.5 {
                    left
                } else {
                    right
                }
            }
            ProfileSpec::Cosine { mean, amplitude, k } => {
                mean + amplitude * (2.0 * std::f64::consts::PI * k as f64 * u).cos()
            }
        }
    }
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProfileSpec::Constant(rho) => write!(f, "constant:{rho}"),
            ProfileSpec::Step { left, right } => write!(f, "step:{left},{right}"),
            ProfileSpec::Cosine { mean, amplitude, k } => write!(f, "cosine:{mean},{amplitude},{k}"),
        }
    }
}

impl FromStr for ProfileSpec {
    type Err = Error;

    /// `constant:ρ`, `step:ρ_left,ρ_right` or `cosine:mean,amplitude,k`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let values: Vec<&str> = args.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        let num = |i: usize| -> Result<f64> {
            values[i]
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {:?} in profile {s:?}", values[i])))
        };
        let arity = |n: usize| {
            if values.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!(
                    "profile {kind:?} takes {n} values, got {}",
                    values.len()
                )))
            }
        };
        let profile = match kind {
            "constant" => {
                arity(1)?;
                ProfileSpec::Constant(num(0)?)
            }
            "step" => {
                arity(2)?;
                ProfileSpec::Step {
                    left: num(0)?,
                    right: num(1)?,
                }
            }
            "cosine" => {
                arity(3)?;
                ProfileSpec::Cosine {
                    mean: num(0)?,
                    amplitude: num(1)?,
                    k: values[2]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad wavenumber in profile {s:?}")))?,
                }
            }
            other => return Err(Error::Parse(format!("unknown profile kind {other:?}"))),
        };
        profile.validate()?;
        Ok(profile)
    }
}

impl TryFrom<String> for ProfileSpec {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<ProfileSpec> for String {
    fn from(value: ProfileSpec) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: ModelSpec,
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub profile: ProfileSpec,
    pub t_max: f64,
    pub output_times: Vec<f64>,
    #[serde(rename = "K")]
    pub boxes: usize,
    pub seed: u64,
    pub replicas: usize,
    #[serde(default)]
    pub engine: Engine,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.profile.validate()?;
        check_torus(self.n_sites, self.model.min_sites())?;
        if self.boxes == 0 || !self.n_sites.is_multiple_of(self.boxes) {
            return Err(Error::InvalidParameter(format!(
                "K = {} must divide N = {}",
                self.boxes, self.n_sites
            )));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("replicas must be positive".into()));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_max = {} is invalid", self.t_max)));
        }
        check_times(&self.output_times, self.t_max)
    }
}

pub(crate) fn check_times(times: &[f64], t_max: f64) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("no output times".into()));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("output times must be sorted".into()));
    }
    if times.iter().any(|&t| !(0.0..=t_max).contains(&t)) {
        return Err(Error::InvalidParameter(format!(
            "output times must lie in [0, {t_max}]"
        )));
    }
    Ok(())
}

/// `rate · 1{η(x) ≠ η(x+1)}` for every local pattern.
fn effective_exact(local: &LocalRates) -> Vec<Rational> {
    let node_bits = 0b11 << local.radius();
    local
        .values()
        .iter()
        .enumerate()
        .map(|(pattern, &r)| {
            let bits = pattern & node_bits;
            if bits == 0 || bits == node_bits {
                Rational::from_integer(0)
            } else {
                r
            }
        })
        .collect()
}

fn effective_rates(local: &LocalRates) -> Vec<f64> {
    effective_exact(local).into_iter().map(to_f64).collect()
}

/// Event-selection scheme; both produce the same law.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Sum-tree selection with exponential waiting times.
    Direct,
    /// Uniform clocks of rate one with acceptance by the node rate.
    #[default]
    Uniformized,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Engine::Direct),
            "uniformized" => Ok(Engine::Uniformized),
            other => Err(Error::Parse(format!("unknown engine {other:?}"))),
        }
    }
}

/// Per-node effective rates `rate · 1{η(x) ≠ η(x+1)}` in a sum tree.
#[derive(Debug, Clone)]
pub struct RateTable {
    model: ModelSpec,
    radius: usize,
    span: usize,
    by_pattern: Vec<f64>,
    exact: Vec<Rational>,
    n_sites: usize,
    leaves: usize,
    tree: Vec<f64>,
}

impl RateTable {
    pub fn new(model: &ModelSpec, eta: &Configuration) -> Result<Self> {
        check_torus(eta.n_sites(), model.min_sites())?;
        let local = LocalRates::new(model)?;
        let (radius, span) = (local.radius(), local.span());
        let exact = effective_exact(&local);
        let leaves = eta.n_sites().next_power_of_two();
        let mut table = Self {
            model: *model,
            radius,
            span,
            by_pattern: exact.iter().map(|&r| to_f64(r)).collect(),
            exact,
            n_sites: eta.n_sites(),
            leaves,
            tree: vec![0.0; 2 * leaves],
        };
        table.rebuild(eta);
        Ok(table)
    }

    #[inline]
    fn pattern(&self, eta: &Configuration, x: i64) -> usize {
        let start = x - self.radius as i64;
        if self.span <= self.n_sites {
            eta.segment(start, self.span) as usize
        } else {
            (0..self.span).fold(0, |acc, s| acc | ((eta.occupancy(start + s as i64) as usize) << s))
        }
    }

    /// Recomputes every entry from scratch.
    pub fn rebuild(&mut self, eta: &Configuration) {
        for x in 0..self.n_sites {
            self.tree[self.leaves + x] = self.by_pattern[self.pattern(eta, x as i64)];
        }
        for i in (1..self.leaves).rev() {
            self.tree[i] = self.tree[2 * i] + self.tree[2 * i + 1];
        }
    }

    /// Total rate `R`.
    #[inline]
    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    pub fn rate(&self, x: usize) -> f64 {
        self.tree[self.leaves + x]
    }

    /// Node chosen with probability proportional to its rate, given `u ∈ [0, R)`.
    #[inline]
    pub fn sample(&self, mut u: f64) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let left = self.tree[2 * i];
            if u < left || self.tree[2 * i + 1] <= 0.0 {
                i *= 2;
            } else {
                u -= left;
                i = 2 * i + 1;
            }
        }
        i - self.leaves
    }

    fn refresh(&mut self, eta: &Configuration, from: usize, to: usize) {
        let mut changed = false;
        for x in from..=to {
            let r = self.by_pattern[self.pattern(eta, x as i64)];
            let leaf = &mut self.tree[self.leaves + x];
            if *leaf != r {
                *leaf = r;
                changed = true;
            }
        }
        if !changed {
            return;
        }
        let (mut a, mut b) = ((self.leaves + from) / 2, (self.leaves + to) / 2);
        while a >= 1 {
            for i in a..=b {
                self.tree[i] = self.tree[2 * i] + self.tree[2 * i + 1];
            }
            a /= 2;
            b /= 2;
        }
    }

    /// Updates the nodes whose rate can change after an exchange at `x`.
    pub fn update_around(&mut self, eta: &Configuration, x: usize) {
        let n = self.n_sites as i64;
        let reach = self.radius as i64 + 1;
        if 2 * reach + 1 >= n {
            self.refresh(eta, 0, self.n_sites - 1);
            return;
        }
        let lo = (x as i64 - reach).rem_euclid(n) as usize;
        let hi = (x as i64 + reach).rem_euclid(n) as usize;
        if lo <= hi {
            self.refresh(eta, lo, hi);
        } else {
            self.refresh(eta, lo, self.n_sites - 1);
            self.refresh(eta, 0, hi);
        }
    }

    /// Compares the table with a rebuild (bit for bit) and every leaf with
    /// the exact rational rate.
    pub fn audit(&self, eta: &Configuration) -> bool {
        let mut fresh = self.clone();
        fresh.rebuild(eta);
        let exact_ok = (0..self.n_sites).all(|x| {
            let r = self.exact[self.pattern(eta, x as i64)];
            let direct = crate::constraints::rate_unchecked(&self.model, eta, x as i64)
                * Rational::from_integer(crate::constraints::exclusion_difference(eta, x as i64).abs());
            to_f64(r) == self.rate(x) && r == direct
        });
        exact_ok
            && fresh
                .tree
                .iter()
                .zip(&self.tree)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// One event: draws the waiting time and node, applies the exchange and
/// updates the table. `None` if the configuration is blocked.
pub fn gillespie_step<R: Rng>(eta: &mut Configuration, table: &mut RateTable, rng: &mut R) -> Option<(usize, f64)> {
    let total = table.total();
    if total <= 0.0 {
        return None;
    }
    let dt = -(1.0 - rng.random::<f64>()).ln() / total;
    let x = table.sample(rng.random::<f64>() * total);
    eta.swap_in_place(x as i64);
    table.update_around(eta, x);
    Some((x, dt))
}

/// Kahan-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Clock {
    sum: f64,
    carry: f64,
}

impl Clock {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Draws each site independently with probability `profile(x / N)`.
pub fn sample_product_measure(profile: &ProfileSpec, n_sites: usize, seed: u64) -> Result<Configuration> {
    profile.validate()?;
    check_torus(n_sites, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_with(profile, n_sites, &mut rng))
}

fn sample_with<R: Rng>(profile: &ProfileSpec, n_sites: usize, rng: &mut R) -> Configuration {
    let sites: Vec<u8> = (0..n_sites)
        .map(|x| (rng.random::<f64>() < profile.density(x as f64 / n_sites as f64)) as u8)
        .collect();
    Configuration::from_sites(&sites).expect("n_sites >= 2")
}

/// Mean occupancy of the `K` boxes `[bN/K, (b+1)N/K)`.
pub fn coarse_grain(eta: &Configuration, boxes: usize) -> Result<Vec<f64>> {
    let n = eta.n_sites();
    if boxes == 0 || !n.is_multiple_of(boxes) {
        return Err(Error::InvalidParameter(format!("K = {boxes} must divide N = {n}")));
    }
    let width = n / boxes;
    Ok((0..boxes)
        .map(|b| {
            let count: usize = (b * width..(b + 1) * width)
                .map(|x| eta.occupancy(x as i64) as usize)
                .sum();
            count as f64 / width as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaRun {
    pub replica: usize,
    pub events: u64,
    pub particles: usize,
    /// Macroscopic time at which the configuration became blocked.
    pub blocked_at: Option<f64>,
    /// One profile per output time reached, in order.
    #[serde(skip)]
    pub profiles: Vec<Vec<f64>>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub config: SimulationConfig,
    pub replicas: Vec<ReplicaRun>,
}

impl Trajectory {
    pub fn blocked(&self) -> bool {
        self.replicas.iter().any(|r| r.blocked_at.is_some())
    }

    /// Box centers `(b + 1/2) / K`.
    pub fn box_centers(&self) -> Vec<f64> {
        let k = self.config.boxes;
        (0..k).map(|b| (b as f64 + 0.5) / k as f64).collect()
    }

    /// Replica-averaged profile at output index `i`, over replicas reaching it.
    pub fn mean_profile(&self, i: usize) -> Option<Vec<f64>> {
        let reached: Vec<&Vec<f64>> = self.replicas.iter().filter_map(|r| r.profiles.get(i)).collect();
        if reached.is_empty() {
            return None;
        }
        let mut mean = vec![0.0; self.config.boxes];
        for p in &reached {
            for (m, v) in mean.iter_mut().zip(p.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= reached.len() as f64);
        Some(mean)
    }

    /// Rows `replica,t_macro,box_index,box_center_u,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "replica,t_macro,box_index,box_center_u,density")?;
        let centers = self.box_centers();
        for run in &self.replicas {
            for (profile, t) in run.profiles.iter().zip(&self.config.output_times) {
                for (b, density) in profile.iter().enumerate() {
                    writeln!(out, "{},{},{},{},{}", run.replica, t, b, centers[b], density)?;
                }
            }
        }
        Ok(())
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "generator": GENERATOR,
            "build": crate::BUILD_ID,
            "model": self.config.model.to_string(),
            "N": self.config.n_sites,
            "K": self.config.boxes,
            "seed": self.config.seed,
            "replica_count": self.config.replicas,
            "config": self.config,
            "replicas": self.replicas,
        })
    }
}

struct Replica<'a> {
    config: &'a SimulationConfig,
    eta: Configuration,
    particles: usize,
    scale: f64,
    profiles: Vec<Vec<f64>>,
    events: u64,
}

impl Replica<'_> {
    fn record(&mut self) -> Result<()> {
        assert_eq!(self.eta.particle_count(), self.particles, "particle number changed");
        self.profiles.push(coarse_grain(&self.eta, self.config.boxes)?);
        Ok(())
    }

    /// Records every output time not after `micro_time`; `true` if all are done.
    fn record_until(&mut self, micro_time: f64, inclusive: bool) -> Result<bool> {
        let times = &self.config.output_times;
        while let Some(&t) = times.get(self.profiles.len()) {
            let due = if inclusive {
                t * self.scale <= micro_time
            } else {
                t * self.scale < micro_time
            };
            if !due {
                break;
            }
            self.record()?;
        }
        Ok(self.profiles.len() == times.len())
    }

    fn blocked_at(&self, micro_time: f64) -> Option<f64> {
        (self.profiles.len() < self.config.output_times.len()).then_some(micro_time / self.scale)
    }
}

fn run_direct(rep: &mut Replica, rng: &mut ChaCha8Rng) -> Result<Option<f64>> {
    let mut table = RateTable::new(&rep.config.model, &rep.eta)?;
    let horizon = rep.config.t_max * rep.scale;
    let mut clock = Clock::default();
    loop {
        let total = table.total();
        if total <= 0.0 {
            rep.record_until(clock.sum, true)?;
            return Ok(rep.blocked_at(clock.sum));
        }
        let dt = -(1.0 - rng.random::<f64>()).ln() / total;
        let arrival = clock.sum + dt;
        if rep.record_until(arrival, false)? && arrival > horizon {
            return Ok(None);
        }
        let x = table.sample(rng.random::<f64>() * total);
        rep.eta.swap_in_place(x as i64);
        table.update_around(&rep.eta, x);
        clock.add(dt);
        rep.events += 1;
    }
}

/// Bit array holding sites `−r, …, N + r + 1`, so the pattern of any node is
/// a contiguous read.
struct Padded {
    n_sites: usize,
    radius: usize,
    span: usize,
    words: Vec<u64>,
}

impl Padded {
    fn new(eta: &Configuration, radius: usize) -> Self {
        let n_sites = eta.n_sites();
        let span = 2 * radius + 2;
        let len = n_sites + span;
        let mut padded = Self {
            n_sites,
            radius,
            span,
            words: vec![0; len.div_ceil(64) + 1],
        };
        for e in 0..len {
            if eta.occupancy(e as i64 - radius as i64) == 1 {
                padded.words[e / 64] |= 1 << (e % 64);
            }
        }
        padded
    }

    #[inline]
    fn pattern(&self, x: usize) -> usize {
        let (w, o) = (x / 64, x % 64);
        let pair = self.words[w] as u128 | ((self.words[w + 1] as u128) << 64);
        ((pair >> o) as u64 & ((1 << self.span) - 1)) as usize
    }

    #[inline]
    fn toggle(&mut self, e: usize) {
        self.words[e / 64] ^= 1 << (e % 64);
    }

    /// Exchanges the (distinct) occupations of sites `x` and `x + 1`.
    #[inline]
    fn swap(&mut self, x: usize) {
        let (n, r) = (self.n_sites, self.radius);
        for s in [x, if x + 1 == n { 0 } else { x + 1 }] {
            self.toggle(s + r);
            if s + r >= n {
                self.toggle(s + r - n);
            }
            if s < r + 2 {
                self.toggle(s + r + n);
            }
        }
    }

    fn configuration(&self) -> Configuration {
        let sites: Vec<u8> = (self.radius..self.radius + self.n_sites)
            .map(|e| ((self.words[e / 64] >> (e % 64)) & 1) as u8)
            .collect();
        Configuration::from_sites(&sites).expect("n_sites >= 2")
    }
}

/// Every node rings at rate one and the exchange is accepted with
/// probability equal to its rate; the number of rings between consecutive
/// output times is Poisson.
fn run_uniformized(rep: &mut Replica, rng: &mut ChaCha8Rng) -> Result<Option<f64>> {
    let local = LocalRates::new(&rep.config.model)?;
    let n = rep.eta.n_sites();
    if local.span() > 64 {
        return Err(Error::InvalidParameter(
            "window too long for the uniformized engine".into(),
        ));
    }
    // acceptance thresholds on the scale 2^64; a rate of one always accepts
    let thresholds: Vec<u64> = effective_rates(&local)
        .iter()
        .map(|&r| if r >= 1.0 { u64::MAX } else { (r * 2f64.powi(64)) as u64 })
        .collect();
    let mut lattice = Padded::new(&rep.eta, local.radius());
    let blocked = |lattice: &Padded| (0..n).all(|x| thresholds[lattice.pattern(x)] == 0);
    let patience = 64 * n as u64;
    let mut checkpoints: Vec<f64> = rep.config.output_times.clone();
    checkpoints.push(rep.config.t_max);
    let mut now = 0.0;
    for &t in &checkpoints {
        if blocked(&lattice) {
            rep.record_until(now * rep.scale, true)?;
            return Ok(rep.blocked_at(now * rep.scale));
        }
        let lambda = n as f64 * (t - now) * rep.scale;
        let rings = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng) as u64
        } else {
            0
        };
        let mut misses = 0_u64;
        for _ in 0..rings {
            // high half picks the node, low half is the acceptance variable
            let wide = rng.next_u64() as u128 * n as u128;
            let (x, u) = ((wide >> 64) as usize, wide as u64);
            if u < thresholds[lattice.pattern(x)] {
                lattice.swap(x);
                rep.events += 1;
                misses = 0;
            } else {
                misses += 1;
                if misses >= patience && blocked(&lattice) {
                    break;
                }
            }
        }
        now = f64::max(now, t);
        rep.eta = lattice.configuration();
        rep.record_until(now * rep.scale, true)?;
    }
    Ok(None)
}

fn run_replica(config: &SimulationConfig, replica: usize) -> Result<ReplicaRun> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replica as u64);
    let eta = sample_with(&config.profile, config.n_sites, &mut rng);
    let mut rep = Replica {
        config,
        particles: eta.particle_count(),
        eta,
        scale: (config.n_sites as f64).powi(2),
        profiles: Vec::with_capacity(config.output_times.len()),
        events: 0,
    };
    let blocked_at = match config.engine {
        Engine::Direct => run_direct(&mut rep, &mut rng)?,
        Engine::Uniformized => run_uniformized(&mut rep, &mut rng)?,
    };
    Ok(ReplicaRun {
        replica,
        events: rep.events,
        particles: rep.particles,
        blocked_at,
        profiles: rep.profiles,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs all replicas of `config`.
pub fn run_trajectory(config: &SimulationConfig) -> Result<Trajectory> {
    config.validate()?;
    let replicas = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        config: config.clone(),
        replicas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Mean and standard error of `rate(model, ·, 0)` under `ν_ρ` on a torus of
/// `4(r + 2)` sites, `r` the window length.
pub fn monte_carlo_expectation(model: &ModelSpec, rho: f64, samples: usize, seed: u64) -> Result<Estimate> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 samples, got {samples}"
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::DensityOutOfRange(rho));
    }
    let local = LocalRates::new(model)?;
    let values: Vec<f64> = local.values().iter().map(|&r| to_f64(r)).collect();
    let n_sites = 4 * (model.window_len() + 2);
    let profile = ProfileSpec::Constant(rho);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        let eta = sample_with(&profile, n_sites, &mut rng);
        let c = values[local.pattern(&eta, 0)];
        sum += c;
        sq += c * c;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(Estimate {
        estimate: mean,
        stderr: (var / n).sqrt(),
        samples,
    })
}

//! Exhaustive and randomized verification of the algebraic identities that
//! relate the Bernstein, reduced PMM, PMM and SSEP constraints.
//!
//! Each checker walks configurations (all `2^N` of them in exhaustive mode),
//! evaluates both sides of an identity at every node in exact arithmetic and
//! collects witnesses for every mismatch. Configuration ranges are evaluated
//! in parallel and merged in range order, so reports are deterministic.

#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constraints::{
    self, gradient_pair_with, monomial_bj, rate_unchecked, saturating_configuration, GradientForm,
};
use crate::error::{Error, Result};
use crate::exact::{binomial, int, rat, rpow, Rational};
use crate::lattice::{check_torus, Configuration, MAX_ENUMERATION_SITES};
use crate::model::ModelSpec;

/// Witnesses kept per report; the full count is in `failure_count`.
pub const MAX_WITNESSES: usize = 32;

/// Largest torus on which the identity suite runs exhaustively by default.
pub const EXHAUSTIVE_LIMIT: usize = 20;

const CHUNKS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Exhaustive,
    Randomized { count: u64, seed: u64 },
}

impl Mode {
    /// Exhaustive up to [`EXHAUSTIVE_LIMIT`] sites, randomized beyond.
    pub fn default_for(n_sites: usize, seed: u64) -> Self {
        if n_sites <= EXHAUSTIVE_LIMIT {
            Mode::Exhaustive
        } else {
            Mode::Randomized { count: 1 << 16, seed }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(rename = "N")]
    pub n_sites: usize,
}

/// A reproducible counterexample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub configuration: String,
    pub node: i64,
    pub lhs: String,
    pub rhs: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Witness {
    pub fn new(eta: &Configuration, node: i64, lhs: Rational, rhs: Rational) -> Self {
        Self {
            configuration: eta.to_string(),
            node,
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub params: Params,
    pub mode: Mode,
    pub states_checked: u64,
    pub failure_count: u64,
    pub failures: Vec<Witness>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl IdentityReport {
    pub(crate) fn from_parts(
        identity: impl Into<String>,
        params: Params,
        mode: Mode,
        states_checked: u64,
        tally: Tally,
    ) -> Self {
        Self {
            identity: identity.into(),
            params,
            mode,
            states_checked,
            failure_count: tally.count,
            passed: tally.count == 0,
            failures: tally.witnesses,
            notes: Vec::new(),
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {} {}: {} states, {} failures",
            if self.passed { "PASS" } else { "FAIL" },
            self.identity,
            serde_json::to_string(&self.params).unwrap_or_default(),
            self.states_checked,
            self.failure_count
        )
    }
}

/// Failure counter with a bounded witness list; merging keeps range order.
#[derive(Debug, Default)]
pub(crate) struct Tally {
    pub(crate) count: u64,
    pub(crate) witnesses: Vec<Witness>,
}

impl Tally {
    pub(crate) fn push(&mut self, witness: Witness) {
        self.count += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(witness);
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.count += other.count;
        let room = MAX_WITNESSES - self.witnesses.len();
        self.witnesses.extend(other.witnesses.into_iter().take(room));
        self
    }
}

fn random_configuration(n_sites: usize, rng: &mut ChaCha8Rng) -> Configuration {
    let bits: Vec<u8> = (0..n_sites).map(|_| rng.random_range(0..2)).collect();
    Configuration::from_sites(&bits).expect("n_sites >= 2")
}

/// Runs `check` over the configurations selected by `mode`.
pub(crate) fn run_states<F>(n_sites: usize, mode: Mode, check: F) -> Result<(u64, Tally)>
where
    F: Fn(&Configuration, &mut Tally) + Sync,
{
    check_torus(n_sites, 2)?;
    match mode {
        Mode::Exhaustive => {
            if n_sites > MAX_ENUMERATION_SITES {
                return Err(Error::TooLarge {
                    what: "exhaustive verification",
                    n_sites,
                    limit: MAX_ENUMERATION_SITES,
                });
            }
            let total = 1_u64 << n_sites;
            let chunk = total.div_ceil(CHUNKS);
            let tally = (0..CHUNKS)
                .into_par_iter()
                .map(|c| {
                    let mut tally = Tally::default();
                    for id in (c * chunk)..((c + 1) * chunk).min(total) {
                        check(&Configuration::from_state_id(n_sites, id), &mut tally);
                    }
                    tally
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(Tally::default(), Tally::merge);
            Ok((total, tally))
        }
        Mode::Randomized { count, seed } => {
            let chunk = count.div_ceil(CHUNKS);
            let tally = (0..CHUNKS)
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c);
                    let mut tally = Tally::default();
                    for _ in (c * chunk)..((c + 1) * chunk).min(count) {
                        check(&random_configuration(n_sites, &mut rng), &mut tally);
                    }
                    tally
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(Tally::default(), Tally::merge);
            Ok((count, tally))
        }
    }
}

fn check_model(model: &ModelSpec, n_sites: usize) -> Result<()> {
    model.validate()?;
    check_torus(n_sites, model.min_sites())
}

/// Rates of `model` at every node.
fn rates(model: &ModelSpec, eta: &Configuration) -> Vec<Rational> {
    (0..eta.n_sites() as i64)
        .map(|x| rate_unchecked(model, eta, x))
        .collect()
}

fn bernstein_family(l: usize, eta: &Configuration) -> Vec<Vec<Rational>> {
    (0..=l).map(|n| rates(&ModelSpec::Bernstein { n, l }, eta)).collect()
}

fn reduced_family(l: usize, eta: &Configuration) -> Vec<Vec<Rational>> {
    (0..=l)
        .map(|ell| rates(&ModelSpec::ReducedPmm { ell, l }, eta))
        .collect()
}

fn params_l(l: usize, n_sites: usize) -> Params {
    Params {
        l: Some(l),
        n_sites,
        ..Params::default()
    }
}

fn params_model(model: &ModelSpec, n_sites: usize) -> Params {
    let (n, ell, l) = match *model {
        ModelSpec::Ssep => (None, None, None),
        ModelSpec::Pmm { n } => (Some(n), None, None),
        ModelSpec::Bernstein { n, l } => (Some(n), None, Some(l)),
        ModelSpec::ReducedPmm { ell, l } => (None, Some(ell), Some(l)),
    };
    Params {
        model: Some(model.to_string()),
        n,
        ell,
        l,
        n_sites,
    }
}

/// `current(x) = −(H(x+1) − H(x))` at every node.
pub fn check_gradient(model: &ModelSpec, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    check_gradient_with(model, n_sites, mode, GradientForm::Standard)
}

/// [`check_gradient`] with an alternative closed form for `h` or `g`.
pub fn check_gradient_with(
    model: &ModelSpec,
    n_sites: usize,
    mode: Mode,
    form: GradientForm,
) -> Result<IdentityReport> {
    model.validate()?;
    let l = match *model {
        ModelSpec::Bernstein { l, .. } | ModelSpec::ReducedPmm { l, .. } => l,
        _ => {
            return Err(Error::UnsupportedFamily {
                op: "check_gradient",
                model: model.to_string(),
            })
        }
    };
    check_torus(n_sites, 2 * l + 2)?;
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        let n = n_sites as i64;
        let potential: Vec<Rational> = (0..n)
            .map(|x| gradient_pair_with(model, eta, x, form).expect("validated").total)
            .collect();
        for x in 0..n {
            let lhs = rate_unchecked(model, eta, x) * int(constraints::exclusion_difference(eta, x));
            let rhs = potential[x as usize] - potential[((x + 1) % n) as usize];
            if lhs != rhs {
                tally.push(Witness::new(eta, x, lhs, rhs));
            }
        }
    })?;
    let name = match form {
        GradientForm::Standard => "gradient".to_string(),
        GradientForm::ShiftedThreshold => "gradient[shifted-threshold h]".to_string(),
        GradientForm::IndicatorReducedH => "gradient[indicator h]".to_string(),
        GradientForm::BackwardAnchors => "gradient[backward anchors g]".to_string(),
    };
    Ok(IdentityReport::from_parts(
        name,
        params_model(model, n_sites),
        mode,
        states,
        tally,
    ))
}

/// The currents around the torus sum to zero.
pub fn check_current_telescoping(model: &ModelSpec, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    check_model(model, n_sites)?;
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        let total: Rational = (0..n_sites as i64)
            .map(|x| rate_unchecked(model, eta, x) * int(constraints::exclusion_difference(eta, x)))
            .sum();
        if total != int(0) {
            tally.push(Witness::new(eta, 0, total, int(0)).with_detail("sum of currents"));
        }
    })?;
    Ok(IdentityReport::from_parts(
        "current_telescoping",
        params_model(model, n_sites),
        mode,
        states,
        tally,
    ))
}

/// `p_ℓ = Σ_{n=ℓ}^{L} C(n,ℓ)/C(L,ℓ) b_n` for every `ℓ`.
pub fn check_inversion(l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    check_model(&ModelSpec::Bernstein { n: 0, l }, n_sites)?;
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        let b = bernstein_family(l, eta);
        let p = reduced_family(l, eta);
        for ell in 0..=l {
            for x in 0..n_sites {
                let rhs: Rational = (ell..=l)
                    .map(|n| rat(binomial(n as i64, ell as i64), binomial(l as i64, ell as i64)) * b[n][x])
                    .sum();
                if p[ell][x] != rhs {
                    tally.push(Witness::new(eta, x as i64, p[ell][x], rhs).with_detail(format!("l={ell}")));
                }
            }
        }
    })?;
    Ok(IdentityReport::from_parts(
        "inversion",
        params_l(l, n_sites),
        mode,
        states,
        tally,
    ))
}

/// `b_n = Σ_{ℓ=n}^{L} (−1)^{ℓ−n} C(L,ℓ) C(ℓ,n) p_ℓ` for every `n`.
pub fn check_decomposition(l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    check_model(&ModelSpec::Bernstein { n: 0, l }, n_sites)?;
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        let b = bernstein_family(l, eta);
        let p = reduced_family(l, eta);
        for n in 0..=l {
            for x in 0..n_sites {
                let rhs: Rational = (n..=l)
                    .map(|ell| {
                        let sign = if (ell - n) % 2 == 0 { 1 } else { -1 };
                        int(sign * binomial(l as i64, ell as i64) * binomial(ell as i64, n as i64)) * p[ell][x]
                    })
                    .sum();
                if b[n][x] != rhs {
                    tally.push(Witness::new(eta, x as i64, b[n][x], rhs).with_detail(format!("n={n}")));
                }
            }
        }
    })?;
    Ok(IdentityReport::from_parts(
        "decomposition",
        params_l(l, n_sites),
        mode,
        states,
        tally,
    ))
}

/// `b_n ≤ C(L,n) p_n` pointwise.
pub fn check_inequality(n: usize, l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    let bern = ModelSpec::Bernstein { n, l };
    check_model(&bern, n_sites)?;
    let reduced = ModelSpec::ReducedPmm { ell: n, l };
    let factor = int(binomial(l as i64, n as i64));
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        for x in 0..n_sites as i64 {
            let lhs = rate_unchecked(&bern, eta, x);
            let rhs = factor * rate_unchecked(&reduced, eta, x);
            if lhs > rhs {
                tally.push(Witness::new(eta, x, lhs, rhs));
            }
        }
    })?;
    let mut params = params_l(l, n_sites);
    params.n = Some(n);
    Ok(IdentityReport::from_parts("inequality", params, mode, states, tally))
}

/// `Σ_n b_n = 1` pointwise.
pub fn check_partition(l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    check_model(&ModelSpec::Bernstein { n: 0, l }, n_sites)?;
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        let b = bernstein_family(l, eta);
        for x in 0..n_sites {
            let total: Rational = b.iter().map(|row| row[x]).sum();
            if total != int(1) {
                tally.push(Witness::new(eta, x as i64, total, int(1)));
            }
        }
    })?;
    let mut report = IdentityReport::from_parts("partition", params_l(l, n_sites), mode, states, tally);
    report
        .notes
        .push(format!("0 < L < N/2 holds: {}", l > 0 && 2 * l < n_sites));
    Ok(report)
}

/// `b_n(η) = b_{L−n}(η̄)` with `η̄` the particle–hole image.
pub fn check_symmetry(n: usize, l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    let model = ModelSpec::Bernstein { n, l };
    check_model(&model, n_sites)?;
    let mirror = ModelSpec::Bernstein { n: l - n, l };
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        let hole = eta.particle_hole();
        for x in 0..n_sites as i64 {
            let lhs = rate_unchecked(&model, eta, x);
            let rhs = rate_unchecked(&mirror, &hole, x);
            if lhs != rhs {
                tally.push(Witness::new(eta, x, lhs, rhs));
            }
        }
    })?;
    let mut params = params_l(l, n_sites);
    params.n = Some(n);
    Ok(IdentityReport::from_parts("symmetry", params, mode, states, tally))
}

/// `B(n, n) = PMM(n)` and `PMM_L(L) = PMM(L)` pointwise, exhaustively.
pub fn check_interpolation(n: usize, l: usize, n_sites: usize) -> Result<IdentityReport> {
    let pmm_n = ModelSpec::Pmm { n };
    let pmm_l = ModelSpec::Pmm { n: l };
    let bern = ModelSpec::Bernstein { n, l: n };
    let reduced = ModelSpec::ReducedPmm { ell: l, l };
    check_model(&pmm_n, n_sites)?;
    check_model(&reduced, n_sites)?;
    let (states, tally) = run_states(n_sites, Mode::Exhaustive, |eta, tally| {
        for x in 0..n_sites as i64 {
            let (lhs, rhs) = (rate_unchecked(&bern, eta, x), rate_unchecked(&pmm_n, eta, x));
            if lhs != rhs {
                tally.push(Witness::new(eta, x, lhs, rhs).with_detail("B(n,n) vs PMM(n)"));
            }
            let (lhs, rhs) = (rate_unchecked(&reduced, eta, x), rate_unchecked(&pmm_l, eta, x));
            if lhs != rhs {
                tally.push(Witness::new(eta, x, lhs, rhs).with_detail("PMM_L(L) vs PMM(L)"));
            }
        }
    })?;
    let mut params = params_l(l, n_sites);
    params.n = Some(n);
    Ok(IdentityReport::from_parts(
        "interpolation",
        params,
        Mode::Exhaustive,
        states,
        tally,
    ))
}

/// `p_ℓ ≥ p_{ℓ+1}` for `0 ≤ ℓ < L`.
pub fn check_monotonicity(l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    check_model(&ModelSpec::ReducedPmm { ell: 0, l }, n_sites)?;
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        let p = reduced_family(l, eta);
        for ell in 0..l {
            for x in 0..n_sites {
                if p[ell][x] < p[ell + 1][x] {
                    tally.push(Witness::new(eta, x as i64, p[ell][x], p[ell + 1][x]).with_detail(format!("l={ell}")));
                }
            }
        }
    })?;
    Ok(IdentityReport::from_parts(
        "monotonicity",
        params_l(l, n_sites),
        mode,
        states,
        tally,
    ))
}

fn threshold_check<F>(name: &str, n: usize, l: usize, n_sites: usize, mode: Mode, rhs: F) -> Result<IdentityReport>
where
    F: Fn(i64) -> i64 + Sync,
{
    check_model(&ModelSpec::Bernstein { n, l }, n_sites)?;
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        for x in 0..n_sites as i64 {
            let k = eta.box_count(x, l).expect("validated") as i64;
            let lhs = (k > n as i64) as i64;
            let right = rhs(k);
            if lhs != right {
                tally.push(Witness::new(eta, x, int(lhs), int(right)).with_detail(format!("box count {k}")));
            }
        }
    })?;
    let mut params = params_l(l, n_sites);
    params.n = Some(n);
    Ok(IdentityReport::from_parts(name, params, mode, states, tally))
}

/// `1{box ≥ n+1} = Σ_{ℓ=n}^{L} (−1)^{ℓ−n} C(ℓ,n) 1{box ≥ ℓ+1}`, read literally.
///
/// This form fails whenever the box holds at least `n + 2` particles (for
/// example `n = 0`, two particles: the right side is `1 − 1 = 0`); the
/// inclusion–exclusion that does hold is [`check_threshold_binomial`].
pub fn check_threshold_identity(n: usize, l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    threshold_check("threshold_identity", n, l, n_sites, mode, |k| {
        (n..=l)
            .map(|ell| {
                let sign = if (ell - n).is_multiple_of(2) { 1 } else { -1 };
                sign * binomial(ell as i64, n as i64) * (k > ell as i64) as i64
            })
            .sum()
    })
}

/// `1{box ≥ n+1} = Σ_{ℓ=n}^{L} (−1)^{ℓ−n} C(ℓ,n) C(box, ℓ+1)`.
///
/// This is the relation between the `h` parts of the Bernstein and reduced
/// gradient potentials: `h_n = Σ_ℓ (−1)^{ℓ−n} C(L,ℓ) C(ℓ,n) h_ℓ`.
pub fn check_threshold_binomial(n: usize, l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    threshold_check("threshold_binomial", n, l, n_sites, mode, |k| {
        (n..=l)
            .map(|ell| {
                let sign = if (ell - n).is_multiple_of(2) { 1 } else { -1 };
                sign * binomial(ell as i64, n as i64) * binomial(k, ell as i64 + 1)
            })
            .sum()
    })
}

/// The monomial expansion of `b^j` equals the window indicator for all `n, j, x`.
pub fn check_monomial(l: usize, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    check_model(&ModelSpec::Bernstein { n: 0, l }, n_sites)?;
    let (states, tally) = run_states(n_sites, mode, |eta, tally| {
        for n in 0..=l {
            let model = ModelSpec::Bernstein { n, l };
            for j in 0..=l {
                for x in 0..n_sites as i64 {
                    let lhs = monomial_bj(n, l, j, eta, x).expect("validated");
                    let count = eta.window_count(x, j, l).expect("validated");
                    let rhs = int((count == n) as i64);
                    debug_assert_eq!(rhs, constraints::window_indicator(&model, eta, x, j).unwrap());
                    if lhs != rhs {
                        tally.push(Witness::new(eta, x, lhs, rhs).with_detail(format!("n={n} j={j}")));
                    }
                }
            }
        }
    })?;
    Ok(IdentityReport::from_parts(
        "monomial",
        params_l(l, n_sites),
        mode,
        states,
        tally,
    ))
}

/// `0 ≤ c ≤ 1`, invariance of the rate under the node's own exchange, and
/// attainment of the value one on a constructed configuration.
pub fn check_rate_properties(model: &ModelSpec, n_sites: usize, mode: Mode) -> Result<IdentityReport> {
    check_model(model, n_sites)?;
    let (states, mut tally) = run_states(n_sites, mode, |eta, tally| {
        for x in 0..n_sites as i64 {
            let c = rate_unchecked(model, eta, x);
            if c < int(0) || c > int(1) {
                tally.push(Witness::new(eta, x, c, int(1)).with_detail("rate out of [0,1]"));
            }
            let swapped = rate_unchecked(model, &eta.swap(x), x);
            if c != swapped {
                tally.push(Witness::new(eta, x, c, swapped).with_detail("node exchange changes rate"));
            }
        }
    })?;
    let mut notes = Vec::new();
    if n_sites >= 2 * model.window_len() + 2 {
        let xi = saturating_configuration(model, n_sites)?;
        let c = rate_unchecked(model, &xi, 0);
        if c != int(1) {
            tally.push(Witness::new(&xi, 0, c, int(1)).with_detail("maximum not attained"));
        }
        notes.push(format!("rate one attained on {xi}"));
    }
    let mut report = IdentityReport::from_parts("rate_properties", params_model(model, n_sites), mode, states, tally);
    report.notes = notes;
    Ok(report)
}

/// `E_ρ[c]` computed exactly by summing the rate over every local environment
/// of the node, weighted by the Bernoulli product measure, compared with the
/// closed-form diffusivity at each density in `rho_points`.
pub fn check_expectation(model: &ModelSpec, rho_points: &[Rational]) -> Result<IdentityReport> {
    model.validate()?;
    let needed = model.window_len() + 1;
    if rho_points.len() < needed {
        return Err(Error::InvalidParameter(format!(
            "need at least {needed} density points, got {}",
            rho_points.len()
        )));
    }
    for (i, a) in rho_points.iter().enumerate() {
        if rho_points[..i].contains(a) {
            return Err(Error::InvalidParameter(format!("density point {a} repeated")));
        }
    }
    let r = model.interaction_radius();
    let span = 2 * r + 2;
    let mut tally = Tally::default();
    for &rho in rho_points {
        let expected = constraints::diffusivity_exact(model, rho)?;
        let mut total = int(0);
        for pattern in 0..(1_u64 << span) {
            let k = pattern.count_ones() as usize;
            let sites: Vec<u8> = (0..span).map(|s| ((pattern >> s) & 1) as u8).collect();
            let eta = Configuration::from_sites(&sites)?;
            let weight = rpow(rho, k) * rpow(int(1) - rho, span - k);
            total += weight * rate_unchecked(model, &eta, r as i64);
        }
        if total != expected {
            tally.push(Witness {
                configuration: format!("rho={rho}"),
                node: 0,
                lhs: total.to_string(),
                rhs: expected.to_string(),
                detail: Some("equilibrium expectation".into()),
            });
        }
    }
    let mut params = params_model(model, span);
    params.n_sites = span;
    let mut report = IdentityReport::from_parts("expectation", params, Mode::Exhaustive, 1 << span, tally);
    report.notes.push(format!(
        "densities: {}",
        rho_points.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ")
    ));
    Ok(report)
}

/// `count` evenly spaced rational densities `0, 1/(count−1), …, 1`.
pub fn uniform_density_points(count: usize) -> Vec<Rational> {
    assert!(count >= 2);
    (0..count).map(|i| rat(i as i64, count as i64 - 1)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NegativityResult {
    /// Signed offset of the vacancy from the node's left site.
    pub offset: i64,
    pub value: String,
    #[serde(skip)]
    pub exact: Rational,
    pub configuration: String,
    /// The claimed value `−1/(n+k+1)`.
    pub reference: String,
    /// Every vacancy offset whose alternating sum equals the minimum.
    pub minimizers: Vec<i64>,
}

/// Scans all configurations with exactly one vacancy and returns the vacancy
/// position minimising the alternating PMM sum at node 0.
///
/// Offsets are scanned from `−⌈N/2⌉+1` upward; ties keep the first hit.
pub fn negativity_search(n: usize, k: usize, n_sites: usize) -> Result<NegativityResult> {
    check_torus(n_sites, 2 * (n + k) + 2)?;
    let half = n_sites as i64 / 2;
    let offsets: Vec<i64> = ((half - n_sites as i64 + 1)..=half).collect();
    let mut values = Vec::with_capacity(offsets.len());
    for &offset in &offsets {
        let mut eta = Configuration::full(n_sites);
        eta.set(offset, 0);
        values.push((offset, constraints::alt_sum_tilde_c(n, k, &eta, 0)?, eta));
    }
    let best = values.iter().map(|(_, v, _)| *v).min().expect("non-empty");
    let minimizers: Vec<i64> = values
        .iter()
        .filter(|(_, v, _)| *v == best)
        .map(|(o, _, _)| *o)
        .collect();
    let (offset, _, eta) = values.iter().find(|(_, v, _)| *v == best).expect("non-empty");
    Ok(NegativityResult {
        offset: *offset,
        value: best.to_string(),
        exact: best,
        configuration: eta.to_string(),
        reference: rat(-1, (n + k + 1) as i64).to_string(),
        minimizers,
    })
}

/// Every identity at box parameter `l` on a torus of `n_sites`.
pub fn run_suite(l: usize, n_sites: usize, mode: Mode) -> Result<Vec<IdentityReport>> {
    let mut reports = Vec::new();
    for n in 0..=l {
        reports.push(check_gradient(&ModelSpec::Bernstein { n, l }, n_sites, mode)?);
        reports.push(check_gradient(&ModelSpec::ReducedPmm { ell: n, l }, n_sites, mode)?);
    }
    reports.push(check_inversion(l, n_sites, mode)?);
    reports.push(check_decomposition(l, n_sites, mode)?);
    reports.push(check_partition(l, n_sites, mode)?);
    reports.push(check_monotonicity(l, n_sites, mode)?);
    reports.push(check_monomial(l, n_sites, mode)?);
    for n in 0..=l {
        reports.push(check_inequality(n, l, n_sites, mode)?);
        reports.push(check_symmetry(n, l, n_sites, mode)?);
        reports.push(check_threshold_identity(n, l, n_sites, mode)?);
        reports.push(check_threshold_binomial(n, l, n_sites, mode)?);
        reports.push(check_rate_properties(&ModelSpec::Bernstein { n, l }, n_sites, mode)?);
        reports.push(check_rate_properties(
            &ModelSpec::ReducedPmm { ell: n, l },
            n_sites,
            mode,
        )?);
    }
    if mode == Mode::Exhaustive {
        for n in 1..=l {
            reports.push(check_interpolation(n, l, n_sites)?);
        }
    }
    let points = uniform_density_points(l + 1);
    for n in 0..=l {
        reports.push(check_expectation(&ModelSpec::Bernstein { n, l }, &points)?);
        reports.push(check_expectation(&ModelSpec::ReducedPmm { ell: n, l }, &points)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_examples() {
        let report = check_gradient(&ModelSpec::Bernstein { n: 1, l: 2 }, 8, Mode::Exhaustive).unwrap();
        assert!(report.passed);
        assert_eq!(report.states_checked, 256);
        assert!(
            check_gradient(&ModelSpec::ReducedPmm { ell: 1, l: 2 }, 8, Mode::Exhaustive)
                .unwrap()
                .passed
        );
        assert!(check_gradient(&ModelSpec::Ssep, 8, Mode::Exhaustive).is_err());
        assert!(check_gradient(&ModelSpec::Bernstein { n: 1, l: 2 }, 5, Mode::Exhaustive).is_err());
    }

    #[test]
    fn gradient_negative_controls() {
        let model = ModelSpec::Bernstein { n: 1, l: 2 };
        for form in [GradientForm::ShiftedThreshold, GradientForm::BackwardAnchors] {
            let report = check_gradient_with(&model, 8, Mode::Exhaustive, form).unwrap();
            assert!(!report.passed, "{form:?}");
            assert!(!report.failures.is_empty());
            let w = &report.failures[0];
            let eta: Configuration = w.configuration.parse().unwrap();
            assert_eq!(eta.n_sites(), 8);
        }
        let reduced = ModelSpec::ReducedPmm { ell: 1, l: 2 };
        assert!(
            !check_gradient_with(&reduced, 8, Mode::Exhaustive, GradientForm::IndicatorReducedH)
                .unwrap()
                .passed
        );
        // the indicator form coincides with the binomial one at ℓ = L
        let top = ModelSpec::ReducedPmm { ell: 2, l: 2 };
        assert!(
            check_gradient_with(&top, 8, Mode::Exhaustive, GradientForm::IndicatorReducedH)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn binomial_identities() {
        assert!(check_inversion(1, 4, Mode::Exhaustive).unwrap().passed);
        assert!(check_decomposition(2, 6, Mode::Exhaustive).unwrap().passed);
        assert!(check_partition(1, 4, Mode::Exhaustive).unwrap().passed);
        assert!(check_monotonicity(3, 8, Mode::Exhaustive).unwrap().passed);
        assert!(check_monomial(2, 6, Mode::Exhaustive).unwrap().passed);
        for n in 0..=3 {
            assert!(check_inequality(n, 3, 8, Mode::Exhaustive).unwrap().passed);
            assert!(check_symmetry(n, 3, 8, Mode::Exhaustive).unwrap().passed);
        }
        assert!(check_interpolation(3, 3, 10).unwrap().passed);
    }

    #[test]
    fn threshold_forms() {
        assert!(
            check_threshold_identity(1, 3, 10, Mode::Exhaustive)
                .unwrap()
                .failure_count
                > 0
        );
        // box_count ≤ n: both sides vanish, so n = L passes
        assert!(check_threshold_identity(3, 3, 10, Mode::Exhaustive).unwrap().passed);
        for n in 0..=3 {
            assert!(check_threshold_binomial(n, 3, 10, Mode::Exhaustive).unwrap().passed);
        }
    }

    #[test]
    fn expectation_examples() {
        let half = [rat(1, 2)];
        let r = check_expectation(&ModelSpec::ReducedPmm { ell: 2, l: 4 }, &uniform_density_points(5)).unwrap();
        assert!(r.passed);
        assert!(check_expectation(&ModelSpec::Ssep, &half).unwrap().passed);
        assert!(check_expectation(&ModelSpec::ReducedPmm { ell: 2, l: 4 }, &half).is_err());
        assert!(check_expectation(&ModelSpec::Pmm { n: 1 }, &[rat(1, 2), rat(1, 2)]).is_err());
    }

    #[test]
    fn negativity_examples() {
        let r = negativity_search(1, 2, 8).unwrap();
        assert_eq!(r.exact, rat(-1, 4));
        assert_eq!(r.offset, -3);
        assert_eq!(r.minimizers, vec![-3, 4]);
        assert_eq!(negativity_search(2, 2, 10).unwrap().exact, rat(-1, 5));
        assert!(negativity_search(3, 0, 8).unwrap().exact >= int(0));
        assert!(negativity_search(1, 2, 7).is_err());
    }

    #[test]
    fn randomized_mode_is_reproducible() {
        let model = ModelSpec::Bernstein { n: 2, l: 4 };
        let mode = Mode::Randomized { count: 500, seed: 9 };
        let a = check_gradient(&model, 30, mode).unwrap();
        let b = check_gradient(&model, 30, mode).unwrap();
        assert_eq!(a, b);
        assert!(a.passed);
        assert_eq!(a.states_checked, 500);
        let bad = check_gradient_with(&model, 30, mode, GradientForm::ShiftedThreshold).unwrap();
        assert!(!bad.passed);
    }

    #[test]
    fn witness_cap() {
        let r = check_threshold_identity(0, 4, 12, Mode::Exhaustive).unwrap();
        assert!(r.failure_count as usize > MAX_WITNESSES);
        assert_eq!(r.failures.len(), MAX_WITNESSES);
        assert!(!r.passed);
    }
}

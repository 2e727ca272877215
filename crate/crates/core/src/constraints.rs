//! Kinetic constraints, exclusion factors, currents and gradient potentials.
//!
//! Every function here works in exact rational arithmetic. A node `x` is the
//! pair `{x, x+1}`; the rate of the exchange across it is the constraint
//! evaluated on the configuration seen from `x` (the shift `τ^x η`).
//!
//! Windows are always the `L` sites of a box of `L + 2` consecutive sites that
//! contains the node, with the node itself removed. For the porous media model
//! of order `n` the windows are the same boxes with `L = n`, so that the
//! Bernstein model `B(n, n)` and the reduced model `PMM_n(n)` coincide with it
//! pointwise.

use crate::error::{Error, Result};
use crate::exact::{binomial, int, rat, rpow, Rational};
use crate::lattice::{check_torus, window_offsets, Configuration};
use crate::model::ModelSpec;

/// Direction of a particle hop across a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From `x` to `x + 1`.
    Forward,
    /// From `x + 1` to `x`.
    Backward,
}

/// `η(x)(1 − η(x+1))` forward, `η(x+1)(1 − η(x))` backward.
#[inline]
pub fn exclusion(eta: &Configuration, x: i64, direction: Direction) -> u8 {
    let (a, b) = (eta.occupancy(x), eta.occupancy(x + 1));
    match direction {
        Direction::Forward => a & (1 - b),
        Direction::Backward => b & (1 - a),
    }
}

/// Forward minus backward exclusion factor, in `{−1, 0, 1}`.
#[inline]
pub fn exclusion_difference(eta: &Configuration, x: i64) -> i64 {
    eta.occupancy(x) as i64 - eta.occupancy(x + 1) as i64
}

fn require_sites(model: &ModelSpec, eta: &Configuration) -> Result<()> {
    model.validate()?;
    check_torus(eta.n_sites(), model.min_sites())
}

/// Weight of a single window `j`: `b^j = 1{m_j = n}` for the Bernstein model,
/// `p^j = C(m_j, ℓ)/C(L, ℓ)` for the reduced model and the product of the
/// window occupations for the PMM.
pub fn window_indicator(model: &ModelSpec, eta: &Configuration, x: i64, j: usize) -> Result<Rational> {
    require_sites(model, eta)?;
    if j > model.window_len() {
        return Err(Error::InvalidParameter(format!(
            "window index {j} exceeds {}",
            model.window_len()
        )));
    }
    Ok(window_weight(model, eta, x, j))
}

/// `window_indicator` without validation.
fn window_weight(model: &ModelSpec, eta: &Configuration, x: i64, j: usize) -> Rational {
    let count = |l: usize| -> i64 { window_offsets(j, l).map(|w| eta.occupancy(x + w) as i64).sum() };
    match *model {
        ModelSpec::Ssep => int(1),
        ModelSpec::Pmm { n } => int((count(n) == n as i64) as i64),
        ModelSpec::Bernstein { n, l } => int((count(l) == n as i64) as i64),
        ModelSpec::ReducedPmm { ell, l } => rat(binomial(count(l), ell as i64), binomial(l as i64, ell as i64)),
    }
}

/// The constraint `c(τ^x η)`, a value in `[0, 1]`.
pub fn rate(model: &ModelSpec, eta: &Configuration, x: i64) -> Result<Rational> {
    require_sites(model, eta)?;
    Ok(rate_unchecked(model, eta, x))
}

pub(crate) fn rate_unchecked(model: &ModelSpec, eta: &Configuration, x: i64) -> Rational {
    match *model {
        ModelSpec::Ssep => int(1),
        _ => {
            let len = model.window_len();
            let total: Rational = (0..=len).map(|j| window_weight(model, eta, x, j)).sum();
            total / int(len as i64 + 1)
        }
    }
}

/// `b^j` evaluated through its signed monomial expansion,
/// `Σ_ℓ (−1)^ℓ C(n+ℓ, ℓ) Σ_{|P| = n+ℓ, P ⊆ W_j} η(P)`.
///
/// Independent of the window-count route; used to cross-check it.
pub fn monomial_bj(n: usize, l: usize, j: usize, eta: &Configuration, x: i64) -> Result<Rational> {
    ModelSpec::Bernstein { n, l }.validate()?;
    check_torus(eta.n_sites(), l + 2)?;
    if j > l {
        return Err(Error::InvalidParameter(format!("j = {j} > L = {l}")));
    }
    let sites: Vec<u8> = window_offsets(j, l).map(|w| eta.occupancy(x + w)).collect();
    let mut total = 0_i64;
    for extra in 0..=(l - n) {
        let size = n + extra;
        let mut occupied_subsets = 0_i64;
        for mask in 0_u32..(1 << l) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let all_occupied = (0..l).all(|s| mask & (1 << s) == 0 || sites[s] == 1);
            occupied_subsets += all_occupied as i64;
        }
        let sign = if extra % 2 == 0 { 1 } else { -1 };
        total += sign * binomial(size as i64, extra as i64) * occupied_subsets;
    }
    Ok(int(total))
}

/// Algebraic current across node `x`: rate times (forward − backward exclusion).
pub fn current(model: &ModelSpec, eta: &Configuration, x: i64) -> Result<Rational> {
    Ok(rate(model, eta, x)? * int(exclusion_difference(eta, x)))
}

/// The two parts of the gradient potential, `H = h + g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientPair {
    pub h: Rational,
    pub g: Rational,
    pub total: Rational,
}

impl GradientPair {
    fn new(h: Rational, g: Rational) -> Self {
        Self { h, g, total: h + g }
    }
}

/// Which closed form to use for `h` and `g`.
///
/// Only [`GradientForm::Standard`] satisfies the gradient identity for every
/// model; the other forms are kept as negative controls and for comparison
/// with alternative readings of the formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientForm {
    #[default]
    Standard,
    /// Box threshold lowered by one (`n` instead of `n + 1`).
    ShiftedThreshold,
    /// Reduced model `h` written as an indicator `1{box ≥ ℓ+1}` instead of the
    /// binomial count `C(box, ℓ+1)`. Agrees with the standard form only at `ℓ = L`.
    IndicatorReducedH,
    /// `g` summed over the anchors `x − i` instead of `x + j − i`.
    BackwardAnchors,
}

fn gradient_model(model: &ModelSpec, op: &'static str) -> Result<(usize, usize, bool)> {
    match *model {
        ModelSpec::Bernstein { n, l } => Ok((n, l, false)),
        ModelSpec::ReducedPmm { ell, l } => Ok((ell, l, true)),
        _ => Err(Error::UnsupportedFamily {
            op,
            model: model.to_string(),
        }),
    }
}

fn require_gradient(model: &ModelSpec, eta: &Configuration, op: &'static str) -> Result<(usize, usize, bool)> {
    model.validate()?;
    let params = gradient_model(model, op)?;
    check_torus(eta.n_sites(), 2 * params.1 + 2)?;
    Ok(params)
}

fn h_value(order: usize, l: usize, reduced: bool, eta: &Configuration, x: i64, form: GradientForm) -> Rational {
    let k = (0..=l as i64).map(|z| eta.occupancy(x + z) as i64).sum::<i64>();
    let threshold = if form == GradientForm::ShiftedThreshold {
        order as i64
    } else {
        order as i64 + 1
    };
    let norm = int(l as i64 + 1);
    if !reduced {
        return int((k >= threshold) as i64) / norm;
    }
    let scale = norm * int(binomial(l as i64, order as i64));
    match form {
        GradientForm::IndicatorReducedH => int((k >= threshold) as i64) / scale,
        _ => int(binomial(k, threshold)) / scale,
    }
}

fn g_value(model: &ModelSpec, l: usize, eta: &Configuration, x: i64, form: GradientForm) -> Rational {
    let mut total = int(0);
    for j in 1..=l {
        for i in 1..=j {
            let anchor = match form {
                GradientForm::BackwardAnchors => x - i as i64,
                _ => x + (j - i) as i64,
            };
            let diff = exclusion_difference(eta, anchor);
            if diff != 0 {
                total += window_weight(model, eta, anchor, j) * int(diff);
            }
        }
    }
    total / int(l as i64 + 1)
}

/// `h(τ^x η)`: `1{box ≥ n+1}/(L+1)` for `B(n, L)` and
/// `C(box, ℓ+1) / ((L+1) C(L, ℓ))` for `PMM_L(ℓ)`, with `box` the number of
/// particles in `⟦x, x+L⟧`.
pub fn grad_h(model: &ModelSpec, eta: &Configuration, x: i64) -> Result<Rational> {
    let (order, l, reduced) = require_gradient(model, eta, "grad_h")?;
    Ok(h_value(order, l, reduced, eta, x, GradientForm::Standard))
}

/// `g(τ^x η) = (1/(L+1)) Σ_{j=1}^{L} Σ_{i=1}^{j} w_j(y) (e_fwd − e_bwd)(y)` with
/// `y = x + j − i`, where `w_j` is the window weight of the model.
pub fn grad_g(model: &ModelSpec, eta: &Configuration, x: i64) -> Result<Rational> {
    let (_, l, _) = require_gradient(model, eta, "grad_g")?;
    Ok(g_value(model, l, eta, x, GradientForm::Standard))
}

/// `H = h + g`, satisfying `current(x) = −(H(x+1) − H(x))`.
#[allow(non_snake_case)]
pub fn grad_H(model: &ModelSpec, eta: &Configuration, x: i64) -> Result<GradientPair> {
    gradient_pair_with(model, eta, x, GradientForm::Standard)
}

pub fn gradient_pair_with(model: &ModelSpec, eta: &Configuration, x: i64, form: GradientForm) -> Result<GradientPair> {
    let (order, l, reduced) = require_gradient(model, eta, "grad_H")?;
    Ok(GradientPair::new(
        h_value(order, l, reduced, eta, x, form),
        g_value(model, l, eta, x, form),
    ))
}

/// `Σ_{j=0}^{k} C(k, j) (−1)^j c^{n+j}(τ^x η)`, an alternating sum of PMM rates.
pub fn alt_sum_tilde_c(n: usize, k: usize, eta: &Configuration, x: i64) -> Result<Rational> {
    if n == 0 {
        return Err(Error::InvalidParameter("alternating sum needs n >= 1".into()));
    }
    check_torus(eta.n_sites(), 2 * (n + k) + 2)?;
    let mut total = int(0);
    for j in 0..=k {
        let sign = if j % 2 == 0 { 1 } else { -1 };
        let c = rate_unchecked(&ModelSpec::Pmm { n: n + j }, eta, x);
        total += int(sign * binomial(k as i64, j as i64)) * c;
    }
    Ok(total)
}

/// Equilibrium average of the constraint under the Bernoulli product measure:
/// `1`, `ρ^n`, `C(L,n) ρ^n (1−ρ)^{L−n}` or `ρ^ℓ`.
pub fn canonical_diffusivity(model: &ModelSpec, rho: f64) -> Result<f64> {
    model.validate()?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::DensityOutOfRange(rho));
    }
    Ok(match *model {
        ModelSpec::Ssep => 1.0,
        ModelSpec::Pmm { n } => rho.powi(n as i32),
        ModelSpec::Bernstein { n, l } => {
            binomial(l as i64, n as i64) as f64 * rho.powi(n as i32) * (1.0 - rho).powi((l - n) as i32)
        }
        ModelSpec::ReducedPmm { ell, .. } => rho.powi(ell as i32),
    })
}

/// Exact counterpart of [`canonical_diffusivity`] at a rational density.
pub fn diffusivity_exact(model: &ModelSpec, rho: Rational) -> Result<Rational> {
    model.validate()?;
    if rho < int(0) || rho > int(1) {
        return Err(Error::DensityOutOfRange(crate::exact::to_f64(rho)));
    }
    Ok(match *model {
        ModelSpec::Ssep => int(1),
        ModelSpec::Pmm { n } => rpow(rho, n),
        ModelSpec::Bernstein { n, l } => int(binomial(l as i64, n as i64)) * rpow(rho, n) * rpow(int(1) - rho, l - n),
        ModelSpec::ReducedPmm { ell, .. } => rpow(rho, ell),
    })
}

/// Exact rates indexed by the local pattern `η(x − r), …, η(x + 1 + r)`,
/// `r` the interaction radius, packed little-endian.
#[derive(Debug, Clone)]
pub struct LocalRates {
    model: ModelSpec,
    radius: usize,
    values: Vec<Rational>,
}

impl LocalRates {
    /// Largest pattern width that is tabulated.
    pub const MAX_SPAN: usize = 22;

    pub fn new(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let radius = model.interaction_radius();
        let span = 2 * radius + 2;
        if span > Self::MAX_SPAN {
            return Err(Error::TooLarge {
                what: "local rate table",
                n_sites: span,
                limit: Self::MAX_SPAN,
            });
        }
        let values = (0..1_u64 << span)
            .map(|pattern| {
                let sites: Vec<u8> = (0..span).map(|s| ((pattern >> s) & 1) as u8).collect();
                let eta = Configuration::from_sites(&sites).expect("span >= 2");
                rate_unchecked(model, &eta, radius as i64)
            })
            .collect();
        Ok(Self {
            model: *model,
            radius,
            values,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn span(&self) -> usize {
        2 * self.radius + 2
    }

    /// All tabulated values, indexed by pattern.
    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// The pattern read by the rate at node `x`.
    #[inline]
    pub fn pattern(&self, eta: &Configuration, x: i64) -> usize {
        let start = x - self.radius as i64;
        let span = self.span();
        if span <= eta.n_sites() {
            eta.segment(start, span) as usize
        } else {
            (0..span).fold(0, |acc, s| acc | ((eta.occupancy(start + s as i64) as usize) << s))
        }
    }

    #[inline]
    pub fn rate(&self, eta: &Configuration, x: i64) -> Rational {
        self.values[self.pattern(eta, x)]
    }
}

/// A configuration on `n_sites` whose rate at node 0 equals one.
///
/// For `B(n, L)` the sites `2..=L+1` hold `n` particles and each further window
/// `W_j` repeats the site it drops (`η(−j) = η(L+2−j)`), so every window holds
/// exactly `n` particles. For the other models the full configuration works.
pub fn saturating_configuration(model: &ModelSpec, n_sites: usize) -> Result<Configuration> {
    model.validate()?;
    check_torus(n_sites, 2 * model.window_len() + 2)?;
    match *model {
        ModelSpec::Bernstein { n, l } => {
            let mut eta = Configuration::empty(n_sites);
            for s in 0..n {
                eta.set(2 + s as i64, 1);
            }
            for j in 1..=l as i64 {
                let v = eta.occupancy(l as i64 + 2 - j);
                eta.set(-j, v);
            }
            Ok(eta)
        }
        _ => Ok(Configuration::full(n_sites)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::enumerate_configurations;

    fn conf(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    // listed from x−4 to x+5, padded with holes; x = 4
    fn dense_cluster() -> Configuration {
        conf("00111011100000")
    }

    fn short_cluster() -> Configuration {
        conf("00111000000000")
    }

    const B24: ModelSpec = ModelSpec::Bernstein { n: 2, l: 4 };
    const R24: ModelSpec = ModelSpec::ReducedPmm { ell: 2, l: 4 };

    #[test]
    fn exclusion_factors() {
        let eta = conf("10");
        assert_eq!(exclusion(&eta, 0, Direction::Forward), 1);
        assert_eq!(exclusion(&eta, 0, Direction::Backward), 0);
        let eta = conf("110");
        assert_eq!(exclusion(&eta, 0, Direction::Forward), 0);
        assert_eq!(exclusion(&eta, 0, Direction::Backward), 0);
        for eta in enumerate_configurations(6).unwrap() {
            for x in 0..6 {
                let sum = exclusion(&eta, x, Direction::Forward) + exclusion(&eta, x, Direction::Backward);
                assert_eq!(sum, (eta.occupancy(x) != eta.occupancy(x + 1)) as u8);
            }
        }
    }

    #[test]
    fn worked_rates() {
        assert_eq!(rate(&ModelSpec::Pmm { n: 4 }, &dense_cluster(), 4).unwrap(), rat(2, 5));
        assert_eq!(rate(&B24, &dense_cluster(), 4).unwrap(), rat(1, 5));
        assert_eq!(rate(&R24, &short_cluster(), 4).unwrap(), rat(1, 10));
        assert_eq!(rat(3, 5 * 6), rat(1, 10));
    }

    #[test]
    fn window_indicator_examples() {
        assert_eq!(window_indicator(&B24, &dense_cluster(), 4, 4).unwrap(), int(1));
        // m = 2 in {−2, −1, 2, 3}: C(2,2)/C(4,2)
        assert_eq!(window_indicator(&R24, &short_cluster(), 4, 2).unwrap(), rat(1, 6));
        let full = Configuration::full(12);
        for j in 0..=4 {
            assert_eq!(window_indicator(&B24, &full, 0, j).unwrap(), int(0));
            assert_eq!(
                window_indicator(&ModelSpec::Bernstein { n: 4, l: 4 }, &full, 0, j).unwrap(),
                int(1)
            );
            assert_eq!(window_indicator(&R24, &full, 0, j).unwrap(), int(1));
        }
        assert!(window_indicator(&B24, &full, 0, 5).is_err());
    }

    #[test]
    fn trivial_rates() {
        let empty = Configuration::empty(10);
        for l in 1..=4 {
            for n in 0..=l {
                let expected = int((n == 0) as i64);
                assert_eq!(rate(&ModelSpec::Bernstein { n, l }, &empty, 3).unwrap(), expected);
            }
        }
        for eta in enumerate_configurations(8).unwrap() {
            assert_eq!(rate(&ModelSpec::ReducedPmm { ell: 0, l: 3 }, &eta, 2).unwrap(), int(1));
            assert_eq!(rate(&ModelSpec::Ssep, &eta, 2).unwrap(), int(1));
        }
    }

    #[test]
    fn rate_errors() {
        let small = Configuration::full(5);
        assert!(matches!(rate(&B24, &small, 0), Err(Error::TorusTooSmall { .. })));
        let bad = ModelSpec::Bernstein { n: 5, l: 4 };
        assert!(matches!(
            rate(&bad, &Configuration::full(12), 0),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn monomial_examples() {
        let empty = Configuration::empty(10);
        assert_eq!(monomial_bj(0, 3, 1, &empty, 0).unwrap(), int(1));
        assert_eq!(monomial_bj(2, 4, 4, &dense_cluster(), 4).unwrap(), int(1));
        for eta in enumerate_configurations(10).unwrap() {
            for l in 1..=3 {
                for n in 0..=l {
                    let model = ModelSpec::Bernstein { n, l };
                    for j in 0..=l {
                        for x in 0..10 {
                            assert_eq!(
                                monomial_bj(n, l, j, &eta, x).unwrap(),
                                window_indicator(&model, &eta, x, j).unwrap()
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn current_examples() {
        assert_eq!(current(&B24, &dense_cluster(), 4).unwrap(), rat(1, 5));
        assert_eq!(current(&B24, &Configuration::full(12), 3).unwrap(), int(0));
        let model = ModelSpec::Bernstein { n: 1, l: 3 };
        for eta in enumerate_configurations(10).unwrap() {
            for x in 0..10 {
                assert_eq!(
                    current(&model, &eta, x).unwrap(),
                    -current(&model, &eta.swap(x), x).unwrap()
                );
            }
        }
    }

    #[test]
    fn gradient_trivial_values() {
        let (full, empty) = (Configuration::full(12), Configuration::empty(12));
        for l in 1..=4 {
            for n in 0..=l {
                let b = ModelSpec::Bernstein { n, l };
                assert_eq!(grad_h(&b, &full, 0).unwrap(), rat(1, l as i64 + 1));
                assert_eq!(grad_g(&b, &full, 0).unwrap(), int(0));
                assert_eq!(grad_H(&b, &full, 0).unwrap().total, rat(1, l as i64 + 1));
                assert_eq!(grad_H(&b, &empty, 0).unwrap().total, int(0));
                let r = ModelSpec::ReducedPmm { ell: n, l };
                assert_eq!(grad_H(&r, &empty, 0).unwrap().total, int(0));
            }
        }
        let b12 = ModelSpec::Bernstein { n: 1, l: 2 };
        assert_eq!(grad_h(&b12, &conf("110000"), 0).unwrap(), rat(1, 3));
        // node pairs x−i, x−i+1 constant for 1 ≤ i ≤ L: g vanishes
        assert_eq!(grad_g(&b12, &conf("0001110000"), 3).unwrap(), int(0));
        assert!(grad_h(&ModelSpec::Ssep, &full, 0).is_err());
        assert!(grad_h(&b12, &Configuration::full(5), 0).is_err());
    }

    #[test]
    fn gradient_identity_small() {
        for model in [
            ModelSpec::Bernstein { n: 1, l: 2 },
            ModelSpec::ReducedPmm { ell: 0, l: 2 },
            ModelSpec::ReducedPmm { ell: 1, l: 2 },
        ] {
            for eta in enumerate_configurations(8).unwrap() {
                for x in 0..8 {
                    let lhs = current(&model, &eta, x).unwrap();
                    let rhs = grad_H(&model, &eta, x).unwrap().total - grad_H(&model, &eta, x + 1).unwrap().total;
                    assert_eq!(lhs, rhs, "{model} {eta} x={x}");
                }
            }
        }
    }

    #[test]
    fn alternating_sums() {
        let mut eta = Configuration::full(8);
        eta.set(-3, 0);
        assert_eq!(alt_sum_tilde_c(1, 2, &eta, 0).unwrap(), rat(-1, 4));
        let full = Configuration::full(8);
        assert_eq!(alt_sum_tilde_c(1, 1, &full, 0).unwrap(), int(0));
        assert_eq!(alt_sum_tilde_c(1, 2, &full, 0).unwrap(), int(0));
        assert!(alt_sum_tilde_c(1, 2, &Configuration::full(7), 0).is_err());
    }

    #[test]
    fn diffusivities() {
        assert!((canonical_diffusivity(&B24, 0.5).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(canonical_diffusivity(&R24, 1.0).unwrap(), 1.0);
        assert_eq!(canonical_diffusivity(&B24, 0.0).unwrap(), 0.0);
        assert_eq!(canonical_diffusivity(&ModelSpec::Ssep, 0.3).unwrap(), 1.0);
        assert!(canonical_diffusivity(&B24, 1.5).is_err());
        assert_eq!(diffusivity_exact(&B24, rat(1, 2)).unwrap(), rat(3, 8));
    }

    #[test]
    fn local_rates_match_direct_evaluation() {
        for model in [
            ModelSpec::Ssep,
            ModelSpec::Pmm { n: 2 },
            ModelSpec::Bernstein { n: 1, l: 2 },
            ModelSpec::ReducedPmm { ell: 1, l: 3 },
        ] {
            let table = LocalRates::new(&model).unwrap();
            for n_sites in [model.min_sites().max(2), 9] {
                for eta in enumerate_configurations(n_sites).unwrap() {
                    for x in 0..n_sites as i64 {
                        assert_eq!(table.rate(&eta, x), rate(&model, &eta, x).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn saturating_configurations_reach_one() {
        for l in 1..=4 {
            for n in 0..=l {
                for model in [ModelSpec::Bernstein { n, l }, ModelSpec::ReducedPmm { ell: n, l }] {
                    let eta = saturating_configuration(&model, 2 * l + 4).unwrap();
                    assert_eq!(rate(&model, &eta, 0).unwrap(), int(1), "{model}");
                }
            }
        }
    }
}

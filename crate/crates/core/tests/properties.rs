use bernstein_exclusion::constraints::{
    current, exclusion_difference, grad_H, monomial_bj, rate, window_indicator, LocalRates,
};
use bernstein_exclusion::exact::{int, to_f64};
use bernstein_exclusion::graph::{build_transition_graph, communicating_classes};
use bernstein_exclusion::lattice::window_offsets;
use bernstein_exclusion::simulate::{gillespie_step, sample_product_measure, RateTable};
use bernstein_exclusion::{Configuration, ModelSpec, Rational};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn configuration(min: usize, max: usize) -> impl Strategy<Value = Configuration> {
    (min..=max)
        .prop_flat_map(|n| prop::collection::vec(0_u8..=1, n))
        .prop_map(|sites| Configuration::from_sites(&sites).unwrap())
}

fn gradient_model(max_l: usize) -> impl Strategy<Value = ModelSpec> {
    (1..=max_l, any::<bool>()).prop_flat_map(|(l, bernstein)| {
        (0..=l).prop_map(move |n| {
            if bernstein {
                ModelSpec::Bernstein { n, l }
            } else {
                ModelSpec::ReducedPmm { ell: n, l }
            }
        })
    })
}

fn any_model(max_l: usize) -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        Just(ModelSpec::Ssep),
        (1..=max_l).prop_map(|n| ModelSpec::Pmm { n }),
        gradient_model(max_l),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn windows_stay_off_the_node(eta in configuration(6, 40), x in -50_i64..50, l in 1_usize..=4, j in 0_usize..=4) {
        prop_assume!(j <= l);
        let count = eta.window_count(x, j, l).unwrap();
        prop_assert!(count <= l);
        prop_assert!(window_offsets(j, l).all(|w| w != 0 && w != 1));
        prop_assert_eq!(window_offsets(j, l).count(), l);
    }

    #[test]
    fn shift_conjugation(eta in configuration(6, 40), k in -50_i64..50, x in -50_i64..50, l in 1_usize..=4, j in 0_usize..=4) {
        prop_assume!(j <= l);
        prop_assert_eq!(eta.shift(k).window_count(x, j, l).unwrap(), eta.window_count(x + k, j, l).unwrap());
    }

    #[test]
    fn swap_locality(eta in configuration(6, 40), x in 0_i64..40, y in 0_i64..40, l in 1_usize..=4, j in 0_usize..=4) {
        prop_assume!(j <= l);
        let n = eta.n_sites() as i64;
        let swapped = eta.swap(x);
        let touches = window_offsets(j, l).any(|w| {
            let s = (y + w).rem_euclid(n);
            s == x.rem_euclid(n) || s == (x + 1).rem_euclid(n)
        });
        if !touches {
            prop_assert_eq!(swapped.window_count(y, j, l).unwrap(), eta.window_count(y, j, l).unwrap());
        }
    }

    #[test]
    fn particle_hole_duality(eta in configuration(6, 40), x in 0_i64..40, l in 1_usize..=4, j in 0_usize..=4) {
        prop_assume!(j <= l);
        prop_assert_eq!(eta.particle_hole().window_count(x, j, l).unwrap(), l - eta.window_count(x, j, l).unwrap());
    }

    #[test]
    fn rates_are_probabilities_and_swap_invariant(model in any_model(5), eta in configuration(12, 48), x in 0_i64..48) {
        let r = rate(&model, &eta, x).unwrap();
        prop_assert!(r >= int(0) && r <= int(1));
        prop_assert_eq!(rate(&model, &eta.swap(x), x).unwrap(), r);
        prop_assert_eq!(LocalRates::new(&model).unwrap().rate(&eta, x), r);
    }

    #[test]
    fn gradient_identity_on_large_tori(model in gradient_model(6), eta in configuration(14, 64), x in 0_i64..64) {
        prop_assume!(eta.n_sites() >= 2 * model.window_len() + 2);
        let here = grad_H(&model, &eta, x).unwrap().total;
        let next = grad_H(&model, &eta, x + 1).unwrap().total;
        prop_assert_eq!(current(&model, &eta, x).unwrap(), here - next);
    }

    #[test]
    fn currents_telescope(model in any_model(4), eta in configuration(12, 40)) {
        let total: Rational = (0..eta.n_sites() as i64).map(|x| current(&model, &eta, x).unwrap()).sum();
        prop_assert_eq!(total, int(0));
    }

    #[test]
    fn bernstein_particle_hole(l in 1_usize..=5, n in 0_usize..=5, eta in configuration(12, 40), x in 0_i64..40) {
        prop_assume!(n <= l);
        let b = ModelSpec::Bernstein { n, l };
        let dual = ModelSpec::Bernstein { n: l - n, l };
        prop_assert_eq!(rate(&b, &eta, x).unwrap(), rate(&dual, &eta.particle_hole(), x).unwrap());
    }

    #[test]
    fn monomial_expansion(l in 1_usize..=5, n in 0_usize..=5, j in 0_usize..=5, eta in configuration(12, 30), x in 0_i64..30) {
        prop_assume!(n <= l && j <= l);
        let b = ModelSpec::Bernstein { n, l };
        prop_assert_eq!(monomial_bj(n, l, j, &eta, x).unwrap(), window_indicator(&b, &eta, x, j).unwrap());
    }

    #[test]
    fn rate_table_tracks_events(model in any_model(3), seed in any::<u64>(), steps in 1_usize..400) {
        let profile = "constant:0.5".parse().unwrap();
        let mut eta = sample_product_measure(&profile, 48, seed).unwrap();
        let particles = eta.particle_count();
        let mut table = RateTable::new(&model, &eta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..steps {
            if gillespie_step(&mut eta, &mut table, &mut rng).is_none() {
                break;
            }
        }
        prop_assert!(table.audit(&eta));
        prop_assert_eq!(eta.particle_count(), particles);
        for x in 0..48 {
            let effective = rate(&model, &eta, x as i64).unwrap() * int(exclusion_difference(&eta, x as i64).abs());
            prop_assert_eq!(table.rate(x), to_f64(effective));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graph_edges_conserve_and_reverse(model in any_model(3), n_sites in 8_usize..=11) {
        prop_assume!(n_sites >= model.min_sites());
        let graph = build_transition_graph(&model, n_sites).unwrap();
        prop_assert!(graph.audit_symmetry().is_ok());
        for state in 0..graph.state_count() {
            for (x, target, r) in graph.edges(state) {
                prop_assert_eq!(target.count_ones(), state.count_ones());
                prop_assert!(r > int(0));
                prop_assert!(graph.edges(target).any(|(y, back, s)| y == x && back == state && s == r));
            }
        }
        let classes = communicating_classes(&graph);
        for state in 0..graph.state_count() {
            prop_assert_eq!(classes.is_blocked(state), graph.exit_rate(state) == int(0));
        }
    }
}

#[test]
fn time_average_of_the_constraint_matches_the_diffusivity() {
    use bernstein_exclusion::constraints::canonical_diffusivity;
    for (model, rho) in [
        (ModelSpec::Bernstein { n: 1, l: 2 }, 0.5),
        (ModelSpec::ReducedPmm { ell: 2, l: 3 }, 0.6),
    ] {
        let n_sites = 256;
        let profile = format!("constant:{rho}").parse().unwrap();
        let mut eta = sample_product_measure(&profile, n_sites, 17).unwrap();
        let local = LocalRates::new(&model).unwrap();
        let mut table = RateTable::new(&model, &eta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let observe =
            |eta: &Configuration| (0..n_sites as i64).map(|x| to_f64(local.rate(eta, x))).sum::<f64>() / n_sites as f64;
        let (mut clock, mut next, mut sum, mut count) = (0.0, 0.0, 0.0, 0);
        let spacing = 2.0;
        while count < 2000 {
            let before = eta.clone();
            clock += gillespie_step(&mut eta, &mut table, &mut rng).unwrap().1;
            while next < clock {
                sum += observe(&before);
                count += 1;
                next += spacing;
            }
        }
        let mean = sum / count as f64;
        let density = eta.particle_count() as f64 / n_sites as f64;
        let expected = canonical_diffusivity(&model, density).unwrap();
        assert!((mean - expected).abs() < 0.01, "{model}: {mean} vs {expected}");
    }
}

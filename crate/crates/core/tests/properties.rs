use proptest::prelude::*;

use reflectwalk::asymptotics::{asymptotic_law, centered_constant, drifted_internals, CenteredAnalysis};
use reflectwalk::chain::{excursion_table, n_step_table, reflection_time_table};
use reflectwalk::fluctuation::stay_nonneg_table;
use reflectwalk::law::DRIFT_TOL;
use reflectwalk::montecarlo::{simulate, SimConfig};
use reflectwalk::reflection::{r_matrix, r_matrix_at_s};
use reflectwalk::wiener_hopf::{factorize_at, ladder_at, ladder_laws};
use reflectwalk::{LatticeLaw, Regime};

/// Laws on `{lo, …, hi}` with every mass positive, so they are adapted and
/// aperiodic by construction.
fn any_law() -> impl Strategy<Value = LatticeLaw> {
    (1i64..=3, 1i64..=3)
        .prop_flat_map(|(a, b)| (Just(-a), prop::collection::vec(0.05f64..1.0, (a + b + 1) as usize)))
        .prop_map(|(lo, w)| {
            let total: f64 = w.iter().sum();
            LatticeLaw::new(lo, w.iter().map(|v| v / total).collect()).unwrap()
        })
}

fn centered_law() -> impl Strategy<Value = LatticeLaw> {
    any_law().prop_map(|law| law.centered().unwrap().0)
}

fn positive_drift_law() -> impl Strategy<Value = LatticeLaw> {
    any_law().prop_filter("positive drift", |law| law.moments().drift > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn factorization_holds_on_the_circle(law in centered_law(), s in prop::sample::select(vec![0.5, 0.9, 0.99, 1.0])) {
        prop_assert!(factorize_at(&law, s).unwrap().residual < 1e-10);
    }

    #[test]
    fn stopped_law_is_defective_below_one(law in centered_law(), s in 0.05f64..0.98) {
        let l = ladder_at(&law, s, 10).unwrap();
        prop_assert!(l.mu_minus.iter().sum::<f64>() < 1.0);
    }

    #[test]
    fn renewal_limit_is_reached(law in centered_law()) {
        let depth = 50 * law.a();
        let l = ladder_laws(&law, depth).unwrap();
        let limit = l.renewal_limit();
        prop_assert!((l.u_minus[depth] - limit).abs() < 0.01 * limit);
    }

    #[test]
    fn dp_potentials_rise_to_closed_form(law in centered_law()) {
        let l = ladder_laws(&law, 20).unwrap();
        let t = stay_nonneg_table(&law, 400).unwrap();
        for y in 0..3i64 {
            let partial = t.potential_series(y).cumulative();
            prop_assert!(partial.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(*partial.last().unwrap() <= l.u_plus[y as usize] + 1e-12);
        }
    }

    #[test]
    fn rows_are_stochastic(law in any_law(), x in 0usize..6) {
        let t = n_step_table(&law, x, 200).unwrap();
        for n in 0..=200 {
            prop_assert!((t.row_sum(n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn excursion_and_reflection_mass_balance(law in any_law(), x in 0usize..6) {
        let exc = excursion_table(&law, x, 120).unwrap();
        let refl = reflection_time_table(&law, x, 120).unwrap();
        let mut reflected = 0.0;
        for n in 0..=120 {
            reflected += refl.row_sum(n);
            prop_assert!((exc.row_sum(n) + reflected - 1.0).abs() < 1e-12);
            prop_assert!(refl.get(n, 0) == 0.0);
            prop_assert!(refl.row(n).iter().skip(law.a() + 1).all(|&p| p == 0.0));
        }
    }

    #[test]
    fn reflection_matrices_have_a_columns(law in centered_law(), s in 0.1f64..1.0) {
        let a = law.a();
        let l = ladder_laws(&law, 50).unwrap();
        prop_assert!(r_matrix(&l, 8).iter().all(|row| row.len() == a));
        prop_assert!(r_matrix_at_s(&law, s, 8).unwrap().iter().all(|row| row.len() == a));
        let rows = r_matrix(&l, 8);
        for row in &rows {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn centered_constants_are_positive(law in centered_law(), y in 0usize..4) {
        let c = centered_constant(&law, y).unwrap();
        prop_assert!(c.constant > 0.0);
        let analysis = CenteredAnalysis::new(&law, law.a(), y).unwrap();
        prop_assert!(analysis.core.nu_r_tilde_h() < 0.0);
    }

    #[test]
    fn drifted_constants_are_positive(law in positive_drift_law(), x in 0usize..3, y in 0usize..3) {
        let c = asymptotic_law(&law, x, y).unwrap();
        prop_assert_eq!(c.regime, Regime::PositiveDrift);
        prop_assert!(c.constant > 0.0);
        prop_assert!(c.rho < 1.0);
    }

    #[test]
    fn conjugation_matches_tilted_pipeline(law in positive_drift_law(), y in 0usize..3) {
        let (d, _) = drifted_internals(&law, y, 4).unwrap();
        let (tilted, tilt) = law.centered().unwrap();
        let analysis = CenteredAnalysis::new(&tilted, 4.max(law.a()), y).unwrap();
        let col = analysis.column(y).unwrap();
        for x in 0..=4usize {
            let want = tilt.r0.powi(x as i32 - y as i32) * col.e[x];
            prop_assert!((d.e[x] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn simulation_ignores_thread_count(law in any_law(), seed in any::<u64>()) {
        let config = SimConfig { law, start: 1, horizon: 30, paths: 300, seed };
        let wide = simulate(&config).unwrap();
        let narrow = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| simulate(&config).unwrap());
        prop_assert_eq!(wide, narrow);
    }

    #[test]
    fn regime_matches_drift_sign(law in any_law()) {
        let report = law.check_hypotheses(DRIFT_TOL);
        let tilt = law.minimize_mgf().unwrap();
        prop_assert!(tilt.rho0 <= 1.0 + 1e-15);
        prop_assert_eq!(tilt.rho0 < 1.0, report.regime != Regime::Centered);
    }
}

use epispline::estimator::{fit_mle, fit_mle_with, initial_theta, FitOptions};
use epispline::knots::{knot_curve, moving_average_rates, place_knots};
use epispline::likelihood::neg_loglik;
use epispline::sir::{sample_path_at, simulate_exact, ConstantRate, RatePair};
use epispline::{CountState, EpidemicPath, Error, Family, KnotVector, LikelihoodConfig, ParameterVector, SplineModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sim1(seed: u64) -> EpidemicPath {
    let grid: Vec<f64> = (0..=70).map(f64::from).collect();
    let rates = RatePair::new(ConstantRate(0.3), 0.1).unwrap();
    let init = CountState::new(9900, 100, 10_000).unwrap();
    let exact = simulate_exact(&rates, init, 70.0, seed).unwrap();
    sample_path_at(&exact, &grid).unwrap().trim_after_extinction()
}

fn constant_basis(path: &EpidemicPath) -> KnotVector {
    KnotVector::new((path.start(), path.end()), vec![], 0).unwrap()
}

#[test]
fn constant_rates_are_recovered_on_average() {
    let config = LikelihoodConfig::one_step(Family::TauLeap);
    let (mut beta, mut gamma) = (0.0, 0.0);
    for seed in 0..50u64 {
        let path = sim1(seed);
        let basis = constant_basis(&path);
        let series = moving_average_rates(&path, 2).unwrap();
        let init = initial_theta(&series, &basis, &path).unwrap();
        let fit = fit_mle(&path, &basis, &config, &init).unwrap();
        assert!(fit.converged);
        beta += fit.theta_hat.spline().coefficients()[0] / 50.0;
        gamma += fit.theta_hat.gamma() / 50.0;
    }
    assert!((beta - 0.3).abs() < 0.05, "mean beta {beta}");
    assert!((gamma - 0.1).abs() < 0.02, "mean gamma {gamma}");
}

#[test]
fn initial_coefficients_are_near_the_truth() {
    let path = sim1(11);
    let series = moving_average_rates(&path, 2).unwrap();
    for interior in [vec![], vec![20.0, 40.0]] {
        let basis = KnotVector::new((0.0, 70.0), interior, 0).unwrap();
        let init = initial_theta(&series, &basis, &path).unwrap();
        for c in init.spline().coefficients() {
            assert!((c - 0.3).abs() < 0.1, "{c}");
        }
    }
}

#[test]
fn fit_descends_is_a_fixed_point_and_a_local_optimum() {
    let path = sim1(4);
    let series = moving_average_rates(&path, 2).unwrap();
    let curve = knot_curve(&series, 0).unwrap();
    let knots = place_knots(&curve, 2).unwrap().knots;
    let basis = KnotVector::new((0.0, 70.0), knots, 0).unwrap();
    for family in [Family::TauLeap, Family::Diffusion] {
        let config = LikelihoodConfig::one_step(family);
        let init = initial_theta(&series, &basis, &path).unwrap();
        let fit = fit_mle(&path, &basis, &config, &init).unwrap();
        let at_init = neg_loglik(&path, &init, &config).unwrap();
        let at_fit = neg_loglik(&path, &fit.theta_hat, &config).unwrap();
        assert!(at_fit <= at_init);
        assert!((at_fit + fit.loglik).abs() < 1e-9);
        assert!(fit.theta_hat.gamma() > 0.0);
        assert!(fit.theta_hat.spline().coefficients().iter().all(|c| *c > 0.0));

        let again = fit_mle(&path, &basis, &config, &fit.theta_hat).unwrap();
        assert!((again.loglik - fit.loglik).abs() < 1e-6, "{} vs {}", again.loglik, fit.loglik);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let gamma = fit.theta_hat.gamma() * (rng.random_range(-0.05..0.05f64)).exp();
            let coefs = fit
                .theta_hat
                .spline()
                .coefficients()
                .iter()
                .map(|c| c * (rng.random_range(-0.05..0.05f64)).exp())
                .collect();
            let moved = ParameterVector::new(gamma, SplineModel::new(basis.clone(), coefs).unwrap()).unwrap();
            assert!(neg_loglik(&path, &moved, &config).unwrap() >= at_fit);
        }
    }
}

#[test]
fn different_starts_agree() {
    let config = LikelihoodConfig::one_step(Family::TauLeap);
    let grid: Vec<f64> = (0..=70).map(f64::from).collect();
    let mut agree = 0;
    let reps = 20;
    for seed in 0..reps {
        let path = sim1(100 + seed);
        let series = moving_average_rates(&path, 2).unwrap();
        let knots = place_knots(&knot_curve(&series, 0).unwrap(), 2).unwrap().knots;
        let basis = KnotVector::new((path.start(), path.end()), knots, 0).unwrap();
        let a = fit_mle(&path, &basis, &config, &initial_theta(&series, &basis, &path).unwrap()).unwrap();
        let other = ParameterVector::new(0.2, SplineModel::constant(basis.clone(), 0.5)).unwrap();
        let b = fit_mle(&path, &basis, &config, &other).unwrap();
        let sup = grid
            .iter()
            .filter(|t| **t <= path.end())
            .map(|&t| (a.theta_hat.beta(t).unwrap() - b.theta_hat.beta(t).unwrap()).abs())
            .fold(0.0, f64::max);
        if sup < 2e-2 {
            agree += 1;
        }
    }
    assert!(agree * 10 >= reps * 9, "{agree} of {reps} starts agree");
}

#[test]
fn impossible_data_is_an_initialization_error() {
    // Infections recorded while nobody is infected.
    let st = |s, i| CountState::new(s, i, 100).unwrap();
    let path = EpidemicPath::new(vec![0.0, 1.0, 2.0], vec![st(90, 5), st(90, 0), st(88, 2)]).unwrap();
    let basis = constant_basis(&path);
    let init = ParameterVector::new(0.1, SplineModel::constant(basis.clone(), 0.3)).unwrap();
    let config = LikelihoodConfig::one_step(Family::TauLeap);
    assert_eq!(fit_mle(&path, &basis, &config, &init).unwrap_err(), Error::Initialization);
}

#[test]
fn exhausted_budget_is_reported_not_raised() {
    let path = sim1(2);
    let basis = constant_basis(&path);
    let init = ParameterVector::new(0.5, SplineModel::constant(basis.clone(), 1.0)).unwrap();
    let options = FitOptions {
        evals_per_param: 2,
        restarts: 0,
        ..FitOptions::default()
    };
    let fit = fit_mle_with(&path, &basis, &LikelihoodConfig::one_step(Family::TauLeap), &init, &options).unwrap();
    assert!(!fit.converged);
    assert!(fit.evaluations <= 6);
}


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ruelle_lab::dynamics::BranchMap;
use ruelle_lab::markov::{
    ks_stationarity, markov_property_test, parry_jacobian, riesz_family, sample_path, sample_paths, FiberedOperator,
    Start,
};
use ruelle_lab::measures::Measure;
use ruelle_lab::transferop::TransferOperator;

#[test]
fn one_step_frequencies_from_a_point() {
    let fam = riesz_family(&TransferOperator::<f64>::doubling_half());
    let paths = sample_paths(&fam, &Start::Point(0.6), 100_000, 1, 11, 4).unwrap();
    let low = paths.iter().filter(|p| (p.chain[1] - 0.3).abs() < 1e-12).count();
    let high = paths.iter().filter(|p| (p.chain[1] - 0.8).abs() < 1e-12).count();
    assert_eq!(low + high, 100_000);
    assert!((low as f64 / 1e5 - 0.5).abs() < 0.006, "{low}");
}

#[test]
fn markov_property_for_doubling_operators() {
    for (r, start) in [
        (TransferOperator::<f64>::doubling_half(), Start::Histogram(vec![1.0 / 64.0; 64])),
        (TransferOperator::doubling_cos2(), Start::Histogram(vec![1.0 / 64.0; 64])),
    ] {
        let fam = riesz_family(&r);
        let paths = sample_paths(&fam, &start, 20_000, 10, 3, 4).unwrap();
        let rep = markov_property_test(&fam, &|y| y, &paths, 16);
        assert_eq!(rep.transitions, 200_000);
        assert!(rep.passes(4.5), "{}: {}", r.label(), rep.max_z);
    }
    // for W = 1/2 the target is (2x+1)/4 exactly
    let fam = riesz_family(&TransferOperator::<f64>::doubling_half());
    let x = 0.37;
    assert!((fam.integrate(&|y| y, x) - (2.0 * x + 1.0) / 4.0).abs() < 1e-15);
}

#[test]
fn paths_started_from_lebesgue_stay_lebesgue() {
    let fam = riesz_family(&TransferOperator::<f64>::doubling_half());
    let paths = sample_paths(&fam, &Start::Histogram(vec![1.0; 128]), 20_000, 15, 9, 2).unwrap();
    let ks = ks_stationarity(&paths, &Measure::lebesgue());
    assert!(ks.passes(), "{ks:?}");
    for p in paths.iter().take(50) {
        assert!(p.solenoid_residual(fam.map()).unwrap() < 1e-12);
    }
}

#[test]
fn paths_are_thread_independent() {
    let fam = riesz_family(&TransferOperator::<f64>::doubling_cos2());
    let a = sample_paths(&fam, &Start::Point(0.2), 64, 8, 5, 1).unwrap();
    let b = sample_paths(&fam, &Start::Point(0.2), 64, 8, 5, 8).unwrap();
    assert_eq!(a.iter().map(|p| p.chain.clone()).collect::<Vec<_>>(), b.iter().map(|p| p.chain.clone()).collect::<Vec<_>>());
    let single = sample_path(&fam, &Start::Point(0.2), 8, 5, 17).unwrap();
    assert_eq!(single.chain, a[17].chain);
}

#[test]
fn gauss_paths_count_tail_escapes() {
    let fam = riesz_family(&TransferOperator::<f64>::gauss_invariant(5000).unwrap());
    let paths = sample_paths(&fam, &Start::Point(0.5), 2000, 20, 1, 4).unwrap();
    let escapes: usize = paths.iter().map(|p| p.escapes).sum();
    assert!(escapes * 1000 <= 40_000);
    assert!(paths.iter().all(|p| p.chain.iter().all(|x| *x > 0.0 && *x < 1.0)));

    // a coarse truncation leaves too much kernel mass in the tail
    let coarse = riesz_family(&TransferOperator::<f64>::gauss_invariant(5).unwrap());
    assert!(sample_paths(&coarse, &Start::Point(0.5), 200, 20, 1, 1).is_err());
}

#[test]
fn riesz_mixture_is_nu_r() {
    let fam = riesz_family(&TransferOperator::<f64>::doubling_cos2());
    let nu = Measure::atomic(vec![(0.1, 0.25), (0.6, 0.75)]).unwrap();
    let lambda = fam.mix(&nu).unwrap();
    for f in [|y: f64| y, |y: f64| (3.0 * y).sin(), |y: f64| y * y] {
        let lhs = lambda.integrate(&f, 1e-13);
        let rhs = nu.integrate(&|x| fam.integrate(&f, x), 1e-13);
        assert!((lhs - rhs).abs() < 1e-14);
    }
    // the fixed point δ₀ is stationary, a generic ν is not
    assert!(fam.stationarity_residual(&Measure::dirac(0.0).unwrap()).unwrap() < 1e-15);
    assert!(fam.stationarity_residual(&nu).unwrap() > 0.01);
}

#[test]
fn kernel_level_pullout() {
    let r = TransferOperator::<f64>::doubling_cos2();
    let fam = riesz_family(&r);
    let f = |x: f64| (2.0 * std::f64::consts::PI * x).cos() + 0.3;
    let g = |x: f64| x.exp();
    for x in [0.05, 0.33, 0.5, 0.91] {
        let lhs = fam.integrate(&|y| f(2.0 * y % 1.0) * g(y), x);
        let rhs = f(x) * fam.integrate(&g, x);
        assert!((lhs - rhs).abs() < 1e-12);
    }
}

fn random_partition(rng: &mut ChaCha8Rng, n: usize, fibers: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < fibers { i } else { rng.gen_range(0..fibers) }).collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.gen_range(0..=i));
    }
    labels
}

#[test]
fn fibered_operator_on_random_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let n = 64;
    let fiber = random_partition(&mut rng, n, 8);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.1).collect();
    let total: f64 = raw.iter().sum();
    let mu: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let weight: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.2).collect();
    let op = FiberedOperator::new(fiber.clone(), mu.clone(), weight).unwrap().normalized();
    assert!(op.normalization_residual() < 1e-12);

    let h: Vec<f64> = fiber.iter().map(|&k| (k as f64 + 1.0).ln()).collect();
    assert!(op.is_fiber_constant(&h, 0.0));
    assert!(op.harmonic_residual(&h) <= 1e-12);
    let probe: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    assert!(!op.is_fiber_constant(&probe, 1e-9));
    assert!(op.harmonic_residual(&probe) > 1e-3);

    assert!(op.radon_nikodym_residual() < 1e-12);
    let f_fiber: Vec<f64> = (0..8).map(|k| (k as f64).sin()).collect();
    assert!(op.pullout_residual(&f_fiber, &probe) < 1e-12);

    let ce = FiberedOperator::conditional_expectation(fiber, mu).unwrap();
    let once = ce.apply(&probe);
    assert!(ce.apply(&once).iter().zip(&once).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn parry_jacobian_matches_pushforward() {
    let dbl = BranchMap::<f64>::doubling();
    let leb = Measure::from_density(&vec![1.0; 256]).unwrap();
    let pj = parry_jacobian(&dbl, &leb).unwrap();
    assert!(pj.jacobian.values().iter().all(|j| (j - 2.0).abs() < 1e-12));
    assert!(pj.theta.iter().all(|t| (t - 1.0).abs() < 1e-12));

    let n = 512;
    let ramp = Measure::from_density(&(0..n).map(|i| 2.0 * (i as f64 + 0.5) / n as f64).collect::<Vec<_>>()).unwrap();
    let pj = parry_jacobian(&dbl, &ramp).unwrap();
    assert!(pj.residual <= 5.0 / n as f64, "{}", pj.residual);
    assert!(pj.jacobian.values().iter().all(|j| *j > 0.0));

    let gauss = BranchMap::<f64>::gauss(1000).unwrap();
    let n = 1024;
    let mu0 = Measure::histogram(Measure::gauss_mu0().to_histogram(n).unwrap()).unwrap();
    let pj = parry_jacobian(&gauss, &mu0).unwrap();
    let worst = pj.theta.iter().fold(0.0f64, |m, t| m.max((t - 1.0).abs()));
    assert!(worst < 0.01, "{worst}");
    assert!(pj.residual < 1e-9, "{}", pj.residual);

    assert!(parry_jacobian(&dbl, &Measure::histogram(vec![0.5, 0.0, 0.5]).unwrap()).is_err());
}

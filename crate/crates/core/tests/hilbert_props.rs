use std::sync::Arc;

use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ruelle_lab::dynamics::BranchMap;
use ruelle_lab::hilbert::{
    composition_matrix, coupling_to_operator, deterministic_coupling, in_k1, max_difference, operator_to_coupling,
    product_coupling, push_marginal, uhs_R, uhs_S, uhs_equivalent, uhs_inner, Coupling, HilbertPair, KoopmanSystem,
};
use ruelle_lab::measures::{pushforward_ulam, Measure, PowerOptions};
use ruelle_lab::transferop::TransferOperator;

fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() }).collect();
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                let mut e = vec![0.0; n];
                e[0] = 1.0;
                e
            } else {
                row.into_iter().map(|v| v / s).collect()
            }
        })
        .collect()
}

#[test]
fn coupling_round_trips_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.gen_range(2..=8);
        let p = random_stochastic(&mut rng, n);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        let mu1: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let nu = operator_to_coupling(&p, &mu1, &1e-12).unwrap();
        assert!(max_difference(&coupling_to_operator(&nu).unwrap(), &p) <= 1e-12);
        let back = operator_to_coupling(&coupling_to_operator(&nu).unwrap(), &nu.mu1(), &1e-12).unwrap();
        assert!(back.max_difference(&nu) <= 1e-12);
        assert!(nu.has_marginals(&mu1, &push_marginal(&mu1, &p), &1e-12));
    }
}

#[test]
fn coupling_map_is_affine() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (p, q) = (random_stochastic(&mut rng, 5), random_stochastic(&mut rng, 5));
    let mu1 = vec![0.1, 0.2, 0.3, 0.15, 0.25];
    let mix: Vec<Vec<f64>> = p.iter().zip(&q).map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * x + 0.5 * y).collect()).collect();
    let lhs = operator_to_coupling(&mix, &mu1, &1e-12).unwrap();
    let (cp, cq) = (operator_to_coupling(&p, &mu1, &1e-12).unwrap(), operator_to_coupling(&q, &mu1, &1e-12).unwrap());
    let rhs: Vec<Vec<f64>> =
        cp.joint().iter().zip(cq.joint()).map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * x + 0.5 * y).collect()).collect();
    assert!(max_difference(lhs.joint(), &rhs) <= 1e-15);
}

#[test]
fn exact_rational_couplings() {
    let q = |a: i64, b: i64| Ratio::new(a, b);
    let mu1 = vec![q(1, 6), q(1, 3), q(1, 2)];
    let mu2 = vec![q(1, 4), q(1, 4), q(1, 2)];
    let nu = product_coupling(&mu1, &mu2).unwrap();
    let p = coupling_to_operator(&nu).unwrap();
    assert!(p.iter().all(|r| *r == mu2));
    let zero = q(0, 1);
    assert_eq!(operator_to_coupling(&p, &mu1, &zero).unwrap(), nu);
    let sigma = [1, 2, 0];
    let det = deterministic_coupling(&sigma, &mu1).unwrap();
    assert_eq!(coupling_to_operator(&det).unwrap(), composition_matrix::<Ratio<i64>>(&sigma));
    let diag = operator_to_coupling(&composition_matrix(&[0, 1, 2]), &mu1, &zero).unwrap();
    assert_eq!(diag, Coupling::new(vec![vec![q(1, 6), zero, zero], vec![zero, q(1, 3), zero], vec![zero, zero, q(1, 2)]]).unwrap());
}

fn atomic_pair(rng: &mut ChaCha8Rng, k: usize) -> HilbertPair<f64> {
    let atoms: Vec<(f64, f64)> = (0..k).map(|_| (rng.gen::<f64>(), rng.gen::<f64>() + 0.1)).collect();
    let mu = Measure::atomic(atoms).unwrap();
    let n = mu.atoms().unwrap().len();
    HilbertPair::new(mu, (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()).unwrap()
}

#[test]
fn s_hat_r_hat_algebra_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for r in [TransferOperator::<f64>::doubling_half(), TransferOperator::doubling_cos2()] {
        for _ in 0..200 {
            let a = atomic_pair(&mut rng, 3);
            let sa = uhs_S(&r, &a).unwrap();
            assert!((sa.norm_sq() - a.norm_sq()).abs() < 1e-12);
            assert!(uhs_equivalent(&uhs_R(&r, &sa, true).unwrap(), &a));
            // b shares preimage atoms with Ŝa half of the time
            let b = if rng.gen_bool(0.5) {
                let atoms: Vec<(f64, f64)> = sa.atoms().iter().map(|(x, m)| (*x, m * (0.5 + rng.gen::<f64>()))).collect();
                let n = atoms.len();
                HilbertPair::new(Measure::atomic(atoms).unwrap(), (0..n).map(|_| rng.gen::<f64>()).collect()).unwrap()
            } else {
                atomic_pair(&mut rng, 2)
            };
            let k1 = in_k1(&r, b.measure()).unwrap();
            let rb = uhs_R(&r, &b, k1).unwrap();
            assert!((uhs_inner(&sa, &b) - uhs_inner(&a, &rb)).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn inner_product_is_representative_independent(x in 0.0f64..1.0, y in 0.0f64..1.0, f in -2.0f64..2.0, g in -2.0f64..2.0, s in 0.1f64..5.0) {
        let a = HilbertPair::new(Measure::atomic(vec![(x, 0.5), (y, 0.5)]).unwrap(), if (x - y).abs() < 1e-11 { vec![f] } else { vec![f, g] });
        prop_assume!(a.is_ok());
        let a = a.unwrap();
        let b = a.rewrite(|t| s + t).unwrap();
        prop_assert!(uhs_equivalent(&a, &b));
        prop_assert!((uhs_inner(&a, &a) - uhs_inner(&b, &b)).abs() < 1e-12);
    }
}

#[test]
fn wold_doubling_and_gauss() {
    let k = KoopmanSystem::lebesgue(Arc::new(BranchMap::<f64>::doubling()), 256).unwrap();
    let w = k.wold(8);
    assert_eq!(w.h_inf_dim(), 1);
    assert!(w.h_inf[0].iter().all(|v| (v - 1.0).abs() < 1e-6 || (v + 1.0).abs() < 1e-6));
    assert_eq!(w.layer_dims().iter().sum::<usize>() + w.h_inf_dim(), 256);

}

#[test]
fn gauss_grid_koopman_is_an_adjoint_contraction() {
    // the grid is not a Markov partition for the Gauss map, so only the
    // adjoint relation and ‖S‖ ≤ 1 survive discretization
    let map = Arc::new(BranchMap::<f64>::gauss(2000).unwrap());
    let rho = pushforward_ulam(&map, 128).unwrap().invariant_density(PowerOptions::default()).unwrap();
    let k = KoopmanSystem::new(map, rho.density.cells().unwrap().to_vec()).unwrap();
    let f = k.sample(|x| (5.0 * x).cos());
    let g = k.sample(|x| x.sqrt());
    assert!((k.inner(&k.s(&f), &g) - k.inner(&f, &k.s_star(&g))).abs() < 1e-12);
    assert!(k.norm(&k.s(&f)) <= k.norm(&f) * (1.0 + 1e-12));
    assert!(KoopmanSystem::lebesgue(k.map().clone(), 128).is_err());
}

#[test]
fn exactness_scores_decrease_for_smooth_f() {
    let k = KoopmanSystem::lebesgue(Arc::new(BranchMap::<f64>::doubling()), 1024).unwrap();
    let f = k.sample(|x| (-(x - 0.3).powi(2) * 20.0).exp());
    let r = k.exactness_score(&f, 10);
    assert!(r.monotone);
    assert!(r.norms[9] < 1e-3 * r.initial);
}

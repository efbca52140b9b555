use std::sync::Arc;

use ruelle_lab::dynamics::{BranchMap, SymbolWord};
use ruelle_lab::ifs::{
    chaos_game, extract_pk, ifs_measure_cylinders, ifs_test, moment_invariance_test, IfsVerdict, Integrable,
    ProbabilityVector,
};
use ruelle_lab::interval::Interval;
use ruelle_lab::measures::Measure;

fn ln2() -> f64 {
    std::f64::consts::LN_2
}

#[test]
fn cylinder_table_pk_matches_input() {
    let map = Arc::new(BranchMap::<f64>::uniform_expanding("triple", 3).unwrap());
    let p = ProbabilityVector::new(vec![0.2, 0.5, 0.3], 0).unwrap();
    let mu = ifs_measure_cylinders(map.clone(), p.clone(), 7).unwrap();
    for k in 0..3 {
        let e = extract_pk(&map, &mu, k).unwrap();
        assert!((e.ratio - p.get(k)).abs() < 1e-9, "{k}: {e:?}");
        assert!((e.direct - p.get(k)).abs() < 1e-9);
    }
    assert!(mu.consistency_residual() < 1e-12);
}

#[test]
fn cylinder_table_is_invariant_at_resolution() {
    let map = Arc::new(BranchMap::<f64>::doubling());
    let mu = ifs_measure_cylinders(map, ProbabilityVector::new(vec![0.3, 0.7], 0).unwrap(), 12).unwrap();
    let (w1, bound) = mu.invariance_residual(1024).unwrap();
    assert!(w1 <= bound, "{w1} > {bound}");
}

#[test]
fn chaos_game_frequencies_in_clt_band() {
    let map = Arc::new(BranchMap::<f64>::doubling());
    let n = 1_000_000;
    let mu = chaos_game(map.clone(), ProbabilityVector::new(vec![0.5, 0.5], 0).unwrap(), n, 100, 42).unwrap();
    let half = mu.mass_over(&Interval::half_open(0.0, 0.5));
    assert!((half - 0.5).abs() < 0.002, "{half}");

    let p = ProbabilityVector::new(vec![0.25, 0.75], 0).unwrap();
    let mu = chaos_game(map.clone(), p.clone(), 200_000, 100, 7).unwrap();
    for d in 1..=3usize {
        for code in 0..(1usize << d) {
            let w = SymbolWord::new((0..d).map(|i| (code >> (d - 1 - i)) & 1).collect());
            let m = p.word_mass(&w);
            let got = mu.cylinder_mass(&w).unwrap();
            // consecutive chaos-game points are dependent across d symbols
            let band = 4.0 * ((2 * d - 1) as f64 * m * (1.0 - m) / 200_000.0).sqrt();
            assert!((got - m).abs() <= band, "{w}: {got} vs {m}");
        }
    }
    for k in 0..2 {
        let e = extract_pk(&map, &mu, k).unwrap();
        let pk = p.get(k);
        assert!((e.direct - pk).abs() <= 4.0 * (pk * (1.0 - pk) / 200_000.0).sqrt());
        assert!((e.ratio - pk).abs() <= 4.0 * 0.75f64.sqrt() * (pk * (1.0 - pk) / 200_000.0).sqrt() / 0.5 + 1e-3);
    }
}

#[test]
fn sample_export_roundtrip() {
    let map = Arc::new(BranchMap::<f64>::doubling());
    let mu = chaos_game(map, ProbabilityVector::new(vec![0.5, 0.5], 0).unwrap(), 10, 5, 1).unwrap();
    let (bytes, manifest) = mu.sample_export().unwrap();
    assert_eq!(bytes.len(), 80);
    assert_eq!(manifest["count"], 10);
    assert_eq!(manifest["burn_in"], 5);
    let first = f64::from_le_bytes(bytes[..8].try_into().unwrap());
    assert_eq!(first, mu.samples().unwrap()[0]);
}

#[test]
fn gauss_mu0_branch_masses_and_pk_sum() {
    let map = BranchMap::<f64>::gauss(2000).unwrap();
    let mu0 = Measure::gauss_mu0();
    let mut total = 0.0;
    for k in 1..=2000 {
        let e = extract_pk(&map, &mu0, k).unwrap();
        let exact = (1.0 + 1.0 / (k as f64 * (k as f64 + 2.0))).ln() / ln2();
        assert!((e.direct - exact).abs() < 1e-12);
        total += e.ratio;
    }
    // the truncated tail carries ∫_0^{1/(K+1)} σ dμ₀ / ∫ x dμ₀ = O(log K / K)
    assert!((total - 1.0).abs() < 0.01, "{total}");
    let e1 = extract_pk(&map, &mu0, 1).unwrap();
    assert!((e1.direct - 0.415_037_5).abs() < 1e-7);
}

#[test]
fn moment_test_separates_lebesgue_and_gauss() {
    let dbl = BranchMap::<f64>::doubling();
    let p = ProbabilityVector::new(vec![0.5, 0.5], 0).unwrap();
    let r = moment_invariance_test(&dbl, &Measure::lebesgue(), &p, 6).unwrap();
    assert!(r.max_violation <= 1e-10, "{r:?}");
    assert!(r.rows.iter().filter(|row| row.m == 1).all(|row| row.relative < 1e-12));

    let gauss = BranchMap::<f64>::gauss(200).unwrap();
    let pg = ProbabilityVector::gauss_mu0(200).unwrap();
    let r = moment_invariance_test(&gauss, &Measure::gauss_mu0(), &pg, 4).unwrap();
    assert!(r.max_violation > 1e-3, "{r:?}");
    assert!(r.rows.iter().filter(|row| row.m == 1).all(|row| row.relative < 1e-12));
}

#[test]
fn ifs_verdicts() {
    let map = BranchMap::<f64>::gauss(50).unwrap();
    let IfsVerdict::NotIfs { witness, measured, product } = ifs_test(&map, &Measure::gauss_mu0(), 2, 1e-9).unwrap() else {
        panic!("Gauss measure passed the IFS test");
    };
    assert_eq!(witness.symbols(), &[1, 1]);
    let oracle_gap = (10.0f64 / 9.0).ln() / ln2() - ((4.0f64 / 3.0).ln() / ln2()).powi(2);
    assert!(((measured - product) - oracle_gap).abs() < 1e-12);
    assert!(oracle_gap.abs() > 0.01);

    let dbl = Arc::new(BranchMap::<f64>::doubling());
    let mu = ifs_measure_cylinders(dbl.clone(), ProbabilityVector::new(vec![0.3, 0.7], 0).unwrap(), 10).unwrap();
    match ifs_test(&dbl, &mu, 5, 1e-9).unwrap() {
        IfsVerdict::IsIfs { p } => assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] - 0.7).abs() < 1e-12),
        v => panic!("{v:?}"),
    }
}

#[test]
fn cos2_fixed_measure_is_degenerate_ifs() {
    // δ₀ is the fixed measure of the cos² operator; it is the IFS measure of p = (1, 0)
    let v = ifs_test(&BranchMap::<f64>::doubling(), &Measure::dirac(0.0).unwrap(), 6, 1e-9).unwrap();
    assert_eq!(v, IfsVerdict::IsIfs { p: vec![1.0, 0.0] });
    let lebesgue_image = Measure::<f64>::from_density(
        &(0..1024).map(|i| 2.0 * ((i as f64 + 0.5) * std::f64::consts::PI / 1024.0).cos().powi(2)).collect::<Vec<_>>(),
    )
    .unwrap();
    let v = ifs_test(&BranchMap::<f64>::doubling(), &lebesgue_image, 3, 1e-9).unwrap();
    assert!(matches!(v, IfsVerdict::NotIfs { .. }), "{v:?}");
}

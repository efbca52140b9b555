use std::f64::consts::{LN_2, PI, TAU};
use std::sync::Arc;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use ruelle_lab::dynamics::{BranchMap, SymbolWord};
use ruelle_lab::hilbert::{
    composition_matrix, coupling_to_operator, deterministic_coupling, in_k1, k1_image, max_difference,
    operator_to_coupling, product_coupling, uhs_R, uhs_R_formula, uhs_S, uhs_equivalent, uhs_inner, uhs_s_raw,
    HilbertPair, KoopmanSystem,
};
use ruelle_lab::ifs::{
    chaos_game, extract_pk, ifs_measure_cylinders, ifs_test, moment_invariance_test, IfsVerdict, Integrable,
    ProbabilityVector,
};
use ruelle_lab::markov::{
    ks_stationarity, markov_property_test, parry_jacobian, riesz_family, sample_paths, FiberedOperator, PathSample,
    Start,
};
use ruelle_lab::measures::{
    atomic_distance, density_csv, pushforward_ulam, radon_nikodym, verify_table1, Measure, PowerOptions,
};
use ruelle_lab::{Check, TransferOperator};

use crate::artifacts::{csv, num, Run};
use crate::expr::Expr;
use crate::{Cli, Command, Failure, Format, MapArgs, MeasureArgs, WeightArgs};

type Res<T> = Result<T, Failure>;

fn usage<T>(m: impl Into<String>) -> Res<T> {
    Err(Failure::Usage(m.into()))
}

fn positive(name: &str, v: usize) -> Res<usize> {
    if v == 0 {
        return usage(format!("--{name} must be positive"));
    }
    Ok(v)
}

fn positive_f(name: &str, v: f64) -> Res<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return usage(format!("--{name} must be a positive number, got {v}"));
    }
    Ok(v)
}

fn build_map(a: &MapArgs) -> Res<Arc<BranchMap<f64>>> {
    let m = match a.map.as_str() {
        "doubling" => BranchMap::doubling(),
        "uniform" => BranchMap::uniform_expanding("uniform", positive("branches", a.branches)?)?,
        "gauss" => BranchMap::gauss(positive("kmax", a.kmax)?)?,
        "two-component" => BranchMap::two_component_doubling(),
        other => return usage(format!("unknown map '{other}' (expected doubling, uniform, gauss, two-component)")),
    };
    Ok(Arc::new(m))
}

fn build_operator(m: &MapArgs, w: &WeightArgs) -> Res<TransferOperator<f64>> {
    if w.weight_expr.is_some() && w.weight != "custom" {
        return usage("--weight-expr needs --weight custom");
    }
    let map = build_map(m)?;
    Ok(match (w.weight.as_str(), m.map.as_str()) {
        ("half", "doubling") => TransferOperator::doubling_half(),
        ("half" | "uniform", "gauss") => return usage("the gauss map has no uniform weight; use mu0 or fp"),
        ("half" | "uniform", _) => TransferOperator::uniform(map)?,
        ("cos2", "doubling") => TransferOperator::doubling_cos2(),
        ("cos2", _) => return usage("the cos2 weight is defined for the doubling map only"),
        ("fp", _) => TransferOperator::frobenius_perron(map)?,
        ("mu0", "gauss") => TransferOperator::gauss_invariant(m.kmax)?,
        ("mu0", _) => return usage("the mu0 weight is defined for the gauss map only"),
        ("custom", _) => {
            let Some(src) = &w.weight_expr else {
                return usage("--weight custom needs --weight-expr");
            };
            let e = Arc::new(Expr::parse(src, "y").map_err(Failure::Usage)?);
            let tail = map.tail_mass_bound();
            TransferOperator::new(map, Arc::new(move |y: f64| e.eval(y)), format!("custom({src})"))?.with_tail_bound(tail)
        }
        (other, _) => return usage(format!("unknown weight '{other}' (expected half, uniform, cos2, fp, mu0, custom)")),
    })
}

fn build_measure(a: &MeasureArgs) -> Res<Measure<f64>> {
    Ok(match a.measure.as_str() {
        "lebesgue" => Measure::lebesgue(),
        "mu0" => Measure::gauss_mu0(),
        "dirac" => Measure::dirac(a.at)?,
        other => return usage(format!("unknown measure '{other}' (expected lebesgue, mu0, dirac)")),
    })
}

fn histogram_of(a: &MeasureArgs, n: usize) -> Res<Measure<f64>> {
    match a.measure.as_str() {
        "lebesgue" => Ok(Measure::uniform_histogram(n)),
        "mu0" => Ok(Measure::histogram(Measure::<f64>::gauss_mu0().to_histogram(n)?)?),
        other => usage(format!("measure '{other}' has no density; expected lebesgue or mu0")),
    }
}

fn parse_p(src: &str, map: &BranchMap<f64>) -> Res<ProbabilityVector<f64>> {
    let vals = src
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("--p entry '{s}' is not a number"))))
        .collect::<Res<Vec<_>>>()?;
    Ok(ProbabilityVector::new(vals, map.first_symbol())?)
}

fn default_p(map: &BranchMap<f64>, p: &Option<String>) -> Res<ProbabilityVector<f64>> {
    match p {
        Some(s) => parse_p(s, map),
        None if map.label() == "gauss" || map.tail_mass_bound() > 0.0 => usage("--p is required for this map"),
        None => Ok(ProbabilityVector::uniform(map)?),
    }
}

/// `p_k = μ(J_k)`, truncated for an infinite map.
fn branch_masses(map: &BranchMap<f64>, mu: &dyn Integrable<f64>) -> Res<ProbabilityVector<f64>> {
    let p: Vec<f64> = map.branches().iter().map(|b| mu.mass_over(b.domain())).collect();
    let tail = (1.0 - p.iter().sum::<f64>()).max(0.0);
    Ok(ProbabilityVector::truncated(p, map.first_symbol(), tail)?)
}

/// Grid Koopman system for an invariant measure: Lebesgue where it is
/// invariant, the Ulam invariant density otherwise.
fn koopman(map: Arc<BranchMap<f64>>, n: usize) -> Res<KoopmanSystem<f64>> {
    if map.label() == "gauss" {
        let rho = pushforward_ulam(&map, n)?.invariant_density(PowerOptions::default())?;
        let cells = rho.density.cells().expect("histogram").to_vec();
        return Ok(KoopmanSystem::new(map, cells)?);
    }
    Ok(KoopmanSystem::lebesgue(map, n)?)
}

fn start_of(s: &str, n: usize) -> Res<(Start<f64>, Option<Measure<f64>>)> {
    match s {
        "lebesgue" => Ok((Start::Histogram(vec![1.0 / n as f64; n]), Some(Measure::lebesgue()))),
        "mu0" => Ok((Start::Histogram(Measure::<f64>::gauss_mu0().to_histogram(n)?), Some(Measure::gauss_mu0()))),
        _ => match s.parse::<f64>() {
            Ok(x) if (0.0..1.0).contains(&x) => Ok((Start::Point(x), None)),
            _ => usage(format!("--start '{s}' must be a point in [0,1), lebesgue or mu0")),
        },
    }
}

fn paths_json(paths: &[PathSample<f64>]) -> Value {
    json!(paths
        .iter()
        .map(|p| json!({ "stream": p.stream, "escapes": p.escapes, "chain": p.chain }))
        .collect::<Vec<_>>())
}

fn solenoid_check(paths: &[PathSample<f64>], map: &BranchMap<f64>) -> Res<Check> {
    let mut worst: f64 = 0.0;
    for p in paths {
        worst = worst.max(p.solenoid_residual(map)?);
    }
    Ok(Check::within("solenoid_relation", worst, 1e-12))
}

pub fn run(cli: &Cli) -> Res<()> {
    let config = serde_json::to_value(cli).expect("serializable");
    let name = cli.command.name();
    let dir = cli.out.clone().unwrap_or_else(|| "ruelle-out".into());
    let mut run = Run::new(&dir, &name, config)?;
    let threads = positive("threads", cli.threads)?;
    match &cli.command {
        Command::InvariantDensity { map, n, tol } => {
            let n = positive("n", *n)?;
            let tol = positive_f("tol", *tol)?;
            let m = build_map(map)?;
            let sol = pushforward_ulam(&m, n)?.invariant_density(PowerOptions::default())?;
            let d = sol.density_values();
            let closed: Option<fn(f64) -> f64> = match map.map.as_str() {
                "gauss" => Some(|x| 1.0 / ((1.0 + x) * LN_2)),
                "doubling" | "uniform" => Some(|_| 1.0),
                _ => None,
            };
            let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let mut extra = Vec::new();
            if let Some(c) = closed {
                let cf: Vec<f64> = xs.iter().map(|x| c(*x)).collect();
                let dev: Vec<f64> = d.iter().zip(&cf).map(|(a, b)| (a - b).abs()).collect();
                run.check(Check::within("sup_deviation_closed_form", dev.iter().copied().fold(0.0, f64::max), tol));
                extra.push(("closed_form", cf));
                extra.push(("deviation", dev));
            }
            match cli.format {
                Format::Csv => run.write("invariant-density.csv", density_csv(&d, &extra).as_bytes())?,
                Format::Json => {
                    let mut v = json!({ "x_midpoint": xs, "density": d });
                    for (k, col) in &extra {
                        v[*k] = json!(col);
                    }
                    run.json("invariant-density.json", &v)?
                }
            }
            run.json(
                "invariant-density.solve.json",
                &json!({
                    "iterations": sol.iterations, "residual": sol.residual, "leak": sol.leak,
                    "lambda2": sol.lambda2, "non_unique": sol.non_unique,
                }),
            )?;
        }
        Command::Table1 { n } => {
            let checks = verify_table1::<f64>(positive("n", *n)?)?;
            run.json("table1.json", &json!({ "n": n, "checks": checks }))?;
            run.checks(checks);
        }
        Command::RadonNikodym { map, weight, measure, n } => {
            let n = positive("n", *n)?;
            let op = build_operator(map, weight)?;
            let mu = histogram_of(measure, n)?;
            let w = radon_nikodym(&op, &mu)?;
            let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let closed: Option<(fn(f64) -> f64, f64)> = match (weight.weight.as_str(), measure.measure.as_str()) {
                ("cos2", "lebesgue") => Some((|x| 2.0 * (PI * x).cos().powi(2), 5.0 / n as f64)),
                ("half" | "uniform" | "fp", "lebesgue") if map.map != "two-component" => Some((|_| 1.0, 1e-9)),
                ("mu0" | "fp", "mu0") => Some((|_| 1.0, 1e-6)),
                _ => None,
            };
            if let Some((c, tol)) = closed {
                let dev = w.values().iter().zip(&xs).map(|(v, x)| (v - c(*x)).abs()).fold(0.0, f64::max);
                run.check(Check::within("sup_deviation_closed_form", dev, tol));
            }
            match cli.format {
                Format::Csv => {
                    let rows = xs.iter().zip(w.values()).map(|(x, v)| vec![num(*x), num(*v)]);
                    run.write("radon-nikodym.csv", csv(&["x_midpoint", "w"], rows).as_bytes())?
                }
                Format::Json => run.json("radon-nikodym.json", &json!({ "x_midpoint": xs, "w": w.values() }))?,
            }
        }
        Command::IfsMeasure { map, p, depth, n } => {
            let m = build_map(map)?;
            let p = default_p(&m, p)?;
            let mu = ifs_measure_cylinders(m, p, *depth)?;
            run.json("ifs-measure.json", &mu.cylinder_json()?)?;
            run.check(Check::within("consistency", mu.consistency_residual(), 1e-12));
            let (w1, bound) = mu.invariance_residual(positive("n", *n)?)?;
            run.check(Check::new("invariance_w1_within_resolution", w1 <= bound, w1));
        }
        Command::ChaosGame { map, p, samples, burn_in } => {
            let m = build_map(map)?;
            let p = default_p(&m, p)?;
            let samples = positive("samples", *samples)?;
            let mu = chaos_game(m, p.clone(), samples, *burn_in, cli.seed)?;
            let (bytes, manifest) = mu.sample_export()?;
            run.write("chaos-game.bin", &bytes)?;
            run.json("chaos-game.samples.json", &manifest)?;
            for k in p.symbols() {
                let pk = p.get(k);
                let got = mu.cylinder_mass(&SymbolWord::new(vec![k]))?;
                let se = (pk * (1.0 - pk) / samples as f64).sqrt();
                let z = if se > 0.0 { (got - pk).abs() / se } else { (got - pk).abs() * f64::INFINITY };
                run.check(Check::new(format!("branch_{k}_frequency_4sigma"), z.is_nan() || z <= 4.0, (got - pk).abs()));
            }
        }
        Command::ExtractPk { map, measure, p, depth, samples, k } => {
            let m = build_map(map)?;
            let (src, expect, tol): (Box<dyn Integrable<f64>>, Option<f64>, f64) = match (p, samples) {
                (Some(ps), None) => {
                    let pv = parse_p(ps, &m)?;
                    (Box::new(ifs_measure_cylinders(m.clone(), pv.clone(), *depth)?), Some(pv.get(*k)), 1e-9)
                }
                (Some(ps), Some(s)) => {
                    let pv = parse_p(ps, &m)?;
                    let s = positive("samples", *s)?;
                    let pk = pv.get(*k);
                    let band = 4.0 * (pk * (1.0 - pk) / s as f64).sqrt();
                    (Box::new(chaos_game(m.clone(), pv, s, 100, cli.seed)?), Some(pk), band)
                }
                (None, Some(_)) => return usage("--samples needs --p"),
                (None, None) => (Box::new(build_measure(measure)?), None, 0.0),
            };
            let e = extract_pk(&m, src.as_ref(), *k)?;
            run.json("extract-pk.json", &json!({ "k": k, "ratio": e.ratio, "direct": e.direct, "expected": expect }))?;
            if let Some(pk) = expect {
                run.check(Check::within("direct_matches_p", (e.direct - pk).abs(), tol));
                if samples.is_none() {
                    run.check(Check::within("ratio_matches_p", (e.ratio - pk).abs(), tol));
                }
            }
        }
        Command::IfsTest { map, measure, p, depth, tol } => {
            let m = build_map(map)?;
            let src: Box<dyn Integrable<f64>> = match p {
                Some(ps) => Box::new(ifs_measure_cylinders(m.clone(), parse_p(ps, &m)?, *depth)?),
                None => Box::new(build_measure(measure)?),
            };
            let v = match ifs_test(&m, src.as_ref(), positive("depth", *depth)?, positive_f("tol", *tol)?)? {
                IfsVerdict::IsIfs { p } => json!({ "verdict": "IS_IFS", "p": p }),
                IfsVerdict::NotIfs { witness, measured, product } => json!({
                    "verdict": "NOT_IFS", "witness": witness.symbols(), "measured": measured,
                    "product": product, "gap": measured - product,
                }),
            };
            println!("{}", v["verdict"].as_str().unwrap_or_default());
            run.json("ifs-test.json", &v)?;
        }
        Command::MomentTest { map, measure, p, m, tol } => {
            let bm = build_map(map)?;
            let mu = build_measure(measure)?;
            let pv = match p {
                Some(ps) => parse_p(ps, &bm)?,
                None => branch_masses(&bm, &mu)?,
            };
            let r = moment_invariance_test(&bm, &mu, &pv, positive("m", *m)? as u32)?;
            let rows: Vec<Value> = r
                .rows
                .iter()
                .map(|row| json!({ "k": row.k, "m": row.m, "lhs": row.lhs, "rhs": row.rhs, "relative": row.relative }))
                .collect();
            run.json(
                "moment-test.json",
                &json!({
                    "rows": rows, "max_violation": r.max_violation, "worst": r.worst,
                    "p_mismatch": r.p_mismatch,
                    "consistent_with_ifs": r.max_violation <= *tol && (p.is_none() || r.p_mismatch <= *tol),
                }),
            )?;
        }
        Command::Wold { map, n, depth } => {
            let bm = build_map(map)?;
            let n = positive("n", *n)?;
            let b = bm.branches().len();
            if map.map != "gauss" && (b as u64).checked_pow(*depth as u32).map_or(true, |c| n as u64 % c != 0) {
                return usage(format!("--n {n} does not resolve depth-{depth} cylinders; need {b}^depth to divide n"));
            }
            let k = koopman(bm, n)?;
            let w = k.wold(*depth);
            run.json(
                "wold.json",
                &json!({
                    "h_inf_dim": w.h_inf_dim(), "shift_layer_dims": w.layer_dims(),
                    "idempotency": w.idempotency, "nesting": w.nesting,
                    "layer_orthogonality": w.layer_orthogonality, "unitary_on_h_inf": w.unitary_on_h_inf,
                }),
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let mut adj: f64 = 0.0;
            for _ in 0..8 {
                let f: Vec<f64> = (0..k.n()).map(|_| rng.gen::<f64>() - 0.5).collect();
                let g: Vec<f64> = (0..k.n()).map(|_| rng.gen::<f64>() - 0.5).collect();
                adj = adj.max((k.inner(&k.s(&f), &g) - k.inner(&f, &k.s_star(&g))).abs());
            }
            run.check(Check::within("adjoint", adj, 1e-12));
            // only a Markov partition makes E_k a projection on the grid
            if map.map != "gauss" {
                run.check(Check::within("layer_orthogonality", w.layer_orthogonality, 1e-8));
                let worst = w.idempotency.iter().chain(&w.nesting).copied().fold(0.0, f64::max);
                run.check(Check::within("projection_idempotent_nested", worst, 1e-8));
            }
        }
        Command::Exactness { map, n, depth, f, layers } => {
            let k = koopman(build_map(map)?, positive("n", *n)?)?;
            let e = Expr::parse(f, "x").map_err(Failure::Usage)?;
            let fv = k.sample(|x| e.eval(x));
            if fv.iter().any(|v| !v.is_finite()) {
                return usage(format!("--f '{f}' is not finite on the grid"));
            }
            let r = k.exactness_score(&fv, positive("depth", *depth)?);
            let dims = if *layers { k.wold(*depth).layer_dims() } else { Vec::new() };
            match cli.format {
                Format::Csv => run.write("exactness.csv", ruelle_lab::hilbert::exactness_csv(&r, &dims).as_bytes())?,
                Format::Json => run.json(
                    "exactness.json",
                    &json!({ "initial": r.initial, "norms": r.norms, "monotone": r.monotone, "shift_layer_dims": dims }),
                )?,
            }
            run.check(Check::new("monotone", r.monotone, r.norms.last().copied().unwrap_or(0.0)));
        }
        Command::MarkovSample { map, weight, start, steps, paths, n } => {
            let op = build_operator(map, weight)?;
            let fam = riesz_family(&op);
            let (st, _) = start_of(start, positive("n", *n)?)?;
            let ps = sample_paths(&fam, &st, positive("paths", *paths)?, positive("steps", *steps)?, cli.seed, threads)?;
            match cli.format {
                Format::Csv => {
                    let rows = ps.iter().enumerate().flat_map(|(i, p)| {
                        p.chain.iter().enumerate().map(move |(t, x)| vec![i.to_string(), t.to_string(), num(*x)])
                    });
                    run.write("markov-sample.csv", csv(&["path", "step", "x"], rows).as_bytes())?
                }
                Format::Json => run.json("markov-sample.json", &json!({ "paths": paths_json(&ps) }))?,
            }
            run.json(
                "markov-sample.paths.json",
                &json!({
                    "seed": cli.seed, "paths": ps.len(), "steps": steps, "operator": op.label(),
                    "map": fam.map().label(), "escapes": ps.iter().map(|p| p.escapes).sum::<usize>(),
                }),
            )?;
            run.check(solenoid_check(&ps, fam.map())?);
        }
        Command::MarkovTest { map, weight, start, paths, steps, bins, f, z, n } => {
            let op = build_operator(map, weight)?;
            let fam = riesz_family(&op);
            let e = Expr::parse(f, "y").map_err(Failure::Usage)?;
            let (st, reference) = start_of(start, positive("n", *n)?)?;
            let ps = sample_paths(&fam, &st, positive("paths", *paths)?, positive("steps", *steps)?, cli.seed, threads)?;
            let rep = markov_property_test(&fam, &|y| e.eval(y), &ps, positive("bins", *bins)?);
            let mut out = json!({ "conditional_mean": rep.to_json() });
            run.check(Check::new("conditional_mean", rep.passes(positive_f("z", *z)?), rep.max_z));
            if let Some(mu) = reference {
                let ks = ks_stationarity(&ps, &mu);
                out["ks"] = json!({ "statistic": ks.statistic, "threshold": ks.threshold, "n": ks.n });
                run.check(Check::new("ks_stationarity", ks.passes(), ks.statistic));
            }
            run.json("markov-test.json", &out)?;
        }
        Command::CoupleRoundtrip { trials, min_size, max_size, exact } => {
            if *min_size < 1 || min_size > max_size {
                return usage("--min-size must be positive and at most --max-size");
            }
            let checks = coupling_checks(positive("trials", *trials)?, *min_size, *max_size, *exact, cli.seed)?;
            run.json("couple-roundtrip.json", &json!({ "checks": checks }))?;
            run.checks(checks);
        }
        Command::UhsDemo { trials } => {
            let checks = uhs_checks(positive("trials", *trials)?, cli.seed)?;
            run.json("uhs-demo.json", &json!({ "checks": checks }))?;
            run.checks(checks);
        }
        Command::VerifyAll => {
            let checks = verify_all(cli.seed, threads)?;
            run.json("verify-all.json", &json!({ "checks": checks }))?;
            run.checks(checks);
        }
    }
    run.finish()
}

fn stochastic_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let row: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen::<f64>() }).collect();
    let s: f64 = row.iter().sum();
    if s == 0.0 {
        let mut e = vec![0.0; n];
        e[rng.gen_range(0..n)] = 1.0;
        return e;
    }
    row.into_iter().map(|v| v / s).collect()
}

fn rational_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<Ratio<i64>> {
    let mut raw: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
    if raw.iter().all(|v| *v == 0) {
        raw[0] = 1;
    }
    let s: i64 = raw.iter().sum();
    raw.into_iter().map(|v| Ratio::new(v, s)).collect()
}

fn coupling_checks(trials: usize, lo: usize, hi: usize, exact: bool, seed: u64) -> Res<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    if exact {
        let mut ok = true;
        for _ in 0..trials {
            let n = rng.gen_range(lo..=hi);
            let p: Vec<Vec<Ratio<i64>>> = (0..n).map(|_| rational_row(&mut rng, n)).collect();
            let mu1 = rational_row(&mut rng, n).into_iter().map(|v| v + Ratio::new(1, 1)).collect::<Vec<_>>();
            let s = mu1.iter().fold(Ratio::new(0, 1), |a, b| a + b);
            let mu1: Vec<Ratio<i64>> = mu1.into_iter().map(|v| v / s).collect();
            let zero = Ratio::new(0, 1);
            let nu = operator_to_coupling(&p, &mu1, &zero)?;
            ok &= coupling_to_operator(&nu)? == p;
            ok &= operator_to_coupling(&coupling_to_operator(&nu)?, &nu.mu1(), &zero)? == nu;
        }
        checks.push(Check::new("round_trips_exact", ok, if ok { 0.0 } else { 1.0 }));
    } else {
        let (mut pp, mut nn): (f64, f64) = (0.0, 0.0);
        for _ in 0..trials {
            let n = rng.gen_range(lo..=hi);
            let p: Vec<Vec<f64>> = (0..n).map(|_| stochastic_row(&mut rng, n)).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
            let s: f64 = raw.iter().sum();
            let mu1: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let nu = operator_to_coupling(&p, &mu1, &1e-12)?;
            pp = pp.max(max_difference(&coupling_to_operator(&nu)?, &p));
            nn = nn.max(operator_to_coupling(&coupling_to_operator(&nu)?, &nu.mu1(), &1e-12)?.max_difference(&nu));
        }
        checks.push(Check::within("operator_round_trip", pp, 1e-12));
        checks.push(Check::within("coupling_round_trip", nn, 1e-12));
    }
    let q = |a: i64, b: i64| Ratio::new(a, b);
    let mu1 = vec![q(1, 6), q(1, 3), q(1, 2)];
    let mu2 = vec![q(1, 4), q(1, 4), q(1, 2)];
    let rank_one = coupling_to_operator(&product_coupling(&mu1, &mu2)?)?.iter().all(|r| *r == mu2);
    checks.push(Check::new("product_gives_rank_one", rank_one, if rank_one { 0.0 } else { 1.0 }));
    let sigma = [2, 0, 1];
    let comp = coupling_to_operator(&deterministic_coupling(&sigma, &mu1)?)? == composition_matrix::<Ratio<i64>>(&sigma);
    checks.push(Check::new("deterministic_gives_composition", comp, if comp { 0.0 } else { 1.0 }));
    Ok(checks)
}

fn random_pair(rng: &mut ChaCha8Rng, k: usize) -> Res<HilbertPair<f64>> {
    let atoms: Vec<(f64, f64)> = (0..k).map(|_| (rng.gen::<f64>(), rng.gen::<f64>() + 0.1)).collect();
    let mu = Measure::atomic(atoms)?;
    let m = mu.atoms().map(|a| a.len()).unwrap_or(0);
    Ok(HilbertPair::new(mu, (0..m).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())?)
}

fn uhs_checks(trials: usize, seed: u64) -> Res<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut iso, mut adj, mut inv): (f64, f64, bool) = (0.0, 0.0, true);
    for r in [TransferOperator::<f64>::doubling_half(), TransferOperator::doubling_cos2()] {
        for _ in 0..trials {
            let a = random_pair(&mut rng, 3)?;
            let sa = uhs_S(&r, &a)?;
            iso = iso.max((sa.norm_sq() - a.norm_sq()).abs());
            inv &= uhs_equivalent(&uhs_R(&r, &sa, true)?, &a);
            let atoms: Vec<(f64, f64)> = sa.atoms().iter().map(|(x, m)| (*x, m * (0.5 + rng.gen::<f64>()))).collect();
            let vals = (0..atoms.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let b = HilbertPair::new(Measure::atomic(atoms)?, vals)?;
            let rb = uhs_R(&r, &b, in_k1(&r, b.measure())?)?;
            adj = adj.max((uhs_inner(&sa, &b) - uhs_inner(&a, &rb)).abs());
        }
    }
    let raw = TransferOperator::new(Arc::new(BranchMap::doubling()), Arc::new(|y: f64| 0.25 + y), "affine")?;
    let a = random_pair(&mut rng, 3)?;
    let gap = (uhs_s_raw(&raw, &a).norm_sq() - a.norm_sq()).abs();
    let refused = uhs_S(&raw, &a).is_err() && gap > 1e-6;

    let cos2 = TransferOperator::<f64>::doubling_cos2();
    let half = Measure::dirac(0.5)?;
    let lemma = atomic_distance(&k1_image(&cos2, &half)?, &Measure::dirac(0.0)?)?;
    let lifted = uhs_s_raw(&cos2, &uhs_R_formula(&cos2, &|x| 1.0 + x, &half)?);
    let lifted_ok = lifted.atoms() == [(0.0, 1.0)] && (lifted.values()[0] - 1.0).abs() < 1e-15;
    Ok(vec![
        Check::within("s_hat_isometry", iso, 1e-12),
        Check::new("r_hat_s_hat_identity", inv, if inv { 0.0 } else { 1.0 }),
        Check::within("adjointness", adj, 1e-12),
        Check::new("unnormalized_breaks_isometry", refused, gap),
        Check::within("half_dirac_image_is_delta0", lemma, 1e-12),
        Check::new("half_dirac_lift", lifted_ok, if lifted_ok { 0.0 } else { 1.0 }),
    ])
}

fn trig(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let c: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)).collect();
    move |x: f64| {
        c.iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let t = TAU * k as f64 * x;
                a * t.cos() + b * t.sin()
            })
            .sum()
    }
}

fn verify_all(seed: u64, threads: usize) -> Res<Vec<Check>> {
    let mut out: Vec<Check> = Vec::new();
    let mut add = |prefix: &str, cs: Vec<Check>| {
        out.extend(cs.into_iter().map(|c| Check { name: format!("{prefix}.{}", c.name), ..c }));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    add("table1", verify_table1::<f64>(1024)?);

    let gauss = BranchMap::<f64>::gauss(2000)?;
    let sol = pushforward_ulam(&gauss, 256)?.invariant_density(PowerOptions::default())?;
    let sup = sol
        .density_values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v - 1.0 / ((1.0 + (i as f64 + 0.5) / 256.0) * LN_2)).abs())
        .fold(0.0, f64::max);
    add("gauss", vec![Check::within("invariant_density_sup", sup, 0.01)]);

    let g = BranchMap::<f64>::gauss(200)?;
    let witness = match ifs_test(&g, &Measure::gauss_mu0(), 2, 1e-9)? {
        IfsVerdict::NotIfs { witness, measured, product } => {
            let oracle = (10.0f64 / 9.0).ln() / LN_2 - ((4.0f64 / 3.0).ln() / LN_2).powi(2);
            Check::new("not_ifs_at_11", witness.symbols() == [1, 1], ((measured - product) - oracle).abs())
        }
        IfsVerdict::IsIfs { .. } => Check::new("not_ifs_at_11", false, 1.0),
    };
    let dbl = Arc::new(BranchMap::<f64>::doubling());
    let pv = ProbabilityVector::new(vec![0.3, 0.7], 0)?;
    let table = ifs_measure_cylinders(dbl.clone(), pv.clone(), 8)?;
    let mut pk: f64 = 0.0;
    for k in 0..2 {
        let e = extract_pk(&dbl, &table, k)?;
        pk = pk.max((e.ratio - pv.get(k)).abs()).max((e.direct - pv.get(k)).abs());
    }
    add("ifs", vec![witness, Check::within("pk_from_cylinders", pk, 1e-9), Check::within("consistency", table.consistency_residual(), 1e-12)]);

    let ops = [TransferOperator::doubling_half(), TransferOperator::doubling_cos2(), TransferOperator::gauss_invariant(200)?];
    let mut pull: f64 = 0.0;
    let mut kernel: f64 = 0.0;
    for i in 0..999 {
        let r = &ops[i % 3];
        let (f, h) = (trig(&mut rng), trig(&mut rng));
        let x: f64 = rng.gen_range(0.01..1.0);
        pull = pull.max(r.pullout_residual_at(&f, &h, x)?);
        if i % 3 < 2 && i < 300 {
            let d = r.kernel_decompose(&f)?;
            let f0 = |y: f64| d.f0(y).unwrap_or(f64::NAN);
            kernel = kernel.max(r.apply(&f0, x).abs());
        }
    }
    add("transferop", vec![Check::within("pullout", pull, 1e-10), Check::within("kernel_decomposition", kernel, 1e-10)]);

    let k = KoopmanSystem::lebesgue(dbl.clone(), 64)?;
    let w = k.wold(4);
    let dims_ok = w.h_inf_dim() == 4 && w.layer_dims() == [32, 16, 8, 4];
    let chi = k.sample(|x| if x < 0.5 { 1.0 } else { 0.0 });
    let ex = k.exactness_score(&chi, 6);
    add(
        "hilbert",
        vec![
            Check::new("wold_dims_doubling", dims_ok, w.h_inf_dim() as f64),
            Check::within("isometry_on_range", k.isometry_residual(8, seed), 1e-12),
            Check::new("exactness_monotone", ex.monotone, ex.norms[5]),
        ],
    );
    add("coupling", coupling_checks(100, 2, 8, false, seed)?);
    add("coupling_exact", coupling_checks(50, 2, 6, true, seed)?);
    add("uhs", uhs_checks(100, seed)?);

    let fam = riesz_family(&TransferOperator::<f64>::doubling_half());
    let ps = sample_paths(&fam, &Start::Histogram(vec![1.0 / 256.0; 256]), 10_000, 10, seed, threads)?;
    let rep = markov_property_test(&fam, &|y| y, &ps, 16);
    let ks = ks_stationarity(&ps, &Measure::lebesgue());
    let mut markov = vec![
        Check::new("conditional_mean_4sigma", rep.passes(4.0), rep.max_z),
        Check::new("ks_stationarity", ks.passes(), ks.statistic),
        solenoid_check(&ps, fam.map())?,
    ];
    let labels: Vec<usize> = (0..64).map(|i| if i < 8 { i } else { rng.gen_range(0..8) }).collect();
    let mu: Vec<f64> = vec![1.0 / 64.0; 64];
    let weights: Vec<f64> = (0..64).map(|_| rng.gen::<f64>() + 0.2).collect();
    let fo = FiberedOperator::new(labels.clone(), mu, weights)?.normalized();
    let h: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    markov.push(Check::within("fibered_harmonic", fo.harmonic_residual(&h), 1e-12));
    markov.push(Check::within("fibered_radon_nikodym", fo.radon_nikodym_residual(), 1e-12));
    let pj = parry_jacobian(&dbl, &Measure::uniform_histogram(128))?;
    let theta = pj.theta.iter().fold(0.0f64, |m, t| m.max((t - 1.0).abs()));
    markov.push(Check::within("parry_theta_doubling", theta, 1e-12));
    add("markov", markov);
    Ok(out)
}

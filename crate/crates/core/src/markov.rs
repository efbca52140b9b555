//! Riesz kernels `μ_x`, backward Markov chains drawn from them,
//! conditional-measure operators on grid partitions, and the Parry
//! Jacobian.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::dynamics::BranchMap;
use crate::error::{Error, Result};
use crate::interval::Grid;
use crate::measures::{act_on_measure, atomic_distance, merge_atoms, pushforward_ulam, Measure};
use crate::numeric::weyl_samples;
use crate::scalar::{lit, to_f64, Scalar};
use crate::transferop::{FunctionOnGrid, TransferOperator};

/// `R f(x) = ∫ f dμ_x` with `μ_x = Σ_k W(τ_k x) δ_{τ_k x}`.
#[derive(Clone, Debug)]
pub struct RieszFamily<T> {
    op: TransferOperator<T>,
}

pub fn riesz_family<T: Scalar>(r: &TransferOperator<T>) -> RieszFamily<T> {
    RieszFamily { op: r.clone() }
}

impl<T: Scalar> RieszFamily<T> {
    pub fn operator(&self) -> &TransferOperator<T> {
        &self.op
    }

    pub fn map(&self) -> &Arc<BranchMap<T>> {
        self.op.map()
    }

    /// Mass missing from `μ_x` because of branch truncation, at most.
    pub fn tail_bound(&self) -> T {
        self.op.tail_bound()
    }

    /// `(y, mass)` in branch order. Atoms whose weight is below `ε²` of the
    /// largest are treated as round-off and dropped.
    pub fn kernel(&self, x: T) -> Vec<(T, T)> {
        let atoms: Vec<(T, T)> = self.op.kernel_atoms(x).into_iter().map(|(_, y, w)| (y, w)).collect();
        let top = atoms.iter().fold(T::zero(), |t, a| t.max(a.1));
        let floor = top * T::epsilon() * T::epsilon();
        atoms.into_iter().filter(|a| a.1 > floor).collect()
    }

    pub fn measure_at(&self, x: T) -> Result<Measure<T>> {
        Measure::atomic(self.kernel(x))
    }

    /// `∫ f dμ_x`.
    pub fn integrate(&self, f: &dyn Fn(T) -> T, x: T) -> T {
        self.kernel(x).into_iter().map(|(y, m)| m * f(y)).sum()
    }

    /// `max |∫ f dμ_x - R f(x)|` over quasi-random `x`.
    pub fn reconstruction_residual(&self, f: &dyn Fn(T) -> T, samples: usize) -> T {
        weyl_samples::<T>(samples)
            .into_iter()
            .fold(T::zero(), |m, x| m.max((self.integrate(f, x) - self.op.apply(f, x)).abs()))
    }

    /// Largest of `|μ_x(X) - 1|` and `|σ(y) - x|` over the atoms: the check
    /// `μ_x∘σ⁻¹ = δ_x`.
    pub fn delta_residual(&self, x: T) -> Result<T> {
        let k = self.kernel(x);
        let mass: T = k.iter().map(|a| a.1).sum();
        let mut worst = (mass - T::one()).abs();
        for (y, _) in k {
            worst = worst.max((self.map().sigma(y)? - x).abs());
        }
        Ok(worst)
    }

    /// `∫ μ_x dν(x)` for atomic `ν`.
    pub fn mix(&self, nu: &Measure<T>) -> Result<Measure<T>> {
        let atoms = nu
            .atoms()
            .ok_or_else(|| Error::InvalidArgument("mix needs an atomic measure".into()))?;
        let mut out = Vec::new();
        for &(x, m) in atoms {
            out.extend(self.kernel(x).into_iter().map(|(y, w)| (y, m * w)));
        }
        Ok(Measure::Atomic(merge_atoms(out, T::zero())))
    }

    /// `‖∫ μ_x dν - νR‖` atomwise.
    pub fn mixture_residual(&self, nu: &Measure<T>) -> Result<T> {
        atomic_distance(&self.mix(nu)?, &act_on_measure(&self.op, nu)?)
    }

    /// `‖∫ μ_x dν - ν‖` atomwise; zero exactly when `νR = ν`.
    pub fn stationarity_residual(&self, nu: &Measure<T>) -> Result<T> {
        atomic_distance(&self.mix(nu)?, nu)
    }

    /// One transition from `x`: inverse-CDF over the kernel atoms. `None`
    /// when the draw lands in the truncated tail; without a tail, round-off
    /// above the last atom selects it.
    fn step(&self, x: T, rng: &mut ChaCha8Rng) -> Option<T> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let kernel = self.kernel(x);
        for &(y, m) in &kernel {
            acc += to_f64(m);
            if u < acc {
                return Some(y);
            }
        }
        match self.tail_bound() > T::zero() {
            true => None,
            false => kernel.last().map(|a| a.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSample<T> {
    pub chain: Vec<T>,
    pub seed: u64,
    pub stream: u64,
    /// Tail draws that were redrawn.
    pub escapes: usize,
}

impl<T: Scalar> PathSample<T> {
    pub fn len(&self) -> usize {
        self.chain.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.chain.len() <= 1
    }

    /// `max |σ(x_{i+1}) - x_i|`.
    pub fn solenoid_residual(&self, map: &BranchMap<T>) -> Result<T> {
        let mut worst = T::zero();
        for w in self.chain.windows(2) {
            worst = worst.max((map.sigma(w[1])? - w[0]).abs());
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug)]
pub enum Start<T> {
    Point(T),
    /// Cell masses; the start is uniform within a cell drawn by mass.
    Histogram(Vec<T>),
}

fn draw_start<T: Scalar>(start: &Start<T>, rng: &mut ChaCha8Rng) -> Result<T> {
    match start {
        Start::Point(x) => Ok(*x),
        Start::Histogram(cells) => {
            let total = cells.iter().map(|c| to_f64(*c)).sum::<f64>();
            if !(total > 0.0) {
                return Err(Error::InvalidArgument("start histogram has no mass".into()));
            }
            let u: f64 = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut cell = cells.len() - 1;
            for (i, c) in cells.iter().enumerate() {
                acc += to_f64(*c);
                if u < acc {
                    cell = i;
                    break;
                }
            }
            let v: f64 = rng.gen();
            Ok(lit((cell as f64 + v) / cells.len() as f64))
        }
    }
}

/// Chain `x_0, …, x_steps` with `x_{i+1} ~ μ_{x_i}`. Stream `stream` of the
/// ChaCha8 generator seeded with `seed` drives the path. Draws that land in
/// the truncated tail are redrawn; more than `0.1%` redraws is an error.
pub fn sample_path<T: Scalar>(
    family: &RieszFamily<T>,
    start: &Start<T>,
    steps: usize,
    seed: u64,
    stream: u64,
) -> Result<PathSample<T>> {
    let p = draw_path(family, start, steps, seed, stream)?;
    check_escapes(p.escapes, steps)?;
    Ok(p)
}

fn check_escapes(escapes: usize, steps: usize) -> Result<()> {
    if escapes * 1000 > steps {
        return Err(Error::TooManyEscapes { escapes, steps });
    }
    Ok(())
}

fn draw_path<T: Scalar>(
    family: &RieszFamily<T>,
    start: &Start<T>,
    steps: usize,
    seed: u64,
    stream: u64,
) -> Result<PathSample<T>> {
    family.op.require_normalized()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut x = draw_start(start, &mut rng)?;
    let mut chain = Vec::with_capacity(steps + 1);
    chain.push(x);
    let mut escapes = 0;
    for _ in 0..steps {
        let mut tries = 0;
        loop {
            if let Some(y) = family.step(x, &mut rng) {
                x = y;
                break;
            }
            escapes += 1;
            tries += 1;
            if tries >= 1000 {
                return Err(Error::TooManyEscapes { escapes, steps });
            }
        }
        chain.push(x);
    }
    Ok(PathSample { chain, seed, stream, escapes })
}

/// `n_paths` chains, path `i` on stream `i`. With `threads > 1` the paths
/// are split into contiguous chunks; results do not depend on `threads`.
/// The escape budget applies to the pooled steps.
pub fn sample_paths<T: Scalar>(
    family: &RieszFamily<T>,
    start: &Start<T>,
    n_paths: usize,
    steps: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<PathSample<T>>> {
    let run = |range: std::ops::Range<usize>| -> Result<Vec<PathSample<T>>> {
        range.map(|i| draw_path(family, start, steps, seed, i as u64)).collect()
    };
    let out = if threads <= 1 || n_paths < 2 * threads {
        run(0..n_paths)?
    } else {
        let chunk = n_paths.div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let lo = (t * chunk).min(n_paths);
                    let hi = ((t + 1) * chunk).min(n_paths);
                    s.spawn(move || run(lo..hi))
                })
                .collect();
            let mut out = Vec::with_capacity(n_paths);
            for h in handles {
                out.extend(h.join().expect("sampler thread panicked")?);
            }
            Ok::<_, Error>(out)
        })?
    };
    check_escapes(out.iter().map(|p| p.escapes).sum(), n_paths * steps)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinRow {
    pub cell: usize,
    pub count: usize,
    pub empirical: f64,
    pub target: f64,
    pub midpoint_target: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovReport {
    pub bins: Vec<BinRow>,
    pub empty_bins: usize,
    pub max_z: f64,
    pub transitions: usize,
}

impl MarkovReport {
    pub fn passes(&self, z: f64) -> bool {
        self.max_z <= z
    }

    pub fn to_json(&self) -> Value {
        json!({
            "max_z": self.max_z,
            "empty_bins": self.empty_bins,
            "transitions": self.transitions,
            "bins": self.bins.iter().map(|b| json!({
                "cell": b.cell, "count": b.count, "empirical": b.empirical, "target": b.target,
                "midpoint_target": b.midpoint_target, "z": b.z,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Pools transitions `x_i → x_{i+1}` by the cell of `x_i` on an
/// `n_bins` grid. Per bin, `target` is the mean of `R f(x_i)` and `z` the
/// mean of `f(x_{i+1}) - R f(x_i)` in units of its standard error;
/// `midpoint_target` is `R f` at the cell midpoint, for display.
pub fn markov_property_test<T: Scalar>(
    family: &RieszFamily<T>,
    f: &dyn Fn(T) -> T,
    paths: &[PathSample<T>],
    n_bins: usize,
) -> MarkovReport {
    let grid = Grid::new(n_bins);
    let mut n = vec![0usize; n_bins];
    let mut emp = vec![0.0f64; n_bins];
    let mut tgt = vec![0.0f64; n_bins];
    let mut r1 = vec![0.0f64; n_bins];
    let mut r2 = vec![0.0f64; n_bins];
    let mut transitions = 0;
    for p in paths {
        for w in p.chain.windows(2) {
            let c = grid.locate(w[0]);
            let v = to_f64(f(w[1]));
            let t = to_f64(family.op.apply(f, w[0]));
            n[c] += 1;
            emp[c] += v;
            tgt[c] += t;
            r1[c] += v - t;
            r2[c] += (v - t) * (v - t);
            transitions += 1;
        }
    }
    let mut bins = Vec::new();
    let mut empty_bins = 0;
    let mut max_z: f64 = 0.0;
    for c in 0..n_bins {
        if n[c] == 0 {
            empty_bins += 1;
            continue;
        }
        let k = n[c] as f64;
        let dev = (r1[c] / k).abs();
        let var = (r2[c] / k - (r1[c] / k).powi(2)).max(0.0);
        let se = (var / k).sqrt();
        let target = tgt[c] / k;
        // a bin whose residuals are constant is compared at round-off scale
        let z = if dev <= 1e-12 * target.abs().max(1.0) {
            0.0
        } else if se > 0.0 {
            dev / se
        } else {
            f64::INFINITY
        };
        max_z = max_z.max(z);
        let midpoint_target = to_f64(family.op.apply(f, grid.midpoint::<T>(c)));
        bins.push(BinRow { cell: c, count: n[c], empirical: emp[c] / k, target, midpoint_target, z });
    }
    MarkovReport { bins, empty_bins, max_z, transitions }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KsReport {
    pub statistic: f64,
    pub threshold: f64,
    pub n: usize,
}

impl KsReport {
    pub fn passes(&self) -> bool {
        self.statistic <= self.threshold
    }
}

/// One-sample Kolmogorov–Smirnov statistic of `x_T` across paths against
/// `μ`, threshold `1.63/√N` (α = 0.01).
pub fn ks_stationarity<T: Scalar>(paths: &[PathSample<T>], mu: &Measure<T>) -> KsReport {
    let mut xs: Vec<f64> = paths.iter().map(|p| to_f64(*p.chain.last().unwrap())).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let nn = n as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let c = to_f64(mu.cdf(lit(*x)));
        d = d.max((c - i as f64 / nn).abs()).max(((i + 1) as f64 / nn - c).abs());
    }
    KsReport { statistic: d, threshold: 1.63 / nn.sqrt(), n }
}

/// `step,x` rows.
pub fn path_csv<T: Scalar>(p: &PathSample<T>) -> String {
    let mut s = String::from("step,x\n");
    for (i, x) in p.chain.iter().enumerate() {
        s.push_str(&format!("{i},{:.16e}\n", to_f64(*x)));
    }
    s
}

pub fn path_manifest<T: Scalar>(p: &PathSample<T>, map: &BranchMap<T>) -> Value {
    json!({ "seed": p.seed, "stream": p.stream, "steps": p.len(), "escapes": p.escapes, "map": map.label() })
}

/// `R_W f(x) = ∫_{C_x} f W dμ_{C_x}` for a partition of grid cells into
/// fibers `C`, with conditional measures `μ_C = μ|_C / μ(C)`.
#[derive(Clone, Debug)]
pub struct FiberedOperator<T> {
    fiber: Vec<usize>,
    members: Vec<Vec<usize>>,
    mu: Vec<T>,
    cond: Vec<T>,
    weight: Vec<T>,
}

impl<T: Scalar> FiberedOperator<T> {
    /// `fiber[c]` labels cell `c`; labels must be `0..k` with every label used.
    pub fn new(fiber: Vec<usize>, mu: Vec<T>, weight: Vec<T>) -> Result<Self> {
        let n = fiber.len();
        if mu.len() != n || weight.len() != n {
            return Err(Error::InvalidArgument("fiber labels, masses and weights must have equal length".into()));
        }
        let k = fiber.iter().max().map(|m| m + 1).unwrap_or(0);
        let mut members = vec![Vec::new(); k];
        for (c, &f) in fiber.iter().enumerate() {
            members[f].push(c);
        }
        if let Some(e) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidPartition(format!("fiber {e} is empty")));
        }
        if mu.iter().any(|m| !(*m > T::zero())) || weight.iter().any(|w| *w < T::zero()) {
            return Err(Error::InvalidArgument("masses must be positive and weights nonnegative".into()));
        }
        let mut cond = vec![T::zero(); n];
        for m in &members {
            let total: T = m.iter().map(|&c| mu[c]).sum();
            for &c in m {
                cond[c] = mu[c] / total;
            }
        }
        Ok(FiberedOperator { fiber, members, mu, cond, weight })
    }

    /// Uniform weight, so `R_W` is the conditional expectation.
    pub fn conditional_expectation(fiber: Vec<usize>, mu: Vec<T>) -> Result<Self> {
        let n = fiber.len();
        Self::new(fiber, mu, vec![T::one(); n])
    }

    pub fn n(&self) -> usize {
        self.fiber.len()
    }

    pub fn fibers(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn fiber_of(&self, cell: usize) -> usize {
        self.fiber[cell]
    }

    pub fn weight(&self) -> &[T] {
        &self.weight
    }

    /// `∫_C W dμ_C` per fiber.
    pub fn fiber_masses(&self) -> Vec<T> {
        self.members.iter().map(|m| m.iter().map(|&c| self.weight[c] * self.cond[c]).sum()).collect()
    }

    pub fn normalized(&self) -> Self {
        let masses = self.fiber_masses();
        let mut out = self.clone();
        for (c, w) in out.weight.iter_mut().enumerate() {
            let m = masses[self.fiber[c]];
            if m > T::zero() {
                *w = *w / m;
            }
        }
        out
    }

    pub fn normalization_residual(&self) -> T {
        self.fiber_masses().into_iter().fold(T::zero(), |a, m| a.max((m - T::one()).abs()))
    }

    pub fn apply(&self, f: &[T]) -> Vec<T> {
        let per_fiber: Vec<T> =
            self.members.iter().map(|m| m.iter().map(|&c| f[c] * self.weight[c] * self.cond[c]).sum()).collect();
        self.fiber.iter().map(|&k| per_fiber[k]).collect()
    }

    pub fn is_fiber_constant(&self, h: &[T], tol: T) -> bool {
        self.members.iter().all(|m| m.iter().all(|&c| (h[c] - h[m[0]]).abs() <= tol))
    }

    /// `max |R_W h - h|`.
    pub fn harmonic_residual(&self, h: &[T]) -> T {
        self.apply(h).iter().zip(h).fold(T::zero(), |a, (x, y)| a.max((*x - *y).abs()))
    }

    /// `max_c |d(μR_W)/dμ(c) - W(c)|`, with `μR_W` built cell by cell.
    pub fn radon_nikodym_residual(&self) -> T {
        let n = self.n();
        let mut worst = T::zero();
        for c in 0..n {
            let mut e = vec![T::zero(); n];
            e[c] = T::one();
            let mass: T = self.apply(&e).iter().zip(&self.mu).map(|(v, m)| *v * *m).sum();
            worst = worst.max((mass / self.mu[c] - self.weight[c]).abs());
        }
        worst
    }

    /// `max |R_W((f∘π) g) - f R_W(g)|` with `f` read on fibers.
    pub fn pullout_residual(&self, f_fiber: &[T], g: &[T]) -> T {
        let fg: Vec<T> = (0..self.n()).map(|c| f_fiber[self.fiber[c]] * g[c]).collect();
        let lhs = self.apply(&fg);
        let rg = self.apply(g);
        (0..self.n()).fold(T::zero(), |a, c| a.max((lhs[c] - f_fiber[self.fiber[c]] * rg[c]).abs()))
    }
}

#[derive(Clone, Debug)]
pub struct ParryJacobian<T> {
    /// `J` on the branch containing each cell midpoint, `0` in a truncated tail.
    pub jacobian: FunctionOnGrid<T>,
    /// `Σ_{σy=x} 1/J(y)` per cell.
    pub theta: Vec<T>,
    /// `dμσ⁻¹/dμ` per cell from the exact pushforward matrix.
    pub theta_oracle: Vec<T>,
    pub residual: T,
}

/// Forward Jacobian `J(y) = d(μ∘σ)/dμ` on the branch of `y`, computed on
/// the pieces `cell ∩ J_k` of an `n`-cell histogram `μ`.
pub fn parry_jacobian<T: Scalar>(map: &BranchMap<T>, mu: &Measure<T>) -> Result<ParryJacobian<T>> {
    let cells = mu
        .cells()
        .ok_or_else(|| Error::InvalidArgument("parry_jacobian needs a histogram measure".into()))?;
    let n = cells.len();
    let grid = Grid::new(n);
    let zero: Vec<usize> = (0..n).filter(|&i| !(cells[i] > T::zero())).collect();
    if !zero.is_empty() {
        return Err(Error::AbsoluteContinuity { cells: zero });
    }
    let piece_jacobian = |cell: usize, symbol: usize| -> T {
        let b = map.branch(symbol).expect("symbol from the map");
        let c = grid.cell::<T>(cell);
        match b.domain().clip(c.lo, c.hi) {
            Some((p, q)) => {
                let (u, v) = (b.forward(p), b.forward(q));
                let (u, v) = if u <= v { (u, v) } else { (v, u) };
                mu.mass_between(u, v.min(b.image().hi)) / mu.mass_between(p, q)
            }
            None => T::zero(),
        }
    };
    let mut jac = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid.midpoint::<T>(i);
        // midpoints in a truncated tail carry J = 0
        jac.push(map.locate(x).map_or(T::zero(), |b| piece_jacobian(i, b.symbol())));
    }
    // on the piece τ_k(cell) the forward map lands on the whole cell, so
    // 1/J there is μ(τ_k(cell))/μ(cell)
    let mut theta = Vec::with_capacity(n);
    for (i, m) in cells.iter().enumerate() {
        let c = grid.cell::<T>(i);
        let mut acc = T::zero();
        for b in map.branches() {
            if let Some((p, q)) = b.image().clip(c.lo, c.hi) {
                let (u, v) = (b.inverse(p), b.inverse(q));
                let (u, v) = if u <= v { (u, v) } else { (v, u) };
                acc += mu.mass_between(u, v) / *m;
            }
        }
        theta.push(acc);
    }
    let pushed = pushforward_ulam(map, n)?.apply(&mu.to_histogram(n)?);
    let theta_oracle: Vec<T> = pushed.iter().zip(cells).map(|(a, b)| *a / *b).collect();
    let residual = theta.iter().zip(&theta_oracle).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
    Ok(ParryJacobian { jacobian: FunctionOnGrid::new(jac)?, theta, theta_oracle, residual })
}

/// Transfer operator with weight `1/J`, `J` read off an `n`-cell grid.
pub fn parry_operator<T: Scalar>(map: Arc<BranchMap<T>>, mu: &Measure<T>) -> Result<TransferOperator<T>> {
    let pj = parry_jacobian(&map, mu)?;
    let cells = pj.jacobian.values().to_vec();
    let n = cells.len();
    let weight = Arc::new(move |y: T| {
        let j = cells[Grid::new(n).locate(y)];
        if j > T::zero() {
            T::one() / j
        } else {
            T::zero()
        }
    });
    let tail = map.tail_mass_bound();
    Ok(TransferOperator::new(map, weight, "parry")?.with_tail_bound(tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let f = riesz_family(&TransferOperator::<f64>::doubling_half());
        assert_eq!(f.kernel(0.6), vec![(0.3, 0.5), (0.8, 0.5)]);
        let c = riesz_family(&TransferOperator::<f64>::doubling_cos2());
        assert_eq!(c.kernel(0.0), vec![(0.0, 1.0)]);
        for x in weyl_samples::<f64>(100) {
            assert!(c.delta_residual(x).unwrap() < 1e-12);
        }
        assert!(c.reconstruction_residual(&|y| y.sin(), 200) < 1e-15);
    }

    #[test]
    fn mixture_equals_nu_r() {
        let f = riesz_family(&TransferOperator::<f64>::doubling_cos2());
        let nu = Measure::atomic(vec![(0.1, 0.3), (0.6, 0.7)]).unwrap();
        assert!(f.mixture_residual(&nu).unwrap() < 1e-15);
    }

    #[test]
    fn paths_are_solenoid_chains_and_reproducible() {
        let f = riesz_family(&TransferOperator::<f64>::doubling_half());
        let start = Start::Point(0.6);
        let a = sample_paths(&f, &start, 20, 15, 3, 1).unwrap();
        let b = sample_paths(&f, &start, 20, 15, 3, 4).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.solenoid_residual(f.map()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn degenerate_kernel_is_deterministic() {
        let map = Arc::new(BranchMap::<f64>::doubling());
        let r = TransferOperator::new(map, Arc::new(|y: f64| if y < 0.5 { 1.0 } else { 0.0 }), "left").unwrap();
        let p = sample_path(&riesz_family(&r), &Start::Point(0.8), 5, 1, 0).unwrap();
        let expect = [0.8, 0.4, 0.2, 0.1, 0.05, 0.025];
        assert!(p.chain.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn one_as_test_function_is_exact() {
        let f = riesz_family(&TransferOperator::<f64>::doubling_half());
        let paths = sample_paths(&f, &Start::Histogram(vec![1.0; 8]), 200, 5, 9, 1).unwrap();
        let r = markov_property_test(&f, &|_| 1.0, &paths, 16);
        assert!(r.bins.iter().all(|b| b.empirical == 1.0) && r.max_z == 0.0);
    }

    #[test]
    fn fibered_operator_examples() {
        let n = 8;
        let mu = vec![1.0 / n as f64; n];
        let single = FiberedOperator::new((0..n).collect(), mu.clone(), vec![1.0; n]).unwrap();
        let h: Vec<f64> = (0..n).map(|i| i as f64).collect();
        assert_eq!(single.apply(&h), h);
        let one = FiberedOperator::conditional_expectation(vec![0; n], mu.clone()).unwrap();
        assert!(one.apply(&h).iter().all(|v| (v - 3.5).abs() < 1e-15));
        assert!(one.radon_nikodym_residual() < 1e-15);
        assert!(matches!(FiberedOperator::new(vec![0, 2, 0], vec![1.0; 3], vec![1.0; 3]), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn parry_doubling_lebesgue() {
        let pj = parry_jacobian(&BranchMap::<f64>::doubling(), &Measure::uniform_histogram(64)).unwrap();
        assert!(pj.jacobian.values().iter().all(|j| (j - 2.0).abs() < 1e-12));
        assert!(pj.theta.iter().all(|t| (t - 1.0).abs() < 1e-12));
        assert!(pj.residual < 1e-12);
    }
}

//! IFS measures `μ = Σ p_k μ∘τ_k⁻¹` on the inverse branches of a
//! full-branch map.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::dynamics::{BranchCount, BranchMap, SymbolWord};
use crate::error::{Error, Result};
use crate::interval::{Grid, Interval};
use crate::measures::Measure;
use crate::numeric::{gauss_legendre, integrate};
use crate::scalar::{count, lit, to_f64, Scalar};

pub const CYLINDER_LIMIT: u128 = 10_000_000;

/// Branch probabilities indexed by branch symbol. A truncated vector
/// records the mass of the omitted symbols in `tail`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector<T> {
    p: Vec<T>,
    first_symbol: usize,
    tail: T,
}

impl<T: Scalar> ProbabilityVector<T> {
    /// Finite vector; entries must be nonnegative and sum to 1 within 1e-12.
    pub fn new(p: Vec<T>, first_symbol: usize) -> Result<Self> {
        Self::truncated(p, first_symbol, T::zero())
    }

    pub fn truncated(p: Vec<T>, first_symbol: usize, tail: T) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidArgument("probability vector is empty".into()));
        }
        if let Some(i) = p.iter().position(|x| !(*x >= T::zero())) {
            return Err(Error::InvalidArgument(format!("p[{i}] = {} is negative", p[i])));
        }
        let s: T = p.iter().copied().sum();
        let tol = crate::transferop::arith_tol::<T>(1e-12);
        if (s + tail - T::one()).abs() > tol || tail < T::zero() {
            return Err(Error::InvalidArgument(format!("probabilities sum to {s} with tail {tail}")));
        }
        Ok(ProbabilityVector { p, first_symbol, tail })
    }

    /// Uniform vector over the branches of a finite map.
    pub fn uniform(map: &BranchMap<T>) -> Result<Self> {
        let n = map.len();
        Self::new(vec![T::one() / count::<T>(n); n], map.first_symbol())
    }

    /// `p_k = μ₀(J_k)` for the Gauss branches `1..=k_max`.
    pub fn gauss_mu0(k_max: usize) -> Result<Self> {
        let mu0 = Measure::<T>::gauss_mu0();
        let p: Vec<T> = (1..=k_max)
            .map(|k| mu0.mass_between(T::one() / count::<T>(k + 1), T::one() / count::<T>(k)))
            .collect();
        let tail = mu0.mass_between(T::zero(), T::one() / count::<T>(k_max + 1));
        Self::truncated(p, 1, tail)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn first_symbol(&self) -> usize {
        self.first_symbol
    }

    pub fn tail(&self) -> T {
        self.tail
    }

    pub fn values(&self) -> &[T] {
        &self.p
    }

    pub fn symbols(&self) -> std::ops::Range<usize> {
        self.first_symbol..self.first_symbol + self.p.len()
    }

    pub fn get(&self, symbol: usize) -> T {
        symbol
            .checked_sub(self.first_symbol)
            .and_then(|i| self.p.get(i).copied())
            .unwrap_or(T::zero())
    }

    pub fn sum(&self) -> T {
        self.p.iter().copied().sum()
    }

    pub fn word_mass(&self, w: &SymbolWord) -> T {
        w.symbols().iter().map(|&s| self.get(s)).fold(T::one(), |a, b| a * b)
    }

    fn check_map(&self, map: &BranchMap<T>) -> Result<()> {
        if !map.is_full_branch() {
            return Err(Error::InvalidArgument("IFS measures need a full-branch map".into()));
        }
        if self.first_symbol != map.first_symbol() || self.p.len() > map.len() {
            return Err(Error::InvalidArgument(format!(
                "probability vector covers symbols {:?} but the map has {}..{}",
                self.symbols(),
                map.first_symbol(),
                map.first_symbol() + map.len()
            )));
        }
        if matches!(map.count(), BranchCount::Finite(_)) && self.p.len() != map.len() {
            return Err(Error::InvalidArgument("finite maps need one probability per branch".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder<T> {
    pub word: SymbolWord,
    pub mass: T,
    /// `τ_w(x*)`, image of the barycentre of the averaged map.
    pub anchor: T,
    pub interval: Interval<T>,
}

#[derive(Clone, Debug)]
pub enum Representation<T> {
    /// `levels[d]` holds every word of length `d`, in lexicographic order.
    CylinderTable { levels: Vec<Vec<Cylinder<T>>> },
    Samples { points: Vec<T>, seed: u64, burn_in: usize },
}

#[derive(Clone, Debug)]
pub struct IfsMeasure<T> {
    map: Arc<BranchMap<T>>,
    p: ProbabilityVector<T>,
    repr: Representation<T>,
}

/// Fixed point of `x ↦ Σ p_k τ_k(x) / Σ p_k`, which is the mean of the
/// IFS measure when the branches are affine.
pub fn barycentre<T: Scalar>(map: &BranchMap<T>, p: &ProbabilityVector<T>) -> T {
    let s = p.sum();
    let mut x = lit::<T>(0.5);
    for _ in 0..200 {
        let next = p
            .symbols()
            .map(|k| p.get(k) * map.branch(k).map(|b| b.inverse(x)).unwrap_or(x))
            .sum::<T>()
            / s;
        if (next - x).abs() <= T::epsilon() {
            return next;
        }
        x = next;
    }
    x
}

/// Cylinder table of `μ_p` down to `depth`, with `mass(w) = Π p_{w_i}`.
pub fn ifs_measure_cylinders<T: Scalar>(
    map: Arc<BranchMap<T>>,
    p: ProbabilityVector<T>,
    depth: usize,
) -> Result<IfsMeasure<T>> {
    p.check_map(&map)?;
    let k = p.len() as u128;
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(k);
    }
    if total > CYLINDER_LIMIT {
        return Err(Error::SizeLimit { cylinders: total, limit: CYLINDER_LIMIT });
    }
    let xstar = barycentre(&map, &p);
    let mut levels = vec![vec![Cylinder { word: SymbolWord::empty(), mass: T::one(), anchor: xstar, interval: Interval::unit() }]];
    for _ in 0..depth {
        let prev = levels.last().unwrap();
        let mut next = Vec::with_capacity(prev.len() * p.len());
        for s in p.symbols() {
            let b = map.branch(s).expect("checked");
            let ps = p.get(s);
            for c in prev {
                let mut word = Vec::with_capacity(c.word.len() + 1);
                word.push(s);
                word.extend_from_slice(c.word.symbols());
                next.push(Cylinder {
                    word: SymbolWord::new(word),
                    mass: ps * c.mass,
                    anchor: b.inverse(c.anchor),
                    interval: c.interval.map_monotone(|x| b.inverse(x), b.is_increasing()),
                });
            }
        }
        levels.push(next);
    }
    Ok(IfsMeasure { map, p, repr: Representation::CylinderTable { levels } })
}

/// Chaos game: `x ← τ_K(x)` with `K ~ p`, from `x₀ = ½`.
pub fn chaos_game<T: Scalar>(
    map: Arc<BranchMap<T>>,
    p: ProbabilityVector<T>,
    n_samples: usize,
    burn_in: usize,
    seed: u64,
) -> Result<IfsMeasure<T>> {
    p.check_map(&map)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let symbols = chaos_symbols(&p, n_samples + burn_in, seed);
    let mut x = lit::<T>(0.5);
    let mut points = Vec::with_capacity(n_samples);
    for (t, s) in symbols.into_iter().enumerate() {
        x = map.branch(s).expect("checked").inverse(x);
        if t >= burn_in {
            points.push(x);
        }
    }
    Ok(IfsMeasure { map, p, repr: Representation::Samples { points, seed, burn_in } })
}

/// The branch sequence the chaos game draws for a seed.
pub fn chaos_symbols<T: Scalar>(p: &ProbabilityVector<T>, n: usize, seed: u64) -> Vec<usize> {
    let s = to_f64(p.sum());
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for v in p.values() {
        acc += to_f64(*v) / s;
        cdf.push(acc);
    }
    let last = cdf.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let i = cdf.partition_point(|c| *c <= u).min(last);
            // skip zero-probability symbols reached only by round-off
            let i = (i..=last).find(|&j| to_f64(p.values()[j]) > 0.0).unwrap_or(i);
            p.first_symbol() + i
        })
        .collect()
}

impl<T: Scalar> IfsMeasure<T> {
    pub fn map(&self) -> &Arc<BranchMap<T>> {
        &self.map
    }

    pub fn probabilities(&self) -> &ProbabilityVector<T> {
        &self.p
    }

    pub fn representation(&self) -> &Representation<T> {
        &self.repr
    }

    pub fn samples(&self) -> Option<&[T]> {
        match &self.repr {
            Representation::Samples { points, .. } => Some(points),
            _ => None,
        }
    }

    pub fn depth(&self) -> Option<usize> {
        match &self.repr {
            Representation::CylinderTable { levels } => Some(levels.len() - 1),
            _ => None,
        }
    }

    pub fn level(&self, d: usize) -> Option<&[Cylinder<T>]> {
        match &self.repr {
            Representation::CylinderTable { levels } => levels.get(d).map(|v| v.as_slice()),
            _ => None,
        }
    }

    /// Mass of the cylinder `w` in the table, or the empirical frequency
    /// of samples in `decode(w)`.
    pub fn cylinder_mass(&self, w: &SymbolWord) -> Result<T> {
        match &self.repr {
            Representation::CylinderTable { levels } => {
                if w.len() >= levels.len() {
                    return Err(Error::InvalidArgument(format!("word {w} is deeper than the table")));
                }
                Ok(self.p.word_mass(w))
            }
            Representation::Samples { points, .. } => {
                let iv = self.map.decode(w)?;
                let hits = points.iter().filter(|x| iv.contains(**x)).count();
                Ok(count::<T>(hits) / count::<T>(points.len()))
            }
        }
    }

    /// `max_w |mass(w)·Σp - Σ_k mass(w·k)|` over the table.
    pub fn consistency_residual(&self) -> T {
        let Representation::CylinderTable { levels } = &self.repr else { return T::zero() };
        let s = self.p.sum();
        let mut worst = T::zero();
        for d in 0..levels.len() - 1 {
            let index: std::collections::HashMap<&[usize], usize> =
                levels[d].iter().enumerate().map(|(i, c)| (c.word.symbols(), i)).collect();
            let mut sums = vec![T::zero(); levels[d].len()];
            for c in &levels[d + 1] {
                sums[index[&c.word.symbols()[..d]]] += c.mass;
            }
            for (q, t) in levels[d].iter().zip(sums) {
                worst = worst.max((q.mass * s - t).abs());
            }
        }
        worst
    }

    /// Cell masses on an `n`-cell grid. Table masses are spread uniformly
    /// over their deepest cylinders; samples are binned.
    pub fn to_histogram(&self, n: usize) -> Vec<T> {
        match &self.repr {
            Representation::CylinderTable { levels } => spread(levels.last().unwrap(), n),
            Representation::Samples { points, .. } => {
                let g = Grid::new(n);
                let mut out = vec![T::zero(); n];
                let w = T::one() / count::<T>(points.len());
                for x in points {
                    out[g.locate(*x)] += w;
                }
                out
            }
        }
    }

    /// Wasserstein-1 distance between the depth-`m` table and its
    /// pushforward under `σ` (which is the depth-`m-1` table rescaled by
    /// `Σp`), computed from CDFs on `n` cells. Returns `(distance, bound)`
    /// with bound `max diam(depth m-1) + 1/n`.
    pub fn invariance_residual(&self, n: usize) -> Result<(T, T)> {
        let Representation::CylinderTable { levels } = &self.repr else {
            return Err(Error::InvalidArgument("invariance_residual needs a cylinder table".into()));
        };
        if levels.len() < 2 {
            return Err(Error::InvalidArgument("table needs depth ≥ 1".into()));
        }
        let m = levels.len() - 1;
        let a = spread(&levels[m], n);
        let s = self.p.sum();
        let b: Vec<T> = spread(&levels[m - 1], n).into_iter().map(|x| x * s).collect();
        let h = T::one() / count::<T>(n);
        let (mut ca, mut cb, mut w1) = (T::zero(), T::zero(), T::zero());
        for i in 0..n {
            ca += a[i];
            cb += b[i];
            w1 += (ca - cb).abs() * h;
        }
        let diam = levels[m - 1].iter().fold(T::zero(), |d, c| d.max(c.interval.length()));
        Ok((w1, diam + h + lit(1e-10)))
    }

    /// JSON tree `{word, mass, anchor, children}`.
    pub fn cylinder_json(&self) -> Result<Value> {
        let Representation::CylinderTable { levels } = &self.repr else {
            return Err(Error::InvalidArgument("not a cylinder table".into()));
        };
        fn node<T: Scalar>(levels: &[Vec<Cylinder<T>>], d: usize, idx: usize, kids: usize) -> Value {
            let c = &levels[d][idx];
            let children: Vec<Value> = if d + 1 < levels.len() {
                // in level d+1 the word s·w sits at s_index·|level d| + idx
                (0..kids).map(|s| node(levels, d + 1, s * levels[d].len() + idx, kids)).collect()
            } else {
                Vec::new()
            };
            json!({
                "word": c.word.symbols(),
                "mass": to_f64(c.mass),
                "interval": [to_f64(c.interval.lo), to_f64(c.interval.hi)],
                "children": children,
            })
        }
        Ok(node(levels, 0, 0, self.p.len()))
    }

    /// Little-endian `f64` sample bytes plus a manifest.
    pub fn sample_export(&self) -> Result<(Vec<u8>, Value)> {
        let Representation::Samples { points, seed, burn_in } = &self.repr else {
            return Err(Error::InvalidArgument("not a sample representation".into()));
        };
        let mut bytes = Vec::with_capacity(points.len() * 8);
        for x in points {
            bytes.extend_from_slice(&to_f64(*x).to_le_bytes());
        }
        let manifest = json!({
            "seed": seed,
            "burn_in": burn_in,
            "count": points.len(),
            "map": self.map.label(),
            "p": self.p.values().iter().map(|v| to_f64(*v)).collect::<Vec<_>>(),
            "dtype": "f64-le",
        });
        Ok((bytes, manifest))
    }
}

fn spread<T: Scalar>(cyl: &[Cylinder<T>], n: usize) -> Vec<T> {
    let g = Grid::new(n);
    let mut out = vec![T::zero(); n];
    for c in cyl {
        let (lo, hi) = (c.interval.lo, c.interval.hi);
        let len = hi - lo;
        if len <= T::zero() {
            out[g.locate(lo)] += c.mass;
            continue;
        }
        for i in g.span(lo, hi) {
            out[i] += c.mass * g.cell::<T>(i).overlap(lo, hi) / len;
        }
    }
    out
}

/// Measures that can be integrated over subintervals.
pub trait Integrable<T: Scalar> {
    /// `∫_I f dμ`.
    fn integral_over(&self, f: &dyn Fn(T) -> T, iv: &Interval<T>) -> T;
    fn mass_over(&self, iv: &Interval<T>) -> T;
}

impl<T: Scalar> Integrable<T> for Measure<T> {
    fn integral_over(&self, f: &dyn Fn(T) -> T, iv: &Interval<T>) -> T {
        match self {
            Measure::Histogram(c) => {
                let g = Grid::new(c.len());
                let n = count::<T>(c.len());
                g.span(iv.lo, iv.hi)
                    .filter_map(|i| g.cell::<T>(i).clip(iv.lo, iv.hi).map(|(a, b)| c[i] * n * gauss_legendre(f, a, b)))
                    .sum()
            }
            Measure::Atomic(a) => a.iter().filter(|(x, _)| iv.contains(*x)).map(|(x, m)| *m * f(*x)).sum(),
            Measure::ClosedForm(_) => {
                let d = |x: T| f(x) * self.density(x).unwrap();
                integrate(&d, iv.lo, iv.hi, lit(1e-14))
            }
        }
    }

    fn mass_over(&self, iv: &Interval<T>) -> T {
        self.mass_of(iv)
    }
}

impl<T: Scalar> Integrable<T> for IfsMeasure<T> {
    fn integral_over(&self, f: &dyn Fn(T) -> T, iv: &Interval<T>) -> T {
        match &self.repr {
            Representation::CylinderTable { levels } => levels
                .last()
                .unwrap()
                .iter()
                .filter(|c| iv.contains(c.anchor))
                .map(|c| c.mass * f(c.anchor))
                .sum(),
            Representation::Samples { points, .. } => {
                points.iter().filter(|x| iv.contains(**x)).map(|x| f(*x)).sum::<T>() / count::<T>(points.len())
            }
        }
    }

    fn mass_over(&self, iv: &Interval<T>) -> T {
        match &self.repr {
            Representation::CylinderTable { levels } => levels
                .last()
                .unwrap()
                .iter()
                .filter_map(|c| {
                    let len = c.interval.length();
                    let o = c.interval.overlap(iv.lo, iv.hi);
                    (o > T::zero()).then(|| c.mass * o / len)
                })
                .sum(),
            Representation::Samples { points, .. } => {
                count::<T>(points.iter().filter(|x| iv.contains(**x)).count()) / count::<T>(points.len())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PkEstimate<T> {
    /// `∫_{J_k} σ dμ / ∫ x dμ`.
    pub ratio: T,
    /// `μ(J_k)`.
    pub direct: T,
}

/// Both expressions for `p_k` of a `σ`-invariant measure.
pub fn extract_pk<T: Scalar>(map: &BranchMap<T>, mu: &dyn Integrable<T>, k: usize) -> Result<PkEstimate<T>> {
    let b = map
        .branch(k)
        .ok_or_else(|| Error::InvalidArgument(format!("{k} is not a branch of '{}'", map.label())))?;
    let mean = mu.integral_over(&|x| x, &Interval::unit());
    if !(mean.abs() > T::epsilon()) {
        return Err(Error::DegenerateMeasure("∫ x dμ = 0".into()));
    }
    let num = mu.integral_over(&|y| b.forward(y), b.domain());
    Ok(PkEstimate { ratio: num / mean, direct: mu.mass_over(b.domain()) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentRow<T> {
    pub k: usize,
    pub m: u32,
    pub lhs: T,
    pub rhs: T,
    pub relative: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport<T> {
    pub rows: Vec<MomentRow<T>>,
    pub max_violation: T,
    pub worst: Option<(usize, u32)>,
    /// Largest `|p_k - ratio_k|` against the supplied vector.
    pub p_mismatch: T,
}

/// `(∫x dμ) ∫_{J_k} σ^m dμ = (∫x^m dμ) ∫_{J_k} σ dμ` for the symbols of
/// `p` and `1 ≤ m ≤ m_max`.
pub fn moment_invariance_test<T: Scalar>(
    map: &BranchMap<T>,
    mu: &dyn Integrable<T>,
    p: &ProbabilityVector<T>,
    m_max: u32,
) -> Result<MomentReport<T>> {
    let unit = Interval::unit();
    let m1 = mu.integral_over(&|x| x, &unit);
    let mut rows = Vec::new();
    let mut worst = None;
    let mut max_violation = T::zero();
    let mut p_mismatch = T::zero();
    for k in p.symbols() {
        let b = map.branch(k).ok_or_else(|| Error::InvalidArgument(format!("{k} is not a branch")))?;
        let a1 = mu.integral_over(&|y| b.forward(y), b.domain());
        if m1.abs() > T::zero() {
            p_mismatch = p_mismatch.max((a1 / m1 - p.get(k)).abs());
        }
        for m in 1..=m_max {
            let mi = m as i32;
            let am = mu.integral_over(&|y| b.forward(y).powi(mi), b.domain());
            let xm = mu.integral_over(&|x| x.powi(mi), &unit);
            let (lhs, rhs) = (m1 * am, xm * a1);
            let scale = lhs.abs().max(rhs.abs());
            let relative = if scale > T::zero() { (lhs - rhs).abs() / scale } else { T::zero() };
            if relative > max_violation {
                max_violation = relative;
                worst = Some((k, m));
            }
            rows.push(MomentRow { k, m, lhs, rhs, relative });
        }
    }
    Ok(MomentReport { rows, max_violation, worst, p_mismatch })
}

#[derive(Clone, Debug, PartialEq)]
pub enum IfsVerdict<T> {
    IsIfs { p: Vec<T> },
    NotIfs { witness: SymbolWord, measured: T, product: T },
}

/// Sets `p_k = μ(J_k)` and checks `μ(decode(w)) = Π p_{w_i}` for all words
/// to `depth`, in lexicographic order per length. The scan stops at the
/// first violation; reaching [`CYLINDER_LIMIT`] words without a verdict
/// is an error.
pub fn ifs_test<T: Scalar>(map: &BranchMap<T>, mu: &dyn Integrable<T>, depth: usize, tol: T) -> Result<IfsVerdict<T>> {
    let symbols: Vec<usize> = map.branches().iter().map(|b| b.symbol()).collect();
    let p: Vec<T> = map.branches().iter().map(|b| mu.mass_over(b.domain())).collect();
    let n = symbols.len() as u128;
    let total = (1..=depth as u32).fold(0u128, |acc, d| acc.saturating_add(n.saturating_pow(d)));
    let mut scanned = 0u128;
    for d in 1..=depth {
        let mut idx = vec![0usize; d];
        loop {
            scanned += 1;
            if scanned > CYLINDER_LIMIT {
                return Err(Error::SizeLimit { cylinders: total, limit: CYLINDER_LIMIT });
            }
            let word = SymbolWord::new(idx.iter().map(|&i| symbols[i]).collect());
            let product = idx.iter().map(|&i| p[i]).fold(T::one(), |a, b| a * b);
            let measured = mu.mass_over(&map.decode(&word)?);
            if (measured - product).abs() > tol {
                return Ok(IfsVerdict::NotIfs { witness: word, measured, product });
            }
            // odometer increment, last position fastest
            let mut pos = d;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < symbols.len() {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX {
                break;
            }
        }
    }
    Ok(IfsVerdict::IsIfs { p })
}

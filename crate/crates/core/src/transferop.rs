//! Weighted transfer operators `R f(x) = Σ_{y ∈ σ⁻¹x} W(y) f(y)`.

use std::sync::Arc;

use crate::dynamics::{BranchCount, BranchMap, PointMap};
use crate::error::{Error, Result};
use crate::interval::Grid;
use crate::numeric::weyl_samples;
use crate::scalar::{count, lit, to_f64, Scalar};

/// Tolerance floor for identities that are exact in real arithmetic.
pub fn arith_tol<T: Scalar>(base: f64) -> T {
    lit::<T>(base).max(T::epsilon() * lit(64.0))
}

const NORMALIZATION_PROBES: usize = 256;

/// Transfer operator defined by a weight on preimage points.
#[derive(Clone)]
pub struct TransferOperator<T> {
    map: Arc<BranchMap<T>>,
    weight: PointMap<T>,
    label: String,
    tail_bound: T,
    normalized: bool,
}

impl<T: std::fmt::Debug> std::fmt::Debug for TransferOperator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransferOperator")
            .field("map", &self.map)
            .field("weight", &self.label)
            .field("tail_bound", &self.tail_bound)
            .field("normalized", &self.normalized)
            .finish()
    }
}

impl<T: Scalar> TransferOperator<T> {
    /// Wraps a weight, checking `W ≥ 0` at quasi-random preimage points.
    /// For truncated countable maps the tail contribution to `R(1)` must be
    /// supplied through [`with_tail_bound`](Self::with_tail_bound).
    pub fn new(map: Arc<BranchMap<T>>, weight: PointMap<T>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        for x in weyl_samples::<T>(NORMALIZATION_PROBES) {
            for (_, y) in map.preimages(x) {
                let w = weight(y);
                if !(w >= T::zero()) {
                    return Err(Error::InvalidArgument(format!(
                        "weight '{label}' is negative or NaN at y = {y} ({w})"
                    )));
                }
            }
        }
        let mut op = TransferOperator { map, weight, label, tail_bound: T::zero(), normalized: false };
        op.normalized = op.normalization_residual(NORMALIZATION_PROBES) <= op.normalization_tol();
        Ok(op)
    }

    /// Sets the sup bound on `Σ_{k > k_max} W(τ_k x)` and re-evaluates the
    /// normalized flag.
    pub fn with_tail_bound(mut self, bound: T) -> Self {
        self.tail_bound = bound;
        self.normalized = self.normalization_residual(NORMALIZATION_PROBES) <= self.normalization_tol();
        self
    }

    /// `W(y) = 1/#σ⁻¹(σ y)` on a finite map (`1/N` for full branches).
    pub fn uniform(map: Arc<BranchMap<T>>) -> Result<Self> {
        if !matches!(map.count(), BranchCount::Finite(_)) {
            return Err(Error::InvalidArgument("uniform weight needs a finite map".into()));
        }
        let m = map.clone();
        let weight: PointMap<T> = Arc::new(move |y: T| match m.sigma(y) {
            Ok(x) => T::one() / count::<T>(m.preimages(x).count().max(1)),
            Err(_) => T::zero(),
        });
        Self::new(map, weight, "uniform")
    }

    /// Doubling map with `W ≡ ½`.
    pub fn doubling_half() -> Self {
        Self::uniform(Arc::new(BranchMap::doubling())).expect("valid")
    }

    /// Doubling map with `W(y) = cos²(πy)`.
    pub fn doubling_cos2() -> Self {
        let pi = T::PI();
        Self::new(
            Arc::new(BranchMap::doubling()),
            Arc::new(move |y: T| {
                let c = (pi * y).cos();
                c * c
            }),
            "cos2",
        )
        .expect("valid")
    }

    /// Frobenius-Perron operator of Lebesgue measure, `W(y) = 1/|σ'(y)|`.
    /// For the truncated Gauss map the tail bound is `Σ_{k>K} (k+x)⁻² ≤ 1/K`.
    pub fn frobenius_perron(map: Arc<BranchMap<T>>) -> Result<Self> {
        if map.branches().iter().any(|b| !b.has_slope()) {
            return Err(Error::InvalidArgument("frobenius_perron needs branch slopes".into()));
        }
        let m = map.clone();
        let weight: PointMap<T> = Arc::new(move |y: T| match m.locate(y) {
            Some(b) => T::one() / b.slope(y).unwrap().abs(),
            None => T::zero(),
        });
        let tail = match map.count() {
            BranchCount::Finite(_) => T::zero(),
            BranchCount::Countable { k_max, .. } => T::one() / count::<T>(k_max),
        };
        Ok(Self::new(map, weight, "frobenius-perron")?.with_tail_bound(tail))
    }

    /// Gauss-map operator normalized with respect to `dx/((1+x) ln 2)`:
    /// `W(y) = y²(1+σy)/(1+y)`. Its tail is `(1+x)/(K+1+x) ≤ 2/(K+1)`.
    pub fn gauss_invariant(k_max: usize) -> Result<Self> {
        let map = Arc::new(BranchMap::<T>::gauss(k_max)?);
        let m = map.clone();
        let weight: PointMap<T> = Arc::new(move |y: T| match m.locate(y) {
            Some(b) => y * y * (T::one() + b.forward(y)) / (T::one() + y),
            None => T::zero(),
        });
        let tail = lit::<T>(2.0) / count::<T>(k_max + 1);
        Ok(Self::new(map, weight, "gauss-mu0")?.with_tail_bound(tail))
    }

    pub fn map(&self) -> &Arc<BranchMap<T>> {
        &self.map
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn weight(&self, y: T) -> T {
        (self.weight)(y)
    }

    pub fn weight_fn(&self) -> &PointMap<T> {
        &self.weight
    }

    /// `R f(x)`.
    pub fn apply(&self, f: &dyn Fn(T) -> T, x: T) -> T {
        let mut acc = T::zero();
        for (_, y) in self.map.preimages(x) {
            acc += (self.weight)(y) * f(y);
        }
        acc
    }

    pub fn apply_one(&self, x: T) -> T {
        self.apply(&|_| T::one(), x)
    }

    /// `(τ_k x, W(τ_k x))` for every preimage, in branch order.
    pub fn kernel_atoms(&self, x: T) -> Vec<(usize, T, T)> {
        self.map.preimages(x).map(|(b, y)| (b.symbol(), y, (self.weight)(y))).collect()
    }

    fn normalization_tol(&self) -> T {
        arith_tol::<T>(1e-10) + self.tail_bound
    }

    /// `max |R(1)(x) - 1|` over `samples` quasi-random points.
    pub fn normalization_residual(&self, samples: usize) -> T {
        weyl_samples::<T>(samples)
            .into_iter()
            .fold(T::zero(), |m, x| m.max((self.apply_one(x) - T::one()).abs()))
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NormalizationRequired { residual: to_f64(self.normalization_residual(NORMALIZATION_PROBES)) })
        }
    }

    /// `max |R((f∘σ)g)(x) - f(x) R(g)(x)|` over quasi-random `x`.
    pub fn check_pullout(&self, f: &dyn Fn(T) -> T, g: &dyn Fn(T) -> T, samples: usize) -> Result<T> {
        let mut worst = T::zero();
        for x in weyl_samples::<T>(samples) {
            worst = worst.max(self.pullout_residual_at(f, g, x)?);
        }
        Ok(worst)
    }

    pub fn pullout_residual_at(&self, f: &dyn Fn(T) -> T, g: &dyn Fn(T) -> T, x: T) -> Result<T> {
        let map = &self.map;
        let mut lhs = T::zero();
        for (b, y) in map.preimages(x) {
            lhs += (self.weight)(y) * f(b.forward(y)) * g(y);
        }
        let rhs = f(x) * self.apply(g, x);
        Ok((lhs - rhs).abs())
    }

    /// Operator product `self ∘ inner`, a transfer operator for
    /// `σ_self ∘ σ_inner` with weight `W_inner(y) · W_self(σ_inner y)`.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        let map = Arc::new(BranchMap::compose(&self.map, &inner.map)?);
        let (wo, wi, mi) = (self.weight.clone(), inner.weight.clone(), inner.map.clone());
        let weight: PointMap<T> = Arc::new(move |y: T| match mi.locate(y) {
            Some(b) => wi(y) * wo(b.forward(y)),
            None => T::zero(),
        });
        Self::new(map, weight, format!("{}∘{}", self.label, inner.label))
    }

    /// `a R₁ + b R₂` for operators over the same map (`a, b ≥ 0`).
    pub fn linear_combination(a: T, r1: &Self, b: T, r2: &Self) -> Result<Self> {
        if !Arc::ptr_eq(&r1.map, &r2.map) && r1.map.label() != r2.map.label() {
            return Err(Error::InvalidArgument("linear combination needs a common map".into()));
        }
        if a < T::zero() || b < T::zero() {
            return Err(Error::InvalidArgument("coefficients must be nonnegative".into()));
        }
        let (w1, w2) = (r1.weight.clone(), r2.weight.clone());
        let tail = a * r1.tail_bound + b * r2.tail_bound;
        Ok(Self::new(
            r1.map.clone(),
            Arc::new(move |y| a * w1(y) + b * w2(y)),
            format!("{a}·{}+{b}·{}", r1.label, r2.label),
        )?
        .with_tail_bound(tail))
    }

    /// Splits `f` into a part killed by `R` and a `σ⁻¹(B)`-measurable part.
    pub fn kernel_decompose<'a>(&'a self, f: &'a dyn Fn(T) -> T) -> Result<KernelDecomposition<'a, T>> {
        self.require_normalized()?;
        Ok(KernelDecomposition { op: self, f })
    }

    /// `E(f)(x) = R(f)(σ x)`.
    pub fn expectation(&self, f: &dyn Fn(T) -> T, x: T) -> Result<T> {
        self.require_normalized()?;
        self.expectation_unchecked(f, x)
    }

    fn expectation_unchecked(&self, f: &dyn Fn(T) -> T, x: T) -> Result<T> {
        let sx = self.map.sigma(x)?;
        Ok(self.apply(f, sx))
    }

    /// Doob transform `R_k(f) = R(fk)/k`, with weight `W(y) k(y) / k(σ y)`.
    pub fn doob(&self, k: PointMap<T>) -> Result<Self> {
        for x in weyl_samples::<T>(NORMALIZATION_PROBES) {
            for y in std::iter::once(x).chain(self.map.preimages(x).map(|(_, y)| y)) {
                let v = k(y);
                if !(v > T::zero()) {
                    return Err(Error::InvalidArgument(format!("doob: k({y}) = {v} is not positive")));
                }
            }
        }
        let (w, m, k2) = (self.weight.clone(), self.map.clone(), k.clone());
        let weight: PointMap<T> = Arc::new(move |y: T| match m.locate(y) {
            Some(b) => w(y) * k2(y) / k2(b.forward(y)),
            None => T::zero(),
        });
        let op = Self::new(self.map.clone(), weight, format!("doob({})", self.label))?;
        // the tail of R_k(1)(x) is R(k·tail)/k(x), bounded by sup k / inf k
        if self.tail_bound > T::zero() {
            let (lo, hi) = weyl_samples::<T>(NORMALIZATION_PROBES)
                .into_iter()
                .fold((T::infinity(), T::zero()), |(lo, hi), x| (lo.min(k(x)), hi.max(k(x))));
            Ok(op.with_tail_bound(self.tail_bound * hi / lo))
        } else {
            Ok(op)
        }
    }

    /// `max |R h - h|` over quasi-random points.
    pub fn harmonic_residual(&self, h: &dyn Fn(T) -> T, samples: usize) -> T {
        weyl_samples::<T>(samples)
            .into_iter()
            .fold(T::zero(), |m, x| m.max((self.apply(h, x) - h(x)).abs()))
    }

    /// Cocycle identities for a harmonic `h`, with
    /// `α_k(x) = h(x) h(σx) ⋯ h(σ^{k-1}x)`.
    ///
    /// `recursion` is `max |R(α_{j+1}) - h·α_j|` over `j < k`; this holds for
    /// every harmonic `h` and every depth. `power_gap` is
    /// `max |R(α_k) - h^k|`, which vanishes for `k ≤ 2` and for constant
    /// `h`, but not in general.
    pub fn cocycle_check(&self, h: &dyn Fn(T) -> T, k: usize, samples: usize) -> Result<CocycleReport<T>> {
        let hres = self.harmonic_residual(h, samples);
        if hres > lit::<T>(1e-8) + self.tail_bound {
            return Err(Error::Precondition(format!("h is not harmonic: max |Rh - h| = {:e}", to_f64(hres))));
        }
        let map = &self.map;
        let alpha = |x: T, j: usize| -> T {
            let mut acc = T::one();
            let mut cur = x;
            for i in 0..j {
                acc *= h(cur);
                if i + 1 < j {
                    cur = map.sigma(cur).unwrap_or(cur);
                }
            }
            acc
        };
        let mut recursion = T::zero();
        let mut power_gap = T::zero();
        for x in weyl_samples::<T>(samples) {
            for j in 0..k.max(1) {
                let r = self.apply(&|y| alpha(y, j + 1), x);
                recursion = recursion.max((r - h(x) * alpha(x, j)).abs());
            }
            let rk = self.apply(&|y| alpha(y, k), x);
            power_gap = power_gap.max((rk - h(x).powi(k as i32)).abs());
        }
        Ok(CocycleReport { harmonic_residual: hres, recursion_residual: recursion, power_gap })
    }

    /// Transports `self` along an invertible `T` with `T∘σ = σ'∘T`, giving
    /// `R' f = R(f∘T)∘T⁻¹` on `target`.
    pub fn conjugate(&self, t: PointMap<T>, t_inv: PointMap<T>, target: Arc<BranchMap<T>>) -> Result<Self> {
        let tol = arith_tol::<T>(1e-12) * lit(16.0);
        let mut inv_dev = T::zero();
        let mut deviation = T::zero();
        for x in weyl_samples::<T>(NORMALIZATION_PROBES) {
            inv_dev = inv_dev.max((t_inv(t(x)) - x).abs()).max((t(t_inv(x)) - x).abs());
            let lhs = t(self.map.sigma(x)?);
            let rhs = target.sigma(t(x)).map_err(|_| Error::NotConjugate { deviation: f64::INFINITY })?;
            deviation = deviation.max((lhs - rhs).abs());
        }
        if inv_dev > tol {
            return Err(Error::InvalidArgument(format!("T and T⁻¹ disagree by {:e}", to_f64(inv_dev))));
        }
        if deviation > tol {
            return Err(Error::NotConjugate { deviation: to_f64(deviation) });
        }
        let w = self.weight.clone();
        let op = Self::new(target, Arc::new(move |y| w(t_inv(y))), format!("conj({})", self.label))?;
        Ok(op.with_tail_bound(self.tail_bound))
    }

    /// Cell-level successor relation: `i → j` when `σ(cell i)` meets the
    /// interior of cell `j`.
    pub fn cell_successors(&self, n: usize) -> Vec<Vec<usize>> {
        cell_successors(&self.map, n)
    }

    /// Maximal decomposition of the `n`-cell grid into `σ`-invariant cell
    /// sets (weak components of the successor graph).
    pub fn invariant_components(&self, n: usize) -> Vec<Vec<usize>> {
        invariant_components(&self.map, n)
    }

    /// Restriction `R_A f = R(χ_A f)` to a `σ`-invariant union of cells.
    pub fn restrict(&self, cells: &[usize], n: usize) -> Result<RestrictedOperator<T>> {
        let mut member = vec![false; n];
        for &c in cells {
            if c >= n {
                return Err(Error::InvalidArgument(format!("cell {c} is outside the {n}-cell grid")));
            }
            member[c] = true;
        }
        let succ = self.cell_successors(n);
        let mut bad: Vec<usize> = (0..n)
            .filter(|&i| succ[i].iter().any(|&j| member[j] != member[i]))
            .collect();
        bad.dedup();
        if !bad.is_empty() {
            return Err(Error::InvariantSetViolation { cells: bad });
        }
        Ok(RestrictedOperator { op: self.clone(), grid: Grid::new(n), member })
    }
}

pub struct KernelDecomposition<'a, T> {
    op: &'a TransferOperator<T>,
    f: &'a dyn Fn(T) -> T,
}

impl<'a, T: Scalar> KernelDecomposition<'a, T> {
    /// `f̄(x) = R(f)(σ x)`.
    pub fn fbar(&self, x: T) -> Result<T> {
        self.op.expectation_unchecked(self.f, x)
    }

    /// `f₀ = f - f̄`.
    pub fn f0(&self, x: T) -> Result<T> {
        Ok((self.f)(x) - self.fbar(x)?)
    }

    /// `max |R f₀|` over quasi-random points.
    pub fn kernel_residual(&self, samples: usize) -> T {
        let f0 = |y: T| self.f0(y).unwrap_or(T::nan());
        weyl_samples::<T>(samples)
            .into_iter()
            .fold(T::zero(), |m, x| m.max(self.op.apply(&f0, x).abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CocycleReport<T> {
    pub harmonic_residual: T,
    pub recursion_residual: T,
    pub power_gap: T,
}

/// `R_A f = R(χ_A f)` on a union of grid cells invariant under `σ`.
#[derive(Clone, Debug)]
pub struct RestrictedOperator<T> {
    op: TransferOperator<T>,
    grid: Grid,
    member: Vec<bool>,
}

impl<T: Scalar> RestrictedOperator<T> {
    pub fn contains(&self, x: T) -> bool {
        self.member[self.grid.locate(x)]
    }

    pub fn cells(&self) -> Vec<usize> {
        (0..self.member.len()).filter(|&i| self.member[i]).collect()
    }

    pub fn operator(&self) -> &TransferOperator<T> {
        &self.op
    }

    pub fn apply(&self, f: &dyn Fn(T) -> T, x: T) -> T {
        self.op.apply(&|y| if self.contains(y) { f(y) } else { T::zero() }, x)
    }

    /// Quasi-random points of the restricted set.
    pub fn samples(&self, n: usize) -> Vec<T> {
        let mut out = weyl_samples::<T>(n * 4);
        out.retain(|&x| self.contains(x));
        out.truncate(n);
        out
    }

    pub fn check_pullout(&self, f: &dyn Fn(T) -> T, g: &dyn Fn(T) -> T, samples: usize) -> Result<T> {
        let mut worst = T::zero();
        let map = self.op.map();
        for x in self.samples(samples) {
            let lhs = self.apply(&|y| f(map.sigma(y).unwrap_or(T::nan())) * g(y), x);
            worst = worst.max((lhs - f(x) * self.apply(g, x)).abs());
        }
        Ok(worst)
    }

    pub fn normalization_residual(&self, samples: usize) -> T {
        self.samples(samples)
            .into_iter()
            .fold(T::zero(), |m, x| m.max((self.apply(&|_| T::one(), x) - T::one()).abs()))
    }
}

pub fn cell_successors<T: Scalar>(map: &BranchMap<T>, n: usize) -> Vec<Vec<usize>> {
    let grid = Grid::new(n);
    let mut succ = vec![Vec::new(); n];
    for b in map.branches() {
        let cells = grid.span(b.domain().lo, b.domain().hi);
        for i in cells {
            let c = grid.cell::<T>(i);
            let Some((lo, hi)) = c.clip(b.domain().lo, b.domain().hi) else { continue };
            let (a, z) = (b.forward(lo), b.forward(hi));
            let (a, z) = if a <= z { (a, z) } else { (z, a) };
            // shrink by a relative hair so touching endpoints are ignored
            let eps = (z - a) * lit(1e-9);
            succ[i].extend(grid.span(a + eps, z - eps));
        }
    }
    for s in &mut succ {
        s.sort_unstable();
        s.dedup();
    }
    succ
}

pub fn invariant_components<T: Scalar>(map: &BranchMap<T>, n: usize) -> Vec<Vec<usize>> {
    let succ = cell_successors(map, n);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (i, js) in succ.iter().enumerate() {
        for &j in js {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Values of a function at the `n` cell midpoints of `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionOnGrid<T> {
    values: Vec<T>,
}

impl<T: Scalar> FunctionOnGrid<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("grid function needs at least one cell".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid function values must be finite".into()));
        }
        Ok(FunctionOnGrid { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(Grid::new(n).midpoints::<T>().into_iter().map(f).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Piecewise-constant evaluation.
    pub fn eval(&self, x: T) -> T {
        self.values[Grid::new(self.n()).locate(x)]
    }

    pub fn midpoints(&self) -> Vec<T> {
        Grid::new(self.n()).midpoints()
    }
}

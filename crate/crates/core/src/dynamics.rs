//! Piecewise-monotone interval endomorphisms described by their branches.
//!
//! A [`BranchMap`] is a finite or (truncated) countable list of branches.
//! Each branch `k` carries a domain `J_k`, an image `I_k = σ(J_k)`, the
//! forward map `σ_k : J_k → I_k` and its inverse `τ_k : I_k → J_k`. The
//! doubling and Gauss maps are full-branch (`I_k = [0,1)`); the synthetic
//! control maps used by the Wold and restriction diagnostics are not.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::numeric::weyl_samples;
use crate::scalar::{count, lit, to_f64, Scalar};

pub type PointMap<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// One monotone injective piece of a map.
#[derive(Clone)]
pub struct Branch<T> {
    symbol: usize,
    domain: Interval<T>,
    image: Interval<T>,
    forward: PointMap<T>,
    inverse: PointMap<T>,
    slope: Option<PointMap<T>>,
    increasing: bool,
}

impl<T: Scalar> Branch<T> {
    pub fn new(
        symbol: usize,
        domain: Interval<T>,
        image: Interval<T>,
        forward: PointMap<T>,
        inverse: PointMap<T>,
    ) -> Self {
        let a = image.lo + image.length() * lit(0.25);
        let b = image.lo + image.length() * lit(0.75);
        let increasing = inverse(a) <= inverse(b);
        Branch { symbol, domain, image, forward, inverse, slope: None, increasing }
    }

    /// Attaches `|σ_k'(y)|`, needed by the Frobenius-Perron weight.
    pub fn with_slope(mut self, slope: PointMap<T>) -> Self {
        self.slope = Some(slope);
        self
    }

    pub fn symbol(&self) -> usize {
        self.symbol
    }

    pub fn domain(&self) -> &Interval<T> {
        &self.domain
    }

    pub fn image(&self) -> &Interval<T> {
        &self.image
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    /// `σ_k(y)`, clamped into the image so round-off never leaves it.
    pub fn forward(&self, y: T) -> T {
        let v = (self.forward)(y);
        let lo = self.image.lo;
        let hi = self.image.hi;
        if v < lo {
            lo
        } else if v > hi || (v == hi && !self.image.hi_closed) {
            hi - hi.abs().max(T::min_positive_value()) * T::epsilon()
        } else {
            v
        }
    }

    /// `τ_k(x)`.
    pub fn inverse(&self, x: T) -> T {
        (self.inverse)(x)
    }

    pub fn slope(&self, y: T) -> Option<T> {
        self.slope.as_ref().map(|s| s(y))
    }

    pub fn has_slope(&self) -> bool {
        self.slope.is_some()
    }

    pub fn is_full(&self) -> bool {
        self.image.lo == T::zero() && self.image.hi == T::one()
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Branch<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Branch")
            .field("symbol", &self.symbol)
            .field("domain", &self.domain)
            .field("image", &self.image)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchCount<T> {
    Finite(usize),
    /// A countable family truncated to `k_max` branches; the uncovered part
    /// of `[0,1)` has Lebesgue mass `tail_mass_bound`.
    Countable { k_max: usize, tail_mass_bound: T },
}

/// Finite word of branch symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolWord(Vec<usize>);

impl SymbolWord {
    pub fn new(symbols: Vec<usize>) -> Self {
        SymbolWord(symbols)
    }

    pub fn empty() -> Self {
        SymbolWord(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn prefix(&self, n: usize) -> SymbolWord {
        SymbolWord(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn push(&mut self, s: usize) {
        self.0.push(s);
    }

    pub fn extended(&self, s: usize) -> SymbolWord {
        let mut v = self.0.clone();
        v.push(s);
        SymbolWord(v)
    }
}

impl From<Vec<usize>> for SymbolWord {
    fn from(v: Vec<usize>) -> Self {
        SymbolWord(v)
    }
}

impl std::fmt::Display for SymbolWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Piecewise-injective endomorphism of `[0, 1)`.
#[derive(Clone)]
pub struct BranchMap<T> {
    label: String,
    branches: Vec<Branch<T>>,
    count: BranchCount<T>,
    tol: T,
    by_position: Vec<usize>,
}

impl<T: std::fmt::Debug> std::fmt::Debug for BranchMap<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BranchMap")
            .field("label", &self.label)
            .field("branches", &self.branches.len())
            .field("count", &self.count)
            .finish()
    }
}

fn default_tol<T: Scalar>() -> T {
    lit::<T>(1e-12).max(T::epsilon() * lit(64.0))
}

impl<T: Scalar> BranchMap<T> {
    /// Builds and validates a map. Branch symbols must be consecutive in
    /// list order. Validation checks that the domains are disjoint and tile
    /// `[0, 1]` (up to the tail for countable maps), that `σ_k ∘ τ_k = id`
    /// on quasi-random image points to `tol`, and that `τ_k(I_k) ⊆ J_k`.
    pub fn new(label: impl Into<String>, branches: Vec<Branch<T>>, count: BranchCount<T>, tol: T) -> Result<Self> {
        let label = label.into();
        if branches.is_empty() {
            return Err(Error::InvalidArgument(format!("map '{label}' has no branches")));
        }
        let first = branches[0].symbol;
        for (i, b) in branches.iter().enumerate() {
            if b.symbol != first + i {
                return Err(Error::InvalidArgument(format!(
                    "branch symbols must be consecutive; found {} at position {i}",
                    b.symbol
                )));
            }
            if !(b.domain.lo < b.domain.hi) || !(b.image.lo < b.image.hi) {
                return Err(Error::InvalidArgument(format!("branch {} has an empty domain or image", b.symbol)));
            }
        }
        let mut by_position: Vec<usize> = (0..branches.len()).collect();
        by_position.sort_by(|&a, &b| branches[a].domain.lo.partial_cmp(&branches[b].domain.lo).unwrap());

        let start = match count {
            BranchCount::Finite(_) => T::zero(),
            BranchCount::Countable { tail_mass_bound, .. } => tail_mass_bound,
        };
        let lowest = &branches[by_position[0]].domain;
        if (lowest.lo - start).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "branch domains start at {} but should start at {}",
                lowest.lo, start
            )));
        }
        for w in by_position.windows(2) {
            let (a, b) = (&branches[w[0]].domain, &branches[w[1]].domain);
            if (a.hi - b.lo).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "branch domains {:?} and {:?} overlap or leave a gap",
                    (a.lo, a.hi),
                    (b.lo, b.hi)
                )));
            }
        }
        let top = &branches[*by_position.last().unwrap()].domain;
        if (top.hi - T::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!("branch domains end at {} instead of 1", top.hi)));
        }

        let probes = if branches.len() > 256 { 8 } else { 64 };
        let unit = weyl_samples::<T>(probes);
        for b in &branches {
            for &u in &unit {
                let x = b.image.lo + b.image.length() * u;
                let y = b.inverse(x);
                if !b.domain.contains_approx(y, tol) {
                    return Err(Error::InvalidArgument(format!(
                        "inverse branch {} sends {} to {} outside its domain",
                        b.symbol, x, y
                    )));
                }
                let back = (b.forward)(y);
                if (back - x).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "branch {}: |σ(τ(x)) - x| = {:e} at x = {}",
                        b.symbol,
                        to_f64((back - x).abs()),
                        x
                    )));
                }
            }
        }
        Ok(BranchMap { label, branches, count, tol, by_position })
    }

    /// `σ(x) = 2x mod 1` with `τ₀(x) = x/2`, `τ₁(x) = (x+1)/2`.
    pub fn doubling() -> Self {
        Self::uniform_expanding("doubling", 2).expect("doubling map is valid")
    }

    /// `σ(x) = bx mod 1` with symbols `0..b`.
    pub fn uniform_expanding(label: &str, b: usize) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidArgument("expansion factor must be at least 2".into()));
        }
        let bb = count::<T>(b);
        let branches = (0..b)
            .map(|k| {
                let kk = count::<T>(k);
                Branch::new(
                    k,
                    Interval::half_open(kk / bb, (kk + T::one()) / bb),
                    Interval::unit(),
                    Arc::new(move |y: T| y * bb - kk),
                    Arc::new(move |x: T| (x + kk) / bb),
                )
                .with_slope(Arc::new(move |_| bb))
            })
            .collect();
        Self::new(label, branches, BranchCount::Finite(b), default_tol())
    }

    /// Gauss map `σ(x) = 1/x - ⌊1/x⌋` truncated to branches `1..=k_max`,
    /// `J_k = (1/(k+1), 1/k]`, `τ_k(x) = 1/(k+x)`.
    pub fn gauss(k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        let branches = (1..=k_max)
            .map(|k| {
                let kk = count::<T>(k);
                Branch::new(
                    k,
                    Interval::left_open(T::one() / (kk + T::one()), T::one() / kk),
                    Interval::unit(),
                    Arc::new(move |y: T| T::one() / y - kk),
                    Arc::new(move |x: T| T::one() / (kk + x)),
                )
                .with_slope(Arc::new(|y: T| T::one() / (y * y)))
            })
            .collect();
        let tail = T::one() / count::<T>(k_max + 1);
        let tol = default_tol::<T>().max(T::epsilon() * lit(8.0) * count::<T>(k_max + 2));
        Self::new("gauss", branches, BranchCount::Countable { k_max, tail_mass_bound: tail }, tol)
    }

    /// Two disjoint copies of the doubling map on `[0,½)` and `[½,1)`; the
    /// halves are invariant, so the map is not ergodic.
    pub fn two_component_doubling() -> Self {
        let q = lit::<T>(0.25);
        let h = lit::<T>(0.5);
        let mut branches = Vec::new();
        for (k, (base, off)) in [(T::zero(), T::zero()), (q, T::zero()), (h, h), (h + q, h)].into_iter().enumerate() {
            let two = lit::<T>(2.0);
            branches.push(
                Branch::new(
                    k,
                    Interval::half_open(base, base + q),
                    Interval::half_open(off, off + h),
                    Arc::new(move |y: T| off + two * (y - base)),
                    Arc::new(move |x: T| base + (x - off) / two),
                )
                .with_slope(Arc::new(move |_| two)),
            );
        }
        Self::new("two-component-doubling", branches, BranchCount::Finite(4), default_tol())
            .expect("two-component map is valid")
    }

    /// Translates cell `i` of the `n = perm.len()` grid onto cell `perm[i]`;
    /// an invertible map.
    pub fn cell_permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument("cell_permutation needs a permutation of 0..n".into()));
            }
            seen[p] = true;
        }
        let nn = count::<T>(n);
        let branches = perm
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let shift = (count::<T>(p) - count::<T>(i)) / nn;
                let lo = count::<T>(i) / nn;
                let ilo = count::<T>(p) / nn;
                Branch::new(
                    i,
                    Interval::half_open(lo, lo + T::one() / nn),
                    Interval::half_open(ilo, ilo + T::one() / nn),
                    Arc::new(move |y: T| y + shift),
                    Arc::new(move |x: T| x - shift),
                )
                .with_slope(Arc::new(|_| T::one()))
            })
            .collect();
        Self::new("cell-permutation", branches, BranchCount::Finite(n), default_tol())
    }

    /// `outer ∘ inner` (apply `inner` first). Both maps must be finite and
    /// full-branch; the composite branch `(j, k)` has symbol `j·|inner| + k`
    /// and inverse `τ^inner_k ∘ τ^outer_j`.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self> {
        let finite = |m: &Self| matches!(m.count, BranchCount::Finite(_)) && m.branches.iter().all(|b| b.is_full());
        if !finite(outer) || !finite(inner) {
            return Err(Error::InvalidArgument("compose supports finite full-branch maps only".into()));
        }
        let mut branches = Vec::new();
        let m = inner.branches.len();
        for (j, ob) in outer.branches.iter().enumerate() {
            for (k, ib) in inner.branches.iter().enumerate() {
                let (ob1, ib1, ob2, ib2) = (ob.clone(), ib.clone(), ob.clone(), ib.clone());
                // points of J^in_k whose inner image lies in J^out_j
                let dom = ob.domain.map_monotone(|z| ib.inverse(z), ib.increasing);
                let mut b = Branch::new(
                    j * m + k,
                    Interval::half_open(dom.lo, dom.hi),
                    Interval::unit(),
                    Arc::new(move |y: T| ob1.forward(ib1.forward(y))),
                    Arc::new(move |x: T| ib2.inverse(ob2.inverse(x))),
                );
                if ob.has_slope() && ib.has_slope() {
                    let (ob3, ib3) = (ob.clone(), ib.clone());
                    b = b.with_slope(Arc::new(move |y: T| {
                        ib3.slope(y).unwrap() * ob3.slope(ib3.forward(y)).unwrap()
                    }));
                }
                branches.push(b);
            }
        }
        // symbols must follow domain order only for lookup; keep symbol order
        let n = branches.len();
        Self::new(
            format!("{}∘{}", outer.label, inner.label),
            branches,
            BranchCount::Finite(n),
            outer.tol.max(inner.tol) * lit(4.0),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn branches(&self) -> &[Branch<T>] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn count(&self) -> BranchCount<T> {
        self.count
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn first_symbol(&self) -> usize {
        self.branches[0].symbol
    }

    pub fn tail_mass_bound(&self) -> T {
        match self.count {
            BranchCount::Finite(_) => T::zero(),
            BranchCount::Countable { tail_mass_bound, .. } => tail_mass_bound,
        }
    }

    pub fn is_full_branch(&self) -> bool {
        self.branches.iter().all(|b| b.is_full())
    }

    /// Lower end of the region covered by branch domains (0 unless truncated).
    pub fn covered_from(&self) -> T {
        self.tail_mass_bound()
    }

    pub fn branch(&self, symbol: usize) -> Option<&Branch<T>> {
        symbol.checked_sub(self.first_symbol()).and_then(|p| self.branches.get(p))
    }

    /// Branches sorted by the left end of their domains.
    pub fn branches_by_position(&self) -> impl Iterator<Item = &Branch<T>> {
        self.by_position.iter().map(move |&i| &self.branches[i])
    }

    /// Branch whose domain contains `x`.
    pub fn locate(&self, x: T) -> Option<&Branch<T>> {
        let idx = self.by_position.partition_point(|&i| self.branches[i].domain.lo < x);
        let lo = idx.saturating_sub(1);
        let hi = (idx + 1).min(self.by_position.len());
        (lo..hi).map(|p| &self.branches[self.by_position[p]]).find(|b| b.domain.contains(x))
    }

    pub fn sigma(&self, x: T) -> Result<T> {
        match self.locate(x) {
            Some(b) => Ok(b.forward(x)),
            None => Err(Error::OutsideDomain { x: to_f64(x) }),
        }
    }

    /// `(branch, τ_k(x))` for every branch whose image contains `x`.
    pub fn preimages(&self, x: T) -> impl Iterator<Item = (&Branch<T>, T)> {
        self.branches.iter().filter(move |b| b.image.contains(x)).map(move |b| (b, b.inverse(x)))
    }

    /// Symbolic itinerary `(k₁,…,k_m)` with `σ^{i-1}(x) ∈ J_{k_i}`.
    pub fn encode(&self, x: T, depth: usize) -> Result<SymbolWord> {
        let mut w = Vec::with_capacity(depth);
        let mut cur = x;
        for step in 0..depth {
            let b = self.locate(cur).ok_or(Error::TailEscape { step, x: to_f64(cur) })?;
            w.push(b.symbol);
            cur = b.forward(cur);
        }
        Ok(SymbolWord(w))
    }

    /// The cylinder `{x : σ^{i-1}(x) ∈ J_{k_i}}` as the interval
    /// `τ_{k₁}∘⋯∘τ_{k_m}(I_{k_m})`, intersected with images along the way.
    pub fn decode(&self, w: &SymbolWord) -> Result<Interval<T>> {
        let mut cur = Interval::unit();
        for &s in w.symbols().iter().rev() {
            let b = self
                .branch(s)
                .ok_or_else(|| Error::InvalidArgument(format!("symbol {s} is not a branch of '{}'", self.label)))?;
            let piece = cur
                .intersect(&b.image)
                .ok_or_else(|| Error::InvalidArgument(format!("word {w} is not admissible")))?;
            cur = piece.map_monotone(|x| b.inverse(x), b.increasing);
        }
        Ok(cur)
    }

    /// Lift `σ̃(x₀, x₁, …) = (σ(x₀), x₀, x₁, …)` on a truncated solenoid point.
    pub fn solenoid_lift(&self, p: &SolenoidPoint<T>) -> Result<SolenoidPoint<T>> {
        let base = p.base();
        let b = self.locate(base).ok_or(Error::OutsideDomain { x: to_f64(base) })?;
        let mut coords = Vec::with_capacity(p.coords.len() + 1);
        coords.push(b.forward(base));
        coords.extend_from_slice(&p.coords);
        let mut hist = Vec::with_capacity(p.history.len() + 1);
        hist.push(b.symbol);
        hist.extend_from_slice(p.history.symbols());
        Ok(SolenoidPoint { coords, history: SymbolWord(hist) })
    }
}

/// Truncated point `(x₀, x₁, …, x_m)` of the solenoid, with
/// `x_{i+1} = τ_{history[i]}(x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolenoidPoint<T> {
    coords: Vec<T>,
    history: SymbolWord,
}

impl<T: Scalar> SolenoidPoint<T> {
    pub fn new(base: T) -> Self {
        SolenoidPoint { coords: vec![base], history: SymbolWord::empty() }
    }

    /// Builds the backward orbit of `base` along `history`.
    pub fn from_history(map: &BranchMap<T>, base: T, history: SymbolWord) -> Result<Self> {
        let mut coords = vec![base];
        let mut cur = base;
        for &s in history.symbols() {
            let b = map
                .branch(s)
                .ok_or_else(|| Error::InvalidArgument(format!("symbol {s} is not a branch")))?;
            if !b.image.contains(cur) {
                return Err(Error::InvalidArgument(format!("{cur} is not in the image of branch {s}")));
            }
            cur = b.inverse(cur);
            coords.push(cur);
        }
        Ok(SolenoidPoint { coords, history })
    }

    pub fn base(&self) -> T {
        self.coords[0]
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn history(&self) -> &SymbolWord {
        &self.history
    }

    /// Truncated `σ̃⁻¹`: drops the newest coordinate.
    pub fn drop_newest(&self) -> Result<Self> {
        if self.history.is_empty() {
            return Err(Error::HistoryExhausted);
        }
        Ok(SolenoidPoint {
            coords: self.coords[1..].to_vec(),
            history: SymbolWord(self.history.symbols()[1..].to_vec()),
        })
    }

    /// `max_i |σ(x_{i+1}) - x_i|`.
    pub fn max_residual(&self, map: &BranchMap<T>) -> Result<T> {
        let mut worst = T::zero();
        for w in self.coords.windows(2) {
            worst = worst.max((map.sigma(w[1])? - w[0]).abs());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_branches() {
        let m = BranchMap::<f64>::doubling();
        assert_eq!(m.len(), 2);
        assert_eq!(m.branch(0).unwrap().inverse(0.6), 0.3);
        assert_eq!(m.sigma(0.3).unwrap(), 0.6);
        let y = m.branch(1).unwrap().inverse(0.6);
        assert_eq!(y, 0.8);
        assert!((m.sigma(y).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(m.locate(0.5).unwrap().symbol(), 1);
        assert_eq!(m.locate(0.0).unwrap().symbol(), 0);
    }

    #[test]
    fn gauss_branches() {
        let m = BranchMap::<f64>::gauss(50).unwrap();
        assert!((m.branch(2).unwrap().inverse(0.5) - 0.4).abs() < 1e-15);
        assert!((m.sigma(0.4).unwrap() - 0.5).abs() < 1e-15);
        let j1 = m.branch(1).unwrap().domain();
        assert_eq!((j1.lo, j1.hi, j1.lo_closed, j1.hi_closed), (0.5, 1.0, false, true));
        assert_eq!(m.locate(1.0).unwrap().symbol(), 1);
        assert_eq!(m.locate(0.5).unwrap().symbol(), 2);
        assert!((m.tail_mass_bound() - 1.0 / 51.0).abs() < 1e-15);
        assert!(matches!(BranchMap::<f64>::gauss(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn encode_examples() {
        let d = BranchMap::<f64>::doubling();
        assert_eq!(d.encode(0.3, 3).unwrap().symbols(), &[0, 1, 0]);
        let g = BranchMap::<f64>::gauss(100).unwrap();
        assert_eq!(g.encode(2f64.sqrt() - 1.0, 3).unwrap().symbols(), &[2, 2, 2]);
        assert_eq!(d.encode(0.7, 1).unwrap().symbols(), &[1]);
    }

    #[test]
    fn gauss_encode_reports_tail_escape_step() {
        let g = BranchMap::<f64>::gauss(5).unwrap();
        // 0.5 -> 0.0, which lies in the uncovered tail
        match g.encode(0.5, 3) {
            Err(Error::TailEscape { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected tail escape, got {other:?}"),
        }
        // 1/(7+0.3) lands in branch 7 > k_max
        assert!(matches!(g.encode(1.0 / 7.3, 1), Err(Error::TailEscape { step: 0, .. })));
    }

    #[test]
    fn decode_examples() {
        let d = BranchMap::<f64>::doubling();
        let iv = d.decode(&SymbolWord::new(vec![0, 1])).unwrap();
        assert_eq!((iv.lo, iv.hi), (0.25, 0.5));
        assert!(iv.lo_closed && !iv.hi_closed);
        let unit = d.decode(&SymbolWord::empty()).unwrap();
        assert_eq!((unit.lo, unit.hi), (0.0, 1.0));

        // oracle: compose 1/(1+1/(1+x)) at the ends 0 and 1
        let g = BranchMap::<f64>::gauss(10).unwrap();
        let compose = |x: f64| 1.0 / (1.0 + 1.0 / (1.0 + x));
        let (a, b) = (compose(0.0), compose(1.0));
        let iv = g.decode(&SymbolWord::new(vec![1, 1])).unwrap();
        assert!((iv.lo - a.min(b)).abs() < 1e-15 && (iv.hi - a.max(b)).abs() < 1e-15);
        assert!((iv.lo - 0.5).abs() < 1e-15 && (iv.hi - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn decode_rejects_bad_symbols() {
        let d = BranchMap::<f64>::doubling();
        assert!(d.decode(&SymbolWord::new(vec![2])).is_err());
        let t = BranchMap::<f64>::two_component_doubling();
        // branch 0 lives in [0,½); its image [0,½) cannot feed branch 2
        assert!(t.decode(&SymbolWord::new(vec![0, 2])).is_err());
        assert!(t.decode(&SymbolWord::new(vec![0, 1])).is_ok());
    }

    #[test]
    fn solenoid_lift_and_drop() {
        let d = BranchMap::<f64>::doubling();
        let p = SolenoidPoint::from_history(&d, 0.6, SymbolWord::new(vec![1])).unwrap();
        let q = d.solenoid_lift(&SolenoidPoint::new(0.3)).unwrap();
        assert_eq!(q.base(), 0.6);
        assert_eq!(q.history().symbols(), &[0]);
        let start = SolenoidPoint::from_history(&d, 0.3, SymbolWord::new(vec![1])).unwrap();
        let lifted = d.solenoid_lift(&start).unwrap();
        assert_eq!(lifted.base(), 0.6);
        assert_eq!(lifted.history().symbols(), &[0, 1]);
        assert_eq!(lifted.drop_newest().unwrap(), start);
        assert_eq!(SolenoidPoint::new(0.2).drop_newest(), Err(Error::HistoryExhausted));
        assert!(p.max_residual(&d).unwrap() <= 1e-12);
    }

    #[test]
    fn composition_is_quadrupling() {
        let d = BranchMap::<f64>::doubling();
        let dd = BranchMap::compose(&d, &d).unwrap();
        assert_eq!(dd.len(), 4);
        for &x in &[0.1, 0.3, 0.55, 0.9] {
            let expect = (4.0 * x) % 1.0;
            assert!((dd.sigma(x).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_maps_are_rejected() {
        let bad = Branch::new(
            0,
            Interval::half_open(0.0, 0.6),
            Interval::unit(),
            Arc::new(|y: f64| y / 0.6),
            Arc::new(|x: f64| 0.6 * x),
        );
        assert!(BranchMap::new("gap", vec![bad], BranchCount::Finite(1), 1e-12).is_err());

        let wrong_inverse = Branch::new(
            0,
            Interval::half_open(0.0, 1.0),
            Interval::unit(),
            Arc::new(|y: f64| y),
            Arc::new(|x: f64| x * 0.999),
        );
        assert!(BranchMap::new("bad-inverse", vec![wrong_inverse], BranchCount::Finite(1), 1e-12).is_err());
        assert!(BranchMap::<f64>::cell_permutation(&[0, 0, 1]).is_err());
    }

    #[test]
    fn f32_maps_work_at_single_precision() {
        let d = BranchMap::<f32>::doubling();
        assert_eq!(d.encode(0.3_f32, 3).unwrap().symbols(), &[0, 1, 0]);
        let g = BranchMap::<f32>::gauss(20).unwrap();
        assert_eq!(g.encode(2f32.sqrt() - 1.0, 2).unwrap().symbols(), &[2, 2]);
    }
}

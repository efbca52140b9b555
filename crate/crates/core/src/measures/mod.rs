//! Finite measures on `[0, 1)` and the dual action `μ ↦ μR`.

mod examples;
mod export;
mod ulam;

pub use examples::{riesz_partial_density, riesz_partial_integral, verify_table1};
pub use export::{density_csv, measure_from_json, measure_json};
pub use ulam::{
    pushforward_ulam, ulam_matrix, HarmonicSolve, InvariantSolve, PowerOptions, UlamMatrix,
};

use crate::error::{Error, Result};
use crate::interval::{Grid, Interval};
use crate::numeric::{gauss_legendre, integrate};
use crate::scalar::{count, lit, Scalar};
use crate::transferop::{FunctionOnGrid, TransferOperator};
use crate::dynamics::BranchMap;

/// Closed-form probability densities on `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedForm {
    Lebesgue,
    /// Gauss measure `dx / ((1+x) ln 2)`.
    GaussMu0,
    /// Partial Riesz product `Π_{k=1}^n (1 + cos(2·3^k·2πx))`.
    RieszPartial(usize),
}

impl ClosedForm {
    pub fn label(&self) -> String {
        match self {
            ClosedForm::Lebesgue => "lebesgue".into(),
            ClosedForm::GaussMu0 => "gauss_mu0".into(),
            ClosedForm::RieszPartial(n) => format!("riesz_partial({n})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Measure<T> {
    /// Cell masses on a uniform grid; the density is constant on each cell.
    Histogram(Vec<T>),
    /// Point masses `(location, mass)` sorted by location.
    Atomic(Vec<(T, T)>),
    ClosedForm(ClosedForm),
}

/// Atom locations closer than this are the same point.
pub fn atom_tol<T: Scalar>() -> T {
    lit::<T>(1e-12).max(T::epsilon() * lit(16.0))
}

impl<T: Scalar> Measure<T> {
    pub fn histogram(masses: Vec<T>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidArgument("histogram needs at least one cell".into()));
        }
        if let Some(i) = masses.iter().position(|m| !(*m >= T::zero()) || !m.is_finite()) {
            return Err(Error::InvalidArgument(format!("cell {i} has mass {}", masses[i])));
        }
        if masses.iter().copied().sum::<T>() <= T::zero() {
            return Err(Error::DegenerateMeasure("histogram has zero total mass".into()));
        }
        Ok(Measure::Histogram(masses))
    }

    /// Histogram with the given cell densities (mass = density / n).
    pub fn from_density(density: &[T]) -> Result<Self> {
        let n = count::<T>(density.len());
        Self::histogram(density.iter().map(|d| *d / n).collect())
    }

    /// Builds an atomic measure; atoms closer than [`atom_tol`] merge.
    pub fn atomic(atoms: Vec<(T, T)>) -> Result<Self> {
        for &(x, m) in &atoms {
            if !(x >= T::zero() && x < T::one()) {
                return Err(Error::InvalidArgument(format!("atom location {x} is outside [0,1)")));
            }
            if !(m > T::zero()) || !m.is_finite() {
                return Err(Error::InvalidArgument(format!("atom at {x} has mass {m}")));
            }
        }
        if atoms.is_empty() {
            return Err(Error::DegenerateMeasure("atomic measure has no atoms".into()));
        }
        Ok(Measure::Atomic(merge_atoms(atoms, T::zero())))
    }

    pub fn dirac(x: T) -> Result<Self> {
        Self::atomic(vec![(x, T::one())])
    }

    pub fn lebesgue() -> Self {
        Measure::ClosedForm(ClosedForm::Lebesgue)
    }

    pub fn gauss_mu0() -> Self {
        Measure::ClosedForm(ClosedForm::GaussMu0)
    }

    pub fn riesz_partial(n: usize) -> Self {
        Measure::ClosedForm(ClosedForm::RieszPartial(n))
    }

    pub fn uniform_histogram(n: usize) -> Self {
        Measure::Histogram(vec![T::one() / count::<T>(n); n])
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Measure::Histogram(_) => "histogram",
            Measure::Atomic(_) => "atomic",
            Measure::ClosedForm(_) => "closed_form",
        }
    }

    pub fn cells(&self) -> Option<&[T]> {
        match self {
            Measure::Histogram(c) => Some(c),
            _ => None,
        }
    }

    pub fn atoms(&self) -> Option<&[(T, T)]> {
        match self {
            Measure::Atomic(a) => Some(a),
            _ => None,
        }
    }

    pub fn total_mass(&self) -> T {
        match self {
            Measure::Histogram(c) => c.iter().copied().sum(),
            Measure::Atomic(a) => a.iter().map(|p| p.1).sum(),
            Measure::ClosedForm(_) => T::one(),
        }
    }

    /// Density of a closed form or histogram at `x`.
    pub fn density(&self, x: T) -> Option<T> {
        match self {
            Measure::Histogram(c) => Some(c[Grid::new(c.len()).locate(x)] * count::<T>(c.len())),
            Measure::Atomic(_) => None,
            Measure::ClosedForm(cf) => Some(closed_density(*cf, x)),
        }
    }

    /// `μ(I)` honouring endpoint closedness for atoms.
    pub fn mass_of(&self, iv: &Interval<T>) -> T {
        match self {
            Measure::Atomic(a) => a.iter().filter(|(x, _)| iv.contains(*x)).map(|p| p.1).sum(),
            _ => self.mass_between(iv.lo, iv.hi),
        }
    }

    /// `μ([a, b))`.
    pub fn mass_between(&self, a: T, b: T) -> T {
        let a = a.max(T::zero());
        let b = b.min(T::one());
        if b <= a {
            return T::zero();
        }
        match self {
            Measure::Histogram(c) => {
                let g = Grid::new(c.len());
                let n = count::<T>(c.len());
                g.span(a, b).map(|i| c[i] * g.cell::<T>(i).overlap(a, b) * n).sum()
            }
            Measure::Atomic(at) => at.iter().filter(|(x, _)| *x >= a && *x < b).map(|p| p.1).sum(),
            Measure::ClosedForm(ClosedForm::Lebesgue) => b - a,
            // ln(1+b) - ln(1+a) = ln(1 + (b-a)/(1+a)), accurate for thin cylinders
            Measure::ClosedForm(ClosedForm::GaussMu0) => ((b - a) / (T::one() + a)).ln_1p() / T::LN_2(),
            Measure::ClosedForm(cf @ ClosedForm::RieszPartial(_)) => {
                let cf = *cf;
                integrate(&|x| closed_density(cf, x), a, b, lit(1e-13))
            }
        }
    }

    /// `μ([0, x))`.
    pub fn cdf(&self, x: T) -> T {
        self.mass_between(T::zero(), x)
    }

    /// `∫ f dμ`. Histograms integrate `f` exactly against their
    /// piecewise-constant density with one Gauss-Legendre panel per cell.
    pub fn integrate(&self, f: &dyn Fn(T) -> T, tol: T) -> T {
        match self {
            Measure::Histogram(c) => {
                let g = Grid::new(c.len());
                let n = count::<T>(c.len());
                c.iter()
                    .enumerate()
                    .filter(|(_, m)| **m > T::zero())
                    .map(|(i, m)| {
                        let cell = g.cell::<T>(i);
                        *m * n * gauss_legendre(f, cell.lo, cell.hi)
                    })
                    .sum()
            }
            Measure::Atomic(a) => a.iter().map(|(x, m)| *m * f(*x)).sum(),
            Measure::ClosedForm(cf) => {
                let cf = *cf;
                integrate(&|x| f(x) * closed_density(cf, x), T::zero(), T::one(), tol)
            }
        }
    }

    /// Cell masses on an `n`-cell grid.
    pub fn to_histogram(&self, n: usize) -> Result<Vec<T>> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid size must be positive".into()));
        }
        let g = Grid::new(n);
        match self {
            Measure::Histogram(c) if c.len() == n => Ok(c.clone()),
            Measure::Atomic(a) => {
                let mut out = vec![T::zero(); n];
                for (x, m) in a {
                    out[g.locate(*x)] += *m;
                }
                Ok(out)
            }
            _ => Ok((0..n)
                .map(|i| {
                    let c = g.cell::<T>(i);
                    self.mass_between(c.lo, c.hi)
                })
                .collect()),
        }
    }

    pub fn scaled(&self, s: T) -> Result<Self> {
        match self {
            Measure::Histogram(c) => Self::histogram(c.iter().map(|m| *m * s).collect()),
            Measure::Atomic(a) => Self::atomic(a.iter().map(|(x, m)| (*x, *m * s)).collect()),
            Measure::ClosedForm(_) => Err(Error::MustDiscretize { label: self.label() }),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Measure::ClosedForm(cf) => cf.label(),
            other => other.kind().into(),
        }
    }

    /// Support inclusion for atomic measures, cellwise inclusion for
    /// histograms of equal size: `self ≪ other`.
    pub fn absolutely_continuous_wrt(&self, other: &Self) -> Result<bool> {
        match (self, other) {
            (Measure::Atomic(a), Measure::Atomic(b)) => {
                let tol = atom_tol::<T>();
                Ok(a.iter().all(|(x, _)| b.iter().any(|(y, _)| (*x - *y).abs() <= tol)))
            }
            (Measure::Histogram(a), Measure::Histogram(b)) if a.len() == b.len() => {
                Ok(ac_violations(a, b).is_empty())
            }
            (Measure::Atomic(_), Measure::ClosedForm(_)) => Ok(false),
            (Measure::ClosedForm(_), Measure::ClosedForm(_)) => Ok(true),
            _ => Err(Error::InvalidArgument("absolute continuity needs measures of the same kind".into())),
        }
    }
}

fn closed_density<T: Scalar>(cf: ClosedForm, x: T) -> T {
    match cf {
        ClosedForm::Lebesgue => T::one(),
        ClosedForm::GaussMu0 => T::one() / ((T::one() + x) * T::LN_2()),
        ClosedForm::RieszPartial(n) => riesz_partial_density(n, T::TAU() * x) * T::TAU(),
    }
}

/// Cells where `a` has mass but `b` does not.
pub fn ac_violations<T: Scalar>(a: &[T], b: &[T]) -> Vec<usize> {
    let total: T = a.iter().copied().sum();
    let floor = total * T::epsilon() * lit(16.0);
    (0..a.len()).filter(|&i| a[i] > floor && b[i] <= T::zero()).collect()
}

/// Sorts atoms, merges coincident locations and drops atoms whose mass is
/// at most `rel_floor` times the largest mass.
pub fn merge_atoms<T: Scalar>(mut atoms: Vec<(T, T)>, rel_floor: T) -> Vec<(T, T)> {
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let tol = atom_tol::<T>();
    let mut out: Vec<(T, T)> = Vec::with_capacity(atoms.len());
    for (x, m) in atoms {
        match out.last_mut() {
            Some(last) if (x - last.0).abs() <= tol => last.1 += m,
            _ => out.push((x, m)),
        }
    }
    let top = out.iter().fold(T::zero(), |a, p| a.max(p.1));
    out.retain(|p| p.1 > top * rel_floor);
    out
}

/// `μR` for atomic and histogram measures.
///
/// Atomic measures are pushed exactly: `δ_x R = Σ_k W(τ_k x) δ_{τ_k x}`.
/// Atoms that receive a relative mass below `ε²` (round-off of a weight
/// that vanishes analytically) are dropped. Histograms go through the
/// Ulam matrix on their own grid.
pub fn act_on_measure<T: Scalar>(r: &TransferOperator<T>, mu: &Measure<T>) -> Result<Measure<T>> {
    match mu {
        Measure::Atomic(a) => {
            let mut out = Vec::new();
            for &(x, m) in a {
                for (_, y, w) in r.kernel_atoms(x) {
                    if w > T::zero() {
                        out.push((y, m * w));
                    }
                }
            }
            let merged = merge_atoms(out, T::epsilon() * T::epsilon());
            if merged.is_empty() {
                return Err(Error::DegenerateMeasure("μR has no mass".into()));
            }
            Ok(Measure::Atomic(merged))
        }
        Measure::Histogram(c) => {
            let m = ulam_matrix(r, c.len())?;
            Measure::histogram(m.apply(c))
        }
        Measure::ClosedForm(_) => Err(Error::MustDiscretize { label: mu.label() }),
    }
}

/// `μ∘σ⁻¹` for an atomic measure.
pub fn pushforward_atomic<T: Scalar>(map: &BranchMap<T>, mu: &Measure<T>) -> Result<Measure<T>> {
    let atoms = mu
        .atoms()
        .ok_or_else(|| Error::InvalidArgument("pushforward_atomic needs an atomic measure".into()))?;
    let mut out = Vec::with_capacity(atoms.len());
    for &(x, m) in atoms {
        out.push((map.sigma(x)?, m));
    }
    Ok(Measure::Atomic(merge_atoms(out, T::zero())))
}

/// Largest atomwise discrepancy between two atomic measures.
pub fn atomic_distance<T: Scalar>(a: &Measure<T>, b: &Measure<T>) -> Result<T> {
    let (Some(a), Some(b)) = (a.atoms(), b.atoms()) else {
        return Err(Error::InvalidArgument("atomic_distance needs atomic measures".into()));
    };
    let mut all: Vec<(T, T)> = a.to_vec();
    all.extend(b.iter().map(|(x, m)| (*x, -*m)));
    all.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let tol = atom_tol::<T>();
    let mut worst = T::zero();
    let mut i = 0;
    while i < all.len() {
        let mut s = all[i].1;
        let mut j = i + 1;
        while j < all.len() && (all[j].0 - all[i].0).abs() <= tol {
            s += all[j].1;
            j += 1;
        }
        worst = worst.max(s.abs());
        i = j;
    }
    Ok(worst)
}

/// Cellwise `d(μR)/dμ` on the grid of `mu`.
pub fn radon_nikodym<T: Scalar>(r: &TransferOperator<T>, mu: &Measure<T>) -> Result<FunctionOnGrid<T>> {
    let cells = mu
        .cells()
        .ok_or_else(|| Error::InvalidArgument("radon_nikodym needs a histogram measure".into()))?;
    let image = ulam_matrix(r, cells.len())?.apply(cells);
    let bad = ac_violations(&image, cells);
    if !bad.is_empty() {
        return Err(Error::AbsoluteContinuity { cells: bad });
    }
    FunctionOnGrid::new(
        image
            .iter()
            .zip(cells)
            .map(|(a, b)| if *b > T::zero() { *a / *b } else { T::zero() })
            .collect(),
    )
}

/// `sup_x |F(x) - G(x)|` for the CDFs of two measures, sampled on `m` points.
pub fn cdf_distance<T: Scalar>(a: &Measure<T>, b: &Measure<T>, m: usize) -> T {
    (0..=m)
        .map(|i| {
            let x = count::<T>(i) / count::<T>(m);
            (a.cdf(x) - b.cdf(x)).abs()
        })
        .fold(T::zero(), T::max)
}

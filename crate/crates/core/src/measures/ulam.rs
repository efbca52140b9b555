use crate::dynamics::BranchMap;
use crate::error::{Error, Result};
use crate::interval::Grid;
use crate::numeric::{gauss_legendre, weyl_samples};
use crate::scalar::{count, lit, to_f64, Scalar};
use crate::transferop::{FunctionOnGrid, TransferOperator};

use super::Measure;

/// Sparse nonnegative `n × n` matrix acting on cell-mass vectors by
/// left multiplication. Column `j` lists `(row, value)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct UlamMatrix<T> {
    n: usize,
    cols: Vec<Vec<(usize, T)>>,
    map_label: String,
    weight_label: String,
    tail_bound: T,
}

impl<T: Scalar> UlamMatrix<T> {
    pub fn from_columns(cols: Vec<Vec<(usize, T)>>, map_label: &str, weight_label: &str, tail_bound: T) -> Result<Self> {
        let n = cols.len();
        for (j, c) in cols.iter().enumerate() {
            for &(i, v) in c {
                if i >= n || !(v >= T::zero()) {
                    return Err(Error::InvalidArgument(format!("bad Ulam entry ({i}, {j}) = {v}")));
                }
            }
        }
        Ok(UlamMatrix { n, cols, map_label: map_label.into(), weight_label: weight_label.into(), tail_bound })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn map_label(&self) -> &str {
        &self.map_label
    }

    pub fn weight_label(&self) -> &str {
        &self.weight_label
    }

    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    pub fn column(&self, j: usize) -> &[(usize, T)] {
        &self.cols[j]
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.cols[j].iter().filter(|e| e.0 == i).map(|e| e.1).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (j, c) in self.cols.iter().enumerate() {
            for &(i, v) in c {
                d[i][j] += v;
            }
        }
        d
    }

    /// Measure side: `(M μ)_i = Σ_j M_ij μ_j`.
    pub fn apply(&self, mu: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (j, c) in self.cols.iter().enumerate() {
            let m = mu[j];
            if m == T::zero() {
                continue;
            }
            for &(i, v) in c {
                out[i] += v * m;
            }
        }
        out
    }

    /// Function side: `(Mᵀ h)_j = Σ_i M_ij h_i`.
    pub fn apply_transpose(&self, h: &[T]) -> Vec<T> {
        self.cols.iter().map(|c| c.iter().map(|&(i, v)| v * h[i]).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<T> {
        self.cols.iter().map(|c| c.iter().map(|e| e.1).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut cols = vec![Vec::new(); self.n];
        for (j, c) in self.cols.iter().enumerate() {
            for &(i, v) in c {
                cols[i].push((j, v));
            }
        }
        UlamMatrix {
            n: self.n,
            cols,
            map_label: self.map_label.clone(),
            weight_label: format!("{}ᵀ", self.weight_label),
            tail_bound: self.tail_bound,
        }
    }

    /// Largest entrywise difference between two matrices of equal size.
    pub fn max_difference(&self, other: &Self) -> T {
        let (a, b) = (self.to_dense(), other.to_dense());
        a.iter()
            .zip(&b)
            .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (*x - *y).abs()))
            .fold(T::zero(), T::max)
    }

    /// Power iteration for a probability vector with `Mμ ∝ μ`, from the
    /// uniform start. Mass lost per step (truncation tails) is reported as
    /// `leak` and renormalized away.
    pub fn invariant_density(&self, opts: PowerOptions<T>) -> Result<InvariantSolve<T>> {
        let n = self.n;
        let mut v = vec![T::one() / count::<T>(n); n];
        let mut residual = T::infinity();
        let mut leak = T::zero();
        let mut iterations = 0;
        while iterations < opts.max_iter {
            iterations += 1;
            let mut w = self.apply(&v);
            let s: T = w.iter().copied().sum();
            if !(s > T::zero()) {
                return Err(Error::DegenerateMeasure("power iteration lost all mass".into()));
            }
            leak = T::one() - s;
            w.iter_mut().for_each(|x| *x = *x / s);
            residual = w.iter().zip(&v).map(|(a, b)| (*a - *b).abs()).sum();
            v = w;
            if residual <= opts.tol {
                break;
            }
        }
        if residual > opts.tol {
            return Err(Error::NoConvergence { iterations, residual: to_f64(residual) });
        }
        let lambda2 = self.second_eigenvalue(&v, 400);
        Ok(InvariantSolve {
            density: Measure::histogram(v)?,
            residual,
            iterations,
            leak,
            lambda2,
            non_unique: lambda2 >= T::one() - lit(1e-6),
        })
    }

    /// Estimate of the second largest `|λ|`, by iterating a deflated
    /// quasi-random vector with `w ↦ Mw − (Σ Mw) v`.
    pub fn second_eigenvalue(&self, v: &[T], iterations: usize) -> T {
        let half = lit::<T>(0.5);
        let mut w: Vec<T> = weyl_samples::<T>(self.n).into_iter().map(|u| u - half).collect();
        deflate(&mut w, v);
        let norm = |w: &[T]| w.iter().map(|x| x.abs()).sum::<T>();
        let mut nw = norm(&w);
        if nw == T::zero() {
            return T::zero();
        }
        w.iter_mut().for_each(|x| *x = *x / nw);
        let mut logs = Vec::new();
        for _ in 0..iterations {
            let mut z = self.apply(&w);
            deflate(&mut z, v);
            nw = norm(&z);
            if nw <= T::min_positive_value() {
                return T::zero();
            }
            logs.push(nw.ln());
            z.iter_mut().for_each(|x| *x = *x / nw);
            w = z;
        }
        let tail = &logs[logs.len() - logs.len().min(50)..];
        (tail.iter().copied().sum::<T>() / count::<T>(tail.len())).exp()
    }

    /// Fixed vector of the function-side action `h ↦ Mᵀh`, normalized to
    /// mean 1.
    pub fn harmonic_function(&self, opts: PowerOptions<T>) -> Result<HarmonicSolve<T>> {
        let n = self.n;
        let nn = count::<T>(n);
        let mut h = vec![T::one(); n];
        let mut step = T::infinity();
        let mut eigenvalue = T::one();
        let mut iterations = 0;
        while iterations < opts.max_iter {
            iterations += 1;
            let mut g = self.apply_transpose(&h);
            let mean = g.iter().copied().sum::<T>() / nn;
            if !(mean > T::zero()) {
                return Err(Error::DegenerateMeasure("harmonic iteration collapsed to zero".into()));
            }
            eigenvalue = mean;
            g.iter_mut().for_each(|x| *x = *x / mean);
            step = g.iter().zip(&h).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
            h = g;
            if step <= opts.tol {
                break;
            }
        }
        if step > opts.tol {
            return Err(Error::NoConvergence { iterations, residual: to_f64(step) });
        }
        let mh = self.apply_transpose(&h);
        let residual = mh.iter().zip(&h).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        Ok(HarmonicSolve { h: FunctionOnGrid::new(h)?, eigenvalue, residual, iterations })
    }
}

fn deflate<T: Scalar>(w: &mut [T], v: &[T]) {
    let s: T = w.iter().copied().sum();
    for (x, p) in w.iter_mut().zip(v) {
        *x -= s * *p;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PowerOptions<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for PowerOptions<T> {
    fn default() -> Self {
        PowerOptions { tol: crate::transferop::arith_tol(1e-13), max_iter: 20_000 }
    }
}

#[derive(Clone, Debug)]
pub struct InvariantSolve<T> {
    pub density: Measure<T>,
    pub residual: T,
    pub iterations: usize,
    pub leak: T,
    pub lambda2: T,
    pub non_unique: bool,
}

impl<T: Scalar> InvariantSolve<T> {
    /// Cell densities (mass times `n`).
    pub fn density_values(&self) -> Vec<T> {
        let c = self.density.cells().expect("histogram");
        let n = count::<T>(c.len());
        c.iter().map(|m| *m * n).collect()
    }
}

#[derive(Clone, Debug)]
pub struct HarmonicSolve<T> {
    pub h: FunctionOnGrid<T>,
    pub eigenvalue: T,
    pub residual: T,
    pub iterations: usize,
}

struct ColumnAccumulator<T> {
    dense: Vec<T>,
    touched: Vec<usize>,
}

impl<T: Scalar> ColumnAccumulator<T> {
    fn new(n: usize) -> Self {
        ColumnAccumulator { dense: vec![T::zero(); n], touched: Vec::new() }
    }

    fn add(&mut self, i: usize, v: T) {
        if self.dense[i] == T::zero() {
            self.touched.push(i);
        }
        self.dense[i] += v;
    }

    fn drain(&mut self) -> Vec<(usize, T)> {
        self.touched.sort_unstable();
        self.touched.dedup();
        let out = self
            .touched
            .iter()
            .filter(|&&i| self.dense[i] > T::zero())
            .map(|&i| (i, self.dense[i]))
            .collect();
        for &i in &self.touched {
            self.dense[i] = T::zero();
        }
        self.touched.clear();
        out
    }
}

/// Ulam matrix of `μ ↦ μR` on `n` cells:
/// `M_ij = (1/h) ∫_{cell j} R(χ_{cell i})(x) dx`.
///
/// Each source cell is pulled back through every inverse branch; the part
/// of the cell whose preimage lands in target cell `i` contributes
/// `∫ W(τ_k x) dx / h`, evaluated by Gauss-Legendre.
pub fn ulam_matrix<T: Scalar>(r: &TransferOperator<T>, n: usize) -> Result<UlamMatrix<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument("Ulam grid needs n ≥ 2".into()));
    }
    let grid = Grid::new(n);
    let nn = count::<T>(n);
    let map = r.map();
    let mut acc = ColumnAccumulator::new(n);
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let cell = grid.cell::<T>(j);
        for b in map.branches() {
            let Some((a, z)) = b.image().clip(cell.lo, cell.hi) else { continue };
            let (y1, y2) = (b.inverse(a), b.inverse(z));
            let (ylo, yhi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
            for i in grid.span(ylo, yhi) {
                let target = grid.cell::<T>(i);
                let Some((u, w)) = target.clip(ylo, yhi) else { continue };
                let (x1, x2) = (b.forward(u), b.forward(w));
                let (x1, x2) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
                let (x1, x2) = (x1.max(a), x2.min(z));
                if x2 <= x1 {
                    continue;
                }
                let v = gauss_legendre(|x| r.weight(b.inverse(x)), x1, x2) * nn;
                if v > T::zero() {
                    acc.add(i, v);
                }
            }
        }
        cols.push(acc.drain());
    }
    UlamMatrix::from_columns(cols, map.label(), r.label(), r.tail_bound())
}

/// Classical Ulam matrix of the pushforward `μ ↦ μ∘σ⁻¹`:
/// `P_ij = λ(cell j ∩ σ⁻¹ cell i) / λ(cell j)`, computed exactly from
/// inverse-branch endpoints. Columns of cells meeting an uncovered tail
/// sum to less than one.
pub fn pushforward_ulam<T: Scalar>(map: &BranchMap<T>, n: usize) -> Result<UlamMatrix<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument("Ulam grid needs n ≥ 2".into()));
    }
    let grid = Grid::new(n);
    let nn = count::<T>(n);
    let order: Vec<_> = map.branches_by_position().collect();
    let mut acc = ColumnAccumulator::new(n);
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let cell = grid.cell::<T>(j);
        let start = order.partition_point(|b| b.domain().hi <= cell.lo);
        for b in &order[start..] {
            if b.domain().lo >= cell.hi {
                break;
            }
            let Some((p, q)) = b.domain().clip(cell.lo, cell.hi) else { continue };
            let (x1, x2) = (b.forward(p), b.forward(q));
            let (xlo, xhi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let (xlo, xhi) = (xlo.max(b.image().lo), xhi.min(b.image().hi));
            for i in grid.span(xlo, xhi) {
                let Some((u, w)) = grid.cell::<T>(i).clip(xlo, xhi) else { continue };
                let len = (b.inverse(w) - b.inverse(u)).abs().min(q - p);
                if len > T::zero() {
                    acc.add(i, len * nn);
                }
            }
        }
        cols.push(acc.drain());
    }
    UlamMatrix::from_columns(cols, map.label(), "pushforward", map.tail_mass_bound())
}

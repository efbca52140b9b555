//! Koopman isometry on a grid, Wold decomposition and exactness scores.

mod coupling;
mod uhs;

pub use coupling::{
    composition_matrix, coupling_to_operator, deterministic_coupling, max_difference, operator_to_coupling,
    product_coupling, push_marginal, Coupling, Exact, Matrix,
};
pub use uhs::{in_k1, k1_image, uhs_R, uhs_R_formula, uhs_S, uhs_equivalent, uhs_inner, uhs_s_raw, HilbertPair};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::BranchMap;
use crate::error::{Error, Result};
use crate::interval::Grid;
use crate::measures::{pushforward_ulam, Measure, UlamMatrix};
use crate::scalar::{count, lit, to_f64, Scalar};

type SparseRows<T> = Vec<Vec<(usize, T)>>;

/// `S f = f∘σ` and its `μ`-adjoint on an `n`-cell grid, for a
/// `σ`-invariant histogram `μ`.
///
/// `S` is the cell average of `f∘σ`; it is exact (and isometric) on
/// functions that are themselves images of `S*`.
#[derive(Clone, Debug)]
pub struct KoopmanSystem<T> {
    map: Arc<BranchMap<T>>,
    ulam: UlamMatrix<T>,
    mu: Vec<T>,
    s: SparseRows<T>,
    s_star: SparseRows<T>,
}

fn apply_rows<T: Scalar>(rows: &SparseRows<T>, v: &[T]) -> Vec<T> {
    rows.iter().map(|r| r.iter().map(|&(j, a)| a * v[j]).sum()).collect()
}

impl<T: Scalar> KoopmanSystem<T> {
    /// `mu` holds cell masses; every cell must carry positive mass.
    pub fn new(map: Arc<BranchMap<T>>, mu: Vec<T>) -> Result<Self> {
        let n = mu.len();
        if let Some(i) = mu.iter().position(|m| !(*m > T::zero())) {
            return Err(Error::Precondition(format!("μ gives no mass to cell {i}")));
        }
        let total: T = mu.iter().copied().sum();
        let mu: Vec<T> = mu.into_iter().map(|m| m / total).collect();
        let ulam = pushforward_ulam(&map, n)?;
        let pushed = ulam.apply(&mu);
        let dev = pushed.iter().zip(&mu).fold(T::zero(), |d, (a, b)| d.max((*a - *b).abs()));
        let top = mu.iter().fold(T::zero(), |a, b| a.max(*b));
        if dev > top * lit(1e-9) + ulam.tail_bound() {
            return Err(Error::Precondition(format!(
                "μ is not invariant under '{}': pushforward deviates by {}",
                map.label(),
                to_f64(dev)
            )));
        }
        // column j of the pushforward matrix is the cell-j row of S
        let s: SparseRows<T> = (0..n).map(|j| ulam.column(j).to_vec()).collect();
        let mut s_star: SparseRows<T> = vec![Vec::new(); n];
        for (j, row) in s.iter().enumerate() {
            for &(i, p) in row {
                s_star[i].push((j, mu[j] * p / mu[i]));
            }
        }
        Ok(KoopmanSystem { map, ulam, mu, s, s_star })
    }

    pub fn lebesgue(map: Arc<BranchMap<T>>, n: usize) -> Result<Self> {
        Self::new(map, vec![T::one() / count::<T>(n); n])
    }

    pub fn from_measure(map: Arc<BranchMap<T>>, mu: &Measure<T>, n: usize) -> Result<Self> {
        Self::new(map, mu.to_histogram(n)?)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn map(&self) -> &Arc<BranchMap<T>> {
        &self.map
    }

    pub fn ulam(&self) -> &UlamMatrix<T> {
        &self.ulam
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn inner(&self, f: &[T], g: &[T]) -> T {
        self.mu.iter().zip(f).zip(g).map(|((m, a), b)| *m * *a * *b).sum()
    }

    pub fn norm(&self, f: &[T]) -> T {
        self.inner(f, f).sqrt()
    }

    pub fn mean(&self, f: &[T]) -> T {
        self.mu.iter().zip(f).map(|(m, a)| *m * *a).sum()
    }

    pub fn s(&self, f: &[T]) -> Vec<T> {
        apply_rows(&self.s, f)
    }

    pub fn s_star(&self, g: &[T]) -> Vec<T> {
        apply_rows(&self.s_star, g)
    }

    /// `E_k f = S^k S*^k f`.
    pub fn project(&self, k: usize, f: &[T]) -> Vec<T> {
        let mut v = f.to_vec();
        for _ in 0..k {
            v = self.s_star(&v);
        }
        for _ in 0..k {
            v = self.s(&v);
        }
        v
    }

    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        Grid::new(self.n()).midpoints::<T>().into_iter().map(f).collect()
    }

    /// Max of `|⟨Sf,Sg⟩ - ⟨f,g⟩|` and `‖S*S f - f‖` over random `f, g` drawn
    /// from `range(S*)`.
    pub fn isometry_residual(&self, trials: usize, seed: u64) -> T {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = T::zero();
        for _ in 0..trials {
            let a: Vec<T> = (0..self.n()).map(|_| lit(rng.gen::<f64>() - 0.5)).collect();
            let b: Vec<T> = (0..self.n()).map(|_| lit(rng.gen::<f64>() - 0.5)).collect();
            let (f, g) = (self.s_star(&a), self.s_star(&b));
            let (sf, sg) = (self.s(&f), self.s(&g));
            worst = worst.max((self.inner(&sf, &sg) - self.inner(&f, &g)).abs());
            let back = self.s_star(&sf);
            let d: Vec<T> = back.iter().zip(&f).map(|(x, y)| *x - *y).collect();
            worst = worst.max(self.norm(&d));
        }
        worst
    }

    /// Gram–Schmidt; a vector is kept when its residual exceeds
    /// `rank_tol` times the paired scale.
    fn orthonormalize(&self, vectors: impl Iterator<Item = (Vec<T>, T)>, rank_tol: T) -> Vec<Vec<T>> {
        let mut basis: Vec<Vec<T>> = Vec::new();
        for (mut v, scale) in vectors {
            if scale <= T::zero() {
                continue;
            }
            for _ in 0..2 {
                for q in &basis {
                    let c = self.inner(q, &v);
                    for (x, y) in v.iter_mut().zip(q) {
                        *x -= c * *y;
                    }
                }
            }
            let r = self.norm(&v);
            if r > rank_tol * scale {
                basis.push(v.into_iter().map(|x| x / r).collect());
            }
        }
        basis
    }

    fn unit(&self, j: usize) -> Vec<T> {
        let mut e = vec![T::zero(); self.n()];
        e[j] = T::one();
        e
    }

    /// Wold decomposition to `depth`: `H_inf ≈ range(E_depth)` and the shift
    /// layers `S^k ker(S*)` for `k < depth`.
    pub fn wold(&self, depth: usize) -> WoldDecomposition<T> {
        let n = self.n();
        let rank_tol = lit::<T>(1e-6);
        let probes = self.probes(6, 17);
        let mut idempotency = Vec::with_capacity(depth);
        let mut nesting = Vec::with_capacity(depth);
        for k in 1..=depth {
            let mut idem = T::zero();
            let mut nest = T::zero();
            for v in &probes {
                let e = self.project(k, v);
                let ee = self.project(k, &e);
                idem = idem.max(self.norm(&diff(&ee, &e)));
                let down = self.project(k + 1, v);
                nest = nest.max(self.norm(&diff(&self.project(k + 1, &e), &down)));
            }
            idempotency.push(idem);
            nesting.push(nest);
        }
        let scaled = |v: Vec<T>| {
            let s = self.norm(&v);
            (v, s)
        };
        let unit_scale = |j: usize| self.mu[j].sqrt();
        let h_inf = self.orthonormalize((0..n).map(|j| (self.project(depth, &self.unit(j)), unit_scale(j))), rank_tol);
        let range_s = self.orthonormalize((0..n).map(|j| scaled(self.s(&self.unit(j)))), rank_tol);
        let kernel_vectors = (0..n).map(|j| {
            let mut e = self.unit(j);
            for _ in 0..2 {
                for q in &range_s {
                    let c = self.inner(q, &e);
                    for (x, y) in e.iter_mut().zip(q) {
                        *x -= c * *y;
                    }
                }
            }
            (e, unit_scale(j))
        });
        let kernel = self.orthonormalize(kernel_vectors, rank_tol);
        let mut layers = Vec::with_capacity(depth);
        let mut current = kernel;
        for _ in 0..depth {
            let layer = self.orthonormalize(current.iter().cloned().map(scaled), rank_tol);
            current = current.iter().map(|v| self.s(v)).collect();
            layers.push(layer);
        }
        let mut orth = T::zero();
        let mut blocks: Vec<&Vec<Vec<T>>> = layers.iter().collect();
        blocks.push(&h_inf);
        for a in 0..blocks.len() {
            for b in a + 1..blocks.len() {
                for u in blocks[a] {
                    for v in blocks[b] {
                        orth = orth.max(self.inner(u, v).abs());
                    }
                }
            }
        }
        let unitary = h_inf.iter().fold(T::zero(), |m, v| {
            let back = self.s(&self.s_star(v));
            m.max(self.norm(&diff(&back, v)))
        });
        WoldDecomposition {
            depth,
            h_inf,
            shift_layers: layers,
            idempotency,
            nesting,
            layer_orthogonality: orth,
            unitary_on_h_inf: unitary,
        }
    }

    fn probes(&self, count: usize, seed: u64) -> Vec<Vec<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| (0..self.n()).map(|_| lit(rng.gen::<f64>() - 0.5)).collect()).collect()
    }

    /// `‖E_k f - mean f‖` for `k = 1..=depth`.
    pub fn exactness_score(&self, f: &[T], depth: usize) -> ExactnessReport<T> {
        let m = self.mean(f);
        let mut norms = Vec::with_capacity(depth);
        let mut v = f.to_vec();
        let mut limit = f.to_vec();
        for k in 1..=depth {
            v = self.s_star(&v);
            let mut e = v.clone();
            for _ in 0..k {
                e = self.s(&e);
            }
            norms.push(self.norm(&e.iter().map(|x| *x - m).collect::<Vec<_>>()));
            limit = e;
        }
        let slack = lit::<T>(1e-8);
        let monotone = norms.windows(2).all(|w| w[1] <= w[0] + slack);
        ExactnessReport { initial: self.norm(&f.iter().map(|x| *x - m).collect::<Vec<_>>()), norms, monotone, limit }
    }
}

fn diff<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

#[derive(Clone, Debug)]
pub struct WoldDecomposition<T> {
    pub depth: usize,
    /// `μ`-orthonormal basis of `range(E_depth)`.
    pub h_inf: Vec<Vec<T>>,
    /// `shift_layers[k]`: orthonormal basis of `S^k ker(S*)`.
    pub shift_layers: Vec<Vec<Vec<T>>>,
    /// `‖E_k² - E_k‖` on random probes, `k = 1..=depth`.
    pub idempotency: Vec<T>,
    /// `‖E_{k+1}E_k - E_{k+1}‖` on random probes.
    pub nesting: Vec<T>,
    pub layer_orthogonality: T,
    /// `‖SS* v - v‖` over the `H_inf` basis.
    pub unitary_on_h_inf: T,
}

impl<T: Scalar> WoldDecomposition<T> {
    pub fn h_inf_dim(&self) -> usize {
        self.h_inf.len()
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        self.shift_layers.iter().map(Vec::len).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ExactnessReport<T> {
    /// `‖f - mean f‖`.
    pub initial: T,
    pub norms: Vec<T>,
    pub monotone: bool,
    /// `E_depth f`.
    pub limit: Vec<T>,
}

impl<T: Scalar> ExactnessReport<T> {
    /// The scores stop short of `tol`, so `B_∞` is nontrivial at this depth.
    pub fn plateau(&self, tol: T) -> bool {
        self.norms.last().map(|x| *x > tol).unwrap_or(false)
    }
}

/// `n,norm,shift_layer_dim` rows; the layer column is empty past the
/// decomposition depth.
pub fn exactness_csv<T: Scalar>(report: &ExactnessReport<T>, layer_dims: &[usize]) -> String {
    let mut s = String::from("n,norm,shift_layer_dim\n");
    for (i, v) in report.norms.iter().enumerate() {
        let dim = layer_dims.get(i).map(|d| d.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{:.16e},{}\n", i + 1, to_f64(*v), dim));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling(n: usize) -> KoopmanSystem<f64> {
        KoopmanSystem::lebesgue(Arc::new(BranchMap::doubling()), n).unwrap()
    }

    #[test]
    fn adjoint_and_isometry() {
        let k = doubling(64);
        let f = k.sample(|x| (3.0 * x).sin());
        let g = k.sample(|x| x * x);
        assert!((k.inner(&k.s(&f), &g) - k.inner(&f, &k.s_star(&g))).abs() < 1e-14);
        assert!(k.isometry_residual(5, 1) < 1e-12);
    }

    #[test]
    fn doubling_wold_dimensions() {
        let k = doubling(256);
        let w = k.wold(6);
        assert_eq!(w.h_inf_dim(), 4);
        assert_eq!(w.layer_dims(), vec![128, 64, 32, 16, 8, 4]);
        assert!(w.idempotency.iter().chain(&w.nesting).all(|r| *r < 1e-8));
        assert!(w.layer_orthogonality < 1e-8);
        assert!(w.unitary_on_h_inf < 1e-8);
        assert_eq!(k.wold(8).h_inf_dim(), 1);
    }

    #[test]
    fn cos_is_killed_by_e1() {
        let k = doubling(256);
        let f = k.sample(|x| (std::f64::consts::TAU * x).cos());
        assert!(k.norm(&k.project(1, &f)) < 1e-12);
    }

    #[test]
    fn permutation_is_unitary() {
        let perm = [3, 0, 4, 1, 7, 2, 6, 5];
        let k = KoopmanSystem::lebesgue(Arc::new(BranchMap::<f64>::cell_permutation(&perm).unwrap()), 8).unwrap();
        let w = k.wold(3);
        assert_eq!(w.h_inf_dim(), 8);
        assert!(w.layer_dims().iter().all(|d| *d == 0));
        let f = k.sample(|x| x);
        let r = k.exactness_score(&f, 5);
        assert!(r.norms.iter().all(|v| (v - r.initial).abs() < 1e-12));
    }

    #[test]
    fn two_components_plateau() {
        let k = KoopmanSystem::lebesgue(Arc::new(BranchMap::<f64>::two_component_doubling()), 64).unwrap();
        let f = k.sample(|x| if x < 0.5 { 1.0 } else { 0.0 });
        let r = k.exactness_score(&f, 6);
        assert!(r.plateau(1e-3));
        assert!((r.norms[5] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_invariant_measure_is_rejected() {
        let mu: Vec<f64> = (0..16).map(|i| (i + 1) as f64).collect();
        let r = KoopmanSystem::new(Arc::new(BranchMap::doubling()), mu);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn csv_layout() {
        let k = doubling(16);
        let r = k.exactness_score(&k.sample(|x| x), 2);
        let csv = exactness_csv(&r, &[8]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,norm,shift_layer_dim");
        assert!(lines[1].ends_with(",8") && lines[2].ends_with(','));
    }
}

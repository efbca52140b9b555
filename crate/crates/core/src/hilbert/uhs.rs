//! Square-root classes `f√dμ` over atomic measures and the operator pair
//! `Ŝ(f√dλ) = (f∘σ)√d(λR)`, `R̂`.

use crate::error::{Error, Result};
use crate::measures::{act_on_measure, atom_tol, atomic_distance, pushforward_atomic, Measure};
use crate::scalar::{lit, Scalar};
use crate::transferop::TransferOperator;

/// The class of `f√dμ` for an atomic `μ`; `f` holds one value per atom.
#[derive(Clone, Debug, PartialEq)]
pub struct HilbertPair<T> {
    mu: Measure<T>,
    f: Vec<T>,
}

impl<T: Scalar> HilbertPair<T> {
    pub fn new(mu: Measure<T>, f: Vec<T>) -> Result<Self> {
        let n = mu
            .atoms()
            .ok_or_else(|| Error::InvalidArgument("Hilbert pairs need an atomic measure".into()))?
            .len();
        if n != f.len() {
            return Err(Error::InvalidArgument(format!("{} values for {n} atoms", f.len())));
        }
        Ok(HilbertPair { mu, f })
    }

    pub fn from_fn(mu: Measure<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = mu.atoms().map(|a| a.iter().map(|(x, _)| f(*x)).collect()).unwrap_or_default();
        Self::new(mu, values)
    }

    pub fn zero() -> Self {
        HilbertPair { mu: Measure::Atomic(Vec::new()), f: Vec::new() }
    }

    pub fn measure(&self) -> &Measure<T> {
        &self.mu
    }

    pub fn atoms(&self) -> &[(T, T)] {
        self.mu.atoms().unwrap_or(&[])
    }

    pub fn values(&self) -> &[T] {
        &self.f
    }

    /// `f(x)` on the atom at `x`, zero off the support.
    pub fn value_at(&self, x: T) -> T {
        let atoms = self.atoms();
        let tol = atom_tol::<T>();
        let i = atoms.partition_point(|(a, _)| *a < x - tol);
        match atoms.get(i) {
            Some((a, _)) if (*a - x).abs() <= tol => self.f[i],
            _ => T::zero(),
        }
    }

    /// `(x, f(x)√μ(x))` per atom: the coordinates of the class.
    pub fn amplitudes(&self) -> Vec<(T, T)> {
        self.atoms().iter().zip(&self.f).map(|((x, m), v)| (*x, *v * m.sqrt())).collect()
    }

    pub fn norm_sq(&self) -> T {
        self.atoms().iter().zip(&self.f).map(|((_, m), v)| *v * *v * *m).sum()
    }

    pub fn is_zero(&self, tol: T) -> bool {
        self.norm_sq() <= tol * tol
    }

    /// Pair with the same class, `f/√φ` against `φ dμ`.
    pub fn rewrite(&self, phi: impl Fn(T) -> T) -> Result<Self> {
        let mut atoms = Vec::with_capacity(self.f.len());
        let mut f = Vec::with_capacity(self.f.len());
        for ((x, m), v) in self.atoms().iter().zip(&self.f) {
            let p = phi(*x);
            if !(p > T::zero()) {
                return Err(Error::InvalidArgument("rewrite density must be positive on the atoms".into()));
            }
            atoms.push((*x, *m * p));
            f.push(*v / p.sqrt());
        }
        Ok(HilbertPair { mu: Measure::Atomic(atoms), f })
    }

    fn from_triples(mut t: Vec<(T, T, T)>) -> Self {
        t.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let tol = atom_tol::<T>();
        let mut atoms: Vec<(T, T)> = Vec::with_capacity(t.len());
        let mut f: Vec<T> = Vec::with_capacity(t.len());
        for (x, m, v) in t {
            match atoms.last_mut() {
                // coincident atoms: keep the amplitude additive
                Some(last) if (x - last.0).abs() <= tol => {
                    let fl = f.last_mut().unwrap();
                    let amp = *fl * last.1.sqrt() + v * m.sqrt();
                    last.1 += m;
                    *fl = amp / last.1.sqrt();
                }
                _ => {
                    atoms.push((x, m));
                    f.push(v);
                }
            }
        }
        HilbertPair { mu: Measure::Atomic(atoms), f }
    }
}

/// Walks the union of two sorted atom lists.
fn zip_atoms<T: Scalar>(a: &[(T, T)], b: &[(T, T)], mut visit: impl FnMut(Option<usize>, Option<usize>)) {
    let tol = atom_tol::<T>();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) if (p.0 - q.0).abs() <= tol => {
                visit(Some(i), Some(j));
                i += 1;
                j += 1;
            }
            (Some(p), Some(q)) if p.0 < q.0 => {
                visit(Some(i), None);
                i += 1;
            }
            (Some(_), None) => {
                visit(Some(i), None);
                i += 1;
            }
            _ => {
                visit(None, Some(j));
                j += 1;
            }
        }
    }
}

/// `f√(dμ/dλ) = g√(dν/dλ)` atomwise on `λ = μ + ν`, to `1e-12`.
pub fn uhs_equivalent<T: Scalar>(a: &HilbertPair<T>, b: &HilbertPair<T>) -> bool {
    let tol = crate::transferop::arith_tol::<T>(1e-12);
    let (aa, ba) = (a.atoms(), b.atoms());
    let mut ok = true;
    zip_atoms(aa, ba, |i, j| {
        let mu = i.map(|i| aa[i].1).unwrap_or(T::zero());
        let nu = j.map(|j| ba[j].1).unwrap_or(T::zero());
        let lambda = mu + nu;
        let lhs = i.map(|i| a.f[i]).unwrap_or(T::zero()) * (mu / lambda).sqrt();
        let rhs = j.map(|j| b.f[j]).unwrap_or(T::zero()) * (nu / lambda).sqrt();
        ok &= (lhs - rhs).abs() <= tol;
    });
    ok
}

/// `∫ f g √(dμ/dλ)√(dν/dλ) dλ`.
pub fn uhs_inner<T: Scalar>(a: &HilbertPair<T>, b: &HilbertPair<T>) -> T {
    let (aa, ba) = (a.atoms(), b.atoms());
    let mut acc = T::zero();
    zip_atoms(aa, ba, |i, j| {
        if let (Some(i), Some(j)) = (i, j) {
            acc += a.f[i] * b.f[j] * (aa[i].1 * ba[j].1).sqrt();
        }
    });
    acc
}

/// `Ŝ(f√dμ) = (f∘σ)√d(μR)` for normalized `R`.
#[allow(non_snake_case)]
pub fn uhs_S<T: Scalar>(r: &TransferOperator<T>, a: &HilbertPair<T>) -> Result<HilbertPair<T>> {
    r.require_normalized()?;
    Ok(uhs_s_raw(r, a))
}

/// `Ŝ` without the normalization check; `‖Ŝa‖² = ∫ f² R(1) dμ`.
pub fn uhs_s_raw<T: Scalar>(r: &TransferOperator<T>, a: &HilbertPair<T>) -> HilbertPair<T> {
    let mut out = Vec::new();
    for ((x, m), v) in a.atoms().iter().zip(&a.f) {
        for (_, y, w) in r.kernel_atoms(*x) {
            if w > T::zero() {
                out.push((y, *m * w, *v));
            }
        }
    }
    let top = out.iter().fold(T::zero(), |t, p| t.max(p.1));
    let floor = top * T::epsilon() * T::epsilon();
    out.retain(|p| p.1 > floor);
    HilbertPair::from_triples(out)
}

/// `(μ∘σ⁻¹)R`.
pub fn k1_image<T: Scalar>(r: &TransferOperator<T>, mu: &Measure<T>) -> Result<Measure<T>> {
    act_on_measure(r, &pushforward_atomic(r.map(), mu)?)
}

/// `μ ∈ K₁`, i.e. `(μ∘σ⁻¹)R = μ` atomwise to `1e-12`.
pub fn in_k1<T: Scalar>(r: &TransferOperator<T>, mu: &Measure<T>) -> Result<bool> {
    Ok(atomic_distance(&k1_image(r, mu)?, mu)? <= lit(1e-12))
}

/// `(R f)√d(μ∘σ⁻¹)` with `f` evaluated as a function, also off the atoms
/// of `μ`.
#[allow(non_snake_case)]
pub fn uhs_R_formula<T: Scalar>(
    r: &TransferOperator<T>,
    f: &dyn Fn(T) -> T,
    mu: &Measure<T>,
) -> Result<HilbertPair<T>> {
    let pushed = pushforward_atomic(r.map(), mu)?;
    HilbertPair::from_fn(pushed, |x| r.apply(f, x))
}

/// `R̂` on a class. `k1` is the caller's claim that `μ ∈ K₁` and is checked
/// against recomputation.
///
/// On `H_{K₁}` this is `(R f)√d(μ∘σ⁻¹)`. A general atomic class splits
/// into atoms of zero weight, which are orthogonal to `H_{K₁}` and are
/// sent to zero, and the rest, which lies in `H((μ∘σ⁻¹)R)`; the result is
/// `x ↦ Σ_{σy=x} √W(y) f(y)√μ(y)` in amplitude coordinates.
#[allow(non_snake_case)]
pub fn uhs_R<T: Scalar>(r: &TransferOperator<T>, b: &HilbertPair<T>, k1: bool) -> Result<HilbertPair<T>> {
    if b.atoms().is_empty() {
        return Ok(HilbertPair::zero());
    }
    let actual = in_k1(r, b.measure())?;
    if actual != k1 {
        return Err(Error::InconsistentCertificate { claimed: k1, actual });
    }
    if actual {
        return uhs_R_formula(r, &|y| b.value_at(y), b.measure());
    }
    let map = r.map();
    let pushed = pushforward_atomic(map, b.measure())?;
    let targets = pushed.atoms().unwrap_or(&[]);
    let tol = atom_tol::<T>();
    let floor = T::epsilon() * T::epsilon();
    let mut amp: Vec<Option<T>> = vec![None; targets.len()];
    for ((y, m), v) in b.atoms().iter().zip(&b.f) {
        let x = map.sigma(*y)?;
        let w = r.weight(*y);
        if w <= floor * r.apply_one(x).max(T::one()) {
            continue;
        }
        let i = targets.partition_point(|(a, _)| *a < x - tol);
        *amp[i].get_or_insert(T::zero()) += w.sqrt() * *v * m.sqrt();
    }
    let (mut mu_out, mut f_out) = (Vec::new(), Vec::new());
    for (t, a) in targets.iter().zip(amp) {
        if let Some(a) = a {
            mu_out.push(*t);
            f_out.push(a / t.1.sqrt());
        }
    }
    if mu_out.is_empty() {
        return Ok(HilbertPair::zero());
    }
    HilbertPair::new(Measure::Atomic(mu_out), f_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::dynamics::BranchMap;

    fn pair(atoms: Vec<(f64, f64)>, f: Vec<f64>) -> HilbertPair<f64> {
        HilbertPair::new(Measure::atomic(atoms).unwrap(), f).unwrap()
    }

    #[test]
    fn equivalence_and_inner_product() {
        let a = pair(vec![(0.1, 0.5), (0.4, 0.5)], vec![1.0, -2.0]);
        let b = a.rewrite(|x| 1.0 + x).unwrap();
        assert!(uhs_equivalent(&a, &b) && uhs_equivalent(&b, &a));
        assert!((uhs_inner(&a, &a) - uhs_inner(&b, &a)).abs() < 1e-12);
        assert!((uhs_inner(&a, &a) - a.norm_sq()).abs() < 1e-15);
        let neg = pair(vec![(0.1, 0.5), (0.4, 0.5)], vec![-1.0, 2.0]);
        assert!(!uhs_equivalent(&a, &neg));
        let far = pair(vec![(0.7, 1.0)], vec![1.0]);
        assert!(!uhs_equivalent(&a, &far));
        assert_eq!(uhs_inner(&a, &far), 0.0);
        let d = pair(vec![(0.3, 1.0)], vec![1.0]);
        assert_eq!(uhs_inner(&d, &d), 1.0);
    }

    #[test]
    fn s_hat_on_dirac() {
        let r = TransferOperator::<f64>::doubling_half();
        let s = uhs_S(&r, &pair(vec![(0.6, 1.0)], vec![1.0])).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0]);
        let at = s.atoms();
        assert!((at[0].0 - 0.3).abs() < 1e-15 && (at[1].0 - 0.8).abs() < 1e-15);
        assert!((at[0].1 - 0.5).abs() < 1e-15 && (s.norm_sq() - 1.0).abs() < 1e-15);

        let c = TransferOperator::<f64>::doubling_cos2();
        let a = 0.35;
        let s = uhs_S(&c, &pair(vec![(a, 1.0)], vec![2.0])).unwrap();
        let at = s.atoms();
        let ph = std::f64::consts::PI * a / 2.0;
        assert!((at[0].1 - ph.cos().powi(2)).abs() < 1e-15);
        assert!((at[1].1 - ph.sin().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn r_hat_inverts_s_hat_and_is_adjoint() {
        let r = TransferOperator::<f64>::doubling_cos2();
        let a = pair(vec![(0.2, 0.25), (0.55, 0.75)], vec![1.5, -0.5]);
        let s = uhs_S(&r, &a).unwrap();
        let back = uhs_R(&r, &s, true).unwrap();
        assert!(uhs_equivalent(&back, &a));
        // b is not in K₁ but is dominated by a K₁ measure
        let b = pair(vec![(0.1, 0.4), (0.6, 0.6)], vec![0.7, 1.3]);
        assert!(!in_k1(&r, b.measure()).unwrap());
        let rb = uhs_R(&r, &b, false).unwrap();
        assert!((uhs_inner(&s, &b) - uhs_inner(&a, &rb)).abs() < 1e-12);
        assert!(matches!(uhs_R(&r, &b, true), Err(Error::InconsistentCertificate { .. })));
    }

    #[test]
    fn half_dirac_lemma() {
        let r = TransferOperator::<f64>::doubling_cos2();
        let d = Measure::dirac(0.5).unwrap();
        let img = k1_image(&r, &d).unwrap();
        assert!(atomic_distance(&img, &Measure::dirac(0.0).unwrap()).unwrap() < 1e-12);
        let f = |x: f64| 3.0 + x;
        let e = uhs_s_raw(&r, &uhs_R_formula(&r, &f, &d).unwrap());
        assert_eq!(e.atoms(), &[(0.0, 1.0)]);
        assert!((e.values()[0] - 3.0).abs() < 1e-15);
        // as a class, √dδ_½ is orthogonal to H_{K₁}
        assert!(uhs_R(&r, &HilbertPair::from_fn(d, f).unwrap(), false).unwrap().is_zero(1e-15));
    }

    #[test]
    fn norm_ratio_for_unnormalized_operator() {
        let map = Arc::new(BranchMap::<f64>::doubling());
        let r = TransferOperator::new(map, Arc::new(|y: f64| 0.25 + y), "affine").unwrap();
        assert!(uhs_S(&r, &pair(vec![(0.3, 1.0)], vec![1.0])).is_err());
        let a = pair(vec![(0.3, 0.5), (0.9, 0.5)], vec![1.0, 2.0]);
        let s = uhs_s_raw(&r, &a);
        let expect: f64 = a.atoms().iter().zip(a.values()).map(|((x, m), v)| v * v * m * r.apply_one(*x)).sum();
        assert!((s.norm_sq() - expect).abs() < 1e-14);
        assert!((s.norm_sq() - a.norm_sq()).abs() > 0.1);
    }
}

//! Couplings on a finite space and the positive operators they induce.
//!
//! Marginals: `μ₁` is the row sums of `ν` and `μ₂` the column sums.

use std::fmt::Debug;

use num_traits::{Num, Signed};

use crate::error::{Error, Result};

/// Ordered field the coupling maps run in: floats with a tolerance, or an
/// exact rational type with tolerance zero.
pub trait Exact: Num + Signed + Clone + PartialOrd + Debug {}

impl<F: Num + Signed + Clone + PartialOrd + Debug> Exact for F {}

pub type Matrix<F> = Vec<Vec<F>>;

#[derive(Clone, Debug, PartialEq)]
pub struct Coupling<F> {
    joint: Matrix<F>,
}

fn check_square<F>(m: &Matrix<F>, what: &str) -> Result<usize> {
    let n = m.len();
    if n == 0 || m.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidCoupling(format!("{what} must be a nonempty square matrix")));
    }
    Ok(n)
}

fn sum<F: Exact>(it: impl Iterator<Item = F>) -> F {
    it.fold(F::zero(), |a, b| a + b)
}

impl<F: Exact> Coupling<F> {
    pub fn new(joint: Matrix<F>) -> Result<Self> {
        check_square(&joint, "joint measure")?;
        for (x, row) in joint.iter().enumerate() {
            if let Some(y) = row.iter().position(|v| *v < F::zero()) {
                return Err(Error::InvalidCoupling(format!("ν({x},{y}) is negative")));
            }
        }
        Ok(Coupling { joint })
    }

    pub fn joint(&self) -> &Matrix<F> {
        &self.joint
    }

    pub fn size(&self) -> usize {
        self.joint.len()
    }

    pub fn mu1(&self) -> Vec<F> {
        self.joint.iter().map(|r| sum(r.iter().cloned())).collect()
    }

    pub fn mu2(&self) -> Vec<F> {
        (0..self.size()).map(|y| sum(self.joint.iter().map(|r| r[y].clone()))).collect()
    }

    /// Both marginals match within `tol`.
    pub fn has_marginals(&self, mu1: &[F], mu2: &[F], tol: &F) -> bool {
        let close = |a: &[F], b: &[F]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x.clone() - y.clone()).abs() <= *tol);
        close(&self.mu1(), mu1) && close(&self.mu2(), mu2)
    }

    pub fn max_difference(&self, other: &Self) -> F {
        max_difference(&self.joint, &other.joint)
    }
}

pub fn max_difference<F: Exact>(a: &Matrix<F>, b: &Matrix<F>) -> F {
    let mut m = F::zero();
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            let d = (x.clone() - y.clone()).abs();
            if d > m {
                m = d;
            }
        }
    }
    m
}

/// `P[x][y] = ν(x,y)/μ₁(x)`. A row with `μ₁(x) = 0` is not determined by
/// `ν`; it is set to `δ_x`.
pub fn coupling_to_operator<F: Exact>(nu: &Coupling<F>) -> Result<Matrix<F>> {
    let n = nu.size();
    let mu1 = nu.mu1();
    let mut p = Vec::with_capacity(n);
    for (x, row) in nu.joint.iter().enumerate() {
        if mu1[x].is_zero() {
            let mut e = vec![F::zero(); n];
            e[x] = F::one();
            p.push(e);
        } else {
            p.push(row.iter().map(|v| v.clone() / mu1[x].clone()).collect());
        }
    }
    Ok(p)
}

/// `ν[x][y] = μ₁(x) P[x][y]`; `P` must be row-stochastic within `tol`.
pub fn operator_to_coupling<F: Exact>(p: &Matrix<F>, mu1: &[F], tol: &F) -> Result<Coupling<F>> {
    let n = check_square(p, "operator")?;
    if mu1.len() != n {
        return Err(Error::InvalidCoupling(format!("μ₁ has {} atoms, P is {n}×{n}", mu1.len())));
    }
    if let Some(x) = mu1.iter().position(|m| *m < F::zero()) {
        return Err(Error::InvalidCoupling(format!("μ₁({x}) is negative")));
    }
    for (x, row) in p.iter().enumerate() {
        if let Some(y) = row.iter().position(|v| *v < F::zero()) {
            return Err(Error::InvalidCoupling(format!("P({x},{y}) is negative")));
        }
        let s = sum(row.iter().cloned());
        if (s.clone() - F::one()).abs() > *tol {
            return Err(Error::InvalidCoupling(format!("row {x} of P sums to {s:?}, not 1")));
        }
    }
    let joint = p
        .iter()
        .zip(mu1)
        .map(|(row, m)| row.iter().map(|v| m.clone() * v.clone()).collect())
        .collect();
    Coupling::new(joint)
}

/// `μ₁ ⊗ μ₂`.
pub fn product_coupling<F: Exact>(mu1: &[F], mu2: &[F]) -> Result<Coupling<F>> {
    if mu1.len() != mu2.len() {
        return Err(Error::InvalidCoupling("marginals live on different spaces".into()));
    }
    Coupling::new(mu1.iter().map(|a| mu2.iter().map(|b| a.clone() * b.clone()).collect()).collect())
}

/// `ν(A×B) = μ(A ∩ σ⁻¹B)` for a map `σ` on `0..m`.
pub fn deterministic_coupling<F: Exact>(sigma: &[usize], mu: &[F]) -> Result<Coupling<F>> {
    let n = sigma.len();
    if mu.len() != n || sigma.iter().any(|&s| s >= n) {
        return Err(Error::InvalidCoupling("σ must map 0..m into itself and match μ".into()));
    }
    let mut joint = vec![vec![F::zero(); n]; n];
    for (x, &s) in sigma.iter().enumerate() {
        joint[x][s] = mu[x].clone();
    }
    Coupling::new(joint)
}

/// Matrix of `S_σ f = f∘σ`.
pub fn composition_matrix<F: Exact>(sigma: &[usize]) -> Matrix<F> {
    let n = sigma.len();
    let mut p = vec![vec![F::zero(); n]; n];
    for (x, &s) in sigma.iter().enumerate() {
        p[x][s] = F::one();
    }
    p
}

/// `μ₁ P`.
pub fn push_marginal<F: Exact>(mu1: &[F], p: &Matrix<F>) -> Vec<F> {
    (0..p.len()).map(|y| sum(mu1.iter().zip(p).map(|(m, r)| m.clone() * r[y].clone()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(a: i64, b: i64) -> Q {
        Ratio::new(a, b)
    }

    #[test]
    fn exact_round_trip() {
        let p = vec![vec![q(1, 2), q(1, 2), q(0, 1)], vec![q(0, 1), q(1, 3), q(2, 3)], vec![q(1, 1), q(0, 1), q(0, 1)]];
        let mu1 = vec![q(1, 4), q(1, 4), q(1, 2)];
        let zero = q(0, 1);
        let nu = operator_to_coupling(&p, &mu1, &zero).unwrap();
        assert_eq!(coupling_to_operator(&nu).unwrap(), p);
        assert_eq!(nu.mu1(), mu1);
        assert_eq!(nu.mu2(), push_marginal(&mu1, &p));
        let back = operator_to_coupling(&coupling_to_operator(&nu).unwrap(), &nu.mu1(), &zero).unwrap();
        assert_eq!(back, nu);
    }

    #[test]
    fn product_gives_rank_one() {
        let mu1 = vec![q(1, 3), q(2, 3)];
        let mu2 = vec![q(1, 5), q(4, 5)];
        let p = coupling_to_operator(&product_coupling(&mu1, &mu2).unwrap()).unwrap();
        assert!(p.iter().all(|r| *r == mu2));
    }

    #[test]
    fn deterministic_gives_composition() {
        let sigma = [2, 0, 0, 1];
        let mu = vec![0.1, 0.2, 0.3, 0.4];
        let p = coupling_to_operator(&deterministic_coupling(&sigma, &mu).unwrap()).unwrap();
        assert_eq!(p, composition_matrix::<f64>(&sigma));
    }

    #[test]
    fn validation() {
        assert!(Coupling::new(vec![vec![1.0, -0.1], vec![0.0, 0.1]]).is_err());
        assert!(operator_to_coupling(&vec![vec![0.5, 0.4], vec![0.0, 1.0]], &[0.5, 0.5], &1e-12).is_err());
    }
}

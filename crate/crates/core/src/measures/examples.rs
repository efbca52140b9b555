use crate::error::Result;
use crate::interval::Grid;
use crate::report::Check;
use crate::scalar::{count, lit, to_f64, Scalar};
use crate::transferop::TransferOperator;

use super::{act_on_measure, atomic_distance, radon_nikodym, Measure};

/// `(2π)⁻¹ Π_{k=1}^n (1 + cos(2·3^k t))`.
pub fn riesz_partial_density<T: Scalar>(n: usize, t: T) -> T {
    let mut acc = T::one() / T::TAU();
    let mut freq = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    for _ in 0..n {
        freq = freq * three;
        acc *= T::one() + (freq * t).cos();
    }
    acc
}

/// `∫₀^{2π}` of the partial density by the periodic trapezoid rule with
/// `3^{n+1}` nodes, which is exact for the trigonometric polynomial.
pub fn riesz_partial_integral(n: usize) -> f64 {
    let m = 3usize.pow(n as u32 + 1);
    crate::numeric::periodic_trapezoid(|t: f64| riesz_partial_density(n, t), std::f64::consts::TAU, m)
}

/// The four cells of the table of invariant measures for the doubling map
/// with weights `½` and `cos²(πy)`. Histogram cells use an `n`-cell grid.
pub fn verify_table1<T: Scalar>(n: usize) -> Result<Vec<Check>> {
    let half = TransferOperator::<T>::doubling_half();
    let cos2 = TransferOperator::<T>::doubling_cos2();
    let tol_exact = 1e-12;
    let mut checks = Vec::new();

    let leb = Measure::<T>::uniform_histogram(n);
    let img = act_on_measure(&half, &leb)?;
    let dev = img
        .cells()
        .unwrap()
        .iter()
        .zip(leb.cells().unwrap())
        .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs() * count::<T>(n)));
    checks.push(Check::within("lebesgue_R_half_invariant", to_f64(dev), 1e-9));

    let d0 = Measure::<T>::dirac(T::zero())?;
    let half_img = act_on_measure(&half, &d0)?;
    let target = Measure::atomic(vec![(T::zero(), lit(0.5)), (lit(0.5), lit(0.5))])?;
    checks.push(Check::within("delta0_R_half_atoms", to_f64(atomic_distance(&half_img, &target)?), tol_exact));
    let ac = half_img.absolutely_continuous_wrt(&d0)?;
    checks.push(Check::new("delta0_R_half_not_ac_wrt_delta0", !ac, if ac { 1.0 } else { 0.0 }));

    // exact cell average of 2cos²(πx) is 1 + (sin 2πb - sin 2πa) / (2π h)
    let w = radon_nikodym(&cos2, &leb)?;
    let grid = Grid::new(n);
    let h = grid.width::<T>();
    let mut avg_dev = T::zero();
    let mut point_dev = T::zero();
    for (i, v) in w.values().iter().enumerate() {
        let c = grid.cell::<T>(i);
        let exact = T::one() + ((T::TAU() * c.hi).sin() - (T::TAU() * c.lo).sin()) / (T::TAU() * h);
        avg_dev = avg_dev.max((*v - exact).abs());
        let x = grid.midpoint::<T>(i);
        let p = (T::PI() * x).cos();
        point_dev = point_dev.max((*v - lit::<T>(2.0) * p * p).abs());
    }
    checks.push(Check::within("lebesgue_R_cos2_density_cell_average", to_f64(avg_dev), 1e-9));
    checks.push(Check::within("lebesgue_R_cos2_density_sup", to_f64(point_dev), 5.0 / n as f64));

    let cos_img = act_on_measure(&cos2, &d0)?;
    checks.push(Check::within("delta0_R_cos2_fixed", to_f64(atomic_distance(&cos_img, &d0)?), tol_exact));
    let single = cos_img.atoms().map(|a| a.len() == 1).unwrap_or(false);
    checks.push(Check::new("delta0_R_cos2_single_atom", single, if single { 0.0 } else { 1.0 }));
    Ok(checks)
}

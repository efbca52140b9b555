use crate::scalar::Scalar;

/// A subinterval of the real line with explicit endpoint closedness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl<T: Scalar> Interval<T> {
    /// `[lo, hi)`
    pub fn half_open(lo: T, hi: T) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: false }
    }

    /// `(lo, hi]`
    pub fn left_open(lo: T, hi: T) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: true }
    }

    pub fn unit() -> Self {
        Self::half_open(T::zero(), T::one())
    }

    pub fn length(&self) -> T {
        (self.hi - self.lo).max(T::zero())
    }

    pub fn midpoint(&self) -> T {
        (self.lo + self.hi) / (T::one() + T::one())
    }

    pub fn contains(&self, x: T) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    /// Membership allowing `tol` of slack at both ends.
    pub fn contains_approx(&self, x: T, tol: T) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    /// Length of the intersection with `[a, b]`.
    pub fn overlap(&self, a: T, b: T) -> T {
        (self.hi.min(b) - self.lo.max(a)).max(T::zero())
    }

    /// Intersection as closed endpoints `(lo, hi)`, or `None` when the overlap
    /// has zero length.
    pub fn clip(&self, a: T, b: T) -> Option<(T, T)> {
        let lo = self.lo.max(a);
        let hi = self.hi.min(b);
        (hi > lo).then_some((lo, hi))
    }

    /// Image under a monotone map; `increasing` selects whether the endpoints
    /// (and their closedness flags) swap.
    pub fn map_monotone(&self, f: impl Fn(T) -> T, increasing: bool) -> Self {
        let a = f(self.lo);
        let b = f(self.hi);
        if increasing {
            Interval { lo: a, hi: b, lo_closed: self.lo_closed, hi_closed: self.hi_closed }
        } else {
            Interval { lo: b, hi: a, lo_closed: self.hi_closed, hi_closed: self.lo_closed }
        }
    }

    /// Exact intersection, `None` when empty.
    pub fn intersect(&self, other: &Interval<T>) -> Option<Self> {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        if lo < hi || (lo == hi && lo_closed && hi_closed) {
            Some(Interval { lo, hi, lo_closed, hi_closed })
        } else {
            None
        }
    }

    /// `true` when `self` lies inside `outer` up to `tol` at both ends.
    pub fn within(&self, outer: &Interval<T>, tol: T) -> bool {
        self.lo >= outer.lo - tol && self.hi <= outer.hi + tol
    }
}

/// Uniform grid of `n` half-open cells on `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        Grid { n }
    }

    pub fn width<T: Scalar>(&self) -> T {
        T::one() / crate::scalar::count::<T>(self.n)
    }

    pub fn cell<T: Scalar>(&self, i: usize) -> Interval<T> {
        let n = crate::scalar::count::<T>(self.n);
        Interval::half_open(crate::scalar::count::<T>(i) / n, crate::scalar::count::<T>(i + 1) / n)
    }

    pub fn midpoint<T: Scalar>(&self, i: usize) -> T {
        (crate::scalar::count::<T>(i) + crate::scalar::lit(0.5)) / crate::scalar::count::<T>(self.n)
    }

    pub fn midpoints<T: Scalar>(&self) -> Vec<T> {
        (0..self.n).map(|i| self.midpoint(i)).collect()
    }

    /// Index of the cell containing `x`, clamped into range.
    pub fn locate<T: Scalar>(&self, x: T) -> usize {
        let idx = (x * crate::scalar::count::<T>(self.n)).floor();
        let idx = idx.to_isize().unwrap_or(0);
        idx.clamp(0, self.n as isize - 1) as usize
    }

    /// Range of cells whose interior meets `(lo, hi)`.
    pub fn span<T: Scalar>(&self, lo: T, hi: T) -> std::ops::Range<usize> {
        let nn = crate::scalar::count::<T>(self.n);
        let first = (lo * nn).floor().to_isize().unwrap_or(0).clamp(0, self.n as isize) as usize;
        let last = (hi * nn).ceil().to_isize().unwrap_or(0).clamp(0, self.n as isize) as usize;
        first..last.max(first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closedness_controls_membership() {
        let a = Interval::half_open(0.0, 0.5);
        assert!(a.contains(0.0));
        assert!(!a.contains(0.5));
        let b = Interval::left_open(0.5, 1.0);
        assert!(!b.contains(0.5));
        assert!(b.contains(1.0));
    }

    #[test]
    fn decreasing_map_swaps_closedness() {
        let a = Interval::half_open(0.0, 1.0);
        let img = a.map_monotone(|x: f64| 1.0 / (1.0 + x), false);
        assert_eq!(img.lo, 0.5);
        assert_eq!(img.hi, 1.0);
        assert!(!img.lo_closed);
        assert!(img.hi_closed);
    }

    #[test]
    fn grid_span_covers_touching_cells() {
        let g = Grid::new(4);
        assert_eq!(g.span(0.25, 0.5), 1..2);
        assert_eq!(g.span(0.2, 0.55), 0..3);
        assert_eq!(g.locate(0.999_f64), 3);
        assert_eq!(g.locate(1.0_f64), 3);
    }
}

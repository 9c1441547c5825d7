//! Golden-section minimisation on a bracket.

use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenSearch<T> {
    pub x: T,
    pub fx: T,
    pub evaluations: usize,
    /// Bracket after every iteration, outermost first.
    pub brackets: Vec<(T, T)>,
    /// Best objective value seen after every iteration.
    pub best: Vec<T>,
}

/// Minimises a unimodal `f` on `[lo, hi]` until the bracket is narrower than `tol`.
pub fn golden_section<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    tol: T,
) -> GoldenSearch<T> {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    let mut brackets = vec![(a, b)];
    let mut best = vec![fc.min(fd)];
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
        evaluations += 1;
        brackets.push((a, b));
        best.push(best.last().copied().unwrap_or(fc).min(fc.min(fd)));
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    GoldenSearch {
        x,
        fx,
        evaluations,
        brackets,
        best,
    }
}

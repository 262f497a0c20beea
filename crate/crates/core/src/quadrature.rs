//! Composite Gauss–Legendre panels and Richardson extrapolation.

use gauss_quad::legendre::GaussLegendre;

use crate::fourier::Coeff;
use crate::scalar::Real;

/// Gauss–Legendre rule on `[-1, 1]` converted to the working scalar.
#[derive(Debug, Clone)]
pub struct GaussRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    pub fn new(points: usize) -> Self {
        let rule = GaussLegendre::new(points.max(2)).expect("at least two nodes");
        let nodes = rule.nodes().map(|&x| T::lit(x)).collect();
        let weights = rule.weights().map(|&w| T::lit(w)).collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_a^b f` with one panel.
    pub fn integrate<V, F>(&self, a: T, b: T, mut f: F) -> V
    where
        V: Coeff<T>,
        F: FnMut(T) -> V,
    {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        let mut acc = V::zero();
        for (&x, &w) in self.nodes.iter().zip(self.weights.iter()) {
            acc = acc + f(mid + half * x) * w;
        }
        acc * half
    }

    /// `∫_a^b f` split into `panels` equal sub-intervals.
    pub fn integrate_panels<V, F>(&self, a: T, b: T, panels: usize, mut f: F) -> V
    where
        V: Coeff<T>,
        F: FnMut(T) -> V,
    {
        let panels = panels.max(1);
        let width = (b - a) / T::from_usize_lossy(panels);
        let mut acc = V::zero();
        for p in 0..panels {
            let lo = a + width * T::from_usize_lossy(p);
            acc = acc + self.integrate(lo, lo + width, &mut f);
        }
        acc
    }
}

/// Outcome of a Richardson extrapolation to step zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolated<V> {
    pub value: V,
    /// Difference between the two highest-order tableau diagonals.
    pub residual: V,
}

/// Neville–Richardson extrapolation of `values[k] = F(h0·ratio^k)` to `h → 0`,
/// assuming `F(h) = F(0) + c₁h + c₂h² + …`.
pub fn richardson<T: Real, V: Coeff<T>>(values: &[V], ratio: T) -> Extrapolated<V> {
    richardson_powers(values, ratio, 1, 1)
}

/// Neville tableau for `F(h) = F0 + c_1 h^{p_1} + c_2 h^{p_2} + …` with
/// exponents `p_j = first + (j-1)·step`, on a ladder `h_k = h_0 · ratio^k`
/// (coarse to fine).
pub fn richardson_powers<T: Real, V: Coeff<T>>(
    values: &[V],
    ratio: T,
    first: i32,
    step: i32,
) -> Extrapolated<V> {
    assert!(!values.is_empty(), "richardson needs at least one level");
    let n = values.len();
    let mut prev: Vec<V> = values.to_vec();
    let mut diag = vec![values[0]];
    let inv = T::one() / ratio;
    for j in 1..n {
        let factor = inv.powi(first + (j as i32 - 1) * step);
        let mut cur = Vec::with_capacity(n - j);
        for k in j..n {
            let fine = prev[k - j + 1];
            let coarse = prev[k - j];
            cur.push(fine + (fine - coarse) * (T::one() / (factor - T::one())));
        }
        diag.push(cur[0]);
        prev = cur;
    }
    let value = *diag.last().expect("non-empty");
    let residual = if n >= 2 {
        value - diag[n - 2]
    } else {
        V::zero()
    };
    Extrapolated { value, residual }
}

//! Conformal angle between the two tangent circles of a chord and the
//! regularized inverse-square potential `V(f, s)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::SampledKnot;
use crate::error::{KnotError, Result};
use crate::fourier::Coeff;
use crate::moebius::MoebiusTransform;
use crate::quadrature::{richardson_powers, Extrapolated, GaussRule};
use crate::scalar::{pairwise_sum, Real};
use crate::vec3::Vec3;

/// Chord and angle data for a pair of curve points with unit tangents.
#[derive(Debug, Clone, Copy)]
pub struct PairGeometry<T> {
    /// `f(t) - f(s)`
    pub chord: Vec3<T>,
    pub dist_sq: T,
    /// `1 - cos θ`, computed as `|τ_t - Rτ_s|² / 2` to avoid cancellation.
    pub one_minus_cos: T,
    pub sin: T,
    pub theta: T,
    /// `τ_t × Rτ_s`; flips direction where `θ` passes through `0` or `π`.
    pub cross: Vec3<T>,
}

/// Angle data for points `p`, `q` with unit tangents `ts`, `tt`.
///
/// `Rτ_s` is `τ_s` reflected in the plane orthogonal to the chord; the
/// circle tangent to `τ_s` at `p` arrives at `q` with direction `-Rτ_s`
/// reversed, so a round circle gives `θ = 0`.
pub fn pair_geometry<T: Real>(
    p: Vec3<T>,
    ts: Vec3<T>,
    q: Vec3<T>,
    tt: Vec3<T>,
) -> Option<PairGeometry<T>> {
    let chord = q - p;
    let dist_sq = chord.norm_sq();
    if !(dist_sq > T::zero()) {
        return None;
    }
    let e = chord / dist_sq.sqrt();
    let refl = e * (T::lit(2.0) * e.dot(ts)) - ts;
    let w = tt - refl;
    let wn = w.norm();
    let half = (wn / T::lit(2.0)).min(T::one());
    let cross = tt.cross(refl);
    Some(PairGeometry {
        chord,
        dist_sq,
        one_minus_cos: wn * wn / T::lit(2.0),
        sin: cross.norm(),
        cross,
        theta: T::lit(2.0) * half.asin(),
    })
}

/// `θ_f(t_i, t_j)` in `[0, π]`.
pub fn conformal_angle<T: Real>(f: &SampledKnot<T>, i: usize, j: usize) -> Result<T> {
    let n = f.len();
    if i >= n || j >= n {
        return Err(KnotError::InvalidParameter(format!(
            "grid index out of range ({i}, {j}) for N = {n}"
        )));
    }
    pair_geometry(f.points[i], f.unit_tangent(i), f.points[j], f.unit_tangent(j))
        .map(|g| g.theta)
        .ok_or_else(|| KnotError::Degenerate(format!("coincident points at indices {i} and {j}")))
}

/// Symmetric `N × N` grid of conformal angles, row-major, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleField<T> {
    pub n: usize,
    pub theta: Vec<T>,
}

impl<T: Real> AngleField<T> {
    pub fn compute(f: &SampledKnot<T>) -> Result<Self> {
        let n = f.len();
        let tangents: Vec<Vec3<T>> = (0..n).map(|i| f.unit_tangent(i)).collect();
        let rows: Vec<Result<Vec<T>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            return Ok(T::zero());
                        }
                        // evaluate each unordered pair in a fixed orientation so the
                        // grid is exactly symmetric
                        let (a, b) = if i < j { (i, j) } else { (j, i) };
                        pair_geometry(f.points[a], tangents[a], f.points[b], tangents[b])
                            .map(|g| g.theta)
                            .ok_or_else(|| {
                                KnotError::Degenerate(format!("coincident points at {a}, {b}"))
                            })
                    })
                    .collect()
            })
            .collect();
        let mut theta = Vec::with_capacity(n * n);
        for r in rows {
            theta.extend(r?);
        }
        Ok(Self { n, theta })
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.theta[i * self.n + j]
    }
}

/// Circle through `p` and `q` tangent to a direction at `p`, or the line
/// when the chord is parallel to that direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TangentCircle<T> {
    Circle {
        center: Vec3<T>,
        radius: T,
        normal: Vec3<T>,
        /// unit tangent at the starting point
        start_dir: Vec3<T>,
    },
    Line {
        dir: Vec3<T>,
    },
}

impl<T: Real> TangentCircle<T> {
    /// Unit tangent at a point `x` on the circle, oriented to agree with the
    /// starting direction.
    pub fn tangent_at(&self, x: Vec3<T>) -> Vec3<T> {
        match *self {
            TangentCircle::Line { dir } => dir,
            TangentCircle::Circle { center, normal, .. } => normal.cross(x - center).normalized(),
        }
    }
}

pub fn tangent_circle_through<T: Real>(p: Vec3<T>, dir: Vec3<T>, q: Vec3<T>) -> Result<TangentCircle<T>> {
    let d = q - p;
    let dn = d.norm();
    if !(dn > T::zero()) {
        return Err(KnotError::Degenerate("tangent circle through coincident points".into()));
    }
    let u = dir.normalized();
    let perp = d.reject_from(u);
    let pn = perp.norm();
    if pn <= T::lit(1e-14) * dn {
        return Ok(TangentCircle::Line { dir: u });
    }
    let n = perp / pn;
    let radius = d.norm_sq() / (T::lit(2.0) * d.dot(n));
    let center = p + n * radius;
    // normal × (p - c) = u
    let normal = u.cross(n);
    Ok(TangentCircle::Circle {
        center,
        radius,
        normal,
        start_dir: u,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMethod {
    Cosine,
    Hadamard,
}

/// Grid of `V(f, t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile<T> {
    pub v: Vec<T>,
    pub method: PotentialMethod,
    /// Richardson residuals (Hadamard route only).
    pub residuals: Option<Vec<T>>,
    /// Indices whose residual exceeded the ladder tolerance.
    pub flagged: Vec<usize>,
}

fn cosine_integrand<T: Real>(p: Vec3<T>, ts: Vec3<T>, q: Vec3<T>, tt: Vec3<T>, speed_t: T) -> T {
    match pair_geometry(p, ts, q, tt) {
        Some(g) => g.one_minus_cos / g.dist_sq * speed_t,
        None => T::zero(),
    }
}

/// Cosine-formula potential on the grid; the diagonal contributes 0.
pub fn potential_v_cosine<T: Real>(f: &SampledKnot<T>) -> PotentialProfile<T> {
    let n = f.len();
    let h = f.h();
    let tangents: Vec<Vec3<T>> = (0..n).map(|i| f.unit_tangent(i)).collect();
    let v = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<T> = (0..n)
                .map(|j| {
                    if i == j {
                        T::zero()
                    } else {
                        cosine_integrand(f.points[i], tangents[i], f.points[j], tangents[j], f.speed[j])
                    }
                })
                .collect();
            pairwise_sum(&row) * h
        })
        .collect();
    PotentialProfile {
        v,
        method: PotentialMethod::Cosine,
        residuals: None,
        flagged: Vec::new(),
    }
}

/// Cosine-formula potential at an arbitrary parameter `s`, summing the
/// integrand over the grid nodes `t_j`.
pub fn potential_v_cosine_at<T: Real>(f: &SampledKnot<T>, s: T) -> T {
    let n = f.len();
    let h = f.h();
    let (p, d) = f.curve.point_and_tangent(s);
    let ts = d.normalized();
    let guard = T::lit(1e-3) * h;
    let row: Vec<T> = (0..n)
        .map(|j| {
            let mut gap = (s - f.param(j)).abs();
            gap = gap - gap.round();
            if gap.abs() < guard {
                // continuous extension vanishes on the diagonal
                T::zero()
            } else {
                cosine_integrand(p, ts, f.points[j], f.unit_tangent(j), f.speed[j])
            }
        })
        .collect();
    pairwise_sum(&row) * h
}

/// Geometric ε-ladder for the finite-part routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HadamardLadder {
    pub levels: usize,
    pub ratio: f64,
    /// Coarsest ε as a fraction of the total length.
    pub coarsest: f64,
    /// Gauss–Legendre nodes per panel.
    pub gauss_points: usize,
    /// Panels on the region outside the coarsest ε.
    pub outer_panels: usize,
    /// Residual above `tolerance · (1 + |value|)` flags the result.
    pub tolerance: f64,
}

impl Default for HadamardLadder {
    fn default() -> Self {
        Self {
            levels: 6,
            ratio: 0.5,
            coarsest: 1.0 / 32.0,
            gauss_points: 16,
            outer_panels: 24,
            tolerance: 1e-6,
        }
    }
}

impl HadamardLadder {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 || !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(KnotError::InvalidParameter(
                "ladder needs at least two levels and a ratio in (0, 1)".into(),
            ));
        }
        if !(self.coarsest > 0.0 && self.coarsest < 0.5) {
            return Err(KnotError::OutOfRange {
                what: "coarsest epsilon fraction",
                value: self.coarsest,
            });
        }
        if self.gauss_points < 2 || self.outer_panels == 0 {
            return Err(KnotError::InvalidParameter("empty quadrature rule".into()));
        }
        Ok(())
    }
}

/// Parameters `(t_+, t_-)` in `(s, s+1)` with forward arc length `ε` and
/// `L - ε` from `s`: the region `d_f(s, ·) ≥ ε` is `[t_+, t_-]`.
fn truncation_window<T: Real>(f: &SampledKnot<T>, s: T, eps: T) -> Result<(T, T)> {
    let base = f.arclength_at(s);
    let lo = f.param_at_arclength(base + eps)?;
    let hi = f.param_at_arclength(base + f.total_len - eps)?;
    Ok((lo, hi))
}

/// Finite part `lim_{ε→0} [∫_{d_f(s,t)≥ε} g(t) dt − counter(ε)]`.
///
/// The truncated integrals use Gauss–Legendre panels between the exact
/// arc-length endpoints; consecutive ladder levels share the region outside
/// the coarser ε, so each level only adds two annuli. Because the truncation
/// is symmetric in arc length, the remainder carries only odd powers of ε,
/// and the Richardson tableau eliminates `ε, ε³, ε⁵, …`.
pub(crate) fn finite_part<T, V, G, C>(
    f: &SampledKnot<T>,
    s: T,
    ladder: &HadamardLadder,
    g: G,
    counter: C,
) -> Result<(Extrapolated<V>, Vec<V>)>
where
    T: Real,
    V: Coeff<T>,
    G: Fn(T) -> V,
    C: Fn(T) -> V,
{
    ladder.validate()?;
    let rule = GaussRule::<T>::new(ladder.gauss_points);
    let ratio = T::lit(ladder.ratio);
    let mut eps = f.total_len * T::lit(ladder.coarsest);
    let (mut lo, mut hi) = truncation_window(f, s, eps)?;
    let mut acc = rule.integrate_panels(lo, hi, ladder.outer_panels, &g);
    let mut values = vec![acc - counter(eps)];
    for _ in 1..ladder.levels {
        eps *= ratio;
        let (nlo, nhi) = truncation_window(f, s, eps)?;
        acc = acc + rule.integrate(nlo, lo, &g) + rule.integrate(hi, nhi, &g);
        values.push(acc - counter(eps));
        lo = nlo;
        hi = nhi;
    }
    Ok((richardson_powers(&values, ratio, 1, 2), values))
}

/// `∫_{d_f(s,t)≥ε} |f'(t)| / |f(s)-f(t)|² dt − 2/ε` at parameter `s`.
///
/// Requires `2h·L ≤ ε < L/2` in arc length.
pub fn potential_v_truncated_at<T: Real>(f: &SampledKnot<T>, s: T, eps: T, gauss_points: usize) -> Result<T> {
    let len = f.total_len;
    if !(eps >= T::lit(2.0) * f.h() * len && eps < len / T::lit(2.0)) {
        return Err(KnotError::OutOfRange {
            what: "truncation epsilon",
            value: eps.as_f64(),
        });
    }
    let p = f.curve.point(s);
    let rule = GaussRule::<T>::new(gauss_points);
    let (lo, hi) = truncation_window(f, s, eps)?;
    // geometric panels toward both ends resolve the 1/σ² growth
    let mut acc = T::zero();
    let mut edges = vec![eps];
    let mut e = eps;
    while e * T::lit(2.0) < len / T::lit(2.0) {
        e *= T::lit(2.0);
        edges.push(e);
    }
    let base = f.arclength_at(s);
    let g = |t: T| {
        let (q, d) = f.curve.point_and_tangent(t);
        d.norm() / (q - p).norm_sq()
    };
    let mut left = lo;
    let mut right = hi;
    for w in edges.windows(2) {
        let nl = f.param_at_arclength(base + w[1])?;
        let nr = f.param_at_arclength(base + len - w[1])?;
        acc += rule.integrate(left, nl, g) + rule.integrate(nr, right, g);
        left = nl;
        right = nr;
    }
    acc += rule.integrate_panels(left, right, 8, g);
    Ok(acc - T::lit(2.0) / eps)
}

pub fn potential_v_truncated<T: Real>(f: &SampledKnot<T>, i: usize, eps: T) -> Result<T> {
    potential_v_truncated_at(f, f.param(i), eps, 16)
}

/// Hadamard finite-part value of `V` at parameter `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HadamardValue<T> {
    pub value: T,
    pub residual: T,
    pub flagged: bool,
}

pub fn potential_v_hadamard_at<T: Real>(f: &SampledKnot<T>, s: T, ladder: &HadamardLadder) -> Result<HadamardValue<T>> {
    let p = f.curve.point(s);
    let (ex, _) = finite_part(
        f,
        s,
        ladder,
        |t: T| {
            let (q, d) = f.curve.point_and_tangent(t);
            d.norm() / (q - p).norm_sq()
        },
        |eps: T| T::lit(2.0) / eps,
    )?;
    let flagged = ex.residual.abs() > T::lit(ladder.tolerance) * (T::one() + ex.value.abs());
    Ok(HadamardValue {
        value: ex.value,
        residual: ex.residual,
        flagged,
    })
}

pub fn potential_v_hadamard_point<T: Real>(f: &SampledKnot<T>, i: usize, ladder: &HadamardLadder) -> Result<HadamardValue<T>> {
    potential_v_hadamard_at(f, f.param(i), ladder)
}

/// Hadamard route on every grid point.
pub fn potential_v_hadamard<T: Real>(f: &SampledKnot<T>, ladder: &HadamardLadder) -> Result<PotentialProfile<T>> {
    let vals: Vec<HadamardValue<T>> = (0..f.len())
        .into_par_iter()
        .map(|i| potential_v_hadamard_point(f, i, ladder))
        .collect::<Result<_>>()?;
    Ok(PotentialProfile {
        v: vals.iter().map(|h| h.value).collect(),
        method: PotentialMethod::Hadamard,
        residuals: Some(vals.iter().map(|h| h.residual).collect()),
        flagged: vals
            .iter()
            .enumerate()
            .filter(|(_, h)| h.flagged)
            .map(|(i, _)| i)
            .collect(),
    })
}

/// `|V(T∘f, t_i) − |T'(f(t_i))|⁻² V(f, t_i)|` on the grid (cosine route).
pub fn verify_v_scaling<T: Real>(t: &MoebiusTransform<T>, f: &SampledKnot<T>) -> Result<Vec<T>> {
    let image = t.apply_to_curve(&f.curve)?.evaluate();
    let factors = t.factors_on(f)?;
    let va = potential_v_cosine(&image).v;
    let vb = potential_v_cosine(f).v;
    Ok((0..f.len())
        .map(|i| (va[i] - vb[i] / (factors[i] * factors[i])).abs())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{Preset, ReparamMap};
    use std::f64::consts::PI;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    /// θ measured from explicit circles: the circle tangent at f(s) through
    /// f(t), its oriented tangent at f(t), and the knot tangent there.
    fn oracle_angle(f: &SampledKnot<f64>, i: usize, j: usize) -> f64 {
        let c = tangent_circle_through(f.points[i], f.unit_tangent(i), f.points[j]).unwrap();
        let dir = c.tangent_at(f.points[j]);
        dir.dot(f.unit_tangent(j)).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn tangent_circle_examples() {
        let c = tangent_circle_through(v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(-1.0, 0.0, 0.0)).unwrap();
        match c {
            TangentCircle::Circle { center, radius, normal, .. } => {
                assert!(center.norm() < 1e-15);
                assert!((radius - 1.0).abs() < 1e-15);
                assert!((normal.z.abs() - 1.0).abs() < 1e-15);
            }
            TangentCircle::Line { .. } => panic!("expected a circle"),
        }
        let l = tangent_circle_through(v(0.0, 0.0, 0.0), v(1.0, 1.0, 0.0), v(2.0, 2.0, 0.0)).unwrap();
        assert!(matches!(l, TangentCircle::Line { .. }));
        assert!(tangent_circle_through(v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(1.0, 0.0, 0.0)).is_err());
        // random triples
        let mut x = 0.37f64;
        let mut rnd = || {
            x = (x * 997.0 + 0.123).fract();
            x * 2.0 - 1.0
        };
        for _ in 0..50 {
            let p = v(rnd(), rnd(), rnd());
            let d = v(rnd(), rnd(), rnd()).normalized();
            let q = v(rnd(), rnd(), rnd());
            if let TangentCircle::Circle { center, radius, normal, start_dir } =
                tangent_circle_through(p, d, q).unwrap()
            {
                assert!(((p - center).norm() - radius).abs() < 1e-10 * radius);
                assert!(((q - center).norm() - radius).abs() < 1e-10 * radius);
                assert!((p - center).dot(d).abs() < 1e-10 * radius);
                assert!(normal.dot(q - p).abs() < 1e-10);
                assert!((normal.cross(p - center).normalized() - start_dir).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn circle_angles_vanish() {
        let f = Preset::unit_circle().build::<f64>(64).unwrap().evaluate();
        let a = AngleField::compute(&f).unwrap();
        assert!(a.theta.iter().all(|&t| t < 1e-7));
    }

    #[test]
    fn closed_form_matches_circle_construction() {
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(256).unwrap().evaluate();
        let got = conformal_angle(&f, 0, 64).unwrap();
        assert!((got - oracle_angle(&f, 0, 64)).abs() < 1e-8);
        let tr = Preset::trefoil().build::<f64>(128).unwrap().evaluate();
        for (i, j) in [(0, 5), (3, 70), (100, 20), (10, 11), (64, 0)] {
            let got = conformal_angle(&tr, i, j).unwrap();
            assert!((got - oracle_angle(&tr, i, j)).abs() < 1e-8, "{i},{j}");
        }
    }

    #[test]
    fn angle_field_symmetry_and_range() {
        let f = Preset::trefoil().build::<f64>(64).unwrap().evaluate();
        let a = AngleField::compute(&f).unwrap();
        for i in 0..64 {
            assert_eq!(a.get(i, i), 0.0);
            for j in 0..64 {
                assert_eq!(a.get(i, j), a.get(j, i));
                assert!((0.0..=PI).contains(&a.get(i, j)));
            }
        }
    }

    #[test]
    fn neighbour_angle_is_quadratic() {
        let e = |n: usize| {
            let f = Preset::ellipse(2.0, 1.0).build::<f64>(n).unwrap().evaluate();
            conformal_angle(&f, n / 8, n / 8 + 1).unwrap()
        };
        let ratio = e(256) / e(512);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn circle_potential_vanishes_both_routes() {
        let f = Preset::unit_circle().build::<f64>(128).unwrap().evaluate();
        assert!(potential_v_cosine(&f).v.iter().all(|x| x.abs() < 1e-8));
        let h = potential_v_hadamard_point(&f, 5, &HadamardLadder::default()).unwrap();
        assert!(h.value.abs() < 1e-8, "{h:?}");
    }

    #[test]
    fn circle_truncation_has_closed_form() {
        // unit circle: ∫_ε^{2π−ε} dσ / (2 sin(σ/2))² = cot(ε/2)
        let f = Preset::unit_circle().build::<f64>(128).unwrap().evaluate();
        for eps in [0.8, 0.4, 0.2] {
            let got = potential_v_truncated(&f, 3, eps).unwrap();
            let exact = 1.0 / (eps / 2.0).tan() - 2.0 / eps;
            assert!((got - exact).abs() < 1e-12, "{eps}: {got} vs {exact}");
        }
        assert!(potential_v_truncated(&f, 0, 0.01).is_err());
        assert!(potential_v_truncated(&f, 0, PI + 0.1).is_err());
    }

    #[test]
    fn ellipse_routes_agree() {
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(256).unwrap().evaluate();
        let cos = potential_v_cosine(&f);
        let lad = HadamardLadder::default();
        for i in [0, 17, 64, 100] {
            let h = potential_v_hadamard_point(&f, i, &lad).unwrap();
            assert!((h.value - cos.v[i]).abs() < 1e-6, "{i}: {} vs {}", h.value, cos.v[i]);
            assert!(!h.flagged);
        }
    }

    #[test]
    fn scaling_divides_by_k() {
        let c = Preset::trefoil().build::<f64>(128).unwrap();
        let a = potential_v_cosine(&c.evaluate()).v;
        let b = potential_v_cosine(&c.scaled(2.5).unwrap().evaluate()).v;
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x / 2.5).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn off_grid_evaluation_matches_grid() {
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(128).unwrap().evaluate();
        let cos = potential_v_cosine(&f).v;
        for i in [0, 9, 77] {
            assert!((potential_v_cosine_at(&f, f.param(i)) - cos[i]).abs() < 1e-13);
        }
        let rho = ReparamMap::new(0.3, 0.1).unwrap();
        let g = f.curve.reparametrize(&rho).unwrap().evaluate();
        let vg = potential_v_cosine(&g).v;
        for i in (0..128).step_by(9) {
            let want = potential_v_cosine_at(&f, rho.apply(g.param(i)));
            assert!((vg[i] - want).abs() < 1e-6, "{i}: {} vs {want}", vg[i]);
        }
    }
}

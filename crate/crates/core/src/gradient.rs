//! The L² gradient `G_E` by a principal-value route and by the finite-part
//! decomposition `G_E = 2(u₁ + u₂ + u₃ + u₄)`, the `Φ`-weighted gradient, and
//! the inversion identities `J(u, f, s)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{finite_part, potential_v_cosine, HadamardLadder};
use crate::curve::{roundness, KnotCurve, SampledKnot};
use crate::energy::energy_e_cosine;
use crate::error::{KnotError, Result};
use crate::metric::{l2_inner, project_normal, TangentField, WeightFunction};
use crate::moebius::MoebiusTransform;
use crate::scalar::{pairwise_sum, Real};
use crate::vec3::Vec3;

/// Roundness below which the weighted gradient is defined to be zero.
pub const CIRCLE_TOL: f64 = 1e-6;
/// Weights below `PHI_FLOOR_REL · median(Φ)` are treated as degenerate.
pub const PHI_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientRoute {
    Pv,
    Hadamard,
}

impl GradientRoute {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "pv" => Ok(GradientRoute::Pv),
            "hadamard" => Ok(GradientRoute::Hadamard),
            other => Err(KnotError::InvalidParameter(format!("unknown gradient route '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    pub g: TangentField<T>,
    pub route: GradientRoute,
    /// `|G_hadamard − G_pv|` per grid point, when both routes ran.
    pub route_residual: Option<Vec<T>>,
    /// Grid points whose finite-part extrapolation was flagged.
    pub flagged: Vec<usize>,
}

fn sum_vec<T: Real>(v: &[Vec3<T>]) -> Vec3<T> {
    let xs: Vec<T> = v.iter().map(|a| a.x).collect();
    let ys: Vec<T> = v.iter().map(|a| a.y).collect();
    let zs: Vec<T> = v.iter().map(|a| a.z).collect();
    Vec3::new(pairwise_sum(&xs), pairwise_sum(&ys), pairwise_sum(&zs))
}

/// `(1/|f'|)(f'/|f'|)' = f''/|f'|² − (f', f'')f'/|f'|⁴`
pub fn curvature_term<T: Real>(d1: Vec3<T>, d2: Vec3<T>) -> Vec3<T> {
    d2.reject_from(d1) / d1.norm_sq()
}

/// Constant term of the Laurent expansion at `t = s` of the principal-value
/// integrand, from the derivatives `f'…f''''` at `s`.
///
/// With `δ = t − s`, the integrand is `(2/δ)·B(δ)·R(δ)` where
/// `B = P(f''')/3 − k(f'·f'') + δ(P(f'''')/12 − k(|f''|²/4 + f'·f'''/3)) + …`
/// and `R = |f'(t)|/Q² = |f'|⁻³ − δ(f'·f'')/|f'|⁵ + …`.
fn pv_diagonal<T: Real>(a1: Vec3<T>, a2: Vec3<T>, a3: Vec3<T>, a4: Vec3<T>) -> Vec3<T> {
    let q0 = a1.norm_sq();
    let k = curvature_term(a1, a2);
    let q1 = a1.dot(a2);
    let q2 = a2.norm_sq() / T::lit(4.0) + a1.dot(a3) / T::lit(3.0);
    let b0 = a3.reject_from(a1) / T::lit(3.0) - k * q1;
    let b1 = a4.reject_from(a1) / T::lit(12.0) - k * q2;
    let s0 = q0.sqrt();
    let r0 = T::one() / (q0 * s0);
    let r1 = -q1 / (q0 * q0 * s0);
    (b1 * r0 + b0 * r1) * T::lit(2.0)
}

/// `G_E` by the punctured symmetric trapezoid, plus the analytic diagonal
/// correction that makes the punctured sum spectrally accurate.
pub fn grad_e_pv<T: Real>(f: &SampledKnot<T>) -> GradientField<T> {
    let n = f.len();
    let h = f.h();
    let vectors: Vec<Vec3<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a1 = f.d1[i];
            let k = curvature_term(a1, f.d2[i]);
            let mut row: Vec<Vec3<T>> = (0..n)
                .map(|j| {
                    if i == j {
                        return Vec3::zero();
                    }
                    let c = f.points[j] - f.points[i];
                    let c2 = c.norm_sq();
                    (c.reject_from(a1) * (T::lit(2.0) / c2) - k) * (T::lit(2.0) * f.speed[j] / c2)
                })
                .collect();
            row[i] = pv_diagonal(a1, f.d2[i], f.d3[i], f.d4[i]);
            (sum_vec(&row) * h).reject_from(a1)
        })
        .collect();
    GradientField {
        g: project_normal(&vectors, f).expect("grid sizes agree"),
        route: GradientRoute::Pv,
        route_residual: None,
        flagged: Vec::new(),
    }
}

/// The four terms of `G_E / 2` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UComponents<T> {
    pub u1: Vec3<T>,
    pub u2: Vec3<T>,
    pub u3: Vec3<T>,
    pub u4: Vec3<T>,
    /// Richardson residual of the finite part in `u₁`.
    pub residual: T,
    pub flagged: bool,
}

impl<T: Real> UComponents<T> {
    pub fn sum(&self) -> Vec3<T> {
        self.u1 + self.u2 + self.u3 + self.u4
    }

    pub fn get(&self, rule: URule) -> Vec3<T> {
        match rule {
            URule::U1 => self.u1,
            URule::U2 => self.u2,
            URule::U3 => self.u3,
            URule::U4 => self.u4,
            URule::Gradient => self.sum() * T::lit(2.0),
        }
    }
}

/// `u₁ = 2 Pf∫ (f(t)−f(s))/|f(t)−f(s)|⁴ |f'(t)| dt` with counterterm
/// `(1/ε)·(f''/|f'|² − (f',f'')f'/|f'|⁴)`; `u₂ = −V f''/|f'|²`; `u₃`, `u₄` remove
/// the tangential parts of `u₁`, `u₂`.
pub fn u_components_at<T: Real>(f: &SampledKnot<T>, s: T, v: T, ladder: &HadamardLadder) -> Result<UComponents<T>> {
    let jet = f.curve.jet(s);
    let (p, a1, a2) = (jet[0], jet[1], jet[2]);
    let k = curvature_term(a1, a2);
    let (ex, _) = finite_part(
        f,
        s,
        ladder,
        |t: T| {
            let (q, d) = f.curve.point_and_tangent(t);
            let c = q - p;
            let c2 = c.norm_sq();
            c * (d.norm() / (c2 * c2))
        },
        |eps: T| k / eps,
    )?;
    let u1 = ex.value * T::lit(2.0);
    let u2 = a2 * (-v / a1.norm_sq());
    let tan = a1.normalized();
    let u3 = tan * -u1.dot(tan);
    let u4 = tan * -u2.dot(tan);
    let residual = ex.residual.norm() * T::lit(2.0);
    Ok(UComponents {
        u1,
        u2,
        u3,
        u4,
        residual,
        flagged: residual > T::lit(ladder.tolerance) * (T::one() + u1.norm()),
    })
}

pub fn u_components<T: Real>(f: &SampledKnot<T>, i: usize, v: T, ladder: &HadamardLadder) -> Result<UComponents<T>> {
    u_components_at(f, f.param(i), v, ladder)
}

/// `G_E = 2(u₁ + u₂ + u₃ + u₄)` on every grid point, with `V` from the cosine
/// route; the pointwise difference to the principal-value route is recorded.
pub fn grad_e_hadamard<T: Real>(f: &SampledKnot<T>, ladder: &HadamardLadder) -> Result<GradientField<T>> {
    let v = potential_v_cosine(f).v;
    let comps: Vec<UComponents<T>> = (0..f.len())
        .into_par_iter()
        .map(|i| u_components(f, i, v[i], ladder))
        .collect::<Result<_>>()?;
    let vectors: Vec<Vec3<T>> = comps.iter().map(|c| c.sum() * T::lit(2.0)).collect();
    let pv = grad_e_pv(f);
    let residual = vectors
        .iter()
        .zip(&pv.g.vectors)
        .map(|(a, b)| (*a - *b).norm())
        .collect();
    Ok(GradientField {
        g: project_normal(&vectors, f)?,
        route: GradientRoute::Hadamard,
        route_residual: Some(residual),
        flagged: comps
            .iter()
            .enumerate()
            .filter(|(_, c)| c.flagged)
            .map(|(i, _)| i)
            .collect(),
    })
}

pub fn gradient<T: Real>(f: &SampledKnot<T>, route: GradientRoute, ladder: &HadamardLadder) -> Result<GradientField<T>> {
    match route {
        GradientRoute::Pv => Ok(grad_e_pv(f)),
        GradientRoute::Hadamard => grad_e_hadamard(f, ladder),
    }
}

/// `𝒢^Φ = Φ⁻¹ G`; zero when the knot is round to `circle_tol`.
pub fn weighted_gradient<T: Real>(
    f: &SampledKnot<T>,
    g: &GradientField<T>,
    phi: &WeightFunction<T>,
    circle_tol: T,
) -> Result<TangentField<T>> {
    if phi.values.len() != f.len() || g.g.len() != f.len() {
        return Err(KnotError::BaseMismatch);
    }
    if roundness(f)? < circle_tol {
        return Ok(TangentField::zero(f));
    }
    let floor = T::lit(PHI_FLOOR_REL) * phi.median().abs();
    let bad: Vec<usize> = phi
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| !(v > floor))
        .map(|(i, _)| i)
        .collect();
    if let Some(&first) = bad.first() {
        return Err(KnotError::DegenerateWeight { indices: bad, first });
    }
    let vectors: Vec<Vec3<T>> = g
        .g
        .vectors
        .iter()
        .zip(&phi.values)
        .map(|(v, &w)| *v / w)
        .collect();
    project_normal(&vectors, f)
}

/// Which rule `u(f, s)` the inversion identity is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum URule {
    U1,
    U2,
    U3,
    U4,
    /// The full gradient `2(u₁ + u₂ + u₃ + u₄)`.
    Gradient,
}

impl URule {
    pub const ALL: [URule; 5] = [URule::U1, URule::U2, URule::U3, URule::U4, URule::Gradient];
}

/// `J(u, f, s) = u(I∘f, s) − |f|⁴ u(f, s) + 2|f|²(u(f, s), f) f` at grid
/// indices, with `I` the inversion in the unit sphere about the origin and
/// both rule evaluations computed from scratch on their own knot.
pub fn j_operator<T: Real>(
    rule: URule,
    f: &SampledKnot<T>,
    indices: &[usize],
    ladder: &HadamardLadder,
) -> Result<Vec<Vec3<T>>> {
    let inv = MoebiusTransform::inversion(Vec3::zero(), T::one());
    let g = inv.apply_to_curve(&f.curve)?.evaluate();
    let vf = potential_v_cosine(f).v;
    let vg = potential_v_cosine(&g).v;
    indices
        .par_iter()
        .map(|&i| {
            let uf = u_components(f, i, vf[i], ladder)?.get(rule);
            let ug = u_components(&g, i, vg[i], ladder)?.get(rule);
            let p = f.points[i];
            let r2 = p.norm_sq();
            Ok(ug - uf * (r2 * r2) + p * (T::lit(2.0) * r2 * uf.dot(p)))
        })
        .collect::<Result<Vec<_>>>()
}

/// Closed forms of `J(u_k, f, s)` in terms of `V(f, s)`, `f(s)`, `f'(s)`.
pub fn j_closed_form<T: Real>(rule: URule, p: Vec3<T>, d1: Vec3<T>, v: T) -> Vec3<T> {
    let r2 = p.norm_sq();
    let fd = p.dot(d1);
    let s2 = d1.norm_sq();
    let two = T::lit(2.0);
    let a = p * (v * fd * fd / s2);
    let b = d1 * (v * r2 * fd / s2);
    match rule {
        URule::U1 => p * (-two * v * r2),
        URule::U2 => p * (two * v * r2) - a * T::lit(8.0) + b * T::lit(4.0),
        URule::U3 | URule::U4 => a * T::lit(4.0) - b * two,
        URule::Gradient => Vec3::zero(),
    }
}

/// `(E(f + εu) − E(f − εu)) / 2ε` with `E` by the cosine route.
pub fn directional_derivative<T: Real>(f: &KnotCurve<T>, u: &TangentField<T>, eps: T) -> Result<T> {
    let s = f.evaluate();
    if u.len() != s.len() || u.base() != s.fingerprint() {
        return Err(KnotError::BaseMismatch);
    }
    let shifted = |sign: T| -> Result<T> {
        let pts: Vec<Vec3<T>> = s
            .points
            .iter()
            .zip(&u.vectors)
            .map(|(p, v)| *p + *v * (eps * sign))
            .collect();
        Ok(energy_e_cosine(&KnotCurve::from_samples(&pts)?.evaluate()).value)
    };
    Ok((shifted(T::one())? - shifted(-T::one())?) / (T::lit(2.0) * eps))
}

/// Default step `10⁻⁵ · L / ‖u‖∞`.
pub fn default_fd_step<T: Real>(f: &SampledKnot<T>, u: &TangentField<T>) -> T {
    T::lit(1e-5) * f.total_len / u.max_norm()
}

/// `(u, G_E)_f`
pub fn gradient_pairing<T: Real>(f: &SampledKnot<T>, u: &TangentField<T>, g: &GradientField<T>) -> Result<T> {
    l2_inner(f, u, &g.g)
}

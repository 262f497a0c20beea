//! Inner products on normal fields along a knot, weight functions `Φ`, and
//! curvature/torsion data.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::conformal::{potential_v_cosine, potential_v_cosine_at, PotentialProfile};
use crate::curve::SampledKnot;
use crate::energy::{psi_at_many, psi_profile, MuKernel};
use crate::error::{KnotError, Result};
use crate::moebius::MoebiusTransform;
use crate::scalar::{pairwise_sum, Real};
use crate::vec3::Vec3;

/// Relative tolerance for `u(t_i) ⟂ f'(t_i)`.
pub const NORMAL_TOL: f64 = 1e-10;

/// A field of normal vectors along a sampled knot.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField<T> {
    pub vectors: Vec<Vec3<T>>,
    base: u64,
}

impl<T: Real> TangentField<T> {
    /// Wraps `vectors`, checking that each is normal to the knot.
    pub fn new(f: &SampledKnot<T>, vectors: Vec<Vec3<T>>) -> Result<Self> {
        if vectors.len() != f.len() {
            return Err(KnotError::GridMismatch {
                expected: f.len(),
                found: vectors.len(),
            });
        }
        for (i, (u, d)) in vectors.iter().zip(&f.d1).enumerate() {
            let scale = u.norm() * d.norm();
            if u.dot(*d).abs() > T::lit(NORMAL_TOL) * scale {
                return Err(KnotError::InvalidParameter(format!(
                    "vector at index {i} is not normal to the knot"
                )));
            }
        }
        Ok(Self {
            vectors,
            base: f.fingerprint(),
        })
    }

    pub fn zero(f: &SampledKnot<T>) -> Self {
        Self {
            vectors: vec![Vec3::zero(); f.len()],
            base: f.fingerprint(),
        }
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn max_norm(&self) -> T {
        self.vectors.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            vectors: self.vectors.iter().map(|v| *v * k).collect(),
            base: self.base,
        }
    }

    fn check_base(&self, f: &SampledKnot<T>) -> Result<()> {
        if self.base != f.fingerprint() || self.len() != f.len() {
            return Err(KnotError::BaseMismatch);
        }
        Ok(())
    }
}

/// `u(t_i) = raw(t_i) − (raw, f')f'/|f'|²`
pub fn project_normal<T: Real>(raw: &[Vec3<T>], f: &SampledKnot<T>) -> Result<TangentField<T>> {
    if raw.len() != f.len() {
        return Err(KnotError::GridMismatch {
            expected: f.len(),
            found: raw.len(),
        });
    }
    Ok(TangentField {
        vectors: raw.iter().zip(&f.d1).map(|(r, d)| r.reject_from(*d)).collect(),
        base: f.fingerprint(),
    })
}

/// `(u, v)_f = ∫ (u, v) |f'| dt`
pub fn l2_inner<T: Real>(f: &SampledKnot<T>, u: &TangentField<T>, v: &TangentField<T>) -> Result<T> {
    u.check_base(f)?;
    v.check_base(f)?;
    let terms: Vec<T> = (0..f.len())
        .map(|i| u.vectors[i].dot(v.vectors[i]) * f.speed[i])
        .collect();
    Ok(pairwise_sum(&terms) * f.h())
}

/// `⟨u, v⟩_Φ = ∫ (u, v) Φ |f'| dt`
pub fn weighted_inner<T: Real>(
    f: &SampledKnot<T>,
    u: &TangentField<T>,
    v: &TangentField<T>,
    phi: &WeightFunction<T>,
) -> Result<T> {
    u.check_base(f)?;
    v.check_base(f)?;
    phi.check_base(f)?;
    let terms: Vec<T> = (0..f.len())
        .map(|i| u.vectors[i].dot(v.vectors[i]) * phi.values[i] * f.speed[i])
        .collect();
    Ok(pairwise_sum(&terms) * f.h())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    VCubed,
    /// `|f'|⁻³`: Möbius covariant but tied to the parametrization.
    Phi0,
    PsiCubed(MuKernel),
    ConformalArclength,
    /// `Φ ≡ 1`, which satisfies none of the weight conditions.
    Uniform,
}

impl WeightKind {
    pub fn parametrization_independent(&self) -> bool {
        !matches!(self, WeightKind::Phi0 | WeightKind::Uniform)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "v3" | "v_cubed" => WeightKind::VCubed,
            "phi0" => WeightKind::Phi0,
            "psi-sin" | "psi_sin" => WeightKind::PsiCubed(MuKernel::AbsSine),
            "psi-acyclic" | "psi_acyclic" => WeightKind::PsiCubed(MuKernel::Acyclicity),
            "conformal" => WeightKind::ConformalArclength,
            "uniform" => WeightKind::Uniform,
            other => return Err(KnotError::InvalidParameter(format!("unknown weight '{other}'"))),
        })
    }

    fn cache_key(&self) -> String {
        serde_json::to_string(self).expect("weight kinds serialize")
    }
}

/// `Φ(f, t_i)` on the grid of one knot.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction<T> {
    pub kind: WeightKind,
    pub values: Vec<T>,
    /// Grid indices where the value relies on a convention (dropped torsion).
    pub flags: Vec<usize>,
    base: u64,
}

impl<T: Real> WeightFunction<T> {
    pub fn parametrization_independent(&self) -> bool {
        self.kind.parametrization_independent()
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    /// Wraps precomputed values as a weight on `f`.
    pub fn from_values(kind: WeightKind, f: &SampledKnot<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != f.len() {
            return Err(KnotError::GridMismatch {
                expected: f.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            kind,
            values,
            flags: Vec::new(),
            base: f.fingerprint(),
        })
    }

    fn check_base(&self, f: &SampledKnot<T>) -> Result<()> {
        if self.base != f.fingerprint() || self.values.len() != f.len() {
            return Err(KnotError::BaseMismatch);
        }
        Ok(())
    }

    pub fn median(&self) -> T {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        v[v.len() / 2]
    }
}

pub fn weight_v3<T: Real>(profile: &PotentialProfile<T>, f: &SampledKnot<T>) -> Result<WeightFunction<T>> {
    if profile.v.len() != f.len() {
        return Err(KnotError::GridMismatch {
            expected: f.len(),
            found: profile.v.len(),
        });
    }
    Ok(WeightFunction {
        kind: WeightKind::VCubed,
        values: profile.v.iter().map(|&v| v * v * v).collect(),
        flags: Vec::new(),
        base: f.fingerprint(),
    })
}

pub fn weight_phi0<T: Real>(f: &SampledKnot<T>) -> WeightFunction<T> {
    WeightFunction {
        kind: WeightKind::Phi0,
        values: f.speed.iter().map(|&s| T::one() / (s * s * s)).collect(),
        flags: Vec::new(),
        base: f.fingerprint(),
    }
}

pub fn weight_uniform<T: Real>(f: &SampledKnot<T>) -> WeightFunction<T> {
    WeightFunction {
        kind: WeightKind::Uniform,
        values: vec![T::one(); f.len()],
        flags: Vec::new(),
        base: f.fingerprint(),
    }
}

/// `Ψ³` with `Ψ(f, s) = ∫ μ(θ_f)/|f(s)−f(t)|² |f'(t)| dt`.
pub fn weight_psi_mu<T: Real>(f: &SampledKnot<T>, mu: &MuKernel) -> Result<WeightFunction<T>> {
    let psi = psi_profile(f, mu)?;
    Ok(WeightFunction {
        kind: WeightKind::PsiCubed(mu.clone()),
        values: psi.iter().map(|&p| p * p * p).collect(),
        flags: Vec::new(),
        base: f.fingerprint(),
    })
}

/// Curvature, torsion and the arc-length derivative of curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct FrenetData<T> {
    pub kappa: Vec<T>,
    /// Zero at flagged indices, where torsion is undefined.
    pub tau: Vec<T>,
    pub kappa_prime: Vec<T>,
    pub degenerate: Vec<usize>,
    base: u64,
}

/// Frenet quantities at one point from the parameter derivatives
/// `[f, f', f'', f''', …]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetPoint<T> {
    pub kappa: T,
    pub tau: T,
    pub kappa_prime: T,
    pub degenerate: bool,
}

impl<T: Real> FrenetPoint<T> {
    /// `κ'² + κ²τ²`, the square of `dρ/ds` squared.
    pub fn conformal_density_sq(&self) -> T {
        self.kappa_prime * self.kappa_prime + self.kappa * self.kappa * self.tau * self.tau
    }
}

/// `κ = |f'×f''|/|f'|³`, `τ = det(f', f'', f''')/|f'×f''|²` and
/// `κ' = (dκ/dt)/|f'|`, with `dκ/dt` differentiated analytically.
pub fn frenet_point<T: Real>(d1: Vec3<T>, d2: Vec3<T>, d3: Vec3<T>, kappa_tol: T) -> FrenetPoint<T> {
    let s = d1.norm();
    let s3 = s * s * s;
    let c = d1.cross(d2);
    let cn = c.norm();
    let dc = d1.cross(d3);
    let kappa = cn / s3;
    let degenerate = kappa < kappa_tol;
    let dcn = if cn > T::zero() && !degenerate {
        c.dot(dc) / cn
    } else {
        // |c| has a corner where it vanishes; only |dκ/dt| is meaningful there
        dc.norm()
    };
    let dkappa_dt = dcn / s3 - T::lit(3.0) * cn * d1.dot(d2) / (s3 * s * s);
    let tau = if degenerate {
        T::zero()
    } else {
        c.dot(d3) / (cn * cn)
    };
    FrenetPoint {
        kappa,
        tau,
        kappa_prime: dkappa_dt / s,
        degenerate,
    }
}

/// `κ_tol = 10⁻⁶ / L`
pub fn kappa_tolerance<T: Real>(f: &SampledKnot<T>) -> T {
    T::lit(1e-6) / f.total_len
}

pub fn frenet<T: Real>(f: &SampledKnot<T>) -> FrenetData<T> {
    let tol = kappa_tolerance(f);
    let pts: Vec<FrenetPoint<T>> = (0..f.len())
        .map(|i| frenet_point(f.d1[i], f.d2[i], f.d3[i], tol))
        .collect();
    FrenetData {
        kappa: pts.iter().map(|p| p.kappa).collect(),
        tau: pts.iter().map(|p| p.tau).collect(),
        kappa_prime: pts.iter().map(|p| p.kappa_prime).collect(),
        degenerate: pts
            .iter()
            .enumerate()
            .filter(|(_, p)| p.degenerate)
            .map(|(i, _)| i)
            .collect(),
        base: f.fingerprint(),
    }
}

impl<T: Real> FrenetData<T> {
    pub fn conformal_density_sq(&self, i: usize) -> T {
        let k = self.kappa[i];
        self.kappa_prime[i] * self.kappa_prime[i] + k * k * self.tau[i] * self.tau[i]
    }
}

/// `Φ_c = (κ'² + κ²τ²)^{3/4}`; the torsion term is dropped at flagged indices.
pub fn weight_conformal<T: Real>(fd: &FrenetData<T>) -> WeightFunction<T> {
    WeightFunction {
        kind: WeightKind::ConformalArclength,
        values: (0..fd.kappa.len())
            .map(|i| fd.conformal_density_sq(i).powf(T::lit(0.75)))
            .collect(),
        flags: fd.degenerate.clone(),
        base: fd.base,
    }
}

/// Builds a weight of the given kind, with `V` from the cosine route.
pub fn build_weight<T: Real>(kind: &WeightKind, f: &SampledKnot<T>) -> Result<WeightFunction<T>> {
    match kind {
        WeightKind::VCubed => weight_v3(&potential_v_cosine(f), f),
        WeightKind::Phi0 => Ok(weight_phi0(f)),
        WeightKind::PsiCubed(mu) => weight_psi_mu(f, mu),
        WeightKind::ConformalArclength => Ok(weight_conformal(&frenet(f))),
        WeightKind::Uniform => Ok(weight_uniform(f)),
    }
}

/// `Φ(f, s)` at an arbitrary parameter, consistent with [`build_weight`] on
/// grid nodes.
pub fn weight_at<T: Real>(kind: &WeightKind, f: &SampledKnot<T>, s: T) -> Result<T> {
    Ok(weights_at(kind, f, &[s])?[0])
}

/// [`weight_at`] for many parameters at once.
pub fn weights_at<T: Real>(kind: &WeightKind, f: &SampledKnot<T>, params: &[T]) -> Result<Vec<T>> {
    let cube = |x: T| x * x * x;
    if let WeightKind::PsiCubed(mu) = kind {
        return Ok(psi_at_many(f, mu, params)?.into_iter().map(cube).collect());
    }
    Ok(params
        .iter()
        .map(|&s| match kind {
            WeightKind::VCubed => cube(potential_v_cosine_at(f, s)),
            WeightKind::Phi0 => cube(f.curve.jet(s)[1].norm()).recip(),
            WeightKind::ConformalArclength => {
                let jet = f.curve.jet(s);
                frenet_point(jet[1], jet[2], jet[3], kappa_tolerance(f))
                    .conformal_density_sq()
                    .powf(T::lit(0.75))
            }
            WeightKind::Uniform | WeightKind::PsiCubed(_) => T::one(),
        })
        .collect())
}

/// `|Φ(T∘f, t_i) |T'(f(t_i))|⁶ − Φ(f, t_i)|` on the grid.
pub fn check_weight_condition<T: Real>(
    kind: &WeightKind,
    t: &MoebiusTransform<T>,
    f: &SampledKnot<T>,
) -> Result<Vec<T>> {
    let image = t.apply_to_curve(&f.curve)?.evaluate();
    let factors = t.factors_on(f)?;
    let a = build_weight(kind, &image)?;
    let b = build_weight(kind, f)?;
    Ok((0..f.len())
        .map(|i| (a.values[i] * factors[i].powi(6) - b.values[i]).abs())
        .collect())
}

/// Weight cache keyed by curve content and weight kind. Entries are immutable
/// snapshots; a changed curve has a different key, so stale entries are never
/// returned.
#[derive(Debug, Default)]
pub struct WeightCache<T> {
    entries: Mutex<HashMap<(u64, String), Arc<WeightFunction<T>>>>,
}

impl<T: Real> WeightCache<T> {
    pub fn new() -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn get_or_build(&self, kind: &WeightKind, f: &SampledKnot<T>) -> Result<Arc<WeightFunction<T>>> {
        let key = (f.fingerprint(), kind.cache_key());
        if let Some(w) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(w));
        }
        let w = Arc::new(build_weight(kind, f)?);
        self.entries
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&w));
        Ok(w)
    }

    pub fn insert(&self, w: WeightFunction<T>) -> Arc<WeightFunction<T>> {
        let key = (w.base, w.kind.cache_key());
        let w = Arc::new(w);
        self.entries
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&w));
        w
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.entries.lock().expect("cache lock").clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Preset;
    use crate::fourier::spectral_derivative;

    #[test]
    fn projection_examples() {
        let c = Preset::unit_circle().build::<f64>(64).unwrap().evaluate();
        let par = project_normal(&c.d1, &c).unwrap();
        assert!(par.max_norm() < 1e-12);
        let u = project_normal(&c.d2, &c).unwrap();
        for (a, b) in u.vectors.iter().zip(&c.d2) {
            assert!((*a - *b).norm() < 1e-9);
        }
        let again = project_normal(&u.vectors, &c).unwrap();
        for (a, b) in again.vectors.iter().zip(&u.vectors) {
            assert!((*a - *b).norm() < 1e-12 * b.norm());
        }
    }

    #[test]
    fn l2_inner_of_constant_normal_field_on_circle() {
        let c = Preset::unit_circle().build::<f64>(64).unwrap().evaluate();
        let z = TangentField::new(&c, vec![Vec3::new(0.0, 0.0, 1.0); 64]).unwrap();
        let ip = l2_inner(&c, &z, &z).unwrap();
        assert!((ip - std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn base_mismatch_is_rejected() {
        let c = Preset::unit_circle().build::<f64>(64).unwrap().evaluate();
        let e = Preset::ellipse(2.0, 1.0).build::<f64>(64).unwrap().evaluate();
        let z = TangentField::new(&c, vec![Vec3::new(0.0, 0.0, 1.0); 64]).unwrap();
        assert_eq!(l2_inner(&e, &z, &z), Err(KnotError::BaseMismatch));
        assert!(TangentField::new(&c, c.d1.clone()).is_err());
    }

    #[test]
    fn frenet_on_circles() {
        let c = Preset::Circle {
            center: [1.0, 2.0, 3.0],
            radius: 2.5,
            normal: [1.0, 1.0, 0.0],
        }
        .build::<f64>(64)
        .unwrap()
        .evaluate();
        let fd = frenet(&c);
        for i in 0..64 {
            assert!((fd.kappa[i] - 0.4).abs() < 1e-12);
            assert!(fd.tau[i].abs() < 1e-9);
            assert!(fd.kappa_prime[i].abs() < 1e-10);
        }
        assert!(weight_conformal(&fd).values.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn frenet_matches_finite_differences_on_torus_knot() {
        let (p, q, big_r, r) = (2.0f64, 3.0f64, 2.0f64, 1.0f64);
        let g = |t: f64| {
            let u = std::f64::consts::TAU * t;
            let rad = big_r + r * (q * u).cos();
            Vec3::new(rad * (p * u).cos(), rad * (p * u).sin(), r * (q * u).sin())
        };
        let f = Preset::trefoil().build::<f64>(256).unwrap().evaluate();
        let fd = frenet(&f);
        // central differences with one Richardson step
        let diffs = |t: f64, h: f64| {
            let d1 = (g(t + h) - g(t - h)) / (2.0 * h);
            let d2 = (g(t + h) - g(t) * 2.0 + g(t - h)) / (h * h);
            let d3 = (g(t + 2.0 * h) - g(t + h) * 2.0 + g(t - h) * 2.0 - g(t - 2.0 * h)) / (2.0 * h * h * h);
            [d1, d2, d3]
        };
        for i in (0..256).step_by(23) {
            let t = f.param(i);
            let (a, b) = (diffs(t, 2e-3), diffs(t, 1e-3));
            let r = |k: usize| (b[k] * 4.0 - a[k]) / 3.0;
            let (d1, d2, d3) = (r(0), r(1), r(2));
            let c = d1.cross(d2);
            let kappa = c.norm() / d1.norm().powi(3);
            let tau = c.dot(d3) / c.norm_sq();
            assert!((kappa - fd.kappa[i]).abs() < 1e-4, "kappa {i}");
            assert!((tau - fd.tau[i]).abs() < 1e-4, "tau {i}");
        }
        // analytic κ' against spectral differentiation of the κ grid
        let dk = spectral_derivative(&fd.kappa);
        for i in 0..256 {
            assert!((dk[i] / f.speed[i] - fd.kappa_prime[i]).abs() < 1e-6, "{i}: {} vs {}", dk[i] / f.speed[i], fd.kappa_prime[i]);
        }
    }

    #[test]
    fn planar_ellipse_conformal_weight() {
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(128).unwrap().evaluate();
        let fd = frenet(&f);
        let w = weight_conformal(&fd);
        for i in 0..128 {
            assert!(fd.tau[i].abs() < 1e-9);
            assert!((w.values[i] - fd.kappa_prime[i].abs().powf(1.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_weights_vanish() {
        let c = Preset::unit_circle().build::<f64>(64).unwrap().evaluate();
        for kind in [WeightKind::VCubed, WeightKind::PsiCubed(MuKernel::AbsSine)] {
            let w = build_weight(&kind, &c).unwrap();
            assert!(w.values.iter().all(|v| v.abs() < 1e-12), "{kind:?}");
        }
    }

    #[test]
    fn psi_one_minus_cos_is_v_cubed() {
        let f = Preset::trefoil().build::<f64>(64).unwrap().evaluate();
        let a = build_weight(&WeightKind::VCubed, &f).unwrap();
        let b = weight_psi_mu(&f, &MuKernel::OneMinusCos).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn cache_returns_shared_snapshot() {
        let cache = WeightCache::new();
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(64).unwrap().evaluate();
        let a = cache.get_or_build(&WeightKind::VCubed, &f).unwrap();
        let b = cache.get_or_build(&WeightKind::VCubed, &f).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let g = f.curve.scaled(2.0).unwrap().evaluate();
        let c = cache.get_or_build(&WeightKind::VCubed, &g).unwrap();
        assert!(!Arc::ptr_eq(&a, &c));
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn off_grid_weight_matches_grid_and_reparametrization() {
        let f = Preset::trefoil().build::<f64>(128).unwrap().evaluate();
        let rho = crate::curve::ReparamMap::new(0.4, 0.7).unwrap();
        let g = f.curve.reparametrize(&rho).unwrap().evaluate();
        for kind in [
            WeightKind::VCubed,
            WeightKind::PsiCubed(MuKernel::AbsSine),
            WeightKind::ConformalArclength,
            WeightKind::Phi0,
        ] {
            let on_grid = build_weight(&kind, &f).unwrap();
            for i in [0, 17, 90] {
                let v = weight_at(&kind, &f, f.param(i)).unwrap();
                assert!((v - on_grid.values[i]).abs() < 1e-10 * (1.0 + v.abs()), "{kind:?}");
            }
            let moved = build_weight(&kind, &g).unwrap();
            let params: Vec<f64> = (0..g.len()).map(|i| rho.apply(g.param(i))).collect();
            let want = weights_at(&kind, &f, &params).unwrap();
            let err = moved
                .values
                .iter()
                .zip(&want)
                .map(|(m, w)| (m - w).abs() / w.abs())
                .fold(0.0, f64::max);
            if kind.parametrization_independent() {
                assert!(err < 1e-6, "{kind:?} {err}");
            } else {
                assert!(err > 1e-3, "{kind:?} {err}");
            }
        }
    }
}

//! Möbius transformations of ℝ³ ∪ {∞} stored as words of primitives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curve::{KnotCurve, SampledKnot};
use crate::error::{KnotError, Result};
use crate::scalar::Real;
use crate::vec3::{Mat3, Vec3};

/// Relative pole tolerance: a point closer than `POLE_REL · scale` to an
/// inversion centre is treated as hitting the pole.
pub const POLE_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive<T> {
    Translation(Vec3<T>),
    /// Orthogonal matrix, determinant ±1.
    Rotation(Mat3<T>),
    Homothety(T),
    SphereInversion { center: Vec3<T>, radius: T },
}

impl<T: Real> Primitive<T> {
    fn apply(&self, p: Vec3<T>, pole_tol: T) -> Result<Vec3<T>> {
        Ok(match *self {
            Primitive::Translation(v) => p + v,
            Primitive::Rotation(r) => r.mul_vec(p),
            Primitive::Homothety(k) => p * k,
            Primitive::SphereInversion { center, radius } => {
                let d = p - center;
                let d2 = d.norm_sq();
                if !(d2.sqrt() > pole_tol) {
                    return Err(KnotError::ImageNotCompact {
                        index: None,
                        distance: d2.sqrt().as_f64(),
                    });
                }
                center + d * (radius * radius / d2)
            }
        })
    }

    /// `|T'(p)| = |det DT(p)|^{1/6}` of this primitive alone.
    fn factor(&self, p: Vec3<T>) -> T {
        match *self {
            Primitive::Translation(_) | Primitive::Rotation(_) => T::one(),
            Primitive::Homothety(k) => k.sqrt(),
            Primitive::SphereInversion { center, radius } => radius / (p - center).norm(),
        }
    }

    fn jacobian(&self, p: Vec3<T>) -> Mat3<T> {
        match *self {
            Primitive::Translation(_) => Mat3::identity(),
            Primitive::Rotation(r) => r,
            Primitive::Homothety(k) => Mat3::scaled_identity(k),
            Primitive::SphereInversion { center, radius } => {
                let d = p - center;
                let d2 = d.norm_sq();
                let n = d / d2.sqrt();
                Mat3::identity()
                    .sub(Mat3::outer(n, n).scale(T::lit(2.0)))
                    .scale(radius * radius / d2)
            }
        }
    }
}

/// Point image, Jacobian and conformal factor of a word at one point.
#[derive(Debug, Clone, Copy)]
pub struct PointImage<T> {
    pub image: Vec3<T>,
    pub jacobian: Mat3<T>,
    pub factor: T,
}

/// Left-to-right composition of primitives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MoebiusTransform<T> {
    pub word: Vec<Primitive<T>>,
}

impl<T: Real> MoebiusTransform<T> {
    pub fn identity() -> Self {
        Self { word: Vec::new() }
    }

    pub fn from_word(word: Vec<Primitive<T>>) -> Result<Self> {
        for p in &word {
            match *p {
                Primitive::Homothety(k) if !(k > T::zero()) => {
                    return Err(KnotError::InvalidParameter(format!("homothety factor {k}")));
                }
                Primitive::SphereInversion { radius, .. } if !(radius > T::zero()) => {
                    return Err(KnotError::InvalidParameter(format!("inversion radius {radius}")));
                }
                Primitive::Rotation(r) => {
                    let err = r.mul_mat(&r.transpose()).sub(Mat3::identity()).max_abs();
                    if err > T::lit(1e3) * T::epsilon() {
                        return Err(KnotError::InvalidParameter(
                            "rotation matrix is not orthogonal".into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(Self { word })
    }

    pub fn then(mut self, p: Primitive<T>) -> Self {
        self.word.push(p);
        self
    }

    pub fn homothety(k: T) -> Self {
        Self::identity().then(Primitive::Homothety(k))
    }

    pub fn inversion(center: Vec3<T>, radius: T) -> Self {
        Self::identity().then(Primitive::SphereInversion { center, radius })
    }

    pub fn translation(v: Vec3<T>) -> Self {
        Self::identity().then(Primitive::Translation(v))
    }

    fn default_pole_tol(&self) -> T {
        let mut scale = T::zero();
        for p in &self.word {
            if let Primitive::SphereInversion { radius, .. } = *p {
                scale = scale.max(radius);
            }
        }
        T::lit(POLE_REL) * scale
    }

    pub fn apply(&self, p: Vec3<T>) -> Result<Vec3<T>> {
        self.apply_with_tol(p, self.default_pole_tol())
    }

    pub fn apply_with_tol(&self, p: Vec3<T>, pole_tol: T) -> Result<Vec3<T>> {
        let mut q = p;
        for prim in &self.word {
            q = prim.apply(q, pole_tol)?;
        }
        Ok(q)
    }

    /// Image, chain-rule Jacobian and chain-rule factor at `p`.
    pub fn image_data(&self, p: Vec3<T>, pole_tol: T) -> Result<PointImage<T>> {
        let mut q = p;
        let mut jac = Mat3::identity();
        let mut factor = T::one();
        for prim in &self.word {
            let next = prim.apply(q, pole_tol)?;
            factor *= prim.factor(q);
            jac = prim.jacobian(q).mul_mat(&jac);
            q = next;
        }
        Ok(PointImage {
            image: q,
            jacobian: jac,
            factor,
        })
    }

    /// `|T'(p)|`, product of primitive factors along the running image point.
    pub fn conformal_factor(&self, p: Vec3<T>) -> Result<T> {
        Ok(self.image_data(p, self.default_pole_tol())?.factor)
    }

    pub fn jacobian(&self, p: Vec3<T>) -> Result<Mat3<T>> {
        Ok(self.image_data(p, self.default_pole_tol())?.jacobian)
    }

    /// `T ∘ f`, refitted on the same grid.
    pub fn apply_to_curve(&self, curve: &KnotCurve<T>) -> Result<KnotCurve<T>> {
        let s = curve.evaluate();
        let tol = T::lit(POLE_REL) * s.diameter();
        curve.map_points(|i, p| {
            self.apply_with_tol(p, tol).map_err(|e| match e {
                KnotError::ImageNotCompact { distance, .. } => KnotError::ImageNotCompact {
                    index: Some(i),
                    distance,
                },
                other => other,
            })
        })
    }

    /// Grid of `|T'(f(t_i))|`.
    pub fn factors_on(&self, f: &SampledKnot<T>) -> Result<Vec<T>> {
        let tol = T::lit(POLE_REL) * f.diameter();
        f.points
            .iter()
            .map(|&p| Ok(self.image_data(p, tol)?.factor))
            .collect()
    }

    /// `T_* u = DT(f(t)) u(t)` along `f`, together with the transformed knot.
    pub fn pushforward(&self, f: &SampledKnot<T>, u: &[Vec3<T>]) -> Result<PushforwardField<T>> {
        if u.len() != f.len() {
            return Err(KnotError::GridMismatch {
                expected: f.len(),
                found: u.len(),
            });
        }
        let base = self.apply_to_curve(&f.curve)?;
        let tol = T::lit(POLE_REL) * f.diameter();
        let vectors = f
            .points
            .iter()
            .zip(u)
            .map(|(&p, &v)| Ok(self.image_data(p, tol)?.jacobian.mul_vec(v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PushforwardField { base, vectors })
    }

    /// `| |T(p)-T(q)| - |T'(p)||T'(q)||p-q| |`
    pub fn verify_distance_identity(&self, p: Vec3<T>, q: Vec3<T>) -> Result<T> {
        let tol = self.default_pole_tol();
        let a = self.image_data(p, tol)?;
        let b = self.image_data(q, tol)?;
        let lhs = (a.image - b.image).norm();
        let rhs = a.factor * b.factor * (p - q).norm();
        Ok((lhs - rhs).abs())
    }

    /// Pointwise relative residual of `|(T∘f)'| = |T'(f)|² |f'|`, with the left
    /// side from spectral differentiation of the refitted image.
    pub fn verify_speed_identity(&self, f: &SampledKnot<T>) -> Result<Vec<T>> {
        let image = self.apply_to_curve(&f.curve)?.evaluate();
        let factors = self.factors_on(f)?;
        Ok((0..f.len())
            .map(|i| {
                let rhs = factors[i] * factors[i] * f.speed[i];
                (image.speed[i] - rhs).abs() / rhs
            })
            .collect())
    }

    /// Seeded random word of 1–4 primitives containing at least one inversion.
    ///
    /// Each inversion centre sits 2.5–4 diameters away from the running image
    /// of `f`, and homothety factors lie in `[1/2, 2]`.
    pub fn random_compact_preserving(seed: u64, f: &SampledKnot<T>) -> Self {
        Self::random_with_distance(seed, f, 2.5..4.0)
    }

    /// Like [`Self::random_compact_preserving`] with inversion centres 8–12
    /// diameters away, so `|T'|` varies by well under a factor two along `f`.
    pub fn random_mild(seed: u64, f: &SampledKnot<T>) -> Self {
        Self::random_with_distance(seed, f, 8.0..12.0)
    }

    /// Random word whose inversion centres lie `distance` diameters (a range)
    /// from the running image of `f`.
    pub fn random_with_distance(seed: u64, f: &SampledKnot<T>, distance: std::ops::Range<f64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.gen_range(1..=4usize);
        let inversion_slot = rng.gen_range(0..count);
        let mut pts: Vec<Vec3<f64>> = f.points.iter().map(|p| Vec3::from_f64(p.to_f64())).collect();
        let mut word = Vec::with_capacity(count);
        for slot in 0..count {
            let kind = if slot == inversion_slot {
                3
            } else {
                rng.gen_range(0..4u32)
            };
            let (centroid, diam) = cloud_stats(&pts);
            let prim: Primitive<f64> = match kind {
                0 => Primitive::Translation(random_unit(&mut rng) * (diam * rng.gen_range(0.1..1.0))),
                1 => Primitive::Rotation(random_rotation(&mut rng)),
                2 => Primitive::Homothety(2f64.powf(rng.gen_range(-1.0..1.0))),
                _ => {
                    let dist = diam * rng.gen_range(distance.clone());
                    let dir = random_unit(&mut rng);
                    let center = centroid + dir * dist;
                    let radius = dist * rng.gen_range(0.7..1.3);
                    Primitive::SphereInversion { center, radius }
                }
            };
            pts = pts
                .iter()
                .map(|&p| prim.apply(p, 0.0).expect("centre kept away from the curve"))
                .collect();
            word.push(prim);
        }
        Self {
            word: word.into_iter().map(convert_primitive).collect(),
        }
    }
}

fn convert_primitive<T: Real>(p: Primitive<f64>) -> Primitive<T> {
    match p {
        Primitive::Translation(v) => Primitive::Translation(Vec3::from_f64(v.to_f64())),
        Primitive::Rotation(r) => Primitive::Rotation(Mat3::from_rows(
            Vec3::from_f64(r.rows[0].to_f64()),
            Vec3::from_f64(r.rows[1].to_f64()),
            Vec3::from_f64(r.rows[2].to_f64()),
        )),
        Primitive::Homothety(k) => Primitive::Homothety(T::lit(k)),
        Primitive::SphereInversion { center, radius } => Primitive::SphereInversion {
            center: Vec3::from_f64(center.to_f64()),
            radius: T::lit(radius),
        },
    }
}

fn cloud_stats(pts: &[Vec3<f64>]) -> (Vec3<f64>, f64) {
    let centroid = pts.iter().fold(Vec3::zero(), |a, &p| a + p) / pts.len() as f64;
    let mut diam: f64 = 0.0;
    for a in pts {
        for b in pts {
            diam = diam.max((*a - *b).norm());
        }
    }
    (centroid, diam)
}

fn random_unit(rng: &mut impl Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation about `axis` (unit) by `angle`, Rodrigues form.
pub fn axis_angle<T: Real>(axis: Vec3<T>, angle: T) -> Mat3<T> {
    let a = axis.normalized();
    let (s, c) = angle.sin_cos();
    let k = Mat3::from_rows(
        Vec3::new(T::zero(), -a.z, a.y),
        Vec3::new(a.z, T::zero(), -a.x),
        Vec3::new(-a.y, a.x, T::zero()),
    );
    let k2 = k.mul_mat(&k);
    let mut out = Mat3::identity();
    for r in 0..3 {
        out.rows[r] = out.rows[r] + k.rows[r] * s + k2.rows[r] * (T::one() - c);
    }
    out
}

fn random_rotation(rng: &mut impl Rng) -> Mat3<f64> {
    let r = axis_angle(random_unit(rng), rng.gen_range(0.0..std::f64::consts::TAU));
    if rng.gen_bool(0.25) {
        // improper: compose with the reflection z -> -z
        let refl = Mat3::from_rows(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        );
        refl.mul_mat(&r)
    } else {
        r
    }
}

/// Pushed-forward vectors `T_* u` together with the transformed knot `T ∘ f`.
#[derive(Debug, Clone)]
pub struct PushforwardField<T: Real> {
    pub base: KnotCurve<T>,
    pub vectors: Vec<Vec3<T>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{roundness, Preset};

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    #[test]
    fn primitive_actions() {
        let inv = MoebiusTransform::inversion(Vec3::zero(), 1.0);
        assert!((inv.apply(v(2.0, 0.0, 0.0)).unwrap() - v(0.5, 0.0, 0.0)).norm() < 1e-15);
        let h = MoebiusTransform::homothety(3.0);
        assert_eq!(h.apply(v(1.0, 1.0, 0.0)).unwrap(), v(3.0, 3.0, 0.0));
        let w = MoebiusTransform::translation(v(1.0, 0.0, 0.0)).then(Primitive::SphereInversion {
            center: Vec3::zero(),
            radius: 1.0,
        });
        assert!((w.apply(v(1.0, 0.0, 0.0)).unwrap() - v(0.5, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pole_hit_is_an_error() {
        let inv = MoebiusTransform::inversion(v(1.0, 1.0, 1.0), 1.0);
        assert!(matches!(
            inv.apply(v(1.0, 1.0, 1.0)),
            Err(KnotError::ImageNotCompact { .. })
        ));
        let c = Preset::unit_circle().build::<f64>(64).unwrap();
        let through = MoebiusTransform::inversion(v(1.0, 0.0, 0.0), 1.0);
        assert!(matches!(
            through.apply_to_curve(&c),
            Err(KnotError::ImageNotCompact { index: Some(0), .. })
        ));
    }

    #[test]
    fn conformal_factor_examples() {
        let inv = MoebiusTransform::inversion(Vec3::zero(), 1.0);
        assert!((inv.conformal_factor(v(2.0, 0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
        let h = MoebiusTransform::homothety(4.0);
        assert!((h.conformal_factor(v(0.3, -1.0, 7.0)).unwrap() - 2.0).abs() < 1e-15);
        let r = MoebiusTransform::identity()
            .then(Primitive::Rotation(axis_angle(v(1.0, 2.0, 3.0), 0.7)))
            .then(Primitive::Translation(v(4.0, 5.0, 6.0)));
        assert!((r.conformal_factor(v(1.0, 1.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_distance_identity() {
        let inv = MoebiusTransform::inversion(Vec3::zero(), 1.0);
        let p = v(2.0, 0.0, 0.0);
        let q = v(3.0, 0.0, 0.0);
        let lhs = (inv.apply(p).unwrap() - inv.apply(q).unwrap()).norm();
        assert!((lhs - 1.0 / 6.0).abs() < 1e-15);
        assert!(inv.verify_distance_identity(p, q).unwrap() < 1e-15);
        assert_eq!(MoebiusTransform::identity().verify_distance_identity(p, q).unwrap(), 0.0);
    }

    #[test]
    fn factor_matches_jacobian_determinant_for_random_words() {
        let f = Preset::trefoil().build::<f64>(64).unwrap().evaluate();
        for seed in 0..20 {
            let t = MoebiusTransform::random_compact_preserving(seed, &f);
            for &p in f.points.iter().step_by(7) {
                let d = t.image_data(p, 0.0).unwrap();
                let det_factor = d.jacobian.det().abs().powf(1.0 / 6.0);
                assert!((d.factor - det_factor).abs() < 1e-12 * d.factor);
                // DT is |T'|² times an orthogonal matrix
                let o = d.jacobian.scale(1.0 / (d.factor * d.factor));
                assert!(o.mul_mat(&o.transpose()).sub(Mat3::identity()).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_words_respect_generator_contract() {
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(64).unwrap().evaluate();
        for seed in 0..50 {
            let t = MoebiusTransform::random_compact_preserving(seed, &f);
            assert!(!t.word.is_empty() && t.word.len() <= 4);
            assert!(t.word.iter().any(|p| matches!(p, Primitive::SphereInversion { .. })));
            for p in &t.word {
                if let Primitive::Homothety(k) = p {
                    assert!((0.5..=2.0).contains(k));
                }
            }
            assert_eq!(t, MoebiusTransform::random_compact_preserving(seed, &f));
        }
    }

    #[test]
    fn speed_identity_on_homothety_and_random_words() {
        let c = Preset::Circle {
            center: [0.0; 3],
            radius: 1.5,
            normal: [0.0, 0.0, 1.0],
        }
        .build::<f64>(128)
        .unwrap()
        .evaluate();
        let h = MoebiusTransform::homothety(3.0);
        let img = h.apply_to_curve(&c.curve).unwrap().evaluate();
        for s in &img.speed {
            assert!((s - 3.0 * std::f64::consts::TAU * 1.5).abs() < 1e-10);
        }
        let e = Preset::ellipse(2.0, 1.0).build::<f64>(256).unwrap().evaluate();
        for seed in 0..10 {
            let t = MoebiusTransform::random_compact_preserving(seed, &e);
            let r = t.verify_speed_identity(&e).unwrap();
            assert!(r.iter().all(|&x| x < 1e-8), "seed {seed}: {:e}", r.iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn pushforward_scales_and_preserves_orthogonality() {
        let e = Preset::ellipse(2.0, 1.0).build::<f64>(128).unwrap().evaluate();
        let u: Vec<Vec3<f64>> = (0..e.len()).map(|i| v(0.0, 0.0, 1.0 + 0.1 * i as f64).reject_from(e.d1[i])).collect();
        let id = MoebiusTransform::identity().pushforward(&e, &u).unwrap();
        assert_eq!(id.vectors, u);
        let k = 2.5;
        let h = MoebiusTransform::homothety(k).pushforward(&e, &u).unwrap();
        for (a, b) in h.vectors.iter().zip(&u) {
            assert!((a.dot(*a) - k * k * b.dot(*b)).abs() < 1e-12 * a.dot(*a));
        }
        for seed in 0..10 {
            let t = MoebiusTransform::random_compact_preserving(seed, &e);
            let w: Vec<Vec3<f64>> = (0..e.len())
                .map(|i| v((i as f64).sin(), 1.0, 0.3).reject_from(e.d1[i]))
                .collect();
            let pf = t.pushforward(&e, &w).unwrap();
            let img = pf.base.evaluate();
            for i in 0..e.len() {
                let c = pf.vectors[i].dot(img.d1[i]) / (pf.vectors[i].norm() * img.speed[i]);
                assert!(c.abs() < 1e-10, "seed {seed} index {i}: {c:e}");
            }
        }
    }

    #[test]
    fn inversion_pushforward_matches_finite_difference() {
        let c = Preset::Circle {
            center: [0.4, 0.2, 0.0],
            radius: 1.0,
            normal: [0.0, 0.0, 1.0],
        }
        .build::<f64>(64)
        .unwrap()
        .evaluate();
        let inv = MoebiusTransform::inversion(Vec3::zero(), 1.0);
        let u: Vec<Vec3<f64>> = (0..c.len()).map(|i| (c.points[i] - v(0.4, 0.2, 0.0)) * 0.3).collect();
        let pf = inv.pushforward(&c, &u).unwrap();
        let h = 1e-6;
        for i in 0..c.len() {
            let p = c.points[i];
            let fd = (inv.apply(p + u[i] * h).unwrap() - inv.apply(p - u[i] * h).unwrap()) / (2.0 * h);
            assert!((fd - pf.vectors[i]).norm() < 1e-7 * fd.norm());
            let fac = inv.conformal_factor(p).unwrap();
            assert!((pf.vectors[i].norm() - fac * fac * u[i].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn circles_map_to_circles() {
        let c = Preset::unit_circle().build::<f64>(256).unwrap();
        let s = c.evaluate();
        for seed in 0..10 {
            let t = MoebiusTransform::random_compact_preserving(seed, &s);
            let img = t.apply_to_curve(&c).unwrap();
            assert!(roundness(&img.evaluate()).unwrap() < 1e-8);
        }
    }
}

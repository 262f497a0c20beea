//! Spectral closed curves `f: S¹ → ℝ³`, their grid samples and test presets.

use crate::error::{KnotError, Result};
use crate::fourier::TrigSeries;
use crate::scalar::Real;
use crate::vec3::{Mat3, Vec3};

/// Acceptance thresholds applied whenever a curve is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveTolerances {
    /// Minimum speed relative to total length.
    pub immersion_rel: f64,
    /// Minimum separation of non-neighbouring grid points relative to total length.
    pub embed_rel: f64,
    /// Pairs closer than this many mean grid spacings (in arc length) skip the embedding check.
    pub neighbor_window: f64,
}

impl Default for CurveTolerances {
    fn default() -> Self {
        Self {
            immersion_rel: 1e-8,
            embed_rel: 1e-6,
            neighbor_window: 4.0,
        }
    }
}

/// A closed curve stored as a truncated Fourier series, together with the
/// number of uniform grid samples used for quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotCurve<T: Real> {
    series: TrigSeries<T, Vec3<T>>,
    grid_size: usize,
}

fn check_grid_size(n: usize) -> Result<()> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(KnotError::InvalidGridSize(n));
    }
    Ok(())
}

impl<T: Real> KnotCurve<T> {
    /// Interpolating fit of `N` uniform samples `f(j/N)`, with `M = N/2 - 1` modes.
    pub fn from_samples(points: &[Vec3<T>]) -> Result<Self> {
        Self::from_samples_with(points, &CurveTolerances::default())
    }

    pub fn from_samples_with(points: &[Vec3<T>], tol: &CurveTolerances) -> Result<Self> {
        let n = points.len();
        check_grid_size(n)?;
        let series = TrigSeries::fit(points, n / 2 - 1);
        let curve = Self {
            series,
            grid_size: n,
        };
        curve.validate(tol)?;
        Ok(curve)
    }

    /// Curve from explicit coefficients; modes above `N/2 - 1` are dropped.
    pub fn from_series(series: TrigSeries<T, Vec3<T>>, grid_size: usize) -> Result<Self> {
        check_grid_size(grid_size)?;
        let modes = series.modes().min(grid_size / 2 - 1);
        let curve = Self {
            series: series.with_modes(modes),
            grid_size,
        };
        curve.validate(&CurveTolerances::default())?;
        Ok(curve)
    }

    /// Samples the closure `t ↦ g(t)` on `n` points and fits it.
    pub fn from_fn(n: usize, g: impl Fn(T) -> Vec3<T>) -> Result<Self> {
        check_grid_size(n)?;
        let pts: Vec<Vec3<T>> = (0..n)
            .map(|j| g(T::from_usize_lossy(j) / T::from_usize_lossy(n)))
            .collect();
        Self::from_samples(&pts)
    }

    pub fn series(&self) -> &TrigSeries<T, Vec3<T>> {
        &self.series
    }

    /// Content hash of the grid size and coefficients.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.grid_size.hash(&mut h);
        for v in self.series.cos.iter().chain(self.series.sin.iter()) {
            for x in v.to_f64() {
                x.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn modes(&self) -> usize {
        self.series.modes()
    }

    /// Projection onto Fourier modes `0..=modes`, keeping the grid.
    pub fn band_limited(&self, modes: usize) -> Result<Self> {
        let full = self.modes();
        Self::from_series(self.series.with_modes(modes.min(full)).with_modes(full), self.grid_size)
    }

    /// Same curve re-evaluated on a grid of `n` samples (modes truncated when `n` is smaller).
    pub fn with_grid_size(&self, n: usize) -> Result<Self> {
        Self::from_series(self.series.clone(), n)
    }

    /// `t ↦ f(t + shift)`, so the grid starts at `shift`.
    pub fn shifted(&self, shift: T) -> Result<Self> {
        Self::from_series(self.series.shifted(shift), self.grid_size)
    }

    pub fn point(&self, t: T) -> Vec3<T> {
        self.series.eval(t)
    }

    /// `f(t)` and `f'(t)` at an arbitrary parameter.
    pub fn point_and_tangent(&self, t: T) -> (Vec3<T>, Vec3<T>) {
        self.series.eval_with_derivative(t)
    }

    /// `[f, f', f'', f''', f'''']` at an arbitrary parameter.
    pub fn jet(&self, t: T) -> [Vec3<T>; 5] {
        let mut s = self.series.clone();
        let mut out = [Vec3::zero(); 5];
        for slot in out.iter_mut() {
            *slot = s.eval(t);
            s = s.derivative();
        }
        out
    }

    /// Grid samples of the curve and its first four derivatives plus arc-length data.
    pub fn evaluate(&self) -> SampledKnot<T> {
        SampledKnot::new(self)
    }

    /// Applies `map` to every grid point and refits.
    pub fn map_points(&self, mut map: impl FnMut(usize, Vec3<T>) -> Result<Vec3<T>>) -> Result<Self> {
        let pts = self.series.eval_grid(self.grid_size);
        let mapped = pts
            .into_iter()
            .enumerate()
            .map(|(i, p)| map(i, p))
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(&mapped)
    }

    pub fn scaled(&self, k: T) -> Result<Self> {
        self.map_points(|_, p| Ok(p * k))
    }

    pub fn translated(&self, v: Vec3<T>) -> Result<Self> {
        self.map_points(|_, p| Ok(p + v))
    }

    fn validate(&self, tol: &CurveTolerances) -> Result<()> {
        let s = self.evaluate();
        let len = s.total_len;
        if !(len.is_finite() && len > T::zero()) {
            return Err(KnotError::Degenerate(format!("total length {len}")));
        }
        let min_speed = T::lit(tol.immersion_rel) * len;
        for (i, &v) in s.speed.iter().enumerate() {
            if !(v > min_speed) {
                return Err(KnotError::NotImmersed {
                    index: i,
                    speed: v.as_f64(),
                });
            }
        }
        let n = s.len();
        let window = T::lit(tol.neighbor_window) * len / T::from_usize_lossy(n);
        let min_sep = T::lit(tol.embed_rel) * len;
        for i in 0..n {
            for j in (i + 1)..n {
                if s.arc_distance(i, j) < window {
                    continue;
                }
                let d = (s.points[i] - s.points[j]).norm();
                if !(d > min_sep) {
                    return Err(KnotError::SelfIntersection {
                        i,
                        j,
                        distance: d.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    /// The curve `f ∘ ρ`.
    pub fn reparametrize(&self, rho: &ReparamMap<T>) -> Result<Self> {
        let n = self.grid_size;
        let pts: Vec<Vec3<T>> = (0..n)
            .map(|j| self.point(rho.apply(T::from_usize_lossy(j) / T::from_usize_lossy(n))))
            .collect();
        Self::from_samples(&pts)
    }

    /// Same image traversed at (numerically) constant speed.
    pub fn resample_by_arclength(&self) -> Result<Self> {
        let s = self.evaluate();
        let n = self.grid_size;
        let mut pts = Vec::with_capacity(n);
        for j in 0..n {
            let target = s.total_len * T::from_usize_lossy(j) / T::from_usize_lossy(n);
            let t = s.param_at_arclength(target)?;
            pts.push(self.point(t));
        }
        Self::from_samples(&pts)
    }
}

/// Uniform-grid evaluation of a knot and its derivatives.
#[derive(Debug, Clone)]
pub struct SampledKnot<T: Real> {
    pub curve: KnotCurve<T>,
    pub points: Vec<Vec3<T>>,
    pub d1: Vec<Vec3<T>>,
    pub d2: Vec<Vec3<T>>,
    pub d3: Vec<Vec3<T>>,
    pub d4: Vec<Vec3<T>>,
    pub speed: Vec<T>,
    /// `∫_0^{t_i} |f'|`, spectrally integrated.
    pub cum_arclen: Vec<T>,
    pub total_len: T,
    speed_series: TrigSeries<T, T>,
}

impl<T: Real> SampledKnot<T> {
    fn new(curve: &KnotCurve<T>) -> Self {
        let n = curve.grid_size;
        let s0 = curve.series.clone();
        let s1 = s0.derivative();
        let s2 = s1.derivative();
        let s3 = s2.derivative();
        let s4 = s3.derivative();
        let points = s0.eval_grid(n);
        let d1 = s1.eval_grid(n);
        let d2 = s2.eval_grid(n);
        let d3 = s3.eval_grid(n);
        let d4 = s4.eval_grid(n);
        let speed: Vec<T> = d1.iter().map(|v| v.norm()).collect();
        let speed_series = TrigSeries::<T, T>::fit(&speed, n / 2 - 1);
        let total_len = speed_series.cos[0];
        let cum_arclen = (0..n)
            .map(|j| speed_series.integral_from_zero(T::from_usize_lossy(j) / T::from_usize_lossy(n)))
            .collect();
        Self {
            curve: curve.clone(),
            points,
            d1,
            d2,
            d3,
            d4,
            speed,
            cum_arclen,
            total_len,
            speed_series,
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.curve.fingerprint()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid spacing `1/N` in parameter units.
    pub fn h(&self) -> T {
        T::one() / T::from_usize_lossy(self.len())
    }

    pub fn param(&self, i: usize) -> T {
        T::from_usize_lossy(i) / T::from_usize_lossy(self.len())
    }

    pub fn unit_tangent(&self, i: usize) -> Vec3<T> {
        self.d1[i] / self.speed[i]
    }

    /// Curvature vector `(1/|f'|) d/dt (f'/|f'|)`.
    pub fn curvature_vector(&self, i: usize) -> Vec3<T> {
        let v2 = self.speed[i] * self.speed[i];
        self.d2[i].reject_from(self.d1[i]) / v2
    }

    /// Shorter arc length between grid points `i` and `j`.
    pub fn arc_distance(&self, i: usize, j: usize) -> T {
        let mut fwd = self.cum_arclen[j] - self.cum_arclen[i];
        if fwd < T::zero() {
            fwd += self.total_len;
        }
        fwd.min(self.total_len - fwd).max(T::zero())
    }

    /// `∫_0^t |f'|` at any real `t` (unbounded, increases by the length per turn).
    pub fn arclength_at(&self, t: T) -> T {
        self.speed_series.integral_from_zero(t)
    }

    /// Speed of the spectral speed interpolant at `t`.
    pub fn speed_at(&self, t: T) -> T {
        self.speed_series.eval(t)
    }

    /// Parameter `t` with `arclength_at(t) = target`, by safeguarded Newton iteration.
    pub fn param_at_arclength(&self, target: T) -> Result<T> {
        let len = self.total_len;
        let turns = (target / len).floor();
        let local = target - turns * len;
        let n = self.len();
        // bracket on the grid
        let mut k = 0;
        while k + 1 < n && self.cum_arclen[k + 1] <= local {
            k += 1;
        }
        let (lo_s, hi_s) = (
            self.cum_arclen[k],
            if k + 1 < n { self.cum_arclen[k + 1] } else { len },
        );
        let mut lo = self.param(k);
        let mut hi = lo + self.h();
        let mut t = lo + (hi - lo) * (local - lo_s) / (hi_s - lo_s);
        let tol = T::epsilon() * T::lit(8.0) * len;
        for _ in 0..60 {
            let g = self.arclength_at(t) - local;
            if g.abs() <= tol {
                return Ok(t + turns);
            }
            if g > T::zero() {
                hi = t;
            } else {
                lo = t;
            }
            let d = self.speed_at(t);
            let mut next = t - g / d;
            if !(next > lo && next < hi) {
                next = (lo + hi) / T::lit(2.0);
            }
            t = next;
        }
        let g = self.arclength_at(t) - local;
        if g.abs() <= tol * T::lit(1e3) {
            Ok(t + turns)
        } else {
            Err(KnotError::Degenerate(format!(
                "arc-length inversion failed at s = {target}"
            )))
        }
    }

    /// Parameter at signed arc-length offset `delta` from parameter `t`.
    pub fn param_at_offset(&self, t: T, delta: T) -> Result<T> {
        let base = self.arclength_at(t);
        let target = base + delta;
        // keep the result near t so that |result - t| < 1
        let out = self.param_at_arclength(target)?;
        let turns_base = (base / self.total_len).floor();
        let turns_t = t.floor();
        Ok(out - turns_base + turns_t)
    }

    /// Max-norm diameter estimate of the sampled point cloud.
    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for a in &self.points {
            for b in &self.points {
                d = d.max((*a - *b).norm());
            }
        }
        d
    }
}

/// Orientation-preserving circle diffeomorphism `ρ(t) = t + a·sin(2πt + b)/(2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReparamMap<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> ReparamMap<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if !(a.abs() < T::one()) {
            return Err(KnotError::OutOfRange {
                what: "reparametrization amplitude",
                value: a.as_f64(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn apply(&self, t: T) -> T {
        t + self.a * (T::tau() * t + self.b).sin() / T::tau()
    }

    pub fn derivative(&self, t: T) -> T {
        T::one() + self.a * (T::tau() * t + self.b).cos()
    }
}

/// Normalized RMS distance of the grid from its best-fit circle.
///
/// The plane comes from the second-moment tensor, the in-plane circle from an
/// algebraic least-squares fit. The residual combines radial and out-of-plane
/// deviation and is divided by the fitted radius.
pub fn roundness<T: Real>(sampled: &SampledKnot<T>) -> Result<T> {
    let pts = &sampled.points;
    let n = T::from_usize_lossy(pts.len());
    let centroid = pts.iter().fold(Vec3::zero(), |a, &p| a + p) / n;
    let mut cov = Mat3::from_rows(Vec3::zero(), Vec3::zero(), Vec3::zero());
    for &p in pts {
        let d = p - centroid;
        let o = Mat3::outer(d, d);
        for r in 0..3 {
            cov.rows[r] += o.rows[r];
        }
    }
    let (vals, vecs) = cov.scale(T::one() / n).symmetric_eigen();
    let spread = vals[2];
    if !(spread > T::zero()) || !(vals[1] > spread * T::lit(1e-20)) {
        return Err(KnotError::Degenerate(
            "point cloud is collinear or coincident".into(),
        ));
    }
    let (e1, e2, normal) = (vecs[2], vecs[1], vecs[0]);
    // algebraic fit x² + y² + D x + E y + F = 0 via 3×3 normal equations
    let mut ata = [[T::zero(); 3]; 3];
    let mut atb = [T::zero(); 3];
    let scale = spread.sqrt();
    for &p in pts {
        let d = p - centroid;
        let (x, y) = (d.dot(e1) / scale, d.dot(e2) / scale);
        let row = [x, y, T::one()];
        let rhs = -(x * x + y * y);
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * rhs;
        }
    }
    let sol = solve3(ata, atb).ok_or_else(|| KnotError::Degenerate("circle fit is singular".into()))?;
    let (cx, cy) = (-sol[0] / T::lit(2.0), -sol[1] / T::lit(2.0));
    let r2 = cx * cx + cy * cy - sol[2];
    if !(r2 > T::zero()) {
        return Err(KnotError::Degenerate("circle fit has no real radius".into()));
    }
    let radius = r2.sqrt();
    let mut acc = T::zero();
    for &p in pts {
        let d = p - centroid;
        let (x, y, z) = (d.dot(e1) / scale, d.dot(e2) / scale, d.dot(normal) / scale);
        let rad = ((x - cx) * (x - cx) + (y - cy) * (y - cy)).sqrt() - radius;
        acc += rad * rad + z * z;
    }
    Ok((acc / n).sqrt() / radius)
}

fn solve3<T: Real>(a: [[T; 3]; 3], b: [T; 3]) -> Option<[T; 3]> {
    let m = Mat3::from_rows(
        Vec3::new(a[0][0], a[0][1], a[0][2]),
        Vec3::new(a[1][0], a[1][1], a[1][2]),
        Vec3::new(a[2][0], a[2][1], a[2][2]),
    );
    let det = m.det();
    if det.abs() <= T::epsilon() * m.max_abs().powi(3) {
        return None;
    }
    let col = |j: usize| Vec3::new(a[0][j], a[1][j], a[2][j]);
    let bv = Vec3::new(b[0], b[1], b[2]);
    let d0 = Vec3::triple(bv, col(1), col(2));
    let d1 = Vec3::triple(col(0), bv, col(2));
    let d2 = Vec3::triple(col(0), col(1), bv);
    // triple(c0, c1, c2) equals det of the matrix with those columns
    let det_cols = Vec3::triple(col(0), col(1), col(2));
    Some([d0 / det_cols, d1 / det_cols, d2 / det_cols])
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Named test curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Circle {
        center: [f64; 3],
        radius: f64,
        normal: [f64; 3],
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    TorusKnot {
        p: u32,
        q: u32,
        major: f64,
        minor: f64,
    },
    /// `((1 + a cos mθ) cos θ, (1 + a cos mθ) sin θ, a sin mθ)`
    PerturbedCircle {
        amplitude: f64,
        mode: u32,
    },
}

impl Preset {
    pub fn unit_circle() -> Self {
        Preset::Circle {
            center: [0.0; 3],
            radius: 1.0,
            normal: [0.0, 0.0, 1.0],
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Preset::Ellipse { a, b }
    }

    /// `((2 + cos 3θ) cos 2θ, (2 + cos 3θ) sin 2θ, sin 3θ)`
    pub fn trefoil() -> Self {
        Preset::TorusKnot {
            p: 2,
            q: 3,
            major: 2.0,
            minor: 1.0,
        }
    }

    /// Parses `name` with positional parameters, e.g. `("ellipse", [2, 1])`.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let get = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let preset = match name {
            "circle" => Preset::Circle {
                center: [get(0, 0.0), get(1, 0.0), get(2, 0.0)],
                radius: get(3, 1.0),
                normal: [get(4, 0.0), get(5, 0.0), get(6, 1.0)],
            },
            "ellipse" => Preset::Ellipse {
                a: get(0, 2.0),
                b: get(1, 1.0),
            },
            "trefoil" => Preset::trefoil(),
            "torus_knot" | "torus-knot" => Preset::TorusKnot {
                p: get(0, 2.0) as u32,
                q: get(1, 3.0) as u32,
                major: get(2, 2.0),
                minor: get(3, 1.0),
            },
            "perturbed_circle" | "perturbed-circle" => Preset::PerturbedCircle {
                amplitude: get(0, 0.2),
                mode: get(1, 3.0) as u32,
            },
            other => return Err(KnotError::InvalidParameter(format!("unknown preset {other}"))),
        };
        Ok(preset)
    }

    pub fn build<T: Real>(&self, n: usize) -> Result<KnotCurve<T>> {
        let tau = T::tau();
        match *self {
            Preset::Circle {
                center,
                radius,
                normal,
            } => {
                if !(radius > 0.0) {
                    return Err(KnotError::OutOfRange {
                        what: "circle radius",
                        value: radius,
                    });
                }
                let nrm = Vec3::<T>::from_f64(normal);
                if !(nrm.norm() > T::zero()) {
                    return Err(KnotError::InvalidParameter("zero circle normal".into()));
                }
                let nrm = nrm.normalized();
                let helper = if nrm.x.abs() < T::lit(0.9) {
                    Vec3::new(T::one(), T::zero(), T::zero())
                } else {
                    Vec3::new(T::zero(), T::one(), T::zero())
                };
                let e1 = helper.reject_from(nrm).normalized();
                let e2 = nrm.cross(e1);
                let c = Vec3::<T>::from_f64(center);
                let r = T::lit(radius);
                KnotCurve::from_fn(n, |t| {
                    let (s, co) = (tau * t).sin_cos();
                    c + (e1 * co + e2 * s) * r
                })
            }
            Preset::Ellipse { a, b } => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(KnotError::InvalidParameter(format!("ellipse axes {a}, {b}")));
                }
                let (a, b) = (T::lit(a), T::lit(b));
                KnotCurve::from_fn(n, |t| {
                    let (s, c) = (tau * t).sin_cos();
                    Vec3::new(a * c, b * s, T::zero())
                })
            }
            Preset::TorusKnot { p, q, major, minor } => {
                if p == 0 || q == 0 || gcd(p, q) != 1 {
                    return Err(KnotError::InvalidParameter(format!(
                        "torus knot ({p}, {q}) needs coprime positive integers"
                    )));
                }
                if !(minor > 0.0 && major > minor) {
                    return Err(KnotError::InvalidParameter(format!(
                        "torus radii R = {major}, r = {minor} need R > r > 0"
                    )));
                }
                let (pp, qq) = (T::lit(p as f64), T::lit(q as f64));
                let (rr, r) = (T::lit(major), T::lit(minor));
                KnotCurve::from_fn(n, |t| {
                    let th = tau * t;
                    let rad = rr + r * (qq * th).cos();
                    Vec3::new(rad * (pp * th).cos(), rad * (pp * th).sin(), r * (qq * th).sin())
                })
            }
            Preset::PerturbedCircle { amplitude, mode } => {
                if !(amplitude.abs() < 0.5) || mode < 2 {
                    return Err(KnotError::InvalidParameter(format!(
                        "perturbed circle needs |amplitude| < 0.5 and mode >= 2 (got {amplitude}, {mode})"
                    )));
                }
                let (a, m) = (T::lit(amplitude), T::lit(mode as f64));
                KnotCurve::from_fn(n, |t| {
                    let th = tau * t;
                    let rad = T::one() + a * (m * th).cos();
                    Vec3::new(rad * th.cos(), rad * th.sin(), a * (m * th).sin())
                })
            }
        }
    }
}

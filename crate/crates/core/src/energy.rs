//! The energy `E` by the cosine formula, by integrating `V`, and by the
//! chord–arc double integral, plus the `μ(θ)` family.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{pair_geometry, PotentialProfile};
use crate::curve::SampledKnot;
use crate::error::{KnotError, Result};
use crate::metric::{frenet_point, kappa_tolerance, WeightFunction};
use crate::scalar::{pairwise_sum, Real};
use crate::vec3::Vec3;

/// Exponent in the growth check `μ(θ) = O(θ^{0.51})` for tabulated kernels.
pub const CUSTOM_GROWTH_EXPONENT: f64 = 0.51;

/// Grid refinement used for `Ψ` with a non-smooth kernel.
pub const PSI_REFINEMENT: usize = 8;

/// Integrand kernel `μ(θ)` of a conformal-angle energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuKernel {
    OneMinusCos,
    AbsSine,
    /// `(π/4)(θ − θ sin θ)`
    Acyclicity,
    /// Samples of `μ` on a uniform grid of `[0, π]`, linearly interpolated.
    Custom(Vec<f64>),
}

impl MuKernel {
    /// Validates a tabulated kernel: non-negative, positive inside `(0, π)`,
    /// and growing at least like `θ^{0.51}` from zero.
    pub fn custom(table: Vec<f64>) -> Result<Self> {
        if table.len() < 3 {
            return Err(KnotError::InvalidParameter("kernel table needs at least 3 samples".into()));
        }
        let top = table.iter().cloned().fold(0.0, f64::max);
        if table.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(KnotError::InvalidParameter("kernel table must be finite and non-negative".into()));
        }
        if table[0] > 1e-12 * top {
            return Err(KnotError::InvalidParameter(format!(
                "kernel must vanish at 0 (μ(0) = {})",
                table[0]
            )));
        }
        if table[1..table.len() - 1].iter().any(|v| *v <= 0.0) {
            return Err(KnotError::InvalidParameter("kernel must be positive on (0, π)".into()));
        }
        // local exponent over the first interval must beat θ^{0.51}
        let step = PI / (table.len() - 1) as f64;
        let slope = (table[2] / table[1]).ln() / ((2.0 * step) / step).ln();
        if slope < CUSTOM_GROWTH_EXPONENT {
            return Err(KnotError::InvalidParameter(format!(
                "kernel grows like θ^{slope:.3} near 0; need at least θ^{CUSTOM_GROWTH_EXPONENT}"
            )));
        }
        Ok(MuKernel::Custom(table))
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "one_minus_cos" | "one-minus-cos" => MuKernel::OneMinusCos,
            "abs_sine" | "sin" => MuKernel::AbsSine,
            "acyclicity" | "acyclic" => MuKernel::Acyclicity,
            other => return Err(KnotError::InvalidParameter(format!("unknown kernel '{other}'"))),
        })
    }

    pub fn eval<T: Real>(&self, theta: T, one_minus_cos: T, sin: T) -> T {
        match self {
            MuKernel::OneMinusCos => one_minus_cos,
            MuKernel::AbsSine => sin,
            MuKernel::Acyclicity => T::lit(PI / 4.0) * (theta - theta * sin),
            MuKernel::Custom(table) => {
                let x = (theta.as_f64() / PI).clamp(0.0, 1.0) * (table.len() - 1) as f64;
                let k = (x.floor() as usize).min(table.len() - 2);
                let w = x - k as f64;
                T::lit(table[k] * (1.0 - w) + table[k + 1] * w)
            }
        }
    }

    /// Grid refinement for the inner `Ψ` integral. Kernels other than
    /// `1 − cos θ` have a corner at `θ = π` (along whole lines for planar
    /// curves), which drops the trapezoid rule to second order.
    pub fn refinement(&self) -> usize {
        match self {
            MuKernel::OneMinusCos => 1,
            _ => PSI_REFINEMENT,
        }
    }

    /// `μ'(0)`; the diagonal of `μ(θ)/|chord|²` tends to `μ'(0)·(dρ/ds)²/6`.
    /// Tabulated kernels use a zero diagonal.
    fn slope_at_zero(&self) -> f64 {
        match self {
            MuKernel::OneMinusCos | MuKernel::Custom(_) => 0.0,
            MuKernel::AbsSine => 1.0,
            MuKernel::Acyclicity => PI / 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMethod {
    Cosine,
    FromV,
    Fhw,
}

impl EnergyMethod {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "cosine" => EnergyMethod::Cosine,
            "from-v" | "from_v" => EnergyMethod::FromV,
            "fhw" => EnergyMethod::Fhw,
            other => return Err(KnotError::InvalidParameter(format!("unknown energy method '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport<T> {
    pub value: T,
    pub method: EnergyMethod,
    pub grid_size: usize,
    /// Difference to another route, when requested.
    pub cross_check: Option<T>,
}

fn double_sum<T: Real>(n: usize, row: impl Fn(usize) -> Vec<T> + Sync) -> T {
    let rows: Vec<T> = (0..n).into_par_iter().map(|i| pairwise_sum(&row(i))).collect();
    pairwise_sum(&rows)
}

/// `∬ (1 − cos θ_f)/|chord|² |f'(s)||f'(t)|`, zero diagonal.
pub fn energy_e_cosine<T: Real>(f: &SampledKnot<T>) -> EnergyReport<T> {
    let n = f.len();
    let h = f.h();
    let tangents: Vec<Vec3<T>> = (0..n).map(|i| f.unit_tangent(i)).collect();
    let value = double_sum(n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    return T::zero();
                }
                match pair_geometry(f.points[i], tangents[i], f.points[j], tangents[j]) {
                    Some(g) => g.one_minus_cos / g.dist_sq * f.speed[i] * f.speed[j],
                    None => T::zero(),
                }
            })
            .collect()
    }) * h
        * h;
    EnergyReport {
        value,
        method: EnergyMethod::Cosine,
        grid_size: n,
        cross_check: None,
    }
}

/// `∫ V |f'| dt`
pub fn energy_e_from_v<T: Real>(profile: &PotentialProfile<T>, f: &SampledKnot<T>) -> Result<EnergyReport<T>> {
    if profile.v.len() != f.len() {
        return Err(KnotError::GridMismatch {
            expected: f.len(),
            found: profile.v.len(),
        });
    }
    let terms: Vec<T> = profile.v.iter().zip(&f.speed).map(|(&v, &s)| v * s).collect();
    Ok(EnergyReport {
        value: pairwise_sum(&terms) * f.h(),
        method: EnergyMethod::FromV,
        grid_size: f.len(),
        cross_check: None,
    })
}

/// Forward arc length from `t_i` to `t_j` in `[0, L)`.
fn forward_arc<T: Real>(f: &SampledKnot<T>, i: usize, j: usize) -> T {
    let mut d = f.cum_arclen[j] - f.cum_arclen[i];
    if d < T::zero() {
        d += f.total_len;
    }
    d
}

/// `∬ (1/|chord|² − 1/d_f²) |f'||f'|`, summed through the smooth kernel
/// `g(σ) = (π/L)² / sin²(πσ/L)` of the forward arc length σ.
///
/// Over one turn `∫ (g − 1/d_f²) dσ = 4/L`, so the double integral equals
/// `∬ (1/|chord|² − g) |f'||f'| + 4`. The rewritten integrand is smooth and
/// periodic (the raw one has a corner where `d_f = L/2`), with diagonal limit
/// `(κ²/12 − π²/(3L²))|f'|²`. Returns the double integral.
pub fn fhw_integral<T: Real>(f: &SampledKnot<T>) -> T {
    let n = f.len();
    let h = f.h();
    let len = f.total_len;
    let w = T::PI() / len;
    let tol = kappa_tolerance(f);
    let smooth = double_sum(n, |i| {
        (0..n)
            .map(|j| {
                let ss = f.speed[i] * f.speed[j];
                if i == j {
                    let k = frenet_point(f.d1[i], f.d2[i], f.d3[i], tol).kappa;
                    return (k * k / T::lit(12.0) - w * w / T::lit(3.0)) * ss;
                }
                let chord2 = (f.points[j] - f.points[i]).norm_sq();
                let sn = (w * forward_arc(f, i, j)).sin();
                (T::one() / chord2 - w * w / (sn * sn)) * ss
            })
            .collect()
    }) * h
        * h;
    smooth + T::lit(4.0)
}

/// The chord–arc double integral summed literally, `1/|chord|² − 1/d_f²` with
/// the shorter-arc `d_f` and diagonal `κ²/12 · |f'|²`. Only second-order
/// accurate because of the corner at `d_f = L/2`; kept for comparison.
pub fn fhw_integral_direct<T: Real>(f: &SampledKnot<T>) -> T {
    let n = f.len();
    let h = f.h();
    let tol = kappa_tolerance(f);
    double_sum(n, |i| {
        (0..n)
            .map(|j| {
                let ss = f.speed[i] * f.speed[j];
                if i == j {
                    let k = frenet_point(f.d1[i], f.d2[i], f.d3[i], tol).kappa;
                    return k * k / T::lit(12.0) * ss;
                }
                let chord2 = (f.points[j] - f.points[i]).norm_sq();
                let d = f.arc_distance(i, j);
                (T::one() / chord2 - T::one() / (d * d)) * ss
            })
            .collect()
    }) * h
        * h
}

/// `E = (chord–arc double integral) − 4`
pub fn energy_e_fhw<T: Real>(f: &SampledKnot<T>) -> EnergyReport<T> {
    EnergyReport {
        value: fhw_integral(f) - T::lit(4.0),
        method: EnergyMethod::Fhw,
        grid_size: f.len(),
        cross_check: None,
    }
}

/// `Ψ(f, t_i) = ∫ μ(θ_f)/|chord|² |f'(t)| dt` at the grid nodes.
///
/// The inner integral runs over a grid [`MuKernel::refinement`] times finer,
/// sampled from the exact series.
pub fn psi_profile<T: Real>(f: &SampledKnot<T>, mu: &MuKernel) -> Result<Vec<T>> {
    psi_profile_with(f, mu, mu.refinement())
}

/// [`psi_profile`] with an explicit refinement factor `r ≥ 1`.
pub fn psi_profile_with<T: Real>(f: &SampledKnot<T>, mu: &MuKernel, r: usize) -> Result<Vec<T>> {
    if let MuKernel::Custom(table) = mu {
        MuKernel::custom(table.clone())?;
    }
    let n = f.len();
    let r = r.max(1);
    let fine;
    let src = if r == 1 {
        f
    } else {
        fine = f.curve.with_grid_size(n * r)?.evaluate();
        &fine
    };
    let tangents: Vec<Vec3<T>> = (0..src.len()).map(|j| src.unit_tangent(j)).collect();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let diag = psi_diagonal(mu, [f.d1[i], f.d2[i], f.d3[i]], kappa_tolerance(f));
            let grid = (&src.points[..], &tangents[..], &src.speed[..]);
            psi_row(grid, mu, f.points[i], f.unit_tangent(i), |j| j == i * r, diag)
        })
        .collect())
}

/// Diagonal limit `μ'(0)·√(κ'² + κ²τ²)/6 · |f'|` of the `Ψ` integrand.
fn psi_diagonal<T: Real>(mu: &MuKernel, [d1, d2, d3]: [Vec3<T>; 3], tol: T) -> T {
    let slope = T::lit(mu.slope_at_zero());
    if slope == T::zero() {
        return T::zero();
    }
    let a2 = frenet_point(d1, d2, d3, tol).conformal_density_sq();
    slope * a2.sqrt() / T::lit(6.0) * d1.norm()
}

fn psi_row<T: Real>(
    (points, tangents, speed): (&[Vec3<T>], &[Vec3<T>], &[T]),
    mu: &MuKernel,
    p: Vec3<T>,
    ts: Vec3<T>,
    on_diagonal: impl Fn(usize) -> bool,
    diag: T,
) -> T {
    let n = points.len();
    let mut cross = vec![Vec3::zero(); n];
    let row: Vec<T> = (0..n)
        .map(|j| {
            if on_diagonal(j) {
                return diag;
            }
            match pair_geometry(p, ts, points[j], tangents[j]) {
                Some(g) => {
                    cross[j] = g.cross / g.dist_sq;
                    mu.eval(g.theta, g.one_minus_cos, g.sin) / g.dist_sq * speed[j]
                }
                None => T::zero(),
            }
        })
        .collect();
    let mut total = pairwise_sum(&row);
    if !matches!(mu, MuKernel::OneMinusCos) {
        total += kink_correction(&row, &cross, &on_diagonal);
    }
    total / T::from_usize_lossy(n)
}

/// Correction (in units of the grid spacing) for corners of `μ(θ)` at
/// `θ ∈ {0, π}`.
///
/// A corner between nodes `j` and `j + 1` shows up as a sign flip of
/// `cross/|chord|²`, which stays smooth through the diagonal. The interval is integrated with one-sided linear models meeting at
/// the interpolated root, and the Euler–Maclaurin end terms of the smooth
/// remainder are restored with one-sided differences.
///
/// Its value on the diagonal node is not formed, so a corner next to it (near
/// a vertex of the curve) is located from the two neighbours.
fn kink_correction<T: Real>(row: &[T], cross: &[Vec3<T>], on_diagonal: &impl Fn(usize) -> bool) -> T {
    let n = row.len();
    let at = |k: isize| k.rem_euclid(n as isize) as usize;
    let half = T::lit(0.5);
    let interval = |j: isize, x: T| {
        let (a, b) = (at(j), at(j + 1));
        let left = row[a] - row[at(j - 1)];
        let right = row[at(j + 2)] - row[b];
        let model = x * (row[a] + half * left * x) + (T::one() - x) * (row[b] - half * right * (T::one() - x));
        model - half * (row[a] + row[b]) - (left - right) / T::lit(12.0)
    };
    let mut acc = T::zero();
    for j in 0..n as isize {
        let (a, b) = (at(j), at(j + 1));
        if on_diagonal(a) {
            let plus = cross[b].norm();
            let minus = cross[at(j - 1)].dot(cross[b]) / plus;
            if minus < T::zero() {
                let root = T::lit(2.0) * (-minus) / (plus - minus) - T::one();
                acc += if root < T::zero() {
                    interval(j - 1, root + T::one())
                } else {
                    interval(j, root)
                };
            }
            continue;
        }
        if on_diagonal(b) || cross[a].dot(cross[b]) >= T::zero() {
            continue;
        }
        let (ca, cb) = (cross[a].norm(), cross[b].norm());
        acc += interval(j, ca / (ca + cb));
    }
    acc
}

/// `Ψ` at an arbitrary parameter `s`.
pub fn psi_at<T: Real>(f: &SampledKnot<T>, mu: &MuKernel, s: T) -> T {
    psi_at_many(f, mu, &[s]).map(|v| v[0]).unwrap_or_else(|_| T::nan())
}

/// `Ψ` at several parameters. Each one is integrated on a refined grid
/// starting at the parameter itself, so no node falls just beside it.
pub fn psi_at_many<T: Real>(f: &SampledKnot<T>, mu: &MuKernel, params: &[T]) -> Result<Vec<T>> {
    if let MuKernel::Custom(table) = mu {
        MuKernel::custom(table.clone())?;
    }
    let n = f.len() * mu.refinement();
    let tol = kappa_tolerance(f);
    Ok(params
        .par_iter()
        .map(|&s| {
            let series = f.curve.series().shifted(s);
            let points = series.eval_grid(n);
            let d1 = series.derivative().eval_grid(n);
            let speed: Vec<T> = d1.iter().map(|v| v.norm()).collect();
            let tangents: Vec<Vec3<T>> = d1.iter().zip(&speed).map(|(&v, &l)| v / l).collect();
            let jet = f.curve.jet(s);
            let diag = psi_diagonal(mu, [jet[1], jet[2], jet[3]], tol);
            psi_row((&points, &tangents, &speed), mu, points[0], tangents[0], |j| j == 0, diag)
        })
        .collect())
}

/// `E_μ(f) = ∬ μ(θ_f) |f'(s)||f'(t)| / |chord|²`
pub fn energy_e_mu<T: Real>(f: &SampledKnot<T>, mu: &MuKernel) -> Result<T> {
    let psi = psi_profile(f, mu)?;
    let terms: Vec<T> = psi.iter().zip(&f.speed).map(|(&p, &s)| p * s).collect();
    Ok(pairwise_sum(&terms) * f.h())
}

/// `∫ Φ^{1/3} |f'| dt`
pub fn energy_from_weight<T: Real>(f: &SampledKnot<T>, phi: &WeightFunction<T>) -> Result<T> {
    if phi.values.len() != f.len() {
        return Err(KnotError::GridMismatch {
            expected: f.len(),
            found: phi.values.len(),
        });
    }
    if let Some((i, &v)) = phi
        .values
        .iter()
        .enumerate()
        .find(|(_, &v)| v < T::lit(-1e-10))
    {
        return Err(KnotError::NegativeWeight {
            index: i,
            value: v.as_f64(),
        });
    }
    let terms: Vec<T> = phi
        .values
        .iter()
        .zip(&f.speed)
        .map(|(&v, &s)| v.cbrt() * s)
        .collect();
    Ok(pairwise_sum(&terms) * f.h())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::potential_v_cosine;
    use crate::curve::Preset;
    use crate::metric::{build_weight, WeightKind};

    #[test]
    fn circle_energies_vanish() {
        let c = Preset::unit_circle().build::<f64>(128).unwrap().evaluate();
        assert!(energy_e_cosine(&c).value.abs() < 1e-8);
        assert!((fhw_integral(&c) - 4.0).abs() < 1e-10);
        assert!(energy_e_mu(&c, &MuKernel::AbsSine).unwrap().abs() < 1e-8);
    }

    #[test]
    fn circle_chord_arc_oracle() {
        // 2π ∫_{-π}^{π} (1/(4 sin²(x/2)) − 1/x²) dx = 4, by adaptive Simpson
        fn g(x: f64) -> f64 {
            if x.abs() < 1e-4 {
                1.0 / 12.0 + x * x / 240.0
            } else {
                1.0 / (4.0 * (x / 2.0).sin().powi(2)) - 1.0 / (x * x)
            }
        }
        fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (g(0.5 * (a + m)), g(0.5 * (m + b)));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let left = (m - a) / 6.0 * (fa + 4.0 * lm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * rm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(a, m, fa, lm, fm, tol / 2.0, depth - 1) + simpson(m, b, fm, rm, fb, tol / 2.0, depth - 1)
            }
        }
        let (a, b) = (-PI, PI);
        let v = 2.0 * PI * simpson(a, b, g(a), g(0.0), g(b), 1e-13, 40);
        assert!((v - 4.0).abs() < 1e-10, "{v}");
        // Taylor limit of the diagonal
        assert!((g(1e-5) - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn fhw_diagonal_limit_on_circle() {
        let c = Preset::unit_circle().build::<f64>(64).unwrap().evaluate();
        let k = frenet_point(c.d1[0], c.d2[0], c.d3[0], 1e-12).kappa;
        assert!((k * k / 12.0 * c.speed[0] * c.speed[0] - (2.0 * PI).powi(2) / 12.0).abs() < 1e-10);
        // the raw integrand next to the diagonal approaches the same value
        let x = 1e-3f64;
        let raw = 1.0 / (4.0 * (x / 2.0).sin().powi(2)) - 1.0 / (x * x);
        assert!((raw - 1.0 / 12.0).abs() < 1e-6);
    }

    #[test]
    fn routes_agree_on_ellipse() {
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(256).unwrap().evaluate();
        let cos = energy_e_cosine(&f).value;
        let fromv = energy_e_from_v(&potential_v_cosine(&f), &f).unwrap().value;
        let fhw = energy_e_fhw(&f).value;
        assert!((cos - fromv).abs() < 1e-10);
        assert!((cos - fhw).abs() < 1e-5 * (1.0 + cos), "{cos} vs {fhw}");
        assert!(cos > 0.0);
    }

    #[test]
    fn scale_invariance() {
        let f = Preset::trefoil().build::<f64>(128).unwrap();
        let a = energy_e_cosine(&f.evaluate()).value;
        let b = energy_e_cosine(&f.scaled(3.0).unwrap().evaluate()).value;
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn mu_one_minus_cos_is_cosine_energy() {
        let f = Preset::trefoil().build::<f64>(64).unwrap().evaluate();
        let a = energy_e_cosine(&f).value;
        let b = energy_e_mu(&f, &MuKernel::OneMinusCos).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn weight_energy_recovers_e() {
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(128).unwrap().evaluate();
        let w = build_weight(&WeightKind::VCubed, &f).unwrap();
        let a = energy_from_weight(&f, &w).unwrap();
        let b = energy_e_from_v(&potential_v_cosine(&f), &f).unwrap().value;
        assert!((a - b).abs() < 1e-12 * b);
        let c = Preset::unit_circle().build::<f64>(64).unwrap().evaluate();
        let wc = build_weight(&WeightKind::VCubed, &c).unwrap();
        assert!(energy_from_weight(&c, &wc).unwrap().abs() < 1e-8);
        let mut bad = w.clone();
        bad.values[3] = -1e-6;
        assert!(matches!(
            energy_from_weight(&f, &bad),
            Err(KnotError::NegativeWeight { index: 3, .. })
        ));
    }

    #[test]
    fn custom_kernel_growth_check() {
        let sample = |g: &dyn Fn(f64) -> f64| (0..=64).map(|k| g(PI * k as f64 / 64.0)).collect::<Vec<_>>();
        assert!(MuKernel::custom(sample(&|t| t.sin())).is_ok());
        assert!(MuKernel::custom(sample(&|t| t.powf(0.75))).is_ok());
        assert!(MuKernel::custom(sample(&|t| t.powf(0.3))).is_err());
        assert!(MuKernel::custom(sample(&|t| 1.0 + t)).is_err());
        assert!(MuKernel::custom(sample(&|t| (t - 1.0).abs())).is_err());
        // a tabulated sine reproduces the closed form up to interpolation error
        let f = Preset::ellipse(2.0, 1.0).build::<f64>(64).unwrap().evaluate();
        let table = (0..=4096).map(|k| (PI * k as f64 / 4096.0).sin()).collect();
        let a = energy_e_mu(&f, &MuKernel::custom(table).unwrap()).unwrap();
        let b = energy_e_mu(&f, &MuKernel::AbsSine).unwrap();
        assert!((a - b).abs() < 0.05 * b);
    }

    #[test]
    fn sine_diagonal_limit() {
        // sin θ / |chord|² next to the diagonal against the jet formula
        let f = Preset::trefoil().build::<f64>(256).unwrap().evaluate();
        let s = 0.1;
        let jet = f.curve.jet(s);
        let fp = frenet_point(jet[1], jet[2], jet[3], 0.0);
        let want = fp.conformal_density_sq().sqrt() / 6.0;
        // the symmetric mean removes the first-order term in the offset
        let probe = |dt: f64| {
            let (q, d) = f.curve.point_and_tangent(s + dt);
            let g = pair_geometry(jet[0], jet[1].normalized(), q, d.normalized()).unwrap();
            g.sin / g.dist_sq
        };
        let got = 0.5 * (probe(1e-4) + probe(-1e-4));
        assert!((got - want).abs() < 1e-5 * want, "{got} vs {want}");
    }
}

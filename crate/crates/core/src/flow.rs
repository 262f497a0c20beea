//! Descent along the weighted gradient `−𝒢^Φ_E` with backtracking.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curve::{roundness, KnotCurve, SampledKnot};
use crate::energy::energy_e_cosine;
use crate::error::{KnotError, Result};
use crate::gradient::{grad_e_pv, weighted_gradient, CIRCLE_TOL};
use crate::metric::{build_weight, WeightKind};
use crate::moebius::MoebiusTransform;
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Largest step in flow time; backtracking halves from here.
    pub step_size: f64,
    pub max_steps: usize,
    /// Resample by arc length every this many accepted steps (0 disables);
    /// ignored when `galerkin_modes` is set.
    pub resample_every: usize,
    pub stop_roundness: f64,
    pub stop_gradient_norm: f64,
    pub weight: WeightKind,
    pub max_halvings: usize,
    /// Factor applied to the step after an accepted step, capped at `step_size`.
    pub growth: f64,
    /// Solve for the update in the span of Fourier modes up to this index
    /// (None uses the pointwise field `G/Φ`).
    pub galerkin_modes: Option<usize>,
    /// Fraction of the largest energy-decreasing step actually taken.
    pub safety: f64,
    /// Largest pointwise move per step as a fraction of the diameter.
    pub max_displacement: f64,
    /// Keep a curve snapshot every this many steps (0 disables).
    pub snapshot_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            step_size: 1e-3,
            max_steps: 500,
            resample_every: 10,
            stop_roundness: 1e-3,
            stop_gradient_norm: 1e-12,
            weight: WeightKind::VCubed,
            max_halvings: 20,
            growth: 2.0,
            galerkin_modes: Some(8),
            safety: 0.5,
            max_displacement: 1e-2,
            snapshot_every: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(KnotError::OutOfRange {
                what: "step_size",
                value: self.step_size,
            });
        }
        if !(self.stop_roundness > 0.0) || !(self.stop_gradient_norm > 0.0) {
            return Err(KnotError::InvalidParameter("stop thresholds must be positive".into()));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(KnotError::OutOfRange {
                what: "safety",
                value: self.safety,
            });
        }
        if !(self.max_displacement > 0.0) {
            return Err(KnotError::OutOfRange {
                what: "max_displacement",
                value: self.max_displacement,
            });
        }
        if !(self.growth >= 1.0) {
            return Err(KnotError::OutOfRange {
                what: "growth",
                value: self.growth,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowRecord {
    pub step: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub grad_norm: f64,
    pub roundness: f64,
    pub step_size_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Roundness,
    GradientNorm,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct FlowTrace<T: Real> {
    /// Record 0 describes the initial curve.
    pub records: Vec<FlowRecord>,
    pub snapshots: Vec<(usize, KnotCurve<T>)>,
    pub final_curve: KnotCurve<T>,
    pub stop: StopReason,
}

impl<T: Real> FlowTrace<T> {
    pub fn energy_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].energy <= w[0].energy)
    }
}

/// Result of one accepted (or converged) step.
#[derive(Debug, Clone)]
pub struct StepOutcome<T: Real> {
    pub curve: KnotCurve<T>,
    pub energy: T,
    /// `‖𝒢‖∞` at the start of the step.
    pub grad_norm: T,
    pub step_used: T,
    /// Step to try next time (the edge found by the line search, grown).
    pub next_trial: T,
    pub halvings: usize,
    pub converged: bool,
}

/// Pointwise field `𝒢^Φ_E = G_E/Φ` (zero at round circles).
pub fn descent_field<T: Real>(f: &SampledKnot<T>, cfg: &FlowConfig) -> Result<Vec<Vec3<T>>> {
    let g = grad_e_pv(f);
    let phi = build_weight(&cfg.weight, f)?;
    Ok(weighted_gradient(f, &g, &phi, T::lit(CIRCLE_TOL))?.vectors)
}

/// Band-limited gradient: the field `d` in the span of modes `0..=modes` with
/// `⟨d, w⟩_Φ = ⟨G_E, w⟩` for every `w` in that span. Pairing with `G_E`
/// gives `‖d‖²_Φ`, so `−d` always descends, and `d → G_E/Φ` as modes grow.
pub fn galerkin_field<T: Real>(f: &SampledKnot<T>, cfg: &FlowConfig, modes: usize) -> Result<Vec<Vec3<T>>> {
    let n = f.len();
    if roundness(f)? < T::lit(CIRCLE_TOL) {
        return Ok(vec![Vec3::zero(); n]);
    }
    let g = grad_e_pv(f);
    let phi = build_weight(&cfg.weight, f)?;
    // same degenerate-weight guard as the pointwise field
    weighted_gradient(f, &g, &phi, T::lit(CIRCLE_TOL))?;
    let dim = 2 * modes + 1;
    let basis: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let mut row = Vec::with_capacity(dim);
            row.push(1.0);
            for m in 1..=modes {
                let (sn, cs) = (m as f64 * t).sin_cos();
                row.push(cs);
                row.push(sn);
            }
            row
        })
        .collect();
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DMatrix::<f64>::zeros(dim, 3);
    for i in 0..n {
        let w = (phi.values[i] * f.speed[i]).as_f64();
        let l = f.speed[i].as_f64();
        let gi = g.g.vectors[i];
        let b = &basis[i];
        for a in 0..dim {
            for c in a..dim {
                gram[(a, c)] += w * b[a] * b[c];
            }
            rhs[(a, 0)] += l * b[a] * gi.x.as_f64();
            rhs[(a, 1)] += l * b[a] * gi.y.as_f64();
            rhs[(a, 2)] += l * b[a] * gi.z.as_f64();
        }
    }
    let gram = DMatrix::from_fn(dim, dim, |a, c| if a <= c { gram[(a, c)] } else { gram[(c, a)] });
    let coeffs = gram
        .cholesky()
        .ok_or_else(|| KnotError::InvalidParameter("singular weighted Gram matrix".into()))?
        .solve(&rhs);
    Ok(basis
        .iter()
        .map(|b| {
            let mut v = [0.0; 3];
            for (a, ba) in b.iter().enumerate() {
                for (k, vk) in v.iter_mut().enumerate() {
                    *vk += ba * coeffs[(a, k)];
                }
            }
            Vec3::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
        })
        .collect())
}

/// Keeps the curve inside the space the update lives in.
fn condition<T: Real>(f: KnotCurve<T>, cfg: &FlowConfig) -> Result<KnotCurve<T>> {
    match cfg.galerkin_modes {
        Some(m) if m + 1 < f.grid_size() / 2 => f.band_limited(m),
        _ => Ok(f),
    }
}

// Arc-length resampling leaves the band-limited space and costs more
// geometry than it saves, so it only runs with the pointwise field.
fn resampling(cfg: &FlowConfig) -> bool {
    cfg.resample_every > 0 && cfg.galerkin_modes.is_none()
}

fn update_field<T: Real>(f: &SampledKnot<T>, cfg: &FlowConfig) -> Result<Vec<Vec3<T>>> {
    match cfg.galerkin_modes {
        Some(m) if m + 1 < f.len() / 2 => galerkin_field(f, cfg, m),
        _ => descent_field(f, cfg),
    }
}

fn advance<T: Real>(f: &SampledKnot<T>, dir: &[Vec3<T>], h: T) -> Result<KnotCurve<T>> {
    let pts: Vec<Vec3<T>> = f.points.iter().zip(dir).map(|(p, d)| *p - *d * h).collect();
    KnotCurve::from_samples(&pts)
}

struct Lane<T: Real> {
    sampled: SampledKnot<T>,
    dir: Vec<Vec3<T>>,
    energy: T,
    grad_norm: T,
}

impl<T: Real> Lane<T> {
    fn new(f: &KnotCurve<T>, cfg: &FlowConfig) -> Result<Self> {
        let sampled = f.evaluate();
        let dir = update_field(&sampled, cfg)?;
        Ok(Self {
            energy: energy_e_cosine(&sampled).value,
            grad_norm: dir.iter().fold(T::zero(), |m, v| m.max(v.norm())),
            sampled,
            dir,
        })
    }
}

struct Accepted<T: Real> {
    curves: Vec<KnotCurve<T>>,
    energies: Vec<T>,
    step: T,
    /// First energy-decreasing step found, before the safety back-off.
    edge: T,
    halvings: usize,
}

/// Largest step below `trial` lowering the energy of every lane, scaled back
/// by `cfg.safety` (the first decreasing step tends to sit on the stability edge).
fn line_search<T: Real>(lanes: &[Lane<T>], cfg: &FlowConfig, trial: T, step_index: usize) -> Result<Accepted<T>> {
    let mut h = trial;
    for lane in lanes {
        let reach = T::lit(cfg.max_displacement) * lane.sampled.diameter();
        if lane.grad_norm * h > reach {
            h = reach / lane.grad_norm;
        }
    }
    let mut backed_off = cfg.safety >= 1.0;
    let mut edge = h;
    let mut halvings = 0;
    while halvings <= cfg.max_halvings {
        let attempt: Option<(Vec<KnotCurve<T>>, Vec<T>)> = lanes
            .iter()
            .map(|lane| {
                let next = advance(&lane.sampled, &lane.dir, h).ok()?;
                let e1 = energy_e_cosine(&next.evaluate()).value;
                (e1 <= lane.energy).then_some((next, e1))
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().unzip());
        match attempt {
            Some(_) if !backed_off => {
                backed_off = true;
                edge = h;
                h *= T::lit(cfg.safety);
            }
            Some((curves, energies)) => {
                return Ok(Accepted {
                    curves,
                    energies,
                    step: h,
                    edge: if cfg.safety >= 1.0 { h } else { edge },
                    halvings,
                })
            }
            None => {
                h /= T::lit(2.0);
                halvings += 1;
            }
        }
    }
    Err(KnotError::StepFailure {
        step: step_index,
        energy: lanes[0].energy.as_f64(),
        halvings: cfg.max_halvings,
    })
}

/// One explicit Euler step `f − h 𝒢^Φ_E(f)` starting from step `trial`,
/// halving while the energy increases or the curve stops being a knot.
pub fn flow_step_from<T: Real>(f: &KnotCurve<T>, cfg: &FlowConfig, trial: T, step_index: usize) -> Result<StepOutcome<T>> {
    let s = f.evaluate();
    if roundness(&s)? < T::lit(cfg.stop_roundness) {
        return Ok(StepOutcome {
            curve: f.clone(),
            energy: energy_e_cosine(&s).value,
            grad_norm: T::zero(),
            step_used: T::zero(),
            next_trial: trial,
            halvings: 0,
            converged: true,
        });
    }
    let lane = Lane::new(f, cfg)?;
    let grad_norm = lane.grad_norm;
    let mut acc = line_search(std::slice::from_ref(&lane), cfg, trial, step_index)?;
    Ok(StepOutcome {
        curve: acc.curves.remove(0),
        energy: acc.energies[0],
        grad_norm,
        step_used: acc.step,
        next_trial: (acc.edge * T::lit(cfg.growth)).min(T::lit(cfg.step_size)),
        halvings: acc.halvings,
        converged: false,
    })
}

pub fn flow_step<T: Real>(f: &KnotCurve<T>, cfg: &FlowConfig) -> Result<StepOutcome<T>> {
    cfg.validate()?;
    flow_step_from(f, cfg, T::lit(cfg.step_size), 0)
}

fn record<T: Real>(step: usize, f: &SampledKnot<T>, energy: T, grad_norm: T, used: T) -> Result<FlowRecord> {
    Ok(FlowRecord {
        step,
        energy: energy.as_f64(),
        grad_norm: grad_norm.as_f64(),
        roundness: roundness(f)?.as_f64(),
        step_size_used: used.as_f64(),
    })
}

/// Iterates accepted steps until a stop condition; the step size carries over
/// between steps and grows by `growth` after each success.
pub fn run_flow<T: Real>(f0: &KnotCurve<T>, cfg: &FlowConfig) -> Result<FlowTrace<T>> {
    cfg.validate()?;
    let cap = T::lit(cfg.step_size);
    let mut curve = condition(f0.clone(), cfg)?;
    let s0 = curve.evaluate();
    let mut records = vec![record(0, &s0, energy_e_cosine(&s0).value, T::zero(), T::zero())?];
    let mut snapshots = Vec::new();
    if cfg.snapshot_every > 0 {
        snapshots.push((0, curve.clone()));
    }
    let mut trial = cap;
    let mut stop = StopReason::MaxSteps;
    for step in 1..=cfg.max_steps {
        if records.last().map(|r| r.roundness < cfg.stop_roundness) == Some(true) {
            stop = StopReason::Roundness;
            break;
        }
        let out = flow_step_from(&curve, cfg, trial, step)?;
        if out.converged {
            stop = StopReason::Roundness;
            break;
        }
        curve = out.curve;
        if resampling(cfg) && step % cfg.resample_every == 0 {
            curve = curve.resample_by_arclength()?;
        }
        let s = curve.evaluate();
        records.push(record(step, &s, energy_e_cosine(&s).value, out.grad_norm, out.step_used)?);
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 {
            snapshots.push((step, curve.clone()));
        }
        if out.grad_norm < T::lit(cfg.stop_gradient_norm) {
            stop = StopReason::GradientNorm;
            break;
        }
        trial = out.next_trial;
    }
    if stop == StopReason::MaxSteps && records.last().map(|r| r.roundness < cfg.stop_roundness) == Some(true) {
        stop = StopReason::Roundness;
    }
    Ok(FlowTrace {
        records,
        snapshots,
        final_curve: curve,
        stop,
    })
}

/// Symmetric Hausdorff distance between the images of two knots, sampled
/// `oversample` times more densely than their grids.
pub fn hausdorff<T: Real>(a: &KnotCurve<T>, b: &KnotCurve<T>, oversample: usize) -> T {
    let sample = |c: &KnotCurve<T>| -> Vec<Vec3<T>> {
        let n = c.grid_size() * oversample.max(1);
        (0..n)
            .map(|j| c.point(T::from_usize_lossy(j) / T::from_usize_lossy(n)))
            .collect()
    };
    let (pa, pb) = (sample(a), sample(b));
    let one_sided = |x: &[Vec3<T>], y: &[Vec3<T>]| {
        x.iter().fold(T::zero(), |m, p| {
            let d = y.iter().fold(T::infinity(), |best, q| best.min((*p - *q).norm_sq()));
            m.max(d.sqrt())
        })
    };
    one_sided(&pa, &pb).max(one_sided(&pb, &pa))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeStep {
    pub step: usize,
    /// Hausdorff distance between `T(flow(f0))` and `flow(T∘f0)` over the
    /// diameter of the latter.
    pub relative_hausdorff: f64,
    pub energy_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub steps: Vec<ProbeStep>,
}

impl InvarianceReport {
    pub fn max_drift(&self) -> f64 {
        self.steps.iter().map(|s| s.relative_hausdorff).fold(0.0, f64::max)
    }
}

fn compactness_at(step: usize) -> impl Fn(KnotError) -> KnotError {
    move |e| match e {
        KnotError::ImageNotCompact { distance, .. } => KnotError::ImageNotCompact {
            index: Some(step),
            distance,
        },
        other => other,
    }
}

/// Flows `f0` and `T∘f0` side by side with shared step sizes (each step is
/// the largest one lowering both energies) and compares `T` applied to the
/// first trajectory with the second.
pub fn invariance_probe<T: Real>(
    f0: &KnotCurve<T>,
    t: &MoebiusTransform<T>,
    cfg: &FlowConfig,
) -> Result<InvarianceReport> {
    cfg.validate()?;
    let cap = T::lit(cfg.step_size);
    let mut f = condition(f0.clone(), cfg)?;
    let mut g = condition(t.apply_to_curve(f0).map_err(compactness_at(0))?, cfg)?;
    let mut trial = cap;
    let mut steps = Vec::new();
    for step in 1..=cfg.max_steps {
        let (sf, sg) = (f.evaluate(), g.evaluate());
        let tol = T::lit(cfg.stop_roundness);
        if roundness(&sf)? < tol || roundness(&sg)? < tol {
            break;
        }
        let lanes = [Lane::new(&f, cfg)?, Lane::new(&g, cfg)?];
        let mut acc = line_search(&lanes, cfg, trial, step)?;
        g = acc.curves.pop().expect("two lanes");
        f = acc.curves.pop().expect("two lanes");
        if resampling(cfg) && step % cfg.resample_every == 0 {
            f = f.resample_by_arclength()?;
            g = g.resample_by_arclength()?;
        }
        let moved = t.apply_to_curve(&f).map_err(compactness_at(step))?;
        let gs = g.evaluate();
        steps.push(ProbeStep {
            step,
            relative_hausdorff: (hausdorff(&moved, &g, 2) / gs.diameter()).as_f64(),
            energy_difference: (energy_e_cosine(&gs).value - energy_e_cosine(&f.evaluate()).value)
                .abs()
                .as_f64(),
        });
        trial = (acc.edge * T::lit(cfg.growth)).min(cap);
    }
    Ok(InvarianceReport { steps })
}

//! Knot and transform JSON, CSV emitters for fields and traces.

use serde::{Deserialize, Serialize};

use crate::conformal::{AngleField, PotentialProfile};
use crate::curve::{KnotCurve, SampledKnot};
use crate::error::{KnotError, Result};
use crate::flow::FlowRecord;
use crate::fourier::TrigSeries;
use crate::gradient::GradientField;
use crate::metric::WeightFunction;
use crate::moebius::{axis_angle, MoebiusTransform, Primitive};
use crate::scalar::Real;
use crate::vec3::{Mat3, Vec3};

/// Per-coordinate `[cos, sin]` pairs indexed by mode, starting at mode 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffsJson {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
    pub z: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "lowercase")]
pub enum KnotJson {
    Fourier {
        modes: usize,
        coeffs: CoeffsJson,
        grid_size: usize,
    },
    Samples {
        points: Vec<[f64; 3]>,
    },
}

impl KnotJson {
    pub fn from_curve<T: Real>(f: &KnotCurve<T>) -> Self {
        let s = f.series();
        let pair = |k: usize, axis: usize| [s.cos[k].to_f64()[axis], s.sin[k].to_f64()[axis]];
        let column = |axis: usize| (0..=s.modes()).map(|k| pair(k, axis)).collect();
        KnotJson::Fourier {
            modes: s.modes(),
            coeffs: CoeffsJson {
                x: column(0),
                y: column(1),
                z: column(2),
            },
            grid_size: f.grid_size(),
        }
    }

    /// A coefficient list of length `modes` (no constant term) is read as
    /// modes `1..=modes` with the curve centred at the origin.
    pub fn to_curve<T: Real>(&self) -> Result<KnotCurve<T>> {
        match self {
            KnotJson::Samples { points } => {
                let pts: Vec<Vec3<T>> = points.iter().map(|p| Vec3::from_f64(*p)).collect();
                KnotCurve::from_samples(&pts)
            }
            KnotJson::Fourier {
                modes,
                coeffs,
                grid_size,
            } => {
                let lists = [&coeffs.x, &coeffs.y, &coeffs.z];
                let len = coeffs.x.len();
                if lists.iter().any(|l| l.len() != len) {
                    return Err(KnotError::Format("coefficient lists differ in length".into()));
                }
                let offset = if len == modes + 1 {
                    0
                } else if len == *modes {
                    1
                } else {
                    return Err(KnotError::Format(format!(
                        "expected {} or {} coefficient pairs for {modes} modes, found {len}",
                        modes + 1,
                        modes
                    )));
                };
                let mut cos = vec![Vec3::zero(); modes + 1];
                let mut sin = vec![Vec3::zero(); modes + 1];
                for (k, (c, s)) in cos.iter_mut().zip(sin.iter_mut()).enumerate().skip(offset) {
                    let at = |axis: usize| lists[axis][k - offset];
                    *c = Vec3::from_f64([at(0)[0], at(1)[0], at(2)[0]]);
                    *s = Vec3::from_f64([at(0)[1], at(1)[1], at(2)[1]]);
                }
                KnotCurve::from_series(TrigSeries::new(cos, sin), *grid_size)
            }
        }
    }
}

pub fn read_knot<T: Real>(json: &str) -> Result<KnotCurve<T>> {
    let parsed: KnotJson = serde_json::from_str(json).map_err(|e| KnotError::Format(e.to_string()))?;
    parsed.to_curve()
}

pub fn write_knot<T: Real>(f: &KnotCurve<T>) -> String {
    serde_json::to_string_pretty(&KnotJson::from_curve(f)).expect("plain data serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PrimitiveJson {
    Translation {
        v: [f64; 3],
    },
    /// Either an explicit orthogonal matrix (rows) or an axis and an angle.
    Rotation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<[[f64; 3]; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle: Option<f64>,
    },
    Homothety {
        k: f64,
    },
    Inversion {
        center: [f64; 3],
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformJson {
    pub word: Vec<PrimitiveJson>,
}

impl TransformJson {
    pub fn from_transform<T: Real>(t: &MoebiusTransform<T>) -> Self {
        let word = t
            .word
            .iter()
            .map(|p| match p {
                Primitive::Translation(v) => PrimitiveJson::Translation { v: v.to_f64() },
                Primitive::Rotation(m) => PrimitiveJson::Rotation {
                    matrix: Some([m.rows[0].to_f64(), m.rows[1].to_f64(), m.rows[2].to_f64()]),
                    axis: None,
                    angle: None,
                },
                Primitive::Homothety(k) => PrimitiveJson::Homothety { k: k.as_f64() },
                Primitive::SphereInversion { center, radius } => PrimitiveJson::Inversion {
                    center: center.to_f64(),
                    radius: radius.as_f64(),
                },
            })
            .collect();
        Self { word }
    }

    pub fn to_transform<T: Real>(&self) -> Result<MoebiusTransform<T>> {
        let word = self
            .word
            .iter()
            .map(|p| {
                Ok(match p {
                    PrimitiveJson::Translation { v } => Primitive::Translation(Vec3::from_f64(*v)),
                    PrimitiveJson::Rotation { matrix, axis, angle } => match (matrix, axis, angle) {
                        (Some(m), None, None) => Primitive::Rotation(Mat3::from_rows(
                            Vec3::from_f64(m[0]),
                            Vec3::from_f64(m[1]),
                            Vec3::from_f64(m[2]),
                        )),
                        (None, Some(a), Some(th)) => Primitive::Rotation(axis_angle(Vec3::from_f64(*a), T::lit(*th))),
                        _ => {
                            return Err(KnotError::Format(
                                "rotation needs either `matrix` or both `axis` and `angle`".into(),
                            ))
                        }
                    },
                    PrimitiveJson::Homothety { k } => Primitive::Homothety(T::lit(*k)),
                    PrimitiveJson::Inversion { center, radius } => Primitive::SphereInversion {
                        center: Vec3::from_f64(*center),
                        radius: T::lit(*radius),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MoebiusTransform::from_word(word)
    }
}

pub fn read_transform<T: Real>(json: &str) -> Result<MoebiusTransform<T>> {
    let parsed: TransformJson = serde_json::from_str(json).map_err(|e| KnotError::Format(e.to_string()))?;
    parsed.to_transform()
}

pub fn write_transform<T: Real>(t: &MoebiusTransform<T>) -> String {
    serde_json::to_string_pretty(&TransformJson::from_transform(t)).expect("plain data serializes")
}

fn emit<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory writer");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

#[derive(Serialize)]
struct PotentialRow {
    t: f64,
    #[serde(rename = "V")]
    v: f64,
}

pub fn potential_csv<T: Real>(f: &SampledKnot<T>, profile: &PotentialProfile<T>) -> String {
    emit((0..f.len()).map(|i| PotentialRow {
        t: f.param(i).as_f64(),
        v: profile.v[i].as_f64(),
    }))
}

#[derive(Serialize)]
struct AngleRow {
    i: usize,
    j: usize,
    theta: f64,
}

/// One row per unordered pair `i < j`.
pub fn angle_csv<T: Real>(field: &AngleField<T>) -> String {
    let n = field.n;
    emit((0..n).flat_map(|i| {
        (i + 1..n).map(move |j| AngleRow {
            i,
            j,
            theta: field.get(i, j).as_f64(),
        })
    }))
}

#[derive(Serialize)]
struct WeightRow {
    t: f64,
    #[serde(rename = "Phi")]
    phi: f64,
}

pub fn weight_csv<T: Real>(f: &SampledKnot<T>, w: &WeightFunction<T>) -> String {
    emit((0..f.len()).map(|i| WeightRow {
        t: f.param(i).as_f64(),
        phi: w.values[i].as_f64(),
    }))
}

#[derive(Serialize)]
struct GradientRow {
    t: f64,
    gx: f64,
    gy: f64,
    gz: f64,
    norm: f64,
    route_residual: Option<f64>,
}

/// Columns `t, gx, gy, gz, norm, route_residual`; the residual is empty when
/// only one route ran.
pub fn gradient_csv<T: Real>(f: &SampledKnot<T>, g: &GradientField<T>) -> String {
    emit((0..f.len()).map(|i| {
        let v = g.g.vectors[i];
        let [gx, gy, gz] = v.to_f64();
        GradientRow {
            t: f.param(i).as_f64(),
            gx,
            gy,
            gz,
            norm: v.norm().as_f64(),
            route_residual: g.route_residual.as_ref().map(|r| r[i].as_f64()),
        }
    }))
}

pub fn trace_csv(records: &[FlowRecord]) -> String {
    emit(records.iter())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Preset;

    #[test]
    fn knot_json_round_trip() {
        let c = Preset::trefoil().build::<f64>(64).unwrap();
        let back: KnotCurve<f64> = read_knot(&write_knot(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn fourier_without_constant_term() {
        let json = r#"{"representation":"fourier","modes":1,"grid_size":16,
            "coeffs":{"x":[[2,0]],"y":[[0,1]],"z":[[0,0]]}}"#;
        let c: KnotCurve<f64> = read_knot(json).unwrap();
        let p = c.point(0.25);
        assert!((p.x).abs() < 1e-14 && (p.y - 1.0).abs() < 1e-14);
    }

    #[test]
    fn samples_json() {
        let pts: Vec<[f64; 3]> = (0..32)
            .map(|j| {
                let a = std::f64::consts::TAU * j as f64 / 32.0;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
        let json = serde_json::to_string(&KnotJson::Samples { points: pts }).unwrap();
        let c: KnotCurve<f64> = read_knot(&json).unwrap();
        assert_eq!(c.grid_size(), 32);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(read_knot::<f64>("{}").is_err());
        let bad = r#"{"representation":"fourier","modes":2,"grid_size":16,
            "coeffs":{"x":[[0,0]],"y":[[0,0]],"z":[[0,0]]}}"#;
        assert!(matches!(read_knot::<f64>(bad), Err(KnotError::Format(_))));
        let rot = r#"{"word":[{"type":"rotation","axis":[0,0,1]}]}"#;
        assert!(read_transform::<f64>(rot).is_err());
    }

    #[test]
    fn transform_json_round_trip() {
        let json = r#"{"word":[{"type":"inversion","center":[3,0,0],"radius":2},
            {"type":"homothety","k":0.5},{"type":"rotation","axis":[0,0,1],"angle":1.0},
            {"type":"translation","v":[1,2,3]}]}"#;
        let t: MoebiusTransform<f64> = read_transform(json).unwrap();
        let again: MoebiusTransform<f64> = read_transform(&write_transform(&t)).unwrap();
        let p = Vec3::new(0.3, -0.2, 0.1);
        assert!((t.apply(p).unwrap() - again.apply(p).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn csv_headers() {
        let c = Preset::unit_circle().build::<f64>(8).unwrap().evaluate();
        let prof = crate::conformal::potential_v_cosine(&c);
        let out = potential_csv(&c, &prof);
        assert!(out.starts_with("t,V\n"));
        assert_eq!(out.lines().count(), 9);
        let ang = angle_csv(&AngleField::compute(&c).unwrap());
        assert_eq!(ang.lines().count(), 1 + 8 * 7 / 2);
    }
}

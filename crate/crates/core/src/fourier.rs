//! Real trigonometric series on S¹ = ℝ/ℤ.
//!
//! A series is stored as cosine/sine coefficient vectors indexed by mode
//! `k = 0..=M`, representing `Σ cos[k]·cos(2πkt) + sin[k]·sin(2πkt)`.

use std::ops::{Add, Mul, Sub};

use crate::scalar::Real;
use crate::vec3::Vec3;

/// Coefficient types a trigonometric series can carry (scalars and 3-vectors).
pub trait Coeff<T>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self> + Send + Sync
{
    fn zero() -> Self;
}

impl<T: Real> Coeff<T> for T {
    fn zero() -> Self {
        T::zero()
    }
}

impl<T: Real> Coeff<T> for Vec3<T> {
    fn zero() -> Self {
        Vec3::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries<T, V> {
    pub cos: Vec<V>,
    pub sin: Vec<V>,
    _scalar: std::marker::PhantomData<T>,
}

/// `(cos(2πm/n), sin(2πm/n))` for `m = 0..n`.
pub fn twiddles<T: Real>(n: usize) -> Vec<(T, T)> {
    (0..n)
        .map(|m| {
            let ang = T::tau() * T::from_usize_lossy(m) / T::from_usize_lossy(n);
            (ang.cos(), ang.sin())
        })
        .collect()
}

impl<T: Real, V: Coeff<T>> TrigSeries<T, V> {
    pub fn new(cos: Vec<V>, sin: Vec<V>) -> Self {
        assert_eq!(cos.len(), sin.len(), "cosine/sine coefficient count mismatch");
        assert!(!cos.is_empty(), "series needs at least the constant mode");
        Self {
            cos,
            sin,
            _scalar: std::marker::PhantomData,
        }
    }

    /// Highest mode `M`.
    pub fn modes(&self) -> usize {
        self.cos.len() - 1
    }

    /// Discrete Fourier fit of `n` uniform samples `v(j/n)` keeping modes `0..=modes`.
    ///
    /// With `modes = n/2 - 1` this interpolates any sample set whose Nyquist
    /// component vanishes.
    pub fn fit(samples: &[V], modes: usize) -> Self {
        let n = samples.len();
        assert!(modes < n.div_ceil(2), "modes {modes} too high for {n} samples");
        let tw = twiddles::<T>(n);
        let two_over_n = T::lit(2.0) / T::from_usize_lossy(n);
        let mut cos = Vec::with_capacity(modes + 1);
        let mut sin = Vec::with_capacity(modes + 1);
        for k in 0..=modes {
            let mut a = V::zero();
            let mut b = V::zero();
            for (j, &s) in samples.iter().enumerate() {
                let (c, sn) = tw[(k * j) % n];
                a = a + s * c;
                b = b + s * sn;
            }
            if k == 0 {
                cos.push(a * (two_over_n / T::lit(2.0)));
                sin.push(V::zero());
            } else {
                cos.push(a * two_over_n);
                sin.push(b * two_over_n);
            }
        }
        Self::new(cos, sin)
    }

    /// Term-wise derivative `d/dt`.
    pub fn derivative(&self) -> Self {
        let mut cos = Vec::with_capacity(self.cos.len());
        let mut sin = Vec::with_capacity(self.sin.len());
        for k in 0..self.cos.len() {
            let w = T::tau() * T::from_usize_lossy(k);
            // d/dt [a cos(wt) + b sin(wt)] = b w cos(wt) - a w sin(wt)
            cos.push(self.sin[k] * w);
            sin.push(self.cos[k] * (-w));
        }
        Self::new(cos, sin)
    }

    /// Values on the uniform grid `t_j = j/n`.
    pub fn eval_grid(&self, n: usize) -> Vec<V> {
        let tw = twiddles::<T>(n);
        (0..n)
            .map(|j| {
                let mut acc = V::zero();
                for k in 0..self.cos.len() {
                    let (c, s) = tw[(k * j) % n];
                    acc = acc + self.cos[k] * c + self.sin[k] * s;
                }
                acc
            })
            .collect()
    }

    /// Value at an arbitrary parameter, using the angle-addition recurrence.
    pub fn eval(&self, t: T) -> V {
        let ang = T::tau() * t;
        let (s1, c1) = ang.sin_cos();
        let (mut c, mut s) = (T::one(), T::zero());
        let mut acc = self.cos[0];
        for k in 1..self.cos.len() {
            let cn = c * c1 - s * s1;
            let sn = s * c1 + c * s1;
            c = cn;
            s = sn;
            acc = acc + self.cos[k] * c + self.sin[k] * s;
        }
        acc
    }

    /// Value and first derivative at an arbitrary parameter.
    pub fn eval_with_derivative(&self, t: T) -> (V, V) {
        let ang = T::tau() * t;
        let (s1, c1) = ang.sin_cos();
        let (mut c, mut s) = (T::one(), T::zero());
        let mut val = self.cos[0];
        let mut der = V::zero();
        for k in 1..self.cos.len() {
            let cn = c * c1 - s * s1;
            let sn = s * c1 + c * s1;
            c = cn;
            s = sn;
            let w = T::tau() * T::from_usize_lossy(k);
            val = val + self.cos[k] * c + self.sin[k] * s;
            der = der + self.sin[k] * (w * c) - self.cos[k] * (w * s);
        }
        (val, der)
    }

    /// The series of `t ↦ v(t + shift)`.
    pub fn shifted(&self, shift: T) -> Self {
        let mut cos = Vec::with_capacity(self.cos.len());
        let mut sin = Vec::with_capacity(self.sin.len());
        for k in 0..self.cos.len() {
            let (sw, cw) = (T::tau() * T::from_usize_lossy(k) * shift).sin_cos();
            cos.push(self.cos[k] * cw + self.sin[k] * sw);
            sin.push(self.sin[k] * cw - self.cos[k] * sw);
        }
        Self::new(cos, sin)
    }

    /// Same coefficients truncated (or zero-padded) to `modes`.
    pub fn with_modes(&self, modes: usize) -> Self {
        let mut cos = self.cos.clone();
        let mut sin = self.sin.clone();
        cos.resize(modes + 1, V::zero());
        sin.resize(modes + 1, V::zero());
        Self::new(cos, sin)
    }
}

impl<T: Real> TrigSeries<T, T> {
    /// Antiderivative `∫_0^t` of the series; the constant mode contributes `cos[0]·t`.
    pub fn integral_from_zero(&self, t: T) -> T {
        let mut acc = self.cos[0] * t;
        let ang = T::tau() * t;
        let (s1, c1) = ang.sin_cos();
        let (mut c, mut s) = (T::one(), T::zero());
        for k in 1..self.cos.len() {
            let cn = c * c1 - s * s1;
            let sn = s * c1 + c * s1;
            c = cn;
            s = sn;
            let w = T::tau() * T::from_usize_lossy(k);
            acc += (self.cos[k] * s - self.sin[k] * (c - T::one())) / w;
        }
        acc
    }
}

/// Spectral derivative of periodic grid samples.
pub fn spectral_derivative<T: Real>(values: &[T]) -> Vec<T> {
    let n = values.len();
    TrigSeries::<T, T>::fit(values, n / 2 - 1)
        .derivative()
        .eval_grid(n)
}

/// Band-limited interpolation of periodic grid samples at parameter `t`.
pub fn interpolate_periodic<T: Real>(values: &[T], t: T) -> T {
    let n = values.len();
    TrigSeries::<T, T>::fit(values, n / 2 - 1).eval(t)
}

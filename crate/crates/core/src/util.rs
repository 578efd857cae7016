//! Shared numeric helpers: compensated and pairwise summation, deterministic
//! reductions, and serde adapters for complex numbers as `[re, im]` pairs.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const TAU_I: Complex64 = Complex64::new(0.0, std::f64::consts::TAU);

/// Neumaier (improved Kahan) compensated accumulator for f64.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated complex accumulator (component-wise Neumaier).
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierC {
    re: Neumaier,
    im: Neumaier,
}

impl NeumaierC {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Pairwise summation in a fixed tree order.  The reduction order depends
/// only on the slice length, so reruns are bit-identical.
pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    match xs.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// An `a + b·eps` style bound on the rounding error of summing `terms`:
/// machine epsilon times the magnitude mass times the tree depth.
pub fn sum_error_bound(abs_mass: f64, count: usize) -> f64 {
    let depth = (count.max(2) as f64).log2().ceil();
    f64::EPSILON * abs_mass * depth
}

/// Complex number serialized as a two-element `[re, im]` array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cpx(pub Complex64);

impl From<Complex64> for Cpx {
    fn from(z: Complex64) -> Self {
        Cpx(z)
    }
}

impl From<Cpx> for Complex64 {
    fn from(c: Cpx) -> Self {
        c.0
    }
}

impl Serialize for Cpx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cpx {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Cpx(Complex64::new(re, im)))
    }
}

/// Serialize a `Complex64` field as `[re, im]` (for `#[serde(with = ...)]`).
pub mod cpx_serde {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// Fractional part folded into [0, 1).
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut acc = Neumaier::default();
        acc.add(1e16);
        acc.add(1.0);
        acc.add(-1e16);
        assert_eq!(acc.value(), 1.0);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<Complex64> = (0..37)
            .map(|k| Complex64::new(k as f64, -(k as f64) / 3.0))
            .collect();
        let naive: Complex64 = xs.iter().sum();
        let pair = pairwise_sum(&xs);
        assert!((naive - pair).norm() < 1e-12);
    }

    #[test]
    fn cpx_round_trips_through_json() {
        let z = Cpx(Complex64::new(1.5, -2.25));
        let s = serde_json::to_string(&z).unwrap();
        assert_eq!(s, "[1.5,-2.25]");
        let back: Cpx = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
    }
}

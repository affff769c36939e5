//! Labeled random streams and the sampling primitives used by the models.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed. The 64-bit
//! ChaCha stream id is a packed encoding of the provenance label, so two
//! distinct labels always select disjoint keystreams and a label replays the
//! same sequence on any platform, independent of how work is scheduled.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Name recorded in output metadata.
pub const PRNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/stream=domain:8|angle:24|experiment:32";

const MAX_ANGLE_INDEX: u64 = (1 << 24) - 1;

/// Which part of a plan a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamDomain {
    Collapse,
    LocalRealistic,
    Smeared,
    /// Resampling streams used by the fitting code.
    Bootstrap,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::Collapse => 1,
            StreamDomain::LocalRealistic => 2,
            StreamDomain::Smeared => 3,
            StreamDomain::Bootstrap => 0x10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamLabel {
    pub domain: StreamDomain,
    pub angle_index: u32,
    pub experiment_index: u32,
}

impl StreamLabel {
    fn stream_id(&self) -> u64 {
        debug_assert!(u64::from(self.angle_index) <= MAX_ANGLE_INDEX);
        (self.domain.tag() << 56)
            | ((u64::from(self.angle_index) & MAX_ANGLE_INDEX) << 32)
            | u64::from(self.experiment_index)
    }
}

/// A deterministic random stream owned by exactly one task.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    label: StreamLabel,
}

impl RandomStream {
    pub fn label(&self) -> StreamLabel {
        self.label
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn derive_stream(
    master_seed: u64,
    domain: StreamDomain,
    angle_index: usize,
    experiment_index: usize,
) -> RandomStream {
    assert!(
        angle_index as u64 <= MAX_ANGLE_INDEX && experiment_index as u64 <= u64::from(u32::MAX),
        "stream label out of range: angle {angle_index}, experiment {experiment_index}"
    );
    let label = StreamLabel {
        domain,
        angle_index: angle_index as u32,
        experiment_index: experiment_index as u32,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(label.stream_id());
    RandomStream { rng, label }
}

/// Polarization angle uniform on `[-pi/2, pi/2)`.
#[inline]
pub fn uniform_angle(stream: &mut RandomStream) -> f64 {
    (stream.next_unit() - 0.5) * PI
}

/// Sample from `Normal(mean, sigma^2)`, not wrapped. `sigma == 0` returns
/// `mean` without consuming the stream.
#[inline]
pub fn gaussian_angle(stream: &mut RandomStream, mean: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return mean;
    }
    let z: f64 = stream.sample(StandardNormal);
    mean + sigma * z
}

/// Von Neumann acceptance: draw `N` uniform on `[0, p_max)` and accept iff
/// `N < p`.
pub fn accept(stream: &mut RandomStream, p: f64, p_max: f64) -> Result<bool> {
    if !(p_max > 0.0 && p_max <= 1.0) {
        return Err(Error::Contract(format!("acceptance bound {p_max} outside (0, 1]")));
    }
    if !(p >= 0.0 && p <= p_max) {
        return Err(Error::Contract(format!(
            "probability {p} outside [0, {p_max}]"
        )));
    }
    Ok(accept_fraction(stream, p / p_max))
}

/// Acceptance against a pre-divided fraction `p / p_max`. Comparing the
/// unit draw against the fraction keeps `p == p_max` certain and `p == 0`
/// impossible.
#[inline]
pub(crate) fn accept_fraction(stream: &mut RandomStream, fraction: f64) -> bool {
    stream.next_unit() < fraction
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(exp: usize) -> RandomStream {
        derive_stream(42, StreamDomain::Collapse, 0, exp)
    }

    #[test]
    fn derivation_is_deterministic() {
        let a: Vec<u64> = {
            let mut s = stream(0);
            (0..100).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = stream(0);
            (0..100).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn seed_and_label_sensitivity() {
        let draw = |seed, domain, angle, exp| {
            let mut s = derive_stream(seed, domain, angle, exp);
            (0..100).map(|_| s.next_u64()).collect::<Vec<_>>()
        };
        let base = draw(42, StreamDomain::Collapse, 0, 0);
        assert_ne!(base, draw(43, StreamDomain::Collapse, 0, 0));
        assert_ne!(base, draw(42, StreamDomain::Collapse, 0, 1));
        assert_ne!(base, draw(42, StreamDomain::Collapse, 1, 0));
        assert_ne!(base, draw(42, StreamDomain::Smeared, 0, 0));
    }

    #[test]
    fn stream_ids_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for domain in [
            StreamDomain::Collapse,
            StreamDomain::LocalRealistic,
            StreamDomain::Smeared,
            StreamDomain::Bootstrap,
        ] {
            for angle_index in 0..9 {
                for experiment_index in 0..50 {
                    let label = StreamLabel {
                        domain,
                        angle_index,
                        experiment_index,
                    };
                    assert!(seen.insert(label.stream_id()));
                }
            }
        }
    }

    #[test]
    fn uniform_angle_range_and_moments() {
        let mut s = stream(3);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let a = uniform_angle(&mut s);
            assert!((-PI / 2.0..PI / 2.0).contains(&a));
            sum += a;
            sum_sq += a * a;
        }
        let n = n as f64;
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        let true_var = PI * PI / 12.0;
        // se of mean: sqrt(var / n); se of variance for uniform: sqrt((mu4 - var^2) / n)
        // with mu4 = (pi/2)^4 / 5.
        let mu4 = (PI / 2.0).powi(4) / 5.0;
        assert!(mean.abs() < 5.0 * (true_var / n).sqrt());
        assert!((var - true_var).abs() < 5.0 * ((mu4 - true_var * true_var) / n).sqrt());
    }

    #[test]
    fn uniform_angle_upper_edge_is_open() {
        let top = 1.0 - f64::EPSILON / 2.0;
        assert!((top - 0.5) * PI < PI / 2.0);
    }

    #[test]
    fn gaussian_zero_sigma_returns_mean() {
        let mut s = stream(4);
        let mut t = stream(4);
        assert_eq!(gaussian_angle(&mut s, 0.7, 0.0), 0.7);
        // Nothing was consumed.
        assert_eq!(s.next_u64(), t.next_u64());
    }

    #[test]
    fn gaussian_cos2_mean_matches_characteristic_function() {
        let mut s = stream(5);
        let sigma = 0.2131;
        let n = 1_000_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let c = (2.0 * gaussian_angle(&mut s, 0.0, sigma)).cos();
            sum += c;
            sum_sq += c * c;
        }
        let n = n as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean) / n).sqrt();
        let expected = (-2.0 * sigma * sigma).exp();
        assert!((expected - 0.9132).abs() < 5e-5);
        assert!((mean - expected).abs() < 5.0 * se);
    }

    #[test]
    fn gaussian_unit_variance() {
        let mut s = stream(6);
        let n = 1_000_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = gaussian_angle(&mut s, 0.0, 1.0);
            sum += x;
            sum_sq += x * x;
        }
        let n = n as f64;
        let mean = sum / n;
        let var = sum_sq / n - mean * mean;
        // Var of the sample variance for a normal: 2 sigma^4 / n.
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn accept_extremes_and_contract() {
        let mut s = stream(7);
        for _ in 0..10_000 {
            assert!(accept(&mut s, 0.97, 0.97).unwrap());
            assert!(!accept(&mut s, 0.0, 0.97).unwrap());
            assert!(accept(&mut s, 0.5, 0.5).unwrap());
        }
        assert!(matches!(accept(&mut s, 0.98, 0.97), Err(Error::Contract(_))));
        assert!(accept(&mut s, 0.1, 0.0).is_err());
        assert!(accept(&mut s, -0.1, 0.5).is_err());
    }

    #[test]
    fn accept_fraction_binomial() {
        let check = |p: f64, p_max: f64, seed_exp: usize| {
            let mut s = stream(seed_exp);
            let n = 1_000_000;
            let hits = (0..n).filter(|_| accept(&mut s, p, p_max).unwrap()).count();
            let frac = hits as f64 / n as f64;
            let target = p / p_max;
            let se = (target * (1.0 - target) / n as f64).sqrt();
            assert!((frac - target).abs() < 5.0 * se, "p={p} frac={frac}");
        };
        check(0.504, 0.97, 8);
        assert!((0.504f64 / 0.97 - 0.51959).abs() < 1e-5);
        for (i, p) in [0.038, 0.504, 0.97].into_iter().enumerate() {
            check(p, 1.0, 9 + i);
        }
    }
}

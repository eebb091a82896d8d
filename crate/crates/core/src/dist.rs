//! Seeded random variates for inter-arrival, service and inter-decision times.
//!
//! Every process draws from its own [`SeededStream`]: a ChaCha8 generator keyed
//! by the run seed with the ChaCha stream counter set to `stream_id`. Streams
//! sharing a seed but differing in `stream_id` are independent keystreams, so
//! the arrival, service and decision processes never share randomness.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AudError, Result};

/// Stream used for inter-arrival times.
pub const ARRIVAL_STREAM: u64 = 0;
/// Stream used for service times.
pub const SERVICE_STREAM: u64 = 1;
/// Base of the stream ids used for decision processes, see [`decision_stream_id`].
pub const DECISION_STREAM_BASE: u64 = 1 << 32;

/// Stream id of the decision process at rate `nu`.
///
/// Keyed by the bit pattern of the rate rather than its position in a list,
/// so repeating a rate reproduces the exact same decision epochs.
pub fn decision_stream_id(nu: f64) -> u64 {
    DECISION_STREAM_BASE ^ splitmix64(nu.to_bits())
}

/// SplitMix64 finalizer. Used to derive per-task seeds and stream ids.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Description of an inter-event time distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        let spec = DistributionSpec::Exponential { rate };
        spec.validate()?;
        Ok(spec)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        let spec = DistributionSpec::Deterministic { value };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let spec = DistributionSpec::Uniform { lo, hi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DistributionSpec::Exponential { rate } => rate.is_finite() && rate > 0.0,
            DistributionSpec::Deterministic { value } => value.is_finite() && value > 0.0,
            DistributionSpec::Uniform { lo, hi } => {
                lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AudError::InvalidParameter(format!("{self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::Deterministic { value } => value,
            DistributionSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, DistributionSpec::Exponential { .. })
    }

    /// Draws one variate from `stream`.
    pub fn sample(&self, stream: &mut SeededStream) -> Result<f64> {
        self.validate()?;
        Ok(self.sample_valid(stream))
    }

    /// Like [`sample`](Self::sample) for a spec that already passed `validate`.
    pub(crate) fn sample_valid(&self, stream: &mut SeededStream) -> f64 {
        match *self {
            DistributionSpec::Exponential { rate } => {
                exponential_from_uniform(rate, stream.open_unit())
            }
            DistributionSpec::Deterministic { value } => value,
            DistributionSpec::Uniform { lo, hi } => {
                // lo may be 0; the open unit interval keeps the draw positive.
                lo + (hi - lo) * stream.open_unit()
            }
        }
    }
}

/// Draws one variate; free-function form of [`DistributionSpec::sample`].
pub fn sample(spec: &DistributionSpec, stream: &mut SeededStream) -> Result<f64> {
    spec.sample(stream)
}

/// Inverse-CDF transform of an Exponential(rate): `-ln(u) / rate`, `u` in (0, 1).
pub fn exponential_from_uniform(rate: f64, u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    -u.ln() / rate
}

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct SeededStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        SeededStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    ///
    /// The grid `k * 2^-53` never reaches 1; the zero value is rejected.
    pub fn open_unit(&mut self) -> f64 {
        loop {
            let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::model::MemorySize;

use super::{FunctionKind, SimFunctionSpec};

/// Memory beyond which a single-threaded function gets no more CPU.
pub const CPU_SATURATION_MB: u32 = 1792;

/// Mix a parent seed with a stream index (splitmix64 finalizer), so that
/// derived streams are independent of evaluation order.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded random stream for the simulator.
#[derive(Clone, Debug)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream number `index`.
    pub fn fork(&self, index: u64) -> SimRng {
        SimRng::new(derive_seed(self.seed, index))
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

/// Warm duration before jitter: compute work scales inversely with memory
/// up to CPU saturation; BaaS-bound functions wait a fixed time.
pub fn base_duration(spec: &SimFunctionSpec, memory: MemorySize) -> f64 {
    match spec.kind {
        FunctionKind::Compute => spec.work / f64::from(memory.megabytes().min(CPU_SATURATION_MB)),
        FunctionKind::BaasBound => spec.baas_latency_s.unwrap_or(0.0),
    }
}

/// One simulated execution: base duration times mean-one lognormal jitter,
/// plus the cold-start penalty with probability `cold_start_prob`.
pub fn sim_duration(spec: &SimFunctionSpec, memory: MemorySize, rng: &mut SimRng) -> (f64, bool) {
    let mut duration = base_duration(spec, memory);
    if spec.jitter_cv > 0.0 {
        let sigma2 = (1.0 + spec.jitter_cv * spec.jitter_cv).ln();
        let jitter = LogNormal::new(-sigma2 / 2.0, sigma2.sqrt()).expect("finite parameters");
        duration *= jitter.sample(rng.inner());
    }
    let cold = spec.cold_start_prob > 0.0 && rng.inner().random_bool(spec.cold_start_prob.min(1.0));
    if cold {
        duration += spec.cold_start_s;
    }
    (duration, cold)
}

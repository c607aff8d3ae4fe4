//! Seeded generation of aggregated binomial trial outcomes.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use sha2::{Digest, Sha256};

use crate::curve::Curve;
use crate::design::TrialDesign;
use crate::error::{domain, Result};

/// Outcome of one arm: `cures` successes among `n` patients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmOutcome {
    pub duration: f64,
    pub n: u32,
    pub cures: u32,
}

impl ArmOutcome {
    pub fn proportion(&self) -> f64 {
        f64::from(self.cures) / f64::from(self.n)
    }
}

/// Per-arm counts from one simulated trial, ordered by duration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    rows: Vec<ArmOutcome>,
}

impl TrialData {
    pub fn new(rows: Vec<ArmOutcome>) -> Result<Self> {
        if rows.is_empty() {
            return Err(domain("trial data has no arms"));
        }
        for r in &rows {
            if r.n == 0 || r.cures > r.n || !r.duration.is_finite() {
                return Err(domain(format!("invalid arm outcome {r:?}")));
            }
        }
        if !rows.windows(2).all(|w| w[0].duration < w[1].duration) {
            return Err(domain("arm durations must be strictly ascending"));
        }
        Ok(Self { rows })
    }

    /// Builds data from `(duration, n, cures)` triples.
    pub fn from_triples(triples: &[(f64, u32, u32)]) -> Result<Self> {
        Self::new(
            triples
                .iter()
                .map(|&(duration, n, cures)| ArmOutcome { duration, n, cures })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[ArmOutcome] {
        &self.rows
    }

    pub fn n_arms(&self) -> usize {
        self.rows.len()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.duration).collect()
    }

    pub fn total_n(&self) -> u64 {
        self.rows.iter().map(|r| u64::from(r.n)).sum()
    }

    pub fn total_cures(&self) -> u64 {
        self.rows.iter().map(|r| u64::from(r.cures)).sum()
    }
}

/// Deterministic random stream for one replicate.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

/// Derives the stream for a replicate by hashing its identifying tuple, so
/// draws do not depend on execution order or thread scheduling.
pub fn derive_stream(
    master_seed: u64,
    scenario_id: u8,
    design_label: &str,
    sim_index: u64,
) -> RngStream {
    let mut h = Sha256::new();
    h.update(b"duration-curve/stream/v1");
    h.update(master_seed.to_le_bytes());
    h.update([scenario_id]);
    h.update((design_label.len() as u64).to_le_bytes());
    h.update(design_label.as_bytes());
    h.update(sim_index.to_le_bytes());
    let seed: [u8; 32] = h.finalize().into();
    RngStream {
        rng: ChaCha12Rng::from_seed(seed),
    }
}

/// Draws `cures ~ Binomial(n_i, f(D_i))` arm by arm in ascending duration.
pub fn simulate_trial<C: Curve>(
    design: &TrialDesign,
    truth: &C,
    stream: &mut RngStream,
) -> Result<TrialData> {
    let rows = design
        .arms()
        .iter()
        .zip(design.allocation())
        .map(|(&duration, &n)| {
            let p = truth.probability(duration);
            let dist = Binomial::new(u64::from(n), p)
                .map_err(|e| domain(format!("binomial({n}, {p}): {e}")))?;
            let cures = dist.sample(stream.rng()) as u32;
            Ok(ArmOutcome { duration, n, cures })
        })
        .collect::<Result<Vec<_>>>()?;
    TrialData::new(rows)
}

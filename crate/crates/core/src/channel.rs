//! Idealized BB84 photon channel.
//!
//! Photons are classical records of `(bit, basis)` with a consumed flag. Measuring
//! in the emission basis reproduces the bit; measuring in the conjugate basis
//! yields a fresh fair coin. This is exact for single prepared BB84 states, so no
//! state vectors are involved.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("photon was already measured")]
    AlreadyMeasured,
}

/// Polarization basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Horizontal / vertical polarization.
    Rectilinear,
    /// The two 45-degree polarizations.
    Diagonal,
}

impl Basis {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }

    pub fn bit(self) -> bool {
        matches!(self, Basis::Diagonal)
    }

    pub fn conjugate(self) -> Self {
        Self::from_bit(!self.bit())
    }

    pub fn random(rng: &mut RandomSource) -> Self {
        Self::from_bit(rng.random_bit())
    }
}

/// A single polarized photon in transit.
#[derive(Debug, PartialEq, Eq)]
pub struct Photon {
    bit: bool,
    basis: Basis,
    consumed: bool,
}

impl Photon {
    pub fn bit(&self) -> bool {
        self.bit
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// Prepares the photon carrying `bit` in `basis`.
pub fn encode(bit: bool, basis: Basis) -> Photon {
    Photon {
        bit,
        basis,
        consumed: false,
    }
}

/// Measures `photon` in `basis`, consuming it.
///
/// A matching basis returns the encoded bit. A conjugate basis returns a fair coin
/// drawn from `rng`. Measuring the same photon twice is simulator misuse.
pub fn measure(photon: &mut Photon, basis: Basis, rng: &mut RandomSource) -> Result<bool, ChannelError> {
    if photon.consumed {
        return Err(ChannelError::AlreadyMeasured);
    }
    photon.consumed = true;
    if basis == photon.basis {
        Ok(photon.bit)
    } else {
        Ok(rng.random_bit())
    }
}

/// Transmission line with an optional per-photon bit-flip probability.
///
/// The flip hook defaults to zero; none of the security experiments enable it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub flip_probability: f64,
}

impl Channel {
    pub const NOISELESS: Channel = Channel {
        flip_probability: 0.0,
    };

    pub fn transmit(&self, mut photon: Photon, rng: &mut RandomSource) -> Photon {
        if self.flip_probability > 0.0 && rng.bernoulli(self.flip_probability) {
            photon.bit = !photon.bit;
        }
        photon
    }
}

/// Deterministic counter-based random stream.
///
/// Backed by ChaCha12 keyed by the experiment seed; each named sub-stream (and each
/// trial index) selects a distinct ChaCha stream id, so streams never share state
/// and trials can be generated in any order.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream_id(seed, 0)
    }

    /// A named sub-stream of `seed`.
    pub fn stream(seed: u64, name: &str) -> Self {
        Self::with_stream_id(seed, fnv1a(name.as_bytes()))
    }

    /// The named sub-stream for one trial of an experiment.
    pub fn for_trial(seed: u64, name: &str, trial: u64) -> Self {
        Self::with_stream_id(seed, splitmix64(fnv1a(name.as_bytes()) ^ splitmix64(trial)))
    }

    fn with_stream_id(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Fair coin.
    pub fn random_bit(&mut self) -> bool {
        self.rng.next_u32() & 1 == 1
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }
}

impl RngCore for RandomSource {
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

/// Fair coin drawn from `rng`.
pub fn random_bit(rng: &mut RandomSource) -> bool {
    rng.random_bit()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Binomial, DiscreteCDF};

    fn two_sided_binomial_p(successes: u64, trials: u64) -> f64 {
        let dist = Binomial::new(0.5, trials).unwrap();
        let lower = dist.cdf(successes);
        let upper = if successes == 0 { 1.0 } else { dist.sf(successes - 1) };
        (2.0 * lower.min(upper)).min(1.0)
    }

    #[test]
    fn fair_coin_frequency() {
        let mut rng = RandomSource::new(7);
        let ones = (0..100_000).filter(|_| random_bit(&mut rng)).count();
        let mean = ones as f64 / 100_000.0;
        assert!((0.49..=0.51).contains(&mean), "mean {mean}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RandomSource::stream(99, "alice");
        let mut b = RandomSource::stream(99, "alice");
        let xs: Vec<bool> = (0..256).map(|_| a.random_bit()).collect();
        let ys: Vec<bool> = (0..256).map(|_| b.random_bit()).collect();
        assert_eq!(xs, ys);
        assert_eq!(a.position(), b.position());
    }

    #[test]
    fn named_streams_differ() {
        let mut a = RandomSource::stream(99, "alice");
        let mut b = RandomSource::stream(99, "bob");
        let xs: Vec<bool> = (0..64).map(|_| a.random_bit()).collect();
        let ys: Vec<bool> = (0..64).map(|_| b.random_bit()).collect();
        assert_ne!(xs, ys);

        let mut t0 = RandomSource::for_trial(99, "alice", 0);
        let mut t1 = RandomSource::for_trial(99, "alice", 1);
        assert_ne!(t0.next_u64(), t1.next_u64());
    }

    #[test]
    fn encode_is_a_constructor() {
        let p = encode(false, Basis::Rectilinear);
        assert!(!p.bit());
        assert_eq!(p.basis(), Basis::Rectilinear);
        let p = encode(true, Basis::Diagonal);
        assert!(p.bit());
        assert_eq!(p.basis(), Basis::Diagonal);
        assert!(!p.is_consumed());
    }

    #[test]
    fn matching_basis_is_deterministic() {
        let mut rng = RandomSource::new(1);
        for bit in [false, true] {
            for basis in [Basis::Rectilinear, Basis::Diagonal] {
                for _ in 0..100 {
                    let mut photon = encode(bit, basis);
                    assert_eq!(measure(&mut photon, basis, &mut rng), Ok(bit));
                }
            }
        }
    }

    #[test]
    fn conjugate_basis_is_uncorrelated() {
        let mut rng = RandomSource::new(2);
        let trials = 100_000u64;
        let ones = (0..trials)
            .filter(|_| {
                let mut photon = encode(false, Basis::Rectilinear);
                measure(&mut photon, Basis::Diagonal, &mut rng).unwrap()
            })
            .count() as u64;
        let rate = ones as f64 / trials as f64;
        assert!((0.49..=0.51).contains(&rate), "rate {rate}");
        assert!(two_sided_binomial_p(ones, trials) > 0.001);
    }

    #[test]
    fn double_measurement_is_an_error() {
        let mut rng = RandomSource::new(3);
        let mut photon = encode(true, Basis::Diagonal);
        assert!(measure(&mut photon, Basis::Diagonal, &mut rng).is_ok());
        assert!(photon.is_consumed());
        assert_eq!(
            measure(&mut photon, Basis::Diagonal, &mut rng),
            Err(ChannelError::AlreadyMeasured)
        );
    }

    #[test]
    fn noiseless_channel_passes_photons_through() {
        let mut rng = RandomSource::new(4);
        let photon = Channel::NOISELESS.transmit(encode(true, Basis::Rectilinear), &mut rng);
        assert!(photon.bit());
        let flipped = Channel { flip_probability: 1.0 }.transmit(encode(true, Basis::Rectilinear), &mut rng);
        assert!(!flipped.bit());
    }
}

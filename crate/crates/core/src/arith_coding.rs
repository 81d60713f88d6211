//! Binary arithmetic coding driven by a strategy's sequential predictive distributions.
//!
//! Integer coder with 62-bit registers and carry-free pending-bit handling. Each
//! predictive is quantized to frequencies summing to `2^32`, every symbol at least 1.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::mixtures::Strategy;

const PRECISION: u32 = 62;
const TOP: u64 = (1 << PRECISION) - 1;
const HALF: u64 = 1 << (PRECISION - 1);
const QUARTER: u64 = 1 << (PRECISION - 2);
/// Quantized frequencies sum to this.
pub const TOTAL: u64 = 1 << 32;

/// Integer frequencies for a probability vector: `⌊p (TOTAL - k)⌋ + 1` each, with the
/// remainder given to the most probable symbol (first on ties).
pub fn quantize(probs: &[f64]) -> Result<Vec<u64>> {
    let k = probs.len() as u64;
    if k == 0 || k > TOTAL / 2 {
        return Err(Error::Alphabet(format!("cannot code an alphabet of {k} symbols")));
    }
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) || !(sum > 0.0) {
        return Err(Error::Numerical { context: "quantize".into(), detail: format!("unnormalizable predictive {probs:?}") });
    }
    let scale = (TOTAL - k) as f64;
    let mut freq: Vec<u64> = probs.iter().map(|p| ((p / sum * scale) as u64).min(TOTAL - k) + 1).collect();
    let used: u64 = freq.iter().sum();
    if used > TOTAL {
        return Err(Error::Numerical { context: "quantize".into(), detail: "frequencies overflow".into() });
    }
    let mut top = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[top] {
            top = i;
        }
    }
    freq[top] += TOTAL - used;
    Ok(freq)
}

/// Payload bits, MSB first, zero-padded to whole bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitStream {
    pub bytes: Vec<u8>,
    /// Meaningful bits before padding.
    pub bit_len: u64,
}

struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("byte pushed above") |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }
}

struct Encoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitWriter,
}

impl Encoder {
    fn new() -> Self {
        Encoder { low: 0, high: TOP, pending: 0, out: BitWriter { bytes: Vec::new(), len: 0 } }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    fn encode(&mut self, cum_lo: u64, cum_hi: u64) {
        let range = (self.high - self.low + 1) as u128;
        self.high = self.low + ((range * cum_hi as u128) / TOTAL as u128) as u64 - 1;
        self.low += ((range * cum_lo as u128) / TOTAL as u128) as u64;
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    fn finish(mut self) -> BitStream {
        self.pending += 1;
        let bit = self.low >= QUARTER;
        self.emit(bit);
        BitStream { bytes: self.out.bytes, bit_len: self.out.len }
    }
}

fn cumulative(freq: &[u64]) -> Vec<u64> {
    let mut cum = vec![0u64; freq.len() + 1];
    for (i, f) in freq.iter().enumerate() {
        cum[i + 1] = cum[i] + f;
    }
    cum
}

fn symbols_of(strategy: &Strategy, xs: &[f64]) -> Result<Vec<usize>> {
    let k = strategy.family().alphabet_size().ok_or_else(|| Error::Unsupported("coding needs a finite alphabet".into()))?;
    xs.iter()
        .map(|x| {
            if *x >= 0.0 && x.fract() == 0.0 && (*x as usize) < k {
                Ok(*x as usize)
            } else {
                Err(Error::Alphabet(format!("{x} is not one of 0..{k}")))
            }
        })
        .collect()
}

/// Encode symbol indices.
pub fn encode_symbols(strategy: &Strategy, symbols: &[usize]) -> Result<BitStream> {
    let k = strategy.family().alphabet_size().ok_or_else(|| Error::Unsupported("coding needs a finite alphabet".into()))?;
    let mut counts = vec![0u64; k];
    let mut enc = Encoder::new();
    for &s in symbols {
        if s >= k {
            return Err(Error::Alphabet(format!("{s} is not one of 0..{k}")));
        }
        let cum = cumulative(&quantize(&strategy.predictive_counts(&counts)?.probs)?);
        enc.encode(cum[s], cum[s + 1]);
        counts[s] += 1;
    }
    Ok(enc.finish())
}

/// Encode a sequence of symbols given as numbers `0, 1, ..., k-1`.
pub fn encode(strategy: &Strategy, xs: &[f64]) -> Result<BitStream> {
    encode_symbols(strategy, &symbols_of(strategy, xs)?)
}

/// Window of the code value; `lo` assumes unread bits are 0, `hi` that they are 1.
struct Decoder<'a> {
    bytes: &'a [u8],
    pos: u64,
    low: u64,
    high: u64,
    lo: u64,
    hi: u64,
}

impl<'a> Decoder<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        let mut d = Decoder { bytes, pos: 0, low: 0, high: TOP, lo: 0, hi: 0 };
        for _ in 0..PRECISION {
            d.shift_in();
        }
        d
    }

    fn shift_in(&mut self) {
        let total = 8 * self.bytes.len() as u64;
        let (blo, bhi) = if self.pos < total {
            let b = (self.bytes[(self.pos / 8) as usize] >> (7 - self.pos % 8)) & 1 == 1;
            (b, b)
        } else {
            (false, true)
        };
        self.pos += 1;
        self.lo = ((self.lo << 1) & TOP) | blo as u64;
        self.hi = ((self.hi << 1) & TOP) | bhi as u64;
    }

    fn find(&self, cum: &[u64], value: u64) -> usize {
        let range = (self.high - self.low + 1) as u128;
        let offset = (value - self.low) as u128;
        // largest s with ⌊range·cum[s]/TOTAL⌋ ≤ offset
        let mut s = 0;
        while s + 2 < cum.len() && (range * cum[s + 1] as u128) / TOTAL as u128 <= offset {
            s += 1;
        }
        s
    }

    fn decode(&mut self, cum: &[u64], index: usize) -> Result<usize> {
        if self.lo < self.low || self.hi > self.high {
            return Err(Error::Truncated { index });
        }
        let s = self.find(cum, self.lo);
        if self.find(cum, self.hi) != s {
            return Err(Error::Truncated { index });
        }
        let range = (self.high - self.low + 1) as u128;
        self.high = self.low + ((range * cum[s + 1] as u128) / TOTAL as u128) as u64 - 1;
        self.low += ((range * cum[s] as u128) / TOTAL as u128) as u64;
        loop {
            let shift = if self.high < HALF {
                0
            } else if self.low >= HALF {
                HALF
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                QUARTER
            } else {
                break;
            };
            self.low -= shift;
            self.high -= shift;
            self.lo -= shift;
            self.hi -= shift;
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.shift_in();
        }
        Ok(s)
    }
}

/// Decode `n` symbol indices; bits past the end of `bytes` are never assumed.
pub fn decode(strategy: &Strategy, bytes: &[u8], n: u64) -> Result<Vec<usize>> {
    let k = strategy.family().alphabet_size().ok_or_else(|| Error::Unsupported("coding needs a finite alphabet".into()))?;
    let mut counts = vec![0u64; k];
    let mut dec = Decoder::new(bytes);
    let mut out = Vec::with_capacity(n as usize);
    for index in 0..n as usize {
        let cum = cumulative(&quantize(&strategy.predictive_counts(&counts)?.probs)?);
        let s = dec.decode(&cum, index)?;
        counts[s] += 1;
        out.push(s);
    }
    Ok(out)
}

/// Ideal codelength `-log₂ q(x^n)` in bits.
pub fn ideal_bits(strategy: &Strategy, xs: &[f64]) -> Result<f64> {
    let counts = strategy.counts_of(xs)?;
    Ok(-strategy.log_marginal_counts(&counts)? / core::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::{simplex_boundary_composite, SimplexBoundary, StrategySpec};
    use crate::model_families::{bernoulli_mean, multinomial_mean, ParamDomain};
    use crate::priors::PriorSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kt() -> Strategy {
        Strategy::build(&StrategySpec::bayes(PriorSpec::jeffreys(ParamDomain::simplex(1, 0.0))), &bernoulli_mean()).unwrap()
    }

    #[test]
    fn quantization_is_positive_and_exact() {
        let f = quantize(&[0.5, 0.5]).unwrap();
        assert_eq!(f.iter().sum::<u64>(), TOTAL);
        let f = quantize(&[1.0, 0.0, 1e-30]).unwrap();
        assert_eq!(f.iter().sum::<u64>(), TOTAL);
        assert!(f[1] >= 1 && f[2] >= 1);
        assert!(quantize(&[f64::NAN, 1.0]).is_err());
        assert!(quantize(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn kt_round_trips_and_lengths() {
        let s = kt();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p: f64 = rng.random();
            let xs: Vec<f64> = (0..256).map(|_| (rng.random::<f64>() < p) as u8 as f64).collect();
            let enc = encode(&s, &xs).unwrap();
            let dec = decode(&s, &enc.bytes, 256).unwrap();
            assert!(dec.iter().zip(&xs).all(|(a, b)| *a as f64 == *b));
            assert!(enc.bit_len as f64 <= ideal_bits(&s, &xs).unwrap().ceil() + 2.0);
        }
        let zeros = vec![0.0; 16];
        let enc = encode(&s, &zeros).unwrap();
        // Beta-integral closed form
        let exact = -(crate::mixtures::dirichlet_multinomial_log(&[16, 0], 0.5)) / core::f64::consts::LN_2;
        assert!((enc.bit_len as f64 - exact).abs() <= 3.0);
    }

    #[test]
    fn fair_coin_costs_n_bits() {
        let s = Strategy::build(&StrategySpec::Fixed { theta: vec![0.5] }, &bernoulli_mean()).unwrap();
        let xs: Vec<f64> = (0..100).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
        let enc = encode(&s, &xs).unwrap();
        assert!((100..=102).contains(&enc.bit_len), "{}", enc.bit_len);
    }

    #[test]
    fn other_strategies_round_trip() {
        let fam = multinomial_mean(3);
        let dir = Strategy::build(&StrategySpec::bayes(PriorSpec::dirichlet(0.25, ParamDomain::simplex(2, 0.0))), &fam).unwrap();
        let comp = simplex_boundary_composite(&bernoulli_mean(), &SimplexBoundary { alpha: 0.1, p: 0.4, r: 0.2, ..SimplexBoundary::new(64) })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let xs: Vec<f64> = (0..64).map(|_| rng.random_range(0..3) as f64).collect();
            let enc = encode(&dir, &xs).unwrap();
            assert_eq!(decode(&dir, &enc.bytes, 64).unwrap(), xs.iter().map(|x| *x as usize).collect::<Vec<_>>());
            let bits: Vec<f64> = xs.iter().map(|x| (*x > 1.0) as u8 as f64).collect();
            let enc = encode(&comp, &bits).unwrap();
            assert_eq!(decode(&comp, &enc.bytes, 64).unwrap(), bits.iter().map(|x| *x as usize).collect::<Vec<_>>());
        }
    }

    #[test]
    fn truncation_is_reported() {
        let s = kt();
        let xs: Vec<f64> = (0..400).map(|i| ((i * 13) % 5 < 2) as u8 as f64).collect();
        let enc = encode(&s, &xs).unwrap();
        let cut = &enc.bytes[..enc.bytes.len() / 2];
        match decode(&s, cut, 400) {
            Err(Error::Truncated { index }) => assert!(index > 0 && index < 400),
            other => panic!("expected truncation, got {other:?}"),
        }
        assert!(decode(&s, &[], 1).is_err());
    }
}

//! Philox4x32-10 counter-based generator.
//!
//! Every output block is a pure function of a 128-bit counter and a 64-bit
//! key, so any draw can be recomputed without replaying a sequence.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

#[inline]
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Uniform in `(0, 1]` from 64 random bits.
#[inline]
fn open_unit(hi: u32, lo: u32) -> f64 {
    let bits = ((u64::from(hi) << 32) | u64::from(lo)) >> 11;
    (bits as f64 + 1.0) * INV_2_53
}

/// Uniform in `(-1, 1)` from 64 random bits.
#[inline]
fn symmetric_unit(hi: u32, lo: u32) -> f64 {
    2.0 * open_unit(hi, lo) - 1.0
}

/// Two independent standard normals by the Marsaglia polar method.
///
/// `block(attempt)` must return fresh independent bits for every attempt;
/// the first attempt is accepted with probability `pi / 4`.
#[inline]
pub fn gaussian_pair(mut block: impl FnMut(u32) -> [u32; 4]) -> [f64; 2] {
    let mut attempt = 0;
    loop {
        let b = block(attempt);
        let x = symmetric_unit(b[0], b[1]);
        let y = symmetric_unit(b[2], b[3]);
        let s = x * x + y * y;
        if s < 1.0 && s > 0.0 {
            let f = (-2.0 * s.ln() / s).sqrt();
            return [x * f, y * f];
        }
        attempt += 1;
    }
}

/// Philox key for rejection attempt `attempt` of a polar draw.
#[inline]
pub fn attempt_key(key: [u32; 2], attempt: u32) -> [u32; 2] {
    [key[0], key[1] ^ attempt.wrapping_mul(0x9E37_79B9)]
}

/// Sequential stream over a fixed key and stream id, for auxiliary draws
/// (random test states, spot checks).
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: [u32; 2],
    stream: u64,
    position: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            stream,
            position: 0,
        }
    }

    fn counter(&mut self) -> [u32; 4] {
        let p = self.position;
        self.position += 1;
        [
            p as u32,
            (p >> 32) as u32,
            self.stream as u32,
            (self.stream >> 32) as u32,
        ]
    }

    fn next_block(&mut self) -> [u32; 4] {
        let c = self.counter();
        philox4x32(c, self.key)
    }

    /// Uniform in `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        let b = self.next_block();
        open_unit(b[0], b[1])
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let c = self.counter();
        let key = self.key;
        gaussian_pair(|a| philox4x32(c, attempt_key(key, a)))[0]
    }
}

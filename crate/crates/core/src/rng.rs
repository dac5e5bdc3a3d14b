//! Philox4x32-10 counter-based generator.
//!
//! Every output is a pure function of `(key, counter)`, so independent
//! streams are obtained by fixing the upper counter words to a stream id.
//! The simulation code keys streams by `(seed, month index)`, which lets any
//! month be generated independently of the others.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_ur, ln_gamma};

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// The raw Philox4x32 bijection with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
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

/// A sequential view over one Philox stream.
#[derive(Debug, Clone)]
pub struct PhiloxStream {
    key: [u32; 2],
    stream: u64,
    block: u64,
    buffer: [u32; 4],
    used: usize,
}

impl PhiloxStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            stream,
            block: 0,
            buffer: [0; 4],
            used: 4,
        }
    }

    fn refill(&mut self) {
        let counter = [
            self.block as u32,
            (self.block >> 32) as u32,
            self.stream as u32,
            (self.stream >> 32) as u32,
        ];
        self.buffer = philox4x32_10(counter, self.key);
        self.block = self.block.wrapping_add(1);
        self.used = 0;
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let v = self.buffer[self.used];
        self.used += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        lo | (hi << 32)
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion of the normal CDF.
    pub fn standard_normal(&mut self) -> f64 {
        let u = self.uniform();
        Normal::standard().inverse_cdf(u)
    }

    /// Uniform integer in `[0, n)` by inversion.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.uniform() * n as f64) as u64).min(n - 1)
    }

    /// Negative-binomial draw with the given mean and size `theta`
    /// (variance `mean + mean²/theta`), by inversion of the CDF.
    pub fn negative_binomial(&mut self, mean: f64, theta: f64) -> u64 {
        let u = self.uniform();
        negative_binomial_quantile(u, mean, theta)
    }

    /// Poisson draw by inversion of the CDF.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        let u = self.uniform();
        poisson_quantile(u, mean)
    }
}

/// Smallest `k` with `F(k) ≥ u`, found by walking from the mode. `cdf_at`
/// and `ln_pmf_at` evaluate the distribution directly; `ratio(k)` is
/// `p(k+1)/p(k)`.
fn discrete_quantile(
    u: f64,
    mode: u64,
    cdf_at: impl Fn(u64) -> f64,
    ln_pmf_at: impl Fn(u64) -> f64,
    ratio: impl Fn(u64) -> f64,
) -> u64 {
    let mut k = mode;
    let mut cdf = cdf_at(k);
    let mut pmf = ln_pmf_at(k).exp();
    if u <= cdf {
        // Step down while F(k−1) = F(k) − p(k) still covers u.
        while k > 0 && u <= cdf - pmf {
            cdf -= pmf;
            pmf /= ratio(k - 1);
            k -= 1;
        }
    } else {
        while u > cdf && pmf > 0.0 {
            pmf *= ratio(k);
            k += 1;
            cdf += pmf;
        }
    }
    k
}

/// Inverse CDF of the negative binomial with mean `mean` and size `theta`.
pub fn negative_binomial_quantile(u: f64, mean: f64, theta: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let p = theta / (theta + mean);
    let q = mean / (theta + mean);
    let mode = if theta > 1.0 { ((theta - 1.0) * q / p).floor() as u64 } else { 0 };
    discrete_quantile(
        u,
        mode,
        |k| beta_reg(theta, k as f64 + 1.0, p),
        |k| {
            let kf = k as f64;
            ln_gamma(kf + theta) - ln_gamma(theta) - ln_gamma(kf + 1.0) + theta * p.ln() + kf * q.ln()
        },
        |k| (k as f64 + theta) / (k as f64 + 1.0) * q,
    )
}

/// Inverse CDF of the Poisson distribution.
pub fn poisson_quantile(u: f64, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    discrete_quantile(
        u,
        mean.floor() as u64,
        |k| gamma_ur(k as f64 + 1.0, mean),
        |k| k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0),
        |k| mean / (k as f64 + 1.0),
    )
}

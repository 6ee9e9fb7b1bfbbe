//! Seeded random streams and the samplers used by the inference engines.
//!
//! Gamma variates use Marsaglia–Tsang for shape ≥ 1 and the boosting
//! identity `Gamma(a) = Gamma(a + 1) · U^(1/a)` below that. Dirichlet draws
//! normalize gamma variates in log space so that tiny shapes do not underflow.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mathfn::special::log_sum_exp;

/// A reproducible random stream.
///
/// Equal `(seed, stream)` pairs yield bitwise identical sequences. Parallel
/// workers should each take their own stream via [`Rng::with_stream`].
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` under the master `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `(0, 1]`, safe to take the log of.
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Log of a `Gamma(shape, 1)` variate.
fn ln_standard_gamma(shape: f64, rng: &mut Rng) -> f64 {
    if shape < 1.0 {
        return ln_standard_gamma(shape + 1.0, rng) + rng.uniform_pos().ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform_pos();
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return (d * v).ln();
        }
    }
}

/// Draw from `Gamma(shape, rate)`, density ∝ `rate^shape x^(shape−1) e^(−rate x)`.
///
/// Draws that underflow `f64` are returned as the smallest positive normal.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut Rng) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() || !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::domain(
            "sample_gamma",
            format!("shape = {shape}, rate = {rate}, need both positive"),
        ));
    }
    let x = (ln_standard_gamma(shape, rng) - rate.ln()).exp();
    Ok(x.max(f64::MIN_POSITIVE))
}

/// Draw a probability vector from `Dirichlet(alpha)`.
pub fn sample_dirichlet(alpha: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(Error::domain("sample_dirichlet", "empty parameter vector"));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::domain(
            "sample_dirichlet",
            format!("parameter {a} is not positive"),
        ));
    }
    if alpha.len() == 1 {
        return Ok(vec![1.0]);
    }
    let logs: Vec<f64> = alpha.iter().map(|&a| ln_standard_gamma(a, rng)).collect();
    let norm = log_sum_exp(&logs);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - norm).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Draw counts from `Multinomial(n, p)`; `p` must sum to one within 1e-9.
pub fn sample_multinomial(n: u64, p: &[f64], rng: &mut Rng) -> Result<Vec<u64>> {
    if p.is_empty() {
        return Err(Error::domain("sample_multinomial", "empty probability vector"));
    }
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::domain(
            "sample_multinomial",
            "probabilities must be finite and nonnegative",
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(
            "sample_multinomial",
            format!("probabilities sum to {total}"),
        ));
    }
    Ok(multinomial_counts(n, p, rng))
}

/// Conditional-binomial multinomial sampler. `p` is assumed valid.
pub(crate) fn multinomial_counts(n: u64, p: &[f64], rng: &mut Rng) -> Vec<u64> {
    let k = p.len();
    let mut counts = vec![0u64; k];
    // tail[i] = Σ_{i' ≥ i} p[i']
    let mut tail = vec![0.0; k + 1];
    for i in (0..k).rev() {
        tail[i] = tail[i + 1] + p[i];
    }
    let mut remaining = n;
    for i in 0..k {
        if remaining == 0 {
            break;
        }
        if p[i] == 0.0 {
            continue;
        }
        if tail[i + 1] == 0.0 {
            counts[i] = remaining;
            remaining = 0;
            break;
        }
        let q = (p[i] / tail[i]).clamp(0.0, 1.0);
        let draw = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q)
                .expect("binomial parameter in [0, 1]")
                .sample(rng)
        };
        counts[i] = draw;
        remaining -= draw;
    }
    debug_assert_eq!(remaining, 0);
    counts
}

/// Draw an index with probability proportional to `weights`.
pub fn sample_categorical(weights: &[f64], rng: &mut Rng) -> Result<usize> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain(
            "sample_categorical",
            "weights must be finite and nonnegative",
        ));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("sample_categorical", "all weights are zero"));
    }
    Ok(categorical_index(weights, total, rng))
}

/// Unchecked categorical draw given the precomputed positive `total`.
#[inline]
pub(crate) fn categorical_index(weights: &[f64], total: f64, rng: &mut Rng) -> usize {
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}

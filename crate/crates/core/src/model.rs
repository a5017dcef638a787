//! Synthetic spectrally sparse signals, sampling masks, additive noise, and the
//! recovery metric.
//!
//! A signal of order `r` on dims `(n_1, ..., n_d)` is
//! `x[t] = sum_k b_k prod_l exp((i 2 pi f_{l,k} - tau_{l,k}) t_l)`, stored
//! column-major with level 1 fastest.
//!
//! Randomness: every generator takes a `u64` seed and drives a `ChaCha8Rng`
//! from it. Multi-trial studies derive per-trial seeds with [`trial_seed`], which
//! hashes `(base, trial, stream)` so a trial's draws never depend on how many
//! other trials exist or in which order they run.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

type C = Complex64;

/// Independent random streams of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Signal = 0,
    Mask = 1,
    Noise = 2,
    Solver = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `stream` of trial `trial` under a study-wide `base` seed.
pub fn trial_seed(base: u64, trial: u64, stream: Stream) -> u64 {
    splitmix64(base ^ splitmix64(trial.wrapping_mul(4).wrapping_add(stream as u64)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `1/tau` ranges per level for damped signals; deeper levels reuse the last range.
pub const INVERSE_DAMPING_RANGES: [(f64, f64); 3] = [(8.0, 16.0), (16.0, 32.0), (64.0, 128.0)];

/// Ground-truth parameters: coefficient, frequency tuple and damping tuple per component.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralComponents {
    pub coefficients: Vec<C>,
    pub frequencies: Vec<Vec<f64>>,
    pub damping: Vec<Vec<f64>>,
}

impl SpectralComponents {
    pub fn new(coefficients: Vec<C>, frequencies: Vec<Vec<f64>>, damping: Vec<Vec<f64>>) -> Result<Self> {
        let r = coefficients.len();
        if r == 0 {
            return Err(Error::Parameter("model order must be at least 1".into()));
        }
        if frequencies.len() != r || damping.len() != r {
            return Err(Error::Parameter("one frequency and damping tuple per component".into()));
        }
        let d = frequencies[0].len();
        for (f, t) in frequencies.iter().zip(&damping) {
            if f.len() != d || t.len() != d {
                return Err(Error::Parameter("tuples must share one dimension".into()));
            }
            if f.iter().any(|v| !(0.0..1.0).contains(v)) {
                return Err(Error::Parameter("frequencies must lie in [0, 1)".into()));
            }
            if t.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Parameter("damping factors must be nonnegative".into()));
            }
        }
        Ok(SpectralComponents {
            coefficients,
            frequencies,
            damping,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Evaluates the superposition on `dims`.
    pub fn synthesize(&self, dims: &[usize]) -> Result<Vec<C>> {
        if dims.len() != self.frequencies[0].len() {
            return Err(Error::Dimension {
                what: "signal levels",
                expected: self.frequencies[0].len(),
                got: dims.len(),
            });
        }
        let total: usize = dims.iter().product();
        let mut x = vec![C::new(0.0, 0.0); total];
        for k in 0..self.order() {
            let axes: Vec<Vec<C>> = dims
                .iter()
                .enumerate()
                .map(|(l, &n)| {
                    let z = C::new(-self.damping[k][l], 2.0 * PI * self.frequencies[k][l]);
                    (0..n).map(|t| (z * t as f64).exp()).collect()
                })
                .collect();
            let mut idx = vec![0usize; dims.len()];
            for xt in x.iter_mut() {
                let mut term = self.coefficients[k];
                for (axis, &i) in axes.iter().zip(&idx) {
                    term *= axis[i];
                }
                *xt += term;
                for l in 0..dims.len() {
                    idx[l] += 1;
                    if idx[l] < dims[l] {
                        break;
                    }
                    idx[l] = 0;
                }
            }
        }
        Ok(x)
    }
}

/// Draws `r` components: uniform frequencies, uniform phases, magnitudes
/// `1 + 10^{0.5 c}` with `c ~ U[0, 1]`, and optional damping.
pub fn random_components<R: Rng>(levels: usize, r: usize, damped: bool, rng: &mut R) -> Result<SpectralComponents> {
    if r == 0 {
        return Err(Error::Parameter("model order must be at least 1".into()));
    }
    if levels == 0 {
        return Err(Error::Parameter("at least one signal level is required".into()));
    }
    let mut coefficients = Vec::with_capacity(r);
    let mut frequencies = Vec::with_capacity(r);
    let mut damping = Vec::with_capacity(r);
    for _ in 0..r {
        let f: Vec<f64> = (0..levels).map(|_| rng.random::<f64>()).collect();
        let phase = 2.0 * PI * rng.random::<f64>();
        let magnitude = 1.0 + 10f64.powf(0.5 * rng.random::<f64>());
        let tau: Vec<f64> = (0..levels)
            .map(|l| {
                if damped {
                    let (lo, hi) = INVERSE_DAMPING_RANGES[l.min(INVERSE_DAMPING_RANGES.len() - 1)];
                    1.0 / rng.random_range(lo..=hi)
                } else {
                    0.0
                }
            })
            .collect();
        coefficients.push(C::from_polar(magnitude, phase));
        frequencies.push(f);
        damping.push(tau);
    }
    SpectralComponents::new(coefficients, frequencies, damping)
}

/// Seeded synthetic signal on `dims` together with its ground-truth components.
pub fn generate_signal(dims: &[usize], r: usize, damped: bool, seed: u64) -> Result<(Vec<C>, SpectralComponents)> {
    let comps = random_components(dims.len(), r, damped, &mut rng_from_seed(seed))?;
    let x = comps.synthesize(dims)?;
    Ok((x, comps))
}

/// Observed index set `Omega`, sorted and unique.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleMask {
    indices: Vec<usize>,
    len: usize,
}

impl SampleMask {
    pub fn new(mut indices: Vec<usize>, len: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::Parameter("mask must observe at least one entry".into()));
        }
        if indices.last().is_some_and(|&i| i >= len) {
            return Err(Error::Parameter(format!("mask index out of range for length {len}")));
        }
        Ok(SampleMask { indices, len })
    }

    pub fn full(len: usize) -> Self {
        SampleMask {
            indices: (0..len).collect(),
            len,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Signal length `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn observed_count(&self) -> usize {
        self.indices.len()
    }

    /// `Sp = |Omega| / N`.
    pub fn ratio(&self) -> f64 {
        self.indices.len() as f64 / self.len as f64
    }

    /// Indicator vector of `Omega`.
    pub fn indicator(&self) -> Vec<bool> {
        let mut ind = vec![false; self.len];
        for &i in &self.indices {
            ind[i] = true;
        }
        ind
    }
}

/// `round(Sp * N)` (half up) indices drawn uniformly without replacement.
pub fn sample_uniform(len: usize, ratio: f64, seed: u64) -> Result<SampleMask> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Parameter(format!("sampling ratio {ratio} outside (0, 1]")));
    }
    let m = ((ratio * len as f64) + 0.5).floor() as usize;
    let m = m.min(len);
    if m == len {
        return Ok(SampleMask::full(len));
    }
    let picked = index::sample(&mut rng_from_seed(seed), len, m).into_vec();
    SampleMask::new(picked, len)
}

/// Partial observation `s` (zero off `Omega`) with its mask and noise level.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedData {
    pub samples: Vec<C>,
    pub mask: SampleMask,
    pub noise_level: f64,
}

impl ObservedData {
    /// Noiseless `P_Omega x`.
    pub fn observe(x: &[C], mask: SampleMask) -> Result<Self> {
        if x.len() != mask.len() {
            return Err(Error::Dimension {
                what: "observed signal",
                expected: mask.len(),
                got: x.len(),
            });
        }
        let mut samples = vec![C::new(0.0, 0.0); x.len()];
        for &i in mask.indices() {
            samples[i] = x[i];
        }
        Ok(ObservedData {
            samples,
            mask,
            noise_level: 0.0,
        })
    }

    /// From observed values listed in mask order.
    pub fn from_values(mask: SampleMask, values: &[C]) -> Result<Self> {
        if values.len() != mask.observed_count() {
            return Err(Error::Dimension {
                what: "observed values",
                expected: mask.observed_count(),
                got: values.len(),
            });
        }
        let mut samples = vec![C::new(0.0, 0.0); mask.len()];
        for (&i, &v) in mask.indices().iter().zip(values) {
            samples[i] = v;
        }
        Ok(ObservedData {
            samples,
            mask,
            noise_level: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn observed_norm(&self) -> f64 {
        self.mask
            .indices()
            .iter()
            .map(|&i| self.samples[i].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Adds `e = eta ||P_Omega s|| w / ||w||` with `w` standard complex Gaussian on `Omega`.
pub fn add_noise(data: &ObservedData, eta: f64, seed: u64) -> Result<ObservedData> {
    if !(eta >= 0.0) {
        return Err(Error::Parameter(format!("noise level {eta} must be nonnegative")));
    }
    let mut out = data.clone();
    out.noise_level = eta;
    if eta == 0.0 {
        return Ok(out);
    }
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let w: Vec<C> = data
        .mask
        .indices()
        .iter()
        .map(|_| C::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    let wn = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale = eta * data.observed_norm() / wn;
    for (&i, wi) in data.mask.indices().iter().zip(&w) {
        out.samples[i] += wi * scale;
    }
    Ok(out)
}

/// `||estimate - truth|| / ||truth||`.
pub fn nmse(estimate: &[C], truth: &[C]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Dimension {
            what: "nmse operands",
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let tn = truth.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if tn == 0.0 {
        return Err(Error::ZeroReference);
    }
    let dn = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(dn / tn)
}

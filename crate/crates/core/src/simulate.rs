//! Seeded recurrent-event generators: homogeneous and thinned non-homogeneous
//! Poisson processes, the four synthetic benchmark datasets, and a
//! treatment-trial generator with event-specific treatment effects.
//!
//! Every individual draws from its own ChaCha8 stream selected by
//! `(seed, index)`, so growing `n` never changes earlier individuals.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EventHistory, Individual};
use crate::error::{BoostError, Result};

/// Intensity of one individual as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IntensitySpec {
    Constant(f64),
    /// `scale * t^exponent`, `exponent > -1`.
    Power { scale: f64, exponent: f64 },
}

impl IntensitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant(r) if !(r >= 0.0 && r.is_finite()) => {
                Err(BoostError::invalid(format!("rate must be >= 0, got {r}")))
            }
            Self::Power { scale, exponent } if !(scale >= 0.0 && scale.is_finite() && exponent > -1.0) => Err(
                BoostError::invalid(format!("power intensity needs scale >= 0 and exponent > -1, got {scale}, {exponent}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Self::Constant(r) => r,
            Self::Power { scale, exponent } => scale * t.powf(exponent),
        }
    }

    /// `int_0^t rate`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match *self {
            Self::Constant(r) => r * t,
            Self::Power { scale, exponent } => scale * t.powf(exponent + 1.0) / (exponent + 1.0),
        }
    }
}

/// Generator for individual `index` under `seed`.
pub fn individual_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn sim_hpp<R: Rng + ?Sized>(rate: f64, censor: f64, rng: &mut R) -> Result<EventHistory> {
    IntensitySpec::Constant(rate).validate()?;
    let mut times = Vec::new();
    if rate > 0.0 {
        let exp = Exp::new(rate).map_err(|e| BoostError::invalid(e.to_string()))?;
        let mut t = 0.0;
        loop {
            t += exp.sample(rng);
            if t > censor {
                break;
            }
            times.push(t);
        }
    }
    EventHistory::new(times, censor)
}

/// Lewis-Shedler thinning of `rate` on `(start, end]` under the bound
/// `rate_max`, appending accepted times to `out`.
fn thin_into<R: Rng + ?Sized>(
    rate: &dyn Fn(f64) -> f64,
    rate_max: f64,
    start: f64,
    end: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Result<()> {
    if rate_max <= 0.0 {
        return Ok(());
    }
    let exp = Exp::new(rate_max).map_err(|e| BoostError::invalid(e.to_string()))?;
    let mut t = start;
    loop {
        t += exp.sample(rng);
        if t > end {
            return Ok(());
        }
        let r = rate(t);
        if r > rate_max * (1.0 + 1e-12) || r.is_nan() {
            return Err(BoostError::BoundViolation {
                time: t,
                value: r,
                bound: rate_max,
            });
        }
        if rng.random::<f64>() * rate_max < r {
            out.push(t);
        }
    }
}

/// Thinning with one global bound on `(0, censor]`.
pub fn sim_nhpp_thinning<R: Rng + ?Sized>(
    rate: &dyn Fn(f64) -> f64,
    rate_max: f64,
    censor: f64,
    rng: &mut R,
) -> Result<EventHistory> {
    if !(rate_max >= 0.0 && rate_max.is_finite()) {
        return Err(BoostError::invalid(format!("rate bound must be finite and >= 0, got {rate_max}")));
    }
    let mut times = Vec::new();
    thin_into(rate, rate_max, 0.0, censor, rng, &mut times)?;
    EventHistory::new(times, censor)
}

/// Dyadic pieces used for intensities that blow up at the origin.
const DYADIC_PIECES: i32 = 40;

/// Samples a process with the given intensity on `(0, censor]`.
///
/// Non-decreasing intensities are thinned under their value at `censor`.
/// Decreasing power laws are thinned piecewise on `(c 2^-j, c 2^-(j-1)]`
/// under each piece's left-end value, and the innermost piece `(0, c 2^-J]`
/// is sampled exactly by inverting its cumulative intensity.
pub fn sim_intensity<R: Rng + ?Sized>(spec: &IntensitySpec, censor: f64, rng: &mut R) -> Result<EventHistory> {
    spec.validate()?;
    match *spec {
        IntensitySpec::Constant(r) => sim_hpp(r, censor, rng),
        IntensitySpec::Power { exponent, .. } if exponent >= 0.0 => {
            sim_nhpp_thinning(&|t| spec.rate(t), spec.rate(censor), censor, rng)
        }
        IntensitySpec::Power { exponent, .. } => {
            let mut times = Vec::new();
            let eps = censor * 2f64.powi(-DYADIC_PIECES);
            let mass = spec.cumulative(eps);
            if mass > 0.0 {
                let k = Poisson::new(mass)
                    .map_err(|e| BoostError::invalid(e.to_string()))?
                    .sample(rng) as usize;
                let mut inner: Vec<f64> = (0..k)
                    .map(|_| eps * rng.random::<f64>().powf(1.0 / (exponent + 1.0)))
                    .collect();
                inner.sort_by(f64::total_cmp);
                times.extend(inner);
            }
            for j in (1..=DYADIC_PIECES).rev() {
                let lo = censor * 2f64.powi(-j);
                let hi = censor * 2f64.powi(-j + 1);
                thin_into(&|t| spec.rate(t), spec.rate(lo), lo, hi, rng, &mut times)?;
            }
            EventHistory::new(times, censor)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    A,
    B,
    C,
    D,
    Morvita,
}

impl std::str::FromStr for DatasetKind {
    type Err = BoostError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            "d" => Ok(Self::D),
            "morvita" => Ok(Self::Morvita),
            other => Err(BoostError::invalid(format!(
                "unknown dataset '{other}', expected one of A, B, C, D, morvita"
            ))),
        }
    }
}

impl DatasetKind {
    pub fn default_n(self) -> usize {
        match self {
            Self::A | Self::B => 200,
            Self::C | Self::D | Self::Morvita => 1000,
        }
    }

    /// Censoring time, or horizon, of every individual.
    pub fn horizon(self) -> f64 {
        match self {
            Self::A | Self::B | Self::D => 100.0,
            Self::C => 50.0,
            Self::Morvita => 120.0,
        }
    }

    pub fn p(self) -> usize {
        match self {
            Self::A | Self::C | Self::D => 2,
            Self::B => 10,
            Self::Morvita => 3,
        }
    }
}

/// Step rates of the two-feature benchmark: 0.01 when both features are at
/// most 0.5, 0.10 when both exceed it, 0.05 otherwise.
pub fn region_rate(x1: f64, x2: f64) -> f64 {
    match (x1 > 0.5, x2 > 0.5) {
        (false, false) => 0.01,
        (true, true) => 0.10,
        _ => 0.05,
    }
}

/// Scale of the `t^-0.5` intensity by distance from the square's centre.
pub fn ring_scale(x1: f64, x2: f64) -> f64 {
    let r = ((x1 - 0.5).powi(2) + (x2 - 0.5).powi(2)).sqrt();
    if r <= 0.2 {
        1.5
    } else if r <= 0.4 {
        1.0
    } else {
        0.5
    }
}

/// True intensity of a synthetic individual with features `x`. The trial has
/// event-dependent intensities and returns `None`.
pub fn true_intensity(kind: DatasetKind, x: &[f64]) -> Option<IntensitySpec> {
    match kind {
        DatasetKind::A | DatasetKind::B => Some(IntensitySpec::Constant(region_rate(x[0], x[1]))),
        DatasetKind::C => Some(IntensitySpec::Power {
            scale: ring_scale(x[0], x[1]),
            exponent: -0.5,
        }),
        DatasetKind::D => Some(IntensitySpec::Power {
            scale: 0.01 * (0.5 * (x[0] - 0.5).powi(2) + 2.0 * (x[1] - 0.5).powi(2)).exp(),
            exponent: 0.5,
        }),
        DatasetKind::Morvita => None,
    }
}

pub fn true_mu(kind: DatasetKind, x: &[f64], t: f64) -> Option<f64> {
    true_intensity(kind, x).map(|s| s.cumulative(t))
}

/// Treatment trial: `log rate_k = beta0 + beta_k Z + v` for the `k`-th event,
/// with `beta_k = effect` for the first 1, 2, 3 or 4 events depending on the
/// subject's quadrant in `(x1, x2)`. Observation stops at `type2_events`
/// events or at `type1_censor`, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub beta0: f64,
    pub effect: f64,
    pub sigma: f64,
    pub treatment_prob: f64,
    pub type1_censor: f64,
    pub type2_events: usize,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            beta0: 0.025f64.ln(),
            effect: -1.0,
            sigma: 0.0,
            treatment_prob: 0.5,
            type1_censor: 120.0,
            type2_events: 4,
        }
    }
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(BoostError::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.treatment_prob) {
            return Err(BoostError::invalid("treatment probability must be in [0, 1]"));
        }
        if !(self.type1_censor > 0.0) || self.type2_events == 0 {
            return Err(BoostError::invalid("censoring limits must be positive"));
        }
        Ok(())
    }

    /// Number of leading events the treatment acts on.
    pub fn effective_events(x1: f64, x2: f64) -> usize {
        match (x1 >= 0.5, x2 >= 0.5) {
            (false, false) => 1,
            (false, true) => 2,
            (true, false) => 3,
            (true, true) => 4,
        }
    }

    /// Rate of the `k`-th event (1-based).
    pub fn rate(&self, k: usize, x1: f64, x2: f64, treated: bool, v: f64) -> f64 {
        let beta_k = if treated && k <= Self::effective_events(x1, x2) {
            self.effect
        } else {
            0.0
        };
        (self.beta0 + beta_k + v).exp()
    }
}

fn uniform_features(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random::<f64>()).collect()
}

fn gen_synthetic(kind: DatasetKind, n: usize, seed: u64, m: usize) -> Result<Dataset> {
    let horizon = kind.horizon();
    let individuals = (0..n)
        .map(|i| {
            let mut rng = individual_rng(seed, i);
            let x = uniform_features(&mut rng, kind.p());
            let spec = true_intensity(kind, &x).expect("synthetic kinds have a closed-form intensity");
            let events = sim_intensity(&spec, horizon, &mut rng)?;
            Ok(Individual {
                id: format!("{}", i + 1),
                x,
                z: vec![],
                events,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(individuals, m)
}

pub fn gen_trial(n: usize, spec: &TrialSpec, seed: u64, m: usize) -> Result<Dataset> {
    spec.validate()?;
    let treat = Bernoulli::new(spec.treatment_prob).map_err(|e| BoostError::invalid(e.to_string()))?;
    let individuals = (0..n)
        .map(|i| {
            let mut rng = individual_rng(seed, i);
            let x1: f64 = rng.random();
            let x2: f64 = rng.random();
            let treated = treat.sample(&mut rng);
            let normal: f64 = StandardNormal.sample(&mut rng);
            let v = spec.sigma * normal;
            let mut times = Vec::new();
            let mut t = 0.0;
            let mut censor = spec.type1_censor;
            for k in 1..=spec.type2_events {
                let exp = Exp::new(spec.rate(k, x1, x2, treated, v)).map_err(|e| BoostError::invalid(e.to_string()))?;
                t += exp.sample(&mut rng);
                if t > spec.type1_censor {
                    break;
                }
                times.push(t);
                if k == spec.type2_events {
                    censor = t;
                }
            }
            Ok(Individual {
                id: format!("{}", i + 1),
                x: vec![x1, x2, if treated { 1.0 } else { 0.0 }],
                z: vec![],
                events: EventHistory::new(times, censor)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(individuals, m)
}

/// Generates one of the benchmark datasets. `sigma` only affects the trial.
pub fn gen_dataset(kind: DatasetKind, n: usize, seed: u64, m: usize, sigma: f64) -> Result<Dataset> {
    if n == 0 {
        return Err(BoostError::invalid("n must be at least 1"));
    }
    match kind {
        DatasetKind::Morvita => gen_trial(
            n,
            &TrialSpec {
                sigma,
                ..TrialSpec::default()
            },
            seed,
            m,
        ),
        _ => gen_synthetic(kind, n, seed, m),
    }
}

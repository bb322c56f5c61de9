use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::catalog::Variable;

use super::{Dataset, DatasetError, Features, Provenance, TrajectoryRecord};

/// Marginal moments and range of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

const fn m(mean: f64, std: f64, max: f64, min: f64) -> Moments {
    Moments { mean, std, min, max }
}

/// Marginal statistics of the fleet dataset, in catalog order (mean, std, max, min).
const FLEET_MOMENTS: [Moments; 10] = [
    m(0.13, 0.08, 0.27, 0.00),
    m(7.17, 0.59, 8.63, 6.12),
    m(0.38, 0.09, 0.49, 0.08),
    m(0.15, 0.18, 0.96, 0.00),
    m(0.05, 0.08, 0.58, 0.00),
    m(11.55, 2.61, 21.54, 3.19),
    m(6.52, 1.36, 11.97, 0.78),
    m(69.09, 7.20, 95.56, 40.83),
    m(12.63, 2.94, 33.52, 3.23),
    m(96.16, 7.32, 123.00, 71.00),
];

/// 74 risky trajectories out of 1791.
pub const FLEET_RISK_RATE: f64 = 74.0 / 1791.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub variables: BTreeMap<Variable, Moments>,
    pub risk_rate: f64,
    /// Mean shift of the risky class, in units of the variable's `std`.
    #[serde(default)]
    pub risk_shift: BTreeMap<Variable, f64>,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        Self {
            variables: Variable::ALL.iter().map(|&v| (v, FLEET_MOMENTS[v.index()])).collect(),
            risk_rate: FLEET_RISK_RATE,
            risk_shift: BTreeMap::new(),
        }
    }
}

impl SynthesisSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| DatasetError::InvalidSpec(vec![format!("malformed spec JSON: {e}")]))
    }

    pub fn moments(&self, v: Variable) -> Moments {
        self.variables[&v]
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut problems = Vec::new();
        for v in Variable::ALL {
            let Some(mo) = self.variables.get(&v) else {
                problems.push(format!("{v}: missing"));
                continue;
            };
            let values = [mo.mean, mo.std, mo.min, mo.max];
            if values.iter().any(|x| !x.is_finite()) {
                problems.push(format!("{v}: non-finite moment"));
                continue;
            }
            if mo.min > mo.mean || mo.mean > mo.max {
                problems.push(format!("{v}: mean {} outside [{}, {}]", mo.mean, mo.min, mo.max));
            }
            if mo.std < 0.0 {
                problems.push(format!("{v}: std {} is negative", mo.std));
            } else if mo.std > 0.0 && mo.std > ((mo.mean - mo.min) * (mo.max - mo.mean)).sqrt() {
                problems.push(format!(
                    "{v}: std {} unattainable for mean {} on [{}, {}]",
                    mo.std, mo.mean, mo.min, mo.max
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.risk_rate) {
            problems.push(format!("risk_rate {} outside [0, 1]", self.risk_rate));
        }
        for (v, s) in &self.risk_shift {
            if !s.is_finite() {
                problems.push(format!("{v}: non-finite risk_shift"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::InvalidSpec(problems))
        }
    }
}

/// Location/scale of the normal that, once clipped to `[min, max]`, reproduces
/// the target mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LatentNormal {
    pub mu: f64,
    pub sigma: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Mean and standard deviation of `clamp(Y, a, b)` for `Y ~ N(mu, sigma)`.
pub(crate) fn clipped_moments(mu: f64, sigma: f64, a: f64, b: f64) -> (f64, f64) {
    if sigma == 0.0 {
        return (mu.clamp(a, b), 0.0);
    }
    let (alpha, beta) = ((a - mu) / sigma, (b - mu) / sigma);
    let (ca, cb) = (std_normal_cdf(alpha), std_normal_cdf(beta));
    let (pa, pb) = (std_normal_pdf(alpha), std_normal_pdf(beta));
    let inner = cb - ca;
    let mean = a * ca + b * (1.0 - cb) + mu * inner + sigma * (pa - pb);
    let second = a * a * ca
        + b * b * (1.0 - cb)
        + (mu * mu + sigma * sigma) * inner
        + 2.0 * mu * sigma * (pa - pb)
        + sigma * sigma * (alpha * pa - beta * pb);
    (mean, (second - mean * mean).max(0.0).sqrt())
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f increasing; returns the root (or the nearest bracket end).
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub(crate) fn calibrate(mo: &Moments) -> LatentNormal {
    if mo.std == 0.0 || mo.max <= mo.min {
        return LatentNormal {
            mu: mo.mean,
            sigma: 0.0,
        };
    }
    let range = mo.max - mo.min;
    let mu_for = |sigma: f64| {
        bisect(mo.min - 50.0 * sigma, mo.max + 50.0 * sigma, |mu| {
            clipped_moments(mu, sigma, mo.min, mo.max).0 - mo.mean
        })
    };
    // The clipped std grows monotonically with sigma once the mean is pinned.
    let log_sigma = bisect((mo.std * 1e-3).ln(), (range * 1e3).ln(), |ls| {
        let sigma = ls.exp();
        clipped_moments(mu_for(sigma), sigma, mo.min, mo.max).1 - mo.std
    });
    let sigma = log_sigma.exp();
    LatentNormal {
        mu: mu_for(sigma),
        sigma,
    }
}

/// Draws `n` independent trips. Each variable follows a clipped normal
/// calibrated to the spec's moments; risky trips have the latent mean shifted
/// by `risk_shift * std`.
pub fn synthesize(spec: &SynthesisSpec, n: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if n == 0 {
        return Err(DatasetError::InvalidArgument("n must be at least 1".into()));
    }
    spec.validate()?;
    let latent: Vec<(LatentNormal, Moments, f64)> = Variable::ALL
        .iter()
        .map(|v| {
            let mo = spec.moments(*v);
            let shift = spec.risk_shift.get(v).copied().unwrap_or(0.0) * mo.std;
            (calibrate(&mo), mo, shift)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n.to_string().len().max(5);
    let records = (0..n)
        .map(|i| {
            let risky = rng.random_bool(spec.risk_rate);
            let mut features = Features::default();
            for (v, (ln, mo, shift)) in Variable::ALL.iter().zip(&latent) {
                let z: f64 = rng.sample(StandardNormal);
                let mu = if risky { ln.mu + shift } else { ln.mu };
                features[*v] = (mu + ln.sigma * z).clamp(mo.min, mo.max);
            }
            let avg = features[Variable::TrafficSpeedMean];
            if features[Variable::TrafficSpeedMax] < avg {
                features[Variable::TrafficSpeedMax] = avg;
            }
            TrajectoryRecord {
                trajectory_id: format!("syn-{i:0width$}"),
                vehicle_id: format!("veh-{:02}", i % 68),
                features,
                risk_label: u8::from(risky),
            }
        })
        .collect();
    Dataset::new(records, Provenance::Synthetic)
}

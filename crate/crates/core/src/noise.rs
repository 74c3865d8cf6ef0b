//! Local measurement-error rate laws, their assignment to time edges and
//! sampling of error configurations.
//!
//! Space (data-qubit) edges always use a single fixed rate; only the
//! time (measurement) edges carry locally drawn rates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DecodingGraph, EdgeKind};
use crate::syndrome::ErrorConfiguration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Constant,
    Bimodal,
    Uniform,
}

impl DistKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistKind::Constant => "constant",
            DistKind::Bimodal => "bimodal",
            DistKind::Uniform => "uniform",
        }
    }
}

/// Law from which local measurement-error rates are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateDistribution {
    Constant { p_mu: f64 },
    /// `p_mu (1 - sigma)` or `p_mu (1 + sigma)`, each with probability 1/2.
    Bimodal { p_mu: f64, sigma: f64 },
    /// Continuous uniform on `[a, b]`.
    Uniform { a: f64, b: f64 },
}

fn check_rate(name: &str, p: f64) -> Result<()> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::config(format!("{name} must lie in [0, 0.5), got {p}")));
    }
    Ok(())
}

impl RateDistribution {
    pub fn constant(p_mu: f64) -> Result<Self> {
        let d = RateDistribution::Constant { p_mu };
        d.validate()?;
        Ok(d)
    }

    pub fn bimodal(p_mu: f64, sigma: f64) -> Result<Self> {
        let d = RateDistribution::Bimodal { p_mu, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let d = RateDistribution::Uniform { a, b };
        d.validate()?;
        Ok(d)
    }

    /// Builds a distribution of the given kind from a mean and relative width.
    /// A uniform law spans `[p_mu (1 - sigma), p_mu (1 + sigma)]`.
    pub fn from_mean_width(kind: DistKind, p_mu: f64, sigma: f64) -> Result<Self> {
        match kind {
            DistKind::Constant => Self::constant(p_mu),
            DistKind::Bimodal => Self::bimodal(p_mu, sigma),
            DistKind::Uniform => {
                if !(0.0..1.0).contains(&sigma) {
                    return Err(Error::config(format!("sigma must lie in [0, 1), got {sigma}")));
                }
                Self::uniform(p_mu * (1.0 - sigma), p_mu * (1.0 + sigma))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RateDistribution::Constant { p_mu } => check_rate("p_mu", p_mu),
            RateDistribution::Bimodal { p_mu, sigma } => {
                check_rate("p_mu", p_mu)?;
                if !(0.0..1.0).contains(&sigma) {
                    return Err(Error::config(format!("sigma must lie in [0, 1), got {sigma}")));
                }
                check_rate("p_mu * (1 + sigma)", p_mu * (1.0 + sigma))
            }
            RateDistribution::Uniform { a, b } => {
                check_rate("a", a)?;
                check_rate("b", b)?;
                if a > b {
                    return Err(Error::config(format!("uniform law needs a <= b, got [{a}, {b}]")));
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> DistKind {
        match self {
            RateDistribution::Constant { .. } => DistKind::Constant,
            RateDistribution::Bimodal { .. } => DistKind::Bimodal,
            RateDistribution::Uniform { .. } => DistKind::Uniform,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RateDistribution::Constant { p_mu } | RateDistribution::Bimodal { p_mu, .. } => p_mu,
            RateDistribution::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    /// Relative width `sigma`; for a uniform law, the half-width over the mean.
    pub fn relative_width(&self) -> f64 {
        match *self {
            RateDistribution::Constant { .. } => 0.0,
            RateDistribution::Bimodal { sigma, .. } => sigma,
            RateDistribution::Uniform { a, b } => {
                if a + b == 0.0 {
                    0.0
                } else {
                    (b - a) / (a + b)
                }
            }
        }
    }

    /// `E[p^2]`.
    pub fn second_moment(&self) -> f64 {
        match *self {
            RateDistribution::Constant { p_mu } => p_mu * p_mu,
            RateDistribution::Bimodal { p_mu, sigma } => {
                let lo = p_mu * (1.0 - sigma);
                let hi = p_mu * (1.0 + sigma);
                0.5 * (lo * lo + hi * hi)
            }
            RateDistribution::Uniform { a, b } => (a * a + a * b + b * b) / 3.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RateDistribution::Constant { p_mu } => p_mu,
            RateDistribution::Bimodal { p_mu, sigma } => {
                if rng.gen::<bool>() {
                    p_mu * (1.0 + sigma)
                } else {
                    p_mu * (1.0 - sigma)
                }
            }
            RateDistribution::Uniform { a, b } => {
                if a == b {
                    a
                } else {
                    rng.gen_range(a..=b)
                }
            }
        }
    }
}

/// Draws one rate from `dist` after validating it.
pub fn sample_rate<R: Rng + ?Sized>(dist: &RateDistribution, rng: &mut R) -> Result<f64> {
    dist.validate()?;
    Ok(dist.sample(rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalMode {
    /// One rate per check, shared by all of its time edges.
    Static,
    /// An independent rate for every time edge.
    Dynamic,
}

impl TemporalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TemporalMode::Static => "static",
            TemporalMode::Dynamic => "dynamic",
        }
    }
}

/// Realised flip probability of every edge, indexed by edge id.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseAssignment {
    pub edge_rates: Vec<f64>,
    pub temporal: TemporalMode,
    /// Per-check rates for a static assignment.
    pub site_rates: Option<Vec<f64>>,
}

impl NoiseAssignment {
    pub fn rate(&self, e: usize) -> f64 {
        self.edge_rates[e]
    }

    pub fn len(&self) -> usize {
        self.edge_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_rates.is_empty()
    }
}

pub fn assign_rates<R: Rng + ?Sized>(
    graph: &DecodingGraph,
    meas_dist: &RateDistribution,
    p_space: f64,
    temporal: TemporalMode,
    rng: &mut R,
) -> Result<NoiseAssignment> {
    meas_dist.validate()?;
    check_rate("p_space", p_space)?;
    let site_rates: Option<Vec<f64>> = match temporal {
        TemporalMode::Static => Some((0..graph.sites()).map(|_| meas_dist.sample(rng)).collect()),
        TemporalMode::Dynamic => None,
    };
    let edge_rates = graph
        .edges()
        .iter()
        .map(|e| match e.kind {
            EdgeKind::Space => p_space,
            EdgeKind::Time => match &site_rates {
                Some(rates) => rates[e.location],
                None => meas_dist.sample(rng),
            },
        })
        .collect();
    Ok(NoiseAssignment {
        edge_rates,
        temporal,
        site_rates,
    })
}

/// Flips each edge independently with its realised probability.
pub fn sample_errors<R: Rng + ?Sized>(assignment: &NoiseAssignment, rng: &mut R) -> ErrorConfiguration {
    let flipped = assignment
        .edge_rates
        .iter()
        .enumerate()
        .filter_map(|(e, &p)| (rng.gen::<f64>() < p).then_some(e));
    ErrorConfiguration::from_sorted_unique(flipped.collect())
}

//! Virion loading of particles and the absorbed-dose infection measure.
//!
//! A particle of diameter `d` is a water sphere; at oral-fluid viral load `c`
//! (virions per milliliter) the expected virion count per particle is
//! `lambda(d) = c * (pi/6) d^3` with the volume converted to milliliters.
//! Loading is modeled as Poisson with that mean, so the probability a
//! particle is infectious (carries at least one virion) is `1 - exp(-lambda)`.
//!
//! The absorbed dose over `n` respiratory events sums
//! `p(d) * q(d) * eta(d) * N(d)` across diameter classes; a subject counts as
//! infected once the dose strictly exceeds a threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cubic meters to milliliters.
const M3_TO_ML: f64 = 1e6;

/// Virion concentration in oral fluid, in copies per milliliter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViralLoad {
    pub copies_per_ml: f64,
}

impl ViralLoad {
    pub fn new(copies_per_ml: f64) -> Result<Self> {
        if !copies_per_ml.is_finite() || copies_per_ml < 0.0 {
            return Err(Error::InvalidParam(format!(
                "viral load = {copies_per_ml}, must be >= 0"
            )));
        }
        Ok(Self { copies_per_ml })
    }
}

/// One diameter class of the dose sum: diameter range `[d_lo, d_hi]` in
/// meters, input probability `p`, transition probability `q`, particles
/// emitted per event `n_emitted`, and expected virions per particle `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeClass {
    pub d_lo: f64,
    pub d_hi: f64,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "N")]
    pub n_emitted: f64,
    pub eta: f64,
}

/// A table of diameter classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeClassProfile {
    pub classes: Vec<SizeClass>,
}

impl SizeClassProfile {
    pub fn new(classes: Vec<SizeClass>) -> Result<Self> {
        for (i, c) in classes.iter().enumerate() {
            if c.d_lo <= 0.0 || c.d_hi < c.d_lo || c.d_lo.is_nan() || c.d_hi.is_nan() {
                return Err(Error::InvalidParam(format!(
                    "class {i}: diameter range [{}, {}] invalid",
                    c.d_lo, c.d_hi
                )));
            }
            for (name, v) in [("p", c.p), ("q", c.q)] {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::InvalidParam(format!(
                        "class {i}: {name} = {v}, outside [0,1]"
                    )));
                }
            }
            if c.n_emitted < 0.0 || c.eta < 0.0 || !c.n_emitted.is_finite() || !c.eta.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "class {i}: counts must be >= 0"
                )));
            }
        }
        Ok(Self { classes })
    }

    /// Write the profile as CSV with columns `d_lo,d_hi,p,q,N,eta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d_lo,d_hi,p,q,N,eta\n");
        for c in &self.classes {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.d_lo, c.d_hi, c.p, c.q, c.n_emitted, c.eta
            ));
        }
        out
    }

    /// Parse a profile from the CSV written by [`Self::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let mut classes = Vec::new();
        for record in reader.deserialize() {
            let (d_lo, d_hi, p, q, n_emitted, eta): (f64, f64, f64, f64, f64, f64) = record?;
            classes.push(SizeClass {
                d_lo,
                d_hi,
                p,
                q,
                n_emitted,
                eta,
            });
        }
        Self::new(classes)
    }
}

/// Dose threshold: a subject is infected once the absorbed virion count
/// strictly exceeds `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfectionThreshold {
    pub theta: f64,
}

impl InfectionThreshold {
    pub fn new(theta: f64) -> Result<Self> {
        if theta <= 0.0 || !theta.is_finite() {
            return Err(Error::InvalidParam(format!(
                "infection threshold = {theta}, must be > 0"
            )));
        }
        Ok(Self { theta })
    }
}

/// Expected virion count in one particle of diameter `d` (meters):
/// `lambda(d) = load * (pi/6) d^3 * 1e6 mL/m^3`. Scales exactly as `d^3`.
pub fn expected_virions(d: f64, load: ViralLoad) -> f64 {
    let volume_m3 = std::f64::consts::FRAC_PI_6 * d.powi(3);
    load.copies_per_ml * volume_m3 * M3_TO_ML
}

/// Probability a particle of diameter `d` carries at least one virion under
/// Poisson loading: `1 - exp(-lambda(d))`.
pub fn virion_probability(d: f64, load: ViralLoad) -> f64 {
    -(-expected_virions(d, load)).exp_m1()
}

/// Expected absorbed virion count over `n` respiratory events:
/// `n * sum_d p(d) q(d) eta(d) N(d)`.
pub fn absorbed_dose(profile: &SizeClassProfile, n: u64) -> f64 {
    let per_event: f64 = profile
        .classes
        .iter()
        .map(|c| c.p * c.q * c.eta * c.n_emitted)
        .sum();
    n as f64 * per_event
}

/// Strict threshold rule: infected iff `phi > theta`.
pub fn is_infected(phi: f64, threshold: InfectionThreshold) -> bool {
    phi > threshold.theta
}

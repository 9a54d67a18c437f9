//! Stochastic cough generation: particle counts, diameters, initial speeds,
//! and emission directions.
//!
//! A cough releases a configured number of particles at a fixed speed. The
//! direction of each particle is the emitter's facing vector deflected twice:
//! once per cough by a head-rotation draw (horizontal and vertical Gaussians),
//! then per particle by the beam-spread Gaussians about the rotated axis.
//! Gaussian sampling happens in angle space, horizontal first.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::ParticleState;

/// One histogram bin of the emitted-diameter distribution, in meters.
/// Degenerate bins (`lo == hi`) pin the diameter exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterBin {
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}

/// Binned diameter distribution. Serialized as `[[d_lo, d_hi, weight], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64, f64)>", into = "Vec<(f64, f64, f64)>")]
pub struct DiameterDistribution {
    bins: Vec<DiameterBin>,
    cumulative: Vec<f64>,
}

impl DiameterDistribution {
    /// Bins must be non-empty, positive, ascending, non-overlapping, and
    /// carry non-negative weights summing to one within 1e-9.
    pub fn new(bins: Vec<DiameterBin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::InvalidConfig(
                "diameter distribution must have at least one bin".into(),
            ));
        }
        let mut total = 0.0;
        for (i, b) in bins.iter().enumerate() {
            if b.lo <= 0.0 || b.hi < b.lo || !b.lo.is_finite() || !b.hi.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "diameter bin {i}: range [{}, {}] invalid",
                    b.lo, b.hi
                )));
            }
            if i > 0 && b.lo < bins[i - 1].hi {
                return Err(Error::InvalidConfig(format!(
                    "diameter bin {i} overlaps or is out of order"
                )));
            }
            if b.weight < 0.0 || !b.weight.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "diameter bin {i}: weight {} invalid",
                    b.weight
                )));
            }
            total += b.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "diameter bin weights sum to {total}, expected 1"
            )));
        }
        let mut cumulative = Vec::with_capacity(bins.len());
        let mut acc = 0.0;
        for b in &bins {
            acc += b.weight;
            cumulative.push(acc);
        }
        Ok(Self { bins, cumulative })
    }

    /// Placeholder default: `n` log-spaced bins over `[d_min, d_max]` with
    /// equal weights. The real emitted-size spectrum is measurement-specific
    /// and should be supplied by the user; the equal-weight placeholder only
    /// fixes the bin structure.
    pub fn log_spaced_uniform(d_min: f64, d_max: f64, n: usize) -> Result<Self> {
        if d_min <= 0.0 || d_max <= d_min || d_min.is_nan() || d_max.is_nan() || n == 0 {
            return Err(Error::InvalidConfig(
                "log-spaced bins need 0 < d_min < d_max and n >= 1".into(),
            ));
        }
        let ratio = (d_max / d_min).powf(1.0 / n as f64);
        let w = 1.0 / n as f64;
        let bins = (0..n)
            .map(|i| DiameterBin {
                lo: d_min * ratio.powi(i as i32),
                hi: if i + 1 == n {
                    d_max
                } else {
                    d_min * ratio.powi(i as i32 + 1)
                },
                weight: w,
            })
            .collect();
        Self::new(bins)
    }

    /// Single degenerate bin: every particle has diameter `d`.
    pub fn fixed(d: f64) -> Result<Self> {
        Self::new(vec![DiameterBin {
            lo: d,
            hi: d,
            weight: 1.0,
        }])
    }

    pub fn bins(&self) -> &[DiameterBin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Index of the bin containing `d`, or the nearest bin if `d` falls in a
    /// gap or outside the covered range.
    pub fn bin_index(&self, d: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, b) in self.bins.iter().enumerate() {
            if d >= b.lo && d <= b.hi {
                return i;
            }
            let dist = (d - b.lo).abs().min((d - b.hi).abs());
            if dist < best_dist {
                best_dist = dist;
                best = i;
            }
        }
        best
    }

    /// Diameter below which half of the emitted liquid mass lies, taken as
    /// the midpoint of the bin where the cumulative `weight * d^3` mass
    /// passes one half.
    pub fn mass_median_diameter(&self) -> f64 {
        let masses: Vec<f64> = self
            .bins
            .iter()
            .map(|b| {
                let mid = 0.5 * (b.lo + b.hi);
                b.weight * mid.powi(3)
            })
            .collect();
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return 0.5 * (self.bins[0].lo + self.bins[0].hi);
        }
        let mut acc = 0.0;
        for (i, m) in masses.iter().enumerate() {
            acc += m;
            if acc >= 0.5 * total {
                return 0.5 * (self.bins[i].lo + self.bins[i].hi);
            }
        }
        0.5 * (self.bins[self.bins.len() - 1].lo + self.bins[self.bins.len() - 1].hi)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.bins.len() - 1);
        let b = self.bins[idx];
        let frac: f64 = rng.random();
        b.lo + frac * (b.hi - b.lo)
    }
}

impl TryFrom<Vec<(f64, f64, f64)>> for DiameterDistribution {
    type Error = Error;

    fn try_from(rows: Vec<(f64, f64, f64)>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(|(lo, hi, weight)| DiameterBin { lo, hi, weight })
                .collect(),
        )
    }
}

impl From<DiameterDistribution> for Vec<(f64, f64, f64)> {
    fn from(d: DiameterDistribution) -> Self {
        d.bins.iter().map(|b| (b.lo, b.hi, b.weight)).collect()
    }
}

fn default_particles_per_event() -> u32 {
    4973
}

fn default_initial_speed() -> f64 {
    11.2
}

fn default_beam_sigma() -> f64 {
    6.25
}

fn default_head_sigma_h() -> f64 {
    30.0
}

fn default_head_sigma_v() -> f64 {
    10.0
}

fn default_diameter_distribution() -> DiameterDistribution {
    DiameterDistribution::log_spaced_uniform(2e-6, 2e-3, 30).expect("default bins are valid")
}

/// Cough parameters. Serialized under the `"emission"` key of environment
/// documents; all fields have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmissionConfig {
    /// Particles released per cough. Interpreted as a fixed count unless
    /// `poisson_particle_count` is set, in which case it is the Poisson mean.
    pub particles_per_event: u32,
    pub poisson_particle_count: bool,
    /// Initial particle speed in m/s.
    pub initial_speed: f64,
    /// Per-particle beam spread, degrees, both axes.
    pub beam_sigma_deg: f64,
    /// Per-cough head rotation, degrees.
    pub head_sigma_h_deg: f64,
    pub head_sigma_v_deg: f64,
    pub head_mean_h_deg: f64,
    pub head_mean_v_deg: f64,
    pub diameter_distribution: DiameterDistribution,
}

impl Default for EmissionConfig {
    fn default() -> Self {
        Self {
            particles_per_event: default_particles_per_event(),
            poisson_particle_count: false,
            initial_speed: default_initial_speed(),
            beam_sigma_deg: default_beam_sigma(),
            head_sigma_h_deg: default_head_sigma_h(),
            head_sigma_v_deg: default_head_sigma_v(),
            head_mean_h_deg: 0.0,
            head_mean_v_deg: 0.0,
            diameter_distribution: default_diameter_distribution(),
        }
    }
}

impl EmissionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles_per_event == 0 {
            return Err(Error::InvalidConfig(
                "emission.particles_per_event must be > 0".into(),
            ));
        }
        if self.initial_speed <= 0.0 || !self.initial_speed.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "emission.initial_speed = {}, must be > 0",
                self.initial_speed
            )));
        }
        for (name, v) in [
            ("beam_sigma_deg", self.beam_sigma_deg),
            ("head_sigma_h_deg", self.head_sigma_h_deg),
            ("head_sigma_v_deg", self.head_sigma_v_deg),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "emission.{name} = {v}, must be >= 0"
                )));
            }
        }
        for (name, v) in [
            ("head_mean_h_deg", self.head_mean_h_deg),
            ("head_mean_v_deg", self.head_mean_v_deg),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "emission.{name} = {v}, must be finite"
                )));
            }
        }
        Ok(())
    }
}

/// Where and which way a mouth points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterPose {
    /// Mouth position in meters.
    pub mouth_position: [f64; 3],
    /// Unit facing vector.
    pub facing: [f64; 3],
}

impl EmitterPose {
    /// Builds a pose, normalizing `facing`.
    pub fn new(mouth_position: [f64; 3], facing: [f64; 3]) -> Result<Self> {
        let norm = (facing[0].powi(2) + facing[1].powi(2) + facing[2].powi(2)).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidConfig("facing vector must be nonzero".into()));
        }
        let pose = Self {
            mouth_position,
            facing: [facing[0] / norm, facing[1] / norm, facing[2] / norm],
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let norm =
            (self.facing[0].powi(2) + self.facing[1].powi(2) + self.facing[2].powi(2)).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "facing vector has norm {norm}, must be normalized"
            )));
        }
        if self.mouth_position[2] <= 0.0 || self.mouth_position[2].is_nan() {
            return Err(Error::InvalidConfig(format!(
                "mouth height {} must be > 0",
                self.mouth_position[2]
            )));
        }
        Ok(())
    }
}

/// Orthonormal (side, up) directions completing a local frame around `axis`.
pub(crate) fn local_frame(axis: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let up_ref = if axis[2].abs() > 0.999 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let side = normalize(cross(up_ref, axis));
    let up = cross(axis, side);
    (side, up)
}

/// Deflect a unit `axis` by a horizontal angle `h` and a vertical angle `v`
/// (radians) in its local frame: `cos v (cos h * axis + sin h * side) + sin v * up`.
pub(crate) fn deflect(axis: [f64; 3], h: f64, v: f64) -> [f64; 3] {
    let (side, up) = local_frame(axis);
    let (ch, sh) = (h.cos(), h.sin());
    let (cv, sv) = (v.cos(), v.sin());
    [
        cv * (ch * axis[0] + sh * side[0]) + sv * up[0],
        cv * (ch * axis[1] + sh * side[1]) + sv * up[1],
        cv * (ch * axis[2] + sh * side[2]) + sv * up[2],
    ]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn gaussian_deg<R: Rng + ?Sized>(rng: &mut R, mean: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return mean;
    }
    Normal::new(mean, sigma)
        .expect("sigma validated non-negative")
        .sample(rng)
}

/// One head-rotation draw: `(horizontal, vertical)` angles in degrees.
pub fn sample_head_rotation<R: Rng + ?Sized>(cfg: &EmissionConfig, rng: &mut R) -> (f64, f64) {
    let h = gaussian_deg(rng, cfg.head_mean_h_deg, cfg.head_sigma_h_deg);
    let v = gaussian_deg(rng, cfg.head_mean_v_deg, cfg.head_sigma_v_deg);
    (h, v)
}

/// Draw one diameter from the configured histogram (bin by weight, then
/// uniform within the bin).
pub fn sample_diameter<R: Rng + ?Sized>(cfg: &EmissionConfig, rng: &mut R) -> f64 {
    cfg.diameter_distribution.sample(rng)
}

/// Generate the particles of one cough.
///
/// The head rotation is drawn once and shared by every particle of the cough;
/// beam deviations and diameters are drawn per particle. All particles start
/// at the mouth position with speed `initial_speed` along their direction.
pub fn sample_cough<R: Rng + ?Sized>(
    cfg: &EmissionConfig,
    pose: &EmitterPose,
    rng: &mut R,
) -> Result<Vec<ParticleState>> {
    cfg.validate()?;
    pose.validate()?;

    let count = if cfg.poisson_particle_count {
        let mean = cfg.particles_per_event as f64;
        Poisson::new(mean)
            .map_err(|e| Error::InvalidConfig(format!("poisson particle count: {e}")))?
            .sample(rng) as usize
    } else {
        cfg.particles_per_event as usize
    };

    let (head_h, head_v) = sample_head_rotation(cfg, rng);
    let cough_axis = deflect(pose.facing, head_h.to_radians(), head_v.to_radians());

    let mut particles = Vec::with_capacity(count);
    for _ in 0..count {
        let diameter = sample_diameter(cfg, rng);
        let beam_h = gaussian_deg(rng, 0.0, cfg.beam_sigma_deg);
        let beam_v = gaussian_deg(rng, 0.0, cfg.beam_sigma_deg);
        let dir = deflect(cough_axis, beam_h.to_radians(), beam_v.to_radians());
        particles.push(ParticleState {
            position: pose.mouth_position,
            velocity: [
                cfg.initial_speed * dir[0],
                cfg.initial_speed * dir[1],
                cfg.initial_speed * dir[2],
            ],
            diameter,
            alive: true,
        });
    }
    Ok(particles)
}

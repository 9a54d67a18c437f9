//! Seeded Monte Carlo trials: per-receiver, per-diameter-bin transition
//! probability estimation, and the conversion of those estimates into
//! infection-rate and dose curves against viral load.
//!
//! Determinism contract: a trial is a pure function of `(environment, seed)`,
//! and per-trial seeds derive from the master seed by a counter hash, so an
//! estimate is fully determined by `(environment, runs, master_seed)` no
//! matter how many worker threads execute it (counts aggregate by commutative
//! integer sums). Growing `runs` reuses the existing trial seeds.
//!
//! Successive coughs are simulated independently: all particles of one cough
//! are retired before the next begins. That is exactly the memoryless-channel
//! assumption; [`TransitionEstimate::memoryless`] records whether the
//! configured event interval actually clears the fall time of the emission
//! spectrum's mass-median diameter, and the CLI warns when it does not.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::closed_forms;
use crate::dose::{self, ViralLoad};
use crate::emission::{self, EmissionConfig};
use crate::environment::{advance_and_collide, ballistic_absorption, Absorber, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::kinematics::{self, Integrator, ParticleState};

/// Hard ceiling on simulated seconds per cough. Small aerosols settle for
/// hours; the cap bounds compute and flags the run instead.
const MAX_COUGH_SECONDS: f64 = 600.0;

/// Velocity convergence threshold (m/s) below which a particle is handed to
/// the analytic constant-velocity resolver.
const SETTLE_EPS: f64 = 1e-9;

/// Raw counts from one trial. Bins are the environment emission histogram's
/// bins; `hits_by_bin` is indexed `[receiver][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_seed: u64,
    pub bins: Vec<(f64, f64)>,
    pub emitted_by_bin: Vec<u64>,
    pub hits_by_bin: Vec<Vec<u64>>,
    pub wall_absorbed_by_bin: Vec<u64>,
    /// Particles still airborne when the per-cough time cap was reached.
    pub capped_live_by_bin: Vec<u64>,
    /// True when any particle hit the time cap.
    pub capped: bool,
}

impl TrialResult {
    pub fn emitted_total(&self) -> u64 {
        self.emitted_by_bin.iter().sum()
    }

    pub fn hits_total(&self, receiver: usize) -> u64 {
        self.hits_by_bin[receiver].iter().sum()
    }

    pub fn wall_total(&self) -> u64 {
        self.wall_absorbed_by_bin.iter().sum()
    }

    pub fn capped_total(&self) -> u64 {
        self.capped_live_by_bin.iter().sum()
    }
}

/// Aggregated transition-probability estimate `q_hat(d) = hits / emitted`
/// per receiver and diameter bin, with binomial standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEstimate {
    pub receiver_ids: Vec<String>,
    pub bins: Vec<(f64, f64)>,
    pub runs: u32,
    /// Cough events per trial, summed over emitters.
    pub events_per_trial: u64,
    pub emitted_by_bin: Vec<u64>,
    pub hits_by_bin: Vec<Vec<u64>>,
    pub wall_absorbed_by_bin: Vec<u64>,
    pub capped_live_by_bin: Vec<u64>,
    pub capped: bool,
    /// Whether the configured event interval clears the fall time of the
    /// emission spectrum's mass-median diameter (vacuously true for a single
    /// event per emitter).
    pub memoryless: bool,
}

impl TransitionEstimate {
    /// Estimated transition probability for `(receiver, bin)`; zero when the
    /// bin saw no particles.
    pub fn q_hat(&self, receiver: usize, bin: usize) -> f64 {
        let emitted = self.emitted_by_bin[bin];
        if emitted == 0 {
            0.0
        } else {
            self.hits_by_bin[receiver][bin] as f64 / emitted as f64
        }
    }

    /// Binomial standard error `sqrt(q (1 - q) / emitted)`.
    pub fn stderr(&self, receiver: usize, bin: usize) -> f64 {
        let emitted = self.emitted_by_bin[bin];
        if emitted == 0 {
            0.0
        } else {
            let q = self.q_hat(receiver, bin);
            (q * (1.0 - q) / emitted as f64).sqrt()
        }
    }

    pub fn receiver_index(&self, id: &str) -> Option<usize> {
        self.receiver_ids.iter().position(|r| r == id)
    }

    /// Build an estimate directly from known per-bin probabilities instead of
    /// simulation, for analysis of hypothetical channels. `q_hat` is indexed
    /// `[receiver][bin]`; `emitted_per_bin` sets the pseudo-counts behind it.
    pub fn synthetic(
        receiver_ids: Vec<String>,
        bins: Vec<(f64, f64)>,
        q_hat: Vec<Vec<f64>>,
        emitted_per_bin: u64,
        events_per_trial: u64,
    ) -> Result<Self> {
        if q_hat.len() != receiver_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} q_hat rows for {} receivers",
                q_hat.len(),
                receiver_ids.len()
            )));
        }
        let mut hits_by_bin = Vec::with_capacity(q_hat.len());
        for row in &q_hat {
            if row.len() != bins.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} q_hat entries for {} bins",
                    row.len(),
                    bins.len()
                )));
            }
            for &q in row {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidProbability(format!(
                        "q_hat = {q}, outside [0,1]"
                    )));
                }
            }
            hits_by_bin.push(
                row.iter()
                    .map(|q| (q * emitted_per_bin as f64).round() as u64)
                    .collect(),
            );
        }
        Ok(Self {
            receiver_ids,
            bins: bins.clone(),
            runs: 1,
            events_per_trial,
            emitted_by_bin: vec![emitted_per_bin; bins.len()],
            hits_by_bin,
            wall_absorbed_by_bin: vec![0; bins.len()],
            capped_live_by_bin: vec![0; bins.len()],
            capped: false,
            memoryless: true,
        })
    }

    /// Transitions CSV: one row per `(receiver, bin)` with columns
    /// `receiver_id,d_lo,d_hi,emitted,hits,q_hat,stderr`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("receiver_id,d_lo,d_hi,emitted,hits,q_hat,stderr\n");
        for (r, id) in self.receiver_ids.iter().enumerate() {
            for (b, &(lo, hi)) in self.bins.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    id,
                    lo,
                    hi,
                    self.emitted_by_bin[b],
                    self.hits_by_bin[r][b],
                    self.q_hat(r, b),
                    self.stderr(r, b)
                ));
            }
        }
        out
    }
}

/// Per-trial seed: a counter hash of the master seed, so earlier trials keep
/// their seeds when `runs` grows.
pub fn derive_trial_seed(master_seed: u64, trial_index: u32) -> u64 {
    splitmix64(master_seed.wrapping_add((trial_index as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// The per-cough simulation budget: ten fall times of the smallest bin's
/// midpoint diameter from the tallest emitter, hard-capped at
/// [`MAX_COUGH_SECONDS`]. Drag-free configs fall back to the hard cap.
fn cough_time_cap(env: &EnvironmentSpec) -> f64 {
    let h = env
        .emitters
        .iter()
        .map(|e| e.pose.mouth_position[2])
        .fold(0.0, f64::max);
    let smallest = env.emission.diameter_distribution.bins()[0];
    let d_ref = 0.5 * (smallest.lo + smallest.hi);
    let budget = 10.0 * kinematics::fall_time(h, d_ref, &env.physics);
    if budget.is_finite() && budget > 0.0 {
        budget.min(MAX_COUGH_SECONDS)
    } else {
        MAX_COUGH_SECONDS
    }
}

enum Fate {
    Hit(usize),
    Wall,
    CappedLive,
}

/// Advance one particle to absorption or the time cap.
///
/// Stepping switches to the analytic constant-velocity resolver once the
/// velocity has converged (to terminal settling, or immediately in drag-free
/// flight), which turns the hours-long crawl of small aerosols into a single
/// intersection computation.
fn propagate(
    mut state: ParticleState,
    env: &EnvironmentSpec,
    t_start: f64,
    t_max: f64,
) -> Result<Fate> {
    let cfg = &env.physics;
    let alpha = kinematics::drag_alpha(state.diameter, cfg);
    let drag_free = alpha == 0.0;
    let v_inf = if drag_free {
        f64::INFINITY
    } else {
        kinematics::terminal_velocity(state.diameter, cfg)
    };

    let mut t = t_start;
    loop {
        if t >= t_max {
            return Ok(Fate::CappedLive);
        }
        // Settled (or drag-free coasting): resolve the rest of the flight
        // analytically.
        let settled_velocity = if drag_free && cfg.g == 0.0 {
            Some(state.velocity)
        } else if !drag_free
            && state.velocity[0].abs() <= SETTLE_EPS
            && state.velocity[1].abs() <= SETTLE_EPS
            && (state.velocity[2] + v_inf).abs() <= SETTLE_EPS
        {
            Some([0.0, 0.0, -v_inf])
        } else {
            None
        };
        if let Some(vel) = settled_velocity {
            return Ok(
                match ballistic_absorption(state.position, vel, t, t_max, env) {
                    Some(a) => match a.absorber {
                        Absorber::Receiver(i) => Fate::Hit(i),
                        Absorber::Boundary => Fate::Wall,
                    },
                    None => Fate::CappedLive,
                },
            );
        }

        let (next, absorption) = advance_and_collide(&state, env, t, cfg)?;
        t += cfg.dt;
        if let Some(a) = absorption {
            return Ok(match a.absorber {
                Absorber::Receiver(i) => Fate::Hit(i),
                Absorber::Boundary => Fate::Wall,
            });
        }
        state = next;
    }
}

/// Run one seeded trial: fix randomized scene elements, emit every cough of
/// every emitter, track all particles to absorption or the time cap, and
/// count hits per receiver and diameter bin. Deterministic in `(env, seed)`.
pub fn run_trial(env: &EnvironmentSpec, seed: u64) -> Result<TrialResult> {
    env.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let concrete = env.sample_randomized(&mut rng);

    let dist = &concrete.emission.diameter_distribution;
    let bins: Vec<(f64, f64)> = dist.bins().iter().map(|b| (b.lo, b.hi)).collect();
    let n_bins = bins.len();
    let n_receivers = concrete.receivers.len();

    let mut result = TrialResult {
        trial_seed: seed,
        bins,
        emitted_by_bin: vec![0; n_bins],
        hits_by_bin: vec![vec![0; n_bins]; n_receivers],
        wall_absorbed_by_bin: vec![0; n_bins],
        capped_live_by_bin: vec![0; n_bins],
        capped: false,
    };

    // Emitters beyond the first get a uniform phase offset within the event
    // interval; coughs do not interact, so the offset only matters through
    // moving receivers.
    let offsets: Vec<f64> = (0..concrete.emitters.len())
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                rng.random_range(0.0..concrete.event_interval_s)
            }
        })
        .collect();

    let cap = cough_time_cap(&concrete);

    for (e, emitter) in concrete.emitters.iter().enumerate() {
        let emission_cfg = concrete.emission_for(e).clone();
        for event in 0..concrete.n_events {
            let t0 = offsets[e] + event as f64 * concrete.event_interval_s;
            let particles = emission::sample_cough(&emission_cfg, &emitter.pose, &mut rng)?;
            for particle in particles {
                let bin = dist.bin_index(particle.diameter);
                result.emitted_by_bin[bin] += 1;
                match propagate(particle, &concrete, t0, t0 + cap)? {
                    Fate::Hit(r) => result.hits_by_bin[r][bin] += 1,
                    Fate::Wall => result.wall_absorbed_by_bin[bin] += 1,
                    Fate::CappedLive => {
                        result.capped_live_by_bin[bin] += 1;
                        result.capped = true;
                    }
                }
            }
        }
    }
    Ok(result)
}

/// Run `runs` independent trials (in parallel on the current rayon pool).
pub fn run_trials(env: &EnvironmentSpec, runs: u32, master_seed: u64) -> Result<Vec<TrialResult>> {
    env.validate()?;
    (0..runs)
        .into_par_iter()
        .map(|i| run_trial(env, derive_trial_seed(master_seed, i)))
        .collect()
}

/// Aggregate trials into a [`TransitionEstimate`]. All trials must share the
/// environment's binning (which [`run_trial`] guarantees).
pub fn aggregate_trials(
    env: &EnvironmentSpec,
    trials: &[TrialResult],
) -> Result<TransitionEstimate> {
    if trials.is_empty() {
        return Err(Error::InvalidParam("at least one trial required".into()));
    }
    let bins = trials[0].bins.clone();
    let n_bins = bins.len();
    let n_receivers = env.receivers.len();
    let mut est = TransitionEstimate {
        receiver_ids: env.receivers.iter().map(|r| r.id.clone()).collect(),
        bins,
        runs: trials.len() as u32,
        events_per_trial: env.n_events as u64 * env.emitters.len() as u64,
        emitted_by_bin: vec![0; n_bins],
        hits_by_bin: vec![vec![0; n_bins]; n_receivers],
        wall_absorbed_by_bin: vec![0; n_bins],
        capped_live_by_bin: vec![0; n_bins],
        capped: false,
        memoryless: memoryless_for(env),
    };
    for trial in trials {
        if trial.bins != est.bins {
            return Err(Error::DimensionMismatch(
                "trial binning does not match environment".into(),
            ));
        }
        for b in 0..n_bins {
            est.emitted_by_bin[b] += trial.emitted_by_bin[b];
            est.wall_absorbed_by_bin[b] += trial.wall_absorbed_by_bin[b];
            est.capped_live_by_bin[b] += trial.capped_live_by_bin[b];
            for r in 0..n_receivers {
                est.hits_by_bin[r][b] += trial.hits_by_bin[r][b];
            }
        }
        est.capped |= trial.capped;
    }
    Ok(est)
}

/// Run and aggregate in one call: the estimate is a pure function of
/// `(env, runs, master_seed)`.
pub fn estimate_transitions(
    env: &EnvironmentSpec,
    runs: u32,
    master_seed: u64,
) -> Result<TransitionEstimate> {
    let trials = run_trials(env, runs, master_seed)?;
    aggregate_trials(env, &trials)
}

fn memoryless_for(env: &EnvironmentSpec) -> bool {
    if env.n_events <= 1 {
        return true;
    }
    let h = env
        .emitters
        .iter()
        .map(|e| e.pose.mouth_position[2])
        .fold(0.0, f64::max);
    let d_mm = env.emission.diameter_distribution.mass_median_diameter();
    kinematics::is_memoryless(env.event_interval_s, h, d_mm, &env.physics)
}

/// Infection measures of one receiver as functions of viral load.
///
/// `phi_per_event` is the expected absorbed virion count per respiratory
/// event; the dose accumulated over all `n_events` is `n_phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub receiver_id: String,
    pub n_events: u64,
    pub loads: Vec<f64>,
    /// Logarithmic infection rate, bits per event.
    pub r_bits: Vec<f64>,
    /// Linear infection measure, probability per event.
    pub linear: Vec<f64>,
    pub phi_per_event: Vec<f64>,
}

impl RateCurve {
    pub fn n_r(&self, i: usize) -> f64 {
        self.n_events as f64 * self.r_bits[i]
    }

    pub fn n_phi(&self, i: usize) -> f64 {
        self.n_events as f64 * self.phi_per_event[i]
    }

    /// Rate-curve CSV with columns `load,R_bits,linear_measure,phi,n,nR,nPhi`;
    /// a trailing `nPhi_over_theta` column is appended when a dose threshold
    /// is supplied.
    pub fn to_csv_string(&self, theta: Option<f64>) -> String {
        let mut out = String::from("load,R_bits,linear_measure,phi,n,nR,nPhi");
        if theta.is_some() {
            out.push_str(",nPhi_over_theta");
        }
        out.push('\n');
        for i in 0..self.loads.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                self.loads[i],
                self.r_bits[i],
                self.linear[i],
                self.phi_per_event[i],
                self.n_events,
                self.n_r(i),
                self.n_phi(i)
            ));
            if let Some(theta) = theta {
                out.push_str(&format!(",{}", self.n_phi(i) / theta));
            }
            out.push('\n');
        }
        out
    }
}

/// Convert a transition estimate into infection measures versus viral load
/// for one receiver.
///
/// Per diameter bin, the input-event probability is
/// `p(d) = virion_probability(d_mid, load) * weight(d)`; the logarithmic rate
/// generalizes the closed-form sum `-q(d) p(d) log2 p(d)` over bins, the
/// linear measure is `sum p(d) q(d)`, and the per-event dose multiplies each
/// term by the expected virions `eta(d)` and the per-event particle count.
/// The estimate's bins must match the emission histogram exactly.
pub fn rate_curve(
    est: &TransitionEstimate,
    receiver_id: &str,
    loads: &[f64],
    emission_cfg: &EmissionConfig,
    n_events: u64,
) -> Result<RateCurve> {
    let receiver = est
        .receiver_index(receiver_id)
        .ok_or_else(|| Error::InvalidParam(format!("receiver `{receiver_id}` not in estimate")))?;
    let bins = emission_cfg.diameter_distribution.bins();
    if bins.len() != est.bins.len()
        || bins
            .iter()
            .zip(&est.bins)
            .any(|(b, &(lo, hi))| (b.lo - lo).abs() > 1e-12 || (b.hi - hi).abs() > 1e-12)
    {
        return Err(Error::DimensionMismatch(
            "estimate bins do not match the emission histogram".into(),
        ));
    }
    for &load in loads {
        if load < 0.0 || !load.is_finite() {
            return Err(Error::InvalidParam(format!(
                "viral load = {load}, must be >= 0"
            )));
        }
    }

    let n_particles = emission_cfg.particles_per_event as f64;
    let mut r_bits = Vec::with_capacity(loads.len());
    let mut linear = Vec::with_capacity(loads.len());
    let mut phi = Vec::with_capacity(loads.len());
    for &load in loads {
        let viral_load = ViralLoad::new(load)?;
        let mut r = 0.0;
        let mut lin = 0.0;
        let mut dose_per_event = 0.0;
        for (b, bin) in bins.iter().enumerate() {
            let d_mid = 0.5 * (bin.lo + bin.hi);
            let p = dose::virion_probability(d_mid, viral_load) * bin.weight;
            let q = est.q_hat(receiver, b);
            r += closed_forms::rate_term_for(p, q);
            lin += p * q;
            dose_per_event += p * q * dose::expected_virions(d_mid, viral_load) * n_particles;
        }
        r_bits.push(r);
        linear.push(lin);
        phi.push(dose_per_event);
    }
    Ok(RateCurve {
        receiver_id: receiver_id.to_string(),
        n_events,
        loads: loads.to_vec(),
        r_bits,
        linear,
        phi_per_event: phi,
    })
}

/// True when the environment's integrator can step the whole emission
/// spectrum (the explicit update requires `alpha < 1` for the smallest bin);
/// callers can fail fast with a clear message instead of erroring mid-trial.
pub fn integrator_supports_spectrum(env: &EnvironmentSpec) -> bool {
    if env.physics.integrator == Integrator::ExactExponential {
        return true;
    }
    let smallest = env.emission.diameter_distribution.bins()[0];
    kinematics::drag_alpha(smallest.lo, &env.physics) < 1.0
}

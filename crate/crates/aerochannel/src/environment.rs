//! Indoor scenes: room geometry, absorbing boundaries, spherical receivers
//! (static or moving), and the four builtin scenario presets.
//!
//! Collision detection is continuous: each time step tests the segment swept
//! by the particle against every receiver sphere (in the receiver's own frame
//! of motion) and against the six room planes, and the nearest intersection
//! along the segment wins. End-point sampling would tunnel through a 5 cm
//! sphere once step lengths approach the millimeter scale.
//!
//! The preset room dimensions and seat layouts are documented plausible
//! defaults, not measurements; every field can be overridden through the
//! environment document.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emission::{EmissionConfig, EmitterPose};
use crate::error::{Error, Result};
use crate::kinematics::{self, ParticleState, PhysicsConfig};

/// Axis-aligned room: the box `[0, x] x [0, y] x [0, ceiling]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomGeometry {
    pub x: f64,
    pub y: f64,
    pub ceiling: f64,
}

impl RoomGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("x", self.x), ("y", self.y), ("ceiling", self.ceiling)] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "room.{name} = {v}, must be > 0"
                )));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> [f64; 3] {
        [self.x, self.y, self.ceiling]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p[0] > 0.0
            && p[0] < self.x
            && p[1] > 0.0
            && p[1] < self.y
            && p[2] > 0.0
            && p[2] < self.ceiling
    }
}

/// Straight-line receiver motion starting at `start_time` (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverTrajectory {
    /// Velocity in m/s.
    pub velocity: [f64; 3],
    #[serde(default)]
    pub start_time: f64,
}

fn default_receiver_radius() -> f64 {
    0.05
}

/// An absorbing sphere around a subject's mouth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub id: String,
    /// Mouth position at time zero, meters.
    pub center: [f64; 3],
    /// Sphere radius, meters.
    #[serde(default = "default_receiver_radius")]
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<ReceiverTrajectory>,
}

impl Receiver {
    pub fn new(id: impl Into<String>, center: [f64; 3]) -> Self {
        Self {
            id: id.into(),
            center,
            radius: default_receiver_radius(),
            trajectory: None,
        }
    }

    pub fn position_at(&self, t: f64) -> [f64; 3] {
        match &self.trajectory {
            Some(tr) if t > tr.start_time => {
                let dt = t - tr.start_time;
                [
                    self.center[0] + tr.velocity[0] * dt,
                    self.center[1] + tr.velocity[1] * dt,
                    self.center[2] + tr.velocity[2] * dt,
                ]
            }
            _ => self.center,
        }
    }

    pub fn velocity_at(&self, t: f64) -> [f64; 3] {
        match &self.trajectory {
            Some(tr) if t >= tr.start_time => tr.velocity,
            _ => [0.0; 3],
        }
    }
}

/// An infected subject: a pose plus an optional per-emitter emission override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    #[serde(flatten)]
    pub pose: EmitterPose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission: Option<EmissionConfig>,
}

/// A scene element whose placement is drawn per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomizedElement {
    /// Mouth position of emitter `emitter` drawn uniformly over the axis-
    /// aligned box `[min, max]`.
    EmitterPosition {
        emitter: usize,
        min: [f64; 3],
        max: [f64; 3],
    },
}

/// A complete scenario description.
///
/// Serialized as `{"room": .., "physics": .., "emission": .., "emitters": [..],
/// "receivers": [..], "n_events": .., "event_interval_s": ..}` with an
/// optional `"randomized_elements"` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub room: RoomGeometry,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub emission: EmissionConfig,
    pub emitters: Vec<EmitterSpec>,
    pub receivers: Vec<Receiver>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub randomized_elements: Vec<RandomizedElement>,
    pub n_events: u32,
    pub event_interval_s: f64,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.physics.validate()?;
        self.emission.validate()?;
        if self.emitters.is_empty() {
            return Err(Error::InvalidConfig("emitters: must not be empty".into()));
        }
        for (i, e) in self.emitters.iter().enumerate() {
            e.pose
                .validate()
                .map_err(|err| Error::InvalidConfig(format!("emitters[{i}]: {err}")))?;
            if !self.room.contains(e.pose.mouth_position) {
                return Err(Error::InvalidConfig(format!(
                    "emitters[{i}].mouth_position {:?} outside room",
                    e.pose.mouth_position
                )));
            }
            if let Some(em) = &e.emission {
                em.validate().map_err(|err| {
                    Error::InvalidConfig(format!("emitters[{i}].emission: {err}"))
                })?;
            }
        }
        if self.receivers.is_empty() {
            return Err(Error::InvalidConfig("receivers: must not be empty".into()));
        }
        for (i, r) in self.receivers.iter().enumerate() {
            if r.radius <= 0.0 || !r.radius.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "receivers[{i}].radius = {}, must be > 0",
                    r.radius
                )));
            }
            if !self.room.contains(r.center) {
                return Err(Error::InvalidConfig(format!(
                    "receivers[{i}].center {:?} outside room",
                    r.center
                )));
            }
            if self.receivers[..i].iter().any(|other| other.id == r.id) {
                return Err(Error::InvalidConfig(format!(
                    "receivers[{i}].id `{}` duplicated",
                    r.id
                )));
            }
        }
        for (i, el) in self.randomized_elements.iter().enumerate() {
            let RandomizedElement::EmitterPosition { emitter, min, max } = el;
            if *emitter >= self.emitters.len() {
                return Err(Error::InvalidConfig(format!(
                    "randomized_elements[{i}].emitter = {emitter}, only {} emitters",
                    self.emitters.len()
                )));
            }
            for k in 0..3 {
                if min[k] > max[k] || min[k].is_nan() || max[k].is_nan() {
                    return Err(Error::InvalidConfig(format!(
                        "randomized_elements[{i}]: min > max on axis {k}"
                    )));
                }
            }
            if !self.room.contains(*min) || !self.room.contains(*max) {
                return Err(Error::InvalidConfig(format!(
                    "randomized_elements[{i}]: region outside room"
                )));
            }
        }
        if self.n_events == 0 {
            return Err(Error::InvalidConfig("n_events must be >= 1".into()));
        }
        if self.event_interval_s <= 0.0 || !self.event_interval_s.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "event_interval_s = {}, must be > 0",
                self.event_interval_s
            )));
        }
        Ok(())
    }

    /// Effective emission configuration for emitter `i`.
    pub fn emission_for(&self, i: usize) -> &EmissionConfig {
        self.emitters[i].emission.as_ref().unwrap_or(&self.emission)
    }

    /// Fix all randomized placements with uniform draws, leaving a fully
    /// concrete spec. A spec without randomized elements is returned as-is.
    pub fn sample_randomized<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvironmentSpec {
        let mut out = self.clone();
        for el in &self.randomized_elements {
            let RandomizedElement::EmitterPosition { emitter, min, max } = el;
            let mut pos = [0.0; 3];
            for k in 0..3 {
                pos[k] = if max[k] > min[k] {
                    rng.random_range(min[k]..=max[k])
                } else {
                    min[k]
                };
            }
            out.emitters[*emitter].pose.mouth_position = pos;
        }
        out.randomized_elements.clear();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: EnvironmentSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// What absorbed a particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorber {
    /// Index into `EnvironmentSpec::receivers`.
    Receiver(usize),
    /// Any wall, the floor, or the ceiling.
    Boundary,
}

/// Record of one absorption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorption {
    pub absorber: Absorber,
    /// Diameter of the absorbed particle, meters.
    pub diameter: f64,
    /// Absolute simulation time of the hit, seconds.
    pub time: f64,
}

/// Earliest intersection of the relative segment `rel0 + s * reld`, `s` in
/// [0, 1], with the sphere of radius `r` at the origin. A start point already
/// inside the sphere hits at `s = 0`.
fn segment_sphere_hit(rel0: [f64; 3], reld: [f64; 3], r: f64) -> Option<f64> {
    let c = dot(rel0, rel0) - r * r;
    if c <= 0.0 {
        return Some(0.0);
    }
    let a = dot(reld, reld);
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * dot(rel0, reld);
    if b >= 0.0 {
        // Moving away from the sphere.
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = (-b - disc.sqrt()) / (2.0 * a);
    (0.0..=1.0).contains(&s).then_some(s)
}

/// Earliest fraction at which the segment `p0 -> p0 + d` leaves the box
/// `[0, size]`. Which plane was crossed is not reported: all boundaries
/// absorb alike.
fn segment_boundary_exit(p0: [f64; 3], d: [f64; 3], size: [f64; 3]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for k in 0..3 {
        if d[k] < 0.0 && p0[k] + d[k] < 0.0 {
            let s = -p0[k] / d[k];
            if (0.0..=1.0).contains(&s) && best.is_none_or(|b| s < b) {
                best = Some(s);
            }
        }
        if d[k] > 0.0 && p0[k] + d[k] > size[k] {
            let s = (size[k] - p0[k]) / d[k];
            if (0.0..=1.0).contains(&s) && best.is_none_or(|b| s < b) {
                best = Some(s);
            }
        }
    }
    best
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Advance a live particle by one time step starting at absolute time `t`,
/// then resolve absorption along the swept segment. Receivers are tested in
/// their own frame of motion (velocity held constant over the step); the
/// nearest intersection along the segment wins, and an absorbed particle is
/// returned dead at the hit point.
pub fn advance_and_collide(
    state: &ParticleState,
    env: &EnvironmentSpec,
    t: f64,
    cfg: &PhysicsConfig,
) -> Result<(ParticleState, Option<Absorption>)> {
    let stepped = kinematics::step(state, cfg)?;
    let p0 = state.position;
    let disp = [
        stepped.position[0] - p0[0],
        stepped.position[1] - p0[1],
        stepped.position[2] - p0[2],
    ];

    let mut hit: Option<(f64, Absorber)> = None;
    for (i, receiver) in env.receivers.iter().enumerate() {
        let c0 = receiver.position_at(t);
        let cv = receiver.velocity_at(t);
        let rel0 = [p0[0] - c0[0], p0[1] - c0[1], p0[2] - c0[2]];
        let reld = [
            disp[0] - cv[0] * cfg.dt,
            disp[1] - cv[1] * cfg.dt,
            disp[2] - cv[2] * cfg.dt,
        ];
        if let Some(s) = segment_sphere_hit(rel0, reld, receiver.radius) {
            if hit.is_none_or(|(best, _)| s < best) {
                hit = Some((s, Absorber::Receiver(i)));
            }
        }
    }
    if let Some(s) = segment_boundary_exit(p0, disp, env.room.size()) {
        if hit.is_none_or(|(best, _)| s < best) {
            hit = Some((s, Absorber::Boundary));
        }
    }

    match hit {
        Some((s, absorber)) => {
            let mut dead = stepped;
            dead.alive = false;
            dead.position = [
                p0[0] + s * disp[0],
                p0[1] + s * disp[1],
                p0[2] + s * disp[2],
            ];
            let absorption = Absorption {
                absorber,
                diameter: state.diameter,
                time: t + s * cfg.dt,
            };
            Ok((dead, Some(absorption)))
        }
        None => Ok((stepped, None)),
    }
}

/// Resolve the fate of a particle moving at constant velocity `vel` from
/// `pos` at absolute time `t0`, without stepping: the earliest receiver or
/// boundary intersection up to `t_max`, if any. Receiver trajectories are
/// honored piecewise (their velocity changes at `start_time`).
///
/// Used to fast-forward particles whose velocity has converged (settled to
/// terminal velocity or drag-free flight); stepping such particles to the
/// floor would cost millions of no-op steps. The returned diameter is NaN;
/// the caller owns the particle and fills it in.
pub fn ballistic_absorption(
    pos: [f64; 3],
    vel: [f64; 3],
    t0: f64,
    t_max: f64,
    env: &EnvironmentSpec,
) -> Option<Absorption> {
    debug_assert!(t_max >= t0);
    let horizon = t_max - t0;
    let mut best: Option<(f64, Absorber)> = None;

    // Boundaries.
    let size = env.room.size();
    for k in 0..3 {
        if vel[k] < 0.0 {
            let tau = -pos[k] / vel[k];
            if tau >= 0.0 && tau <= horizon && best.is_none_or(|(b, _)| tau < b) {
                best = Some((tau, Absorber::Boundary));
            }
        }
        if vel[k] > 0.0 {
            let tau = (size[k] - pos[k]) / vel[k];
            if tau >= 0.0 && tau <= horizon && best.is_none_or(|(b, _)| tau < b) {
                best = Some((tau, Absorber::Boundary));
            }
        }
    }

    // Receivers, split at trajectory start times.
    for (i, receiver) in env.receivers.iter().enumerate() {
        let mut cuts = vec![0.0, horizon];
        if let Some(tr) = &receiver.trajectory {
            let c = tr.start_time - t0;
            if c > 0.0 && c < horizon {
                cuts.push(c);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut times"));
        for w in cuts.windows(2) {
            let (seg_start, seg_end) = (w[0], w[1]);
            if seg_end <= seg_start {
                continue;
            }
            let t_abs = t0 + seg_start;
            let c0 = receiver.position_at(t_abs);
            let cv = receiver.velocity_at(t_abs);
            let p_seg = [
                pos[0] + vel[0] * seg_start,
                pos[1] + vel[1] * seg_start,
                pos[2] + vel[2] * seg_start,
            ];
            let rel0 = [p_seg[0] - c0[0], p_seg[1] - c0[1], p_seg[2] - c0[2]];
            let relv = [vel[0] - cv[0], vel[1] - cv[1], vel[2] - cv[2]];
            if let Some(tau) = ray_sphere_hit(rel0, relv, receiver.radius, seg_end - seg_start) {
                let total = seg_start + tau;
                if best.is_none_or(|(b, _)| total < b) {
                    best = Some((total, Absorber::Receiver(i)));
                }
                break; // earliest hit for this receiver found
            }
        }
    }

    best.map(|(tau, absorber)| Absorption {
        absorber,
        diameter: f64::NAN,
        time: t0 + tau,
    })
}

/// Like [`segment_sphere_hit`] but parameterized by time over `[0, horizon]`.
fn ray_sphere_hit(rel0: [f64; 3], relv: [f64; 3], r: f64, horizon: f64) -> Option<f64> {
    let c = dot(rel0, rel0) - r * r;
    if c <= 0.0 {
        return Some(0.0);
    }
    let a = dot(relv, relv);
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * dot(rel0, relv);
    if b >= 0.0 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let tau = (-b - disc.sqrt()) / (2.0 * a);
    (tau >= 0.0 && tau <= horizon).then_some(tau)
}

/// Builtin scenario preset names.
pub const PRESET_NAMES: [&str; 4] = ["office", "corridor", "classroom", "bus"];

/// Construct a builtin environment by name.
///
/// * `office`: two people seated face to face 1.5 m apart in a 4 x 4 m room,
///   one infected; 240 coughs at one per minute (a four-hour stretch).
/// * `corridor`: a standing emitter in a 2 x 10 m hallway; the receiver
///   starts 1 m away walking at 1 m/s through the emitted cloud, single
///   cough, head turned 45 degrees toward the receiver at the moment of
///   emission.
/// * `classroom`: a 5 x 4 desk grid of seated students plus a standing
///   teacher whose position is uniform random in front of the class; one
///   student and the teacher are infected; 90 coughs (one lesson).
/// * `bus`: 2 x 2 seating at 50% occupancy (window seats filled, aisle seats
///   empty) with a single standing infected passenger mid-aisle; one cough.
///
/// Ceiling height is 3 m everywhere except the bus aisle at 2.3 m. Seated
/// mouths are at 1.20 m, standing mouths at 1.64 m. All receiver spheres have
/// a 5 cm radius.
pub fn builtin(name: &str) -> Result<EnvironmentSpec> {
    let spec = match name {
        "office" => EnvironmentSpec {
            room: RoomGeometry {
                x: 4.0,
                y: 4.0,
                ceiling: 3.0,
            },
            physics: PhysicsConfig::default(),
            emission: EmissionConfig::default(),
            emitters: vec![EmitterSpec {
                pose: EmitterPose::new([1.25, 2.0, 1.20], [1.0, 0.0, 0.0])?,
                emission: None,
            }],
            receivers: vec![Receiver::new("office-peer", [2.75, 2.0, 1.20])],
            randomized_elements: vec![],
            n_events: 240,
            event_interval_s: 60.0,
        },
        // The two people pass in parallel lanes 0.6 m apart; at cough time
        // the walker is 1 m away (0.6 m across, 0.8 m along) and the
        // emitter's head is turned 45 degrees toward the walker's lane.
        "corridor" => EnvironmentSpec {
            room: RoomGeometry {
                x: 2.0,
                y: 10.0,
                ceiling: 3.0,
            },
            physics: PhysicsConfig::default(),
            emission: EmissionConfig {
                head_mean_h_deg: 45.0,
                head_mean_v_deg: 0.0,
                ..EmissionConfig::default()
            },
            emitters: vec![EmitterSpec {
                pose: EmitterPose::new([1.3, 4.5, 1.64], [0.0, 1.0, 0.0])?,
                emission: None,
            }],
            receivers: vec![Receiver {
                id: "walker".into(),
                center: [0.7, 5.3, 1.64],
                radius: default_receiver_radius(),
                trajectory: Some(ReceiverTrajectory {
                    velocity: [0.0, -1.0, 0.0],
                    start_time: 0.0,
                }),
            }],
            randomized_elements: vec![],
            n_events: 1,
            event_interval_s: 60.0,
        },
        "classroom" => {
            // 5 columns x 4 rows of desks at 1.2 m pitch; the front of the
            // class is at high y. The student in column 1, row 1 is infected.
            let cols = 5usize;
            let rows = 4usize;
            let desk =
                |col: usize, row: usize| [1.6 + 1.2 * col as f64, 1.5 + 1.2 * row as f64, 1.20];
            let infected = (1usize, 1usize);
            let mut receivers = Vec::new();
            for col in 0..cols {
                for row in 0..rows {
                    if (col, row) == infected {
                        continue;
                    }
                    receivers.push(Receiver::new(
                        format!("student-{col}-{row}"),
                        desk(col, row),
                    ));
                }
            }
            EnvironmentSpec {
                room: RoomGeometry {
                    x: 8.0,
                    y: 7.0,
                    ceiling: 3.0,
                },
                physics: PhysicsConfig::default(),
                emission: EmissionConfig::default(),
                emitters: vec![
                    EmitterSpec {
                        pose: EmitterPose::new(desk(infected.0, infected.1), [0.0, 1.0, 0.0])?,
                        emission: None,
                    },
                    // Teacher: standing, facing the class; position randomized.
                    EmitterSpec {
                        pose: EmitterPose::new([4.0, 6.3, 1.64], [0.0, -1.0, 0.0])?,
                        emission: None,
                    },
                ],
                randomized_elements: vec![RandomizedElement::EmitterPosition {
                    emitter: 1,
                    min: [1.0, 6.1, 1.64],
                    max: [7.0, 6.5, 1.64],
                }],
                receivers,
                n_events: 90,
                event_interval_s: 60.0,
            }
        }
        "bus" => {
            // Ten seat rows at 0.8 m pitch; window seats on both sides are
            // occupied, aisle seats empty (50% occupancy).
            let mut receivers = Vec::new();
            for row in 0..10 {
                let y = 1.0 + 0.8 * row as f64;
                receivers.push(Receiver::new(format!("passenger-l{row}"), [0.35, y, 1.20]));
                receivers.push(Receiver::new(format!("passenger-r{row}"), [2.15, y, 1.20]));
            }
            EnvironmentSpec {
                room: RoomGeometry {
                    x: 2.5,
                    y: 10.0,
                    ceiling: 2.3,
                },
                physics: PhysicsConfig::default(),
                emission: EmissionConfig::default(),
                emitters: vec![EmitterSpec {
                    pose: EmitterPose::new([1.25, 5.0, 1.64], [0.0, 1.0, 0.0])?,
                    emission: None,
                }],
                receivers,
                randomized_elements: vec![],
                n_events: 1,
                event_interval_s: 60.0,
            }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    spec.validate()?;
    Ok(spec)
}

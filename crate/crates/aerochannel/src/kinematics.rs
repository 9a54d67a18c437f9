//! Discrete-time particle motion under gravity and Stokes drag.
//!
//! The per-step drag factor is `alpha = 18 * eta * dt / (rho_water * d^2)`,
//! from the Stokes coefficient `beta = 3 pi eta d` and the droplet mass
//! `m = rho_water (pi/6) d^3`. Two integrators are provided:
//!
//! * `explicit_euler`: the explicit update `v <- v - alpha v` (with the gravity
//!   term `- g dt` on the vertical axis). Only valid for `0 < alpha < 1`; for
//!   the default time step of 1e-4 s that bound is violated below roughly
//!   5.8 um diameter, and the constructor-facing [`step`] rejects such calls.
//! * `exact_exponential`: the closed-form decay `exp(-alpha)` per step with
//!   vertical settling toward the terminal velocity, unconditionally stable
//!   for every diameter and matching the explicit update to first order in
//!   `alpha`.
//!
//! Positions advance semi-implicitly: `x[k+1] = x[k] + v[k+1] * dt`.
//!
//! Stokes drag is used across the full configured diameter range even though
//! it is far outside its validity regime near the millimeter end (the
//! computed terminal velocity for a 2 mm droplet is on the order of 1e2 m/s,
//! which is not physical). Results for the largest diameter bins should be
//! read with that caveat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of one simulated particle. Diameter stays constant over the
/// particle's lifetime (no evaporation), and `alive` flips to false on
/// absorption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    /// Position in meters.
    pub position: [f64; 3],
    /// Velocity in m/s.
    pub velocity: [f64; 3],
    /// Diameter in meters.
    pub diameter: f64,
    pub alive: bool,
}

/// Velocity update scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    ExplicitEuler,
    ExactExponential,
}

/// Physical constants and stepping parameters.
///
/// Serialized under the `"physics"` key of environment documents as
/// `{dt, g, viscosity, water_density, integrator}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConfig {
    /// Time step in seconds.
    pub dt: f64,
    /// Gravitational acceleration in m/s^2. Zero is allowed for drag-free
    /// calibration scenes.
    pub g: f64,
    /// Dynamic viscosity of air in kg/(m s). Zero disables drag.
    pub viscosity: f64,
    /// Droplet (water) density in kg/m^3.
    pub water_density: f64,
    pub integrator: Integrator,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            g: 9.81,
            viscosity: 1.85e-5,
            water_density: 998.0,
            integrator: Integrator::ExactExponential,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "physics.dt = {}, must be > 0",
                self.dt
            )));
        }
        for (name, v) in [("g", self.g), ("viscosity", self.viscosity)] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "physics.{name} = {v}, must be >= 0"
                )));
            }
        }
        if self.water_density <= 0.0 || !self.water_density.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "physics.water_density = {}, must be > 0",
                self.water_density
            )));
        }
        Ok(())
    }
}

/// Dimensionless per-step drag factor `alpha = 18 eta dt / (rho d^2)`.
pub fn drag_alpha(d: f64, cfg: &PhysicsConfig) -> f64 {
    debug_assert!(d > 0.0);
    18.0 * cfg.viscosity * cfg.dt / (cfg.water_density * d * d)
}

/// Stokes drag coefficient `beta = 3 pi eta d`, in kg/s.
pub fn stokes_beta(d: f64, cfg: &PhysicsConfig) -> f64 {
    3.0 * std::f64::consts::PI * cfg.viscosity * d
}

/// Droplet mass `m = rho (pi/6) d^3`, in kg.
pub fn particle_mass(d: f64, cfg: &PhysicsConfig) -> f64 {
    cfg.water_density * std::f64::consts::FRAC_PI_6 * d.powi(3)
}

/// Terminal settling speed magnitude `m g / beta = rho g d^2 / (18 eta)`.
/// Infinite when drag is disabled.
pub fn terminal_velocity(d: f64, cfg: &PhysicsConfig) -> f64 {
    debug_assert!(d > 0.0);
    cfg.water_density * cfg.g * d * d / (18.0 * cfg.viscosity)
}

/// Time for a particle of diameter `d` to settle from height `h` at its
/// terminal velocity: `h / v_terminal`.
pub fn fall_time(h: f64, d: f64, cfg: &PhysicsConfig) -> f64 {
    debug_assert!(h > 0.0 && d > 0.0);
    h / terminal_velocity(d, cfg)
}

/// Memorylessness criterion: successive respiratory events do not interact
/// when the interval between them exceeds the fall time of the chosen
/// quantile diameter from the emission height.
pub fn is_memoryless(event_interval: f64, h: f64, d_quantile: f64, cfg: &PhysicsConfig) -> bool {
    event_interval > fall_time(h, d_quantile, cfg)
}

/// Advance one particle by one time step.
///
/// In `explicit_euler` mode the explicit update is rejected with
/// [`Error::UnstableTimeStep`] when `alpha >= 1`. The exponential mode is
/// stable for all diameters; with drag disabled it degenerates to free fall.
pub fn step(state: &ParticleState, cfg: &PhysicsConfig) -> Result<ParticleState> {
    debug_assert!(state.alive, "step called on an absorbed particle");
    let alpha = drag_alpha(state.diameter, cfg);
    let [vx, vy, vz] = state.velocity;
    let velocity = match cfg.integrator {
        Integrator::ExplicitEuler => {
            if alpha >= 1.0 {
                return Err(Error::UnstableTimeStep {
                    alpha,
                    diameter: state.diameter,
                });
            }
            [
                vx - alpha * vx,
                vy - alpha * vy,
                vz - cfg.g * cfg.dt - alpha * vz,
            ]
        }
        Integrator::ExactExponential => {
            if alpha == 0.0 {
                [vx, vy, vz - cfg.g * cfg.dt]
            } else {
                let decay = (-alpha).exp();
                let v_inf = terminal_velocity(state.diameter, cfg);
                [vx * decay, vy * decay, (vz + v_inf) * decay - v_inf]
            }
        }
    };
    let position = [
        state.position[0] + velocity[0] * cfg.dt,
        state.position[1] + velocity[1] * cfg.dt,
        state.position[2] + velocity[2] * cfg.dt,
    ];
    Ok(ParticleState {
        position,
        velocity,
        diameter: state.diameter,
        alive: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> PhysicsConfig {
        PhysicsConfig::default()
    }

    fn particle(d: f64, v: [f64; 3]) -> ParticleState {
        ParticleState {
            position: [0.0; 3],
            velocity: v,
            diameter: d,
            alive: true,
        }
    }

    #[test]
    fn alpha_reference_values() {
        // 18 * 1.85e-5 * 1e-4 / (998 * (2e-5)^2)
        assert!((drag_alpha(20e-6, &cfg()) - 0.0834168).abs() < 1e-6);
        // alpha = 1 at d* = sqrt(18 eta dt / rho) ~ 5.78 um
        let d_star = (18.0 * 1.85e-5 * 1e-4 / 998.0_f64).sqrt();
        assert!((d_star - 5.78e-6).abs() < 0.01e-6);
        assert!((drag_alpha(d_star, &cfg()) - 1.0).abs() < 1e-12);
        // 2 um is deep in the unstable regime for the explicit update.
        assert!((drag_alpha(2e-6, &cfg()) - 8.3417).abs() < 1e-3);
    }

    #[test]
    fn alpha_linear_in_dt() {
        let halved = PhysicsConfig {
            dt: 0.5e-4,
            ..cfg()
        };
        assert!((drag_alpha(20e-6, &halved) - 0.5 * drag_alpha(20e-6, &cfg())).abs() < 1e-15);
    }

    #[test]
    fn euler_single_step_from_rest() {
        let cfg = PhysicsConfig {
            integrator: Integrator::ExplicitEuler,
            ..cfg()
        };
        let s0 = particle(20e-6, [1.0, 0.0, 0.0]);
        let alpha = drag_alpha(20e-6, &cfg);
        let s1 = step(&s0, &cfg).unwrap();
        assert!((s1.velocity[0] - (1.0 - alpha)).abs() < 1e-15);
        assert!((s1.velocity[2] - (-cfg.g * cfg.dt)).abs() < 1e-15);
    }

    #[test]
    fn euler_rejects_unstable_diameter() {
        let cfg = PhysicsConfig {
            integrator: Integrator::ExplicitEuler,
            ..cfg()
        };
        let s0 = particle(2e-6, [0.0, 0.0, 0.0]);
        match step(&s0, &cfg) {
            Err(Error::UnstableTimeStep { alpha, diameter }) => {
                assert!(alpha > 1.0);
                assert_eq!(diameter, 2e-6);
            }
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn exponential_settles_to_terminal_velocity() {
        let cfg = cfg();
        let d = 20e-6;
        let v_inf = terminal_velocity(d, &cfg);
        let alpha = drag_alpha(d, &cfg);
        let steps = (5.0 / alpha).ceil() as usize;
        let mut s = particle(d, [0.0, 0.0, 0.0]);
        for _ in 0..steps {
            s = step(&s, &cfg).unwrap();
        }
        let rel = (s.velocity[2] + v_inf).abs() / v_inf;
        assert!(rel < 0.01, "still {rel:.4} away after 5 time constants");
    }

    #[test]
    fn terminal_velocity_reference_values() {
        assert!((terminal_velocity(20e-6, &cfg()) - 0.0117602).abs() < 1e-6);
        assert!((terminal_velocity(2e-6, &cfg()) - 1.17602e-4).abs() < 1e-8);
        // Quadratic scaling.
        let v = terminal_velocity(50e-6, &cfg());
        assert!((terminal_velocity(100e-6, &cfg()) - 4.0 * v).abs() < 1e-12 * v);
    }

    #[test]
    fn terminal_velocity_identity_with_beta_and_mass() {
        let cfg = cfg();
        for &d in &[2e-6, 20e-6, 100e-6, 500e-6, 2000e-6] {
            let lhs = terminal_velocity(d, &cfg) * stokes_beta(d, &cfg);
            let rhs = particle_mass(d, &cfg) * cfg.g;
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn fall_time_reference_values() {
        assert!((fall_time(1.64, 20e-6, &cfg()) - 139.45).abs() < 0.01);
        let t = fall_time(1.0, 50e-6, &cfg());
        assert!((fall_time(2.0, 50e-6, &cfg()) - 2.0 * t).abs() < 1e-12 * t);
        assert!(fall_time(1.0, 100e-6, &cfg()) < fall_time(1.0, 50e-6, &cfg()));
    }

    #[test]
    fn memoryless_examples() {
        // Coughing once per minute, seated height: large droplets settle in
        // seconds, 20 um aerosols take minutes.
        assert!((fall_time(1.20, 100e-6, &cfg()) - 4.08).abs() < 0.01);
        assert!(is_memoryless(60.0, 1.20, 100e-6, &cfg()));
        assert!((fall_time(1.20, 20e-6, &cfg()) - 102.04).abs() < 0.01);
        assert!(!is_memoryless(60.0, 1.20, 20e-6, &cfg()));
        assert!(is_memoryless(f64::INFINITY, 1.20, 2e-6, &cfg()));
    }

    #[test]
    fn integrators_agree_for_small_alpha() {
        // d = 500 um puts alpha ~ 1.3e-4; over one second the two schemes'
        // trajectories should differ by well under 0.1% in final position.
        let d = 500e-6;
        let euler_cfg = PhysicsConfig {
            integrator: Integrator::ExplicitEuler,
            ..cfg()
        };
        let exact_cfg = cfg();
        assert!((drag_alpha(d, &exact_cfg) - 1.3347e-4).abs() < 1e-8);

        let start = particle(d, [5.0, 0.0, 0.0]);
        let steps = (1.0 / exact_cfg.dt) as usize;
        let mut a = start;
        let mut b = start;
        for _ in 0..steps {
            a = step(&a, &euler_cfg).unwrap();
            b = step(&b, &exact_cfg).unwrap();
        }
        let dist = |p: [f64; 3], q: [f64; 3]| {
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
        };
        let travelled = dist(b.position, start.position);
        assert!(dist(a.position, b.position) < 1e-3 * travelled);
    }

    #[test]
    fn drag_free_mode_is_free_fall() {
        let cfg = PhysicsConfig {
            viscosity: 0.0,
            ..cfg()
        };
        cfg.validate().unwrap();
        let mut s = particle(20e-6, [3.0, 0.0, 0.0]);
        for _ in 0..100 {
            s = step(&s, &cfg).unwrap();
        }
        assert_eq!(s.velocity[0], 3.0);
        assert!((s.velocity[2] + cfg.g * cfg.dt * 100.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        assert!(PhysicsConfig { dt: 0.0, ..cfg() }.validate().is_err());
        assert!(PhysicsConfig { g: -1.0, ..cfg() }.validate().is_err());
        assert!(PhysicsConfig {
            water_density: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn horizontal_speed_never_increases(
            d in 6e-6f64..2e-3,
            vx in -15.0f64..15.0,
            vy in -15.0f64..15.0,
            euler in any::<bool>(),
        ) {
            let cfg = PhysicsConfig {
                integrator: if euler { Integrator::ExplicitEuler } else { Integrator::ExactExponential },
                ..cfg()
            };
            // Skip unstable explicit configurations.
            prop_assume!(!euler || drag_alpha(d, &cfg) < 1.0);
            let mut s = particle(d, [vx, vy, 0.0]);
            let mut mag = (vx * vx + vy * vy).sqrt();
            for _ in 0..50 {
                s = step(&s, &cfg).unwrap();
                let m = (s.velocity[0] * s.velocity[0] + s.velocity[1] * s.velocity[1]).sqrt();
                prop_assert!(m <= mag + 1e-15);
                mag = m;
            }
        }

        #[test]
        fn exponential_vertical_velocity_is_bounded(
            d in 2e-6f64..2e-3,
            vz in -20.0f64..20.0,
        ) {
            let cfg = cfg();
            let v_inf = terminal_velocity(d, &cfg);
            let bound = vz.abs().max(v_inf) + 1e-12;
            let mut s = particle(d, [0.0, 0.0, vz]);
            let mut gap = (vz + v_inf).abs();
            for _ in 0..200 {
                s = step(&s, &cfg).unwrap();
                prop_assert!(s.velocity[2].abs() <= bound);
                // Settling: the distance to the terminal velocity shrinks monotonically.
                let g = (s.velocity[2] + v_inf).abs();
                prop_assert!(g <= gap + 1e-12);
                gap = g;
            }
        }
    }
}

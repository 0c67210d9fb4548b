//! Per-robot behaviour: climb the cue gradient, stop and clean on robot
//! contact, turn away after waiting or on wall contact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cue_field::MAX_INTENSITY;

/// Constant in the denominator of the waiting-time law.
pub const WAIT_SATURATION: f64 = 25_000.0;

/// Upper bound of a wheel command, in wheel units.
pub const WHEEL_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaitingFormula {
    /// `ω_max·S²/(S² + 25000)`; reaches ≈ 21.67 s at full intensity.
    #[default]
    Squared,
    /// `ω_max·S/(S² + 25000)`; peaks below 0.1 s.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Divisor on the sensor difference; lower values steer harder.
    pub alpha: f64,
    /// Wheel bias, in wheel units.
    pub beta: f64,
    /// Maximum waiting time in seconds.
    pub omega_max: f64,
    pub turn_min_deg: f64,
    pub turn_max_deg: f64,
    /// Heading rate used for in-place turns.
    pub turn_rate_deg_s: f64,
    pub waiting_formula: WaitingFormula,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 6.0,
            omega_max: 30.0,
            turn_min_deg: 90.0,
            turn_max_deg: 180.0,
            turn_rate_deg_s: 180.0,
            waiting_formula: WaitingFormula::Squared,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0) {
            return Err(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(0.0..=WHEEL_MAX).contains(&self.beta) {
            return Err(format!("beta must lie in [0, 10], got {}", self.beta));
        }
        if !(self.omega_max > 0.0) {
            return Err(format!("omega_max must be > 0, got {}", self.omega_max));
        }
        if !(self.turn_min_deg >= 0.0 && self.turn_min_deg <= self.turn_max_deg) {
            return Err(format!(
                "turn range [{}, {}] is empty or negative",
                self.turn_min_deg, self.turn_max_deg
            ));
        }
        if !(self.turn_rate_deg_s > 0.0) {
            return Err(format!("turn_rate_deg_s must be > 0, got {}", self.turn_rate_deg_s));
        }
        Ok(())
    }
}

/// Ground sensor values under the left and right wheels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorReading {
    pub left: f64,
    pub right: f64,
}

impl SensorReading {
    pub fn new(left: f64, right: f64) -> Self {
        Self {
            left: left.clamp(0.0, MAX_INTENSITY),
            right: right.clamp(0.0, MAX_INTENSITY),
        }
    }

    pub fn mean(&self) -> f64 {
        (self.left + self.right) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelCommand {
    pub left: f64,
    pub right: f64,
}

impl WheelCommand {
    pub const STOP: WheelCommand = WheelCommand { left: 0.0, right: 0.0 };
}

/// Controller stage. Turn angles are signed degrees, positive counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FsmState {
    Forward,
    AvoidWall { remaining_turn: f64 },
    Waiting { remaining: f64 },
    PostWaitTurn { remaining_turn: f64 },
}

impl FsmState {
    pub fn is_waiting(&self) -> bool {
        matches!(self, FsmState::Waiting { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Events {
    pub robot_contact: bool,
    pub wall_contact: bool,
}

impl Events {
    pub const NONE: Events = Events {
        robot_contact: false,
        wall_contact: false,
    };

    pub fn all_subsets() -> [Events; 4] {
        [
            Events::NONE,
            Events { robot_contact: true, wall_contact: false },
            Events { robot_contact: false, wall_contact: true },
            Events { robot_contact: true, wall_contact: true },
        ]
    }
}

/// What the robot does this tick. Turns are kinematic: the wheel range has
/// no reverse, so an in-place rotation cannot be expressed as wheel speeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Actuation {
    Wheels(WheelCommand),
    /// Heading change for this tick, radians, with no translation.
    Rotate(f64),
}

impl Actuation {
    pub fn wheels(&self) -> WheelCommand {
        match *self {
            Actuation::Wheels(w) => w,
            Actuation::Rotate(_) => WheelCommand::STOP,
        }
    }
}

/// Seconds to wait after a robot contact at mean intensity `mean_cue`.
pub fn waiting_time(mean_cue: f64, params: &ControllerParams) -> f64 {
    let s = mean_cue.clamp(0.0, MAX_INTENSITY);
    let numerator = match params.waiting_formula {
        WaitingFormula::Squared => s * s,
        WaitingFormula::Literal => s,
    };
    params.omega_max * numerator / (s * s + WAIT_SATURATION)
}

/// Differential steering law before clamping, as `(left, right)`.
pub fn wheel_speeds_unclamped(reading: SensorReading, params: &ControllerParams) -> (f64, f64) {
    let diff = (reading.left - reading.right) / params.alpha;
    (params.beta - diff, params.beta + diff)
}

pub fn wheel_speeds(reading: SensorReading, params: &ControllerParams) -> WheelCommand {
    let (l, r) = wheel_speeds_unclamped(reading, params);
    WheelCommand {
        left: l.clamp(0.0, WHEEL_MAX),
        right: r.clamp(0.0, WHEEL_MAX),
    }
}

/// Uniform magnitude in the configured range with an independent fair sign.
pub fn random_turn<R: Rng + ?Sized>(rng: &mut R, params: &ControllerParams) -> f64 {
    let magnitude = if params.turn_max_deg > params.turn_min_deg {
        rng.random_range(params.turn_min_deg..=params.turn_max_deg)
    } else {
        params.turn_min_deg
    };
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

fn turn_step(remaining: f64, dt: f64, params: &ControllerParams) -> (f64, f64) {
    let max_step = params.turn_rate_deg_s * dt;
    let step = remaining.signum() * remaining.abs().min(max_step);
    (remaining - step, step.to_radians())
}

/// Advances one robot's controller by `dt` seconds.
///
/// Only `Forward` reacts to events; robot contact wins over wall contact.
/// A new turn or wait starts on the following tick, so the transition tick
/// itself emits a stop.
pub fn step_fsm<R: Rng + ?Sized>(
    state: FsmState,
    reading: SensorReading,
    events: Events,
    dt: f64,
    rng: &mut R,
    params: &ControllerParams,
) -> (FsmState, Actuation) {
    debug_assert!(dt > 0.0);
    let stop = Actuation::Wheels(WheelCommand::STOP);
    match state {
        FsmState::Forward if events.robot_contact => (
            FsmState::Waiting {
                remaining: waiting_time(reading.mean(), params),
            },
            stop,
        ),
        FsmState::Forward if events.wall_contact => (
            FsmState::AvoidWall {
                remaining_turn: random_turn(rng, params),
            },
            stop,
        ),
        FsmState::Forward => (
            FsmState::Forward,
            Actuation::Wheels(wheel_speeds(reading, params)),
        ),
        FsmState::Waiting { remaining } => {
            let left = remaining - dt;
            if left > 0.0 {
                (FsmState::Waiting { remaining: left }, stop)
            } else {
                (
                    FsmState::PostWaitTurn {
                        remaining_turn: random_turn(rng, params),
                    },
                    stop,
                )
            }
        }
        FsmState::AvoidWall { remaining_turn } | FsmState::PostWaitTurn { remaining_turn } => {
            let (left, angle) = turn_step(remaining_turn, dt, params);
            let next = if left.abs() <= 1e-9 {
                FsmState::Forward
            } else if matches!(state, FsmState::AvoidWall { .. }) {
                FsmState::AvoidWall { remaining_turn: left }
            } else {
                FsmState::PostWaitTurn { remaining_turn: left }
            };
            (next, Actuation::Rotate(angle))
        }
    }
}

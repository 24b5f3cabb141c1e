//! Three-objective mountain car.
//!
//! Reward channels: 0 = time (-1 every step), 1 = backward acceleration
//! penalty, 2 = forward acceleration penalty. Reaching the goal adds a bonus
//! of 100 to the configured channels. Episodes start at rest at the valley
//! bottom and are capped at 2000 steps.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Encoder, Environment, RewardVector, Step};
use crate::error::{Error, Result};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const START_POSITION: f64 = -0.5;
pub const THRUST: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const STEP_CAP: usize = 2000;
pub const GOAL_BONUS: f32 = 100.0;

pub const TIME: usize = 0;
pub const BACKWARD: usize = 1;
pub const FORWARD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McAction {
    Backward = 0,
    None = 1,
    Forward = 2,
}

impl McAction {
    pub fn from_index(a: usize) -> Option<Self> {
        match a {
            0 => Some(McAction::Backward),
            1 => Some(McAction::None),
            2 => Some(McAction::Forward),
            _ => None,
        }
    }

    fn direction(self) -> f64 {
        match self {
            McAction::Backward => -1.0,
            McAction::None => 0.0,
            McAction::Forward => 1.0,
        }
    }
}

/// Which channels receive the goal bonus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusChannels {
    All,
    TimeOnly,
}

impl FromStr for BonusChannels {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(BonusChannels::All),
            "time" | "time_only" => Ok(BonusChannels::TimeOnly),
            other => Err(Error::config(format!("unknown goal_bonus_channels `{other}`"))),
        }
    }
}

impl std::fmt::Display for BonusChannels {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BonusChannels::All => "all",
            BonusChannels::TimeOnly => "time_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainCarConfig {
    pub step_cap: usize,
    pub bonus_channels: BonusChannels,
    pub encoder: Encoder,
}

impl Default for MountainCarConfig {
    fn default() -> Self {
        Self {
            step_cap: STEP_CAP,
            bonus_channels: BonusChannels::All,
            encoder: Encoder::Positional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
    pub step_count: usize,
}

/// One step of the car physics, with position and velocity clamped.
pub fn dynamics(position: f64, velocity: f64, action: McAction) -> (f64, f64) {
    let mut v = velocity + action.direction() * THRUST - GRAVITY * (3.0 * position).cos();
    v = v.clamp(-MAX_SPEED, MAX_SPEED);
    let p = (position + v).clamp(MIN_POSITION, MAX_POSITION);
    if p <= MIN_POSITION && v < 0.0 {
        v = 0.0;
    }
    (p, v)
}

pub fn encode(state: &MountainCarState, encoder: Encoder) -> Result<Vec<f32>> {
    match encoder {
        Encoder::Positional => {
            let span = MAX_POSITION - MIN_POSITION;
            let pos = 2.0 * (state.position - MIN_POSITION) / span - 1.0;
            Ok(vec![pos as f32, (state.velocity / MAX_SPEED) as f32])
        }
        Encoder::OneHot => Err(Error::config("onehot encoding is not defined for mountain car")),
    }
}

#[derive(Debug, Clone)]
pub struct MountainCar {
    config: MountainCarConfig,
    state: MountainCarState,
    done: bool,
}

impl MountainCar {
    pub fn new(config: MountainCarConfig) -> Result<Self> {
        if config.encoder == Encoder::OneHot {
            return Err(Error::config("onehot encoding is not defined for mountain car"));
        }
        if config.step_cap == 0 {
            return Err(Error::config("step cap must be >= 1"));
        }
        Ok(Self {
            config,
            state: Self::start(),
            done: false,
        })
    }

    fn start() -> MountainCarState {
        MountainCarState {
            position: START_POSITION,
            velocity: 0.0,
            step_count: 0,
        }
    }

    pub fn state(&self) -> MountainCarState {
        self.state
    }

    /// Places the car at an arbitrary state (for tests and probes).
    pub fn set_state(&mut self, state: MountainCarState) {
        self.state = state;
        self.done = false;
    }
}

impl Environment for MountainCar {
    fn num_objectives(&self) -> usize {
        3
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn observation_dim(&self) -> usize {
        2
    }

    fn observe(&self) -> Vec<f32> {
        encode(&self.state, self.config.encoder).expect("encoder validated at construction")
    }

    fn reset(&mut self) {
        self.state = Self::start();
        self.done = false;
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeState("mountain car episode already finished".into()));
        }
        let act = McAction::from_index(action)
            .ok_or_else(|| Error::config(format!("mountain car action {action} out of range")))?;
        let (p, v) = dynamics(self.state.position, self.state.velocity, act);
        self.state = MountainCarState {
            position: p,
            velocity: v,
            step_count: self.state.step_count + 1,
        };

        let mut r = [-1.0f32, 0.0, 0.0];
        match act {
            McAction::Backward => r[BACKWARD] = -1.0,
            McAction::Forward => r[FORWARD] = -1.0,
            McAction::None => {}
        }
        let terminal = p >= GOAL_POSITION;
        if terminal {
            match self.config.bonus_channels {
                BonusChannels::All => r.iter_mut().for_each(|x| *x += GOAL_BONUS),
                BonusChannels::TimeOnly => r[TIME] += GOAL_BONUS,
            }
        }
        let truncated = !terminal && self.state.step_count >= self.config.step_cap;
        self.done = terminal || truncated;
        Ok(Step {
            rewards: RewardVector(r.to_vec()),
            terminal,
            truncated,
        })
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn steps(&self) -> usize {
        self.state.step_count
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn gravity_from_rest() {
        let (_, v) = dynamics(-0.5, 0.0, McAction::None);
        // -0.0025 * cos(-1.5)
        assert!((v - (-1.768_430_041_692_573e-4)).abs() < 1e-15, "{v}");
    }

    #[test]
    fn non_goal_step_rewards() {
        let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
        let s = env.step(McAction::None as usize).unwrap();
        assert_eq!(s.rewards.as_slice(), &[-1.0, 0.0, 0.0]);
        let s = env.step(McAction::Backward as usize).unwrap();
        assert_eq!(s.rewards.as_slice(), &[-1.0, -1.0, 0.0]);
        let s = env.step(McAction::Forward as usize).unwrap();
        assert_eq!(s.rewards.as_slice(), &[-1.0, 0.0, -1.0]);
    }

    #[test]
    fn goal_bonus_channels() {
        let near_goal = MountainCarState {
            position: 0.499,
            velocity: 0.05,
            step_count: 10,
        };
        let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
        env.set_state(near_goal);
        let s = env.step(McAction::Forward as usize).unwrap();
        assert!(s.terminal);
        assert_eq!(s.rewards.as_slice(), &[99.0, 100.0, 99.0]);

        let mut env = MountainCar::new(MountainCarConfig {
            bonus_channels: BonusChannels::TimeOnly,
            ..Default::default()
        })
        .unwrap();
        env.set_state(near_goal);
        let s = env.step(McAction::Forward as usize).unwrap();
        assert_eq!(s.rewards.as_slice(), &[99.0, 0.0, -1.0]);
        assert!(env.step(0).is_err());
    }

    #[test]
    fn step_cap_truncates() {
        let mut env = MountainCar::new(MountainCarConfig {
            step_cap: 5,
            ..Default::default()
        })
        .unwrap();
        for _ in 0..4 {
            assert!(!env.step(1).unwrap().done());
        }
        let last = env.step(1).unwrap();
        assert!(last.truncated && !last.terminal);
        assert!(matches!(env.step(1), Err(Error::EpisodeState(_))));
    }

    #[test]
    fn left_wall_stops_car() {
        let (p, v) = dynamics(-1.19, -0.07, McAction::Backward);
        assert_eq!(p, MIN_POSITION);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn encoding_bounds() {
        let s = MountainCarState {
            position: MAX_POSITION,
            velocity: -MAX_SPEED,
            step_count: 0,
        };
        assert_eq!(encode(&s, Encoder::Positional).unwrap(), vec![1.0, -1.0]);
        let s = MountainCarState {
            position: MIN_POSITION,
            velocity: 0.0,
            step_count: 0,
        };
        assert_eq!(encode(&s, Encoder::Positional).unwrap(), vec![-1.0, 0.0]);
        assert!(encode(&s, Encoder::OneHot).is_err());
        assert!(MountainCar::new(MountainCarConfig {
            encoder: Encoder::OneHot,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn random_rollouts_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
        for _ in 0..3 {
            env.reset();
            while !env.is_done() {
                env.step(rng.random_range(0..3)).unwrap();
                let s = env.state();
                assert!((MIN_POSITION..=MAX_POSITION).contains(&s.position));
                assert!((-MAX_SPEED..=MAX_SPEED).contains(&s.velocity));
            }
            assert!(env.steps() <= STEP_CAP);
        }
    }
}

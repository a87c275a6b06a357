// SPDX-License-Identifier: Apache-2.0

//! Navigation episodes: reset, composite step (move, first-person capture,
//! reward) and termination.

use crate::render::{render_first_person, Image, RenderError, RenderMode, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::world::{
    apply_move, compass_bearing, horizontal_distance, Action, RobotKind, ThermalSource, TraceRecorder, World,
    WorldError,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub robot_id: String,
    pub goal_radius_m: f64,
    pub max_steps: u32,
    pub step_penalty: f64,
    pub collision_penalty: f64,
    pub terminal_bonus: f64,
    pub obs_width: usize,
    pub obs_height: usize,
    pub obs_mode: RenderMode,
}

impl EnvConfig {
    pub fn new(robot_id: impl Into<String>) -> Self {
        Self {
            robot_id: robot_id.into(),
            goal_radius_m: 0.5,
            max_steps: 500,
            step_penalty: 0.01,
            collision_penalty: 0.05,
            terminal_bonus: 1.0,
            obs_width: DEFAULT_WIDTH,
            obs_height: DEFAULT_HEIGHT,
            obs_mode: RenderMode::Lit,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::Config(m.to_string()));
        if !(self.goal_radius_m > 0.0) {
            return bad("goal_radius_m must be > 0");
        }
        if self.max_steps < 1 {
            return bad("max_steps must be >= 1");
        }
        if !(self.step_penalty >= 0.0 && self.collision_penalty >= 0.0) {
            return bad("penalties must be >= 0");
        }
        if !self.terminal_bonus.is_finite() {
            return bad("terminal_bonus must be finite");
        }
        Ok(())
    }

    /// `(d_prev − d_cur) − step_penalty − collision_penalty·collided + terminal_bonus·reached`
    pub fn reward(&self, d_prev: f64, d_cur: f64, collided: bool, reached: bool) -> f64 {
        let mut r = (d_prev - d_cur) - self.step_penalty;
        if collided {
            r -= self.collision_penalty;
        }
        if reached {
            r += self.terminal_bonus;
        }
        r
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid env config: {0}")]
    Config(String),
    #[error("action {id} is not available to {kind} robots")]
    Action { id: u32, kind: &'static str },
    #[error("episode not running; send vset /env/reset")]
    NeedsReset,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Action ids: 0 forward, 1 backward, 2 turn_left, 3 turn_right, and for
/// aerial robots 4 up, 5 down.
pub fn action_from_id(id: u32, kind: RobotKind) -> Result<Action, EnvError> {
    let a = match id {
        0 => Action::Forward,
        1 => Action::Backward,
        2 => Action::TurnLeft,
        3 => Action::TurnRight,
        4 if kind == RobotKind::Aerial => Action::Up,
        5 if kind == RobotKind::Aerial => Action::Down,
        _ => return Err(EnvError::Action { id, kind: kind.as_str() }),
    };
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub distance_m: f64,
    pub collided: bool,
    pub steps: u32,
    pub bearing_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Image,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Outcome of the motion half of a step, before the observation is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Episode bookkeeping for one robot.
#[derive(Debug, Clone)]
pub struct Episode {
    pub config: EnvConfig,
    pub steps: u32,
    pub running: bool,
}

impl Episode {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self { config, steps: 0, running: false })
    }

    pub fn observe(&self, world: &World, thermal: &dyn ThermalSource) -> Result<Image, EnvError> {
        let c = &self.config;
        let robot = world.robot(&c.robot_id)?;
        Ok(render_first_person(&world.map, thermal, robot, c.obs_mode, c.obs_width, c.obs_height)?)
    }

    /// Teleports the robot to its spawn and starts a new episode. The
    /// observation is taken separately with [`Episode::observe`].
    pub fn reset_world(&mut self, world: &mut World, traces: Option<&mut TraceRecorder>) -> Result<(), EnvError> {
        world.respawn(&self.config.robot_id)?;
        if let Some(t) = traces {
            if world.robot(&self.config.robot_id)?.trace_enabled {
                t.truncate(&self.config.robot_id);
            }
        }
        self.steps = 0;
        self.running = true;
        Ok(())
    }

    pub fn reset(
        &mut self,
        world: &mut World,
        thermal: &dyn ThermalSource,
        traces: Option<&mut TraceRecorder>,
    ) -> Result<Image, EnvError> {
        self.reset_world(world, traces)?;
        self.observe(world, thermal)
    }

    /// Applies an action and scores it.
    pub fn advance(&mut self, world: &mut World, action_id: u32) -> Result<StepOutcome, EnvError> {
        if !self.running {
            return Err(EnvError::NeedsReset);
        }
        let c = &self.config;
        let target = world.map.target;
        let robot = world.robot(&c.robot_id)?;
        let action = action_from_id(action_id, robot.kind)?;
        let d_prev = horizontal_distance(&robot.pose, target.x_m, target.y_m);
        let out = apply_move(robot, action, &world.map).map_err(WorldError::from)?;
        world.robot_mut(&c.robot_id)?.pose = out.pose;
        let d_cur = horizontal_distance(&out.pose, target.x_m, target.y_m);
        let reached = d_cur <= c.goal_radius_m;
        self.steps += 1;
        let done = reached || self.steps >= c.max_steps;
        if done {
            self.running = false;
        }
        Ok(StepOutcome {
            reward: c.reward(d_prev, d_cur, out.collided, reached),
            done,
            info: StepInfo {
                distance_m: d_cur,
                collided: out.collided,
                steps: self.steps,
                bearing_deg: compass_bearing(&out.pose, target.x_m, target.y_m),
            },
        })
    }

    pub fn step(&mut self, world: &mut World, thermal: &dyn ThermalSource, action_id: u32) -> Result<StepResult, EnvError> {
        let o = self.advance(world, action_id)?;
        Ok(StepResult { observation: self.observe(world, thermal)?, reward: o.reward, done: o.done, info: o.info })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{load_map, NoThermal};
    use std::sync::Arc;

    /// Corridor along x with the target at (3.5, 1.5) and a spawn at (1.5, 1.5).
    fn corridor() -> World {
        let doc = serde_json::json!({
            "width": 6, "height": 3,
            "rows": ["WWWWWW", "WFFFFW", "WWWWWW"],
            "target": {"x": 3.5, "y": 1.5, "radius_m": 0.5},
            "spawns": {"r": {"x": 1.5, "y": 1.5, "yaw_deg": 0}},
        });
        World::new(Arc::new(load_map(&doc.to_string()).unwrap()))
    }

    fn env(w: &mut World) -> Episode {
        let mut cfg = EnvConfig::new("r");
        cfg.obs_width = 16;
        cfg.obs_height = 9;
        let mut e = Episode::new(cfg).unwrap();
        e.reset(w, &NoThermal, None).unwrap();
        e
    }

    #[test]
    fn reward_formula() {
        let c = EnvConfig::new("r");
        assert_eq!(c.reward(3.0, 3.0, false, false), -0.01);
        assert_eq!(c.reward(3.0, 3.0, true, false), -0.01 - 0.05);
        assert!((c.reward(0.6, 0.4, false, true) - 1.19).abs() < 1e-12);
    }

    #[test]
    fn forward_toward_target() {
        let mut w = corridor();
        let mut e = env(&mut w);
        let r = e.step(&mut w, &NoThermal, 0).unwrap();
        assert!((r.reward - 0.99).abs() < 1e-12, "{}", r.reward);
        assert!(!r.done);
        assert_eq!(r.info.distance_m, 1.0);
        assert_eq!((r.observation.width, r.observation.height), (16, 9));
        let r = e.step(&mut w, &NoThermal, 0).unwrap();
        assert!((r.reward - 1.99).abs() < 1e-12);
        assert!(r.done);
        assert!(matches!(e.step(&mut w, &NoThermal, 0), Err(EnvError::NeedsReset)));
    }

    #[test]
    fn wall_collision_penalty() {
        let mut w = corridor();
        let mut e = env(&mut w);
        e.step(&mut w, &NoThermal, 2).unwrap();
        e.step(&mut w, &NoThermal, 2).unwrap();
        e.step(&mut w, &NoThermal, 2).unwrap();
        e.step(&mut w, &NoThermal, 2).unwrap();
        e.step(&mut w, &NoThermal, 2).unwrap();
        let r = e.step(&mut w, &NoThermal, 2).unwrap();
        assert_eq!(r.reward, -0.01);
        let r = e.step(&mut w, &NoThermal, 0).unwrap();
        assert!(r.info.collided);
        assert_eq!(r.reward, -0.01 - 0.05);
    }

    #[test]
    fn budget_and_reset() {
        let mut w = corridor();
        let mut cfg = EnvConfig::new("r");
        cfg.max_steps = 3;
        let mut e = Episode::new(cfg).unwrap();
        assert!(matches!(e.advance(&mut w, 2), Err(EnvError::NeedsReset)));
        let a = e.reset(&mut w, &NoThermal, None).unwrap();
        let b = e.reset(&mut w, &NoThermal, None).unwrap();
        assert_eq!(a, b);
        assert!(!e.advance(&mut w, 2).unwrap().done);
        assert!(!e.advance(&mut w, 2).unwrap().done);
        assert!(e.advance(&mut w, 2).unwrap().done);
        e.reset_world(&mut w, None).unwrap();
        assert_eq!(e.steps, 0);
        assert_eq!(w.robot("r").unwrap().pose, w.map.spawns["r"].pose);
    }

    #[test]
    fn aerial_actions_only_for_aerial() {
        assert!(action_from_id(4, RobotKind::Wheeled).is_err());
        assert_eq!(action_from_id(5, RobotKind::Aerial).unwrap(), Action::Down);
        assert!(action_from_id(6, RobotKind::Aerial).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = EnvConfig::new("r");
        c.goal_radius_m = 0.0;
        assert!(c.validate().is_err());
        let mut c = EnvConfig::new("r");
        c.step_penalty = -1.0;
        assert!(c.validate().is_err());
    }
}

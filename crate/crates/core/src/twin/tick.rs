// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::io;
use std::sync::atomic::Ordering;
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::{Envelope, Op, Shared, Snapshot, TwinConfig};
use crate::bridge::{Command, Reply};
use crate::decimal::format_value;
use crate::env::{EnvConfig, EnvError, Episode};
use crate::mirror::{ClockMode, Generation, MirrorLink};
use crate::render::TopdownRecorder;
use crate::world::{spawn_swarm, Action, SessionId, SwarmError, World, WorldError};

/// Result of applying one command; observations are rendered after the
/// tick so they show the world the step produced.
enum Pending {
    Done(Reply),
    /// Sim time after the command's ticks.
    Time,
    Observe { robot: String, head: String },
}

struct TickLoop {
    shared: Arc<Shared>,
    world: World,
    t_ms: u64,
    tick: u64,
    tick_ms: u64,
    mode: ClockMode,
    seed: u64,
    plant: Arc<Generation>,
    link: Option<MirrorLink>,
    recorder: Option<TopdownRecorder>,
    episodes: HashMap<String, Episode>,
}

pub(super) fn spawn(
    shared: Arc<Shared>,
    rx: Receiver<Envelope>,
    world: World,
    config: &TwinConfig,
    link: Option<MirrorLink>,
) -> io::Result<JoinHandle<()>> {
    let recorder = config.record_dir.as_ref().map(|d| TopdownRecorder::new(d, config.topdown_interval_ms, 0));
    let mut tl = TickLoop {
        plant: shared.cache.generation(),
        shared,
        world,
        t_ms: 0,
        tick: 0,
        tick_ms: config.tick_ms,
        mode: config.mode,
        seed: config.seed,
        link,
        recorder,
        episodes: HashMap::new(),
    };
    thread::Builder::new().name("twin-tick".into()).spawn(move || {
        match tl.mode {
            ClockMode::Rt => tl.run_rt(rx),
            ClockMode::Lockstep => tl.run_lockstep(rx),
        }
    })
}

fn world_error(e: WorldError) -> Reply {
    match e {
        WorldError::UnknownRobot(id) => Reply::error(404, format!("unknown robot {id}")),
        WorldError::NotPossessed(id) => Reply::error(403, format!("robot {id} is not possessed by this session")),
        WorldError::Conflict { robot, holder } => {
            Reply::error(409, format!("robot {robot} is possessed by session {holder}"))
        }
        WorldError::Move(m) => Reply::error(400, m.to_string()),
    }
}

fn env_error(e: EnvError) -> Reply {
    match e {
        EnvError::World(w) => world_error(w),
        EnvError::NeedsReset => Reply::error(409, e.to_string()),
        EnvError::Action { .. } | EnvError::Config(_) => Reply::error(400, e.to_string()),
        EnvError::Render(r) => Reply::error(500, r.to_string()),
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

impl TickLoop {
    fn stopping(&self) -> bool {
        self.shared.stop.load(Ordering::Acquire)
    }

    fn run_rt(&mut self, rx: Receiver<Envelope>) {
        let period = Duration::from_millis(self.tick_ms);
        let mut next = Instant::now() + period;
        while !self.stopping() {
            let now = Instant::now();
            if now < next {
                thread::sleep((next - now).min(Duration::from_millis(20)));
                continue;
            }
            let started = Instant::now();
            let mut waiting: Vec<(Sender<Reply>, Pending)> = Vec::new();
            while let Ok(env) = rx.try_recv() {
                let Envelope { session, op, reply } = env;
                let pending = self.apply(session, op);
                if let (Some(tx), Some(p)) = (reply, pending) {
                    waiting.push((tx, p));
                }
            }
            self.run_tick(self.tick_ms);
            self.publish();
            for (tx, p) in waiting {
                let _ = tx.send(self.finish(p));
            }
            let work = started.elapsed();
            if work > period {
                log::warn!("tick {} overran: {} ms of work for a {} ms tick", self.tick, work.as_millis(), self.tick_ms);
            }
            next += period;
        }
    }

    fn run_lockstep(&mut self, rx: Receiver<Envelope>) {
        loop {
            let env = match rx.recv_timeout(Duration::from_millis(50)) {
                Ok(env) => env,
                Err(RecvTimeoutError::Timeout) if self.stopping() => return,
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => return,
            };
            let Envelope { session, op, reply } = env;
            let ticks = match &op {
                Op::Command(Command::EnvStep(_)) => Some(self.tick_ms),
                Op::Command(Command::SimAdvance(ms)) => Some(*ms),
                _ => None,
            };
            let pending = self.apply(session, op);
            let stepped = matches!(pending, Some(Pending::Observe { .. } | Pending::Time));
            if let (Some(mut remaining), true) = (ticks, stepped) {
                while remaining > 0 {
                    let dt = remaining.min(self.tick_ms);
                    self.run_tick(dt);
                    remaining -= dt;
                }
            }
            self.publish();
            if let (Some(tx), Some(p)) = (reply, pending) {
                let _ = tx.send(self.finish(p));
            }
        }
    }

    fn run_tick(&mut self, dt: u64) {
        self.t_ms += dt;
        self.tick += 1;
        if let Some(link) = self.link.as_mut() {
            if let Err(e) = link.sync_once(Some(dt)) {
                log::warn!("plant sync failed at t={} ms: {e}", self.t_ms);
            }
        }
        self.plant = self.shared.cache.generation();
        let traces = &mut *self.shared.traces.lock().unwrap();
        for w in traces.record(&mut self.world, self.t_ms) {
            log::warn!("{w}");
        }
        if let Some(rec) = self.recorder.as_mut() {
            if rec.stopped().is_none() {
                if let Err(e) = rec.on_tick(&self.world, self.plant.as_ref(), Some(traces), self.t_ms) {
                    log::error!("top-down recorder stopped: {e}");
                }
            }
        }
    }

    fn publish(&self) {
        let snap = Snapshot {
            tick: self.tick,
            t_ms: self.t_ms,
            world: self.world.clone(),
            plant: self.plant.clone(),
            plant_connected: self.shared.cache.is_connected(),
        };
        *self.shared.snapshot.write().unwrap() = Arc::new(snap);
    }

    fn finish(&self, p: Pending) -> Reply {
        match p {
            Pending::Done(r) => r,
            Pending::Time => Reply::ok(self.t_ms.to_string()),
            Pending::Observe { robot, head } => {
                let Some(ep) = self.episodes.get(&robot) else {
                    return Reply::error(404, format!("unknown robot {robot}"));
                };
                match ep.observe(&self.world, self.plant.as_ref()) {
                    Ok(image) => Reply::Image { head, image },
                    Err(e) => env_error(e),
                }
            }
        }
    }

    fn possessed(&self, session: SessionId) -> Result<String, Reply> {
        self.world
            .possessed_by(session)
            .map(|r| r.id.clone())
            .ok_or_else(|| Reply::error(403, "this session does not possess a robot"))
    }

    fn apply(&mut self, session: SessionId, op: Op) -> Option<Pending> {
        let cmd = match op {
            Op::Disconnect => {
                self.world.release_session(session);
                return None;
            }
            Op::Command(c) => c,
        };
        let done = |r: Reply| Some(Pending::Done(r));
        match cmd {
            Command::RobotAction(id, action) => match self.world.command_move(session, &id, action) {
                Ok(out) => {
                    let p = out.pose;
                    let text = match action {
                        Action::TurnLeft | Action::TurnRight => format_value(p.yaw_deg),
                        _ => format!(
                            "{} {} {} {}",
                            format_value(p.x_m),
                            format_value(p.y_m),
                            format_value(p.z_m),
                            flag(out.collided)
                        ),
                    };
                    done(Reply::ok(text))
                }
                Err(e) => done(world_error(e)),
            },
            Command::SetTrace(id, on) => match self.world.robot_mut(&id) {
                Ok(r) => {
                    r.trace_enabled = on;
                    done(Reply::ok(if on { "on" } else { "off" }))
                }
                Err(e) => done(world_error(e)),
            },
            Command::Possess(id) => match self.world.possess(session, &id) {
                Ok(_) => done(Reply::ok(id)),
                Err(e) => done(world_error(e)),
            },
            Command::EnvReset => {
                let robot = match self.possessed(session) {
                    Ok(r) => r,
                    Err(e) => return done(e),
                };
                let ep = match self.episodes.get_mut(&robot) {
                    Some(ep) => ep,
                    None => {
                        let ep = Episode::new(EnvConfig::new(robot.clone())).expect("default env config is valid");
                        self.episodes.entry(robot.clone()).or_insert(ep)
                    }
                };
                let mut traces = self.shared.traces.lock().unwrap();
                match ep.reset_world(&mut self.world, Some(&mut traces)) {
                    Ok(()) => Some(Pending::Observe { robot, head: String::new() }),
                    Err(e) => done(env_error(e)),
                }
            }
            Command::EnvStep(action) => {
                let robot = match self.possessed(session) {
                    Ok(r) => r,
                    Err(e) => return done(e),
                };
                let Some(ep) = self.episodes.get_mut(&robot) else {
                    return done(env_error(EnvError::NeedsReset));
                };
                match ep.advance(&mut self.world, action) {
                    Ok(o) => Some(Pending::Observe {
                        robot,
                        head: format!("{} {} {}", format_value(o.reward), flag(o.done), format_value(o.info.distance_m)),
                    }),
                    Err(e) => done(env_error(e)),
                }
            }
            Command::SimAdvance(_) => match self.mode {
                ClockMode::Lockstep => Some(Pending::Time),
                ClockMode::Rt => done(Reply::error(409, "advance is only available in lockstep mode")),
            },
            Command::SwarmSpawn { n, zone } => match spawn_swarm(&mut self.world, n, &zone, self.seed) {
                Ok(ids) => {
                    self.episodes.retain(|id, _| !id.starts_with("swarm_"));
                    done(Reply::ok(ids.join(" ")))
                }
                Err(e @ SwarmError::UnknownZone(_)) => done(Reply::error(404, e.to_string())),
                Err(e @ SwarmError::Capacity { .. }) => done(Reply::error(409, e.to_string())),
                Err(e @ SwarmError::Size(_)) => done(Reply::error(400, e.to_string())),
            },
            other => done(Reply::error(500, format!("{other} is not a tick-loop command"))),
        }
    }
}

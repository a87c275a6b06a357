// SPDX-License-Identifier: Apache-2.0

//! The eight profiled operations, each with a postcondition checked outside
//! the timed region.

use std::fmt;
use std::net::SocketAddr;
use std::thread;
use std::time::{Duration, Instant};

use npptwin::bridge::{BridgeClient, Reply};
use npptwin::mirror::MirrorClient;
use npptwin::plant::{Access, VariableDescriptor};
use npptwin::render::{Image, DEFAULT_HEIGHT, DEFAULT_WIDTH};

pub const BATCH: usize = 100;
pub const ROBOT: &str = "r1";
/// Steps taken before the harness resets an episode on its own, below the
/// 500-step budget.
const STEP_BUDGET: u32 = 450;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    MirrorMset,
    MirrorMget,
    CameraRead,
    EnvStep,
    EnvReset,
    Move,
    ThermalToggle,
    TopdownCapture,
}

impl Operation {
    pub const ALL: [Operation; 8] = [
        Operation::MirrorMset,
        Operation::MirrorMget,
        Operation::CameraRead,
        Operation::EnvStep,
        Operation::EnvReset,
        Operation::Move,
        Operation::ThermalToggle,
        Operation::TopdownCapture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::MirrorMset => "mirror_mset_100",
            Operation::MirrorMget => "mirror_mget_100",
            Operation::CameraRead => "camera_read",
            Operation::EnvStep => "env_step",
            Operation::EnvReset => "env_reset",
            Operation::Move => "move",
            Operation::ThermalToggle => "thermal_toggle",
            Operation::TopdownCapture => "topdown_capture",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Operation::MirrorMset => "Mirror write (MSET 100)",
            Operation::MirrorMget => "Mirror read (MGET 100)",
            Operation::CameraRead => "Camera read",
            Operation::EnvStep => "Env step",
            Operation::EnvReset => "Env reset",
            Operation::Move => "Robot move",
            Operation::ThermalToggle => "Thermal vision",
            Operation::TopdownCapture => "Top-down capture",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Setpoints the MSET batch cycles through; the nominal operating point.
const SETPOINTS: [(&str, f64); 8] = [
    ("cond_cw_in_c", 20.0),
    ("rcp1_speed", 1.0),
    ("rcp2_speed", 1.0),
    ("rod_position", 1.0),
    ("sg1_feed_valve", 0.8),
    ("sg2_feed_valve", 0.8),
    ("turbine_throttle", 1.0),
    ("cond_cw_in_c", 20.0),
];

/// One client of both services, possessing [`ROBOT`] with an episode open.
pub struct Session {
    mirror: MirrorClient,
    bridge: BridgeClient,
    descriptors: Vec<VariableDescriptor>,
    read_batch: Vec<String>,
    spawn_location: String,
    steps: u32,
    /// Delay slept after each top-down capture and subtracted from it.
    pub topdown_delay: Duration,
}

fn image(reply: Reply, what: &str) -> Result<(String, Image), String> {
    match reply {
        Reply::Image { head, image } => {
            if image.pixels.len() != 3 * image.width * image.height || image.width == 0 {
                return Err(format!("{what}: inconsistent image {}x{}", image.width, image.height));
            }
            Ok((head, image))
        }
        Reply::Text(t) => Err(format!("{what}: expected an image, got text {t:?}")),
        Reply::Error { code, message } => Err(format!("{what}: error {code} {message}")),
    }
}

fn text(reply: Reply, what: &str) -> Result<String, String> {
    match reply {
        Reply::Text(t) => Ok(t),
        Reply::Image { .. } => Err(format!("{what}: unexpected image")),
        Reply::Error { code, message } => Err(format!("{what}: error {code} {message}")),
    }
}

fn is_thermal(px: &[u8]) -> bool {
    px[1] == 0 && px[0] as u16 + px[2] as u16 == 255
}

impl Session {
    pub fn open(plant: SocketAddr, twin: SocketAddr) -> Result<Self, String> {
        let mut mirror = MirrorClient::connect(plant).map_err(|e| format!("plant at {plant}: {e}"))?;
        let descriptors = mirror.list().map_err(|e| format!("plant LIST: {e}"))?;
        if descriptors.len() < BATCH {
            return Err(format!("plant lists {} variables, need {BATCH}", descriptors.len()));
        }
        for (name, _) in SETPOINTS {
            match descriptors.iter().find(|d| d.name == name) {
                Some(d) if d.access == Access::ReadWrite => {}
                _ => return Err(format!("plant does not offer writable {name}")),
            }
        }
        let read_batch = descriptors.iter().take(BATCH).map(|d| d.name.clone()).collect();
        let mut bridge = BridgeClient::connect(twin).map_err(|e| format!("twin at {twin}: {e}"))?;
        let possess = bridge.request(&format!("vset /session/possess {ROBOT}")).map_err(|e| e.to_string())?;
        text(possess, "possess")?;
        let spawn_location = {
            let r = bridge.request(&format!("vget /robot/{ROBOT}/location")).map_err(|e| e.to_string())?;
            text(r, "location")?
        };
        let mut s = Self {
            mirror,
            bridge,
            descriptors,
            read_batch,
            spawn_location,
            steps: 0,
            topdown_delay: Duration::ZERO,
        };
        s.reset()?;
        Ok(s)
    }

    fn request(&mut self, cmd: &str) -> Result<Reply, String> {
        self.bridge.request(cmd).map_err(|e| format!("{cmd}: {e}"))
    }

    fn reset(&mut self) -> Result<Image, String> {
        let r = self.request("vset /env/reset")?;
        self.steps = 0;
        image(r, "env reset").map(|(_, img)| img)
    }

    pub fn sim_time_ms(&mut self) -> Result<u64, String> {
        let r = self.request("vget /sim/time")?;
        text(r, "sim time")?.parse().map_err(|e| format!("sim time: {e}"))
    }

    pub fn plant_time_ms(&mut self) -> Result<u64, String> {
        self.mirror.tick().map_err(|e| format!("TICK: {e}"))
    }

    /// Runs `op` once. The returned duration covers only the operation
    /// itself (minus the configured delay for top-down captures).
    pub fn run(&mut self, op: Operation, i: usize) -> Result<Duration, String> {
        match op {
            Operation::MirrorMset => {
                // alternate between two setpoint sets so a lost write is visible
                let nudge = if i % 2 == 1 { 0.001 } else { 0.0 };
                let pairs: Vec<(String, f64)> =
                    (0..BATCH).map(|k| (SETPOINTS[k % 8].0.to_string(), SETPOINTS[k % 8].1 - nudge)).collect();
                let t0 = Instant::now();
                let applied = self.mirror.mset(&pairs).map_err(|e| format!("MSET: {e}"))?;
                let dt = t0.elapsed();
                if applied.len() != BATCH || applied.iter().zip(&pairs).any(|(a, p)| *a != p.1) {
                    return Err(format!("MSET echoed {} values that differ from the request", applied.len()));
                }
                let names: Vec<String> = SETPOINTS[..7].iter().map(|s| s.0.to_string()).collect();
                let read = self.mirror.mget(&names).map_err(|e| format!("MGET after MSET: {e}"))?;
                for (k, v) in read.iter().enumerate() {
                    if *v != SETPOINTS[k].1 - nudge {
                        return Err(format!("{} reads {v} after writing {}", names[k], SETPOINTS[k].1 - nudge));
                    }
                }
                Ok(dt)
            }
            Operation::MirrorMget => {
                let t0 = Instant::now();
                let vals = self.mirror.mget(&self.read_batch).map_err(|e| format!("MGET: {e}"))?;
                let dt = t0.elapsed();
                if vals.len() != BATCH {
                    return Err(format!("MGET returned {} values", vals.len()));
                }
                for (v, d) in vals.iter().zip(&self.descriptors) {
                    if !(v.is_finite() && *v >= d.min && *v <= d.max) {
                        return Err(format!("{} = {v} outside [{}, {}]", d.name, d.min, d.max));
                    }
                }
                Ok(dt)
            }
            Operation::CameraRead => {
                let cmd = format!("vget /camera/{ROBOT}/lit {DEFAULT_WIDTH} {DEFAULT_HEIGHT}");
                let t0 = Instant::now();
                let r = self.request(&cmd)?;
                let dt = t0.elapsed();
                let (_, img) = image(r, "camera")?;
                if (img.width, img.height) != (DEFAULT_WIDTH, DEFAULT_HEIGHT) {
                    return Err(format!("camera returned {}x{}", img.width, img.height));
                }
                Ok(dt)
            }
            Operation::EnvStep => {
                if self.steps >= STEP_BUDGET {
                    self.reset()?;
                }
                // turning in place keeps the distance, so every reward is the step penalty
                let action = 2 + (i % 2);
                let t0 = Instant::now();
                let r = self.request(&format!("vrun /env/step {action}"))?;
                let dt = t0.elapsed();
                self.steps += 1;
                let (head, img) = image(r, "env step")?;
                let f: Vec<&str> = head.split(' ').collect();
                if f.len() != 3 || f[0] != "-0.01" || f[1] != "0" {
                    return Err(format!("env step head {head:?}, expected \"-0.01 0 <distance>\""));
                }
                if (img.width, img.height) != (DEFAULT_WIDTH, DEFAULT_HEIGHT) {
                    return Err(format!("observation {}x{}", img.width, img.height));
                }
                Ok(dt)
            }
            Operation::EnvReset => {
                let t0 = Instant::now();
                let r = self.request("vset /env/reset")?;
                let dt = t0.elapsed();
                self.steps = 0;
                image(r, "env reset")?;
                let r = self.request(&format!("vget /robot/{ROBOT}/location"))?;
                let loc = text(r, "location")?;
                if loc != self.spawn_location {
                    return Err(format!("after reset {ROBOT} is at {loc}, spawn is {}", self.spawn_location));
                }
                Ok(dt)
            }
            Operation::Move => {
                let dir = if i % 2 == 0 { "forward" } else { "backward" };
                let t0 = Instant::now();
                let r = self.request(&format!("vset /robot/{ROBOT}/move {dir}"))?;
                let dt = t0.elapsed();
                let reply = text(r, "move")?;
                let f: Vec<&str> = reply.split(' ').collect();
                if f.len() != 4 || !(f[3] == "0" || f[3] == "1") {
                    return Err(format!("move reply {reply:?}"));
                }
                let r = self.request(&format!("vget /robot/{ROBOT}/location"))?;
                let loc = text(r, "location")?;
                if loc != f[..3].join(" ") {
                    return Err(format!("move reported {reply:?} but location reads {loc:?}"));
                }
                Ok(dt)
            }
            Operation::ThermalToggle => {
                let t0 = Instant::now();
                let r = self.request("vget /topdown thermal")?;
                let dt = t0.elapsed();
                let (_, img) = image(r, "thermal top-down")?;
                if !img.pixels.chunks(3).any(is_thermal) {
                    return Err("thermal top-down has no colormapped pixel".into());
                }
                Ok(dt)
            }
            Operation::TopdownCapture => {
                let t0 = Instant::now();
                let r = self.request("vget /topdown lit")?;
                thread::sleep(self.topdown_delay);
                let dt = t0.elapsed().saturating_sub(self.topdown_delay);
                let (_, img) = image(r, "top-down")?;
                if img.pixels.chunks(3).all(is_thermal) {
                    return Err("lit top-down looks thermal".into());
                }
                Ok(dt)
            }
        }
    }
}

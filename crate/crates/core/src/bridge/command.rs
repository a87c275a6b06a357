// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use crate::decimal::Decimal;
use crate::mirror::is_var_name;
use crate::render::{decode_ppm, encode_ppm, Image, RenderMode};
use crate::world::Action;

/// Largest camera dimension a request may ask for; keeps image replies
/// well inside one frame.
pub const MAX_CAMERA_DIM: usize = 2048;
pub const MAX_ADVANCE_MS: u64 = 86_400_000;
pub const MAX_SWARM: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    RobotLocation(String),
    RobotRotation(String),
    RobotCompass(String),
    /// The robot's trace as CSV.
    RobotTrace(String),
    /// `move`, `rotate` and `altitude`, by action.
    RobotAction(String, Action),
    SetTrace(String, bool),
    Camera { robot: String, mode: RenderMode, width: usize, height: usize },
    Topdown(RenderMode),
    TargetLocation,
    Robots,
    Interactions,
    PlantGet(String),
    PlantSet(String, Decimal),
    Possess(String),
    EnvReset,
    EnvStep(u32),
    SimTime,
    SimAdvance(u64),
    SwarmSpawn { n: usize, zone: String },
    SessionEvents(bool),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct CommandError(pub String);

pub fn is_robot_id(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Canonical unsigned integer: digits, no leading zero except "0" itself.
fn uint(tok: &str) -> Option<u64> {
    let canonical = !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit()) && (tok == "0" || !tok.starts_with('0'));
    if canonical {
        tok.parse().ok()
    } else {
        None
    }
}

fn on_off(tok: &str) -> Option<bool> {
    match tok {
        "on" => Some(true),
        "off" => Some(false),
        _ => None,
    }
}

fn bad(msg: impl Into<String>) -> CommandError {
    CommandError(msg.into())
}

pub fn parse_command(body: &str) -> Result<Command, CommandError> {
    if body.contains(['\r', '\n']) {
        return Err(bad("commands are a single line"));
    }
    let tokens: Vec<&str> = body.split(' ').collect();
    if tokens.iter().any(|t| t.is_empty()) {
        return Err(bad("tokens are separated by single spaces"));
    }
    let verb = tokens[0];
    let path = tokens.get(1).copied().unwrap_or("");
    let args = tokens.get(2..).unwrap_or(&[]);
    let segs: Vec<&str> = match path.strip_prefix('/') {
        Some(p) => p.split('/').collect(),
        None => return Err(bad(format!("unknown command {body:?}"))),
    };
    let unknown = || bad(format!("unknown command {body:?}"));
    let robot = |id: &str| if is_robot_id(id) { Ok(id.to_string()) } else { Err(bad(format!("bad robot id {id:?}"))) };
    let one = |args: &[&str]| if args.len() == 1 { Ok(args[0].to_string()) } else { Err(bad(format!("{path} takes one argument"))) };
    let none = |args: &[&str]| if args.is_empty() { Ok(()) } else { Err(bad(format!("{path} takes no arguments"))) };

    let cmd = match (verb, segs.as_slice()) {
        ("vget", ["robot", id, "location"]) => none(args).and(robot(id).map(Command::RobotLocation))?,
        ("vget", ["robot", id, "rotation"]) => none(args).and(robot(id).map(Command::RobotRotation))?,
        ("vget", ["robot", id, "compass"]) => none(args).and(robot(id).map(Command::RobotCompass))?,
        ("vget", ["robot", id, "trace"]) => none(args).and(robot(id).map(Command::RobotTrace))?,
        ("vset", ["robot", id, what @ ("move" | "rotate" | "altitude")]) => {
            let arg = one(args)?;
            let action = match (*what, arg.as_str()) {
                ("move", "forward") => Action::Forward,
                ("move", "backward") => Action::Backward,
                ("rotate", "left") => Action::TurnLeft,
                ("rotate", "right") => Action::TurnRight,
                ("altitude", "up") => Action::Up,
                ("altitude", "down") => Action::Down,
                _ => return Err(bad(format!("bad {what} argument {arg:?}"))),
            };
            Command::RobotAction(robot(id)?, action)
        }
        ("vset", ["robot", id, "trace"]) => {
            let on = on_off(&one(args)?).ok_or_else(|| bad("trace takes on|off"))?;
            Command::SetTrace(robot(id)?, on)
        }
        ("vget", ["camera", id, mode]) => {
            let mode: RenderMode = mode.parse().map_err(bad)?;
            let [w, h] = args else { return Err(bad("camera takes <w> <h>")) };
            let dim = |t: &str| {
                uint(t)
                    .map(|v| v as usize)
                    .filter(|v| (1..=MAX_CAMERA_DIM).contains(v))
                    .ok_or_else(|| bad(format!("camera dimension {t:?} outside 1..={MAX_CAMERA_DIM}")))
            };
            Command::Camera { robot: robot(id)?, mode, width: dim(w)?, height: dim(h)? }
        }
        ("vget", ["topdown"]) => Command::Topdown(one(args)?.parse().map_err(bad)?),
        ("vget", ["target", "location"]) => none(args).map(|_| Command::TargetLocation)?,
        ("vget", ["robots"]) => none(args).map(|_| Command::Robots)?,
        ("vget", ["interactions"]) => none(args).map(|_| Command::Interactions)?,
        ("vget", ["plant", var]) => {
            none(args)?;
            if !is_var_name(var) {
                return Err(bad(format!("bad variable name {var:?}")));
            }
            Command::PlantGet(var.to_string())
        }
        ("vset", ["plant", var]) => {
            if !is_var_name(var) {
                return Err(bad(format!("bad variable name {var:?}")));
            }
            let v: Decimal = one(args)?.parse().map_err(|e: crate::decimal::DecimalError| bad(e.to_string()))?;
            Command::PlantSet(var.to_string(), v)
        }
        ("vset", ["session", "possess"]) => Command::Possess(robot(&one(args)?)?),
        ("vset", ["session", "events"]) => {
            Command::SessionEvents(on_off(&one(args)?).ok_or_else(|| bad("events takes on|off"))?)
        }
        ("vset", ["env", "reset"]) => none(args).map(|_| Command::EnvReset)?,
        ("vrun", ["env", "step"]) => {
            let a = one(args)?;
            let id = uint(&a).filter(|v| *v <= u32::MAX as u64).ok_or_else(|| bad(format!("bad action id {a:?}")))?;
            Command::EnvStep(id as u32)
        }
        ("vget", ["sim", "time"]) => none(args).map(|_| Command::SimTime)?,
        ("vset", ["sim", "advance"]) => {
            let a = one(args)?;
            let ms = uint(&a)
                .filter(|v| (1..=MAX_ADVANCE_MS).contains(v))
                .ok_or_else(|| bad(format!("advance {a:?} outside 1..={MAX_ADVANCE_MS}")))?;
            Command::SimAdvance(ms)
        }
        ("vset", ["swarm", "spawn"]) => {
            let [n, zone] = args else { return Err(bad("swarm/spawn takes <n> <zone>")) };
            let n = uint(n)
                .map(|v| v as usize)
                .filter(|v| (1..=MAX_SWARM).contains(v))
                .ok_or_else(|| bad(format!("swarm size {n:?} outside 1..={MAX_SWARM}")))?;
            Command::SwarmSpawn { n, zone: robot(zone)? }
        }
        _ => return Err(unknown()),
    };
    Ok(cmd)
}

fn action_path(a: Action) -> (&'static str, &'static str) {
    match a {
        Action::Forward => ("move", "forward"),
        Action::Backward => ("move", "backward"),
        Action::TurnLeft => ("rotate", "left"),
        Action::TurnRight => ("rotate", "right"),
        Action::Up => ("altitude", "up"),
        Action::Down => ("altitude", "down"),
    }
}

fn on_off_str(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::RobotLocation(id) => write!(f, "vget /robot/{id}/location"),
            Command::RobotRotation(id) => write!(f, "vget /robot/{id}/rotation"),
            Command::RobotCompass(id) => write!(f, "vget /robot/{id}/compass"),
            Command::RobotTrace(id) => write!(f, "vget /robot/{id}/trace"),
            Command::RobotAction(id, a) => {
                let (what, arg) = action_path(*a);
                write!(f, "vset /robot/{id}/{what} {arg}")
            }
            Command::SetTrace(id, on) => write!(f, "vset /robot/{id}/trace {}", on_off_str(*on)),
            Command::Camera { robot, mode, width, height } => write!(f, "vget /camera/{robot}/{mode} {width} {height}"),
            Command::Topdown(mode) => write!(f, "vget /topdown {mode}"),
            Command::TargetLocation => f.write_str("vget /target/location"),
            Command::Robots => f.write_str("vget /robots"),
            Command::Interactions => f.write_str("vget /interactions"),
            Command::PlantGet(v) => write!(f, "vget /plant/{v}"),
            Command::PlantSet(v, d) => write!(f, "vset /plant/{v} {d}"),
            Command::Possess(id) => write!(f, "vset /session/possess {id}"),
            Command::EnvReset => f.write_str("vset /env/reset"),
            Command::EnvStep(a) => write!(f, "vrun /env/step {a}"),
            Command::SimTime => f.write_str("vget /sim/time"),
            Command::SimAdvance(ms) => write!(f, "vset /sim/advance {ms}"),
            Command::SwarmSpawn { n, zone } => write!(f, "vset /swarm/spawn {n} {zone}"),
            Command::SessionEvents(on) => write!(f, "vset /session/events {}", on_off_str(*on)),
        }
    }
}

/// A response body. Encodes as `ok …`, `ok [<fields> ]<PPM>` or
/// `error <code> <message>`.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Text(String),
    Image { head: String, image: Image },
    Error { code: u16, message: String },
}

impl Reply {
    pub fn ok(text: impl Into<String>) -> Self {
        Reply::Text(text.into())
    }

    pub fn error(code: u16, message: impl Into<String>) -> Self {
        Reply::Error { code, message: message.into() }
    }

    pub fn is_ok(&self) -> bool {
        !matches!(self, Reply::Error { .. })
    }

    /// The text after `ok ` for text replies.
    pub fn text(&self) -> Option<&str> {
        match self {
            Reply::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Reply::Text(t) if t.is_empty() => b"ok".to_vec(),
            Reply::Text(t) => format!("ok {t}").into_bytes(),
            Reply::Image { head, image } => {
                let mut out = if head.is_empty() { b"ok ".to_vec() } else { format!("ok {head} ").into_bytes() };
                out.extend_from_slice(&encode_ppm(image));
                out
            }
            Reply::Error { code, message } => format!("error {code} {message}").into_bytes(),
        }
    }

    pub fn decode(body: &[u8]) -> Result<Self, CommandError> {
        if let Some(rest) = body.strip_prefix(b"error ") {
            let text = String::from_utf8_lossy(rest);
            let (code, message) = text.split_once(' ').unwrap_or((&text, ""));
            let code = code.parse().map_err(|_| bad("bad error code"))?;
            return Ok(Reply::Error { code, message: message.to_string() });
        }
        if body == b"ok" {
            return Ok(Reply::Text(String::new()));
        }
        let rest = body.strip_prefix(b"ok ").ok_or_else(|| bad("reply starts with neither ok nor error"))?;
        if let Some(pos) = rest.windows(3).position(|w| w == b"P6\n") {
            let head_ok = pos == 0 || rest[pos - 1] == b' ';
            if head_ok {
                if let Ok(image) = decode_ppm(&rest[pos..]) {
                    let head = String::from_utf8_lossy(&rest[..pos.saturating_sub(1)]).into_owned();
                    return Ok(Reply::Image { head, image });
                }
            }
        }
        let text = std::str::from_utf8(rest).map_err(|_| bad("reply is not UTF-8"))?;
        Ok(Reply::Text(text.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grammar_examples() {
        assert_eq!(parse_command("vget /target/location"), Ok(Command::TargetLocation));
        assert_eq!(
            parse_command("vget /camera/r1/lit 256 144"),
            Ok(Command::Camera { robot: "r1".into(), mode: RenderMode::Lit, width: 256, height: 144 })
        );
        assert!(parse_command("vteleport /x").is_err());
        assert!(parse_command("vget /camera/r1/lit 0 144").is_err());
        assert!(parse_command("vget /camera/r1/lit 0256 144").is_err());
        assert!(parse_command("vset /robot/r1/move left").is_err());
        assert!(parse_command("vset  /env/reset").is_err());
        assert!(parse_command("vset /env/reset ").is_err());
        assert!(parse_command("vget /plant/Bad").is_err());
        assert!(parse_command("vset /plant/rod_position 1e999").is_err());
        assert_eq!(parse_command("vrun /env/step 0"), Ok(Command::EnvStep(0)));
        assert!(parse_command("vrun /env/step 01").is_err());
        assert!(parse_command("").is_err());
    }

    #[test]
    fn reply_encoding() {
        assert_eq!(Reply::ok("1 2 0").encode(), b"ok 1 2 0");
        assert_eq!(Reply::ok("").encode(), b"ok");
        assert_eq!(Reply::error(404, "unknown robot x").encode(), b"error 404 unknown robot x");
        let mut image = Image::new(2, 1).unwrap();
        image.set(1, 0, [1, 2, 3]);
        let r = Reply::Image { head: String::new(), image: image.clone() };
        assert!(r.encode().starts_with(b"ok P6\n2 1\n255\n"));
        assert_eq!(Reply::decode(&r.encode()).unwrap(), r);
        let step = Reply::Image { head: "0.99 0 1".into(), image };
        assert!(step.encode().starts_with(b"ok 0.99 0 1 P6\n"));
        assert_eq!(Reply::decode(&step.encode()).unwrap(), step);
        assert_eq!(Reply::decode(b"error 409 busy").unwrap(), Reply::error(409, "busy"));
        let csv = Reply::ok("t_ms,robot_id,x_m,y_m,z_m,yaw_deg\n50,P6,1.000,1.000,0.000,0.000\n");
        assert_eq!(Reply::decode(&csv.encode()).unwrap(), csv);
    }

    fn id() -> impl Strategy<Value = String> {
        "[A-Za-z0-9_-]{1,12}"
    }

    fn var() -> impl Strategy<Value = String> {
        "[a-z0-9_]{1,24}"
    }

    fn decimal() -> impl Strategy<Value = Decimal> {
        prop_oneof![
            any::<f64>().prop_filter_map("finite", Decimal::from_f64),
            "[+-]?[0-9]{1,6}(\\.[0-9]{0,6})?([eE][+-]?[0-9]{1,2})?".prop_filter_map("finite", |s| s.parse().ok()),
        ]
    }

    fn mode() -> impl Strategy<Value = RenderMode> {
        prop_oneof![Just(RenderMode::Lit), Just(RenderMode::Thermal)]
    }

    fn action() -> impl Strategy<Value = Action> {
        prop_oneof![
            Just(Action::Forward),
            Just(Action::Backward),
            Just(Action::TurnLeft),
            Just(Action::TurnRight),
            Just(Action::Up),
            Just(Action::Down),
        ]
    }

    pub fn command() -> impl Strategy<Value = Command> {
        prop_oneof![
            id().prop_map(Command::RobotLocation),
            id().prop_map(Command::RobotRotation),
            id().prop_map(Command::RobotCompass),
            id().prop_map(Command::RobotTrace),
            (id(), action()).prop_map(|(i, a)| Command::RobotAction(i, a)),
            (id(), any::<bool>()).prop_map(|(i, b)| Command::SetTrace(i, b)),
            (id(), mode(), 1..=MAX_CAMERA_DIM, 1..=MAX_CAMERA_DIM)
                .prop_map(|(robot, mode, width, height)| Command::Camera { robot, mode, width, height }),
            mode().prop_map(Command::Topdown),
            Just(Command::TargetLocation),
            Just(Command::Robots),
            Just(Command::Interactions),
            var().prop_map(Command::PlantGet),
            (var(), decimal()).prop_map(|(v, d)| Command::PlantSet(v, d)),
            id().prop_map(Command::Possess),
            Just(Command::EnvReset),
            any::<u32>().prop_map(Command::EnvStep),
            Just(Command::SimTime),
            (1..=MAX_ADVANCE_MS).prop_map(Command::SimAdvance),
            (1..=MAX_SWARM, id()).prop_map(|(n, zone)| Command::SwarmSpawn { n, zone }),
            any::<bool>().prop_map(Command::SessionEvents),
        ]
    }

    proptest! {
        #[test]
        fn commands_round_trip(c in command()) {
            let text = c.to_string();
            let back = parse_command(&text).unwrap();
            prop_assert_eq!(back.to_string(), text);
            prop_assert_eq!(back, c);
        }

        #[test]
        fn parser_never_panics(s in "\\PC{0,60}") {
            if let Ok(c) = parse_command(&s) {
                prop_assert_eq!(c.to_string(), s);
            }
        }
    }
}

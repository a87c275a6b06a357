// SPDX-License-Identifier: Apache-2.0

//! The spatial twin: a terrain grid with zones and thermal bindings, robots
//! moving on it in discrete actions, and the navigation helpers around them.

mod map_file;
mod swarm;
mod trace;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use map_file::{default_map, load_map, MapError, DEFAULT_MAP_JSON};
pub use swarm::{spawn_swarm, swarm_id, SwarmError};
pub use trace::{TraceLog, TraceRecord, TraceRecorder, TRACE_CSV_HEADER};

use crate::mirror::{Generation, MirrorCache};

pub const TURN_STEP_DEG: f64 = 15.0;
pub const MOVE_STEP_M: f64 = 1.0;
pub const CLIMB_STEP_M: f64 = 0.5;
pub const MAX_ALTITUDE_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terrain {
    Flat,
    Uneven,
    Stairs,
    Wall,
    Water,
}

impl Terrain {
    pub fn from_code(c: char) -> Option<Self> {
        Some(match c {
            'F' => Terrain::Flat,
            'U' => Terrain::Uneven,
            'S' => Terrain::Stairs,
            'W' => Terrain::Wall,
            '~' => Terrain::Water,
            _ => return None,
        })
    }

    pub fn code(self) -> char {
        match self {
            Terrain::Flat => 'F',
            Terrain::Uneven => 'U',
            Terrain::Stairs => 'S',
            Terrain::Wall => 'W',
            Terrain::Water => '~',
        }
    }

    pub fn is_opaque(self) -> bool {
        self == Terrain::Wall
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RobotKind {
    Wheeled,
    Bipedal,
    Quadruped,
    Aerial,
}

impl RobotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotKind::Wheeled => "wheeled",
            RobotKind::Bipedal => "bipedal",
            RobotKind::Quadruped => "quadruped",
            RobotKind::Aerial => "aerial",
        }
    }

    /// Which terrain a robot of this kind may stand on.
    pub fn can_enter(self, t: Terrain) -> bool {
        match t {
            Terrain::Flat => true,
            Terrain::Uneven => matches!(self, RobotKind::Quadruped | RobotKind::Aerial),
            Terrain::Stairs => matches!(self, RobotKind::Bipedal | RobotKind::Aerial),
            Terrain::Water => self == RobotKind::Aerial,
            Terrain::Wall => false,
        }
    }
}

impl std::str::FromStr for RobotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "wheeled" => RobotKind::Wheeled,
            "bipedal" => RobotKind::Bipedal,
            "quadruped" => RobotKind::Quadruped,
            "aerial" => RobotKind::Aerial,
            other => return Err(format!("unknown robot kind {other:?}")),
        })
    }
}

/// Temperature source of a cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellThermal {
    None,
    Static(f64),
    /// Index into [`WorldMap::bound_variables`].
    Bound(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub terrain: Terrain,
    pub material: usize,
    pub thermal: CellThermal,
}

impl Cell {
    pub fn base_temp_c(&self) -> Option<f64> {
        match self.thermal {
            CellThermal::Static(t) => Some(t),
            _ => None,
        }
    }
}

/// Axis-aligned rectangle in cell units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, cx: usize, cy: usize) -> bool {
        cx >= self.x && cx < self.x + self.w && cy >= self.y && cy < self.y + self.h
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y..self.y + self.h).flat_map(move |cy| (self.x..self.x + self.w).map(move |cx| (cx, cy)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spawn {
    pub pose: Pose,
    pub kind: RobotKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub x_m: f64,
    pub y_m: f64,
    pub radius_m: f64,
}

/// A point where an operator can actuate a plant variable, e.g. a valve.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub name: String,
    pub x_m: f64,
    pub y_m: f64,
    pub variable: String,
}

/// Static plant layout. World coordinates have x to the right and y up;
/// cell `(cx, cy)` covers `[cx, cx+1) × [cy, cy+1)` in cell units.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub cell_size_m: f64,
    pub cells: Vec<Cell>,
    pub palette: Vec<[u8; 3]>,
    pub zones: BTreeMap<String, Rect>,
    pub spawns: BTreeMap<String, Spawn>,
    pub target: Target,
    pub bound_variables: Vec<String>,
    pub interactions: Vec<Interaction>,
}

impl WorldMap {
    pub fn cell(&self, cx: usize, cy: usize) -> &Cell {
        &self.cells[cy * self.width + cx]
    }

    pub fn cell_at_m(&self, x_m: f64, y_m: f64) -> Option<(usize, usize)> {
        let cx = (x_m / self.cell_size_m).floor();
        let cy = (y_m / self.cell_size_m).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            return None;
        }
        Some((cx as usize, cy as usize))
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.cell_size_m
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.cell_size_m
    }

    pub fn passable(&self, x_m: f64, y_m: f64, kind: RobotKind) -> bool {
        self.cell_at_m(x_m, y_m).is_some_and(|(cx, cy)| kind.can_enter(self.cell(cx, cy).terrain))
    }

    pub fn material_color(&self, cx: usize, cy: usize) -> [u8; 3] {
        self.palette.get(self.cell(cx, cy).material).copied().unwrap_or([255, 0, 255])
    }
}

/// Looks up mirrored variable values for thermal rendering.
pub trait ThermalSource {
    fn temperature(&self, variable: &str) -> Option<f64>;
}

impl ThermalSource for Generation {
    fn temperature(&self, variable: &str) -> Option<f64> {
        self.values.get(variable).copied()
    }
}

impl ThermalSource for std::collections::HashMap<String, f64> {
    fn temperature(&self, variable: &str) -> Option<f64> {
        self.get(variable).copied()
    }
}

/// Surfaces with no temperature at all.
pub struct NoThermal;

impl ThermalSource for NoThermal {
    fn temperature(&self, _: &str) -> Option<f64> {
        None
    }
}

/// Temperature of the cell under `(x_m, y_m)`: the mirrored value for a
/// bound cell, the static temperature otherwise, or `None`.
pub fn thermal_at<S: ThermalSource + ?Sized>(map: &WorldMap, source: &S, x_m: f64, y_m: f64) -> Option<f64> {
    let (cx, cy) = map.cell_at_m(x_m, y_m)?;
    cell_temperature(map, source, cx, cy)
}

pub fn cell_temperature<S: ThermalSource + ?Sized>(map: &WorldMap, source: &S, cx: usize, cy: usize) -> Option<f64> {
    match map.cell(cx, cy).thermal {
        CellThermal::None => None,
        CellThermal::Static(t) => Some(t),
        CellThermal::Bound(i) => source.temperature(&map.bound_variables[i]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalReading {
    pub temp_c: f64,
    /// True when the mirror link is down and the value is the last snapshot.
    pub stale: bool,
}

pub fn thermal_reading(map: &WorldMap, cache: &MirrorCache, x_m: f64, y_m: f64) -> Option<ThermalReading> {
    let g = cache.generation();
    thermal_at(map, g.as_ref(), x_m, y_m).map(|temp_c| ThermalReading { temp_c, stale: !cache.is_connected() })
}

pub type SessionId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub id: String,
    pub kind: RobotKind,
    pub pose: Pose,
    pub trace_enabled: bool,
    pub possessed_by: Option<SessionId>,
    /// Marker and trace colour in top-down views.
    pub color: [u8; 3],
}

const ROBOT_COLORS: [[u8; 3]; 8] = [
    [255, 255, 0],
    [0, 255, 255],
    [255, 128, 0],
    [255, 255, 255],
    [255, 0, 255],
    [128, 255, 128],
    [255, 160, 200],
    [160, 160, 255],
];

pub fn robot_color(index: usize) -> [u8; 3] {
    ROBOT_COLORS[index % ROBOT_COLORS.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    Up,
    Down,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::Backward => "backward",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::Up => "up",
            Action::Down => "down",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MoveError {
    #[error("action {action} is not available to {kind} robots")]
    IllegalAction { action: Action, kind: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub pose: Pose,
    pub collided: bool,
}

/// Wraps an angle in degrees into (−180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Unit heading vector; exact on the axes so grid-aligned motion stays on
/// cell centres.
pub fn heading_vector(yaw_deg: f64) -> (f64, f64) {
    let w = wrap_deg(yaw_deg);
    if w == 0.0 {
        (1.0, 0.0)
    } else if w == 90.0 {
        (0.0, 1.0)
    } else if w == 180.0 {
        (-1.0, 0.0)
    } else if w == -90.0 {
        (0.0, -1.0)
    } else {
        let r = w.to_radians();
        (r.cos(), r.sin())
    }
}

/// Applies one discrete action. Translation is gated by the destination
/// cell's terrain; a blocked move leaves the pose unchanged and reports a
/// collision. Robots never block each other.
pub fn apply_move(robot: &RobotState, action: Action, map: &WorldMap) -> Result<MoveOutcome, MoveError> {
    let p = robot.pose;
    let blocked = MoveOutcome { pose: p, collided: true };
    let moved = |pose| MoveOutcome { pose, collided: false };
    match action {
        Action::TurnLeft => Ok(moved(Pose { yaw_deg: wrap_deg(p.yaw_deg + TURN_STEP_DEG), ..p })),
        Action::TurnRight => Ok(moved(Pose { yaw_deg: wrap_deg(p.yaw_deg - TURN_STEP_DEG), ..p })),
        Action::Forward | Action::Backward => {
            let sign = if action == Action::Forward { 1.0 } else { -1.0 };
            let (dx, dy) = heading_vector(p.yaw_deg);
            let nx = p.x_m + sign * MOVE_STEP_M * dx;
            let ny = p.y_m + sign * MOVE_STEP_M * dy;
            if map.passable(nx, ny, robot.kind) {
                Ok(moved(Pose { x_m: nx, y_m: ny, ..p }))
            } else {
                Ok(blocked)
            }
        }
        Action::Up | Action::Down => {
            if robot.kind != RobotKind::Aerial {
                return Err(MoveError::IllegalAction { action, kind: robot.kind.as_str() });
            }
            let dz = if action == Action::Up { CLIMB_STEP_M } else { -CLIMB_STEP_M };
            let nz = p.z_m + dz;
            if (0.0..=MAX_ALTITUDE_M).contains(&nz) {
                Ok(moved(Pose { z_m: nz, ..p }))
            } else {
                Ok(blocked)
            }
        }
    }
}

/// Bearing of the target relative to the robot's heading, in (−180, 180];
/// positive is counter-clockwise, 0 is dead ahead.
pub fn compass_bearing(pose: &Pose, target_x: f64, target_y: f64) -> f64 {
    let dx = target_x - pose.x_m;
    let dy = target_y - pose.y_m;
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    wrap_deg(dy.atan2(dx).to_degrees() - pose.yaw_deg)
}

pub fn horizontal_distance(pose: &Pose, x: f64, y: f64) -> f64 {
    (x - pose.x_m).hypot(y - pose.y_m)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error("unknown robot {0}")]
    UnknownRobot(String),
    #[error("robot {robot} is possessed by session {holder}")]
    Conflict { robot: String, holder: SessionId },
    #[error("robot {0} is not possessed by this session")]
    NotPossessed(String),
    #[error(transparent)]
    Move(#[from] MoveError),
}

/// Mutable world: the static map plus the robots on it.
#[derive(Debug, Clone)]
pub struct World {
    pub map: Arc<WorldMap>,
    pub robots: BTreeMap<String, RobotState>,
    /// Spawn poses of robots added at runtime (swarms).
    pub extra_spawns: BTreeMap<String, Pose>,
}

impl World {
    /// One robot per map spawn, ids taken from the spawn names.
    pub fn new(map: Arc<WorldMap>) -> Self {
        let robots = map
            .spawns
            .iter()
            .enumerate()
            .map(|(i, (id, s))| {
                (
                    id.clone(),
                    RobotState {
                        id: id.clone(),
                        kind: s.kind,
                        pose: s.pose,
                        trace_enabled: false,
                        possessed_by: None,
                        color: robot_color(i),
                    },
                )
            })
            .collect();
        Self { map, robots, extra_spawns: BTreeMap::new() }
    }

    pub fn robot(&self, id: &str) -> Result<&RobotState, WorldError> {
        self.robots.get(id).ok_or_else(|| WorldError::UnknownRobot(id.to_string()))
    }

    pub fn robot_mut(&mut self, id: &str) -> Result<&mut RobotState, WorldError> {
        self.robots.get_mut(id).ok_or_else(|| WorldError::UnknownRobot(id.to_string()))
    }

    pub fn possessed_by(&self, session: SessionId) -> Option<&RobotState> {
        self.robots.values().find(|r| r.possessed_by == Some(session))
    }

    /// Binds `session` to `robot_id`, releasing whatever it held before.
    /// Returns the id of the released robot, if any.
    pub fn possess(&mut self, session: SessionId, robot_id: &str) -> Result<Option<String>, WorldError> {
        let robot = self.robot(robot_id)?;
        match robot.possessed_by {
            Some(holder) if holder == session => return Ok(None),
            Some(holder) => return Err(WorldError::Conflict { robot: robot_id.to_string(), holder }),
            None => {}
        }
        let released = self.release_session(session);
        self.robot_mut(robot_id)?.possessed_by = Some(session);
        Ok(released)
    }

    pub fn release_session(&mut self, session: SessionId) -> Option<String> {
        let r = self.robots.values_mut().find(|r| r.possessed_by == Some(session))?;
        r.possessed_by = None;
        Some(r.id.clone())
    }

    /// Moves a robot on behalf of a session, which must possess it.
    pub fn command_move(&mut self, session: SessionId, robot_id: &str, action: Action) -> Result<MoveOutcome, WorldError> {
        let robot = self.robot(robot_id)?;
        if robot.possessed_by != Some(session) {
            return Err(WorldError::NotPossessed(robot_id.to_string()));
        }
        let out = apply_move(robot, action, &self.map)?;
        self.robot_mut(robot_id)?.pose = out.pose;
        Ok(out)
    }

    /// Puts a robot back on its spawn pose.
    pub fn respawn(&mut self, robot_id: &str) -> Result<(), WorldError> {
        let spawn = self.spawn_pose(robot_id)?;
        self.robot_mut(robot_id)?.pose = spawn;
        Ok(())
    }

    fn spawn_pose(&self, robot_id: &str) -> Result<Pose, WorldError> {
        if let Some(s) = self.map.spawns.get(robot_id) {
            return Ok(s.pose);
        }
        self.extra_spawns.get(robot_id).copied().ok_or_else(|| WorldError::UnknownRobot(robot_id.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(rows: &[&str]) -> WorldMap {
        let doc = serde_json::json!({
            "width": rows[0].len(),
            "height": rows.len(),
            "rows": rows,
            "target": {"x": 0.5, "y": 0.5, "radius_m": 0.5},
        });
        load_map(&doc.to_string()).unwrap()
    }

    fn bot(kind: RobotKind, x: f64, y: f64, yaw: f64) -> RobotState {
        RobotState {
            id: "r".into(),
            kind,
            pose: Pose { x_m: x, y_m: y, z_m: 0.0, yaw_deg: yaw },
            trace_enabled: false,
            possessed_by: None,
            color: [255, 255, 0],
        }
    }

    #[test]
    fn forward_on_flat() {
        let map = strip(&["FFF"]);
        let out = apply_move(&bot(RobotKind::Wheeled, 0.5, 0.5, 0.0), Action::Forward, &map).unwrap();
        assert_eq!(out.pose.x_m, 1.5);
        assert_eq!(out.pose.y_m, 0.5);
        assert!(!out.collided);
    }

    #[test]
    fn terrain_gates_by_kind() {
        let cases = [
            ('F', [true, true, true, true]),
            ('U', [false, false, true, true]),
            ('S', [false, true, false, true]),
            ('~', [false, false, false, true]),
            ('W', [false, false, false, false]),
        ];
        let kinds = [RobotKind::Wheeled, RobotKind::Bipedal, RobotKind::Quadruped, RobotKind::Aerial];
        for (code, allowed) in cases {
            let map = strip(&[&format!("F{code}")]);
            for (kind, ok) in kinds.iter().zip(allowed) {
                let r = bot(*kind, 0.5, 0.5, 0.0);
                let out = apply_move(&r, Action::Forward, &map).unwrap();
                assert_eq!(!out.collided, ok, "{kind:?} onto {code}");
                if out.collided {
                    assert_eq!(out.pose, r.pose);
                }
            }
        }
    }

    #[test]
    fn leaving_the_map_is_a_collision() {
        let map = strip(&["F"]);
        let out = apply_move(&bot(RobotKind::Aerial, 0.5, 0.5, 90.0), Action::Forward, &map).unwrap();
        assert!(out.collided);
    }

    #[test]
    fn full_turn_is_exact() {
        let map = strip(&["F"]);
        let mut r = bot(RobotKind::Wheeled, 0.5, 0.5, 30.0);
        for _ in 0..24 {
            r.pose = apply_move(&r, Action::TurnLeft, &map).unwrap().pose;
        }
        assert_eq!(r.pose.yaw_deg, 30.0);
        r.pose.yaw_deg = 180.0;
        r.pose = apply_move(&r, Action::TurnLeft, &map).unwrap().pose;
        assert_eq!(r.pose.yaw_deg, -165.0);
        r.pose = apply_move(&r, Action::TurnRight, &map).unwrap().pose;
        assert_eq!(r.pose.yaw_deg, 180.0);
    }

    #[test]
    fn altitude_is_aerial_only_and_bounded() {
        let map = strip(&["F"]);
        assert!(apply_move(&bot(RobotKind::Wheeled, 0.5, 0.5, 0.0), Action::Up, &map).is_err());
        let mut d = bot(RobotKind::Aerial, 0.5, 0.5, 0.0);
        assert!(apply_move(&d, Action::Down, &map).unwrap().collided);
        for _ in 0..20 {
            d.pose = apply_move(&d, Action::Up, &map).unwrap().pose;
        }
        assert_eq!(d.pose.z_m, 10.0);
        assert!(apply_move(&d, Action::Up, &map).unwrap().collided);
    }

    #[test]
    fn compass_examples() {
        let p = Pose { x_m: 0.0, y_m: 0.0, z_m: 0.0, yaw_deg: 0.0 };
        assert_eq!(compass_bearing(&p, 5.0, 0.0), 0.0);
        assert_eq!(compass_bearing(&p, 0.0, 5.0), 90.0);
        assert_eq!(compass_bearing(&p, 0.0, 0.0), 0.0);
        assert_eq!(compass_bearing(&p, -1.0, 0.0), 180.0);
        // atan2(-0.0001, -1) = -179.99427°; minus 179 wraps to +1.00573°
        let q = Pose { yaw_deg: 179.0, ..p };
        let b = compass_bearing(&q, -1.0, -0.0001);
        let expect = wrap_deg((-0.0001f64).atan2(-1.0).to_degrees() - 179.0);
        assert_eq!(b, expect);
        assert!((b - 1.005_73).abs() < 1e-4, "{b}");
        assert!(b > -180.0 && b <= 180.0);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(540.0), 180.0);
        assert_eq!(wrap_deg(-190.0), 170.0);
        assert_eq!(wrap_deg(360.0), 0.0);
    }

    #[test]
    fn possession_rules() {
        let mut w = World::new(Arc::new(default_map()));
        let ids: Vec<String> = w.robots.keys().cloned().collect();
        let (r1, r2) = (&ids[0], &ids[1]);
        w.possess(1, r1).unwrap();
        assert_eq!(w.possess(1, r2).unwrap(), Some(r1.clone()));
        assert_eq!(w.robot(r1).unwrap().possessed_by, None);
        assert!(matches!(w.possess(2, r2), Err(WorldError::Conflict { .. })));
        assert!(matches!(w.command_move(2, r2, Action::TurnLeft), Err(WorldError::NotPossessed(_))));
        w.possess(2, r1).unwrap();
        w.command_move(1, r2, Action::TurnLeft).unwrap();
        w.command_move(2, r1, Action::TurnRight).unwrap();
        assert_eq!(w.release_session(1), Some(r2.clone()));
        assert!(matches!(w.possess(1, "nobody"), Err(WorldError::UnknownRobot(_))));
    }

    #[test]
    fn thermal_lookup() {
        let map = default_map();
        let mut vals = std::collections::HashMap::new();
        vals.insert("cond_cw_out_c".to_string(), 25.5);
        let (cx, cy) = map
            .cells
            .iter()
            .enumerate()
            .find_map(|(i, c)| match &c.thermal {
                CellThermal::Bound(b) if map.bound_variables[*b] == "cond_cw_out_c" => Some((i % map.width, i / map.width)),
                _ => None,
            })
            .unwrap();
        assert_eq!(cell_temperature(&map, &vals, cx, cy), Some(25.5));
        let wall = map
            .cells
            .iter()
            .position(|c| c.terrain == Terrain::Wall && c.thermal == CellThermal::None)
            .unwrap();
        assert_eq!(cell_temperature(&map, &vals, wall % map.width, wall / map.width), None);
        assert_eq!(thermal_at(&map, &vals, -1.0, 0.0), None);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Software rendering: a DDA raycast first-person camera, an orthographic
//! top-down view, both in lit or thermal mode, and PPM encoding.

use std::fmt;
use std::path::PathBuf;

use crate::world::{cell_temperature, heading_vector, wrap_deg, RobotState, ThermalSource, TraceRecorder, World, WorldMap};

pub const FOV_DEG: f64 = 90.0;
pub const DEFAULT_WIDTH: usize = 256;
pub const DEFAULT_HEIGHT: usize = 144;
pub const DEFAULT_PX_PER_CELL: usize = 4;
pub const DEFAULT_TOPDOWN_INTERVAL_MS: u64 = 1000;
/// Upper bound on either image dimension.
pub const MAX_DIM: usize = 4096;

pub const FLOOR_LIT: [u8; 3] = [64, 64, 64];
pub const CEILING_LIT: [u8; 3] = [31, 31, 31];
pub const NO_TEMP: [u8; 3] = [0, 255, 0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RenderMode {
    Lit,
    Thermal,
}

impl RenderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RenderMode::Lit => "lit",
            RenderMode::Thermal => "thermal",
        }
    }
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RenderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lit" => Ok(RenderMode::Lit),
            "thermal" => Ok(RenderMode::Thermal),
            other => Err(format!("unknown render mode {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("image dimensions must be between 1 and {MAX_DIM}, got {0}x{1}")]
    Size(usize, usize),
    #[error("malformed PPM: {0}")]
    Ppm(&'static str),
    #[error("recorder write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Row-major 8-bit RGB raster; row 0 is the top of the picture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Result<Self, RenderError> {
        if width == 0 || height == 0 || width > MAX_DIM || height > MAX_DIM {
            return Err(RenderError::Size(width, height));
        }
        Ok(Self { width, height, pixels: vec![0; 3 * width * height] })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    fn set_signed(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, c);
        }
    }

    fn fill_rect(&mut self, x0: usize, y0: usize, w: usize, h: usize, c: [u8; 3]) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                self.set(x, y, c);
            }
        }
    }
}

/// −100 °C is blue, +100 °C red, linear in between; no temperature is green.
pub fn thermal_color(t: Option<f64>) -> [u8; 3] {
    let Some(t) = t else { return NO_TEMP };
    let u = if t.is_nan() { 0.0 } else { ((t + 100.0) / 200.0).clamp(0.0, 1.0) };
    let r = (255.0 * u + 0.5).floor() as u8;
    [r, 0, 255 - r]
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

/// Decodes the exact layout written by [`encode_ppm`].
pub fn decode_ppm(bytes: &[u8]) -> Result<Image, RenderError> {
    let rest = bytes.strip_prefix(b"P6\n").ok_or(RenderError::Ppm("missing P6 magic"))?;
    let mut fields = rest.splitn(3, |&b| b == b'\n');
    let dims = fields.next().ok_or(RenderError::Ppm("missing dimensions"))?;
    let maxval = fields.next().ok_or(RenderError::Ppm("missing maxval"))?;
    let data = fields.next().ok_or(RenderError::Ppm("missing raster"))?;
    if maxval != b"255" {
        return Err(RenderError::Ppm("maxval must be 255"));
    }
    let dims = std::str::from_utf8(dims).map_err(|_| RenderError::Ppm("dimensions not text"))?;
    let (w, h) = dims.split_once(' ').ok_or(RenderError::Ppm("dimensions"))?;
    let parse = |s: &str| s.parse::<usize>().map_err(|_| RenderError::Ppm("dimensions"));
    let mut img = Image::new(parse(w)?, parse(h)?)?;
    if data.len() != img.pixels.len() {
        return Err(RenderError::Ppm("raster length does not match dimensions"));
    }
    img.pixels.copy_from_slice(data);
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Euclidean distance from the origin to the wall face, in metres.
    pub distance_m: f64,
    pub cell: (usize, usize),
}

/// Walks the grid from `(x_m, y_m)` along `angle_deg` to the first opaque
/// cell. `None` when the ray leaves the map first.
pub fn cast_ray(map: &WorldMap, x_m: f64, y_m: f64, angle_deg: f64) -> Option<RayHit> {
    let s = map.cell_size_m;
    let (px, py) = (x_m / s, y_m / s);
    let (dx, dy) = heading_vector(angle_deg);
    let (mut cx, mut cy) = (px.floor() as i64, py.floor() as i64);
    let inside = |cx: i64, cy: i64| cx >= 0 && cy >= 0 && (cx as usize) < map.width && (cy as usize) < map.height;
    if !inside(cx, cy) {
        return None;
    }
    if map.cell(cx as usize, cy as usize).terrain.is_opaque() {
        return Some(RayHit { distance_m: 0.0, cell: (cx as usize, cy as usize) });
    }
    let delta_x = (1.0 / dx).abs();
    let delta_y = (1.0 / dy).abs();
    let (step_x, mut side_x) = if dx < 0.0 { (-1, (px - cx as f64) * delta_x) } else { (1, (cx as f64 + 1.0 - px) * delta_x) };
    let (step_y, mut side_y) = if dy < 0.0 { (-1, (py - cy as f64) * delta_y) } else { (1, (cy as f64 + 1.0 - py) * delta_y) };
    loop {
        let t = if side_x < side_y {
            cx += step_x;
            side_x += delta_x;
            side_x - delta_x
        } else {
            cy += step_y;
            side_y += delta_y;
            side_y - delta_y
        };
        if !inside(cx, cy) {
            return None;
        }
        if map.cell(cx as usize, cy as usize).terrain.is_opaque() {
            return Some(RayHit { distance_m: t * s, cell: (cx as usize, cy as usize) });
        }
    }
}

/// Per-column wall extent of a first-person view, before colouring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Column {
    pub hit: Option<RayHit>,
    /// First and one-past-last wall rows.
    pub rows: (usize, usize),
}

/// Ray angle of column `i` of `width`: left edge at yaw + 45°.
pub fn column_angle(yaw_deg: f64, i: usize, width: usize) -> f64 {
    let offset = FOV_DEG / 2.0 - FOV_DEG * (i as f64 + 0.5) / width as f64;
    yaw_deg + offset
}

pub fn first_person_columns(map: &WorldMap, robot: &RobotState, width: usize, height: usize) -> Vec<Column> {
    let p = robot.pose;
    (0..width)
        .map(|i| {
            let angle = column_angle(p.yaw_deg, i, width);
            let hit = cast_ray(map, p.x_m, p.y_m, wrap_deg(angle));
            let rows = match hit {
                None => (height / 2, height / 2),
                Some(h) => {
                    let offset = (angle - p.yaw_deg).to_radians();
                    let perp = h.distance_m * offset.cos();
                    let col_h = if perp <= 0.0 {
                        height as f64
                    } else {
                        (height as f64 * map.cell_size_m / perp).clamp(0.0, height as f64)
                    };
                    let top = ((height as f64 - col_h) / 2.0).round() as usize;
                    (top, height - top)
                }
            };
            Column { hit, rows }
        })
        .collect()
}

pub fn render_first_person(
    map: &WorldMap,
    thermal: &dyn ThermalSource,
    robot: &RobotState,
    mode: RenderMode,
    width: usize,
    height: usize,
) -> Result<Image, RenderError> {
    let mut img = Image::new(width, height)?;
    let (ceiling, floor) = match mode {
        RenderMode::Lit => (CEILING_LIT, FLOOR_LIT),
        RenderMode::Thermal => (NO_TEMP, NO_TEMP),
    };
    for (x, col) in first_person_columns(map, robot, width, height).into_iter().enumerate() {
        let wall = col.hit.map(|h| {
            let (cx, cy) = h.cell;
            match mode {
                RenderMode::Lit => map.material_color(cx, cy),
                RenderMode::Thermal => thermal_color(cell_temperature(map, thermal, cx, cy)),
            }
        });
        for y in 0..height {
            let c = if y < col.rows.0 {
                ceiling
            } else if y >= col.rows.1 {
                floor
            } else {
                wall.unwrap_or(floor)
            };
            img.set(x, y, c);
        }
    }
    Ok(img)
}

/// Pixel of a world position in a top-down image (y flipped).
pub fn topdown_pixel(map: &WorldMap, ppc: usize, x_m: f64, y_m: f64) -> (i64, i64) {
    let k = ppc as f64 / map.cell_size_m;
    let px = (x_m * k).floor() as i64;
    let py = ((map.height_m() - y_m) * k).floor() as i64;
    (px, py)
}

fn draw_line(img: &mut Image, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        img.set_signed(x0, y0, c);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Full-map orthographic view. Traces of robots with tracing enabled are
/// drawn over the terrain, robot markers on top.
pub fn render_topdown(
    world: &World,
    thermal: &dyn ThermalSource,
    traces: Option<&TraceRecorder>,
    mode: RenderMode,
    ppc: usize,
) -> Result<Image, RenderError> {
    let map = &world.map;
    let ppc = ppc.max(1);
    let mut img = Image::new(map.width * ppc, map.height * ppc)?;
    for cy in 0..map.height {
        for cx in 0..map.width {
            let c = match mode {
                RenderMode::Lit => map.material_color(cx, cy),
                RenderMode::Thermal => thermal_color(cell_temperature(map, thermal, cx, cy)),
            };
            img.fill_rect(cx * ppc, (map.height - 1 - cy) * ppc, ppc, ppc, c);
        }
    }
    if let Some(traces) = traces {
        for robot in world.robots.values().filter(|r| r.trace_enabled) {
            let Some(log) = traces.log(&robot.id) else { continue };
            let pts: Vec<(i64, i64)> = log.records.iter().map(|r| topdown_pixel(map, ppc, r.x_m, r.y_m)).collect();
            if let [only] = pts.as_slice() {
                img.set_signed(only.0, only.1, robot.color);
            }
            for seg in pts.windows(2) {
                draw_line(&mut img, seg[0], seg[1], robot.color);
            }
        }
    }
    for robot in world.robots.values() {
        let (px, py) = topdown_pixel(map, ppc, robot.pose.x_m, robot.pose.y_m);
        for oy in -1..=1 {
            for ox in -1..=1 {
                img.set_signed(px + ox, py + oy, robot.color);
            }
        }
        let (hx, hy) = heading_vector(robot.pose.yaw_deg);
        img.set_signed(px + (2.0 * hx).round() as i64, py - (2.0 * hy).round() as i64, robot.color);
    }
    Ok(img)
}

/// Writes a top-down image every `interval_ms` of simulated time as
/// `topdown_<seq:05>_<t_ms>.ppm`.
#[derive(Debug)]
pub struct TopdownRecorder {
    pub dir: PathBuf,
    pub interval_ms: u64,
    pub mode: RenderMode,
    pub px_per_cell: usize,
    next_due_ms: u64,
    seq: u64,
    stopped: Option<String>,
}

impl TopdownRecorder {
    pub fn new(dir: impl Into<PathBuf>, interval_ms: u64, start_ms: u64) -> Self {
        let interval_ms = interval_ms.max(1);
        Self {
            dir: dir.into(),
            interval_ms,
            mode: RenderMode::Lit,
            px_per_cell: DEFAULT_PX_PER_CELL,
            next_due_ms: start_ms + interval_ms,
            seq: 0,
            stopped: None,
        }
    }

    pub fn files_written(&self) -> u64 {
        self.seq
    }

    /// Reason the recorder stopped, if it did.
    pub fn stopped(&self) -> Option<&str> {
        self.stopped.as_deref()
    }

    pub fn file_name(seq: u64, t_ms: u64) -> String {
        format!("topdown_{seq:05}_{t_ms}.ppm")
    }

    /// Writes every capture that fell due up to `t_ms`. Returns how many.
    pub fn on_tick(
        &mut self,
        world: &World,
        thermal: &dyn ThermalSource,
        traces: Option<&TraceRecorder>,
        t_ms: u64,
    ) -> Result<usize, RenderError> {
        if self.stopped.is_some() || t_ms < self.next_due_ms {
            return Ok(0);
        }
        let img = render_topdown(world, thermal, traces, self.mode, self.px_per_cell)?;
        let bytes = encode_ppm(&img);
        let mut n = 0;
        while self.next_due_ms <= t_ms {
            let path = self.dir.join(Self::file_name(self.seq, self.next_due_ms));
            if let Err(e) = std::fs::write(&path, &bytes) {
                self.stopped = Some(format!("{}: {e}", path.display()));
                return Err(e.into());
            }
            self.seq += 1;
            self.next_due_ms += self.interval_ms;
            n += 1;
        }
        Ok(n)
    }
}

// SPDX-License-Identifier: Apache-2.0

//! JSON map documents.
//!
//! ```json
//! {
//!   "name": "npp_default", "width": 80, "height": 50, "cell_size_m": 1.0,
//!   "rows": ["WWW…", …],            // rows[j] covers y in [j, j+1); F U S W ~
//!   "materials": {"palette": [[r,g,b], …], "terrain": {"F": 0, …},
//!                 "regions": [{"rect": [x,y,w,h], "index": 5}]},
//!   "zones": {"turbine_hall": [x,y,w,h], …},
//!   "spawns": {"r1": {"x": 30.5, "y": 30.5, "yaw_deg": 0, "kind": "wheeled"}},
//!   "target": {"x": 40.5, "y": 36.5, "radius_m": 0.5},
//!   "thermal_bindings": [{"rect": [x,y,w,h], "variable": "cond_cw_out_c"},
//!                        {"rect": [x,y,w,h], "temp_c": 35.0}],
//!   "interactions": [{"name": "sg1_feed_valve", "x": 7.5, "y": 46.5, "variable": "sg1_feed_valve"}]
//! }
//! ```

use std::collections::{BTreeMap, HashMap};

use serde::Deserialize;

use super::{Cell, CellThermal, Interaction, Pose, Rect, RobotKind, Spawn, Target, Terrain, WorldMap};
use crate::plant::registry;

pub const DEFAULT_MAP_JSON: &str = include_str!("../../maps/npp_default.json");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("malformed map document: {0}")]
    Syntax(String),
    #[error("map needs width and height >= 1, got {width}x{height}")]
    Size { width: usize, height: usize },
    #[error("expected {expected} rows, got {got}")]
    RowCount { expected: usize, got: usize },
    #[error("row {row}: expected {expected} cells, got {got}")]
    RowWidth { row: usize, expected: usize, got: usize },
    #[error("row {row}, column {col}: unknown terrain code {code:?}")]
    Terrain { row: usize, col: usize, code: char },
    #[error("{what} {rect:?} lies outside the map")]
    OutOfBounds { what: String, rect: [usize; 4] },
    #[error("thermal binding {index} names unknown variable {variable:?}")]
    DanglingBinding { index: usize, variable: String },
    #[error("thermal binding {index} must have exactly one of variable / temp_c")]
    BindingShape { index: usize },
    #[error("row {row}, column {col}: more than one thermal binding")]
    BindingOverlap { row: usize, col: usize },
    #[error("material index {index} outside palette of {len}")]
    Palette { index: usize, len: usize },
    #[error("{what}: {reason}")]
    Invalid { what: String, reason: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    #[serde(default = "default_name")]
    name: String,
    width: usize,
    height: usize,
    #[serde(default = "one")]
    cell_size_m: f64,
    rows: Vec<String>,
    #[serde(default)]
    materials: Materials,
    #[serde(default)]
    zones: BTreeMap<String, [usize; 4]>,
    #[serde(default)]
    spawns: BTreeMap<String, SpawnDoc>,
    target: TargetDoc,
    #[serde(default)]
    thermal_bindings: Vec<BindingDoc>,
    #[serde(default)]
    interactions: Vec<InteractionDoc>,
}

fn default_name() -> String {
    "unnamed".into()
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Materials {
    palette: Vec<[u8; 3]>,
    #[serde(default)]
    terrain: HashMap<char, usize>,
    #[serde(default)]
    regions: Vec<MaterialRegion>,
}

impl Default for Materials {
    fn default() -> Self {
        Self {
            palette: vec![[90, 90, 90], [110, 90, 60], [150, 150, 150], [180, 170, 150], [30, 80, 200]],
            terrain: [('F', 0), ('U', 1), ('S', 2), ('W', 3), ('~', 4)].into_iter().collect(),
            regions: Vec::new(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialRegion {
    rect: [usize; 4],
    index: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpawnDoc {
    x: f64,
    y: f64,
    #[serde(default)]
    z: f64,
    #[serde(default)]
    yaw_deg: f64,
    #[serde(default = "wheeled")]
    kind: String,
}

fn wheeled() -> String {
    "wheeled".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetDoc {
    x: f64,
    y: f64,
    #[serde(default = "half")]
    radius_m: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BindingDoc {
    rect: [usize; 4],
    variable: Option<String>,
    temp_c: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractionDoc {
    name: String,
    x: f64,
    y: f64,
    variable: String,
}

fn rect(what: &str, r: [usize; 4], width: usize, height: usize) -> Result<Rect, MapError> {
    let [x, y, w, h] = r;
    if w == 0 || h == 0 || x + w > width || y + h > height {
        return Err(MapError::OutOfBounds { what: what.to_string(), rect: r });
    }
    Ok(Rect { x, y, w, h })
}

fn invalid(what: impl Into<String>, reason: impl Into<String>) -> MapError {
    MapError::Invalid { what: what.into(), reason: reason.into() }
}

/// Parses and validates a map document.
pub fn load_map(document: &str) -> Result<WorldMap, MapError> {
    let doc: Doc = serde_json::from_str(document).map_err(|e| MapError::Syntax(e.to_string()))?;
    let (width, height) = (doc.width, doc.height);
    if width == 0 || height == 0 {
        return Err(MapError::Size { width, height });
    }
    if !(doc.cell_size_m.is_finite() && doc.cell_size_m > 0.0) {
        return Err(invalid("cell_size_m", "must be positive"));
    }
    if doc.rows.len() != height {
        return Err(MapError::RowCount { expected: height, got: doc.rows.len() });
    }
    let palette = doc.materials.palette;
    let check_index = |index: usize| {
        if index < palette.len() {
            Ok(index)
        } else {
            Err(MapError::Palette { index, len: palette.len() })
        }
    };

    let mut cells = Vec::with_capacity(width * height);
    for (row, text) in doc.rows.iter().enumerate() {
        let got = text.chars().count();
        if got != width {
            return Err(MapError::RowWidth { row, expected: width, got });
        }
        for (col, code) in text.chars().enumerate() {
            let terrain = Terrain::from_code(code).ok_or(MapError::Terrain { row, col, code })?;
            let material = check_index(doc.materials.terrain.get(&code).copied().unwrap_or(0))?;
            cells.push(Cell { terrain, material, thermal: CellThermal::None });
        }
    }

    for (i, region) in doc.materials.regions.iter().enumerate() {
        let r = rect(&format!("material region {i}"), region.rect, width, height)?;
        let index = check_index(region.index)?;
        for (cx, cy) in r.cells() {
            cells[cy * width + cx].material = index;
        }
    }

    let mut bound_variables: Vec<String> = Vec::new();
    for (index, b) in doc.thermal_bindings.iter().enumerate() {
        let r = rect(&format!("thermal binding {index}"), b.rect, width, height)?;
        let thermal = match (&b.variable, b.temp_c) {
            (Some(var), None) => {
                if !registry().iter().any(|d| &d.name == var) {
                    return Err(MapError::DanglingBinding { index, variable: var.clone() });
                }
                let slot = match bound_variables.iter().position(|v| v == var) {
                    Some(p) => p,
                    None => {
                        bound_variables.push(var.clone());
                        bound_variables.len() - 1
                    }
                };
                CellThermal::Bound(slot)
            }
            (None, Some(t)) if t.is_finite() => CellThermal::Static(t),
            _ => return Err(MapError::BindingShape { index }),
        };
        for (cx, cy) in r.cells() {
            let cell = &mut cells[cy * width + cx];
            if cell.thermal != CellThermal::None {
                return Err(MapError::BindingOverlap { row: cy, col: cx });
            }
            cell.thermal = thermal.clone();
        }
    }

    let zones = doc
        .zones
        .iter()
        .map(|(name, r)| Ok((name.clone(), rect(&format!("zone {name}"), *r, width, height)?)))
        .collect::<Result<BTreeMap<_, _>, MapError>>()?;

    let mut map = WorldMap {
        name: doc.name,
        width,
        height,
        cell_size_m: doc.cell_size_m,
        cells,
        palette,
        zones,
        spawns: BTreeMap::new(),
        target: Target { x_m: doc.target.x, y_m: doc.target.y, radius_m: doc.target.radius_m },
        bound_variables,
        interactions: Vec::new(),
    };

    if map.cell_at_m(map.target.x_m, map.target.y_m).is_none() {
        return Err(invalid("target", "outside the map"));
    }
    if !(map.target.radius_m > 0.0) {
        return Err(invalid("target", "radius must be positive"));
    }

    for (id, s) in doc.spawns {
        let what = format!("spawn {id}");
        if id.is_empty() || !id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-') {
            return Err(invalid(what, "id must be [A-Za-z0-9_-]+"));
        }
        let kind: RobotKind = s.kind.parse().map_err(|e: String| invalid(&what, e))?;
        if !map.passable(s.x, s.y, kind) {
            return Err(invalid(&what, format!("({}, {}) is not passable for a {} robot", s.x, s.y, kind.as_str())));
        }
        let z_ok = if kind == RobotKind::Aerial { (0.0..=super::MAX_ALTITUDE_M).contains(&s.z) } else { s.z == 0.0 };
        if !z_ok {
            return Err(invalid(&what, "altitude out of range for kind"));
        }
        let pose = Pose { x_m: s.x, y_m: s.y, z_m: s.z, yaw_deg: super::wrap_deg(s.yaw_deg) };
        map.spawns.insert(id, Spawn { pose, kind });
    }

    for i in doc.interactions {
        if map.cell_at_m(i.x, i.y).is_none() {
            return Err(invalid(format!("interaction {}", i.name), "outside the map"));
        }
        if !registry().iter().any(|d| d.name == i.variable) {
            return Err(invalid(format!("interaction {}", i.name), format!("unknown variable {}", i.variable)));
        }
        map.interactions.push(Interaction { name: i.name, x_m: i.x, y_m: i.y, variable: i.variable });
    }
    Ok(map)
}

/// The bundled plant layout.
pub fn default_map() -> WorldMap {
    load_map(DEFAULT_MAP_JSON).expect("bundled map is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> serde_json::Value {
        json!({"width": 3, "height": 2, "rows": ["FFF", "FWF"], "target": {"x": 0.5, "y": 0.5}})
    }

    #[test]
    fn default_map_inventory() {
        let m = default_map();
        assert_eq!(m.zones.len(), 4);
        for z in ["reactor_building", "turbine_hall", "cooling_water", "power_area"] {
            assert!(m.zones.contains_key(z), "{z}");
        }
        assert!(m.bound_variables.iter().any(|v| v == "cond_cw_out_c"));
        assert!(m.interactions.iter().any(|i| i.variable == "sg1_feed_valve"));
        // staging floor for the swarm
        let hall = m.zones["turbine_hall"];
        let open = Rect { x: hall.x, y: hall.y, w: 30, h: 20 };
        assert!(open.cells().all(|(cx, cy)| m.cell(cx, cy).terrain == Terrain::Flat));
    }

    #[test]
    fn valve_sits_next_to_feed_piping() {
        let m = default_map();
        let v = m.interactions.iter().find(|i| i.name == "sg1_feed_valve").unwrap();
        let (cx, cy) = m.cell_at_m(v.x_m, v.y_m).unwrap();
        assert_eq!(m.cell(cx, cy).terrain, Terrain::Flat);
        let west = m.cell(cx - 1, cy);
        assert_eq!(west.terrain, Terrain::Wall);
        assert!(matches!(west.thermal, CellThermal::Bound(_)));
    }

    #[test]
    fn degenerate_world() {
        let doc = json!({"width": 1, "height": 1, "rows": ["F"], "target": {"x": 0.5, "y": 0.5},
                         "spawns": {"r": {"x": 0.5, "y": 0.5}}});
        let m = load_map(&doc.to_string()).unwrap();
        assert_eq!(m.spawns["r"].pose.x_m, m.target.x_m);
    }

    #[test]
    fn dangling_binding() {
        let mut d = base();
        d["thermal_bindings"] = json!([{"rect": [0, 0, 1, 1], "variable": "bogus"}]);
        assert_eq!(
            load_map(&d.to_string()),
            Err(MapError::DanglingBinding { index: 0, variable: "bogus".into() })
        );
    }

    #[test]
    fn structural_errors_name_location() {
        let mut d = base();
        d["rows"] = json!(["FFF", "FXF"]);
        assert_eq!(load_map(&d.to_string()), Err(MapError::Terrain { row: 1, col: 1, code: 'X' }));
        d["rows"] = json!(["FFF", "FF"]);
        assert_eq!(load_map(&d.to_string()), Err(MapError::RowWidth { row: 1, expected: 3, got: 2 }));
        d["rows"] = json!(["FFF"]);
        assert_eq!(load_map(&d.to_string()), Err(MapError::RowCount { expected: 2, got: 1 }));
    }

    #[test]
    fn binding_rules() {
        let mut d = base();
        d["thermal_bindings"] = json!([
            {"rect": [0, 0, 2, 1], "temp_c": 20.0},
            {"rect": [1, 0, 1, 1], "variable": "t_avg_c"}
        ]);
        assert_eq!(load_map(&d.to_string()), Err(MapError::BindingOverlap { row: 0, col: 1 }));
        d["thermal_bindings"] = json!([{"rect": [0, 0, 1, 1], "temp_c": 20.0, "variable": "t_avg_c"}]);
        assert_eq!(load_map(&d.to_string()), Err(MapError::BindingShape { index: 0 }));
        d["thermal_bindings"] = json!([{"rect": [2, 1, 2, 1], "temp_c": 20.0}]);
        assert!(matches!(load_map(&d.to_string()), Err(MapError::OutOfBounds { .. })));
    }

    #[test]
    fn spawn_must_be_passable() {
        let mut d = base();
        d["spawns"] = json!({"r": {"x": 1.5, "y": 1.5}});
        assert!(matches!(load_map(&d.to_string()), Err(MapError::Invalid { .. })));
    }
}

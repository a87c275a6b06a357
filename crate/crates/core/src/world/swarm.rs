// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{robot_color, Pose, RobotKind, RobotState, Terrain, World};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SwarmError {
    #[error("unknown zone {0}")]
    UnknownZone(String),
    #[error("swarm size must be between 1 and 100, got {0}")]
    Size(usize),
    #[error("zone {zone} has capacity for {capacity} robots in a {cols}x{rows} block, {requested} requested")]
    Capacity { zone: String, capacity: usize, requested: usize, cols: usize, rows: usize },
}

pub fn swarm_id(i: usize) -> String {
    format!("swarm_{i:02}")
}

/// Places `n` wheeled robots on a compact block of FLAT cells inside `zone`,
/// filled row by row from the block origin. The origin is drawn from every
/// position where the block fits, using `seed`. Previous swarm robots are
/// removed first. Returns the new ids.
pub fn spawn_swarm(world: &mut World, n: usize, zone: &str, seed: u64) -> Result<Vec<String>, SwarmError> {
    if n == 0 || n > 100 {
        return Err(SwarmError::Size(n));
    }
    let map = world.map.clone();
    let rect = *map.zones.get(zone).ok_or_else(|| SwarmError::UnknownZone(zone.to_string()))?;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let flat = |cx: usize, cy: usize| map.cell(cx, cy).terrain == Terrain::Flat;

    let mut origins = Vec::new();
    if cols <= rect.w && rows <= rect.h {
        for oy in rect.y..=rect.y + rect.h - rows {
            for ox in rect.x..=rect.x + rect.w - cols {
                let fits = (0..n).all(|i| flat(ox + i % cols, oy + i / cols));
                if fits {
                    origins.push((ox, oy));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some(&(ox, oy)) = origins.choose(&mut rng) else {
        let capacity = rect.cells().filter(|&(cx, cy)| flat(cx, cy)).count();
        return Err(SwarmError::Capacity { zone: zone.to_string(), capacity, requested: n, cols, rows });
    };

    world.robots.retain(|id, _| !id.starts_with("swarm_"));
    world.extra_spawns.retain(|id, _| !id.starts_with("swarm_"));
    let base = world.robots.len();
    let s = map.cell_size_m;
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let id = swarm_id(i);
        let pose = Pose {
            x_m: ((ox + i % cols) as f64 + 0.5) * s,
            y_m: ((oy + i / cols) as f64 + 0.5) * s,
            z_m: 0.0,
            yaw_deg: 0.0,
        };
        world.robots.insert(
            id.clone(),
            RobotState {
                id: id.clone(),
                kind: RobotKind::Wheeled,
                pose,
                trace_enabled: false,
                possessed_by: None,
                color: robot_color(base + i),
            },
        );
        world.extra_spawns.insert(id.clone(), pose);
        ids.push(id);
    }
    Ok(ids)
}

// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use npptwin::env::{EnvConfig, Episode};
use npptwin::render::{
    first_person_columns, render_first_person, thermal_color, RenderMode, CEILING_LIT, FLOOR_LIT, NO_TEMP,
};
use npptwin::world::{
    apply_move, cell_temperature, compass_bearing, default_map, horizontal_distance, wrap_deg, Action, NoThermal, Pose, World,
};
use proptest::prelude::*;

const ROBOTS: [&str; 4] = ["r1", "atlas", "champ", "drone"];
const ACTIONS: [Action; 6] = [Action::Forward, Action::Backward, Action::TurnLeft, Action::TurnRight, Action::Up, Action::Down];

fn world() -> World {
    World::new(Arc::new(default_map()))
}

proptest! {
    #[test]
    fn wrap_lands_in_half_open_range(a in -1e6f64..1e6) {
        let w = wrap_deg(a);
        prop_assert!(w > -180.0 && w <= 180.0);
        prop_assert!(wrap_deg(w - a).abs() < 1e-6);
    }

    #[test]
    fn turns_form_a_cyclic_group(robot in 0usize..4, lefts in 0usize..60, rights in 0usize..60) {
        let w = world();
        let mut r = w.robot(ROBOTS[robot]).unwrap().clone();
        let start = r.pose.yaw_deg;
        for _ in 0..lefts {
            r.pose = apply_move(&r, Action::TurnLeft, &w.map).unwrap().pose;
        }
        for _ in 0..rights {
            r.pose = apply_move(&r, Action::TurnRight, &w.map).unwrap().pose;
        }
        let expect = wrap_deg(start + 15.0 * (lefts as f64 - rights as f64));
        prop_assert!((r.pose.yaw_deg - expect).abs() < 1e-9, "{} vs {}", r.pose.yaw_deg, expect);
        prop_assert!(r.pose.yaw_deg > -180.0 && r.pose.yaw_deg <= 180.0);
    }

    #[test]
    fn random_walks_stay_legal(robot in 0usize..4, seq in proptest::collection::vec(0usize..6, 0..200)) {
        let w = world();
        let mut r = w.robot(ROBOTS[robot]).unwrap().clone();
        for i in seq {
            let before = r.pose;
            match apply_move(&r, ACTIONS[i], &w.map) {
                Ok(out) => {
                    if out.collided {
                        prop_assert_eq!(out.pose, before);
                    }
                    r.pose = out.pose;
                }
                Err(_) => prop_assert!(matches!(ACTIONS[i], Action::Up | Action::Down)),
            }
            prop_assert!(w.map.passable(r.pose.x_m, r.pose.y_m, r.kind));
            prop_assert!((0.0..=10.0).contains(&r.pose.z_m));
            let step = horizontal_distance(&before, r.pose.x_m, r.pose.y_m);
            prop_assert!(step == 0.0 || (step - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn compass_is_antisymmetric_and_shifts_with_yaw(
        ax in 0.0f64..80.0, ay in 0.0f64..50.0, bx in 0.0f64..80.0, by in 0.0f64..50.0, yaw in -180.0f64..180.0,
    ) {
        prop_assume!((ax - bx).hypot(ay - by) > 1e-6);
        let a = Pose { x_m: ax, y_m: ay, z_m: 0.0, yaw_deg: 0.0 };
        let b = Pose { x_m: bx, y_m: by, z_m: 0.0, yaw_deg: 0.0 };
        let ab = compass_bearing(&a, bx, by);
        let ba = compass_bearing(&b, ax, ay);
        prop_assert!(wrap_deg(ab - ba - 180.0).abs() < 1e-9);
        let turned = compass_bearing(&Pose { yaw_deg: yaw, ..a }, bx, by);
        let d = wrap_deg(turned - (ab - yaw));
        prop_assert!(d.abs() < 1e-9);
    }

    #[test]
    fn episode_reward_telescopes(robot in 0usize..4, seq in proptest::collection::vec(0u32..6, 1..120)) {
        let mut w = world();
        let id = ROBOTS[robot];
        let mut ep = Episode::new(EnvConfig::new(id)).unwrap();
        ep.reset_world(&mut w, None).unwrap();
        let target = w.map.target;
        let d0 = horizontal_distance(&w.robot(id).unwrap().pose, target.x_m, target.y_m);
        let (mut total, mut steps, mut collisions, mut reached) = (0.0, 0u32, 0u32, false);
        for a in seq {
            let Ok(o) = ep.advance(&mut w, a) else { continue };
            total += o.reward;
            steps += 1;
            collisions += o.info.collided as u32;
            reached = o.info.distance_m <= 0.5;
            if o.done {
                break;
            }
        }
        let d_n = horizontal_distance(&w.robot(id).unwrap().pose, target.x_m, target.y_m);
        let expect = (d0 - d_n) - 0.01 * steps as f64 - 0.05 * collisions as f64 + if reached { 1.0 } else { 0.0 };
        prop_assert!((total - expect).abs() < 1e-9, "{total} vs {expect}");
    }

    #[test]
    fn wall_geometry_is_the_same_in_both_modes(
        robot in 0usize..4, turns in 0usize..24, fwd in 0usize..6, w in 8usize..96, h in 8usize..64,
    ) {
        let world = world();
        let mut r = world.robot(ROBOTS[robot]).unwrap().clone();
        for _ in 0..turns {
            r.pose = apply_move(&r, Action::TurnLeft, &world.map).unwrap().pose;
        }
        for _ in 0..fwd {
            r.pose = apply_move(&r, Action::Forward, &world.map).unwrap().pose;
        }
        let lit = render_first_person(&world.map, &NoThermal, &r, RenderMode::Lit, w, h).unwrap();
        let thermal = render_first_person(&world.map, &NoThermal, &r, RenderMode::Thermal, w, h).unwrap();
        for (x, col) in first_person_columns(&world.map, &r, w, h).into_iter().enumerate() {
            let hot = col.hit.map(|hit| thermal_color(cell_temperature(&world.map, &NoThermal, hit.cell.0, hit.cell.1)));
            for y in 0..h {
                let wall = col.hit.is_some() && y >= col.rows.0 && y < col.rows.1;
                let l = lit.pixel(x, y);
                if wall {
                    prop_assert_eq!(l, world.map.material_color(col.hit.unwrap().cell.0, col.hit.unwrap().cell.1));
                    prop_assert_eq!(thermal.pixel(x, y), hot.unwrap());
                } else {
                    prop_assert_eq!(l, if y < col.rows.0 { CEILING_LIT } else { FLOOR_LIT });
                    prop_assert_eq!(thermal.pixel(x, y), NO_TEMP);
                }
            }
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Headless digital twin of a pressurized-water reactor plant.
//!
//! - [`plant`]: lumped-parameter plant surrogate and its variable registry.
//! - [`mirror`]: line-based TCP protocol mirroring plant variables into the twin.
//! - [`world`]: grid plant map, robots, compass, traces and swarms.
//! - [`render`]: raycast first-person and top-down views, lit and thermal.
//! - [`env`]: reset/step navigation episodes.
//! - [`bridge`]: length-prefixed command frames and the command grammar.
//! - [`twin`]: the twin server, its tick loop and the browser socket gateway.

pub mod bridge;
pub mod decimal;
pub mod env;
pub mod mirror;
mod net;
pub mod plant;
pub mod render;
pub mod twin;
pub mod world;

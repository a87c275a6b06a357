// SPDX-License-Identifier: Apache-2.0

//! Bidirectional plant-variable mirroring over a line-based TCP protocol.

mod client;
mod protocol;
mod server;

pub use client::{
    CachedValue, Generation, MirrorCache, MirrorClient, MirrorError, MirrorLink, Poller, DEFAULT_POLL_PERIOD,
};
pub use protocol::{
    is_var_name, parse_request, ClockMode, MirrorRequest, MirrorResponse, ProtocolError, MAX_BATCH,
    MAX_LINE_BYTES,
};
pub use server::{handle_line, serve_mirror, BackendError, MirrorBackend, MirrorServer, PlantService};

/// Default plant-side port.
pub const DEFAULT_PORT: u16 = 9100;

// SPDX-License-Identifier: Apache-2.0

//! The twin's command bridge: length-prefixed frames carrying
//! `<id>:<body>`, the command grammar and a blocking client.

mod client;
mod command;
mod frame;

pub use client::{BridgeClient, BridgeError, DEFAULT_TIMEOUT};
pub use command::{
    is_robot_id, parse_command, Command, CommandError, Reply, MAX_ADVANCE_MS, MAX_CAMERA_DIM, MAX_SWARM,
};
pub use frame::{is_frame_id, read_frame, write_frame, Frame, FrameDecoder, FrameError, MAX_FRAME_BYTES, MAX_ID_DIGITS};

pub const DEFAULT_PORT: u16 = 9000;

// SPDX-License-Identifier: Apache-2.0

//! Process wrappers and the benchmark harness around the twin stack.

pub mod bench;
pub mod services;

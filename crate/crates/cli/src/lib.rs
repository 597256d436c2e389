// SPDX-License-Identifier: Apache-2.0

//! `trainer` command-line tool and HTTP service.

pub mod commands;
pub mod server;

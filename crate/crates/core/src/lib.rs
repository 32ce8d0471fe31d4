// SPDX-License-Identifier: Apache-2.0

pub mod floorplan;
pub mod pgm;
pub mod pose;
pub mod gravity;
pub mod observation;
pub mod filter;
pub mod synth;
pub mod volume;
pub mod eval;
pub mod cli;

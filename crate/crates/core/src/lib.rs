//! Simulator for clearing cups, bowls and utensils off a table with single,
//! multi-object, pull and stack grasps.

pub mod action;
pub mod config;
pub mod fit;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod scene_io;
pub mod tableware;

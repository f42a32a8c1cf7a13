//! Game-theoretic highway merging: vehicle dynamics, driver control,
//! perception, Stackelberg lane games and a deterministic simulator.

pub mod config;
pub mod driver;
pub mod dynamics;
pub mod game;
pub mod geometry;
pub mod metrics;
pub mod perception;
pub mod planner;
pub mod plot;
pub mod sim;

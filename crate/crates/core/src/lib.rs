pub mod controller;
pub mod engine;
pub mod genome;
pub mod harness;
pub mod locomotion;
pub mod rng;
pub mod selection;
pub mod world;

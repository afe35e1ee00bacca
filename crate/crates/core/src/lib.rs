pub mod btree;
pub mod calibration;
pub mod components;
pub mod dsl;
pub mod geometry;
pub mod object;
pub mod predicator;
pub mod runtime;
pub mod sim;
pub mod spatial;

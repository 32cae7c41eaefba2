//! Oracles and criterion checks shared by this crate's tests and the
//! workspace acceptance target.
#![allow(dead_code)]

pub mod checks;
pub mod oracles;
pub mod tables;

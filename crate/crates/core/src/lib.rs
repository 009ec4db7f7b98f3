//! Dimension estimation of sampled spaces from local homology of two-scale
//! Vietoris–Rips pairs.

pub mod cli;
pub mod complex;
pub mod datagen;
pub mod geometry;
pub mod homology;
pub mod pipeline;
pub mod verify;

pub mod coding;
pub mod dimension;
pub mod diophantine;
pub mod error;
pub mod gauss;
pub mod group;
pub mod linalg;
pub mod moebius;
pub mod tail;
pub mod transfer;

//! Exact multiple-scale reduction of integrable and non-integrable lattice
//! models to a hierarchy of KdV equations, with the compatibility checks that
//! decide whether the reduced hierarchy is consistent.

pub mod coeff;
pub mod compat;
pub mod diffalg;
pub mod graded;
pub mod kdv;
pub mod linsolve;
pub mod oracle;
pub mod pipeline;
pub mod poly;
pub mod series;

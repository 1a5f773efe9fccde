//! Nonexpansive self-maps of test domains and sampling estimators for their
//! Lipschitz behaviour.

mod domain;
mod estimators;
mod expr;

pub use domain::{Domain, DomainKind, Extrema, Grid, MEMBERSHIP_TOL};
pub use estimators::{
    dist_inf, lip_at, lip_global, lip_hat_at, lipschitz_chain, rakotch_modulus, witness_sets,
    DistInf, LipschitzChain, RadiusSweep, RakotchModulusEstimate, WitnessParams, WitnessSets,
};
pub use expr::{Analytic1d, MapExpr, Node};

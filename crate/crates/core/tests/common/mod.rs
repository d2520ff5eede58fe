#![allow(dead_code)]

pub mod checks;
pub mod derivs;
pub mod fixtures;
pub mod hessian;
pub mod local;
pub mod oracle;
pub mod qp_gen;

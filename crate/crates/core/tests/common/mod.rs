#![allow(dead_code)]

use mec_coop::model::{Geometry, SystemParams};
use mec_coop::p1::lmax_partial;
use rand::Rng;

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// A feasible instance with the main constants scaled log-uniformly around
/// the reference values and the task a random fraction of the capacity.
pub fn random_instance<R: Rng>(rng: &mut R) -> SystemParams {
    let block = log_uniform(rng, 0.02, 0.3);
    let g = Geometry { d_user_helper: rng.gen_range(20.0..230.0), ..Geometry::default() };
    let mut p = SystemParams::with_geometry(&g, 0.0, block).unwrap();
    p.kappa_u *= log_uniform(rng, 0.5, 2.0);
    p.kappa_h *= log_uniform(rng, 0.5, 2.0);
    p.f_u_max *= log_uniform(rng, 0.5, 2.0);
    p.f_h_max *= log_uniform(rng, 0.5, 2.0);
    p.p_u_max *= log_uniform(rng, 0.25, 1.0);
    p.p_h_max *= log_uniform(rng, 0.25, 1.0);
    p.c_a *= log_uniform(rng, 0.5, 2.0);
    p.task_bits = lmax_partial(&p) * log_uniform(rng, 0.02, 0.9);
    p
}

/// Parameters of the distance and block-length sweeps.
pub fn at(task_bits: f64, block: f64, distance: f64) -> SystemParams {
    SystemParams::with_geometry(&Geometry { d_user_helper: distance, ..Geometry::default() }, task_bits, block).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

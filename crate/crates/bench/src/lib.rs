//! Fixed instances shared by the benchmarks.

use gsp_core::problems::{gen_random, gen_stokes_channel, schur_diagonal_preconditioner, RandomSpec, StokesSpec, WindField};
use gsp_core::{SaddleSystem, SpdPreconditioner};

pub struct Fixture {
    pub name: String,
    pub system: SaddleSystem,
    pub preconditioner: SpdPreconditioner,
}

pub fn random(m: usize, n: usize, skew: f64) -> Fixture {
    let spec = RandomSpec {
        m,
        n,
        density: 0.2,
        c_rank: n / 2,
        skew_strength: skew,
        seed: 7,
        ..RandomSpec::default()
    };
    let system = gen_random(&spec).expect("random fixture");
    let preconditioner = schur_diagonal_preconditioner(&system).expect("diag(S)");
    let kind = if skew == 0.0 { "spd" } else { "nspd" };
    Fixture { name: format!("random-{kind}-{m}x{n}"), system, preconditioner }
}

pub fn stokes(nx: usize, wind: bool) -> Fixture {
    let spec = StokesSpec {
        nx,
        ny: nx,
        viscosity: if wind { 0.05 } else { 1.0 },
        wind: wind.then_some(WindField::Poiseuille { strength: 1.0 }),
        ..StokesSpec::default()
    };
    let p = gen_stokes_channel(&spec).expect("stokes fixture");
    let kind = if wind { "oseen" } else { "stokes" };
    Fixture { name: format!("{kind}-{nx}"), system: p.system, preconditioner: p.preconditioner }
}

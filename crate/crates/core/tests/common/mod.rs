#![allow(dead_code)]

use feller::stats::xi_grid;
use feller::{LevySpec, RngStream};
use statrs::distribution::{Cauchy, ContinuousCDF, Normal};

pub const KS_LEVEL: f64 = 0.01;

/// The 41-point grid on [-10, 10] used by the ECF checks.
pub fn ecf_grid() -> Vec<f64> {
    xi_grid(10.0, 41)
}

pub fn normal_cdf(variance: f64) -> impl Fn(f64) -> f64 {
    let n = Normal::new(0.0, variance.sqrt()).unwrap();
    move |x| n.cdf(x)
}

pub fn cauchy_cdf(scale: f64) -> impl Fn(f64) -> f64 {
    let c = Cauchy::new(0.0, scale).unwrap();
    move |x| c.cdf(x)
}

pub fn draws(spec: &LevySpec, h: f64, n: usize, seed: u64) -> Vec<f64> {
    let sampler = feller::levy::IncrementSampler::new(*spec, h).unwrap();
    let mut rng = RngStream::new(seed);
    (0..n).map(|_| sampler.sample(&mut rng)).collect()
}

pub fn closed_form_catalog() -> Vec<LevySpec> {
    use feller::Direction;
    vec![
        LevySpec::brownian(),
        LevySpec::poisson(Direction::Up),
        LevySpec::cauchy(),
        LevySpec::stable(0.7).unwrap(),
        LevySpec::stable(1.5).unwrap(),
        LevySpec::stable(1.9).unwrap(),
        LevySpec::gamma(Direction::Up),
        LevySpec::nig(1.0, -0.25, 1.0, 0.0).unwrap(),
    ]
}

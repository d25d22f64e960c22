//! Built-in families and the figure runs that use them.

use crate::error::Result;
use crate::family::{
    make_meixner_like, make_mixture, make_nig_like, make_stable_like, FellerFamily, NamedFn,
    ScalarFn, WeightFunction,
};
use crate::levy::{Direction, LevySpec};

pub struct PresetInfo {
    pub name: &'static str,
    pub summary: &'static str,
}

pub const PRESETS: [PresetInfo; 4] = [
    PresetInfo {
        name: "paper-bpc",
        summary: "Brownian-Poisson-Cauchy mixture: Brownian motion on (-inf,-6), Poisson process \
                  (jumps 1 - e^{-i xi}) on (-4,4), Cauchy process on (6,inf), linear blends on \
                  (-6,-4) and (4,6)",
    },
    PresetInfo {
        name: "paper-stable-like",
        summary: "symmetric stable-like, psi_x(xi) = |xi|^alpha(x) with \
                  alpha(x) = 1 + (19/10) min(x/4 - floor(x/4), ceil(x/4) - x/4), \
                  oscillating between 1 and 1.95 with period 4",
    },
    PresetInfo {
        name: "paper-nig-like",
        summary: "mean-reverting NIG-like, alpha = delta = 1, mu = 0, beta(x) = -arctan(x)/pi",
    },
    PresetInfo {
        name: "paper-meixner-like",
        summary: "Meixner-like, b = m = 0, r = 1, a(x) = 1 + 10 exp(-1/(25 - x^2)) on |x| < 5, \
                  1 otherwise",
    },
];

pub fn paper_bpc() -> Result<FellerFamily> {
    let weights = [NamedFn::BpcBrownian, NamedFn::BpcPoisson, NamedFn::BpcCauchy]
        .into_iter()
        .map(|f| WeightFunction::new(ScalarFn::Named(f)))
        .collect::<Result<Vec<_>>>()?;
    let components = vec![
        LevySpec::brownian(),
        LevySpec::poisson(Direction::Down),
        LevySpec::cauchy(),
    ];
    Ok(make_mixture(components, weights)?.with_id("paper-bpc"))
}

pub fn paper_stable_like() -> Result<FellerFamily> {
    Ok(make_stable_like(ScalarFn::Named(NamedFn::OscillatingStableIndex))?
        .with_id("paper-stable-like"))
}

pub fn paper_nig_like() -> Result<FellerFamily> {
    Ok(make_nig_like(
        ScalarFn::Constant(1.0),
        ScalarFn::Named(NamedFn::ArctanSkew),
        ScalarFn::Constant(1.0),
        ScalarFn::Constant(0.0),
    )?
    .with_id("paper-nig-like"))
}

pub fn paper_meixner_like() -> Result<FellerFamily> {
    Ok(make_meixner_like(
        ScalarFn::Named(NamedFn::MeixnerBump),
        ScalarFn::Constant(0.0),
        ScalarFn::Constant(1.0),
        ScalarFn::Constant(0.0),
    )?
    .with_id("paper-meixner-like"))
}

pub fn preset(name: &str) -> Option<Result<FellerFamily>> {
    match name {
        "paper-bpc" => Some(paper_bpc()),
        "paper-stable-like" => Some(paper_stable_like()),
        "paper-nig-like" => Some(paper_nig_like()),
        "paper-meixner-like" => Some(paper_meixner_like()),
        _ => None,
    }
}

/// A figure run: preset, horizon and step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureSpec {
    pub id: u8,
    pub preset: &'static str,
    pub horizon: f64,
    pub h: f64,
    pub x0: f64,
    pub n_paths: usize,
}

pub const FIGURES: [FigureSpec; 4] = [
    FigureSpec {
        id: 1,
        preset: "paper-bpc",
        horizon: 20.0,
        h: 0.01,
        x0: 0.0,
        n_paths: 5,
    },
    FigureSpec {
        id: 2,
        preset: "paper-stable-like",
        horizon: 20.0,
        h: 0.1,
        x0: 0.0,
        n_paths: 5,
    },
    FigureSpec {
        id: 3,
        preset: "paper-nig-like",
        horizon: 1000.0,
        h: 0.1,
        x0: 0.0,
        n_paths: 5,
    },
    FigureSpec {
        id: 4,
        preset: "paper-meixner-like",
        horizon: 100.0,
        h: 0.1,
        x0: 0.0,
        n_paths: 5,
    },
];

pub fn figure(id: u8) -> Option<FigureSpec> {
    FIGURES.into_iter().find(|f| f.id == id)
}

/// Default run settings of a preset, taken from its figure.
pub fn preset_run(name: &str) -> Option<FigureSpec> {
    FIGURES.into_iter().find(|f| f.preset == name)
}

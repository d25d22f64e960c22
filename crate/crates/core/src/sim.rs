//! The Markov chain approximation: starting from `x0`, repeatedly draw
//! `z ~ L_h^(x)` at the current state `x` and move to `x + z`, until the
//! time reaches `(T - h, T]`.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::family::FellerFamily;
use crate::rng::RngStream;

/// States beyond this magnitude end the path.
pub const OVERFLOW_LIMIT: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub x0: f64,
    pub horizon: f64,
    pub h: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(invalid(format!("starting point must be finite, got {}", self.x0)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {}", self.h)));
        }
        if !(self.horizon >= self.h && self.horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon {} must be finite and at least the time step {}",
                self.horizon, self.h
            )));
        }
        if self.n_paths == 0 {
            return Err(invalid("at least one path is required"));
        }
        Ok(())
    }

    /// Number of steps `⌊T/h⌋`, robust to representation error when `T/h`
    /// is an integer.
    pub fn n_steps(&self) -> usize {
        let ratio = self.horizon / self.h;
        let n = ratio.floor();
        if (n + 1.0 - ratio) <= 1e-9 * ratio.max(1.0) {
            n as usize + 1
        } else {
            n as usize
        }
    }

    /// Time of grid point `k`; the last point is pinned to `T` when the grid
    /// lands on it.
    pub fn time_at(&self, k: usize) -> f64 {
        let t = k as f64 * self.h;
        if k == self.n_steps() && (t - self.horizon).abs() <= 1e-9 * self.horizon {
            self.horizon
        } else {
            t
        }
    }

    pub fn time_grid(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|k| self.time_at(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overflow {
    /// Index of the first step whose result was not kept.
    pub step: usize,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub family_id: String,
    pub config: SimConfig,
    pub path_index: u64,
    pub overflow: Option<Overflow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl SamplePath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("paths hold at least the starting point")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("paths hold at least the starting point")
    }

    pub fn is_truncated(&self) -> bool {
        self.provenance.overflow.is_some()
    }
}

/// Stream used by path `path_index` of a run with `seed`.
pub fn path_stream(seed: u64, path_index: u64) -> RngStream {
    RngStream::new(seed).substream(path_index)
}

pub fn simulate_path(family: &FellerFamily, config: &SimConfig, path_index: u64) -> Result<SamplePath> {
    config.validate()?;
    let mut rng = path_stream(config.seed, path_index);
    let n = config.n_steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    times.push(0.0);
    values.push(config.x0);
    let mut x = config.x0;
    let mut overflow = None;
    for k in 1..=n {
        let next = x + family.sample_increment_at(x, config.h, &mut rng)?;
        if !next.is_finite() || next.abs() > OVERFLOW_LIMIT {
            overflow = Some(Overflow {
                step: k,
                time: config.time_at(k),
                value: next,
            });
            break;
        }
        x = next;
        times.push(config.time_at(k));
        values.push(x);
    }
    Ok(SamplePath {
        times,
        values,
        provenance: Provenance {
            family_id: family.id().to_string(),
            config: *config,
            path_index,
            overflow,
        },
    })
}

/// `n_paths` independent paths on sub-streams `0..n_paths`. The result does
/// not depend on how rayon schedules the work.
pub fn simulate_ensemble(family: &FellerFamily, config: &SimConfig) -> Result<Vec<SamplePath>> {
    config.validate()?;
    (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(family, config, i))
        .collect()
}

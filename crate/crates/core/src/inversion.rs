//! Distribution tables from characteristic exponents.
//!
//! The distribution function of `L_h` is recovered from `φ(ξ) = exp(-hψ(ξ))`
//! through the Gil-Pelaez formula
//!
//! ```text
//! F(x) = 1/2 - (1/π) ∫_0^∞ Im[exp(-iξx) φ(ξ)] / ξ dξ
//! ```
//!
//! evaluated with the midpoint rule on `n_xi` cells of `(0, xi_max]`. The
//! midpoint nodes never touch `ξ = 0`, where the integrand only has a
//! removable singularity. With node spacing `Δ` the rule aliases mass from a
//! distance `2π/Δ`, so the spacing is tied to the window width.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{domain, invalid, Edge, Error, Result};
use crate::levy::{check_step, LevySpec};
use crate::rng::RngStream;

/// Window half-width in standard deviations for light-tailed laws.
const SIGMA_WINDOW: f64 = 12.0;
/// Modulus of the characteristic function at which the integral is cut.
const CF_CUTOFF: f64 = 1e-13;
/// Also stop once the Gil-Pelaez integrand `|φ|/ξ` is this small, for laws
/// whose characteristic function decays only polynomially (Gamma).
const INTEGRAND_CUTOFF: f64 = 1e-10;
const PILOT_DRAWS: usize = 1_000;
/// Pilot windows are wide compared with the body of the law.
const HEAVY_TAIL_N_X: usize = 16_384;
const PILOT_SEED: u64 = 0x5EED_F0E1;
const MONOTONE_WARN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    pub xi_max: f64,
    pub n_xi: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub tail_mass_tol: f64,
}

impl InversionConfig {
    pub const DEFAULT_N_X: usize = 2048;
    pub const DEFAULT_TAIL_TOL: f64 = 5e-3;

    pub fn validate(&self) -> Result<()> {
        if !(self.xi_max > 0.0 && self.xi_max.is_finite()) {
            return Err(invalid(format!("xi_max must be positive, got {}", self.xi_max)));
        }
        if self.n_xi < 256 {
            return Err(invalid(format!("n_xi must be at least 256, got {}", self.n_xi)));
        }
        if !(self.x_min < self.x_max && self.x_min.is_finite() && self.x_max.is_finite()) {
            return Err(invalid(format!(
                "window [{}, {}] is not a finite nonempty interval",
                self.x_min, self.x_max
            )));
        }
        if self.n_x < 512 {
            return Err(invalid(format!("n_x must be at least 512, got {}", self.n_x)));
        }
        if !(self.tail_mass_tol > 0.0 && self.tail_mass_tol <= 0.01) {
            return Err(invalid(format!(
                "tail_mass_tol must lie in (0, 0.01], got {}",
                self.tail_mass_tol
            )));
        }
        Ok(())
    }

    /// Picks the quadrature for a given window: `xi_max` where `|φ|` drops
    /// below 1e-13 (or `|φ|/ξ` below 1e-10), node spacing
    /// `π / (x_max - x_min)`.
    pub fn for_window(
        exponent: impl Fn(f64) -> Complex64,
        h: f64,
        x_min: f64,
        x_max: f64,
    ) -> Result<Self> {
        Self::for_window_with(exponent, h, x_min, x_max, Self::DEFAULT_N_X)
    }

    /// As [`for_window`](Self::for_window) with `n_x` table points.
    pub fn for_window_with(
        exponent: impl Fn(f64) -> Complex64,
        h: f64,
        x_min: f64,
        x_max: f64,
        n_x: usize,
    ) -> Result<Self> {
        check_step(h)?;
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(invalid(format!("window [{x_min}, {x_max}] is empty or not finite")));
        }
        let mut xi_max = 1.0;
        loop {
            let modulus = (-h * exponent(xi_max).re).exp();
            if modulus <= CF_CUTOFF || modulus / xi_max <= INTEGRAND_CUTOFF {
                break;
            }
            xi_max *= 1.25;
            if xi_max > 1e7 {
                return Err(domain(
                    "characteristic function does not decay; cannot pick a truncation point",
                ));
            }
        }
        let spacing = PI / (x_max - x_min);
        let n_xi = ((xi_max / spacing).ceil() as usize).max(256);
        let cfg = Self {
            xi_max,
            n_xi,
            x_min,
            x_max,
            n_x,
            tail_mass_tol: Self::DEFAULT_TAIL_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default configuration for a catalog process: `mean ± 12 sd` when the
    /// variance exists, otherwise a window spread around pilot quantiles.
    pub fn for_spec(spec: &LevySpec, h: f64) -> Result<Self> {
        let (lo, hi, n_x) = spec_window(spec, h)?;
        Self::for_window_with(|xi| spec.exponent(xi), h, lo, hi, n_x)
    }
}

fn spec_window(spec: &LevySpec, h: f64) -> Result<(f64, f64, usize)> {
    let cumulants = spec.analytic_cumulants(h)?;
    match (cumulants.mean, cumulants.variance) {
        (Some(m), Some(v)) if v > 0.0 => {
            let s = v.sqrt();
            Ok((m - SIGMA_WINDOW * s, m + SIGMA_WINDOW * s, InversionConfig::DEFAULT_N_X))
        }
        _ if spec.has_closed_form_sampler() => {
            let (lo, hi) = pilot_window(spec, h)?;
            Ok((lo, hi, HEAVY_TAIL_N_X))
        }
        _ => Err(invalid(format!(
            "{spec} has no finite variance and no closed-form sampler; supply a window"
        ))),
    }
}

fn pilot_window(spec: &LevySpec, h: f64) -> Result<(f64, f64)> {
    let mut rng = RngStream::new(PILOT_SEED);
    let mut draws: Vec<f64> = (0..PILOT_DRAWS)
        .map(|_| spec.sample_increment(h, &mut rng))
        .collect::<Result<_>>()?;
    draws.sort_by(f64::total_cmp);
    let at = |q: f64| draws[((q * PILOT_DRAWS as f64) as usize).min(PILOT_DRAWS - 1)];
    let median = at(0.5);
    let half = (at(0.99) - median).max(median - at(0.01));
    if !(half > 0.0) {
        return Err(domain(format!("pilot draws of {spec} are degenerate")));
    }
    Ok((median - 8.0 * half, median + 8.0 * half))
}

/// Tabulated, monotone distribution function on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    config: InversionConfig,
    source: String,
    warnings: Vec<String>,
}

/// Builds the table of `L_h` for the exponent. The exponent must satisfy
/// `ψ(-ξ) = conj ψ(ξ)`.
pub fn build_cdf_table(
    exponent: impl Fn(f64) -> Complex64,
    h: f64,
    cfg: InversionConfig,
    source: &str,
) -> Result<CdfTable> {
    check_step(h)?;
    cfg.validate()?;
    check_hermitian(&exponent, cfg.xi_max)?;

    let n_x = cfg.n_x;
    let dx = (cfg.x_max - cfg.x_min) / (n_x - 1) as f64;
    let grid: Vec<f64> = (0..n_x)
        .map(|j| if j == n_x - 1 { cfg.x_max } else { cfg.x_min + j as f64 * dx })
        .collect();

    let dxi = cfg.xi_max / cfg.n_xi as f64;
    let mut sums = vec![0.0; n_x];
    for k in 0..cfg.n_xi {
        let xi = (k as f64 + 0.5) * dxi;
        let cf = (-h * exponent(xi)).exp();
        if !(cf.re.is_finite() && cf.im.is_finite()) {
            return Err(domain(format!("characteristic function not finite at xi={xi}")));
        }
        // exp(-iξx_j) φ(ξ)/ξ, advanced along the grid by a fixed rotation
        let mut z = cf / xi * Complex64::from_polar(1.0, -xi * cfg.x_min);
        let rotation = Complex64::from_polar(1.0, -xi * dx);
        for s in sums.iter_mut() {
            *s += z.im;
            z *= rotation;
        }
    }
    let raw: Vec<f64> = sums.iter().map(|s| 0.5 - dxi / PI * s).collect();

    let lower = raw[0];
    if lower > cfg.tail_mass_tol {
        return Err(Error::WindowTooSmall {
            edge: Edge::Lower,
            mass: lower,
            tol: cfg.tail_mass_tol,
        });
    }
    let upper = 1.0 - raw[n_x - 1];
    if upper > cfg.tail_mass_tol {
        return Err(Error::WindowTooSmall {
            edge: Edge::Upper,
            mass: upper,
            tol: cfg.tail_mass_tol,
        });
    }

    let mut warnings = Vec::new();
    let mut running = 0.0f64;
    let mut deviation = 0.0f64;
    let mut cdf = Vec::with_capacity(n_x);
    for &value in &raw {
        running = running.max(value.clamp(0.0, 1.0));
        deviation = deviation.max((running - value).abs());
        cdf.push(running);
    }
    let (first, last) = (cdf[0], cdf[n_x - 1]);
    if !(last > first) {
        return Err(domain(format!("inverted distribution of {source} carries no mass")));
    }
    if deviation > MONOTONE_WARN {
        warnings.push(format!(
            "quadrature quality: raw distribution function deviates from monotone by {deviation:.2e}"
        ));
    }

    Ok(CdfTable {
        grid,
        cdf,
        config: cfg,
        source: source.to_string(),
        warnings,
    })
}

/// Table for a catalog process with the automatic configuration. The window
/// is widened while the tail check fails.
pub fn build_spec_table(spec: &LevySpec, h: f64) -> Result<CdfTable> {
    let (lo, hi, n_x) = spec_window(spec, h)?;
    let mut cfg = InversionConfig::for_window_with(|xi| spec.exponent(xi), h, lo, hi, n_x)?;
    let source = format!("{spec} at h={h}");
    for _ in 0..6 {
        match build_cdf_table(|xi| spec.exponent(xi), h, cfg, &source) {
            Err(Error::WindowTooSmall { .. }) => {
                let centre = 0.5 * (cfg.x_min + cfg.x_max);
                let half = cfg.x_max - cfg.x_min;
                cfg = InversionConfig::for_window_with(
                    |xi| spec.exponent(xi),
                    h,
                    centre - half,
                    centre + half,
                    n_x,
                )?;
            }
            other => return other,
        }
    }
    build_cdf_table(|xi| spec.exponent(xi), h, cfg, &source)
}

fn check_hermitian(exponent: &impl Fn(f64) -> Complex64, xi_max: f64) -> Result<()> {
    let at_zero = exponent(0.0);
    if !(at_zero.norm() <= 1e-12) {
        return Err(domain(format!("exponent does not vanish at zero: {at_zero}")));
    }
    for frac in [1e-3, 0.0137, 0.1, 0.37, 0.9] {
        let xi = frac * xi_max;
        let p = exponent(xi);
        let q = exponent(-xi);
        if !((q - p.conj()).norm() <= 1e-9 * (1.0 + p.norm())) {
            return Err(domain(format!(
                "exponent is not hermitian at xi={xi}: psi(xi)={p}, psi(-xi)={q}"
            )));
        }
    }
    Ok(())
}

impl CdfTable {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn config(&self) -> &InversionConfig {
        &self.config
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Linear interpolation of the table; 0 below and 1 above the window.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return if x < self.grid[0] { 0.0 } else { self.cdf[0] };
        }
        if x >= self.grid[n - 1] {
            return 1.0;
        }
        let i = self.grid.partition_point(|&g| g <= x);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let (f0, f1) = (self.cdf[i - 1], self.cdf[i]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    /// Inverse of the interpolated distribution function. The tail mass
    /// outside the window sits on its end points.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.grid.len();
        if u <= self.cdf[0] {
            return self.grid[0];
        }
        if u > self.cdf[n - 1] {
            return self.grid[n - 1];
        }
        let i = self.cdf.partition_point(|&f| f < u).clamp(1, n - 1);
        let (f0, f1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        if f1 > f0 {
            x0 + (x1 - x0) * (u - f0) / (f1 - f0)
        } else {
            x0
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.quantile(rng.open01())
    }

    /// Central difference of the interpolated distribution function over one
    /// grid cell on each side.
    pub fn density_at(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.config.x_min, self.config.x_max);
        if !(x >= lo && x <= hi) {
            return Err(domain(format!("x={x} outside table window [{lo}, {hi}]")));
        }
        let dx = self.grid[1] - self.grid[0];
        let a = (x - dx).max(lo);
        let b = (x + dx).min(hi);
        Ok(((self.cdf_at(b) - self.cdf_at(a)) / (b - a)).max(0.0))
    }

    /// Mean of the table law (uniform within each cell, atoms at the ends).
    pub fn mean(&self) -> f64 {
        self.cells().map(|(p, a, b)| p * 0.5 * (a + b)).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let second: f64 = self
            .cells()
            .map(|(p, a, b)| p * (a * a + a * b + b * b) / 3.0)
            .sum();
        second - m * m
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.grid.len();
        let (lo, hi) = (self.grid[0], self.grid[n - 1]);
        let atoms = [(self.cdf[0], lo, lo), (1.0 - self.cdf[n - 1], hi, hi)];
        self.grid
            .windows(2)
            .zip(self.cdf.windows(2))
            .map(|(x, f)| (f[1] - f[0], x[0], x[1]))
            .chain(atoms)
    }

    /// Two-column CSV `x,F` with round-trippable values.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "x,F")?;
        for (x, f) in self.grid.iter().zip(&self.cdf) {
            writeln!(out, "{x:.16e},{f:.16e}")?;
        }
        Ok(())
    }
}

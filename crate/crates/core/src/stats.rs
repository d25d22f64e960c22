//! Statistical checks for samplers and ensembles.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::family::FellerFamily;
use crate::rng::RngStream;
use crate::sim::SamplePath;

/// `(1/N) Σ_k exp(i ξ_j X_k)` for every `ξ_j`.
pub fn empirical_cf(samples: &[f64], xi_grid: &[f64]) -> Result<Vec<Complex64>> {
    if samples.is_empty() {
        return Err(domain("empirical characteristic function of an empty sample"));
    }
    let n = samples.len() as f64;
    Ok(xi_grid
        .iter()
        .map(|&xi| {
            let (mut re, mut im) = (0.0, 0.0);
            for &x in samples {
                let (s, c) = (xi * x).sin_cos();
                re += c;
                im += s;
            }
            Complex64::new(re / n, im / n)
        })
        .collect())
}

/// `n` equispaced frequencies on `[-max, max]`.
pub fn xi_grid(max: f64, n: usize) -> Vec<f64> {
    crate::family::linspace(-max, max, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcfReport {
    pub xi_grid: Vec<f64>,
    pub ecf: Vec<Complex64>,
    pub target: Vec<Complex64>,
    pub sup_error: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl EcfReport {
    /// Compares a sample with `exp(-h ψ(ξ))` on the grid, threshold `5/√N`.
    pub fn compare(
        samples: &[f64],
        xi_grid: &[f64],
        h: f64,
        exponent: impl Fn(f64) -> Result<Complex64>,
    ) -> Result<Self> {
        let ecf = empirical_cf(samples, xi_grid)?;
        let target = xi_grid
            .iter()
            .map(|&xi| exponent(xi).map(|psi| (-h * psi).exp()))
            .collect::<Result<Vec<_>>>()?;
        let sup_error = ecf
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let threshold = 5.0 / (samples.len() as f64).sqrt();
        Ok(Self {
            xi_grid: xi_grid.to_vec(),
            ecf,
            target,
            sup_error,
            threshold,
            pass: sup_error <= threshold,
        })
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "xi,ecf_re,ecf_im,target_re,target_im")?;
        for ((xi, e), t) in self.xi_grid.iter().zip(&self.ecf).zip(&self.target) {
            writeln!(out, "{xi:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", e.re, e.im, t.re, t.im)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "ecf sup error {:.4e} vs threshold {:.4e}: {}",
            self.sup_error,
            self.threshold,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Draws `n` increments at state `x`.
pub fn increments_at(
    family: &FellerFamily,
    x: f64,
    h: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    (0..n).map(|_| family.sample_increment_at(x, h, rng)).collect()
}

/// Checks the increment law of the family at `x` against its own exponent.
pub fn ecf_test(
    family: &FellerFamily,
    x: f64,
    h: f64,
    n: usize,
    xi_grid: &[f64],
    rng: &mut RngStream,
) -> Result<EcfReport> {
    if n < 1_000 {
        return Err(domain(format!("ecf test needs at least 1000 draws, got {n}")));
    }
    let samples = increments_at(family, x, h, n, rng)?;
    EcfReport::compare(&samples, xi_grid, h, |xi| family.exponent_at(x, xi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution; series cut once terms fall
/// below 1e-10.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    const TERM_TOL: f64 = 1e-10;
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K ≤ λ) = √(2π)/λ Σ_{k≥1} exp(-(2k-1)² π² / (8λ²))
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut sum = 0.0;
        for k in 1.. {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < TERM_TOL {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        // 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²)
        let mut sum = 0.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < TERM_TOL {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(domain("ks test of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut previous = f64::NEG_INFINITY;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        if !(f.is_finite() && f >= previous - 1e-12) {
            return Err(domain(format!("distribution function is not monotone near x={x}")));
        }
        previous = f;
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(n.sqrt() * d),
    })
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("two-sample ks test needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival((nf * mf / (nf + mf)).sqrt() * d),
    })
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.01, 0.25, 0.5, 0.75, 0.99];

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub eval_times: Vec<f64>,
    /// Grid time actually used for each evaluation time.
    pub grid_times: Vec<f64>,
    pub mean: Vec<Option<f64>>,
    pub variance: Vec<Option<f64>>,
    /// One row per time, one column per entry of [`QUANTILE_LEVELS`].
    pub quantiles: Vec<[f64; 5]>,
    /// Paths contributing at each time (truncated paths drop out).
    pub counts: Vec<usize>,
    pub n_paths: usize,
}

/// Lower empirical quantile: order statistic number `⌈qN⌉`.
pub fn lower_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Cross-sectional statistics at the last grid time not after each
/// evaluation time.
pub fn ensemble_stats(paths: &[SamplePath], eval_times: &[f64]) -> Result<EnsembleStats> {
    let first = paths.first().ok_or_else(|| domain("ensemble is empty"))?;
    let config = first.provenance.config;
    let grid = config.time_grid();
    let horizon = *grid.last().expect("grid has the origin");
    let mut stats = EnsembleStats {
        eval_times: eval_times.to_vec(),
        grid_times: Vec::new(),
        mean: Vec::new(),
        variance: Vec::new(),
        quantiles: Vec::new(),
        counts: Vec::new(),
        n_paths: paths.len(),
    };
    for &t in eval_times {
        if !(t >= 0.0 && t <= horizon + 1e-12 * horizon.max(1.0)) {
            return Err(domain(format!("evaluation time {t} outside [0, {horizon}]")));
        }
        let k = grid
            .partition_point(|&g| g <= t + 1e-9 * config.h)
            .saturating_sub(1);
        let mut values: Vec<f64> = paths.iter().filter_map(|p| p.values.get(k).copied()).collect();
        values.sort_by(f64::total_cmp);
        let count = values.len();
        let (mean, variance) = if count == 0 {
            (None, None)
        } else {
            let m = values.iter().sum::<f64>() / count as f64;
            // a constant column has no spread, whatever rounding did to m
            let v = (count > 1).then(|| {
                if values[0] == values[count - 1] {
                    0.0
                } else {
                    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (count - 1) as f64
                }
            });
            (Some(m), v)
        };
        let quantiles = if count == 0 {
            [f64::NAN; 5]
        } else {
            QUANTILE_LEVELS.map(|q| lower_quantile(&values, q))
        };
        stats.grid_times.push(grid[k]);
        stats.mean.push(mean);
        stats.variance.push(variance);
        stats.quantiles.push(quantiles);
        stats.counts.push(count);
    }
    Ok(stats)
}

impl EnsembleStats {
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,grid_t,count,mean,variance,q01,q25,q50,q75,q99")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
        for i in 0..self.eval_times.len() {
            let q = self.quantiles[i];
            writeln!(
                out,
                "{:.16e},{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.eval_times[i],
                self.grid_times[i],
                self.counts[i],
                opt(self.mean[i]),
                opt(self.variance[i]),
                q[0],
                q[1],
                q[2],
                q[3],
                q[4]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub state: f64,
    /// `None` where the increment has no mean, like the two fields below.
    pub empirical_drift: Option<f64>,
    pub analytic_drift: Option<f64>,
    pub stderr: Option<f64>,
}

/// Mean one-step increment per unit time at each state.
pub fn mean_reversion_diagnostic(
    family: &FellerFamily,
    states: &[f64],
    h: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<DriftEstimate>> {
    if n < 1_000 {
        return Err(domain(format!("drift diagnostic needs at least 1000 draws, got {n}")));
    }
    states
        .iter()
        .map(|&x| {
            let Some(analytic) = family.increment_mean_at(x, h)? else {
                return Ok(DriftEstimate {
                    state: x,
                    empirical_drift: None,
                    analytic_drift: None,
                    stderr: None,
                });
            };
            let samples = increments_at(family, x, h, n, rng)?;
            let nf = n as f64;
            let mean = samples.iter().sum::<f64>() / nf;
            let var = samples.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (nf - 1.0);
            Ok(DriftEstimate {
                state: x,
                empirical_drift: Some(mean / h),
                analytic_drift: Some(analytic / h),
                stderr: Some(var.sqrt() / nf.sqrt() / h),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ecf_of_trivial_samples() {
        let ones = empirical_cf(&[0.0; 10], &[-3.0, 0.0, 2.5]).unwrap();
        assert!(ones.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        let v = empirical_cf(&[1.0], &[PI]).unwrap()[0];
        assert!((v - Complex64::new(-1.0, 0.0)).norm() <= 1e-12);
        assert!(empirical_cf(&[], &[1.0]).is_err());
    }

    #[test]
    fn ks_single_point() {
        let r = ks_test(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn ks_rejects_non_monotone_cdf() {
        let samples: Vec<f64> = (0..20).map(|k| k as f64 / 20.0).collect();
        assert!(ks_test(&samples, |x| (10.0 * x).sin()).is_err());
    }

    #[test]
    fn kolmogorov_survival_known_values() {
        // classical critical values of the Kolmogorov distribution
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2239) - 0.10).abs() < 1e-4);
        // both series agree where they meet
        let below = kolmogorov_survival(1.18 - 1e-12);
        let above = kolmogorov_survival(1.18);
        assert!((below - above).abs() < 1e-9);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(0.2) > 0.999_99);
    }

    #[test]
    fn two_sample_statistic_by_hand() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]).unwrap();
        assert!((r.statistic - 1.0 / 3.0).abs() < 1e-15);
        let same = ks_two_sample(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert_eq!(same.statistic, 0.0);
    }

    #[test]
    fn lower_quantile_is_an_order_statistic() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(lower_quantile(&v, 0.5), 2.0);
        assert_eq!(lower_quantile(&v, 0.51), 3.0);
        assert_eq!(lower_quantile(&v, 0.01), 1.0);
        assert_eq!(lower_quantile(&v, 0.99), 4.0);
    }
}

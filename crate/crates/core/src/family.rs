//! State-dependent families of Lévy exponents `(ψ_x)`.
//!
//! A family is either a mixture `ψ_x(ξ) = Σ ψ_i(α_i(x) ξ)` of catalog
//! processes with nonnegative bounded Lipschitz weights, or a catalog class
//! whose parameters are functions of the state. In a mixture the increment
//! at state `x` is drawn as `Σ α_i(x) L_h^(i)` from independent lanes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::inversion::{self, CdfTable};
use crate::levy::{check_step, LevyKind, LevySpec};
use crate::rng::RngStream;

/// Closed interval, either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Construction(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn distance_to(&self, x: f64) -> f64 {
        (self.lo - x).max(x - self.hi).max(0.0)
    }

    fn distance_between(&self, other: &Interval) -> f64 {
        (self.lo - other.hi).max(other.lo - self.hi).max(0.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn set_distance(a: &[Interval], b: &[Interval]) -> f64 {
    a.iter()
        .flat_map(|p| b.iter().map(move |q| p.distance_between(q)))
        .fold(f64::INFINITY, f64::min)
}

/// Functions with a closed form that ship with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedFn {
    /// Brownian weight of the Brownian–Poisson–Cauchy mixture.
    BpcBrownian,
    BpcPoisson,
    BpcCauchy,
    /// `1 + 1.9 · min(x/4 - ⌊x/4⌋, ⌈x/4⌉ - x/4)`, period 4, between 1 and 1.95.
    OscillatingStableIndex,
    /// `-arctan(x)/π`
    ArctanSkew,
    /// `1 + 10 exp(-1/(25 - x²))` on `|x| < 5`, else 1.
    MeixnerBump,
    Identity,
    Square,
    /// `sgn(x) √|x|`
    SignedSqrt,
}

impl NamedFn {
    pub const ALL: [NamedFn; 9] = [
        NamedFn::BpcBrownian,
        NamedFn::BpcPoisson,
        NamedFn::BpcCauchy,
        NamedFn::OscillatingStableIndex,
        NamedFn::ArctanSkew,
        NamedFn::MeixnerBump,
        NamedFn::Identity,
        NamedFn::Square,
        NamedFn::SignedSqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedFn::BpcBrownian => "bpc-brownian-weight",
            NamedFn::BpcPoisson => "bpc-poisson-weight",
            NamedFn::BpcCauchy => "bpc-cauchy-weight",
            NamedFn::OscillatingStableIndex => "oscillating-stable-index",
            NamedFn::ArctanSkew => "arctan-skew",
            NamedFn::MeixnerBump => "meixner-bump",
            NamedFn::Identity => "identity",
            NamedFn::Square => "square",
            NamedFn::SignedSqrt => "signed-sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            NamedFn::BpcBrownian => {
                if x <= -6.0 {
                    1.0
                } else if x < -4.0 {
                    1.0 - (x + 6.0) / 2.0
                } else {
                    0.0
                }
            }
            NamedFn::BpcPoisson => {
                if (-4.0..=4.0).contains(&x) {
                    1.0
                } else if x > -6.0 && x < -4.0 {
                    (x + 6.0) / 2.0
                } else if x > 4.0 && x < 6.0 {
                    1.0 - (x - 4.0) / 2.0
                } else {
                    0.0
                }
            }
            NamedFn::BpcCauchy => {
                if x >= 6.0 {
                    1.0
                } else if x > 4.0 {
                    (x - 4.0) / 2.0
                } else {
                    0.0
                }
            }
            NamedFn::OscillatingStableIndex => {
                let y = x / 4.0;
                1.0 + 1.9 * (y - y.floor()).min(y.ceil() - y)
            }
            NamedFn::ArctanSkew => -x.atan() / PI,
            NamedFn::MeixnerBump => {
                if x.abs() < 5.0 {
                    1.0 + 10.0 * (-1.0 / (25.0 - x * x)).exp()
                } else {
                    1.0
                }
            }
            NamedFn::Identity => x,
            NamedFn::Square => x * x,
            NamedFn::SignedSqrt => x.signum() * x.abs().sqrt(),
        }
    }

    /// Global Lipschitz constant, `None` if there is none.
    pub fn lipschitz(self) -> Option<f64> {
        match self {
            NamedFn::BpcBrownian | NamedFn::BpcPoisson | NamedFn::BpcCauchy => Some(0.5),
            NamedFn::OscillatingStableIndex => Some(1.9 / 4.0),
            NamedFn::ArctanSkew => Some(1.0 / PI),
            // sup |d/dx 10 exp(-1/(25 - x²))| = 53.5914..., attained near |x| = 4.95
            NamedFn::MeixnerBump => Some(MEIXNER_BUMP_LIPSCHITZ),
            NamedFn::Identity => Some(1.0),
            NamedFn::Square | NamedFn::SignedSqrt => None,
        }
    }

    /// Global bounds `(inf, sup)`.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            NamedFn::BpcBrownian | NamedFn::BpcPoisson | NamedFn::BpcCauchy => (0.0, 1.0),
            NamedFn::OscillatingStableIndex => (1.0, 1.95),
            NamedFn::ArctanSkew => (-0.5, 0.5),
            NamedFn::MeixnerBump => (1.0, 1.0 + 10.0 * (-1.0f64 / 25.0).exp()),
            NamedFn::Identity | NamedFn::SignedSqrt => (f64::NEG_INFINITY, f64::INFINITY),
            NamedFn::Square => (0.0, f64::INFINITY),
        }
    }
}

const MEIXNER_BUMP_LIPSCHITZ: f64 = 53.6;

/// A real function of the state with a declarative description.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFn {
    Constant(f64),
    /// Linear between sorted breakpoints, flat outside them.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// `clamp(1 - dist(x, region)/ε, 0, 1)`
    DistanceBump { region: Vec<Interval>, epsilon: f64 },
    Named(NamedFn),
}

impl ScalarFn {
    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Construction("piecewise-linear function needs a breakpoint".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Construction("breakpoints must be finite".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Construction(
                "breakpoint abscissae must be strictly increasing".into(),
            ));
        }
        Ok(ScalarFn::PiecewiseLinear(points))
    }

    pub fn distance_bump(region: Vec<Interval>, epsilon: f64) -> Result<Self> {
        if region.is_empty() {
            return Err(Error::Construction("bump region must contain an interval".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Construction(format!("bump width must be positive, got {epsilon}")));
        }
        Ok(ScalarFn::DistanceBump { region, epsilon })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant(c) => *c,
            ScalarFn::PiecewiseLinear(points) => {
                let i = points.partition_point(|p| p.0 <= x);
                if i == 0 {
                    points[0].1
                } else if i == points.len() {
                    points[i - 1].1
                } else {
                    let (x0, y0) = points[i - 1];
                    let (x1, y1) = points[i];
                    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                }
            }
            ScalarFn::DistanceBump { region, epsilon } => {
                let d = region
                    .iter()
                    .map(|iv| iv.distance_to(x))
                    .fold(f64::INFINITY, f64::min);
                (1.0 - d / epsilon).clamp(0.0, 1.0)
            }
            ScalarFn::Named(f) => f.eval(x),
        }
    }

    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            ScalarFn::Constant(_) => Some(0.0),
            ScalarFn::PiecewiseLinear(points) => Some(
                points
                    .windows(2)
                    .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                    .fold(0.0, f64::max),
            ),
            ScalarFn::DistanceBump { epsilon, .. } => Some(1.0 / epsilon),
            ScalarFn::Named(f) => f.lipschitz(),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ScalarFn::Constant(c) => (*c, *c),
            ScalarFn::PiecewiseLinear(points) => points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1))),
            ScalarFn::DistanceBump { .. } => (0.0, 1.0),
            ScalarFn::Named(f) => f.bounds(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ScalarFn::Constant(c) => format!("constant {c}"),
            ScalarFn::PiecewiseLinear(points) => format!("piecewise-linear {points:?}"),
            ScalarFn::DistanceBump { region, epsilon } => {
                let parts: Vec<String> =
                    region.iter().map(|iv| format!("[{}, {}]", iv.lo, iv.hi)).collect();
                format!("bump around {} with width {epsilon}", parts.join(" u "))
            }
            ScalarFn::Named(f) => f.name().to_string(),
        }
    }
}

/// Nonnegative bounded Lipschitz mixing weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    pub func: ScalarFn,
    pub declared_lipschitz: f64,
    pub declared_bound: f64,
    pub description: String,
}

impl WeightFunction {
    /// Takes the declared constants from the function itself.
    pub fn new(func: ScalarFn) -> Result<Self> {
        let lipschitz = func.lipschitz().ok_or_else(|| {
            Error::Construction(format!("weight {} is not Lipschitz", func.describe()))
        })?;
        let (lo, hi) = func.bounds();
        if lo < 0.0 || !hi.is_finite() {
            return Err(Error::Construction(format!(
                "weight {} must be nonnegative and bounded, range is [{lo}, {hi}]",
                func.describe()
            )));
        }
        let description = func.describe();
        Ok(Self {
            func,
            declared_lipschitz: lipschitz,
            declared_bound: hi,
            description,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(ScalarFn::Constant(c))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.func.eval(x)
    }
}

/// Families whose catalog parameters depend on the state.
#[derive(Debug, Clone, PartialEq)]
pub enum Parametric {
    StableLike {
        alpha: ScalarFn,
    },
    NigLike {
        alpha: ScalarFn,
        beta: ScalarFn,
        delta: ScalarFn,
        mu: ScalarFn,
    },
    MeixnerLike {
        a: ScalarFn,
        b: ScalarFn,
        r: ScalarFn,
        m: ScalarFn,
    },
    DriftField {
        a: ScalarFn,
    },
}

impl Parametric {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Parametric::StableLike { .. } => "stable-like",
            Parametric::NigLike { .. } => "nig-like",
            Parametric::MeixnerLike { .. } => "meixner-like",
            Parametric::DriftField { .. } => "drift-field",
        }
    }

    /// Named parameter functions in a fixed order.
    pub fn functions(&self) -> Vec<(&'static str, &ScalarFn)> {
        match self {
            Parametric::StableLike { alpha } => vec![("alpha", alpha)],
            Parametric::NigLike {
                alpha,
                beta,
                delta,
                mu,
            } => vec![("alpha", alpha), ("beta", beta), ("delta", delta), ("mu", mu)],
            Parametric::MeixnerLike { a, b, r, m } => {
                vec![("a", a), ("b", b), ("r", r), ("m", m)]
            }
            Parametric::DriftField { a } => vec![("a", a)],
        }
    }

    fn local_kind(&self, x: f64) -> LevyKind {
        match self {
            Parametric::StableLike { alpha } => LevyKind::SymmetricStable { alpha: alpha.eval(x) },
            Parametric::NigLike {
                alpha,
                beta,
                delta,
                mu,
            } => LevyKind::Nig {
                alpha: alpha.eval(x),
                beta: beta.eval(x),
                delta: delta.eval(x),
                mu: mu.eval(x),
            },
            Parametric::MeixnerLike { a, b, r, m } => LevyKind::Meixner {
                a: a.eval(x),
                b: b.eval(x),
                r: r.eval(x),
                m: m.eval(x),
            },
            Parametric::DriftField { a } => LevyKind::DeterministicDrift { slope: a.eval(x) },
        }
    }

    /// Catalog process the family uses at state `x`.
    pub fn local_spec(&self, x: f64) -> Result<LevySpec> {
        LevySpec::new(self.local_kind(x))
            .map_err(|e| domain(format!("{} parameters at x={x}: {e}", self.kind_name())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    Mixture {
        components: Vec<LevySpec>,
        weights: Vec<WeightFunction>,
    },
    Parametric(Parametric),
}

/// Meixner parameters are rounded to this resolution before a table is built.
pub const MEIXNER_QUANTUM: f64 = 1e-3;
pub const TABLE_CACHE_CAPACITY: usize = 256;

type TableKey = [u64; 5];

#[derive(Debug, Default)]
struct CacheInner {
    tick: u64,
    entries: HashMap<TableKey, (Arc<CdfTable>, u64)>,
}

/// Least-recently-used cache of inversion tables. Tables depend only on the
/// key, so lookups never change results.
#[derive(Debug)]
pub struct TableCache {
    capacity: usize,
    inner: Mutex<CacheInner>,
}

impl TableCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            inner: Mutex::new(CacheInner::default()),
        }
    }

    fn get_or_build(&self, key: TableKey, build: impl FnOnce() -> Result<CdfTable>) -> Result<Arc<CdfTable>> {
        {
            let mut inner = self.inner.lock().expect("table cache poisoned");
            inner.tick += 1;
            let tick = inner.tick;
            if let Some(entry) = inner.entries.get_mut(&key) {
                entry.1 = tick;
                return Ok(entry.0.clone());
            }
        }
        let table = Arc::new(build()?);
        let mut inner = self.inner.lock().expect("table cache poisoned");
        inner.tick += 1;
        let tick = inner.tick;
        if inner.entries.len() >= self.capacity && !inner.entries.contains_key(&key) {
            if let Some(oldest) = inner
                .entries
                .iter()
                .min_by_key(|(_, (_, t))| *t)
                .map(|(k, _)| *k)
            {
                inner.entries.remove(&oldest);
            }
        }
        inner.entries.insert(key, (table.clone(), tick));
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("table cache poisoned").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn quantize(v: f64) -> f64 {
    (v / MEIXNER_QUANTUM).round() * MEIXNER_QUANTUM
}

/// A family `(ψ_x)` together with its increment sampler.
#[derive(Debug, Clone)]
pub struct FellerFamily {
    id: String,
    variant: Variant,
    tables: Arc<TableCache>,
}

impl PartialEq for FellerFamily {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.variant == other.variant
    }
}

/// Default state grid used for construction checks and validation.
pub fn default_x_grid() -> Vec<f64> {
    linspace(-50.0, 50.0, 1001)
}

pub fn default_xi_grid() -> Vec<f64> {
    linspace(-100.0, 100.0, 2001)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { hi } else { lo + k as f64 * step })
                .collect()
        }
    }
}

pub fn make_mixture(components: Vec<LevySpec>, weights: Vec<WeightFunction>) -> Result<FellerFamily> {
    if components.is_empty() {
        return Err(Error::Construction("mixture needs at least one component".into()));
    }
    if components.len() != weights.len() {
        return Err(Error::Construction(format!(
            "mixture has {} components but {} weights",
            components.len(),
            weights.len()
        )));
    }
    for w in &weights {
        for x in default_x_grid() {
            let v = w.eval(x);
            if !(v >= 0.0 && v <= w.declared_bound) {
                return Err(Error::Construction(format!(
                    "weight {} takes value {v} at x={x}, outside [0, {}]",
                    w.description, w.declared_bound
                )));
            }
        }
    }
    let names: Vec<String> = components.iter().map(|c| c.to_string()).collect();
    Ok(FellerFamily::new(
        format!("mixture[{}]", names.join("+")),
        Variant::Mixture {
            components,
            weights,
        },
    ))
}

/// Mixture whose component `i` acts alone on region `K_i`. Regions must be
/// at distance at least `ε` from each other.
pub fn make_separated_regions(regions: Vec<(Vec<Interval>, LevySpec)>, epsilon: f64) -> Result<FellerFamily> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Construction(format!("separation must be positive, got {epsilon}")));
    }
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            let d = set_distance(&regions[i].0, &regions[j].0);
            if d < epsilon {
                return Err(Error::Construction(format!(
                    "regions {i} and {j} are at distance {d}, less than the separation {epsilon}"
                )));
            }
        }
    }
    let mut components = Vec::with_capacity(regions.len());
    let mut weights = Vec::with_capacity(regions.len());
    for (region, spec) in regions {
        weights.push(WeightFunction::new(ScalarFn::distance_bump(region, epsilon)?)?);
        components.push(spec);
    }
    make_mixture(components, weights)
}

fn check_on_grid(
    family: &Parametric,
    accept: impl Fn(&LevySpec) -> std::result::Result<(), String>,
) -> Result<()> {
    for x in default_x_grid() {
        let spec = family
            .local_spec(x)
            .map_err(|e| Error::Construction(e.to_string()))?;
        accept(&spec).map_err(|msg| {
            Error::Construction(format!("{} at x={x}: {msg}", family.kind_name()))
        })?;
    }
    Ok(())
}

/// Stable-like family `ψ_x(ξ) = |ξ|^{α(x)}` with `α` inside `(0, 2)`.
pub fn make_stable_like(alpha: ScalarFn) -> Result<FellerFamily> {
    let p = Parametric::StableLike { alpha };
    check_on_grid(&p, |spec| match spec.kind() {
        LevyKind::SymmetricStable { alpha } if *alpha < 2.0 => Ok(()),
        LevyKind::SymmetricStable { alpha } => Err(format!("index {alpha} not below 2")),
        _ => unreachable!(),
    })?;
    Ok(FellerFamily::new("stable-like".into(), Variant::Parametric(p)))
}

/// NIG-like family; requires `δ(x) > 0` and `α(x) - |β(x)| > 0` on the grid.
pub fn make_nig_like(alpha: ScalarFn, beta: ScalarFn, delta: ScalarFn, mu: ScalarFn) -> Result<FellerFamily> {
    let p = Parametric::NigLike {
        alpha,
        beta,
        delta,
        mu,
    };
    check_on_grid(&p, |_| Ok(()))?;
    Ok(FellerFamily::new("nig-like".into(), Variant::Parametric(p)))
}

/// Meixner-like family; requires `a, r > 0` and `|b| < π` on the grid.
pub fn make_meixner_like(a: ScalarFn, b: ScalarFn, r: ScalarFn, m: ScalarFn) -> Result<FellerFamily> {
    let p = Parametric::MeixnerLike { a, b, r, m };
    check_on_grid(&p, |_| Ok(()))?;
    Ok(FellerFamily::new("meixner-like".into(), Variant::Parametric(p)))
}

/// Deterministic family `ψ_x(ξ) = -i a(x) ξ`. Not checked: non-Lipschitz and
/// unbounded fields are accepted so the validator can flag them.
pub fn make_drift_field(a: ScalarFn) -> FellerFamily {
    FellerFamily::new("drift-field".into(), Variant::Parametric(Parametric::DriftField { a }))
}

impl FellerFamily {
    pub fn new(id: String, variant: Variant) -> Self {
        Self {
            id,
            variant,
            tables: Arc::new(TableCache::new(TABLE_CACHE_CAPACITY)),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn table_cache(&self) -> &TableCache {
        &self.tables
    }

    /// Whether the family does not depend on the state.
    pub fn is_homogeneous(&self) -> bool {
        let constant = |f: &ScalarFn| matches!(f, ScalarFn::Constant(_));
        match &self.variant {
            Variant::Mixture { weights, .. } => weights.iter().all(|w| constant(&w.func)),
            Variant::Parametric(p) => p.functions().into_iter().all(|(_, f)| constant(f)),
        }
    }

    pub fn exponent_at(&self, x: f64, xi: f64) -> Result<Complex64> {
        if !x.is_finite() || !xi.is_finite() {
            return Err(domain(format!("exponent_at needs finite arguments, got ({x}, {xi})")));
        }
        match &self.variant {
            Variant::Mixture {
                components,
                weights,
            } => {
                let mut total = Complex64::new(0.0, 0.0);
                for (spec, w) in components.iter().zip(weights) {
                    total += spec.exponent(w.eval(x) * xi);
                }
                Ok(total)
            }
            Variant::Parametric(p) => Ok(p.local_spec(x)?.exponent(xi)),
        }
    }

    /// Draws the increment `L_h^(x)`.
    pub fn sample_increment_at(&self, x: f64, h: f64, rng: &mut RngStream) -> Result<f64> {
        check_step(h)?;
        match &self.variant {
            Variant::Mixture {
                components,
                weights,
            } => {
                let fork = rng.fork();
                let mut z = 0.0;
                for (i, (spec, w)) in components.iter().zip(weights).enumerate() {
                    let weight = w.eval(x);
                    if weight == 0.0 {
                        continue;
                    }
                    let mut lane = fork.lane(i as u64);
                    z += weight * self.sample_spec(spec, h, &mut lane)?;
                }
                Ok(z)
            }
            Variant::Parametric(Parametric::MeixnerLike { a, b, r, m }) => {
                let (a, b, r, m) = (quantize(a.eval(x)), quantize(b.eval(x)), quantize(r.eval(x)), quantize(m.eval(x)));
                let spec = LevySpec::meixner(a, b, r, m)
                    .map_err(|e| domain(format!("meixner-like parameters at x={x}: {e}")))?;
                let key = [a.to_bits(), b.to_bits(), r.to_bits(), m.to_bits(), h.to_bits()];
                let table = self
                    .tables
                    .get_or_build(key, || inversion::build_spec_table(&spec, h))?;
                Ok(table.sample(rng))
            }
            // Non-finite slopes come back as non-finite steps so the path
            // records an overflow instead of failing.
            Variant::Parametric(Parametric::DriftField { a }) => Ok(a.eval(x) * h),
            Variant::Parametric(p) => p.local_spec(x)?.sample_increment(h, rng),
        }
    }

    fn sample_spec(&self, spec: &LevySpec, h: f64, rng: &mut RngStream) -> Result<f64> {
        if let LevyKind::Meixner { a, b, r, m } = *spec.kind() {
            let key = [a.to_bits(), b.to_bits(), r.to_bits(), m.to_bits(), h.to_bits()];
            let table = self
                .tables
                .get_or_build(key, || inversion::build_spec_table(spec, h))?;
            return Ok(table.sample(rng));
        }
        spec.sample_increment(h, rng)
    }

    /// Mean of `L_h^(x)` where it exists.
    pub fn increment_mean_at(&self, x: f64, h: f64) -> Result<Option<f64>> {
        match &self.variant {
            Variant::Mixture {
                components,
                weights,
            } => {
                let mut total = 0.0;
                for (spec, w) in components.iter().zip(weights) {
                    let weight = w.eval(x);
                    if weight == 0.0 {
                        continue;
                    }
                    match spec.analytic_cumulants(h)?.mean {
                        Some(m) => total += weight * m,
                        None => return Ok(None),
                    }
                }
                Ok(Some(total))
            }
            Variant::Parametric(p) => Ok(p.local_spec(x)?.analytic_cumulants(h)?.mean),
        }
    }

    /// Named functions of the state that the validator inspects.
    fn state_functions(&self) -> Vec<(String, &ScalarFn, Option<f64>)> {
        match &self.variant {
            Variant::Mixture { weights, .. } => weights
                .iter()
                .enumerate()
                .map(|(i, w)| (format!("weight[{i}]"), &w.func, Some(w.declared_lipschitz)))
                .collect(),
            Variant::Parametric(p) => p
                .functions()
                .into_iter()
                .map(|(name, f)| (name.to_string(), f, f.lipschitz()))
                .collect(),
        }
    }

    pub fn validate(&self, x_grid: &[f64], xi_grid: &[f64]) -> Result<ValidationReport> {
        validate_family(self, x_grid, xi_grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate {
    pub name: String,
    pub empirical: f64,
    /// Estimate on a grid with half the spacing.
    pub refined: f64,
    pub declared: Option<f64>,
}

impl LipschitzEstimate {
    /// Within the declared constant, or stable under refinement when none
    /// is declared.
    pub fn consistent(&self) -> bool {
        match self.declared {
            Some(d) => self.refined.max(self.empirical) <= d * (1.0 + 1e-9) + 1e-12,
            None => self.refined <= self.empirical * (1.0 + GROWTH_STABILITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub family_id: String,
    pub positivity_ok: bool,
    pub min_weight_sum: Option<f64>,
    pub positivity_violation: Option<f64>,
    pub lipschitz_estimates: Vec<LipschitzEstimate>,
    pub growth_constant: f64,
    /// Growth constant on grids of twice the span and twice the points.
    pub growth_constant_refined: f64,
    pub growth_bounded: bool,
    pub range_violations: Vec<String>,
    pub notes: Vec<String>,
}

/// Relative change of the growth constant tolerated under refinement.
pub const GROWTH_STABILITY: f64 = 0.05;
const LIPSCHITZ_PAIRS: usize = 100;
const LIPSCHITZ_SEED: u64 = 0x11B5;

fn growth_constant(family: &FellerFamily, xs: &[f64], xis: &[f64]) -> f64 {
    let mut sup = 0.0f64;
    for &x in xs {
        for &xi in xis {
            match family.exponent_at(x, xi) {
                Ok(v) if v.re.is_finite() && v.im.is_finite() => {
                    sup = sup.max(v.norm() / (1.0 + xi * xi));
                }
                _ => return f64::INFINITY,
            }
        }
    }
    sup
}

fn lipschitz_estimate(f: &ScalarFn, xs: &[f64], rng: &mut RngStream) -> f64 {
    let mut sup = 0.0f64;
    for w in xs.windows(2) {
        let q = (f.eval(w[1]) - f.eval(w[0])).abs() / (w[1] - w[0]);
        sup = sup.max(q);
    }
    if let (Some(&lo), Some(&hi)) = (xs.first(), xs.last()) {
        for _ in 0..LIPSCHITZ_PAIRS {
            let x = lo + (hi - lo) * rng.random::<f64>();
            let y = lo + (hi - lo) * rng.random::<f64>();
            if x != y {
                sup = sup.max((f.eval(x) - f.eval(y)).abs() / (x - y).abs());
            }
        }
    }
    sup
}

fn refine_span(grid: &[f64]) -> Vec<f64> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let centre = 0.5 * (lo + hi);
    let half = hi - centre;
    linspace(centre - 2.0 * half, centre + 2.0 * half, 2 * grid.len() - 1)
}

fn refine_spacing(grid: &[f64]) -> Vec<f64> {
    linspace(grid[0], grid[grid.len() - 1], 2 * grid.len() - 1)
}

/// Checks positivity of the weight sum, Lipschitz behaviour, parameter
/// ranges and the growth bound `sup_x |ψ_x(ξ)| ≤ C (1 + ξ²)`. Advisory only.
pub fn validate_family(family: &FellerFamily, x_grid: &[f64], xi_grid: &[f64]) -> Result<ValidationReport> {
    if x_grid.is_empty() || xi_grid.is_empty() {
        return Err(domain("validation grids must be nonempty"));
    }
    if x_grid.iter().chain(xi_grid).any(|v| !v.is_finite()) {
        return Err(domain("validation grids must be finite"));
    }
    let mut xs = x_grid.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut xis = xi_grid.to_vec();
    xis.sort_by(f64::total_cmp);
    xis.dedup();

    let mut notes = Vec::new();
    let mut range_violations = Vec::new();

    let (positivity_ok, min_weight_sum, positivity_violation) = match family.variant() {
        Variant::Mixture { weights, .. } => {
            let mut min_sum = f64::INFINITY;
            let mut violation = None;
            for &x in &xs {
                let sum: f64 = weights.iter().map(|w| w.eval(x)).sum();
                min_sum = min_sum.min(sum);
                if violation.is_none() && !(sum > 0.0) {
                    violation = Some(x);
                }
                for (i, w) in weights.iter().enumerate() {
                    let v = w.eval(x);
                    if !(v >= 0.0 && v <= w.declared_bound) {
                        range_violations.push(format!(
                            "weight[{i}] = {v} at x={x} outside [0, {}]",
                            w.declared_bound
                        ));
                    }
                }
            }
            if let Some(x) = violation {
                notes.push(format!("weights sum to zero at x={x}"));
            }
            (violation.is_none(), Some(min_sum), violation)
        }
        Variant::Parametric(p) => {
            for &x in &xs {
                if let Err(e) = p.local_spec(x) {
                    range_violations.push(e.to_string());
                }
            }
            (true, None, None)
        }
    };
    if range_violations.len() > 20 {
        let extra = range_violations.len() - 20;
        range_violations.truncate(20);
        range_violations.push(format!("... and {extra} more"));
    }

    let mut rng = RngStream::new(LIPSCHITZ_SEED);
    let fine = refine_spacing(&xs);
    let mut lipschitz_estimates = Vec::new();
    for (name, f, declared) in family.state_functions() {
        let empirical = lipschitz_estimate(f, &xs, &mut rng);
        let refined = lipschitz_estimate(f, &fine, &mut rng);
        if declared.is_none() && xs.len() > 1 && refined > empirical * (1.0 + GROWTH_STABILITY) {
            notes.push(format!(
                "{name}: Lipschitz estimate grows under refinement ({empirical:.4} -> {refined:.4}); not Lipschitz"
            ));
        }
        if let Some(d) = declared {
            if refined.max(empirical) > d * (1.0 + 1e-9) + 1e-12 {
                notes.push(format!(
                    "{name}: empirical Lipschitz constant {:.4} exceeds declared {d:.4}",
                    refined.max(empirical)
                ));
            }
        }
        lipschitz_estimates.push(LipschitzEstimate {
            name,
            empirical,
            refined,
            declared,
        });
    }

    let growth = growth_constant(family, &xs, &xis);
    let (wide_x, wide_xi) = if xs.len() > 1 && xis.len() > 1 {
        (refine_span(&xs), refine_span(&xis))
    } else {
        (xs.clone(), xis.clone())
    };
    let growth_refined = growth_constant(family, &wide_x, &wide_xi);
    let growth_bounded = growth.is_finite()
        && growth_refined.is_finite()
        && (growth_refined - growth).abs() <= GROWTH_STABILITY * growth.max(f64::MIN_POSITIVE);
    if !growth_bounded {
        notes.push(format!(
            "growth bound fails: sup |psi_x(xi)|/(1+xi^2) = {growth:.4e} on the grid, {growth_refined:.4e} on the doubled grid"
        ));
    }
    notes.push(
        "uniqueness of the limiting process for its generator is assumed, not checked".to_string(),
    );

    Ok(ValidationReport {
        family_id: family.id().to_string(),
        positivity_ok,
        min_weight_sum,
        positivity_violation,
        lipschitz_estimates,
        growth_constant: growth,
        growth_constant_refined: growth_refined,
        growth_bounded,
        range_violations,
        notes,
    })
}

impl ValidationReport {
    /// Whether every check passed.
    pub fn ok(&self) -> bool {
        self.positivity_ok
            && self.growth_bounded
            && self.range_violations.is_empty()
            && self.lipschitz_estimates.iter().all(LipschitzEstimate::consistent)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mark = |ok: bool| if ok { "ok" } else { "WARN" };
        let _ = writeln!(s, "family: {}", self.family_id);
        let _ = writeln!(s, "  positivity .......... {}", mark(self.positivity_ok));
        let _ = writeln!(
            s,
            "  growth bound ........ {} (C = {:.6}, doubled grid {:.6})",
            mark(self.growth_bounded),
            self.growth_constant,
            self.growth_constant_refined
        );
        let _ = writeln!(s, "  parameter ranges .... {}", mark(self.range_violations.is_empty()));
        for l in &self.lipschitz_estimates {
            let declared = l.declared.map_or("none".to_string(), |d| format!("{d:.6}"));
            let _ = writeln!(
                s,
                "  lipschitz {:<10} {:.6} (refined {:.6}, declared {declared})",
                l.name, l.empirical, l.refined
            );
        }
        for v in &self.range_violations {
            let _ = writeln!(s, "  range: {v}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        s
    }

    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("family".to_string(), self.family_id.clone()),
            ("positivity_ok".to_string(), self.positivity_ok.to_string()),
            ("growth_constant".to_string(), format!("{:.16e}", self.growth_constant)),
            (
                "growth_constant_refined".to_string(),
                format!("{:.16e}", self.growth_constant_refined),
            ),
            ("growth_bounded".to_string(), self.growth_bounded.to_string()),
            ("range_violations".to_string(), self.range_violations.len().to_string()),
        ];
        if let Some(m) = self.min_weight_sum {
            kv.push(("min_weight_sum".to_string(), format!("{m:.16e}")));
        }
        if let Some(x) = self.positivity_violation {
            kv.push(("positivity_violation_x".to_string(), format!("{x:.16e}")));
        }
        for l in &self.lipschitz_estimates {
            kv.push((format!("lipschitz.{}", l.name), format!("{:.16e}", l.empirical)));
        }
        kv.push(("ok".to_string(), self.ok().to_string()));
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::Direction;
    use crate::presets;

    fn xi_probe() -> Vec<f64> {
        linspace(-20.0, 20.0, 81)
    }

    #[test]
    fn bpc_reduces_to_poisson_at_origin() {
        let family = presets::paper_bpc().unwrap();
        let poisson = LevySpec::poisson(Direction::Down);
        for xi in xi_probe() {
            assert_eq!(family.exponent_at(0.0, xi).unwrap(), poisson.exponent(xi));
        }
    }

    #[test]
    fn bpc_blends_halfway_at_minus_five() {
        let family = presets::paper_bpc().unwrap();
        let bm = LevySpec::brownian();
        let poisson = LevySpec::poisson(Direction::Down);
        for xi in xi_probe() {
            let expected = bm.exponent(xi / 2.0) + poisson.exponent(xi / 2.0);
            assert!((family.exponent_at(-5.0, xi).unwrap() - expected).norm() <= 1e-12);
        }
    }

    #[test]
    fn single_unit_weight_is_the_component() {
        let spec = LevySpec::nig(2.0, 0.5, 1.0, 0.3).unwrap();
        let family = make_mixture(vec![spec], vec![WeightFunction::constant(1.0).unwrap()]).unwrap();
        assert!(family.is_homogeneous());
        for x in [-30.0, 0.0, 7.5] {
            for xi in xi_probe() {
                assert_eq!(family.exponent_at(x, xi).unwrap(), spec.exponent(xi));
            }
        }
    }

    #[test]
    fn mismatched_mixtures_are_rejected() {
        assert!(make_mixture(vec![], vec![]).is_err());
        let w = WeightFunction::constant(1.0).unwrap();
        assert!(make_mixture(vec![LevySpec::brownian(), LevySpec::cauchy()], vec![w]).is_err());
        assert!(WeightFunction::new(ScalarFn::Named(NamedFn::Square)).is_err());
        assert!(WeightFunction::new(ScalarFn::Constant(-1.0)).is_err());
    }

    fn bpc_regions() -> FellerFamily {
        let iv = |lo, hi| vec![Interval::new(lo, hi).unwrap()];
        make_separated_regions(
            vec![
                (iv(f64::NEG_INFINITY, -6.0), LevySpec::brownian()),
                (iv(-4.0, 4.0), LevySpec::poisson(Direction::Down)),
                (iv(6.0, f64::INFINITY), LevySpec::cauchy()),
            ],
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn separated_regions_reproduce_bpc_weights() {
        let Variant::Mixture { weights, .. } = bpc_regions().variant().clone() else {
            panic!("regions build a mixture");
        };
        let named = [NamedFn::BpcBrownian, NamedFn::BpcPoisson, NamedFn::BpcCauchy];
        for k in -1000..=1000 {
            let x = k as f64 * 0.02;
            for (w, f) in weights.iter().zip(named) {
                assert!((w.eval(x) - f.eval(x)).abs() <= 1e-12, "x={x}");
            }
        }
        for w in &weights {
            assert_eq!(w.declared_lipschitz, 0.5);
        }
    }

    #[test]
    fn regions_are_exact_on_their_sets() {
        let family = bpc_regions();
        let checks: [(f64, f64, LevySpec); 3] = [
            (-50.0, -6.0, LevySpec::brownian()),
            (-4.0, 4.0, LevySpec::poisson(Direction::Down)),
            (6.0, 50.0, LevySpec::cauchy()),
        ];
        for (lo, hi, spec) in checks {
            for x in linspace(lo, hi, 101) {
                for xi in xi_probe() {
                    assert_eq!(family.exponent_at(x, xi).unwrap(), spec.exponent(xi), "x={x}");
                }
            }
        }
    }

    #[test]
    fn close_regions_are_rejected() {
        let iv = |lo, hi| vec![Interval::new(lo, hi).unwrap()];
        let err = make_separated_regions(
            vec![(iv(0.0, 1.0), LevySpec::brownian()), (iv(2.0, 3.0), LevySpec::cauchy())],
            2.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("regions 0 and 1 are at distance 1"), "{err}");
    }

    #[test]
    fn single_region_acts_alone_on_it() {
        let family = make_separated_regions(
            vec![(vec![Interval::new(-1.0, 1.0).unwrap()], LevySpec::gamma(Direction::Up))],
            0.5,
        )
        .unwrap();
        for x in linspace(-1.0, 1.0, 21) {
            for xi in xi_probe() {
                assert_eq!(family.exponent_at(x, xi).unwrap(), LevySpec::gamma(Direction::Up).exponent(xi));
            }
        }
    }

    #[test]
    fn stable_index_values() {
        let f = NamedFn::OscillatingStableIndex;
        assert_eq!(f.eval(0.0), 1.0);
        assert!((f.eval(2.0) - 1.95).abs() <= 1e-15);
        assert_eq!(f.eval(4.0), 1.0);
        assert!((f.eval(1.0) - 1.475).abs() <= 1e-15);
        for x in linspace(-13.0, 13.0, 261) {
            assert!((f.eval(x) - f.eval(x + 4.0)).abs() <= 1e-12);
        }
        assert!(make_stable_like(ScalarFn::Named(f)).is_ok());
        assert!(make_stable_like(ScalarFn::Constant(2.0)).is_err());
        assert!(make_stable_like(ScalarFn::Constant(0.0)).is_err());
    }

    #[test]
    fn nig_preset_is_symmetric_at_origin() {
        let family = presets::paper_nig_like().unwrap();
        let Variant::Parametric(p) = family.variant() else { panic!() };
        assert_eq!(*p.local_spec(0.0).unwrap().kind(), LevyKind::Nig { alpha: 1.0, beta: 0.0, delta: 1.0, mu: 0.0 });
        for xi in xi_probe() {
            assert!(family.exponent_at(0.0, xi).unwrap().im.abs() <= 1e-15);
        }
        // far out the skew tends to -1/2
        let m = family.increment_mean_at(1e9, 1.0).unwrap().unwrap();
        let limit = -0.5 / (1.0f64 - 0.25).sqrt();
        assert!((m - limit).abs() <= 1e-8, "{m} vs {limit}");
        assert!(make_nig_like(
            ScalarFn::Constant(1.0),
            ScalarFn::Constant(1.0),
            ScalarFn::Constant(1.0),
            ScalarFn::Constant(0.0)
        )
        .is_err());
    }

    #[test]
    fn constant_parameters_give_homogeneous_families() {
        let family = make_nig_like(
            ScalarFn::Constant(1.5),
            ScalarFn::Constant(-0.5),
            ScalarFn::Constant(0.7),
            ScalarFn::Constant(0.1),
        )
        .unwrap();
        assert!(family.is_homogeneous());
        for xi in xi_probe() {
            let at0 = family.exponent_at(0.0, xi).unwrap();
            for x in [-40.0, 3.3, 1e6] {
                assert_eq!(family.exponent_at(x, xi).unwrap(), at0);
            }
        }
    }

    #[test]
    fn meixner_preset_scale() {
        let f = NamedFn::MeixnerBump;
        assert!((f.eval(0.0) - (1.0 + 10.0 * (-1.0f64 / 25.0).exp())).abs() <= 1e-15);
        for x in [5.0, -5.0, 7.0, 100.0] {
            assert_eq!(f.eval(x), 1.0);
        }
        let family = presets::paper_meixner_like().unwrap();
        let Variant::Parametric(p) = family.variant() else { panic!() };
        for x in linspace(-10.0, 10.0, 201) {
            let LevyKind::Meixner { a, .. } = *p.local_spec(x).unwrap().kind() else { panic!() };
            assert!(a >= 1.0);
        }
        assert!(make_meixner_like(
            ScalarFn::Constant(1.0),
            ScalarFn::Constant(PI),
            ScalarFn::Constant(1.0),
            ScalarFn::Constant(0.0)
        )
        .is_err());
    }

    #[test]
    fn bump_lipschitz_constant() {
        let xs = linspace(-6.0, 6.0, 120_001);
        let sup = xs
            .windows(2)
            .map(|w| (f64::abs(NamedFn::MeixnerBump.eval(w[1]) - NamedFn::MeixnerBump.eval(w[0]))) / (w[1] - w[0]))
            .fold(0.0, f64::max);
        assert!(sup <= MEIXNER_BUMP_LIPSCHITZ && sup > 0.99 * MEIXNER_BUMP_LIPSCHITZ, "{sup}");
    }

    #[test]
    fn meixner_cache_is_bounded_and_reused() {
        let family = presets::paper_meixner_like().unwrap();
        let mut rng = RngStream::new(3);
        for k in 0..400 {
            let x = -6.0 + k as f64 * 0.03;
            family.sample_increment_at(x, 0.1, &mut rng).unwrap();
        }
        assert!(family.table_cache().len() <= TABLE_CACHE_CAPACITY);
        let before = family.table_cache().len();
        family.sample_increment_at(6.0, 0.1, &mut rng).unwrap();
        family.sample_increment_at(6.0, 0.1, &mut rng).unwrap();
        assert!(family.table_cache().len() <= before.max(1) + 1);
    }

    #[test]
    fn drift_step_is_exact() {
        let family = make_drift_field(ScalarFn::Named(NamedFn::Identity));
        let mut rng = RngStream::new(0);
        assert_eq!(family.sample_increment_at(1.0, 0.5, &mut rng).unwrap(), 0.5);
    }

    #[test]
    fn validator_accepts_bpc() {
        let family = presets::paper_bpc().unwrap();
        let report = family.validate(&linspace(-20.0, 20.0, 401), &linspace(-50.0, 50.0, 1001)).unwrap();
        assert!(report.positivity_ok && report.growth_bounded, "{}", report.to_text());
        assert!(report.min_weight_sum.unwrap() >= 1.0);
        assert!(report.ok());
    }

    #[test]
    fn validator_flags_linear_drift_growth() {
        let family = make_drift_field(ScalarFn::Named(NamedFn::Identity));
        let report = family.validate(&linspace(-100.0, 100.0, 2001), &default_xi_grid()).unwrap();
        assert!(!report.growth_bounded);
        assert!(!report.ok());
        assert!(report.notes.iter().any(|n| n.contains("growth bound fails")));
    }

    #[test]
    fn validator_flags_square_root_drift() {
        let family = make_drift_field(ScalarFn::Named(NamedFn::SignedSqrt));
        let report = family.validate(&default_x_grid(), &default_xi_grid()).unwrap();
        let est = &report.lipschitz_estimates[0];
        assert!(est.refined > 1.3 * est.empirical, "{est:?}");
        assert!(report.notes.iter().any(|n| n.contains("not Lipschitz")), "{}", report.to_text());
    }

    #[test]
    fn validator_names_zero_weight_sum() {
        let w = |points: Vec<(f64, f64)>| WeightFunction::new(ScalarFn::piecewise_linear(points).unwrap()).unwrap();
        let family = make_mixture(
            vec![LevySpec::brownian(), LevySpec::cauchy()],
            vec![w(vec![(0.0, 1.0), (1.0, 0.0)]), w(vec![(2.0, 0.0), (3.0, 1.0)])],
        )
        .unwrap();
        let report = family.validate(&linspace(-5.0, 5.0, 101), &default_xi_grid()).unwrap();
        assert!(!report.positivity_ok);
        let x = report.positivity_violation.unwrap();
        assert!((1.0..=2.0).contains(&x));
        assert!(report.notes.iter().any(|n| n.contains("sum to zero")));
    }

    #[test]
    fn presets_validate_cleanly() {
        for p in &presets::PRESETS {
            let family = presets::preset(p.name).unwrap().unwrap();
            let report = family.validate(&default_x_grid(), &default_xi_grid()).unwrap();
            assert!(report.ok(), "{}", report.to_text());
            let kv = report.to_key_values();
            assert!(kv.iter().any(|(k, v)| k == "ok" && v == "true"));
        }
    }
}

//! Finite-level topological pressure `P_n(t) = (1/n) log Σ_{|w|=n} ψ_w^t`,
//! its Fekete envelope, zeros in `t`, and the affinity dimension.
//!
//! For constant cylinder functions (`K_t = 1`) the subchain rule makes
//! `log S_n(t)` subadditive in `n`, so `P(t) = inf_n P_n(t)` and each
//! computed level is a rigorous upper bound. No finite-level lower bound is
//! available; the extrapolated values below are estimates only.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::affine::{linear_fit, validate_ifs, AffineIfs};
use crate::cache::{CacheKey, PartitionCache};
use crate::cylinder::CylinderFunction;
use crate::error::{Error, Result};
use crate::reduce::log_partition_sum_raw;
use crate::symbolic::Budget;

pub const EXTRAPOLATION_METHOD: &str = "least-squares in 1/n over upper half of levels";

/// Point estimate of a limit from finite levels; never a bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    pub method: &'static str,
    pub levels_used: Vec<usize>,
}

/// Fits `y_n ≈ a + b/n` on the upper half of the levels and returns `a`.
pub fn extrapolate(levels: &[(usize, f64)]) -> Option<Extrapolation> {
    let last = levels.last()?;
    let start = levels.len() / 2;
    let tail = &levels[start..];
    if tail.len() < 2 {
        return Some(Extrapolation { value: last.1, method: EXTRAPOLATION_METHOD, levels_used: vec![last.0] });
    }
    let x: Vec<f64> = tail.iter().map(|(n, _)| 1.0 / *n as f64).collect();
    let y: Vec<f64> = tail.iter().map(|(_, v)| *v).collect();
    let (_, intercept) = linear_fit(&x, &y);
    Some(Extrapolation {
        value: intercept,
        method: EXTRAPOLATION_METHOD,
        levels_used: tail.iter().map(|(n, _)| *n).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PressureReport {
    pub t: f64,
    /// `(n, P_n(t))`
    pub per_level: Vec<(usize, f64)>,
    /// `min_n P_n(t)`; a rigorous upper bound on `P(t)` when `K_t = 1`.
    pub fekete_upper: f64,
    pub extrapolated: Extrapolation,
    /// Set when the budget stopped the sequence before `n_max`.
    pub partial: bool,
}

/// Bracket around a zero of `t ↦ P_n(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub n: usize,
    pub t: f64,
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionReport {
    /// `(n, t_n)` with `P_n(t_n) = 0`.
    pub roots: Vec<(usize, f64)>,
    /// `min_n t_n`.
    pub upper_bound: f64,
    pub extrapolated: Extrapolation,
    /// `min(d, upper_bound)`.
    pub prediction: f64,
    pub dim: usize,
    pub norm_below_half: bool,
    pub warnings: Vec<String>,
    pub levels_requested: usize,
    pub t_tol: f64,
    /// Not part of any serialized output.
    pub wall_time: Duration,
}

/// Pressure computations for one cylinder function, with an optional
/// partition-sum cache shared across calls.
#[derive(Clone)]
pub struct Pressure<'a> {
    cf: &'a CylinderFunction,
    budget: Budget,
    cache: Option<Arc<dyn PartitionCache + 'a>>,
    hash: String,
}

impl<'a> Pressure<'a> {
    pub fn new(cf: &'a CylinderFunction) -> Self {
        Self { cf, budget: Budget::default(), cache: None, hash: cf.content_hash() }
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_cache(mut self, cache: Arc<dyn PartitionCache + 'a>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn cylinder_function(&self) -> &CylinderFunction {
        self.cf
    }

    pub fn log_partition_sum(&self, t: f64, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidArgument("level must be at least 1".into()));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!("t must be finite and non-negative, got {t}")));
        }
        self.budget.check(self.cf.alphabet(), n)?;
        let key = CacheKey::new(self.hash.clone(), t, n);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        let value = log_partition_sum_raw(self.cf, t, n, self.budget)?;
        if let Some(cache) = &self.cache {
            cache.put(key, value);
        }
        Ok(value)
    }

    pub fn pressure_at(&self, t: f64, n: usize) -> Result<f64> {
        Ok(self.log_partition_sum(t, n)? / n as f64)
    }

    pub fn sequence(&self, t: f64, n_max: usize) -> Result<PressureReport> {
        if n_max == 0 {
            return Err(Error::InvalidArgument("n_max must be at least 1".into()));
        }
        let mut per_level = Vec::with_capacity(n_max);
        let mut partial = false;
        for n in 1..=n_max {
            match self.pressure_at(t, n) {
                Ok(p) => per_level.push((n, p)),
                Err(Error::BudgetExceeded { .. }) if n > 1 => {
                    partial = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let fekete_upper = per_level.iter().map(|(_, p)| *p).fold(f64::INFINITY, f64::min);
        let extrapolated = extrapolate(&per_level).expect("at least one level");
        Ok(PressureReport { t, per_level, fekete_upper, extrapolated, partial })
    }

    /// Bisection for `P_n(t) = 0`: the bracket starts at `[0, 1]` and its
    /// upper end doubles until `P_n` is negative there.
    pub fn root(&self, n: usize, t_tol: f64) -> Result<Root> {
        if !(t_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {t_tol}")));
        }
        let mut evaluations = 0;
        let mut eval = |t: f64| {
            evaluations += 1;
            self.pressure_at(t, n)
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut p_hi = eval(hi)?;
        while p_hi >= 0.0 {
            if p_hi == 0.0 && eval(hi * (1.0 - f64::EPSILON))? > 0.0 {
                return Ok(Root { n, t: hi, lo: hi, hi, evaluations });
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::InvalidArgument("pressure does not become negative".into()));
            }
            p_hi = eval(hi)?;
        }
        while hi - lo > t_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let p = eval(mid)?;
            if p > 0.0 {
                lo = mid;
            } else if p < 0.0 {
                hi = mid;
            } else {
                return Ok(Root { n, t: mid, lo: mid, hi: mid, evaluations });
            }
        }
        Ok(Root { n, t: 0.5 * (lo + hi), lo, hi, evaluations })
    }

    pub fn curve(&self, t_grid: &[f64], n: usize) -> Result<Vec<(f64, f64)>> {
        if t_grid.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidArgument("t grid must be sorted strictly ascending".into()));
        }
        t_grid.iter().map(|&t| Ok((t, self.pressure_at(t, n)?))).collect()
    }

    /// Zeros `t_n` for `n = 1..=n_max`; stops early when the budget runs out.
    pub fn roots(&self, n_max: usize, t_tol: f64) -> Result<Vec<(usize, f64)>> {
        let mut roots = Vec::new();
        for n in 1..=n_max {
            match self.root(n, t_tol) {
                Ok(r) => roots.push((n, r.t)),
                Err(Error::BudgetExceeded { .. }) if n > 1 => break,
                Err(e) => return Err(e),
            }
        }
        Ok(roots)
    }
}

pub fn log_partition_sum(cf: &CylinderFunction, t: f64, n: usize) -> Result<f64> {
    Pressure::new(cf).log_partition_sum(t, n)
}

pub fn pressure_sequence(cf: &CylinderFunction, t: f64, n_max: usize) -> Result<PressureReport> {
    Pressure::new(cf).sequence(t, n_max)
}

pub fn pressure_root(cf: &CylinderFunction, n: usize, t_tol: f64) -> Result<Root> {
    Pressure::new(cf).root(n, t_tol)
}

pub fn pressure_curve(cf: &CylinderFunction, t_grid: &[f64], n: usize) -> Result<Vec<(f64, f64)>> {
    Pressure::new(cf).curve(t_grid, n)
}

/// Affinity dimension of an IFS from the natural cylinder function.
pub fn affinity_dimension(ifs: &AffineIfs, n_max: usize, t_tol: f64) -> Result<DimensionReport> {
    affinity_dimension_with(ifs, n_max, t_tol, Budget::default(), None)
}

pub fn affinity_dimension_with(
    ifs: &AffineIfs,
    n_max: usize,
    t_tol: f64,
    budget: Budget,
    cache: Option<Arc<dyn PartitionCache>>,
) -> Result<DimensionReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let start = Instant::now();
    let validation = validate_ifs(ifs)?;
    let cf = CylinderFunction::natural(ifs.clone())?;
    let mut engine = Pressure::new(&cf).with_budget(budget);
    if let Some(c) = cache {
        engine = engine.with_cache(c);
    }
    let roots = engine.roots(n_max, t_tol)?;
    let mut warnings = validation.warnings;
    if roots.len() < n_max {
        warnings.push(format!("enumeration budget stopped the computation at level {} of {n_max}", roots.len()));
    }
    let upper_bound = roots.iter().map(|(_, t)| *t).fold(f64::INFINITY, f64::min);
    let extrapolated = extrapolate(&roots).expect("level 1 always computed");
    Ok(DimensionReport {
        prediction: upper_bound.min(ifs.dim() as f64),
        upper_bound,
        extrapolated,
        roots,
        dim: ifs.dim(),
        norm_below_half: validation.norm_below_half,
        warnings,
        levels_requested: n_max,
        t_tol,
        wall_time: start.elapsed(),
    })
}

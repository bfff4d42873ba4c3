//! Affine iterated function systems: validation, translation sampling, chaos
//! game point clouds, box counting and PGM rendering.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::equilibrium::CylinderMeasure;
use crate::error::{Error, Result};
use crate::linalg::{raw_singular_values, singular_values, Matrix};
use crate::rng::{stream_rng, StreamRng};

/// `φ(x) = A x + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub matrix: Matrix,
    pub translation: Vec<f64>,
}

impl AffineMap {
    pub fn new(matrix: Matrix, translation: Vec<f64>) -> Self {
        Self { matrix, translation }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.apply(x);
        for (yi, ai) in y.iter_mut().zip(&self.translation) {
            *yi += ai;
        }
        y
    }

    fn apply_in_place(&self, x: &mut [f64]) {
        let d = x.len();
        let mut y = [0.0; crate::linalg::MAX_DIM];
        for (i, yi) in y.iter_mut().enumerate().take(d) {
            let mut acc = self.translation[i];
            for (j, xj) in x.iter().enumerate() {
                acc += self.matrix.get(i, j) * xj;
            }
            *yi = acc;
        }
        x.copy_from_slice(&y[..d]);
    }
}

/// A finite family of affine maps on `R^d`.
///
/// Construction only checks shapes; contractivity and non-singularity are the
/// job of [`validate_ifs`].
#[derive(Clone, Debug, PartialEq)]
pub struct AffineIfs {
    name: String,
    dim: usize,
    maps: Vec<AffineMap>,
}

impl AffineIfs {
    pub fn new(name: impl Into<String>, maps: Vec<AffineMap>) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::InvalidIfs("no maps".into()))?;
        let dim = first.matrix.dim();
        if maps.len() > 256 {
            return Err(Error::InvalidIfs(format!("{} maps exceeds the limit of 256", maps.len())));
        }
        for (i, m) in maps.iter().enumerate() {
            if m.matrix.dim() != dim {
                return Err(Error::InvalidIfs(format!(
                    "map {i}: matrix dimension {} differs from {dim}",
                    m.matrix.dim()
                )));
            }
            if m.translation.len() != dim {
                return Err(Error::InvalidIfs(format!(
                    "map {i}: translation has length {}, expected {dim}",
                    m.translation.len()
                )));
            }
            if m.translation.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidIfs(format!("map {i}: translation is not finite")));
            }
        }
        Ok(Self { name: name.into(), dim, maps })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Same linear parts, new translations.
    pub fn with_translations(&self, translations: &[Vec<f64>]) -> Result<Self> {
        if translations.len() != self.maps.len() {
            return Err(Error::InvalidIfs(format!("{} translations for {} maps", translations.len(), self.maps.len())));
        }
        let maps = self.maps.iter().zip(translations).map(|(m, a)| AffineMap::new(m.matrix, a.clone())).collect();
        Self::new(self.name.clone(), maps)
    }

    /// Operator norms `α_1(A_i)`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.maps.iter().map(|m| raw_singular_values(&m.matrix)[0]).collect()
    }

    /// `R = max|a_i| / (1 - max_i α_1(A_i))`; every map sends the closed ball
    /// of radius `R` around the origin into itself.
    pub fn bounding_radius(&self) -> f64 {
        let s = self.contraction_ratios().into_iter().fold(0.0, f64::max);
        let a = self.maps.iter().map(|m| m.translation.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        if s >= 1.0 {
            f64::INFINITY
        } else {
            a / (1.0 - s)
        }
    }

    /// Hex SHA-256 over the exact bit patterns of every matrix entry. The
    /// translations and the name do not influence any pressure quantity and
    /// are left out.
    pub fn linear_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"natural");
        h.update((self.dim as u64).to_le_bytes());
        h.update((self.maps.len() as u64).to_le_bytes());
        for m in &self.maps {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    h.update(m.matrix.get(i, j).to_bits().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    /// Hex SHA-256 over all numeric content, translations included.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.linear_hash().as_bytes());
        for m in &self.maps {
            for v in &m.translation {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub contraction_ratios: Vec<f64>,
    /// Every `α_1(A_i) < 1/2`.
    pub norm_below_half: bool,
    pub warnings: Vec<String>,
}

/// Non-singular and contractive maps are required; the `|A_i| < 1/2`
/// condition under which the dimension formula is known to hold for almost
/// every translation only produces a warning.
pub fn validate_ifs(ifs: &AffineIfs) -> Result<ValidationReport> {
    if ifs.len() < 2 {
        return Err(Error::InvalidIfs(format!("need at least two maps, got {}", ifs.len())));
    }
    let mut ratios = Vec::with_capacity(ifs.len());
    let mut warnings = Vec::new();
    for (index, map) in ifs.maps().iter().enumerate() {
        let spectrum = singular_values(&map.matrix).map_err(|e| match e {
            Error::NumericallySingular { ratio } => {
                Error::InvalidIfs(format!("map {index} is singular (ratio {ratio:e})"))
            }
            other => other,
        })?;
        let norm = spectrum.largest();
        if norm >= 1.0 {
            return Err(Error::NotContractive { index, norm });
        }
        if norm >= 0.5 {
            warnings.push(format!("map {index}: operator norm {norm} is not below 1/2"));
        }
        ratios.push(norm);
    }
    Ok(ValidationReport { norm_below_half: ratios.iter().all(|&r| r < 0.5), contraction_ratios: ratios, warnings })
}

/// Uniform samples from `[-radius, radius]^{d·#I}`, one tuple per sample,
/// each tuple holding one translation vector per map.
pub fn sample_translations(d: usize, maps: usize, count: usize, radius: f64, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    Ok((0..count)
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            (0..maps).map(|_| (0..d).map(|_| rng.gen_range(-radius..=radius)).collect()).collect()
        })
        .collect())
}

/// Symbol law driving the chaos game.
#[derive(Clone, Debug)]
pub enum Driver {
    Uniform,
    /// i.i.d. symbols with the given (unnormalized) weights.
    Weights(Vec<f64>),
    /// Symbols drawn so that the address of the current point, read from the
    /// most recent symbol backwards, follows the cylinder masses of the
    /// measure (an order `k-1` chain for a depth-`k` table).
    Measure(CylinderMeasure),
}

impl Driver {
    pub fn label(&self) -> String {
        match self {
            Driver::Uniform => "uniform".into(),
            Driver::Weights(w) => format!("weights({})", w.len()),
            Driver::Measure(m) => format!("measure(depth={},{})", m.depth(), m.provenance()),
        }
    }
}

/// Number of independent chaos-game chains. Fixed, so the output never
/// depends on the thread count.
pub const CHAINS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    pub seed: u64,
    pub driver: String,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>, seed: u64, driver: impl Into<String>) -> Self {
        assert!(dim >= 1 && coords.len().is_multiple_of(dim));
        Self { dim, coords, seed, driver: driver.into() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

struct SymbolSampler {
    alphabet: usize,
    depth: usize,
    /// `tables[j][packed(a u)]` for contexts `u` of length `j`.
    tables: Vec<Vec<f64>>,
    iid: Vec<f64>,
}

impl SymbolSampler {
    fn new(driver: &Driver, alphabet: usize) -> Result<Self> {
        match driver {
            Driver::Uniform => Ok(Self::iid(vec![1.0; alphabet])),
            Driver::Weights(w) => {
                if w.len() != alphabet || w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "driver needs {alphabet} non-negative weights with positive sum"
                    )));
                }
                Ok(Self::iid(w.clone()))
            }
            Driver::Measure(m) => {
                if m.alphabet().size() != alphabet {
                    return Err(Error::InvalidArgument(format!(
                        "measure alphabet {} does not match {alphabet} maps",
                        m.alphabet().size()
                    )));
                }
                let tables = (1..=m.depth()).map(|j| m.marginal(j)).collect::<Vec<_>>();
                let iid = tables[0].clone();
                Ok(Self { alphabet, depth: m.depth(), tables, iid })
            }
        }
    }

    fn iid(weights: Vec<f64>) -> Self {
        Self { alphabet: weights.len(), depth: 1, tables: vec![weights.clone()], iid: weights }
    }

    /// `context` holds the most recent symbols, most recent first.
    fn draw(&self, rng: &mut StreamRng, context: &[u8]) -> u8 {
        let j = context.len().min(self.depth - 1);
        let weights: Vec<f64> = if j == 0 {
            self.iid.clone()
        } else {
            let base = self.alphabet as u64;
            let ctx = context[..j].iter().fold(0u64, |acc, &s| acc * base + s as u64);
            let stride = base.pow(j as u32);
            let table = &self.tables[j];
            (0..base).map(|a| table[(a * stride + ctx) as usize]).collect()
        };
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return rng.gen_range(0..self.alphabet) as u8;
        }
        let mut u = rng.gen::<f64>() * total;
        for (a, w) in weights.iter().enumerate() {
            if u < *w {
                return a as u8;
            }
            u -= w;
        }
        // rounding: last symbol with positive weight
        weights.iter().rposition(|w| *w > 0.0).unwrap() as u8
    }
}

/// Chaos game `x ↦ φ_i(x)` started at the origin. Points are produced by
/// [`CHAINS`] independent chains, each on its own random stream, and
/// concatenated in chain order.
pub fn attractor_points(
    ifs: &AffineIfs,
    driver: &Driver,
    count: usize,
    burn_in: usize,
    seed: u64,
) -> Result<PointCloud> {
    let sampler = SymbolSampler::new(driver, ifs.len())?;
    let d = ifs.dim();
    let per_chain: Vec<usize> = (0..CHAINS).map(|c| count / CHAINS + usize::from(c < count % CHAINS)).collect();
    let chunks: Vec<Vec<f64>> = per_chain
        .par_iter()
        .enumerate()
        .map(|(c, &n)| {
            let mut rng = stream_rng(seed, c as u64);
            let mut x = vec![0.0; d];
            let mut context: Vec<u8> = Vec::with_capacity(sampler.depth);
            let mut out = Vec::with_capacity(n * d);
            for step in 0..burn_in + n {
                let a = sampler.draw(&mut rng, &context);
                ifs.maps()[a as usize].apply_in_place(&mut x);
                if sampler.depth > 1 {
                    context.insert(0, a);
                    context.truncate(sampler.depth - 1);
                }
                if step >= burn_in {
                    out.extend_from_slice(&x);
                }
            }
            out
        })
        .collect();
    Ok(PointCloud::new(d, chunks.concat(), seed, driver.label()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxDimension {
    pub estimate: f64,
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

/// Least-squares slope and intercept of `y` against `x`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

/// Box-counting estimate from grids of side `δ` anchored at the lower corner
/// of the cloud's bounding box: slope of `log N(δ)` against `log(1/δ)`.
pub fn box_dimension(cloud: &PointCloud, scales: &[f64]) -> Result<BoxDimension> {
    if scales.len() < 3 {
        return Err(Error::InvalidArgument("box counting needs at least three scales".into()));
    }
    if scales.iter().any(|s| !(*s > 0.0)) || scales.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidArgument("scales must be positive and strictly decreasing".into()));
    }
    if cloud.is_empty() {
        return Err(Error::DegenerateCloud("no points".into()));
    }
    let d = cloud.dim();
    if d > crate::linalg::MAX_DIM {
        return Err(Error::InvalidArgument(format!("dimension {d} not supported")));
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in cloud.points() {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if lo.iter().zip(&hi).all(|(a, b)| a == b) {
        return Err(Error::DegenerateCloud("all points coincide".into()));
    }
    let counts: Vec<usize> = scales
        .par_iter()
        .map(|&delta| {
            let mut cells: HashSet<[i64; crate::linalg::MAX_DIM]> = HashSet::new();
            for p in cloud.points() {
                let mut key = [0i64; crate::linalg::MAX_DIM];
                for k in 0..d {
                    key[k] = ((p[k] - lo[k]) / delta).floor() as i64;
                }
                cells.insert(key);
            }
            cells.len()
        })
        .collect();
    let x: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    let residual =
        (x.iter().zip(&y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    Ok(BoxDimension { estimate: slope, scales: scales.to_vec(), counts, residual })
}

/// Axis-aligned window for rendering: first two coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    /// Bounding box of the cloud enlarged by `margin` times its extent.
    /// One-dimensional clouds are drawn on the line `y = 0`.
    pub fn of_cloud(cloud: &PointCloud, margin: f64) -> Bounds {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in cloud.points() {
            let y = p.get(1).copied().unwrap_or(0.0);
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return Bounds { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 };
        }
        let pad = |a: f64, b: f64| {
            let w = if b > a { b - a } else { 1.0 };
            (a - margin * w, b + margin * w)
        };
        let (x_min, x_max) = pad(x0, x1);
        let (y_min, y_max) = pad(y0, y1);
        Bounds { x_min, x_max, y_min, y_max }
    }
}

/// Binary greymap (P5): `P5\n<w> <h>\n255\n` followed by row-major bytes,
/// top row first. Grey level is `round(255 · ln(1+c) / ln(1+c_max))` for a
/// pixel hit `c` times.
pub fn render_pgm(cloud: &PointCloud, resolution: usize, bounds: Bounds) -> Result<Vec<u8>> {
    if resolution < 16 {
        return Err(Error::InvalidArgument(format!("resolution must be at least 16, got {resolution}")));
    }
    if !(bounds.x_max > bounds.x_min && bounds.y_max > bounds.y_min) {
        return Err(Error::InvalidArgument("empty render window".into()));
    }
    let res = resolution;
    let mut hits = vec![0u64; res * res];
    let cell = |v: f64, lo: f64, hi: f64| -> Option<usize> {
        if !(v >= lo && v <= hi) {
            return None;
        }
        Some((((v - lo) / (hi - lo) * res as f64).floor() as usize).min(res - 1))
    };
    for p in cloud.points() {
        let y = p.get(1).copied().unwrap_or(0.0);
        if let (Some(c), Some(r)) = (cell(p[0], bounds.x_min, bounds.x_max), cell(y, bounds.y_min, bounds.y_max)) {
            hits[(res - 1 - r) * res + c] += 1;
        }
    }
    let max = hits.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(res * res + 32);
    let mut header = String::new();
    write!(header, "P5\n{res} {res}\n255\n").unwrap();
    out.extend_from_slice(header.as_bytes());
    if max == 0 {
        out.resize(out.len() + res * res, 0);
        return Ok(out);
    }
    let denom = (1.0 + max as f64).ln();
    out.extend(hits.iter().map(|&c| (255.0 * (1.0 + c as f64).ln() / denom).round() as u8));
    Ok(out)
}

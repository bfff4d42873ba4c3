//! Finite-level equilibrium-measure approximants: the weights `ν_n`, their
//! shift averages `μ_n`, depth-`k` entropy and energy, the finite Jensen
//! inequality, the invariance defect, local-dimension sampling and a
//! Bernoulli variational estimate.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::cylinder::CylinderFunction;
use crate::error::{Error, Result};
use crate::pressure::Pressure;
use crate::reduce::log_value_table;
use crate::rng::stream_rng;
use crate::symbolic::{Alphabet, Budget, Word, TAIL_SYMBOL};

/// Tolerance on the total mass of a measure built from user data.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Nu { n: usize, t: f64 },
    MuCesaro { n: usize, t: f64, k: usize, convention: TailConvention },
    Bernoulli(Vec<f64>),
    Custom,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Nu { n, t } => write!(f, "nu(n={n},t={t})"),
            Provenance::MuCesaro { n, t, k, convention } => {
                write!(f, "mu_cesaro(n={n},t={t},k={k},{convention})")
            }
            Provenance::Bernoulli(p) => {
                let parts: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
                write!(f, "bernoulli({})", parts.join(";"))
            }
            Provenance::Custom => write!(f, "custom"),
        }
    }
}

/// How the shifts `σ^j` with fewer than `k` remaining symbols are handled
/// when averaging `ν_n` to depth `k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TailConvention {
    /// Complete the suffix with the tail symbol `0` (all `n` shifts kept).
    #[default]
    Pad,
    /// Keep only the `n - k + 1` full windows and renormalize.
    Drop,
}

impl fmt::Display for TailConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailConvention::Pad => "pad",
            TailConvention::Drop => "drop",
        })
    }
}

/// Masses of all level-`k` cylinders, addressed by packed word index.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderMeasure {
    alphabet: Alphabet,
    depth: usize,
    masses: Vec<f64>,
    provenance: Provenance,
}

impl CylinderMeasure {
    pub fn new(alphabet: Alphabet, depth: usize, masses: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("measure depth must be at least 1".into()));
        }
        let expected = alphabet.count_words(depth);
        if masses.len() as u128 != expected {
            return Err(Error::InvalidArgument(format!(
                "depth-{depth} table needs {expected} masses, got {}",
                masses.len()
            )));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("masses must be finite and non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidArgument(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { alphabet, depth, masses, provenance })
    }

    pub fn uniform(alphabet: Alphabet, depth: usize) -> Result<Self> {
        let count = alphabet.count_words(depth) as usize;
        Self::new(alphabet, depth, vec![1.0 / count as f64; count], Provenance::Custom)
    }

    pub fn point_mass(alphabet: Alphabet, word: &Word) -> Result<Self> {
        let mut masses = vec![0.0; alphabet.count_words(word.len()) as usize];
        masses[word.packed_index(alphabet) as usize] = 1.0;
        Self::new(alphabet, word.len(), masses, Provenance::Custom)
    }

    /// Product measure `p^{⊗k}`.
    pub fn bernoulli(p: &[f64], depth: usize) -> Result<Self> {
        let alphabet = Alphabet::with_size(p.len())?;
        let total: f64 = p.iter().sum();
        if p.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidArgument("Bernoulli weights must be a probability vector".into()));
        }
        let mut masses = vec![1.0];
        for _ in 0..depth {
            masses = masses.iter().flat_map(|m| p.iter().map(move |q| m * q)).collect();
        }
        Self::new(alphabet, depth, masses, Provenance::Bernoulli(p.to_vec()))
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn mass(&self, w: &Word) -> f64 {
        assert_eq!(w.len(), self.depth);
        self.masses[w.packed_index(self.alphabet) as usize]
    }

    /// Masses of the level-`j` cylinders, `j ≤ depth`, obtained by summing
    /// over the trailing symbols.
    pub fn marginal(&self, j: usize) -> Vec<f64> {
        assert!(j <= self.depth);
        let block = self.alphabet.count_words(self.depth - j) as usize;
        self.masses.chunks(block).map(|c| c.iter().sum()).collect()
    }

    /// `word,mass` rows in lexicographic order, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("word,mass\n");
        for (i, m) in self.masses.iter().enumerate() {
            let w = Word::from_packed_index(i as u64, self.depth, self.alphabet);
            out.push_str(&format!("{w},{m:.16e}\n"));
        }
        out
    }
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("t must be finite and non-negative, got {t}")))
    }
}

/// `ν_n([w]) = ψ_w^t / Σ_{|v|=n} ψ_v^t`.
pub fn nu_weights(cf: &CylinderFunction, t: f64, n: usize) -> Result<CylinderMeasure> {
    nu_weights_with(cf, t, n, Budget::default())
}

pub fn nu_weights_with(cf: &CylinderFunction, t: f64, n: usize, budget: Budget) -> Result<CylinderMeasure> {
    check_t(t)?;
    if n == 0 {
        return Err(Error::InvalidArgument("level must be at least 1".into()));
    }
    let (table, log_total) = log_value_table(cf, t, n, budget)?;
    let masses = table.iter().map(|v| (v - log_total).exp()).collect();
    CylinderMeasure::new(cf.alphabet(), n, masses, Provenance::Nu { n, t })
}

/// `μ_n = (1/n) Σ_{j<n} ν_n ∘ σ^{-j}` at depth `k`, with `ν_n` carried by the
/// points `(w, 0, 0, ...)`.
pub fn mu_cesaro(cf: &CylinderFunction, t: f64, n: usize, k: usize) -> Result<CylinderMeasure> {
    mu_cesaro_with(cf, t, n, k, TailConvention::Pad, Budget::default())
}

pub fn mu_cesaro_with(
    cf: &CylinderFunction,
    t: f64,
    n: usize,
    k: usize,
    convention: TailConvention,
    budget: Budget,
) -> Result<CylinderMeasure> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("depth {k} must satisfy 1 <= k <= n = {n}")));
    }
    let nu = nu_weights_with(cf, t, n, budget)?;
    let masses = cesaro_average(&nu, k, convention);
    CylinderMeasure::new(cf.alphabet(), k, masses, Provenance::MuCesaro { n, t, k, convention })
}

fn cesaro_average(nu: &CylinderMeasure, k: usize, convention: TailConvention) -> Vec<f64> {
    let alphabet = nu.alphabet();
    let base = alphabet.size() as u64;
    let n = nu.depth();
    let size_k = alphabet.count_words(k) as usize;
    let shifts = match convention {
        TailConvention::Pad => n,
        TailConvention::Drop => n - k + 1,
    };
    let weight = 1.0 / shifts as f64;
    // ordered chunks keep the summation order fixed
    let chunk = (nu.masses.len() / 64).max(1);
    let partials: Vec<Vec<f64>> = nu
        .masses
        .par_chunks(chunk)
        .enumerate()
        .map(|(c, masses)| {
            let mut out = vec![0.0; size_k];
            let mut symbols = vec![TAIL_SYMBOL; n + k];
            for (offset, &m) in masses.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let w = Word::from_packed_index((c * chunk + offset) as u64, n, alphabet);
                symbols[..n].copy_from_slice(w.symbols());
                for j in 0..shifts {
                    let idx = symbols[j..j + k].iter().fold(0u64, |acc, &s| acc * base + s as u64);
                    out[idx as usize] += m * weight;
                }
            }
            out
        })
        .collect();
    let mut total = vec![0.0; size_k];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// `-(1/k) Σ m log m` in nats, with `0 log 0 = 0`.
pub fn entropy_depth(m: &CylinderMeasure) -> f64 {
    let h: f64 = m.masses.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    h / m.depth as f64
}

/// `(1/k) Σ_{|i|=k} m([i]) log ψ_i^t`.
pub fn energy_depth(cf: &CylinderFunction, t: f64, m: &CylinderMeasure) -> Result<f64> {
    check_t(t)?;
    if m.alphabet.size() != cf.alphabet().size() {
        return Err(Error::InvalidArgument("measure and cylinder function use different alphabets".into()));
    }
    let (table, _) = log_value_table(cf, t, m.depth, Budget::default())?;
    let e: f64 = m.masses.iter().zip(&table).filter(|(x, _)| **x > 0.0).map(|(x, lv)| x * lv).sum();
    Ok(e / m.depth as f64)
}

/// `(1/n) log S_n(t) - entropy - energy` at depth `n`. Non-negative for
/// every probability assignment, zero exactly at `ν_n`.
pub fn jensen_residual(cf: &CylinderFunction, t: f64, n: usize, m: &CylinderMeasure) -> Result<f64> {
    if m.depth != n {
        return Err(Error::InvalidArgument(format!("measure depth {} differs from level {n}", m.depth)));
    }
    let log_s = Pressure::new(cf).log_partition_sum(t, n)?;
    Ok(log_s / n as f64 - entropy_depth(m) - energy_depth(cf, t, m)?)
}

/// `max_{|i|=k} |μ_n([i]) - μ_n(σ^{-1}[i])|`, the second term read from the
/// depth-`(k+1)` table.
///
/// Under [`TailConvention::Pad`] the defect is at most `1/n`.
pub fn invariance_defect(cf: &CylinderFunction, t: f64, n: usize, k: usize) -> Result<f64> {
    invariance_defect_with(cf, t, n, k, TailConvention::Pad)
}

pub fn invariance_defect_with(
    cf: &CylinderFunction,
    t: f64,
    n: usize,
    k: usize,
    convention: TailConvention,
) -> Result<f64> {
    if k == 0 || k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "depth {k} must satisfy 1 <= k <= n - 1 = {}",
            n.saturating_sub(1)
        )));
    }
    let nu = nu_weights(cf, t, n)?;
    let at_k = cesaro_average(&nu, k, convention);
    let at_k1 = cesaro_average(&nu, k + 1, convention);
    Ok(defect_from_tables(cf.alphabet(), k, &at_k, &at_k1))
}

fn defect_from_tables(alphabet: Alphabet, k: usize, at_k: &[f64], at_k1: &[f64]) -> f64 {
    let stride = alphabet.count_words(k) as usize;
    at_k.iter()
        .enumerate()
        .map(|(i, m)| {
            let preimage: f64 = (0..alphabet.size()).map(|a| at_k1[a * stride + i]).sum();
            (m - preimage).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumDiagnostics {
    pub n: usize,
    pub k: usize,
    pub t: f64,
    pub entropy_k: f64,
    pub energy_k: f64,
    /// `min_{m ≤ n} P_m(t)`.
    pub pressure_upper: f64,
    pub gap: f64,
    pub invariance_defect_max: f64,
}

/// Entropy and energy of `μ_n` at depth `k` against the pressure bound.
pub fn diagnostics(
    cf: &CylinderFunction,
    t: f64,
    n: usize,
    k: usize,
) -> Result<(CylinderMeasure, EquilibriumDiagnostics)> {
    if k == 0 || k + 1 > n {
        return Err(Error::InvalidArgument(format!("depth {k} must satisfy 1 <= k <= n - 1")));
    }
    let nu = nu_weights(cf, t, n)?;
    let at_k = cesaro_average(&nu, k, TailConvention::Pad);
    let at_k1 = cesaro_average(&nu, k + 1, TailConvention::Pad);
    let defect = defect_from_tables(cf.alphabet(), k, &at_k, &at_k1);
    let mu = CylinderMeasure::new(
        cf.alphabet(),
        k,
        at_k,
        Provenance::MuCesaro { n, t, k, convention: TailConvention::Pad },
    )?;
    let entropy_k = entropy_depth(&mu);
    let energy_k = energy_depth(cf, t, &mu)?;
    let pressure_upper = Pressure::new(cf).sequence(t, n)?.fekete_upper;
    let diag = EquilibriumDiagnostics {
        n,
        k,
        t,
        entropy_k,
        energy_k,
        pressure_upper,
        gap: pressure_upper - entropy_k - energy_k,
        invariance_defect_max: defect,
    };
    Ok((mu, diag))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalDimensionSamples {
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

/// Draws words from `ν_n` symbol by symbol (conditional on the prefix) and
/// returns `log ν_n([w]) / log ψ_w^t` for each.
pub fn local_dimension_samples(
    cf: &CylinderFunction,
    t: f64,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<LocalDimensionSamples> {
    check_t(t)?;
    if n == 0 {
        return Err(Error::InvalidArgument("level must be at least 1".into()));
    }
    let (table, log_total) = log_value_table(cf, t, n, Budget::default())?;
    let base = cf.alphabet().size();
    // prefix_sums[j][p] = log Σ over words with prefix p of length j
    let mut prefix_sums = vec![table.clone()];
    for _ in 0..n {
        let last = prefix_sums.last().unwrap();
        let next: Vec<f64> = last.chunks(base).map(crate::reduce::log_sum_exp).collect();
        prefix_sums.push(next);
    }
    prefix_sums.reverse();
    let ratios: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            let mut index = 0usize;
            for level in prefix_sums.iter().skip(1) {
                let parent = level[index * base..(index + 1) * base].to_vec();
                let parent_log = crate::reduce::log_sum_exp(&parent);
                let mut u: f64 = rng.gen();
                let mut chosen = base - 1;
                for (a, lv) in parent.iter().enumerate() {
                    let p = (lv - parent_log).exp();
                    if u < p {
                        chosen = a;
                        break;
                    }
                    u -= p;
                }
                index = index * base + chosen;
            }
            (table[index] - log_total) / table[index]
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / ratios.len().max(1) as f64;
    Ok(LocalDimensionSamples { ratios, mean, std_dev: var.sqrt() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliEstimate {
    pub p: Vec<f64>,
    /// `h(p) + E_k(p)`; an estimate of the variational value, not a bound.
    pub score: f64,
    pub iterations: usize,
}

const ASCENT_DAMPING: f64 = 0.5;

/// Maximizes `h(p) + E_k(p)` over product measures `p^{⊗k}`.
///
/// With `p = softmax(θ)`, the stationarity condition is
/// `θ_a = ∂E_k/∂p_a + const`; each iteration moves `θ` halfway toward that
/// target, starting from the uniform vector. The best score seen is returned.
pub fn bernoulli_lower_estimate(
    cf: &CylinderFunction,
    t: f64,
    k: usize,
    iterations: usize,
) -> Result<BernoulliEstimate> {
    check_t(t)?;
    if k == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let (table, _) = log_value_table(cf, t, k, Budget::default())?;
    let alphabet = cf.alphabet();
    let base = alphabet.size();
    let words: Vec<Vec<u8>> =
        (0..table.len()).map(|i| Word::from_packed_index(i as u64, k, alphabet).symbols().to_vec()).collect();

    let score_and_grad = |p: &[f64]| -> (f64, Vec<f64>) {
        let entropy: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
        let mut energy = 0.0;
        let mut grad = vec![0.0; base];
        for (w, lv) in words.iter().zip(&table) {
            let pw: f64 = w.iter().map(|&s| p[s as usize]).product();
            energy += pw * lv;
            // ∂/∂p_a Π p_{w_j} = count_a(w) · pw / p_a
            for &s in w {
                grad[s as usize] += pw / p[s as usize] * lv;
            }
        }
        let kf = k as f64;
        (entropy + energy / kf, grad.into_iter().map(|g| g / kf).collect())
    };

    let softmax = |theta: &[f64]| -> Vec<f64> {
        let m = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = theta.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|x| x / z).collect()
    };

    let mut theta = vec![0.0; base];
    let mut p = softmax(&theta);
    let (mut score, mut grad) = score_and_grad(&p);
    let mut best = (score, p.clone());
    for _ in 0..iterations {
        let mean = grad.iter().sum::<f64>() / base as f64;
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th = (1.0 - ASCENT_DAMPING) * *th + ASCENT_DAMPING * (g - mean);
        }
        p = softmax(&theta);
        (score, grad) = score_and_grad(&p);
        if score > best.0 {
            best = (score, p.clone());
        }
    }
    Ok(BernoulliEstimate { p: best.1, score: best.0, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::{AffineIfs, AffineMap};
    use crate::linalg::Matrix;

    fn swap_pair() -> CylinderFunction {
        CylinderFunction::natural(
            AffineIfs::new(
                "swap",
                vec![
                    AffineMap::new(Matrix::diag(&[0.5, 0.25]), vec![0.0, 0.0]),
                    AffineMap::new(Matrix::diag(&[0.25, 0.5]), vec![1.0, 1.0]),
                ],
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn half() -> CylinderFunction {
        CylinderFunction::product(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn nu_examples() {
        let nu = nu_weights(&half(), 0.8, 4).unwrap();
        assert!(nu.masses().iter().all(|m| (m - 1.0 / 16.0).abs() < 1e-15));

        let nu = nu_weights(&swap_pair(), 1.5, 2).unwrap();
        let sum = 0.0625 + 2.0 * 0.125f64.powf(1.5) + 0.0625;
        let expected = [0.0625 / sum, 0.125f64.powf(1.5) / sum, 0.125f64.powf(1.5) / sum, 0.0625 / sum];
        for (m, e) in nu.masses().iter().zip(expected) {
            assert!((m - e).abs() < 1e-14);
        }
        assert!((nu.masses()[0] - 0.29289322).abs() < 1e-8);
        assert!((nu.masses()[1] - 0.20710678).abs() < 1e-8);

        let single = CylinderFunction::natural(
            AffineIfs::new("one", vec![AffineMap::new(Matrix::diag(&[0.5, 0.3]), vec![0.0, 0.0])]).unwrap(),
        )
        .unwrap();
        let nu = nu_weights(&single, 1.2, 3).unwrap();
        assert_eq!(nu.masses(), &[1.0]);
    }

    #[test]
    fn cesaro_examples() {
        for k in 1..=4 {
            let mu = mu_cesaro_with(&half(), 1.0, 6, k, TailConvention::Drop, Budget::default()).unwrap();
            assert!(mu.masses().iter().all(|m| (m - 0.5f64.powi(k as i32)).abs() < 1e-15), "k={k}");
        }
        // padding with the tail symbol biases the short windows toward 0…0
        let padded = mu_cesaro(&half(), 1.0, 6, 2).unwrap();
        let expected_00 = (5.0 * 0.25 + 0.5) / 6.0;
        assert!((padded.masses()[0] - expected_00).abs() < 1e-15);
        assert!((padded.masses()[3] - 5.0 * 0.25 / 6.0).abs() < 1e-15);
        let mu = mu_cesaro(&swap_pair(), 1.5, 2, 1).unwrap();
        assert!((mu.masses()[0] - 0.5).abs() < 1e-15 && (mu.masses()[1] - 0.5).abs() < 1e-15);
        assert!(invariance_defect(&swap_pair(), 1.5, 6, 2).unwrap() <= 1.0 / 6.0);
        assert!(mu_cesaro(&half(), 1.0, 3, 4).is_err());
    }

    #[test]
    fn cesaro_masses_are_consistent_across_depths() {
        let cf = swap_pair();
        let deep = mu_cesaro(&cf, 1.3, 8, 4).unwrap();
        for k in 1..4 {
            let shallow = mu_cesaro(&cf, 1.3, 8, k).unwrap();
            for (a, b) in shallow.masses().iter().zip(deep.marginal(k)) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((shallow.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn drop_convention_is_normalized() {
        let mu = mu_cesaro_with(&swap_pair(), 1.3, 6, 3, TailConvention::Drop, Budget::default()).unwrap();
        assert!((mu.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(mu.provenance(), &Provenance::MuCesaro { n: 6, t: 1.3, k: 3, convention: TailConvention::Drop });
    }

    #[test]
    fn entropy_examples() {
        let two = Alphabet::new(2).unwrap();
        let u = CylinderMeasure::uniform(two, 3).unwrap();
        assert!((entropy_depth(&u) - 2f64.ln()).abs() < 1e-15);
        let point = CylinderMeasure::point_mass(two, &Word::from_symbols(vec![1, 0])).unwrap();
        assert_eq!(entropy_depth(&point), 0.0);
        let nu = nu_weights(&swap_pair(), 1.5, 2).unwrap();
        // direct evaluation of -Σ m ln m / 2 for the four masses
        assert!((entropy_depth(&nu) - 0.6857513293769083).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let two = Alphabet::new(2).unwrap();
        let u = CylinderMeasure::uniform(two, 2).unwrap();
        assert!((energy_depth(&half(), 1.0, &u).unwrap() + 2f64.ln()).abs() < 1e-15);

        let diag_pair = CylinderFunction::natural(
            AffineIfs::new(
                "d",
                vec![
                    AffineMap::new(Matrix::diag(&[0.5, 0.25]), vec![0.0, 0.0]),
                    AffineMap::new(Matrix::diag(&[0.5, 0.25]), vec![1.0, 0.0]),
                ],
            )
            .unwrap(),
        )
        .unwrap();
        let point = CylinderMeasure::point_mass(two, &Word::from_symbols(vec![0, 0])).unwrap();
        assert!((energy_depth(&diag_pair, 1.0, &point).unwrap() + 2f64.ln()).abs() < 1e-15);

        let three_diag = CylinderFunction::natural(
            AffineIfs::new(
                "d3",
                (0..3).map(|i| AffineMap::new(Matrix::diag(&[0.5, 0.25]), vec![i as f64, 0.0])).collect(),
            )
            .unwrap(),
        )
        .unwrap();
        let u1 = CylinderMeasure::uniform(Alphabet::new(3).unwrap(), 1).unwrap();
        assert!((energy_depth(&three_diag, 1.5, &u1).unwrap() - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn jensen_equality_at_nu_and_point_masses() {
        let cf = swap_pair();
        let n = 5;
        let nu = nu_weights(&cf, 1.2, n).unwrap();
        assert!(jensen_residual(&cf, 1.2, n, &nu).unwrap().abs() < 1e-12);

        let w = Word::from_symbols(vec![0, 1, 1, 0, 1]);
        let point = CylinderMeasure::point_mass(cf.alphabet(), &w).unwrap();
        let log_s = Pressure::new(&cf).log_partition_sum(1.2, n).unwrap();
        let expected = (log_s - cf.log_value(1.2, &w).unwrap()) / n as f64;
        let r = jensen_residual(&cf, 1.2, n, &point).unwrap();
        assert!((r - expected).abs() < 1e-13 && r >= 0.0);
        assert!(jensen_residual(&cf, 1.2, 4, &point).is_err());
    }

    #[test]
    fn defect_is_zero_for_exactly_invariant_weights() {
        let drop = invariance_defect_with(&half(), 1.0, 8, 3, TailConvention::Drop).unwrap();
        assert!(drop < 1e-15);
        // padded: |ν([000]) - ν(σ^{-8}[000])| / 8 = (1 - 1/8) / 8
        let pad = invariance_defect(&half(), 1.0, 8, 3).unwrap();
        assert!((pad - 7.0 / 64.0).abs() < 1e-15);
        assert!(invariance_defect(&half(), 1.0, 8, 8).is_err());
    }

    #[test]
    fn local_dimension_exact_for_equal_weights() {
        let s = local_dimension_samples(&half(), 1.0, 10, 50, 3).unwrap();
        assert!(s.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));
        let third = CylinderFunction::product(vec![1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let s = local_dimension_samples(&third, 2f64.ln() / 3f64.ln(), 10, 50, 3).unwrap();
        assert!(s.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn local_dimension_sampling_matches_nu() {
        // empirical frequencies of sampled words track ν_n
        let cf = CylinderFunction::product(vec![0.2, 0.6]).unwrap();
        let n = 3;
        let t = 1.0;
        let nu = nu_weights(&cf, t, n).unwrap();
        let samples = local_dimension_samples(&cf, t, n, 20_000, 9).unwrap();
        // each word has a distinct ratio only through its log ψ; group by value
        let table: Vec<f64> = (0..8)
            .map(|i| {
                let w = Word::from_packed_index(i, n, cf.alphabet());
                let lv = cf.log_value(t, &w).unwrap();
                (nu.masses()[i as usize].ln()) / lv
            })
            .collect();
        for ones in 0..=3usize {
            let word_ids: Vec<usize> = (0..8).filter(|i: &usize| i.count_ones() as usize == ones).collect();
            let target = table[word_ids[0]];
            let expected: f64 = word_ids.iter().map(|&i| nu.masses()[i]).sum();
            let hits = samples.ratios.iter().filter(|r| (*r - target).abs() < 1e-12).count();
            let freq = hits as f64 / 20_000.0;
            assert!((freq - expected).abs() < 0.02, "ones={ones} {freq} vs {expected}");
        }
    }

    #[test]
    fn bernoulli_recovers_additive_pressure() {
        let s = [0.3, 0.5, 0.15];
        let cf = CylinderFunction::product(s.to_vec()).unwrap();
        for t in [0.5, 1.0, 1.7] {
            let est = bernoulli_lower_estimate(&cf, t, 3, 200).unwrap();
            let z: f64 = s.iter().map(|v: &f64| v.powf(t)).sum();
            assert!((est.score - z.ln()).abs() < 1e-10, "t={t}");
            for (p, v) in est.p.iter().zip(s) {
                assert!((p - v.powf(t) / z).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bernoulli_symmetric_and_bounded() {
        let cf = swap_pair();
        let est = bernoulli_lower_estimate(&cf, 1.3, 4, 100).unwrap();
        assert!(est.p.iter().all(|p| (p - 0.5).abs() < 1e-6));
        let pk = Pressure::new(&cf).pressure_at(1.3, 4).unwrap();
        assert!(est.score <= pk + 1e-10);
    }

    #[test]
    fn measure_construction_checks() {
        let two = Alphabet::new(2).unwrap();
        assert!(CylinderMeasure::new(two, 1, vec![0.5, 0.6], Provenance::Custom).is_err());
        assert!(CylinderMeasure::new(two, 2, vec![0.5, 0.5], Provenance::Custom).is_err());
        assert!(CylinderMeasure::new(two, 1, vec![1.5, -0.5], Provenance::Custom).is_err());
        let b = CylinderMeasure::bernoulli(&[0.25, 0.75], 2).unwrap();
        assert_eq!(b.masses(), &[0.0625, 0.1875, 0.1875, 0.5625]);
        assert_eq!(b.to_csv().lines().next(), Some("word,mass"));
        assert_eq!(b.to_csv().lines().nth(2), Some("01,1.8750000000000000e-1"));
    }
}

//! Cylinder functions `ψ_i^t` and a sampling verifier for their three axioms:
//! bounded variation, the subchain rule, and the two-sided bounds in `t`.

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::affine::AffineIfs;
use crate::error::{Error, Result};
use crate::linalg::{log_svf_from_logs, raw_singular_values, singular_values, Matrix, MAX_DIM};
use crate::rng::stream_rng;
use crate::symbolic::{concat, Alphabet, Word};

/// Relative slack allowed by the verifier before an axiom counts as violated.
pub const VIOLATION_TOLERANCE: f64 = 1e-9;

/// Relative slack granted to the subchain inequality for rounding.
pub const SUBCHAIN_SLACK: f64 = 1e-12;

/// A constant (tail-independent) cylinder function.
#[derive(Clone, Debug, PartialEq)]
pub enum CylinderFunction {
    /// `ψ_i^t = α^t(A_i)` for the linear parts of an affine IFS.
    Natural(AffineIfs),
    /// `ψ_i^t = Π_k s_{i_k}^t`; satisfies the chain rule with equality.
    Product(Vec<f64>),
}

/// Certified constants `(K_t, s_low, s_high)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub k_t: f64,
    pub s_low: f64,
    pub s_high: f64,
}

impl CylinderFunction {
    pub fn natural(ifs: AffineIfs) -> Result<Self> {
        for (i, m) in ifs.maps().iter().enumerate() {
            singular_values(&m.matrix).map_err(|_| {
                Error::InvalidIfs(format!("map {i} is singular; the natural cylinder function needs invertible maps"))
            })?;
        }
        Ok(Self::Natural(ifs))
    }

    pub fn product(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("product cylinder function needs weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
            return Err(Error::InvalidArgument(format!("product weight {w} outside (0, 1)")));
        }
        Alphabet::with_size(weights.len())?;
        Ok(Self::Product(weights))
    }

    pub fn alphabet(&self) -> Alphabet {
        let size = match self {
            Self::Natural(ifs) => ifs.len(),
            Self::Product(w) => w.len(),
        };
        Alphabet::with_size(size).expect("validated at construction")
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Natural(_) => "natural",
            Self::Product(_) => "product",
        }
    }

    /// Hex SHA-256 identifying the function's values (cache key component).
    pub fn content_hash(&self) -> String {
        match self {
            Self::Natural(ifs) => ifs.linear_hash(),
            Self::Product(w) => {
                let mut h = Sha256::new();
                h.update(b"product");
                for v in w {
                    h.update(v.to_bits().to_le_bytes());
                }
                hex::encode(h.finalize())
            }
        }
    }

    pub fn constants(&self, _t: f64) -> Constants {
        let (s_low, s_high) = match self {
            Self::Natural(ifs) => ifs.maps().iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), m| {
                let s = raw_singular_values(&m.matrix);
                (lo.min(*s.last().unwrap()), hi.max(s[0]))
            }),
            Self::Product(w) => w.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s))),
        };
        Constants { k_t: 1.0, s_low, s_high }
    }

    /// `log ψ_w^t(h)`. The tail `h` is accepted for interface completeness;
    /// both implemented kinds ignore it.
    pub fn log_value_with_tail(&self, t: f64, w: &Word, _tail: &Word) -> Result<f64> {
        if w.is_empty() {
            return Err(Error::EmptyWord);
        }
        let alphabet = self.alphabet();
        for &s in w.symbols() {
            alphabet.check_symbol(s as usize)?;
        }
        let ev = Evaluator::new(self);
        let state = w.symbols().iter().fold(ev.root(), |st, &s| ev.extend(&st, s));
        Ok(ev.log_value(&state, t))
    }

    pub fn log_value(&self, t: f64, w: &Word) -> Result<f64> {
        self.log_value_with_tail(t, w, &Word::empty())
    }

    pub fn value(&self, t: f64, w: &Word) -> Result<f64> {
        self.log_value(t, w).map(f64::exp)
    }
}

pub fn cf_value(cf: &CylinderFunction, t: f64, w: &Word) -> Result<f64> {
    cf.value(t, w)
}

pub fn cf_constants(cf: &CylinderFunction, t: f64) -> Constants {
    cf.constants(t)
}

/// Accumulated state for a word prefix, extended one symbol at a time.
#[derive(Clone, Copy, Debug)]
pub(crate) enum PrefixState {
    Natural {
        /// `A_w = 2^{scale} · m`
        m: Matrix,
        log_scale: f64,
        log_det: f64,
    },
    Product {
        log_sum: f64,
    },
}

const RESCALE_BELOW: f64 = 1.0 / (1u128 << 100) as f64;
const RESCALE_FACTOR: f64 = (1u128 << 100) as f64;

/// Evaluates `log ψ` along a depth-first walk of the word tree.
pub(crate) struct Evaluator<'a> {
    cf: &'a CylinderFunction,
    log_dets: Vec<f64>,
    log_weights: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(cf: &'a CylinderFunction) -> Self {
        match cf {
            CylinderFunction::Natural(ifs) => Self {
                cf,
                log_dets: ifs.maps().iter().map(|m| m.matrix.det().abs().ln()).collect(),
                log_weights: Vec::new(),
            },
            CylinderFunction::Product(w) => {
                Self { cf, log_dets: Vec::new(), log_weights: w.iter().map(|s| s.ln()).collect() }
            }
        }
    }

    pub(crate) fn alphabet_size(&self) -> usize {
        self.cf.alphabet().size()
    }

    pub(crate) fn root(&self) -> PrefixState {
        match self.cf {
            CylinderFunction::Natural(ifs) => {
                PrefixState::Natural { m: Matrix::identity(ifs.dim()), log_scale: 0.0, log_det: 0.0 }
            }
            CylinderFunction::Product(_) => PrefixState::Product { log_sum: 0.0 },
        }
    }

    pub(crate) fn extend(&self, state: &PrefixState, symbol: u8) -> PrefixState {
        match (state, self.cf) {
            (PrefixState::Natural { m, log_scale, log_det }, CylinderFunction::Natural(ifs)) => {
                let s = symbol as usize;
                let mut next = m * &ifs.maps()[s].matrix;
                let mut log_scale = *log_scale;
                // power-of-two rescaling keeps the product exact
                if next.max_abs() < RESCALE_BELOW {
                    next = next.scaled(RESCALE_FACTOR);
                    log_scale -= RESCALE_FACTOR.ln();
                }
                PrefixState::Natural { m: next, log_scale, log_det: log_det + self.log_dets[s] }
            }
            (PrefixState::Product { log_sum }, CylinderFunction::Product(_)) => {
                PrefixState::Product { log_sum: log_sum + self.log_weights[symbol as usize] }
            }
            _ => unreachable!("prefix state does not match cylinder function"),
        }
    }

    /// Logarithms of the singular values of `A_w`, non-increasing.
    pub(crate) fn log_spectrum(&self, state: &PrefixState) -> ([f64; MAX_DIM], usize) {
        let mut out = [0.0; MAX_DIM];
        match state {
            PrefixState::Natural { m, log_scale, log_det } => {
                let d = m.dim();
                if d == 1 {
                    out[0] = *log_det;
                    return (out, 1);
                }
                let sv = raw_singular_values(m);
                let mut head = 0.0;
                for i in 0..d - 1 {
                    out[i] = sv[i].ln() + log_scale;
                    head += out[i];
                }
                // the smallest value comes from the exactly tracked determinant
                out[d - 1] = (log_det - head).min(out[d - 2]);
                (out, d)
            }
            PrefixState::Product { log_sum } => {
                out[0] = *log_sum;
                (out, 1)
            }
        }
    }

    pub(crate) fn log_value(&self, state: &PrefixState, t: f64) -> f64 {
        match state {
            PrefixState::Product { log_sum } => {
                if t == 0.0 {
                    0.0
                } else {
                    t * log_sum
                }
            }
            PrefixState::Natural { .. } => {
                let (logs, d) = self.log_spectrum(state);
                log_svf_from_logs(&logs[..d], t)
            }
        }
    }
}

/// Worst observed slack for each axiom; positive means violated.
#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport {
    /// Largest `ψ(h)/ψ(h')` over the tails tried (exactly 1 for constant functions).
    pub bvp_max_ratio: f64,
    /// `max ψ(i) / (ψ(i|_j) ψ(σ^j i)) - (1 + 1e-12)`.
    pub worst_subchain_violation: f64,
    /// Largest relative excess of `ψ^{t+δ}` outside `[ψ^t s_low^{δ|w|}, ψ^t s_high^{δ|w|}]`.
    pub worst_param_violation: f64,
    pub samples: usize,
}

impl AxiomReport {
    pub fn violated(&self) -> bool {
        self.bvp_max_ratio - 1.0 > VIOLATION_TOLERANCE
            || self.worst_subchain_violation > VIOLATION_TOLERANCE
            || self.worst_param_violation > VIOLATION_TOLERANCE
    }
}

/// Samples random words, split points, `t` values from the grid and tails,
/// and records the worst slack per axiom. Sample `s` draws from random
/// stream `s`, so the report depends only on `seed`.
pub fn verify_axioms(
    cf: &CylinderFunction,
    t_grid: &[f64],
    n_max: usize,
    samples: usize,
    seed: u64,
) -> Result<AxiomReport> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("t grid is empty".into()));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("t grid values must be finite and non-negative".into()));
    }
    let alphabet = cf.alphabet().size();
    let max_len = n_max.max(2);
    let default_delta = 0.25;
    let per_sample: Vec<(f64, f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            let len = rng.gen_range(2..=max_len);
            let word = Word::from_symbols((0..len).map(|_| rng.gen_range(0..alphabet) as u8).collect::<Vec<u8>>());
            let split = rng.gen_range(1..len);
            let ti = rng.gen_range(0..t_grid.len());
            let t = t_grid[ti];
            let delta = if t_grid.len() < 2 {
                default_delta
            } else if ti + 1 < t_grid.len() {
                (t_grid[ti + 1] - t).abs()
            } else {
                (t - t_grid[ti - 1]).abs()
            };
            let delta = if delta > 0.0 { delta } else { default_delta };
            let tail_a = Word::from_symbols((0..8).map(|_| rng.gen_range(0..alphabet) as u8).collect::<Vec<u8>>());
            let tail_b = Word::empty();

            let lv = |tt: f64, w: &Word, tail: &Word| cf.log_value_with_tail(tt, w, tail).unwrap();

            let bvp = (lv(t, &word, &tail_a) - lv(t, &word, &tail_b)).abs().exp();

            let head = word.prefix(split);
            let rest = word.shifted(split);
            debug_assert_eq!(concat(&head, &rest), word);
            let ratio = (lv(t, &word, &tail_b) - lv(t, &head, &tail_b) - lv(t, &rest, &tail_b)).exp();
            let subchain = ratio - (1.0 + SUBCHAIN_SLACK);

            let c = cf.constants(t);
            let base = lv(t, &word, &tail_b);
            let next = lv(t + delta, &word, &tail_b);
            let span = delta * word.len() as f64;
            let lower = base + span * c.s_low.ln();
            let upper = base + span * c.s_high.ln();
            let param = ((lower - next).exp() - 1.0).max((next - upper).exp() - 1.0);
            (bvp, subchain, param)
        })
        .collect();
    let fold = |f: fn(&(f64, f64, f64)) -> f64| per_sample.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Ok(AxiomReport {
        bvp_max_ratio: if samples == 0 { 1.0 } else { fold(|s| s.0) },
        worst_subchain_violation: fold(|s| s.1),
        worst_param_violation: fold(|s| s.2),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::AffineMap;
    use crate::linalg::svf_alpha_t;

    fn diag_system(diags: &[[f64; 2]]) -> CylinderFunction {
        let maps =
            diags.iter().enumerate().map(|(i, d)| AffineMap::new(Matrix::diag(d), vec![i as f64, 0.0])).collect();
        CylinderFunction::natural(AffineIfs::new("diag", maps).unwrap()).unwrap()
    }

    fn random_pair(seed: u64) -> CylinderFunction {
        let mut rng = stream_rng(seed, 999);
        let maps = (0..2)
            .map(|i| loop {
                let rows: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| rng.gen_range(-0.6..0.6)).collect()).collect();
                let m = Matrix::from_rows(&rows).unwrap();
                if let Ok(s) = singular_values(&m) {
                    if s.largest() < 0.9 && s.smallest() > 0.05 {
                        break AffineMap::new(m, vec![i as f64, 0.0]);
                    }
                }
            })
            .collect();
        CylinderFunction::natural(AffineIfs::new("random", maps).unwrap()).unwrap()
    }

    fn w(s: &[u8]) -> Word {
        Word::from_symbols(s.to_vec())
    }

    #[test]
    fn value_examples() {
        let half = CylinderFunction::product(vec![0.5, 0.5]).unwrap();
        assert!((half.value(1.0, &w(&[0, 1, 1, 0, 1])).unwrap() - 0.03125).abs() < 1e-16);

        let diag = diag_system(&[[0.5, 0.25], [0.5, 0.25]]);
        assert!((diag.value(1.5, &w(&[0, 0])).unwrap() - 0.0625).abs() < 1e-16);
        assert_eq!(diag.value(0.0, &w(&[1])).unwrap(), 1.0);
        assert!(matches!(diag.value(1.0, &Word::empty()), Err(Error::EmptyWord)));
        assert!(matches!(diag.value(1.0, &w(&[2])), Err(Error::InvalidSymbol { .. })));
    }

    #[test]
    fn natural_value_matches_direct_svf() {
        let cf = random_pair(3);
        let CylinderFunction::Natural(ifs) = &cf else { unreachable!() };
        for word in [w(&[0]), w(&[1, 0]), w(&[0, 1, 1, 0, 1, 0]), w(&[1; 9])] {
            let a = crate::linalg::word_matrix(ifs, &word).unwrap();
            for t in [0.3, 1.0, 1.7, 2.0, 3.5] {
                let direct = svf_alpha_t(&a, t).unwrap();
                let ours = cf.value(t, &word).unwrap();
                assert!((ours - direct).abs() <= 1e-12 * direct, "t={t} {ours} {direct}");
            }
        }
    }

    #[test]
    fn long_words_do_not_underflow() {
        let cf = diag_system(&[[0.01, 0.001], [0.02, 0.001]]);
        let word = Word::from_symbols(vec![0u8; 200]);
        let lv = cf.log_value(2.0, &word).unwrap();
        let expected = 200.0 * (0.01f64.ln() + 0.001f64.ln());
        assert!((lv - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn constants_examples() {
        let p = CylinderFunction::product(vec![0.3, 0.5]).unwrap();
        assert_eq!(p.constants(1.0), Constants { k_t: 1.0, s_low: 0.3, s_high: 0.5 });
        let n = diag_system(&[[0.5, 0.25], [0.25, 0.5]]);
        assert_eq!(n.constants(1.0), Constants { k_t: 1.0, s_low: 0.25, s_high: 0.5 });
        let single = CylinderFunction::natural(
            AffineIfs::new("one", vec![AffineMap::new(Matrix::diag(&[0.5, 0.5]), vec![0.0, 0.0])]).unwrap(),
        )
        .unwrap();
        assert_eq!(single.constants(2.0), Constants { k_t: 1.0, s_low: 0.5, s_high: 0.5 });
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(CylinderFunction::product(vec![0.5, 1.0]).is_err());
        assert!(CylinderFunction::product(vec![]).is_err());
        let singular = AffineIfs::new(
            "s",
            vec![
                AffineMap::new(Matrix::from_rows(&[vec![0.2, 0.4], vec![0.1, 0.2]]).unwrap(), vec![0.0, 0.0]),
                AffineMap::new(Matrix::diag(&[0.3, 0.3]), vec![1.0, 0.0]),
            ],
        )
        .unwrap();
        assert!(CylinderFunction::natural(singular).is_err());
    }

    #[test]
    fn product_kind_satisfies_chain_rule() {
        let cf = CylinderFunction::product(vec![0.3, 0.45, 0.2]).unwrap();
        let report = verify_axioms(&cf, &[0.5, 1.0, 1.5], 10, 500, 7).unwrap();
        assert!((report.worst_subchain_violation + SUBCHAIN_SLACK).abs() <= 1e-12);
        assert_eq!(report.bvp_max_ratio, 1.0);
        assert!(!report.violated());
    }

    #[test]
    fn natural_kind_satisfies_axioms() {
        for seed in 0..5 {
            let cf = random_pair(seed);
            let report = verify_axioms(&cf, &[0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25], 12, 1000, seed).unwrap();
            assert!(report.worst_subchain_violation <= 0.0, "{report:?}");
            assert!(report.worst_param_violation <= 1e-10, "{report:?}");
            assert!(!report.violated());
        }
    }

    #[test]
    fn verifier_is_deterministic_per_seed() {
        let cf = random_pair(1);
        let a = verify_axioms(&cf, &[0.5, 1.0], 8, 300, 11).unwrap();
        let b = verify_axioms(&cf, &[0.5, 1.0], 8, 300, 11).unwrap();
        assert_eq!(a, b);
        assert!(verify_axioms(&cf, &[], 8, 10, 0).is_err());
    }

    #[test]
    fn report_flags_slack_beyond_tolerance() {
        let ok = AxiomReport {
            bvp_max_ratio: 1.0,
            worst_subchain_violation: -1e-12,
            worst_param_violation: 5e-10,
            samples: 1,
        };
        assert!(!ok.violated());
        assert!(AxiomReport { worst_subchain_violation: 2e-9, ..ok.clone() }.violated());
        assert!(AxiomReport { bvp_max_ratio: 1.0 + 1e-6, ..ok.clone() }.violated());
        assert!(AxiomReport { worst_param_violation: 1e-3, ..ok }.violated());
    }
}

//! Depth-first enumeration of `I^n` split into prefix blocks, with a
//! streaming log-sum-exp whose result does not depend on scheduling.
//!
//! The word tree is cut at depth `p = min(n, 4)`. Each of the `#I^p` blocks
//! is walked sequentially in lexicographic order by one worker, and the
//! per-block results are combined in block order. Floating-point results are
//! therefore bitwise identical for any thread count.

use rayon::prelude::*;

use crate::cylinder::{CylinderFunction, Evaluator, PrefixState};
use crate::error::Result;
use crate::symbolic::Budget;

pub const BLOCK_DEPTH: usize = 4;

/// Running `log Σ exp(x)` as `max + ln(sum)`.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        } else {
            self.sum += other.sum * (other.max - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut acc = LogSumExp::default();
    for &v in values {
        acc.push(v);
    }
    acc.value()
}

/// Visits every extension of `root` by `depth` symbols in lexicographic
/// order, reusing shared prefix states.
pub(crate) fn walk(ev: &Evaluator<'_>, root: PrefixState, depth: usize, mut visit: impl FnMut(&[u8], &PrefixState)) {
    if depth == 0 {
        visit(&[], &root);
        return;
    }
    let k = ev.alphabet_size();
    let mut digits = vec![0u8; depth];
    let mut stack = Vec::with_capacity(depth + 1);
    stack.push(root);
    for i in 0..depth {
        let next = ev.extend(&stack[i], 0);
        stack.push(next);
    }
    loop {
        visit(&digits, &stack[depth]);
        let mut pos = depth;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if (digits[pos] as usize) + 1 < k {
                digits[pos] += 1;
                break;
            }
            digits[pos] = 0;
        }
        stack.truncate(pos + 1);
        for i in pos..depth {
            let next = ev.extend(&stack[i], digits[i]);
            stack.push(next);
        }
    }
}

fn block_roots(ev: &Evaluator<'_>, n: usize) -> (usize, Vec<PrefixState>) {
    let p = n.min(BLOCK_DEPTH);
    let mut roots = Vec::new();
    walk(ev, ev.root(), p, |_, s| roots.push(*s));
    (p, roots)
}

/// `log Σ_{|w|=n} ψ_w^t` via ordered block reduction.
pub(crate) fn log_partition_sum_raw(cf: &CylinderFunction, t: f64, n: usize, budget: Budget) -> Result<f64> {
    budget.check(cf.alphabet(), n)?;
    let ev = Evaluator::new(cf);
    let (p, roots) = block_roots(&ev, n);
    let partials: Vec<LogSumExp> = roots
        .par_iter()
        .map(|root| {
            let mut acc = LogSumExp::default();
            walk(&ev, *root, n - p, |_, s| acc.push(ev.log_value(s, t)));
            acc
        })
        .collect();
    let mut total = LogSumExp::default();
    for part in partials {
        total.merge(part);
    }
    Ok(total.value())
}

/// `log ψ_w^t` for every `w ∈ I^n`, indexed by packed word index, together
/// with the log of their sum (reduced exactly as in `log_partition_sum_raw`).
pub(crate) fn log_value_table(cf: &CylinderFunction, t: f64, n: usize, budget: Budget) -> Result<(Vec<f64>, f64)> {
    budget.check(cf.alphabet(), n)?;
    let ev = Evaluator::new(cf);
    let (p, roots) = block_roots(&ev, n);
    let blocks: Vec<(Vec<f64>, LogSumExp)> = roots
        .par_iter()
        .map(|root| {
            let mut acc = LogSumExp::default();
            let mut values = Vec::new();
            walk(&ev, *root, n - p, |_, s| {
                let v = ev.log_value(s, t);
                acc.push(v);
                values.push(v);
            });
            (values, acc)
        })
        .collect();
    let mut total = LogSumExp::default();
    let mut table = Vec::with_capacity(cf.alphabet().count_words(n) as usize);
    for (values, acc) in blocks {
        total.merge(acc);
        table.extend(values);
    }
    Ok((table, total.value()))
}

/// Runs `f` on a dedicated pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_sum() {
        let xs = [-3.0, 0.5, -1.25, 2.0, -700.0];
        let naive: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn lse_survives_underflow() {
        let xs = vec![-2000.0; 8];
        assert!((log_sum_exp(&xs) - (-2000.0 + 8f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_single_stream() {
        let xs: Vec<f64> = (0..100).map(|k| ((k * 37) % 23) as f64 * 0.3 - 4.0).collect();
        let mut a = LogSumExp::default();
        let mut b = LogSumExp::default();
        for (i, &x) in xs.iter().enumerate() {
            if i < 40 {
                a.push(x)
            } else {
                b.push(x)
            }
        }
        a.merge(b);
        assert!((a.value() - log_sum_exp(&xs)).abs() < 1e-13);
    }

    #[test]
    fn walk_visits_lexicographically() {
        let cf = CylinderFunction::product(vec![0.5, 0.25, 0.125]).unwrap();
        let ev = Evaluator::new(&cf);
        let mut seen = Vec::new();
        walk(&ev, ev.root(), 3, |digits, state| {
            let PrefixState::Product { log_sum } = state else { unreachable!() };
            let expected: f64 = digits.iter().map(|&d| [0.5f64, 0.25, 0.125][d as usize].ln()).sum();
            assert!((log_sum - expected).abs() < 1e-14);
            seen.push(digits.to_vec());
        });
        assert_eq!(seen.len(), 27);
        assert!(seen.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let cf = CylinderFunction::product(vec![0.31, 0.47, 0.2]).unwrap();
        let one = with_workers(1, || log_partition_sum_raw(&cf, 0.77, 9, Budget::default()).unwrap());
        let many = with_workers(8, || log_partition_sum_raw(&cf, 0.77, 9, Budget::default()).unwrap());
        assert_eq!(one.to_bits(), many.to_bits());
    }
}

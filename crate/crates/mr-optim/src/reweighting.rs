//! The multiplicative-weights state over training examples.
//!
//! Weights are never materialized as `exp(-eta * cum_loss)`; only cumulative
//! per-example losses are stored and the simplex distribution is produced in
//! log-space. The literal exponentials underflow after a few hundred epochs
//! at realistic losses, the log-space form never does.

use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Vec64};

/// Cumulative per-example losses with the MW step size.
#[derive(Debug, Clone, PartialEq)]
pub struct ReweightState {
    eta: f64,
    cum_loss: Vec64,
    epoch: usize,
}

impl ReweightState {
    /// Fresh state with zero cumulative losses; `normalize` is uniform.
    pub fn new_uniform(n: usize, eta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::parameter("ReweightState: n must be >= 1"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::parameter("ReweightState: eta must be > 0"));
        }
        Ok(ReweightState {
            eta,
            cum_loss: Vec64::zeros(n),
            epoch: 0,
        })
    }

    /// Test-only constructor accepting `eta = 0`, which freezes the
    /// distribution at uniform no matter what is accumulated. Used by the
    /// uniform-equivalence checks; not a supported training configuration.
    pub fn uniform_eta_zero_for_tests(n: usize) -> Self {
        assert!(n > 0, "n must be >= 1");
        ReweightState {
            eta: 0.0,
            cum_loss: Vec64::zeros(n),
            epoch: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.cum_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn cum_loss(&self) -> &Vec64 {
        &self.cum_loss
    }

    /// New state with the latest per-example losses added in.
    pub fn accumulate(&self, losses: &[f64]) -> Result<ReweightState> {
        if losses.len() != self.len() {
            return Err(Error::dimension(format!(
                "accumulate: {} losses for {} examples",
                losses.len(),
                self.len()
            )));
        }
        for (i, &l) in losses.iter().enumerate() {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::numeric(format!(
                    "accumulate: loss[{i}] = {l} (must be finite and >= 0)"
                )));
            }
        }
        let cum = self
            .cum_loss
            .iter()
            .zip(losses)
            .map(|(c, l)| c + l)
            .collect::<Vec<_>>();
        Ok(ReweightState {
            eta: self.eta,
            cum_loss: Vec64::new(cum),
            epoch: self.epoch + 1,
        })
    }

    /// Same cumulative losses under a new step size; the distribution is
    /// re-derived from scratch, which is the only reading consistent with
    /// `w_i = exp(-eta * sum_s l_i(theta_s))`.
    pub fn set_eta(&self, eta: f64) -> Result<ReweightState> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::parameter("set_eta: eta must be > 0"));
        }
        Ok(ReweightState {
            eta,
            cum_loss: self.cum_loss.clone(),
            epoch: self.epoch,
        })
    }

    /// Simplex distribution `p_i = softmax(-eta * cum_loss)_i`.
    ///
    /// Computed with max-subtraction, so the largest weight is exactly 1 and
    /// the result can never underflow to an all-zero vector. When every
    /// cumulative loss is equal the result is exactly `1/n` per entry.
    pub fn normalize(&self) -> SimplexDist {
        let v: Vec<f64> = self.cum_loss.iter().map(|&c| -(self.eta * c)).collect();
        let m = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut w: Vec<f64> = v.iter().map(|&x| (x - m).exp()).collect();
        let sum: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= sum;
        }
        SimplexDist { p: Vec64::new(w) }
    }
}

/// A distribution over examples: nonnegative entries summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexDist {
    p: Vec64,
}

impl SimplexDist {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::parameter("SimplexDist: n must be >= 1"));
        }
        Ok(SimplexDist {
            p: Vec64::from_elem(n, 1.0 / n as f64),
        })
    }

    /// Validates nonnegativity and normalization to 1e-12.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::parameter("SimplexDist: empty"));
        }
        if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::numeric("SimplexDist: entries must be finite and >= 0"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::numeric(format!("SimplexDist: sums to {sum}")));
        }
        Ok(SimplexDist { p: Vec64::new(p) })
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::parameter("SimplexDist: empty"));
        }
        if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::numeric("SimplexDist: weights must be finite and >= 0"));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::numeric("SimplexDist: weights sum to zero"));
        }
        Ok(SimplexDist {
            p: Vec64::new(w.iter().map(|&x| x / sum).collect()),
        })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn max_entry(&self) -> f64 {
        self.p.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    /// Inverse-CDF draw over the stored order.
    pub fn sample_index(&self, rng: &mut SeededRng) -> usize {
        let u = rng.next_f64();
        let mut cum = 0.0;
        for (i, &pi) in self.p.iter().enumerate() {
            cum += pi;
            if u < cum {
                return i;
            }
        }
        self.p.len() - 1
    }

    /// Total probability mass on an index set.
    pub fn mass_of(&self, indices: &[usize]) -> Result<f64> {
        let mut mass = 0.0;
        for &i in indices {
            if i >= self.p.len() {
                return Err(Error::dimension(format!(
                    "mass_of: index {i} out of range for n={}",
                    self.p.len()
                )));
            }
            mass += self.p[i];
        }
        Ok(mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN_2: f64 = std::f64::consts::LN_2;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn init_uniform_cases() {
        let p = ReweightState::new_uniform(4, 0.5).unwrap().normalize();
        assert_eq!(p.as_slice(), &[0.25, 0.25, 0.25, 0.25]);

        let p1 = ReweightState::new_uniform(1, 1.0).unwrap().normalize();
        assert_eq!(p1.as_slice(), &[1.0]);

        let p15 = ReweightState::new_uniform(15, 0.01).unwrap().normalize();
        for &x in p15.as_slice() {
            assert_eq!(x, 1.0 / 15.0);
        }

        assert!(ReweightState::new_uniform(0, 1.0).is_err());
        assert!(ReweightState::new_uniform(3, 0.0).is_err());
        assert!(ReweightState::new_uniform(3, -1.0).is_err());
    }

    #[test]
    fn accumulate_zero_losses_keeps_uniform() {
        let s = ReweightState::new_uniform(3, 1.0).unwrap();
        let s = s.accumulate(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.epoch(), 1);
        assert_eq!(s.normalize().as_slice(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn accumulate_ln2_once_and_twice() {
        let s = ReweightState::new_uniform(2, 1.0).unwrap();
        let s1 = s.accumulate(&[0.0, LN_2]).unwrap();
        let p1 = s1.normalize();
        assert_close(p1.get(0), 2.0 / 3.0, 1e-15);
        assert_close(p1.get(1), 1.0 / 3.0, 1e-15);

        let s2 = s1.accumulate(&[0.0, LN_2]).unwrap();
        let p2 = s2.normalize();
        assert_close(p2.get(0), 0.8, 1e-15);
        assert_close(p2.get(1), 0.2, 1e-15);
    }

    #[test]
    fn accumulate_rejects_bad_losses() {
        let s = ReweightState::new_uniform(2, 1.0).unwrap();
        assert!(matches!(s.accumulate(&[0.1, -0.5]), Err(Error::Numeric(_))));
        assert!(matches!(
            s.accumulate(&[f64::NAN, 0.0]),
            Err(Error::Numeric(_))
        ));
        assert!(s.accumulate(&[0.1]).is_err());
    }

    #[test]
    fn normalize_constant_and_extreme() {
        let s = ReweightState::new_uniform(3, 1.0)
            .unwrap()
            .accumulate(&[7.5, 7.5, 7.5])
            .unwrap();
        assert_eq!(s.normalize().as_slice(), &[1.0 / 3.0; 3]);

        // One entry 1e6 smaller than the rest takes essentially all the mass.
        let s = ReweightState::new_uniform(3, 1.0)
            .unwrap()
            .accumulate(&[0.0, 1e6, 1e6])
            .unwrap();
        let p = s.normalize();
        assert!(p.get(0) > 1.0 - 1e-12);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_logistic_of_loss_gap() {
        // eta = 0.01 and a cumulative gap of 100 is a logit gap of 1.
        let s = ReweightState::new_uniform(2, 0.01)
            .unwrap()
            .accumulate(&[0.0, 100.0])
            .unwrap();
        let p = s.normalize();
        assert_close(p.get(0), 0.7310585786300049, 1e-12);
        assert_close(p.get(1), 0.2689414213699951, 1e-12);
    }

    #[test]
    fn no_underflow_after_a_million_epochs() {
        let mut s = ReweightState::new_uniform(2, 1.0).unwrap();
        for _ in 0..1_000_000 {
            s = s.accumulate(&[0.0, 10.0]).unwrap();
        }
        assert_eq!(s.epoch(), 1_000_000);
        let p = s.normalize();
        assert_eq!(p.get(0), 1.0);
        assert!(p.get(1) >= 0.0);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn set_eta_renormalizes_from_same_cum_loss() {
        let s = ReweightState::new_uniform(2, 0.01)
            .unwrap()
            .accumulate(&[0.0, 100.0])
            .unwrap();
        let hotter = s.set_eta(0.02).unwrap();
        assert_eq!(hotter.cum_loss().as_slice(), s.cum_loss().as_slice());
        assert_eq!(hotter.epoch(), s.epoch());
        // Larger eta concentrates more on the low-loss example.
        assert!(hotter.normalize().get(0) > s.normalize().get(0));
        assert!(s.set_eta(0.0).is_err());
    }

    #[test]
    fn eta_zero_state_is_frozen_uniform() {
        let mut s = ReweightState::uniform_eta_zero_for_tests(3);
        s = s.accumulate(&[5.0, 0.0, 123.4]).unwrap();
        let p = s.normalize();
        for &x in p.as_slice() {
            assert_eq!(x, 1.0 / 3.0);
        }
    }

    #[test]
    fn sample_degenerate_and_uniform_frequencies() {
        let mut rng = SeededRng::new(99);
        let d = SimplexDist::new(vec![1.0, 0.0, 0.0]).unwrap();
        for _ in 0..100 {
            assert_eq!(d.sample_index(&mut rng), 0);
        }

        let u = SimplexDist::uniform(4).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[u.sample_index(&mut rng)] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for &c in &counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 0.25).abs() < 4.0 * sigma, "freq {freq}");
        }
    }

    #[test]
    fn sample_binary_frequencies() {
        let mut rng = SeededRng::new(7);
        let p0 = 0.7310585786300049;
        let d = SimplexDist::new(vec![p0, 1.0 - p0]).unwrap();
        let n = 100_000;
        let mut count0 = 0usize;
        for _ in 0..n {
            if d.sample_index(&mut rng) == 0 {
                count0 += 1;
            }
        }
        let freq = count0 as f64 / n as f64;
        let sigma = (p0 * (1.0 - p0) / n as f64).sqrt();
        assert!((freq - p0).abs() < 4.0 * sigma, "freq {freq}");
    }

    #[test]
    fn mass_of_cases() {
        let d = SimplexDist::uniform(10).unwrap();
        let all: Vec<usize> = (0..10).collect();
        assert_close(d.mass_of(&all).unwrap(), 1.0, 1e-15);
        assert_eq!(d.mass_of(&[]).unwrap(), 0.0);
        // 40% of the indices under uniform weighting carry mass 0.4.
        let four: Vec<usize> = (0..4).collect();
        assert_close(d.mass_of(&four).unwrap(), 0.4, 1e-15);
        assert!(d.mass_of(&[10]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(250))]

        #[test]
        fn shift_invariance(
            seed in 0u64..u64::MAX,
            n in 1usize..12,
            eta in 1e-3f64..2.0,
            shift in 0.0f64..50.0,
        ) {
            let mut rng = SeededRng::new(seed);
            let losses: Vec<f64> = (0..n).map(|_| rng.next_f64() * 100.0).collect();
            let base = ReweightState::new_uniform(n, eta).unwrap()
                .accumulate(&losses).unwrap();
            let shifted_losses: Vec<f64> = losses.iter().map(|l| l + shift).collect();
            let shifted = ReweightState::new_uniform(n, eta).unwrap()
                .accumulate(&shifted_losses).unwrap();
            let p = base.normalize();
            let q = shifted.normalize();
            for i in 0..n {
                prop_assert!((p.get(i) - q.get(i)).abs() < 1e-12);
            }
        }

        #[test]
        fn monotonicity_strict(
            seed in 0u64..u64::MAX,
            n in 2usize..10,
            eta in 1e-3f64..2.0,
        ) {
            let mut rng = SeededRng::new(seed);
            // Well-separated cumulative losses so strictness is meaningful.
            let mut losses: Vec<f64> = (0..n).map(|_| rng.next_f64() * 50.0).collect();
            for (i, l) in losses.iter_mut().enumerate() {
                *l += i as f64 * 1e-3;
            }
            let s = ReweightState::new_uniform(n, eta).unwrap()
                .accumulate(&losses).unwrap();
            let p = s.normalize();
            for i in 0..n {
                for j in 0..n {
                    if losses[i] < losses[j] - 1e-6 {
                        prop_assert!(p.get(i) > p.get(j));
                    }
                }
            }
        }

        #[test]
        fn normalize_sums_to_one(
            seed in 0u64..u64::MAX,
            n in 1usize..20,
            eta in 1e-4f64..5.0,
            rounds in 1usize..5,
        ) {
            let mut rng = SeededRng::new(seed);
            let mut s = ReweightState::new_uniform(n, eta).unwrap();
            for _ in 0..rounds {
                let losses: Vec<f64> = (0..n).map(|_| rng.next_f64() * 30.0).collect();
                s = s.accumulate(&losses).unwrap();
            }
            let p = s.normalize();
            prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn ftrl_consistency(
            seed in 0u64..u64::MAX,
            n in 2usize..12,
            eta in 1e-3f64..2.0,
        ) {
            // The reweighted expectation of the latest losses never exceeds
            // the expectation under the previous distribution.
            let mut rng = SeededRng::new(seed);
            let mut s = ReweightState::new_uniform(n, eta).unwrap();
            let warmup: Vec<f64> = (0..n).map(|_| rng.next_f64() * 10.0).collect();
            s = s.accumulate(&warmup).unwrap();
            let latest: Vec<f64> = (0..n).map(|_| rng.next_f64() * 10.0).collect();
            let before = s.normalize();
            let after = s.accumulate(&latest).unwrap().normalize();
            let e_before: f64 = before.as_slice().iter().zip(&latest).map(|(p, l)| p * l).sum();
            let e_after: f64 = after.as_slice().iter().zip(&latest).map(|(p, l)| p * l).sum();
            prop_assert!(e_after <= e_before + 1e-12);
        }
    }
}

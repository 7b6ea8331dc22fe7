//! Weighted discrete distributions on the line, exact W1 and quantiles.
//!
//! On `R`, the 1-Wasserstein distance is the L1 norm of the CDF difference,
//! so a single merged sweep over the union of atoms computes it exactly in
//! `O(K log K)`.

use crate::error::{Error, Result};

/// Instances larger than this are rejected by [`transport_lp_oracle`].
pub const LP_ORACLE_CAP: usize = 10_000;

/// A probability distribution with finitely many atoms on the real line.
///
/// Atoms are kept sorted; exact duplicates are merged on construction so
/// that `w1(a, b) == 0` iff the two distributions are identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete1D {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl Discrete1D {
    /// Build from parallel atom/weight lists. Weights must be nonnegative
    /// with a positive sum and are normalized to total mass 1; zero-weight
    /// atoms are dropped.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} atoms",
                weights.len(),
                atoms.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (&a, &w) in atoms.iter().zip(&weights) {
            if !a.is_finite() {
                return Err(Error::InvalidWeights(format!("non-finite atom {a}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights(format!("invalid weight {w}")));
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out_atoms = Vec::with_capacity(pairs.len());
        let mut out_weights = Vec::with_capacity(pairs.len());
        let mut i = 0;
        while i < pairs.len() {
            let a = pairs[i].0;
            let mut w = 0.0;
            while i < pairs.len() && pairs[i].0 == a {
                w += pairs[i].1;
                i += 1;
            }
            if w > 0.0 {
                out_atoms.push(a);
                out_weights.push(w / sum);
            }
        }
        if out_atoms.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self {
            atoms: out_atoms,
            weights: out_weights,
        })
    }

    /// Empirical distribution of a sample (uniform weights, duplicates merged).
    pub fn from_uniform(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), vec![1.0; values.len()])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// CDF value `F(t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        let mut c = 0.0;
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            if a > t {
                break;
            }
            c += w;
        }
        c
    }

    /// Breakpoints of the CDF step function as `(atom, F(atom))` pairs.
    pub fn cdf_points(&self) -> Vec<(f64, f64)> {
        let mut c = 0.0;
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&a, &w)| {
                c += w;
                (a, c)
            })
            .collect()
    }

    /// The alpha-quantile `inf { x : F(x) >= 1 - alpha }`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        let target = 1.0 - alpha;
        let mut c = 0.0;
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            c += w;
            if c >= target {
                return Ok(a);
            }
        }
        // Rounding shortfall: the true total mass is 1 >= target.
        Ok(*self.atoms.last().unwrap())
    }

    /// Weighted mean of the atoms.
    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a * w)
            .sum()
    }

    /// Distribution of `X + t`.
    pub fn translate(&self, t: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| a + t).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Distribution of `lambda * X` for `lambda > 0`.
    pub fn scale(&self, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "scale factor {lambda} must be positive"
            )));
        }
        Ok(Self {
            atoms: self.atoms.iter().map(|a| a * lambda).collect(),
            weights: self.weights.clone(),
        })
    }

    fn is_plain_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| w == u)
    }
}

/// Exact 1-Wasserstein distance between two discrete distributions.
///
/// Sweeps the union of atoms; between consecutive breakpoints the CDF
/// difference is constant. When both inputs are uniform with the same
/// number of atoms this reduces to the mean absolute difference of the
/// sorted atom lists, which is dispatched as a fast path.
pub fn w1(a: &Discrete1D, b: &Discrete1D) -> f64 {
    if a.len() == b.len() && a.is_plain_uniform() && b.is_plain_uniform() {
        return w1_uniform_sorted(&a.atoms, &b.atoms);
    }
    w1_sweep(a, b)
}

/// CDF-sweep route, exposed for oracle tests against the fast path.
pub fn w1_sweep(a: &Discrete1D, b: &Discrete1D) -> f64 {
    let (aa, wa) = (&a.atoms, &a.weights);
    let (ba, wb) = (&b.atoms, &b.weights);
    let mut i = 0;
    let mut j = 0;
    let mut fa: f64 = 0.0;
    let mut fb: f64 = 0.0;
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    while i < aa.len() || j < ba.len() {
        let t = match (aa.get(i), ba.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            total += (fa - fb).abs() * (t - p);
        }
        while i < aa.len() && aa[i] == t {
            fa += wa[i];
            i += 1;
        }
        while j < ba.len() && ba[j] == t {
            fb += wb[j];
            j += 1;
        }
        prev = Some(t);
    }
    total
}

/// Mean absolute difference of two equally sized sorted samples.
pub fn w1_uniform_sorted(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / n as f64
}

/// Brute-force transport cost by the north-west-corner rule on sorted atoms
/// (optimal in one dimension). An independent code path from [`w1`], kept
/// as a reference oracle; instances with `K_a * K_b > LP_ORACLE_CAP` are
/// rejected.
pub fn transport_lp_oracle(a: &Discrete1D, b: &Discrete1D) -> Result<f64> {
    let size = a.len() * b.len();
    if size > LP_ORACLE_CAP {
        return Err(Error::SizeCapExceeded {
            size,
            cap: LP_ORACLE_CAP,
        });
    }
    let ka = a.len();
    let kb = b.len();
    let mut i = 0;
    let mut j = 0;
    let mut ra = a.weights[0];
    let mut rb = b.weights[0];
    let mut cost = 0.0;
    while i < ka && j < kb {
        let mass = ra.min(rb);
        cost += mass * (a.atoms[i] - b.atoms[j]).abs();
        ra -= mass;
        rb -= mass;
        if ra <= 0.0 {
            i += 1;
            if i < ka {
                ra = a.weights[i];
            }
        }
        if rb <= 0.0 {
            j += 1;
            if j < kb {
                rb = b.weights[j];
            }
        }
    }
    Ok(cost)
}

/// Exact sup-norm gap between the two CDFs (a two-sample KS statistic for
/// weighted distributions).
pub fn sup_cdf_gap(a: &Discrete1D, b: &Discrete1D) -> f64 {
    let mut i = 0;
    let mut j = 0;
    let mut fa = 0.0;
    let mut fb = 0.0;
    let mut sup: f64 = 0.0;
    while i < a.atoms.len() || j < b.atoms.len() {
        let t = match (a.atoms.get(i), b.atoms.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.atoms.len() && a.atoms[i] == t {
            fa += a.weights[i];
            i += 1;
        }
        while j < b.atoms.len() && b.atoms[j] == t {
            fb += b.weights[j];
            j += 1;
        }
        sup = sup.max((fa - fb).abs());
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn uniform(atoms: &[f64]) -> Discrete1D {
        Discrete1D::from_uniform(atoms).unwrap()
    }

    #[test]
    fn w1_hand_values() {
        let a = uniform(&[0.0, 1.0]);
        assert_eq!(w1(&a, &a), 0.0);

        let b = uniform(&[0.0, 2.0]);
        assert_eq!(w1(&a, &b), 0.5);

        let c = Discrete1D::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let d = Discrete1D::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(w1(&c, &d), 1.0);
    }

    #[test]
    fn quantile_hand_values() {
        let a = uniform(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.quantile(0.25).unwrap(), 3.0);

        let single = Discrete1D::new(vec![5.0], vec![1.0]).unwrap();
        for alpha in [0.01, 0.5, 0.99] {
            assert_eq!(single.quantile(alpha).unwrap(), 5.0);
        }

        let two = uniform(&[1.0, 2.0]);
        assert_eq!(two.quantile(0.5).unwrap(), 1.0);

        assert!(matches!(
            two.quantile(0.0),
            Err(Error::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            two.quantile(1.0),
            Err(Error::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn oracle_hand_values() {
        let a = uniform(&[0.0, 1.0]);
        let b = uniform(&[0.0, 2.0]);
        assert_eq!(transport_lp_oracle(&a, &a).unwrap(), 0.0);
        assert_eq!(transport_lp_oracle(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let atoms: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let a = uniform(&atoms);
        assert!(matches!(
            transport_lp_oracle(&a, &a),
            Err(Error::SizeCapExceeded { .. })
        ));
    }

    #[test]
    fn duplicates_merge_and_zero_axiom() {
        let a = Discrete1D::new(vec![1.0, 1.0, 2.0], vec![0.25, 0.25, 0.5]).unwrap();
        let b = Discrete1D::new(vec![2.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(w1(&a, &b), 0.0);
        assert_eq!(a, b);
    }

    fn random_weighted(rng: &mut StdRng, max_k: usize) -> Discrete1D {
        let k = rng.random_range(1..=max_k);
        let atoms: Vec<f64> = (0..k).map(|_| rng.random_range(-10.0..10.0)).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        Discrete1D::new(atoms, weights).unwrap()
    }

    #[test]
    fn sweep_matches_oracle_on_random_pairs() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let a = random_weighted(&mut rng, 20);
            let b = random_weighted(&mut rng, 20);
            let fast = w1(&a, &b);
            let oracle = transport_lp_oracle(&a, &b).unwrap();
            assert!(
                (fast - oracle).abs() < 1e-10,
                "w1 {fast} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn fast_path_agrees_with_sweep() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..300 {
            let k = rng.random_range(1..40usize);
            let xs: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
            let ys: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
            let a = uniform(&xs);
            let b = uniform(&ys);
            // Distinct draws a.s., so both stay plain uniform and w1 takes
            // the sorted-pairs route; the sweep is algebraically identical.
            let fast = w1(&a, &b);
            let sweep = w1_sweep(&a, &b);
            assert!(
                (fast - sweep).abs() <= 1e-13 * (1.0 + fast.abs()),
                "fast {fast} vs sweep {sweep}"
            );
        }
    }

    #[test]
    fn translation_exact_on_integer_grid() {
        let a = uniform(&[0.0, 3.0, 7.0]);
        let b = uniform(&[1.0, 4.0, 9.0]);
        let base = w1(&a, &b);
        for t in [-5.0, 2.0, 128.0] {
            assert_eq!(w1(&a.translate(t), &b.translate(t)), base);
        }
    }

    proptest! {
        #[test]
        fn metric_axioms(
            xs in prop::collection::vec(-10.0f64..10.0, 1..12),
            ys in prop::collection::vec(-10.0f64..10.0, 1..12),
            zs in prop::collection::vec(-10.0f64..10.0, 1..12),
        ) {
            let a = uniform(&xs);
            let b = uniform(&ys);
            let c = uniform(&zs);
            prop_assert_eq!(w1(&a, &b), w1(&b, &a));
            prop_assert_eq!(w1(&a, &a), 0.0);
            prop_assert!(w1(&a, &b) >= 0.0);
            prop_assert!(w1(&a, &c) <= w1(&a, &b) + w1(&b, &c) + 1e-12);
        }

        #[test]
        fn translation_and_scaling(
            xs in prop::collection::vec(-10.0f64..10.0, 1..12),
            ys in prop::collection::vec(-10.0f64..10.0, 1..12),
            t in -50.0f64..50.0,
            lambda in 0.1f64..8.0,
        ) {
            let a = uniform(&xs);
            let b = uniform(&ys);
            let base = w1(&a, &b);
            let shifted = w1(&a.translate(t), &b.translate(t));
            prop_assert!((shifted - base).abs() <= 1e-12 * (1.0 + base + t.abs()));
            let scaled = w1(&a.scale(lambda).unwrap(), &b.scale(lambda).unwrap());
            prop_assert!((scaled - lambda * base).abs() <= 1e-12 * (1.0 + lambda * base));
        }

        #[test]
        fn quantile_nonincreasing_in_alpha(
            xs in prop::collection::vec(-10.0f64..10.0, 1..20),
            a1 in 0.01f64..0.99,
            a2 in 0.01f64..0.99,
        ) {
            let d = uniform(&xs);
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assert!(d.quantile(lo).unwrap() >= d.quantile(hi).unwrap());
        }

        #[test]
        fn sweep_vs_oracle_weighted(
            atoms_a in prop::collection::vec(-10.0f64..10.0, 1..15),
            raw_wa in prop::collection::vec(0.05f64..1.0, 15),
            atoms_b in prop::collection::vec(-10.0f64..10.0, 1..15),
            raw_wb in prop::collection::vec(0.05f64..1.0, 15),
        ) {
            let a = Discrete1D::new(atoms_a.clone(), raw_wa[..atoms_a.len()].to_vec()).unwrap();
            let b = Discrete1D::new(atoms_b.clone(), raw_wb[..atoms_b.len()].to_vec()).unwrap();
            let fast = w1(&a, &b);
            let oracle = transport_lp_oracle(&a, &b).unwrap();
            prop_assert!((fast - oracle).abs() < 1e-10);
        }
    }
}

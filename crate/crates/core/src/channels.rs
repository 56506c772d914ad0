//! Discrete memoryless channels, input priors and product extensions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::sample_index;
use crate::words::{check_word, Word};

/// Rows closer than this in max-norm count as identical.
const DISTINCT_ROWS_TOL: f64 = 1e-12;

/// Probability vector over a finite alphabet `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Real")]
pub struct Distribution<T: Real = f64> {
    probs: Vec<T>,
}

impl<T: Real> Distribution<T> {
    /// Validates `probs`: nonnegative, summing to one within tolerance.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (index, &p) in probs.iter().enumerate() {
            if !(p >= T::zero()) || !p.is_finite() {
                return Err(Error::NegativeProbability { index, value: p.as_f64() });
            }
        }
        let sum: T = probs.iter().copied().sum();
        if (sum.as_f64() - 1.0).abs() > T::SUM_TOL {
            return Err(Error::NotNormalized(sum.as_f64()));
        }
        // stored as given so that serialization round-trips exactly
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        let sum: T = weights.iter().copied().sum();
        if !(sum > T::zero()) {
            return Err(Error::NotNormalized(sum.as_f64()));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform distribution over an empty alphabet");
        Self { probs: vec![T::one() / T::from_count(k); k] }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        assert!(at < k, "point mass outside the alphabet");
        let mut probs = vec![T::zero(); k];
        probs[at] = T::one();
        Self { probs }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> T {
        self.probs[i]
    }

    /// `(1 - lambda) * self + lambda * other`.
    pub fn mix(&self, other: &Self, lambda: T) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(&a, &b)| (T::one() - lambda) * a + lambda * b)
            .collect();
        Self::new(probs)
    }

    /// Indices with positive mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + Clone + '_ {
        self.probs.iter().enumerate().filter(|(_, p)| **p > T::zero()).map(|(i, _)| i)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probs, rng)
    }

    pub fn cast<U: Real>(&self) -> Distribution<U> {
        Distribution { probs: self.probs.iter().map(|p| U::lit(p.as_f64())).collect() }
    }
}

impl<T: Real> TryFrom<Vec<T>> for Distribution<T> {
    type Error = Error;
    fn try_from(probs: Vec<T>) -> Result<Self> {
        Self::new(probs)
    }
}

impl<T: Real> From<Distribution<T>> for Vec<T> {
    fn from(d: Distribution<T>) -> Vec<T> {
        d.probs
    }
}

/// Stochastic matrix `W(y|x)`; rows are inputs, columns outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T: Real = f64> {
    rows: Vec<Vec<T>>,
    log2_rows: Vec<Vec<T>>,
    output_size: usize,
}

impl<T: Real> Channel<T> {
    /// Validated channel with pairwise distinct rows.
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let ch = Self::new_degenerate(rows)?;
        for a in 0..ch.rows.len() {
            for b in a + 1..ch.rows.len() {
                let dist = ch.rows[a]
                    .iter()
                    .zip(&ch.rows[b])
                    .map(|(p, q)| (p.as_f64() - q.as_f64()).abs())
                    .fold(0.0, f64::max);
                if dist <= DISTINCT_ROWS_TOL {
                    return Err(Error::DuplicateRows { first: a, second: b });
                }
            }
        }
        Ok(ch)
    }

    /// Like [`Channel::new`] but accepts repeated rows (useless channels such
    /// as BSC(1/2)). Quantities that need distinct rows may then be infinite.
    pub fn new_degenerate(mut rows: Vec<Vec<T>>) -> Result<Self> {
        let output_size = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || output_size == 0 {
            return Err(Error::EmptyChannel);
        }
        for (row, r) in rows.iter_mut().enumerate() {
            if r.len() != output_size {
                return Err(Error::RaggedRows { row, len: r.len(), expected: output_size });
            }
            for (col, &v) in r.iter().enumerate() {
                if !(v >= T::zero()) || !v.is_finite() {
                    return Err(Error::NegativeEntry { row, col, value: v.as_f64() });
                }
            }
            let sum: T = r.iter().copied().sum();
            if (sum.as_f64() - 1.0).abs() > T::SUM_TOL {
                return Err(Error::RowSumInvalid { row, sum: sum.as_f64() });
            }
            if sum != T::one() {
                for v in r.iter_mut() {
                    *v = *v / sum;
                }
            }
        }
        let log2_rows = rows
            .iter()
            .map(|r| r.iter().map(|&v| v.log2()).collect())
            .collect();
        Ok(Self { rows, log2_rows, output_size })
    }

    pub fn bsc(p: T) -> Result<Self> {
        Self::new(vec![vec![T::one() - p, p], vec![p, T::one() - p]])
    }

    /// `Z(p)`: input 0 is received perfectly, input 1 flips to 0 with probability `p`.
    pub fn z_channel(p: T) -> Result<Self> {
        Self::new(vec![vec![T::one(), T::zero()], vec![p, T::one() - p]])
    }

    pub fn noiseless(k: usize) -> Result<Self> {
        Self::new(
            (0..k)
                .map(|x| (0..k).map(|y| if x == y { T::one() } else { T::zero() }).collect())
                .collect(),
        )
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.rows[x]
    }

    pub fn prob(&self, x: usize, y: usize) -> T {
        self.rows[x][y]
    }

    pub fn log2_row(&self, x: usize) -> &[T] {
        &self.log2_rows[x]
    }

    pub fn output_dist(&self, p: &Distribution<T>) -> Result<Distribution<T>> {
        self.check_prior(p)?;
        Ok(Distribution { probs: self.output_probs(p.probs()) })
    }

    pub(crate) fn check_prior(&self, p: &Distribution<T>) -> Result<()> {
        if p.len() != self.input_size() {
            return Err(Error::DimensionMismatch { expected: self.input_size(), got: p.len() });
        }
        Ok(())
    }

    /// `W_P` for an unvalidated weight vector of the right length.
    pub(crate) fn output_probs(&self, p: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.output_size];
        for (row, &px) in self.rows.iter().zip(p) {
            if px > T::zero() {
                for (o, &w) in out.iter_mut().zip(row) {
                    *o = *o + px * w;
                }
            }
        }
        out
    }

    /// `W^n(y|x) = Π W(y_i|x_i)`.
    pub fn product_prob(&self, x: &[usize], y: &[usize]) -> Result<T> {
        Ok(self.log2_product_prob(x, y)?.exp2())
    }

    pub fn log2_product_prob(&self, x: &[usize], y: &[usize]) -> Result<T> {
        check_word(x, self.input_size(), x.len())?;
        check_word(y, self.output_size, x.len())?;
        Ok(self.log2_product_prob_unchecked(x, y))
    }

    pub(crate) fn log2_product_prob_unchecked(&self, x: &[usize], y: &[usize]) -> T {
        x.iter()
            .zip(y)
            .fold(T::zero(), |acc, (&a, &b)| acc + self.log2_rows[a][b])
    }

    /// Output law of `W^n(.|x)` over all `|Y|^n` words in index order.
    pub fn block_output_dist(&self, x: &[usize]) -> Vec<T> {
        let mut dist = vec![T::one()];
        for &xi in x {
            let row = &self.rows[xi];
            let mut next = Vec::with_capacity(dist.len() * self.output_size);
            for &d in &dist {
                next.extend(row.iter().map(|&w| d * w));
            }
            dist = next;
        }
        dist
    }

    /// Draws `Y^n ~ W^n(.|x)`.
    pub fn sample_output<R: Rng + ?Sized>(&self, x: &[usize], rng: &mut R) -> Word {
        x.iter().map(|&xi| sample_index(&self.rows[xi], rng)).collect()
    }

    pub fn product(&self, n: usize) -> ProductChannelView<'_, T> {
        ProductChannelView { base: self, n }
    }

    pub fn cast<U: Real>(&self) -> Channel<U> {
        Channel::new_degenerate(
            self.rows
                .iter()
                .map(|r| r.iter().map(|v| U::lit(v.as_f64())).collect())
                .collect(),
        )
        .expect("casting a valid channel")
    }
}

/// `W^n` evaluated on demand; never materialized.
#[derive(Debug, Clone, Copy)]
pub struct ProductChannelView<'a, T: Real = f64> {
    base: &'a Channel<T>,
    n: usize,
}

impl<'a, T: Real> ProductChannelView<'a, T> {
    pub fn base(&self) -> &'a Channel<T> {
        self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self, x: &[usize], y: &[usize]) -> Result<T> {
        self.check(x)?;
        self.base.product_prob(x, y)
    }

    pub fn log2_prob(&self, x: &[usize], y: &[usize]) -> Result<T> {
        self.check(x)?;
        self.base.log2_product_prob(x, y)
    }

    fn check(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{advance, word_from_index};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn bsc01() -> Channel {
        Channel::bsc(0.1).unwrap()
    }

    #[test]
    fn make_channel_validation() {
        assert!(Channel::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).is_ok());
        assert!(matches!(
            Channel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            Err(Error::DuplicateRows { first: 0, second: 1 })
        ));
        assert!(matches!(
            Channel::new(vec![vec![0.9, 0.2], vec![0.1, 0.9]]),
            Err(Error::RowSumInvalid { row: 0, .. })
        ));
        assert!(matches!(
            Channel::new(vec![vec![1.1, -0.1], vec![0.1, 0.9]]),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            Channel::<f64>::new(vec![vec![1.0], vec![0.5, 0.5]]),
            Err(Error::RaggedRows { row: 1, .. })
        ));
        assert!(matches!(Channel::<f64>::new(vec![]), Err(Error::EmptyChannel)));
        assert!(Channel::new_degenerate(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).is_ok());
    }

    #[test]
    fn near_one_rows_are_renormalized() {
        let ch = Channel::new(vec![vec![0.9 + 5e-10, 0.1], vec![0.1, 0.9]]).unwrap();
        assert_abs_diff_eq!(ch.row(0).iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn output_dist_examples() {
        let ch = bsc01();
        let u = ch.output_dist(&Distribution::uniform(2)).unwrap();
        assert_abs_diff_eq!(u.get(0), 0.5, epsilon = 1e-15);
        let pm = ch.output_dist(&Distribution::point_mass(2, 0)).unwrap();
        assert_eq!(pm.probs(), &[0.9, 0.1]);
        let ch = Channel::new(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let o = ch.output_dist(&Distribution::uniform(2)).unwrap();
        assert_abs_diff_eq!(o.get(0), 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(o.get(1), 0.45, epsilon = 1e-12);
        assert!(matches!(
            ch.output_dist(&Distribution::uniform(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn product_prob_examples() {
        let ch = bsc01();
        assert_abs_diff_eq!(ch.product_prob(&[1], &[0]).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(ch.product_prob(&[0, 0], &[0, 1]).unwrap(), 0.09, epsilon = 1e-12);
        assert_abs_diff_eq!(
            ch.product_prob(&[0, 0, 0], &[1, 1, 1]).unwrap(),
            0.001,
            epsilon = 1e-12
        );
        assert!(matches!(
            ch.product_prob(&[0, 0], &[0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            ch.product_prob(&[0, 2], &[0, 0]),
            Err(Error::SymbolOutOfRange { symbol: 2, .. })
        ));
        assert_eq!(ch.product_prob(&[0], &[1]).unwrap(), ch.product(1).prob(&[0], &[1]).unwrap());
    }

    #[test]
    fn distribution_validation() {
        assert!(matches!(Distribution::<f64>::new(vec![]), Err(Error::EmptyDistribution)));
        assert!(matches!(
            Distribution::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            Distribution::new(vec![1.5, -0.5]),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
        let d: Distribution = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(serde_json::to_string(&d).unwrap(), "[0.25,0.75]");
        assert!(serde_json::from_str::<Distribution>("[0.2,0.2]").is_err());
    }

    #[test]
    fn f32_channel() {
        let ch = Channel::<f32>::bsc(0.1).unwrap();
        let p = ch.product_prob(&[0, 0], &[0, 1]).unwrap();
        assert!((p - 0.09).abs() < 1e-6);
    }

    fn channel_strategy() -> impl Strategy<Value = Channel> {
        (2usize..4, 2usize..4).prop_flat_map(|(nx, ny)| {
            proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, ny), nx).prop_filter_map(
                "distinct rows",
                |rows| {
                    let rows = rows
                        .into_iter()
                        .map(|r| {
                            let s: f64 = r.iter().sum();
                            r.into_iter().map(|v| v / s).collect()
                        })
                        .collect();
                    Channel::new(rows).ok()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn output_dist_is_distribution(ch in channel_strategy(), w in proptest::collection::vec(0.0f64..1.0, 4)) {
            let weights: Vec<f64> = w[..ch.input_size()].iter().map(|v| v + 1e-3).collect();
            let p = Distribution::from_weights(weights).unwrap();
            let q = ch.output_dist(&p).unwrap();
            prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(q.probs().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn product_prob_sums_to_one(ch in channel_strategy(), n in 1usize..6, xi in 0u64..1000) {
            let nx = ch.input_size();
            let x = word_from_index(xi % (nx as u64).pow(n as u32), nx, n);
            let mut y = vec![0; n];
            let mut total = 0.0;
            loop {
                total += ch.product_prob(&x, &y).unwrap();
                if advance(&mut y, ch.output_size()).is_none() { break; }
            }
            prop_assert!((total - 1.0).abs() < 1e-9);
            let kron: f64 = ch.block_output_dist(&x).iter().sum();
            prop_assert!((kron - 1.0).abs() < 1e-9);
        }

        #[test]
        fn product_prob_splits(ch in channel_strategy(), a in 1usize..4, b in 1usize..4, seed in 0u64..1000) {
            use crate::rng::rng_from_seed;
            let mut rng = rng_from_seed(seed);
            let x: Vec<usize> = (0..a + b).map(|_| rng.gen_range(0..ch.input_size())).collect();
            let y: Vec<usize> = (0..a + b).map(|_| rng.gen_range(0..ch.output_size())).collect();
            let whole = ch.product_prob(&x, &y).unwrap();
            let split = ch.product_prob(&x[..a], &y[..a]).unwrap() * ch.product_prob(&x[a..], &y[a..]).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12 * whole.max(1e-300));
        }
    }
}

//! Single-letter and block information quantities, all in bits.

use serde::Serialize;

use crate::channels::{Channel, Distribution};
use crate::error::{Error, Result};
use crate::real::{log2_sum_exp2, xlog2x, Real};
use crate::words::{advance, check_word};

pub fn entropy<T: Real>(p: &Distribution<T>) -> T {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of<T: Real>(p: &[T]) -> T {
    -p.iter().map(|&v| xlog2x(v)).sum::<T>()
}

/// `h(p) = -p log p - (1-p) log (1-p)`.
pub fn binary_entropy<T: Real>(p: T) -> T {
    -(xlog2x(p) + xlog2x(T::one() - p))
}

/// `D(p||q)`; `+inf` when `p` is not absolutely continuous w.r.t. `q`.
pub fn divergence<T: Real>(p: &[T], q: &[T]) -> T {
    let mut d = T::zero();
    for (&a, &b) in p.iter().zip(q) {
        if a > T::zero() {
            if b <= T::zero() {
                return T::infinity();
            }
            d = d + a * (a.log2() - b.log2());
        }
    }
    // rounding can leave a tiny negative value for p == q
    d.max(T::zero())
}

/// A channel together with an input prior, with the row-vs-row and
/// row-vs-output divergences precomputed.
#[derive(Debug, Clone)]
pub struct InfoContext<T: Real = f64> {
    channel: Channel<T>,
    prior: Distribution<T>,
    output: Vec<T>,
    log2_output: Vec<T>,
    /// `D(W_x || W_P)`.
    d_out: Vec<T>,
    /// `D(W_x || W_x')`, row-major.
    d_rows: Vec<T>,
}

impl<T: Real> InfoContext<T> {
    pub fn new(channel: Channel<T>, prior: Distribution<T>) -> Result<Self> {
        channel.check_prior(&prior)?;
        let output = channel.output_probs(prior.probs());
        let log2_output = output.iter().map(|v| v.log2()).collect();
        let k = channel.input_size();
        let d_out = (0..k).map(|x| divergence(channel.row(x), &output)).collect();
        let mut d_rows = Vec::with_capacity(k * k);
        for x in 0..k {
            for xp in 0..k {
                d_rows.push(if x == xp {
                    T::zero()
                } else {
                    divergence(channel.row(x), channel.row(xp))
                });
            }
        }
        Ok(Self { channel, prior, output, log2_output, d_out, d_rows })
    }

    pub fn channel(&self) -> &Channel<T> {
        &self.channel
    }

    pub fn prior(&self) -> &Distribution<T> {
        &self.prior
    }

    pub fn input_size(&self) -> usize {
        self.channel.input_size()
    }

    /// `W_P`.
    pub fn output(&self) -> &[T] {
        &self.output
    }

    pub(crate) fn log2_output(&self) -> &[T] {
        &self.log2_output
    }

    /// `D(W_x || W_P)`.
    pub fn divergence_to_output(&self, x: usize) -> T {
        self.d_out[x]
    }

    /// `D(W_x || W_x')`.
    pub fn row_divergence(&self, x: usize, x_prime: usize) -> T {
        self.d_rows[x * self.input_size() + x_prime]
    }

    pub fn entropy(&self) -> T {
        entropy(&self.prior)
    }

    /// `I(P,W) = Σ_x P(x) D(W_x || W_P)`.
    pub fn mutual_information(&self) -> T {
        self.prior
            .support()
            .map(|x| self.prior.get(x) * self.d_out[x])
            .sum()
    }

    /// `H(X|Y) = H(P) - I(P,W)`.
    pub fn conditional_entropy(&self) -> T {
        (self.entropy() - self.mutual_information()).max(T::zero())
    }

    /// `F(x,x'|P) = D(W_x||W_P) - D(W_x||W_x')`.
    ///
    /// Returns `-inf` if `W_x` puts mass where `W_x'` has none, and `+inf`
    /// if only the support condition against `W_P` fails.
    pub fn f(&self, x: usize, x_prime: usize) -> T {
        let cross = self.row_divergence(x, x_prime);
        if cross.is_infinite() {
            return T::neg_infinity();
        }
        self.d_out[x] - cross
    }

    /// `F(x,x'|P)` computed as `E_x[log W_x'(Y) - log W_P(Y)]`.
    pub fn f_expectation(&self, x: usize, x_prime: usize) -> T {
        let row = self.channel.row(x);
        let lp = self.channel.log2_row(x_prime);
        let mut acc = T::zero();
        let mut pos_inf = false;
        for y in 0..row.len() {
            if row[y] > T::zero() {
                if lp[y] == T::neg_infinity() {
                    return T::neg_infinity();
                }
                if self.log2_output[y] == T::neg_infinity() {
                    pos_inf = true;
                    continue;
                }
                acc = acc + row[y] * (lp[y] - self.log2_output[y]);
            }
        }
        if pos_inf {
            T::infinity()
        } else {
            acc
        }
    }

    /// `F^n(x^n, x'^n|P) = Σ_i F(x_i, x'_i|P)`.
    pub fn f_block(&self, x: &[usize], x_prime: &[usize]) -> Result<T> {
        check_word(x, self.input_size(), x.len())?;
        check_word(x_prime, self.input_size(), x.len())?;
        Ok(x.iter().zip(x_prime).map(|(&a, &b)| self.f(a, b)).sum())
    }

    /// `ζ1(P) = min_{x≠x'} F(x,x|P) - F(x',x|P)`.
    pub fn zeta1(&self) -> T {
        let k = self.input_size();
        let mut best = T::infinity();
        for x in 0..k {
            for xp in (0..k).filter(|&xp| xp != x) {
                best = best.min(self.f(x, x) - self.f(xp, x));
            }
        }
        best
    }

    /// `ζ2(P) = max_{x≠x'} max_{x''} F(x,x''|P) - F(x',x''|P)`.
    pub fn zeta2(&self) -> T {
        let k = self.input_size();
        let mut best = T::neg_infinity();
        for x in 0..k {
            for xp in (0..k).filter(|&xp| xp != x) {
                for xpp in 0..k {
                    best = best.max(self.f(x, xpp) - self.f(xp, xpp));
                }
            }
        }
        best
    }

    /// `Var_x[log W_x'(Y) - log W_P(Y)]`.
    pub fn log_ratio_variance(&self, x: usize, x_prime: usize) -> Result<T> {
        let row = self.channel.row(x);
        let lp = self.channel.log2_row(x_prime);
        let mut mean = T::zero();
        let mut second = T::zero();
        for y in 0..row.len() {
            if row[y] > T::zero() {
                let v = lp[y] - self.log2_output[y];
                if !v.is_finite() {
                    return Err(Error::InfiniteVariance { x, x_prime });
                }
                mean = mean + row[y] * v;
                second = second + row[y] * v * v;
            }
        }
        Ok((second - mean * mean).max(T::zero()))
    }

    /// `V(W) = max_{x,x'} Var_x[log W_x'(Y) - log W_P(Y)]`.
    pub fn v_max(&self) -> Result<T> {
        let k = self.input_size();
        let mut best = T::zero();
        for x in 0..k {
            for xp in 0..k {
                best = best.max(self.log_ratio_variance(x, xp)?);
            }
        }
        Ok(best)
    }

    /// `G(s,x|P) = log2 Σ_x' P(x') 2^{s F(x,x'|P)}`.
    pub fn g_value(&self, s: T, x: usize) -> T {
        log2_sum_exp2(
            self.prior
                .support()
                .map(|xp| self.prior.get(xp).log2() + s * self.f(x, xp)),
        )
    }

    /// `G(s|P) = Σ_x P(x) G(s,x|P)`.
    pub fn g_avg(&self, s: T) -> T {
        self.prior
            .support()
            .map(|x| self.prior.get(x) * self.g_value(s, x))
            .sum()
    }

    pub fn g_block(&self, s: T, x: &[usize]) -> Result<T> {
        check_word(x, self.input_size(), x.len())?;
        Ok(x.iter().map(|&xi| self.g_value(s, xi)).sum())
    }

    pub fn g_curve(&self, s_grid: &[T]) -> GCurve<T> {
        GCurve {
            s_grid: s_grid.to_vec(),
            values: s_grid.iter().map(|&s| self.g_avg(s)).collect(),
        }
    }

    /// `s I(P,W) - G(s|P) - H(P)`, evaluated as
    /// `-Σ_x P(x) log2(1 + Σ_{x'≠x} P(x')/P(x) 2^{-s D(W_x||W_x')})`,
    /// which avoids cancelling large terms when `s` is large.
    pub fn lemma10_margin(&self, s: T) -> T {
        let mut acc = T::zero();
        for x in self.prior.support() {
            let px = self.prior.get(x);
            let lx = px.log2();
            let tail = log2_sum_exp2(
                self.prior
                    .support()
                    .filter(|&xp| xp != x)
                    .map(|xp| self.prior.get(xp).log2() - lx - s * self.row_divergence(x, xp)),
            );
            if tail > T::neg_infinity() {
                let t = tail.exp2();
                acc = acc + px * t.ln_1p() / T::LN_2();
            }
        }
        -acc
    }

    /// `-R1 + s R - G(s|P)` with `R = I(P,W)`, computed as
    /// `(H(P) - R1) + lemma10_margin(s)`.
    pub fn lemma10_exponent(&self, r1: T, s: T) -> T {
        (self.entropy() - r1) + self.lemma10_margin(s)
    }
}

/// `G(s|P)` sampled on a grid of positive `s`.
#[derive(Debug, Clone, Serialize)]
pub struct GCurve<T: Real = f64> {
    pub s_grid: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> GCurve<T> {
    /// Smallest normalized second difference (divided differences on a
    /// possibly non-uniform grid); nonnegative for a convex curve.
    pub fn min_second_difference(&self) -> T {
        let s = &self.s_grid;
        let g = &self.values;
        (1..s.len().saturating_sub(1))
            .map(|i| {
                let left = (g[i] - g[i - 1]) / (s[i] - s[i - 1]);
                let right = (g[i + 1] - g[i]) / (s[i + 1] - s[i]);
                right - left
            })
            .fold(T::infinity(), T::min)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult<T: Real = f64> {
    pub capacity: T,
    pub prior: Distribution<T>,
    pub iterations: usize,
    /// Final gap between the Blahut-Arimoto upper bound and `I(prior, W)`.
    pub gap: T,
}

const CAPACITY_MAX_ITER: usize = 100_000;

/// `(D(W_x||W_P))_x` and `I(P,W)`.
fn divergences_and_info<T: Real>(w: &Channel<T>, p: &[T]) -> (Vec<T>, T) {
    let q = w.output_probs(p);
    let d: Vec<T> = (0..w.input_size()).map(|x| divergence(w.row(x), &q)).collect();
    let info = p
        .iter()
        .zip(&d)
        .filter(|(px, _)| **px > T::zero())
        .map(|(&px, &dx)| px * dx)
        .sum();
    (d, info)
}

/// `p(x) 2^{β (D_x - max D)}`, normalized.
fn tilt<T: Real>(p: &[T], d: &[T], dmax: T, beta: T) -> Vec<T> {
    let weights: Vec<T> = p.iter().zip(d).map(|(&px, &dx)| px * (beta * (dx - dmax)).exp2()).collect();
    let z: T = weights.iter().copied().sum();
    weights.into_iter().map(|v| v / z).collect()
}

const MAX_TILT: f64 = 1048576.0;

/// Channel capacity by Blahut-Arimoto from the uniform prior.
///
/// The update exponent is over-relaxed: it doubles after every step that
/// does not decrease `I(P,W)` and falls back to the plain update otherwise.
/// Near-duplicate rows make the plain iteration crawl; the tilt keeps them cheap.
///
/// Stops when `max_x D(W_x||W_P) - I(P,W) <= tol` or the relative change of
/// `I` over a plain step drops below `1e-12`.
pub fn capacity<T: Real>(w: &Channel<T>, tol: T) -> Result<CapacityResult<T>> {
    let k = w.input_size();
    let mut p = vec![T::one() / T::from_count(k); k];
    let rel_stop = T::lit(1e-12);
    let (mut d, mut info) = divergences_and_info(w, &p);
    let mut beta = T::one();
    let mut gap = T::infinity();
    for iter in 0..CAPACITY_MAX_ITER {
        let upper = d.iter().copied().fold(T::neg_infinity(), T::max);
        gap = upper - info;
        if gap <= tol {
            return Ok(CapacityResult {
                capacity: info.max(T::zero()),
                prior: Distribution::from_weights(p)?,
                iterations: iter,
                gap,
            });
        }
        if beta > T::one() {
            let cand = tilt(&p, &d, upper, beta);
            let (cd, ci) = divergences_and_info(w, &cand);
            if ci >= info {
                p = cand;
                d = cd;
                info = ci;
                beta = (beta + beta).min(T::lit(MAX_TILT));
                continue;
            }
            beta = T::one();
        }
        let next = tilt(&p, &d, upper, T::one());
        let (nd, ni) = divergences_and_info(w, &next);
        let stalled = (ni - info).abs() <= rel_stop * ni.abs().max(T::min_positive_value());
        p = next;
        d = nd;
        info = ni;
        beta = beta + beta;
        if stalled {
            let upper = d.iter().copied().fold(T::neg_infinity(), T::max);
            return Ok(CapacityResult {
                capacity: info.max(T::zero()),
                prior: Distribution::from_weights(p)?,
                iterations: iter + 1,
                gap: upper - info,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "capacity",
        iterations: CAPACITY_MAX_ITER,
        residual: gap.as_f64(),
    })
}

/// Both sides of the block superadditivity inequalities.
#[derive(Debug, Clone, Serialize)]
pub struct SuperadditivityReport<T: Real = f64> {
    pub block_information: T,
    pub sum_letter_information: T,
    pub block_entropy: T,
    pub sum_letter_entropy: T,
}

impl<T: Real> SuperadditivityReport<T> {
    pub fn holds(&self, tol: T) -> bool {
        self.block_information <= self.sum_letter_information + tol
            && self.block_entropy <= self.sum_letter_entropy + tol
    }
}

/// Compares `I(X^n;Y^n)`, `H(X^n)` against the sums of their single-letter
/// counterparts for a joint input law over `X^n` (index order of
/// [`crate::words`]) sent through `W^n`.
pub fn superadditivity_check<T: Real>(
    joint: &Distribution<T>,
    w: &Channel<T>,
    n: usize,
) -> Result<SuperadditivityReport<T>> {
    if n == 0 || n > 4 {
        return Err(Error::InvalidArgument(format!("block length {n} outside 1..=4")));
    }
    let kx = w.input_size();
    let ky = w.output_size();
    let count = kx.pow(n as u32);
    if joint.len() != count {
        return Err(Error::DimensionMismatch { expected: count, got: joint.len() });
    }
    let mut marginals = vec![vec![T::zero(); kx]; n];
    let mut out = vec![T::zero(); ky.pow(n as u32)];
    let mut block_cond = T::zero();
    let mut x = vec![0usize; n];
    for &px in joint.probs() {
        if px > T::zero() {
            for (j, &xj) in x.iter().enumerate() {
                marginals[j][xj] = marginals[j][xj] + px;
            }
            let dist = w.block_output_dist(&x);
            for (o, &d) in out.iter_mut().zip(&dist) {
                *o = *o + px * d;
            }
            block_cond = block_cond + px * entropy_of(&dist);
        }
        advance(&mut x, kx);
    }
    let block_information = entropy_of(&out) - block_cond;
    let mut sum_letter_information = T::zero();
    let mut sum_letter_entropy = T::zero();
    for m in marginals {
        let ctx = InfoContext::new(w.clone(), Distribution::from_weights(m)?)?;
        sum_letter_information = sum_letter_information + ctx.mutual_information();
        sum_letter_entropy = sum_letter_entropy + ctx.entropy();
    }
    Ok(SuperadditivityReport {
        block_information,
        sum_letter_information,
        block_entropy: entropy(joint),
        sum_letter_entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn bsc_ctx() -> InfoContext {
        InfoContext::new(Channel::bsc(0.1).unwrap(), Distribution::uniform(2)).unwrap()
    }

    // closed-form oracles
    fn h(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&Distribution::<f64>::uniform(2)), 1.0);
        assert_eq!(entropy(&Distribution::<f64>::point_mass(3, 1)), 0.0);
        assert_abs_diff_eq!(
            entropy(&Distribution::new(vec![0.9, 0.1]).unwrap()),
            0.468996,
            epsilon = 1e-6
        );
    }

    #[test]
    fn mutual_information_examples() {
        let bsc05 = Channel::new_degenerate(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        assert_abs_diff_eq!(InfoContext::new(bsc05, p).unwrap().mutual_information(), 0.0);
        let nl = InfoContext::new(Channel::<f64>::noiseless(2).unwrap(), Distribution::uniform(2)).unwrap();
        assert_abs_diff_eq!(nl.mutual_information(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bsc_ctx().mutual_information(), 1.0 - h(0.1), epsilon = 1e-12);
        assert_abs_diff_eq!(bsc_ctx().mutual_information(), 0.531004, epsilon = 1e-6);
    }

    #[test]
    fn capacity_examples() {
        let c = capacity(&Channel::bsc(0.1).unwrap(), 1e-9).unwrap();
        assert_abs_diff_eq!(c.capacity, 1.0 - h(0.1), epsilon = 1e-9);
        let c = capacity(&Channel::<f64>::noiseless(4).unwrap(), 1e-9).unwrap();
        assert_abs_diff_eq!(c.capacity, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.prior.get(3), 0.25, epsilon = 1e-12);
        let bsc05 = Channel::new_degenerate(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(capacity(&bsc05, 1e-9).unwrap().capacity, 0.0);
    }

    #[test]
    fn z_channel_capacity_matches_closed_form() {
        // Z(1/2): C = log2(1 + (1-q) q^{q/(1-q)}) with q = 1/2 gives log2(5/4)
        let c = capacity(&Channel::z_channel(0.5).unwrap(), 1e-10).unwrap();
        assert_abs_diff_eq!(c.capacity, (1.25f64).log2(), epsilon = 1e-8);
        assert_abs_diff_eq!(c.prior.get(1), 0.4, epsilon = 1e-4);
    }

    #[test]
    fn f_examples() {
        let ctx = bsc_ctx();
        assert_abs_diff_eq!(ctx.f(0, 0), 0.531004, epsilon = 1e-6);
        let d01 = 0.8 * 9f64.log2();
        assert_abs_diff_eq!(ctx.row_divergence(0, 1), d01, epsilon = 1e-12);
        assert_abs_diff_eq!(ctx.f(0, 1), 1.0 - h(0.1) - d01, epsilon = 1e-12);
        assert_abs_diff_eq!(ctx.f(0, 1), -2.004936, epsilon = 1e-6);
        for x in 0..2 {
            assert_eq!(ctx.f(x, x), ctx.divergence_to_output(x));
        }
    }

    #[test]
    fn f_block_examples() {
        let ctx = bsc_ctx();
        assert_abs_diff_eq!(ctx.f_block(&[0], &[1]).unwrap(), ctx.f(0, 1));
        assert_abs_diff_eq!(ctx.f_block(&[0, 0], &[1, 1]).unwrap(), 2.0 * ctx.f(0, 1), epsilon = 1e-12);
        let x = [0, 1, 1, 0];
        let xp = [1, 1, 0, 0];
        let hand = ctx.f(0, 1) + ctx.f(1, 1) + ctx.f(1, 0) + ctx.f(0, 0);
        assert_abs_diff_eq!(ctx.f_block(&x, &xp).unwrap(), hand, epsilon = 1e-12);
        assert!(ctx.f_block(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn f_infinite_when_support_fails() {
        let z = InfoContext::new(Channel::z_channel(0.5).unwrap(), Distribution::uniform(2)).unwrap();
        assert_eq!(z.f(1, 0), f64::NEG_INFINITY);
        assert_eq!(z.f_expectation(1, 0), f64::NEG_INFINITY);
        assert!(z.f(0, 1).is_finite());
    }

    #[test]
    fn zeta_examples() {
        let ctx = bsc_ctx();
        let d10 = 0.8 * 9f64.log2();
        assert_abs_diff_eq!(ctx.zeta1(), d10, epsilon = 1e-12);
        assert_abs_diff_eq!(ctx.zeta1(), 2.535940, epsilon = 1e-6);
        assert_abs_diff_eq!(ctx.zeta2(), 2.535940, epsilon = 1e-6);
    }

    #[test]
    fn v_max_examples() {
        let ctx = bsc_ctx();
        // two-point variable under W_0: log(W_x'(y)/W_P(y)) takes log 1.8 or log 0.2
        let a = 1.8f64.log2();
        let b = 0.2f64.log2();
        let var = 0.9 * 0.1 * (a - b).powi(2);
        assert_abs_diff_eq!(ctx.v_max().unwrap(), var, epsilon = 1e-12);

        let nl = InfoContext::new(Channel::<f64>::noiseless(3).unwrap(), Distribution::uniform(3)).unwrap();
        assert_eq!(nl.log_ratio_variance(1, 1).unwrap(), 0.0);
        assert!(matches!(nl.log_ratio_variance(1, 2), Err(Error::InfiniteVariance { .. })));

        let bsc05 = Channel::new_degenerate(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let ctx = InfoContext::new(bsc05, Distribution::uniform(2)).unwrap();
        assert_eq!(ctx.v_max().unwrap(), 0.0);
    }

    #[test]
    fn g_examples() {
        let ctx = bsc_ctx();
        assert_abs_diff_eq!(ctx.g_avg(1e-9), 0.0, epsilon = 1e-8);
        let direct = (0.5 * 2f64.powf(ctx.f(0, 0)) + 0.5 * 2f64.powf(ctx.f(0, 1))).log2();
        assert_abs_diff_eq!(ctx.g_value(1.0, 0), direct, epsilon = 1e-12);
        assert_abs_diff_eq!(ctx.g_avg(1.0), direct, epsilon = 1e-12);
        assert_abs_diff_eq!(ctx.g_block(2.0, &[1, 1, 1]).unwrap(), 3.0 * ctx.g_value(2.0, 1), epsilon = 1e-12);
    }

    #[test]
    fn lemma10_margin_examples() {
        let ctx = bsc_ctx();
        let direct = ctx.mutual_information() - ctx.g_avg(1.0) - ctx.entropy();
        assert!(ctx.lemma10_margin(1.0) < 0.0);
        assert_abs_diff_eq!(ctx.lemma10_margin(1.0), direct, epsilon = 1e-12);
        assert!(ctx.lemma10_margin(50.0) > ctx.lemma10_margin(1.0));
        assert_abs_diff_eq!(ctx.lemma10_margin(1e-3), -ctx.entropy(), epsilon = 1e-2);
    }

    #[test]
    fn superadditivity_examples() {
        let w = Channel::bsc(0.1).unwrap();
        // product joint: P(x1,x2) = p(x1) p(x2)
        let p = [0.3, 0.7];
        let joint = Distribution::new(
            (0..4).map(|i| p[i >> 1] * p[i & 1]).collect::<Vec<_>>(),
        )
        .unwrap();
        let r = superadditivity_check(&joint, &w, 2).unwrap();
        assert_abs_diff_eq!(r.block_information, r.sum_letter_information, epsilon = 1e-9);
        assert_abs_diff_eq!(r.block_entropy, r.sum_letter_entropy, epsilon = 1e-9);

        let nl = Channel::noiseless(2).unwrap();
        let joint = Distribution::new(vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let r = superadditivity_check(&joint, &nl, 2).unwrap();
        assert_abs_diff_eq!(r.block_entropy, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sum_letter_entropy, 2.0, epsilon = 1e-12);

        let mut rng = rng_from_seed(5);
        for _ in 0..100 {
            let weights: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let joint = Distribution::from_weights(weights).unwrap();
            assert!(superadditivity_check(&joint, &w, 3).unwrap().holds(1e-9));
        }
    }

    #[test]
    fn f32_quantities() {
        let ctx = InfoContext::<f32>::new(Channel::bsc(0.1).unwrap(), Distribution::uniform(2)).unwrap();
        assert!((ctx.mutual_information() - 0.531004).abs() < 1e-5);
        let c = capacity(&Channel::<f32>::bsc(0.1).unwrap(), 1e-5).unwrap();
        assert!((c.capacity - 0.531004).abs() < 1e-4);
    }

    fn ctx_strategy() -> impl Strategy<Value = InfoContext> {
        (2usize..5, 2usize..5, any::<u64>()).prop_filter_map("valid", |(nx, ny, seed)| {
            let mut rng = rng_from_seed(seed);
            let rows = (0..nx)
                .map(|_| {
                    let r: Vec<f64> = (0..ny).map(|_| rng.gen::<f64>() + 1e-3).collect();
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / s).collect()
                })
                .collect();
            let p: Vec<f64> = (0..nx).map(|_| rng.gen::<f64>() + 1e-3).collect();
            InfoContext::new(Channel::new(rows).ok()?, Distribution::from_weights(p).ok()?).ok()
        })
    }

    proptest! {
        #[test]
        fn diagonal_average_is_information(ctx in ctx_strategy()) {
            let avg: f64 = (0..ctx.input_size()).map(|x| ctx.prior().get(x) * ctx.f(x, x)).sum();
            prop_assert!((avg - ctx.mutual_information()).abs() < 1e-9);
        }

        #[test]
        fn f_forms_agree_and_gap_is_divergence(ctx in ctx_strategy()) {
            let k = ctx.input_size();
            for x in 0..k {
                for xp in 0..k {
                    prop_assert!((ctx.f(x, xp) - ctx.f_expectation(x, xp)).abs() < 1e-9);
                    if x != xp {
                        let gap = ctx.f(x, x) - ctx.f(x, xp);
                        prop_assert!((gap - ctx.row_divergence(x, xp)).abs() < 1e-9);
                        prop_assert!(gap > 0.0);
                    }
                }
            }
        }

        #[test]
        fn zeta2_dominates_every_diagonal_gap(ctx in ctx_strategy()) {
            let k = ctx.input_size();
            let z2 = ctx.zeta2();
            for x in 0..k {
                for xp in (0..k).filter(|&xp| xp != x) {
                    prop_assert!(z2 >= ctx.f(x, x) - ctx.f(xp, x) - 1e-12);
                }
            }
            prop_assert!(z2 >= ctx.zeta1());
        }

        #[test]
        fn capacity_dominates_information(ctx in ctx_strategy(), seed in any::<u64>()) {
            let c = capacity(ctx.channel(), 1e-9).unwrap();
            let mut rng = rng_from_seed(seed);
            for _ in 0..100 {
                let p: Vec<f64> = (0..ctx.input_size()).map(|_| rng.gen::<f64>()).collect();
                let other = InfoContext::new(ctx.channel().clone(), Distribution::from_weights(p).unwrap()).unwrap();
                prop_assert!(c.capacity >= other.mutual_information() - 1e-9);
            }
        }

        #[test]
        fn g_avg_convex(ctx in ctx_strategy()) {
            let grid: Vec<f64> = (0..60).map(|i| 1e-3 * 1.2f64.powi(i)).collect();
            prop_assert!(ctx.g_curve(&grid).min_second_difference() >= -1e-9);
        }

        #[test]
        fn lemma10_margin_negative(ctx in ctx_strategy()) {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..40 {
                let s = 1e-3 * (5e4f64).powf(i as f64 / 39.0);
                let m = ctx.lemma10_margin(s);
                prop_assert!(m < 0.0);
                prop_assert!(m >= prev);
                prev = m;
            }
        }

        #[test]
        fn lemma10_exponent_positive_below_entropy(ctx in ctx_strategy()) {
            let r1 = ctx.entropy() - 0.05;
            let best = (0..80)
                .map(|i| ctx.lemma10_exponent(r1, 1e-3 * 2f64.powi(i)))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(best > 0.0);
        }
    }
}

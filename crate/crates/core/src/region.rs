//! The rate region `{0 < R1 < log|X|, κ(R1) < R2 < R1}` and its boundary.
//!
//! `κ(R1) = [R1 - C]+` up to `H0`, the largest input entropy among
//! capacity-achieving priors. Beyond `H0` it is `R1 - Ψ(R1)` with
//! `Ψ(r) = max{I(P,W) : H(P) >= r}`, followed by a lower convex envelope
//! over the sampled curve (time sharing between priors).

use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{Channel, Distribution};
use crate::error::{Error, Result};
use crate::info::{binary_entropy, capacity, divergence, entropy_of, InfoContext};
use crate::real::{log2_sum_exp2, Real};

/// Inputs whose divergence to the capacity output law is within this of `C`
/// are considered usable by a capacity-achieving prior.
const SUPPORT_SLACK: f64 = 1e-6;
const SCALING_MAX_ITER: usize = 200_000;
const LAGRANGE_MAX_ITER: usize = 100_000;

fn capacity_tol<T: Real>() -> T {
    T::lit(T::SUM_TOL * 1e-1)
}

/// `H0` and the maximum-entropy capacity-achieving prior `P_max`.
///
/// Capacity-achieving priors are exactly the priors supported on
/// `{x : D(W_x||Q*) = C}` with output law `Q*`, so `P_max` is the
/// entropy maximizer on that polytope, found by iterative scaling from the
/// uniform prior on the admissible inputs.
pub fn h0_and_pmax<T: Real>(w: &Channel<T>, tol: T) -> Result<(T, Distribution<T>)> {
    let cap = capacity(w, tol.min(capacity_tol()))?;
    let c = cap.capacity;
    let q = w.output_probs(cap.prior.probs());
    let k = w.input_size();
    let slack = T::lit(SUPPORT_SLACK).max(tol);
    let admissible: Vec<bool> = (0..k).map(|x| divergence(w.row(x), &q) >= c - slack).collect();
    let count = admissible.iter().filter(|a| **a).count();
    let mut log_p: Vec<T> = admissible
        .iter()
        .map(|&a| if a { -T::from_count(count).log2() } else { T::neg_infinity() })
        .collect();
    let log_q: Vec<T> = q.iter().map(|v| v.log2()).collect();
    let accept = T::lit(1e-6).max(tol);
    let mut residual = T::infinity();
    for _ in 0..SCALING_MAX_ITER {
        let p: Vec<T> = log_p.iter().map(|v| v.exp2()).collect();
        let wp = w.output_probs(&p);
        residual = wp
            .iter()
            .zip(&q)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        if residual <= T::lit(1e-13) {
            break;
        }
        let log_wp: Vec<T> = wp.iter().map(|v| v.log2()).collect();
        for x in (0..k).filter(|&x| admissible[x]) {
            let step: T = w
                .row(x)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > T::zero())
                .map(|(y, &v)| v * (log_q[y] - log_wp[y]))
                .sum();
            log_p[x] = log_p[x] + step;
        }
        let z = log2_sum_exp2(log_p.iter().copied());
        for v in log_p.iter_mut() {
            *v = *v - z;
        }
    }
    if residual > accept {
        return Err(Error::NonConvergence {
            what: "maximum-entropy capacity prior",
            iterations: SCALING_MAX_ITER,
            residual: residual.as_f64(),
        });
    }
    let p = Distribution::from_weights(log_p.iter().map(|v| v.exp2()).collect())?;
    Ok((entropy_of(p.probs()), p))
}

struct LagrangeSolution<T: Real> {
    prior: Vec<T>,
    info: T,
    entropy: T,
}

/// Maximizes `I(P,W) + mu H(P)` for `mu > 0` by alternating maximization:
/// `P <- (P 2^{D(W_x||W_P)})^{1/(1+mu)}`, normalized. The duality gap
/// `mu log2 Σ_x 2^{D(W_x||W_P)/mu} - (I + mu H)` bounds the suboptimality.
fn lagrange_solve<T: Real>(w: &Channel<T>, mu: T, start: &[T], tol: T) -> Result<LagrangeSolution<T>> {
    let k = w.input_size();
    let mut log_p: Vec<T> = start.iter().map(|v| v.log2()).collect();
    let inv = T::one() / (T::one() + mu);
    let mut gap = T::infinity();
    for _ in 0..LAGRANGE_MAX_ITER {
        let p: Vec<T> = log_p.iter().map(|v| v.exp2()).collect();
        let q = w.output_probs(&p);
        let d: Vec<T> = (0..k).map(|x| divergence(w.row(x), &q)).collect();
        let info: T = p.iter().zip(&d).map(|(&a, &b)| a * b).sum();
        let h = entropy_of(&p);
        let upper = mu * log2_sum_exp2(d.iter().map(|&v| v / mu));
        gap = upper - (info + mu * h);
        if gap <= tol {
            return Ok(LagrangeSolution { prior: p, info, entropy: h });
        }
        for (lp, &dx) in log_p.iter_mut().zip(&d) {
            *lp = (*lp + dx) * inv;
        }
        let z = log2_sum_exp2(log_p.iter().copied());
        for v in log_p.iter_mut() {
            *v = *v - z;
        }
    }
    Err(Error::NonConvergence {
        what: "entropy-weighted Blahut-Arimoto",
        iterations: LAGRANGE_MAX_ITER,
        residual: gap.as_f64(),
    })
}

/// `Ψ(r) = max{I(P,W) : H(P) >= r}` for `H0 < r <= log|X|`, with a maximizer.
///
/// The constraint is handled by bisection on the entropy weight `mu`; the
/// returned prior is feasible and its information is within
/// `mu (H(P) - r) + tol` of the optimum.
pub fn psi<T: Real>(w: &Channel<T>, r: T, tol: T) -> Result<(T, Distribution<T>)> {
    let k = w.input_size();
    let log_x = T::from_count(k).log2();
    let uniform = vec![T::one() / T::from_count(k); k];
    let uniform_result = || -> Result<(T, Distribution<T>)> {
        let p = Distribution::new(uniform.clone())?;
        let ctx = InfoContext::new(w.clone(), p.clone())?;
        Ok((ctx.mutual_information(), p))
    };
    if r >= log_x - T::lit(1e-12) {
        return uniform_result();
    }
    let inner_tol = tol * T::lit(1e-2);
    let mut mu_lo = T::zero();
    let mut mu_hi = T::one();
    let mut hi = lagrange_solve(w, mu_hi, &uniform, inner_tol)?;
    while hi.entropy < r {
        mu_lo = mu_hi;
        mu_hi = mu_hi * T::lit(4.0);
        if mu_hi > T::lit(1e12) {
            return uniform_result();
        }
        hi = lagrange_solve(w, mu_hi, &hi.prior, inner_tol)?;
    }
    for _ in 0..200 {
        let certified = mu_hi * (hi.entropy - r);
        if certified <= tol * T::lit(0.5) {
            break;
        }
        let mid = if mu_lo > T::zero() {
            (mu_lo * mu_hi).sqrt()
        } else {
            mu_hi * T::lit(0.5)
        };
        if mid <= mu_lo || mid >= mu_hi {
            break;
        }
        let sol = lagrange_solve(w, mid, &hi.prior, inner_tol)?;
        if sol.entropy >= r {
            mu_hi = mid;
            hi = sol;
        } else {
            mu_lo = mid;
        }
    }
    Ok((hi.info, Distribution::from_weights(hi.prior)?))
}

/// Lower convex hull of points sorted by abscissa.
fn lower_hull<T: Real>(points: &[(T, T)]) -> Vec<(T, T)> {
    let mut hull: Vec<(T, T)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= T::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Piecewise-linear interpolation on sorted knots; clamps outside the range.
fn interpolate<T: Real>(knots: &[(T, T)], x: T) -> T {
    if x <= knots[0].0 {
        return knots[0].1;
    }
    for pair in knots.windows(2) {
        let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
        if x <= x1 {
            if x1 == x0 {
                return y1;
            }
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    knots[knots.len() - 1].1
}

/// Scalar summary of a channel needed by κ.
#[derive(Debug, Clone, Serialize)]
pub struct RegionScalars<T: Real = f64> {
    pub log_x: T,
    pub capacity: T,
    pub h0: T,
    pub p_max: Distribution<T>,
    /// `H(X|Y)` under the uniform prior, i.e. `κ(log|X|)`.
    pub uniform_equivocation: T,
}

impl<T: Real> RegionScalars<T> {
    pub fn compute(w: &Channel<T>, tol: T) -> Result<Self> {
        let cap = capacity(w, tol.min(capacity_tol()))?;
        let (h0, p_max) = h0_and_pmax(w, tol)?;
        let k = w.input_size();
        let uni = InfoContext::new(w.clone(), Distribution::uniform(k))?;
        Ok(Self {
            log_x: T::from_count(k).log2(),
            capacity: cap.capacity,
            h0,
            p_max,
            uniform_equivocation: uni.conditional_entropy(),
        })
    }

    fn below_h0(&self, r1: T) -> T {
        (r1 - self.capacity).max(T::zero())
    }

    fn pointwise(&self, w: &Channel<T>, r1: T, tol: T) -> Result<T> {
        if r1 <= self.h0 {
            return Ok(self.below_h0(r1));
        }
        if r1 >= self.log_x - T::lit(1e-12) {
            return Ok(self.uniform_equivocation);
        }
        let (value, _) = psi(w, r1, tol)?;
        Ok((r1 - value).max(T::zero()))
    }

    fn anchors(&self) -> [(T, T); 3] {
        [
            (T::zero(), T::zero()),
            (self.h0, self.below_h0(self.h0)),
            (self.log_x, self.uniform_equivocation),
        ]
    }
}

fn check_rate<T: Real>(r1: T, log_x: T) -> Result<()> {
    if !(r1 >= T::zero()) || r1 > log_x + T::lit(1e-12) {
        return Err(Error::RateOutOfRange { rate: r1.as_f64(), max: log_x.as_f64() });
    }
    Ok(())
}

/// κ(R1), the smallest list rate compatible with message rate `R1`.
pub fn kappa<T: Real>(w: &Channel<T>, r1: T, tol: T) -> Result<T> {
    let s = RegionScalars::compute(w, tol)?;
    kappa_with(&s, w, r1, tol)
}

fn kappa_with<T: Real>(s: &RegionScalars<T>, w: &Channel<T>, r1: T, tol: T) -> Result<T> {
    check_rate(r1, s.log_x)?;
    if r1 <= s.h0 {
        return Ok(s.below_h0(r1));
    }
    // local envelope on a small grid across [H0, log|X|]
    const LOCAL: usize = 16;
    let mut points: Vec<(T, T)> = s.anchors().to_vec();
    for i in 1..LOCAL {
        let r = s.h0 + (s.log_x - s.h0) * T::from_count(i) / T::from_count(LOCAL);
        points.push((r, s.pointwise(w, r, tol)?));
    }
    points.push((r1, s.pointwise(w, r1, tol)?));
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite rates"));
    Ok(interpolate(&lower_hull(&points), r1).max(T::zero()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KappaPoint<T: Real = f64> {
    pub r1: T,
    /// After the convex envelope.
    pub kappa: T,
    /// `[R1 - Ψ(R1)]+` (or `[R1 - C]+` below `H0`) before the envelope.
    pub pointwise: T,
}

/// Sampled region with its κ curve on the midpoint grid
/// `r_i = (i + 1/2) log|X| / N`.
#[derive(Debug, Clone, Serialize)]
pub struct RateRegion<T: Real = f64> {
    pub log_x: T,
    pub capacity: T,
    pub h0: T,
    pub p_max: Distribution<T>,
    pub uniform_equivocation: T,
    pub kappa_curve: Vec<KappaPoint<T>>,
    #[serde(skip)]
    knots: Vec<(T, T)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Inside,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatePoint<T: Real = f64> {
    pub r1: T,
    pub r2: T,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MembershipReport<T: Real = f64> {
    pub status: Membership,
    /// Signed distance to the nearest constraint, positive inside.
    pub margin: T,
    pub kappa: T,
}

impl<T: Real> RateRegion<T> {
    pub fn compute(w: &Channel<T>, grid: usize, tol: T) -> Result<Self> {
        if grid == 0 {
            return Err(Error::InvalidArgument("grid must have at least one point".into()));
        }
        let s = RegionScalars::compute(w, tol)?;
        let rates: Vec<T> = (0..grid)
            .map(|i| (T::from_count(i) + T::lit(0.5)) * s.log_x / T::from_count(grid))
            .collect();
        let pointwise: Vec<T> = rates
            .par_iter()
            .map(|&r| s.pointwise(w, r, tol))
            .collect::<Result<_>>()?;
        let mut points: Vec<(T, T)> = rates.iter().copied().zip(pointwise.iter().copied()).collect();
        points.extend(s.anchors());
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite rates"));
        let knots = lower_hull(&points);
        let kappa_curve = rates
            .iter()
            .zip(&pointwise)
            .map(|(&r1, &pw)| KappaPoint {
                r1,
                kappa: interpolate(&knots, r1).max(T::zero()).min(pw),
                pointwise: pw,
            })
            .collect();
        Ok(Self {
            log_x: s.log_x,
            capacity: s.capacity,
            h0: s.h0,
            p_max: s.p_max,
            uniform_equivocation: s.uniform_equivocation,
            kappa_curve,
            knots,
        })
    }

    pub fn grid(&self) -> usize {
        self.kappa_curve.len()
    }

    /// Width of one grid cell, used as the boundary band.
    pub fn band(&self) -> T {
        self.log_x / T::from_count(self.grid())
    }

    /// κ at an arbitrary rate, exact below `H0`, interpolated on the envelope above.
    pub fn kappa_at(&self, r1: T) -> T {
        if r1 <= self.h0 {
            return (r1 - self.capacity).max(T::zero());
        }
        interpolate(&self.knots, r1).max(T::zero())
    }

    pub fn contains(&self, pt: RatePoint<T>) -> MembershipReport<T> {
        let kappa = self.kappa_at(pt.r1.max(T::zero()).min(self.log_x));
        let margin = pt
            .r1
            .min(self.log_x - pt.r1)
            .min(pt.r2 - kappa)
            .min(pt.r1 - pt.r2);
        let status = if margin <= T::zero() {
            Membership::Outside
        } else if margin <= self.band() {
            Membership::Boundary
        } else {
            Membership::Inside
        };
        MembershipReport { status, margin, kappa }
    }

    /// CSV with columns `r1,kappa,c_line_r2_lower,r2_upper`: the κ curve,
    /// the line `[R1 - C]+` and the diagonal `R2 = R1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r1,kappa,c_line_r2_lower,r2_upper\n");
        for p in &self.kappa_curve {
            let c_line = (p.r1 - self.capacity).max(T::zero());
            out.push_str(&format!("{},{},{},{}\n", p.r1, p.kappa, c_line, p.r1));
        }
        out
    }
}

/// Whether `P` meets the κ floor at its own entropy: `|κ(H(P)) - H(X|Y)_P| <= tol`.
pub fn p0_membership<T: Real>(w: &Channel<T>, p: &Distribution<T>, tol: T) -> Result<bool> {
    let s = RegionScalars::compute(w, tol.min(T::lit(1e-9)))?;
    p0_membership_with(&s, w, p, tol)
}

fn p0_membership_with<T: Real>(
    s: &RegionScalars<T>,
    w: &Channel<T>,
    p: &Distribution<T>,
    tol: T,
) -> Result<bool> {
    let ctx = InfoContext::new(w.clone(), p.clone())?;
    let h = ctx.entropy().min(s.log_x);
    let k = kappa_with(s, w, h, tol.min(T::lit(1e-9)))?;
    Ok((k - ctx.conditional_entropy()).abs() <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Corollary {
    /// Region is tight for `R1 <= H0`.
    Cor46,
    /// Uniform prior achieves capacity: the region is fixed by `log|X|` and `C`.
    Cor56,
    /// Every prior meeting the κ floor has `ζ1 > 0`: the region is tight everywhere.
    Cor66,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryRegion<T: Real = f64> {
    pub which: Corollary,
    pub region: RateRegion<T>,
    /// `V(W)` finite at `P_max`.
    pub finite_variance: bool,
    pub applies: bool,
    /// Largest `R1` up to which the region is known to be tight.
    pub tight_up_to: T,
    /// Priors checked for `ζ1 > 0` (only for `Cor66`) with their `ζ1`.
    pub zeta1_samples: Vec<(Distribution<T>, T)>,
}

/// Region together with the applicability test of one of the corollaries.
pub fn corollary_region<T: Real>(
    w: &Channel<T>,
    which: Corollary,
    grid: usize,
    tol: T,
) -> Result<CorollaryRegion<T>> {
    let region = RateRegion::compute(w, grid, tol)?;
    let ctx = InfoContext::new(w.clone(), region.p_max.clone())?;
    let finite_variance = ctx.v_max().is_ok();
    let k = w.input_size();
    let mut zeta1_samples = Vec::new();
    let (applies, tight_up_to) = match which {
        Corollary::Cor46 => (finite_variance, region.h0),
        Corollary::Cor56 => {
            let uni = InfoContext::new(w.clone(), Distribution::uniform(k))?;
            let ok = (uni.mutual_information() - region.capacity).abs() <= tol.max(T::lit(1e-9));
            (finite_variance && ok, if ok { region.log_x } else { region.h0 })
        }
        Corollary::Cor66 => {
            let s = RegionScalars::compute(w, tol)?;
            let mut candidates = vec![region.p_max.clone(), Distribution::uniform(k)];
            for point in region.kappa_curve.iter().filter(|p| p.r1 > region.h0).step_by(
                (region.grid() / 8).max(1),
            ) {
                candidates.push(psi(w, point.r1, tol)?.1);
            }
            let mut all_positive = true;
            for p in candidates {
                if !p0_membership_with(&s, w, &p, T::lit(1e-6))? {
                    continue;
                }
                let z = InfoContext::new(w.clone(), p.clone())?.zeta1();
                all_positive &= z > T::zero();
                zeta1_samples.push((p, z));
            }
            let ok = all_positive && !zeta1_samples.is_empty();
            (finite_variance && ok, if ok { region.log_x } else { region.h0 })
        }
    };
    Ok(CorollaryRegion { which, region, finite_variance, applies, tight_up_to, zeta1_samples })
}

/// Both sides of the list meta-converse `log2(M/L) <= (I + h(1-ε)) / (1-ε)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetaConverse<T: Real = f64> {
    pub lhs: T,
    pub rhs: T,
    pub avg_eps_a: T,
    pub block_information: T,
}

impl<T: Real> MetaConverse<T> {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + T::lit(1e-9)
    }

    pub fn slack(&self) -> T {
        self.rhs - self.lhs
    }
}

/// Evaluates the meta-converse from raw ingredients: message and list sizes,
/// average verification error `ε` and `I(X^n;Y^n)` for uniformly chosen codewords.
pub fn meta_converse_from_parts<T: Real>(
    m: usize,
    l: usize,
    avg_eps_a: T,
    block_information: T,
) -> Result<MetaConverse<T>> {
    if avg_eps_a >= T::one() - T::lit(1e-12) {
        return Err(Error::DegenerateEpsilon(avg_eps_a.as_f64()));
    }
    let success = T::one() - avg_eps_a;
    Ok(MetaConverse {
        lhs: (T::from_count(m) / T::from_count(l)).log2(),
        rhs: (block_information + binary_entropy(success)) / success,
        avg_eps_a,
        block_information,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn h(p: f64) -> f64 {
        binary_entropy(p)
    }

    fn bsc01() -> Channel {
        Channel::bsc(0.1).unwrap()
    }

    #[test]
    fn h0_examples() {
        let (h0, p) = h0_and_pmax(&bsc01(), 1e-9).unwrap();
        assert_abs_diff_eq!(h0, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.get(0), 0.5, epsilon = 1e-9);
        let (h0, _) = h0_and_pmax(&Channel::<f64>::noiseless(3).unwrap(), 1e-9).unwrap();
        assert_abs_diff_eq!(h0, 3f64.log2(), epsilon = 1e-9);
        let bsc05 = Channel::new_degenerate(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let (h0, _) = h0_and_pmax(&bsc05, 1e-9).unwrap();
        assert_abs_diff_eq!(h0, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn h0_excludes_inputs_below_capacity() {
        // input 2 is the even mixture of two noiseless inputs, so it carries
        // D(W_2||Q*) = 0 < C and no capacity-achieving prior uses it
        let w = Channel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let (h0, p) = h0_and_pmax(&w, 1e-9).unwrap();
        assert_abs_diff_eq!(p.get(2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h0, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn h0_over_a_continuum_of_capacity_priors() {
        // rows A+B = C+D: every prior (a, a, b, b) gives a uniform output and C = 1
        let w = Channel::new(vec![
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5, 0.0],
            vec![0.0, 0.5, 0.0, 0.5],
        ])
        .unwrap();
        assert_abs_diff_eq!(capacity(&w, 1e-12).unwrap().capacity, 1.0, epsilon = 1e-9);
        let (h0, p) = h0_and_pmax(&w, 1e-9).unwrap();
        assert_abs_diff_eq!(h0, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.get(0), 0.25, epsilon = 1e-9);

        // skewed version: the capacity polytope is a segment not containing uniform
        let w = Channel::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.5, 0.0, 0.5],
        ])
        .unwrap();
        let (h0, p) = h0_and_pmax(&w, 1e-9).unwrap();
        let ctx = InfoContext::new(w.clone(), p.clone()).unwrap();
        let c = capacity(&w, 1e-12).unwrap().capacity;
        assert_abs_diff_eq!(c, 3f64.log2(), epsilon = 1e-9);
        assert_abs_diff_eq!(ctx.mutual_information(), c, epsilon = 1e-7);
        // the last input is a mixture with D = log 3 - 1 < C, so P_max is uniform on the first three
        assert_abs_diff_eq!(h0, 3f64.log2(), epsilon = 1e-9);
    }

    #[test]
    fn kappa_examples() {
        let w = bsc01();
        let c = 1.0 - h(0.1);
        assert_eq!(kappa(&w, 0.4, 1e-9).unwrap(), 0.0);
        assert_abs_diff_eq!(kappa(&w, 0.8, 1e-9).unwrap(), 0.8 - c, epsilon = 1e-8);
        assert_abs_diff_eq!(kappa(&w, 0.8, 1e-9).unwrap(), 0.268996, epsilon = 1e-6);
        assert_abs_diff_eq!(kappa(&w, 1.0, 1e-9).unwrap(), h(0.1), epsilon = 1e-6);
        assert!(matches!(kappa(&w, 1.2, 1e-9), Err(Error::RateOutOfRange { .. })));
        assert!(matches!(kappa(&w, -0.1, 1e-9), Err(Error::RateOutOfRange { .. })));
    }

    #[test]
    fn psi_matches_closed_form_on_z_channel() {
        // For a binary input channel Ψ(r) is I at the prior with H(P) = r on
        // the side of the capacity prior closer to uniform.
        let w = Channel::<f64>::z_channel(0.5).unwrap();
        let (h0, pmax) = h0_and_pmax(&w, 1e-10).unwrap();
        assert!(h0 < 1.0);
        let r = (h0 + 1.0) / 2.0;
        let (value, prior) = psi(&w, r, 1e-10).unwrap();
        // oracle: bisect on p1 in [pmax(1), 1/2] for h(p1) = r
        let (mut lo, mut hi) = (pmax.get(1), 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < r { lo = mid } else { hi = mid }
        }
        let p1 = hi;
        let oracle = h(0.5 * p1) - p1;
        assert_abs_diff_eq!(value, oracle, epsilon = 1e-7);
        assert!(entropy_of(prior.probs()) >= r - 1e-12);
    }

    #[test]
    fn region_contains_examples() {
        let r = RateRegion::compute(&bsc01(), 64, 1e-9).unwrap();
        let pt = |r1, r2| RatePoint { r1, r2 };
        let m = r.contains(pt(0.7, 0.5));
        assert_eq!(m.status, Membership::Inside);
        assert_abs_diff_eq!(m.kappa, 0.7 - (1.0 - h(0.1)), epsilon = 1e-9);
        assert_eq!(r.contains(pt(0.6, 0.6)).status, Membership::Outside);
        assert_eq!(r.contains(pt(1.2, 0.5)).status, Membership::Outside);
        assert_eq!(r.contains(pt(0.7, 0.1)).status, Membership::Outside);
        assert_eq!(r.contains(pt(0.7, 0.169 + 0.01)).status, Membership::Boundary);
    }

    #[test]
    fn region_monotone_in_r2() {
        let r = RateRegion::compute(&Channel::<f64>::z_channel(0.3).unwrap(), 32, 1e-9).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..500 {
            let r1 = rng.gen::<f64>();
            let r2 = rng.gen::<f64>() * r1;
            if r.contains(RatePoint { r1, r2 }).status == Membership::Inside {
                let k = r.kappa_at(r1);
                let r2b = k + (r2 - k) * rng.gen::<f64>();
                assert!(r.contains(RatePoint { r1, r2: r2b }).margin > 0.0 || r2b - k <= r.band());
                assert!(r.contains(RatePoint { r1, r2: r2b }).status != Membership::Outside || r2b <= k);
            }
        }
    }

    #[test]
    fn curve_properties_on_z_channel() {
        let r = RateRegion::compute(&Channel::<f64>::z_channel(0.5).unwrap(), 128, 1e-9).unwrap();
        assert!(r.h0 < 1.0);
        let upper: Vec<_> = r.kappa_curve.iter().filter(|p| p.r1 >= r.h0).collect();
        for w in upper.windows(3) {
            let d2 = (w[2].kappa - w[1].kappa) - (w[1].kappa - w[0].kappa);
            assert!(d2 >= -1e-6);
            assert!(w[1].kappa >= w[0].kappa - 1e-12);
        }
        for p in &r.kappa_curve {
            assert!(p.kappa <= p.pointwise + 1e-15);
            assert!(p.kappa >= 0.0 && p.kappa <= p.r1 + 1e-12);
            if p.r1 <= r.h0 {
                assert_abs_diff_eq!(p.kappa, (p.r1 - r.capacity).max(0.0), epsilon = 1e-12);
            }
        }
        // Ψ concave makes the envelope a no-op up to solver accuracy
        for p in &r.kappa_curve {
            assert_abs_diff_eq!(p.kappa, p.pointwise, epsilon = 1e-7);
        }
        assert_abs_diff_eq!(r.kappa_at(0.0), 0.0);
        assert_abs_diff_eq!(r.kappa_at(1.0), r.uniform_equivocation, epsilon = 1e-12);
    }

    #[test]
    fn csv_layout() {
        let r = RateRegion::compute(&bsc01(), 1, 1e-9).unwrap();
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "r1,kappa,c_line_r2_lower,r2_upper");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("0.5,0,0,0.5"));
    }

    #[test]
    fn p0_examples() {
        let w = bsc01();
        let (_, pmax) = h0_and_pmax(&w, 1e-9).unwrap();
        assert!(p0_membership(&w, &pmax, 1e-6).unwrap());
        assert!(p0_membership(&w, &Distribution::uniform(2), 1e-6).unwrap());
        assert!(!p0_membership(&w, &Distribution::new(vec![0.99, 0.01]).unwrap(), 1e-6).unwrap());
        let z = Channel::<f64>::z_channel(0.5).unwrap();
        let (_, pmax) = h0_and_pmax(&z, 1e-9).unwrap();
        assert!(p0_membership(&z, &pmax, 1e-6).unwrap());
        assert!(p0_membership(&z, &Distribution::uniform(2), 1e-6).unwrap());
    }

    #[test]
    fn corollary_examples() {
        let c = corollary_region(&bsc01(), Corollary::Cor56, 32, 1e-9).unwrap();
        assert!(c.applies);
        assert_abs_diff_eq!(c.tight_up_to, 1.0);
        let z = Channel::<f64>::z_channel(0.5).unwrap();
        let c = corollary_region(&z, Corollary::Cor56, 32, 1e-9).unwrap();
        assert!(!c.applies);
        let nl = Channel::<f64>::noiseless(2).unwrap();
        let c = corollary_region(&nl, Corollary::Cor46, 16, 1e-9).unwrap();
        assert!(c.region.kappa_curve.iter().all(|p| p.kappa == 0.0));
        let c = corollary_region(&bsc01(), Corollary::Cor66, 32, 1e-9).unwrap();
        assert!(c.applies);
        assert!(!c.zeta1_samples.is_empty());
    }

    #[test]
    fn meta_converse_parts() {
        let m = meta_converse_from_parts(4, 4, 0.1, 0.0).unwrap();
        assert_eq!(m.lhs, 0.0);
        assert!(m.holds());
        assert!(matches!(
            meta_converse_from_parts(4, 1, 1.0, 0.5),
            Err(Error::DegenerateEpsilon(_))
        ));
    }
}

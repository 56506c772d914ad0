//! Random-coding construction of secure list codes.
//!
//! Codewords are drawn i.i.d. from `P^n` and decoded by the likelihood-ratio
//! threshold decoder. Each message gets a score
//! `ε_{A,m} + η^A_m + η^C_m`, where the 0/1 flags `η` test the block score
//! `F^n` of the codeword against itself and against every other codeword.
//! The best two thirds of the messages (by score) are kept.

use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::Distribution;
use crate::codes::{Encoder, ListCode};
use crate::error::{Error, Hypothesis, Result};
use crate::info::InfoContext;
use crate::real::Real;
use crate::rng::derive_seed;
use crate::security::{self, Budget, SearchOptions, SecurityReport};
use crate::words::{advance, word_from_index, Word};

/// Rate bookkeeping of the construction, all in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterSchedule<T: Real = f64> {
    pub r1: T,
    pub r2: T,
    pub r3: T,
    pub eps0: T,
    pub eps1: T,
    pub eps2: T,
    pub eps3: T,
    pub entropy: T,
    pub mutual_information: T,
    pub zeta1: T,
    pub zeta2: T,
}

/// Checks `0 < R1 - R2 < I(P,W) < R1 < H(P)` and `ζ1(P) > 0`, then sets
///
/// ```text
/// eps0 = H - R1          eps1 = (I - R1 + R2) / 2     R3 = I - eps1
/// eps2 = (1 + 2 ζ2/ζ1) eps1                            eps3 = min(eps1, (R1 - I) / 3)
/// ```
pub fn schedule<T: Real>(ctx: &InfoContext<T>, r1: T, r2: T) -> Result<ParameterSchedule<T>> {
    if !(r1.is_finite() && r2.is_finite()) || r2 < T::zero() {
        return Err(Error::InvalidArgument("rates must be finite with R2 >= 0".into()));
    }
    let h = ctx.entropy();
    let i = ctx.mutual_information();
    let violated = |c| Err(Error::HypothesisViolated(c));
    if r1 - r2 <= T::zero() {
        return violated(Hypothesis::ListRateBelowMessageRate);
    }
    if r1 - r2 >= i {
        return violated(Hypothesis::Verifiable);
    }
    if i >= r1 {
        return violated(Hypothesis::NonDecodable);
    }
    if r1 >= h {
        return violated(Hypothesis::EntropyMargin);
    }
    let zeta1 = ctx.zeta1();
    let zeta2 = ctx.zeta2();
    if !(zeta1 > T::zero()) {
        return violated(Hypothesis::Zeta1Positive);
    }
    let eps1 = (i - r1 + r2) / T::lit(2.0);
    let ratio = zeta2 / zeta1;
    // ∞/∞ (rows with disjoint support) gives no usable margin
    let ratio = if ratio.is_nan() { T::infinity() } else { ratio };
    Ok(ParameterSchedule {
        r1,
        r2,
        r3: i - eps1,
        eps0: h - r1,
        eps1,
        eps2: (T::one() + T::lit(2.0) * ratio) * eps1,
        eps3: eps1.min((r1 - i) / T::lit(3.0)),
        entropy: h,
        mutual_information: i,
        zeta1,
        zeta2,
    })
}

/// `⌈2^{n r}⌉`, with a small slack so exact powers of two are not rounded up.
pub fn message_count(n: usize, r: f64) -> Result<usize> {
    let v = (n as f64 * r).exp2();
    if !v.is_finite() || v > (1u64 << 32) as f64 {
        return Err(Error::InvalidArgument(format!("2^(n·rate) = 2^{} is too large", n as f64 * r)));
    }
    Ok(((v - 1e-9).ceil() as usize).max(1))
}

/// `count` words drawn i.i.d. from `prior^n`.
pub fn sample_codewords<T: Real>(prior: &Distribution<T>, n: usize, count: usize, seed: u64) -> Vec<Word> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| prior.sample(&mut rng)).collect()).collect()
}

/// `M = ⌈2^{nR1}⌉` codewords from `P^n` with the threshold decoder at `R3`
/// and list size `L = ⌈2^{nR2}⌉`.
pub fn sample_code<T: Real>(ctx: &InfoContext<T>, n: usize, sched: &ParameterSchedule<T>, seed: u64) -> Result<ListCode<T>> {
    let m = message_count(n, sched.r1.as_f64())?;
    if m < 2 {
        return Err(Error::InvalidArgument(format!("n = {n} gives a single message")));
    }
    let l = message_count(n, sched.r2.as_f64())?.min(m);
    let words = sample_codewords(ctx.prior(), n, m, seed);
    ListCode::threshold(words, ctx.prior().clone(), sched.r3, l)
}

fn codewords<T: Real>(code: &ListCode<T>) -> Result<&[Word]> {
    code.encoder()
        .codewords()
        .ok_or_else(|| Error::InvalidCode("score diagnostics need a deterministic encoder".into()))
}

/// `k × k` table of `F(x, x'|P)`.
fn f_table<T: Real>(ctx: &InfoContext<T>) -> Vec<T> {
    let k = ctx.input_size();
    (0..k * k).map(|i| ctx.f(i / k, i % k)).collect()
}

fn f_block_with<T: Real>(table: &[T], k: usize, a: &[usize], b: &[usize]) -> T {
    a.iter().zip(b).map(|(&x, &y)| table[x * k + y]).sum()
}

/// `F^n(φ(m), φ(m)|P)` and `max_{j≠m} F^n(φ(m), φ(j)|P)` for every message.
fn block_scores<T: Real>(ctx: &InfoContext<T>, words: &[Word]) -> Vec<(T, T)> {
    let k = ctx.input_size();
    let table = f_table(ctx);
    (0..words.len())
        .into_par_iter()
        .map(|m| {
            let own = f_block_with(&table, k, &words[m], &words[m]);
            let cross = (0..words.len())
                .filter(|&j| j != m)
                .map(|j| f_block_with(&table, k, &words[m], &words[j]))
                .fold(T::neg_infinity(), T::max);
            (own, cross)
        })
        .collect()
}

fn check_message<T: Real>(code: &ListCode<T>, m: usize) -> Result<()> {
    if m >= code.m() {
        return Err(Error::InvalidArgument(format!("message {m} outside 0..{}", code.m())));
    }
    Ok(())
}

/// `η^A(m) = 0` iff `F^n(φ(m), φ(m)|P) < n (I(P,W) + eps)`.
pub fn eta_a<T: Real>(code: &ListCode<T>, ctx: &InfoContext<T>, m: usize, eps: T) -> Result<u8> {
    check_message(code, m)?;
    let w = &codewords(code)?[m];
    let own = ctx.f_block(w, w)?;
    let n = T::from_count(code.n());
    Ok(u8::from(own >= n * (ctx.mutual_information() + eps)))
}

/// `η^C(m) = 0` iff `F^n(φ(m), φ(j)|P) < n (R3 - eps2)` for every `j ≠ m`.
pub fn eta_c<T: Real>(code: &ListCode<T>, ctx: &InfoContext<T>, m: usize, eps2: T, r3: T) -> Result<u8> {
    check_message(code, m)?;
    let words = codewords(code)?;
    let limit = T::from_count(code.n()) * (r3 - eps2);
    for (j, w) in words.iter().enumerate() {
        if j != m && ctx.f_block(&words[m], w)? >= limit {
            return Ok(1);
        }
    }
    Ok(0)
}

/// How `ε_{A,m}` entered the expurgation score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScoreMethod {
    Exact,
    /// Upper end of the 95% interval from `trials` samples per message.
    MonteCarlo { trials: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MessageScore<T: Real = f64> {
    pub eps_a: T,
    pub eta_a: u8,
    pub eta_c: u8,
    /// `ε_{A,m}` (or its upper confidence limit) `+ η^A + η^C`.
    pub score: T,
}

/// Monte-Carlo trials per message when `|Y|^n` exceeds the budget.
pub const SCORE_TRIALS: u64 = 10_000;

/// Scores every message: `η^A` at `eps3`, `η^C` at `(eps2, R3)`.
pub fn score_messages<T: Real>(
    code: &ListCode<T>,
    ctx: &InfoContext<T>,
    sched: &ParameterSchedule<T>,
    budget: &Budget,
    seed: u64,
) -> Result<(Vec<MessageScore<T>>, ScoreMethod)> {
    let words = codewords(code)?;
    let ch = ctx.channel();
    let (eps, method) = if budget.allows_outputs(code, ch) {
        (security::eps_a_exact(code, ch, budget)?.1, ScoreMethod::Exact)
    } else {
        let est = security::eps_a_monte_carlo(code, ch, SCORE_TRIALS, seed)?;
        (
            est.iter().map(|e| (e.value + e.ci95).min(T::one())).collect(),
            ScoreMethod::MonteCarlo { trials: SCORE_TRIALS },
        )
    };
    let n = T::from_count(code.n());
    let a_limit = n * (sched.mutual_information + sched.eps3);
    let c_limit = n * (sched.r3 - sched.eps2);
    let scores = block_scores(ctx, words)
        .into_iter()
        .zip(eps)
        .map(|((own, cross), e)| {
            let eta_a = u8::from(own >= a_limit);
            let eta_c = u8::from(cross >= c_limit);
            MessageScore { eps_a: e, eta_a, eta_c, score: e + T::from_count((eta_a + eta_c) as usize) }
        })
        .collect();
    Ok((scores, method))
}

#[derive(Debug, Clone)]
pub struct Expurgation<T: Real = f64> {
    pub code: ListCode<T>,
    /// Original indices of the kept messages, ascending.
    pub kept: Vec<usize>,
    /// Three times the average score.
    pub eps4: T,
}

/// Keeps the `⌈2M/3⌉` messages with the smallest score (ties to the lower
/// index). By Markov's inequality every kept score is at most `eps4`.
pub fn expurgate_scored<T: Real>(code: &ListCode<T>, scores: &[MessageScore<T>]) -> Result<Expurgation<T>> {
    let m = code.m();
    if scores.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: scores.len() });
    }
    let keep = (2 * m).div_ceil(3);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .score
            .partial_cmp(&scores[b].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    let eps4 = T::lit(3.0) * scores.iter().map(|s| s.score).sum::<T>() / T::from_count(m);
    Ok(Expurgation { code: subcode(code, &kept)?, kept, eps4 })
}

/// Scores with [`score_messages`] and expurgates.
pub fn expurgate<T: Real>(
    code: &ListCode<T>,
    ctx: &InfoContext<T>,
    sched: &ParameterSchedule<T>,
    budget: &Budget,
    seed: u64,
) -> Result<Expurgation<T>> {
    let (scores, _) = score_messages(code, ctx, sched, budget, seed)?;
    expurgate_scored(code, &scores)
}

/// The code restricted to `kept` messages, same decoder rule and list size
/// (capped at the new message count).
pub fn subcode<T: Real>(code: &ListCode<T>, kept: &[usize]) -> Result<ListCode<T>> {
    let words = codewords(code)?;
    if let Some(&bad) = kept.iter().find(|&&i| i >= words.len()) {
        return Err(Error::InvalidArgument(format!("message {bad} outside 0..{}", words.len())));
    }
    let chosen: Vec<Word> = kept.iter().map(|&i| words[i].clone()).collect();
    let l = code.l().min(chosen.len().max(1));
    ListCode::new(code.n(), l, Encoder::Deterministic(chosen), code.decoder_spec().clone())
}

/// The dishonest-sender bound `V / (n (eps1 - ζ2 sqrt(2V) / (ζ1 sqrt n))^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma8Bound<T: Real = f64> {
    /// `+∞` when vacuous.
    pub value: T,
    pub vacuous: bool,
    /// Block length `2 V ζ2² / (ζ1² eps1²)` beyond which the bound is finite.
    pub threshold_n: T,
}

pub fn lemma8_bound<T: Real>(n: usize, eps1: T, zeta1: T, zeta2: T, v: T) -> Lemma8Bound<T> {
    let two = T::lit(2.0);
    let ratio = zeta2 / zeta1;
    let ratio = if ratio.is_nan() { T::infinity() } else { ratio };
    if v == T::zero() {
        return Lemma8Bound { value: T::zero(), vacuous: false, threshold_n: T::zero() };
    }
    let threshold_n = two * v * ratio * ratio / (eps1 * eps1);
    let nn = T::from_count(n);
    let inner = eps1 - ratio * (two * v).sqrt() / nn.sqrt();
    if !(inner > T::zero()) || !inner.is_finite() {
        return Lemma8Bound { value: T::infinity(), vacuous: true, threshold_n };
    }
    Lemma8Bound { value: v / (nn * inner * inner), vacuous: false, threshold_n }
}

/// Bound on `δ_B` of the expurgated code via the information-spectrum
/// inequality `δ_B <= (1/M~) Σ_m W_m(ι_m >= γ) + 2^γ / M~` with
/// `γ = n (I + 2 eps3)`, where `ι_m = log2 W^n(y|φ(m)) - log2 W_P^n(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaBBound<T: Real = f64> {
    pub gamma: T,
    /// Average tail `W_m(ι_m >= γ)` over the kept messages, by enumeration.
    pub tail_exact: Option<T>,
    /// Chebyshev bound `V / (n eps3²)` on each tail (capped at 1).
    pub tail_chebyshev: T,
    /// Bound using the exact tail when available.
    pub bound: T,
    pub bound_chebyshev: T,
}

fn tail_exact<T: Real>(code: &ListCode<T>, ctx: &InfoContext<T>, gamma: T, budget: &Budget) -> Result<T> {
    let ch = ctx.channel();
    let words = codewords(code)?;
    let ky = ch.output_size();
    let n = code.n();
    let total = budget.words(ky, n)?;
    budget.work(total as f64 * words.len() as f64)?;
    let reference = ctx.log2_output().to_vec();
    let parts = security::chunked(total, |start, len| {
        let mut cache = crate::codes::LikelihoodCache::new(ch, words, n, Some(reference.clone()));
        let mut y = word_from_index(start, ky, n);
        let mut acc = T::zero();
        for _ in 0..len {
            let (ll, r) = cache.update(&y);
            for &v in ll {
                if v - r >= gamma {
                    acc = acc + v.exp2();
                }
            }
            advance(&mut y, ky);
        }
        acc
    });
    Ok(parts.into_iter().fold(T::zero(), |a, b| a + b) / T::from_count(words.len()))
}

pub fn delta_b_bound<T: Real>(
    code: &ListCode<T>,
    ctx: &InfoContext<T>,
    sched: &ParameterSchedule<T>,
    budget: &Budget,
) -> Result<DeltaBBound<T>> {
    let n = T::from_count(code.n());
    let gamma = n * (sched.mutual_information + T::lit(2.0) * sched.eps3);
    let v = ctx.v_max()?;
    let tail_chebyshev = (v / (n * sched.eps3 * sched.eps3)).min(T::one());
    let tail = if budget.allows_outputs(code, ctx.channel()) {
        Some(tail_exact(code, ctx, gamma, budget)?)
    } else {
        None
    };
    let m = T::from_count(code.m());
    let head = gamma.exp2() / m;
    Ok(DeltaBBound {
        gamma,
        tail_exact: tail,
        tail_chebyshev,
        bound: tail.unwrap_or(tail_chebyshev) + head,
        bound_chebyshev: tail_chebyshev + head,
    })
}

/// How much of the final code to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportLevel {
    /// All four parameters and the bound comparisons.
    Full,
    /// `ε_A` and `δ_B` of the expurgated code only.
    Basic,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub attempts: usize,
    pub report: ReportLevel,
    pub budget: Budget,
    /// Trials per message when the final report falls back to sampling.
    pub trials: u64,
    pub search: SearchOptions,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            attempts: 16,
            report: ReportLevel::Full,
            budget: Budget::from_env(),
            trials: SCORE_TRIALS,
            search: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AttemptSummary<T: Real = f64> {
    pub attempt: usize,
    pub seed: u64,
    pub avg_eps_a: T,
    pub avg_eta_a: T,
    pub avg_eta_c: T,
    pub eps4: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructionReport<T: Real = f64> {
    pub n: usize,
    pub seed: u64,
    pub schedule: ParameterSchedule<T>,
    /// Sizes before expurgation.
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub attempts: usize,
    pub best_attempt: usize,
    pub attempt_summaries: Vec<AttemptSummary<T>>,
    pub score_method: ScoreMethod,
    /// Averages over all messages of the chosen attempt, before expurgation.
    pub avg_eps_a: T,
    pub avg_eta_a: T,
    pub avg_eta_c: T,
    pub expurgated_m: usize,
    pub kept: Vec<usize>,
    pub eps4: T,
    /// Kept messages whose `η^A` or `η^C` is 1.
    pub kept_with_eta_violation: usize,
    /// Set when `eps4 >= 1`, so the Markov selection certifies nothing.
    pub warning: Option<String>,
    /// Average `ε_{A,m}` of the expurgated code (evaluated with its own decoder).
    pub post_avg_eps_a: T,
    pub post_delta_b: T,
    pub lemma8: Lemma8Bound<T>,
    /// Messages of the expurgated code meeting the premises of the
    /// dishonest-sender bound (cross score below `n(R3 - eps2)`, self score
    /// below `n(I + eps1)`).
    pub lemma8_premises: Vec<usize>,
    /// Premise-meeting messages whose `δ_{D,m}` exceeds a finite bound.
    pub lemma8_violations: Vec<usize>,
    pub delta_b_bound: Option<DeltaBBound<T>>,
    pub security: Option<SecurityReport<T>>,
}

impl<T: Real> ConstructionReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Attempt<T: Real> {
    summary: AttemptSummary<T>,
    scores: Vec<MessageScore<T>>,
    method: ScoreMethod,
    exp: Expurgation<T>,
}

fn mean<T: Real>(v: impl Iterator<Item = T>) -> T {
    let mut count = 0;
    let mut sum = T::zero();
    for x in v {
        sum = sum + x;
        count += 1;
    }
    sum / T::from_count(count.max(1))
}

/// Samples, scores and expurgates `attempts` codes, keeps the one with the
/// smallest `eps4` (first on ties), and evaluates it.
pub fn build_secure_code<T: Real>(
    ctx: &InfoContext<T>,
    n: usize,
    r1: T,
    r2: T,
    seed: u64,
    opts: &BuildOptions,
) -> Result<(ListCode<T>, ConstructionReport<T>)> {
    let sched = schedule(ctx, r1, r2)?;
    if opts.attempts == 0 {
        return Err(Error::InvalidArgument("at least one attempt is required".into()));
    }
    let budget = &opts.budget;
    let attempts: Vec<Attempt<T>> = (0..opts.attempts)
        .into_par_iter()
        .map(|a| {
            let s = derive_seed(seed, &[a as u64]);
            let code = sample_code(ctx, n, &sched, s)?;
            let (scores, method) = score_messages(&code, ctx, &sched, budget, derive_seed(s, &[1]))?;
            let exp = expurgate_scored(&code, &scores)?;
            let summary = AttemptSummary {
                attempt: a,
                seed: s,
                avg_eps_a: mean(scores.iter().map(|x| x.eps_a)),
                avg_eta_a: mean(scores.iter().map(|x| T::from_count(x.eta_a as usize))),
                avg_eta_c: mean(scores.iter().map(|x| T::from_count(x.eta_c as usize))),
                eps4: exp.eps4,
            };
            Ok(Attempt { summary, scores, method, exp })
        })
        .collect::<Result<_>>()?;
    let best = (0..attempts.len()).fold(0, |b, i| if attempts[i].summary.eps4 < attempts[b].summary.eps4 { i } else { b });
    let chosen = &attempts[best];
    let code = chosen.exp.code.clone();
    let ch = ctx.channel();

    let eta_bad = chosen
        .exp
        .kept
        .iter()
        .filter(|&&k| chosen.scores[k].eta_a + chosen.scores[k].eta_c > 0)
        .count();
    let warning = (chosen.exp.eps4 >= T::one()).then(|| {
        format!(
            "eps4 = {} >= 1: expurgation certifies no kept message ({} of {} kept have an η flag set)",
            chosen.exp.eps4.as_f64(),
            eta_bad,
            chosen.exp.kept.len()
        )
    });

    let lemma8 = lemma8_bound(n, sched.eps1, sched.zeta1, sched.zeta2, ctx.v_max()?);
    let nn = T::from_count(n);
    let premises: Vec<usize> = block_scores(ctx, codewords(&code)?)
        .into_iter()
        .enumerate()
        .filter(|(_, (own, cross))| {
            *cross < nn * (sched.r3 - sched.eps2) && *own < nn * (sched.mutual_information + sched.eps1)
        })
        .map(|(i, _)| i)
        .collect();

    let exact = budget.allows_outputs(&code, ch);
    let (post_avg_eps_a, post_delta_b, security) = match opts.report {
        ReportLevel::Full => {
            let rep = if exact && budget.allows_delta_d(&code, ch) && security::delta_c_fits(&code, ch, budget) {
                security::evaluate_exact(&code, ch, budget)?
            } else if exact && security::delta_c_fits(&code, ch, budget) {
                security::evaluate_exact_with_search(&code, ch, opts.search, budget)?
            } else {
                security::evaluate_monte_carlo(&code, ch, opts.trials, derive_seed(seed, &[u64::MAX]), opts.search, budget)?
            };
            let avg = mean(rep.per_message.as_ref().map(|p| p.eps_a.clone()).unwrap_or_default().into_iter());
            (avg, rep.delta_b, Some(rep))
        }
        ReportLevel::Basic => {
            if exact {
                let (eps, delta_b) = security::eps_a_and_delta_b_exact(&code, ch, budget)?;
                (mean(eps.into_iter()), delta_b, None)
            } else {
                let est = security::eps_a_monte_carlo(&code, ch, opts.trials, derive_seed(seed, &[u64::MAX]))?;
                (mean(est.iter().map(|e| e.value)), T::nan(), None)
            }
        }
    };
    let lemma8_violations = match (&security, lemma8.vacuous) {
        (Some(rep), false) => {
            let per = rep.per_message.as_ref().map(|p| p.delta_d.clone()).unwrap_or_default();
            premises.iter().copied().filter(|&m| per[m] > lemma8.value + T::lit(1e-12)).collect()
        }
        _ => Vec::new(),
    };
    let delta_b_bound = match opts.report {
        ReportLevel::Full => Some(delta_b_bound(&code, ctx, &sched, budget)?),
        ReportLevel::Basic => None,
    };
    let m_full = message_count(n, r1.as_f64())?;
    let report = ConstructionReport {
        n,
        seed,
        schedule: sched,
        m: m_full,
        l: message_count(n, r2.as_f64())?.min(m_full),
        attempts: opts.attempts,
        best_attempt: best,
        attempt_summaries: attempts.iter().map(|a| a.summary.clone()).collect(),
        score_method: chosen.method,
        avg_eps_a: chosen.summary.avg_eps_a,
        avg_eta_a: chosen.summary.avg_eta_a,
        avg_eta_c: chosen.summary.avg_eta_c,
        expurgated_m: code.m(),
        kept: chosen.exp.kept.clone(),
        eps4: chosen.exp.eps4,
        kept_with_eta_violation: eta_bad,
        warning,
        post_avg_eps_a,
        post_delta_b,
        lemma8,
        lemma8_premises: premises,
        lemma8_violations,
        delta_b_bound,
        security,
    };
    Ok((code, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Channel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bsc_ctx(p: f64) -> InfoContext {
        InfoContext::new(Channel::bsc(p).unwrap(), Distribution::uniform(2)).unwrap()
    }

    #[test]
    fn schedule_on_bsc() {
        let ctx = bsc_ctx(0.1);
        let s = schedule(&ctx, 0.7, 0.5).unwrap();
        let i = 1.0 - crate::info::binary_entropy(0.1);
        assert_abs_diff_eq!(s.eps0, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eps1, (i - 0.2) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eps1, 0.1655, epsilon = 1e-4);
        assert_abs_diff_eq!(s.r3, 0.3655, epsilon = 1e-4);
        assert_abs_diff_eq!(s.eps3, (0.7 - i) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eps2, (1.0 + 2.0 * s.zeta2 / s.zeta1) * s.eps1, epsilon = 1e-12);
    }

    #[test]
    fn schedule_hypothesis_clauses() {
        let ctx = bsc_ctx(0.1);
        let clause = |r1, r2| match schedule(&ctx, r1, r2) {
            Err(Error::HypothesisViolated(h)) => Some(h),
            _ => None,
        };
        assert_eq!(clause(1.0, 0.5), Some(Hypothesis::EntropyMargin));
        assert_eq!(clause(0.7, 0.1), Some(Hypothesis::Verifiable));
        assert_eq!(clause(0.5, 0.1), Some(Hypothesis::NonDecodable));
        assert_eq!(clause(0.7, 0.7), Some(Hypothesis::ListRateBelowMessageRate));
    }

    #[test]
    fn ceiling_sizes() {
        assert_eq!(message_count(8, 0.7).unwrap(), 49);
        assert_eq!(message_count(8, 0.5).unwrap(), 16);
        assert_eq!(message_count(4, 0.5).unwrap(), 4);
        assert!(message_count(100, 1.0).is_err());
    }

    #[test]
    fn sampled_code_is_reproducible_with_expected_sizes() {
        let ctx = bsc_ctx(0.1);
        let s = schedule(&ctx, 0.7, 0.5).unwrap();
        let a = sample_code(&ctx, 8, &s, 3).unwrap();
        let b = sample_code(&ctx, 8, &s, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.m(), a.l()), (49, 16));
    }

    #[test]
    fn point_mass_prior_repeats_one_word() {
        let words = sample_codewords(&Distribution::<f64>::point_mass(3, 2), 5, 10, 1);
        assert!(words.iter().all(|w| w == &vec![2; 5]));
    }

    #[test]
    fn symbol_frequencies_match_prior() {
        let prior = Distribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        let words = sample_codewords(&prior, 20, 500, 7);
        let total: f64 = 20.0 * 500.0;
        for x in 0..3 {
            let count = words.iter().flatten().filter(|&&s| s == x).count() as f64;
            let p: f64 = prior.get(x);
            let sigma: f64 = (total * p * (1.0 - p)).sqrt();
            assert!((count - total * p).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn eta_flags() {
        let ctx = bsc_ctx(0.1);
        let s = schedule(&ctx, 0.7, 0.5).unwrap();
        let single = ListCode::threshold(vec![vec![0, 1, 0]], Distribution::uniform(2), s.r3, 1).unwrap();
        assert_eq!(eta_c(&single, &ctx, 0, s.eps2, s.r3).unwrap(), 0);
        let dup = ListCode::threshold(vec![vec![0, 1, 0], vec![0, 1, 0]], Distribution::uniform(2), s.r3, 1).unwrap();
        assert!(s.r3 - s.eps2 < s.mutual_information);
        assert_eq!(eta_c(&dup, &ctx, 0, s.eps2, s.r3).unwrap(), 1);
        // symmetric channel: F^n(x, x) = n I exactly, so η^A is always 0 for eps > 0
        assert_eq!(eta_a(&dup, &ctx, 0, s.eps3).unwrap(), 0);
        assert_eq!(eta_a(&dup, &ctx, 0, 0.0).unwrap(), 1);
    }

    fn scores(v: &[f64]) -> Vec<MessageScore> {
        v.iter().map(|&s| MessageScore { eps_a: s, eta_a: 0, eta_c: 0, score: s }).collect()
    }

    fn dummy_code(m: usize) -> ListCode {
        let words = (0..m).map(|i| crate::words::word_from_index(i as u64, 2, 6)).collect();
        ListCode::threshold(words, Distribution::uniform(2), 0.2, 1).unwrap()
    }

    #[test]
    fn expurgation_drops_bad_message() {
        let e = expurgate_scored(&dummy_code(3), &scores(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(e.kept, vec![0, 2]);
        assert_abs_diff_eq!(e.eps4, 1.0, epsilon = 1e-12);
        let z = expurgate_scored(&dummy_code(6), &scores(&[0.0; 6])).unwrap();
        assert_eq!(z.kept.len(), 4);
        assert_eq!(z.eps4, 0.0);
    }

    proptest! {
        #[test]
        fn kept_scores_below_eps4(v in prop::collection::vec(0.0f64..3.0, 1..40)) {
            let e = expurgate_scored(&dummy_code(v.len()), &scores(&v)).unwrap();
            prop_assert_eq!(e.kept.len(), (2 * v.len()).div_ceil(3));
            for &k in &e.kept {
                prop_assert!(v[k] <= e.eps4 + 1e-12);
            }
        }

        #[test]
        fn lemma8_decreasing_beyond_threshold(eps1 in 0.01f64..1.0, z1 in 0.1f64..5.0, z2 in 0.0f64..5.0, v in 0.01f64..4.0) {
            let t = lemma8_bound(1, eps1, z1, z2, v).threshold_n;
            let n0 = (t.ceil() as usize).max(1) + 1;
            let a = lemma8_bound(n0, eps1, z1, z2, v);
            let b = lemma8_bound(4 * n0, eps1, z1, z2, v);
            prop_assert!(!a.vacuous);
            prop_assert!(b.value < a.value);
        }
    }

    #[test]
    fn lemma8_special_cases() {
        let b = lemma8_bound(10, 0.1f64, 1.0, 1.0, 1.0);
        assert!(b.vacuous && b.value.is_infinite());
        assert_abs_diff_eq!(b.threshold_n, 200.0, epsilon = 1e-9);
        assert_eq!(lemma8_bound(10, 0.1, 1.0, 1.0, 0.0).value, 0.0);
    }

    #[test]
    fn noiseless_threshold_code_is_verifiable() {
        // I(P,W) = H(P) on a noiseless channel, so the rate hypothesis cannot hold;
        // the sampled code still lists exactly the sent word when codewords are distinct.
        let ctx = InfoContext::new(Channel::<f64>::noiseless(2).unwrap(), Distribution::uniform(2)).unwrap();
        assert!(matches!(schedule(&ctx, 0.7, 0.5), Err(Error::HypothesisViolated(Hypothesis::NonDecodable))));
        let mut words = sample_codewords(ctx.prior(), 6, 12, 5);
        words.sort();
        words.dedup();
        let code = ListCode::threshold(words, Distribution::uniform(2), 0.5, 2).unwrap();
        let (eps, _) = security::eps_a_exact(&code, ctx.channel(), &Budget::default()).unwrap();
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn build_is_deterministic_and_certifies_kept_set() {
        let ctx = bsc_ctx(0.1);
        let opts = BuildOptions { attempts: 2, budget: Budget::default(), ..Default::default() };
        let (code, rep) = build_secure_code(&ctx, 6, 0.7, 0.5, 11, &opts).unwrap();
        let (code2, rep2) = build_secure_code(&ctx, 6, 0.7, 0.5, 11, &opts).unwrap();
        assert_eq!(code, code2);
        assert_eq!(rep.to_json(), rep2.to_json());
        assert_eq!(rep.m, 19);
        assert_eq!(rep.expurgated_m, 13);
        let sec = rep.security.as_ref().unwrap();
        assert!(sec.delta_b <= rep.delta_b_bound.unwrap().bound + 1e-12);
        assert!(rep.lemma8_violations.is_empty());
        assert_abs_diff_eq!(rep.post_delta_b, sec.delta_b, epsilon = 0.0);
    }

    #[test]
    fn union_bound_on_sampled_codes() {
        let ctx = bsc_ctx(0.1);
        let s = schedule(&ctx, 0.7, 0.5).unwrap();
        for seed in 0..5 {
            let code = sample_code(&ctx, 6, &s, seed).unwrap();
            let ub = security::union_bound(&code, ctx.channel(), &Budget::default()).unwrap();
            assert!(ub.holds(), "{ub:?}");
        }
    }
}

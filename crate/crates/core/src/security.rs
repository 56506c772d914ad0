//! Evaluation of the four security parameters of a list code.
//!
//! * `ε_A = max_m Pr[m ∉ list(Y) | φ(m)]` (verifiability),
//! * `δ_B = (1/M) Σ_y max_m W^n(y|φ(m))` (best single-guess success),
//! * `δ_C = max_m max_{m'≠m} Pr[m' ∈ list(Y) | φ(m)]` (honest sender),
//! * `δ_D = max_m max{max_{m'≠m} Pr[m' ∈ list | x] : Pr[m ∈ list | x] >= 1/2}`
//!   over all input blocks `x` (dishonest sender).
//!
//! Exact values enumerate the output space in fixed-size chunks; chunks run
//! in parallel and are merged in index order, so results do not depend on
//! the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::Channel;
use crate::codes::{EncoderTable, LikelihoodCache, ListCode};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::region::{meta_converse_from_parts, MetaConverse};
use crate::rng::{derive_seed, rng_from_seed, sample_index};
use crate::words::{advance, word_count, word_count_f64, word_from_index, Word};

const CHUNK: u64 = 1 << 12;
const DEFAULT_WORDS: u64 = 1 << 20;
const DEFAULT_WORK: u64 = 1 << 32;

/// Limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    /// Largest `|Y|^n` (and `|X|^n` for the δ_D search) enumerated exactly.
    pub words: u64,
    /// Largest estimated operation count for quadratic passes.
    pub work: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { words: DEFAULT_WORDS, work: DEFAULT_WORK }
    }
}

impl Budget {
    /// Defaults overridden by `SLX_BUDGET` (words) and `SLX_WORK_BUDGET`.
    pub fn from_env() -> Self {
        let read = |key: &str| std::env::var(key).ok().and_then(|v| v.trim().parse::<u64>().ok());
        let d = Self::default();
        Self {
            words: read("SLX_BUDGET").unwrap_or(d.words),
            work: read("SLX_WORK_BUDGET").unwrap_or(d.work),
        }
    }

    pub fn words(&self, k: usize, n: usize) -> Result<u64> {
        match word_count(k, n) {
            Some(c) if c <= self.words => Ok(c),
            _ => Err(Error::BudgetExceeded { required: word_count_f64(k, n), budget: self.words }),
        }
    }

    pub fn work(&self, required: f64) -> Result<()> {
        if required > self.work as f64 {
            return Err(Error::BudgetExceeded { required, budget: self.work });
        }
        Ok(())
    }

    pub fn allows_outputs<T: Real>(&self, code: &ListCode<T>, ch: &Channel<T>) -> bool {
        self.words(ch.output_size(), code.n()).is_ok()
    }

    pub fn allows_delta_d<T: Real>(&self, code: &ListCode<T>, ch: &Channel<T>) -> bool {
        delta_d_cost(code, ch, self).is_ok()
    }
}

/// Whether the `M × M` membership matrix for `δ_C` fits the work budget.
pub fn delta_c_fits<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> bool {
    match budget.words(ch.output_size(), code.n()) {
        Ok(total) => budget.work(total as f64 * code.m() as f64 * code.l() as f64).is_ok(),
        Err(_) => false,
    }
}

fn delta_d_cost<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<(u64, u64)> {
    let ny = budget.words(ch.output_size(), code.n())?;
    let nx = budget.words(ch.input_size(), code.n())?;
    budget.work(nx as f64 * ny as f64 * (1.0 + code.l() as f64))?;
    Ok((nx, ny))
}

/// What an exact pass accumulates beyond the per-message hit probabilities.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PassSpec<'c> {
    pub matrix: bool,
    pub info: bool,
    pub classes: Option<(&'c [usize], usize)>,
    pub union: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct PassTotals<T: Real> {
    /// `Σ_y W(y|φ(m)) 1[m ∈ list(y)]`.
    pub hit: Vec<T>,
    /// `Σ_y max_m W(y|φ(m))`.
    pub best_single: T,
    /// Row-major `[m][m'] = Pr[m' ∈ list | φ(m)]`.
    pub matrix: Vec<T>,
    /// `H(Y^n)` with the message uniform.
    pub output_entropy: T,
    /// `H(Y^n | X^n)`.
    pub conditional_entropy: T,
    /// `Σ_y Σ_m P(m,y)^2 / P(y)`.
    pub collision: T,
    /// `Σ_y Σ_b P(b,y) log2 P(b|y)` = `-H(B|Y)` for the class labels.
    pub class_neg_equivocation: T,
    pub class_mass: Vec<T>,
    /// `Σ_y W(y|φ(m)) 1[m passes the threshold]`.
    pub cand_self: Vec<T>,
    /// `Σ_y W(y|φ(m)) #{threshold candidates at y}`.
    pub cand_count: Vec<T>,
}

impl<T: Real> PassTotals<T> {
    fn zeros(m: usize, spec: &PassSpec<'_>) -> Self {
        Self {
            hit: vec![T::zero(); m],
            best_single: T::zero(),
            matrix: if spec.matrix { vec![T::zero(); m * m] } else { Vec::new() },
            output_entropy: T::zero(),
            conditional_entropy: T::zero(),
            collision: T::zero(),
            class_neg_equivocation: T::zero(),
            class_mass: vec![T::zero(); spec.classes.map(|c| c.1).unwrap_or(0)],
            cand_self: if spec.union { vec![T::zero(); m] } else { Vec::new() },
            cand_count: if spec.union { vec![T::zero(); m] } else { Vec::new() },
        }
    }

    fn merge(&mut self, o: &Self) {
        fn add<T: Real>(a: &mut [T], b: &[T]) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = *x + *y;
            }
        }
        add(&mut self.hit, &o.hit);
        add(&mut self.matrix, &o.matrix);
        add(&mut self.class_mass, &o.class_mass);
        add(&mut self.cand_self, &o.cand_self);
        add(&mut self.cand_count, &o.cand_count);
        self.best_single = self.best_single + o.best_single;
        self.output_entropy = self.output_entropy + o.output_entropy;
        self.conditional_entropy = self.conditional_entropy + o.conditional_entropy;
        self.collision = self.collision + o.collision;
        self.class_neg_equivocation = self.class_neg_equivocation + o.class_neg_equivocation;
    }
}

/// Runs `f(start, len)` over `[0, total)` in fixed chunks; results in order.
pub(crate) fn chunked<R: Send>(total: u64, f: impl Fn(u64, u64) -> R + Sync) -> Vec<R> {
    let chunks = total.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            f(start, CHUNK.min(total - start))
        })
        .collect()
}

/// One exhaustive sweep over `Y^n` accumulating the requested statistics.
pub(crate) fn exact_pass<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    budget: &Budget,
    spec: PassSpec<'_>,
) -> Result<PassTotals<T>> {
    code.check_channel(ch)?;
    let ky = ch.output_size();
    let n = code.n();
    let total = budget.words(ky, n)?;
    let m = code.m();
    if spec.matrix {
        budget.work(total as f64 * m as f64 * code.l() as f64)?;
    }
    if spec.union && code.decoder(ch)?.threshold_candidates().is_none() {
        return Err(Error::InvalidArgument("union bound needs a threshold decoder".into()));
    }
    let table = EncoderTable::new(code.encoder());
    let inv_m = T::one() / T::from_count(m);
    let full = spec.matrix || spec.info || spec.classes.is_some() || spec.union;
    let parts = chunked(total, |start, len| {
        let mut acc = PassTotals::zeros(m, &spec);
        let mut dec = code.decoder_unchecked(ch);
        let mut cache = LikelihoodCache::new(ch, &table.words, n, None);
        let mut y = word_from_index(start, ky, n);
        let mut list = Vec::new();
        let mut p = vec![T::zero(); m];
        let mut class_p = vec![T::zero(); acc.class_mass.len()];
        for _ in 0..len {
            let (ll, _) = cache.update(&y);
            dec.decode_unchecked(&y, &mut list);
            if full {
                let mut best = T::zero();
                for (msg, slot) in p.iter_mut().enumerate() {
                    *slot = table.message_ll(msg, ll).exp2();
                    best = best.max(*slot);
                }
                acc.best_single = acc.best_single + best;
                for &msg in &list {
                    acc.hit[msg] = acc.hit[msg] + p[msg];
                }
            } else {
                let best = match &table.single {
                    Some(_) => ll.iter().copied().fold(T::neg_infinity(), T::max),
                    None => (0..m).map(|msg| table.message_ll(msg, ll)).fold(T::neg_infinity(), T::max),
                };
                acc.best_single = acc.best_single + best.exp2();
                for &msg in &list {
                    acc.hit[msg] = acc.hit[msg] + table.message_ll(msg, ll).exp2();
                }
            }
            if spec.matrix {
                for (msg, &pm) in p.iter().enumerate() {
                    if pm > T::zero() {
                        let row = &mut acc.matrix[msg * m..(msg + 1) * m];
                        for &other in &list {
                            row[other] = row[other] + pm;
                        }
                    }
                }
            }
            if spec.union {
                let cands = dec.threshold_candidates().unwrap_or(&[]);
                let count = T::from_count(cands.len());
                for (msg, &pm) in p.iter().enumerate() {
                    acc.cand_count[msg] = acc.cand_count[msg] + pm * count;
                }
                for &c in cands {
                    acc.cand_self[c] = acc.cand_self[c] + p[c];
                }
            }
            if spec.info || spec.classes.is_some() {
                let py: T = p.iter().copied().sum::<T>() * inv_m;
                if py > T::zero() {
                    if spec.info {
                        acc.output_entropy = acc.output_entropy - py * py.log2();
                        let mut cond = T::zero();
                        let mut coll = T::zero();
                        for &pm in &p {
                            if pm > T::zero() {
                                cond = cond - pm * pm.log2();
                                let joint = pm * inv_m;
                                coll = coll + joint * joint;
                            }
                        }
                        acc.conditional_entropy = acc.conditional_entropy + cond * inv_m;
                        acc.collision = acc.collision + coll / py;
                    }
                    if let Some((labels, _)) = spec.classes {
                        class_p.iter_mut().for_each(|v| *v = T::zero());
                        for (msg, &pm) in p.iter().enumerate() {
                            class_p[labels[msg]] = class_p[labels[msg]] + pm * inv_m;
                        }
                        for (b, &pb) in class_p.iter().enumerate() {
                            if pb > T::zero() {
                                acc.class_neg_equivocation = acc.class_neg_equivocation + pb * (pb / py).log2();
                                acc.class_mass[b] = acc.class_mass[b] + pb;
                            }
                        }
                    }
                }
            }
            advance(&mut y, ky);
        }
        acc
    });
    let mut totals = PassTotals::zeros(m, &spec);
    for part in &parts {
        totals.merge(part);
    }
    Ok(totals)
}

/// How a reported value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
    Heuristic { restarts: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct PerMessage<T: Real = f64> {
    pub eps_a: Vec<T>,
    pub delta_c: Vec<T>,
    pub delta_d: Vec<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SecurityReport<T: Real = f64> {
    pub eps_a: T,
    pub delta_b: T,
    pub delta_c: T,
    pub delta_d: T,
    /// Method for `eps_a`, `delta_b`, `delta_c`.
    pub method: Method,
    pub delta_d_method: Method,
    /// `delta_d` is the best value found by a search, not the maximum.
    pub delta_d_is_lower_bound: bool,
    /// Half-widths of 95% intervals for `[eps_a, delta_b, delta_c]` (Monte-Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci95: Option<[T; 3]>,
    /// Messages with no input block keeping them listed with probability >= 1/2.
    pub empty_feasible: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_message: Option<PerMessage<T>>,
}

impl<T: Real> SecurityReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn max_of<T: Real>(v: &[T]) -> T {
    v.iter().copied().fold(T::zero(), T::max)
}

fn eps_from_hits<T: Real>(hit: &[T]) -> Vec<T> {
    hit.iter().map(|&h| (T::one() - h).max(T::zero())).collect()
}

fn delta_c_from_matrix<T: Real>(matrix: &[T], m: usize) -> Vec<T> {
    (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i)
                .map(|j| matrix[i * m + j])
                .fold(T::zero(), T::max)
                .min(T::one())
        })
        .collect()
}

/// `ε_A` and `ε_{A,m}` by enumeration of `Y^n`.
pub fn eps_a_exact<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<(T, Vec<T>)> {
    let t = exact_pass(code, ch, budget, PassSpec::default())?;
    let per = eps_from_hits(&t.hit);
    Ok((max_of(&per), per))
}

/// `δ_B = (1/M) Σ_y max_m W^n(y|φ(m))`: the success of the best single guess.
pub fn delta_b_exact<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<T> {
    let t = exact_pass(code, ch, budget, PassSpec::default())?;
    Ok((t.best_single / T::from_count(code.m())).min(T::one()))
}

/// Per-message `ε_{A,m}` and `δ_B` from a single pass.
pub fn eps_a_and_delta_b_exact<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<(Vec<T>, T)> {
    let t = exact_pass(code, ch, budget, PassSpec::default())?;
    Ok((eps_from_hits(&t.hit), (t.best_single / T::from_count(code.m())).min(T::one())))
}

/// `δ_C` and `δ_{C,m}`.
pub fn delta_c_exact<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<(T, Vec<T>)> {
    let t = exact_pass(code, ch, budget, PassSpec { matrix: true, ..Default::default() })?;
    let per = delta_c_from_matrix(&t.matrix, code.m());
    Ok((max_of(&per), per))
}

/// Result of the dishonest-sender maximization.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaD<T: Real = f64> {
    pub value: T,
    pub per_message: Vec<T>,
    /// Maximizing input block per message (`None` when infeasible).
    pub witnesses: Vec<Option<Word>>,
    /// Messages whose feasible set was empty (reported as 0).
    pub empty_feasible: Vec<usize>,
    pub lower_bound: bool,
}

impl<T: Real> DeltaD<T> {
    /// Input block attaining `value`, with the message it keeps listed.
    pub fn best_witness(&self) -> Option<(usize, &Word)> {
        let mut best: Option<(usize, &Word)> = None;
        let mut val = T::neg_infinity();
        for (m, w) in self.witnesses.iter().enumerate() {
            if let Some(w) = w {
                if self.per_message[m] > val {
                    val = self.per_message[m];
                    best = Some((m, w));
                }
            }
        }
        best
    }
}

/// Lists for every output word (index order).
fn all_lists<T: Real>(code: &ListCode<T>, ch: &Channel<T>, total: u64) -> Vec<Vec<u32>> {
    let ky = ch.output_size();
    let n = code.n();
    chunked(total, |start, len| {
        let mut dec = code.decoder_unchecked(ch);
        let mut y = word_from_index(start, ky, n);
        let mut list = Vec::new();
        let mut out = Vec::with_capacity(len as usize);
        for _ in 0..len {
            dec.decode_unchecked(&y, &mut list);
            out.push(list.iter().map(|&v| v as u32).collect());
            advance(&mut y, ky);
        }
        out
    })
    .into_iter()
    .flatten()
    .collect()
}

fn memberships_from_lists<T: Real>(lists: &[Vec<u32>], dist: &[T], p: &mut [T]) {
    p.iter_mut().for_each(|v| *v = T::zero());
    for (list, &w) in lists.iter().zip(dist) {
        if w > T::zero() {
            for &msg in list {
                p[msg as usize] = p[msg as usize] + w;
            }
        }
    }
}

/// Largest and second-largest entries with the argmax (lowest index on ties).
fn top_two<T: Real>(p: &[T]) -> (usize, T, T) {
    let mut arg = 0;
    let mut first = T::neg_infinity();
    let mut second = T::neg_infinity();
    for (i, &v) in p.iter().enumerate() {
        if v > first {
            second = first;
            first = v;
            arg = i;
        } else if v > second {
            second = v;
        }
    }
    (arg, first, second)
}

/// `max_{m'≠m} p_{m'}` for every `m` with `p_m >= 1/2`, via the top two entries.
fn feasible_values<T: Real>(p: &[T]) -> impl Iterator<Item = (usize, T)> + '_ {
    let (arg, first, second) = top_two(p);
    let half = T::lit(0.5);
    p.iter().enumerate().filter(move |(_, v)| **v >= half).map(move |(m, _)| {
        let other = if m == arg { second } else { first };
        (m, other.max(T::zero()).min(T::one()))
    })
}

/// `δ_D` by exhausting every input block.
pub fn delta_d_exact<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<DeltaD<T>> {
    code.check_channel(ch)?;
    let (nx, ny) = delta_d_cost(code, ch, budget)?;
    let lists = all_lists(code, ch, ny);
    let m = code.m();
    let kx = ch.input_size();
    let n = code.n();
    let parts = chunked(nx, |start, len| {
        let mut best: Vec<(T, Option<u64>)> = vec![(T::neg_infinity(), None); m];
        let mut p = vec![T::zero(); m];
        for idx in start..start + len {
            let x = word_from_index(idx, kx, n);
            memberships_from_lists(&lists, &ch.block_output_dist(&x), &mut p);
            for (msg, v) in feasible_values(&p) {
                if v > best[msg].0 {
                    best[msg] = (v, Some(idx));
                }
            }
        }
        best
    });
    let mut best: Vec<(T, Option<u64>)> = vec![(T::neg_infinity(), None); m];
    for part in parts {
        for (b, c) in best.iter_mut().zip(part) {
            if c.0 > b.0 {
                *b = c;
            }
        }
    }
    Ok(finish_delta_d(best, kx, n, false))
}

fn finish_delta_d<T: Real>(best: Vec<(T, Option<u64>)>, kx: usize, n: usize, lower_bound: bool) -> DeltaD<T> {
    let empty_feasible: Vec<usize> = best
        .iter()
        .enumerate()
        .filter(|(_, b)| b.1.is_none())
        .map(|(i, _)| i)
        .collect();
    let per_message: Vec<T> = best.iter().map(|b| if b.1.is_some() { b.0 } else { T::zero() }).collect();
    DeltaD {
        value: max_of(&per_message),
        per_message,
        witnesses: best.iter().map(|b| b.1.map(|i| word_from_index(i, kx, n))).collect(),
        empty_feasible,
        lower_bound,
    }
}

/// Maximizes `objective(memberships(x))` over every input block; `None`
/// values are skipped. Returns the best value with its first witness.
pub(crate) fn maximize_over_inputs<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    budget: &Budget,
    objective: impl Fn(&[T]) -> Option<T> + Sync,
) -> Result<Option<(T, Word)>> {
    code.check_channel(ch)?;
    let (nx, ny) = delta_d_cost(code, ch, budget)?;
    let lists = all_lists(code, ch, ny);
    let kx = ch.input_size();
    let n = code.n();
    let m = code.m();
    let parts = chunked(nx, |start, len| {
        let mut best: Option<(T, u64)> = None;
        let mut p = vec![T::zero(); m];
        for idx in start..start + len {
            memberships_from_lists(&lists, &ch.block_output_dist(&word_from_index(idx, kx, n)), &mut p);
            if let Some(v) = objective(&p) {
                if best.is_none_or(|b| v > b.0) {
                    best = Some((v, idx));
                }
            }
        }
        best
    });
    let mut best: Option<(T, u64)> = None;
    for c in parts.into_iter().flatten() {
        if best.is_none_or(|b| c.0 > b.0) {
            best = Some(c);
        }
    }
    Ok(best.map(|(v, idx)| (v, word_from_index(idx, kx, n))))
}

/// Settings for [`delta_d_search`].
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Random starting blocks in addition to every codeword.
    pub restarts: usize,
    pub seed: u64,
    /// Samples per membership estimate when `|Y|^n` is over budget.
    pub trials: u64,
    pub max_steps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, trials: 2000, max_steps: 64 }
    }
}

enum MembershipOracle<'a, T: Real> {
    Exact(Vec<Vec<u32>>),
    Sampled { code: &'a ListCode<T>, trials: u64 },
}

impl<'a, T: Real> MembershipOracle<'a, T> {
    fn eval(&self, ch: &Channel<T>, x: &[usize], seed: u64, p: &mut [T]) {
        match self {
            MembershipOracle::Exact(lists) => memberships_from_lists(lists, &ch.block_output_dist(x), p),
            MembershipOracle::Sampled { code, trials } => {
                let mut dec = code.decoder_unchecked(ch);
                let mut rng = rng_from_seed(seed);
                let mut counts = vec![0u64; p.len()];
                let mut list = Vec::new();
                for _ in 0..*trials {
                    let y = ch.sample_output(x, &mut rng);
                    dec.decode_unchecked(&y, &mut list);
                    for &msg in &list {
                        counts[msg] += 1;
                    }
                }
                for (v, c) in p.iter_mut().zip(counts) {
                    *v = T::from_count(c as usize) / T::from_count(*trials as usize);
                }
            }
        }
    }
}

/// Search score: feasible blocks score their best cross-membership (>= 0),
/// infeasible ones `max_m p_m - 1` (< 0) to steer toward feasibility.
fn score<T: Real>(p: &[T]) -> (T, Option<usize>) {
    let mut best: (T, Option<usize>) = (T::neg_infinity(), None);
    for (m, v) in feasible_values(p) {
        if v > best.0 {
            best = (v, Some(m));
        }
    }
    if best.1.is_none() {
        let (_, first, _) = top_two(p);
        best.0 = first - T::one();
    }
    best
}

/// Hill-climbing lower bound on `δ_D` for instances too large to exhaust.
///
/// Starts from every codeword (the most likely word of stochastic rows) and
/// from `restarts` random blocks; moves change one coordinate at a time.
/// Memberships are exact when `|Y|^n` fits the budget, else sampled.
pub fn delta_d_search<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    opts: SearchOptions,
    budget: &Budget,
) -> Result<DeltaD<T>> {
    code.check_channel(ch)?;
    let n = code.n();
    let kx = ch.input_size();
    let m = code.m();
    let oracle = match budget.words(ch.output_size(), n) {
        Ok(total) => MembershipOracle::Exact(all_lists(code, ch, total)),
        Err(_) => {
            if opts.trials == 0 {
                return Err(Error::InsufficientTrials);
            }
            MembershipOracle::Sampled { code, trials: opts.trials }
        }
    };
    let mut starts: Vec<Word> = (0..m)
        .map(|msg| {
            let dist = code.encoder().word_dist(msg);
            let mut best = 0;
            for (i, (_, p)) in dist.iter().enumerate() {
                if *p > dist[best].1 {
                    best = i;
                }
            }
            dist[best].0.clone()
        })
        .collect();
    let mut rng = rng_from_seed(derive_seed(opts.seed, &[0]));
    for _ in 0..opts.restarts {
        starts.push((0..n).map(|_| rng.gen_range(0..kx)).collect());
    }
    let results: Vec<Vec<(T, Option<Word>)>> = starts
        .par_iter()
        .enumerate()
        .map(|(s, start)| {
            let mut best: Vec<(T, Option<Word>)> = vec![(T::neg_infinity(), None); m];
            let mut p = vec![T::zero(); m];
            let mut evals = 0u64;
            let mut eval = |x: &[usize], p: &mut [T]| {
                evals += 1;
                oracle.eval(ch, x, derive_seed(opts.seed, &[1, s as u64, evals]), p);
            };
            let record = |x: &[usize], p: &[T], best: &mut Vec<(T, Option<Word>)>| {
                for (msg, v) in feasible_values(p) {
                    if v > best[msg].0 {
                        best[msg] = (v, Some(x.to_vec()));
                    }
                }
            };
            let mut x = start.clone();
            eval(&x, &mut p);
            record(&x, &p, &mut best);
            let mut current = score(&p).0;
            for _ in 0..opts.max_steps {
                let mut step: Option<(usize, usize, T)> = None;
                for pos in 0..n {
                    let keep = x[pos];
                    for sym in (0..kx).filter(|&v| v != keep) {
                        x[pos] = sym;
                        eval(&x, &mut p);
                        record(&x, &p, &mut best);
                        let sc = score(&p).0;
                        if sc > step.map(|s| s.2).unwrap_or(current) {
                            step = Some((pos, sym, sc));
                        }
                    }
                    x[pos] = keep;
                }
                match step {
                    Some((pos, sym, sc)) => {
                        x[pos] = sym;
                        current = sc;
                    }
                    None => break,
                }
            }
            best
        })
        .collect();
    let mut best: Vec<(T, Option<Word>)> = vec![(T::neg_infinity(), None); m];
    for r in results {
        for (b, c) in best.iter_mut().zip(r) {
            if c.0 > b.0 {
                *b = c;
            }
        }
    }
    let empty_feasible = best.iter().enumerate().filter(|(_, b)| b.1.is_none()).map(|(i, _)| i).collect();
    let per_message: Vec<T> = best.iter().map(|b| if b.1.is_some() { b.0 } else { T::zero() }).collect();
    Ok(DeltaD {
        value: max_of(&per_message),
        per_message,
        witnesses: best.into_iter().map(|b| b.1).collect(),
        empty_feasible,
        lower_bound: true,
    })
}

/// All four parameters exactly (δ_D exhaustively).
pub fn evaluate_exact<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<SecurityReport<T>> {
    let t = exact_pass(code, ch, budget, PassSpec { matrix: true, ..Default::default() })?;
    let d = delta_d_exact(code, ch, budget)?;
    Ok(report_from_pass(code, &t, d, Method::Exact))
}

/// `ε_A`, `δ_B`, `δ_C` exactly and δ_D by [`delta_d_search`].
pub fn evaluate_exact_with_search<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    opts: SearchOptions,
    budget: &Budget,
) -> Result<SecurityReport<T>> {
    let t = exact_pass(code, ch, budget, PassSpec { matrix: true, ..Default::default() })?;
    let d = delta_d_search(code, ch, opts, budget)?;
    let method = Method::Heuristic { restarts: opts.restarts, seed: opts.seed };
    Ok(report_from_pass(code, &t, d, method))
}

fn report_from_pass<T: Real>(code: &ListCode<T>, t: &PassTotals<T>, d: DeltaD<T>, dm: Method) -> SecurityReport<T> {
    let m = code.m();
    let eps = eps_from_hits(&t.hit);
    let dc = delta_c_from_matrix(&t.matrix, m);
    SecurityReport {
        eps_a: max_of(&eps),
        delta_b: (t.best_single / T::from_count(m)).min(T::one()),
        delta_c: max_of(&dc),
        delta_d: d.value,
        method: Method::Exact,
        delta_d_method: dm,
        delta_d_is_lower_bound: d.lower_bound,
        ci95: None,
        empty_feasible: d.empty_feasible,
        per_message: Some(PerMessage { eps_a: eps, delta_c: dc, delta_d: d.per_message }),
    }
}

/// A sampled probability with its 95% half-width.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate<T: Real = f64> {
    pub value: T,
    pub ci95: T,
    pub trials: u64,
}

impl<T: Real> Estimate<T> {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            value: T::lit(p),
            ci95: T::lit(1.96 * (p * (1.0 - p) / trials as f64).sqrt()),
            trials,
        }
    }

    /// Binomial standard deviation of the estimate under probability `p`.
    pub fn sigma_under(p: T, trials: u64) -> T {
        (p * (T::one() - p) / T::from_count(trials as usize)).max(T::zero()).sqrt()
    }
}

/// Draws `x ~ φ(m)` for stochastic encoders.
pub(crate) fn sample_codeword<T: Real, R: Rng>(code: &ListCode<T>, m: usize, rng: &mut R) -> Word {
    let dist = code.encoder().word_dist(m);
    if dist.len() == 1 {
        return dist.into_iter().next().map(|d| d.0).unwrap_or_default();
    }
    let probs: Vec<T> = dist.iter().map(|d| d.1).collect();
    dist[sample_index(&probs, rng)].0.clone()
}

/// Maximum-likelihood single guess (lowest index on ties).
fn ml_guess<T: Real>(table: &EncoderTable<T>, cache: &mut LikelihoodCache<'_, T>, y: &[usize]) -> usize {
    let (ll, _) = cache.update(y);
    let mut best = 0;
    let mut val = table.message_ll(0, ll);
    for m in 1..table.rows.len() {
        let v = table.message_ll(m, ll);
        if v > val {
            val = v;
            best = m;
        }
    }
    best
}

/// `Pr[m ∈ list(Y)]` for `Y ~ W^n(.|x)`, exactly.
pub fn membership_prob<T: Real>(code: &ListCode<T>, ch: &Channel<T>, m: usize, x: &[usize], budget: &Budget) -> Result<T> {
    code.check_channel(ch)?;
    if m >= code.m() {
        return Err(Error::InvalidArgument(format!("message {m} outside 0..{}", code.m())));
    }
    crate::words::check_word(x, ch.input_size(), code.n())?;
    let ky = ch.output_size();
    let n = code.n();
    let total = budget.words(ky, n)?;
    let parts = chunked(total, |start, len| {
        let mut dec = code.decoder_unchecked(ch);
        let mut y = word_from_index(start, ky, n);
        let mut list = Vec::new();
        let mut acc = T::zero();
        for _ in 0..len {
            dec.decode_unchecked(&y, &mut list);
            if list.contains(&m) {
                acc = acc + ch.log2_product_prob_unchecked(x, &y).exp2();
            }
            advance(&mut y, ky);
        }
        acc
    });
    Ok(parts.into_iter().fold(T::zero(), |a, b| a + b).min(T::one()))
}

/// Sampled `Pr[m ∈ list(Y)]` for `Y ~ W^n(.|x)`.
pub fn membership_prob_mc<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    m: usize,
    x: &[usize],
    trials: u64,
    seed: u64,
) -> Result<Estimate<T>> {
    code.check_channel(ch)?;
    crate::words::check_word(x, ch.input_size(), code.n())?;
    if trials == 0 {
        return Err(Error::InsufficientTrials);
    }
    let mut dec = code.decoder_unchecked(ch);
    let mut rng = rng_from_seed(seed);
    let mut list = Vec::new();
    let mut hits = 0;
    for _ in 0..trials {
        let y = ch.sample_output(x, &mut rng);
        dec.decode_unchecked(&y, &mut list);
        hits += list.contains(&m) as u64;
    }
    Ok(Estimate::from_counts(hits, trials))
}

/// Per-message sampled statistics.
struct MessageSamples {
    hits: u64,
    ml_hits: u64,
    others: Vec<u64>,
}

fn sample_message<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    table: &EncoderTable<T>,
    m: usize,
    trials: u64,
    seed: u64,
    track_others: bool,
) -> MessageSamples {
    let mut rng = rng_from_seed(seed);
    let mut dec = code.decoder_unchecked(ch);
    let mut cache = LikelihoodCache::new(ch, &table.words, code.n(), None);
    let mut list = Vec::new();
    let mut out = MessageSamples {
        hits: 0,
        ml_hits: 0,
        others: if track_others { vec![0; code.m()] } else { Vec::new() },
    };
    for _ in 0..trials {
        let x = sample_codeword(code, m, &mut rng);
        let y = ch.sample_output(&x, &mut rng);
        dec.decode_unchecked(&y, &mut list);
        out.hits += list.contains(&m) as u64;
        if track_others {
            for &o in &list {
                out.others[o] += 1;
            }
        }
        out.ml_hits += (ml_guess(table, &mut cache, &y) == m) as u64;
    }
    out
}

/// Monte-Carlo report: `trials` samples per message for ε_A, δ_B and δ_C;
/// δ_D by [`delta_d_search`] with sampled memberships.
pub fn evaluate_monte_carlo<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    trials: u64,
    seed: u64,
    search: SearchOptions,
    budget: &Budget,
) -> Result<SecurityReport<T>> {
    code.check_channel(ch)?;
    if trials == 0 {
        return Err(Error::InsufficientTrials);
    }
    let m = code.m();
    let table = EncoderTable::new(code.encoder());
    let samples: Vec<MessageSamples> = (0..m)
        .into_par_iter()
        .map(|msg| sample_message(code, ch, &table, msg, trials, derive_seed(seed, &[msg as u64]), true))
        .collect();
    let t = trials as f64;
    let eps: Vec<T> = samples.iter().map(|s| T::lit(1.0 - s.hits as f64 / t)).collect();
    let dc: Vec<T> = samples
        .iter()
        .enumerate()
        .map(|(msg, s)| {
            let best = s.others.iter().enumerate().filter(|(o, _)| *o != msg).map(|(_, c)| *c).max().unwrap_or(0);
            T::lit(best as f64 / t)
        })
        .collect();
    let ml: u64 = samples.iter().map(|s| s.ml_hits).sum();
    let db = Estimate::<T>::from_counts(ml, trials * m as u64);
    let half = |p: T| T::lit(1.96) * Estimate::sigma_under(p, trials);
    let eps_a = max_of(&eps);
    let delta_c = max_of(&dc);
    let d = delta_d_search(code, ch, SearchOptions { seed: derive_seed(seed, &[u64::MAX]), ..search }, budget)?;
    Ok(SecurityReport {
        eps_a,
        delta_b: db.value,
        delta_c,
        delta_d: d.value,
        method: Method::MonteCarlo { trials, seed },
        delta_d_method: Method::Heuristic { restarts: search.restarts, seed: search.seed },
        delta_d_is_lower_bound: true,
        ci95: Some([half(eps_a), db.ci95, half(delta_c)]),
        empty_feasible: d.empty_feasible,
        per_message: Some(PerMessage { eps_a: eps, delta_c: dc, delta_d: d.per_message }),
    })
}

/// Per-message `ε_{A,m}` by sampling, with the upper end of the 95% interval.
pub fn eps_a_monte_carlo<T: Real>(code: &ListCode<T>, ch: &Channel<T>, trials: u64, seed: u64) -> Result<Vec<Estimate<T>>> {
    code.check_channel(ch)?;
    if trials == 0 {
        return Err(Error::InsufficientTrials);
    }
    let m = code.m();
    (0..m)
        .into_par_iter()
        .map(|msg| {
            let mut rng = rng_from_seed(derive_seed(seed, &[msg as u64]));
            let mut dec = code.decoder_unchecked(ch);
            let mut list = Vec::new();
            let mut misses = 0;
            for _ in 0..trials {
                let x = sample_codeword(code, msg, &mut rng);
                let y = ch.sample_output(&x, &mut rng);
                dec.decode_unchecked(&y, &mut list);
                misses += (!list.contains(&msg)) as u64;
            }
            Ok(Estimate::from_counts(misses, trials))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossEntry<T: Real = f64> {
    pub condition: &'static str,
    pub exact: T,
    pub estimate: T,
    pub sigma: T,
    pub within: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckReport<T: Real = f64> {
    pub trials: u64,
    pub seed: u64,
    pub entries: Vec<CrossEntry<T>>,
}

impl<T: Real> CrosscheckReport<T> {
    pub fn all_within(&self) -> bool {
        self.entries.iter().all(|e| e.within)
    }
}

fn cross_entry<T: Real>(condition: &'static str, exact: T, successes: u64, trials: u64) -> CrossEntry<T> {
    let estimate = T::lit(successes as f64 / trials as f64);
    let sigma = Estimate::sigma_under(exact, trials);
    let within = if sigma > T::zero() {
        (estimate - exact).abs() <= T::lit(3.0) * sigma
    } else {
        (estimate - exact).abs() <= T::lit(1e-12)
    };
    CrossEntry { condition, exact, estimate, sigma, within }
}

/// Simulates the protocol events directly (send a message, decode, guess)
/// and compares them with the exact coding-theoretic values:
///
/// * (A): the worst message falls out of the list,
/// * (B): Bob's maximum-likelihood guess of a uniform message is right,
/// * (C): the worst wrong message enters the list of the worst sent message.
pub fn crosscheck_intuitive<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    trials: u64,
    seed: u64,
    budget: &Budget,
) -> Result<CrosscheckReport<T>> {
    if trials == 0 {
        return Err(Error::InsufficientTrials);
    }
    let t = exact_pass(code, ch, budget, PassSpec { matrix: true, ..Default::default() })?;
    let m = code.m();
    let eps = eps_from_hits(&t.hit);
    let worst_a = (0..m).fold(0, |b, i| if eps[i] > eps[b] { i } else { b });
    let (mut worst_c, mut worst_c_other, mut c_val) = (0, usize::MAX, T::neg_infinity());
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            if t.matrix[i * m + j] > c_val {
                c_val = t.matrix[i * m + j];
                worst_c = i;
                worst_c_other = j;
            }
        }
    }
    let table = EncoderTable::new(code.encoder());
    let sample_a = sample_message(code, ch, &table, worst_a, trials, derive_seed(seed, &[0]), false);
    let mut entries = vec![cross_entry("A", eps[worst_a], trials - sample_a.hits, trials)];

    let mut rng = rng_from_seed(derive_seed(seed, &[1]));
    let mut cache = LikelihoodCache::new(ch, &table.words, code.n(), None);
    let mut correct = 0;
    for _ in 0..trials {
        let msg = rng.gen_range(0..m);
        let x = sample_codeword(code, msg, &mut rng);
        let y = ch.sample_output(&x, &mut rng);
        correct += (ml_guess(&table, &mut cache, &y) == msg) as u64;
    }
    let delta_b = (t.best_single / T::from_count(m)).min(T::one());
    entries.push(cross_entry("B", delta_b, correct, trials));

    if worst_c_other != usize::MAX {
        let s = sample_message(code, ch, &table, worst_c, trials, derive_seed(seed, &[2]), true);
        entries.push(cross_entry("C", c_val.min(T::one()), s.others[worst_c_other], trials));
    }
    Ok(CrosscheckReport { trials, seed, entries })
}

/// `I(X^n;Y^n)`, `H2(M|Y)` and friends with the message uniform.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockInformation<T: Real = f64> {
    pub mutual_information: T,
    pub output_entropy: T,
    /// Collision (order-2 Rényi) conditional entropy `H2(M|Y)`.
    pub h2: T,
    pub avg_eps_a: T,
}

pub fn block_information<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<BlockInformation<T>> {
    let t = exact_pass(code, ch, budget, PassSpec { info: true, ..Default::default() })?;
    let eps = eps_from_hits(&t.hit);
    Ok(BlockInformation {
        mutual_information: (t.output_entropy - t.conditional_entropy).max(T::zero()),
        output_entropy: t.output_entropy,
        h2: -t.collision.log2(),
        avg_eps_a: eps.iter().copied().sum::<T>() / T::from_count(eps.len()),
    })
}

/// Meta-converse `log2(M/L) <= (I(X^n;Y^n) + h(1-ε)) / (1-ε)` with the
/// average verification error `ε` and the block information evaluated exactly.
pub fn meta_converse<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<MetaConverse<T>> {
    let bi = block_information(code, ch, budget)?;
    let mut mc = meta_converse_from_parts(code.m(), code.l(), bi.avg_eps_a, bi.mutual_information)?;
    mc.lhs = (T::from_count(code.m()) / T::from_count(code.l())).log2();
    Ok(mc)
}

/// Union bound on the verification error of a threshold decoder: per
/// message, `Pr[m fails the threshold] + (1/L) Σ_{j≠m} Pr[j passes]`.
#[derive(Debug, Clone, Serialize)]
pub struct UnionBound<T: Real = f64> {
    pub eps_a: Vec<T>,
    pub bound: Vec<T>,
    pub avg_eps_a: T,
    pub avg_bound: T,
}

impl<T: Real> UnionBound<T> {
    pub fn holds(&self) -> bool {
        let tol = T::lit(1e-12);
        self.avg_eps_a <= self.avg_bound + tol
            && self.eps_a.iter().zip(&self.bound).all(|(e, b)| *e <= *b + tol)
    }
}

pub fn union_bound<T: Real>(code: &ListCode<T>, ch: &Channel<T>, budget: &Budget) -> Result<UnionBound<T>> {
    let t = exact_pass(code, ch, budget, PassSpec { union: true, ..Default::default() })?;
    let l = T::from_count(code.l());
    let eps = eps_from_hits(&t.hit);
    let bound: Vec<T> = (0..code.m())
        .map(|m| (T::one() - t.cand_self[m]).max(T::zero()) + (t.cand_count[m] - t.cand_self[m]) / l)
        .collect();
    let avg = |v: &[T]| v.iter().copied().sum::<T>() / T::from_count(v.len());
    Ok(UnionBound { avg_eps_a: avg(&eps), avg_bound: avg(&bound), eps_a: eps, bound })
}

/// `I(B;Y)` for class labels `B = labels[M]` and `H2(M|Y)`, message uniform.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassLeakage<T: Real = f64> {
    pub class_information: T,
    pub h2: T,
}

pub fn class_leakage<T: Real>(
    code: &ListCode<T>,
    ch: &Channel<T>,
    labels: &[usize],
    classes: usize,
    budget: &Budget,
) -> Result<ClassLeakage<T>> {
    if labels.len() != code.m() || labels.iter().any(|&b| b >= classes) {
        return Err(Error::DimensionMismatch { expected: code.m(), got: labels.len() });
    }
    let t = exact_pass(code, ch, budget, PassSpec { info: true, classes: Some((labels, classes)), ..Default::default() })?;
    let hb = crate::info::entropy_of(&t.class_mass);
    Ok(ClassLeakage {
        class_information: (hb + t.class_neg_equivocation).max(T::zero()),
        h2: -t.collision.log2(),
    })
}

/// Exact membership probabilities of every message for one input block.
pub fn memberships_exact<T: Real>(code: &ListCode<T>, ch: &Channel<T>, x: &[usize], budget: &Budget) -> Result<Vec<T>> {
    code.check_channel(ch)?;
    crate::words::check_word(x, ch.input_size(), code.n())?;
    let total = budget.words(ch.output_size(), code.n())?;
    let lists = all_lists(code, ch, total);
    let mut p = vec![T::zero(); code.m()];
    memberships_from_lists(&lists, &ch.block_output_dist(x), &mut p);
    Ok(p)
}

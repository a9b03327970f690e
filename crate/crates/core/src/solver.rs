//! The k-Tree algorithm with multiset merges, per-level accounting and
//! solution recovery.
//!
//! Values are held as `i128` when `m` has at most 125 bits and as `BigInt`
//! otherwise; the choice is made once per run from `m` alone.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::io::{Read, Write};

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::params::{n_as_usize, Mode, ProblemParams};

/// Default cap on the total number of list elements across all levels.
pub const DEFAULT_MEMORY_CAP: u64 = 1 << 31;

/// Largest `m` (in bits) handled with `i128` arithmetic.
const NARROW_BITS: u64 = 125;

/// Arithmetic needed by the merge, over `i128` or `BigInt`.
pub trait Word: Clone + Ord + Send + Sync + Debug {
    fn from_bigint(v: &BigInt) -> Self;
    fn to_bigint(&self) -> BigInt;
    fn w_add(&self, o: &Self) -> Self;
    fn w_sub(&self, o: &Self) -> Self;
    fn w_neg(&self) -> Self;
    fn w_zero() -> Self;
    fn w_is_zero(&self) -> bool;
    fn w_abs_le(&self, bound: &Self) -> bool;
}

impl Word for i128 {
    fn from_bigint(v: &BigInt) -> Self {
        v.to_i128().expect("value exceeds the narrow word")
    }
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn w_add(&self, o: &Self) -> Self {
        self + o
    }
    fn w_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn w_neg(&self) -> Self {
        -self
    }
    fn w_zero() -> Self {
        0
    }
    fn w_is_zero(&self) -> bool {
        *self == 0
    }
    fn w_abs_le(&self, bound: &Self) -> bool {
        self.unsigned_abs() <= *bound as u128
    }
}

impl Word for BigInt {
    fn from_bigint(v: &BigInt) -> Self {
        v.clone()
    }
    fn to_bigint(&self) -> BigInt {
        self.clone()
    }
    fn w_add(&self, o: &Self) -> Self {
        self + o
    }
    fn w_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn w_neg(&self) -> Self {
        -self
    }
    fn w_zero() -> Self {
        Zero::zero()
    }
    fn w_is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn w_abs_le(&self, bound: &Self) -> bool {
        self.magnitude() <= bound.magnitude()
    }
}

/// Modulus data for centred reduction: `m` and `(m - 1) / 2`.
#[derive(Debug, Clone)]
struct Modulus<W> {
    m: W,
    half: W,
}

impl<W: Word> Modulus<W> {
    fn reduce(&self, v: W) -> W {
        if v > self.half {
            v.w_sub(&self.m)
        } else if v < self.half.w_neg() {
            v.w_add(&self.m)
        } else {
            v
        }
    }
}

/// One element of a merged list: its value and where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ElementRecord {
    pub value: BigInt,
    /// Index into the left child list, or the position in an input list.
    pub left: usize,
    /// Index into the right child list (equal to `left` at level 0).
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rec<W> {
    value: W,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Values {
    Narrow(Vec<Vec<i128>>),
    Wide(Vec<Vec<BigInt>>),
}

/// The `k` input lists of an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputLists {
    m: BigUint,
    k: u64,
    n: usize,
    seed: Option<u64>,
    values: Values,
}

fn narrow(m: &BigUint) -> bool {
    m.bits() <= NARROW_BITS
}

impl InputLists {
    /// Lists given explicitly; every value must lie in `<m>`.
    pub fn from_values(params: &ProblemParams, lists: Vec<Vec<BigInt>>) -> Result<InputLists> {
        let n = n_as_usize(&params.n)?;
        if lists.len() as u64 != params.k {
            return param(format!("expected {} lists, got {}", params.k, lists.len()));
        }
        let half = BigInt::from(&params.m >> 1u32);
        for (i, l) in lists.iter().enumerate() {
            if l.len() != n {
                return param(format!("list {} has {} entries, expected {n}", i + 1, l.len()));
            }
            if let Some(v) = l.iter().find(|v| v.magnitude() > half.magnitude()) {
                return param(format!("value {v} in list {} is outside <m>", i + 1));
            }
        }
        let values = if narrow(&params.m) {
            Values::Narrow(
                lists
                    .iter()
                    .map(|l| l.iter().map(i128::from_bigint).collect())
                    .collect(),
            )
        } else {
            Values::Wide(lists)
        };
        Ok(InputLists {
            m: params.m.clone(),
            k: params.k,
            n,
            seed: None,
            values,
        })
    }

    pub fn m(&self) -> &BigUint {
        &self.m
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Seed the lists were generated from, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Entry `j` (0-based) of list `i` (0-based).
    pub fn value(&self, i: usize, j: usize) -> BigInt {
        match &self.values {
            Values::Narrow(v) => BigInt::from(v[i][j]),
            Values::Wide(v) => v[i][j].clone(),
        }
    }

    pub fn to_bigint_lists(&self) -> Vec<Vec<BigInt>> {
        (0..self.k as usize)
            .map(|i| (0..self.n).map(|j| self.value(i, j)).collect())
            .collect()
    }

    fn check_against(&self, params: &ProblemParams) -> Result<()> {
        if self.m != params.m || self.k != params.k || BigUint::from(self.n) != params.n {
            return param("input lists do not match the parameters");
        }
        Ok(())
    }
}

/// RNG for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `k x n` values uniform on `<m>`, from stream 0 of `seed`.
pub fn generate_lists(params: &ProblemParams, seed: u64) -> Result<InputLists> {
    generate_lists_stream(params, seed, 0)
}

/// `k x n` values uniform on `<m>` from stream `stream` of `seed`.
///
/// Each value is a uniform draw from `[0, 2 floor(m/2)]` by rejection,
/// shifted down by `floor(m/2)`.
pub fn generate_lists_stream(params: &ProblemParams, seed: u64, stream: u64) -> Result<InputLists> {
    let n = n_as_usize(&params.n)?;
    let mut rng = stream_rng(seed, stream);
    let half = &params.m >> 1u32;
    let k = params.k as usize;
    let values = if narrow(&params.m) {
        let h = half.to_u128().expect("narrow m");
        let span = 2 * h;
        let h = h as i128;
        Values::Narrow(
            (0..k)
                .map(|_| (0..n).map(|_| rng.gen_range(0..=span) as i128 - h).collect())
                .collect(),
        )
    } else {
        let bound = &half * 2u32 + 1u32;
        let h = BigInt::from(half.clone());
        Values::Wide(
            (0..k)
                .map(|_| {
                    (0..n)
                        .map(|_| BigInt::from(rng.gen_biguint_below(&bound)) - &h)
                        .collect()
                })
                .collect(),
        )
    };
    Ok(InputLists {
        m: params.m.clone(),
        k: params.k,
        n,
        seed: Some(seed),
        values,
    })
}

/// Per-run record of list sizes, success and the recovered solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunTrace {
    /// `level_list_sizes[d][i] = |L^d_i|`.
    pub level_list_sizes: Vec<Vec<u64>>,
    pub total_size: u64,
    pub max_level_size: u64,
    pub success: bool,
    /// 1-based leaf indices of the first zero in canonical order.
    pub solution_indices: Option<Vec<u64>>,
    pub zero_count: u64,
    /// True when centred reduction could change a sum above the first level.
    pub wraps_beyond_first_level: bool,
}

impl RunTrace {
    fn from_sizes(
        sizes: Vec<Vec<u64>>,
        zero_count: u64,
        solution: Option<Vec<u64>>,
        wraps: bool,
    ) -> RunTrace {
        let per_level: Vec<u64> = sizes.iter().map(|l| l.iter().sum()).collect();
        RunTrace {
            total_size: per_level.iter().sum(),
            max_level_size: per_level.iter().copied().max().unwrap_or(0),
            success: zero_count > 0,
            solution_indices: solution,
            zero_count,
            level_list_sizes: sizes,
            wraps_beyond_first_level: wraps,
        }
    }
}

/// Limits applied while running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    /// Maximum total number of list elements across all levels.
    pub memory_cap: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }
}

/// Count the pairs a merge would emit, then emit them in canonical order.
fn merge_w<W: Word>(
    la: &[W],
    lb: &[W],
    tau: &W,
    modulus: Option<&Modulus<W>>,
    budget: u64,
    stage: &str,
) -> Result<Vec<Rec<W>>> {
    let mut order: Vec<u32> = (0..lb.len() as u32).collect();
    order.sort_by(|&x, &y| lb[x as usize].cmp(&lb[y as usize]).then(x.cmp(&y)));
    let sorted: Vec<&W> = order.iter().map(|&j| &lb[j as usize]).collect();
    let lower = |v: &W| sorted.partition_point(|b| *b < v);
    let upper = |v: &W| sorted.partition_point(|b| *b <= v);
    // each a contributes up to three disjoint windows of sorted positions
    // reduced sums never exceed (m-1)/2, and clamping keeps the windows disjoint
    let tau = match modulus {
        Some(md) if *tau > md.half => &md.half,
        _ => tau,
    };
    let windows = |a: &W| -> [(usize, usize); 3] {
        let lo = tau.w_neg().w_sub(a);
        let hi = tau.w_sub(a);
        let w0 = (lower(&lo), upper(&hi));
        match modulus {
            None => [w0, (0, 0), (0, 0)],
            Some(md) => [
                w0,
                (lower(&lo.w_add(&md.m)), upper(&hi.w_add(&md.m))),
                (lower(&lo.w_sub(&md.m)), upper(&hi.w_sub(&md.m))),
            ],
        }
    };
    let mut total: u64 = 0;
    for a in la {
        for (s, e) in windows(a) {
            total += e.saturating_sub(s) as u64;
        }
    }
    if total > budget {
        return Err(Error::Resource {
            stage: stage.to_string(),
            requested: total as u128,
            limit: budget as u128,
        });
    }
    let mut out = Vec::with_capacity(total as usize);
    for (i, a) in la.iter().enumerate() {
        for (s, e) in windows(a) {
            for pos in s..e {
                let j = order[pos];
                let mut v = a.w_add(&lb[j as usize]);
                if let Some(md) = modulus {
                    v = md.reduce(v);
                }
                debug_assert!(v.w_abs_le(tau), "merge emitted {v:?} beyond {tau:?}");
                out.push(Rec {
                    value: v,
                    left: i as u32,
                    right: j,
                });
            }
        }
    }
    out.sort_by(canonical);
    Ok(out)
}

fn canonical<W: Ord>(x: &Rec<W>, y: &Rec<W>) -> Ordering {
    x.value
        .cmp(&y.value)
        .then(x.left.cmp(&y.left))
        .then(x.right.cmp(&y.right))
}

/// All pairs `(a, b)` with `|a + b| <= tau`, as a multiset in canonical order.
///
/// With `modulus = Some(m)` the sum is first reduced into
/// `[-(m-1)/2, (m-1)/2]`; inputs must then lie in that range.
pub fn merge(
    la: &[BigInt],
    lb: &[BigInt],
    tau: &BigInt,
    modulus: Option<&BigUint>,
    memory_cap: u64,
) -> Result<Vec<ElementRecord>> {
    if tau.is_negative() {
        return param("threshold must be nonnegative");
    }
    if la.len() > u32::MAX as usize || lb.len() > u32::MAX as usize {
        return param("list too long");
    }
    let md = match modulus {
        Some(m) => {
            if !m.bit(0) {
                return param(format!("m must be odd for centred reduction, got {m}"));
            }
            let half = BigInt::from(m >> 1u32);
            if la.iter().chain(lb).any(|v| v.magnitude() > half.magnitude()) {
                return param("merge input outside the centred range");
            }
            Some(Modulus {
                m: BigInt::from(m.clone()),
                half,
            })
        }
        None => None,
    };
    let recs = merge_w(la, lb, tau, md.as_ref(), memory_cap, "merge")?;
    Ok(recs
        .into_iter()
        .map(|r| ElementRecord {
            value: r.value,
            left: r.left as usize,
            right: r.right as usize,
        })
        .collect())
}

/// Thresholds `tau_d` for `d = 0..=L` as signed integers.
fn thresholds(params: &ProblemParams) -> Vec<BigInt> {
    (0..=params.levels())
        .map(|d| BigInt::from(params.threshold(d)))
        .collect()
}

/// Whether reduction mod `m` can change a sum at some level `d >= 2`.
fn wraps_beyond_first_level(params: &ProblemParams, taus: &[BigInt]) -> bool {
    if params.mode != Mode::CenteredModSum {
        return false;
    }
    let half = BigInt::from(&params.m >> 1u32);
    taus.iter()
        .skip(1)
        .take(taus.len().saturating_sub(2))
        .any(|t| t * 2 > half)
}

fn run_w<W: Word>(
    params: &ProblemParams,
    leaves: &[Vec<W>],
    config: &SolverConfig,
) -> Result<RunTrace> {
    let taus: Vec<BigInt> = thresholds(params);
    let wraps = wraps_beyond_first_level(params, &taus);
    let taus_w: Vec<W> = taus.iter().map(W::from_bigint).collect();
    let modulus = (params.mode == Mode::CenteredModSum).then(|| Modulus {
        m: W::from_bigint(&BigInt::from(params.m.clone())),
        half: W::from_bigint(&BigInt::from(&params.m >> 1u32)),
    });
    let l = params.levels() as usize;
    let k = params.k as usize;
    let n = leaves.first().map_or(0, |v| v.len());
    let mut sizes: Vec<Vec<u64>> = vec![vec![n as u64; k]];
    let mut used: u64 = (k * n) as u64;
    if used > config.memory_cap {
        return Err(Error::Resource {
            stage: "input lists".into(),
            requested: used as u128,
            limit: config.memory_cap as u128,
        });
    }
    let mut levels: Vec<Vec<Vec<Rec<W>>>> = Vec::with_capacity(l);
    let mut current: Vec<Vec<W>> = leaves.to_vec();
    let mut failed = false;
    for d in 1..=l {
        let nodes = k >> d;
        if failed {
            sizes.push(vec![0; nodes]);
            continue;
        }
        let mut lists = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let stage = format!("level {d} merge {}", i + 1);
            let rec = merge_w(
                &current[2 * i],
                &current[2 * i + 1],
                &taus_w[d],
                modulus.as_ref(),
                config.memory_cap - used,
                &stage,
            )?;
            used += rec.len() as u64;
            lists.push(rec);
        }
        sizes.push(lists.iter().map(|x| x.len() as u64).collect());
        if lists.iter().any(|x| x.is_empty()) {
            failed = true;
        }
        current = lists
            .iter()
            .map(|x| x.iter().map(|r| r.value.clone()).collect())
            .collect();
        levels.push(lists);
    }
    let (zero_count, solution) = if failed || l == 0 {
        (0, None)
    } else {
        let root = &levels[l - 1][0];
        let first = root.partition_point(|r| r.value < W::w_zero());
        let zeros = root[first..].iter().take_while(|r| r.value.w_is_zero()).count() as u64;
        let solution = (zeros > 0).then(|| recover(&levels, first));
        (zeros, solution)
    };
    Ok(RunTrace::from_sizes(sizes, zero_count, solution, wraps))
}

/// Leaf indices (1-based) below element `pos` of the root list.
fn recover<W>(levels: &[Vec<Vec<Rec<W>>>], pos: usize) -> Vec<u64> {
    // frontier holds, for each node at the current depth, an element index
    let mut frontier = vec![pos as u32];
    for d in (0..levels.len()).rev() {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (i, &e) in frontier.iter().enumerate() {
            let r = &levels[d][i][e as usize];
            next.push(r.left);
            next.push(r.right);
        }
        frontier = next;
    }
    frontier.into_iter().map(|j| j as u64 + 1).collect()
}

/// Run the k-Tree algorithm with the default memory cap.
pub fn run_ktree(params: &ProblemParams, lists: &InputLists) -> Result<RunTrace> {
    run_ktree_with(params, lists, &SolverConfig::default())
}

pub fn run_ktree_with(
    params: &ProblemParams,
    lists: &InputLists,
    config: &SolverConfig,
) -> Result<RunTrace> {
    lists.check_against(params)?;
    if lists.n > u32::MAX as usize {
        return param("n too large for element indices");
    }
    match &lists.values {
        Values::Narrow(v) => run_w(params, v, config),
        Values::Wide(v) => run_w(params, v, config),
    }
}

/// Whether `indices` (1-based, one per list) pick a tuple that passes every
/// level filter and sums to zero.
pub fn verify_solution(lists: &InputLists, indices: &[u64], params: &ProblemParams) -> bool {
    if lists.check_against(params).is_err() || indices.len() as u64 != params.k {
        return false;
    }
    if indices.iter().any(|&i| i == 0 || i > lists.n as u64) {
        return false;
    }
    let taus = thresholds(params);
    let m = BigInt::from(params.m.clone());
    let half = BigInt::from(&params.m >> 1u32);
    let mut x: Vec<BigInt> = indices
        .iter()
        .enumerate()
        .map(|(i, &j)| lists.value(i, j as usize - 1))
        .collect();
    for tau in taus.iter().skip(1) {
        x = x
            .chunks(2)
            .map(|c| {
                let mut s = &c[0] + &c[1];
                if params.mode == Mode::CenteredModSum {
                    if s > half {
                        s -= &m;
                    } else if s < -&half {
                        s += &m;
                    }
                }
                s
            })
            .collect();
        if x.iter().any(|v| v.magnitude() > tau.magnitude()) {
            return false;
        }
    }
    x.len() == 1 && x[0].is_zero()
}

const MAGIC: &[u8; 4] = b"KTRE";
const DUMP_VERSION: u32 = 1;

fn value_width(m: &BigUint) -> usize {
    (m.bits() as usize + 1).div_ceil(8)
}

/// Write lists (and optionally a trace) in the binary dump format.
pub fn write_dump<W: Write>(out: &mut W, lists: &InputLists, params: &ProblemParams, trace: Option<&RunTrace>) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    let mb = lists.m.to_bytes_le();
    out.write_all(&(mb.len() as u32).to_le_bytes())?;
    out.write_all(&mb)?;
    out.write_all(&(lists.k as u32).to_le_bytes())?;
    out.write_all(&(lists.n as u64).to_le_bytes())?;
    out.write_all(&[match params.mode {
        Mode::IntegerSum => 0u8,
        Mode::CenteredModSum => 1u8,
    }])?;
    let w = value_width(&lists.m);
    out.write_all(&(w as u32).to_le_bytes())?;
    for i in 0..lists.k as usize {
        for j in 0..lists.n {
            let v = lists.value(i, j);
            let mut bytes = v.to_signed_bytes_le();
            let fill = if v.sign() == Sign::Minus { 0xff } else { 0 };
            bytes.resize(w, fill);
            out.write_all(&bytes)?;
        }
    }
    match trace {
        None => out.write_all(&[0u8])?,
        Some(t) => {
            out.write_all(&[1u8, t.success as u8])?;
            out.write_all(&t.zero_count.to_le_bytes())?;
            for s in t.level_list_sizes.iter().flatten() {
                out.write_all(&s.to_le_bytes())?;
            }
            let idx = t.solution_indices.as_deref().unwrap_or(&[]);
            out.write_all(&(idx.len() as u32).to_le_bytes())?;
            for i in idx {
                out.write_all(&i.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn take<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated dump: {e}")))?;
    Ok(b)
}

/// Read a dump written by [`write_dump`].
pub fn read_dump<R: Read>(r: &mut R) -> Result<(ProblemParams, InputLists, Option<RunTrace>)> {
    if &take::<_, 4>(r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(r)?);
    if version != DUMP_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mlen = u32::from_le_bytes(take(r)?) as usize;
    let mut mb = vec![0u8; mlen];
    r.read_exact(&mut mb)
        .map_err(|e| Error::Format(format!("truncated dump: {e}")))?;
    let m = BigUint::from_bytes_le(&mb);
    let k = u32::from_le_bytes(take(r)?) as u64;
    let n = u64::from_le_bytes(take(r)?);
    let mode = match take::<_, 1>(r)?[0] {
        0 => Mode::IntegerSum,
        1 => Mode::CenteredModSum,
        b => return Err(Error::Format(format!("bad mode byte {b}"))),
    };
    let params = ProblemParams::new(m, k, BigUint::from(n), mode)
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let w = u32::from_le_bytes(take(r)?) as usize;
    if w != value_width(&params.m) {
        return Err(Error::Format(format!("value width {w} does not match m")));
    }
    let mut lists = Vec::with_capacity(k as usize);
    let mut buf = vec![0u8; w];
    for _ in 0..k {
        let mut l = Vec::with_capacity(n as usize);
        for _ in 0..n {
            r.read_exact(&mut buf)
                .map_err(|e| Error::Format(format!("truncated dump: {e}")))?;
            l.push(BigInt::from_signed_bytes_le(&buf));
        }
        lists.push(l);
    }
    let lists = InputLists::from_values(&params, lists).map_err(|e| Error::Format(e.to_string()))?;
    let trace = match take::<_, 1>(r)?[0] {
        0 => None,
        1 => {
            let success = take::<_, 1>(r)?[0] != 0;
            let zero_count = u64::from_le_bytes(take(r)?);
            let mut sizes = Vec::new();
            for d in 0..=params.levels() {
                let mut lv = Vec::new();
                for _ in 0..(k >> d) {
                    lv.push(u64::from_le_bytes(take(r)?));
                }
                sizes.push(lv);
            }
            let cnt = u32::from_le_bytes(take(r)?) as usize;
            let mut idx = Vec::with_capacity(cnt);
            for _ in 0..cnt {
                idx.push(u64::from_le_bytes(take(r)?));
            }
            let solution = (cnt > 0).then_some(idx);
            let wraps = wraps_beyond_first_level(&params, &thresholds(&params));
            let t = RunTrace::from_sizes(sizes, zero_count, solution, wraps);
            if t.success != success {
                return Err(Error::Format("success flag disagrees with zero count".into()));
            }
            Some(t)
        }
        b => return Err(Error::Format(format!("bad trace marker {b}"))),
    };
    Ok((params, lists, trace))
}

//! End-to-end checks, one line per criterion. Exits nonzero if any fails.

use std::process::Command;
use std::time::Instant;

use ktree::bounds::*;
use ktree::exactprob::*;
use ktree::harness::{complexity_at_target, run_trials, SearchOptions, Side};
use ktree::oracle::*;
use ktree::params::{parse_modulus, Mode, ProblemParams};
use ktree::precreal::PrecReal;
use ktree::radical::Radical;
use ktree::solver::{generate_lists, merge, run_ktree, stream_rng, verify_solution};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

const PREC: u32 = 192;
const EPS_HOEFFDING: f64 = 0.0515;

type Outcome = Result<String, String>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Range sizes of the primitive grid.
fn s_grid() -> Vec<Radical> {
    let mut v: Vec<Radical> = (3..=200).map(|s| Radical::ratio(s, 1)).collect();
    v.extend([Radical::ratio(35, 10), Radical::ratio(117, 10), Radical::ratio(999, 10)]);
    v
}

fn p_grid() -> Vec<Radical> {
    [(1, 100), (1, 10), (1, 3), (1, 2), (9, 10), (1, 1)]
        .iter()
        .map(|&(a, b)| Radical::ratio(a, b))
        .collect()
}

fn criterion_1() -> Outcome {
    let mut checked = 0u64;
    for s in s_grid() {
        let r = RangeSpec::new(s.clone()).map_err(|e| e.to_string())?;
        let big = BigInt::from(r.floor_half().clone());
        for p in p_grid() {
            let bf = |w: Primitive| brute_force_primitive(&w, &s, &p).unwrap();
            let pairs = [
                ("probSumInRange", prob_sum_in_range(&r, &p).unwrap(), bf(Primitive::SumInRange)),
                ("mrDistFromUnif", mr_dist_from_unif(&r, &p).unwrap(), bf(Primitive::MrDist)),
                ("probSumWithTwoRVInRange", prob_sum_with_two_rv_in_range(&r, &p).unwrap(), bf(Primitive::TriplePair)),
                ("mrDistFromPairUnif", mr_dist_from_pair_unif(&r, &p).unwrap(), bf(Primitive::MrPair)),
            ];
            for (name, got, want) in pairs {
                if got != want {
                    return Err(format!("{name}(s={s}, p={p}) = {got}, enumeration gives {want}"));
                }
                checked += 1;
            }
            for z in [BigInt::zero(), BigInt::one(), big.clone(), -&big * 2u32, &big * 2u32] {
                let got = prob_sum_to_z(&r, &z).unwrap();
                if got != bf(Primitive::SumToZ(z.clone())) {
                    return Err(format!("probSumToZ(s={s}, z={z}) = {got}"));
                }
                checked += 1;
            }
            if let Some(sq) = s.as_rational().filter(|x| x.is_integer()) {
                let m = sq.to_integer().to_biguint().unwrap();
                if m.bit(0) {
                    let got = prob_sum_mod_in_range(&m, &p).unwrap();
                    if got != bf(Primitive::ModInRange) {
                        return Err(format!("probSumModInRange(m={m}, p={p}) = {got}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    let r11 = RangeSpec::integer(11).unwrap();
    let one = Radical::one();
    if prob_sum_with_two_rv_in_range(&r11, &one).unwrap() != q(781, 1331)
        || mr_dist_from_unif(&r11, &one).unwrap() != q(91, 66)
    {
        return Err("s = 11, p = 1 values differ from 781/1331 and 91/66".into());
    }
    Ok(format!("{checked} exact comparisons"))
}

fn criterion_2() -> Outcome {
    let mut checked = 0u64;
    for s in s_grid() {
        let sq = s.as_rational().unwrap();
        let r = RangeSpec::new(s.clone()).unwrap();
        for p in p_grid() {
            let pq = p.as_rational().unwrap();
            let one = BigRational::one();
            if sq > BigRational::from_integer(10.into()) {
                let got = prob_sum_in_range(&r, &p).unwrap();
                let centre = &pq - &pq * &pq / BigRational::from_integer(4.into());
                let slack = BigRational::from_integer(7.into()) / &sq;
                let dev = if got > centre { &got - &centre } else { &centre - &got };
                if dev > slack {
                    return Err(format!("pair-sum range probability off by {dev} at s={s}, p={p}"));
                }
                let p3 = prob_sum_with_two_rv_in_range(&r, &p).unwrap();
                let f = &one + BigRational::from_integer(3.into()) / (&sq * &pq);
                if p3 > &pq * &pq * &f * &f {
                    return Err(format!("triple probability {p3} too large at s={s}, p={p}"));
                }
                checked += 2;
            }
            if sq > BigRational::from_integer(20.into()) {
                let mr = mr_dist_from_unif(&r, &p).unwrap();
                let half = BigRational::new(1.into(), 2.into());
                let b = (&one - &pq * &half).recip() * (&one + BigRational::from_integer(30.into()) / &sq);
                if mr > b {
                    return Err(format!("mr distance {mr} above {b} at s={s}, p={p}"));
                }
                checked += 1;
                if pq <= half {
                    let mr2 = mr_dist_from_pair_unif(&r, &p).unwrap();
                    let b2 = (&one - &pq).recip() * (&one + BigRational::from_integer(4.into()) / &sq);
                    if mr2 > b2 {
                        return Err(format!("pair mr distance {mr2} above {b2} at s={s}, p={p}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} inequalities hold"))
}

const MOMENT_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

fn criterion_3() -> Outcome {
    let mut worst = 0f64;
    for m in [32771u32, 65537] {
        let m = BigUint::from(m);
        let bp = BoundParams::new(&m, 4, Mode::IntegerSum, PREC).unwrap();
        let conv = convolution_expectation(&m, 4, Mode::IntegerSum).map_err(|e| e.to_string())?;
        for c in MOMENT_GRID {
            let n = n_for_c(&bp, c).unwrap();
            let fm = first_moment_bounds(&bp, &n).unwrap();
            let exact = conv.expected_zero_count(&n);
            if !fm.contains_rational(&exact) {
                return Err(format!("E[C] outside bounds at m={m}, c={c}"));
            }
            let ratio = fm.ratio();
            worst = worst.max(ratio);
            if ratio > 2.0 {
                return Err(format!("UB/LB = {ratio} at m={m}, c={c}"));
            }
        }
    }
    let m = BigUint::from(101u32);
    let conv = convolution_expectation(&m, 4, Mode::IntegerSum).unwrap();
    let brute = enumerate_tuple_zero_prob(&m, 4, Mode::IntegerSum, 200_000_000).unwrap();
    if conv.tuple_zero_prob != brute {
        return Err("convolution and 4-tuple enumeration disagree at m=101".into());
    }
    Ok(format!("worst UB/LB {worst:.4}; m=101 convolution equals enumeration"))
}

fn criterion_4() -> Outcome {
    let mut n_checked = 0;
    for m in [32771u32, 65537] {
        let m = BigUint::from(m);
        let bp = BoundParams::new(&m, 4, Mode::IntegerSum, PREC).unwrap();
        let conv = convolution_expectation(&m, 4, Mode::IntegerSum).unwrap();
        for c in MOMENT_GRID {
            let n = n_for_c(&bp, c).unwrap();
            if !size_bounds(&bp, &n).unwrap().contains_rational(&conv.expected_total_size(&n)) {
                return Err(format!("E[size] outside bounds at m={m}, c={c}"));
            }
            n_checked += 1;
        }
    }
    Ok(format!("{n_checked} grid points"))
}

/// Trials at 2^32 shared by criteria 5 and 6.
struct McRow {
    k: u64,
    c: f64,
    n: BigUint,
    rate: f64,
    prob: BoundPair,
    zc2: f64,
    sm: PrecReal,
}

fn monte_carlo() -> Vec<McRow> {
    let m = parse_modulus("2^32").unwrap();
    let mut rows = Vec::new();
    for k in [4u64, 8] {
        let bp = BoundParams::new(&m, k, Mode::IntegerSum, PREC).unwrap();
        for (i, c) in [0.6, 1.0, 1.4].into_iter().enumerate() {
            let n = n_for_c(&bp, c).unwrap();
            let pp = ProblemParams::new(m.clone(), k, n.clone(), Mode::IntegerSum).unwrap();
            let s = run_trials(&pp, 1000, 2024 + 10 * k + i as u64, 0).unwrap();
            rows.push(McRow {
                k,
                c,
                n: n.clone(),
                rate: s.success_rate,
                prob: prob_bounds(&bp, &n).unwrap(),
                zc2: s.mean_zero_count_squared,
                sm: second_moment_ub(&bp, &n).unwrap(),
            });
        }
    }
    rows
}

fn criterion_5(rows: &[McRow]) -> Outcome {
    let mut notes = Vec::new();
    for r in rows {
        let (lo, hi) = (r.prob.lower.to_f64(), r.prob.upper.to_f64());
        notes.push(format!("k={} c={}: {:.3} in [{:.3}, {:.3}]", r.k, r.c, r.rate, lo, hi));
        if r.rate < lo - EPS_HOEFFDING || r.rate > hi + EPS_HOEFFDING {
            return Err(notes.join("; "));
        }
    }
    Ok(notes.join("; "))
}

fn criterion_6(rows: &[McRow]) -> Outcome {
    let mut worst = 0f64;
    let mut exact_worst = 0f64;
    let m = parse_modulus("2^32").unwrap();
    for r in rows {
        let ub = r.sm.to_f64();
        worst = worst.max(r.zc2 / ub);
        if r.zc2 > 1.25 * ub {
            return Err(format!("k={} c={}: mean C^2 {} above 1.25 x {}", r.k, r.c, r.zc2, ub));
        }
        // four lists also have an exact value, with no slack
        if r.k == 4 {
            let exact = second_moment_four_lists(&m, &r.n).map_err(|e| e.to_string())?;
            if exact > r.sm.to_rational() {
                return Err(format!("k=4 c={}: exact E[C^2] above the bound {ub}", r.c));
            }
            let e = PrecReal::from_rational(&exact, 64, ktree::precreal::Round::Nearest).to_f64();
            exact_worst = exact_worst.max(e / ub);
        }
    }
    Ok(format!(
        "largest mean C^2 / bound = {worst:.3}; exact E[C^2] / bound at k=4 at most {exact_worst:.4}"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = stream_rng(77, 0);
    let mut successes = 0;
    for i in 0..500 {
        // log-uniform, so small moduli with many solutions are common
        let m = 2f64.powf(rng.gen_range(1.6..20.0)) as u64;
        let n: u64 = rng.gen_range(1..=20);
        let mode = if i % 2 == 0 { Mode::IntegerSum } else { Mode::CenteredModSum };
        let m = if mode == Mode::CenteredModSum { m | 1 } else { m };
        let pp = ProblemParams::new(BigUint::from(m), 4, BigUint::from(n), mode).unwrap();
        let lists = generate_lists(&pp, rng.gen()).unwrap();
        let t = run_ktree(&pp, &lists).unwrap();
        let naive = naive_zero_count(&lists, &pp).unwrap();
        if t.zero_count != naive {
            return Err(format!("instance {i}: zero count {} vs enumeration {naive}", t.zero_count));
        }
        if let Some(ix) = &t.solution_indices {
            successes += 1;
            if !verify_solution(&lists, ix, &pp) {
                return Err(format!("instance {i}: reported solution does not verify"));
            }
        }
        // merge against the double loop on the two first-level lists
        let bl = lists.to_bigint_lists();
        let len = (n as usize).min(64);
        let tau = BigInt::from(pp.threshold(1));
        let modulus = (mode == Mode::CenteredModSum).then_some(&pp.m);
        let mut fast: Vec<_> = merge(&bl[0][..len], &bl[1][..len], &tau, modulus, u64::MAX)
            .unwrap()
            .into_iter()
            .map(|e| (e.value, e.left, e.right))
            .collect();
        let mut slow = naive_merge(&bl[0][..len], &bl[1][..len], &tau, modulus);
        fast.sort();
        slow.sort();
        if fast != slow {
            return Err(format!("instance {i}: merge differs from the double loop"));
        }
    }
    // wider lists for the merge alone
    for i in 0..100 {
        let m = BigUint::from(rng.gen_range(100u64..=1 << 20) | 1);
        let pp = ProblemParams::new(m.clone(), 2, BigUint::from(64u32), Mode::CenteredModSum).unwrap();
        let bl = generate_lists(&pp, i).unwrap().to_bigint_lists();
        let tau = BigInt::from(rng.gen_range(0u64..(m.clone() / 2u32).try_into().unwrap()));
        for modulus in [None, Some(&m)] {
            let mut fast: Vec<_> = merge(&bl[0], &bl[1], &tau, modulus, u64::MAX)
                .unwrap()
                .into_iter()
                .map(|e| (e.value, e.left, e.right))
                .collect();
            let mut slow = naive_merge(&bl[0], &bl[1], &tau, modulus);
            fast.sort();
            slow.sort();
            if fast != slow {
                return Err(format!("n=64 merge {i} differs from the double loop"));
            }
        }
    }
    Ok(format!("500 instances ({successes} solved) and 200 wide merges agree"))
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for m in ["2^64", "2^128"] {
        let mv = parse_modulus(m).unwrap();
        for k in [4u64, 8, 16, 32, 64] {
            let bp = BoundParams::new(&mv, k, Mode::IntegerSum, PREC).unwrap();
            if !bp.flags().all() {
                continue;
            }
            for c in [0.5, 1.0, 2.0] {
                let n = n_for_c(&bp, c).unwrap();
                let computed = prob_bounds(&bp, &n).unwrap();
                let analytic = analytic_prob_bounds(&bp, &n).unwrap();
                checked += 1;
                if analytic.lower > computed.lower {
                    failures.push(format!(
                        "m={m} k={k} c={c}: closed-form LB {:.4e} > computed LB {:.4e}",
                        analytic.lower.to_f64(),
                        computed.lower.to_f64()
                    ));
                }
                if computed.upper > analytic.upper {
                    failures.push(format!(
                        "m={m} k={k} c={c}: computed UB {:.4e} > closed-form UB {:.4e}",
                        computed.upper.to_f64(),
                        analytic.upper.to_f64()
                    ));
                }
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{checked} grid points ordered"))
    } else {
        Err(format!("{} of {checked} grid points out of order: {}", failures.len(), failures.join("; ")))
    }
}

fn criterion_9() -> Outcome {
    let m = parse_modulus("2^96").unwrap();
    let bp = BoundParams::new(&m, 4, Mode::IntegerSum, PREC).unwrap();
    let pb = prob_bounds(&bp, &n_for_c(&bp, 1.0).unwrap()).unwrap();
    let lo = pb.lower.to_f64();
    if lo >= 0.45 && pb.upper == PrecReal::one(PREC) {
        Ok(format!("LB {lo:.6}, UB 1"))
    } else {
        Err(format!("LB {lo}, UB {}", pb.upper.to_f64()))
    }
}

fn criterion_10() -> Outcome {
    let m = parse_modulus("2^64-59").unwrap();
    let bi = BoundParams::new(&m, 8, Mode::IntegerSum, PREC).unwrap();
    let n = n_for_c(&bi, 1.0).unwrap();
    let z = zm_bounds(&m, 8, &n, PREC).unwrap();
    let i = (prob_bounds(&bi, &n).unwrap(), size_bounds(&bi, &n).unwrap());
    let mut worst = 0f64;
    for (a, b) in [
        (&z.prob.lower, &i.0.lower),
        (&z.prob.upper, &i.0.upper),
        (&z.size.lower, &i.1.lower),
        (&z.size.upper, &i.1.upper),
    ] {
        let rel = ((a.to_f64() - b.to_f64()) / b.to_f64()).abs();
        worst = worst.max(rel);
    }
    if worst <= 1e-3 {
        Ok(format!("largest relative difference {worst:.2e}"))
    } else {
        Err(format!("relative difference {worst:.2e}"))
    }
}

fn criterion_11() -> Outcome {
    let m = parse_modulus("2^64").unwrap();
    let ks: Vec<u64> = (2..=10).map(|e| 1u64 << e).collect();
    let opts = SearchOptions::new(Mode::IntegerSum, PREC);
    let rows = complexity_at_target(&m, &ks, 0.01, Side::Sufficient, &opts).map_err(|e| e.to_string())?;
    let curve: Vec<(u64, f64)> = rows
        .iter()
        .filter(|r| !r.unreachable)
        .map(|r| (r.k, r.log2_complexity.unwrap()))
        .collect();
    let shown: Vec<String> = curve.iter().map(|(k, v)| format!("{k}:{v:.2}")).collect();
    let vals: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let turn = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let falls = vals[..=turn].windows(2).all(|w| w[1] <= w[0]);
    let rises = vals[turn..].windows(2).all(|w| w[1] >= w[0]);
    let shape = falls && rises && turn > 0 && turn + 1 < vals.len();
    let skipped = rows.len() - curve.len();
    let msg = format!("log2 sizes {} ({skipped} unreachable)", shown.join(" "));
    if shape {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_12() -> Outcome {
    let commands: [&[&str]; 3] = [
        &["experiment", "--m", "2^24", "--k", "8", "--c", "1", "--trials", "300", "--seed", "5"],
        &["search", "--m", "2^20", "--k", "4", "--target", "0.5", "--criterion", "empirical", "--trials", "50", "--seed", "6"],
        &["sweep", "--m", "2^20", "--k", "4", "--c-grid", "0.5,1,2", "--trials", "100", "--seed", "7"],
    ];
    for args in commands {
        let run = |par: &str| {
            Command::new(env!("CARGO_BIN_EXE_ktree"))
                .args(args)
                .args(["--parallelism", par])
                .env_remove("KTREE_PRECISION_BITS")
                .output()
                .expect("binary runs")
        };
        let (a, b) = (run("1"), run("8"));
        if a.status.code() != Some(0) {
            return Err(format!("{} exited with {:?}", args[0], a.status.code()));
        }
        if a.stdout != b.stdout {
            return Err(format!("{} output differs between 1 and 8 workers", args[0]));
        }
    }
    Ok("experiment, search and sweep byte-identical".into())
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("[PASS] criterion {id}: {msg} ({secs:.1}s)"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {id}: {msg} ({secs:.1}s)");
            }
        }
    };
    report(1, &mut criterion_1);
    report(2, &mut criterion_2);
    report(3, &mut criterion_3);
    report(4, &mut criterion_4);
    let mc = monte_carlo();
    report(5, &mut || criterion_5(&mc));
    report(6, &mut || criterion_6(&mc));
    report(7, &mut criterion_7);
    report(8, &mut criterion_8);
    report(9, &mut criterion_9);
    report(10, &mut criterion_10);
    report(11, &mut criterion_11);
    report(12, &mut criterion_12);
    println!("{} of 12 criteria pass", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

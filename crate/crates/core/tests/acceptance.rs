//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use relcount::cnf::{emit_dimacs, parse_dimacs, CnfFormula};
use relcount::counter::{count_approx, count_bruteforce, count_exact, CountMode, DEFAULT_BRUTE_LIMIT};
use relcount::dataset::{make_balanced, make_ratio, split, Dataset, SplitRatio};
use relcount::dtree::{eval_traditional, train_cart, DecisionTree, TrainParams};
use relcount::metrics::{acc_mc, diff_mc, format_decimal, to_f64};
use relcount::props::{encode, evaluate, AdjacencyMatrix, PropertyId, PropertySpec};
use relcount::tree2cnf::{paths, side_cnf};

use common::{bits, holds, oracle_count, random_cnf, random_tree, rng};

type Outcome = Result<String, String>;

const LONG: Duration = Duration::from_secs(5000);

fn spec(p: PropertyId, n: usize) -> PropertySpec {
    PropertySpec::new(p, n).unwrap()
}

fn exact(f: &CnfFormula) -> BigUint {
    count_exact(f, LONG).count.expect("exact count finished")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reference_counts() -> Outcome {
    use PropertyId::*;
    let rows: [(PropertyId, usize, u64); 12] = [
        (Antisymmetric, 5, 1_889_568),
        (Connex, 6, 14_348_907),
        (Function, 8, 16_777_216),
        (Functional, 8, 43_046_721),
        (Injective, 8, 16_777_216),
        (Irreflexive, 5, 1_048_576),
        (Reflexive, 5, 1_048_576),
        (NonStrictOrder, 7, 6_129_859),
        (StrictOrder, 7, 6_129_859),
        (PreOrder, 7, 9_535_241),
        (PartialOrder, 6, 8_321_472),
        (Transitive, 6, 9_415_189),
    ];
    let mut slowest = Duration::ZERO;
    for (p, n, want) in rows {
        let r = count_exact(&encode(spec(p, n)), LONG);
        slowest = slowest.max(r.elapsed);
        let got = r.count.ok_or_else(|| format!("{p}({n}) timed out"))?;
        ensure(got == BigUint::from(want), || format!("{p}({n}) = {got}, expected {want}"))?;
    }
    let stretch = count_exact(&encode(spec(TotalOrder, 13)), Duration::from_secs(60));
    let note = match stretch.count {
        Some(c) if c == BigUint::from(6_227_020_800u64) => "TotalOrder(13) = 13! matched".to_string(),
        Some(c) => return Err(format!("TotalOrder(13) = {c}, expected 6227020800")),
        None => "TotalOrder(13) stretch SKIPPED after 60s".to_string(),
    };
    Ok(format!("12/12 counts exact, slowest {slowest:.2?}; {note}"))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    for &p in &PropertyId::ALL {
        for n in [3, 4] {
            let f = encode(spec(p, n));
            let e = exact(&f);
            let b = count_bruteforce(&f, DEFAULT_BRUTE_LIMIT).unwrap().count.unwrap();
            let semantic = (0u64..1 << (n * n)).filter(|&x| holds(p, n, &bits(x, n * n))).count();
            ensure(e == b && e == BigUint::from(semantic), || {
                format!("{p}({n}): exact {e}, brute {b}, semantic {semantic}")
            })?;
        }
    }
    let mut r = rng(2024);
    for i in 0..200 {
        let n = r.gen_range(3..=16);
        let clauses = r.gen_range(n..=5 * n) as usize;
        let f = random_cnf(&mut r, n, clauses, 3, i % 2 == 1);
        let e = exact(&f);
        let b = count_bruteforce(&f, DEFAULT_BRUTE_LIMIT).unwrap().count.unwrap();
        let o = oracle_count(&f);
        ensure(e == b && e == BigUint::from(o), || format!("random formula {i}: exact {e}, brute {b}, oracle {o}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:.2?}"))?;
    Ok(format!("32 encodings and 200 random 3-CNFs agree in {elapsed:.2?}"))
}

fn analytic_counts() -> Outcome {
    use PropertyId::*;
    for (p, want) in [(Equivalence, 15u64), (Bijective, 24), (TotalOrder, 24), (PartialOrder, 3504)] {
        let got = exact(&encode(spec(p, 4)));
        ensure(got == BigUint::from(want), || format!("{p}(4) = {got}, expected {want}"))?;
    }
    Ok("Equivalence(4)=15 Bijective(4)=24 TotalOrder(4)=24 PartialOrder(4)=3504".into())
}

fn trained_tree(p: PropertyId, n: usize, seed: u64) -> DecisionTree {
    let ds = make_balanced(spec(p, n), false, seed, LONG).unwrap();
    let (train, _) = split(&ds, SplitRatio::new(75, 25).unwrap(), seed).unwrap();
    train_cart(&train, TrainParams::default()).unwrap()
}

fn tree2cnf_fidelity() -> Outcome {
    use PropertyId::*;
    // a balanced dataset needs at least as many negatives as positives
    let balanced = |p, n: usize| exact(&encode(spec(p, n))) * 2u32 <= BigUint::one() << (n * n);
    let mut jobs: Vec<(PropertyId, usize, u64)> = Vec::new();
    for (k, &p) in PropertyId::ALL.iter().enumerate() {
        for n in [3, 4] {
            if balanced(p, n) {
                jobs.push((p, n, k as u64));
            }
        }
    }
    let scope5 =
        [Bijective, TotalOrder, Equivalence, Function, Injective, StrictOrder, NonStrictOrder, PartialOrder, PreOrder];
    for seed in 1.. {
        for p in scope5 {
            if jobs.len() < 50 {
                jobs.push((p, 5, seed));
            }
        }
        if jobs.len() == 50 {
            break;
        }
    }
    let mut sampled = 0;
    for (p, n, seed) in &jobs {
        let (p, n, seed) = (*p, *n, *seed);
        let tree = trained_tree(p, n, seed);
        let bits_n = n * n;
        let sides = [side_cnf(&tree, true), side_cnf(&tree, false)];
        let check = |x: &[bool]| -> Result<(), String> {
            let label = tree.predict(x).unwrap();
            ensure(sides[0].satisfied_by(x) == label && sides[1].satisfied_by(x) != label, || {
                format!("{p}({n}) seed {seed}: membership disagrees with predict")
            })
        };
        if bits_n <= 16 {
            for x in 0u64..1 << bits_n {
                check(&bits(x, bits_n))?;
            }
        } else {
            let mut r = rng(seed ^ 0x5eed);
            for _ in 0..10_000 {
                let x: Vec<bool> = (0..bits_n).map(|_| r.gen()).collect();
                check(&x)?;
            }
            sampled += 1;
        }
        let total = exact(&sides[0]) + exact(&sides[1]);
        ensure(total == BigUint::one() << bits_n, || format!("{p}({n}): sides sum to {total}"))?;
        let ps = paths(&tree);
        ensure(
            sides[0].num_clauses() == ps.false_paths.len() && sides[1].num_clauses() == ps.true_paths.len(),
            || format!("{p}({n}): clause count differs from opposing leaves"),
        )?;
    }
    let y = |a, b| DecisionTree::split(1, DecisionTree::leaf(2, a), DecisionTree::leaf(2, b)).unwrap();
    let fig = DecisionTree::split(0, y(true, false), y(false, true)).unwrap();
    let mut got: Vec<Vec<i64>> =
        side_cnf(&fig, false).clauses().iter().map(|c| c.literals().iter().map(|l| l.to_dimacs()).collect()).collect();
    got.sort();
    ensure(got == vec![vec![-1, -2], vec![1, 2]], || format!("worked example false side {got:?}"))?;
    Ok(format!("{} trees ({sampled} sampled at scope 5); worked example gives (¬x∨¬y)∧(x∨y)", jobs.len()))
}

fn accmc_correctness() -> Outcome {
    let start = Instant::now();
    for p in [PropertyId::Equivalence, PropertyId::Transitive, PropertyId::Reflexive] {
        let tree = trained_tree(p, 4, 7);
        let phi = encode(spec(p, 4));
        let c = acc_mc(&phi, &tree, CountMode::Exact, LONG).unwrap();
        let mut want = [0u64; 4];
        for x in 0u64..1 << 16 {
            let input = bits(x, 16);
            let truth = evaluate(p, &AdjacencyMatrix::new(4, input.clone()).unwrap());
            let pred = tree.predict(&input).unwrap();
            want[usize::from(truth) * 2 + usize::from(pred)] += 1;
        }
        let [tn, fp, fn_, tp] = want.map(BigUint::from);
        ensure(c.tp == tp && c.fp == fp && c.tn == tn && c.fn_ == fn_, || {
            format!("{p}(4): acc_mc {}/{}/{}/{} vs enumeration {tp}/{fp}/{tn}/{fn_}", c.tp, c.fp, c.tn, c.fn_)
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.2?}"))?;
    Ok(format!("3 trees match 65,536-input enumeration in {elapsed:.2?}"))
}

fn diffmc_invariants() -> Outcome {
    let mut r = rng(66);
    for i in 0..20 {
        let features = r.gen_range(4..=16);
        let a = random_tree(&mut r, features, 8);
        let b = random_tree(&mut r, features, 8);
        let ab = diff_mc(&a, &b, CountMode::Exact, LONG).unwrap();
        let ba = diff_mc(&b, &a, CountMode::Exact, LONG).unwrap();
        let aa = diff_mc(&a, &a, CountMode::Exact, LONG).unwrap();
        let flip = diff_mc(&a, &a.flipped(), CountMode::Exact, LONG).unwrap();
        let space = BigUint::one() << features;
        ensure(&ab.tt + &ab.tf + &ab.ft + &ab.ff == space, || format!("pair {i}: cells do not sum to 2^{features}"))?;
        ensure(aa.diff().is_zero(), || format!("pair {i}: diff(d,d) != 0"))?;
        ensure(ab.sim() == BigRational::one() - ab.diff(), || format!("pair {i}: sim != 1 - diff"))?;
        ensure(ab.tf == ba.ft && ab.ft == ba.tf, || format!("pair {i}: tf/ft not symmetric"))?;
        ensure(flip.diff().is_one(), || format!("pair {i}: flipped tree diff != 1"))?;
    }
    Ok("20 tree pairs satisfy all invariants".into())
}

fn precision(c: &relcount::metrics::ConfusionCounts) -> BigRational {
    c.scores().precision
}

fn generalization_gap() -> Outcome {
    let start = Instant::now();
    let s = spec(PropertyId::PartialOrder, 6);
    let ds = make_balanced(s, false, 1, LONG).map_err(|e| e.to_string())?;
    let (train, test) = split(&ds, SplitRatio::new(10, 90).unwrap(), 1).unwrap();
    let tree = train_cart(&train, TrainParams::default()).unwrap();
    let trad = eval_traditional(&tree, &test).unwrap().scores().precision;
    let phi = precision(&acc_mc(&encode(s), &tree, CountMode::Exact, LONG).unwrap());
    ensure(to_f64(&trad) >= 0.95, || format!("PartialOrder(6) test precision {}", format_decimal(&trad, 4)))?;
    ensure(to_f64(&phi) <= 0.5, || format!("PartialOrder(6) whole-space precision {}", format_decimal(&phi, 4)))?;
    let gap = format!("PartialOrder(6) test {} vs whole-space {}", format_decimal(&trad, 4), format_decimal(&phi, 4));

    let s = spec(PropertyId::Antisymmetric, 5);
    let phi_f = encode(s);
    let mut mcml = Vec::new();
    let mut trads = Vec::new();
    for vp in [99u32, 90, 75, 50, 25, 10, 1] {
        let total = 20_000 * 100 / vp as usize;
        let ds = make_ratio(s, false, vp, total, 1, LONG).map_err(|e| e.to_string())?;
        let (train, test) = split(&ds, SplitRatio::new(75, 25).unwrap(), 1).unwrap();
        let tree = train_cart(&train, TrainParams::default()).unwrap();
        trads.push(eval_traditional(&tree, &test).unwrap().scores().precision);
        mcml.push(precision(&acc_mc(&phi_f, &tree, CountMode::Exact, LONG).unwrap()));
    }
    let shown = |v: &[BigRational]| v.iter().map(|r| format_decimal(r, 4)).collect::<Vec<_>>().join(" ");
    ensure(mcml.windows(2).all(|w| w[0] < w[1]), || {
        format!("Antisymmetric(5) MCML precision not increasing: {}", shown(&mcml))
    })?;
    ensure(trads.iter().all(|t| to_f64(t) >= 0.9), || {
        format!("Antisymmetric(5) test precision below 0.9: {}", shown(&trads))
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:.2?}"))?;
    Ok(format!("{gap}; ratio sweep MCML [{}] test [{}] in {elapsed:.2?}", shown(&mcml), shown(&trads)))
}

fn approx_guarantee() -> Outcome {
    let start = Instant::now();
    let mut instances: Vec<(String, CnfFormula)> = vec![
        ("Function(8)".into(), encode(spec(PropertyId::Function, 8))),
        ("Transitive(6)".into(), encode(spec(PropertyId::Transitive, 6))),
    ];
    let mut r = rng(8);
    while instances.len() < 22 {
        let k = instances.len() - 2;
        let f = random_cnf(&mut r, 30, 75, 3, k % 2 == 1);
        if exact(&f) >= BigUint::from(1000u32) {
            instances.push((format!("random#{k}"), f));
        }
    }
    let mut worst = 20;
    for (name, f) in &instances {
        let want = exact(f);
        let lo = BigRational::from_integer(want.clone().into()) / BigRational::new(9.into(), 5.into());
        let hi = BigRational::from_integer(want.clone().into()) * BigRational::new(9.into(), 5.into());
        let mut good = 0;
        for seed in 0..20 {
            let est = count_approx(f, 0.8, 0.2, seed, LONG).unwrap().count.unwrap();
            let est = BigRational::from_integer(est.into());
            good += usize::from(est >= lo && est <= hi);
        }
        worst = worst.min(good);
        ensure(good >= 16, || format!("{name}: {good}/20 within factor 1.8 of {want}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(600), || format!("correct but took {elapsed:.2?}"))?;
    Ok(format!("22 instances, worst {worst}/20 seeds within factor 1.8, in {elapsed:.2?}"))
}

fn formats() -> Outcome {
    for &p in &PropertyId::ALL {
        let f = encode(spec(p, 4));
        let text = emit_dimacs(&f);
        ensure(emit_dimacs(&parse_dimacs(&text).unwrap()) == text, || format!("{p}(4) DIMACS not byte-exact"))?;
    }
    let tree = trained_tree(PropertyId::PreOrder, 4, 3);
    let text = tree.to_json();
    ensure(DecisionTree::from_json(&text).unwrap().to_json() == text, || "tree file not byte-exact".into())?;
    let s = spec(PropertyId::Transitive, 4);
    let a = make_balanced(s, false, 9, LONG).unwrap();
    let b = make_balanced(s, false, 9, LONG).unwrap();
    ensure(a.to_csv() == b.to_csv(), || "dataset regeneration differs".into())?;
    let back = Dataset::from_csv(&a.to_csv(), &a.meta()).unwrap();
    ensure(back.to_csv() == a.to_csv() && back.meta() == a.meta(), || "dataset CSV round trip differs".into())?;
    Ok("DIMACS, tree and dataset files byte-exact".into())
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "reference exact counts", reference_counts),
        (2, "oracle equivalence", oracle_equivalence),
        (3, "small-scope analytic counts", analytic_counts),
        (4, "Tree2CNF fidelity", tree2cnf_fidelity),
        (5, "Acc_MC correctness", accmc_correctness),
        (6, "Diff_MC invariants", diffmc_invariants),
        (7, "generalization gap", generalization_gap),
        (8, "approximate counter guarantee", approx_guarantee),
        (10, "formats", formats),
    ];
    let only: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if id == 10 {
            println!("DECLARED criterion 9 (not reproducible at desk scale): Alloy symmetry-breaking counts, Alloy CNF statistics, 2^400-scale whole-space metrics and scikit-learn tree replication are substituted by criteria 1-8");
        }
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}) [{t:.1?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}) [{t:.1?}]: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

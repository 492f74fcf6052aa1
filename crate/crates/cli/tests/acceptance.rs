//! Acceptance battery. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any failure.

#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xdalign::align::{align_cells, Strategy};
use xdalign::corpus::{parse_documents, DocPair, GoldSet, LangPair};
use xdalign::embedding::store::{decode, encode, read_raw};
use xdalign::metrics::{kendall_tau_b, pearson};
use xdalign::report::{score_histogram, top_k};
use xdalign::similarity::{cosine_score, SimilarityMatrix};
use xdalign::tune::sweep_threshold;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 11, 9).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- strategies

const THRESHOLDS: [f64; 4] = [0.0, 23.0, 46.0, 80.0];
const BATTERY: u64 = 1200;

/// Random matrix up to 8x8 in [0, 100]; every other one uses coarse integer
/// scores so that argmax ties actually occur.
fn random_matrix(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = (rng.random_range(1..=8), rng.random_range(1..=8));
    let coarse = seed.is_multiple_of(2);
    (0..r)
        .map(|_| {
            (0..c)
                .map(|_| {
                    if coarse {
                        f64::from(rng.random_range(0..=10u32) * 10)
                    } else {
                        (rng.random::<f64>() * 100.0).min(100.0)
                    }
                })
                .collect()
        })
        .collect()
}

fn to_matrix(s: &[Vec<f64>]) -> SimilarityMatrix {
    let rows = (0..s.len()).map(|i| format!("d{i}")).collect();
    let cols = (0..s[0].len()).map(|j| format!("f{j}")).collect();
    SimilarityMatrix::from_rows(day(), rows, cols, s).unwrap()
}

type CellSet = BTreeSet<(usize, usize)>;

/// Straight loop transcriptions of the five rules.
fn naive(s: &[Vec<f64>], theta: f64, strategy: Strategy) -> CellSet {
    let (r, c) = (s.len(), s[0].len());
    let mut best_de = CellSet::new();
    for i in 0..r {
        let mut b = 0;
        for j in 1..c {
            if s[i][j] > s[i][b] {
                b = j;
            }
        }
        if s[i][b] >= theta {
            best_de.insert((i, b));
        }
    }
    let mut best_fr = CellSet::new();
    for j in 0..c {
        let mut b = 0;
        for i in 1..r {
            if s[i][j] > s[b][j] {
                b = i;
            }
        }
        if s[b][j] >= theta {
            best_fr.insert((b, j));
        }
    }
    match strategy {
        Strategy::AboveThreshold => {
            let mut all = CellSet::new();
            for i in 0..r {
                for j in 0..c {
                    if s[i][j] >= theta {
                        all.insert((i, j));
                    }
                }
            }
            all
        }
        Strategy::BestSource => best_de,
        Strategy::BestTarget => best_fr,
        Strategy::Union => best_de.union(&best_fr).copied().collect(),
        Strategy::Intersection => best_de.intersection(&best_fr).copied().collect(),
    }
}

fn cells(m: &SimilarityMatrix, theta: f64, s: Strategy) -> CellSet {
    align_cells(m, theta, s)
        .into_iter()
        .map(|c| (c.row, c.col))
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut checks = 0;
    for seed in 0..BATTERY {
        let s = random_matrix(seed);
        let m = to_matrix(&s);
        for theta in THRESHOLDS {
            for strategy in Strategy::ALL {
                let got = cells(&m, theta, strategy);
                let want = naive(&s, theta, strategy);
                ensure(got == want, || {
                    format!("seed {seed} theta {theta} {strategy}: got {got:?}, want {want:?}")
                })?;
                checks += 1;
            }
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(5), || format!("took {took:?}"))?;
    Ok(format!(
        "{BATTERY} matrices, {checks} set comparisons, {took:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    let mut checks = 0;
    for seed in 0..BATTERY {
        let m = to_matrix(&random_matrix(seed));
        for theta in THRESHOLDS {
            let get = |s| cells(&m, theta, s);
            let (de, fr, above) = (
                get(Strategy::BestSource),
                get(Strategy::BestTarget),
                get(Strategy::AboveThreshold),
            );
            let (union, inter) = (get(Strategy::Union), get(Strategy::Intersection));
            let ctx = || format!("seed {seed} theta {theta}");
            ensure(inter == de.intersection(&fr).copied().collect(), || {
                format!("{}: intersection", ctx())
            })?;
            ensure(union == de.union(&fr).copied().collect(), || {
                format!("{}: union", ctx())
            })?;
            for (name, set) in [
                ("best-de", &de),
                ("best-fr", &fr),
                ("union", &union),
                ("intersection", &inter),
            ] {
                ensure(set.is_subset(&above), || {
                    format!("{}: {name} not within above-threshold", ctx())
                })?;
            }
            let rows: BTreeSet<_> = inter.iter().map(|c| c.0).collect();
            let cols: BTreeSet<_> = inter.iter().map(|c| c.1).collect();
            ensure(
                rows.len() == inter.len() && cols.len() == inter.len(),
                || format!("{}: intersection not 1:1", ctx()),
            )?;
            checks += 1;
        }
    }
    Ok(format!("{checks} matrix/threshold cases, zero violations"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checks = 0;
    for seed in 0..BATTERY {
        let m = to_matrix(&random_matrix(seed));
        let a = rng.random::<f64>() * 100.0;
        let b = rng.random::<f64>() * 100.0;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for theta in [(lo, hi), (0.0, 46.0), (23.0, 80.0)] {
            for s in Strategy::ALL {
                ensure(
                    cells(&m, theta.1, s).is_subset(&cells(&m, theta.0, s)),
                    || {
                        format!(
                            "seed {seed} {s}: align({}) not within align({})",
                            theta.1, theta.0
                        )
                    },
                )?;
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} comparisons, zero violations"))
}

fn criterion_4() -> Outcome {
    let m = to_matrix(&[vec![90.0, 10.0], vec![10.0, 80.0]]);
    let gold = GoldSet::new([("d0", "f0"), ("d1", "f1")]).map_err(|e| e.to_string())?;
    let r = sweep_threshold(&[m], &gold, Strategy::Intersection).map_err(|e| e.to_string())?;
    ensure(r.curve.len() == 201, || {
        format!("curve has {} points", r.curve.len())
    })?;
    ensure(r.best_f1 == 1.0, || format!("best f1 {}", r.best_f1))?;
    ensure(r.best_threshold == 80.0, || {
        format!("best threshold {}", r.best_threshold)
    })?;
    for (t, e) in &r.curve {
        let want = if *t <= 80.0 {
            1.0
        } else if *t <= 90.0 {
            2.0 / 3.0
        } else {
            0.0
        };
        ensure((e.f1 - want).abs() < 1e-12, || {
            format!("f1 at {t}: {} vs {want}", e.f1)
        })?;
    }
    Ok("201 points, best f1 1.0 at 80.0".into())
}

// ---------------------------------------------------------------- metrics

fn pearson_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx).powi(2);
        syy += (y[i] - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum() * f64::from(u8::from(x[i] != x[j]));
            let dy = (y[i] - y[j]).signum() * f64::from(u8::from(y[i] != y[j]));
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if dx == dy {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let d = ((conc + disc + tx) as f64) * ((conc + disc + ty) as f64);
    if n < 2 || d == 0.0 {
        return None;
    }
    Some((conc - disc) as f64 / d.sqrt())
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        _ => false,
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..500 {
        let n = rng.random_range(0..=50);
        let tied = case % 2 == 1;
        let draw = |rng: &mut ChaCha8Rng| {
            if tied {
                f64::from(rng.random_range(0..6u8))
            } else {
                rng.random::<f64>() * 200.0 - 100.0
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let (p, po) = (pearson(&x, &y), pearson_oracle(&x, &y));
        ensure(close(p, po, 1e-9), || {
            format!("case {case}: pearson {p:?} vs {po:?}")
        })?;
        let (k, ko) = (kendall_tau_b(&x, &y), kendall_oracle(&x, &y));
        ensure(close(k, ko, 1e-9), || {
            format!("case {case}: kendall {k:?} vs {ko:?}")
        })?;
    }
    let r = pearson(&[10.0, 20.0, 30.0], &[15.0, 15.0, 30.0]);
    ensure(close(r, Some(0.8660), 1e-4), || {
        format!("length case gave {r:?}")
    })?;
    let t = kendall_tau_b(&[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0]);
    ensure(close(t, Some(0.3333), 1e-4), || {
        format!("position case gave {t:?}")
    })?;
    Ok(format!(
        "500 random inputs within 1e-9; hand cases {:.4} and {:.4}",
        r.unwrap(),
        t.unwrap()
    ))
}

fn cosine_oracle(u: &[f64], v: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for i in 0..u.len() {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    100.0 * dot / (nu.sqrt() * nv.sqrt())
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..1000 {
        let d = rng.random_range(1..=64);
        let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        if u.iter().all(|x| *x == 0.0) || v.iter().all(|x| *x == 0.0) {
            continue;
        }
        let uv = cosine_score(&u, &v).map_err(|e| e.to_string())?;
        let vu = cosine_score(&v, &u).map_err(|e| e.to_string())?;
        let scale = rng.random::<f64>() * 1e3 + 1e-3;
        let su: Vec<f64> = u.iter().map(|x| x * scale).collect();
        let scaled = cosine_score(&su, &v).map_err(|e| e.to_string())?;
        ensure((uv - vu).abs() <= 1e-9, || {
            format!("case {case}: asymmetric {uv} {vu}")
        })?;
        ensure((uv - scaled).abs() <= 1e-9, || {
            format!("case {case}: scale {uv} {scaled}")
        })?;
        ensure(uv.abs() <= 100.0 + 1e-9, || {
            format!("case {case}: out of range {uv}")
        })?;
        let o = cosine_oracle(&u, &v);
        ensure((uv - o).abs() <= 1e-9, || {
            format!("case {case}: oracle {o} vs {uv}")
        })?;
    }
    let s = cosine_score(&[1.0, 0.0], &[1.0, 1.0]).map_err(|e| e.to_string())?;
    ensure((s - 70.7107).abs() <= 1e-4, || {
        format!("reference case gave {s}")
    })?;
    Ok(format!("1000 vector pairs; reference case {s:.4}"))
}

// ---------------------------------------------------------------- pipeline

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/news20")
}

fn run_pipeline(out: &Path, jobs: Option<u16>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_xdalign"));
    if let Some(j) = jobs {
        cmd.args(["--jobs", &j.to_string()]);
    }
    cmd.arg("pipeline")
        .arg("--config")
        .arg(fixture_dir().join("run.json"))
        .arg("--out-dir")
        .arg(out);
    let o = cmd.output().map_err(|e| e.to_string())?;
    ensure(o.status.success(), || {
        format!(
            "pipeline exited with {}: {}",
            o.status,
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

/// Every file under `dir` except run manifests, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else if !p.to_string_lossy().ends_with("manifest.json") {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn same_tree(
    a: &BTreeMap<String, Vec<u8>>,
    b: &BTreeMap<String, Vec<u8>>,
    label: &str,
) -> Result<(), String> {
    ensure(a.keys().eq(b.keys()), || {
        format!("{label}: file sets differ")
    })?;
    for (k, v) in a {
        ensure(&b[k] == v, || format!("{label}: {k} differs"))?;
    }
    Ok(())
}

fn jsonl(bytes: &[u8]) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(bytes)
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [
        ("first", None),
        ("second", None),
        ("jobs1", Some(1)),
        ("jobs4", Some(4)),
    ];
    let mut trees = Vec::new();
    for (name, jobs) in runs {
        let out = tmp.path().join(name);
        run_pipeline(&out, jobs)?;
        trees.push(snapshot(&out));
    }
    for (i, (name, _)) in runs.iter().enumerate().skip(1) {
        same_tree(&trees[0], &trees[i], name)?;
    }
    let took = start.elapsed();
    let tree = &trees[0];

    let docs_text = std::fs::read_to_string(fixture_dir().join("documents.jsonl"))
        .map_err(|e| e.to_string())?;
    let docs = parse_documents(&docs_text, &LangPair::default()).map_err(|e| e.to_string())?;
    let dates: HashMap<&str, NaiveDate> = docs
        .iter()
        .map(|d| (d.id.as_str(), d.publish_date))
        .collect();

    let sentences = tree
        .get("sentence_alignments.jsonl")
        .ok_or("no sentence alignments")?;
    let sentence_rows = jsonl(sentences);
    ensure(!sentence_rows.is_empty(), || {
        "no sentence pairs written".into()
    })?;
    for r in &sentence_rows {
        let len = |k: &str| r[k].as_str().unwrap().chars().count();
        ensure(len("src_text") >= 30 && len("tgt_text") >= 30, || {
            format!("short sentence pair {r}")
        })?;
    }

    let mut pairs_seen = 0;
    for (name, bytes) in tree.iter().filter(|(k, _)| k.ends_with(".jsonl")) {
        for r in jsonl(bytes) {
            for (a, b) in [("src_id", "tgt_id"), ("src_doc", "tgt_doc")] {
                if let (Some(s), Some(t)) = (r[a].as_str(), r[b].as_str()) {
                    ensure(dates[s] == dates[t], || {
                        format!("{name}: cross-date pair {s} / {t}")
                    })?;
                    pairs_seen += 1;
                }
            }
        }
    }
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    Ok(format!(
        "4 runs byte-identical over {} files; {} sentence pairs >= 30 chars; {pairs_seen} pairs same-date; {took:.2?}",
        tree.len(),
        sentence_rows.len()
    ))
}

// ---------------------------------------------------------------- report, store

fn random_pairs(rng: &mut ChaCha8Rng) -> Vec<DocPair> {
    let n = rng.random_range(0..300);
    let coarse = rng.random_bool(0.5);
    (0..n)
        .map(|i| {
            let score = if coarse {
                f64::from(rng.random_range(0..20u8)) * 5.0
            } else {
                rng.random::<f64>() * 200.0 - 100.0
            };
            DocPair {
                src_id: format!("d{}", rng.random_range(0..50)),
                tgt_id: format!("f{i}"),
                score,
                date: day(),
            }
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let seeds = 150;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        let pairs = random_pairs(&mut rng);
        let scores: Vec<f64> = pairs.iter().map(|p| p.score).collect();
        let bins = rng.random_range(1..=120);
        let low = rng.random::<f64>() * 100.0 - 50.0;
        let high = low + 1.0 + rng.random::<f64>() * 60.0;
        let h = score_histogram(&scores, bins, low, high).map_err(|e| e.to_string())?;
        let binned: u64 = h.counts.iter().sum();
        ensure(binned + h.below + h.above == scores.len() as u64, || {
            format!(
                "seed {seed}: {binned} + {} + {} != {}",
                h.below,
                h.above,
                scores.len()
            )
        })?;
        let inside = scores.iter().filter(|s| (low..=high).contains(*s)).count() as u64;
        ensure(binned == inside, || {
            format!("seed {seed}: {binned} binned, {inside} in range")
        })?;

        let full = top_k(&pairs, pairs.len());
        let k = rng.random_range(0..=pairs.len() + 5);
        let part = top_k(&pairs, k);
        ensure(part.len() == k.min(pairs.len()), || {
            format!("seed {seed}: top-{k} has {}", part.len())
        })?;
        ensure(full[..part.len()] == part[..], || {
            format!("seed {seed}: top-{k} is not a prefix")
        })?;
        let cutoff = part.last().map_or(f64::INFINITY, |p| p.score);
        ensure(full[part.len()..].iter().all(|p| p.score <= cutoff), || {
            format!("seed {seed}: excluded pair outranks the cut")
        })?;
    }
    Ok(format!("{seeds} seeds, zero violations"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut shapes = vec![(1, 1), (1, 7), (5, 1), (0, 3)];
    shapes.extend((0..60).map(|_| (rng.random_range(1..40), rng.random_range(1..70))));
    for (case, &(rows, dim)) in shapes.iter().enumerate() {
        let ids: Vec<String> = (0..rows)
            .map(|i| format!("doc-{case}-{i}#{}", i % 3))
            .collect();
        // arbitrary bit patterns, including NaN payloads and subnormals
        let data: Vec<f32> = (0..rows * dim)
            .map(|_| f32::from_bits(rng.random()))
            .collect();
        let bytes = encode(&ids, dim, &data);
        let path = tmp.path().join(format!("{case}.xdemb"));
        std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
        for back in [decode(&bytes), read_raw(&path)] {
            let back = back.map_err(|e| format!("case {case}: {e}"))?;
            ensure(back.ids == ids && back.dim == dim, || {
                format!("case {case}: header mismatch")
            })?;
            let same = back.data.len() == data.len()
                && back
                    .data
                    .iter()
                    .zip(&data)
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("case {case}: payload bits differ"))?;
        }
        ensure(
            encode(&ids, dim, &decode(&bytes).unwrap().data) == bytes,
            || format!("case {case}: re-encode differs"),
        )?;
    }
    Ok(format!(
        "{} matrices bit-exact, incl. dim 1 and single row",
        shapes.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("strategy-oracle equivalence", criterion_1),
        ("strategy algebra", criterion_2),
        ("threshold monotonicity", criterion_3),
        ("sweep correctness", criterion_4),
        ("metric oracles", criterion_5),
        ("cosine contract", criterion_6),
        ("pipeline determinism", criterion_7),
        ("histogram and top-k", criterion_8),
        ("vector store round trip", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

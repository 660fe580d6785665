//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crossing_core::counting::{count_by_bucket_bruteforce, count_by_bucket_fast, BucketCounts};
use crossing_core::diversity::variance_of;
use crossing_core::document::{deserialize_profile, deserialize_space, serialize_profile, serialize_space};
use crossing_core::presets::{builtin_crosswalk_space, builtin_profile, builtin_profiles, profile2_stage, Stage};
use crossing_core::{
    analyze, build_path, enumerate, jsd, AnalyzeOptions, ConstraintExpr, FeatureSchema, Profile, Rational,
    ScenarioSpace, SessionPlan, SkillGroup, ValueDistribution,
};
use crossing_service::{FileStore, ProfileRepository};

const KILL_ENV: &str = "CROSSING_ACCEPTANCE_WRITER";

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn profile(id: &str) -> Profile {
    builtin_profile(id).unwrap_or_else(|| panic!("missing builtin {id}"))
}

fn same_counts(a: &BucketCounts, b: &BucketCounts) -> bool {
    a == b
}

fn percent(part: u64, whole: u64) -> String {
    format!("{:.1}%", 100.0 * part as f64 / whole as f64)
}

fn space_size() -> Check {
    let space = builtin_crosswalk_space();
    let n = enumerate(&space, None).map_err(err)?.count() as u64;
    ensure(n == 331_776, format!("enumerated {n}"))?;
    let start = Instant::now();
    let counts = count_by_bucket_bruteforce(&space, &profile("profile-1")).map_err(err)?;
    let elapsed = start.elapsed();
    ensure(counts.total_all() == 331_776, "brute-force total differs")?;
    ensure(elapsed < Duration::from_secs(5), format!("brute force took {elapsed:?}"))?;
    Ok(format!("331776 scenarios, brute force {:.1} ms", elapsed.as_secs_f64() * 1e3))
}

fn exact_total(id: &str, expected: u64, share: &str) -> Check {
    let space = builtin_crosswalk_space();
    let counts = count_by_bucket_bruteforce(&space, &profile(id)).map_err(err)?;
    let (tp, ta) = (counts.total_profile(), counts.total_all());
    let pct = percent(tp, ta);
    ensure(tp == expected && pct == share, format!("{tp} / {ta} ({pct})"))?;
    Ok(format!("{tp} / {ta} ({pct})"))
}

fn staged_profile() -> Check {
    let space = builtin_crosswalk_space();
    let compiled: Vec<_> = Stage::ALL
        .iter()
        .map(|&s| profile2_stage(s).compile(&space))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut admitted = [0u64; 3];
    let mut stream = enumerate(&space, None).map_err(err)?;
    while let Some(a) = stream.next_assignment() {
        let m: Vec<bool> = compiled.iter().map(|c| c.matches(a)).collect();
        // a stage never admits what the next, louder stage rejects
        ensure(!(m[0] && !m[1]) && !(m[1] && !m[2]), format!("stages not nested at {a:?}"))?;
        for (n, hit) in admitted.iter_mut().zip(&m) {
            *n += *hit as u64;
        }
    }
    let expected = [9_216u64, 31_104, 73_728];
    let mut totals = Vec::new();
    for (i, stage) in Stage::ALL.into_iter().enumerate() {
        let p = profile(&format!("profile-2-{}", stage.name()));
        let fast = count_by_bucket_fast(&space, &p).map_err(err)?;
        let brute = count_by_bucket_bruteforce(&space, &p).map_err(err)?;
        ensure(same_counts(&fast, &brute), format!("{} fast and brute differ", stage.name()))?;
        ensure(
            fast.total_profile() == expected[i] && admitted[i] == expected[i],
            format!("{} total {} / scan {}", stage.name(), fast.total_profile(), admitted[i]),
        )?;
        totals.push(fast.total_profile());
    }
    ensure(totals.windows(2).all(|w| w[0] < w[1]), "totals do not increase")?;

    // the shipped stages never have disjoint bands, so check exclusivity on
    // quiet-only and loud-only variants of the same base
    let band = |values: [usize; 2]| {
        let mut args = vec![ConstraintExpr::allow(12, [3, 4]), ConstraintExpr::allow(1, [1, 2])];
        args.extend([9, 10, 11].map(|f| ConstraintExpr::allow(f, values)));
        ConstraintExpr::and(args).compile(&space)
    };
    let (quiet, loud) = (band([0, 1]).map_err(err)?, band([2, 3]).map_err(err)?);
    let mut stream = enumerate(&space, None).map_err(err)?;
    let (mut nq, mut nl) = (0u64, 0u64);
    while let Some(a) = stream.next_assignment() {
        let (q, l) = (quiet.matches(a), loud.matches(a));
        ensure(!(q && l), format!("disjoint bands overlap at {a:?}"))?;
        nq += q as u64;
        nl += l as u64;
    }
    ensure(nq > 0 && nl > 0, "disjoint bands admit nothing")?;
    Ok(format!("nested stages {totals:?}, fast == brute, disjoint bands exclusive"))
}

fn random_supported(rng: &mut ChaCha8Rng, space: &ScenarioSpace) -> ConstraintExpr {
    let mut parts = Vec::new();
    for f in &space.features {
        if rng.random_bool(0.3) {
            let n = f.values.len();
            let mut allowed: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
            if allowed.is_empty() {
                allowed.push(rng.random_range(0..n));
            }
            if rng.random_bool(0.3) && allowed.len() < n {
                let banned: Vec<usize> = (0..n).filter(|v| !allowed.contains(v)).collect();
                parts.push(ConstraintExpr::not(ConstraintExpr::allow(f.feature_id, banned)));
            } else {
                parts.push(ConstraintExpr::allow(f.feature_id, allowed));
            }
        }
    }
    if rng.random_bool(0.6) {
        let atoms: Vec<(u32, Vec<usize>)> = (0..rng.random_range(1..=3))
            .map(|_| {
                let f = &space.features[rng.random_range(0..space.features.len())];
                (f.feature_id, vec![rng.random_range(0..f.values.len())])
            })
            .collect();
        parts.push(ConstraintExpr::at_least_one(atoms));
    }
    if parts.is_empty() {
        ConstraintExpr::True
    } else {
        ConstraintExpr::and(parts)
    }
}

fn oracle_equivalence() -> Check {
    let space = builtin_crosswalk_space();
    for p in builtin_profiles() {
        let fast = count_by_bucket_fast(&space, &p).map_err(err)?;
        let brute = count_by_bucket_bruteforce(&space, &p).map_err(err)?;
        ensure(same_counts(&fast, &brute), format!("{} differs", p.profile_id))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let trials = 24;
    for i in 0..trials {
        let mut p = profile("profile-1");
        p.profile_id = format!("random-{i}");
        for w in p.weights.values_mut() {
            *w = rng.random_range(1..=5);
        }
        p.constraint = random_supported(&mut rng, &space);
        let fast = count_by_bucket_fast(&space, &p).map_err(|e| format!("random-{i}: {e}"))?;
        let brute = count_by_bucket_bruteforce(&space, &p).map_err(err)?;
        ensure(same_counts(&fast, &brute), format!("random-{i} differs: {:?}", p.constraint))?;
    }

    let big = ScenarioSpace {
        features: (1..=20)
            .map(|i| {
                FeatureSchema::new(i, format!("f{i}"), 1 + (i - 1) % 4, (1..=6).map(|v| Rational::new(v, 6)).collect())
            })
            .collect(),
        groups: (1..=4).map(|g| SkillGroup::new(g, format!("g{g}"))).collect(),
    };
    let mut p = profile("profile-1");
    p.weights = [(1, 2), (2, 3), (3, 4), (4, 5)].into_iter().collect();
    p.constraint = ConstraintExpr::and(vec![
        ConstraintExpr::allow(2, [1, 2, 3, 4]),
        ConstraintExpr::at_least_one([(5, vec![0]), (13, vec![5])]),
    ]);
    let start = Instant::now();
    let counts = count_by_bucket_fast(&big, &p).map_err(err)?;
    let elapsed = start.elapsed();
    ensure(counts.total_all() == 6u64.pow(20), "large space total")?;
    // four of six values on feature 2, minus rows with neither atom
    ensure(
        counts.total_profile() == 4 * 6u64.pow(19) - 4 * 5 * 5 * 6u64.pow(17),
        "large space profile total",
    )?;
    ensure(elapsed < Duration::from_secs(1), format!("large space took {elapsed:?}"))?;
    Ok(format!(
        "4 builtins + {trials} random constraints; 6^20 space in {:.2} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

fn jsd_numerics() -> Check {
    let v = |p: Vec<f64>| ValueDistribution::new(1, p).map(|d| variance_of(&d)).map_err(err);
    for n in 1..=8 {
        let u = variance_of(&ValueDistribution::uniform(1, n));
        ensure((u - 1.0).abs() <= 1e-9, format!("uniform {n}: {u}"))?;
    }
    let bin = v(vec![1.0, 0.0])?;
    let four = v(vec![1.0, 0.0, 0.0, 0.0])?;
    ensure((bin - 0.688722).abs() <= 1e-6, format!("binary {bin}"))?;
    ensure((four - 0.451205).abs() <= 1e-6, format!("4-ary {four}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut random = |n: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random() }).collect();
        let s: f64 = raw.iter().sum();
        if s == 0.0 {
            let mut one = vec![0.0; n];
            one[0] = 1.0;
            one
        } else {
            raw.into_iter().map(|x| x / s).collect()
        }
    };
    for i in 0..1000 {
        let n = 2 + i % 6;
        let (p, q) = (random(n), random(n));
        let a = jsd(&p, &q).map_err(err)?;
        let b = jsd(&q, &p).map_err(err)?;
        ensure((a - b).abs() <= 1e-12, format!("asymmetric pair {i}: {a} vs {b}"))?;
        ensure((0.0..=1.0).contains(&a), format!("out of bounds pair {i}: {a}"))?;
    }
    Ok(format!("binary {bin:.6}, 4-ary {four:.6}, 1000 pairs symmetric and bounded"))
}

fn qualitative_shape() -> Check {
    let space = builtin_crosswalk_space();
    let p1 = analyze(&space, &profile("profile-1"), AnalyzeOptions::default()).map_err(err)?;
    let window = |cd: Rational| cd >= Rational::new(3, 10) && cd <= Rational::new(7, 10);
    let mut lowest = f64::INFINITY;
    let constrained: Vec<u32> = p1.constrained_features.clone();
    for c in p1.curves.iter().filter(|c| !constrained.contains(&c.feature_id)) {
        for pt in c.points.iter().filter(|pt| window(pt.cd)) {
            lowest = lowest.min(pt.v);
            ensure(pt.v >= 0.9, format!("f{} at cd {}: V = {}", c.feature_id, pt.cd, pt.v))?;
        }
    }
    ensure(lowest.is_finite(), "no points in the plateau window")?;

    let p3 = count_by_bucket_fast(&space, &profile("profile-3")).map_err(err)?;
    let first = p3.nonempty().next().ok_or("profile 3 is empty")?;
    let cd = first.cd.to_f64();
    ensure((0.28..=0.40).contains(&cd), format!("profile 3 minimum cd {cd}"))?;
    Ok(format!("profile 1 plateau min V {lowest:.3}; profile 3 minimum cd {} ({cd:.3})", first.cd))
}

fn writer_loop(dir: &Path) -> ! {
    let store = FileStore::open(dir).unwrap();
    let mut i = 0u64;
    loop {
        let mut p = store.get("profile-4").unwrap();
        p.description = format!("{i};").repeat(30_000);
        p.name = format!("revision {}", p.version + 1);
        store.update(p).unwrap();
        i += 1;
    }
}

fn kill_test() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(err)?;
    FileStore::open_seeded(dir.path()).map_err(err)?;
    let exe = std::env::current_exe().map_err(err)?;
    for round in 0..5u64 {
        let mut child = Command::new(&exe)
            .env(KILL_ENV, dir.path())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(err)?;
        std::thread::sleep(Duration::from_millis(120 + round * 41));
        child.kill().map_err(err)?;
        child.wait().map_err(err)?;
        for entry in std::fs::read_dir(dir.path()).map_err(err)? {
            let path = entry.map_err(err)?.path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            if name.ends_with(".json") && !name.starts_with(".tmp-") {
                let text = std::fs::read_to_string(&path).map_err(err)?;
                let p = deserialize_profile(&text).map_err(|e| format!("torn {name}: {e}"))?;
                ensure(
                    p.version == 1 || p.name == format!("revision {}", p.version),
                    format!("{name} mixes revisions"),
                )?;
            }
        }
    }
    let store = FileStore::open(dir.path()).map_err(err)?;
    ensure(store.list().map_err(err)?.len() == 4, "store lost documents")?;
    ensure(store.get("profile-4").map_err(err)?.version > 1, "writer never committed")
}

fn repro_exit() -> Result<(), String> {
    let exe = std::env::current_exe().map_err(err)?;
    // target/<profile>/deps/acceptance-* -> target/<profile>/crossing
    let bin = exe
        .parent()
        .and_then(Path::parent)
        .map(|d| d.join(format!("crossing{}", std::env::consts::EXE_SUFFIX)))
        .ok_or("cannot locate the crossing binary")?;
    let out = tempfile::tempdir().map_err(err)?;
    let status = Command::new(&bin)
        .args(["paper-repro", "--out"])
        .arg(out.path())
        .env_remove("CROSSING_SPACE")
        .stdout(Stdio::null())
        .status()
        .map_err(|e| format!("{}: {e}", bin.display()))?;
    ensure(status.success(), format!("paper-repro exited with {status}"))
}

fn determinism() -> Check {
    let space = builtin_crosswalk_space();
    let targets = [Rational::new(1, 5), Rational::new(1, 2), Rational::new(9, 10)];
    for id in ["profile-1", "profile-3", "profile-4"] {
        let p = profile(id);
        let a = build_path(&space, &p, &targets, 4, 42).map_err(err)?;
        let b = build_path(&space, &p, &targets, 4, 42).map_err(err)?;
        ensure(a == b, format!("{id} plans differ for one seed"))?;
        let json = serde_json::to_string(&a).map_err(err)?;
        let back: SessionPlan = serde_json::from_str(&json).map_err(err)?;
        ensure(back == a, format!("{id} plan round-trip"))?;
    }
    ensure(deserialize_space(&serialize_space(&space)).map_err(err)? == space, "space round-trip")?;
    for p in builtin_profiles() {
        let back = deserialize_profile(&serialize_profile(&p)).map_err(err)?;
        ensure(back == p, format!("{} round-trip", p.profile_id))?;
    }
    kill_test()?;
    repro_exit()?;
    Ok("seeded plans stable, documents round-trip, no torn writes, paper-repro exits 0".into())
}

fn main() -> ExitCode {
    if let Ok(dir) = std::env::var(KILL_ENV) {
        writer_loop(Path::new(&dir));
    }
    let criteria: [Criterion; 9] = [
        ("space size and brute-force time", space_size),
        ("profile 1 total", || exact_total("profile-1", 290_304, "87.5%")),
        ("profile 4 total", || exact_total("profile-4", 147_456, "44.4%")),
        ("profile 3 total", || exact_total("profile-3", 16_384, "4.9%")),
        ("profile 2 stages", staged_profile),
        ("fast counting matches enumeration", oracle_equivalence),
        ("divergence numerics", jsd_numerics),
        ("plateau and minimum level", qualitative_shape),
        ("determinism and robustness", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

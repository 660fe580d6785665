use std::collections::BTreeSet;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use crossing_core::counting::{count_by_bucket, count_by_bucket_bruteforce, count_by_bucket_fast};
use crossing_core::document::{deserialize_profile_for, deserialize_space};
use crossing_core::export::{export, ExportFormat};
use crossing_core::presets::{builtin_crosswalk_space, builtin_profile, builtin_profile_ids, builtin_profiles};
use crossing_core::{analyze, build_path, AnalyzeOptions, Profile, Rational, ScenarioSpace};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "crossing", version, about = "Difficulty and diversity analysis of crossing-training scenarios")]
struct Cli {
    /// Scenario space document; defaults to the builtin crosswalk space
    #[arg(long, global = true, env = "CROSSING_SPACE")]
    space: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the active space: features, values, groups and total count
    Schema,
    /// Per-bucket scenario counts for a profile
    Counts {
        /// Builtin profile id or path to a profile document
        #[arg(long)]
        profile: String,
        /// Count by convolution instead of enumerating
        #[arg(long)]
        fast: bool,
    },
    /// Per-feature variance by difficulty level
    Variance {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        exclude_constrained: bool,
    },
    /// Write analysis artifacts for a profile
    Analyze {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
        format: Vec<String>,
        #[arg(long)]
        exclude_constrained: bool,
    },
    /// Sample a session plan as JSON
    Sample {
        #[arg(long)]
        profile: String,
        /// Target difficulty levels in [0,1], e.g. 0.3,0.6 or 1/3
        #[arg(long, value_delimiter = ',', required = true)]
        cd: Vec<String>,
        /// Scenarios per level
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check the builtin profiles against their reference totals and write figures
    PaperRepro {
        #[arg(long, default_value = "paper-repro")]
        out: PathBuf,
    },
    /// Start the HTTP service
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "profiles")]
        store: PathBuf,
        /// Directory of static console assets
        #[arg(long)]
        console: Option<PathBuf>,
    },
}

fn load_space(path: Option<&Path>) -> Result<ScenarioSpace> {
    match path {
        None => Ok(builtin_crosswalk_space()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            deserialize_space(&text).with_context(|| format!("loading space {}", p.display()))
        }
    }
}

fn load_profile(spec: &str, space: &ScenarioSpace) -> Result<Profile> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return deserialize_profile_for(&text, space).with_context(|| format!("loading profile {}", path.display()));
    }
    let profile = builtin_profile(spec).ok_or_else(|| {
        anyhow!(
            "unknown profile {spec:?}; builtin ids are {}",
            builtin_profile_ids().join(", ")
        )
    })?;
    let report = profile.validate(space);
    if !report.is_ok() {
        bail!("profile {spec} does not fit this space: {report}");
    }
    Ok(profile)
}

fn parse_cd(s: &str) -> Result<Rational> {
    s.parse::<Rational>().map_err(|e| anyhow!("bad cd value {s:?}: {e}"))
}

fn percent(part: u64, whole: u64) -> f64 {
    100.0 * part as f64 / whole as f64
}

fn schema(space: &ScenarioSpace) -> Result<()> {
    println!("groups:");
    for g in &space.groups {
        println!("  {:>2}  {}", g.group_id, g.name);
    }
    println!("features:");
    for f in &space.features {
        let values: Vec<String> = (0..f.values.len())
            .map(|i| format!("{}={}", f.label(i), f.values[i]))
            .collect();
        println!("  {:>2}  {} [group {}]: {}", f.feature_id, f.name, f.group_id, values.join(", "));
    }
    println!("total scenarios: {}", space.total_combinations()?);
    Ok(())
}

fn counts(space: &ScenarioSpace, profile: &Profile, fast: bool) -> Result<()> {
    let counts = if fast {
        count_by_bucket_fast(space, profile).or_else(|e| match e {
            crossing_core::Error::UnsupportedShape(reason) => {
                eprintln!("note: {reason}; counting by enumeration");
                count_by_bucket_bruteforce(space, profile)
            }
            other => Err(other),
        })?
    } else {
        count_by_bucket_bruteforce(space, profile)?
    };
    println!("{:>3}  {:>6}  {:>7}  {:>10}  {:>10}", "k", "cd", "", "all", "profile");
    for b in &counts.buckets {
        println!(
            "{:>3}  {:>6}  {:>7.3}  {:>10}  {:>10}",
            b.k,
            b.cd.to_string(),
            b.cd.to_f64(),
            b.count_all,
            b.count_profile
        );
    }
    let (tp, ta) = (counts.total_profile(), counts.total_all());
    println!("{tp} / {ta} ({:.1}%)", percent(tp, ta));
    Ok(())
}

fn variance(space: &ScenarioSpace, profile: &Profile, exclude_constrained: bool) -> Result<()> {
    let a = analyze(
        space,
        profile,
        AnalyzeOptions {
            use_fast_counting: true,
            exclude_constrained,
        },
    )?;
    if a.curves.is_empty() {
        println!("no features to report");
        return Ok(());
    }
    let mut header = format!("{:>6}", "cd");
    for c in &a.curves {
        header.push_str(&format!("  {:>6}", format!("f{}", c.feature_id)));
    }
    println!("{header}");
    for b in a.buckets.nonempty() {
        let mut row = format!("{:>6.3}", b.cd.to_f64());
        for c in &a.curves {
            match c.points.iter().find(|p| p.k == b.k) {
                Some(p) => row.push_str(&format!("  {:>6.3}", p.v)),
                None => row.push_str(&format!("  {:>6}", "-")),
            }
        }
        println!("{row}");
    }
    for c in &a.curves {
        println!("f{:<3} {}", c.feature_id, c.feature_name);
    }
    let fmt = |t: Option<Rational>| t.map_or("none".to_string(), |cd| format!("{cd} ({:.3})", cd.to_f64()));
    println!("low-end collapse: {}", fmt(a.thresholds.low_cd_collapse));
    println!("high-end collapse: {}", fmt(a.thresholds.high_cd_collapse));
    Ok(())
}

fn analyze_cmd(
    space: &ScenarioSpace,
    profile: &Profile,
    out: &Path,
    formats: &[String],
    exclude_constrained: bool,
) -> Result<()> {
    let formats = formats
        .iter()
        .map(|f| f.parse::<ExportFormat>())
        .collect::<Result<BTreeSet<_>, _>>()?;
    let a = analyze(
        space,
        profile,
        AnalyzeOptions {
            use_fast_counting: true,
            exclude_constrained,
        },
    )?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for f in formats {
        let path = export(&a, f, out)?;
        println!("wrote {}", path.display());
    }
    println!("{}", a.summary());
    Ok(())
}

fn sample(space: &ScenarioSpace, profile: &Profile, cd: &[String], n: usize, seed: u64) -> Result<()> {
    if n == 0 {
        bail!("--n must be at least 1");
    }
    let targets = cd.iter().map(|s| parse_cd(s)).collect::<Result<Vec<_>>>()?;
    let plan = build_path(space, profile, &targets, n, seed)?;
    for s in &plan.substitutions {
        eprintln!(
            "warning: no {} scenarios at cd {}; using nearest level {} ({:.3})",
            plan.profile,
            s.requested_cd,
            s.used_cd,
            s.used_cd.to_f64()
        );
    }
    emit(&serde_json::to_string_pretty(&plan)?)
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

const REFERENCE: [(&str, u64); 3] = [("profile-1", 290_304), ("profile-3", 16_384), ("profile-4", 147_456)];
const STAGED: [(&str, u64); 3] = [
    ("profile-2-easy", 9_216),
    ("profile-2-medium", 31_104),
    ("profile-2-hard", 73_728),
];

fn paper_repro(out: &Path) -> Result<bool> {
    let space = builtin_crosswalk_space();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut ok = true;
    println!("{:<18} {:>9} {:>9} {:>7}  status", "profile", "expected", "actual", "share");
    let mut check = |id: &str, expected: u64| -> Result<()> {
        let p = builtin_profile(id).expect("builtin id");
        let actual = count_by_bucket(&space, &p)?.total_profile();
        let pass = actual == expected;
        ok &= pass;
        println!(
            "{:<18} {:>9} {:>9} {:>6.1}%  {}",
            id,
            expected,
            actual,
            percent(actual, space.total_combinations()?),
            if pass { "PASS" } else { "FAIL" }
        );
        Ok(())
    };
    for (id, expected) in REFERENCE.iter().chain(&STAGED) {
        check(id, *expected)?;
    }
    println!(
        "notice: profile-2 stages use a derived encoding: traffic light with timer, long or double \
         crossing, and every background-noise volume capped at the stage ceiling (easy 1/3, medium 2/3, \
         hard 1). The stages are nested rather than disjoint."
    );
    for p in builtin_profiles() {
        let a = analyze(
            &space,
            &p,
            AnalyzeOptions {
                use_fast_counting: true,
                exclude_constrained: true,
            },
        )?;
        for f in ExportFormat::ALL {
            export(&a, f, out)?;
        }
    }
    println!("artifacts written to {}", out.display());
    Ok(ok)
}

fn serve(space: ScenarioSpace, addr: SocketAddr, store: &Path, console: Option<PathBuf>) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let store = crossing_service::FileStore::open_seeded(store)
        .with_context(|| format!("opening store {}", store.display()))?;
    let mut config = crossing_service::ServiceConfig::new(space, Arc::new(store));
    config.cors_origin = std::env::var("CROSSING_CORS_ORIGIN").ok();
    config.console_dir = console;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(crossing_service::serve(config, addr))?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let space = load_space(cli.space.as_deref())?;
    match cli.command {
        Command::Schema => schema(&space)?,
        Command::Counts { profile, fast } => counts(&space, &load_profile(&profile, &space)?, fast)?,
        Command::Variance {
            profile,
            exclude_constrained,
        } => variance(&space, &load_profile(&profile, &space)?, exclude_constrained)?,
        Command::Analyze {
            profile,
            out,
            format,
            exclude_constrained,
        } => analyze_cmd(&space, &load_profile(&profile, &space)?, &out, &format, exclude_constrained)?,
        Command::Sample { profile, cd, n, seed } => sample(&space, &load_profile(&profile, &space)?, &cd, n, seed)?,
        Command::PaperRepro { out } => {
            if cli.space.is_some() {
                eprintln!("note: paper-repro always uses the builtin space");
            }
            if !paper_repro(&out)? {
                return Ok(ExitCode::from(EXIT_MISMATCH));
            }
        }
        Command::Serve { addr, store, console } => serve(space, addr, &store, console)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

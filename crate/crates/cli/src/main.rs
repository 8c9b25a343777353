//! `walshu`: build and verify the constructions, writing JSON reports and CSV tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use walsh_universal::cascade::{
    build_cascade, build_step_approx, choose_schedule, verify_cascade, verify_step_approx, CascadePolicy, CascadeRecord,
    LevelPolicy, ScheduleRequest, StepApproxRequest, StepVerifyOptions, VerifyOptions,
};
use walsh_universal::config::RunConfig;
use walsh_universal::dyadic::{DyadicInterval, Piece, SetRecord, StepFunction};
use walsh_universal::exact::{format_rational, parse_rational, Rational, QS2};
use walsh_universal::flat::{verify_flat_poly, FlatPoly};
use walsh_universal::report::VerificationReport;
use walsh_universal::universal::{
    approximate, build_universal, convergence_csv, convergence_report, universal_from_json, universal_to_json,
    verify_selection, verify_universal, SelectOptions, UniversalFunction,
};
use walsh_universal::walsh::{fwht, fwht_f64, inverse_fwht, inverse_fwht_f64, verify_walsh, WalshVerifyOptions};
use walsh_universal::weight::{build_weight, verify_weight, weight_to_json};

#[derive(Parser)]
#[command(name = "walshu", version, about = "Exact Walsh-series constructions and their verification")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config file and WALSHU_OUTPUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for sampled checks; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel identities and transform round trips.
    VerifyWalsh(WalshArgs),
    /// The flat polynomial on one index block.
    VerifyLemma1(Lemma1Args),
    /// The two-polynomial cascade on a dyadic interval.
    VerifyLemma2(Lemma2Args),
    /// Approximation of a step function by a cascade series.
    VerifyLemma3(Lemma3Args),
    /// Build and verify the weight.
    BuildWeight(WeightArgs),
    /// Build and verify the universal function.
    BuildUniversal(WeightArgs),
    /// Choose signs approximating a target in the weighted norm.
    Approximate(ApproxArgs),
    /// Time the exact and floating-point transforms.
    BenchFwht(BenchArgs),
}

#[derive(Args)]
struct WalshArgs {
    #[arg(long, default_value_t = 8)]
    max_m: u32,
    #[arg(long, default_value_t = 12)]
    exact_level: u32,
    #[arg(long, default_value_t = 20)]
    float_level: u32,
}

#[derive(Args)]
struct Lemma1Args {
    /// Level of Δ.
    #[arg(long = "K")]
    k: u32,
    /// Block exponent: indices [2^M, 2^(M+1)).
    #[arg(long = "M")]
    m: u32,
    /// Position of Δ at level K.
    #[arg(long = "l", default_value_t = 0)]
    l: u64,
}

#[derive(Args)]
struct Lemma2Args {
    #[arg(long, value_parser = fraction)]
    eps: Rational,
    #[arg(long, value_parser = fraction, allow_hyphen_values = true)]
    gamma: Rational,
    #[arg(long = "delta-l", default_value_t = 0)]
    delta_l: u64,
    #[arg(long = "delta-K", default_value_t = 0)]
    delta_k: u32,
    #[arg(long, default_value_t = 1)]
    q: u32,
    #[arg(long, default_value_t = 1)]
    n0: u32,
    /// Structural levels instead of the quantitative ones.
    #[arg(long)]
    toy: bool,
}

#[derive(Args)]
struct Lemma3Args {
    /// Step function as a JSON array of {"l", "K", "value"}.
    #[arg(long)]
    f: PathBuf,
    #[arg(long, value_parser = fraction)]
    eps: Rational,
    #[arg(long, default_value_t = 1)]
    n0: u32,
    /// Stages per piece; defaults to the smallest q > log2(1/ε).
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    toy: bool,
    /// Seeded subsets for the statement on subsets of E_ε.
    #[arg(long, default_value_t = 50)]
    subsets: usize,
}

#[derive(Args)]
struct WeightArgs {
    #[arg(long, value_parser = fraction, default_value = "1/4")]
    delta: Rational,
    /// Number of stages; overrides the config's enumeration count.
    #[arg(long = "m-max")]
    m_max: Option<u32>,
}

#[derive(Args)]
struct ApproxArgs {
    /// Rational step function as a JSON array of {"l", "K", "value"}.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 3)]
    depth: u32,
    /// A stored universal function; built from --delta when absent.
    #[arg(long)]
    universal: Option<PathBuf>,
    #[arg(long, value_parser = fraction, default_value = "1/4")]
    delta: Rational,
    #[arg(long = "m-max")]
    m_max: Option<u32>,
}

#[derive(Args)]
struct BenchArgs {
    /// Levels J to time.
    #[arg(long, value_delimiter = ',', default_values_t = vec![8, 12, 16, 20])]
    levels: Vec<u32>,
    /// Largest J for the exact path.
    #[arg(long, default_value_t = 14)]
    exact_max: u32,
    #[arg(long, default_value_t = 5)]
    reps: u32,
}

fn fraction(s: &str) -> std::result::Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// Files computed by a command, written only once everything succeeded.
struct Artifacts {
    files: Vec<(String, String)>,
    pass: bool,
}

impl Artifacts {
    fn new() -> Self {
        Artifacts { files: Vec::new(), pass: true }
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        self.files.push((name.into(), serde_json::to_string_pretty(v)? + "\n"));
        Ok(())
    }

    fn text(&mut self, name: &str, s: String) {
        self.files.push((name.into(), s));
    }

    fn report(&mut self, name: &str, config: &RunConfig, inputs: Value, report: &VerificationReport, extra: Value) -> Result<()> {
        self.pass &= report.pass;
        print_report(report);
        self.json(name, &json!({ "config": echo(config), "inputs": inputs, "report": report, "artifacts": extra }))
    }

    fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, body) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// The config as echoed in reports: everything but where the reports go.
fn echo(c: &RunConfig) -> Value {
    let mut v = serde_json::to_value(c).expect("config serializes");
    v.as_object_mut().expect("object").remove("output_dir");
    v
}

fn print_report(r: &VerificationReport) {
    let failed: Vec<_> = r.failures().iter().map(|c| c.name.clone()).collect();
    println!(
        "{}: {} ({} checks, mode {:?}){}",
        r.subject,
        if r.pass { "PASS" } else { "FAIL" },
        r.checks.len(),
        r.mode,
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
}

fn read_step_function(path: &Path) -> Result<StepFunction> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let pieces: Vec<Piece> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(StepFunction::from_pieces(&pieces)?)
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => RunConfig::default(),
    };
    c.output_dir = c.resolved_output_dir();
    if let Some(d) = &cli.out {
        c.output_dir = d.clone();
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    c.validate()?;
    Ok(c)
}

fn verify_walsh_cmd(c: &RunConfig, a: &WalshArgs) -> Result<Artifacts> {
    if a.exact_level > c.j_max || a.float_level > c.j_max.max(30) {
        bail!("levels exceed J_max = {}", c.j_max);
    }
    let opts = WalshVerifyOptions {
        max_m: a.max_m,
        exact_level: a.exact_level,
        float_level: a.float_level,
        seed: c.seed,
        ..Default::default()
    };
    let report = verify_walsh(&opts);
    let mut out = Artifacts::new();
    let inputs = json!({ "max_m": a.max_m, "exact_level": a.exact_level, "float_level": a.float_level });
    out.report("walsh_report.json", c, inputs, &report, Value::Null)?;
    Ok(out)
}

fn verify_lemma1_cmd(c: &RunConfig, a: &Lemma1Args) -> Result<Artifacts> {
    let delta = DyadicInterval::new(a.l, a.k)?;
    let p = FlatPoly::new(delta, a.m)?;
    let report = verify_flat_poly(&p, c.j_max)?;
    let mut out = Artifacts::new();
    let extra = json!({ "poly": p, "E1": SetRecord::new(&p.e1()), "E2": SetRecord::new(&p.e2()) });
    out.report("lemma1_report.json", c, json!({ "K": a.k, "M": a.m, "l": a.l }), &report, extra)?;
    Ok(out)
}

fn verify_lemma2_cmd(c: &RunConfig, a: &Lemma2Args) -> Result<Artifacts> {
    let delta = DyadicInterval::new(a.delta_l, a.delta_k)?;
    let policy = if a.toy { LevelPolicy::ToyMinimal { k1: None } } else { LevelPolicy::Paper };
    let mut req = ScheduleRequest::new(a.n0, delta, a.eps.clone(), a.gamma.clone(), a.q, policy);
    req.index_bit_cap = c.index_bit_cap;
    req.cell_limit = c.cell_limit;
    let inputs = json!({
        "eps": format_rational(&a.eps), "gamma": format_rational(&a.gamma),
        "delta": { "l": a.delta_l, "K": a.delta_k }, "q": a.q, "n0": a.n0, "toy": a.toy,
    });
    let mut out = Artifacts::new();
    let schedule = match choose_schedule(&req) {
        Ok(s) => s,
        Err(e) => return infeasible(out, "lemma2", c, inputs, e),
    };
    let pair = build_cascade(&schedule)?;
    let report = verify_cascade(&pair, &VerifyOptions { j_max: c.j_max, seed: c.seed, ..Default::default() });
    out.report("lemma2_report.json", c, inputs, &report, serde_json::to_value(CascadeRecord::from(&pair))?)?;
    Ok(out)
}

/// An infeasible schedule is a result, reported and failed; other errors propagate.
fn infeasible(mut out: Artifacts, subject: &str, c: &RunConfig, inputs: Value, e: walsh_universal::Error) -> Result<Artifacts> {
    if !matches!(e, walsh_universal::Error::Infeasible { .. }) {
        return Err(e.into());
    }
    println!("{subject}: INFEASIBLE ({e})");
    out.pass = false;
    out.json(&format!("{subject}_report.json"), &json!({ "config": echo(c), "inputs": inputs, "infeasible": e.to_string() }))?;
    Ok(out)
}

fn verify_lemma3_cmd(c: &RunConfig, a: &Lemma3Args) -> Result<Artifacts> {
    let f = read_step_function(&a.f)?;
    let policy = if a.toy { CascadePolicy::Toy } else { CascadePolicy::Paper };
    let mut req = StepApproxRequest::new(f, a.eps.clone(), a.n0, policy);
    req.q = a.q;
    req.index_bit_cap = c.index_bit_cap;
    req.cell_limit = c.cell_limit;
    let approx = match build_step_approx(&req) {
        Ok(a) => a,
        Err(e) => {
            let inputs = json!({ "f": req.f, "eps": format_rational(&a.eps), "n0": a.n0, "q": a.q, "toy": a.toy });
            return infeasible(Artifacts::new(), "lemma3", c, inputs, e);
        }
    };
    let opts = StepVerifyOptions {
        seed: c.seed,
        subsets: a.subsets,
        cascade: VerifyOptions { j_max: c.j_max, seed: c.seed, ..Default::default() },
    };
    let report = verify_step_approx(&approx, &opts);
    let inputs = json!({ "f": approx.f, "eps": format_rational(&a.eps), "n0": a.n0, "q": approx.q, "toy": a.toy });
    let extra = json!({
        "end_level": approx.end_level(),
        "perturbation": approx.perturbation,
        "E_eps": SetRecord::new(&approx.e_eps),
        "blocks": approx.h.to_records(),
    });
    let mut out = Artifacts::new();
    out.report("lemma3_report.json", c, inputs, &report, extra)?;
    Ok(out)
}

fn weight_options(c: &RunConfig, m_max: Option<u32>) -> walsh_universal::weight::WeightOptions {
    let mut o = c.weight_options();
    if let Some(m) = m_max {
        o.m_max = m;
    }
    o
}

fn build_weight_cmd(c: &RunConfig, a: &WeightArgs) -> Result<Artifacts> {
    let w = build_weight(&a.delta, &weight_options(c, a.m_max))?;
    let report = verify_weight(&w);
    let mut out = Artifacts::new();
    out.text("weight.json", weight_to_json(&w)? + "\n");
    let inputs = json!({ "delta": format_rational(&a.delta), "M_max": w.m_max });
    out.report("weight_report.json", c, inputs, &report, json!({ "weight": "weight.json" }))?;
    Ok(out)
}

fn build_universal_cmd(c: &RunConfig, a: &WeightArgs) -> Result<Artifacts> {
    let g = build_universal(&a.delta, &weight_options(c, a.m_max))?;
    let report = verify_universal(&g);
    let mut out = Artifacts::new();
    out.text("universal.json", universal_to_json(&g)? + "\n");
    let inputs = json!({ "delta": format_rational(&a.delta), "M_max": g.stage_count() });
    out.report("universal_report.json", c, inputs, &report, json!({ "universal": "universal.json" }))?;
    Ok(out)
}

fn approximate_cmd(c: &RunConfig, a: &ApproxArgs) -> Result<Artifacts> {
    let target = read_step_function(&a.target)?;
    if a.depth == 0 {
        bail!("--depth must be at least 1");
    }
    let g: UniversalFunction = match &a.universal {
        Some(p) => universal_from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => build_universal(&a.delta, &weight_options(c, a.m_max))?,
    };
    if a.depth > g.stage_count() {
        bail!("--depth {} exceeds the {} stages", a.depth, g.stage_count());
    }
    let sel = approximate(&g, &target, &SelectOptions { depth: a.depth, allow_fallback: true })?;
    let report = verify_selection(&g, &sel);
    let rows = convergence_report(&sel);
    let mut out = Artifacts::new();
    out.text("convergence.csv", convergence_csv(&rows)?);
    out.json("convergence.json", &rows)?;
    let inputs = json!({ "target": target, "depth": a.depth, "stages": g.stage_count() });
    let extra = json!({
        "nu": sel.nus(),
        "initial_error": sel.initial_error,
        "steps": sel.steps,
        "convergence": "convergence.csv",
    });
    out.report("approximate_report.json", c, inputs, &report, extra)?;
    Ok(out)
}

fn bench_fwht_cmd(c: &RunConfig, a: &BenchArgs) -> Result<Artifacts> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(c.seed);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["J", "path", "nanos_per_transform"])?;
    for &j in &a.levels {
        if j > 26 {
            bail!("J = {j} is above the benchmark limit 26");
        }
        let v: Vec<f64> = (0..1usize << j).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = Instant::now();
        for _ in 0..a.reps {
            std::hint::black_box(inverse_fwht_f64(&fwht_f64(&v)?)?);
        }
        let ns = t.elapsed().as_nanos() / (2 * a.reps as u128);
        csv.write_record([j.to_string(), "float".into(), ns.to_string()])?;
        if j <= a.exact_max.min(c.j_max) {
            let e: Vec<QS2> = v.iter().map(|x| QS2::from_ratio((x * 1000.0) as i64, 1000)).collect();
            let t = Instant::now();
            for _ in 0..a.reps {
                std::hint::black_box(inverse_fwht(&fwht(&e, c.j_max)?, c.j_max)?);
            }
            let ns = t.elapsed().as_nanos() / (2 * a.reps as u128);
            csv.write_record([j.to_string(), "exact".into(), ns.to_string()])?;
        }
    }
    let body = String::from_utf8(csv.into_inner()?)?;
    print!("{body}");
    let mut out = Artifacts::new();
    out.text("bench_fwht.csv", body);
    Ok(out)
}

fn run(cli: &Cli) -> Result<bool> {
    let config = load_config(cli)?;
    let out = match &cli.command {
        Command::VerifyWalsh(a) => verify_walsh_cmd(&config, a)?,
        Command::VerifyLemma1(a) => verify_lemma1_cmd(&config, a)?,
        Command::VerifyLemma2(a) => verify_lemma2_cmd(&config, a)?,
        Command::VerifyLemma3(a) => verify_lemma3_cmd(&config, a)?,
        Command::BuildWeight(a) => build_weight_cmd(&config, a)?,
        Command::BuildUniversal(a) => build_universal_cmd(&config, a)?,
        Command::Approximate(a) => approximate_cmd(&config, a)?,
        Command::BenchFwht(a) => bench_fwht_cmd(&config, a)?,
    };
    out.write(&config.output_dir)?;
    Ok(out.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

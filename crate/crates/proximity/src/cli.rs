//! Command-line driver.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use proximity_core::coverage::Scope;
use proximity_core::model::StateUniverse;
use proximity_core::{Facility, FacilitySet, StateCode};
use serde::Serialize;

use crate::engine::{CompareRequest, Engine, GoalSpec, RegionSpec, ScenarioFile, ScenarioRequest, SviHistRequest};
use crate::ingest::{self, IngestReport, TextFormat};
use crate::report::{self, Format};
use crate::store::{Store, Universe};

pub const STORE_ENV: &str = "PROXIMITY_STORE";
pub const PORT_ENV: &str = "PROXIMITY_PORT";

/// Name of the set built from all `--state-sites` inputs.
pub const STATE_SET: &str = "state";

#[derive(Debug, Parser)]
#[command(name = "proximity", version, about = "Population-weighted proximity to service facilities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate input files and write a dataset store.
    Ingest(IngestArgs),
    /// Coverage shares, per-state tables, distances and the goal check for one scenario.
    Analyze(AnalyzeArgs),
    /// Share and distance deltas between a base and an augmented scenario.
    Compare(CompareArgs),
    /// Facility distribution over SVI deciles.
    SviHist(SviHistArgs),
    /// Serve the JSON API over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub tracts: PathBuf,
    #[arg(long)]
    pub svi: Option<PathBuf>,
    /// `NAME=PATH` or `NAME:CHAIN=PATH`; CHAIN defaults to NAME, `*` keeps every chain.
    #[arg(long = "facilities", value_name = "NAME[:CHAIN]=PATH")]
    pub facilities: Vec<String>,
    /// `STATE=PATH`; all state lists are merged into one set named `state`.
    #[arg(long = "state-sites", value_name = "STATE=PATH")]
    pub state_sites: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// Accept any two-letter state code instead of US states and territories.
    #[arg(long)]
    pub any_state: bool,
    /// Keep duplicate coordinates in the merged state-site set.
    #[arg(long)]
    pub keep_duplicate_sites: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ScenarioArgs {
    /// all | conus | comma-separated state list
    #[arg(long)]
    pub region: Option<String>,
    /// Comma-separated miles, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// `STATE=S1+S2`: tracts in STATE may also use facilities in S1, S2.
    #[arg(long = "cross-state", value_name = "STATE=S1+S2")]
    pub cross_state: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
    #[arg(long)]
    pub decimals: Option<usize>,
    /// Worker threads for distance computation (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, env = STORE_ENV)]
    pub store: PathBuf,
    /// Scenario name; with --scenario-file, selects the scenario to run.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub sets: Option<Vec<String>>,
    #[command(flatten)]
    pub common: ScenarioArgs,
    #[arg(long)]
    pub no_per_state: bool,
    #[arg(long)]
    pub goal_threshold: Option<f64>,
    #[arg(long)]
    pub goal_target: Option<f64>,
    #[arg(long)]
    pub goal_group: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, env = STORE_ENV)]
    pub store: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub base: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub augmented: Vec<String>,
    #[command(flatten)]
    pub common: ScenarioArgs,
    /// Output directory; prints the delta CSV to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SviHistArgs {
    #[arg(long, env = STORE_ENV)]
    pub store: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sets: Vec<String>,
    #[arg(long)]
    pub decimals: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = STORE_ENV)]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    #[arg(long, env = PORT_ENV, default_value_t = 8080)]
    pub port: u16,
    #[arg(long)]
    pub jobs: Option<usize>,
}

pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Ingest(a) => ingest_cmd(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::SviHist(a) => svi_hist_cmd(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn open(path: &Path, what: &str) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("cannot read {what} file {}", path.display()))
}

fn split_assignment<'a>(arg: &'a str, flag: &str) -> Result<(&'a str, &'a str)> {
    match arg.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => bail!("--{flag} expects KEY=VALUE, got {arg:?}"),
    }
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    store: String,
    manifest_sha256: &'a str,
    tracts: u64,
    svi_matched: u64,
    sets: Vec<(&'a str, u64)>,
    reports: &'a [(String, IngestReport)],
}

fn ingest_cmd(a: IngestArgs) -> Result<()> {
    let delimiter = u8::try_from(a.delimiter).context("--delimiter must be a single ASCII character")?;
    let universe = if a.any_state { Universe::Any } else { Universe::Us };
    let fmt = TextFormat { delimiter, universe: universe.state_universe() };
    let mut reports = Vec::new();

    let (mut tracts, report) = ingest::parse_tracts(open(&a.tracts, "tracts")?, &fmt)
        .with_context(|| format!("parsing tracts file {}", a.tracts.display()))?;
    reports.push((format!("tracts:{}", a.tracts.display()), report));
    if let Some(svi) = &a.svi {
        let (joined, report) = ingest::join_svi(tracts, open(svi, "svi")?, &fmt)
            .with_context(|| format!("parsing svi file {}", svi.display()))?;
        tracts = joined;
        reports.push((format!("svi:{}", svi.display()), report));
    }

    let mut sets: Vec<FacilitySet> = Vec::new();
    for spec in &a.facilities {
        let (key, path) = split_assignment(spec, "facilities")?;
        let (name, chain) = key.split_once(':').unwrap_or((key, key));
        let path = PathBuf::from(path);
        let (set, report) = ingest::parse_facilities(open(&path, "facility")?, chain, None, &fmt)
            .with_context(|| format!("parsing facility file {}", path.display()))?;
        let set = FacilitySet::new(name, set.facilities().to_vec())?;
        reports.push((format!("facilities:{name}:{}", path.display()), report));
        sets.push(set);
    }

    if !a.state_sites.is_empty() {
        let mut merged: Vec<Facility> = Vec::new();
        for spec in &a.state_sites {
            let (state, path) = split_assignment(spec, "state-sites")?;
            let state = StateCode::parse(state).with_context(|| format!("--state-sites {spec:?}"))?;
            if !fmt.universe.contains(state) && fmt.universe != StateUniverse::Any {
                bail!("--state-sites: {state} is not a known state");
            }
            let path = PathBuf::from(path);
            let (set, report) = ingest::parse_state_sites(open(&path, "state-site")?, state, &fmt)
                .with_context(|| format!("parsing state-site file {}", path.display()))?;
            reports.push((format!("state-sites:{state}:{}", path.display()), report));
            for f in set.facilities() {
                merged.push(
                    Facility::new(format!("{state}:{}", f.id()), f.chain(), f.state(), f.coordinate(), f.role(), f.quality())?
                        .with_tract(f.tract_id().map(String::from)),
                );
            }
        }
        let set = FacilitySet::new(STATE_SET, merged).context("merging state-site lists")?;
        let set = if a.keep_duplicate_sites { set } else { set.dedupe_coordinates() };
        sets.push(set);
    }

    let store = Store::write(&a.out, universe, &tracts, &sets, reports)?;
    let summary = IngestSummary {
        store: a.out.display().to_string(),
        manifest_sha256: &store.manifest_hash,
        tracts: store.manifest.tracts.records,
        svi_matched: store.manifest.svi_matched,
        sets: store.manifest.sets.iter().map(|s| (s.name.as_str(), s.file.records)).collect(),
        reports: &store.manifest.reports,
    };
    for (label, r) in &store.manifest.reports {
        for w in &r.warnings {
            eprintln!("warning: {label}: {w}");
        }
        if !r.rejected.is_empty() {
            eprintln!("warning: {label}: rejected {:?}", r.rejected);
        }
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn load_engine(store: &Path, jobs: Option<usize>) -> Result<Engine> {
    let store = Store::load(store).with_context(|| format!("loading store {}", store.display()))?;
    Ok(Engine::new(Arc::new(store), jobs)?)
}

fn parse_cross_state(items: &[String]) -> Result<std::collections::BTreeMap<String, Vec<String>>> {
    let mut out = std::collections::BTreeMap::<String, Vec<String>>::new();
    for item in items {
        let (state, extra) = split_assignment(item, "cross-state")?;
        out.entry(state.to_string())
            .or_default()
            .extend(extra.split(['+', ',']).map(str::trim).filter(|s| !s.is_empty()).map(String::from));
    }
    Ok(out)
}

fn scenario_request(a: &AnalyzeArgs) -> Result<ScenarioRequest> {
    let mut req = match &a.scenario_file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read scenario file {}", path.display()))?;
            let file: ScenarioFile =
                serde_json::from_str(&text).with_context(|| format!("invalid scenario file {}", path.display()))?;
            let Some(name) = &a.scenario else {
                bail!("--scenario-file requires --scenario NAME");
            };
            file.scenarios
                .into_iter()
                .find(|s| s.name.as_deref() == Some(name.as_str()))
                .with_context(|| format!("scenario {name:?} not found in {}", path.display()))?
        }
        None => {
            let Some(sets) = &a.sets else {
                bail!("either --sets or --scenario-file is required");
            };
            ScenarioRequest { name: a.scenario.clone(), sets: sets.clone(), ..ScenarioRequest::default() }
        }
    };
    if a.scenario_file.is_some() {
        if let Some(sets) = &a.sets {
            req.sets = sets.clone();
        }
    }
    let c = &a.common;
    if let Some(r) = &c.region {
        req.region = Some(RegionSpec::Name(r.clone()));
    }
    if c.thresholds.is_some() {
        req.thresholds = c.thresholds.clone();
    }
    if c.groups.is_some() {
        req.groups = c.groups.clone();
    }
    if !c.cross_state.is_empty() {
        req.cross_state = parse_cross_state(&c.cross_state)?;
    }
    if c.decimals.is_some() {
        req.decimals = c.decimals;
    }
    if a.no_per_state {
        req.per_state = Some(false);
    }
    if a.goal_threshold.is_some() || a.goal_target.is_some() || a.goal_group.is_some() {
        let mut g = req.goal.take().unwrap_or_default();
        g.threshold = a.goal_threshold.or(g.threshold);
        g.target = a.goal_target.or(g.target);
        g.group = a.goal_group.clone().or(g.group);
        req.goal = Some(GoalSpec { ..g });
    }
    Ok(req)
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<()> {
    let req = scenario_request(&a)?;
    let engine = load_engine(&a.store, a.common.jobs)?;
    let analysis = engine.analyze(&req)?;
    let d = analysis.scenario.decimals;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;

    let mut national = analysis.coverage.clone();
    national.rows.retain(|r| r.scope == Scope::National);
    let mut by_state = analysis.coverage.clone();
    by_state.rows.retain(|r| r.scope != Scope::National);

    let mut json = serde_json::to_vec_pretty(&analysis.to_json())?;
    json.push(b'\n');
    write_out(&a.out, "analysis.json", &json)?;
    write_out(&a.out, "coverage.csv", &report::render_coverage(&national, Format::Csv, d))?;
    write_out(&a.out, "coverage.json", &report::render_coverage(&analysis.coverage, Format::Json, d))?;
    write_out(&a.out, "coverage_by_state.csv", &report::render_coverage(&by_state, Format::Csv, d))?;
    write_out(&a.out, "distances.csv", &report::render_distances(&analysis.distances))?;
    write_out(&a.out, "stores_per_100k.csv", &report::render_rates(&analysis.rates, Format::Csv, d))?;
    let goal = report::render_goal(&analysis.goal, d);
    write_out(&a.out, "goal.txt", goal.as_bytes())?;
    print!("{goal}");
    Ok(())
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let c = &a.common;
    let req = CompareRequest {
        base: a.base.clone(),
        augmented: a.augmented.clone(),
        region: c.region.clone().map(RegionSpec::Name),
        thresholds: c.thresholds.clone(),
        groups: c.groups.clone(),
        cross_state: parse_cross_state(&c.cross_state)?,
        decimals: c.decimals,
    };
    let engine = load_engine(&a.store, c.jobs)?;
    let cmp = engine.compare(&req)?;
    let d = cmp.base.decimals;
    let csv = report::render_delta(&cmp.delta, Format::Csv, d);
    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let mut json = serde_json::to_vec_pretty(&cmp.to_json())?;
            json.push(b'\n');
            write_out(dir, "compare.json", &json)?;
            write_out(dir, "delta.csv", &csv)?;
            write_out(dir, "tract_deltas.csv", &report::render_tract_deltas(&cmp.delta))?;
        }
        None => std::io::stdout().write_all(&csv)?,
    }
    Ok(())
}

fn svi_hist_cmd(a: SviHistArgs) -> Result<()> {
    let engine = load_engine(&a.store, None)?;
    let hist = engine.svi_hist(&SviHistRequest { sets: a.sets.clone(), decimals: a.decimals })?;
    let csv = report::render_decile(&hist.histogram, Format::Csv, hist.decimals);
    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let mut json = serde_json::to_vec_pretty(&hist.to_json())?;
            json.push(b'\n');
            write_out(dir, "svi_hist.json", &json)?;
            write_out(dir, "svi_deciles.csv", &csv)?;
        }
        None => std::io::stdout().write_all(&csv)?,
    }
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(crate::service::serve(SocketAddr::new(a.bind, a.port), a.store, a.jobs))
}

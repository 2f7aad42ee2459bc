//! Command-line front end: `simulate`, `verify` and `sweep`.
//!
//! Exit codes: 0 success, 1 a verify check did not pass, 2 bad
//! configuration, 3 runtime failure. Diagnostics go to standard error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{generate_scenario, ScenarioGenerator, ScenarioSpec};
use crate::analysis::{run_trials, summarize_sweep, write_summaries_csv, SweepKey, TrialReport};
use crate::engine::{run_debate, ProtocolConfig};
use crate::llm::{
    heterogeneous_mix, llm_agents, read_questions, ChatClient, ClientConfig, ClientMode,
    LlmAgentConfig,
};
use crate::types::{write_transcripts, Protocol, Transcript};
use crate::verify::{Suite, Verdict};

#[derive(Debug, Parser)]
#[command(name = "acemad", version, about = "Peer-prediction multi-agent debate experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured debate once and write its transcript and summary.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "acemad-out")]
        out: PathBuf,
    },
    /// Run property suites and print one verdict per check.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Expand the sweep grid and write one summary row per cell.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "acemad-sweep")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0} check(s) did not pass")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentSource {
    #[default]
    Synthetic,
    Llm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsSection {
    pub source: AgentSource,
    /// Per-agent persona and temperature for chat agents. Defaults to the
    /// 80/20 generalist/skeptic mix over `scenario.n_agents`.
    pub llm_agents: Option<Vec<LlmAgentConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    #[serde(flatten)]
    pub client: ClientConfig,
    #[serde(default = "default_mode")]
    pub mode: ClientMode,
    /// Fixture file for record and replay, relative to the config file.
    pub fixture: Option<PathBuf>,
    /// Question file, relative to the config file.
    pub questions: PathBuf,
    /// Run only this question; all of them when absent.
    pub question_index: Option<usize>,
}

fn default_mode() -> ClientMode {
    ClientMode::Replay
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub trials: usize,
    pub seed: u64,
    pub protocols: Vec<Protocol>,
    pub n_agents: Vec<usize>,
    pub rounds: Vec<usize>,
    pub eta: Vec<f64>,
    pub truth_holder_mix: Vec<f64>,
    /// When set, each N gets `floor(fraction * N)` truth-holders.
    pub truth_holder_fraction: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            protocols: Vec::new(),
            n_agents: Vec::new(),
            rounds: Vec::new(),
            eta: Vec::new(),
            truth_holder_mix: Vec::new(),
            truth_holder_fraction: None,
        }
    }
}

/// The experiment file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub protocol: ProtocolConfig,
    pub agents: AgentsSection,
    pub sweep: SweepSection,
    pub llm: Option<LlmSection>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.scenario
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads `path`; returns the config and the raw bytes for hashing.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, bytes))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out).map(|_| ()),
        Command::Verify { suite, trials, seed } => verify(&suite, trials, seed),
        Command::Sweep {
            config,
            workers,
            out_dir,
        } => sweep(&config, workers, &out_dir),
    }
}

/// Process entry point: returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("acemad: {e}");
            e.exit_code()
        }
    }
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Human-readable round table of one transcript.
pub fn render_summary(t: &Transcript, truth_holders: &[usize]) -> String {
    let mut s = String::new();
    let label = |i: usize| t.answer_space.labels()[i].clone();
    let _ = writeln!(s, "protocol: {}", t.protocol);
    if let Some(mu) = &t.mu_series {
        let _ = writeln!(s, "round 0: mu={:.4}", mu[0]);
    }
    for r in &t.rounds {
        let alpha: f64 = truth_holders.iter().map(|&i| r.weights_after[i]).sum();
        let mu = t
            .mu_series
            .as_ref()
            .map(|m| format!("mu={:.4} ", m[r.round]))
            .unwrap_or_default();
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            s,
            "round {}: {mu}alpha_E={alpha:.4} scores=[{}] weights=[{}]",
            r.round,
            fmt(&r.scores),
            fmt(&r.weights_after)
        );
    }
    let verdict = match t.correct() {
        Some(true) => " (correct)",
        Some(false) => " (wrong)",
        None => "",
    };
    let _ = writeln!(s, "decision: {}{verdict}", label(t.final_decision));
    s
}

/// Runs one debate (or one per question for chat agents), writes
/// `transcript.jsonl` and `summary.txt` under `out`, and returns the summary.
pub fn simulate(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<String, CliError> {
    let (cfg, _) = ExperimentConfig::load(config_path)?;
    let (transcripts, summary) = match cfg.agents.source {
        AgentSource::Synthetic => {
            let spec = ScenarioSpec {
                seed: seed.unwrap_or(cfg.scenario.seed),
                ..cfg.scenario.clone()
            };
            let scenario = generate_scenario(&spec).map_err(|e| CliError::Config(e.to_string()))?;
            cfg.protocol
                .validate(scenario.n_agents())
                .map_err(|e| CliError::Config(e.to_string()))?;
            let mut agents = scenario.agents();
            let t = run_debate(&mut agents, &scenario.space, &cfg.protocol, spec.seed)
                .map_err(runtime)?;
            let summary = render_summary(&t, &scenario.truth_holders());
            (vec![t], summary)
        }
        AgentSource::Llm => simulate_llm(config_path, &cfg, seed)?,
    };
    fs::create_dir_all(out).map_err(runtime)?;
    let file = fs::File::create(out.join("transcript.jsonl")).map_err(runtime)?;
    write_transcripts(std::io::BufWriter::new(file), &transcripts).map_err(runtime)?;
    fs::write(out.join("summary.txt"), &summary).map_err(runtime)?;
    print!("{summary}");
    Ok(summary)
}

fn simulate_llm(
    config_path: &Path,
    cfg: &ExperimentConfig,
    seed: Option<u64>,
) -> Result<(Vec<Transcript>, String), CliError> {
    let llm = cfg
        .llm
        .as_ref()
        .ok_or_else(|| CliError::Config("agents.source = \"llm\" needs an [llm] section".into()))?;
    let questions = read_questions(&relative_to(config_path, &llm.questions))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let selected: Vec<_> = match llm.question_index {
        Some(i) => vec![questions
            .get(i)
            .ok_or_else(|| CliError::Config(format!("question_index {i} out of range")))?
            .clone()],
        None => questions,
    };
    let fixture = llm.fixture.as_ref().map(|p| relative_to(config_path, p));
    let client = Arc::new(
        ChatClient::new(llm.client.clone(), llm.mode, fixture.as_deref())
            .map_err(|e| CliError::Config(e.to_string()))?,
    );
    let personas = cfg
        .agents
        .llm_agents
        .clone()
        .unwrap_or_else(|| heterogeneous_mix(cfg.scenario.n_agents));
    let skeptics: Vec<usize> = (0..personas.len())
        .filter(|&i| personas[i].persona == crate::llm::Persona::Skeptic)
        .collect();
    let seed = seed.unwrap_or(cfg.scenario.seed);
    let mut transcripts = Vec::new();
    let mut summary = String::new();
    for q in &selected {
        let space = q.answer_space().map_err(|e| CliError::Config(e.to_string()))?;
        let mut agents = llm_agents(q, &personas, Arc::clone(&client));
        let t = run_debate(&mut agents, &space, &cfg.protocol, seed).map_err(runtime)?;
        let _ = writeln!(summary, "question {}", q.id);
        summary.push_str(&render_summary(&t, &skeptics));
        transcripts.push(t);
    }
    Ok((transcripts, summary))
}

pub fn verify(suite: &str, trials: usize, seed: u64) -> Result<(), CliError> {
    let suites: Vec<Suite> = if suite.eq_ignore_ascii_case("all") {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse().map_err(CliError::Config)?]
    };
    if trials == 0 {
        return Err(CliError::Config("--trials must be at least 1".into()));
    }
    let mut failed = 0;
    for s in suites {
        for check in s.run(trials, seed).map_err(runtime)? {
            println!("{check}");
            failed += (check.verdict != Verdict::Pass) as usize;
        }
    }
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

/// One sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub spec: ScenarioSpec,
    pub protocol: ProtocolConfig,
}

/// Cartesian product of the grid, protocols outermost. Empty axes take the
/// base config's value.
pub fn expand_grid(cfg: &ExperimentConfig) -> Result<Vec<SweepCell>, CliError> {
    let sw = &cfg.sweep;
    let or = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let protocols = if sw.protocols.is_empty() {
        vec![cfg.protocol.protocol]
    } else {
        sw.protocols.clone()
    };
    let ns = if sw.n_agents.is_empty() {
        vec![cfg.scenario.n_agents]
    } else {
        sw.n_agents.clone()
    };
    let rounds = if sw.rounds.is_empty() {
        vec![cfg.protocol.rounds]
    } else {
        sw.rounds.clone()
    };
    let etas = or(&sw.eta, cfg.protocol.eta);
    let mixes = or(&sw.truth_holder_mix, cfg.scenario.truth_holder_mix);
    let mut cells = Vec::new();
    for &p in &protocols {
        for &n in &ns {
            for &t in &rounds {
                for &eta in &etas {
                    for &mix in &mixes {
                        let n_truth_holders = match sw.truth_holder_fraction {
                            Some(f) => ScenarioSpec::truth_holders_for_fraction(n, f),
                            None => cfg.scenario.n_truth_holders,
                        };
                        let spec = ScenarioSpec {
                            n_agents: n,
                            n_truth_holders,
                            truth_holder_mix: mix,
                            ..cfg.scenario.clone()
                        };
                        spec.validate().map_err(|e| {
                            CliError::Config(format!("sweep cell N={n}: {e}"))
                        })?;
                        let protocol = ProtocolConfig {
                            protocol: p,
                            rounds: t,
                            eta,
                            ..cfg.protocol.clone()
                        };
                        protocol
                            .validate(n)
                            .map_err(|e| CliError::Config(format!("sweep cell N={n}: {e}")))?;
                        cells.push(SweepCell { spec, protocol });
                    }
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_sha256: String,
    seed: u64,
    trials: usize,
    cells: usize,
    tool_version: &'a str,
}

pub fn sweep(config_path: &Path, workers: Option<usize>, out_dir: &Path) -> Result<(), CliError> {
    let (cfg, bytes) = ExperimentConfig::load(config_path)?;
    if cfg.agents.source != AgentSource::Synthetic {
        return Err(CliError::Config("sweeps run synthetic agents only".into()));
    }
    if cfg.sweep.trials == 0 {
        return Err(CliError::Config("sweep.trials must be at least 1".into()));
    }
    let cells = expand_grid(&cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(runtime)?;
    let groups: Vec<(SweepKey, Vec<TrialReport>)> = pool.install(|| {
        cells
            .iter()
            .map(|c| {
                // fail early on a bad cell rather than deep inside a trial
                ScenarioGenerator::new(c.spec.clone()).map_err(runtime)?;
                let reports =
                    run_trials(&c.spec, &c.protocol, cfg.sweep.trials, cfg.sweep.seed)
                        .map_err(runtime)?;
                Ok((SweepKey::new(&c.spec, &c.protocol), reports))
            })
            .collect::<Result<_, CliError>>()
    })?;
    let summaries = summarize_sweep(&groups);

    fs::create_dir_all(out_dir).map_err(runtime)?;
    let csv = fs::File::create(out_dir.join("summary.csv")).map_err(runtime)?;
    write_summaries_csv(&summaries, csv).map_err(runtime)?;
    let json = serde_json::to_string_pretty(&summaries).map_err(runtime)?;
    fs::write(out_dir.join("summary.json"), json + "\n").map_err(runtime)?;
    let manifest = Manifest {
        config_sha256: hex::encode(Sha256::digest(&bytes)),
        seed: cfg.sweep.seed,
        trials: cfg.sweep.trials,
        cells: cells.len(),
        tool_version: env!("CARGO_PKG_VERSION"),
    };
    let manifest = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    fs::write(out_dir.join("manifest.json"), manifest + "\n").map_err(runtime)?;
    println!(
        "{} cells x {} trials -> {}",
        cells.len(),
        cfg.sweep.trials,
        out_dir.join("summary.csv").display()
    );
    Ok(())
}

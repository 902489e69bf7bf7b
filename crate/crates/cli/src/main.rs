//! `orion`: run scenarios and suites, serve live sessions, replay transcripts.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orion_core::explore::ScoreMode;
use orion_core::harness::run::{
    archive_run, parse_transcript, run_scenario_keep_stack, transcript_jsonl, LlmSource,
};
use orion_core::harness::{
    library, load_scenario, run_suite, PlannerKind, RunOptions, Scenario, SuiteManifest,
};
use orion_core::llm_gateway::EndpointConfig;
use orion_service::{serve, spawn, SessionConfig, DEFAULT_PORT};

#[derive(Parser)]
#[command(
    name = "orion",
    version,
    about = "Language-driven navigation in a simulated office floor"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every task of one scenario.
    Run {
        scenario: PathBuf,
        /// Seed; defaults to the scenario's first seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        planner: PlannerArgs,
        /// Directory for the transcript, metrics and final map.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a suite manifest and print the summary table.
    Suite {
        manifest: PathBuf,
        #[command(flatten)]
        llm: LlmArgs,
        /// Directory for per-run rows (JSONL and CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a live session over TCP.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        planner: PlannerArgs,
        /// Start paused; time then advances only on step commands.
        #[arg(long)]
        paused: bool,
        /// Real-time multiplier.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a recorded transcript and check it reproduces exactly.
    Replay {
        transcript: PathBuf,
        /// Write the reproduced transcript here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the bundled scenario library and suite manifests.
    ExportScenarios { dir: PathBuf },
}

#[derive(Args)]
struct PlannerArgs {
    /// oracle, llm, frontier or objectmap; defaults to the scenario's planner.
    #[arg(long)]
    planner: Option<PlannerKind>,
    /// Frontier scoring: intent or literal.
    #[arg(long)]
    frontier_score: Option<ScoreMode>,
    #[command(flatten)]
    llm: LlmArgs,
}

#[derive(Args)]
struct LlmArgs {
    /// Chat-completions endpoint for the llm planner.
    #[arg(long, env = "ORION_LLM_URL")]
    llm_url: Option<String>,
    #[arg(long, env = "ORION_LLM_KEY", hide_env_values = true)]
    llm_key: Option<String>,
    #[arg(long, default_value = "llama3")]
    planner_model: String,
    /// Take llm replies from a recorded transcript instead of an endpoint.
    #[arg(long, conflicts_with = "llm_url")]
    llm_replay: Option<PathBuf>,
}

impl LlmArgs {
    fn source(&self) -> Result<LlmSource, String> {
        if let Some(path) = &self.llm_replay {
            let t = parse_transcript(&read(path)?)?;
            return Ok(LlmSource::Replay(
                t.records.into_iter().map(|r| r.reply).collect(),
            ));
        }
        Ok(match &self.llm_url {
            Some(url) => {
                let mut cfg = EndpointConfig::new(url.clone(), self.planner_model.clone());
                cfg.api_key = self.llm_key.clone();
                LlmSource::Endpoint(cfg)
            }
            None => LlmSource::Unavailable,
        })
    }
}

impl PlannerArgs {
    fn options(&self) -> Result<RunOptions, String> {
        Ok(RunOptions {
            planner: self.planner,
            llm: self.llm.source()?,
            frontier_score: self.frontier_score,
        })
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<Scenario, String> {
    load_scenario(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn default_seed(s: &Scenario, seed: Option<u64>) -> u64 {
    seed.or_else(|| s.seeds.first().copied()).unwrap_or(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Cmd::Run {
            scenario,
            seed,
            planner,
            out,
        } => {
            let s = load(&scenario)?;
            let seed = default_seed(&s, seed);
            let opts = planner.options()?;
            let (result, stack) = run_scenario_keep_stack(&s, seed, &opts);
            for t in &result.tasks {
                println!(
                    "{}",
                    serde_json::to_string(&t.metrics).map_err(|e| e.to_string())?
                );
            }
            if let Some(dir) = out {
                let kind = opts.planner.unwrap_or(s.planner);
                archive_run(&dir, &s, seed, kind, &result, Some(&stack))
                    .map_err(|e| format!("{}: {e}", dir.display()))?;
            }
        }
        Cmd::Suite { manifest, llm, out } => {
            let (m, scenarios) = SuiteManifest::load(&manifest)
                .map_err(|e| format!("{}: {e}", manifest.display()))?;
            let opts = RunOptions {
                llm: llm.source()?,
                ..RunOptions::default()
            };
            let report = run_suite(&scenarios, m.seeds.as_deref(), &m.backends, &opts);
            print!("{}", report.summary_table());
            if let Some(dir) = out {
                report
                    .write(&dir)
                    .map_err(|e| format!("{}: {e}", dir.display()))?;
            }
        }
        Cmd::Serve {
            scenario,
            port,
            seed,
            planner,
            paused,
            speed,
            out,
        } => {
            if !(speed.is_finite() && speed > 0.0) {
                return Err("--speed must be a positive number".into());
            }
            let s = load(&scenario)?;
            let seed = default_seed(&s, seed);
            let cfg = SessionConfig {
                start_paused: paused,
                speed,
                out_dir: out,
                ..SessionConfig::default()
            };
            let (session, join) = spawn(s, seed, planner.options()?, cfg);
            let listener =
                TcpListener::bind(("127.0.0.1", port)).map_err(|e| format!("port {port}: {e}"))?;
            let (addr, _accept) = serve(listener, session).map_err(|e| e.to_string())?;
            println!("listening on {addr}");
            match join.join() {
                Ok(r) => r.map_err(|e| e.to_string())?,
                Err(_) => return Err("session thread panicked".into()),
            }
        }
        Cmd::Replay { transcript, out } => {
            let text = read(&transcript)?;
            let t = parse_transcript(&text)?;
            let replies = t.records.iter().map(|r| r.reply.clone()).collect();
            let opts = RunOptions {
                planner: Some(t.backend),
                llm: LlmSource::Replay(replies),
                frontier_score: None,
            };
            let (result, _) = run_scenario_keep_stack(&t.scenario, t.seed, &opts);
            let again = transcript_jsonl(&t.scenario, t.seed, t.backend, &result);
            if let Some(path) = out {
                std::fs::write(&path, &again).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            if let Some((i, (a, b))) = text
                .lines()
                .zip(again.lines())
                .enumerate()
                .find(|(_, (a, b))| a != b)
            {
                println!(
                    "transcript diverges at line {}:\n  recorded:   {a}\n  reproduced: {b}",
                    i + 1
                );
                return Ok(ExitCode::FAILURE);
            }
            let (n, m) = (text.lines().count(), again.lines().count());
            if n != m {
                println!("transcript length differs: recorded {n} lines, reproduced {m}");
                return Ok(ExitCode::FAILURE);
            }
            println!("transcript reproduced: {n} lines");
        }
        Cmd::ExportScenarios { dir } => {
            library::export(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

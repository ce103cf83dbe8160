//! `tomtalk` command line.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tomtalk_core::emotion::{EmotionEngine, SensorFrame};
use tomtalk_core::perception::ConfusionMatrix;
use tomtalk_core::recommend::{recommend, Recommendation};
use tomtalk_core::rewards::{edge_weight_sum, total_reward};
use tomtalk_core::simulator::{
    self, run_emotion_trial, EmpathyReference, SimConfig, TrialConfig, TrialPolicy,
    SATISFACTION_LEVELS,
};
use tomtalk_core::socialgraph::{read_graph, write_graph, SocialGraph, UserId};

use crate::config::{load_graph_file, PlatformConfig, CONFIG_ENV};

#[derive(Debug, Parser)]
#[command(name = "tomtalk", version, about = "Social pet platform engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Offline experiments.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Drive a pet from standard input.
    Pet {
        #[command(subcommand)]
        command: PetCommand,
    },
    /// Print recommendations for a user, one record per line.
    Recommend {
        #[arg(long)]
        user: String,
        /// Graph time; defaults to the configured clock.
        #[arg(long)]
        now: Option<u64>,
        #[arg(long)]
        top_n: Option<usize>,
        #[command(flatten)]
        platform: PlatformArgs,
    },
    /// Graph file conversion.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    Reward {
        #[command(subcommand)]
        command: RewardCommand,
    },
    /// Run the HTTP/websocket service until interrupted.
    Serve {
        #[command(flatten)]
        platform: PlatformArgs,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tick_ms: Option<u64>,
        /// Comma-separated pet ids.
        #[arg(long, value_delimiter = ',')]
        pets: Option<Vec<String>>,
    },
}

#[derive(Debug, Args)]
pub struct PlatformArgs {
    /// Platform config file.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Graph file, overriding the config.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

impl PlatformArgs {
    fn load(&self) -> Result<PlatformConfig, String> {
        let mut cfg = PlatformConfig::resolve(self.config.as_deref()).map_err(|e| e.to_string())?;
        if let Some(g) = &self.graph {
            cfg.graph = Some(g.clone());
        }
        Ok(cfg)
    }

    fn graph(&self) -> Result<(PlatformConfig, SocialGraph), String> {
        let cfg = self.load()?;
        let path = cfg
            .graph
            .clone()
            .ok_or("no graph file given; pass --graph or set `graph` in the config")?;
        let g = load_graph_file(&path, &cfg).map_err(|e| e.to_string())?;
        Ok((cfg, g))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimFormat {
    Table,
    Lines,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Policy {
    Engine,
    Mirror,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Reference {
    Recognized,
    True,
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Control-versus-treatment cohort simulation.
    Run {
        /// Simulation config (TOML); defaults apply without one.
        #[arg(long, env = "TOMTALK_SIM_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        weeks: Option<usize>,
        #[arg(long)]
        tasks_per_week: Option<usize>,
        /// Runs seeds `seed, seed+1, ...` in parallel.
        #[arg(long, default_value_t = 1)]
        replicates: u64,
        #[arg(long, value_enum, default_value_t = SimFormat::Table)]
        format: SimFormat,
    },
    /// Recognition and response satisfaction trial.
    Trial {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        participants: Option<usize>,
        #[arg(long)]
        interactions: Option<usize>,
        #[arg(long, value_enum, default_value_t = Policy::Engine)]
        policy: Policy,
        #[arg(long, value_enum, default_value_t = Reference::Recognized)]
        reference: Reference,
    },
}

#[derive(Debug, Subcommand)]
pub enum PetCommand {
    /// Reads commands from stdin: `tick [n]`, `feed <prop>`,
    /// `env <r1,r2,..> <w1,w2,..> <threshold>`, `state`, `quit`.
    Repl {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        platform: PlatformArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Write the graph in canonical form.
    Export {
        #[command(flatten)]
        platform: PlatformArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read a graph file (stdin by default), validate it and write it back
    /// in canonical form.
    Import {
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RewardCommand {
    Show {
        #[arg(long)]
        user: String,
        #[command(flatten)]
        platform: PlatformArgs,
    },
}

/// `key=value` record for one recommendation.
pub fn recommendation_line(r: &Recommendation) -> String {
    let e = &r.explanation;
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| x.to_string());
    let components = if e.components.is_empty() {
        "-".to_owned()
    } else {
        e.components
            .iter()
            .map(|(n, m)| format!("{n}:{m}"))
            .collect::<Vec<_>>()
            .join(";")
    };
    format!(
        "candidate={} score={} phase={} similarity={} distance_km={} structure={} affinity={} components={}",
        r.candidate,
        r.score,
        r.phase.as_str(),
        e.similarity,
        e.distance_km,
        opt(e.structure),
        opt(e.affinity),
        components
    )
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), String> {
    out.write_all(text.as_bytes())
        .map_err(|e| format!("cannot write output: {e}"))
}

fn write_file_or(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => write_out(out, text),
    }
}

fn graph_text(g: &SocialGraph) -> Result<String, String> {
    let mut buf = Vec::new();
    write_graph(g, &mut buf).map_err(|e| e.to_string())?;
    String::from_utf8(buf).map_err(|e| e.to_string())
}

/// Runs a parsed command. Errors come back as one-line diagnostics.
pub fn run(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), String> {
    match cli.command {
        Command::Sim { command } => run_sim(command, out),
        Command::Pet {
            command: PetCommand::Repl { seed, platform },
        } => {
            let cfg = platform.load()?;
            pet_repl(&cfg, seed.unwrap_or(cfg.seed), input, out)
        }
        Command::Recommend {
            user,
            now,
            top_n,
            platform,
        } => {
            let (cfg, g) = platform.graph()?;
            let mut params = cfg.recommend;
            if let Some(n) = top_n {
                params.top_n = n;
            }
            let now = now.unwrap_or_else(|| cfg.now());
            let recs = recommend(&g, &UserId::from(user.as_str()), &params, now)
                .map_err(|e| e.to_string())?;
            let mut text = String::new();
            for r in &recs {
                text.push_str(&recommendation_line(r));
                text.push('\n');
            }
            write_out(out, &text)
        }
        Command::Graph { command } => match command {
            GraphCommand::Export { platform, out: dest } => {
                let (_, g) = platform.graph()?;
                write_file_or(out, dest.as_deref(), &graph_text(&g)?)
            }
            GraphCommand::Import {
                config,
                input: src,
                out: dest,
            } => {
                let cfg = PlatformConfig::resolve(config.as_deref()).map_err(|e| e.to_string())?;
                let g = match &src {
                    Some(p) => load_graph_file(p, &cfg).map_err(|e| e.to_string())?,
                    None => read_graph(input, cfg.reward.params())
                        .map_err(|e| format!("<stdin>: {e}"))?,
                };
                write_file_or(out, dest.as_deref(), &graph_text(&g)?)
            }
        },
        Command::Reward {
            command: RewardCommand::Show { user, platform },
        } => {
            let (cfg, g) = platform.graph()?;
            let u = UserId::from(user.as_str());
            let params = cfg.reward.params();
            let total = total_reward(&g, &u, &params).map_err(|e| e.to_string())?;
            let sum = edge_weight_sum(&g, &u).map_err(|e| e.to_string())?;
            let profile = g.user(&u).map_err(|e| e.to_string())?;
            let friends = g.degree(&u).map_err(|e| e.to_string())?;
            write_out(
                out,
                &format!(
                    "user={u} total={total} alpha={} edge_weight_sum={sum} activities={} friends={friends}\n",
                    params.alpha, profile.activity_count
                ),
            )
        }
        Command::Serve {
            platform,
            listen,
            ledger,
            seed,
            tick_ms,
            pets,
        } => {
            let mut cfg = platform.load()?;
            if let Some(v) = listen {
                cfg.listen = v;
            }
            if let Some(v) = ledger {
                cfg.ledger = Some(v);
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = tick_ms {
                cfg.tick_ms = v;
            }
            if let Some(v) = pets {
                cfg.pets = v;
            }
            cfg.validate().map_err(|e| e.to_string())?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(crate::service::serve(cfg)).map_err(|e| e.to_string())
        }
    }
}

fn run_sim(command: SimCommand, out: &mut dyn Write) -> Result<(), String> {
    match command {
        SimCommand::Run {
            config,
            seed,
            weeks,
            tasks_per_week,
            replicates,
            format,
        } => {
            let mut cfg = match &config {
                Some(p) => SimConfig::load(p).map_err(|e| e.to_string())?,
                None => SimConfig::default(),
            };
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = weeks {
                cfg.weeks = v;
            }
            if let Some(v) = tasks_per_week {
                cfg.tasks_per_week = v;
            }
            cfg.validate().map_err(|e| e.to_string())?;
            if replicates == 0 {
                return Err("--replicates must be at least 1".into());
            }
            let seeds: Vec<u64> = (0..replicates).map(|i| cfg.seed.wrapping_add(i)).collect();
            let results = simulator::run_replicates(&cfg, &seeds);
            let mut text = String::new();
            for (i, r) in results.into_iter().enumerate() {
                let m = r.map_err(|e| e.to_string())?;
                match format {
                    SimFormat::Table => {
                        if i > 0 {
                            text.push('\n');
                        }
                        let _ = writeln!(text, "seed {} over {} weeks", m.seed, m.weeks);
                        text.push_str(&m.summary_table());
                    }
                    SimFormat::Lines => {
                        for line in m.to_lines().lines() {
                            let _ = writeln!(text, "seed={} {line}", m.seed);
                        }
                    }
                    SimFormat::Csv => {
                        let csv = m.to_csv();
                        let mut lines = csv.lines();
                        let header = lines.next().unwrap_or_default();
                        if i == 0 {
                            let _ = writeln!(text, "seed,{header}");
                        }
                        for line in lines {
                            let _ = writeln!(text, "{},{line}", m.seed);
                        }
                    }
                }
            }
            write_out(out, &text)
        }
        SimCommand::Trial {
            seed,
            participants,
            interactions,
            policy,
            reference,
        } => {
            let mut cfg = TrialConfig::default();
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = participants {
                cfg.participants = v;
            }
            if let Some(v) = interactions {
                cfg.interactions = v;
            }
            cfg.policy = match policy {
                Policy::Engine => TrialPolicy::Engine,
                Policy::Mirror => TrialPolicy::Mirror,
            };
            cfg.empathy_reference = match reference {
                Reference::Recognized => EmpathyReference::Recognized,
                Reference::True => EmpathyReference::True,
            };
            let stats = tomtalk_core::emotion::TransitionStats::bundled();
            let result = run_emotion_trial(&cfg, &ConfusionMatrix::bundled(), &stats)
                .map_err(|e| e.to_string())?;
            let mut text = String::new();
            for (label, count) in SATISFACTION_LEVELS.iter().zip(result.histogram) {
                let _ = writeln!(text, "level=\"{label}\" participants={count}");
            }
            let mean = result.empathy.iter().sum::<f64>() / result.empathy.len() as f64;
            let _ = writeln!(text, "mean_empathy={mean} recognitions={}", result.recognitions);
            write_out(out, &text)
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number `{x}`")))
        .collect()
}

/// Headless pet loop. Each failed command prints `error: ...`; the exit
/// status reports whether any did.
pub fn pet_repl(
    cfg: &PlatformConfig,
    seed: u64,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), String> {
    let mut engine =
        EmotionEngine::new(cfg.engine.clone(), cfg.stats().map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    for p in cfg.prop_items().map_err(|e| e.to_string())? {
        engine.register_prop(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        let n = input
            .read_line(&mut line)
            .map_err(|e| format!("cannot read input: {e}"))?;
        if n == 0 {
            break;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let reply: Result<String, String> = match words.as_slice() {
            [] => continue,
            ["quit"] | ["exit"] => break,
            ["tick"] | ["tick", _] => {
                let count = match words.get(1) {
                    Some(n) => n.parse::<u64>().map_err(|_| format!("bad tick count `{n}`")),
                    None => Ok(1),
                };
                count.map(|n| {
                    (0..n)
                        .map(|_| engine.tick(&mut rng).to_line())
                        .collect::<Vec<_>>()
                        .join("\n")
                })
            }
            ["feed", prop] => engine
                .feed(&(*prop).into())
                .map(|(s3, s4)| format!("fed prop={prop} s3={s3} s4={s4}"))
                .map_err(|e| e.to_string()),
            ["env", readings, weights, threshold] => (|| {
                let frame = SensorFrame {
                    readings: parse_list(readings)?,
                    weights: parse_list(weights)?,
                    threshold: threshold
                        .parse()
                        .map_err(|_| format!("bad threshold `{threshold}`"))?,
                };
                let (e, s1, s2) = engine.sense(&frame).map_err(|e| e.to_string())?;
                Ok(format!("comfort={e} s1={s1} s2={s2}"))
            })(),
            ["state"] => {
                let s = engine.snapshot();
                let p: Vec<String> = s.probabilities.iter().map(f64::to_string).collect();
                let w: Vec<String> = s.personality.iter().map(f64::to_string).collect();
                Ok(format!(
                    "tick={} emotion={} p={} w={} traces={}",
                    s.tick,
                    s.emotion,
                    p.join(","),
                    w.join(","),
                    s.traces.len()
                ))
            }
            ["help"] => Ok("commands: tick [n] | feed <prop> | env <r,..> <w,..> <threshold> | state | quit".into()),
            _ => Err(format!("unknown command `{}`", line.trim())),
        };
        let text = match reply {
            Ok(t) => t,
            Err(e) => {
                failures += 1;
                format!("error: {e}")
            }
        };
        writeln!(out, "{text}").map_err(|e| format!("cannot write output: {e}"))?;
    }
    if failures > 0 {
        Err(format!("{failures} command(s) failed"))
    } else {
        Ok(())
    }
}

//! `meanking`: verification, tables, simulation, threshold search and an
//! interactive round-by-round game.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use meanking::experiment::{run_plan, tally, threshold_report, Session, TrialPlan};
use meanking::format::sig12;
use meanking::linalg::{fidelity, StateVector};
use meanking::optics::ImperfectionConfig;
use meanking::protocol::{
    challenge_post_state, init_state, projected_state, vaa_basis, BobChoice, Game,
    ProjectionLabel, UnitaryLabel, VaaVariant,
};
use meanking::strategies::{search_optimum, CHALLENGE_THRESHOLD, PROJECTION_THRESHOLD};
use meanking::{golden, verify};

#[derive(Parser)]
#[command(name = "meanking", version, about = "Mean King's Problem: retrodiction protocol and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant checks and compare the golden files.
    Verify {
        #[arg(long)]
        json: bool,
        /// Directory holding the golden JSON files.
        #[arg(long)]
        golden_dir: Option<PathBuf>,
        /// Regenerate the golden files instead of checking them.
        #[arg(long)]
        write_golden: bool,
    },
    /// Print the reference states and thresholds.
    Table {
        #[arg(long)]
        json: bool,
    },
    /// Run a Monte Carlo trial plan.
    Simulate {
        plan: PathBuf,
        /// Also write the count table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Exit nonzero unless every channel and the average beat the threshold.
        #[arg(long)]
        enforce_threshold: bool,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the plan's seed.
        #[arg(long, env = "MEANKING_SEED")]
        seed: Option<u64>,
    },
    /// Grid search for the best single-qubit cheating strategy.
    Optimize {
        #[arg(long, value_enum)]
        game: GameArg,
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        #[arg(long)]
        json: bool,
    },
    /// Play rounds as Bob from standard input.
    Game {
        #[arg(long, value_enum, default_value_t = VariantArg::First)]
        variant: VariantArg,
        /// Play the Second Challenge instead of the projection game.
        #[arg(long)]
        challenge: bool,
        /// Imperfection config JSON; ideal optics when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        max_resends: u32,
        #[arg(long, env = "MEANKING_SEED")]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GameArg {
    Projection,
    SecondChallenge,
}

impl From<GameArg> for Game {
    fn from(g: GameArg) -> Self {
        match g {
            GameArg::Projection => Game::Projection,
            GameArg::SecondChallenge => Game::SecondChallenge,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    First,
    Second,
}

impl From<VariantArg> for VaaVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::First => VaaVariant::First,
            VariantArg::Second => VaaVariant::Second,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify {
            json,
            golden_dir,
            write_golden,
        } => cmd_verify(json, golden_dir, write_golden),
        Command::Table { json } => cmd_table(json),
        Command::Simulate {
            plan,
            csv,
            json,
            enforce_threshold,
            workers,
            seed,
        } => cmd_simulate(plan, csv, json, enforce_threshold, workers, seed),
        Command::Optimize {
            game,
            resolution,
            json,
        } => cmd_optimize(game.into(), resolution, json),
        Command::Game {
            variant,
            challenge,
            config,
            max_resends,
            seed,
        } => cmd_game(variant.into(), challenge, config, max_resends, seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn pass_code(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cmd_verify(json: bool, dir: Option<PathBuf>, write: bool) -> Result<ExitCode> {
    let dir = dir.unwrap_or_else(golden::default_dir);
    if write {
        let written = golden::write_all(&dir)
            .with_context(|| format!("writing golden files to {}", dir.display()))?;
        for p in written {
            println!("wrote {}", p.display());
        }
        return Ok(ExitCode::SUCCESS);
    }
    let checks = verify::run_checks(Some(&dir))?;
    let pass = checks.iter().all(|c| c.pass);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({"pass": pass, "checks": checks}))?
        );
    } else {
        for c in &checks {
            println!(
                "{} {}: {}",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let failed = checks.iter().filter(|c| !c.pass).count();
        println!("{} checks, {failed} failed", checks.len());
    }
    Ok(pass_code(pass))
}

/// Round-off below this prints as zero.
const DISPLAY_ZERO: f64 = 1e-14;

fn complex_text(re: f64, im: f64) -> String {
    let snap = |x: f64| if x.abs() < DISPLAY_ZERO { 0.0 } else { x };
    let (re, im) = (snap(re), snap(im));
    let sign = if im < 0.0 { '-' } else { '+' };
    format!("{}{}{}i", sig12(re), sign, sig12(im.abs()))
}

fn state_text(s: &StateVector) -> String {
    let parts: Vec<String> = s.to_pairs().iter().map(|[r, i]| complex_text(*r, *i)).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_table(as_json: bool) -> Result<ExitCode> {
    let init = init_state();
    let bases: Vec<_> = VaaVariant::BOTH
        .iter()
        .map(|&v| {
            let b = vaa_basis(v);
            (v, b.outcomes.into_iter().zip(b.states).collect::<Vec<_>>())
        })
        .collect();
    let projected: Vec<_> = ProjectionLabel::ALL
        .iter()
        .map(|&l| {
            let s = projected_state(l);
            let ov = fidelity(&s, &init).expect("same basis");
            (l, s, ov)
        })
        .collect();
    let challenged: Vec<_> = UnitaryLabel::ALL
        .iter()
        .map(|&u| (u, challenge_post_state(u)))
        .collect();

    if as_json {
        let doc = json!({
            "basis_order": ["E,h", "E,v", "L,h", "L,v"],
            "init": init.to_pairs(),
            "vaa_bases": bases.iter().map(|(v, rows)| json!({
                "variant": v,
                "states": rows.iter().map(|(o, s)| json!({"outcome": o, "amplitudes": s.to_pairs()})).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "projected_states": projected.iter().map(|(l, s, ov)| json!({
                "label": l, "amplitudes": s.to_pairs(), "overlap_with_init": ov,
            })).collect::<Vec<_>>(),
            "challenge_post_states": challenged.iter().map(|(u, s)| json!({
                "unitary": u, "amplitudes": s.to_pairs(),
            })).collect::<Vec<_>>(),
            "thresholds": {
                "projection": PROJECTION_THRESHOLD,
                "second_challenge": CHALLENGE_THRESHOLD,
            },
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(ExitCode::SUCCESS);
    }

    println!("basis order (E,h) (E,v) (L,h) (L,v)");
    println!("initial state {}", state_text(&init));
    for (v, rows) in &bases {
        println!();
        println!("{v} VAA basis");
        for (o, s) in rows {
            println!("  {o:<4} {}", state_text(s));
        }
    }
    println!();
    println!("projected states, overlap with the initial state");
    for (l, s, ov) in &projected {
        println!("  '{l}'  {}  {}", state_text(s), sig12(*ov));
    }
    println!();
    println!("challenge post-states");
    for (u, s) in &challenged {
        println!("  {u:<4} {}", state_text(s));
    }
    println!();
    println!("single-qubit thresholds");
    println!("  projection        {}", sig12(PROJECTION_THRESHOLD));
    println!("  second challenge  {}", sig12(CHALLENGE_THRESHOLD));
    Ok(ExitCode::SUCCESS)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cmd_simulate(
    path: PathBuf,
    csv: Option<PathBuf>,
    as_json: bool,
    enforce: bool,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut plan =
        TrialPlan::from_json(&text).with_context(|| format!("plan {}", path.display()))?;
    if let Some(s) = seed {
        plan.seed = s;
    }
    let workers = workers.unwrap_or_else(default_workers);
    if workers == 0 {
        bail!("--workers must be at least 1");
    }
    let records = run_plan(&plan, workers)?;
    let table = tally(&records)?;
    let report = threshold_report(&table, plan.game);
    if let Some(p) = &csv {
        fs::write(p, table.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    if as_json {
        let doc = json!({
            "plan": plan,
            "table": table.to_json(),
            "threshold_report": report,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        print!("{}", table.to_text());
        println!();
        print!("{}", report.to_text());
    }
    Ok(if enforce {
        pass_code(report.all_pass)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_optimize(game: Game, resolution: usize, as_json: bool) -> Result<ExitCode> {
    let r = search_optimum(game, resolution)?;
    let [pt, pp, mt, mp] = r.argmax.angles();
    let runtime_ms = r.elapsed.as_secs_f64() * 1e3;
    if as_json {
        let doc = json!({
            "game": game,
            "resolution": resolution,
            "optimum": r.optimum,
            "argmax_angles": {
                "prep_theta": pt, "prep_phi": pp, "meas_theta": mt, "meas_phi": mp,
            },
            "grid_optimum": r.grid_optimum,
            "evaluations": r.evaluations,
            "runtime_ms": runtime_ms,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("{game}: best single-qubit success {}", sig12(r.optimum));
        println!("  grid {resolution}, grid best {}", sig12(r.grid_optimum));
        println!("  prepare (theta, phi) = ({}, {})", sig12(pt), sig12(pp));
        println!("  measure (theta, phi) = ({}, {})", sig12(mt), sig12(mp));
        println!("  {} evaluations in {runtime_ms:.1} ms", r.evaluations);
        println!("  numerical evidence from a grid search with local refinement, not a proof");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_game(
    variant: VaaVariant,
    challenge: bool,
    config: Option<PathBuf>,
    max_resends: u32,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let cfg = match &config {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ImperfectionConfig::from_json(&text).with_context(|| format!("config {}", p.display()))?
        }
        None => ImperfectionConfig::ideal(),
    };
    let game = if challenge {
        Game::SecondChallenge
    } else {
        Game::Projection
    };
    let seed = seed.unwrap_or_else(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64)
    });
    let mut session = Session::new(game, variant, cfg, max_resends, seed)?;
    let options: Vec<String> = BobChoice::all(game).iter().map(|c| c.to_string()).collect();

    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut out = io::stdout();
    let (mut played, mut won) = (0u64, 0u64);
    println!("{game} game, {variant} VAA basis, seed {seed}");
    loop {
        print!("Bob's choice [{}] or q: ", options.join(" "));
        out.flush()?;
        let Some(line) = lines.next().transpose()? else {
            println!();
            break;
        };
        let input = line.trim();
        if input.is_empty() {
            continue;
        }
        if matches!(input, "q" | "quit" | "exit") {
            break;
        }
        let choice = match input.parse::<BobChoice>() {
            Ok(c) if c.game() == game => c,
            _ => {
                println!("unrecognized choice `{input}`");
                continue;
            }
        };
        let r = session.play(choice)?;
        played += 1;
        if r.resend_count > 0 {
            println!("no click; Alice resent the photon {} time(s)", r.resend_count);
        }
        match (r.detector_fired, r.vaa_outcome, r.alice_guess) {
            (Some(d), Some(o), Some(g)) => {
                let dark = if r.dark_click { " (dark click)" } else { "" };
                println!("detector d{d} fired{dark}: Alice's VAA outcome {o}");
                if r.correct {
                    won += 1;
                    println!("Alice answers {g}: correct");
                } else {
                    println!("Alice answers {g}: wrong");
                }
            }
            _ => println!("no click after {} resends; round lost", r.resend_count),
        }
        println!("score {won}/{played}");
    }
    println!("final score {won}/{played}");
    Ok(ExitCode::SUCCESS)
}

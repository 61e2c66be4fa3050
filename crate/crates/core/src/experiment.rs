//! Monte Carlo runs of the full apparatus: Bob picks a setting, Alice sends
//! photons until a gated detector clicks (or gives up), then answers.
//!
//! Every trial owns a ChaCha8 stream keyed by `(seed, trial index)`, so the
//! records do not depend on how trials are spread over threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{sig12, sig12_or_na};
use crate::optics::{DetectionDistribution, ImperfectionConfig, Pipeline};
use crate::protocol::{infer_choice, BobChoice, Game, VaaOutcome, VaaVariant};
use crate::strategies::threshold;

/// How Bob picks his setting for each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BobPolicy {
    /// One of the game's six choices at random each trial.
    Uniform,
    /// The same choice every trial.
    Fixed(BobChoice),
    /// Each listed choice in turn, `trials_per_setting` trials each.
    Scripted(Vec<BobChoice>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialPlan {
    pub game: Game,
    pub variant: VaaVariant,
    pub bob_choice_policy: BobPolicy,
    pub trials_per_setting: u64,
    /// Extra photons allowed after the first before the run is abandoned.
    pub max_resends: u32,
    pub seed: u64,
    #[serde(default)]
    pub imperfections: ImperfectionConfig,
}

impl TrialPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_setting < 1 {
            return Err(Error::InvalidPlan("trials_per_setting must be at least 1".into()));
        }
        if self.max_resends < 1 {
            return Err(Error::InvalidPlan("max_resends must be at least 1".into()));
        }
        let check = |c: &BobChoice| {
            if c.game() == self.game {
                Ok(())
            } else {
                Err(Error::InvalidPlan(format!(
                    "choice `{c}` does not belong to the {} game",
                    self.game
                )))
            }
        };
        match &self.bob_choice_policy {
            BobPolicy::Uniform => {}
            BobPolicy::Fixed(c) => check(c)?,
            BobPolicy::Scripted(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidPlan("empty script".into()));
                }
                list.iter().try_for_each(check)?;
            }
        }
        self.imperfections.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s).map_err(|e| Error::InvalidPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn settings(&self) -> u64 {
        match &self.bob_choice_policy {
            BobPolicy::Uniform => 6,
            BobPolicy::Fixed(_) => 1,
            BobPolicy::Scripted(list) => list.len() as u64,
        }
    }

    pub fn total_trials(&self) -> u64 {
        self.trials_per_setting * self.settings()
    }
}

/// What happened in one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub trial: u64,
    pub bob_choice: BobChoice,
    /// Photons sent before the one that produced the click (or all extra
    /// photons, for a run without a click).
    pub resend_count: u32,
    pub detector_fired: Option<usize>,
    /// The click came from the photon inside the gate, not a dark count.
    pub in_gate: bool,
    pub dark_click: bool,
    pub vaa_outcome: Option<VaaOutcome>,
    pub alice_guess: Option<BobChoice>,
    pub correct: bool,
}

impl RunRecord {
    pub fn clicked(&self) -> bool {
        self.detector_fired.is_some()
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// A validated plan with its networks built.
#[derive(Debug, Clone)]
pub struct Simulator {
    plan: TrialPlan,
    choices: Vec<BobChoice>,
    pipelines: Vec<Pipeline>,
    /// Distributions reused across trials when the optics are static.
    cached: Option<Vec<DetectionDistribution>>,
}

impl Simulator {
    pub fn new(plan: TrialPlan) -> Result<Self> {
        plan.validate()?;
        let choices = BobChoice::all(plan.game);
        let pipelines: Vec<Pipeline> = choices
            .iter()
            .map(|&c| Pipeline::new(c, plan.variant))
            .collect();
        let cached = if plan.imperfections.is_static() {
            let cfg = plan.imperfections;
            Some(
                pipelines
                    .iter()
                    .map(|p| {
                        p.propagate(&cfg, &crate::optics::Perturbation::none(p.network.len()))
                    })
                    .collect::<Result<_>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            plan,
            choices,
            pipelines,
            cached,
        })
    }

    pub fn plan(&self) -> &TrialPlan {
        &self.plan
    }

    fn choice_index(&self, trial: u64, rng: &mut ChaCha8Rng) -> usize {
        let pick = |c: &BobChoice| {
            self.choices
                .iter()
                .position(|x| x == c)
                .expect("validated choice")
        };
        match &self.plan.bob_choice_policy {
            BobPolicy::Uniform => rng.random_range(0..self.choices.len()),
            BobPolicy::Fixed(c) => pick(c),
            BobPolicy::Scripted(list) => {
                pick(&list[(trial / self.plan.trials_per_setting) as usize])
            }
        }
    }

    /// One trial: Bob's choice, the trial's imperfection draws, then photons
    /// until a click or the resend limit.
    pub fn run(&self, trial: u64) -> Result<RunRecord> {
        if trial >= self.plan.total_trials() {
            return Err(Error::InvalidArgument(format!(
                "trial {trial} is outside the plan's {} trials",
                self.plan.total_trials()
            )));
        }
        let mut rng = trial_rng(self.plan.seed, trial);
        let idx = self.choice_index(trial, &mut rng);
        let choice = self.choices[idx];
        let pipeline = &self.pipelines[idx];
        let dist = match &self.cached {
            Some(c) => c[idx].clone(),
            None => {
                let draws = pipeline.draw(&self.plan.imperfections, &mut rng);
                pipeline.propagate(&self.plan.imperfections, &draws)?
            }
        };
        let mut record = RunRecord {
            trial,
            bob_choice: choice,
            resend_count: 0,
            detector_fired: None,
            in_gate: false,
            dark_click: false,
            vaa_outcome: None,
            alice_guess: None,
            correct: false,
        };
        for attempt in 0..=self.plan.max_resends {
            record.resend_count = attempt;
            if let Some(click) = dist.sample(rng.random::<f64>()) {
                let outcome = pipeline.outcome_of(click.detector);
                let guess = infer_choice(outcome, choice);
                record.detector_fired = Some(click.detector);
                record.in_gate = !click.dark;
                record.dark_click = click.dark;
                record.vaa_outcome = Some(outcome);
                record.alice_guess = Some(guess);
                record.correct = guess == choice;
                break;
            }
        }
        Ok(record)
    }

    /// All trials of the plan on `workers` threads, in trial order.
    pub fn run_all(&self, workers: usize) -> Result<Vec<RunRecord>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let n = self.plan.total_trials();
        pool.install(|| (0..n).into_par_iter().map(|t| self.run(t)).collect())
    }
}

/// Round-by-round play with a human choosing Bob's setting.
#[derive(Debug, Clone)]
pub struct Session {
    game: Game,
    variant: VaaVariant,
    cfg: ImperfectionConfig,
    max_resends: u32,
    rng: ChaCha8Rng,
    rounds: u64,
}

impl Session {
    pub fn new(
        game: Game,
        variant: VaaVariant,
        cfg: ImperfectionConfig,
        max_resends: u32,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            game,
            variant,
            cfg,
            max_resends,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rounds: 0,
        })
    }

    pub fn game(&self) -> Game {
        self.game
    }

    /// Sends photons for `choice` until a click or the resend limit.
    pub fn play(&mut self, choice: BobChoice) -> Result<RunRecord> {
        if choice.game() != self.game {
            return Err(Error::InvalidArgument(format!(
                "`{choice}` is not a {} choice",
                self.game
            )));
        }
        let pipeline = Pipeline::new(choice, self.variant);
        let draws = pipeline.draw(&self.cfg, &mut self.rng);
        let dist = pipeline.propagate(&self.cfg, &draws)?;
        let mut record = RunRecord {
            trial: self.rounds,
            bob_choice: choice,
            resend_count: 0,
            detector_fired: None,
            in_gate: false,
            dark_click: false,
            vaa_outcome: None,
            alice_guess: None,
            correct: false,
        };
        self.rounds += 1;
        for attempt in 0..=self.max_resends {
            record.resend_count = attempt;
            if let Some(click) = dist.sample(self.rng.random::<f64>()) {
                let outcome = pipeline.outcome_of(click.detector);
                let guess = infer_choice(outcome, choice);
                record.detector_fired = Some(click.detector);
                record.in_gate = !click.dark;
                record.dark_click = click.dark;
                record.vaa_outcome = Some(outcome);
                record.alice_guess = Some(guess);
                record.correct = guess == choice;
                break;
            }
        }
        Ok(record)
    }
}

pub fn simulate_run(plan: &TrialPlan, trial: u64) -> Result<RunRecord> {
    Simulator::new(plan.clone())?.run(trial)
}

pub fn run_plan(plan: &TrialPlan, workers: usize) -> Result<Vec<RunRecord>> {
    Simulator::new(plan.clone())?.run_all(workers)
}

/// Counts for one Bob choice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoiceRow {
    pub choice: BobChoice,
    pub counts: [u64; 4],
    pub runs: u64,
    pub clicked: u64,
    pub no_click: u64,
    pub correct: u64,
    /// `correct / clicked`; undefined without clicks.
    pub success: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountTable {
    pub game: Game,
    pub rows: Vec<ChoiceRow>,
    /// Mean of the defined per-choice fractions.
    pub average: Option<f64>,
    /// `√(Σ stderr²) / k` over the same rows.
    pub average_stderr: Option<f64>,
    pub total_runs: u64,
    pub mean_resends: f64,
}

/// `√(p(1−p)/n)`.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Aggregates records into per-choice counts, in the game's canonical choice
/// order. Choices that never occur are omitted.
pub fn tally(records: &[RunRecord]) -> Result<CountTable> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("no records to tally".into()))?;
    let game = first.bob_choice.game();
    let mut rows = Vec::new();
    for choice in BobChoice::all(game) {
        let mut row = ChoiceRow {
            choice,
            counts: [0; 4],
            runs: 0,
            clicked: 0,
            no_click: 0,
            correct: 0,
            success: None,
            stderr: None,
        };
        for r in records.iter().filter(|r| r.bob_choice == choice) {
            row.runs += 1;
            match r.detector_fired {
                Some(k) => {
                    row.counts[k] += 1;
                    row.clicked += 1;
                    row.correct += u64::from(r.correct);
                }
                None => row.no_click += 1,
            }
        }
        if row.runs == 0 {
            continue;
        }
        if row.clicked > 0 {
            let p = row.correct as f64 / row.clicked as f64;
            row.success = Some(p);
            row.stderr = Some(binomial_stderr(p, row.clicked));
        }
        rows.push(row);
    }
    if records.iter().any(|r| r.bob_choice.game() != game) {
        return Err(Error::InvalidArgument("records mix both games".into()));
    }
    let defined: Vec<&ChoiceRow> = rows.iter().filter(|r| r.success.is_some()).collect();
    let (average, average_stderr) = if defined.is_empty() {
        (None, None)
    } else {
        let k = defined.len() as f64;
        let avg = defined.iter().map(|r| r.success.unwrap()).sum::<f64>() / k;
        let var: f64 = defined.iter().map(|r| r.stderr.unwrap().powi(2)).sum();
        (Some(avg), Some(var.sqrt() / k))
    };
    let clicked: Vec<&RunRecord> = records.iter().filter(|r| r.clicked()).collect();
    let mean_resends = if clicked.is_empty() {
        f64::NAN
    } else {
        clicked.iter().map(|r| r.resend_count as f64).sum::<f64>() / clicked.len() as f64
    };
    Ok(CountTable {
        game,
        rows,
        average,
        average_stderr,
        total_runs: records.len() as u64,
        mean_resends,
    })
}

impl CountTable {
    pub const CSV_HEADER: &'static str =
        "choice,d0,d1,d2,d3,runs,clicked,no_click,correct,success,stderr";

    pub fn row(&self, choice: BobChoice) -> Option<&ChoiceRow> {
        self.rows.iter().find(|r| r.choice == choice)
    }

    /// One line per choice, then an `average` line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", Self::CSV_HEADER).unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.choice,
                r.counts[0],
                r.counts[1],
                r.counts[2],
                r.counts[3],
                r.runs,
                r.clicked,
                r.no_click,
                r.correct,
                sig12_or_na(r.success),
                sig12_or_na(r.stderr)
            )
            .unwrap();
        }
        let sum = |f: fn(&ChoiceRow) -> u64| self.rows.iter().map(f).sum::<u64>();
        let counts: Vec<u64> = (0..4)
            .map(|k| self.rows.iter().map(|r| r.counts[k]).sum())
            .collect();
        writeln!(
            s,
            "average,{},{},{},{},{},{},{},{},{},{}",
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            sum(|r| r.runs),
            sum(|r| r.clicked),
            sum(|r| r.no_click),
            sum(|r| r.correct),
            sig12_or_na(self.average),
            sig12_or_na(self.average_stderr)
        )
        .unwrap();
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }

    /// Human-readable table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<7}{:>8}{:>8}{:>8}{:>8}{:>9}{:>10}  success ± stderr",
            "choice", "d0", "d1", "d2", "d3", "clicked", "no-click"
        )
        .unwrap();
        for r in &self.rows {
            let frac = match (r.success, r.stderr) {
                (Some(p), Some(e)) => format!("{:.4} ± {:.4}", p, e),
                _ => "undefined".into(),
            };
            writeln!(
                s,
                "{:<7}{:>8}{:>8}{:>8}{:>8}{:>9}{:>10}  {}",
                r.choice.to_string(),
                r.counts[0],
                r.counts[1],
                r.counts[2],
                r.counts[3],
                r.clicked,
                r.no_click,
                frac
            )
            .unwrap();
        }
        match (self.average, self.average_stderr) {
            (Some(a), Some(e)) => writeln!(s, "average odds {:.4} ± {:.4}", a, e).unwrap(),
            _ => writeln!(s, "average odds undefined").unwrap(),
        }
        writeln!(s, "mean resends per click {:.4}", self.mean_resends).unwrap();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelVerdict {
    pub choice: BobChoice,
    pub success: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub game: Game,
    pub threshold: f64,
    pub channels: Vec<ChannelVerdict>,
    pub average: Option<f64>,
    pub average_pass: bool,
    pub all_pass: bool,
}

/// A fraction passes only when strictly above the single-qubit optimum;
/// undefined fractions fail.
pub fn threshold_report(table: &CountTable, game: Game) -> ThresholdReport {
    let t = threshold(game);
    let above = |x: Option<f64>| x.is_some_and(|p| p > t);
    let channels: Vec<ChannelVerdict> = table
        .rows
        .iter()
        .map(|r| ChannelVerdict {
            choice: r.choice,
            success: r.success,
            pass: above(r.success),
        })
        .collect();
    let average_pass = above(table.average);
    let all_pass = average_pass && !channels.is_empty() && channels.iter().all(|c| c.pass);
    ThresholdReport {
        game,
        threshold: t,
        channels,
        average: table.average,
        average_pass,
        all_pass,
    }
}

impl ThresholdReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "threshold {} ({})", sig12(self.threshold), self.game).unwrap();
        for c in &self.channels {
            writeln!(
                s,
                "{:<5} {:<12} {}",
                c.choice.to_string(),
                sig12_or_na(c.success),
                if c.pass { "above" } else { "AT OR BELOW" }
            )
            .unwrap();
        }
        writeln!(
            s,
            "average {} {}",
            sig12_or_na(self.average),
            if self.average_pass { "above" } else { "AT OR BELOW" }
        )
        .unwrap();
        s
    }
}

/// Mean failed photons per click in a truncated geometric run, given a
/// per-photon click probability `p` and at most `max_resends + 1` photons.
/// Returns `(mean, standard deviation)` of the resend count among clicked
/// runs.
pub fn expected_resends(p: f64, max_resends: u32) -> (f64, f64) {
    let q = 1.0 - p;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let mut w = p;
    for k in 0..=max_resends {
        let kf = k as f64;
        z += w;
        m1 += kf * w;
        m2 += kf * kf * w;
        w *= q;
    }
    let mean = m1 / z;
    (mean, (m2 / z - mean * mean).max(0.0).sqrt())
}

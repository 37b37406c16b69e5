//! Subcommand implementations.

use std::path::PathBuf;

use pickpass::agents::Agent;
use pickpass::dqn::{self, Checkpoint, DqnAgent};
use pickpass::interpret::{
    collect_pairwise_dataset, fit_rules, kendall_tau_ids, preference_matrix, reconstruct_priority,
    RuleParams,
};
use pickpass::logs::{priority_from_logs, read_jsonl, write_jsonl, GameRecorder};
use pickpass::metrics::{
    evaluate_round_win_rate, evaluate_win_rate, evaluate_win_rate_with, generalization_sweep,
    mem_influence, MemInfluenceReport, SweepModel, WinRateReport,
};
use pickpass::observe::FeatureLayout;
use pickpass::sim::derive_seed;
use pickpass::stats::welch_t_test;
use pickpass::{Error, Result};
use serde_json::json;

use crate::spec::{AblateSpec, SweepSpec, TrainSpec};
use crate::util::{
    load_catalog, load_priority, read_numbers, run_parallel, OpponentSpec, OutputDir,
};

pub struct TrainArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seeds: Option<Vec<u64>>,
    pub memory: Option<bool>,
    pub workers: usize,
    pub cards: Option<PathBuf>,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let catalog = load_catalog(&args.cards)?;
    let mut spec = TrainSpec::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        spec.seeds = seeds.clone();
    }
    if let Some(memory) = args.memory {
        spec.train.memory_enabled = memory;
    }
    spec.train.validate()?;
    let (configs, names) = spec.resolve_games(&catalog)?;

    let mut out = OutputDir::create(&args.out)?;
    let runs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results = run_parallel(runs.len(), args.workers, |i| {
        let (config_idx, seed) = runs[i];
        let game = &configs[config_idx];
        let mut train = spec.train.clone();
        train.seed = derive_seed(seed, 0x7EA1);
        let mut artifacts: Vec<(String, String)> = Vec::new();
        let mut curve = String::from(
            "epoch,games,env_steps,train_steps,epsilon,mean_loss,mean_score,mean_reward\n",
        );
        let prefix = format!("{}/seed_{}", names[config_idx], seed);
        let result = dqn::self_play_train(&train, game, |ckpt, stats| {
            artifacts.push((
                format!("{prefix}/epoch_{}.ckpt.json", stats.epoch),
                ckpt.to_json()?,
            ));
            curve.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                stats.epoch,
                stats.games,
                stats.env_steps,
                stats.train_steps,
                stats.epsilon,
                stats.mean_loss,
                stats.mean_score,
                stats.mean_reward
            ));
            Ok(())
        })?;
        let last = Checkpoint::from_net(
            &result.net,
            train.epochs - 1,
            &result.layout,
            &train,
            game,
        );
        artifacts.push((format!("{prefix}/final.ckpt.json"), last.to_json()?));
        artifacts.push((format!("{prefix}/curve.csv"), curve));
        Ok(artifacts)
    })?;
    for artifacts in results {
        for (rel, contents) in artifacts {
            out.write(&rel, &contents)?;
        }
    }
    eprintln!(
        "trained {} model(s) ({} config(s) x {} seed(s)) -> {}",
        runs.len(),
        configs.len(),
        spec.seeds.len(),
        args.out.display()
    );
    let inputs = json!({
        "config_file": args.config.display().to_string(),
        "spec": serde_json::to_value(&spec)?,
        "config_names": names,
        "memory_override": args.memory,
    });
    out.finish("train", inputs, &spec.seeds)?;
    Ok(())
}

pub struct EvalArgs {
    /// Evaluate a trained model (game config comes from the checkpoint)...
    pub checkpoint: Option<PathBuf>,
    /// ...or a baseline agent spec on an explicit game config.
    pub agent: Option<String>,
    pub game: Option<PathBuf>,
    pub opponent: String,
    pub games: usize,
    pub seed: u64,
    pub unit: String,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub cards: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let (agent, game): (Box<dyn Agent>, _) = match (&args.checkpoint, &args.agent) {
        (Some(path), None) => {
            let ckpt = Checkpoint::load(path)?;
            let agent = DqnAgent::from_checkpoint(&ckpt)?;
            (Box::new(agent), ckpt.game_config)
        }
        (None, Some(spec)) => {
            let catalog = load_catalog(&args.cards)?;
            let game_path = args
                .game
                .as_ref()
                .ok_or_else(|| Error::Config("--game is required with --agent".into()))?;
            let game = crate::util::load_game_config(game_path, &catalog)?;
            (OpponentSpec::parse(spec)?.build(&game.menu)?, game)
        }
        _ => {
            return Err(Error::Config(
                "exactly one of --checkpoint or --agent is required".into(),
            ))
        }
    };
    game.validate()?;
    if let Some(path) = &args.checkpoint {
        let ckpt = Checkpoint::load(path)?;
        FeatureLayout::new(&game, ckpt.layout.memory).check_compatible(&ckpt.layout)?;
    }

    let opponent = OpponentSpec::parse(&args.opponent)?.build(&game.menu)?;
    let opponents: Vec<&dyn Agent> =
        (0..game.players - 1).map(|_| opponent.as_ref()).collect();
    let mut recorder = GameRecorder::new();
    let report = match args.unit.as_str() {
        "games" => evaluate_win_rate_with(
            agent.as_ref(),
            &opponents,
            &game,
            args.games,
            args.seed,
            &mut recorder,
        )?,
        // Full games are played; wins are counted per round on the round
        // score deltas (--games counts rounds in this mode).
        "rounds" => evaluate_round_win_rate(
            agent.as_ref(),
            &opponents,
            &game,
            args.games,
            args.seed,
        )?,
        other => {
            return Err(Error::Config(format!(
                "unknown unit {other:?}; expected games or rounds"
            )))
        }
    };
    if let Some(log_path) = &args.log {
        if args.unit != "games" {
            return Err(Error::Config("--log is only supported with --unit games".into()));
        }
        let mut buf = Vec::new();
        write_jsonl(&recorder.events, &mut buf)?;
        std::fs::write(log_path, buf)?;
        eprintln!("wrote {} log events to {}", recorder.events.len(), log_path.display());
    }

    print_win_report(&report, args.games, &args.unit);
    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        out.write_json("eval.json", &report)?;
        let inputs = json!({
            "checkpoint": args.checkpoint.as_ref().map(|p| p.display().to_string()),
            "agent": args.agent,
            "opponent": args.opponent,
            "games": args.games,
            "unit": args.unit,
        });
        out.finish("eval", inputs, &[args.seed])?;
    }
    Ok(())
}

fn print_win_report(report: &WinRateReport, games: usize, unit: &str) {
    println!(
        "win rate {:.4} over {} {} (Wilson 95% [{:.4}, {:.4}])",
        report.win_rate, games, unit, report.wilson_low, report.wilson_high
    );
}

pub struct SweepArgs {
    pub config: PathBuf,
    pub checkpoints: PathBuf,
    pub out: PathBuf,
    pub games: Option<usize>,
    pub batches: Option<usize>,
    pub seed: Option<u64>,
    pub cards: Option<PathBuf>,
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let catalog = load_catalog(&args.cards)?;
    let mut spec = SweepSpec::load(&args.config)?;
    if let Some(games) = args.games {
        spec.games_per_batch = games;
    }
    if let Some(batches) = args.batches {
        spec.batches = batches;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let series_seed = spec.series_seed.unwrap_or(spec.seed);
    let (configs, names) = spec.interpolate.build(&catalog, series_seed)?;

    // Load the final checkpoint of every (config, seed) training run.
    let mut models_per_config: Vec<Vec<SweepModel>> = Vec::new();
    let mut missing = Vec::new();
    for name in &names {
        let mut models = Vec::new();
        for &seed in &spec.seeds {
            let path = args
                .checkpoints
                .join(name)
                .join(format!("seed_{seed}"))
                .join("final.ckpt.json");
            if !path.exists() {
                missing.push(path.display().to_string());
                continue;
            }
            let ckpt = Checkpoint::load(&path)?;
            models.push(SweepModel {
                name: format!("{name}/seed_{seed}"),
                net: ckpt.net()?,
                layout: ckpt.layout.clone(),
            });
        }
        models_per_config.push(models);
    }
    if !missing.is_empty() {
        return Err(Error::Input(format!(
            "missing checkpoints:\n  {}",
            missing.join("\n  ")
        )));
    }

    let opponent_list = load_priority(&spec.opponent_priority, &configs[0].menu)?;
    let opponent = pickpass::agents::PriorityAgent::new(opponent_list);
    let result = generalization_sweep(
        &models_per_config,
        &configs,
        &names,
        &opponent,
        spec.games_per_batch,
        spec.batches,
        spec.seed,
    )?;

    let mut out = OutputDir::create(&args.out)?;
    out.write("cells.csv", &result.cells_csv())?;
    out.write("by_envsim.csv", &result.groups_csv())?;
    out.write_json("summary.json", &result)?;
    for group in &result.groups {
        println!(
            "envsim {} (swaps {}): mean win rate {:.4} over {} cells",
            group.envsim, group.swaps, group.mean_win_rate, group.n_cells
        );
    }
    let inputs = json!({
        "config_file": args.config.display().to_string(),
        "spec": serde_json::to_value(&spec)?,
        "checkpoints": args.checkpoints.display().to_string(),
    });
    out.finish("sweep", inputs, &spec.seeds)?;
    Ok(())
}

pub struct MemInfluenceArgs {
    pub checkpoint: PathBuf,
    pub states: usize,
    pub perts: usize,
    pub seed: u64,
    pub temperature: f64,
    pub out: Option<PathBuf>,
}

pub fn meminfluence(args: &MemInfluenceArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let net = ckpt.net()?;
    let report = mem_influence(
        &net,
        &ckpt.layout,
        &ckpt.game_config,
        args.states,
        args.perts,
        args.seed,
        args.temperature,
    )?;
    print_mem_report(&report, &ckpt);
    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        out.write_json("meminfluence.json", &report)?;
        let mut csv = String::from(
            "state_index,perturbation,kl,original_action,perturbed_action,probability_shift\n",
        );
        for r in &report.all_records {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.state_index,
                r.perturbation,
                r.kl,
                r.original_action,
                r.perturbed_action,
                r.probability_shift
            ));
        }
        out.write("perturbations.csv", &csv)?;
        let mut per_state = String::from("state_index,round,turn,mean_kl,max_kl\n");
        for s in &report.per_state {
            per_state.push_str(&format!(
                "{},{},{},{},{}\n",
                s.state_index, s.round, s.turn, s.mean_kl, s.max_kl
            ));
        }
        out.write("per_state.csv", &per_state)?;
        let inputs = json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "states": args.states,
            "perts": args.perts,
            "temperature": args.temperature,
        });
        out.finish("meminfluence", inputs, &[args.seed])?;
    }
    Ok(())
}

fn print_mem_report(report: &MemInfluenceReport, ckpt: &Checkpoint) {
    println!(
        "MemInfluence = {:.6e} ({} states x {} perturbations, temperature {})",
        report.mean_kl, report.n_states, report.n_perturbations, report.temperature
    );
    let menu = &ckpt.game_config.menu;
    let name = |k: usize| menu.kind(k).name.clone();
    println!(
        "max shift {:.4} at state {}: {} -> {}",
        report.max_shift.probability_shift,
        report.max_shift.state_index,
        name(report.max_shift.original_action),
        name(report.max_shift.perturbed_action),
    );
}

pub struct AblateArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
    pub cards: Option<PathBuf>,
}

pub fn ablate_memory(args: &AblateArgs) -> Result<()> {
    let catalog = load_catalog(&args.cards)?;
    let spec = AblateSpec::load(&args.config)?;
    if spec.models_per_cohort < 2 {
        return Err(Error::Stats(
            "need at least 2 models per cohort for a t-test".into(),
        ));
    }
    let game = crate::util::load_game_config(&spec.game, &catalog)?;
    let mut out = OutputDir::create(&args.out)?;

    // Cohorts: memory on (index 0) and off (index 1), matched training seeds.
    let mut cohorts: Vec<Vec<Checkpoint>> = vec![Vec::new(), Vec::new()];
    for (cohort, dir) in [(0, &spec.checkpoints_on), (1, &spec.checkpoints_off)] {
        if let Some(dir) = dir {
            for i in 0..spec.models_per_cohort {
                let path = dir.join(format!("model_{i}.ckpt.json"));
                cohorts[cohort].push(Checkpoint::load(&path)?);
            }
        }
    }
    if cohorts[0].is_empty() || cohorts[1].is_empty() {
        let jobs: Vec<(usize, usize)> = (0..2)
            .flat_map(|c| (0..spec.models_per_cohort).map(move |m| (c, m)))
            .collect();
        let trained = run_parallel(jobs.len(), args.workers, |j| {
            let (cohort, model) = jobs[j];
            let mut train = spec.train.clone();
            train.memory_enabled = cohort == 0;
            // Same training seed for the paired on/off models.
            train.seed = derive_seed(spec.seed, model as u64);
            let result = dqn::self_play_train(&train, &game, |_, _| Ok(()))?;
            Ok(Checkpoint::from_net(
                &result.net,
                train.epochs - 1,
                &result.layout,
                &train,
                &game,
            ))
        })?;
        cohorts = vec![Vec::new(), Vec::new()];
        for ((cohort, _), ckpt) in jobs.into_iter().zip(trained) {
            cohorts[cohort].push(ckpt);
        }
        for (c, name) in [(0, "on"), (1, "off")] {
            for (i, ckpt) in cohorts[c].iter().enumerate() {
                out.write(&format!("models_{name}/model_{i}.ckpt.json"), &ckpt.to_json()?)?;
            }
        }
    }

    // Evaluate both cohorts under identical seeds and opponents.
    let opponent = OpponentSpec::parse(&spec.opponent)?.build(&game.menu)?;
    let mut rewards: Vec<Vec<f64>> = vec![Vec::new(), Vec::new()];
    let mut csv = String::from("cohort,model,game,reward\n");
    for (c, name) in [(0usize, "memory_on"), (1, "memory_off")] {
        for (m, ckpt) in cohorts[c].iter().enumerate() {
            let agent = DqnAgent::from_checkpoint(ckpt)?;
            let opponents: Vec<&dyn Agent> =
                (0..game.players - 1).map(|_| opponent.as_ref()).collect();
            let report = evaluate_win_rate(
                &agent,
                &opponents,
                &game,
                spec.eval_games,
                derive_seed(spec.seed, 0xE7A1 + m as u64),
            )?;
            for (g, &r) in report.agent_rewards.iter().enumerate() {
                csv.push_str(&format!("{name},{m},{g},{r}\n"));
                rewards[c].push(r);
            }
        }
    }
    let report = welch_t_test(&rewards[0], &rewards[1])?;
    println!(
        "memory on mean {:.3} vs off mean {:.3}: diff {:.3}, t {:.3}, df {:.1}, p {:.3e}",
        report.mean_a,
        report.mean_b,
        report.mean_diff,
        report.t_statistic,
        report.degrees_of_freedom,
        report.p_value
    );
    out.write("rewards.csv", &csv)?;
    out.write_json("ttest.json", &report)?;
    let inputs = json!({
        "config_file": args.config.display().to_string(),
        "spec": serde_json::to_value(&spec)?,
    });
    out.finish("ablate-memory", inputs, &[spec.seed])?;
    Ok(())
}

pub struct InterpretArgs {
    pub checkpoint: Option<PathBuf>,
    pub agent: Option<String>,
    pub from_logs: Option<PathBuf>,
    pub game: Option<PathBuf>,
    pub games: usize,
    pub seed: u64,
    pub round_two_only: bool,
    pub compare: Vec<PathBuf>,
    pub trees: usize,
    pub max_depth: usize,
    pub min_precision: f64,
    pub min_recall: f64,
    pub max_rules: usize,
    pub out: PathBuf,
    pub cards: Option<PathBuf>,
}

pub fn interpret(args: &InterpretArgs) -> Result<()> {
    let catalog = load_catalog(&args.cards)?;
    let mut out = OutputDir::create(&args.out)?;

    // Log mode: rebuild a priority list from recorded games.
    if let Some(log_path) = &args.from_logs {
        let events = read_jsonl(std::io::BufReader::new(
            std::fs::File::open(log_path)
                .map_err(|e| Error::Input(format!("cannot open {}: {e}", log_path.display())))?,
        ))?;
        let report = priority_from_logs(&events, &catalog)?;
        out.write_json("priority.json", &report.ranking)?;
        let mut csv = String::from("rank,kind,mean_points,total_points,copies_played,played\n");
        for (rank, s) in report.stats.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rank + 1,
                s.name,
                s.mean_points,
                s.total_points,
                s.copies_played,
                s.played
            ));
        }
        out.write("points.csv", &csv)?;
        println!(
            "priority list from {} game(s): {}",
            report.games,
            report.ranking.join(" > ")
        );
        let inputs = json!({
            "from_logs": log_path.display().to_string(),
        });
        out.finish("interpret", inputs, &[])?;
        return Ok(());
    }

    // Agent mode: collect a pairwise dataset and mine rules.
    let (agent, game, layout): (Box<dyn Agent>, _, _) = match (&args.checkpoint, &args.agent) {
        (Some(path), None) => {
            let ckpt = Checkpoint::load(path)?;
            let agent = DqnAgent::from_checkpoint(&ckpt)?;
            let layout = agent.layout().clone();
            (Box::new(agent), ckpt.game_config.clone(), layout)
        }
        (None, Some(spec)) => {
            let game_path = args.game.as_ref().ok_or_else(|| {
                Error::Config("--game is required with --agent".into())
            })?;
            let game = crate::util::load_game_config(game_path, &catalog)?;
            let agent = OpponentSpec::parse(spec)?.build(&game.menu)?;
            let layout = FeatureLayout::new(&game, agent.wants_memory());
            (agent, game, layout)
        }
        _ => {
            return Err(Error::Config(
                "exactly one of --checkpoint or --agent is required (or --from-logs)".into(),
            ))
        }
    };

    let round_filter = if args.round_two_only {
        if game.rounds < 2 {
            return Err(Error::Config("--round-two-only needs at least 2 rounds".into()));
        }
        Some(game.rounds - 2)
    } else {
        None
    };
    let dataset =
        collect_pairwise_dataset(agent.as_ref(), &game, args.games, args.seed, round_filter)?;
    if dataset.is_empty() {
        return Err(Error::Input(
            "no pairwise samples collected; increase --games".into(),
        ));
    }
    println!("collected {} pairwise samples", dataset.len());

    let matrix = preference_matrix(&dataset, game.menu.len());
    let mut matrix_csv = String::from("chosen,alternative,wins,trials\n");
    for a in 0..game.menu.len() {
        for b in 0..game.menu.len() {
            if a != b && matrix.trials(a, b) > 0 {
                matrix_csv.push_str(&format!(
                    "{},{},{},{}\n",
                    game.menu.kind(a).name,
                    game.menu.kind(b).name,
                    matrix.wins[a][b],
                    matrix.trials(a, b)
                ));
            }
        }
    }
    out.write("preference_matrix.csv", &matrix_csv)?;

    let (priority, scores) = reconstruct_priority(&matrix, &game.menu)?;
    let names = priority.to_names(&game.menu);
    out.write_json("priority.json", &names)?;
    println!("reconstructed priority: {}", names.join(" > "));

    let params = RuleParams {
        trees: args.trees,
        max_depth: args.max_depth,
        min_precision: args.min_precision,
        min_recall: args.min_recall,
        max_rules_per_kind: args.max_rules,
        seed: derive_seed(args.seed, 0x201e),
        ..RuleParams::default()
    };
    let rules = fit_rules(&dataset, &params)?;
    let mut text = String::new();
    for rule in &rules {
        text.push_str(&rule.render(&layout, &game.menu));
        text.push('\n');
    }
    out.write("rules.txt", &text)?;
    out.write_json("rules.json", &rules)?;
    println!("mined {} rules", rules.len());

    // Rank-table comparison against supplied lists.
    let mut table = String::from("list,kendall_tau\n");
    let mut comparison_rows = Vec::new();
    for path in &args.compare {
        let other = load_priority(path, &game.menu)?;
        let tau = kendall_tau_ids(priority.ranking(), other.ranking())?;
        table.push_str(&format!("{},{tau}\n", path.display()));
        comparison_rows.push((path.display().to_string(), tau));
        println!("kendall tau vs {}: {:.4}", path.display(), tau);
    }
    let mut rank_table = String::from("rank,kind,borda_score\n");
    for (rank, &k) in priority.ranking().iter().enumerate() {
        rank_table.push_str(&format!(
            "{},{},{}\n",
            rank + 1,
            game.menu.kind(k).name,
            scores[k]
        ));
    }
    out.write("rank_table.csv", &rank_table)?;
    if !args.compare.is_empty() {
        out.write("comparisons.csv", &table)?;
    }

    let inputs = json!({
        "checkpoint": args.checkpoint.as_ref().map(|p| p.display().to_string()),
        "agent": args.agent,
        "games": args.games,
        "round_two_only": args.round_two_only,
        "rule_params": serde_json::to_value(&params)?,
    });
    out.finish("interpret", inputs, &[args.seed])?;
    Ok(())
}

pub struct StatsArgs {
    pub xs: PathBuf,
    pub ys: PathBuf,
    pub out: Option<PathBuf>,
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let xs = read_numbers(&args.xs)?;
    let ys = read_numbers(&args.ys)?;
    let report = welch_t_test(&xs, &ys)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        out.write_json("ttest.json", &report)?;
        let inputs = json!({
            "xs": args.xs.display().to_string(),
            "ys": args.ys.display().to_string(),
        });
        out.finish("stats", inputs, &[])?;
    }
    Ok(())
}


//! Command-line entry point: `simulate | prepare | train-nbm | train-mapper
//! | finetune | evaluate | report` over a TOML run configuration.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use scadamap_core::config::RunConfig;
use scadamap_core::data::{prepare_domain, source_norm_stats, write_labels, write_scada};
use scadamap_core::eval::{emit_report, run_matrix, write_scores_csv, CellOutcome, TurbineData};
use scadamap_core::mapper::{train_mapper, MapperPair, MaskTargets};
use scadamap_core::nbm::{patience_for, NbmModel};
use scadamap_core::rng::child_seed;
use scadamap_core::Real;

#[derive(Parser)]
#[command(name = "scadamap", version, about = "SCADA domain mapping toolkit for wind-turbine anomaly detection")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "SCADAMAP_CONFIG")]
    config: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long, global = true, env = "SCADAMAP_SEED")]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true, env = "SCADAMAP_OUT")]
    out: Option<PathBuf>,
    /// Restrict to one source:target pair.
    #[arg(long, global = true, env = "SCADAMAP_PAIR")]
    pair: Option<String>,
    /// Scarcity scenario in weeks (1-8); selects or restricts the grid.
    #[arg(long, global = true, env = "SCADAMAP_WEEKS", value_parser = clap::value_parser!(u32).range(1..=8))]
    weeks: Option<u32>,
    /// Skip cells whose artifacts already match the configuration.
    #[arg(long, global = true, env = "SCADAMAP_RESUME")]
    resume: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic datasets (CSV + label sidecars).
    Simulate,
    /// Run the data pipeline and write preparation summaries.
    Prepare,
    /// Train the source and ground-truth NBMs of a pair, or a scarce NBM
    /// when --weeks is given.
    TrainNbm,
    /// Train the domain-mapping network for a pair and scarcity scenario.
    TrainMapper {
        /// Pretrained source NBM checkpoint (early-stopping dependency).
        #[arg(long)]
        source_checkpoint: PathBuf,
    },
    /// Fine-tune a pretrained source NBM on scarce target data.
    Finetune {
        /// Pretrained source NBM checkpoint to start from.
        #[arg(long)]
        source_checkpoint: PathBuf,
    },
    /// Run the full benchmark matrix and emit reports.
    Evaluate,
    /// Re-emit reports from persisted matrix results without training.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {e:#}");
                ExitCode::from(1)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

struct Ctx {
    cfg: RunConfig,
    base_dir: PathBuf,
    pair: Option<(String, String)>,
    weeks: Option<u32>,
    resume: bool,
}

impl Ctx {
    fn run_dir(&self) -> PathBuf {
        self.cfg.run_dir()
    }

    fn pairs(&self) -> Vec<(String, String)> {
        match &self.pair {
            Some(p) => vec![p.clone()],
            None => self.cfg.pairs.iter().map(|p| (p.source.clone(), p.target.clone())).collect(),
        }
    }

    fn weeks_grid(&self) -> Vec<u32> {
        match self.weeks {
            Some(w) => vec![w],
            None => self.cfg.weeks.clone(),
        }
    }

    fn load_data(&self) -> Result<BTreeMap<String, TurbineData>> {
        self.cfg.load_turbines(&self.base_dir).context("loading turbine datasets")
    }

    fn the_pair(&self) -> Result<(String, String)> {
        let pairs = self.pairs();
        match pairs.as_slice() {
            [p] => Ok(p.clone()),
            [] => Err(usage("no pair configured; pass --pair SRC:TGT or add [[pairs]] to the config")),
            _ => Err(usage("this command needs exactly one pair; pass --pair SRC:TGT")),
        }
    }

    fn the_weeks(&self) -> Result<u32> {
        self.weeks
            .ok_or_else(|| usage("this command needs a scarcity scenario; pass --weeks N (1-8)"))
    }
}

fn build_ctx(cli: &Cli) -> Result<Ctx> {
    let config_path = cli
        .config
        .clone()
        .ok_or_else(|| usage("--config PATH is required (or set SCADAMAP_CONFIG)"))?;
    let mut cfg = RunConfig::load(&config_path).map_err(|e| usage(format!("{e}")))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    let pair = match &cli.pair {
        Some(p) => {
            let (s, t) = p
                .split_once(':')
                .ok_or_else(|| usage(format!("--pair must be SRC:TGT, got {p:?}")))?;
            let known = |id: &str| cfg.turbines.iter().any(|t| t.id == id);
            if !known(s) || !known(t) {
                return Err(usage(format!("--pair references unknown turbine in {p:?}")));
            }
            Some((s.to_string(), t.to_string()))
        }
        None => None,
    };
    let base_dir = config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Ctx {
        cfg,
        base_dir,
        pair,
        weeks: cli.weeks,
        resume: cli.resume,
    })
}

fn run(cli: Cli) -> Result<()> {
    let ctx = build_ctx(&cli)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&ctx),
        Command::Prepare => cmd_prepare(&ctx),
        Command::TrainNbm => cmd_train_nbm(&ctx),
        Command::TrainMapper { source_checkpoint } => cmd_train_mapper(&ctx, source_checkpoint),
        Command::Finetune { source_checkpoint } => cmd_finetune(&ctx, source_checkpoint),
        Command::Evaluate => cmd_evaluate(&ctx),
        Command::Report => cmd_report(&ctx),
    }
}

fn cmd_simulate(ctx: &Ctx) -> Result<()> {
    let data_dir = ctx.run_dir().join("data");
    let loaded = ctx.load_data()?;
    let mut wrote = 0;
    for t in &ctx.cfg.turbines {
        if t.simulate.is_none() {
            continue;
        }
        let td = &loaded[&t.id];
        let csv_path = data_dir.join(format!("{}.csv", t.id));
        write_scada(&csv_path, &td.series)?;
        println!("wrote {}", csv_path.display());
        if let Some(labels) = &td.labels {
            let label_path = data_dir.join(format!("{}_labels.csv", t.id));
            write_labels(&label_path, &td.series, labels)?;
            println!("wrote {}", label_path.display());
        }
        wrote += 1;
    }
    if wrote == 0 {
        bail!("no simulated turbines in the configuration");
    }
    Ok(())
}

fn cmd_prepare(ctx: &Ctx) -> Result<()> {
    let data = ctx.load_data()?;
    let out = ctx.run_dir().join("prepare");
    std::fs::create_dir_all(&out)?;
    for (src, tgt) in ctx.pairs() {
        let source = &data[&src];
        let norm = source_norm_stats(&source.series, &source.spec)?;
        for (role, id) in [("source", &src), ("target", &tgt)] {
            let td = &data[id];
            let mut summaries = Vec::new();
            let mut scenarios: Vec<Option<u32>> = vec![None];
            if role == "target" {
                scenarios.extend(ctx.weeks_grid().into_iter().map(Some));
            }
            for weeks in scenarios {
                let prep = prepare_domain::<Real>(&td.series, &td.spec, &norm, weeks, ctx.cfg.stride)?;
                summaries.push(serde_json::json!({
                    "role": role,
                    "turbine": id,
                    "scarcity_weeks": weeks,
                    "train_windows": prep.train.len(),
                    "validation_windows": prep.validation.len(),
                    "test_windows": prep.test.len(),
                    "train_val_records": prep.train_val_records,
                }));
            }
            let path = out.join(format!("{src}__{tgt}__{id}.json"));
            std::fs::write(&path, serde_json::to_string_pretty(&summaries)?)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn pair_dir(ctx: &Ctx, src: &str, tgt: &str) -> PathBuf {
    ctx.run_dir().join("pairs").join(format!("{src}__{tgt}"))
}

fn cell_dir(ctx: &Ctx, src: &str, tgt: &str, weeks: u32) -> PathBuf {
    ctx.run_dir().join("cells").join(format!("{src}__{tgt}__w{weeks}"))
}

fn cmd_train_nbm(ctx: &Ctx) -> Result<()> {
    let (src, tgt) = ctx.the_pair()?;
    let data = ctx.load_data()?;
    let source = &data[&src];
    let target = &data[&tgt];
    let norm = source_norm_stats(&source.series, &source.spec)?;

    match ctx.weeks {
        None => {
            let dir = pair_dir(ctx, &src, &tgt);
            let sprep = prepare_domain::<Real>(&source.series, &source.spec, &norm, None, ctx.cfg.stride)?;
            let mut regime = ctx.cfg.nbm_regime();
            regime.seed = child_seed(ctx.cfg.seed, &format!("nbm-source:{src}"));
            regime.patience = patience_for(sprep.train_val_records, sprep.train_val_records);
            let source_nbm = NbmModel::<Real>::train(
                &Default::default(),
                &norm,
                &sprep.train,
                &sprep.validation,
                &regime,
                &src,
                None,
            )?;
            let path = dir.join("source.nbm.json");
            source_nbm.save(&path)?;
            println!("wrote {} (weeks=none)", path.display());

            let tprep = prepare_domain::<Real>(&target.series, &target.spec, &norm, None, ctx.cfg.stride)?;
            let mut regime = ctx.cfg.nbm_regime();
            regime.seed = child_seed(ctx.cfg.seed, &format!("nbm-gt:{src}:{tgt}"));
            regime.patience = patience_for(tprep.train_val_records, tprep.train_val_records);
            let gt = NbmModel::<Real>::train(
                &Default::default(),
                &norm,
                &tprep.train,
                &tprep.validation,
                &regime,
                &tgt,
                None,
            )?;
            let path = dir.join("ground_truth.nbm.json");
            gt.save(&path)?;
            println!("wrote {} (weeks=none)", path.display());
        }
        Some(weeks) => {
            let full = prepare_domain::<Real>(&target.series, &target.spec, &norm, None, ctx.cfg.stride)?;
            let prep = prepare_domain::<Real>(&target.series, &target.spec, &norm, Some(weeks), ctx.cfg.stride)?;
            let mut regime = ctx.cfg.nbm_regime();
            regime.seed = child_seed(ctx.cfg.seed, &format!("nbm-scarce:{src}:{tgt}:w{weeks}"));
            regime.patience = patience_for(prep.train_val_records, full.train_val_records);
            let nbm = NbmModel::<Real>::train(
                &Default::default(),
                &norm,
                &prep.train,
                &prep.validation,
                &regime,
                &tgt,
                Some(weeks),
            )?;
            let path = cell_dir(ctx, &src, &tgt, weeks).join("scarce.nbm.json");
            nbm.save(&path)?;
            println!("wrote {} (weeks={weeks})", path.display());
        }
    }
    Ok(())
}

fn cmd_finetune(ctx: &Ctx, source_checkpoint: &Path) -> Result<()> {
    let (src, tgt) = ctx.the_pair()?;
    let weeks = ctx.the_weeks()?;
    let source_nbm = NbmModel::<Real>::load(source_checkpoint)
        .with_context(|| format!("loading source checkpoint {}", source_checkpoint.display()))?;
    let data = ctx.load_data()?;
    let target = &data[&tgt];
    let norm = source_nbm.norm.clone();
    let full = prepare_domain::<Real>(&target.series, &target.spec, &norm, None, ctx.cfg.stride)?;
    let prep = prepare_domain::<Real>(&target.series, &target.spec, &norm, Some(weeks), ctx.cfg.stride)?;
    let mut regime = ctx.cfg.nbm_regime();
    regime.seed = child_seed(ctx.cfg.seed, &format!("nbm-ft:{src}:{tgt}:w{weeks}"));
    regime.patience = patience_for(prep.train_val_records, full.train_val_records);
    let tuned = source_nbm.fine_tune(&prep.train, &prep.validation, &regime, &tgt, Some(weeks))?;
    let path = cell_dir(ctx, &src, &tgt, weeks).join("finetune.nbm.json");
    tuned.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_train_mapper(ctx: &Ctx, source_checkpoint: &Path) -> Result<()> {
    let (src, tgt) = ctx.the_pair()?;
    let weeks = ctx.the_weeks()?;
    let source_nbm = NbmModel::<Real>::load(source_checkpoint)
        .with_context(|| format!("loading source checkpoint {}", source_checkpoint.display()))?;
    let data = ctx.load_data()?;
    let source = &data[&src];
    let target = &data[&tgt];
    let norm = source_nbm.norm.clone();
    let sprep = prepare_domain::<Real>(&source.series, &source.spec, &norm, None, ctx.cfg.stride)?;
    let tprep = prepare_domain::<Real>(&target.series, &target.spec, &norm, Some(weeks), ctx.cfg.stride)?;
    let targets = MaskTargets::new(&norm, source.spec.rated_power_kw, target.spec.rated_power_kw);
    let mut regime = ctx.cfg.mapper_regime();
    regime.seed = child_seed(ctx.cfg.seed, &format!("mapper:{src}:{tgt}:w{weeks}"));
    let mut pair = MapperPair::<Real>::build(
        &Default::default(),
        ctx.cfg.loss_weights(),
        targets,
        regime.seed,
        &src,
        &tgt,
    )
    .map_err(|e| anyhow!(e))?;
    pair.meta.scarcity_weeks = Some(weeks);
    let (pair, log) = train_mapper(pair, &sprep.train, &tprep.train, &tprep.validation, &source_nbm, &regime)?;
    let dir = cell_dir(ctx, &src, &tgt, weeks);
    let path = dir.join("mapper.json");
    pair.save(&path)?;
    log.write_csv(&dir.join("mapper_train_log.csv"))?;
    let mapped = pair.map_to_source(&tprep.test);
    let scores = source_nbm.score_windows(&mapped);
    let starts: Vec<i64> = tprep.test.iter().map(|w| w.start_timestamp).collect();
    let decisions: Vec<bool> = scores.iter().map(|&s| s >= source_nbm.threshold).collect();
    write_scores_csv(&dir.join("scores_domain_map_raw.csv"), &starts, &scores, &decisions)?;
    println!("wrote {}", path.display());
    println!(
        "best early-stop score {:.6} at iteration {} ({} iterations run)",
        pair.meta.best_early_stop_score, pair.meta.best_iter, pair.meta.iters_run
    );
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx) -> Result<()> {
    let data = ctx.load_data()?;
    let mut mcfg = ctx.cfg.matrix_config(ctx.resume);
    mcfg.pairs = ctx.pairs();
    mcfg.weeks = ctx.weeks_grid();
    if mcfg.pairs.is_empty() {
        return Err(usage("no pairs configured; add [[pairs]] or pass --pair"));
    }
    if mcfg.weeks.is_empty() {
        return Err(usage("no scarcity grid; set weeks = [...] or pass --weeks"));
    }
    let outcomes = run_matrix::<Real>(&mcfg, &data)?;
    let files = emit_report(&mcfg.out_dir, &outcomes, &data)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    for cell in &outcomes {
        for run in &cell.runs {
            if let Some(r) = &run.report {
                println!(
                    "{}:{} w{} {:<11} F1={:.3}",
                    cell.source_id,
                    cell.target_id,
                    cell.weeks,
                    run.method.as_str(),
                    r.f1
                );
            }
        }
    }
    Ok(())
}

fn cmd_report(ctx: &Ctx) -> Result<()> {
    let data = ctx.load_data()?;
    let cells_dir = ctx.run_dir().join("cells");
    let mut outcomes: Vec<CellOutcome> = Vec::new();
    if cells_dir.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&cells_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for dir in entries {
            let result = dir.join("result.json");
            if result.is_file() {
                let bytes = std::fs::read(&result)?;
                outcomes.push(serde_json::from_slice(&bytes).with_context(|| {
                    format!("parsing persisted cell result {}", result.display())
                })?);
            }
        }
    }
    if outcomes.is_empty() {
        bail!(
            "no persisted results under {}; run `scadamap evaluate` first",
            cells_dir.display()
        );
    }
    let files = emit_report(&ctx.run_dir(), &outcomes, &data)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

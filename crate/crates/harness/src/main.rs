use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sensing_harness::experiments::{
    run_fig2, run_fig3, run_game_threshold, run_planner_demo, run_table1, run_table2, run_table3,
};
use sensing_harness::table::git_describe;
use sensing_harness::{ExperimentConfig, Result, ResultTable};

#[derive(Parser)]
#[command(name = "sensing-harness", version, about = "Run the Monte Carlo experiments and write CSV tables")]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
    /// TOML configuration; defaults are used for anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Trial count for every Monte Carlo experiment (overrides the config).
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Experiment {
    Table1,
    Table2,
    Table3,
    Fig2,
    Fig3,
    GameThreshold,
    PlannerDemo,
    /// Every experiment above.
    All,
}

const EVERY: [Experiment; 7] = [
    Experiment::Table1,
    Experiment::Table2,
    Experiment::Table3,
    Experiment::Fig2,
    Experiment::Fig3,
    Experiment::GameThreshold,
    Experiment::PlannerDemo,
];

fn run(experiment: Experiment, config: &ExperimentConfig) -> Result<Vec<ResultTable>> {
    let seed = config.seed;
    Ok(match experiment {
        Experiment::Table1 => vec![run_table1(&config.table1, seed)?],
        Experiment::Table2 => vec![run_table2(&config.table2, seed)?],
        Experiment::Table3 => vec![run_table3(&config.table3, seed)?],
        Experiment::Fig2 => vec![run_fig2(&config.fig2, seed)?],
        Experiment::Fig3 => vec![run_fig3(&config.fig3)?],
        Experiment::GameThreshold => vec![run_game_threshold(&config.game_threshold)?],
        Experiment::PlannerDemo => {
            let demo = run_planner_demo(&config.planner_demo, seed)?;
            vec![demo.log, demo.summary]
        }
        Experiment::All => {
            let mut tables = Vec::new();
            for e in EVERY {
                tables.extend(run(e, config)?);
            }
            tables
        }
    })
}

fn print_summary(table: &ResultTable) {
    println!("{} ({} rows)", table.experiment, table.rows.len());
    println!("  {}", table.columns.join("  "));
    for row in table.rows.iter().take(12) {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.4}")).collect();
        println!("  {}", cells.join("  "));
    }
    if table.rows.len() > 12 {
        println!("  ...");
    }
    for (k, v) in &table.metadata {
        println!("  {k}: {v}");
    }
}

fn main_inner(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.set_trials(trials);
    }
    config.validate()?;
    let provenance = vec![
        ("seed".to_string(), config.seed.to_string()),
        ("config_sha256".to_string(), config.digest()),
        ("git".to_string(), git_describe()),
    ];
    for table in run(cli.experiment, &config)? {
        let path = table.save(&cli.out, config.seed, &provenance)?;
        print_summary(&table);
        println!("  wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

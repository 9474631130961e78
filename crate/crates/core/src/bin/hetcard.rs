use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hetcard::analysis::{
    choose_phase2_3ss, expected_2ss_bb_slots, expected_energy_3ss, expected_energy_trepbb,
    expected_k_r, lambda_ii, EnergyMode,
};
use hetcard::harness::presets::Preset;
use hetcard::harness::{
    calibrate_ell, format_sig, preset, run_experiment, threshold_table, validate_accuracy,
    write_csv, ExperimentSpec, Settings, SweepPoint, ThresholdRow,
};
use hetcard::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hetcard",
    about = "Per-type active-node cardinality estimation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate schemes on one scenario.
    Simulate(ScenarioArgs),
    /// Run a figure preset.
    Figure {
        name: String,
        #[command(flatten)]
        args: ScenarioArgs,
    },
    /// Tabulate the phase-2 thresholds and crossovers.
    Zeta {
        #[arg(long, default_value_t = 2)]
        t_min: usize,
        #[arg(long, default_value_t = 8)]
        t_max: usize,
        #[arg(long, default_value_t = 3009)]
        ell: u64,
        /// Other types' counts as a multiple of ell.
        #[arg(long, default_value_t = 1.6)]
        others: f64,
        /// Also locate the crossover by simulation with this many replicates.
        #[arg(long)]
        replicates: Option<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Closed-form slot and energy expectations for given counts.
    Analyze(ScenarioArgs),
    /// Find the shortest balls-and-bins trial meeting an accuracy target.
    CalibrateEll {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        /// Counts to check, comma separated.
        #[arg(long, default_value = "500,2000,8000")]
        n: String,
        #[arg(long, default_value_t = 300)]
        replicates: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Empirical per-type accuracy with Wilson intervals.
    Validate(ScenarioArgs),
}

#[derive(Args, Default)]
struct ScenarioArgs {
    /// File of key=value lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "T")]
    types: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "D")]
    nodes_per_type: Option<u64>,
    #[arg(long)]
    q: Option<f64>,
    /// Active counts as b=count,... (1-based types).
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    replicates: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    include_overhead: bool,
    /// Comma-separated scheme names.
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    ell: Option<u64>,
}

impl ScenarioArgs {
    fn settings(&self) -> Result<Settings> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
                Settings::parse(&text)?
            }
            None => Settings::default(),
        };
        let mut flags = Settings {
            types: self.types,
            epsilon: self.eps,
            delta: self.delta,
            nodes_per_type: self.nodes_per_type,
            q: self.q,
            replicates: self.replicates,
            seed: self.seed,
            out: self.out.clone(),
            include_overhead: self.include_overhead.then_some(true),
            ell: self.ell,
            ..Default::default()
        };
        if let Some(n) = &self.n {
            flags.set("n", n)?;
        }
        if let Some(s) = &self.schemes {
            flags.set("schemes", s)?;
        }
        Ok(base.merge(flags))
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                Error::config("out", format!("{}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn io_err(e: io::Error) -> Error {
    Error::config("out", e.to_string())
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_else(|| "NA".into())
}

fn write_thresholds(out: &mut dyn Write, rows: &[ThresholdRow]) -> io::Result<()> {
    writeln!(
        out,
        "T,ell,others_ratio,zeta1,zeta2,n1_star_analytic,n1_star_empirical"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.types,
            r.ell,
            format_sig(r.others_ratio),
            format_sig(r.zeta1),
            format_sig(r.zeta2),
            opt(r.crossover_analytic),
            opt(r.crossover_empirical)
        )?;
    }
    out.flush()
}

fn simulate(args: &ScenarioArgs) -> Result<()> {
    let s = args.settings()?;
    let scenario = s.scenario()?;
    let schemes = s.schemes.clone().unwrap_or_else(|| {
        ["HSRC-1", "HSRC-2", "TxSRCS"]
            .iter()
            .map(|n| n.parse().expect("valid scheme"))
            .collect()
    });
    let spec = ExperimentSpec {
        name: "simulate".into(),
        sweep_var: "none".into(),
        points: vec![SweepPoint {
            value: "0".into(),
            series: None,
            scenario,
        }],
        schemes,
        replicates: s.replicates.unwrap_or(100),
        seed: s.seed.unwrap_or(1),
        include_overhead: s.include_overhead.unwrap_or(false),
    };
    let rows = run_experiment(&spec)?;
    let mut out = output(s.out.as_ref())?;
    write_csv(&mut out, &rows)
        .and_then(|_| out.flush())
        .map_err(io_err)
}

fn figure(name: &str, args: &ScenarioArgs) -> Result<()> {
    let s = args.settings()?;
    let seed = s.seed.unwrap_or(1);
    let mut out = output(s.out.as_ref())?;
    match preset(name, s.replicates, seed)? {
        Preset::Experiment(mut spec) => {
            spec.include_overhead = s.include_overhead.unwrap_or(false);
            let rows = run_experiment(&spec)?;
            write_csv(&mut out, &rows)
                .and_then(|_| out.flush())
                .map_err(io_err)
        }
        Preset::Thresholds {
            types,
            ells,
            others_ratios,
            replicates,
            seed,
        } => {
            let mut rows = Vec::new();
            for ratio in others_ratios {
                rows.extend(threshold_table(
                    types.iter().copied(),
                    &ells,
                    ratio,
                    Some(replicates),
                    seed,
                )?);
            }
            write_thresholds(&mut out, &rows).map_err(io_err)
        }
    }
}

fn analyze(args: &ScenarioArgs) -> Result<()> {
    let s = args.settings()?;
    let counts = s
        .counts
        .clone()
        .ok_or_else(|| Error::config("n", "analyze needs explicit counts"))?;
    let scenario = s.scenario()?;
    let config = scenario.config()?;
    let n: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let types = n.len();
    let (ek, er) = expected_k_r(&n, &n, config.ell);
    let l2 = lambda_ii(&n, &n, config.ell, config.slot_width);
    let rep = (types as u64 * config.ell) as f64;
    let mut out = output(s.out.as_ref())?;
    let mut body = || -> io::Result<()> {
        writeln!(out, "quantity,value")?;
        writeln!(out, "ell,{}", config.ell)?;
        writeln!(out, "expected_flagged_blocks,{}", format_sig(ek))?;
        writeln!(out, "expected_stage3_blocks,{}", format_sig(er))?;
        writeln!(out, "expected_3ssbb_slots,{}", format_sig(l2))?;
        writeln!(out, "trepbb_slots,{}", format_sig(rep))?;
        if let Ok(v) = expected_2ss_bb_slots(&n, &n, &config) {
            writeln!(
                out,
                "expected_2ssbb_slots_without_instructions,{}",
                format_sig(v)
            )?;
        }
        writeln!(
            out,
            "hsrc1_phase2_choice,{}",
            choose_phase2_3ss(&n, &config)
        )?;
        let bb = expected_energy_3ss(
            &n,
            &config,
            &EnergyMode::BallsAndBins {
                rough: &n,
                frame: l2,
            },
        );
        for b in 0..types {
            writeln!(
                out,
                "energy_3ssbb_type{},{}",
                b + 1,
                format_sig(bb[b].energy)
            )?;
            writeln!(
                out,
                "energy_trepbb_type{},{}",
                b + 1,
                format_sig(expected_energy_trepbb(n[b], &config))
            )?;
        }
        out.flush()
    };
    body().map_err(io_err)
}

fn default_grid(types: usize) -> Vec<Vec<u64>> {
    let base: Vec<u64> = (0..types)
        .map(|b| 500 + (1500 * b as u64) / (types as u64 - 1).max(1))
        .collect();
    (0..types)
        .map(|r| {
            let mut v = base.clone();
            v.rotate_left(r);
            v
        })
        .collect()
}

fn validate(args: &ScenarioArgs) -> Result<()> {
    let mut s = args.settings()?;
    let grid = match &s.counts {
        Some(c) => vec![c.clone()],
        None => {
            let t = s.types.unwrap_or(3);
            let g = default_grid(t);
            s.counts = Some(g[0].clone());
            g
        }
    };
    let scenario = s.scenario()?;
    let schemes = s
        .schemes
        .clone()
        .unwrap_or_else(|| vec!["HSRC-1".parse().expect("valid scheme")]);
    let replicates = s.replicates.unwrap_or(300);
    let seed = s.seed.unwrap_or(1);
    let mut out = output(s.out.as_ref())?;
    writeln!(
        out,
        "scheme,type,hits,trials,rate,wilson_lower,wilson_upper"
    )
    .map_err(io_err)?;
    for scheme in schemes {
        for r in validate_accuracy(scheme, &grid, &scenario, replicates, seed)? {
            writeln!(
                out,
                "{scheme},{},{},{},{},{},{}",
                r.type_index + 1,
                r.hits,
                r.trials,
                format_sig(r.rate),
                format_sig(r.lower),
                format_sig(r.upper)
            )
            .map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Figure { name, args } => figure(&name, &args),
        Command::Zeta {
            t_min,
            t_max,
            ell,
            others,
            replicates,
            seed,
        } => {
            if t_min < 2 || t_max < t_min {
                return Err(Error::config("t-min", "need 2 <= t-min <= t-max"));
            }
            let rows = threshold_table(t_min..=t_max, &[ell], others, replicates, seed)?;
            write_thresholds(&mut io::stdout().lock(), &rows).map_err(io_err)
        }
        Command::Analyze(args) => analyze(&args),
        Command::CalibrateEll {
            eps,
            delta,
            n,
            replicates,
            seed,
        } => {
            let grid = hetcard::harness::settings::parse_counts(&n)?;
            let ell = calibrate_ell(eps, delta, &grid, replicates, seed)?;
            println!("{ell}");
            Ok(())
        }
        Command::Validate(args) => validate(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

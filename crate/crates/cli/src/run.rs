//! Executes a [`RunConfig`]: runs the estimator, writes the manifest and CSV
//! files into the output directory, and returns the summary lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rll2d::capacity::{exact_log_z_enumeration, exact_log_z_transfer_matrix, ENUMERATION_MAX_CELLS, TRANSFER_MATRIX_MAX_SIDE};
use rll2d::info_rate::{InfoRateConfig, LayerPolicy};
use rll2d::logspace::LN_2;
use rll2d::seed::{TAG_CAPACITY, TAG_CHAIN_CHECK, TAG_INFO_RATE};
use rll2d::{
    estimate_capacity, estimate_info_rate, hard_square_chain, sampler_self_check, ChainSchedule,
    ConstraintKind, GridSpec, SeedTree, Trace, TraceSpec,
};

use crate::config::{AlphaSchedule, Command, RunConfig};
use crate::CliError;

/// Version of every CSV layout written here.
pub const SCHEMA_VERSION: u32 = 1;

/// Thresholds of the `chain-check` self-test.
pub const CHAIN_CHECK_MAX_TV: f64 = 0.01;
pub const CHAIN_CHECK_MAX_ROW_ERROR: f64 = 1e-12;

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: Vec<String>,
    /// false when a self-test failed
    pub passed: bool,
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(kind: &str, columns: &[&str]) -> Self {
        let mut text = format!("# rll2d {kind} schema v{SCHEMA_VERSION}\n");
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    fn write(&self, dir: &Path, name: &str) -> Result<(), CliError> {
        write_file(dir, name, &self.text)
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn grid_of(config: &RunConfig) -> Result<GridSpec, CliError> {
    let kind = ConstraintKind::from_name(&config.constraint).map_err(|e| CliError::Runtime(e.to_string()))?;
    GridSpec::new(config.m, config.strip_width, kind).map_err(|e| CliError::Runtime(e.to_string()))
}

fn chain_schedule(config: &RunConfig) -> ChainSchedule {
    ChainSchedule {
        burn_in: config.burn_in,
        samples: config.k,
        thinning: config.thinning,
    }
}

fn trace_spec(config: &RunConfig, grid: &GridSpec) -> Option<TraceSpec> {
    (config.trace_per_decade > 0).then(|| TraceSpec {
        per_decade: config.trace_per_decade,
        divisor: grid.n() as f64,
    })
}

const TRACE_COLUMNS: [&str; 4] = ["id", "index", "log2_estimate_per_symbol", "stderr"];

fn push_traces(csv: &mut Csv, traces: &[Trace], prefix: &str) {
    for t in traces {
        for p in &t.points {
            csv.row(&[
                format!("{prefix}{}", t.id),
                p.index.to_string(),
                p.log2_estimate.to_string(),
                p.stderr.to_string(),
            ]);
        }
    }
}

fn write_manifest(config: &RunConfig, extra: &[(&str, String)]) -> Result<(), CliError> {
    let mut text = format!("# rll2d manifest schema v{SCHEMA_VERSION}\n");
    for (k, v) in config.manifest_entries() {
        let _ = writeln!(text, "{k} = {v}");
    }
    // derived quantities stay commented so the file replays as a config
    for (k, v) in extra {
        let _ = writeln!(text, "# {k} = {v}");
    }
    write_file(&config.output, "manifest.txt", &text)
}

pub fn execute(config: &RunConfig) -> Result<RunReport, CliError> {
    fs::create_dir_all(&config.output).map_err(|e| CliError::Io {
        path: config.output.display().to_string(),
        source: e,
    })?;
    let run = || match config.command {
        Command::Capacity => run_capacity(config),
        Command::InfoRate => run_info_rate(config),
        Command::Oracle => run_oracle(config),
        Command::ChainCheck => run_chain_check(config),
    };
    let report = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(run),
        None => run(),
    }?;
    let mut text = report.summary.join("\n");
    text.push('\n');
    write_file(&config.output, "summary.txt", &text)?;
    Ok(report)
}

fn run_capacity(config: &RunConfig) -> Result<RunReport, CliError> {
    let grid = grid_of(config)?;
    let seeds = SeedTree::new(config.seed).child(TAG_CAPACITY);
    let est = estimate_capacity(&grid, chain_schedule(config), config.paths, &seeds, trace_spec(config, &grid))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let exact = if grid.m() <= TRANSFER_MATRIX_MAX_SIDE {
        exact_log_z_transfer_matrix(&grid).ok().map(|z| z / LN_2 / grid.n() as f64)
    } else {
        None
    };

    let n = grid.n() as f64;
    let mut csv = Csv::new(
        "capacity",
        &["m", "strip_width", "k", "path", "side", "log2_z", "capacity", "stderr"],
    );
    for p in &est.paths {
        for (side, e) in [("A", &p.a), ("B", &p.b)] {
            csv.row(&[
                est.m.to_string(),
                est.strip_width.to_string(),
                est.k.to_string(),
                p.path.to_string(),
                side.to_string(),
                e.log2().to_string(),
                (e.log2() / n).to_string(),
                (e.stderr_log2() / n).to_string(),
            ]);
        }
    }
    csv.row(&[
        est.m.to_string(),
        est.strip_width.to_string(),
        est.k.to_string(),
        "all".to_string(),
        "combined".to_string(),
        (est.capacity * n).to_string(),
        est.capacity.to_string(),
        est.stderr.to_string(),
    ]);
    csv.write(&config.output, "capacity.csv")?;
    let mut traces = Csv::new("traces", &TRACE_COLUMNS);
    push_traces(&mut traces, &est.traces, "");
    traces.write(&config.output, "traces.csv")?;
    write_manifest(
        config,
        &[("exact_capacity", exact.map_or("unavailable".to_string(), |c| c.to_string()))],
    )?;

    let mut line = format!(
        "capacity m={} w={} k={} paths={} C_M={:.6} stderr={:.6} spread={:.6}",
        est.m, est.strip_width, est.k, config.paths, est.capacity, est.stderr, est.spread
    );
    if let Some(c) = exact {
        let _ = write!(line, " exact={c:.6} error={:+.6}", est.capacity - c);
    }
    Ok(RunReport {
        summary: vec![line],
        passed: true,
    })
}

fn run_info_rate(config: &RunConfig) -> Result<RunReport, CliError> {
    let grid = grid_of(config)?;
    let root = SeedTree::new(config.seed);
    let (log_z_f, source) = if grid.m() <= TRANSFER_MATRIX_MAX_SIDE {
        let z = exact_log_z_transfer_matrix(&grid).map_err(|e| CliError::Runtime(e.to_string()))?;
        (z, "transfer_matrix".to_string())
    } else {
        let est = estimate_capacity(&grid, chain_schedule(config), config.paths, &root.child(TAG_CAPACITY), None)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        (est.capacity * grid.n() as f64 * LN_2, "tree_ogata_tanemura".to_string())
    };
    let layers = match (&config.alpha_schedule, config.j) {
        (AlphaSchedule::Explicit(_), _) => LayerPolicy::Fixed(config.explicit_schedule().expect("validated")),
        (AlphaSchedule::Geometric, Some(j)) => LayerPolicy::Geometric(j),
        (AlphaSchedule::Geometric, None) => LayerPolicy::BySnr,
    };
    let ir_config = InfoRateConfig {
        outer: config.l,
        outer_burn_in: config.burn_in,
        inner: chain_schedule(config),
        layers,
        log_z_f,
        trace: trace_spec(config, &grid),
    };
    let results = estimate_info_rate(&grid, &config.snr_db, &ir_config, &root.child(TAG_INFO_RATE))
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut csv = Csv::new(
        "info-rate",
        &[
            "snr_db", "I_per_N", "stderr", "L", "J", "K", "H_Y_per_N", "H_Y_given_X_per_N",
            "paired_I_per_N", "paired_stderr",
        ],
    );
    let mut outputs = Csv::new("info-rate-outputs", &["snr_db", "l", "log2_p_y", "log2_p_y_given_x"]);
    let mut traces = Csv::new("traces", &TRACE_COLUMNS);
    let mut summary = Vec::new();
    for r in &results {
        csv.row(&[
            r.snr_db.to_string(),
            r.info_rate.to_string(),
            r.stderr.to_string(),
            r.outer.to_string(),
            r.layers.to_string(),
            r.k.to_string(),
            r.h_y.to_string(),
            r.h_y_given_x.to_string(),
            r.paired_info_rate.to_string(),
            r.paired_stderr.to_string(),
        ]);
        for (l, (py, pyx)) in r.log2_p_y.iter().zip(&r.log2_p_y_given_x).enumerate() {
            outputs.row(&[r.snr_db.to_string(), l.to_string(), py.to_string(), pyx.to_string()]);
        }
        push_traces(&mut traces, &r.traces, &format!("snr{}_", r.snr_db));
        summary.push(format!(
            "info-rate m={} snr_db={} J={} L={} K={} I/N={:.6} stderr={:.6} paired={:.6}",
            grid.m(),
            r.snr_db,
            r.layers,
            r.outer,
            r.k,
            r.info_rate,
            r.stderr,
            r.paired_info_rate
        ));
    }
    csv.write(&config.output, "info_rate.csv")?;
    outputs.write(&config.output, "info_rate_outputs.csv")?;
    traces.write(&config.output, "traces.csv")?;
    write_manifest(
        config,
        &[
            ("log_z_source", source),
            ("log2_z_f", (log_z_f / LN_2).to_string()),
        ],
    )?;
    Ok(RunReport {
        summary,
        passed: true,
    })
}

fn run_oracle(config: &RunConfig) -> Result<RunReport, CliError> {
    let grid = grid_of(config)?;
    if grid.m() > TRANSFER_MATRIX_MAX_SIDE {
        return Err(CliError::Runtime(format!(
            "oracle budget exceeded: m = {} > {TRANSFER_MATRIX_MAX_SIDE}",
            grid.m()
        )));
    }
    let n = grid.n() as f64;
    let tm = exact_log_z_transfer_matrix(&grid).map_err(|e| CliError::Runtime(e.to_string()))? / LN_2;
    let en = if grid.n() <= ENUMERATION_MAX_CELLS {
        Some(exact_log_z_enumeration(&grid).map_err(|e| CliError::Runtime(e.to_string()))? / LN_2)
    } else {
        None
    };

    let mut csv = Csv::new("oracle", &["method", "m", "log2_z", "z", "capacity"]);
    let mut summary = Vec::new();
    for (method, v) in [("enumeration", en), ("transfer_matrix", Some(tm))] {
        if let Some(v) = v {
            csv.row(&[
                method.to_string(),
                grid.m().to_string(),
                v.to_string(),
                count_text(&config.constraint, v),
                (v / n).to_string(),
            ]);
            summary.push(format!(
                "oracle m={} {method} log2Z={v:.12} Z={:.6e} C_M={:.10}",
                grid.m(),
                v.exp2(),
                v / n
            ));
        } else {
            summary.push(format!(
                "oracle m={} {method} skipped (more than {ENUMERATION_MAX_CELLS} cells)",
                grid.m()
            ));
        }
    }
    let mut passed = true;
    if let Some(e) = en {
        let rel = (e - tm).abs() / tm.abs().max(1e-300);
        passed = rel <= 1e-10;
        summary.push(format!(
            "oracle m={} agreement relative_difference={rel:.3e} {}",
            grid.m(),
            if passed { "agree" } else { "DISAGREE" }
        ));
    }
    csv.write(&config.output, "oracle.csv")?;
    write_manifest(config, &[])?;
    Ok(RunReport { summary, passed })
}

/// `2^log2_z`, as an integer when it is an exactly representable count.
fn count_text(constraint: &str, log2_z: f64) -> String {
    let z = log2_z.exp2();
    if constraint == "rll_1inf" && log2_z < 53.0 {
        format!("{:.0}", z.round())
    } else {
        format!("{z:e}")
    }
}

fn run_chain_check(config: &RunConfig) -> Result<RunReport, CliError> {
    let chain = hard_square_chain(config.m).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut rng = SeedTree::new(config.seed).child(TAG_CHAIN_CHECK).rng();
    let check = sampler_self_check(&chain, config.k, &mut rng).map_err(|e| CliError::Runtime(e.to_string()))?;
    let passed = check.tv_distance < CHAIN_CHECK_MAX_TV && check.max_row_error <= CHAIN_CHECK_MAX_ROW_ERROR;

    let mut csv = Csv::new("chain-check", &["n", "paths", "draws", "tv_distance", "max_row_error", "passed"]);
    csv.row(&[
        config.m.to_string(),
        check.paths.to_string(),
        check.draws.to_string(),
        check.tv_distance.to_string(),
        check.max_row_error.to_string(),
        passed.to_string(),
    ]);
    csv.write(&config.output, "chain_check.csv")?;
    write_manifest(config, &[])?;
    Ok(RunReport {
        summary: vec![format!(
            "chain-check n={} draws={} tv={:.6} max_row_error={:.3e} {}",
            config.m,
            check.draws,
            check.tv_distance,
            check.max_row_error,
            if passed { "pass" } else { "FAIL" }
        )],
        passed,
    })
}

//! Acceptance suite: one check per criterion, one PASS/FAIL line each.
//!
//! Runs as its own harness so the lines are always printed. Positional
//! arguments `1`..`9` select criteria; `RLL2D_SKIP_LONG=1` skips the M=60
//! run. Every stochastic criterion uses the same master seed as the CLI
//! default and the same seed paths as the matching CLI command.

use std::path::Path;
use std::process::{Command as Process, Stdio};
use std::time::Instant;

use rand::seq::IndexedRandom;
use rll2d::capacity::{capacity_from_log_z, exact_log_z_enumeration, exact_log_z_transfer_matrix};
use rll2d::estimators::{BaseEstimate, ChannelTempering, KernelTempering, MultilayerConfig, OgataTanemura, TemperedFamily};
use rll2d::info_rate::{exact_log_p_y, log_p_y, simulate_output, InfoRateConfig, LayerPolicy};
use rll2d::logspace::{log_sum_exp, LN_2};
use rll2d::seed::{TAG_CAPACITY, TAG_CHAIN_CHECK, TAG_INFO_RATE};
use rll2d::{
    estimate_capacity, estimate_info_rate, hard_square_chain, sampler_self_check, ChainSchedule,
    ChannelModel, Configuration, ConstraintKind, EstimatorAccumulator, FactorModel, GridSpec,
    LayerSchedule, SeedTree, Side, TargetSpec,
};

/// Master seed of every stochastic criterion, the CLI default.
const SEED: u64 = 1;

const REF_C10: f64 = 0.6082;
const REF_C60: f64 = 0.5914;
const REF_C_INF: f64 = 0.5879;
const REF_C24: f64 = 0.596;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn capacity_k(grid: &GridSpec, k: usize, paths: usize) -> rll2d::CapacityEstimate {
    estimate_capacity(
        grid,
        ChainSchedule::for_grid(grid, k),
        paths,
        &SeedTree::new(SEED).child(TAG_CAPACITY),
        None,
    )
    .expect("capacity run")
}

fn exact_capacity(grid: &GridSpec) -> f64 {
    capacity_from_log_z(grid, exact_log_z_transfer_matrix(grid).unwrap())
}

fn criterion_1() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, count) in [(1usize, 2.0f64), (2, 7.0), (3, 63.0), (4, 1234.0)] {
        let g = GridSpec::hard_square(m, 1).unwrap();
        let en = exact_log_z_enumeration(&g).unwrap();
        let tm = exact_log_z_transfer_matrix(&g).unwrap();
        let rel = (en - tm).abs() / tm.abs().max(f64::MIN_POSITIVE);
        let counts_ok = (en.exp() - count).abs() < 1e-9 * count && (tm.exp() - count).abs() < 1e-9 * count;
        ok &= rel <= 1e-10 && counts_ok;
        parts.push(format!("M={m} Z={:.0}/{:.0} rel={rel:.1e}", en.exp(), tm.exp()));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [3usize, 4, 5] {
        let g = GridSpec::hard_square(m, 1).unwrap();
        let est = capacity_k(&g, 100_000, 4);
        let err = est.capacity - exact_capacity(&g);
        ok &= err.abs() <= 0.005;
        parts.push(format!("M={m} C={:.5} err={err:+.5}", est.capacity));
    }
    outcome(ok, format!("{} (tol 0.005)", parts.join("; ")))
}

fn criterion_3() -> Outcome {
    let g1 = GridSpec::hard_square(10, 1).unwrap();
    let exact = exact_capacity(&g1);
    let mut ok = true;
    let mut parts = vec![format!("exact C10={exact:.6}")];
    for w in [1usize, 2] {
        let g = GridSpec::hard_square(10, w).unwrap();
        let est = capacity_k(&g, 100_000, 4);
        let (dp, de) = (est.capacity - REF_C10, est.capacity - exact);
        ok &= dp.abs() <= 0.003 && de.abs() <= 0.003;
        parts.push(format!("w={w} C={:.6} vs reference {dp:+.6} vs exact {de:+.6}", est.capacity));
    }
    outcome(ok, format!("{} (tol 0.003)", parts.join("; ")))
}

fn criterion_4() -> Outcome {
    let g = GridSpec::hard_square(60, 3).unwrap();
    let est = capacity_k(&g, 100_000, 2);
    let d = est.capacity - REF_C60;
    outcome(
        d.abs() <= 0.003 && est.capacity > REF_C_INF,
        format!(
            "M=60 w=3 C={:.6} stderr={:.6} vs reference {d:+.6} (tol 0.003), above {REF_C_INF}",
            est.capacity, est.stderr
        ),
    )
}

fn criterion_5() -> Outcome {
    let chain = hard_square_chain(5).unwrap();
    let mut rng = SeedTree::new(SEED).child(TAG_CHAIN_CHECK).rng();
    let check = sampler_self_check(&chain, 100_000, &mut rng).unwrap();
    outcome(
        check.tv_distance < 0.01 && check.max_row_error <= 1e-12,
        format!(
            "n=5 paths={} TV={:.5} (tol 0.01) max row error {:.1e} (tol 1e-12)",
            check.paths, check.tv_distance, check.max_row_error
        ),
    )
}

/// All `2^N` configurations with their natural-log values under `log_value`.
fn enumerate(m: usize, log_value: impl Fn(&Configuration) -> f64) -> Vec<(Configuration, f64)> {
    (0u64..1 << (m * m))
        .map(|bits| {
            let rows = (0..m).map(|r| (bits >> (r * m)) & ((1 << m) - 1)).collect();
            let x = Configuration::from_rows(m, rows);
            let v = log_value(&x);
            (x, v)
        })
        .filter(|(_, v)| *v > f64::NEG_INFINITY)
        .collect()
}

/// `E[Gamma_hat_{f_A}]` under `p_f`, from the by-product marginal the
/// sampler uses, against the exact `1/Z`.
fn gamma_expectation_error(grid: &GridSpec) -> f64 {
    let model = FactorModel::plain(grid);
    let states = enumerate(grid.m(), |x| model.log_value(x).unwrap());
    let log_z = log_sum_exp(&states.iter().map(|s| s.1).collect::<Vec<_>>());
    let target = TargetSpec::indicator(grid);
    let mut ot = OgataTanemura::new(target.log_support_count(Side::A).unwrap());
    for (x, lf) in &states {
        let mut log_f_a = model.log_internal(x, Side::A);
        for strip in grid.strips_on(Side::B) {
            log_f_a += model.strip_chain(x, strip).log_partition();
        }
        ot.push_weighted(log_f_a, lf - log_z);
    }
    let got = ot.log_gamma().unwrap();
    ((got + log_z).exp() - 1.0).abs()
}

/// `E[R_hat_j]` under `q_j` against `Z_{g_{j-1}} / Z_{g_j}`, largest relative
/// error over all layers.
fn ratio_expectation_error<F: TemperedFamily>(family: &F, schedule: &LayerSchedule) -> f64 {
    let m = family.grid().m();
    let log_z = |alpha: f64| {
        let t = family.layer_target(alpha).unwrap();
        let vals: Vec<f64> = enumerate(m, |x| t.log_value(x)).iter().map(|s| s.1).collect();
        log_sum_exp(&vals)
    };
    let mut worst: f64 = 0.0;
    for j in 1..=schedule.layers() {
        let (a_prev, a) = (schedule.alpha(j - 1), schedule.alpha(j));
        let t = family.layer_target(a).unwrap();
        let z_j = log_z(a);
        let mut acc = EstimatorAccumulator::new();
        for (x, lg) in enumerate(m, |x| t.log_value(x)) {
            acc.push_weighted((a_prev - a) * family.log_tempered_factor(&x), lg - z_j);
        }
        let expect = log_z(a_prev) - z_j;
        worst = worst.max((acc.log_mean().unwrap() - expect).exp_m1().abs());
    }
    worst
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    for (m, w) in [(2usize, 1usize), (3, 1), (3, 2)] {
        worst = worst.max(gamma_expectation_error(&GridSpec::hard_square(m, w).unwrap()));
    }
    let schedule = LayerSchedule::geometric(3).unwrap();
    let hard = GridSpec::hard_square(3, 1).unwrap();
    let smooth = GridSpec::new(3, 1, ConstraintKind::smoothed(0.1).unwrap()).unwrap();
    worst = worst.max(ratio_expectation_error(&KernelTempering::new(&hard), &schedule));
    worst = worst.max(ratio_expectation_error(&KernelTempering::new(&smooth), &schedule));
    let channel = ChannelModel::from_snr_db(3.0).unwrap();
    let x = Configuration::from_bits(3, &[1, 0, 1, 0, 0, 0, 0, 1, 0]).unwrap();
    let y = simulate_output(&x, &channel, &mut SeedTree::new(SEED).rng()).y;
    worst = worst.max(ratio_expectation_error(
        &ChannelTempering::new(&hard, channel.log_likelihoods(&y)),
        &schedule,
    ));
    outcome(
        worst <= 1e-10,
        format!("Gamma_A on M=2,3 and R_j on kernel/smoothed/channel families: max rel error {worst:.1e} (tol 1e-10)"),
    )
}

fn criterion_7() -> Outcome {
    let g = GridSpec::hard_square(4, 1).unwrap();
    let log_z = exact_log_z_transfer_matrix(&g).unwrap();
    let feasible: Vec<Configuration> = enumerate(4, |x| FactorModel::plain(&g).log_value(x).unwrap())
        .into_iter()
        .map(|s| s.0)
        .collect();
    let root = SeedTree::new(SEED).child(TAG_INFO_RATE);
    let mut ok = true;
    let mut parts = Vec::new();
    for (snr, j) in [(0.0, 3usize), (6.0, 6)] {
        let channel = ChannelModel::from_snr_db(snr).unwrap();
        let config = MultilayerConfig {
            schedule: LayerSchedule::geometric(j).unwrap(),
            // spread of log2 p(y) is about 0.013 bits at K=1e5 on the worst outputs
            chain: ChainSchedule::for_grid(&g, 200_000),
            base: BaseEstimate::TreeOgataTanemura,
            trace: None,
        };
        let mut within = 0;
        let mut worst: f64 = 0.0;
        for l in 0..100u64 {
            let mut rng = root.child(j as u64).child(l).rng();
            let x = feasible.choose(&mut rng).unwrap();
            let y = simulate_output(x, &channel, &mut rng).y;
            let exact = exact_log_p_y(&y, &g, &channel).unwrap() / LN_2;
            let (est, _) = log_p_y(&y, &g, &channel, &config, log_z, &root.child(100 + j as u64).child(l)).unwrap();
            let err = (est.log2() - exact).abs();
            worst = worst.max(err);
            if err <= 0.02 {
                within += 1;
            }
        }
        ok &= within >= 95;
        parts.push(format!("{snr} dB J={j}: {within}/100 within 0.02 bits, worst {worst:.4}"));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let g = GridSpec::hard_square(8, 1).unwrap();
    let c8 = exact_capacity(&g);
    let snrs: Vec<f64> = (-5..=6).map(|i| f64::from(2 * i)).collect();
    let config = InfoRateConfig {
        outer: 100,
        outer_burn_in: 10 * g.m(),
        inner: ChainSchedule::for_grid(&g, 10_000),
        layers: LayerPolicy::BySnr,
        log_z_f: exact_log_z_transfer_matrix(&g).unwrap(),
        trace: None,
    };
    let res = estimate_info_rate(&g, &snrs, &config, &SeedTree::new(SEED).child(TAG_INFO_RATE)).unwrap();

    let monotone = res.windows(2).all(|w| {
        w[1].info_rate >= w[0].info_rate - 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt()
    });
    let bounded = res.iter().all(|r| r.info_rate <= c8 + 3.0 * r.stderr);
    let (low, high) = (&res[0], res.last().unwrap());
    let low_ok = low.info_rate < 0.05;
    let high_ok = (high.info_rate - c8).abs() <= 0.05;

    let g24 = GridSpec::hard_square(24, 2).unwrap();
    let c24 = capacity_k(&g24, 100_000, 2);
    let c24_ok = (c24.capacity - REF_C24).abs() <= 0.004;

    let curve: Vec<String> = res
        .iter()
        .map(|r| format!("{}:{:.4}±{:.4}", r.snr_db, r.info_rate, r.stderr))
        .collect();
    outcome(
        monotone && bounded && low_ok && high_ok && c24_ok,
        format!(
            "M=8 L=100 K=1e4 curve [{}]; nondecreasing {monotone}; <= C8={c8:.4}+3se {bounded}; \
             -10 dB {:.4} < 0.05 {low_ok} (paired {:.4}±{:.4}); 12 dB within 0.05 of C8 {high_ok}; \
             C24={:.5} vs 0.596 (tol 0.004) {c24_ok}",
            curve.join(" "),
            low.info_rate,
            low.paired_info_rate,
            low.paired_stderr,
            c24.capacity
        ),
    )
}

fn run_cli(args: &[&str], out: &Path) -> Vec<(String, Vec<u8>)> {
    let status = Process::new(env!("CARGO_BIN_EXE_rll2d"))
        .args(args)
        .arg("--output")
        .arg(out)
        .stdout(Stdio::null())
        .status()
        .expect("run rll2d");
    assert!(status.success(), "rll2d {args:?} failed");
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Outcome {
    let commands: [&[&str]; 4] = [
        &["oracle", "--m", "4"],
        &["chain-check"],
        &["capacity", "--m", "5", "--k", "100000", "--paths", "4"],
        &["info-rate", "--m", "4", "--snr-db", "0,6", "--l", "10", "--k", "2000"],
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for args in commands {
        let dir = tempfile::tempdir().unwrap();
        let first = run_cli(args, &dir.path().join("a"));
        let mut second_args = args.to_vec();
        second_args.extend(["--threads", "1"]);
        let second = run_cli(&second_args, &dir.path().join("b"));
        let same = !first.is_empty() && first == second;
        ok &= same;
        parts.push(format!("{} ({} csv) {}", args[0], first.len(), if same { "identical" } else { "DIFFERENT" }));
    }
    outcome(ok, parts.join("; "))
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let skip_long = std::env::var("RLL2D_SKIP_LONG").is_ok_and(|v| v == "1");
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "oracle agreement", criterion_1),
        (2, "small-grid MC capacity", criterion_2),
        (3, "C10", criterion_3),
        (4, "C60", criterion_4),
        (5, "chain sampler exactness", criterion_5),
        (6, "estimator unbiasedness by enumeration", criterion_6),
        (7, "inner-loop oracle", criterion_7),
        (8, "information-rate curve", criterion_8),
        (9, "reproducibility", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        if id == 4 && skip_long {
            println!("criterion {id} SKIP {name}: RLL2D_SKIP_LONG=1");
            continue;
        }
        let start = Instant::now();
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {id} {} {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

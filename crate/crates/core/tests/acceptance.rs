//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the report is printed by
//! `cargo test` without `--nocapture`. `cargo test --test acceptance -- 3 4` runs a
//! subset by criterion number.

use std::process::ExitCode;
use std::time::Duration;

use chanpred::harness::selftest::{
    check_bias_matrices, check_csv_determinism, check_fig3_ordering, check_fig5_ordering, check_gradients, check_grid_refinement,
    check_init_equality, check_perfect_baseline, check_reformulation, check_residual_ordering, check_softmax_convexity, Check,
};
use chanpred::harness::ExperimentConfig;
use chanpred::Execution;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Criterion {
    id: usize,
    title: &'static str,
    limit: Duration,
    run: fn() -> Vec<Check>,
}

fn grid(from: usize) -> Vec<f64> {
    (from..=10).map(|i| 10.0 * i as f64).collect()
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            title: "reformulation exactness, 500 instances, 1e-12",
            limit: Duration::from_secs(5),
            run: || vec![check_reformulation(500, 2024)],
        },
        Criterion {
            id: 2,
            title: "analytic P=1 baseline within 3 standard errors, n_eval=2e4",
            limit: Duration::from_secs(30),
            run: || vec![check_perfect_baseline(&[10.0, 0.0, -10.0], &[0.0, 50.0, 100.0], 20_000, 7, Execution::default())],
        },
        Criterion {
            id: 3,
            title: "fresh network equals Structured Predictor, 100 inputs, both Q kinds, 1e-12",
            limit: Duration::from_secs(1),
            run: || vec![check_init_equality(100, 3)],
        },
        Criterion {
            id: 4,
            title: "analytic vs central-difference gradients, M=4 N_g=4 B=3, 1e-5",
            limit: Duration::from_secs(5),
            run: || vec![check_gradients(6, 4)],
        },
        Criterion {
            id: 5,
            title: "SNR 10 dB: NN Toep < LMMSE Jakes at 10..100 km/h, < LMMSE Perfect at 10, 20 km/h, seeds 0-2",
            limit: Duration::from_secs(600),
            run: || {
                let base = ExperimentConfig {
                    velocities_kmh: grid(1),
                    ..Default::default()
                };
                vec![check_fig3_ordering(&SEEDS, &base, Execution::default())]
            },
        },
        Criterion {
            id: 6,
            title: "SNR -10 dB: both NN predictors beat all others at 0..100 km/h, seeds 0-2",
            limit: Duration::from_secs(600),
            run: || {
                let base = ExperimentConfig {
                    velocities_kmh: grid(0),
                    ..Default::default()
                };
                vec![check_fig5_ordering(&SEEDS, &base, Execution::default())]
            },
        },
        Criterion {
            id: 7,
            title: "Gridded N_g=256 within 10% of analytic and <= N_g=16, P=1, SNR 10 dB, 0..100 km/h",
            limit: Duration::from_secs(120),
            run: || vec![check_grid_refinement(&grid(0), 16, 256, 20_000, 0, Execution::default())],
        },
        Criterion {
            id: 8,
            title: "structural invariants",
            limit: Duration::from_secs(60),
            run: || {
                vec![
                    check_bias_matrices(),
                    check_softmax_convexity(8),
                    check_residual_ordering(),
                    check_csv_determinism(8),
                ]
            },
        },
    ]
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --nocapture; numeric arguments select criteria
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria() {
        if !selected.is_empty() && !selected.contains(&c.id) {
            continue;
        }
        ran += 1;
        let checks = (c.run)();
        let elapsed: Duration = checks.iter().map(|k| k.elapsed).sum();
        let in_time = elapsed <= c.limit;
        let passed = in_time && checks.iter().all(|k| k.passed);
        println!(
            "criterion {}: {} ({:.1} s of {} s) {}",
            c.id,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            c.title
        );
        for k in &checks {
            println!("    {k}");
        }
        if !in_time {
            println!("    runtime limit exceeded");
        }
        failed += usize::from(!passed);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

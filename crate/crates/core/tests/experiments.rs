use qot_core::adversary::Strategy;
use qot_core::commitment::CheatModel;
use qot_core::harness::{
    check_bounds, emit_report, exact_failure_oracle, run_experiment, ExperimentConfig, FailureEvent, InputMode,
    OutputFormat,
};
use qot_core::params::ProtocolParams;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn aggregates_do_not_depend_on_thread_count() {
    let params = ProtocolParams::new(4, 1, 40).unwrap();
    for strategy in [
        Strategy::HonestBob,
        Strategy::GreedyBob,
        Strategy::PostponeBob,
        Strategy::CommitCheatBob {
            cheat: CheatModel::new(0.5).unwrap(),
        },
    ] {
        let config = ExperimentConfig::new(params.clone(), 3_000, 11).with_strategy(strategy);
        let one = in_pool(1, || run_experiment(&config).unwrap());
        let four = in_pool(4, || run_experiment(&config).unwrap());
        assert_eq!(one, four);
        assert_eq!(
            emit_report(&one, &check_bounds(&one, &params), OutputFormat::Structured),
            emit_report(&four, &check_bounds(&four, &params), OutputFormat::Structured)
        );
    }
}

#[test]
fn seeds_change_the_sample() {
    let params = ProtocolParams::new(3, 1, 6).unwrap();
    let a = run_experiment(&ExperimentConfig::new(params.clone(), 5_000, 1)).unwrap();
    let b = run_experiment(&ExperimentConfig::new(params, 5_000, 2)).unwrap();
    assert_eq!(a.trials, b.trials);
    assert_ne!(a.rates.abort.count, b.rates.abort.count);
}

#[test]
fn fixed_inputs_are_recovered() {
    let params = ProtocolParams::new(3, 1, 6).unwrap();
    let config = ExperimentConfig::new(params.clone(), 20_000, 3).with_inputs(InputMode::Fixed(vec![true, false, true]));
    let stats = run_experiment(&config).unwrap();
    assert_eq!(stats.decode_errors, 0);
    assert_eq!(stats.completed + stats.aborts.insufficient_matches, 20_000);
    let exact = exact_failure_oracle(&params, FailureEvent::Correctness).unwrap().to_f64();
    let sigma = (exact * (1.0 - exact) / 20_000.0).sqrt();
    assert!((stats.rates.abort.rate - exact).abs() <= 3.0 * sigma);
    assert!(check_bounds(&stats, &params).iter().all(|v| v.pass));
}

#[test]
fn structured_report_is_stable_json() {
    let params = ProtocolParams::new(2, 1, 6).unwrap();
    let stats = run_experiment(&ExperimentConfig::new(params.clone(), 1_000, 9)).unwrap();
    let text = emit_report(&stats, &check_bounds(&stats, &params), OutputFormat::Structured);
    assert!(text.ends_with('\n'));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["config"]["N"], 6);
    assert_eq!(doc["config"]["x"], 2);
    assert_eq!(doc["stats"]["trials"], 1_000);
    assert!(doc["verdicts"].is_array());
}

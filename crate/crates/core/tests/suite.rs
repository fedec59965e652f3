//! End-to-end runs of the verification suite: selection handling,
//! deterministic reports, the full default run, grid-refinement headroom,
//! and error reporting for misconfigured groups.

use std::collections::BTreeMap;
use std::fs;

use lieinfo::suite::{check_ids, run_suite, CheckResult, SuiteConfig};
use lieinfo::GroupId;

#[test]
fn empty_selection_yields_empty_passing_report() {
    let mut cfg = SuiteConfig::with_seed(7);
    cfg.select = Some(Vec::new());
    let report = run_suite(&cfg).unwrap();
    assert!(report.checks.is_empty());
    assert!(report.pass, "a run with nothing to check passes vacuously");
}

#[test]
fn unknown_check_id_is_rejected() {
    let mut cfg = SuiteConfig::with_seed(7);
    cfg.select = Some(vec!["no-such-check".to_string()]);
    assert!(run_suite(&cfg).is_err());
}

#[test]
fn reports_are_deterministic_across_runs_and_thread_modes() {
    let mut cfg = SuiteConfig::with_seed(1234);
    cfg.select = Some(vec![
        "haar-invariance".to_string(),
        "finite-entropy".to_string(),
    ]);

    let first = run_suite(&cfg).unwrap();
    let second = run_suite(&cfg).unwrap();
    assert_eq!(
        first.canonical_json().unwrap(),
        second.canonical_json().unwrap(),
        "two sequential runs must serialize identically apart from the timestamp"
    );
    assert_eq!(first.instances_csv(), second.instances_csv());
    assert_eq!(first.summary_text(), second.summary_text());

    let mut parallel = cfg.clone();
    parallel.parallel = true;
    let third = run_suite(&parallel).unwrap();
    // The config is embedded in the report, so compare the check payloads.
    let strip = |report: &lieinfo::suite::SuiteReport| {
        report
            .checks
            .iter()
            .map(|c| serde_json::to_string(c).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(
        strip(&first),
        strip(&third),
        "thread scheduling must not leak into the results"
    );
}

#[test]
fn default_run_completes_all_checks_and_passes() {
    let cfg = SuiteConfig::default();
    let report = run_suite(&cfg).unwrap();

    assert_eq!(report.checks.len(), check_ids().len());
    for check in &report.checks {
        match check {
            CheckResult::Completed { report } => {
                for instance in report.instances.iter().filter(|i| !i.pass) {
                    eprintln!(
                        "FAILED {}/{}: lhs {:e} rhs {:e} slack {:e} tol {:e}",
                        report.check,
                        instance.label,
                        instance.lhs,
                        instance.rhs,
                        instance.slack,
                        instance.tolerance
                    );
                }
                assert!(report.pass, "check '{}' failed", report.check);
            }
            CheckResult::Errored { check, error, .. } => {
                panic!("check '{check}' errored: {error}");
            }
        }
    }
    assert!(report.pass);
    println!("{}", report.summary_text());

    // The file set round-trips through disk.
    let dir = std::env::temp_dir().join(format!("lieinfo-suite-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    report.write_files(&dir).unwrap();
    let json = fs::read_to_string(dir.join("report.json")).unwrap();
    assert!(json.contains("\"schema_version\": 1"));
    let csv = fs::read_to_string(dir.join("instances.csv")).unwrap();
    assert!(csv.starts_with("check,label,kind,lhs,rhs,slack,tolerance,asserted,pass,note"));
    assert!(fs::read_to_string(dir.join("summary.txt")).unwrap().contains("overall"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn refining_the_grid_keeps_half_tolerance_headroom() {
    // The harmonic checks are calibrated with enough slack that halving
    // every tolerance and doubling the resolution both still pass: the
    // error budget is dominated by genuine margins, not grid luck.
    let select = vec!["haar-invariance".to_string(), "plancherel".to_string()];
    let mut scale = BTreeMap::new();
    scale.insert("haar-invariance".to_string(), 0.5);
    scale.insert("plancherel".to_string(), 0.5);

    let mut coarse = SuiteConfig::with_seed(99);
    coarse.select = Some(select.clone());
    coarse.tolerance_scale = scale.clone();
    let report = run_suite(&coarse).unwrap();
    assert!(report.pass, "coarse grid fails at half tolerance");

    let mut fine = SuiteConfig::with_seed(99);
    fine.resolution = vec![32, 32, 32];
    fine.bandwidth = 16;
    fine.select = Some(select);
    fine.tolerance_scale = scale;
    let report = run_suite(&fine).unwrap();
    assert!(report.pass, "refined grid fails at half tolerance");
}

#[test]
fn wrong_group_surfaces_as_reported_error_not_panic() {
    let mut cfg = SuiteConfig::with_seed(5);
    cfg.group = GroupId::R1;
    cfg.resolution = vec![64];
    cfg.select = Some(vec!["finite-entropy".to_string(), "marginals".to_string()]);

    let report = run_suite(&cfg).unwrap();
    let finite = report
        .checks
        .iter()
        .find(|c| c.check_id() == "finite-entropy")
        .unwrap();
    assert!(finite.passed(), "the finite check is group-independent");
    let marginals = report
        .checks
        .iter()
        .find(|c| c.check_id() == "marginals")
        .unwrap();
    assert!(
        matches!(marginals, CheckResult::Errored { .. }),
        "rotation-group checks must report a configuration error"
    );
    assert!(!report.pass);
    report.to_json().unwrap();
}

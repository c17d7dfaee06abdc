//! Acceptance suite: all sixteen criteria in quick (16^4) mode, one PASS/FAIL
//! line per criterion. Lines go straight to stderr so they show without
//! `--nocapture`.

use std::io::Write;

use minkray::experiments::{run_suite, SuiteConfig, CRITERIA};

fn say(line: String) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().expect("temporary output directory");
    let cfg = SuiteConfig::ci();
    let reports = run_suite(&cfg, Some(dir.path()), |r| {
        let title = CRITERIA.iter().find(|(id, _)| *id == r.id).map_or("", |c| c.1);
        say(format!("{} {} ({title})", if r.passed { "PASS" } else { "FAIL" }, r.id));
        for f in r.failures() {
            say(format!("    {f}"));
        }
    })
    .expect("suite runs");

    assert_eq!(reports.len(), CRITERIA.len());
    for (r, (id, _)) in reports.iter().zip(CRITERIA) {
        assert_eq!(r.id, id);
        assert!(dir.path().join(format!("{id}.json")).exists());
    }
    let flowout = &reports[14];
    assert!(!flowout.images.is_empty());
    for img in &flowout.images {
        let bytes = std::fs::read(dir.path().join(&img.path)).expect("slice image written");
        assert!(bytes.starts_with(b"P5\n"));
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect();
    say(format!("{}/{} criteria passed", reports.len() - failed.len(), reports.len()));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

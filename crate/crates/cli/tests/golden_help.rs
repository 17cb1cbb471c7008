//! Help screens are part of the interface contract. Any drift has to be
//! reviewed: regenerate with `UPDATE_GOLDEN=1 cargo test -p lglasso-cli`.

use std::path::PathBuf;
use std::process::Command;

fn help_text(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_lglasso"))
        .args(args)
        .output()
        .expect("run lglasso");
    assert!(out.status.success(), "help for {args:?} exited nonzero");
    String::from_utf8(out.stdout).expect("utf8 help text")
}

#[test]
fn help_screens_match_golden_files() {
    let cases: [(&str, &[&str]); 10] = [
        ("help.txt", &["--help"]),
        ("help_norm.txt", &["norm", "--help"]),
        ("help_dual.txt", &["dual", "--help"]),
        ("help_prox.txt", &["prox", "--help"]),
        ("help_solve.txt", &["solve", "--help"]),
        ("help_path.txt", &["path", "--help"]),
        ("help_groups.txt", &["groups", "--help"]),
        ("help_check_consistency.txt", &["check-consistency", "--help"]),
        ("help_experiment.txt", &["experiment", "--help"]),
        ("help_appendix_b.txt", &["appendix-b", "--help"]),
    ];
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (file, args) in cases {
        let actual = help_text(args);
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(file);
        if update {
            std::fs::write(&path, &actual).expect("write golden file");
            continue;
        }
        let expected = std::fs::read_to_string(&path)
            .unwrap_or_else(|_| panic!("missing golden file {file}; run with UPDATE_GOLDEN=1"));
        assert_eq!(
            actual, expected,
            "{file} drifted; regenerate with UPDATE_GOLDEN=1 and review the diff"
        );
    }
}

#[test]
fn numeric_flags_advertise_their_defaults() {
    for (sub, flag, default) in [
        ("norm", "--tol", "1e-9"),
        ("norm", "--max-iter", "50000"),
        ("prox", "--kkt-tol", "1e-6"),
        ("solve", "--max-outer", "100"),
        ("solve", "--loss", "squared"),
        ("path", "--n-points", "50"),
        ("path", "--ratio-min", "0.001"),
        ("check-consistency", "--strict-tol", "1e-9"),
        ("experiment", "--jobs", "0"),
        ("appendix-b", "--samples", "1000000"),
    ] {
        let text = help_text(&[sub, "--help"]);
        let needle = format!("[default: {default}]");
        let section = text
            .split(flag)
            .nth(1)
            .unwrap_or_else(|| panic!("{sub} help is missing {flag}"));
        assert!(
            section.contains(&needle),
            "{sub} help does not document {flag} default {default}"
        );
    }
}

use std::path::Path;
use std::process::{Command, Output};

fn embeval(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embeval")).args(args).current_dir(dir).output().unwrap()
}

fn fixtures() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn fixture_config_passes_the_check() {
    let out = embeval(&["eval", "all", "--check", "--config", "run.toml"], &fixtures());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("10 embedding(s), 4 dataset(s)"));
}

#[test]
fn bad_config_reports_every_problem_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        r#"
        output = "out"
        [corpus]
        paths = ["nowhere.txt"]
        [[embedding]]
        name = "e"
        model = "word2vec"
        architecture = "cbow"
        tokenizer = "ghost"
        [[dataset]]
        name = "d"
        task = "ner"
        path = "no-such-dir"
        "#,
    )
    .unwrap();
    let out = embeval(&["eval", "all", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["nowhere.txt", "ghost", "no-such-dir"] {
        assert!(err.contains(needle), "{needle} missing from:\n{err}");
    }
    assert!(!dir.path().join("out").exists(), "nothing should run on an invalid config");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.toml"), "output = \"o\"\nseeed = 3\n").unwrap();
    let out = embeval(&["eval", "all", "--check", "--config", "typo.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeed"));
}

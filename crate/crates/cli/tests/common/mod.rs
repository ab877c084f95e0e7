#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cxr_testkit::corpus::{write_corpus, Corpus};

pub const CONFIG: &str = r#"mock_models = true
jobs = 2

[paths]
images_dir = "images"
training_metadata = "training.csv"
validation_metadata = "validation.csv"
output_dir = "out"

[imgproc]
closing_radius = 3

[mock]
segmentation = "half-plane"
pathology = "mean-pixel"
"#;

/// Synthetic corpus plus `pipeline.toml` under `root`.
pub fn setup(root: &Path, n: usize, extra_config: &str) -> (Corpus, PathBuf) {
    let corpus = write_corpus(root, n, 48, 40).expect("corpus");
    let config = root.join("pipeline.toml");
    std::fs::write(&config, format!("{CONFIG}{extra_config}")).unwrap();
    (corpus, config)
}

pub fn cli(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxr-severity"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

/// Relative path -> bytes of every file under `dir`.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}

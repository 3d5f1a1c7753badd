#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use divergent_core::synth::{planted_corpus, PlantedConfig};
use divergent_core::write_tweet_stream;

pub const WINDOWS: [(&str, &str, &str); 2] = [
    ("march", "2015-03-01T00:00:00Z", "2015-04-01T00:00:00Z"),
    ("april", "2015-04-01T00:00:00Z", "2015-05-01T00:00:00Z"),
];

pub fn fixture_config() -> PlantedConfig {
    PlantedConfig {
        tweets_per_anchor: 1500,
        hijack_copies: 60,
        ..Default::default()
    }
}

/// Writes the planted corpus, a stop list and a config into `dir`; returns the config path.
pub fn write_fixture(dir: &Path, extra: &str) -> PathBuf {
    let cfg = fixture_config();
    let tweets = planted_corpus(&cfg);
    let mut buf = Vec::new();
    write_tweet_stream(&tweets, &mut buf).unwrap();
    std::fs::write(dir.join("tweets.jsonl"), buf).unwrap();
    std::fs::write(dir.join("stop.txt"), "the\na\nrt\n").unwrap();
    let mut text = format!(
        "inputs = [\"tweets.jsonl\"]\nanchor_a = \"{}\"\nanchor_b = \"{}\"\nstoplist = \"stop.txt\"\n\
         output_dir = \"out\"\nseed = 42\nalpha = 0.03\n{extra}\n",
        cfg.anchor_a, cfg.anchor_b
    );
    for (label, start, end) in WINDOWS {
        text.push_str(&format!(
            "\n[[windows]]\nlabel = \"{label}\"\nstart = \"{start}\"\nend = \"{end}\"\n"
        ));
    }
    text.push_str("\n[diversity]\nsample_size = 200\nn_draws = 20\n");
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn divergent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divergent"))
        .args(args)
        .output()
        .unwrap()
}

pub fn run_to(config: &Path, out: &Path, stages: &str) -> Output {
    divergent(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--stages",
        stages,
    ])
}

pub fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

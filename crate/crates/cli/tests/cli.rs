mod common;

use std::collections::BTreeMap;

use common::{divergent, manifest, run_to, write_fixture, WINDOWS};

fn artifact_hashes(m: &serde_json::Value) -> BTreeMap<String, String> {
    m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| {
            (
                a["path"].as_str().unwrap().to_string(),
                a["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn validate_clean_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    let out = divergent(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn validate_reports_alpha_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("alpha = 0.03", "alpha = 1.5");
    std::fs::write(&cfg, text).unwrap();
    let out = divergent(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "{stdout}");
    assert!(lines[0].starts_with("alpha: "));
}

#[test]
fn validate_reports_missing_stoplist() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    std::fs::remove_file(dir.path().join("stop.txt")).unwrap();
    let out = divergent(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("stoplist: "));
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(divergent(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(divergent(&["validate"]).status.code(), Some(1));
    assert_eq!(
        divergent(&["validate", "--config", "/nonexistent/run.toml"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(divergent(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    let out = run_to(&cfg, &dir.path().join("o"), "shift,plots");
    assert_eq!(out.status.code(), Some(1));

    let text = std::fs::read_to_string(&cfg).unwrap() + "\nbogus = 1\n";
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(
        divergent(&["validate", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn data_error_exits_two_and_names_slot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    // move the second window past the end of the corpus
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("\"2015-05-01T00:00:00Z\"", "\"2016-05-01T00:00:00Z\"")
        .replace("\"2015-04-01T00:00:00Z\"\nend", "\"2016-04-01T00:00:00Z\"\nend");
    std::fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("o");
    let out = run_to(&cfg, &out_dir, "timeseries,shift");
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("window april"));
    let m = manifest(&out_dir);
    assert_eq!(m["complete"], false);
    assert!(m["error"].as_str().unwrap().contains("april"));
    // the completed stage's artifact is kept
    assert!(artifact_hashes(&m).contains_key("timeseries/timeseries.csv"));
    assert!(out_dir.join("timeseries/timeseries.csv").is_file());
}

#[test]
fn timeseries_stage_writes_one_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    let out_dir = dir.path().join("o");
    let out = divergent(&[
        "timeseries",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<_> = walk(&out_dir);
    files.sort();
    assert_eq!(
        files,
        vec!["manifest.json".to_string(), "timeseries/timeseries.csv".to_string()]
    );
    let m = manifest(&out_dir);
    assert_eq!(m["complete"], true);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 1);
}

fn walk(root: &std::path::Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().components();
                out.push(
                    rel.map(|c| c.as_os_str().to_string_lossy().into_owned())
                        .collect::<Vec<_>>()
                        .join("/"),
                );
            }
        }
    }
    out
}

#[test]
fn full_run_has_one_artifact_per_slot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    let out_dir = dir.path().join("o");
    let out = run_to(&cfg, &out_dir, "all");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir);
    assert_eq!(m["complete"], true);

    let windows = WINDOWS.len();
    let anchors = 2;
    let months = 2;
    let kinds = 2;
    let skipped = m["skipped"].as_array().unwrap().len();
    assert_eq!(skipped, 0);
    let expected = 1 + 2 * windows + 5 * windows * anchors + (anchors * months * kinds - skipped) + 2;
    let hashes = artifact_hashes(&m);
    assert_eq!(hashes.len(), expected);

    for (w, _, _) in WINDOWS {
        for ext in ["json", "svg"] {
            assert!(hashes.contains_key(&format!("shift/{w}.{ext}")));
        }
        for a in ["rally", "counter"] {
            for f in [
                "topic.graphml",
                "edges.csv",
                "backbone.csv",
                "centrality.csv",
                "alpha_sweep.csv",
            ] {
                assert!(hashes.contains_key(&format!("network/{w}/{a}/{f}")), "{w}/{a}/{f}");
            }
        }
    }
    for (path, sha) in &hashes {
        let bytes = std::fs::read(out_dir.join(path)).unwrap();
        assert_eq!(&divergent_cli::artifacts::sha256_hex(&bytes), sha, "{path}");
    }
    let mut on_disk = walk(&out_dir);
    on_disk.retain(|p| p != "manifest.json");
    assert_eq!(on_disk.len(), hashes.len(), "no stray temp files");
}

#[test]
fn rerun_and_split_stages_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    let together = dir.path().join("together");
    assert!(run_to(&cfg, &together, "all").status.success());
    let again = dir.path().join("again");
    assert!(run_to(&cfg, &again, "all").status.success());
    assert_eq!(
        std::fs::read(together.join("manifest.json")).unwrap(),
        std::fs::read(again.join("manifest.json")).unwrap()
    );

    let all = artifact_hashes(&manifest(&together));
    let mut merged = BTreeMap::new();
    for stage in ["timeseries", "shift", "network", "diversity"] {
        let out = dir.path().join(stage);
        assert!(run_to(&cfg, &out, stage).status.success());
        merged.extend(artifact_hashes(&manifest(&out)));
    }
    assert_eq!(merged, all);
}

#[test]
fn seed_override_changes_sampled_artifacts_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path(), "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_to(&cfg, &a, "shift,diversity").status.success());
    let out = divergent(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--stages",
        "shift,diversity",
        "--seed",
        "43",
    ]);
    assert!(out.status.success());
    let (ha, hb) = (artifact_hashes(&manifest(&a)), artifact_hashes(&manifest(&b)));
    assert_eq!(ha["shift/march.json"], hb["shift/march.json"]);
    assert_ne!(
        ha["diversity/rally/2015-03_hashtag.csv"],
        hb["diversity/rally/2015-03_hashtag.csv"]
    );
}

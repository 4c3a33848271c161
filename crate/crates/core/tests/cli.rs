use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn bradfordize(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bradfordize"))
        .args(args)
        .arg("--out")
        .arg(out)
        .current_dir(fixtures())
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Documents as (id, doctype, source) triples.
fn write_docs(path: &Path, docs: &[(&str, &str, Option<&str>)]) {
    let mut xml = String::from("<DOCS>\n");
    for (id, doctype, source) in docs {
        xml.push_str(&format!(
            "<DOC><DOCID>{id}</DOCID><DOCTYPE>{doctype}</DOCTYPE>"
        ));
        if let Some(s) = source {
            xml.push_str(&format!("<SOURCE>{s}</SOURCE>"));
        }
        xml.push_str("</DOC>\n");
    }
    xml.push_str("</DOCS>\n");
    fs::write(path, xml).unwrap();
}

fn write_topics(path: &Path, numbers: &[u32]) {
    let mut xml = String::from("<topics>\n");
    for n in numbers {
        xml.push_str(&format!(
            "<top><num>{n}</num><EN-title>T{n}</EN-title></top>\n"
        ));
    }
    xml.push_str("</topics>\n");
    fs::write(path, xml).unwrap();
}

#[test]
fn merge_drops_cross_database_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.xml");
    let b = dir.path().join("b.xml");
    write_docs(
        &a,
        &[
            ("x1", "journalarticle", Some("J1")),
            ("x2", "monograph", Some("P1")),
        ],
    );
    write_docs(
        &b,
        &[
            ("x2", "monograph", Some("P1")),
            ("x3", "journalarticle", Some("J2")),
        ],
    );
    let out = dir.path().join("out");
    let docs_a = format!("A={}", a.display());
    let docs_b = format!("B={}", b.display());
    let o = bradfordize(&["merge", "--docs", &docs_a, "--docs", &docs_b], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("merge_report.json"));
    assert_eq!(report["duplicates_removed"], 1);
    assert_eq!(report["merged_count"], 3);
    assert_eq!(report["input_counts"]["A"], 2);

    let merged = fs::read_to_string(out.join("merged.xml")).unwrap();
    assert_eq!(merged.matches("<DOCID>x2</DOCID>").count(), 1);
    assert!(merged.contains("<DATABASE>A</DATABASE>"));
}

#[test]
fn merge_bundled_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let o = bradfordize(
        &[
            "merge",
            "--docs",
            "SOLIS=solis.xml",
            "--docs",
            "SoLit=solit.xml",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let report = json(&dir.path().join("merge_report.json"));
    assert_eq!(report["merged_count"], 232);
    assert_eq!(report["duplicates_removed"], 14);
}

#[test]
fn malformed_markup_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bradfordize(&["merge", "--docs", "BAD=malformed.xml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(
        stderr.contains("malformed.xml") && stderr.contains("byte"),
        "{stderr}"
    );
    assert!(!dir.path().join("merged.xml").exists());
}

#[test]
fn missing_input_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = bradfordize(
        &["bradfordize", "--docs", "X=does-not-exist.xml"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let o = bradfordize(
        &["zones", "--docs", "X=solis.xml", "--zone-mode", "fuzzy"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = bradfordize(
        &["zones", "--docs", "X=solis.xml", "--zones", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = bradfordize(&["eval", "--docs", "X=solis.xml"], dir.path());
    assert_eq!(o.status.code(), Some(1), "eval needs qrels");
}

#[test]
fn core_sources_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = bradfordize(
        &["bradfordize", "--docs", "LISA=informetrics.xml"],
        dir.path(),
    );
    assert!(o.status.success());
    let base = dir.path().join("bradfordize/all");
    let tsv = fs::read_to_string(base.join("core_sources.tsv")).unwrap();
    assert_eq!(tsv, "Journal\tNo. of papers\nScientometrics\t1,413\n");
    let core = fs::read_to_string(base.join("core.txt")).unwrap();
    assert_eq!(core.lines().count(), 1413);

    let ranking = json(&base.join("ranking.json"));
    let sources = ranking["sources"].as_array().unwrap();
    assert_eq!(sources.len(), 8);
    assert_eq!(sources[1]["productivity"], 218);
    assert_eq!(ranking["entries"].as_array().unwrap().len(), 2144);
}

#[test]
fn single_document_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("one.xml");
    write_docs(&docs, &[("only", "journalarticle", Some("Leviathan"))]);
    let spec = format!("X={}", docs.display());
    let out = dir.path().join("out");
    let o = bradfordize(&["bradfordize", "--docs", &spec], &out);
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(out.join("bradfordize/all/core.txt")).unwrap(),
        "only\n"
    );

    let o = bradfordize(&["zones", "--docs", &spec], &out);
    assert!(o.status.success());
    let zones = json(&out.join("zones/all.json"));
    assert_eq!(zones["degenerate"], true);
}

#[test]
fn corpus_without_sources_gives_empty_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("grey.xml");
    write_docs(
        &docs,
        &[
            ("g1", "journalarticle", None),
            ("g2", "Grey literature", Some("Somewhere")),
        ],
    );
    let spec = format!("X={}", docs.display());
    let out = dir.path().join("out");
    let o = bradfordize(&["bradfordize", "--docs", &spec], &out);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let ranking = json(&out.join("bradfordize/all/ranking.json"));
    assert_eq!(ranking["entries"].as_array().unwrap().len(), 0);
    assert_eq!(ranking["skipped"], serde_json::json!(["g1", "g2"]));
}

/// Two topics over the same three journals (6, 3 and 3 documents). Relevance
/// is either concentrated in the biggest journal or spread evenly.
fn eval_fixture(dir: &Path, concentrated: bool) -> Vec<String> {
    let mut docs = Vec::new();
    let mut qrels = String::new();
    for topic in [1u32, 2] {
        for (j, size) in [(1, 6), (2, 3), (3, 3)] {
            for i in 0..size {
                let id = format!("t{topic}-j{j}-{i}");
                let relevant = if concentrated { j == 1 } else { i % 3 == 0 };
                qrels.push_str(&format!("{topic} 0 {id} {}\n", u8::from(relevant)));
                docs.push((id, format!("Journal {j}")));
            }
        }
    }
    let doc_refs: Vec<(&str, &str, Option<&str>)> = docs
        .iter()
        .map(|(id, s)| (id.as_str(), "journalarticle", Some(s.as_str())))
        .collect();
    write_docs(&dir.join("docs.xml"), &doc_refs);
    fs::write(dir.join("qrels.txt"), qrels).unwrap();
    write_topics(&dir.join("topics.xml"), &[1, 2]);
    [
        "--docs",
        "X=docs.xml",
        "--qrels",
        "qrels.txt",
        "--topics",
        "topics.xml",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run_in(dir: &Path, args: &[String]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bradfordize"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn eval_separates_concentrated_from_uniform_relevance() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["eval".to_string()];
    args.extend(eval_fixture(dir.path(), true));
    let o = run_in(dir.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("out/eval/report.json"));
    let articles = &report["articles"];
    assert_eq!(articles["core"], 1.0);
    assert_eq!(articles["baseline"], 0.5);
    assert_eq!(articles["z3"], 0.0);
    assert_eq!(articles["improvement_core_vs_baseline_pct"], 100.0);
    // Zero reference precision leaves the improvement undefined.
    assert_eq!(articles["improvement_core_vs_z3_pct"], Value::Null);

    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["eval".to_string()];
    args.extend(eval_fixture(dir.path(), false));
    let o = run_in(dir.path(), &args);
    assert!(o.status.success());
    let report = json(&dir.path().join("out/eval/report.json"));
    let articles = &report["articles"];
    assert_eq!(articles["core"], 0.333);
    assert_eq!(articles["improvement_core_vs_baseline_pct"], 0.0);
    let w = &articles["wilcoxon"]["core_vs_baseline"];
    assert!(w["error"].as_str().unwrap().contains("zero"), "{w}");
    let csv = fs::read_to_string(dir.path().join("out/eval/precision_articles.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "topic,core,z2,z3,baseline");
}

#[test]
fn one_topic_is_insufficient_for_tests() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["eval".to_string()];
    args.extend(eval_fixture(dir.path(), true));
    args.extend(["--topic".to_string(), "2".to_string()]);
    let o = run_in(dir.path(), &args);
    assert!(o.status.success());
    let report = json(&dir.path().join("out/eval/report.json"));
    let err = report["articles"]["paired_t"]["core_vs_baseline"]["error"]
        .as_str()
        .unwrap();
    assert!(err.contains("at least 2"), "{err}");
    assert_eq!(report["articles"]["per_topic"].as_array().unwrap().len(), 1);
}

#[test]
fn analyze_hand_countable_curve() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs.xml");
    write_docs(
        &docs,
        &[
            ("a1", "journalarticle", Some("Alpha")),
            ("a2", "journalarticle", Some("Alpha")),
            ("a3", "journalarticle", Some("Alpha")),
            ("b1", "journalarticle", Some("Beta")),
            ("b2", "journalarticle", Some("Beta")),
            ("c1", "journalarticle", Some("Gamma")),
        ],
    );
    let spec = format!("X={}", docs.display());
    let out = dir.path().join("out");
    let o = bradfordize(&["analyze", "--docs", &spec], &out);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("analyze/articles/all.csv")).unwrap();
    assert_eq!(
        csv,
        "rank,cumulative,log10_rank,log10_cumulative\n\
         1,3,0.000000,0.477121\n\
         2,5,0.301030,0.698970\n\
         3,6,0.477121,0.778151\n"
    );
    let summary = json(&out.join("analyze/summary.json"));
    assert_eq!(summary["articles"]["mean_total_docs"], 6.0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixtures().join("bradfordize.conf");
    let cfg = config.to_str().unwrap();
    let o = bradfordize(
        &[
            "zones",
            "--config",
            cfg,
            "--zone-mode",
            "strict",
            "--topic",
            "163",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let zones = json(&dir.path().join("zones/topic_163.json"));
    assert_eq!(zones["mode"], "strict");
    assert!(!dir.path().join("zones/topic_164.json").exists());

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "docs=X=solis.xml\ncolour=blue\n").unwrap();
    let o = bradfordize(&["zones", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn stats_from_pairs_file() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.csv");
    fs::write(&pairs, "a,b\n0.5,0.2\n0.4,0.3\n0.6,0.1\n0.3,0.3\n0.7,0.2\n").unwrap();
    let o = bradfordize(&["stats", "--pairs", pairs.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let report = json(&dir.path().join("stats/significance.json"));
    assert_eq!(report["pairs"], 5);
    let w = &report["wilcoxon"];
    assert_eq!(w["method"], "wilcoxon_exact");
    assert_eq!(w["zeros_dropped"], 1);
    assert_eq!(w["statistic"], 10.0);
    // Four positive differences: 2 * (1 / 16).
    assert_eq!(w["p_value"], 0.125);
    assert_eq!(report["paired_t"]["method"], "paired_t");
}

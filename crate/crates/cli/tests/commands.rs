// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Cursor;
use std::path::PathBuf;

use trainer_cli::commands::{self, parse_attempt_line, run_interactive, PerfArgs};
use trainer_core::perf::VSyncPolicy;
use trainer_core::scenario::fixture::verano;
use trainer_core::{Attempt, HintConfig, Mode, SessionRecord};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

/// One command line per fixture step, performed correctly.
fn perfect_script() -> String {
    verano()
        .steps
        .iter()
        .map(|s| {
            let a = Attempt::correct_for(s);
            let mut line = format!("{} {}", a.step, a.action);
            if let Some(t) = &a.tool {
                line.push_str(&format!(" tool={t}"));
            }
            if let Some(t) = a.torque {
                line.push_str(&format!(" torque={t}"));
            }
            line + "\n"
        })
        .collect()
}

#[test]
fn validate_reports_id_and_errors() {
    let out = commands::validate(&fixture("verano-s1-s7.json"), true).unwrap();
    assert!(out.starts_with("ok: verano-s1-s7 (15 steps, disassembly)"));
    assert!(out.contains("  1. s1-disconnect-battery"));
    let err = commands::validate(&fixture("invalid/cycle-long.json"), false).unwrap_err();
    assert_eq!(err.code, 1);
    assert!(err.message.contains("cycle"), "{}", err.message);
    assert_eq!(commands::validate(&fixture("missing.json"), false).unwrap_err().code, 2);
}

#[test]
fn attempt_lines() {
    let a = parse_attempt_line("s2-set-main-wrench screw[rotate(cw,1)+press] tool=torque-wrench torque=35").unwrap();
    assert_eq!(a.tool.as_deref(), Some("torque-wrench"));
    assert_eq!(a.torque, Some(35.0));
    assert!(parse_attempt_line("x").is_err());
    assert!(parse_attempt_line("x press colour=red").is_err());
    assert!(parse_attempt_line("x wiggle").is_err());
}

#[test]
fn interactive_perfect_run() {
    let mut out = Vec::new();
    let s =
        run_interactive("t-1", verano(), Mode::Examination, HintConfig::T3, Cursor::new(perfect_script()), &mut out)
            .unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("score 100.00"), "{text}");
    assert!(!text.contains("[voice]"));
    assert_eq!(s.score_report().unwrap().score, 100.0);
}

#[test]
fn interactive_eof_abandons() {
    let mut out = Vec::new();
    let input = "help\nstatus\nnonsense\ns3-lift-engine-cover hold(500)\n";
    let s = run_interactive("t-2", verano(), Mode::Training, HintConfig::T1, Cursor::new(input), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("[voice] s1-disconnect-battery"));
    assert!(text.contains("rejected: wrong-order"));
    assert!(text.contains("? missing action"));
    assert_eq!(s.score_report().unwrap().score, 0.0);
}

#[test]
fn replay_verifies_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    let s = run_interactive("t-3", verano(), Mode::Training, HintConfig::T2, Cursor::new(perfect_script()), &mut out)
        .unwrap();
    let rec = SessionRecord::from_session(&s, None, None).unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, rec.to_canonical_string()).unwrap();
    assert!(commands::replay(&good, None).unwrap().starts_with("verified"));

    let mut bad = rec.clone();
    bad.report.score = 50.0;
    let bad_path = dir.path().join("bad.json");
    fs::write(&bad_path, bad.to_canonical_string()).unwrap();
    assert_eq!(commands::replay(&bad_path, None).unwrap_err().code, 3);
}

#[test]
fn report_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    fs::write(
        &csv,
        "student_id,group,score,q1,q2,q3,s1,s2,s3,s4,s5,s6,s7\n\
         a,VR,95,,,,1,1,0,1,1,1,1\n\
         b,VR,100,,,,1,1,1,1,1,1,1\n\
         c,Traditional,40,,,,0,1,0,1,0,0,0\n",
    )
    .unwrap();
    let text = commands::report_csv(&csv, false).unwrap();
    assert!(text.contains("VR (n=2)"));
    assert!(text.contains("Traditional (n=1)"));
    let json = commands::report_csv(&csv, true).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v[0]["stage_correctness"][2]["rate"], 50.0);
}

#[test]
fn report_from_store_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let store = trainer_core::Store::open(dir.path()).unwrap();
    for (i, group) in ["VR", "Traditional", "VR"].iter().enumerate() {
        let mut out = Vec::new();
        let s = run_interactive(
            &format!("s{i}"),
            verano(),
            Mode::Examination,
            HintConfig::NONE,
            Cursor::new(perfect_script()),
            &mut out,
        )
        .unwrap();
        let rec = SessionRecord::from_session(&s, Some(format!("st{i}")), Some(group.to_string())).unwrap();
        store.ingest_at(&rec.to_canonical_string(), i as u64).unwrap();
    }
    drop(store);
    let a = commands::report_store(dir.path(), &[], None, true).unwrap();
    let b = commands::report_store(dir.path(), &[], None, true).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v[0]["group"], "Traditional");
    assert_eq!(v[1]["size"], 2);
}

#[test]
fn perf_trace_scene_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.txt");
    fs::write(&trace, "# ms\n10\n12.5\n\n30\n").unwrap();
    let scene = dir.path().join("s.json");
    fs::write(
        &scene,
        r#"[{"id":"a","material":"m1","mobility":"static"},{"id":"b","material":"m1","mobility":"static"},{"id":"c","material":"m2","mobility":"dynamic"}]"#,
    )
    .unwrap();

    let table = commands::perf(&PerfArgs { trace: Some(&trace), refresh_hz: 90.0, ..Default::default() }).unwrap();
    assert!(table.contains("3 frames"));
    assert!(table.contains("everysecond"));

    let base = dir.path().join("base.json");
    let json = commands::perf(&PerfArgs {
        trace: Some(&trace),
        scene: Some(&scene),
        vsync: Some(VSyncPolicy::EverySecondVBlank),
        refresh_hz: 90.0,
        json: true,
        ..Default::default()
    })
    .unwrap();
    fs::write(&base, &json).unwrap();

    let cmp = commands::perf(&PerfArgs {
        trace: Some(&trace),
        scene: Some(&scene),
        vsync: Some(VSyncPolicy::DontSync),
        refresh_hz: 90.0,
        compare: Some(&base),
        ..Default::default()
    })
    .unwrap();
    assert!(cmp.contains("2 draw calls (3 with no static batching)"), "{cmp}");
    assert!(cmp.contains("Average frame time (ms)"));
    assert!(commands::perf(&PerfArgs { refresh_hz: 90.0, ..Default::default() }).is_err());
}

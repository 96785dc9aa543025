use std::collections::HashSet;
use std::sync::{Arc, Barrier};

use serde_json::{json, Value};
use storypref_annotate::{spawn, Queue, RunningServer, Service};
use storypref_core::construct::{route_candidate_set, RoutedSet};
use storypref_core::dimcat::DEFAULT_PRIORITY;
use storypref_core::judgekit::JudgeRow;
use storypref_core::{CandidateSet, DimensionScores, Language, Premise, ScoreMatrix, Source, StoryRecord};

fn routed(id: &str, agree: bool) -> RoutedSet {
    let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| format!("{id}-{s}")).collect();
    let stories = ids
        .iter()
        .map(|sid| StoryRecord::new(sid, format!("text of {sid}"), Source::model("g"), Language::En))
        .collect();
    let set = CandidateSet::new(Premise::new(id, "A premise."), stories).unwrap();
    let second = if agree { [8.0, 6.0, 4.0, 2.0] } else { [2.0, 4.0, 6.0, 8.0] };
    let rows = [[9.0, 7.0, 5.0, 3.0], second]
        .iter()
        .enumerate()
        .map(|(j, o)| JudgeRow {
            judge: format!("j{j}"),
            scores: o.iter().map(|&v| DimensionScores::new([v; 5], v).unwrap()).collect(),
        })
        .collect();
    route_candidate_set(set, ScoreMatrix::new(id, ids, rows).unwrap(), 0.6).unwrap()
}

fn server(sets: Vec<RoutedSet>) -> RunningServer {
    let queue = Queue::new(sets, 50, 42).unwrap();
    spawn(Service::new(queue, 0.5, DEFAULT_PRIORITY), "127.0.0.1:0".parse().unwrap()).unwrap()
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn next(s: &RunningServer, who: &str) -> Option<Value> {
    let mut r = agent().get(&s.url(&format!("/api/task/next?annotator={who}"))).call().unwrap();
    match r.status().as_u16() {
        204 => None,
        200 => Some(r.body_mut().read_json().unwrap()),
        other => panic!("unexpected status {other}"),
    }
}

fn submit(s: &RunningServer, task: &str, who: &str, outcome: Value) -> (u16, Value) {
    let mut r = agent()
        .post(&s.url(&format!("/api/task/{task}/submit")))
        .send_json(json!({"annotator_id": who, "outcome": outcome}))
        .unwrap();
    (r.status().as_u16(), r.body_mut().read_json().unwrap())
}

#[test]
fn concurrent_next_task_assigns_once() {
    let s = Arc::new(server(vec![routed("only", true)]));
    let barrier = Arc::new(Barrier::new(10));
    let handles: Vec<_> = (0..10)
        .map(|i| {
            let (s, b) = (s.clone(), barrier.clone());
            std::thread::spawn(move || {
                b.wait();
                next(&s, &format!("ann{i}")).map(|t| t["task_id"].as_str().unwrap().to_string())
            })
        })
        .collect();
    let got: Vec<_> = handles.into_iter().filter_map(|h| h.join().unwrap()).collect();
    assert_eq!(got, vec!["only".to_string()]);
}

#[test]
fn endpoints_round_trip() {
    let s = server(vec![routed("v", true), routed("f", false)]);
    let p: Value = agent().get(&s.url("/api/progress")).call().unwrap().body_mut().read_json().unwrap();
    assert_eq!(p["pending"], 2);

    let v = next(&s, "x").unwrap();
    assert_eq!(v["mode"], "verification");
    assert_eq!(v["proposed_ranking"].as_array().unwrap().len(), 4);
    assert!(v["stories"][0].get("source").is_none());
    let (code, _) = submit(&s, "v", "intruder", json!({"kind": "confirmed"}));
    assert_eq!(code, 403);
    let (code, ack) = submit(&s, "v", "x", json!({"kind": "unsure"}));
    assert_eq!((code, ack["status"].as_str().unwrap()), (200, "dropped"));
    let (code, _) = submit(&s, "v", "x", json!({"kind": "confirmed"}));
    assert_eq!(code, 409);

    let f = next(&s, "x").unwrap();
    assert_eq!(f["mode"], "full_ranking");
    let (code, _) = submit(&s, "f", "x", json!({"kind": "ranking", "ranking": ["s1", "s2"]}));
    assert_eq!(code, 422);
    let labels: Vec<Value> = f["stories"].as_array().unwrap().iter().map(|st| st["label"].clone()).collect();
    let (code, _) = submit(&s, "f", "x", json!({"kind": "ranking", "ranking": labels}));
    assert_eq!(code, 200);
    assert!(next(&s, "x").is_none());

    let bench: Vec<Value> = agent().get(&s.url("/api/export/benchmark")).call().unwrap().body_mut().read_json().unwrap();
    assert_eq!(bench.len(), 1);
    assert_eq!(bench[0]["premise_id"], "f");
    let missing = agent().get(&s.url("/api/task/next")).call().unwrap();
    assert_eq!(missing.status().as_u16(), 400);
}

#[test]
fn qc_flags_over_http() {
    let s = server((0..101).map(|i| routed(&format!("t{i:03}"), true)).collect());
    let flags = || -> Vec<Value> { agent().get(&s.url("/api/qc/flags")).call().unwrap().body_mut().read_json().unwrap() };
    let mut windows = HashSet::new();
    for k in 1..=101 {
        let t = next(&s, "x").unwrap();
        submit(&s, t["task_id"].as_str().unwrap(), "x", json!({"kind": "confirmed"}));
        if k == 49 || k == 50 || k == 100 || k == 101 {
            let f = flags();
            assert_eq!(f.len(), k / 50);
            windows.extend(f.iter().map(|x| x["window"].as_u64().unwrap()));
        }
    }
    assert_eq!(windows, HashSet::from([0, 1]));
}

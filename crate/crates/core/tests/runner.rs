mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::{chat_reply, prompt_of, StubServer};
use impression_eval::corpus::Report;
use impression_eval::runner::{generate_candidates, EndpointConfig, Outcome};

fn reports(n: usize) -> Vec<Report> {
    (0..n)
        .map(|i| Report {
            id: format!("R{i:03}"),
            patient_id: format!("P{i}"),
            tracer: "FDG".into(),
            findings: format!("findings number {i}"),
            impression: "x".into(),
            split: impression_eval::corpus::Split::Test,
        })
        .collect()
}

fn config(server: &StubServer) -> EndpointConfig {
    let mut cfg = EndpointConfig::new("stub-model", &server.base_url);
    cfg.backoff_ms = 1;
    cfg.timeout = 10.0;
    cfg
}

fn impressions(outcomes: &[Outcome]) -> Vec<String> {
    outcomes
        .iter()
        .map(|o| match o {
            Outcome::Generated(c) => c.impression.clone(),
            Outcome::Failed(f) => panic!("unexpected failure: {f:?}"),
        })
        .collect()
}

#[test]
fn fixed_reply_is_returned_for_every_report() {
    let server = StubServer::start(Arc::new(|_, _| (200, chat_reply("1. 肺癌"))));
    let data = reports(3);
    let refs: Vec<&Report> = data.iter().collect();
    let cache = tempfile::tempdir().unwrap();
    let out = generate_candidates(
        &refs,
        &config(&server),
        "Summarize: {findings}",
        cache.path(),
    )
    .unwrap();
    assert_eq!(impressions(&out), vec!["1. 肺癌"; 3]);
    assert_eq!(server.calls(), 3);
}

#[test]
fn transient_failures_are_retried() {
    let server = StubServer::start(Arc::new(|i, _| {
        if i < 2 {
            (500, "{}".into())
        } else {
            (200, chat_reply("ok"))
        }
    }));
    let data = reports(1);
    let refs: Vec<&Report> = data.iter().collect();
    let mut cfg = config(&server);
    cfg.max_retries = 3;
    let cache = tempfile::tempdir().unwrap();
    let out = generate_candidates(&refs, &cfg, "{findings}", cache.path()).unwrap();
    match &out[0] {
        Outcome::Generated(c) => {
            assert_eq!(c.impression, "ok");
            assert_eq!(c.retries, 2);
            assert!(!c.cached);
        }
        Outcome::Failed(f) => panic!("{f:?}"),
    }
    assert_eq!(server.calls(), 3);
}

#[test]
fn exhausted_retries_become_a_failure_record() {
    let server = StubServer::start(Arc::new(|_, _| (503, "{}".into())));
    let data = reports(2);
    let refs: Vec<&Report> = data.iter().collect();
    let mut cfg = config(&server);
    cfg.max_retries = 1;
    let cache = tempfile::tempdir().unwrap();
    let out = generate_candidates(&refs, &cfg, "{findings}", cache.path()).unwrap();
    for o in &out {
        match o {
            Outcome::Failed(f) => assert_eq!(f.attempts, 2),
            Outcome::Generated(c) => panic!("{c:?}"),
        }
    }
    assert_eq!(server.calls(), 4);
}

#[test]
fn malformed_response_is_a_failure_not_a_crash() {
    let server = StubServer::start(Arc::new(|_, _| (200, "{\"choices\": []}".into())));
    let data = reports(1);
    let refs: Vec<&Report> = data.iter().collect();
    let cache = tempfile::tempdir().unwrap();
    let out = generate_candidates(&refs, &config(&server), "{findings}", cache.path()).unwrap();
    assert!(matches!(&out[0], Outcome::Failed(_)));
    // nothing is cached for an unusable response
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 0);
}

#[test]
fn second_pass_is_served_from_cache() {
    let server = StubServer::start(Arc::new(|_, body| {
        (200, chat_reply(&format!("re: {}", prompt_of(body))))
    }));
    let data = reports(5);
    let refs: Vec<&Report> = data.iter().collect();
    let mut cfg = config(&server);
    cfg.parallelism = 3;
    let cache = tempfile::tempdir().unwrap();
    let first = generate_candidates(&refs, &cfg, "S: {findings}", cache.path()).unwrap();
    let calls = server.calls();
    assert_eq!(calls, 5);
    let second = generate_candidates(&refs, &cfg, "S: {findings}", cache.path()).unwrap();
    assert_eq!(server.calls(), calls);
    assert_eq!(impressions(&first), impressions(&second));
    assert!(second
        .iter()
        .all(|o| matches!(o, Outcome::Generated(c) if c.cached)));
}

#[test]
fn outcomes_follow_input_order() {
    let seen = Arc::new(AtomicUsize::new(0));
    let counter = seen.clone();
    let server = StubServer::start(Arc::new(move |_, body| {
        counter.fetch_add(1, Ordering::SeqCst);
        (200, chat_reply(&prompt_of(body)))
    }));
    let data = reports(8);
    let refs: Vec<&Report> = data.iter().collect();
    for parallelism in [1, 4] {
        let mut cfg = config(&server);
        cfg.parallelism = parallelism;
        let cache = tempfile::tempdir().unwrap();
        let out = generate_candidates(&refs, &cfg, "{findings}", cache.path()).unwrap();
        let expected: Vec<String> = data.iter().map(|r| r.findings.clone()).collect();
        assert_eq!(impressions(&out), expected);
    }
    assert_eq!(seen.load(Ordering::SeqCst), 16);
}

#[test]
fn api_key_comes_from_the_environment() {
    let server = StubServer::start(Arc::new(|_, _| (200, chat_reply("x"))));
    let data = reports(1);
    let refs: Vec<&Report> = data.iter().collect();
    let mut cfg = config(&server);
    cfg.api_key_env = Some("IMPEVAL_TEST_KEY_THAT_IS_NOT_SET".into());
    let cache = tempfile::tempdir().unwrap();
    let err = generate_candidates(&refs, &cfg, "{findings}", cache.path()).unwrap_err();
    assert!(err.to_string().contains("IMPEVAL_TEST_KEY_THAT_IS_NOT_SET"));
}

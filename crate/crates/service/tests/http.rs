use std::collections::{BTreeMap, BTreeSet};

use ifa_core::attribution;
use ifa_core::augmentation::Correction;
use ifa_core::config::ExperimentConfig;
use ifa_core::engine::{MetricEntry, StrategyKind};
use ifa_core::experiment::Experiment;
use ifa_service::{AppState, Created, ErrorBody, MetricsView, QueryView, RunningService};
use serde_json::{json, Value};

fn config(kind: &str, model: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!(
        r#"
[experiment]
name = "svc"
strategies = ["baseline"]
query_size = 3
iterations = 5
n_shuffles = 2

[dataset]
kind = "{kind}"
n_train = 40
n_test = 20
features = 3

[model]
kind = "{model}"
"#
    ))
    .unwrap()
}

fn linear() -> Experiment {
    Experiment::new(config("linear", "linear_regression")).unwrap()
}

fn logistic() -> Experiment {
    Experiment::new(config("logistic", "logistic_regression")).unwrap()
}

struct Client {
    agent: ureq::Agent,
    svc: RunningService,
}

impl Client {
    fn start(exp: Experiment, log_dir: Option<std::path::PathBuf>) -> Self {
        let svc = ifa_service::spawn(AppState::new(exp, log_dir), "127.0.0.1:0").unwrap();
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent, svc }
    }

    fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.get(&self.svc.url(path)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }

    fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let mut r = self.agent.post(&self.svc.url(path)).send_json(body).unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap())
    }

    fn create(&self, body: Value) -> String {
        let (status, v) = self.post("/sessions", &body);
        assert_eq!(status, 200, "{v}");
        serde_json::from_value::<Created>(v).unwrap().id
    }

    fn query(&self, id: &str) -> QueryView {
        let (status, v) = self.get(&format!("/sessions/{id}/query"));
        assert_eq!(status, 200, "{v}");
        serde_json::from_value(v).unwrap()
    }

    fn correct(&self, id: &str, sample_id: usize, correction: &Correction) -> (u16, Value) {
        self.post(
            &format!("/sessions/{id}/corrections"),
            &json!({ "sample_id": sample_id, "correction": correction }),
        )
    }

    fn retrain(&self, id: &str, skip: &[usize]) -> (u16, Value) {
        self.post(&format!("/sessions/{id}/retrain"), &json!({ "skip": skip }))
    }

    fn metrics(&self, id: &str) -> MetricsView {
        let (status, v) = self.get(&format!("/sessions/{id}/metrics"));
        assert_eq!(status, 200, "{v}");
        serde_json::from_value(v).unwrap()
    }
}

#[test]
fn health_and_unknown_ids() {
    let c = Client::start(linear(), None);
    assert_eq!(c.get("/health"), (200, json!({"status": "ok"})));
    let (status, body) = c.get("/sessions/nope/query");
    assert_eq!(status, 404);
    assert_eq!(serde_json::from_value::<ErrorBody>(body).unwrap().error, "not_found");
    assert_eq!(c.get("/sessions/nope/metrics").0, 404);
    assert_eq!(c.retrain("nope", &[]).0, 404);
}

#[test]
fn create_query_and_metrics() {
    let c = Client::start(linear(), None);
    let a = c.create(json!({"strategy": "interactive_occlusion"}));
    let b = c.create(json!({"strategy": "interactive_occlusion"}));
    assert_ne!(a, b);
    let q = c.query(&a);
    assert_eq!(q.pending.len(), 3);
    assert_eq!(q.iteration, 0);
    let m = c.metrics(&a);
    assert_eq!(m.history.len(), 1);
    assert_eq!(m.history[0].cumulative_samples, 0);

    let bad = c.post("/sessions", &json!({"strategy": "lime"}));
    assert_eq!(bad.0, 400);
    let out_of_range = c.post("/sessions", &json!({"strategy": "baseline", "shuffle_index": 5}));
    assert_eq!(out_of_range.0, 400);
}

#[test]
fn displayed_attributions_match_the_attribution_module() {
    let exp = linear();
    let sc = exp.scenario(0, 0).unwrap();
    let c = Client::start(exp, None);
    let id = c.create(json!({"strategy": "interactive_shap"}));
    // one full correction round so the model is nonzero
    for s in c.query(&id).pending {
        let ack = c.correct(&id, s.sample_id, &Correction::label_only(sc.oracle_pool.targets()[s.sample_id]));
        assert_eq!(ack.0, 200);
    }
    let (status, _) = c.retrain(&id, &[]);
    assert_eq!(status, 200);

    // refit locally on the same history to compare
    let q = c.query(&id);
    assert_eq!(q.method, ifa_core::expert::AttributionMethod::Shap);
    let engine_state = {
        let mut s = ifa_core::engine::LoopState::start(
            StrategyKind::InteractiveShap,
            3,
            None,
            sc.background.clone(),
            ifa_core::models::ModelSpec::default_for(ifa_core::models::ModelKind::LinearRegression),
            sc.seed,
            sc.oracle_pool.clone(),
            sc.oracle_test.clone(),
        )
        .unwrap();
        let query = s.draw_query().unwrap();
        let contributions = query
            .iter()
            .enumerate()
            .map(|(slot, &i)| s.contribution(i, slot, &Correction::label_only(sc.oracle_pool.targets()[i])).unwrap())
            .collect();
        s.commit(contributions).unwrap();
        s
    };
    for p in &q.pending {
        let expected = attribution::shap_exact(engine_state.model(), &p.features, &sc.background).unwrap();
        assert_eq!(p.attribution, expected);
    }
}

#[test]
fn classification_occlusion_is_hard_and_validated() {
    let c = Client::start(logistic(), None);
    let id = c.create(json!({"strategy": "interactive_occlusion"}));
    let q = c.query(&id);
    for p in &q.pending {
        assert!(p.attribution.values.iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
    }
    let s = q.pending[0].sample_id;
    let half = Correction::with_attributions(1.0, BTreeMap::from([(0, 0.5)]));
    assert_eq!(c.correct(&id, s, &half).0, 400);
    let bad_label = Correction::label_only(0.3);
    assert_eq!(c.correct(&id, s, &bad_label).0, 400);
    let ok = Correction::with_attributions(1.0, BTreeMap::from([(0, 1.0)]));
    assert_eq!(c.correct(&id, s, &ok).0, 200);
    assert_eq!(c.correct(&id, s, &ok).0, 409);
    assert_eq!(c.correct(&id, 10_000, &ok).0, 404);
}

#[test]
fn retrain_protocol() {
    let c = Client::start(linear(), None);
    let id = c.create(json!({"strategy": "interactive_occlusion"}));
    let q = c.query(&id);
    assert_eq!(c.retrain(&id, &[]).0, 409);

    // an empty correction confirms the recorded label
    let ack = c.correct(&id, q.pending[0].sample_id, &Correction::default());
    assert_eq!(ack.0, 200);
    assert_eq!(ack.1["n_samples"], json!(1 + 2 * 3));
    assert_eq!(c.query(&id).pending.len(), 2);
    // second sample corrected, third skipped
    c.correct(&id, q.pending[1].sample_id, &Correction::default());
    assert_eq!(c.retrain(&id, &[123_456]).0, 404);
    let (status, v) = c.retrain(&id, &[q.pending[2].sample_id]);
    assert_eq!(status, 200, "{v}");
    let entry: MetricEntry = serde_json::from_value(v).unwrap();
    assert_eq!(entry.iteration, 1);
    assert_eq!(entry.cumulative_samples, 2 * 7);

    // the new query has nothing corrected yet
    assert_eq!(c.retrain(&id, &[]).0, 409);
    let m = c.metrics(&id);
    assert_eq!(m.history.len(), 2);
    assert!(m.history.windows(2).all(|w| w[0].iteration < w[1].iteration));
}

#[test]
fn unlabelled_samples_block_retrain() {
    let c = Client::start(linear(), None);
    let id = c.create(json!({"strategy": "baseline", "labels_known": false}));
    let q = c.query(&id);
    for p in &q.pending {
        let (status, v) = c.correct(&id, p.sample_id, &Correction::default());
        assert_eq!(status, 200);
        assert_eq!(v["status"], json!("awaiting_label"));
    }
    assert_eq!(c.query(&id).pending.len(), 3);
    assert_eq!(c.retrain(&id, &[]).0, 409);
    // a label completes the first; the others are skipped
    assert_eq!(c.correct(&id, q.pending[0].sample_id, &Correction::label_only(2.0)).0, 200);
    let skip: Vec<usize> = q.pending[1..].iter().map(|p| p.sample_id).collect();
    let (status, v) = c.retrain(&id, &skip);
    assert_eq!(status, 200, "{v}");
    assert_eq!(v["cumulative_samples"], json!(7));
}

#[test]
fn sessions_are_isolated() {
    let c = Client::start(linear(), None);
    let a = c.create(json!({"strategy": "baseline"}));
    let b = c.create(json!({"strategy": "baseline"}));
    let before = c.query(&b);
    for p in c.query(&a).pending {
        c.correct(&a, p.sample_id, &Correction::default());
    }
    assert_eq!(c.retrain(&a, &[]).0, 200);
    assert_eq!(c.query(&b), before);
    assert_eq!(c.metrics(&b).history.len(), 1);
}

#[test]
fn concurrent_submissions_keep_counts_consistent() {
    let mut cfg = config("linear", "linear_regression");
    cfg.experiment.query_size = 12;
    let c = Client::start(Experiment::new(cfg).unwrap(), None);
    let id = c.create(json!({"strategy": "interactive_occlusion"}));
    let q = c.query(&id);
    // every sample submitted twice from racing threads: exactly one wins
    let statuses: Vec<u16> = std::thread::scope(|s| {
        let handles: Vec<_> = q
            .pending
            .iter()
            .flat_map(|p| [p.sample_id, p.sample_id])
            .map(|sid| {
                let c = &c;
                let id = &id;
                s.spawn(move || c.correct(id, sid, &Correction::default()).0)
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(statuses.iter().filter(|&&s| s == 200).count(), 12);
    assert_eq!(statuses.iter().filter(|&&s| s == 409).count(), 12);
    let (status, v) = c.retrain(&id, &[]);
    assert_eq!(status, 200);
    assert_eq!(v["cumulative_samples"], json!(12 * 7));
}

#[test]
fn event_log_replays_to_the_same_session() {
    let dir = tempfile::tempdir().unwrap();
    let exp = linear();
    let c = Client::start(exp.clone(), Some(dir.path().to_path_buf()));
    let id = c.create(json!({"strategy": "interactive_occlusion", "shuffle_index": 1}));
    for _ in 0..2 {
        let q = c.query(&id);
        for p in &q.pending[..2] {
            let corr = Correction::with_attributions(1.0, BTreeMap::from([(1, 0.25)]));
            assert_eq!(c.correct(&id, p.sample_id, &corr).0, 200);
        }
        assert_eq!(c.retrain(&id, &[q.pending[2].sample_id]).0, 200);
    }
    let live_metrics = c.metrics(&id);
    let live_query = c.query(&id);
    c.svc.stop().unwrap();

    let log = dir.path().join(format!("{id}.jsonl"));
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    let replayed = ifa_service::log::replay(&log, &exp).unwrap();
    assert_eq!(replayed.metrics(), live_metrics);
    assert_eq!(replayed.query(), live_query);
}

#[test]
fn skip_set_must_name_pending_samples() {
    let c = Client::start(linear(), None);
    let id = c.create(json!({"strategy": "baseline"}));
    let all: BTreeSet<usize> = c.query(&id).pending.iter().map(|p| p.sample_id).collect();
    let skip: Vec<usize> = all.into_iter().collect();
    let (status, v) = c.retrain(&id, &skip);
    assert_eq!(status, 200, "{v}");
    // skipping everything retrains on unchanged data
    assert_eq!(v["cumulative_samples"], json!(0));
}

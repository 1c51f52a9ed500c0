use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ontocohort::cohort::synth::{generate_synthetic, SynthConfig, SynthManifest};
use ontocohort::cohort::{load_data_dir, load_dataset, DataDir};
use ontocohort::{
    augment, build_graph, filter, phenotype_distribution, AugmentSpec, ConceptCode, FilterSpec,
    Origin, DEFAULT_SMOOTHING,
};
use ontocohort_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(AppState::new(), &ServiceConfig::default())
}

async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value, bytes)
}

fn tiny_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn tiny_load() -> Value {
    let d = tiny_dir();
    json!({
        "ontology_path": d.join("tiny.edges"),
        "visits_path": d.join("tiny.visits.jsonl"),
        "vocabulary_path": d.join("tiny.vocabulary.txt"),
    })
}

fn dir_load(dir: &Path) -> Value {
    json!({
        "ontology_path": dir.join("ontology.csv"),
        "visits_path": dir.join("visits.jsonl"),
        "vocabulary_path": dir.join("vocabulary.txt"),
        "labels_path": dir.join("labels.csv"),
    })
}

struct Generated {
    dir: tempfile::TempDir,
    manifest: SynthManifest,
    data: DataDir,
}

fn generated(nodes: usize, visits: usize, seed: u64) -> Generated {
    let synth = generate_synthetic(&SynthConfig::new(nodes, visits), seed).unwrap();
    let dir = tempfile::tempdir().unwrap();
    synth.write_to(dir.path()).unwrap();
    let data = load_data_dir(dir.path()).unwrap();
    Generated {
        dir,
        manifest: synth.manifest,
        data,
    }
}

fn locality() -> &'static Generated {
    static G: OnceLock<Generated> = OnceLock::new();
    G.get_or_init(|| generated(200, 5000, 1))
}

fn full_scale() -> &'static Generated {
    static G: OnceLock<Generated> = OnceLock::new();
    G.get_or_init(|| generated(9118, 41780, 2017))
}

fn locality_filter() -> Value {
    let m = &locality().manifest;
    json!({
        "codes": m.seed_codes,
        "phenotypes": m.signal_phenotypes,
        "min_visits": 0,
        "min_phenotype_count": 0,
    })
}

fn node_codes(payload: &Value) -> BTreeSet<String> {
    payload["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n["code"].as_str().unwrap().to_owned())
        .collect()
}

fn styles(payload: &Value) -> BTreeMap<String, String> {
    payload["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| {
            (
                n["code"].as_str().unwrap().to_owned(),
                n["border_style"].as_str().unwrap().to_owned(),
            )
        })
        .collect()
}

#[tokio::test]
async fn load_reports_graph_counts() {
    let app = app();
    let (status, body, _) = call(&app, "POST", "/session/load", Some(tiny_load())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let d = tiny_dir();
    let edges = ontocohort::cohort::load_edges(&d.join("tiny.edges")).unwrap();
    let dataset =
        load_dataset(&d.join("tiny.visits.jsonl"), &d.join("tiny.vocabulary.txt")).unwrap();
    let (graph, _) = build_graph(&edges, &dataset).unwrap();
    assert_eq!(body["node_count"], graph.len());
    assert_eq!(body["edge_count"], graph.edge_count());
    assert_eq!(body["visit_count"], 10);
    assert_eq!(body["stage"], "loaded");
    assert!(body["session_id"].is_null());
    let (status, again, _) = call(&app, "GET", "/session", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, body);
}

#[tokio::test]
async fn missing_file_is_a_400_io_error() {
    let app = app();
    let mut req = tiny_load();
    req["visits_path"] = json!("/nonexistent/visits.jsonl");
    let (status, body, _) = call(&app, "POST", "/session/load", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "IoError");
    assert!(body["message"].as_str().unwrap().contains("visits.jsonl"));
}

#[tokio::test]
async fn malformed_body_is_a_json_400() {
    let app = app();
    let (status, body, _) = call(&app, "POST", "/session/load", Some(json!({"nope": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "InvalidRequest");
}

#[tokio::test]
async fn full_scale_counts_echo_the_generator_manifest() {
    let g = full_scale();
    let app = app();
    let (status, body, _) = call(&app, "POST", "/session/load", Some(dir_load(g.dir.path()))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let nodes = body["node_count"].as_u64().unwrap() + body["pruned_codes"].as_u64().unwrap();
    assert_eq!(nodes as usize, g.manifest.node_count);
    assert_eq!(body["visit_count"], g.manifest.visit_count);
}

#[tokio::test]
async fn state_errors_are_409() {
    let app = app();
    let filter = json!({"codes": ["A"]});
    let (status, body, _) = call(&app, "POST", "/filter", Some(filter.clone())).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("NoSession"))
    );
    let (status, _, _) = call(&app, "GET", "/session", None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    call(&app, "POST", "/session/load", Some(tiny_load())).await;
    let aug = json!({"hops": 1, "kl_threshold": 1.0, "sampling_rate": 1.0, "rng_seed": 0});
    let (status, body, _) = call(&app, "POST", "/augment", Some(aug)).await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("NoFilter"))
    );
    let (status, body, _) = call(
        &app,
        "POST",
        "/save",
        Some(json!({"path": "/tmp/never.jsonl"})),
    )
    .await;
    assert_eq!(
        (status, body["code"].as_str()),
        (StatusCode::CONFLICT, Some("NothingToSave"))
    );
    let (status, _, _) = call(&app, "GET", "/nodes/A", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn unknown_seed_is_404() {
    let app = app();
    call(&app, "POST", "/session/load", Some(tiny_load())).await;
    let (status, body, _) = call(&app, "POST", "/filter", Some(json!({"codes": ["ZZZ"]}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "UnknownSeedCode");
    assert_eq!(body["detail"], "ZZZ");
}

#[tokio::test]
async fn filter_payload_matches_the_filter_module_and_is_idempotent() {
    let app = app();
    call(&app, "POST", "/session/load", Some(tiny_load())).await;
    // Whole vocabulary, zero thresholds.
    let req = json!({"codes": ["A"], "min_visits": 0, "min_phenotype_count": 0});
    let (status, first, first_bytes) = call(&app, "POST", "/filter", Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    let (_, _, second_bytes) = call(&app, "POST", "/filter", Some(req)).await;
    assert_eq!(first_bytes, second_bytes);

    // R carries only a phenotype-free visit, so it neither qualifies nor
    // descends from a qualifying node; the seed component is A's subtree.
    assert_eq!(
        node_codes(&first),
        ["A", "A1", "A2"].map(String::from).into()
    );
    assert!(styles(&first).values().all(|s| s == "default"));
    assert_eq!(first["stage"], "filtered");
    assert_eq!(first["edges"].as_array().unwrap().len(), 2);
    // V01 V02 V03 V06 V08 V09 hang off A, A1 and A2.
    assert_eq!(first["cohort_size"], 6);
    let depth: BTreeMap<String, u64> = first["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| {
            (
                n["code"].as_str().unwrap().to_owned(),
                n["depth"].as_u64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        depth,
        BTreeMap::from([("A".into(), 1), ("A1".into(), 2), ("A2".into(), 2)])
    );
}

/// Independent partition from raw edges and visits: retained codes are
/// visit codes plus their ancestors, then strict thresholds, downward BFS
/// and undirected BFS from the seeds.
fn filter_oracle(
    data: &DataDir,
    seeds: &BTreeSet<String>,
    interest: &BTreeSet<String>,
    eta: u64,
    gamma: u64,
) -> BTreeSet<String> {
    let mut up: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut down: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (p, c) in &data.edges {
        up.entry(c.as_str()).or_default().push(p.as_str());
        down.entry(p.as_str()).or_default().push(c.as_str());
    }
    let mut visits: BTreeMap<&str, u64> = BTreeMap::new();
    let mut hits: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for v in data.dataset.visits() {
        for c in &v.codes {
            *visits.entry(c.as_str()).or_default() += 1;
            for p in &v.phenotypes {
                *hits.entry((c.as_str(), p.as_str())).or_default() += 1;
            }
        }
    }
    let mut retained: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = visits.keys().copied().collect();
    while let Some(u) = queue.pop_front() {
        if retained.insert(u) {
            queue.extend(up.get(u).into_iter().flatten());
        }
    }
    let qualifying: BTreeSet<&str> = retained
        .iter()
        .copied()
        .filter(|n| {
            visits.get(n).copied().unwrap_or(0) > eta
                && interest
                    .iter()
                    .any(|p| hits.get(&(*n, p.as_str())).copied().unwrap_or(0) > gamma)
        })
        .collect();
    let mut candidates: BTreeSet<&str> = qualifying.clone();
    let mut queue: VecDeque<&str> = qualifying.iter().copied().collect();
    while let Some(u) = queue.pop_front() {
        for &v in down.get(u).into_iter().flatten() {
            if retained.contains(v) && candidates.insert(v) {
                queue.push_back(v);
            }
        }
    }
    candidates.extend(seeds.iter().map(String::as_str));
    let mut kept: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = seeds.iter().map(String::as_str).collect();
    while let Some(u) = queue.pop_front() {
        if !kept.insert(u) {
            continue;
        }
        for &v in up
            .get(u)
            .into_iter()
            .flatten()
            .chain(down.get(u).into_iter().flatten())
        {
            if candidates.contains(v) && !kept.contains(v) {
                queue.push_back(v);
            }
        }
    }
    kept.into_iter().map(str::to_owned).collect()
}

#[tokio::test]
async fn thresholds_100_200_match_an_independent_partition() {
    let g = full_scale();
    let app = app();
    call(&app, "POST", "/session/load", Some(dir_load(g.dir.path()))).await;
    let seeds: BTreeSet<String> = g
        .manifest
        .seed_codes
        .iter()
        .map(|c| c.to_string())
        .collect();
    let interest = g.manifest.signal_phenotypes.clone();
    let req = json!({
        "codes": seeds,
        "phenotypes": interest,
        "min_visits": 100,
        "min_phenotype_count": 200,
    });
    let (status, body, _) = call(&app, "POST", "/filter", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    // Uniform visit attachment keeps every synthetic node far below 100
    // visits, so only the seeds and their mutual links survive here.
    let expected = filter_oracle(&g.data, &seeds, &interest, 100, 200);
    assert_eq!(node_codes(&body), expected);
}

/// Twelve nodes in three components; (visits, visits carrying p1) per node.
fn heavy_fixture(dir: &Path) -> DataDir {
    let edges = [
        ("A", "B"),
        ("A", "C"),
        ("B", "D"),
        ("C", "E"),
        ("C", "F"),
        ("F", "G"),
        ("H", "I"),
        ("I", "J"),
        ("K", "L"),
    ];
    let plan = [
        ("A", 350, 250),
        ("B", 90, 90),
        ("C", 120, 3),
        ("D", 40, 40),
        ("E", 400, 300),
        ("F", 250, 201),
        ("G", 100, 100),
        ("H", 300, 0),
        ("I", 210, 205),
        ("J", 5, 5),
        ("K", 500, 500),
        ("L", 20, 0),
    ];
    let mut visits = Vec::new();
    for (node, total, with_p1) in plan {
        for k in 0..total {
            let ph: &[&str] = if k < with_p1 { &["p1"] } else { &["p2"] };
            visits.push(ontocohort::VisitRecord {
                visit_id: ontocohort::VisitId::new(format!("{node}{k:04}")),
                patient_id: format!("P{node}{k}"),
                codes: [ConceptCode::new(node)].into(),
                phenotypes: ph.iter().map(|p| p.to_string()).collect(),
                features: vec![0.0],
                labels: BTreeMap::new(),
                duration_hours: 72.0,
            });
        }
    }
    let vocabulary = ontocohort::PhenotypeVocabulary::new(["p1", "p2"]).unwrap();
    let dataset = ontocohort::VisitDataset::new(vocabulary, visits).unwrap();
    let edges: Vec<(ConceptCode, ConceptCode)> = edges
        .iter()
        .map(|&(a, b)| (ConceptCode::new(a), ConceptCode::new(b)))
        .collect();
    ontocohort::cohort::write_edges(&dir.join("ontology.csv"), &edges).unwrap();
    ontocohort::cohort::write_visits(&dir.join("visits.jsonl"), dataset.visits()).unwrap();
    ontocohort::cohort::write_vocabulary(&dir.join("vocabulary.txt"), dataset.vocabulary())
        .unwrap();
    DataDir {
        edges,
        labels: BTreeMap::new(),
        dataset,
    }
}

#[tokio::test]
async fn thresholds_100_200_on_heavy_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let data = heavy_fixture(dir.path());
    let app = app();
    let load = json!({
        "ontology_path": dir.path().join("ontology.csv"),
        "visits_path": dir.path().join("visits.jsonl"),
        "vocabulary_path": dir.path().join("vocabulary.txt"),
    });
    let (status, _, _) = call(&app, "POST", "/session/load", Some(load)).await;
    assert_eq!(status, StatusCode::OK);
    let req = json!({"codes": ["B"], "phenotypes": ["p1"], "min_visits": 100, "min_phenotype_count": 200});
    let (status, body, _) = call(&app, "POST", "/filter", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let seeds: BTreeSet<String> = ["B".to_owned()].into();
    let interest: BTreeSet<String> = ["p1".to_owned()].into();
    let expected = filter_oracle(&data, &seeds, &interest, 100, 200);
    assert_eq!(node_codes(&body), expected);
    // A, E and F clear both thresholds; B, C, D, G descend from A or F.
    // I and K qualify too but share no component with B.
    assert_eq!(
        expected,
        ["A", "B", "C", "D", "E", "F", "G"].map(String::from).into()
    );
}

#[tokio::test]
async fn node_detail_distribution_and_self_kl() {
    let app = app();
    call(&app, "POST", "/session/load", Some(tiny_load())).await;
    call(&app, "POST", "/filter", Some(json!({"codes": ["A", "A2"]}))).await;

    let (status, a2, _) = call(&app, "GET", "/nodes/A2", None).await;
    assert_eq!(status, StatusCode::OK, "{a2}");
    // V02 {p1,p2}, V03 {p2}, V09 {p1,p3}.
    let probs: Vec<f64> = serde_json::from_value(a2["phenotype_dist"]["probs"].clone()).unwrap();
    assert_eq!(probs, vec![0.4, 0.4, 0.2]);
    let dataset = load_dataset(
        &tiny_dir().join("tiny.visits.jsonl"),
        &tiny_dir().join("tiny.vocabulary.txt"),
    )
    .unwrap();
    let ids = ["V02", "V03", "V09"].map(ontocohort::VisitId::new);
    let oracle = phenotype_distribution(dataset.select(&ids), dataset.vocabulary());
    assert_eq!(probs, oracle.probs);
    assert_eq!(a2["kl_to_selected"]["A2"], 0.0);
    assert!(a2["kl_to_selected"]["A"].as_f64().unwrap() > 0.0);
    assert_eq!(a2["visit_count"], 3);

    let (status, body, _) = call(&app, "GET", "/nodes/B1", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "UnknownNode");
}

fn narrow_growth(seed: u64) -> Value {
    json!({"hops": 1, "kl_threshold": 0.3, "sampling_rate": 0.2, "rng_seed": seed})
}

#[tokio::test]
async fn augment_payload_styles_and_determinism() {
    let g = locality();
    let app = app();
    call(&app, "POST", "/session/load", Some(dir_load(g.dir.path()))).await;
    call(&app, "POST", "/filter", Some(locality_filter())).await;

    let zero = json!({"hops": 2, "kl_threshold": 1.0, "sampling_rate": 0.0, "rng_seed": 3});
    let (status, body, _) = call(&app, "POST", "/augment", Some(zero)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let fg_graph = {
        let (graph, _) = build_graph(&g.data.edges, &g.data.dataset).unwrap();
        graph
    };
    let mut seed_region = BTreeSet::new();
    for s in &g.manifest.seed_codes {
        seed_region.insert(s.to_string());
        seed_region.extend(
            fg_graph
                .descendants(s)
                .unwrap()
                .iter()
                .map(|c| c.to_string()),
        );
    }
    let styled = styles(&body);
    let highlighted: BTreeSet<String> = styled
        .iter()
        .filter(|(_, s)| *s != "default")
        .map(|(c, _)| c.clone())
        .collect();
    assert_eq!(highlighted, seed_region);
    for (c, s) in &styled {
        let is_seed = g.manifest.seed_codes.contains(c.as_str());
        match s.as_str() {
            "thick" => assert!(is_seed),
            "thin" => assert!(!is_seed && seed_region.contains(c)),
            "default" => assert!(!seed_region.contains(c)),
            other => panic!("{c} styled {other} with sampling off"),
        }
    }

    let (_, _, a) = call(&app, "POST", "/augment", Some(narrow_growth(11))).await;
    let (_, _, b) = call(&app, "POST", "/augment", Some(narrow_growth(11))).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn narrow_growth_provenance_matches_the_augment_module() {
    let g = locality();
    let app = app();
    call(&app, "POST", "/session/load", Some(dir_load(g.dir.path()))).await;
    call(&app, "POST", "/filter", Some(locality_filter())).await;
    let (status, body, _) = call(&app, "POST", "/augment", Some(narrow_growth(0))).await;
    assert_eq!(status, StatusCode::OK, "{body}");

    let (graph, _) = build_graph(&g.data.edges, &g.data.dataset).unwrap();
    let spec = FilterSpec {
        selected_codes: g.manifest.seed_codes.clone(),
        phenotypes_of_interest: g.manifest.signal_phenotypes.clone(),
        min_visits: 0,
        min_phenotype_count: 0,
    };
    let fg = filter(&graph, &spec).unwrap();
    let result = augment(
        &fg,
        &AugmentSpec {
            seed_codes: spec.selected_codes.clone(),
            hops: 1,
            kl_threshold: 0.3,
            sampling_rate: 0.2,
            rng_seed: 0,
            smoothing: DEFAULT_SMOOTHING,
        },
    )
    .unwrap();

    let count = |origin: Origin| result.codes_with_origin(origin).len();
    let mut payload_counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in body["augment"]["provenance"].as_array().unwrap() {
        *payload_counts
            .entry(e["origin"].as_str().unwrap().to_owned())
            .or_default() += 1;
    }
    let origin_name = |o: Origin| {
        serde_json::to_value(o)
            .unwrap()
            .as_str()
            .unwrap()
            .to_owned()
    };
    for origin in [
        Origin::Seed,
        Origin::SeedDescendant,
        Origin::Sampled,
        Origin::SampledDescendant,
    ] {
        assert_eq!(
            payload_counts
                .get(&origin_name(origin))
                .copied()
                .unwrap_or(0),
            count(origin),
            "{origin:?}"
        );
    }
    assert!(count(Origin::Sampled) > 0);
    assert_eq!(body["cohort_size"], result.cohort_visit_ids.len());
    let sampled_none = styles(&body).values().filter(|s| *s == "none").count();
    assert_eq!(
        sampled_none,
        count(Origin::Sampled) + count(Origin::SampledDescendant)
    );
}

#[tokio::test]
async fn invalid_augment_parameters_are_400() {
    let app = app();
    call(&app, "POST", "/session/load", Some(tiny_load())).await;
    call(&app, "POST", "/filter", Some(json!({"codes": ["A"]}))).await;
    for bad in [
        json!({"hops": 0, "kl_threshold": 1.0, "sampling_rate": 0.5, "rng_seed": 0}),
        json!({"hops": 1, "kl_threshold": -1.0, "sampling_rate": 0.5, "rng_seed": 0}),
        json!({"hops": 1, "kl_threshold": 1.0, "sampling_rate": 1.5, "rng_seed": 0}),
    ] {
        let (status, body, _) = call(&app, "POST", "/augment", Some(bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(body["code"], "InvalidSpec");
    }
    let inf = json!({"hops": 1, "kl_threshold": "inf", "sampling_rate": 1.0, "rng_seed": 0});
    let (status, body, _) = call(&app, "POST", "/augment", Some(inf)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["augment"]["spec"]["kl_threshold"], "inf");
}

#[tokio::test]
async fn save_echoes_the_request_and_round_trips() {
    let g = locality();
    let app = app();
    call(&app, "POST", "/session/load", Some(dir_load(g.dir.path()))).await;
    call(&app, "POST", "/filter", Some(locality_filter())).await;
    let (_, render, _) = call(&app, "POST", "/augment", Some(narrow_growth(5))).await;

    let out = tempfile::tempdir().unwrap();
    let path = out.path().join("cohort.jsonl");
    let (status, saved, _) = call(&app, "POST", "/save", Some(json!({"path": path}))).await;
    assert_eq!(status, StatusCode::OK, "{saved}");
    let echoed = &saved["manifest"]["parameters"]["augment"];
    assert_eq!(echoed["hops"], 1);
    assert_eq!(echoed["kl_threshold"], 0.3);
    assert_eq!(echoed["sampling_rate"], 0.2);
    assert_eq!(echoed["rng_seed"], 5);
    let seeds: BTreeSet<ConceptCode> =
        serde_json::from_value(echoed["seed_codes"].clone()).unwrap();
    assert_eq!(seeds, g.manifest.seed_codes);
    assert_eq!(saved["manifest"]["seed"], 5);

    let back = load_dataset(
        Path::new(saved["visits_path"].as_str().unwrap()),
        Path::new(saved["vocabulary_path"].as_str().unwrap()),
    )
    .unwrap();
    assert_eq!(back.len(), render["cohort_size"].as_u64().unwrap() as usize);
    for v in back.visits() {
        assert_eq!(Some(v), g.data.dataset.get(&v.visit_id));
    }
    let on_disk: Value = serde_json::from_str(
        &std::fs::read_to_string(saved["manifest_path"].as_str().unwrap()).unwrap(),
    )
    .unwrap();
    assert_eq!(on_disk, saved["manifest"]);
}

#[tokio::test]
async fn reset_restores_load_counts_and_keeps_history() {
    let app = app();
    let (_, loaded, _) = call(&app, "POST", "/session/load", Some(tiny_load())).await;
    call(&app, "POST", "/filter", Some(json!({"codes": ["A"]}))).await;
    call(
        &app,
        "POST",
        "/augment",
        Some(json!({"hops": 1, "kl_threshold": "inf", "sampling_rate": 1.0, "rng_seed": 0})),
    )
    .await;
    // Failed mutations leave no trace.
    call(&app, "POST", "/filter", Some(json!({"codes": ["nope"]}))).await;
    let (status, reset, _) = call(&app, "POST", "/reset", None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, summary, _) = call(&app, "GET", "/session", None).await;
    assert_eq!(summary, reset);
    for key in ["node_count", "edge_count", "visit_count", "pruned_codes"] {
        assert_eq!(summary[key], loaded[key], "{key}");
    }
    assert_eq!(summary["stage"], "loaded");
    assert!(summary["filter"].is_null() && summary["augment"].is_null());

    let (_, history, _) = call(&app, "GET", "/session/history", None).await;
    let actions: Vec<&str> = history["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["action"].as_str().unwrap())
        .collect();
    assert_eq!(actions, ["load", "filter", "augment", "reset"]);
    let (status, _, _) = call(&app, "GET", "/nodes/A", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_mutations_are_serialized() {
    let g = locality();
    let app = app();
    call(&app, "POST", "/session/load", Some(dir_load(g.dir.path()))).await;
    call(&app, "POST", "/filter", Some(locality_filter())).await;

    let mut tasks = Vec::new();
    for i in 0..16u64 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            if i % 2 == 0 {
                let (status, body, _) =
                    call(&app, "POST", "/augment", Some(narrow_growth(i))).await;
                assert_eq!(status, StatusCode::OK);
                // The payload reflects this request, not a neighbour's.
                assert_eq!(body["augment"]["spec"]["rng_seed"], i);
            } else {
                let (status, body, _) = call(&app, "GET", "/session", None).await;
                assert_eq!(status, StatusCode::OK);
                let stage = body["stage"].as_str().unwrap();
                assert_eq!(stage == "augmented", !body["augment"].is_null());
            }
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
    let (_, history, _) = call(&app, "GET", "/session/history", None).await;
    assert_eq!(history["entries"].as_array().unwrap().len(), 2 + 8);
}

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use qasrl::annotation::{AnnotationService, ManualClock, ServiceConfig};
use qasrl::corpus::read_corpus;
use qasrl::grammar::Grammar;
use qasrl::synthetic::toy_corpus;
use qasrl_server::router;

fn app(sentences: usize) -> (Router, Arc<AnnotationService>) {
    let svc = Arc::new(AnnotationService::in_memory(ServiceConfig::default(), Arc::new(ManualClock::new(0))));
    for mut r in toy_corpus(sentences, 2) {
        r.verb_entries[0].qa_pairs.clear();
        svc.add_sentence(r).unwrap();
    }
    (router(svc.clone()), svc)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => builder.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

fn generation_body(task: &Value, worker: &str) -> Value {
    let v = task["verbIndex"].as_u64().unwrap();
    let n = task["tokens"].as_array().unwrap().len() as u64;
    let stem = task["inflections"]["stem"].as_str().unwrap();
    let past = task["inflections"]["past"].as_str().unwrap();
    let g = Grammar::standard();
    let table = serde_json::from_value(task["inflections"].clone()).unwrap();
    let slots = |text: &str| serde_json::to_value(g.parse_question(text, &table).unwrap()).unwrap();
    json!({
        "workerId": worker,
        "qaPairs": [
            {"slots": slots(&format!("Who {past} someone?")), "spans": [[v - 2, v - 1]]},
            {"slots": slots(&format!("Who did someone {stem}?")), "spans": [[v + 1, v + 2]]},
            {"slots": slots(&format!("Why did someone {stem} someone?")), "spans": [[n - 1, n - 1]]},
        ]
    })
}

#[tokio::test]
async fn full_round_trip_exports_a_valid_record() {
    let (app, _) = app(1);
    let (status, task, _) = call(&app, "GET", "/api/task/next?worker=g&kind=generation", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(task["state"], "assigned");
    let id = task["taskId"].as_str().unwrap().to_string();
    let body = generation_body(&task, "g");
    let (status, accepted, _) = call(&app, "POST", &format!("/api/task/{id}/generation"), Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK, "{accepted}");
    let vid = accepted["validationTaskId"].as_str().unwrap().to_string();

    let (status, err, _) = call(&app, "GET", "/api/task/next?worker=g&kind=validation", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("noTaskAvailable")));

    for w in ["v1", "v2"] {
        let (status, vt, _) = call(&app, "GET", &format!("/api/task/next?worker={w}&kind=validation"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(vt["taskId"], vid.as_str());
        assert_eq!(vt["questions"].as_array().unwrap().len(), 3);
        assert!(vt["questions"][0]["text"].as_str().unwrap().starts_with("Who "));
        let judgments: Vec<Value> =
            body["qaPairs"].as_array().unwrap().iter().map(|q| json!({"isValid": true, "spans": q["spans"]})).collect();
        let (status, done, _) =
            call(&app, "POST", &format!("/api/task/{vid}/validation"), Some(json!({"workerId": w, "judgments": judgments}))).await;
        assert_eq!(status, StatusCode::OK, "{done}");
    }

    let (_, stats, _) = call(&app, "GET", "/api/stats", None).await;
    assert_eq!(stats["cost"]["totalCents"], 16 + 8 + 8);
    assert_eq!(stats["tasks"]["validation"]["complete"], 1);
    let (status, _, text) = call(&app, "GET", "/api/export", None).await;
    assert_eq!(status, StatusCode::OK);
    let corpus = read_corpus(text.as_bytes()).unwrap();
    assert_eq!(corpus[0].verb_entries[0].qa_pairs.len(), 3);
    corpus[0].validate().unwrap();
}

#[tokio::test]
async fn rejection_lists_each_offending_question() {
    let (app, _) = app(1);
    let (_, task, _) = call(&app, "GET", "/api/task/next?worker=g&kind=generation", None).await;
    let id = task["taskId"].as_str().unwrap();
    let mut body = generation_body(&task, "g");
    body["qaPairs"][1]["spans"] = body["qaPairs"][0]["spans"].clone();
    let (status, err, _) = call(&app, "POST", &format!("/api/task/{id}/generation"), Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "rejected");
    let flagged: Vec<u64> = err["detail"].as_array().unwrap().iter().map(|i| i["question"].as_u64().unwrap()).collect();
    assert_eq!(flagged, vec![0, 1]);
    assert!(err["message"].as_str().unwrap().contains("overlaps"));
}

#[tokio::test]
async fn malformed_requests_get_structured_errors() {
    let (app, _) = app(1);
    let (status, err, _) = call(&app, "GET", "/api/task/next?worker=g&kind=review", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("badRequest")));
    let (status, err, _) = call(&app, "GET", "/api/task/next?kind=generation", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("badRequest")));
    let (status, err, _) = call(&app, "POST", "/api/task/task-000001/generation", Some(json!({"workerId": 3}))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("badRequest")));
    let (status, err, _) =
        call(&app, "POST", "/api/task/task-999/validation", Some(json!({"workerId": "v", "judgments": []}))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknownTask")));
    let (status, err, _) =
        call(&app, "POST", "/api/task/task-000001/generation", Some(json!({"workerId": "x", "qaPairs": []}))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::CONFLICT, Some("notLeased")));
    for e in [&err] {
        assert!(e["message"].is_string() && e.get("detail").is_some());
    }
}

#[tokio::test]
async fn concurrent_http_requests_lease_once() {
    let (app, svc) = app(1);
    let a = call(&app, "GET", "/api/task/next?worker=a&kind=generation", None);
    let b = call(&app, "GET", "/api/task/next?worker=b&kind=generation", None);
    let ((sa, _, _), (sb, _, _)) = tokio::join!(a, b);
    let mut statuses = [sa, sb];
    statuses.sort();
    assert_eq!(statuses, [StatusCode::OK, StatusCode::NOT_FOUND]);
    assert_eq!(svc.task("task-000001").unwrap().assignments.len(), 1);
}

#[tokio::test]
async fn autocomplete_proxies_the_grammar() {
    let (app, _) = app(1);
    let g = Grammar::standard();
    let (status, body, _) = call(&app, "GET", "/api/autocomplete?verb=blame&prefix=", None).await;
    assert_eq!(status, StatusCode::OK);
    let labels: Vec<&str> = body["options"].as_array().unwrap().iter().map(|o| o["label"].as_str().unwrap()).collect();
    let expected: Vec<String> = g.autocomplete(&[]).unwrap().iter().map(|v| v.label()).collect();
    assert_eq!(labels, expected);

    let (_, body, _) = call(&app, "GET", "/api/autocomplete?verb=blame&prefix=who||", None).await;
    let texts: Vec<&str> = body["options"].as_array().unwrap().iter().map(|o| o["text"].as_str().unwrap()).collect();
    assert_eq!(texts, ["blames", "blamed"]);

    let (_, body, _) = call(&app, "GET", "/api/autocomplete?verb=blame&prior=Who%20blamed%20someone%3F", None).await;
    let suggestions: Vec<&str> = body["suggestions"].as_array().unwrap().iter().map(|s| s["text"].as_str().unwrap()).collect();
    assert!(!suggestions.is_empty());
    assert!(!suggestions.contains(&"Who blamed someone?"));

    let (status, err, _) = call(&app, "GET", "/api/autocomplete?verb=blame&prefix=whom", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("grammar")));
}

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use posecomp_core::eval::{generate_synthetic_corpus, SyntheticSpec};
use posecomp_core::index::QueryRequest;
use posecomp_core::{
    build_index, CorpusIndex, Exec, ExtractParams, NormMode, PoseScene, QueryParams, RankedResults,
};
use posecomp_server::{router, AppState, ErrorBody, ImageSummary, ParamsInfo};
use tower::ServiceExt;

fn scenes() -> Vec<PoseScene> {
    generate_synthetic_corpus(&SyntheticSpec::builtin(4, 10.0, 0.0, 3))
        .iter()
        .map(|s| s.rescaled_longest_side(1000.0))
        .collect()
}

fn index() -> CorpusIndex {
    build_index(&scenes(), &ExtractParams::untuned_best(), Exec::default()).unwrap()
}

async fn call(state: &AppState, req: Request<Body>) -> (StatusCode, Option<String>, Vec<u8>) {
    let res = router(state.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let ct = res
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_owned());
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, ct, body)
}

async fn get(state: &AppState, uri: &str) -> (StatusCode, Option<String>, Vec<u8>) {
    call(state, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_json(state: &AppState, uri: &str, body: String) -> (StatusCode, Vec<u8>) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let (s, _, b) = call(state, req).await;
    (s, b)
}

#[tokio::test]
async fn images_lists_every_entry_and_filters_by_label() {
    let state = AppState::new(index());
    let (status, ct, body) = get(&state, "/api/images").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ct.as_deref(), Some("application/json"));
    let list: Vec<ImageSummary> = serde_json::from_slice(&body).unwrap();
    assert_eq!(list.len(), 20);
    let label = list[0].class_label.clone().unwrap();
    let (_, _, body) = get(&state, &format!("/api/images?label={label}")).await;
    let filtered: Vec<ImageSummary> = serde_json::from_slice(&body).unwrap();
    assert_eq!(filtered.len(), 4);
    assert!(filtered
        .iter()
        .all(|i| i.class_label.as_deref() == Some(label.as_str())));
}

#[tokio::test]
async fn canvas_route_returns_canvas_json() {
    let idx = index();
    let id = idx.entries.keys().next().unwrap().clone();
    let expected = serde_json::to_value(&idx.get(&id).unwrap().canvas).unwrap();
    let state = AppState::new(idx);
    let (status, _, body) = get(&state, &format!("/api/canvas/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        serde_json::from_slice::<serde_json::Value>(&body).unwrap(),
        expected
    );
    let (status, _, body) = get(&state, "/api/canvas/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(
        serde_json::from_slice::<ErrorBody>(&body).unwrap().error,
        "not_found"
    );
}

#[tokio::test]
async fn query_matches_direct_call_and_echoes_params() {
    let idx = index();
    let id = idx.entries.keys().nth(5).unwrap().clone();
    let params = QueryParams {
        norm: NormMode::Image,
        beta: Some(0.2),
        ..QueryParams::default()
    };
    let req = QueryRequest::by_id(id.clone(), 5, params);
    let direct = serde_json::to_vec(&idx.query(&req, Exec::default()).unwrap()).unwrap();
    let state = AppState::new(idx);
    let (status, body) =
        post_json(&state, "/api/query", serde_json::to_string(&req).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, direct);
    let res: RankedResults = serde_json::from_slice(&body).unwrap();
    assert_eq!(res.results.len(), 5);
    assert_eq!(res.params, params);
    assert!(res.results.iter().all(|r| r.target_id != id));
}

#[tokio::test]
async fn query_accepts_minimal_json_and_rejects_bad_input() {
    let state = AppState::new(index());
    let id = state.snapshot().entries.keys().next().unwrap().clone();
    let (status, body) = post_json(&state, "/api/query", format!(r#"{{"query_id":"{id}"}}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        serde_json::from_slice::<RankedResults>(&body)
            .unwrap()
            .results
            .len(),
        10
    );

    for (body, code, kind) in [
        (
            r#"{"query_id":"missing"}"#.to_owned(),
            StatusCode::NOT_FOUND,
            "not_found",
        ),
        (
            format!(r#"{{"query_id":"{id}","k":0}}"#),
            StatusCode::BAD_REQUEST,
            "invalid_parameter",
        ),
        (
            format!(r#"{{"query_id":"{id}","params":{{"w_a":2.0}}}}"#),
            StatusCode::BAD_REQUEST,
            "invalid_parameter",
        ),
        (
            format!(r#"{{"query_id":"{id}","params":{{"norm":"weird"}}}}"#),
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
        (
            "{}".to_owned(),
            StatusCode::BAD_REQUEST,
            "invalid_parameter",
        ),
        (
            format!(r#"{{"query_id":"{id}","params":{{"combine":"additive"}}}}"#),
            StatusCode::BAD_REQUEST,
            "features",
        ),
    ] {
        let (status, out) = post_json(&state, "/api/query", body.clone()).await;
        assert_eq!(status, code, "{body}");
        assert_eq!(
            serde_json::from_slice::<ErrorBody>(&out).unwrap().error,
            kind,
            "{body}"
        );
    }
}

fn count_class(svg: &str, class: &str) -> usize {
    svg.matches(&format!(r#"class="{class}"#)).count()
}

#[tokio::test]
async fn overlay_route_streams_svg_and_honours_elements() {
    let state = AppState::new(index()).with_media_template("/media/{id}.jpg");
    let id = state.snapshot().entries.keys().next().unwrap().clone();
    let (status, ct, body) = get(&state, &format!("/api/overlay/{id}.svg")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ct.as_deref(), Some("image/svg+xml"));
    let all = String::from_utf8(body).unwrap();
    assert!(all.starts_with("<svg"));
    assert!(all.contains(&format!("/media/{id}.jpg")));
    let (_, _, body) = get(&state, &format!("/api/overlay/{id}.svg?elements=poselines")).await;
    let only = String::from_utf8(body).unwrap();
    assert_eq!(
        count_class(&only, "poseline"),
        count_class(&all, "poseline")
    );
    assert_eq!(count_class(&only, "cone"), 0);
    let (status, _, _) = get(&state, &format!("/api/overlay/{id}.svg?elements=bogus")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn overlay_route_renders_match_view() {
    let state = AppState::new(index());
    let ids: Vec<String> = state.snapshot().entries.keys().take(2).cloned().collect();
    let (status, _, body) = get(
        &state,
        &format!("/api/overlay/{0}.svg?target={0}&norm=none", ids[0]),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let svg = String::from_utf8(body).unwrap();
    assert!(svg.contains(r#"id="target""#));
    assert!(svg.contains(">0.0</text>"));
    let (status, _, _) = get(
        &state,
        &format!("/api/overlay/{}.svg?target=missing", ids[0]),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn params_reports_index_fingerprint_and_swaps_atomically() {
    let state = AppState::new(index());
    let (_, _, body) = get(&state, "/api/params").await;
    let info: ParamsInfo = serde_json::from_slice(&body).unwrap();
    assert_eq!(info.extract, ExtractParams::untuned_best());
    assert_eq!(
        info.params_fingerprint,
        ExtractParams::untuned_best().fingerprint()
    );
    assert_eq!(info.norm_modes, ["none", "image", "bbox", "ar"]);
    assert_eq!(info.query, QueryParams::default());

    let other = ExtractParams {
        rho: 10.0,
        ..ExtractParams::default()
    };
    state.replace(build_index(&scenes()[..3], &other, Exec::default()).unwrap());
    let (_, _, body) = get(&state, "/api/params").await;
    let info: ParamsInfo = serde_json::from_slice(&body).unwrap();
    assert_eq!(info.params_fingerprint, other.fingerprint());
    let (_, _, body) = get(&state, "/api/images").await;
    assert_eq!(
        serde_json::from_slice::<Vec<ImageSummary>>(&body)
            .unwrap()
            .len(),
        3
    );
}

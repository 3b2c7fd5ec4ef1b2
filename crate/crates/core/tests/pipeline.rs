mod common;

use posecomp_core::eval::{
    evaluate, generate_synthetic_corpus, grid_search, GridSpec, SyntheticSpec,
};
use posecomp_core::index::QueryRequest;
use posecomp_core::latp::{LatpMode, LatpOptions};
use posecomp_core::overlay::{render_match, render_overlay, OverlayOptions};
use posecomp_core::pose::serialize_keypoint_file;
use posecomp_core::*;

fn corpus() -> Vec<PoseScene> {
    generate_synthetic_corpus(&SyntheticSpec::builtin(6, 10.0, 0.05, 9))
        .iter()
        .map(|s| s.rescaled_longest_side(1000.0))
        .collect()
}

#[test]
fn keypoint_file_round_trip_feeds_the_index() {
    let scenes = corpus();
    let bytes = serialize_keypoint_file(&scenes).unwrap();
    let parsed = parse_keypoint_file(&bytes).unwrap();
    assert_eq!(parsed, scenes);
    let index = build_index(&parsed, &ExtractParams::untuned_best(), Exec::default()).unwrap();
    assert_eq!(index.len(), scenes.len());
}

#[test]
fn sequential_and_parallel_agree() {
    let scenes = corpus();
    let params = ExtractParams::untuned_best();
    let seq = build_index(&scenes, &params, Exec::Sequential).unwrap();
    let par = build_index(&scenes, &params, Exec::Parallel).unwrap();
    assert_eq!(seq, par);
    for norm in NormMode::ALL {
        let q = QueryParams {
            norm,
            ..QueryParams::default()
        };
        let req = QueryRequest::by_id(scenes[0].image_id.clone(), 10, q);
        assert_eq!(
            seq.query(&req, Exec::Sequential).unwrap(),
            par.query(&req, Exec::Parallel).unwrap()
        );
        assert_eq!(
            evaluate(&seq, &q, Exec::Sequential).unwrap(),
            evaluate(&par, &q, Exec::Parallel).unwrap()
        );
    }
}

#[test]
fn query_excludes_self_and_respects_k() {
    let scenes = corpus();
    let index = build_index(&scenes, &ExtractParams::untuned_best(), Exec::default()).unwrap();
    let id = scenes[3].image_id.clone();
    let res = index
        .query(
            &QueryRequest::by_id(id.clone(), 5, QueryParams::default()),
            Exec::default(),
        )
        .unwrap();
    assert_eq!(res.results.len(), 5);
    assert!(res
        .results
        .iter()
        .all(|r| r.target_id != id && r.query_id == id));
    assert!(res.results.windows(2).all(|w| w[0].r_cr >= w[1].r_cr));
}

#[test]
fn inline_scene_query_matches_by_id_query() {
    let scenes = corpus();
    let index = build_index(&scenes, &ExtractParams::untuned_best(), Exec::default()).unwrap();
    let by_id = index
        .query(
            &QueryRequest::by_id(scenes[0].image_id.clone(), 10, QueryParams::default()),
            Exec::default(),
        )
        .unwrap();
    let inline = QueryRequest {
        query_id: None,
        scene: Some(PoseScene {
            image_id: "inline".into(),
            ..scenes[0].clone()
        }),
        ..QueryRequest::by_id("", 11, QueryParams::default())
    };
    let res = index.query(&inline, Exec::default()).unwrap();
    // the inline copy also sees the indexed original, with r_cr = 1
    assert_eq!(res.results[0].target_id, scenes[0].image_id);
    assert_eq!(res.results[0].r_cr, 1.0);
    let rest: Vec<_> = res.results[1..].iter().map(|r| &r.target_id).collect();
    let expected: Vec<_> = by_id.results.iter().map(|r| &r.target_id).collect();
    assert_eq!(rest, expected);
}

#[test]
fn baseline_ranks_duplicates_first() {
    let mut scenes = corpus();
    let dup = PoseScene {
        image_id: "zz_dup".into(),
        ..scenes[2].clone()
    };
    scenes.push(dup);
    let index = build_index(&scenes, &ExtractParams::untuned_best(), Exec::default()).unwrap();
    for mode in [LatpMode::Min, LatpMode::Bipart] {
        for robust in [false, true] {
            let q = QueryParams {
                baseline: Some(LatpOptions {
                    mode,
                    robust,
                    ..LatpOptions::default()
                }),
                ..QueryParams::default()
            };
            let res = index
                .query(
                    &QueryRequest::by_id(scenes[2].image_id.clone(), 3, q),
                    Exec::default(),
                )
                .unwrap();
            assert_eq!(res.results[0].target_id, "zz_dup");
            assert_eq!(res.results[0].latp_distance, Some(0.0));
        }
    }
}

#[test]
fn grid_search_covers_cartesian_product() {
    let scenes = corpus();
    let spec = GridSpec {
        rho: vec![10.0, 20.0],
        norm: vec![NormMode::None, NormMode::ActionRegion],
        poseline_fallback: vec![false, true],
        ..GridSpec::default()
    };
    let results = grid_search(&spec, &scenes, &ExtractParams::default(), Exec::default()).unwrap();
    assert_eq!(results.len(), spec.size());
    assert_eq!(results.len(), 8);
    let best = results[0].report.mp_at(1);
    assert!(results.iter().all(|r| r.report.mp_at(1) <= best));
}

#[test]
fn overlays_render_from_indexed_canvases() {
    let scenes = corpus();
    let index = build_index(&scenes, &ExtractParams::untuned_best(), Exec::default()).unwrap();
    let q = &scenes[0].image_id;
    let res = index
        .query(
            &QueryRequest::by_id(
                q.clone(),
                1,
                QueryParams {
                    norm: NormMode::None,
                    ..QueryParams::default()
                },
            ),
            Exec::default(),
        )
        .unwrap();
    let top = &res.results[0];
    let qc = &index.get(q).unwrap().canvas;
    let tc = &index.get(&top.target_id).unwrap().canvas;
    for svg in [
        render_overlay(qc, &OverlayOptions::default()).unwrap(),
        render_match(qc, tc, top).unwrap(),
    ] {
        roxmltree::Document::parse(&svg).unwrap();
    }
}

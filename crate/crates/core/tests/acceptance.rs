use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use geovista_core::agent::{run_batch, run_trajectory, LoopConfig, RolloutSample, Toolbox};
use geovista_core::chat::{ImagePart, SamplingParams, ScriptStep, ScriptedPolicy};
use geovista_core::curation::{
    filter_localizability, propose_and_execute, sft_record, ChatJudge, ChatProposer, FilterDecision, JudgeVerdict,
};
use geovista_core::eval::{aggregate, evaluate_batch, EvalClients, EvalStatus};
use geovista_core::geo::GeoPoint;
use geovista_core::protocol::{
    deserialize_trajectory, parse_model_output, serialize_trajectory, Action, ImageObservation, Malformed,
    MalformedReason, Observation, Payload, Termination, ToolCounts, ToolInvocation, Trajectory, Turn,
};
use geovista_core::reward::rung_value;
use geovista_core::surrogate::surrogate_from_ratio;
use geovista_core::tools::{budget_dimensions, FixtureGeocoder, FixtureSearch, Geocoder, ImageStore, SearchResult};
use geovista_core::{
    group_advantages, haversine_km, hierarchical_reward, DataType, GeoLabel, LevelAliases, LevelVerdicts, RewardRung,
    MAX_GREAT_CIRCLE_KM,
};
use image::{DynamicImage, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R_KM: f64 = 6371.0;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn law_of_cosines_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dl = (lon2 - lon1).to_radians();
    let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    R_KM * c.clamp(-1.0, 1.0).acos()
}

fn point(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

fn haversine_oracle() {
    let mut r = rng(1);
    let mut pairs = Vec::with_capacity(1000);
    for i in 0..1000 {
        let lat1 = r.gen_range(-89.0..89.0);
        let lon1 = r.gen_range(-180.0..180.0);
        // A fifth of the pairs are near neighbours so short separations are covered.
        let (lat2, lon2) = if i % 5 == 0 {
            (
                (lat1 + r.gen_range(-0.2..0.2f64)).clamp(-90.0, 90.0),
                (lon1 + r.gen_range(-0.2..0.2f64)).clamp(-180.0, 180.0),
            )
        } else {
            (r.gen_range(-90.0..90.0), r.gen_range(-180.0..180.0))
        };
        pairs.push((lat1, lon1, lat2, lon2));
    }
    let start = Instant::now();
    let distances: Vec<f64> =
        pairs.iter().map(|&(a, b, c, d)| haversine_km(&point(a, b), &point(c, d))).collect();
    let elapsed = start.elapsed();
    let mut checked = 0;
    for (&(a, b, c, d), &h) in pairs.iter().zip(&distances) {
        let oracle = law_of_cosines_km(a, b, c, d);
        if oracle > 1.0 {
            checked += 1;
            assert!((h - oracle).abs() < 1e-3, "({a},{b})-({c},{d}): {h} vs {oracle}");
        }
    }
    assert!(checked > 900, "only {checked} pairs above 1 km");
    let antipodal = haversine_km(&point(0.0, 0.0), &point(0.0, 180.0));
    assert!((antipodal - 20015.0868).abs() < 1e-3, "antipodal {antipodal}");
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
}

fn oracle_reward(country: bool, province: bool, city: bool) -> f64 {
    if city {
        4.0
    } else if province {
        2.0
    } else if country {
        1.0
    } else {
        0.0
    }
}

fn reward_rungs() {
    let value = |c, p, y| hierarchical_reward(&LevelVerdicts::raw(c, p, y), 2.0).unwrap().value();
    assert_eq!(value(true, true, true), 4.0);
    assert_eq!(value(true, true, false), 2.0);
    assert_eq!(value(true, false, false), 1.0);
    assert_eq!(value(false, false, false), 0.0);
    let rungs: Vec<f64> = RewardRung::ALL.iter().map(|&r| rung_value(r, 2.0)).collect();
    assert_eq!(rungs, [4.0, 2.0, 1.0, 0.0]);

    let combos: Vec<(bool, bool, bool)> =
        (0..8).map(|m| (m & 1 != 0, m & 2 != 0, m & 4 != 0)).collect();
    for &(c, p, y) in &combos {
        assert_eq!(value(c, p, y), oracle_reward(c, p, y), "{c} {p} {y}");
        for &(c2, p2, y2) in &combos {
            let refines = (!c || c2) && (!p || p2) && (!y || y2);
            if refines {
                assert!(value(c, p, y) <= value(c2, p2, y2), "{c}{p}{y} -> {c2}{p2}{y2}");
            }
        }
    }
}

fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn advantage_normalization() {
    let mut r = rng(3);
    let palette = [0.0, 1.0, 2.0, 4.0];
    let mut equal_groups = 0;
    for g in 0..200 {
        let size = r.gen_range(2..=16);
        let rewards: Vec<f64> = if g % 10 == 0 {
            vec![palette[r.gen_range(0..4)]; size]
        } else if g % 2 == 0 {
            (0..size).map(|_| palette[r.gen_range(0..4)]).collect()
        } else {
            (0..size).map(|_| r.gen_range(-5.0..5.0)).collect()
        };
        let a = group_advantages(&rewards).unwrap();
        let n = size as f64;
        let mean_r = rewards.iter().sum::<f64>() / n;
        let std_r = (rewards.iter().map(|x| (x - mean_r).powi(2)).sum::<f64>() / n).sqrt();
        if std_r == 0.0 {
            equal_groups += 1;
            assert!(a.iter().all(|&x| x == 0.0));
            continue;
        }
        let mean_a = a.iter().sum::<f64>() / n;
        let std_a = (a.iter().map(|x| (x - mean_a).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean_a.abs() < 1e-9, "group {g}: mean {mean_a}");
        assert!((std_a - 1.0).abs() < 1e-9, "group {g}: std {std_a}");
        assert_eq!(first_argmax(&a), first_argmax(&rewards), "group {g}");
    }
    assert!(equal_groups >= 20);
}

fn surrogate_oracle(ratio: f64, adv: f64, eps: f64) -> f64 {
    let unclipped = ratio * adv;
    let clipped_ratio = if ratio < 1.0 - eps {
        1.0 - eps
    } else if ratio > 1.0 + eps {
        1.0 + eps
    } else {
        ratio
    };
    let clipped = clipped_ratio * adv;
    if unclipped <= clipped {
        unclipped
    } else {
        clipped
    }
}

fn clipped_surrogate() {
    let mut r = rng(4);
    for i in 0..1000 {
        let eps: f64 = if i % 3 == 0 { 0.2 } else { r.gen_range(0.01..0.6) };
        let ratio: f64 = match i % 7 {
            0 => 1.0 + eps,
            1 => 1.0 - eps,
            _ => r.gen_range(0.0..3.0),
        };
        let adv: f64 = if i % 11 == 0 { 0.0 } else { r.gen_range(-4.0..4.0) };
        let got = surrogate_from_ratio(ratio, adv, eps).unwrap();
        let want = surrogate_oracle(ratio, adv, eps);
        assert!(got == want, "ratio {ratio} adv {adv} eps {eps}: {got} vs {want}");
    }
}

fn malformed_corpus() -> Vec<(String, MalformedReason)> {
    use MalformedReason::*;
    let call = |body: &str| format!("<tool_call>\n{body}\n</tool_call>");
    let base: Vec<(String, MalformedReason)> = vec![
        ("<think>the sign is blurry".into(), UnclosedTag),
        ("<answer>Paris, France".into(), UnclosedTag),
        ("<tool_call>{\"name\": \"search_web\", \"arguments\": {\"query\": \"x\"}}".into(), UnclosedTag),
        ("<tool_call>\n{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [1, 2, 3, 4]}}\n".into(), UnclosedTag),
        (call("{\"name\": \"search_web\", \"arguments\": {\"query\": \"x\""), IncompleteJson),
        (call("{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [1, 2,"), IncompleteJson),
        ("<tool_call>{\"name\": \"search_web\"".into(), IncompleteJson),
        (call("{\"name\":"), IncompleteJson),
        (call("{name: search_web}"), InvalidJson),
        (call("{\"name\": \"search_web\",, \"arguments\": {}}"), InvalidJson),
        (call("{\"name\": \"search_web\", \"arguments\": {\"query\": \"x\"}} trailing"), InvalidJson),
        (call("search_web(\"Hamburg\")"), InvalidJson),
        (call("{\"name\": \"map_lookup\", \"arguments\": {\"query\": \"x\"}}"), UnknownTool),
        (call("{\"name\": \"image_zoom_out_tool\", \"arguments\": {\"bbox_2d\": [0, 0, 5, 5]}}"), UnknownTool),
        (call("{\"name\": \"\", \"arguments\": {}}"), UnknownTool),
        (call("{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [1, 2, 3]}}"), BadArguments),
        (call("{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [1, 2, 3, 4, 5]}}"), BadArguments),
        (call("{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [\"a\", 2, 3, 4]}}"), BadArguments),
        (call("{\"name\": \"image_zoom_in_tool\", \"arguments\": {}}"), BadArguments),
        (call("{\"name\": \"search_web\", \"arguments\": {\"query\": \"x\", \"limit\": 3}}"), BadArguments),
        (call("{\"name\": \"search_web\", \"arguments\": {\"query\": \"  \"}}"), BadArguments),
        (call("{\"name\": \"search_web\"}"), BadArguments),
        ("I think this is somewhere in Europe.".into(), MissingPayload),
        ("".into(), MissingPayload),
        ("<answer>   </answer>".into(), EmptyAnswer),
    ];
    let mut corpus = base.clone();
    corpus.extend(base.into_iter().map(|(raw, reason)| (format!("<think>plan the next step</think>\n{raw}"), reason)));
    corpus
}

fn random_text(r: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 10] = ["Hamburg", "straße", "\"quoted\"", "line\nbreak", "東京", "<tag>", "\\", " ", "café", "42"];
    (0..r.gen_range(1..6)).map(|_| PIECES[r.gen_range(0..PIECES.len())]).collect()
}

/// Queries as the parser produces them: trimmed and non-empty.
fn random_query(r: &mut ChaCha8Rng) -> String {
    let q = random_text(r).trim().to_string();
    if q.is_empty() {
        "query".into()
    } else {
        q
    }
}

fn random_trajectory(r: &mut ChaCha8Rng, i: usize) -> Trajectory {
    let mut t = Trajectory::new(format!("sample-{i}"));
    let tool_turns = r.gen_range(0..=6);
    for _ in 0..tool_turns {
        let (action, observation) = match r.gen_range(0..4) {
            0 => {
                let x1 = r.gen_range(-50..500);
                let y1 = r.gen_range(-50..500);
                let call = ToolInvocation::zoom(x1, y1, x1 + r.gen_range(1..300), y1 + r.gen_range(1..300));
                let obs = Observation::Image(ImageObservation {
                    path: format!("images/{:064x}.png", r.gen::<u128>()),
                    sha256: format!("{:064x}", r.gen::<u128>()),
                    width: r.gen_range(1..2000),
                    height: r.gen_range(1..2000),
                });
                t.tool_call_stats.image_zoom_in_tool.record(false);
                (Action::ToolCall { call }, obs)
            }
            1 => {
                let call = ToolInvocation::search(random_query(r));
                t.tool_call_stats.search_web.record(false);
                (Action::ToolCall { call }, Observation::Text { text: random_text(r) })
            }
            2 => {
                let call = ToolInvocation::search(random_query(r));
                t.tool_call_stats.search_web.record(true);
                (Action::ToolCall { call }, Observation::Error { message: random_text(r) })
            }
            _ => {
                let m = Malformed {
                    reason: MalformedReason::InvalidJson,
                    tool: None,
                    detail: random_text(r),
                    raw: random_text(r),
                };
                t.tool_call_stats.unknown.record(true);
                (Action::Malformed(m), Observation::Error { message: random_text(r) })
            }
        };
        t.turns.push(Turn {
            thought: r.gen_bool(0.8).then(|| random_text(r)),
            action,
            observation: Some(observation),
            forced: false,
            warnings: Vec::new(),
        });
    }
    if r.gen_bool(0.7) {
        let answer = random_text(r);
        t.turns.push(Turn {
            thought: Some(random_text(r)),
            action: Action::Answer { text: answer.clone() },
            observation: None,
            forced: tool_turns == 6,
            warnings: Vec::new(),
        });
        t.final_answer = Some(answer);
        t.termination = Termination::Answered;
    } else {
        t.termination = if r.gen_bool(0.5) { Termination::TurnCap } else { Termination::ContextCap };
    }
    t.validate(Some(6)).unwrap();
    t
}

fn protocol_fidelity() {
    let zoom = parse_model_output(
        "<tool_call>  \n{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [10, 20, 100, 200]}}  \n</tool_call>",
    );
    assert_eq!(zoom.payload, Payload::Tool(ToolInvocation::zoom(10, 20, 100, 200)));
    let search = parse_model_output(
        "<tool_call>\n{\"name\": \"search_web\", \"arguments\": {\"query\": \"The palace museum\"}}\n</tool_call>",
    );
    assert_eq!(search.payload, Payload::Tool(ToolInvocation::search("The palace museum")));

    let corpus = malformed_corpus();
    assert_eq!(corpus.len(), 50);
    for (raw, want) in &corpus {
        match parse_model_output(raw).payload {
            Payload::Malformed(m) => assert_eq!(m.reason, *want, "{raw:?}: {}", m.detail),
            other => panic!("{raw:?} parsed as {other:?}"),
        }
    }

    let mut r = rng(5);
    for i in 0..100 {
        let t = random_trajectory(&mut r, i);
        let line = serialize_trajectory(&t).unwrap();
        assert!(!line.contains('\n'));
        let back = deserialize_trajectory(&line).unwrap();
        assert_eq!(back, t);
        assert_eq!(serialize_trajectory(&back).unwrap(), line);
    }
}

const CROP: &str = "<think>The sign is small.</think>\n<tool_call>\n{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [0, 0, 32, 24]}}\n</tool_call>";
const BAD_CROP: &str = "<think>Zoom.</think>\n<tool_call>\n{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [40, 0, 10, 20]}}\n</tool_call>";
const SEARCH: &str = "<think>Look it up.</think>\n<tool_call>\n{\"name\": \"search_web\", \"arguments\": {\"query\": \"hamburg u-bahn\"}}\n</tool_call>";
const ANSWER: &str = "<think>Done.</think>\n<answer>Hamburg, Hamburg, Germany</answer>";

fn test_image(w: u32, h: u32, tint: u8) -> DynamicImage {
    DynamicImage::ImageRgb8(RgbImage::from_fn(w, h, |x, y| Rgb([(x * 3) as u8, (y * 5) as u8, tint])))
}

fn search_fixture() -> FixtureSearch {
    let mut s = FixtureSearch::default();
    s.insert(
        "hamburg u-bahn",
        vec![SearchResult::new("Hamburger Hochbahn", "Operator of the Hamburg U-Bahn.", "https://example.org/hochbahn").unwrap()],
    );
    s
}

fn loop_contracts() {
    let config = LoopConfig { deterministic: true, ..LoopConfig::default() };
    let sampling = SamplingParams::default();
    let toolbox = Toolbox::new(Some(Arc::new(search_fixture())), ImageStore::in_memory());
    let sample = RolloutSample::from_image("s", test_image(64, 48, 7));

    let t = run_trajectory(&sample, &config, &ScriptedPolicy::replies([CROP, SEARCH, ANSWER]), &toolbox, &sampling);
    assert_eq!(t.termination, Termination::Answered);
    assert_eq!(t.turns.len(), 3);
    assert!(matches!(t.turns[0].observation, Some(Observation::Image(_))));
    assert!(matches!(t.turns[1].observation, Some(Observation::Text { .. })));

    let t = run_trajectory(&sample, &config, &ScriptedPolicy::replies([SEARCH]), &toolbox, &sampling);
    assert_eq!(t.tool_turns(), 6);
    assert_eq!(t.turns.len(), 7);
    assert!(t.turns[6].forced);
    assert_eq!(t.termination, Termination::TurnCap);

    let t = run_trajectory(&sample, &config, &ScriptedPolicy::replies([BAD_CROP, CROP, ANSWER]), &toolbox, &sampling);
    assert_eq!(t.tool_call_stats.image_zoom_in_tool, ToolCounts { total: 2, failed: 1 });
    assert_eq!(t.tool_call_stats.failure_rate(), 0.5);
    assert_eq!(t.termination, Termination::Answered);

    let samples: Vec<RolloutSample> =
        (0..6).map(|i| RolloutSample::from_image(format!("d{i}"), test_image(80, 60, i as u8 * 30))).collect();
    let policy = ScriptedPolicy::replies([CROP, SEARCH, ANSWER]).with_sample("d3", vec![ScriptStep::Reply(BAD_CROP.into())]);
    let sampling = SamplingParams { seed: Some(9), ..SamplingParams::default() };
    let run = |workers| {
        let dir = tempfile::tempdir().unwrap();
        let toolbox = Toolbox::new(Some(Arc::new(search_fixture())), ImageStore::new(dir.path()));
        let report = run_batch(&samples, &config, &policy, &toolbox, &sampling, workers);
        let log: String =
            report.trajectories.iter().map(|t| serialize_trajectory(t).unwrap() + "\n").collect();
        let mut images: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path().join("images"))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        images.sort();
        (log, images)
    };
    let first = run(4);
    let second = run(2);
    assert_eq!(first.0, second.0);
    assert_eq!(first.1, second.1);
}

fn downsampling() {
    let budget = 2_000_000u64;
    let mut r = rng(7);
    for _ in 0..500 {
        let w: u32 = r.gen_range(1..=12_000);
        let h: u32 = r.gen_range(1..=12_000);
        let (ow, oh) = budget_dimensions(w, h, budget).unwrap();
        assert!(u64::from(ow) * u64::from(oh) <= budget, "{w}x{h} -> {ow}x{oh}");
        if u64::from(w) * u64::from(h) <= budget {
            assert_eq!((ow, oh), (w, h));
            continue;
        }
        assert!(ow <= w && oh <= h);
        // One common scale must floor to both sides: the scale intervals overlap.
        let (fw, fh, fow, foh) = (f64::from(w), f64::from(h), f64::from(ow), f64::from(oh));
        let lo = (fow / fw).max(foh / fh);
        let hi = ((fow + 1.0) / fw).min((foh + 1.0) / fh);
        assert!(lo < hi, "{w}x{h} -> {ow}x{oh}");
    }
    assert_eq!(budget_dimensions(4096, 2048, budget).unwrap(), (2000, 1000));
    let img = Arc::new(test_image(4096, 2048, 0));
    let presented = geovista_core::tools::downsample_to_budget("pano", img, budget).unwrap();
    assert_eq!((presented.presented.width(), presented.presented.height()), (2000, 1000));
}

struct EvalCase {
    id: &'static str,
    data_type: DataType,
    names: [&'static str; 3],
    at: (f64, f64),
    answer: Option<&'static str>,
    /// Geocode of the answer as a latitude offset in degrees from the label.
    offset_deg: Option<f64>,
}

fn eval_cases() -> Vec<EvalCase> {
    use DataType::*;
    let c = |id, data_type, names, at, answer, offset_deg| EvalCase { id, data_type, names, at, answer, offset_deg };
    vec![
        c("pa", Panorama, ["Germany", "Hamburg", "Hamburg"], (53.5511, 9.9937), Some("Hamburg, Hamburg, Germany"), Some(0.01)),
        c("pb", Panorama, ["France", "Auvergne-Rhône-Alpes", "Lyon"], (45.764, 4.8357), Some("Lyon, Auvergne-Rhône-Alpes, France"), Some(0.02)),
        c("pc", Panorama, ["Japan", "Hokkaido", "Sapporo"], (43.0618, 141.3545), Some("Asahikawa, Hokkaido, Japan"), Some(0.5)),
        c("pd", Panorama, ["Portugal", "Porto District", "Porto"], (41.1579, -8.6291), None, None),
        c("ha", Photo, ["Canada", "Ontario", "Toronto"], (43.6532, -79.3832), Some("Toronto, Ontario, Canada"), Some(0.005)),
        c("hb", Photo, ["United States", "Texas", "Austin"], (30.2672, -97.7431), Some("Denver, Colorado, United States"), Some(2.0)),
        c("hc", Photo, ["Australia", "Victoria", "Melbourne"], (-37.8136, 144.9631), Some("Melbourne, Victoria, Australia"), Some(0.03)),
        c("hd", Photo, ["Kenya", "Nairobi County", "Nairobi"], (-1.2921, 36.8219), Some("Lima, Lima Province, Peru"), Some(20.0)),
        c("sa", Satellite, ["Egypt", "Cairo Governorate", "Cairo"], (30.0444, 31.2357), Some("Cairo, Cairo Governorate, Egypt"), Some(0.001)),
        c("sb", Satellite, ["Chile", "Santiago Metropolitan Region", "Santiago"], (-33.4489, -70.6693), Some("Santiago, Santiago Metropolitan Region, Chile"), Some(0.025)),
        c("sc", Satellite, ["Germany", "Bavaria", "Munich"], (48.1351, 11.582), Some("Munich, Bavaria, Germany"), Some(0.015)),
        c("sd", Satellite, ["Spain", "Andalusia", "Seville"], (37.3891, -5.9845), Some("Granada, Andalusia, Spain"), Some(1.0)),
    ]
}

fn evaluation_table() {
    let start = Instant::now();
    let cases = eval_cases();
    let mut geocodes = FixtureGeocoder::default();
    let mut trajectories = Vec::new();
    let mut labels = Vec::new();
    for case in &cases {
        let (lat, lon) = case.at;
        labels.push(GeoLabel::new(case.names[0], case.names[1], case.names[2], point(lat, lon), LevelAliases::default()).unwrap());
        let mut t = Trajectory::new(case.id);
        match case.answer {
            Some(answer) => {
                t.turns.push(Turn {
                    thought: Some("Reasoned from the scene.".into()),
                    action: Action::Answer { text: answer.into() },
                    observation: None,
                    forced: false,
                    warnings: Vec::new(),
                });
                t.final_answer = Some(answer.into());
                t.termination = Termination::Answered;
                geocodes.insert(answer, point(lat + case.offset_deg.unwrap(), lon));
            }
            None => t.termination = Termination::TurnCap,
        }
        trajectories.push(t);
    }
    let items: Vec<_> = trajectories
        .iter()
        .zip(&labels)
        .zip(&cases)
        .map(|((t, l), c)| (t, l, c.data_type))
        .collect();
    let clients = EvalClients::rules_only(Geocoder::new(Arc::new(geocodes)));
    let records = evaluate_batch(&items, &clients, 4);
    let report = aggregate(&records).unwrap();

    assert_eq!(report.n_samples, 12);
    assert_eq!((report.n_by_type.panorama, report.n_by_type.photo, report.n_by_type.satellite), (4, 4, 4));
    assert_eq!(report.n_geocoded, 11);
    assert_eq!(report.country_acc, 1000.0 / 12.0);
    assert_eq!(report.province_acc, 75.0);
    assert_eq!(report.city_acc, 700.0 / 12.0);
    assert_eq!(report.city_acc_by_type.panorama, Some(50.0));
    assert_eq!(report.city_acc_by_type.photo, Some(50.0));
    assert_eq!(report.city_acc_by_type.satellite, Some(75.0));
    assert_eq!(report.under_3km_rate, 50.0);

    let pd = records.iter().find(|r| r.sample_id == "pd").unwrap();
    assert_eq!(pd.status, EvalStatus::Unanswered);
    assert_eq!(pd.distance_km, MAX_GREAT_CIRCLE_KM);
    // Sorted: 0.001 0.005 0.01 0.015 0.02 0.025 | 0.03 0.5 1 2 20 (deg) and the sentinel.
    let arc_km = |deg: f64| R_KM * deg.to_radians();
    let expected_median = (arc_km(0.025) + arc_km(0.03)) / 2.0;
    assert!((report.median_distance_km - expected_median).abs() < 1e-9, "{}", report.median_distance_km);
    for (record, case) in records.iter().zip(&cases) {
        if let Some(deg) = case.offset_deg {
            assert!((record.distance_km - arc_km(deg)).abs() < 1e-6, "{}", case.id);
        }
    }
    assert!(start.elapsed() < Duration::from_secs(5));
}

fn curation() {
    let judge_script = ScriptedPolicy::replies(["localizable"])
        .with_sample("eiffel#judge", vec![ScriptStep::Reply("landmark".into())])
        .with_sample("fog#judge", vec![ScriptStep::Reply("non-localizable".into())]);
    let proposer_script = ScriptedPolicy::default()
        .with_sample(
            "street#regions",
            vec![ScriptStep::Reply(
                r#"[{"bbox_2d": [0, 0, 40, 40], "rationale": "Street sign."}, {"bbox_2d": [500, 500, 600, 600], "rationale": "Off frame."}]"#.into(),
            )],
        )
        .with_sample(
            "street#queries",
            vec![ScriptStep::Reply(r#"[{"query": "hamburg u-bahn", "rationale": "Transit logo."}]"#.into())],
        )
        .with_sample(
            "street#final",
            vec![ScriptStep::Reply(r#"{"reasoning": "Hamburg transit branding.", "answer": "Hamburg, Germany"}"#.into())],
        )
        .with_sample("harbor#regions", vec![ScriptStep::Reply(r#"[{"bbox_2d": [10, 10, 90, 60], "rationale": "Cranes."}]"#.into())])
        .with_sample("harbor#queries", vec![ScriptStep::Reply("[]".into())])
        .with_sample(
            "harbor#final",
            vec![ScriptStep::Reply(r#"{"reasoning": "Container port cranes.", "answer": "Rotterdam, South Holland, Netherlands"}"#.into())],
        );
    let judge = ChatJudge::new(Arc::new(judge_script));
    let proposer = ChatProposer::new(Arc::new(proposer_script));
    let toolbox = Toolbox::new(Some(Arc::new(search_fixture())), ImageStore::in_memory());
    let config = LoopConfig { deterministic: true, ..LoopConfig::default() };

    let ids = ["street", "eiffel", "fog", "harbor"];
    let images: Vec<Arc<DynamicImage>> =
        ids.iter().enumerate().map(|(i, _)| Arc::new(test_image(120, 80, i as u8 * 50))).collect();
    let decisions: Vec<FilterDecision> = ids
        .iter()
        .zip(&images)
        .map(|(id, img)| filter_localizability(id, &ImagePart::from_image(img).unwrap(), &judge))
        .collect();
    let summary: Vec<(&str, bool, Option<JudgeVerdict>)> =
        decisions.iter().map(|d| (d.sample_id.as_str(), d.keep, d.verdict)).collect();
    assert_eq!(
        summary,
        [
            ("street", true, Some(JudgeVerdict::Localizable)),
            ("eiffel", false, Some(JudgeVerdict::Landmark)),
            ("fog", false, Some(JudgeVerdict::NonLocalizable)),
            ("harbor", true, Some(JudgeVerdict::Localizable)),
        ]
    );
    assert_eq!(decisions[1].reason(), Some("landmark"));

    let mut tool_turns = 0;
    for (decision, img) in decisions.iter().zip(&images).filter(|(d, _)| d.keep) {
        let outcome =
            propose_and_execute(&decision.sample_id, Arc::clone(img), &proposer, &toolbox, &config, 4).unwrap();
        let traj = &outcome.trajectory;
        let record = sft_record(traj, &outcome.input_image.path, "Where was this photo taken?").unwrap();
        let assistant: Vec<&str> =
            record.messages.iter().filter(|m| m.role == "assistant").map(|m| m.content.as_str()).collect();
        assert_eq!(assistant.len(), traj.turns.len());
        for (content, turn) in assistant.iter().zip(&traj.turns) {
            let parsed = parse_model_output(content).payload;
            match &turn.action {
                Action::ToolCall { call } => {
                    tool_turns += 1;
                    assert_eq!(parsed, Payload::Tool(call.clone()), "{content}");
                }
                Action::Answer { text } => assert_eq!(parsed, Payload::Answer(text.clone())),
                Action::Malformed(m) => panic!("curated trajectory holds a malformed turn: {m:?}"),
            }
        }
        if decision.sample_id == "street" {
            assert_eq!(traj.tool_turns(), 2);
            assert_eq!(outcome.dropped.len(), 1);
        }
    }
    assert_eq!(tool_turns, 3);
}

fn main() -> ExitCode {
    let criteria: [(&str, fn()); 9] = [
        ("haversine matches the law-of-cosines oracle", haversine_oracle),
        ("hierarchical reward rungs and monotonicity", reward_rungs),
        ("group advantage normalization", advantage_normalization),
        ("clipped surrogate matches the brute-force oracle", clipped_surrogate),
        ("protocol parsing, malformed corpus and round-trips", protocol_fidelity),
        ("agent loop contracts and determinism", loop_contracts),
        ("pixel-budget downsampling", downsampling),
        ("evaluation metrics on the 12-sample fixture", evaluation_table),
        ("curation drop log and SFT round-trip", curation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS criterion {}: {name} ({ms} ms)", i + 1),
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({ms} ms)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

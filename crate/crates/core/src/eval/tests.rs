use super::*;
use crate::qa::Anchors;
use proptest::prelude::*;

fn scalar(v: f64, unit: Unit) -> Answer {
    Answer::Scalar { value: v, unit }
}

fn pair(id: &str, task: TaskKind, answer: Answer) -> QAPair {
    QAPair {
        id: id.into(),
        task,
        question: "q".into(),
        answer,
        cot: vec![],
        anchors: Anchors { sequence_id: "s".into(), times: vec![0.0], ids: vec![] },
    }
}

fn pred(id: &str, a: Answer) -> Prediction {
    Prediction { id: id.into(), answer: Some(a), raw_text: None }
}

#[test]
fn thresholds_are_inclusive() {
    let ms = Unit::MetersPerSecond;
    assert!(score_numeric(&scalar(0.0, ms), &scalar(SPEED_TOL, ms), NumericKind::Speed).unwrap());
    assert!(!score_numeric(&scalar(0.0, ms), &scalar(0.0501, ms), NumericKind::Speed).unwrap());
    let m = Unit::Meters;
    assert!(score_numeric(&scalar(0.0, m), &scalar(DISTANCE_TOL, m), NumericKind::Distance).unwrap());
    assert!(!score_numeric(&scalar(0.0, m), &scalar(0.1001, m), NumericKind::Distance).unwrap());
}

#[test]
fn direction_wraps_around_pi() {
    let r = Unit::Radians;
    let near_pi = std::f64::consts::PI - 0.1;
    assert!(score_numeric(&scalar(near_pi, r), &scalar(-near_pi, r), NumericKind::Direction).unwrap());
    assert!(!score_numeric(&scalar(0.0, r), &scalar(0.6, r), NumericKind::Direction).unwrap());
}

#[test]
fn position_uses_euclidean_error() {
    let a = Answer::Vector { value: [0.0, 0.0, 0.0], unit: Unit::Meters };
    let b = Answer::Vector { value: [0.06, 0.08, 0.0], unit: Unit::Meters };
    let c = Answer::Vector { value: [0.07, 0.08, 0.0], unit: Unit::Meters };
    assert!(score_numeric(&a, &b, NumericKind::Position).unwrap());
    assert!(!score_numeric(&a, &c, NumericKind::Position).unwrap());
}

#[test]
fn unit_mismatch_is_an_error() {
    let err = score_numeric(&scalar(1.0, Unit::Meters), &scalar(1.0, Unit::MetersPerSecond), NumericKind::Speed);
    assert!(matches!(err, Err(Error::Scoring(_))));
    assert!(score_answer(&Answer::Id { value: 1 }, &Answer::Label { value: "a".into() }).is_err());
}

#[test]
fn f1_examples() {
    assert_eq!(f1_set(&[], &[]), 1.0);
    assert_eq!(f1_set(&[1], &[]), 0.0);
    assert_eq!(f1_set(&[1, 2], &[2, 1]), 1.0);
    // precision 1/2, recall 1/3
    assert!((f1_set(&[1, 4], &[1, 2, 3]) - 0.4).abs() < 1e-12);
}

#[test]
fn motion_ignores_heading_when_static() {
    let gt = Answer::Motion { speed: 0.02, heading: 0.0 };
    let p = Answer::Motion { speed: 0.0, heading: 3.0 };
    assert_eq!(score_answer(&p, &gt).unwrap(), 1.0);
    let gt = Answer::Motion { speed: 1.0, heading: 0.0 };
    let p = Answer::Motion { speed: 1.0, heading: 1.0 };
    assert_eq!(score_answer(&p, &gt).unwrap(), 0.0);
}

#[test]
fn box_scoring_uses_iou() {
    let g = BBox3D::new([0.0; 3], [0.5; 3], 0.0);
    let near = BBox3D::new([0.5, 0.0, 0.0], [0.5; 3], 0.0);
    let far = BBox3D::new([0.95, 0.0, 0.0], [0.5; 3], 0.0);
    assert_eq!(score_answer(&Answer::Box { value: near }, &Answer::Box { value: g }).unwrap(), 1.0);
    assert_eq!(score_answer(&Answer::Box { value: far }, &Answer::Box { value: g }).unwrap(), 0.0);
}

#[test]
fn evaluate_counts_missing_and_malformed() {
    let qa = vec![
        pair("a", TaskKind::AgentVelocity, Answer::Motion { speed: 1.0, heading: 0.0 }),
        pair("b", TaskKind::AgentVelocity, Answer::Motion { speed: 1.0, heading: 0.0 }),
        pair("c", TaskKind::AgentVelocity, Answer::Motion { speed: 1.0, heading: 0.0 }),
        pair("d", TaskKind::DynamicScene, Answer::IdSet { value: vec![1, 2] }),
    ];
    let preds = vec![
        pred("a", Answer::Motion { speed: 1.01, heading: 0.1 }),
        pred("b", Answer::Label { value: "fast".into() }),
        pred("d", Answer::IdSet { value: vec![1] }),
    ];
    let r = evaluate_run(&qa, &preds).unwrap();
    assert_eq!(r.total, 4);
    assert_eq!(r.missing, 1);
    assert_eq!(r.malformed, 1);
    let v = r.task(TaskKind::AgentVelocity).unwrap();
    assert!((v.score - 100.0 / 3.0).abs() < 1e-9);
    let d = r.task(TaskKind::DynamicScene).unwrap();
    assert!((d.score - 2.0 / 3.0).abs() < 1e-12);
    assert!(!r.is_perfect());
}

#[test]
fn unknown_and_duplicate_ids_are_rejected() {
    let qa = vec![pair("a", TaskKind::AgentVelocity, Answer::Motion { speed: 1.0, heading: 0.0 })];
    let m = Answer::Motion { speed: 1.0, heading: 0.0 };
    assert!(evaluate_run(&qa, &[pred("zz", m.clone())]).is_err());
    assert!(evaluate_run(&qa, &[pred("a", m.clone()), pred("a", m)]).is_err());
}

#[test]
fn raw_text_is_parsed_against_the_expected_shape() {
    let qa = vec![
        pair("a", TaskKind::CurrentObjectProperty, scalar(2.5, Unit::Meters)),
        pair("b", TaskKind::MotionSequence, Answer::OrderedIds { value: vec![3, 1, 2] }),
        pair("c", TaskKind::AgentTrajectory, Answer::OrderedLabels { value: vec!["north".into(), "east".into()] }),
    ];
    let preds: Vec<Prediction> = qa
        .iter()
        .map(|q| Prediction { id: q.id.clone(), answer: None, raw_text: Some(q.answer.to_text()) })
        .collect();
    let r = evaluate_run(&qa, &preds).unwrap();
    assert_eq!(r.parsed_from_text, 3);
    assert_eq!(r.malformed, 0);
    assert!(r.tasks.iter().all(|t| t.score == 100.0));
}

#[test]
fn parse_raw_handles_negatives_and_boxes() {
    let v = parse_raw("at (-1.5, 2, 0.25)", &Answer::Vector { value: [0.0; 3], unit: Unit::Meters }).unwrap();
    assert_eq!(v, Answer::Vector { value: [-1.5, 2.0, 0.25], unit: Unit::Meters });
    let b = BBox3D::new([1.0, -2.0, 0.5], [0.25, 0.5, 0.5], 0.3);
    let text = Answer::Box { value: b }.to_text();
    match parse_raw(&text, &Answer::Box { value: b }).unwrap() {
        Answer::Box { value } => assert!(iou3d(&value, &b).unwrap() > 0.99),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(parse_raw("no digits", &scalar(0.0, Unit::Meters)), None);
}

#[test]
fn perfect_predictions_score_perfectly() {
    let qa = vec![
        pair("a", TaskKind::ObjectCaptioning, Answer::Text { value: "a red chair near the table".into() }),
        pair("b", TaskKind::TemporaryStaticObjects, Answer::IdSet { value: vec![] }),
        pair("c", TaskKind::MostActiveObject, Answer::Id { value: 4 }),
    ];
    let preds: Vec<Prediction> = qa.iter().map(|q| pred(&q.id, q.answer.clone())).collect();
    let r = evaluate_run(&qa, &preds).unwrap();
    assert!(r.is_perfect(), "{r:?}");
    assert!(r.to_csv().starts_with("task,metric"));
}

proptest! {
    #[test]
    fn f1_is_symmetric_and_bounded(a in proptest::collection::vec(0u32..10, 0..8), b in proptest::collection::vec(0u32..10, 0..8)) {
        let x = f1_set(&a, &b);
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x, f1_set(&b, &a));
    }

    #[test]
    fn speed_score_matches_threshold(g in 0.0f64..5.0, e in -0.2f64..0.2) {
        let ms = Unit::MetersPerSecond;
        let ok = score_numeric(&scalar(g + e, ms), &scalar(g, ms), NumericKind::Speed).unwrap();
        prop_assert_eq!(ok, ((g + e) - g).abs() <= SPEED_TOL);
    }
}

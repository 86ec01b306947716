mod common;

use common::{adversarial_fixture, full_study_records, rec, three_subject_fixture};
use mdvqa_core::study::{
    compute_mos, compute_zscores, read_ratings_csv, reject_subjects, rescale_z, rescale_zscores, run_study,
    screening_counts, write_ratings_csv, MosTable, RatingRecord, RejectionOrder, StudyConfig, StudyError, SubjectTable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn acceptance_pipeline() {
    common::check_subjective().assert();
}

#[test]
fn z_scores_center_each_subject() {
    let table = SubjectTable::from_records(&full_study_records(30, 5, 2)).unwrap();
    let z = compute_zscores(&table).unwrap();
    for row in &z.cells {
        let s: f64 = row.iter().flatten().sum();
        assert!(s.abs() < 1e-12, "{s}");
    }
    let t = SubjectTable::from_records(&three_subject_fixture()).unwrap();
    let z = compute_zscores(&t).unwrap();
    // s1 rates {1,2,3}: mean 2, sample std 1
    assert_eq!(z.cells[0], vec![Some(-1.0), Some(0.0), Some(1.0)]);
}

#[test]
fn constant_rater_is_degenerate() {
    let mut r = three_subject_fixture();
    for x in r.iter_mut().filter(|x| x.subject_id == "s2") {
        x.rating = 3.0;
    }
    let t = SubjectTable::from_records(&r).unwrap();
    match compute_zscores(&t) {
        Err(StudyError::DegenerateSubject(ids)) => assert_eq!(ids, vec!["s2".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unanimous_panel_keeps_everyone() {
    let recs: Vec<RatingRecord> = (0..4)
        .flat_map(|s| (0..10).map(move |v| rec(&format!("s{s}"), &format!("v{v}"), 1.0 + 0.4 * v as f64)))
        .collect();
    let t = SubjectTable::from_records(&recs).unwrap();
    assert!(reject_subjects(&t).unwrap().iter().all(|r| !r));
    assert!(screening_counts(&t).unwrap().iter().all(|c| c.above + c.below == 0));
}

#[test]
fn adversary_is_the_only_rejection() {
    let rep = run_study(&adversarial_fixture(), StudyConfig::default()).unwrap();
    assert_eq!(rep.rejected_subjects, vec!["adv".to_string()]);
    assert_eq!(rep.rejection, RejectionOrder::BeforeZScore);
    // After z-scoring every rater in this fixture sits at about +-0.99, the
    // adversary with the opposite sign; the lone outlier drives kurtosis
    // past 4 and the wide gate admits it. Screening z-scores therefore
    // keeps everyone here.
    let rep = run_study(
        &adversarial_fixture(),
        StudyConfig {
            rejection: RejectionOrder::AfterZScore,
        },
    )
    .unwrap();
    assert!(rep.rejected_subjects.is_empty());
    let rep = run_study(
        &adversarial_fixture(),
        StudyConfig {
            rejection: RejectionOrder::Disabled,
        },
    )
    .unwrap();
    assert!(rep.rejected_subjects.is_empty());
}

#[test]
fn one_sided_strict_rater_is_kept() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut recs = Vec::new();
    for v in 0..40 {
        let q: f64 = rng.random_range(2.0..4.5);
        let vid = format!("v{v:02}");
        for s in 0..20 {
            let r: f64 = (q + rng.random_range(-0.3..0.3)).clamp(1.0, 5.0);
            recs.push(rec(&format!("h{s:02}"), &vid, (r * 10.0).round() / 10.0));
        }
        recs.push(rec("strict", &vid, ((q - 0.5) * 10.0).round() / 10.0));
    }
    let t = SubjectTable::from_records(&recs).unwrap();
    let counts = screening_counts(&t).unwrap();
    let i = t.subjects.iter().position(|s| s == "strict").unwrap();
    assert_eq!(counts[i].above, 0);
    assert!(!counts[i].rejected());
    assert!(!reject_subjects(&t).unwrap()[i]);
}

#[test]
fn too_few_subjects_for_screening() {
    let recs: Vec<RatingRecord> = three_subject_fixture()
        .into_iter()
        .filter(|r| r.subject_id != "s3")
        .collect();
    let t = SubjectTable::from_records(&recs).unwrap();
    assert!(matches!(reject_subjects(&t), Err(StudyError::InsufficientSubjects(2))));
}

#[test]
fn rescale_examples() {
    assert_eq!(rescale_z(0.0), 3.0);
    assert_eq!(rescale_z(3.0), 5.0);
    assert_eq!(rescale_z(-3.0), 1.0);
    assert_eq!(rescale_z(4.2), 5.0);
}

#[test]
fn mos_of_a_single_subject_and_of_extremes() {
    let recs = vec![rec("s", "a", 1.0), rec("s", "b", 3.0), rec("s", "c", 5.0)];
    let t = SubjectTable::from_records(&recs).unwrap();
    let zp = rescale_zscores(&compute_zscores(&t).unwrap());
    let mos = compute_mos(&zp).unwrap();
    for (row, want) in mos.rows.iter().zip(zp.cells[0].iter()) {
        assert_eq!(Some(row.mos), *want);
        assert_eq!(row.num_valid_subjects, 1);
    }
    let two = SubjectTable {
        subjects: vec!["x".into(), "y".into()],
        videos: vec!["v".into()],
        cells: vec![vec![Some(1.0)], vec![Some(5.0)]],
    };
    assert_eq!(compute_mos(&two).unwrap().rows[0].mos, 3.0);
    let gap = SubjectTable {
        subjects: vec!["x".into()],
        videos: vec!["v".into(), "w".into()],
        cells: vec![vec![Some(2.0), None]],
    };
    assert!(matches!(compute_mos(&gap), Err(StudyError::NoValidRatings(ids)) if ids == vec!["w".to_string()]));
}

#[test]
fn invalid_ratings_are_refused() {
    assert!(rec("s", "v", 5.1).validate().is_err());
    assert!(rec("s", "v", 0.9).validate().is_err());
    assert!(rec("s", "v", 2.35).validate().is_err());
    assert!(rec("s", "v", 2.3).validate().is_ok());
    let dup = vec![rec("s", "v", 2.0), rec("s", "v", 3.0)];
    assert!(matches!(
        SubjectTable::from_records(&dup),
        Err(StudyError::Duplicate { .. })
    ));
    let bad = "subject,video,rating,time\ns,v,2.0,x\n";
    assert!(matches!(
        read_ratings_csv(bad.as_bytes()),
        Err(StudyError::Header { .. })
    ));
}

#[test]
fn exported_tables_reproduce_the_same_mos() {
    let recs = full_study_records(60, 8, 4);
    let first = run_study(&recs, StudyConfig::default()).unwrap();
    let mut csv = Vec::new();
    write_ratings_csv(&recs, &mut csv).unwrap();
    let again = run_study(&read_ratings_csv(csv.as_slice()).unwrap(), StudyConfig::default()).unwrap();
    assert_eq!(first, again);
    let mut out = Vec::new();
    first.mos.write_csv(&mut out).unwrap();
    assert!(String::from_utf8(out.clone())
        .unwrap()
        .starts_with("video_id,mos,num_valid_subjects\n"));
    assert_eq!(MosTable::read_csv(out.as_slice()).unwrap(), first.mos);
}

#[test]
fn record_order_does_not_matter() {
    let mut recs = full_study_records(20, 6, 5);
    let a = run_study(&recs, StudyConfig::default()).unwrap();
    recs.reverse();
    assert_eq!(a, run_study(&recs, StudyConfig::default()).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn within_subject_order_is_preserved(ratings in proptest::collection::vec(10u8..=50, 3..30)) {
        let recs: Vec<RatingRecord> = ratings
            .iter()
            .enumerate()
            .map(|(v, &r)| rec("s", &format!("v{v:03}"), r as f64 / 10.0))
            .collect();
        let t = SubjectTable::from_records(&recs).unwrap();
        prop_assume!(ratings.iter().any(|&r| r != ratings[0]));
        let z = compute_zscores(&t).unwrap();
        let zp = rescale_zscores(&z);
        for a in 0..ratings.len() {
            for b in 0..ratings.len() {
                if ratings[a] > ratings[b] {
                    prop_assert!(z.cells[0][a].unwrap() > z.cells[0][b].unwrap());
                    prop_assert!(zp.cells[0][a].unwrap() >= zp.cells[0][b].unwrap());
                }
            }
        }
    }

    #[test]
    fn mos_stays_on_scale(seed in any::<u64>(), videos in 2usize..25, subjects in 3usize..9) {
        let rep = run_study(&full_study_records(videos, subjects, seed), StudyConfig::default());
        if let Ok(rep) = rep {
            prop_assert!(rep.mos.rows.iter().all(|r| (1.0..=5.0).contains(&r.mos) && r.num_valid_subjects > 0));
        }
    }
}

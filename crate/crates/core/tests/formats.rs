mod common;

use common::{random_clip, special_f32, tiny_dims};
use mdvqa_core::features::{
    from_feature_files, read_feature_file, to_feature_files, write_feature_file, FeatureError, FeatureFile, FeatureKind,
};
use mdvqa_core::model::{read_model, write_model, ModelParams};
use mdvqa_core::{Manifest, ManifestEntry};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn acceptance_round_trips() {
    common::check_round_trips().assert();
}

#[test]
fn header_layout() {
    let f = FeatureFile::new(
        FeatureKind::Motion,
        2,
        3,
        vec![0.0, -0.0, 1.5, f32::MIN_POSITIVE, 2.0, 3.0],
    )
    .unwrap();
    let b = f.to_bytes();
    assert_eq!(&b[..8], b"MDVQFEAT");
    assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
    assert_eq!(b[12], 2);
    assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(b[20..24].try_into().unwrap()), 3);
    assert_eq!(b.len(), 24 + 6 * 4);
}

#[test]
fn corrupt_feature_files_are_refused() {
    let good = FeatureFile::new(FeatureKind::Semantic, 1, 2, vec![1.0, 2.0])
        .unwrap()
        .to_bytes();
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        FeatureFile::from_bytes(&bad_magic),
        Err(FeatureError::BadMagic)
    ));
    let mut bad_version = good.clone();
    bad_version[8] = 9;
    assert!(matches!(
        FeatureFile::from_bytes(&bad_version),
        Err(FeatureError::VersionMismatch(9))
    ));
    let mut bad_kind = good.clone();
    bad_kind[12] = 7;
    assert!(matches!(
        FeatureFile::from_bytes(&bad_kind),
        Err(FeatureError::BadKind(7))
    ));
    assert!(matches!(
        FeatureFile::from_bytes(&good[..good.len() - 1]),
        Err(FeatureError::LengthMismatch { .. })
    ));
    let mut long = good.clone();
    long.push(0);
    assert!(FeatureFile::from_bytes(&long).is_err());
}

#[test]
fn non_finite_values_are_not_written() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.feat");
    assert!(write_feature_file(&p, FeatureKind::Semantic, 1, 2, &[1.0, f32::NAN]).is_err());
    assert!(!p.exists() || read_feature_file(&p).is_err());
}

#[test]
fn clip_features_survive_files() {
    let dims = tiny_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clips: Vec<_> = (0..3).map(|_| random_clip(&dims, &mut rng)).collect();
    let [s, d, m] = to_feature_files(&clips).unwrap();
    assert_eq!((s.count, d.count, m.count), (12, 12, 3));
    let back = from_feature_files(&s, &d, &m, 3, dims.l).unwrap();
    for (a, b) in clips.iter().zip(&back) {
        assert_eq!(a.sf.mapv(|v| v as f32 as f64), b.sf);
        assert_eq!(a.mf.mapv(|v| v as f32 as f64), b.mf);
    }
    assert!(from_feature_files(&s, &d, &m, 4, dims.l).is_err());
    assert!(from_feature_files(&d, &s, &m, 3, dims.l).is_err());
}

#[test]
fn model_file_rejects_damage() {
    let mut p = ModelParams::init(tiny_dims(), 0).unwrap();
    p.quantize_f32();
    let mut buf = Vec::new();
    write_model(&p, &mut buf).unwrap();
    assert_eq!(&buf[..8], b"MDVQMODL");
    assert!(read_model(&buf[..buf.len() - 4]).is_err());
    let mut extra = buf.clone();
    extra.extend_from_slice(&[0; 4]);
    assert!(read_model(extra.as_slice()).is_err());
    let mut magic = buf.clone();
    magic[3] = 0;
    assert!(read_model(magic.as_slice()).is_err());
    let mut version = buf;
    version[8] = 2;
    assert!(read_model(version.as_slice()).is_err());
}

#[test]
fn manifest_json_round_trip_and_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = Manifest::new(dir.path());
    let mut e = ManifestEntry::new(8, 8);
    e.semantic_path = Some("feats/a.semantic.feat".into());
    e.source_group = Some("g".into());
    e.crf = Some(28);
    e.mos = Some(3.25);
    m.entries.insert("a".into(), e);
    let path = dir.path().join("manifest.json");
    m.save(&path).unwrap();
    let back = Manifest::load(&path).unwrap();
    assert_eq!(back.entries, m.entries);
    assert_eq!(
        back.resolve(back.entries["a"].semantic_path.as_ref().unwrap()),
        dir.path().join("feats/a.semantic.feat")
    );
    let mut bad = m.clone();
    bad.entries.get_mut("a").unwrap().crf = Some(27);
    assert!(bad.validate().is_err());
}

#[test]
fn missing_feature_file_names_the_video() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = Manifest::new(dir.path());
    let mut e = ManifestEntry::new(1, 1);
    e.semantic_path = Some("nope.feat".into());
    e.distortion_path = Some("nope.feat".into());
    e.motion_path = Some("nope.feat".into());
    m.entries.insert("clip_042".into(), e);
    let err = m.load_features("clip_042").unwrap_err().to_string();
    assert!(err.contains("clip_042"), "{err}");
}

proptest! {
    #[test]
    fn feature_bits_survive(bits in proptest::collection::vec(any::<u32>(), 0..64), dim in 1usize..5) {
        let n = bits.len() / dim * dim;
        let data: Vec<f32> = bits[..n].iter().map(|&b| f32::from_bits(b)).chain(special_f32()).collect();
        let count = data.len() / dim;
        let data = data[..count * dim].to_vec();
        let f = FeatureFile::new(FeatureKind::Distortion, count, dim, data).unwrap();
        let back = FeatureFile::from_bytes(&f.to_bytes()).unwrap();
        prop_assert_eq!(back.kind, f.kind);
        prop_assert_eq!((back.count, back.dim), (f.count, f.dim));
        let a: Vec<u32> = f.data.iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn model_files_are_bit_exact(seed in any::<u64>()) {
        let mut p = ModelParams::init(tiny_dims(), seed).unwrap();
        p.head1.w[[0, 0]] = -0.0;
        p.head2.b[1] = f32::from_bits(1) as f64;
        p.quantize_f32();
        let mut buf = Vec::new();
        write_model(&p, &mut buf).unwrap();
        let q = read_model(buf.as_slice()).unwrap();
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            let ab: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(ab, bb);
        }
    }
}

//! Raw subjective ratings to MOS: per-subject z-scores, kurtosis-gated
//! outlier screening of subjects, a fixed rescale of `[-3, 3]` onto
//! `[1, 5]`, and per-video averaging.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 5.0;
pub const Z_CLAMP: f64 = 3.0;
pub const RATINGS_CSV_HEADER: [&str; 4] = ["subject_id", "video_id", "rating", "timestamp_iso8601"];
pub const MOS_CSV_HEADER: [&str; 3] = ["video_id", "mos", "num_valid_subjects"];

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("rating {rating} by '{subject_id}' for '{video_id}' is outside [1, 5]")]
    Range {
        subject_id: String,
        video_id: String,
        rating: f64,
    },
    #[error("rating {rating} by '{subject_id}' for '{video_id}' is not a multiple of 0.1")]
    Granularity {
        subject_id: String,
        video_id: String,
        rating: f64,
    },
    #[error("duplicate rating by '{subject_id}' for '{video_id}'")]
    Duplicate { subject_id: String, video_id: String },
    #[error("subject '{subject_id}' has {count} ratings, at least 2 are needed")]
    TooFewRatings { subject_id: String, count: usize },
    #[error("subjects with zero rating variance: {0:?}")]
    DegenerateSubject(Vec<String>),
    #[error("subject screening needs at least 3 subjects, got {0}")]
    InsufficientSubjects(usize),
    #[error("videos without any valid rating: {0:?}")]
    NoValidRatings(Vec<String>),
    #[error("ratings CSV header must be {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub subject_id: String,
    pub video_id: String,
    pub rating: f64,
    #[serde(rename = "timestamp_iso8601")]
    pub timestamp: String,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<(), StudyError> {
        if !(RATING_MIN..=RATING_MAX).contains(&self.rating) {
            return Err(StudyError::Range {
                subject_id: self.subject_id.clone(),
                video_id: self.video_id.clone(),
                rating: self.rating,
            });
        }
        let tenths = self.rating * 10.0;
        if (tenths - tenths.round()).abs() > 1e-6 {
            return Err(StudyError::Granularity {
                subject_id: self.subject_id.clone(),
                video_id: self.video_id.clone(),
                rating: self.rating,
            });
        }
        Ok(())
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), StudyError> {
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(StudyError::Header {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    Ok(())
}

pub fn read_ratings_csv<R: Read>(r: R) -> Result<Vec<RatingRecord>, StudyError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    check_header(&mut rdr, &RATINGS_CSV_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let rec: RatingRecord = rec?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_ratings_csv<W: Write>(records: &[RatingRecord], w: W) -> Result<(), StudyError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RATINGS_CSV_HEADER)?;
    for r in records {
        wtr.write_record([
            r.subject_id.as_str(),
            r.video_id.as_str(),
            &format!("{:.1}", r.rating),
            r.timestamp.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Sparse subject x video table. Used for raw ratings as well as z and
/// rescaled z values.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTable {
    pub subjects: Vec<String>,
    pub videos: Vec<String>,
    /// `cells[i][j]`: subject `i`, video `j`.
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Per-subject mean, sample standard deviation and rating count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl SubjectTable {
    /// Subjects and videos are sorted by id, so the table does not depend
    /// on record order.
    pub fn from_records(records: &[RatingRecord]) -> Result<Self, StudyError> {
        let subjects: Vec<String> = records
            .iter()
            .map(|r| r.subject_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let videos: Vec<String> = records
            .iter()
            .map(|r| r.video_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let s_idx: BTreeMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let v_idx: BTreeMap<&str, usize> = videos.iter().enumerate().map(|(j, v)| (v.as_str(), j)).collect();
        let mut cells = vec![vec![None; videos.len()]; subjects.len()];
        for r in records {
            r.validate()?;
            let cell = &mut cells[s_idx[r.subject_id.as_str()]][v_idx[r.video_id.as_str()]];
            if cell.is_some() {
                return Err(StudyError::Duplicate {
                    subject_id: r.subject_id.clone(),
                    video_id: r.video_id.clone(),
                });
            }
            *cell = Some(r.rating);
        }
        Ok(Self {
            subjects,
            videos,
            cells,
        })
    }

    pub fn rating_count(&self) -> usize {
        self.cells.iter().map(|row| row.iter().flatten().count()).sum()
    }

    pub fn subject_stats(&self, i: usize) -> SubjectStats {
        let vals: Vec<f64> = self.cells[i].iter().flatten().copied().collect();
        let count = vals.len();
        let mean = vals.iter().sum::<f64>() / count.max(1) as f64;
        let std = if count < 2 {
            0.0
        } else {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        };
        SubjectStats { mean, std, count }
    }

    /// Keep only subjects whose flag in `keep` is set.
    pub fn retain_subjects(&self, keep: &[bool]) -> Self {
        let rows = self.subjects.iter().zip(&self.cells).zip(keep).filter(|(_, &k)| k);
        let (subjects, cells) = rows.map(|((s, c), _)| (s.clone(), c.clone())).unzip();
        Self {
            subjects,
            videos: self.videos.clone(),
            cells,
        }
    }

    fn map_cells(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|c| c.map(|v| f(i, v))).collect())
            .collect();
        Self {
            subjects: self.subjects.clone(),
            videos: self.videos.clone(),
            cells,
        }
    }
}

/// `z_ij = (r_ij - mu_i) / sigma_i` with the sample standard deviation.
pub fn compute_zscores(table: &SubjectTable) -> Result<SubjectTable, StudyError> {
    let stats: Vec<SubjectStats> = (0..table.subjects.len()).map(|i| table.subject_stats(i)).collect();
    if let Some((i, s)) = stats.iter().enumerate().find(|(_, s)| s.count < 2) {
        return Err(StudyError::TooFewRatings {
            subject_id: table.subjects[i].clone(),
            count: s.count,
        });
    }
    let degenerate: Vec<String> = stats
        .iter()
        .zip(&table.subjects)
        .filter(|(s, _)| s.std == 0.0)
        .map(|(_, id)| id.clone())
        .collect();
    if !degenerate.is_empty() {
        return Err(StudyError::DegenerateSubject(degenerate));
    }
    Ok(table.map_cells(|i, r| (r - stats[i].mean) / stats[i].std))
}

/// Per-subject outlier counts behind a rejection decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningCounts {
    pub above: usize,
    pub below: usize,
    pub rated: usize,
}

impl ScreeningCounts {
    pub fn rejected(&self) -> bool {
        let out = self.above + self.below;
        if out == 0 {
            return false;
        }
        let frac = out as f64 / self.rated as f64;
        let balance = (self.above as f64 - self.below as f64).abs() / out as f64;
        frac > 0.05 && balance < 0.3
    }
}

/// Count, for every subject, the videos on which they fall strictly
/// outside the kurtosis-gated band around the panel mean.
pub fn screening_counts(table: &SubjectTable) -> Result<Vec<ScreeningCounts>, StudyError> {
    if table.subjects.len() < 3 {
        return Err(StudyError::InsufficientSubjects(table.subjects.len()));
    }
    let mut counts: Vec<ScreeningCounts> = (0..table.subjects.len())
        .map(|i| ScreeningCounts {
            above: 0,
            below: 0,
            rated: table.subject_stats(i).count,
        })
        .collect();
    for j in 0..table.videos.len() {
        let col: Vec<(usize, f64)> = table
            .cells
            .iter()
            .enumerate()
            .filter_map(|(i, row)| row[j].map(|v| (i, v)))
            .collect();
        let n = col.len();
        if n < 2 {
            continue;
        }
        let mean = col.iter().map(|(_, v)| v).sum::<f64>() / n as f64;
        let m2 = col.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let m4 = col.iter().map(|(_, v)| (v - mean).powi(4)).sum::<f64>() / n as f64;
        let s = (m2 * n as f64 / (n - 1) as f64).sqrt();
        let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
        let width = if (2.0..=4.0).contains(&kurtosis) {
            2.0 * s
        } else {
            20f64.sqrt() * s
        };
        for &(i, v) in &col {
            if v > mean + width {
                counts[i].above += 1;
            } else if v < mean - width {
                counts[i].below += 1;
            }
        }
    }
    Ok(counts)
}

/// Rejection flag per subject, in table order.
pub fn reject_subjects(table: &SubjectTable) -> Result<Vec<bool>, StudyError> {
    Ok(screening_counts(table)?.iter().map(ScreeningCounts::rejected).collect())
}

/// Clamp to `[-3, 3]` and map affinely onto `[1, 5]`.
pub fn rescale_z(z: f64) -> f64 {
    (z.clamp(-Z_CLAMP, Z_CLAMP) + Z_CLAMP) * (4.0 / (2.0 * Z_CLAMP)) + 1.0
}

pub fn rescale_zscores(z: &SubjectTable) -> SubjectTable {
    z.map_cells(|_, v| rescale_z(v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosRow {
    pub video_id: String,
    pub mos: f64,
    pub num_valid_subjects: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MosTable {
    pub rows: Vec<MosRow>,
}

impl MosTable {
    pub fn get(&self, video_id: &str) -> Option<&MosRow> {
        self.rows.iter().find(|r| r.video_id == video_id)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.rows.iter().map(|r| (r.video_id.clone(), r.mos)).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), StudyError> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, StudyError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        check_header(&mut rdr, &MOS_CSV_HEADER)?;
        let rows = rdr.deserialize().collect::<Result<Vec<MosRow>, _>>()?;
        Ok(Self { rows })
    }
}

/// Average the rescaled scores of every video over the subjects who rated it.
pub fn compute_mos(rescaled: &SubjectTable) -> Result<MosTable, StudyError> {
    let mut rows = Vec::with_capacity(rescaled.videos.len());
    let mut empty = Vec::new();
    for (j, video_id) in rescaled.videos.iter().enumerate() {
        let vals: Vec<f64> = rescaled.cells.iter().filter_map(|row| row[j]).collect();
        if vals.is_empty() {
            empty.push(video_id.clone());
            continue;
        }
        rows.push(MosRow {
            video_id: video_id.clone(),
            mos: vals.iter().sum::<f64>() / vals.len() as f64,
            num_valid_subjects: vals.len(),
        });
    }
    if !empty.is_empty() {
        return Err(StudyError::NoValidRatings(empty));
    }
    Ok(MosTable { rows })
}

/// When subject screening runs relative to z-scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionOrder {
    /// Screen raw ratings, then z-score the surviving subjects.
    #[default]
    BeforeZScore,
    /// Screen z-scores of all subjects, then drop the rejected ones.
    AfterZScore,
    Disabled,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub rejection: RejectionOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rejection: RejectionOrder,
    pub subjects: usize,
    pub ratings: usize,
    pub rejected_subjects: Vec<String>,
    pub mos: MosTable,
}

/// Full pipeline from raw records to MOS.
pub fn run_study(records: &[RatingRecord], cfg: StudyConfig) -> Result<StudyReport, StudyError> {
    let raw = SubjectTable::from_records(records)?;
    let (z, keep) = match cfg.rejection {
        RejectionOrder::BeforeZScore => {
            let keep: Vec<bool> = reject_subjects(&raw)?.iter().map(|r| !r).collect();
            (compute_zscores(&raw.retain_subjects(&keep))?, keep)
        }
        RejectionOrder::AfterZScore => {
            let z = compute_zscores(&raw)?;
            let keep: Vec<bool> = reject_subjects(&z)?.iter().map(|r| !r).collect();
            (z.retain_subjects(&keep), keep)
        }
        RejectionOrder::Disabled => (compute_zscores(&raw)?, vec![true; raw.subjects.len()]),
    };
    let rejected_subjects = raw
        .subjects
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| !k)
        .map(|(s, _)| s.clone())
        .collect();
    let mos = compute_mos(&rescale_zscores(&z))?;
    Ok(StudyReport {
        rejection: cfg.rejection,
        subjects: raw.subjects.len(),
        ratings: raw.rating_count(),
        rejected_subjects,
        mos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(s: &str, v: &str, r: f64) -> RatingRecord {
        RatingRecord {
            subject_id: s.into(),
            video_id: v.into(),
            rating: r,
            timestamp: "2024-01-01T00:00:00Z".into(),
        }
    }

    fn three_subjects() -> Vec<RatingRecord> {
        let mut out = Vec::new();
        for (s, rs) in [
            ("s1", [1.0, 2.0, 3.0]),
            ("s2", [2.0, 3.0, 4.0]),
            ("s3", [2.0, 4.0, 3.0]),
        ] {
            for (v, r) in ["a", "b", "c"].iter().zip(rs) {
                out.push(rec(s, v, r));
            }
        }
        out
    }

    #[test]
    fn zscore_of_top_rating_is_one() {
        let t = SubjectTable::from_records(&three_subjects()).unwrap();
        let z = compute_zscores(&t).unwrap();
        assert_eq!(z.cells[0], vec![Some(-1.0), Some(0.0), Some(1.0)]);
        for row in &z.cells {
            assert!(row.iter().flatten().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn constant_rater_is_degenerate() {
        let recs = vec![rec("x", "a", 3.0), rec("x", "b", 3.0), rec("x", "c", 3.0)];
        let err = compute_zscores(&SubjectTable::from_records(&recs).unwrap()).unwrap_err();
        assert!(matches!(err, StudyError::DegenerateSubject(ref s) if s == &["x"]));
    }

    #[test]
    fn rescale_endpoints() {
        assert_eq!(rescale_z(0.0), 3.0);
        assert_eq!(rescale_z(3.0), 5.0);
        assert_eq!(rescale_z(-3.0), 1.0);
        assert_eq!(rescale_z(4.2), 5.0);
    }

    #[test]
    fn fixture_mos() {
        let report = run_study(&three_subjects(), StudyConfig::default()).unwrap();
        assert!(report.rejected_subjects.is_empty());
        let m = report.mos.to_map();
        assert!((m["a"] - 7.0 / 3.0).abs() < 1e-12);
        assert!((m["b"] - 29.0 / 9.0).abs() < 1e-12);
        assert!((m["c"] - 31.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn mean_of_two_rescaled() {
        let t = SubjectTable {
            subjects: vec!["a".into(), "b".into()],
            videos: vec!["v".into()],
            cells: vec![vec![Some(1.0)], vec![Some(5.0)]],
        };
        let m = compute_mos(&t).unwrap();
        assert_eq!(m.rows[0].mos, 3.0);
        assert_eq!(m.rows[0].num_valid_subjects, 2);
    }

    #[test]
    fn unrated_video_is_reported() {
        let t = SubjectTable {
            subjects: vec!["a".into()],
            videos: vec!["v".into(), "w".into()],
            cells: vec![vec![Some(1.0), None]],
        };
        assert!(matches!(compute_mos(&t), Err(StudyError::NoValidRatings(ref v)) if v == &["w"]));
    }

    #[test]
    fn record_validation() {
        assert!(matches!(rec("a", "v", 5.4).validate(), Err(StudyError::Range { .. })));
        assert!(matches!(
            rec("a", "v", 3.17).validate(),
            Err(StudyError::Granularity { .. })
        ));
        assert!(rec("a", "v", 3.1).validate().is_ok());
        let dup = vec![rec("a", "v", 3.0), rec("a", "v", 4.0)];
        assert!(matches!(
            SubjectTable::from_records(&dup),
            Err(StudyError::Duplicate { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let recs = three_subjects();
        let mut buf = Vec::new();
        write_ratings_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("subject_id,video_id,rating,timestamp_iso8601\n"));
        assert_eq!(read_ratings_csv(buf.as_slice()).unwrap(), recs);

        let report = run_study(&recs, StudyConfig::default()).unwrap();
        let mut out = Vec::new();
        report.mos.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out.clone())
            .unwrap()
            .starts_with("video_id,mos,num_valid_subjects\n"));
        assert_eq!(MosTable::read_csv(out.as_slice()).unwrap(), report.mos);
    }

    #[test]
    fn wrong_header_rejected() {
        let err = read_ratings_csv("subject,video,rating,ts\n".as_bytes()).unwrap_err();
        assert!(matches!(err, StudyError::Header { .. }));
    }

    #[test]
    fn two_subjects_cannot_be_screened() {
        let t = SubjectTable::from_records(&three_subjects()[..6]).unwrap();
        assert!(matches!(reject_subjects(&t), Err(StudyError::InsufficientSubjects(2))));
    }

    #[test]
    fn unanimous_panel_keeps_everyone() {
        let mut recs = Vec::new();
        for s in 0..5 {
            for v in 0..10 {
                recs.push(rec(&format!("s{s}"), &format!("v{v}"), 1.0 + (v % 5) as f64));
            }
        }
        let t = SubjectTable::from_records(&recs).unwrap();
        assert_eq!(reject_subjects(&t).unwrap(), vec![false; 5]);
    }
}

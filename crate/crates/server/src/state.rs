//! Session bookkeeping. Every mutation is validated here, written to the
//! event log, then applied through [`Registry::apply`], the same path the
//! startup replay takes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::PathBuf;

use axum::http::StatusCode;
use mdvqa_core::rng::{fnv1a, XorShift64};
use mdvqa_core::study::{write_ratings_csv, RatingRecord, RATING_MAX, RATING_MIN};
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::media::ByteRange;
use crate::store::{Event, EventLog};
use crate::ServerError;

pub const DEFAULT_PLAYLIST: usize = 50;
pub const DEFAULT_STUDY: &str = "default";

/// An error with its HTTP status and a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    /// File size for a 416 `Content-Range: bytes */size`.
    pub unsatisfied_size: Option<u64>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            unsatisfied_size: None,
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl From<ServerError> for ApiError {
    fn from(e: ServerError) -> Self {
        Self::internal(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Active,
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredRating {
    pub video_id: String,
    pub rating: f64,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq)]
struct Grant {
    token: String,
    opened: bool,
    /// Half-open byte intervals already delivered.
    served: Vec<(u64, u64)>,
    revoked: bool,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub study_id: String,
    pub subject_id: String,
    pub playlist: Vec<String>,
    pub created_at: String,
    pub ratings: Vec<StoredRating>,
    grants: Vec<Option<Grant>>,
}

impl Session {
    pub fn cursor(&self) -> usize {
        self.ratings.len()
    }

    pub fn state(&self) -> SessionState {
        if self.cursor() == self.playlist.len() {
            SessionState::Complete
        } else {
            SessionState::Active
        }
    }

    pub fn info(&self) -> SessionInfo {
        SessionInfo {
            session_id: self.id.clone(),
            study_id: self.study_id.clone(),
            subject_id: self.subject_id.clone(),
            total: self.playlist.len(),
            rated: self.cursor(),
            state: self.state(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    pub subject_id: String,
    #[serde(default)]
    pub study_id: Option<String>,
    /// Explicit video ids; drawn from the catalog when absent.
    #[serde(default)]
    pub playlist: Option<Vec<String>>,
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub study_id: String,
    pub subject_id: String,
    pub total: usize,
    pub rated: usize,
    pub state: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum NextItem {
    Active {
        index: usize,
        total: usize,
        video_id: String,
        /// `None` once the item's media has been opened.
        media_url: Option<String>,
    },
    Complete {
        total: usize,
        rated: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct SubmitRating {
    pub video_id: String,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingAck {
    pub index: usize,
    pub video_id: String,
    pub rating: f64,
    pub remaining: usize,
    pub state: SessionState,
}

/// What a media request may send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaGrant {
    pub path: PathBuf,
    pub start: u64,
    /// Exclusive.
    pub end: u64,
    pub size: u64,
    pub partial: bool,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub playlist_size: usize,
    /// Where per-study CSV snapshots go; none when `None`.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            playlist_size: DEFAULT_PLAYLIST,
            snapshot_dir: None,
        }
    }
}

pub fn quantize_rating(r: f64) -> f64 {
    (r * 10.0).round() / 10.0
}

fn now_iso8601() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn valid_study_id(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}

#[derive(Debug)]
pub struct Registry {
    catalog: Catalog,
    settings: Settings,
    sessions: HashMap<String, Session>,
    /// Session ids in creation order.
    order: Vec<String>,
    tokens: HashMap<String, (String, usize)>,
    log: EventLog,
}

impl Registry {
    /// Build from a log and the events already in it.
    pub fn restore(
        catalog: Catalog,
        settings: Settings,
        log: EventLog,
        events: Vec<Event>,
    ) -> Result<Self, ServerError> {
        let mut r = Self {
            catalog,
            settings,
            sessions: HashMap::new(),
            order: Vec::new(),
            tokens: HashMap::new(),
            log,
        };
        for (i, ev) in events.into_iter().enumerate() {
            r.apply(ev, true)
                .map_err(|e| ServerError::Log(format!("event {}: {e}", i + 1)))?;
        }
        Ok(r)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn session(&self, id: &str) -> Result<&Session, ApiError> {
        self.sessions
            .get(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session '{id}'")))
    }

    /// Sessions in creation order.
    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.order.iter().map(|id| &self.sessions[id])
    }

    fn apply(&mut self, ev: Event, replay: bool) -> Result<(), String> {
        match ev {
            Event::SessionCreated {
                session_id,
                study_id,
                subject_id,
                playlist,
                created_at,
            } => {
                if self.sessions.contains_key(&session_id) {
                    return Err(format!("session '{session_id}' created twice"));
                }
                let n = playlist.len();
                self.order.push(session_id.clone());
                self.sessions.insert(
                    session_id.clone(),
                    Session {
                        id: session_id,
                        study_id,
                        subject_id,
                        playlist,
                        created_at,
                        ratings: Vec::new(),
                        grants: vec![None; n],
                    },
                );
            }
            Event::MediaIssued {
                session_id,
                index,
                token,
            } => {
                let s = self.sessions.get_mut(&session_id).ok_or("media for unknown session")?;
                let slot = s.grants.get_mut(index).ok_or("media index out of range")?;
                *slot = Some(Grant {
                    token: token.clone(),
                    opened: false,
                    served: Vec::new(),
                    revoked: false,
                });
                self.tokens.insert(token, (session_id, index));
            }
            Event::MediaOpened { token } => {
                let (sid, idx) = self.tokens.get(&token).cloned().ok_or("unknown media token")?;
                let g = self
                    .sessions
                    .get_mut(&sid)
                    .and_then(|s| s.grants[idx].as_mut())
                    .ok_or("no grant")?;
                g.opened = true;
                if replay {
                    // byte-level progress is not logged; treat the whole file as sent
                    g.served = vec![(0, u64::MAX)];
                }
            }
            Event::RatingSubmitted {
                session_id,
                index,
                video_id,
                rating,
                timestamp,
            } => {
                let s = self.sessions.get_mut(&session_id).ok_or("rating for unknown session")?;
                if index != s.cursor() || s.playlist.get(index) != Some(&video_id) {
                    return Err(format!("rating out of order in session '{session_id}'"));
                }
                if let Some(g) = s.grants[index].as_mut() {
                    g.revoked = true;
                }
                s.ratings.push(StoredRating {
                    video_id,
                    rating,
                    timestamp,
                });
            }
        }
        Ok(())
    }

    fn commit(&mut self, ev: Event) -> Result<(), ApiError> {
        self.log.append(&ev)?;
        self.apply(ev, false).map_err(ApiError::internal)
    }

    fn assigned(&self, study: &str, subject: &str) -> HashSet<&str> {
        self.sessions()
            .filter(|s| s.study_id == study && s.subject_id == subject)
            .flat_map(|s| s.playlist.iter().map(String::as_str))
            .collect()
    }

    pub fn create_session(&mut self, req: CreateSession) -> Result<SessionInfo, ApiError> {
        let subject = req.subject_id.trim().to_string();
        if subject.is_empty() || subject.len() > 128 || subject.chars().any(char::is_control) {
            return Err(ApiError::invalid("subject_id must be 1-128 printable characters"));
        }
        let study = req.study_id.unwrap_or_else(|| DEFAULT_STUDY.to_string());
        if !valid_study_id(&study) {
            return Err(ApiError::invalid("study_id must be 1-64 of [A-Za-z0-9._-]"));
        }
        let seed = req.seed.unwrap_or(self.settings.seed);
        let mut rng = XorShift64::new(fnv1a(subject.as_bytes()) ^ seed);
        let taken = self.assigned(&study, &subject);
        let mut playlist = match req.playlist {
            Some(list) => {
                self.check_playlist(&list, &taken)?;
                list
            }
            None => {
                let size = req.size.unwrap_or(self.settings.playlist_size);
                self.draw_playlist(size, &taken, &mut rng)?
            }
        };
        if playlist.is_empty() {
            return Err(ApiError::invalid("playlist is empty"));
        }
        rng.shuffle(&mut playlist);
        let session_id = uuid::Uuid::new_v4().to_string();
        self.commit(Event::SessionCreated {
            session_id: session_id.clone(),
            study_id: study,
            subject_id: subject,
            playlist,
            created_at: now_iso8601(),
        })?;
        Ok(self.sessions[&session_id].info())
    }

    fn check_playlist(&self, list: &[String], taken: &HashSet<&str>) -> Result<(), ApiError> {
        let mut groups: HashMap<&str, &str> = HashMap::new();
        for id in list {
            let item = self
                .catalog
                .get(id)
                .ok_or_else(|| ApiError::invalid(format!("video '{id}' is not in the catalog")))?;
            if taken.contains(id.as_str()) {
                return Err(ApiError::invalid(format!(
                    "video '{id}' was already assigned to this subject"
                )));
            }
            if let Some(prev) = groups.insert(item.source_group.as_str(), id.as_str()) {
                let code = if prev == id {
                    "duplicate_video"
                } else {
                    "content_overlap"
                };
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    code,
                    format!("'{prev}' and '{id}' share source group '{}'", item.source_group),
                ));
            }
        }
        Ok(())
    }

    /// One video from each of `size` groups not yet shown to the subject.
    fn draw_playlist(&self, size: usize, taken: &HashSet<&str>, rng: &mut XorShift64) -> Result<Vec<String>, ApiError> {
        let mut pools: Vec<Vec<&str>> = self
            .catalog
            .groups()
            .into_values()
            .map(|ids| ids.into_iter().filter(|id| !taken.contains(id)).collect::<Vec<_>>())
            .filter(|ids| !ids.is_empty())
            .collect();
        if pools.len() < size {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "insufficient_videos",
                format!("{} source groups available, {size} requested", pools.len()),
            ));
        }
        rng.shuffle(&mut pools);
        Ok(pools[..size]
            .iter()
            .map(|ids| ids[rng.below(ids.len())].to_string())
            .collect())
    }

    pub fn next_item(&mut self, id: &str) -> Result<NextItem, ApiError> {
        let s = self.session(id)?;
        let (total, index) = (s.playlist.len(), s.cursor());
        if index == total {
            return Ok(NextItem::Complete { total, rated: index });
        }
        let video_id = s.playlist[index].clone();
        let media_url = match &s.grants[index] {
            Some(g) if g.opened => None,
            Some(g) => Some(format!("/media/{}", g.token)),
            None => {
                let token = uuid::Uuid::new_v4().simple().to_string();
                self.commit(Event::MediaIssued {
                    session_id: id.to_string(),
                    index,
                    token: token.clone(),
                })?;
                Some(format!("/media/{token}"))
            }
        };
        Ok(NextItem::Active {
            index,
            total,
            video_id,
            media_url,
        })
    }

    pub fn submit_rating(&mut self, id: &str, req: SubmitRating) -> Result<RatingAck, ApiError> {
        if !(req.rating.is_finite() && (RATING_MIN..=RATING_MAX).contains(&req.rating)) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "rating_out_of_range",
                format!("rating {} is outside [1, 5]", req.rating),
            ));
        }
        let s = self.session(id)?;
        if s.ratings.iter().any(|r| r.video_id == req.video_id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "duplicate_rating",
                format!("'{}' is already rated in this session", req.video_id),
            ));
        }
        let index = s.cursor();
        if s.playlist.get(index) != Some(&req.video_id) {
            let at = s.playlist.iter().position(|v| *v == req.video_id);
            let msg = match at {
                Some(i) => format!("'{}' is item {i}, the session is at item {index}", req.video_id),
                None => format!("'{}' is not in this session", req.video_id),
            };
            return Err(ApiError::new(StatusCode::CONFLICT, "out_of_order", msg));
        }
        if !s.grants[index].as_ref().is_some_and(|g| g.opened) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "not_played",
                format!("'{}' has not been played yet", req.video_id),
            ));
        }
        let rating = quantize_rating(req.rating);
        self.commit(Event::RatingSubmitted {
            session_id: id.to_string(),
            index,
            video_id: req.video_id.clone(),
            rating,
            timestamp: now_iso8601(),
        })?;
        let s = &self.sessions[id];
        if s.state() == SessionState::Complete {
            let study = s.study_id.clone();
            self.write_snapshot(&study)?;
        }
        Ok(RatingAck {
            index,
            video_id: req.video_id,
            rating,
            remaining: s.playlist.len() - s.cursor(),
            state: s.state(),
        })
    }

    /// Check a media request against the token's single-exposure budget:
    /// every byte of the file goes out at most once, and nothing goes out
    /// after the item is rated.
    pub fn open_media(&mut self, token: &str, range: Option<ByteRange>) -> Result<MediaGrant, ApiError> {
        let gone = |msg: &str| ApiError::new(StatusCode::GONE, "media_consumed", msg.to_string());
        let (sid, idx) = self
            .tokens
            .get(token)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_token", "no such media token"))?;
        let s = &self.sessions[&sid];
        let path = self
            .catalog
            .get(&s.playlist[idx])
            .ok_or_else(|| ApiError::internal(format!("'{}' left the catalog", s.playlist[idx])))?
            .path
            .clone();
        let size = std::fs::metadata(&path).map_err(ApiError::internal)?.len();
        let (start, end, partial) = match range {
            None => (0, size, false),
            Some(r) => {
                let (a, b) = r.resolve(size).ok_or_else(|| ApiError {
                    unsatisfied_size: Some(size),
                    ..ApiError::new(
                        StatusCode::RANGE_NOT_SATISFIABLE,
                        "bad_range",
                        format!("file has {size} bytes"),
                    )
                })?;
                (a, b, true)
            }
        };
        let g = s.grants[idx].as_ref().expect("token maps to a grant");
        if g.revoked {
            return Err(gone("item already rated"));
        }
        if g.served.iter().any(|&(a, b)| start < b && a < end) {
            return Err(gone("these bytes were already delivered"));
        }
        let first = !g.opened;
        if first {
            self.commit(Event::MediaOpened {
                token: token.to_string(),
            })?;
        }
        let g = self.sessions.get_mut(&sid).unwrap().grants[idx].as_mut().unwrap();
        g.served.push((start, end));
        Ok(MediaGrant {
            path,
            start,
            end,
            size,
            partial,
        })
    }

    /// Ratings of the study's completed sessions in the ratings CSV
    /// schema, by session creation order then playlist position.
    pub fn export_csv(&self, study: &str) -> Result<Vec<u8>, ApiError> {
        let records: Vec<RatingRecord> = self
            .sessions()
            .filter(|s| s.study_id == study && s.state() == SessionState::Complete)
            .flat_map(|s| {
                s.ratings.iter().map(|r| RatingRecord {
                    subject_id: s.subject_id.clone(),
                    video_id: r.video_id.clone(),
                    rating: r.rating,
                    timestamp: r.timestamp.clone(),
                })
            })
            .collect();
        let mut out = Vec::new();
        write_ratings_csv(&records, &mut out).map_err(ApiError::internal)?;
        Ok(out)
    }

    pub fn studies(&self) -> BTreeSet<&str> {
        self.sessions().map(|s| s.study_id.as_str()).collect()
    }

    fn write_snapshot(&self, study: &str) -> Result<(), ApiError> {
        let Some(dir) = &self.settings.snapshot_dir else {
            return Ok(());
        };
        let bytes = self.export_csv(study)?;
        std::fs::create_dir_all(dir).map_err(ApiError::internal)?;
        let tmp = dir.join(format!(".{study}.csv.tmp"));
        std::fs::write(&tmp, bytes).map_err(ApiError::internal)?;
        std::fs::rename(&tmp, dir.join(format!("{study}.csv"))).map_err(ApiError::internal)?;
        Ok(())
    }
}

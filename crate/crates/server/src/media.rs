//! Byte ranges and media responses.

use std::io::{Read, Seek, SeekFrom};
use std::path::Path;

/// A single `Range: bytes=` spec. Bounds are inclusive as on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteRange {
    /// `a-b` or `a-`.
    From(u64, Option<u64>),
    /// `-n`: the last n bytes.
    Suffix(u64),
}

impl ByteRange {
    /// Parse a `Range` header value. Multi-range requests and other units
    /// are refused rather than ignored, since ignoring one would send the
    /// whole file.
    pub fn parse(header: &str) -> Option<Self> {
        let spec = header.trim().strip_prefix("bytes=")?.trim();
        if spec.contains(',') {
            return None;
        }
        let (a, b) = spec.split_once('-')?;
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() {
            return b.parse().ok().map(ByteRange::Suffix);
        }
        let start = a.parse().ok()?;
        if b.is_empty() {
            return Some(ByteRange::From(start, None));
        }
        let end = b.parse().ok()?;
        (end >= start).then_some(ByteRange::From(start, Some(end)))
    }

    /// Half-open `[start, end)` within a file of `size` bytes, or `None`
    /// when unsatisfiable.
    pub fn resolve(self, size: u64) -> Option<(u64, u64)> {
        match self {
            ByteRange::From(a, _) if a >= size => None,
            ByteRange::From(a, b) => Some((a, b.map_or(size, |b| b.min(size - 1) + 1))),
            ByteRange::Suffix(0) => None,
            ByteRange::Suffix(_) if size == 0 => None,
            ByteRange::Suffix(n) => Some((size.saturating_sub(n), size)),
        }
    }
}

pub fn content_type(path: &Path) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "mp4" | "m4v" => "video/mp4",
        "webm" => "video/webm",
        "mov" => "video/quicktime",
        "mkv" => "video/x-matroska",
        "y4m" => "video/x-yuv4mpeg",
        "png" => "image/png",
        _ => "application/octet-stream",
    }
}

/// Read `[start, end)` of a file.
pub fn read_span(path: &Path, start: u64, end: u64) -> std::io::Result<Vec<u8>> {
    let mut f = std::fs::File::open(path)?;
    f.seek(SeekFrom::Start(start))?;
    let mut buf = Vec::with_capacity((end - start) as usize);
    f.take(end - start).read_to_end(&mut buf)?;
    if (buf.len() as u64) != end - start {
        return Err(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "media file shrank",
        ));
    }
    Ok(buf)
}

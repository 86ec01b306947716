//! YUV4MPEG2 reading and writing with BT.601 full-range colour conversion.
//!
//! Only 8-bit 4:2:0 and 4:4:4 are accepted. Parsed frames keep their YUV
//! planes so that writing a parsed sequence back reproduces the input
//! planes exactly; sequences built from RGB are written as 4:4:4.

use std::io::Write;
use std::path::Path;

use super::{ChromaSampling, Frame, FrameRate, FrameSequence, MediaError, SourcePlanes, MIN_FRAME_EDGE};

const MAGIC: &[u8] = b"YUV4MPEG2";
const FRAME_TAG: &[u8] = b"FRAME";

struct Header {
    width: usize,
    height: usize,
    rate: FrameRate,
    chroma: ChromaSampling,
    /// Offset of the first byte after the header line.
    end: usize,
}

fn parse_err(offset: usize, message: impl Into<String>) -> MediaError {
    MediaError::Parse {
        offset,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, MediaError> {
    if !bytes.starts_with(MAGIC) {
        return Err(parse_err(0, "missing YUV4MPEG2 signature"));
    }
    let line_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(bytes.len(), "header line is not terminated"))?;
    let line = &bytes[..line_end];

    let mut width = None;
    let mut height = None;
    let mut rate = None;
    let mut chroma = ChromaSampling::Cs420;

    let mut pos = MAGIC.len();
    while pos < line.len() {
        if line[pos] != b' ' {
            return Err(parse_err(pos, "expected a space before header parameter"));
        }
        pos += 1;
        let start = pos;
        while pos < line.len() && line[pos] != b' ' {
            pos += 1;
        }
        let token = &line[start..pos];
        let Some((&tag, value)) = token.split_first() else {
            return Err(parse_err(start, "empty header parameter"));
        };
        let value = std::str::from_utf8(value).map_err(|_| parse_err(start, "non-ASCII header parameter"))?;
        match tag {
            b'W' => width = Some(parse_dim(value, start)?),
            b'H' => height = Some(parse_dim(value, start)?),
            b'F' => {
                let (n, d) = value
                    .split_once(':')
                    .ok_or_else(|| parse_err(start, format!("frame rate '{value}' is not num:den")))?;
                let n: u32 = n
                    .parse()
                    .map_err(|_| parse_err(start, format!("bad frame rate numerator '{n}'")))?;
                let d: u32 = d
                    .parse()
                    .map_err(|_| parse_err(start, format!("bad frame rate denominator '{d}'")))?;
                rate = Some(FrameRate::new(n, d).map_err(|e| parse_err(start, e.to_string()))?);
            }
            b'C' => {
                chroma = match value {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => ChromaSampling::Cs420,
                    "444" => ChromaSampling::Cs444,
                    other => {
                        return Err(MediaError::Unsupported(format!(
                            "colorspace C{other} at byte {start}; only 8-bit 4:2:0 and 4:4:4 are supported"
                        )))
                    }
                }
            }
            // Interlacing, aspect ratio and extensions do not affect decoding.
            b'I' | b'A' | b'X' => {}
            other => {
                return Err(parse_err(
                    start,
                    format!("unknown header parameter '{}'", other as char),
                ))
            }
        }
    }

    let width = width.ok_or_else(|| parse_err(line_end, "header lacks W"))?;
    let height = height.ok_or_else(|| parse_err(line_end, "header lacks H"))?;
    let rate = rate.ok_or_else(|| parse_err(line_end, "header lacks F"))?;
    if width < MIN_FRAME_EDGE || height < MIN_FRAME_EDGE {
        return Err(parse_err(
            line_end,
            format!("{width}x{height} is below the {MIN_FRAME_EDGE}x{MIN_FRAME_EDGE} minimum"),
        ));
    }
    Ok(Header {
        width,
        height,
        rate,
        chroma,
        end: line_end + 1,
    })
}

fn parse_dim(value: &str, offset: usize) -> Result<usize, MediaError> {
    value
        .parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| parse_err(offset, format!("bad dimension '{value}'")))
}

#[inline]
fn yuv_to_rgb(y: u8, u: u8, v: u8) -> [u8; 3] {
    let y = y as f64;
    let u = u as f64 - 128.0;
    let v = v as f64 - 128.0;
    let c = |x: f64| x.round().clamp(0.0, 255.0) as u8;
    [c(y + 1.402 * v), c(y - 0.344136 * u - 0.714136 * v), c(y + 1.772 * u)]
}

#[inline]
fn rgb_to_yuv(p: [u8; 3]) -> [u8; 3] {
    let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
    let c = |x: f64| x.round().clamp(0.0, 255.0) as u8;
    [
        c(0.299 * r + 0.587 * g + 0.114 * b),
        c(-0.168736 * r - 0.331264 * g + 0.5 * b + 128.0),
        c(0.5 * r - 0.418688 * g - 0.081312 * b + 128.0),
    ]
}

fn decode_planes(
    planes: &[u8],
    width: usize,
    height: usize,
    chroma: ChromaSampling,
    index: usize,
) -> Result<Frame, MediaError> {
    let (cw, ch) = chroma.chroma_dims(width, height);
    let (luma, rest) = planes.split_at(width * height);
    let (u_plane, v_plane) = rest.split_at(cw * ch);
    let shift = match chroma {
        ChromaSampling::Cs420 => 1,
        ChromaSampling::Cs444 => 0,
    };
    let mut rgb = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        let crow = (y >> shift) * cw;
        for x in 0..width {
            let ci = crow + (x >> shift);
            rgb.extend_from_slice(&yuv_to_rgb(luma[y * width + x], u_plane[ci], v_plane[ci]));
        }
    }
    Ok(Frame::new(width, height, rgb, index)?.with_source(SourcePlanes {
        chroma,
        data: planes.to_vec(),
    }))
}

/// Parse a complete YUV4MPEG2 file held in memory.
pub fn parse_y4m(bytes: &[u8]) -> Result<FrameSequence, MediaError> {
    let header = parse_header(bytes)?;
    let payload = header.chroma.frame_bytes(header.width, header.height);
    let mut frames = Vec::new();
    let mut pos = header.end;
    while pos < bytes.len() {
        let index = frames.len();
        let rest = &bytes[pos..];
        if !rest.starts_with(FRAME_TAG) {
            if FRAME_TAG.starts_with(rest) {
                return Err(MediaError::Truncated {
                    frame_index: index,
                    expected: payload,
                    available: 0,
                });
            }
            return Err(parse_err(pos, "expected FRAME marker"));
        }
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(MediaError::Truncated {
                frame_index: index,
                expected: payload,
                available: 0,
            });
        };
        if nl != FRAME_TAG.len() && rest[FRAME_TAG.len()] != b' ' {
            return Err(parse_err(pos, "malformed FRAME marker"));
        }
        let start = pos + nl + 1;
        let available = bytes.len() - start;
        if available < payload {
            return Err(MediaError::Truncated {
                frame_index: index,
                expected: payload,
                available,
            });
        }
        frames.push(decode_planes(
            &bytes[start..start + payload],
            header.width,
            header.height,
            header.chroma,
            index,
        )?);
        pos = start + payload;
    }
    FrameSequence::new(frames, header.rate)
}

pub fn read_y4m(path: impl AsRef<Path>) -> Result<FrameSequence, MediaError> {
    parse_y4m(&std::fs::read(path)?)
}

/// Serialize a sequence. Frames that all carry source planes of one layout
/// are written verbatim in that layout; otherwise RGB is converted to 4:4:4.
pub fn write_y4m<W: Write>(seq: &FrameSequence, mut out: W) -> Result<(), MediaError> {
    let Some(first) = seq.frames().first() else {
        return Err(MediaError::InvalidFrame("cannot write an empty sequence".into()));
    };
    let verbatim = first
        .source()
        .map(|s| s.chroma)
        .filter(|&c| seq.frames().iter().all(|f| f.source().map(|s| s.chroma) == Some(c)));
    let chroma = verbatim.unwrap_or(ChromaSampling::Cs444);
    let tag = match chroma {
        ChromaSampling::Cs420 => "420jpeg",
        ChromaSampling::Cs444 => "444",
    };
    let rate = seq.rate();
    writeln!(
        out,
        "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 C{}",
        first.width(),
        first.height(),
        rate.num,
        rate.den,
        tag
    )?;
    let plane = first.width() * first.height();
    let mut buf = vec![0u8; 3 * plane];
    for frame in seq.frames() {
        out.write_all(b"FRAME\n")?;
        match (verbatim, frame.source()) {
            (Some(_), Some(src)) => out.write_all(&src.data)?,
            _ => {
                for (i, p) in frame.rgb().chunks_exact(3).enumerate() {
                    let [y, u, v] = rgb_to_yuv([p[0], p[1], p[2]]);
                    buf[i] = y;
                    buf[plane + i] = u;
                    buf[2 * plane + i] = v;
                }
                out.write_all(&buf)?;
            }
        }
    }
    Ok(())
}

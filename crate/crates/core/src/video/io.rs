//! Line-oriented trace files.
//!
//! ```text
//! seq news.cif 352 288 30
//! pkt 1 1 1 812 3.104221 3.050000
//! ...
//! end 5493
//! ```
//!
//! `#` starts a comment line. The `end` trailer is written on save and
//! checked when present.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{VideoPacket, VideoSequence};
use crate::{Error, Result};

pub fn write_trace(seq: &VideoSequence, out: &mut impl Write) -> Result<()> {
    if seq.name.is_empty() || seq.name.chars().any(char::is_whitespace) {
        return Err(Error::InvalidInput(format!(
            "sequence name {:?} must be a single non-empty token",
            seq.name
        )));
    }
    let mut buf = String::new();
    writeln!(buf, "seq {} {} {} {}", seq.name, seq.width, seq.height, seq.frame_rate).unwrap();
    for p in seq.packets() {
        writeln!(
            buf,
            "pkt {} {} {} {} {:.6} {:.6}",
            p.segment, p.frame, p.index, p.size, p.importance, p.ref_fraction
        )
        .unwrap();
    }
    writeln!(buf, "end {}", seq.packet_count()).unwrap();
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn save_trace(seq: &VideoSequence, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trace(seq, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<VideoSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_trace(&text, path)
}

fn field<T: std::str::FromStr>(tok: &str, what: &str, path: &Path, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad {what} `{tok}`"),
    })
}

/// Parse trace text. `path` only labels error messages.
pub fn parse_trace(text: &str, path: impl AsRef<Path>) -> Result<VideoSequence> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let err = |line: usize, message: String| Error::Parse {
        path: path.clone(),
        line,
        message,
    };

    let mut header: Option<(String, u32, u32, u32)> = None;
    let mut segments: Vec<Vec<VideoPacket>> = Vec::new();
    let mut count = 0usize;
    let mut trailer: Option<usize> = None;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() || toks[0].starts_with('#') {
            continue;
        }
        if trailer.is_some() {
            return Err(err(line, "content after `end` trailer".into()));
        }
        match toks[0] {
            "seq" => {
                if header.is_some() {
                    return Err(err(line, "duplicate `seq` header".into()));
                }
                if toks.len() != 5 {
                    return Err(err(line, format!("`seq` needs 4 fields, found {}", toks.len() - 1)));
                }
                let w: u32 = field(toks[2], "width", &path, line)?;
                let h: u32 = field(toks[3], "height", &path, line)?;
                let fps: u32 = field(toks[4], "frame rate", &path, line)?;
                if w == 0 || h == 0 || fps == 0 {
                    return Err(err(line, "dimensions and frame rate must be positive".into()));
                }
                header = Some((toks[1].to_string(), w, h, fps));
            }
            "pkt" => {
                if header.is_none() {
                    return Err(err(line, "`pkt` before `seq` header".into()));
                }
                if toks.len() != 7 {
                    return Err(err(line, format!("`pkt` needs 6 fields, found {}", toks.len() - 1)));
                }
                let segment: u32 = field(toks[1], "segment", &path, line)?;
                let frame: u32 = field(toks[2], "frame", &path, line)?;
                let index: u32 = field(toks[3], "packet index", &path, line)?;
                let size: u32 = field(toks[4], "size", &path, line)?;
                let importance: f64 = field(toks[5], "importance", &path, line)?;
                let ref_fraction: f64 = field(toks[6], "ref_fraction", &path, line)?;
                count += 1;
                if size == 0 {
                    return Err(Error::Validation {
                        path: path.clone(),
                        packet: count,
                        message: format!("segment {segment} frame {frame} packet {index} has size 0"),
                    });
                }
                if !(importance >= 0.0 && importance.is_finite())
                    || !(ref_fraction >= 0.0 && ref_fraction.is_finite())
                {
                    return Err(Error::Validation {
                        path: path.clone(),
                        packet: count,
                        message: "importance and reference fraction must be finite and non-negative".into(),
                    });
                }
                if frame == 0 || index == 0 {
                    return Err(err(line, "frame and packet indices are 1-based".into()));
                }
                let seg = segment as usize;
                if seg == 0 || seg < segments.len() || seg > segments.len() + 1 {
                    return Err(err(
                        line,
                        format!("segment {segment} out of order after segment {}", segments.len()),
                    ));
                }
                if seg > segments.len() {
                    segments.push(Vec::new());
                }
                segments[seg - 1].push(VideoPacket {
                    segment,
                    frame,
                    index,
                    size,
                    ref_fraction,
                    importance,
                });
            }
            "end" => {
                if toks.len() != 2 {
                    return Err(err(line, "`end` needs a packet count".into()));
                }
                let n: usize = field(toks[1], "packet count", &path, line)?;
                if n != count {
                    return Err(err(line, format!("trailer promises {n} packets, read {count}")));
                }
                trailer = Some(n);
            }
            other => return Err(err(line, format!("unknown record `{other}`"))),
        }
    }

    if !text.is_empty() && !text.ends_with('\n') {
        return Err(err(last_line, "truncated record (no final newline)".into()));
    }
    let (name, width, height, frame_rate) =
        header.ok_or_else(|| err(last_line.max(1), "missing `seq` header".into()))?;
    if segments.is_empty() {
        return Err(err(last_line.max(1), "no packets".into()));
    }
    let frames_per_segment = segments.iter().flatten().map(|p| p.frame).max().unwrap_or(1);
    Ok(VideoSequence {
        name,
        width,
        height,
        frame_rate,
        frames_per_segment,
        segments,
    })
}

//! Stereo WAV decoding, annotation manifests, and one-second segmentation.

use std::collections::BTreeMap;
use std::fmt;

use stereoclust_core::channel::StereoSegment;

/// A decoded two-channel recording with samples scaled to `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoSignal {
    pub sample_rate: u32,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl StereoSignal {
    pub fn new(sample_rate: u32, left: Vec<f64>, right: Vec<f64>) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::Decode("sample rate must be positive".into()));
        }
        if left.len() != right.len() {
            return Err(AudioError::Decode(format!(
                "channel lengths differ: {} vs {}",
                left.len(),
                right.len()
            )));
        }
        if left.iter().chain(right.iter()).any(|v| !v.is_finite()) {
            return Err(AudioError::NonFinite);
        }
        Ok(StereoSignal {
            sample_rate,
            left,
            right,
        })
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.left.len() as f64 / self.sample_rate as f64
    }
}

/// One annotated speaking region: `speaker_id` talks from `start` to `end`
/// seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceSpan {
    pub speaker_id: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("malformed WAV: {0}")]
    Decode(String),
    #[error("expected 2 channels, found {found}")]
    ChannelCount { found: u16 },
    #[error("unsupported sample format: tag {format_tag}, {bits} bits")]
    UnsupportedFormat { format_tag: u16, bits: u16 },
    #[error("samples are not finite")]
    NonFinite,
    #[error("span {speaker_id} [{start}, {end}) exceeds the {duration:.3}s signal")]
    Range {
        speaker_id: String,
        start: f64,
        end: f64,
        duration: f64,
    },
    #[error("span {speaker_id} has end <= start ({start} >= {end})")]
    InvalidSpan {
        speaker_id: String,
        start: f64,
        end: f64,
    },
}

fn take(bytes: &[u8], at: usize, len: usize) -> Result<&[u8], AudioError> {
    bytes
        .get(at..at + len)
        .ok_or_else(|| AudioError::Decode(format!("truncated at byte {at}")))
}

fn u16_at(bytes: &[u8], at: usize) -> Result<u16, AudioError> {
    Ok(u16::from_le_bytes(take(bytes, at, 2)?.try_into().unwrap()))
}

fn u32_at(bytes: &[u8], at: usize) -> Result<u32, AudioError> {
    Ok(u32::from_le_bytes(take(bytes, at, 4)?.try_into().unwrap()))
}

const WAVE_FORMAT_PCM: u16 = 0x0001;
const WAVE_FORMAT_IEEE_FLOAT: u16 = 0x0003;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decodes a 2-channel RIFF/WAVE byte stream.
///
/// Accepts 16/24/32-bit integer PCM and 32-bit float; integer samples are
/// scaled by the format's maximum magnitude, channel 0 becomes left and
/// channel 1 right.
pub fn decode_wav(bytes: &[u8]) -> Result<StereoSignal, AudioError> {
    if take(bytes, 0, 4)? != b"RIFF" || take(bytes, 8, 4)? != b"WAVE" {
        return Err(AudioError::Decode("missing RIFF/WAVE header".into()));
    }

    let mut format: Option<(u16, u16, u32)> = None; // (tag, bits, rate) after channel check
    let mut cursor = 12usize;
    while cursor + 8 <= bytes.len() {
        let chunk_id = take(bytes, cursor, 4)?;
        let chunk_len = u32_at(bytes, cursor + 4)? as usize;
        let body = cursor + 8;
        match chunk_id {
            b"fmt " => {
                if chunk_len < 16 {
                    return Err(AudioError::Decode("fmt chunk too short".into()));
                }
                let mut tag = u16_at(bytes, body)?;
                let channels = u16_at(bytes, body + 2)?;
                let rate = u32_at(bytes, body + 4)?;
                let bits = u16_at(bytes, body + 14)?;
                if tag == WAVE_FORMAT_EXTENSIBLE {
                    // the real format lives in the first two bytes of the
                    // extension's SubFormat GUID
                    if chunk_len < 40 {
                        return Err(AudioError::Decode("extensible fmt chunk too short".into()));
                    }
                    tag = u16_at(bytes, body + 24)?;
                }
                if channels != 2 {
                    return Err(AudioError::ChannelCount { found: channels });
                }
                if rate == 0 {
                    return Err(AudioError::Decode("sample rate is zero".into()));
                }
                format = Some((tag, bits, rate));
            }
            b"data" => {
                let (tag, bits, rate) = format
                    .ok_or_else(|| AudioError::Decode("data chunk before fmt chunk".into()))?;
                let data = take(bytes, body, chunk_len)?;
                return decode_frames(tag, bits, rate, data);
            }
            _ => {}
        }
        // chunks are word-aligned
        cursor = body + chunk_len + (chunk_len & 1);
    }
    Err(AudioError::Decode("no data chunk".into()))
}

fn decode_frames(tag: u16, bits: u16, rate: u32, data: &[u8]) -> Result<StereoSignal, AudioError> {
    let bytes_per_sample = match (tag, bits) {
        (WAVE_FORMAT_PCM, 16) => 2,
        (WAVE_FORMAT_PCM, 24) => 3,
        (WAVE_FORMAT_PCM, 32) => 4,
        (WAVE_FORMAT_IEEE_FLOAT, 32) => 4,
        _ => {
            return Err(AudioError::UnsupportedFormat {
                format_tag: tag,
                bits,
            })
        }
    };
    let frame_bytes = bytes_per_sample * 2;
    if !data.len().is_multiple_of(frame_bytes) {
        return Err(AudioError::Decode(format!(
            "data length {} is not a whole number of stereo frames",
            data.len()
        )));
    }
    let frames = data.len() / frame_bytes;
    let mut left = Vec::with_capacity(frames);
    let mut right = Vec::with_capacity(frames);
    for f in 0..frames {
        for (ch, out) in [&mut left, &mut right].into_iter().enumerate() {
            let at = f * frame_bytes + ch * bytes_per_sample;
            let sample = match (tag, bits) {
                (WAVE_FORMAT_PCM, 16) => {
                    i16::from_le_bytes(data[at..at + 2].try_into().unwrap()) as f64 / 32768.0
                }
                (WAVE_FORMAT_PCM, 24) => {
                    let raw = (data[at] as i32)
                        | ((data[at + 1] as i32) << 8)
                        | (((data[at + 2] as i8) as i32) << 16);
                    raw as f64 / 8388608.0
                }
                (WAVE_FORMAT_PCM, 32) => {
                    i32::from_le_bytes(data[at..at + 4].try_into().unwrap()) as f64 / 2147483648.0
                }
                (WAVE_FORMAT_IEEE_FLOAT, 32) => {
                    f32::from_le_bytes(data[at..at + 4].try_into().unwrap()) as f64
                }
                _ => unreachable!(),
            };
            out.push(sample);
        }
    }
    StereoSignal::new(rate, left, right)
}

/// Encodes a stereo signal as 16-bit PCM WAV bytes. Samples are clamped to
/// `[-1, 1]` before quantization.
pub fn encode_wav_pcm16(signal: &StereoSignal) -> Vec<u8> {
    let frames = signal.len();
    let data_len = (frames * 4) as u32;
    let mut out = Vec::with_capacity(44 + frames * 4);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate * 4).to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for f in 0..frames {
        for sample in [signal.left[f], signal.right[f]] {
            let q = (sample.clamp(-1.0, 1.0) * 32767.0).round() as i16;
            out.extend_from_slice(&q.to_le_bytes());
        }
    }
    out
}

/// Manifest parse failure, with the 1-based line it came from.
#[derive(Debug, PartialEq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ManifestError {
    pub line: usize,
    pub kind: ManifestErrorKind,
}

#[derive(Debug, PartialEq)]
pub enum ManifestErrorKind {
    WrongFieldCount { found: usize },
    EmptySpeaker,
    BadNumber { field: &'static str, value: String },
    NegativeStart { start: f64 },
    EmptySpan { start: f64, end: f64 },
    Overlap { other_line: usize },
}

impl fmt::Display for ManifestErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestErrorKind::WrongFieldCount { found } => {
                write!(
                    f,
                    "expected speaker_id,start_s,end_s but found {found} fields"
                )
            }
            ManifestErrorKind::EmptySpeaker => write!(f, "empty speaker id"),
            ManifestErrorKind::BadNumber { field, value } => {
                write!(f, "cannot parse {field} from {value:?}")
            }
            ManifestErrorKind::NegativeStart { start } => {
                write!(f, "start must be non-negative, got {start}")
            }
            ManifestErrorKind::EmptySpan { start, end } => {
                write!(f, "end must be greater than start ({start} >= {end})")
            }
            ManifestErrorKind::Overlap { other_line } => {
                write!(f, "span overlaps the one on line {other_line}")
            }
        }
    }
}

/// Parses a `speaker_id,start_s,end_s` manifest. `#` lines and blank lines
/// are ignored; spans must not overlap each other.
pub fn load_manifest(text: &str) -> Result<Vec<UtteranceSpan>, ManifestError> {
    let mut spans: Vec<(usize, UtteranceSpan)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(ManifestError {
                line,
                kind: ManifestErrorKind::WrongFieldCount {
                    found: fields.len(),
                },
            });
        }
        let speaker_id = fields[0].trim().to_string();
        if speaker_id.is_empty() {
            return Err(ManifestError {
                line,
                kind: ManifestErrorKind::EmptySpeaker,
            });
        }
        let parse = |field: &'static str, value: &str| -> Result<f64, ManifestError> {
            let parsed: f64 = value.trim().parse().map_err(|_| ManifestError {
                line,
                kind: ManifestErrorKind::BadNumber {
                    field,
                    value: value.trim().to_string(),
                },
            })?;
            if !parsed.is_finite() {
                return Err(ManifestError {
                    line,
                    kind: ManifestErrorKind::BadNumber {
                        field,
                        value: value.trim().to_string(),
                    },
                });
            }
            Ok(parsed)
        };
        let start = parse("start_s", fields[1])?;
        let end = parse("end_s", fields[2])?;
        if start < 0.0 {
            return Err(ManifestError {
                line,
                kind: ManifestErrorKind::NegativeStart { start },
            });
        }
        if end <= start {
            return Err(ManifestError {
                line,
                kind: ManifestErrorKind::EmptySpan { start, end },
            });
        }
        for (other_line, other) in &spans {
            if start < other.end && other.start < end {
                return Err(ManifestError {
                    line,
                    kind: ManifestErrorKind::Overlap {
                        other_line: *other_line,
                    },
                });
            }
        }
        spans.push((
            line,
            UtteranceSpan {
                speaker_id,
                start,
                end,
            },
        ));
    }
    Ok(spans.into_iter().map(|(_, span)| span).collect())
}

/// Cuts each span into whole one-second stereo segments and groups them per
/// speaker.
///
/// Span boundaries round to the nearest sample; the trailing remainder
/// shorter than a second is discarded, and a segment never straddles two
/// spans. Segments of one speaker are concatenated across spans in file
/// order, with 1-based indices.
pub fn cut_and_segment(
    signal: &StereoSignal,
    spans: &[UtteranceSpan],
) -> Result<BTreeMap<String, Vec<StereoSegment>>, AudioError> {
    let rate = signal.sample_rate as usize;
    let mut out: BTreeMap<String, Vec<StereoSegment>> = BTreeMap::new();
    for span in spans {
        if span.end <= span.start || span.start < 0.0 {
            return Err(AudioError::InvalidSpan {
                speaker_id: span.speaker_id.clone(),
                start: span.start,
                end: span.end,
            });
        }
        let start_sample = (span.start * signal.sample_rate as f64).round() as usize;
        let end_sample = (span.end * signal.sample_rate as f64).round() as usize;
        if end_sample > signal.len() {
            return Err(AudioError::Range {
                speaker_id: span.speaker_id.clone(),
                start: span.start,
                end: span.end,
                duration: signal.duration_seconds(),
            });
        }
        let segments = out.entry(span.speaker_id.clone()).or_default();
        let whole_seconds = (end_sample - start_sample) / rate;
        for k in 0..whole_seconds {
            let lo = start_sample + k * rate;
            let hi = lo + rate;
            let segment = StereoSegment::new(
                span.speaker_id.clone(),
                segments.len() + 1,
                signal.left[lo..hi].to_vec(),
                signal.right[lo..hi].to_vec(),
                signal.sample_rate,
            )
            .expect("slices are exactly one second of finite samples");
            segments.push(segment);
        }
    }
    Ok(out)
}

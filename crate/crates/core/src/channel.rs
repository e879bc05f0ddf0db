//! Per-segment signal variants built from the left and right channels.
//!
//! Each one-second stereo segment yields four single-channel views: the mono
//! baseline `(L+R)/2`, the plain channel sum `L+R`, the time concatenation
//! `[L ‖ R]`, and the sum/difference concatenation `[(L+R) ‖ (L−R)]`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// How the two channels of a segment are combined into one signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CombinationMethod {
    Mono,
    Sum,
    Hstack,
    Sumdif,
}

impl CombinationMethod {
    pub const ALL: [CombinationMethod; 4] = [
        CombinationMethod::Mono,
        CombinationMethod::Sum,
        CombinationMethod::Hstack,
        CombinationMethod::Sumdif,
    ];

    /// Canonical upper-case label, as used in embedding file headers.
    pub fn label(self) -> &'static str {
        match self {
            CombinationMethod::Mono => "MONO",
            CombinationMethod::Sum => "SUM",
            CombinationMethod::Hstack => "HSTACK",
            CombinationMethod::Sumdif => "SUMDIF",
        }
    }

    /// Output length for a segment of `samples_per_channel` samples. The
    /// concatenating methods double the duration, the others keep it.
    pub fn output_len(self, samples_per_channel: usize) -> usize {
        match self {
            CombinationMethod::Mono | CombinationMethod::Sum => samples_per_channel,
            CombinationMethod::Hstack | CombinationMethod::Sumdif => 2 * samples_per_channel,
        }
    }
}

impl fmt::Display for CombinationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CombinationMethod {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, UnknownMethod> {
        match s {
            "MONO" => Ok(CombinationMethod::Mono),
            "SUM" => Ok(CombinationMethod::Sum),
            "HSTACK" => Ok(CombinationMethod::Hstack),
            "SUMDIF" => Ok(CombinationMethod::Sumdif),
            _ => Err(UnknownMethod),
        }
    }
}

/// Parse error for [`CombinationMethod`] labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown combination method (expected MONO, SUM, HSTACK or SUMDIF)")]
pub struct UnknownMethod;

/// One second of two-channel audio attributed to one speaker.
///
/// Both channels hold exactly `sample_rate` samples; `index` is the 1-based
/// ordinal of the segment within the speaker's utterance stream.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoSegment {
    pub speaker_id: String,
    pub index: usize,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: u32,
}

/// Violation of the one-second two-channel segment contract.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SegmentError {
    #[error("segment channels must each hold exactly sample_rate ({expected}) samples, got left={left}, right={right}")]
    BadLength {
        expected: usize,
        left: usize,
        right: usize,
    },
    #[error("segment contains non-finite samples")]
    NonFinite,
    #[error("sample rate must be positive")]
    ZeroRate,
}

impl StereoSegment {
    pub fn new(
        speaker_id: String,
        index: usize,
        left: Vec<f64>,
        right: Vec<f64>,
        sample_rate: u32,
    ) -> Result<Self, SegmentError> {
        if sample_rate == 0 {
            return Err(SegmentError::ZeroRate);
        }
        let expected = sample_rate as usize;
        if left.len() != expected || right.len() != expected {
            return Err(SegmentError::BadLength {
                expected,
                left: left.len(),
                right: right.len(),
            });
        }
        if left.iter().chain(right.iter()).any(|v| !v.is_finite()) {
            return Err(SegmentError::NonFinite);
        }
        Ok(StereoSegment {
            speaker_id,
            index,
            left,
            right,
            sample_rate,
        })
    }
}

/// A single-channel sample vector produced by one [`CombinationMethod`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedSignal {
    pub speaker_id: String,
    pub index: usize,
    pub method: CombinationMethod,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

/// Combines the two channels of `segment` according to `method`.
///
/// Total over valid segments; SUM and SUMDIF are deliberately left
/// unnormalized, so their samples can leave `[-1, 1]`.
pub fn combine(segment: &StereoSegment, method: CombinationMethod) -> ProcessedSignal {
    let l = &segment.left;
    let r = &segment.right;
    let samples = match method {
        CombinationMethod::Mono => l.iter().zip(r).map(|(a, b)| (a + b) / 2.0).collect(),
        CombinationMethod::Sum => l.iter().zip(r).map(|(a, b)| a + b).collect(),
        CombinationMethod::Hstack => {
            let mut out = Vec::with_capacity(2 * l.len());
            out.extend_from_slice(l);
            out.extend_from_slice(r);
            out
        }
        CombinationMethod::Sumdif => {
            let mut out = Vec::with_capacity(2 * l.len());
            out.extend(l.iter().zip(r).map(|(a, b)| a + b));
            out.extend(l.iter().zip(r).map(|(a, b)| a - b));
            out
        }
    };
    ProcessedSignal {
        speaker_id: segment.speaker_id.clone(),
        index: segment.index,
        method,
        samples,
        sample_rate: segment.sample_rate,
    }
}

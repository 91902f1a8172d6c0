//! The two network decoders.
//!
//! Direct decoding partitions the coded frame into non-overlapping windows
//! and classifies each independently. Ensemble decoding pads the frame,
//! slides the window two coded bits at a time, and lets the K windows
//! covering each information bit vote on it. Both emit the information
//! sequence with the terminated tail stripped, and both can run over
//! contiguous frame partitions with bit-identical results.

use crate::channel::SoftFrame;
use crate::dataset::WindowConfig;
use crate::error::{Error, Result};
use crate::mlp::{MlpModel, DEFAULT_INPUT_CLAMP};
use crate::real::Real;
use ndarray::Array2;
use rayon::prelude::*;
use std::ops::Range;

/// Frame-edge padding for the sliding decoder.
///
/// The pad stands in for coded bits of the all-zero encoder state, which in
/// LLR space are strongly positive, so `pad_llr` is a large positive value
/// (the network's input clamp bound), not 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadPolicy<R: Real> {
    pad_len: usize,
    pad_llr: R,
}

impl<R: Real> PadPolicy<R> {
    /// `pad_len` coded bits of head/tail padding at LLR `pad_llr`.
    pub fn new(pad_len: usize, pad_llr: R) -> Result<Self> {
        if pad_len % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "pad length {pad_len} must be even"
            )));
        }
        if pad_llr <= R::zero() {
            return Err(Error::InvalidConfig(format!(
                "pad LLR {pad_llr} must be positive"
            )));
        }
        Ok(PadPolicy { pad_len, pad_llr })
    }

    /// The standard policy for a window: `W - 2` coded bits at LLR +20.
    pub fn for_window(wcfg: &WindowConfig) -> Self {
        PadPolicy {
            pad_len: wcfg.window_len() - 2,
            pad_llr: R::from_f64_c(DEFAULT_INPUT_CLAMP),
        }
    }

    pub fn pad_len(&self) -> usize {
        self.pad_len
    }

    pub fn pad_llr(&self) -> R {
        self.pad_llr
    }
}

/// One window's opinion about one information bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote<R> {
    /// Index of the voting window within the padded frame.
    pub window: usize,
    /// Which of the window's K label bits produced this vote.
    pub offset: usize,
    pub bit: u8,
    /// Probability mass of the classes agreeing with `bit` at `offset`.
    pub marginal: R,
}

/// Votes accumulated per information-bit position.
#[derive(Debug, Clone)]
pub struct VoteTable<R> {
    start: usize,
    votes: Vec<Vec<Vote<R>>>,
}

impl<R: Real> VoteTable<R> {
    fn new(range: &Range<usize>) -> Self {
        VoteTable {
            start: range.start,
            votes: vec![Vec::new(); range.len()],
        }
    }

    fn push(&mut self, position: usize, vote: Vote<R>) {
        self.votes[position - self.start].push(vote);
    }

    /// Votes deposited for absolute position `position`.
    pub fn votes_at(&self, position: usize) -> &[Vote<R>] {
        &self.votes[position - self.start]
    }

    /// First position this table covers.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    /// Majority decision per position. A tie goes to the side with the
    /// larger sum of marginals, then to 0.
    pub fn decide_all(&self) -> Vec<u8> {
        self.votes
            .iter()
            .map(|votes| {
                let mut count = [0usize; 2];
                let mut mass = [R::zero(); 2];
                for v in votes {
                    count[v.bit as usize] += 1;
                    mass[v.bit as usize] += v.marginal;
                }
                match count[1].cmp(&count[0]) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => 0,
                    std::cmp::Ordering::Equal => u8::from(mass[1] > mass[0]),
                }
            })
            .collect()
    }
}

/// The hard vote and its confidence that a probability vector casts for
/// label-bit `bit_pos`: the bit of the argmax class there, plus the total
/// mass of classes agreeing with it.
pub fn marginal_bit_votes<R: Real>(probs: &[R], k: usize, bit_pos: usize) -> (u8, R) {
    debug_assert_eq!(probs.len(), 1 << k);
    debug_assert!(bit_pos < k);
    let mut best = 0usize;
    for (c, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = c;
        }
    }
    let shift = k - 1 - bit_pos;
    let decided = ((best >> shift) & 1) as u8;
    let mut marginal = R::zero();
    for (c, &p) in probs.iter().enumerate() {
        if ((c >> shift) & 1) as u8 == decided {
            marginal += p;
        }
    }
    (decided, marginal)
}

fn check_model_window<R: Real>(model: &MlpModel<R>, wcfg: &WindowConfig) -> Result<()> {
    if model.input_width() != wcfg.window_len() {
        return Err(Error::DimMismatch(format!(
            "model input width {} does not match window length {}",
            model.input_width(),
            wcfg.window_len()
        )));
    }
    if model.class_count() != wcfg.class_count() {
        return Err(Error::DimMismatch(format!(
            "model classes {} do not match window classes {}",
            model.class_count(),
            wcfg.class_count()
        )));
    }
    Ok(())
}

fn frame_steps<R: Real>(llrs: &SoftFrame<R>, wcfg: &WindowConfig) -> Result<usize> {
    if llrs.len() % 2 != 0 {
        return Err(Error::RaggedFrame {
            len: llrs.len(),
            n_out: 2,
        });
    }
    if llrs.len() < wcfg.window_len() {
        return Err(Error::FrameShorterThanWindow {
            len: llrs.len(),
            window: wcfg.window_len(),
        });
    }
    Ok(llrs.len() / 2)
}

/// Rows of class probabilities for a run of windows, classified in batches.
fn classify_windows<R: Real>(
    model: &MlpModel<R>,
    features: impl Iterator<Item = Vec<R>>,
    mut on_row: impl FnMut(usize, &[R]) -> Result<()>,
) -> Result<()> {
    const BATCH: usize = 256;
    let w = model.input_width();
    let mut pending: Vec<Vec<R>> = Vec::with_capacity(BATCH);
    let mut emitted = 0usize;
    let mut flush = |pending: &mut Vec<Vec<R>>, emitted: &mut usize| -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let mut x = Array2::zeros((pending.len(), w));
        for (i, row) in pending.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        let probs = model.forward_batch_infer(x.view())?;
        for row in probs.rows() {
            on_row(*emitted, row.as_slice().expect("contiguous row"))?;
            *emitted += 1;
        }
        pending.clear();
        Ok(())
    };
    for f in features {
        pending.push(f);
        if pending.len() == BATCH {
            flush(&mut pending, &mut emitted)?;
        }
    }
    flush(&mut pending, &mut emitted)
}

/// Decode by classifying non-overlapping windows and concatenating their
/// bits. A trailing residue shorter than the window is completed with pad
/// LLRs. The final `tail_bits` trellis steps are stripped from the output.
pub fn direct_decode<R: Real>(
    llrs: &SoftFrame<R>,
    model: &MlpModel<R>,
    wcfg: &WindowConfig,
    tail_bits: usize,
) -> Result<crate::codec::BitSeq> {
    check_model_window(model, wcfg)?;
    let steps = frame_steps(llrs, wcfg)?;
    if steps <= tail_bits {
        return Err(Error::DimMismatch(format!(
            "frame of {steps} steps cannot strip {tail_bits} tail bits"
        )));
    }
    let w = wcfg.window_len();
    let k = wcfg.info_bits();
    let pad_value = R::from_f64_c(DEFAULT_INPUT_CLAMP);
    let window_count = llrs.len().div_ceil(w);

    let features = (0..window_count).map(|i| {
        let start = i * w;
        let end = (start + w).min(llrs.len());
        let mut f = llrs[start..end].to_vec();
        f.resize(w, pad_value);
        f
    });

    let mut decisions = vec![0u8; steps];
    classify_windows(model, features, |i, probs| {
        let mut best = 0usize;
        for (c, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = c;
            }
        }
        for b in 0..k {
            let t = i * k + b;
            if t < steps {
                decisions[t] = ((best >> (k - 1 - b)) & 1) as u8;
            }
        }
        Ok(())
    })?;

    decisions.truncate(steps - tail_bits);
    Ok(crate::codec::BitSeq::new(decisions))
}

/// Coded frame extended with `pad.pad_len` pad LLRs on each side.
fn padded_frame<R: Real>(llrs: &SoftFrame<R>, pad: &PadPolicy<R>) -> Vec<R> {
    let mut padded = Vec::with_capacity(llrs.len() + 2 * pad.pad_len);
    padded.resize(pad.pad_len, pad.pad_llr);
    padded.extend_from_slice(llrs);
    padded.resize(llrs.len() + 2 * pad.pad_len, pad.pad_llr);
    padded
}

/// Deposit the votes of all windows touching positions `positions` into a
/// table. Window `j` of the padded frame covers trellis steps
/// `j-K+1 ..= j`, so `positions` draws on windows `positions.start ..=
/// positions.end + K - 2`, clipped to the frame.
fn vote_span<R: Real>(
    padded: &[R],
    model: &MlpModel<R>,
    wcfg: &WindowConfig,
    positions: Range<usize>,
) -> Result<VoteTable<R>> {
    let w = wcfg.window_len();
    let k = wcfg.info_bits();
    let last_window = (padded.len() - w) / 2;
    let j_first = positions.start;
    let j_last = (positions.end + k - 2).min(last_window);

    let mut table = VoteTable::new(&positions);
    let features = (j_first..=j_last).map(|j| padded[2 * j..2 * j + w].to_vec());
    classify_windows(model, features, |row, probs| {
        let j = j_first + row;
        for b in 0..k {
            let t = j + b + 1;
            if t < k {
                continue; // vote lands in the head padding
            }
            let t = t - k;
            if positions.contains(&t) {
                let (bit, marginal) = marginal_bit_votes(probs, k, b);
                table.push(
                    t,
                    Vote {
                        window: j,
                        offset: b,
                        bit,
                        marginal,
                    },
                );
            }
        }
        Ok(())
    })?;
    Ok(table)
}

/// Votes of every padded sliding window, per information-bit position
/// (tail steps included). With the standard pad every position collects
/// exactly K votes.
pub fn ensemble_votes<R: Real>(
    llrs: &SoftFrame<R>,
    model: &MlpModel<R>,
    wcfg: &WindowConfig,
    pad: &PadPolicy<R>,
) -> Result<VoteTable<R>> {
    check_model_window(model, wcfg)?;
    let steps = frame_steps(llrs, wcfg)?;
    let padded = padded_frame(llrs, pad);
    vote_span(&padded, model, wcfg, 0..steps)
}

/// Sliding-window majority-vote decoding.
///
/// The frame is padded per `pad`, every window two coded bits apart is
/// classified, each window deposits its K bit opinions, and each
/// information bit is decided by majority (ties by marginal mass, then 0).
/// The final `tail_bits` steps are stripped.
pub fn ensemble_decode<R: Real>(
    llrs: &SoftFrame<R>,
    model: &MlpModel<R>,
    wcfg: &WindowConfig,
    pad: &PadPolicy<R>,
    tail_bits: usize,
) -> Result<crate::codec::BitSeq> {
    parallel_decode(llrs, model, wcfg, pad, 1, tail_bits)
}

/// Ensemble decoding split across `partitions` contiguous spans.
///
/// Each span is decoded against the shared padded frame, reading W-2 coded
/// bits of context on each side (neighboring spans or pad), and emits only
/// the positions it owns. The concatenated output is bit-identical to the
/// single-span result for every partition count and split point.
pub fn parallel_decode<R: Real>(
    llrs: &SoftFrame<R>,
    model: &MlpModel<R>,
    wcfg: &WindowConfig,
    pad: &PadPolicy<R>,
    partitions: usize,
    tail_bits: usize,
) -> Result<crate::codec::BitSeq> {
    check_model_window(model, wcfg)?;
    let steps = frame_steps(llrs, wcfg)?;
    if steps <= tail_bits {
        return Err(Error::DimMismatch(format!(
            "frame of {steps} steps cannot strip {tail_bits} tail bits"
        )));
    }
    let info_len = steps - tail_bits;
    if partitions == 0 || partitions > info_len {
        return Err(Error::InvalidConfig(format!(
            "partition count {partitions} outside 1..={info_len}"
        )));
    }

    let padded = padded_frame(llrs, pad);
    let base = steps / partitions;
    let extra = steps % partitions;
    let spans: Vec<Range<usize>> = (0..partitions)
        .scan(0usize, |start, p| {
            let len = base + usize::from(p < extra);
            let span = *start..*start + len;
            *start += len;
            Some(span)
        })
        .collect();

    let decided: Vec<Result<Vec<u8>>> = spans
        .into_par_iter()
        .map(|span| Ok(vote_span(&padded, model, wcfg, span)?.decide_all()))
        .collect();

    let mut decisions = Vec::with_capacity(steps);
    for part in decided {
        decisions.extend(part?);
    }
    decisions.truncate(info_len);
    Ok(crate::codec::BitSeq::new(decisions))
}

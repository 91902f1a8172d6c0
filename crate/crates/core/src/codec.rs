//! Convolutional encoding over GF(2) and soft-decision Viterbi decoding.
//!
//! The default code is the rate-1/2, memory-2 code with generators
//! 1+x+x^2 and 1+x^2 (tap vectors `111` and `101`). Frames are terminated
//! by default: the encoder appends `m` zero tail bits so it ends in the
//! all-zero state, and the decoder traces back from that state and strips
//! the tail from its output.

use crate::channel::SoftFrame;
use crate::error::{Error, Result};
use crate::real::Real;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

/// Largest supported encoder memory; the trellis has `2^m` states.
pub const MAX_MEMORY: usize = 16;

/// A sequence of bits, each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitSeq(Vec<u8>);

impl BitSeq {
    /// Wrap a bit vector. Panics if any value is not 0 or 1.
    pub fn new(bits: Vec<u8>) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "bit values must be 0 or 1");
        BitSeq(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitSeq(vec![0; len])
    }

    /// Uniformly random bits from `rng`.
    pub fn random<G: rand::Rng + ?Sized>(len: usize, rng: &mut G) -> Self {
        BitSeq((0..len).map(|_| rng.gen_range(0..2u8)).collect())
    }

    pub fn push(&mut self, bit: u8) {
        assert!(bit <= 1);
        self.0.push(bit);
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    /// Bitwise XOR of two equal-length sequences.
    pub fn xor(&self, other: &BitSeq) -> BitSeq {
        assert_eq!(self.len(), other.len(), "xor needs equal lengths");
        BitSeq(self.iter().zip(other.iter()).map(|(a, b)| a ^ b).collect())
    }

    /// Number of positions where the two sequences differ.
    pub fn hamming_distance(&self, other: &BitSeq) -> usize {
        assert_eq!(self.len(), other.len());
        self.iter().zip(other.iter()).filter(|(a, b)| a != b).count()
    }
}

impl Deref for BitSeq {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl From<&[u8]> for BitSeq {
    fn from(bits: &[u8]) -> Self {
        BitSeq::new(bits.to_vec())
    }
}

impl<const N: usize> From<[u8; N]> for BitSeq {
    fn from(bits: [u8; N]) -> Self {
        BitSeq::new(bits.to_vec())
    }
}

impl fmt::Display for BitSeq {
    /// ASCII line of '0'/'1' characters, no separators.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", b)?;
        }
        Ok(())
    }
}

impl FromStr for BitSeq {
    type Err = Error;

    /// Parse an ASCII '0'/'1' line; reports the 1-based column of the first
    /// offending character.
    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => {
                    return Err(Error::ParseColumn {
                        column: i + 1,
                        msg: format!("expected '0' or '1', found {c:?}"),
                    })
                }
            }
        }
        Ok(BitSeq(bits))
    }
}

/// Generator taps and memory of a rate-1/n_out convolutional code.
///
/// Each generator is a tap vector of length `memory + 1`; tap index 0
/// applies to the current input bit, tap index j to the input j steps back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvCodeSpec {
    generators: Vec<Vec<u8>>,
    memory: usize,
}

impl ConvCodeSpec {
    /// Validate and build a code spec.
    pub fn new(generators: Vec<Vec<u8>>, memory: usize) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidCodeSpec("no generators".into()));
        }
        for (i, g) in generators.iter().enumerate() {
            if g.len() != memory + 1 {
                return Err(Error::InvalidCodeSpec(format!(
                    "generator {i} has {} taps, expected {}",
                    g.len(),
                    memory + 1
                )));
            }
            if g.iter().any(|&t| t > 1) {
                return Err(Error::InvalidCodeSpec(format!(
                    "generator {i} has a tap outside {{0,1}}"
                )));
            }
        }
        if !generators.iter().any(|g| g[0] == 1) {
            return Err(Error::InvalidCodeSpec(
                "no generator taps the current input".into(),
            ));
        }
        Ok(ConvCodeSpec { generators, memory })
    }

    pub fn generators(&self) -> &[Vec<u8>] {
        &self.generators
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Coded bits produced per information bit.
    pub fn outputs_per_input(&self) -> usize {
        self.generators.len()
    }
}

impl Default for ConvCodeSpec {
    /// The (2,1,2) code: g1 = 1+x+x^2, g2 = 1+x^2.
    fn default() -> Self {
        ConvCodeSpec::new(vec![vec![1, 1, 1], vec![1, 0, 1]], 2).unwrap()
    }
}

/// State-transition table of the encoder.
///
/// A state packs the last `m` input bits, most recent in the top bit:
/// consuming input `x` in state `s` moves to `(x << (m-1)) | (s >> 1)`.
#[derive(Debug, Clone)]
pub struct Trellis {
    memory: usize,
    n_out: usize,
    /// `next[state][input]`
    next: Vec<[usize; 2]>,
    /// `output[state][input]`, `n_out` bits per transition.
    output: Vec<[Vec<u8>; 2]>,
}

/// Build the transition table for `spec`.
pub fn build_trellis(spec: &ConvCodeSpec) -> Result<Trellis> {
    let m = spec.memory();
    if m > MAX_MEMORY {
        return Err(Error::MemoryTooLarge(m));
    }
    let state_count = 1usize << m;
    let mut next = Vec::with_capacity(state_count);
    let mut output = Vec::with_capacity(state_count);
    for state in 0..state_count {
        let mut next_pair = [0usize; 2];
        let mut out_pair: [Vec<u8>; 2] = [Vec::new(), Vec::new()];
        for input in 0..2usize {
            next_pair[input] = if m == 0 {
                0
            } else {
                (input << (m - 1)) | (state >> 1)
            };
            out_pair[input] = spec
                .generators()
                .iter()
                .map(|taps| {
                    let mut parity = taps[0] & input as u8;
                    for (j, &tap) in taps.iter().enumerate().skip(1) {
                        // x_{t-j} sits at state bit (m - j)
                        parity ^= tap & ((state >> (m - j)) & 1) as u8;
                    }
                    parity
                })
                .collect();
        }
        next.push(next_pair);
        output.push(out_pair);
    }
    Ok(Trellis {
        memory: m,
        n_out: spec.outputs_per_input(),
        next,
        output,
    })
}

impl Trellis {
    pub fn state_count(&self) -> usize {
        self.next.len()
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn outputs_per_input(&self) -> usize {
        self.n_out
    }

    /// One transition: next state and the coded bits it emits.
    pub fn step(&self, state: usize, input: u8) -> (usize, &[u8]) {
        let i = input as usize;
        (self.next[state][i], &self.output[state][i])
    }

    /// Encode `bits` starting from `state`, returning the coded bits and the
    /// final state. Used by the decoder tests and the dataset consistency
    /// checks; `encode` is the frame-level entry point.
    pub fn encode_from_state(&self, state: usize, bits: &[u8]) -> (Vec<u8>, usize) {
        let mut out = Vec::with_capacity(bits.len() * self.n_out);
        let mut s = state;
        for &b in bits {
            let (ns, coded) = self.step(s, b);
            out.extend_from_slice(coded);
            s = ns;
        }
        (out, s)
    }
}

/// Encode an information sequence.
///
/// With `terminated` set, `m` zero tail bits are appended so the encoder
/// ends in the all-zero state; the output then has
/// `n_out * (len + m)` bits, else `n_out * len`. Coded bit `n_out*t + i`
/// is generator `i`'s output at step `t`.
pub fn encode(info: &BitSeq, spec: &ConvCodeSpec, terminated: bool) -> Result<BitSeq> {
    if info.is_empty() {
        return Err(Error::EmptyInfo);
    }
    let trellis = build_trellis(spec)?;
    let mut state = 0usize;
    let mut out = Vec::with_capacity((info.len() + spec.memory()) * spec.outputs_per_input());
    for &b in info.iter() {
        let (ns, coded) = trellis.step(state, b);
        out.extend_from_slice(coded);
        state = ns;
    }
    if terminated {
        for _ in 0..spec.memory() {
            let (ns, coded) = trellis.step(state, 0);
            out.extend_from_slice(coded);
            state = ns;
        }
        debug_assert_eq!(state, 0);
    }
    Ok(BitSeq(out))
}

/// Maximum-likelihood sequence decoding over the trellis.
///
/// The path metric is the correlation of hypothesized antipodal symbols
/// with the LLRs: a hypothesized coded bit 0 adds `+llr`, bit 1 adds
/// `-llr`. For BPSK over AWGN this ranks paths exactly like Euclidean
/// distance. Ties are resolved deterministically by visiting predecessor
/// states in ascending order and input 0 before input 1, keeping the first
/// maximum. With `terminated`, traceback starts at state 0 and the `m`
/// tail bits are stripped.
pub fn viterbi_decode<R: Real>(
    llrs: &SoftFrame<R>,
    spec: &ConvCodeSpec,
    terminated: bool,
) -> Result<BitSeq> {
    let trellis = build_trellis(spec)?;
    let n_out = trellis.outputs_per_input();
    if llrs.len() % n_out != 0 {
        return Err(Error::RaggedFrame {
            len: llrs.len(),
            n_out,
        });
    }
    let steps = llrs.len() / n_out;
    if terminated && steps <= trellis.memory() {
        return Err(Error::DimMismatch(format!(
            "terminated frame needs more than {} steps, got {steps}",
            trellis.memory()
        )));
    }
    if steps == 0 {
        return Ok(BitSeq::default());
    }

    let states = trellis.state_count();
    let neg_inf = R::neg_infinity();
    let mut metric = vec![neg_inf; states];
    metric[0] = R::zero();

    // Per step, the surviving (predecessor, input) for each state.
    let mut survivors: Vec<Vec<(u32, u8)>> = Vec::with_capacity(steps);

    for t in 0..steps {
        let chunk = &llrs[t * n_out..(t + 1) * n_out];
        let mut new_metric = vec![neg_inf; states];
        let mut new_surv = vec![(0u32, 0u8); states];
        for state in 0..states {
            if metric[state] == neg_inf {
                continue;
            }
            for input in 0..2u8 {
                let (next, coded) = trellis.step(state, input);
                let mut branch = R::zero();
                for (i, &c) in coded.iter().enumerate() {
                    if c == 0 {
                        branch += chunk[i];
                    } else {
                        branch -= chunk[i];
                    }
                }
                let cand = metric[state] + branch;
                if cand > new_metric[next] {
                    new_metric[next] = cand;
                    new_surv[next] = (state as u32, input);
                }
            }
        }
        metric = new_metric;
        survivors.push(new_surv);
    }

    let mut state = if terminated {
        0usize
    } else {
        // best end state, smallest index on ties
        let mut best = 0usize;
        for s in 1..states {
            if metric[s] > metric[best] {
                best = s;
            }
        }
        best
    };

    let mut decoded = vec![0u8; steps];
    for t in (0..steps).rev() {
        let (pred, input) = survivors[t][state];
        decoded[t] = input;
        state = pred as usize;
    }

    if terminated {
        decoded.truncate(steps - trellis.memory());
    }
    Ok(BitSeq(decoded))
}

/// Correlation metric of a hypothesized codeword against received LLRs.
///
/// This is the quantity `viterbi_decode` maximizes; exposed so tests and
/// the brute-force oracle can compare paths on equal terms.
pub fn path_metric<R: Real>(codeword: &BitSeq, llrs: &SoftFrame<R>) -> R {
    assert_eq!(codeword.len(), llrs.len(), "codeword/frame length mismatch");
    codeword
        .iter()
        .zip(llrs.iter())
        .map(|(&c, &l)| if c == 0 { l } else { -l })
        .sum()
}

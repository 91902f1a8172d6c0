//! Window data sets for training the neural decoders.
//!
//! A frame of coded LLRs is sliced into windows of `W` values; each window
//! is labeled with the class index of the `K = W/2` information bits it
//! covers. Stride 2 produces the overlapping windows the voting decoder
//! consumes; stride `W` produces the non-overlapping partition used for
//! direct decoding. Frames mix noise levels drawn from a configured dB
//! list, and each begins with `K` zero information bits.

use crate::channel::{transmit, ChannelConfig, SoftFrame};
use crate::codec::{encode, BitSeq, ConvCodeSpec};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Geometry of the window slicer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    window_len: usize,
    stride: usize,
}

impl WindowConfig {
    /// `window_len` coded bits per window, advancing `stride` coded bits
    /// between windows.
    pub fn new(window_len: usize, stride: usize) -> Result<Self> {
        if window_len % 2 != 0 || window_len < 4 {
            return Err(Error::InvalidWindowConfig(format!(
                "window length {window_len} must be even and >= 4"
            )));
        }
        if window_len / 2 > 16 {
            return Err(Error::InvalidWindowConfig(format!(
                "window length {window_len} implies {} classes (limit 2^16)",
                (window_len / 2) as u32
            )));
        }
        if stride % 2 != 0 || stride < 2 || stride > window_len {
            return Err(Error::InvalidWindowConfig(format!(
                "stride {stride} must be even and in [2, {window_len}]"
            )));
        }
        Ok(WindowConfig { window_len, stride })
    }

    /// Overlapping windows advancing one information bit at a time.
    pub fn sliding(window_len: usize) -> Result<Self> {
        WindowConfig::new(window_len, 2)
    }

    /// Non-overlapping windows partitioning the frame.
    pub fn of_non_overlapping(window_len: usize) -> Result<Self> {
        WindowConfig::new(window_len, window_len)
    }

    /// Coded bits per window (`W`).
    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Information bits per window (`K = W/2`).
    pub fn info_bits(&self) -> usize {
        self.window_len / 2
    }

    /// Classes a window can be labeled with (`2^K`).
    pub fn class_count(&self) -> usize {
        1usize << self.info_bits()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }
}

/// One training element: `W` LLR features and the class of the covered bits.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample<R> {
    pub features: Vec<R>,
    pub label: u32,
}

/// Frame-generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    /// Information bits per frame.
    pub frame_info_len: usize,
    /// Frames generated per listed noise level.
    pub frames_per_snr: usize,
    /// Eb/N0 mix, dB.
    pub snr_list: Vec<f64>,
    pub seed: u64,
}

impl Default for DatasetConfig {
    /// 10000-bit frames, one per dB step from 1 to 8.
    fn default() -> Self {
        DatasetConfig {
            frame_info_len: 10_000,
            frames_per_snr: 1,
            snr_list: (1..=8).map(f64::from).collect(),
            seed: 0,
        }
    }
}

impl DatasetConfig {
    fn validate(&self, wcfg: &WindowConfig) -> Result<()> {
        if self.snr_list.is_empty() {
            return Err(Error::InvalidConfig("snr list is empty".into()));
        }
        if self.frame_info_len < wcfg.info_bits() {
            return Err(Error::InvalidConfig(format!(
                "frame length {} shorter than {} info bits per window",
                self.frame_info_len,
                wcfg.info_bits()
            )));
        }
        Ok(())
    }
}

/// Interpret `K` bits as a class index, first bit most significant.
pub fn bits_to_class(bits: &[u8]) -> Result<u32> {
    if bits.is_empty() || bits.len() > 16 {
        return Err(Error::DimMismatch(format!(
            "class label needs 1..=16 bits, got {}",
            bits.len()
        )));
    }
    let mut class = 0u32;
    for &b in bits {
        debug_assert!(b <= 1);
        class = (class << 1) | u32::from(b);
    }
    Ok(class)
}

/// Expand a class index back into its `k` bits, first bit most significant.
pub fn class_to_bits(class: u32, k: usize) -> Result<BitSeq> {
    if k == 0 || k > 16 {
        return Err(Error::DimMismatch(format!("k={k} outside 1..=16")));
    }
    if class >= (1u32 << k) {
        return Err(Error::DimMismatch(format!(
            "class {class} out of range for k={k}"
        )));
    }
    Ok(BitSeq::new(
        (0..k).map(|i| ((class >> (k - 1 - i)) & 1) as u8).collect(),
    ))
}

/// Generate one frame: information bits (leading `K` zeros, rest uniform)
/// and the LLRs observed after encoding, BPSK, and AWGN at an Eb/N0 drawn
/// from `cfg.snr_list`.
pub fn gen_frame<R: Real, G: Rng + ?Sized>(
    cfg: &DatasetConfig,
    wcfg: &WindowConfig,
    spec: &ConvCodeSpec,
    rng: &mut G,
) -> Result<(BitSeq, SoftFrame<R>)> {
    cfg.validate(wcfg)?;
    let k = wcfg.info_bits();
    let mut info = BitSeq::zeros(k);
    for _ in k..cfg.frame_info_len {
        info.push(rng.gen_range(0..2u8));
    }
    let snr = cfg.snr_list[rng.gen_range(0..cfg.snr_list.len())];
    let chan = ChannelConfig::<R>::rate_half(R::from_f64_c(snr));
    let coded = encode(&info, spec, true)?;
    Ok((info, transmit(&coded, &chan, rng)))
}

/// Slice a frame into labeled windows.
///
/// Window `j` covers `llrs[j*stride .. j*stride + W)` and is labeled with
/// information bits `[j*stride/2, j*stride/2 + K)`. Windows reaching into
/// the terminated tail take the actual tail bits (zeros). A trailing span
/// shorter than `W` is dropped.
pub fn slice_windows<R: Real>(
    info: &BitSeq,
    llrs: &SoftFrame<R>,
    wcfg: &WindowConfig,
) -> Result<Vec<WindowSample<R>>> {
    let w = wcfg.window_len();
    let k = wcfg.info_bits();
    if llrs.len() < w {
        return Err(Error::FrameShorterThanWindow {
            len: llrs.len(),
            window: w,
        });
    }
    let window_count = (llrs.len() - w) / wcfg.stride() + 1;
    let mut samples = Vec::with_capacity(window_count);
    for j in 0..window_count {
        let start = j * wcfg.stride();
        let features = llrs[start..start + w].to_vec();
        let first_info = start / 2;
        let label_bits: Vec<u8> = (first_info..first_info + k)
            .map(|t| if t < info.len() { info[t] } else { 0 })
            .collect();
        samples.push(WindowSample {
            features,
            label: bits_to_class(&label_bits)?,
        });
    }
    Ok(samples)
}

/// Generate the full window data set: `frames_per_snr * snr_list.len()`
/// frames, each sliced per `wcfg`. Frames are generated in parallel from
/// per-index substreams, so the result is independent of worker count.
pub fn build_dataset<R: Real>(
    cfg: &DatasetConfig,
    wcfg: &WindowConfig,
    spec: &ConvCodeSpec,
) -> Result<Vec<WindowSample<R>>> {
    cfg.validate(wcfg)?;
    let frame_count = cfg.frames_per_snr * cfg.snr_list.len();
    let per_frame: Vec<Result<Vec<WindowSample<R>>>> = (0..frame_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(cfg.seed, "frame", i as u64);
            let (info, llrs) = gen_frame::<R, _>(cfg, wcfg, spec, &mut rng)?;
            slice_windows(&info, &llrs, wcfg)
        })
        .collect();
    let mut samples = Vec::new();
    for frame in per_frame {
        samples.extend(frame?);
    }
    Ok(samples)
}

/// Deterministically permute `samples` and split by `fractions`
/// (train, validation, test). The fractions must sum to 1; the split is a
/// disjoint covering partition with the test set taking the remainder.
pub fn shuffle_split<R: Real>(
    mut samples: Vec<WindowSample<R>>,
    split_seed: u64,
    fractions: (f64, f64, f64),
) -> Result<(Vec<WindowSample<R>>, Vec<WindowSample<R>>, Vec<WindowSample<R>>)> {
    let (f_train, f_val, f_test) = fractions;
    if f_train < 0.0 || f_val < 0.0 || f_test < 0.0 || (f_train + f_val + f_test - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidConfig(format!(
            "split fractions {fractions:?} must be non-negative and sum to 1"
        )));
    }
    let mut rng = seed::stream(split_seed, "shuffle-split", 0);
    samples.shuffle(&mut rng);
    let n = samples.len();
    let n_train = (n as f64 * f_train).floor() as usize;
    let n_val = (n as f64 * f_val).floor() as usize;
    let rest = samples.split_off(n_train.min(n));
    let mut val = rest;
    let test = val.split_off(n_val.min(val.len()));
    Ok((samples, val, test))
}

const DATA_MAGIC: &str = "CONVDEC-DATA v1";

/// Write samples in the line-oriented text format:
/// header `CONVDEC-DATA v1 W=<W> K=<K>`, then one
/// `<class_index> <llr_1> ... <llr_W>` line per sample.
pub fn write_dataset<R: Real>(
    samples: &[WindowSample<R>],
    wcfg: &WindowConfig,
    path: &Path,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{DATA_MAGIC} W={} K={}", wcfg.window_len(), wcfg.info_bits())?;
    for s in samples {
        write!(out, "{}", s.label)?;
        for v in &s.features {
            write!(out, " {}", v.fmt_precise())?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Read a dataset file, returning the samples and the window geometry
/// recorded in the header (stride is not stored; the sliding default is
/// assumed for retraining purposes).
pub fn read_dataset<R: Real>(path: &Path) -> Result<(Vec<WindowSample<R>>, WindowConfig)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or(Error::NotADataFile)?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let magic = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    if magic != ("CONVDEC-DATA", "v1") {
        return Err(Error::NotADataFile);
    }
    let mut w = None;
    let mut k = None;
    for item in parts {
        if let Some(v) = item.strip_prefix("W=") {
            w = v.parse::<usize>().ok();
        } else if let Some(v) = item.strip_prefix("K=") {
            k = v.parse::<usize>().ok();
        }
    }
    let (w, k) = match (w, k) {
        (Some(w), Some(k)) if k == w / 2 => (w, k),
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "header must carry consistent W= and K= fields".into(),
            })
        }
    };
    let wcfg = WindowConfig::sliding(w).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let label: u32 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "missing or invalid class index".into(),
            })?;
        if label >= (1u32 << k) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("class {label} out of range for K={k}"),
            });
        }
        let features: Vec<R> = fields
            .map(|f| {
                R::parse_decimal(f).ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("invalid LLR value {f:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if features.len() != w {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {w} LLR values, found {}", features.len()),
            });
        }
        samples.push(WindowSample { features, label });
    }
    Ok((samples, wcfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::build_trellis;

    fn default_setup() -> (DatasetConfig, WindowConfig, ConvCodeSpec) {
        (
            DatasetConfig::default(),
            WindowConfig::sliding(16).unwrap(),
            ConvCodeSpec::default(),
        )
    }

    #[test]
    fn window_config_validation() {
        assert!(WindowConfig::new(16, 2).is_ok());
        assert!(WindowConfig::new(15, 2).is_err());
        assert!(WindowConfig::new(2, 2).is_err());
        assert!(WindowConfig::new(16, 3).is_err());
        assert!(WindowConfig::new(16, 18).is_err());
        assert!(WindowConfig::new(34, 2).is_err()); // 2^17 classes
    }

    #[test]
    fn gen_frame_leading_zeros_and_length() {
        let (cfg, wcfg, spec) = default_setup();
        let mut rng = seed::stream(cfg.seed, "frame", 0);
        let (info, llrs) = gen_frame::<f64, _>(&cfg, &wcfg, &spec, &mut rng).unwrap();
        assert_eq!(info.len(), 10_000);
        assert!(info[..8].iter().all(|&b| b == 0));
        assert_eq!(llrs.len(), 2 * (10_000 + 2));
    }

    #[test]
    fn gen_frame_is_deterministic() {
        let (cfg, wcfg, spec) = default_setup();
        let a = gen_frame::<f64, _>(&cfg, &wcfg, &spec, &mut seed::stream(9, "frame", 3)).unwrap();
        let b = gen_frame::<f64, _>(&cfg, &wcfg, &spec, &mut seed::stream(9, "frame", 3)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn slice_non_overlapping_partitions_frame() {
        let wcfg = WindowConfig::of_non_overlapping(16).unwrap();
        let info = BitSeq::zeros(16);
        let llrs = SoftFrame::new(vec![1.0f64; 32]);
        let windows = slice_windows(&info, &llrs, &wcfg).unwrap();
        assert_eq!(windows.len(), 2);
        assert!(windows.iter().all(|s| s.features.len() == 16));
    }

    #[test]
    fn slice_sliding_shares_all_but_stride_features() {
        let (cfg, wcfg, spec) = default_setup();
        let cfg = DatasetConfig {
            frame_info_len: 200,
            ..cfg
        };
        let mut rng = seed::stream(1, "frame", 0);
        let (info, llrs) = gen_frame::<f64, _>(&cfg, &wcfg, &spec, &mut rng).unwrap();
        let windows = slice_windows(&info, &llrs, &wcfg).unwrap();
        assert_eq!(windows.len(), (llrs.len() - 16) / 2 + 1);
        for pair in windows.windows(2) {
            assert_eq!(pair[0].features[2..], pair[1].features[..14]);
        }
        // interior info bit t is covered by windows j = t-7 ..= t
        let t = 57;
        let covering: Vec<usize> = (0..windows.len())
            .filter(|&j| (j..j + 8).contains(&t))
            .collect();
        assert_eq!(covering.len(), 8);
    }

    #[test]
    fn first_window_of_generated_frame_has_label_zero() {
        let (cfg, wcfg, spec) = default_setup();
        for i in 0..4 {
            let mut rng = seed::stream(77, "frame", i);
            let (info, llrs) = gen_frame::<f64, _>(&cfg, &wcfg, &spec, &mut rng).unwrap();
            let windows = slice_windows(&info, &llrs, &wcfg).unwrap();
            assert_eq!(windows[0].label, 0);
        }
    }

    #[test]
    fn slice_rejects_short_frames() {
        let wcfg = WindowConfig::sliding(16).unwrap();
        let err = slice_windows(
            &BitSeq::zeros(4),
            &SoftFrame::new(vec![0.0f64; 8]),
            &wcfg,
        )
        .unwrap_err();
        assert!(err.to_string().contains("frame shorter than window"));
    }

    #[test]
    fn class_codec_round_trip_and_conventions() {
        assert_eq!(bits_to_class(&[0, 0, 0, 0]).unwrap(), 0);
        assert_eq!(bits_to_class(&[1, 1, 1, 1]).unwrap(), 15);
        assert_eq!(bits_to_class(&[0, 0, 0, 1]).unwrap(), 1);
        assert_eq!(class_to_bits(0, 8).unwrap(), BitSeq::zeros(8));
        assert_eq!(class_to_bits(15, 4).unwrap(), BitSeq::from([1, 1, 1, 1]));
        for k in 1..=10usize {
            for class in 0..(1u32 << k) {
                let bits = class_to_bits(class, k).unwrap();
                assert_eq!(bits_to_class(&bits).unwrap(), class);
            }
        }
        assert!(class_to_bits(16, 4).is_err());
        assert!(bits_to_class(&[]).is_err());
    }

    #[test]
    fn labels_consistent_with_encoder_state_at_high_snr() {
        // near-noiseless surrogate: re-encode each window's label from the
        // state implied by the preceding bits and compare sign decisions
        let wcfg = WindowConfig::sliding(16).unwrap();
        let spec = ConvCodeSpec::default();
        let trellis = build_trellis(&spec).unwrap();
        let cfg = DatasetConfig {
            frame_info_len: 300,
            snr_list: vec![0.0], // overridden by from_sigma2 below
            ..DatasetConfig::default()
        };
        let mut rng = seed::stream(21, "consistency", 0);
        let k = wcfg.info_bits();
        let mut info = BitSeq::zeros(k);
        for _ in k..cfg.frame_info_len {
            info.push(rng.gen_range(0..2u8));
        }
        let chan = ChannelConfig::<f64>::from_sigma2(1e-4, 0.5).unwrap();
        let coded = encode(&info, &spec, true).unwrap();
        let llrs = transmit(&coded, &chan, &mut rng);
        let windows = slice_windows(&info, &llrs, &wcfg).unwrap();
        for (j, sample) in windows.iter().enumerate() {
            let mut state = 0usize;
            for t in 0..j {
                let bit = if t < info.len() { info[t] } else { 0 };
                state = trellis.step(state, bit).0;
            }
            let label_bits = class_to_bits(sample.label, k).unwrap();
            let (recoded, _) = trellis.encode_from_state(state, &label_bits);
            let decisions: Vec<u8> = sample
                .features
                .iter()
                .map(|&l| if l >= 0.0 { 0 } else { 1 })
                .collect();
            assert_eq!(recoded, decisions, "window {j}");
        }
    }

    #[test]
    fn label_histogram_roughly_uniform() {
        let wcfg = WindowConfig::sliding(16).unwrap();
        let spec = ConvCodeSpec::default();
        let cfg = DatasetConfig {
            frame_info_len: 7_000,
            frames_per_snr: 2,
            seed: 5,
            ..DatasetConfig::default()
        };
        let samples = build_dataset::<f64>(&cfg, &wcfg, &spec).unwrap();
        assert!(samples.len() >= 100_000, "{}", samples.len());
        let classes = wcfg.class_count();
        let mut counts = vec![0u64; classes];
        for s in &samples {
            counts[s.label as usize] += 1;
        }
        let expected = samples.len() as f64 / classes as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 255 dof; the p > 1e-6 cut corresponds to chi2 below ~420
        assert!(chi2 < 420.0, "chi2 = {chi2}");
    }

    #[test]
    fn shuffle_split_partitions() {
        let make = |n: usize| -> Vec<WindowSample<f64>> {
            (0..n)
                .map(|i| WindowSample {
                    features: vec![i as f64],
                    label: (i % 4) as u32,
                })
                .collect()
        };

        let (train, val, test) = shuffle_split(make(100), 3, (0.8, 0.1, 0.1)).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (80, 10, 10));

        let (train, val, test) = shuffle_split(make(100), 3, (1.0, 0.0, 0.0)).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (100, 0, 0));
        // permuted, not identity order
        assert!(train.iter().enumerate().any(|(i, s)| s.features[0] != i as f64));

        let a = shuffle_split(make(61), 9, (0.5, 0.25, 0.25)).unwrap();
        let b = shuffle_split(make(61), 9, (0.5, 0.25, 0.25)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        assert_eq!(a.0.len() + a.1.len() + a.2.len(), 61);

        assert!(shuffle_split(make(10), 1, (0.5, 0.2, 0.2)).is_err());
    }

    #[test]
    fn dataset_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("windows.txt");
        let wcfg = WindowConfig::sliding(8).unwrap();
        let spec = ConvCodeSpec::default();
        let cfg = DatasetConfig {
            frame_info_len: 50,
            frames_per_snr: 1,
            snr_list: vec![2.0, 6.0],
            seed: 4,
        };
        let samples = build_dataset::<f64>(&cfg, &wcfg, &spec).unwrap();
        write_dataset(&samples, &wcfg, &path).unwrap();
        let (back, wcfg_back) = read_dataset::<f64>(&path).unwrap();
        assert_eq!(wcfg_back.window_len(), 8);
        assert_eq!(back, samples);
    }

    #[test]
    fn dataset_file_rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let bad_magic = dir.path().join("bad.txt");
        std::fs::write(&bad_magic, "SOMETHING ELSE\n").unwrap();
        assert!(matches!(
            read_dataset::<f64>(&bad_magic).unwrap_err(),
            Error::NotADataFile
        ));

        let bad_line = dir.path().join("short.txt");
        std::fs::write(&bad_line, "CONVDEC-DATA v1 W=8 K=4\n3 0.5 0.25\n").unwrap();
        let err = read_dataset::<f64>(&bad_line).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}

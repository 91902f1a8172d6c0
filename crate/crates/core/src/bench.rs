//! Monte-Carlo BER/FER harness and its outputs.
//!
//! Frames fan out over a worker pool in fixed-size chunks; each frame's
//! randomness derives from the sweep seed and the frame counter, so the
//! accumulated counts are identical for any worker count. Results go to a
//! CSV table, a semilog SVG plot, and a plain-text comparison report.

use crate::channel::{transmit, ChannelConfig};
use crate::codec::{encode, viterbi_decode, BitSeq, ConvCodeSpec};
use crate::dataset::WindowConfig;
use crate::decoder::{direct_decode, parallel_decode, PadPolicy};
use crate::error::{Error, Result};
use crate::mlp::MlpModel;
use crate::real::Real;
use crate::seed;
use rayon::prelude::*;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

/// Which decoder a sweep exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    Uncoded,
    Viterbi,
    Direct,
    Ensemble,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Uncoded => "uncoded",
            DecoderKind::Viterbi => "viterbi",
            DecoderKind::Direct => "direct",
            DecoderKind::Ensemble => "ensemble",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, DecoderKind::Direct | DecoderKind::Ensemble)
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncoded" => Ok(DecoderKind::Uncoded),
            "viterbi" => Ok(DecoderKind::Viterbi),
            "direct" => Ok(DecoderKind::Direct),
            "ensemble" => Ok(DecoderKind::Ensemble),
            other => Err(Error::InvalidConfig(format!(
                "unknown decoder {other:?} (expected uncoded, viterbi, direct, or ensemble)"
            ))),
        }
    }
}

/// Per-point termination rule: stop once `min_bit_errors` have been seen,
/// or `max_bits` simulated, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_bit_errors: u64,
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_bit_errors: 100,
            max_bits: 100_000_000,
        }
    }
}

/// Counts accumulated at one Eb/N0 point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub ebno_db: f64,
    pub bits: u64,
    pub bit_errors: u64,
    pub frames: u64,
    pub frame_errors: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }

    pub fn fer(&self) -> f64 {
        self.frame_errors as f64 / self.frames as f64
    }

    /// One Monte-Carlo standard deviation of the BER estimate.
    pub fn ber_sigma(&self) -> f64 {
        let p = self.ber();
        (p * (1.0 - p) / self.bits as f64).sqrt()
    }
}

/// A decoder's measured BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub decoder: String,
    pub points: Vec<BerPoint>,
}

/// Sweep parameters shared by all decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ebno_db: Vec<f64>,
    pub frame_info_len: usize,
    pub stop: StopRule,
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Partition count handed to the ensemble decoder.
    pub partitions: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            ebno_db: (0..=8).map(f64::from).collect(),
            frame_info_len: 1000,
            stop: StopRule::default(),
            seed: 0,
            workers: 0,
            partitions: 1,
        }
    }
}

/// Frames per scheduling chunk. Fixed so that stop-rule evaluation points,
/// and therefore the final counts, do not depend on the worker count.
const FRAMES_PER_CHUNK: u64 = 32;

fn simulate_frame<R: Real>(
    decoder: DecoderKind,
    model: Option<&MlpModel<R>>,
    spec: &ConvCodeSpec,
    ebno_db: f64,
    info_len: usize,
    rng: &mut seed::StreamRng,
) -> Result<(u64, bool)> {
    let info = BitSeq::random(info_len, rng);
    let decoded = match decoder {
        DecoderKind::Uncoded => {
            let chan = ChannelConfig::<R>::uncoded(R::from_f64_c(ebno_db));
            transmit(&info, &chan, rng).hard_decisions()
        }
        DecoderKind::Viterbi => {
            let chan = ChannelConfig::<R>::rate_half(R::from_f64_c(ebno_db));
            let llrs = transmit(&encode(&info, spec, true)?, &chan, rng);
            viterbi_decode(&llrs, spec, true)?
        }
        DecoderKind::Direct => {
            let model = model.expect("checked by ber_sweep");
            let chan = ChannelConfig::<R>::rate_half(R::from_f64_c(ebno_db));
            let llrs = transmit(&encode(&info, spec, true)?, &chan, rng);
            let wcfg = WindowConfig::of_non_overlapping(model.input_width())?;
            direct_decode(&llrs, model, &wcfg, spec.memory())?
        }
        DecoderKind::Ensemble => {
            let model = model.expect("checked by ber_sweep");
            let chan = ChannelConfig::<R>::rate_half(R::from_f64_c(ebno_db));
            let llrs = transmit(&encode(&info, spec, true)?, &chan, rng);
            let wcfg = WindowConfig::sliding(model.input_width())?;
            let pad = PadPolicy::for_window(&wcfg);
            parallel_decode(&llrs, model, &wcfg, &pad, 1, spec.memory())?
        }
    };
    let errors = info.hamming_distance(&decoded) as u64;
    Ok((errors, errors > 0))
}

/// Simulate `decoder` across `cfg.ebno_db`, stopping each point per
/// `cfg.stop`. Counts only information bits; tail bits are excluded.
/// Deterministic for a given seed, independent of `cfg.workers`.
pub fn ber_sweep<R: Real>(
    decoder: DecoderKind,
    model: Option<&MlpModel<R>>,
    cfg: &SweepConfig,
    spec: &ConvCodeSpec,
) -> Result<BerCurve> {
    if cfg.ebno_db.is_empty() {
        return Err(Error::InvalidConfig("Eb/N0 list is empty".into()));
    }
    if decoder.needs_model() && model.is_none() {
        return Err(Error::InvalidConfig(format!(
            "decoder {decoder} requires a model"
        )));
    }
    if cfg.stop.max_bits < cfg.frame_info_len as u64 {
        return Err(Error::InvalidConfig(format!(
            "stop rule max_bits {} below one frame of {} bits",
            cfg.stop.max_bits, cfg.frame_info_len
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;

    // The ensemble path honors the partition count; outputs are identical
    // for every count, so only scheduling changes.
    let partitions = cfg.partitions.max(1);

    let mut points = Vec::with_capacity(cfg.ebno_db.len());
    for (point_idx, &ebno_db) in cfg.ebno_db.iter().enumerate() {
        let mut point = BerPoint {
            ebno_db,
            bits: 0,
            bit_errors: 0,
            frames: 0,
            frame_errors: 0,
        };
        let mut next_frame = 0u64;
        while point.bit_errors < cfg.stop.min_bit_errors && point.bits < cfg.stop.max_bits {
            let chunk: Vec<u64> = (next_frame..next_frame + FRAMES_PER_CHUNK).collect();
            next_frame += FRAMES_PER_CHUNK;
            let results: Vec<Result<(u64, bool)>> = pool.install(|| {
                chunk
                    .par_iter()
                    .map(|&frame_idx| {
                        let mut rng = seed::stream(
                            cfg.seed,
                            "ber-frame",
                            ((point_idx as u64) << 40) | frame_idx,
                        );
                        match decoder {
                            DecoderKind::Ensemble => {
                                let model = model.expect("checked above");
                                let info = BitSeq::random(cfg.frame_info_len, &mut rng);
                                let chan =
                                    ChannelConfig::<R>::rate_half(R::from_f64_c(ebno_db));
                                let llrs = transmit(&encode(&info, spec, true)?, &chan, &mut rng);
                                let wcfg = WindowConfig::sliding(model.input_width())?;
                                let pad = PadPolicy::for_window(&wcfg);
                                let decoded = parallel_decode(
                                    &llrs,
                                    model,
                                    &wcfg,
                                    &pad,
                                    partitions,
                                    spec.memory(),
                                )?;
                                let errors = info.hamming_distance(&decoded) as u64;
                                Ok((errors, errors > 0))
                            }
                            _ => simulate_frame(
                                decoder,
                                model,
                                spec,
                                ebno_db,
                                cfg.frame_info_len,
                                &mut rng,
                            ),
                        }
                    })
                    .collect()
            });
            for r in results {
                let (errors, frame_err) = r?;
                point.bits += cfg.frame_info_len as u64;
                point.bit_errors += errors;
                point.frames += 1;
                point.frame_errors += u64::from(frame_err);
            }
        }
        points.push(point);
    }
    Ok(BerCurve {
        decoder: decoder.name().to_string(),
        points,
    })
}

/// Render curves as the CSV table, rows sorted by (decoder, ebno_db).
pub fn csv_string(curves: &[BerCurve]) -> String {
    let mut rows: Vec<(&str, &BerPoint)> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(move |p| (c.decoder.as_str(), p)))
        .collect();
    rows.sort_by(|a, b| {
        a.0.cmp(b.0)
            .then(a.1.ebno_db.partial_cmp(&b.1.ebno_db).expect("finite Eb/N0"))
    });
    let mut out = String::from("decoder,ebno_db,bits,errors,ber,frames,frame_errors,fer\n");
    for (decoder, p) in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.5e},{},{},{:.5e}\n",
            decoder,
            p.ebno_db,
            p.bits,
            p.bit_errors,
            p.ber(),
            p.frames,
            p.frame_errors,
            p.fer()
        ));
    }
    out
}

/// Write the CSV table to `path`.
pub fn emit_csv(curves: &[BerCurve], path: &Path) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::InvalidConfig("no curves to write".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(csv_string(curves).as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Parse a CSV file produced by [`emit_csv`], grouping rows into curves by
/// decoder name in file order.
pub fn read_csv(path: &Path) -> Result<Vec<BerCurve>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    if header.trim_end() != "decoder,ebno_db,bits,errors,ber,frames,frame_errors,fer" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut curves: Vec<BerCurve> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let parse_err = |what: &str| Error::Parse {
            line: line_no,
            msg: format!("invalid {what}"),
        };
        let point = BerPoint {
            ebno_db: fields[1].parse().map_err(|_| parse_err("ebno_db"))?,
            bits: fields[2].parse().map_err(|_| parse_err("bits"))?,
            bit_errors: fields[3].parse().map_err(|_| parse_err("errors"))?,
            frames: fields[5].parse().map_err(|_| parse_err("frames"))?,
            frame_errors: fields[6].parse().map_err(|_| parse_err("frame_errors"))?,
        };
        match curves.last_mut() {
            Some(c) if c.decoder == fields[0] => c.points.push(point),
            _ => curves.push(BerCurve {
                decoder: fields[0].to_string(),
                points: vec![point],
            }),
        }
    }
    Ok(curves)
}

/// Floor of the semilog axis; zero-error points are clamped here.
pub const PLOT_BER_FLOOR: f64 = 1e-8;

const PLOT_COLORS: [&str; 6] = [
    "#1f6fb2", "#c23b22", "#2e8b57", "#8950b0", "#b8860b", "#444444",
];
const PLOT_DASHES: [&str; 6] = ["none", "8 4", "2 3", "8 3 2 3", "12 3", "4 6"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render a semilog-y BER-vs-Eb/N0 chart as a standalone SVG document:
/// one dashed, colored polyline per decoder, decade gridlines, a legend,
/// and a `(=0)` annotation on points clamped at the axis floor.
pub fn emit_svg_plot(curves: &[BerCurve], path: &Path) -> Result<()> {
    if curves.is_empty() || curves.iter().any(|c| c.points.is_empty()) {
        return Err(Error::InvalidConfig("empty curve".into()));
    }

    let (width, height) = (800.0, 560.0);
    let (left, right, top, bottom) = (70.0, 24.0, 28.0, 52.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    for p in curves.iter().flat_map(|c| &c.points) {
        x_min = x_min.min(p.ebno_db);
        x_max = x_max.max(p.ebno_db);
    }
    if x_max - x_min < 1e-9 {
        x_min -= 1.0;
        x_max += 1.0;
    }
    let y_top = 0.0; // log10(1)
    let y_bottom = PLOT_BER_FLOOR.log10();

    let x_of = |ebno: f64| left + (ebno - x_min) / (x_max - x_min) * plot_w;
    let y_of = |ber: f64| {
        let l = ber.max(PLOT_BER_FLOOR).log10().clamp(y_bottom, y_top);
        top + (y_top - l) / (y_top - y_bottom) * plot_h
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    ));
    svg.push('\n');
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    svg.push('\n');

    // decade gridlines and y labels
    let mut decade = 0i32;
    while f64::from(decade) >= y_bottom {
        let y = y_of(10f64.powi(decade));
        svg.push_str(&format!(
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            left + plot_w
        ));
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end" font-family="sans-serif">1e{decade}</text>"#,
            left - 6.0,
            y + 4.0
        ));
        svg.push('\n');
        decade -= 1;
    }
    // x gridlines per dB and labels
    let mut x_tick = x_min.ceil();
    while x_tick <= x_max + 1e-9 {
        let x = x_of(x_tick);
        svg.push_str(&format!(
            r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#eeeeee" stroke-width="1"/>"##,
            top + plot_h
        ));
        svg.push_str(&format!(
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle" font-family="sans-serif">{x_tick}</text>"#,
            top + plot_h + 16.0
        ));
        svg.push('\n');
        x_tick += 1.0;
    }
    // frame and axis titles
    svg.push_str(&format!(
        r##"<rect x="{left}" y="{top}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#333333"/>"##
    ));
    svg.push_str(&format!(
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle" font-family="sans-serif">Eb/N0 (dB)</text>"#,
        left + plot_w / 2.0,
        height - 14.0
    ));
    svg.push_str(&format!(
        r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 16 {:.2})">BER</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    ));
    svg.push('\n');

    for (i, curve) in curves.iter().enumerate() {
        let color = PLOT_COLORS[i % PLOT_COLORS.len()];
        let dash = PLOT_DASHES[i % PLOT_DASHES.len()];
        let mut points: Vec<&BerPoint> = curve.points.iter().collect();
        points.sort_by(|a, b| a.ebno_db.partial_cmp(&b.ebno_db).expect("finite Eb/N0"));

        let coords: Vec<String> = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x_of(p.ebno_db), y_of(p.ber())))
            .collect();
        svg.push_str(&format!(
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            coords.join(" ")
        ));
        svg.push('\n');
        for p in &points {
            let (x, y) = (x_of(p.ebno_db), y_of(p.ber()));
            svg.push_str(&format!(
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#
            ));
            if p.bit_errors == 0 {
                // clamped at the axis floor
                svg.push_str(&format!(
                    r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle" font-family="sans-serif" fill="{color}">(=0)</text>"#,
                    y - 6.0
                ));
            }
        }
        svg.push('\n');
    }

    // legend
    let legend_x = left + plot_w - 150.0;
    let mut legend_y = top + 16.0;
    for (i, curve) in curves.iter().enumerate() {
        let color = PLOT_COLORS[i % PLOT_COLORS.len()];
        let dash = PLOT_DASHES[i % PLOT_DASHES.len()];
        svg.push_str(&format!(
            r#"<line x1="{legend_x}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/>"#,
            legend_x + 34.0
        ));
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">{}</text>"#,
            legend_x + 40.0,
            legend_y + 4.0,
            xml_escape(&curve.decoder)
        ));
        svg.push('\n');
        legend_y += 18.0;
    }

    svg.push_str("</svg>\n");
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(svg.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Eb/N0 at which `curve` crosses `target_ber`, by log-linear interpolation
/// between measured points. Zero-error points are ignored. `None` when the
/// curve never crosses the target.
pub fn ebno_at_ber(curve: &BerCurve, target_ber: f64) -> Option<f64> {
    let mut points: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.bit_errors > 0)
        .map(|p| (p.ebno_db, p.ber().log10()))
        .collect();
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite Eb/N0"));
    let target = target_ber.log10();
    for pair in points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        if (y0 - target) * (y1 - target) <= 0.0 && (y0 - y1).abs() > 1e-12 {
            return Some(x0 + (y0 - target) / (y0 - y1) * (x1 - x0));
        }
    }
    None
}

/// Write the plain-text comparison report: per-point resolution tables, the
/// interpolated Eb/N0 each decoder needs to reach `target_ber`, and the
/// measured gap between the ensemble decoder and the Viterbi baseline, set
/// against the claimed 2 dB / 2.5 dB improvement figures this workbench
/// exists to audit.
pub fn write_gap_report(curves: &[BerCurve], target_ber: f64, path: &Path) -> Result<()> {
    if curves.is_empty() {
        return Err(Error::InvalidConfig("no curves to report on".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "Decoder comparison at target BER {target_ber:.1e}")?;
    writeln!(out, "=============================================")?;
    for curve in curves {
        writeln!(out)?;
        writeln!(out, "decoder: {}", curve.decoder)?;
        writeln!(out, "  ebno_db      bits    errors        ber  resolution")?;
        for p in &curve.points {
            let res = if p.bit_errors >= 100 { "ok" } else { "LOW" };
            writeln!(
                out,
                "  {:7.2}  {:9}  {:8}  {:.3e}  {res}",
                p.ebno_db,
                p.bits,
                p.bit_errors,
                p.ber()
            )?;
        }
        match ebno_at_ber(curve, target_ber) {
            Some(x) => writeln!(out, "  reaches {target_ber:.1e} at {x:.2} dB (interpolated)")?,
            None => writeln!(out, "  does not cross {target_ber:.1e} in the measured range")?,
        }
    }
    writeln!(out)?;
    let find = |name: &str| curves.iter().find(|c| c.decoder == name);
    if let (Some(vit), Some(ens)) = (find("viterbi"), find("ensemble")) {
        match (ebno_at_ber(vit, target_ber), ebno_at_ber(ens, target_ber)) {
            (Some(xv), Some(xe)) => {
                writeln!(
                    out,
                    "measured ensemble-vs-viterbi gap at BER {target_ber:.1e}: {:+.2} dB",
                    xv - xe
                )?;
                writeln!(
                    out,
                    "(positive means the ensemble reaches the target at a lower Eb/N0)"
                )?;
            }
            _ => writeln!(
                out,
                "gap at BER {target_ber:.1e} not measurable: a curve does not cross the target"
            )?,
        }
        writeln!(
            out,
            "claimed improvement figures under audit: approximately 2 dB and 2.5 dB at BER 1e-5"
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::uncoded_ber_reference;

    fn quick_cfg(ebno: Vec<f64>, min_errors: u64, max_bits: u64) -> SweepConfig {
        SweepConfig {
            ebno_db: ebno,
            frame_info_len: 500,
            stop: StopRule {
                min_bit_errors: min_errors,
                max_bits,
            },
            seed: 1,
            workers: 2,
            partitions: 1,
        }
    }

    #[test]
    fn uncoded_sweep_matches_q_function() {
        let spec = ConvCodeSpec::default();
        let cfg = quick_cfg(vec![0.0, 2.0, 4.0], 300, 2_000_000);
        let curve = ber_sweep::<f64>(DecoderKind::Uncoded, None, &cfg, &spec).unwrap();
        for p in &curve.points {
            let reference = uncoded_ber_reference(p.ebno_db);
            let sigma = (reference * (1.0 - reference) / p.bits as f64).sqrt();
            assert!(
                (p.ber() - reference).abs() < 3.0 * sigma,
                "{} dB: {} vs {reference}",
                p.ebno_db,
                p.ber()
            );
        }
    }

    #[test]
    fn viterbi_noiseless_sentinel_has_zero_errors() {
        // 30 dB is effectively noiseless for this code
        let spec = ConvCodeSpec::default();
        let cfg = quick_cfg(vec![30.0], 1, 100_000);
        let curve = ber_sweep::<f64>(DecoderKind::Viterbi, None, &cfg, &spec).unwrap();
        assert_eq!(curve.points[0].bit_errors, 0);
        assert!(curve.points[0].bits >= 100_000);
    }

    #[test]
    fn sweep_counts_independent_of_workers() {
        let spec = ConvCodeSpec::default();
        let mut cfg = quick_cfg(vec![2.0, 4.0], 80, 400_000);
        cfg.workers = 1;
        let one = ber_sweep::<f64>(DecoderKind::Viterbi, None, &cfg, &spec).unwrap();
        cfg.workers = 2;
        let two = ber_sweep::<f64>(DecoderKind::Viterbi, None, &cfg, &spec).unwrap();
        cfg.workers = 8;
        let eight = ber_sweep::<f64>(DecoderKind::Viterbi, None, &cfg, &spec).unwrap();
        assert_eq!(one, two);
        assert_eq!(one, eight);
        assert_eq!(csv_string(&[one]), csv_string(&[eight]));
    }

    #[test]
    fn viterbi_beats_uncoded_beyond_two_db() {
        let spec = ConvCodeSpec::default();
        let cfg = quick_cfg(vec![2.0, 3.0, 4.0], 150, 2_000_000);
        let coded = ber_sweep::<f64>(DecoderKind::Viterbi, None, &cfg, &spec).unwrap();
        for p in &coded.points {
            assert!(p.bit_errors > 10);
            assert!(
                p.ber() < uncoded_ber_reference(p.ebno_db),
                "{} dB: coded {} vs uncoded {}",
                p.ebno_db,
                p.ber(),
                uncoded_ber_reference(p.ebno_db)
            );
        }
    }

    #[test]
    fn ber_monotone_in_ebno_within_3_sigma() {
        let spec = ConvCodeSpec::default();
        let cfg = quick_cfg(vec![0.0, 1.0, 2.0, 3.0, 4.0], 200, 1_000_000);
        let curve = ber_sweep::<f64>(DecoderKind::Viterbi, None, &cfg, &spec).unwrap();
        for pair in curve.points.windows(2) {
            let slack = 3.0 * (pair[0].ber_sigma() + pair[1].ber_sigma());
            assert!(
                pair[1].ber() <= pair[0].ber() + slack,
                "{} -> {} dB: {} -> {}",
                pair[0].ebno_db,
                pair[1].ebno_db,
                pair[0].ber(),
                pair[1].ber()
            );
        }
    }

    #[test]
    fn nn_decoders_require_model() {
        let spec = ConvCodeSpec::default();
        let cfg = quick_cfg(vec![2.0], 10, 10_000);
        assert!(ber_sweep::<f64>(DecoderKind::Direct, None, &cfg, &spec).is_err());
        assert!(ber_sweep::<f64>(DecoderKind::Ensemble, None, &cfg, &spec).is_err());
    }

    #[test]
    fn csv_round_trip_and_ordering() {
        let curves = vec![
            BerCurve {
                decoder: "viterbi".into(),
                points: vec![
                    BerPoint {
                        ebno_db: 4.0,
                        bits: 1000,
                        bit_errors: 3,
                        frames: 10,
                        frame_errors: 2,
                    },
                    BerPoint {
                        ebno_db: 2.0,
                        bits: 1000,
                        bit_errors: 30,
                        frames: 10,
                        frame_errors: 8,
                    },
                ],
            },
            BerCurve {
                decoder: "uncoded".into(),
                points: vec![BerPoint {
                    ebno_db: 2.0,
                    bits: 500,
                    bit_errors: 19,
                    frames: 1,
                    frame_errors: 1,
                }],
            },
        ];
        let text = csv_string(&curves);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "decoder,ebno_db,bits,errors,ber,frames,frame_errors,fer");
        assert!(lines[1].starts_with("uncoded,2"));
        assert!(lines[2].starts_with("viterbi,2"));
        assert!(lines[3].starts_with("viterbi,4"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        emit_csv(&curves, &path).unwrap();
        let back = read_csv(&path).unwrap();
        let all_in: Vec<&BerPoint> = curves.iter().flat_map(|c| &c.points).collect();
        let all_out: Vec<&BerPoint> = back.iter().flat_map(|c| &c.points).collect();
        assert_eq!(all_in.len(), all_out.len());
        for p in all_in {
            assert!(all_out.iter().any(|q| {
                q.ebno_db == p.ebno_db
                    && q.bits == p.bits
                    && q.bit_errors == p.bit_errors
                    && q.frames == p.frames
                    && q.frame_errors == p.frame_errors
            }));
        }
    }

    #[test]
    fn single_point_csv_is_two_lines() {
        let curve = BerCurve {
            decoder: "uncoded".into(),
            points: vec![BerPoint {
                ebno_db: 1.0,
                bits: 100,
                bit_errors: 7,
                frames: 1,
                frame_errors: 1,
            }],
        };
        assert_eq!(csv_string(&[curve]).lines().count(), 2);
    }

    #[test]
    fn svg_is_written_and_balanced() {
        let curves = vec![
            BerCurve {
                decoder: "viterbi".into(),
                points: (0..5)
                    .map(|i| BerPoint {
                        ebno_db: f64::from(i),
                        bits: 10_000,
                        bit_errors: 1000 >> i,
                        frames: 10,
                        frame_errors: 5,
                    })
                    .collect(),
            },
            BerCurve {
                decoder: "ensemble".into(),
                points: (0..5)
                    .map(|i| BerPoint {
                        ebno_db: f64::from(i),
                        bits: 10_000,
                        bit_errors: if i == 4 { 0 } else { 300 >> i },
                        frames: 10,
                        frame_errors: 5,
                    })
                    .collect(),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        emit_svg_plot(&curves, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        // two polylines with distinct dash patterns
        assert_eq!(text.matches("<polyline").count(), 2);
        assert!(text.contains(r#"stroke-dasharray="none""#));
        assert!(text.contains(r#"stroke-dasharray="8 4""#));
        // zero-error point annotated at the floor
        assert!(text.contains("(=0)"));
        // crude well-formedness: every element opened is closed
        let opens = text.matches('<').count();
        let closes = text.matches('>').count();
        assert_eq!(opens, closes);

        assert!(emit_svg_plot(&[], &path).is_err());
    }

    #[test]
    fn gap_interpolation() {
        let mk = |name: &str, shift: f64| BerCurve {
            decoder: name.into(),
            points: (0..6)
                .map(|i| {
                    let ebno = f64::from(i);
                    let ber = 10f64.powf(-1.0 - (ebno - shift) * 0.8);
                    BerPoint {
                        ebno_db: ebno,
                        bits: 1_000_000_000,
                        bit_errors: (ber * 1e9) as u64,
                        frames: 10,
                        frame_errors: 10,
                    }
                })
                .collect(),
        };
        let vit = mk("viterbi", 0.0);
        let ens = mk("ensemble", -2.0); // 2 dB better
        let xv = ebno_at_ber(&vit, 1e-4).unwrap();
        let xe = ebno_at_ber(&ens, 1e-4).unwrap();
        assert!((xv - xe - 2.0).abs() < 0.05, "{xv} vs {xe}");

        let dir = tempfile::tempdir().unwrap();
        let report = dir.path().join("report.txt");
        write_gap_report(&[vit, ens], 1e-4, &report).unwrap();
        let text = std::fs::read_to_string(&report).unwrap();
        assert!(text.contains("measured ensemble-vs-viterbi gap"));
        assert!(text.contains("2 dB and 2.5 dB"));
    }
}

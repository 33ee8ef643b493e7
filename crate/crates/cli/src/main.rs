use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use seglink::bench::{benchmark_with, write_csv};
use seglink::output::{edge_map_rgb, render_svg, write_jsonl, write_pfm, OverlayStyle};
use seglink::pipeline::Statistic;
use seglink::synth::{natural_like, SceneSpec};
use seglink::{Detector, DetectorConfig, Error, GrayImage, Result};

/// Straight line segment extraction from contextual and local edges.
#[derive(Parser)]
#[command(name = "seglink", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect line segments in an image and write them as JSON lines.
    ///
    /// Pixels closer to the border than the sample window along a scan
    /// direction cannot start a segment in that direction.
    Detect {
        /// Input image (PNG or PGM).
        input: PathBuf,
        /// Result file; standard output when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Write an SVG overlay of the detections on the input.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Draw only midlines in the overlay.
        #[arg(long, requires = "overlay")]
        midlines: bool,
        /// Write per-direction edge maps and window statistics into this directory.
        #[arg(long)]
        dump_edges: Option<PathBuf>,
        /// Write the distance lookup table as CSV.
        #[arg(long)]
        dump_lut: Option<PathBuf>,
        #[command(flatten)]
        params: Params,
    },
    /// Render a synthetic test image from a JSON scene description.
    Synth {
        spec: PathBuf,
        /// Output image.
        #[arg(long)]
        out: PathBuf,
        /// Ground truth JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Time detection on images and print a CSV table.
    Bench {
        /// Input images.
        inputs: Vec<PathBuf>,
        /// Also benchmark a generated cluttered image of this side length; repeatable.
        #[arg(long = "synthetic", value_name = "SIDE")]
        synthetic: Vec<usize>,
        /// Timed runs per image; the median is reported.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Write the table here instead of standard output.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: Params,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticArg {
    Tv,
    T,
}

#[derive(clap::Args)]
struct Params {
    /// JSON file with detector settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of scan directions.
    #[arg(long)]
    directions: Option<usize>,
    /// Samples per window.
    #[arg(long)]
    samples: Option<usize>,
    /// Largest bridged gap, in pixels.
    #[arg(long)]
    gap: Option<usize>,
    /// Contextual edge threshold on the distance, in (0, 1).
    #[arg(long)]
    ctx_threshold: Option<f64>,
    /// Floor of the local derivative threshold.
    #[arg(long)]
    local_threshold: Option<f64>,
    /// Drop segments with a shorter midline.
    #[arg(long)]
    min_length: Option<f64>,
    /// Keep near-identical detections from neighbouring directions.
    #[arg(long)]
    no_dedup: bool,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Two-sample statistic for contextual edges.
    #[arg(long, value_enum)]
    statistic: Option<StatisticArg>,
}

impl Params {
    fn config(&self) -> Result<DetectorConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
            }
            None => DetectorConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(directions => directions, samples => window, gap => max_gap, ctx_threshold => contextual_threshold,
             local_threshold => local_threshold, min_length => min_length);
        if self.no_dedup {
            cfg.dedup = false;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(s) = self.statistic {
            cfg.statistic = match s {
                StatisticArg::Tv => Statistic::Tv,
                StatisticArg::T => Statistic::TStatistic,
            };
        }
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish<W: Write>(mut w: W, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn detect_cmd(
    input: &Path,
    out: Option<&Path>,
    overlay: Option<&Path>,
    midlines: bool,
    dump_edges: Option<&Path>,
    dump_lut: Option<&Path>,
    params: &Params,
) -> Result<()> {
    let detector = Detector::new(params.config()?)?;
    let image = GrayImage::load(input)?;
    if let Some(path) = dump_lut {
        let mut w = create(path)?;
        detector.lut().write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        finish(w, path)?;
    }
    let result = match dump_edges {
        Some(dir) => {
            let (result, outputs) = detector.detect_detailed(&image)?;
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for o in &outputs {
                let n = o.direction.index;
                edge_map_rgb(&o.edges).save(dir.join(format!("dir{n:02}_edges.png")))?;
                for (name, plane) in [("mu", o.params.mu_plane()), ("sigma2", o.params.sigma2_plane())] {
                    let path = dir.join(format!("dir{n:02}_{name}.pfm"));
                    let mut w = create(&path)?;
                    write_pfm(&mut w, image.width(), image.height(), plane).map_err(|e| Error::io(&path, e))?;
                    finish(w, &path)?;
                }
            }
            result
        }
        None => detector.detect(&image)?,
    };
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write_jsonl(&result, &mut w)?;
            finish(w, path)?;
        }
        None => write_jsonl(&result, io::stdout().lock())?,
    }
    if let Some(path) = overlay {
        let style = OverlayStyle { midline_only: midlines, ..Default::default() };
        let svg = render_svg(&image, &result.rectangles, &style)?;
        fs::write(path, svg).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn synth_cmd(spec: &Path, out: &Path, truth: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(spec).map_err(|e| Error::io(spec, e))?;
    let spec: SceneSpec = serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let (image, gt) = spec.generate()?;
    image.save(out)?;
    if let Some(path) = truth {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &gt)?;
        finish(w, path)?;
    }
    Ok(())
}

fn bench_cmd(inputs: &[PathBuf], synthetic: &[usize], reps: usize, out: Option<&Path>, params: &Params) -> Result<()> {
    let detector = Detector::new(params.config()?)?;
    let mut images = Vec::new();
    for path in inputs {
        images.push((path.display().to_string(), GrayImage::load(path)?));
    }
    for &side in synthetic {
        images.push((format!("synthetic-{side}"), natural_like(side, side, side as u64)));
    }
    if images.is_empty() {
        return Err(Error::InvalidConfig("nothing to benchmark: give images or --synthetic".into()));
    }
    let rows = benchmark_with(&detector, &images, reps)?;
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&rows, &mut w).map_err(|e| Error::io(path, e))?;
            finish(w, path)
        }
        None => write_csv(&rows, io::stdout().lock()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Detect { input, out, overlay, midlines, dump_edges, dump_lut, params } => detect_cmd(
            input,
            out.as_deref(),
            overlay.as_deref(),
            *midlines,
            dump_edges.as_deref(),
            dump_lut.as_deref(),
            params,
        ),
        Command::Synth { spec, out, truth } => synth_cmd(spec, out, truth.as_deref()),
        Command::Bench { inputs, synthetic, reps, out, params } => bench_cmd(inputs, synthetic, *reps, out.as_deref(), params),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seglink: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

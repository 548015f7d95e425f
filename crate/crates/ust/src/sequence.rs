//! Image sequences on disk: `frame_%06d.ppm` files plus a `groundtruth.txt`
//! with one `x,y,w,h` box (top-left corner convention) per frame.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use ust_core::features::{color_histogram, RgbImage};
use ust_core::simulator::Scenario;
use ust_core::tracker::FrameSource;
use ust_core::{Rect, TargetState};

use crate::ppm;

pub const GROUND_TRUTH_FILE: &str = "groundtruth.txt";

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:06}.ppm")
}

/// Parses ground-truth boxes. Fields may be separated by commas, tabs or
/// spaces; blank lines are skipped.
pub fn parse_ground_truth(text: &str) -> Result<Vec<TargetState>> {
    let mut boxes = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("ground truth line {}: not a number", line_no + 1))?;
        let [x, y, w, h] = fields[..] else {
            bail!("ground truth line {}: expected 4 fields, found {}", line_no + 1, fields.len());
        };
        let b = TargetState::from_corner(x, y, w, h)
            .with_context(|| format!("ground truth line {}: degenerate box", line_no + 1))?;
        boxes.push(b);
    }
    Ok(boxes)
}

pub fn format_ground_truth(boxes: &[TargetState]) -> String {
    let mut out = String::new();
    for b in boxes {
        let [x, y, w, h] = b.to_corner();
        out.push_str(&format!("{x},{y},{w},{h}\n"));
    }
    out
}

/// A directory of PPM frames with ground truth. Frames are decoded on
/// demand.
#[derive(Debug, Clone)]
pub struct PpmSequence {
    dir: PathBuf,
    name: String,
    frames: Vec<PathBuf>,
    truth: Vec<TargetState>,
}

impl PpmSequence {
    pub fn open(dir: &Path) -> Result<Self> {
        let gt_path = dir.join(GROUND_TRUTH_FILE);
        let text = fs::read_to_string(&gt_path).with_context(|| format!("reading {}", gt_path.display()))?;
        let truth = parse_ground_truth(&text).with_context(|| format!("parsing {}", gt_path.display()))?;
        let mut frames = Vec::new();
        while dir.join(frame_file_name(frames.len())).is_file() {
            frames.push(dir.join(frame_file_name(frames.len())));
        }
        ensure!(!frames.is_empty(), "no {} in {}", frame_file_name(0), dir.display());
        ensure!(
            truth.len() >= frames.len(),
            "{} has {} boxes for {} frames",
            gt_path.display(),
            truth.len(),
            frames.len()
        );
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".to_string());
        let mut truth = truth;
        truth.truncate(frames.len());
        Ok(PpmSequence { dir: dir.to_path_buf(), name, frames, truth })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn ground_truth(&self) -> &[TargetState] {
        &self.truth
    }

    pub fn frame(&self, t: usize, bins_per_channel: usize) -> Result<ImageFrame> {
        let path = self.frames.get(t).with_context(|| format!("frame {t} out of range"))?;
        let image = ppm::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(ImageFrame { index: t, image, bins_per_channel })
    }
}

/// One decoded frame. A box's raw feature is the color histogram of the
/// pixels it covers.
#[derive(Debug, Clone)]
pub struct ImageFrame {
    pub index: usize,
    pub image: RgbImage,
    pub bins_per_channel: usize,
}

impl FrameSource for ImageFrame {
    fn index(&self) -> usize {
        self.index
    }

    fn bounds(&self) -> Rect {
        Rect::frame(self.image.width() as f64, self.image.height() as f64)
    }

    fn raw_feature(&self, state: &TargetState) -> ust_core::Result<Vec<f64>> {
        let patch = self.image.crop(&state.rect());
        color_histogram(&patch, self.bins_per_channel).map(|f| f.into_inner())
    }
}

/// Renders `scenario` to `dir` as a PPM sequence with ground truth.
pub fn render_scenario(scenario: &Scenario, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for t in 0..scenario.frame_count() {
        let path = dir.join(frame_file_name(t));
        ppm::write(&path, &scenario.render(t)).with_context(|| format!("writing {}", path.display()))?;
    }
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let mut w = BufWriter::new(fs::File::create(&gt_path).with_context(|| format!("creating {}", gt_path.display()))?);
    w.write_all(format_ground_truth(scenario.trajectory()).as_bytes())?;
    w.flush()?;
    Ok(())
}

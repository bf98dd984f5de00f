//! Multi-pedestrian scenes: ETH/UCY ingestion, sliding-window extraction, a
//! synthetic branching generator, and the on-disk scene container.
//!
//! Scene container (`npsn-scenes v1`), line oriented:
//!
//! ```text
//! npsn-scenes v1
//! scene <frame_origin> <source> <L>
//! traj <label|-> x0 y0 x1 y1 … x19 y19      (L lines)
//! ```
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so a write/read cycle is bit exact.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::transform::box_muller_pair;

pub const T_OBS: usize = 8;
pub const T_PRED: usize = 12;
pub const SEQ_LEN: usize = T_OBS + T_PRED;

/// World position in meters.
pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    positions: Vec<Point>,
}

impl Trajectory {
    pub fn new(positions: Vec<Point>) -> Result<Self> {
        if positions.len() != SEQ_LEN {
            return Err(Error::ShapeMismatch {
                expected: format!("{SEQ_LEN} frames"),
                found: format!("{} frames", positions.len()),
            });
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory coordinate".into()));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn observed(&self) -> &[Point] {
        &self.positions[..T_OBS]
    }

    pub fn future(&self) -> &[Point] {
        &self.positions[T_OBS..]
    }

    pub fn translated(&self, offset: Point) -> Self {
        Self {
            positions: self
                .positions
                .iter()
                .map(|p| [p[0] + offset[0], p[1] + offset[1]])
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub trajectories: Vec<Trajectory>,
    pub frame_origin: i64,
    pub source: String,
}

impl Scene {
    pub fn new(
        trajectories: Vec<Trajectory>,
        frame_origin: i64,
        source: impl Into<String>,
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::invalid("a scene needs at least one pedestrian"));
        }
        let source = source.into();
        if source.is_empty() || source.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "scene source tag '{source}' must be a single non-empty word"
            )));
        }
        Ok(Self {
            trajectories,
            frame_origin,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Observed windows of every pedestrian.
    pub fn observations(&self) -> Vec<&[Point]> {
        self.trajectories.iter().map(Trajectory::observed).collect()
    }
}

/// Scenes plus optional per-pedestrian ground-truth branch labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub scenes: Vec<Scene>,
    pub labels: Option<Vec<Vec<usize>>>,
}

impl Dataset {
    pub fn pedestrian_count(&self) -> usize {
        self.scenes.iter().map(Scene::len).sum()
    }
}

/// Every observation of one pedestrian, frames strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTrack {
    pub ped_id: i64,
    pub frames: Vec<i64>,
    pub positions: Vec<Point>,
}

fn parse_frame(token: &str) -> Option<i64> {
    let v: f64 = token.parse().ok()?;
    (v.fract() == 0.0 && v.is_finite()).then_some(v as i64)
}

/// Parses ETH/UCY text: one `frame ped x y` observation per line,
/// whitespace-separated. Blank lines and `#` comments are skipped.
pub fn parse_ethucy(text: &str, path: &Path) -> Result<Vec<RawTrack>> {
    let mut tracks: BTreeMap<i64, RawTrack> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(format!(
                "expected 4 fields, found {}",
                fields.len()
            )));
        }
        let frame = parse_frame(fields[0])
            .ok_or_else(|| parse_err(format!("bad frame id '{}'", fields[0])))?;
        let ped = parse_frame(fields[1])
            .ok_or_else(|| parse_err(format!("bad pedestrian id '{}'", fields[1])))?;
        let mut xy = [0.0; 2];
        for (slot, token) in xy.iter_mut().zip(&fields[2..]) {
            *slot = token
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("bad coordinate '{token}'")))?;
        }
        let track = tracks.entry(ped).or_insert_with(|| RawTrack {
            ped_id: ped,
            frames: Vec::new(),
            positions: Vec::new(),
        });
        if let Some(&last) = track.frames.last() {
            if frame <= last {
                return Err(Error::Data(format!(
                    "{}:{line_no}: pedestrian {ped} frame {frame} does not follow frame {last}",
                    path.display()
                )));
            }
        }
        track.frames.push(frame);
        track.positions.push(xy);
    }
    Ok(tracks.into_values().collect())
}

pub fn load_ethucy(path: impl AsRef<Path>) -> Result<Vec<RawTrack>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ethucy(&text, path)
}

/// Writes tracks in ETH/UCY layout, ordered by frame then pedestrian.
pub fn write_ethucy(tracks: &[RawTrack], path: impl AsRef<Path>) -> Result<()> {
    let mut rows: Vec<(i64, i64, Point)> = tracks
        .iter()
        .flat_map(|t| {
            t.frames
                .iter()
                .zip(&t.positions)
                .map(move |(&f, &p)| (f, t.ped_id, p))
        })
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::new();
    for (f, ped, p) in rows {
        let _ = writeln!(out, "{f}\t{ped}\t{}\t{}", p[0], p[1]);
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Flattens scenes back into raw tracks (one pedestrian id per trajectory,
/// frames spaced by `frame_step`).
pub fn scenes_to_tracks(scenes: &[Scene], frame_step: i64) -> Vec<RawTrack> {
    let mut next_id = 0;
    let mut tracks = Vec::new();
    for scene in scenes {
        for traj in &scene.trajectories {
            tracks.push(RawTrack {
                ped_id: next_id,
                frames: (0..SEQ_LEN as i64)
                    .map(|t| scene.frame_origin + t * frame_step)
                    .collect(),
                positions: traj.positions.clone(),
            });
            next_id += 1;
        }
    }
    tracks
}

/// Sliding windows of [`SEQ_LEN`] consecutive dataset frames, advanced by
/// `stride`. Pedestrians missing from any frame of a window are dropped;
/// windows with no complete pedestrian are skipped.
pub fn extract_scenes(tracks: &[RawTrack], stride: usize, source: &str) -> Result<Vec<Scene>> {
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let mut frames: Vec<i64> = tracks
        .iter()
        .flat_map(|t| t.frames.iter().copied())
        .collect();
    frames.sort_unstable();
    frames.dedup();
    if frames.len() < SEQ_LEN {
        return Ok(Vec::new());
    }
    let mut scenes = Vec::new();
    for start in (0..=frames.len() - SEQ_LEN).step_by(stride) {
        let window = &frames[start..start + SEQ_LEN];
        let mut trajectories = Vec::new();
        for track in tracks {
            let Ok(first) = track.frames.binary_search(&window[0]) else {
                continue;
            };
            let Some(span) = track.frames.get(first..first + SEQ_LEN) else {
                continue;
            };
            if span == window {
                trajectories.push(Trajectory {
                    positions: track.positions[first..first + SEQ_LEN].to_vec(),
                });
            }
        }
        if !trajectories.is_empty() {
            scenes.push(Scene {
                trajectories,
                frame_origin: window[0],
                source: source.to_string(),
            });
        }
    }
    Ok(scenes)
}

/// Turn executed by a synthetic pedestrian over the prediction window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Straight = 0,
    Left = 1,
    Right = 2,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Straight, Branch::Left, Branch::Right];

    pub fn turn_angle(self) -> f64 {
        match self {
            Branch::Straight => 0.0,
            Branch::Left => FRAC_PI_2,
            Branch::Right => -FRAC_PI_2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_scenes: usize,
    /// Probabilities of straight, left, right (a prefix may be given).
    pub branch_probabilities: Vec<f64>,
    /// Meters per frame.
    pub speed: f64,
    pub noise_sigma: f64,
    /// Emit crossing pairs instead of independent walkers.
    pub interaction: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_scenes: 2000,
            branch_probabilities: vec![0.34, 0.33, 0.33],
            speed: 0.4,
            noise_sigma: 0.05,
            interaction: false,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let probs = &self.branch_probabilities;
        if probs.is_empty() {
            return Err(Error::invalid("branch list is empty"));
        }
        if probs.len() > Branch::ALL.len() {
            return Err(Error::invalid(format!(
                "at most {} branches (straight, left, right) are supported",
                Branch::ALL.len()
            )));
        }
        if probs.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::invalid("branch probabilities must be non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "branch probabilities sum to {total}, not 1"
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid(
                "noise sigma must be finite and non-negative",
            ));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(Error::invalid("speed must be finite and non-negative"));
        }
        Ok(())
    }
}

fn sample_branch(rng: &mut ChaCha8Rng, probs: &[f64]) -> Branch {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Branch::ALL[i];
        }
    }
    // Rounding left u above the running sum; take the last branch with mass.
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    Branch::ALL[last]
}

fn normal_pair(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let (a, b): (f64, f64) = (rng.gen(), rng.gen());
    box_muller_pair(a, 1.0 - b)
}

fn walk(start: Point, heading: f64, speed: f64, branch: Branch) -> Vec<Point> {
    let step = |angle: f64| [speed * angle.cos(), speed * angle.sin()];
    let v = step(heading);
    let mut positions: Vec<Point> = (0..T_OBS)
        .map(|t| [start[0] + t as f64 * v[0], start[1] + t as f64 * v[1]])
        .collect();
    let last = positions[T_OBS - 1];
    let turn = branch.turn_angle();
    let mut p = last;
    for k in 1..=T_PRED {
        if turn == 0.0 {
            p = [last[0] + k as f64 * v[0], last[1] + k as f64 * v[1]];
        } else {
            let d = step(heading + turn * k as f64 / T_PRED as f64);
            p = [p[0] + d[0], p[1] + d[1]];
        }
        positions.push(p);
    }
    positions
}

/// Generates branching scenes: each pedestrian walks straight through the
/// observation window, then follows a sampled branch (straight or a gradual
/// ±90° turn) over the prediction window, with isotropic Gaussian jitter.
pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut scenes = Vec::with_capacity(spec.n_scenes);
    let mut labels = Vec::with_capacity(spec.n_scenes);
    for s in 0..spec.n_scenes {
        let peds = if spec.interaction {
            2
        } else {
            rng.gen_range(1..=3)
        };
        let mut starts = Vec::with_capacity(peds);
        let first_start = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
        let first_heading = rng.gen_range(0.0..TAU);
        starts.push((first_start, first_heading));
        for _ in 1..peds {
            if spec.interaction {
                // Second walker crosses the first one's path two frames after it.
                let cross = [
                    first_start[0] + (T_OBS as f64 + 2.0) * spec.speed * first_heading.cos(),
                    first_start[1] + (T_OBS as f64 + 2.0) * spec.speed * first_heading.sin(),
                ];
                let side = if rng.gen::<bool>() {
                    FRAC_PI_2
                } else {
                    -FRAC_PI_2
                };
                let heading = first_heading + side;
                let back = T_OBS as f64 * spec.speed;
                starts.push((
                    [
                        cross[0] - back * heading.cos(),
                        cross[1] - back * heading.sin(),
                    ],
                    heading,
                ));
            } else {
                starts.push((
                    [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)],
                    rng.gen_range(0.0..TAU),
                ));
            }
        }
        let mut trajectories = Vec::with_capacity(peds);
        let mut scene_labels = Vec::with_capacity(peds);
        for (start, heading) in starts {
            let branch = sample_branch(&mut rng, &spec.branch_probabilities);
            let mut positions = walk(start, heading, spec.speed, branch);
            if spec.noise_sigma > 0.0 {
                for p in &mut positions {
                    let n = normal_pair(&mut rng);
                    p[0] += spec.noise_sigma * n[0];
                    p[1] += spec.noise_sigma * n[1];
                }
            }
            trajectories.push(Trajectory { positions });
            scene_labels.push(branch as usize);
        }
        scenes.push(Scene {
            trajectories,
            frame_origin: (s * 10 * SEQ_LEN) as i64,
            source: "synth".to_string(),
        });
        labels.push(scene_labels);
    }
    Ok(Dataset {
        scenes,
        labels: Some(labels),
    })
}

const SCENE_MAGIC: &str = "npsn-scenes v1";

pub fn write_scenes(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scenes_to_string(dataset)).map_err(|e| Error::io(path, e))
}

pub fn scenes_to_string(dataset: &Dataset) -> String {
    let mut out = String::from(SCENE_MAGIC);
    out.push('\n');
    for (s, scene) in dataset.scenes.iter().enumerate() {
        let _ = writeln!(
            out,
            "scene {} {} {}",
            scene.frame_origin,
            scene.source,
            scene.len()
        );
        for (l, traj) in scene.trajectories.iter().enumerate() {
            match dataset.labels.as_ref() {
                Some(labels) => {
                    let _ = write!(out, "traj {}", labels[s][l]);
                }
                None => out.push_str("traj -"),
            }
            for p in &traj.positions {
                let _ = write!(out, " {} {}", p[0], p[1]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_scenes(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenes(&text, path)
}

pub fn parse_scenes(text: &str, path: &Path) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, header)) if header.trim() == SCENE_MAGIC => {}
        _ => return Err(err(1, format!("missing '{SCENE_MAGIC}' header"))),
    }
    let mut scenes = Vec::new();
    let mut labels: Vec<Vec<Option<usize>>> = Vec::new();
    while let Some((line_no, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "scene" {
            return Err(err(
                line_no,
                "expected 'scene <frame_origin> <source> <L>'".into(),
            ));
        }
        let frame_origin: i64 = fields[1]
            .parse()
            .map_err(|_| err(line_no, format!("bad frame origin '{}'", fields[1])))?;
        let count: usize = fields[3]
            .parse()
            .map_err(|_| err(line_no, format!("bad pedestrian count '{}'", fields[3])))?;
        let mut trajectories = Vec::with_capacity(count);
        let mut scene_labels = Vec::with_capacity(count);
        for _ in 0..count {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| err(line_no, "scene truncated".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 + 2 * SEQ_LEN || fields[0] != "traj" {
                return Err(err(
                    line_no,
                    format!("expected 'traj <label> ' and {} coordinates", 2 * SEQ_LEN),
                ));
            }
            let label = match fields[1] {
                "-" => None,
                tok => Some(
                    tok.parse()
                        .map_err(|_| err(line_no, format!("bad label '{tok}'")))?,
                ),
            };
            let coords: Vec<f64> = fields[2..]
                .iter()
                .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| err(line_no, "bad coordinate".into()))?;
            let positions = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
            trajectories.push(Trajectory { positions });
            scene_labels.push(label);
        }
        scenes.push(
            Scene::new(trajectories, frame_origin, fields[2])
                .map_err(|e| err(line_no, e.to_string()))?,
        );
        labels.push(scene_labels);
    }
    let all_labelled = labels.iter().flatten().all(Option::is_some);
    let labels = (all_labelled && !scenes.is_empty()).then(|| {
        labels
            .into_iter()
            .map(|s| s.into_iter().flatten().collect())
            .collect()
    });
    Ok(Dataset { scenes, labels })
}

/// Long-format CSV for inspection: `scene,ped,frame,x,y,label`.
pub fn export_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_csv(dataset)).map_err(|e| Error::io(path, e))
}

pub fn dataset_to_csv(dataset: &Dataset) -> String {
    let mut out = String::from("scene,ped,frame,x,y,label\n");
    for (s, scene) in dataset.scenes.iter().enumerate() {
        for (l, traj) in scene.trajectories.iter().enumerate() {
            let label = dataset
                .labels
                .as_ref()
                .map_or_else(String::new, |labels| labels[s][l].to_string());
            for (t, p) in traj.positions.iter().enumerate() {
                let _ = writeln!(out, "{s},{l},{t},{},{},{label}", p[0], p[1]);
            }
        }
    }
    out
}

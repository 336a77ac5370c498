//! Deterministic synthetic scenarios: linear ground-truth motion plus
//! detections whose box jitter drives localization confidence and whose
//! occlusion severity drives classification confidence and appearance noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::detection::{Detection, Embedding, FrameInput};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::io::{write_detections, write_embeddings, write_ground_truth, DetectionRecord};
use crate::metrics::{GroundTruth, GtObject};

pub const DEFAULT_EMBEDDING_DIM: usize = 16;

// crossing family: sharp localization response, quiet boxes except while
// the hidden object re-emerges
const CROSSING_K_LOC: f64 = 8.0;
const CROSSING_JITTER: f64 = 0.015;
const EMERGENCE_FRAMES: u32 = 6;
const EMERGENCE_JITTER_SCALE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    /// Box at frame 0; the box at frame `t` is `start` shifted by `t * velocity`.
    pub start: BBox,
    pub velocity: (f64, f64),
    pub first_frame: u32,
    pub last_frame: Option<u32>,
}

impl ObjectSpec {
    pub fn new(start: BBox, velocity: (f64, f64)) -> Self {
        ObjectSpec {
            start,
            velocity,
            first_frame: 1,
            last_frame: None,
        }
    }

    pub fn box_at(&self, frame: u32) -> BBox {
        let t = frame as f64;
        self.start
            .translate(self.velocity.0 * t, self.velocity.1 * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionEvent {
    pub object: usize,
    pub first_frame: u32,
    pub last_frame: u32,
    pub severity: f64,
}

/// Window in which an object's box jitter std is multiplied by `jitter_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationEvent {
    pub object: usize,
    pub first_frame: u32,
    pub last_frame: u32,
    pub jitter_scale: f64,
}

/// Replaces the generated confidences of one object's detection in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceOverride {
    pub frame: u32,
    pub object: usize,
    pub cls_conf: f64,
    pub loc_conf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Per-coordinate box jitter std, as a fraction of box height.
    pub jitter_std: f64,
    /// Chance that a detection's jitter std is multiplied by `bad_box_scale`.
    pub bad_box_rate: f64,
    pub bad_box_scale: f64,
    /// `loc_conf = loc_max * clamp(1 - k_loc * |jitter| / h)`.
    pub k_loc: f64,
    /// `cls_conf = cls_max * clamp(1 - k_cls * severity)`.
    pub k_cls: f64,
    pub loc_max: f64,
    pub cls_max: f64,
    /// Std of the multiplicative `(1 + N)` factor on both confidences.
    pub conf_noise: f64,
    /// Per-component gaussian std on identity vectors, unoccluded.
    pub embedding_noise: f64,
    /// Extra embedding std per unit of occlusion severity.
    pub embedding_occlusion_noise: f64,
    pub miss_rate: f64,
    /// Extra miss probability per unit of occlusion severity.
    pub occlusion_miss_rate: f64,
    /// Mean number of clutter boxes per frame.
    pub clutter_rate: f64,
    pub clutter_loc_max: f64,
    pub clutter_cls_max: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            jitter_std: 0.0,
            bad_box_rate: 0.0,
            bad_box_scale: 1.0,
            k_loc: 2.0,
            k_cls: 0.6,
            loc_max: 1.0,
            cls_max: 1.0,
            conf_noise: 0.0,
            embedding_noise: 0.0,
            embedding_occlusion_noise: 0.0,
            miss_rate: 0.0,
            occlusion_miss_rate: 0.0,
            clutter_rate: 0.0,
            clutter_loc_max: 0.3,
            clutter_cls_max: 0.3,
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            jitter_std: 0.03,
            bad_box_rate: 0.1,
            bad_box_scale: 4.0,
            conf_noise: 0.03,
            embedding_noise: 0.05,
            embedding_occlusion_noise: 0.4,
            miss_rate: 0.02,
            occlusion_miss_rate: 0.2,
            clutter_rate: 0.5,
            ..NoiseModel::noiseless()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_frames: u32,
    pub arena: (f64, f64),
    pub objects: Vec<ObjectSpec>,
    pub occlusions: Vec<OcclusionEvent>,
    pub localization_events: Vec<LocalizationEvent>,
    pub overrides: Vec<ConfidenceOverride>,
    pub noise: NoiseModel,
    /// Zero disables embeddings.
    pub embedding_dim: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.n_frames == 0 {
            return bad("n_frames must be positive".into());
        }
        if !(self.arena.0 > 0.0
            && self.arena.1 > 0.0
            && self.arena.0.is_finite()
            && self.arena.1.is_finite())
        {
            return bad("arena must have positive finite size".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !o.start.is_valid() || o.start.area() <= 0.0 {
                return bad(format!("object {i}: start box has zero area"));
            }
            if !(o.velocity.0.is_finite() && o.velocity.1.is_finite()) {
                return bad(format!("object {i}: velocity not finite"));
            }
            if o.first_frame == 0 || o.last_frame.is_some_and(|l| l < o.first_frame) {
                return bad(format!("object {i}: bad frame window"));
            }
        }
        for e in &self.occlusions {
            if e.object >= self.objects.len() {
                return bad(format!(
                    "occlusion names object {} of {}",
                    e.object,
                    self.objects.len()
                ));
            }
            if !(0.0..=1.0).contains(&e.severity) || e.last_frame < e.first_frame {
                return bad("occlusion severity must be in [0, 1] over a non-empty window".into());
            }
        }
        for e in &self.localization_events {
            if e.object >= self.objects.len()
                || !(e.jitter_scale.is_finite() && e.jitter_scale >= 0.0)
            {
                return bad(format!("bad localization event for object {}", e.object));
            }
        }
        for o in &self.overrides {
            if o.object >= self.objects.len()
                || !(0.0..=1.0).contains(&o.cls_conf)
                || !(0.0..=1.0).contains(&o.loc_conf)
            {
                return bad(format!("bad confidence override at frame {}", o.frame));
            }
        }
        let n = &self.noise;
        let nonneg = [
            n.jitter_std,
            n.bad_box_scale,
            n.k_loc,
            n.k_cls,
            n.conf_noise,
            n.embedding_noise,
            n.embedding_occlusion_noise,
            n.occlusion_miss_rate,
            n.clutter_rate,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("noise parameters must be finite and non-negative".into());
        }
        let probs = [
            n.bad_box_rate,
            n.loc_max,
            n.cls_max,
            n.miss_rate,
            n.clutter_loc_max,
            n.clutter_cls_max,
        ];
        if probs.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("rates and confidence ceilings must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Present when inside its frame window and its center lies in the arena.
    fn object_box(&self, object: usize, frame: u32) -> Option<BBox> {
        let o = &self.objects[object];
        if frame < o.first_frame || o.last_frame.is_some_and(|l| frame > l) {
            return None;
        }
        let b = o.box_at(frame);
        let (cx, cy) = b.center();
        (cx >= 0.0 && cy >= 0.0 && cx <= self.arena.0 && cy <= self.arena.1).then_some(b)
    }

    fn severity(&self, object: usize, frame: u32) -> f64 {
        self.occlusions
            .iter()
            .filter(|e| e.object == object && (e.first_frame..=e.last_frame).contains(&frame))
            .map(|e| e.severity)
            .fold(0.0, f64::max)
    }

    fn jitter_scale(&self, object: usize, frame: u32) -> f64 {
        self.localization_events
            .iter()
            .filter(|e| e.object == object && (e.first_frame..=e.last_frame).contains(&frame))
            .map(|e| e.jitter_scale)
            .fold(1.0, f64::max)
    }
}

/// Where a generated detection came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    /// Ground-truth id, `None` for clutter.
    pub object: Option<u64>,
    /// Euclidean norm of the (left, top, width, height) jitter.
    pub jitter: f64,
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// One entry per frame `1..=n_frames`, empty frames included.
    pub frames: Vec<FrameInput>,
    pub provenance: Vec<Vec<Provenance>>,
    pub ground_truth: GroundTruth,
}

impl Scenario {
    pub fn records(&self) -> Vec<DetectionRecord> {
        self.frames
            .iter()
            .flat_map(|f| {
                f.detections.iter().map(move |d| DetectionRecord {
                    frame: f.frame_index,
                    detection: d.clone(),
                })
            })
            .collect()
    }

    pub fn detection_text(&self) -> String {
        write_detections(&self.records())
    }

    /// `None` when the scenario carries no embeddings.
    pub fn embedding_text(&self) -> Option<String> {
        let embeddings: Option<Vec<&Embedding>> = self
            .frames
            .iter()
            .flat_map(|f| f.detections.iter().map(|d| d.embedding.as_ref()))
            .collect();
        let embeddings = embeddings?;
        (!embeddings.is_empty()).then(|| write_embeddings(embeddings))
    }

    pub fn ground_truth_text(&self) -> String {
        write_ground_truth(&self.ground_truth)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        if let Ok(e) = Embedding::normalized(raw) {
            return e;
        }
    }
}

fn noisy_embedding(rng: &mut ChaCha8Rng, base: &Embedding, std: f64) -> Embedding {
    if std == 0.0 {
        return base.clone();
    }
    let raw: Vec<f64> = base
        .as_slice()
        .iter()
        .map(|v| v + std * gaussian(rng))
        .collect();
    Embedding::normalized(raw).unwrap_or_else(|_| base.clone())
}

/// Produces the detection stream and ground truth for `spec`. Pure in `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let noise = &spec.noise;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bases: Vec<Embedding> = (0..spec.objects.len())
        .map(|_| random_unit(&mut rng, spec.embedding_dim.max(1)))
        .collect();
    let clutter_count = (noise.clutter_rate > 0.0)
        .then(|| Poisson::new(noise.clutter_rate).expect("positive rate"));
    let conf_factor = |rng: &mut ChaCha8Rng| {
        if noise.conf_noise == 0.0 {
            1.0
        } else {
            1.0 + noise.conf_noise * gaussian(rng)
        }
    };

    let mut ground_truth = GroundTruth::new();
    let mut frames = Vec::with_capacity(spec.n_frames as usize);
    let mut provenance = Vec::with_capacity(spec.n_frames as usize);
    for frame in 1..=spec.n_frames {
        ground_truth.touch_frame(frame);
        let mut dets: Vec<(Detection, Provenance)> = Vec::new();
        for (k, base) in bases.iter().enumerate() {
            let Some(truth) = spec.object_box(k, frame) else {
                continue;
            };
            let id = k as u64 + 1;
            ground_truth.push(frame, GtObject::new(id, truth))?;

            let severity = spec.severity(k, frame);
            let p_miss = (noise.miss_rate + noise.occlusion_miss_rate * severity).min(1.0);
            if p_miss > 0.0 && rng.random::<f64>() < p_miss {
                continue;
            }
            let mut std = noise.jitter_std * truth.height * spec.jitter_scale(k, frame);
            if noise.bad_box_rate > 0.0 && rng.random::<f64>() < noise.bad_box_rate {
                std *= noise.bad_box_scale;
            }
            let j: [f64; 4] = if std > 0.0 {
                std::array::from_fn(|_| std * gaussian(&mut rng))
            } else {
                [0.0; 4]
            };
            let bbox = BBox {
                left: truth.left + j[0],
                top: truth.top + j[1],
                width: (truth.width + j[2]).max(1.0),
                height: (truth.height + j[3]).max(1.0),
            };
            let jitter = j.iter().map(|v| v * v).sum::<f64>().sqrt();
            let loc = noise.loc_max * (1.0 - noise.k_loc * jitter / truth.height).clamp(0.0, 1.0);
            let cls = noise.cls_max * (1.0 - noise.k_cls * severity).clamp(0.0, 1.0);
            let mut loc = (loc * conf_factor(&mut rng)).clamp(0.0, 1.0);
            let mut cls = (cls * conf_factor(&mut rng)).clamp(0.0, 1.0);
            if let Some(o) = spec
                .overrides
                .iter()
                .find(|o| o.frame == frame && o.object == k)
            {
                loc = o.loc_conf;
                cls = o.cls_conf;
            }
            let mut d = Detection::new(bbox, cls, loc)?;
            if spec.embedding_dim > 0 {
                let e_std = noise.embedding_noise + noise.embedding_occlusion_noise * severity;
                d = d.with_embedding(noisy_embedding(&mut rng, base, e_std));
            }
            dets.push((
                d,
                Provenance {
                    object: Some(id),
                    jitter,
                    severity,
                },
            ));
        }

        let n_clutter = clutter_count.map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_clutter {
            let h = rng.random_range(20.0..80.0);
            let w = h * rng.random_range(0.3..0.6);
            let bbox = BBox {
                left: rng.random_range(0.0..spec.arena.0),
                top: rng.random_range(0.0..spec.arena.1),
                width: w,
                height: h,
            };
            let loc = rng.random_range(0.0..=noise.clutter_loc_max);
            let cls = rng.random_range(0.0..=noise.clutter_cls_max);
            let mut d = Detection::new(bbox, cls, loc)?;
            if spec.embedding_dim > 0 {
                d = d.with_embedding(random_unit(&mut rng, spec.embedding_dim));
            }
            dets.push((
                d,
                Provenance {
                    object: None,
                    jitter: 0.0,
                    severity: 0.0,
                },
            ));
        }

        if noise.clutter_rate > 0.0 || noise.jitter_std > 0.0 {
            dets.shuffle(&mut rng);
        }
        let (d, p): (Vec<_>, Vec<_>) = dets.into_iter().unzip();
        frames.push(FrameInput::new(frame, d));
        provenance.push(p);
    }
    Ok(Scenario {
        frames,
        provenance,
        ground_truth,
    })
}

/// Ten objects in separate horizontal lanes, constant confidence 0.95 and no
/// noise of any kind.
pub fn clean_spec(seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = (0..10)
        .map(|i| {
            let start =
                BBox::new(40.0 + 20.0 * i as f64, 20.0 + 70.0 * i as f64, 24.0, 56.0).unwrap();
            ObjectSpec::new(
                start,
                (rng.random_range(0.5..3.0), rng.random_range(-0.1..0.1)),
            )
        })
        .collect();
    ScenarioSpec {
        seed,
        n_frames: 100,
        arena: (800.0, 760.0),
        objects,
        occlusions: Vec::new(),
        localization_events: Vec::new(),
        overrides: Vec::new(),
        noise: NoiseModel {
            loc_max: 0.95,
            cls_max: 0.95,
            ..NoiseModel::noiseless()
        },
        embedding_dim: DEFAULT_EMBEDDING_DIM,
    }
}

/// Pairs of objects crossing paths in separate bands. The object passing
/// behind is hidden around the crossing and re-emerges with poorly
/// localized boxes for a few frames while its appearance stays clear.
pub fn crossing_spec(seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_frames = 120;
    let mut objects = Vec::new();
    let mut occlusions = Vec::new();
    let mut localization_events = Vec::new();
    for band in 0..4 {
        let top = 30.0 + 170.0 * band as f64;
        let h = rng.random_range(70.0..100.0);
        let w = 0.4 * h;
        let speed = rng.random_range(2.0..4.0);
        let cross = rng.random_range(40..80) as f64;
        // both centers meet at x = 400 on frame `cross`
        let left_a = 400.0 - speed * cross - w / 2.0;
        let left_b = 400.0 + speed * cross - w / 2.0;
        let dy = rng.random_range(0.05..0.2) * h;
        objects.push(ObjectSpec::new(
            BBox::new(left_a, top, w, h).unwrap(),
            (speed, 0.0),
        ));
        objects.push(ObjectSpec::new(
            BBox::new(left_b, top + dy, w, h).unwrap(),
            (-speed, 0.0),
        ));
        let half = (w / speed).ceil() as u32;
        let behind = objects.len() - 1 - rng.random_range(0..2usize);
        let c = cross as u32;
        occlusions.push(OcclusionEvent {
            object: behind,
            first_frame: c.saturating_sub(half).max(1),
            last_frame: c + half,
            severity: rng.random_range(0.8..1.0),
        });
        localization_events.push(LocalizationEvent {
            object: behind,
            first_frame: c + half + 1,
            last_frame: c + half + EMERGENCE_FRAMES,
            jitter_scale: EMERGENCE_JITTER_SCALE,
        });
    }
    ScenarioSpec {
        seed,
        n_frames,
        arena: (800.0, 720.0),
        objects,
        occlusions,
        localization_events,
        overrides: Vec::new(),
        noise: NoiseModel {
            jitter_std: CROSSING_JITTER,
            bad_box_rate: 0.0,
            k_loc: CROSSING_K_LOC,
            ..NoiseModel::default()
        },
        embedding_dim: DEFAULT_EMBEDDING_DIM,
    }
}

/// Many objects with random headings and random partial occlusions, so every
/// confidence quadrant is well populated.
pub fn mixed_spec(seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_frames = 150;
    let arena = (960.0, 540.0);
    let mut objects = Vec::new();
    let mut occlusions = Vec::new();
    for k in 0..12 {
        let h = rng.random_range(60.0..120.0);
        let w = 0.4 * h;
        let start = BBox::new(
            rng.random_range(50.0..arena.0 - 50.0 - w),
            rng.random_range(20.0..arena.1 - 20.0 - h),
            w,
            h,
        )
        .unwrap();
        let velocity = (rng.random_range(-2.5..2.5), rng.random_range(-1.0..1.0));
        let first_frame = rng.random_range(1..40);
        objects.push(ObjectSpec {
            first_frame,
            ..ObjectSpec::new(start, velocity)
        });
        for _ in 0..3 {
            let first = rng.random_range(1..n_frames - 10);
            occlusions.push(OcclusionEvent {
                object: k,
                first_frame: first,
                last_frame: first + rng.random_range(3..12),
                severity: rng.random_range(0.3..1.0),
            });
        }
    }
    ScenarioSpec {
        seed,
        n_frames,
        arena,
        objects,
        occlusions,
        localization_events: Vec::new(),
        overrides: Vec::new(),
        noise: NoiseModel::default(),
        embedding_dim: DEFAULT_EMBEDDING_DIM,
    }
}

/// Frame on which the quadrant fixture's four detections split one per quadrant.
pub const QUADRANT_FRAME: u32 = 4;

/// Four stationary, well separated objects seen with confident boxes on
/// every frame except [`QUADRANT_FRAME`], where their confidences are
/// (loc, cls) = (0.9, 0.9), (0.9, 0.5), (0.54, 0.95) and (0.54, 0.74).
pub fn quadrant_fixture_spec() -> ScenarioSpec {
    let objects = (0..4)
        .map(|k| {
            ObjectSpec::new(
                BBox::new(20.0 + 120.0 * k as f64, 40.0, 40.0, 100.0).unwrap(),
                (0.0, 0.0),
            )
        })
        .collect();
    let confs = [(0.9, 0.9), (0.5, 0.9), (0.95, 0.54), (0.74, 0.54)];
    let overrides = confs
        .iter()
        .enumerate()
        .map(|(object, &(cls_conf, loc_conf))| ConfidenceOverride {
            frame: QUADRANT_FRAME,
            object,
            cls_conf,
            loc_conf,
        })
        .collect();
    ScenarioSpec {
        seed: 0,
        n_frames: 6,
        arena: (500.0, 200.0),
        objects,
        occlusions: Vec::new(),
        localization_events: Vec::new(),
        overrides,
        noise: NoiseModel {
            loc_max: 0.9,
            cls_max: 0.9,
            ..NoiseModel::noiseless()
        },
        embedding_dim: DEFAULT_EMBEDDING_DIM,
    }
}

pub fn quadrant_fixture() -> Scenario {
    generate(&quadrant_fixture_spec()).expect("fixture spec is valid")
}

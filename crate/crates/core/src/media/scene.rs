use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frames::{frames_to_matrix, FrameSequence};
use super::pgm::Frame;
use crate::error::{Error, Result};
use crate::synth::{derive_seed, InstanceSource, ProblemInstance};

/// Static textured background under a rank-2 illumination change, with a
/// bright disc bouncing across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub blob_radius: f64,
    /// Pixels per frame.
    pub blob_speed: f64,
    /// Round every frame onto the 8-bit grid, as a PGM round trip would.
    pub quantize: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self { width: 48, height: 36, frames: 40, blob_radius: 3.5, blob_speed: 2.5, quantize: false }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub frames: FrameSequence,
    /// Clean background frames (rank ≤ 2 as a matrix).
    pub background: FrameSequence,
    /// Per frame, row-major: whether the pixel belongs to the blob.
    pub masks: Vec<Vec<bool>>,
}

pub fn synthetic_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    let (w, h) = (spec.width, spec.height);
    let r = spec.blob_radius;
    if w < 4 || h < 4 || spec.frames == 0 || !(r > 0.0) || 2.0 * r + 2.0 > w.min(h) as f64 {
        return Err(Error::InvalidInput(format!("bad scene {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            [
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.3..1.0),
            ]
        })
        .collect();
    let total: f64 = waves.iter().map(|w| w[3]).sum();
    // texture in [0.15, 0.55]
    let texture: Vec<f64> = (0..w * h)
        .map(|p| {
            let (x, y) = ((p % w) as f64 / w as f64, (p / w) as f64 / h as f64);
            let s: f64 = waves.iter().map(|v| v[3] * (std::f64::consts::TAU * (v[0] * x + v[1] * y) + v[2]).sin()).sum();
            0.35 + 0.2 * s / total
        })
        .collect();
    let gradient: Vec<f64> = (0..w * h).map(|p| 0.2 * (p % w) as f64 / (w - 1) as f64).collect();
    let (pa, pb) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU));

    let (mut cx, mut cy) = (rng.gen_range(r..w as f64 - 1.0 - r), rng.gen_range(r..h as f64 - 1.0 - r));
    let heading = rng.gen_range(0.0..std::f64::consts::TAU);
    let (mut vx, mut vy) = (spec.blob_speed * heading.cos(), spec.blob_speed * heading.sin());

    let round = |v: f64| if spec.quantize { (v * 255.0).round() / 255.0 } else { v };
    let mut frames = Vec::with_capacity(spec.frames);
    let mut backgrounds = Vec::with_capacity(spec.frames);
    let mut masks = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let phase = std::f64::consts::TAU * t as f64 / spec.frames as f64;
        let a = 1.0 + 0.15 * (phase + pa).sin();
        let b = 0.5 + 0.5 * (phase + pb).cos();
        let bg: Vec<f64> = texture.iter().zip(&gradient).map(|(t, g)| a * t + b * g).collect();
        let mask: Vec<bool> = (0..w * h)
            .map(|p| {
                let (dx, dy) = ((p % w) as f64 - cx, (p / w) as f64 - cy);
                dx * dx + dy * dy <= r * r
            })
            .collect();
        let pixels = bg.iter().zip(&mask).map(|(v, m)| round(if *m { 1.0 } else { *v })).collect();
        frames.push(Frame::new(w, h, pixels)?);
        backgrounds.push(Frame::new(w, h, bg)?);
        masks.push(mask);

        cx += vx;
        cy += vy;
        if cx < r || cx > w as f64 - 1.0 - r {
            vx = -vx;
            cx = cx.clamp(r, w as f64 - 1.0 - r);
        }
        if cy < r || cy > h as f64 - 1.0 - r {
            vy = -vy;
            cy = cy.clamp(r, h as f64 - 1.0 - r);
        }
    }
    Ok(Scene { frames: FrameSequence::new(frames)?, background: FrameSequence::new(backgrounds)?, masks })
}

/// Training instances from fresh scenes: `X⋆` is the clean background
/// matrix, `S⋆ = Y − X⋆`, rank 2.
#[derive(Debug, Clone)]
pub struct SceneSource {
    pub spec: SceneSpec,
    pub seed: u64,
    counter: u64,
}

impl SceneSource {
    pub fn new(spec: SceneSpec, seed: u64) -> Self {
        Self { spec, seed, counter: 0 }
    }
}

impl InstanceSource for SceneSource {
    fn next_instance(&mut self) -> Result<ProblemInstance> {
        let seed = derive_seed(self.seed, self.counter);
        self.counter += 1;
        let scene = synthetic_scene(&self.spec, seed)?;
        let y = frames_to_matrix(&scene.frames);
        let x_star = frames_to_matrix(&scene.background);
        let s_star = y.sub(&x_star)?;
        let blob = scene.masks.iter().flatten().filter(|m| **m).count();
        let alpha = blob as f64 / (y.rows() * y.cols()) as f64;
        ProblemInstance::from_parts(x_star, s_star, 2, alpha, seed)
    }
}

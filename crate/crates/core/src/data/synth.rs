use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{normalize, ImageClass, TaskDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Stroke {
    Line { a: (f64, f64), b: (f64, f64) },
    Arc { c: (f64, f64), r: f64, start: f64, sweep: f64 },
}

const ARC_SEGMENTS: usize = 16;

struct Glyph {
    strokes: Vec<Stroke>,
    thickness: f64,
}

struct Jitter {
    angle: f64,
    scale: f64,
    shift: (f64, f64),
    thickness: f64,
}

/// Stream id for `(class, sample)`; `sample = None` is the class definition.
fn rng_for(seed: u64, class: usize, sample: Option<usize>) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = sample.map_or(u32::MAX as u64, |s| s as u64);
    rng.set_stream(((class as u64) << 32) | lo);
    rng
}

fn point(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.random_range(0.18..0.82), rng.random_range(0.18..0.82))
}

fn glyph(rng: &mut ChaCha8Rng) -> Glyph {
    let n = rng.random_range(2..=4);
    let strokes = (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                let a = point(rng);
                // Keep segments long enough to read at 8×8.
                let mut b = point(rng);
                while (a.0 - b.0).hypot(a.1 - b.1) < 0.25 {
                    b = point(rng);
                }
                Stroke::Line { a, b }
            } else {
                Stroke::Arc {
                    c: (rng.random_range(0.3..0.7), rng.random_range(0.3..0.7)),
                    r: rng.random_range(0.12..0.3),
                    start: rng.random_range(0.0..2.0 * PI),
                    sweep: rng.random_range(0.6 * PI..1.8 * PI),
                }
            }
        })
        .collect();
    Glyph { strokes, thickness: rng.random_range(0.07..0.11) }
}

fn jitter(rng: &mut ChaCha8Rng) -> Jitter {
    Jitter {
        angle: rng.random_range(-0.15..0.15),
        scale: rng.random_range(0.9..1.1),
        shift: (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)),
        thickness: rng.random_range(0.75..1.25),
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn stroke_distance(p: (f64, f64), s: &Stroke) -> f64 {
    match *s {
        Stroke::Line { a, b } => segment_distance(p, a, b),
        Stroke::Arc { c, r, start, sweep } => {
            let at = |k: usize| {
                let t = start + sweep * k as f64 / ARC_SEGMENTS as f64;
                (c.0 + r * t.cos(), c.1 + r * t.sin())
            };
            (0..ARC_SEGMENTS).map(|k| segment_distance(p, at(k), at(k + 1))).fold(f64::INFINITY, f64::min)
        }
    }
}

fn render(g: &Glyph, j: &Jitter, size: usize) -> Vec<u8> {
    let (sin, cos) = j.angle.sin_cos();
    let half = g.thickness * j.thickness / 2.0;
    let aa = 1.0 / size as f64;
    let mut px = Vec::with_capacity(size * size);
    for row in 0..size {
        for col in 0..size {
            // Inverse affine map from the jittered canvas back to glyph space.
            let x = (col as f64 + 0.5) / size as f64 - 0.5 - j.shift.0;
            let y = (row as f64 + 0.5) / size as f64 - 0.5 - j.shift.1;
            let p = ((cos * x + sin * y) / j.scale + 0.5, (-sin * x + cos * y) / j.scale + 0.5);
            let d = g.strokes.iter().map(|s| stroke_distance(p, s)).fold(f64::INFINITY, f64::min);
            let ink = (1.0 - (d - half) / aa).clamp(0.0, 1.0);
            px.push((255.0 * ink).round() as u8);
        }
    }
    px
}

/// Deterministic stroke-glyph corpus: each class is 2–4 random lines and
/// arcs, each sample a small random affine and thickness perturbation of it,
/// rendered to 8 bits (ink 255 on 0) and normalized.
pub fn synth_glyph_dataset(n_classes: usize, per_class: usize, size: usize, seed: u64) -> Result<TaskDataset> {
    if ![8, 16, 32].contains(&size) {
        return Err(Error::InvalidSize(size));
    }
    if n_classes == 0 {
        return Err(Error::EmptyDataset);
    }
    if per_class == 0 {
        return Err(Error::InvalidConfig("per_class must be at least 1".into()));
    }
    let classes = (0..n_classes)
        .map(|c| {
            let g = glyph(&mut rng_for(seed, c, None));
            let images = (0..per_class)
                .map(|s| {
                    let j = jitter(&mut rng_for(seed, c, Some(s)));
                    render(&g, &j, size).into_iter().map(|v| normalize(v) as f32).collect()
                })
                .collect();
            ImageClass { name: format!("glyph{c:05}"), images }
        })
        .collect();
    TaskDataset::new(classes, size)
}

//! Deterministic synthetic scene generation.
//!
//! Scenes are described by a flat `key = value` script: global `scene.*`
//! settings plus one `actor.<id>.*` group per moving object. Rendering is
//! fully determined by the script and a seed; noise is drawn from a
//! per-frame generator so frame content never depends on render order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::parse_kv_lines;
use crate::error::{Error, Result};
use crate::frame_io::{BoundingBox, BoxRecord, Frame, GroundTruth};

/// Shape of a rendered actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
}

/// One scripted object: a coloured shape on a linear trajectory, present
/// from `entry` through `exit` inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub id: u64,
    pub shape: ShapeKind,
    pub color: [u8; 3],
    /// Nominal width and height in pixels.
    pub size: (u32, u32),
    /// Top-left position at the entry frame.
    pub start: (f64, f64),
    /// Pixels per frame.
    pub velocity: (f64, f64),
    /// First frame the actor is visible.
    pub entry: usize,
    /// Last frame the actor is visible (inclusive).
    pub exit: usize,
}

impl Actor {
    /// Rounded top-left position on `frame` (valid for entry..=exit).
    pub fn position(&self, frame: usize) -> (i64, i64) {
        let dt = (frame - self.entry) as f64;
        let x = self.start.0 + self.velocity.0 * dt;
        let y = self.start.1 + self.velocity.1 * dt;
        (x.round() as i64, y.round() as i64)
    }
}

/// A parsed and validation-ready scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneScript {
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub background: [u8; 3],
    /// Uniform per-channel noise amplitude in [0, 255].
    pub noise: f64,
    /// Require pairwise distinct actor colours.
    pub separable: bool,
    /// Actors in ascending id order.
    pub actors: Vec<Actor>,
}

fn script_err(line: usize, message: impl std::fmt::Display) -> Error {
    Error::Script(format!("line {line}: {message}"))
}

fn parse_u32(line: usize, key: &str, value: &str) -> Result<u32> {
    value
        .parse()
        .map_err(|_| script_err(line, format!("{key}: `{value}` is not a non-negative integer")))
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| script_err(line, format!("{key}: `{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(script_err(line, format!("{key}: `{value}` is not finite")));
    }
    Ok(v)
}

fn parse_pair_f64(line: usize, key: &str, value: &str) -> Result<(f64, f64)> {
    let (a, b) = value
        .split_once(',')
        .ok_or_else(|| script_err(line, format!("{key}: expected `x,y`, got `{value}`")))?;
    Ok((
        parse_f64(line, key, a.trim())?,
        parse_f64(line, key, b.trim())?,
    ))
}

fn parse_color(line: usize, key: &str, value: &str) -> Result<[u8; 3]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(script_err(line, format!("{key}: expected `r,g,b`, got `{value}`")));
    }
    let mut color = [0u8; 3];
    for (slot, part) in color.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| script_err(line, format!("{key}: `{part}` is not in 0..=255")))?;
    }
    Ok(color)
}

#[derive(Default)]
struct ActorBuilder {
    shape: Option<ShapeKind>,
    color: Option<[u8; 3]>,
    size: Option<(u32, u32)>,
    start: Option<(f64, f64)>,
    velocity: Option<(f64, f64)>,
    entry: Option<usize>,
    exit: Option<usize>,
    first_line: usize,
}

impl SceneScript {
    /// Parse script text. Unknown keys, malformed values, and missing
    /// required fields are script errors naming the offending line.
    pub fn parse(text: &str) -> Result<SceneScript> {
        let kv = parse_kv_lines(text).map_err(|(line, message)| script_err(line, message))?;
        let mut frames = None;
        let mut width = None;
        let mut height = None;
        let mut background = [0u8; 3];
        let mut noise = 0.0;
        let mut separable = false;
        let mut builders: BTreeMap<u64, ActorBuilder> = BTreeMap::new();

        for (line, key, value) in kv {
            match key.as_str() {
                "scene.frames" => frames = Some(parse_u32(line, &key, &value)? as usize),
                "scene.width" => width = Some(parse_u32(line, &key, &value)?),
                "scene.height" => height = Some(parse_u32(line, &key, &value)?),
                "scene.background" => background = parse_color(line, &key, &value)?,
                "scene.noise" => noise = parse_f64(line, &key, &value)?,
                "scene.separable" => {
                    separable = match value.as_str() {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(script_err(
                                line,
                                format!("scene.separable: `{other}` is not true/false"),
                            ))
                        }
                    }
                }
                _ => {
                    let rest = key.strip_prefix("actor.").ok_or_else(|| {
                        script_err(line, format!("unknown key `{key}`"))
                    })?;
                    let (id_str, field) = rest.split_once('.').ok_or_else(|| {
                        script_err(line, format!("expected `actor.<id>.<field>`, got `{key}`"))
                    })?;
                    let id: u64 = id_str.parse().map_err(|_| {
                        script_err(line, format!("`{id_str}` is not an actor id"))
                    })?;
                    if id == 0 {
                        return Err(script_err(line, "actor ids start at 1"));
                    }
                    let b = builders.entry(id).or_default();
                    if b.first_line == 0 {
                        b.first_line = line;
                    }
                    match field {
                        "shape" => {
                            b.shape = Some(match value.as_str() {
                                "rect" | "rectangle" => ShapeKind::Rectangle,
                                "ellipse" => ShapeKind::Ellipse,
                                other => {
                                    return Err(script_err(
                                        line,
                                        format!("`{other}` is not a shape (rect|ellipse)"),
                                    ))
                                }
                            })
                        }
                        "color" => b.color = Some(parse_color(line, &key, &value)?),
                        "size" => {
                            let (w, h) = value.split_once(',').ok_or_else(|| {
                                script_err(line, format!("{key}: expected `w,h`"))
                            })?;
                            b.size = Some((
                                parse_u32(line, &key, w.trim())?,
                                parse_u32(line, &key, h.trim())?,
                            ));
                        }
                        "start" => b.start = Some(parse_pair_f64(line, &key, &value)?),
                        "velocity" => b.velocity = Some(parse_pair_f64(line, &key, &value)?),
                        "entry" => b.entry = Some(parse_u32(line, &key, &value)? as usize),
                        "exit" => b.exit = Some(parse_u32(line, &key, &value)? as usize),
                        other => {
                            return Err(script_err(
                                line,
                                format!("unknown actor field `{other}`"),
                            ))
                        }
                    }
                }
            }
        }

        let frames =
            frames.ok_or_else(|| Error::Script("missing required key scene.frames".into()))?;
        let width =
            width.ok_or_else(|| Error::Script("missing required key scene.width".into()))?;
        let height =
            height.ok_or_else(|| Error::Script("missing required key scene.height".into()))?;

        let mut actors = Vec::with_capacity(builders.len());
        for (id, b) in builders {
            let line = b.first_line;
            let missing = |field: &str| {
                script_err(line, format!("actor.{id} is missing required field `{field}`"))
            };
            actors.push(Actor {
                id,
                shape: b.shape.ok_or_else(|| missing("shape"))?,
                color: b.color.ok_or_else(|| missing("color"))?,
                size: b.size.ok_or_else(|| missing("size"))?,
                start: b.start.ok_or_else(|| missing("start"))?,
                velocity: b.velocity.unwrap_or((0.0, 0.0)),
                entry: b.entry.unwrap_or(0),
                exit: b.exit.unwrap_or(frames.saturating_sub(1)),
            });
        }

        let script = SceneScript {
            frames,
            width,
            height,
            background,
            noise,
            separable,
            actors,
        };
        script.validate()?;
        Ok(script)
    }

    /// Check every cross-field constraint: frame dimensions, noise range,
    /// actor lifetimes, in-bounds trajectories, and (when `separable`)
    /// pairwise-distinct colours.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::Script(message));
        if self.frames == 0 {
            return fail("scene.frames must be at least 1".into());
        }
        if self.width < 3 || self.height < 3 {
            return fail(format!(
                "scene is {}x{}; minimum is 3x3",
                self.width, self.height
            ));
        }
        if !(0.0..=255.0).contains(&self.noise) {
            return fail(format!("scene.noise {} outside [0, 255]", self.noise));
        }
        for actor in &self.actors {
            let id = actor.id;
            if actor.size.0 == 0 || actor.size.1 == 0 {
                return fail(format!("actor.{id}: size must be positive"));
            }
            if actor.entry > actor.exit {
                return fail(format!(
                    "actor.{id}: entry {} is after exit {}",
                    actor.entry, actor.exit
                ));
            }
            if actor.exit >= self.frames {
                return fail(format!(
                    "actor.{id}: exit {} is outside the {}-frame scene",
                    actor.exit, self.frames
                ));
            }
            for frame in actor.entry..=actor.exit {
                let (x, y) = actor.position(frame);
                let in_bounds = x >= 0
                    && y >= 0
                    && x + i64::from(actor.size.0) <= i64::from(self.width)
                    && y + i64::from(actor.size.1) <= i64::from(self.height);
                if !in_bounds {
                    return fail(format!(
                        "actor.{id}: leaves the frame on frame {frame} (top-left {x},{y})"
                    ));
                }
            }
        }
        if self.separable {
            for (i, a) in self.actors.iter().enumerate() {
                for b in &self.actors[i + 1..] {
                    if a.color == b.color {
                        return fail(format!(
                            "separable scene: actors {} and {} share colour {:?}",
                            a.id, b.id, a.color
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Pixels covered by a shape whose nominal box has top-left `(x, y)` and
/// extents `(w, h)`. Rectangles fill the box; ellipses keep pixels whose
/// centre lies inside the inscribed ellipse.
fn rasterize(shape: ShapeKind, x: i64, y: i64, (w, h): (u32, u32)) -> Vec<(u32, u32)> {
    let mut pixels = Vec::new();
    match shape {
        ShapeKind::Rectangle => {
            for py in y..y + i64::from(h) {
                for px in x..x + i64::from(w) {
                    pixels.push((px as u32, py as u32));
                }
            }
        }
        ShapeKind::Ellipse => {
            let cx = x as f64 + (f64::from(w) - 1.0) / 2.0;
            let cy = y as f64 + (f64::from(h) - 1.0) / 2.0;
            let rx = f64::from(w) / 2.0;
            let ry = f64::from(h) / 2.0;
            for py in y..y + i64::from(h) {
                for px in x..x + i64::from(w) {
                    let nx = (px as f64 - cx) / rx;
                    let ny = (py as f64 - cy) / ry;
                    if nx * nx + ny * ny <= 1.0 {
                        pixels.push((px as u32, py as u32));
                    }
                }
            }
        }
    }
    pixels
}

fn tight_bbox(pixels: &[(u32, u32)]) -> BoundingBox {
    let min_x = pixels.iter().map(|p| p.0).min().unwrap();
    let max_x = pixels.iter().map(|p| p.0).max().unwrap();
    let min_y = pixels.iter().map(|p| p.1).min().unwrap();
    let max_y = pixels.iter().map(|p| p.1).max().unwrap();
    BoundingBox::new(
        i64::from(min_x),
        i64::from(min_y),
        i64::from(max_x - min_x + 1),
        i64::from(max_y - min_y + 1),
    )
}

/// Derive the noise generator for one frame: independent of every other
/// frame, so rendering order (or parallelism) cannot change pixel content.
fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    let frame_seed = seed ^ (frame as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(frame_seed)
}

/// Render a validated script into frames and their ground truth.
///
/// Ground-truth boxes are the tight bounding boxes of the pixels actually
/// drawn for each actor; records are ordered by frame then actor id. The
/// same `(script, seed)` pair always renders identical bytes.
pub fn render(script: &SceneScript, seed: u64) -> Result<(Vec<Frame>, GroundTruth)> {
    script.validate()?;
    let mut frames = Vec::with_capacity(script.frames);
    let mut records = Vec::new();
    for frame_index in 0..script.frames {
        let mut frame = Frame::filled(script.width, script.height, script.background, frame_index)?;
        for actor in &script.actors {
            if frame_index < actor.entry || frame_index > actor.exit {
                continue;
            }
            let (x, y) = actor.position(frame_index);
            let pixels = rasterize(actor.shape, x, y, actor.size);
            debug_assert!(!pixels.is_empty(), "validated shapes draw at least one pixel");
            for &(px, py) in &pixels {
                frame.set_pixel(px, py, actor.color);
            }
            records.push(BoxRecord {
                frame_index,
                object_id: actor.id,
                bbox: tight_bbox(&pixels),
            });
        }
        if script.noise > 0.0 {
            let mut rng = frame_rng(seed, frame_index);
            for y in 0..script.height {
                for x in 0..script.width {
                    let mut px = frame.pixel(x, y);
                    for channel in &mut px {
                        let delta = rng.random_range(-script.noise..=script.noise);
                        *channel = (f64::from(*channel) + delta).round().clamp(0.0, 255.0) as u8;
                    }
                    frame.set_pixel(x, y, px);
                }
            }
        }
        frames.push(frame);
    }
    Ok((frames, GroundTruth { records }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
# simple one-actor scene
scene.frames = 5
scene.width = 40
scene.height = 30
scene.background = 10, 10, 10

actor.1.shape = rect
actor.1.color = 200, 0, 0
actor.1.size = 6, 6
actor.1.start = 4, 4
";

    #[test]
    fn static_scene_renders_identical_frames_and_boxes() {
        let script = SceneScript::parse(BASIC).unwrap();
        let (frames, gt) = render(&script, 7).unwrap();
        assert_eq!(frames.len(), 5);
        assert_eq!(gt.records.len(), 5);
        for frame in &frames[1..] {
            assert!(frame.same_image(&frames[0]));
        }
        for record in &gt.records {
            assert_eq!(record.bbox, BoundingBox::new(4, 4, 6, 6));
            assert_eq!(record.object_id, 1);
        }
        assert_eq!(frames[0].pixel(4, 4), [200, 0, 0]);
        assert_eq!(frames[0].pixel(3, 4), [10, 10, 10]);
    }

    #[test]
    fn moving_actor_follows_rounded_linear_trajectory() {
        let text = BASIC.to_string() + "actor.1.velocity = 2.5, 1\n";
        let script = SceneScript::parse(&text).unwrap();
        let actor = &script.actors[0];
        assert_eq!(actor.position(0), (4, 4));
        assert_eq!(actor.position(1), (7, 5)); // 6.5 rounds away from zero
        assert_eq!(actor.position(2), (9, 6));
        let (_, gt) = render(&script, 0).unwrap();
        assert_eq!(gt.records[1].bbox, BoundingBox::new(7, 5, 6, 6));
    }

    #[test]
    fn entry_and_exit_bound_visibility() {
        let text = BASIC.to_string() + "actor.1.entry = 2\nactor.1.exit = 3\n";
        let script = SceneScript::parse(&text).unwrap();
        let (frames, gt) = render(&script, 0).unwrap();
        let frames_with_records: Vec<usize> = gt.records.iter().map(|r| r.frame_index).collect();
        assert_eq!(frames_with_records, vec![2, 3]);
        assert_eq!(frames[1].pixel(4, 4), [10, 10, 10]);
        assert_eq!(frames[2].pixel(4, 4), [200, 0, 0]);
        assert_eq!(frames[4].pixel(4, 4), [10, 10, 10]);
    }

    #[test]
    fn two_actor_crossing_scene_produces_disjoint_records_per_frame() {
        let text = "\
scene.frames = 30
scene.width = 120
scene.height = 60
scene.separable = true

actor.1.shape = rect
actor.1.color = 255, 0, 0
actor.1.size = 8, 8
actor.1.start = 2, 10
actor.1.velocity = 3, 1

actor.2.shape = ellipse
actor.2.color = 0, 255, 0
actor.2.size = 9, 9
actor.2.start = 100, 40
actor.2.velocity = -3, -1
";
        let script = SceneScript::parse(text).unwrap();
        let (_, gt) = render(&script, 3).unwrap();
        assert_eq!(gt.records.len(), 60);
        for frame in 0..30 {
            let ids: Vec<u64> = gt
                .records
                .iter()
                .filter(|r| r.frame_index == frame)
                .map(|r| r.object_id)
                .collect();
            assert_eq!(ids, vec![1, 2]);
        }
    }

    #[test]
    fn ellipse_ground_truth_is_tight_over_drawn_pixels() {
        let text = "\
scene.frames = 1
scene.width = 30
scene.height = 30

actor.1.shape = ellipse
actor.1.color = 0, 0, 255
actor.1.size = 11, 7
actor.1.start = 5, 9
";
        let script = SceneScript::parse(text).unwrap();
        let (frames, gt) = render(&script, 0).unwrap();
        let bbox = gt.records[0].bbox;
        // Recompute the tight box of blue pixels.
        let mut seen = Vec::new();
        for y in 0..30u32 {
            for x in 0..30u32 {
                if frames[0].pixel(x, y) == [0, 0, 255] {
                    seen.push((x, y));
                }
            }
        }
        assert!(!seen.is_empty());
        assert_eq!(bbox, tight_bbox(&seen));
        // The odd-sized ellipse touches all four nominal extremes.
        assert_eq!(bbox, BoundingBox::new(5, 9, 11, 7));
        // Corners of the nominal box stay background.
        assert_eq!(frames[0].pixel(5, 9), [0, 0, 0]);
    }

    #[test]
    fn rendering_is_deterministic_per_seed() {
        let text = BASIC.to_string() + "scene.noise = 12\nactor.1.velocity = 1, 1\n";
        let script = SceneScript::parse(&text).unwrap();
        let (a, gt_a) = render(&script, 42).unwrap();
        let (b, gt_b) = render(&script, 42).unwrap();
        assert_eq!(gt_a, gt_b);
        for (fa, fb) in a.iter().zip(&b) {
            assert!(fa.same_image(fb));
        }
        let (c, _) = render(&script, 43).unwrap();
        assert!(a.iter().zip(&c).any(|(fa, fc)| !fa.same_image(fc)));
    }

    #[test]
    fn noise_respects_amplitude_and_clamps() {
        let text = "\
scene.frames = 2
scene.width = 20
scene.height = 20
scene.background = 100, 0, 255
scene.noise = 7
";
        let script = SceneScript::parse(text).unwrap();
        let (frames, _) = render(&script, 9).unwrap();
        let mut saw_change = false;
        for frame in &frames {
            for y in 0..20 {
                for x in 0..20 {
                    let [r, g, b] = frame.pixel(x, y);
                    assert!((93..=107).contains(&r));
                    assert!(g <= 7); // clamped at zero floor
                    assert!(b >= 248); // clamped at 255 ceiling
                    saw_change |= r != 100 || g != 0 || b != 255;
                }
            }
        }
        assert!(saw_change);
    }

    #[test]
    fn out_of_bounds_trajectory_is_a_script_error() {
        let text = BASIC.to_string() + "actor.1.velocity = 20, 0\n";
        let err = SceneScript::parse(&text).unwrap_err();
        match err {
            Error::Script(message) => assert!(message.contains("actor.1"), "{message}"),
            other => panic!("expected script error, got {other}"),
        }
    }

    #[test]
    fn separable_scene_rejects_shared_colors() {
        let text = "\
scene.frames = 2
scene.width = 30
scene.height = 30
scene.separable = true

actor.1.shape = rect
actor.1.color = 9, 9, 9
actor.1.size = 3, 3
actor.1.start = 1, 1

actor.2.shape = rect
actor.2.color = 9, 9, 9
actor.2.size = 3, 3
actor.2.start = 20, 20
";
        let err = SceneScript::parse(text).unwrap_err();
        assert!(matches!(err, Error::Script(_)));
    }

    #[test]
    fn missing_required_fields_are_reported() {
        let err = SceneScript::parse("scene.width = 10\nscene.height = 10\n").unwrap_err();
        match err {
            Error::Script(message) => assert!(message.contains("scene.frames"), "{message}"),
            other => panic!("unexpected {other}"),
        }
        let text = "\
scene.frames = 2
scene.width = 30
scene.height = 30
actor.1.shape = rect
";
        let err = SceneScript::parse(text).unwrap_err();
        match err {
            Error::Script(message) => assert!(message.contains("color"), "{message}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let text = "scene.frames = 2\nscene.bogus = 4\n";
        let err = SceneScript::parse(text).unwrap_err();
        match err {
            Error::Script(message) => {
                assert!(message.contains("line 2"), "{message}");
                assert!(message.contains("scene.bogus"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }
}

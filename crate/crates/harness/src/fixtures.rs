//! Palettes and scene layouts used by the evaluation protocols.

use rand::seq::IndexedRandom;
use rand::Rng;

use grounded_core::perception::PropertyKind;
use grounded_core::world::{
    generate_scene, ObjectId, ObjectSpec, Palette, PaletteColor, PaletteShape, PaletteSize,
    Scene, SceneSpec, Workspace, WorldError, SCENE_SPEC_VERSION,
};

/// Per-instance aspect ratio range: the whole unit interval.
const ASPECT_SPREAD: [f64; 3] = [0.5, 0.0, 0.0];

/// Four colors, two sizes, four shapes.
///
/// Shapes differ in compactness and corner count; every instance draws its
/// own aspect ratio, so one example of a shape says little about the next
/// instance of it.
pub fn standard_palette() -> Palette {
    let color = |name: &str, rgb| PaletteColor { name: name.into(), rgb };
    let size = |name: &str, scale| PaletteSize { name: name.into(), scale };
    let shape = |name: &str, descriptor| PaletteShape { name: name.into(), descriptor, spread: ASPECT_SPREAD };
    Palette {
        colors: vec![
            color("red", [0.9, 0.1, 0.1]),
            color("blue", [0.1, 0.2, 0.9]),
            color("green", [0.1, 0.75, 0.2]),
            color("yellow", [0.95, 0.9, 0.1]),
        ],
        sizes: vec![size("small", 0.05), size("large", 0.08)],
        shapes: vec![
            shape("triangle", [0.5, 0.35, 0.35]),
            shape("circle", [0.5, 0.65, 0.35]),
            shape("square", [0.5, 0.65, 0.65]),
            shape("rectangle", [0.5, 0.35, 0.65]),
        ],
    }
}

/// Word to property table for a palette.
pub fn vocabulary(palette: &Palette) -> Vec<(String, PropertyKind)> {
    let mut out = Vec::new();
    out.extend(palette.colors.iter().map(|c| (c.name.clone(), PropertyKind::Color)));
    out.extend(palette.sizes.iter().map(|s| (s.name.clone(), PropertyKind::Size)));
    out.extend(palette.shapes.iter().map(|s| (s.name.clone(), PropertyKind::Shape)));
    out
}

fn spec(palette: Palette, objects: Vec<ObjectSpec>) -> SceneSpec {
    SceneSpec { version: SCENE_SPEC_VERSION, workspace: Workspace::default(), palette, objects, seed: 0 }
}

fn object(color: &str, size: &str, shape: &str, pose: Option<[f64; 2]>) -> ObjectSpec {
    ObjectSpec { color: color.into(), size: size.into(), shape: shape.into(), pose }
}

/// `n` objects with attributes drawn at random, placed at random.
pub fn random_scene<R: Rng>(palette: &Palette, n: usize, rng: &mut R) -> Result<Scene, WorldError> {
    let objects = (0..n)
        .map(|_| {
            let c = palette.colors.choose(rng).expect("colors");
            let s = palette.sizes.choose(rng).expect("sizes");
            let h = palette.shapes.choose(rng).expect("shapes");
            object(&c.name, &s.name, &h.name, None)
        })
        .collect();
    generate_scene(&spec(palette.clone(), objects), rng.random())
}

/// Six blocks, unique by size and color, laid out so every object and
/// location has free table on both sides. `o1` is the one the arm may hold.
pub fn verb_scene() -> Scene {
    let objects = vec![
        object("yellow", "small", "square", Some([0.45, 0.2])),
        object("red", "large", "square", Some([0.3, 0.45])),
        object("blue", "small", "square", Some([0.5, 0.45])),
        object("green", "large", "square", Some([0.3, 0.6])),
        object("red", "small", "square", Some([0.55, 0.62])),
        object("blue", "large", "square", Some([0.62, 0.3])),
    ];
    generate_scene(&spec(standard_palette(), objects), 0).expect("fixed layout fits")
}

/// Blocks for teaching "in", "left of" and "right of" before the verb trials.
pub fn preposition_lesson_scene() -> Scene {
    let objects = vec![
        object("red", "small", "square", Some([0.3, 0.5])),
        object("blue", "small", "square", Some([0.41, 0.5])),
        object("green", "small", "square", Some([0.75, 0.25])),
    ];
    generate_scene(&spec(standard_palette(), objects), 0).expect("fixed layout fits")
}

/// Scene for the combined curve: unique size-color-shape triples over three
/// shapes, with a left/right pair and one object already in the dishwasher.
pub fn combined_scene() -> Scene {
    let objects = vec![
        object("red", "large", "triangle", Some([0.3, 0.45])),
        object("blue", "small", "square", Some([0.45, 0.45])),
        object("green", "small", "circle", Some([0.55, 0.62])),
        object("yellow", "large", "square", Some([0.62, 0.3])),
        object("green", "large", "triangle", Some([0.3, 0.6])),
        object("yellow", "small", "circle", Some([0.21, 0.21])),
    ];
    generate_scene(&spec(combined_palette(), objects), 0).expect("fixed layout fits")
}

/// Nine words: four colors, two sizes, three shapes. The shapes are well apart
/// and do not vary per instance; this curve measures dialog cost, not shape
/// difficulty.
pub fn combined_palette() -> Palette {
    let mut p = standard_palette();
    let shape = |name: &str, descriptor| PaletteShape { name: name.into(), descriptor, spread: [0.0; 3] };
    p.shapes = vec![
        shape("triangle", [0.6, 0.4, 0.5]),
        shape("circle", [1.0, 0.9, 0.0]),
        shape("square", [1.0, 0.7, 0.7]),
    ];
    p
}

/// Two equal cubes, the reference ("red") at `reference` and the primary
/// ("blue") at `primary`.
pub fn pair_scene(primary: [f64; 2], reference: [f64; 2]) -> Scene {
    let objects = vec![
        object("blue", "small", "square", Some(primary)),
        object("red", "small", "square", Some(reference)),
    ];
    let mut s = spec(standard_palette(), objects);
    s.palette.sizes = vec![PaletteSize { name: "small".into(), scale: PAIR_CUBE }];
    generate_scene(&s, 0).expect("arrangements are generated inside the table")
}

/// Edge of the cubes used for preposition arrangements.
pub const PAIR_CUBE: f64 = 0.06;

pub const PAIR_PRIMARY: ObjectId = ObjectId(1);
pub const PAIR_REFERENCE: ObjectId = ObjectId(2);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_scenes_are_valid_and_labelled() {
        for s in [verb_scene(), combined_scene(), preposition_lesson_scene(), pair_scene([0.3, 0.5], [0.5, 0.5])] {
            s.check_invariants().unwrap();
            assert_eq!(s.truth.len(), s.objects.len());
        }
    }

    #[test]
    fn verb_scene_descriptions_are_unique() {
        let s = verb_scene();
        let mut seen = std::collections::BTreeSet::new();
        for t in s.truth.values() {
            assert!(seen.insert((t.size.clone(), t.color.clone())));
        }
    }

    #[test]
    fn random_scene_is_deterministic() {
        let p = standard_palette();
        let a = random_scene(&p, 12, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_scene(&p, 12, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.objects.len(), 12);
    }
}

//! Nominal shapes of the 15 synthetic classes (meters, object frame).

use std::f64::consts::FRAC_PI_2;

use super::shapes::{Primitive, Profile, Shape};

pub const CATALOG_SIZE: usize = 15;

const NAMES: [&str; CATALOG_SIZE] = [
    "cup_mat",
    "mat",
    "tweezers",
    "spanner",
    "socket_wrench",
    "wrench",
    "allen_key",
    "ruler",
    "shaver",
    "hairpin",
    "pincers",
    "holder",
    "small_tape",
    "tape",
    "mouse",
];

pub fn class_name(class: usize) -> Option<&'static str> {
    NAMES.get(class).copied()
}

fn flat(shape: Shape, height: f64) -> Primitive {
    Primitive {
        shape,
        height,
        profile: Profile::Flat,
    }
}

fn dome(shape: Shape, height: f64) -> Primitive {
    Primitive {
        shape,
        height,
        profile: Profile::Dome,
    }
}

fn rect(cx: f64, cy: f64, len: f64, wid: f64, angle: f64) -> Shape {
    Shape::Rect { cx, cy, len, wid, angle }
}

fn disc(cx: f64, cy: f64, r: f64) -> Shape {
    Shape::Disc { cx, cy, r }
}

fn ring(cx: f64, cy: f64, r_in: f64, r_out: f64) -> Shape {
    Shape::Annulus { cx, cy, r_in, r_out }
}

fn capsule(ax: f64, ay: f64, bx: f64, by: f64, r: f64) -> Shape {
    Shape::Capsule { ax, ay, bx, by, r }
}

/// Nominal primitives per class, indexed by class id.
pub fn catalog() -> Vec<Vec<Primitive>> {
    vec![
        // cup mat: thin disc with a raised rim
        vec![flat(disc(0.0, 0.0, 0.05), 0.004), flat(ring(0.0, 0.0, 0.043, 0.05), 0.008)],
        // mat
        vec![flat(rect(0.0, 0.0, 0.13, 0.09, 0.0), 0.004)],
        // tweezers: two arms joined at one end
        vec![
            flat(capsule(-0.06, 0.0, 0.06, 0.018, 0.0065), 0.008),
            flat(capsule(-0.06, 0.0, 0.06, -0.018, 0.0065), 0.008),
        ],
        // spanner: bar with a ring end
        vec![
            flat(capsule(-0.07, 0.0, 0.04, 0.0, 0.008), 0.006),
            flat(ring(0.06, 0.0, 0.01, 0.022), 0.009),
        ],
        // socket wrench: handle, head and a raised knob
        vec![
            dome(capsule(-0.08, 0.0, 0.03, 0.0, 0.01), 0.012),
            flat(disc(0.05, 0.0, 0.022), 0.02),
            flat(disc(0.05, 0.0, 0.011), 0.03),
        ],
        // open-end wrench
        vec![
            flat(capsule(-0.07, 0.0, 0.035, 0.0, 0.009), 0.007),
            flat(rect(0.045, 0.0, 0.014, 0.05, 0.0), 0.007),
            flat(rect(0.065, 0.019, 0.035, 0.012, 0.0), 0.007),
            flat(rect(0.065, -0.019, 0.035, 0.012, 0.0), 0.007),
        ],
        // allen key: L-shaped rod
        vec![
            flat(rect(-0.006, 0.0, 0.1, 0.013, 0.0), 0.011),
            flat(rect(0.038, 0.022, 0.05, 0.013, FRAC_PI_2), 0.011),
        ],
        // ruler
        vec![flat(rect(0.0, 0.0, 0.2, 0.03, 0.0), 0.003)],
        // shaver: rounded handle with a wide head
        vec![
            dome(capsule(-0.055, 0.0, 0.035, 0.0, 0.017), 0.026),
            flat(rect(0.06, 0.0, 0.02, 0.052, 0.0), 0.022),
        ],
        // hairpin: U of two prongs
        vec![
            flat(capsule(-0.06, 0.012, 0.05, 0.012, 0.0065), 0.005),
            flat(capsule(-0.06, -0.012, 0.05, -0.012, 0.0065), 0.005),
            flat(capsule(0.05, 0.012, 0.05, -0.012, 0.0065), 0.005),
        ],
        // pincers: crossed handles with a pivot
        vec![
            flat(capsule(-0.07, -0.03, 0.06, 0.015, 0.0075), 0.01),
            flat(capsule(-0.07, 0.03, 0.06, -0.015, 0.0075), 0.01),
            flat(disc(0.018, 0.0, 0.014), 0.016),
        ],
        // holder: base plate with a tall block
        vec![
            flat(rect(0.0, 0.0, 0.1, 0.06, 0.0), 0.008),
            flat(rect(-0.032, 0.0, 0.035, 0.06, 0.0), 0.045),
        ],
        // small tape
        vec![flat(ring(0.0, 0.0, 0.013, 0.03), 0.019)],
        // tape
        vec![flat(ring(0.0, 0.0, 0.024, 0.048), 0.025)],
        // mouse
        vec![dome(
            Shape::Ellipse {
                cx: 0.0,
                cy: 0.0,
                a: 0.06,
                b: 0.033,
                angle: 0.0,
            },
            0.035,
        )],
    ]
}

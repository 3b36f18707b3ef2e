#![allow(dead_code)]

use odsbounds::simulation::{ObservableJoint, ObservedViews, StructuralModel};

/// Worked-example joint `P(Z, X, Y, S)`, indexed `[z][x][y][s]`.
pub fn worked_example_joint() -> ObservableJoint {
    // columns per stratum: xys = 001, 011, 101, 111, 000, 010, 100, 110
    let rows = [
        [0.03510, 0.00180, 0.04860, 0.03960, 0.00390, 0.00720, 0.00540, 0.15840],
        [0.49014, 0.01428, 0.02268, 0.01176, 0.05446, 0.05712, 0.00252, 0.04704],
    ];
    let order = [(0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 1, 1), (0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0)];
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for z in 0..2 {
        for (k, &(x, y, s)) in order.iter().enumerate() {
            p[z][x][y][s] = rows[z][k];
        }
    }
    p
}

/// The structural model behind the worked example.
pub fn worked_example_model() -> StructuralModel {
    StructuralModel {
        p_u: 0.9,
        p_z: 0.7,
        p_x: [[0.3, 0.3], [0.9, 0.1]],
        p_y: [[0.3, 0.4], [0.1, 0.8]],
        p_s: [[[0.9, 0.2]; 2]; 2],
    }
}

pub fn worked_example_views() -> ObservedViews {
    ObservedViews::from_observable(&worked_example_joint()).unwrap()
}

/// `P(X, Y, S=1 | Z)` blocks of an observable joint.
pub fn selected_given_z(p: &ObservableJoint) -> Vec<[[f64; 2]; 2]> {
    (0..2)
        .map(|z| {
            let pz: f64 = p[z].iter().flatten().flatten().sum();
            let mut b = [[0.0; 2]; 2];
            for x in 0..2 {
                for y in 0..2 {
                    b[x][y] = p[z][x][y][1] / pz;
                }
            }
            b
        })
        .collect()
}

/// `P(X, Y, S=1)` as a single block.
pub fn selected_pooled(p: &ObservableJoint) -> Vec<[[f64; 2]; 2]> {
    let mut b = [[0.0; 2]; 2];
    for z in 0..2 {
        for x in 0..2 {
            for y in 0..2 {
                b[x][y] += p[z][x][y][1];
            }
        }
    }
    vec![b]
}

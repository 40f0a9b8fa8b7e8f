//! Marching-cubes case table, generated at first use.
//!
//! Every cube face contributes directed segments between the crossing points
//! on its sides. Faces with four crossings are resolved by the sign of the
//! average of their corner values, so the two cubes sharing a face always
//! agree and the surface has no cracks. Chaining the segments gives closed
//! loops. A loop is fan-triangulated from a vertex whose diagonals all
//! cross the cube interior; when no such vertex exists the fan is built
//! around the loop's centroid instead, so no diagonal ever lies on a face
//! that the neighbouring cube also triangulates.

use std::sync::OnceLock;

/// Corner `c` sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
pub const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Corner pairs of the twelve edges: four along x, four along y, four along z.
pub const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [2, 3],
    [4, 5],
    [6, 7],
    [0, 2],
    [1, 3],
    [4, 6],
    [5, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Faces as corner cycles, counterclockwise seen from outside the cube.
const FACES: [[usize; 4]; 6] = [
    [0, 4, 6, 2], // x = 0
    [1, 3, 7, 5], // x = 1
    [0, 1, 5, 4], // y = 0
    [2, 6, 7, 3], // y = 1
    [0, 2, 3, 1], // z = 0
    [4, 5, 7, 6], // z = 1
];

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("corners share an edge")
}

/// One closed surface loop through cube edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub edges: Vec<usize>,
    /// Fan apex as a position in `edges`; `None` means fan around the centroid.
    pub apex: Option<usize>,
}

impl Loop {
    /// Triangles as positions into `edges`, with `edges.len()` standing for
    /// the centroid.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let n = self.edges.len();
        match self.apex {
            Some(a) => (1..n - 1).map(|k| [a, (a + k + 1) % n, (a + k) % n]).collect(),
            None => (0..n).map(|k| [n, (k + 1) % n, k]).collect(),
        }
    }
}

fn face_of(e: usize, f: usize) -> bool {
    EDGES[e].iter().all(|c| FACES[f].contains(c))
}

fn share_face(a: usize, b: usize) -> bool {
    (0..6).any(|f| face_of(a, f) && face_of(b, f))
}

fn choose_apex(lp: &[usize]) -> Option<usize> {
    let n = lp.len();
    if n == 3 {
        return Some(0);
    }
    (0..n).find(|&a| (2..n - 1).all(|k| !share_face(lp[a], lp[(a + k) % n])))
}

/// Surface loops for a corner configuration. Bit `c` of `inside` marks
/// corner `c` as inside; `face_inside[f]` decides ambiguous faces.
fn polygonize(inside: u8, face_inside: [bool; 6]) -> Vec<Loop> {
    let is_in = |c: usize| inside >> c & 1 == 1;
    let mut next = [usize::MAX; 12];
    for (f, face) in FACES.iter().enumerate() {
        // Crossings along the boundary: (edge, entering inside?)
        let mut cross = Vec::with_capacity(4);
        for k in 0..4 {
            let (a, b) = (face[k], face[(k + 1) % 4]);
            if is_in(a) != is_in(b) {
                cross.push((edge_between(a, b), is_in(b)));
            }
        }
        match cross.len() {
            0 => {}
            2 => {
                let (enter, leave) = if cross[0].1 {
                    (cross[0].0, cross[1].0)
                } else {
                    (cross[1].0, cross[0].0)
                };
                next[leave] = enter;
            }
            4 => {
                for k in 0..4 {
                    if cross[k].1 {
                        continue;
                    }
                    let target = if face_inside[f] { (k + 1) % 4 } else { (k + 3) % 4 };
                    next[cross[k].0] = cross[target].0;
                }
            }
            _ => unreachable!("a face has an even number of crossings"),
        }
    }
    let mut seen = [false; 12];
    let mut loops = Vec::new();
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut lp = vec![start];
        seen[start] = true;
        let mut e = next[start];
        while e != start {
            seen[e] = true;
            lp.push(e);
            e = next[e];
        }
        let apex = choose_apex(&lp);
        loops.push(Loop { edges: lp, apex });
    }
    loops
}

/// Index of a configuration: 8 corner bits plus 6 face-resolution bits.
pub fn case_index(inside: u8, face_inside: [bool; 6]) -> usize {
    let mut idx = inside as usize;
    for (f, b) in face_inside.iter().enumerate() {
        if *b {
            idx |= 1 << (8 + f);
        }
    }
    idx
}

/// Whether face `f` has four crossings for this corner configuration.
pub fn face_is_ambiguous(inside: u8, f: usize) -> bool {
    let c = FACES[f];
    let b: Vec<bool> = c.iter().map(|&k| inside >> k & 1 == 1).collect();
    b[0] == b[2] && b[1] == b[3] && b[0] != b[1]
}

/// Loops for `case_index(inside, face_inside)`.
pub fn loops(index: usize) -> &'static [Loop] {
    static TABLE: OnceLock<Vec<Vec<Loop>>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        (0..1usize << 14)
            .map(|i| {
                let face_inside = std::array::from_fn(|f| i >> (8 + f) & 1 == 1);
                polygonize(i as u8, face_inside)
            })
            .collect()
    });
    &t[index]
}

pub(crate) const FACE_CORNERS: [[usize; 4]; 6] = FACES;

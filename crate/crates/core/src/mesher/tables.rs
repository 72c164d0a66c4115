//! Marching-cubes case table, generated at first use.
//!
//! For each of the 256 corner sign configurations the iso-surface patch is
//! assembled by walking cut edges around face-local components of inside
//! corners. Because the walk is determined purely by the four corner signs
//! of each face, two cells sharing a face produce the same segment on it,
//! which makes the extracted surface watertight across cells — including
//! the ambiguous diagonal cases, which resolve to "separate the inside
//! corners" on both sides.
//!
//! Corner i sits at (i&1, (i>>1)&1, (i>>2)&1); a corner is inside when its
//! distance is strictly negative. Fan triangulation of each edge cycle
//! yields triangles whose normals point toward positive distance.

use std::sync::OnceLock;

/// Cube corner offsets, indexed by corner id.
pub const CORNER_OFFSET: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// The 12 cube edges as corner pairs.
pub const EDGE_CORNERS: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// (axis, direction) of each edge: 0 = x, 1 = y, 2 = z.
pub fn edge_axis(e: usize) -> usize {
    e / 4
}

fn edge_between(a: usize, b: usize) -> usize {
    let key = (a.min(b), a.max(b));
    EDGE_CORNERS
        .iter()
        .position(|&(x, y)| (x, y) == key)
        .expect("corners are cube-edge adjacent")
}

/// Faces as 4 corners in counter-clockwise order seen from outside.
fn faces() -> [[usize; 4]; 6] {
    let mut out = [[0usize; 4]; 6];
    let mut f = 0;
    for axis in 0..3usize {
        for sign in 0..2usize {
            let (u, v) = if sign == 1 {
                ((axis + 1) % 3, (axis + 2) % 3)
            } else {
                ((axis + 2) % 3, (axis + 1) % 3)
            };
            for (j, (uu, vv)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                let mut c = [0usize; 3];
                c[axis] = sign;
                c[u] = uu;
                c[v] = vv;
                out[f][j] = c[0] + 2 * c[1] + 4 * c[2];
            }
            f += 1;
        }
    }
    out
}

/// Triangles (as cube-edge triples) for one corner configuration.
fn triangulate_config(config: u8) -> Vec<[u8; 3]> {
    let inside = |c: usize| (config >> c) & 1 == 1;
    // each cut edge gets exactly one successor over all faces
    let mut succ = [usize::MAX; 12];
    for face in faces() {
        let ins: Vec<bool> = face.iter().map(|&c| inside(c)).collect();
        if ins.iter().all(|&b| b) || ins.iter().all(|&b| !b) {
            continue;
        }
        for j in 0..4 {
            // arc of inside corners starting at position j
            if !(ins[j] && !ins[(j + 3) % 4]) {
                continue;
            }
            let mut e = j;
            while ins[(e + 1) % 4] {
                e = (e + 1) % 4;
            }
            let enter = edge_between(face[(j + 3) % 4], face[j]);
            let leave = edge_between(face[e], face[(e + 1) % 4]);
            debug_assert_eq!(succ[enter], usize::MAX);
            succ[enter] = leave;
        }
    }
    // stitch directed cycles and fan-triangulate
    let mut tris = Vec::new();
    let mut visited = [false; 12];
    for start in 0..12 {
        if succ[start] == usize::MAX || visited[start] {
            continue;
        }
        let mut cycle = vec![start];
        visited[start] = true;
        let mut cur = succ[start];
        while cur != start {
            visited[cur] = true;
            cycle.push(cur);
            cur = succ[cur];
        }
        for i in 1..cycle.len() - 1 {
            tris.push([cycle[0] as u8, cycle[i] as u8, cycle[i + 1] as u8]);
        }
    }
    tris
}

pub fn case_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|cfg| triangulate_config(cfg as u8)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_full_configs_have_no_triangles() {
        let t = case_table();
        assert!(t[0].is_empty());
        assert!(t[255].is_empty());
    }

    #[test]
    fn single_corner_gives_one_triangle() {
        let t = case_table();
        for c in 0..8 {
            assert_eq!(t[1usize << c].len(), 1, "corner {c}");
        }
    }

    #[test]
    fn triangle_count_parity_of_cut_edges() {
        // every config's triangles use each cut edge; cut edges are those
        // whose endpoints differ in sign
        let t = case_table();
        for cfg in 0..256usize {
            let inside = |c: usize| (cfg >> c) & 1 == 1;
            let cut: Vec<usize> = (0..12)
                .filter(|&e| {
                    let (a, b) = EDGE_CORNERS[e];
                    inside(a) != inside(b)
                })
                .collect();
            let mut used: Vec<usize> = t[cfg]
                .iter()
                .flat_map(|tri| tri.iter().map(|&e| e as usize))
                .collect();
            used.sort_unstable();
            used.dedup();
            assert_eq!(used, cut, "config {cfg}");
        }
    }

    #[test]
    fn complementary_configs_have_equal_triangle_counts() {
        let t = case_table();
        for cfg in 0..256usize {
            assert_eq!(t[cfg].len(), t[cfg ^ 0xFF].len(), "config {cfg}");
        }
    }

    #[test]
    fn single_inside_corner_triangle_points_outward() {
        // corner 0 inside: the triangle normal must point away from it
        let t = &case_table()[1];
        assert_eq!(t.len(), 1);
        // place edge vertices at the midpoints of the three cut edges
        let pos = |e: u8| {
            let (a, b) = EDGE_CORNERS[e as usize];
            let pa = CORNER_OFFSET[a];
            let pb = CORNER_OFFSET[b];
            [
                (pa[0] + pb[0]) as f64 / 2.0,
                (pa[1] + pb[1]) as f64 / 2.0,
                (pa[2] + pb[2]) as f64 / 2.0,
            ]
        };
        let [e0, e1, e2] = t[0];
        let (p0, p1, p2) = (pos(e0), pos(e1), pos(e2));
        let u = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
        let v = [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]];
        let n = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        // outward means positive dot with the direction away from corner 0
        assert!(n[0] + n[1] + n[2] > 0.0, "normal {n:?}");
    }
}

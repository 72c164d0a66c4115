//! Extraction oracles: analytic sphere/torus geometry, topology checks,
//! dense-vs-octree equivalence, and the query-count economy bound.

use recon_core::datagen::sdf::unit_sphere_scene;
use recon_core::datagen::{AlbedoPattern, Primitive, SceneSdf};
use recon_core::field::{CountingField};
use recon_core::geom::vec3::{self, Aabb};
use recon_core::mesher::*;

fn torus_scene() -> SceneSdf {
    SceneSdf {
        prims: vec![(
            Primitive::Torus {
                center: [0.0; 3],
                major: 0.7,
                minor: 0.22,
            },
            AlbedoPattern::Solid {
                color: [0.6; 3],
            },
        )],
        blend: 0.0,
    }
}

fn box2() -> Aabb<f64> {
    Aabb::new([-2.0; 3], [2.0; 3])
}

#[test]
fn probe_bbox_brackets_the_sphere() {
    let s = unit_sphere_scene();
    let bb = probe_bbox(&s, &box2(), 16).unwrap();
    for a in 0..3 {
        assert!(bb.min[a] <= -1.0 && bb.min[a] >= -1.5, "min {:?}", bb.min);
        assert!(bb.max[a] >= 1.0 && bb.max[a] <= 1.5, "max {:?}", bb.max);
    }
}

#[test]
fn probe_bbox_translates_with_the_scene() {
    let moved = SceneSdf {
        prims: vec![(
            Primitive::Sphere {
                center: [0.5, -0.25, 0.125],
                radius: 1.0,
            },
            AlbedoPattern::Solid { color: [0.7; 3] },
        )],
        blend: 0.0,
    };
    let base = probe_bbox(&unit_sphere_scene(), &box2(), 16).unwrap();
    // translate the search box by the same offset so the lattice shifts
    // identically
    let shifted_search = Aabb::new([-1.5, -2.25, -1.875], [2.5, 1.75, 2.125]);
    let bb = probe_bbox(&moved, &shifted_search, 16).unwrap();
    for a in 0..3 {
        let off = [0.5, -0.25, 0.125][a];
        assert!((bb.min[a] - (base.min[a] + off)).abs() < 1e-12);
        assert!((bb.max[a] - (base.max[a] + off)).abs() < 1e-12);
    }
}

#[test]
fn probe_bbox_errors_on_empty_field() {
    // positive everywhere
    let far = SceneSdf {
        prims: vec![(
            Primitive::Sphere {
                center: [50.0, 0.0, 0.0],
                radius: 0.5,
            },
            AlbedoPattern::Solid { color: [0.7; 3] },
        )],
        blend: 0.0,
    };
    assert!(matches!(
        probe_bbox(&far, &box2(), 8),
        Err(recon_core::Error::EmptySurface)
    ));
}

#[test]
fn dense_sphere_vertices_on_unit_radius() {
    let s = unit_sphere_scene();
    let bb = Aabb::<f64>::new([-1.4; 3], [1.4; 3]);
    let res = 128;
    let (mesh, _) = extract_dense(&s, &bb, res);
    mesh.require_watertight().unwrap();
    assert_eq!(mesh.euler_characteristic(), 2);
    let cell = 2.8 / res as f64;
    for v in &mesh.vertices {
        assert!((vec3::norm(*v) - 1.0).abs() <= 2.0 * cell);
    }
}

#[test]
fn dense_torus_euler_characteristic_zero() {
    let t = torus_scene();
    let bb = Aabb::<f64>::new([-1.2; 3], [1.2; 3]);
    let (mesh, _) = extract_dense(&t, &bb, 64);
    mesh.require_watertight().unwrap();
    assert_eq!(mesh.euler_characteristic(), 0);
}

#[test]
fn doubling_resolution_halves_radial_error() {
    let s = unit_sphere_scene();
    let bb = Aabb::<f64>::new([-1.3; 3], [1.3; 3]);
    let max_err = |res: usize| {
        let (mesh, _) = extract_dense(&s, &bb, res);
        mesh.vertices
            .iter()
            .map(|&v| (vec3::norm(v) - 1.0).abs())
            .fold(0.0, f64::max)
    };
    let e1 = max_err(32);
    let e2 = max_err(64);
    // halving within 20 percent slack
    assert!(e2 <= e1 * 0.5 * 1.2, "e1 {e1}, e2 {e2}");
}

#[test]
fn mesh_oriented_along_field_gradient() {
    let t = torus_scene();
    let bb = Aabb::<f64>::new([-1.2; 3], [1.2; 3]);
    let (mesh, _) = extract_dense(&t, &bb, 48);
    for tri in 0..mesh.triangles.len() {
        let n = mesh.face_normal(tri);
        let [a, b, c] = mesh.tri_vertices(tri);
        let centroid = vec3::scale(vec3::add(vec3::add(a, b), c), 1.0 / 3.0);
        let g = t.gradient_at(centroid);
        assert!(
            vec3::dot(n, g) > 0.0,
            "face {tri} normal {n:?} against gradient {g:?}"
        );
    }
}

#[test]
fn octree_equals_dense_on_sphere_with_query_economy() {
    let s = unit_sphere_scene();
    let bb = Aabb::<f64>::new([-1.4; 3], [1.4; 3]);
    let res = 128;

    let counted_dense = CountingField::new(&s);
    let (dense, dense_rep) = extract_dense(&counted_dense, &bb, res);
    let dense_queries = counted_dense.queries();

    let counted_oct = CountingField::new(&s);
    let (oct, oct_rep) = extract_octree(&counted_oct, &bb, res).unwrap();
    let oct_queries = counted_oct.queries();

    // identical cell classification
    let mut a = dense_rep.cells.clone();
    let mut b = oct_rep.cells.clone();
    a.sort_unstable();
    b.sort_unstable();
    assert_eq!(a, b, "marched cell sets differ");

    // identical vertex sets within 1e-6
    assert_eq!(dense.vertices.len(), oct.vertices.len());
    let key = |v: &[f64; 3]| {
        (
            (v[0] * 1e7).round() as i64,
            (v[1] * 1e7).round() as i64,
            (v[2] * 1e7).round() as i64,
        )
    };
    let mut va: Vec<_> = dense.vertices.iter().map(key).collect();
    let mut vb: Vec<_> = oct.vertices.iter().map(key).collect();
    va.sort_unstable();
    vb.sort_unstable();
    assert_eq!(va, vb);

    assert!(
        (oct_queries as f64) <= 0.30 * dense_queries as f64,
        "octree used {oct_queries} queries vs dense {dense_queries}"
    );
}

#[test]
fn vertex_colors_from_field_head() {
    let s = SceneSdf {
        prims: vec![(
            Primitive::Sphere {
                center: [0.0; 3],
                radius: 1.0,
            },
            AlbedoPattern::Solid {
                color: [0.25, 0.5, 0.75],
            },
        )],
        blend: 0.0,
    };
    let bb = Aabb::<f64>::new([-1.3; 3], [1.3; 3]);
    let (mut mesh, _) = extract_dense(&s, &bb, 32);
    vertex_colors(&s, &mut mesh, None);
    for a in &mesh.vertex_albedo {
        assert_eq!(*a, [0.25, 0.5, 0.75]);
    }
    // forcing unit shading leaves albedo unchanged
    let shade_one = |ns: &[[f64; 3]]| vec![1.0; ns.len() * 3];
    let mut shaded = mesh.clone();
    vertex_colors(&s, &mut shaded, Some(&shade_one));
    assert_eq!(shaded.vertex_albedo, mesh.vertex_albedo);
}

#[test]
fn random_blend_scenes_octree_equals_dense() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for scene_i in 0..3 {
        let n_prims = rng.gen_range(2..4);
        let prims = (0..n_prims)
            .map(|_| {
                let c = [
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                ];
                (
                    Primitive::Sphere {
                        center: c,
                        radius: rng.gen_range(0.3..0.6),
                    },
                    AlbedoPattern::Solid { color: [0.7; 3] },
                )
            })
            .collect();
        let scene = SceneSdf {
            prims,
            blend: rng.gen_range(0.05..0.15),
        };
        let bb = Aabb::<f64>::new([-1.5; 3], [1.5; 3]);
        let (dense, drep) = extract_dense(&scene, &bb, 64);
        let (oct, orep) = extract_octree(&scene, &bb, 64).unwrap();
        let mut a = drep.cells;
        let mut b = orep.cells;
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b, "scene {scene_i}");
        assert_eq!(dense.vertices.len(), oct.vertices.len(), "scene {scene_i}");
    }
}

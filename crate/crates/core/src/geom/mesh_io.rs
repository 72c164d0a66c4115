//! Mesh import/export: OBJ (with the per-vertex color extension) and
//! binary little-endian PLY. Colors and normals are stored as 32-bit
//! floats in both formats so a write/read roundtrip is exact at f32
//! precision.

use super::mesh::TriMesh;
use super::vec3::{self, Vec3};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyBinary,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("obj") => Ok(Self::Obj),
            Some("ply") => Ok(Self::PlyBinary),
            other => Err(Error::Format(format!(
                "unknown mesh extension {other:?} (use .obj or .ply)"
            ))),
        }
    }
}

pub fn export_mesh<T: Scalar>(mesh: &TriMesh<T>, path: &Path) -> Result<()> {
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => export_obj(mesh, path),
        MeshFormat::PlyBinary => export_ply(mesh, path),
    }
}

pub fn import_mesh<T: Scalar>(path: &Path) -> Result<TriMesh<T>> {
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => import_obj(path),
        MeshFormat::PlyBinary => import_ply(path),
    }
}

fn export_obj<T: Scalar>(mesh: &TriMesh<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# exported by recon")?;
    for (v, a) in mesh.vertices.iter().zip(&mesh.vertex_albedo) {
        writeln!(
            w,
            "v {} {} {} {} {} {}",
            f32p(v[0]),
            f32p(v[1]),
            f32p(v[2]),
            f32p(a[0]),
            f32p(a[1]),
            f32p(a[2])
        )?;
    }
    for n in &mesh.vertex_normals {
        writeln!(w, "vn {} {} {}", f32p(n[0]), f32p(n[1]), f32p(n[2]))?;
    }
    for t in &mesh.triangles {
        writeln!(
            w,
            "f {}//{} {}//{} {}//{}",
            t[0] + 1,
            t[0] + 1,
            t[1] + 1,
            t[1] + 1,
            t[2] + 1,
            t[2] + 1
        )?;
    }
    Ok(())
}

/// Shortest f32 representation that parses back exactly.
fn f32p<T: Scalar>(v: T) -> String {
    format!("{}", v.to_f64_lossy() as f32)
}

fn import_obj<T: Scalar>(path: &Path) -> Result<TriMesh<T>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut vertices = Vec::new();
    let mut albedo = Vec::new();
    let mut normals = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    for line in r.lines() {
        let line = line?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let vals: Vec<f32> = it.map_while(|s| s.parse().ok()).collect();
                if vals.len() < 3 {
                    return Err(Error::Format("short vertex line".into()));
                }
                vertices.push([T::c(vals[0] as f64), T::c(vals[1] as f64), T::c(vals[2] as f64)]);
                if vals.len() >= 6 {
                    albedo.push([T::c(vals[3] as f64), T::c(vals[4] as f64), T::c(vals[5] as f64)]);
                } else {
                    albedo.push([T::c(0.7); 3]);
                }
            }
            Some("vn") => {
                let vals: Vec<f32> = it.map_while(|s| s.parse().ok()).collect();
                if vals.len() < 3 {
                    return Err(Error::Format("short normal line".into()));
                }
                normals.push([T::c(vals[0] as f64), T::c(vals[1] as f64), T::c(vals[2] as f64)]);
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        first
                            .parse::<u32>()
                            .map_err(|_| Error::Format(format!("bad face token `{tok}`")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Format("face with fewer than 3 vertices".into()));
                }
                // fan-triangulate polygons
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0] - 1, idx[k] - 1, idx[k + 1] - 1]);
                }
            }
            _ => {}
        }
    }
    if normals.len() != vertices.len() {
        normals = face_average_normals(&vertices, &triangles);
    }
    Ok(TriMesh::new(vertices, triangles, normals, albedo))
}

const PLY_VERTEX_PROPS: [&str; 9] = ["x", "y", "z", "nx", "ny", "nz", "red", "green", "blue"];

fn export_ply<T: Scalar>(mesh: &TriMesh<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\ncomment exported by recon\nelement vertex {}\n",
        mesh.vertices.len()
    )?;
    for p in PLY_VERTEX_PROPS {
        writeln!(w, "property float {p}")?;
    }
    write!(
        w,
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.triangles.len()
    )?;
    for i in 0..mesh.vertices.len() {
        let row = [
            mesh.vertices[i][0],
            mesh.vertices[i][1],
            mesh.vertices[i][2],
            mesh.vertex_normals[i][0],
            mesh.vertex_normals[i][1],
            mesh.vertex_normals[i][2],
            mesh.vertex_albedo[i][0],
            mesh.vertex_albedo[i][1],
            mesh.vertex_albedo[i][2],
        ];
        for v in row {
            w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        }
    }
    for t in &mesh.triangles {
        w.write_all(&[3u8])?;
        for &i in t {
            w.write_all(&(i as i32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn import_ply<T: Scalar>(path: &Path) -> Result<TriMesh<T>> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    // header is ASCII lines up to end_header
    let mut line = String::new();
    let mut read_line = |r: &mut BufReader<std::fs::File>| -> Result<String> {
        line.clear();
        let mut byte = [0u8; 1];
        loop {
            r.read_exact(&mut byte)?;
            if byte[0] == b'\n' {
                break;
            }
            line.push(byte[0] as char);
        }
        Ok(line.trim_end().to_string())
    };
    if read_line(&mut r)? != "ply" {
        return Err(Error::Format("missing ply magic".into()));
    }
    let mut n_vertex = 0usize;
    let mut n_face = 0usize;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut binary_le = false;
    loop {
        let l = read_line(&mut r)?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "binary_little_endian", _] => binary_le = true,
            ["format", ..] => {
                return Err(Error::Format("only binary_little_endian ply supported".into()))
            }
            ["element", "vertex", n] => {
                n_vertex = n.parse().map_err(|_| Error::Format("bad vertex count".into()))?;
                in_vertex = true;
            }
            ["element", "face", n] => {
                n_face = n.parse().map_err(|_| Error::Format("bad face count".into()))?;
                in_vertex = false;
            }
            ["property", ty, name] if in_vertex => {
                if *ty != "float" {
                    return Err(Error::Format(format!(
                        "unsupported vertex property type `{ty}`"
                    )));
                }
                vertex_props.push(name.to_string());
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    if !binary_le {
        return Err(Error::Format("ply format line missing".into()));
    }
    let find = |name: &str| vertex_props.iter().position(|p| p == name);
    let (px, py, pz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::Format("ply vertex needs x/y/z".into())),
    };
    let normal_idx = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let color_idx = match (find("red"), find("green"), find("blue")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let stride = vertex_props.len();
    let mut buf = vec![0u8; 4 * stride];
    let mut vertices = Vec::with_capacity(n_vertex);
    let mut normals = Vec::with_capacity(n_vertex);
    let mut albedo = Vec::with_capacity(n_vertex);
    for _ in 0..n_vertex {
        r.read_exact(&mut buf)?;
        let get = |i: usize| {
            f32::from_le_bytes([buf[4 * i], buf[4 * i + 1], buf[4 * i + 2], buf[4 * i + 3]])
        };
        vertices.push([
            T::c(get(px) as f64),
            T::c(get(py) as f64),
            T::c(get(pz) as f64),
        ]);
        if let Some((a, b, c)) = normal_idx {
            normals.push([
                T::c(get(a) as f64),
                T::c(get(b) as f64),
                T::c(get(c) as f64),
            ]);
        }
        if let Some((a, b, c)) = color_idx {
            albedo.push([
                T::c(get(a) as f64),
                T::c(get(b) as f64),
                T::c(get(c) as f64),
            ]);
        } else {
            albedo.push([T::c(0.7); 3]);
        }
    }
    let mut triangles = Vec::with_capacity(n_face);
    for _ in 0..n_face {
        let mut cnt = [0u8; 1];
        r.read_exact(&mut cnt)?;
        let mut idx = Vec::with_capacity(cnt[0] as usize);
        for _ in 0..cnt[0] {
            let mut b4 = [0u8; 4];
            r.read_exact(&mut b4)?;
            idx.push(i32::from_le_bytes(b4) as u32);
        }
        if idx.len() < 3 {
            return Err(Error::Format("degenerate ply face".into()));
        }
        for k in 1..idx.len() - 1 {
            triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }
    let normals = if normals.len() == vertices.len() {
        normals
    } else {
        face_average_normals(&vertices, &triangles)
    };
    Ok(TriMesh::new(vertices, triangles, normals, albedo))
}

fn face_average_normals<T: Scalar>(vertices: &[Vec3<T>], triangles: &[[u32; 3]]) -> Vec<Vec3<T>> {
    let mut acc = vec![[T::zero(); 3]; vertices.len()];
    for t in triangles {
        let a = vertices[t[0] as usize];
        let b = vertices[t[1] as usize];
        let c = vertices[t[2] as usize];
        let n = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
        for &i in t {
            acc[i as usize] = vec3::add(acc[i as usize], n);
        }
    }
    acc.into_iter().map(vec3::normalize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::icosphere;

    fn assert_mesh_close(a: &TriMesh<f64>, b: &TriMesh<f64>, tol: f64) {
        assert_eq!(a.triangles, b.triangles);
        assert_eq!(a.vertices.len(), b.vertices.len());
        for i in 0..a.vertices.len() {
            assert!(vec3::dist(a.vertices[i], b.vertices[i]) < tol);
            assert!(vec3::dist(a.vertex_normals[i], b.vertex_normals[i]) < tol);
            assert!(vec3::dist(a.vertex_albedo[i], b.vertex_albedo[i]) < tol);
        }
    }

    #[test]
    fn obj_roundtrip_is_exact() {
        let mut m = icosphere::<f64>(0.83, 2);
        for (i, a) in m.vertex_albedo.iter_mut().enumerate() {
            *a = [
                (i % 7) as f64 / 7.0,
                (i % 5) as f64 / 5.0,
                (i % 3) as f64 / 3.0,
            ];
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        export_mesh(&m, &path).unwrap();
        let back: TriMesh<f64> = import_mesh(&path).unwrap();
        assert_mesh_close(&m, &back, 1e-6);
    }

    #[test]
    fn ply_roundtrip_is_exact() {
        let m = icosphere::<f64>(1.21, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ply");
        export_mesh(&m, &path).unwrap();
        let back: TriMesh<f64> = import_mesh(&path).unwrap();
        assert_mesh_close(&m, &back, 1e-6);
        assert_eq!(m.vertices.len(), back.vertices.len());
        assert_eq!(m.triangles.len(), back.triangles.len());
    }

    #[test]
    fn unknown_extension_rejected() {
        let m = icosphere::<f64>(1.0, 0);
        assert!(export_mesh(&m, Path::new("/tmp/mesh.stl")).is_err());
    }
}

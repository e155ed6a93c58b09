//! Mixed meshes: 27-node hexahedra for displacement/potential sharing their
//! corner nodes with 8-node hexahedra for pressure.
//!
//! Meshes are structured boxes or unions of boxes (merged on coincident
//! nodes), which covers every geometry this solver targets. A small text
//! format (`# mapfem mesh v1`) carries nodes, both connectivities, region
//! tags and named node/face sets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::tensor::Vector3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh io: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh format: {0}")]
    Format(String),
}

/// A boundary face addressed by element index and local face id
/// (0..6 = xmin, xmax, ymin, ymax, zmin, zmax of the parent cube).
pub type Face = (usize, u8);

#[derive(Debug, Clone, Default)]
pub struct MixedMesh {
    pub nodes: Vec<Vector3>,
    /// 27-node connectivity (displacement and potential), lexicographic
    /// local ordering with x fastest.
    pub elems_u: Vec<[usize; 27]>,
    /// 8-node corner connectivity (pressure) of the same elements.
    pub elems_p: Vec<[usize; 8]>,
    /// Material region id per element.
    pub region_tags: Vec<usize>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub face_sets: BTreeMap<String, Vec<Face>>,
}

impl MixedMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elems(&self) -> usize {
        self.elems_u.len()
    }

    /// Nodes referenced by the pressure connectivity (corner nodes).
    pub fn pressure_nodes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        for e in &self.elems_p {
            for &n in e {
                seen[n] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }

    /// Local node ids of one face of the 27-node element, and the fixed
    /// parent coordinate (direction, value).
    pub fn face_param(face: u8) -> (usize, f64) {
        match face {
            0 => (0, 0.0),
            1 => (0, 1.0),
            2 => (1, 0.0),
            3 => (1, 1.0),
            4 => (2, 0.0),
            5 => (2, 1.0),
            _ => unreachable!("face id out of range"),
        }
    }

    /// Embeds a face-square coordinate into the parent cube.
    pub fn face_coord(face: u8, a: f64, b: f64) -> [f64; 3] {
        let (dir, val) = Self::face_param(face);
        match dir {
            0 => [val, a, b],
            1 => [a, val, b],
            _ => [a, b, val],
        }
    }

    pub fn prefix_sets(&mut self, prefix: &str) {
        self.node_sets = std::mem::take(&mut self.node_sets)
            .into_iter()
            .map(|(k, v)| (format!("{prefix}{k}"), v))
            .collect();
        self.face_sets = std::mem::take(&mut self.face_sets)
            .into_iter()
            .map(|(k, v)| (format!("{prefix}{k}"), v))
            .collect();
    }

    pub fn tag_regions(&mut self, tag: usize) {
        for t in &mut self.region_tags {
            *t = tag;
        }
    }

    pub fn translate(&mut self, offset: Vector3) {
        for n in &mut self.nodes {
            *n += offset;
        }
    }

    /// Collects the union of the node ids of a face set (for Dirichlet data
    /// defined on faces).
    pub fn face_set_nodes(&self, name: &str) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(faces) = self.face_sets.get(name) {
            for &(e, f) in faces {
                let (dir, val) = Self::face_param(f);
                for k in 0..3 {
                    for j in 0..3 {
                        for i in 0..3 {
                            let idx = [i, j, k];
                            let on = (idx[dir] as f64) / 2.0 == val;
                            if on {
                                out.push(self.elems_u[e][i + 3 * j + 9 * k]);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Builds a structured box mesh: `divisions` elements per direction on the
/// box `[origin, origin + extents]`, control points on the uniform
/// `(2nx+1)(2ny+1)(2nz+1)` grid. Face and node sets are named
/// xmin/xmax/ymin/ymax/zmin/zmax.
pub fn structured_hex_mesh(
    origin: Vector3,
    extents: [f64; 3],
    divisions: [usize; 3],
) -> MixedMesh {
    let [nx, ny, nz] = divisions;
    assert!(nx >= 1 && ny >= 1 && nz >= 1, "divisions must be >= 1");
    let (gx, gy, gz) = (2 * nx + 1, 2 * ny + 1, 2 * nz + 1);
    let mut nodes = Vec::with_capacity(gx * gy * gz);
    for k in 0..gz {
        for j in 0..gy {
            for i in 0..gx {
                nodes.push(Vector3::new(
                    origin[0] + extents[0] * i as f64 / (gx - 1) as f64,
                    origin[1] + extents[1] * j as f64 / (gy - 1) as f64,
                    origin[2] + extents[2] * k as f64 / (gz - 1) as f64,
                ));
            }
        }
    }
    let gid = |i: usize, j: usize, k: usize| i + gx * j + gx * gy * k;

    let mut elems_u = Vec::with_capacity(nx * ny * nz);
    let mut elems_p = Vec::with_capacity(nx * ny * nz);
    let mut face_sets: BTreeMap<String, Vec<Face>> = BTreeMap::new();
    for ez in 0..nz {
        for ey in 0..ny {
            for ex in 0..nx {
                let e = elems_u.len();
                let mut conn = [0usize; 27];
                for k in 0..3 {
                    for j in 0..3 {
                        for i in 0..3 {
                            conn[i + 3 * j + 9 * k] =
                                gid(2 * ex + i, 2 * ey + j, 2 * ez + k);
                        }
                    }
                }
                elems_u.push(conn);
                let mut pc = [0usize; 8];
                for k in 0..2 {
                    for j in 0..2 {
                        for i in 0..2 {
                            pc[i + 2 * j + 4 * k] =
                                gid(2 * (ex + i), 2 * (ey + j), 2 * (ez + k));
                        }
                    }
                }
                elems_p.push(pc);

                if ex == 0 {
                    face_sets.entry("xmin".into()).or_default().push((e, 0));
                }
                if ex == nx - 1 {
                    face_sets.entry("xmax".into()).or_default().push((e, 1));
                }
                if ey == 0 {
                    face_sets.entry("ymin".into()).or_default().push((e, 2));
                }
                if ey == ny - 1 {
                    face_sets.entry("ymax".into()).or_default().push((e, 3));
                }
                if ez == 0 {
                    face_sets.entry("zmin".into()).or_default().push((e, 4));
                }
                if ez == nz - 1 {
                    face_sets.entry("zmax".into()).or_default().push((e, 5));
                }
            }
        }
    }

    let mut node_sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (name, pred) in [
        ("xmin", 0usize),
        ("xmax", 1),
        ("ymin", 2),
        ("ymax", 3),
        ("zmin", 4),
        ("zmax", 5),
    ] {
        let mut set = Vec::new();
        for k in 0..gz {
            for j in 0..gy {
                for i in 0..gx {
                    let on = match pred {
                        0 => i == 0,
                        1 => i == gx - 1,
                        2 => j == 0,
                        3 => j == gy - 1,
                        4 => k == 0,
                        _ => k == gz - 1,
                    };
                    if on {
                        set.push(gid(i, j, k));
                    }
                }
            }
        }
        node_sets.insert(name.into(), set);
    }

    let n_elems = elems_u.len();
    MixedMesh {
        nodes,
        elems_u,
        elems_p,
        region_tags: vec![0; n_elems],
        node_sets,
        face_sets,
    }
}

/// Unions several meshes, merging nodes that coincide within `tol`. Set
/// names are kept as-is (prefix beforehand to avoid unions you don't want);
/// region tags travel with their elements.
pub fn merge_meshes(parts: Vec<MixedMesh>, tol: f64) -> MixedMesh {
    let mut out = MixedMesh::default();
    let mut lookup: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    let key = |v: &Vector3| {
        (
            (v[0] / tol).round() as i64,
            (v[1] / tol).round() as i64,
            (v[2] / tol).round() as i64,
        )
    };
    for part in parts {
        let mut remap = Vec::with_capacity(part.nodes.len());
        for n in &part.nodes {
            let k = key(n);
            let id = *lookup.entry(k).or_insert_with(|| {
                out.nodes.push(*n);
                out.nodes.len() - 1
            });
            remap.push(id);
        }
        let elem_offset = out.elems_u.len();
        for conn in &part.elems_u {
            let mut c = [0usize; 27];
            for (dst, src) in c.iter_mut().zip(conn) {
                *dst = remap[*src];
            }
            out.elems_u.push(c);
        }
        for conn in &part.elems_p {
            let mut c = [0usize; 8];
            for (dst, src) in c.iter_mut().zip(conn) {
                *dst = remap[*src];
            }
            out.elems_p.push(c);
        }
        out.region_tags.extend_from_slice(&part.region_tags);
        for (name, set) in part.node_sets {
            let entry = out.node_sets.entry(name).or_default();
            entry.extend(set.iter().map(|&n| remap[n]));
            entry.sort_unstable();
            entry.dedup();
        }
        for (name, set) in part.face_sets {
            let entry = out.face_sets.entry(name).or_default();
            entry.extend(set.iter().map(|&(e, f)| (e + elem_offset, f)));
        }
    }
    out
}

/// Serialises the mesh in the v1 text format.
pub fn write_mesh_text(mesh: &MixedMesh) -> String {
    let mut s = String::new();
    s.push_str("# mapfem mesh v1\n");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for n in &mesh.nodes {
        let _ = writeln!(s, "{} {} {}", n[0], n[1], n[2]);
    }
    let _ = writeln!(s, "elems_u {}", mesh.elems_u.len());
    for e in &mesh.elems_u {
        let strs: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", strs.join(" "));
    }
    let _ = writeln!(s, "elems_p {}", mesh.elems_p.len());
    for e in &mesh.elems_p {
        let strs: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", strs.join(" "));
    }
    let _ = writeln!(s, "regions {}", mesh.region_tags.len());
    for t in &mesh.region_tags {
        let _ = writeln!(s, "{t}");
    }
    for (name, set) in &mesh.node_sets {
        let _ = writeln!(s, "nodeset {} {}", name, set.len());
        for n in set {
            let _ = writeln!(s, "{n}");
        }
    }
    for (name, set) in &mesh.face_sets {
        let _ = writeln!(s, "faceset {} {}", name, set.len());
        for (e, f) in set {
            let _ = writeln!(s, "{e} {f}");
        }
    }
    s.push_str("end\n");
    s
}

pub fn save_mesh(mesh: &MixedMesh, path: &Path) -> Result<(), MeshError> {
    std::fs::write(path, write_mesh_text(mesh))?;
    Ok(())
}

/// Parses the v1 text format.
pub fn parse_mesh_text(text: &str) -> Result<MixedMesh, MeshError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let bad = |m: &str| MeshError::Format(m.to_string());

    let mut mesh = MixedMesh::default();
    while let Some(line) = lines.next() {
        let mut toks = line.split_whitespace();
        let kw = toks.next().ok_or_else(|| bad("empty record"))?;
        match kw {
            "end" => return Ok(mesh),
            "nodes" => {
                let n: usize = parse_tok(toks.next(), "node count")?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated node table"))?;
                    let mut t = l.split_whitespace();
                    mesh.nodes.push(Vector3::new(
                        parse_tok(t.next(), "node x")?,
                        parse_tok(t.next(), "node y")?,
                        parse_tok(t.next(), "node z")?,
                    ));
                }
            }
            "elems_u" => {
                let n: usize = parse_tok(toks.next(), "elems_u count")?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated elems_u"))?;
                    let ids: Result<Vec<usize>, _> =
                        l.split_whitespace().map(str::parse).collect();
                    let ids = ids.map_err(|e| bad(&format!("elems_u ids: {e}")))?;
                    if ids.len() != 27 {
                        return Err(bad("elems_u row must have 27 ids"));
                    }
                    let mut c = [0usize; 27];
                    c.copy_from_slice(&ids);
                    mesh.elems_u.push(c);
                }
            }
            "elems_p" => {
                let n: usize = parse_tok(toks.next(), "elems_p count")?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated elems_p"))?;
                    let ids: Result<Vec<usize>, _> =
                        l.split_whitespace().map(str::parse).collect();
                    let ids = ids.map_err(|e| bad(&format!("elems_p ids: {e}")))?;
                    if ids.len() != 8 {
                        return Err(bad("elems_p row must have 8 ids"));
                    }
                    let mut c = [0usize; 8];
                    c.copy_from_slice(&ids);
                    mesh.elems_p.push(c);
                }
            }
            "regions" => {
                let n: usize = parse_tok(toks.next(), "region count")?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated regions"))?;
                    mesh.region_tags
                        .push(l.parse().map_err(|e| bad(&format!("region: {e}")))?);
                }
            }
            "nodeset" => {
                let name = toks.next().ok_or_else(|| bad("nodeset name"))?.to_string();
                let n: usize = parse_tok(toks.next(), "nodeset count")?;
                let mut set = Vec::with_capacity(n);
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated nodeset"))?;
                    set.push(l.parse().map_err(|e| bad(&format!("nodeset id: {e}")))?);
                }
                mesh.node_sets.insert(name, set);
            }
            "faceset" => {
                let name = toks.next().ok_or_else(|| bad("faceset name"))?.to_string();
                let n: usize = parse_tok(toks.next(), "faceset count")?;
                let mut set = Vec::with_capacity(n);
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated faceset"))?;
                    let mut t = l.split_whitespace();
                    set.push((
                        parse_tok(t.next(), "faceset elem")?,
                        parse_tok::<u8>(t.next(), "faceset face")?,
                    ));
                }
                mesh.face_sets.insert(name, set);
            }
            other => return Err(bad(&format!("unknown record '{other}'"))),
        }
    }
    Err(bad("missing 'end' record"))
}

pub fn load_mesh(path: &Path) -> Result<MixedMesh, MeshError> {
    parse_mesh_text(&std::fs::read_to_string(path)?)
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T, MeshError>
where
    T::Err: std::fmt::Display,
{
    tok.ok_or_else(|| MeshError::Format(format!("missing {what}")))?
        .parse()
        .map_err(|e| MeshError::Format(format!("{what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_element_counts() {
        let m = structured_hex_mesh(Vector3::ZERO, [1.0, 1.0, 1.0], [1, 1, 1]);
        assert_eq!(m.n_nodes(), 27);
        assert_eq!(m.n_elems(), 1);
        assert_eq!(m.pressure_nodes().len(), 8);
    }

    #[test]
    fn beam_mesh_node_count() {
        let m = structured_hex_mesh(Vector3::ZERO, [17.2, 5.0, 0.84], [8, 1, 4]);
        assert_eq!(m.n_nodes(), 17 * 3 * 9);
        assert_eq!(m.n_elems(), 32);
    }

    #[test]
    fn corner_nodes_are_shared_between_connectivities() {
        let m = structured_hex_mesh(Vector3::ZERO, [2.0, 1.0, 1.0], [2, 1, 1]);
        for (eu, ep) in m.elems_u.iter().zip(&m.elems_p) {
            // corners of the 27-node element in lexicographic order
            for (c, &pn) in [0, 2, 6, 8, 18, 20, 24, 26].iter().zip(ep) {
                assert_eq!(eu[*c], pn);
            }
        }
    }

    #[test]
    fn face_sets_cover_boundary() {
        let m = structured_hex_mesh(Vector3::ZERO, [1.0, 1.0, 1.0], [2, 3, 4]);
        assert_eq!(m.face_sets["xmin"].len(), 3 * 4);
        assert_eq!(m.face_sets["zmax"].len(), 2 * 3);
        let nodes = m.face_set_nodes("xmin");
        assert_eq!(nodes.len(), 7 * 9);
        for &n in &nodes {
            assert_eq!(m.nodes[n][0], 0.0);
        }
    }

    #[test]
    fn merge_shares_interface_nodes() {
        let a = structured_hex_mesh(Vector3::ZERO, [1.0, 1.0, 1.0], [1, 1, 1]);
        let mut b = structured_hex_mesh(Vector3::new(1.0, 0.0, 0.0), [1.0, 1.0, 1.0], [1, 1, 1]);
        b.tag_regions(1);
        let m = merge_meshes(vec![a, b], 1e-9);
        // 27 + 27 - 9 shared interface nodes
        assert_eq!(m.n_nodes(), 45);
        assert_eq!(m.n_elems(), 2);
        assert_eq!(m.region_tags, vec![0, 1]);
    }

    #[test]
    fn text_round_trip() {
        let mut m = structured_hex_mesh(Vector3::ZERO, [2.0, 1.0, 0.5], [2, 1, 1]);
        m.region_tags[1] = 3;
        let text = write_mesh_text(&m);
        let m2 = parse_mesh_text(&text).unwrap();
        assert_eq!(m.nodes.len(), m2.nodes.len());
        assert_eq!(m.elems_u, m2.elems_u);
        assert_eq!(m.elems_p, m2.elems_p);
        assert_eq!(m.region_tags, m2.region_tags);
        assert_eq!(m.node_sets, m2.node_sets);
        assert_eq!(m.face_sets, m2.face_sets);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(parse_mesh_text("nodes 1\n0 0\nend").is_err());
        assert!(parse_mesh_text("bogus 3\nend").is_err());
        assert!(parse_mesh_text("nodes 0\n").is_err());
    }
}

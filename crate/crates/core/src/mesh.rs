//! Structured simplicial meshes of the unit square and unit cube.
//!
//! Cells are stored with positively oriented vertex lists. Local face `i` of a
//! cell is the face opposite local vertex `i`. Every face carries one global
//! unit normal pointing from its owner (the lower-indexed adjacent cell) to
//! its neighbor, or outward on the boundary.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

pub const MAX_SQUARE_LEVEL: usize = 10;
pub const MAX_CUBE_LEVEL: usize = 6;

#[derive(Debug, Clone)]
pub struct Face {
    /// Global vertex indices, sorted ascending.
    pub vertices: Vec<usize>,
    /// Unit normal, owner to neighbor (outward on the boundary).
    pub normal: Point,
    /// Length in 2D, area in 3D.
    pub measure: f64,
    /// Largest edge length of the face.
    pub diameter: f64,
    pub owner: usize,
    pub neighbor: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }

    /// The cell across this face from `cell`, if any.
    pub fn other(&self, cell: usize) -> Option<usize> {
        if cell == self.owner {
            self.neighbor
        } else {
            Some(self.owner)
        }
    }

    /// +1 if the global normal points out of `cell`, -1 otherwise.
    pub fn orientation(&self, cell: usize) -> f64 {
        if cell == self.owner {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    cells: Vec<usize>,
    pub faces: Vec<Face>,
    cell_faces: Vec<usize>,
    pub level: usize,
}

impl SimplicialMesh {
    /// Build a mesh from raw vertices and flat cell connectivity
    /// (`dim + 1` indices per cell). Cells are reoriented to positive volume
    /// and faces are enumerated.
    pub fn new(dim: usize, vertices: Vec<Point>, cells: Vec<usize>, level: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::config(format!("unsupported dimension {dim}")));
        }
        let nv = dim + 1;
        if !cells.len().is_multiple_of(nv) {
            return Err(Error::structural(
                "cell connectivity length is not a multiple of dim + 1",
            ));
        }
        let mut cells = cells;
        for (c, cell) in cells.chunks_mut(nv).enumerate() {
            if let Some(&bad) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::structural(format!("cell {c} references missing vertex {bad}")));
            }
            let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let vol = geometry::signed_volume(dim, &pts);
            let scale = geometry::max_edge_length(&pts).powi(dim as i32);
            if vol.abs() <= 1e-14 * scale {
                return Err(Error::structural(format!("cell {c} is degenerate")));
            }
            if vol < 0.0 {
                cell.swap(0, 1);
            }
        }
        let mut mesh = SimplicialMesh {
            dim,
            vertices,
            cells,
            faces: Vec::new(),
            cell_faces: Vec::new(),
            level,
        };
        mesh.face_connectivity()?;
        Ok(mesh)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    /// Global face indices of cell `c`, ordered by opposite local vertex.
    pub fn cell_faces(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cell_faces[c * nv..(c + 1) * nv]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn face_points(&self, f: usize) -> Vec<Point> {
        self.faces[f].vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        geometry::signed_volume(self.dim, &self.cell_points(c))
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        geometry::max_edge_length(&self.cell_points(c))
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        geometry::centroid(&self.cell_points(c))
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_diameter(c)).fold(0.0, f64::max)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
            .map(|(i, _)| i)
    }

    /// Enumerate faces, assign owner/neighbor by ascending cell index, and
    /// fill the per-cell face table.
    fn face_connectivity(&mut self) -> Result<()> {
        let dim = self.dim;
        let nv = dim + 1;
        let n_cells = self.n_cells();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::with_capacity(n_cells * nv);
        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces = vec![usize::MAX; n_cells * nv];
        for c in 0..n_cells {
            for local in 0..nv {
                let mut key: Vec<usize> = (0..nv)
                    .filter(|&i| i != local)
                    .map(|i| self.cells[c * nv + i])
                    .collect();
                key.sort_unstable();
                let f = match index.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.neighbor.is_some() {
                            return Err(Error::structural(format!(
                                "face {:?} is shared by more than two cells",
                                face.vertices
                            )));
                        }
                        face.neighbor = Some(c);
                        f
                    }
                    None => {
                        let pts: Vec<Point> = key.iter().map(|&v| self.vertices[v]).collect();
                        let mut normal = geometry::face_normal(dim, &pts);
                        let outward = geometry::sub(&geometry::centroid(&pts), &self.cell_centroid(c));
                        if geometry::dot(&normal, &outward) < 0.0 {
                            normal = geometry::scale(&normal, -1.0);
                        }
                        faces.push(Face {
                            measure: geometry::simplex_measure(&pts),
                            diameter: geometry::max_edge_length(&pts),
                            vertices: key.clone(),
                            normal,
                            owner: c,
                            neighbor: None,
                        });
                        index.insert(key, faces.len() - 1);
                        faces.len() - 1
                    }
                };
                cell_faces[c * nv + local] = f;
            }
        }
        self.faces = faces;
        self.cell_faces = cell_faces;
        Ok(())
    }

    /// Barycentric coordinates of `x` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, x: &Point) -> [f64; 4] {
        let pts = self.cell_points(c);
        let vol = geometry::signed_volume(self.dim, &pts);
        let mut lambda = [0.0; 4];
        for i in 0..=self.dim {
            let mut sub = pts.clone();
            sub[i] = *x;
            lambda[i] = geometry::signed_volume(self.dim, &sub) / vol;
        }
        lambda
    }

    /// First cell containing `x` (up to `tol` in barycentric coordinates).
    /// Linear scan; meant for sampling, not for inner loops.
    pub fn locate(&self, x: &Point, tol: f64) -> Option<usize> {
        (0..self.n_cells()).find(|&c| self.barycentric(c, x)[..=self.dim].iter().all(|&l| l >= -tol))
    }

    /// Plain-text dump: vertex lines, then cell lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# dim {} vertices {} cells {}",
            self.dim,
            self.n_vertices(),
            self.n_cells()
        );
        for v in &self.vertices {
            let coords: Vec<String> = v[..self.dim].iter().map(|x| format!("{x:.17e}")).collect();
            let _ = writeln!(out, "{}", coords.join(" "));
        }
        for c in 0..self.n_cells() {
            let ids: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", ids.join(" "));
        }
        out
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump())?;
        Ok(())
    }
}

/// Uniform triangulation of the unit square: `2^(level-1)` squares per side,
/// each cut by the diagonal from its top-left to its bottom-right corner.
pub fn unit_square_mesh(level: usize) -> Result<SimplicialMesh> {
    if !(1..=MAX_SQUARE_LEVEL).contains(&level) {
        return Err(Error::config(format!(
            "square mesh level must be in 1..={MAX_SQUARE_LEVEL}, got {level}"
        )));
    }
    let n = 1usize << (level - 1);
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h, 0.0]);
        }
    }
    let mut cells = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            let bl = vid(i, j);
            let br = vid(i + 1, j);
            let tl = vid(i, j + 1);
            let tr = vid(i + 1, j + 1);
            cells.extend_from_slice(&[bl, br, tl]);
            cells.extend_from_slice(&[br, tr, tl]);
        }
    }
    SimplicialMesh::new(2, vertices, cells, level)
}

/// Uniform tetrahedralization of the unit cube: `2^(level-1)` subcubes per
/// side, each split into six tetrahedra around the diagonal from `(1,0,0)` to
/// `(0,1,1)` (the Kuhn split mirrored in x). All subcubes are split alike.
pub fn unit_cube_mesh(level: usize) -> Result<SimplicialMesh> {
    if !(1..=MAX_CUBE_LEVEL).contains(&level) {
        return Err(Error::config(format!(
            "cube mesh level must be in 1..={MAX_CUBE_LEVEL}, got {level}"
        )));
    }
    let n = 1usize << (level - 1);
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    // Paths from the start corner to the opposite corner along the axes, in
    // all six orders; +x steps are replaced by -x steps from the x=1 side.
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(24 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    let mut corner = [1usize, 0, 0];
                    let mut tet = [vid(i + 1, j, k); 4];
                    for (step, &axis) in perm.iter().enumerate() {
                        corner[axis] = if axis == 0 { 0 } else { 1 };
                        tet[step + 1] = vid(i + corner[0], j + corner[1], k + corner[2]);
                    }
                    cells.extend_from_slice(&tet);
                }
            }
        }
    }
    SimplicialMesh::new(3, vertices, cells, level)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_level_one() {
        let m = unit_square_mesh(1).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_faces(), 5);
        assert_eq!(m.faces.iter().filter(|f| !f.is_boundary()).count(), 1);
        // the interior edge is the top-left to bottom-right diagonal
        let interior = m.faces.iter().find(|f| !f.is_boundary()).unwrap();
        assert_eq!(interior.vertices, vec![1, 2]);
    }

    #[test]
    fn square_counts() {
        let m = unit_square_mesh(3).unwrap();
        assert_eq!(m.n_cells(), 32);
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        let m2 = unit_square_mesh(2).unwrap();
        assert_eq!(m2.boundary_faces().count(), 8);
    }

    #[test]
    fn level_out_of_range() {
        assert!(matches!(unit_square_mesh(0), Err(Error::Config(_))));
        assert!(matches!(unit_square_mesh(11), Err(Error::Config(_))));
        assert!(matches!(unit_cube_mesh(7), Err(Error::Config(_))));
    }

    #[test]
    fn cube_counts() {
        let m = unit_cube_mesh(1).unwrap();
        assert_eq!(m.n_cells(), 6);
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
        assert_eq!(m.n_faces(), 18);
        assert_eq!(m.faces.iter().filter(|f| !f.is_boundary()).count(), 6);
        assert_eq!(unit_cube_mesh(2).unwrap().n_cells(), 48);
    }

    #[test]
    fn cube_split_uses_mirrored_diagonal() {
        let m = unit_cube_mesh(1).unwrap();
        // vertex 1 = (1,0,0), vertex 6 = (0,1,1): shared by all six tets
        for c in 0..m.n_cells() {
            assert!(m.cell(c).contains(&1) && m.cell(c).contains(&6));
        }
    }

    #[test]
    fn three_cells_on_a_face_is_rejected() {
        let vertices = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [1.0, 1.0, 0.0],
        ];
        let cells = vec![0, 1, 2, 0, 1, 3, 0, 1, 4];
        assert!(matches!(
            SimplicialMesh::new(2, vertices, cells, 1),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(matches!(
            SimplicialMesh::new(2, vertices, vec![0, 1, 2], 1),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn dump_lists_vertices_and_cells() {
        let m = unit_square_mesh(1).unwrap();
        let text = m.dump();
        assert_eq!(text.lines().count(), 1 + 4 + 2);
        assert!(text.lines().last().unwrap().split_whitespace().count() == 3);
    }
}

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Point3, Vector3};
use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, ElementDef, Encoding, Header, Property, PropertyAccess, PropertyDef, PropertyType, ScalarType,
};
use ply_rs::writer::Writer;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::labeling::BoundaryLoop;
use crate::meshing::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    #[default]
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Default, Clone)]
struct Vertex {
    p: [f64; 3],
    n: [f64; 3],
    c: [u8; 3],
    label: u32,
}

fn as_f64(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

impl PropertyAccess for Vertex {
    fn new() -> Self {
        Self::default()
    }

    fn set_property(&mut self, name: String, p: Property) {
        let Some(v) = as_f64(&p) else { return };
        match name.as_str() {
            "x" => self.p[0] = v,
            "y" => self.p[1] = v,
            "z" => self.p[2] = v,
            "nx" => self.n[0] = v,
            "ny" => self.n[1] = v,
            "nz" => self.n[2] = v,
            "red" => self.c[0] = v as u8,
            "green" => self.c[1] = v as u8,
            "blue" => self.c[2] = v as u8,
            "label" => self.label = v as u32,
            _ => {}
        }
    }

    fn get_double(&self, name: &String) -> Option<f64> {
        match name.as_str() {
            "x" => Some(self.p[0]),
            "y" => Some(self.p[1]),
            "z" => Some(self.p[2]),
            "nx" => Some(self.n[0]),
            "ny" => Some(self.n[1]),
            "nz" => Some(self.n[2]),
            _ => None,
        }
    }

    fn get_uchar(&self, name: &String) -> Option<u8> {
        match name.as_str() {
            "red" => Some(self.c[0]),
            "green" => Some(self.c[1]),
            "blue" => Some(self.c[2]),
            _ => None,
        }
    }

    fn get_uint(&self, name: &String) -> Option<u32> {
        (name == "label").then_some(self.label)
    }
}

#[derive(Debug, Default, Clone)]
struct Face(Vec<u32>);

impl PropertyAccess for Face {
    fn new() -> Self {
        Self::default()
    }

    fn set_property(&mut self, name: String, p: Property) {
        if name != "vertex_indices" && name != "vertex_index" {
            return;
        }
        self.0 = match p {
            Property::ListInt(v) => v.into_iter().map(|i| i as u32).collect(),
            Property::ListUInt(v) => v,
            Property::ListShort(v) => v.into_iter().map(|i| i as u32).collect(),
            Property::ListUShort(v) => v.into_iter().map(u32::from).collect(),
            Property::ListChar(v) => v.into_iter().map(|i| i as u32).collect(),
            Property::ListUChar(v) => v.into_iter().map(u32::from).collect(),
            _ => return,
        };
    }

    fn get_list_uint(&self, name: &String) -> Option<&[u32]> {
        (name == "vertex_indices").then_some(&self.0[..])
    }
}

#[derive(Debug, Default, Clone)]
struct Edge([u32; 2]);

impl PropertyAccess for Edge {
    fn new() -> Self {
        Self::default()
    }

    fn get_uint(&self, name: &String) -> Option<u32> {
        match name.as_str() {
            "vertex1" => Some(self.0[0]),
            "vertex2" => Some(self.0[1]),
            _ => None,
        }
    }
}

/// Parsed vertex element plus which optional attributes were declared.
struct VertexBlock {
    verts: Vec<Vertex>,
    normals: bool,
    colors: bool,
    labels: bool,
}

fn read_ply(path: &Path) -> Result<(VertexBlock, Vec<Face>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let bad = |e: std::io::Error| Error::format(path, e.to_string());
    let vp = Parser::<Vertex>::new();
    let header = vp.read_header(&mut r).map_err(bad)?;
    let mut block = None;
    let mut faces = Vec::new();
    for (name, def) in &header.elements {
        match name.as_str() {
            "vertex" => {
                let has = |k: &str| def.properties.contains_key(k);
                if !(has("x") && has("y") && has("z")) {
                    return Err(Error::format(path, "vertex element lacks x, y or z"));
                }
                block = Some(VertexBlock {
                    verts: vp.read_payload_for_element(&mut r, def, &header).map_err(bad)?,
                    normals: has("nx") && has("ny") && has("nz"),
                    colors: has("red") && has("green") && has("blue"),
                    labels: has("label"),
                });
            }
            "face" => faces = Parser::<Face>::new().read_payload_for_element(&mut r, def, &header).map_err(bad)?,
            // other elements are read and dropped to keep the stream aligned
            _ => {
                Parser::<Edge>::new().read_payload_for_element(&mut r, def, &header).map_err(bad)?;
            }
        }
    }
    let block = block.ok_or_else(|| Error::format(path, "no vertex element"))?;
    Ok((block, faces))
}

fn cloud_from_block(b: &VertexBlock) -> PointCloud {
    let mut c = PointCloud::from_points(b.verts.iter().map(|v| Point3::from(v.p)).collect());
    if b.normals {
        c.normals = Some(b.verts.iter().map(|v| Vector3::from(v.n)).collect());
    }
    if b.colors {
        c.colors = Some(b.verts.iter().map(|v| v.c).collect());
    }
    if b.labels {
        c.labels = Some(b.verts.iter().map(|v| v.label).collect());
    }
    c
}

pub fn read_cloud_ply(path: &Path) -> Result<PointCloud> {
    let (block, _) = read_ply(path)?;
    let c = cloud_from_block(&block);
    c.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(c)
}

/// Faces with more than three corners are fanned into triangles.
pub fn read_mesh_ply(path: &Path) -> Result<TriangleMesh> {
    let (block, faces) = read_ply(path)?;
    let c = cloud_from_block(&block);
    let n = c.points.len();
    let mut tris = Vec::new();
    for f in &faces {
        if f.0.len() < 3 || f.0.iter().any(|&i| i as usize >= n) {
            return Err(Error::format(path, "face with fewer than 3 corners or a bad index"));
        }
        for k in 1..f.0.len() - 1 {
            tris.push([f.0[0] as usize, f.0[k] as usize, f.0[k + 1] as usize]);
        }
    }
    let mut m = TriangleMesh::new(c.points, tris);
    m.vertex_labels = c.labels;
    m.vertex_normals = c.normals;
    m.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(m)
}

fn scalar(name: &str, t: ScalarType) -> PropertyDef {
    PropertyDef::new(name.to_string(), PropertyType::Scalar(t))
}

fn vertex_def(count: usize, normals: bool, colors: bool, labels: bool) -> ElementDef {
    let mut e = ElementDef::new("vertex".to_string());
    e.count = count;
    for k in ["x", "y", "z"] {
        e.properties.add(scalar(k, ScalarType::Double));
    }
    if normals {
        for k in ["nx", "ny", "nz"] {
            e.properties.add(scalar(k, ScalarType::Double));
        }
    }
    if colors {
        for k in ["red", "green", "blue"] {
            e.properties.add(scalar(k, ScalarType::UChar));
        }
    }
    if labels {
        e.properties.add(scalar("label", ScalarType::UInt));
    }
    e
}

fn header(encoding: PlyEncoding, elements: Vec<ElementDef>) -> Header {
    let mut h = Header::new();
    h.encoding = match encoding {
        PlyEncoding::Ascii => Encoding::Ascii,
        PlyEncoding::BinaryLittleEndian => Encoding::BinaryLittleEndian,
    };
    for e in elements {
        h.elements.add(e);
    }
    h
}

fn vertices(
    points: &[Point3<f64>],
    normals: Option<&Vec<Vector3<f64>>>,
    colors: Option<&Vec<[u8; 3]>>,
    labels: Option<&Vec<u32>>,
) -> Vec<Vertex> {
    (0..points.len())
        .map(|i| Vertex {
            p: points[i].coords.into(),
            n: normals.map_or([0.0; 3], |n| n[i].into()),
            c: colors.map_or([0; 3], |c| c[i]),
            label: labels.map_or(0, |l| l[i]),
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    super::create_parent(path)?;
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_cloud_ply(path: &Path, cloud: &PointCloud, encoding: PlyEncoding) -> Result<()> {
    cloud.validate()?;
    let def = vertex_def(cloud.len(), cloud.normals.is_some(), cloud.colors.is_some(), cloud.labels.is_some());
    let h = header(encoding, vec![def]);
    let verts = vertices(&cloud.points, cloud.normals.as_ref(), cloud.colors.as_ref(), cloud.labels.as_ref());
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    let w = Writer::<Vertex>::new();
    w.write_header(&mut out, &h).map_err(io)?;
    w.write_payload_of_element(&mut out, &verts, &h.elements["vertex"], &h).map_err(io)?;
    out.flush().map_err(io)
}

pub fn write_mesh_ply(path: &Path, mesh: &TriangleMesh, encoding: PlyEncoding) -> Result<()> {
    mesh.validate()?;
    let mut face = ElementDef::new("face".to_string());
    face.count = mesh.faces.len();
    face.properties.add(PropertyDef::new(
        "vertex_indices".to_string(),
        PropertyType::List(ScalarType::UChar, ScalarType::UInt),
    ));
    let vdef = vertex_def(
        mesh.vertices.len(),
        mesh.vertex_normals.is_some(),
        false,
        mesh.vertex_labels.is_some(),
    );
    let h = header(encoding, vec![vdef, face]);
    let verts = vertices(&mesh.vertices, mesh.vertex_normals.as_ref(), None, mesh.vertex_labels.as_ref());
    let faces: Vec<Face> = mesh.faces.iter().map(|f| Face(f.iter().map(|&i| i as u32).collect())).collect();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    Writer::<Vertex>::new().write_header(&mut out, &h).map_err(io)?;
    Writer::<Vertex>::new()
        .write_payload_of_element(&mut out, &verts, &h.elements["vertex"], &h)
        .map_err(io)?;
    match encoding {
        PlyEncoding::Ascii => {
            Writer::<Face>::new()
                .write_payload_of_element(&mut out, &faces, &h.elements["face"], &h)
                .map_err(io)?;
        }
        // ply-rs 0.1 writes the element count as the binary list length
        PlyEncoding::BinaryLittleEndian => {
            for f in &faces {
                out.write_all(&[f.0.len() as u8]).map_err(io)?;
                for i in &f.0 {
                    out.write_all(&i.to_le_bytes()).map_err(io)?;
                }
            }
        }
    }
    out.flush().map_err(io)
}

/// Closed polyline as vertices plus an `edge` element.
pub fn write_loop_ply(path: &Path, l: &BoundaryLoop) -> Result<()> {
    let n = l.len();
    let mut edge = ElementDef::new("edge".to_string());
    edge.count = n;
    edge.properties.add(scalar("vertex1", ScalarType::UInt));
    edge.properties.add(scalar("vertex2", ScalarType::UInt));
    let h = header(PlyEncoding::Ascii, vec![vertex_def(n, false, false, false), edge]);
    let verts = vertices(&l.vertices, None, None, None);
    let edges: Vec<Edge> = (0..n).map(|i| Edge([i as u32, ((i + 1) % n) as u32])).collect();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    Writer::<Vertex>::new().write_header(&mut out, &h).map_err(io)?;
    Writer::<Vertex>::new()
        .write_payload_of_element(&mut out, &verts, &h.elements["vertex"], &h)
        .map_err(io)?;
    Writer::<Edge>::new()
        .write_payload_of_element(&mut out, &edges, &h.elements["edge"], &h)
        .map_err(io)?;
    out.flush().map_err(io)
}

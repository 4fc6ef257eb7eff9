use nalgebra::{Matrix3, Point3, Vector3};
use robust::Coord3D;

use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Vertex indices of the face opposite vertex `k`, ordered so the face normal
/// (right-hand rule) points away from the tetrahedron.
pub(crate) const FACES: [[usize; 3]; 4] = [[2, 1, 3], [0, 2, 3], [1, 0, 3], [0, 1, 2]];

#[derive(Debug, Clone, Copy)]
struct Tet {
    v: [u32; 4],
    /// `n[k]` shares the face opposite `v[k]`.
    n: [u32; 4],
    alive: bool,
}

/// 3D Delaunay tetrahedralization by incremental Bowyer-Watson insertion with
/// adaptive-precision orientation and insphere predicates.
#[derive(Debug, Clone)]
pub struct Delaunay3 {
    points: Vec<Point3<f64>>,
    /// Input index of each stored point (exact duplicates collapse).
    input_index: Vec<usize>,
    n_real: usize,
    tets: Vec<Tet>,
    free: Vec<u32>,
}

fn coord(p: &Point3<f64>) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

impl Delaunay3 {
    pub fn new(input: &[Point3<f64>]) -> Result<Self> {
        if input.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("non-finite point"));
        }
        let mut order: Vec<usize> = (0..input.len()).collect();
        order.sort_by(|&a, &b| {
            let (p, q) = (input[a], input[b]);
            p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)).then(p.z.total_cmp(&q.z))
        });
        order.dedup_by(|a, b| input[*a] == input[*b]);
        if order.len() < 4 {
            return Err(Error::invalid("Delaunay needs at least 4 distinct points"));
        }
        let (lo, hi) = order.iter().fold(
            (Vector3::repeat(f64::MAX), Vector3::repeat(f64::MIN)),
            |(lo, hi), &i| (lo.inf(&input[i].coords), hi.sup(&input[i].coords)),
        );
        if !non_coplanar(input, &order) {
            return Err(Error::invalid("points are coplanar"));
        }
        // spatially coherent insertion order keeps point location walks short
        let extent = (hi - lo).max().max(f64::MIN_POSITIVE);
        let key = |p: &Point3<f64>| {
            let q = (p.coords - lo) / extent * 1023.0;
            morton(q.x as u32, q.y as u32, q.z as u32)
        };
        order.sort_by_key(|&i| (key(&input[i]), i));

        let n_real = order.len();
        let mut points: Vec<Point3<f64>> = order.iter().map(|&i| input[i]).collect();
        let centre = (lo + hi) * 0.5;
        // far enough that bounding vertices do not cut off nearly flat hull
        // tetrahedra of the input
        let s = 1e5 * extent;
        for d in [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]] {
            points.push(Point3::from(centre + Vector3::from(d) * s));
        }
        let mut dt = Self {
            points,
            input_index: order,
            n_real,
            tets: Vec::with_capacity(n_real * 8),
            free: Vec::new(),
        };
        let sv = [n_real as u32, n_real as u32 + 1, n_real as u32 + 2, n_real as u32 + 3];
        let mut first = Tet {
            v: sv,
            n: [NONE; 4],
            alive: true,
        };
        if dt.orient(&first.v) < 0.0 {
            first.v.swap(0, 1);
        }
        dt.tets.push(first);
        let mut stamp = vec![0u32; 0];
        let mut hint = 0u32;
        for i in 0..n_real {
            hint = dt.insert(i as u32, hint, &mut stamp, i as u32 + 1);
        }
        Ok(dt)
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points[..self.n_real]
    }

    /// Input index of stored vertex `v`.
    pub fn input_index(&self, v: usize) -> usize {
        self.input_index[v]
    }

    fn orient(&self, v: &[u32; 4]) -> f64 {
        robust::orient3d(
            coord(&self.points[v[0] as usize]),
            coord(&self.points[v[1] as usize]),
            coord(&self.points[v[2] as usize]),
            coord(&self.points[v[3] as usize]),
        )
    }

    fn in_sphere(&self, t: &Tet, p: u32) -> bool {
        let c = |i: u32| coord(&self.points[i as usize]);
        robust::insphere(c(t.v[0]), c(t.v[1]), c(t.v[2]), c(t.v[3]), c(p)) > 0.0
    }

    fn locate(&self, p: u32, start: u32) -> u32 {
        let mut t = start;
        let mut rot = 0usize;
        'walk: loop {
            let tet = &self.tets[t as usize];
            for s in 0..4 {
                let k = (s + rot) % 4;
                let mut v = tet.v;
                v[k] = p;
                if self.orient(&v) < 0.0 && tet.n[k] != NONE {
                    t = tet.n[k];
                    rot += 1;
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn insert(&mut self, p: u32, hint: u32, stamp: &mut Vec<u32>, mark: u32) -> u32 {
        let start = self.locate(p, hint);
        stamp.resize(self.tets.len(), 0);
        let mut cavity = vec![start];
        stamp[start as usize] = mark;
        // (cavity tet, face k, outside neighbour, neighbour's slot back to it)
        let mut boundary: Vec<(u32, usize, u32, usize)>;
        let mut i = 0;
        loop {
            while i < cavity.len() {
                let t = cavity[i];
                i += 1;
                for k in 0..4 {
                    let n = self.tets[t as usize].n[k];
                    if n != NONE && stamp[n as usize] != mark && self.in_sphere(&self.tets[n as usize], p) {
                        stamp[n as usize] = mark;
                        cavity.push(n);
                    }
                }
            }
            boundary = Vec::new();
            let mut grow = None;
            'faces: for &t in &cavity {
                let tet = self.tets[t as usize];
                for k in 0..4 {
                    let n = tet.n[k];
                    if n != NONE && stamp[n as usize] == mark {
                        continue;
                    }
                    let mut v = tet.v;
                    v[k] = p;
                    if self.orient(&v) <= 0.0 && n != NONE {
                        // keep the cavity star-shaped around p
                        grow = Some(n);
                        break 'faces;
                    }
                    let back = if n == NONE {
                        0
                    } else {
                        self.tets[n as usize].n.iter().position(|&x| x == t).unwrap()
                    };
                    boundary.push((t, k, n, back));
                }
            }
            match grow {
                Some(n) => {
                    stamp[n as usize] = mark;
                    cavity.push(n);
                }
                None => break,
            }
        }

        // read the cavity before its slots are reused
        let fresh: Vec<[u32; 4]> = boundary
            .iter()
            .map(|&(t, k, _, _)| {
                let mut v = self.tets[t as usize].v;
                v[k] = p;
                v
            })
            .collect();
        let mut slots: Vec<u32> = cavity.clone();
        for &t in &cavity {
            self.tets[t as usize].alive = false;
        }
        while slots.len() < boundary.len() {
            if let Some(f) = self.free.pop() {
                slots.push(f);
                continue;
            }
            self.tets.push(Tet {
                v: [0; 4],
                n: [NONE; 4],
                alive: false,
            });
            slots.push(self.tets.len() as u32 - 1);
        }
        self.free.extend_from_slice(&slots[boundary.len()..]);
        let mut edges: Vec<([u32; 2], u32, usize)> = Vec::with_capacity(boundary.len() * 3);
        for ((&(_, k, n, back), &slot), &v) in boundary.iter().zip(&slots).zip(&fresh) {
            let mut nb = [NONE; 4];
            nb[k] = n;
            if n != NONE {
                self.tets[n as usize].n[back] = slot;
            }
            for m in (0..4).filter(|&m| m != k) {
                let mut e: Vec<u32> = (0..4).filter(|&x| x != m && x != k).map(|x| v[x]).collect();
                e.sort_unstable();
                edges.push(([e[0], e[1]], slot, m));
            }
            self.tets[slot as usize] = Tet { v, n: nb, alive: false };
        }
        // stale data in not-yet-rewritten slots must not leak: only new tets
        // are marked alive after all writes
        for &slot in &slots[..boundary.len()] {
            self.tets[slot as usize].alive = true;
        }
        edges.sort_unstable_by_key(|e| e.0);
        for pair in edges.chunks(2) {
            debug_assert!(pair.len() == 2 && pair[0].0 == pair[1].0);
            let (a, ka) = (pair[0].1, pair[0].2);
            let (b, kb) = (pair[1].1, pair[1].2);
            self.tets[a as usize].n[ka] = b;
            self.tets[b as usize].n[kb] = a;
        }
        slots[0]
    }

    /// Tetrahedra over input points only, positively oriented, as stored
    /// vertex indices.
    pub fn tetrahedra(&self) -> Vec<[usize; 4]> {
        self.tets
            .iter()
            .filter(|t| t.alive && t.v.iter().all(|&v| (v as usize) < self.n_real))
            .map(|t| t.v.map(|v| v as usize))
            .collect()
    }

    /// Every face of every finite tetrahedron with the vertex opposite it in
    /// each incident tetrahedron (`None` for a bounding vertex or hull side).
    pub(crate) fn faces(&self) -> Vec<([usize; 3], usize, Option<usize>)> {
        let mut out = Vec::new();
        for (ti, t) in self.tets.iter().enumerate() {
            if !t.alive {
                continue;
            }
            for k in 0..4 {
                let f = FACES[k].map(|x| t.v[x] as usize);
                if f.iter().any(|&v| v >= self.n_real) {
                    continue;
                }
                let opp = t.v[k] as usize;
                out.push((f, ti, (opp < self.n_real).then_some(opp)));
            }
        }
        out
    }

    pub(crate) fn tet_vertices(&self, t: usize) -> [usize; 4] {
        self.tets[t].v.map(|v| v as usize)
    }

    /// Faces of finite tetrahedra on the convex hull, oriented outward.
    pub fn hull_faces(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for t in self.finite_tets() {
            let tet = &self.tets[t];
            for k in 0..4 {
                let n = tet.n[k];
                if n == NONE || !self.is_finite(n as usize) {
                    out.push(FACES[k].map(|x| tet.v[x] as usize));
                }
            }
        }
        out
    }

    pub fn hull_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.hull_faces().into_iter().flatten().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub(crate) fn finite_tets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tets.len()).filter(|&t| self.tets[t].alive && self.is_finite(t))
    }

    pub(crate) fn is_finite(&self, t: usize) -> bool {
        self.tets[t].v.iter().all(|&v| (v as usize) < self.n_real)
    }

    pub fn circumradius(&self, tet: &[usize; 4]) -> f64 {
        let a = self.points[tet[0]];
        let rows = [1, 2, 3].map(|k| self.points[tet[k]] - a);
        let m = Matrix3::from_rows(&rows.map(|r| r.transpose()));
        let rhs = Vector3::from(rows.map(|r| 0.5 * r.norm_squared()));
        match m.lu().solve(&rhs) {
            Some(x) if x.iter().all(|c| c.is_finite()) => x.norm(),
            _ => f64::INFINITY,
        }
    }
}

fn non_coplanar(pts: &[Point3<f64>], idx: &[usize]) -> bool {
    let a = pts[idx[0]];
    let Some(&b) = idx[1..].iter().find(|&&i| pts[i] != a) else {
        return false;
    };
    let b = pts[b];
    let Some(c) = idx
        .iter()
        .map(|&i| pts[i])
        .find(|c| (b - a).cross(&(c - a)).norm_squared() != 0.0)
    else {
        return false;
    };
    idx.iter()
        .any(|&i| robust::orient3d(coord(&a), coord(&b), coord(&c), coord(&pts[i])) != 0.0)
}

fn morton(x: u32, y: u32, z: u32) -> u64 {
    fn spread(mut v: u64) -> u64 {
        v &= 0x3ff;
        v = (v | (v << 16)) & 0x030000ff;
        v = (v | (v << 8)) & 0x0300f00f;
        v = (v | (v << 4)) & 0x030c30c3;
        (v | (v << 2)) & 0x09249249
    }
    spread(x as u64) | (spread(y as u64) << 1) | (spread(z as u64) << 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * 10.0)
            .collect()
    }

    #[test]
    fn face_table_points_outward() {
        let dt = Delaunay3::new(&[
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ])
        .unwrap();
        let t = dt.tetrahedra();
        assert_eq!(t.len(), 1);
        let p = dt.points();
        for (k, f) in FACES.iter().enumerate() {
            let [a, b, c] = f.map(|x| p[t[0][x]]);
            let n = (b - a).cross(&(c - a));
            assert!(n.dot(&(p[t[0][k]] - a)) < 0.0);
        }
    }

    #[test]
    fn empty_circumsphere_property() {
        let pts = random_points(300, 7);
        let dt = Delaunay3::new(&pts).unwrap();
        let p = dt.points();
        let tets = dt.tetrahedra();
        for t in &tets {
            assert!(robust::orient3d(coord(&p[t[0]]), coord(&p[t[1]]), coord(&p[t[2]]), coord(&p[t[3]])) > 0.0);
            for (i, q) in p.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                let s = robust::insphere(coord(&p[t[0]]), coord(&p[t[1]]), coord(&p[t[2]]), coord(&p[t[3]]), coord(q));
                assert!(s <= 0.0);
            }
        }
    }

    #[test]
    fn volume_fills_convex_hull_of_a_cube() {
        // corners of a cube plus interior points: tetrahedra tile the cube
        let mut pts = random_points(200, 3);
        for c in 0..8 {
            pts.push(Point3::new(
                if c & 1 == 0 { 0.0 } else { 10.0 },
                if c & 2 == 0 { 0.0 } else { 10.0 },
                if c & 4 == 0 { 0.0 } else { 10.0 },
            ));
        }
        let dt = Delaunay3::new(&pts).unwrap();
        let p = dt.points();
        let vol: f64 = dt
            .tetrahedra()
            .iter()
            .map(|t| (p[t[1]] - p[t[0]]).cross(&(p[t[2]] - p[t[0]])).dot(&(p[t[3]] - p[t[0]])).abs() / 6.0)
            .sum();
        assert!((vol - 1000.0).abs() < 1e-6, "volume {vol}");
    }

    #[test]
    fn duplicates_and_coplanar_input() {
        let mut pts = random_points(20, 1);
        pts.extend(pts.clone());
        assert_eq!(Delaunay3::new(&pts).unwrap().points().len(), 20);
        let flat: Vec<_> = random_points(20, 2).iter().map(|p| Point3::new(p.x, p.y, 1.0)).collect();
        assert!(Delaunay3::new(&flat).is_err());
    }
}

//! Quickhull in 3D on exact orientation predicates.

use std::collections::{HashMap, HashSet};

use nalgebra::Vector3;
use robust::{orient2d, orient3d, Coord, Coord3D};

use super::GeomError;

#[derive(Clone, Debug, PartialEq)]
pub struct Hull {
    /// Indices of the extreme points, ascending. Points lying on a facet or
    /// an edge without being a corner are not included; coincident copies of
    /// a corner all are.
    pub vertices: Vec<usize>,
    /// Triangles, counter-clockwise seen from outside. Together they form a
    /// closed surface; every directed edge appears once with its reverse.
    pub facets: Vec<[usize; 3]>,
}

fn c3(p: &Vector3<f64>) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

/// Negative when `d` lies on the outer side of the counter-clockwise face `(a, b, c)`.
pub(super) fn orient(pts: &[Vector3<f64>], a: usize, b: usize, c: usize, d: usize) -> f64 {
    orient3d(c3(&pts[a]), c3(&pts[b]), c3(&pts[c]), c3(&pts[d]))
}

/// Exact test of whether three points lie on one line.
pub(super) fn collinear(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> bool {
    let proj = |p: &Vector3<f64>, i: usize, j: usize| Coord { x: p[i], y: p[j] };
    [(0, 1), (1, 2), (2, 0)]
        .iter()
        .all(|&(i, j)| orient2d(proj(a, i, j), proj(b, i, j), proj(c, i, j)) == 0.0)
}

struct Face {
    v: [usize; 3],
    alive: bool,
    outside: Vec<usize>,
}

/// Convex hull of `points`.
///
/// Fails with `TooFewPoints` under 4 points and `Degenerate` when the input
/// is coincident, collinear or coplanar.
pub fn convex_hull_3d(points: &[Vector3<f64>]) -> Result<Hull, GeomError> {
    if points.len() < 4 {
        return Err(GeomError::TooFewPoints(points.len()));
    }
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(GeomError::Degenerate("non-finite coordinate"));
    }
    let [a, b, c, d] = initial_simplex(points)?;
    if orient(points, a, b, c, d) < 0.0 {
        build(points, [a, c, b, d])
    } else {
        build(points, [a, b, c, d])
    }
}

/// `d` must lie strictly on the inner side of `(a, b, c)`.
fn build(points: &[Vector3<f64>], [a, b, c, d]: [usize; 4]) -> Result<Hull, GeomError> {
    debug_assert!(orient(points, a, b, c, d) > 0.0);
    let mut faces: Vec<Face> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pending: Vec<usize> = Vec::new();

    let add_face = |faces: &mut Vec<Face>, edges: &mut HashMap<(usize, usize), usize>, v: [usize; 3]| {
        let id = faces.len();
        for k in 0..3 {
            edges.insert((v[k], v[(k + 1) % 3]), id);
        }
        faces.push(Face {
            v,
            alive: true,
            outside: Vec::new(),
        });
        id
    };

    let initial = [[a, b, c], [a, d, b], [b, d, c], [c, d, a]];
    let ids: Vec<usize> = initial.iter().map(|&v| add_face(&mut faces, &mut edges, v)).collect();
    for p in 0..points.len() {
        if p == a || p == b || p == c || p == d {
            continue;
        }
        if let Some(&f) = ids.iter().find(|&&f| is_outside(points, &faces[f].v, p)) {
            faces[f].outside.push(p);
        }
    }
    pending.extend(ids.iter().copied().filter(|&f| !faces[f].outside.is_empty()));

    while let Some(f) = pending.pop() {
        if !faces[f].alive || faces[f].outside.is_empty() {
            continue;
        }
        let fv = faces[f].v;
        let apex = *faces[f]
            .outside
            .iter()
            .max_by(|&&p, &&q| {
                let dp = -orient(points, fv[0], fv[1], fv[2], p);
                let dq = -orient(points, fv[0], fv[1], fv[2], q);
                dp.total_cmp(&dq).then(q.cmp(&p))
            })
            .expect("nonempty");

        // Faces strictly visible from the apex form a connected patch.
        let mut visible = vec![f];
        faces[f].alive = false;
        let mut cursor = 0;
        while cursor < visible.len() {
            let v = faces[visible[cursor]].v;
            cursor += 1;
            for k in 0..3 {
                let n = edges[&(v[(k + 1) % 3], v[k])];
                if faces[n].alive && is_outside(points, &faces[n].v, apex) {
                    faces[n].alive = false;
                    visible.push(n);
                }
            }
        }

        let mut horizon = Vec::new();
        let mut orphans = Vec::new();
        for &vf in &visible {
            let v = faces[vf].v;
            for k in 0..3 {
                let (u, w) = (v[k], v[(k + 1) % 3]);
                if faces[edges[&(w, u)]].alive {
                    horizon.push((u, w));
                }
            }
            orphans.append(&mut faces[vf].outside);
        }
        for &vf in &visible {
            let v = faces[vf].v;
            for k in 0..3 {
                let key = (v[k], v[(k + 1) % 3]);
                if edges.get(&key) == Some(&vf) {
                    edges.remove(&key);
                }
            }
        }
        let new_ids: Vec<usize> = horizon
            .iter()
            .map(|&(u, w)| add_face(&mut faces, &mut edges, [u, w, apex]))
            .collect();
        for p in orphans {
            if p == apex {
                continue;
            }
            if let Some(&nf) = new_ids.iter().find(|&&nf| is_outside(points, &faces[nf].v, p)) {
                faces[nf].outside.push(p);
            }
        }
        pending.extend(new_ids.into_iter().filter(|&nf| !faces[nf].outside.is_empty()));
    }

    let facets: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, f) in facets.iter().enumerate() {
        for &v in f {
            incident.entry(v).or_default().push(i);
        }
    }
    let corners: HashSet<[u64; 3]> = incident
        .iter()
        .filter(|(_, fs)| distinct_planes(points, &facets, fs) >= 3)
        .map(|(&v, _)| bits(&points[v]))
        .collect();
    let vertices = (0..points.len()).filter(|&i| corners.contains(&bits(&points[i]))).collect();
    Ok(Hull { vertices, facets })
}

fn bits(p: &Vector3<f64>) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

fn is_outside(points: &[Vector3<f64>], v: &[usize; 3], p: usize) -> bool {
    orient(points, v[0], v[1], v[2], p) < 0.0
}

/// Number of distinct supporting planes among the given facets, stopping at 3.
fn distinct_planes(points: &[Vector3<f64>], facets: &[[usize; 3]], ids: &[usize]) -> usize {
    let mut reps: Vec<[usize; 3]> = Vec::new();
    for &i in ids {
        let f = facets[i];
        let same = |r: &[usize; 3]| f.iter().all(|&p| orient(points, r[0], r[1], r[2], p) == 0.0);
        if !reps.iter().any(same) {
            reps.push(f);
            if reps.len() == 3 {
                break;
            }
        }
    }
    reps.len()
}

fn initial_simplex(points: &[Vector3<f64>]) -> Result<[usize; 4], GeomError> {
    let lex = |i: &usize, j: &usize| {
        let (p, q) = (&points[*i], &points[*j]);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)).then(p.z.total_cmp(&q.z))
    };
    let idx: Vec<usize> = (0..points.len()).collect();
    let a = (0..points.len()).min_by(lex).unwrap();
    let b = (0..points.len()).max_by(lex).unwrap();
    if points[a] == points[b] {
        return Err(GeomError::Degenerate("all points coincide"));
    }
    let dir = points[b] - points[a];
    let line_dist = |p: usize| (points[p] - points[a]).cross(&dir).norm_squared();
    let mut c = *idx.iter().max_by(|&&p, &&q| line_dist(p).total_cmp(&line_dist(q))).unwrap();
    if collinear(&points[a], &points[b], &points[c]) {
        c = idx
            .iter()
            .copied()
            .find(|&p| !collinear(&points[a], &points[b], &points[p]))
            .ok_or(GeomError::Degenerate("all points are collinear"))?;
    }
    let d = *idx
        .iter()
        .max_by(|&&p, &&q| orient(points, a, b, c, p).abs().total_cmp(&orient(points, a, b, c, q).abs()))
        .unwrap();
    if orient(points, a, b, c, d) == 0.0 {
        return Err(GeomError::Degenerate("all points are coplanar"));
    }
    Ok([a, b, c, d])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    fn check_closed(points: &[Vector3<f64>], h: &Hull) {
        let mut edges = std::collections::HashSet::new();
        for f in &h.facets {
            for k in 0..3 {
                assert!(edges.insert((f[k], f[(k + 1) % 3])), "edge repeated");
            }
        }
        for &(u, w) in &edges {
            assert!(edges.contains(&(w, u)), "open edge");
        }
        for f in &h.facets {
            for p in 0..points.len() {
                assert!(orient(points, f[0], f[1], f[2], p) >= 0.0, "point {p} outside facet {f:?}");
            }
        }
    }

    #[test]
    fn tetrahedron() {
        for pts in [
            vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), v(0., 0., 1.)],
            vec![v(0., 0., 0.), v(0., 1., 0.), v(1., 0., 0.), v(0., 0., 1.)],
        ] {
            let h = convex_hull_3d(&pts).unwrap();
            assert_eq!(h.vertices, vec![0, 1, 2, 3]);
            assert_eq!(h.facets.len(), 4);
            check_closed(&pts, &h);
        }
    }

    #[test]
    fn cube_with_centre_and_face_points() {
        let mut pts: Vec<_> = (0..8).map(|i| v((i & 1) as f64, (i >> 1 & 1) as f64, (i >> 2 & 1) as f64)).collect();
        pts.push(v(0.5, 0.5, 0.5));
        pts.push(v(0.5, 0.5, 1.0));
        pts.push(v(0.5, 0.0, 0.0));
        let h = convex_hull_3d(&pts).unwrap();
        assert_eq!(h.vertices, (0..8).collect::<Vec<_>>());
        check_closed(&pts, &h);
    }

    #[test]
    fn degenerate_inputs() {
        let code = |pts: &[Vector3<f64>]| convex_hull_3d(pts).unwrap_err().code();
        assert_eq!(code(&[v(0., 0., 0.); 3]), "TOO_FEW_POINTS");
        assert_eq!(code(&[v(1., 1., 1.); 5]), "DEGENERATE");
        assert_eq!(code(&(0..6).map(|i| v(i as f64, 2.0 * i as f64, 0.5)).collect::<Vec<_>>()), "DEGENERATE");
        assert_eq!(code(&[v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), v(3., 7., 0.)]), "DEGENERATE");
    }

    #[test]
    fn random_ball_is_closed() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..2000)
            .map(|_| loop {
                let p = v(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if p.norm() <= 1.0 {
                    break p;
                }
            })
            .collect();
        let h = convex_hull_3d(&pts).unwrap();
        check_closed(&pts, &h);
        assert!(h.vertices.len() > 50);
    }
}

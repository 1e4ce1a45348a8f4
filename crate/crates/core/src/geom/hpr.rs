//! Hidden point removal by spherical flipping and convex hull membership.

use std::collections::HashSet;

use nalgebra::Vector3;
use robust::{orient2d, Coord};
use serde::Serialize;

use crate::model::PointCloud;

use super::hull::{collinear, convex_hull_3d};
use super::GeomError;

/// Multiple of the largest viewpoint distance used by [`Radius::Auto`].
pub const AUTO_RADIUS_FACTOR: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Radius {
    /// `AUTO_RADIUS_FACTOR` × the largest viewpoint distance.
    Auto,
    /// The given multiple of the largest viewpoint distance.
    Scaled(f64),
    /// An absolute radius in metres.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HprResult {
    /// Input indices of the visible points, ascending.
    pub visible: Vec<usize>,
    /// Flipping radius actually used, metres.
    pub radius: f64,
    /// Set when the flipped set spans fewer than three dimensions and the
    /// extreme points were taken on the lower-dimensional hull instead.
    pub degenerate: bool,
}

/// Reflects `p` through the sphere of radius `radius` about `viewpoint`:
/// `p̂ = p + 2(R − ‖p − c‖)·(p − c)/‖p − c‖`.
pub fn spherical_flip(p: &Vector3<f64>, viewpoint: &Vector3<f64>, radius: f64) -> Vector3<f64> {
    let d = p - viewpoint;
    let n = d.norm();
    p + d * (2.0 * (radius - n) / n)
}

pub fn hidden_point_removal(cloud: &PointCloud, viewpoint: &Vector3<f64>, radius: Radius) -> Result<HprResult, GeomError> {
    let points: Vec<Vector3<f64>> = cloud.positions().collect();
    hidden_point_removal_points(&points, viewpoint, radius)
}

/// A point is visible when its flipped image is an extreme point of the
/// convex hull of all flipped points together with the viewpoint.
/// Coincident input points share visibility.
pub fn hidden_point_removal_points(
    points: &[Vector3<f64>],
    viewpoint: &Vector3<f64>,
    radius: Radius,
) -> Result<HprResult, GeomError> {
    if let Some(i) = points.iter().position(|p| p == viewpoint) {
        return Err(GeomError::PointAtViewpoint(i));
    }
    let max_distance = points.iter().map(|p| (p - viewpoint).norm()).fold(0.0, f64::max);
    let r = match radius {
        Radius::Auto => AUTO_RADIUS_FACTOR * max_distance,
        Radius::Scaled(f) => f * max_distance,
        Radius::Fixed(r) => r,
    };
    if points.is_empty() {
        return Ok(HprResult {
            visible: Vec::new(),
            radius: r,
            degenerate: false,
        });
    }
    if !(r.is_finite() && r > max_distance) {
        return Err(GeomError::InvalidRadius { radius: r, max_distance });
    }

    let mut flipped: Vec<Vector3<f64>> = points.iter().map(|p| spherical_flip(p, viewpoint, r)).collect();
    flipped.push(*viewpoint);
    let (extreme, degenerate) = extreme_points(&flipped)?;

    let n = points.len();
    let key = |p: &Vector3<f64>| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
    let on_hull: HashSet<[u64; 3]> = extreme.iter().filter(|&&i| i < n).map(|&i| key(&flipped[i])).collect();
    let visible = (0..n).filter(|&i| on_hull.contains(&key(&flipped[i]))).collect();
    Ok(HprResult {
        visible,
        radius: r,
        degenerate,
    })
}

/// Extreme points of the set in whatever dimension it spans, and whether
/// that was fewer than three.
fn extreme_points(pts: &[Vector3<f64>]) -> Result<(Vec<usize>, bool), GeomError> {
    if pts.len() >= 4 {
        match convex_hull_3d(pts) {
            Ok(h) => return Ok((h.vertices, false)),
            Err(GeomError::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let lex = |i: &usize, j: &usize| {
        let (p, q) = (&pts[*i], &pts[*j]);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)).then(p.z.total_cmp(&q.z))
    };
    let idx: Vec<usize> = (0..pts.len()).collect();
    let a = (0..pts.len()).min_by(lex).expect("nonempty");
    let b = (0..pts.len()).max_by(lex).expect("nonempty");
    let Some(c) = idx.iter().copied().find(|&p| !collinear(&pts[a], &pts[b], &pts[p])) else {
        return Ok((vec![a, b], true));
    };

    // Coplanar: drop the axis the plane normal leans on most. The projection
    // is an affine bijection of the plane, so extreme points carry over.
    let normal = (pts[b] - pts[a]).cross(&(pts[c] - pts[a]));
    let drop = normal.iamax();
    let (i, j) = ((drop + 1) % 3, (drop + 2) % 3);
    let mut order = idx;
    order.sort_by(|&p, &q| pts[p][i].total_cmp(&pts[q][i]).then(pts[p][j].total_cmp(&pts[q][j])));
    order.dedup_by(|p, q| pts[*p][i] == pts[*q][i] && pts[*p][j] == pts[*q][j]);
    let at = |p: usize| Coord { x: pts[p][i], y: pts[p][j] };
    let mut chain: Vec<usize> = Vec::with_capacity(order.len() + 1);
    for pass in [order.clone(), order.into_iter().rev().collect()] {
        let floor = chain.len();
        for p in pass {
            while chain.len() >= floor + 2 && orient2d(at(chain[chain.len() - 2]), at(chain[chain.len() - 1]), at(p)) <= 0.0 {
                chain.pop();
            }
            chain.push(p);
        }
        chain.pop();
    }
    Ok((chain, true))
}

//! Planar geometry shared by the native tools: points, polygons,
//! point-in-polygon and Douglas-Peucker simplification.

use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Point<T: Scalar> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point::new(
            U::from_f64_lossy(self.x.to_f64_lossy()),
            U::from_f64_lossy(self.y.to_f64_lossy()),
        )
    }
}

impl<T: Scalar> From<[T; 2]> for Point<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Self { x, y }
    }
}

impl<T: Scalar> From<Point<T>> for [T; 2] {
    fn from(p: Point<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Scalar> From<(T, T)> for Point<T> {
    fn from((x, y): (T, T)) -> Self {
        Self { x, y }
    }
}

/// Distance from `p` to the closed segment `a`-`b`. Degenerate segments
/// fall back to point distance.
pub fn segment_distance<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>) -> T {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len_sq = dx * dx + dy * dy;
    if len_sq == T::zero() {
        return p.distance(&a);
    }
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq;
    if t <= T::zero() {
        p.distance(&a)
    } else if t >= T::one() {
        p.distance(&b)
    } else {
        let proj = Point::new(a.x + t * dx, a.y + t * dy);
        p.distance(&proj)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive vertices {0} and {1} are identical")]
    RepeatedVertex(usize, usize),
}

/// Closed ring of at least three vertices; the last vertex implicitly
/// connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polygon<T: Scalar> {
    ring: Vec<Point<T>>,
}

impl<T: Scalar> Polygon<T> {
    pub fn new(ring: Vec<Point<T>>) -> Result<Self, PolygonError> {
        let n = ring.len();
        if n < 3 {
            return Err(PolygonError::TooFewVertices(n));
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if ring[i] == ring[j] {
                return Err(PolygonError::RepeatedVertex(i, j));
            }
        }
        Ok(Self { ring })
    }

    /// Axis-aligned rectangle with corners `(x0, y0)` and `(x1, y1)`.
    pub fn rect(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self {
            ring: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        }
    }

    pub fn ring(&self) -> &[Point<T>] {
        &self.ring
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    /// Shoelace area over the raw coordinates (positive when the ring turns
    /// counter-clockwise with the y axis pointing up).
    pub fn signed_area(&self) -> T {
        signed_area(&self.ring)
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        point_in_polygon(p, &self.ring)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Polygon<T> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw<T: Scalar> {
            ring: Vec<Point<T>>,
        }
        let raw = Raw::<T>::deserialize(de)?;
        Polygon::new(raw.ring).map_err(serde::de::Error::custom)
    }
}

pub fn signed_area<T: Scalar>(ring: &[Point<T>]) -> T {
    let n = ring.len();
    if n < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc = acc + (a.x * b.y - b.x * a.y);
    }
    acc / (T::one() + T::one())
}

/// Even-odd ray casting test. Points exactly on an edge may fall either way.
pub fn point_in_polygon<T: Scalar>(p: Point<T>, ring: &[Point<T>]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = ring[i];
        let b = ring[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimplifyError {
    #[error("polyline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("epsilon must be a non-negative number")]
    BadEpsilon,
}

/// Douglas-Peucker simplification.
///
/// Open polylines keep both endpoints. Closed rings (given without a repeated
/// closing vertex) are first split at their two mutually farthest vertices.
/// The result is always an order-preserving subsequence of `points`.
pub fn dp_simplify<T: Scalar>(
    points: &[Point<T>],
    epsilon: T,
    closed: bool,
) -> Result<Vec<Point<T>>, SimplifyError> {
    let keep = dp_keep_indices(points, epsilon, closed)?;
    Ok(keep.into_iter().map(|i| points[i]).collect())
}

/// Indices kept by [`dp_simplify`], ascending.
pub fn dp_keep_indices<T: Scalar>(
    points: &[Point<T>],
    epsilon: T,
    closed: bool,
) -> Result<Vec<usize>, SimplifyError> {
    let n = points.len();
    if n < 2 {
        return Err(SimplifyError::TooFewPoints(n));
    }
    if epsilon.is_nan() || epsilon < T::zero() {
        return Err(SimplifyError::BadEpsilon);
    }
    let mut keep = vec![false; n];
    if !closed || n == 2 {
        keep[0] = true;
        keep[n - 1] = true;
        mark_chain(points, &(0..n).collect::<Vec<_>>(), epsilon, &mut keep);
    } else {
        let (a, b) = farthest_pair(points);
        keep[a] = true;
        keep[b] = true;
        let forward: Vec<usize> = (a..=b).collect();
        let backward: Vec<usize> = (b..n).chain(0..=a).collect();
        mark_chain(points, &forward, epsilon, &mut keep);
        mark_chain(points, &backward, epsilon, &mut keep);
    }
    Ok(keep
        .iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect())
}

/// First pair `(i, j)`, `i < j`, in lexicographic order with maximal distance.
fn farthest_pair<T: Scalar>(points: &[Point<T>]) -> (usize, usize) {
    let mut best = (0, 1);
    let mut best_d = T::neg_infinity();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i].distance(&points[j]);
            if d > best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    best
}

// Iterative split over a chain of indices into `points`; the chain endpoints
// are already kept.
fn mark_chain<T: Scalar>(points: &[Point<T>], chain: &[usize], epsilon: T, keep: &mut [bool]) {
    let mut stack = vec![(0usize, chain.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let a = points[chain[lo]];
        let b = points[chain[hi]];
        let mut split = lo;
        let mut max_d = T::neg_infinity();
        for k in (lo + 1)..hi {
            let d = segment_distance(points[chain[k]], a, b);
            if d > max_d {
                max_d = d;
                split = k;
            }
        }
        if max_d > epsilon {
            keep[chain[split]] = true;
            stack.push((split, hi));
            stack.push((lo, split));
        }
    }
}

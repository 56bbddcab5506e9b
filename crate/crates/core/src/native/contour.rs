//! Moore-neighbor boundary tracing and mask polygonization.

use std::collections::VecDeque;

use crate::geometry::{dp_simplify, Point, Polygon};
use crate::model::Raster;
use crate::Scalar;

use super::NativeError;

/// Pixel centers along one outer boundary, without a repeated closing point.
pub type PixelRing = Vec<(u32, u32)>;

// Clockwise as displayed (y axis down), starting east.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const WEST: usize = 4;

struct Binary<'a> {
    mask: &'a Raster,
    class_id: u8,
}

impl Binary<'_> {
    fn get(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < self.mask.width() as i64
            && y < self.mask.height() as i64
            && self.mask.get(x as u32, y as u32) == self.class_id
    }
}

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("consecutive Moore neighbors are adjacent")
}

/// One radial sweep: from `c`, scan clockwise starting just after the
/// backtrack direction. Returns the next boundary pixel and its backtrack.
fn sweep(bin: &Binary<'_>, c: (i64, i64), back: usize) -> Option<((i64, i64), usize)> {
    for i in 1..=8 {
        let d = (back + i) % 8;
        let n = (c.0 + DIRS[d].0, c.1 + DIRS[d].1);
        if bin.get(n.0, n.1) {
            let pd = (back + i - 1) % 8;
            let p = (c.0 + DIRS[pd].0, c.1 + DIRS[pd].1);
            return Some((n, dir_index(p.0 - n.0, p.1 - n.1)));
        }
    }
    None
}

fn trace_from(bin: &Binary<'_>, start: (i64, i64), cap: usize) -> PixelRing {
    let mut ring = vec![start];
    let Some((second, mut back)) = sweep(bin, start, WEST) else {
        return to_ring(ring);
    };
    let mut c = second;
    while ring.len() < cap {
        let (n, nb) = sweep(bin, c, back).expect("pixel on a traced path has a neighbor");
        if c == start && n == second {
            break;
        }
        ring.push(c);
        c = n;
        back = nb;
    }
    // sweep runs clockwise on screen; report counter-clockwise
    ring[1..].reverse();
    to_ring(ring)
}

fn to_ring(v: Vec<(i64, i64)>) -> PixelRing {
    v.into_iter().map(|(x, y)| (x as u32, y as u32)).collect()
}

/// Outer boundary of every 8-connected component of `{pixel == class_id}`.
///
/// Each ring starts at the component's first pixel in raster order and runs
/// counter-clockwise as displayed. Components are reported in raster order of
/// their start pixels. An absent class gives an empty list.
pub fn trace_boundaries(mask: &Raster, class_id: u8) -> Result<Vec<PixelRing>, NativeError> {
    if !mask.is_gray() {
        return Err(NativeError::NotGrayscale(mask.channels()));
    }
    let bin = Binary { mask, class_id };
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let cap = 4 * (w * h) as usize + 8;
    let mut seen = vec![false; (w * h) as usize];
    let mut rings = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if seen[i] || !bin.get(x, y) {
                continue;
            }
            // flood the component so later scan hits skip it
            seen[i] = true;
            let mut queue = VecDeque::from([(x, y)]);
            while let Some((cx, cy)) = queue.pop_front() {
                for (dx, dy) in DIRS {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if bin.get(nx, ny) && !seen[(ny * w + nx) as usize] {
                        seen[(ny * w + nx) as usize] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            rings.push(trace_from(&bin, (x, y), cap));
        }
    }
    Ok(rings)
}

/// Traces every component of `class_id` and simplifies each ring with
/// closed Douglas-Peucker. Rings left with fewer than three distinct
/// vertices are dropped.
pub fn polygonize<T: Scalar>(
    mask: &Raster,
    class_id: u8,
    epsilon: T,
) -> Result<Vec<Polygon<T>>, NativeError> {
    let mut out = Vec::new();
    for ring in trace_boundaries(mask, class_id)? {
        if ring.len() < 3 {
            continue;
        }
        let pts: Vec<Point<T>> = ring
            .iter()
            .map(|&(x, y)| Point::new(T::from_f64_lossy(x as f64), T::from_f64_lossy(y as f64)))
            .collect();
        let simplified = dp_simplify(&pts, epsilon, true)
            .map_err(|e| NativeError::InvalidParameter(e.to_string()))?;
        if let Ok(poly) = Polygon::new(simplified) {
            out.push(poly);
        }
    }
    Ok(out)
}

//! Straightforward reference implementations used to check the engine.
//! Shared with the gateway acceptance suite through `#[path]`.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::rngs::StdRng;
use rand::Rng;

// ---------------------------------------------------------------- Douglas-Peucker

fn dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

/// Distance from `p` to segment `a`-`b`, via clamped projection.
pub fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0);
    dist(p, (a.0 + t * vx, a.1 + t * vy))
}

/// Textbook recursive Douglas-Peucker over `idx` (indices into `pts`).
/// The farthest point is the first one reaching the maximum.
fn dp_rec(pts: &[(f64, f64)], idx: &[usize], eps: f64) -> Vec<usize> {
    let (first, last) = (idx[0], idx[idx.len() - 1]);
    if idx.len() <= 2 {
        return idx.to_vec();
    }
    let mut best = 0;
    let mut dmax = -1.0;
    for (k, &i) in idx.iter().enumerate().take(idx.len() - 1).skip(1) {
        let d = seg_dist(pts[i], pts[first], pts[last]);
        if d > dmax {
            dmax = d;
            best = k;
        }
    }
    if dmax > eps {
        let mut left = dp_rec(pts, &idx[..=best], eps);
        let right = dp_rec(pts, &idx[best..], eps);
        left.pop();
        left.extend(right);
        left
    } else {
        vec![first, last]
    }
}

/// Indices kept for an open polyline.
pub fn naive_dp(pts: &[(f64, f64)], eps: f64) -> Vec<usize> {
    let idx: Vec<usize> = (0..pts.len()).collect();
    dp_rec(pts, &idx, eps)
}

/// Indices kept for a closed ring: split at the first farthest pair and
/// simplify both arcs.
pub fn naive_dp_closed(pts: &[(f64, f64)], eps: f64) -> Vec<usize> {
    let n = pts.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let (mut a, mut b, mut best) = (0, 1, -1.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(pts[i], pts[j]);
            if d > best {
                best = d;
                a = i;
                b = j;
            }
        }
    }
    let fwd: Vec<usize> = (a..=b).collect();
    let back: Vec<usize> = (b..n).chain(0..=a).collect();
    let mut all = dp_rec(pts, &fwd, eps);
    all.extend(dp_rec(pts, &back, eps));
    all.sort_unstable();
    all.dedup();
    all
}

/// Random walk with 2..=max_len points and a random epsilon.
pub fn random_polyline(rng: &mut StdRng, max_len: usize) -> (Vec<(f64, f64)>, f64) {
    let n = rng.random_range(2..=max_len);
    let mut p = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(p);
        p.0 += rng.random_range(-5.0..5.0);
        p.1 += rng.random_range(-5.0..5.0);
    }
    // occasional exact repeats exercise degenerate segments
    if n > 3 && rng.random_bool(0.2) {
        let k = rng.random_range(1..n);
        out[k] = out[k - 1];
    }
    (out, rng.random_range(0.05..6.0))
}

// ---------------------------------------------------------------- Canny

/// Reference Canny in plain `f64`: Gaussian smoothing (radius ceil(3 sigma),
/// reflected border), Sobel, NMS along the quantized gradient, relative
/// thresholds, 8-connected hysteresis. Returns `true` for edge pixels.
pub struct RefCanny {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub suppressed: Vec<f64>,
    pub strong: Vec<bool>,
    pub weak: Vec<bool>,
    pub edges: Vec<bool>,
}

fn reflect(mut i: i64, n: i64) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r).map(|j| (-((j * j) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (-r..=r)
                .map(|j| k[(j + r) as usize] * src[y * w + reflect(x as i64 + j, w as i64)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (-r..=r)
                .map(|j| k[(j + r) as usize] * tmp[reflect(y as i64 + j, h as i64) * w + x])
                .sum();
        }
    }
    out
}

/// Neighbor offsets along the gradient, found by comparing slopes against
/// tan(22.5°) instead of computing an angle.
fn gradient_neighbors(gx: f64, gy: f64) -> ((i64, i64), (i64, i64)) {
    let (mut ax, mut ay) = (gx, gy);
    if ay < 0.0 {
        ax = -ax;
        ay = -ay;
    }
    let t1 = (22.5f64).to_radians().tan();
    let t2 = (67.5f64).to_radians().tan();
    const H: ((i64, i64), (i64, i64)) = ((-1, 0), (1, 0));
    const V: ((i64, i64), (i64, i64)) = ((0, -1), (0, 1));
    if ax >= 0.0 {
        if ay < t1 * ax {
            H
        } else if ay < t2 * ax {
            ((-1, -1), (1, 1))
        } else {
            V
        }
    } else {
        let bx = -ax;
        if ay <= t1 * bx {
            H
        } else if ay <= t2 * bx {
            ((1, -1), (-1, 1))
        } else {
            V
        }
    }
}

pub fn ref_canny(gray: &[u8], w: usize, h: usize, sigma: f64, low: f64, high: f64) -> RefCanny {
    let src: Vec<f64> = gray.iter().map(|&v| v as f64).collect();
    let s = blur(&src, w, h, sigma);
    let at = |x: i64, y: i64| s[reflect(y, h as i64) * w + reflect(x, w as i64)];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            mag[i] = gx[i].hypot(gy[i]);
        }
    }
    let m = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut sup = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            let v = mag[i];
            if v <= 0.0 {
                continue;
            }
            let ((px, py), (nx, ny)) = gradient_neighbors(gx[i], gy[i]);
            if v > m(x + px, y + py) && v >= m(x + nx, y + ny) {
                sup[i] = v;
            }
        }
    }
    let max = mag.iter().cloned().fold(0.0, f64::max);
    let strong: Vec<bool> = sup.iter().map(|&v| max > 0.0 && v > 0.0 && v >= high * max).collect();
    let weak: Vec<bool> = sup
        .iter()
        .zip(&strong)
        .map(|(&v, &st)| max > 0.0 && !st && v > 0.0 && v >= low * max)
        .collect();
    let edges = connect(&strong, &weak, w, h);
    RefCanny {
        width: w,
        height: h,
        magnitude: mag,
        suppressed: sup,
        strong,
        weak,
        edges,
    }
}

/// Strong pixels plus weak pixels reachable from them through weak pixels.
pub fn connect(strong: &[bool], weak: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut out = strong.to_vec();
    let mut q: VecDeque<usize> = (0..strong.len()).filter(|&i| strong[i]).collect();
    while let Some(i) = q.pop_front() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for ny in y - 1..=y + 1 {
            for nx in x - 1..=x + 1 {
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if weak[j] && !out[j] {
                    out[j] = true;
                    q.push_back(j);
                }
            }
        }
    }
    out
}

/// True when every `weak` pixel set in `edges` reaches a `strong` pixel
/// through 8-connected edge pixels.
pub fn weak_survivors_connected(edges: &[bool], strong: &[bool], w: usize, h: usize) -> bool {
    let reach = connect(strong, edges, w, h);
    edges.iter().zip(&reach).all(|(&e, &r)| !e || r)
}

/// Vertical step: columns `< split` are `lo`, the rest `hi`.
pub fn step_image(w: usize, h: usize, split: usize, lo: u8, hi: u8) -> Vec<u8> {
    (0..w * h).map(|i| if i % w < split { lo } else { hi }).collect()
}

// ---------------------------------------------------------------- geometry

/// Even-odd crossing test, counting boundary points as inside.
pub fn brute_point_in_polygon(p: (f64, f64), ring: &[(f64, f64)]) -> bool {
    let n = ring.len();
    for i in 0..n {
        if seg_dist(p, ring[i], ring[(i + 1) % n]) < 1e-9 {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

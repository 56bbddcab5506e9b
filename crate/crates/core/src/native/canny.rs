use std::collections::VecDeque;

use crate::model::Raster;
use crate::Scalar;

use super::filter::{blur_fixed, sobel_fixed, Gradients};
use super::NativeError;

pub const EDGE: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams<T: Scalar> {
    /// Gaussian standard deviation in pixels.
    pub sigma: T,
    /// Hysteresis thresholds as fractions of the maximum gradient magnitude.
    pub low_ratio: T,
    pub high_ratio: T,
}

impl<T: Scalar> Default for CannyParams<T> {
    fn default() -> Self {
        Self {
            sigma: T::from_f64_lossy(1.4),
            low_ratio: T::from_f64_lossy(0.10),
            high_ratio: T::from_f64_lossy(0.20),
        }
    }
}

impl<T: Scalar> CannyParams<T> {
    pub fn validate(&self) -> Result<(), NativeError> {
        let ok = self.sigma > T::zero()
            && self.low_ratio > T::zero()
            && self.low_ratio < self.high_ratio
            && self.high_ratio <= T::one();
        if ok {
            Ok(())
        } else {
            Err(NativeError::InvalidParameter(format!(
                "need sigma > 0 and 0 < low_ratio < high_ratio <= 1, got {self:?}"
            )))
        }
    }
}

/// Edge pixels that survive non-maximum suppression, split by threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    None,
    Weak,
    Strong,
}

/// Thin ridge of local maxima. A pixel survives when its magnitude is
/// strictly above the neighbor behind it along the gradient and at least the
/// neighbor ahead of it, so a two-pixel plateau yields a single edge pixel.
pub fn non_maximum_suppression<T: Scalar>(g: &Gradients<T>) -> Vec<T> {
    let (w, h) = (g.width as i64, g.height as i64);
    let mag = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w || y >= h {
            T::zero()
        } else {
            g.magnitude[(y * w + x) as usize]
        }
    };
    let mut out = vec![T::zero(); g.magnitude.len()];
    for y in 0..h {
        for x in 0..w {
            let m = mag(x, y);
            if m <= T::zero() {
                continue;
            }
            let ((px, py), (nx, ny)) = g.direction[(y * w + x) as usize].offsets();
            if m > mag(x + px as i64, y + py as i64) && m >= mag(x + nx as i64, y + ny as i64) {
                out[(y * w + x) as usize] = m;
            }
        }
    }
    out
}

pub fn classify<T: Scalar>(suppressed: &[T], low: T, high: T) -> Vec<EdgeClass> {
    suppressed
        .iter()
        .map(|&m| {
            if m <= T::zero() {
                EdgeClass::None
            } else if m >= high {
                EdgeClass::Strong
            } else if m >= low {
                EdgeClass::Weak
            } else {
                EdgeClass::None
            }
        })
        .collect()
}

/// Keeps strong pixels and weak pixels 8-connected (through weak pixels) to a strong one.
pub fn hysteresis(classes: &[EdgeClass], width: u32, height: u32) -> Vec<bool> {
    let (w, h) = (width as i64, height as i64);
    let mut keep = vec![false; classes.len()];
    let mut queue = VecDeque::new();
    for (i, c) in classes.iter().enumerate() {
        if *c == EdgeClass::Strong {
            keep[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i as i64) % w, (i as i64) / w);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if !keep[j] && classes[j] == EdgeClass::Weak {
                    keep[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    keep
}

/// Canny edge detector on a gray raster. Output samples are 0 or 255.
pub fn canny<T: Scalar>(gray: &Raster, params: &CannyParams<T>) -> Result<Raster, NativeError> {
    let grads = canny_gradients(gray, params)?;
    let suppressed = non_maximum_suppression(&grads);
    let max = grads.max_magnitude();
    if max <= T::zero() {
        return Ok(Raster::filled(gray.width(), gray.height(), 0));
    }
    let classes = classify(&suppressed, params.low_ratio * max, params.high_ratio * max);
    let keep = hysteresis(&classes, gray.width(), gray.height());
    let data = keep.into_iter().map(|k| if k { EDGE } else { 0 }).collect();
    Ok(Raster::gray(gray.width(), gray.height(), data)?)
}

/// Smoothed Sobel gradients as used by [`canny`].
pub fn canny_gradients<T: Scalar>(
    gray: &Raster,
    params: &CannyParams<T>,
) -> Result<Gradients<T>, NativeError> {
    if !gray.is_gray() {
        return Err(NativeError::NotGrayscale(gray.channels()));
    }
    params.validate()?;
    let plane = blur_fixed(gray, params.sigma.to_f64_lossy())?;
    Ok(sobel_fixed(&plane))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(lo: u8, hi: u8) -> Raster {
        Raster::from_fn(64, 64, |x, _| if x < 32 { lo } else { hi })
    }

    #[test]
    fn constant_image_has_no_edges() {
        let out = canny(&Raster::filled(32, 32, 90), &CannyParams::<f32>::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn vertical_step_gives_one_pixel_per_row() {
        let out = canny(&step(0, 255), &CannyParams::<f64>::default()).unwrap();
        for y in 0..64 {
            let cols: Vec<u32> = (0..64).filter(|&x| out.get(x, y) == EDGE).collect();
            assert_eq!(cols, vec![31], "row {y}");
        }
    }

    #[test]
    fn offset_invariance() {
        let p = CannyParams::<f32>::default();
        let a = canny(&step(0, 200), &p).unwrap();
        let b = canny(&step(20, 220), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn params_are_checked() {
        let gray = Raster::filled(4, 4, 0);
        let bad = CannyParams { sigma: 1.0f64, low_ratio: 0.3, high_ratio: 0.2 };
        assert!(canny(&gray, &bad).is_err());
        let bad = CannyParams { sigma: 1.0f64, low_ratio: 0.1, high_ratio: 1.5 };
        assert!(canny(&gray, &bad).is_err());
        let rgb = Raster::new(4, 4, 3, vec![0; 48]).unwrap();
        assert!(matches!(
            canny(&rgb, &CannyParams::<f64>::default()),
            Err(NativeError::NotGrayscale(3))
        ));
    }

    #[test]
    fn hysteresis_follows_weak_chains() {
        use EdgeClass::*;
        // S W W . W
        let classes = [Strong, Weak, Weak, None, Weak];
        assert_eq!(hysteresis(&classes, 5, 1), vec![true, true, true, false, false]);
        // diagonal link counts
        let classes = [Strong, None, None, Weak];
        assert_eq!(hysteresis(&classes, 2, 2), vec![true, false, false, true]);
    }
}

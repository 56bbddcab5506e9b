//! Gaussian smoothing and Sobel gradients.
//!
//! Smoothing runs in fixed point: the kernel is quantized to integer weights
//! and both passes accumulate in `i64`, so a constant intensity offset shifts
//! every smoothed sample by exactly the same amount and Sobel responses are
//! bit-identical under such offsets.

use crate::model::Raster;
use crate::Scalar;

use super::NativeError;

const KERNEL_ONE: f64 = 4096.0;

/// Direction of the intensity gradient, folded to `[0°, 180°)` and quantized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Direction {
    /// Neighbor offsets `(prev, next)` along the gradient, image y pointing down.
    pub fn offsets(self) -> ((i32, i32), (i32, i32)) {
        match self {
            Direction::Deg0 => ((-1, 0), (1, 0)),
            Direction::Deg45 => ((-1, -1), (1, 1)),
            Direction::Deg90 => ((0, -1), (0, 1)),
            Direction::Deg135 => ((1, -1), (-1, 1)),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Direction::Deg0 => 0,
            Direction::Deg45 => 45,
            Direction::Deg90 => 90,
            Direction::Deg135 => 135,
        }
    }

    fn quantize(gx: f64, gy: f64) -> Self {
        let mut deg = gy.atan2(gx).to_degrees();
        if deg < 0.0 {
            deg += 180.0;
        }
        if deg >= 180.0 {
            deg -= 180.0;
        }
        if !(22.5..157.5).contains(&deg) {
            Direction::Deg0
        } else if deg < 67.5 {
            Direction::Deg45
        } else if deg < 112.5 {
            Direction::Deg90
        } else {
            Direction::Deg135
        }
    }
}

/// Per-pixel Sobel response. `gx`/`gy` are in source intensity units.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Scalar> {
    pub width: u32,
    pub height: u32,
    pub gx: Vec<T>,
    pub gy: Vec<T>,
    pub magnitude: Vec<T>,
    pub direction: Vec<Direction>,
}

impl<T: Scalar> Gradients<T> {
    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn magnitude_at(&self, x: u32, y: u32) -> T {
        self.magnitude[self.idx(x, y)]
    }

    pub fn gx_at(&self, x: u32, y: u32) -> T {
        self.gx[self.idx(x, y)]
    }

    pub fn gy_at(&self, x: u32, y: u32) -> T {
        self.gy[self.idx(x, y)]
    }

    pub fn direction_at(&self, x: u32, y: u32) -> Direction {
        self.direction[self.idx(x, y)]
    }

    pub fn max_magnitude(&self) -> T {
        self.magnitude.iter().copied().fold(T::zero(), T::max)
    }
}

/// Symmetric border reflection: `-1 -> 0`, `n -> n-1`.
pub(crate) fn mirror(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Normalized Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|j| (-(j * j) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

fn fixed_kernel(sigma: f64) -> Vec<i64> {
    gaussian_kernel(sigma)
        .into_iter()
        .map(|w| (w * KERNEL_ONE).round() as i64)
        .collect()
}

/// Smoothed plane scaled by `scale`: `value / scale` is the smoothed intensity.
pub(crate) struct FixedPlane {
    pub width: usize,
    pub height: usize,
    pub values: Vec<i64>,
    pub scale: i64,
}

fn check_gray(gray: &Raster) -> Result<(), NativeError> {
    if gray.is_gray() {
        Ok(())
    } else {
        Err(NativeError::NotGrayscale(gray.channels()))
    }
}

fn check_sigma(sigma: f64) -> Result<(), NativeError> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(NativeError::InvalidParameter(format!("sigma must be positive, got {sigma}")))
    }
}

pub(crate) fn blur_fixed(gray: &Raster, sigma: f64) -> Result<FixedPlane, NativeError> {
    check_gray(gray)?;
    check_sigma(sigma)?;
    let kernel = fixed_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let weight: i64 = kernel.iter().sum();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let src = gray.data();

    let mut horiz = vec![0i64; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0i64;
            for (k, &kw) in kernel.iter().enumerate() {
                acc += kw * row[mirror(x as i64 + k as i64 - r, w)] as i64;
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut out = vec![0i64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0i64;
            for (k, &kw) in kernel.iter().enumerate() {
                acc += kw * horiz[mirror(y as i64 + k as i64 - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    Ok(FixedPlane {
        width: w,
        height: h,
        values: out,
        scale: weight * weight,
    })
}

/// Separable Gaussian blur with mirrored borders, rounded back to 8 bits.
pub fn gaussian_blur(gray: &Raster, sigma: f64) -> Result<Raster, NativeError> {
    let plane = blur_fixed(gray, sigma)?;
    let half = plane.scale / 2;
    let data = plane
        .values
        .iter()
        .map(|&v| ((v + half) / plane.scale).clamp(0, 255) as u8)
        .collect();
    Ok(Raster::gray(gray.width(), gray.height(), data)?)
}

pub(crate) fn sobel_fixed<T: Scalar>(plane: &FixedPlane) -> Gradients<T> {
    let (w, h) = (plane.width, plane.height);
    let at = |x: i64, y: i64| plane.values[mirror(y, h) * w + mirror(x, w)];
    let scale = T::from_f64_lossy(plane.scale as f64);
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    let mut magnitude = Vec::with_capacity(w * h);
    let mut direction = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let dx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
            let fx = T::from_f64_lossy(dx as f64);
            let fy = T::from_f64_lossy(dy as f64);
            gx.push(fx / scale);
            gy.push(fy / scale);
            magnitude.push(fx.hypot(fy) / scale);
            direction.push(Direction::quantize(dx as f64, dy as f64));
        }
    }
    Gradients {
        width: w as u32,
        height: h as u32,
        gx,
        gy,
        magnitude,
        direction,
    }
}

/// 3x3 Sobel gradients of an unsmoothed gray raster, mirrored borders.
pub fn sobel_gradients<T: Scalar>(gray: &Raster) -> Result<Gradients<T>, NativeError> {
    check_gray(gray)?;
    let plane = FixedPlane {
        width: gray.width() as usize,
        height: gray.height() as usize,
        values: gray.data().iter().map(|&v| v as i64).collect(),
        scale: 1,
    };
    Ok(sobel_fixed(&plane))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 2-D convolution with the float kernel, mirrored borders.
    fn direct_blur(gray: &Raster, sigma: f64) -> Vec<f64> {
        let k = gaussian_kernel(sigma);
        let r = (k.len() / 2) as i64;
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    for (i, ki) in k.iter().enumerate() {
                        let sx = mirror(x as i64 + i as i64 - r, w);
                        let sy = mirror(y as i64 + j as i64 - r, h);
                        acc += ki * kj * gray.data()[sy * w + sx] as f64;
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    #[test]
    fn mirror_indices() {
        assert_eq!(mirror(-1, 5), 0);
        assert_eq!(mirror(-2, 5), 1);
        assert_eq!(mirror(5, 5), 4);
        assert_eq!(mirror(6, 5), 3);
        assert_eq!(mirror(-7, 3), 0);
        assert_eq!(mirror(2, 3), 2);
    }

    #[test]
    fn kernel_is_normalized() {
        for sigma in [0.5, 1.4, 3.0] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len() as i64, 2 * (3.0 * sigma).ceil() as i64 + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_is_preserved() {
        let img = Raster::filled(17, 9, 100);
        let out = gaussian_blur(&img, 1.4).unwrap();
        assert!(out.data().iter().all(|&v| v == 100));
    }

    #[test]
    fn impulse_matches_direct_convolution() {
        let mut data = vec![0u8; 21 * 21];
        data[10 * 21 + 10] = 255;
        let img = Raster::gray(21, 21, data).unwrap();
        let out = gaussian_blur(&img, 1.4).unwrap();
        let oracle = direct_blur(&img, 1.4);
        for (a, b) in out.data().iter().zip(&oracle) {
            assert!((*a as f64 - b).abs() <= 1.0, "{a} vs {b}");
        }
        let total: f64 = out.data().iter().map(|&v| v as f64).sum();
        let support = out.data().iter().filter(|&&v| v > 0).count() as f64;
        assert!((total - 255.0).abs() <= 0.5 * support.max(1.0) + 1.0, "sum {total}");
        // symmetric blob
        for y in 0..21u32 {
            for x in 0..21u32 {
                assert_eq!(out.get(x, y), out.get(20 - x, y));
                assert_eq!(out.get(x, y), out.get(y, x));
            }
        }
    }

    #[test]
    fn wider_sigma_lowers_the_peak() {
        let mut data = vec![0u8; 31 * 31];
        data[15 * 31 + 15] = 255;
        let img = Raster::gray(31, 31, data).unwrap();
        let narrow = gaussian_blur(&img, 0.5).unwrap().get(15, 15);
        let wide = gaussian_blur(&img, 3.0).unwrap().get(15, 15);
        assert!(wide < narrow, "{wide} !< {narrow}");
    }

    #[test]
    fn rejects_color_and_bad_sigma() {
        let rgb = Raster::new(2, 2, 3, vec![0; 12]).unwrap();
        assert!(matches!(gaussian_blur(&rgb, 1.0), Err(NativeError::NotGrayscale(3))));
        assert!(matches!(sobel_gradients::<f32>(&rgb), Err(NativeError::NotGrayscale(3))));
        let gray = Raster::filled(2, 2, 0);
        assert!(gaussian_blur(&gray, 0.0).is_err());
        assert!(gaussian_blur(&gray, f64::NAN).is_err());
    }

    #[test]
    fn unit_ramp_gradient() {
        let img = Raster::from_fn(16, 8, |x, _| x as u8);
        let g = sobel_gradients::<f64>(&img).unwrap();
        for y in 1..7 {
            for x in 1..15 {
                assert_eq!(g.gx_at(x, y), 8.0);
                assert_eq!(g.gy_at(x, y), 0.0);
                assert_eq!(g.magnitude_at(x, y), 8.0);
                assert_eq!(g.direction_at(x, y), Direction::Deg0);
            }
        }
    }

    #[test]
    fn constant_image_has_no_gradient() {
        let g = sobel_gradients::<f32>(&Raster::filled(5, 5, 77)).unwrap();
        assert!(g.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn transpose_swaps_components() {
        let img = Raster::from_fn(12, 12, |x, y| ((x * 7 + y * 3 + x * y) % 251) as u8);
        let t = Raster::from_fn(12, 12, |x, y| img.get(y, x));
        let g = sobel_gradients::<f64>(&img).unwrap();
        let gt = sobel_gradients::<f64>(&t).unwrap();
        for y in 0..12 {
            for x in 0..12 {
                assert_eq!(g.gx_at(x, y).abs(), gt.gy_at(y, x).abs());
                assert_eq!(g.gy_at(x, y).abs(), gt.gx_at(y, x).abs());
                assert_eq!(g.magnitude_at(x, y), gt.magnitude_at(y, x));
            }
        }
    }

    #[test]
    fn direction_bins() {
        assert_eq!(Direction::quantize(1.0, 0.0), Direction::Deg0);
        assert_eq!(Direction::quantize(-1.0, 0.0), Direction::Deg0);
        assert_eq!(Direction::quantize(1.0, 1.0), Direction::Deg45);
        assert_eq!(Direction::quantize(0.0, 1.0), Direction::Deg90);
        assert_eq!(Direction::quantize(0.0, -1.0), Direction::Deg90);
        assert_eq!(Direction::quantize(-1.0, 1.0), Direction::Deg135);
        assert_eq!(Direction::quantize(1.0, -1.0), Direction::Deg135);
    }
}

use crate::geometry::{Point, Polygon};
use crate::model::{Detection, Palette, Raster};
use crate::Scalar;

use super::NativeError;

/// Area a detection must fall in to be counted.
#[derive(Debug, Clone)]
pub enum Region<T: Scalar> {
    /// Union of polygons.
    Polygons(Vec<Polygon<T>>),
    /// Pixels of one class of a label mask.
    Mask { mask: Raster, class_id: u8 },
}

impl<T: Scalar> Region<T> {
    /// Mask region whose class must exist in the mask's palette.
    pub fn mask(mask: Raster, palette: &Palette, class_id: u8) -> Result<Self, NativeError> {
        if !mask.is_gray() {
            return Err(NativeError::NotGrayscale(mask.channels()));
        }
        if !palette.contains_id(class_id) {
            return Err(NativeError::InvalidParameter(format!(
                "class id {class_id} is not in the mask palette"
            )));
        }
        Ok(Region::Mask { mask, class_id })
    }

    /// Center-point membership.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Region::Polygons(polys) => {
                let p = Point::new(T::from_f64_lossy(x), T::from_f64_lossy(y));
                polys.iter().any(|poly| poly.contains(p))
            }
            Region::Mask { mask, class_id } => {
                if x < 0.0 || y < 0.0 {
                    return false;
                }
                let (px, py) = (x.floor() as u64, y.floor() as u64);
                px < mask.width() as u64
                    && py < mask.height() as u64
                    && mask.get(px as u32, py as u32) == *class_id
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CountRequest<T: Scalar> {
    pub detections: Vec<Detection>,
    pub category: Option<String>,
    pub region: Option<Region<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountResult {
    pub count: usize,
    pub kept: Vec<Detection>,
}

/// Keeps detections of the requested category whose box center lies in the
/// region, and counts them.
pub fn count_objects<T: Scalar>(request: &CountRequest<T>) -> CountResult {
    let kept: Vec<Detection> = request
        .detections
        .iter()
        .filter(|d| request.category.as_deref().is_none_or(|c| d.category == c))
        .filter(|d| {
            let (cx, cy) = d.center();
            request.region.as_ref().is_none_or(|r| r.contains(cx, cy))
        })
        .cloned()
        .collect();
    CountResult {
        count: kept.len(),
        kept,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PaletteClass;

    fn plane(cx: f64, cy: f64) -> Detection {
        Detection {
            category: "airplane".into(),
            bbox: [cx - 5.0, cy - 5.0, cx + 5.0, cy + 5.0],
            score: 0.9,
        }
    }

    #[test]
    fn empty_detections() {
        let r = count_objects::<f64>(&CountRequest::default());
        assert_eq!(r.count, 0);
    }

    #[test]
    fn category_filter() {
        let req = CountRequest::<f64> {
            detections: vec![plane(10.0, 10.0), plane(20.0, 20.0)],
            category: Some("ship".into()),
            region: None,
        };
        assert_eq!(count_objects(&req).count, 0);
    }

    #[test]
    fn mask_region_lookup() {
        let mask = Raster::from_fn(100, 100, |x, y| if x < 60 && y < 60 { 2 } else { 0 });
        let palette = Palette {
            classes: vec![
                PaletteClass { id: 0, name: "background".into(), color: [0, 0, 0] },
                PaletteClass { id: 2, name: "road".into(), color: [128, 128, 128] },
            ],
        };
        assert!(Region::<f64>::mask(mask.clone(), &palette, 1).is_err());
        let region = Region::<f64>::mask(mask, &palette, 2).unwrap();
        let req = CountRequest {
            detections: vec![plane(10.0, 10.0), plane(50.0, 50.0), plane(90.0, 90.0)],
            category: Some("airplane".into()),
            region: Some(region),
        };
        let r = count_objects(&req);
        assert_eq!(r.count, 2);
        assert_eq!(r.kept[1], plane(50.0, 50.0));
    }

    #[test]
    fn centers_outside_mask_bounds() {
        let region = Region::<f32>::Mask { mask: Raster::filled(4, 4, 1), class_id: 1 };
        assert!(region.contains(3.9, 0.0));
        assert!(!region.contains(4.0, 0.0));
        assert!(!region.contains(-0.1, 1.0));
    }
}

//! Axis-aligned boxes in MOT-Challenge `(left, top, width, height)` form.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite fields and negative sizes.
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        let b = BBox {
            left,
            top,
            width,
            height,
        };
        if !b.is_valid() {
            return Err(Error::InvalidBox(format!(
                "({left}, {top}, {width}, {height})"
            )));
        }
        Ok(b)
    }

    pub fn is_valid(&self) -> bool {
        self.left.is_finite()
            && self.top.is_finite()
            && self.width.is_finite()
            && self.height.is_finite()
            && self.width >= 0.0
            && self.height >= 0.0
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        let width = width.max(0.0);
        let height = height.max(0.0);
        BBox {
            left: cx - width / 2.0,
            top: cy - height / 2.0,
            width,
            height,
        }
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        BBox {
            left: self.left + dx,
            top: self.top + dy,
            ..*self
        }
    }
}

/// Intersection over union. Zero-area boxes score 0 against everything,
/// themselves included.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    // areas from the same edge arithmetic as the intersection, so a box
    // against itself scores exactly 1
    let area_a = (a.right() - a.left) * (a.bottom() - a.top);
    let area_b = (b.right() - b.left) * (b.bottom() - b.top);
    if a.area() <= 0.0 || b.area() <= 0.0 || area_a <= 0.0 || area_b <= 0.0 {
        return 0.0;
    }
    let iw = a.right().min(b.right()) - a.left.max(b.left);
    let ih = a.bottom().min(b.bottom()) - a.top.max(b.top);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(l: f64, t: f64, w: f64, h: f64) -> BBox {
        BBox::new(l, t, w, h).unwrap()
    }

    /// Counts covered unit cells; only valid for integer-coordinate boxes.
    fn raster_iou(a: &BBox, b: &BBox) -> f64 {
        let cells = |r: &BBox| {
            let mut v = std::collections::HashSet::new();
            for x in r.left as i64..(r.left + r.width) as i64 {
                for y in r.top as i64..(r.top + r.height) as i64 {
                    v.insert((x, y));
                }
            }
            v
        };
        let (ca, cb) = (cells(a), cells(b));
        let inter = ca.intersection(&cb).count();
        let union = ca.union(&cb).count();
        if union == 0 || ca.is_empty() || cb.is_empty() {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(
            iou(&bx(0.0, 0.0, 10.0, 10.0), &bx(0.0, 0.0, 10.0, 10.0)),
            1.0
        );
        assert_eq!(iou(&bx(0.0, 0.0, 1.0, 1.0), &bx(5.0, 5.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn half_overlap_matches_raster_count() {
        let (a, b) = (bx(0.0, 0.0, 2.0, 2.0), bx(1.0, 0.0, 2.0, 2.0));
        let expected = raster_iou(&a, &b);
        assert_eq!(expected, 2.0 / 6.0);
        assert!((iou(&a, &b) - expected).abs() < 1e-12);
    }

    #[test]
    fn degenerate_boxes_score_zero() {
        let z = bx(1.0, 1.0, 0.0, 4.0);
        assert_eq!(iou(&z, &z), 0.0);
        assert_eq!(iou(&z, &bx(0.0, 0.0, 10.0, 10.0)), 0.0);
        let touching = iou(&bx(0.0, 0.0, 1.0, 1.0), &bx(1.0, 0.0, 1.0, 1.0));
        assert_eq!(touching, 0.0);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(BBox::new(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(BBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::new(0.0, f64::INFINITY, 1.0, 1.0).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.0..40.0f64, 0.0..40.0f64)
            .prop_map(|(l, t, w, h)| BBox::new(l, t, w, h).unwrap())
    }

    fn int_box() -> impl Strategy<Value = BBox> {
        (0..100u32, 0..100u32)
            .prop_flat_map(|(l, t)| (Just(l), Just(t), 0..=(100 - l), 0..=(100 - t)))
            .prop_map(|(l, t, w, h)| bx(l as f64, t as f64, w as f64, h as f64))
    }

    proptest! {
        #[test]
        fn symmetric(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(iou(&a, &b), iou(&b, &a));
        }

        #[test]
        fn self_overlap_is_one(a in arb_box()) {
            prop_assume!(a.area() > 0.0);
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn in_unit_interval(a in arb_box(), b in arb_box()) {
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn agrees_with_rasterization(a in int_box(), b in int_box()) {
            prop_assert!((iou(&a, &b) - raster_iou(&a, &b)).abs() < 1e-9);
        }
    }
}

//! Per-frame track overlays written as binary PPM images.

use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, Rgb, RgbImage};
use loctrack::{BBox, GroundTruth, TrackResults};

pub const MAX_SIDE: u32 = 16_384;

const GT_COLOR: Rgb<u8> = Rgb([255, 255, 255]);
const BACKGROUND: Rgb<u8> = Rgb([24, 24, 24]);

// 3x5 digit glyphs, one row per entry, high bit on the left
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

/// Bright color derived from a splitmix64 hash of the id.
pub fn track_color(id: u64) -> Rgb<u8> {
    let mut z = id.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let channel = |shift: u32| 64 + ((z >> shift) & 0xFF) as u8 % 192;
    Rgb([channel(0), channel(8), channel(16)])
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn outline(img: &mut RgbImage, b: &BBox, c: Rgb<u8>, thickness: i64) {
    let (l, t) = (b.left.round() as i64, b.top.round() as i64);
    let (r, bt) = (b.right().round() as i64, b.bottom().round() as i64);
    for k in 0..thickness {
        for x in l..=r {
            put(img, x, t + k, c);
            put(img, x, bt - k, c);
        }
        for y in t..=bt {
            put(img, l + k, y, c);
            put(img, r - k, y, c);
        }
    }
}

fn label(img: &mut RgbImage, x: i64, y: i64, id: u64, c: Rgb<u8>) {
    const SCALE: i64 = 2;
    for (i, ch) in id.to_string().bytes().enumerate() {
        let glyph = DIGITS[(ch - b'0') as usize];
        let x0 = x + i as i64 * 4 * SCALE;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) != 0 {
                    for dy in 0..SCALE {
                        for dx in 0..SCALE {
                            put(img, x0 + col * SCALE + dx, y + row as i64 * SCALE + dy, c);
                        }
                    }
                }
            }
        }
    }
}

pub fn render_frame(
    width: u32,
    height: u32,
    frame: u32,
    results: &TrackResults,
    gt: Option<&GroundTruth>,
) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    if let Some(gt) = gt {
        for o in gt.frame(frame) {
            outline(&mut img, &o.bbox, GT_COLOR, 1);
        }
    }
    for r in results.frame(frame) {
        let c = track_color(r.id);
        outline(&mut img, &r.bbox, c, 2);
        label(
            &mut img,
            r.bbox.left.round() as i64,
            r.bbox.top.round() as i64 - 12,
            r.id,
            c,
        );
    }
    img
}

/// Writes `frame_NNNNNN.ppm` for frames `1..=frames`; returns the paths.
pub fn render_all(
    out_dir: &Path,
    width: u32,
    height: u32,
    frames: u32,
    results: &TrackResults,
    gt: Option<&GroundTruth>,
) -> Result<Vec<PathBuf>, String> {
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(format!(
            "image size {width}x{height} outside 1..={MAX_SIDE}"
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let mut paths = Vec::new();
    for frame in 1..=frames {
        let path = out_dir.join(format!("frame_{frame:06}.ppm"));
        let img = render_frame(width, height, frame, results, gt);
        let file = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        PnmEncoder::new(std::io::BufWriter::new(file))
            .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
            .write_image(img.as_raw(), width, height, ExtendedColorType::Rgb8)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use loctrack::ResultBox;

    #[test]
    fn colors_are_stable_and_distinct() {
        assert_eq!(track_color(7), track_color(7));
        assert_ne!(track_color(1), track_color(2));
    }

    #[test]
    fn box_edges_take_the_track_color() {
        let mut r = TrackResults::default();
        r.push(
            1,
            ResultBox {
                id: 3,
                bbox: BBox::new(10.0, 20.0, 30.0, 40.0).unwrap(),
                conf: 1.0,
            },
        );
        let img = render_frame(100, 100, 1, &r, None);
        assert_eq!(*img.get_pixel(10, 30), track_color(3));
        assert_eq!(*img.get_pixel(25, 40), BACKGROUND);
        assert_eq!(
            *render_frame(100, 100, 2, &r, None).get_pixel(10, 30),
            BACKGROUND
        );
    }

    #[test]
    fn boxes_off_canvas_are_clipped() {
        let mut r = TrackResults::default();
        r.push(
            1,
            ResultBox {
                id: 12,
                bbox: BBox::new(-50.0, -50.0, 500.0, 500.0).unwrap(),
                conf: 1.0,
            },
        );
        render_frame(20, 20, 1, &r, None);
    }

    #[test]
    fn invalid_size_rejected() {
        let dir = std::env::temp_dir();
        assert!(render_all(&dir, 0, 10, 1, &TrackResults::default(), None).is_err());
        assert!(render_all(&dir, 10, MAX_SIDE + 1, 1, &TrackResults::default(), None).is_err());
    }
}

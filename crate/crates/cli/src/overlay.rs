use activecircle::{Circle, Frame};
use image::{Rgb, RgbImage};

pub const OUTLINE: Rgb<u8> = Rgb([255, 255, 0]);
pub const DIAMETER: Rgb<u8> = Rgb([0, 255, 0]);

/// Grayscale frame with the circle outline and its vertical AP diameter.
///
/// Outline pixels are those whose centers lie within half a pixel of the
/// circle, so every row and column the circle crosses gets at least one.
/// The diameter is drawn first and the outline on top of it.
pub fn render_overlay(frame: &Frame, circle: &Circle) -> RgbImage {
    let (w, h) = (frame.width(), frame.height());
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = (frame.get(x as usize, y as usize) * 255.0).round() as u8;
        Rgb([v, v, v])
    });

    let column = circle.x_c.round();
    if column >= 0.0 && column < w as f64 {
        let top = (circle.y_c - circle.radius).ceil().max(0.0);
        let bottom = (circle.y_c + circle.radius).floor().min(h as f64 - 1.0);
        let mut y = top;
        while y <= bottom {
            img.put_pixel(column as u32, y as u32, DIAMETER);
            y += 1.0;
        }
    }

    let reach = circle.radius + 1.0;
    let x_lo = (circle.x_c - reach).floor().max(0.0) as usize;
    let y_lo = (circle.y_c - reach).floor().max(0.0) as usize;
    let x_hi = (circle.x_c + reach).ceil().min(w as f64 - 1.0);
    let y_hi = (circle.y_c + reach).ceil().min(h as f64 - 1.0);
    if x_hi < 0.0 || y_hi < 0.0 {
        return img;
    }
    for y in y_lo..=y_hi as usize {
        for x in x_lo..=x_hi as usize {
            let d = (x as f64 - circle.x_c).hypot(y as f64 - circle.y_c);
            if (d - circle.radius).abs() <= 0.5 {
                img.put_pixel(x as u32, y as u32, OUTLINE);
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(img: &RgbImage, color: Rgb<u8>) -> usize {
        img.pixels().filter(|p| **p == color).count()
    }

    #[test]
    fn outline_and_diameter_are_drawn() {
        let f = Frame::uniform(64, 64, 0.5).unwrap();
        let c = Circle::new(32.0, 30.0, 12.0).unwrap();
        let img = render_overlay(&f, &c);
        let n = count(&img, OUTLINE);
        // roughly one pixel per unit of circumference
        assert!((n as f64 - 2.0 * std::f64::consts::PI * 12.0).abs() < 20.0, "{n}");
        // diameter spans 2R + 1 rows minus the two outline pixels at its ends
        assert_eq!(count(&img, DIAMETER), 23);
        assert_eq!(*img.get_pixel(32, 30), DIAMETER);
        assert_eq!(*img.get_pixel(32, 18), OUTLINE);
        assert_eq!(*img.get_pixel(0, 0), Rgb([128, 128, 128]));
    }

    #[test]
    fn clipped_circle_does_not_panic() {
        let f = Frame::uniform(32, 32, 0.2).unwrap();
        for c in [(0.0, 0.0, 20.0), (31.0, 16.0, 40.0), (-10.0, -10.0, 3.0), (50.0, 5.0, 4.0)] {
            let img = render_overlay(&f, &Circle::new(c.0, c.1, c.2).unwrap());
            assert_eq!(img.dimensions(), (32, 32));
        }
    }

    #[test]
    fn smallest_circle_stays_visible() {
        let f = Frame::uniform(32, 32, 0.2).unwrap();
        let img = render_overlay(&f, &Circle::new(16.3, 15.8, 2.0).unwrap());
        assert!(count(&img, OUTLINE) >= 8);
    }
}

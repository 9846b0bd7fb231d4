//! Exact clipped areas used for the nodal quadrature weights.

/// Area of the axis-aligned rectangle `[x0, x1] x [y0, y1]` intersected with
/// the disk of radius `r` centred at the origin.
pub fn rect_disk_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let chord = |x: f64| (r * r - x * x).max(0.0).sqrt();
    // antiderivative of the upper half-chord
    let prim = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * chord(x) + r * r * (x / r).asin())
    };

    let mut cuts = vec![x0, x1, -r, r];
    for y in [y0, y1] {
        if y.abs() < r {
            let c = chord(y);
            cuts.push(-c);
            cuts.push(c);
        }
    }
    cuts.retain(|&c| c >= x0 && c <= x1);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        if m.abs() >= r {
            continue;
        }
        let s = chord(m);
        let top_is_chord = y1 >= s;
        let bottom_is_chord = y0 <= -s;
        let top_m = if top_is_chord { s } else { y1 };
        let bot_m = if bottom_is_chord { -s } else { y0 };
        if top_m <= bot_m {
            continue;
        }
        let int_s = prim(b) - prim(a);
        let top = if top_is_chord { int_s } else { y1 * (b - a) };
        let bot = if bottom_is_chord { -int_s } else { y0 * (b - a) };
        area += top - bot;
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn whole_disk() {
        let a = rect_disk_area(-2.0, 2.0, -2.0, 2.0, 1.0);
        assert!((a - PI).abs() < 1e-13);
    }

    #[test]
    fn quadrant_and_interior_square() {
        let a = rect_disk_area(0.0, 1.0, 0.0, 1.0, 1.0);
        assert!((a - PI / 4.0).abs() < 1e-13);
        let b = rect_disk_area(-0.1, 0.2, 0.0, 0.3, 1.0);
        assert!((b - 0.09).abs() < 1e-14);
    }

    #[test]
    fn thin_strip_matches_sampling() {
        let (x0, x1, y0, y1) = (0.55, 0.8, -0.3, 0.9);
        let exact = rect_disk_area(x0, x1, y0, y1, 1.0);
        let m = 2000;
        let mut count = 0usize;
        for i in 0..m {
            for j in 0..m {
                let x = x0 + (i as f64 + 0.5) * (x1 - x0) / m as f64;
                let y = y0 + (j as f64 + 0.5) * (y1 - y0) / m as f64;
                if x * x + y * y < 1.0 {
                    count += 1;
                }
            }
        }
        let est = count as f64 / (m * m) as f64 * (x1 - x0) * (y1 - y0);
        assert!((exact - est).abs() < 1e-5);
    }
}

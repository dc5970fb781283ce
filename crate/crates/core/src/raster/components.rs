use super::RasterImage;

/// Clears every 8-connected ink component with fewer than `min_area` pixels.
pub fn remove_specks(img: &RasterImage, min_area: usize) -> RasterImage {
    let mut out = img.clone();
    if min_area <= 1 {
        return out;
    }
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if seen[start] || !img.is_ink(start % w, start / w) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(p) = stack.pop() {
            component.push(p);
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if !seen[q] && img.is_ink(nx as usize, ny as usize) {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if component.len() < min_area {
            for &p in &component {
                out.set(p % w, p / w, 0);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_components_vanish() {
        let img = RasterImage::from_ascii(&["#....##", ".....#.", "..#....", ".#....."]);
        let out = remove_specks(&img, 3);
        assert_eq!(out, RasterImage::from_ascii(&[".....##", ".....#.", ".......", "......."]));
        assert_eq!(remove_specks(&img, 2), RasterImage::from_ascii(&[".....##", ".....#.", "..#....", ".#....."]));
        assert_eq!(remove_specks(&img, 1), img);
    }
}

//! Bottom water reservoirs.
//!
//! With the image flipped upside down, water poured in from above settles
//! in every background cavity it cannot drain out of. Back in the original
//! orientation this means: a background pixel drains (escapes) when a path
//! of background pixels moving only up, left or right reaches the image
//! border. Everything else is trapped water, i.e. a bottom reservoir.
//!
//! Escape never propagates downwards, so a single top-to-bottom pass with a
//! lateral flood per row computes the fixpoint exactly.

use std::collections::VecDeque;

use super::RasterImage;

/// One 4-connected region of trapped background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reservoir {
    /// `(row, col)` pairs in row-major order.
    pub pixels: Vec<(usize, usize)>,
    pub height_rows: usize,
    /// `(top, left, bottom, right)`, inclusive.
    pub bbox: (usize, usize, usize, usize),
}

impl Reservoir {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// Reservoirs shorter than this many rows are treated as noise.
pub const MIN_RESERVOIR_HEIGHT: usize = 2;

/// Escape status of one row from its ink and the row above.
///
/// `above` is the escape row computed for `y - 1` (ignored when
/// `border_row`, i.e. for the first and last rows). Writes 1 for escaped
/// background and 0 for ink or trapped background into `out`.
pub fn escape_row(ink: &[u8], above: &[u8], border_row: bool, out: &mut [u8]) {
    let w = ink.len();
    let mut x = 0;
    while x < w {
        if ink[x] != 0 {
            out[x] = 0;
            x += 1;
            continue;
        }
        let start = x;
        let mut seeded = border_row || start == 0;
        while x < w && ink[x] == 0 {
            seeded |= above[x] != 0;
            x += 1;
        }
        seeded |= x == w;
        out[start..x].fill(u8::from(seeded));
    }
}

/// Per-pixel trapped mask (1 = trapped background).
pub fn trapped_mask(img: &RasterImage) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut escaped = vec![0u8; w * h];
    let blank = vec![0u8; w];
    for y in 0..h {
        let (done, rest) = escaped.split_at_mut(y * w);
        let above = if y == 0 { &blank[..] } else { &done[(y - 1) * w..] };
        escape_row(img.row(y), above, y == 0 || y + 1 == h, &mut rest[..w]);
    }
    img.pixels()
        .iter()
        .zip(&escaped)
        .map(|(&p, &e)| u8::from(p == 0 && e == 0))
        .collect()
}

/// Groups a trapped mask into 4-connected reservoirs, dropping those shorter
/// than [`MIN_RESERVOIR_HEIGHT`].
pub fn group_reservoirs(mask: &[u8], width: usize, height: usize) -> Vec<Reservoir> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if mask[start] == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            pixels.push((y, x));
            let mut visit = |j: usize| {
                if mask[j] != 0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
        pixels.sort_unstable();
        let top = pixels.first().unwrap().0;
        let bottom = pixels.last().unwrap().0;
        let left = pixels.iter().map(|p| p.1).min().unwrap();
        let right = pixels.iter().map(|p| p.1).max().unwrap();
        let height_rows = bottom - top + 1;
        if height_rows >= MIN_RESERVOIR_HEIGHT {
            out.push(Reservoir { pixels, height_rows, bbox: (top, left, bottom, right) });
        }
    }
    out
}

/// Bottom reservoirs of a binary image, ordered by their first pixel in
/// row-major order.
pub fn bottom_reservoirs(img: &RasterImage) -> Vec<Reservoir> {
    debug_assert!(img.require_binary().is_ok());
    let mask = trapped_mask(img);
    group_reservoirs(&mask, img.width(), img.height())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_trapped(img: &RasterImage) -> Vec<u8> {
        // independent per-pixel search over up/left/right moves
        let (w, h) = (img.width(), img.height());
        let mut out = vec![0u8; w * h];
        for y0 in 0..h {
            for x0 in 0..w {
                if img.is_ink(x0, y0) {
                    continue;
                }
                let mut seen = vec![false; w * h];
                let mut stack = vec![(x0, y0)];
                let mut escapes = false;
                while let Some((x, y)) = stack.pop() {
                    if seen[y * w + x] || img.is_ink(x, y) {
                        continue;
                    }
                    seen[y * w + x] = true;
                    if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                        escapes = true;
                        break;
                    }
                    stack.push((x - 1, y));
                    stack.push((x + 1, y));
                    stack.push((x, y - 1));
                }
                out[y0 * w + x0] = u8::from(!escapes);
            }
        }
        out
    }

    #[test]
    fn arch_holds_one_reservoir_up_to_shorter_leg() {
        let img = RasterImage::from_ascii(&[
            "..........",
            ".########.",
            ".#......#.",
            ".#......#.",
            ".#......#.",
            ".#........",
            ".#........",
            "..........",
        ]);
        let res = bottom_reservoirs(&img);
        assert_eq!(res.len(), 1);
        let r = &res[0];
        assert_eq!(r.bbox, (2, 2, 4, 7));
        assert_eq!(r.height_rows, 3);
        assert_eq!(r.area(), 18);
        assert_eq!(trapped_mask(&img), oracle_trapped(&img));
    }

    #[test]
    fn solid_block_and_cup_have_none() {
        let block = RasterImage::from_ascii(&["......", ".####.", ".####.", "......"]);
        assert!(bottom_reservoirs(&block).is_empty());
        let cup = RasterImage::from_ascii(&[
            "........",
            ".#....#.",
            ".#....#.",
            ".#....#.",
            ".######.",
            "........",
        ]);
        assert!(bottom_reservoirs(&cup).is_empty());
        assert_eq!(trapped_mask(&cup), oracle_trapped(&cup));
    }

    #[test]
    fn closed_loop_is_a_reservoir_and_shallow_cavities_are_dropped() {
        let ring = RasterImage::from_ascii(&[".....", ".###.", ".#.#.", ".#.#.", ".###.", "....."]);
        let res = bottom_reservoirs(&ring);
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].pixels, vec![(2, 2), (3, 2)]);
        let shallow = RasterImage::from_ascii(&[".....", ".###.", ".#.#.", "....."]);
        assert!(bottom_reservoirs(&shallow).is_empty());
        assert_eq!(trapped_mask(&shallow).iter().sum::<u8>(), 1);
    }
}

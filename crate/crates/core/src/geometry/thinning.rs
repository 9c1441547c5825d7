//! Zhang–Suen iterative thinning.
//!
//! Pixels outside the image take the value of the nearest in-bounds pixel, so a vessel that
//! leaves the field of view is thinned as if it continued straight on; its skeleton reaches
//! the border instead of retreating from it.

use super::mask::LumenMask;

/// Neighbour offsets P2..P9, clockwise starting north.
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

struct Grid {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl Grid {
    #[inline]
    fn at(&self, row: isize, col: isize) -> bool {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.cells[r * self.width + c]
    }

    fn ring(&self, row: usize, col: usize) -> [bool; 8] {
        let mut out = [false; 8];
        for (k, (dr, dc)) in RING.iter().enumerate() {
            out[k] = self.at(row as isize + dr, col as isize + dc);
        }
        out
    }

    /// One Zhang–Suen sub-iteration; returns the number of deleted pixels.
    fn pass(&mut self, first: bool, scratch: &mut Vec<usize>) -> usize {
        scratch.clear();
        for row in 0..self.height {
            for col in 0..self.width {
                if !self.cells[row * self.width + col] {
                    continue;
                }
                let n = self.ring(row, col);
                let b = n.iter().filter(|v| **v).count();
                if !(2..=6).contains(&b) {
                    continue;
                }
                let a = (0..8).filter(|&k| !n[k] && n[(k + 1) % 8]).count();
                if a != 1 {
                    continue;
                }
                // n[0]=P2 (N), n[2]=P4 (E), n[4]=P6 (S), n[6]=P8 (W)
                let (c1, c2) = if first {
                    (n[0] && n[2] && n[4], n[2] && n[4] && n[6])
                } else {
                    (n[0] && n[2] && n[6], n[0] && n[4] && n[6])
                };
                if c1 || c2 {
                    continue;
                }
                scratch.push(row * self.width + col);
            }
        }
        for &i in scratch.iter() {
            self.cells[i] = false;
        }
        scratch.len()
    }
}

/// Thins the foreground of `mask` to a one-pixel-wide skeleton.
pub fn zhang_suen(mask: &LumenMask) -> LumenMask {
    let mut grid = Grid {
        width: mask.width(),
        height: mask.height(),
        cells: mask.data().to_vec(),
    };
    if grid.width == 0 || grid.height == 0 {
        return mask.clone();
    }
    let mut scratch = Vec::new();
    loop {
        let removed = grid.pass(true, &mut scratch) + grid.pass(false, &mut scratch);
        if removed == 0 {
            break;
        }
    }
    LumenMask::new(
        grid.width,
        grid.height,
        grid.cells,
        mask.spacing(),
        mask.frame_index(),
    )
    .expect("dimensions preserved")
}

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Integer pixel coordinate, row-major (row = y, col = x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Euclidean distance in pixels.
    pub fn distance(&self, other: &Pixel) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        (dr * dr + dc * dc).sqrt()
    }

    /// True when the two pixels are distinct 8-neighbours.
    pub fn is_neighbour(&self, other: &Pixel) -> bool {
        self != other && self.row.abs_diff(other.row) <= 1 && self.col.abs_diff(other.col) <= 1
    }
}

/// Binary lumen occupancy for one cine frame. Isotropic spacing in mm per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumenMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
    spacing: f64,
    frame_index: usize,
}

impl LumenMask {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<bool>,
        spacing: f64,
        frame_index: usize,
    ) -> Result<Self, GeometryError> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(GeometryError::InvalidSpacing(spacing));
        }
        if data.len() != width * height {
            return Err(GeometryError::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
            spacing,
            frame_index,
        })
    }

    /// Builds a mask by evaluating `f(row, col)` on every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        spacing: f64,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, GeometryError> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::new(width, height, data, spacing, 0)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn with_frame_index(mut self, frame_index: usize) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn index(&self, p: Pixel) -> usize {
        p.row * self.width + p.col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        row < self.height && col < self.width && self.data[row * self.width + col]
    }

    #[inline]
    pub fn contains(&self, p: Pixel) -> bool {
        self.get(p.row, p.col)
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn foreground(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(i, _)| Pixel::new(i / self.width, i % self.width))
    }

    /// Mask diagonal in mm, an upper bound for any diameter measured on it.
    pub fn diagonal_mm(&self) -> f64 {
        ((self.width * self.width + self.height * self.height) as f64).sqrt() * self.spacing
    }

    /// In-bounds 8-neighbours of `p`.
    pub fn neighbours(&self, p: Pixel) -> impl Iterator<Item = Pixel> + '_ {
        const OFFSETS: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        OFFSETS.iter().filter_map(move |(dr, dc)| {
            let r = p.row as isize + dr;
            let c = p.col as isize + dc;
            (r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width)
                .then(|| Pixel::new(r as usize, c as usize))
        })
    }

    /// Keeps only the largest 8-connected foreground component. Ties go to the component
    /// met first in raster order.
    pub fn largest_component(&self) -> LumenMask {
        let mut label = vec![0u32; self.data.len()];
        let mut best: Option<(u32, usize)> = None;
        let mut next = 1u32;
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || label[start] != 0 {
                continue;
            }
            let id = next;
            next += 1;
            label[start] = id;
            stack.push(start);
            let mut size = 0usize;
            while let Some(i) = stack.pop() {
                size += 1;
                let p = Pixel::new(i / self.width, i % self.width);
                for q in self.neighbours(p) {
                    let j = self.index(q);
                    if self.data[j] && label[j] == 0 {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
            if best.is_none_or(|(_, s)| size > s) {
                best = Some((id, size));
            }
        }
        let keep = best.map(|(id, _)| id).unwrap_or(0);
        LumenMask {
            data: label.iter().map(|&l| l != 0 && l == keep).collect(),
            ..self.clone()
        }
    }
}

//! Exact squared Euclidean distance transform (Felzenszwalb–Huttenlocher lower envelope).
//!
//! Sites are the in-image background pixels. Pixels beyond the image border are not
//! treated as background: a vessel leaving the field of view keeps its true width up to the
//! edge.

use super::mask::LumenMask;

/// Per-pixel squared distance to the nearest background pixel centre, in pixel units.
/// `f64::INFINITY` when the mask has no background at all.
#[derive(Debug, Clone)]
pub struct DistanceMap {
    width: usize,
    sq: Vec<f64>,
}

impl DistanceMap {
    pub fn squared(&self, row: usize, col: usize) -> f64 {
        self.sq[row * self.width + col]
    }

    pub fn distance(&self, row: usize, col: usize) -> f64 {
        self.squared(row, col).sqrt()
    }
}

/// 1D squared distance transform of sampled function `f` into `out`.
fn transform_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if f.iter().all(|x| x.is_infinite()) {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    // first finite parabola
    let first = f.iter().position(|x| x.is_finite()).expect("checked above");
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in (first + 1)..n {
        if f[q].is_infinite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let p = v[k];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

pub fn distance_transform(mask: &LumenMask) -> DistanceMap {
    let (w, h) = (mask.width(), mask.height());
    let mut sq: Vec<f64> = mask
        .data()
        .iter()
        .map(|&fg| if fg { f64::INFINITY } else { 0.0 })
        .collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for col in 0..w {
        for row in 0..h {
            f[row] = sq[row * w + col];
        }
        transform_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for row in 0..h {
            sq[row * w + col] = out[row];
        }
    }
    for row in 0..h {
        f[..w].copy_from_slice(&sq[row * w..(row + 1) * w]);
        transform_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        sq[row * w..(row + 1) * w].copy_from_slice(&out[..w]);
    }
    DistanceMap { width: w, sq }
}

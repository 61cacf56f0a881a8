//! Overlap blending weights.
//!
//! Each cell's extended window `[kp − a, (k+1)p + a)` overlaps its neighbour's
//! in a band of width `2a` straddling the shared boundary. Along one axis a
//! cell's weight is 1 on its retained centre `[kp + a, (k+1)p − a)` and falls
//! linearly to 0 at the window edge, evaluated at pixel centres. Sides without
//! a neighbour (image borders) keep weight 1. Per-axis weights are normalised
//! to sum to 1 and the 2D weight is their product.

use super::grid::GridGeometry;

/// Up to two `(cell, weight)` entries for one pixel along one axis.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AxisCover {
    len: usize,
    items: [(usize, f64); 2],
}

impl AxisCover {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.items[..self.len].iter().copied()
    }

    pub fn weight_of(&self, cell: usize) -> f64 {
        self.iter().find(|&(k, _)| k == cell).map_or(0.0, |(_, w)| w)
    }
}

fn raw_axis_weight(x: usize, cell: usize, cells: usize, p: usize, a: usize) -> f64 {
    let start = (cell * p) as f64;
    let lo = start - a as f64;
    let hi = start + (p + a) as f64;
    let c = x as f64 + 0.5;
    if c < lo || c > hi {
        return 0.0;
    }
    if a == 0 {
        return if c > start && c < start + p as f64 { 1.0 } else { 0.0 };
    }
    let band = 2.0 * a as f64;
    if cell > 0 && c < start + a as f64 {
        (c - lo) / band
    } else if cell + 1 < cells && c > start + (p - a) as f64 {
        (hi - c) / band
    } else if c >= start && c < start + p as f64 {
        1.0
    } else {
        0.0
    }
}

/// Precomputed per-axis blending tables for a grid geometry.
#[derive(Clone, Debug)]
pub struct BlendLayout {
    rows: Vec<AxisCover>,
    cols: Vec<AxisCover>,
    cols_per_row: usize,
}

fn axis_table(len: usize, cells: usize, p: usize, a: usize) -> Vec<AxisCover> {
    (0..len)
        .map(|x| {
            let home = x / p;
            let mut cover = AxisCover::default();
            let lo = home.saturating_sub(1);
            let hi = (home + 1).min(cells - 1);
            for k in lo..=hi {
                let w = raw_axis_weight(x, k, cells, p, a);
                if w > 0.0 {
                    cover.items[cover.len] = (k, w);
                    cover.len += 1;
                }
            }
            let total: f64 = cover.iter().map(|(_, w)| w).sum();
            for item in &mut cover.items[..cover.len] {
                item.1 /= total;
            }
            cover
        })
        .collect()
}

impl BlendLayout {
    pub fn new(geometry: &GridGeometry) -> Self {
        let p = geometry.patch_size;
        let a = geometry.overlap_pad;
        BlendLayout {
            rows: axis_table(geometry.height(), geometry.rows, p, a),
            cols: axis_table(geometry.width(), geometry.cols, p, a),
            cols_per_row: geometry.cols,
        }
    }

    pub fn row_cover(&self, row: usize) -> &AxisCover {
        &self.rows[row]
    }

    pub fn col_cover(&self, col: usize) -> &AxisCover {
        &self.cols[col]
    }

    /// Covering cells and weights at a pixel, in ascending cell order.
    pub fn pixel_weights(&self, row: usize, col: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let cc = &self.cols[col];
        self.rows[row]
            .iter()
            .flat_map(move |(i, wr)| cc.iter().map(move |(j, wc)| (i * self.cols_per_row + j, wr * wc)))
    }

    /// Weight of `cell` at pixel `(row, col)`; zero when the cell does not cover it.
    pub fn weight(&self, cell: usize, row: usize, col: usize) -> f64 {
        let (i, j) = (cell / self.cols_per_row, cell % self.cols_per_row);
        self.rows[row].weight_of(i) * self.cols[col].weight_of(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_values_for_unit_pad() {
        let g = GridGeometry::new(16, 32, 16, 1).unwrap();
        let layout = BlendLayout::new(&g);
        // Boundary between column cells 0 and 1 is at x = 16.
        let c15: Vec<_> = layout.col_cover(15).iter().collect();
        assert_eq!(c15, vec![(0, 0.75), (1, 0.25)]);
        let c16: Vec<_> = layout.col_cover(16).iter().collect();
        assert_eq!(c16, vec![(0, 0.25), (1, 0.75)]);
        assert_eq!(layout.col_cover(14).iter().collect::<Vec<_>>(), vec![(0, 1.0)]);
        // Image border: single cover at full weight.
        assert_eq!(layout.col_cover(0).iter().collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(layout.col_cover(31).iter().collect::<Vec<_>>(), vec![(1, 1.0)]);
    }

    #[test]
    fn zero_pad_tiles_exactly() {
        let g = GridGeometry::new(32, 32, 8, 0).unwrap();
        let layout = BlendLayout::new(&g);
        for x in 0..32 {
            let c: Vec<_> = layout.col_cover(x).iter().collect();
            assert_eq!(c, vec![(x / 8, 1.0)]);
        }
    }

    #[test]
    fn wide_pad_weights_sum_to_one() {
        let g = GridGeometry::new(40, 40, 8, 3).unwrap();
        let layout = BlendLayout::new(&g);
        for r in 0..40 {
            for c in 0..40 {
                let s: f64 = layout.pixel_weights(r, c).map(|(_, w)| w).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
        // Centre of cell 0 untouched.
        assert_eq!(layout.row_cover(4).iter().collect::<Vec<_>>(), vec![(0, 1.0)]);
    }
}

//! Rectangular region grid over a lon/lat bounding box.
//!
//! Regions are numbered 1..=rows*cols row-major, starting at the
//! (lon_min, lat_min) corner: columns advance eastward and rows northward.
//! Cells are half-open `[lo, hi)` on both axes except the last row and column,
//! which are closed so the whole box is covered.

use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BBox {
    pub lon_min: f64,
    pub lat_min: f64,
    pub lon_max: f64,
    pub lat_max: f64,
}

impl BBox {
    pub fn new(lon_min: f64, lat_min: f64, lon_max: f64, lat_max: f64) -> Result<Self> {
        let b = BBox { lon_min, lat_min, lon_max, lat_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lon_min, self.lat_min, self.lon_max, self.lat_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite
            || self.lon_min >= self.lon_max
            || self.lat_min >= self.lat_max
            || self.lon_min < -180.0
            || self.lon_max > 180.0
            || self.lat_min < -90.0
            || self.lat_max > 90.0
        {
            return Err(Error::DegenerateBBox);
        }
        Ok(())
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.lon_min && lon <= self.lon_max && lat >= self.lat_min && lat <= self.lat_max
    }

    pub fn width(&self) -> f64 {
        self.lon_max - self.lon_min
    }

    pub fn height(&self) -> f64 {
        self.lat_max - self.lat_min
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.lon_min + self.lon_max) / 2.0,
            (self.lat_min + self.lat_max) / 2.0,
        )
    }
}

/// 1-based region index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct RegionId(pub u16);

impl RegionId {
    pub fn get(self) -> usize {
        usize::from(self.0)
    }

    /// Zero-based position for indexing dense per-region arrays.
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionGrid {
    bbox: BBox,
    rows: usize,
    cols: usize,
}

impl RegionGrid {
    pub fn new(bbox: BBox, rows: usize, cols: usize) -> Result<Self> {
        bbox.validate()?;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "grid needs at least one row and column, got {rows}x{cols}"
            )));
        }
        if rows * cols > usize::from(u16::MAX) {
            return Err(Error::InvalidConfig(alloc::format!("{rows}x{cols} grid is too large")));
        }
        Ok(RegionGrid { bbox, rows, cols })
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn region_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> + Clone {
        (1..=self.region_count() as u16).map(RegionId)
    }

    pub fn region(&self, k: usize) -> Result<RegionId> {
        if k == 0 || k > self.region_count() {
            return Err(Error::RegionOutOfRange { region: k, count: self.region_count() });
        }
        Ok(RegionId(k as u16))
    }

    /// 1-based (row, col) of a region.
    pub fn row_col(&self, k: RegionId) -> (usize, usize) {
        let i = k.index();
        (i / self.cols + 1, i % self.cols + 1)
    }

    pub fn at(&self, row: usize, col: usize) -> RegionId {
        RegionId(((row - 1) * self.cols + col) as u16)
    }

    /// The unique cell containing the point, or `None` outside the box.
    pub fn locate(&self, lon: f64, lat: f64) -> Option<RegionId> {
        if !self.bbox.contains(lon, lat) {
            return None;
        }
        let col = cell_index(lon, self.bbox.lon_min, self.bbox.lon_max, self.cols);
        let row = cell_index(lat, self.bbox.lat_min, self.bbox.lat_max, self.rows);
        Some(self.at(row + 1, col + 1))
    }

    /// Eight neighbors under the clamped-block rule: the 3x3 block centered
    /// on the region's cell, with the center clamped into the grid interior so
    /// margin regions still get eight members, minus the region itself.
    /// Returned in ascending id order.
    pub fn neighbor_set(&self, k: RegionId) -> Result<[RegionId; 8]> {
        if self.rows < 3 || self.cols < 3 {
            return Err(Error::GridTooSmall { rows: self.rows, cols: self.cols });
        }
        self.region(k.get())?;
        let (r, c) = self.row_col(k);
        let rc = r.clamp(2, self.rows - 1);
        let cc = c.clamp(2, self.cols - 1);
        let mut out = [RegionId(0); 8];
        let mut n = 0;
        for row in rc - 1..=rc + 1 {
            for col in cc - 1..=cc + 1 {
                let id = self.at(row, col);
                if id != k {
                    out[n] = id;
                    n += 1;
                }
            }
        }
        debug_assert_eq!(n, 8);
        Ok(out)
    }
}

/// Index of the half-open cell containing `v` with boundaries
/// `lo + i * (hi - lo) / n`; the last cell is closed.
fn cell_index(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    let step = (hi - lo) / n as f64;
    let boundary = |i: usize| if i == n { hi } else { lo + i as f64 * step };
    let mut i = libm::floor((v - lo) / step) as isize;
    i = i.clamp(0, n as isize - 1);
    let mut i = i as usize;
    // The division can land one ulp off an exact boundary; settle against the
    // boundaries themselves.
    while i + 1 < n && v >= boundary(i + 1) {
        i += 1;
    }
    while i > 0 && v < boundary(i) {
        i -= 1;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beijing() -> BBox {
        BBox::new(116.27, 39.83, 116.49, 40.03).unwrap()
    }

    fn ids(xs: &[u16]) -> [RegionId; 8] {
        let mut out = [RegionId(0); 8];
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = RegionId(x);
        }
        out
    }

    #[test]
    fn four_by_four_has_sixteen_regions() {
        let g = RegionGrid::new(beijing(), 4, 4).unwrap();
        assert_eq!(g.region_count(), 16);
        assert_eq!(g.regions().count(), 16);
    }

    #[test]
    fn degenerate_bbox_rejected() {
        assert_eq!(BBox::new(1.0, 1.0, 1.0, 2.0), Err(Error::DegenerateBBox));
        assert_eq!(BBox::new(1.0, 3.0, 2.0, 2.0), Err(Error::DegenerateBBox));
        assert!(RegionGrid::new(beijing(), 0, 4).is_err());
    }

    #[test]
    fn single_cell_claims_everything() {
        let g = RegionGrid::new(beijing(), 1, 1).unwrap();
        for &(lon, lat) in &[(116.27, 39.83), (116.49, 40.03), (116.3, 39.9), (116.49, 39.83)] {
            assert_eq!(g.locate(lon, lat), Some(RegionId(1)));
        }
        assert_eq!(g.locate(116.5, 39.9), None);
    }

    #[test]
    fn corners_and_centroid() {
        let b = beijing();
        let g = RegionGrid::new(b, 4, 4).unwrap();
        assert_eq!(g.locate(b.lon_min, b.lat_min), Some(RegionId(1)));
        assert_eq!(g.locate(b.lon_max, b.lat_max), Some(RegionId(16)));
        let (clon, clat) = b.center();
        assert_eq!(g.locate(clon, clat), Some(RegionId(11)));
        // exactly representable box
        let g = RegionGrid::new(BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), 4, 4).unwrap();
        assert_eq!(g.locate(2.0, 2.0), Some(RegionId(11)));
        assert_eq!(g.locate(1.0, 0.5), Some(RegionId(2)));
        assert_eq!(g.locate(0.5, 1.0), Some(RegionId(5)));
        assert_eq!(g.locate(4.0, 0.0), Some(RegionId(4)));
    }

    #[test]
    fn neighbor_examples() {
        let g = RegionGrid::new(beijing(), 4, 4).unwrap();
        assert_eq!(g.neighbor_set(RegionId(6)).unwrap(), ids(&[1, 2, 3, 5, 7, 9, 10, 11]));
        assert_eq!(g.neighbor_set(RegionId(1)).unwrap(), ids(&[2, 3, 5, 6, 7, 9, 10, 11]));
        assert_eq!(g.neighbor_set(RegionId(2)).unwrap(), ids(&[1, 3, 5, 6, 7, 9, 10, 11]));
        assert_eq!(g.neighbor_set(RegionId(16)).unwrap(), ids(&[6, 7, 8, 10, 11, 12, 14, 15]));
    }

    #[test]
    fn neighbor_sets_always_eight_and_exclude_self() {
        let g = RegionGrid::new(beijing(), 4, 4).unwrap();
        for k in g.regions() {
            let n = g.neighbor_set(k).unwrap();
            assert!(!n.contains(&k));
            assert!(n.windows(2).all(|w| w[0] < w[1]));
        }
        // interior cells of a bigger grid get their true 8-adjacency
        let g = RegionGrid::new(beijing(), 5, 6).unwrap();
        let k = g.at(3, 3);
        let n = g.neighbor_set(k).unwrap();
        for id in n {
            let (r, c) = g.row_col(id);
            assert!(r.abs_diff(3) <= 1 && c.abs_diff(3) <= 1);
        }
    }

    #[test]
    fn small_grid_has_no_neighbors() {
        let g = RegionGrid::new(beijing(), 2, 4).unwrap();
        assert_eq!(
            g.neighbor_set(RegionId(1)),
            Err(Error::GridTooSmall { rows: 2, cols: 4 })
        );
    }
}

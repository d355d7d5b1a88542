//! Global confidence grid with exponential decay and the base-centered local
//! window fed to the map encoder.

use std::io::Write;
use std::path::Path;

use crate::error::{CuraError, Result};
use crate::geometry::{Pose2D, Vec2};
use crate::perception::lidar::LidarScan;

pub const WINDOW_SIZE: usize = 100;

/// Latest observation label of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellLabel {
    #[default]
    Unknown,
    Free,
    Hit,
}

impl CellLabel {
    pub fn sign(self) -> f64 {
        match self {
            CellLabel::Unknown => 0.0,
            CellLabel::Free => 1.0,
            CellLabel::Hit => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    /// World coordinates of the lower-left corner of cell (0, 0).
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    values: Vec<f64>,
    labels: Vec<CellLabel>,
    observed: Vec<bool>,
}

impl ConfidenceMap {
    /// All-zero map with unknown labels.
    pub fn new(origin: Vec2, resolution: f64, width: usize, height: usize) -> Self {
        let n = width * height;
        ConfidenceMap {
            origin,
            resolution,
            width,
            height,
            values: vec![0.0; n],
            labels: vec![CellLabel::Unknown; n],
            observed: vec![false; n],
        }
    }

    /// Map covering `[min, max]` at `resolution`.
    pub fn covering(min: Vec2, max: Vec2, resolution: f64) -> Self {
        let width = ((max.x - min.x) / resolution).ceil() as usize;
        let height = ((max.y - min.y) / resolution).ceil() as usize;
        ConfidenceMap::new(min, resolution, width, height)
    }

    pub fn reset(&mut self) {
        self.values.fill(0.0);
        self.labels.fill(CellLabel::Unknown);
    }

    fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    /// Cell coordinates (column, row) of a world point, possibly outside the map.
    pub fn cell_of(&self, p: Vec2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.resolution).floor() as i64,
            ((p.y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    pub fn label(&self, i: usize, j: usize) -> CellLabel {
        self.labels[self.index(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cells marked observed by the most recent update.
    pub fn observed_last_update(&self, i: usize, j: usize) -> bool {
        self.observed[self.index(i, j)]
    }

    /// Exponential-decay update: every cell traversed by a beam is set to 1
    /// and relabeled; every other cell is multiplied by `alpha`.
    pub fn update(&mut self, scan: &LidarScan, alpha: f64) {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        self.observed.fill(false);
        let start = self.cell_of(scan.origin);
        let mut hits = Vec::new();
        for k in 0..scan.beam_count() {
            let dir = Vec2::from_angle(scan.angles[k]);
            let end_point = scan.origin + dir * scan.ranges[k];
            let end = self.cell_of(end_point);
            let (width, height) = (self.width, self.height);
            let observed = &mut self.observed;
            let labels = &mut self.labels;
            bresenham(start, end, |i, j| {
                if i >= 0 && j >= 0 && (i as usize) < width && (j as usize) < height {
                    let idx = j as usize * width + i as usize;
                    observed[idx] = true;
                    labels[idx] = CellLabel::Free;
                }
            });
            if scan.is_hit(k) && self.in_bounds(end.0, end.1) {
                hits.push(self.index(end.0 as usize, end.1 as usize));
            }
        }
        // A hit cell stays a hit even if another beam passed through it.
        for idx in hits {
            self.labels[idx] = CellLabel::Hit;
        }
        for (v, &seen) in self.values.iter_mut().zip(&self.observed) {
            if seen {
                *v = 1.0;
            } else {
                *v *= alpha;
            }
        }
    }

    /// 100×100 crop of `value × label sign` centered at the base cell, axis
    /// aligned with the world. Cells outside the map read 0.
    pub fn local_window(&self, base: &Pose2D) -> LocalWindow {
        let (ci, cj) = self.cell_of(base.position());
        let half = (WINDOW_SIZE / 2) as i64;
        let mut data = vec![0.0; WINDOW_SIZE * WINDOW_SIZE];
        for r in 0..WINDOW_SIZE {
            let j = cj - half + r as i64;
            if j < 0 || j as usize >= self.height {
                continue;
            }
            for c in 0..WINDOW_SIZE {
                let i = ci - half + c as i64;
                if i < 0 || i as usize >= self.width {
                    continue;
                }
                let idx = self.index(i as usize, j as usize);
                data[r * WINDOW_SIZE + c] = self.values[idx] * self.labels[idx].sign();
            }
        }
        LocalWindow { data }
    }

    /// Writes a binary PGM (P5) of `value × 255`, top row = highest y.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut bytes = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for j in (0..self.height).rev() {
            for i in 0..self.width {
                bytes.push((self.value(i, j) * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| CuraError::io(path, e))?;
        f.write_all(&bytes).map_err(|e| CuraError::io(path, e))
    }
}

/// Integer line traversal from `a` to `b`, inclusive of both ends.
pub fn bresenham(a: (i64, i64), b: (i64, i64), mut visit: impl FnMut(i64, i64)) {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        visit(x, y);
        if x == b.0 && y == b.1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Signed confidence crop, row-major, row 0 = lowest y.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWindow {
    pub data: Vec<f64>,
}

impl LocalWindow {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * WINDOW_SIZE + col]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{OrientedRect, WorldState};
    use crate::perception::lidar::{simulate_lidar, OcclusionMode};

    fn world() -> WorldState {
        WorldState {
            base: Pose2D::new(0.05, 0.05, 0.0),
            pusher: Vec2::new(0.9, 0.0),
            object: OrientedRect::square(Pose2D::new(1.55, 0.05, 0.0), 1.0),
            obstacles: vec![],
            goal: Pose2D::new(12.0, 0.0, 0.0),
            sim_time: 0.0,
        }
    }

    fn map() -> ConfidenceMap {
        ConfidenceMap::covering(Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0), 0.1)
    }

    #[test]
    fn bresenham_endpoints_and_connectivity() {
        let mut cells = vec![];
        bresenham((0, 0), (7, -3), |i, j| cells.push((i, j)));
        assert_eq!(cells.first(), Some(&(0, 0)));
        assert_eq!(cells.last(), Some(&(7, -3)));
        for w in cells.windows(2) {
            assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
        }
    }

    #[test]
    fn observed_cells_are_one_and_others_decay() {
        let w = world();
        let scan = simulate_lidar(&w, 180, 5.0, OcclusionMode::Realistic);
        let mut m = map();
        m.update(&scan, 0.9);
        let (bi, bj) = m.cell_of(w.base.position());
        assert_eq!(m.value(bi as usize, bj as usize), 1.0);
        assert_eq!(m.label(bi as usize, bj as usize), CellLabel::Free);
        // Behind the object: never observed.
        let (oi, oj) = m.cell_of(Vec2::new(3.0, 0.05));
        assert_eq!(m.value(oi as usize, oj as usize), 0.0);
        assert_eq!(m.label(oi as usize, oj as usize), CellLabel::Unknown);
        // The object face shows up as a hit.
        let (hi, hj) = m.cell_of(Vec2::new(1.05 - 1e-9, 0.05));
        assert_eq!(m.label(hi as usize, hj as usize), CellLabel::Hit);
    }

    #[test]
    fn unobserved_decay_three_steps() {
        let w = world();
        let scan = simulate_lidar(&w, 180, 5.0, OcclusionMode::Realistic);
        let mut m = map();
        m.update(&scan, 0.9);
        let (bi, bj) = m.cell_of(Vec2::new(0.55, 0.05));
        assert_eq!(m.value(bi as usize, bj as usize), 1.0);
        let mut far = w.clone();
        far.base = Pose2D::new(-9.0, -9.0, 0.0);
        far.object = OrientedRect::square(Pose2D::new(-8.0, -9.0, 0.0), 0.2);
        let scan_far = simulate_lidar(&far, 180, 0.3, OcclusionMode::Realistic);
        for _ in 0..3 {
            m.update(&scan_far, 0.9);
        }
        assert!((m.value(bi as usize, bj as usize) - 0.729).abs() < 1e-12);
    }

    #[test]
    fn tiny_alpha_limit() {
        let w = world();
        let scan = simulate_lidar(&w, 180, 5.0, OcclusionMode::Realistic);
        let mut m = map();
        m.update(&scan, 0.5);
        m.update(&scan, 1e-300);
        for (v, seen) in m.values.iter().zip(&m.observed) {
            if *seen {
                assert_eq!(*v, 1.0);
            } else {
                assert!(*v <= 1e-300);
            }
        }
    }

    #[test]
    fn window_centered_on_constant_map() {
        let mut m = map();
        m.values.fill(1.0);
        m.labels.fill(CellLabel::Free);
        let win = m.local_window(&Pose2D::new(0.05, 0.05, 0.0));
        assert!(win.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn window_at_corner_zero_fills_three_quadrants() {
        let mut m = map();
        m.values.fill(1.0);
        m.labels.fill(CellLabel::Free);
        let win = m.local_window(&Pose2D::new(-9.95, -9.95, 0.0));
        for r in 0..WINDOW_SIZE {
            for c in 0..WINDOW_SIZE {
                let expect = if r >= 50 && c >= 50 { 1.0 } else { 0.0 };
                assert_eq!(win.get(r, c), expect, "cell ({r},{c})");
            }
        }
    }

    #[test]
    fn window_shifts_with_base() {
        let w = world();
        let scan = simulate_lidar(&w, 180, 5.0, OcclusionMode::Realistic);
        let mut m = map();
        m.update(&scan, 0.9);
        let a = m.local_window(&Pose2D::new(0.05, 0.05, 0.0));
        let b = m.local_window(&Pose2D::new(1.05, 0.05, 0.0));
        for r in 0..WINDOW_SIZE {
            for c in 0..WINDOW_SIZE - 10 {
                assert_eq!(b.get(r, c), a.get(r, c + 10));
            }
        }
    }

    #[test]
    fn pgm_header_and_size() {
        let mut m = ConfidenceMap::new(Vec2::ZERO, 0.1, 4, 3);
        m.values[0] = 1.0;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        m.write_pgm(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let header = b"P5\n4 3\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 12);
        // cell (0,0) is bottom-left, i.e. first byte of the last row.
        assert_eq!(bytes[header.len() + 8], 255);
    }
}

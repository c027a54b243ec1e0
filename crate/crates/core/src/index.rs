//! Fixed-radius candidate search for points carrying their own, shrinking,
//! support radius.
//!
//! Items are bucketed into levels by radius: level `l` holds items whose
//! radius lies in `(r0 2^{-(l+1)/s}, r0 2^{-l/s}]`. Each level is a hashed
//! uniform grid with cell side proportional to the level's largest radius,
//! so a query only inspects cells overlapping the infinity-norm box that
//! could contain an item covering the query point.
//!
//! Each item may carry a fixed-width payload stored inline with its cell, so
//! a query scans contiguous memory instead of chasing ids.

use rustc_hash::FxHashMap;

/// Relative slack applied to the per-level search radius so that rounding
/// in the level assignment can never drop an item.
const PAD: f64 = 1.0 + 1e-9;

#[derive(Debug, Clone, Default)]
struct Cell {
    ids: Vec<u32>,
    data: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Level {
    reach: f64,
    side: f64,
    cells: FxHashMap<Box<[i64]>, Cell>,
}

#[derive(Debug, Clone)]
pub struct SupportIndex {
    dimension: usize,
    stride: usize,
    base_radius: f64,
    levels_per_octave: f64,
    subdivisions: f64,
    levels: Vec<Level>,
    len: usize,
}

impl SupportIndex {
    /// `base_radius` bounds every radius that will be inserted.
    pub fn new(dimension: usize, base_radius: f64) -> Self {
        Self::with_payload(dimension, base_radius, 0)
    }

    /// Index whose items each carry `stride` values.
    pub fn with_payload(dimension: usize, base_radius: f64, stride: usize) -> Self {
        let (levels_per_octave, subdivisions) = if dimension == 1 { (4.0, 4.0) } else { (2.0, 1.0) };
        Self {
            dimension,
            stride,
            base_radius,
            levels_per_octave,
            subdivisions,
            levels: Vec::new(),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    fn level_of(&self, radius: f64) -> usize {
        let l = (self.levels_per_octave * (self.base_radius / radius).log2()).floor();
        if l.is_finite() && l > 0.0 {
            l as usize
        } else {
            0
        }
    }

    fn ensure_level(&mut self, l: usize) {
        while self.levels.len() <= l {
            let k = self.levels.len() as f64;
            let reach = self.base_radius * 2f64.powf(-k / self.levels_per_octave) * PAD;
            self.levels.push(Level {
                reach,
                side: reach / self.subdivisions,
                cells: FxHashMap::default(),
            });
        }
    }

    /// Inserts `id` at `point`; it will be reported for every query within
    /// infinity-norm distance `radius`.
    pub fn insert(&mut self, id: u32, point: &[f64], radius: f64) {
        self.insert_with(id, point, radius, &[]);
    }

    /// As [`insert`](Self::insert), storing `payload` (exactly `stride` values).
    pub fn insert_with(&mut self, id: u32, point: &[f64], radius: f64, payload: &[f64]) {
        debug_assert!(radius <= self.base_radius * PAD);
        assert_eq!(payload.len(), self.stride, "payload width");
        let l = self.level_of(radius);
        self.ensure_level(l);
        let level = &mut self.levels[l];
        let key: Box<[i64]> = point.iter().map(|&x| (x / level.side).floor() as i64).collect();
        let cell = level.cells.entry(key).or_default();
        cell.ids.push(id);
        cell.data.extend_from_slice(payload);
        self.len += 1;
    }

    /// Calls `visit` once for every item that may cover `x`: a superset of
    /// `{id : ||point_id - x||_inf <= radius_id}`. Ids are visited at most once.
    pub fn for_each_candidate(&self, x: &[f64], mut visit: impl FnMut(u32)) {
        self.for_each_entry(x, |id, _| visit(id));
    }

    /// Candidate visit with the stored payload of each item.
    pub fn for_each_entry(&self, x: &[f64], mut visit: impl FnMut(u32, &[f64])) {
        let stride = self.stride;
        self.for_each_cell(x, |ids, data| {
            if stride == 0 {
                ids.iter().for_each(|&id| visit(id, &[]));
            } else {
                for (&id, p) in ids.iter().zip(data.chunks_exact(stride)) {
                    visit(id, p);
                }
            }
        });
    }

    /// Candidate visit a cell at a time: the ids of the cell and their
    /// payloads, concatenated.
    #[inline]
    pub fn for_each_cell(&self, x: &[f64], mut visit: impl FnMut(&[u32], &[f64])) {
        let d = self.dimension;
        let mut lo = [0i64; 8];
        let mut hi = [0i64; 8];
        let mut cur = [0i64; 8];
        let mut heap = Vec::new();
        let wide = d > lo.len();
        if wide {
            heap.resize(3 * d, 0i64);
        }
        for level in &self.levels {
            let (lo, hi, cur): (&mut [i64], &mut [i64], &mut [i64]) = if wide {
                let (a, rest) = heap.split_at_mut(d);
                let (b, c) = rest.split_at_mut(d);
                (a, b, c)
            } else {
                (&mut lo[..d], &mut hi[..d], &mut cur[..d])
            };
            for j in 0..d {
                lo[j] = ((x[j] - level.reach) / level.side).floor() as i64;
                hi[j] = ((x[j] + level.reach) / level.side).floor() as i64;
            }
            cur.copy_from_slice(lo);
            loop {
                if let Some(cell) = level.cells.get(&*cur) {
                    visit(&cell.ids, &cell.data);
                }
                // odometer increment over the cell box
                let mut j = 0;
                while j < d {
                    if cur[j] < hi[j] {
                        cur[j] += 1;
                        break;
                    }
                    cur[j] = lo[j];
                    j += 1;
                }
                if j == d {
                    break;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn candidates_cover_exact_set() {
        for d in 1..=3 {
            let mut rng = crate::rng::stream(1, d as u64);
            let mut idx = SupportIndex::new(d, 1.0);
            let mut pts = Vec::new();
            let mut radii = Vec::new();
            for i in 1..=3000u32 {
                let p: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let r = (i as f64).powf(-0.3);
                idx.insert(i - 1, &p, r);
                pts.push(p);
                radii.push(r);
            }
            for _ in 0..300 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
                let mut seen = vec![0u8; pts.len()];
                idx.for_each_candidate(&x, |id| seen[id as usize] += 1);
                for (k, p) in pts.iter().enumerate() {
                    assert!(seen[k] <= 1);
                    let dist = p.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    if dist <= radii[k] {
                        assert_eq!(seen[k], 1, "d={d} missing {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn payload_travels_with_its_id() {
        let mut rng = crate::rng::stream(2, 0);
        let mut idx = SupportIndex::with_payload(2, 1.0, 3);
        for i in 0..2000u32 {
            let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            idx.insert_with(i, &p, 0.5, &[p[0], p[1], i as f64]);
        }
        let mut count = 0;
        idx.for_each_entry(&[0.1, -0.3], |id, data| {
            assert_eq!(data[2], id as f64);
            count += 1;
        });
        assert!(count > 0);
    }
}

//! Semi-global cost aggregation.
//!
//! For every path direction `r` the scanline recurrence
//!
//! ```text
//! L_r(p, d) = C(p, d) + min(L_r(p-r, d),
//!                           L_r(p-r, d±1) + p1,
//!                           min_k L_r(p-r, k) + p2) - min_k L_r(p-r, k)
//! ```
//!
//! is run from the image border, and the path volumes are summed in a fixed
//! direction order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image_io::CostVolume;

/// Path directions as `(dx, dy)`. The first four are used for 4-path runs.
pub const DIRECTIONS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgmParams {
    /// Penalty for a disparity change of one.
    pub p1: f32,
    /// Penalty for larger jumps.
    pub p2: f32,
    /// 4 or 8.
    pub num_paths: usize,
    /// Map the input volume onto `[0, 1]` before aggregating.
    pub normalize: bool,
}

impl Default for SgmParams {
    fn default() -> Self {
        Self {
            p1: 0.03,
            p2: 0.3,
            num_paths: 8,
            normalize: true,
        }
    }
}

impl SgmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p1.is_finite() && self.p2.is_finite()) {
            return Err(Error::Param("SGM penalties must be finite".into()));
        }
        if !(0.0 <= self.p1 && self.p1 <= self.p2) {
            return Err(Error::Param(format!(
                "SGM penalties need 0 <= p1 <= p2, got p1={} p2={}",
                self.p1, self.p2
            )));
        }
        if self.p1 > 0.0 && self.p2 <= 0.0 {
            return Err(Error::Param("p2 must be positive when p1 is".into()));
        }
        if self.num_paths != 4 && self.num_paths != 8 {
            return Err(Error::Param(format!(
                "num_paths must be 4 or 8, got {}",
                self.num_paths
            )));
        }
        Ok(())
    }
}

/// Affine map of the whole volume onto `[0, 1]`; a constant volume becomes zeros.
pub fn normalize_costs(cv: &CostVolume) -> CostVolume {
    let (lo, hi) = cv
        .costs()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &c| {
            (lo.min(c), hi.max(c))
        });
    let (lo, hi) = (lo.min(cv.border_cost()), hi.max(cv.border_cost()));
    let span = f64::from(hi) - f64::from(lo);
    let map = |c: f32| {
        if span > 0.0 {
            ((f64::from(c) - f64::from(lo)) / span) as f32
        } else {
            0.0
        }
    };
    CostVolume::from_raw(
        cv.width(),
        cv.height(),
        cv.d_max(),
        map(cv.border_cost()),
        cv.costs().iter().map(|&c| map(c)).collect(),
    )
}

/// Sum of the path volumes over `params.num_paths` directions.
///
/// The result carries `num_paths` times the (possibly normalized) input
/// border cost as its border cost.
pub fn aggregate(cv: &CostVolume, params: &SgmParams) -> Result<CostVolume> {
    params.validate()?;
    cv.check_finite()?;
    let normalized;
    let input = if params.normalize {
        normalized = normalize_costs(cv);
        &normalized
    } else {
        cv
    };
    let dirs = &DIRECTIONS[..params.num_paths];
    let paths: Vec<Vec<f32>> = dirs
        .par_iter()
        .map(|&dir| path_costs(input, params.p1, params.p2, dir))
        .collect();

    // f64 accumulation keeps the sum of up to eight f32 terms exact before
    // the single rounding back to f32
    let mut acc = vec![0.0f64; input.costs().len()];
    for path in &paths {
        for (a, &v) in acc.iter_mut().zip(path) {
            *a += f64::from(v);
        }
    }
    let out: Vec<f32> = acc.into_iter().map(|v| v as f32).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("aggregated cost overflowed".into()));
    }
    Ok(CostVolume::from_raw(
        input.width(),
        input.height(),
        input.d_max(),
        input.border_cost() * params.num_paths as f32,
        out,
    ))
}

/// One path volume `L_r` for direction `dir = (dx, dy)`, no normalization.
pub fn aggregate_path(
    cv: &CostVolume,
    p1: f32,
    p2: f32,
    dir: (isize, isize),
) -> Result<CostVolume> {
    SgmParams {
        p1,
        p2,
        num_paths: 4,
        normalize: false,
    }
    .validate()?;
    if dir == (0, 0) || dir.0.abs() > 1 || dir.1.abs() > 1 {
        return Err(Error::Param(format!("bad path direction {dir:?}")));
    }
    cv.check_finite()?;
    Ok(CostVolume::from_raw(
        cv.width(),
        cv.height(),
        cv.d_max(),
        cv.border_cost(),
        path_costs(cv, p1, p2, dir),
    ))
}

fn path_costs(cv: &CostVolume, p1: f32, p2: f32, (dx, dy): (isize, isize)) -> Vec<f32> {
    let (w, h, depth) = (cv.width(), cv.height(), cv.depth());
    let mut lr = vec![0.0f32; cv.costs().len()];
    let xs: Vec<usize> = if dx < 0 {
        (0..w).rev().collect()
    } else {
        (0..w).collect()
    };
    let ys: Vec<usize> = if dy < 0 {
        (0..h).rev().collect()
    } else {
        (0..h).collect()
    };
    let mut prev = vec![0.0f32; depth];

    for &y in &ys {
        for &x in &xs {
            let idx = (y * w + x) * depth;
            let cost = cv.pixel(x, y);
            let px = x as isize - dx;
            let py = y as isize - dy;
            if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                lr[idx..idx + depth].copy_from_slice(cost);
                continue;
            }
            let pidx = (py as usize * w + px as usize) * depth;
            prev.copy_from_slice(&lr[pidx..pidx + depth]);
            let min_prev = prev.iter().copied().fold(f32::INFINITY, f32::min);
            let jump = min_prev + p2;
            for d in 0..depth {
                let mut best = prev[d].min(jump);
                if d > 0 {
                    best = best.min(prev[d - 1] + p1);
                }
                if d + 1 < depth {
                    best = best.min(prev[d + 1] + p1);
                }
                lr[idx + d] = cost[d] + (best - min_prev);
            }
        }
    }
    lr
}

#[cfg(test)]
mod tests {
    use super::*;

    fn volume(w: usize, h: usize, d_max: usize, f: impl Fn(usize) -> f32) -> CostVolume {
        let n = w * h * (d_max + 1);
        CostVolume::new(w, h, d_max, 10.0, (0..n).map(f).collect()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SgmParams::default().validate().is_ok());
        let bad = [
            SgmParams {
                p1: 0.5,
                p2: 0.1,
                ..SgmParams::default()
            },
            SgmParams {
                p1: -0.1,
                ..SgmParams::default()
            },
            SgmParams {
                num_paths: 6,
                ..SgmParams::default()
            },
            SgmParams {
                p2: f32::NAN,
                ..SgmParams::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        let zero = SgmParams {
            p1: 0.0,
            p2: 0.0,
            ..SgmParams::default()
        };
        assert!(zero.validate().is_ok());
    }

    #[test]
    fn normalization_examples() {
        let cv = CostVolume::new(3, 1, 0, 80.0, vec![0.0, 40.0, 80.0]).unwrap();
        let n = normalize_costs(&cv);
        assert_eq!(n.costs(), &[0.0, 0.5, 1.0]);
        assert_eq!(n.border_cost(), 1.0);

        let cv = CostVolume::new(2, 1, 0, 1.0, vec![-1.0, 1.0]).unwrap();
        assert_eq!(normalize_costs(&cv).get(0, 0, 0), 0.0);

        let flat = CostVolume::new(2, 1, 1, 3.0, vec![3.0; 4]).unwrap();
        assert!(normalize_costs(&flat).costs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn zero_penalties_scale_input() {
        let cv = volume(5, 4, 3, |i| ((i * 37) % 23) as f32 * 0.173);
        let params = SgmParams {
            p1: 0.0,
            p2: 0.0,
            num_paths: 8,
            normalize: false,
        };
        let agg = aggregate(&cv, &params).unwrap();
        for (a, c) in agg.costs().iter().zip(cv.costs()) {
            assert_eq!(*a, 8.0 * c);
        }
    }

    #[test]
    fn constant_volume_stays_flat() {
        let cv = volume(6, 5, 4, |_| 2.5);
        let agg = aggregate(
            &cv,
            &SgmParams {
                normalize: false,
                ..SgmParams::default()
            },
        )
        .unwrap();
        for y in 0..5 {
            for x in 0..6 {
                let px = agg.pixel(x, y);
                assert!(px.iter().all(|&v| v == px[0]));
            }
        }
    }

    #[test]
    fn path_start_copies_cost() {
        let cv = volume(4, 3, 2, |i| (i % 5) as f32);
        let l = aggregate_path(&cv, 0.5, 1.0, (1, 0)).unwrap();
        for y in 0..3 {
            assert_eq!(l.pixel(0, y), cv.pixel(0, y));
        }
        let l = aggregate_path(&cv, 0.5, 1.0, (-1, -1)).unwrap();
        assert_eq!(l.pixel(3, 1), cv.pixel(3, 1));
        assert_eq!(l.pixel(1, 2), cv.pixel(1, 2));
    }

    #[test]
    fn bad_direction() {
        let cv = volume(2, 2, 1, |_| 0.0);
        assert!(aggregate_path(&cv, 0.1, 0.2, (0, 0)).is_err());
        assert!(aggregate_path(&cv, 0.1, 0.2, (2, 0)).is_err());
    }
}

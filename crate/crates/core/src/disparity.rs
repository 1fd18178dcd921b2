//! Disparity extraction from a cost volume and post-processing.

use rayon::prelude::*;

use crate::error::{dim_err, Error, Result};
use crate::image_io::{CostVolume, DisparityMap};

pub const DEFAULT_LR_TOLERANCE: f32 = 1.0;

/// Per-pixel argmin over disparities; ties go to the smaller disparity.
pub fn wta(cv: &CostVolume) -> DisparityMap {
    let data = cv
        .costs()
        .par_chunks(cv.depth())
        .map(|costs| Some(argmin(costs) as f32))
        .collect();
    DisparityMap::from_raw(cv.width(), cv.height(), data)
}

#[inline]
pub(crate) fn argmin(costs: &[f32]) -> usize {
    let mut best = 0;
    for (d, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = d;
        }
    }
    best
}

/// Offset of the parabola vertex through `(-1, c_minus)`, `(0, c0)`,
/// `(1, c_plus)`, clamped to `[-0.5, 0.5]`. `None` if the fit is not convex.
pub fn parabola_offset(c_minus: f32, c0: f32, c_plus: f32) -> Option<f32> {
    let denom = 2.0 * (f64::from(c_minus) - 2.0 * f64::from(c0) + f64::from(c_plus));
    if denom <= 0.0 {
        return None;
    }
    let offset = (f64::from(c_minus) - f64::from(c_plus)) / denom;
    Some(offset.clamp(-0.5, 0.5) as f32)
}

/// Parabolic refinement around each integer disparity. Pixels at either end of
/// the disparity range, invalid pixels and non-convex fits are left unchanged.
pub fn subpixel(cv: &CostVolume, d: &DisparityMap) -> Result<DisparityMap> {
    if cv.width() != d.width() || cv.height() != d.height() {
        return Err(dim_err("cost volume and disparity map differ in size"));
    }
    let w = cv.width();
    let data = d
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let v = v?;
            let di = v.round();
            if di != v || di < 1.0 || di as usize >= cv.d_max() {
                return Some(v);
            }
            let k = di as usize;
            let (x, y) = (i % w, i / w);
            let c = cv.pixel(x, y);
            match parabola_offset(c[k - 1], c[k], c[k + 1]) {
                Some(off) => Some((v + off).max(0.0)),
                None => Some(v),
            }
        })
        .collect();
    Ok(DisparityMap::from_raw(w, cv.height(), data))
}

/// Right-view volume `C_R(x, d) = C_L(x + d, d)`, border cost where `x + d`
/// leaves the image.
pub fn right_cost_volume(left: &CostVolume) -> CostVolume {
    let (w, h, depth) = (left.width(), left.height(), left.depth());
    let mut costs = vec![left.border_cost(); left.costs().len()];
    costs
        .par_chunks_mut(w * depth)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                for d in 0..depth {
                    if x + d < w {
                        row[x * depth + d] = left.get(x + d, y, d);
                    }
                }
            }
        });
    CostVolume::from_raw(w, h, left.d_max(), left.border_cost(), costs)
}

/// Keeps `dL(p)` only where `|dL(p) - dR(p - dL(p))| <= tol`. Lookups that
/// fall outside the right image, or onto invalid right pixels, invalidate.
/// Values are never altered.
pub fn lr_check(left: &DisparityMap, right: &DisparityMap, tol: f32) -> Result<DisparityMap> {
    if !left.same_shape(right) {
        return Err(dim_err("left and right disparity maps differ in size"));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::Param(format!(
            "tolerance {tol} must be non-negative"
        )));
    }
    let w = left.width();
    let data = left
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let dl = v?;
            let (x, y) = (i % w, i / w);
            let xr = x as f64 - f64::from(dl).round();
            if xr < 0.0 {
                return None;
            }
            let dr = right.get(xr as usize, y)?;
            ((dl - dr).abs() <= tol).then_some(dl)
        })
        .collect();
    Ok(DisparityMap::from_raw(w, left.height(), data))
}

/// Per-pixel lower median of the valid values across `maps`.
pub fn median_fuse(maps: &[DisparityMap]) -> Result<DisparityMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Param("median fusion needs at least one map".into()))?;
    if let Some(m) = maps.iter().find(|m| !m.same_shape(first)) {
        return Err(dim_err(format!(
            "cannot fuse {}x{} with {}x{}",
            first.width(),
            first.height(),
            m.width(),
            m.height()
        )));
    }
    let n = first.data().len();
    let mut vals = Vec::with_capacity(maps.len());
    let data = (0..n)
        .map(|i| {
            vals.clear();
            vals.extend(maps.iter().filter_map(|m| m.data()[i]));
            if vals.is_empty() {
                return None;
            }
            vals.sort_by(f32::total_cmp);
            Some(vals[(vals.len() - 1) / 2])
        })
        .collect();
    Ok(DisparityMap::from_raw(first.width(), first.height(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pixel(costs: &[f32]) -> CostVolume {
        CostVolume::new(1, 1, costs.len() - 1, 100.0, costs.to_vec()).unwrap()
    }

    #[test]
    fn wta_examples() {
        assert_eq!(wta(&one_pixel(&[5.0, 1.0, 3.0])).get(0, 0), Some(1.0));
        assert_eq!(wta(&one_pixel(&[2.0, 2.0, 7.0])).get(0, 0), Some(0.0));
    }

    #[test]
    fn parabola_examples() {
        assert_eq!(parabola_offset(4.0, 1.0, 4.0), Some(0.0));
        let off = parabola_offset(3.0, 1.0, 2.0).unwrap();
        assert!((off - 1.0 / 6.0).abs() < 1e-7);
        assert_eq!(parabola_offset(1.0, 1.0, 1.0), None);
        assert_eq!(parabola_offset(1.0, 3.0, 1.5), None);
        // vertex beyond the neighbor is clamped
        assert_eq!(parabola_offset(10.0, 1.0, 1.0), Some(0.5));
    }

    #[test]
    fn subpixel_skips_range_ends() {
        let cv = one_pixel(&[1.0, 3.0, 4.0]);
        let d = wta(&cv);
        assert_eq!(subpixel(&cv, &d).unwrap().get(0, 0), Some(0.0));
        let cv = one_pixel(&[4.0, 3.0, 1.0]);
        assert_eq!(subpixel(&cv, &wta(&cv)).unwrap().get(0, 0), Some(2.0));
        let cv = one_pixel(&[3.0, 1.0, 2.0, 9.0]);
        let refined = subpixel(&cv, &wta(&cv)).unwrap().get(0, 0).unwrap();
        assert!((refined - (1.0 + 1.0 / 6.0)).abs() < 1e-6);
    }

    #[test]
    fn lr_check_examples() {
        let mut left = vec![None; 10];
        let mut right = vec![None; 10];
        left[7] = Some(5.0);
        right[2] = Some(5.0);
        let l = DisparityMap::new(10, 1, left.clone()).unwrap();
        let r = DisparityMap::new(10, 1, right.clone()).unwrap();
        assert_eq!(lr_check(&l, &r, 1.0).unwrap().get(7, 0), Some(5.0));

        right[2] = Some(9.0);
        let r = DisparityMap::new(10, 1, right).unwrap();
        assert_eq!(lr_check(&l, &r, 1.0).unwrap().get(7, 0), None);

        left[3] = Some(4.0);
        let l = DisparityMap::new(10, 1, left).unwrap();
        let r = DisparityMap::filled(10, 1, Some(4.0)).unwrap();
        assert_eq!(lr_check(&l, &r, 1.0).unwrap().get(3, 0), None);
    }

    #[test]
    fn right_volume_index_identity() {
        let n = 10 * 4;
        let mut costs: Vec<f32> = (0..n).map(|i| i as f32 * 0.01).collect();
        costs[7 * 4 + 3] = 0.2;
        let cv = CostVolume::new(10, 1, 3, 9.0, costs).unwrap();
        let r = right_cost_volume(&cv);
        assert_eq!(r.get(4, 0, 3), 0.2);
        for x in 0..10 {
            assert_eq!(r.get(x, 0, 0), cv.get(x, 0, 0));
        }
        assert_eq!(r.get(9, 0, 1), 9.0);
    }

    #[test]
    fn median_examples() {
        let m = |v: Option<f32>| DisparityMap::new(1, 1, vec![v]).unwrap();
        let fused = median_fuse(&[m(Some(3.0)), m(Some(5.0)), m(Some(100.0))]).unwrap();
        assert_eq!(fused.get(0, 0), Some(5.0));
        let fused = median_fuse(&[m(Some(4.0)), m(None), m(Some(6.0))]).unwrap();
        assert_eq!(fused.get(0, 0), Some(4.0));
        let fused = median_fuse(&[m(None), m(None)]).unwrap();
        assert_eq!(fused.get(0, 0), None);
    }

    #[test]
    fn median_errors() {
        assert!(median_fuse(&[]).is_err());
        let a = DisparityMap::filled(2, 1, Some(0.0)).unwrap();
        let b = DisparityMap::filled(1, 2, Some(0.0)).unwrap();
        assert!(matches!(median_fuse(&[a, b]), Err(Error::Dimension(_))));
    }
}

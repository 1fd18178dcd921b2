//! End-to-end matching of one rectified pair.

use crate::census::{census_cost_volume, census_transform, DEFAULT_RADIUS};
use crate::cnn::{cnn_cost_volume, forward_features, FeatureNetwork};
use crate::disparity::{lr_check, right_cost_volume, subpixel, wta, DEFAULT_LR_TOLERANCE};
use crate::error::{dim_err, Error, Result};
use crate::image_io::{CostVolume, DisparityMap, GrayImage};
use crate::sgm::{aggregate, SgmParams};

#[derive(Debug, Clone, Copy)]
pub enum MatchCost<'a> {
    Census { radius: usize },
    Cnn(&'a FeatureNetwork<f32>),
}

impl Default for MatchCost<'_> {
    fn default() -> Self {
        MatchCost::Census {
            radius: DEFAULT_RADIUS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatchParams<'a> {
    pub d_max: usize,
    pub cost: MatchCost<'a>,
    /// `None` skips aggregation and takes the winner straight from the raw costs.
    pub sgm: Option<SgmParams>,
    pub subpixel: bool,
    /// `None` skips the left-right check.
    pub lr_tol: Option<f32>,
}

impl<'a> MatchParams<'a> {
    pub fn new(d_max: usize, cost: MatchCost<'a>) -> Self {
        Self {
            d_max,
            cost,
            sgm: Some(SgmParams::default()),
            subpixel: false,
            lr_tol: Some(DEFAULT_LR_TOLERANCE),
        }
    }
}

pub fn cost_volume(
    left: &GrayImage,
    right: &GrayImage,
    d_max: usize,
    cost: MatchCost<'_>,
) -> Result<CostVolume> {
    if (left.width(), left.height()) != (right.width(), right.height()) {
        return Err(dim_err(format!(
            "left image is {}x{} but right image is {}x{}",
            left.width(),
            left.height(),
            right.width(),
            right.height()
        )));
    }
    match cost {
        MatchCost::Census { radius } => census_cost_volume(
            &census_transform(left, radius)?,
            &census_transform(right, radius)?,
            d_max,
        ),
        MatchCost::Cnn(net) => cnn_cost_volume(
            &forward_features(net, left)?,
            &forward_features(net, right)?,
            d_max,
        ),
    }
}

/// Cost volume, optional SGM, winner-take-all, optional parabolic refinement
/// and optional left-right check.
pub fn match_pair(
    left: &GrayImage,
    right: &GrayImage,
    params: &MatchParams<'_>,
) -> Result<DisparityMap> {
    if params.d_max >= left.width() {
        return Err(Error::Param(format!(
            "d_max {} must be below the image width {}",
            params.d_max,
            left.width()
        )));
    }
    let raw = cost_volume(left, right, params.d_max, params.cost)?;
    let cv = match &params.sgm {
        Some(sgm) => aggregate(&raw, sgm)?,
        None => raw,
    };
    let pick = |cv: &CostVolume| {
        if params.subpixel {
            subpixel(cv, &wta(cv))
        } else {
            Ok(wta(cv))
        }
    };
    let left_map = pick(&cv)?;
    match params.lr_tol {
        Some(tol) => lr_check(&left_map, &pick(&right_cost_volume(&cv))?, tol),
        None => Ok(left_map),
    }
}

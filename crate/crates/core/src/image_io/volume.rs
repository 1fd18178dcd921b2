use crate::error::{dim_err, Error, Result};

/// Dense matching costs indexed `(row, column, disparity)`, lower is better.
///
/// Entries for infeasible correspondences (`x - d < 0`, or a pixel whose
/// descriptor is undefined) hold `border_cost`, which is the largest cost the
/// metric can produce.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    d_max: usize,
    border_cost: f32,
    costs: Vec<f32>,
}

impl CostVolume {
    pub fn new(
        width: usize,
        height: usize,
        d_max: usize,
        border_cost: f32,
        costs: Vec<f32>,
    ) -> Result<Self> {
        if costs.len() != width * height * (d_max + 1) {
            return Err(dim_err(format!(
                "cost volume has {} entries, expected {}x{}x{}",
                costs.len(),
                width,
                height,
                d_max + 1
            )));
        }
        if !border_cost.is_finite() {
            return Err(Error::Data("border cost must be finite".into()));
        }
        if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Data(format!("non-finite cost at index {i}")));
        }
        Ok(Self {
            width,
            height,
            d_max,
            border_cost,
            costs,
        })
    }

    pub(crate) fn from_raw(
        width: usize,
        height: usize,
        d_max: usize,
        border_cost: f32,
        costs: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(costs.len(), width * height * (d_max + 1));
        Self {
            width,
            height,
            d_max,
            border_cost,
            costs,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    /// Number of disparity planes, `d_max + 1`.
    pub fn depth(&self) -> usize {
        self.d_max + 1
    }

    pub fn border_cost(&self) -> f32 {
        self.border_cost
    }

    pub fn costs(&self) -> &[f32] {
        &self.costs
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: usize) -> f32 {
        self.costs[(y * self.width + x) * self.depth() + d]
    }

    /// All disparity costs at one pixel.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let n = self.depth();
        let start = (y * self.width + x) * n;
        &self.costs[start..start + n]
    }

    pub fn same_shape(&self, other: &CostVolume) -> bool {
        self.width == other.width && self.height == other.height && self.d_max == other.d_max
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.costs.iter().position(|c| !c.is_finite()) {
            Some(i) => Err(Error::Data(format!("non-finite cost at index {i}"))),
            None => Ok(()),
        }
    }
}

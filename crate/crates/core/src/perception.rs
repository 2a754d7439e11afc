//! The state transformer: reduces the raw occupancy grid to the interpretable
//! feature pair (ball column, paddle column) by row-band zoning. The paddle
//! band is rows 36..=39, the brick band rows 0..=12; only cells between the
//! bands can be attributed to the ball.

use thiserror::Error;

use crate::breakout::{Observation, FIELD_HEIGHT, FIELD_WIDTH};

pub const BRICK_BAND_BOTTOM: usize = 12;
pub const PADDLE_BAND_TOP: usize = 36;

/// Column value used when no cell can be attributed to an object.
pub const ABSENT: i32 = -1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PerceptionError {
    #[error("grid is {height}x{width}, expected {FIELD_HEIGHT}x{FIELD_WIDTH}")]
    BadShape { height: usize, width: usize },
}

/// The interpretable feature pair extracted from one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Features {
    pub ball_x: i32,
    pub paddle_x: i32,
}

impl Features {
    /// Feature vector layout used in state vectors: (ball_x, paddle_x).
    pub fn to_vec(self) -> Vec<i32> {
        vec![self.ball_x, self.paddle_x]
    }
}

/// Extracts (ball_x, paddle_x) from a raw row-major occupancy grid.
/// `paddle_x` is the mean column (rounded down) of occupied cells in the
/// paddle band; `ball_x` the mean column of occupied cells outside both
/// bands, or -1 when none exist.
pub fn transform(cells: &[u8], height: usize, width: usize) -> Result<Features, PerceptionError> {
    if height != FIELD_HEIGHT as usize || width != FIELD_WIDTH as usize || cells.len() != height * width
    {
        return Err(PerceptionError::BadShape { height, width });
    }
    let mean_cols = |rows: std::ops::RangeInclusive<usize>| -> i32 {
        let mut sum = 0i64;
        let mut n = 0i64;
        for row in rows {
            let line = &cells[row * width..(row + 1) * width];
            for (col, &c) in line.iter().enumerate() {
                if c != 0 {
                    sum += col as i64;
                    n += 1;
                }
            }
        }
        if n == 0 {
            ABSENT
        } else {
            (sum / n) as i32
        }
    };
    Ok(Features {
        ball_x: mean_cols(BRICK_BAND_BOTTOM + 1..=PADDLE_BAND_TOP - 1),
        paddle_x: mean_cols(PADDLE_BAND_TOP..=FIELD_HEIGHT as usize - 1),
    })
}

/// Infallible variant for grids produced by the simulator.
pub fn transform_observation(obs: &Observation) -> Features {
    transform(obs.cells(), obs.height(), obs.width()).expect("simulator grids are well-formed")
}

//! Deterministic desk-scale brick-breaking environment: a 72x40 cell field,
//! six brick rows worth (7,7,4,4,1,1) points over two screens (864 points
//! max), five lives, unit diagonal ball velocity, and a paddle that moves two
//! columns per action. The whole game is a pure function of (seed, action
//! sequence).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::state::Action;

pub const FIELD_WIDTH: i32 = 72;
pub const FIELD_HEIGHT: i32 = 40;
pub const BRICK_ROWS: usize = 6;
pub const BRICK_COLS: usize = 18;
pub const BRICK_WIDTH: i32 = 4;
/// Bricks occupy field rows 6..=11.
pub const BRICK_TOP_ROW: i32 = 6;
/// Points per brick by row, top to bottom.
pub const ROW_VALUES: [u32; BRICK_ROWS] = [7, 7, 4, 4, 1, 1];
pub const PADDLE_ROW: i32 = 38;
pub const PADDLE_WIDTH: i32 = 6;
pub const PADDLE_SPEED: i32 = 2;
/// A ball reaching this row costs a life.
pub const LOSS_ROW: i32 = 39;
pub const SERVE_ROW: i32 = 20;
pub const SERVE_MIN_COL: i32 = 8;
pub const SERVE_MAX_COL: i32 = 63;
pub const INITIAL_LIVES: u32 = 5;
/// 2 screens x 18 bricks x (7+7+4+4+1+1) points.
pub const MAX_SCORE: u32 = 864;
pub const DEFAULT_FRAME_CAP: u32 = 18_000;
pub const MAX_FRAME_CAP: u32 = 108_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("step called on a finished game")]
    GameOver,
}

/// Occupancy grid: one cell per field position, 0 background / 1 object,
/// row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    cells: Vec<u8>,
}

impl Observation {
    pub fn width(&self) -> usize {
        FIELD_WIDTH as usize
    }

    pub fn height(&self) -> usize {
        FIELD_HEIGHT as usize
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * FIELD_WIDTH as usize + col]
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.cells.chunks_exact(FIELD_WIDTH as usize)
    }

    /// Plain-text frame dump, one character per cell, for debugging.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((FIELD_WIDTH as usize + 1) * FIELD_HEIGHT as usize);
        for row in self.rows() {
            for &c in row {
                out.push(if c == 0 { '.' } else { '#' });
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ball {
    pub x: i32,
    pub y: i32,
    pub dx: i32,
    pub dy: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub observation: Observation,
    pub points: u32,
    pub life_lost: bool,
    pub terminated: bool,
    pub truncated: bool,
}

/// Full game state. One instance per run; clones are independent games.
#[derive(Debug, Clone)]
pub struct Breakout {
    bricks: [bool; BRICK_ROWS * BRICK_COLS],
    screen: u8,
    ball: Option<Ball>,
    paddle_left: i32,
    lives: u32,
    score: u32,
    frame: u32,
    frame_cap: u32,
    terminated: bool,
    truncated: bool,
    rng: ChaCha8Rng,
}

impl Breakout {
    /// Fresh game: full brick wall, five lives, paddle centered, ball absent
    /// (FIRE serves).
    pub fn new(seed: u64, frame_cap: u32) -> Breakout {
        assert!(
            frame_cap >= 1 && frame_cap <= MAX_FRAME_CAP,
            "frame cap must be in 1..={MAX_FRAME_CAP}"
        );
        Breakout {
            bricks: [true; BRICK_ROWS * BRICK_COLS],
            screen: 1,
            ball: None,
            paddle_left: (FIELD_WIDTH - PADDLE_WIDTH) / 2,
            lives: INITIAL_LIVES,
            score: 0,
            frame: 0,
            frame_cap,
            terminated: false,
            truncated: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn observation(&self) -> Observation {
        let mut cells = vec![0u8; (FIELD_WIDTH * FIELD_HEIGHT) as usize];
        for r in 0..BRICK_ROWS {
            for c in 0..BRICK_COLS {
                if self.bricks[r * BRICK_COLS + c] {
                    let row = BRICK_TOP_ROW as usize + r;
                    let start = row * FIELD_WIDTH as usize + c * BRICK_WIDTH as usize;
                    cells[start..start + BRICK_WIDTH as usize].fill(1);
                }
            }
        }
        let paddle_start = (PADDLE_ROW * FIELD_WIDTH + self.paddle_left) as usize;
        cells[paddle_start..paddle_start + PADDLE_WIDTH as usize].fill(1);
        if let Some(b) = self.ball {
            cells[(b.y * FIELD_WIDTH + b.x) as usize] = 1;
        }
        Observation { cells }
    }

    /// Advances the game one frame. Errors when the game is already over.
    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.is_over() {
            return Err(EnvError::GameOver);
        }

        let mut served = false;
        match action {
            Action::Left => {
                self.paddle_left = (self.paddle_left - PADDLE_SPEED).max(0);
            }
            Action::Right => {
                self.paddle_left = (self.paddle_left + PADDLE_SPEED).min(FIELD_WIDTH - PADDLE_WIDTH);
            }
            Action::Fire => {
                if self.ball.is_none() {
                    self.serve();
                    served = true;
                }
            }
            Action::Noop => {}
        }

        let mut points = 0u32;
        let mut life_lost = false;

        if !served {
            if let Some(mut ball) = self.ball {
                // Walls reflect before any brick contact is resolved.
                let mut nx = ball.x + ball.dx;
                if nx < 0 || nx >= FIELD_WIDTH {
                    ball.dx = -ball.dx;
                    nx = ball.x + ball.dx;
                }
                let mut ny = ball.y + ball.dy;
                if ny < 0 {
                    ball.dy = -ball.dy;
                    ny = ball.y + ball.dy;
                }

                if let Some(value) = self.take_brick(nx, ny) {
                    points = value;
                    ball.dy = -ball.dy;
                } else if ny == PADDLE_ROW
                    && nx >= self.paddle_left
                    && nx < self.paddle_left + PADDLE_WIDTH
                {
                    ball.dy = -ball.dy;
                    match (nx - self.paddle_left) / 2 {
                        0 => ball.dx = -1,
                        2 => ball.dx = 1,
                        _ => {}
                    }
                }

                ball.x = nx;
                ball.y = ny;
                if ny >= LOSS_ROW {
                    life_lost = true;
                    self.lives -= 1;
                    self.ball = None;
                } else {
                    self.ball = Some(ball);
                }
            }
        }

        self.score += points;
        if points > 0 && self.bricks.iter().all(|&b| !b) {
            if self.screen == 1 {
                self.bricks = [true; BRICK_ROWS * BRICK_COLS];
                self.screen = 2;
            } else {
                self.terminated = true;
            }
        }
        if self.lives == 0 || self.score >= MAX_SCORE {
            self.terminated = true;
        }
        self.frame += 1;
        if !self.terminated && self.frame >= self.frame_cap {
            self.truncated = true;
        }

        debug_assert!(!(points > 0 && life_lost));
        Ok(StepResult {
            observation: self.observation(),
            points,
            life_lost,
            terminated: self.terminated,
            truncated: self.truncated,
        })
    }

    fn serve(&mut self) {
        let x = self.rng.random_range(SERVE_MIN_COL..=SERVE_MAX_COL);
        let dx = if self.rng.random_bool(0.5) { 1 } else { -1 };
        self.ball = Some(Ball { x, y: SERVE_ROW, dx, dy: 1 });
    }

    /// Removes the brick covering (x, y) if one is alive there and returns
    /// its row value.
    fn take_brick(&mut self, x: i32, y: i32) -> Option<u32> {
        let r = y - BRICK_TOP_ROW;
        if !(0..BRICK_ROWS as i32).contains(&r) {
            return None;
        }
        let c = x / BRICK_WIDTH;
        let idx = r as usize * BRICK_COLS + c as usize;
        if self.bricks[idx] {
            self.bricks[idx] = false;
            Some(ROW_VALUES[r as usize])
        } else {
            None
        }
    }

    pub fn ball(&self) -> Option<Ball> {
        self.ball
    }

    pub fn paddle_left(&self) -> i32 {
        self.paddle_left
    }

    pub fn lives(&self) -> u32 {
        self.lives
    }

    pub fn score(&self) -> u32 {
        self.score
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub fn screen(&self) -> u8 {
        self.screen
    }

    pub fn brick_alive(&self, row: usize, col: usize) -> bool {
        self.bricks[row * BRICK_COLS + col]
    }

    pub fn bricks_remaining(&self) -> usize {
        self.bricks.iter().filter(|&&b| b).count()
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_over(&self) -> bool {
        self.terminated || self.truncated
    }

    #[cfg(test)]
    fn set_ball(&mut self, x: i32, y: i32, dx: i32, dy: i32) {
        self.ball = Some(Ball { x, y, dx, dy });
    }

    #[cfg(test)]
    fn clear_bricks(&mut self) {
        self.bricks = [false; BRICK_ROWS * BRICK_COLS];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng as _;

    fn random_action(rng: &mut StdRng) -> Action {
        Action::from_id(rng.random_range(0..4)).unwrap()
    }

    #[test]
    fn reset_is_deterministic_and_fully_stocked() {
        let a = Breakout::new(41, DEFAULT_FRAME_CAP);
        let b = Breakout::new(41, DEFAULT_FRAME_CAP);
        assert_eq!(a.observation(), b.observation());
        assert_eq!(a.lives(), 5);
        assert_eq!(a.score(), 0);
        assert_eq!(a.frame(), 0);
        assert!(a.ball().is_none());

        let obs = a.observation();
        let brick_cells: usize = (BRICK_TOP_ROW..BRICK_TOP_ROW + BRICK_ROWS as i32)
            .map(|row| (0..FIELD_WIDTH).filter(|&c| obs.get(row as usize, c as usize) == 1).count())
            .sum();
        assert_eq!(brick_cells, 108 * 4);
        assert_eq!(a.bricks_remaining(), 108);
    }

    #[test]
    fn whole_game_is_a_pure_function_of_seed_and_actions() {
        let mut rng = StdRng::seed_from_u64(17);
        let actions: Vec<Action> = (0..3000).map(|_| random_action(&mut rng)).collect();
        let run = |seed: u64| {
            let mut env = Breakout::new(seed, DEFAULT_FRAME_CAP);
            let mut results = Vec::new();
            for &a in &actions {
                if env.is_over() {
                    break;
                }
                let r = env.step(a).unwrap();
                results.push((r.observation, r.points, r.life_lost, r.terminated, r.truncated));
            }
            results
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn side_walls_reflect() {
        let mut env = Breakout::new(1, DEFAULT_FRAME_CAP);
        env.set_ball(0, 20, -1, 1);
        env.step(Action::Noop).unwrap();
        let b = env.ball().unwrap();
        assert_eq!((b.x, b.dx), (1, 1));

        env.set_ball(FIELD_WIDTH - 1, 20, 1, 1);
        env.step(Action::Noop).unwrap();
        let b = env.ball().unwrap();
        assert_eq!((b.x, b.dx), (FIELD_WIDTH - 2, -1));
    }

    #[test]
    fn ceiling_reflects() {
        let mut env = Breakout::new(1, DEFAULT_FRAME_CAP);
        env.clear_bricks();
        env.set_ball(20, 0, 1, -1);
        env.step(Action::Noop).unwrap();
        let b = env.ball().unwrap();
        assert_eq!((b.y, b.dy), (1, 1));
    }

    #[test]
    fn brick_hit_scores_row_value_and_reflects() {
        let mut env = Breakout::new(1, DEFAULT_FRAME_CAP);
        // Entering the bottom brick row (row 11, value 1).
        env.set_ball(20, 12, 1, -1);
        let r = env.step(Action::Noop).unwrap();
        assert_eq!(r.points, 1);
        assert_eq!(env.score(), 1);
        assert!(!env.brick_alive(5, 21 / BRICK_WIDTH as usize));
        let b = env.ball().unwrap();
        assert_eq!((b.x, b.y, b.dy), (21, 11, 1));

        // The cell is empty now; a second pass scores nothing.
        env.set_ball(20, 12, 1, -1);
        let r = env.step(Action::Noop).unwrap();
        assert_eq!(r.points, 0);

        // Top row is worth 7.
        env.set_ball(40, 7, 1, -1);
        let r = env.step(Action::Noop).unwrap();
        assert_eq!(r.points, 7);
    }

    #[test]
    fn missing_the_paddle_costs_a_life() {
        let mut env = Breakout::new(1, DEFAULT_FRAME_CAP);
        assert_eq!(env.paddle_left(), 33);
        env.set_ball(10, 38, 1, 1);
        let r = env.step(Action::Noop).unwrap();
        assert!(r.life_lost);
        assert_eq!(r.points, 0);
        assert_eq!(env.lives(), 4);
        assert!(env.ball().is_none());
    }

    #[test]
    fn paddle_bounce_sets_direction_by_third() {
        for (offset, dx_in, dx_out) in [(0, 1, -1), (1, 1, -1), (2, 1, 1), (3, -1, -1), (4, -1, 1), (5, -1, 1)] {
            let mut env = Breakout::new(1, DEFAULT_FRAME_CAP);
            let paddle = env.paddle_left();
            // One diagonal step lands exactly on paddle cell `offset`.
            env.set_ball(paddle + offset - dx_in, PADDLE_ROW - 1, dx_in, 1);
            let r = env.step(Action::Noop).unwrap();
            assert!(!r.life_lost);
            let b = env.ball().unwrap();
            assert_eq!(b.y, PADDLE_ROW);
            assert_eq!(b.dy, -1, "offset {offset}");
            assert_eq!(b.dx, dx_out, "offset {offset}");
        }
    }

    #[test]
    fn paddle_stays_inside_the_field() {
        let mut env = Breakout::new(1, DEFAULT_FRAME_CAP);
        for _ in 0..50 {
            env.step(Action::Left).unwrap();
        }
        assert_eq!(env.paddle_left(), 0);
        for _ in 0..80 {
            env.step(Action::Right).unwrap();
        }
        assert_eq!(env.paddle_left(), FIELD_WIDTH - PADDLE_WIDTH);
    }

    #[test]
    fn fire_serves_only_when_ball_absent() {
        let mut env = Breakout::new(3, DEFAULT_FRAME_CAP);
        env.step(Action::Fire).unwrap();
        let served = env.ball().unwrap();
        assert_eq!(served.y, SERVE_ROW);
        assert_eq!(served.dy, 1);
        assert!((SERVE_MIN_COL..=SERVE_MAX_COL).contains(&served.x));
        assert!(served.dx == 1 || served.dx == -1);

        // FIRE with a ball in play changes nothing but the frame counter.
        let before = env.ball().unwrap();
        env.step(Action::Fire).unwrap();
        let after = env.ball().unwrap();
        assert_eq!((after.dx, after.dy), (before.dx, before.dy));
        assert_eq!((after.x, after.y), (before.x + before.dx, before.y + before.dy));
    }

    #[test]
    fn serve_columns_cover_the_allowed_range() {
        let mut seen_min = i32::MAX;
        let mut seen_max = i32::MIN;
        for seed in 0..200 {
            let mut env = Breakout::new(seed, DEFAULT_FRAME_CAP);
            env.step(Action::Fire).unwrap();
            let b = env.ball().unwrap();
            seen_min = seen_min.min(b.x);
            seen_max = seen_max.max(b.x);
        }
        assert!(seen_min >= SERVE_MIN_COL && seen_max <= SERVE_MAX_COL);
        assert!(seen_max - seen_min > 40, "serves should spread over the range");
    }

    #[test]
    fn stepping_a_finished_game_is_an_error() {
        let mut env = Breakout::new(5, DEFAULT_FRAME_CAP);
        // Lose all five lives by serving straight down with the paddle away.
        while !env.is_over() {
            for _ in 0..20 {
                if env.paddle_left() < FIELD_WIDTH - PADDLE_WIDTH {
                    env.step(Action::Right).unwrap();
                }
            }
            if env.is_over() {
                break;
            }
            env.step(Action::Fire).unwrap();
            while env.ball().is_some() && !env.is_over() {
                env.step(Action::Noop).unwrap();
            }
        }
        assert!(env.terminated());
        assert_eq!(env.lives(), 0);
        assert_eq!(env.step(Action::Noop), Err(EnvError::GameOver));
    }

    #[test]
    fn frame_cap_truncates() {
        let mut env = Breakout::new(5, 50);
        for _ in 0..50 {
            env.step(Action::Noop).unwrap();
        }
        assert!(env.truncated());
        assert!(!env.terminated());
        assert_eq!(env.step(Action::Noop), Err(EnvError::GameOver));
    }

    #[test]
    fn conservation_and_exclusivity_under_random_play() {
        let mut rng = StdRng::seed_from_u64(99);
        for seed in 0..8 {
            let mut env = Breakout::new(seed, DEFAULT_FRAME_CAP);
            let mut expected_score = 0u32;
            let mut prev = (env.screen(), snapshot(&env));
            for _ in 0..10_000 {
                if env.is_over() {
                    break;
                }
                let r = env.step(random_action(&mut rng)).unwrap();
                // Brute-force recount: removed bricks this step, valued by row.
                let now = (env.screen(), snapshot(&env));
                let removed_value: u32 = if prev.0 == now.0 {
                    (0..BRICK_ROWS * BRICK_COLS)
                        .filter(|&i| prev.1[i] && !now.1[i])
                        .map(|i| ROW_VALUES[i / BRICK_COLS])
                        .sum()
                } else {
                    // Screen flip: the board refilled, so the only removal is
                    // whatever was still alive before minus a full wall.
                    (0..BRICK_ROWS * BRICK_COLS)
                        .filter(|&i| prev.1[i])
                        .map(|i| ROW_VALUES[i / BRICK_COLS])
                        .sum()
                };
                assert_eq!(r.points, removed_value);
                expected_score += removed_value;
                assert_eq!(env.score(), expected_score);
                assert!(!(r.points > 0 && r.life_lost));
                if let Some(b) = env.ball() {
                    assert!((0..FIELD_WIDTH).contains(&b.x));
                    assert!((0..LOSS_ROW).contains(&b.y));
                }
                prev = now;
            }
        }
    }

    fn snapshot(env: &Breakout) -> Vec<bool> {
        (0..BRICK_ROWS)
            .flat_map(|r| (0..BRICK_COLS).map(move |c| (r, c)))
            .map(|(r, c)| env.brick_alive(r, c))
            .collect()
    }

    #[test]
    fn ball_stays_contained_with_ideal_tracking_and_no_bricks() {
        let mut env = Breakout::new(11, MAX_FRAME_CAP);
        env.clear_bricks();
        for _ in 0..10_000 {
            let action = match env.ball() {
                None => Action::Fire,
                Some(b) => {
                    let center = env.paddle_left() + PADDLE_WIDTH / 2;
                    if center < b.x {
                        Action::Right
                    } else if center > b.x {
                        Action::Left
                    } else {
                        Action::Noop
                    }
                }
            };
            let r = env.step(action).unwrap();
            assert!(!r.life_lost);
            if let Some(b) = env.ball() {
                assert!((0..FIELD_WIDTH).contains(&b.x), "x out of bounds: {b:?}");
                assert!((0..LOSS_ROW).contains(&b.y), "y out of bounds: {b:?}");
            }
        }
    }

    #[test]
    fn every_game_ends_within_the_frame_cap() {
        let mut rng = StdRng::seed_from_u64(4);
        for seed in 0..20 {
            let mut env = Breakout::new(seed, 400);
            let mut steps = 0;
            while !env.is_over() {
                env.step(random_action(&mut rng)).unwrap();
                steps += 1;
                assert!(steps <= 400);
            }
            assert!(env.terminated() || env.truncated());
        }
    }

    #[test]
    fn text_rendering_matches_the_grid() {
        let env = Breakout::new(1, DEFAULT_FRAME_CAP);
        let text = env.observation().to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), FIELD_HEIGHT as usize);
        assert!(lines.iter().all(|l| l.len() == FIELD_WIDTH as usize));
        assert_eq!(lines[6], "#".repeat(FIELD_WIDTH as usize));
        assert_eq!(lines[0], ".".repeat(FIELD_WIDTH as usize));
        let paddle_row = lines[PADDLE_ROW as usize];
        assert_eq!(paddle_row.matches('#').count(), PADDLE_WIDTH as usize);
    }
}

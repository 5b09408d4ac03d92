//! Finite integer time windows `[lo, hi]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WindowError {
    #[error("empty window: lo={lo} > hi={hi}")]
    Empty { lo: i64, hi: i64 },
    #[error("cannot parse window {0:?}; expected LO:HI")]
    Parse(String),
}

/// Nonempty integer interval of time indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i64, i64)", into = "(i64, i64)")]
pub struct Window {
    lo: i64,
    hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self, WindowError> {
        if lo > hi {
            return Err(WindowError::Empty { lo, hi });
        }
        Ok(Window { lo, hi })
    }

    /// `[-n, n]`.
    pub fn symmetric(n: u32) -> Self {
        Window {
            lo: -(n as i64),
            hi: n as i64,
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    /// Number of integer points.
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = i64> {
        self.lo..=self.hi
    }
}

impl TryFrom<(i64, i64)> for Window {
    type Error = WindowError;
    fn try_from(v: (i64, i64)) -> Result<Self, Self::Error> {
        Window::new(v.0, v.1)
    }
}

impl From<Window> for (i64, i64) {
    fn from(w: Window) -> Self {
        (w.lo, w.hi)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl FromStr for Window {
    type Err = WindowError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| WindowError::Parse(s.to_string()))?;
        let lo = a
            .trim()
            .parse()
            .map_err(|_| WindowError::Parse(s.to_string()))?;
        let hi = b
            .trim()
            .parse()
            .map_err(|_| WindowError::Parse(s.to_string()))?;
        Window::new(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_len() {
        let w: Window = "-3:4".parse().unwrap();
        assert_eq!((w.lo(), w.hi(), w.len()), (-3, 4, 8));
        assert!("4:-3".parse::<Window>().is_err());
        assert!("4".parse::<Window>().is_err());
    }

    #[test]
    fn single_point() {
        let w = Window::new(7, 7).unwrap();
        assert_eq!(w.iter().collect::<Vec<_>>(), vec![7]);
    }
}

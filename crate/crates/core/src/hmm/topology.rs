use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many previous states condition the next transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    First,
    Second,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::InvalidConfig(format!("order must be 1 or 2, got {v}"))),
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        match o {
            Order::First => 1,
            Order::Second => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Left-to-right: each state may stay or advance; the last state absorbs.
    Linear,
    /// Ring: each state may step back, stay, or advance, wrapping around.
    Circular,
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Shape::Linear),
            "circular" => Ok(Shape::Circular),
            _ => Err(Error::InvalidConfig(format!("unknown shape {s:?}"))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Linear => "linear",
            Shape::Circular => "circular",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub order: Order,
    pub shape: Shape,
    pub n_states: usize,
}

impl Topology {
    pub fn new(order: Order, shape: Shape, n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidConfig("topology needs at least one state".into()));
        }
        Ok(Self { order, shape, n_states })
    }

    /// Sorted successor set of state `i`.
    pub fn adjacency(&self, i: usize) -> Vec<usize> {
        let n = self.n_states;
        let mut out = match self.shape {
            Shape::Circular => vec![(i + n - 1) % n, i, (i + 1) % n],
            Shape::Linear if i + 1 < n => vec![i, i + 1],
            Shape::Linear => vec![i],
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn allows(&self, from: usize, to: usize) -> bool {
        let n = self.n_states;
        match self.shape {
            Shape::Circular => from == to || (from + 1) % n == to || (to + 1) % n == from,
            Shape::Linear => to == from || to == from + 1,
        }
    }

    /// True when every state can reach every other state.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.n_states;
        (0..n).all(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(s) = stack.pop() {
                for t in self.adjacency(s) {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            seen.iter().all(|&v| v)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_adjacency_wraps() {
        let t = Topology::new(Order::Second, Shape::Circular, 6).unwrap();
        assert_eq!(t.adjacency(0), vec![0, 1, 5]);
        assert_eq!(t.adjacency(3), vec![2, 3, 4]);
        assert_eq!(t.adjacency(5), vec![0, 4, 5]);
        assert!(t.allows(5, 0) && t.allows(0, 5) && !t.allows(0, 3));
    }

    #[test]
    fn linear_adjacency_absorbs() {
        let t = Topology::new(Order::First, Shape::Linear, 4).unwrap();
        assert_eq!(t.adjacency(0), vec![0, 1]);
        assert_eq!(t.adjacency(3), vec![3]);
        assert!(!t.allows(1, 0));
    }

    #[test]
    fn small_rings_deduplicate() {
        let t = Topology::new(Order::First, Shape::Circular, 2).unwrap();
        assert_eq!(t.adjacency(0), vec![0, 1]);
        let t = Topology::new(Order::First, Shape::Circular, 1).unwrap();
        assert_eq!(t.adjacency(0), vec![0]);
    }

    #[test]
    fn connectivity() {
        for n in 2..8 {
            assert!(Topology::new(Order::Second, Shape::Circular, n).unwrap().is_strongly_connected());
            assert!(!Topology::new(Order::Second, Shape::Linear, n).unwrap().is_strongly_connected());
        }
    }

    #[test]
    fn order_serde() {
        assert_eq!(serde_json::to_string(&Order::Second).unwrap(), "2");
        assert!(serde_json::from_str::<Order>("3").is_err());
    }
}

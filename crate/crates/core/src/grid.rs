use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-to-maturity nodes on which "for any x >= 0" identities are tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct XGrid {
    nodes: Vec<f64>,
}

impl XGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("grid needs at least two nodes".into()));
        }
        if nodes.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument("grid nodes must be finite and >= 0".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("grid nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    /// `n` Chebyshev-Lobatto nodes on `[lo, hi]`, endpoints included.
    pub fn chebyshev(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument(format!("bad Chebyshev grid: n={n}, [{lo}, {hi}]")));
        }
        let mut nodes: Vec<f64> = (0..n)
            .map(|k| {
                let c = (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
                lo + 0.5 * (hi - lo) * (1.0 - c)
            })
            .collect();
        nodes[0] = lo;
        nodes[n - 1] = hi;
        Self::new(nodes)
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument(format!("bad uniform grid: n={n}, [{lo}, {hi}]")));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|k| lo + h * k as f64).collect();
        nodes[n - 1] = hi;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Grid with each interval bisected (`2n - 1` nodes).
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(*self.nodes.last().unwrap());
        Self { nodes }
    }

    /// Enforces the `2 d + 2` node minimum for a `d`-factor family.
    pub fn require_for_dim(&self, d: usize) -> Result<()> {
        if self.nodes.len() < 2 * d + 2 {
            return Err(Error::InvalidArgument(format!(
                "grid has {} nodes, a {d}-factor family needs at least {}",
                self.nodes.len(),
                2 * d + 2
            )));
        }
        Ok(())
    }
}

impl Default for XGrid {
    /// 40 Chebyshev nodes on `[0, 5]` years.
    fn default() -> Self {
        Self::chebyshev(40, 0.0, 5.0).expect("static grid")
    }
}

impl TryFrom<Vec<f64>> for XGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<XGrid> for Vec<f64> {
    fn from(g: XGrid) -> Self {
        g.nodes
    }
}

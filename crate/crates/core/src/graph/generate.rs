use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, NodeId};

/// Field of the 100-node desk preset: the 4 km x 1 km aspect ratio scaled so
/// that node density matches 500 nodes on 4 km x 1 km.
pub const DESK_FIELD_WIDTH_KM: f64 = 1.788_854_381_999_831_8;
pub const DESK_FIELD_HEIGHT_KM: f64 = 0.447_213_595_499_957_9;

const MAX_ATTEMPTS: u32 = 100;

/// Uniform placement in a rectangle; nodes within `radius` of each other are
/// joined by an edge weighted with their Euclidean distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomGeometric {
    pub n: usize,
    pub width: f64,
    pub height: f64,
    pub radius: f64,
    /// 0-based source ids.
    pub sources: Vec<NodeId>,
    pub seed: u64,
}

impl RandomGeometric {
    pub fn new(n: usize, width: f64, height: f64, radius: f64, sources: Vec<NodeId>, seed: u64) -> Self {
        Self { n, width, height, radius, sources, seed }
    }

    pub fn generate(&self) -> Result<Graph, GraphError> {
        self.generate_with_seed().map(|(g, _)| g)
    }

    /// Retries with `seed, seed + 1, ...` until the placement is connected.
    /// Returns the graph together with the seed that produced it.
    pub fn generate_with_seed(&self) -> Result<(Graph, u64), GraphError> {
        if self.n < 2 {
            return Err(GraphError::InvalidParameter(format!("n = {} < 2", self.n)));
        }
        for (what, v) in [("width", self.width), ("height", self.height), ("radius", self.radius)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GraphError::InvalidParameter(format!("{what} = {v}")));
            }
        }
        for attempt in 0..MAX_ATTEMPTS {
            let seed = self.seed.wrapping_add(u64::from(attempt));
            let positions = self.place(seed);
            let edges = threshold_edges(&positions, self.radius);
            match Graph::new(self.n, &edges, &self.sources, Some(positions)) {
                Ok(g) => return Ok((g, seed)),
                Err(GraphError::DisconnectedGraph { .. }) | Err(GraphError::NonPositiveWeight(..)) => {
                    continue
                }
                Err(e) => return Err(e),
            }
        }
        Err(GraphError::ConnectivityFailure { attempts: MAX_ATTEMPTS, seed: self.seed })
    }

    fn place(&self, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.n)
            .map(|_| {
                let x = rng.gen::<f64>() * self.width;
                let y = rng.gen::<f64>() * self.height;
                [x, y]
            })
            .collect()
    }
}

fn threshold_edges(positions: &[[f64; 2]], radius: f64) -> Vec<(NodeId, NodeId, f64)> {
    let mut edges = Vec::new();
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let d = (positions[i][0] - positions[j][0]).hypot(positions[i][1] - positions[j][1]);
            if d <= radius {
                edges.push((i, j, d));
            }
        }
    }
    edges
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineSource {
    Leftmost,
    Rightmost,
}

impl std::str::FromStr for LineSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leftmost" | "left" => Ok(Self::Leftmost),
            "rightmost" | "right" => Ok(Self::Rightmost),
            other => Err(format!("expected leftmost|rightmost, got {other}")),
        }
    }
}

/// Path graph `1 - 2 - ... - n` with unit weights and one source at an end.
pub fn line(n: usize, source: LineSource) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameter(format!("line graph needs n >= 2, got {n}")));
    }
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    let src = match source {
        LineSource::Leftmost => 0,
        LineSource::Rightmost => n - 1,
    };
    Graph::new(n, &edges, &[src], None)
}

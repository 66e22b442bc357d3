//! On-disk artifacts shared by the subcommands.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rko_route::rko::{decode, encode_tour, CostMode};
use rko_route::{Chromosome, Instance, Node, Tour};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// `tour.json`: visit order as `[seam, direction, tool, config, position]`
/// with external seam labels, plus cost and feasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourFile {
    pub nodes: Vec<[u32; 5]>,
    pub cost: f64,
    pub feasible: bool,
}

impl TourFile {
    pub fn from_tour(tour: &Tour, instance: &Instance) -> Self {
        Self {
            nodes: tour.nodes.iter().map(|n| instance.external(n).to_array()).collect(),
            cost: tour.total_cost,
            feasible: tour.feasible,
        }
    }

    /// Maps the stored nodes back onto `instance` and re-costs them.
    pub fn to_tour(&self, instance: &Instance, mode: CostMode) -> Result<Tour> {
        let nodes = self
            .nodes
            .iter()
            .map(|a| {
                let ext = Node::from_array(*a);
                instance.internal(&ext).with_context(|| format!("node {ext} is not part of the instance"))
            })
            .collect::<Result<Vec<_>>>()?;
        let tour = Tour::from_nodes(nodes, instance, mode);
        if !tour.is_complete(instance) {
            bail!("tour does not visit every seam of the instance exactly once");
        }
        Ok(tour)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Loads a flat TOML parameter file, or the defaults when no path is given.
pub fn read_params<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A relink endpoint: either a chromosome (JSON array of keys) or a `tour.json`.
pub fn read_endpoint(path: &Path, instance: &Instance) -> Result<Chromosome> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.is_array() {
        let chrom: Chromosome = serde_json::from_value(value)?;
        let chrom = Chromosome::new(chrom.into_keys())?;
        decode(&chrom, instance).with_context(|| format!("{} does not fit the instance", path.display()))?;
        return Ok(chrom);
    }
    let tour: TourFile = serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
    let tour = tour.to_tour(instance, CostMode::HomeAnchored)?;
    Ok(encode_tour(&tour.nodes, instance, None)?)
}

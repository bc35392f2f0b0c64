//! Synthetic homophily benchmark generator.
//!
//! Users are assigned round-robin to communities. Each attribute label is
//! community-aligned with probability `homophily` and uniform otherwise;
//! same-community pairs connect with probability `p_in` and other pairs with
//! `p_in * (1 - homophily)`. A fixed fraction of attribute cells is then
//! blanked to create the inference targets.

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, AttributedGraph};
use crate::numerics::Rng;

/// In-community edge probability is chosen so the expected degree lands
/// around this value, independent of graph size.
const TARGET_MEAN_DEGREE: f64 = 10.0;

/// A generated graph together with the pre-blanking label assignments.
#[derive(Debug, Clone)]
pub struct SyntheticGraph {
    pub graph: AttributedGraph,
    /// Full `N x L` assignments before any cell was blanked.
    pub ground_truth: Vec<usize>,
    /// Community index of each user.
    pub communities: Vec<usize>,
}

pub fn generate_synthetic(
    n_users: usize,
    schema: &AttributeSchema,
    n_communities: usize,
    homophily: f64,
    missing_rate: f64,
    rng: &mut Rng,
) -> Result<SyntheticGraph> {
    if n_communities == 0 {
        return Err(Error::Config("need at least one community".into()));
    }
    let min_labels = (0..schema.n_types())
        .map(|j| schema.label_count(j))
        .min()
        .unwrap_or(0);
    if n_communities > min_labels {
        return Err(Error::Config(format!(
            "{n_communities} communities cannot align with an attribute of only {min_labels} labels"
        )));
    }
    if !(0.0..=1.0).contains(&homophily) {
        return Err(Error::Config(format!(
            "homophily must be in [0, 1], got {homophily}"
        )));
    }
    if !(0.0..=1.0).contains(&missing_rate) {
        return Err(Error::Config(format!(
            "missing rate must be in [0, 1], got {missing_rate}"
        )));
    }

    // Expected number of neighbors per unit of p_in, for an average user.
    let community_size = n_users as f64 / n_communities as f64;
    let neighbor_mass =
        (community_size - 1.0) + (n_users as f64 - community_size) * (1.0 - homophily);
    if neighbor_mass <= 0.0 {
        return Err(Error::Config(format!(
            "graph of {n_users} users in {n_communities} communities has no possible edges"
        )));
    }
    let p_in = (TARGET_MEAN_DEGREE / neighbor_mass).min(1.0);
    if p_in * neighbor_mass < 1.0 {
        return Err(Error::Config(format!(
            "expected degree {:.3} is below 1; the graph would be essentially edgeless",
            p_in * neighbor_mass
        )));
    }
    let p_out = p_in * (1.0 - homophily);

    let communities: Vec<usize> = (0..n_users).map(|u| u % n_communities).collect();

    let l = schema.n_types();
    let mut ground_truth = Vec::with_capacity(n_users * l);
    for &community in &communities {
        for j in 0..l {
            let label = if rng.next_f64() < homophily {
                community + 1
            } else {
                1 + rng.below(schema.label_count(j))
            };
            ground_truth.push(label);
        }
    }

    let mut edges = Vec::new();
    for u in 0..n_users {
        for v in (u + 1)..n_users {
            let p = if communities[u] == communities[v] {
                p_in
            } else {
                p_out
            };
            if rng.next_f64() < p {
                edges.push((u, v));
            }
        }
    }

    let mut assignments = ground_truth.clone();
    let n_missing = (missing_rate * (n_users * l) as f64).floor() as usize;
    let mut cells: Vec<usize> = (0..n_users * l).collect();
    rng.shuffle(&mut cells);
    for &cell in cells.iter().take(n_missing) {
        assignments[cell] = 0;
    }

    let graph = AttributedGraph::new(n_users, edges, schema.clone(), assignments)?;
    Ok(SyntheticGraph {
        graph,
        ground_truth,
        communities,
    })
}

/// The stock benchmark configuration used by the acceptance suite and the
/// examples: 300 users, 3 communities, attribute types with 3/4/5 labels,
/// homophily 0.8, missing rate 0.3.
pub fn benchmark_schema() -> AttributeSchema {
    AttributeSchema::from_counts(&[("alpha", 3), ("beta", 4), ("gamma", 5)])
        .expect("static schema is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> AttributeSchema {
        benchmark_schema()
    }

    #[test]
    fn full_homophily_aligns_all_labels() {
        let s = schema();
        let out = generate_synthetic(30, &s, 3, 1.0, 0.0, &mut Rng::new(1)).unwrap();
        for u in 0..30 {
            for j in 0..s.n_types() {
                assert_eq!(out.graph.assignment(u, j), out.communities[u] + 1);
            }
        }
        // No cross-community edges at homophily 1.
        for &(u, v) in out.graph.edges() {
            assert_eq!(out.communities[u], out.communities[v]);
        }
    }

    #[test]
    fn missing_rate_blanks_exact_count() {
        let s = schema();
        // 100 users x 3 types = 300 cells; 0.3 blanks exactly 90.
        let out = generate_synthetic(100, &s, 3, 0.8, 0.3, &mut Rng::new(2)).unwrap();
        let missing = out.graph.assignments().iter().filter(|&&a| a == 0).count();
        assert_eq!(missing, 90);
        // Ground truth has no blanks.
        assert!(out.ground_truth.iter().all(|&a| a != 0));
    }

    #[test]
    fn same_seed_reproduces_graph() {
        let s = schema();
        let a = generate_synthetic(60, &s, 3, 0.8, 0.3, &mut Rng::new(9)).unwrap();
        let b = generate_synthetic(60, &s, 3, 0.8, 0.3, &mut Rng::new(9)).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.ground_truth, b.ground_truth);
    }

    #[test]
    fn too_many_communities_is_rejected() {
        let s = schema();
        // Smallest attribute has 3 labels, so 4 communities cannot align.
        assert!(generate_synthetic(30, &s, 4, 0.8, 0.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn degenerate_graph_is_rejected() {
        let s = schema();
        assert!(generate_synthetic(1, &s, 1, 0.5, 0.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn benchmark_scale_has_reasonable_degree() {
        let s = schema();
        let out = generate_synthetic(300, &s, 3, 0.8, 0.3, &mut Rng::new(4)).unwrap();
        let mean_degree = 2.0 * out.graph.edges().len() as f64 / 300.0;
        assert!(
            (5.0..20.0).contains(&mean_degree),
            "mean degree {mean_degree}"
        );
    }
}

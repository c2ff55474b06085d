//! Route selection (direct, widest-bottleneck, shortest-latency) and the
//! fair-share effective rate of a transfer over its route.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LinkId, Network, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("no route from '{src}' to '{dst}'")]
    NoRoute { src: String, dst: String },
    #[error("unknown routing model '{0}'")]
    UnknownModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingModel {
    Direct,
    WidestPath,
    ShortestPath,
}

impl RoutingModel {
    pub fn from_name(name: &str) -> Result<Self, RouteError> {
        match name {
            "direct" => Ok(Self::Direct),
            "widest_path" => Ok(Self::WidestPath),
            "shortest_path" => Ok(Self::ShortestPath),
            other => Err(RouteError::UnknownModel(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::WidestPath => "widest_path",
            Self::ShortestPath => "shortest_path",
        }
    }
}

/// An ordered chain of links from src to dst with no repeated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub links: Vec<LinkId>,
    pub nodes: Vec<NodeId>,
    /// Total latency in integer microseconds; charged once per transfer.
    pub latency_us: u64,
    /// Minimum link bandwidth along the route, MB/s.
    pub bottleneck: f64,
}

impl Route {
    pub fn latency_seconds(&self) -> f64 {
        self.latency_us as f64 / 1e6
    }
}

fn latency_us(seconds: f64) -> u64 {
    (seconds * 1e6 + 0.5).floor() as u64
}

/// Select a route under the given model.
///
/// Ties are broken by fewer hops, then by the lexicographically smallest
/// node-id sequence, so results are deterministic and match exhaustive
/// enumeration.
pub fn find_route(
    model: RoutingModel,
    src: NodeId,
    dst: NodeId,
    network: &Network,
) -> Result<Route, RouteError> {
    assert_ne!(src, dst, "routes connect distinct nodes");
    let no_route = || RouteError::NoRoute {
        src: network.nodes[src].id.clone(),
        dst: network.nodes[dst].id.clone(),
    };
    match model {
        RoutingModel::Direct => {
            let link = network.link_between(src, dst).ok_or_else(no_route)?;
            let spec = &network.links[link];
            Ok(Route {
                links: vec![link],
                nodes: vec![src, dst],
                latency_us: latency_us(spec.latency),
                bottleneck: spec.bandwidth,
            })
        }
        RoutingModel::WidestPath => widest_route(src, dst, network).ok_or_else(no_route),
        RoutingModel::ShortestPath => shortest_route(src, dst, network).ok_or_else(no_route),
    }
}

/// Max-bottleneck value from `src` to every node (O(V^2) scan Dijkstra).
fn widest_values(src: NodeId, network: &Network, usable: impl Fn(LinkId) -> bool) -> Vec<f64> {
    let n = network.nodes.len();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut done = vec![false; n];
    best[src] = f64::INFINITY;
    loop {
        let mut pick = None;
        for v in 0..n {
            if !done[v] && best[v] > f64::NEG_INFINITY {
                if pick.is_none_or(|p: usize| best[v] > best[p]) {
                    pick = Some(v);
                }
            }
        }
        let Some(u) = pick else { break };
        done[u] = true;
        for &l in network.out_links(u) {
            if !usable(l) {
                continue;
            }
            let (_, v) = network.link_endpoints(l);
            let through = best[u].min(network.links[l].bandwidth);
            if through > best[v] {
                best[v] = through;
            }
        }
    }
    best
}

fn widest_route(src: NodeId, dst: NodeId, network: &Network) -> Option<Route> {
    let best = widest_values(src, network, |_| true);
    if best[dst] == f64::NEG_INFINITY {
        return None;
    }
    let bottleneck = best[dst];
    // Among max-bottleneck paths: fewest hops, then lexicographically
    // smallest node-id sequence, inside the subgraph of links that sustain
    // the bottleneck.
    walk_min_hops(src, dst, network, |l| network.links[l].bandwidth >= bottleneck)
}

/// BFS hop distance to `dst` over links admitted by `usable`, then a greedy
/// forward walk choosing the smallest next node id on a shortest path.
fn walk_min_hops(
    src: NodeId,
    dst: NodeId,
    network: &Network,
    usable: impl Fn(LinkId) -> bool,
) -> Option<Route> {
    let n = network.nodes.len();
    // reverse adjacency restricted to usable links
    let mut rev: Vec<Vec<(NodeId, LinkId)>> = vec![Vec::new(); n];
    for l in 0..network.links.len() {
        if usable(l) {
            let (u, v) = network.link_endpoints(l);
            rev[v].push((u, l));
        }
    }
    let mut dist = vec![usize::MAX; n];
    dist[dst] = 0;
    let mut queue = std::collections::VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        for &(u, _) in &rev[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    if dist[src] == usize::MAX {
        return None;
    }
    let mut nodes = vec![src];
    let mut links = Vec::new();
    let mut u = src;
    while u != dst {
        let mut next: Option<(NodeId, LinkId)> = None;
        for &l in network.out_links(u) {
            if !usable(l) {
                continue;
            }
            let (_, v) = network.link_endpoints(l);
            if dist[v] != usize::MAX && dist[v] + 1 == dist[u] {
                let better = match next {
                    None => true,
                    Some((cur, _)) => network.nodes[v].id < network.nodes[cur].id,
                };
                if better {
                    next = Some((v, l));
                }
            }
        }
        let (v, l) = next.expect("dst reachable per BFS distances");
        nodes.push(v);
        links.push(l);
        u = v;
    }
    let bottleneck = links
        .iter()
        .map(|&l| network.links[l].bandwidth)
        .fold(f64::INFINITY, f64::min);
    let lat: u64 = links.iter().map(|&l| latency_us(network.links[l].latency)).sum();
    Some(Route {
        links,
        nodes,
        latency_us: lat,
        bottleneck,
    })
}

const UNREACHED: (u64, usize) = (u64::MAX, usize::MAX);

/// Dijkstra FROM every node TO dst over reversed links, cost ordered by
/// (total latency in integer us, hops) so comparisons are exact.
fn shortest_dists_to(dst: NodeId, network: &Network) -> Vec<(u64, usize)> {
    let n = network.nodes.len();
    let mut rev: Vec<Vec<(NodeId, LinkId)>> = vec![Vec::new(); n];
    for l in 0..network.links.len() {
        let (u, v) = network.link_endpoints(l);
        rev[v].push((u, l));
    }
    let mut dist = vec![UNREACHED; n];
    let mut done = vec![false; n];
    dist[dst] = (0, 0);
    loop {
        let mut pick = None;
        for v in 0..n {
            if !done[v] && dist[v] != UNREACHED {
                if pick.is_none_or(|p: usize| dist[v] < dist[p]) {
                    pick = Some(v);
                }
            }
        }
        let Some(v) = pick else { break };
        done[v] = true;
        for &(u, l) in &rev[v] {
            let cand = (dist[v].0 + latency_us(network.links[l].latency), dist[v].1 + 1);
            if cand < dist[u] {
                dist[u] = cand;
            }
        }
    }
    dist
}

fn shortest_walk(src: NodeId, dst: NodeId, dist: &[(u64, usize)], network: &Network) -> Route {
    // Greedy walk: keep optimality, prefer the smallest next node id.
    let mut nodes = vec![src];
    let mut links = Vec::new();
    let mut u = src;
    while u != dst {
        let mut next: Option<(NodeId, LinkId)> = None;
        for &l in network.out_links(u) {
            let (_, v) = network.link_endpoints(l);
            if dist[v] == UNREACHED {
                continue;
            }
            let via = (dist[v].0 + latency_us(network.links[l].latency), dist[v].1 + 1);
            if via == dist[u] {
                let better = match next {
                    None => true,
                    Some((cur, _)) => network.nodes[v].id < network.nodes[cur].id,
                };
                if better {
                    next = Some((v, l));
                }
            }
        }
        let (v, l) = next.expect("dst reachable per dijkstra");
        nodes.push(v);
        links.push(l);
        u = v;
    }
    let bottleneck = links
        .iter()
        .map(|&l| network.links[l].bandwidth)
        .fold(f64::INFINITY, f64::min);
    let lat: u64 = links.iter().map(|&l| latency_us(network.links[l].latency)).sum();
    Route {
        links,
        nodes,
        latency_us: lat,
        bottleneck,
    }
}

fn shortest_route(src: NodeId, dst: NodeId, network: &Network) -> Option<Route> {
    let dist = shortest_dists_to(dst, network);
    if dist[src] == UNREACHED {
        return None;
    }
    Some(shortest_walk(src, dst, &dist, network))
}

/// `(bottleneck MB/s, latency us)` of the chosen route for every ordered
/// pair, `None` when unreachable. Factored per source/destination so large
/// virtual-network builds stay cheap.
pub fn route_metrics_all_pairs(
    model: RoutingModel,
    network: &Network,
) -> Vec<Vec<Option<(f64, u64)>>> {
    let n = network.nodes.len();
    let mut out = vec![vec![None; n]; n];
    match model {
        RoutingModel::Direct => {
            for src in 0..n {
                for dst in 0..n {
                    if src != dst {
                        if let Some(l) = network.link_between(src, dst) {
                            let spec = &network.links[l];
                            out[src][dst] =
                                Some((spec.bandwidth, latency_us(spec.latency)));
                        }
                    }
                }
            }
        }
        RoutingModel::WidestPath => {
            for src in 0..n {
                let best = widest_values(src, network, |_| true);
                for dst in 0..n {
                    if src == dst || best[dst] == f64::NEG_INFINITY {
                        continue;
                    }
                    let bottleneck = best[dst];
                    let route = walk_min_hops(src, dst, network, |l| {
                        network.links[l].bandwidth >= bottleneck
                    })
                    .expect("reachable per widest values");
                    out[src][dst] = Some((route.bottleneck, route.latency_us));
                }
            }
        }
        RoutingModel::ShortestPath => {
            for dst in 0..n {
                let dist = shortest_dists_to(dst, network);
                for src in 0..n {
                    if src == dst || dist[src] == UNREACHED {
                        continue;
                    }
                    let route = shortest_walk(src, dst, &dist, network);
                    out[src][dst] = Some((route.bottleneck, route.latency_us));
                }
            }
        }
    }
    out
}

/// Bottleneck fair share over the route: the minimum of per-link shares
/// `B_l * f(l) / N_l` supplied by the engine.
pub fn effective_rate(route: &Route, per_link_share: impl Fn(LinkId) -> f64) -> f64 {
    route
        .links
        .iter()
        .map(|&l| per_link_share(l))
        .fold(f64::INFINITY, f64::min)
}

/// Remaining transfer duration in seconds: latency (once) plus bytes over
/// the current rate.
pub fn transfer_duration(route: &Route, remaining_mb: f64, rate: f64) -> f64 {
    route.latency_seconds() + remaining_mb / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_scenario, LinkSpec, NodeSpec};

    fn net(nodes: &[&str], links: &[(&str, &str, f64, f64)]) -> Network {
        let ns: Vec<NodeSpec> = nodes
            .iter()
            .map(|id| NodeSpec {
                id: id.to_string(),
                capacity: 100.0,
                position: None,
            })
            .collect();
        let ls: Vec<LinkSpec> = links
            .iter()
            .map(|(s, d, bw, lat)| LinkSpec {
                src: s.to_string(),
                dst: d.to_string(),
                bandwidth: *bw,
                latency: *lat,
            })
            .collect();
        validate_scenario(&ns, &ls, &[], false).unwrap()
    }

    #[test]
    fn widest_prefers_higher_bottleneck() {
        let n = net(
            &["a", "b", "c", "d"],
            &[
                ("a", "b", 4.3, 0.0),
                ("b", "d", 4.3, 0.0),
                ("a", "c", 8.6, 0.0),
                ("c", "d", 8.6, 0.0),
            ],
        );
        let r = find_route(RoutingModel::WidestPath, 0, 3, &n).unwrap();
        assert_eq!(r.bottleneck, 8.6);
        assert_eq!(r.nodes, vec![0, 2, 3]);
    }

    #[test]
    fn direct_requires_explicit_link() {
        let n = net(&["a", "b", "c"], &[("a", "b", 1.0, 0.0), ("b", "c", 1.0, 0.0)]);
        assert!(find_route(RoutingModel::Direct, 0, 1, &n).is_ok());
        assert_eq!(
            find_route(RoutingModel::Direct, 0, 2, &n),
            Err(RouteError::NoRoute { src: "a".into(), dst: "c".into() })
        );
    }

    #[test]
    fn shortest_prefers_fewer_summed_latency() {
        let n = net(
            &["a", "b", "c"],
            &[
                ("a", "c", 1.0, 0.002),
                ("a", "b", 1.0, 0.001),
                ("b", "c", 1.0, 0.001),
            ],
        );
        // equal total latency: 1-hop beats 2-hop
        let r = find_route(RoutingModel::ShortestPath, 0, 2, &n).unwrap();
        assert_eq!(r.nodes, vec![0, 2]);
        assert_eq!(r.latency_us, 2000);
    }

    #[test]
    fn widest_tie_breaks_by_hops_then_lex() {
        // two 2-hop paths with identical bottleneck: via "b" and via "c";
        // lexicographic rule picks "b".
        let n = net(
            &["a", "b", "c", "d"],
            &[
                ("a", "c", 5.0, 0.0),
                ("c", "d", 5.0, 0.0),
                ("a", "b", 5.0, 0.0),
                ("b", "d", 5.0, 0.0),
            ],
        );
        let r = find_route(RoutingModel::WidestPath, 0, 3, &n).unwrap();
        let ids: Vec<&str> = r.nodes.iter().map(|&v| n.nodes[v].id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "d"]);
    }

    #[test]
    fn effective_rate_is_bottleneck_of_shares() {
        let n = net(
            &["a", "b", "c"],
            &[("a", "b", 8.6, 0.0), ("b", "c", 4.3, 0.0)],
        );
        let r = find_route(RoutingModel::WidestPath, 0, 2, &n).unwrap();
        // single flow, no interference
        let rate = effective_rate(&r, |l| n.links[l].bandwidth);
        assert_eq!(rate, 4.3);
        // two flows on the first link
        let rate = effective_rate(&r, |l| if l == 0 { 8.6 / 2.0 } else { 4.3 });
        assert_eq!(rate, 4.3);
    }

    #[test]
    fn single_link_fair_share() {
        let n = net(&["a", "b"], &[("a", "b", 8.6, 0.0)]);
        let r = find_route(RoutingModel::Direct, 0, 1, &n).unwrap();
        let rate = effective_rate(&r, |_| 8.6 / 2.0);
        assert_eq!(rate, 4.3);
        assert_eq!(transfer_duration(&r, 10.0, rate), 10.0 / 4.3);
    }

    #[test]
    fn adding_flows_never_speeds_a_route() {
        let n = net(
            &["a", "b", "c"],
            &[("a", "b", 8.6, 0.0), ("b", "c", 6.45, 0.0)],
        );
        let r = find_route(RoutingModel::WidestPath, 0, 2, &n).unwrap();
        let base = effective_rate(&r, |l| n.links[l].bandwidth);
        for loaded in 0..2 {
            let rate = effective_rate(&r, |l| {
                let div = if l == loaded { 2.0 } else { 1.0 };
                n.links[l].bandwidth / div
            });
            assert!(rate <= base);
        }
    }
}

//! Small dense max-flow solver (Dinic) over f64 capacities.
//!
//! Used by the Prokhorov metric to decide Strassen feasibility on bipartite
//! atom graphs. Capacities are probability masses, so everything lives in
//! [0, 2] and a fixed absolute epsilon is enough to treat residuals as empty.

const RESIDUAL_EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
    rev: usize,
}

/// Flow network on a fixed set of nodes; edges carry f64 capacities.
#[derive(Debug)]
pub struct FlowNetwork {
    graph: Vec<Vec<Edge>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            graph: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        let rev_from = self.graph[to].len();
        let rev_to = self.graph[from].len();
        self.graph[from].push(Edge { to, cap, rev: rev_from });
        self.graph[to].push(Edge { to: from, cap: 0.0, rev: rev_to });
    }

    fn bfs_levels(&self, source: usize, sink: usize) -> Option<Vec<i32>> {
        let mut level = vec![-1i32; self.graph.len()];
        let mut queue = std::collections::VecDeque::new();
        level[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > RESIDUAL_EPS && level[e.to] < 0 {
                    level[e.to] = level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        if level[sink] >= 0 {
            Some(level)
        } else {
            None
        }
    }

    fn dfs_push(
        &mut self,
        v: usize,
        sink: usize,
        pushed: f64,
        level: &[i32],
        iter: &mut [usize],
    ) -> f64 {
        if v == sink {
            return pushed;
        }
        while iter[v] < self.graph[v].len() {
            let (to, cap, rev) = {
                let e = &self.graph[v][iter[v]];
                (e.to, e.cap, e.rev)
            };
            if cap > RESIDUAL_EPS && level[v] + 1 == level[to] {
                let d = self.dfs_push(to, sink, pushed.min(cap), level, iter);
                if d > RESIDUAL_EPS {
                    self.graph[v][iter[v]].cap -= d;
                    self.graph[to][rev].cap += d;
                    return d;
                }
            }
            iter[v] += 1;
        }
        0.0
    }

    /// Maximum flow from `source` to `sink`.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let mut flow = 0.0;
        while let Some(level) = self.bfs_levels(source, sink) {
            let mut iter = vec![0usize; self.graph.len()];
            loop {
                let pushed = self.dfs_push(source, sink, f64::INFINITY, &level, &mut iter);
                if pushed <= RESIDUAL_EPS {
                    break;
                }
                flow += pushed;
            }
        }
        flow
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_diamond_network() {
        // s -> a (3), s -> b (2), a -> b (1), a -> t (2), b -> t (3): max flow 5.
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, 3.0);
        net.add_edge(0, 2, 2.0);
        net.add_edge(1, 2, 1.0);
        net.add_edge(1, 3, 2.0);
        net.add_edge(2, 3, 3.0);
        assert!((net.max_flow(0, 3) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_sink_gives_zero_flow() {
        let mut net = FlowNetwork::new(3);
        net.add_edge(0, 1, 1.0);
        assert_eq!(net.max_flow(0, 2), 0.0);
    }

    #[test]
    fn bipartite_transport_saturates_smaller_side() {
        // Two sources of mass 0.5, one target of capacity 0.25 reachable from
        // both: flow limited by the sink edge.
        let mut net = FlowNetwork::new(5);
        net.add_edge(0, 1, 0.5);
        net.add_edge(0, 2, 0.5);
        net.add_edge(1, 3, 2.0);
        net.add_edge(2, 3, 2.0);
        net.add_edge(3, 4, 0.25);
        assert!((net.max_flow(0, 4) - 0.25).abs() < 1e-12);
    }
}

//! Electrical graph: non-wire polygons become nodes, wire polygons become
//! (hyper)edges joining the terminals their keypoints touch.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotations::{ClassRole, PolygonAnnotation, Port};
use crate::error::{Error, Result};
use crate::evaluation::Scores;
use crate::geometry::{Point, Polygon};

pub const DEFAULT_TOLERANCE: f64 = 10.0;
/// Port name of the single terminal of junctions and crossovers.
pub const CENTER_PORT: &str = "center";
/// Port name for contacts with a symbol outline away from any known port.
pub const ANONYMOUS_PORT: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Symbol,
    Junction,
    Crossover,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub label: String,
    pub outline: Polygon,
    pub ports: Vec<Port>,
}

/// A `(node, port)` pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Terminal {
    pub node: usize,
    pub port: String,
}

impl Terminal {
    pub fn new(node: usize, port: impl Into<String>) -> Self {
        Self {
            node,
            port: port.into(),
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}.{}", self.node, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Endpoint {
    Attached {
        node: usize,
        port: String,
        at: Point,
    },
    Dangling {
        at: Point,
    },
}

impl Endpoint {
    pub fn terminal(&self) -> Option<Terminal> {
        match self {
            Endpoint::Attached { node, port, .. } => Some(Terminal::new(*node, port.clone())),
            Endpoint::Dangling { .. } => None,
        }
    }

    pub fn at(&self) -> Point {
        match self {
            Endpoint::Attached { at, .. } | Endpoint::Dangling { at } => *at,
        }
    }
}

/// One wire polygon and every contact it makes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub wire: usize,
    pub endpoints: Vec<Endpoint>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CircuitGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Anomaly {
    Dangling {
        wire: usize,
        at: Point,
    },
    AnonymousContact {
        wire: usize,
        node: usize,
        at: Point,
    },
    /// A second keypoint of the same wire hit an already attached terminal.
    RepeatedTerminal {
        wire: usize,
        node: usize,
        port: String,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BuildReport {
    pub anomalies: Vec<Anomaly>,
}

fn node_kind(role: ClassRole) -> Option<NodeKind> {
    match role {
        ClassRole::Symbol => Some(NodeKind::Symbol),
        ClassRole::Junction => Some(NodeKind::Junction),
        ClassRole::Crossover => Some(NodeKind::Crossover),
        ClassRole::Text => Some(NodeKind::Text),
        ClassRole::Wire => None,
    }
}

/// Builds the graph. Node ids and wire ids are indices into `polygons`;
/// `wire_keypoints` maps wire indices to their contact points.
///
/// Each keypoint goes to the nearest terminal within `tolerance`, then to
/// the nearest non-text outline within `tolerance`, else it dangles. Ties
/// prefer the smaller node id, then the smaller port name.
pub fn build_graph(
    polygons: &[PolygonAnnotation],
    wire_keypoints: &BTreeMap<usize, Vec<Point>>,
    tolerance: f64,
) -> (CircuitGraph, BuildReport) {
    let nodes: Vec<Node> = polygons
        .iter()
        .enumerate()
        .filter_map(|(id, p)| {
            let kind = node_kind(p.role())?;
            let ports = match kind {
                NodeKind::Symbol => p.ports.clone().unwrap_or_default(),
                NodeKind::Junction | NodeKind::Crossover => {
                    vec![Port::new(CENTER_PORT, p.outline.centroid())]
                }
                NodeKind::Text => Vec::new(),
            };
            Some(Node {
                id,
                kind,
                label: p.label.to_string(),
                outline: p.outline.clone(),
                ports,
            })
        })
        .collect();

    let terminals: Vec<(usize, &str, Point)> = nodes
        .iter()
        .flat_map(|n| {
            n.ports
                .iter()
                .map(move |p| (n.id, p.name.as_str(), p.position))
        })
        .collect();
    let contactable: Vec<&Node> = nodes.iter().filter(|n| n.kind != NodeKind::Text).collect();

    let mut report = BuildReport::default();
    let mut edges = Vec::new();
    for (id, p) in polygons.iter().enumerate() {
        if p.role() != ClassRole::Wire {
            continue;
        }
        let mut endpoints = Vec::new();
        let mut seen = BTreeSet::new();
        for &kp in wire_keypoints.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
            let by_terminal = terminals
                .iter()
                .map(|&(n, port, at)| (kp.distance(at), n, port))
                .filter(|c| c.0 <= tolerance)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
            let hit = match by_terminal {
                Some((_, n, port)) => Some((n, port.to_string())),
                None => contactable
                    .iter()
                    .map(|n| {
                        let d = if n.outline.contains(kp) {
                            0.0
                        } else {
                            n.outline.boundary_distance(kp)
                        };
                        (d, *n)
                    })
                    .filter(|c| c.0 <= tolerance)
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)))
                    .map(|(_, n)| {
                        let port = match n.kind {
                            NodeKind::Junction | NodeKind::Crossover => CENTER_PORT,
                            _ => {
                                report.anomalies.push(Anomaly::AnonymousContact {
                                    wire: id,
                                    node: n.id,
                                    at: kp,
                                });
                                ANONYMOUS_PORT
                            }
                        };
                        (n.id, port.to_string())
                    }),
            };
            match hit {
                Some((node, port)) => {
                    if seen.insert((node, port.clone())) {
                        endpoints.push(Endpoint::Attached { node, port, at: kp });
                    } else {
                        report.anomalies.push(Anomaly::RepeatedTerminal {
                            wire: id,
                            node,
                            port,
                        });
                    }
                }
                None => {
                    report
                        .anomalies
                        .push(Anomaly::Dangling { wire: id, at: kp });
                    endpoints.push(Endpoint::Dangling { at: kp });
                }
            }
        }
        edges.push(Edge {
            wire: id,
            endpoints,
        });
    }
    (CircuitGraph { nodes, edges }, report)
}

// ---------------------------------------------------------------------------
// netlist

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Netlist {
    /// Each net sorted; nets ordered by their first terminal.
    pub nets: Vec<Vec<Terminal>>,
}

impl Netlist {
    /// Sorts terminals and nets into canonical order.
    pub fn canonical(mut nets: Vec<Vec<Terminal>>) -> Self {
        for n in &mut nets {
            n.sort();
            n.dedup();
        }
        nets.retain(|n| !n.is_empty());
        nets.sort();
        Self { nets }
    }

    /// One net per line, terminals separated by spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for net in &self.nets {
            let line: Vec<String> = net.iter().map(Terminal::to_string).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut nets = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let net = line
                .split_whitespace()
                .map(|t| {
                    let (node, port) = t
                        .strip_prefix('n')
                        .and_then(|r| r.split_once('.'))
                        .ok_or_else(|| {
                            Error::Validation(format!("line {}: bad terminal `{t}`", i + 1))
                        })?;
                    let node = node.parse().map_err(|_| {
                        Error::Validation(format!("line {}: bad node id in `{t}`", i + 1))
                    })?;
                    Ok(Terminal::new(node, port))
                })
                .collect::<Result<Vec<_>>>()?;
            nets.push(net);
        }
        Ok(Self::canonical(nets))
    }

    /// Net partition as a set, for order-free comparison.
    pub fn partition(&self) -> BTreeSet<BTreeSet<Terminal>> {
        self.nets
            .iter()
            .map(|n| n.iter().cloned().collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPairing {
    pub node: usize,
    /// Wire pairs carried straight through, with the angle between their
    /// approach headings in degrees.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unpaired: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetlistReport {
    /// Terminals that ended up alone in their net.
    pub open: Vec<Terminal>,
    pub crossovers: Vec<CrossoverPairing>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller root so results do not depend on call order
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

fn heading(from: Point, to: Point) -> f64 {
    (to.y - from.y).atan2(to.x - from.x).to_degrees()
}

fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Greedy pairing of headings by closeness to a straight line through the
/// crossover; ties go to the lexicographically smaller wire pair.
fn pair_headings(wires: &[(usize, f64)]) -> (Vec<(usize, usize, f64)>, Option<usize>) {
    let mut candidates = Vec::new();
    for i in 0..wires.len() {
        for j in i + 1..wires.len() {
            let sep = angle_between(wires[i].1, wires[j].1);
            candidates.push(((180.0 - sep).abs(), wires[i].0, wires[j].0, sep));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = BTreeSet::new();
    let mut pairs = Vec::new();
    for (_, a, b, sep) in candidates {
        if !used.contains(&a) && !used.contains(&b) {
            used.insert(a);
            used.insert(b);
            pairs.push((a, b, sep));
        }
    }
    let unpaired = wires.iter().map(|w| w.0).find(|w| !used.contains(w));
    (pairs, unpaired)
}

/// Reduces the graph to nets over symbol terminals.
///
/// Wires join everything they touch; junctions join all their wires;
/// crossovers join their wires two by two along opposing headings. Every
/// symbol port takes part, so unconnected ports are reported as open.
pub fn to_netlist(g: &CircuitGraph) -> (Netlist, NetlistReport) {
    let kind_of: BTreeMap<usize, &Node> = g.nodes.iter().map(|n| (n.id, n)).collect();
    let is_symbol = |id: usize| kind_of.get(&id).is_some_and(|n| n.kind == NodeKind::Symbol);

    let mut terminals: BTreeSet<Terminal> = g
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Symbol)
        .flat_map(|n| n.ports.iter().map(|p| Terminal::new(n.id, p.name.clone())))
        .collect();
    for e in &g.edges {
        for t in e.endpoints.iter().filter_map(Endpoint::terminal) {
            if is_symbol(t.node) {
                terminals.insert(t);
            }
        }
    }
    let terminals: Vec<Terminal> = terminals.into_iter().collect();
    let t_index: BTreeMap<&Terminal, usize> =
        terminals.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let w_index: BTreeMap<usize, usize> = g
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.wire, terminals.len() + i))
        .collect();
    let mut uf = UnionFind::new(terminals.len() + g.edges.len());

    // per hub node: attached wires with the contact point
    let mut hubs: BTreeMap<usize, Vec<(usize, Point)>> = BTreeMap::new();
    for e in &g.edges {
        let w = w_index[&e.wire];
        for ep in &e.endpoints {
            if let Endpoint::Attached { node, port, at } = ep {
                match kind_of.get(node).map(|n| n.kind) {
                    Some(NodeKind::Symbol) => {
                        uf.union(w, t_index[&Terminal::new(*node, port.clone())])
                    }
                    Some(NodeKind::Junction) | Some(NodeKind::Crossover) => {
                        hubs.entry(*node).or_default().push((e.wire, *at));
                    }
                    _ => {}
                }
            }
        }
    }

    let mut report = NetlistReport::default();
    for (node, attached) in &hubs {
        let n = kind_of[node];
        match n.kind {
            NodeKind::Junction => {
                for pair in attached.windows(2) {
                    uf.union(w_index[&pair[0].0], w_index[&pair[1].0]);
                }
            }
            NodeKind::Crossover => {
                let center = n.outline.centroid();
                let headings: Vec<(usize, f64)> = attached
                    .iter()
                    .map(|&(w, at)| (w, heading(center, at)))
                    .collect();
                let (pairs, unpaired) = pair_headings(&headings);
                for &(a, b, _) in &pairs {
                    uf.union(w_index[&a], w_index[&b]);
                }
                if let Some(w) = unpaired {
                    log::warn!("crossover {node}: wire {w} has no opposite partner");
                }
                report.crossovers.push(CrossoverPairing {
                    node: *node,
                    pairs,
                    unpaired,
                });
            }
            _ => {}
        }
    }

    let mut groups: BTreeMap<usize, Vec<Terminal>> = BTreeMap::new();
    for (i, t) in terminals.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(t.clone());
    }
    let mut nets = Vec::new();
    for (_, members) in groups {
        if members.len() >= 2 {
            nets.push(members);
        } else {
            report.open.extend(members);
        }
    }
    report.open.sort();
    (Netlist::canonical(nets), report)
}

// ---------------------------------------------------------------------------
// comparison

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeMatching {
    /// Same image: class-aware greedy matching by bounding-box IoU >= 0.5.
    #[default]
    Geometric,
    /// Different drawings of one circuit: class-aware greedy matching by
    /// closest degree.
    DegreeSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphMetrics {
    pub nodes: Scores,
    pub edges: Scores,
    pub nets: Scores,
}

fn box_iou(a: &Polygon, b: &Polygon) -> f64 {
    let (Ok(a), Ok(b)) = (a.bounding_box(), b.bounding_box()) else {
        return 0.0;
    };
    let w = (a.xmax().min(b.xmax()) - a.xmin().max(b.xmin())).max(0.0);
    let h = (a.ymax().min(b.ymax()) - a.ymin().max(b.ymin())).max(0.0);
    let inter = w * h;
    inter / (a.area() + b.area() - inter)
}

fn degrees(g: &CircuitGraph) -> BTreeMap<usize, usize> {
    let mut d: BTreeMap<usize, usize> = g.nodes.iter().map(|n| (n.id, 0)).collect();
    for e in &g.edges {
        for t in e.endpoints.iter().filter_map(Endpoint::terminal) {
            *d.entry(t.node).or_default() += 1;
        }
    }
    d
}

/// Pred node id -> gt node id.
fn match_nodes(
    pred: &CircuitGraph,
    gt: &CircuitGraph,
    mode: NodeMatching,
) -> BTreeMap<usize, usize> {
    let (dp, dg) = (degrees(pred), degrees(gt));
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for a in &pred.nodes {
        for b in gt
            .nodes
            .iter()
            .filter(|b| b.kind == a.kind && b.label == a.label)
        {
            let score = match mode {
                NodeMatching::Geometric => {
                    let iou = box_iou(&a.outline, &b.outline);
                    if iou < 0.5 {
                        continue;
                    }
                    -iou
                }
                NodeMatching::DegreeSequence => dp[&a.id].abs_diff(dg[&b.id]) as f64,
            };
            candidates.push((score, a.id, b.id));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut map = BTreeMap::new();
    let mut taken = BTreeSet::new();
    for (_, a, b) in candidates {
        if !map.contains_key(&a) && !taken.contains(&b) {
            map.insert(a, b);
            taken.insert(b);
        }
    }
    map
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy one-to-one matching by descending Jaccard; a pair counts when
/// its Jaccard index is at least 0.5.
pub fn compare_netlists(pred: &Netlist, gt: &Netlist) -> Scores {
    let p: Vec<BTreeSet<Terminal>> = pred
        .nets
        .iter()
        .map(|n| n.iter().cloned().collect())
        .collect();
    let g: Vec<BTreeSet<Terminal>> = gt
        .nets
        .iter()
        .map(|n| n.iter().cloned().collect())
        .collect();
    compare_sets(&p, &g)
}

fn compare_sets(p: &[BTreeSet<Terminal>], g: &[BTreeSet<Terminal>]) -> Scores {
    let mut candidates = Vec::new();
    for (i, a) in p.iter().enumerate() {
        for (j, b) in g.iter().enumerate() {
            let s = jaccard(a, b);
            if s >= 0.5 {
                candidates.push((s, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let (mut up, mut ug) = (BTreeSet::new(), BTreeSet::new());
    let mut tp = 0;
    for (_, i, j) in candidates {
        if !up.contains(&i) && !ug.contains(&j) {
            up.insert(i);
            ug.insert(j);
            tp += 1;
        }
    }
    Scores::from_counts(tp, p.len(), g.len())
}

/// Compares a predicted graph against a reference one.
pub fn compare_graphs(pred: &CircuitGraph, gt: &CircuitGraph, mode: NodeMatching) -> GraphMetrics {
    let map = match_nodes(pred, gt, mode);
    let nodes = Scores::from_counts(map.len(), pred.nodes.len(), gt.nodes.len());

    // edges as multisets of touched nodes, pred side mapped into gt ids;
    // unmatched pred nodes map to ids no gt node uses
    let unmatched = usize::MAX / 2;
    let sig = |e: &Edge, f: &dyn Fn(usize) -> usize| {
        let mut v: Vec<usize> = e
            .endpoints
            .iter()
            .filter_map(Endpoint::terminal)
            .map(|t| f(t.node))
            .collect();
        v.sort();
        v
    };
    let to_gt = |n: usize| map.get(&n).copied().unwrap_or(unmatched + n);
    let mut pool: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for e in &gt.edges {
        *pool.entry(sig(e, &|n| n)).or_default() += 1;
    }
    let mut tp = 0;
    for e in &pred.edges {
        if let Some(c) = pool.get_mut(&sig(e, &to_gt)) {
            if *c > 0 {
                *c -= 1;
                tp += 1;
            }
        }
    }
    let edges = Scores::from_counts(tp, pred.edges.len(), gt.edges.len());

    let (pn, _) = to_netlist(pred);
    let (gn, _) = to_netlist(gt);
    let mapped: Vec<BTreeSet<Terminal>> = pn
        .nets
        .iter()
        .map(|n| {
            n.iter()
                .map(|t| Terminal::new(to_gt(t.node), t.port.clone()))
                .collect()
        })
        .collect();
    let gsets: Vec<BTreeSet<Terminal>> = gn
        .nets
        .iter()
        .map(|n| n.iter().cloned().collect())
        .collect();
    let nets = compare_sets(&mapped, &gsets);
    GraphMetrics { nodes, edges, nets }
}

// ---------------------------------------------------------------------------
// export

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    GraphMl,
    Netlist,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "graphml" => Ok(Self::GraphMl),
            "netlist" | "txt" => Ok(Self::Netlist),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

impl CircuitGraph {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let g: CircuitGraph = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let ids: BTreeSet<usize> = g.nodes.iter().map(|n| n.id).collect();
        for e in &g.edges {
            for t in e.endpoints.iter().filter_map(Endpoint::terminal) {
                if !ids.contains(&t.node) {
                    return Err(Error::Validation(format!(
                        "wire {} refers to missing node {}",
                        e.wire, t.node
                    )));
                }
            }
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// GraphML with wires as nodes of kind `wire` and one edge per contact.
    pub fn to_graphml(&self) -> String {
        let esc = |s: &str| {
            s.replace('&', "&amp;")
                .replace('<', "&lt;")
                .replace('"', "&quot;")
        };
        let mut s = String::new();
        s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        s.push_str("  <key id=\"kind\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n");
        s.push_str("  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n");
        s.push_str("  <key id=\"port\" for=\"edge\" attr.name=\"port\" attr.type=\"string\"/>\n");
        s.push_str("  <graph id=\"circuit\" edgedefault=\"undirected\">\n");
        for n in &self.nodes {
            let kind = serde_json::to_value(n.kind).expect("unit enum");
            let _ = writeln!(
                s,
                "    <node id=\"n{}\"><data key=\"kind\">{}</data><data key=\"label\">{}</data></node>",
                n.id,
                kind.as_str().unwrap_or_default(),
                esc(&n.label)
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "    <node id=\"w{}\"><data key=\"kind\">wire</data><data key=\"label\">wire</data></node>",
                e.wire
            );
            for (i, t) in e
                .endpoints
                .iter()
                .filter_map(Endpoint::terminal)
                .enumerate()
            {
                let _ = writeln!(
                    s,
                    "    <edge id=\"w{}e{}\" source=\"w{}\" target=\"n{}\"><data key=\"port\">{}</data></edge>",
                    e.wire,
                    i,
                    e.wire,
                    t.node,
                    esc(&t.port)
                );
            }
        }
        s.push_str("  </graph>\n</graphml>\n");
        s
    }

    pub fn export(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Json => self.to_json(),
            ExportFormat::GraphMl => self.to_graphml(),
            ExportFormat::Netlist => to_netlist(self).0.to_text(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{ClassLabel, Refinement};

    fn poly(label: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> PolygonAnnotation {
        PolygonAnnotation::new(
            ClassLabel::new_unchecked(label),
            Polygon::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]).unwrap(),
            Refinement::Refined,
        )
    }

    fn with_ports(mut p: PolygonAnnotation, ports: &[(&str, f64, f64)]) -> PolygonAnnotation {
        p.ports = Some(
            ports
                .iter()
                .map(|&(n, x, y)| Port::new(n, Point::new(x, y)))
                .collect(),
        );
        p
    }

    fn r_wire_c() -> (Vec<PolygonAnnotation>, BTreeMap<usize, Vec<Point>>) {
        let polys = vec![
            with_ports(
                poly("resistor", 0.0, 0.0, 10.0, 4.0),
                &[("left", 0.0, 2.0), ("right", 10.0, 2.0)],
            ),
            with_ports(
                poly("capacitor.unpolarized", 30.0, 0.0, 36.0, 4.0),
                &[("left", 30.0, 2.0), ("right", 36.0, 2.0)],
            ),
            poly("wire", 10.0, 1.0, 30.0, 3.0),
        ];
        let kps = BTreeMap::from([(2, vec![Point::new(10.5, 2.0), Point::new(29.5, 2.0)])]);
        (polys, kps)
    }

    #[test]
    fn resistor_wire_capacitor() {
        let (polys, kps) = r_wire_c();
        let (g, report) = build_graph(&polys, &kps, DEFAULT_TOLERANCE);
        assert!(report.anomalies.is_empty());
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        let ts: Vec<_> = g.edges[0]
            .endpoints
            .iter()
            .filter_map(Endpoint::terminal)
            .collect();
        assert_eq!(
            ts,
            vec![Terminal::new(0, "right"), Terminal::new(1, "left")]
        );
        let (net, rep) = to_netlist(&g);
        assert_eq!(
            net.nets,
            vec![vec![Terminal::new(0, "right"), Terminal::new(1, "left")]]
        );
        assert_eq!(
            rep.open,
            vec![Terminal::new(0, "left"), Terminal::new(1, "right")]
        );
    }

    #[test]
    fn dangling_and_ties() {
        let polys = vec![
            with_ports(poly("resistor", 0.0, 0.0, 10.0, 4.0), &[("b", 10.0, 2.0)]),
            with_ports(poly("resistor", 20.0, 0.0, 30.0, 4.0), &[("a", 20.0, 2.0)]),
            poly("wire", 10.0, 1.0, 20.0, 3.0),
        ];
        let kps = BTreeMap::from([(2, vec![Point::new(15.0, 2.0), Point::new(15.0, 60.0)])]);
        let (g, report) = build_graph(&polys, &kps, 10.0);
        assert_eq!(
            g.edges[0].endpoints[0],
            Endpoint::Attached {
                node: 0,
                port: "b".into(),
                at: Point::new(15.0, 2.0)
            }
        );
        assert_eq!(
            report.anomalies,
            vec![Anomaly::Dangling {
                wire: 2,
                at: Point::new(15.0, 60.0)
            }]
        );
    }

    #[test]
    fn anonymous_contact_and_text() {
        let polys = vec![
            poly("text", 0.0, 0.0, 5.0, 5.0),
            poly("lamp", 20.0, 0.0, 30.0, 10.0),
            poly("wire", 5.0, 2.0, 20.0, 3.0),
        ];
        let kps = BTreeMap::from([(2, vec![Point::new(4.0, 2.5), Point::new(21.0, 2.5)])]);
        let (g, report) = build_graph(&polys, &kps, 3.0);
        assert!(matches!(g.edges[0].endpoints[0], Endpoint::Dangling { .. }));
        assert_eq!(
            g.edges[0].endpoints[1].terminal(),
            Some(Terminal::new(1, ANONYMOUS_PORT))
        );
        assert_eq!(report.anomalies.len(), 2);
    }

    #[test]
    fn junction_merges_three() {
        let mut polys = vec![poly("junction", 48.0, 48.0, 52.0, 52.0)];
        let ends = [(0.0, 50.0), (100.0, 50.0), (50.0, 100.0)];
        for (i, &(x, y)) in ends.iter().enumerate() {
            polys.push(with_ports(
                poly("resistor", x - 1.0, y - 1.0, x + 1.0, y + 1.0),
                &[("a", x, y)],
            ));
            let _ = i;
        }
        let mut kps = BTreeMap::new();
        for (i, &(x, y)) in ends.iter().enumerate() {
            polys.push(poly("wire", 0.0, 0.0, 1.0, 1.0));
            let toward = Point::new(50.0 + (x - 50.0) * 0.04, 50.0 + (y - 50.0) * 0.04);
            kps.insert(4 + i, vec![Point::new(x, y), toward]);
        }
        let (g, _) = build_graph(&polys, &kps, 3.0);
        let (net, rep) = to_netlist(&g);
        assert_eq!(net.nets.len(), 1);
        assert_eq!(net.nets[0].len(), 3);
        assert!(rep.open.is_empty());
    }

    #[test]
    fn crossover_pairs_by_heading() {
        let mut polys = vec![poly("crossover", 45.0, 45.0, 55.0, 55.0)];
        // headings 0, 90, 180, 270 from the crossover center
        let ends = [(100.0, 50.0), (50.0, 100.0), (0.0, 50.0), (50.0, 0.0)];
        for &(x, y) in &ends {
            polys.push(with_ports(
                poly("resistor", x - 1.0, y - 1.0, x + 1.0, y + 1.0),
                &[("a", x, y)],
            ));
        }
        let mut kps = BTreeMap::new();
        for (i, &(x, y)) in ends.iter().enumerate() {
            polys.push(poly("wire", 0.0, 0.0, 1.0, 1.0));
            let near = Point::new(50.0 + (x - 50.0) * 0.1, 50.0 + (y - 50.0) * 0.1);
            kps.insert(5 + i, vec![Point::new(x, y), near]);
        }
        let (g, _) = build_graph(&polys, &kps, 6.0);
        let (net, rep) = to_netlist(&g);
        assert_eq!(
            net.nets,
            vec![
                vec![Terminal::new(1, "a"), Terminal::new(3, "a")],
                vec![Terminal::new(2, "a"), Terminal::new(4, "a")],
            ]
        );
        assert_eq!(rep.crossovers[0].pairs.len(), 2);
        assert_eq!(rep.crossovers[0].unpaired, None);

        // drop one wire: the odd one out stays unmerged
        kps.remove(&8);
        let (g, _) = build_graph(&polys, &kps, 6.0);
        let (net, rep) = to_netlist(&g);
        assert_eq!(
            net.nets,
            vec![vec![Terminal::new(1, "a"), Terminal::new(3, "a")]]
        );
        assert_eq!(rep.crossovers[0].unpaired, Some(6));
    }

    #[test]
    fn no_wires_all_open() {
        let polys = vec![with_ports(
            poly("resistor", 0.0, 0.0, 10.0, 4.0),
            &[("left", 0.0, 2.0), ("right", 10.0, 2.0)],
        )];
        let (g, _) = build_graph(&polys, &BTreeMap::new(), 10.0);
        let (net, rep) = to_netlist(&g);
        assert!(net.nets.is_empty());
        assert_eq!(rep.open.len(), 2);
    }

    #[test]
    fn compare_self_empty_and_missing_edge() {
        let (polys, kps) = r_wire_c();
        let (g, _) = build_graph(&polys, &kps, DEFAULT_TOLERANCE);
        let m = compare_graphs(&g, &g, NodeMatching::Geometric);
        assert_eq!((m.nodes.f1, m.edges.f1, m.nets.f1), (1.0, 1.0, 1.0));
        let empty = CircuitGraph::default();
        let m = compare_graphs(&empty, &g, NodeMatching::Geometric);
        assert_eq!((m.nodes.f1, m.edges.f1, m.nets.f1), (0.0, 0.0, 0.0));

        let mut four = g.clone();
        for i in 0..3 {
            let mut e = g.edges[0].clone();
            e.wire = 10 + i;
            four.edges.push(e);
        }
        let mut three = four.clone();
        three.edges.pop();
        let m = compare_graphs(&three, &four, NodeMatching::DegreeSequence);
        assert_eq!(m.edges.recall, 0.75);
    }

    #[test]
    fn export_round_trips() {
        let (polys, kps) = r_wire_c();
        let (g, _) = build_graph(&polys, &kps, DEFAULT_TOLERANCE);
        let json = g.to_json();
        assert_eq!(
            CircuitGraph::from_json(&json, Path::new("g.json")).unwrap(),
            g
        );
        assert_eq!(json, g.export(ExportFormat::Json));
        let empty = CircuitGraph::default();
        assert_eq!(
            CircuitGraph::from_json(&empty.to_json(), Path::new("e.json")).unwrap(),
            empty
        );

        let text = to_netlist(&g).0.to_text();
        assert_eq!(text, "n0.right n1.left\n");
        assert_eq!(Netlist::parse_text(&text).unwrap(), to_netlist(&g).0);

        let gml = g.to_graphml();
        assert!(roxmltree::Document::parse(&gml).is_ok());
        assert!(matches!(
            "dot".parse::<ExportFormat>(),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // nets must equal the transitive closure of "shares a wire"
        proptest! {
            #[test]
            fn nets_match_transitive_closure(
                wires in proptest::collection::vec(proptest::collection::vec(0usize..12, 0..4), 0..10),
            ) {
                let mut polys = Vec::new();
                for i in 0..12 {
                    let x = i as f64 * 100.0;
                    polys.push(with_ports(poly("resistor", x, 0.0, x + 10.0, 10.0), &[("p", x, 5.0)]));
                }
                let mut kps = BTreeMap::new();
                for (w, ends) in wires.iter().enumerate() {
                    polys.push(poly("wire", 0.0, 0.0, 1.0, 1.0));
                    kps.insert(12 + w, ends.iter().map(|&t| Point::new(t as f64 * 100.0, 5.0)).collect());
                }
                let (g, _) = build_graph(&polys, &kps, 1.0);
                let (net, _) = to_netlist(&g);

                let mut reach = [[false; 12]; 12];
                for (i, row) in reach.iter_mut().enumerate() {
                    row[i] = true;
                }
                for ends in &wires {
                    for &a in ends {
                        for &b in ends {
                            reach[a][b] = true;
                        }
                    }
                }
                for k in 0..12 {
                    for i in 0..12 {
                        for j in 0..12 {
                            if reach[i][k] && reach[k][j] {
                                reach[i][j] = true;
                            }
                        }
                    }
                }
                let mut expected: BTreeSet<BTreeSet<Terminal>> = BTreeSet::new();
                for row in &reach {
                    let class: BTreeSet<Terminal> = (0..12).filter(|&j| row[j]).map(|j| Terminal::new(j, "p")).collect();
                    if class.len() >= 2 {
                        expected.insert(class);
                    }
                }
                prop_assert_eq!(net.partition(), expected);
            }
        }
    }
}

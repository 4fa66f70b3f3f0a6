#include "action4d/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "action4d/error.hpp"

namespace action4d {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Residual network of the node-split graph.
class FlowNetwork {
 public:
  explicit FlowNetwork(int nodes) : adjacency_(static_cast<std::size_t>(nodes)) {}

  int add_arc(int from, int to, double cost) {
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({to, 1, cost});
    arcs_.push_back({from, 0, -cost});
    adjacency_[static_cast<std::size_t>(from)].push_back(id);
    adjacency_[static_cast<std::size_t>(to)].push_back(id + 1);
    return id;
  }

  int node_count() const { return static_cast<int>(adjacency_.size()); }

  // Shortest-path distances with reduced costs; ties settle by node index.
  std::vector<double> dijkstra(int source, const std::vector<double>& potential, std::vector<int>& via) const {
    std::vector<double> dist(adjacency_.size(), kInf);
    via.assign(adjacency_.size(), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[static_cast<std::size_t>(source)] = 0.0;
    queue.push({0.0, source});
    while (!queue.empty()) {
      const auto [d, u] = queue.top();
      queue.pop();
      if (d > dist[static_cast<std::size_t>(u)]) continue;
      for (int id : adjacency_[static_cast<std::size_t>(u)]) {
        const Arc& arc = arcs_[static_cast<std::size_t>(id)];
        if (arc.capacity == 0) continue;
        const double reduced = std::max(
            0.0, arc.cost + potential[static_cast<std::size_t>(u)] - potential[static_cast<std::size_t>(arc.to)]);
        const double nd = d + reduced;
        if (nd < dist[static_cast<std::size_t>(arc.to)]) {
          dist[static_cast<std::size_t>(arc.to)] = nd;
          via[static_cast<std::size_t>(arc.to)] = id;
          queue.push({nd, arc.to});
        }
      }
    }
    return dist;
  }

  void push(int arc_id) {
    arcs_[static_cast<std::size_t>(arc_id)].capacity -= 1;
    arcs_[static_cast<std::size_t>(arc_id ^ 1)].capacity += 1;
  }

  int tail(int arc_id) const { return arcs_[static_cast<std::size_t>(arc_id ^ 1)].to; }
  int head(int arc_id) const { return arcs_[static_cast<std::size_t>(arc_id)].to; }
  bool saturated(int arc_id) const { return arcs_[static_cast<std::size_t>(arc_id)].capacity == 0; }
  const std::vector<int>& arcs_from(int node) const { return adjacency_[static_cast<std::size_t>(node)]; }

 private:
  struct Arc {
    int to;
    int capacity;
    double cost;
  };
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adjacency_;
};

}  // namespace

void TrackingParams::validate() const {
  if (lookahead < 0) throw ConfigError("tracking: lookahead must be >= 0");
  if (!(gate > 0.0)) throw ConfigError("tracking: gate must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("tracking: lambda must be in [0, 1]");
  if (!(theta_drop >= 0.0 && theta_drop <= 1.0)) throw ConfigError("tracking: theta_drop must be in [0, 1]");
  if (!(prediction_prob >= 0.0 && prediction_prob <= 1.0)) {
    throw ConfigError("tracking: prediction_prob must be in [0, 1]");
  }
  if (!(c0 >= 0.0) || !(w_prob >= 0.0) || !(w_dist >= 0.0) || !(w_volume >= 0.0)) {
    throw ConfigError("tracking: costs and weights must be >= 0");
  }
}

std::optional<double> TrackingGraph::edge_cost(int from, int to) const {
  for (int id : out_edges[static_cast<std::size_t>(from)]) {
    if (edges[static_cast<std::size_t>(id)].to == to) return edges[static_cast<std::size_t>(id)].cost;
  }
  return std::nullopt;
}

double edge_cost(const TrackNode& a, const TrackNode& b, const TrackingParams& params) {
  const double dist = (a.position - b.position).norm();
  if (b.layer != a.layer + 1 || !(dist <= params.gate)) {
    throw ContractViolation("edge_cost: nodes are not consecutive and gated");
  }
  const double prob_term = a.prob && b.prob ? std::abs(*a.prob - *b.prob) : 0.5;
  const double volume_term = a.crop && b.crop ? 1.0 - volume_iou(*a.crop, *b.crop) : 0.5;
  double cost = params.w_prob * prob_term + params.w_dist * dist / params.gate + params.w_volume * volume_term;
  if (params.appearance) cost += params.appearance(a, b);
  return cost;
}

std::vector<Vec2> predict_positions(const Trajectory& trajectory, int count, double gate) {
  if (trajectory.history.empty()) throw ContractViolation("predict_positions: empty history");
  const Vec2 last = trajectory.history.back().position;
  Vec2 velocity = Vec2::Zero();
  if (trajectory.history.size() >= 2) velocity = last - trajectory.history[trajectory.history.size() - 2].position;
  const double speed = velocity.norm();
  if (speed > gate) velocity *= gate / speed;
  std::vector<Vec2> out;
  for (int k = 1; k <= count; ++k) out.push_back(last + k * velocity);
  return out;
}

TrackingGraph build_graph(std::span<const Trajectory> trajectories, std::span<const std::vector<Detection>> window,
                          const TrackingParams& params) {
  TrackingGraph g;
  const int layers = static_cast<int>(window.size()) + 1;
  g.layers.resize(static_cast<std::size_t>(layers));
  auto add = [&g](TrackNode node) {
    g.layers[static_cast<std::size_t>(node.layer)].push_back(static_cast<int>(g.nodes.size()));
    g.nodes.push_back(std::move(node));
  };

  std::vector<std::vector<Vec2>> predictions;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& tr = trajectories[i];
    TrackNode node;
    node.kind = TrackNode::Kind::kTrajectory;
    node.layer = 0;
    node.position = tr.history.back().position;
    node.prob = tr.people_score;
    node.crop = tr.has_crop ? &tr.last_crop : nullptr;
    node.node_cost = params.c0 / std::max(1, tr.length());
    node.trajectory = static_cast<int>(i);
    add(std::move(node));
    predictions.push_back(predict_positions(tr, layers - 1, params.gate));
  }
  for (int k = 1; k < layers; ++k) {
    const auto& dets = window[static_cast<std::size_t>(k - 1)];
    for (std::size_t c = 0; c < dets.size(); ++c) {
      TrackNode node;
      node.kind = TrackNode::Kind::kCandidate;
      node.layer = k;
      node.position = dets[c].position;
      node.prob = dets[c].prob;
      node.crop = &dets[c].crop;
      node.candidate = static_cast<int>(c);
      add(std::move(node));
    }
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      TrackNode node;
      node.kind = TrackNode::Kind::kPrediction;
      node.layer = k;
      node.position = predictions[i][static_cast<std::size_t>(k - 1)];
      node.trajectory = static_cast<int>(i);
      add(std::move(node));
    }
  }

  g.out_edges.resize(g.nodes.size());
  for (int k = 0; k + 1 < layers; ++k) {
    for (int a : g.layers[static_cast<std::size_t>(k)]) {
      for (int b : g.layers[static_cast<std::size_t>(k + 1)]) {
        const TrackNode& na = g.nodes[static_cast<std::size_t>(a)];
        const TrackNode& nb = g.nodes[static_cast<std::size_t>(b)];
        if (!((na.position - nb.position).norm() <= params.gate)) continue;
        g.out_edges[static_cast<std::size_t>(a)].push_back(static_cast<int>(g.edges.size()));
        g.edges.push_back({a, b, edge_cost(na, nb, params)});
      }
    }
  }
  return g;
}

PathSet solve_disjoint_paths(const TrackingGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  const int sink = 2 * n;
  FlowNetwork net(2 * n + 1);
  // Node v splits into in-half 2v and out-half 2v+1.
  for (int v = 0; v < n; ++v) net.add_arc(2 * v, 2 * v + 1, g.nodes[static_cast<std::size_t>(v)].node_cost);
  for (const auto& e : g.edges) net.add_arc(2 * e.from + 1, 2 * e.to, e.cost);
  if (g.layer_count() > 0) {
    for (int v : g.layers.back()) net.add_arc(2 * v + 1, sink, 0.0);
  }

  // Initial potentials: shortest distances over the DAG in layer order.
  std::vector<double> potential(static_cast<std::size_t>(2 * n + 1), kInf);
  if (g.layer_count() > 0) {
    for (int v : g.layers.front()) potential[static_cast<std::size_t>(2 * v)] = 0.0;
  }
  for (const auto& layer : g.layers) {
    for (int v : layer) {
      const double pin = potential[static_cast<std::size_t>(2 * v)];
      if (pin == kInf) continue;
      const double pout = pin + g.nodes[static_cast<std::size_t>(v)].node_cost;
      potential[static_cast<std::size_t>(2 * v + 1)] = pout;
      for (int id : g.out_edges[static_cast<std::size_t>(v)]) {
        const auto& e = g.edges[static_cast<std::size_t>(id)];
        auto& pt = potential[static_cast<std::size_t>(2 * e.to)];
        pt = std::min(pt, pout + e.cost);
      }
      if (&layer == &g.layers.back()) {
        potential[static_cast<std::size_t>(sink)] = std::min(potential[static_cast<std::size_t>(sink)], pout);
      }
    }
  }
  for (double& p : potential) {
    if (p == kInf) p = 0.0;
  }

  const std::vector<int> sources = g.layer_count() > 0 ? g.layers.front() : std::vector<int>{};
  std::vector<int> via;
  for (int s : sources) {
    const std::vector<double> dist = net.dijkstra(2 * s, potential, via);
    const double to_sink = dist[static_cast<std::size_t>(sink)];
    if (to_sink == kInf) throw ContractViolation("solve_disjoint_paths: infeasible graph");
    for (int v = 0; v <= sink; ++v) potential[static_cast<std::size_t>(v)] += std::min(dist[static_cast<std::size_t>(v)], to_sink);
    for (int v = sink; v != 2 * s; v = net.tail(via[static_cast<std::size_t>(v)])) {
      net.push(via[static_cast<std::size_t>(v)]);
    }
  }

  PathSet result;
  for (int s : sources) {
    std::vector<int> path{s};
    int at = 2 * s + 1;
    while (at != sink) {
      int next = -1;
      for (int id : net.arcs_from(at)) {
        if ((id & 1) == 0 && net.saturated(id)) {
          next = net.head(id);
          break;
        }
      }
      if (next < 0) throw ContractViolation("solve_disjoint_paths: broken flow");
      if (next == sink) break;
      path.push_back(next / 2);
      at = next + 1;
    }
    result.paths.push_back(std::move(path));
  }
  result.cost = path_set_cost(g, result.paths);
  return result;
}

double path_set_cost(const TrackingGraph& g, const std::vector<std::vector<int>>& paths) {
  double total = 0.0;
  for (const auto& path : paths) {
    for (std::size_t i = 0; i < path.size(); ++i) {
      total += g.nodes[static_cast<std::size_t>(path[i])].node_cost;
      if (i == 0) continue;
      const auto cost = g.edge_cost(path[i - 1], path[i]);
      if (!cost) throw ContractViolation("path_set_cost: step is not an edge");
      total += *cost;
    }
  }
  return total;
}

std::vector<Trajectory> advance(std::span<const Trajectory> trajectories, const TrackingGraph& graph,
                                const PathSet& solution, std::span<const Detection> detections, int frame,
                                const TrackingParams& params, int& next_id) {
  if (solution.paths.size() != trajectories.size()) throw ContractViolation("advance: one path per trajectory");
  std::vector<bool> used(detections.size(), false);
  std::vector<Trajectory> next;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    Trajectory tr = trajectories[i];
    double p = params.prediction_prob;
    if (solution.paths[i].size() >= 2) {
      const TrackNode& node = graph.nodes[static_cast<std::size_t>(solution.paths[i][1])];
      const bool candidate = node.kind == TrackNode::Kind::kCandidate;
      tr.history.push_back({frame, node.position, !candidate});
      if (candidate) {
        const Detection& det = detections[static_cast<std::size_t>(node.candidate)];
        used[static_cast<std::size_t>(node.candidate)] = true;
        p = det.prob;
        tr.last_crop = det.crop;
        tr.has_crop = true;
      }
    } else {
      tr.history.push_back({frame, predict_positions(tr, 1, params.gate).front(), true});
    }
    tr.people_score = params.lambda * p + (1.0 - params.lambda) * tr.people_score;
    if (tr.people_score >= params.theta_drop) next.push_back(std::move(tr));
  }
  for (std::size_t c = 0; c < detections.size(); ++c) {
    if (used[c]) continue;
    Trajectory tr;
    tr.id = next_id++;
    tr.history.push_back({frame, detections[c].position, false});
    tr.people_score = detections[c].prob;
    tr.last_crop = detections[c].crop;
    tr.has_crop = true;
    next.push_back(std::move(tr));
  }
  return next;
}

Tracker::Tracker(TrackingParams params) : params_(std::move(params)) { params_.validate(); }

const std::vector<Trajectory>& Tracker::step(int frame, std::span<const std::vector<Detection>> window) {
  if (window.empty()) throw ContractViolation("Tracker::step: window needs the current frame");
  const TrackingGraph graph = build_graph(trajectories_, window, params_);
  const PathSet solution = solve_disjoint_paths(graph);
  trajectories_ = advance(trajectories_, graph, solution, window.front(), frame, params_, next_id_);
  return trajectories_;
}

}  // namespace action4d

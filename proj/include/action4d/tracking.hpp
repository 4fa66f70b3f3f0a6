#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "action4d/carving.hpp"
#include "action4d/geometry.hpp"

namespace action4d {

struct TrackNode;

/// Positions are continuous (m, n) column coordinates in voxel units.
struct TrackingParams {
  int lookahead = 3;          // n: future frames in the graph
  double gate = 8.0;          // d_L in voxels
  double lambda = 0.3;        // people-score smoothing
  double theta_drop = 0.5;
  double prediction_prob = 0.3;
  double c0 = 1.0;            // trajectory node cost numerator
  double w_prob = 1.0;
  double w_dist = 1.0;
  double w_volume = 1.0;
  /// Optional extra appearance term added to every edge cost.
  std::function<double(const TrackNode&, const TrackNode&)> appearance;

  void validate() const;
};

struct Detection {
  Vec2 position = Vec2::Zero();
  double prob = 0.0;
  PersonVolume crop;
};

struct TrackPoint {
  int frame = 0;
  Vec2 position = Vec2::Zero();
  bool predicted = false;
};

struct Trajectory {
  int id = 0;
  std::vector<TrackPoint> history;
  double people_score = 0.0;
  PersonVolume last_crop;
  bool has_crop = false;

  int length() const { return static_cast<int>(history.size()); }
};

struct TrackNode {
  enum class Kind { kTrajectory, kCandidate, kPrediction };
  Kind kind = Kind::kCandidate;
  int layer = 0;  // 0 holds trajectories (frame t-1), layer k holds frame t-1+k
  Vec2 position = Vec2::Zero();
  std::optional<double> prob;
  const PersonVolume* crop = nullptr;
  double node_cost = 0.0;
  int trajectory = -1;  // trajectory and prediction nodes
  int candidate = -1;   // index within the layer's detections
};

struct TrackEdge {
  int from = 0;
  int to = 0;
  double cost = 0.0;
};

/// Layered DAG; edges only join consecutive layers within the gate.
struct TrackingGraph {
  std::vector<TrackNode> nodes;
  std::vector<std::vector<int>> layers;
  std::vector<TrackEdge> edges;
  std::vector<std::vector<int>> out_edges;  // per node, indices into edges

  int layer_count() const { return static_cast<int>(layers.size()); }
  std::optional<double> edge_cost(int from, int to) const;
};

/// w_p |dprob| + w_d dist / d_L + w_v (1 - IoU); a term lacking a payload on
/// either side contributes half its weight. Throws ContractViolation unless b
/// is one layer after a and within the gate.
double edge_cost(const TrackNode& a, const TrackNode& b, const TrackingParams& params);

/// Constant-velocity positions for the next `count` frames from the last two
/// history points, with the per-frame step clamped to the gate.
std::vector<Vec2> predict_positions(const Trajectory& trajectory, int count, double gate);

/// Layer 0: one node per trajectory. Layer k >= 1: detections of frame
/// t-1+k plus one prediction node per trajectory.
TrackingGraph build_graph(std::span<const Trajectory> trajectories,
                          std::span<const std::vector<Detection>> window, const TrackingParams& params);

struct PathSet {
  std::vector<std::vector<int>> paths;  // per trajectory, one node id per layer
  double cost = 0.0;
};

/// Node-disjoint paths from every trajectory node through all layers with
/// minimum total node and edge cost. Min-cost flow on the node-split graph,
/// successive shortest paths with potentials, trajectories augmented in order.
PathSet solve_disjoint_paths(const TrackingGraph& graph);

/// Total node and edge cost; throws ContractViolation if a step is not an edge.
double path_set_cost(const TrackingGraph& graph, const std::vector<std::vector<int>>& paths);

/// Extends each trajectory by its layer-1 node, updates and thresholds the
/// people score, then opens a trajectory for each unused layer-1 detection.
std::vector<Trajectory> advance(std::span<const Trajectory> trajectories, const TrackingGraph& graph,
                                const PathSet& solution, std::span<const Detection> detections, int frame,
                                const TrackingParams& params, int& next_id);

/// Owns the live trajectory set across frames.
class Tracker {
 public:
  explicit Tracker(TrackingParams params);

  /// `window` holds detections for frames frame .. frame + k (k <= lookahead).
  const std::vector<Trajectory>& step(int frame, std::span<const std::vector<Detection>> window);

  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const TrackingParams& params() const { return params_; }

 private:
  TrackingParams params_;
  std::vector<Trajectory> trajectories_;
  int next_id_ = 1;
};

}  // namespace action4d

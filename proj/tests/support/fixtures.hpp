#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "action4d/pipeline.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return A4D_DATA_DIR; }

inline std::vector<action4d::Camera> desk_rig() {
  return action4d::load_calibration(data_dir() / "calib" / "desk_rig.json");
}

/// Renders `frames` frames of `script` and pushes them through a pipeline,
/// returning the formatted records.
inline std::vector<std::string> run_scene(const action4d::RunConfig& config, const action4d::SceneScript& script,
                                          const std::vector<action4d::Camera>& cameras, int frames,
                                          std::optional<action4d::WeightBundle> people = std::nullopt,
                                          std::optional<action4d::WeightBundle> action = std::nullopt) {
  action4d::Pipeline pipeline(config, cameras, std::move(people), std::move(action));
  std::vector<std::string> lines;
  auto keep = [&](const std::vector<action4d::FrameRecord>& batch) {
    for (const auto& r : batch) lines.push_back(action4d::format_record(r));
  };
  action4d::RenderOptions options;
  options.workers = config.workers;
  for (int k = 0; k < frames; ++k) {
    const auto frame = script.at(k);
    std::vector<action4d::DepthImage> depths;
    for (const auto& cam : cameras) depths.push_back(action4d::render_depth(frame, cam, options));
    keep(pipeline.push(depths));
  }
  keep(pipeline.finish());
  return lines;
}

}  // namespace fixtures

namespace fixtures {

struct IdentityReport {
  int switches = 0;          // a ground-truth person changed its matched id
  int missed = 0;            // person-frames with no matched track
  int false_tracks = 0;      // reported tracks matched to nobody
  std::set<int> ids;         // every reported id
  std::map<int, std::set<int>> ids_per_person;
};

/// One-to-one matching of reported tracks to scripted persons per frame.
/// A person keeps last frame's track while it is still within `radius`
/// columns; remaining pairs are matched greedily by distance. Unmatched
/// tracks count as false tracks, unmatched persons as missed.
inline IdentityReport identity_report(const std::vector<std::string>& lines, const action4d::SceneScript& script,
                                      const action4d::GridSpec& spec, double radius) {
  IdentityReport rep;
  std::map<int, int> last_id;
  for (const auto& line : lines) {
    const action4d::FrameRecord r = action4d::parse_record(line);
    const auto truth = action4d::ground_truth_detections(script.at(r.frame), spec);
    auto dist = [&](const action4d::TrackRecord& t, const action4d::GroundTruthDetection& g) {
      return std::hypot(t.column.x() - g.m, t.column.y() - g.n);
    };
    std::map<int, int> match;  // person -> track index
    std::set<std::size_t> used;
    for (const auto& g : truth) {
      const auto it = last_id.find(g.person_id);
      if (it == last_id.end()) continue;
      for (std::size_t i = 0; i < r.tracks.size(); ++i) {
        if (r.tracks[i].id == it->second && dist(r.tracks[i], g) <= radius) {
          match[g.person_id] = static_cast<int>(i);
          used.insert(i);
        }
      }
    }
    std::vector<std::tuple<double, int, std::size_t>> pairs;
    for (const auto& g : truth) {
      if (match.count(g.person_id)) continue;
      for (std::size_t i = 0; i < r.tracks.size(); ++i) {
        const double d = dist(r.tracks[i], g);
        if (!used.count(i) && d <= radius) pairs.emplace_back(d, g.person_id, i);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [d, person, i] : pairs) {
      if (match.count(person) || used.count(i)) continue;
      match[person] = static_cast<int>(i);
      used.insert(i);
    }
    for (const auto& t : r.tracks) rep.ids.insert(t.id);
    rep.false_tracks += static_cast<int>(r.tracks.size() - used.size());
    for (const auto& g : truth) {
      const auto m = match.find(g.person_id);
      if (m == match.end()) {
        ++rep.missed;
        continue;
      }
      const int id = r.tracks[static_cast<std::size_t>(m->second)].id;
      rep.ids_per_person[g.person_id].insert(id);
      const auto it = last_id.find(g.person_id);
      if (it != last_id.end() && it->second != id) ++rep.switches;
      last_id[g.person_id] = id;
    }
  }
  return rep;
}

}  // namespace fixtures

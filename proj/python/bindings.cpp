#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "action4d/error.hpp"
#include "action4d/pipeline.hpp"

namespace py = pybind11;
using namespace action4d;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

DepthImage to_depth(const FloatArray& a) {
  if (a.ndim() != 2) throw py::value_error("depth image must be 2-D (height, width)");
  DepthImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.samples.data(), a.data(), img.samples.size() * sizeof(float));
  return img;
}

FloatArray from_depth(const DepthImage& img) {
  FloatArray a({img.height, img.width});
  std::memcpy(a.mutable_data(), img.samples.data(), img.samples.size() * sizeof(float));
  return a;
}

std::vector<DepthImage> to_depths(const std::vector<FloatArray>& arrays) {
  std::vector<DepthImage> out;
  for (const auto& a : arrays) out.push_back(to_depth(a));
  return out;
}

ByteArray from_grid(const VoxelGrid& g) {
  ByteArray a({g.spec.dims[0], g.spec.dims[1], g.spec.dims[2]});
  std::memcpy(a.mutable_data(), g.occupancy.data(), g.occupancy.size());
  return a;
}

VoxelGrid to_grid(const ByteArray& a, const GridSpec& spec) {
  if (a.ndim() != 3 || a.shape(0) != spec.dims[0] || a.shape(1) != spec.dims[1] || a.shape(2) != spec.dims[2]) {
    throw py::value_error("occupancy array shape must equal the grid dims");
  }
  VoxelGrid g(spec);
  for (std::size_t i = 0; i < g.occupancy.size(); ++i) g.occupancy[i] = a.data()[i] ? 1 : 0;
  return g;
}

PersonVolume to_volume(const ByteArray& a) {
  if (a.ndim() != 3 || a.shape(0) != PersonVolume::kSizeX || a.shape(1) != PersonVolume::kSizeY ||
      a.shape(2) != PersonVolume::kSizeZ) {
    throw py::value_error("crop must have shape (31, 31, 43)");
  }
  PersonVolume v;
  for (std::size_t i = 0; i < PersonVolume::kVoxels; ++i) v.voxels[i] = a.data()[i] ? 1 : 0;
  return v;
}

ByteArray from_volume(const PersonVolume& v) {
  ByteArray a({PersonVolume::kSizeX, PersonVolume::kSizeY, PersonVolume::kSizeZ});
  std::memcpy(a.mutable_data(), v.voxels.data(), v.voxels.size());
  return a;
}

FloatArray from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
  FloatArray a(shape);
  std::memcpy(a.mutable_data(), t.data.data(), t.data.size() * sizeof(float));
  return a;
}

Tensor to_tensor(const FloatArray& a) {
  std::vector<int> dims;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) dims.push_back(static_cast<int>(a.shape(i)));
  return Tensor(dims, std::vector<float>(a.data(), a.data() + a.size()));
}

HeightMap to_map(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("height map must be 2-D");
  HeightMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::memcpy(m.values.data(), a.data(), m.values.size() * sizeof(double));
  return m;
}

py::array_t<double> from_map(const HeightMap& m) {
  py::array_t<double> a({m.nx, m.ny});
  std::memcpy(a.mutable_data(), m.values.data(), m.values.size() * sizeof(double));
  return a;
}

WeightBundle bundle_from(const std::string& descriptor, const std::vector<std::pair<std::string, FloatArray>>& tensors) {
  WeightBundle b;
  b.descriptor = nlohmann::json::parse(descriptor);
  for (const auto& [name, a] : tensors) b.add(name, to_tensor(a));
  b.validate();
  return b;
}

py::tuple bundle_to(const WeightBundle& b) {
  py::list tensors;
  for (const auto& [name, t] : b.tensors) tensors.append(py::make_tuple(name, from_tensor(t)));
  return py::make_tuple(b.descriptor.dump(), tensors);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Volumetric multi-camera person tracking and action recognition";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_AssertionError);

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init<>())
      .def_static("full_default", &GridSpec::full_default)
      .def_static("desk_profile", &GridSpec::desk_profile)
      .def_static("centered", &GridSpec::centered, py::arg("cx"), py::arg("cy"), py::arg("voxel_size"), py::arg("dims"))
      .def_property_readonly("dims", [](const GridSpec& s) { return s.dims; })
      .def_property_readonly("voxel_size", [](const GridSpec& s) { return s.voxel_size; })
      .def_property_readonly("origin", [](const GridSpec& s) { return std::array<double, 3>{s.origin.x(), s.origin.y(), s.origin.z()}; })
      .def("__repr__", [](const GridSpec& s) {
        return "GridSpec(dims=" + std::to_string(s.dims[0]) + "x" + std::to_string(s.dims[1]) + "x" +
               std::to_string(s.dims[2]) + ", voxel_size=" + std::to_string(s.voxel_size) + ")";
      });

  py::class_<Camera>(m, "Camera")
      .def_readonly("name", &Camera::name)
      .def_readonly("width", &Camera::width)
      .def_readonly("height", &Camera::height)
      .def_readonly("min_depth", &Camera::min_depth)
      .def_readonly("max_depth", &Camera::max_depth)
      .def("project", [](const Camera& c, std::array<double, 3> p) {
        const Projection pr = project(Vec3(p[0], p[1], p[2]), c);
        return py::make_tuple(pr.pixel.x(), pr.pixel.y(), pr.cam_depth, pr.in_fov);
      });

  m.def("load_calibration", &load_calibration, py::arg("path"));
  m.def("ring_rig",
        [](int count, double radius, double mount, double aim_z, int width, int height, double hfov, double max_depth) {
          return ring_rig(count, Vec3::Zero(), radius, mount, Vec3(0, 0, aim_z), width, height, hfov, 0.4, max_depth);
        },
        py::arg("count") = 4, py::arg("radius") = 5.5, py::arg("mount") = 4.4, py::arg("aim_z") = 1.2,
        py::arg("width") = 256, py::arg("height") = 212, py::arg("hfov") = 70.6, py::arg("max_depth") = 20.0);

  py::class_<SceneScript>(m, "SceneScript")
      .def_readonly("frames", &SceneScript::frames)
      .def_readonly("frame_rate", &SceneScript::frame_rate)
      .def("person_ids", [](const SceneScript& s) {
        std::vector<int> ids;
        for (const auto& p : s.persons) ids.push_back(p.id);
        return ids;
      })
      .def("label", [](const SceneScript& s, int person, int frame) {
        for (const auto& p : s.persons) {
          if (p.id == person) return p.present(frame) ? p.label(frame) : -1;
        }
        throw py::key_error("no such person");
      });
  m.def("parse_scene", &parse_scene, py::arg("text"));
  m.def("random_clutter",
        [](std::uint64_t seed, int count, double half_extent) {
          SceneScript s;
          s.primitives = random_clutter(seed, count, half_extent);
          return nlohmann::json::parse(format_scene(s))["primitives"].dump();
        },
        py::arg("seed"), py::arg("count"), py::arg("half_extent"), "JSON list of random furniture primitives.");
  m.def("load_scene", &load_scene, py::arg("path"));

  m.def("render_depth",
        [](const SceneScript& s, int frame, const Camera& cam, double noise_sigma, std::uint64_t seed, bool center_ray) {
          RenderOptions o;
          o.noise_sigma = noise_sigma;
          o.seed = seed;
          o.sampling = center_ray ? DepthSampling::kCenterRay : DepthSampling::kFootprintMin;
          return from_depth(render_depth(s.at(frame), cam, o));
        },
        py::arg("scene"), py::arg("frame"), py::arg("camera"), py::arg("noise_sigma") = 0.0, py::arg("seed") = 0,
        py::arg("center_ray") = false);

  m.def("ground_truth_occupancy",
        [](const SceneScript& s, int frame, const GridSpec& spec) { return from_grid(ground_truth_occupancy(s.at(frame), spec)); },
        py::arg("scene"), py::arg("frame"), py::arg("spec"));
  m.def("ground_truth_detections",
        [](const SceneScript& s, int frame, const GridSpec& spec) {
          std::vector<std::tuple<int, int, int>> out;
          for (const auto& d : ground_truth_detections(s.at(frame), spec)) out.emplace_back(d.person_id, d.m, d.n);
          return out;
        },
        py::arg("scene"), py::arg("frame"), py::arg("spec"));

  m.def("carve",
        [](const GridSpec& spec, const std::vector<Camera>& cams, const std::vector<FloatArray>& depths, int workers) {
          const auto d = to_depths(depths);
          return from_grid(carve(spec, cams, d, workers));
        },
        py::arg("spec"), py::arg("cameras"), py::arg("depths"), py::arg("workers") = 1);
  m.def("reconstruct",
        [](const GridSpec& spec, const std::vector<Camera>& cams, const std::vector<FloatArray>& depths, int dilation,
           int workers) {
          const CarvePlan plan(spec, cams, workers);
          const auto d = to_depths(depths);
          return from_grid(reconstruct(plan, d, dilation, workers));
        },
        py::arg("spec"), py::arg("cameras"), py::arg("depths"), py::arg("mask_dilation") = 0, py::arg("workers") = 1);

  m.def("topdown_envelope",
        [](const ByteArray& occ, const GridSpec& spec) { return from_map(topdown_envelope(to_grid(occ, spec))); },
        py::arg("occupancy"), py::arg("spec"));
  m.def("smooth", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, double sigma) {
    return from_map(smooth(to_map(a), sigma));
  }, py::arg("height_map"), py::arg("sigma"));
  m.def("detect_candidates",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, int radius, double min_height) {
          std::vector<std::tuple<int, int, double>> out;
          for (const auto& c : detect_candidates(to_map(a), radius, min_height)) out.emplace_back(c.m, c.n, c.peak_height);
          return out;
        },
        py::arg("height_map"), py::arg("nms_radius"), py::arg("min_height"));
  m.def("crop_person",
        [](const ByteArray& occ, const GridSpec& spec, int mm, int nn) { return from_volume(crop_person(to_grid(occ, spec), mm, nn)); },
        py::arg("occupancy"), py::arg("spec"), py::arg("m"), py::arg("n"));

  m.def("people_net_descriptor", [] { return people_net_descriptor().dump(); });
  m.def("action_net_descriptor", [] { return action_net_descriptor().dump(); });
  m.def("save_bundle",
        [](const std::filesystem::path& path, const std::string& descriptor,
           const std::vector<std::pair<std::string, FloatArray>>& tensors) { save_bundle(path, bundle_from(descriptor, tensors)); },
        py::arg("path"), py::arg("descriptor"), py::arg("tensors"),
        "Writes (name, array) pairs and a JSON descriptor as a weights file.");
  m.def("load_bundle", [](const std::filesystem::path& path) { return bundle_to(load_bundle(path)); }, py::arg("path"),
        "Returns (descriptor_json, [(name, array), ...]).");

  py::class_<PeopleNet>(m, "PeopleNet")
      .def(py::init([](const std::filesystem::path& path) { return PeopleNet(load_bundle(path)); }), py::arg("path"))
      .def("probability", [](const PeopleNet& net, const ByteArray& crop) { return net.probability(to_volume(crop)); });
  m.def("heuristic_person_probability", [](const ByteArray& crop) { return heuristic_person_probability(to_volume(crop)); });

  py::class_<ActionNet>(m, "ActionNet")
      .def(py::init([](const std::filesystem::path& path) { return ActionNet(load_bundle(path)); }), py::arg("path"))
      .def_property_readonly("classes", &ActionNet::classes)
      .def("initial_state", [](const ActionNet& net) {
        const LstmState s = net.initial_state();
        return py::make_tuple(s.h, s.c);
      })
      .def("step",
           [](const ActionNet& net, const ByteArray& crop, std::vector<float> h, std::vector<float> c) {
             ActionStep s = net.step(to_volume(crop), LstmState{std::move(h), std::move(c)});
             return py::make_tuple(s.probabilities, s.state.h, s.state.c, from_tensor(s.alpha));
           },
           py::arg("crop"), py::arg("h"), py::arg("c"), "Returns (probabilities, h, c, alpha).");
  m.def("classify_sequence",
        [](const std::vector<ByteArray>& crops, const std::filesystem::path& weights) {
          std::vector<PersonVolume> vols;
          for (const auto& c : crops) vols.push_back(to_volume(c));
          return classify_sequence(vols, load_bundle(weights));
        },
        py::arg("crops"), py::arg("weights"));
  m.def("attention_pool",
        [](const FloatArray& features, const std::vector<float>& h, const FloatArray& u) {
          AttentionResult r = attention_pool(to_tensor(features), h, to_tensor(u));
          return py::make_tuple(r.v, from_tensor(r.alpha));
        },
        py::arg("features"), py::arg("h"), py::arg("u"));

  m.def("evaluate",
        [](const std::vector<int>& pred, const std::vector<int>& truth, int window) {
          const Accuracy a = evaluate(pred, truth, window);
          return py::make_tuple(a.acc, a.racc);
        },
        py::arg("predicted"), py::arg("truth"), py::arg("window") = 3, "Returns (Acc, RAcc) in percent.");
  m.def("run",
        [](const std::filesystem::path& config) {
          const RunSummary s = run(load_run_config(config));
          return py::dict(py::arg("frames") = s.frames, py::arg("heuristic_scorer") = s.heuristic_scorer,
                          py::arg("ms_per_frame") = s.timings.total_ms() / std::max(1, s.timings.frames));
        },
        py::arg("config"), "Runs a config file; writes records.jsonl and meta.json.");
}

#include "mrst/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace mrst {

using nlohmann::json;

ct::Geometry GeometryConfig::resolve(std::size_t width, std::size_t height,
                                     double pixel_size) const {
  ct::Geometry g = ct::Geometry::covering(width, height, pixel_size, n_angles);
  if (n_detectors > 0) g.n_detectors = n_detectors;
  if (detector_spacing > 0.0) g.detector_spacing = detector_spacing;
  g.validate();
  return g;
}

ConfigValidationError::ConfigValidationError(std::vector<std::string> problems)
    : ConfigError([&] {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  // Returns the section object (or an empty one) after rejecting unknown keys.
  const json& section(const json& root, const std::string& key,
                      std::initializer_list<const char*> allowed) {
    static const json empty = json::object();
    if (!root.contains(key)) return empty;
    const json& s = root[key];
    if (!s.is_object()) {
      problems_.push_back(key + ": expected an object");
      return empty;
    }
    reject_unknown(s, key + ".", allowed);
    return s;
  }

  void reject_unknown(const json& obj, const std::string& prefix,
                      std::initializer_list<const char*> allowed) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
      if (!ok.count(k)) problems_.push_back(prefix + k + ": unknown key");
    }
  }

  template <class T, class Check>
  void field(const json& obj, const std::string& path, const char* key, T& out, Check check,
             const char* requirement) {
    if (!obj.contains(key)) return;
    const std::string where = path + key;
    try {
      const json& v = obj.at(key);
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<long long>() < 0) throw std::invalid_argument("expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      }
      T value = v.get<T>();
      if (!check(value)) {
        problems_.push_back(where + ": " + requirement);
        return;
      }
      out = value;
    } catch (const std::exception& e) {
      problems_.push_back(where + ": " + e.what());
    }
  }

  void problem(std::string p) { problems_.push_back(std::move(p)); }

 private:
  std::vector<std::string>& problems_;
};

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

void apply_override(json& doc, const std::string& assignment, std::vector<std::string>& problems) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    problems.push_back("override '" + assignment + "': expected key.path=value");
    return;
  }
  const std::string key = assignment.substr(0, eq);
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = parse_override_value(assignment.substr(eq + 1));
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    if (!node->is_object()) {
      problems.push_back("override '" + key + "': '" + part + "' is not an object");
      return;
    }
    start = dot + 1;
  }
}

auto positive = [](auto v) { return v > 0; };
auto non_negative = [](auto v) { return v >= 0; };
auto any = [](const auto&) { return true; };

}  // namespace

RunConfig parse_run_config(const json& input, const std::vector<std::string>& overrides) {
  std::vector<std::string> problems;
  json doc = input.is_null() ? json::object() : input;
  if (!doc.is_object()) throw ConfigValidationError({"<root>: expected an object"});
  for (const auto& o : overrides) apply_override(doc, o, problems);

  Reader rd(problems);
  rd.reject_unknown(doc, "", {"name", "description", "patch", "geometry", "noise", "learn", "recon", "roi"});

  RunConfig cfg;
  cfg.learn.thresholds.clear();

  const json& patch = rd.section(doc, "patch", {"patch_side", "stride"});
  rd.field(patch, "patch.", "patch_side", cfg.patch.patch_side, positive, "must be >= 1");
  rd.field(patch, "patch.", "stride", cfg.patch.stride, positive, "must be >= 1");
  if (cfg.patch.stride > cfg.patch.patch_side) rd.problem("patch.stride: must not exceed patch.patch_side");

  const json& geo = rd.section(doc, "geometry", {"n_angles", "n_detectors", "detector_spacing"});
  rd.field(geo, "geometry.", "n_angles", cfg.geometry.n_angles, positive, "must be >= 1");
  rd.field(geo, "geometry.", "n_detectors", cfg.geometry.n_detectors, non_negative, "must be >= 0");
  rd.field(geo, "geometry.", "detector_spacing", cfg.geometry.detector_spacing, non_negative,
           "must be >= 0");

  const json& noise = rd.section(doc, "noise", {"incident_photons", "seed", "noiseless"});
  rd.field(noise, "noise.", "incident_photons", cfg.noise.incident_photons,
           [](double v) { return v > 0 && std::isfinite(v); }, "must be positive");
  rd.field(noise, "noise.", "seed", cfg.noise.seed, any, "");
  rd.field(noise, "noise.", "noiseless", cfg.noise.noiseless, any, "");

  const json& learn = rd.section(doc, "learn", {"layers", "iterations", "thresholds", "threshold_start",
                                                "threshold_ratio", "max_patches", "seed"});
  std::size_t layers = 0;
  double start = 60.0;
  double ratio = 0.5;
  rd.field(learn, "learn.", "layers", layers, positive, "must be >= 1");
  rd.field(learn, "learn.", "iterations", cfg.learn.iterations, positive, "must be >= 1");
  rd.field(learn, "learn.", "threshold_start", start, non_negative, "must be >= 0");
  rd.field(learn, "learn.", "threshold_ratio", ratio, non_negative, "must be >= 0");
  rd.field(learn, "learn.", "max_patches", cfg.learn.max_patches, any, "");
  rd.field(learn, "learn.", "seed", cfg.learn.seed, any, "");
  std::vector<double> thresholds;
  rd.field(learn, "learn.", "thresholds", thresholds,
           [](const std::vector<double>& v) {
             return !v.empty() && std::all_of(v.begin(), v.end(), [](double t) { return t >= 0; });
           },
           "must be a non-empty list of non-negative numbers");
  if (!thresholds.empty()) {
    if (layers != 0 && layers != thresholds.size()) {
      rd.problem("learn.layers: does not match the length of learn.thresholds");
    }
    cfg.learn.thresholds = thresholds;
  } else {
    cfg.learn.thresholds = geometric_thresholds(layers == 0 ? 2 : layers, start, ratio);
  }
  cfg.learn.patch = cfg.patch;

  const json& rc = rd.section(doc, "recon", {"beta", "gammas", "outer_iters", "inner_iters", "subsets",
                                             "alpha", "rho_min"});
  rd.field(rc, "recon.", "beta", cfg.recon.beta, non_negative, "must be >= 0");
  rd.field(rc, "recon.", "gammas", cfg.recon.gammas,
           [](const std::vector<double>& v) {
             return std::all_of(v.begin(), v.end(), [](double t) { return t >= 0; });
           },
           "must be a list of non-negative numbers");
  rd.field(rc, "recon.", "outer_iters", cfg.recon.outer_iters, positive, "must be >= 1");
  rd.field(rc, "recon.", "inner_iters", cfg.recon.inner_iters, positive, "must be >= 1");
  rd.field(rc, "recon.", "subsets", cfg.recon.subsets, positive, "must be >= 1");
  rd.field(rc, "recon.", "alpha", cfg.recon.alpha, [](double a) { return a > 1.0 && a < 2.0; },
           "must lie in (1, 2)");
  rd.field(rc, "recon.", "rho_min", cfg.recon.rho_min, [](double r) { return r > 0.0 && r <= 1.0; },
           "must lie in (0, 1]");
  if (cfg.recon.subsets > cfg.geometry.n_angles) {
    rd.problem("recon.subsets: must not exceed geometry.n_angles");
  }

  const json& roi = rd.section(doc, "roi", {"radius_fraction"});
  rd.field(roi, "roi.", "radius_fraction", cfg.roi_radius_fraction,
           [](double f) { return f > 0.0 && f <= 1.0; }, "must lie in (0, 1]");

  if (!problems.empty()) throw ConfigValidationError(std::move(problems));
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigValidationError({"<root>: invalid JSON: " + std::string(e.what())});
  }
  return parse_run_config(doc, overrides);
}

json RunConfig::to_json() const {
  return json{
      {"patch", {{"patch_side", patch.patch_side}, {"stride", patch.stride}}},
      {"geometry",
       {{"n_angles", geometry.n_angles},
        {"n_detectors", geometry.n_detectors},
        {"detector_spacing", geometry.detector_spacing}}},
      {"noise",
       {{"incident_photons", noise.incident_photons},
        {"seed", noise.seed},
        {"noiseless", noise.noiseless}}},
      {"learn",
       {{"layers", learn.thresholds.size()},
        {"iterations", learn.iterations},
        {"thresholds", learn.thresholds},
        {"max_patches", learn.max_patches},
        {"seed", learn.seed}}},
      {"recon",
       {{"beta", recon.beta},
        {"gammas", recon.gammas},
        {"outer_iters", recon.outer_iters},
        {"inner_iters", recon.inner_iters},
        {"subsets", recon.subsets},
        {"alpha", recon.alpha},
        {"rho_min", recon.rho_min}}},
      {"roi", {{"radius_fraction", roi_radius_fraction}}},
  };
}

}  // namespace mrst

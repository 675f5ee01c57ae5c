#pragma once

// JSON run configuration shared by the CLI subcommands. Every section is
// optional; unknown keys are rejected and all validation problems are
// reported together, each with its key path.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrst/ctsim.hpp"
#include "mrst/error.hpp"
#include "mrst/imaging.hpp"
#include "mrst/mrst.hpp"
#include "mrst/recon.hpp"

namespace mrst {

struct GeometryConfig {
  std::size_t n_angles = 180;
  std::size_t n_detectors = 0;    // 0: wide enough for the image diagonal
  double detector_spacing = 0.0;  // 0: the image pixel size

  ct::Geometry resolve(std::size_t width, std::size_t height, double pixel_size) const;
};

struct RunConfig {
  PatchConfig patch;
  GeometryConfig geometry;
  ct::NoiseConfig noise;
  LearnConfig learn;
  recon::ReconConfig recon;
  double roi_radius_fraction = 0.95;

  nlohmann::json to_json() const;
};

/// Thrown with every problem found, one "key.path: message" per line.
class ConfigValidationError : public ConfigError {
 public:
  explicit ConfigValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Applies "a.b.c=value" overrides (value parsed as JSON, falling back to a
/// string) and validates the result.
RunConfig parse_run_config(const nlohmann::json& doc,
                           const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

}  // namespace mrst

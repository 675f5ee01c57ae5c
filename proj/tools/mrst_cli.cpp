// Command-line entry point: phantom -> simulate -> fbp -> learn ->
// reconstruct -> evaluate. Results go to files or stdout, progress to stderr
// as one JSON object per line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrst/ctsim.hpp"
#include "mrst/error.hpp"
#include "mrst/io.hpp"
#include "mrst/kernels.hpp"
#include "mrst/metrics.hpp"
#include "mrst/mrst.hpp"
#include "mrst/parallel.hpp"
#include "mrst/recon.hpp"
#include "mrst/run_config.hpp"
#include "mrst/single_layer.hpp"

namespace {

using nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kParse = 5,
  kNumeric = 6,
  kInput = 7,
};

void log_event(const json& j) { std::cerr << j.dump() << '\n'; }

mrst::RunConfig resolve_config(const std::string& path, const std::vector<std::string>& sets) {
  if (path.empty()) return mrst::parse_run_config(json::object(), sets);
  return mrst::load_run_config(path, sets);
}

void log_config(const char* command, const mrst::RunConfig& cfg) {
  log_event({{"event", "config"},
             {"command", command},
             {"kernels", mrst::simd::active().name},
             {"threads", mrst::max_threads()},
             {"config", cfg.to_json()}});
}

struct PhantomArgs {
  std::string kind = "shepp_logan";
  std::size_t width = 128;
  std::size_t height = 128;
  double pixel_size = 1.0;
  double value = 1000.0;
  double disk_radius = 0.5;
  std::string out;
};

int run_phantom(const PhantomArgs& a) {
  mrst::ct::PhantomOptions opts;
  opts.pixel_size = a.pixel_size;
  opts.value = a.value;
  opts.disk_radius_fraction = a.disk_radius;
  const auto img = mrst::ct::make_phantom(mrst::ct::parse_phantom_kind(a.kind), a.width, a.height, opts);
  mrst::io::save_image(a.out, img);
  log_event({{"event", "phantom"}, {"kind", a.kind}, {"width", a.width}, {"height", a.height}, {"out", a.out}});
  return kOk;
}

struct SimulateArgs {
  std::string image;
  std::string out;
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<double> i0;
  std::optional<std::size_t> n_angles;
  bool noiseless = false;
};

bool config_has_seed(const std::string& path, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    if (s.rfind("noise.seed=", 0) == 0) return true;
  }
  if (path.empty()) return false;
  std::ifstream in(path);
  const auto doc = json::parse(in, nullptr, false);
  return doc.is_object() && doc.contains("noise") && doc["noise"].is_object() && doc["noise"].contains("seed");
}

int run_simulate(SimulateArgs a) {
  if (!a.noiseless && !a.seed && !config_has_seed(a.config, a.sets)) {
    throw mrst::ConfigError("simulate requires a seed (--seed, noise.seed or --noiseless)");
  }
  if (a.seed) a.sets.push_back("noise.seed=" + std::to_string(*a.seed));
  if (a.i0) a.sets.push_back("noise.incident_photons=" + json(*a.i0).dump());
  if (a.n_angles) a.sets.push_back("geometry.n_angles=" + std::to_string(*a.n_angles));
  if (a.noiseless) a.sets.push_back("noise.noiseless=true");
  const auto cfg = resolve_config(a.config, a.sets);
  log_config("simulate", cfg);
  const auto img = mrst::io::load_image(a.image);
  const auto geo = cfg.geometry.resolve(img.width(), img.height(), img.pixel_size());
  const auto sino = mrst::ct::simulate_lowdose(img, geo, cfg.noise);
  mrst::io::save_sinogram(a.out, sino);
  log_event({{"event", "simulate"},
             {"n_angles", geo.n_angles},
             {"n_detectors", geo.n_detectors},
             {"detector_spacing", geo.detector_spacing},
             {"out", a.out}});
  return kOk;
}

struct FbpArgs {
  std::string sino;
  std::string out;
  std::string like;
  std::size_t width = 0;
  std::size_t height = 0;
  double pixel_size = 1.0;
};

int run_fbp(FbpArgs a) {
  const auto sino = mrst::io::load_sinogram(a.sino);
  if (!a.like.empty()) {
    const auto ref = mrst::io::load_image(a.like);
    a.width = ref.width();
    a.height = ref.height();
    a.pixel_size = ref.pixel_size();
  }
  if (a.width == 0 || a.height == 0) throw mrst::ConfigError("fbp needs --width/--height or --like");
  const auto img = mrst::ct::fbp(sino, a.width, a.height, a.pixel_size);
  mrst::io::save_image(a.out, img);
  log_event({{"event", "fbp"}, {"width", a.width}, {"height", a.height}, {"out", a.out}});
  return kOk;
}

struct LearnArgs {
  std::vector<std::string> images;
  std::string config;
  std::vector<std::string> sets;
  std::string out;
};

int run_learn(const LearnArgs& a) {
  const auto cfg = resolve_config(a.config, a.sets);
  log_config("learn", cfg);
  std::vector<mrst::Image> images;
  for (const auto& p : a.images) images.push_back(mrst::io::load_image(p));
  const auto training = mrst::training_patches(images, cfg.learn);
  log_event({{"event", "training"}, {"patches", training.cols()}, {"patch_size", training.rows()}});
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t last = cfg.learn.thresholds.size() - 1;
  const auto result = mrst::learn(training, cfg.learn, [&](const mrst::LearnStep& s) {
    if (s.kind != mrst::BlockKind::transform || s.layer != last) return;
    const double obj = mrst::learn_objective(s.model, s.codes, s.residuals, cfg.learn.thresholds);
    log_event({{"event", "learn_iteration"},
               {"iter", s.iteration},
               {"objective", obj},
               {"wall_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  });
  mrst::io::save_model(a.out, result.model);
  log_event({{"event", "learn_done"},
             {"initial_objective", result.initial_objective},
             {"final_objective", result.objective_trace.back()},
             {"out", a.out}});
  return kOk;
}

struct ReconArgs {
  std::string sino;
  std::string model;
  std::string config;
  std::vector<std::string> sets;
  std::string init;
  std::string out;
  std::string reference;
  std::string solver = "mrst";
  std::string trace;
};

int run_reconstruct(const ReconArgs& a) {
  const auto cfg = resolve_config(a.config, a.sets);
  log_config("reconstruct", cfg);
  const auto sino = mrst::io::load_sinogram(a.sino);
  const auto model = mrst::io::load_model(a.model);
  const auto init = mrst::io::load_image(a.init);

  std::optional<mrst::Image> reference;
  std::optional<mrst::metrics::RoiMask> roi;
  mrst::recon::ReconOptions opts;
  if (!a.reference.empty()) {
    reference = mrst::io::load_image(a.reference);
    roi = mrst::metrics::circular_roi(init.width(), init.height(), cfg.roi_radius_fraction);
    opts.reference = &*reference;
    opts.roi = &*roi;
  }
  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace);
    if (!trace) throw mrst::IoError("cannot write " + a.trace);
    trace << "iteration\tobjective_after_image\tobjective\trmse\n";
  }
  opts.on_iteration = [&](const mrst::recon::TraceEntry& e) {
    json j{{"event", "recon_iteration"},
           {"iter", e.iteration},
           {"objective", e.objective},
           {"objective_after_image", e.objective_after_image},
           {"wall_s", e.wall_seconds}};
    if (std::isfinite(e.rmse)) j["rmse"] = e.rmse;
    log_event(j);
    if (trace.is_open()) {
      char line[160];
      std::snprintf(line, sizeof line, "%zu\t%.17g\t%.17g\t%.17g\n", e.iteration,
                    e.objective_after_image, e.objective, e.rmse);
      trace << line;
    }
  };

  mrst::recon::ReconResult result;
  if (a.solver == "st") {
    if (model.layers() != 1) throw mrst::ConfigError("--solver st needs a one-layer model");
    result = mrst::st::reconstruct(sino, model.transforms[0], cfg.patch, cfg.recon, init, opts);
  } else if (a.solver == "mrst") {
    result = mrst::recon::reconstruct(sino, model, cfg.patch, cfg.recon, init, opts);
  } else {
    throw mrst::ConfigError("unknown solver '" + a.solver + "' (expected mrst or st)");
  }
  mrst::io::save_image(a.out, result.image);
  log_event({{"event", "recon_done"}, {"solver", a.solver}, {"out", a.out}});
  return kOk;
}

struct EvaluateArgs {
  std::string recon;
  std::string reference;
  double roi_fraction = 0.95;
  std::string label = "value";
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto rec = mrst::io::load_image(a.recon);
  const auto ref = mrst::io::load_image(a.reference);
  const auto roi = mrst::metrics::circular_roi(ref.width(), ref.height(), a.roi_fraction);
  const auto q = mrst::metrics::evaluate(rec, ref, roi);
  char buf[256];
  std::snprintf(buf, sizeof buf, "metric\t%s\nrmse_hu\t%.6f\npsnr_db\t%.6f\nssim\t%.6f\n",
                a.label.c_str(), q.rmse, q.psnr, q.ssim);
  if (a.out.empty()) {
    std::cout << buf;
  } else {
    std::ofstream f(a.out);
    if (!f) throw mrst::IoError("cannot write " + a.out);
    f << buf;
  }
  return kOk;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ';';
  }
  return s;
}

int fail(const char* kind, int code, const std::string& message) {
  std::cerr << "error kind=" << kind << " code=" << code << " message=" << json(one_line(message)).dump()
            << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-layer residual sparsifying transforms for low-dose CT"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);

  PhantomArgs ph;
  auto* cmd_ph = app.add_subcommand("phantom", "Write a synthetic phantom image");
  cmd_ph->add_option("--kind", ph.kind, "shepp_logan, disk or uniform");
  cmd_ph->add_option("--width", ph.width);
  cmd_ph->add_option("--height", ph.height);
  cmd_ph->add_option("--pixel-size", ph.pixel_size, "mm");
  cmd_ph->add_option("--value", ph.value, "disk/uniform value, modified HU");
  cmd_ph->add_option("--disk-radius", ph.disk_radius, "fraction of min(width, height) / 2");
  cmd_ph->add_option("--out", ph.out)->required();

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Simulate a low-dose sinogram");
  cmd_sim->add_option("--image", sim.image)->required();
  cmd_sim->add_option("--out", sim.out)->required();
  cmd_sim->add_option("--config", sim.config);
  cmd_sim->add_option("--set", sim.sets, "key.path=value override");
  cmd_sim->add_option("--seed", sim.seed);
  cmd_sim->add_option("--i0", sim.i0, "incident photons per ray");
  cmd_sim->add_option("--n-angles", sim.n_angles);
  cmd_sim->add_flag("--noiseless", sim.noiseless);

  FbpArgs fb;
  auto* cmd_fbp = app.add_subcommand("fbp", "Filtered backprojection");
  cmd_fbp->add_option("--sino", fb.sino)->required();
  cmd_fbp->add_option("--out", fb.out)->required();
  cmd_fbp->add_option("--like", fb.like, "take dimensions from this image");
  cmd_fbp->add_option("--width", fb.width);
  cmd_fbp->add_option("--height", fb.height);
  cmd_fbp->add_option("--pixel-size", fb.pixel_size);

  LearnArgs le;
  auto* cmd_learn = app.add_subcommand("learn", "Learn an MRST model from images");
  cmd_learn->add_option("--images", le.images)->required();
  cmd_learn->add_option("--config", le.config);
  cmd_learn->add_option("--set", le.sets);
  cmd_learn->add_option("--out", le.out)->required();

  ReconArgs re;
  auto* cmd_re = app.add_subcommand("reconstruct", "PWLS reconstruction with a learned model");
  cmd_re->add_option("--sino", re.sino)->required();
  cmd_re->add_option("--model", re.model)->required();
  cmd_re->add_option("--config", re.config);
  cmd_re->add_option("--set", re.sets);
  cmd_re->add_option("--init", re.init)->required();
  cmd_re->add_option("--out", re.out)->required();
  cmd_re->add_option("--reference", re.reference, "ground truth for the RMSE trace");
  cmd_re->add_option("--solver", re.solver, "mrst or st");
  cmd_re->add_option("--trace", re.trace, "write the per-iteration trace as TSV");

  EvaluateArgs ev;
  auto* cmd_ev = app.add_subcommand("evaluate", "RMSE / PSNR / SSIM against a reference");
  cmd_ev->add_option("--recon", ev.recon)->required();
  cmd_ev->add_option("--reference", ev.reference)->required();
  cmd_ev->add_option("--roi-fraction", ev.roi_fraction);
  cmd_ev->add_option("--label", ev.label);
  cmd_ev->add_option("--out", ev.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", kUsage, e.what());
  }

  mrst::set_max_threads(threads);
  try {
    if (*cmd_ph) return run_phantom(ph);
    if (*cmd_sim) return run_simulate(sim);
    if (*cmd_fbp) return run_fbp(fb);
    if (*cmd_learn) return run_learn(le);
    if (*cmd_re) return run_reconstruct(re);
    if (*cmd_ev) return run_evaluate(ev);
  } catch (const mrst::ParseError& e) {
    return fail("parse", kParse, e.what());
  } catch (const mrst::IoError& e) {
    return fail("io", kIo, e.what());
  } catch (const mrst::ConfigError& e) {
    return fail("config", kConfig, e.what());
  } catch (const mrst::NumericError& e) {
    return fail("numeric", kNumeric, e.what());
  } catch (const mrst::InputError& e) {
    return fail("input", kInput, e.what());
  } catch (const std::exception& e) {
    return fail("internal", kInternal, e.what());
  }
  return kInternal;
}

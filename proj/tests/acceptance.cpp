// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mrst/ctsim.hpp"
#include "mrst/io.hpp"
#include "mrst/metrics.hpp"
#include "mrst/mrst.hpp"
#include "mrst/recon.hpp"
#include "mrst/run_config.hpp"
#include "mrst/single_layer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
namespace ct = mrst::ct;
namespace recon = mrst::recon;
using mrst::Image;
using mrst::PatchMatrix;
using oracle::MatrixXd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %-34s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

mrst::RunConfig load_config(const char* name) {
  return mrst::load_run_config(std::string(MRST_CONFIG_DIR) + "/" + name);
}

// --- learning -------------------------------------------------------------

void learning_criteria() {
  auto cfg = load_config("mrst3.json");
  cfg.learn.iterations = 50;
  cfg.learn.max_patches = 10000;
  const auto phantom = ct::make_phantom(ct::PhantomKind::shepp_logan, 128, 128);
  const auto training = mrst::training_patches(std::vector{phantom}, cfg.learn);

  double prev = INFINITY;
  double worst_step = -INFINITY;  // largest relative increase over any block
  double worst_unitarity = 0.0;
  std::size_t transform_updates = 0;
  const auto t0 = Clock::now();
  const auto res = mrst::learn(training, cfg.learn, [&](const mrst::LearnStep& s) {
    const double f = mrst::learn_objective(s.model, s.codes, s.residuals, cfg.learn.thresholds);
    if (std::isfinite(prev)) worst_step = std::max(worst_step, (f - prev) / std::abs(prev));
    prev = f;
    if (s.kind == mrst::BlockKind::transform) {
      worst_unitarity = std::max(worst_unitarity, s.model.max_unitarity_error());
      ++transform_updates;
    }
  });
  const double elapsed = seconds_since(t0);

  double worst_iter = -INFINITY;
  double last = res.initial_objective;
  for (double f : res.objective_trace) {
    worst_iter = std::max(worst_iter, (f - last) / std::abs(last));
    last = f;
  }
  const bool mono = worst_iter <= 1e-9 && worst_step <= 1e-9 && elapsed < 60.0;
  report("learning_monotonicity", mono,
         fmt("MRST3 %zux%zu patches, 50 iters: max rel increase per iter %.2e, per block %.2e "
             "(tol 1e-9); objective %.6e -> %.6e; %.1f s (limit 60 s)",
             training.rows(), training.cols(), worst_iter, worst_step, res.initial_objective,
             res.objective_trace.back(), elapsed));
  report("unitarity", worst_unitarity <= 1e-8 && transform_updates == 150,
         fmt("%zu transform updates, max ||W^T W - I||_F = %.2e (tol 1e-8)", transform_updates,
             worst_unitarity));
}

// --- sparse coding exactness ------------------------------------------------

struct SmallInstance {
  mrst::MrstModel model;
  mrst::SparseCodeStack codes;
  PatchMatrix input;
};

SmallInstance small_instance(std::mt19937_64& rng) {
  SmallInstance in;
  const std::size_t p = 1 + rng() % 2, n = 1 + rng() % 2, layers = 1 + rng() % 3;
  std::uniform_real_distribution<double> eta(0.0, 2.0);
  for (std::size_t l = 0; l < layers; ++l) {
    in.model.transforms.push_back(oracle::random_orthogonal(p, rng));
    in.model.thresholds.push_back(eta(rng));
    in.codes.push_back(oracle::from_eigen(oracle::random_matrix(p, n, rng)));
  }
  in.input = oracle::from_eigen(oracle::random_matrix(p, n, rng, 2.0));
  return in;
}

// Smallest (grid objective - attained objective) over all entries of layer l.
double grid_margin(const MatrixXd& r0, oracle::Stack s, std::size_t l,
                   const std::vector<double>& eta) {
  const double attained = oracle::objective(r0, s, eta);
  double margin = INFINITY;
  for (Eigen::Index e = 0; e < s.z[l].size(); ++e) {
    const double keep = s.z[l].data()[e];
    const double range = std::max(10.0, 2.0 * std::abs(keep));
    for (int g = 0; g <= 2000; ++g) {
      s.z[l].data()[e] = -range + g * (range / 1000.0);
      margin = std::min(margin, oracle::objective(r0, s, eta) - attained);
    }
    s.z[l].data()[e] = keep;
  }
  return margin;
}

void sparse_coding_criterion() {
  std::mt19937_64 rng(2024);
  double worst = INFINITY;
  for (int trial = 0; trial < 200; ++trial) {
    auto in = small_instance(rng);
    const std::size_t l = rng() % in.model.layers();
    const auto r = mrst::residual_stack(in.input, in.model, in.codes);
    in.codes[l] = mrst::sparse_code_learn(in.model, in.codes, r, l);
    worst = std::min(worst, grid_margin(oracle::to_eigen(in.input),
                                        oracle::to_stack(in.model, in.codes), l,
                                        in.model.thresholds));
  }
  double worst_recon = INFINITY;
  for (int trial = 0; trial < 200; ++trial) {
    auto in = small_instance(rng);
    const std::size_t l = rng() % in.model.layers();
    // Reconstruction form: 1x1 patches of a 1 x N image, gammas as thresholds.
    Image img(in.input.cols(), 1);
    PatchMatrix r0(1, in.input.cols());
    for (std::size_t j = 0; j < in.input.cols(); ++j) img(0, j) = r0(0, j) = in.input(0, j);
    mrst::MrstModel m1;
    mrst::SparseCodeStack c1;
    for (std::size_t k = 0; k < in.model.layers(); ++k) {
      m1.transforms.push_back(oracle::random_orthogonal(1, rng));
      m1.thresholds.push_back(0.0);
      c1.push_back(oracle::from_eigen(oracle::random_matrix(1, in.input.cols(), rng)));
    }
    const auto& gammas = in.model.thresholds;
    c1[l] = recon::sparse_code_recon(img, m1, c1, gammas, {1, 1}, l);
    worst_recon =
        std::min(worst_recon, grid_margin(oracle::to_eigen(r0), oracle::to_stack(m1, c1), l, gammas));
  }
  report("sparse_coding_exactness", worst >= -1e-10 && worst_recon >= -1e-10,
         fmt("200 learning + 200 reconstruction instances (p,N <= 2, L <= 3), 2001-point grid: "
             "min margin %.2e / %.2e (tol -1e-10)",
             worst, worst_recon));
}

// --- transform update optimality -------------------------------------------

void transform_criterion() {
  std::mt19937_64 rng(77);
  double worst = INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t layers = 1 + rng() % 3, n = 5 + rng() % 20;
    mrst::MrstModel m;
    mrst::SparseCodeStack codes;
    for (std::size_t l = 0; l < layers; ++l) {
      m.transforms.push_back(oracle::random_orthogonal(4, rng));
      m.thresholds.push_back(0.5);
      codes.push_back(oracle::from_eigen(oracle::random_matrix(4, n, rng)));
    }
    const auto input = oracle::from_eigen(oracle::random_matrix(4, n, rng));
    const std::size_t l = rng() % layers;
    const auto r = mrst::residual_stack(input, m, codes);
    const mrst::Matrix g = mrst::transform_gradient_matrix(m, codes, r, l);
    const mrst::Matrix w = mrst::transform_update(m, codes, r, l);
    const double t = (w * g).trace();
    for (int k = 0; k < 1000; ++k) {
      const MatrixXd q = oracle::random_orthogonal(4, rng);
      worst = std::min(worst, t - (q * g).trace());
    }
  }
  report("transform_update_optimality", worst >= -1e-10,
         fmt("100 instances x 1000 random orthogonal Q (p = 4): min tr(WG) - tr(QG) = %.3e "
             "(tol -1e-10)",
             worst));
}

// --- gradient and Hessian ---------------------------------------------------

void gradient_criterion() {
  std::mt19937_64 rng(91);
  const std::size_t w = 16, h = 14;
  mrst::PatchConfig patch{4, 1};
  mrst::MrstModel model;
  mrst::SparseCodeStack codes;
  for (int l = 0; l < 3; ++l) {
    model.transforms.push_back(oracle::random_orthogonal(16, rng));
    model.thresholds.push_back(0);
    codes.push_back(oracle::from_eigen(oracle::random_matrix(16, patch.count(w, h), rng, 50)));
  }
  const double beta = 1.7;
  const auto x = oracle::random_image(w, h, rng, 0, 1000);
  auto reg = [&](const Image& img) {
    const auto r = mrst::residual_stack(mrst::extract_patches(img, patch), model, codes);
    return beta * mrst::learn_objective(model, codes, r, std::vector<double>(3, 0.0));
  };
  auto shifted = [&](const Image& img, double t, const Image& v) {
    Image out = img;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += t * v.values()[i];
    return out;
  };
  const auto g = recon::grad_r2(x, model, codes, beta, patch);
  double worst_grad = 0.0;
  for (int d = 0; d < 20; ++d) {
    const auto v = oracle::random_image(w, h, rng, -1, 1);
    const double t = 1e-2;
    const double fd = (reg(shifted(x, t, v)) - reg(shifted(x, -t, v))) / (2 * t);
    double gv = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) gv += g.values()[i] * v.values()[i];
    worst_grad = std::max(worst_grad, std::abs(fd - gv) / std::max(std::abs(gv), 1e-300));
  }
  const auto diag = recon::hessian_r2_diag(beta, patch, w, h, 3);
  double worst_hess = 0.0;
  for (int d = 0; d < 20; ++d) {
    const auto v = oracle::random_image(w, h, rng, -1, 1);
    const double t = 1.0;
    const auto gp = recon::grad_r2(shifted(x, t, v), model, codes, beta, patch);
    const auto gm = recon::grad_r2(shifted(x, -t, v), model, codes, beta, patch);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double hv = diag.values()[i] * v.values()[i];
      const double fd = (gp.values()[i] - gm.values()[i]) / (2 * t);
      num += (fd - hv) * (fd - hv);
      den += hv * hv;
    }
    worst_hess = std::max(worst_hess, std::sqrt(num / den));
  }
  report("gradient_hessian", worst_grad <= 1e-5 && worst_hess <= 1e-6,
         fmt("L = 3, 20 directions: grad rel err %.2e (tol 1e-5), Hessian-vector rel err %.2e "
             "(tol 1e-6)",
             worst_grad, worst_hess));
}

// --- projector --------------------------------------------------------------

void projector_criterion() {
  std::mt19937_64 rng(5);
  double worst_adj = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t w = 8 + rng() % 60, h = 8 + rng() % 60;
    const double ps = 0.5 + (rng() % 100) / 100.0;
    ct::Geometry geo{1 + rng() % 90, 1 + rng() % 100, 0.25 + (rng() % 100) / 40.0};
    const Image x(w, h, ps, oracle::random_image(w, h, rng, -1, 1).values());
    std::normal_distribution<double> nd;
    std::vector<double> u(geo.rays());
    for (auto& v : u) v = nd(rng);
    const auto ax = ct::forward_project(x, geo);
    const auto atu = ct::back_project(u, geo, w, h, ps);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) lhs += ax[i] * u[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x.values()[i] * atu.values()[i];
    if (lhs != 0.0) worst_adj = std::max(worst_adj, std::abs(lhs - rhs) / std::abs(lhs));
  }

  const auto phantom = ct::make_phantom(ct::PhantomKind::shepp_logan, 64, 64);
  const auto geo = ct::Geometry::covering(64, 64, 1.0, 90);
  const auto sino = ct::simulate_lowdose(phantom, geo, {1e4, 8, false});
  const ct::Projector proj(geo, 64, 64, 1.0, ct::kHuToAttenuation);
  const auto d = ct::majorizer_diag(proj, sino.weights);
  double worst_gap = INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = oracle::random_image(64, 64, rng, -1000, 1000);
    const auto ax = proj.forward(x);
    double q = 0.0, dq = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) q += sino.weights[i] * ax[i] * ax[i];
    for (std::size_t i = 0; i < x.size(); ++i) dq += d.values()[i] * x.values()[i] * x.values()[i];
    worst_gap = std::min(worst_gap, dq - q);
  }
  report("projector_adjoint_majorizer", worst_adj <= 1e-10 && worst_gap >= -1e-8,
         fmt("20 random geometries: max adjoint rel err %.2e (tol 1e-10); 100 random x: "
             "min x'D_A x - x'A'WAx = %.3e (tol -1e-8)",
             worst_adj, worst_gap));
}

// --- OS-LALM ----------------------------------------------------------------

void oslalm_criterion() {
  std::mt19937_64 rng(13);
  const std::size_t n = 8;
  Image truth = oracle::random_image(n, n, rng, 0, 1000);
  for (std::size_t i = 0; i < truth.size(); i += 5) truth.values()[i] = 0.0;
  const auto geo = ct::Geometry::covering(n, n, 1.0, 16);
  const auto sino = ct::simulate_lowdose(truth, geo, {1e4, 0, true});

  recon::ReconConfig cfg;
  cfg.beta = 0.0;
  cfg.gammas = {0};
  cfg.subsets = 1;
  cfg.inner_iters = 2000;
  recon::PwlsProblem problem(sino, n, n, 1.0, 1);

  MatrixXd a = MatrixXd::Zero(geo.rays(), n * n);
  for (std::size_t i = 0; i < geo.rays(); ++i) {
    const auto px = problem.projector().row_pixels(i);
    const auto v = problem.projector().row_values(i);
    for (std::size_t k = 0; k < px.size(); ++k) a(i, px[k]) += v[k];
  }
  const Eigen::VectorXd expected =
      oracle::nnls(a, Eigen::Map<const Eigen::VectorXd>(sino.y.data(), sino.y.size()));

  const recon::RegularizerGradient none(0.0, 1, Image(n, n), Image(n, n));
  struct Run {
    double rmse;
    double min_x;
    std::size_t steps;
    std::size_t reached;  // first sub-iteration within tolerance, 0 if never
  };
  auto solve = [&](double rho_min) {
    recon::ReconConfig one = cfg;
    one.inner_iters = 1;
    one.rho_min = rho_min;
    auto st = recon::start_image_update(Image(n, n), problem);
    Run run{INFINITY, INFINITY, 0, 0};
    for (std::size_t k = 0; k < cfg.inner_iters; ++k) {
      recon::pwls_image_update(st, problem, none, Image(n, n), one);
      double se = 0.0;
      for (std::size_t i = 0; i < n * n; ++i) {
        se += std::pow(st.x.values()[i] - expected(i), 2);
        run.min_x = std::min(run.min_x, st.x.values()[i]);
      }
      run.rmse = std::sqrt(se / double(n * n));
      if (run.rmse <= 1e-4 && run.reached == 0) run.reached = st.step;
    }
    run.steps = st.step;
    return run;
  };
  const Run fast = solve(1e-2);
  const Run slow = solve(1e-3);
  report("oslalm_nnls", fast.rmse <= 1e-4 && fast.min_x >= 0.0 && fast.steps <= 2000,
         fmt("8x8 (values in [0, 1000]), beta = 0, M = 1, noiseless: RMSE to NNLS solution "
             "%.2e after %zu sub-iterations with rho_min = 1e-2 (tol 1e-4, first reached at %zu), "
             "min x = %.3g; with rho_min = 1e-3: %.2e",
             fast.rmse, fast.steps, fast.reached, std::min(fast.min_x, slow.min_x), slow.rmse));
}

// --- end-to-end pipeline ----------------------------------------------------

struct PipelineOutputs {
  double rmse_fbp, rmse_st, rmse_mrst2, ssim_fbp, ssim_st, ssim_mrst2;
  Image st_image, st_layer1_image;
  std::vector<std::vector<std::uint8_t>> artifacts;
  double seconds;
};

std::vector<std::uint8_t> bytes_of(const fs::path& p) { return mrst::io::read_bytes(p); }

PipelineOutputs run_pipeline(const fs::path& dir, bool with_st) {
  fs::create_directories(dir);
  const auto t0 = Clock::now();
  const auto st_cfg = load_config("st.json");
  const auto m2_cfg = load_config("mrst2.json");
  PipelineOutputs out{};

  mrst::io::save_image(dir / "phantom.img",
                       ct::make_phantom(ct::PhantomKind::shepp_logan, 128, 128));
  const auto phantom = mrst::io::load_image(dir / "phantom.img");
  const auto geo = m2_cfg.geometry.resolve(128, 128, phantom.pixel_size());
  mrst::io::save_sinogram(dir / "scan.sino", ct::simulate_lowdose(phantom, geo, m2_cfg.noise));
  const auto sino = mrst::io::load_sinogram(dir / "scan.sino");
  mrst::io::save_image(dir / "fbp.img", ct::fbp(sino, 128, 128, phantom.pixel_size()));
  const auto init = mrst::io::load_image(dir / "fbp.img");

  const std::vector<Image> train{phantom};
  const auto m2 = mrst::learn(mrst::training_patches(train, m2_cfg.learn), m2_cfg.learn).model;
  mrst::io::save_model(dir / "mrst2.mrst", m2);
  const auto model2 = mrst::io::load_model(dir / "mrst2.mrst");
  mrst::io::save_image(dir / "mrst2.img",
                       recon::reconstruct(sino, model2, m2_cfg.patch, m2_cfg.recon, init).image);

  const auto roi = mrst::metrics::circular_roi(128, 128, m2_cfg.roi_radius_fraction);
  const auto q_fbp = mrst::metrics::evaluate(init, phantom, roi);
  const auto q_m2 = mrst::metrics::evaluate(mrst::io::load_image(dir / "mrst2.img"), phantom, roi);
  out.rmse_fbp = q_fbp.rmse;
  out.ssim_fbp = q_fbp.ssim;
  out.rmse_mrst2 = q_m2.rmse;
  out.ssim_mrst2 = q_m2.ssim;

  if (with_st) {
    const auto m1 = mrst::learn(mrst::training_patches(train, st_cfg.learn), st_cfg.learn).model;
    mrst::io::save_model(dir / "st.mrst", m1);
    const auto model1 = mrst::io::load_model(dir / "st.mrst");
    out.st_image =
        mrst::st::reconstruct(sino, model1.transforms[0], st_cfg.patch, st_cfg.recon, init).image;
    out.st_layer1_image =
        recon::reconstruct(sino, model1, st_cfg.patch, st_cfg.recon, init).image;
    const auto q_st = mrst::metrics::evaluate(out.st_image, phantom, roi);
    out.rmse_st = q_st.rmse;
    out.ssim_st = q_st.ssim;
  }
  for (const char* f : {"phantom.img", "phantom.img.hdr", "scan.sino", "scan.sino.hdr", "fbp.img",
                        "mrst2.mrst", "mrst2.img", "mrst2.img.hdr"})
    out.artifacts.push_back(bytes_of(dir / f));
  out.seconds = seconds_since(t0);
  return out;
}

void pipeline_criteria() {
  const fs::path root = fs::temp_directory_path() /
                        ("mrst_acceptance_" + std::to_string(std::random_device{}()));
  const auto a = run_pipeline(root / "a", true);
  const bool order = a.rmse_mrst2 < a.rmse_st && a.rmse_st < a.rmse_fbp;
  const bool ssim = a.ssim_mrst2 > a.ssim_fbp;
  report("end_to_end_trend", order && ssim && a.seconds < 900.0,
         fmt("128x128 Shepp-Logan, I0 = 1e4, 200 outer iters: RMSE HU MRST2 %.2f, ST %.2f, "
             "FBP %.2f (need MRST2 < ST < FBP); SSIM MRST2 %.4f, ST %.4f, FBP %.4f (need MRST2 > "
             "FBP); %.0f s (limit 900 s)",
             a.rmse_mrst2, a.rmse_st, a.rmse_fbp, a.ssim_mrst2, a.ssim_st, a.ssim_fbp, a.seconds));

  report("st_mrst_l1_equivalence", a.st_image == a.st_layer1_image,
         a.st_image == a.st_layer1_image
             ? "PWLS-ST and one-layer PWLS-MRST images are bit-identical (200 outer iters)"
             : "reconstructions differ");

  const auto b = run_pipeline(root / "b", false);
  bool same = a.artifacts == b.artifacts;
  report("determinism", same,
         fmt("two full pipeline runs (phantom, sinogram, FBP, MRST2 model, reconstruction): %s",
             same ? "all 8 artifact files byte-identical" : "artifacts differ"));
  fs::remove_all(root);
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{
      learning_criteria,  sparse_coding_criterion, transform_criterion, gradient_criterion,
      projector_criterion, oslalm_criterion,       pipeline_criteria};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      report("exception", false, e.what());
    }
  }
  std::printf("%s: %d criterion failure(s)\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}

#pragma once

// Outer BCD loop shared by the MRST and dedicated single-layer paths. The
// Regularizer supplies: gradient(codes), sparse_code(x, codes),
// penalty(x, codes) (the bracketed regularizer, without beta) and zero_codes(n).

#include <chrono>
#include <cmath>
#include <limits>

#include "mrst/error.hpp"
#include "mrst/metrics.hpp"
#include "mrst/recon.hpp"

namespace mrst::recon::detail {

template <class Regularizer>
ReconResult run_outer_loop(const ct::SinogramSet& sino, const Regularizer& reg,
                           const PatchConfig& patch, const ReconConfig& cfg, const Image& init,
                           const ReconOptions& opts) {
  init.check_finite("initial image");
  patch.validate(init.width(), init.height());
  const auto t0 = std::chrono::steady_clock::now();
  const PwlsProblem problem(sino, init.width(), init.height(), init.pixel_size(), cfg.subsets);
  const Image hessian =
      hessian_r2_diag(cfg.beta, patch, init.width(), init.height(), reg.layers());

  ReconResult out;
  out.image = init;
  out.codes = reg.zero_codes(patch.count(init.width(), init.height()));
  const metrics::RoiMask full = metrics::full_roi(init.width(), init.height());
  const metrics::RoiMask& roi = opts.roi ? *opts.roi : full;

  auto objective = [&](const Image& x, const auto& codes) {
    return problem.data_term(x) + cfg.beta * reg.penalty(x, codes);
  };

  for (std::size_t t = 0; t < cfg.outer_iters; ++t) {
    const RegularizerGradient gradient = reg.gradient(out.codes);
    OsLalmState state = start_image_update(out.image, problem);
    pwls_image_update(state, problem, gradient, hessian, cfg);
    out.image = std::move(state.x);

    TraceEntry entry{};
    entry.iteration = t;
    entry.objective_after_image = objective(out.image, out.codes);
    reg.sparse_code(out.image, out.codes);
    entry.objective = objective(out.image, out.codes);
    entry.rmse = opts.reference ? metrics::rmse(*opts.reference, out.image, roi)
                                : std::numeric_limits<double>::quiet_NaN();
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(entry.objective)) {
      throw NumericError("objective became non-finite at outer iteration " + std::to_string(t));
    }
    out.trace.push_back(entry);
    if (opts.on_iteration) opts.on_iteration(entry);
  }
  return out;
}

}  // namespace mrst::recon::detail

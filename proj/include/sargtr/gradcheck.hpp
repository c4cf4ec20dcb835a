#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sargtr/autodiff.hpp"
#include "sargtr/tensor.hpp"

namespace sargtr {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // gradient at the worst element
  double numeric = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double tol = 0.0;
  double step = 0.0;
  double max_rel_err = 0.0;
  std::vector<GradCheckEntry> per_param;
};

// Scalar objective rebuilt on a fresh tape from leaves bound to `params`,
// in the order given. The checker owns leaf creation so it can read the
// analytic gradients back per parameter.
using Objective =
    std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

// Central-difference check of reverse-mode gradients. Per parameter the
// relative error is max_i |g_ad,i − g_fd,i| / max(1e−12, |g_ad| + |g_fd|) with
// |g| the largest gradient magnitude in that parameter; the report passes iff
// every parameter is within tol. Normalizing per parameter rather than per
// element keeps finite-difference truncation noise on exactly-zero gradient
// components from registering as full-scale error.
inline GradCheckReport grad_check(const Objective& f,
                                  const std::vector<std::pair<std::string, Tensor*>>& params,
                                  double h, double tol) {
  if (!(h >= 1e-7 && h <= 1e-3))
    throw std::invalid_argument("grad_check: h must lie in [1e-7, 1e-3]");

  auto evaluate = [&]() {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    vars.reserve(params.size());
    for (const auto& [name, ten] : params) vars.push_back(tape.leaf(*ten));
    ad::Var loss = f(tape, vars);
    return tape.value(loss).item();
  };

  // analytic pass
  std::vector<Tensor> analytic;
  double loss_value;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& [name, ten] : params) vars.push_back(tape.leaf(*ten));
    ad::Var loss = f(tape, vars);
    loss_value = tape.value(loss).item();
    tape.backward(loss);
    for (ad::Var v : vars) analytic.push_back(tape.grad(v));
  }

  if (evaluate() != loss_value)
    throw std::runtime_error("grad_check: objective is not deterministic");

  GradCheckReport report;
  report.tol = tol;
  report.step = h;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p].second;
    GradCheckEntry entry;
    entry.name = params[p].first;
    double max_diff = 0.0, max_ad = 0.0, max_fd = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + h;
      const double fp = evaluate();
      theta[i] = saved - h;
      const double fm = evaluate();
      theta[i] = saved;
      const double g_fd = (fp - fm) / (2.0 * h);
      const double g_ad = analytic[p][i];
      max_ad = std::max(max_ad, std::fabs(g_ad));
      max_fd = std::max(max_fd, std::fabs(g_fd));
      if (std::fabs(g_ad - g_fd) >= max_diff) {
        max_diff = std::fabs(g_ad - g_fd);
        entry.worst_index = i;
        entry.analytic = g_ad;
        entry.numeric = g_fd;
      }
    }
    entry.max_rel_err = max_diff / std::max(1e-12, max_ad + max_fd);
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_param.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace sargtr

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfit/data.hpp"
#include "rfit/random.hpp"

namespace rfit {

/// Single-covariate threshold model with true cutoff c0:
/// y = 0.5 + 0.5 T + 0.5 D + 0.5 T D + noise_sd * e,  D = I(x >= c0).
/// k = 0 draws x ~ U[0, 1]; k >= 2 draws x uniformly from {1/k, ..., k/k}.
TrialDataset gen_model_a(std::size_t n, std::size_t k, double c0, Rng& rng, double noise_sd = 1.0);

/// Five-covariate ITE benchmark models.  `constant` has delta(x) = 1
/// everywhere and exists for sanity checks.
enum class IteModel { I, II, III, IV, constant };

inline constexpr std::size_t kIteModelDims = 5;

std::string_view model_name(IteModel m) noexcept;
/// Accepts "I".."IV" (case-insensitive) and "constant"; throws std::invalid_argument.
IteModel parse_model(std::string_view name);

/// Baseline mean -2 - 2 x1 - 2 x2^2 + 2 x3^3.
double mu0(std::span<const double> x) noexcept;
double true_effect(IteModel m, std::span<const double> x) noexcept;

struct IteSample {
  TrialDataset data;
  /// True delta(x_i) per row.
  std::vector<double> effect;
  /// Potential outcomes under control and treatment.
  std::vector<double> y0;
  std::vector<double> y1;
};

/// x_j ~ U[0, 1] i.i.d., T ~ Bernoulli(0.5), and
/// y'_0 = mu0 + alpha + e0, y'_1 = mu0 + delta + alpha + e1 with alpha, e0,
/// e1 ~ N(0, 1); the observed response is y'_T.
IteSample gen_ite_model(IteModel m, std::size_t n, Rng& rng);

/// n rows of U[0, 1]^p covariates (test sets).
std::vector<std::vector<double>> gen_uniform_rows(std::size_t n, std::size_t p, Rng& rng);

}  // namespace rfit

#include "rfit/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rfit {

namespace {

std::vector<ColumnMeta> covariate_meta(std::size_t p) {
  std::vector<ColumnMeta> meta(p);
  for (std::size_t j = 0; j < p; ++j) meta[j].name = "x" + std::to_string(j + 1);
  return meta;
}

void fill_moments(std::vector<ColumnMeta>& meta, const std::vector<std::vector<double>>& cols) {
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (auto s = standardize_column(cols[j])) {
      meta[j].mean = s->mean;
      meta[j].sd = s->sd;
    }
  }
}

}  // namespace

TrialDataset gen_model_a(std::size_t n, std::size_t k, double c0, Rng& rng, double noise_sd) {
  if (n < 10) throw std::invalid_argument("model A needs n >= 10");
  if (k == 1) throw std::invalid_argument("model A needs k = 0 or k >= 2");
  std::vector<double> y(n), x(n);
  std::vector<std::uint8_t> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = k == 0 ? rng.uniform() : static_cast<double>(rng.below(k) + 1) / static_cast<double>(k);
    t[i] = rng.bernoulli(0.5) ? 1 : 0;
    const double d = x[i] >= c0 ? 1.0 : 0.0;
    const double e = rng.normal();
    y[i] = 0.5 + 0.5 * t[i] + 0.5 * d + 0.5 * t[i] * d + noise_sd * e;
  }
  std::vector<std::vector<double>> cols{std::move(x)};
  auto meta = covariate_meta(1);
  meta[0].name = "x";
  fill_moments(meta, cols);
  return TrialDataset(std::move(y), std::move(t), std::move(cols), std::move(meta));
}

std::string_view model_name(IteModel m) noexcept {
  switch (m) {
    case IteModel::I: return "I";
    case IteModel::II: return "II";
    case IteModel::III: return "III";
    case IteModel::IV: return "IV";
    case IteModel::constant: return "constant";
  }
  return "?";
}

IteModel parse_model(std::string_view name) {
  std::string s(name);
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (s == "I" || s == "1") return IteModel::I;
  if (s == "II" || s == "2") return IteModel::II;
  if (s == "III" || s == "3") return IteModel::III;
  if (s == "IV" || s == "4") return IteModel::IV;
  if (s == "CONSTANT") return IteModel::constant;
  throw std::invalid_argument("unknown model '" + std::string(name) + "' (expected I, II, III, IV or constant)");
}

double mu0(std::span<const double> x) noexcept {
  return -2.0 - 2.0 * x[0] - 2.0 * x[1] * x[1] + 2.0 * x[2] * x[2] * x[2];
}

double true_effect(IteModel m, std::span<const double> x) noexcept {
  const auto ind = [](bool b) { return b ? 1.0 : 0.0; };
  switch (m) {
    case IteModel::I:
      return -2.0 + 2.0 * x[0] + 2.0 * x[1];
    case IteModel::II:
      return -2.0 + 2.0 * ind(x[0] <= 0.5) + 2.0 * ind(x[1] <= 0.5) * ind(x[2] <= 0.5);
    case IteModel::III:
      // Logistic bump in x2 (Friedman form); a bare exponential would swamp the -6 offset.
      return -6.0 + 0.1 * std::exp(4.0 * x[0]) + 4.0 / (1.0 + std::exp(-20.0 * (x[1] - 0.5))) + 3.0 * x[2] +
             2.0 * x[3] + x[4];
    case IteModel::IV:
      return -10.0 + 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) +
             10.0 * x[3] + 5.0 * x[4];
    case IteModel::constant:
      return 1.0;
  }
  return 0.0;
}

IteSample gen_ite_model(IteModel m, std::size_t n, Rng& rng) {
  if (n < 10) throw std::invalid_argument("ITE models need n >= 10");
  const std::size_t p = kIteModelDims;
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  std::vector<double> y(n), effect(n), y0(n), y1(n), xi(p);
  std::vector<std::uint8_t> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) cols[j][i] = xi[j] = rng.uniform();
    t[i] = rng.bernoulli(0.5) ? 1 : 0;
    const double alpha = rng.normal();
    const double e0 = rng.normal();
    const double e1 = rng.normal();
    effect[i] = true_effect(m, xi);
    const double base = mu0(xi) + alpha;
    y0[i] = base + e0;
    y1[i] = base + effect[i] + e1;
    y[i] = t[i] ? y1[i] : y0[i];
  }
  auto meta = covariate_meta(p);
  fill_moments(meta, cols);
  return {TrialDataset(std::move(y), std::move(t), std::move(cols), std::move(meta)), std::move(effect),
          std::move(y0), std::move(y1)};
}

std::vector<std::vector<double>> gen_uniform_rows(std::size_t n, std::size_t p, Rng& rng) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(p));
  for (auto& r : rows)
    for (auto& v : r) v = rng.uniform();
  return rows;
}

}  // namespace rfit

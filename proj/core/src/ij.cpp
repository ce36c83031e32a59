#include <cmath>
#include <stdexcept>

#include "rfit/forest.hpp"

namespace rfit {

namespace {

void check_shapes(const CountMatrix& counts, std::span<const double> per_tree) {
  if (counts.b() != per_tree.size()) throw std::invalid_argument("IJ: per-tree predictions must match the count rows");
  if (counts.b() < 2) throw std::invalid_argument("IJ: need at least 2 trees");
}

}  // namespace

std::vector<double> ij_zbar(const CountMatrix& counts, std::span<const double> per_tree, double estimate) {
  check_shapes(counts, per_tree);
  const std::size_t b = counts.b(), n = counts.n();
  std::vector<double> zbar(n, 0.0);
  for (std::size_t k = 0; k < b; ++k) {
    const double dev = per_tree[k] - estimate;
    const auto row = counts.row(k);
    for (std::size_t i = 0; i < n; ++i) zbar[i] += (static_cast<double>(row[i]) - 1.0) * dev;
  }
  for (double& z : zbar) z /= static_cast<double>(b);
  return zbar;
}

IjVariance ij_variance(const CountMatrix& counts, std::span<const double> per_tree, double estimate) {
  const auto zbar = ij_zbar(counts, per_tree, estimate);
  const std::size_t b = counts.b(), n = counts.n();
  const auto bb = static_cast<double>(b) * static_cast<double>(b);

  IjVariance v;
  for (double z : zbar) v.raw += z * z;

  double spread_z = 0.0;
  double spread_pred = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    const double dev = per_tree[k] - estimate;
    spread_pred += dev * dev;
    const auto row = counts.row(k);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (static_cast<double>(row[i]) - 1.0) * dev - zbar[i];
      spread_z += d * d;
    }
  }
  v.c0 = v.raw - spread_z / bb;
  v.c = v.raw - (static_cast<double>(n) - 1.0) * spread_pred / bb;
  return v;
}

double ItePrediction::variance(SeVariant v) const noexcept {
  switch (v) {
    case SeVariant::raw:
      return var_raw;
    case SeVariant::c0:
      return var_c0;
    case SeVariant::c:
      break;
  }
  return var_c;
}

double ItePrediction::se(SeVariant v) const noexcept { return std::sqrt(variance(v)); }

}  // namespace rfit

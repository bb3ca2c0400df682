#include <algorithm>
#include <cmath>

#include "umcam/kernels.hpp"

namespace umcam::kernels {
namespace {

double sum_scalar(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

void axpy_scalar(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void relu_scalar(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void divide_scalar(std::span<double> x, double d) {
  for (double& v : x) v = v / d;
}

void weighted_accumulate_scalar(std::span<const double> w, std::span<const double> a, std::span<double> num,
                                std::span<double> den) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    num[i] += w[i] * a[i];
    den[i] += w[i];
  }
}

void fuse_finalize_scalar(std::span<const double> num, std::span<const double> den,
                          std::span<const double> plain_sum, double count, std::span<double> out) {
  for (std::size_t i = 0; i < num.size(); ++i) {
    out[i] = den[i] > 0.0 ? num[i] / den[i] : plain_sum[i] / count;
  }
}

void relax_from_row_scalar(std::span<const double> adj_dist, std::span<const double> adj_img,
                           std::span<const double> img, std::span<double> dist, bool diagonals) {
  const std::size_t n = dist.size();
  for (std::size_t c = 0; c < n; ++c) {
    double d = dist[c];
    d = std::min(d, adj_dist[c] + std::abs(img[c] - adj_img[c]));
    if (diagonals) {
      if (c > 0) d = std::min(d, adj_dist[c - 1] + std::abs(img[c] - adj_img[c - 1]));
      if (c + 1 < n) d = std::min(d, adj_dist[c + 1] + std::abs(img[c] - adj_img[c + 1]));
    }
    dist[c] = d;
  }
}

std::size_t count_both_scalar(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += (a[i] != 0 && b[i] != 0) ? 1 : 0;
  return n;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Isa::scalar,          sum_scalar,           axpy_scalar,          relu_scalar,       divide_scalar,
      weighted_accumulate_scalar, fuse_finalize_scalar, relax_from_row_scalar, count_both_scalar,
  };
  return table;
}

}  // namespace umcam::kernels

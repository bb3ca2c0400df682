// AVX2 variants. This translation unit is the only one built with -mavx2;
// nothing here may run before dispatch has confirmed CPU support.

#include <immintrin.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "umcam/kernels.hpp"

namespace umcam::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline __m256d abs_pd(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

double sum_avx2(std::span<const double> x) {
  const std::size_t n = x.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x.data() + i + kLanes));
  }
  for (; i + kLanes <= n; i += kLanes) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x.data() + i));
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i];
  return s;
}

void axpy_avx2(double a, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x.data() + i));
    _mm256_storeu_pd(y.data() + i, _mm256_add_pd(_mm256_loadu_pd(y.data() + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void relu_avx2(std::span<double> x) {
  const std::size_t n = x.size();
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(x.data() + i, _mm256_max_pd(_mm256_loadu_pd(x.data() + i), zero));
  }
  for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void divide_avx2(std::span<double> x, double d) {
  const std::size_t n = x.size();
  const __m256d vd = _mm256_set1_pd(d);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(x.data() + i, _mm256_div_pd(_mm256_loadu_pd(x.data() + i), vd));
  }
  for (; i < n; ++i) x[i] = x[i] / d;
}

void weighted_accumulate_avx2(std::span<const double> w, std::span<const double> a, std::span<double> num,
                              std::span<double> den) {
  const std::size_t n = w.size();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vw = _mm256_loadu_pd(w.data() + i);
    const __m256d prod = _mm256_mul_pd(vw, _mm256_loadu_pd(a.data() + i));
    _mm256_storeu_pd(num.data() + i, _mm256_add_pd(_mm256_loadu_pd(num.data() + i), prod));
    _mm256_storeu_pd(den.data() + i, _mm256_add_pd(_mm256_loadu_pd(den.data() + i), vw));
  }
  for (; i < n; ++i) {
    num[i] += w[i] * a[i];
    den[i] += w[i];
  }
}

void fuse_finalize_avx2(std::span<const double> num, std::span<const double> den, std::span<const double> plain_sum,
                        double count, std::span<double> out) {
  const std::size_t n = num.size();
  const __m256d zero = _mm256_setzero_pd();
  const __m256d vcount = _mm256_set1_pd(count);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vden = _mm256_loadu_pd(den.data() + i);
    const __m256d weighted = _mm256_div_pd(_mm256_loadu_pd(num.data() + i), vden);
    const __m256d mean = _mm256_div_pd(_mm256_loadu_pd(plain_sum.data() + i), vcount);
    const __m256d positive = _mm256_cmp_pd(vden, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out.data() + i, _mm256_blendv_pd(mean, weighted, positive));
  }
  for (; i < n; ++i) out[i] = den[i] > 0.0 ? num[i] / den[i] : plain_sum[i] / count;
}

inline double relax_one(std::span<const double> adj_dist, std::span<const double> adj_img,
                        std::span<const double> img, std::span<double> dist, std::size_t c, bool diagonals) {
  const std::size_t n = dist.size();
  double d = dist[c];
  d = std::min(d, adj_dist[c] + std::abs(img[c] - adj_img[c]));
  if (diagonals) {
    if (c > 0) d = std::min(d, adj_dist[c - 1] + std::abs(img[c] - adj_img[c - 1]));
    if (c + 1 < n) d = std::min(d, adj_dist[c + 1] + std::abs(img[c] - adj_img[c + 1]));
  }
  return d;
}

void relax_from_row_avx2(std::span<const double> adj_dist, std::span<const double> adj_img,
                         std::span<const double> img, std::span<double> dist, bool diagonals) {
  const std::size_t n = dist.size();
  if (!diagonals) {
    std::size_t c = 0;
    for (; c + kLanes <= n; c += kLanes) {
      const __m256d vimg = _mm256_loadu_pd(img.data() + c);
      const __m256d cand = _mm256_add_pd(_mm256_loadu_pd(adj_dist.data() + c),
                                         abs_pd(_mm256_sub_pd(vimg, _mm256_loadu_pd(adj_img.data() + c))));
      _mm256_storeu_pd(dist.data() + c, _mm256_min_pd(cand, _mm256_loadu_pd(dist.data() + c)));
    }
    for (; c < n; ++c) dist[c] = relax_one(adj_dist, adj_img, img, dist, c, false);
    return;
  }
  if (n < kLanes + 2) {
    for (std::size_t c = 0; c < n; ++c) dist[c] = relax_one(adj_dist, adj_img, img, dist, c, true);
    return;
  }
  // Edge columns lack one diagonal; handle them with the scalar rule.
  dist[0] = relax_one(adj_dist, adj_img, img, dist, 0, true);
  std::size_t c = 1;
  for (; c + kLanes <= n - 1; c += kLanes) {
    const __m256d vimg = _mm256_loadu_pd(img.data() + c);
    __m256d d = _mm256_loadu_pd(dist.data() + c);
    for (int o = -1; o <= 1; ++o) {
      const std::size_t k = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + o);
      const __m256d cand = _mm256_add_pd(_mm256_loadu_pd(adj_dist.data() + k),
                                         abs_pd(_mm256_sub_pd(vimg, _mm256_loadu_pd(adj_img.data() + k))));
      d = _mm256_min_pd(cand, d);
    }
    _mm256_storeu_pd(dist.data() + c, d);
  }
  for (; c < n; ++c) dist[c] = relax_one(adj_dist, adj_img, img, dist, c, true);
}

std::size_t count_both_avx2(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  const std::size_t n = a.size();
  const __m256i zero = _mm256_setzero_si256();
  std::size_t total = 0;
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a.data() + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b.data() + i));
    const __m256i either_zero = _mm256_or_si256(_mm256_cmpeq_epi8(va, zero), _mm256_cmpeq_epi8(vb, zero));
    const auto zero_bits = static_cast<std::uint32_t>(_mm256_movemask_epi8(either_zero));
    total += static_cast<std::size_t>(std::popcount(~zero_bits));
  }
  for (; i < n; ++i) total += (a[i] != 0 && b[i] != 0) ? 1 : 0;
  return total;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{
      Isa::avx2,         sum_avx2,           axpy_avx2,           relu_avx2,       divide_avx2,
      weighted_accumulate_avx2, fuse_finalize_avx2, relax_from_row_avx2, count_both_avx2,
  };
  return table;
}

}  // namespace umcam::kernels

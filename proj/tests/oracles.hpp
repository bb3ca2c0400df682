#pragma once

// Straightforward reference implementations used as test oracles. None of
// them share code with the library.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "umcam/grid.hpp"

namespace oracle {

using umcam::BinaryMask;
using umcam::FeatureBlockExport;
using umcam::Pixel;
using umcam::ScalarMap;

inline ScalarMap random_map(std::mt19937_64& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = u(rng);
  return ScalarMap(h, w, std::move(v));
}

inline ScalarMap random_int_map(std::mt19937_64& rng, int h, int w, int levels) {
  std::uniform_int_distribution<int> u(0, levels - 1);
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = u(rng);
  return ScalarMap(h, w, std::move(v));
}

inline BinaryMask random_mask(std::mt19937_64& rng, int h, int w, double density) {
  std::bernoulli_distribution b(density);
  BinaryMask m(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) m.set(r, c, b(rng));
  }
  return m;
}

// Random rectangle-ish blob so that masks have a meaningful boundary.
inline BinaryMask random_blob(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double cr = u(rng) * h, cc = u(rng) * w;
  const double rr = 0.5 + u(rng) * h / 2.0, rc = 0.5 + u(rng) * w / 2.0;
  BinaryMask m(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dr = (r - cr) / rr, dc = (c - cc) / rc;
      m.set(r, c, dr * dr + dc * dc <= 1.0);
    }
  }
  return m;
}

inline FeatureBlockExport random_export(std::mt19937_64& rng, int k, int h, int w) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> f(static_cast<std::size_t>(k) * h * w), g(f.size());
  for (auto& x : f) x = n(rng);
  for (auto& x : g) x = n(rng) + 0.2;
  return FeatureBlockExport(0, k, h, w, std::move(f), std::move(g));
}

// A = ReLU(sum_k mean(grad_k) * f_k), summed left to right.
inline ScalarMap grad_cam(const FeatureBlockExport& e) {
  const int k = e.channels(), h = e.height(), w = e.width();
  std::vector<double> alpha(k, 0.0);
  for (int c = 0; c < k; ++c) {
    double s = 0.0;
    for (int i = 0; i < h * w; ++i) s += e.gradients()[static_cast<std::size_t>(c) * h * w + i];
    alpha[c] = s / (h * w);
  }
  ScalarMap out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      double a = 0.0;
      for (int c = 0; c < k; ++c) a += alpha[c] * e.features()[(static_cast<std::size_t>(c) * h + r) * w + col];
      out.set(r, col, std::max(a, 0.0));
    }
  }
  return out;
}

inline double entropy_weight(double p) {
  auto t = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
  return 1.0 - (t(p) + t(1.0 - p));
}

// Bellman-Ford style relaxation until nothing changes.
inline ScalarMap geodesic(const ScalarMap& img, const std::vector<Pixel>& seeds, bool diagonals) {
  const int h = img.height(), w = img.width();
  std::vector<double> d(static_cast<std::size_t>(h) * w, std::numeric_limits<double>::infinity());
  for (auto s : seeds) d[img.index(s.row, s.col)] = 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if ((dr == 0 && dc == 0) || (!diagonals && dr != 0 && dc != 0)) continue;
            const int nr = r + dr, nc = c + dc;
            if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
            const double cand = d[img.index(nr, nc)] + std::abs(img(r, c) - img(nr, nc));
            if (cand < d[img.index(r, c)]) {
              d[img.index(r, c)] = cand;
              changed = true;
            }
          }
        }
      }
    }
  }
  return ScalarMap(h, w, std::move(d));
}

inline double bce(const ScalarMap& p, const ScalarMap& y, double eps) {
  double s = 0.0;
  for (int r = 0; r < p.height(); ++r) {
    for (int c = 0; c < p.width(); ++c) {
      const double q = std::clamp(p(r, c), eps, 1.0 - eps);
      s += -(y(r, c) * std::log(q) + (1.0 - y(r, c)) * std::log(1.0 - q));
    }
  }
  return s / static_cast<double>(p.size());
}

inline double dsc(const BinaryMask& a, const BinaryMask& b) {
  long both = 0, na = 0, nb = 0;
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      na += a(r, c);
      nb += b(r, c);
      both += a(r, c) && b(r, c);
    }
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * both / static_cast<double>(na + nb);
}

inline std::vector<Pixel> boundary(const BinaryMask& m) {
  std::vector<Pixel> out;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c)) continue;
      const bool edge = r == 0 || c == 0 || r == m.height() - 1 || c == m.width() - 1;
      if (edge || !m(r - 1, c) || !m(r + 1, c) || !m(r, c - 1) || !m(r, c + 1)) out.push_back({r, c});
    }
  }
  return out;
}

// All-pairs directed distances, pooled, then the linearly interpolated 95th percentile.
inline double hd95(const BinaryMask& a, const BinaryMask& b, double sr = 1.0, double sc = 1.0) {
  const auto ba = boundary(a), bb = boundary(b);
  std::vector<double> d;
  auto directed = [&](const std::vector<Pixel>& from, const std::vector<Pixel>& to) {
    for (auto p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (auto q : to) best = std::min(best, std::hypot((p.row - q.row) * sr, (p.col - q.col) * sc));
      d.push_back(best);
    }
  };
  directed(ba, bb);
  directed(bb, ba);
  std::sort(d.begin(), d.end());
  const double pos = 0.95 * static_cast<double>(d.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, d.size() - 1);
  return d[lo] + (pos - static_cast<double>(lo)) * (d[hi] - d[lo]);
}

// NPY v1.0 writer built byte by byte: 16-byte header alignment, optional
// dtype and order tags, for exercising the reader against foreign files.
inline void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                      const std::vector<double>& data, bool f8 = true, bool fortran = false) {
  std::string dims;
  for (auto s : shape) dims += std::to_string(s) + ", ";
  if (shape.size() > 1) dims.resize(dims.size() - 2);
  else if (!shape.empty()) dims.pop_back();
  std::string header = std::string("{'descr': '") + (f8 ? "<f8" : "<f4") +
                       "', 'fortran_order': " + (fortran ? "True" : "False") + ", 'shape': (" + dims + "), }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((16 - unpadded % 16) % 16, ' ');
  header.push_back('\n');
  std::ofstream out(path, std::ios::binary);
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  const unsigned char le[2] = {static_cast<unsigned char>(len & 0xff), static_cast<unsigned char>(len >> 8)};
  out.write(reinterpret_cast<const char*>(le), 2);
  out << header;
  for (double x : data) {
    if (f8) {
      out.write(reinterpret_cast<const char*>(&x), 8);
    } else {
      const float f = static_cast<float>(x);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("umcam_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle

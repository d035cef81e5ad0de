#pragma once

// Brute-force reference implementations. Deliberately naive and independent
// of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "topoconv/metrics.hpp"
#include "topoconv/tensor.hpp"

namespace oracle {

// Six nested loops, zero padding, stride 1.
inline topoconv::Tensor conv2d(const topoconv::Tensor& x, const topoconv::Tensor& w, const topoconv::Tensor& b,
                               std::size_t pad) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  topoconv::Tensor y({n, cout, h, wd});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < wd; ++c) {
          double acc = b[o];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long yy = long(r + ky) - long(pad), xx = long(c + kx) - long(pad);
                if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(wd)) continue;
                acc += x.at(i, ci, std::size_t(yy), std::size_t(xx)) * w.at(o, ci, ky, kx);
              }
          y.at(i, o, r, c) = acc;
        }
  return y;
}

// BFS labeling of pixels where inside(y, x) holds. Returns labels (0 = outside) and the count.
template <class Inside>
std::pair<std::vector<int>, int> flood_label(long h, long w, Inside inside, bool eight) {
  std::vector<int> lab(std::size_t(h * w), 0);
  int count = 0;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      if (!inside(y, x) || lab[std::size_t(y * w + x)] != 0) continue;
      ++count;
      std::deque<std::pair<long, long>> q{{y, x}};
      lab[std::size_t(y * w + x)] = count;
      while (!q.empty()) {
        auto [cy, cx] = q.front();
        q.pop_front();
        for (long dy = -1; dy <= 1; ++dy)
          for (long dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            if (!eight && dy != 0 && dx != 0) continue;
            const long ny = cy + dy, nx = cx + dx;
            if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
            if (!inside(ny, nx) || lab[std::size_t(ny * w + nx)] != 0) continue;
            lab[std::size_t(ny * w + nx)] = count;
            q.push_back({ny, nx});
          }
      }
    }
  return {lab, count};
}

// b0 over 4-connected foreground; b1 by flooding the background (8-connected)
// of a copy padded with one ring of background, so the outer region is a
// single component that is never counted.
inline std::pair<int, int> betti(const topoconv::BinaryMask& m) {
  const long h = long(m.height()), w = long(m.width());
  const int b0 = flood_label(h, w, [&](long y, long x) { return m.at(std::size_t(y), std::size_t(x)); }, false).second;
  auto bg = [&](long y, long x) {
    if (y == 0 || x == 0 || y == h + 1 || x == w + 1) return true;
    return !m.at(std::size_t(y - 1), std::size_t(x - 1));
  };
  const int bg_regions = flood_label(h + 2, w + 2, bg, true).second;
  return {b0, bg_regions - 1};
}

// Component labeling used for partition metrics: background is 0, components 1..K (4-connected).
inline std::vector<int> partition(const topoconv::BinaryMask& m) {
  return flood_label(long(m.height()), long(m.width()),
                     [&](long y, long x) { return m.at(std::size_t(y), std::size_t(x)); }, false)
      .first;
}

// Adjusted Rand index by enumerating every unordered pixel pair.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, same_a = 0, same_b = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      same_a += sa;
      same_b += sb;
      pairs += 1;
    }
  const double expected = same_a * same_b / pairs;
  const double best = 0.5 * (same_a + same_b);
  if (best == expected) return 1.0;
  return (both - expected) / (best - expected);
}

inline double entropy_of(const std::map<std::vector<int>, double>& counts, double n) {
  double h = 0;
  for (const auto& [key, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

// VI = H(A|B) + H(B|A) computed from explicit joint counts, natural log.
inline double vi(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::vector<int>, double> ca, cb, cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[{a[i]}] += 1;
    cb[{b[i]}] += 1;
    cab[{a[i], b[i]}] += 1;
  }
  const double n = double(a.size());
  const double hab = entropy_of(cab, n);
  return (hab - entropy_of(cb, n)) + (hab - entropy_of(ca, n));
}

// Probability that a random positive outscores a random negative, ties count half.
inline double auc(const std::vector<double>& score, const topoconv::BinaryMask& gt) {
  double wins = 0, total = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (gt.bits()[i] == 0) continue;
    for (std::size_t j = 0; j < score.size(); ++j) {
      if (gt.bits()[j] != 0) continue;
      wins += score[i] > score[j] ? 1.0 : (score[i] == score[j] ? 0.5 : 0.0);
      total += 1;
    }
  }
  return wins / total;
}

// 0-dim superlevel persistence by relabeling the superlevel set at every
// distinct value. Returns the sorted multiset of (birth, death); the surviving
// component is paired with the global minimum.
inline std::vector<std::pair<double, double>> ph0_sweep(long h, long w, const std::vector<double>& v, bool eight) {
  std::vector<double> levels(v.begin(), v.end());
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  // Every live component is identified by its birth value; previous labels map pixels to them.
  std::vector<int> prev_label(v.size(), 0);
  std::vector<double> prev_birth{0.0};
  std::vector<std::pair<double, double>> out;
  for (double t : levels) {
    auto [lab, k] = flood_label(h, w, [&](long y, long x) { return v[std::size_t(y * w + x)] >= t; }, eight);
    std::vector<double> birth(std::size_t(k) + 1, 0.0);
    std::vector<std::set<int>> parents(std::size_t(k) + 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (lab[i] != 0 && prev_label[i] != 0) parents[std::size_t(lab[i])].insert(prev_label[i]);
    }
    for (int c = 1; c <= k; ++c) {
      const auto& ps = parents[std::size_t(c)];
      if (ps.empty()) {
        birth[std::size_t(c)] = t;
        continue;
      }
      std::vector<double> bs;
      for (int p : ps) bs.push_back(prev_birth[std::size_t(p)]);
      std::sort(bs.begin(), bs.end(), std::greater<>());
      birth[std::size_t(c)] = bs.front();
      for (std::size_t i = 1; i < bs.size(); ++i) out.emplace_back(bs[i], t);
    }
    prev_label = std::move(lab);
    prev_birth = std::move(birth);
  }
  out.emplace_back(levels.front(), levels.back());
  std::sort(out.begin(), out.end());
  return out;
}

inline topoconv::Tensor random_tensor(std::mt19937_64& rng, topoconv::Shape shape, double lo = -1.0, double hi = 1.0) {
  topoconv::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& x : t.data()) x = d(rng);
  return t;
}

inline topoconv::BinaryMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p = 0.5) {
  std::bernoulli_distribution d(p);
  std::vector<std::uint8_t> bits(h * w);
  for (auto& b : bits) b = d(rng) ? 1 : 0;
  return topoconv::BinaryMask(h, w, std::move(bits));
}

// Values drawn from {0, 0.1, ..., 1.0}.
inline std::vector<double> quantized_map(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> d(0, 10);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng) / 10.0;
  return v;
}

}  // namespace oracle

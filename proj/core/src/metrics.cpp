#include "topoconv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "topoconv/errors.hpp"

namespace topoconv {

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (bits_.size() != height_ * width_) throw ShapeError("BinaryMask: bit count does not match H*W");
  for (auto& b : bits_) {
    if (b > 1) throw ValidationError("BinaryMask: values must be 0 or 1");
  }
}

BinaryMask BinaryMask::threshold(std::size_t height, std::size_t width, std::span<const double> values,
                                 double threshold) {
  if (values.size() != height * width) throw ShapeError("BinaryMask::threshold: value count does not match H*W");
  std::vector<std::uint8_t> bits(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) bits[i] = values[i] >= threshold ? 1 : 0;
  return BinaryMask(height, width, std::move(bits));
}

bool BinaryMask::at_or_zero(long y, long x) const {
  if (y < 0 || x < 0 || y >= static_cast<long>(height_) || x >= static_cast<long>(width_)) return false;
  return bits_[static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x)] != 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": masks differ in shape");
  }
}

// Flood-fills pixels whose bit equals `value`; returns labels (0 = other value) and component count.
std::pair<std::vector<int>, int> flood_label(const BinaryMask& mask, bool value, Connectivity connectivity) {
  const long h = static_cast<long>(mask.height()), w = static_cast<long>(mask.width());
  std::vector<int> labels(mask.size(), 0);
  int next = 0;
  std::vector<long> stack;
  for (long start = 0; start < h * w; ++start) {
    if (labels[start] != 0 || mask.at_or_zero(start / w, start % w) != value) continue;
    labels[start] = ++next;
    stack.push_back(start);
    while (!stack.empty()) {
      const long p = stack.back();
      stack.pop_back();
      const long y = p / w, x = p % w;
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          if (connectivity == Connectivity::four && dy != 0 && dx != 0) continue;
          const long ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          const long q = ny * w + nx;
          if (labels[q] != 0 || mask.at_or_zero(ny, nx) != value) continue;
          labels[q] = next;
          stack.push_back(q);
        }
    }
  }
  return {std::move(labels), next};
}

}  // namespace

ComponentLabeling label_components(const BinaryMask& mask, Connectivity connectivity) {
  auto [labels, count] = flood_label(mask, true, connectivity);
  return ComponentLabeling{mask.height(), mask.width(), std::move(labels), count};
}

BettiNumbers betti_numbers(const BinaryMask& mask) {
  BettiNumbers b;
  b.b0 = label_components(mask, Connectivity::four).count;
  auto [bg, n_bg] = flood_label(mask, false, Connectivity::eight);
  std::vector<char> touches(static_cast<std::size_t>(n_bg) + 1, 0);
  const std::size_t h = mask.height(), w = mask.width();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (y == 0 || x == 0 || y + 1 == h || x + 1 == w) touches[bg[y * w + x]] = 1;
    }
  for (int k = 1; k <= n_bg; ++k) b.b1 += touches[k] ? 0 : 1;
  return b;
}

long euler_characteristic(const BinaryMask& mask) {
  long v = 0, e = 0, f = 0;
  const long h = static_cast<long>(mask.height()), w = static_cast<long>(mask.width());
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      if (!mask.at_or_zero(y, x)) continue;
      ++v;
      const bool right = mask.at_or_zero(y, x + 1), down = mask.at_or_zero(y + 1, x);
      e += right + down;
      if (right && down && mask.at_or_zero(y + 1, x + 1)) ++f;
    }
  return v - e + f;
}

bool is_simple_point(const BinaryMask& mask, std::size_t y, std::size_t x) {
  // Neighbourhood ring in clockwise order starting north-west; index 8 wraps.
  static constexpr int ring[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}};
  bool nb[3][3] = {};
  for (const auto& r : ring) nb[r[0] + 1][r[1] + 1] = mask.at_or_zero(static_cast<long>(y) + r[0], static_cast<long>(x) + r[1]);

  // Foreground: 4-components of N8* that contain a 4-neighbour of p.
  int fg_label[3][3] = {};
  int fg_count = 0;
  for (int s = 0; s < 8; ++s) {
    const int sy = ring[s][0] + 1, sx = ring[s][1] + 1;
    const bool orth = (ring[s][0] == 0) != (ring[s][1] == 0);
    if (!orth || !nb[sy][sx] || fg_label[sy][sx]) continue;
    ++fg_count;
    int stack[9][2], top = 0;
    stack[top][0] = sy, stack[top][1] = sx, ++top;
    fg_label[sy][sx] = fg_count;
    while (top) {
      --top;
      const int cy = stack[top][0], cx = stack[top][1];
      const int d4[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (const auto& d : d4) {
        const int ny = cy + d[0], nx = cx + d[1];
        if (ny < 0 || nx < 0 || ny > 2 || nx > 2 || (ny == 1 && nx == 1)) continue;
        if (!nb[ny][nx] || fg_label[ny][nx]) continue;
        fg_label[ny][nx] = fg_count;
        stack[top][0] = ny, stack[top][1] = nx, ++top;
      }
    }
  }
  if (fg_count != 1) return false;

  // Background: 8-components of N8*, all of which are 8-adjacent to p.
  int bg_label[3][3] = {};
  int bg_count = 0;
  for (int s = 0; s < 8; ++s) {
    const int sy = ring[s][0] + 1, sx = ring[s][1] + 1;
    if (nb[sy][sx] || bg_label[sy][sx]) continue;
    ++bg_count;
    int stack[9][2], top = 0;
    stack[top][0] = sy, stack[top][1] = sx, ++top;
    bg_label[sy][sx] = bg_count;
    while (top) {
      --top;
      const int cy = stack[top][0], cx = stack[top][1];
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = cy + dy, nx = cx + dx;
          if (ny < 0 || nx < 0 || ny > 2 || nx > 2 || (ny == 1 && nx == 1)) continue;
          if (nb[ny][nx] || bg_label[ny][nx]) continue;
          bg_label[ny][nx] = bg_count;
          stack[top][0] = ny, stack[top][1] = nx, ++top;
        }
    }
  }
  // Zero means p is interior (removal opens a hole); two or more means removal merges background regions.
  return bg_count == 1;
}

BinaryMask skeletonize(const BinaryMask& mask) {
  BinaryMask cur = mask;
  const long h = static_cast<long>(mask.height()), w = static_cast<long>(mask.width());
  auto four_neighbours = [&](const BinaryMask& m, long y, long x) {
    return m.at_or_zero(y - 1, x) + m.at_or_zero(y + 1, x) + m.at_or_zero(y, x - 1) + m.at_or_zero(y, x + 1);
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      // pass 0: south/east border points; pass 1: north/west.
      std::vector<std::pair<long, long>> candidates;
      for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
          if (!cur.at_or_zero(y, x)) continue;
          const bool border = pass == 0 ? (!cur.at_or_zero(y + 1, x) || !cur.at_or_zero(y, x + 1))
                                        : (!cur.at_or_zero(y - 1, x) || !cur.at_or_zero(y, x - 1));
          if (!border || four_neighbours(cur, y, x) == 1) continue;
          candidates.emplace_back(y, x);
        }
      for (auto [y, x] : candidates) {
        if (is_simple_point(cur, static_cast<std::size_t>(y), static_cast<std::size_t>(x))) {
          cur.set(static_cast<std::size_t>(y), static_cast<std::size_t>(x), false);
          changed = true;
        }
      }
    }
  }
  return cur;
}

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "dice");
  std::size_t inter = 0, sp = 0, sg = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred.bits()[i] & gt.bits()[i];
    sp += pred.bits()[i];
    sg += gt.bits()[i];
  }
  if (sp + sg == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(sp + sg);
}

double cl_dice(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "cl_dice");
  const BinaryMask sp = skeletonize(pred), sg = skeletonize(gt);
  const std::size_t np = sp.count(), ng = sg.count();
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  std::size_t prec_hits = 0, sens_hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    prec_hits += sp.bits()[i] & gt.bits()[i];
    sens_hits += sg.bits()[i] & pred.bits()[i];
  }
  const double tprec = static_cast<double>(prec_hits) / static_cast<double>(np);
  const double tsens = static_cast<double>(sens_hits) / static_cast<double>(ng);
  if (tprec + tsens == 0.0) return 0.0;
  return 2.0 * tprec * tsens / (tprec + tsens);
}

double auc(std::span<const double> prob, const BinaryMask& gt) {
  if (prob.size() != gt.size()) throw ShapeError("auc: probability map and mask differ in size");
  const std::size_t n = prob.size();
  const std::size_t pos = gt.count(), neg = n - pos;
  if (pos == 0 || neg == 0) throw ValidationError("auc: ground truth must contain both classes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return prob[a] < prob[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && prob[order[j]] == prob[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) rank_sum += gt.bits()[order[k]] ? avg_rank : 0.0;
    i = j;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

namespace {

struct Contingency {
  std::unordered_map<long long, double> joint;
  std::unordered_map<int, double> rows;
  std::unordered_map<int, double> cols;
  double total = 0.0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ShapeError("partition comparison: label vectors differ in length");
  Contingency t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    t.joint[(static_cast<long long>(a[i]) << 32) ^ static_cast<long long>(static_cast<unsigned>(b[i]))] += 1.0;
    t.rows[a[i]] += 1.0;
    t.cols[b[i]] += 1.0;
  }
  t.total = static_cast<double>(a.size());
  return t;
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  const auto t = contingency(a, b);
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [k, v] : t.joint) sum_ij += choose2(v);
  for (const auto& [k, v] : t.rows) sum_a += choose2(v);
  for (const auto& [k, v] : t.cols) sum_b += choose2(v);
  const double all = choose2(t.total);
  if (all == 0.0) return 1.0;
  const double expected = sum_a * sum_b / all;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

double variation_of_information(std::span<const int> a, std::span<const int> b) {
  const auto t = contingency(a, b);
  auto entropy = [&](const auto& counts) {
    double h = 0.0;
    for (const auto& [k, v] : counts) {
      const double p = v / t.total;
      h -= p * std::log(p);
    }
    return h;
  };
  const double vi = 2.0 * entropy(t.joint) - entropy(t.rows) - entropy(t.cols);
  return std::max(0.0, vi);
}

double ari_error(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "ari_error");
  return 1.0 - adjusted_rand_index(label_components(pred).labels, label_components(gt).labels);
}

double variation_of_information(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "variation_of_information");
  return variation_of_information(label_components(pred).labels, label_components(gt).labels);
}

nlohmann::json MetricsReport::to_json() const {
  return nlohmann::json{{"dice", dice},
                        {"auc", auc},
                        {"cl_dice", cl_dice},
                        {"betti0_error", betti0_error},
                        {"betti1_error", betti1_error},
                        {"euler_error", euler_error},
                        {"ari_error", ari_error},
                        {"vi", vi},
                        {"counts",
                         {{"pred_b0", pred_b0},
                          {"pred_b1", pred_b1},
                          {"pred_euler", pred_euler},
                          {"gt_b0", gt_b0},
                          {"gt_b1", gt_b1},
                          {"gt_euler", gt_euler}}}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.dice = j.at("dice");
  r.auc = j.at("auc");
  r.cl_dice = j.at("cl_dice");
  r.betti0_error = j.at("betti0_error");
  r.betti1_error = j.at("betti1_error");
  r.euler_error = j.at("euler_error");
  r.ari_error = j.at("ari_error");
  r.vi = j.at("vi");
  if (j.contains("counts")) {
    const auto& c = j["counts"];
    r.pred_b0 = c.value("pred_b0", 0.0);
    r.pred_b1 = c.value("pred_b1", 0.0);
    r.pred_euler = c.value("pred_euler", 0.0);
    r.gt_b0 = c.value("gt_b0", 0.0);
    r.gt_b1 = c.value("gt_b1", 0.0);
    r.gt_euler = c.value("gt_euler", 0.0);
  }
  return r;
}

MetricsReport evaluate_pair(std::span<const double> prob, const BinaryMask& gt, double threshold) {
  const BinaryMask pred = BinaryMask::threshold(gt.height(), gt.width(), prob, threshold);
  MetricsReport r;
  r.dice = dice(pred, gt);
  r.auc = auc(prob, gt);
  r.cl_dice = cl_dice(pred, gt);
  const auto bp = betti_numbers(pred), bg = betti_numbers(gt);
  const long ep = euler_characteristic(pred), eg = euler_characteristic(gt);
  r.betti0_error = std::abs(bp.b0 - bg.b0);
  r.betti1_error = std::abs(bp.b1 - bg.b1);
  r.euler_error = static_cast<double>(std::labs(ep - eg));
  r.ari_error = ari_error(pred, gt);
  r.vi = variation_of_information(pred, gt);
  r.pred_b0 = bp.b0;
  r.pred_b1 = bp.b1;
  r.pred_euler = static_cast<double>(ep);
  r.gt_b0 = bg.b0;
  r.gt_b1 = bg.b1;
  r.gt_euler = static_cast<double>(eg);
  return r;
}

MetricsReport evaluate_pair(const Tensor& prob, const BinaryMask& gt, double threshold) {
  if (prob.size() != gt.size()) {
    throw ShapeError("evaluate_pair: probability map " + shape_to_string(prob.shape()) + " does not match mask " +
                     std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  return evaluate_pair(prob.data(), gt, threshold);
}

MetricsReport mean_report(std::span<const MetricsReport> reports) {
  MetricsReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.dice += r.dice;
    m.auc += r.auc;
    m.cl_dice += r.cl_dice;
    m.betti0_error += r.betti0_error;
    m.betti1_error += r.betti1_error;
    m.euler_error += r.euler_error;
    m.ari_error += r.ari_error;
    m.vi += r.vi;
    m.pred_b0 += r.pred_b0;
    m.pred_b1 += r.pred_b1;
    m.pred_euler += r.pred_euler;
    m.gt_b0 += r.gt_b0;
    m.gt_b1 += r.gt_b1;
    m.gt_euler += r.gt_euler;
  }
  const double k = static_cast<double>(reports.size());
  for (double* f : {&m.dice, &m.auc, &m.cl_dice, &m.betti0_error, &m.betti1_error, &m.euler_error, &m.ari_error,
                    &m.vi, &m.pred_b0, &m.pred_b1, &m.pred_euler, &m.gt_b0, &m.gt_b1, &m.gt_euler}) {
    *f /= k;
  }
  return m;
}

}  // namespace topoconv

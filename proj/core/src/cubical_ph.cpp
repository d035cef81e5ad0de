#include "topoconv/cubical_ph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "topoconv/errors.hpp"

namespace topoconv {

ScalarMap::ScalarMap(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height_ == 0 || width_ == 0) throw ShapeError("ScalarMap: height and width must be >= 1");
  if (values_.size() != height_ * width_) throw ShapeError("ScalarMap: value count does not match H*W");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("ScalarMap: values must lie in [0,1]; normalize first");
  }
}

ScalarMap ScalarMap::normalized(std::size_t height, std::size_t width, std::span<const double> raw) {
  if (raw.size() != height * width) throw ShapeError("ScalarMap: value count does not match H*W");
  if (raw.empty()) throw ShapeError("ScalarMap: height and width must be >= 1");
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  std::vector<double> v(raw.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) v[i] = std::clamp((raw[i] - *lo) / range, 0.0, 1.0);
  }
  return ScalarMap(height, width, std::move(v));
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  void attach(std::size_t child_root, std::size_t parent_root) { parent_[child_root] = parent_root; }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

PersistenceDiagram compute_ph0(const ScalarMap& map, Connectivity connectivity) {
  const std::size_t h = map.height(), w = map.width(), n = h * w;
  const auto values = map.values();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  UnionFind uf(n);
  std::vector<char> processed(n, 0);
  // Birth pixel of each root; only meaningful for current roots.
  std::vector<std::size_t> birth_pixel(n);

  auto coord = [w](std::size_t i) { return PixelCoord{i % w, i / w}; };
  auto elder = [&](std::size_t ra, std::size_t rb) {
    const double ba = values[birth_pixel[ra]], bb = values[birth_pixel[rb]];
    if (ba != bb) return ba > bb;
    return birth_pixel[ra] < birth_pixel[rb];
  };

  static constexpr int kOffsets4[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
  static constexpr int kOffsets8[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};
  const std::span<const int[2]> offsets =
      connectivity == Connectivity::four ? std::span<const int[2]>(kOffsets4) : std::span<const int[2]>(kOffsets8);

  PersistenceDiagram pd;
  std::vector<std::size_t> roots;
  for (std::size_t p : order) {
    const long y = static_cast<long>(p / w), x = static_cast<long>(p % w);
    roots.clear();
    for (const auto& off : offsets) {
      const long ny = y + off[0], nx = x + off[1];
      if (ny < 0 || nx < 0 || ny >= static_cast<long>(h) || nx >= static_cast<long>(w)) continue;
      const std::size_t q = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
      if (!processed[q]) continue;
      const std::size_t r = uf.find(q);
      if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
    }
    processed[p] = 1;
    if (roots.empty()) {
      birth_pixel[p] = p;
      continue;
    }
    std::size_t survivor = roots.front();
    for (std::size_t r : roots) {
      if (elder(r, survivor)) survivor = r;
    }
    for (std::size_t r : roots) {
      if (r == survivor) continue;
      const std::size_t b = birth_pixel[r];
      if (values[b] > values[p]) {
        pd.pairs.push_back(PersistencePair{values[b], values[p], coord(b), coord(p), false});
      }
      uf.attach(r, survivor);
    }
    uf.attach(p, survivor);
  }

  // With 4- or 8-connectivity on a full grid everything ends up in one component.
  const std::size_t root = uf.find(0);
  const auto argmin = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  const std::size_t b = birth_pixel[root];
  pd.pairs.push_back(PersistencePair{values[b], values[argmin], coord(b), coord(argmin), true});
  return pd;
}

GeneratorSet pairs_to_generators(const PersistenceDiagram& pd) {
  GeneratorSet g;
  g.entries.reserve(pd.pairs.size());
  for (const auto& pair : pd.pairs) g.entries.push_back(Generator{pair.birth_coord, pair.death_coord});
  return g;
}

GeneratorSet filter_generators(const PersistenceDiagram& pd, const GeneratorSet& generators, double tau0) {
  if (pd.pairs.size() != generators.entries.size()) {
    throw ShapeError("filter_generators: diagram and generator set are not index-aligned");
  }
  if (!(tau0 >= 0.0)) throw ValidationError("filter_generators: tau0 must be >= 0");
  GeneratorSet out;
  for (std::size_t i = 0; i < pd.pairs.size(); ++i) {
    if (pd.pairs[i].persistence() > tau0) out.entries.push_back(generators.entries[i]);
  }
  return out;
}

std::string to_csv(const PersistenceDiagram& pd) {
  std::string out = "birth,death,bx,by,dx,dy,essential\n";
  char buf[160];
  for (const auto& p : pd.pairs) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%zu,%zu,%zu,%zu,%d\n", p.birth, p.death, p.birth_coord.x,
                  p.birth_coord.y, p.death_coord.x, p.death_coord.y, p.essential ? 1 : 0);
    out += buf;
  }
  return out;
}

PersistenceDiagram from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "birth,death,bx,by,dx,dy,essential") {
    throw IoError("persistence CSV: missing or unexpected header");
  }
  PersistenceDiagram pd;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    PersistencePair p;
    int essential = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%zu,%zu,%zu,%zu,%d", &p.birth, &p.death, &p.birth_coord.x,
                    &p.birth_coord.y, &p.death_coord.x, &p.death_coord.y, &essential) != 7) {
      throw IoError("persistence CSV: malformed row '" + line + "'");
    }
    p.essential = essential != 0;
    pd.pairs.push_back(p);
  }
  return pd;
}

}  // namespace topoconv

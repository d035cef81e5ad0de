#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace topoconv {

/// H x W map with values in [0, 1], row-major.
class ScalarMap {
 public:
  ScalarMap(std::size_t height, std::size_t width, std::vector<double> values);

  // Min-max normalizes arbitrary finite values into [0, 1]; constant input becomes all zeros.
  static ScalarMap normalized(std::size_t height, std::size_t width, std::span<const double> raw);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  double at(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> values_;
};

struct PixelCoord {
  std::size_t x = 0;  // column
  std::size_t y = 0;  // row
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// One 0-dimensional class of a superlevel filtration: born at the local
/// maximum `birth_coord`, killed when it merges into an older component at
/// `death_coord`. birth >= death always.
struct PersistencePair {
  double birth = 0.0;
  double death = 0.0;
  PixelCoord birth_coord;
  PixelCoord death_coord;
  bool essential = false;

  double persistence() const noexcept { return birth - death; }
};

struct PersistenceDiagram {
  std::vector<PersistencePair> pairs;
};

struct Generator {
  PixelCoord birth;
  PixelCoord death;
  friend bool operator==(const Generator&, const Generator&) = default;
};

struct GeneratorSet {
  std::vector<Generator> entries;
};

enum class Connectivity { four = 4, eight = 8 };

/// 0-dimensional persistent homology of the superlevel filtration of `map`.
///
/// Pixels are swept by decreasing value (ties in raster order) and merged
/// with union-find under the elder rule: the component with the higher birth
/// survives, equal births keep the root with the smaller raster index.
/// Components that are born and die at the same value are never visible at
/// any threshold and are not reported. The surviving component is reported
/// once as the essential pair, dying at the global minimum (first argmin).
PersistenceDiagram compute_ph0(const ScalarMap& map, Connectivity connectivity = Connectivity::four);

GeneratorSet pairs_to_generators(const PersistenceDiagram& pd);

/// Keeps entry i iff pd.pairs[i].persistence() > tau0.
GeneratorSet filter_generators(const PersistenceDiagram& pd, const GeneratorSet& generators, double tau0);

// CSV with header `birth,death,bx,by,dx,dy,essential`, floats at 9 significant digits.
std::string to_csv(const PersistenceDiagram& pd);
PersistenceDiagram from_csv(const std::string& text);

}  // namespace topoconv

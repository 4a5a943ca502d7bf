#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace numeraire {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream for path `index` under master `seed`. The stream only
// depends on (seed, index), never on which worker draws it.
inline std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

// Box-Muller on the engine's raw output. std::normal_distribution is not
// specified bit-for-bit across standard libraries, this is.
class Normal {
 public:
  double operator()(std::mt19937_64& g) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform(g);
    } while (u1 <= 0.0);
    const double u2 = uniform(g);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  static double uniform(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace numeraire

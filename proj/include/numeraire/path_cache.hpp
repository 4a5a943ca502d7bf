#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "numeraire/config.hpp"
#include "numeraire/market.hpp"

namespace numeraire {

// Columnar binary store of path bundles, one file per (spec hash, seed):
//   magic "NUMPATH1", u64 spec hash, u64 seed, i64 d, i64 N, u64 count,
//   then theta[count], noise[count], S[count][d][N+1], dM[count][d][N],
//   dW_perp[count][N], all little-endian doubles.
// Files are write-once: an existing file for a key is never overwritten.
class PathCache {
 public:
  explicit PathCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path file_for(const Market& m) const {
    char name[64];
    std::snprintf(name, sizeof name, "paths_%016llx_%llu.bin",
                  static_cast<unsigned long long>(market_hash(m.spec())),
                  static_cast<unsigned long long>(m.spec().seed));
    return dir_ / name;
  }

  /// Paths 0..n-1, read from the cache when it holds enough of them,
  /// simulated (and stored) otherwise.
  std::vector<PathBundle> get(const Market& m, std::size_t n, int threads = 1) const {
    const auto file = file_for(m);
    if (std::filesystem::exists(file)) {
      auto cached = read(file, m);
      if (cached.size() >= n) {
        cached.resize(n);
        return cached;
      }
    }
    auto paths = m.simulate_paths(n, threads);
    if (!std::filesystem::exists(file)) write(file, m, paths);
    return paths;
  }

  static void write(const std::filesystem::path& file, const Market& m, const std::vector<PathBundle>& paths) {
    std::filesystem::create_directories(file.parent_path());
    const auto tmp = file.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw ConfigError("cannot write path cache '" + tmp + "'");
      out.write("NUMPATH1", 8);
      put(out, market_hash(m.spec()));
      put(out, m.spec().seed);
      put(out, static_cast<std::int64_t>(m.dim()));
      put(out, static_cast<std::int64_t>(m.n_steps()));
      put(out, static_cast<std::uint64_t>(paths.size()));
      for (const auto& p : paths) put(out, p.theta);
      for (const auto& p : paths) put(out, p.observation_noise);
      for (const auto& p : paths) put_rows(out, p.S);
      for (const auto& p : paths) put_rows(out, p.dM);
      for (const auto& p : paths) out.write(reinterpret_cast<const char*>(p.dW_perp.data()),
                                            static_cast<std::streamsize>(sizeof(double) * p.dW_perp.size()));
      if (!out) throw ConfigError("failed writing path cache '" + tmp + "'");
    }
    std::filesystem::rename(tmp, file);
  }

  static std::vector<PathBundle> read(const std::filesystem::path& file, const Market& m) {
    std::ifstream in(file, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "NUMPATH1") throw ConfigError("'" + file.string() + "' is not a path cache");
    const auto hash = get<std::uint64_t>(in);
    const auto seed = get<std::uint64_t>(in);
    const auto d = get<std::int64_t>(in);
    const auto n = get<std::int64_t>(in);
    const auto count = get<std::uint64_t>(in);
    if (hash != market_hash(m.spec()) || seed != m.spec().seed || d != m.dim() || n != m.n_steps()) {
      throw ConfigError("path cache '" + file.string() + "' belongs to a different market");
    }
    std::vector<PathBundle> out(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      out[i].index = i;
      out[i].S.resize(d, n + 1);
      out[i].dM.resize(d, n);
      out[i].dW_perp.resize(n);
    }
    for (auto& p : out) p.theta = get<double>(in);
    for (auto& p : out) p.observation_noise = get<double>(in);
    for (auto& p : out) get_rows(in, p.S);
    for (auto& p : out) get_rows(in, p.dM);
    for (auto& p : out) in.read(reinterpret_cast<char*>(p.dW_perp.data()), static_cast<std::streamsize>(sizeof(double) * n));
    if (!in) throw ConfigError("path cache '" + file.string() + "' is truncated");
    return out;
  }

 private:
  template <class T>
  static void put(std::ostream& os, T x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof x);
  }
  template <class T>
  static T get(std::istream& is) {
    T x{};
    is.read(reinterpret_cast<char*>(&x), sizeof x);
    return x;
  }
  static void put_rows(std::ostream& os, const Matrix& a) {
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) put(os, a(r, c));
  }
  static void get_rows(std::istream& is, Matrix& a) {
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = get<double>(is);
  }

  std::filesystem::path dir_;
};

}  // namespace numeraire

#include "evlab/ensemble.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "evlab/errors.hpp"

namespace evlab {

std::string to_string(Family f) {
  switch (f) {
    case Family::GinibreComplex: return "ginibre-complex";
    case Family::BernoulliComplex: return "bernoulli-complex";
    case Family::UniformPhase: return "uniform-phase";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  if (s == "ginibre-complex") return Family::GinibreComplex;
  if (s == "bernoulli-complex") return Family::BernoulliComplex;
  if (s == "uniform-phase") return Family::UniformPhase;
  throw std::invalid_argument("unknown ensemble family: " + s);
}

namespace {

Complex draw_entry(Family family, double inv_sqrt_n, Stream& rng) {
  switch (family) {
    case Family::GinibreComplex:
      return rng.normal_complex() * inv_sqrt_n;
    case Family::BernoulliComplex: {
      // uniform on {1, i, -1, -i} / sqrt(N)
      static const Complex fourth[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      return fourth[rng.next_u64() >> 62] * inv_sqrt_n;
    }
    case Family::UniformPhase: {
      const double phi = 2.0 * kPi * rng.uniform();
      return Complex{std::cos(phi), std::sin(phi)} * inv_sqrt_n;
    }
  }
  return {};
}

}  // namespace

CMatrix draw_iid(Family family, int n, Stream& rng) {
  if (n < 1) throw std::invalid_argument("draw_iid: dim must be >= 1");
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  CMatrix a(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = draw_entry(family, inv_sqrt_n, rng);
  return a;
}

CMatrix sample_iid(const EnsembleSpec& spec, std::uint64_t sample_index) {
  Stream rng = derive_stream(spec.master_seed, sample_index);
  return draw_iid(spec.family, spec.dim, rng);
}

CMatrix gaussian_divisible(const CMatrix& a, double t, bool normalize, Stream& rng) {
  if (t < 0.0) throw std::invalid_argument("gaussian_divisible: t must be >= 0");
  if (a.rows() != a.cols()) throw DimensionMismatch("gaussian_divisible: square matrix required");
  if (t == 0.0) return a;
  const int n = static_cast<int>(a.rows());
  const double scale = std::sqrt(t / static_cast<double>(n));
  CMatrix m = a;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) += scale * rng.normal_complex();
  if (normalize) m *= 1.0 / std::sqrt(1.0 + t);
  return m;
}

CMatrix sample_matrix(const EnsembleSpec& spec, std::uint64_t sample_index) {
  Stream rng = derive_stream(spec.master_seed, sample_index);
  CMatrix a = draw_iid(spec.family, spec.dim, rng);
  if (spec.t > 0.0) a = gaussian_divisible(a, spec.t, spec.normalize_1plust, rng);
  return a;
}

void write_cmat(const std::string& path, const CMatrix& m) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("write_cmat: cannot open " + path);
  const char magic[4] = {'C', 'M', 'A', 'T'};
  const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
  const std::uint32_t reserved = 0;
  std::fwrite(magic, 1, 4, f);
  std::fwrite(&rows, 4, 1, f);
  std::fwrite(&cols, 4, 1, f);
  std::fwrite(&reserved, 4, 1, f);
  // column-major (re, im) f64 pairs; Eigen's native layout
  const std::size_t n = static_cast<std::size_t>(m.size());
  if (std::fwrite(m.data(), sizeof(Complex), n, f) != n) {
    std::fclose(f);
    throw Error("write_cmat: short write to " + path);
  }
  std::fclose(f);
}

CMatrix read_cmat(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error("read_cmat: cannot open " + path);
  char magic[4];
  std::uint32_t rows = 0, cols = 0, reserved = 0;
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "CMAT", 4) != 0) {
    std::fclose(f);
    throw Error("read_cmat: bad magic in " + path);
  }
  std::fread(&rows, 4, 1, f);
  std::fread(&cols, 4, 1, f);
  std::fread(&reserved, 4, 1, f);
  CMatrix m(rows, cols);
  const std::size_t n = static_cast<std::size_t>(m.size());
  if (std::fread(m.data(), sizeof(Complex), n, f) != n) {
    std::fclose(f);
    throw Error("read_cmat: truncated file " + path);
  }
  std::fclose(f);
  if (!m.allFinite()) throw Error("read_cmat: non-finite entries in " + path);
  return m;
}

}  // namespace evlab

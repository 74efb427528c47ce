#pragma once

#include <cstdint>
#include <string>

#include "evlab/common.hpp"
#include "evlab/rng.hpp"

namespace evlab {

enum class Family { GinibreComplex, BernoulliComplex, UniformPhase };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

/// Matrix law description. Every family has entrywise mean 0 and variance 1/N.
struct EnsembleSpec {
  Family family = Family::GinibreComplex;
  int dim = 0;
  std::uint64_t master_seed = 0;
  double t = 0.0;               // Gaussian-divisible time; 0 = none
  bool normalize_1plust = false;  // apply (1+t)^{-1/2} after deformation
};

/// N x N i.i.d. draw from `family` scaled to entry variance 1/N, consuming
/// entries column-major from `rng`.
CMatrix draw_iid(Family family, int n, Stream& rng);

/// One i.i.d. draw from spec.family, scaled to entry variance 1/N. Pure in
/// (spec, sample_index); the deformation time spec.t is not applied here.
CMatrix sample_iid(const EnsembleSpec& spec, std::uint64_t sample_index);

/// A + sqrt(t) B with B an independent complex Ginibre matrix drawn from `rng`;
/// multiplies by (1+t)^{-1/2} when `normalize` is set. Rejects t < 0.
CMatrix gaussian_divisible(const CMatrix& a, double t, bool normalize, Stream& rng);

/// sample_iid followed by the Gaussian-divisible deformation when spec.t > 0,
/// drawing both from the single per-index stream.
CMatrix sample_matrix(const EnsembleSpec& spec, std::uint64_t sample_index);

/// Binary interchange format: 16-byte header (magic "CMAT", u32 rows, u32 cols,
/// u32 reserved) followed by column-major little-endian f64 (re, im) pairs.
void write_cmat(const std::string& path, const CMatrix& m);
CMatrix read_cmat(const std::string& path);

}  // namespace evlab

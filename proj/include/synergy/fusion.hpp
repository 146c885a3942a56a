#pragma once

#include <cstddef>
#include <random>

#include "synergy/tensor.hpp"

namespace synergy {

// Factorized bilinear pooling weights. Factor i occupies rows [i·l, (i+1)·l) of
// both projections, so U·x yields all k projections Uᵢᵀx stacked.
struct MfbParams {
  Tensor u;  // [k·l × d_x]
  Tensor v;  // [k·l × d_y]
  std::size_t factors = 1;
  std::size_t hidden = 1;

  static MfbParams create(std::size_t x_dim, std::size_t y_dim, std::size_t factors, std::size_t hidden,
                          std::mt19937_64& rng);
  std::size_t x_dim() const { return u.cols(); }
  std::size_t y_dim() const { return v.cols(); }
};

struct AttentionParams {
  Tensor w;  // [l]

  static AttentionParams create(std::size_t hidden, std::mt19937_64& rng);
};

// Σᵢ (Uᵢᵀx) ∘ (Vᵢᵀy) before normalization.
Tensor mfb_fuse_raw(const Tensor& x, const Tensor& y, const MfbParams& p);
// Normalized single-channel fusion, [l].
Tensor mfb_fuse(const Tensor& x, const Tensor& y, const MfbParams& p);
// Column j fuses x with y[:, j]; each column normalized independently. [l × φ].
Tensor mfb_fuse_multi_raw(const Tensor& x, const Tensor& y, const MfbParams& p);
Tensor mfb_fuse_multi(const Tensor& x, const Tensor& y, const MfbParams& p);

struct Attended {
  Tensor weights;   // [φ], softmax over channels
  Tensor attended;  // [d], features · weights
};

Attended attend(const Tensor& z, const Tensor& features, const AttentionParams& p);

}  // namespace synergy

#pragma once

#include <random>

#include "synergy/tensor.hpp"

namespace synergy {

// Trainable tensor with entries uniform(-bound, bound).
Tensor uniform_param(Shape shape, std::mt19937_64& rng, double bound = 0.08);

}  // namespace synergy

#include "synergy/fusion.hpp"

#include "synergy/errors.hpp"
#include "synergy/init.hpp"
#include "synergy/ops.hpp"

namespace synergy {

namespace {

void check_dims(const Tensor& x, std::size_t y_dim, const MfbParams& p, const char* op) {
  if (x.rank() != 1 || x.numel() != p.x_dim() || y_dim != p.y_dim())
    throw ShapeError(std::string(op) + ": inputs " + shape_to_string(x.shape()) + " / " +
                     std::to_string(y_dim) + " do not match factors " + shape_to_string(p.u.shape()) +
                     " / " + shape_to_string(p.v.shape()));
}

}  // namespace

MfbParams MfbParams::create(std::size_t x_dim, std::size_t y_dim, std::size_t factors, std::size_t hidden,
                            std::mt19937_64& rng) {
  if (factors == 0 || hidden == 0) throw ValueError("MFB needs k >= 1 and l >= 1");
  MfbParams p;
  p.factors = factors;
  p.hidden = hidden;
  p.u = uniform_param(Shape{factors * hidden, x_dim}, rng);
  p.v = uniform_param(Shape{factors * hidden, y_dim}, rng);
  return p;
}

AttentionParams AttentionParams::create(std::size_t hidden, std::mt19937_64& rng) {
  return {uniform_param(Shape{hidden}, rng)};
}

Tensor mfb_fuse_raw(const Tensor& x, const Tensor& y, const MfbParams& p) {
  if (y.rank() != 1) throw ShapeError("mfb_fuse: y must be a vector, got " + shape_to_string(y.shape()));
  check_dims(x, y.numel(), p, "mfb_fuse");
  return ops::fold_sum(ops::mul(ops::matvec(p.u, x), ops::matvec(p.v, y)), p.factors);
}

Tensor mfb_fuse(const Tensor& x, const Tensor& y, const MfbParams& p) {
  return ops::normalize_power_l2(mfb_fuse_raw(x, y, p));
}

Tensor mfb_fuse_multi_raw(const Tensor& x, const Tensor& y, const MfbParams& p) {
  if (y.rank() != 2) throw ShapeError("mfb_fuse_multi: y must be [d×φ], got " + shape_to_string(y.shape()));
  check_dims(x, y.rows(), p, "mfb_fuse_multi");
  return ops::fold_sum(ops::mul_col_broadcast(ops::matmul(p.v, y), ops::matvec(p.u, x)), p.factors);
}

Tensor mfb_fuse_multi(const Tensor& x, const Tensor& y, const MfbParams& p) {
  return ops::normalize_power_l2(mfb_fuse_multi_raw(x, y, p));
}

Attended attend(const Tensor& z, const Tensor& features, const AttentionParams& p) {
  if (z.rank() != 2 || features.rank() != 2 || z.cols() != features.cols())
    throw ShapeError("attend: channel mismatch between " + shape_to_string(z.shape()) + " and " +
                     shape_to_string(features.shape()));
  if (p.w.numel() != z.rows())
    throw ShapeError("attend: scoring vector of " + std::to_string(p.w.numel()) + " does not match l=" +
                     std::to_string(z.rows()));
  Tensor weights = ops::softmax(ops::matvec(ops::transpose(z), p.w));
  return {weights, ops::matvec(features, weights)};
}

}  // namespace synergy

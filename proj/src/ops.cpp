#include "synergy/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>

#include "synergy/errors.hpp"

namespace synergy::ops {

namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

Graph* tracking(std::initializer_list<const Tensor*> inputs) {
  Graph* g = Graph::current();
  if (!g) return nullptr;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return g;
  return nullptr;
}

Graph* tracking(std::span<const Tensor> inputs) {
  Graph* g = Graph::current();
  if (!g) return nullptr;
  for (const Tensor& t : inputs)
    if (t.requires_grad()) return g;
  return nullptr;
}

// Gradient buffer of an input, or nullptr when it does not take gradients.
double* grad_of(const ImplPtr& p) { return p->grad.empty() ? nullptr : p->grad.data(); }

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
}

template <class Fwd, class Deriv>
Tensor unary_map(const Tensor& a, OpKind kind, Fwd fwd, Deriv deriv_from_output) {
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  Tensor result(a.shape(), std::move(out));
  if (Graph* g = tracking({&a})) {
    ImplPtr pa = a.impl(), po = result.impl();
    g->record(kind, {pa}, result, [pa, po, deriv_from_output] {
      double* ga = grad_of(pa);
      if (!ga) return;
      for (std::size_t i = 0; i < po->data.size(); ++i)
        ga[i] += po->grad[i] * deriv_from_output(po->data[i]);
    });
  }
  return result;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * B[p * n + j];
    }
  Tensor result(Shape{m, n}, std::move(out));
  if (Graph* g = tracking({&a, &b})) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    g->record(OpKind::MatMul, {pa, pb}, result, [pa, pb, po, m, k, n] {
      const double* G = po->grad.data();
      if (double* ga = grad_of(pa)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * pb->data[p * n + j];
            ga[i * k + p] += s;
          }
      }
      if (double* gb = grad_of(pb)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = pa->data[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * G[i * n + j];
          }
      }
    });
  }
  return result;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.cols() != x.numel())
    throw ShapeError("matvec: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(x.shape()));
  const std::size_t m = a.rows(), k = a.cols();
  std::vector<double> out(m, 0.0);
  const auto A = a.data();
  const auto X = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    const double* row = A.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) s += row[p] * X[p];
    out[i] = s;
  }
  Tensor result(Shape{m}, std::move(out));
  if (Graph* g = tracking({&a, &x})) {
    ImplPtr pa = a.impl(), px = x.impl(), po = result.impl();
    g->record(OpKind::MatVec, {pa, px}, result, [pa, px, po, m, k] {
      const double* G = po->grad.data();
      if (double* ga = grad_of(pa)) {
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = G[i];
          if (gi == 0.0) continue;
          double* row = ga + i * k;
          for (std::size_t p = 0; p < k; ++p) row[p] += gi * px->data[p];
        }
      }
      if (double* gx = grad_of(px)) {
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = G[i];
          const double* row = pa->data.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) gx[p] += gi * row[p];
        }
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  Tensor result(Shape{n, m}, std::move(out));
  if (Graph* g = tracking({&a})) {
    ImplPtr pa = a.impl(), po = result.impl();
    g->record(OpKind::Transpose, {pa}, result, [pa, po, m, n] {
      double* ga = grad_of(pa);
      if (!ga) return;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += po->grad[j * m + i];
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor result(a.shape(), std::move(out));
  if (Graph* g = tracking({&a, &b})) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    g->record(OpKind::Add, {pa, pb}, result, [pa, pb, po] {
      const std::size_t n = po->grad.size();
      if (double* ga = grad_of(pa))
        for (std::size_t i = 0; i < n; ++i) ga[i] += po->grad[i];
      if (double* gb = grad_of(pb))
        for (std::size_t i = 0; i < n; ++i) gb[i] += po->grad[i];
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor result(a.shape(), std::move(out));
  if (Graph* g = tracking({&a, &b})) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    g->record(OpKind::Sub, {pa, pb}, result, [pa, pb, po] {
      const std::size_t n = po->grad.size();
      if (double* ga = grad_of(pa))
        for (std::size_t i = 0; i < n; ++i) ga[i] += po->grad[i];
      if (double* gb = grad_of(pb))
        for (std::size_t i = 0; i < n; ++i) gb[i] -= po->grad[i];
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor result(a.shape(), std::move(out));
  if (Graph* g = tracking({&a, &b})) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    g->record(OpKind::Mul, {pa, pb}, result, [pa, pb, po] {
      const std::size_t n = po->grad.size();
      if (double* ga = grad_of(pa))
        for (std::size_t i = 0; i < n; ++i) ga[i] += po->grad[i] * pb->data[i];
      if (double* gb = grad_of(pb))
        for (std::size_t i = 0; i < n; ++i) gb[i] += po->grad[i] * pa->data[i];
    });
  }
  return result;
}

Tensor add_col_broadcast(const Tensor& m, const Tensor& b) {
  require_rank(m, 2, "add_col_broadcast");
  require_rank(b, 1, "add_col_broadcast");
  const std::size_t rows = m.rows(), cols = m.cols();
  if (b.numel() != rows)
    throw ShapeError("add_col_broadcast: " + shape_to_string(m.shape()) + " with bias " +
                     shape_to_string(b.shape()));
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = m[i * cols + j] + b[i];
  Tensor result(m.shape(), std::move(out));
  if (Graph* g = tracking({&m, &b})) {
    ImplPtr pm = m.impl(), pb = b.impl(), po = result.impl();
    g->record(OpKind::AddColBroadcast, {pm, pb}, result, [pm, pb, po, rows, cols] {
      if (double* gm = grad_of(pm))
        for (std::size_t i = 0; i < rows * cols; ++i) gm[i] += po->grad[i];
      if (double* gb = grad_of(pb))
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) gb[i] += po->grad[i * cols + j];
    });
  }
  return result;
}

Tensor mul_col_broadcast(const Tensor& m, const Tensor& v) {
  require_rank(m, 2, "mul_col_broadcast");
  require_rank(v, 1, "mul_col_broadcast");
  const std::size_t rows = m.rows(), cols = m.cols();
  if (v.numel() != rows)
    throw ShapeError("mul_col_broadcast: " + shape_to_string(m.shape()) + " with " +
                     shape_to_string(v.shape()));
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = m[i * cols + j] * v[i];
  Tensor result(m.shape(), std::move(out));
  if (Graph* g = tracking({&m, &v})) {
    ImplPtr pm = m.impl(), pv = v.impl(), po = result.impl();
    g->record(OpKind::MulColBroadcast, {pm, pv}, result, [pm, pv, po, rows, cols] {
      if (double* gm = grad_of(pm))
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) gm[i * cols + j] += po->grad[i * cols + j] * pv->data[i];
      if (double* gv = grad_of(pv))
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) gv[i] += po->grad[i * cols + j] * pm->data[i * cols + j];
    });
  }
  return result;
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  Tensor result(a.shape(), std::move(out));
  if (Graph* g = tracking({&a})) {
    ImplPtr pa = a.impl(), po = result.impl();
    g->record(OpKind::Scale, {pa}, result, [pa, po, factor] {
      if (double* ga = grad_of(pa))
        for (std::size_t i = 0; i < po->grad.size(); ++i) ga[i] += po->grad[i] * factor;
    });
  }
  return result;
}

Tensor add_scalar(const Tensor& a, double offset) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + offset;
  Tensor result(a.shape(), std::move(out));
  if (Graph* g = tracking({&a})) {
    ImplPtr pa = a.impl(), po = result.impl();
    g->record(OpKind::AddScalar, {pa}, result, [pa, po] {
      if (double* ga = grad_of(pa))
        for (std::size_t i = 0; i < po->grad.size(); ++i) ga[i] += po->grad[i];
    });
  }
  return result;
}

Tensor tanh(const Tensor& a) {
  return unary_map(
      a, OpKind::Tanh, [](double x) { return std::tanh(x); },
      [](double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_map(
      a, OpKind::Sigmoid,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  // View x as [outer × n] blocks with stride `inner` between softmax elements.
  std::size_t n = 0, outer = 0, inner = 0;
  if (x.rank() == 1) {
    if (axis != 0) throw ShapeError("softmax: axis out of range for a vector");
    n = x.numel();
    outer = 1;
    inner = 1;
  } else if (x.rank() == 2) {
    if (axis == 0) {
      n = x.rows();
      outer = x.cols();
      inner = x.cols();
    } else if (axis == 1) {
      n = x.cols();
      outer = x.rows();
      inner = 1;
    } else {
      throw ShapeError("softmax: axis out of range for a matrix");
    }
  } else {
    throw ShapeError("softmax: unsupported rank " + shape_to_string(x.shape()));
  }
  if (n == 0) throw ShapeError("softmax: empty axis");

  // Start and stride of line o.
  auto base = [&](std::size_t o) { return axis == 0 && x.rank() == 2 ? o : o * n; };
  const std::size_t stride = (axis == 0 && x.rank() == 2) ? inner : 1;

  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t b = base(o);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[b + i * stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(x[b + i * stride] - mx);
      out[b + i * stride] = e;
      total += e;
    }
    for (std::size_t i = 0; i < n; ++i) out[b + i * stride] /= total;
  }
  Tensor result(x.shape(), std::move(out));
  if (Graph* g = tracking({&x})) {
    ImplPtr px = x.impl(), po = result.impl();
    const bool by_col = axis == 0 && x.rank() == 2;
    g->record(OpKind::Softmax, {px}, result, [px, po, n, outer, stride, by_col] {
      double* gx = grad_of(px);
      if (!gx) return;
      for (std::size_t o = 0; o < outer; ++o) {
        const std::size_t b = by_col ? o : o * n;
        double yg = 0.0;
        for (std::size_t i = 0; i < n; ++i) yg += po->data[b + i * stride] * po->grad[b + i * stride];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t k = b + i * stride;
          gx[k] += po->data[k] * (po->grad[k] - yg);
        }
      }
    });
  }
  return result;
}

Tensor log_softmax(const Tensor& x) {
  require_rank(x, 1, "log_softmax");
  const std::size_t n = x.numel();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::exp(x[i] - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - lse;
  Tensor result(x.shape(), std::move(out));
  if (Graph* g = tracking({&x})) {
    ImplPtr px = x.impl(), po = result.impl();
    g->record(OpKind::LogSoftmax, {px}, result, [px, po, n] {
      double* gx = grad_of(px);
      if (!gx) return;
      double gsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) gsum += po->grad[i];
      for (std::size_t i = 0; i < n; ++i) gx[i] += po->grad[i] - std::exp(po->data[i]) * gsum;
    });
  }
  return result;
}

Tensor logsumexp(const Tensor& x) {
  const std::size_t n = x.numel();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::exp(x[i] - mx);
  const double lse = mx + std::log(total);
  Tensor result = Tensor::scalar(lse);
  if (Graph* g = tracking({&x})) {
    ImplPtr px = x.impl(), po = result.impl();
    g->record(OpKind::LogSumExp, {px}, result, [px, po, n] {
      double* gx = grad_of(px);
      if (!gx) return;
      const double go = po->grad[0];
      const double l = po->data[0];
      for (std::size_t i = 0; i < n; ++i) gx[i] += go * std::exp(px->data[i] - l);
    });
  }
  return result;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor result = Tensor::scalar(s);
  if (Graph* g = tracking({&a})) {
    ImplPtr pa = a.impl(), po = result.impl();
    g->record(OpKind::Sum, {pa}, result, [pa, po] {
      if (double* ga = grad_of(pa))
        for (std::size_t i = 0; i < pa->data.size(); ++i) ga[i] += po->grad[0];
    });
  }
  return result;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel())
    throw ShapeError("dot: length mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  Tensor result = Tensor::scalar(s);
  if (Graph* g = tracking({&a, &b})) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    g->record(OpKind::Dot, {pa, pb}, result, [pa, pb, po] {
      const double go = po->grad[0];
      if (double* ga = grad_of(pa))
        for (std::size_t i = 0; i < pa->data.size(); ++i) ga[i] += go * pb->data[i];
      if (double* gb = grad_of(pb))
        for (std::size_t i = 0; i < pb->data.size(); ++i) gb[i] += go * pa->data[i];
    });
  }
  return result;
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require_rank(p, 1, "concat");
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Tensor result = Tensor::vector(std::move(out));
  if (Graph* g = tracking(parts)) {
    std::vector<ImplPtr> ins;
    for (const auto& p : parts) ins.push_back(p.impl());
    ImplPtr po = result.impl();
    g->record(OpKind::Concat, ins, result, [ins, offsets, po] {
      for (std::size_t k = 0; k < ins.size(); ++k) {
        double* gi = grad_of(ins[k]);
        if (!gi) continue;
        for (std::size_t i = 0; i < ins[k]->data.size(); ++i) gi[i] += po->grad[offsets[k] + i];
      }
    });
  }
  return result;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat(std::span<const Tensor>(parts));
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t length) {
  require_rank(a, 1, "slice");
  if (length == 0 || begin + length > a.numel())
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                     ") out of " + shape_to_string(a.shape()));
  std::vector<double> out(a.data().begin() + begin, a.data().begin() + begin + length);
  Tensor result = Tensor::vector(std::move(out));
  if (Graph* g = tracking({&a})) {
    ImplPtr pa = a.impl(), po = result.impl();
    g->record(OpKind::Slice, {pa}, result, [pa, po, begin, length] {
      if (double* ga = grad_of(pa))
        for (std::size_t i = 0; i < length; ++i) ga[begin + i] += po->grad[i];
    });
  }
  return result;
}

Tensor pick(const Tensor& a, std::size_t i) {
  if (i >= a.numel()) throw ShapeError("pick: index " + std::to_string(i) + " out of " + shape_to_string(a.shape()));
  Tensor result = Tensor::scalar(a[i]);
  if (Graph* g = tracking({&a})) {
    ImplPtr pa = a.impl(), po = result.impl();
    g->record(OpKind::Slice, {pa}, result, [pa, po, i] {
      if (double* ga = grad_of(pa)) ga[i] += po->grad[0];
    });
  }
  return result;
}

Tensor stack_columns(std::span<const Tensor> columns) {
  if (columns.empty()) throw ShapeError("stack_columns: no inputs");
  const std::size_t m = columns.front().numel(), n = columns.size();
  for (const auto& c : columns) {
    require_rank(c, 1, "stack_columns");
    if (c.numel() != m) throw ShapeError("stack_columns: ragged column " + shape_to_string(c.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) out[i * n + j] = columns[j][i];
  Tensor result(Shape{m, n}, std::move(out));
  if (Graph* g = tracking(columns)) {
    std::vector<ImplPtr> ins;
    for (const auto& c : columns) ins.push_back(c.impl());
    ImplPtr po = result.impl();
    g->record(OpKind::StackColumns, ins, result, [ins, po, m, n] {
      for (std::size_t j = 0; j < n; ++j) {
        double* gj = grad_of(ins[j]);
        if (!gj) continue;
        for (std::size_t i = 0; i < m; ++i) gj[i] += po->grad[i * n + j];
      }
    });
  }
  return result;
}

Tensor column(const Tensor& m, std::size_t j) {
  require_rank(m, 2, "column");
  const std::size_t rows = m.rows(), cols = m.cols();
  if (j >= cols) throw ShapeError("column: index " + std::to_string(j) + " out of " + shape_to_string(m.shape()));
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i] = m[i * cols + j];
  Tensor result = Tensor::vector(std::move(out));
  if (Graph* g = tracking({&m})) {
    ImplPtr pm = m.impl(), po = result.impl();
    g->record(OpKind::Column, {pm}, result, [pm, po, rows, cols, j] {
      if (double* gm = grad_of(pm))
        for (std::size_t i = 0; i < rows; ++i) gm[i * cols + j] += po->grad[i];
    });
  }
  return result;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_rank(table, 2, "gather_rows");
  if (indices.empty()) throw ShapeError("gather_rows: no indices");
  const std::size_t rows = table.rows(), cols = table.cols(), t = indices.size();
  std::vector<double> out(t * cols);
  for (std::size_t r = 0; r < t; ++r) {
    if (indices[r] >= rows)
      throw ShapeError("gather_rows: index " + std::to_string(indices[r]) + " out of " +
                       std::to_string(rows) + " rows");
    std::copy_n(table.data().begin() + indices[r] * cols, cols, out.begin() + r * cols);
  }
  Tensor result(Shape{t, cols}, std::move(out));
  if (Graph* g = tracking({&table})) {
    ImplPtr pt = table.impl(), po = result.impl();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    g->record(OpKind::GatherRows, {pt}, result, [pt, po, idx, cols] {
      double* gt = grad_of(pt);
      if (!gt) return;
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c) gt[idx[r] * cols + c] += po->grad[r * cols + c];
    });
  }
  return result;
}

Tensor row(const Tensor& m, std::size_t i) {
  require_rank(m, 2, "row");
  const std::size_t cols = m.cols();
  if (i >= m.rows()) throw ShapeError("row: index " + std::to_string(i) + " out of " + shape_to_string(m.shape()));
  std::vector<double> out(m.data().begin() + i * cols, m.data().begin() + (i + 1) * cols);
  Tensor result = Tensor::vector(std::move(out));
  if (Graph* g = tracking({&m})) {
    ImplPtr pm = m.impl(), po = result.impl();
    g->record(OpKind::Row, {pm}, result, [pm, po, i, cols] {
      if (double* gm = grad_of(pm))
        for (std::size_t c = 0; c < cols; ++c) gm[i * cols + c] += po->grad[c];
    });
  }
  return result;
}

Tensor fold_sum(const Tensor& x, std::size_t groups) {
  if (groups == 0) throw ShapeError("fold_sum: zero groups");
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.rank() == 1 ? 1 : x.cols();
  if (x.rank() > 2 || rows % groups != 0)
    throw ShapeError("fold_sum: cannot split " + shape_to_string(x.shape()) + " into " +
                     std::to_string(groups) + " groups");
  const std::size_t block = rows / groups;
  std::vector<double> out(block * cols, 0.0);
  for (std::size_t gi = 0; gi < groups; ++gi)
    for (std::size_t r = 0; r < block; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += x[(gi * block + r) * cols + c];
  Shape shape = x.rank() == 1 ? Shape{block} : Shape{block, cols};
  Tensor result(std::move(shape), std::move(out));
  if (Graph* g = tracking({&x})) {
    ImplPtr px = x.impl(), po = result.impl();
    g->record(OpKind::FoldSum, {px}, result, [px, po, groups, block, cols] {
      double* gx = grad_of(px);
      if (!gx) return;
      for (std::size_t gi = 0; gi < groups; ++gi)
        for (std::size_t r = 0; r < block * cols; ++r) gx[gi * block * cols + r] += po->grad[r];
    });
  }
  return result;
}

Tensor normalize_power_l2(const Tensor& z, double eps) {
  if (z.rank() > 2) throw ShapeError("normalize_power_l2: unsupported rank " + shape_to_string(z.shape()));
  const std::size_t rows = z.shape()[0];
  const std::size_t cols = z.rank() == 1 ? 1 : z.cols();
  std::vector<double> out(z.numel());
  std::vector<double> norms(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double v = z[r * cols + c];
      const double p = v > 0 ? std::sqrt(v) : (v < 0 ? -std::sqrt(-v) : 0.0);
      out[r * cols + c] = p;
      sq += p * p;
    }
    const double n = std::max(std::sqrt(sq), eps);
    norms[c] = n;
    for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] /= n;
  }
  Tensor result(z.shape(), std::move(out));
  if (Graph* g = tracking({&z})) {
    ImplPtr pz = z.impl(), po = result.impl();
    g->record(OpKind::PowerL2Norm, {pz}, result, [pz, po, norms, rows, cols, eps] {
      double* gz = grad_of(pz);
      if (!gz) return;
      for (std::size_t c = 0; c < cols; ++c) {
        const double n = norms[c];
        // When the norm is clamped to eps the division is by a constant.
        double yg = 0.0;
        if (n > eps)
          for (std::size_t r = 0; r < rows; ++r) yg += po->data[r * cols + c] * po->grad[r * cols + c];
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t k = r * cols + c;
          const double gp = (po->grad[k] - po->data[k] * yg) / n;
          const double v = pz->data[k];
          // d/dz sign(z)|z|^0.5 = 0.5|z|^-0.5, taken as 0 at z = 0.
          const double dp = v == 0.0 ? 0.0 : 0.5 / std::sqrt(std::abs(v));
          gz[k] += gp * dp;
        }
      }
    });
  }
  return result;
}

}  // namespace synergy::ops

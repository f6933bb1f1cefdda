#include "ptl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ptl/error.hpp"

namespace ptl {

namespace {

// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×k] += G[m×n] · B[k×n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C[k×n] += A[m×k]^T · G[m×n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

// View of `shape` around `axis` as outer × extent × inner.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " +
                     shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

enum class BinaryKind { add, sub, mul };

const char* binary_name(BinaryKind k) {
  switch (k) {
    case BinaryKind::add: return "add";
    case BinaryKind::sub: return "sub";
    case BinaryKind::mul: return "mul";
  }
  return "?";
}

// True when b broadcasts along a's trailing axis; throws on any other mismatch.
bool check_binary_shapes(const Tensor& a, const Tensor& b, BinaryKind kind) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa == sb) return false;
  bool trailing_one = !sa.empty() && sa.size() == sb.size() && sb.back() == 1 &&
                      std::equal(sa.begin(), sa.end() - 1, sb.begin());
  if (!trailing_one) {
    throw ShapeError(std::string(binary_name(kind)) + ": incompatible shapes " + shape_str(sa) +
                     " and " + shape_str(sb) +
                     " (only equal shapes or a trailing extent of 1 on the right operand)");
  }
  return true;
}

Tensor binary(Tape& tape, const Tensor& a, const Tensor& b, BinaryKind kind) {
  const bool bcast = check_binary_shapes(a, b, kind);
  const std::size_t n = a.numel();
  const std::size_t last = a.shape().empty() ? 1 : a.shape().back();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = bcast ? bd[i / last] : bd[i];
    switch (kind) {
      case BinaryKind::add: out[i] = ad[i] + bv; break;
      case BinaryKind::sub: out[i] = ad[i] - bv; break;
      case BinaryKind::mul: out[i] = ad[i] * bv; break;
    }
  }
  const bool track = any_requires_grad({&a, &b});
  Tensor result(a.shape(), std::move(out), track);
  if (track) {
    tape.record(binary_name(kind), result, [a, b, kind, bcast, last](std::span<const double> g) {
      Tensor ta = a, tb = b;
      auto ad = ta.data();
      auto bd = tb.data();
      if (ta.requires_grad()) {
        auto ga = ta.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += kind == BinaryKind::mul ? g[i] * (bcast ? bd[i / last] : bd[i]) : g[i];
        }
      }
      if (tb.requires_grad()) {
        auto gb = tb.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          double contrib = g[i];
          if (kind == BinaryKind::sub) contrib = -contrib;
          if (kind == BinaryKind::mul) contrib *= ad[i];
          gb[bcast ? i / last : i] += contrib;
        }
      }
    });
  }
  return result;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  const bool track = any_requires_grad({&a, &b});
  Tensor result(Shape{m, n}, std::move(out), track);
  if (track) {
    tape.record("matmul", result, [a, b, m, k, n](std::span<const double> g) {
      Tensor ta = a, tb = b;
      if (ta.requires_grad()) gemm_nt(g.data(), tb.data().data(), ta.grad_buffer().data(), m, n, k);
      if (tb.requires_grad()) gemm_tn(ta.data().data(), g.data(), tb.grad_buffer().data(), m, k, n);
    });
  }
  return result;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2 || x.rank() == 0 || x.shape().back() != w.dim(0)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(w.shape()));
  }
  const std::size_t in = w.dim(0), out_dim = w.dim(1);
  if (bias.shape() != Shape{out_dim}) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  }
  const std::size_t rows = x.numel() / in;
  std::vector<double> out(rows * out_dim);
  auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bd.begin(), bd.end(), out.begin() + r * out_dim);
  gemm_nn(x.data().data(), w.data().data(), out.data(), rows, in, out_dim);

  Shape shape = x.shape();
  shape.back() = out_dim;
  const bool track = any_requires_grad({&x, &w, &bias});
  Tensor result(std::move(shape), std::move(out), track);
  if (track) {
    tape.record("linear", result, [x, w, bias, rows, in, out_dim](std::span<const double> g) {
      Tensor tx = x, tw = w, tb = bias;
      if (tx.requires_grad()) {
        gemm_nt(g.data(), tw.data().data(), tx.grad_buffer().data(), rows, out_dim, in);
      }
      if (tw.requires_grad()) {
        gemm_tn(tx.data().data(), g.data(), tw.grad_buffer().data(), rows, in, out_dim);
      }
      if (tb.requires_grad()) {
        auto gb = tb.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[r * out_dim + j];
        }
      }
    });
  }
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return binary(tape, a, b, BinaryKind::add); }
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) { return binary(tape, a, b, BinaryKind::sub); }
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) { return binary(tape, a, b, BinaryKind::mul); }

Tensor relu(Tape& tape, const Tensor& x) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  const bool track = x.requires_grad();
  Tensor result(x.shape(), std::move(out), track);
  if (track) {
    tape.record("relu", result, [x](std::span<const double> g) {
      Tensor tx = x;
      auto xd = tx.data();
      auto gx = tx.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xd[i] > 0.0) gx[i] += g[i];
      }
    });
  }
  return result;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] * factor;
  const bool track = x.requires_grad();
  Tensor result(x.shape(), std::move(out), track);
  if (track) {
    tape.record("scale", result, [x, factor](std::span<const double> g) {
      Tensor tx = x;
      auto gx = tx.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
  }
  return result;
}

Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = xd[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, xd[base + e * s.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(xd[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
    }
  }
  const bool track = x.requires_grad();
  Tensor result(x.shape(), std::move(out), track);
  if (track) {
    // Holding the output inside its own closure would form a cycle, so keep a value copy.
    std::vector<double> y(result.data().begin(), result.data().end());
    tape.record("softmax", result, [x, s, y = std::move(y)](std::span<const double> g) {
      Tensor tx = x;
      auto gx = tx.grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          double dot = 0.0;
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t i = base + e * s.inner;
            dot += g[i] * y[i];
          }
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t i = base + e * s.inner;
            gx[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return result;
}

Tensor softmax_lastdim(Tape& tape, const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax_lastdim: scalar input");
  return softmax(tape, x, x.rank() - 1);
}

Tensor reduce(Tape& tape, const Tensor& x, std::size_t axis, ReduceKind kind) {
  const AxisSplit s = split_axis(x.shape(), axis, "reduce");
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto xd = x.data();
  std::vector<double> out(s.outer * s.inner);
  std::vector<std::size_t> argmax;
  if (kind == ReduceKind::max) argmax.resize(out.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      const std::size_t oi = o * s.inner + in;
      if (kind == ReduceKind::max) {
        std::size_t best = 0;
        double bv = xd[base];
        for (std::size_t e = 1; e < s.extent; ++e) {
          const double v = xd[base + e * s.inner];
          if (v > bv) {  // strict: ties keep the lowest index
            bv = v;
            best = e;
          }
        }
        out[oi] = bv;
        argmax[oi] = best;
      } else {
        double acc = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) acc += xd[base + e * s.inner];
        out[oi] = kind == ReduceKind::mean ? acc / static_cast<double>(s.extent) : acc;
      }
    }
  }
  const bool track = x.requires_grad();
  Tensor result(std::move(shape), std::move(out), track);
  if (track) {
    const char* name = kind == ReduceKind::sum ? "reduce_sum"
                       : kind == ReduceKind::mean ? "reduce_mean"
                                                  : "reduce_max";
    tape.record(name, result, [x, s, kind, argmax = std::move(argmax)](std::span<const double> g) {
      Tensor tx = x;
      auto gx = tx.grad_buffer();
      const double w = kind == ReduceKind::mean ? 1.0 / static_cast<double>(s.extent) : 1.0;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.extent * s.inner + in;
          const std::size_t oi = o * s.inner + in;
          if (kind == ReduceKind::max) {
            gx[base + argmax[oi] * s.inner] += g[oi];
          } else {
            for (std::size_t e = 0; e < s.extent; ++e) gx[base + e * s.inner] += g[oi] * w;
          }
        }
      }
    });
  }
  return result;
}

Tensor sum_all(Tape& tape, const Tensor& x) {
  if (x.rank() == 0) return reshape(tape, x, Shape{});
  return reduce(tape, reshape(tape, x, Shape{x.numel()}), 0, ReduceKind::sum);
}

Tensor gather_rows(Tape& tape, const Tensor& features, const NeighborIndex& idx) {
  if (features.rank() != 2) {
    throw ShapeError("gather_rows: features must be N×C, got " + shape_str(features.shape()));
  }
  const std::size_t n = features.dim(0), c = features.dim(1);
  if (idx.indices.size() != idx.rows * idx.k || idx.rows == 0 || idx.k == 0) {
    throw ShapeError("gather_rows: malformed neighbor table");
  }
  for (std::size_t i = 0; i < idx.indices.size(); ++i) {
    if (idx.indices[i] >= n) {
      throw IndexError("gather_rows: index " + std::to_string(idx.indices[i]) + " at row " +
                       std::to_string(i / idx.k) + " out of range for " + std::to_string(n) +
                       " rows");
    }
  }
  auto fd = features.data();
  std::vector<double> out(idx.indices.size() * c);
  for (std::size_t r = 0; r < idx.indices.size(); ++r) {
    std::copy_n(fd.begin() + idx.indices[r] * c, c, out.begin() + r * c);
  }
  const bool track = features.requires_grad();
  Tensor result(Shape{idx.rows, idx.k, c}, std::move(out), track);
  if (track) {
    tape.record("gather_rows", result, [features, idx, c](std::span<const double> g) {
      Tensor tf = features;
      auto gf = tf.grad_buffer();
      for (std::size_t r = 0; r < idx.indices.size(); ++r) {
        double* dst = gf.data() + idx.indices[r] * c;
        const double* src = g.data() + r * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
      }
    });
  }
  return result;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  const bool track = x.requires_grad();
  Tensor result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), track);
  if (track) {
    tape.record("reshape", result, [x](std::span<const double> g) {
      Tensor tx = x;
      auto gx = tx.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return result;
}

Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw ShapeError("concat_rows: scalar inputs");
  std::size_t rows = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat_rows: " + shape_str(p.shape()) + " does not match " + shape_str(shape));
    }
    rows += p.dim(0);
    track = track || p.requires_grad();
  }
  shape[0] = rows;
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor result(std::move(shape), std::move(out), track);
  if (track) {
    tape.record("concat_rows", result, [parts](std::span<const double> g) {
      std::size_t offset = 0;
      for (auto p : parts) {
        const std::size_t n = p.numel();
        if (p.requires_grad()) {
          auto gp = p.grad_buffer();
          for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
        }
        offset += n;
      }
    });
  }
  return result;
}

}  // namespace ptl

#include "samctr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "samctr/errors.hpp"

namespace samctr {

namespace {

std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* op,
                          const DenseMatrix& x, const DenseMatrix& y) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(x) + " with " +
                   shape_str(y));
}

// Index of element (r, c) of `m` under broadcasting.
inline std::size_t bidx(const DenseMatrix& m, std::size_t r, std::size_t c) {
  const std::size_t rr = m.rows() == 1 ? 0 : r;
  const std::size_t cc = m.cols() == 1 ? 0 : c;
  return rr * m.cols() + cc;
}

}  // namespace

Var Tape::push(DenseMatrix value, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), DenseMatrix(), std::move(fn)});
  return Var{nodes_.size() - 1};
}

double Tape::scalar(Var x) const {
  const auto& m = value(x);
  if (m.rows() != 1 || m.cols() != 1) {
    throw ContractError("Tape::scalar: node is " + shape_str(m) + ", not 1x1");
  }
  return m[0];
}

Var Tape::constant(DenseMatrix value) { return push(std::move(value), nullptr); }

Var Tape::parameter(ParameterStore& store, SlotId slot) {
  ParameterStore* s = &store;
  return push(store.slot(slot).value, [s, slot](Tape& t, std::size_t self) {
    auto& dst = s->slot(slot);
    if (!dst.trainable) return;
    auto src = t.g(self).span();
    auto out = dst.grad.span();
    for (std::size_t k = 0; k < src.size(); ++k) out[k] += src[k];
  });
}

Var Tape::gather_rows(ParameterStore& store, SlotId slot, std::span<const std::uint32_t> rows) {
  const DenseMatrix& table = store.slot(slot).value;
  const std::size_t d = table.cols();
  DenseMatrix out(rows.size(), d);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b] >= table.rows()) {
      throw ContractError("gather_rows: index " + std::to_string(rows[b]) + " out of range for '" +
                          store.slot(slot).name + "' with " + std::to_string(table.rows()) +
                          " rows");
    }
    auto src = table.row_span(rows[b]);
    std::copy(src.begin(), src.end(), out.row_span(b).begin());
  }
  ParameterStore* s = &store;
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return push(std::move(out), [s, slot, idx = std::move(idx)](Tape& t, std::size_t self) {
    auto& dst = s->slot(slot);
    if (!dst.trainable) return;
    const DenseMatrix& gr = t.g(self);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      auto src = gr.row_span(b);
      auto out = dst.grad.row_span(idx[b]);
      for (std::size_t k = 0; k < src.size(); ++k) out[k] += src[k];
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const DenseMatrix& x = v(a.id);
  const DenseMatrix& y = v(b.id);
  if (x.cols() != y.rows()) {
    throw ShapeError("matmul: " + shape_str(x) + " times " + shape_str(y));
  }
  DenseMatrix out(x.rows(), y.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xv = x(r, k);
      if (xv == 0.0) continue;
      for (std::size_t c = 0; c < y.cols(); ++c) out(r, c) += xv * y(k, c);
    }
  }
  const std::size_t ia = a.id, ib = b.id;
  return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const DenseMatrix& gr = t.g(self);
    const DenseMatrix& x = t.v(ia);
    const DenseMatrix& y = t.v(ib);
    DenseMatrix& gx = t.g(ia);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t k = 0; k < x.cols(); ++k) {
        double acc = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) acc += gr(r, c) * y(k, c);
        gx(r, k) += acc;
      }
    }
    DenseMatrix& gy = t.g(ib);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t k = 0; k < x.cols(); ++k) {
        const double xv = x(r, k);
        for (std::size_t c = 0; c < y.cols(); ++c) gy(k, c) += xv * gr(r, c);
      }
    }
  });
}

Var Tape::add(Var a, Var b) {
  const DenseMatrix& x = v(a.id);
  const DenseMatrix& y = v(b.id);
  const std::size_t rows = broadcast_dim(x.rows(), y.rows(), "add", x, y);
  const std::size_t cols = broadcast_dim(x.cols(), y.cols(), "add", x, y);
  DenseMatrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = x[bidx(x, r, c)] + y[bidx(y, r, c)];
  }
  const std::size_t ia = a.id, ib = b.id;
  return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const DenseMatrix& gr = t.g(self);
    DenseMatrix& gx = t.g(ia);
    DenseMatrix& gy = t.g(ib);
    for (std::size_t r = 0; r < gr.rows(); ++r) {
      for (std::size_t c = 0; c < gr.cols(); ++c) {
        gx[bidx(gx, r, c)] += gr(r, c);
        gy[bidx(gy, r, c)] += gr(r, c);
      }
    }
  });
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::mul(Var a, Var b) {
  const DenseMatrix& x = v(a.id);
  const DenseMatrix& y = v(b.id);
  const std::size_t rows = broadcast_dim(x.rows(), y.rows(), "mul", x, y);
  const std::size_t cols = broadcast_dim(x.cols(), y.cols(), "mul", x, y);
  DenseMatrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = x[bidx(x, r, c)] * y[bidx(y, r, c)];
  }
  const std::size_t ia = a.id, ib = b.id;
  return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const DenseMatrix& gr = t.g(self);
    const DenseMatrix& x = t.v(ia);
    const DenseMatrix& y = t.v(ib);
    DenseMatrix& gx = t.g(ia);
    DenseMatrix& gy = t.g(ib);
    for (std::size_t r = 0; r < gr.rows(); ++r) {
      for (std::size_t c = 0; c < gr.cols(); ++c) {
        const std::size_t xi = bidx(x, r, c);
        const std::size_t yi = bidx(y, r, c);
        gx[xi] += gr(r, c) * y[yi];
        gy[yi] += gr(r, c) * x[xi];
      }
    }
  });
}

Var Tape::scale(Var a, double c) {
  DenseMatrix out = v(a.id);
  for (double& x : out.span()) x *= c;
  const std::size_t ia = a.id;
  return push(std::move(out), [ia, c](Tape& t, std::size_t self) {
    auto src = t.g(self).span();
    auto dst = t.g(ia).span();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] += c * src[k];
  });
}

Var Tape::add_n(std::span<const Var> terms) {
  if (terms.empty()) throw DomainError("add_n: no terms");
  DenseMatrix out = v(terms[0].id);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    const DenseMatrix& x = v(terms[i].id);
    if (!x.same_shape(out)) {
      throw ShapeError("add_n: " + shape_str(x) + " vs " + shape_str(out));
    }
    auto dst = out.span();
    auto src = x.span();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  std::vector<std::size_t> ids;
  ids.reserve(terms.size());
  for (Var x : terms) ids.push_back(x.id);
  return push(std::move(out), [ids = std::move(ids)](Tape& t, std::size_t self) {
    for (std::size_t id : ids) {
      auto src = t.g(self).span();
      auto dst = t.g(id).span();
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
  });
}

Var Tape::row_dot(Var a, Var b) {
  const DenseMatrix& x = v(a.id);
  const DenseMatrix& y = v(b.id);
  if (!x.same_shape(y)) throw ShapeError("row_dot: " + shape_str(x) + " vs " + shape_str(y));
  DenseMatrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) acc += x(r, c) * y(r, c);
    out(r, 0) = acc;
  }
  const std::size_t ia = a.id, ib = b.id;
  return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
    const DenseMatrix& gr = t.g(self);
    const DenseMatrix& x = t.v(ia);
    const DenseMatrix& y = t.v(ib);
    DenseMatrix& gx = t.g(ia);
    DenseMatrix& gy = t.g(ib);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double gv = gr(r, 0);
      for (std::size_t c = 0; c < x.cols(); ++c) {
        gx(r, c) += gv * y(r, c);
        gy(r, c) += gv * x(r, c);
      }
    }
  });
}

Var Tape::row_sum(Var a) {
  const DenseMatrix& x = v(a.id);
  DenseMatrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double acc = 0.0;
    for (double e : x.row_span(r)) acc += e;
    out(r, 0) = acc;
  }
  const std::size_t ia = a.id;
  return push(std::move(out), [ia](Tape& t, std::size_t self) {
    const DenseMatrix& gr = t.g(self);
    DenseMatrix& gx = t.g(ia);
    for (std::size_t r = 0; r < gx.rows(); ++r) {
      for (double& e : gx.row_span(r)) e += gr(r, 0);
    }
  });
}

Var Tape::relu(Var a) {
  DenseMatrix out = v(a.id);
  for (double& x : out.span()) x = x > 0.0 ? x : 0.0;
  const std::size_t ia = a.id;
  return push(std::move(out), [ia](Tape& t, std::size_t self) {
    auto src = t.g(self).span();
    auto in = t.v(ia).span();
    auto dst = t.g(ia).span();
    for (std::size_t k = 0; k < src.size(); ++k) {
      if (in[k] > 0.0) dst[k] += src[k];
    }
  });
}

Var Tape::sigmoid(Var a) {
  DenseMatrix out = v(a.id);
  for (double& x : out.span()) x = samctr::sigmoid(x);
  const std::size_t ia = a.id;
  return push(std::move(out), [ia](Tape& t, std::size_t self) {
    auto src = t.g(self).span();
    auto y = t.v(self).span();
    auto dst = t.g(ia).span();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k] * y[k] * (1.0 - y[k]);
  });
}

Var Tape::softmax_rows(Var a) {
  const DenseMatrix& x = v(a.id);
  if (x.cols() == 0) throw DomainError("softmax_rows: empty rows");
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto w = softmax_weights(x.row_span(r));
    std::copy(w.begin(), w.end(), out.row_span(r).begin());
  }
  const std::size_t ia = a.id;
  return push(std::move(out), [ia](Tape& t, std::size_t self) {
    const DenseMatrix& gr = t.g(self);
    const DenseMatrix& y = t.v(self);
    DenseMatrix& gx = t.g(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += gr(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += y(r, c) * (gr(r, c) - dot);
    }
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DomainError("concat_cols: no parts");
  const std::size_t rows = v(parts[0].id).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (v(p.id).rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(v(p.id)) + " vs " +
                       std::to_string(rows));
    }
    cols += v(p.id).cols();
  }
  DenseMatrix out(rows, cols);
  std::size_t offset = 0;
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  for (Var p : parts) {
    const DenseMatrix& x = v(p.id);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, offset + c) = x(r, c);
    }
    offset += x.cols();
    ids.push_back(p.id);
  }
  return push(std::move(out), [ids = std::move(ids)](Tape& t, std::size_t self) {
    const DenseMatrix& gr = t.g(self);
    std::size_t offset = 0;
    for (std::size_t id : ids) {
      DenseMatrix& gx = t.g(id);
      for (std::size_t r = 0; r < gx.rows(); ++r) {
        for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += gr(r, offset + c);
      }
      offset += gx.cols();
    }
  });
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const DenseMatrix& x = v(a.id);
  if (begin + count > x.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_str(x));
  }
  DenseMatrix out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = x(r, begin + c);
  }
  const std::size_t ia = a.id;
  return push(std::move(out), [ia, begin](Tape& t, std::size_t self) {
    const DenseMatrix& gr = t.g(self);
    DenseMatrix& gx = t.g(ia);
    for (std::size_t r = 0; r < gr.rows(); ++r) {
      for (std::size_t c = 0; c < gr.cols(); ++c) gx(r, begin + c) += gr(r, c);
    }
  });
}

Var Tape::slice_rows(Var a, std::size_t begin, std::size_t count) {
  const DenseMatrix& x = v(a.id);
  if (begin + count > x.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_str(x));
  }
  const std::size_t cols = x.cols();
  DenseMatrix out(count, cols, std::vector<double>(x.values().begin() + begin * cols,
                                                   x.values().begin() + (begin + count) * cols));
  const std::size_t ia = a.id;
  return push(std::move(out), [ia, begin](Tape& t, std::size_t self) {
    auto src = t.g(self).span();
    DenseMatrix& gx = t.g(ia);
    const std::size_t offset = begin * gx.cols();
    for (std::size_t k = 0; k < src.size(); ++k) gx[offset + k] += src[k];
  });
}

Var Tape::sum_all(Var a) {
  double acc = 0.0;
  for (double x : v(a.id).span()) acc += x;
  const std::size_t ia = a.id;
  return push(DenseMatrix(1, 1, acc), [ia](Tape& t, std::size_t self) {
    const double gv = t.g(self)[0];
    for (double& e : t.g(ia).span()) e += gv;
  });
}

Var Tape::sum_squares(Var a) {
  double acc = 0.0;
  for (double x : v(a.id).span()) acc += x * x;
  const std::size_t ia = a.id;
  return push(DenseMatrix(1, 1, acc), [ia](Tape& t, std::size_t self) {
    const double gv = t.g(self)[0];
    auto in = t.v(ia).span();
    auto dst = t.g(ia).span();
    for (std::size_t k = 0; k < in.size(); ++k) dst[k] += 2.0 * gv * in[k];
  });
}

Var Tape::dropout(Var a, double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout: rate must be in [0, 1)");
  const DenseMatrix& x = v(a.id);
  DenseMatrix mask(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& m : mask.span()) m = u(rng) < rate ? 0.0 : keep_scale;
  DenseMatrix out = x;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= mask[k];
  const std::size_t ia = a.id;
  return push(std::move(out), [ia, mask = std::move(mask)](Tape& t, std::size_t self) {
    auto src = t.g(self).span();
    auto dst = t.g(ia).span();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k] * mask[k];
  });
}

Var Tape::logloss(Var logits, std::span<const double> labels) {
  const DenseMatrix& z = v(logits.id);
  if (z.cols() != 1 || z.rows() != labels.size()) {
    throw ShapeError("logloss: logits " + shape_str(z) + " vs " + std::to_string(labels.size()) +
                     " labels");
  }
  if (labels.empty()) throw DomainError("logloss: empty batch");
  const double n = static_cast<double>(labels.size());
  double total = 0.0;
  std::vector<double> dz(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const double p = samctr::sigmoid(z(r, 0));
    const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double y = labels[r];
    total -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    // d/dz of the clamped loss: zero where the clamp is active.
    dz[r] = (pc == p) ? (p - y) / n : 0.0;
  }
  const std::size_t iz = logits.id;
  return push(DenseMatrix(1, 1, total / n), [iz, dz = std::move(dz)](Tape& t, std::size_t self) {
    const double gv = t.g(self)[0];
    DenseMatrix& gx = t.g(iz);
    for (std::size_t r = 0; r < dz.size(); ++r) gx(r, 0) += gv * dz[r];
  });
}

void Tape::backward(Var root) {
  const DenseMatrix& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ContractError("backward: root must be a scalar node, got " + shape_str(rv));
  }
  for (std::size_t i = 0; i <= root.id; ++i) {
    nodes_[i].grad = DenseMatrix(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  nodes_[root.id].grad[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }
}

}  // namespace samctr

#include "kiln/ad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kiln/error.hpp"

namespace kiln::ad {

Param::Param(std::string name_, std::size_t rows_, std::size_t cols_, double fill)
    : name(std::move(name_)), rows(rows_), cols(cols_), value(rows_ * cols_, fill),
      grad(rows_ * cols_, 0.0) {}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

std::size_t Tensor::rows() const { return tape_->rows(id_); }
std::size_t Tensor::cols() const { return tape_->cols(id_); }
std::span<const double> Tensor::values() const { return tape_->values(id_); }
double Tensor::value(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }
std::span<const double> Tensor::grad() const { return tape_->grad(id_); }
bool Tensor::requires_grad() const { return tape_->requires_grad(id_); }

namespace {

void require_finite(const std::vector<double> &values, const char *what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NumericalError, std::string("non-finite value in ") + what);
  }
}

} // namespace

Tensor Tape::leaf(std::size_t rows, std::size_t cols, std::vector<double> values,
                  bool requires_grad) {
  if (values.size() != rows * cols) throw Error(ErrorCode::ShapeMismatch, "leaf size mismatch");
  require_finite(values, "leaf");
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.values = std::move(values);
  n.requires_grad = requires_grad;
  if (requires_grad) n.own_grad.assign(n.values.size(), 0.0);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return leaf(rows, cols, std::move(values), false);
}

Tensor Tape::param(Param &p) {
  if (p.value.size() != p.rows * p.cols) {
    throw Error(ErrorCode::ShapeMismatch, "param " + p.name + " has the wrong size");
  }
  require_finite(p.value, p.name.c_str());
  p.grad.resize(p.value.size(), 0.0);
  Node n;
  n.rows = p.rows;
  n.cols = p.cols;
  n.values = p.value;
  n.requires_grad = true;
  n.grad_sink = &p.grad;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor Tape::record(std::size_t rows, std::size_t cols, std::vector<double> values,
                    std::vector<std::size_t> inputs, BackwardFn backward, const char *op) {
  require_finite(values, op);
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.values = std::move(values);
  for (auto id : inputs) n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

std::span<const double> Tape::grad(std::size_t id) const {
  const auto &n = nodes_[id];
  if (n.grad_sink) return *n.grad_sink;
  return n.own_grad;
}

double *Tape::adjoint(std::size_t id) {
  if (!nodes_[id].requires_grad) return nullptr;
  auto &adj = adjoints_[id];
  if (adj.empty()) adj.assign(nodes_[id].values.size(), 0.0);
  return adj.data();
}

void Tape::backward(const Tensor &loss) {
  if (loss.tape() != this || loss.id() >= nodes_.size()) {
    throw Error(ErrorCode::InvalidArgument, "loss is not on this tape");
  }
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward needs a scalar loss");
  }
  adjoints_.assign(nodes_.size(), {});
  if (!nodes_[loss.id()].requires_grad) return;
  adjoints_[loss.id()] = {1.0};
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    auto &adj = adjoints_[id];
    if (adj.empty()) continue;
    auto &n = nodes_[id];
    for (double v : adj) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NumericalError, "non-finite gradient");
    }
    if (n.grad_sink) {
      for (std::size_t i = 0; i < adj.size(); ++i) (*n.grad_sink)[i] += adj[i];
    } else if (!n.own_grad.empty()) {
      for (std::size_t i = 0; i < adj.size(); ++i) n.own_grad[i] += adj[i];
    }
    if (n.backward) n.backward(adj, *this);
    std::vector<double>().swap(adj);
  }
  adjoints_.clear();
}

void Tape::zero_grads() {
  for (auto &n : nodes_) {
    if (n.grad_sink) std::fill(n.grad_sink->begin(), n.grad_sink->end(), 0.0);
    std::fill(n.own_grad.begin(), n.own_grad.end(), 0.0);
  }
}

void Tape::clear() {
  nodes_.clear();
  adjoints_.clear();
}

namespace {

Tape &same_tape(const Tensor &a, const Tensor &b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw Error(ErrorCode::InvalidArgument, "tensors belong to different tapes");
  }
  return *a.tape();
}

[[noreturn]] void shape_error(const char *op, const Tensor &a, const Tensor &b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                            std::to_string(a.cols()) + " vs " +
                                            std::to_string(b.rows()) + "x" +
                                            std::to_string(b.cols()));
}

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcast_of(const char *op, const Tensor &a, const Tensor &b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
  shape_error(op, a, b);
}

std::size_t b_index(Broadcast mode, std::size_t i, std::size_t cols) {
  switch (mode) {
  case Broadcast::Same:
    return i;
  case Broadcast::Row:
    return i % cols;
  case Broadcast::Scalar:
    return 0;
  }
  return 0;
}

void check_index(std::span<const std::size_t> index, std::size_t bound, const char *op) {
  for (auto i : index) {
    if (i >= bound) throw Error(ErrorCode::InvalidArgument, std::string(op) + ": index out of range");
  }
}

} // namespace

Tensor matmul(const Tensor &a, const Tensor &b) {
  Tape &t = same_tape(a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_error("matmul", a, b);
  std::vector<double> out(m * n, 0.0);
  const auto A = a.values(), B = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  }
  const auto ia = a.id(), ib = b.id();
  return t.record(m, n, std::move(out), {ia, ib},
                  [=](std::span<const double> g, Tape &tp) {
                    const auto A = tp.values(ia), B = tp.values(ib);
                    if (double *dA = tp.adjoint(ia)) {
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          double s = 0.0;
                          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * B[p * n + j];
                          dA[i * k + p] += s;
                        }
                    }
                    if (double *dB = tp.adjoint(ib)) {
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t p = 0; p < k; ++p) {
                          const double av = A[i * k + p];
                          for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += av * g[i * n + j];
                        }
                    }
                  },
                  "matmul");
}

Tensor matmul_nt(const Tensor &a, const Tensor &b) {
  Tape &t = same_tape(a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) shape_error("matmul_nt", a, b);
  std::vector<double> out(m * n, 0.0);
  const auto A = a.values(), B = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += A[i * k + p] * B[j * k + p];
      out[i * n + j] = s;
    }
  }
  const auto ia = a.id(), ib = b.id();
  return t.record(m, n, std::move(out), {ia, ib},
                  [=](std::span<const double> g, Tape &tp) {
                    const auto A = tp.values(ia), B = tp.values(ib);
                    double *dA = tp.adjoint(ia);
                    double *dB = tp.adjoint(ib);
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t j = 0; j < n; ++j) {
                        const double gv = g[i * n + j];
                        if (gv == 0.0) continue;
                        if (dA)
                          for (std::size_t p = 0; p < k; ++p) dA[i * k + p] += gv * B[j * k + p];
                        if (dB)
                          for (std::size_t p = 0; p < k; ++p) dB[j * k + p] += gv * A[i * k + p];
                      }
                    }
                  },
                  "matmul_nt");
}

Tensor add(const Tensor &a, const Tensor &b) {
  Tape &t = same_tape(a, b);
  const auto mode = broadcast_of("add", a, b);
  const std::size_t cols = a.cols();
  const auto A = a.values(), B = b.values();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[b_index(mode, i, cols)];
  const auto ia = a.id(), ib = b.id();
  return t.record(a.rows(), cols, std::move(out), {ia, ib},
                  [=](std::span<const double> g, Tape &tp) {
                    if (double *dA = tp.adjoint(ia))
                      for (std::size_t i = 0; i < g.size(); ++i) dA[i] += g[i];
                    if (double *dB = tp.adjoint(ib))
                      for (std::size_t i = 0; i < g.size(); ++i) dB[b_index(mode, i, cols)] += g[i];
                  },
                  "add");
}

Tensor mul(const Tensor &a, const Tensor &b) {
  Tape &t = same_tape(a, b);
  const auto mode = broadcast_of("mul", a, b);
  const std::size_t cols = a.cols();
  const auto A = a.values(), B = b.values();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[b_index(mode, i, cols)];
  const auto ia = a.id(), ib = b.id();
  return t.record(a.rows(), cols, std::move(out), {ia, ib},
                  [=](std::span<const double> g, Tape &tp) {
                    const auto A = tp.values(ia), B = tp.values(ib);
                    if (double *dA = tp.adjoint(ia))
                      for (std::size_t i = 0; i < g.size(); ++i)
                        dA[i] += g[i] * B[b_index(mode, i, cols)];
                    if (double *dB = tp.adjoint(ib))
                      for (std::size_t i = 0; i < g.size(); ++i)
                        dB[b_index(mode, i, cols)] += g[i] * A[i];
                  },
                  "mul");
}

Tensor scale(const Tensor &a, double c) {
  const auto A = a.values();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = c * A[i];
  const auto ia = a.id();
  return a.tape()->record(a.rows(), a.cols(), std::move(out), {ia},
                          [=](std::span<const double> g, Tape &tp) {
                            double *dA = tp.adjoint(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) dA[i] += c * g[i];
                          },
                          "scale");
}

Tensor scale_rows(const Tensor &a, const Tensor &v) {
  Tape &t = same_tape(a, v);
  const std::size_t m = a.rows(), n = a.cols();
  if (v.rows() != m || v.cols() != 1) shape_error("scale_rows", a, v);
  const auto A = a.values(), V = v.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] * V[i];
  const auto ia = a.id(), iv = v.id();
  return t.record(m, n, std::move(out), {ia, iv},
                  [=](std::span<const double> g, Tape &tp) {
                    const auto A = tp.values(ia), V = tp.values(iv);
                    double *dA = tp.adjoint(ia);
                    double *dV = tp.adjoint(iv);
                    for (std::size_t i = 0; i < m; ++i) {
                      double s = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        if (dA) dA[i * n + j] += g[i * n + j] * V[i];
                        s += g[i * n + j] * A[i * n + j];
                      }
                      if (dV) dV[i] += s;
                    }
                  },
                  "scale_rows");
}

Tensor leaky_relu(const Tensor &x, double slope) {
  const auto X = x.values();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] > 0.0 ? X[i] : slope * X[i];
  const auto ix = x.id();
  return x.tape()->record(x.rows(), x.cols(), std::move(out), {ix},
                          [=](std::span<const double> g, Tape &tp) {
                            const auto X = tp.values(ix);
                            double *dX = tp.adjoint(ix);
                            for (std::size_t i = 0; i < g.size(); ++i)
                              dX[i] += X[i] > 0.0 ? g[i] : slope * g[i];
                          },
                          "leaky_relu");
}

Tensor cos_shifted(const Tensor &theta, int l, const Tensor &mu) {
  Tape &t = same_tape(theta, mu);
  if (mu.rows() != 1 || mu.cols() != 1) shape_error("cos_shifted", theta, mu);
  const auto TH = theta.values();
  const double m = mu.value();
  const double ld = static_cast<double>(l);
  std::vector<double> out(TH.size());
  for (std::size_t i = 0; i < TH.size(); ++i) out[i] = std::cos(ld * TH[i] - m);
  const auto it = theta.id(), im = mu.id();
  return t.record(theta.rows(), theta.cols(), std::move(out), {it, im},
                  [=](std::span<const double> g, Tape &tp) {
                    const auto TH = tp.values(it);
                    const double m = tp.values(im)[0];
                    double *dT = tp.adjoint(it);
                    double *dM = tp.adjoint(im);
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      const double sn = std::sin(ld * TH[i] - m);
                      if (dT) dT[i] -= g[i] * ld * sn;
                      s += g[i] * sn;
                    }
                    if (dM) dM[0] += s;
                  },
                  "cos_shifted");
}

Tensor element(const Tensor &a, std::size_t r, std::size_t c) {
  if (r >= a.rows() || c >= a.cols()) throw Error(ErrorCode::ShapeMismatch, "element out of range");
  const std::size_t idx = r * a.cols() + c;
  const auto ia = a.id();
  return a.tape()->record(1, 1, {a.values()[idx]}, {ia},
                          [=](std::span<const double> g, Tape &tp) { tp.adjoint(ia)[idx] += g[0]; },
                          "element");
}

Tensor slice_cols(const Tensor &a, std::size_t start, std::size_t count) {
  const std::size_t m = a.rows(), n = a.cols();
  if (start + count > n) throw Error(ErrorCode::ShapeMismatch, "slice_cols out of range");
  const auto A = a.values();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = A[i * n + start + j];
  const auto ia = a.id();
  return a.tape()->record(m, count, std::move(out), {ia},
                          [=](std::span<const double> g, Tape &tp) {
                            double *dA = tp.adjoint(ia);
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < count; ++j)
                                dA[i * n + start + j] += g[i * count + j];
                          },
                          "slice_cols");
}

Tensor gather_rows(const Tensor &a, std::span<const std::size_t> index) {
  const std::size_t n = a.cols();
  check_index(index, a.rows(), "gather_rows");
  const auto A = a.values();
  std::vector<double> out(index.size() * n);
  for (std::size_t e = 0; e < index.size(); ++e)
    std::copy_n(A.begin() + static_cast<std::ptrdiff_t>(index[e] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(e * n));
  std::vector<std::size_t> idx(index.begin(), index.end());
  const auto ia = a.id();
  return a.tape()->record(index.size(), n, std::move(out), {ia},
                          [=, idx = std::move(idx)](std::span<const double> g, Tape &tp) {
                            double *dA = tp.adjoint(ia);
                            for (std::size_t e = 0; e < idx.size(); ++e)
                              for (std::size_t j = 0; j < n; ++j) dA[idx[e] * n + j] += g[e * n + j];
                          },
                          "gather_rows");
}

Tensor scatter_add_rows(const Tensor &a, std::span<const std::size_t> index, std::size_t out_rows) {
  const std::size_t n = a.cols();
  if (index.size() != a.rows()) throw Error(ErrorCode::ShapeMismatch, "scatter_add_rows index length");
  check_index(index, out_rows, "scatter_add_rows");
  const auto A = a.values();
  std::vector<double> out(out_rows * n, 0.0);
  for (std::size_t e = 0; e < index.size(); ++e)
    for (std::size_t j = 0; j < n; ++j) out[index[e] * n + j] += A[e * n + j];
  std::vector<std::size_t> idx(index.begin(), index.end());
  const auto ia = a.id();
  return a.tape()->record(out_rows, n, std::move(out), {ia},
                          [=, idx = std::move(idx)](std::span<const double> g, Tape &tp) {
                            double *dA = tp.adjoint(ia);
                            for (std::size_t e = 0; e < idx.size(); ++e)
                              for (std::size_t j = 0; j < n; ++j) dA[e * n + j] += g[idx[e] * n + j];
                          },
                          "scatter_add_rows");
}

Tensor segment_softmax(const Tensor &scores, std::span<const std::size_t> segment,
                       std::size_t num_segments, bool allow_empty) {
  if (scores.cols() != 1 || segment.size() != scores.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "segment_softmax needs E x 1 scores and E segment ids");
  }
  check_index(segment, num_segments, "segment_softmax");
  const auto S = scores.values();
  const std::size_t E = S.size();
  std::vector<double> seg_max(num_segments, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> seg_count(num_segments, 0);
  for (std::size_t e = 0; e < E; ++e) {
    seg_max[segment[e]] = std::max(seg_max[segment[e]], S[e]);
    ++seg_count[segment[e]];
  }
  if (!allow_empty) {
    for (std::size_t s = 0; s < num_segments; ++s) {
      if (seg_count[s] == 0) {
        throw Error(ErrorCode::EmptySegment, "segment " + std::to_string(s) + " has no entries");
      }
    }
  }
  std::vector<double> out(E), seg_sum(num_segments, 0.0);
  for (std::size_t e = 0; e < E; ++e) {
    out[e] = std::exp(S[e] - seg_max[segment[e]]);
    seg_sum[segment[e]] += out[e];
  }
  for (std::size_t e = 0; e < E; ++e) out[e] /= seg_sum[segment[e]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  const auto is = scores.id();
  Tape *tape = scores.tape();
  const std::size_t self = tape->node_count();
  return tape->record(E, 1, std::move(out), {is},
                      [=, seg = std::move(seg)](std::span<const double> g, Tape &tp) {
                        const auto Y = tp.values(self);
                        double *dS = tp.adjoint(is);
                        std::vector<double> dot(num_segments, 0.0);
                        for (std::size_t e = 0; e < E; ++e) dot[seg[e]] += Y[e] * g[e];
                        for (std::size_t e = 0; e < E; ++e) dS[e] += Y[e] * (g[e] - dot[seg[e]]);
                      },
                      "segment_softmax");
}

Tensor weighted_cross_entropy(const Tensor &logits, std::span<const int> labels,
                              std::span<const double> class_weights,
                              std::span<const std::size_t> mask) {
  const std::size_t N = logits.rows(), C = logits.cols();
  if (labels.size() != N || class_weights.size() != C) {
    throw Error(ErrorCode::ShapeMismatch, "weighted_cross_entropy: labels/weights do not match logits");
  }
  if (mask.empty()) throw Error(ErrorCode::EmptyMask, "no labeled nodes in the loss mask");
  for (double w : class_weights) {
    if (!(w > 0.0)) throw Error(ErrorCode::InvalidArgument, "class weights must be positive");
  }
  check_index(mask, N, "weighted_cross_entropy");
  const auto Z = logits.values();
  const double inv = 1.0 / static_cast<double>(mask.size());
  // Softmax rows of the masked nodes, kept for backward.
  std::vector<double> probs(mask.size() * C);
  double loss = 0.0;
  for (std::size_t m = 0; m < mask.size(); ++m) {
    const std::size_t i = mask[m];
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw Error(ErrorCode::InvalidArgument, "label out of range for node " + std::to_string(i));
    }
    const double *z = &Z[i * C];
    const double zmax = *std::max_element(z, z + C);
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += std::exp(z[c] - zmax);
    const double lse = zmax + std::log(s);
    for (std::size_t c = 0; c < C; ++c) probs[m * C + c] = std::exp(z[c] - lse);
    loss -= class_weights[static_cast<std::size_t>(y)] * (z[y] - lse);
  }
  loss *= inv;
  std::vector<std::size_t> msk(mask.begin(), mask.end());
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<double> w(class_weights.begin(), class_weights.end());
  const auto il = logits.id();
  return logits.tape()->record(
      1, 1, {loss}, {il},
      [=, msk = std::move(msk), lab = std::move(lab), w = std::move(w),
       probs = std::move(probs)](std::span<const double> g, Tape &tp) {
        double *dZ = tp.adjoint(il);
        for (std::size_t m = 0; m < msk.size(); ++m) {
          const std::size_t i = msk[m];
          const auto y = static_cast<std::size_t>(lab[i]);
          const double f = g[0] * inv * w[y];
          for (std::size_t c = 0; c < C; ++c)
            dZ[i * C + c] += f * (probs[m * C + c] - (c == y ? 1.0 : 0.0));
        }
      },
      "weighted_cross_entropy");
}

Tensor sum(const Tensor &a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const auto ia = a.id();
  return a.tape()->record(1, 1, {s}, {ia},
                          [=](std::span<const double> g, Tape &tp) {
                            double *dA = tp.adjoint(ia);
                            const std::size_t n = tp.values(ia).size();
                            for (std::size_t i = 0; i < n; ++i) dA[i] += g[0];
                          },
                          "sum");
}

double finite_difference_check(const std::function<Tensor(Tape &)> &loss,
                               std::span<Param *const> params, double eps, double floor) {
  for (auto *p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto evaluate = [&] {
    Tape tape;
    return loss(tape).value();
  };
  double worst = 0.0;
  for (auto *p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = evaluate();
      p->value[i] = saved - eps;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

} // namespace kiln::ad

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace kiln::ad {

class Tape;

/// A trainable matrix that outlives any single tape. Backward passes add into
/// `grad`; nothing clears it except zero_grad().
struct Param {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string name, std::size_t rows, std::size_t cols, double fill = 0.0);
  void zero_grad();
  double &operator()(std::size_t r, std::size_t c) { return value[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return value[r * cols + c]; }
};

/// Handle to a node recorded on a Tape. All tensors are 2-D, row-major
/// float64; scalars are 1x1.
class Tensor {
public:
  Tensor() = default;
  Tensor(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}

  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  std::span<const double> values() const;
  double value(std::size_t r = 0, std::size_t c = 0) const;
  /// Accumulated gradient; only leaves created with requires_grad carry one.
  std::span<const double> grad() const;
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape *tape() const { return tape_; }

private:
  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
public:
  /// Receives dL/d(output) and adds into the adjoints of the node's inputs.
  using BackwardFn = std::function<void(std::span<const double> grad_out, Tape &tape)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Leaf that owns its gradient accumulator.
  Tensor leaf(std::size_t rows, std::size_t cols, std::vector<double> values,
              bool requires_grad = true);
  Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  /// Leaf bound to a Param: reads its value now, accumulates into its grad.
  Tensor param(Param &p);

  /// Records an op output; checks every value is finite.
  Tensor record(std::size_t rows, std::size_t cols, std::vector<double> values,
                std::vector<std::size_t> inputs, BackwardFn backward, const char *op);

  /// Reverse sweep from a 1x1 loss, adding into leaf gradients.
  void backward(const Tensor &loss);
  /// Zeroes every leaf gradient owned by or bound to this tape.
  void zero_grads();
  /// Drops all recorded nodes.
  void clear();

  std::size_t node_count() const { return nodes_.size(); }

  // Accessors used by op implementations.
  std::size_t rows(std::size_t id) const { return nodes_[id].rows; }
  std::size_t cols(std::size_t id) const { return nodes_[id].cols; }
  std::span<const double> values(std::size_t id) const { return nodes_[id].values; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::span<const double> grad(std::size_t id) const;
  /// Adjoint buffer of `id` during backward; null if `id` needs no gradient.
  double *adjoint(std::size_t id);

private:
  struct Node {
    std::size_t rows = 0, cols = 0;
    std::vector<double> values;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::vector<double> own_grad;
    std::vector<double> *grad_sink = nullptr;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> adjoints_;
};

Tensor matmul(const Tensor &a, const Tensor &b);
/// a * b^T, for weights stored as [out x in].
Tensor matmul_nt(const Tensor &a, const Tensor &b);
/// Elementwise sum; `b` may also be a single row broadcast over a's rows or a
/// 1x1 scalar.
Tensor add(const Tensor &a, const Tensor &b);
/// Elementwise product with the same broadcasting as add().
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, double c);
/// Multiplies row r of `a` by v[r]; v is rows(a) x 1.
Tensor scale_rows(const Tensor &a, const Tensor &v);
Tensor leaky_relu(const Tensor &x, double slope = 0.2);
/// cos(l * theta - mu) with mu a 1x1 tensor.
Tensor cos_shifted(const Tensor &theta, int l, const Tensor &mu);
/// 1x1 view of a(r, c).
Tensor element(const Tensor &a, std::size_t r, std::size_t c);
/// Columns [start, start + count) of `a`.
Tensor slice_cols(const Tensor &a, std::size_t start, std::size_t count);
/// out[i] = a[index[i]].
Tensor gather_rows(const Tensor &a, std::span<const std::size_t> index);
/// out[index[i]] += a[i] for an output with `out_rows` rows.
Tensor scatter_add_rows(const Tensor &a, std::span<const std::size_t> index, std::size_t out_rows);
/// Softmax of an E x 1 score column within each segment. With `allow_empty`
/// false, a segment without edges raises EmptySegment.
Tensor segment_softmax(const Tensor &scores, std::span<const std::size_t> segment,
                       std::size_t num_segments, bool allow_empty = true);
/// -(1/|L|) * sum over masked nodes of w[y] * log softmax(logits_i)[y].
Tensor weighted_cross_entropy(const Tensor &logits, std::span<const int> labels,
                              std::span<const double> class_weights,
                              std::span<const std::size_t> mask);
Tensor sum(const Tensor &a);

/// Central-difference check of the gradients of `loss` (rebuilt on a fresh
/// tape per evaluation) with respect to every entry of `params`. Returns the
/// largest |analytic - numeric| / max(|analytic|, |numeric|, floor).
double finite_difference_check(const std::function<Tensor(Tape &)> &loss,
                               std::span<Param *const> params, double eps = 1e-5,
                               double floor = 1e-6);

} // namespace kiln::ad

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mtnn/corpus.hpp"
#include "mtnn/extract.hpp"

namespace mtnn {

enum class Activation : std::uint8_t { tanh = 0, identity = 1 };
enum class LayerKind : std::uint8_t { plain = 0, tensor = 1 };

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Plain: out = act(in * W + b).
// Tensor: out = act(in * W + b) .* act(in * R + bR), i.e. rank-1 slices
// U[k] = W[:,k] * R[:,k]^T of an order-3 weight tensor. W/b play the role of
// the first projection Q.
template <typename T>
struct LayerParams {
  LayerKind kind = LayerKind::plain;
  Activation act = Activation::tanh;
  Mat<T> W;
  RowVec<T> b;
  Mat<T> R;
  RowVec<T> bR;

  Eigen::Index in() const { return W.rows(); }
  Eigen::Index out() const { return W.cols(); }
};

template <typename T>
struct HeadParams {
  Mat<T> W;  // width x labels
  RowVec<T> b;
};

template <typename T>
struct NetworkParams {
  Mat<T> src_embed;  // |Vs| x D
  Mat<T> tgt_embed;  // |Vt| x D
  std::vector<LayerParams<T>> layers;
  std::vector<HeadParams<T>> heads;

  Eigen::Index embed_dim() const { return src_embed.cols(); }
  const Mat<T>& embed(Side side) const { return side == Side::source ? src_embed : tgt_embed; }
  Mat<T>& embed(Side side) { return side == Side::source ? src_embed : tgt_embed; }

  template <typename U>
  NetworkParams<U> cast() const;
};

// Route of one task through a (possibly shared) parameter set.
struct TaskWiring {
  std::vector<Side> slots;
  std::vector<std::size_t> layers;  // indices into NetworkParams::layers, bottom-up
  std::size_t head = 0;
};

// Row-major block of contexts plus labels for one task.
struct Batch {
  std::size_t width = 0;
  std::vector<TokenId> ids;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  TokenId id(std::size_t row, std::size_t slot) const { return ids[row * width + slot]; }
};

Batch make_batch(std::span<const TaskExample> examples, std::size_t width);
Batch make_batch(std::span<const TaskExample> examples, std::span<const std::size_t> rows,
                 std::size_t width);

template <typename T>
struct LayerTrace {
  Mat<T> pre;    // in * W + b
  Mat<T> act;    // act(pre)
  Mat<T> preR;   // tensor only
  Mat<T> actR;   // tensor only
  Mat<T> out;
};

template <typename T>
struct ForwardTrace {
  Mat<T> input;  // concatenated embeddings, B x (width * D)
  std::vector<LayerTrace<T>> layers;
  Mat<T> logits;
  RowVec<T> log_z;
  RowVec<T> loss;  // per-example objective, including the logZ^2 penalty
  Mat<T> dlogits;  // d(sum of loss)/d(logits)

  const Mat<T>& top() const { return layers.empty() ? input : layers.back().out; }
  T total_loss() const { return loss.sum(); }
};

template <typename T>
struct HeadLoss {
  T loss = 0;
  T log_z = 0;
  RowVec<T> dlogits;
};

// Objective of one example: -(z[label] - logZ) + alpha * logZ^2.
template <typename T>
HeadLoss<T> head_loss(const RowVec<T>& h_top, const HeadParams<T>& head, std::uint32_t label,
                      T alpha);

// Concatenated embedding rows of one context; slot order preserved.
template <typename T>
RowVec<T> embed(const NetworkParams<T>& params, std::span<const TokenId> ids,
                std::span<const Side> sides);

template <typename T>
Mat<T> plain_layer(const Mat<T>& h_in, const Mat<T>& W, const RowVec<T>& b, Activation act);

template <typename T>
Mat<T> tensor_layer(const Mat<T>& h_in, const Mat<T>& Q, const Mat<T>& R, const RowVec<T>& bQ,
                    const RowVec<T>& bR, Activation act);

template <typename T>
ForwardTrace<T> forward(const NetworkParams<T>& params, const TaskWiring& wiring,
                        const Batch& batch, T alpha);

// Sparse embedding update: one row per (example, slot).
template <typename T>
struct EmbeddingRowGrad {
  Side side;
  TokenId id;
  RowVec<T> grad;
};

// Gradient buffers shaped like NetworkParams. Layers and heads not on the
// task path stay unallocated (zero contribution).
template <typename T>
struct Gradients {
  std::vector<LayerParams<T>> layers;
  std::vector<HeadParams<T>> heads;
  std::vector<EmbeddingRowGrad<T>> rows;

  static Gradients zeros_like(const NetworkParams<T>& params);
  void clear();
  void add(const Gradients& other);

  // Dense embedding gradients (for checking).
  Mat<T> dense_embed(const NetworkParams<T>& params, Side side) const;
};

// Accumulates `scale` times the gradient of trace.dlogits into `grads`.
template <typename T>
void backward(const NetworkParams<T>& params, const TaskWiring& wiring, const Batch& batch,
              const ForwardTrace<T>& trace, Gradients<T>& grads, T scale = T(1));

// params -= rate * grads
template <typename T>
void apply_sgd(NetworkParams<T>& params, const Gradients<T>& grads, T rate);

// --- initialization --------------------------------------------------------

// Platform-independent uniform draws from a 64-bit Mersenne twister.
class InitRng {
 public:
  explicit InitRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double half_range) {
    double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return half_range * (2.0 * u - 1.0);
  }

 private:
  std::mt19937_64 engine_;
};

inline constexpr double kEmbedInitRange = 0.05;

Mat<float> init_embedding(InitRng& rng, std::size_t rows, std::size_t dim);
LayerParams<float> init_layer(InitRng& rng, LayerKind kind, Activation act, Eigen::Index in,
                              Eigen::Index out);
HeadParams<float> init_head(InitRng& rng, Eigen::Index in, Eigen::Index labels);

// --- gradient checking ------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::string worst;  // parameter class of the worst entry
  double worst_analytic = 0;
  double worst_numeric = 0;
};

// Central differences on every parameter the batch touches, compared with
// backward(). Relative error |a-f| / max(|a|, |f|, 1e-8).
GradCheckReport grad_check(const NetworkParams<double>& params, const TaskWiring& wiring,
                           const Batch& batch, double alpha, double h = 1e-5);

// Same over the summed objective of several tasks sharing `params`.
GradCheckReport grad_check(const NetworkParams<double>& params,
                           std::span<const TaskWiring> wirings, std::span<const Batch> batches,
                           double alpha, double h = 1e-5);

}  // namespace mtnn

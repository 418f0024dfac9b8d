#include "mtnn/net.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mtnn/error.hpp"

namespace mtnn {
namespace {

template <typename T>
void activate(Mat<T>& m, Activation act) {
  if (act == Activation::tanh) m = m.array().tanh().matrix();
}

// Derivative of the activation expressed through its output.
template <typename T>
Mat<T> activation_slope(const Mat<T>& activated, Activation act) {
  if (act == Activation::identity) return Mat<T>::Ones(activated.rows(), activated.cols());
  return (T(1) - activated.array().square()).matrix();
}

template <typename T>
Mat<T> affine(const Mat<T>& in, const Mat<T>& W, const RowVec<T>& b) {
  Mat<T> out = in * W;
  out.rowwise() += b;
  return out;
}

// Stable log-sum-exp over one row of logits, plus the loss gradient.
template <typename T>
T row_objective(const T* z, Eigen::Index labels, std::uint32_t label, T alpha, T* dz, T* log_z) {
  T peak = z[0];
  for (Eigen::Index c = 1; c < labels; ++c) peak = std::max(peak, z[c]);
  T sum = 0;
  for (Eigen::Index c = 0; c < labels; ++c) sum += std::exp(z[c] - peak);
  T lz = peak + std::log(sum);
  *log_z = lz;
  if (dz) {
    T pull = T(1) + T(2) * alpha * lz;
    for (Eigen::Index c = 0; c < labels; ++c) dz[c] = std::exp(z[c] - lz) * pull;
    dz[label] -= T(1);
  }
  return -(z[label] - lz) + alpha * lz * lz;
}

template <typename T>
void add_into(Mat<T>& dst, const Mat<T>& src) {
  if (dst.size() == 0)
    dst = src;
  else
    dst += src;
}

template <typename T>
void add_into(RowVec<T>& dst, const RowVec<T>& src) {
  if (dst.size() == 0)
    dst = src;
  else
    dst += src;
}

}  // namespace

template <typename T>
template <typename U>
NetworkParams<U> NetworkParams<T>::cast() const {
  NetworkParams<U> out;
  out.src_embed = src_embed.template cast<U>();
  out.tgt_embed = tgt_embed.template cast<U>();
  for (const auto& l : layers) {
    LayerParams<U> c;
    c.kind = l.kind;
    c.act = l.act;
    c.W = l.W.template cast<U>();
    c.b = l.b.template cast<U>();
    c.R = l.R.template cast<U>();
    c.bR = l.bR.template cast<U>();
    out.layers.push_back(std::move(c));
  }
  for (const auto& h : heads) out.heads.push_back({h.W.template cast<U>(), h.b.template cast<U>()});
  return out;
}

Batch make_batch(std::span<const TaskExample> examples, std::size_t width) {
  Batch batch;
  batch.width = width;
  batch.ids.reserve(examples.size() * width);
  batch.labels.reserve(examples.size());
  for (const auto& ex : examples) {
    if (ex.context.size() != width)
      throw Error(ErrorCode::width_mismatch, "example width differs from batch width");
    batch.ids.insert(batch.ids.end(), ex.context.begin(), ex.context.end());
    batch.labels.push_back(ex.label);
  }
  return batch;
}

Batch make_batch(std::span<const TaskExample> examples, std::span<const std::size_t> rows,
                 std::size_t width) {
  Batch batch;
  batch.width = width;
  batch.ids.reserve(rows.size() * width);
  batch.labels.reserve(rows.size());
  for (auto r : rows) {
    const auto& ex = examples[r];
    if (ex.context.size() != width)
      throw Error(ErrorCode::width_mismatch, "example width differs from batch width");
    batch.ids.insert(batch.ids.end(), ex.context.begin(), ex.context.end());
    batch.labels.push_back(ex.label);
  }
  return batch;
}

template <typename T>
HeadLoss<T> head_loss(const RowVec<T>& h_top, const HeadParams<T>& head, std::uint32_t label,
                      T alpha) {
  if (alpha < 0) throw Error(ErrorCode::contract, "alpha must be non-negative");
  if (label >= head.W.cols()) throw Error(ErrorCode::contract, "label out of range");
  RowVec<T> z = h_top * head.W + head.b;
  HeadLoss<T> out;
  out.dlogits.resize(z.size());
  out.loss = row_objective(z.data(), z.size(), label, alpha, out.dlogits.data(), &out.log_z);
  return out;
}

template <typename T>
RowVec<T> embed(const NetworkParams<T>& params, std::span<const TokenId> ids,
                std::span<const Side> sides) {
  const auto dim = params.embed_dim();
  RowVec<T> out(static_cast<Eigen::Index>(ids.size()) * dim);
  for (std::size_t s = 0; s < ids.size(); ++s) {
    const auto& table = params.embed(sides[s]);
    if (ids[s] >= table.rows()) throw Error(ErrorCode::contract, "token id out of range");
    out.segment(static_cast<Eigen::Index>(s) * dim, dim) = table.row(ids[s]);
  }
  return out;
}

template <typename T>
Mat<T> plain_layer(const Mat<T>& h_in, const Mat<T>& W, const RowVec<T>& b, Activation act) {
  Mat<T> out = affine(h_in, W, b);
  activate(out, act);
  return out;
}

template <typename T>
Mat<T> tensor_layer(const Mat<T>& h_in, const Mat<T>& Q, const Mat<T>& R, const RowVec<T>& bQ,
                    const RowVec<T>& bR, Activation act) {
  Mat<T> v = plain_layer(h_in, Q, bQ, act);
  Mat<T> v2 = plain_layer(h_in, R, bR, act);
  return v.cwiseProduct(v2);
}

template <typename T>
ForwardTrace<T> forward(const NetworkParams<T>& params, const TaskWiring& wiring,
                        const Batch& batch, T alpha) {
  if (batch.width != wiring.slots.size())
    throw Error(ErrorCode::width_mismatch, "batch width does not match task wiring");
  const auto rows = static_cast<Eigen::Index>(batch.size());
  const auto dim = params.embed_dim();
  ForwardTrace<T> tr;
  tr.input.resize(rows, static_cast<Eigen::Index>(batch.width) * dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t s = 0; s < batch.width; ++s) {
      const auto& table = params.embed(wiring.slots[s]);
      auto id = batch.id(static_cast<std::size_t>(r), s);
      if (id >= table.rows()) throw Error(ErrorCode::contract, "token id out of range");
      tr.input.row(r).segment(static_cast<Eigen::Index>(s) * dim, dim) = table.row(id);
    }
  }

  tr.layers.resize(wiring.layers.size());
  for (std::size_t p = 0; p < wiring.layers.size(); ++p) {
    const auto& layer = params.layers[wiring.layers[p]];
    const Mat<T>& in = p == 0 ? tr.input : tr.layers[p - 1].out;
    auto& lt = tr.layers[p];
    lt.pre = affine(in, layer.W, layer.b);
    lt.act = lt.pre;
    activate(lt.act, layer.act);
    if (layer.kind == LayerKind::tensor) {
      lt.preR = affine(in, layer.R, layer.bR);
      lt.actR = lt.preR;
      activate(lt.actR, layer.act);
      lt.out = lt.act.cwiseProduct(lt.actR);
    } else {
      lt.out = lt.act;
    }
  }

  const auto& head = params.heads[wiring.head];
  tr.logits = affine(tr.top(), head.W, head.b);
  const auto labels = tr.logits.cols();
  tr.log_z.resize(rows);
  tr.loss.resize(rows);
  tr.dlogits.resize(rows, labels);
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto label = batch.labels[static_cast<std::size_t>(r)];
    if (label >= labels) throw Error(ErrorCode::contract, "label out of range for head");
    tr.loss[r] = row_objective(&tr.logits(r, 0), labels, label, alpha, &tr.dlogits(r, 0),
                               &tr.log_z[r]);
  }
  return tr;
}

template <typename T>
Gradients<T> Gradients<T>::zeros_like(const NetworkParams<T>& params) {
  Gradients g;
  g.layers.resize(params.layers.size());
  g.heads.resize(params.heads.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    g.layers[i].kind = params.layers[i].kind;
    g.layers[i].act = params.layers[i].act;
  }
  return g;
}

template <typename T>
void Gradients<T>::clear() {
  for (auto& l : layers) {
    l.W.resize(0, 0);
    l.b.resize(0);
    l.R.resize(0, 0);
    l.bR.resize(0);
  }
  for (auto& h : heads) {
    h.W.resize(0, 0);
    h.b.resize(0);
  }
  rows.clear();
}

template <typename T>
void Gradients<T>::add(const Gradients& other) {
  if (layers.size() < other.layers.size()) layers.resize(other.layers.size());
  if (heads.size() < other.heads.size()) heads.resize(other.heads.size());
  for (std::size_t i = 0; i < other.layers.size(); ++i) {
    const auto& o = other.layers[i];
    if (o.W.size() == 0) continue;
    add_into(layers[i].W, o.W);
    add_into(layers[i].b, o.b);
    if (o.R.size() != 0) {
      add_into(layers[i].R, o.R);
      add_into(layers[i].bR, o.bR);
    }
  }
  for (std::size_t i = 0; i < other.heads.size(); ++i) {
    if (other.heads[i].W.size() == 0) continue;
    add_into(heads[i].W, other.heads[i].W);
    add_into(heads[i].b, other.heads[i].b);
  }
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

template <typename T>
Mat<T> Gradients<T>::dense_embed(const NetworkParams<T>& params, Side side) const {
  const auto& table = params.embed(side);
  Mat<T> out = Mat<T>::Zero(table.rows(), table.cols());
  for (const auto& r : rows)
    if (r.side == side) out.row(r.id) += r.grad;
  return out;
}

template <typename T>
void backward(const NetworkParams<T>& params, const TaskWiring& wiring, const Batch& batch,
              const ForwardTrace<T>& trace, Gradients<T>& grads, T scale) {
  if (grads.layers.size() < params.layers.size()) grads.layers.resize(params.layers.size());
  if (grads.heads.size() < params.heads.size()) grads.heads.resize(params.heads.size());

  Mat<T> dz = trace.dlogits * scale;
  const auto& head = params.heads[wiring.head];
  auto& gh = grads.heads[wiring.head];
  add_into(gh.W, Mat<T>(trace.top().transpose() * dz));
  add_into(gh.b, RowVec<T>(dz.colwise().sum()));
  Mat<T> dh = dz * head.W.transpose();

  for (std::size_t p = wiring.layers.size(); p-- > 0;) {
    const auto& layer = params.layers[wiring.layers[p]];
    auto& gl = grads.layers[wiring.layers[p]];
    const auto& lt = trace.layers[p];
    const Mat<T>& in = p == 0 ? trace.input : trace.layers[p - 1].out;
    if (layer.kind == LayerKind::tensor) {
      Mat<T> dpre = dh.cwiseProduct(lt.actR).cwiseProduct(activation_slope(lt.act, layer.act));
      Mat<T> dpreR = dh.cwiseProduct(lt.act).cwiseProduct(activation_slope(lt.actR, layer.act));
      add_into(gl.W, Mat<T>(in.transpose() * dpre));
      add_into(gl.b, RowVec<T>(dpre.colwise().sum()));
      add_into(gl.R, Mat<T>(in.transpose() * dpreR));
      add_into(gl.bR, RowVec<T>(dpreR.colwise().sum()));
      dh = dpre * layer.W.transpose() + dpreR * layer.R.transpose();
    } else {
      Mat<T> dpre = dh.cwiseProduct(activation_slope(lt.act, layer.act));
      add_into(gl.W, Mat<T>(in.transpose() * dpre));
      add_into(gl.b, RowVec<T>(dpre.colwise().sum()));
      dh = dpre * layer.W.transpose();
    }
  }

  const auto dim = params.embed_dim();
  for (std::size_t r = 0; r < batch.size(); ++r)
    for (std::size_t s = 0; s < batch.width; ++s)
      grads.rows.push_back({wiring.slots[s], batch.id(r, s),
                            dh.row(static_cast<Eigen::Index>(r))
                                .segment(static_cast<Eigen::Index>(s) * dim, dim)});
}

template <typename T>
void apply_sgd(NetworkParams<T>& params, const Gradients<T>& grads, T rate) {
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    if (g.W.size() == 0) continue;
    auto& l = params.layers[i];
    l.W -= rate * g.W;
    l.b -= rate * g.b;
    if (g.R.size() != 0) {
      l.R -= rate * g.R;
      l.bR -= rate * g.bR;
    }
  }
  for (std::size_t i = 0; i < grads.heads.size(); ++i) {
    const auto& g = grads.heads[i];
    if (g.W.size() == 0) continue;
    params.heads[i].W -= rate * g.W;
    params.heads[i].b -= rate * g.b;
  }
  for (const auto& r : grads.rows) params.embed(r.side).row(r.id) -= rate * r.grad;
}

Mat<float> init_embedding(InitRng& rng, std::size_t rows, std::size_t dim) {
  Mat<float> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<float>(rng.uniform(kEmbedInitRange));
  return m;
}

namespace {

Mat<float> init_matrix(InitRng& rng, Eigen::Index in, Eigen::Index out) {
  const double range = std::sqrt(6.0 / static_cast<double>(in + out));
  Mat<float> m(in, out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(range));
  return m;
}

}  // namespace

LayerParams<float> init_layer(InitRng& rng, LayerKind kind, Activation act, Eigen::Index in,
                              Eigen::Index out) {
  LayerParams<float> l;
  l.kind = kind;
  l.act = act;
  l.W = init_matrix(rng, in, out);
  l.b = RowVec<float>::Zero(out);
  if (kind == LayerKind::tensor) {
    l.R = init_matrix(rng, in, out);
    l.bR = RowVec<float>::Zero(out);
  }
  return l;
}

HeadParams<float> init_head(InitRng& rng, Eigen::Index in, Eigen::Index labels) {
  return {init_matrix(rng, in, labels), RowVec<float>::Zero(labels)};
}

namespace {

struct CheckTarget {
  std::string name;
  double* value;
  double analytic;
};

}  // namespace

GradCheckReport grad_check(const NetworkParams<double>& params, const TaskWiring& wiring,
                           const Batch& batch, double alpha, double h) {
  return grad_check(params, std::span<const TaskWiring>(&wiring, 1),
                    std::span<const Batch>(&batch, 1), alpha, h);
}

GradCheckReport grad_check(const NetworkParams<double>& params,
                           std::span<const TaskWiring> wirings, std::span<const Batch> batches,
                           double alpha, double h) {
  if (wirings.size() != batches.size())
    throw Error(ErrorCode::contract, "one batch per task wiring required");
  NetworkParams<double> work = params;
  auto objective = [&] {
    double total = 0;
    for (std::size_t t = 0; t < wirings.size(); ++t)
      total += forward(work, wirings[t], batches[t], alpha).total_loss();
    return total;
  };

  auto grads = Gradients<double>::zeros_like(work);
  for (std::size_t t = 0; t < wirings.size(); ++t) {
    auto trace = forward(work, wirings[t], batches[t], alpha);
    backward(work, wirings[t], batches[t], trace, grads);
  }

  std::vector<CheckTarget> targets;
  auto add_matrix = [&](const std::string& name, auto& value, const auto& grad) {
    for (Eigen::Index i = 0; i < value.size(); ++i)
      targets.push_back({name, value.data() + i, grad.size() ? grad.data()[i] : 0.0});
  };
  std::map<std::size_t, bool> layers_used, heads_used;
  std::map<std::pair<Side, TokenId>, bool> rows_used;
  for (std::size_t t = 0; t < wirings.size(); ++t) {
    for (auto idx : wirings[t].layers) layers_used[idx] = true;
    heads_used[wirings[t].head] = true;
    const auto& batch = batches[t];
    for (std::size_t r = 0; r < batch.size(); ++r)
      for (std::size_t s = 0; s < batch.width; ++s)
        rows_used[{wirings[t].slots[s], batch.id(r, s)}] = true;
  }
  for (const auto& [idx, _] : layers_used) {
    auto& l = work.layers[idx];
    const auto& g = grads.layers[idx];
    bool tensor = l.kind == LayerKind::tensor;
    add_matrix(tensor ? "Q" : "W", l.W, g.W);
    add_matrix(tensor ? "biasQ" : "bias", l.b, g.b);
    if (tensor) {
      add_matrix("R", l.R, g.R);
      add_matrix("biasR", l.bR, g.bR);
    }
  }
  for (const auto& [idx, _] : heads_used) {
    add_matrix("head.W", work.heads[idx].W, grads.heads[idx].W);
    add_matrix("head.bias", work.heads[idx].b, grads.heads[idx].b);
  }
  Mat<double> dense_src = grads.dense_embed(work, Side::source);
  Mat<double> dense_tgt = grads.dense_embed(work, Side::target);
  for (const auto& [key, _] : rows_used) {
    auto [side, id] = key;
    auto& table = work.embed(side);
    const auto& dense = side == Side::source ? dense_src : dense_tgt;
    for (Eigen::Index c = 0; c < table.cols(); ++c)
      targets.push_back({side == Side::source ? "src_embed" : "tgt_embed", &table(id, c),
                         dense(id, c)});
  }

  GradCheckReport report;
  for (auto& t : targets) {
    double saved = *t.value;
    *t.value = saved + h;
    double up = objective();
    *t.value = saved - h;
    double down = objective();
    *t.value = saved;
    double numeric = (up - down) / (2 * h);
    double err = std::abs(t.analytic - numeric) /
                 std::max({std::abs(t.analytic), std::abs(numeric), 1e-8});
    ++report.checked;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst = t.name;
      report.worst_analytic = t.analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

#define MTNN_INSTANTIATE(T)                                                                       \
  template struct NetworkParams<T>;                                                                \
  template NetworkParams<float> NetworkParams<T>::cast<float>() const;                             \
  template NetworkParams<double> NetworkParams<T>::cast<double>() const;                           \
  template HeadLoss<T> head_loss(const RowVec<T>&, const HeadParams<T>&, std::uint32_t, T);        \
  template RowVec<T> embed(const NetworkParams<T>&, std::span<const TokenId>,                      \
                           std::span<const Side>);                                                 \
  template Mat<T> plain_layer(const Mat<T>&, const Mat<T>&, const RowVec<T>&, Activation);         \
  template Mat<T> tensor_layer(const Mat<T>&, const Mat<T>&, const Mat<T>&, const RowVec<T>&,      \
                               const RowVec<T>&, Activation);                                      \
  template ForwardTrace<T> forward(const NetworkParams<T>&, const TaskWiring&, const Batch&, T);   \
  template struct Gradients<T>;                                                                    \
  template void backward(const NetworkParams<T>&, const TaskWiring&, const Batch&,                 \
                         const ForwardTrace<T>&, Gradients<T>&, T);                                \
  template void apply_sgd(NetworkParams<T>&, const Gradients<T>&, T);

MTNN_INSTANTIATE(float)
MTNN_INSTANTIATE(double)

#undef MTNN_INSTANTIATE

}  // namespace mtnn

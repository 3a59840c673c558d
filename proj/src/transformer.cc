#include "dictattach/transformer.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dictattach {

void ModelConfig::Validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw std::invalid_argument("d_model must be a positive multiple of heads");
  }
  if (encoder_layers == 0 || decoder_layers == 0) {
    throw std::invalid_argument("the model needs at least one encoder and one decoder layer");
  }
  if (ffn_dim == 0) throw std::invalid_argument("ffn_dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("dropout must lie in [0, 1)");
  }
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw std::invalid_argument("label_smoothing must lie in [0, 1)");
  }
  if (max_length < 2) throw std::invalid_argument("max_length must be at least 2");
}

namespace {

constexpr double kLayerNormEpsilon = 1e-5;

template <typename T>
void AddSlot(std::vector<TensorSlot<T>>& slots, std::string name, Matrix<T>& m) {
  slots.push_back({std::move(name), m.data(), m.rows(), m.cols()});
}

template <typename T>
void AddSlot(std::vector<TensorSlot<T>>& slots, std::string name,
             RowVector<T>& v) {
  slots.push_back({std::move(name), v.data(), 1, v.cols()});
}

template <typename T>
void AddLinear(std::vector<TensorSlot<T>>& slots, const std::string& prefix,
               LinearParams<T>& p) {
  AddSlot(slots, prefix + ".weight", p.weight);
  AddSlot(slots, prefix + ".bias", p.bias);
}

template <typename T>
void AddNorm(std::vector<TensorSlot<T>>& slots, const std::string& prefix,
             LayerNormParams<T>& p) {
  AddSlot(slots, prefix + ".gain", p.gain);
  AddSlot(slots, prefix + ".bias", p.bias);
}

template <typename T>
void AddAttention(std::vector<TensorSlot<T>>& slots, const std::string& prefix,
                  AttentionParams<T>& p) {
  AddLinear(slots, prefix + ".query", p.query);
  AddLinear(slots, prefix + ".key", p.key);
  AddLinear(slots, prefix + ".value", p.value);
  AddLinear(slots, prefix + ".output", p.output);
}

template <typename T>
LinearParams<T> ZeroLinear(size_t in, size_t out) {
  return {Matrix<T>::Zero(in, out), RowVector<T>::Zero(out)};
}

template <typename T>
LayerNormParams<T> ZeroNorm(size_t d) {
  return {RowVector<T>::Zero(d), RowVector<T>::Zero(d)};
}

template <typename T>
AttentionParams<T> ZeroAttention(size_t d) {
  return {ZeroLinear<T>(d, d), ZeroLinear<T>(d, d), ZeroLinear<T>(d, d),
          ZeroLinear<T>(d, d)};
}

// Contiguous row blocks, one per sentence.
struct Segments {
  std::vector<Eigen::Index> offsets{0};

  void Add(Eigen::Index rows) { offsets.push_back(offsets.back() + rows); }
  size_t count() const { return offsets.size() - 1; }
  Eigen::Index begin(size_t i) const { return offsets[i]; }
  Eigen::Index length(size_t i) const { return offsets[i + 1] - offsets[i]; }
  Eigen::Index total() const { return offsets.back(); }
};

template <typename T>
Matrix<T> LinearForward(const LinearParams<T>& p, const Matrix<T>& x) {
  Matrix<T> y(x.rows(), p.weight.cols());
  y.noalias() = x * p.weight;
  y.rowwise() += p.bias;
  return y;
}

template <typename T>
Matrix<T> LinearBackward(const LinearParams<T>& p, const Matrix<T>& x,
                         const Matrix<T>& dy, LinearParams<T>* g) {
  g->weight.noalias() += x.transpose() * dy;
  g->bias += dy.colwise().sum();
  Matrix<T> dx(dy.rows(), p.weight.rows());
  dx.noalias() = dy * p.weight.transpose();
  return dx;
}

template <typename T>
struct LayerNormCache {
  Matrix<T> normalized;
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std;
};

template <typename T>
Matrix<T> LayerNormForward(const LayerNormParams<T>& p, const Matrix<T>& x,
                           LayerNormCache<T>* cache) {
  const Eigen::Index n = x.rows();
  Matrix<T> normalized(n, x.cols());
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    normalized.row(i) = x.row(i).array() - mean;
    const T variance = normalized.row(i).squaredNorm() / static_cast<T>(x.cols());
    inv_std(i) = T(1) / std::sqrt(variance + static_cast<T>(kLayerNormEpsilon));
    normalized.row(i) *= inv_std(i);
  }
  Matrix<T> y = normalized.array().rowwise() * p.gain.array();
  y.rowwise() += p.bias;
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Matrix<T> LayerNormBackward(const LayerNormParams<T>& p,
                            const LayerNormCache<T>& cache, const Matrix<T>& dy,
                            LayerNormParams<T>* g) {
  g->gain += dy.cwiseProduct(cache.normalized).colwise().sum();
  g->bias += dy.colwise().sum();
  Matrix<T> dxhat = dy.array().rowwise() * p.gain.array();
  Matrix<T> dx(dy.rows(), dy.cols());
  const T inv_d = T(1) / static_cast<T>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const T mean_dxhat = dxhat.row(i).sum() * inv_d;
    const T mean_dot = dxhat.row(i).dot(cache.normalized.row(i)) * inv_d;
    dx.row(i) = cache.inv_std(i) *
                (dxhat.row(i).array() - mean_dxhat -
                 cache.normalized.row(i).array() * mean_dot);
  }
  return dx;
}

template <typename T>
void SoftmaxRows(Matrix<T>& scores) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const T max = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - max).exp();
    scores.row(i) /= scores.row(i).sum();
  }
}

template <typename T>
struct AttentionCache {
  Matrix<T> query_input;
  Matrix<T> kv_input;  // empty for self-attention (same as query_input)
  Matrix<T> q, k, v;
  Matrix<T> context;
  std::vector<Matrix<T>> probs;  // [segment * heads + head]
};

template <typename T>
Matrix<T> AttentionForward(const AttentionParams<T>& p, const Matrix<T>& xq,
                           const Matrix<T>* xkv, const Segments& qseg,
                           const Segments& kseg, bool causal, size_t heads,
                           AttentionCache<T>* cache) {
  const Matrix<T>& kv_input = xkv == nullptr ? xq : *xkv;
  Matrix<T> q = LinearForward(p.query, xq);
  Matrix<T> k = LinearForward(p.key, kv_input);
  Matrix<T> v = LinearForward(p.value, kv_input);
  const Eigen::Index d = q.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Matrix<T> context(q.rows(), d);
  if (cache != nullptr) cache->probs.clear();
  for (size_t s = 0; s < qseg.count(); ++s) {
    const Eigen::Index qb = qseg.begin(s), ql = qseg.length(s);
    const Eigen::Index kb = kseg.begin(s), kl = kseg.length(s);
    for (size_t h = 0; h < heads; ++h) {
      const Eigen::Index col = static_cast<Eigen::Index>(h) * dh;
      Matrix<T> scores(ql, kl);
      scores.noalias() =
          q.block(qb, col, ql, dh) * k.block(kb, col, kl, dh).transpose();
      scores *= scale;
      if (causal) {
        for (Eigen::Index i = 0; i < ql; ++i) {
          for (Eigen::Index j = i + 1; j < kl; ++j) {
            scores(i, j) = -std::numeric_limits<T>::infinity();
          }
        }
      }
      SoftmaxRows(scores);
      context.block(qb, col, ql, dh).noalias() = scores * v.block(kb, col, kl, dh);
      if (cache != nullptr) cache->probs.push_back(std::move(scores));
    }
  }
  Matrix<T> out = LinearForward(p.output, context);
  if (cache != nullptr) {
    cache->query_input = xq;
    if (xkv != nullptr) cache->kv_input = *xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
  }
  return out;
}

// Returns the gradient for the query input; the key/value input gradient is
// written to `dkv` (for self-attention the caller adds both).
template <typename T>
Matrix<T> AttentionBackward(const AttentionParams<T>& p,
                            const AttentionCache<T>& cache, const Matrix<T>& dout,
                            const Segments& qseg, const Segments& kseg,
                            size_t heads, AttentionParams<T>* g, Matrix<T>* dkv) {
  const Matrix<T> dcontext =
      LinearBackward(p.output, cache.context, dout, &g->output);
  const Eigen::Index d = cache.q.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Matrix<T> dq = Matrix<T>::Zero(cache.q.rows(), d);
  Matrix<T> dk = Matrix<T>::Zero(cache.k.rows(), d);
  Matrix<T> dv = Matrix<T>::Zero(cache.v.rows(), d);
  size_t index = 0;
  for (size_t s = 0; s < qseg.count(); ++s) {
    const Eigen::Index qb = qseg.begin(s), ql = qseg.length(s);
    const Eigen::Index kb = kseg.begin(s), kl = kseg.length(s);
    for (size_t h = 0; h < heads; ++h, ++index) {
      const Eigen::Index col = static_cast<Eigen::Index>(h) * dh;
      const Matrix<T>& probs = cache.probs[index];
      const auto dctx = dcontext.block(qb, col, ql, dh);
      dv.block(kb, col, kl, dh).noalias() += probs.transpose() * dctx;
      Matrix<T> dprobs(ql, kl);
      dprobs.noalias() = dctx * cache.v.block(kb, col, kl, dh).transpose();
      const Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot =
          dprobs.cwiseProduct(probs).rowwise().sum();
      Matrix<T> dscores = probs.cwiseProduct(
          (dprobs.colwise() - row_dot).matrix());
      dscores *= scale;
      dq.block(qb, col, ql, dh).noalias() +=
          dscores * cache.k.block(kb, col, kl, dh);
      dk.block(kb, col, kl, dh).noalias() +=
          dscores.transpose() * cache.q.block(qb, col, ql, dh);
    }
  }
  const Matrix<T>& kv_input = cache.kv_input.size() == 0 ? cache.query_input
                                                         : cache.kv_input;
  *dkv = LinearBackward(p.key, kv_input, dk, &g->key);
  *dkv += LinearBackward(p.value, kv_input, dv, &g->value);
  return LinearBackward(p.query, cache.query_input, dq, &g->query);
}

template <typename T>
struct FeedForwardCache {
  Matrix<T> input;
  Matrix<T> hidden;  // post-ReLU
};

template <typename T>
Matrix<T> FeedForwardForward(const FeedForwardParams<T>& p, const Matrix<T>& x,
                             FeedForwardCache<T>* cache) {
  Matrix<T> hidden = LinearForward(p.inner, x).cwiseMax(T(0));
  Matrix<T> out = LinearForward(p.outer, hidden);
  if (cache != nullptr) {
    cache->input = x;
    cache->hidden = std::move(hidden);
  }
  return out;
}

template <typename T>
Matrix<T> FeedForwardBackward(const FeedForwardParams<T>& p,
                              const FeedForwardCache<T>& cache,
                              const Matrix<T>& dout, FeedForwardParams<T>* g) {
  Matrix<T> dhidden = LinearBackward(p.outer, cache.hidden, dout, &g->outer);
  dhidden = (cache.hidden.array() > T(0)).select(dhidden, T(0));
  return LinearBackward(p.inner, cache.input, dhidden, &g->inner);
}

// Inverted dropout. The mask stays empty when dropout is inactive.
template <typename T>
void Dropout(Matrix<T>& x, double rate, Rng* rng, Matrix<T>* mask) {
  if (rng == nullptr || rate <= 0.0) {
    if (mask != nullptr) mask->resize(0, 0);
    return;
  }
  std::bernoulli_distribution keep(1.0 - rate);
  const T kept = static_cast<T>(1.0 / (1.0 - rate));
  Matrix<T> m(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = keep(*rng) ? kept : T(0);
  }
  x.array() *= m.array();
  if (mask != nullptr) *mask = std::move(m);
}

template <typename T>
Matrix<T> DropoutBackward(const Matrix<T>& dy, const Matrix<T>& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

template <typename T>
struct EncoderLayerCache {
  LayerNormCache<T> attn_norm;
  AttentionCache<T> attn;
  Matrix<T> attn_mask;
  LayerNormCache<T> ffn_norm;
  FeedForwardCache<T> ffn;
  Matrix<T> ffn_mask;
};

template <typename T>
struct DecoderLayerCache {
  LayerNormCache<T> self_norm;
  AttentionCache<T> self_attn;
  Matrix<T> self_mask;
  LayerNormCache<T> cross_norm;
  AttentionCache<T> cross_attn;
  Matrix<T> cross_mask;
  LayerNormCache<T> ffn_norm;
  FeedForwardCache<T> ffn;
  Matrix<T> ffn_mask;
};

template <typename T>
struct PassCache {
  Matrix<T> source_mask;
  std::vector<EncoderLayerCache<T>> encoder;
  LayerNormCache<T> encoder_norm;
  Matrix<T> memory;
  Matrix<T> target_mask;
  std::vector<DecoderLayerCache<T>> decoder;
  LayerNormCache<T> decoder_norm;
  Matrix<T> final_states;
};

// One forward (and optionally backward) pass over stacked rows.
template <typename T>
class Pass {
 public:
  Pass(const TransformerParams<T>& params, const ModelConfig& config,
       const Matrix<T>& sinusoid, T scale, Rng* rng, bool keep_cache)
      : p_(params),
        config_(config),
        sinusoid_(sinusoid),
        scale_(scale),
        rng_(rng),
        keep_(keep_cache) {}

  Matrix<T> Encode(Matrix<T> x, const Segments& src) {
    cache_.encoder.resize(p_.encoder.size());
    Dropout(x, config_.dropout, rng_, keep_ ? &cache_.source_mask : nullptr);
    for (size_t l = 0; l < p_.encoder.size(); ++l) {
      const auto& layer = p_.encoder[l];
      auto* c = keep_ ? &cache_.encoder[l] : nullptr;
      Matrix<T> a = LayerNormForward(layer.self_attn_norm, x,
                                     c ? &c->attn_norm : nullptr);
      Matrix<T> s = AttentionForward<T>(layer.self_attn, a, nullptr, src, src,
                                     false, config_.heads, c ? &c->attn : nullptr);
      Dropout(s, config_.dropout, rng_, c ? &c->attn_mask : nullptr);
      x += s;
      Matrix<T> b =
          LayerNormForward(layer.ffn_norm, x, c ? &c->ffn_norm : nullptr);
      Matrix<T> f = FeedForwardForward(layer.ffn, b, c ? &c->ffn : nullptr);
      Dropout(f, config_.dropout, rng_, c ? &c->ffn_mask : nullptr);
      x += f;
    }
    Matrix<T> memory = LayerNormForward(p_.encoder_norm, x,
                                        keep_ ? &cache_.encoder_norm : nullptr);
    if (keep_) cache_.memory = memory;
    return memory;
  }

  Matrix<T> TargetInputs(const std::vector<TokenId>& ids,
                         const Segments& tgt) const {
    Matrix<T> y(static_cast<Eigen::Index>(ids.size()), p_.embedding.cols());
    for (size_t s = 0; s < tgt.count(); ++s) {
      for (Eigen::Index t = 0; t < tgt.length(s); ++t) {
        const Eigen::Index row = tgt.begin(s) + t;
        if (t + 1 >= sinusoid_.rows()) {
          throw std::invalid_argument("target longer than the maximum length");
        }
        y.row(row) = scale_ * p_.embedding.row(ids[row]) + sinusoid_.row(t + 1);
      }
    }
    return y;
  }

  // Returns the final decoder states (before the output projection).
  Matrix<T> Decode(Matrix<T> y, const Matrix<T>& memory, const Segments& src,
                   const Segments& tgt) {
    cache_.decoder.resize(p_.decoder.size());
    Dropout(y, config_.dropout, rng_, keep_ ? &cache_.target_mask : nullptr);
    for (size_t l = 0; l < p_.decoder.size(); ++l) {
      const auto& layer = p_.decoder[l];
      auto* c = keep_ ? &cache_.decoder[l] : nullptr;
      Matrix<T> a = LayerNormForward(layer.self_attn_norm, y,
                                     c ? &c->self_norm : nullptr);
      Matrix<T> s =
          AttentionForward<T>(layer.self_attn, a, nullptr, tgt, tgt, true,
                           config_.heads, c ? &c->self_attn : nullptr);
      Dropout(s, config_.dropout, rng_, c ? &c->self_mask : nullptr);
      y += s;
      Matrix<T> b = LayerNormForward(layer.cross_attn_norm, y,
                                     c ? &c->cross_norm : nullptr);
      Matrix<T> e =
          AttentionForward<T>(layer.cross_attn, b, &memory, tgt, src, false,
                           config_.heads, c ? &c->cross_attn : nullptr);
      Dropout(e, config_.dropout, rng_, c ? &c->cross_mask : nullptr);
      y += e;
      Matrix<T> g =
          LayerNormForward(layer.ffn_norm, y, c ? &c->ffn_norm : nullptr);
      Matrix<T> f = FeedForwardForward(layer.ffn, g, c ? &c->ffn : nullptr);
      Dropout(f, config_.dropout, rng_, c ? &c->ffn_mask : nullptr);
      y += f;
    }
    Matrix<T> z = LayerNormForward(p_.decoder_norm, y,
                                   keep_ ? &cache_.decoder_norm : nullptr);
    if (keep_) cache_.final_states = z;
    return z;
  }

  // Backpropagates from d(final decoder states). Returns d(source rows) and
  // d(target input rows) through the out-parameters.
  void Backward(const Matrix<T>& dz, const Segments& src, const Segments& tgt,
                TransformerParams<T>* g, Matrix<T>* dsource, Matrix<T>* dtarget) {
    Matrix<T> dy = LayerNormBackward(p_.decoder_norm, cache_.decoder_norm, dz,
                                     &g->decoder_norm);
    Matrix<T> dmemory = Matrix<T>::Zero(cache_.memory.rows(), cache_.memory.cols());
    for (size_t l = p_.decoder.size(); l-- > 0;) {
      const auto& layer = p_.decoder[l];
      auto& gl = g->decoder[l];
      const auto& c = cache_.decoder[l];
      Matrix<T> df = DropoutBackward(dy, c.ffn_mask);
      Matrix<T> dg = FeedForwardBackward(layer.ffn, c.ffn, df, &gl.ffn);
      dy += LayerNormBackward(layer.ffn_norm, c.ffn_norm, dg, &gl.ffn_norm);

      Matrix<T> de = DropoutBackward(dy, c.cross_mask);
      Matrix<T> dmem_part;
      Matrix<T> db = AttentionBackward(layer.cross_attn, c.cross_attn, de, tgt,
                                       src, config_.heads, &gl.cross_attn,
                                       &dmem_part);
      dmemory += dmem_part;
      dy += LayerNormBackward(layer.cross_attn_norm, c.cross_norm, db,
                              &gl.cross_attn_norm);

      Matrix<T> ds = DropoutBackward(dy, c.self_mask);
      Matrix<T> dkv;
      Matrix<T> da = AttentionBackward(layer.self_attn, c.self_attn, ds, tgt,
                                       tgt, config_.heads, &gl.self_attn, &dkv);
      da += dkv;
      dy += LayerNormBackward(layer.self_attn_norm, c.self_norm, da,
                              &gl.self_attn_norm);
    }
    *dtarget = DropoutBackward(dy, cache_.target_mask);

    Matrix<T> dx = LayerNormBackward(p_.encoder_norm, cache_.encoder_norm,
                                     dmemory, &g->encoder_norm);
    for (size_t l = p_.encoder.size(); l-- > 0;) {
      const auto& layer = p_.encoder[l];
      auto& gl = g->encoder[l];
      const auto& c = cache_.encoder[l];
      Matrix<T> df = DropoutBackward(dx, c.ffn_mask);
      Matrix<T> db = FeedForwardBackward(layer.ffn, c.ffn, df, &gl.ffn);
      dx += LayerNormBackward(layer.ffn_norm, c.ffn_norm, db, &gl.ffn_norm);
      Matrix<T> ds = DropoutBackward(dx, c.attn_mask);
      Matrix<T> dkv;
      Matrix<T> da = AttentionBackward(layer.self_attn, c.attn, ds, src, src,
                                       config_.heads, &gl.self_attn, &dkv);
      da += dkv;
      dx += LayerNormBackward(layer.self_attn_norm, c.attn_norm, da,
                              &gl.self_attn_norm);
    }
    *dsource = DropoutBackward(dx, cache_.source_mask);
  }

 private:
  const TransformerParams<T>& p_;
  const ModelConfig& config_;
  const Matrix<T>& sinusoid_;
  T scale_;
  Rng* rng_;
  bool keep_;
  PassCache<T> cache_;
};

template <typename T>
void InitializeParams(TransformerParams<T>& params, uint64_t seed) {
  Rng rng(DeriveSeed(seed, "init"));
  for (auto& slot : params.Slots()) {
    auto values = Eigen::Map<Matrix<T>>(slot.data, slot.rows, slot.cols);
    const auto ends_with = [&](std::string_view suffix) {
      return slot.name.size() >= suffix.size() &&
             slot.name.compare(slot.name.size() - suffix.size(), suffix.size(),
                               suffix) == 0;
    };
    if (slot.name == "embedding" || slot.name == "definition_positions") {
      std::normal_distribution<double> normal(
          0.0, 1.0 / std::sqrt(static_cast<double>(slot.cols)));
      for (Eigen::Index i = 0; i < values.size(); ++i) {
        values.data()[i] = static_cast<T>(normal(rng));
      }
    } else if (ends_with(".gain")) {
      values.setOnes();
    } else if (ends_with(".weight")) {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(slot.rows + slot.cols));
      std::uniform_real_distribution<double> uniform(-limit, limit);
      for (Eigen::Index i = 0; i < values.size(); ++i) {
        values.data()[i] = static_cast<T>(uniform(rng));
      }
    } else {
      values.setZero();
    }
  }
}

}  // namespace

template <typename T>
std::vector<TensorSlot<T>> TransformerParams<T>::Slots() {
  std::vector<TensorSlot<T>> slots;
  AddSlot(slots, "embedding", embedding);
  AddSlot(slots, "definition_positions", definition_positions);
  for (size_t l = 0; l < encoder.size(); ++l) {
    const std::string prefix = "encoder." + std::to_string(l);
    auto& layer = encoder[l];
    AddNorm(slots, prefix + ".self_attn_norm", layer.self_attn_norm);
    AddAttention(slots, prefix + ".self_attn", layer.self_attn);
    AddNorm(slots, prefix + ".ffn_norm", layer.ffn_norm);
    AddLinear(slots, prefix + ".ffn.inner", layer.ffn.inner);
    AddLinear(slots, prefix + ".ffn.outer", layer.ffn.outer);
  }
  AddNorm(slots, "encoder_norm", encoder_norm);
  for (size_t l = 0; l < decoder.size(); ++l) {
    const std::string prefix = "decoder." + std::to_string(l);
    auto& layer = decoder[l];
    AddNorm(slots, prefix + ".self_attn_norm", layer.self_attn_norm);
    AddAttention(slots, prefix + ".self_attn", layer.self_attn);
    AddNorm(slots, prefix + ".cross_attn_norm", layer.cross_attn_norm);
    AddAttention(slots, prefix + ".cross_attn", layer.cross_attn);
    AddNorm(slots, prefix + ".ffn_norm", layer.ffn_norm);
    AddLinear(slots, prefix + ".ffn.inner", layer.ffn.inner);
    AddLinear(slots, prefix + ".ffn.outer", layer.ffn.outer);
  }
  AddNorm(slots, "decoder_norm", decoder_norm);
  return slots;
}

template <typename T>
void TransformerParams<T>::SetZero() {
  for (auto& slot : Slots()) std::fill(slot.data, slot.data + slot.size(), T(0));
}

template <typename T>
size_t TransformerParams<T>::NumValues() {
  size_t total = 0;
  for (const auto& slot : Slots()) total += static_cast<size_t>(slot.size());
  return total;
}

template <typename T>
TransformerParams<T> ZeroParams(const ModelConfig& config, size_t vocab_size) {
  const size_t d = config.d_model;
  TransformerParams<T> p;
  p.embedding = Matrix<T>::Zero(vocab_size, d);
  p.definition_positions = Matrix<T>::Zero(kMaxDefinitionLength, d);
  for (size_t l = 0; l < config.encoder_layers; ++l) {
    p.encoder.push_back({ZeroNorm<T>(d), ZeroAttention<T>(d), ZeroNorm<T>(d),
                         {ZeroLinear<T>(d, config.ffn_dim),
                          ZeroLinear<T>(config.ffn_dim, d)}});
  }
  p.encoder_norm = ZeroNorm<T>(d);
  for (size_t l = 0; l < config.decoder_layers; ++l) {
    p.decoder.push_back({ZeroNorm<T>(d), ZeroAttention<T>(d), ZeroNorm<T>(d),
                         ZeroAttention<T>(d), ZeroNorm<T>(d),
                         {ZeroLinear<T>(d, config.ffn_dim),
                          ZeroLinear<T>(config.ffn_dim, d)}});
  }
  p.decoder_norm = ZeroNorm<T>(d);
  return p;
}

template <typename T>
Transformer<T>::Transformer(const ModelConfig& config, size_t vocab_size)
    : Transformer(config, ZeroParams<T>(config, vocab_size)) {
  InitializeParams(params_, config_.seed);
}

template <typename T>
Transformer<T>::Transformer(const ModelConfig& config, TransformerParams<T> params)
    : config_(config),
      params_(std::move(params)),
      sinusoid_(SinusoidalTable<T>(config.max_length, config.d_model)),
      embedding_scale_(static_cast<T>(std::sqrt(static_cast<double>(config.d_model)))) {
  config_.Validate();
  if (params_.embedding.cols() != static_cast<Eigen::Index>(config_.d_model) ||
      params_.encoder.size() != config_.encoder_layers ||
      params_.decoder.size() != config_.decoder_layers) {
    throw std::invalid_argument("parameter shapes do not match the model config");
  }
}

template <typename T>
EmbeddingTables<T> Transformer<T>::tables() const {
  return {&params_.embedding, &params_.definition_positions, &sinusoid_,
          embedding_scale_};
}

template <typename T>
EncodedSequence<T> Transformer<T>::Encode(const EncodedSource& source) const {
  return EncodeSentence(tables(), source, config_.max_length);
}

template <typename T>
Matrix<T> Transformer<T>::Forward(const Eigen::Ref<const Matrix<T>>& source_rows,
                                  const std::vector<TokenId>& prefix) const {
  if (source_rows.cols() != static_cast<Eigen::Index>(config_.d_model)) {
    throw std::invalid_argument("source rows have the wrong dimension");
  }
  if (source_rows.rows() == 0 || prefix.empty()) {
    throw std::invalid_argument("empty source or target prefix");
  }
  if (prefix.size() > config_.max_length) {
    throw std::invalid_argument("target prefix exceeds the maximum length");
  }
  for (TokenId id : prefix) {
    if (id < 0 || static_cast<size_t>(id) >= vocab_size()) {
      throw std::invalid_argument("target token id out of range");
    }
  }
  Segments src, tgt;
  src.Add(source_rows.rows());
  tgt.Add(static_cast<Eigen::Index>(prefix.size()));
  Pass<T> pass(params_, config_, sinusoid_, embedding_scale_, nullptr, false);
  const Matrix<T> memory = pass.Encode(Matrix<T>(source_rows), src);
  const Matrix<T> z = pass.Decode(pass.TargetInputs(prefix, tgt), memory, src, tgt);
  Matrix<T> probs(z.rows(), params_.embedding.rows());
  probs.noalias() = z * params_.embedding.transpose();
  SoftmaxRows(probs);
  return probs;
}

template <typename T>
LossStats Transformer<T>::ComputeGradients(
    std::span<const TrainingExample* const> batch, TransformerParams<T>* grads,
    Rng* dropout_rng) const {
  LossStats stats;
  if (batch.empty()) return stats;
  const Eigen::Index d = static_cast<Eigen::Index>(config_.d_model);
  Segments src, tgt;
  std::vector<EncodedSequence<T>> encoded;
  encoded.reserve(batch.size());
  std::vector<TokenId> inputs, labels;
  for (const TrainingExample* example : batch) {
    encoded.push_back(Encode(example->source));
    src.Add(static_cast<Eigen::Index>(encoded.back().size()));
    if (example->target.size() + 1 > config_.max_length) {
      throw std::invalid_argument("target exceeds the maximum length");
    }
    inputs.push_back(Vocabulary::kBos);
    inputs.insert(inputs.end(), example->target.begin(), example->target.end());
    labels.insert(labels.end(), example->target.begin(), example->target.end());
    labels.push_back(Vocabulary::kEos);
    tgt.Add(static_cast<Eigen::Index>(example->target.size() + 1));
  }
  for (TokenId id : inputs) {
    if (id < 0 || static_cast<size_t>(id) >= vocab_size()) {
      throw std::invalid_argument("target token id out of range");
    }
  }
  Matrix<T> source_rows(src.total(), d);
  for (size_t s = 0; s < encoded.size(); ++s) {
    source_rows.middleRows(src.begin(s), src.length(s)) = encoded[s].rows;
  }

  const bool backward = grads != nullptr;
  Pass<T> pass(params_, config_, sinusoid_, embedding_scale_, dropout_rng, backward);
  const Matrix<T> memory = pass.Encode(std::move(source_rows), src);
  const Matrix<T> z = pass.Decode(pass.TargetInputs(inputs, tgt), memory, src, tgt);
  Matrix<T> logits(z.rows(), params_.embedding.rows());
  logits.noalias() = z * params_.embedding.transpose();

  const double smoothing = config_.label_smoothing;
  const Eigen::Index vocab = logits.cols();
  const T on_target = static_cast<T>(1.0 - smoothing);
  const T uniform = static_cast<T>(smoothing / static_cast<double>(vocab));
  const T inv_tokens = T(1) / static_cast<T>(labels.size());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const T max = logits.row(t).maxCoeff();
    const T log_sum =
        max + std::log((logits.row(t).array() - max).exp().sum());
    const TokenId label = labels[t];
    const double log_p_label = static_cast<double>(logits(t, label) - log_sum);
    const double sum_log_p =
        static_cast<double>(logits.row(t).sum() - static_cast<T>(vocab) * log_sum);
    stats.nll -= log_p_label;
    stats.loss -= (1.0 - smoothing) * log_p_label +
                  smoothing / static_cast<double>(vocab) * sum_log_p;
    if (backward) {
      // d loss / d logits = softmax - smoothed target.
      logits.row(t) = (logits.row(t).array() - log_sum).exp() - uniform;
      logits(t, label) -= on_target;
      logits.row(t) *= inv_tokens;
    }
  }
  stats.tokens = labels.size();
  if (!backward) return stats;

  const Matrix<T>& dlogits = logits;
  grads->embedding.noalias() += dlogits.transpose() * z;
  Matrix<T> dz(z.rows(), d);
  dz.noalias() = dlogits * params_.embedding;
  Matrix<T> dsource, dtarget;
  pass.Backward(dz, src, tgt, grads, &dsource, &dtarget);
  for (Eigen::Index t = 0; t < dtarget.rows(); ++t) {
    grads->embedding.row(inputs[t]) += embedding_scale_ * dtarget.row(t);
  }
  for (size_t s = 0; s < encoded.size(); ++s) {
    AccumulateEncodingGradients<T>(
        encoded[s].provenance, dsource.middleRows(src.begin(s), src.length(s)),
        embedding_scale_, &grads->embedding, &grads->definition_positions);
  }
  return stats;
}

template <typename T>
Transformer<T>::DecodeSession::DecodeSession(const Transformer<T>& model,
                                             const EncodedSequence<T>& source)
    : model_(model) {
  if (source.rows.rows() == 0) throw std::invalid_argument("empty source");
  Segments src;
  src.Add(source.rows.rows());
  Pass<T> pass(model.params_, model.config_, model.sinusoid_,
               model.embedding_scale_, nullptr, false);
  memory_ = pass.Encode(source.rows, src);
  for (const auto& layer : model.params_.decoder) {
    cross_keys_.push_back(LinearForward(layer.cross_attn.key, memory_));
    cross_values_.push_back(LinearForward(layer.cross_attn.value, memory_));
  }
}

template <typename T>
typename Transformer<T>::DecodeSession::State
Transformer<T>::DecodeSession::Start() const {
  State state;
  const Eigen::Index d = static_cast<Eigen::Index>(model_.config_.d_model);
  const Eigen::Index rows = static_cast<Eigen::Index>(max_steps());
  for (size_t l = 0; l < model_.params_.decoder.size(); ++l) {
    state.keys.emplace_back(rows, d);
    state.values.emplace_back(rows, d);
  }
  return state;
}

template <typename T>
size_t Transformer<T>::DecodeSession::max_steps() const {
  return model_.config_.max_length;
}

template <typename T>
RowVector<T> Transformer<T>::DecodeSession::Step(
    State* state, TokenId token,
    std::vector<std::vector<RowVector<T>>>* cross_attention) const {
  const auto& params = model_.params_;
  const size_t heads = model_.config_.heads;
  const Eigen::Index t = static_cast<Eigen::Index>(state->steps);
  if (state->steps >= max_steps()) {
    throw std::out_of_range("decoder exceeded the maximum length");
  }
  if (token < 0 || token >= params.embedding.rows()) {
    throw std::invalid_argument("token id out of range");
  }
  const Eigen::Index d = params.embedding.cols();
  const Eigen::Index dh = d / static_cast<Eigen::Index>(heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Matrix<T> y = model_.embedding_scale_ * params.embedding.row(token) +
                model_.sinusoid_.row(t + 1);
  if (cross_attention != nullptr) {
    cross_attention->assign(params.decoder.size(), {});
  }
  for (size_t l = 0; l < params.decoder.size(); ++l) {
    const auto& layer = params.decoder[l];
    const Matrix<T> a = LayerNormForward<T>(layer.self_attn_norm, y, nullptr);
    const Matrix<T> q = LinearForward(layer.self_attn.query, a);
    state->keys[l].row(t) = LinearForward(layer.self_attn.key, a).row(0);
    state->values[l].row(t) = LinearForward(layer.self_attn.value, a).row(0);
    Matrix<T> context(1, d);
    for (size_t h = 0; h < heads; ++h) {
      const Eigen::Index col = static_cast<Eigen::Index>(h) * dh;
      Matrix<T> scores(1, t + 1);
      scores.noalias() = q.block(0, col, 1, dh) *
                         state->keys[l].block(0, col, t + 1, dh).transpose();
      scores *= scale;
      SoftmaxRows(scores);
      context.block(0, col, 1, dh).noalias() =
          scores * state->values[l].block(0, col, t + 1, dh);
    }
    y += LinearForward(layer.self_attn.output, context);

    const Matrix<T> b = LayerNormForward<T>(layer.cross_attn_norm, y, nullptr);
    const Matrix<T> cq = LinearForward(layer.cross_attn.query, b);
    const Eigen::Index rows = memory_.rows();
    for (size_t h = 0; h < heads; ++h) {
      const Eigen::Index col = static_cast<Eigen::Index>(h) * dh;
      Matrix<T> scores(1, rows);
      scores.noalias() = cq.block(0, col, 1, dh) *
                         cross_keys_[l].block(0, col, rows, dh).transpose();
      scores *= scale;
      SoftmaxRows(scores);
      context.block(0, col, 1, dh).noalias() =
          scores * cross_values_[l].block(0, col, rows, dh);
      if (cross_attention != nullptr) {
        (*cross_attention)[l].push_back(scores.row(0));
      }
    }
    y += LinearForward(layer.cross_attn.output, context);

    const Matrix<T> g = LayerNormForward<T>(layer.ffn_norm, y, nullptr);
    y += FeedForwardForward<T>(layer.ffn, g, nullptr);
  }
  const Matrix<T> z = LayerNormForward<T>(params.decoder_norm, y, nullptr);
  RowVector<T> logits = z.row(0) * params.embedding.transpose();
  const T max = logits.maxCoeff();
  const T log_sum = max + std::log((logits.array() - max).exp().sum());
  logits.array() -= log_sum;
  ++state->steps;
  return logits;
}

template struct TransformerParams<float>;
template struct TransformerParams<double>;
template TransformerParams<float> ZeroParams<float>(const ModelConfig&, size_t);
template TransformerParams<double> ZeroParams<double>(const ModelConfig&, size_t);
template class Transformer<float>;
template class Transformer<double>;

}  // namespace dictattach

#include "snz/model.hpp"

#include <cmath>

#include "snz/error.hpp"

namespace snz {

ModelConfig ModelConfig::default_preset() {
  ModelConfig c;
  c.preset = "default";
  for (int i = 0; i < 3; ++i) c.blocks.push_back({64, i == 0 ? 2 : 1});
  for (int i = 0; i < 4; ++i) c.blocks.push_back({128, i == 0 ? 3 : 1});
  for (int i = 0; i < 6; ++i) c.blocks.push_back({256, 1});
  for (int i = 0; i < 3; ++i) c.blocks.push_back({0, i == 0 ? 5 : 1});
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.preset = "tiny";
  c.conv1_channels = 16;
  c.blocks = {{16, 2}, {24, 3}, {32, 5}, {0, 1}};
  c.out_dims = {16, 16, 32};
  c.d_model = 64;
  c.layers = 2;
  c.feedforward = 128;
  c.heads = 4;
  c.hidden = 16;
  return c;
}

ModelConfig ModelConfig::from_preset(std::string_view name) {
  if (name == "default") return default_preset();
  if (name == "tiny") return tiny();
  fail(ErrorCode::invalid_config, "unknown model preset '" + std::string(name) + "' (expected default or tiny)");
}

int ModelConfig::total_stride() const {
  int s = conv1_stride * pool_stride;
  for (const auto& b : blocks) s *= b.stride;
  return s;
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::invalid_config, "model config: " + m); };
  if (total_stride() != kSamplesPerEpoch) bad("stride product " + std::to_string(total_stride()) + " must be 120");
  if (out_dims[0] + out_dims[1] + out_dims[2] != d_model) bad("extractor widths must sum to d_model");
  if (d_model % 2 != 0) bad("d_model must be even");
  if (heads < 1 || d_model % heads != 0) bad("d_model must be divisible by heads");
  if (conv1_channels < 1 || conv1_kernel < 1 || conv1_kernel % 2 == 0) bad("conv1 must have positive channels and odd kernel");
  if (pool_kernel < 1 || pool_kernel % 2 == 0) bad("pool kernel must be odd");
  if (blocks.empty()) bad("at least one residual block is required");
  for (const auto& b : blocks) {
    if (b.channels < 0 || b.stride < 1) bad("blocks need non-negative channels and positive stride");
  }
  for (int d : out_dims) {
    if (d < 1) bad("extractor widths must be positive");
  }
  if (layers < 0 || feedforward < 1 || hidden < 1 || classes < 2) bad("encoder/classifier sizes must be positive");
  if (!(dropout >= 0 && dropout < 1)) bad("dropout must be in [0, 1)");
}

// ---- ParamStore ----------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> ParamStore<Scalar>::add(std::string name, Shape shape, bool trainable) {
  for (const auto& e : entries_) {
    if (e.name == name) fail(ErrorCode::invalid_config, "duplicate parameter " + name);
  }
  Tensor<Scalar> t = Tensor<Scalar>::zeros(std::move(shape), trainable);
  entries_.push_back({std::move(name), t, trainable});
  return t;
}

template <typename Scalar>
const typename ParamStore<Scalar>::Entry* ParamStore<Scalar>::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> ParamStore<Scalar>::trainable() const {
  std::vector<Tensor<Scalar>> out;
  for (const auto& e : entries_) {
    if (e.trainable) out.push_back(e.tensor);
  }
  return out;
}

template <typename Scalar>
Eigen::Index ParamStore<Scalar>::trainable_count() const {
  Eigen::Index n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.tensor.numel();
  }
  return n;
}

template <typename Scalar>
void ParamStore<Scalar>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

// ---- inputs ------------------------------------------------------------------------------

template <typename Scalar>
ModelInput<Scalar> make_input(const std::vector<const ComponentSet*>& batch) {
  if (batch.empty()) fail(ErrorCode::invalid_input, "model input needs at least one component set");
  const Eigen::Index len = batch[0]->heartbeat.size();
  for (const ComponentSet* c : batch) {
    c->validate();
    if (c->heartbeat.size() != len) {
      fail(ErrorCode::shape, "batch items differ in length: " + std::to_string(len) + " vs " + std::to_string(c->heartbeat.size()));
    }
  }
  if (len == 0 || len % kSamplesPerEpoch != 0) {
    fail(ErrorCode::shape, "component length " + std::to_string(len) + " is not a positive multiple of 120");
  }
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  using Vector = typename Tensor<Scalar>::Vector;
  Vector v1(b * 2 * len), v2(b * 2 * len), v3(b * 3 * len);
  for (Eigen::Index i = 0; i < b; ++i) {
    const ComponentSet& c = *batch[static_cast<std::size_t>(i)];
    const Vector hb = (c.heartbeat.samples / 1000.0).template cast<Scalar>();
    const Vector br = c.breath.samples.template cast<Scalar>();
    const Vector mv = c.movement.values.template cast<Scalar>();
    v1.segment((2 * i) * len, len) = hb;
    v1.segment((2 * i + 1) * len, len) = mv;
    v2.segment((2 * i) * len, len) = br;
    v2.segment((2 * i + 1) * len, len) = mv;
    v3.segment((3 * i) * len, len) = hb;
    v3.segment((3 * i + 1) * len, len) = br;
    v3.segment((3 * i + 2) * len, len) = mv;
  }
  return {Tensor<Scalar>::from({b, 2, len}, std::move(v1)), Tensor<Scalar>::from({b, 2, len}, std::move(v2)),
          Tensor<Scalar>::from({b, 3, len}, std::move(v3))};
}

RowMatrixXd positional_encoding(Eigen::Index steps, int d_model) {
  if (d_model <= 0 || d_model % 2 != 0) fail(ErrorCode::invalid_config, "positional encoding needs a positive even width");
  RowMatrixXd e(steps, d_model);
  for (int k = 0; k < d_model / 2; ++k) {
    const double freq = std::pow(10000.0, -2.0 * k / d_model);
    for (Eigen::Index t = 0; t < steps; ++t) {
      e(t, 2 * k) = std::sin(static_cast<double>(t) * freq);
      e(t, 2 * k + 1) = std::cos(static_cast<double>(t) * freq);
    }
  }
  return e;
}

// ---- SleepNet construction -------------------------------------------------------------------

template <typename Scalar>
typename SleepNet<Scalar>::Conv SleepNet<Scalar>::make_conv(const std::string& name, int cin, int cout, int kernel, int stride,
                                                           int padding, KeyedRng& rng) {
  Conv c;
  c.weight = params_.add(name + ".weight", {cout, cin, kernel}, true);
  c.stride = stride;
  c.padding = padding;
  // Kaiming normal, fan-out mode, ReLU gain.
  KeyedRng r = rng.split(name);
  const double sd = std::sqrt(2.0 / (static_cast<double>(cout) * kernel));
  for (auto& w : c.weight.value()) w = static_cast<Scalar>(sd * r.normal());
  return c;
}

template <typename Scalar>
typename SleepNet<Scalar>::Norm SleepNet<Scalar>::make_norm(const std::string& name, int channels) {
  Norm n;
  n.gamma = params_.add(name + ".weight", {channels}, true);
  n.gamma.value().setOnes();
  n.beta = params_.add(name + ".bias", {channels}, true);
  n.stats.running_mean = params_.add(name + ".running_mean", {channels}, false);
  n.stats.running_var = params_.add(name + ".running_var", {channels}, false);
  n.stats.running_var.value().setOnes();
  return n;
}

template <typename Scalar>
typename SleepNet<Scalar>::Linear SleepNet<Scalar>::make_linear(const std::string& name, int in, int out, KeyedRng& rng) {
  Linear l;
  l.weight = params_.add(name + ".weight", {out, in}, true);
  l.bias = params_.add(name + ".bias", {out}, true);
  KeyedRng r = rng.split(name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& w : l.weight.value()) w = static_cast<Scalar>(r.uniform(-bound, bound));
  for (auto& w : l.bias.value()) w = static_cast<Scalar>(r.uniform(-bound, bound));
  return l;
}

template <typename Scalar>
typename SleepNet<Scalar>::LayerNorm SleepNet<Scalar>::make_layer_norm(const std::string& name, int width) {
  LayerNorm l;
  l.gamma = params_.add(name + ".weight", {width}, true);
  l.gamma.value().setOnes();
  l.beta = params_.add(name + ".bias", {width}, true);
  return l;
}

template <typename Scalar>
SleepNet<Scalar>::SleepNet(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  KeyedRng rng(seed);
  const std::array<int, 3> in_channels{2, 2, 3};
  for (int k = 0; k < 3; ++k) {
    const std::string p = "f" + std::to_string(k + 1);
    Extractor& ex = extractors_[static_cast<std::size_t>(k)];
    ex.conv1 = make_conv(p + ".conv1", in_channels[static_cast<std::size_t>(k)], cfg_.conv1_channels, cfg_.conv1_kernel,
                         cfg_.conv1_stride, cfg_.conv1_kernel / 2, rng);
    ex.bn1 = make_norm(p + ".bn1", cfg_.conv1_channels);
    int cin = cfg_.conv1_channels;
    for (std::size_t i = 0; i < cfg_.blocks.size(); ++i) {
      const BlockSpec& spec = cfg_.blocks[i];
      const int cout = spec.channels > 0 ? spec.channels : cfg_.out_dims[static_cast<std::size_t>(k)];
      const std::string b = p + ".blocks." + std::to_string(i);
      Block blk;
      blk.conv1 = make_conv(b + ".conv1", cin, cout, 3, spec.stride, 1, rng);
      blk.bn1 = make_norm(b + ".bn1", cout);
      blk.conv2 = make_conv(b + ".conv2", cout, cout, 3, 1, 1, rng);
      blk.bn2 = make_norm(b + ".bn2", cout);
      blk.project = spec.stride != 1 || cin != cout;
      if (blk.project) {
        blk.proj = make_conv(b + ".proj", cin, cout, 1, spec.stride, 0, rng);
        blk.proj_bn = make_norm(b + ".proj_bn", cout);
      }
      ex.blocks.push_back(std::move(blk));
      cin = cout;
    }
  }
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    EncoderLayer layer;
    layer.q = make_linear(p + ".attn.q", cfg_.d_model, cfg_.d_model, rng);
    layer.k = make_linear(p + ".attn.k", cfg_.d_model, cfg_.d_model, rng);
    layer.v = make_linear(p + ".attn.v", cfg_.d_model, cfg_.d_model, rng);
    layer.out = make_linear(p + ".attn.out", cfg_.d_model, cfg_.d_model, rng);
    layer.ln1 = make_layer_norm(p + ".ln1", cfg_.d_model);
    layer.ff1 = make_linear(p + ".ff1", cfg_.d_model, cfg_.feedforward, rng);
    layer.ff2 = make_linear(p + ".ff2", cfg_.feedforward, cfg_.d_model, rng);
    layer.ln2 = make_layer_norm(p + ".ln2", cfg_.d_model);
    encoder_.push_back(std::move(layer));
  }
  fc1_ = make_linear("head.fc1", cfg_.d_model, cfg_.hidden, rng);
  fc2_ = make_linear("head.fc2", cfg_.hidden, cfg_.classes, rng);
}

// ---- forward ---------------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> SleepNet<Scalar>::norm(const Tensor<Scalar>& x, Norm& n, bool train) {
  return batchnorm1d(x, n.gamma, n.beta, n.stats, train);
}

template <typename Scalar>
Tensor<Scalar> SleepNet<Scalar>::resfeat(int k, const Tensor<Scalar>& x, bool train) {
  if (k < 0 || k > 2) fail(ErrorCode::invalid_input, "extractor index must be 0, 1 or 2");
  Extractor& ex = extractors_[static_cast<std::size_t>(k)];
  if (x.rank() != 3 || x.dim(1) != ex.conv1.weight.dim(1)) {
    fail(ErrorCode::shape, "extractor f" + std::to_string(k + 1) + " expects [B, " + std::to_string(ex.conv1.weight.dim(1)) +
                               ", L], got " + shape_string(x.shape()));
  }
  if (x.dim(2) % kSamplesPerEpoch != 0) {
    fail(ErrorCode::shape, "input length " + std::to_string(x.dim(2)) + " is not divisible by 120");
  }
  const Tensor<Scalar> none;
  Tensor<Scalar> h = conv1d(x, ex.conv1.weight, none, ex.conv1.stride, ex.conv1.padding);
  h = relu(norm(h, ex.bn1, train));
  h = maxpool1d(h, cfg_.pool_kernel, cfg_.pool_stride, cfg_.pool_kernel / 2);
  for (Block& b : ex.blocks) {
    Tensor<Scalar> y = relu(norm(conv1d(h, b.conv1.weight, none, b.conv1.stride, b.conv1.padding), b.bn1, train));
    y = norm(conv1d(y, b.conv2.weight, none, 1, 1), b.bn2, train);
    Tensor<Scalar> skip = b.project ? norm(conv1d(h, b.proj.weight, none, b.proj.stride, 0), b.proj_bn, train) : h;
    h = relu(add(y, skip));
  }
  return transpose12(h);
}

template <typename Scalar>
Tensor<Scalar> SleepNet<Scalar>::features(const ModelInput<Scalar>& in, bool train) {
  return concat<Scalar>({resfeat(0, in.f1, train), resfeat(1, in.f2, train), resfeat(2, in.f3, train)}, -1);
}

template <typename Scalar>
Tensor<Scalar> SleepNet<Scalar>::encoder_layer(const Tensor<Scalar>& x, EncoderLayer& L, bool train, KeyedRng* rng) {
  KeyedRng fallback(0);
  KeyedRng& r = rng ? *rng : fallback;
  const double p = cfg_.dropout;
  Tensor<Scalar> a = attention(linear(x, L.q.weight, L.q.bias), linear(x, L.k.weight, L.k.bias), linear(x, L.v.weight, L.v.bias),
                               cfg_.heads, p, train, r);
  a = linear(a, L.out.weight, L.out.bias);
  Tensor<Scalar> h = layer_norm(add(x, dropout(a, p, train, r)), L.ln1.gamma, L.ln1.beta);
  Tensor<Scalar> f = dropout(relu(linear(h, L.ff1.weight, L.ff1.bias)), p, train, r);
  f = linear(f, L.ff2.weight, L.ff2.bias);
  return layer_norm(add(h, dropout(f, p, train, r)), L.ln2.gamma, L.ln2.beta);
}

template <typename Scalar>
Tensor<Scalar> SleepNet<Scalar>::logits(const ModelInput<Scalar>& in, bool train, KeyedRng* rng) {
  if (train && cfg_.dropout > 0 && !rng) fail(ErrorCode::invalid_input, "training forward needs a dropout generator");
  Tensor<Scalar> z = features(in, train);
  const RowMatrixXd pe = positional_encoding(z.dim(1), cfg_.d_model);
  z = add_broadcast_constant(z, Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>(pe.template cast<Scalar>()));
  for (EncoderLayer& layer : encoder_) z = encoder_layer(z, layer, train, rng);
  return linear(relu(linear(z, fc1_.weight, fc1_.bias)), fc2_.weight, fc2_.bias);
}

template <typename Scalar>
Tensor<Scalar> SleepNet<Scalar>::forward(const ModelInput<Scalar>& in, bool train, KeyedRng* rng) {
  return softmax(logits(in, train, rng), -1);
}

template <typename Scalar>
template <typename Other>
void SleepNet<Scalar>::load_values(const ParamStore<Other>& src) {
  for (auto& e : params_.entries()) {
    const auto* s = src.find(e.name);
    if (!s) fail(ErrorCode::count_mismatch, "parameter " + e.name + " missing from source");
    if (s->tensor.shape() != e.tensor.shape()) {
      fail(ErrorCode::shape, "parameter " + e.name + ": " + shape_string(s->tensor.shape()) + " vs " + shape_string(e.tensor.shape()));
    }
    e.tensor.value() = s->tensor.value().template cast<Scalar>();
  }
  if (src.entries().size() != params_.entries().size()) {
    fail(ErrorCode::count_mismatch, "source has " + std::to_string(src.entries().size()) + " tensors, model has " +
                                        std::to_string(params_.entries().size()));
  }
}

// ---- prediction --------------------------------------------------------------------------------

StageSequence predict(const Eigen::Ref<const RowMatrixXd>& scores) {
  if (scores.cols() != kNumStages) fail(ErrorCode::shape, "predict expects 5 class columns, got " + std::to_string(scores.cols()));
  StageSequence y;
  y.stages.reserve(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index t = 0; t < scores.rows(); ++t) {
    int best = 0;
    for (int c = 1; c < kNumStages; ++c) {
      if (scores(t, c) > scores(t, best)) best = c;
    }
    y.stages.push_back(stage_from_code(best));
  }
  return y;
}

template <typename Scalar>
StageSequence predict(const Tensor<Scalar>& scores) {
  if (scores.rank() == 3 && scores.dim(0) != 1) fail(ErrorCode::shape, "predict takes a single record, got " + shape_string(scores.shape()));
  const Eigen::Index c = scores.dim(-1);
  const Eigen::Index rows = scores.numel() / c;
  const RowMatrixXd m = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                            scores.value().data(), rows, c)
                            .template cast<double>();
  return predict(m);
}

template class ParamStore<float>;
template class ParamStore<double>;
template class SleepNet<float>;
template class SleepNet<double>;
template ModelInput<float> make_input<float>(const std::vector<const ComponentSet*>&);
template ModelInput<double> make_input<double>(const std::vector<const ComponentSet*>&);
template void SleepNet<float>::load_values<float>(const ParamStore<float>&);
template void SleepNet<float>::load_values<double>(const ParamStore<double>&);
template void SleepNet<double>::load_values<float>(const ParamStore<float>&);
template void SleepNet<double>::load_values<double>(const ParamStore<double>&);
template StageSequence predict<float>(const Tensor<float>&);
template StageSequence predict<double>(const Tensor<double>&);

}  // namespace snz

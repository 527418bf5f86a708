#pragma once

// Sleep-staging network: three 1-D ResNet feature extractors over stacked
// component channels, a sinusoidal-position Transformer encoder over epochs,
// and a per-epoch MLP classifier.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "snz/random.hpp"
#include "snz/signal.hpp"
#include "snz/tensor.hpp"

namespace snz {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BlockSpec {
  int channels = 0;  // 0: the extractor's output width
  int stride = 1;
};

struct ModelConfig {
  std::string preset = "default";
  int conv1_channels = 64;
  int conv1_kernel = 7;
  int conv1_stride = 2;
  int pool_kernel = 3;
  int pool_stride = 2;
  std::vector<BlockSpec> blocks;
  std::array<int, 3> out_dims{128, 128, 256};
  int d_model = 512;
  int layers = 6;
  int feedforward = 2048;
  int heads = 8;
  double dropout = 0.05;
  int classes = kNumStages;
  int hidden = 64;

  static ModelConfig default_preset();
  static ModelConfig tiny();
  /// "default" or "tiny"; anything else is invalid-config.
  static ModelConfig from_preset(std::string_view name);

  int total_stride() const;
  void validate() const;
};

/// Ordered named tensors; BN running statistics are stored as non-trainable buffers.
template <typename Scalar>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<Scalar> tensor;
    bool trainable = true;
  };

  Tensor<Scalar> add(std::string name, Shape shape, bool trainable);
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  const Entry* find(std::string_view name) const;
  std::vector<Tensor<Scalar>> trainable() const;
  Eigen::Index trainable_count() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

/// Network inputs for a batch of equal-length component sets, each [B, C, 120 T]:
/// f1 = (heartbeat, movement), f2 = (breath, movement), f3 = (heartbeat, breath, movement).
template <typename Scalar>
struct ModelInput {
  Tensor<Scalar> f1, f2, f3;
  Eigen::Index batch() const { return f1.dim(0); }
  Eigen::Index epochs() const { return f1.dim(2) / kSamplesPerEpoch; }
};

/// Heartbeat is rescaled from milliseconds to seconds.
template <typename Scalar>
ModelInput<Scalar> make_input(const std::vector<const ComponentSet*>& batch);

template <typename Scalar>
ModelInput<Scalar> make_input(const ComponentSet& c) {
  return make_input<Scalar>(std::vector<const ComponentSet*>{&c});
}

/// e[t, 2k] = sin(t / 10000^(2k/d)), e[t, 2k+1] = cos(...), t zero-based.
RowMatrixXd positional_encoding(Eigen::Index steps, int d_model);

template <typename Scalar>
class SleepNet {
 public:
  SleepNet(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }

  /// Extractor k in {0, 1, 2}: x[B, C, 120 T] -> [B, T, out_dims[k]].
  Tensor<Scalar> resfeat(int k, const Tensor<Scalar>& x, bool train);
  /// Concatenated extractor features z[B, T, d_model].
  Tensor<Scalar> features(const ModelInput<Scalar>& in, bool train);
  /// Class scores before softmax, [B, T, classes]. `rng` drives dropout in train mode.
  Tensor<Scalar> logits(const ModelInput<Scalar>& in, bool train, KeyedRng* rng = nullptr);
  /// Per-epoch class probabilities [B, T, classes].
  Tensor<Scalar> forward(const ModelInput<Scalar>& in, bool train, KeyedRng* rng = nullptr);

  /// Copy values of every same-named, same-shaped entry; other entries are an error.
  template <typename Other>
  void load_values(const ParamStore<Other>& src);

 private:
  struct Conv {
    Tensor<Scalar> weight;
    int stride = 1, padding = 0;
  };
  struct Norm {
    Tensor<Scalar> gamma, beta;
    BatchNormStats<Scalar> stats;
  };
  struct Block {
    Conv conv1, conv2;
    Norm bn1, bn2;
    bool project = false;
    Conv proj;
    Norm proj_bn;
  };
  struct Extractor {
    Conv conv1;
    Norm bn1;
    std::vector<Block> blocks;
  };
  struct Linear {
    Tensor<Scalar> weight, bias;
  };
  struct LayerNorm {
    Tensor<Scalar> gamma, beta;
  };
  struct EncoderLayer {
    Linear q, k, v, out, ff1, ff2;
    LayerNorm ln1, ln2;
  };

  Conv make_conv(const std::string& name, int cin, int cout, int kernel, int stride, int padding, KeyedRng& rng);
  Norm make_norm(const std::string& name, int channels);
  Linear make_linear(const std::string& name, int in, int out, KeyedRng& rng);
  LayerNorm make_layer_norm(const std::string& name, int width);
  Tensor<Scalar> norm(const Tensor<Scalar>& x, Norm& n, bool train);
  Tensor<Scalar> encoder_layer(const Tensor<Scalar>& x, EncoderLayer& layer, bool train, KeyedRng* rng);

  ModelConfig cfg_;
  ParamStore<Scalar> params_;
  std::array<Extractor, 3> extractors_;
  std::vector<EncoderLayer> encoder_;
  Linear fc1_, fc2_;
};

/// Row-wise argmax of per-epoch scores [T, C] (or [1, T, C]); ties go to the lowest class.
StageSequence predict(const Eigen::Ref<const RowMatrixXd>& scores);
template <typename Scalar>
StageSequence predict(const Tensor<Scalar>& scores);

}  // namespace snz

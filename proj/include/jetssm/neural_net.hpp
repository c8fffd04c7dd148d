#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "jetssm/rng.hpp"
#include "jetssm/ssm_kernel.hpp"
#include "jetssm/tensor.hpp"

namespace jetssm {

enum class ModelKind { S4D, Gru, MlpShallow, MlpDeep };
enum class NormKind { BatchOverTime, Layer };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelConfig {
  std::size_t in_channels = 130;
  std::size_t hidden_dim = 256;
  std::size_t out_channels = 70;
  std::size_t n_blocks = 2;  // S4D blocks, 1..6
  std::size_t n_state = 64;
  double dropout = 0.1;
  NormKind norm_kind = NormKind::BatchOverTime;
  Discretization method = Discretization::ZOH;
  std::uint64_t seed = 0;
  bool feedthrough = true;   // per-channel skip term inside the block
  bool shared_a = false;     // one state diagonal shared across channels
  bool conj_pairs = true;    // real-output conjugate-pair convention
  std::size_t gru_layers = 1;
  std::size_t mlp_hidden_layers = 1;

  void validate(ModelKind kind) const;
};

struct ParamArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;

  std::size_t count() const { return value.size(); }
};

// Named parameter registry. Deque keeps element addresses stable, so layers
// can hold raw pointers into it.
class ParamStore {
 public:
  ParamArray& add(const std::string& name, std::vector<std::size_t> shape,
                  bool trainable = true);
  ParamArray* find(const std::string& name);
  const ParamArray* find(const std::string& name) const;
  std::deque<ParamArray>& items() { return items_; }
  const std::deque<ParamArray>& items() const { return items_; }
  void zero_grads();
  std::size_t trainable_count() const;

 private:
  std::deque<ParamArray> items_;
};

// Coarse-grained reverse-mode tape: each layer invocation during a training
// forward pushes one closure that maps the upstream gradient to its input
// gradient while accumulating parameter gradients.
class GradientTape {
 public:
  using BackFn = std::function<SequenceTensor(const SequenceTensor&)>;

  void push(BackFn fn) { nodes_.push_back(std::move(fn)); }
  void record_loss(double value, SequenceTensor d_pred);
  bool has_loss() const { return has_loss_; }
  double loss() const;

  // Walks the recorded ops in reverse from the loss seed; returns the
  // gradient with respect to the model input. Requires a recorded loss.
  SequenceTensor backward();

 private:
  std::vector<BackFn> nodes_;
  SequenceTensor seed_;
  double loss_value_ = 0.0;
  bool has_loss_ = false;
  bool consumed_ = false;
};

struct Forward {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
  GradientTape* tape = nullptr;
};

/// Framewise affine map y_t = W x_t + b.
class Linear {
 public:
  Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out);
  void init(Rng& rng);
  SequenceTensor forward(const SequenceTensor& x, const Forward& ctx) const;
  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }

 private:
  ParamArray* w_;
  ParamArray* b_;
  std::size_t in_, out_;
};

/// Pre-norm residual S4D block:
///   y = x + Dropout(GELU(SSMconv(Norm(x)) + d o Norm(x)))
/// with one independent diagonal SSM per channel, applied by FFT causal
/// convolution of the Vandermonde kernel.
class S4DBlock {
 public:
  S4DBlock(ParamStore& store, const std::string& prefix, const ModelConfig& cfg);
  void init(Rng& rng);
  SequenceTensor forward(const SequenceTensor& x, const Forward& ctx) const;

  std::size_t hidden() const { return hidden_; }
  std::size_t stored_states() const { return stored_; }

 private:
  struct Cache;
  SequenceTensor norm_forward(const SequenceTensor& x, bool training, Cache* cache) const;
  SequenceTensor backward(const Cache& cache, const SequenceTensor& dy) const;

  std::size_t hidden_, stored_;
  bool conj_pairs_, shared_a_, feedthrough_;
  NormKind norm_kind_;
  Discretization method_;
  double dropout_;
  ParamArray* log_neg_real_;
  ParamArray* a_imag_;
  ParamArray* c_re_;
  ParamArray* c_im_;
  ParamArray* log_dt_;
  ParamArray* d_ = nullptr;
  ParamArray* gamma_;
  ParamArray* beta_;
  ParamArray* run_mean_ = nullptr;
  ParamArray* run_var_ = nullptr;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual SequenceTensor forward(const SequenceTensor& x, const Forward& ctx) = 0;
  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 protected:
  Model(ModelKind kind, ModelConfig cfg) : kind_(kind), config_(std::move(cfg)) {}
  ModelKind kind_;
  ModelConfig config_;
  ParamStore params_;
};

class S4DModel : public Model {
 public:
  S4DModel(const ModelConfig& cfg, std::uint64_t init_seed);
  SequenceTensor forward(const SequenceTensor& x, const Forward& ctx) override;
  const Linear& encoder() const { return *encoder_; }
  const Linear& decoder() const { return *decoder_; }
  const std::vector<S4DBlock>& blocks() const { return blocks_; }

 private:
  std::unique_ptr<Linear> encoder_, decoder_;
  std::vector<S4DBlock> blocks_;
};

/// Gated recurrent baseline: GRU stack plus framewise affine readout.
/// Gate convention: h_t = z o h_{t-1} + (1-z) o n, so a saturated update
/// gate carries the previous hidden state through.
class GruModel : public Model {
 public:
  GruModel(const ModelConfig& cfg, std::uint64_t init_seed);
  ~GruModel() override;
  SequenceTensor forward(const SequenceTensor& x, const Forward& ctx) override;

 private:
  struct GruLayer;
  std::vector<GruLayer> layers_;
  std::unique_ptr<Linear> readout_;
};

/// Framewise MLP baseline (no temporal mixing): Linear/GELU stack.
class MlpModel : public Model {
 public:
  MlpModel(ModelKind kind, const ModelConfig& cfg, std::uint64_t init_seed);
  SequenceTensor forward(const SequenceTensor& x, const Forward& ctx) override;

 private:
  std::vector<Linear> layers_;
  double dropout_;
};

std::unique_ptr<Model> make_model(ModelKind kind, const ModelConfig& cfg,
                                  std::uint64_t init_seed);

// GELU and its derivative (exact erf form); used by blocks and baselines.
double gelu(double x);
double gelu_grad(double x);

}  // namespace jetssm

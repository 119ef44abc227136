#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hinav/errors.hpp"

namespace hinav {

// Dense row-major tensor of doubles.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_);
  Tensor(std::vector<int> shape_, std::vector<double> data_);

  int numel() const { return static_cast<int>(data.size()); }
  static int shape_numel(const std::vector<int>& shape);
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Named gradient accumulator, zero-initialized on first touch.
struct GradMap {
  std::map<std::string, Tensor> grads;

  Tensor& accum(const std::string& name, const std::vector<int>& shape);
  void clear() { grads.clear(); }
  void scale(double s);
  double global_norm() const;
  void clip_global_norm(double max_norm);
};

// Named parameters plus Adam moment buffers and a shared step counter.
// Iteration order is the name order, which keeps training bit-reproducible.
class ParamSet {
 public:
  Tensor& declare(const std::string& name, std::vector<int> shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  const std::map<std::string, Tensor>& params() const { return params_; }
  std::map<std::string, Tensor>& params() { return params_; }
  std::int64_t step() const { return step_; }

  // One Adam update over every parameter; missing grads count as zero.
  void adam_step(const GradMap& grads, double lr, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8);

  std::map<std::string, Tensor> checkpoint_tensors() const;
  static ParamSet from_checkpoint_tensors(const std::map<std::string, Tensor>& t);

 private:
  std::map<std::string, Tensor> params_;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
  std::int64_t step_ = 0;
};

enum class Activation { Linear, ReLU, Tanh };

// Uniform He-style fan-in init, seeded.
void init_uniform_fan_in(Tensor& t, int fan_in, std::mt19937_64& rng);

// Fully connected layer bound to named parameters inside a ParamSet.
class Dense {
 public:
  Dense() = default;
  Dense(ParamSet& ps, const std::string& prefix, int in_dim, int out_dim,
        Activation act, std::mt19937_64& rng);
  // Attach to already-declared parameters (checkpoint restore).
  Dense(const ParamSet& ps, const std::string& prefix, Activation act);

  struct Cache {
    std::vector<double> input;
    std::vector<double> pre;
  };

  std::vector<double> forward(const ParamSet& ps, const std::vector<double>& in,
                              Cache* cache = nullptr) const;
  std::vector<double> backward(const ParamSet& ps, const Cache& cache,
                               const std::vector<double>& dout,
                               GradMap& grads) const;

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

 private:
  std::string w_, b_;
  int in_dim_ = 0, out_dim_ = 0;
  Activation act_ = Activation::Linear;
};

// Valid (no padding) cross-correlation over [H, W, C] input with stride along
// H; the kernel consumes the full width when kernel_w == W. ReLU baked in
// unless constructed otherwise.
class Conv2D {
 public:
  Conv2D() = default;
  Conv2D(ParamSet& ps, const std::string& prefix, int kernel_h, int kernel_w,
         int in_channels, int out_channels, int stride, std::mt19937_64& rng,
         Activation act = Activation::ReLU);
  Conv2D(const ParamSet& ps, const std::string& prefix, int kernel_h,
         int kernel_w, int in_channels, int out_channels, int stride,
         Activation act = Activation::ReLU);

  struct Cache {
    Tensor input;
    Tensor pre;
  };

  Tensor forward(const ParamSet& ps, const Tensor& in, Cache* cache = nullptr) const;
  Tensor backward(const ParamSet& ps, const Cache& cache, const Tensor& dout,
                  GradMap& grads) const;

  std::vector<int> output_shape(const std::vector<int>& in_shape) const;

 private:
  std::string w_, b_;
  int kh_ = 0, kw_ = 0, cin_ = 0, cout_ = 0, stride_ = 1;
  Activation act_ = Activation::ReLU;
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zero(int hidden);
  bool finite() const;
};

// Single LSTM cell with input/forget/candidate/output gate layout.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParamSet& ps, const std::string& prefix, int in_dim, int hidden,
           std::mt19937_64& rng);
  LstmCell(const ParamSet& ps, const std::string& prefix);

  struct Cache {
    std::vector<double> input;
    LstmState prev;
    std::vector<double> gates;  // 4*hidden pre-activations
    std::vector<double> c_new;
  };

  LstmState forward(const ParamSet& ps, const std::vector<double>& in,
                    const LstmState& state, Cache* cache = nullptr) const;
  // Returns dx; accumulates into d_state (gradient w.r.t. the incoming state).
  std::vector<double> backward(const ParamSet& ps, const Cache& cache,
                               const std::vector<double>& dh, LstmState& d_state,
                               GradMap& grads) const;

  int hidden() const { return hidden_; }
  int in_dim() const { return in_dim_; }

 private:
  std::string wx_, wh_, b_;
  int in_dim_ = 0, hidden_ = 0;
};

// Checkpoint container: magic NAVCKPT1, then named tensors with dims and
// little-endian 64-bit floats.
inline constexpr const char* kCheckpointMagic = "NAVCKPT1";

void write_checkpoint(const std::map<std::string, Tensor>& tensors,
                      const std::string& path);
std::map<std::string, Tensor> read_checkpoint(const std::string& path);

}  // namespace hinav

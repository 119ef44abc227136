#include "hinav/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hinav {

Tensor::Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
  data.assign(shape_numel(shape), 0.0);
}

Tensor::Tensor(std::vector<int> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (static_cast<int>(data.size()) != shape_numel(shape))
    throw ShapeMismatch("tensor: data size does not match shape");
}

int Tensor::shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeMismatch("tensor: negative dim");
    n *= d;
  }
  return n;
}

Tensor& GradMap::accum(const std::string& name, const std::vector<int>& shape) {
  auto it = grads.find(name);
  if (it == grads.end()) it = grads.emplace(name, Tensor(shape)).first;
  else if (it->second.shape != shape)
    throw ShapeMismatch("grad shape mismatch for " + name);
  return it->second;
}

void GradMap::scale(double s) {
  for (auto& [name, g] : grads)
    for (double& v : g.data) v *= s;
}

double GradMap::global_norm() const {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data) sq += v * v;
  return std::sqrt(sq);
}

void GradMap::clip_global_norm(double max_norm) {
  double n = global_norm();
  if (n > max_norm && n > 0.0) scale(max_norm / n);
}

Tensor& ParamSet::declare(const std::string& name, std::vector<int> shape) {
  if (params_.count(name))
    throw NavError("param already declared: " + name);
  auto& t = params_.emplace(name, Tensor(shape)).first->second;
  m_.emplace(name, Tensor(shape));
  v_.emplace(name, Tensor(shape));
  return t;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw NavError("unknown param: " + name);
  return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw NavError("unknown param: " + name);
  return it->second;
}

void ParamSet::adam_step(const GradMap& grads, double lr, double beta1,
                         double beta2, double eps) {
  ++step_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (auto& [name, p] : params_) {
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    auto git = grads.grads.find(name);
    const Tensor* g = git == grads.grads.end() ? nullptr : &git->second;
    if (g && g->shape != p.shape)
      throw ShapeMismatch("adam: grad shape mismatch for " + name);
    for (int i = 0; i < p.numel(); ++i) {
      double gi = g ? g->data[i] : 0.0;
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::map<std::string, Tensor> ParamSet::checkpoint_tensors() const {
  std::map<std::string, Tensor> out = params_;
  for (const auto& [name, t] : m_) out.emplace("adam.m." + name, t);
  for (const auto& [name, t] : v_) out.emplace("adam.v." + name, t);
  out.emplace("adam.step",
              Tensor({1}, {static_cast<double>(step_)}));
  return out;
}

ParamSet ParamSet::from_checkpoint_tensors(
    const std::map<std::string, Tensor>& tensors) {
  ParamSet ps;
  for (const auto& [name, t] : tensors) {
    if (name.rfind("adam.", 0) == 0) continue;
    ps.params_.emplace(name, t);
  }
  for (const auto& [name, t] : ps.params_) {
    auto mit = tensors.find("adam.m." + name);
    auto vit = tensors.find("adam.v." + name);
    ps.m_.emplace(name, mit != tensors.end() ? mit->second : Tensor(t.shape));
    ps.v_.emplace(name, vit != tensors.end() ? vit->second : Tensor(t.shape));
  }
  auto sit = tensors.find("adam.step");
  if (sit != tensors.end() && sit->second.numel() == 1)
    ps.step_ = static_cast<std::int64_t>(sit->second.data[0]);
  return ps;
}

void init_uniform_fan_in(Tensor& t, int fan_in, std::mt19937_64& rng) {
  double bound = std::sqrt(6.0 / std::max(1, fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data) v = dist(rng);
}

namespace {

double apply_act(Activation a, double x) {
  switch (a) {
    case Activation::Linear: return x;
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

double act_grad(Activation a, double pre) {
  switch (a) {
    case Activation::Linear: return 1.0;
    case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      double t = std::tanh(pre);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

}  // namespace

Dense::Dense(ParamSet& ps, const std::string& prefix, int in_dim, int out_dim,
             Activation act, std::mt19937_64& rng)
    : w_(prefix + ".w"), b_(prefix + ".b"), in_dim_(in_dim), out_dim_(out_dim),
      act_(act) {
  Tensor& w = ps.declare(w_, {out_dim, in_dim});
  init_uniform_fan_in(w, in_dim, rng);
  ps.declare(b_, {out_dim});
}

Dense::Dense(const ParamSet& ps, const std::string& prefix, Activation act)
    : w_(prefix + ".w"), b_(prefix + ".b"), act_(act) {
  const Tensor& w = ps.at(w_);
  if (w.shape.size() != 2) throw ShapeMismatch("dense: bad weight shape");
  out_dim_ = w.shape[0];
  in_dim_ = w.shape[1];
}

std::vector<double> Dense::forward(const ParamSet& ps,
                                   const std::vector<double>& in,
                                   Cache* cache) const {
  if (static_cast<int>(in.size()) != in_dim_)
    throw ShapeMismatch("dense forward: input size");
  const Tensor& w = ps.at(w_);
  const Tensor& b = ps.at(b_);
  std::vector<double> pre(out_dim_);
  for (int o = 0; o < out_dim_; ++o) {
    double acc = b.data[o];
    const double* row = &w.data[o * in_dim_];
    for (int i = 0; i < in_dim_; ++i) acc += row[i] * in[i];
    pre[o] = acc;
  }
  std::vector<double> out(out_dim_);
  for (int o = 0; o < out_dim_; ++o) out[o] = apply_act(act_, pre[o]);
  if (cache) {
    cache->input = in;
    cache->pre = std::move(pre);
  }
  return out;
}

std::vector<double> Dense::backward(const ParamSet& ps, const Cache& cache,
                                    const std::vector<double>& dout,
                                    GradMap& grads) const {
  const Tensor& w = ps.at(w_);
  Tensor& dw = grads.accum(w_, {out_dim_, in_dim_});
  Tensor& db = grads.accum(b_, {out_dim_});
  std::vector<double> dx(in_dim_, 0.0);
  for (int o = 0; o < out_dim_; ++o) {
    double dpre = dout[o] * act_grad(act_, cache.pre[o]);
    db.data[o] += dpre;
    double* dwr = &dw.data[o * in_dim_];
    const double* wr = &w.data[o * in_dim_];
    for (int i = 0; i < in_dim_; ++i) {
      dwr[i] += dpre * cache.input[i];
      dx[i] += dpre * wr[i];
    }
  }
  return dx;
}

Conv2D::Conv2D(ParamSet& ps, const std::string& prefix, int kernel_h,
               int kernel_w, int in_channels, int out_channels, int stride,
               std::mt19937_64& rng, Activation act)
    : w_(prefix + ".w"), b_(prefix + ".b"), kh_(kernel_h), kw_(kernel_w),
      cin_(in_channels), cout_(out_channels), stride_(stride), act_(act) {
  Tensor& w = ps.declare(w_, {kh_, kw_, cin_, cout_});
  init_uniform_fan_in(w, kh_ * kw_ * cin_, rng);
  ps.declare(b_, {cout_});
}

Conv2D::Conv2D(const ParamSet& ps, const std::string& prefix, int kernel_h,
               int kernel_w, int in_channels, int out_channels, int stride,
               Activation act)
    : w_(prefix + ".w"), b_(prefix + ".b"), kh_(kernel_h), kw_(kernel_w),
      cin_(in_channels), cout_(out_channels), stride_(stride), act_(act) {
  const Tensor& w = ps.at(w_);
  if (w.shape != std::vector<int>{kh_, kw_, cin_, cout_})
    throw ShapeMismatch("conv: checkpoint kernel shape mismatch");
}

std::vector<int> Conv2D::output_shape(const std::vector<int>& in_shape) const {
  if (in_shape.size() != 3 || in_shape[2] != cin_)
    throw ShapeMismatch("conv: expected [H, W, C] input");
  if (in_shape[0] < kh_ || in_shape[1] < kw_)
    throw ShapeMismatch("conv: input too small");
  int oh = (in_shape[0] - kh_) / stride_ + 1;
  int ow = in_shape[1] - kw_ + 1;
  return {oh, ow, cout_};
}

Tensor Conv2D::forward(const ParamSet& ps, const Tensor& in,
                       Cache* cache) const {
  auto oshape = output_shape(in.shape);
  const int oh = oshape[0], ow = oshape[1];
  const int H = in.shape[0], W = in.shape[1];
  (void)H;
  const Tensor& w = ps.at(w_);
  const Tensor& b = ps.at(b_);
  Tensor pre(oshape);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int oc = 0; oc < cout_; ++oc) {
        double acc = b.data[oc];
        for (int i = 0; i < kh_; ++i)
          for (int j = 0; j < kw_; ++j)
            for (int ci = 0; ci < cin_; ++ci)
              acc += in.data[((y * stride_ + i) * W + (x + j)) * cin_ + ci] *
                     w.data[((i * kw_ + j) * cin_ + ci) * cout_ + oc];
        pre.data[(y * ow + x) * cout_ + oc] = acc;
      }
  Tensor out(oshape);
  for (int i = 0; i < out.numel(); ++i)
    out.data[i] = apply_act(act_, pre.data[i]);
  if (cache) {
    cache->input = in;
    cache->pre = std::move(pre);
  }
  return out;
}

Tensor Conv2D::backward(const ParamSet& ps, const Cache& cache,
                        const Tensor& dout, GradMap& grads) const {
  const Tensor& in = cache.input;
  const int W = in.shape[1];
  auto oshape = output_shape(in.shape);
  if (dout.shape != oshape) throw ShapeMismatch("conv backward: dout shape");
  const int oh = oshape[0], ow = oshape[1];
  const Tensor& w = ps.at(w_);
  Tensor& dw = grads.accum(w_, {kh_, kw_, cin_, cout_});
  Tensor& db = grads.accum(b_, {cout_});
  Tensor dx(in.shape);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int oc = 0; oc < cout_; ++oc) {
        int oi = (y * ow + x) * cout_ + oc;
        double dpre = dout.data[oi] * act_grad(act_, cache.pre.data[oi]);
        if (dpre == 0.0) continue;
        db.data[oc] += dpre;
        for (int i = 0; i < kh_; ++i)
          for (int j = 0; j < kw_; ++j)
            for (int ci = 0; ci < cin_; ++ci) {
              int ii = ((y * stride_ + i) * W + (x + j)) * cin_ + ci;
              int wi = ((i * kw_ + j) * cin_ + ci) * cout_ + oc;
              dw.data[wi] += dpre * in.data[ii];
              dx.data[ii] += dpre * w.data[wi];
            }
      }
  return dx;
}

LstmState LstmState::zero(int hidden) {
  LstmState s;
  s.h.assign(hidden, 0.0);
  s.c.assign(hidden, 0.0);
  return s;
}

bool LstmState::finite() const {
  for (double v : h)
    if (!std::isfinite(v)) return false;
  for (double v : c)
    if (!std::isfinite(v)) return false;
  return true;
}

LstmCell::LstmCell(ParamSet& ps, const std::string& prefix, int in_dim,
                   int hidden, std::mt19937_64& rng)
    : wx_(prefix + ".wx"), wh_(prefix + ".wh"), b_(prefix + ".b"),
      in_dim_(in_dim), hidden_(hidden) {
  Tensor& wx = ps.declare(wx_, {4 * hidden, in_dim});
  init_uniform_fan_in(wx, in_dim + hidden, rng);
  Tensor& wh = ps.declare(wh_, {4 * hidden, hidden});
  init_uniform_fan_in(wh, in_dim + hidden, rng);
  Tensor& b = ps.declare(b_, {4 * hidden});
  // Forget-gate bias starts at 1 so early training does not wipe the cell.
  for (int i = hidden; i < 2 * hidden; ++i) b.data[i] = 1.0;
}

LstmCell::LstmCell(const ParamSet& ps, const std::string& prefix)
    : wx_(prefix + ".wx"), wh_(prefix + ".wh"), b_(prefix + ".b") {
  const Tensor& wx = ps.at(wx_);
  if (wx.shape.size() != 2 || wx.shape[0] % 4 != 0)
    throw ShapeMismatch("lstm: bad wx shape");
  hidden_ = wx.shape[0] / 4;
  in_dim_ = wx.shape[1];
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

LstmState LstmCell::forward(const ParamSet& ps, const std::vector<double>& in,
                            const LstmState& state, Cache* cache) const {
  if (static_cast<int>(in.size()) != in_dim_)
    throw ShapeMismatch("lstm forward: input size");
  const Tensor& wx = ps.at(wx_);
  const Tensor& wh = ps.at(wh_);
  const Tensor& b = ps.at(b_);
  const int H = hidden_;
  std::vector<double> gates(4 * H);
  for (int g = 0; g < 4 * H; ++g) {
    double acc = b.data[g];
    const double* wxr = &wx.data[g * in_dim_];
    for (int i = 0; i < in_dim_; ++i) acc += wxr[i] * in[i];
    const double* whr = &wh.data[g * H];
    for (int i = 0; i < H; ++i) acc += whr[i] * state.h[i];
    gates[g] = acc;
  }
  LstmState next;
  next.h.resize(H);
  next.c.resize(H);
  for (int i = 0; i < H; ++i) {
    double ig = sigmoid(gates[i]);
    double fg = sigmoid(gates[H + i]);
    double gg = std::tanh(gates[2 * H + i]);
    double og = sigmoid(gates[3 * H + i]);
    next.c[i] = fg * state.c[i] + ig * gg;
    next.h[i] = og * std::tanh(next.c[i]);
  }
  if (cache) {
    cache->input = in;
    cache->prev = state;
    cache->gates = std::move(gates);
    cache->c_new = next.c;
  }
  return next;
}

std::vector<double> LstmCell::backward(const ParamSet& ps, const Cache& cache,
                                       const std::vector<double>& dh,
                                       LstmState& d_state,
                                       GradMap& grads) const {
  const int H = hidden_;
  const Tensor& wx = ps.at(wx_);
  const Tensor& wh = ps.at(wh_);
  Tensor& dwx = grads.accum(wx_, {4 * H, in_dim_});
  Tensor& dwh = grads.accum(wh_, {4 * H, H});
  Tensor& db = grads.accum(b_, {4 * H});

  std::vector<double> dgates(4 * H);
  std::vector<double> dc_prev(H), dh_prev(H, 0.0);
  for (int i = 0; i < H; ++i) {
    double ig = sigmoid(cache.gates[i]);
    double fg = sigmoid(cache.gates[H + i]);
    double gg = std::tanh(cache.gates[2 * H + i]);
    double og = sigmoid(cache.gates[3 * H + i]);
    double tc = std::tanh(cache.c_new[i]);
    double dh_total = dh[i] + d_state.h[i];
    double dc_total = d_state.c[i] + dh_total * og * (1.0 - tc * tc);
    dgates[i] = dc_total * gg * ig * (1.0 - ig);
    dgates[H + i] = dc_total * cache.prev.c[i] * fg * (1.0 - fg);
    dgates[2 * H + i] = dc_total * ig * (1.0 - gg * gg);
    dgates[3 * H + i] = dh_total * tc * og * (1.0 - og);
    dc_prev[i] = dc_total * fg;
  }
  std::vector<double> dx(in_dim_, 0.0);
  for (int g = 0; g < 4 * H; ++g) {
    double dg = dgates[g];
    if (dg == 0.0) continue;
    db.data[g] += dg;
    double* dwxr = &dwx.data[g * in_dim_];
    const double* wxr = &wx.data[g * in_dim_];
    for (int i = 0; i < in_dim_; ++i) {
      dwxr[i] += dg * cache.input[i];
      dx[i] += dg * wxr[i];
    }
    double* dwhr = &dwh.data[g * H];
    const double* whr = &wh.data[g * H];
    for (int i = 0; i < H; ++i) {
      dwhr[i] += dg * cache.prev.h[i];
      dh_prev[i] += dg * whr[i];
    }
  }
  d_state.h = std::move(dh_prev);
  d_state.c = std::move(dc_prev);
  return dx;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw IoError("checkpoint: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

double get_f64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw IoError("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 8;
  return std::bit_cast<double>(v);
}

}  // namespace

void write_checkpoint(const std::map<std::string, Tensor>& tensors,
                      const std::string& path) {
  std::string out;
  out += kCheckpointMagic;
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::map<std::string, Tensor> read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string in = ss.str();
  std::size_t magic_len = std::strlen(kCheckpointMagic);
  if (in.size() < magic_len || in.compare(0, magic_len, kCheckpointMagic) != 0)
    throw IoError("checkpoint: bad magic");
  std::size_t pos = magic_len;
  std::uint32_t count = get_u32(in, pos);
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint32_t name_len = get_u32(in, pos);
    if (pos + name_len > in.size()) throw IoError("checkpoint: truncated");
    std::string name = in.substr(pos, name_len);
    pos += name_len;
    std::uint32_t ndims = get_u32(in, pos);
    std::vector<int> shape(ndims);
    for (std::uint32_t i = 0; i < ndims; ++i)
      shape[i] = static_cast<int>(get_u32(in, pos));
    Tensor t(shape);
    for (double& v : t.data) v = get_f64(in, pos);
    tensors.emplace(std::move(name), std::move(t));
  }
  return tensors;
}

}  // namespace hinav

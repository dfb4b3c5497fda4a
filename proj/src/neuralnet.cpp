#include "aoirelay/neuralnet.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace aoirelay {

namespace {

double activate(Activation a, double x) {
  return a == Activation::kRelu ? (x > 0.0 ? x : 0.0) : x;
}

double activate_grad(Activation a, double pre) {
  return a == Activation::kRelu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0;
}

Activation layer_activation(const Architecture& arch, std::size_t layer, std::size_t n_layers) {
  return layer + 1 == n_layers ? arch.output_activation : arch.hidden_activation;
}

// y = act(W x + b)
void dense_forward(const DenseLayer& layer, Activation act, std::span<const double> x,
                   std::vector<double>& pre, std::vector<double>& post) {
  pre.resize(layer.out);
  post.resize(layer.out);
  for (std::size_t r = 0; r < layer.out; ++r) {
    const double* row = layer.weights.data() + r * layer.in;
    double acc = layer.bias[r];
    for (std::size_t c = 0; c < layer.in; ++c) acc += row[c] * x[c];
    pre[r] = acc;
    post[r] = activate(act, acc);
  }
}

// --- little-endian binary helpers ---

constexpr std::array<char, 8> kMagic{'A', 'O', 'I', 'Q', 'N', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw std::runtime_error("checkpoint: unexpected end of data");
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint8_t get_u8(std::istream& in) {
  unsigned char b;
  read_exact(in, reinterpret_cast<char*>(&b), 1);
  return b;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

Activation to_activation(std::uint8_t v) {
  if (v > 1) throw std::runtime_error("checkpoint: unknown activation code");
  return static_cast<Activation>(v);
}

}  // namespace

void Architecture::validate() const {
  if (input_dim < 1) throw std::invalid_argument("architecture: input_dim must be >= 1");
  if (output_dim < 1) throw std::invalid_argument("architecture: output_dim must be >= 1");
  for (auto h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("architecture: hidden dims must be >= 1");
  }
}

std::size_t QNetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

bool QNetworkParams::all_finite() const {
  for (const auto& l : layers) {
    for (double v : l.weights) if (!std::isfinite(v)) return false;
    for (double v : l.bias) if (!std::isfinite(v)) return false;
  }
  return true;
}

GradientSet GradientSet::zeros_like(const QNetworkParams& params) {
  GradientSet g;
  g.layers.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    DenseLayer z;
    z.in = l.in;
    z.out = l.out;
    z.weights.assign(l.weights.size(), 0.0);
    z.bias.assign(l.bias.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

void GradientSet::set_zero() {
  for (auto& l : layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void GradientSet::add_scaled(const GradientSet& other, double scale) {
  if (other.layers.size() != layers.size()) throw std::invalid_argument("gradient shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size()) {
      throw std::invalid_argument("gradient shape mismatch");
    }
    for (std::size_t j = 0; j < a.weights.size(); ++j) a.weights[j] += scale * b.weights[j];
    for (std::size_t j = 0; j < a.bias.size(); ++j) a.bias[j] += scale * b.bias[j];
  }
}

bool GradientSet::is_zero() const {
  for (const auto& l : layers) {
    for (double v : l.weights) if (v != 0.0) return false;
    for (double v : l.bias) if (v != 0.0) return false;
  }
  return true;
}

QNetworkParams init_network(const Architecture& arch, Rng& rng) {
  arch.validate();
  QNetworkParams p;
  p.arch = arch;
  std::vector<std::size_t> dims{arch.input_dim};
  dims.insert(dims.end(), arch.hidden_dims.begin(), arch.hidden_dims.end());
  dims.push_back(arch.output_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    l.in = dims[i];
    l.out = dims[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    l.weights.resize(l.in * l.out);
    for (auto& w : l.weights) w = (2.0 * rng.uniform() - 1.0) * limit;
    l.bias.assign(l.out, 0.0);
    p.layers.push_back(std::move(l));
  }
  return p;
}

std::vector<double> forward(const QNetworkParams& params, std::span<const double> input) {
  Workspace ws(params.arch);
  const auto out = ws.forward(params, input);
  return {out.begin(), out.end()};
}

LossTerm weighted_td_loss(double pred_q, double target_y, double weight) {
  const double err = target_y - pred_q;
  return {err * err, -2.0 * err * weight};
}

GradientSet backward(const QNetworkParams& params, std::span<const double> input,
                     std::size_t selected, double upstream) {
  Workspace ws(params.arch);
  GradientSet g = GradientSet::zeros_like(params);
  ws.forward(params, input);
  ws.backward_accumulate(params, input, selected, upstream, 1.0, g);
  return g;
}

Workspace::Workspace(const Architecture& arch) {
  const std::size_t n = arch.hidden_dims.size() + 1;
  pre_.resize(n);
  post_.resize(n);
  delta_.resize(n);
}

std::span<const double> Workspace::forward(const QNetworkParams& params,
                                           std::span<const double> input) {
  if (input.size() != params.arch.input_dim) {
    throw std::invalid_argument("forward: input has length " + std::to_string(input.size()) +
                                ", expected " + std::to_string(params.arch.input_dim));
  }
  const std::size_t n = params.layers.size();
  std::span<const double> x = input;
  for (std::size_t l = 0; l < n; ++l) {
    dense_forward(params.layers[l], layer_activation(params.arch, l, n), x, pre_[l], post_[l]);
    x = post_[l];
  }
  return post_[n - 1];
}

void Workspace::backward_accumulate(const QNetworkParams& params,
                                    std::span<const double> input, std::size_t selected,
                                    double upstream, double scale, GradientSet& into) {
  const std::size_t n = params.layers.size();
  if (selected >= params.arch.output_dim) throw std::out_of_range("backward: selected output out of range");
  if (into.layers.size() != n) throw std::invalid_argument("backward: gradient shape mismatch");
  if (upstream == 0.0 || scale == 0.0) return;

  auto& d_out = delta_[n - 1];
  d_out.assign(params.layers[n - 1].out, 0.0);
  d_out[selected] = upstream * activate_grad(params.arch.output_activation, pre_[n - 1][selected]);

  for (std::size_t li = n; li-- > 0;) {
    const DenseLayer& layer = params.layers[li];
    DenseLayer& g = into.layers[li];
    std::span<const double> x = li == 0 ? input : std::span<const double>(post_[li - 1]);
    const auto& d = delta_[li];
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double dr = scale * d[r];
      if (dr == 0.0) continue;
      double* grow = g.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) grow[c] += dr * x[c];
      g.bias[r] += dr;
    }
    if (li == 0) break;
    auto& d_prev = delta_[li - 1];
    d_prev.assign(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      if (d[r] == 0.0) continue;
      const double* row = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) d_prev[c] += row[c] * d[r];
    }
    for (std::size_t c = 0; c < layer.in; ++c) {
      d_prev[c] *= activate_grad(params.arch.hidden_activation, pre_[li - 1][c]);
    }
  }
}

void apply_update(QNetworkParams& params, const GradientSet& delta, double mu) {
  if (delta.layers.size() != params.layers.size()) throw std::invalid_argument("apply_update: shape mismatch");
  QNetworkParams next = params;
  for (std::size_t i = 0; i < next.layers.size(); ++i) {
    auto& l = next.layers[i];
    const auto& d = delta.layers[i];
    if (d.weights.size() != l.weights.size() || d.bias.size() != l.bias.size()) {
      throw std::invalid_argument("apply_update: shape mismatch");
    }
    for (std::size_t j = 0; j < l.weights.size(); ++j) l.weights[j] += mu * d.weights[j];
    for (std::size_t j = 0; j < l.bias.size(); ++j) l.bias[j] += mu * d.bias[j];
  }
  if (!next.all_finite()) throw std::domain_error("apply_update: non-finite parameters");
  params = std::move(next);
}

AdamOptimizer::AdamOptimizer(const QNetworkParams& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(GradientSet::zeros_like(params)), v_(GradientSet::zeros_like(params)) {}

void AdamOptimizer::apply(QNetworkParams& params, const GradientSet& delta, double mu) {
  if (delta.layers.size() != params.layers.size()) throw std::invalid_argument("adam: shape mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](std::vector<double>& theta, const std::vector<double>& d,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * d[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * d[j] * d[j];
      theta[j] += mu * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weights, delta.layers[i].weights, m_.layers[i].weights, v_.layers[i].weights);
    update(params.layers[i].bias, delta.layers[i].bias, m_.layers[i].bias, v_.layers[i].bias);
  }
  if (!params.all_finite()) throw std::domain_error("adam: non-finite parameters");
}

GradCheckReport gradient_check(std::size_t networks, std::uint64_t seed, double h) {
  Rng rng(seed);
  auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  GradCheckReport report;
  report.networks = networks;
  for (std::size_t n = 0; n < networks; ++n) {
    Architecture arch;
    arch.input_dim = 2 + rng.uniform_index(5);
    arch.hidden_dims.assign(1 + rng.uniform_index(2), 0);
    for (auto& d : arch.hidden_dims) d = 2 + rng.uniform_index(7);
    arch.output_dim = 2 + rng.uniform_index(5);
    QNetworkParams params = init_network(arch, rng);
    for (auto& layer : params.layers) {
      for (auto& b : layer.bias) b = uniform(-0.5, 0.5);
    }
    std::vector<double> x(arch.input_dim);
    for (auto& v : x) v = uniform(-1.0, 1.0);
    const std::size_t a = rng.uniform_index(arch.output_dim);
    const double y = uniform(-2.0, 2.0);
    const double w = uniform(0.1, 1.0);

    // The gradient returned by weighted_td_loss is that of w * L.
    auto loss_at = [&](const QNetworkParams& p) { return w * weighted_td_loss(forward(p, x)[a], y, w).loss; };
    const LossTerm term = weighted_td_loss(forward(params, x)[a], y, w);
    const GradientSet g = backward(params, x, a, term.grad);

    double diff2 = 0.0, an2 = 0.0, num2 = 0.0;
    auto probe = [&](double& theta, double analytic) {
      const double saved = theta;
      theta = saved + h;
      const double up = loss_at(params);
      theta = saved - h;
      const double down = loss_at(params);
      theta = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic - numeric) * (analytic - numeric);
      an2 += analytic * analytic;
      num2 += numeric * numeric;
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      for (std::size_t i = 0; i < params.layers[l].weights.size(); ++i) {
        probe(params.layers[l].weights[i], g.layers[l].weights[i]);
      }
      for (std::size_t i = 0; i < params.layers[l].bias.size(); ++i) {
        probe(params.layers[l].bias[i], g.layers[l].bias[i]);
      }
    }
    const double scale = std::max(std::sqrt(an2), std::sqrt(num2));
    const double rel = scale > 0.0 ? std::sqrt(diff2) / scale : 0.0;
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  return report;
}

void save_checkpoint(const QNetworkParams& params, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  const auto& a = params.arch;
  put_u32(out, static_cast<std::uint32_t>(a.input_dim));
  put_u32(out, static_cast<std::uint32_t>(a.output_dim));
  put_u32(out, static_cast<std::uint32_t>(a.hidden_dims.size()));
  for (auto h : a.hidden_dims) put_u32(out, static_cast<std::uint32_t>(h));
  put_u8(out, static_cast<std::uint8_t>(a.hidden_activation));
  put_u8(out, static_cast<std::uint8_t>(a.output_activation));
  for (const auto& l : params.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.out));
    put_u32(out, static_cast<std::uint32_t>(l.in));
    for (double w : l.weights) put_f64(out, w);
    for (double b : l.bias) put_f64(out, b);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

QNetworkParams load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  read_exact(in, magic.data(), magic.size());
  if (magic != kMagic) throw std::runtime_error("checkpoint: bad magic");
  const auto version = get_u32(in);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  QNetworkParams p;
  p.arch.input_dim = get_u32(in);
  p.arch.output_dim = get_u32(in);
  const auto n_hidden = get_u32(in);
  if (n_hidden > 64) throw std::runtime_error("checkpoint: implausible layer count");
  p.arch.hidden_dims.resize(n_hidden);
  for (auto& h : p.arch.hidden_dims) h = get_u32(in);
  p.arch.hidden_activation = to_activation(get_u8(in));
  p.arch.output_activation = to_activation(get_u8(in));
  p.arch.validate();

  std::vector<std::size_t> dims{p.arch.input_dim};
  dims.insert(dims.end(), p.arch.hidden_dims.begin(), p.arch.hidden_dims.end());
  dims.push_back(p.arch.output_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    l.out = get_u32(in);
    l.in = get_u32(in);
    if (l.in != dims[i] || l.out != dims[i + 1]) throw std::runtime_error("checkpoint: layer shape mismatch");
    l.weights.resize(l.in * l.out);
    for (auto& w : l.weights) w = get_f64(in);
    l.bias.resize(l.out);
    for (auto& b : l.bias) b = get_f64(in);
    p.layers.push_back(std::move(l));
  }
  return p;
}

void save_checkpoint(const QNetworkParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  save_checkpoint(params, out);
}

QNetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace aoirelay

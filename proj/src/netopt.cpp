#include "amrl/netopt.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include "amrl/error.hpp"
#include "amrl/kernels.hpp"

namespace amrl::netopt {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace {

std::vector<std::size_t> layer_offsets(const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> off;
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    off.push_back(pos);
    pos += dims[l] * dims[l + 1] + dims[l + 1];
  }
  off.push_back(pos);
  return off;
}

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw ShapeError("network needs at least an input and an output dimension");
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("layer dimensions must be positive");
  }
}

void affine_forward(Backend b, kernels::AffineShape s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  if (b == Backend::kReference) {
    kernels::reference::affine_forward(s, x, w, bias, y);
  } else {
    kernels::parallel::affine_forward(s, x, w, bias, y);
  }
}

void affine_backward(Backend b, kernels::AffineShape s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dw, std::span<double> db, std::span<double> dx) {
  if (b == Backend::kReference) {
    kernels::reference::affine_backward(s, x, w, dy, dw, db, dx);
  } else {
    kernels::parallel::affine_backward(s, x, w, dy, dw, db, dx);
  }
}

}  // namespace

Mlp Mlp::init(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  check_dims(layer_dims);
  const auto off = layer_offsets(layer_dims);
  std::vector<double> params(off.back());
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_dims[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = off[l]; i < off[l + 1]; ++i) params[i] = dist(rng);
  }
  return Mlp(std::move(layer_dims), std::move(params));
}

Mlp::Mlp(std::vector<std::size_t> layer_dims, std::vector<double> params)
    : dims_(std::move(layer_dims)), params_(std::move(params)) {
  check_dims(dims_);
  offsets_ = layer_offsets(dims_);
  if (params_.size() != offsets_.back()) {
    throw ShapeError("parameter count " + std::to_string(params_.size()) + " does not match layer dims (" +
                     std::to_string(offsets_.back()) + ")");
  }
}

Matrix Mlp::forward(const Matrix& x) const {
  Tape tape;
  forward(x, tape);
  return std::move(tape.output);
}

const Matrix& Mlp::forward(const Matrix& x, Tape& tape) const {
  if (x.cols != input_size()) {
    throw ShapeError("input width " + std::to_string(x.cols) + " != network input " + std::to_string(input_size()));
  }
  tape.inputs.resize(layers());
  tape.inputs[0] = x;
  const std::span<const double> p(params_);
  for (std::size_t l = 0; l < layers(); ++l) {
    const kernels::AffineShape s{x.rows, dims_[l], dims_[l + 1]};
    Matrix y(x.rows, s.out);
    affine_forward(backend_, s, tape.inputs[l].data, p.subspan(weight_offset(l), s.in * s.out),
                   p.subspan(bias_offset(l), s.out), y.data);
    if (l + 1 < layers()) {
      kernels::relu(y.data);
      tape.inputs[l + 1] = std::move(y);
    } else {
      tape.output = std::move(y);
    }
  }
  return tape.output;
}

Matrix Mlp::backward(const Tape& tape, const Matrix& upstream, std::span<double> param_grad) const {
  if (upstream.cols != output_size() || upstream.rows != tape.output.rows) {
    throw ShapeError("upstream gradient shape does not match network output");
  }
  if (param_grad.size() != params_.size()) throw ShapeError("gradient buffer size does not match parameters");
  const std::span<const double> p(params_);
  Matrix dy = upstream;
  for (std::size_t l = layers(); l-- > 0;) {
    const kernels::AffineShape s{dy.rows, dims_[l], dims_[l + 1]};
    Matrix dx(dy.rows, s.in);
    affine_backward(backend_, s, tape.inputs[l].data, p.subspan(weight_offset(l), s.in * s.out), dy.data,
                    param_grad.subspan(weight_offset(l), s.in * s.out), param_grad.subspan(bias_offset(l), s.out),
                    dx.data);
    // Hidden-layer inputs are post-ReLU values; zero entries had a
    // non-positive pre-activation.
    if (l > 0) kernels::relu_backward(tape.inputs[l].data, dx.data);
    dy = std::move(dx);
  }
  return dy;
}

Gradients grad(const Mlp& net, const Matrix& input, const Matrix& upstream) {
  Mlp::Tape tape;
  net.forward(input, tape);
  Gradients g;
  g.params.assign(net.param_count(), 0.0);
  g.input = net.backward(tape, upstream, g.params);
  return g;
}

AdamState::AdamState(std::size_t param_count, AdamConfig config)
    : config_(config), m_(param_count, 0.0), v_(param_count, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("Adam state not congruent with parameters");
  for (double g : grads) {
    if (!std::isfinite(g)) throw OptimizerFault("non-finite gradient passed to Adam");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

void AdamState::write(std::ostream& out) const {
  write_f64(out, config_.learning_rate);
  write_f64(out, config_.beta1);
  write_f64(out, config_.beta2);
  write_f64(out, config_.epsilon);
  write_u64(out, step_);
  write_f64s(out, m_);
  write_f64s(out, v_);
}

AdamState AdamState::read(std::istream& in) {
  AdamState s;
  s.config_.learning_rate = read_f64(in, "adam.learning_rate");
  s.config_.beta1 = read_f64(in, "adam.beta1");
  s.config_.beta2 = read_f64(in, "adam.beta2");
  s.config_.epsilon = read_f64(in, "adam.epsilon");
  s.step_ = read_u64(in, "adam.step");
  s.m_ = read_f64s(in, "adam.m");
  s.v_ = read_f64s(in, "adam.v");
  if (s.m_.size() != s.v_.size()) throw CheckpointError("moment sizes differ", "adam.v");
  return s;
}

GradCheckReport check_gradient(const std::function<double(std::span<const double>)>& loss,
                               std::span<const double> analytic, std::vector<double> point, double tolerance,
                               double step, double floor) {
  if (analytic.size() != point.size()) throw ShapeError("analytic gradient size does not match point");
  GradCheckReport r;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + step;
    const double up = loss(point);
    point[i] = saved - step;
    const double down = loss(point);
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    const double rel = std::abs(numeric - analytic[i]) / denom;
    if (rel > r.max_relative_error || !std::isfinite(rel)) {
      r.max_relative_error = std::isfinite(rel) ? rel : INFINITY;
      r.worst_index = i;
    }
    ++r.checked;
  }
  r.passed = r.max_relative_error <= tolerance;
  return r;
}

GradCheckReport finite_diff_check(const Mlp& net, const Matrix& batch, double tolerance, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix upstream(batch.rows, net.output_size());
  for (double& v : upstream.data) v = normal(rng);

  auto functional = [&upstream](const Matrix& out) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * upstream.data[i];
    return s;
  };
  const Gradients g = grad(net, batch, upstream);

  // Parameters and inputs checked jointly as one point.
  std::vector<double> point(net.params().begin(), net.params().end());
  point.insert(point.end(), batch.data.begin(), batch.data.end());
  std::vector<double> analytic = g.params;
  analytic.insert(analytic.end(), g.input.data.begin(), g.input.data.end());

  const std::size_t np = net.param_count();
  auto loss = [&](std::span<const double> pt) {
    Mlp probe(net.dims(), std::vector<double>(pt.begin(), pt.begin() + static_cast<std::ptrdiff_t>(np)));
    probe.set_backend(net.backend());
    Matrix x(batch.rows, batch.cols);
    std::copy(pt.begin() + static_cast<std::ptrdiff_t>(np), pt.end(), x.data.begin());
    return functional(probe.forward(x));
  };
  return check_gradient(loss, analytic, std::move(point), tolerance);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in, const char* field) {
  char buf[8];
  if (!in.read(buf, 8)) throw CheckpointError("truncated", field);
  std::uint64_t v = 0;
  std::memcpy(&v, buf, 8);
  return v;
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

double read_f64(std::istream& in, const char* field) { return std::bit_cast<double>(read_u64(in, field)); }

void write_f64s(std::ostream& out, std::span<const double> v) {
  write_u64(out, v.size());
  for (double d : v) write_f64(out, d);
}

std::vector<double> read_f64s(std::istream& in, const char* field) {
  const std::uint64_t n = read_u64(in, field);
  if (n > (1ULL << 32)) throw CheckpointError("implausible length", field);
  std::vector<double> v(n);
  for (double& d : v) d = read_f64(in, field);
  return v;
}

void write_mlp(std::ostream& out, const Mlp& net) {
  write_u64(out, net.dims().size());
  for (std::size_t d : net.dims()) write_u64(out, d);
  write_f64s(out, net.params());
}

Mlp read_mlp(std::istream& in) {
  const std::uint64_t n = read_u64(in, "mlp.dims");
  if (n < 2 || n > 64) throw CheckpointError("implausible layer count", "mlp.dims");
  std::vector<std::size_t> dims(n);
  for (auto& d : dims) d = read_u64(in, "mlp.dims");
  std::vector<double> params = read_f64s(in, "mlp.params");
  try {
    return Mlp(std::move(dims), std::move(params));
  } catch (const ShapeError& e) {
    throw CheckpointError(e.what(), "mlp.params");
  }
}

}  // namespace amrl::netopt

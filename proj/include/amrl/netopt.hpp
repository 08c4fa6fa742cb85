#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace amrl::netopt {

/// Row-major dense matrix; rows are batch samples.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  bool operator==(const Matrix&) const = default;
};

enum class Backend { kReference, kParallel };

/// Fully connected network: ReLU on hidden layers, identity output.
/// Parameters live in one flat vector, layer by layer, weights (out x in)
/// followed by biases.
class Mlp {
 public:
  /// Seeded uniform fan-in initialization, U(-1/sqrt(in), 1/sqrt(in)).
  static Mlp init(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  Mlp() = default;
  Mlp(std::vector<std::size_t> layer_dims, std::vector<double> params);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t layers() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  std::size_t input_size() const { return dims_.front(); }
  std::size_t output_size() const { return dims_.back(); }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + dims_[layer] * dims_[layer + 1]; }

  Backend backend() const { return backend_; }
  void set_backend(Backend b) { backend_ = b; }

  /// Activations kept for the backward pass.
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    Matrix output;
  };

  Matrix forward(const Matrix& x) const;
  const Matrix& forward(const Matrix& x, Tape& tape) const;

  /// Accumulates parameter gradients into param_grad and returns the
  /// gradient with respect to the network input.
  Matrix backward(const Tape& tape, const Matrix& upstream, std::span<double> param_grad) const;

  bool operator==(const Mlp& o) const { return dims_ == o.dims_ && params_ == o.params_; }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  Backend backend_ = Backend::kParallel;
};

struct Gradients {
  std::vector<double> params;
  Matrix input;
};

/// Exact reverse-mode gradients of sum(output .* upstream).
Gradients grad(const Mlp& net, const Matrix& input, const Matrix& upstream);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

/// Moments congruent to one parameter vector.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t param_count, AdamConfig config);

  /// Bias-corrected Adam update in place. Throws OptimizerFault on a
  /// non-finite gradient (parameters are left untouched).
  void step(std::span<double> params, std::span<const double> grads);

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

  void write(std::ostream& out) const;
  static AdamState read(std::istream& in);
  bool operator==(const AdamState&) const = default;

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t step_ = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  bool passed = true;
};

/// Central finite differences of a scalar function against an analytic
/// gradient. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport check_gradient(const std::function<double(std::span<const double>)>& loss,
                               std::span<const double> analytic, std::vector<double> point,
                               double tolerance, double step = 1e-5, double floor = 1e-6);

/// Checks grad() for every parameter and input of net on the batch, using
/// a seeded random linear functional of the output as the loss.
GradCheckReport finite_diff_check(const Mlp& net, const Matrix& batch, double tolerance,
                                  std::uint64_t seed = 7);

/// Little-endian layout: u64 layer-dim count, u64 dims, u64 param count,
/// IEEE-754 doubles.
void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

void write_u64(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64(std::istream& in, const char* field);
void write_f64(std::ostream& out, double v);
double read_f64(std::istream& in, const char* field);
void write_f64s(std::ostream& out, std::span<const double> v);
std::vector<double> read_f64s(std::istream& in, const char* field);

}  // namespace amrl::netopt

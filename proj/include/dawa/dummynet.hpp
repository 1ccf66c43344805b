#pragma once

// Feedforward ReLU classifier with a 2K-logit head. Logits 0..K-1 are the
// authentic classes; logit y+K is the dummy partner of class y.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dawa/errors.hpp"
#include "dawa/numkit.hpp"
#include "dawa/rng.hpp"

namespace dawa {

using numkit::Index;

template <typename Scalar>
class Mlp {
 public:
  using Vec = numkit::Vector<Scalar>;
  using Mat = numkit::Matrix<Scalar>;

  // All-zero parameters.
  Mlp(std::vector<Index> layer_dims, Index num_classes)
      : dims_(std::move(layer_dims)), num_classes_(num_classes) {
    if (dims_.size() < 2) throw ArgumentError("Mlp: need at least input and output dims");
    for (Index d : dims_)
      if (d <= 0) throw ArgumentError("Mlp: layer dims must be positive");
    if (num_classes_ <= 0 || dims_.back() != 2 * num_classes_)
      throw ArgumentError("Mlp: output dim " + std::to_string(dims_.back()) + " must equal 2*K with K=" +
                          std::to_string(num_classes_));
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      weights_.push_back(Mat::Zero(dims_[l + 1], dims_[l]));
      biases_.push_back(Vec::Zero(dims_[l + 1]));
    }
  }

  // Glorot-uniform weights, a = sqrt(6/(fan_in+fan_out)); zero biases.
  static Mlp glorot_uniform(std::vector<Index> layer_dims, Index num_classes, std::uint64_t seed) {
    Mlp m(std::move(layer_dims), num_classes);
    Rng rng{seed, 0x4d4c50u};
    for (auto& w : m.weights_) {
      const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Index r = 0; r < w.rows(); ++r)
        for (Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<Scalar>(rng.uniform(-a, a));
    }
    return m;
  }

  const std::vector<Index>& layer_dims() const noexcept { return dims_; }
  Index num_classes() const noexcept { return num_classes_; }
  Index input_dim() const noexcept { return dims_.front(); }
  Index output_dim() const noexcept { return dims_.back(); }
  // Number of affine layers.
  std::size_t depth() const noexcept { return weights_.size(); }

  const Mat& weight(std::size_t l) const { return weights_.at(l); }
  const Vec& bias(std::size_t l) const { return biases_.at(l); }
  Mat& weight(std::size_t l) { return weights_.at(l); }
  Vec& bias(std::size_t l) { return biases_.at(l); }

  Index parameter_count() const {
    Index n = 0;
    for (std::size_t l = 0; l < depth(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < depth(); ++l)
      if (!numkit::all_finite(weights_[l]) || !numkit::all_finite(biases_[l])) return false;
    return true;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.dims_ != b.dims_ || a.num_classes_ != b.num_classes_) return false;
    for (std::size_t l = 0; l < a.depth(); ++l)
      if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
    return true;
  }

 private:
  std::vector<Index> dims_;
  Index num_classes_;
  std::vector<Mat> weights_;  // weights_[l] is dims[l+1] x dims[l]
  std::vector<Vec> biases_;
};

template <typename Scalar>
class LogitVector {
 public:
  using Vec = numkit::Vector<Scalar>;

  LogitVector(Vec z, Index num_classes) : z_(std::move(z)), k_(num_classes) {
    if (k_ <= 0 || z_.size() != 2 * k_)
      throw DimensionError("LogitVector: expected " + std::to_string(2 * k_) + " logits, got " +
                           std::to_string(z_.size()));
  }

  const Vec& values() const noexcept { return z_; }
  Index num_classes() const noexcept { return k_; }
  Scalar operator[](Index i) const { return z_(i); }
  Scalar authentic(Index y) const { return z_(y); }
  Scalar dummy(Index y) const { return z_(y + k_); }

 private:
  Vec z_;
  Index k_;
};

// Activations recorded by forward(): inputs_[l] is the input to affine layer l,
// pre_[l] its pre-activation.
template <typename Scalar>
struct ForwardTape {
  std::vector<numkit::Vector<Scalar>> inputs;
  std::vector<numkit::Vector<Scalar>> pre;
  std::vector<Index> layer_dims;
};

template <typename Scalar>
struct ForwardResult {
  LogitVector<Scalar> logits;
  ForwardTape<Scalar> tape;
};

template <typename Scalar>
struct ParamGrads {
  std::vector<numkit::Matrix<Scalar>> weights;
  std::vector<numkit::Vector<Scalar>> biases;

  static ParamGrads zeros_like(const Mlp<Scalar>& m) {
    ParamGrads g;
    for (std::size_t l = 0; l < m.depth(); ++l) {
      g.weights.push_back(numkit::Matrix<Scalar>::Zero(m.weight(l).rows(), m.weight(l).cols()));
      g.biases.push_back(numkit::Vector<Scalar>::Zero(m.bias(l).size()));
    }
    return g;
  }

  ParamGrads& operator+=(const ParamGrads& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += o.weights[l];
      biases[l] += o.biases[l];
    }
    return *this;
  }

  ParamGrads& operator*=(Scalar s) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] *= s;
      biases[l] *= s;
    }
    return *this;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (!numkit::all_finite(weights[l]) || !numkit::all_finite(biases[l])) return false;
    return true;
  }
};

namespace detail {

template <typename Scalar, typename Derived>
void check_input(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.input_dim())
    throw DimensionError("forward: input has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(model.input_dim()));
}

template <typename Scalar>
void check_tape(const Mlp<Scalar>& model, const ForwardTape<Scalar>& tape, Index grad_dim) {
  if (tape.layer_dims != model.layer_dims() || tape.inputs.size() != model.depth() ||
      tape.pre.size() != model.depth())
    throw StateError("backward: tape was not recorded against this model");
  if (grad_dim != model.output_dim())
    throw StateError("backward: upstream gradient has " + std::to_string(grad_dim) + " entries, expected " +
                     std::to_string(model.output_dim()));
}

// Reverse pass. Returns dL/dx; fills `params` when non-null.
template <typename Scalar, typename Derived>
numkit::Vector<Scalar> backward(const Mlp<Scalar>& model, const ForwardTape<Scalar>& tape,
                                const Eigen::MatrixBase<Derived>& grad_z, ParamGrads<Scalar>* params) {
  check_tape(model, tape, grad_z.size());
  numkit::Vector<Scalar> delta = grad_z;  // dL/d(pre-activation of current layer)
  if (params) *params = ParamGrads<Scalar>::zeros_like(model);
  for (std::size_t l = model.depth(); l-- > 0;) {
    if (l + 1 < model.depth()) {
      // ReLU' is taken as 0 at the kink.
      delta = (tape.pre[l].array() > Scalar(0)).select(delta, Scalar(0));
    }
    if (params) {
      params->weights[l].noalias() = delta * tape.inputs[l].transpose();
      params->biases[l] = delta;
    }
    delta = model.weight(l).transpose() * delta;
  }
  return delta;
}

}  // namespace detail

template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(model, x);
  ForwardTape<Scalar> tape;
  tape.layer_dims = model.layer_dims();
  numkit::Vector<Scalar> a = x;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    numkit::Vector<Scalar> pre = model.weight(l) * a + model.bias(l);
    tape.inputs.push_back(std::move(a));
    a = (l + 1 < model.depth()) ? numkit::Vector<Scalar>(pre.cwiseMax(Scalar(0))) : pre;
    tape.pre.push_back(std::move(pre));
  }
  return {LogitVector<Scalar>(std::move(a), model.num_classes()), std::move(tape)};
}

// Forward pass without recording a tape.
template <typename Scalar, typename Derived>
LogitVector<Scalar> logits(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(model, x);
  numkit::Vector<Scalar> a = x;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    numkit::Vector<Scalar> pre = model.weight(l) * a + model.bias(l);
    a = (l + 1 < model.depth()) ? numkit::Vector<Scalar>(pre.cwiseMax(Scalar(0))) : pre;
  }
  return LogitVector<Scalar>(std::move(a), model.num_classes());
}

template <typename Scalar, typename Derived>
numkit::Vector<Scalar> input_grad(const Mlp<Scalar>& model, const ForwardTape<Scalar>& tape,
                                  const Eigen::MatrixBase<Derived>& grad_z) {
  return detail::backward(model, tape, grad_z, static_cast<ParamGrads<Scalar>*>(nullptr));
}

template <typename Scalar, typename Derived>
ParamGrads<Scalar> param_grad(const Mlp<Scalar>& model, const ForwardTape<Scalar>& tape,
                              const Eigen::MatrixBase<Derived>& grad_z) {
  ParamGrads<Scalar> g;
  detail::backward(model, tape, grad_z, &g);
  return g;
}

struct DummyPrediction {
  Index predicted_class;  // authentic class in 0..K-1
  Index raw_argmax;       // index over all 2K logits
};

// Argmax over all 2K logits (lowest index wins ties), with dummy hits folded
// back onto their authentic class.
template <typename Scalar>
DummyPrediction predict_dummy(const LogitVector<Scalar>& z) {
  Index raw = 0;
  const auto& v = z.values();
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(raw)) raw = i;
  const Index k = z.num_classes();
  return {raw < k ? raw : raw - k, raw};
}

using Model = Mlp<double>;
using Logits = LogitVector<double>;
using Tape = ForwardTape<double>;
using Vec = numkit::Vector<double>;
using Mat = numkit::Matrix<double>;

// Binary model file; layout documented in docs/FORMATS.md.
inline constexpr char kModelMagic[8] = {'D', 'A', 'W', 'A', 'M', 'L', 'P', '\0'};
inline constexpr std::uint32_t kModelVersion = 1;

std::string serialize_model(const Model& model);
Model deserialize_model(const std::string& bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace dawa

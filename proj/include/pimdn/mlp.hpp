#pragma once

// Fully connected ELU networks over a flat parameter vector.
//
// Parameter layout, fixed for checkpoint portability: layers in order from
// input to output; within a layer the weight matrix (out x in) row-major,
// followed by the bias vector (out). Hidden layers use ELU, the output layer
// is linear.

#include <cstddef>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "pimdn/autodiff.hpp"

namespace pimdn {

struct MlpLayout {
  int input_dim = 1;
  int hidden_width = 16;
  int hidden_layers = 2;
  int output_dim = 1;

  int layer_count() const { return hidden_layers + 1; }
  int fan_in(int layer) const { return layer == 0 ? input_dim : hidden_width; }
  int fan_out(int layer) const { return layer == hidden_layers ? output_dim : hidden_width; }

  friend bool operator==(const MlpLayout&, const MlpLayout&) = default;
};

std::size_t param_count(const MlpLayout& layout);

/// Offset of layer `layer`'s weight block in the flat parameter vector.
std::size_t layer_offset(const MlpLayout& layout, int layer);

void validate(const MlpLayout& layout);

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Network outputs (output_dim x N) for inputs (input_dim x N).
///
/// Works for Scalar = double and Scalar = ad::Var; with Var every
/// multiply-add lands on the tape.
template <typename Scalar>
MatrixX<Scalar> mlp_forward(const MlpLayout& layout, std::span<const Scalar> params,
                            const MatrixX<Scalar>& inputs) {
  using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Col = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  MatrixX<Scalar> a = inputs;
  for (int l = 0; l < layout.layer_count(); ++l) {
    const int in = layout.fan_in(l);
    const int out = layout.fan_out(l);
    const Scalar* base = params.data() + layer_offset(layout, l);
    Eigen::Map<const RowMajor> w(base, out, in);
    Eigen::Map<const Col> b(base + static_cast<std::ptrdiff_t>(out) * in, out);
    MatrixX<Scalar> z;
    if constexpr (std::is_same_v<Scalar, double>) {
      z.noalias() = w * a;
    } else {
      z = w.lazyProduct(a);
    }
    z.colwise() += b;
    if (l + 1 < layout.layer_count()) {
      a = z.unaryExpr([](const Scalar& v) -> Scalar {
        using ad::elu;
        return elu(v);
      });
    } else {
      a = std::move(z);
    }
  }
  return a;
}

/// Batched double-precision forward pass that caches activations so the
/// parameter gradient of any function of the outputs can be pulled back.
class MlpBatch {
 public:
  MlpBatch(const MlpLayout& layout, const Eigen::VectorXd& params, Eigen::MatrixXd inputs);

  const Eigen::MatrixXd& output() const { return activations_.back(); }

  /// Parameter gradient given d(loss)/d(output), same shape as output().
  Eigen::VectorXd backprop(const Eigen::MatrixXd& output_adjoint) const;

 private:
  MlpLayout layout_;
  const Eigen::VectorXd* params_;
  // activations_[0] is the input; activations_[l + 1] is layer l's output.
  std::vector<Eigen::MatrixXd> activations_;
};

/// How MlpGraph obtains parameter gradients.
enum class GradientPath {
  /// Outputs enter the tape as leaves; the network part is pulled back with
  /// batched matrix products (MlpBatch). Used for training.
  layered,
  /// Parameters are tape leaves and the whole network is recorded scalar by
  /// scalar. Reference path, slow.
  full_tape,
};

/// Network outputs for a batch of inputs, exposed as tape variables.
class MlpGraph {
 public:
  MlpGraph(const MlpLayout& layout, const Eigen::VectorXd& params, const Eigen::MatrixXd& inputs,
           ad::Tape& tape, GradientPath path = GradientPath::layered);

  const ad::Var& output(Eigen::Index row, Eigen::Index col) const {
    return outputs_[static_cast<std::size_t>(col * layout_.output_dim + row)];
  }
  Eigen::Index batch_size() const { return batch_size_; }
  ad::Tape& tape() const { return *tape_; }
  GradientPath path() const { return path_; }

  /// d(loss)/d(params) for a scalar built on this graph's tape.
  Eigen::VectorXd gradient(const ad::Var& loss) const;

 private:
  MlpLayout layout_;
  ad::Tape* tape_;
  GradientPath path_;
  Eigen::Index batch_size_;
  std::vector<ad::Var> outputs_;  // column-major, output_dim x N
  std::optional<MlpBatch> batch_;
};

}  // namespace pimdn

#include "pimdn/mlp.hpp"

#include <string>

#include "pimdn/errors.hpp"

namespace pimdn {

void validate(const MlpLayout& layout) {
  if (layout.input_dim < 1 || layout.hidden_width < 1 || layout.hidden_layers < 1 ||
      layout.output_dim < 1) {
    throw InvalidConfig("network dimensions must be positive (input " +
                        std::to_string(layout.input_dim) + ", width " +
                        std::to_string(layout.hidden_width) + ", layers " +
                        std::to_string(layout.hidden_layers) + ", output " +
                        std::to_string(layout.output_dim) + ")");
  }
}

std::size_t layer_offset(const MlpLayout& layout, int layer) {
  std::size_t offset = 0;
  for (int l = 0; l < layer; ++l) {
    const auto in = static_cast<std::size_t>(layout.fan_in(l));
    const auto out = static_cast<std::size_t>(layout.fan_out(l));
    offset += out * in + out;
  }
  return offset;
}

std::size_t param_count(const MlpLayout& layout) {
  return layer_offset(layout, layout.layer_count());
}

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

MlpBatch::MlpBatch(const MlpLayout& layout, const Eigen::VectorXd& params, Eigen::MatrixXd inputs)
    : layout_(layout), params_(&params) {
  activations_.reserve(static_cast<std::size_t>(layout.layer_count()) + 1);
  activations_.push_back(std::move(inputs));
  for (int l = 0; l < layout.layer_count(); ++l) {
    const int in = layout.fan_in(l);
    const int out = layout.fan_out(l);
    const double* base = params.data() + layer_offset(layout, l);
    RowMajorMap w(base, out, in);
    Eigen::Map<const Eigen::VectorXd> b(base + static_cast<std::ptrdiff_t>(out) * in, out);
    Eigen::MatrixXd z(out, activations_.back().cols());
    z.noalias() = w * activations_.back();
    z.colwise() += b;
    if (l + 1 < layout.layer_count()) {
      z = z.array().max(0.0) + (z.array().min(0.0).exp() - 1.0);
    }
    activations_.push_back(std::move(z));
  }
}

Eigen::VectorXd MlpBatch::backprop(const Eigen::MatrixXd& output_adjoint) const {
  Eigen::VectorXd grad(static_cast<Eigen::Index>(param_count(layout_)));
  Eigen::MatrixXd g = output_adjoint;
  for (int l = layout_.layer_count() - 1; l >= 0; --l) {
    const int in = layout_.fan_in(l);
    const int out = layout_.fan_out(l);
    const auto offset = static_cast<Eigen::Index>(layer_offset(layout_, l));
    const Eigen::MatrixXd& prev = activations_[static_cast<std::size_t>(l)];

    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dw(
        grad.data() + offset, out, in);
    dw.noalias() = g * prev.transpose();
    grad.segment(offset + static_cast<Eigen::Index>(out) * in, out) = g.rowwise().sum();

    if (l > 0) {
      RowMajorMap w(params_->data() + offset, out, in);
      Eigen::MatrixXd gp(in, g.cols());
      gp.noalias() = w.transpose() * g;
      // elu'(z) is 1 for z >= 0 and e^z = a + 1 otherwise; a >= 0 iff z >= 0.
      g = gp.array() * (prev.array().min(0.0) + 1.0);
    }
  }
  return grad;
}

MlpGraph::MlpGraph(const MlpLayout& layout, const Eigen::VectorXd& params,
                   const Eigen::MatrixXd& inputs, ad::Tape& tape, GradientPath path)
    : layout_(layout), tape_(&tape), path_(path), batch_size_(inputs.cols()) {
  validate(layout);
  if (static_cast<std::size_t>(params.size()) != param_count(layout)) {
    throw InvalidInput("parameter vector has " + std::to_string(params.size()) +
                       " entries, layout needs " + std::to_string(param_count(layout)));
  }
  if (inputs.rows() != layout.input_dim) {
    throw InvalidInput("network input has " + std::to_string(inputs.rows()) +
                       " rows, layout expects " + std::to_string(layout.input_dim));
  }
  outputs_.reserve(static_cast<std::size_t>(layout.output_dim * batch_size_));
  if (path == GradientPath::layered) {
    batch_.emplace(layout, params, inputs);
    const Eigen::MatrixXd& out = batch_->output();
    tape.variables(std::span<const double>(out.data(), static_cast<std::size_t>(out.size())),
                   outputs_);
  } else {
    std::vector<ad::Var> theta;
    theta.reserve(static_cast<std::size_t>(params.size()));
    for (double p : params) theta.push_back(tape.parameter(p));
    const MatrixX<ad::Var> x = inputs.cast<ad::Var>();
    const MatrixX<ad::Var> out = mlp_forward<ad::Var>(layout, theta, x);
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      for (Eigen::Index i = 0; i < out.rows(); ++i) outputs_.push_back(out(i, j));
    }
  }
}

Eigen::VectorXd MlpGraph::gradient(const ad::Var& loss) const {
  const ad::Gradient g = tape_->backward(loss);
  if (path_ == GradientPath::full_tape) return g.parameters();
  Eigen::MatrixXd adjoint(layout_.output_dim, batch_size_);
  for (Eigen::Index j = 0; j < batch_size_; ++j) {
    for (Eigen::Index i = 0; i < layout_.output_dim; ++i) adjoint(i, j) = g.wrt(output(i, j));
  }
  return batch_->backprop(adjoint);
}

}  // namespace pimdn

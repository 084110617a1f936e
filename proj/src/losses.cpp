#include "pimdn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pimdn/errors.hpp"

namespace pimdn {

ClassMap ClassMap::identity(int classes) {
  ClassMap g;
  for (int c = 1; c <= classes; ++c) g.component_of_class.push_back(c);
  return g;
}

int ClassMap::component(int label) const {
  if (label < 1 || label > classes()) {
    throw InvalidInput("class label " + std::to_string(label) + " outside 1.." +
                       std::to_string(classes()));
  }
  return component_of_class[static_cast<std::size_t>(label - 1)] - 1;
}

void validate(const ClassMap& g, int components) {
  for (int m : g.component_of_class) {
    if (m < 1 || m > components) {
      throw InvalidConfig("class map entry " + std::to_string(m) + " is not a component in 1.." +
                          std::to_string(components));
    }
  }
}

void validate(const ResidualSpec& spec) {
  if (!(spec.step > 0.0) || !std::isfinite(spec.step)) {
    throw InvalidConfig("residual stencil step must be positive");
  }
  if (spec.kind == ResidualKind::custom && !spec.custom) {
    throw InvalidConfig("custom residual has no function attached");
  }
}

std::string to_string(ResidualKind kind) {
  switch (kind) {
    case ResidualKind::monotonicity:
      return "monotonicity";
    case ResidualKind::chafee_steady_state:
      return "chafee_steady_state";
    case ResidualKind::custom:
      return "custom";
  }
  return "unknown";
}

ResidualKind residual_kind_from_string(const std::string& name) {
  if (name == "monotonicity") return ResidualKind::monotonicity;
  if (name == "chafee_steady_state") return ResidualKind::chafee_steady_state;
  if (name == "custom") return ResidualKind::custom;
  throw InvalidConfig("unknown residual kind '" + name + "'");
}

ad::Var residual(const ResidualSpec& spec, const Stencil<ad::Var>& s) {
  switch (spec.kind) {
    case ResidualKind::monotonicity:
      return monotonicity_residual(s);
    case ResidualKind::chafee_steady_state:
      return steady_state_residual(s, spec.nu);
    case ResidualKind::custom:
      return spec.custom(s);
  }
  throw InvalidConfig("unknown residual kind");
}

double residual(const ResidualSpec& spec, const Stencil<double>& s) {
  switch (spec.kind) {
    case ResidualKind::monotonicity:
      return monotonicity_residual(s);
    case ResidualKind::chafee_steady_state:
      return steady_state_residual(s, spec.nu);
    case ResidualKind::custom: {
      ad::Tape scratch;
      const Stencil<ad::Var> lifted{scratch.variable(s.minus), scratch.variable(s.center),
                                    scratch.variable(s.plus), s.x, s.step};
      return spec.custom(lifted).value();
    }
  }
  throw InvalidConfig("unknown residual kind");
}

namespace {

using detail::LossPoint;
using StencilIndex = std::array<std::uint32_t, 3>;

ad::Var build_nll(const MdnGraph& graph, std::span<const LossPoint> points) {
  if (points.empty()) throw EmptyBatch();
  const Standardization& scaling = graph.model().scaling;
  const int m = graph.components();

  // Full-mixture records are grouped per context into one likelihood node.
  std::vector<std::uint32_t> count(graph.size() + 1, 0);
  for (const LossPoint& p : points) {
    if (p.component < 0) ++count[p.context + 1];
  }
  for (std::size_t i = 1; i < count.size(); ++i) count[i] += count[i - 1];
  std::vector<double> unit_targets(count.back());
  {
    std::vector<std::uint32_t> next(count.begin(), count.end() - 1);
    for (const LossPoint& p : points) {
      if (p.component < 0) unit_targets[next[p.context]++] = scaling.target_to_unit(p.target);
    }
  }

  std::vector<ad::Var> logs;
  std::vector<ad::Var> heads(3 * static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (count[i + 1] == count[i]) continue;
    for (int k = 0; k < m; ++k) {
      heads[static_cast<std::size_t>(k)] = graph.logit(i, k);
      heads[static_cast<std::size_t>(m + k)] = graph.unit_mean(i, k);
      heads[static_cast<std::size_t>(2 * m + k)] = graph.raw_log_scale(i, k);
    }
    const std::span<const double> us(unit_targets.data() + count[i], count[i + 1] - count[i]);
    logs.push_back(ad::mixture_loglik(heads, us, graph.model().log_sigma_min,
                                      graph.model().log_sigma_max));
  }

  std::vector<std::vector<GaussianTerm<ad::Var>>> terms(graph.size());
  for (const LossPoint& p : points) {
    if (p.component < 0) continue;
    auto& t = terms[p.context];
    if (t.empty()) t = graph.unit_terms(p.context);
    logs.push_back(component_log_density(t[static_cast<std::size_t>(p.component)],
                                         scaling.target_to_unit(p.target)));
  }
  // Standardized log-density minus log(target_std) is the target-unit log-density.
  const ad::Var mean_log = ad::sum(logs) / static_cast<double>(points.size());
  return std::log(scaling.target_std) - mean_log;
}

ad::Var build_physics(const MdnGraph& graph, std::span<const StencilIndex> stencils,
                      const ResidualSpec& spec) {
  validate(spec);
  if (stencils.empty()) return ad::Var(0.0);
  const int m = graph.components();
  std::vector<ad::Var> weighted;
  weighted.reserve(stencils.size() * static_cast<std::size_t>(m));
  for (const StencilIndex& s : stencils) {
    const std::vector<ad::Var> pi = graph.weights(s[1]);
    for (int k = 0; k < m; ++k) {
      const Stencil<ad::Var> st{graph.mean(s[0], k), graph.mean(s[1], k), graph.mean(s[2], k),
                                graph.context(s[1]), spec.step};
      weighted.push_back(pi[static_cast<std::size_t>(k)] * residual(spec, st));
    }
  }
  return ad::sum(weighted) / static_cast<double>(stencils.size());
}

LossTerms combine(const ad::Var& nll_term, const std::optional<ad::Var>& physics, double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    throw InvalidConfig("physics weight lambda must be a finite nonnegative number");
  }
  if (!physics) return {nll_term, ad::Var(0.0), nll_term};
  return {nll_term, *physics, nll_term + lambda * *physics};
}

class ContextLookup {
 public:
  explicit ContextLookup(const MdnGraph& graph) {
    for (std::size_t i = 0; i < graph.size(); ++i) index_.emplace(graph.context(i), i);
  }
  std::uint32_t operator()(double x) const {
    const auto it = index_.find(x);
    if (it == index_.end()) {
      throw InvalidInput("context " + format_double(x) + " was not evaluated by the graph");
    }
    return static_cast<std::uint32_t>(it->second);
  }

 private:
  std::unordered_map<double, std::size_t> index_;
};

std::vector<LossPoint> resolve_points(const Dataset& batch, const ContextLookup& lookup,
                                  ClassMode mode, const ClassMap& g) {
  validate(batch);
  std::vector<LossPoint> points;
  points.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    int component = -1;
    if (mode == ClassMode::class_informed && batch.has_labels() && batch.label[i] > 0) {
      component = g.component(batch.label[i]);
    }
    points.push_back({lookup(batch.context[i]), component, batch.target[i]});
  }
  return points;
}

std::vector<StencilIndex> resolve_stencils(std::span<const double> collocation, double step,
                                           const ContextLookup& lookup) {
  std::vector<StencilIndex> out;
  out.reserve(collocation.size());
  for (double x : collocation) out.push_back({lookup(x - step), lookup(x), lookup(x + step)});
  return out;
}

}  // namespace

ad::Var nll(const MdnGraph& graph, const Dataset& batch) {
  if (batch.empty()) throw EmptyBatch();
  const ContextLookup lookup(graph);
  const auto points = resolve_points(batch, lookup, ClassMode::none, ClassMap{});
  return build_nll(graph, points);
}

ad::Var class_nll(const MdnGraph& graph, const Dataset& batch, const ClassMap& g) {
  if (batch.empty()) throw EmptyBatch();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch.has_labels() || batch.label[i] <= 0) throw MissingLabel(i);
  }
  validate(g, graph.components());
  const ContextLookup lookup(graph);
  const auto points = resolve_points(batch, lookup, ClassMode::class_informed, g);
  return build_nll(graph, points);
}

ad::Var input_derivative(const MdnGraph& graph, double x, int component, int order, double h) {
  if (!(h > 0.0)) throw InvalidInput("stencil step must be positive");
  if (order != 1 && order != 2) throw InvalidInput("derivative order must be 1 or 2");
  if (component < 0 || component >= graph.components()) {
    throw InvalidInput("component index out of range");
  }
  const ContextLookup lookup(graph);
  const Stencil<ad::Var> s{graph.mean(lookup(x - h), component), graph.mean(lookup(x), component),
                           graph.mean(lookup(x + h), component), x, h};
  return order == 1 ? first_derivative(s) : second_derivative(s);
}

ad::Var physics_loss(const MdnGraph& graph, std::span<const double> collocation,
                     const ResidualSpec& spec) {
  validate(spec);
  const ContextLookup lookup(graph);
  const auto stencils = resolve_stencils(collocation, spec.step, lookup);
  return build_physics(graph, stencils, spec);
}

LossTerms total_loss(const MdnGraph& graph, const Dataset& batch, const LossSetup& setup) {
  if (batch.empty()) throw EmptyBatch();
  if (setup.class_mode == ClassMode::class_informed) validate(setup.class_map, graph.components());
  const ContextLookup lookup(graph);
  const auto points = resolve_points(batch, lookup, setup.class_mode, setup.class_map);
  const ad::Var data_term = build_nll(graph, points);
  std::optional<ad::Var> physics;
  if (setup.residual) {
    const auto stencils = resolve_stencils(setup.collocation, setup.residual->step, lookup);
    physics = build_physics(graph, stencils, *setup.residual);
  }
  return combine(data_term, physics, setup.lambda);
}

std::vector<double> default_collocation(const Dataset& data, int grid_points) {
  std::vector<double> xs = data.context;
  if (!xs.empty() && grid_points > 0) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double a = *lo;
    const double b = *hi;
    for (int k = 0; k < grid_points; ++k) {
      xs.push_back(grid_points == 1 ? a : a + (b - a) * k / (grid_points - 1));
    }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

std::vector<double> stencil_contexts(std::span<const double> collocation, double step) {
  std::vector<double> out;
  out.reserve(3 * collocation.size());
  for (double x : collocation) {
    out.push_back(x - step);
    out.push_back(x);
    out.push_back(x + step);
  }
  return out;
}

Objective::Objective(const Dataset& batch, LossSetup setup) : setup_(std::move(setup)) {
  validate(batch);
  if (batch.empty()) throw EmptyBatch();
  if (setup_.lambda < 0.0 || !std::isfinite(setup_.lambda)) {
    throw InvalidConfig("physics weight lambda must be a finite nonnegative number");
  }
  if (setup_.residual) validate(*setup_.residual);

  std::unordered_map<double, std::uint32_t> index;
  auto intern = [&](double x) {
    const auto [it, inserted] = index.emplace(x, static_cast<std::uint32_t>(contexts_.size()));
    if (inserted) contexts_.push_back(x);
    return it->second;
  };
  points_.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    int component = -1;
    if (setup_.class_mode == ClassMode::class_informed && batch.has_labels() && batch.label[i] > 0) {
      component = setup_.class_map.component(batch.label[i]);
    }
    points_.push_back({intern(batch.context[i]), component, batch.target[i]});
  }
  if (setup_.residual) {
    const double h = setup_.residual->step;
    for (double x : setup_.collocation) stencils_.push_back({intern(x - h), intern(x), intern(x + h)});
  }
}

LossTerms Objective::build(const MdnGraph& graph) const {
  if (setup_.class_mode == ClassMode::class_informed) validate(setup_.class_map, graph.components());
  const ad::Var data_term = build_nll(graph, points_);
  std::optional<ad::Var> physics;
  if (setup_.residual) physics = build_physics(graph, stencils_, *setup_.residual);
  return combine(data_term, physics, setup_.lambda);
}

}  // namespace pimdn

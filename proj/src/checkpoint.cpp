#include "pimdn/checkpoint.hpp"

#include <fstream>

#include "pimdn/errors.hpp"

namespace pimdn {

const MdnModel& Checkpoint::mdn() const {
  if (const auto* m = std::get_if<MdnModel>(&model)) return *m;
  throw InvalidInput("checkpoint holds a flow matching model, not an MDN");
}

const CfmModel& Checkpoint::cfm() const {
  if (const auto* m = std::get_if<CfmModel>(&model)) return *m;
  throw InvalidInput("checkpoint holds an MDN, not a flow matching model");
}

namespace {

nlohmann::json scaling_json(const Standardization& s) {
  return {{"context_mean", s.context_mean},
          {"context_std", s.context_std},
          {"target_mean", s.target_mean},
          {"target_std", s.target_std}};
}

Standardization scaling_from(const nlohmann::json& j) {
  Standardization s;
  s.context_mean = j.at("context_mean").get<double>();
  s.context_std = j.at("context_std").get<double>();
  s.target_mean = j.at("target_mean").get<double>();
  s.target_std = j.at("target_std").get<double>();
  return s;
}

nlohmann::json params_json(const Eigen::VectorXd& p) {
  return std::vector<double>(p.data(), p.data() + p.size());
}

Eigen::VectorXd params_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const Checkpoint& ckpt) {
  nlohmann::json j = {{"format", "pimdn-checkpoint"},
                      {"version", 1},
                      {"kind", to_string(ckpt.kind())}};
  if (ckpt.kind() == ModelKind::mdn) {
    const MdnModel& m = ckpt.mdn();
    j["architecture"] = {{"input_dim", m.arch.input_dim},
                         {"hidden_width", m.arch.hidden_width},
                         {"hidden_layers", m.arch.hidden_layers},
                         {"components", m.arch.components},
                         {"target_dim", m.arch.target_dim},
                         {"activation", m.arch.activation},
                         {"log_sigma_min", m.log_sigma_min},
                         {"log_sigma_max", m.log_sigma_max}};
    j["standardization"] = scaling_json(m.scaling);
    j["params"] = params_json(m.params);
  } else {
    const CfmModel& m = ckpt.cfm();
    j["architecture"] = {{"context_dim", m.arch.context_dim},
                         {"hidden_width", m.arch.hidden_width},
                         {"hidden_layers", m.arch.hidden_layers},
                         {"activation", "elu"}};
    j["standardization"] = scaling_json(m.scaling);
    j["params"] = params_json(m.params);
  }
  j["seed"] = ckpt.config.seed;
  j["config"] = to_json(ckpt.config);
  j["training"] = ckpt.training;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "pimdn-checkpoint") throw InvalidInput("not a pimdn checkpoint");
    Checkpoint c;
    const auto& a = j.at("architecture");
    if (model_kind_from_string(j.at("kind").get<std::string>()) == ModelKind::mdn) {
      MdnModel m;
      m.arch.input_dim = a.at("input_dim").get<int>();
      m.arch.hidden_width = a.at("hidden_width").get<int>();
      m.arch.hidden_layers = a.at("hidden_layers").get<int>();
      m.arch.components = a.at("components").get<int>();
      m.arch.target_dim = a.at("target_dim").get<int>();
      m.arch.activation = a.at("activation").get<std::string>();
      m.log_sigma_min = a.at("log_sigma_min").get<double>();
      m.log_sigma_max = a.at("log_sigma_max").get<double>();
      validate(m.arch);
      m.scaling = scaling_from(j.at("standardization"));
      m.params = params_from(j.at("params"));
      if (static_cast<std::size_t>(m.params.size()) != param_count(m.arch)) {
        throw InvalidInput("checkpoint parameter count does not match its architecture");
      }
      c.model = std::move(m);
    } else {
      CfmModel m;
      m.arch.context_dim = a.at("context_dim").get<int>();
      m.arch.hidden_width = a.at("hidden_width").get<int>();
      m.arch.hidden_layers = a.at("hidden_layers").get<int>();
      validate(m.arch.layout());
      m.scaling = scaling_from(j.at("standardization"));
      m.params = params_from(j.at("params"));
      if (static_cast<std::size_t>(m.params.size()) != param_count(m.arch)) {
        throw InvalidInput("checkpoint parameter count does not match its architecture");
      }
      c.model = std::move(m);
    }
    c.config = run_config_from_json(j.at("config"));
    if (j.contains("training")) c.training = j.at("training");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write to " + path.string() + " failed");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_json(path, to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json(path));
}

}  // namespace pimdn

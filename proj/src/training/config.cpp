#include <set>

#include "inout/errors.hpp"
#include "inout/training.hpp"

namespace inout {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoInOut: return "no_inout";
    case Ablation::NoDout: return "no_dout";
    case Ablation::NoDhDe: return "no_dhde";
    case Ablation::NoBranches: return "no_branches";
  }
  return "none";
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "none") return Ablation::None;
  if (s == "no_inout") return Ablation::NoInOut;
  if (s == "no_dout") return Ablation::NoDout;
  if (s == "no_dhde") return Ablation::NoDhDe;
  if (s == "no_branches") return Ablation::NoBranches;
  throw InvalidArgument("unknown ablation '" + s + "' (none|no_inout|no_dout|no_dhde|no_branches)");
}

std::string to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::Inner: return "inner";
    case PhaseKind::Outer: return "outer";
    case PhaseKind::Joint: return "joint";
  }
  return "inner";
}

void TrainingConfig::validate() const {
  if (lambda0 < 0 || lambda1 < 0 || lambda2 < 0) throw InvalidArgument("loss weights must be >= 0");
  if (!(learning_rate > 0)) throw InvalidArgument("learning_rate must be positive");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw InvalidArgument("Adam betas outside [0,1)");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (n_alternate < 1) throw InvalidArgument("n_alternate must be >= 1");
  if (total_epochs < 1) throw InvalidArgument("total_epochs must be >= 1");
  if (!alpha.alternating && (alpha.fixed < 0 || alpha.fixed > 1)) throw InvalidArgument("fixed alpha outside [0,1]");
  if (!(d_clamp_eps > 0 && d_clamp_eps < 0.5)) throw InvalidArgument("d_clamp_eps outside (0,0.5)");
  if (checkpoint_every < 0) throw InvalidArgument("checkpoint_every must be >= 0");
  if (threads < 1) throw InvalidArgument("threads must be >= 1");
  generator.validate();
  discriminator.validate();
}

TrainingConfig with_alternative_learning_rate(TrainingConfig c) {
  c.learning_rate = 1e-4;
  return c;
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::ordered_json to_json(const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["lambda0"] = c.lambda0;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["batch_size"] = c.batch_size;
  j["n_alternate"] = c.n_alternate;
  j["total_epochs"] = c.total_epochs;
  if (c.alpha.alternating) {
    j["alpha"] = "alternating";
  } else {
    j["alpha"] = c.alpha.fixed;
  }
  j["ablation"] = to_string(c.ablation);
  j["seed"] = c.seed.value;
  j["d_clamp_eps"] = c.d_clamp_eps;
  j["generator"] = {{"in_channels", c.generator.in_channels},   {"out_channels", c.generator.out_channels},
                    {"levels", c.generator.levels},             {"base_width", c.generator.base_width},
                    {"dropout_levels", c.generator.dropout_levels}, {"dropout_rate", c.generator.dropout_rate},
                    {"norm", to_string(c.generator.norm)}};
  j["discriminator"] = {{"base_width", c.discriminator.base_width},
                        {"strided_layers", c.discriminator.strided_layers},
                        {"layout", to_string(c.discriminator.layout)},
                        {"norm", to_string(c.discriminator.norm)}};
  j["concat_init"] = c.concat_init;
  j["checkpoint_every"] = c.checkpoint_every;
  j["threads"] = c.threads;
  return j;
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"lambda0", "lambda1", "lambda2", "learning_rate", "beta1", "beta2", "batch_size", "n_alternate",
                  "total_epochs", "alpha", "ablation", "seed", "d_clamp_eps", "generator", "discriminator",
                  "concat_init", "checkpoint_every", "threads"},
                 "training");
  TrainingConfig c;
  read(j, "lambda0", c.lambda0);
  read(j, "lambda1", c.lambda1);
  read(j, "lambda2", c.lambda2);
  read(j, "learning_rate", c.learning_rate);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "batch_size", c.batch_size);
  read(j, "n_alternate", c.n_alternate);
  read(j, "total_epochs", c.total_epochs);
  if (j.contains("alpha")) {
    const auto& a = j.at("alpha");
    if (a.is_string() && a.get<std::string>() == "alternating") {
      c.alpha.alternating = true;
    } else if (a.is_number()) {
      c.alpha.alternating = false;
      c.alpha.fixed = a.get<double>();
    } else {
      throw ConfigError("alpha must be \"alternating\" or a number in [0,1]");
    }
  }
  if (j.contains("ablation")) {
    try {
      c.ablation = ablation_from_string(j.at("ablation").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  read(j, "seed", c.seed.value);
  read(j, "d_clamp_eps", c.d_clamp_eps);
  read(j, "concat_init", c.concat_init);
  read(j, "checkpoint_every", c.checkpoint_every);
  read(j, "threads", c.threads);
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    reject_unknown(g, {"in_channels", "out_channels", "levels", "base_width", "dropout_levels", "dropout_rate", "norm"},
                   "training.generator");
    read(g, "in_channels", c.generator.in_channels);
    read(g, "out_channels", c.generator.out_channels);
    read(g, "levels", c.generator.levels);
    read(g, "base_width", c.generator.base_width);
    read(g, "dropout_levels", c.generator.dropout_levels);
    read(g, "dropout_rate", c.generator.dropout_rate);
    if (g.contains("norm")) {
      try {
        c.generator.norm = norm_kind_from_string(g.at("norm").get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (j.contains("discriminator")) {
    const auto& d = j.at("discriminator");
    reject_unknown(d, {"base_width", "strided_layers", "layout", "norm"}, "training.discriminator");
    read(d, "base_width", c.discriminator.base_width);
    read(d, "strided_layers", c.discriminator.strided_layers);
    try {
      if (d.contains("layout")) c.discriminator.layout = discriminator_layout_from_string(d.at("layout").get<std::string>());
      if (d.contains("norm")) c.discriminator.norm = norm_kind_from_string(d.at("norm").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

AblationPlan apply_ablation(const TrainingConfig& config) {
  AblationPlan plan;
  plan.assembly.generator = config.generator;
  plan.assembly.discriminator = config.discriminator;
  plan.assembly.concat_init = config.concat_init;
  plan.alpha = config.alpha;
  switch (config.ablation) {
    case Ablation::None: break;
    case Ablation::NoInOut:
      plan.alpha.alternating = false;
      plan.alpha.fixed = 0.5;
      break;
    case Ablation::NoDout: plan.assembly.use_dout = false; break;
    case Ablation::NoDhDe: plan.assembly.use_dhde = false; break;
    case Ablation::NoBranches:
      plan.assembly.branches = false;
      plan.assembly.use_dhde = false;
      break;
  }
  return plan;
}

LossWeights loss_weights(const TrainingConfig& c) { return {c.lambda0, c.lambda1, c.lambda2, c.d_clamp_eps}; }

}  // namespace inout

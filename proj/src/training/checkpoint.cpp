#include <ATen/CPUGeneratorImpl.h>

#include "inout/errors.hpp"
#include "inout/training.hpp"

namespace inout {

namespace {

constexpr const char* kFormatTag = "inoutnet-checkpoint";

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainingConfig& config, int epoch,
                     const NetworkAssembly& net, const std::map<std::string, torch::optim::Adam*>& optimizers) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  torch::serialize::OutputArchive ar;
  ar.write("format", c10::IValue(std::string(kFormatTag)));
  ar.write("version", c10::IValue(static_cast<int64_t>(kCheckpointVersion)));
  ar.write("config", c10::IValue(to_json(config).dump()));
  ar.write("epoch", c10::IValue(static_cast<int64_t>(epoch)));
  {
    auto gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    ar.write("rng_state", gen.get_state(), true);
  }
  for (const auto& [name, t] : net.named_state()) ar.write("state." + name, t.detach(), true);
  for (const auto& [name, opt] : optimizers) {
    if (opt == nullptr) continue;
    torch::serialize::OutputArchive sub;
    opt->save(sub);
    ar.write("optim." + name, sub);
  }
  try {
    ar.save_to(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::map<std::string, torch::optim::Adam*>& optimizers) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive ar;
  try {
    ar.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IoError("unreadable checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  c10::IValue v;
  if (!ar.try_read("format", v) || !v.isString() || v.toStringRef() != kFormatTag)
    throw IoError(path.string() + " is not a model checkpoint");
  if (!ar.try_read("version", v) || v.toInt() != kCheckpointVersion)
    throw IoError("incompatible checkpoint version in " + path.string() + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");

  Checkpoint ck;
  ar.read("config", v);
  ck.config = training_config_from_json(nlohmann::json::parse(v.toStringRef()));
  ar.read("epoch", v);
  ck.epoch = static_cast<int>(v.toInt());

  const auto plan = apply_ablation(ck.config);
  ck.model = std::make_shared<NetworkAssembly>(plan.assembly);
  {
    torch::NoGradGuard guard;
    for (auto& [name, t] : ck.model->named_state()) {
      torch::Tensor stored;
      if (!ar.try_read("state." + name, stored, true))
        throw IoError("checkpoint lacks tensor '" + name + "'");
      if (stored.sizes() != t.sizes()) throw IoError("shape mismatch for '" + name + "' in checkpoint");
      t.copy_(stored);
    }
  }
  for (const auto& [name, opt] : optimizers) {
    if (opt == nullptr) continue;
    torch::serialize::InputArchive sub;
    if (!ar.try_read("optim." + name, sub)) throw IoError("checkpoint lacks optimizer '" + name + "'");
    opt->load(sub);
  }
  torch::Tensor rng;
  if (ar.try_read("rng_state", rng, true)) {
    auto gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    gen.set_state(rng);
  }
  ck.model->eval();
  return ck;
}

}  // namespace inout

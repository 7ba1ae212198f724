#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "inout/errors.hpp"
#include "inout/training.hpp"

namespace inout {

nlohmann::ordered_json to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["phase"] = to_string(r.phase);
  j["alpha"] = r.alpha;
  for (const auto& [k, v] : r.losses) j["losses"][k] = v;
  if (r.losses.empty()) j["losses"] = nlohmann::ordered_json::object();
  j["eval_loss"] = r.eval_loss;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

namespace {

nlohmann::ordered_json initial_line(double eval) {
  nlohmann::ordered_json j;
  j["epoch"] = 0;
  j["phase"] = "init";
  j["eval_loss"] = eval;
  return j;
}

PhaseKind phase_from_string(const std::string& s) {
  if (s == "inner") return PhaseKind::Inner;
  if (s == "outer") return PhaseKind::Outer;
  if (s == "joint") return PhaseKind::Joint;
  throw IoError("unknown phase '" + s + "' in history");
}

}  // namespace

void write_history(const TrainHistory& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << initial_line(h.initial_eval_loss).dump() << '\n';
  for (const auto& r : h.epochs) out << to_json(r).dump() << '\n';
}

TrainHistory read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  TrainHistory h;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed history line in " + path.string() + ": " + e.what());
    }
    if (j.at("phase") == "init") {
      h.initial_eval_loss = j.at("eval_loss").get<double>();
      continue;
    }
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.phase = phase_from_string(j.at("phase").get<std::string>());
    r.alpha = j.at("alpha").get<double>();
    for (auto it = j.at("losses").begin(); it != j.at("losses").end(); ++it) r.losses[it.key()] = it.value().get<double>();
    r.eval_loss = j.at("eval_loss").get<double>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    h.epochs.push_back(std::move(r));
  }
  return h;
}

namespace {

using Clock = std::chrono::steady_clock;

void set_requires_grad(torch::nn::Module* m, bool on) {
  if (m == nullptr) return;
  for (auto& p : m->parameters()) p.requires_grad_(on);
}

template <class Holder>
torch::nn::Module* ptr(Holder& h) {
  return h ? h.get() : nullptr;
}

struct Optimizers {
  std::map<std::string, std::unique_ptr<torch::optim::Adam>> owned;

  torch::optim::Adam* get(const std::string& name) const {
    auto it = owned.find(name);
    return it == owned.end() ? nullptr : it->second.get();
  }
  std::map<std::string, torch::optim::Adam*> view() const {
    std::map<std::string, torch::optim::Adam*> v;
    for (const auto& [k, o] : owned) v[k] = o.get();
    return v;
  }
};

Optimizers make_optimizers(NetworkAssembly& net, const TrainingConfig& c) {
  Optimizers o;
  auto add = [&](const std::string& name, torch::nn::Module* m) {
    if (m == nullptr) return;
    auto opts = torch::optim::AdamOptions(c.learning_rate).betas({c.beta1, c.beta2});
    o.owned[name] = std::make_unique<torch::optim::Adam>(m->parameters(), opts);
  };
  add("g_h", ptr(net.g_h));
  add("g_e", ptr(net.g_e));
  add("concat", ptr(net.concat));
  add("g_single", ptr(net.g_single));
  add("d_h", ptr(net.d_h));
  add("d_e", ptr(net.d_e));
  add("d_out", ptr(net.d_out));
  return o;
}

struct PhasePlan {
  PhaseKind kind;
  double alpha;
};

/// Phase in force at each epoch. Without branches there is only the
/// composite objective, so every epoch is an outer-style update.
std::vector<PhasePlan> epoch_plan(const TrainingConfig& c, const AblationPlan& plan) {
  std::vector<PhasePlan> out(static_cast<std::size_t>(c.total_epochs) + 1, {PhaseKind::Joint, 0.0});
  if (!plan.assembly.branches) return out;
  if (!plan.alpha.alternating) {
    for (auto& p : out) p = {PhaseKind::Joint, plan.alpha.fixed};
    return out;
  }
  for (const auto& ph : make_schedule(c.n_alternate, c.total_epochs)) {
    for (int e = ph.first_epoch; e <= ph.last_epoch; ++e)
      out[static_cast<std::size_t>(e)] = {ph.kind, ph.kind == PhaseKind::Inner ? 1.0 : 0.0};
  }
  return out;
}

void check_finite(double v, const std::string& what, int epoch) {
  if (!std::isfinite(v))
    throw DivergenceError("non-finite " + what + " at epoch " + std::to_string(epoch));
}

void add_parts(std::map<std::string, double>& sum, const std::map<std::string, double>& parts, double scale,
                const std::string& prefix) {
  for (const auto& [k, v] : parts) sum[prefix + k] += scale * v;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%04d.pt", epoch);
  return run_dir / "checkpoints" / name;
}

}  // namespace

TrainResult train(const TensorCorpus& train_set, const TensorCorpus& test_set, const TrainingConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (train_set.size() == 0) throw InvalidArgument("train split is empty");
  if (test_set.size() == 0) throw InvalidArgument("test split is empty");

  torch::set_num_threads(config.threads);
  at::globalContext().setDeterministicAlgorithms(true, false);

  const auto plan = apply_ablation(config);
  const auto weights = loss_weights(config);
  auto net = std::make_shared<NetworkAssembly>(plan.assembly);
  net->initialize(derive_seed(config.seed, "init").value);
  auto optimizers = make_optimizers(*net, config);

  TrainResult result;
  int start_epoch = 1;
  torch::manual_seed(derive_seed(config.seed, "dropout").value);
  if (options.resume_from) {
    auto ck = load_checkpoint(*options.resume_from, optimizers.view());
    for (auto& [name, t] : net->named_state()) {
      torch::NoGradGuard guard;
      for (auto& [n2, t2] : ck.model->named_state())
        if (n2 == name) t.copy_(t2);
    }
    start_epoch = ck.epoch + 1;
    if (!options.run_dir.empty() && std::filesystem::exists(options.run_dir / "history.jsonl")) {
      result.history = read_history(options.run_dir / "history.jsonl");
      std::erase_if(result.history.epochs, [&](const EpochRecord& r) { return r.epoch > ck.epoch; });
    }
  } else {
    result.history.initial_eval_loss = eval_loss(*net, test_set, config.batch_size);
  }

  if (!options.run_dir.empty()) {
    std::filesystem::create_directories(options.run_dir / "checkpoints");
    write_history(result.history, options.run_dir / "history.jsonl");
  }

  const auto phases = epoch_plan(config, plan);
  const auto n = train_set.size();

  for (int epoch = start_epoch; epoch <= config.total_epochs; ++epoch) {
    const auto t0 = Clock::now();
    const auto [kind, alpha] = phases[static_cast<std::size_t>(epoch)];
    const bool use_inner = alpha > 0.0;
    const bool use_outer = alpha < 1.0;

    // Critics that take no part in this phase run in eval mode so that not
    // even their running statistics move.
    net->train(true);
    if (!use_inner) {
      if (net->d_h) net->d_h->eval();
      if (net->d_e) net->d_e->eval();
    }
    if (!use_outer && net->d_out) net->d_out->eval();

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)).value);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    std::map<std::string, double> sums;
    int batches = 0;
    for (std::int64_t start = 0; start < n; start += config.batch_size) {
      const auto end = std::min<std::int64_t>(start + config.batch_size, n);
      const std::vector<std::int64_t> rows(order.begin() + start, order.begin() + end);
      const Batch b = train_set.batch(rows);
      auto out = net->forward(b.x);

      // Critic step.
      {
        std::vector<torch::optim::Adam*> active;
        torch::Tensor obj;
        if (use_inner && net->d_h) {
          auto t = inner_discriminator_objective(*net, b, out, weights);
          obj = alpha * t.value;
          add_parts(sums, t.parts, 1.0, "");
          active.push_back(optimizers.get("d_h"));
          active.push_back(optimizers.get("d_e"));
        }
        if (use_outer && net->d_out) {
          auto t = outer_discriminator_objective(*net, b, out, weights);
          obj = obj.defined() ? obj + (1.0 - alpha) * t.value : (1.0 - alpha) * t.value;
          add_parts(sums, t.parts, 1.0, "");
          active.push_back(optimizers.get("d_out"));
        }
        if (obj.defined()) {
          const double v = obj.item<double>();
          check_finite(v, "critic objective", epoch);
          sums["critic_objective"] += v;
          for (auto* o : active) o->zero_grad();
          obj.backward();
          for (auto* o : active) o->step();
        }
      }

      // Generator step, critics held fixed.
      {
        set_requires_grad(ptr(net->d_h), false);
        set_requires_grad(ptr(net->d_e), false);
        set_requires_grad(ptr(net->d_out), false);
        std::vector<torch::optim::Adam*> active;
        torch::Tensor obj;
        if (use_inner) {
          auto t = inner_generator_objective(*net, b, out, weights);
          obj = alpha * t.value;
          add_parts(sums, t.parts, 1.0, "");
        }
        if (use_outer) {
          auto t = outer_generator_objective(*net, b, out, weights);
          obj = obj.defined() ? obj + (1.0 - alpha) * t.value : (1.0 - alpha) * t.value;
          add_parts(sums, t.parts, 1.0, "");
          if (auto* o = optimizers.get("concat")) active.push_back(o);
        }
        for (const char* name : {"g_h", "g_e", "g_single"})
          if (auto* o = optimizers.get(name)) active.push_back(o);
        const double v = obj.item<double>();
        check_finite(v, "generator objective", epoch);
        sums["generator_objective"] += v;
        for (auto* o : active) o->zero_grad();
        obj.backward();
        for (auto* o : active) o->step();
        set_requires_grad(ptr(net->d_h), true);
        set_requires_grad(ptr(net->d_e), true);
        set_requires_grad(ptr(net->d_out), true);
      }
      ++batches;
      if (options.on_step) options.on_step(*net, kind);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = kind;
    rec.alpha = alpha;
    for (auto& [k, v] : sums) {
      rec.losses[k] = v / batches;
      check_finite(rec.losses[k], k, epoch);
    }
    rec.eval_loss = eval_loss(*net, test_set, config.batch_size);
    check_finite(rec.eval_loss, "eval_loss", epoch);
    rec.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    result.history.epochs.push_back(rec);

    if (!options.run_dir.empty()) {
      std::ofstream hist(options.run_dir / "history.jsonl", std::ios::app);
      hist << to_json(rec).dump() << '\n';
      if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 && epoch != config.total_epochs)
        save_checkpoint(checkpoint_path(options.run_dir, epoch), config, epoch, *net, optimizers.view());
    }
    if (options.on_epoch) options.on_epoch(rec);
  }

  net->eval();
  if (!options.run_dir.empty()) {
    result.final_checkpoint = options.run_dir / "checkpoints" / "final.pt";
    save_checkpoint(result.final_checkpoint, config, config.total_epochs, *net, optimizers.view());
  }
  result.model = net;
  return result;
}

}  // namespace inout

#include "faith/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "faith/rng.hpp"

namespace fs = std::filesystem;

namespace faith {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs)
    throw std::invalid_argument("train config: need 0 <= warmup_epochs < epochs");
  if (decay_interval < 1) throw std::invalid_argument("train config: decay_interval must be >= 1");
  if (decay_factor <= 0.0) throw std::invalid_argument("train config: decay_factor must be > 0");
  if (lr_transformer <= 0.0 || lr_backbone <= 0.0)
    throw std::invalid_argument("train config: learning rates must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (sam_rho < 0.0) throw std::invalid_argument("train config: sam_rho must be >= 0");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["warmup_epochs"] = warmup_epochs;
  j["decay_interval"] = decay_interval;
  j["decay_factor"] = decay_factor;
  j["lr_transformer"] = lr_transformer;
  j["lr_backbone"] = lr_backbone;
  j["batch_size"] = batch_size;
  j["sam_rho"] = sam_rho;
  j["seed"] = seed;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.warmup_epochs = j.at("warmup_epochs").get<int>();
  c.decay_interval = j.at("decay_interval").get<int>();
  c.decay_factor = j.at("decay_factor").get<double>();
  c.lr_transformer = j.at("lr_transformer").get<double>();
  c.lr_backbone = j.at("lr_backbone").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.sam_rho = j.at("sam_rho").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

LrPair lr_at(const TrainConfig& c, int epoch) {
  c.validate();
  if (epoch < 0 || epoch >= c.epochs)
    throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) +
                                " outside [0, " + std::to_string(c.epochs) + ")");
  double factor;
  if (epoch < c.warmup_epochs) {
    factor = static_cast<double>(epoch + 1) / c.warmup_epochs;
  } else {
    factor = std::pow(c.decay_factor, (epoch - c.warmup_epochs) / c.decay_interval);
  }
  return {c.lr_transformer * factor, c.lr_backbone * factor};
}

std::vector<ParamGroup> param_groups(const FaithModel& model, const LrPair& lrs) {
  ParamGroup transformer{{}, lrs.transformer};
  ParamGroup backbone{{}, lrs.backbone};
  for (const auto& [name, t] : model.named_params()) {
    if (name.rfind("backbone.", 0) == 0)
      backbone.params.push_back(t);
    else
      transformer.params.push_back(t);
  }
  return {transformer, backbone};
}

double sam_step(const std::vector<ParamGroup>& groups, const std::function<Tensor()>& loss_fn,
                double rho) {
  // Tensors are shared handles; a copy reaches the same leaf storage.
  auto data_of = [](const Tensor& p) -> std::vector<double>& {
    Tensor h = p;
    return h.leaf_data();
  };
  const Tensor loss = loss_fn();
  if (loss.size() != 1) throw std::invalid_argument("sam_step: loss must be a scalar");
  GradSink sink;
  backward_into(loss, sink);

  // First-pass gradients, with zeros for parameters the loss never touched.
  std::vector<std::vector<double>> grads;
  double sq = 0.0;
  for (const ParamGroup& g : groups) {
    for (const Tensor& p : g.params) {
      const std::vector<double>* gp = sink.find(p);
      grads.push_back(gp != nullptr ? *gp
                                    : std::vector<double>(static_cast<size_t>(p.size()), 0.0));
      for (double v : grads.back()) {
        if (!std::isfinite(v)) throw std::runtime_error("sam_step: non-finite gradient (pass 1)");
        sq += v * v;
      }
    }
  }
  const double norm = std::sqrt(sq);

  if (rho > 0.0 && norm > 0.0) {
    // Climb to the worst-case neighbor, re-measure the gradient there, then
    // restore the exact original weights before descending.
    const double step = rho / norm;
    std::vector<std::vector<double>> saved;
    size_t i = 0;
    for (const ParamGroup& g : groups) {
      for (const Tensor& p : g.params) {
        std::vector<double>& w = data_of(p);
        saved.push_back(w);
        for (size_t k = 0; k < w.size(); ++k) w[k] += step * grads[i][k];
        ++i;
      }
    }
    const Tensor loss2 = loss_fn();
    GradSink sink2;
    backward_into(loss2, sink2);
    i = 0;
    for (const ParamGroup& g : groups) {
      for (const Tensor& p : g.params) {
        const std::vector<double>* gp = sink2.find(p);
        if (gp != nullptr) {
          for (double v : *gp)
            if (!std::isfinite(v))
              throw std::runtime_error("sam_step: non-finite gradient (pass 2)");
          grads[i] = *gp;
        } else {
          std::fill(grads[i].begin(), grads[i].end(), 0.0);
        }
        data_of(p) = std::move(saved[i]);
        ++i;
      }
    }
  }

  size_t i = 0;
  for (const ParamGroup& g : groups) {
    for (const Tensor& p : g.params) {
      std::vector<double>& w = data_of(p);
      for (size_t k = 0; k < w.size(); ++k) w[k] -= g.lr * grads[i][k];
      ++i;
    }
  }
  return loss.item();
}

std::vector<std::vector<int>> stratified_batches(const std::vector<SampleRecord>& records,
                                                 int batch_size, std::mt19937_64& rng) {
  if (batch_size < 1) throw std::invalid_argument("stratified_batches: batch_size must be >= 1");
  std::array<std::vector<int>, kMaxSequenceLength + 1> buckets;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].steps.size() > static_cast<size_t>(kMaxSequenceLength))
      throw std::invalid_argument("stratified_batches: record " + records[i].id +
                                  " has more than " + std::to_string(kMaxSequenceLength) +
                                  " steps");
    buckets[records[i].steps.size()].push_back(static_cast<int>(i));
  }
  for (auto& b : buckets) {
    for (int i = static_cast<int>(b.size()) - 1; i > 0; --i)
      std::swap(b[i], b[uniform_int(rng, 0, i)]);
  }

  std::vector<std::vector<int>> out;
  std::vector<int> batch;
  std::array<size_t, kMaxSequenceLength + 1> cur{};
  size_t remaining = records.size();
  int len = 0;
  while (remaining > 0) {
    while (cur[len] >= buckets[len].size()) len = (len + 1) % (kMaxSequenceLength + 1);
    batch.push_back(buckets[len][cur[len]++]);
    --remaining;
    len = (len + 1) % (kMaxSequenceLength + 1);
    if (static_cast<int>(batch.size()) == batch_size) {
      out.push_back(std::move(batch));
      batch.clear();
    }
  }
  if (!batch.empty()) out.push_back(std::move(batch));
  return out;
}

nlohmann::ordered_json EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["lr_transformer"] = lrs.transformer;
  j["lr_backbone"] = lrs.backbone;
  j["train_loss"] = train_loss;
  j["val_fixed"] = val.average.fixed;
  j["val_adaptive"] = val.average.adaptive;
  j["val_full"] = val.average.full;
  return j;
}

nlohmann::ordered_json TrainState::to_json() const {
  nlohmann::ordered_json j;
  j["next_epoch"] = next_epoch;
  j["best_epoch"] = best_epoch;
  j["best_val_full"] = best_val_full;
  return j;
}

TrainState TrainState::from_json(const nlohmann::json& j) {
  TrainState s;
  s.next_epoch = j.at("next_epoch").get<int>();
  s.best_epoch = j.at("best_epoch").get<int>();
  s.best_val_full = j.at("best_val_full").get<double>();
  return s;
}

TrainResult train_loop(FaithModel& model, const std::vector<SampleRecord>& train_records,
                       const std::vector<SampleRecord>& val_records, const ImageCache& images,
                       const TrainConfig& config, const std::string& out_dir, TrainState start) {
  config.validate();
  if (train_records.empty()) throw std::invalid_argument("train: empty training split");
  if (val_records.empty()) throw std::invalid_argument("train: empty validation split");
  if (start.next_epoch < 0 || start.next_epoch > config.epochs)
    throw std::invalid_argument("train: resume epoch out of range");
  fs::create_directories(out_dir);

  TrainResult res;
  res.state = start;
  res.best_checkpoint = (fs::path(out_dir) / "best.ckpt").string();
  res.last_checkpoint = (fs::path(out_dir) / "last.ckpt").string();

  // A fresh run truncates the log; a resumed run keeps the lines the
  // interrupted run already wrote, so the final file matches an
  // uninterrupted one byte for byte.
  std::ofstream log((fs::path(out_dir) / "train_log.jsonl").string(),
                    start.next_epoch == 0 ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error(out_dir + ": cannot open train_log.jsonl");

  auto save = [&](const std::string& path) {
    nlohmann::ordered_json extra;
    extra["train"] = res.state.to_json();
    extra["train_config"] = config.to_json();
    model.save_checkpoint(path, extra);
  };

  for (int epoch = start.next_epoch; epoch < config.epochs; ++epoch) {
    const LrPair lrs = lr_at(config, epoch);
    const auto groups = param_groups(model, lrs);
    auto rng = make_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    const auto batches = stratified_batches(train_records, config.batch_size, rng);

    double loss_sum = 0.0;
    for (size_t b = 0; b < batches.size(); ++b) {
      const std::vector<int>& batch = batches[b];
      auto loss_fn = [&]() {
        std::vector<Tensor> losses;
        losses.reserve(batch.size());
        for (int idx : batch) {
          const SampleRecord& rec = train_records[static_cast<size_t>(idx)];
          losses.push_back(model.training_loss(images.get(rec), rec.sequence()));
        }
        return mean_of(losses);
      };
      double lv;
      try {
        lv = sam_step(groups, loss_fn, config.sam_rho);
      } catch (const std::exception& e) {
        throw std::runtime_error("train: epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(b) + ": " + e.what());
      }
      if (!std::isfinite(lv))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " batch " + std::to_string(b));
      loss_sum += lv;
    }

    EpochLog el;
    el.epoch = epoch;
    el.lrs = lrs;
    el.train_loss = loss_sum / static_cast<double>(batches.size());
    el.val = evaluate(
        [&](const SampleRecord& rec) { return model.predict_sequence(images.get(rec)); },
        val_records);
    log << el.to_json().dump() << "\n";
    log.flush();
    res.logs.push_back(el);

    res.state.next_epoch = epoch + 1;
    if (el.val.average.full > res.state.best_val_full) {
      res.state.best_val_full = el.val.average.full;
      res.state.best_epoch = epoch;
      save(res.best_checkpoint);
    }
    save(res.last_checkpoint);
  }
  return res;
}

}  // namespace faith

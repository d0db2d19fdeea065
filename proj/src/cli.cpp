#include "faith/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "faith/dataset.hpp"
#include "faith/metrics.hpp"
#include "faith/model.hpp"
#include "faith/robustness.hpp"
#include "faith/threading.hpp"
#include "faith/trainer.hpp"
#include "faith/types.hpp"

namespace faith::cli {
namespace {

namespace fs = std::filesystem;

// "none" or attribute names joined by '+', e.g. "eyes+hair".
EditSequence parse_whitelist_entry(const std::string& text) {
  EditSequence seq;
  if (text == "none") return seq;
  size_t start = 0;
  for (;;) {
    const size_t plus = text.find('+', start);
    const std::string name = text.substr(start, plus - start);
    const auto attr = attribute_from_string(name);
    if (!attr)
      throw std::invalid_argument("--whitelist: unknown attribute '" + name + "' in '" + text +
                                  "'");
    seq.push_back(*attr);
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return seq;
}

std::vector<SampleRecord> filter_records(const std::vector<SampleRecord>& records,
                                         const SplitAssignment& splits, Split which) {
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    const auto it = splits.by_id.find(r.id);
    if (it != splits.by_id.end() && it->second == which) out.push_back(r);
  }
  return out;
}

std::string default_images_dir(const std::string& flag, const std::string& manifest) {
  return flag.empty() ? fs::path(manifest).parent_path().string() : flag;
}

// report-clean.txt/json for the identity, report-<label>.* otherwise.
std::string write_report(const std::string& out_dir, const Perturbation& p,
                         const MetricsReport& rep) {
  const std::string tag = p.kind == Perturbation::Kind::none ? "clean" : p.label();
  fs::create_directories(out_dir);
  const fs::path txt_path = fs::path(out_dir) / ("report-" + tag + ".txt");
  {
    std::ofstream txt(txt_path, std::ios::binary);
    txt << "# perturbation: " << p.label() << "\n" << rep.to_table();
    if (!txt) throw std::runtime_error("cannot write " + txt_path.string());
  }
  const fs::path json_path = fs::path(out_dir) / ("report-" + tag + ".json");
  nlohmann::ordered_json j;
  j["perturbation"] = p.label();
  j["metrics"] = rep.to_json();
  std::ofstream js(json_path, std::ios::binary);
  js << j.dump(2) << "\n";
  if (!js) throw std::runtime_error("cannot write " + json_path.string());
  return txt_path.string();
}

struct GenerateArgs {
  GenerateOptions opts;
  std::vector<std::string> whitelist;
  std::vector<double> weights{1, 1, 1, 1, 1};
};

int cmd_generate(GenerateArgs& a) {
  std::copy_n(a.weights.begin(), 5, a.opts.length_weights.begin());
  for (const std::string& w : a.whitelist) a.opts.whitelist.push_back(parse_whitelist_entry(w));
  const auto records = synth_generate(a.opts);
  std::cout << "generated " << records.size() << " records -> " << a.opts.out_dir
            << "/manifest.tsv\n";
  return 0;
}

struct PartitionArgs {
  std::string manifest;
  std::string out;
  int per_length = 100;
  std::vector<int> ratios{8, 1, 1};
  std::uint64_t seed = 0;
};

int cmd_partition(const PartitionArgs& a) {
  const auto records = load_manifest(a.manifest);
  const auto splits = balanced_partition(records, a.per_length,
                                         {a.ratios[0], a.ratios[1], a.ratios[2]}, a.seed);
  const std::string out =
      a.out.empty() ? (fs::path(a.manifest).parent_path() / "splits.tsv").string() : a.out;
  write_splits(out, splits);
  std::cout << "train " << splits.ids(Split::train).size() << " val "
            << splits.ids(Split::val).size() << " test " << splits.ids(Split::test).size()
            << " -> " << out << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest, splits, images, out;
  bool resume = false;
  TrainConfig tc;
  ModelConfig mc;
  std::vector<int> backbone{8, 16, 32};
  std::vector<int> freq{8, 16, 16};
  std::string frequency = "dwt";
  bool no_frequency = false;
};

int cmd_train(TrainArgs& a) {
  std::copy_n(a.backbone.begin(), 3, a.mc.backbone_widths.begin());
  std::copy_n(a.freq.begin(), 3, a.mc.freq_widths.begin());
  const auto parsed = FrequencyMethod::parse(a.frequency);
  a.mc.frequency.kind = parsed.kind;
  a.mc.use_frequency = !a.no_frequency;

  const auto records = load_manifest(a.manifest);
  const auto splits = load_splits(a.splits);
  const auto train_recs = filter_records(records, splits, Split::train);
  const auto val_recs = filter_records(records, splits, Split::val);
  const ImageCache cache(default_images_dir(a.images, a.manifest));

  TrainState state;
  std::optional<FaithModel> model;
  if (a.resume) {
    nlohmann::ordered_json extra;
    model.emplace(
        FaithModel::load_checkpoint((fs::path(a.out) / "last.ckpt").string(), &extra));
    state = TrainState::from_json(extra.at("train"));
  } else {
    model.emplace(a.mc);
  }

  const TrainResult res =
      train_loop(*model, train_recs, val_recs, cache, a.tc, a.out, state);
  std::cout << "trained to epoch " << res.state.next_epoch << ", best epoch "
            << res.state.best_epoch << " val full "
            << format_fixed(res.state.best_val_full, 4) << " -> " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, manifest, splits, images, out;
  std::string split = "test";
  std::vector<std::string> perturbs;
};

int cmd_eval(const EvalArgs& a, bool with_perturbations) {
  const auto records = load_manifest(a.manifest);
  std::vector<SampleRecord> subset = records;
  if (!a.splits.empty()) {
    const auto which = split_from_string(a.split);
    if (!which)
      throw std::invalid_argument("--split: expected train, val or test, got '" + a.split + "'");
    subset = filter_records(records, load_splits(a.splits), *which);
  }

  std::vector<Perturbation> ps{Perturbation{}};  // clean row anchors the table
  if (with_perturbations)
    for (const std::string& text : a.perturbs) ps.push_back(Perturbation::parse(text));

  const FaithModel model = FaithModel::load_checkpoint(a.checkpoint);
  const ImageCache cache(default_images_dir(a.images, a.manifest));
  const auto reports = robustness_sweep(
      [&](const Tensor& img) { return model.predict_sequence(img); }, subset, cache, ps);

  for (size_t i = 0; i < reports.size(); ++i) {
    const std::string path = write_report(a.out, ps[i], reports[i]);
    std::cout << ps[i].label() << ": avg full "
              << format_fixed(reports[i].average.full, 4) << " -> " << path << "\n";
  }
  return 0;
}

int cmd_validate(const std::string& manifest) {
  const auto records = load_manifest(manifest);
  std::cout << "ok: " << records.size() << " records\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"faith: edit-sequence detection pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flag defaults file (TOML grammar; command line wins)");
  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (default: all hardware threads)")
      ->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "render a synthetic edited-face dataset");
  g->fallthrough();
  g->add_option("--count", gen.opts.count, "number of samples")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.opts.seed, "generator seed");
  g->add_option("--out", gen.opts.out_dir, "output directory")->required();
  g->add_option("--size", gen.opts.size, "square image edge, multiple of 8");
  g->add_option("--length-weights", gen.weights, "relative weights for lengths 0-4")
      ->expected(5);
  g->add_option("--ssim-threshold", gen.opts.ssim_threshold,
                "drop records whose final-vs-base SSIM falls below this");
  g->add_option("--whitelist", gen.whitelist,
                "restrict edit sequences ('none' or 'eyes+hair'); repeatable");

  PartitionArgs part;
  auto* p = app.add_subcommand("partition", "balanced train/val/test split of a manifest");
  p->fallthrough();
  p->add_option("--manifest", part.manifest, "manifest to split")->required();
  p->add_option("--per-length", part.per_length, "samples kept per sequence length")
      ->check(CLI::PositiveNumber);
  p->add_option("--ratios", part.ratios, "train:val:test ratio")->expected(3);
  p->add_option("--seed", part.seed, "sampling seed");
  p->add_option("--out", part.out, "splits file (default: <manifest dir>/splits.tsv)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model on a partitioned dataset");
  t->fallthrough();
  t->add_option("--manifest", tr.manifest, "dataset manifest")->required();
  t->add_option("--splits", tr.splits, "splits file from `partition`")->required();
  t->add_option("--images", tr.images, "image root (default: manifest directory)");
  t->add_option("--out", tr.out, "run directory for logs and checkpoints")->required();
  t->add_flag("--resume", tr.resume, "continue from <out>/last.ckpt (model flags ignored)");
  t->add_option("--epochs", tr.tc.epochs, "epochs to reach");
  t->add_option("--warmup-epochs", tr.tc.warmup_epochs, "linear LR warmup span");
  t->add_option("--decay-interval", tr.tc.decay_interval, "epochs between LR decays");
  t->add_option("--decay-factor", tr.tc.decay_factor, "LR decay multiplier");
  t->add_option("--lr-transformer", tr.tc.lr_transformer, "base LR: everything but backbone");
  t->add_option("--lr-backbone", tr.tc.lr_backbone, "base LR: spatial backbone");
  t->add_option("--batch-size", tr.tc.batch_size, "records per SAM step");
  t->add_option("--sam-rho", tr.tc.sam_rho, "SAM perturbation radius (0 = plain SGD)");
  t->add_option("--seed", tr.tc.seed, "training seed (batch order)");
  t->add_option("--image-size", tr.mc.image_size, "model input edge");
  t->add_option("--backbone-widths", tr.backbone, "spatial conv channels")->expected(3);
  t->add_option("--embed-dim", tr.mc.embed_dim, "transformer width d");
  t->add_option("--encoder-layers", tr.mc.encoder_layers, "encoder depth");
  t->add_option("--decoder-layers", tr.mc.decoder_layers, "decoder depth");
  t->add_option("--heads", tr.mc.heads, "attention heads");
  t->add_option("--mlp-hidden", tr.mc.mlp_hidden, "feed-forward width");
  t->add_option("--head-hidden", tr.mc.head_hidden, "classifier hidden width");
  t->add_option("--freq-widths", tr.freq, "frequency conv channels")->expected(3);
  t->add_option("--frequency", tr.frequency, "frequency transform: dwt, dct or fft");
  t->add_option("--dct-block", tr.mc.frequency.dct_block, "DCT block size");
  t->add_option("--fft-radius", tr.mc.frequency.fft_radius, "FFT high-pass radius");
  t->add_flag("--no-frequency", tr.no_frequency, "drop the frequency branch");
  t->add_flag("--pre-norm", tr.mc.pre_norm, "enable pre-normalization");
  t->add_option("--init-seed", tr.mc.init_seed, "weight init seed");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  e->fallthrough();
  e->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  e->add_option("--manifest", ev.manifest, "dataset manifest")->required();
  e->add_option("--splits", ev.splits, "splits file; omit to use every record");
  e->add_option("--split", ev.split, "which split: train, val or test");
  e->add_option("--images", ev.images, "image root (default: manifest directory)");
  e->add_option("--out", ev.out, "report directory")->required();

  EvalArgs pe;
  auto* q = app.add_subcommand("perturb-eval", "evaluate under post-processing attacks");
  q->fallthrough();
  q->add_option("--checkpoint", pe.checkpoint, "model checkpoint")->required();
  q->add_option("--manifest", pe.manifest, "dataset manifest")->required();
  q->add_option("--splits", pe.splits, "splits file; omit to use every record");
  q->add_option("--split", pe.split, "which split: train, val or test");
  q->add_option("--images", pe.images, "image root (default: manifest directory)");
  q->add_option("--out", pe.out, "report directory")->required();
  q->add_option("--perturb", pe.perturbs, "jpeg-<ratio> or noise-<intensity>[-s<seed>]; repeatable")
      ->required();

  std::string validate_path;
  auto* v = app.add_subcommand("validate-manifest", "parse and validate a manifest");
  v->fallthrough();
  v->add_option("--manifest", validate_path, "manifest to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::CallForAllHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  if (threads > 0) set_thread_budget(threads);

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (p->parsed()) return cmd_partition(part);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev, false);
    if (q->parsed()) return cmd_eval(pe, true);
    if (v->parsed()) return cmd_validate(validate_path);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;  // unreachable: require_subcommand guarantees a branch
}

}  // namespace faith::cli

#include "faith/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "faith/rng.hpp"

namespace faith {

namespace {

constexpr char kMagic[8] = {'F', 'A', 'I', 'T', 'H', 'C', 'K', '1'};
constexpr int kFormatVersion = 1;
// Longest decoder input: SOS plus a full-length attribute prefix.
constexpr int kMaxDecoderInput = kMaxSequenceLength + 1;

// Interleaved sinusoids over the flattened grid, one (sin,cos) pair per axis
// per 4-channel group; wavelength grows geometrically with the group index.
std::vector<double> make_pos2d(int channels, int grid) {
  std::vector<double> table(static_cast<size_t>(channels) * grid * grid);
  for (int c = 0; c < channels; ++c) {
    const double omega = std::pow(10000.0, -4.0 * (c / 4) / channels);
    for (int y = 0; y < grid; ++y) {
      for (int x = 0; x < grid; ++x) {
        double v = 0.0;
        switch (c % 4) {
          case 0: v = std::sin(y * omega); break;
          case 1: v = std::cos(y * omega); break;
          case 2: v = std::sin(x * omega); break;
          case 3: v = std::cos(x * omega); break;
        }
        table[(static_cast<size_t>(c) * grid + y) * grid + x] = v;
      }
    }
  }
  return table;
}

std::vector<double> make_pos1d(int rows, int dim) {
  std::vector<double> table(static_cast<size_t>(rows) * dim);
  for (int t = 0; t < rows; ++t) {
    for (int i = 0; i < dim; ++i) {
      const double omega = std::pow(10000.0, -static_cast<double>(i - i % 2) / dim);
      table[static_cast<size_t>(t) * dim + i] =
          i % 2 == 0 ? std::sin(t * omega) : std::cos(t * omega);
    }
  }
  return table;
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void ModelConfig::validate() const {
  if (image_size < 16 || image_size % 8 != 0)
    throw std::invalid_argument("model config: image_size must be >= 16 and divisible by 8");
  for (int w : backbone_widths)
    if (w < 1) throw std::invalid_argument("model config: backbone widths must be positive");
  for (int w : freq_widths)
    if (w < 1) throw std::invalid_argument("model config: frequency widths must be positive");
  if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0)
    throw std::invalid_argument("model config: embed_dim must be a positive multiple of heads");
  if (encoder_layers < 1 || decoder_layers < 1)
    throw std::invalid_argument("model config: need at least one encoder and one decoder layer");
  if (mlp_hidden < 1 || head_hidden < 1)
    throw std::invalid_argument("model config: hidden widths must be positive");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["image_size"] = image_size;
  j["backbone_widths"] = backbone_widths;
  j["embed_dim"] = embed_dim;
  j["encoder_layers"] = encoder_layers;
  j["decoder_layers"] = decoder_layers;
  j["heads"] = heads;
  j["mlp_hidden"] = mlp_hidden;
  j["head_hidden"] = head_hidden;
  j["freq_widths"] = freq_widths;
  j["frequency"] = frequency.name();
  j["dct_block"] = frequency.dct_block;
  j["fft_radius"] = frequency.fft_radius;
  j["use_frequency"] = use_frequency;
  j["pre_norm"] = pre_norm;
  j["init_seed"] = init_seed;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.backbone_widths = j.at("backbone_widths").get<std::array<int, 3>>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.decoder_layers = j.at("decoder_layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.mlp_hidden = j.at("mlp_hidden").get<int>();
  c.head_hidden = j.at("head_hidden").get<int>();
  c.freq_widths = j.at("freq_widths").get<std::array<int, 3>>();
  c.frequency = FrequencyMethod::parse(j.at("frequency").get<std::string>());
  c.frequency.dct_block = j.at("dct_block").get<int>();
  c.frequency.fft_radius = j.at("fft_radius").get<double>();
  c.use_frequency = j.at("use_frequency").get<bool>();
  c.pre_norm = j.at("pre_norm").get<bool>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  c.validate();
  return c;
}

FaithModel::FaithModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.embed_dim;
  const int c_cor = config_.backbone_widths[2];

  // Each section draws from its own stream so that removing one (e.g. the
  // frequency branch) cannot shift the initialization of the others.
  auto section_rng = [&](std::uint64_t idx) { return make_rng(mix_seed(config_.init_seed, idx)); };

  auto add = [&](std::mt19937_64& rng, const std::string& name, Shape shape, double bound) {
    std::vector<double> data(static_cast<size_t>(numel(shape)), 0.0);
    if (bound > 0.0)
      for (double& v : data) v = uniform(rng, -bound, bound);
    params_.emplace_back(name, Tensor::param(std::move(shape), std::move(data)));
  };
  // Gain-corrected bounds. Plain SGD is very sensitive to activation scale:
  // with 1/sqrt(n) bounds the image features shrink geometrically through the
  // stack and training settles on a label-marginal solution that ignores the
  // input entirely. He bounds for ReLU-followed layers and Xavier elsewhere
  // keep the signal alive.
  auto he = [](int n) { return std::sqrt(6.0 / n); };
  auto xavier = [](int n_in, int n_out) { return std::sqrt(6.0 / (n_in + n_out)); };

  {
    auto rng = section_rng(1);
    int prev = 3;
    for (int i = 0; i < 3; ++i) {
      const int w = config_.backbone_widths[i];
      add(rng, "backbone.conv" + std::to_string(i) + ".weight", {w, prev, 3, 3}, he(prev * 9));
      add(rng, "backbone.conv" + std::to_string(i) + ".bias", {w}, 0.0);
      prev = w;
    }
  }
  {
    auto rng = section_rng(2);
    add(rng, "encoder.input_proj.weight", {c_cor, d}, xavier(c_cor, d));
    for (int l = 0; l < config_.encoder_layers; ++l) {
      const std::string p = "encoder.layer" + std::to_string(l) + ".";
      add(rng, p + "wq", {d, d}, xavier(d, d));
      add(rng, p + "wk", {d, d}, xavier(d, d));
      // Layer 1 takes its values straight from the backbone map; later layers
      // consume the previous block's output.
      const int vin = l == 0 ? c_cor : d;
      add(rng, p + "wv", {vin, d}, xavier(vin, d));
      add(rng, p + "mlp.w1", {d, config_.mlp_hidden}, he(d));
      add(rng, p + "mlp.b1", {config_.mlp_hidden}, 0.0);
      add(rng, p + "mlp.w2", {config_.mlp_hidden, d}, xavier(config_.mlp_hidden, d));
      add(rng, p + "mlp.b2", {d}, 0.0);
    }
  }
  if (config_.use_frequency) {
    auto rng = section_rng(3);
    // The DWT map is already half resolution, so it needs one fewer stride-2
    // stage than the full-resolution DCT/FFT maps to land on the encoder grid.
    const int stages = config_.frequency.kind == FrequencyKind::DWT ? 2 : 3;
    int prev = 3;
    for (int i = 0; i < stages; ++i) {
      const int w = config_.freq_widths[3 - stages + i];
      add(rng, "freq.conv" + std::to_string(i) + ".weight", {w, prev, 3, 3}, he(prev * 9));
      add(rng, "freq.conv" + std::to_string(i) + ".bias", {w}, 0.0);
      prev = w;
    }
    add(rng, "freq.proj.weight", {1, prev, 1, 1}, xavier(prev, 1));
    add(rng, "freq.proj.bias", {1}, 0.0);
  }
  {
    auto rng = section_rng(4);
    // Unit-variance rows so token identity competes with the O(1) sinusoidal
    // positions it is summed with.
    add(rng, "decoder.token_embed", {kVocabEmbed, d}, std::sqrt(3.0 / d));
    for (int l = 0; l < config_.decoder_layers; ++l) {
      const std::string p = "decoder.layer" + std::to_string(l) + ".";
      add(rng, p + "self.wq", {d, d}, xavier(d, d));
      add(rng, p + "self.wk", {d, d}, xavier(d, d));
      add(rng, p + "self.wv", {d, d}, xavier(d, d));
      add(rng, p + "cross.wq", {d, d}, xavier(d, d));
      add(rng, p + "cross.wk", {d, d}, xavier(d, d));
      add(rng, p + "cross.wv", {d, d}, xavier(d, d));
      add(rng, p + "mlp.w1", {d, config_.mlp_hidden}, he(d));
      add(rng, p + "mlp.b1", {config_.mlp_hidden}, 0.0);
      add(rng, p + "mlp.w2", {config_.mlp_hidden, d}, xavier(config_.mlp_hidden, d));
      add(rng, p + "mlp.b2", {d}, 0.0);
    }
  }
  {
    auto rng = section_rng(5);
    add(rng, "head.w1", {d, config_.head_hidden}, he(d));
    add(rng, "head.b1", {config_.head_hidden}, 0.0);
    // Zero final layer: predictions start exactly uniform, so the easy
    // label-marginal signal and the image-conditioned signal grow together
    // instead of the former suppressing the latter.
    add(rng, "head.w2", {config_.head_hidden, kVocabOut}, 0.0);
    add(rng, "head.b2", {kVocabOut}, 0.0);
  }

  pos2d_ = make_pos2d(c_cor, config_.grid());
  pos1d_ = make_pos1d(kMaxDecoderInput, d);
}

std::vector<Tensor> FaithModel::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

Tensor FaithModel::param(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw std::invalid_argument("unknown parameter '" + name + "'");
}

long FaithModel::param_count() const {
  long n = 0;
  for (const auto& [name, t] : params_) n += static_cast<long>(t.size());
  return n;
}

Tensor FaithModel::maybe_norm(const Tensor& x) const {
  return config_.pre_norm ? layernorm_rows(x) : x;
}

Tensor FaithModel::mlp2(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                        const Tensor& b2) const {
  Tensor h = relu(add_rowwise(matmul(x, w1), b1));
  return add_rowwise(matmul(h, w2), b2);
}

Tensor FaithModel::attention_block(const Tensor& q_in, const Tensor& kv_in, const Tensor& v_src,
                                   const Tensor& wq, const Tensor& wk, const Tensor& wv,
                                   const Tensor* mask, const Tensor* key_bias,
                                   bool value_residual) const {
  const int d = config_.embed_dim;
  const int dh = d / config_.heads;
  Tensor q = matmul(q_in, wq);
  Tensor k = matmul(kv_in, wk);
  Tensor v = matmul(v_src, wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(config_.heads);
  for (int h = 0; h < config_.heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor logits = scale(matmul(qh, transpose2d(kh)), inv_sqrt);
    if (key_bias != nullptr) logits = add_rowwise(logits, *key_bias);
    if (mask != nullptr) logits = add(logits, *mask);
    Tensor out = matmul(softmax(logits, 1), vh);
    if (value_residual) out = add(out, vh);
    heads.push_back(out);
  }
  return concat_cols(heads);
}

Tensor FaithModel::backbone_forward(const Tensor& image) const {
  const Shape& s = image.shape();
  if (s.size() != 3 || s[0] != 3)
    throw std::invalid_argument("backbone_forward: expected a [3,H,W] image, got " + shape_str(s));
  if (s[1] % 8 != 0 || s[2] % 8 != 0)
    throw std::invalid_argument("backbone_forward: spatial dims of " + shape_str(s) +
                                " are not divisible by the backbone stride 8");
  if (s[1] != config_.image_size || s[2] != config_.image_size)
    throw std::invalid_argument("backbone_forward: image is " + shape_str(s) +
                                " but the model was configured for " +
                                std::to_string(config_.image_size) + "x" +
                                std::to_string(config_.image_size));
  Tensor t = image;
  for (int i = 0; i < 3; ++i) {
    const std::string p = "backbone.conv" + std::to_string(i) + ".";
    t = relu(add_channel_bias(conv2d(t, param(p + "weight"), 2, 1), param(p + "bias")));
  }
  return t;
}

Tensor FaithModel::encode(const Tensor& f_cor) const {
  const int c_cor = config_.backbone_widths[2];
  const int g = config_.grid();
  const int n = config_.tokens();
  const Shape want{c_cor, g, g};
  if (f_cor.shape() != want)
    throw std::invalid_argument("encode: expected features " + shape_str(want) + ", got " +
                                shape_str(f_cor.shape()));

  // Rows of the flattened grid, with and without the positional table; the
  // positional signal feeds queries/keys only, values stay raw.
  Tensor pos = Tensor::from({c_cor, g, g}, pos2d_);
  Tensor rows_pos = transpose2d(reshape(add(f_cor, pos), {c_cor, n}));
  Tensor rows_raw = transpose2d(reshape(f_cor, {c_cor, n}));
  Tensor f_spa = matmul(rows_pos, param("encoder.input_proj.weight"));

  Tensor x = f_spa;
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l) + ".";
    const Tensor& qk = l == 0 ? f_spa : x;
    const Tensor& vs = l == 0 ? rows_raw : x;
    Tensor mid = attention_block(maybe_norm(qk), maybe_norm(qk), maybe_norm(vs), param(p + "wq"),
                                 param(p + "wk"), param(p + "wv"), nullptr, nullptr,
                                 /*value_residual=*/true);
    x = add(mid, mlp2(maybe_norm(mid), param(p + "mlp.w1"), param(p + "mlp.b1"),
                      param(p + "mlp.w2"), param(p + "mlp.b2")));
  }
  return x;
}

std::pair<Tensor, Tensor> FaithModel::frequency_branch(const Tensor& image) const {
  if (!config_.use_frequency)
    throw std::logic_error("frequency_branch: disabled by config (use_frequency=false)");
  Tensor t = extract_frequency_map(image, config_.frequency);
  const int stages = config_.frequency.kind == FrequencyKind::DWT ? 2 : 3;
  for (int i = 0; i < stages; ++i) {
    const std::string p = "freq.conv" + std::to_string(i) + ".";
    t = relu(add_channel_bias(conv2d(t, param(p + "weight"), 2, 1), param(p + "bias")));
  }
  const int g = config_.grid();
  if (t.shape()[1] != g || t.shape()[2] != g)
    throw std::logic_error("frequency_branch: stack produced " + shape_str(t.shape()) +
                           ", expected the " + std::to_string(g) + "x" + std::to_string(g) +
                           " encoder grid");
  Tensor m = add_channel_bias(conv2d(t, param("freq.proj.weight"), 1, 0), param("freq.proj.bias"));
  return {t, reshape(m, {config_.tokens()})};
}

Tensor FaithModel::decoder_forward(const std::vector<int>& tokens, const Tensor& f_s,
                                   const Tensor* m_f) const {
  const int len = static_cast<int>(tokens.size());
  if (len == 0 || tokens[0] != kSosToken)
    throw std::invalid_argument("decoder_forward: token sequence must start with SOS");
  if (len > kMaxDecoderInput)
    throw std::invalid_argument("decoder_forward: sequence longer than SOS + " +
                                std::to_string(kMaxSequenceLength) + " attributes");
  for (int t : tokens)
    if (t < 0 || t >= kVocabEmbed)
      throw std::invalid_argument("decoder_forward: token id " + std::to_string(t) +
                                  " outside the vocabulary");
  const int d = config_.embed_dim;
  const int n = config_.tokens();
  const Shape want{n, d};
  if (f_s.shape() != want)
    throw std::invalid_argument("decoder_forward: expected encoder output " + shape_str(want) +
                                ", got " + shape_str(f_s.shape()));
  if (m_f != nullptr && m_f->shape() != Shape{n})
    throw std::invalid_argument("decoder_forward: frequency bias must have one entry per grid "
                                "location, got " +
                                shape_str(m_f->shape()));

  Tensor x = embed_rows(param("decoder.token_embed"), tokens);
  x = add(x, Tensor::from({len, d},
                          std::vector<double>(pos1d_.begin(), pos1d_.begin() + len * d)));

  // Additive causal mask; -1e9 underflows to an exact softmax weight of zero.
  std::vector<double> maskv(static_cast<size_t>(len) * len, 0.0);
  for (int i = 0; i < len; ++i)
    for (int j = i + 1; j < len; ++j) maskv[static_cast<size_t>(i) * len + j] = -1e9;
  Tensor mask = Tensor::from({len, len}, std::move(maskv));

  for (int l = 0; l < config_.decoder_layers; ++l) {
    const std::string p = "decoder.layer" + std::to_string(l) + ".";
    Tensor y = attention_block(maybe_norm(x), maybe_norm(x), maybe_norm(x), param(p + "self.wq"),
                               param(p + "self.wk"), param(p + "self.wv"), &mask, nullptr,
                               /*value_residual=*/true);
    Tensor z = attention_block(maybe_norm(y), maybe_norm(f_s), maybe_norm(f_s),
                               param(p + "cross.wq"), param(p + "cross.wk"), param(p + "cross.wv"),
                               nullptr, m_f, /*value_residual=*/false);
    x = add(z, mlp2(maybe_norm(z), param(p + "mlp.w1"), param(p + "mlp.b1"), param(p + "mlp.w2"),
                    param(p + "mlp.b2")));
  }
  return mlp2(maybe_norm(x), param("head.w1"), param("head.b1"), param("head.w2"),
              param("head.b2"));
}

EditSequence FaithModel::predict_sequence(const Tensor& image) const {
  Tensor f_s = encode(backbone_forward(image));
  Tensor m_f;
  const Tensor* bias = nullptr;
  if (config_.use_frequency) {
    m_f = frequency_branch(image).second;
    bias = &m_f;
  }
  std::vector<int> tokens{kSosToken};
  EditSequence out;
  for (int step = 0; step < kMaxSequenceLength; ++step) {
    Tensor logits = decoder_forward(tokens, f_s, bias);
    const std::vector<double>& v = logits.values();
    const size_t row = (tokens.size() - 1) * kVocabOut;
    int best = 0;
    for (int j = 1; j < kVocabOut; ++j)
      if (v[row + j] > v[row + best]) best = j;
    if (best == kEosToken) break;
    out.push_back(static_cast<Attribute>(best));
    tokens.push_back(best);
  }
  return out;
}

Tensor FaithModel::training_loss(const Tensor& image, const EditSequence& gt) const {
  if (gt.size() > static_cast<size_t>(kMaxSequenceLength))
    throw std::invalid_argument("training_loss: ground truth longer than " +
                                std::to_string(kMaxSequenceLength));
  Tensor f_s = encode(backbone_forward(image));
  Tensor m_f;
  const Tensor* bias = nullptr;
  if (config_.use_frequency) {
    m_f = frequency_branch(image).second;
    bias = &m_f;
  }
  std::vector<int> input{kSosToken};
  std::vector<int> targets;
  for (Attribute a : gt) {
    input.push_back(static_cast<int>(a));
    targets.push_back(static_cast<int>(a));
  }
  targets.push_back(kEosToken);

  Tensor logits = decoder_forward(input, f_s, bias);
  std::vector<Tensor> losses;
  losses.reserve(targets.size());
  for (size_t i = 0; i < targets.size(); ++i)
    losses.push_back(cross_entropy(slice_row(logits, static_cast<int>(i)), targets[i]));
  return mean_of(losses);
}

void FaithModel::save_checkpoint(const std::string& path,
                                 const nlohmann::ordered_json& extra) const {
  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["config"] = config_.to_json();
  nlohmann::ordered_json plist = nlohmann::ordered_json::array();
  std::int64_t offset = 0;
  for (const auto& [name, t] : params_) {
    plist.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  header["params"] = std::move(plist);
  header["extra"] = extra.is_null() ? nlohmann::ordered_json::object() : extra;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(kMagic, 8);
  write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<unsigned char> buf;
  for (const auto& [name, t] : params_) {
    const std::vector<double>& v = t.values();
    buf.resize(v.size() * 8);
    for (size_t i = 0; i < v.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &v[i], 8);
      for (int b = 0; b < 8; ++b) buf[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

FaithModel FaithModel::load_checkpoint(const std::string& path, nlohmann::ordered_json* extra) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  char magic[8] = {};
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + ": not a FAITH checkpoint (bad magic)");
  const std::uint64_t hlen = read_u64_le(in);
  if (!in || hlen > (1u << 26)) throw std::runtime_error(path + ": corrupt checkpoint header");
  std::string text(hlen, '\0');
  in.read(text.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint header");

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": checkpoint header is not valid JSON");
  }
  if (header.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error(path + ": unsupported checkpoint format version " +
                             header.at("format_version").dump());

  FaithModel model(ModelConfig::from_json(header.at("config")));
  const auto& plist = header.at("params");
  if (plist.size() != model.params_.size())
    throw std::runtime_error(path + ": checkpoint lists " + std::to_string(plist.size()) +
                             " parameters, config implies " +
                             std::to_string(model.params_.size()));
  std::vector<unsigned char> buf;
  for (size_t i = 0; i < model.params_.size(); ++i) {
    auto& [name, t] = model.params_[i];
    const auto& entry = plist[i];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("shape").get<Shape>() != t.shape())
      throw std::runtime_error(path + ": parameter " + std::to_string(i) + " is " +
                               entry.at("name").get<std::string>() + entry.at("shape").dump() +
                               ", expected " + name + shape_str(t.shape()));
    std::vector<double>& dst = t.leaf_data();
    buf.resize(dst.size() * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error(path + ": truncated parameter payload at " + name);
    for (size_t k = 0; k < dst.size(); ++k) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[k * 8 + b]) << (8 * b);
      std::memcpy(&dst[k], &bits, 8);
    }
  }
  if (extra != nullptr) *extra = header.value("extra", nlohmann::ordered_json::object());
  return model;
}

}  // namespace faith

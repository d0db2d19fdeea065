#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "faith/frequency.hpp"
#include "faith/tensor.hpp"
#include "faith/types.hpp"

#include "json.hpp"

namespace faith {

// Token vocabulary: attributes 0..5, then EOS; SOS exists only on the
// embedding side (decoder input), never as an output class.
inline constexpr int kEosToken = kNumAttributes;      // 6
inline constexpr int kSosToken = kNumAttributes + 1;  // 7
inline constexpr int kVocabOut = kNumAttributes + 1;  // 7 logits
inline constexpr int kVocabEmbed = kNumAttributes + 2;  // 8 embeddings

struct ModelConfig {
  int image_size = 64;  // square input edge, divisible by 8
  std::array<int, 3> backbone_widths{8, 16, 32};
  int embed_dim = 32;  // d; divisible by heads
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int mlp_hidden = 64;   // encoder/decoder feed-forward width
  int head_hidden = 32;  // output head hidden width
  std::array<int, 3> freq_widths{8, 16, 16};
  FrequencyMethod frequency{};
  // false removes the frequency branch entirely (spatial-only baseline).
  bool use_frequency = true;
  // optional non-affine pre-normalization; the default faithful setting is off
  bool pre_norm = false;
  std::uint64_t init_seed = 1;

  void validate() const;  // throws std::invalid_argument
  int grid() const { return image_size / 8; }      // encoder H' = W'
  int tokens() const { return grid() * grid(); }   // sequence length H'W'

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// The full network. Parameters are autodiff leaves registered in a fixed,
// name-addressable order; construction is deterministic given the config.
class FaithModel {
 public:
  explicit FaithModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const std::vector<std::pair<std::string, Tensor>>& named_params() const { return params_; }
  std::vector<Tensor> parameters() const;
  Tensor param(const std::string& name) const;  // throws on unknown name
  long param_count() const;

  // Fixed sinusoidal tables (row-major C×H'×W' and 5×d).
  const std::vector<double>& pos_table_2d() const { return pos2d_; }
  const std::vector<double>& pos_table_1d() const { return pos1d_; }

  // Three stride-2 conv stages: 3×H×W -> C×H/8×W/8.
  Tensor backbone_forward(const Tensor& image) const;

  // Spatial transformer encoder over the backbone grid -> (H'W')×d.
  Tensor encode(const Tensor& f_cor) const;

  // High-frequency conv stack + the per-location attention bias.
  // Returns (f_f [Cf×H'×W'], M_f [H'W']).
  std::pair<Tensor, Tensor> frequency_branch(const Tensor& image) const;

  // Decoder over a token prefix. tokens[0] must be SOS; length <= 5.
  // m_f == nullptr runs the frequency-free decoder (no bias added).
  Tensor decoder_forward(const std::vector<int>& tokens, const Tensor& f_s,
                         const Tensor* m_f) const;

  // Greedy autoregressive decoding; ties break toward the lowest token index.
  EditSequence predict_sequence(const Tensor& image) const;

  // Teacher-forced mean cross-entropy over the L+1 positions of
  // [gt..., EOS] given inputs [SOS, gt...].
  Tensor training_loss(const Tensor& image, const EditSequence& gt) const;

  void save_checkpoint(const std::string& path,
                       const nlohmann::ordered_json& extra = nlohmann::ordered_json()) const;
  static FaithModel load_checkpoint(const std::string& path,
                                    nlohmann::ordered_json* extra = nullptr);

 private:
  Tensor attention_block(const Tensor& q_in, const Tensor& kv_in, const Tensor& v_src,
                         const Tensor& wq, const Tensor& wk, const Tensor& wv,
                         const Tensor* mask, const Tensor* key_bias, bool value_residual) const;
  Tensor mlp2(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
              const Tensor& b2) const;
  Tensor maybe_norm(const Tensor& x) const;

  ModelConfig config_;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<double> pos2d_;  // C×H'×W' sinusoidal table
  std::vector<double> pos1d_;  // 5×d token-position table
};

}  // namespace faith

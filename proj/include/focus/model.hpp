#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "focus/layer.hpp"
#include "focus/serialize.hpp"

namespace focus {

struct ModelBlock {
  Tensor norm_gain, norm_bias;  // pre-norm, (D)
  FocusLayerParams focus;
};

/// Token embedding, a stack of pre-norm Focus layers, final norm and a linear
/// head to vocabulary logits.
struct Model {
  FocusConfig cfg;
  Tensor embed;  // (V, D)
  std::vector<ModelBlock> blocks;
  std::optional<hyper::GlobalConvParams> shared_conv;
  Tensor final_gain, final_bias;  // (D)
  Tensor head_w;                  // (D, V)
  Tensor head_b;                  // (V)
};

Model init_model(const FocusConfig& cfg, uint64_t seed);

// Stable names, e.g. "layer0.q", "layer1.hyper.mlp.w2", "head.weight".
std::vector<std::pair<std::string, Tensor>> named_parameters(const Model& m);

struct ModelTrace {
  std::vector<FocusTrace> layers;
};

// tokens: B*L ids laid out (B, L). Returns logits (B, L, V). Throws InputError
// for ids outside [0, V).
Tensor model_forward(const Model& m, std::span<const int64_t> tokens, int64_t batch,
                     ModelTrace* trace = nullptr);

// Checkpoints hold the config under "meta.config.*", every parameter, and any
// extra records (optimizer state) passed through unchanged.
void save_checkpoint(const std::filesystem::path& path, const Model& m,
                     const std::vector<NamedTensor>& extra = {});
FocusConfig config_from_records(const std::vector<NamedTensor>& records);
// Copies parameter values from records into m. FormatError names the first
// missing or mis-shaped tensor.
void load_parameters(Model& m, const std::vector<NamedTensor>& records);
Model load_model(const std::filesystem::path& path, std::vector<NamedTensor>* records_out = nullptr);

}  // namespace focus

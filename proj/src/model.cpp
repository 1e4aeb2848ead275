#include "focus/model.hpp"

#include "focus/ops.hpp"

namespace focus {

namespace {

struct ConfigField {
  const char* name;
  int64_t FocusConfig::*field;
};

constexpr ConfigField kIntFields[] = {
    {"seq_len", &FocusConfig::seq_len},     {"width", &FocusConfig::width},
    {"att_width", &FocusConfig::att_width}, {"nfft", &FocusConfig::nfft},
    {"filters", &FocusConfig::filters},     {"chunk", &FocusConfig::chunk},
    {"oversampling", &FocusConfig::oversampling}, {"hidden", &FocusConfig::hidden},
    {"n_layers", &FocusConfig::n_layers},   {"vocab", &FocusConfig::vocab},
};

const std::string kMeta = "meta.config.";

}  // namespace

Model init_model(const FocusConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Model m;
  m.cfg = cfg;
  const int64_t D = cfg.width;
  m.embed = rng.normal_tensor({cfg.vocab, D}, 0.0, 1.0);
  if (cfg.share_hyper_embedding && !cfg.ablation) {
    m.shared_conv = hyper::init_global_conv(rng, cfg.padded_len(), D, cfg.squash_lambda);
  }
  for (int64_t i = 0; i < cfg.n_layers; ++i) {
    ModelBlock b;
    b.norm_gain = Tensor::full({D}, 1.0);
    b.norm_bias = Tensor::zeros({D});
    b.focus = init_focus_layer(rng, cfg);
    m.blocks.push_back(std::move(b));
  }
  m.final_gain = Tensor::full({D}, 1.0);
  m.final_bias = Tensor::zeros({D});
  m.head_w = rng.normal_tensor({D, cfg.vocab}, 0.0, 0.02);
  m.head_b = Tensor::zeros({cfg.vocab});
  return m;
}

std::vector<std::pair<std::string, Tensor>> named_parameters(const Model& m) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embed.weight", m.embed);
  if (m.shared_conv) out.emplace_back("hyper.gconv.kernel", m.shared_conv->kernel);
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    const std::string pre = "layer" + std::to_string(i) + ".";
    const auto& b = m.blocks[i];
    const auto& f = b.focus;
    out.emplace_back(pre + "norm.gain", b.norm_gain);
    out.emplace_back(pre + "norm.bias", b.norm_bias);
    out.emplace_back(pre + "q", f.q);
    out.emplace_back(pre + "k", f.k);
    out.emplace_back(pre + "v", f.v);
    if (f.w_out.defined()) out.emplace_back(pre + "w_out", f.w_out);
    out.emplace_back(pre + "w_gamma", f.w_gamma);
    out.emplace_back(pre + "b_gamma", f.b_gamma);
    out.emplace_back(pre + "w_phi", f.w_phi);
    out.emplace_back(pre + "b_phi", f.b_phi);
    out.emplace_back(pre + "w_h", f.w_h);
    out.emplace_back(pre + "u_h", f.u_h);
    out.emplace_back(pre + "b_h", f.b_h);
    if (f.theta_static.defined()) out.emplace_back(pre + "theta_static", f.theta_static);
    if (f.mlp.w1.defined()) {
      out.emplace_back(pre + "hyper.mlp.w1", f.mlp.w1);
      out.emplace_back(pre + "hyper.mlp.b1", f.mlp.b1);
      out.emplace_back(pre + "hyper.mlp.w2", f.mlp.w2);
      out.emplace_back(pre + "hyper.mlp.b2", f.mlp.b2);
    }
    if (f.conv) out.emplace_back(pre + "hyper.gconv.kernel", f.conv->kernel);
  }
  out.emplace_back("final_norm.gain", m.final_gain);
  out.emplace_back("final_norm.bias", m.final_bias);
  out.emplace_back("head.weight", m.head_w);
  out.emplace_back("head.bias", m.head_b);
  return out;
}

Tensor model_forward(const Model& m, std::span<const int64_t> tokens, int64_t batch, ModelTrace* trace) {
  if (batch < 1 || tokens.size() % static_cast<size_t>(batch) != 0) {
    throw DimensionError("model_forward: " + std::to_string(tokens.size()) + " tokens do not split into " +
                         std::to_string(batch) + " rows");
  }
  const auto L = static_cast<int64_t>(tokens.size()) / batch;
  const FocusConfig& cfg = m.cfg;
  Tensor x = embedding(m.embed, tokens, {batch, L});

  Tensor shared;
  if (m.shared_conv) {
    Tensor padded = pad_to_bins(x, cfg);
    shared = hyper::make_embedding(padded, *m.shared_conv, cfg.oversampling, padded.dim(-2) / cfg.nfft);
  }
  if (trace) trace->layers.assign(m.blocks.size(), {});
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    const auto& b = m.blocks[i];
    Tensor h = layer_norm_lastdim(x, b.norm_gain, b.norm_bias);
    FocusOptions opt;
    opt.shared_embedding = m.shared_conv ? &shared : nullptr;
    opt.residual = &x;
    opt.trace = trace ? &trace->layers[i] : nullptr;
    x = focus_forward(h, b.focus, cfg, opt);
  }
  Tensor out = layer_norm_lastdim(x, m.final_gain, m.final_bias);
  return add(matmul(out, m.head_w), m.head_b);
}

void save_checkpoint(const std::filesystem::path& path, const Model& m, const std::vector<NamedTensor>& extra) {
  std::vector<NamedTensor> recs;
  for (const auto& f : kIntFields) recs.push_back({kMeta + f.name, IntTensor{{}, {m.cfg.*(f.field)}}});
  recs.push_back({kMeta + "ablation", IntTensor{{}, {m.cfg.ablation ? 1 : 0}}});
  recs.push_back({kMeta + "share_hyper_embedding", IntTensor{{}, {m.cfg.share_hyper_embedding ? 1 : 0}}});
  recs.push_back({kMeta + "squash_lambda", Tensor::scalar(m.cfg.squash_lambda)});
  for (auto& [name, t] : named_parameters(m)) recs.push_back({name, t});
  recs.insert(recs.end(), extra.begin(), extra.end());
  save_named_tensors(path, recs);
}

FocusConfig config_from_records(const std::vector<NamedTensor>& records) {
  auto get_int = [&](const std::string& key) -> int64_t {
    const NamedTensor* nt = find_tensor(records, kMeta + key);
    const auto* it = nt ? std::get_if<IntTensor>(&nt->value) : nullptr;
    if (!it || it->data.size() != 1) throw FormatError("checkpoint lacks " + kMeta + key);
    return it->data[0];
  };
  FocusConfig cfg;
  for (const auto& f : kIntFields) cfg.*(f.field) = get_int(f.name);
  cfg.ablation = get_int("ablation") != 0;
  cfg.share_hyper_embedding = get_int("share_hyper_embedding") != 0;
  const NamedTensor* lam = find_tensor(records, kMeta + "squash_lambda");
  const auto* lt = lam ? std::get_if<Tensor>(&lam->value) : nullptr;
  if (!lt || lt->numel() != 1) throw FormatError("checkpoint lacks " + kMeta + "squash_lambda");
  cfg.squash_lambda = lt->item();
  return cfg;
}

void load_parameters(Model& m, const std::vector<NamedTensor>& records) {
  for (auto& [name, t] : named_parameters(m)) {
    const NamedTensor* nt = find_tensor(records, name);
    if (!nt) throw FormatError("checkpoint is missing tensor '" + name + "'");
    const auto* src = std::get_if<Tensor>(&nt->value);
    if (!src || src->shape() != t.shape() || src->dtype() != t.dtype()) {
      throw FormatError("tensor '" + name + "' has shape " +
                        (src ? shape_str(src->shape()) : std::string("(int)")) + ", model expects " +
                        shape_str(t.shape()));
    }
    Tensor dst = t;
    std::copy(src->raw().begin(), src->raw().end(), dst.raw().begin());
  }
}

Model load_model(const std::filesystem::path& path, std::vector<NamedTensor>* records_out) {
  auto records = load_named_tensors(path);
  FocusConfig cfg = config_from_records(records);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": stored config invalid: " + e.what());
  }
  Model m = init_model(cfg, 0);
  load_parameters(m, records);
  if (records_out) *records_out = std::move(records);
  return m;
}

}  // namespace focus

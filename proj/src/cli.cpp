#include "focus/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "focus/bench.hpp"
#include "focus/inspect.hpp"
#include "focus/model.hpp"
#include "focus/ops.hpp"
#include "focus/tasks.hpp"

namespace focus::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const std::vector<KeyDef>& schema() {
  static const std::vector<KeyDef> keys = {
      {"task", KeyType::String, "recall", "recall or charlm"},
      {"L", KeyType::Int, "30", "sequence length"},
      {"vocab", KeyType::Int, "30", "vocabulary size (charlm always uses 256)"},
      {"n_samples", KeyType::Int, "2000", "recall sequences generated"},
      {"train_fraction", KeyType::Real, "0.9", "share of samples (or corpus bytes) used for training"},
      {"D", KeyType::Int, "64", "model width"},
      {"D_att", KeyType::Int, "0", "attention width, 0 = D"},
      {"NFFT", KeyType::Int, "0", "bin length, 0 = next power of two >= L/4"},
      {"F", KeyType::Int, "1", "filters per channel and bin"},
      {"M", KeyType::Int, "0", "attention chunk, 0 = min(L, 32)"},
      {"O", KeyType::Int, "4", "hypernetwork oversampling, must divide NFFT"},
      {"hidden", KeyType::Int, "0", "hypernetwork MLP width, 0 = 2 O"},
      {"layers", KeyType::Int, "2", "Focus layers"},
      {"ablation", KeyType::Bool, "false", "static learned filters instead of the hypernetwork"},
      {"share_embedding", KeyType::Bool, "false", "one hypernetwork embedding shared by all layers"},
      {"squash_lambda", KeyType::Real, "0.001", "soft threshold applied to the global kernel"},
      {"lr", KeyType::Real, "0.0001", "peak learning rate"},
      {"beta1", KeyType::Real, "0.9", "Adam beta1"},
      {"beta2", KeyType::Real, "0.98", "Adam beta2"},
      {"eps", KeyType::Real, "1e-08", "Adam epsilon"},
      {"weight_decay", KeyType::Real, "0.01", "decoupled weight decay on matrices"},
      {"batch", KeyType::Int, "32", "sequences per optimizer step"},
      {"micro_batch", KeyType::Int, "0", "sequences per forward pass, 0 = batch"},
      {"warmup_epochs", KeyType::Int, "10", "linear learning-rate warmup"},
      {"max_epochs", KeyType::Int, "200", "epoch limit"},
      {"target_accuracy", KeyType::Real, "1.0", "recall stops once an epoch's train accuracy reaches this"},
      {"steps_per_epoch", KeyType::Int, "50", "charlm steps per epoch"},
      {"max_seconds", KeyType::Real, "0", "wall-clock cap on training, 0 = none"},
      {"eval_batch", KeyType::Int, "64", "sequences per evaluation pass"},
      {"seed", KeyType::Int, "0", "seed for data, initialization and sampling"},
      {"out", KeyType::String, "run", "output directory"},
      {"data", KeyType::String, "", "recall dataset file; generated when empty or missing"},
      {"corpus", KeyType::String, "", "text file for charlm"},
      {"checkpoint", KeyType::String, "", "checkpoint to read, default <out>/checkpoint.bin"},
      {"input", KeyType::String, "", "inspect-filters: whitespace-separated token ids"},
      {"sample", KeyType::Int, "0", "inspect-filters: test sample index when no input is given"},
      {"layer", KeyType::Int, "0", "inspect-filters: layer whose filters are reported"},
      {"query_pos", KeyType::Int, "-1", "inspect-filters: position of interest for input files, -1 = last"},
      {"bench_lengths", KeyType::String, "1024,2048,4096,8192,16384", "bench sequence lengths"},
      {"bench_width", KeyType::Int, "16", "bench model width"},
      {"bench_chunk", KeyType::Int, "32", "bench attention chunk"},
      {"bench_repeats", KeyType::Int, "3", "timed repeats per length (median kept)"},
      {"bench_reference", KeyType::Bool, "true", "also time full causal attention"},
      {"bench_width_len", KeyType::Int, "4096", "length used for the width-doubling check"},
  };
  return keys;
}

namespace {

const KeyDef* find_key(const std::string& key) {
  for (const auto& k : schema()) {
    if (k.name == key) return &k;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool parse_int(const std::string& v, int64_t& out) {
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  return ec == std::errc() && p == end;
}

bool parse_real(const std::string& v, double& out) {
  if (v.empty()) return false;
  char* end = nullptr;
  out = std::strtod(v.c_str(), &end);
  return end == v.c_str() + v.size();
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    out = true;
  } else if (v == "false" || v == "0" || v == "no" || v == "off") {
    out = false;
  } else {
    return false;
  }
  return true;
}

}  // namespace

Settings::Settings() {
  for (const auto& k : schema()) {
    values_[k.name] = k.default_value;
    origins_[k.name] = "default";
  }
}

void Settings::set(const std::string& key, const std::string& value, const std::string& origin) {
  const KeyDef* def = find_key(key);
  if (!def) throw ConfigError("unknown config key '" + key + "'");
  int64_t i = 0;
  double r = 0;
  bool b = false;
  bool ok = true;
  switch (def->type) {
    case KeyType::Int: ok = parse_int(value, i); break;
    case KeyType::Real: ok = parse_real(value, r); break;
    case KeyType::Bool: ok = parse_bool(value, b); break;
    case KeyType::String: break;
  }
  if (!ok) throw ConfigError(key + ": cannot parse '" + value + "' (" + origin + ")");
  values_[key] = value;
  origins_[key] = origin;
}

const std::string& Settings::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

const std::string& Settings::origin(const std::string& key) const {
  raw(key);
  return origins_.at(key);
}

int64_t Settings::get_int(const std::string& key) const {
  int64_t v = 0;
  parse_int(raw(key), v);
  return v;
}

double Settings::get_real(const std::string& key) const {
  double v = 0;
  parse_real(raw(key), v);
  return v;
}

bool Settings::get_bool(const std::string& key) const {
  bool v = false;
  parse_bool(raw(key), v);
  return v;
}

const std::string& Settings::get_string(const std::string& key) const { return raw(key); }

void apply_config_file(Settings& s, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!find_key(key)) {
      throw ConfigError("unknown config key '" + key + "' at " + path.string() + ":" + std::to_string(lineno));
    }
    s.set(key, trim(line.substr(eq + 1)), "file");
  }
}

Settings resolve(const std::string& config_path, const std::map<std::string, std::string>& flags,
                 const char* env_seed) {
  Settings s;
  if (env_seed && *env_seed) s.set("seed", env_seed, "env");
  if (!config_path.empty()) apply_config_file(s, config_path);
  for (const auto& [k, v] : flags) s.set(k, v, "flag");
  return s;
}

namespace {

// Model keys from settings on top of `c`. With only_explicit, keys still at
// their default leave c untouched.
FocusConfig apply_model_keys(const Settings& s, FocusConfig c, bool only_explicit) {
  auto want = [&](const char* k) { return !only_explicit || !s.is_default(k); };
  if (want("L")) c.seq_len = s.get_int("L");
  if (want("vocab")) c.vocab = s.get_int("vocab");
  if (want("D")) c.width = s.get_int("D");
  if (want("D_att")) c.att_width = s.get_int("D_att") == 0 ? c.width : s.get_int("D_att");
  if (want("F")) c.filters = s.get_int("F");
  if (want("O")) c.oversampling = s.get_int("O");
  if (want("layers")) c.n_layers = s.get_int("layers");
  if (want("ablation")) c.ablation = s.get_bool("ablation");
  if (want("share_embedding")) c.share_hyper_embedding = s.get_bool("share_embedding");
  if (want("squash_lambda")) c.squash_lambda = s.get_real("squash_lambda");
  if (want("NFFT")) {
    c.nfft = s.get_int("NFFT") == 0 ? next_power_of_two((c.seq_len + 3) / 4) : s.get_int("NFFT");
  }
  if (want("M")) c.chunk = s.get_int("M") == 0 ? std::min<int64_t>(c.seq_len, 32) : s.get_int("M");
  if (want("hidden")) c.hidden = s.get_int("hidden") == 0 ? 2 * c.oversampling : s.get_int("hidden");
  if (s.get_string("task") == "charlm") {
    if (s.is_default("vocab")) {
      c.vocab = 256;
    } else if (s.get_int("vocab") != 256) {
      throw ConfigError("vocab: charlm uses 256 byte tokens, got " + s.raw("vocab"));
    }
  }
  c.validate();
  return c;
}

void check_task(const Settings& s) {
  const auto& t = s.get_string("task");
  if (t != "recall" && t != "charlm") throw ConfigError("task: expected recall or charlm, got '" + t + "'");
  const double frac = s.get_real("train_fraction");
  if (!(frac > 0.0 && frac < 1.0)) throw ConfigError("train_fraction: must lie in (0, 1)");
}

uint64_t model_seed(const Settings& s) { return static_cast<uint64_t>(s.get_int("seed")) * 2654435761u + 1; }

std::pair<tasks::RecallSet, tasks::RecallSet> recall_data(const Settings& s, const FocusConfig& cfg) {
  const std::string& path = s.get_string("data");
  tasks::RecallSet all;
  if (!path.empty() && fs::exists(path)) {
    all = tasks::load_recall(path, cfg.vocab);
    if (all.seq_len != cfg.seq_len) {
      throw ConfigError("L: dataset " + path + " holds length " + std::to_string(all.seq_len) +
                        " sequences, config asks for " + std::to_string(cfg.seq_len));
    }
  } else {
    all = tasks::gen_recall(cfg.vocab, cfg.seq_len, s.get_int("n_samples"), static_cast<uint64_t>(s.get_int("seed")));
  }
  return tasks::split(all, s.get_real("train_fraction"));
}

tasks::CharCorpus corpus_data(const Settings& s, const FocusConfig& cfg) {
  const std::string& path = s.get_string("corpus");
  if (path.empty()) throw ConfigError("corpus: required for task charlm");
  return tasks::load_corpus(path, 1.0 - s.get_real("train_fraction"), cfg.seq_len + 1);
}

fs::path out_dir(const Settings& s) {
  fs::path dir = s.get_string("out");
  if (dir.empty()) throw ConfigError("out: output directory must not be empty");
  fs::create_directories(dir);
  return dir;
}

fs::path checkpoint_path(const Settings& s) {
  const std::string& ck = s.get_string("checkpoint");
  return ck.empty() ? fs::path(s.get_string("out")) / "checkpoint.bin" : fs::path(ck);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

// Model from a checkpoint, with explicitly set model keys checked against it.
Model checkpoint_model(const Settings& s) {
  const fs::path path = checkpoint_path(s);
  if (!fs::exists(path)) throw FormatError("checkpoint not found: " + path.string());
  const auto records = load_named_tensors(path);
  FocusConfig stored;
  try {
    stored = config_from_records(records);
    stored.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": stored config invalid: " + e.what());
  }
  Model m = init_model(apply_model_keys(s, stored, true), 0);
  load_parameters(m, records);
  return m;
}

json config_json(const FocusConfig& c) {
  return json{{"L", c.seq_len},      {"vocab", c.vocab},    {"D", c.width},
              {"D_att", c.att_width}, {"NFFT", c.nfft},      {"F", c.filters},
              {"M", c.chunk},         {"O", c.oversampling}, {"hidden", c.hidden},
              {"layers", c.n_layers}, {"ablation", c.ablation}};
}

int cmd_train(const Settings& s, std::ostream& out) {
  check_task(s);
  const FocusConfig cfg = focus_config(s);
  const train::TrainConfig tc = train_config(s);
  const fs::path dir = out_dir(s);
  const bool recall = s.get_string("task") == "recall";

  Model m = init_model(cfg, model_seed(s));
  train::AdamW opt(named_parameters(m), tc);

  std::ofstream log(dir / "train_log.csv");
  if (!log) throw FormatError("cannot write " + (dir / "train_log.csv").string());
  log << "epoch,step,lr,loss,metric\n" << std::setprecision(10);
  auto hook = [&](const train::EpochLog& e) {
    log << e.epoch << ',' << e.step << ',' << e.lr << ',' << e.loss << ',' << e.metric << '\n';
    log.flush();
    out << "epoch " << e.epoch << " step " << e.step << " loss " << e.loss
        << (recall ? " train_acc " + std::to_string(e.train_accuracy) + " test_acc " : " test_bpc ") << e.metric
        << '\n';
    out.flush();
  };

  train::TrainResult result;
  if (recall) {
    auto [train_set, test_set] = recall_data(s, cfg);
    result = train::train_recall(m, train_set, test_set, tc, opt, hook);
  } else {
    const auto corpus = corpus_data(s, cfg);
    result = train::train_char_lm(m, corpus, tc, opt, hook);
  }
  save_checkpoint(dir / "checkpoint.bin", m, opt.state());

  json metrics{{"task", s.get_string("task")}, {"config", config_json(cfg)}};
  metrics[recall ? "test_accuracy" : "test_bpc"] = result.test_metric;
  if (recall && !result.log.empty()) metrics["train_accuracy"] = result.log.back().train_accuracy;
  metrics["epochs"] = result.log.empty() ? 0 : result.log.back().epoch;
  metrics["steps"] = opt.steps();
  metrics["reached_target"] = result.reached_target;
  metrics["seconds"] = result.seconds;
  write_json(dir / "metrics.json", metrics);
  out << metrics.dump() << '\n';
  return 0;
}

int cmd_eval(const Settings& s, std::ostream& out) {
  check_task(s);
  const Model m = checkpoint_model(s);
  const bool recall = s.get_string("task") == "recall";
  json metrics{{"task", s.get_string("task")}, {"config", config_json(m.cfg)}};
  if (recall) {
    auto [train_set, test_set] = recall_data(s, m.cfg);
    metrics["test_accuracy"] = train::eval_recall(m, test_set, s.get_int("eval_batch"));
  } else {
    const auto corpus = corpus_data(s, m.cfg);
    metrics["test_bpc"] = train::eval_char_lm(m, corpus.test, s.get_int("eval_batch"));
  }
  out << metrics.dump() << '\n';
  return 0;
}

std::vector<int64_t> read_tokens(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read input " + path.string());
  std::vector<int64_t> tokens;
  std::string word;
  while (in >> word) {
    int64_t v = 0;
    if (!parse_int(word, v)) throw InputError(path.string() + ": '" + word + "' is not a token id");
    tokens.push_back(v);
  }
  return tokens;
}

int cmd_inspect(const Settings& s, std::ostream& out) {
  check_task(s);
  const Model m = checkpoint_model(s);
  const FocusConfig& cfg = m.cfg;
  std::vector<int64_t> tokens;
  int64_t focus_pos = 0;
  if (!s.get_string("input").empty()) {
    tokens = read_tokens(s.get_string("input"));
    if (static_cast<int64_t>(tokens.size()) != cfg.seq_len) {
      throw InputError("input holds " + std::to_string(tokens.size()) + " tokens, the checkpoint expects " +
                       std::to_string(cfg.seq_len));
    }
    focus_pos = s.get_int("query_pos") < 0 ? cfg.seq_len - 1 : s.get_int("query_pos");
  } else {
    if (s.get_string("task") != "recall") throw ConfigError("input: required unless task is recall");
    auto [train_set, test_set] = recall_data(s, cfg);
    const int64_t idx = s.get_int("sample");
    if (idx < 0 || idx >= static_cast<int64_t>(test_set.samples.size())) {
      throw ConfigError("sample: index " + std::to_string(idx) + " outside the test split");
    }
    tokens = test_set.samples[static_cast<size_t>(idx)].tokens;
    focus_pos = test_set.samples[static_cast<size_t>(idx)].query_pos;
  }
  if (focus_pos < 0 || focus_pos >= cfg.seq_len) throw ConfigError("query_pos: outside the sequence");
  const int64_t layer = s.get_int("layer");
  if (layer < 0 || layer >= cfg.n_layers) throw ConfigError("layer: model has " + std::to_string(cfg.n_layers) + " layers");

  ModelTrace trace;
  model_forward(m, tokens, 1, &trace);
  const Tensor& theta = trace.layers[static_cast<size_t>(layer)].theta;
  const Shape tail{cfg.nbins(), cfg.width, cfg.filters, 2};
  Tensor bank = Tensor::zeros(tail);
  std::copy_n(theta.values().begin(), bank.numel(), bank.values().begin());
  const auto report = inspect::filter_report(bank, cfg.nfft);

  const fs::path dir = out_dir(s);
  {
    std::ofstream os(dir / "filters.csv");
    inspect::write_magnitude_csv(os, report);
    std::ofstream ps(dir / "filter_peaks.csv");
    inspect::write_peak_csv(ps, report);
  }
  const int64_t bin = focus_pos / cfg.nfft;
  const auto [lo, hi] = std::minmax_element(report.peak.begin(), report.peak.end());
  json summary{{"nbins", report.nbins},
               {"nfft", report.nfft},
               {"layer", layer},
               {"query_pos", focus_pos},
               {"query_bin", bin},
               {"peak", report.peak},
               {"median_peak", inspect::median(report.peak)},
               {"query_ratio", inspect::focus_ratio(report, bin)},
               {"peak_spread", *hi / *lo}};
  out << summary.dump() << '\n';
  return 0;
}

std::vector<int64_t> parse_lengths(const std::string& text) {
  std::vector<int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int64_t v = 0;
    if (!parse_int(trim(item), v) || v < 1) throw ConfigError("bench_lengths: bad entry '" + item + "'");
    out.push_back(v);
  }
  if (out.size() < 2) throw ConfigError("bench_lengths: need at least two lengths");
  return out;
}

int cmd_bench(const Settings& s, std::ostream& out) {
  Eigen::setNbThreads(1);
  const auto lengths = parse_lengths(s.get_string("bench_lengths"));
  const int64_t width = s.get_int("bench_width"), chunk = s.get_int("bench_chunk");
  const int repeats = static_cast<int>(s.get_int("bench_repeats"));
  const uint64_t seed = static_cast<uint64_t>(s.get_int("seed"));
  const fs::path dir = out_dir(s);
  std::ofstream csv(dir / "bench.csv");
  csv << "model,L,D,seconds,flops\n" << std::setprecision(10);

  std::vector<double> xs, focus_t, focus_f, ref_t, ref_f;
  for (int64_t L : lengths) {
    const auto t = bench::time_focus_forward(L, width, chunk, repeats, seed);
    csv << "focus," << L << ',' << width << ',' << t.seconds << ',' << t.flops << '\n';
    xs.push_back(static_cast<double>(L));
    focus_t.push_back(t.seconds);
    focus_f.push_back(static_cast<double>(t.flops));
    if (s.get_bool("bench_reference")) {
      const auto r = bench::time_full_attention(L, width, repeats, seed);
      csv << "attention," << L << ',' << width << ',' << r.seconds << ',' << r.flops << '\n';
      ref_t.push_back(r.seconds);
      ref_f.push_back(static_cast<double>(r.flops));
    }
    out << "L " << L << " focus " << t.seconds << " s" << (ref_t.empty() ? "" : " attention " + std::to_string(ref_t.back()) + " s") << '\n';
  }
  const int64_t wl = s.get_int("bench_width_len");
  const auto narrow = bench::time_focus_forward(wl, width, chunk, repeats, seed);
  const auto wide = bench::time_focus_forward(wl, 2 * width, chunk, repeats, seed);
  csv << "focus," << wl << ',' << 2 * width << ',' << wide.seconds << ',' << wide.flops << '\n';

  json summary{{"focus_time_slope", bench::loglog_slope(xs, focus_t)},
               {"focus_flop_slope", bench::loglog_slope(xs, focus_f)}};
  if (!ref_t.empty()) {
    summary["attention_time_slope"] = bench::loglog_slope(xs, ref_t);
    summary["attention_flop_slope"] = bench::loglog_slope(xs, ref_f);
  }
  summary["width_doubling_ratio"] = wide.seconds / narrow.seconds;
  write_json(dir / "bench.json", summary);
  out << summary.dump() << '\n';
  return 0;
}

int cmd_gen_data(const Settings& s, std::ostream& out) {
  if (s.get_string("task") != "recall") throw ConfigError("task: gen-data only produces recall data");
  check_task(s);
  const FocusConfig cfg = focus_config(s);
  const auto all = tasks::gen_recall(cfg.vocab, cfg.seq_len, s.get_int("n_samples"),
                                     static_cast<uint64_t>(s.get_int("seed")));
  fs::path path = s.get_string("data");
  if (path.empty()) path = out_dir(s) / "recall.bin";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  tasks::save_recall(path, all);
  const auto [train_set, test_set] = tasks::split(all, s.get_real("train_fraction"));
  out << json{{"path", path.string()},
              {"samples", all.samples.size()},
              {"train", train_set.samples.size()},
              {"test", test_set.samples.size()}}
             .dump()
      << '\n';
  return 0;
}

}  // namespace

FocusConfig focus_config(const Settings& s) { return apply_model_keys(s, FocusConfig{}, false); }

train::TrainConfig train_config(const Settings& s) {
  train::TrainConfig t;
  t.lr = s.get_real("lr");
  t.beta1 = s.get_real("beta1");
  t.beta2 = s.get_real("beta2");
  t.eps = s.get_real("eps");
  t.weight_decay = s.get_real("weight_decay");
  t.batch = s.get_int("batch");
  t.micro_batch = s.get_int("micro_batch");
  t.warmup_epochs = s.get_int("warmup_epochs");
  t.max_epochs = s.get_int("max_epochs");
  t.target_train_accuracy = s.get_real("target_accuracy");
  t.steps_per_epoch = s.get_int("steps_per_epoch");
  t.max_seconds = s.get_real("max_seconds");
  t.eval_batch = s.get_int("eval_batch");
  t.seed = static_cast<uint64_t>(s.get_int("seed"));
  if (!(t.lr > 0)) throw ConfigError("lr: must be positive");
  if (t.batch < 1) throw ConfigError("batch: must be >= 1");
  if (t.micro_batch < 0 || t.micro_batch > t.batch) throw ConfigError("micro_batch: must lie in [0, batch]");
  if (t.max_epochs < 1) throw ConfigError("max_epochs: must be >= 1");
  if (t.warmup_epochs < 0) throw ConfigError("warmup_epochs: must be >= 0");
  if (t.steps_per_epoch < 1) throw ConfigError("steps_per_epoch: must be >= 1");
  if (t.eval_batch < 1) throw ConfigError("eval_batch: must be >= 1");
  if (!(t.beta1 >= 0 && t.beta1 < 1)) throw ConfigError("beta1: must lie in [0, 1)");
  if (!(t.beta2 >= 0 && t.beta2 < 1)) throw ConfigError("beta2: must lie in [0, 1)");
  return t;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Focus layer sequence models: train, evaluate, inspect filters, benchmark"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> flag_values;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "train a model and write checkpoint.bin, train_log.csv and metrics.json"},
      {"eval", "evaluate a checkpoint on the held-out split"},
      {"inspect-filters", "per-bin filter magnitude responses of a checkpoint"},
      {"bench", "forward-pass timing against sequence length"},
      {"gen-data", "write a recall dataset"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "key = value config file");
    for (const auto& k : schema()) {
      const std::string doc = k.doc + " (default: " + (k.default_value.empty() ? "none" : k.default_value) + ")";
      if (k.type == KeyType::Bool) {
        sub->add_flag("--" + k.name + "{true}", flag_values[k.name], doc);
      } else {
        sub->add_option("--" + k.name, flag_values[k.name], doc);
      }
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    CLI::App* active = nullptr;
    for (auto* sub : subs) {
      if (sub->parsed()) active = sub;
    }
    std::map<std::string, std::string> flags;
    for (const auto& k : schema()) {
      if (active->get_option("--" + k.name)->count() > 0) flags[k.name] = flag_values[k.name];
    }
    const Settings s = resolve(config_path, flags, std::getenv("FOCUS_SEED"));
    const std::string cmd = active->get_name();
    if (cmd == "train") return cmd_train(s, out);
    if (cmd == "eval") return cmd_eval(s, out);
    if (cmd == "inspect-filters") return cmd_inspect(s, out);
    if (cmd == "bench") return cmd_bench(s, out);
    return cmd_gen_data(s, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    err << "artifact error: " << e.what() << '\n';
    return 3;
  } catch (const InputError& e) {
    err << "artifact error: " << e.what() << '\n';
    return 3;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace focus::cli

#include "samif/config.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "samif/errors.hpp"
#include "samif/ingest.hpp"

namespace samif {

Digest sha256(std::string_view bytes) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw Error("SHA-256 computation failed");
  }
  return out;
}

std::string to_hex(const Digest& digest) {
  static const char* hex = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : digest) {
    s.push_back(hex[b >> 4]);
    s.push_back(hex[b & 0xf]);
  }
  return s;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidConfig("key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw InvalidConfig("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& v, F f) {
  std::vector<T> out;
  for (const auto& s : split_list(v)) out.push_back(static_cast<T>(f(s)));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) s += fmt(xs[i]);
    else s += std::to_string(xs[i]);
  }
  return s;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto num = [&](const std::string& s) { return to_double(key, s); };
  auto uint = [&](const std::string& s) { return to_uint(key, s); };

  if (key == "dataset") dataset = v;
  else if (key == "csv_path") csv_path = v;
  else if (key == "label_column") label_column = v;
  else if (key == "idx_images") idx_images = v;
  else if (key == "idx_labels") idx_labels = v;
  else if (key == "idx_limit") idx_limit = uint(v);
  else if (key == "val_size") val_size = uint(v);
  else if (key == "test_size") test_size = uint(v);
  else if (key == "val_fraction") val_fraction = num(v);
  else if (key == "test_fraction") test_fraction = num(v);
  else if (key == "model") model = parse_model_kind(v);
  else if (key == "hidden") hidden = parse_list<std::size_t>(v, uint);
  else if (key == "activation") activation = parse_activation(v);
  else if (key == "rho") sam.rho = num(v);
  else if (key == "p") sam.p = num(v);
  else if (key == "lambda") sam.lambda = num(v);
  else if (key == "eta") sam.eta = num(v);
  else if (key == "lr_milestones") sam.lr_milestones = parse_list<std::size_t>(v, uint);
  else if (key == "lr_gamma") sam.lr_gamma = num(v);
  else if (key == "batch_size") sam.batch_size = uint(v);
  else if (key == "steps") sam.steps = uint(v);
  else if (key == "seed") sam.seed = uint(v);
  else if (key == "record_stride") sam.record_stride = uint(v);
  else if (key == "sampling") {
    if (v == "per_step") sam.sampling = SamplingMode::per_step;
    else if (v == "epoch_shuffled") sam.sampling = SamplingMode::epoch_shuffled;
    else throw InvalidConfig("key 'sampling': expected per_step or epoch_shuffled");
  } else if (key == "estimator") estimator = parse_estimator(v);
  else if (key == "gif_mode") {
    if (v == "gd") gif_mode = GifMode::gd;
    else if (v == "sgd") gif_mode = GifMode::sgd;
    else throw InvalidConfig("key 'gif_mode': expected gd or sgd");
  } else if (key == "neumann_order") neumann.order = uint(v);
  else if (key == "neumann_alpha") neumann.alpha = num(v);
  else if (key == "neumann_damp") neumann.damp = num(v);
  else if (key == "neumann_zeta") neumann.zeta = num(v);
  else if (key == "removal_mode") {
    if (v == "drop") removal_mode = RemovalMode::drop;
    else if (v == "resample") removal_mode = RemovalMode::resample;
    else throw InvalidConfig("key 'removal_mode': expected drop or resample");
  } else if (key == "removal_fractions") removal_fractions = parse_list<double>(v, num);
  else if (key == "inspect_fractions") inspect_fractions = parse_list<double>(v, num);
  else if (key == "flip_fraction") flip_fraction = num(v);
  else if (key == "control_repeats") control_repeats = uint(v);
  else if (key == "top_m") top_m = uint(v);
  else if (key == "remove") remove = parse_list<std::uint32_t>(v, uint);
  else if (key == "edit_fraction") edit_fraction = num(v);
  else if (key == "calibrate_sample") calibrate_sample = uint(v);
  else if (key == "trajectory") trajectory = v;
  else if (key == "out") out = v;
  else throw InvalidConfig("unknown config key '" + key + "'");
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfig("config line " + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::validate() const {
  sam.validate();
  neumann.validate();
  auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  for (double f : removal_fractions) {
    if (!in_unit(f)) throw InvalidConfig("removal fractions must lie in [0, 1]");
  }
  for (double f : inspect_fractions) {
    if (!in_unit(f)) throw InvalidConfig("inspection fractions must lie in [0, 1]");
  }
  if (!(flip_fraction >= 0.0 && flip_fraction <= 0.5)) throw InvalidConfig("flip_fraction must lie in [0, 0.5]");
  if (control_repeats == 0) throw InvalidConfig("control_repeats must be positive");
  if (!in_unit(edit_fraction)) throw InvalidConfig("edit_fraction must lie in [0, 1]");
  if (dataset != "csv" && dataset != "idx") parse_blobs(dataset);
  if (dataset == "csv" && csv_path.empty()) throw InvalidConfig("dataset = csv needs csv_path");
  if (dataset == "idx" && (idx_images.empty() || idx_labels.empty())) {
    throw InvalidConfig("dataset = idx needs idx_images and idx_labels");
  }
  if (model != ModelKind::mlp && !hidden.empty()) throw InvalidConfig("hidden layers need model = mlp");
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["dataset"] = dataset;
  kv["csv_path"] = csv_path;
  kv["label_column"] = label_column;
  kv["idx_images"] = idx_images;
  kv["idx_labels"] = idx_labels;
  kv["idx_limit"] = std::to_string(idx_limit);
  kv["val_size"] = std::to_string(val_size);
  kv["test_size"] = std::to_string(test_size);
  kv["val_fraction"] = fmt(val_fraction);
  kv["test_fraction"] = fmt(test_fraction);
  kv["model"] = to_string(model);
  kv["hidden"] = join(hidden);
  kv["activation"] = to_string(activation);
  kv["sam"] = sam.canonical();
  kv["estimator"] = to_string(estimator);
  kv["gif_mode"] = gif_mode == GifMode::gd ? "gd" : "sgd";
  kv["neumann_order"] = std::to_string(neumann.order);
  kv["neumann_alpha"] = fmt(neumann.alpha);
  kv["neumann_damp"] = fmt(neumann.damp);
  kv["neumann_zeta"] = fmt(neumann.zeta);
  kv["removal_mode"] = removal_mode == RemovalMode::drop ? "drop" : "resample";
  kv["removal_fractions"] = join(removal_fractions);
  kv["inspect_fractions"] = join(inspect_fractions);
  kv["flip_fraction"] = fmt(flip_fraction);
  kv["control_repeats"] = std::to_string(control_repeats);
  kv["top_m"] = std::to_string(top_m);
  kv["remove"] = join(remove);
  kv["edit_fraction"] = fmt(edit_fraction);
  kv["calibrate_sample"] = std::to_string(calibrate_sample);
  kv["trajectory"] = trajectory;
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

Digest ExperimentConfig::digest() const { return sha256(canonical()); }

}  // namespace samif

// Copyright 2026 The specfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace specfuse::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(std::string_view key, std::string_view value, const std::string &why,
                       int line) {
  std::string msg;
  if (line > 0) msg = "line " + std::to_string(line) + ": ";
  msg += std::string(key) + ": " + why + " (got '" + std::string(value) + "')";
  throw ConfigError(msg, line);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text, int line, const char *kind) {
  T out{};
  const char *end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (text.empty() || ec != std::errc() || ptr != end) fail(key, text, std::string("expected ") + kind, line);
  return out;
}

double parse_real(std::string_view key, std::string_view text, int line) {
  const double v = parse_number<double>(key, text, line, "a real number");
  if (!std::isfinite(v)) fail(key, text, "expected a finite number", line);
  return v;
}

bool parse_bool(std::string_view key, std::string_view text, int line) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(key, text, "expected true or false", line);
}

std::vector<double> parse_real_list(std::string_view key, std::string_view text, int line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    std::string_view item = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    out.push_back(parse_real(key, item, line));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename E>
struct EnumNames {
  std::vector<std::pair<std::string, E>> names;

  E parse(std::string_view key, std::string_view text, int line) const {
    for (const auto &[n, e] : names) {
      if (n == text) return e;
    }
    std::string allowed;
    for (const auto &[n, e] : names) allowed += (allowed.empty() ? "" : "|") + n;
    fail(key, text, "expected one of " + allowed, line);
  }
  std::string name(E e) const {
    for (const auto &[n, v] : names) {
      if (v == e) return n;
    }
    return "?";
  }
};

const EnumNames<mdn::StickMode> kStickModes{
    {{"paper", mdn::StickMode::kPaper}, {"remainder", mdn::StickMode::kRemainder}}};
const EnumNames<mdn::KumaraswamyMode> kKumaraswamyModes{
    {{"standard", mdn::KumaraswamyMode::kStandard},
     {"as-printed", mdn::KumaraswamyMode::kAsPrinted}}};
const EnumNames<train::OptimizerKind> kOptimizers{
    {{"adam", train::OptimizerKind::kAdam}, {"sgd", train::OptimizerKind::kSgd}}};
const EnumNames<train::DecayTarget> kDecayTargets{
    {{"factors", train::DecayTarget::kFactors}, {"product", train::DecayTarget::kProduct}}};
const EnumNames<Interpolation> kInterpolations{
    {{"bilinear", Interpolation::kBilinear}, {"nearest", Interpolation::kNearest}}};

struct Field {
  std::function<void(RunConfig &, std::string_view key, std::string_view text, int line)> set;
  std::function<std::string(const RunConfig &)> get;
};

template <typename M>
Field index_field(M member) {
  return {[member](RunConfig &c, std::string_view k, std::string_view t, int line) {
            c.*member = parse_number<Index>(k, t, line, "an integer");
          },
          [member](const RunConfig &c) { return std::to_string(c.*member); }};
}

template <typename M>
Field real_field(M member) {
  return {[member](RunConfig &c, std::string_view k, std::string_view t, int line) {
            c.*member = parse_real(k, t, line);
          },
          [member](const RunConfig &c) { return real_text(c.*member); }};
}

template <typename M>
Field string_field(M member) {
  return {[member](RunConfig &c, std::string_view, std::string_view t, int) { c.*member = std::string(t); },
          [member](const RunConfig &c) { return c.*member; }};
}

template <typename M>
Field train_real(M member) {
  return {[member](RunConfig &c, std::string_view k, std::string_view t, int line) {
            c.train.*member = parse_real(k, t, line);
          },
          [member](const RunConfig &c) { return real_text(c.train.*member); }};
}

template <typename M>
Field train_count(M member) {
  return {[member](RunConfig &c, std::string_view k, std::string_view t, int line) {
            c.train.*member = parse_number<std::remove_reference_t<decltype(c.train.*member)>>(
                k, t, line, "an integer");
          },
          [member](const RunConfig &c) { return std::to_string(c.train.*member); }};
}

template <typename E, typename Get>
Field enum_field(const EnumNames<E> &names, Get ref) {
  return {[&names, ref](RunConfig &c, std::string_view k, std::string_view t, int line) {
            ref(c) = names.parse(k, t, line);
          },
          [&names, ref](const RunConfig &c) { return names.name(ref(const_cast<RunConfig &>(c))); }};
}

using Registry = std::vector<std::pair<std::string, Field>>;

const Registry &registry() {
  static const Registry r = [] {
    Registry out;
    out.emplace_back("seed", Field{[](RunConfig &c, std::string_view k, std::string_view t, int line) {
                                     c.train.seed = parse_number<std::uint64_t>(k, t, line, "an unsigned integer");
                                     c.seed_set = true;
                                   },
                                   [](const RunConfig &c) { return std::to_string(c.train.seed); }});
    out.emplace_back("width", index_field(&RunConfig::width));
    out.emplace_back("height", index_field(&RunConfig::height));
    out.emplace_back("bands", index_field(&RunConfig::bands));
    out.emplace_back("endmembers", index_field(&RunConfig::endmembers));
    out.emplace_back("blur-radius", index_field(&RunConfig::blur_radius));
    out.emplace_back("contrast", real_field(&RunConfig::contrast));
    out.emplace_back("min-angle-deg", real_field(&RunConfig::min_angle_deg));
    out.emplace_back("sr", index_field(&RunConfig::sr));
    out.emplace_back("rotate-deg", real_field(&RunConfig::rotate_deg));
    out.emplace_back("crop-frac", real_field(&RunConfig::crop_frac));
    out.emplace_back("interpolation",
                     enum_field(kInterpolations, [](RunConfig &c) -> Interpolation & { return c.interpolation; }));
    out.emplace_back("msi-bands", index_field(&RunConfig::msi_bands));
    out.emplace_back("srf-path", string_field(&RunConfig::srf_path));
    out.emplace_back("lambda-mi", train_real(&train::TrainConfig::lambda_mi));
    out.emplace_back("mu-decay", train_real(&train::TrainConfig::mu_decay));
    out.emplace_back("learning-rate", train_real(&train::TrainConfig::learning_rate));
    out.emplace_back("max-steps", train_count(&train::TrainConfig::max_steps));
    out.emplace_back("patience", train_count(&train::TrainConfig::patience));
    out.emplace_back("min-rel-improvement", train_real(&train::TrainConfig::min_rel_improvement));
    out.emplace_back("l21-epsilon", train_real(&train::TrainConfig::l21_epsilon));
    out.emplace_back("batch-size", train_count(&train::TrainConfig::batch_size));
    out.emplace_back("noise-level", train_real(&train::TrainConfig::noise_level));
    out.emplace_back("stick-mode", enum_field(kStickModes, [](RunConfig &c) -> mdn::StickMode & {
                       return c.train.stick_mode;
                     }));
    out.emplace_back("kumaraswamy-mode",
                     enum_field(kKumaraswamyModes, [](RunConfig &c) -> mdn::KumaraswamyMode & {
                       return c.train.kumaraswamy_mode;
                     }));
    out.emplace_back("optimizer", enum_field(kOptimizers, [](RunConfig &c) -> train::OptimizerKind & {
                       return c.train.optimizer;
                     }));
    out.emplace_back("decay-target", enum_field(kDecayTargets, [](RunConfig &c) -> train::DecayTarget & {
                       return c.train.decay_target;
                     }));
    out.emplace_back("out-dir", string_field(&RunConfig::out_dir));
    out.emplace_back("truth", string_field(&RunConfig::truth));
    out.emplace_back("abundances", string_field(&RunConfig::abundances));
    out.emplace_back("lr-hsi", string_field(&RunConfig::lr_hsi));
    out.emplace_back("hr-msi", string_field(&RunConfig::hr_msi));
    out.emplace_back("fused", string_field(&RunConfig::fused));
    out.emplace_back("checkpoint", string_field(&RunConfig::checkpoint));
    out.emplace_back("trace", string_field(&RunConfig::trace));
    out.emplace_back("diff-images", Field{[](RunConfig &c, std::string_view k, std::string_view t, int line) {
                                            c.diff_images = parse_bool(k, t, line);
                                          },
                                          [](const RunConfig &c) { return std::string(c.diff_images ? "true" : "false"); }});
    out.emplace_back("sweep-crops", Field{[](RunConfig &c, std::string_view k, std::string_view t, int line) {
                                            c.sweep_crops = parse_real_list(k, t, line);
                                          },
                                          [](const RunConfig &c) {
                                            std::string s;
                                            for (double v : c.sweep_crops) s += (s.empty() ? "" : ",") + real_text(v);
                                            return s;
                                          }});
    out.emplace_back("gradcheck-step", real_field(&RunConfig::gradcheck_step));
    return out;
  }();
  return r;
}

const Field &field(std::string_view key, std::string_view value, int line) {
  for (const auto &[k, f] : registry()) {
    if (k == key) return f;
  }
  fail(key, value, "unknown key", line);
}

}  // namespace

bool RunConfig::operator==(const RunConfig &o) const {
  if (seed_set != o.seed_set) return false;
  for (const std::string &k : config_keys()) {
    if (get_value(*this, k) != get_value(o, k)) return false;
  }
  return true;
}

std::filesystem::path RunConfig::output(const std::string &name) const {
  return std::filesystem::path(out_dir) / name;
}

namespace {
std::filesystem::path or_default(const RunConfig &c, const std::string &set, const char *name) {
  return set.empty() ? c.output(name) : std::filesystem::path(set);
}
}  // namespace

std::filesystem::path RunConfig::truth_path() const { return or_default(*this, truth, "truth.hsrc"); }
std::filesystem::path RunConfig::abundances_path() const {
  return or_default(*this, abundances, "abundances.hsrc");
}
std::filesystem::path RunConfig::lr_hsi_path() const { return or_default(*this, lr_hsi, "lr_hsi.hsrc"); }
std::filesystem::path RunConfig::hr_msi_path() const { return or_default(*this, hr_msi, "hr_msi.hsrc"); }
std::filesystem::path RunConfig::srf_file() const { return or_default(*this, srf_path, "srf.hsrf"); }
std::filesystem::path RunConfig::fused_path() const { return or_default(*this, fused, "fused.hsrc"); }
std::filesystem::path RunConfig::checkpoint_path() const {
  return or_default(*this, checkpoint, "model.mdnw");
}
std::filesystem::path RunConfig::trace_path() const { return or_default(*this, trace, "trace.csv"); }

void RunConfig::validate() const {
  auto bad = [](const std::string &msg) { throw ConfigError(msg, 0); };
  if (width < 1 || height < 1) bad("width and height must be >= 1");
  if (bands < 2) bad("bands must be >= 2");
  if (endmembers < 1) bad("endmembers must be >= 1");
  if (blur_radius < 0) bad("blur-radius must be >= 0");
  if (sr < 1) bad("sr must be >= 1");
  if (msi_bands < 1 || msi_bands >= bands) bad("msi-bands must lie in [1, bands)");
  if (!(crop_frac >= 0.0 && crop_frac < 1.0)) bad("crop-frac must lie in [0, 1)");
  if (sweep_crops.size() != 6) bad("sweep-crops needs one fraction per sweep angle (6)");
  for (double f : sweep_crops) {
    if (!(f >= 0.0 && f < 1.0)) bad("sweep crop fractions must lie in [0, 1)");
  }
  if (!(gradcheck_step > 0.0)) bad("gradcheck-step must be > 0");
  try {
    train.validate();
  } catch (const ContractError &e) {
    throw ConfigError(e.what(), 0);
  }
}

const std::vector<std::string> &config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto &[k, f] : registry()) out.push_back(k);
    return out;
  }();
  return keys;
}

void set_value(RunConfig &config, std::string_view key, std::string_view value, int line) {
  field(key, value, line).set(config, key, value, line);
}

std::string get_value(const RunConfig &config, std::string_view key) {
  return field(key, "", 0).get(config);
}

void parse_config(RunConfig &config, std::string_view text) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, eol - pos));
    ++line_no;
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'", line_no);
    }
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing key", line_no);
    set_value(config, key, trim(line.substr(eq + 1)), line_no);
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  parse_config(c, text);
  return c;
}

void load_config_file(RunConfig &config, const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    parse_config(config, ss.str());
  } catch (const ConfigError &e) {
    throw ConfigError(path.string() + ": " + e.what(), e.line());
  }
}

std::string dump_config(const RunConfig &config) {
  std::string out;
  for (const auto &[k, f] : registry()) {
    if (k == "seed" && !config.seed_set) continue;
    out += k + " = " + f.get(config) + "\n";
  }
  return out;
}

void apply_seed_fallback(RunConfig &config) {
  if (config.seed_set) return;
  const char *env = std::getenv("SPECFUSE_SEED");
  if (env == nullptr || *env == '\0') return;
  try {
    set_value(config, "seed", trim(env));
  } catch (const ConfigError &e) {
    throw ConfigError(std::string("SPECFUSE_SEED: ") + e.what(), 0);
  }
}

}  // namespace specfuse::cli

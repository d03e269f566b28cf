// Copyright 2026 The semrel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON experiment configuration. Sections mirror the library structs:
//
//   {
//     "seed": 0,
//     "task":      {height, width, channels, clusters, noise_sigma, rotation_seed, layout},
//     "model":     {embed_dim, normalize, shared_head, translator},
//     "loss":      {lambda_src, lambda_hdce, contrast, tau, detach_weights,
//                   include_self, tau_rel, detach_side, diagnostics},
//     "schedule":  {gamma_min, gamma_max, warmup_steps, shape},
//     "optimizer": {steps, lr, momentum, patches, pair_pool}
//   }
//
// Every key is optional; missing keys keep their defaults and a missing
// schedule.warmup_steps means half of optimizer.steps. Unknown keys are
// rejected.

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "semrel/error.hpp"
#include "semrel/io.hpp"
#include "semrel/train.hpp"

namespace semrel {

using Json = nlohmann::json;

namespace detail {

class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be a JSON object");
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : j_.items()) {
      bool known = false;
      for (auto k : keys) known = known || key == k;
      if (!known) throw ConfigError("unknown key '" + qualified(key) + "'");
    }
  }

  template <class T>
  void get(std::string_view key, T& out) const {
    auto it = j_.find(std::string(key));
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError("key '" + qualified(key) + "' has the wrong type");
    }
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  Section child(std::string_view key) const { return Section(j_.at(std::string(key)), qualified(key)); }

  template <class Enum, std::size_t N>
  void get_enum(std::string_view key, Enum& out, const std::pair<std::string_view, Enum> (&names)[N]) const {
    if (!has(key)) return;
    std::string s;
    get(key, s);
    for (const auto& [name, value] : names)
      if (s == name) {
        out = value;
        return;
      }
    throw ConfigError("key '" + qualified(key) + "' has unknown value '" + s + "'");
  }

 private:
  std::string qualified(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const Json& j_;
  std::string path_;
};

inline constexpr std::pair<std::string_view, Layout> kLayoutNames[] = {{"blocks", Layout::kBlocks},
                                                                       {"voronoi", Layout::kVoronoi}};
inline constexpr std::pair<std::string_view, ContrastKind> kKindNames[] = {{"decoupled", ContrastKind::kDecoupled},
                                                                           {"infonce", ContrastKind::kInfoNce}};
inline constexpr std::pair<std::string_view, DetachSide> kDetachNames[] = {
    {"none", DetachSide::kNone}, {"input", DetachSide::kInput}, {"output", DetachSide::kOutput}};
inline constexpr std::pair<std::string_view, ScheduleShape> kShapeNames[] = {{"linear", ScheduleShape::kLinear},
                                                                             {"cosine", ScheduleShape::kCosine}};

template <class Enum, std::size_t N>
std::string enum_name(Enum v, const std::pair<std::string_view, Enum> (&names)[N]) {
  for (const auto& [name, value] : names)
    if (value == v) return std::string(name);
  return "?";
}

}  // namespace detail

/// Defaults used when a config document omits a key: struct defaults with
/// the curriculum warmup at half the training steps.
inline TrainConfig default_train_config() {
  TrainConfig cfg;
  cfg.loss.schedule.warmup_steps = cfg.optim.steps / 2;
  return cfg;
}

inline TrainConfig parse_train_config(const Json& doc) {
  using detail::Section;
  TrainConfig cfg = default_train_config();
  Section root(doc, "");
  root.allow({"seed", "task", "model", "loss", "schedule", "optimizer"});
  root.get("seed", cfg.seed);

  if (root.has("task")) {
    Section s = root.child("task");
    s.allow({"height", "width", "channels", "clusters", "noise_sigma", "rotation_seed", "layout"});
    auto& t = cfg.task;
    s.get("height", t.height);
    s.get("width", t.width);
    s.get("channels", t.channels);
    s.get("clusters", t.clusters);
    s.get("noise_sigma", t.noise_sigma);
    s.get("rotation_seed", t.rotation_seed);
    s.get_enum("layout", t.layout, detail::kLayoutNames);
  }
  if (root.has("model")) {
    Section s = root.child("model");
    s.allow({"embed_dim", "normalize", "shared_head", "translator"});
    s.get("embed_dim", cfg.model.embed_dim);
    s.get("normalize", cfg.model.normalize);
    s.get("shared_head", cfg.model.shared_head);
    s.get("translator", cfg.model.translator);
  }
  if (root.has("loss")) {
    Section s = root.child("loss");
    s.allow({"lambda_src", "lambda_hdce", "contrast", "tau", "detach_weights", "include_self", "tau_rel",
             "detach_side", "diagnostics"});
    auto& l = cfg.loss;
    s.get("lambda_src", l.lambda_src);
    s.get("lambda_hdce", l.lambda_hdce);
    s.get_enum("contrast", l.kind, detail::kKindNames);
    s.get("tau", l.contrast.tau);
    s.get("detach_weights", l.contrast.detach_weights);
    s.get("include_self", l.relation.include_self);
    s.get("tau_rel", l.relation.tau_rel);
    s.get_enum("detach_side", l.relation.detach, detail::kDetachNames);
    s.get("diagnostics", l.diagnostics);
  }
  if (root.has("optimizer")) {
    Section s = root.child("optimizer");
    s.allow({"steps", "lr", "momentum", "patches", "pair_pool"});
    s.get("steps", cfg.optim.steps);
    s.get("lr", cfg.optim.lr);
    s.get("momentum", cfg.optim.momentum);
    s.get("patches", cfg.optim.patches);
    s.get("pair_pool", cfg.optim.pair_pool);
  }
  cfg.loss.schedule.warmup_steps = cfg.optim.steps / 2;
  if (root.has("schedule")) {
    Section s = root.child("schedule");
    s.allow({"gamma_min", "gamma_max", "warmup_steps", "shape"});
    auto& sc = cfg.loss.schedule;
    s.get("gamma_min", sc.gamma_min);
    s.get("gamma_max", sc.gamma_max);
    s.get("warmup_steps", sc.warmup_steps);
    s.get_enum("shape", sc.shape, detail::kShapeNames);
  }

  try {
    cfg.task.validate();
    cfg.loss.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.model.embed_dim == 0) throw ConfigError("model.embed_dim must be positive");
  if (cfg.optim.steps == 0) throw ConfigError("optimizer.steps must be >= 1");
  if (!(cfg.optim.lr >= 0.0)) throw ConfigError("optimizer.lr must be >= 0");
  if (cfg.optim.patches < 2) throw ConfigError("optimizer.patches must be >= 2");
  return cfg;
}

inline TrainConfig parse_train_config(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(FormatError::Kind::kParse, e.byte, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_train_config(doc);
}

inline TrainConfig read_train_config(const std::string& path) {
  return parse_train_config(std::string_view(detail::read_file(path)));
}

inline Json to_json(const TrainConfig& cfg) {
  using detail::enum_name;
  const auto& t = cfg.task;
  const auto& l = cfg.loss;
  return Json{
      {"seed", cfg.seed},
      {"task",
       {{"height", t.height},
        {"width", t.width},
        {"channels", t.channels},
        {"clusters", t.clusters},
        {"noise_sigma", t.noise_sigma},
        {"rotation_seed", t.rotation_seed},
        {"layout", enum_name(t.layout, detail::kLayoutNames)}}},
      {"model",
       {{"embed_dim", cfg.model.embed_dim},
        {"normalize", cfg.model.normalize},
        {"shared_head", cfg.model.shared_head},
        {"translator", cfg.model.translator}}},
      {"loss",
       {{"lambda_src", l.lambda_src},
        {"lambda_hdce", l.lambda_hdce},
        {"contrast", enum_name(l.kind, detail::kKindNames)},
        {"tau", l.contrast.tau},
        {"detach_weights", l.contrast.detach_weights},
        {"include_self", l.relation.include_self},
        {"tau_rel", l.relation.tau_rel},
        {"detach_side", enum_name(l.relation.detach, detail::kDetachNames)},
        {"diagnostics", l.diagnostics}}},
      {"schedule",
       {{"gamma_min", l.schedule.gamma_min},
        {"gamma_max", l.schedule.gamma_max},
        {"warmup_steps", l.schedule.warmup_steps},
        {"shape", enum_name(l.schedule.shape, detail::kShapeNames)}}},
      {"optimizer",
       {{"steps", cfg.optim.steps},
        {"lr", cfg.optim.lr},
        {"momentum", cfg.optim.momentum},
        {"patches", cfg.optim.patches},
        {"pair_pool", cfg.optim.pair_pool}}},
  };
}

// ---------------------------------------------------------------------------
// Trained model parameters

namespace detail {

inline Json matrix_json(const Matrix& m) { return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  try {
    auto data = j.at("data").get<std::vector<double>>();
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), std::move(data));
  } catch (const std::exception& e) {
    throw FormatError(FormatError::Kind::kParse, 0, "model file: bad matrix '" + what + "': " + e.what());
  }
}

inline Json head_json(const HeadParams& p) {
  return Json{{"w1", matrix_json(p.w1)}, {"b1", p.b1}, {"w2", matrix_json(p.w2)}, {"b2", p.b2}};
}

inline HeadParams head_from_json(const Json& j, const std::string& what) {
  HeadParams p;
  try {
    p.w1 = matrix_from_json(j.at("w1"), what + ".w1");
    p.w2 = matrix_from_json(j.at("w2"), what + ".w2");
    p.b1 = j.at("b1").get<Vector>();
    p.b2 = j.at("b2").get<Vector>();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(FormatError::Kind::kParse, 0, "model file: bad head '" + what + "': " + e.what());
  }
  if (p.w1.cols() != p.b1.size() || p.w2.rows() != p.w1.cols() || p.w2.cols() != p.b2.size())
    throw FormatError(FormatError::Kind::kParse, 0, "model file: inconsistent shapes in '" + what + "'");
  return p;
}

}  // namespace detail

inline Json model_to_json(const TranslationModel& m) {
  Json j{{"format", "semrel-model"},
         {"version", 1},
         {"normalize", m.input_head.normalize},
         {"input_head", detail::head_json(m.input_head.params)},
         {"output_head", nullptr},
         {"translator", nullptr}};
  if (m.output_head) j["output_head"] = detail::head_json(m.output_head->params);
  if (m.translator) j["translator"] = detail::matrix_json(*m.translator);
  return j;
}

inline TranslationModel model_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "semrel-model" || j.value("version", 0) != 1)
    throw FormatError(FormatError::Kind::kParse, 0, "not a semrel-model version 1 document");
  bool normalize = j.value("normalize", true);
  TranslationModel m{{detail::head_from_json(j.at("input_head"), "input_head"), normalize}, std::nullopt, std::nullopt};
  if (j.contains("output_head") && !j["output_head"].is_null())
    m.output_head = ProjectionHead{detail::head_from_json(j["output_head"], "output_head"), normalize};
  if (j.contains("translator") && !j["translator"].is_null())
    m.translator = detail::matrix_from_json(j["translator"], "translator");
  const std::size_t c = m.input_head.params.in_dim();
  if ((m.output_head && m.output_head->params.in_dim() != c) ||
      (m.translator && (m.translator->rows() != c || m.translator->cols() != c)))
    throw FormatError(FormatError::Kind::kParse, 0, "model file: input dimensions disagree");
  return m;
}

inline void write_model(const std::string& path, const TranslationModel& m) {
  detail::write_file(path, model_to_json(m).dump(1) + "\n");
}

inline TranslationModel read_model(const std::string& path) {
  Json j;
  try {
    j = Json::parse(detail::read_file(path));
  } catch (const Json::parse_error& e) {
    throw FormatError(FormatError::Kind::kParse, e.byte, std::string("model file is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace semrel

// Copyright 2026 The proxyfl Authors. All Rights Reserved.
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
// =============================================================================

#include "proxyfl/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include "proxyfl/errors.hpp"

namespace proxyfl {

namespace {

using nlohmann::json;

// Reads keys out of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.is_object()) throw ConfigError("\"" + name_ + "\" must be an object");
    for (auto it = doc.begin(); it != doc.end(); ++it) pending_.insert(it.key());
    doc_ = &doc;
  }

  const json* find(const std::string& key) {
    pending_.erase(key);
    auto it = doc_->find(key);
    return it == doc_->end() ? nullptr : &*it;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ConfigError("\"" + name_ + "." + key + "\" has the wrong type");
      }
    }
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) {
        throw ConfigError("\"" + name_ + "." + key + "\" must be a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  template <typename F>
  void with(const std::string& key, F&& f) {
    if (const json* v = find(key)) f(*v);
  }

  void finish() const {
    if (!pending_.empty()) {
      throw ConfigError("unknown key \"" + name_ + "." + *pending_.begin() + "\"");
    }
  }

  const std::string& name() const { return name_; }

 private:
  const json* doc_ = nullptr;
  std::string name_;
  std::set<std::string> pending_;
};

template <typename F>
auto translate(F&& f) {
  try {
    return f();
  } catch (const ValueError& e) {
    throw ConfigError(e.what());
  }
}

std::vector<std::size_t> count_list(const json& v, const std::string& what) {
  if (!v.is_array()) throw ConfigError("\"" + what + "\" must be an array");
  std::vector<std::size_t> out;
  for (const auto& x : v) {
    if (!x.is_number_unsigned()) throw ConfigError("\"" + what + "\" must hold integers");
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  Section top(doc, "config");

  top.with("task", [&](const json& v) {
    Section s(v, "task");
    auto& t = cfg.task;
    s.with("kind", [&](const json& k) {
      if (!k.is_string()) throw ConfigError("\"task.kind\" must be a string");
      t.kind = translate([&] { return parse_task_kind(k.get<std::string>()); });
    });
    s.count("input_dim", t.input_dim);
    s.count("output_dim", t.output_dim);
    s.count("train", t.train_count);
    s.count("validation", t.validation_count);
    s.count("test", t.test_count);
    s.get("noise_stddev", t.noise_stddev);
    s.get("alpha", t.alpha);
    s.count("input_clusters", t.input_clusters);
    s.count("teacher_hidden", t.teacher_hidden);
    s.get("domain_shift", t.domain_shift);
    s.get("cluster_separation", t.cluster_separation);
    s.finish();
  });

  top.with("scenario", [&](const json& v) {
    Section s(v, "scenario");
    auto& sc = cfg.scenario;
    bool participants_set = false;
    s.with("mode", [&](const json& m) {
      const auto mode = m.is_string() ? m.get<std::string>() : std::string();
      if (mode == "cross-silo") {
        sc.mode = ScenarioMode::kCrossSilo;
      } else if (mode == "cross-device") {
        sc.mode = ScenarioMode::kCrossDevice;
      } else {
        throw ConfigError("\"scenario.mode\" must be \"cross-silo\" or \"cross-device\"");
      }
    });
    s.count("clients", sc.clients);
    s.with("participants", [&](const json& p) {
      if (!p.is_number_unsigned()) throw ConfigError("\"scenario.participants\" must be an integer");
      sc.participants = p.get<std::size_t>();
      participants_set = true;
    });
    if (!participants_set) sc.participants = sc.clients;
    s.finish();
  });

  top.with("round", [&](const json& v) {
    Section s(v, "round");
    auto& r = cfg.round;
    s.count("rounds", r.rounds);
    s.count("local_epochs", r.local_epochs);
    s.count("batch_size", r.batch_size);
    s.get("learning_rate", r.learning_rate);
    s.with("loss", [&](const json& k) {
      if (!k.is_string()) throw ConfigError("\"round.loss\" must be a string");
      r.loss = translate([&] { return parse_loss_kind(k.get<std::string>()); });
    });
    s.with("weighting", [&](const json& k) {
      const auto w = k.is_string() ? k.get<std::string>() : std::string();
      if (w == "participants") {
        r.weighting = Weighting::kParticipants;
      } else if (w == "population") {
        r.weighting = Weighting::kPopulation;
      } else {
        throw ConfigError("\"round.weighting\" must be \"participants\" or \"population\"");
      }
    });
    s.count("threads", r.threads);
    s.with("alignment_rounds", [&](const json& a) {
      const auto list = count_list(a, "round.alignment_rounds");
      r.alignment_rounds = std::set<std::size_t>(list.begin(), list.end());
    });
    s.finish();
  });

  top.with("quantizer", [&](const json& v) {
    Section s(v, "quantizer");
    auto& q = cfg.quantizer;
    s.with("bits", [&](const json& b) {
      if (b.is_string() && b.get<std::string>() == "off") {
        q.bits.reset();
      } else if (b.is_number_unsigned()) {
        q.bits = b.get<int>();
      } else {
        throw ConfigError("\"quantizer.bits\" must be an integer or \"off\"");
      }
    });
    s.count("block_size", q.block_size);
    s.finish();
  });

  top.with("model", [&](const json& v) {
    Section s(v, "model");
    auto& m = cfg.model;
    s.with("hidden", [&](const json& h) { m.hidden = count_list(h, "model.hidden"); });
    s.with("activation", [&](const json& a) {
      if (!a.is_string()) throw ConfigError("\"model.activation\" must be a string");
      m.activation = translate([&] { return parse_activation(a.get<std::string>()); });
    });
    s.count("rank", m.rank);
    s.get("init_stddev", m.init_stddev);
    s.with("adapted_layers",
           [&](const json& a) { m.adapted_layers = count_list(a, "model.adapted_layers"); });
    s.with("pretrain", [&](const json& p) {
      Section ps(p, "model.pretrain");
      ps.count("epochs", m.pretrain.epochs);
      ps.count("batch_size", m.pretrain.batch_size);
      ps.get("learning_rate", m.pretrain.learning_rate);
      ps.finish();
    });
    s.finish();
  });

  top.with("seeds", [&](const json& v) {
    if (!v.is_array() || v.empty()) throw ConfigError("\"seeds\" must be a nonempty array");
    cfg.seeds.clear();
    for (const auto& x : v) {
      if (!x.is_number_unsigned()) throw ConfigError("\"seeds\" must hold unsigned integers");
      cfg.seeds.push_back(x.get<std::uint64_t>());
    }
  });
  top.finish();

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& cfg) {
  const auto& t = cfg.task;
  const auto& r = cfg.round;
  const auto& m = cfg.model;
  json quantizer_bits = cfg.quantizer.bits ? json(*cfg.quantizer.bits) : json("off");
  return {
      {"task",
       {{"kind", to_string(t.kind)},
        {"input_dim", t.input_dim},
        {"output_dim", t.output_dim},
        {"train", t.train_count},
        {"validation", t.validation_count},
        {"test", t.test_count},
        {"noise_stddev", t.noise_stddev},
        {"alpha", t.alpha},
        {"input_clusters", t.input_clusters},
        {"teacher_hidden", t.teacher_hidden},
        {"domain_shift", t.domain_shift},
        {"cluster_separation", t.cluster_separation}}},
      {"scenario",
       {{"mode", cfg.scenario.mode == ScenarioMode::kCrossSilo ? "cross-silo" : "cross-device"},
        {"clients", cfg.scenario.clients},
        {"participants", cfg.scenario.participants}}},
      {"round",
       {{"rounds", r.rounds},
        {"local_epochs", r.local_epochs},
        {"batch_size", r.batch_size},
        {"learning_rate", r.learning_rate},
        {"loss", to_string(r.loss)},
        {"weighting", r.weighting == Weighting::kParticipants ? "participants" : "population"},
        {"threads", r.threads},
        {"alignment_rounds", r.alignment_rounds}}},
      {"quantizer", {{"bits", quantizer_bits}, {"block_size", cfg.quantizer.block_size}}},
      {"model",
       {{"hidden", m.hidden},
        {"activation", to_string(m.activation)},
        {"rank", m.rank},
        {"init_stddev", m.init_stddev},
        {"adapted_layers", m.adapted_layers},
        {"pretrain",
         {{"epochs", m.pretrain.epochs},
          {"batch_size", m.pretrain.batch_size},
          {"learning_rate", m.pretrain.learning_rate}}}}},
      {"seeds", cfg.seeds},
  };
}

}  // namespace proxyfl

#include "clamshell/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <type_traits>

namespace clamshell {

std::string to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::AL: return "AL";
    case Algorithm::PL: return "PL";
    case Algorithm::HL: return "HL";
    case Algorithm::NL: return "NL";
  }
  return "NL";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "AL") return Algorithm::AL;
  if (name == "PL") return Algorithm::PL;
  if (name == "HL") return Algorithm::HL;
  if (name == "NL") return Algorithm::NL;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected AL, PL, HL or NL)");
}

MaintenancePolicy RunConfig::maintenance_policy() const {
  MaintenancePolicy p;
  p.threshold = PM_l;
  p.alpha = alpha;
  p.significance_level = significance_level;
  p.min_observations = min_observations;
  p.termest = termest;
  p.reserve_fraction = reserve_fraction;
  return p;
}

namespace {

Json threshold_json(double v) { return std::isinf(v) ? Json("inf") : Json(v); }

Json population_json(const PopulationSpec& p) {
  Json comps = Json::array();
  for (const auto& c : p.components)
    comps.push_back(Json{{"weight", c.weight}, {"mean", c.mean}, {"sd", c.sd}});
  return Json{{"family", to_string(p.family)},
              {"count", p.count},
              {"log_mean", p.log_mean},
              {"log_sd", p.log_sd},
              {"components", comps},
              {"trace_path", p.trace_path},
              {"sigma_ratio", p.sigma_ratio},
              {"accuracy_min", p.accuracy_min},
              {"accuracy_max", p.accuracy_max}};
}

// Reads members of one JSON object, tracking the path and unknown keys.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const Json* v = get(key)) {
      if constexpr (std::is_unsigned_v<T>)
        if (v->is_number_integer() && v->get<std::int64_t>() < 0)
          throw ConfigError(at(key), "must be non-negative");
      try {
        out = v->get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(at(key), "wrong type");
      }
    }
  }

  void read_bool(const std::string& key, bool& out) {
    if (const Json* v = get(key)) {
      if (v->is_boolean()) out = v->get<bool>();
      else if (v->is_string() && (*v == "on" || *v == "true")) out = true;
      else if (v->is_string() && (*v == "off" || *v == "false")) out = false;
      else throw ConfigError(at(key), "expected a boolean or on/off");
    }
  }

  void read_threshold(const std::string& key, double& out) {
    if (const Json* v = get(key)) {
      if (v->is_number()) out = v->get<double>();
      else if (v->is_string() && (*v == "inf" || *v == "infinity" || *v == "∞"))
        out = std::numeric_limits<double>::infinity();
      else throw ConfigError(at(key), "expected seconds or \"inf\"");
    }
  }

  template <typename F>
  void read_enum(const std::string& key, F&& parse) {
    if (const Json* v = get(key)) {
      if (!v->is_string()) throw ConfigError(at(key), "expected a string");
      try {
        parse(v->get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(at(key), e.what());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

}  // namespace

Json to_json(const RunConfig& c) {
  Json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["N_p"] = c.N_p;
  j["N_g"] = c.N_g;
  j["R"] = c.R;
  j["PM_l"] = threshold_json(c.PM_l);
  j["SM"] = c.SM;
  j["Alg"] = to_string(c.Alg);
  j["votes_required"] = c.votes_required;
  j["routing"] = to_string(c.routing);
  j["context_switch_s"] = c.context_switch_s;
  j["latency_floor_s"] = c.latency_floor_s;
  j["retainer"] = c.retainer;
  j["recruitment_lead_s"] = c.recruitment_lead_s;
  j["task_budget"] = c.task_budget;
  j["accuracy_target"] = c.accuracy_target ? Json(*c.accuracy_target) : Json(nullptr);
  j["stop_at_target"] = c.stop_at_target;
  j["beta"] = c.beta;
  j["population"] = population_json(c.population);
  j["maintenance"] = Json{{"alpha", c.alpha},
                          {"significance_level", c.significance_level},
                          {"min_observations", c.min_observations},
                          {"termest", c.termest},
                          {"reserve_fraction", c.reserve_fraction},
                          {"interval_s", c.maintenance_interval_s}};
  j["learning"] = Json{{"r", c.r},
                       {"active_weighting", c.active_weighting},
                       {"async_retrain", c.async_retrain},
                       {"decision_latency_base_s", c.retrain.base_s},
                       {"decision_latency_per_label_s", c.retrain.per_label_s},
                       {"candidate_sample_size", c.candidate_sample_size},
                       {"l2", c.train.l2},
                       {"learning_rate", c.train.learning_rate},
                       {"epochs", c.train.epochs},
                       {"holdout_fraction", c.holdout_fraction}};
  j["dataset"] = Json{{"path", c.dataset_path},
                      {"n_points", c.dataset.n_points},
                      {"n_features", c.dataset.n_features},
                      {"n_informative", c.dataset.n_informative},
                      {"class_sep", c.dataset.class_sep},
                      {"n_classes", c.dataset.n_classes},
                      {"seed", c.dataset_seed ? Json(*c.dataset_seed) : Json(nullptr)}};
  j["rates"] = Json{{"wait_per_minute", c.rates.wait_per_minute},
                    {"per_record", c.rates.per_record},
                    {"recruit_fee", c.rates.recruit_fee},
                    {"terminated_pay", to_string(c.rates.terminated_pay)}};
  return j;
}

RunConfig config_from_json(const Json& j) {
  RunConfig c;
  Reader top(j, "");
  top.read("name", c.name);
  top.read("seed", c.seed);
  top.read("N_p", c.N_p);
  top.read("N_g", c.N_g);
  top.read("R", c.R);
  top.read_threshold("PM_l", c.PM_l);
  top.read_bool("SM", c.SM);
  top.read_enum("Alg", [&](const std::string& s) { c.Alg = algorithm_from_string(s); });
  top.read("votes_required", c.votes_required);
  top.read_enum("routing", [&](const std::string& s) { c.routing = routing_policy_from_string(s); });
  top.read("context_switch_s", c.context_switch_s);
  top.read("latency_floor_s", c.latency_floor_s);
  top.read_bool("retainer", c.retainer);
  top.read("recruitment_lead_s", c.recruitment_lead_s);
  top.read("task_budget", c.task_budget);
  if (const Json* v = top.get("accuracy_target"); v && !v->is_null()) {
    if (!v->is_number()) throw ConfigError("accuracy_target", "expected a number or null");
    c.accuracy_target = v->get<double>();
  }
  top.read_bool("stop_at_target", c.stop_at_target);
  top.read("beta", c.beta);

  if (const Json* v = top.get("population")) {
    Reader p(*v, "population");
    p.read_enum("family", [&](const std::string& s) { c.population.family = population_family_from_string(s); });
    p.read("count", c.population.count);
    p.read("log_mean", c.population.log_mean);
    p.read("log_sd", c.population.log_sd);
    if (const Json* comps = p.get("components")) {
      if (!comps->is_array()) throw ConfigError("population.components", "expected an array");
      c.population.components.clear();
      for (std::size_t i = 0; i < comps->size(); ++i) {
        MixtureComponent m;
        Reader cr((*comps)[i], "population.components[" + std::to_string(i) + "]");
        cr.read("weight", m.weight);
        cr.read("mean", m.mean);
        cr.read("sd", m.sd);
        cr.finish();
        c.population.components.push_back(m);
      }
    }
    p.read("trace_path", c.population.trace_path);
    p.read("sigma_ratio", c.population.sigma_ratio);
    p.read("accuracy_min", c.population.accuracy_min);
    p.read("accuracy_max", c.population.accuracy_max);
    p.finish();
  }
  if (const Json* v = top.get("maintenance")) {
    Reader m(*v, "maintenance");
    m.read("alpha", c.alpha);
    m.read("significance_level", c.significance_level);
    m.read("min_observations", c.min_observations);
    m.read_bool("termest", c.termest);
    m.read("reserve_fraction", c.reserve_fraction);
    m.read("interval_s", c.maintenance_interval_s);
    m.finish();
  }
  if (const Json* v = top.get("learning")) {
    Reader l(*v, "learning");
    l.read("r", c.r);
    l.read_bool("active_weighting", c.active_weighting);
    l.read_bool("async_retrain", c.async_retrain);
    l.read("decision_latency_base_s", c.retrain.base_s);
    l.read("decision_latency_per_label_s", c.retrain.per_label_s);
    l.read("candidate_sample_size", c.candidate_sample_size);
    l.read("l2", c.train.l2);
    l.read("learning_rate", c.train.learning_rate);
    l.read("epochs", c.train.epochs);
    l.read("holdout_fraction", c.holdout_fraction);
    l.finish();
  }
  if (const Json* v = top.get("dataset")) {
    Reader d(*v, "dataset");
    d.read("path", c.dataset_path);
    d.read("n_points", c.dataset.n_points);
    d.read("n_features", c.dataset.n_features);
    d.read("n_informative", c.dataset.n_informative);
    d.read("class_sep", c.dataset.class_sep);
    d.read("n_classes", c.dataset.n_classes);
    if (const Json* s = d.get("seed"); s && !s->is_null()) {
      if (!s->is_number_unsigned()) throw ConfigError("dataset.seed", "expected an unsigned integer or null");
      c.dataset_seed = s->get<std::uint64_t>();
    }
    d.finish();
  }
  if (const Json* v = top.get("rates")) {
    Reader r(*v, "rates");
    r.read("wait_per_minute", c.rates.wait_per_minute);
    r.read("per_record", c.rates.per_record);
    r.read("recruit_fee", c.rates.recruit_fee);
    r.read_enum("terminated_pay", [&](const std::string& s) { c.rates.terminated_pay = terminated_pay_from_string(s); });
    r.finish();
  }
  top.finish();
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  require(c.N_p >= 1, "N_p", "must be >= 1");
  require(c.N_g >= 1, "N_g", "must be >= 1");
  require(c.R > 0 && std::isfinite(c.R), "R", "must be a positive number");
  require(c.PM_l > 0, "PM_l", "must be positive or inf");
  require(c.votes_required >= 1, "votes_required", "must be >= 1");
  require(c.votes_required <= c.N_p, "votes_required", "cannot exceed N_p");
  require(c.context_switch_s >= 0, "context_switch_s", "must be >= 0");
  require(c.latency_floor_s >= 0, "latency_floor_s", "must be >= 0");
  require(c.recruitment_lead_s >= 0, "recruitment_lead_s", "must be >= 0");
  require(c.beta >= 0 && c.beta <= 1, "beta", "must lie in [0,1]");
  if (c.accuracy_target)
    require(*c.accuracy_target >= 0 && *c.accuracy_target <= 1, "accuracy_target", "must lie in [0,1]");

  const auto& p = c.population;
  require(p.count >= 1, "population.count", "must be >= 1");
  require(p.sigma_ratio >= 0, "population.sigma_ratio", "must be >= 0");
  require(p.log_sd >= 0, "population.log_sd", "must be >= 0");
  require(p.accuracy_min >= 0 && p.accuracy_max <= 1 && p.accuracy_min <= p.accuracy_max,
          "population.accuracy_min", "need 0 <= accuracy_min <= accuracy_max <= 1");
  if (p.family == PopulationFamily::normal_mixture) {
    require(!p.components.empty(), "population.components", "mixture needs components");
    for (std::size_t i = 0; i < p.components.size(); ++i) {
      const auto at = "population.components[" + std::to_string(i) + "]";
      require(p.components[i].weight > 0, at + ".weight", "must be > 0");
      require(p.components[i].mean > 0, at + ".mean", "must be > 0");
      require(p.components[i].sd >= 0, at + ".sd", "must be >= 0");
    }
  }
  if (p.family == PopulationFamily::empirical_resample)
    require(!p.trace_path.empty(), "population.trace_path", "required for empirical-resample");

  require(c.alpha >= 0, "maintenance.alpha", "must be >= 0");
  require(c.significance_level > 0 && c.significance_level < 1, "maintenance.significance_level",
          "must lie in (0,1)");
  require(c.reserve_fraction >= 0, "maintenance.reserve_fraction", "must be >= 0");
  require(c.maintenance_interval_s > 0, "maintenance.interval_s", "must be > 0");

  require(c.r >= 0 && c.r <= 1, "learning.r", "must lie in [0,1]");
  require(c.retrain.base_s >= 0, "learning.decision_latency_base_s", "must be >= 0");
  require(c.retrain.per_label_s >= 0, "learning.decision_latency_per_label_s", "must be >= 0");
  require(c.candidate_sample_size >= 1, "learning.candidate_sample_size", "must be >= 1");
  require(c.train.l2 >= 0, "learning.l2", "must be >= 0");
  require(c.train.learning_rate > 0, "learning.learning_rate", "must be > 0");
  require(c.train.epochs >= 1, "learning.epochs", "must be >= 1");
  require(c.holdout_fraction > 0 && c.holdout_fraction < 1, "learning.holdout_fraction",
          "must lie in (0,1)");

  if (c.dataset_path.empty()) {
    require(c.dataset.n_points >= 2, "dataset.n_points", "must be >= 2");
    require(c.dataset.n_informative >= 1 && c.dataset.n_informative <= c.dataset.n_features,
            "dataset.n_informative", "need 1 <= n_informative <= n_features");
    require(c.dataset.n_classes >= 2, "dataset.n_classes", "must be >= 2");
    require(c.dataset.class_sep > 0, "dataset.class_sep", "must be > 0");
  }

  require(c.rates.wait_per_minute >= 0, "rates.wait_per_minute", "must be >= 0");
  require(c.rates.per_record >= 0, "rates.per_record", "must be >= 0");
  require(c.rates.recruit_fee >= 0, "rates.recruit_fee", "must be >= 0");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

RunConfig with_override(const RunConfig& config, const std::string& key, const Json& value) {
  Json j = to_json(config);
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      if (!node->is_object() || !node->contains(part)) throw ConfigError(key, "unknown key");
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) throw ConfigError(key, "unknown key");
    node = &(*node)[part];
    start = dot + 1;
  }
  return config_from_json(j);
}

Json parse_override_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return Json(text);
  }
}

RunConfig apply_preset(RunConfig c, const std::string& preset) {
  if (preset == "base-nr") {
    c.retainer = false;
    c.Alg = Algorithm::PL;
    c.SM = false;
    c.PM_l = std::numeric_limits<double>::infinity();
    c.async_retrain = false;
  } else if (preset == "base-r") {
    c.retainer = true;
    c.Alg = Algorithm::AL;
    c.SM = false;
    c.PM_l = std::numeric_limits<double>::infinity();
    c.async_retrain = false;
  } else if (preset == "clamshell") {
    c.retainer = true;
    c.Alg = Algorithm::HL;
    c.SM = true;
    if (std::isinf(c.PM_l)) c.PM_l = 60.0;
    c.async_retrain = true;
  } else {
    throw ConfigError("preset", "unknown preset '" + preset + "' (expected base-nr, base-r or clamshell)");
  }
  c.name = preset;
  validate(c);
  return c;
}

}  // namespace clamshell

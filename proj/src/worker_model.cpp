#include "clamshell/worker_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace clamshell {
namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& value) {
  if (text.empty()) return false;
  try {
    std::size_t used = 0;
    value = std::stod(text, &used);
    return used == text.size() && std::isfinite(value);
  } catch (const std::exception&) {
    return false;
  }
}

std::string worker_name(std::size_t index) {
  std::ostringstream ss;
  ss << 'w' << std::setw(5) << std::setfill('0') << index;
  return ss.str();
}

double draw_lambda(const PopulationSpec& spec, Rng& rng) {
  if (spec.accuracy_max <= spec.accuracy_min) return spec.accuracy_min;
  return spec.accuracy_min + (spec.accuracy_max - spec.accuracy_min) * uniform01(rng);
}

void check_spec(const PopulationSpec& spec, std::size_t count) {
  if (count == 0) throw std::invalid_argument("population count must be >= 1");
  if (!(spec.sigma_ratio >= 0.0)) throw std::invalid_argument("sigma_ratio must be >= 0");
  if (spec.accuracy_min < 0.0 || spec.accuracy_max > 1.0 || spec.accuracy_min > spec.accuracy_max)
    throw std::invalid_argument("accuracy range must satisfy 0 <= min <= max <= 1");
  switch (spec.family) {
    case PopulationFamily::lognormal:
      if (!(spec.log_sd > 0.0)) throw std::invalid_argument("lognormal log_sd must be > 0");
      if (!std::isfinite(spec.log_mean)) throw std::invalid_argument("lognormal log_mean must be finite");
      break;
    case PopulationFamily::normal_mixture: {
      if (spec.components.empty()) throw std::invalid_argument("mixture needs at least one component");
      double total = 0.0;
      for (const auto& c : spec.components) {
        if (!(c.weight > 0.0)) throw std::invalid_argument("mixture weights must be > 0");
        if (!(c.mean > 0.0)) throw std::invalid_argument("mixture means must be > 0");
        if (!(c.sd >= 0.0)) throw std::invalid_argument("mixture sd must be >= 0");
        total += c.weight;
      }
      if (!(total > 0.0)) throw std::invalid_argument("mixture weights must sum to > 0");
      break;
    }
    case PopulationFamily::empirical_resample:
      break;
  }
}

}  // namespace

void validate(const WorkerProfile& p) {
  if (!(p.mu > 0.0) || !std::isfinite(p.mu))
    throw std::invalid_argument("worker " + p.worker_id + ": mu must be > 0");
  if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma))
    throw std::invalid_argument("worker " + p.worker_id + ": sigma must be >= 0");
  if (!(p.lambda >= 0.0 && p.lambda <= 1.0))
    throw std::invalid_argument("worker " + p.worker_id + ": lambda must lie in [0,1]");
}

WorkerPopulation::WorkerPopulation(std::vector<WorkerProfile> profiles, std::uint64_t seed)
    : profiles_(std::move(profiles)), seed_(seed) {
  if (profiles_.empty()) throw std::invalid_argument("worker population must be non-empty");
  for (const auto& p : profiles_) validate(p);
}

double WorkerPopulation::mean_mu() const noexcept {
  double sum = 0.0;
  for (const auto& p : profiles_) sum += p.mu;
  return sum / static_cast<double>(profiles_.size());
}

const WorkerProfile& WorkerPopulation::draw(Rng& rng) const {
  const auto n = static_cast<std::uint64_t>(profiles_.size());
  return profiles_[static_cast<std::size_t>(rng() % n)];
}

WorkerPopulation load_traces(std::istream& in, std::uint64_t seed) {
  std::string line;
  std::size_t row = 0;
  bool has_correct = false;
  bool seen_header = false;
  while (!seen_header && std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto header = split_fields(trim(line));
    if (header.size() < 2 || header[0] != "worker_id" || header[1] != "latency_s" ||
        header.size() > 3 || (header.size() == 3 && header[2] != "correct"))
      throw TraceError(row, "expected header worker_id,latency_s[,correct]");
    has_correct = header.size() == 3;
    seen_header = true;
  }
  if (!seen_header) throw TraceError(row, "empty trace source");

  struct Acc {
    std::vector<double> latencies;
    std::size_t correct = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> by_worker;
  while (std::getline(in, line)) {
    ++row;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split_fields(text);
    if (fields.size() != (has_correct ? 3u : 2u)) throw TraceError(row, "wrong number of fields");
    if (fields[0].empty()) throw TraceError(row, "missing worker_id");
    double latency = 0.0;
    if (!parse_double(fields[1], latency)) throw TraceError(row, "malformed latency_s");
    if (latency <= 0.0) throw TraceError(row, "latency_s must be > 0");
    bool correct = true;
    if (has_correct) {
      const auto& c = fields[2];
      if (c == "1" || c == "true") correct = true;
      else if (c == "0" || c == "false") correct = false;
      else throw TraceError(row, "malformed correct flag");
    }
    auto [it, inserted] = by_worker.try_emplace(fields[0]);
    if (inserted) order.push_back(fields[0]);
    it->second.latencies.push_back(latency);
    it->second.correct += correct ? 1 : 0;
  }
  if (order.empty()) throw TraceError(row, "trace source has no records");

  std::vector<WorkerProfile> profiles;
  profiles.reserve(order.size());
  for (const auto& id : order) {
    const auto& acc = by_worker.at(id);
    const auto n = static_cast<double>(acc.latencies.size());
    const double mean = std::accumulate(acc.latencies.begin(), acc.latencies.end(), 0.0) / n;
    double ss = 0.0;
    for (double l : acc.latencies) ss += (l - mean) * (l - mean);
    const double sd = acc.latencies.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double lambda = has_correct ? static_cast<double>(acc.correct) / n : 1.0;
    profiles.push_back({id, mean, sd, lambda});
  }
  return WorkerPopulation(std::move(profiles), seed);
}

WorkerPopulation load_traces(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path.string());
  return load_traces(in, seed);
}

WorkerPopulation synthesize_population(const PopulationSpec& spec, std::size_t count,
                                       std::uint64_t seed) {
  if (spec.family == PopulationFamily::empirical_resample) {
    check_spec(spec, count);
    if (spec.trace_path.empty())
      throw std::invalid_argument("empirical_resample needs a trace_path");
    return synthesize_population(spec, count, seed, load_traces(spec.trace_path).profiles());
  }
  return synthesize_population(spec, count, seed, {});
}

WorkerPopulation synthesize_population(const PopulationSpec& spec, std::size_t count,
                                       std::uint64_t seed,
                                       const std::vector<WorkerProfile>& empirical_base) {
  check_spec(spec, count);
  Rng rng = make_stream(seed, stable_hash("population"));
  std::vector<WorkerProfile> profiles;
  profiles.reserve(count);

  double total_weight = 0.0;
  for (const auto& c : spec.components) total_weight += c.weight;

  for (std::size_t i = 0; i < count; ++i) {
    WorkerProfile p;
    p.worker_id = worker_name(i);
    switch (spec.family) {
      case PopulationFamily::lognormal:
        p.mu = std::exp(spec.log_mean + spec.log_sd * standard_normal(rng));
        p.sigma = spec.sigma_ratio * p.mu;
        p.lambda = draw_lambda(spec, rng);
        break;
      case PopulationFamily::normal_mixture: {
        double pick = uniform01(rng) * total_weight;
        const MixtureComponent* comp = &spec.components.back();
        for (const auto& c : spec.components) {
          if (pick < c.weight) {
            comp = &c;
            break;
          }
          pick -= c.weight;
        }
        p.mu = std::max(kMinLatencyFloor, comp->mean + comp->sd * standard_normal(rng));
        p.sigma = spec.sigma_ratio * p.mu;
        p.lambda = draw_lambda(spec, rng);
        break;
      }
      case PopulationFamily::empirical_resample: {
        if (empirical_base.empty())
          throw std::invalid_argument("empirical_resample needs a non-empty base population");
        const auto& src = empirical_base[static_cast<std::size_t>(rng() % empirical_base.size())];
        p.mu = src.mu;
        p.sigma = src.sigma;
        p.lambda = src.lambda;
        p.worker_id = worker_name(i) + ":" + src.worker_id;
        break;
      }
    }
    profiles.push_back(std::move(p));
  }
  return WorkerPopulation(std::move(profiles), seed);
}

AssignmentSample sample_assignment(const WorkerProfile& profile, Rng& rng, double floor_s) {
  const double floor = std::max(kMinLatencyFloor, floor_s);
  const double z = standard_normal(rng);
  AssignmentSample s;
  s.latency = profile.sigma == 0.0 ? profile.mu : profile.mu + profile.sigma * z;
  if (s.latency < floor) s.latency = floor;
  s.label_correct = uniform01(rng) < profile.lambda;
  return s;
}

PopulationSplit split_population(const WorkerPopulation& population, double threshold) {
  PopulationSplit split;
  split.threshold = threshold;
  double fast_sum = 0.0, slow_sum = 0.0;
  std::size_t fast = 0, slow = 0;
  for (const auto& p : population.profiles()) {
    if (p.mu > threshold) {
      slow_sum += p.mu;
      ++slow;
    } else {
      fast_sum += p.mu;
      ++fast;
    }
  }
  split.q = static_cast<double>(slow) / static_cast<double>(population.size());
  if (fast > 0) split.mu_f = fast_sum / static_cast<double>(fast);
  if (slow > 0) split.mu_s = slow_sum / static_cast<double>(slow);
  return split;
}

std::string to_string(PopulationFamily family) {
  switch (family) {
    case PopulationFamily::lognormal: return "lognormal";
    case PopulationFamily::normal_mixture: return "bimodal-normal-mixture";
    case PopulationFamily::empirical_resample: return "empirical-resample";
  }
  return "unknown";
}

PopulationFamily population_family_from_string(const std::string& name) {
  if (name == "lognormal") return PopulationFamily::lognormal;
  if (name == "bimodal-normal-mixture" || name == "normal-mixture" || name == "mixture")
    return PopulationFamily::normal_mixture;
  if (name == "empirical-resample") return PopulationFamily::empirical_resample;
  throw std::invalid_argument("unknown population family '" + name + "'");
}

}  // namespace clamshell

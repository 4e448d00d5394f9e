#include "bfl/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace bfl {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string ConfigError::render(const std::string& source) const {
  return source + ":" + std::to_string(line_) + ": " + what();
}

SimTime Scenario::effective_read_deadline() const {
  if (read_deadline) return *read_deadline;
  SimTime worst = network.max_delay;
  const std::size_t model_bytes = 64 + 8 * static_cast<std::size_t>(params.dimension);
  return 10 * (worst + network.transmission(model_bytes));
}

namespace {

std::size_t line_of(const std::string& text, std::size_t pos) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

/// Walks a config object while remembering where its keys are in the source
/// text, so errors point at a line. Keys are located by searching for the
/// quoted key after the parent's position.
class Node {
 public:
  Node(const std::string* text, const json* value, std::size_t pos, std::string path)
      : text_(text), value_(value), pos_(pos), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(line_of(*text_, pos_), path_.empty() ? msg : path_ + ": " + msg);
  }

  const json& value() const { return *value_; }
  bool has(const std::string& key) const { return value_->is_object() && value_->contains(key); }

  Node child(const std::string& key) const {
    if (!value_->is_object()) fail("expected an object");
    auto it = value_->find(key);
    if (it == value_->end()) fail("missing key \"" + key + "\"");
    const std::string quoted = "\"" + key + "\"";
    std::size_t at = text_->find(quoted, pos_);
    while (at != std::string::npos) {
      std::size_t after = at + quoted.size();
      while (after < text_->size() && std::isspace(static_cast<unsigned char>((*text_)[after]))) ++after;
      if (after < text_->size() && (*text_)[after] == ':') break;
      at = text_->find(quoted, at + 1);
    }
    return Node(text_, &*it, at == std::string::npos ? pos_ : at, path_.empty() ? key : path_ + "." + key);
  }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    if (!value_->is_object()) fail("expected an object");
    for (const auto& [k, v] : value_->items()) {
      bool known = false;
      for (auto allowed : keys) known |= k == allowed;
      if (!known) child(k).fail("unknown key");
    }
  }

  double number() const {
    if (!value_->is_number()) fail("expected a number");
    const double v = value_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  std::uint64_t uint(std::uint64_t max = UINT64_MAX) const {
    if (!value_->is_number_integer() || (value_->is_number_integer() && value_->get<std::int64_t>() < 0 &&
                                         !value_->is_number_unsigned())) {
      fail("expected a non-negative integer");
    }
    const auto v = value_->get<std::uint64_t>();
    if (v > max) fail("value too large");
    return v;
  }

  std::uint32_t u32() const { return static_cast<std::uint32_t>(uint(UINT32_MAX)); }

  std::string str() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }

  bool boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }

  SimTime millis() const {
    const double ms = number();
    if (ms < 0) fail("expected a non-negative duration");
    return static_cast<SimTime>(std::llround(ms * static_cast<double>(kMillisecond)));
  }

  std::size_t pos() const { return pos_; }

  Node element(std::size_t i) const {
    return Node(text_, &(*value_)[i], pos_, path_ + "[" + std::to_string(i) + "]");
  }

 private:
  const std::string* text_;
  const json* value_;
  std::size_t pos_;
  std::string path_;
};

DelayDist parse_delay(const Node& n) {
  n.allow_only({"fixed_ms", "uniform_ms"});
  if (n.has("fixed_ms") == n.has("uniform_ms")) n.fail("give exactly one of fixed_ms, uniform_ms");
  if (n.has("fixed_ms")) return DelayDist::fixed(n.child("fixed_ms").millis());
  const auto u = n.child("uniform_ms");
  if (!u.value().is_array() || u.value().size() != 2) u.fail("expected [lo, hi]");
  auto ms = [&](const json& v) {
    if (!v.is_number() || v.get<double>() < 0) u.fail("expected non-negative numbers");
    return static_cast<SimTime>(std::llround(v.get<double>() * static_cast<double>(kMillisecond)));
  };
  return DelayDist::uniform(ms(u.value()[0]), ms(u.value()[1]));
}

ProcessId parse_pid(const Node& n, const std::string& text, ProcessKind expected) {
  ProcessId id;
  try {
    id = parse_process_id(text);
  } catch (const std::invalid_argument&) {
    n.fail("bad process id \"" + text + "\"");
  }
  if (id.kind != expected) n.fail("\"" + text + "\" is not a " + std::string(kind_name(expected)));
  return id;
}

ProcessKind parse_process_id_kind(const Node& n) {
  try {
    return parse_process_id(n.str()).kind;
  } catch (const std::invalid_argument&) {
    n.fail("bad process id \"" + n.str() + "\"");
  }
}

template <typename E>
E parse_enum(const Node& n, const std::map<std::string, E>& names) {
  const auto s = n.str();
  auto it = names.find(s);
  if (it == names.end()) {
    std::string options;
    for (const auto& [k, v] : names) options += (options.empty() ? "" : ", ") + k;
    n.fail("unknown value \"" + s + "\" (expected one of: " + options + ")");
  }
  return it->second;
}

const std::map<std::string, ServerBehavior> kServerBehaviors = {
    {"correct", ServerBehavior::Correct},
    {"silent", ServerBehavior::Silent},
    {"equivocator", ServerBehavior::Equivocator},
    {"model_corruptor", ServerBehavior::ModelCorruptor},
    {"bogus_nr", ServerBehavior::BogusNRSender}};
const std::map<std::string, ReplicaBehavior> kReplicaBehaviors = {
    {"correct", ReplicaBehavior::Correct},
    {"silent", ReplicaBehavior::Silent},
    {"garbage", ReplicaBehavior::GarbageReplier}};
const std::map<std::string, ClientBehavior> kClientBehaviors = {
    {"honest", ClientBehavior::Honest},
    {"attacker", ClientBehavior::Attacker},
    {"silent", ClientBehavior::Silent}};
const std::map<std::string, AggregatorKind> kAggregators = {
    {"fedavg", AggregatorKind::FedAvg},
    {"median", AggregatorKind::Median},
    {"trimmed_mean", AggregatorKind::TrimmedMean}};
const std::map<std::string, TaskKind> kTaskKinds = {
    {"linear", TaskKind::LinearRegression}, {"logistic", TaskKind::LogisticRegression}};
const std::map<std::string, Partition> kPartitions = {{"iid", Partition::Iid},
                                                      {"label_skew", Partition::LabelSkew}};

template <typename E>
std::string enum_name(const std::map<std::string, E>& names, E value) {
  for (const auto& [k, v] : names) {
    if (v == value) return k;
  }
  return "?";
}

void parse_task(const Node& t, Scenario& s) {
  t.allow_only({"kind", "dimension", "noise", "samples_per_client", "partition", "clients_per_round",
                "min_clients", "min_updates", "final_round", "eps", "aggregator", "trim", "epochs",
                "batch", "learning_rate", "selection_seed", "min_stake", "loss_threshold"});
  auto& p = s.params;
  if (t.has("kind")) s.data.kind = parse_enum(t.child("kind"), kTaskKinds);
  p.dimension = t.child("dimension").u32();
  if (t.has("noise")) s.data.noise = t.child("noise").number();
  if (t.has("samples_per_client")) s.data.samples_per_client = t.child("samples_per_client").u32();
  if (t.has("partition")) s.data.partition = parse_enum(t.child("partition"), kPartitions);
  p.clients_per_round = t.child("clients_per_round").u32();
  p.min_clients = t.has("min_clients") ? t.child("min_clients").u32() : s.clients;
  s.min_updates_explicit = t.has("min_updates");
  p.min_updates = s.min_updates_explicit ? t.child("min_updates").u32() : p.clients_per_round;
  p.final_round = t.child("final_round").u32();
  if (t.has("eps")) {
    const auto e = t.child("eps");
    if (e.value().is_array()) {
      std::vector<double> comps;
      for (const auto& v : e.value()) {
        if (!v.is_number() || v.get<double>() < 0) e.fail("eps components must be non-negative numbers");
        comps.push_back(v.get<double>());
      }
      p.eps = EpsilonVector(std::move(comps));
    } else {
      const double v = e.number();
      if (v < 0) e.fail("eps must be non-negative");
      p.eps = EpsilonVector(v);
    }
  }
  if (t.has("aggregator")) p.aggregator.kind = parse_enum(t.child("aggregator"), kAggregators);
  if (t.has("trim")) p.aggregator.trim = t.child("trim").u32();
  if (t.has("epochs")) p.training.epochs = t.child("epochs").u32();
  if (t.has("batch")) p.training.batch = t.child("batch").u32();
  if (t.has("learning_rate")) p.training.learning_rate = t.child("learning_rate").number();
  if (t.has("selection_seed")) p.selection_seed = t.child("selection_seed").uint();
  if (t.has("min_stake")) p.min_stake = t.child("min_stake").uint();
  if (t.has("loss_threshold")) s.data.loss_threshold = t.child("loss_threshold").number();
}

void parse_network(const Node& n, Scenario& s) {
  n.allow_only({"delay", "max_delay_ms", "bandwidth_bytes_per_s", "block_interval", "read_deadline_ms",
                "train_time_ms", "links"});
  if (n.has("delay")) s.network.base = parse_delay(n.child("delay"));
  if (n.has("max_delay_ms")) s.network.max_delay = n.child("max_delay_ms").millis();
  if (n.has("bandwidth_bytes_per_s")) s.network.bandwidth = n.child("bandwidth_bytes_per_s").number();
  if (n.has("block_interval")) s.block_interval = parse_delay(n.child("block_interval"));
  if (n.has("read_deadline_ms")) s.read_deadline = n.child("read_deadline_ms").millis();
  if (n.has("train_time_ms")) s.train_time = n.child("train_time_ms").millis();
  if (n.has("links")) {
    const auto links = n.child("links");
    if (!links.value().is_array()) links.fail("expected a list");
    for (std::size_t i = 0; i < links.value().size(); ++i) {
      const auto l = links.element(i);
      l.allow_only({"from", "to", "delay"});
      const auto from = l.child("from");
      const auto to = l.child("to");
      const auto a = parse_pid(from, from.str(), parse_process_id_kind(from));
      const auto b = parse_pid(to, to.str(), parse_process_id_kind(to));
      s.network.overrides[{a, b}] = parse_delay(l.child("delay"));
    }
  }
}

void parse_faults(const Node& f, Scenario& s) {
  f.allow_only({"servers", "replicas", "clients", "stakes", "lambda_boost", "attackers"});
  if (f.has("lambda_boost")) s.faults.lambda_boost = f.child("lambda_boost").number();
  auto each = [&](const std::string& key, auto&& fn) {
    if (!f.has(key)) return;
    const auto n = f.child(key);
    if (!n.value().is_object()) n.fail("expected an object");
    for (const auto& [k, v] : n.value().items()) fn(n.child(k), k);
  };
  each("servers", [&](const Node& n, const std::string& k) {
    s.faults.servers[parse_pid(n, k, ProcessKind::Server)] = parse_enum(n, kServerBehaviors);
  });
  each("replicas", [&](const Node& n, const std::string& k) {
    s.faults.replicas[parse_pid(n, k, ProcessKind::Replica)] = parse_enum(n, kReplicaBehaviors);
  });
  each("clients", [&](const Node& n, const std::string& k) {
    s.faults.clients[parse_pid(n, k, ProcessKind::Client)] = parse_enum(n, kClientBehaviors);
  });
  each("stakes", [&](const Node& n, const std::string& k) {
    s.faults.stakes[parse_pid(n, k, ProcessKind::Client)] = n.uint();
  });
  if (f.has("attackers")) {
    // Shorthand: the first N clients attack.
    const auto n = f.child("attackers");
    const auto count = n.u32();
    if (count > s.clients) n.fail("more attackers than clients");
    for (std::uint32_t i = 0; i < count; ++i) s.faults.clients[ProcessId::client(i)] = ClientBehavior::Attacker;
  }
}

}  // namespace

std::string validate_scenario(const Scenario& s) {
  if (s.clients == 0) return "population.clients must be >= 1";
  if (auto e = check_params(s.params); !e.empty()) return "task: " + e;
  if (s.params.min_clients > s.clients) return "task.min_clients exceeds population.clients";
  if (s.data.samples_per_client == 0) return "task.samples_per_client must be >= 1";
  if (s.data.noise < 0) return "task.noise must be >= 0";
  if (s.data.kind == TaskKind::LogisticRegression && s.params.dimension < 2) {
    return "task.dimension must be >= 2 for logistic tasks (one coordinate is the bias)";
  }
  if (auto e = s.network.check(); !e.empty()) return "network: " + e;
  if (s.block_interval.lo <= 0 || s.block_interval.hi < s.block_interval.lo) {
    return "network.block_interval must be positive";
  }
  if (s.faults.lambda_boost < 1) return "faults.lambda_boost must be >= 1";
  if (s.instahide && (s.mix_count == 0 || s.mix_count > s.data.samples_per_client)) {
    return "instahide.mix_count must be in [1, samples_per_client]";
  }
  std::uint32_t bad_servers = 0;
  for (const auto& [id, b] : s.faults.servers) {
    if (id.index >= s.servers()) return to_string(id) + " is outside the population";
    bad_servers += b != ServerBehavior::Correct;
  }
  std::uint32_t bad_replicas = 0;
  for (const auto& [id, b] : s.faults.replicas) {
    if (id.index >= s.replicas()) return to_string(id) + " is outside the population";
    bad_replicas += b != ReplicaBehavior::Correct;
  }
  for (const auto& [id, b] : s.faults.clients) {
    if (id.index >= s.clients) return to_string(id) + " is outside the population";
  }
  for (const auto& [id, stake] : s.faults.stakes) {
    if (id.index >= s.clients) return to_string(id) + " is outside the population";
  }
  if (s.expect == Expectation::Terminate) {
    if (bad_servers > s.f_s) return "more Byzantine servers than f_s (set expect to \"failure\" for negative tests)";
    if (bad_replicas > s.f_r) return "more Byzantine replicas than f_r (set expect to \"failure\" for negative tests)";
  }
  if (s.horizon <= 0) return "horizon_ms must be positive";
  return {};
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(line_of(text, e.byte == 0 ? 0 : e.byte - 1), std::string("syntax error: ") + e.what());
  }
  Node root(&text, &doc, 0, "");
  root.allow_only({"name", "seed", "population", "task", "network", "faults", "instahide", "expect", "horizon_ms"});
  Scenario s;
  if (root.has("name")) s.name = root.child("name").str();
  if (root.has("seed")) s.seed = root.child("seed").uint();
  const auto pop = root.child("population");
  pop.allow_only({"clients", "f_s", "f_r", "servers", "replicas"});
  s.clients = pop.child("clients").u32();
  if (pop.has("f_s")) s.f_s = pop.child("f_s").u32();
  if (pop.has("f_r")) s.f_r = pop.child("f_r").u32();
  if (pop.has("servers") && pop.child("servers").u32() != s.servers()) {
    pop.child("servers").fail("must equal 2*f_s+1 = " + std::to_string(s.servers()));
  }
  if (pop.has("replicas") && pop.child("replicas").u32() != s.replicas()) {
    pop.child("replicas").fail("must equal f_r+1 = " + std::to_string(s.replicas()));
  }
  parse_task(root.child("task"), s);
  if (root.has("network")) parse_network(root.child("network"), s);
  if (root.has("faults")) parse_faults(root.child("faults"), s);
  if (root.has("instahide")) {
    const auto ih = root.child("instahide");
    ih.allow_only({"enabled", "mix_count"});
    if (ih.has("enabled")) s.instahide = ih.child("enabled").boolean();
    if (ih.has("mix_count")) s.mix_count = ih.child("mix_count").u32();
  }
  if (root.has("expect")) {
    s.expect = parse_enum(root.child("expect"), std::map<std::string, Expectation>{
                                                    {"terminate", Expectation::Terminate},
                                                    {"failure", Expectation::Failure}});
  }
  if (root.has("horizon_ms")) s.horizon = root.child("horizon_ms").millis();
  if (auto e = validate_scenario(s); !e.empty()) {
    // Point at the section the message names when possible.
    std::size_t line = 0;
    for (const char* section : {"task", "network", "faults", "population", "instahide"}) {
      if (e.rfind(section, 0) == 0 && root.has(section)) line = line_of(text, root.child(section).pos());
    }
    if (line == 0 && e.find("Byzantine") != std::string::npos && root.has("faults")) {
      line = line_of(text, root.child("faults").pos());
    }
    throw ConfigError(line == 0 ? 1 : line, e);
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

namespace {

ordered_json delay_json(const DelayDist& d) {
  auto ms = [](SimTime t) { return static_cast<double>(t) / static_cast<double>(kMillisecond); };
  ordered_json j;
  if (d.kind == DelayDist::Kind::Fixed) {
    j["fixed_ms"] = ms(d.lo);
  } else {
    j["uniform_ms"] = {ms(d.lo), ms(d.hi)};
  }
  return j;
}

}  // namespace

std::string dump_scenario(const Scenario& s) {
  auto ms = [](SimTime t) { return static_cast<double>(t) / static_cast<double>(kMillisecond); };
  ordered_json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["population"] = {{"clients", s.clients}, {"f_s", s.f_s}, {"f_r", s.f_r}};
  ordered_json t;
  const auto& p = s.params;
  t["kind"] = enum_name(kTaskKinds, s.data.kind);
  t["dimension"] = p.dimension;
  t["noise"] = s.data.noise;
  t["samples_per_client"] = s.data.samples_per_client;
  t["partition"] = enum_name(kPartitions, s.data.partition);
  t["clients_per_round"] = p.clients_per_round;
  t["min_clients"] = p.min_clients;
  t["min_updates"] = p.min_updates;
  t["final_round"] = p.final_round;
  if (p.eps.is_scalar()) {
    t["eps"] = p.eps.at(0);
  } else {
    t["eps"] = std::vector<double>(p.eps.components().begin(), p.eps.components().end());
  }
  t["aggregator"] = enum_name(kAggregators, p.aggregator.kind);
  t["trim"] = p.aggregator.trim;
  t["epochs"] = p.training.epochs;
  t["batch"] = p.training.batch;
  t["learning_rate"] = p.training.learning_rate;
  t["selection_seed"] = p.selection_seed;
  t["min_stake"] = p.min_stake;
  if (s.data.loss_threshold) t["loss_threshold"] = *s.data.loss_threshold;
  j["task"] = t;
  ordered_json n;
  n["delay"] = delay_json(s.network.base);
  n["max_delay_ms"] = ms(s.network.max_delay);
  n["bandwidth_bytes_per_s"] = s.network.bandwidth;
  n["block_interval"] = delay_json(s.block_interval);
  if (s.read_deadline) n["read_deadline_ms"] = ms(*s.read_deadline);
  n["train_time_ms"] = ms(s.train_time);
  if (!s.network.overrides.empty()) {
    ordered_json links = ordered_json::array();
    for (const auto& [link, d] : s.network.overrides) {
      links.push_back({{"from", to_string(link.first)}, {"to", to_string(link.second)}, {"delay", delay_json(d)}});
    }
    n["links"] = links;
  }
  j["network"] = n;
  ordered_json f;
  f["lambda_boost"] = s.faults.lambda_boost;
  ordered_json servers = ordered_json::object(), replicas = ordered_json::object(),
               clients = ordered_json::object(), stakes = ordered_json::object();
  for (const auto& [id, b] : s.faults.servers) servers[to_string(id)] = enum_name(kServerBehaviors, b);
  for (const auto& [id, b] : s.faults.replicas) replicas[to_string(id)] = enum_name(kReplicaBehaviors, b);
  for (const auto& [id, b] : s.faults.clients) clients[to_string(id)] = enum_name(kClientBehaviors, b);
  for (const auto& [id, v] : s.faults.stakes) stakes[to_string(id)] = v;
  f["servers"] = servers;
  f["replicas"] = replicas;
  f["clients"] = clients;
  f["stakes"] = stakes;
  j["faults"] = f;
  j["instahide"] = {{"enabled", s.instahide}, {"mix_count", s.mix_count}};
  j["expect"] = s.expect == Expectation::Terminate ? "terminate" : "failure";
  j["horizon_ms"] = ms(s.horizon);
  return j.dump(2) + "\n";
}

bool known_axis(const std::string& axis) {
  static const std::set<std::string> axes = {"n_s", "K", "model_dim", "lambda_boost", "f_c"};
  return axes.contains(axis);
}

Scenario apply_axis(const Scenario& base, const std::string& axis, double value) {
  Scenario s = base;
  const auto as_uint = [&]() -> std::uint32_t {
    if (value < 0 || value != std::floor(value) || value > UINT32_MAX) {
      throw ConfigError(0, "axis " + axis + " needs non-negative integer values");
    }
    return static_cast<std::uint32_t>(value);
  };
  if (axis == "n_s") {
    const auto n = as_uint();
    if (n % 2 == 0) throw ConfigError(0, "n_s must be odd (n_s = 2f_s+1)");
    s.f_s = (n - 1) / 2;
    for (auto it = s.faults.servers.begin(); it != s.faults.servers.end();) {
      it = it->first.index >= s.servers() ? s.faults.servers.erase(it) : std::next(it);
    }
  } else if (axis == "K") {
    s.params.clients_per_round = as_uint();
    s.params.min_clients = std::max(s.params.min_clients, s.params.clients_per_round);
    if (!s.min_updates_explicit) s.params.min_updates = s.params.clients_per_round;
  } else if (axis == "model_dim") {
    s.params.dimension = as_uint();
    if (!s.params.eps.is_scalar()) s.params.eps = EpsilonVector(s.params.eps.at(0));
  } else if (axis == "lambda_boost") {
    s.faults.lambda_boost = value;
  } else if (axis == "f_c") {
    const auto n = as_uint();
    if (n > s.clients) throw ConfigError(0, "f_c exceeds the number of clients");
    for (auto it = s.faults.clients.begin(); it != s.faults.clients.end();) {
      it = it->second == ClientBehavior::Attacker ? s.faults.clients.erase(it) : std::next(it);
    }
    for (std::uint32_t i = 0; i < n; ++i) s.faults.clients[ProcessId::client(i)] = ClientBehavior::Attacker;
  } else {
    throw ConfigError(0, "unknown sweep axis " + axis);
  }
  if (auto e = validate_scenario(s); !e.empty()) throw ConfigError(0, axis + "=" + std::to_string(value) + ": " + e);
  return s;
}

}  // namespace bfl

#include "netopt/scenario_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "netopt/error.hpp"

namespace netopt::io {

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& path, const std::string& what) {
  throw ScenarioError(origin + ": " + (path.empty() ? std::string("document") : path) + ": " + what);
}

/// Read-only view of one node with its dotted path for diagnostics.
class Node {
 public:
  Node(const Json& j, std::string path, const std::string& origin)
      : j_(j), path_(std::move(path)), origin_(origin) {}

  const Json& json() const { return j_; }
  const std::string& path() const { return path_; }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  Node at(const char* key) const {
    if (!j_.is_object()) fail(origin_, path_, "expected an object");
    auto it = j_.find(key);
    if (it == j_.end()) fail(origin_, child_path(key), "required field is missing");
    return {*it, child_path(key), origin_};
  }

  Node at(std::size_t i) const {
    return {j_.at(i), path_ + "[" + std::to_string(i) + "]", origin_};
  }

  double number() const {
    if (!j_.is_number()) fail(origin_, path_, "expected a number");
    return j_.get<double>();
  }
  double number(const char* key, double fallback) const {
    return has(key) ? at(key).number() : fallback;
  }

  std::int64_t integer() const {
    if (!j_.is_number_integer()) fail(origin_, path_, "expected an integer");
    return j_.get<std::int64_t>();
  }
  std::int64_t integer(const char* key, std::int64_t fallback) const {
    return has(key) ? at(key).integer() : fallback;
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    Node n = at(key);
    if (!n.j_.is_number_unsigned() && !(n.j_.is_number_integer() && n.j_.get<std::int64_t>() >= 0)) {
      fail(origin_, n.path_, "expected a nonnegative integer");
    }
    return n.j_.get<std::uint64_t>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    Node n = at(key);
    if (!n.j_.is_boolean()) fail(origin_, n.path_, "expected true or false");
    return n.j_.get<bool>();
  }

  std::string string() const {
    if (!j_.is_string()) fail(origin_, path_, "expected a string");
    return j_.get<std::string>();
  }
  std::string string(const char* key, const std::string& fallback) const {
    return has(key) ? at(key).string() : fallback;
  }

  std::size_t size() const {
    if (!j_.is_array()) fail(origin_, path_, "expected an array");
    return j_.size();
  }

  Vector vector() const {
    Vector v(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < j_.size(); ++i) v[static_cast<Eigen::Index>(i)] = at(i).number();
    return v;
  }

  [[noreturn]] void error(const std::string& what) const { fail(origin_, path_, what); }

 private:
  std::string child_path(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  const Json& j_;
  std::string path_;
  const std::string& origin_;
};

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

RateSystem parse_rate_system(const Node& sys) {
  RateSystem out;
  out.capacity = sys.at("capacity").number();
  out.step_size = sys.number("step_size", 0.003);
  if (sys.has("users")) {
    const Node users = sys.at("users");
    for (std::size_t i = 0; i < users.size(); ++i) {
      const Node u = users.at(i);
      try {
        out.users.push_back(
            {UserId{u.at("id").integer()}, PowerUtility(u.at("gamma").number()), u.at("p").number()});
      } catch (const InvalidArgument& e) {
        u.error(e.what());
      }
    }
  } else if (sys.has("reference_users")) {
    const std::int64_t n = sys.at("reference_users").integer();
    if (n < 1) sys.at("reference_users").error("must be at least 1");
    for (std::int64_t k = 1; k <= n; ++k) {
      const double kd = static_cast<double>(k);
      out.users.push_back({UserId{k}, PowerUtility(0.14 + 0.06 * kd), 1.4 + 0.6 * kd});
    }
  } else {
    sys.error("needs either 'users' or 'reference_users'");
  }
  return out;
}

StochasticSystem parse_service_system(const Node& sys) {
  StochasticSystem out;
  out.V = sys.number("V", 100.0);
  out.f = sys.at("f").vector();
  const auto states = static_cast<std::size_t>(out.f.size());
  std::vector<double> reqs;
  std::vector<Vector> gammas;
  if (sys.has("users")) {
    const Node users = sys.at("users");
    for (std::size_t i = 0; i < users.size(); ++i) {
      const Node u = users.at(i);
      const std::int64_t id = u.at("id").integer();
      out.ids.push_back(UserId{id});
      reqs.push_back(u.at("requirement").number());
      if (u.has("gammas")) {
        Vector g = u.at("gammas").vector();
        if (static_cast<std::size_t>(g.size()) != states) {
          u.at("gammas").error("needs one entry per channel state (" + std::to_string(states) + ")");
        }
        gammas.push_back(std::move(g));
      } else {
        gammas.push_back(reference_service_gammas(id, states));
      }
    }
  } else if (sys.has("reference_users")) {
    const std::int64_t n = sys.at("reference_users").integer();
    if (n < 1) sys.at("reference_users").error("must be at least 1");
    for (std::int64_t k = 1; k <= n; ++k) {
      out.ids.push_back(UserId{k});
      reqs.push_back(1.8 + 0.2 * static_cast<double>(k));
      gammas.push_back(reference_service_gammas(k, states));
    }
  } else {
    sys.error("needs either 'users' or 'reference_users'");
  }
  out.A = Eigen::Map<const Vector>(reqs.data(), static_cast<Eigen::Index>(reqs.size()));
  Matrix g(static_cast<Eigen::Index>(gammas.size()), static_cast<Eigen::Index>(states));
  for (std::size_t i = 0; i < gammas.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = gammas[i].transpose();
  try {
    out.penalty = QuadraticPenalty(std::move(g));
  } catch (const InvalidArgument& e) {
    sys.error(e.what());
  }
  return out;
}

double resolved_capacity(const Node& ev, double current) {
  const int given = ev.has("capacity") + ev.has("relative_change") + ev.has("percent_change");
  if (given > 1) ev.error("give only one of 'capacity', 'relative_change', 'percent_change'");
  if (ev.has("capacity")) return ev.at("capacity").number();
  if (ev.has("relative_change")) return current * (1.0 + ev.at("relative_change").number());
  if (ev.has("percent_change")) return current * (1.0 + ev.at("percent_change").number() / 100.0);
  ev.error("capacity event needs 'capacity', 'relative_change' or 'percent_change'");
}

EventKind parse_rate_event(const Node& ev, const std::string& type, const RateSystem& current) {
  if (type == "capacity") return CapacityChange{resolved_capacity(ev, current.capacity)};
  if (type == "user_leave") return UserLeave{UserId{ev.at("id").integer()}};
  if (type == "user_join") {
    try {
      return RateUserJoin{{UserId{ev.at("id").integer()}, PowerUtility(ev.at("gamma").number()),
                           ev.at("p").number()},
                          ev.boolean("parameters_known", false)};
    } catch (const InvalidArgument& e) {
      ev.error(e.what());
    }
  }
  if (type == "channel_quality") {
    if (ev.has("p")) return ChannelQualityChange{ev.at("p").vector()};
    if (ev.has("scale")) return ChannelQualityChange{current.channel_costs() * ev.at("scale").number()};
    ev.error("channel_quality event needs 'p' or 'scale'");
  }
  ev.at("type").error("unknown rate-control event type '" + type + "'");
}

EventKind parse_service_event(const Node& ev, const std::string& type, const StochasticSystem& current) {
  if (type == "user_leave") return UserLeave{UserId{ev.at("id").integer()}};
  if (type == "user_join") {
    const std::int64_t id = ev.at("id").integer();
    Vector g = ev.has("gammas") ? ev.at("gammas").vector() : reference_service_gammas(id, current.states());
    return ServiceUserJoin{UserId{id}, ev.at("requirement").number(), std::move(g)};
  }
  if (type == "requirements") {
    if (ev.has("A")) return RequirementChange{ev.at("A").vector()};
    if (ev.has("scale")) return RequirementChange{current.A * ev.at("scale").number()};
    ev.error("requirements event needs 'A' or 'scale'");
  }
  if (type == "distribution") return DistributionChange{ev.at("f").vector()};
  ev.at("type").error("unknown service event type '" + type + "'");
}

std::vector<std::string> split_path(std::string_view key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    parts.emplace_back(key.substr(start, dot == std::string_view::npos ? key.npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  for (const std::string& p : parts) {
    if (p.empty()) throw ScenarioError("override key '" + std::string(key) + "' has an empty segment");
  }
  return parts;
}

}  // namespace

ScenarioDocument parse_document(std::string_view text, std::string origin) {
  try {
    return {Json::parse(text.begin(), text.end()), std::move(origin)};
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream os;
    os << origin << ":" << line << ":" << col << ": JSON syntax error: " << e.what();
    throw ScenarioError(os.str());
  }
}

ScenarioDocument read_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read scenario file " + path.string());
  return parse_document(buf.str(), path.string());
}

void set_value(ScenarioDocument& doc, std::string_view key, Json value) {
  Json* node = &doc.tree;
  // Overrides target the scenario itself when the document is a run manifest.
  if (node->is_object() && !node->contains("problem") && node->contains("scenario")) {
    node = &(*node)["scenario"];
  }
  const auto parts = split_path(key);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& part = parts[i];
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
      if (ec != std::errc() || ptr != part.data() + part.size() || idx >= node->size()) {
        throw ScenarioError("override '" + std::string(key) + "': index '" + part +
                            "' is not valid for an array of " + std::to_string(node->size()));
      }
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = Json::object();
      if (!node->is_object()) {
        throw ScenarioError("override '" + std::string(key) + "': '" + part +
                            "' does not name a field of a scalar");
      }
      node = &(*node)[part];
    }
    if (last) *node = std::move(value);
  }
}

void apply_override(ScenarioDocument& doc, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ScenarioError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string_view key = assignment.substr(0, eq);
  const std::string_view text = assignment.substr(eq + 1);
  Json value = Json::parse(text.begin(), text.end(), nullptr, false);
  if (value.is_discarded()) value = std::string(text);
  set_value(doc, key, std::move(value));
}

ScenarioConfig resolve(const ScenarioDocument& doc) {
  const Json* tree = &doc.tree;
  if (tree->is_object() && !tree->contains("problem") && tree->contains("scenario")) {
    tree = &tree->at("scenario");
  }
  const Node root(*tree, "", doc.origin);
  if (!tree->is_object()) root.error("expected a JSON object at the top level");

  ScenarioConfig cfg;
  const std::string problem = root.at("problem").string();
  if (problem == "primal1") {
    cfg.problem = ProblemKind::primal1;
  } else if (problem == "primal2") {
    cfg.problem = ProblemKind::primal2;
  } else {
    root.at("problem").error("expected \"primal1\" or \"primal2\", got \"" + problem + "\"");
  }
  const std::string default_name =
      doc.origin.empty() || doc.origin.front() == '<' ? "scenario"
                                                      : std::filesystem::path(doc.origin).stem().string();
  cfg.name = root.string("name", default_name);
  cfg.horizon = root.integer("horizon", cfg.problem == ProblemKind::primal1 ? 300 : 3000);
  cfg.seed = root.unsigned_integer("seed", 1);
  cfg.runs = static_cast<int>(root.integer("runs", 1));
  cfg.zero_shot = root.boolean("zero_shot", true);
  cfg.metric_window = static_cast<int>(root.integer("metric_window", 50));
  cfg.threads = static_cast<int>(root.integer("threads", 0));

  const Node sys = root.at("system");
  RateSystem rate_scratch;
  StochasticSystem service_scratch;
  if (cfg.problem == ProblemKind::primal1) {
    cfg.primal1.system = parse_rate_system(sys);
    cfg.primal1.initial_price = sys.number("initial_price", 1.0);
    cfg.primal1.price_floor = sys.number("price_floor", 1e-9);
    const std::string form = sys.string("demand_form", "weighted");
    if (form == "weighted") {
      cfg.primal1.demand_form = primal1::DemandForm::weighted;
    } else if (form == "literal") {
      cfg.primal1.demand_form = primal1::DemandForm::literal;
    } else {
      sys.at("demand_form").error("expected \"weighted\" or \"literal\"");
    }
    rate_scratch = cfg.primal1.system;
  } else {
    cfg.primal2.system = parse_service_system(sys);
    if (sys.has("offset_init")) {
      const Node init = sys.at("offset_init");
      if (init.json().is_array()) {
        cfg.primal2.offset_init = OffsetInit::given;
        cfg.primal2.lambda0 = init.vector();
      } else {
        const std::string mode = init.string();
        if (mode == "oracle") {
          cfg.primal2.offset_init = OffsetInit::oracle;
        } else if (mode == "zero") {
          cfg.primal2.offset_init = OffsetInit::zero;
        } else {
          init.error("expected \"oracle\", \"zero\" or an array of multipliers");
        }
      }
    }
    const std::string form = sys.string("vslc_form", "shortfall");
    if (form == "shortfall") {
      cfg.primal2.vslc_form = VslcForm::shortfall;
    } else if (form == "surplus") {
      cfg.primal2.vslc_form = VslcForm::surplus;
    } else {
      sys.at("vslc_form").error("expected \"shortfall\" or \"surplus\"");
    }
    service_scratch = cfg.primal2.system;
  }

  if (root.has("events")) {
    const Node events = root.at("events");
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Node ev = events.at(i);
      DynamicsEvent e;
      e.at = ev.at("at").integer();
      if (!cfg.events.empty() && e.at <= cfg.events.back().at) {
        ev.at("at").error("events must be strictly increasing in time: t=" + std::to_string(e.at) +
                          " follows t=" + std::to_string(cfg.events.back().at));
      }
      const std::string type = ev.at("type").string();
      try {
        if (cfg.problem == ProblemKind::primal1) {
          e.kind = parse_rate_event(ev, type, rate_scratch);
          apply_event(rate_scratch, e.kind);
        } else {
          e.kind = parse_service_event(ev, type, service_scratch);
          apply_event(service_scratch, e.kind);
        }
      } catch (const InvalidArgument& err) {
        ev.error(err.what());
      }
      cfg.events.push_back(std::move(e));
    }
  }

  if (root.has("sweep")) {
    const Node sw = root.at("sweep");
    SweepConfig sc;
    sc.key = sw.at("key").string();
    if (sw.has("values")) {
      const Node vals = sw.at("values");
      for (std::size_t i = 0; i < vals.size(); ++i) sc.values.push_back(vals.at(i).number());
    } else {
      const double start = sw.at("start").number();
      const double stop = sw.at("stop").number();
      const double step = sw.at("step").number();
      if (!(step > 0.0)) sw.at("step").error("must be positive");
      // Integer stepping avoids drift in the grid values.
      for (std::int64_t k = 0; start + static_cast<double>(k) * step <= stop + 1e-9 * step; ++k) {
        sc.values.push_back(start + static_cast<double>(k) * step);
      }
    }
    if (sc.values.empty()) sw.error("grid is empty");
    sc.band = sw.number("band", 0.01);
    sc.sustained = sw.boolean("sustained", false);
    cfg.sweep = std::move(sc);
  }

  try {
    cfg.validate();
  } catch (const ScenarioError& e) {
    throw ScenarioError(doc.origin + ": " + e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) { return resolve(read_document(path)); }

Json to_json(const ScenarioConfig& cfg) {
  Json j = Json::object();
  j["name"] = cfg.name;
  j["problem"] = cfg.problem == ProblemKind::primal1 ? "primal1" : "primal2";
  j["horizon"] = cfg.horizon;
  j["seed"] = cfg.seed;
  j["runs"] = cfg.runs;
  j["zero_shot"] = cfg.zero_shot;
  j["metric_window"] = cfg.metric_window;
  j["threads"] = cfg.threads;

  Json sys = Json::object();
  Json events = Json::array();
  if (cfg.problem == ProblemKind::primal1) {
    const Primal1Config& pc = cfg.primal1;
    sys["capacity"] = pc.system.capacity;
    sys["step_size"] = pc.system.step_size;
    sys["initial_price"] = pc.initial_price;
    sys["price_floor"] = pc.price_floor;
    sys["demand_form"] = pc.demand_form == primal1::DemandForm::weighted ? "weighted" : "literal";
    Json users = Json::array();
    for (const RateUser& u : pc.system.users) {
      users.push_back({{"id", u.id.value}, {"gamma", u.utility.gamma()}, {"p", u.p}});
    }
    sys["users"] = std::move(users);
  } else {
    const Primal2Config& pc = cfg.primal2;
    sys["V"] = pc.system.V;
    sys["f"] = vector_json(pc.system.f);
    Json users = Json::array();
    for (std::size_t i = 0; i < pc.system.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      users.push_back({{"id", pc.system.ids[i].value},
                       {"requirement", pc.system.A[k]},
                       {"gammas", vector_json(pc.system.penalty.gammas().row(k).transpose())}});
    }
    sys["users"] = std::move(users);
    switch (pc.offset_init) {
      case OffsetInit::oracle:
        sys["offset_init"] = "oracle";
        break;
      case OffsetInit::zero:
        sys["offset_init"] = "zero";
        break;
      case OffsetInit::given:
        sys["offset_init"] = vector_json(pc.lambda0);
        break;
    }
    sys["vslc_form"] = pc.vslc_form == VslcForm::shortfall ? "shortfall" : "surplus";
  }
  j["system"] = std::move(sys);

  for (const DynamicsEvent& e : cfg.events) {
    Json ev = Json::object();
    ev["at"] = e.at;
    ev["type"] = event_name(e.kind);
    std::visit(
        [&](const auto& k) {
          using E = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<E, CapacityChange>) {
            ev["capacity"] = k.capacity;
          } else if constexpr (std::is_same_v<E, UserLeave>) {
            ev["id"] = k.id.value;
          } else if constexpr (std::is_same_v<E, RateUserJoin>) {
            ev["id"] = k.user.id.value;
            ev["gamma"] = k.user.utility.gamma();
            ev["p"] = k.user.p;
            ev["parameters_known"] = k.parameters_known;
          } else if constexpr (std::is_same_v<E, ServiceUserJoin>) {
            ev["id"] = k.id.value;
            ev["requirement"] = k.requirement;
            ev["gammas"] = vector_json(k.gammas);
          } else if constexpr (std::is_same_v<E, ChannelQualityChange>) {
            ev["p"] = vector_json(k.p);
          } else if constexpr (std::is_same_v<E, RequirementChange>) {
            ev["A"] = vector_json(k.A);
          } else if constexpr (std::is_same_v<E, DistributionChange>) {
            ev["f"] = vector_json(k.f);
          }
        },
        e.kind);
    events.push_back(std::move(ev));
  }
  j["events"] = std::move(events);

  if (cfg.sweep) {
    j["sweep"] = {{"key", cfg.sweep->key},
                  {"values", cfg.sweep->values},
                  {"band", cfg.sweep->band},
                  {"sustained", cfg.sweep->sustained}};
  }
  return j;
}

std::string serialize_scenario(const ScenarioConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace netopt::io

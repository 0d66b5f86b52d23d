#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "afbc/cli.hpp"
#include "afbc/envlab.hpp"
#include "afbc/errors.hpp"

namespace afbc {

namespace {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<FilterKind> kFilterKinds[] = {{FilterKind::kBinary, "binary"},
                                                 {FilterKind::kExponential, "exponential"},
                                                 {FilterKind::kTTestAnnealed, "ttest_annealed"},
                                                 {FilterKind::kClassifier, "classifier"}};
constexpr EnumName<AdvantageEstimator> kEstimators[] = {
    {AdvantageEstimator::kQ, "q"}, {AdvantageEstimator::kMonteCarlo, "monte_carlo"}};
constexpr EnumName<PriorityScheme> kSchemes[] = {{PriorityScheme::kClippedAdvantage, "clipped"},
                                                 {PriorityScheme::kBinary, "binary"}};
constexpr EnumName<numkit::PopArtSchedule> kSchedules[] = {
    {numkit::PopArtSchedule::kUnbiasedConstant, "unbiased_constant"},
    {numkit::PopArtSchedule::kHarmonic, "harmonic"}};
constexpr EnumName<TrainMode> kModes[] = {{TrainMode::kBc, "bc"},
                                          {TrainMode::kAfbcUniform, "afbc_uniform"},
                                          {TrainMode::kAfbcPer, "afbc_per"}};

template <class E, std::size_t N>
const char* name_of(const EnumName<E> (&table)[N], E value) {
  for (const auto& e : table) {
    if (e.value == value) return e.name;
  }
  return "?";
}

// One YAML mapping with a dotted path; remembers which keys were consumed so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string* source)
      : node_(std::move(node)), path_(std::move(path)), source_(source) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, path_, "expected a mapping");
  }

  bool has(const char* key) const { return node_ && node_.IsMap() && node_[key]; }

  Section child(const char* key) {
    used_.insert(key);
    YAML::Node sub = has(key) ? node_[key] : YAML::Node();
    return Section(sub, dotted(key), source_);
  }

  template <class T>
  void read(const char* key, T& out) {
    used_.insert(key);
    if (!has(key)) return;
    const YAML::Node n = node_[key];
    if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!n.IsSequence()) fail(n, dotted(key), "expected a list of integers");
      std::vector<int> v;
      for (const auto& item : n) v.push_back(scalar<int>(item, dotted(key), "an integer"));
      out = std::move(v);
    } else if constexpr (std::is_same_v<T, bool>) {
      out = scalar<bool>(n, dotted(key), "true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      out = scalar<std::string>(n, dotted(key), "a string");
    } else if constexpr (std::is_integral_v<T>) {
      const std::string text = scalar<std::string>(n, dotted(key), "an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (!text.empty() && text[0] == '-') fail(n, dotted(key), "must be non-negative");
      }
      out = scalar<T>(n, dotted(key), "an integer");
    } else {
      out = scalar<T>(n, dotted(key), "a number");
    }
  }

  template <class E, std::size_t N>
  void read_enum(const char* key, const EnumName<E> (&table)[N], E& out) {
    used_.insert(key);
    if (!has(key)) return;
    const std::string s = scalar<std::string>(node_[key], dotted(key), "a string");
    for (const auto& e : table) {
      if (s == e.name) {
        out = e.value;
        return;
      }
    }
    std::string known;
    for (const auto& e : table) known += std::string(known.empty() ? "" : ", ") + e.name;
    fail(node_[key], dotted(key), "unknown value '" + s + "' (known: " + known + ")");
  }

  void reject_unknown() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!used_.count(key)) fail(kv.first, dotted(key.c_str()), "unknown key");
    }
  }

  std::string dotted(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  template <class T>
  T scalar(const YAML::Node& n, const std::string& path, const char* expected) const {
    if (!n.IsScalar()) fail(n, path, std::string("expected ") + expected);
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, path, std::string("expected ") + expected + ", got '" + n.Scalar() + "'");
    }
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& path,
                         const std::string& msg) const {
    const YAML::Mark mark = n.Mark();
    std::string where = *source_;
    if (!mark.is_null()) where += ":" + std::to_string(mark.line + 1);
    throw ConfigError(where + ": " + path + ": " + msg);
  }

  YAML::Node node_;
  std::string path_;
  const std::string* source_;
  std::set<std::string> used_;
};

void range(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError(field + ": " + rule);
}

bool is_mc_recipe(const std::string& r) { return r.rfind("mc-", 0) == 0; }

void check_semantics(const RunConfig& c) {
  make_env(c.env);  // throws ConfigError for unknown ids
  range(c.replay.alpha >= 0.0 && c.replay.alpha <= 1.0, "replay.alpha",
        "must lie in [0, 1], got " + std::to_string(c.replay.alpha));
  range(c.replay.priority.epsilon > 0.0, "replay.epsilon", "must be > 0");
  range(c.train.steps > 0, "train.steps", "must be > 0");
  range(c.train.batch_size > 0, "train.batch_size", "must be > 0");
  range(c.train.eval_interval > 0, "train.eval_interval", "must be > 0");
  range(c.train.eval_episodes > 0, "train.eval_episodes", "must be > 0");
  range(c.agent.popart_config.beta > 0.0 && c.agent.popart_config.beta <= 1.0,
        "agent.popart_beta", "must lie in (0, 1]");
  range(c.agent.policy.log_std_min < c.agent.policy.log_std_max, "agent.policy.log_std_min",
        "must be below log_std_max");
  range(c.dataset.path.empty() || c.dataset.recipe.empty(), "dataset",
        "give either path or recipe, not both");
  if (!c.dataset.recipe.empty()) {
    if (is_mc_recipe(c.dataset.recipe)) {
      range(c.dataset.recipe == "mc-expert" || c.dataset.recipe == "mc-random-expert" ||
                c.dataset.recipe == "mc-adversarial-expert",
            "dataset.recipe", "unknown Mountain-Car recipe '" + c.dataset.recipe + "'");
      range(c.env == "mountain_car_1d", "dataset.recipe", "mc-* recipes need env mountain_car_1d");
    } else {
      parse_recipe(c.dataset.recipe);
      range(!c.dataset.tiers.empty(), "dataset.tiers",
            "tiered recipes need a tier store written by `afbc collect`");
    }
  }
  validate(c.agent);
}

std::string num(double v) {
  char buf[40];
  // Shortest representation that parses back to the same double.
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  std::string s(buf, end);
  // Keep floats recognisable as floats.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

ParsedConfig parse_config(const std::string& text, const std::string& source_name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source_name + ":" + std::to_string(e.mark.line + 1) +
                      ": parse error: " + e.msg);
  }
  ParsedConfig parsed;
  RunConfig& c = parsed.config;
  Section top(root, "", &source_name);
  top.read("env", c.env);
  top.read("seed", c.seed);
  top.read("output_dir", c.output_dir);

  Section ds = top.child("dataset");
  ds.read("path", c.dataset.path);
  ds.read("recipe", c.dataset.recipe);
  ds.read("budget", c.dataset.budget);
  ds.read("tiers", c.dataset.tiers);
  ds.read("seed", c.dataset.seed);
  ds.reject_unknown();
  if (c.dataset.path.empty() && c.dataset.recipe.empty()) c.dataset.recipe = "mc-expert";

  Section tr = top.child("train");
  tr.read_enum("mode", kModes, c.train.mode);
  tr.read("steps", c.train.steps);
  tr.read("batch_size", c.train.batch_size);
  tr.read("eval_interval", c.train.eval_interval);
  tr.read("eval_episodes", c.train.eval_episodes);
  tr.read("probe_size", c.train.probe_size);
  tr.reject_unknown();

  AgentConfig& a = c.agent;
  Section ag = top.child("agent");
  ag.read("hidden", a.hidden);
  ag.read("actor_lr", a.actor_lr);
  ag.read("critic_lr", a.critic_lr);
  ag.read("gamma", a.gamma);
  ag.read("tau_polyak", a.tau_polyak);
  ag.read("target_delay", a.target_delay);
  ag.read("advantage_samples", a.advantage_samples);
  ag.read("ensemble_size", a.ensemble_size);
  ag.read("subset_size", a.subset_size);
  ag.read("uncertainty_weighting", a.uncertainty_weighting);
  ag.read("tau_temp", a.tau_temp);
  ag.read("popart", a.popart);
  ag.read("popart_beta", a.popart_config.beta);
  ag.read_enum("popart_schedule", kSchedules, a.popart_config.schedule);
  ag.read("target_bound", a.target_bound);
  ag.read_enum("estimator", kEstimators, a.estimator);
  Section pol = ag.child("policy");
  pol.read("log_std_min", a.policy.log_std_min);
  pol.read("log_std_max", a.policy.log_std_max);
  pol.read("squash_eps", a.policy.squash_eps);
  pol.read("action_clamp", a.policy.action_clamp);
  pol.reject_unknown();
  ag.reject_unknown();

  FilterConfig& f = a.filter;
  Section fi = top.child("filter");
  fi.read_enum("kind", kFilterKinds, f.kind);
  fi.read("beta", f.beta);
  fi.read("clip_max", f.clip_max);
  fi.read("popart_rescale", f.popart_rescale);
  fi.read("ttest_k", f.ttest_k);
  fi.read("ttest_p_start", f.ttest_p_start);
  fi.read("ttest_p_end", f.ttest_p_end);
  fi.read("ttest_anneal_fraction", f.ttest_anneal_fraction);
  fi.read("classifier_members", f.classifier_members);
  fi.read("classifier_threshold", f.classifier_threshold);
  fi.read("classifier_max_std", f.classifier_max_std);
  fi.read("classifier_lr", f.classifier_lr);
  fi.reject_unknown();

  const struct {
    FilterKind kind;
    std::vector<const char*> keys;
  } owned[] = {
      {FilterKind::kExponential, {"beta", "clip_max", "popart_rescale"}},
      {FilterKind::kTTestAnnealed,
       {"ttest_k", "ttest_p_start", "ttest_p_end", "ttest_anneal_fraction"}},
      {FilterKind::kClassifier,
       {"classifier_members", "classifier_threshold", "classifier_max_std", "classifier_lr"}},
  };
  for (const auto& o : owned) {
    if (o.kind == f.kind) continue;
    for (const char* key : o.keys) {
      if (fi.has(key)) {
        parsed.warnings.push_back(fi.dotted(key) + " is ignored by filter kind '" +
                                  name_of(kFilterKinds, f.kind) + "'");
      }
    }
  }

  // Ignored fields fall back to their defaults so the resolved snapshot
  // round-trips exactly.
  const FilterConfig defaults;
  if (f.kind != FilterKind::kExponential) {
    f.beta = defaults.beta;
    f.clip_max = defaults.clip_max;
    f.popart_rescale = defaults.popart_rescale;
  }
  if (f.kind != FilterKind::kTTestAnnealed) {
    f.ttest_k = defaults.ttest_k;
    f.ttest_p_start = defaults.ttest_p_start;
    f.ttest_p_end = defaults.ttest_p_end;
    f.ttest_anneal_fraction = defaults.ttest_anneal_fraction;
  }
  if (f.kind != FilterKind::kClassifier) {
    f.classifier_members = defaults.classifier_members;
    f.classifier_threshold = defaults.classifier_threshold;
    f.classifier_max_std = defaults.classifier_max_std;
    f.classifier_lr = defaults.classifier_lr;
  }

  Section rp = top.child("replay");
  rp.read("alpha", c.replay.alpha);
  rp.read_enum("scheme", kSchemes, c.replay.priority.scheme);
  rp.read("epsilon", c.replay.priority.epsilon);
  rp.reject_unknown();

  top.reject_unknown();
  check_semantics(c);
  return parsed;
}

ParsedConfig validate_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string dump_config(const RunConfig& c) {
  const AgentConfig& a = c.agent;
  const FilterConfig& f = a.filter;
  std::ostringstream os;
  os << "env: " << quoted(c.env) << '\n';
  os << "seed: " << c.seed << '\n';
  os << "output_dir: " << quoted(c.output_dir) << '\n';
  os << "dataset:\n";
  os << "  path: " << quoted(c.dataset.path) << '\n';
  os << "  recipe: " << quoted(c.dataset.recipe) << '\n';
  os << "  budget: " << c.dataset.budget << '\n';
  os << "  tiers: " << quoted(c.dataset.tiers) << '\n';
  os << "  seed: " << c.dataset.seed << '\n';
  os << "train:\n";
  os << "  mode: " << name_of(kModes, c.train.mode) << '\n';
  os << "  steps: " << c.train.steps << '\n';
  os << "  batch_size: " << c.train.batch_size << '\n';
  os << "  eval_interval: " << c.train.eval_interval << '\n';
  os << "  eval_episodes: " << c.train.eval_episodes << '\n';
  os << "  probe_size: " << c.train.probe_size << '\n';
  os << "agent:\n";
  os << "  hidden: [";
  for (std::size_t i = 0; i < a.hidden.size(); ++i) os << (i ? ", " : "") << a.hidden[i];
  os << "]\n";
  os << "  actor_lr: " << num(a.actor_lr) << '\n';
  os << "  critic_lr: " << num(a.critic_lr) << '\n';
  os << "  gamma: " << num(a.gamma) << '\n';
  os << "  tau_polyak: " << num(a.tau_polyak) << '\n';
  os << "  target_delay: " << a.target_delay << '\n';
  os << "  advantage_samples: " << a.advantage_samples << '\n';
  os << "  ensemble_size: " << a.ensemble_size << '\n';
  os << "  subset_size: " << a.subset_size << '\n';
  os << "  uncertainty_weighting: " << (a.uncertainty_weighting ? "true" : "false") << '\n';
  os << "  tau_temp: " << num(a.tau_temp) << '\n';
  os << "  popart: " << (a.popart ? "true" : "false") << '\n';
  os << "  popart_beta: " << num(a.popart_config.beta) << '\n';
  os << "  popart_schedule: " << name_of(kSchedules, a.popart_config.schedule) << '\n';
  os << "  target_bound: " << num(a.target_bound) << '\n';
  os << "  estimator: " << name_of(kEstimators, a.estimator) << '\n';
  os << "  policy:\n";
  os << "    log_std_min: " << num(a.policy.log_std_min) << '\n';
  os << "    log_std_max: " << num(a.policy.log_std_max) << '\n';
  os << "    squash_eps: " << num(a.policy.squash_eps) << '\n';
  os << "    action_clamp: " << num(a.policy.action_clamp) << '\n';
  os << "filter:\n";
  os << "  kind: " << name_of(kFilterKinds, f.kind) << '\n';
  // Only the fields the chosen kind reads, so the snapshot parses without warnings.
  if (f.kind == FilterKind::kExponential) {
    os << "  beta: " << num(f.beta) << '\n';
    os << "  clip_max: " << num(f.clip_max) << '\n';
    os << "  popart_rescale: " << (f.popart_rescale ? "true" : "false") << '\n';
  }
  if (f.kind == FilterKind::kTTestAnnealed) {
    os << "  ttest_k: " << f.ttest_k << '\n';
    os << "  ttest_p_start: " << num(f.ttest_p_start) << '\n';
    os << "  ttest_p_end: " << num(f.ttest_p_end) << '\n';
    os << "  ttest_anneal_fraction: " << num(f.ttest_anneal_fraction) << '\n';
  }
  if (f.kind == FilterKind::kClassifier) {
    os << "  classifier_members: " << f.classifier_members << '\n';
    os << "  classifier_threshold: " << num(f.classifier_threshold) << '\n';
    os << "  classifier_max_std: " << num(f.classifier_max_std) << '\n';
    os << "  classifier_lr: " << num(f.classifier_lr) << '\n';
  }
  os << "replay:\n";
  os << "  alpha: " << num(c.replay.alpha) << '\n';
  os << "  scheme: " << name_of(kSchemes, c.replay.priority.scheme) << '\n';
  os << "  epsilon: " << num(c.replay.priority.epsilon) << '\n';
  return os.str();
}

std::filesystem::path output_root() {
  const char* env = std::getenv("AFBC_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

}  // namespace afbc

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "afbc/errors.hpp"
#include "afbc/evalkit.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace afbc {

RunLog parse_train_log(const fs::path& path, std::string seed_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open training log " + path.string());
  RunLog log;
  log.seed_id = seed_id;
  log.path = path;
  log.returns.seed_id = log.goal_rate.seed_id = log.approval.seed_id = seed_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      const std::string type = rec.at("type");
      if (type == "config" && log.seed_id.empty() && rec.contains("seed")) {
        log.seed_id = "seed_" + std::to_string(rec.at("seed").get<std::uint64_t>());
      } else if (type == "eval") {
        const std::uint64_t step = rec.at("step");
        for (auto* c : {&log.returns, &log.goal_rate, &log.approval}) c->steps.push_back(step);
        log.returns.values.push_back(rec.at("return"));
        log.goal_rate.values.push_back(rec.at("goal_rate"));
        log.approval.values.push_back(rec.at("approval"));
      } else if (type == "probe") {
        log.probe_steps.push_back(rec.at("step"));
        log.probe_advantages.push_back(rec.at("advantages").get<std::vector<double>>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (log.seed_id.empty()) log.seed_id = path.parent_path().filename().string();
  log.returns.seed_id = log.goal_rate.seed_id = log.approval.seed_id = log.seed_id;
  return log;
}

std::vector<RunLog> load_run(const fs::path& run_dir) {
  const fs::path direct = run_dir / "train_log.jsonl";
  // A single-seed run is named after the seed in its log, not its directory,
  // so reports do not depend on where the run was written.
  if (fs::exists(direct)) return {parse_train_log(direct, "")};

  std::vector<fs::path> seeds;
  if (fs::is_directory(run_dir)) {
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_directory() && name.rfind("seed_", 0) == 0) seeds.push_back(entry.path());
    }
  }
  std::sort(seeds.begin(), seeds.end());
  std::vector<RunLog> logs;
  std::vector<std::string> missing;
  for (const auto& dir : seeds) {
    const fs::path p = dir / "train_log.jsonl";
    if (fs::exists(p)) {
      logs.push_back(parse_train_log(p, dir.filename().string()));
    } else {
      missing.push_back(p.string());
    }
  }
  if (logs.empty()) {
    std::string msg = "no training logs under " + run_dir.string() + "; missing: " +
                      direct.string();
    for (const auto& m : missing) msg += ", " + m;
    if (seeds.empty()) msg += ", " + (run_dir / "seed_*/train_log.jsonl").string();
    throw DataError(msg);
  }
  if (!missing.empty()) {
    std::string msg = "incomplete run " + run_dir.string() + "; missing:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  return logs;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::vector<LearningCurve> pick(const std::vector<RunLog>& logs, LearningCurve RunLog::*member) {
  std::vector<LearningCurve> out;
  for (const auto& l : logs) out.push_back(l.*member);
  return out;
}

std::string curve_table(const std::vector<LearningCurve>& curves) {
  std::ostringstream os;
  os << "step";
  for (const auto& c : curves) os << ',' << c.seed_id << ',' << c.seed_id << "_smoothed";
  os << ",mean_smoothed,std_smoothed\n";
  std::vector<std::vector<double>> sm;
  for (const auto& c : curves) sm.push_back(smooth(c.values));
  const std::size_t n = curves.size();
  for (std::size_t t = 0; t < curves.front().steps.size(); ++t) {
    os << curves.front().steps[t];
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      os << ',' << num(curves[k].values[t]) << ',' << num(sm[k][t]);
      m += sm[k][t];
    }
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) ss += (sm[k][t] - m) * (sm[k][t] - m);
    os << ',' << num(m) << ',' << num(n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0)
       << '\n';
  }
  return os.str();
}

// Line chart of the smoothed cross-seed mean with a +-1 std band.
std::string render_svg(const std::vector<LearningCurve>& curves, const std::string& title) {
  constexpr double kW = 640, kH = 360, kL = 60, kR = 20, kT = 30, kB = 40;
  std::vector<std::vector<double>> sm;
  for (const auto& c : curves) sm.push_back(smooth(c.values));
  const auto& steps = curves.front().steps;
  const std::size_t len = steps.size();
  const double n = static_cast<double>(curves.size());
  std::vector<double> mean(len), sd(len);
  for (std::size_t t = 0; t < len; ++t) {
    double m = 0.0;
    for (const auto& s : sm) m += s[t];
    m /= n;
    double ss = 0.0;
    for (const auto& s : sm) ss += (s[t] - m) * (s[t] - m);
    mean[t] = m;
    sd[t] = curves.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  double lo = mean[0] - sd[0];
  double hi = mean[0] + sd[0];
  for (std::size_t t = 0; t < len; ++t) {
    lo = std::min(lo, mean[t] - sd[t]);
    hi = std::max(hi, mean[t] + sd[t]);
  }
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double x0 = static_cast<double>(steps.front());
  const double x1 = std::max(static_cast<double>(steps.back()), x0 + 1.0);
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
  auto py = [&](double y) { return kT + (hi - y) / (hi - lo) * (kH - kT - kB); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kL << "\" y=\"18\">" << title << " (n=" << curves.size()
     << ", smoothed 0.65)</text>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
     << kH - kB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"4\" y=\"" << fixed(py(hi) + 4) << "\">" << fixed(hi) << "</text>\n";
  os << "<text x=\"4\" y=\"" << fixed(py(lo)) << "\">" << fixed(lo) << "</text>\n";
  os << "<text x=\"" << kL << "\" y=\"" << kH - 10 << "\">" << steps.front() << "</text>\n";
  os << "<text x=\"" << kW - kR - 60 << "\" y=\"" << kH - 10 << "\">" << steps.back()
     << "</text>\n";

  os << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" points=\"";
  for (std::size_t t = 0; t < len; ++t) {
    os << fixed(px(static_cast<double>(steps[t]))) << ',' << fixed(py(mean[t] + sd[t])) << ' ';
  }
  for (std::size_t t = len; t-- > 0;) {
    os << fixed(px(static_cast<double>(steps[t]))) << ',' << fixed(py(mean[t] - sd[t])) << ' ';
  }
  os << "\"/>\n<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
  for (std::size_t t = 0; t < len; ++t) {
    os << fixed(px(static_cast<double>(steps[t]))) << ',' << fixed(py(mean[t])) << ' ';
  }
  os << "\"/>\n</svg>\n";
  return os.str();
}

}  // namespace

std::vector<fs::path> emit_report(const fs::path& run_dir) {
  const auto logs = load_run(run_dir);
  for (const auto& l : logs) {
    if (l.returns.steps.empty()) {
      throw DataError("training log " + l.path.string() + " has no eval records");
    }
  }
  const fs::path out = run_dir / "report";
  fs::create_directories(out);

  const auto returns = pick(logs, &RunLog::returns);
  const auto goals = pick(logs, &RunLog::goal_rate);
  const auto approvals = pick(logs, &RunLog::approval);

  std::ostringstream sc;
  sc << "metric,mean,two_std,ci95,n_seeds,window\n";
  const std::pair<const char*, const std::vector<LearningCurve>*> metrics[] = {
      {"return", &returns}, {"goal_rate", &goals}, {"approval", &approvals}};
  for (const auto& [name, curves] : metrics) {
    const ScoreReport r = score(*curves);
    sc << name << ',' << num(r.mean) << ',' << num(r.two_std) << ',' << num(r.ci95) << ','
       << r.n_seeds << ',' << r.window << '\n';
  }

  std::ostringstream hist;
  hist << "seed,step,bin_low,bin_high,count\n";
  for (const auto& l : logs) {
    for (std::size_t k = 0; k < l.probe_steps.size(); ++k) {
      const Histogram h = advantage_histogram(l.probe_advantages[k]);
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        hist << l.seed_id << ',' << l.probe_steps[k] << ',' << num(h.edges[b]) << ','
             << num(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
      }
    }
  }

  const std::vector<std::pair<fs::path, std::string>> files = {
      {out / "score.csv", sc.str()},
      {out / "curves.csv", curve_table(returns)},
      {out / "goal_rate.csv", curve_table(goals)},
      {out / "approval.csv", curve_table(approvals)},
      {out / "histograms.csv", hist.str()},
      {out / "returns.svg", render_svg(returns, "evaluation return")},
      {out / "approval.svg", render_svg(approvals, "actor-batch approval fraction")},
  };
  std::vector<fs::path> written;
  for (const auto& [path, text] : files) {
    write_file(path, text);
    written.push_back(path);
  }
  return written;
}

}  // namespace afbc

#include "pforest/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "pforest/errors.hpp"

namespace pforest {

std::string make_run_id(const json& config) { return fnv1a64_hex(config.dump()); }

ArtifactRef fingerprint_file(const std::string& path) {
  return {path, fnv1a64_hex(read_file(path))};
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  json artifacts = json::array();
  for (const ArtifactRef& a : manifest.artifacts)
    artifacts.push_back({{"path", a.path}, {"digest", a.digest}});
  json obj{{"run_id", manifest.run_id},
           {"config", manifest.config},
           {"started", manifest.started},
           {"finished", manifest.finished},
           {"failed_questions", manifest.failed_questions},
           {"artifacts", std::move(artifacts)}};
  write_file(path, obj.dump(2) + "\n");
}

std::string format_fixed_half_even(double value, int places) {
  if (places < 0) throw ValidationError("negative decimal places");
  const bool negative = std::signbit(value) && value != 0.0;
  const double magnitude = std::abs(value);

  // Print well past the kept places, then decide the rounding direction from
  // the decimal digits. This dodges double-rounding: 0.5135 stored as
  // 0.51349999... still shows a tie at the 4th decimal.
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places + 12, magnitude);
  std::string s(buf);
  const size_t dot = s.find('.');
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);  // all digits
  const size_t int_len = dot;
  const size_t keep = int_len + static_cast<size_t>(places);

  std::string kept = digits.substr(0, keep);
  const std::string tail = digits.substr(keep);

  bool round_up = false;
  if (!tail.empty()) {
    if (tail[0] > '5') {
      round_up = true;
    } else if (tail[0] == '5') {
      const bool exact_half = tail.find_first_not_of('0', 1) == std::string::npos;
      if (exact_half) {
        const char last = kept.empty() ? '0' : kept.back();
        round_up = (last - '0') % 2 != 0;  // half to even
      } else {
        round_up = true;
      }
    }
  }
  if (round_up) {
    int i = static_cast<int>(kept.size()) - 1;
    for (; i >= 0; --i) {
      if (kept[static_cast<size_t>(i)] != '9') {
        ++kept[static_cast<size_t>(i)];
        break;
      }
      kept[static_cast<size_t>(i)] = '0';
    }
    if (i < 0) kept.insert(kept.begin(), '1');
  }

  const size_t out_int_len = kept.size() - static_cast<size_t>(places);
  std::string out = kept.substr(0, out_int_len);
  if (out.empty()) out = "0";
  if (places > 0) out += "." + kept.substr(out_int_len);
  if (negative && out.find_first_not_of("0.") != std::string::npos) out.insert(0, "-");
  return out;
}

namespace {

const std::vector<std::string>& table_conditions() {
  static const std::vector<std::string> kOrder = {"clean",    "punct10", "punct30",
                                                  "punct50",  "wikitypo", "r2ata"};
  return kOrder;
}

/// Maps a row's condition to its table column; adversarial-typo rows land in
/// the r2ata column whichever pipeline produced them.
std::string table_column(const std::string& condition) {
  if (condition == "ata") return "r2ata";
  return condition;
}

}  // namespace

void emit_model_table(const std::vector<MetricRow>& rows, const std::string& out_path) {
  std::vector<std::string> models;  // input order
  std::set<int> ns;
  // (model, n, column) -> acc_mean values across datasets
  std::map<std::string, std::map<int, std::map<std::string, std::vector<double>>>> cells;
  for (const MetricRow& r : rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end())
      models.push_back(r.model);
    ns.insert(r.n);
    cells[r.model][r.n][table_column(r.condition)].push_back(r.acc_mean);
  }

  std::ostringstream out;
  out << "model,n";
  for (const std::string& c : table_conditions()) out << ',' << c;
  out << ",avg\n";

  for (const std::string& model : models) {
    for (int n : ns) {
      auto mit = cells.find(model);
      if (mit == cells.end()) continue;
      auto nit = mit->second.find(n);
      if (nit == mit->second.end()) continue;
      out << model << ',' << n;
      double sum = 0.0;
      int present = 0;
      for (const std::string& c : table_conditions()) {
        auto cit = nit->second.find(c);
        if (cit == nit->second.end()) {
          out << ',';
          continue;
        }
        double mean = 0.0;
        for (double v : cit->second) mean += v;
        mean /= static_cast<double>(cit->second.size());
        out << ',' << format_fixed_half_even(mean, 3);
        sum += mean;
        ++present;
      }
      if (present == 0) out << ',';
      else out << ',' << format_fixed_half_even(sum / present, 3);
      out << '\n';
    }
  }
  write_file(out_path, out.str());
}

void emit_curve_data(const std::vector<MetricRow>& rows, const std::string& axis,
                     const std::string& out_path) {
  if (axis != "accuracy" && axis != "asr")
    throw ValidationError("curve axis must be \"accuracy\" or \"asr\"");

  // (condition, n) -> values (across models and datasets)
  std::map<std::string, std::map<int, std::vector<double>>> points;
  for (const MetricRow& r : rows) {
    if (axis == "accuracy") {
      points[r.condition][r.n].push_back(r.acc_mean);
    } else if (r.asr_mean) {
      points[r.condition][r.n].push_back(*r.asr_mean);
    }
  }

  // canonical condition order first, any extras alphabetically after
  std::vector<std::string> order;
  for (const std::string& c : table_conditions())
    if (points.count(c)) order.push_back(c);
  for (const auto& [c, _] : points)
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);

  auto mean_of = [](const std::vector<double>& vs) {
    double m = 0.0;
    for (double v : vs) m += v;
    return m / static_cast<double>(vs.size());
  };

  std::ostringstream out;
  out << "condition,n,value\n";
  std::map<int, std::vector<double>> across;  // n -> per-condition means
  for (const std::string& c : order) {
    for (const auto& [n, vs] : points[c]) {
      const double m = mean_of(vs);
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m);
      out << c << ',' << n << ',' << std::string_view(buf, static_cast<size_t>(ptr - buf))
          << '\n';
      across[n].push_back(m);
    }
  }
  for (const auto& [n, vs] : across) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), mean_of(vs));
    out << "all," << n << ',' << std::string_view(buf, static_cast<size_t>(ptr - buf)) << '\n';
  }
  write_file(out_path, out.str());
}

}  // namespace pforest

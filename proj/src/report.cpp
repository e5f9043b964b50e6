#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "amdprog/runner.hpp"

namespace amdprog {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Fixed display order: both scales' manual/mode/LR rows, then end-to-end.
const std::vector<std::pair<std::string, std::string>> kDisplayRows = {
    {"manual4", "4-category manual"},
    {"twophase_mode4", "4-category two-phase (mode)"},
    {"twophase_lr4", "4-category two-phase (LR)"},
    {"manual9", "9-step manual"},
    {"twophase_mode9", "9-step two-phase (mode)"},
    {"twophase_lr9", "9-step two-phase (LR)"},
    {"end_to_end", "end-to-end"},
};

std::string fmt_auc(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", mean, std);
  return buf;
}

std::string fmt_pct(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f±%.0f", mean * 100.0, std * 100.0);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // pad by display length; the ± sign is a 2-byte UTF-8 sequence
  std::size_t display = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) ++display;
  }
  std::string out = s;
  for (std::size_t i = display; i < width; ++i) out += ' ';
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Appends a per-cell CSV to the concatenated output, prefixing each data row
// with the predictor and cohort.
void concat_csv(std::ostringstream& out, const fs::path& path,
                const std::string& pred, const std::string& cohort,
                bool& header_done) {
  std::istringstream in(read_file(path));
  std::string line;
  bool past_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!past_header) {
      past_header = true;
      if (!header_done) {
        out << "predictor,cohort," << line << '\n';
        header_done = true;
      }
      continue;
    }
    out << pred << ',' << cohort << ',' << line << '\n';
  }
}

}  // namespace

void cmd_report(const fs::path& results_dir) {
  const fs::path metrics_path = results_dir / "metrics.json";
  if (!fs::exists(metrics_path)) {
    throw std::runtime_error("missing results: " + metrics_path.string());
  }
  json j = json::parse(read_file(metrics_path));
  const std::string hash = j.at("config_hash").get<std::string>();
  const auto predictors =
      j.at("config").at("predictors").get<std::vector<std::string>>();
  const auto cohorts =
      j.at("config").at("cohorts").get<std::vector<std::string>>();
  const json& agg = j.at("aggregate");

  // every (predictor, cohort) cell must be present
  std::vector<std::string> missing;
  for (const std::string& p : predictors) {
    for (const std::string& c : cohorts) {
      if (!agg.contains(p) || !agg.at(p).contains(c)) {
        missing.push_back(p + "/" + c);
      }
    }
  }
  if (!missing.empty()) {
    std::string what = "report: missing result cells:";
    for (const std::string& m : missing) what += " " + m;
    throw std::runtime_error(what);
  }

  // ---- flat CSV --------------------------------------------------------
  std::ostringstream csv;
  csv << "# config_hash " << hash << "\n";
  csv << "predictor,cohort,auc_mean,auc_std,sensitivity_mean,sensitivity_std,"
         "specificity_mean,specificity_std,q1_mean,q2_mean,q3_mean,q4_mean\n";
  for (const auto& [pred, label] : kDisplayRows) {
    if (std::find(predictors.begin(), predictors.end(), pred) == predictors.end()) {
      continue;
    }
    for (const std::string& c : cohorts) {
      const json& cell = agg.at(pred).at(c);
      csv << pred << ',' << c << ',' << cell.at("auc").at("mean").get<double>()
          << ',' << cell.at("auc").at("std").get<double>() << ','
          << cell.at("sensitivity").at("mean").get<double>() << ','
          << cell.at("sensitivity").at("std").get<double>() << ','
          << cell.at("specificity").at("mean").get<double>() << ','
          << cell.at("specificity").at("std").get<double>();
      for (int q = 0; q < 4; ++q) {
        csv << ',' << cell.at("quartiles")[q].at("mean").get<double>();
      }
      csv << '\n';
    }
  }
  write_file(results_dir / "table.csv", csv.str());

  // ---- text table ------------------------------------------------------
  constexpr std::size_t kName = 30, kCol = 12;
  std::ostringstream txt;
  txt << "# config_hash " << hash << "\n";
  txt << pad("", kName);
  for (const std::string& c : cohorts) {
    txt << "| " << pad(c, 3 * kCol) << ' ';
  }
  txt << '\n' << pad("predictor", kName);
  for (std::size_t i = 0; i < cohorts.size(); ++i) {
    txt << "| " << pad("AUC", kCol) << pad("sens%", kCol) << pad("spec%", kCol)
        << ' ';
  }
  txt << '\n';
  for (const auto& [pred, label] : kDisplayRows) {
    if (std::find(predictors.begin(), predictors.end(), pred) == predictors.end()) {
      continue;
    }
    txt << pad(label, kName);
    for (const std::string& c : cohorts) {
      const json& cell = agg.at(pred).at(c);
      txt << "| "
          << pad(fmt_auc(cell.at("auc").at("mean").get<double>(),
                         cell.at("auc").at("std").get<double>()),
                 kCol)
          << pad(fmt_pct(cell.at("sensitivity").at("mean").get<double>(),
                         cell.at("sensitivity").at("std").get<double>()),
                 kCol)
          << pad(fmt_pct(cell.at("specificity").at("mean").get<double>(),
                         cell.at("specificity").at("std").get<double>()),
                 kCol)
          << ' ';
    }
    txt << '\n';
  }
  write_file(results_dir / "table.txt", txt.str());

  // ---- concatenated ROC / quartile exports -----------------------------
  std::ostringstream roc_all, quart_all;
  roc_all << "# config_hash " << hash << "\n";
  quart_all << "# config_hash " << hash << "\n";
  bool roc_header = false, quart_header = false;
  for (const auto& [pred, label] : kDisplayRows) {
    if (std::find(predictors.begin(), predictors.end(), pred) == predictors.end()) {
      continue;
    }
    for (const std::string& c : cohorts) {
      const fs::path roc = results_dir / ("roc_" + pred + "_" + c + ".csv");
      const fs::path quart =
          results_dir / ("quartiles_" + pred + "_" + c + ".csv");
      if (!fs::exists(roc) || !fs::exists(quart)) {
        throw std::runtime_error("report: missing CSVs for cell " + pred + "/" + c);
      }
      concat_csv(roc_all, roc, pred, c, roc_header);
      concat_csv(quart_all, quart, pred, c, quart_header);
    }
  }
  write_file(results_dir / "roc_all.csv", roc_all.str());
  write_file(results_dir / "quartiles_all.csv", quart_all.str());
}

}  // namespace amdprog

#include "amdprog/dataset_io.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace amdprog {

namespace {

using nlohmann::json;

constexpr const char* kCsvHeader =
    "patient_id,eye,day,grade4,step,left_img,right_img";

struct RawRecord {
  VisitRecord visit;
  std::size_t line = 0;
};

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + what);
}

VisitRecord record_from_json(const json& j, std::size_t line) {
  VisitRecord v;
  auto require = [&](const char* field) -> const json& {
    auto it = j.find(field);
    if (it == j.end()) fail_line(line, std::string("missing field '") + field + "'");
    return *it;
  };
  try {
    v.patient_id = require("patient_id").get<std::string>();
    v.laterality = laterality_from_string(require("eye").get<std::string>());
    v.visit_day = require("day").get<int>();
    v.grade4 = grade4_from_string(require("grade4").get<std::string>());
    v.step12.value = require("step").get<int>();
    if (auto it = j.find("left_img"); it != j.end() && !it->is_null()) {
      v.left_img = it->get<std::string>();
    }
    if (auto it = j.find("right_img"); it != j.end() && !it->is_null()) {
      v.right_img = it->get<std::string>();
    }
  } catch (const json::exception& e) {
    fail_line(line, e.what());
  } catch (const std::invalid_argument& e) {
    fail_line(line, e.what());
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

VisitRecord record_from_csv(const std::string& text, std::size_t line) {
  auto fields = split_csv_line(text);
  if (fields.size() != 7) {
    fail_line(line, "expected 7 comma-separated fields, got " +
                        std::to_string(fields.size()));
  }
  VisitRecord v;
  try {
    v.patient_id = fields[0];
    v.laterality = laterality_from_string(fields[1]);
    v.visit_day = std::stoi(fields[2]);
    v.grade4 = grade4_from_string(fields[3]);
    v.step12.value = std::stoi(fields[4]);
  } catch (const std::invalid_argument& e) {
    fail_line(line, e.what());
  } catch (const std::out_of_range&) {
    fail_line(line, "numeric field out of range");
  }
  if (!fields[5].empty()) v.left_img = fields[5];
  if (!fields[6].empty()) v.right_img = fields[6];
  return v;
}

Dataset assemble(std::vector<RawRecord> records) {
  // Group by eye; reject duplicate (patient, eye, day) before sorting so the
  // error can name the offending input line.
  std::map<EyeKey, std::vector<RawRecord>> by_eye;
  std::map<std::tuple<std::string, Laterality, int>, std::size_t> seen;
  for (RawRecord& r : records) {
    auto key = std::make_tuple(r.visit.patient_id, r.visit.laterality,
                               r.visit.visit_day);
    auto [it, inserted] = seen.emplace(key, r.line);
    if (!inserted) {
      fail_line(r.line, "duplicate visit for " + r.visit.patient_id + "/" +
                            to_string(r.visit.laterality) + " day " +
                            std::to_string(r.visit.visit_day) +
                            " (first at line " + std::to_string(it->second) +
                            ")");
    }
    by_eye[{r.visit.patient_id, r.visit.laterality}].push_back(std::move(r));
  }
  std::vector<EyeSeries> eyes;
  eyes.reserve(by_eye.size());
  for (auto& [key, recs] : by_eye) {
    std::sort(recs.begin(), recs.end(), [](const RawRecord& a, const RawRecord& b) {
      return a.visit.visit_day < b.visit.visit_day;
    });
    EyeSeries series{key.patient_id, key.laterality, {}};
    series.visits.reserve(recs.size());
    for (RawRecord& r : recs) series.visits.push_back(std::move(r.visit));
    eyes.push_back(std::move(series));
  }
  return Dataset(std::move(eyes));
}

json record_to_json(const VisitRecord& v) {
  json j;
  j["patient_id"] = v.patient_id;
  j["eye"] = to_string(v.laterality);
  j["day"] = v.visit_day;
  j["grade4"] = to_string(v.grade4);
  j["step"] = v.step12.value;
  if (v.left_img) j["left_img"] = *v.left_img;
  if (v.right_img) j["right_img"] = *v.right_img;
  return j;
}

}  // namespace

RecordFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? RecordFormat::Csv : RecordFormat::Jsonl;
}

Dataset ingest(const std::filesystem::path& path, RecordFormat format) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open record file " + path.string());
  }
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (format == RecordFormat::Csv && !header_seen) {
      if (line != kCsvHeader) {
        fail_line(line_no, std::string("expected CSV header '") + kCsvHeader + "'");
      }
      header_seen = true;
      continue;
    }
    if (format == RecordFormat::Jsonl) {
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) fail_line(line_no, "invalid JSON");
      records.push_back({record_from_json(j, line_no), line_no});
    } else {
      records.push_back({record_from_csv(line, line_no), line_no});
    }
  }
  if (format == RecordFormat::Csv && !header_seen) {
    throw std::runtime_error("CSV file " + path.string() + " has no header row");
  }
  return assemble(std::move(records));
}

Dataset ingest(const std::filesystem::path& path) {
  return ingest(path, format_from_path(path));
}

Dataset ingest_jsonl_string(const std::string& text) {
  std::vector<RawRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail_line(line_no, "invalid JSON");
    records.push_back({record_from_json(j, line_no), line_no});
  }
  return assemble(std::move(records));
}

std::string export_jsonl_string(const Dataset& d) {
  std::string out;
  for (const EyeSeries& eye : d.eyes()) {
    for (const VisitRecord& v : eye.visits) {
      out += record_to_json(v).dump();
      out += '\n';
    }
  }
  return out;
}

void export_jsonl(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << export_jsonl_string(d);
}

void export_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const EyeSeries& eye : d.eyes()) {
    for (const VisitRecord& v : eye.visits) {
      out << v.patient_id << ',' << to_string(v.laterality) << ','
          << v.visit_day << ',' << to_string(v.grade4) << ','
          << v.step12.value << ',' << v.left_img.value_or("") << ','
          << v.right_img.value_or("") << '\n';
    }
  }
}

}  // namespace amdprog

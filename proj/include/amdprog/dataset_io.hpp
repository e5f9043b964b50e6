#pragma once

// Record-file ingestion and export.
//
// JSON Lines is the canonical format, one visit per line:
//   {"patient_id": "P0001", "eye": "OD", "day": 0, "grade4": "early",
//    "step": 3, "left_img": "images/...png", "right_img": "images/...png"}
// CSV is accepted with the fixed header
//   patient_id,eye,day,grade4,step,left_img,right_img
// Export is canonical: records sorted by (patient_id, eye, day), keys in
// alphabetical order, so ingest . export round-trips byte-identically.

#include <filesystem>
#include <string>

#include "amdprog/cohort.hpp"

namespace amdprog {

enum class RecordFormat { Jsonl, Csv };

// Picks Jsonl unless the extension is .csv.
RecordFormat format_from_path(const std::filesystem::path& path);

// Throws std::runtime_error naming the line and field on malformed input,
// and std::invalid_argument on invariant violations (duplicate visits,
// inconsistent grades). Visits are sorted by day per eye.
Dataset ingest(const std::filesystem::path& path, RecordFormat format);
Dataset ingest(const std::filesystem::path& path);

Dataset ingest_jsonl_string(const std::string& text);

std::string export_jsonl_string(const Dataset& d);
void export_jsonl(const Dataset& d, const std::filesystem::path& path);
void export_csv(const Dataset& d, const std::filesystem::path& path);

}  // namespace amdprog

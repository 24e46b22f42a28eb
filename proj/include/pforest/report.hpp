#pragma once

#include <string>
#include <vector>

#include "pforest/jsonl.hpp"
#include "pforest/metrics.hpp"

namespace pforest {

struct ArtifactRef {
  std::string path;
  std::string digest;  // fnv1a64 of the file bytes
};

/// Provenance record written next to a sampling run: enough to re-derive or
/// audit every artifact the run produced.
struct RunManifest {
  std::string run_id;  // digest of the run configuration
  json config;
  std::string started;
  std::string finished;
  std::vector<std::string> failed_questions;
  std::vector<ArtifactRef> artifacts;
};

std::string make_run_id(const json& config);
ArtifactRef fingerprint_file(const std::string& path);
void write_manifest(const std::string& path, const RunManifest& manifest);

/// Fixed-point decimal with banker's rounding (round half to even) on the
/// last kept digit, e.g. 0.5135 -> "0.514", 0.5145 -> "0.514".
std::string format_fixed_half_even(double value, int places);

/// Condition-by-n accuracy table, one row per (model, n):
///   model,n,clean,punct10,punct30,punct50,wikitypo,r2ata,avg
/// Cells average acc_mean across datasets; "ata" rows fill the r2ata column.
/// avg is the mean of the present condition cells, all printed to 3 decimals.
/// Models keep input order; n ascends; absent cells stay empty.
void emit_model_table(const std::vector<MetricRow>& rows, const std::string& out_path);

/// Long-form curve points: condition,n,value (3 columns, no gaps), ordered by
/// condition then n, followed by "all" rows averaging the per-condition values
/// at each n. axis selects acc_mean or asr_mean; rows without the requested
/// value are skipped, and input with none yields just the header line.
void emit_curve_data(const std::vector<MetricRow>& rows, const std::string& axis,
                     const std::string& out_path);

}  // namespace pforest

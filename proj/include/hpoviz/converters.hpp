#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hpoviz/run_model.hpp"

namespace hpoviz {

namespace fs = std::filesystem;

enum class RunFormat { Tabular, Unknown };

inline constexpr const char* kMetaFile = "meta.json";
inline constexpr const char* kSpaceFile = "space.json";
inline constexpr const char* kConfigsFile = "configs.json";
inline constexpr const char* kTrialsFile = "trials.jsonl";

/// Tabular iff the directory holds the four canonical files. Throws an Io
/// error when the path does not exist or cannot be listed.
RunFormat detect_format(const fs::path& path);

Run load_tabular(const fs::path& path);

/// Writes the four canonical files into `path` (created if missing). Refuses
/// runs that fail validation.
void write_tabular(const Run& run, const fs::path& path);

struct FileStamp {
  std::uintmax_t size = 0;
  fs::file_time_type mtime{};

  bool operator==(const FileStamp&) const = default;
};

/// Poll state of an on-disk run. Owned by exactly one refresher.
struct RunSource {
  fs::path path;
  RunFormat format = RunFormat::Tabular;
  std::map<std::string, FileStamp> watermark;
  std::uintmax_t trials_offset = 0;  // bytes of trials.jsonl already parsed
  std::size_t trials_lines = 0;      // lines already parsed
  bool trials_terminated = true;     // parsed prefix ends with a newline
};

struct OpenedRun {
  RunPtr run;
  RunSource source;
};

/// Detects the format, loads the run and records the watermark.
OpenedRun open_run(const fs::path& path);

struct RefreshResult {
  RunPtr run;
  bool changed = false;
};

/// Picks up new trials of a run that is still being written. Appended lines
/// are parsed incrementally; any other change triggers a full reload.
/// `previous` is never modified; `source` advances its watermark.
RefreshResult refresh(RunSource& source, const RunPtr& previous);

/// Flat trial record with inline configuration values.
struct TrialRecord {
  Config config;
  double budget = 0.0;
  std::optional<std::int64_t> seed;
  std::map<std::string, std::optional<double>> objectives;
  TrialStatus status = TrialStatus::Success;
  double start_time = 0.0;
  std::optional<double> end_time;
};

/// Builds a run from in-memory records. Identical configurations are merged and
/// assigned ids "c1", "c2", ... in first-seen order.
Run ingest_records(std::string name, ConfigurationSpace space, std::vector<Objective> objectives,
                   std::vector<double> budgets, const std::vector<TrialRecord>& records,
                   std::map<std::string, std::string> meta = {});

}  // namespace hpoviz

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "socdbg/judge.hpp"

namespace socdbg {

/// 100 * num / den rounded half-up to one decimal, computed on integers so
/// that e.g. 2/3 gives exactly 66.7. Zero when den is zero.
double percent(long num, long den);
std::string format_percent(double pct);

struct BenchmarkRow {
  std::string config_id;
  bool reasoning = false;
  long samples = 0;
  long total_rt_steps = 0;
  long valid_rts = 0;
  long valid_convs = 0;
  long turns = 0;  // aligned Teacher turns over all generated conversations
  long grounded_turns = 0;
  double pct_valid_rts = 0;
  double pct_valid_convs = 0;
  double pct_grounded_turns = 0;

  bool operator==(const BenchmarkRow&) const = default;
};

Json to_json(const BenchmarkRow& row);
BenchmarkRow benchmark_row_from_json(const Json& j);

/// Everything one configuration produced for a corpus.
struct ConfigResults {
  std::string config_id;
  bool reasoning = false;
  std::vector<std::string> sample_ids;
  std::vector<ReasoningTrajectory> trajectories;
  std::vector<Conversation> conversations;
  std::vector<RtVerdict> rt_verdicts;
  std::vector<TurnVerdict> turn_verdicts;
};

/// Denominators are the corpus size for RTs and conversations; a failed
/// generation or judgement counts as invalid. Throws PreconditionError when
/// an artifact or verdict is missing, duplicated, or belongs elsewhere.
BenchmarkRow aggregate(const ConfigResults& results);

struct Label {
  std::string item_id;
  bool valid = false;
};

struct Agreement {
  long matches = 0;
  long n = 0;
  double rate = 0;

  bool operator==(const Agreement&) const = default;
};

std::vector<Label> labels_from_verdicts(const VerdictSet& verdicts);
/// JSONL records {"item_id": ..., "valid": bool}.
std::vector<Label> load_labels(const std::filesystem::path& path);

/// Throws PreconditionError on duplicate ids or when the two sets name
/// different items. With `restrict_to_human`, judge items the human did not
/// label are ignored instead.
Agreement agreement(std::span<const Label> judge, std::span<const Label> human, bool restrict_to_human = false);

struct DatasetStats {
  long problems = 0;
  long solutions = 0;
  long misconceptions = 0;
  long triplets = 0;
  long handwritten_rts = 0;
  long handwritten_steps = 0;
  long llm_configs = 0;
  long llm_steps = 0;
  std::map<std::string, long> steps_by_config;

  bool operator==(const DatasetStats&) const = default;
};

inline constexpr std::string_view kHandwrittenConfig = "handwritten";

/// Trajectories whose config_id is "handwritten" count as handwritten; failed
/// ones contribute no steps.
DatasetStats dataset_stats(std::span<const SolutionRecord> solutions, std::span<const Misconception> misconceptions,
                           std::span<const DebugSample> samples, std::span<const ReasoningTrajectory> trajectories);
Json to_json(const DatasetStats& s);
std::string render_stats_table(const DatasetStats& s);

struct BenchmarkOptions {
  std::vector<std::string> configs;
  std::string judge_config;
  std::filesystem::path out_dir;  // per-config artifacts land in out_dir/<config>/
  int jobs = 4;
};

struct BenchmarkReport {
  std::string judge_config_id;
  std::vector<BenchmarkRow> rows;
};

Json to_json(const BenchmarkReport& r);
BenchmarkReport benchmark_report_from_json(const Json& j);
std::string render_report_table(const BenchmarkReport& r);

struct BenchmarkRun {
  BenchmarkReport report;
  Json manifest;
};

/// Generates, judges and aggregates every configuration over the corpus.
/// Per-sample failures are recorded in the artifacts and never abort the run.
BenchmarkRun run_benchmark(Gateway& gateway, std::span<const DebugSample> corpus, const BenchmarkOptions& options);

/// Artifacts one configuration produced, as stored under out_dir/<config>/.
void save_config_results(const ConfigResults& results, const std::filesystem::path& dir);
ConfigResults load_config_results(const std::filesystem::path& dir, const std::string& config_id, bool reasoning,
                                  std::vector<std::string> sample_ids);

/// Recomputes the report from a manifest and the artifacts it references,
/// checking their digests.
BenchmarkReport report_from_manifest(const std::filesystem::path& manifest_path);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace socdbg

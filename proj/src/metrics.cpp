#include "socdbg/metrics.hpp"

#include <cstdio>
#include <set>

#include "socdbg/jsonl.hpp"
#include "socdbg/parallel.hpp"

namespace socdbg {

namespace {

std::string label(int k) { return "A." + std::to_string(k); }

template <class T, class Key>
std::map<std::string, const T*> index_by_sample(const std::vector<T>& items, const std::set<std::string>& ids,
                                                 const char* what, Key key) {
  std::map<std::string, const T*> out;
  for (const auto& item : items) {
    const std::string& sample = key(item);
    if (!ids.count(sample)) throw PreconditionError(std::string(what) + " for unknown sample " + sample);
    if (!out.emplace(sample, &item).second) throw PreconditionError(std::string("duplicate ") + what + " for " + sample);
  }
  return out;
}

void check_config(const std::string& actual, const std::string& expected, const char* what,
                  const std::string& sample) {
  if (actual != expected)
    throw PreconditionError(std::string(what) + " for " + sample + " was produced by " + actual + ", not " + expected);
}

std::string pad(const std::string& s, std::size_t width, bool right) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return right ? fill + s : s + fill;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows, const std::vector<bool>& right) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) line += "  ";
      line += pad(rows[i][c], width[c], right[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  return out;
}

std::string with_commas(long n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

}  // namespace

double percent(long num, long den) {
  if (den <= 0) return 0.0;
  if (num < 0 || num > den) throw PreconditionError("percentage of " + std::to_string(num) + "/" + std::to_string(den));
  const long long tenths = (2000LL * num + den) / (2LL * den);
  return static_cast<double>(tenths) / 10.0;
}

std::string format_percent(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", pct);
  return buf;
}

Json to_json(const BenchmarkRow& r) {
  return Json{{"config_id", r.config_id},
              {"reasoning", r.reasoning},
              {"samples", r.samples},
              {"total_rt_steps", r.total_rt_steps},
              {"valid_rts", r.valid_rts},
              {"valid_convs", r.valid_convs},
              {"turns", r.turns},
              {"grounded_turns", r.grounded_turns},
              {"pct_valid_rts", r.pct_valid_rts},
              {"pct_valid_convs", r.pct_valid_convs},
              {"pct_grounded_turns", r.pct_grounded_turns}};
}

BenchmarkRow benchmark_row_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  BenchmarkRow row;
  row.config_id = r.str("config_id");
  row.reasoning = r.boolean("reasoning");
  row.samples = r.integer("samples");
  row.total_rt_steps = r.integer("total_rt_steps");
  row.valid_rts = r.integer("valid_rts");
  row.valid_convs = r.integer("valid_convs");
  row.turns = r.integer("turns");
  row.grounded_turns = r.integer("grounded_turns");
  row.pct_valid_rts = r.opt_number("pct_valid_rts").value_or(0);
  row.pct_valid_convs = r.opt_number("pct_valid_convs").value_or(0);
  row.pct_grounded_turns = r.opt_number("pct_grounded_turns").value_or(0);
  r.finish();
  if (row.pct_valid_rts != percent(row.valid_rts, row.samples) ||
      row.pct_valid_convs != percent(row.valid_convs, row.samples) ||
      row.pct_grounded_turns != percent(row.grounded_turns, row.turns))
    throw DataError("pct_valid_rts", "percentages disagree with the counts");
  return row;
}

BenchmarkRow aggregate(const ConfigResults& r) {
  const std::set<std::string> ids(r.sample_ids.begin(), r.sample_ids.end());
  if (ids.size() != r.sample_ids.size()) throw PreconditionError("duplicate sample ids in the corpus");

  auto rts = index_by_sample(r.trajectories, ids, "trajectory",
                             [](const ReasoningTrajectory& t) -> const std::string& { return t.sample_id; });
  auto convs = index_by_sample(r.conversations, ids, "conversation",
                               [](const Conversation& c) -> const std::string& { return c.sample_id; });
  auto rt_verdicts = index_by_sample(r.rt_verdicts, ids, "RT verdict",
                                     [](const RtVerdict& v) -> const std::string& { return v.meta.sample_id; });
  std::map<std::string, std::map<int, const TurnVerdict*>> turn_verdicts;
  for (const auto& v : r.turn_verdicts) {
    check_config(v.meta.config_id, r.config_id, "turn verdict", v.meta.sample_id);
    if (!turn_verdicts[v.meta.sample_id].emplace(v.step, &v).second)
      throw PreconditionError("duplicate turn verdict for " + v.meta.sample_id + " " + label(v.step));
  }

  BenchmarkRow row;
  row.config_id = r.config_id;
  row.reasoning = r.reasoning;
  row.samples = static_cast<long>(ids.size());
  for (const auto& id : r.sample_ids) {
    auto rt = rts.find(id);
    if (rt == rts.end()) throw PreconditionError("no trajectory for " + id);
    check_config(rt->second->meta.config_id, r.config_id, "trajectory", id);
    auto verdict = rt_verdicts.find(id);
    if (rt->second->ok()) {
      row.total_rt_steps += static_cast<long>(rt->second->steps.size());
      if (verdict == rt_verdicts.end()) throw PreconditionError("no RT verdict for " + id);
      check_config(verdict->second->meta.config_id, r.config_id, "RT verdict", id);
      if (verdict->second->valid && !verdict->second->meta.error) ++row.valid_rts;
    } else if (verdict != rt_verdicts.end()) {
      throw PreconditionError("RT verdict for the failed trajectory of " + id);
    }

    auto conv = convs.find(id);
    if (conv == convs.end()) throw PreconditionError("no conversation for " + id);
    check_config(conv->second->meta.config_id, r.config_id, "conversation", id);
    auto judged = turn_verdicts.find(id);
    if (!conv->second->ok()) {
      if (judged != turn_verdicts.end())
        throw PreconditionError("turn verdicts for the failed conversation of " + id);
      continue;
    }
    const auto& turns = conv->second->turns;
    const auto aligned = aligned_teacher_turns(turns);
    std::size_t grounded = 0;
    for (std::size_t i : aligned) {
      const int step = *turns[i].aligned_step;
      const TurnVerdict* v = nullptr;
      if (judged != turn_verdicts.end()) {
        auto it = judged->second.find(step);
        if (it != judged->second.end()) v = it->second;
      }
      if (!v) throw PreconditionError("no turn verdict for " + id + " " + label(step));
      if (v->valid && !v->meta.error) ++grounded;
    }
    if (judged != turn_verdicts.end() && judged->second.size() != aligned.size())
      throw PreconditionError("turn verdicts for " + id + " name steps the conversation does not align");
    row.turns += static_cast<long>(aligned.size());
    row.grounded_turns += static_cast<long>(grounded);
    if (!aligned.empty() && grounded == aligned.size()) ++row.valid_convs;
  }
  for (const auto& [id, judged] : turn_verdicts)
    if (!ids.count(id)) throw PreconditionError("turn verdict for unknown sample " + id);

  row.pct_valid_rts = percent(row.valid_rts, row.samples);
  row.pct_valid_convs = percent(row.valid_convs, row.samples);
  row.pct_grounded_turns = percent(row.grounded_turns, row.turns);
  return row;
}

std::vector<Label> labels_from_verdicts(const VerdictSet& verdicts) {
  std::vector<Label> out;
  for (const auto& v : verdicts.rt) out.push_back({item_id(v), v.valid && !v.meta.error});
  for (const auto& v : verdicts.turns) out.push_back({item_id(v), v.valid && !v.meta.error});
  return out;
}

std::vector<Label> load_labels(const std::filesystem::path& path) {
  return jsonl::read_as<Label>(path, [](const Json& j) {
    jsonl::ObjectReader r(j);
    Label l{r.str("item_id"), r.boolean("valid")};
    r.finish();
    return l;
  });
}

Agreement agreement(std::span<const Label> judge, std::span<const Label> human, bool restrict_to_human) {
  std::map<std::string, bool> by_id;
  for (const auto& l : judge)
    if (!by_id.emplace(l.item_id, l.valid).second) throw PreconditionError("duplicate judge label " + l.item_id);
  std::set<std::string> seen;
  Agreement out;
  for (const auto& l : human) {
    if (!seen.insert(l.item_id).second) throw PreconditionError("duplicate human label " + l.item_id);
    auto it = by_id.find(l.item_id);
    if (it == by_id.end()) throw PreconditionError("no judge verdict for " + l.item_id);
    ++out.n;
    if (it->second == l.valid) ++out.matches;
  }
  if (!restrict_to_human)
    for (const auto& [id, valid] : by_id)
      if (!seen.count(id)) throw PreconditionError("no human label for " + id);
  out.rate = percent(out.matches, out.n);
  return out;
}

DatasetStats dataset_stats(std::span<const SolutionRecord> solutions, std::span<const Misconception> misconceptions,
                           std::span<const DebugSample> samples, std::span<const ReasoningTrajectory> trajectories) {
  DatasetStats s;
  std::set<std::string> problems;
  for (const auto& sol : solutions) problems.insert(sol.problem_id);
  s.problems = static_cast<long>(problems.size());
  s.solutions = static_cast<long>(solutions.size());
  s.misconceptions = static_cast<long>(misconceptions.size());
  s.triplets = static_cast<long>(samples.size());
  for (const auto& rt : trajectories) {
    const long steps = rt.ok() ? static_cast<long>(rt.steps.size()) : 0;
    if (rt.meta.config_id == kHandwrittenConfig) {
      ++s.handwritten_rts;
      s.handwritten_steps += steps;
    } else {
      s.steps_by_config[rt.meta.config_id] += steps;
      s.llm_steps += steps;
    }
  }
  s.llm_configs = static_cast<long>(s.steps_by_config.size());
  return s;
}

Json to_json(const DatasetStats& s) {
  Json by_config = Json::object();
  for (const auto& [id, n] : s.steps_by_config) by_config[id] = n;
  return Json{{"problems", s.problems},
              {"solutions", s.solutions},
              {"misconceptions", s.misconceptions},
              {"triplets", s.triplets},
              {"handwritten", {{"trajectories", s.handwritten_rts}, {"rt_steps", s.handwritten_steps}}},
              {"llm_generated", {{"configurations", s.llm_configs}, {"rt_steps", s.llm_steps}}},
              {"rt_steps_by_config", by_config}};
}

std::string render_stats_table(const DatasetStats& s) {
  return render_table({{"Component", "Count"},
                       {"Problems", with_commas(s.problems)},
                       {"Solutions", with_commas(s.solutions)},
                       {"Misconceptions", with_commas(s.misconceptions)},
                       {"<Problem, Solution, Misconception> triplets", with_commas(s.triplets)},
                       {"Handwritten reasoning trajectories", with_commas(s.handwritten_rts)},
                       {"Handwritten RT steps", with_commas(s.handwritten_steps)},
                       {"LLM configurations", with_commas(s.llm_configs)},
                       {"LLM-generated RT steps", with_commas(s.llm_steps)}},
                      {false, true});
}

Json to_json(const BenchmarkReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) rows.push_back(to_json(row));
  return Json{{"schema_version", kSchemaVersion}, {"judge_config_id", r.judge_config_id}, {"rows", rows}};
}

BenchmarkReport benchmark_report_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  if (r.integer("schema_version") != kSchemaVersion) throw DataError("schema_version", "unsupported version");
  BenchmarkReport out;
  out.judge_config_id = r.str("judge_config_id");
  const Json& rows = r.any("rows");
  if (!rows.is_array()) throw DataError("rows", "expected an array");
  for (const auto& row : rows) out.rows.push_back(benchmark_row_from_json(row));
  r.finish();
  return out;
}

std::string render_report_table(const BenchmarkReport& r) {
  std::vector<std::vector<std::string>> rows = {
      {"Configuration", "Reasoning", "RT Steps", "% Valid RTs", "% Valid Convs", "% Grounded Turns"}};
  for (const auto& row : r.rows)
    rows.push_back({row.config_id, row.reasoning ? "yes" : "no", with_commas(row.total_rt_steps),
                    format_percent(row.pct_valid_rts), format_percent(row.pct_valid_convs),
                    format_percent(row.pct_grounded_turns)});
  return render_table(rows, {false, false, true, true, true, true});
}

void save_config_results(const ConfigResults& results, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_trajectories(results.trajectories, dir / "trajectories.jsonl");
  save_conversations(results.conversations, dir / "conversations.jsonl");
  save_verdicts({results.rt_verdicts, results.turn_verdicts}, dir / "verdicts.jsonl");
}

ConfigResults load_config_results(const std::filesystem::path& dir, const std::string& config_id, bool reasoning,
                                  std::vector<std::string> sample_ids) {
  ConfigResults r;
  r.config_id = config_id;
  r.reasoning = reasoning;
  r.sample_ids = std::move(sample_ids);
  r.trajectories = load_trajectories(dir / "trajectories.jsonl");
  r.conversations = load_conversations(dir / "conversations.jsonl");
  auto verdicts = verdicts_from_jsonl(dir / "verdicts.jsonl");
  r.rt_verdicts = std::move(verdicts.rt);
  r.turn_verdicts = std::move(verdicts.turns);
  return r;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(jsonl::read_file(path)); }

namespace {

struct SampleResult {
  ReasoningTrajectory rt;
  Conversation conversation;
  std::optional<RtVerdict> rt_verdict;
  std::vector<TurnVerdict> turn_verdicts;
};

SampleResult run_sample(Gateway& gateway, const DebugSample& sample, const std::string& config,
                        const std::string& judge) {
  SampleResult out;
  out.rt = try_generate_rt(gateway, sample, config);
  out.conversation = try_generate_conversation(gateway, sample, out.rt, config);
  if (out.rt.ok()) out.rt_verdict = try_judge_rt(gateway, sample, out.rt, judge);
  if (out.conversation.ok())
    out.turn_verdicts = judge_conversation(gateway, sample, out.rt, out.conversation, judge, 1);
  return out;
}

}  // namespace

BenchmarkRun run_benchmark(Gateway& gateway, std::span<const DebugSample> corpus, const BenchmarkOptions& options) {
  if (options.jobs < 1) throw PreconditionError("jobs must be at least 1");
  const ModelConfig& judge = gateway.registry().find(options.judge_config);
  std::vector<std::string> ids;
  for (const auto& s : corpus) ids.push_back(s.id);

  BenchmarkRun run;
  run.report.judge_config_id = judge.config_id;
  Json configs = Json::array();
  Json generations = Json::array();
  Json artifacts = Json::array();
  for (const auto& config_id : options.configs) {
    const ModelConfig& config = gateway.registry().find(config_id);
    configs.push_back(to_json(config));

    std::vector<SampleResult> results(corpus.size());
    parallel_for(corpus.size(), options.jobs,
                 [&](std::size_t i) { results[i] = run_sample(gateway, corpus[i], config_id, judge.config_id); });

    ConfigResults cr;
    cr.config_id = config_id;
    cr.reasoning = config.reasoning_enabled;
    cr.sample_ids = ids;
    for (auto& r : results) {
      generations.push_back({{"config_id", config_id},
                             {"sample_id", r.rt.sample_id},
                             {"rt_ok", r.rt.ok()},
                             {"conversation_ok", r.conversation.ok()}});
      cr.trajectories.push_back(std::move(r.rt));
      cr.conversations.push_back(std::move(r.conversation));
      if (r.rt_verdict) cr.rt_verdicts.push_back(std::move(*r.rt_verdict));
      for (auto& v : r.turn_verdicts) cr.turn_verdicts.push_back(std::move(v));
    }
    const auto dir = options.out_dir / config_id;
    save_config_results(cr, dir);
    for (const char* name : {"trajectories.jsonl", "conversations.jsonl", "verdicts.jsonl"})
      artifacts.push_back({{"config_id", config_id},
                           {"path", config_id + "/" + name},
                           {"sha256", sha256_file(dir / name)}});
    run.report.rows.push_back(aggregate(cr));
  }

  run.manifest = Json{{"schema_version", kSchemaVersion},
                      {"judge_config", to_json(judge)},
                      {"prompt_versions",
                       {{"rt", rt_prompt_version()},
                        {"conversation", sc_prompt_version()},
                        {"judge_rt", judge_rt_prompt_version()},
                        {"judge_turn", judge_turn_prompt_version()}}},
                      {"configurations", configs},
                      {"retry", {{"seed", gateway.retry_policy().seed},
                                 {"max_attempts", gateway.retry_policy().max_attempts}}},
                      {"sample_ids", ids},
                      {"artifact_root", options.out_dir.string()},
                      {"artifacts", artifacts},
                      {"generations", generations}};
  return run;
}

BenchmarkReport report_from_manifest(const std::filesystem::path& manifest_path) {
  const Json manifest = Json::parse(jsonl::read_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) throw DataError("", "manifest is not a JSON object");
  try {
    std::filesystem::path root = manifest.at("artifact_root").get<std::string>();
    if (root.is_relative()) root = manifest_path.parent_path() / root;
    for (const auto& a : manifest.at("artifacts")) {
      const auto path = root / a.at("path").get<std::string>();
      if (sha256_file(path) != a.at("sha256").get<std::string>())
        throw DataError("artifacts", path.string() + " changed since the run");
    }
    const auto ids = manifest.at("sample_ids").get<std::vector<std::string>>();
    BenchmarkReport report;
    report.judge_config_id = manifest.at("judge_config").at("config_id").get<std::string>();
    for (const auto& c : manifest.at("configurations")) {
      const auto id = c.at("config_id").get<std::string>();
      report.rows.push_back(aggregate(load_config_results(root / id, id, c.at("reasoning_enabled").get<bool>(), ids)));
    }
    return report;
  } catch (const Json::exception& e) {
    throw DataError("", std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace socdbg

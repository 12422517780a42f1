#include "socdbg/cli.hpp"

#include <CLI11.hpp>

#include <set>
#include <sstream>

#include "socdbg/describe.hpp"
#include "socdbg/execution.hpp"
#include "socdbg/jsonl.hpp"
#include "socdbg/pairing.hpp"
#include "socdbg/parallel.hpp"
#include "socdbg/service.hpp"

namespace socdbg {

namespace {

struct Globals {
  std::string replay;
  std::string record;
  std::string models;
  int jobs = 4;
  std::uint64_t seed = 0;
};

class Session {
 public:
  explicit Session(const Globals& g) : globals_(g) {
    registry_ = g.models.empty() ? ModelRegistry::builtin() : ModelRegistry::load(g.models);
  }

  const ModelRegistry& registry() const { return registry_; }

  /// Builds the gateway for `config_ids`. Outside replay mode every provider
  /// involved must have its key set.
  Gateway& gateway(const std::vector<std::string>& config_ids) {
    for (const auto& id : config_ids) registry_.find(id);
    if (!gateway_) {
      std::shared_ptr<Transport> transport;
      if (!globals_.replay.empty()) {
        transport = std::make_shared<ReplayTransport>(std::filesystem::path(globals_.replay));
      } else {
        check_keys(config_ids);
        transport = std::make_shared<HttpTransport>();
      }
      if (!globals_.record.empty())
        transport = std::make_shared<RecordingTransport>(transport, std::filesystem::path(globals_.record));
      RetryPolicy retry;
      retry.seed = globals_.seed;
      gateway_ = std::make_unique<Gateway>(transport, registry_, retry, std::max(globals_.jobs, 1));
    }
    return *gateway_;
  }

 private:
  void check_keys(const std::vector<std::string>& config_ids) const {
    const auto keys = HttpTransport::env_keys();
    std::set<std::string> missing;
    for (const auto& id : config_ids) {
      const Provider p = registry_.find(id).provider;
      if (!keys(p)) missing.insert(std::string(HttpTransport::key_variable(p)) + " (for " + id + ")");
    }
    if (missing.empty()) return;
    std::string msg = "live mode needs provider credentials; set";
    for (const auto& m : missing) msg += " " + m;
    throw Error(msg + ", or pass --replay <cassette> to run offline");
  }

  Globals globals_;
  ModelRegistry registry_;
  std::unique_ptr<Gateway> gateway_;
};

template <class T>
std::map<std::string, const T*> by_sample(const std::vector<T>& items, const char* what) {
  std::map<std::string, const T*> out;
  for (const auto& item : items)
    if (!out.emplace(item.sample_id, &item).second) throw DataError(what, "duplicate sample id " + item.sample_id);
  return out;
}

std::map<std::string, const DebugSample*> by_id(const std::vector<DebugSample>& samples) {
  std::map<std::string, const DebugSample*> out;
  for (const auto& s : samples)
    if (!out.emplace(s.id, &s).second) throw DataError("id", "duplicate sample id " + s.id);
  return out;
}

const DebugSample& sample_for(const std::map<std::string, const DebugSample*>& samples, const std::string& id) {
  auto it = samples.find(id);
  if (it == samples.end()) throw DataError("sample_id", "no sample " + id + " in --samples");
  return *it->second;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

void write_json_file(const std::filesystem::path& path, const Json& doc) { jsonl::write_file(path, doc.dump(1) + "\n"); }

Json constructs_json(const std::string& name, const ConstructSet& c) {
  Json j{{"path", name}, {"constructs", c.constructs}, {"parse_failed", c.parse_failed}};
  if (c.syntax_error_line) j["syntax_error_line"] = *c.syntax_error_line;
  return j;
}

struct ReportRecord {
  std::string sample_id;
  std::optional<ExecutionReport> report;
  std::optional<std::string> error;
};

std::map<std::string, ReportRecord> load_reports(const std::filesystem::path& path) {
  std::map<std::string, ReportRecord> out;
  for (auto& rec : jsonl::read_as<ReportRecord>(path, [](const Json& j) {
         jsonl::ObjectReader r(j, "");
         ReportRecord rr;
         rr.sample_id = r.str("sample_id");
         if (const Json* rep = r.opt_any("report")) rr.report = execution_report_from_json(*rep);
         rr.error = r.opt_str("error");
         r.finish();
         return rr;
       })) {
    const std::string id = rec.sample_id;
    if (!out.emplace(id, std::move(rec)).second) throw DataError("sample_id", "duplicate report for " + id);
  }
  return out;
}

std::vector<ExecutionResult> run_sample_tests(const std::vector<DebugSample>& samples, const SandboxOptions& options,
                                              int jobs) {
  std::vector<ExecutionJob> batch;
  for (const auto& s : samples) batch.push_back({s.buggy_source, s.unit_tests});
  return run_tests_batch(batch, options, jobs);
}

SandboxOptions sandbox_options(const std::string& runner, int timeout_ms) {
  SandboxOptions o = sandbox_options_from_env();
  if (!runner.empty()) o.runner = runner;
  o.timeout_ms = timeout_ms;
  return o;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Socratic debugging toolkit: reasoning trajectories, conversations, judging and benchmarks.", "socdbg"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--replay", g.replay, "Answer model calls from a cassette (offline)")->check(CLI::ExistingFile);
  app.add_option("--record", g.record, "Append every model answer to a cassette");
  app.add_option("--models", g.models, "Model configuration file (defaults to the built-in table)")
      ->check(CLI::ExistingFile);
  app.add_option("--jobs", g.jobs, "Parallel samples / requests")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed for retry jitter");

  std::function<void()> action;

  // extract-constructs
  auto* ec = app.add_subcommand("extract-constructs", "List the programming constructs in Python sources");
  std::vector<std::string> ec_files;
  std::string ec_solutions, ec_out;
  ec->add_option("files", ec_files, "Python source files")->check(CLI::ExistingFile);
  ec->add_option("--solutions", ec_solutions, "Solutions JSONL; writes one profile per solution")
      ->check(CLI::ExistingFile);
  ec->add_option("--out", ec_out, "Output JSONL (default: stdout)");
  ec->callback([&] {
    action = [&] {
      if (ec_files.empty() == ec_solutions.empty()) throw CLI::ValidationError("give either source files or --solutions");
      std::vector<Json> records;
      if (!ec_solutions.empty()) {
        const auto solutions = load_solutions(ec_solutions);
        for (const auto& p : profile_solutions(solutions)) records.push_back(to_json(p));
      } else {
        for (const auto& f : ec_files) records.push_back(constructs_json(f, extract_constructs(jsonl::read_file(f))));
      }
      if (ec_out.empty()) out << jsonl::dump(records);
      else jsonl::write(ec_out, records);
    };
  });

  // pair
  auto* pr = app.add_subcommand("pair", "Pair misconceptions with solutions by construct overlap");
  std::string pr_misconceptions, pr_solutions, pr_out, pr_trace;
  std::size_t pr_count = 0;
  pr->add_option("--misconceptions", pr_misconceptions)->required()->check(CLI::ExistingFile);
  pr->add_option("--solutions", pr_solutions)->required()->check(CLI::ExistingFile);
  pr->add_option("--count", pr_count, "Target number of pairs")->required();
  pr->add_option("--out", pr_out, "Pairs JSONL")->required();
  pr->add_option("--trace", pr_trace, "Selection trace JSONL");
  pr->callback([&] {
    action = [&] {
      const auto misconceptions = load_misconceptions(pr_misconceptions);
      const auto profiles = profile_solutions(load_solutions(pr_solutions));
      const auto result = pair(misconceptions, profiles, pr_count);
      std::vector<Json> pairs;
      for (const auto& p : result.pairings) pairs.push_back(to_json(p));
      jsonl::write(pr_out, pairs);
      if (!pr_trace.empty()) {
        std::vector<Json> trace;
        for (const auto& s : result.trace) trace.push_back(to_json(s));
        jsonl::write(pr_trace, trace);
      }
      out << result.pairings.size() << " pairs";
      if (result.exhausted) out << " (candidates exhausted before " << pr_count << ")";
      out << "\n";
      for (const auto& c : pairing_report(misconceptions, result.pairings))
        out << "  " << c.misconception_id << " " << c.count << "\n";
    };
  });

  // run-tests
  auto* rt = app.add_subcommand("run-tests", "Run each sample's unit tests in the sandbox");
  std::string rt_samples, rt_out, rt_runner;
  int rt_timeout = 5000;
  rt->add_option("--samples", rt_samples)->required()->check(CLI::ExistingFile);
  rt->add_option("--out", rt_out, "Reports JSONL")->required();
  rt->add_option("--timeout-ms", rt_timeout)->check(CLI::PositiveNumber);
  rt->add_option("--runner", rt_runner, "Sandbox runner script (default: $SOCDBG_SANDBOX_RUNNER)");
  rt->callback([&] {
    action = [&] {
      const auto samples = load_dataset(rt_samples);
      const auto results = run_sample_tests(samples, sandbox_options(rt_runner, rt_timeout), g.jobs);
      std::vector<Json> records;
      int buggy = 0, failed = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        Json rec{{"sample_id", samples[i].id}};
        if (results[i].report) {
          rec["report"] = to_json(*results[i].report);
          buggy += is_buggy(*results[i].report);
        } else {
          rec["error"] = *results[i].error;
          ++failed;
        }
        records.push_back(std::move(rec));
      }
      jsonl::write(rt_out, records);
      out << samples.size() << " samples, " << buggy << " buggy, " << failed << " sandbox failures\n";
    };
  });

  // describe-failure
  auto* df = app.add_subcommand("describe-failure", "Write the failed-test sentence for each buggy sample");
  std::string df_samples, df_reports, df_out, df_model, df_runner;
  int df_timeout = 5000;
  df->add_option("--samples", df_samples)->required()->check(CLI::ExistingFile);
  df->add_option("--reports", df_reports, "Reports from run-tests (default: run the tests now)")
      ->check(CLI::ExistingFile);
  df->add_option("--out", df_out, "Samples JSONL with failed_test filled in; non-buggy samples are dropped")
      ->required();
  df->add_option("--model", df_model, "Describer configuration (default: the registry's describer)");
  df->add_option("--runner", df_runner);
  df->add_option("--timeout-ms", df_timeout)->check(CLI::PositiveNumber);
  df->callback([&] {
    action = [&] {
      Session session(g);
      const std::string model = df_model.empty() ? session.registry().default_for("describer").config_id : df_model;
      auto samples = load_dataset(df_samples);
      std::vector<std::optional<ExecutionReport>> reports(samples.size());
      if (!df_reports.empty()) {
        const auto loaded = load_reports(df_reports);
        for (std::size_t i = 0; i < samples.size(); ++i) {
          auto it = loaded.find(samples[i].id);
          if (it == loaded.end()) throw DataError("sample_id", "no report for " + samples[i].id);
          reports[i] = it->second.report;
        }
      } else {
        const auto results = run_sample_tests(samples, sandbox_options(df_runner, df_timeout), g.jobs);
        for (std::size_t i = 0; i < samples.size(); ++i) reports[i] = results[i].report;
      }
      Gateway& gateway = session.gateway({model});

      std::vector<std::optional<DescribeOutcome>> outcomes(samples.size());
      std::vector<std::string> notes(samples.size());
      parallel_for(samples.size(), g.jobs, [&](std::size_t i) {
        if (!reports[i]) {
          notes[i] = "no execution report";
        } else if (!is_buggy(*reports[i])) {
          notes[i] = "not buggy";
        } else {
          try {
            outcomes[i] = describe_failure(gateway, model, samples[i].problem_description, samples[i].buggy_source,
                                           *reports[i], samples[i].unit_tests);
          } catch (const DescribeError& e) {
            outcomes[i] = DescribeOutcome{e.fallback(), true, std::string(e.what()), failure_prompt_version()};
          } catch (const Error& e) {
            notes[i] = e.what();
          }
        }
      });
      std::vector<DebugSample> kept;
      int fallbacks = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!outcomes[i]) {
          err << samples[i].id << ": dropped (" << notes[i] << ")\n";
          continue;
        }
        if (outcomes[i]->fallback) {
          ++fallbacks;
          err << samples[i].id << ": deterministic description used (" << outcomes[i]->fallback_reason.value_or("")
              << ")\n";
        }
        samples[i].failed_test = outcomes[i]->description;
        kept.push_back(samples[i]);
      }
      save_dataset(kept, df_out);
      out << kept.size() << " of " << samples.size() << " samples described, " << fallbacks << " by fallback\n";
    };
  });

  // gen-rt
  auto* gr = app.add_subcommand("gen-rt", "Generate a reasoning trajectory per sample");
  std::string gr_samples, gr_model, gr_out;
  gr->add_option("--samples", gr_samples)->required()->check(CLI::ExistingFile);
  gr->add_option("--model", gr_model, "Configuration id")->required();
  gr->add_option("--out", gr_out, "Trajectories JSONL")->required();
  gr->callback([&] {
    action = [&] {
      Session session(g);
      Gateway& gateway = session.gateway({gr_model});
      const auto samples = load_dataset(gr_samples);
      std::vector<ReasoningTrajectory> rts(samples.size());
      parallel_for(samples.size(), g.jobs, [&](std::size_t i) { rts[i] = try_generate_rt(gateway, samples[i], gr_model); });
      save_trajectories(rts, gr_out);
      int ok = 0;
      for (const auto& r : rts) {
        ok += r.ok();
        if (!r.ok()) err << r.sample_id << ": " << *r.error << "\n";
      }
      out << ok << " of " << rts.size() << " trajectories generated\n";
    };
  });

  // gen-conversation
  auto* gc = app.add_subcommand("gen-conversation", "Generate a Socratic conversation per trajectory");
  std::string gc_samples, gc_trajectories, gc_model, gc_out, gc_render;
  gc->add_option("--samples", gc_samples)->required()->check(CLI::ExistingFile);
  gc->add_option("--trajectories", gc_trajectories)->required()->check(CLI::ExistingFile);
  gc->add_option("--model", gc_model, "Configuration id (default: the trajectory's)");
  gc->add_option("--out", gc_out, "Conversations JSONL")->required();
  gc->add_option("--render", gc_render, "Also print each conversation")
      ->check(CLI::IsMember({"plain", "annotated"}));
  gc->callback([&] {
    action = [&] {
      Session session(g);
      const auto samples = load_dataset(gc_samples);
      const auto index = by_id(samples);
      const auto rts = load_trajectories(gc_trajectories);
      std::vector<std::string> configs;
      for (const auto& r : rts) configs.push_back(gc_model.empty() ? r.meta.config_id : gc_model);
      Gateway& gateway = session.gateway(configs);
      std::vector<Conversation> cs(rts.size());
      for (const auto& r : rts) sample_for(index, r.sample_id);
      parallel_for(rts.size(), g.jobs, [&](std::size_t i) {
        cs[i] = try_generate_conversation(gateway, sample_for(index, rts[i].sample_id), rts[i], configs[i]);
      });
      save_conversations(cs, gc_out);
      int ok = 0;
      for (const auto& c : cs) {
        ok += c.ok();
        if (!c.ok()) {
          err << c.sample_id << ": " << *c.error << "\n";
        } else if (!gc_render.empty()) {
          out << "# " << c.sample_id << "\n"
              << render_conversation(c.turns, gc_render == "plain" ? RenderMode::plain : RenderMode::annotated)
              << "\n\n";
        }
      }
      out << ok << " of " << cs.size() << " conversations generated\n";
    };
  });

  // judge
  auto* jd = app.add_subcommand("judge", "Judge trajectories and conversation turns");
  std::string jd_samples, jd_trajectories, jd_conversations, jd_judge, jd_out;
  jd->add_option("--samples", jd_samples)->required()->check(CLI::ExistingFile);
  jd->add_option("--trajectories", jd_trajectories)->required()->check(CLI::ExistingFile);
  jd->add_option("--conversations", jd_conversations, "Also judge every aligned Teacher turn")
      ->check(CLI::ExistingFile);
  jd->add_option("--judge", jd_judge, "Judge configuration (default: the registry's judge)");
  jd->add_option("--out", jd_out, "Verdicts JSONL")->required();
  jd->callback([&] {
    action = [&] {
      Session session(g);
      const std::string judge = jd_judge.empty() ? session.registry().default_for("judge").config_id : jd_judge;
      Gateway& gateway = session.gateway({judge});
      const auto samples = load_dataset(jd_samples);
      const auto index = by_id(samples);
      const auto rts = load_trajectories(jd_trajectories);
      const auto rt_index = by_sample(rts, "trajectories");
      std::vector<Conversation> cs;
      if (!jd_conversations.empty()) cs = load_conversations(jd_conversations);
      for (const auto& c : cs)
        if (!rt_index.count(c.sample_id)) throw DataError("sample_id", "no trajectory for conversation " + c.sample_id);

      std::vector<std::optional<RtVerdict>> rt_verdicts(rts.size());
      parallel_for(rts.size(), g.jobs, [&](std::size_t i) {
        if (rts[i].ok()) rt_verdicts[i] = try_judge_rt(gateway, sample_for(index, rts[i].sample_id), rts[i], judge);
      });
      std::vector<std::vector<TurnVerdict>> turn_verdicts(cs.size());
      for (std::size_t i = 0; i < cs.size(); ++i) {
        if (!cs[i].ok()) continue;
        const auto& r = *rt_index.at(cs[i].sample_id);
        turn_verdicts[i] = judge_conversation(gateway, sample_for(index, r.sample_id), r, cs[i], judge, g.jobs);
      }
      VerdictSet set;
      for (auto& v : rt_verdicts)
        if (v) set.rt.push_back(std::move(*v));
      for (auto& vs : turn_verdicts)
        for (auto& v : vs) set.turns.push_back(std::move(v));
      save_verdicts(set, jd_out);
      int errors = 0;
      for (const auto& v : set.rt) errors += v.meta.error.has_value();
      for (const auto& v : set.turns) errors += v.meta.error.has_value();
      out << set.rt.size() << " trajectory verdicts, " << set.turns.size() << " turn verdicts, " << errors
          << " judge failures\n";
    };
  });

  // benchmark
  auto* bm = app.add_subcommand("benchmark", "Generate, judge and aggregate per configuration");
  std::string bm_corpus, bm_configs, bm_judge, bm_out, bm_manifest, bm_artifacts, bm_from;
  bm->add_option("--corpus", bm_corpus, "Samples JSONL")->check(CLI::ExistingFile);
  bm->add_option("--configs", bm_configs, "Comma-separated configuration ids");
  bm->add_option("--judge", bm_judge, "Judge configuration (default: the registry's judge)");
  bm->add_option("--out", bm_out, "Report JSON")->required();
  bm->add_option("--manifest", bm_manifest, "Manifest JSON to write");
  bm->add_option("--artifacts", bm_artifacts, "Artifact directory (default: <manifest dir>/artifacts)");
  bm->add_option("--from-manifest", bm_from, "Recompute the report from an earlier run's artifacts")
      ->check(CLI::ExistingFile)
      ->excludes("--corpus")
      ->excludes("--configs")
      ->excludes("--judge");
  bm->callback([&] {
    action = [&] {
      BenchmarkReport report;
      if (!bm_from.empty()) {
        report = report_from_manifest(bm_from);
      } else {
        if (bm_corpus.empty() || bm_configs.empty() || bm_manifest.empty())
          throw CLI::ValidationError("--corpus, --configs and --manifest are required unless --from-manifest is given");
        Session session(g);
        BenchmarkOptions options;
        options.configs = split_list(bm_configs);
        options.judge_config = bm_judge.empty() ? session.registry().default_for("judge").config_id : bm_judge;
        options.jobs = g.jobs;
        const std::filesystem::path manifest_path = bm_manifest;
        const auto manifest_dir = std::filesystem::absolute(manifest_path).parent_path();
        options.out_dir = bm_artifacts.empty() ? manifest_dir / "artifacts" : std::filesystem::absolute(bm_artifacts);
        std::vector<std::string> ids = options.configs;
        ids.push_back(options.judge_config);
        Gateway& gateway = session.gateway(ids);
        const auto corpus = load_dataset(bm_corpus);
        auto run = run_benchmark(gateway, corpus, options);
        run.manifest["artifact_root"] = std::filesystem::relative(options.out_dir, manifest_dir).generic_string();
        write_json_file(manifest_path, run.manifest);
        report = std::move(run.report);
      }
      write_json_file(bm_out, to_json(report));
      out << render_report_table(report);
    };
  });

  // stats
  auto* st = app.add_subcommand("stats", "Dataset statistics");
  std::string st_solutions, st_misconceptions, st_samples, st_out;
  std::vector<std::string> st_trajectories;
  st->add_option("--solutions", st_solutions)->required()->check(CLI::ExistingFile);
  st->add_option("--misconceptions", st_misconceptions)->required()->check(CLI::ExistingFile);
  st->add_option("--samples", st_samples)->required()->check(CLI::ExistingFile);
  st->add_option("--trajectories", st_trajectories, "Trajectory files (repeatable)")->check(CLI::ExistingFile);
  st->add_option("--out", st_out, "Statistics JSON");
  st->callback([&] {
    action = [&] {
      std::vector<ReasoningTrajectory> rts;
      for (const auto& f : st_trajectories)
        for (auto& r : load_trajectories(f)) rts.push_back(std::move(r));
      const auto stats = dataset_stats(load_solutions(st_solutions), load_misconceptions(st_misconceptions),
                                       load_dataset(st_samples), rts);
      if (!st_out.empty()) write_json_file(st_out, to_json(stats));
      out << render_stats_table(stats);
    };
  });

  // agreement
  auto* ag = app.add_subcommand("agreement", "Agreement between judge verdicts and human labels");
  std::string ag_judge, ag_human, ag_out;
  bool ag_subset = false;
  ag->add_option("--judge", ag_judge, "Verdicts JSONL")->required()->check(CLI::ExistingFile);
  ag->add_option("--human", ag_human, "Labels JSONL {item_id, valid}")->required()->check(CLI::ExistingFile);
  ag->add_flag("--subset", ag_subset, "Only compare the items the human labelled");
  ag->add_option("--out", ag_out, "Agreement JSON");
  ag->callback([&] {
    action = [&] {
      const auto judge = labels_from_verdicts(verdicts_from_jsonl(ag_judge));
      const auto human = load_labels(ag_human);
      const auto a = agreement(judge, human, ag_subset);
      if (!ag_out.empty()) write_json_file(ag_out, Json{{"matches", a.matches}, {"n", a.n}, {"rate", a.rate}});
      out << "agreement " << format_percent(a.rate) << "% (" << a.matches << "/" << a.n << ")\n";
    };
  });

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP API for the instructor tool");
  std::string sv_host = "127.0.0.1", sv_jobs_dir;
  int sv_port = 8080;
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port)->check(CLI::Range(0, 65535));
  sv->add_option("--jobs-dir", sv_jobs_dir, "Where benchmark jobs write artifacts (enables POST /benchmark)");
  sv->callback([&] {
    action = [&] {
      Session session(g);
      ServiceOptions options;
      options.judge_config = session.registry().default_for("judge").config_id;
      options.jobs_dir = sv_jobs_dir;
      options.jobs = g.jobs;
      // Requests may name any configuration; only the defaults are checked up front.
      Gateway& gateway = session.gateway({options.default_config, options.judge_config});
      Service service(gateway, options);
      out << "listening on http://" << sv_host << ":" << sv_port << "\n" << std::flush;
      service.listen(sv_host, sv_port);
    };
  });

  try {
    app.parse(argc, argv);
    action();
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    if (dynamic_cast<const CLI::ExtrasError*>(&e) || dynamic_cast<const CLI::RequiredError*>(&e))
      err << app.help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace socdbg

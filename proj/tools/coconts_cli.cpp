// coconts: build n-gram tries, pre-enrich tokenized corpora with compact
// next-token supervision, inspect the results and run the desk-scale checks.
//
// Exit status: 0 success, 1 domain error (including a failed verification),
// 2 I/O, format or usage error.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coconts/coconts.hpp"

namespace {

using namespace coconts;
using nlohmann::json;

std::vector<std::uint64_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::uint64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    std::uint64_t value = 0;
    try {
      value = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (item.empty() || used != item.size()) {
      throw DomainError(std::string("bad ") + what + " list: '" + text + "'");
    }
    out.push_back(value);
  }
  if (out.empty()) throw DomainError(std::string("empty ") + what + " list");
  return out;
}

std::vector<double> parse_dist(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw DomainError("bad distribution: '" + text + "'");
    }
  }
  return out;
}

std::string format_prob(double p) {
  std::ostringstream out;
  out << std::setprecision(9) << p;
  return out.str();
}

// token:probability pairs, probability descending then token ascending.
std::string format_distribution(std::vector<std::pair<TokenId, double>> entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::string out;
  for (const auto& [token, p] : entries) {
    if (!out.empty()) out += ' ';
    out += std::to_string(token) + ":" + format_prob(p);
  }
  return out;
}

json stats_json(const TrieStats& s) {
  return {{"node_count", s.node_count},
          {"max_depth", s.max_depth},
          {"total_windows", s.total_windows},
          {"estimated_bytes", s.estimated_bytes}};
}

json report_json(const EnrichmentReport& r) {
  return {{"shard_id", r.shard_id},
          {"path", r.path.string()},
          {"record_count", r.record_count},
          {"fallback_levels", r.fallback_levels},
          {"bytes_written", r.bytes_written},
          {"raw_block_bytes", r.raw_block_bytes},
          {"storage_ratio", r.storage_ratio()}};
}

struct TrieSource {
  std::string trie_path;
  std::string corpus_path;
  std::size_t k = 0;
  std::uint64_t min_count = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--trie", trie_path, "Trie snapshot written by build-trie");
    cmd->add_option("--corpus", corpus_path, "Token file (trie is built on the fly)");
    cmd->add_option("--k", k, "Maximum prefix length when building from --corpus");
    cmd->add_option("--min-count", min_count, "Prune subtrees with smaller counts")
        ->check(CLI::PositiveNumber);
  }

  PrefixTrie load() const {
    if (!trie_path.empty()) {
      auto trie = PrefixTrie::load(trie_path);
      return min_count > 1 ? trie.pruned(min_count) : trie;
    }
    if (corpus_path.empty()) throw DomainError("either --trie or --corpus is required");
    if (k == 0) throw DomainError("--k is required with --corpus");
    auto trie = build_trie(read_corpus(corpus_path), k);
    return min_count > 1 ? trie.pruned(min_count) : trie;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Corpus pre-enrichment with compact consistent next-token targets"};
  app.require_subcommand(1);

  // build-trie
  std::string corpus_path, out_path;
  std::size_t k = 8;
  std::uint64_t min_count = 1;
  unsigned trie_width = 0;
  auto* build_cmd = app.add_subcommand("build-trie", "Count (k+1)-windows into a trie snapshot");
  build_cmd->add_option("--corpus", corpus_path, "Token file")->required();
  build_cmd->add_option("--k", k, "Maximum prefix length")->check(CLI::PositiveNumber);
  build_cmd->add_option("--min-count", min_count, "Prune subtrees with smaller counts")
      ->check(CLI::PositiveNumber);
  build_cmd->add_option("--out", out_path, "Snapshot path")->required();
  build_cmd->add_option("--token-width", trie_width, "Snapshot token width (default: corpus)")
      ->check(CLI::IsMember({16, 32}));

  // enrich
  Hyper hyper;
  std::size_t shards = 1;
  unsigned threads = 1;
  auto* enrich_cmd = app.add_subcommand("enrich", "Write the enriched dataset");
  enrich_cmd->add_option("--corpus", corpus_path, "Token file")->required();
  enrich_cmd->add_option("--L", hyper.L, "Block length");
  enrich_cmd->add_option("--k", hyper.k, "Maximum prefix length");
  enrich_cmd->add_option("--r", hyper.r, "Top-r truncation size");
  enrich_cmd->add_option("--gamma", hyper.gamma, "Mass-stealing hyperparameter (> 1)");
  enrich_cmd->add_option("--out", out_path, "Enriched output path")->required();
  enrich_cmd->add_option("--shards", shards, "Enrich S independent shards")
      ->check(CLI::PositiveNumber);
  enrich_cmd->add_option("--threads", threads, "Worker cap for sharded runs")
      ->check(CLI::PositiveNumber);
  enrich_cmd->add_option("--min-count", min_count, "Prune the trie before enrichment")
      ->check(CLI::PositiveNumber);

  // shard
  auto* shard_cmd = app.add_subcommand("shard", "Print the block-aligned shard plan");
  shard_cmd->add_option("--corpus", corpus_path, "Token file")->required();
  shard_cmd->add_option("--L", hyper.L, "Block length");
  shard_cmd->add_option("--shards", shards, "Shard count")->check(CLI::PositiveNumber);
  shard_cmd->add_option("--out", out_path, "Base output path for shard files");

  // inspect
  TrieSource inspect_source;
  std::string prefix_text;
  std::size_t inspect_r = 8;
  double inspect_gamma = kDefaultGamma;
  auto* inspect_cmd = app.add_subcommand("inspect", "Show the conditional and top-r for a prefix");
  inspect_source.add_to(inspect_cmd);
  inspect_cmd->add_option("--prefix", prefix_text, "Comma-separated token ids")->required();
  inspect_cmd->add_option("--r", inspect_r, "Top-r size")->check(CLI::PositiveNumber);
  inspect_cmd->add_option("--gamma", inspect_gamma, "Gamma for the coefficient report");

  // stats
  TrieSource stats_source;
  auto* stats_cmd = app.add_subcommand("stats", "Trie size statistics as JSON");
  stats_source.add_to(stats_cmd);

  // batch-dump
  std::string enriched_path, indices_text = "0", mode_text = "coconts";
  bool dense = false;
  auto* dump_cmd = app.add_subcommand("batch-dump", "Render a batch built from enriched records");
  dump_cmd->add_option("--enriched", enriched_path, "Enriched file")->required();
  dump_cmd->add_option("--indices", indices_text, "Comma-separated record indices");
  dump_cmd->add_option("--mode", mode_text, "coconts or allnts-topr")
      ->check(CLI::IsMember({"coconts", "allnts-topr"}));
  dump_cmd->add_flag("--dense", dense, "Also print the nonzero dense target entries");
  dump_cmd->add_option("--out", out_path, "Write the rendering here instead of stdout");

  // demo
  DemoConfig demo;
  demo.true_dist = {0.3, 0.2, 0.15, 0.1, 0.08, 0.06, 0.05, 0.03, 0.02, 0.01};
  std::string dist_text, demo_mode = "both";
  bool per_run = false;
  auto* demo_cmd = app.add_subcommand("demo", "Learn a single softmax multinomial, CSV out");
  demo_cmd->add_option("--r", demo.r, "Top-r size")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--gamma", demo.gamma, "Gamma (> 1)");
  demo_cmd->add_option("--steps", demo.steps, "Gradient steps per run");
  demo_cmd->add_option("--lr", demo.lr, "Learning rate");
  demo_cmd->add_option("--runs", demo.runs, "Independent runs to average")
      ->check(CLI::PositiveNumber);
  demo_cmd->add_option("--seed", demo.seed, "Seed of run 0");
  demo_cmd->add_option("--dist", dist_text, "Comma-separated true distribution");
  demo_cmd->add_option("--mode", demo_mode, "nt, coconts or both")
      ->check(CLI::IsMember({"nt", "coconts", "both"}));
  demo_cmd->add_flag("--per-run", per_run, "Also emit each run's trajectory");
  demo_cmd->add_option("--out", out_path, "CSV path (default stdout)");

  // verify
  TrieSource verify_source;
  std::size_t max_prefixes = 100000;
  std::uint64_t sample = 0, seed = 0;
  bool as_json = false;
  auto* verify_cmd = app.add_subcommand("verify", "Check the trie against brute force counts");
  verify_cmd->add_option("--corpus", verify_source.corpus_path, "Token file")->required();
  verify_cmd->add_option("--k", verify_source.k, "Maximum prefix length")->required();
  verify_cmd->add_option("--max-prefixes", max_prefixes, "Cap on prefixes compared");
  verify_cmd->add_option("--enriched", enriched_path, "Also re-check this enriched file");
  verify_cmd->add_option("--sample", sample, "Records to re-check (default: all)");
  verify_cmd->add_option("--seed", seed, "Record sampling seed");
  verify_cmd->add_flag("--json", as_json, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  if (*build_cmd) {
    const Corpus corpus = read_corpus(corpus_path);
    auto trie = build_trie(corpus, k);
    if (min_count > 1) trie = trie.pruned(min_count);
    trie.save(out_path, trie_width != 0 ? trie_width : corpus.meta.token_width_bits);
    std::cout << stats_json(trie.stats()).dump(2) << "\n";
  } else if (*enrich_cmd) {
    hyper.validate();
    const Corpus corpus = read_corpus(corpus_path);
    json reports = json::array();
    if (shards == 1 && min_count == 1) {
      const auto plan = shard(corpus.tokens.size(), 1, hyper.L, out_path);
      const auto outcomes = enrich_sharded(corpus, plan, hyper, threads);
      if (!outcomes[0].ok()) throw IoError(outcomes[0].error);
      reports.push_back(report_json(*outcomes[0].report));
    } else if (shards == 1) {
      const auto trie = build_trie(corpus, hyper.k).pruned(min_count);
      reports.push_back(report_json(enrich(corpus, trie, hyper, out_path)));
    } else {
      if (min_count > 1) throw DomainError("--min-count is not supported with --shards");
      const auto plan = shard(corpus.tokens.size(), shards, hyper.L, out_path);
      bool failed = false;
      for (const auto& outcome : enrich_sharded(corpus, plan, hyper, threads)) {
        if (outcome.ok()) {
          reports.push_back(report_json(*outcome.report));
        } else {
          failed = true;
          std::cerr << "shard failed: " << outcome.error << "\n";
        }
      }
      std::cout << reports.dump(2) << "\n";
      return failed ? 2 : 0;
    }
    std::cout << reports.dump(2) << "\n";
  } else if (*shard_cmd) {
    const Corpus corpus = read_corpus(corpus_path);
    const auto plan = shard(corpus.tokens.size(), shards, hyper.L, out_path);
    json out = json::array();
    for (std::size_t s = 0; s < plan.size(); ++s) {
      const auto& r = plan.ranges[s];
      out.push_back({{"shard", s},
                     {"token_begin", r.token_begin},
                     {"token_end", r.token_end},
                     {"block_begin", r.block_begin},
                     {"block_count", r.block_count},
                     {"output", plan.outputs[s].string()}});
    }
    std::cout << out.dump(2) << "\n";
  } else if (*inspect_cmd) {
    const PrefixTrie trie = inspect_source.load();
    std::vector<TokenId> prefix;
    for (auto v : parse_list(prefix_text, "prefix")) prefix.push_back(static_cast<TokenId>(v));
    const auto counts = trie.conditional_counts(prefix);
    std::vector<std::pair<TokenId, double>> full;
    for (const auto& [token, c] : counts.continuations) {
      full.emplace_back(token, static_cast<double>(c) / static_cast<double>(counts.denominator));
    }
    const TopR topr = trie.top_r(prefix, inspect_r);
    std::vector<std::pair<TokenId, double>> truncated;
    for (std::size_t i = 0; i < topr.size(); ++i) truncated.emplace_back(topr.ids[i], topr.probs[i]);
    const auto c = coefficients(topr.p, inspect_gamma);
    std::cout << "prefix " << format_prefix(prefix) << " count " << counts.denominator
              << " support " << counts.continuations.size() << "\n"
              << "conditional " << format_distribution(full) << "\n"
              << "top" << inspect_r << " " << format_distribution(truncated) << "\n"
              << "p " << format_prob(topr.p) << " u " << format_prob(c.u) << " v "
              << format_prob(c.v) << "\n";
  } else if (*stats_cmd) {
    std::cout << stats_json(stats_source.load().stats()).dump(2) << "\n";
  } else if (*dump_cmd) {
    const EnrichedFile file(enriched_path);
    const auto indices = parse_list(indices_text, "index");
    const BatchMode mode = mode_text == "coconts" ? BatchMode::CoCoNTs : BatchMode::AllNTsTopR;
    const Batch batch = build_batch(file, indices, mode, dense);
    std::ostringstream text;
    text << "mode " << to_string(mode) << " B " << batch.size() << " L " << file.hyper().L
         << " k " << file.hyper().k << " r " << file.hyper().r << " gamma "
         << format_prob(file.hyper().gamma) << "\n";
    for (std::size_t b = 0; b < batch.size(); ++b) {
      text << "record " << indices[b] << "\n  inputs";
      for (TokenId t : batch.inputs.row(b)) text << ' ' << t;
      text << "\n";
      for (std::size_t i = 0; i < batch.supervision[b].size(); ++i) {
        const auto& target = batch.supervision[b][i];
        text << "  level " << i + 1 << " realized " << target.realized << " "
             << to_string(target.kind) << " weight " << format_prob(target.total_weight())
             << " | " << format_distribution(target.entries) << "\n";
        if (dense) {
          text << "    dense";
          const auto row = (*batch.dense)[b].row(i);
          for (std::size_t t = 0; t < row.size(); ++t) {
            if (row[t] != 0.0) text << ' ' << t << ':' << format_prob(row[t]);
          }
          text << "\n";
        }
      }
    }
    if (out_path.empty()) {
      std::cout << text.str();
    } else {
      std::ofstream out(out_path);
      if (!out || !(out << text.str())) throw IoError("cannot write " + out_path);
    }
  } else if (*demo_cmd) {
    if (!dist_text.empty()) demo.true_dist = parse_dist(dist_text);
    std::ostringstream csv;
    csv << "mode,r,gamma,run,step,kl\n";
    std::vector<DemoMode> modes;
    if (demo_mode != "coconts") modes.push_back(DemoMode::NT);
    if (demo_mode != "nt") modes.push_back(DemoMode::CoCoNTs);
    for (DemoMode m : modes) {
      demo.mode = m;
      const auto result = multinomial_demo(demo);
      const auto emit = [&](const std::string& run, const std::vector<double>& kl) {
        for (std::size_t s = 0; s < kl.size(); ++s) {
          csv << to_string(m) << ',' << demo.r << ',' << format_prob(demo.gamma) << ',' << run
              << ',' << s + 1 << ',' << std::setprecision(12) << kl[s] << "\n";
        }
      };
      if (per_run) {
        for (std::size_t run = 0; run < result.per_run.size(); ++run) {
          emit(std::to_string(run), result.per_run[run]);
        }
      }
      emit("mean", result.mean);
    }
    if (out_path.empty()) {
      std::cout << csv.str();
    } else {
      std::ofstream out(out_path);
      if (!out || !(out << csv.str())) throw IoError("cannot write " + out_path);
    }
  } else if (*verify_cmd) {
    const Corpus corpus = read_corpus(verify_source.corpus_path);
    const auto trie = build_trie(corpus, verify_source.k);
    const auto oracle = compare_all(trie, corpus, verify_source.k, max_prefixes);
    std::optional<VerifyReport> enriched;
    if (!enriched_path.empty()) {
      enriched = verify_enrichment(enriched_path, trie, sample == 0 ? UINT64_MAX : sample, seed);
    }
    const bool ok = oracle.ok() && (!enriched || enriched->ok());
    if (as_json) {
      json out = {{"ok", ok}, {"oracle", to_json(oracle)}};
      if (enriched) {
        json m = json::array();
        for (const auto& x : enriched->mismatches) {
          m.push_back({{"record", x.record}, {"level", x.level}, {"detail", x.detail}});
        }
        out["enrichment"] = {{"ok", enriched->ok()},
                             {"records_checked", enriched->records_checked},
                             {"mismatches", m}};
      }
      std::cout << out.dump(2) << "\n";
    } else {
      std::cout << to_text(oracle);
      if (enriched) {
        std::cout << "records checked: " << enriched->records_checked
                  << "\nrecord mismatches: " << enriched->mismatches.size() << "\n";
        for (const auto& x : enriched->mismatches) {
          std::cout << "  record " << x.record << " level " << x.level << ": " << x.detail << "\n";
        }
      }
      std::cout << (ok ? "OK" : "FAILED") << "\n";
    }
    return ok ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const coconts::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const coconts::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

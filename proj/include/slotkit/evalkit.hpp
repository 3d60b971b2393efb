#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "slotkit/backend.hpp"
#include "slotkit/core.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/extract.hpp"
#include "slotkit/jsonl.hpp"
#include "slotkit/outparse.hpp"
#include "slotkit/promptgen.hpp"
#include "slotkit/text.hpp"

namespace slotkit {

// Decides whether a predicted value counts as matching one gold alternative.
struct ValueMatcher {
  std::string name;
  std::function<bool(const std::string& pred, const std::string& gold)> accepts;
};

inline ValueMatcher exact_matcher() {
  return {"exact", [](const std::string& pred, const std::string& gold) {
            return text::trim(pred) == text::trim(gold);
          }};
}

inline ValueMatcher case_insensitive_matcher() {
  return {"case_insensitive", [](const std::string& pred, const std::string& gold) {
            return text::iequals(text::trim(pred), text::trim(gold));
          }};
}

inline ValueMatcher fuzzy_matcher(double threshold = 0.8) {
  return {"fuzzy", [threshold](const std::string& pred, const std::string& gold) {
            return text::normalized_similarity(std::string(text::trim(pred)),
                                               std::string(text::trim(gold))) >= threshold;
          }};
}

inline ValueMatcher matcher_by_name(const std::string& name) {
  if (name == "exact") return exact_matcher();
  if (name == "case_insensitive" || name == "ci") return case_insensitive_matcher();
  if (name == "fuzzy") return fuzzy_matcher();
  throw Error(ErrorKind::Config, "unknown matcher: " + name);
}

struct ExampleScore {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  bool joint_correct = true;
  std::optional<double> latency_s;
  Category category = Category::Sgd;
};

// Pair-level score of one example. A predicted (id, value) is a true
// positive when gold knows the id and the matcher accepts the value against
// any gold alternative. When both sides are empty the example counts as
// perfect — predicting nothing was exactly right.
inline ExampleScore score_example(const BeliefState& pred,
                                  const std::map<std::string, std::vector<std::string>>& gold,
                                  const ValueMatcher& matcher = exact_matcher(),
                                  const SlotLibrary* library = nullptr) {
  if (library) {
    for (const auto& [id, value] : pred.values) {
      (void)value;
      if (!library->contains(id))
        throw Error(ErrorKind::MixedLibrary, "predicted slot not in library: " + id);
    }
    for (const auto& [id, alts] : gold) {
      (void)alts;
      if (!library->contains(id))
        throw Error(ErrorKind::MixedLibrary, "gold slot not in library: " + id);
    }
  }

  ExampleScore s;
  for (const auto& [id, value] : pred.values) {
    auto it = gold.find(id);
    bool hit = false;
    if (it != gold.end()) {
      for (const auto& alt : it->second) {
        if (matcher.accepts(value, alt)) {
          hit = true;
          break;
        }
      }
    }
    if (hit)
      ++s.tp;
    else
      ++s.fp;
  }
  for (const auto& [id, alts] : gold) {
    bool hit = false;
    if (const std::string* value = pred.get(id)) {
      for (const auto& alt : alts) {
        if (matcher.accepts(*value, alt)) {
          hit = true;
          break;
        }
      }
    }
    if (!hit) ++s.fn;
  }

  s.precision = (s.tp + s.fp == 0) ? 1.0 : double(s.tp) / double(s.tp + s.fp);
  s.recall = (s.tp + s.fn == 0) ? 1.0 : double(s.tp) / double(s.tp + s.fn);
  size_t denom = 2 * s.tp + s.fp + s.fn;
  s.f1 = (denom == 0) ? 1.0 : 2.0 * double(s.tp) / double(denom);
  s.joint_correct = (s.fp == 0 && s.fn == 0);
  return s;
}

inline double macro_f1(const std::vector<ExampleScore>& scores) {
  if (scores.empty()) throw Error(ErrorKind::EmptyScoreSet, "macro_f1 over zero examples");
  double sum = 0.0;
  for (const auto& s : scores) sum += s.f1;
  return sum / double(scores.size());
}

inline double jga(const std::vector<ExampleScore>& scores) {
  if (scores.empty()) throw Error(ErrorKind::EmptyScoreSet, "jga over zero examples");
  size_t correct = 0;
  for (const auto& s : scores)
    if (s.joint_correct) ++correct;
  return double(correct) / double(scores.size());
}

struct LatencyStats {
  size_t n = 0;  // examples that carried a latency
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

// Percentiles use the nearest-rank rule: p-th percentile of n samples is the
// ceil(p*n)-th smallest.
inline LatencyStats latency_stats(const std::vector<ExampleScore>& scores) {
  if (scores.empty()) throw Error(ErrorKind::EmptyScoreSet, "latency_stats over zero examples");
  std::vector<double> xs;
  for (const auto& s : scores)
    if (s.latency_s) xs.push_back(*s.latency_s);
  LatencyStats out;
  out.n = xs.size();
  if (xs.empty()) return out;
  std::sort(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / double(xs.size());
  auto rank = [&xs](double p) {
    size_t r = size_t(std::ceil(p * double(xs.size())));
    if (r < 1) r = 1;
    return xs[r - 1];
  };
  out.p50 = rank(0.50);
  out.p95 = rank(0.95);
  return out;
}

struct CategoryReport {
  double macro_f1 = 0.0;
  double jga = 0.0;
  size_t n = 0;
  double mean_latency_s = 0.0;
  double p50_latency_s = 0.0;
  double p95_latency_s = 0.0;

  friend bool operator==(const CategoryReport&, const CategoryReport&) = default;
};

struct EvalReport {
  std::map<std::string, CategoryReport> per_category;  // keyed by category tag
  CategoryReport overall;
  std::map<std::string, size_t> warnings;  // parse warning reason -> count
  size_t errors = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline ojson report_to_json(const EvalReport& r) {
  auto entry = [](const CategoryReport& c) {
    ojson e;
    e["macro_f1"] = c.macro_f1;
    e["jga"] = c.jga;
    e["n"] = c.n;
    e["mean_latency_s"] = c.mean_latency_s;
    e["p50_latency_s"] = c.p50_latency_s;
    e["p95_latency_s"] = c.p95_latency_s;
    return e;
  };
  ojson j;
  ojson per = ojson::object();
  for (const auto& [tag, c] : r.per_category) per[tag] = entry(c);
  j["per_category"] = std::move(per);
  j["overall"] = entry(r.overall);
  ojson warnings = ojson::object();
  for (const auto& [reason, n] : r.warnings) warnings[reason] = n;
  j["warnings"] = std::move(warnings);
  j["errors"] = r.errors;
  return j;
}

inline EvalReport report_from_json(const ojson& j) {
  auto entry = [](const ojson& e) {
    CategoryReport c;
    c.macro_f1 = e.at("macro_f1").get<double>();
    c.jga = e.at("jga").get<double>();
    c.n = e.at("n").get<size_t>();
    c.mean_latency_s = e.value("mean_latency_s", 0.0);
    c.p50_latency_s = e.value("p50_latency_s", 0.0);
    c.p95_latency_s = e.value("p95_latency_s", 0.0);
    return c;
  };
  EvalReport r;
  for (const auto& [tag, e] : j.at("per_category").items()) r.per_category[tag] = entry(e);
  r.overall = entry(j.at("overall"));
  if (j.contains("warnings"))
    for (const auto& [reason, n] : j.at("warnings").items())
      r.warnings[reason] = n.get<size_t>();
  r.errors = j.value("errors", size_t(0));
  return r;
}

// Rows = categories (display names), final Overall row.
inline std::string render_report_table(const EvalReport& r) {
  auto fmt = [](const std::string& label, const CategoryReport& c) {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%-30s %8zu %10.4f %10.4f %12.4f %12.4f %12.4f\n",
                  label.c_str(), c.n, c.macro_f1, c.jga, c.mean_latency_s, c.p50_latency_s,
                  c.p95_latency_s);
    return std::string(buf);
  };
  std::string out;
  char head[192];
  std::snprintf(head, sizeof(head), "%-30s %8s %10s %10s %12s %12s %12s\n", "Slot Type", "N",
                "Macro F1", "JGA", "Latency(s)", "p50(s)", "p95(s)");
  out += head;
  out += std::string(98, '-') + "\n";
  for (Category c : {Category::Sgd, Category::MultiSlot, Category::LongValue,
                     Category::Categorical, Category::NameSplit, Category::IdData,
                     Category::Address, Category::Relation, Category::Realistic}) {
    auto it = r.per_category.find(std::string(category_tag(c)));
    if (it == r.per_category.end()) continue;
    out += fmt(std::string(category_display_name(c)), it->second);
  }
  out += std::string(98, '-') + "\n";
  out += fmt("Overall", r.overall);
  return out;
}

enum class AverageBy { Example, Category };

struct EvalOptions {
  TokenBudget budget{};
  TokenCounter counter = whitespace_counter();
  ValueMatcher matcher = exact_matcher();
  size_t parallelism = 1;
  bool fail_fast = false;
  double fuzzy_threshold = kDefaultFuzzyThreshold;
  AverageBy average_by = AverageBy::Example;
};

namespace detail {

inline CategoryReport summarize(const std::vector<ExampleScore>& scores) {
  CategoryReport c;
  c.n = scores.size();
  if (scores.empty()) return c;
  c.macro_f1 = macro_f1(scores);
  c.jga = jga(scores);
  LatencyStats lat = latency_stats(scores);
  c.mean_latency_s = lat.mean;
  c.p50_latency_s = lat.p50;
  c.p95_latency_s = lat.p95;
  return c;
}

}  // namespace detail

struct EvalRun {
  EvalReport report;
  std::vector<ExampleScore> scores;             // in dataset order, errors excluded
  std::vector<std::string> error_messages;      // one per failed record
};

// Scores a whole dataset against a backend with at most `parallelism` calls
// in flight. Backend failures count into report.errors instead of aborting
// (unless fail_fast). Scores are aggregated in dataset order, so the report
// does not depend on scheduling.
inline EvalRun run_eval(const std::vector<PromptRecord>& dataset, Backend& backend,
                        const EvalOptions& options = {}) {
  if (dataset.empty()) throw Error(ErrorKind::EmptyScoreSet, "run_eval on empty dataset");

  struct Slot {
    std::optional<ExampleScore> score;
    std::vector<ParseWarning> warnings;
    std::string error;
  };
  std::vector<Slot> results(dataset.size());

  size_t workers = std::max<size_t>(1, std::min(options.parallelism, dataset.size()));
  std::atomic<size_t> next{0};
  std::atomic<bool> stop{false};

  auto work = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= dataset.size() || stop.load()) return;
      const PromptRecord& record = dataset[i];
      try {
        ExtractResult r = extract(record.library, record.conversation, backend, options.budget,
                                  options.counter, options.fuzzy_threshold);
        ExampleScore s = score_example(r.outcome.state, record.state, options.matcher);
        s.latency_s = r.latency_s;
        s.category = record.category;
        results[i].score = s;
        results[i].warnings = r.outcome.warnings;
      } catch (const std::exception& e) {
        results[i].error = e.what();
        if (results[i].error.empty()) results[i].error = "backend error";
        if (options.fail_fast) stop.store(true);
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  EvalRun run;
  std::map<std::string, std::vector<ExampleScore>> by_category;
  for (auto& slot : results) {
    if (!slot.error.empty()) {
      run.error_messages.push_back(slot.error);
      continue;
    }
    if (!slot.score) continue;  // fail-fast stopped before this record ran
    run.scores.push_back(*slot.score);
    by_category[std::string(category_tag(slot.score->category))].push_back(*slot.score);
    for (const auto& w : slot.warnings)
      ++run.report.warnings[std::string(warning_reason_name(w.reason))];
  }
  run.report.errors = run.error_messages.size();
  if (options.fail_fast && run.report.errors > 0)
    throw Error(ErrorKind::Backend, "eval aborted: " + run.error_messages.front());

  for (const auto& [tag, scores] : by_category)
    run.report.per_category[tag] = detail::summarize(scores);

  if (!run.scores.empty()) {
    if (options.average_by == AverageBy::Example) {
      run.report.overall = detail::summarize(run.scores);
    } else {
      CategoryReport o = detail::summarize(run.scores);  // n and latency stay example-based
      double f1_sum = 0.0, jga_sum = 0.0;
      for (const auto& [tag, c] : run.report.per_category) {
        (void)tag;
        f1_sum += c.macro_f1;
        jga_sum += c.jga;
      }
      o.macro_f1 = f1_sum / double(run.report.per_category.size());
      o.jga = jga_sum / double(run.report.per_category.size());
      run.report.overall = o;
    }
  }
  return run;
}

}  // namespace slotkit

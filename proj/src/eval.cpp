#include "psyprobe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "psyprobe/http_backend.hpp"

namespace psyprobe::eval {

namespace {

using NgramCounts = std::map<Tokens, std::size_t>;

NgramCounts ngrams(const Tokens& t, int n) {
  NgramCounts out;
  const auto len = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + len <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + len)];
  return out;
}

std::size_t total(const NgramCounts& c) {
  std::size_t s = 0;
  for (const auto& [g, n] : c) s += n;
  return s;
}

double f1(double overlap, double cand_total, double ref_total) {
  if (overlap <= 0 || cand_total <= 0 || ref_total <= 0) return 0.0;
  const double p = overlap / cand_total;
  const double r = overlap / ref_total;
  return 2 * p * r / (p + r);
}

std::vector<DialogueTurn> as_dialogue(const std::vector<TurnEntry>& entries, std::size_t end) {
  std::vector<DialogueTurn> out;
  for (std::size_t i = 0; i < end && i < entries.size(); ++i) out.push_back({entries[i].speaker, entries[i].text});
  return out;
}

struct Pipeline {
  std::shared_ptr<Gateway> gateway;
  std::unique_ptr<Engine> engine;
};

class Assets {
 public:
  explicit Assets(const Runner& r)
      : runner_(r),
        templates_(std::make_shared<const PromptTemplates>(PromptTemplates::load(r.assets_dir / "prompts"))),
        store_(load_fewshot_store(r.assets_dir / "fewshot.jsonl")) {}

  Pipeline pipeline(const std::string& language) const {
    std::shared_ptr<Backend> backend =
        runner_.backends ? runner_.backends(runner_.backend)
                         : make_backend(runner_.backend, (runner_.assets_dir / "mock_rules.json").string());
    Pipeline p;
    p.gateway = std::make_shared<Gateway>(runner_.backend, backend, templates_);
    EngineConfig ec = runner_.engine;
    ec.language = language;
    p.engine = std::make_unique<Engine>(ec, *p.gateway, store_);
    return p;
  }

 private:
  const Runner& runner_;
  std::shared_ptr<const PromptTemplates> templates_;
  std::vector<FewShotExample> store_;
};

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::optional<Tokenizer> parse_tokenizer(std::string_view s) {
  if (s == "ws") return Tokenizer::Whitespace;
  if (s == "char") return Tokenizer::Char;
  return std::nullopt;
}

Tokens tokenize(std::string_view s, Tokenizer t) {
  return t == Tokenizer::Char ? text::tokenize_chars(s) : text::tokenize_whitespace(s);
}

double rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
  if (n < 1) throw PreconditionViolation("rouge n must be at least 1");
  const NgramCounts c = ngrams(candidate, n);
  const NgramCounts r = ngrams(reference, n);
  std::size_t overlap = 0;
  for (const auto& [g, k] : c) {
    auto it = r.find(g);
    if (it != r.end()) overlap += std::min(k, it->second);
  }
  return f1(static_cast<double>(overlap), static_cast<double>(total(c)), static_cast<double>(total(r)));
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::vector<std::size_t> prev(reference.size() + 1, 0), cur(reference.size() + 1, 0);
  for (const auto& c : candidate) {
    for (std::size_t j = 1; j <= reference.size(); ++j)
      cur[j] = c == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return f1(static_cast<double>(prev.back()), static_cast<double>(candidate.size()),
            static_cast<double>(reference.size()));
}

std::vector<double> bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_n, bool smoothing) {
  if (max_n < 1) throw PreconditionViolation("bleu max_n must be at least 1");
  std::vector<double> out(static_cast<std::size_t>(max_n), 0.0);
  if (candidate.empty() || references.empty()) return out;

  const double c = static_cast<double>(candidate.size());
  std::size_t r = references.front().size();
  for (const auto& ref : references) {
    const auto d = [&](std::size_t len) { return std::abs(static_cast<double>(len) - c); };
    if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
  }
  const double bp = c > static_cast<double>(r) ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);

  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= max_n; ++n) {
    const NgramCounts cand = ngrams(candidate, n);
    NgramCounts max_ref;
    for (const auto& ref : references)
      for (const auto& [g, k] : ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], k);
    double matched = 0.0;
    for (const auto& [g, k] : cand) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += static_cast<double>(std::min(k, it->second));
    }
    double denom = static_cast<double>(total(cand));
    if (smoothing && n > 1) {
      matched += 1.0;
      denom += 1.0;
    }
    if (matched <= 0.0 || denom <= 0.0) zero = true;
    if (!zero) log_sum += std::log(matched / denom);
    out[static_cast<std::size_t>(n - 1)] = zero ? 0.0 : bp * std::exp(log_sum / n);
  }
  return out;
}

double question_rate(const std::vector<std::string>& agent_turns) {
  if (agent_turns.empty()) throw EmptyTranscript("no agent turns to score");
  const auto asked = std::count_if(agent_turns.begin(), agent_turns.end(),
                                   [](const std::string& t) { return text::count_question_sentences(t) > 0; });
  return static_cast<double>(asked) / static_cast<double>(agent_turns.size());
}

double question_rate(const std::vector<TurnEntry>& transcript) {
  std::vector<std::string> agent;
  for (const auto& e : transcript)
    if (e.speaker == "agent") agent.push_back(e.text);
  return question_rate(agent);
}

std::string MetricReport::table() const {
  static const std::vector<std::string> kHeader = {"Mode", "R-1", "R-2", "R-L", "B-1", "B-2", "B-3", "B-4", "QR", "N"};
  std::vector<std::vector<std::string>> cells = {kHeader};
  for (const auto& r : rows) {
    cells.push_back({r.mode, fixed(r.r1, 4), fixed(r.r2, 4), fixed(r.rl, 4), fixed(r.b1, 4), fixed(r.b2, 4),
                     fixed(r.b3, 4), fixed(r.b4, 4), fixed(r.question_rate, 3), std::to_string(r.pairs)});
  }
  std::vector<std::size_t> width(kHeader.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::ostringstream os;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    for (std::size_t i = 0; i < cells[k].size(); ++i) {
      if (i == 0) {
        os << std::left << std::setw(static_cast<int>(width[i])) << cells[k][i];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[i])) << cells[k][i];
      }
    }
    os << '\n';
    if (k == 0) {
      std::size_t line = 0;
      for (auto w : width) line += w + 2;
      os << std::string(line - 2, '-') << '\n';
    }
  }
  return os.str();
}

Json to_json(const MetricRow& r) {
  return {{"mode", r.mode}, {"r1", r.r1}, {"r2", r.r2}, {"rl", r.rl}, {"b1", r.b1},
          {"b2", r.b2},     {"b3", r.b3}, {"b4", r.b4}, {"question_rate", r.question_rate}, {"pairs", r.pairs}};
}

Json to_json(const MetricReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) rows.push_back(to_json(row));
  Json failures = Json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"transcript", f.transcript},
                        {"mode", f.mode},
                        {"turn_index", f.turn_index},
                        {"stage", f.stage},
                        {"code", f.code},
                        {"message", f.message}});
  }
  return {{"rows", rows}, {"failures", failures}, {"notes", r.notes}};
}

MetricRow score_pairs(const std::string& mode, const std::vector<std::string>& candidates,
                      const std::vector<std::string>& references, const ScoreOptions& options) {
  if (candidates.size() != references.size())
    throw PreconditionViolation("candidate and reference counts differ (" + std::to_string(candidates.size()) +
                                " vs " + std::to_string(references.size()) + ")");
  MetricRow row;
  row.mode = mode;
  row.pairs = candidates.size();
  if (candidates.empty()) return row;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Tokens c = tokenize(candidates[i], options.tokenizer);
    const Tokens r = tokenize(references[i], options.tokenizer);
    row.r1 += rouge_n(c, r, 1);
    row.r2 += rouge_n(c, r, 2);
    row.rl += rouge_l(c, r);
    const auto b = bleu(c, {r}, 4, options.smoothing);
    row.b1 += b[0];
    row.b2 += b[1];
    row.b3 += b[2];
    row.b4 += b[3];
  }
  const double n = static_cast<double>(candidates.size());
  for (double* v : {&row.r1, &row.r2, &row.rl, &row.b1, &row.b2, &row.b3, &row.b4}) *v /= n;
  row.question_rate = question_rate(candidates);
  return row;
}

MetricReport run_ablation(const std::filesystem::path& dir, const std::vector<SessionMode>& modes,
                          const Runner& runner, const ScoreOptions& options) {
  if (!std::filesystem::is_directory(dir)) throw EmptyTranscript("transcript directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyTranscript("no transcripts in " + dir.string());

  std::vector<std::pair<std::string, std::vector<TurnEntry>>> transcripts;
  for (const auto& f : files) {
    auto entries = read_transcript(f);
    if (std::none_of(entries.begin(), entries.end(), [](const TurnEntry& e) { return e.speaker == "agent"; }))
      throw MissingReference(f.filename().string() + " has no counselor reference turns");
    transcripts.emplace_back(f.filename().string(), std::move(entries));
  }

  const Assets assets(runner);
  MetricReport report;
  report.notes.push_back("references matched by user-turn position; unmatched trailing user turns skipped");
  for (SessionMode mode : modes) {
    std::vector<std::string> candidates, references;
    for (const auto& [name, entries] : transcripts) {
      const auto header = session_header(entries);
      const std::string language = header ? header->language : runner.engine.language;
      Pipeline p = assets.pipeline(language);
      MemoryState memory;
      bool first = true;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].speaker != "user") continue;
        const bool has_ref = i + 1 < entries.size() && entries[i + 1].speaker == "agent";
        if (!has_ref) continue;
        TurnInput input;
        input.mode = mode;
        input.utterance = entries[i].text;
        input.history = as_dialogue(entries, i);
        if (header) {
          input.emotion = header->emotion;
          if (first && !text::is_blank(header->concern)) input.concern = header->concern;
        }
        first = false;
        try {
          TurnOutput out = p.engine->run_turn(input, memory);
          memory = std::move(out.memory);
          candidates.push_back(std::move(out.reply));
          references.push_back(entries[i + 1].text);
        } catch (const StageError& e) {
          report.failures.push_back({name, to_string(mode), memory.turn_index, e.stage(), e.inner_code(), e.what()});
        } catch (const Error& e) {
          report.failures.push_back({name, to_string(mode), memory.turn_index, "", e.code(), e.what()});
        }
      }
    }
    if (candidates.empty()) {
      MetricRow empty;
      empty.mode = to_string(mode);
      report.rows.push_back(empty);
      continue;
    }
    report.rows.push_back(score_pairs(to_string(mode), candidates, references, options));
  }
  return report;
}

std::vector<TurnEntry> replay(const std::vector<TurnEntry>& transcript, const Runner& runner) {
  const auto header = session_header(transcript);
  const SessionHeader h = header.value_or(SessionHeader{SessionMode::Full, runner.engine.language, "", ""});
  const Assets assets(runner);
  Pipeline p = assets.pipeline(h.language);

  std::vector<TurnEntry> out;
  MemoryState memory;
  for (const auto& e : transcript) {
    if (e.speaker != "user") continue;
    TurnInput input;
    input.mode = h.mode;
    input.utterance = e.text;
    input.emotion = h.emotion;
    input.history = as_dialogue(out, out.size());
    if (out.empty() && !text::is_blank(h.concern)) input.concern = h.concern;
    TurnOutput result = p.engine->run_turn(input, memory);
    memory = result.memory;
    out.push_back({"user", e.text, e.stage_artifacts, Json(), ""});
    out.push_back({"agent", result.reply, result.artifacts, snapshot(result.memory), ""});
  }
  return out;
}

}  // namespace psyprobe::eval

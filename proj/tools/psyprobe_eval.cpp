#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "psyprobe/eval.hpp"

namespace pe = psyprobe::eval;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw psyprobe::InvalidConfig("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

void write_report(const std::string& path, const psyprobe::Json& doc) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw psyprobe::InvalidConfig("cannot write " + path);
  out << doc.dump(2) << "\n";
}

pe::Tokenizer tokenizer_from(const std::string& name) {
  auto t = pe::parse_tokenizer(name);
  if (!t) throw psyprobe::InvalidConfig("unknown tokenizer '" + name + "' (use ws or char)");
  return *t;
}

std::vector<psyprobe::SessionMode> modes_from(const std::string& list) {
  std::vector<psyprobe::SessionMode> out;
  std::istringstream in(list);
  std::string name;
  while (std::getline(in, name, ',')) {
    name = psyprobe::text::trim(name);
    if (name.empty()) continue;
    auto m = psyprobe::parse_session_mode(name);
    if (!m) throw psyprobe::InvalidConfig("unknown mode '" + name + "'");
    out.push_back(*m);
  }
  if (out.empty()) throw psyprobe::InvalidConfig("no modes given");
  return out;
}

pe::Runner make_runner(const std::string& assets, const std::string& config, bool mock) {
  pe::Runner r;
  r.assets_dir = assets;
  if (!config.empty()) {
    psyprobe::ServiceOptions o = psyprobe::default_service_options(assets);
    psyprobe::apply_config(o, psyprobe::read_json_file(config));
    r.engine = o.engine;
    r.backend = o.defaults.backend;
  }
  if (mock) r.backend = psyprobe::GatewayConfig{};
  return r;
}

bool same_turn(const psyprobe::TurnEntry& a, const psyprobe::TurnEntry& b) {
  return a.speaker == b.speaker && a.text == b.text && a.stage_artifacts.dump() == b.stage_artifacts.dump() &&
         a.memory_snapshot.dump() == b.memory_snapshot.dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PsyProbe evaluation harness"};
  app.require_subcommand(1);
  std::string assets = PSYPROBE_ASSET_DIR;
  app.add_option("--assets", assets, "Directory holding prompts, few-shot store and mock rules");

  std::string candidates, references, tokenizer = "ws", report;
  bool smoothing = false;
  auto* score = app.add_subcommand("score", "Score candidate lines against reference lines");
  score->add_option("--candidates", candidates, "One candidate per line")->required();
  score->add_option("--references", references, "One reference per line")->required();
  score->add_option("--tokenizer", tokenizer, "ws or char");
  score->add_flag("--smoothing", smoothing, "Add-one smoothing for BLEU orders above 1");
  score->add_option("--report", report, "Write a JSON report");

  std::string transcript;
  auto* qr = app.add_subcommand("qr", "Question rate of a transcript's agent turns");
  qr->add_option("--transcript", transcript, "Line-delimited transcript")->required();

  std::string dir, modes = "baseline,full,wo_sb,wo_sp,wo_qic", config;
  bool mock = false;
  auto* ablate = app.add_subcommand("ablate", "Regenerate and score every transcript under each mode");
  ablate->add_option("--dir", dir, "Directory of transcripts")->required();
  ablate->add_option("--modes", modes, "Comma-separated modes");
  ablate->add_option("--config", config, "JSON config with session/engine sections");
  ablate->add_flag("--mock", mock, "Use the deterministic mock backend");
  ablate->add_option("--tokenizer", tokenizer, "ws or char");
  ablate->add_flag("--smoothing", smoothing, "Add-one smoothing for BLEU orders above 1");
  ablate->add_option("--report", report, "Write a JSON report");

  auto* replay = app.add_subcommand("replay", "Replay a mock transcript and compare turn by turn");
  replay->add_option("--transcript", transcript, "Line-delimited transcript")->required();

  std::string messages, out_path, mode = "full", language = "en", concern, emotion;
  auto* record = app.add_subcommand("record", "Record a mock session from a file of user messages");
  record->add_option("--messages", messages, "One user message per line")->required();
  record->add_option("--out", out_path, "Transcript to write")->required();
  record->add_option("--mode", mode, "Session mode");
  record->add_option("--language", language, "Language tag");
  record->add_option("--concern", concern, "Presenting concern")->required();
  record->add_option("--emotion", emotion, "Reported emotion");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*score) {
      pe::ScoreOptions opts{tokenizer_from(tokenizer), smoothing};
      pe::MetricReport r;
      r.rows.push_back(pe::score_pairs("pairs", read_lines(candidates), read_lines(references), opts));
      std::cout << r.table();
      write_report(report, pe::to_json(r));
    } else if (*qr) {
      const auto entries = psyprobe::read_transcript(transcript);
      std::size_t agent = 0, asked = 0;
      for (const auto& e : entries) {
        if (e.speaker != "agent") continue;
        ++agent;
        if (psyprobe::text::count_question_sentences(e.text) > 0) ++asked;
      }
      const double rate = pe::question_rate(entries);
      std::cout << "question_rate " << rate << " (" << asked << "/" << agent << " agent turns)\n";
    } else if (*ablate) {
      pe::ScoreOptions opts{tokenizer_from(tokenizer), smoothing};
      const auto r = pe::run_ablation(dir, modes_from(modes), make_runner(assets, config, mock || config.empty()), opts);
      std::cout << r.table();
      for (const auto& n : r.notes) std::cout << "note: " << n << "\n";
      for (const auto& f : r.failures)
        std::cout << "failure: " << f.transcript << " mode=" << f.mode << " turn=" << f.turn_index
                  << " stage=" << f.stage << " " << f.code << "\n";
      write_report(report, pe::to_json(r));
    } else if (*replay) {
      const auto stored = psyprobe::read_transcript(transcript);
      const auto fresh = pe::replay(stored, make_runner(assets, "", true));
      if (fresh.size() != stored.size()) {
        std::cout << "MISMATCH: " << stored.size() << " stored entries, " << fresh.size() << " replayed\n";
        return 1;
      }
      for (std::size_t i = 0; i < stored.size(); ++i) {
        if (!same_turn(stored[i], fresh[i])) {
          std::cout << "MISMATCH at entry " << i << "\n  stored:   " << stored[i].text
                    << "\n  replayed: " << fresh[i].text << "\n";
          return 1;
        }
      }
      std::cout << "replay identical (" << stored.size() << " entries)\n";
    } else if (*record) {
      auto m = psyprobe::parse_session_mode(mode);
      if (!m) throw psyprobe::InvalidConfig("unknown mode '" + mode + "'");
      psyprobe::ServiceOptions o = psyprobe::default_service_options(assets);
      o.clock = [] { return std::chrono::system_clock::time_point(std::chrono::seconds(1'735'689'600)); };
      psyprobe::SessionManager manager(o);
      psyprobe::SessionConfig sc;
      sc.mode = *m;
      sc.language = language;
      const std::string id = manager.create_session(sc, concern, emotion);
      for (const auto& line : read_lines(messages))
        if (!psyprobe::text::is_blank(line)) manager.post_message(id, line);
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw psyprobe::InvalidConfig("cannot write " + out_path);
      out << psyprobe::to_jsonl(manager.end_session(id));
      std::cout << "wrote " << out_path << "\n";
    }
  } catch (const psyprobe::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}

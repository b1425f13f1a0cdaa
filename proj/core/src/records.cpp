#include "qaguide/records.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "qaguide/error.hpp"

namespace qaguide::records {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json item_json(const QaItem& it) {
  return {{"q", it.question}, {"e", it.explanation}, {"a", it.answer}, {"t", to_string(it.qtype)}};
}

QaItem item_from_json(const json& j) {
  QaItem it;
  it.question = j.value("q", "");
  it.explanation = j.value("e", "");
  it.answer = j.value("a", "");
  it.qtype = parse_question_type(j.value("t", "Other")).value_or(QuestionType::kOther);
  return it;
}

json chunks_json(const ReasoningTrace& trace) {
  json chunks = json::array();
  for (const auto& p : trace.provenance) {
    json items = nullptr;
    if (!p.sentinel) {
      items = json::array();
      for (std::size_t i = p.begin; i < p.end; ++i) items.push_back(item_json(trace.items[i]));
    }
    chunks.push_back({{"index", p.chunk_index}, {"items", items}});
  }
  return chunks;
}

ReasoningTrace trace_from_chunks(const json& chunks) {
  std::vector<ChunkFragment> fragments;
  for (const auto& c : chunks) {
    ChunkFragment f;
    f.chunk_index = c.at("index").get<std::size_t>();
    if (!c.at("items").is_null()) {
      f.items.emplace();
      for (const auto& it : c.at("items")) f.items->push_back(item_from_json(it));
    }
    fragments.push_back(std::move(f));
  }
  return concat_traces(fragments);
}

json prf_json(const PrfScore& s) { return {{"p", s.p}, {"r", s.r}, {"f", s.f}}; }

PrfScore prf_from_json(const json& j) {
  return {j.at("p").get<double>(), j.at("r").get<double>(), j.at("f").get<double>()};
}

json stats_json(const TextStats& s) {
  return {{"tokens", s.tokens}, {"unique_unigram_pct", s.unique_unigram_pct}};
}

TextStats stats_from_json(const json& j) {
  return {j.value("tokens", std::size_t{0}), j.value("unique_unigram_pct", 0.0)};
}

template <typename Fn>
auto parse_guard(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, what + ": " + e.what());
  }
}

}  // namespace

json trace_record(std::string_view task_id, const ReasoningTrace& trace) {
  return {{"task_id", task_id}, {"chunks", chunks_json(trace)}};
}

ReasoningTrace trace_from_record(const json& j) {
  return parse_guard("trace record", [&] { return trace_from_chunks(j.at("chunks")); });
}

json description_record(const Description& d, std::optional<std::int64_t> seed) {
  json j = {{"task_id", d.task_id},
            {"strategy", d.strategy},
            {"mode", to_string(d.mode)},
            {"text", d.text},
            {"stats", stats_json(d.stats)},
            {"warnings", d.warnings}};
  if (d.trace) j["trace"] = chunks_json(*d.trace);
  if (seed) j["seed"] = *seed;
  return j;
}

Description description_from_record(const json& j) {
  return parse_guard("description record", [&] {
    Description d;
    d.task_id = j.at("task_id").get<std::string>();
    d.strategy = j.value("strategy", "");
    d.mode = parse_reasoning_mode(j.value("mode", "no_trace"));
    d.text = j.at("text").get<std::string>();
    if (j.contains("stats")) d.stats = stats_from_json(j.at("stats"));
    d.warnings = j.value("warnings", std::vector<std::string>{});
    if (j.contains("trace")) d.trace = trace_from_chunks(j.at("trace"));
    return d;
  });
}

json metric_record(const MetricReport& r) {
  json j = {{"task_id", r.task_id}, {"stats", stats_json(r.stats)}, {"notices", r.notices}};
  j["prisma"] = r.prisma ? prf_json(*r.prisma) : json(nullptr);
  j["qa_f1"] = r.qa_f1 ? json(*r.qa_f1) : json(nullptr);
  j["nli"] = r.nli ? json(*r.nli) : json(nullptr);
  j["entmention"] = r.entmention ? prf_json(*r.entmention) : json(nullptr);
  j["rouge_l"] = r.rouge_l ? prf_json(*r.rouge_l) : json(nullptr);
  return j;
}

MetricReport metric_from_record(const json& j) {
  return parse_guard("metric record", [&] {
    MetricReport r;
    r.task_id = j.at("task_id").get<std::string>();
    if (j.contains("stats")) r.stats = stats_from_json(j.at("stats"));
    r.notices = j.value("notices", std::vector<std::string>{});
    auto prf = [&](const char* key) -> std::optional<PrfScore> {
      if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
      return prf_from_json(j.at(key));
    };
    auto num = [&](const char* key) -> std::optional<double> {
      if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
      return j.at(key).get<double>();
    };
    r.prisma = prf("prisma");
    r.qa_f1 = num("qa_f1");
    r.nli = num("nli");
    r.entmention = prf("entmention");
    r.rouge_l = prf("rouge_l");
    return r;
  });
}

json qa_items_json(const std::vector<QaPair>& pairs) {
  json out = json::array();
  for (const auto& p : pairs) out.push_back({{"q", p.question}, {"a", p.answer}});
  return out;
}

std::vector<QaPair> qa_pairs_from_json(const json& j) {
  return parse_guard("qa items", [&] {
    std::vector<QaPair> out;
    for (const auto& it : j) out.push_back({it.at("q").get<std::string>(), it.at("a").get<std::string>()});
    return out;
  });
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_text_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIo, "rename to " + path.string() + " failed: " + ec.message());
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::string body;
  for (const auto& r : rows) {
    body += r.dump();
    body += '\n';
  }
  write_text_atomic(path, body);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

}  // namespace qaguide::records

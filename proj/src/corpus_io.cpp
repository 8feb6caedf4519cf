#include "turnkit/corpus_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace turnkit {

using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(where + ": field '" + key + "' has the wrong type");
  }
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

DialogSession read_session(std::istream& in, const std::string& session_id) {
  DialogSession s;
  s.session_id = session_id;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (blank(line)) continue;
    const std::string where = session_id + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(where + ": invalid JSON (" + e.what() + ")");
    }
    AlignedWord w;
    w.speaker = field<std::string>(j, "speaker", where);
    w.sentence_id = field<int>(j, "sentence_id", where);
    w.text = field<std::string>(j, "word", where);
    w.start = field<double>(j, "start", where);
    w.end = field<double>(j, "end", where);
    if (!(w.start >= 0.0)) throw Error(where + ": negative start time");
    if (!(w.end >= w.start)) throw Error(where + ": end precedes start");
    s.words.push_back(std::move(w));
  }
  if (s.speakers().size() > 2) throw Error(session_id + ": more than two speakers");
  return s;
}

DialogSession read_session_file(const fs::path& path) {
  auto in = open_in(path);
  return read_session(in, path.stem().string());
}

void write_session(std::ostream& out, const DialogSession& session) {
  for (const auto& w : session.words) {
    json j = {{"speaker", w.speaker}, {"sentence_id", w.sentence_id}, {"word", w.text},
              {"start", w.start}, {"end", w.end}};
    out << j.dump() << '\n';
  }
}

std::vector<fs::path> list_session_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::string sample_to_json(const Sample& s) {
  json history = json::array();
  for (const auto& h : s.history)
    history.push_back({{"mark", h.self ? kSelfMark : kOtherMark}, {"tokens", h.tokens}});
  json j = {{"sample_id", s.sample_id},
            {"session_id", s.session_id},
            {"speaker", s.speaker},
            {"tokens", s.tokens},
            {"acoustic_ref",
             {{"session_id", s.acoustic_ref.session_id},
              {"speaker", s.acoustic_ref.speaker},
              {"sentence_id", s.acoustic_ref.sentence_id},
              {"start", s.acoustic_ref.start},
              {"end", s.acoustic_ref.end}}},
            {"history", history},
            {"label", to_int(s.label)}};
  return j.dump();
}

Sample sample_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(std::string("invalid sample JSON: ") + e.what());
  }
  const std::string where = "sample";
  Sample s;
  s.sample_id = field<std::string>(j, "sample_id", where);
  s.session_id = field<std::string>(j, "session_id", where);
  s.speaker = field<std::string>(j, "speaker", where);
  s.tokens = field<std::vector<std::string>>(j, "tokens", where);
  if (s.tokens.empty()) throw Error("sample " + s.sample_id + ": empty token list");
  const auto ref = field<json>(j, "acoustic_ref", where);
  s.acoustic_ref.session_id = field<std::string>(ref, "session_id", where);
  s.acoustic_ref.speaker = field<std::string>(ref, "speaker", where);
  s.acoustic_ref.sentence_id = field<int>(ref, "sentence_id", where);
  s.acoustic_ref.start = field<double>(ref, "start", where);
  s.acoustic_ref.end = field<double>(ref, "end", where);
  for (const auto& h : field<json>(j, "history", where)) {
    HistoryEntry e;
    const auto mark = field<std::string>(h, "mark", where);
    if (mark != kSelfMark && mark != kOtherMark) throw Error("sample " + s.sample_id + ": bad speaker mark " + mark);
    e.self = mark == kSelfMark;
    e.tokens = field<std::vector<std::string>>(h, "tokens", where);
    s.history.push_back(std::move(e));
  }
  s.label = turn_event_from_int(field<int>(j, "label", where));
  return s;
}

void write_samples(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) out << sample_to_json(s) << '\n';
}

std::vector<Sample> read_samples(std::istream& in) {
  std::vector<Sample> out;
  std::string line;
  while (std::getline(in, line))
    if (!blank(line)) out.push_back(sample_from_json(line));
  return out;
}

std::vector<Sample> read_samples_file(const fs::path& path) {
  auto in = open_in(path);
  return read_samples(in);
}

BackchannelLexicon read_lexicon(std::istream& in) {
  BackchannelLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line) || line.front() == '#') continue;
    lex.add(line);
  }
  return lex;
}

BackchannelLexicon read_lexicon_file(const fs::path& path) {
  auto in = open_in(path);
  return read_lexicon(in);
}

void write_lexicon(std::ostream& out, const BackchannelLexicon& lexicon) {
  for (const auto& p : lexicon.phrases()) out << p << '\n';
}

std::string split_manifest_json(const SplitAssignment& splits) {
  json j = json::object();
  for (const auto& [id, split] : splits) j[id] = split_name(split);
  return j.dump(2) + "\n";
}

SplitAssignment parse_split_manifest(const std::string& text) {
  SplitAssignment out;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("invalid split manifest: ") + e.what());
  }
  for (const auto& [id, name] : j.items()) out[id] = split_from_name(name.get<std::string>());
  return out;
}

}  // namespace turnkit

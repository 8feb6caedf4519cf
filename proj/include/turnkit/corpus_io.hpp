#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "turnkit/corpus.hpp"

namespace turnkit {

namespace fs = std::filesystem;

// Session file: one JSON object per line,
//   {"speaker": "A", "sentence_id": 3, "word": "yeah", "start": 1.25, "end": 1.5}
// The session id is the file name without extension.
DialogSession read_session(std::istream& in, const std::string& session_id);
DialogSession read_session_file(const fs::path& path);
void write_session(std::ostream& out, const DialogSession& session);

// Session files under `dir` (*.jsonl), sorted by session id.
std::vector<fs::path> list_session_files(const fs::path& dir);

std::string sample_to_json(const Sample& s);
Sample sample_from_json(const std::string& line);
void write_samples(std::ostream& out, const std::vector<Sample>& samples);
std::vector<Sample> read_samples(std::istream& in);
std::vector<Sample> read_samples_file(const fs::path& path);

// Lexicon file: plain text, one phrase per line; blank lines and lines
// starting with '#' are skipped.
BackchannelLexicon read_lexicon(std::istream& in);
BackchannelLexicon read_lexicon_file(const fs::path& path);
void write_lexicon(std::ostream& out, const BackchannelLexicon& lexicon);

// Split manifest: JSON object session_id -> "train" | "validation" | "test".
std::string split_manifest_json(const SplitAssignment& splits);
SplitAssignment parse_split_manifest(const std::string& json);

}  // namespace turnkit

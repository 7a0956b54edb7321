#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "autoform/core.hpp"
#include "autoform/error.hpp"
#include "autoform/hash.hpp"
#include "autoform/message.hpp"
#include "autoform/records.hpp"

namespace autoform {

namespace fs = std::filesystem;

struct Corpus {
  std::vector<TheoremItem> items;
  std::array<std::size_t, 4> per_domain{};

  std::size_t size() const { return items.size(); }
  std::size_t count(Domain d) const { return per_domain[domain_index(d)]; }
  const TheoremItem* find(const std::string& id) const {
    for (const auto& it : items) {
      if (it.id == id) return &it;
    }
    return nullptr;
  }
};

/// Parses a line-delimited JSON corpus: one object per line with keys
/// id, domain, statement and optional source. Blank lines are skipped. Items keep file order.
inline Corpus parse_corpus(std::istream& in, const std::string& origin = "<corpus>") {
  Corpus corpus;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = [&] { return origin + ":" + std::to_string(lineno); };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where() + ": malformed line: " + e.what());
    }
    if (!j.is_object()) throw ValidationError(where() + ": malformed line: expected a JSON object");
    for (const char* k : {"id", "domain", "statement"}) {
      if (!j.contains(k) || !j[k].is_string()) {
        throw ValidationError(where() + ": malformed line: missing string field '" + k + "'");
      }
    }
    TheoremItem item;
    item.id = j["id"].get<std::string>();
    if (item.id.empty()) throw ValidationError(where() + ": malformed line: empty id");
    auto d = parse_domain(j["domain"].get<std::string>());
    if (!d) {
      throw ValidationError(where() + ": unknown domain label '" + j["domain"].get<std::string>() +
                            "'");
    }
    item.domain = *d;
    item.statement_text = j["statement"].get<std::string>();
    if (item.statement_text.empty()) {
      throw ValidationError(where() + ": malformed line: empty statement");
    }
    if (j.contains("source")) {
      if (!j["source"].is_string()) throw ValidationError(where() + ": malformed line: 'source' must be a string");
      item.source_ref = j["source"].get<std::string>();
    }
    if (!seen.insert(item.id).second) {
      throw ValidationError(where() + ": duplicate id '" + item.id + "'");
    }
    ++corpus.per_domain[domain_index(item.domain)];
    corpus.items.push_back(std::move(item));
  }
  if (corpus.items.empty()) throw ValidationError("empty corpus");
  return corpus;
}

inline Corpus load_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file " + path.string());
  return parse_corpus(in, path.string());
}

inline std::string corpus_line(const TheoremItem& item) {
  return json{{"id", item.id},
              {"domain", to_string(item.domain)},
              {"statement", item.statement_text},
              {"source", item.source_ref}}
      .dump();
}

struct RunFilter {
  std::optional<ToolConfig> config;
  std::optional<Domain> domain;
  std::optional<std::string> orchestrator_id;
};

/// Append-only run store for one experiment:
///   <dir>/runs.jsonl          one RunRecord per line, later lines supersede
///   <dir>/transcripts/<h>.json  transcripts keyed by SHA-256 of their JSON
/// Safe for concurrent writers in one process (mutex) and across processes
/// (flock on runs.jsonl). Readers only ever parse newline-terminated lines.
class RunStore {
 public:
  explicit RunStore(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_ / "transcripts", ec);
    if (ec) storage_fail("cannot create store directory " + dir_.string(), ec.message());
  }

  const fs::path& dir() const { return dir_; }
  fs::path runs_path() const { return dir_ / "runs.jsonl"; }

  /// Persists the transcript, then the record. Returns the run key.
  std::string store_run(RunRecord record, const EpisodeTranscript& transcript,
                        bool overwrite = false) {
    record.transcript_ref = put_transcript(transcript);
    validate_record(record);
    return append(record, overwrite ? WriteMode::Overwrite : WriteMode::Insert);
  }

  /// Supersedes an existing record (e.g. to attach verdicts). The record's
  /// transcript must already be stored.
  std::string replace_record(const RunRecord& record) {
    validate_record(record);
    if (!fs::exists(transcript_path(record.transcript_ref))) {
      throw ValidationError("run " + record.key() + ": transcript_ref '" + record.transcript_ref +
                            "' does not resolve");
    }
    return append(record, WriteMode::Replace);
  }

  std::vector<RunRecord> query_runs(const RunFilter& filter = {}) {
    std::lock_guard lock(mu_);
    refresh_locked();
    std::vector<RunRecord> out;
    for (const auto& [key, rec] : index_) {
      if (filter.config && rec.config != *filter.config) continue;
      if (filter.domain && rec.domain != *filter.domain) continue;
      if (filter.orchestrator_id && rec.orchestrator_id != *filter.orchestrator_id) continue;
      out.push_back(rec);
    }
    std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
      if (a.theorem_id != b.theorem_id) return a.theorem_id < b.theorem_id;
      if (a.config != b.config) return a.config < b.config;
      return a.orchestrator_id < b.orchestrator_id;
    });
    return out;
  }

  std::optional<RunRecord> find(const std::string& key) {
    std::lock_guard lock(mu_);
    refresh_locked();
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& key) { return find(key).has_value(); }

  EpisodeTranscript load_transcript(const std::string& ref) const {
    std::ifstream in(transcript_path(ref));
    if (!in) throw StorageError("transcript '" + ref + "' not found in " + dir_.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return json::parse(ss.str()).get<EpisodeTranscript>();
  }

  /// SHA-256 of the run log; recorded in report manifests.
  std::string content_hash() const {
    std::ifstream in(runs_path(), std::ios::binary);
    if (!in) return sha256_hex("");
    std::stringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
  }

  static std::string transcript_hash(const EpisodeTranscript& t) {
    return sha256_hex(json(t).dump());
  }

 private:
  enum class WriteMode { Insert, Overwrite, Replace };

  [[noreturn]] static void storage_fail(const std::string& what, const std::string& why) {
    throw StorageError(what + ": " + why +
                       " (check free space and permissions, then retry; stored runs are kept)");
  }

  fs::path transcript_path(const std::string& ref) const {
    return dir_ / "transcripts" / (ref + ".json");
  }

  std::string put_transcript(const EpisodeTranscript& t) {
    const std::string body = json(t).dump();
    const std::string ref = sha256_hex(body);
    const fs::path target = transcript_path(ref);
    if (fs::exists(target)) return ref;
    // Unique temp name per writer, then atomic rename: readers never see partial files.
    std::ostringstream tmpname;
    tmpname << ref << ".tmp." << ::getpid() << "." << std::hash<std::thread::id>{}(std::this_thread::get_id());
    const fs::path tmp = dir_ / "transcripts" / tmpname.str();
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) storage_fail("cannot write transcript " + tmp.string(), std::strerror(errno));
      out << body;
      out.flush();
      if (!out) storage_fail("short write on transcript " + tmp.string(), std::strerror(errno));
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) storage_fail("cannot publish transcript " + target.string(), ec.message());
    return ref;
  }

  std::string append(const RunRecord& record, WriteMode mode) {
    const std::string key = record.key();
    std::string line = json(record).dump();
    line.push_back('\n');

    std::lock_guard lock(mu_);
    int fd = ::open(runs_path().c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) storage_fail("cannot open " + runs_path().string(), std::strerror(errno));
    struct FdGuard {
      int fd;
      ~FdGuard() {
        ::flock(fd, LOCK_UN);
        ::close(fd);
      }
    } guard{fd};
    if (::flock(fd, LOCK_EX) != 0) storage_fail("cannot lock run log", std::strerror(errno));

    refresh_locked();
    const bool exists = index_.count(key) != 0;
    if (mode == WriteMode::Insert && exists) {
      throw ConflictError("run " + key + " already stored; pass overwrite to replace it");
    }
    if (mode == WriteMode::Replace && !exists) {
      throw ValidationError("run " + key + " is not stored; nothing to replace");
    }
    std::size_t written = 0;
    while (written < line.size()) {
      ssize_t n = ::write(fd, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        storage_fail("append to run log failed", std::strerror(errno));
      }
      written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) storage_fail("fsync of run log failed", std::strerror(errno));
    refresh_locked();
    return key;
  }

  // Reads newly appended complete lines into the index. Caller holds mu_.
  void refresh_locked() {
    std::ifstream in(runs_path(), std::ios::binary);
    if (!in) return;
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    if (size <= offset_) return;
    in.seekg(offset_);
    std::string chunk(static_cast<std::size_t>(size - offset_), '\0');
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    chunk.resize(static_cast<std::size_t>(in.gcount()));
    const auto last_nl = chunk.rfind('\n');
    if (last_nl == std::string::npos) return;  // only a partial line so far
    std::size_t start = 0;
    while (start <= last_nl) {
      const auto nl = chunk.find('\n', start);
      std::string_view line(chunk.data() + start, nl - start);
      ++lines_read_;
      if (!line.empty()) {
        try {
          RunRecord r = json::parse(line).get<RunRecord>();
          index_[r.key()] = std::move(r);
        } catch (const std::exception& e) {
          throw StorageError("corrupt run log " + runs_path().string() + " line " +
                             std::to_string(lines_read_) + ": " + e.what());
        }
      }
      start = nl + 1;
    }
    offset_ += static_cast<std::streamoff>(last_nl + 1);
  }

  fs::path dir_;
  std::mutex mu_;
  std::map<std::string, RunRecord> index_;
  std::streamoff offset_ = 0;
  std::size_t lines_read_ = 0;
};

}  // namespace autoform

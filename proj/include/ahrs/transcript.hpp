#pragma once

// Append-only transcript of LLM interactions: one JSON record per line.
// The `prompt` field holds the canonical serialized request (model, system,
// user, sampling settings), and `prompt_hash` its SHA-256, so replay can
// verify both file integrity and that a re-run is issuing the same requests.

#include <openssl/evp.h>

#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ahrs/common.hpp"

namespace ahrs {

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct TranscriptRecord {
  long tick = -1;
  long epoch = -1;
  std::string prompt_hash;
  std::string prompt;    // canonical request bytes
  std::string response;  // message content, or error text on failure
  std::string parsed;    // e.g. "3" or "0.5,0.75,1"; empty if unparsed
  bool failed = false;   // transport or parse failure at this call
  std::string timestamp;
  std::string kind = "success";  // success | transport_error | http_error:N | timeout
};

inline nlohmann::json to_json(const TranscriptRecord& r) {
  return nlohmann::json{
      {"tick", r.tick},       {"epoch", r.epoch},
      {"prompt_hash", r.prompt_hash}, {"prompt", r.prompt},
      {"response", r.response}, {"parsed", r.parsed},
      {"failed", r.failed},   {"ts", r.timestamp},
      {"kind", r.kind},
  };
}

inline TranscriptRecord record_from_json(const nlohmann::json& j) {
  TranscriptRecord r;
  r.tick = j.at("tick").get<long>();
  r.epoch = j.at("epoch").get<long>();
  r.prompt_hash = j.at("prompt_hash").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.response = j.at("response").get<std::string>();
  r.parsed = j.at("parsed").get<std::string>();
  r.failed = j.at("failed").get<bool>();
  r.timestamp = j.at("ts").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  return r;
}

class TranscriptWriter {
 public:
  explicit TranscriptWriter(const std::string& path)
      : file_(path, std::ios::app) {
    require(file_.good(), Errc::io_error, "cannot open transcript " + path);
  }

  void append(const TranscriptRecord& record) {
    file_ << to_json(record).dump() << "\n";
    file_.flush();
    require(file_.good(), Errc::io_error, "transcript write failed");
  }

 private:
  std::ofstream file_;
};

inline std::vector<TranscriptRecord> read_transcript(const std::string& path) {
  std::ifstream file(path);
  require(file.good(), Errc::io_error, "cannot open transcript " + path);
  std::vector<TranscriptRecord> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(file, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    require(!j.is_discarded(), Errc::io_error,
            strprintf("bad transcript record at line %zu of %s", lineno,
                      path.c_str()));
    records.push_back(record_from_json(j));
  }
  return records;
}

}  // namespace ahrs

#pragma once

#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "frforge/detector/detector.hpp"
#include "frforge/feedback/feedback.hpp"

namespace httplib {
class Server;
}

namespace frforge::cli {

struct TriageResponse {
  int status = 200;
  Json body;
};

// Review queue over a candidates file, persisting verdicts to an append-only
// annotations log. Mutating calls are serialized.
class TriageService {
 public:
  TriageService(const std::filesystem::path& candidates, const std::filesystem::path& pool_logs,
                const std::filesystem::path& annotations);

  // JSON array of {id, text, routed_domain, score} in queue order (score
  // descending), strictly after id `after` (empty = from the start).
  TriageResponse list(const std::string& after, const std::string& limit) const;
  TriageResponse annotate(const std::string& body);
  TriageResponse progress() const;

 private:
  struct Item {
    detector::ScoredRecord score;
    double score_value = 0.0;
    std::string text;
  };

  std::vector<Item> items_;
  std::filesystem::path annotations_path_;
  std::set<std::string> annotated_;
  std::size_t confirmed_ = 0;
  mutable std::mutex mutex_;
};

// Registers the /api routes of `service` on `server`.
void mount_triage_routes(httplib::Server& server, TriageService& service);

// Serves on 127.0.0.1:`port` until the process is stopped.
void serve_triage(TriageService& service, int port);

}  // namespace frforge::cli

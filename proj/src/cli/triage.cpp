#include "frforge/cli/triage.hpp"

#include <charconv>
#include <unordered_map>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "frforge/common/error.hpp"

namespace frforge::cli {
namespace {

TriageResponse error(int status, const std::string& message, const std::string& field = {}) {
  Json body{{"error", message}};
  if (!field.empty()) body["field"] = field;
  return {status, body};
}

constexpr std::size_t kMaxLimit = 500;

}  // namespace

TriageService::TriageService(const std::filesystem::path& candidates, const std::filesystem::path& pool_logs,
                             const std::filesystem::path& annotations)
    : annotations_path_(annotations) {
  const auto [header, scores] = detector::read_scores(candidates);
  std::unordered_map<std::string, const nlu::RoutingRecord*> by_id;
  const auto pool = nlu::read_logs(pool_logs);
  for (const auto& r : pool) by_id.emplace(r.utterance.id, &r);
  for (const auto& s : scores) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) throw ConfigError("candidate " + s.id + " missing from " + pool_logs.string());
    const auto head = models::head_from_string(header.head);
    items_.push_back({s, detector::score_of(s, head), corpus::join_tokens(it->second->utterance.text)});
  }
  for (const auto& a : feedback::read_annotations(annotations)) {
    if (annotated_.insert(a.id).second && a.verdict == feedback::Verdict::fr) ++confirmed_;
  }
}

TriageResponse TriageService::list(const std::string& after, const std::string& limit_text) const {
  std::size_t limit = 50;
  if (!limit_text.empty()) {
    std::size_t v = 0;
    const auto* end = limit_text.data() + limit_text.size();
    const auto [ptr, ec] = std::from_chars(limit_text.data(), end, v);
    if (ec != std::errc() || ptr != end || v == 0 || v > kMaxLimit) {
      return error(400, "limit must be an integer in [1, " + std::to_string(kMaxLimit) + "]", "limit");
    }
    limit = v;
  }
  std::lock_guard lock(mutex_);
  std::size_t start = 0;
  if (!after.empty()) {
    const auto it = std::find_if(items_.begin(), items_.end(), [&](const Item& i) { return i.score.id == after; });
    if (it == items_.end()) return error(404, "unknown candidate id '" + after + "'", "after");
    start = static_cast<std::size_t>(it - items_.begin()) + 1;
  }
  Json out = Json::array();
  for (std::size_t i = start; i < items_.size() && out.size() < limit; ++i) {
    const auto& it = items_[i];
    out.push_back({{"id", it.score.id}, {"text", it.text}, {"routed_domain", it.score.routed_domain}, {"score", it.score_value}});
  }
  return {200, out};
}

TriageResponse TriageService::annotate(const std::string& text) {
  Json body;
  try {
    body = Json::parse(text);
  } catch (const Json::parse_error&) {
    return error(400, "request body is not valid JSON", "body");
  }
  if (!body.is_object()) return error(400, "request body must be a JSON object", "body");
  for (const auto& [key, _] : body.items()) {
    if (key != "id" && key != "verdict") return error(400, "unknown field '" + key + "'", key);
  }
  if (!body.contains("id") || !body.at("id").is_string() || body.at("id").get<std::string>().empty()) {
    return error(400, "id must be a non-empty string", "id");
  }
  if (!body.contains("verdict") || !body.at("verdict").is_string()) {
    return error(400, "verdict must be \"fr\" or \"not_fr\"", "verdict");
  }
  feedback::Annotation a;
  a.id = body.at("id").get<std::string>();
  a.source = feedback::Source::human;
  a.timestamp = feedback::utc_timestamp();
  try {
    a.verdict = feedback::verdict_from_string(body.at("verdict").get<std::string>());
  } catch (const ContractError&) {
    return error(400, "verdict must be \"fr\" or \"not_fr\"", "verdict");
  }
  std::lock_guard lock(mutex_);
  const bool known = std::any_of(items_.begin(), items_.end(), [&](const Item& i) { return i.score.id == a.id; });
  if (!known) return error(404, "unknown candidate id '" + a.id + "'", "id");
  if (annotated_.contains(a.id)) return error(409, "candidate '" + a.id + "' is already annotated", "id");
  feedback::append_annotations(annotations_path_, {a});
  annotated_.insert(a.id);
  if (a.verdict == feedback::Verdict::fr) ++confirmed_;
  return {200, feedback::annotation_to_json(a)};
}

TriageResponse TriageService::progress() const {
  std::lock_guard lock(mutex_);
  std::size_t reviewed = 0;
  for (const auto& i : items_) reviewed += annotated_.contains(i.score.id);
  return {200, {{"reviewed", reviewed}, {"remaining", items_.size() - reviewed}, {"confirmed", confirmed_}}};
}

void mount_triage_routes(httplib::Server& server, TriageService& service) {
  auto reply = [](httplib::Response& res, const TriageResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/api/candidates", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.list(req.get_param_value("after"), req.get_param_value("limit")));
  });
  server.Post("/api/annotations", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.annotate(req.body));
  });
  server.Get("/api/progress", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.progress());
  });
}

void serve_triage(TriageService& service, int port) {
  httplib::Server server;
  server.new_task_queue = [] { return new httplib::ThreadPool(1); };
  mount_triage_routes(server, service);
  spdlog::info("triage API listening on http://127.0.0.1:{}", port);
  if (!server.listen("127.0.0.1", port)) throw ConfigError("cannot listen on 127.0.0.1:" + std::to_string(port));
}

}  // namespace frforge::cli

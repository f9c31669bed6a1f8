#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "frforge/common/rng.hpp"
#include "frforge/corpus/dataset.hpp"
#include "frforge/models/config.hpp"

namespace fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("frforge-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline frforge::nlu::NBestList nbest(std::initializer_list<std::pair<int, double>> hyps) {
  frforge::nlu::NBestList l;
  for (auto [d, s] : hyps) l.hypotheses.push_back({d, 0, s});
  return l;
}

// Small model: 2-layer transformer, H=8, 2 heads, four domains.
inline frforge::models::ModelConfig tiny_model(frforge::models::ModelKind kind, int vocab_size) {
  frforge::models::ModelConfig c;
  c.kind = kind;
  c.transformer.vocab_size = vocab_size;
  c.transformer.hidden = 8;
  c.transformer.layers = 2;
  c.transformer.heads = 2;
  c.transformer.ff_multiple = 2;
  c.transformer.max_length = 8;
  c.transformer.dropout = 0.0;
  c.lstm.vocab_size = vocab_size;
  c.lstm.embedding_dim = 6;
  c.lstm.hidden = 5;
  c.fusion.n = 3;
  c.fusion.d = 6;
  c.fusion.hidden = 8;
  c.fusion.num_domains = 4;
  c.target_domain = 0;
  return c;
}

// Labeled example whose text is `words`; routed and true domains as given.
inline frforge::corpus::LabeledExample example(const std::string& id, std::vector<std::string> words, int true_domain,
                                               int routed, frforge::nlu::NBestList list, int target = 0) {
  frforge::corpus::LabeledExample e;
  e.utterance = {id, std::move(words), true_domain, 0};
  e.nbest = std::move(list);
  e.routed_domain = routed;
  e.label_domain = true_domain == target;
  e.label_fr = true_domain == target && routed != target;
  return e;
}

}  // namespace fixtures

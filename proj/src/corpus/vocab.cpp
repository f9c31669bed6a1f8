#include "frforge/corpus/vocab.hpp"

#include <fstream>
#include <set>

#include "frforge/common/error.hpp"
#include "frforge/common/io.hpp"
#include "frforge/common/rng.hpp"

namespace frforge::corpus {

Vocabulary::Vocabulary() {
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[MASK]"}) {
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(t);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& texts) {
  std::set<std::string> words;
  for (const auto& text : texts) words.insert(text.begin(), text.end());
  Vocabulary v;
  for (const auto& w : words) {
    if (v.index_.contains(w)) continue;
    v.index_.emplace(w, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(w);
  }
  return v;
}

Vocabulary Vocabulary::extended(const std::vector<std::vector<std::string>>& texts) const {
  std::set<std::string> fresh;
  for (const auto& text : texts)
    for (const auto& w : text)
      if (!index_.contains(w)) fresh.insert(w);
  Vocabulary v = *this;
  for (const auto& w : fresh) {
    v.index_.emplace(w, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(w);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::uint64_t Vocabulary::digest() const {
  std::uint64_t h = fnv1a64("vocab");
  for (const auto& t : tokens_) h = fnv1a64(t + "\n", h);
  return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& t : tokens_) out += t + "\n";
  write_text_file(path, out);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary reserved;
  if (tokens.size() < reserved.tokens_.size() ||
      !std::equal(reserved.tokens_.begin(), reserved.tokens_.end(), tokens.begin())) {
    throw ContractError("vocabulary does not start with the reserved tokens");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
      throw ContractError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  try {
    return from_tokens(std::move(tokens));
  } catch (const ContractError& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

}  // namespace frforge::corpus

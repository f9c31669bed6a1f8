#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace frforge::corpus {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kMaskId = 3;
inline constexpr int kNumReserved = 4;

class Vocabulary {
 public:
  Vocabulary();

  // Words sorted lexicographically after the reserved tokens.
  static Vocabulary build(const std::vector<std::vector<std::string>>& texts);

  // Exact token order, which must begin with the reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  // Appends unseen words after the existing ids, which stay stable.
  Vocabulary extended(const std::vector<std::vector<std::string>>& texts) const;

  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::uint64_t digest() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace frforge::corpus

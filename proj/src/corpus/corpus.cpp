#include "frforge/corpus/corpus.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"

namespace frforge::corpus {
namespace {

constexpr std::string_view kSyllables[] = {
    "ba", "ko", "ri", "mu", "sel", "ta", "zu", "ne", "lo", "vi",  "dra", "pen",
    "ka", "mi", "tor", "ul", "esh", "fa", "gri", "ho", "jun", "ly", "mor", "nix",
    "qua", "ra", "sto", "ti", "ven", "wu", "xe", "yol", "zan", "bre", "cal", "dun"};

std::string pseudo_word(Rng& rng) {
  const int syllables = 2 + static_cast<int>(rng.below(2));
  std::string w;
  for (int i = 0; i < syllables; ++i) w += kSyllables[rng.below(std::size(kSyllables))];
  return w;
}

std::vector<std::string> fresh_words(Rng& rng, int count, std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    auto w = pseudo_word(rng);
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::size_t zipf_draw(Rng& rng, std::size_t n, double exponent) {
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
  return rng.categorical(w);
}

// Slot names referenced by a template, in order of appearance.
std::vector<std::string> template_slots(const std::string& tmpl) {
  std::vector<std::string> slots;
  for (const auto& tok : tokenize(tmpl)) {
    if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') {
      slots.push_back(tok.substr(1, tok.size() - 2));
    }
  }
  return slots;
}

}  // namespace

void validate(const CorpusSpec& spec) {
  if (spec.schema_version != 1) {
    throw ConfigError("unsupported corpus schema_version " + std::to_string(spec.schema_version));
  }
  const int m = spec.num_domains();
  if (m < 2) throw ConfigError("corpus spec needs at least 2 domains");
  if (spec.target_domain < 0 || spec.target_domain >= m) {
    throw ConfigError("target_domain out of range");
  }
  double total = 0.0;
  bool confusable = false;
  for (int d = 0; d < m; ++d) {
    const auto& dom = spec.domains[static_cast<std::size_t>(d)];
    if (dom.domain_id != d) throw ConfigError("domain '" + dom.name + "' has non-sequential domain_id");
    if (dom.name.empty()) throw ConfigError("domain " + std::to_string(d) + " has no name");
    if (!(dom.traffic_share > 0.0 && dom.traffic_share <= 1.0)) {
      throw ConfigError("domain '" + dom.name + "' traffic_share must be in (0,1]");
    }
    if (dom.overlap_coefficient < 0.0 || dom.overlap_coefficient > 1.0) {
      throw ConfigError("domain '" + dom.name + "' overlap_coefficient must be in [0,1]");
    }
    if (dom.intents.empty()) throw ConfigError("domain '" + dom.name + "' has no intents");
    for (const auto& intent : dom.intents) {
      if (intent.templates.empty()) {
        throw ConfigError("intent '" + intent.name + "' has no templates");
      }
      for (const auto& t : intent.templates) {
        for (const auto& slot : template_slots(t)) {
          if (slot == "carrier") {
            if (intent.carriers.empty() && spec.shared_carriers.empty()) {
              throw ConfigError("intent '" + intent.name + "' uses {carrier} but has none");
            }
          } else if (!dom.slots.contains(slot)) {
            throw ConfigError("template '" + t + "' references undefined slot '" + slot + "'");
          }
        }
      }
    }
    total += dom.traffic_share;
    if (d != spec.target_domain && dom.overlap_coefficient > 0.0) confusable = true;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("traffic shares sum to " + std::to_string(total) + ", expected 1");
  }
  if (spec.domains[static_cast<std::size_t>(spec.target_domain)].traffic_share >= 0.005) {
    throw ConfigError("target domain share must be below 0.005");
  }
  if (!confusable) {
    throw ConfigError("at least one non-target domain needs overlap_coefficient > 0");
  }
}

ExpandedSlots expand_slots(const CorpusSpec& spec) {
  Rng rng(derive_seed(spec.vocab_seed, "slots"));
  std::set<std::string> taken;
  for (const auto& dom : spec.domains) {
    for (const auto& i : dom.intents) {
      for (const auto& t : i.templates)
        for (auto& w : tokenize(t)) taken.insert(w);
      for (const auto& c : i.carriers)
        for (auto& w : tokenize(c)) taken.insert(w);
    }
    for (const auto& [_, slot] : dom.slots)
      for (const auto& v : slot.values)
        for (auto& w : tokenize(v)) taken.insert(w);
  }
  for (const auto& c : spec.shared_carriers)
    for (auto& w : tokenize(c)) taken.insert(w);

  const auto pool = fresh_words(rng, spec.shared_entity_pool, taken);

  ExpandedSlots out;
  out.values.resize(spec.domains.size());
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    for (const auto& [name, slot] : spec.domains[d].slots) {
      auto values = slot.values;
      int n_shared = static_cast<int>(std::lround(slot.generated * slot.shared_fraction));
      n_shared = std::min<int>(n_shared, static_cast<int>(pool.size()));
      std::vector<std::size_t> order(pool.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order.begin(), order.end());
      for (int i = 0; i < n_shared; ++i) values.push_back(pool[order[static_cast<std::size_t>(i)]]);
      for (auto& w : fresh_words(rng, slot.generated - n_shared, taken)) values.push_back(std::move(w));
      if (values.empty()) {
        throw ConfigError("slot '" + name + "' of domain '" + spec.domains[d].name + "' is empty");
      }
      // Interleave shared and fresh names so Zipf ranks mix both kinds.
      rng.shuffle(values.begin() + static_cast<std::ptrdiff_t>(slot.values.size()), values.end());
      out.values[d][name] = std::move(values);
    }
  }
  return out;
}

std::vector<Utterance> generate_corpus(const CorpusSpec& spec, std::size_t n_utterances,
                                       std::uint64_t seed, const std::string& id_prefix) {
  validate(spec);
  if (n_utterances < static_cast<std::size_t>(spec.num_domains())) {
    throw ConfigError("n_utterances (" + std::to_string(n_utterances) +
                      ") must be at least the number of domains");
  }
  const auto slots = expand_slots(spec);
  std::vector<double> shares;
  for (const auto& d : spec.domains) shares.push_back(d.traffic_share);

  Rng rng(derive_seed(seed, "corpus"));
  std::vector<Utterance> out;
  out.reserve(n_utterances);
  const int width = std::max<int>(7, static_cast<int>(std::to_string(n_utterances).size()));
  for (std::size_t i = 0; i < n_utterances; ++i) {
    const auto d = rng.categorical(shares);
    const auto& dom = spec.domains[d];
    const auto intent_idx = rng.below(dom.intents.size());
    const auto& intent = dom.intents[intent_idx];
    const auto& tmpl = intent.templates[rng.below(intent.templates.size())];

    Utterance u;
    auto num = std::to_string(i);
    if (num.size() < static_cast<std::size_t>(width)) num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
    u.id = id_prefix + num;
    u.true_domain = static_cast<DomainId>(d);
    u.true_intent = static_cast<int>(intent_idx);
    for (const auto& tok : tokenize(tmpl)) {
      if (tok == "{carrier}") {
        const bool shared = intent.carriers.empty() ||
                            (!spec.shared_carriers.empty() && rng.bernoulli(dom.overlap_coefficient));
        const auto& pool = shared ? spec.shared_carriers : intent.carriers;
        for (auto& w : tokenize(pool[rng.below(pool.size())])) u.text.push_back(std::move(w));
      } else if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') {
        const auto& values = slots.values[d].at(tok.substr(1, tok.size() - 2));
        const auto& v = values[zipf_draw(rng, values.size(), spec.zipf_exponent)];
        for (auto& w : tokenize(v)) u.text.push_back(std::move(w));
      } else {
        u.text.push_back(tok);
      }
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s.push_back(' ');
    s += t;
  }
  return s;
}

Json utterance_to_json(const Utterance& u) {
  Json j = Json::object();
  j["id"] = u.id;
  j["text"] = join_tokens(u.text);
  j["true_domain"] = u.true_domain;
  j["true_intent"] = u.true_intent;
  return j;
}

Utterance utterance_from_json(const Json& j, const std::string& path, std::size_t line) {
  if (!j.is_object()) throw ParseError(path, line, "utterance must be an object");
  require_known_fields(j, {"id", "text", "true_domain", "true_intent"}, path, line);
  for (auto key : {"id", "text", "true_domain", "true_intent"}) {
    if (!j.contains(key)) throw ParseError(path, line, std::string("missing field '") + key + "'");
  }
  Utterance u;
  u.id = j.at("id").get<std::string>();
  u.text = tokenize(j.at("text").get<std::string>());
  u.true_domain = j.at("true_domain").get<int>();
  u.true_intent = j.at("true_intent").get<int>();
  if (u.text.empty()) throw ParseError(path, line, "utterance text is empty");
  return u;
}

void write_corpus(const std::filesystem::path& path, const std::vector<Utterance>& corpus) {
  std::string out;
  for (const auto& u : corpus) {
    out += utterance_to_json(u).dump();
    out.push_back('\n');
  }
  write_text_file(path, out);
}

std::vector<Utterance> read_corpus(const std::filesystem::path& path) {
  std::vector<Utterance> out;
  read_jsonl(path, [&](const Json& j, std::size_t line) {
    out.push_back(utterance_from_json(j, path.string(), line));
  });
  return out;
}

}  // namespace frforge::corpus

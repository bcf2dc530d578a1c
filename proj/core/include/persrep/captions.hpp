#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace persrep {

inline constexpr const char* kIdentifierToken = "<new1>";

struct CaptionEntry {
  std::string template_text;  // contains the identifier token exactly once
  std::string category;
};

struct CaptionCorpus {
  std::vector<CaptionEntry> entries;
  // Hand-curated background captions for templates where the mechanical rule
  // produces awkward phrasing.
  std::map<std::string, std::string> background_overrides;

  // Throws MalformedTemplate unless every template carries the identifier
  // token exactly once.
  void validate() const;

  // Background caption for one entry: curated override when present,
  // otherwise strip_identifier.
  std::string background_for(const CaptionEntry& entry) const;
};

// Mechanical rule: drop the identifier noun phrase (optional leading article,
// the token, the category noun when it follows, and one trailing preposition
// when more text follows), then renormalize whitespace and leading case.
std::string strip_identifier(const std::string& template_text, const std::string& category);

// Shipped corpora: "pods", "df2", "dogs", "toy".
CaptionCorpus builtin_corpus(const std::string& name);

CaptionCorpus load_corpus(const std::filesystem::path& path);
void save_corpus(const CaptionCorpus& corpus, const std::filesystem::path& path);

}  // namespace persrep

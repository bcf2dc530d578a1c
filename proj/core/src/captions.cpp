#include "persrep/captions.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "persrep/errors.hpp"

using json = nlohmann::json;

namespace persrep {

namespace {

bool is_article(const std::string& t) {
  std::string lower = t;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower == "a" || lower == "an" || lower == "the";
}

bool is_preposition(const std::string& t) {
  static const char* preps[] = {"of", "on", "in", "at", "by",   "near",
                                "under", "over", "with", "inside", "outside"};
  std::string lower = t;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return std::any_of(std::begin(preps), std::end(preps),
                     [&](const char* p) { return lower == p; });
}

bool equals_ci(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> tokens;
  std::istringstream in(s);
  std::string t;
  while (in >> t) tokens.push_back(t);
  return tokens;
}

size_t count_token(const std::string& text, const std::string& token) {
  size_t count = 0, pos = 0;
  while ((pos = text.find(token, pos)) != std::string::npos) {
    ++count;
    pos += token.size();
  }
  return count;
}

}  // namespace

std::string strip_identifier(const std::string& template_text, const std::string& category) {
  if (template_text.find(kIdentifierToken) == std::string::npos) {
    raise(ErrorCode::MissingIdentifierToken, template_text);
  }
  std::vector<std::string> tokens = tokenize(template_text);
  size_t id_idx = 0;
  for (; id_idx < tokens.size(); ++id_idx) {
    if (tokens[id_idx] == kIdentifierToken) break;
  }

  size_t start = id_idx;
  if (id_idx > 0 && is_article(tokens[id_idx - 1])) start = id_idx - 1;
  size_t end = id_idx;
  if (end + 1 < tokens.size() && equals_ci(tokens[end + 1], category)) ++end;
  if (end + 1 < tokens.size() && is_preposition(tokens[end + 1]) && end + 2 < tokens.size()) ++end;

  std::vector<std::string> kept;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i < start || i > end) kept.push_back(tokens[i]);
  }

  bool has_content = std::any_of(kept.begin(), kept.end(), [](const std::string& t) {
    return !is_article(t) && !is_preposition(t);
  });
  if (!has_content) {
    raise(ErrorCode::MalformedTemplate, "nothing left after stripping: " + template_text);
  }

  std::string out;
  for (size_t i = 0; i < kept.size(); ++i) {
    if (i) out += ' ';
    out += kept[i];
  }
  if (!template_text.empty() && std::isupper(static_cast<unsigned char>(template_text[0])) &&
      !out.empty()) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

void CaptionCorpus::validate() const {
  for (const auto& entry : entries) {
    if (count_token(entry.template_text, kIdentifierToken) != 1) {
      raise(ErrorCode::MalformedTemplate,
            "template must contain " + std::string(kIdentifierToken) + " exactly once: " +
                entry.template_text);
    }
  }
}

std::string CaptionCorpus::background_for(const CaptionEntry& entry) const {
  if (auto it = background_overrides.find(entry.template_text); it != background_overrides.end()) {
    return it->second;
  }
  return strip_identifier(entry.template_text, entry.category);
}

CaptionCorpus builtin_corpus(const std::string& name) {
  CaptionCorpus corpus;
  auto add = [&corpus](const char* tmpl, const char* category) {
    corpus.entries.push_back({tmpl, category});
  };

  if (name == "pods") {
    add("A <new1> mug on a wooden desk", "mug");
    add("A <new1> mug in a cozy living room", "mug");
    add("A <new1> mug on a windowsill", "mug");
    add("A <new1> bottle on a picnic table", "bottle");
    add("A <new1> bottle in a backpack pocket", "bottle");
    add("A <new1> bottle on a yoga mat", "bottle");
    add("A <new1> screwdriver in a toolbox", "screwdriver");
    add("A <new1> screwdriver on a wooden workbench", "screwdriver");
    add("A <new1> screwdriver in a carpenter's tool belt", "screwdriver");
    add("A <new1> bag in a car trunk", "bag");
    add("A <new1> bag on a park bench", "bag");
    add("A <new1> bag in a shopping cart", "bag");
    add("A <new1> bag on a library shelf", "bag");
    add("A <new1> bag in a gym locker", "bag");
    add("A <new1> bag on a wooden table", "bag");
    add("A <new1> shoe in the rain", "shoe");
    add("A <new1> shoe on a sandy beach", "shoe");
    add("A <new1> shoe in a gym locker", "shoe");
  } else if (name == "df2") {
    add("A person wearing a <new1> shirt at a park", "shirt");
    add("A <new1> shirt on a mannequin", "shirt");
    add("A person wearing a <new1> shirt at a party", "shirt");
    add("A <new1> shirt on a clothesline", "shirt");
    add("A person wearing a <new1> shirt at a concert", "shirt");
    add("A <new1> shirt on a chair", "shirt");
    add("A person wearing a <new1> shirt at a cafe", "shirt");
    add("A <new1> shirt on a laundry basket", "shirt");
    add("A person wearing a <new1> shirt at a stadium", "shirt");
    add("A <new1> shirt on a hook", "shirt");
    add("A person wearing a <new1> shirt at a bus stop", "shirt");
    add("A <new1> shirt on a drying rack", "shirt");
    add("A person wearing a <new1> shirt at a gym", "shirt");
    add("A <new1> shirt on a shelf", "shirt");
    add("A person wearing a <new1> shirt at a picnic", "shirt");
    const char* wearing_scenes[][2] = {
        {"A person wearing a <new1> shirt at a park", "A person at a park"},
        {"A person wearing a <new1> shirt at a party", "A person at a party"},
        {"A person wearing a <new1> shirt at a concert", "A person at a concert"},
        {"A person wearing a <new1> shirt at a cafe", "A person at a cafe"},
        {"A person wearing a <new1> shirt at a stadium", "A person at a stadium"},
        {"A person wearing a <new1> shirt at a bus stop", "A person at a bus stop"},
        {"A person wearing a <new1> shirt at a gym", "A person at a gym"},
        {"A person wearing a <new1> shirt at a picnic", "A person at a picnic"},
    };
    for (const auto& [tmpl, bg] : wearing_scenes) corpus.background_overrides[tmpl] = bg;
  } else if (name == "dogs") {
    add("A <new1> dog in the park", "dog");
    add("A <new1> dog at the vet", "dog");
    add("A <new1> dog in a car", "dog");
    add("A <new1> dog at the groomer", "dog");
    add("A <new1> dog on a walk", "dog");
    add("A <new1> dog in the snow", "dog");
    add("A <new1> dog at the lake", "dog");
    add("A <new1> dog in the backyard", "dog");
    add("A <new1> dog in a sweater", "dog");
    add("A <new1> dog in a bed", "dog");
    add("A <new1> dog at the farm", "dog");
    add("A <new1> dog in the woods", "dog");
    add("A <new1> dog in a kennel", "dog");
    add("A <new1> dog at a barbecue", "dog");
    corpus.background_overrides["A <new1> dog on a walk"] = "A walking path in a park";
    corpus.background_overrides["A <new1> dog in a sweater"] = "A knitted sweater on a couch";
  } else if (name == "toy") {
    add("A <new1> widget on a desk", "widget");
    add("A <new1> widget in a drawer", "widget");
    add("A <new1> widget on a shelf", "widget");
    add("A <new1> widget near a window", "widget");
  } else {
    raise(ErrorCode::ConfigError, "unknown builtin corpus: " + name);
  }
  corpus.validate();
  return corpus;
}

CaptionCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open corpus " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedTemplate, path.string() + ": " + e.what());
  }
  CaptionCorpus corpus;
  for (const auto& e : doc.at("entries")) {
    corpus.entries.push_back({e.at("template").get<std::string>(), e.at("category").get<std::string>()});
  }
  if (doc.contains("background_overrides")) {
    for (const auto& [k, v] : doc["background_overrides"].items()) {
      corpus.background_overrides[k] = v.get<std::string>();
    }
  }
  corpus.validate();
  return corpus;
}

void save_corpus(const CaptionCorpus& corpus, const std::filesystem::path& path) {
  json doc;
  doc["entries"] = json::array();
  for (const auto& e : corpus.entries) {
    doc["entries"].push_back({{"template", e.template_text}, {"category", e.category}});
  }
  doc["background_overrides"] = json::object();
  for (const auto& [k, v] : corpus.background_overrides) doc["background_overrides"][k] = v;
  std::ofstream out(path);
  out << doc.dump(2) << "\n";
}

}  // namespace persrep

#include "fashion/text_encoder.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "fashion/error.hpp"

namespace fashion {

namespace {
constexpr std::string_view kPadToken = "<pad>";
constexpr std::string_view kUnkToken = "<unk>";
}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{std::string(kPadToken), std::string(kUnkToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) lookup_.emplace(tokens_[i], static_cast<int>(i));
}

Vocabulary Vocabulary::build(std::span<const std::string> captions) {
  std::set<std::string> words;
  for (const auto& c : captions) {
    for (auto& w : split_words(c)) words.insert(std::move(w));
  }
  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
  for (const auto& w : words) {
    if (w != kPadToken && w != kUnkToken) tokens.push_back(w);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw Error(ErrorCode::Format, "vocabulary must start with <pad> and <unk>");
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::index(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  return it == lookup_.end() ? kUnk : it->second;
}

std::vector<std::string> split_words(std::string_view caption) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : caption) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

TokenSequence tokenize(std::string_view caption, const Vocabulary& vocab) {
  const auto words = split_words(caption);
  if (words.empty()) throw Error(ErrorCode::EmptyCaption, "caption has no words");
  TokenSequence seq;
  seq.ids.fill(Vocabulary::kPad);
  seq.length = static_cast<int>(std::min<std::size_t>(words.size(), kMaxTokens));
  for (int i = 0; i < seq.length; ++i) seq.ids[i] = vocab.index(words[i]);
  return seq;
}

}  // namespace fashion

#include "stethofed/text_meta.hpp"

#include <algorithm>

#include "stethofed/error.hpp"

namespace stethofed {

Vocabulary::Vocabulary() {
  names_.emplace_back(kNeutralName);
  attrs_.push_back(Attribute::Device);  // unused for NEUTRAL
}

TokenId Vocabulary::add(Attribute attr, std::string_view name) {
  if (contains(name)) {
    raise(ErrorKind::Config, "duplicate vocabulary token '" + std::string(name) + "'");
  }
  names_.emplace_back(name);
  attrs_.push_back(attr);
  return static_cast<TokenId>(names_.size() - 1);
}

const std::string& Vocabulary::name(TokenId id) const {
  if (id >= names_.size()) raise(ErrorKind::UnknownToken, "token id " + std::to_string(id));
  return names_[id];
}

TokenId Vocabulary::id(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) raise(ErrorKind::UnknownToken, "token '" + std::string(name) + "'");
  return static_cast<TokenId>(it - names_.begin());
}

bool Vocabulary::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Attribute Vocabulary::attribute_of(TokenId id) const {
  if (id >= attrs_.size()) raise(ErrorKind::UnknownToken, "token id " + std::to_string(id));
  return attrs_[id];
}

std::vector<TokenId> Vocabulary::tokens_of(Attribute attr) const {
  std::vector<TokenId> out;
  for (TokenId i = 1; i < names_.size(); ++i) {
    if (attrs_[i] == attr) out.push_back(i);
  }
  return out;
}

void TextAugConfig::validate() const {
  if (!(p_text >= 0.0 && p_text <= 1.0)) raise(ErrorKind::Config, "p_text must lie in [0, 1]");
}

MetaPrompt neutralize(const MetaPrompt& prompt, RngStream& stream, const TextAugConfig& cfg) {
  MetaPrompt out = prompt;
  out.set(Attribute::Device, kNeutralToken);
  for (std::size_t a = 1; a < kNumAttributes; ++a) {
    // One draw per attribute regardless of p_text keeps streams aligned.
    if (stream.next_unit() < cfg.p_text) out.tokens[a] = kNeutralToken;
  }
  return out;
}

std::span<const double> EmbeddingTable::row(TokenId id) const {
  if (id >= vocab) raise(ErrorKind::UnknownToken, "token id " + std::to_string(id));
  return values.subspan(static_cast<std::size_t>(id) * width, width);
}

std::vector<double> embed_prompt(const MetaPrompt& prompt, const EmbeddingTable& table) {
  std::vector<double> out(table.width, 0.0);
  for (TokenId t : prompt.tokens) {
    auto r = table.row(t);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += r[i];
  }
  return out;
}

std::string describe(const MetaPrompt& prompt, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t a = 0; a < kNumAttributes; ++a) {
    if (a) out += ' ';
    out += kAttributeNames[a];
    out += '=';
    out += vocab.name(prompt.tokens[a]);
  }
  return out;
}

}  // namespace stethofed

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stethofed/rng.hpp"

namespace stethofed {

using TokenId = std::uint32_t;

enum class Attribute : std::size_t { Device = 0, AgeGroup = 1, Sex = 2, Site = 3 };
inline constexpr std::size_t kNumAttributes = 4;
inline constexpr std::array<std::string_view, kNumAttributes> kAttributeNames = {
    "device", "age_group", "sex", "site"};

inline constexpr TokenId kNeutralToken = 0;
inline constexpr std::string_view kNeutralName = "<neutral>";

// Token vocabulary shared by all clients. Id 0 is the NEUTRAL token; every
// other token belongs to exactly one attribute.
class Vocabulary {
 public:
  Vocabulary();

  TokenId add(Attribute attr, std::string_view name);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(TokenId id) const;
  // Throws UnknownToken when the name is absent.
  TokenId id(std::string_view name) const;
  bool contains(std::string_view name) const;
  Attribute attribute_of(TokenId id) const;
  std::vector<TokenId> tokens_of(Attribute attr) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Attribute> attrs_;
};

struct MetaPrompt {
  std::array<TokenId, kNumAttributes> tokens{kNeutralToken, kNeutralToken, kNeutralToken,
                                             kNeutralToken};

  TokenId get(Attribute a) const { return tokens[static_cast<std::size_t>(a)]; }
  void set(Attribute a, TokenId t) { tokens[static_cast<std::size_t>(a)] = t; }

  friend bool operator==(const MetaPrompt&, const MetaPrompt&) = default;
};

struct TextAugConfig {
  double p_text = 0.25;

  void validate() const;
};

// Counterfactual neutralization: the device is always replaced by NEUTRAL;
// each other attribute independently with probability p_text.
MetaPrompt neutralize(const MetaPrompt& prompt, RngStream& stream, const TextAugConfig& cfg);

// Read-only view of a (vocab x width) row-major embedding table.
struct EmbeddingTable {
  std::span<const double> values;
  std::size_t vocab = 0;
  std::size_t width = 0;

  std::span<const double> row(TokenId id) const;
};

// Sum of the per-attribute token embeddings.
std::vector<double> embed_prompt(const MetaPrompt& prompt, const EmbeddingTable& table);

std::string describe(const MetaPrompt& prompt, const Vocabulary& vocab);

}  // namespace stethofed

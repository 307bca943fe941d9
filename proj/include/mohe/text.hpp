#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mohe/errors.hpp"

namespace mohe {

enum class TokenMode { word, character, bigram };

TokenMode token_mode_from_string(std::string_view s);
std::string to_string(TokenMode m);

// NFKC normalization of UTF-8 text.
std::string nfkc(std::string_view utf8);

// word:   NFKC, lowercase, split at whitespace and punctuation
// char:   NFKC, one token per Unicode scalar, whitespace runs collapse to " "
// bigram: consecutive word-token pairs joined with "_"
std::vector<std::string> tokenize(std::string_view text, TokenMode mode);

// Token table with fixed reserved slots. Indices are dense.
class Vocab {
public:
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kUnk = 1;

    Vocab();
    explicit Vocab(std::vector<std::string> tokens); // full table incl. PAD/UNK

    std::int32_t lookup(std::string_view token) const; // kUnk when absent
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> index_;
};

// Keeps tokens with frequency >= min_freq, ranked by (frequency desc, token
// asc), truncated so the table never exceeds max_size entries including
// PAD/UNK. Indices start at 2.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                  std::size_t min_freq, std::size_t max_size);

struct EncodedSequence {
    std::vector<std::int32_t> ids; // exactly L entries
    std::size_t true_length = 0;   // entries before padding (capped at L)
};

// Unknown tokens map to UNK; the prefix is kept on truncation; PAD on the
// right.
EncodedSequence encode(const std::vector<std::string>& tokens, const Vocab& vocab,
                       std::size_t length);

// Description feature engineering: keep nouns/adjectives/adverbs, drop
// repeats keeping the first occurrence, cap at 120 tokens. Tags are matched
// case-insensitively against NOUN/ADJ/ADJECTIVE/ADV/ADVERB.
std::vector<std::string> prepare_description(
    const std::vector<std::pair<std::string, std::string>>& tagged_tokens);

inline constexpr std::size_t kDescriptionMaxLength = 120;

} // namespace mohe

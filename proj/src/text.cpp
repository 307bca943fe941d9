#include "mohe/text.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace mohe {

TokenMode token_mode_from_string(std::string_view s) {
    if (s == "word") return TokenMode::word;
    if (s == "char") return TokenMode::character;
    if (s == "bigram") return TokenMode::bigram;
    throw ConfigError("unknown tokenization mode: " + std::string(s));
}

std::string to_string(TokenMode m) {
    switch (m) {
        case TokenMode::word: return "word";
        case TokenMode::character: return "char";
        case TokenMode::bigram: return "bigram";
    }
    return "word";
}

std::string nfkc(std::string_view utf8) {
    UErrorCode ec = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(ec);
    if (U_FAILURE(ec)) throw ConfigError("ICU NFKC normalizer unavailable");
    icu::UnicodeString in = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    icu::UnicodeString out = norm->normalize(in, ec);
    if (U_FAILURE(ec)) throw InputError("NFKC normalization failed");
    std::string result;
    out.toUTF8String(result);
    return result;
}

namespace {

std::vector<UChar32> decode_utf8(std::string_view s) {
    std::vector<UChar32> cps;
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
    int32_t i = 0;
    const int32_t n = static_cast<int32_t>(s.size());
    while (i < n) {
        UChar32 c;
        U8_NEXT(bytes, i, n, c);
        if (c < 0) c = 0xFFFD;
        cps.push_back(c);
    }
    return cps;
}

void append_utf8(std::string& out, UChar32 c) {
    std::uint8_t buf[4];
    int32_t len = 0;
    UBool err = false;
    U8_APPEND(buf, len, 4, c, err);
    if (!err) out.append(reinterpret_cast<char*>(buf), static_cast<std::size_t>(len));
}

bool is_word_separator(UChar32 c) {
    return u_isUWhiteSpace(c) || u_ispunct(c);
}

std::vector<std::string> word_tokens(std::string_view normalized) {
    std::vector<std::string> out;
    std::string cur;
    for (UChar32 c : decode_utf8(normalized)) {
        if (is_word_separator(c)) {
            if (!cur.empty()) out.push_back(std::exchange(cur, {}));
        } else {
            append_utf8(cur, u_tolower(c));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> char_tokens(std::string_view normalized) {
    std::vector<std::string> out;
    bool in_space = false;
    for (UChar32 c : decode_utf8(normalized)) {
        if (u_isUWhiteSpace(c)) {
            if (!in_space) out.emplace_back(" ");
            in_space = true;
        } else {
            in_space = false;
            std::string tok;
            append_utf8(tok, c);
            out.push_back(std::move(tok));
        }
    }
    return out;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text, TokenMode mode) {
    const std::string normalized = nfkc(text);
    switch (mode) {
        case TokenMode::word:
            return word_tokens(normalized);
        case TokenMode::character:
            return char_tokens(normalized);
        case TokenMode::bigram: {
            const std::vector<std::string> words = word_tokens(normalized);
            std::vector<std::string> out;
            for (std::size_t i = 0; i + 1 < words.size(); ++i)
                out.push_back(words[i] + "_" + words[i + 1]);
            return out;
        }
    }
    return {};
}

Vocab::Vocab() : Vocab(std::vector<std::string>{"<pad>", "<unk>"}) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2)
        throw ConfigError("vocab must contain at least PAD and UNK");
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        index_[tokens_[i]] = static_cast<std::int32_t>(i);
}

std::int32_t Vocab::lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                  std::size_t min_freq, std::size_t max_size) {
    if (min_freq < 1) throw ConfigError("build_vocab: min_freq must be >= 1");
    if (max_size < 2) throw ConfigError("build_vocab: max_size must be >= 2");
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& doc : corpus)
        for (const auto& tok : doc) ++freq[tok];

    std::vector<std::pair<std::string, std::size_t>> ranked;
    ranked.reserve(freq.size());
    for (auto& [tok, n] : freq)
        if (n >= min_freq) ranked.emplace_back(tok, n);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_size - 2) ranked.resize(max_size - 2);

    std::vector<std::string> tokens{"<pad>", "<unk>"};
    tokens.reserve(ranked.size() + 2);
    for (auto& [tok, n] : ranked) tokens.push_back(tok);
    return Vocab(std::move(tokens));
}

EncodedSequence encode(const std::vector<std::string>& tokens, const Vocab& vocab,
                       std::size_t length) {
    if (length < 1) throw ConfigError("encode: length must be >= 1");
    EncodedSequence seq;
    seq.true_length = std::min(tokens.size(), length);
    seq.ids.assign(length, Vocab::kPad);
    for (std::size_t i = 0; i < seq.true_length; ++i)
        seq.ids[i] = vocab.lookup(tokens[i]);
    return seq;
}

std::vector<std::string> prepare_description(
    const std::vector<std::pair<std::string, std::string>>& tagged_tokens) {
    static const std::set<std::string> kKeep = {"noun", "adj", "adjective",
                                                "adv", "adverb"};
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& [token, tag] : tagged_tokens) {
        std::string lower = tag;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (!kKeep.count(lower)) continue;
        if (!seen.insert(token).second) continue;
        out.push_back(token);
        if (out.size() == kDescriptionMaxLength) break;
    }
    return out;
}

} // namespace mohe

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace windfuse::text {

/// Lowercases, splits on whitespace, strips leading/trailing punctuation
/// from each token, drops empties. Deterministic; understands UTF-8 space
/// codepoints.
std::vector<std::string> tokenize(std::string_view input);

/// Dense token ids with reserved specials. PAD is always 0.
struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;

    std::map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;  // includes specials

    std::size_t size() const { return id_to_token.size(); }
    int id_of(const std::string& token) const;
};

/// Builds ids from corpus frequency (descending, then lexicographic).
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            int min_count = 1, int max_size = 0);

/// Unigram + adjacent-bigram TF-IDF with a document-frequency floor and a
/// capped vocabulary of the highest-df survivors.
struct TfidfVectorizer {
    std::map<std::string, int> term_to_index;  // bigrams keyed "a b"
    std::vector<std::string> index_to_term;
    std::vector<double> idf;
    std::vector<std::size_t> doc_freq;
    std::size_t corpus_docs = 0;
    int max_terms = 1000;
    int min_df = 5;

    std::size_t size() const { return index_to_term.size(); }
};

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1. Terms below min_df are dropped;
/// the max_terms highest-df survivors are kept (ties lexicographic).
/// Throws when nothing survives.
TfidfVectorizer fit_tfidf(const std::vector<std::vector<std::string>>& corpus,
                          int max_terms = 1000, int min_df = 5);

/// Sparse (index, weight) pairs, index-ascending: raw count * idf, then
/// L2-normalized. Documents with no in-vocabulary terms stay all-zero.
std::vector<std::pair<int, double>> tfidf_transform(const TfidfVectorizer& vec,
                                                    const std::vector<std::string>& doc);

std::vector<double> tfidf_transform_dense(const TfidfVectorizer& vec,
                                          const std::vector<std::string>& doc);

void to_json(nlohmann::json& j, const Vocabulary& v);
void from_json(const nlohmann::json& j, Vocabulary& v);
void to_json(nlohmann::json& j, const TfidfVectorizer& v);
void from_json(const nlohmann::json& j, TfidfVectorizer& v);

}  // namespace windfuse::text

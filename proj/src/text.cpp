#include "windfuse/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace windfuse::text {

namespace {

// Unicode whitespace codepoints beyond ASCII that show up in scraped text.
bool is_space_cp(char32_t cp) {
    switch (cp) {
        case U' ':
        case U'\t':
        case U'\n':
        case U'\r':
        case 0x0B:
        case 0x0C:
        case 0x0085:
        case 0x00A0:
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Decodes one UTF-8 codepoint starting at i; advances i. Malformed bytes
// are passed through as Latin-1 so tokenization never throws.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const unsigned char c0 = static_cast<unsigned char>(s[i]);
    if (c0 < 0x80) {
        ++i;
        return c0;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((c0 & 0xE0) == 0xC0) {
        extra = 1;
        cp = c0 & 0x1F;
    } else if ((c0 & 0xF0) == 0xE0) {
        extra = 2;
        cp = c0 & 0x0F;
    } else if ((c0 & 0xF8) == 0xF0) {
        extra = 3;
        cp = c0 & 0x07;
    } else {
        ++i;
        return c0;
    }
    if (i + static_cast<std::size_t>(extra) >= s.size()) {
        ++i;
        return c0;
    }
    for (int k = 1; k <= extra; ++k) {
        const unsigned char cont = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((cont & 0xC0) != 0x80) {
            ++i;
            return c0;
        }
        cp = (cp << 6) | (cont & 0x3F);
    }
    i += static_cast<std::size_t>(extra) + 1;
    return cp;
}

bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::string strip_punct(std::string token) {
    std::size_t begin = 0;
    std::size_t end = token.size();
    while (begin < end && is_ascii_punct(token[begin])) ++begin;
    while (end > begin && is_ascii_punct(token[end - 1])) --end;
    return token.substr(begin, end - begin);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    auto flush = [&] {
        if (!current.empty()) {
            std::string stripped = strip_punct(std::move(current));
            if (!stripped.empty()) tokens.push_back(std::move(stripped));
            current.clear();
        }
    };
    while (i < input.size()) {
        const std::size_t start = i;
        const char32_t cp = decode_utf8(input, i);
        if (is_space_cp(cp)) {
            flush();
        } else if (cp < 0x80) {
            current.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
        } else {
            // keep non-ASCII bytes verbatim
            current.append(input.substr(start, i - start));
        }
    }
    flush();
    return tokens;
}

int Vocabulary::id_of(const std::string& token) const {
    const auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus, int min_count,
                            int max_size) {
    std::map<std::string, int> freq;
    for (const auto& doc : corpus) {
        for (const auto& token : doc) ++freq[token];
    }
    std::vector<std::pair<std::string, int>> entries(freq.begin(), freq.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.id_to_token = {"<pad>", "<unk>", "<cls>"};
    for (const auto& [token, count] : entries) {
        if (count < min_count) break;
        if (max_size > 0 && vocab.id_to_token.size() >= static_cast<std::size_t>(max_size)) break;
        if (token == "<pad>" || token == "<unk>" || token == "<cls>") continue;
        vocab.id_to_token.push_back(token);
    }
    for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
        vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);
    }
    return vocab;
}

TfidfVectorizer fit_tfidf(const std::vector<std::vector<std::string>>& corpus, int max_terms,
                          int min_df) {
    if (corpus.empty()) throw std::invalid_argument("fit_tfidf: empty corpus");
    std::map<std::string, std::size_t> df;
    std::set<std::string> seen;
    for (const auto& doc : corpus) {
        seen.clear();
        for (std::size_t i = 0; i < doc.size(); ++i) {
            seen.insert(doc[i]);
            if (i + 1 < doc.size()) seen.insert(doc[i] + " " + doc[i + 1]);
        }
        for (const auto& term : seen) ++df[term];
    }

    std::vector<std::pair<std::string, std::size_t>> survivors;
    for (const auto& [term, count] : df) {
        if (count >= static_cast<std::size_t>(min_df)) survivors.emplace_back(term, count);
    }
    if (survivors.empty()) {
        throw std::runtime_error("fit_tfidf: no term meets the document-frequency floor of " +
                                 std::to_string(min_df));
    }
    std::sort(survivors.begin(), survivors.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (survivors.size() > static_cast<std::size_t>(max_terms)) {
        survivors.resize(static_cast<std::size_t>(max_terms));
    }
    // index order is lexicographic over the retained terms
    std::sort(survivors.begin(), survivors.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    TfidfVectorizer vec;
    vec.corpus_docs = corpus.size();
    vec.max_terms = max_terms;
    vec.min_df = min_df;
    const double n = static_cast<double>(corpus.size());
    for (const auto& [term, count] : survivors) {
        vec.term_to_index[term] = static_cast<int>(vec.index_to_term.size());
        vec.index_to_term.push_back(term);
        vec.doc_freq.push_back(count);
        vec.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return vec;
}

std::vector<std::pair<int, double>> tfidf_transform(const TfidfVectorizer& vec,
                                                    const std::vector<std::string>& doc) {
    std::map<int, double> weights;
    auto add_term = [&](const std::string& term) {
        const auto it = vec.term_to_index.find(term);
        if (it != vec.term_to_index.end()) {
            weights[it->second] += vec.idf[static_cast<std::size_t>(it->second)];
        }
    };
    for (std::size_t i = 0; i < doc.size(); ++i) {
        add_term(doc[i]);
        if (i + 1 < doc.size()) add_term(doc[i] + " " + doc[i + 1]);
    }
    double norm_sq = 0.0;
    for (const auto& [idx, w] : weights) norm_sq += w * w;
    std::vector<std::pair<int, double>> out;
    out.reserve(weights.size());
    if (norm_sq > 0.0) {
        const double inv_norm = 1.0 / std::sqrt(norm_sq);
        for (const auto& [idx, w] : weights) out.emplace_back(idx, w * inv_norm);
    }
    return out;
}

std::vector<double> tfidf_transform_dense(const TfidfVectorizer& vec,
                                          const std::vector<std::string>& doc) {
    std::vector<double> dense(vec.size(), 0.0);
    for (const auto& [idx, w] : tfidf_transform(vec, doc)) {
        dense[static_cast<std::size_t>(idx)] = w;
    }
    return dense;
}

void to_json(nlohmann::json& j, const Vocabulary& v) {
    j = nlohmann::json{{"version", 1}, {"tokens", v.id_to_token}};
}

void from_json(const nlohmann::json& j, Vocabulary& v) {
    v.id_to_token = j.at("tokens").get<std::vector<std::string>>();
    v.token_to_id.clear();
    for (std::size_t i = 0; i < v.id_to_token.size(); ++i) {
        v.token_to_id[v.id_to_token[i]] = static_cast<int>(i);
    }
}

void to_json(nlohmann::json& j, const TfidfVectorizer& v) {
    j = nlohmann::json{{"version", 1},        {"terms", v.index_to_term},
                       {"doc_freq", v.doc_freq}, {"idf", v.idf},
                       {"corpus_docs", v.corpus_docs}, {"max_terms", v.max_terms},
                       {"min_df", v.min_df}};
}

void from_json(const nlohmann::json& j, TfidfVectorizer& v) {
    v.index_to_term = j.at("terms").get<std::vector<std::string>>();
    v.doc_freq = j.at("doc_freq").get<std::vector<std::size_t>>();
    v.idf = j.at("idf").get<std::vector<double>>();
    v.corpus_docs = j.at("corpus_docs").get<std::size_t>();
    v.max_terms = j.at("max_terms").get<int>();
    v.min_df = j.at("min_df").get<int>();
    v.term_to_index.clear();
    for (std::size_t i = 0; i < v.index_to_term.size(); ++i) {
        v.term_to_index[v.index_to_term[i]] = static_cast<int>(i);
    }
}

}  // namespace windfuse::text

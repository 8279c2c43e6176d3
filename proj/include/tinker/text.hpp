#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the parser, narrator and analysis code.
namespace tinker::text {

std::string_view trim(std::string_view s);
std::string lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Whitespace-delimited tokens; this is the definition of a "word" for turn statistics.
std::vector<std::string> words(std::string_view s);

/// Lowercased alphabetic terms with surrounding punctuation removed ("Rabbit's" -> "rabbit's").
std::vector<std::string> terms(std::string_view s);

/// Light suffix stripper. Not a linguistic stemmer: it only has to map
/// inflected forms of the same word onto one key.
std::string stem(std::string_view term);

/// Number of sentences, splitting on runs of '.', '!' and '?'.
std::size_t count_sentences(std::string_view s);

/// Rewrites free text so it forms exactly one sentence body: internal
/// terminal punctuation becomes commas, trailing punctuation is dropped.
std::string as_clause(std::string_view s);

/// Built-in English function-word list (lower case, apostrophes kept).
const std::set<std::string>& default_stopwords();
std::set<std::string> parse_stopwords(std::string_view source);  // one word per line, '#' comments

/// terms() minus stopwords.
std::vector<std::string> content_terms(std::string_view s, const std::set<std::string>& stopwords = default_stopwords());

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split(std::string_view s, char sep);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tinker::text

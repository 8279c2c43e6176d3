#include "tinker/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "tinker/error.hpp"

namespace tinker::text {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
}  // namespace

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return lower(s.substr(0, prefix.size())) == lower(prefix);
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> terms(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    while (!cur.empty() && cur.front() == '\'') cur.erase(cur.begin());
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c) || (ch == '\'' && !cur.empty())) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::string stem(std::string_view term) {
  std::string w = lower(term);
  if (w.size() > 3 && w.ends_with("'s")) w.resize(w.size() - 2);

  auto drop = [&](std::size_t n) { w.resize(w.size() - n); };
  if (w.size() > 4 && w.ends_with("ies")) {
    drop(3);
    w += 'y';
  } else if (w.ends_with("sses") || (w.size() > 4 && (w.ends_with("shes") || w.ends_with("ches") ||
                                                       w.ends_with("xes") || w.ends_with("zes")))) {
    drop(2);
  } else if (w.size() > 3 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") &&
             !w.ends_with("is")) {
    drop(1);
  }

  bool suffixed = false;
  if (w.size() > 4 && w.ends_with("ied")) {
    drop(3);
    w += 'y';
  } else if (w.size() >= 5 && w.ends_with("ed")) {
    drop(2);
    suffixed = true;
  } else if (w.size() >= 6 && w.ends_with("ing")) {
    drop(3);
    suffixed = true;
  }
  // stopped -> stopp -> stop
  if (suffixed && w.size() >= 3 && w.back() == w[w.size() - 2] && w.back() != 'l' &&
      w.back() != 's' && w.back() != 'z') {
    drop(1);
  }
  // excite / excited -> excit
  if (w.size() > 3 && w.back() == 'e') drop(1);
  return w;
}

std::size_t count_sentences(std::string_view s) {
  std::size_t count = 0;
  bool content = false;
  for (char c : s) {
    if (is_terminal(c)) {
      if (content) ++count;
      content = false;
    } else if (!is_space(c) && c != '"' && c != '\'') {
      content = true;
    }
  }
  if (content) ++count;
  return count;
}

std::string as_clause(std::string_view s) {
  std::string out;
  for (char c : trim(s)) {
    if (is_terminal(c)) {
      if (!out.empty() && out.back() != ',') out.push_back(',');
    } else {
      out.push_back(c);
    }
  }
  while (!out.empty() && (out.back() == ',' || is_space(out.back()))) out.pop_back();
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = parse_stopwords(R"(
a about above after again against all am an and any are as at be because been before being below between both
but by can could did do does doing down during each few for from further had has have having he her here hers
herself him himself his how i if in into is it its itself just me more most my myself no nor not now of off on
once only or other our ours ourselves out over own same she should so some such than that the their theirs them
themselves then there these they this those through to too under until up very was we were what when where which
while who whom why will with would you your yours yourself yourselves
i'm i'd i'll i've it's don't didn't doesn't isn't wasn't aren't weren't can't won't couldn't wouldn't shouldn't
they're they'll they've that's there's here's let's he's she's we're we'll you're you'll what's
also maybe really yeah yes yep okay ok oh um uh hmm like well much lot thing things)");
  return words;
}

std::set<std::string> parse_stopwords(std::string_view source) {
  std::set<std::string> out;
  for (const auto& line : split(source, '\n')) {
    auto body = trim(std::string_view(line).substr(0, std::min(line.find('#'), line.size())));
    for (const auto& w : words(body)) out.insert(lower(w));
  }
  return out;
}

std::vector<std::string> content_terms(std::string_view s, const std::set<std::string>& stopwords) {
  std::vector<std::string> out;
  for (auto& t : terms(s))
    if (!stopwords.count(t)) out.push_back(std::move(t));
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::StorageFailure, "short write to " + path.string());
}

}  // namespace tinker::text

#include "tinker/token.hpp"

#include "tinker/error.hpp"

namespace tinker {

StoryElement parse_token(std::string_view raw, const Vocabulary& vocab) {
  auto payload = raw;
  auto colon = payload.find(':');
  if (colon == std::string_view::npos || payload.find(':', colon + 1) != std::string_view::npos)
    throw Error(ErrorCode::Malformed, "expected <Kind>:<Value>, got '" + std::string(payload) + "'");
  auto kind_name = payload.substr(0, colon);
  auto value = payload.substr(colon + 1);
  auto kind = kind_from_string(kind_name);
  if (!kind) throw Error(ErrorCode::UnknownKind, "'" + std::string(kind_name) + "'");
  if (!vocab.contains(*kind, value))
    throw Error(ErrorCode::UnknownValue, "'" + std::string(value) + "' is not a " + std::string(kind_name));
  return StoryElement{*kind, std::string(value)};
}

std::string encode_token(const StoryElement& e) { return std::string(to_string(e.kind)) + ":" + e.value; }

KindCheck expect_kind(const StoryElement& e, ElementKind want) {
  if (e.kind == want) return KindOk{};
  return KindMismatch{std::string(kRedirectText)};
}

}  // namespace tinker

#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "tinker/story.hpp"

namespace tinker {

/// Spoken by the agent whenever a scanned toy does not match what the current step asks for.
inline constexpr std::string_view kRedirectText = "You need to scan the correct NFC toy to choose.";

/// Parses a decoded "<Kind>:<Value>" tag payload. Surrounding whitespace is
/// trimmed; everything else is matched exactly.
/// Throws Malformed, UnknownKind or UnknownValue.
StoryElement parse_token(std::string_view raw, const Vocabulary& vocab = Vocabulary::standard());

std::string encode_token(const StoryElement& e);

struct KindOk {};
struct KindMismatch {
  std::string redirect;
};
using KindCheck = std::variant<KindOk, KindMismatch>;

KindCheck expect_kind(const StoryElement& e, ElementKind want);

inline bool is_ok(const KindCheck& c) { return std::holds_alternative<KindOk>(c); }

}  // namespace tinker

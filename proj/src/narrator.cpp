#include "tinker/narrator.hpp"

#include <array>
#include <regex>
#include <set>

#include "tinker/text.hpp"

namespace tinker {

std::string_view to_string(Purpose p) {
  switch (p) {
    case Purpose::Perform: return "perform";
    case Purpose::React: return "react";
    case Purpose::Stay: return "stay";
    case Purpose::Clarify: return "clarify";
    case Purpose::FollowUp: return "follow-up";
    case Purpose::OffScript: return "off-script";
    case Purpose::Correction: return "correction";
    case Purpose::Rescan: return "rescan";
  }
  return "?";
}

std::string_view to_string(ProviderCause c) {
  switch (c) {
    case ProviderCause::Timeout: return "Timeout";
    case ProviderCause::AuthFailure: return "AuthFailure";
    case ProviderCause::RateLimited: return "RateLimited";
    case ProviderCause::Network: return "Network";
    case ProviderCause::BadResponse: return "BadResponse";
  }
  return "?";
}

namespace {

// Joins two pieces across a removal site with exactly one space.
void splice(std::string& out, std::string_view next) {
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
  auto rest = next;
  while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  if (!out.empty() && !rest.empty()) out += ' ';
  out += rest;
}

std::string remove_between(std::string s, std::string_view tag) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto at = s.find(tag, pos);
    if (at == std::string::npos) break;
    splice(out, std::string_view(s).substr(pos, at - pos));
    pos = at + tag.size();
  }
  splice(out, std::string_view(s).substr(pos));
  return out;
}

}  // namespace

namespace {

AgentOutput strip_once(std::string_view raw);

const std::regex& marker_like() {
  static const std::regex re(R"(#+[ \t]*(next|done)[ \t]*#+)", std::regex::icase);
  return re;
}

}  // namespace

AgentOutput strip_markers(std::string_view raw) {
  auto out = strip_once(raw);
  // Removal can join fragments into new marker-like text; strip those too.
  while (std::regex_search(out.utterance, marker_like())) {
    auto again = strip_once(out.utterance);
    out.utterance = std::move(again.utterance);
    out.near_miss = true;
  }
  out.raw = std::string(raw);
  return out;
}

namespace {

AgentOutput strip_once(std::string_view raw) {
  AgentOutput out;
  std::string kept;
  std::string source(raw);
  std::size_t pos = 0;
  bool removed = false;
  for (auto it = std::sregex_iterator(source.begin(), source.end(), marker_like()); it != std::sregex_iterator(); ++it) {
    auto m = it->str();
    if (m == kNextMarker || m == kDoneMarker)
      out.markers.push_back(m);
    else
      out.near_miss = true;
    auto segment = std::string_view(source).substr(pos, static_cast<std::size_t>(it->position()) - pos);
    if (removed)
      splice(kept, segment);
    else
      kept = std::string(segment);
    removed = true;
    pos = static_cast<std::size_t>(it->position() + it->length());
  }
  if (removed)
    splice(kept, std::string_view(source).substr(pos));
  else
    kept = source;
  out.utterance = std::string(text::trim(kept));
  return out;
}

}  // namespace

AgentOutput parse_output(std::string_view raw, bool wants_story) {
  auto out = strip_markers(raw);
  auto open = out.utterance.find("<story>");
  auto close = out.utterance.find("</story>");
  if (open != std::string::npos && close != std::string::npos && close > open) {
    out.story_text = std::string(text::trim(std::string_view(out.utterance).substr(open + 7, close - open - 7)));
  }
  out.utterance = remove_between(remove_between(out.utterance, "<story>"), "</story>");
  if (wants_story && !out.story_text) out.story_text = out.utterance;
  return out;
}

std::size_t sentence_target(const NarratorContext& ctx) {
  if (ctx.purpose != Purpose::Perform || !ctx.script) return 0;
  const auto* n = ctx.script->find(ctx.node);
  if (!n) return 0;
  if (n->act == NodeAct::Draft) return 7;
  if (n->act == NodeAct::Update) return 10;
  return 0;
}

AgentOutput generate(Narrator& narrator, const NarratorContext& ctx) {
  auto raw = narrator.complete(ctx);
  if (text::trim(raw).empty()) throw Error(ErrorCode::EmptyResponse, narrator.name() + " returned no text");
  auto out = parse_output(raw, sentence_target(ctx) > 0);
  out.off_script = ctx.purpose == Purpose::OffScript || ctx.purpose == Purpose::Correction ||
                   ctx.purpose == Purpose::Rescan;
  return out;
}

// ---------------------------------------------------------------------------
// Stub

namespace {

std::string character(const NarratorContext& ctx, std::size_t i) {
  if (i < ctx.story.characters.size()) return ctx.story.characters[i].value;
  return "your character";
}

const StageRecord* stage_record(const NarratorContext& ctx) {
  return ctx.stage ? ctx.story.find(*ctx.stage) : nullptr;
}

std::string element(const NarratorContext& ctx, ElementKind k) {
  const std::optional<StoryElement>* sel = nullptr;
  switch (k) {
    case ElementKind::Place: sel = &ctx.selection.place; break;
    case ElementKind::Item: sel = &ctx.selection.item; break;
    case ElementKind::Emotion: sel = &ctx.selection.emotion; break;
    case ElementKind::Character: return character(ctx, 0);
  }
  if (*sel) return (*sel)->value;
  const StageRecord* r = stage_record(ctx);
  if (!r && !ctx.story.stages.empty()) r = &ctx.story.stages.back();
  if (!r) return "";
  if (k == ElementKind::Place) return r->place.value;
  if (k == ElementKind::Item) return r->item.value;
  return r->emotion.value;
}

std::string value_at(const NarratorContext& ctx, NarrativeStage s, ElementKind k, std::string fallback) {
  const auto* r = ctx.story.find(s);
  if (!r) return fallback;
  if (k == ElementKind::Place) return r->place.value;
  if (k == ElementKind::Item) return r->item.value;
  return r->emotion.value;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) s.replace(at, from.size(), to);
}

std::string join_nonempty(const std::vector<std::string>& parts) {
  std::vector<std::string> kept;
  for (const auto& p : parts)
    if (!text::trim(p).empty()) kept.emplace_back(text::trim(p));
  return text::join(kept, " ");
}

const std::set<std::string>& lowercase_openers() {
  static const std::set<std::string> words{"they", "the", "a",   "an",   "it",   "he",   "she",  "we",
                                           "to",  "because", "so", "and", "then", "when", "everybody",
                                           "everyone", "maybe", "there", "their", "some", "all", "if"};
  return words;
}

std::string sentence_from_answer(std::string_view prefix, std::string_view answer) {
  auto clause = text::as_clause(answer);
  auto ws = text::words(clause);
  if (!ws.empty() && lowercase_openers().count(text::lower(ws[0])))
    clause[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(clause[0])));
  return std::string(prefix) + clause + ".";
}

std::string color_of(ElementKind k) {
  switch (k) {
    case ElementKind::Place: return "yellow place token";
    case ElementKind::Item: return "green item token";
    case ElementKind::Emotion: return "red emotion token";
    case ElementKind::Character: return "character pawn";
  }
  return "token";
}

}  // namespace

std::string fill_placeholders(std::string_view tmpl, const NarratorContext& ctx) {
  std::string s(tmpl);
  if (s.find('{') == std::string::npos) return s;
  replace_all(s, "{c1}", character(ctx, 0));
  replace_all(s, "{c2}", character(ctx, 1));
  replace_all(s, "{c3}", character(ctx, 2));
  replace_all(s, "{place}", element(ctx, ElementKind::Place));
  replace_all(s, "{item}", element(ctx, ElementKind::Item));
  replace_all(s, "{emotion}", element(ctx, ElementKind::Emotion));
  replace_all(s, "{stage}", ctx.stage ? std::string(to_string(*ctx.stage)) : std::string());
  return s;
}

std::string stub_draft(NarrativeStage stage, const std::vector<StoryElement>& characters, const StoryElement& place,
                       const StoryElement& item, const StoryElement& emotion) {
  std::vector<std::string> lines;
  switch (stage) {
    case NarrativeStage::Start:
      lines = {"Once upon a time, {c1}, {c2}, and {c3} were best friends.",
               "One sunny morning, they went on a trip to the {place}.",
               "They brought a {item} with them to help on their way.",
               "When they arrived at the {place}, everyone felt {emotion}.",
               "{c1} looked around and held the {item} tightly.",
               "{c2} and {c3} stayed close together.",
               "They did not know what would happen next, but they knew they had each other."};
      break;
    case NarrativeStage::Journey:
      lines = {"{c1}, {c2}, and {c3} set out on a journey to the {place}.",
               "On the way, they found a {item}.",
               "{c2} picked up the {item} and smiled.",
               "The path to the {place} was long and full of surprises.",
               "Everyone felt {emotion} as they went along.",
               "{c3} pointed at something far away.",
               "They wondered what adventures were waiting for them."};
      break;
    case NarrativeStage::Climax:
      lines = {"Suddenly, {c1}, {c2}, and {c3} reached the {place}.",
               "Something big and surprising was waiting there!",
               "{c1} held up the {item} to see what it was.",
               "All three friends felt {emotion}.",
               "{c2} took a deep breath and stepped forward.",
               "{c3} stayed right beside the others.",
               "Would they be brave enough to face what was coming?"};
      break;
    case NarrativeStage::End:
      lines = {"At last, {c1}, {c2}, and {c3} came to the {place}.",
               "They used the {item} one more time.",
               "Everything was calm and peaceful now.",
               "The friends felt {emotion} as they looked back on their adventure.",
               "{c3} gave {c1} and {c2} a big hug.",
               "They promised to always help each other.",
               "And they lived happily ever after."};
      break;
  }
  NarratorContext ctx;
  ctx.story.characters = characters;
  ctx.selection.place = place;
  ctx.selection.item = item;
  ctx.selection.emotion = emotion;
  return fill_placeholders(text::join(lines, " "), ctx);
}

std::string stub_update(const std::string& draft, const std::vector<std::string>& answers) {
  static const std::array<std::string_view, 3> prefixes{"Then, ", "Also, ", "After that, "};
  static const std::array<std::string_view, 3> fillers{"The friends smiled at each other.",
                                                       "It was a day they would always remember.",
                                                       "Together, they were ready for whatever came next."};
  std::vector<std::string> usable;
  for (const auto& a : answers)
    if (!text::terms(a).empty()) usable.push_back(a);
  while (usable.size() > 3) {
    usable[2] = text::as_clause(usable[2]) + ", and " + text::as_clause(usable[3]);
    usable.erase(usable.begin() + 3);
  }
  std::vector<std::string> out{draft};
  for (std::size_t i = 0; i < 3; ++i)
    out.push_back(i < usable.size() ? sentence_from_answer(prefixes[i], usable[i]) : std::string(fillers[i]));
  return text::join(out, " ");
}

std::string stub_question(const ScaffoldQuestionSpec& spec, const NarratorContext& ctx) {
  bool later_stage = ctx.stage == NarrativeStage::Journey || ctx.stage == NarrativeStage::End;
  std::string q;
  switch (spec.scaffold) {
    case ScaffoldType::PrimitiveNarrative: q = "What else do you think they might do at the {place}?"; break;
    case ScaffoldType::ChainNarrative: q = "Why do you think they decided to use the {item}?"; break;
    case ScaffoldType::SocialAwareness:
      q = later_stage ? "How might one of them feel different from the others at the {place}?"
                      : "How do they feel about each other right now?";
      break;
    case ScaffoldType::OpenInvitation: q = "Would you like to add something to the story?"; break;
    case ScaffoldType::TrueNarrative:
      q = ctx.question_ordinal == 0
              ? "Can you tell me how our story began, what happened in the middle, and how it ended?"
              : "What if our story had a different ending? How would it end?";
      break;
    case ScaffoldType::RelationshipSkills:
      q = "When everyone felt " + text::lower(value_at(ctx, NarrativeStage::Climax, ElementKind::Emotion, "worried")) +
          " at the " + value_at(ctx, NarrativeStage::Climax, ElementKind::Place, "end") +
          ", what could {c1} do to help {c2}?";
      break;
    case ScaffoldType::ResponsibleDecisionMaking: q = "If you were {c3}, what would you do to be a good friend to {c1}?"; break;
    case ScaffoldType::SelfAwareness: q = "How would you feel if you were there with them?"; break;
    case ScaffoldType::SelfManagement: q = "What could {c1} do to feel calm again?"; break;
  }
  return fill_placeholders(q, ctx);
}

std::string StubNarrator::complete(const NarratorContext& ctx) {
  if (!ctx.script) throw Error(ErrorCode::EmptyResponse, "stub narrator needs a script");
  const auto& node = ctx.script->node(ctx.node);
  auto ask_again = [&] { return ctx.last_question.empty() ? fill_placeholders(node.stub, ctx) : ctx.last_question; };
  std::vector<std::string> parts;
  switch (ctx.purpose) {
    case Purpose::Perform:
      parts.push_back(fill_placeholders(node.stub, ctx));
      if (node.act == NodeAct::Draft && ctx.stage && ctx.selection.complete()) {
        parts.push_back("<story>" +
                        stub_draft(*ctx.stage, ctx.story.characters, *ctx.selection.place, *ctx.selection.item,
                                   *ctx.selection.emotion) +
                        "</story>");
      } else if (node.act == NodeAct::Update && stage_record(ctx)) {
        parts.push_back("<story>" + stub_update(stage_record(ctx)->draft, ctx.answers) + "</story>");
        parts.push_back(fill_placeholders(node.after, ctx));
      } else if (node.act == NodeAct::Question && ctx.pending_question) {
        parts.push_back(stub_question(*ctx.pending_question, ctx));
      }
      break;
    case Purpose::React:
      parts.push_back(node.after.empty() ? "Thank you for telling me!" : fill_placeholders(node.after, ctx));
      break;
    case Purpose::Stay: parts.push_back(ask_again()); break;
    case Purpose::Clarify: parts.push_back("I'm not sure what you mean. Let me ask again: " + ask_again()); break;
    case Purpose::FollowUp: {
      auto clause = text::as_clause(ctx.child_text);
      if (!clause.empty()) clause[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(clause[0])));
      std::string about;
      if (node.capture.size() == 5 && node.capture.rfind("note", 0) == 0)
        about = " about " + character(ctx, static_cast<std::size_t>(node.capture[4] - '1'));
      parts.push_back(clause + ".. what? Tell me more" + about + "!");
      break;
    }
    case Purpose::OffScript:
      parts.push_back("That's a fun question! I'm an AI, so let's keep making our story together.");
      parts.push_back(ask_again());
      break;
    case Purpose::Correction:
      if (!ctx.correction_from.empty() && !ctx.correction_to.empty())
        parts.push_back("Oh, thank you for fixing that! It was " + ctx.correction_to + ", not " + ctx.correction_from +
                        ".");
      else
        parts.push_back("Oh, I'm sorry! Thank you for telling me.");
      parts.push_back(ask_again());
      break;
    case Purpose::Rescan:
      parts.push_back("Sure! Go ahead and scan a different " +
                      color_of(ctx.rescan_kind.value_or(node.scan_kind.value_or(ElementKind::Place))) + ".");
      break;
  }
  if (ctx.awaiting_marker) parts.push_back(ctx.script->marker);
  return join_nonempty(parts);
}

// ---------------------------------------------------------------------------
// Recorded

RecordedNarrator RecordedNarrator::from_log(const SessionLog& log) {
  std::vector<std::string> replies;
  for (const auto& r : log.records)
    if (r.value("type", "") == "narration") replies.push_back(r.value("raw", ""));
  return RecordedNarrator(std::move(replies));
}

std::string RecordedNarrator::complete(const NarratorContext&) {
  if (next_ >= replies_.size()) throw Error(ErrorCode::BadRecord, "recorded narration exhausted");
  return replies_[next_++];
}

// ---------------------------------------------------------------------------
// Remote request shape

std::string render_script(const PhaseScript& script) {
  std::string out = script.title.empty() ? "## Topic Script: " + std::string(to_string(script.phase)) : script.title;
  if (!script.intro.empty()) out += "\n" + script.intro;
  out += "\n\n### Dialogue Graph\n";
  for (const auto& n : script.nodes) {
    out += "(" + n.id + ") " + n.say + "\n";
    for (const auto& r : n.rules) out += "  - " + r + "\n";
  }
  if (!script.declared_paths.empty()) {
    out += "\n### Possible Dialogue Paths\n";
    for (const auto& p : script.declared_paths) {
      std::vector<std::string> ids;
      for (const auto& id : p) ids.push_back("(" + id + ")");
      out += text::join(ids, " → ") + " → " + script.marker + "\n";
    }
  }
  return out;
}

namespace {

std::string story_state(const NarratorContext& ctx) {
  std::string out;
  if (!ctx.story.characters.empty()) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < ctx.story.characters.size(); ++i) {
      auto n = ctx.story.characters[i].value;
      if (i < ctx.story.character_notes.size() && !ctx.story.character_notes[i].empty())
        n += " (" + ctx.story.character_notes[i] + ")";
      names.push_back(n);
    }
    out += "Characters: " + text::join(names, ", ") + "\n";
  }
  if (ctx.story.premise) out += "Story idea: " + *ctx.story.premise + "\n";
  for (const auto& s : ctx.story.stages)
    out += std::string(to_string(s.stage)) + " (" + s.place.value + ", " + s.item.value + ", " + s.emotion.value +
           "): " + s.final_text() + "\n";
  std::vector<std::string> chosen;
  for (const auto* e : {&ctx.selection.place, &ctx.selection.item, &ctx.selection.emotion})
    if (*e) chosen.push_back(std::string(to_string((*e)->kind)) + ":" + (*e)->value);
  if (!chosen.empty()) out += "Tokens chosen for this page: " + text::join(chosen, ", ") + "\n";
  return out;
}

std::string step_instruction(const NarratorContext& ctx) {
  const auto& marker = ctx.script->marker;
  const auto* node = ctx.script->find(ctx.node);
  std::string id = "(" + ctx.node + ")";
  std::string s;
  switch (ctx.purpose) {
    case Purpose::Perform:
      s = "Carry out step " + id + " now.";
      if (node && node->act == NodeAct::Draft)
        s += " Put the story text between <story> and </story>; it should be about seven sentences.";
      if (node && node->act == NodeAct::Update)
        s += " Put the updated story between <story> and </story>; it should be about ten sentences. Child's answers: " +
             text::join(ctx.answers, " | ");
      if (ctx.pending_question)
        s += " Scaffold this question as " + std::string(question_frame_label(ctx.pending_question->scaffold)) + ". " +
             ctx.pending_question->guidance + " Example: " + ctx.pending_question->exemplar;
      break;
    case Purpose::React: s = "The child's answer completes this topic. Respond briefly."; break;
    case Purpose::Stay: s = "The child's answer does not let you move on from " + id + ". Ask again kindly."; break;
    case Purpose::Clarify: s = "The child's answer could not be understood. Say you are not sure and ask again."; break;
    case Purpose::FollowUp: s = "The child stopped mid-sentence. Repeat what they said and ask them to go on."; break;
    case Purpose::OffScript:
      s = "The child asked something outside the script. Answer in one short sentence, then return to " + id + ".";
      break;
    case Purpose::Correction:
      s = "The child corrected the story";
      if (!ctx.correction_from.empty()) s += " (" + ctx.correction_from + " -> " + ctx.correction_to + ")";
      s += ". Acknowledge the fix, then return to " + id + ".";
      break;
    case Purpose::Rescan: s = "The child wants to change a token. Tell them to scan a different one."; break;
  }
  if (ctx.awaiting_marker)
    s += " Then say the phrase \"" + marker + "\" exactly.";
  else
    s += " Do not say \"" + marker + "\" yet.";
  if (!ctx.reprompt.empty()) s += "\nYour previous reply was rejected: " + ctx.reprompt + ". Reply again.";
  return s;
}

}  // namespace

Json build_request(const NarratorContext& ctx, const RemoteConfig& cfg) {
  if (!ctx.script) throw Error(ErrorCode::ProviderUnavailable, "request without script");
  std::string system = ctx.preamble + "\n\n" + render_script(*ctx.script) + "\n\n## Current story\n" +
                       story_state(ctx) + "\n## Next step\n" + step_instruction(ctx);
  Json messages = Json::array();
  for (const auto& t : ctx.transcript) {
    std::string role = t.speaker == Speaker::Child ? "user" : "assistant";
    if (!messages.empty() && messages.back()["role"] == role)
      messages.back()["content"] = messages.back()["content"].get<std::string>() + "\n" + t.text;
    else
      messages.push_back({{"role", role}, {"content", t.text}});
  }
  if (messages.empty() || messages.back()["role"] != "user") messages.push_back({{"role", "user"}, {"content", "[continue]"}});
  return Json{{"model", cfg.model}, {"max_tokens", cfg.max_tokens}, {"system", system}, {"messages", messages}};
}

std::string response_text(const Json& body) {
  if (body.contains("content") && body["content"].is_array()) {
    std::string out;
    for (const auto& part : body["content"])
      if (part.value("type", "text") == "text") out += part.value("text", "");
    return out;
  }
  if (body.contains("choices") && body["choices"].is_array() && !body["choices"].empty())
    return body["choices"][0].at("message").value("content", "");
  throw ProviderError(ProviderCause::BadResponse, "unrecognized response body");
}

}  // namespace tinker

#include "tinker/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>

#include "tinker/error.hpp"
#include "tinker/text.hpp"

namespace tinker {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Practice: return "practice";
    case Phase::Opening: return "opening";
    case Phase::Characters: return "characters";
    case Phase::Start: return "start";
    case Phase::Journey: return "journey";
    case Phase::Climax: return "climax";
    case Phase::End: return "end";
    case Phase::PostStory: return "post-story";
    case Phase::Closing: return "closing";
  }
  return "?";
}

std::optional<Phase> phase_from_string(std::string_view name) {
  for (auto p : {Phase::Practice, Phase::Opening, Phase::Characters, Phase::Start, Phase::Journey,
                 Phase::Climax, Phase::End, Phase::PostStory, Phase::Closing})
    if (to_string(p) == name) return p;
  return std::nullopt;
}

std::optional<NarrativeStage> stage_of(Phase phase) {
  switch (phase) {
    case Phase::Start: return NarrativeStage::Start;
    case Phase::Journey: return NarrativeStage::Journey;
    case Phase::Climax: return NarrativeStage::Climax;
    case Phase::End: return NarrativeStage::End;
    default: return std::nullopt;
  }
}

Phase phase_of(NarrativeStage stage) {
  switch (stage) {
    case NarrativeStage::Start: return Phase::Start;
    case NarrativeStage::Journey: return Phase::Journey;
    case NarrativeStage::Climax: return Phase::Climax;
    case NarrativeStage::End: return Phase::End;
  }
  return Phase::Start;
}

std::string_view to_string(Guard g) {
  switch (g) {
    case Guard::Always: return "always";
    case Guard::Yes: return "yes";
    case Guard::No: return "no";
    case Guard::Adds: return "adds";
    case Guard::Declines: return "declines";
  }
  return "?";
}

std::string_view to_string(NodeAct a) {
  switch (a) {
    case NodeAct::Speak: return "speak";
    case NodeAct::Draft: return "draft";
    case NodeAct::Update: return "update";
    case NodeAct::Question: return "question";
  }
  return "?";
}

std::string_view to_string(DiagnosticKind k) {
  switch (k) {
    case DiagnosticKind::Unreachable: return "Unreachable";
    case DiagnosticKind::PathMismatch: return "PathMismatch";
    case DiagnosticKind::MissingRedirect: return "MissingRedirect";
    case DiagnosticKind::DeadEnd: return "DeadEnd";
    case DiagnosticKind::BadAgentNode: return "BadAgentNode";
    case DiagnosticKind::UnboundedLoop: return "UnboundedLoop";
  }
  return "?";
}

std::string_view to_string(Intent i) {
  switch (i) {
    case Intent::Neutral: return "neutral";
    case Intent::Affirm: return "affirm";
    case Intent::Deny: return "deny";
    case Intent::Decline: return "decline";
    case Intent::Contribute: return "contribute";
  }
  return "?";
}

std::string_view to_string(EffectKind k) {
  switch (k) {
    case EffectKind::Advanced: return "advanced";
    case EffectKind::AwaitingMarker: return "awaiting-marker";
    case EffectKind::Redirect: return "redirect";
    case EffectKind::Stay: return "stay";
    case EffectKind::Ignored: return "ignored";
    case EffectKind::Completed: return "completed";
  }
  return "?";
}

bool DialogueNode::terminal() const {
  return std::any_of(transitions.begin(), transitions.end(), [](const Transition& t) { return t.completes(); });
}

const DialogueNode* PhaseScript::find(std::string_view id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const DialogueNode& PhaseScript::node(std::string_view id) const {
  if (const auto* n = find(id)) return *n;
  throw Error(ErrorCode::DanglingTransition, "no node " + std::string(id));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

[[noreturn]] void syntax(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::SyntaxError, "line " + std::to_string(line) + ": " + what);
}

bool valid_node_id(std::string_view id) {
  return id.size() == 1 && std::isupper(static_cast<unsigned char>(id[0]));
}

/// Splits "key: value" / "key value"; returns {key, value}.
std::pair<std::string, std::string> split_key(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && line[i] != ':' && line[i] != ' ' && line[i] != '\t') ++i;
  std::string key(line.substr(0, i));
  std::string_view rest = line.substr(i);
  if (!rest.empty() && rest.front() == ':') rest.remove_prefix(1);
  return {key, std::string(text::trim(rest))};
}

std::optional<Guard> guard_from(std::string_view name) {
  for (auto g : {Guard::Always, Guard::Yes, Guard::No, Guard::Adds, Guard::Declines})
    if (to_string(g) == name) return g;
  return std::nullopt;
}

std::vector<std::string> path_steps(std::string_view line) {
  // accepts "A -> B", "A → B" and an optional "1." prefix
  std::string s(line);
  for (std::string_view arrow : {"→", "->"}) {
    std::size_t pos = 0;
    while ((pos = s.find(arrow, pos)) != std::string::npos) s.replace(pos, arrow.size(), " ");
  }
  auto toks = text::words(s);
  if (!toks.empty() && toks.front().back() == '.' &&
      std::all_of(toks.front().begin(), toks.front().end() - 1, [](char c) { return std::isdigit(c); }))
    toks.erase(toks.begin());
  for (auto& t : toks) {
    if (t.size() >= 3 && t.front() == '(' && t.back() == ')') t = t.substr(1, t.size() - 2);
  }
  return toks;
}

}  // namespace

PhaseScript parse_script(std::string_view source) {
  PhaseScript script;
  bool have_phase = false;
  DialogueNode* node = nullptr;
  bool in_paths = false;
  std::set<std::string> ids;
  std::map<std::string, std::size_t> goto_lines;
  std::size_t lineno = 0;

  for (const auto& raw : text::split(source, '\n')) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line == "#" || line.starts_with("# ")) continue;

    if (in_paths) {
      auto steps = path_steps(line);
      if (steps.size() < 2) syntax(lineno, "path needs at least one node and the marker");
      if (steps.back() != script.marker) syntax(lineno, "path must end with " + script.marker);
      steps.pop_back();
      if (steps.front() != script.entry) syntax(lineno, "path must start at entry node " + script.entry);
      for (const auto& s : steps)
        if (!valid_node_id(s)) syntax(lineno, "bad node id in path: " + s);
      script.declared_paths.push_back(std::move(steps));
      continue;
    }

    auto [key, value] = split_key(line);
    if (key == "paths") {
      if (!value.empty()) syntax(lineno, "paths: takes no value");
      in_paths = true;
      node = nullptr;
      continue;
    }
    if (key == "node") {
      if (!valid_node_id(value)) syntax(lineno, "node id must be one capital letter: '" + value + "'");
      if (!ids.insert(value).second)
        throw Error(ErrorCode::DuplicateNodeId, "line " + std::to_string(lineno) + ": " + value);
      script.nodes.push_back(DialogueNode{});
      node = &script.nodes.back();
      node->id = value;
      if (script.entry.empty()) script.entry = value;
      continue;
    }

    if (!node) {
      if (key == "phase") {
        auto p = phase_from_string(value);
        if (!p) syntax(lineno, "unknown phase '" + value + "'");
        script.phase = *p;
        have_phase = true;
      } else if (key == "variant") {
        script.variant = value;
      } else if (key == "title") {
        script.title = value;
      } else if (key == "marker") {
        if (value != kNextMarker && value != kDoneMarker) syntax(lineno, "unknown marker '" + value + "'");
        script.marker = value;
      } else if (key == "intro") {
        script.intro = value;
      } else if (key == "entry") {
        script.entry = value;
      } else {
        syntax(lineno, "unknown header key '" + key + "'");
      }
      continue;
    }

    if (key == "say") {
      node->say = value;
    } else if (key == "rule") {
      node->rules.push_back(value);
    } else if (key == "expects") {
      if (value == "utterance") {
        node->expects = Expect::Utterance;
      } else if (value == "none") {
        node->expects = Expect::None;
      } else if (value.starts_with("scan:")) {
        auto kind = kind_from_string(value.substr(5));
        if (!kind) syntax(lineno, "unknown scan kind '" + value.substr(5) + "'");
        node->expects = Expect::Scan;
        node->scan_kind = kind;
      } else {
        syntax(lineno, "expects must be utterance, none or scan:<Kind>");
      }
    } else if (key == "mismatch") {
      node->mismatch = value;
    } else if (key == "act") {
      if (value == "speak") node->act = NodeAct::Speak;
      else if (value == "draft") node->act = NodeAct::Draft;
      else if (value == "update") node->act = NodeAct::Update;
      else if (value == "question") node->act = NodeAct::Question;
      else syntax(lineno, "unknown act '" + value + "'");
    } else if (key == "capture") {
      if (value != "premise" && value != "note1" && value != "note2" && value != "note3")
        syntax(lineno, "unknown capture slot '" + value + "'");
      node->capture = value;
    } else if (key == "stub") {
      node->stub = value;
    } else if (key == "after") {
      node->after = value;
    } else if (key.starts_with("goto")) {
      Transition t;
      if (key != "goto") {
        if (!(key.size() > 6 && key[4] == '[' && key.back() == ']')) syntax(lineno, "bad guard syntax");
        auto g = guard_from(std::string_view(key).substr(5, key.size() - 6));
        if (!g) syntax(lineno, "unknown guard in '" + key + "'");
        t.guard = *g;
      }
      if (value.empty()) syntax(lineno, "goto needs a target");
      if (value.starts_with("##")) {
        if (script.marker.empty()) syntax(lineno, "marker must be declared before nodes");
        if (value != script.marker) syntax(lineno, "'" + value + "' is not this script's marker");
      } else {
        t.target = value;
        goto_lines.emplace(node->id + ">" + value, lineno);
      }
      node->transitions.push_back(std::move(t));
    } else {
      syntax(lineno, "unknown node key '" + key + "'");
    }
  }

  if (!have_phase) syntax(lineno, "missing 'phase'");
  if (script.marker.empty()) syntax(lineno, "missing 'marker'");
  if (script.nodes.empty()) syntax(lineno, "script has no nodes");
  if (!script.find(script.entry)) throw Error(ErrorCode::DanglingTransition, "entry node " + script.entry);
  for (const auto& n : script.nodes) {
    if (n.expects == Expect::Scan && !n.scan_kind) syntax(lineno, "scan node without kind");
    for (const auto& t : n.transitions) {
      if (t.target && !script.find(*t.target)) {
        auto where = goto_lines[n.id + ">" + *t.target];
        throw Error(ErrorCode::DanglingTransition,
                    "line " + std::to_string(where) + ": " + n.id + " -> " + *t.target);
      }
    }
  }
  for (const auto& p : script.declared_paths)
    for (const auto& id : p)
      if (!script.find(id)) throw Error(ErrorCode::DanglingTransition, "declared path names " + id);
  return script;
}

PhaseScript load_script(const std::filesystem::path& path) {
  try {
    return parse_script(text::read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Paths

namespace {

std::map<std::string, int> visit_bounds(const PhaseScript& s) {
  std::map<std::string, int> bound;
  for (const auto& n : s.nodes) bound[n.id] = 1;
  for (const auto& p : s.declared_paths) {
    std::map<std::string, int> count;
    for (const auto& id : p) ++count[id];
    for (const auto& [id, c] : count) bound[id] = std::max(bound[id], c);
  }
  return bound;
}

/// Nodes lying on some cycle (Tarjan SCC of size > 1, or a self-loop).
std::vector<std::vector<std::string>> cyclic_components(const PhaseScript& s) {
  std::map<std::string, int> index, low;
  std::map<std::string, bool> on_stack;
  std::vector<std::string> stack;
  std::vector<std::vector<std::string>> out;
  int counter = 0;

  std::function<void(const std::string&)> strong = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    bool self_loop = false;
    for (const auto& t : s.node(v).transitions) {
      if (!t.target) continue;
      const auto& w = *t.target;
      if (w == v) self_loop = true;
      if (!index.count(w)) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::string> comp;
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      if (comp.size() > 1 || self_loop) out.push_back(std::move(comp));
    }
  };
  for (const auto& n : s.nodes)
    if (!index.count(n.id)) strong(n.id);
  return out;
}

}  // namespace

std::vector<NodePath> enumerate_paths(const PhaseScript& script) {
  auto bound = visit_bounds(script);
  for (const auto& comp : cyclic_components(script)) {
    bool declared = std::any_of(comp.begin(), comp.end(), [&](const std::string& id) { return bound[id] > 1; });
    if (!declared)
      throw Error(ErrorCode::UnboundedLoop, "cycle through " + text::join(comp, ",") + " has no declared unrolling");
  }

  std::vector<NodePath> paths;
  NodePath current;
  std::map<std::string, int> visits;
  std::function<void(const std::string&)> walk = [&](const std::string& id) {
    current.push_back(id);
    ++visits[id];
    for (const auto& t : script.node(id).transitions) {
      if (t.completes()) {
        if (std::find(paths.begin(), paths.end(), current) == paths.end()) paths.push_back(current);
      } else if (visits[*t.target] < bound[*t.target]) {
        walk(*t.target);
      }
    }
    --visits[id];
    current.pop_back();
  };
  walk(script.entry);
  return paths;
}

std::vector<Diagnostic> validate_script(const PhaseScript& script) {
  std::vector<Diagnostic> out;

  std::set<std::string> reached;
  std::vector<std::string> frontier{script.entry};
  while (!frontier.empty()) {
    auto id = frontier.back();
    frontier.pop_back();
    if (!reached.insert(id).second) continue;
    for (const auto& t : script.node(id).transitions)
      if (t.target) frontier.push_back(*t.target);
  }

  for (const auto& n : script.nodes) {
    if (!reached.count(n.id))
      out.push_back({DiagnosticKind::Unreachable, n.id, "node " + n.id + " cannot be reached from " + script.entry});
    if (n.transitions.empty())
      out.push_back({DiagnosticKind::DeadEnd, n.id, "node " + n.id + " has no transitions"});
    if (n.expects == Expect::Scan && text::trim(n.mismatch).empty())
      out.push_back({DiagnosticKind::MissingRedirect, n.id, "scan node " + n.id + " has no mismatch redirect"});
    if (n.expects == Expect::None &&
        (n.transitions.size() != 1 || n.transitions.front().guard != Guard::Always))
      out.push_back({DiagnosticKind::BadAgentNode, n.id, "agent-only node " + n.id + " needs exactly one unguarded goto"});
    if ((n.act == NodeAct::Question || !n.capture.empty()) && n.expects != Expect::Utterance)
      out.push_back({DiagnosticKind::BadAgentNode, n.id, "node " + n.id + " asks for an answer but does not expect one"});
    if ((n.act == NodeAct::Draft || n.act == NodeAct::Update) && n.expects != Expect::None)
      out.push_back({DiagnosticKind::BadAgentNode, n.id, "story node " + n.id + " must expect none"});
  }

  try {
    auto found = enumerate_paths(script);
    std::set<NodePath> enumerated(found.begin(), found.end());
    std::set<NodePath> declared(script.declared_paths.begin(), script.declared_paths.end());
    for (const auto& p : declared)
      if (!enumerated.count(p))
        out.push_back({DiagnosticKind::PathMismatch, p.back(), "declared path " + text::join(p, ">") + " is not in the graph"});
    for (const auto& p : enumerated)
      if (!declared.count(p))
        out.push_back({DiagnosticKind::PathMismatch, p.back(), "graph path " + text::join(p, ">") + " is not declared"});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnboundedLoop) throw;
    out.push_back({DiagnosticKind::UnboundedLoop, script.entry, e.what()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cursor

GraphCursor start_cursor(const PhaseScript& script) {
  GraphCursor c;
  c.phase = script.phase;
  c.current = script.entry;
  c.visited = {script.entry};
  const auto& n = script.node(script.entry);
  c.awaiting_marker = n.expects == Expect::None && n.terminal();
  return c;
}

namespace {

bool guard_matches(Guard g, Intent intent) {
  bool negative = intent == Intent::Deny || intent == Intent::Decline;
  switch (g) {
    case Guard::Always: return true;
    case Guard::Yes:
    case Guard::Adds: return !negative;
    case Guard::No:
    case Guard::Declines: return negative;
  }
  return false;
}

GraphStep take(GraphCursor c, const PhaseScript& s, const Transition& t) {
  if (t.completes()) {
    c.awaiting_marker = true;
    return {std::move(c), {EffectKind::AwaitingMarker, {}}};
  }
  c.current = *t.target;
  c.visited.push_back(c.current);
  const auto& next = s.node(c.current);
  c.awaiting_marker = next.expects == Expect::None && next.terminal();
  std::string id = c.current;
  return {std::move(c), {EffectKind::Advanced, std::move(id)}};
}

bool open_transition(const Transition& t, const GraphCursor& c, const std::map<std::string, int>& bound) {
  if (t.completes()) return true;
  auto seen = std::count(c.visited.begin(), c.visited.end(), *t.target);
  return seen < bound.at(*t.target);
}

/// First transition whose guard accepts the intent and whose target still has
/// visits left. When every matching transition is exhausted (a loop already
/// unrolled as often as the declared paths allow) the first open one is taken.
const Transition* first_match(const DialogueNode& n, const PhaseScript& s, const GraphCursor& c, Intent intent) {
  auto bound = visit_bounds(s);
  bool matched = false;
  for (const auto& t : n.transitions) {
    if (!guard_matches(t.guard, intent)) continue;
    matched = true;
    if (open_transition(t, c, bound)) return &t;
  }
  if (!matched) return nullptr;
  for (const auto& t : n.transitions)
    if (open_transition(t, c, bound)) return &t;
  return nullptr;
}

}  // namespace

GraphStep advance(GraphCursor cursor, const PhaseScript& script, const GraphInput& in) {
  if (cursor.complete) throw Error(ErrorCode::InputAfterComplete, std::string(to_string(script.phase)));
  const auto& node = script.node(cursor.current);

  if (const auto* m = std::get_if<input::Marker>(&in)) {
    if (m->text != script.marker)
      throw Error(ErrorCode::WrongMarker, m->text + " in a " + script.marker + " script");
    if (!cursor.awaiting_marker)
      throw Error(ErrorCode::MarkerBeforeCompletion, "marker at node " + cursor.current);
    cursor.complete = true;
    cursor.awaiting_marker = false;
    return {std::move(cursor), {EffectKind::Completed, {}}};
  }

  if (cursor.awaiting_marker) return {std::move(cursor), {EffectKind::Stay, {}}};

  switch (node.expects) {
    case Expect::Scan: {
      if (const auto* scan = std::get_if<input::Scan>(&in)) {
        if (scan->element.kind != node.scan_kind) return {std::move(cursor), {EffectKind::Redirect, node.mismatch}};
        if (const auto* t = first_match(node, script, cursor, Intent::Neutral)) return take(std::move(cursor), script, *t);
        return {std::move(cursor), {EffectKind::Stay, {}}};
      }
      if (std::holds_alternative<input::Utterance>(in))
        return {std::move(cursor), {EffectKind::Redirect, node.mismatch}};
      return {std::move(cursor), {EffectKind::Ignored, {}}};
    }
    case Expect::Utterance: {
      if (const auto* u = std::get_if<input::Utterance>(&in)) {
        if (const auto* t = first_match(node, script, cursor, u->intent)) return take(std::move(cursor), script, *t);
        return {std::move(cursor), {EffectKind::Stay, {}}};
      }
      return {std::move(cursor), {EffectKind::Ignored, {}}};
    }
    case Expect::None: {
      if (std::holds_alternative<input::Continue>(in))
        if (const auto* t = first_match(node, script, cursor, Intent::Neutral)) return take(std::move(cursor), script, *t);
      return {std::move(cursor), {EffectKind::Ignored, {}}};
    }
  }
  return {std::move(cursor), {EffectKind::Ignored, {}}};
}

}  // namespace tinker

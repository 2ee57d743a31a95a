#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chatabl/abduction.hpp"
#include "chatabl/knowledge_base.hpp"
#include "chatabl/symbol.hpp"

namespace chatabl {

enum class Role { System, User, Assistant };

struct ChatMessage {
    Role role;
    std::string content;
};

enum class PromptKind { CDP, RDP };

// An assembled chat prompt: exactly one leading system message followed by
// the user query. RDP prompts carry the penalty text, CDP prompts never do.
struct Prompt {
    std::vector<ChatMessage> messages;
    PromptKind kind;
    std::string expression;
    std::optional<std::string> penalty;
};

struct Verdict {
    bool consistent = false;
    std::string reason;
    std::optional<std::string> corrected_expression;
    std::optional<std::string> operation_guess;
};

enum class LoopStatus { Running, Accepted, Exhausted };

struct LoopRecord {
    Prompt prompt;
    std::string reply;
    std::optional<Verdict> verdict;
};

struct LoopState {
    int iteration = 0;
    std::vector<LoopRecord> history;
    LoopStatus status = LoopStatus::Running;
};

// The fixed query sentences and default penalty text used by the dynamic
// prompts.
extern const char* const kCdpQuery;
extern const char* const kRdpQuery;
extern const char* const kDefaultPenalty;

// Consistency discrimination prompt: system message assigns the reasoning
// expert role, renders the rules, attaches the k closest exemplars and the
// reply grammar; the user message is the CDP query followed by the
// expression. Pure function of (kb, expression, k).
Prompt build_cdp(const KnowledgeBase& kb, const std::string& expression, std::size_t k);

// Re-reasoning dynamic prompt: like the CDP but asks for a correction and
// the likely operation type, with the penalty text prepended to the query.
Prompt build_rdp(const KnowledgeBase& kb, const std::string& expression, const std::string& penalty,
                 std::size_t k);

// Reply grammar: first `VERDICT: CONSISTENT` / `VERDICT: INCONSISTENT`
// line, optional `CORRECTED: <expr>` and `OPERATION: <text>` lines.
// nullopt on an unparseable reply (distinct from "inconsistent").
std::optional<Verdict> parse_reply(const std::string& text, PromptKind kind);

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReplayMiss : BackendError {
    using BackendError::BackendError;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string name() const = 0;
    virtual std::string chat(const Prompt& prompt) = 0;
};

// Free-function form of the operation.
std::string chat(ChatBackend& backend, const Prompt& prompt);

// Deterministic offline backend: answers CDP by checking the expression
// against the knowledge base and the hypothesis state, and RDP by running
// the abduction oracle on a synthetic pseudo-label built from the
// expression (stated symbol probability 0.85, rest uniform).
class MockBackend : public ChatBackend {
public:
    MockBackend(KnowledgeBase kb, HypothesisState state, int edit_budget = 0);

    std::string name() const override { return "mock"; }
    std::string chat(const Prompt& prompt) override;

    // The pseudo-label the mock derives from an expression; exposed so
    // tests can call the oracle on identical input.
    static PseudoLabel pseudo_from_expression(const SymbolSeq& symbols);

private:
    KnowledgeBase kb_;
    HypothesisState state_;
    int edit_budget_;
};

struct LiveConfig {
    std::string url;        // falls back to env CHATABL_API_URL
    std::string api_key;    // falls back to env CHATABL_API_KEY
    std::string model = "gpt-3.5-turbo";
    int max_tokens = 512;
    int max_retries = 3;
    int backoff_ms = 500;     // doubled per retry
    int min_interval_ms = 0;  // simple admission rate limit
    double timeout_s = 60.0;
};

// Chat-completions-style HTTP backend: POST {model, temperature: 0,
// max_tokens, messages} with a bearer token, read
// choices[0].message.content. Bounded retries with exponential backoff.
class LiveBackend : public ChatBackend {
public:
    explicit LiveBackend(LiveConfig config);

    std::string name() const override { return "live"; }
    std::string chat(const Prompt& prompt) override;

private:
    LiveConfig config_;
    std::int64_t last_call_ms_ = 0;
};

// Content digest for cassette keying: FNV-1a 64 over
// "<role>\x1f<content>\x1e" per message, rendered as 16 hex digits.
std::string prompt_digest(const Prompt& prompt);

// Replays recorded replies keyed by prompt digest; a miss is an error,
// never a fabricated reply.
class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(const std::string& cassette_path);

    std::string name() const override { return "replay"; }
    std::string chat(const Prompt& prompt) override;

private:
    std::map<std::string, std::string> replies_;
};

// Wraps another backend and appends {prompt_digest, request, reply,
// timestamp} JSONL records to the cassette.
class RecordingBackend : public ChatBackend {
public:
    RecordingBackend(std::unique_ptr<ChatBackend> inner, const std::string& cassette_path);

    std::string name() const override { return "recording"; }
    std::string chat(const Prompt& prompt) override;

private:
    std::unique_ptr<ChatBackend> inner_;
    std::string path_;
};

struct LoopOptions {
    int max_iterations = 5;
    std::size_t exemplar_k = 3;  // clamped to the store size
    std::string penalty = kDefaultPenalty;
    // Gated mode verifies acceptance locally (structural check plus, when
    // a state is present, hypothesis consistency); faithful mode trusts
    // the backend's verdict.
    bool gated = true;
    const HypothesisState* state = nullptr;
    int parse_retries = 2;
};

struct LoopOutcome {
    LoopStatus status = LoopStatus::Exhausted;
    std::optional<RevisionResult> result;
    LoopState loop_state;
};

// CDP -> (if inconsistent) RDP with penalty -> CDP on the corrected
// expression, until acceptance or the iteration budget is exhausted.
LoopOutcome self_feedback_loop(const std::string& expression, const KnowledgeBase& kb,
                               ChatBackend& backend, int max_iterations,
                               const LoopOptions& options = {});

} // namespace chatabl
